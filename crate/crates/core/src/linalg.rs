//! Dense complex matrices and the Hermitian eigensolver used by the supercell
//! and bulk computations.

use std::sync::Once;

use faer::complex_native::c64;
use faer::{Mat, Parallelism};

use crate::C64;

/// Row-major dense complex square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest |A_ij - conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let row = &self.data[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.dim, other.dim);
        DenseMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    /// Hermitian eigendecomposition, eigenvalues ascending. Only the lower
    /// triangle is read. Real matrices take a real-arithmetic path.
    pub fn eigh(&self) -> Eigh {
        init_solver();
        let n = self.dim;
        let (values, vectors) = if self.is_real() {
            let m = Mat::<f64>::from_fn(n, n, |i, j| self.get(i, j).re);
            let e = m.selfadjoint_eigendecomposition(faer::Side::Lower);
            let s = e.s().column_vector();
            let u = e.u();
            let values: Vec<f64> = (0..n).map(|i| s.read(i)).collect();
            let mut vectors = vec![C64::new(0.0, 0.0); n * n];
            for c in 0..n {
                for r in 0..n {
                    vectors[c * n + r] = C64::new(u.read(r, c), 0.0);
                }
            }
            (values, vectors)
        } else {
            let m = Mat::<c64>::from_fn(n, n, |i, j| {
                let z = self.get(i, j);
                c64::new(z.re, z.im)
            });
            let e = m.selfadjoint_eigendecomposition(faer::Side::Lower);
            let s = e.s().column_vector();
            let u = e.u();
            let values: Vec<f64> = (0..n).map(|i| s.read(i).re).collect();
            let mut vectors = vec![C64::new(0.0, 0.0); n * n];
            for c in 0..n {
                for r in 0..n {
                    let z = u.read(r, c);
                    vectors[c * n + r] = C64::new(z.re, z.im);
                }
            }
            (values, vectors)
        };
        Eigh::sorted(n, values, vectors)
    }
}

fn init_solver() {
    static ONCE: Once = Once::new();
    // k-sweeps are parallelized one level up; keep each solve sequential so
    // results do not depend on the thread count.
    ONCE.call_once(|| faer::set_global_parallelism(Parallelism::None));
}

/// Eigenpairs of a Hermitian matrix. Vector `i` is stored contiguously.
#[derive(Debug, Clone)]
pub struct Eigh {
    dim: usize,
    pub values: Vec<f64>,
    vectors: Vec<C64>,
}

impl Eigh {
    fn sorted(dim: usize, values: Vec<f64>, vectors: Vec<C64>) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut out = Eigh { dim, values: Vec::with_capacity(dim), vectors: Vec::with_capacity(dim * dim) };
        for &i in &order {
            out.values.push(values[i]);
            let mut v = vectors[i * dim..(i + 1) * dim].to_vec();
            fix_phase(&mut v);
            out.vectors.extend(v);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[C64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

/// Rotates `v` so that its largest-modulus entry is real and positive.
pub fn fix_phase(v: &mut [C64]) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        // ties resolved towards the lowest index
        if z.norm() > best_abs * (1.0 + 1e-12) {
            best_abs = z.norm();
            best = i;
        }
    }
    if best_abs <= 0.0 {
        return;
    }
    let phase = v[best].conj() / best_abs;
    for z in v.iter_mut() {
        *z *= phase;
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_and_complex_paths_agree_on_real_input() {
        let m = DenseMatrix::from_fn(7, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            C64::new(((a * 5 + b * 3) % 7) as f64 - 3.0, 0.0)
        });
        let real = m.eigh();
        let mut shifted = m.clone();
        // a tiny imaginary Hermitian perturbation forces the complex path
        shifted.add_to(0, 1, C64::new(0.0, 1e-300));
        shifted.add_to(1, 0, C64::new(0.0, -1e-300));
        let cplx = shifted.eigh();
        for (a, b) in real.values.iter().zip(&cplx.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let m = DenseMatrix::from_fn(9, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else if i < j {
                C64::new(0.3, 0.1 * (j - i) as f64)
            } else {
                C64::new(0.3, -0.1 * (i - j) as f64)
            }
        });
        let e = m.eigh();
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for i in 0..9 {
            let v = e.vector(i);
            let hv = m.mul_vec(v);
            let res: f64 = hv.iter().zip(v).map(|(a, b)| (a - b * e.values[i]).norm_sqr()).sum();
            assert!(res.sqrt() < 1e-12);
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
    }
}
