//! Zero-energy analysis of the interface chains at fixed quasi-momentum.
//!
//! Type I: 2×2 propagation matrices acting on `(u4_n, u6_{n-1})`.
//! Type II: 3×3 real recursions on `χ_n = (w4+w5, w6+w5, w5)` and
//! `ξ_n = (w1+w2, w3+w2, w2)` at `k = 0`.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;

use crate::error::{EdgeError, Result};
use crate::hamiltonian::{apply_bloch, chain_dim, chain_index, coeffs_type1, coeffs_type2, HoppingProfile};
use crate::lattice::InterfaceKind;
use crate::linalg::norm;
use crate::C64;

const PARALLEL_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-10;
/// Stored modes stop where the predicted amplitude drops below this fraction of the peak.
const TAIL: f64 = 1e-16;
const MAX_HALF_WIDTH: usize = 20_000;

fn cx(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn check_bulk(b: f64, eps: f64) -> Result<()> {
    if !(b > 0.0 && b + eps > 0.0 && b.is_finite() && eps.is_finite()) {
        return Err(EdgeError::InvalidInput(format!("need b > 0 and b + eps > 0, got b={b}, eps={eps}")));
    }
    Ok(())
}

/// The six building blocks of the propagation matrix plus the two interface blocks.
#[derive(Debug, Clone, Copy)]
pub struct AMatrices {
    pub a: [Matrix2<C64>; 6],
    pub a1_tilde: Matrix2<C64>,
    pub a6_tilde: Matrix2<C64>,
}

pub fn a_block(b: f64, eps: f64, k: f64, j: usize) -> Matrix2<C64> {
    let e = C64::from_polar(1.0, k);
    let (bb, s) = (cx(-b), cx(-(b + eps)));
    let z = cx(0.0);
    match j {
        1 => Matrix2::new(bb, z, bb, s / e),
        2 => Matrix2::new(bb, s * e, z, bb),
        3 => Matrix2::new(s / e, z, bb, bb),
        4 => Matrix2::new(bb, bb, z, s),
        5 => Matrix2::new(bb, z, s * e, bb),
        6 => Matrix2::new(s, bb, z, bb),
        _ => panic!("block index {j} out of range"),
    }
}

pub fn a_matrices(profile: &HoppingProfile, b: f64, eps: f64, k: f64) -> AMatrices {
    let e = C64::from_polar(1.0, k);
    let (bp, bm, c) = (profile.b_plus, profile.b_minus, profile.c);
    AMatrices {
        a: [1, 2, 3, 4, 5, 6].map(|j| a_block(b, eps, k, j)),
        a1_tilde: Matrix2::new(cx(-bp), cx(0.0), cx(-bp), cx(-c) / e),
        a6_tilde: Matrix2::new(cx(-c), cx(-bm), cx(0.0), cx(-bm)),
    }
}

fn inv2(m: &Matrix2<C64>) -> Matrix2<C64> {
    m.try_inverse().expect("A blocks are triangular with nonzero diagonal")
}

/// `-A6⁻¹ A5 A4⁻¹ A3 A2⁻¹ A1`, evaluated as an explicit product.
pub fn propagation_matrix(b: f64, eps: f64, k: f64) -> Result<Matrix2<C64>> {
    check_bulk(b, eps)?;
    let a = |j| a_block(b, eps, k, j);
    Ok(-(inv2(&a(6)) * a(5) * inv2(&a(4)) * a(3) * inv2(&a(2)) * a(1)))
}

/// Closed-form entries `(α, β, γ)`; the matrix is `[[α, β], [-e^{ik} β, γ]]`.
pub fn p_elements(b: f64, eps: f64, k: f64) -> Result<(C64, C64, C64)> {
    check_bulk(b, eps)?;
    let r = (b + eps) / b;
    let e = C64::from_polar(1.0, k);
    let ei = e.conj();
    let alpha = -e * r * r + 2.0 * r - ei + e * e - 4.0 * e / r + 4.0 / (r * r);
    let beta = cx(-r * r * r) + ei * r * r + e * r - 3.0 + 2.0 * ei / r;
    let gamma = cx(r.powi(4)) - e * r * r + 2.0 * r - ei;
    Ok((alpha, beta, gamma))
}

pub fn p_from_elements(alpha: C64, beta: C64, gamma: C64, k: f64) -> Matrix2<C64> {
    Matrix2::new(alpha, beta, -C64::from_polar(1.0, k) * beta, gamma)
}

/// Eigen data of the propagation matrix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PMatrixReport {
    pub b: f64,
    pub eps: f64,
    pub k: f64,
    pub alpha: C64,
    pub beta: C64,
    pub gamma: C64,
    /// Decaying eigenvalue, `|λ₁| < 1`.
    pub lambda1: C64,
    pub lambda2: C64,
    /// Only at `k = 0`.
    pub f1: Option<f64>,
    pub v1: [C64; 2],
    pub v2: [C64; 2],
}

/// Root of `β f² + (α − γ) f + β = 0` selecting the decaying eigenvector at `k = 0`.
pub fn f1(b: f64, eps: f64) -> Result<f64> {
    check_bulk(b, eps)?;
    if eps == 0.0 {
        return Err(EdgeError::DegenerateGapless);
    }
    let (a, be, g) = p_elements(b, eps, 0.0)?;
    let (a, be, g) = (a.re, be.re, g.re);
    Ok((-a + g - ((a - g).powi(2) - 4.0 * be * be).sqrt()) / (2.0 * be))
}

fn eigvec2(alpha: C64, beta: C64, lambda: C64, k: f64, gamma: C64) -> [C64; 2] {
    if beta.norm() > 1e-300 {
        [cx(1.0), (lambda - alpha) / beta]
    } else {
        // diagonal P: pick the matching axis
        let _ = (k, gamma);
        if (lambda - alpha).norm() <= (lambda - gamma).norm() {
            [cx(1.0), cx(0.0)]
        } else {
            [cx(0.0), cx(1.0)]
        }
    }
}

pub fn p_eigen(b: f64, eps: f64, k: f64) -> Result<PMatrixReport> {
    check_bulk(b, eps)?;
    if eps == 0.0 && k == 0.0 {
        return Err(EdgeError::DegenerateGapless);
    }
    let (alpha, beta, gamma) = p_elements(b, eps, k)?;
    if k == 0.0 {
        let f = f1(b, eps)?;
        let (a, be, g) = (alpha.re, beta.re, gamma.re);
        let disc = ((a - g).powi(2) - 4.0 * be * be).sqrt();
        let l1 = (a + g - disc) / 2.0;
        // λ₁λ₂ = 1 at k = 0; the quotient avoids cancellation in the larger root
        let l2 = 1.0 / l1;
        return Ok(PMatrixReport {
            b,
            eps,
            k,
            alpha,
            beta,
            gamma,
            lambda1: cx(l1),
            lambda2: cx(l2),
            f1: Some(f),
            v1: [cx(1.0), cx(f)],
            v2: [cx(1.0), cx(1.0 / f)],
        });
    }
    let tr = alpha + gamma;
    let det = C64::from_polar(1.0, -2.0 * k);
    let s = (tr * tr - 4.0 * det).sqrt();
    let (mut l1, mut l2) = ((tr - s) / 2.0, (tr + s) / 2.0);
    if l1.norm() > l2.norm() {
        std::mem::swap(&mut l1, &mut l2);
    }
    // recompute the small root from the product to avoid cancellation
    l1 = det / l2;
    Ok(PMatrixReport {
        b,
        eps,
        k,
        alpha,
        beta,
        gamma,
        lambda1: l1,
        lambda2: l2,
        f1: None,
        v1: eigvec2(alpha, beta, l1, k, gamma),
        v2: eigvec2(alpha, beta, l2, k, gamma),
    })
}

/// `|x × y| / (|x| |y|)` for complex 2-vectors.
pub fn parallel_defect(x: [C64; 2], y: [C64; 2]) -> f64 {
    let nx = (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
    let ny = (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
    (x[0] * y[1] - x[1] * y[0]).norm() / (nx * ny)
}

/// Coupling that aligns the decaying directions of the two sides at `k = 0`.
pub fn matching_c_star(profile: &HoppingProfile) -> Result<f64> {
    profile.validate()?;
    if profile.delta_plus == 0.0 || profile.delta_minus == 0.0 {
        return Err(EdgeError::DegenerateGapless);
    }
    let fp = f1(profile.b_plus, profile.delta_plus)?;
    let fm = f1(profile.b_minus, profile.delta_minus)?;
    Ok((profile.inter_plus() * profile.inter_minus() * fp * fm).sqrt())
}

/// Alignment test `diag(1, (b₊+δ₊)(b₋+δ₋)/c²) v₁(+) ∥ v₂(−)`.
pub fn type1_alignment_defect(profile: &HoppingProfile, c_test: f64, k: f64) -> Result<f64> {
    profile.validate()?;
    if !(c_test > 0.0) {
        return Err(EdgeError::InvalidInput("c_test must be positive".into()));
    }
    if k == 0.0 && (profile.delta_plus == 0.0 || profile.delta_minus == 0.0) {
        return Err(EdgeError::DegenerateGapless);
    }
    let plus = p_eigen(profile.b_plus, profile.delta_plus, k)?;
    let minus = p_eigen(profile.b_minus, profile.delta_minus, k)?;
    let w = profile.inter_plus() * profile.inter_minus() / (c_test * c_test);
    Ok(parallel_defect([plus.v1[0], plus.v1[1] * w], minus.v2))
}

pub fn type1_zero_exists(profile: &HoppingProfile, c_test: f64, k: f64) -> Result<bool> {
    Ok(type1_alignment_defect(profile, c_test, k)? < PARALLEL_TOL)
}

/// One-cell map `(u4_n, u6_{n-1}) → (u4_{n+1}, u6_n)` of a type-I zero-energy solution.
pub fn cell_transfer(profile: &HoppingProfile, n: i64, k: f64) -> Matrix2<C64> {
    let r = coeffs_type1(profile, n);
    let cm = coeffs_type1(profile, n - 1).c;
    let e = C64::from_polar(1.0, k);
    let step = |u4: C64, u6p: C64| {
        let u5 = -u4 - cm / r.b / e * u6p;
        let u6 = -u4 - r.d / r.b * e * u5;
        let u4n = -(r.b / r.c) * (u5 + u6);
        (u4n, u6)
    };
    let (a, b) = step(cx(1.0), cx(0.0));
    let (c, d) = step(cx(0.0), cx(1.0));
    Matrix2::new(a, c, b, d)
}

/// A zero-energy eigenvector of `H(0)`, stored on the cells where it is numerically nonzero.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroMode {
    pub kind: InterfaceKind,
    pub label: ModeLabel,
    pub first_cell: i64,
    pub cells: Vec<[C64; 6]>,
    /// Amplitudes obey `‖u(n)‖ ≤ C · decay_rate^{|n|/2}`.
    pub decay_rate: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModeLabel {
    /// Supported on sublattices 4, 5, 6.
    A,
    /// Supported on sublattices 1, 2, 3.
    B,
}

impl ZeroMode {
    pub fn last_cell(&self) -> i64 {
        self.first_cell + self.cells.len() as i64 - 1
    }

    pub fn half_width(&self) -> usize {
        self.first_cell.unsigned_abs().max(self.last_cell().unsigned_abs()) as usize
    }

    pub fn amplitude(&self, n: i64) -> [C64; 6] {
        if n < self.first_cell || n > self.last_cell() {
            [cx(0.0); 6]
        } else {
            self.cells[(n - self.first_cell) as usize]
        }
    }

    /// Embeds the mode into a chain of half width `half_width`, dropping cells outside.
    pub fn to_chain(&self, half_width: usize) -> Vec<C64> {
        let w = half_width as i64;
        (-w..=w).flat_map(|n| self.amplitude(n)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.cells.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn normalize(&mut self) {
        let s = 1.0 / self.norm();
        self.cells.iter_mut().flatten().for_each(|z| *z *= s);
    }

    fn scale(&mut self, s: f64) {
        self.cells.iter_mut().flatten().for_each(|z| *z *= s);
    }

    fn apply_t0(&self) -> ZeroMode {
        let cells = self.cells.iter().map(|u| [u[3], u[4], u[5], u[0], u[1], u[2]].map(|z| z.conj())).collect();
        ZeroMode { label: ModeLabel::B, cells, ..self.clone() }
    }

    fn compute_residual(&mut self, profile: &HoppingProfile) {
        let w = self.half_width().max(4) + 2;
        let x = self.to_chain(w);
        let hx = apply_bloch(self.kind, profile, 0.0, w, &x);
        self.residual = norm(&hx) / norm(&x);
    }

    fn first_nonzero(&self) -> C64 {
        *self.cells.iter().flatten().find(|z| z.norm() > 0.0).expect("mode is nonzero")
    }
}

fn truncation_width(per_cell: f64) -> usize {
    let w = (TAIL.ln() / per_cell.ln()).ceil() as usize + 4;
    w.clamp(4, MAX_HALF_WIDTH)
}

/// The two type-I zero modes at `k = 0`, for the coupling stored in `profile`.
pub fn build_type1_zero_modes(profile: &HoppingProfile) -> Result<(ZeroMode, ZeroMode)> {
    profile.validate()?;
    let plus = p_eigen(profile.b_plus, profile.delta_plus, 0.0)?;
    let minus = p_eigen(profile.b_minus, profile.delta_minus, 0.0)?;
    let v1 = Vector2::new(plus.v1[0], plus.v1[1]);
    let v2 = Vector2::new(minus.v2[0], minus.v2[1]);
    let t_plus = cell_transfer(profile, 5, 0.0);
    let t_minus = cell_transfer(profile, -5, 0.0);
    let tau = (t_plus * v1)[0] / v1[0];
    let sigma = (t_minus * v2)[0] / v2[0];

    let x0 = cell_transfer(profile, 0, 0.0)
        .try_inverse()
        .ok_or_else(|| EdgeError::InvalidInput("singular interface transfer".into()))?
        * v1;
    let xm1 = cell_transfer(profile, -1, 0.0)
        .try_inverse()
        .ok_or_else(|| EdgeError::InvalidInput("singular interface transfer".into()))?
        * x0;
    let defect = parallel_defect([xm1[0], xm1[1]], [v2[0], v2[1]]);
    if defect > 1e-8 {
        return Err(EdgeError::NotAZeroMode { residual: defect });
    }
    let g = xm1[0] / v2[0];

    let per_cell = tau.norm().max(1.0 / sigma.norm());
    let w = truncation_width(per_cell) as i64;
    // x(n) = (u4_n, u6_{n-1})
    let x = |n: i64| -> Vector2<C64> {
        match n {
            0 => x0,
            n if n >= 1 => v1 * tau.powi((n - 1) as i32),
            n => v2 * g * sigma.powi((n + 1) as i32),
        }
    };
    let mut cells = Vec::with_capacity(2 * w as usize + 1);
    for n in -w..=w {
        let r = coeffs_type1(profile, n);
        let cm = coeffs_type1(profile, n - 1).c;
        let (xn, xn1) = (x(n), x(n + 1));
        let u4 = xn[0];
        let u5 = -u4 - cm / r.b * xn[1];
        let u6 = xn1[1];
        cells.push([cx(0.0), cx(0.0), cx(0.0), u4, u5, u6]);
    }
    let mut a = ZeroMode {
        kind: InterfaceKind::TypeI,
        label: ModeLabel::A,
        first_cell: -w,
        cells,
        decay_rate: plus.lambda1.norm().max(1.0 / minus.lambda2.norm()),
        residual: 0.0,
    };
    // real phase with a positive leading entry
    let lead = a.first_nonzero();
    let ph = lead.conj() / lead.norm();
    a.cells.iter_mut().flatten().for_each(|z| *z = C64::new((*z * ph).re, 0.0));
    a.normalize();
    a.compute_residual(profile);
    if a.residual >= RESIDUAL_TOL {
        return Err(EdgeError::NotAZeroMode { residual: a.residual });
    }
    let mut b = a.apply_t0();
    b.compute_residual(profile);
    if b.residual >= RESIDUAL_TOL {
        return Err(EdgeError::NotAZeroMode { residual: b.residual });
    }
    Ok((a, b))
}

/// Bulk recursion matrix for the type-II chain.
pub fn q_matrix(b: f64, eps: f64, k: f64) -> Result<Matrix3<C64>> {
    check_bulk(b, eps)?;
    let r = (b + eps) / b;
    Ok(q_generic(r, 1.0 / (r * r), k))
}

fn q_generic(ratio: f64, x: f64, k: f64) -> Matrix3<C64> {
    let h = C64::from_polar(1.0, k / 2.0);
    let hi = h.conj();
    let z = cx(0.0);
    Matrix3::new(
        z,
        -ratio * hi,
        ratio * hi,
        -ratio * h,
        z,
        ratio * h,
        x * h,
        x * hi,
        z,
    )
}

/// `Q_{A,n}`: `χ_{n+1} = Q_{A,n}⁻¹ χ_n`.
pub fn q_a(profile: &HoppingProfile, n: i64, k: f64) -> Matrix3<C64> {
    let c = |m| coeffs_type2(profile, m);
    let x = c(n + 2).b * c(n + 1).b / (c(n + 1).c * c(n).d);
    q_generic(c(n).c / c(n).b, x, k)
}

/// `Q_{B,n}`: `ξ_{n+1} = Q_{B,n} ξ_n`.
pub fn q_b(profile: &HoppingProfile, n: i64, k: f64) -> Matrix3<C64> {
    let c = |m| coeffs_type2(profile, m);
    let x = c(n - 1).b * c(n).b / (c(n - 1).c * c(n - 1).d);
    q_generic(c(n).c / c(n + 1).b, x, k)
}

/// `(Q_{A,-1}, Q_{A,-2}, Q_{B,0}, Q_{B,-1})`.
pub fn q_boundary_matrices(profile: &HoppingProfile, k: f64) -> Result<[Matrix3<C64>; 4]> {
    profile.validate()?;
    Ok([q_a(profile, -1, k), q_a(profile, -2, k), q_b(profile, 0, k), q_b(profile, -1, k)])
}

/// Closed-form spectrum of `Q(b, ε, 0)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QMatrixReport {
    pub b: f64,
    pub eps: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub t1: f64,
    pub t2: f64,
    pub v1: [C64; 3],
    pub v2: [C64; 3],
    pub v3: [C64; 3],
}

pub fn q_eigen(b: f64, eps: f64) -> Result<QMatrixReport> {
    check_bulk(b, eps)?;
    let r = (b + eps) / b;
    let root = (r * r + 8.0 / r).sqrt();
    let mu1 = -r / 2.0 - root / 2.0;
    let mu2 = -r / 2.0 + root / 2.0;
    let t1 = -r / mu2;
    let t2 = -r / mu1;
    Ok(QMatrixReport {
        b,
        eps,
        mu1,
        mu2,
        mu3: r,
        t1,
        t2,
        v1: [cx(t1), cx(t1), cx(1.0)],
        v2: [cx(t2), cx(t2), cx(1.0)],
        v3: [C64::new(0.0, 1.0), C64::new(0.0, -1.0), cx(0.0)],
    })
}

/// Real eigenpairs of `Q(b, ε, 0)`; the third uses the real form `(1, −1, 0)`.
fn q_real_eigs(b: f64, eps: f64) -> Result<[(f64, Vector3<f64>); 3]> {
    let q = q_eigen(b, eps)?;
    Ok([
        (q.mu1, Vector3::new(q.t1, q.t1, 1.0)),
        (q.mu2, Vector3::new(q.t2, q.t2, 1.0)),
        (q.mu3, Vector3::new(1.0, -1.0, 0.0)),
    ])
}

fn real3(m: &Matrix3<C64>) -> Matrix3<f64> {
    m.map(|z| z.re)
}

pub fn type2_zero_exists(profile: &HoppingProfile) -> Result<bool> {
    profile.validate()?;
    if profile.delta_plus == 0.0 || profile.delta_minus == 0.0 {
        return Err(EdgeError::DegenerateGapless);
    }
    let exists = profile.delta_plus * profile.delta_minus < 0.0;
    if exists {
        build_type2_zero_modes(profile)?;
    }
    Ok(exists)
}

/// Null vectors `(h_from, h_to)` of `conn · V_from h_from = V_to h_to`.
fn connection_null_space(
    conn: &Matrix3<f64>,
    plus: &[(f64, Vector3<f64>)],
    minus: &[(f64, Vector3<f64>)],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let m = plus.len() + minus.len();
    let rows = m.max(3);
    let mut a = DMatrix::<f64>::zeros(rows, m);
    for (j, (_, v)) in plus.iter().enumerate() {
        let col = conn * v;
        for i in 0..3 {
            a[(i, j)] = col[i];
        }
    }
    for (j, (_, v)) in minus.iter().enumerate() {
        for i in 0..3 {
            a[(i, plus.len() + j)] = -v[i];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    (0..m)
        .filter(|&i| svd.singular_values[i] <= 1e-10 * smax)
        .map(|i| {
            let row: Vec<f64> = v_t.row(i).iter().copied().collect();
            (row[..plus.len()].to_vec(), row[plus.len()..].to_vec())
        })
        .collect()
}

fn combine(basis: &[(f64, Vector3<f64>)], h: &[f64], power: i32) -> Vector3<f64> {
    basis.iter().zip(h).map(|((mu, v), c)| v * (c * mu.powi(power))).sum()
}

enum Chain {
    A,
    B,
}

fn type2_chain(profile: &HoppingProfile, chain: Chain) -> Result<ZeroMode> {
    let eig_p = q_real_eigs(profile.b_plus, profile.delta_plus)?;
    let eig_m = q_real_eigs(profile.b_minus, profile.delta_minus)?;
    // the A chain runs Q⁻¹ forward, the B chain runs Q forward
    let (plus, minus): (Vec<_>, Vec<_>) = match chain {
        Chain::A => (
            eig_p.iter().copied().filter(|(mu, _)| mu.abs() > 1.0).collect(),
            eig_m.iter().copied().filter(|(mu, _)| mu.abs() < 1.0).collect(),
        ),
        Chain::B => (
            eig_p.iter().copied().filter(|(mu, _)| mu.abs() < 1.0).collect(),
            eig_m.iter().copied().filter(|(mu, _)| mu.abs() > 1.0).collect(),
        ),
    };
    let conn = match chain {
        Chain::A => real3(&(q_a(profile, -2, 0.0) * q_a(profile, -1, 0.0))),
        Chain::B => real3(&(q_b(profile, 0, 0.0) * q_b(profile, -1, 0.0))),
    };
    // A: χ₋₂ = conn χ₀ (plus → minus); B: ξ₁ = conn ξ₋₁ (minus → plus)
    let null = match chain {
        Chain::A => connection_null_space(&conn, &plus, &minus),
        Chain::B => connection_null_space(&conn, &minus, &plus).into_iter().map(|(m, p)| (p, m)).collect(),
    };
    let (hp, hm) = match null.as_slice() {
        [one] => one.clone(),
        [] => return Err(EdgeError::NotAZeroMode { residual: f64::INFINITY }),
        _ => return Err(EdgeError::InvalidInput("zero-energy space of one chain is not one-dimensional".into())),
    };

    let forward_inverse = matches!(chain, Chain::A);
    let shrink = |mu: f64, plus_side: bool| if plus_side == forward_inverse { 1.0 / mu.abs() } else { mu.abs() };
    let per_cell = plus
        .iter()
        .map(|(mu, _)| shrink(*mu, true))
        .chain(minus.iter().map(|(mu, _)| shrink(*mu, false)))
        .fold(0.0f64, f64::max);
    let w = truncation_width(per_cell) as i64;

    let q_am1 = real3(&q_a(profile, -1, 0.0));
    let q_bm1 = real3(&q_b(profile, -1, 0.0));
    let mut cells = Vec::with_capacity(2 * w as usize + 1);
    for n in -w..=w {
        let v = match chain {
            Chain::A => match n {
                n if n >= 0 => combine(&plus, &hp, -(n as i32)),
                -1 => q_am1 * combine(&plus, &hp, 0),
                n => combine(&minus, &hm, (-2 - n) as i32),
            },
            Chain::B => match n {
                n if n >= 1 => combine(&plus, &hp, (n - 1) as i32),
                0 => q_bm1 * combine(&minus, &hm, 0),
                n => combine(&minus, &hm, (n + 1) as i32),
            },
        };
        let (s1, s2, s3) = (cx(v[0] - v[2]), cx(v[2]), cx(v[1] - v[2]));
        let z = cx(0.0);
        cells.push(match chain {
            Chain::A => [z, z, z, s1, s2, s3],
            Chain::B => [s1, s2, s3, z, z, z],
        });
    }
    let label = match chain {
        Chain::A => ModeLabel::A,
        Chain::B => ModeLabel::B,
    };
    let mut mode = ZeroMode {
        kind: InterfaceKind::TypeII,
        label,
        first_cell: -w,
        cells,
        decay_rate: per_cell * per_cell,
        residual: 0.0,
    };
    mode.normalize();
    let off = match label {
        ModeLabel::A => 3,
        ModeLabel::B => 0,
    };
    // antisymmetric modes (middle entry zero) get x > 0, symmetric ones y < 0
    let middle: f64 = mode.cells.iter().map(|u| u[off + 1].norm()).fold(0.0, f64::max);
    let peak = mode
        .cells
        .iter()
        .map(|u| u[off])
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("nonempty");
    let antisymmetric = middle < 1e-12;
    if (antisymmetric && peak.re < 0.0) || (!antisymmetric && peak.re > 0.0) {
        mode.scale(-1.0);
    }
    mode.compute_residual(profile);
    if mode.residual >= RESIDUAL_TOL {
        return Err(EdgeError::NotAZeroMode { residual: mode.residual });
    }
    Ok(mode)
}

/// The two type-II zero modes at `k = 0`; requires `δ₊δ₋ < 0`.
pub fn build_type2_zero_modes(profile: &HoppingProfile) -> Result<(ZeroMode, ZeroMode)> {
    profile.validate()?;
    if profile.delta_plus == 0.0 || profile.delta_minus == 0.0 {
        return Err(EdgeError::DegenerateGapless);
    }
    if profile.delta_plus * profile.delta_minus > 0.0 {
        return Err(EdgeError::NotAZeroMode { residual: f64::INFINITY });
    }
    Ok((type2_chain(profile, Chain::A)?, type2_chain(profile, Chain::B)?))
}

/// Dispatches to the builder of the given interface kind.
pub fn build_zero_modes(kind: InterfaceKind, profile: &HoppingProfile) -> Result<(ZeroMode, ZeroMode)> {
    match kind {
        InterfaceKind::TypeI => build_type1_zero_modes(profile),
        InterfaceKind::TypeII => build_type2_zero_modes(profile),
    }
}

/// Summary of the zero-energy analysis used by reports.
#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub kind: InterfaceKind,
    pub exists: bool,
    pub c_star: Option<f64>,
    pub plus: Option<PMatrixReport>,
    pub minus: Option<PMatrixReport>,
    pub q_plus: Option<QMatrixReport>,
    pub q_minus: Option<QMatrixReport>,
    pub residual: Option<f64>,
    pub decay_rate: Option<f64>,
}

pub fn transfer_report(kind: InterfaceKind, profile: &HoppingProfile) -> Result<TransferReport> {
    profile.validate()?;
    let (dp, dm) = (profile.delta_plus, profile.delta_minus);
    if dp == 0.0 || dm == 0.0 {
        return Err(EdgeError::DegenerateGapless);
    }
    let (exists, c_star, plus, minus, q_plus, q_minus) = match kind {
        InterfaceKind::TypeI => (
            type1_zero_exists(profile, profile.c, 0.0)?,
            Some(matching_c_star(profile)?),
            Some(p_eigen(profile.b_plus, dp, 0.0)?),
            Some(p_eigen(profile.b_minus, dm, 0.0)?),
            None,
            None,
        ),
        InterfaceKind::TypeII => (
            type2_zero_exists(profile)?,
            None,
            None,
            None,
            Some(q_eigen(profile.b_plus, dp)?),
            Some(q_eigen(profile.b_minus, dm)?),
        ),
    };
    let (residual, decay_rate) = if exists {
        let (a, b) = build_zero_modes(kind, profile)?;
        (Some(a.residual.max(b.residual)), Some(a.decay_rate))
    } else {
        (None, None)
    };
    Ok(TransferReport { kind, exists, c_star, plus, minus, q_plus, q_minus, residual, decay_rate })
}

/// Embeds a mode in a chain vector of dimension `chain_dim(half_width)`.
pub fn embed(mode: &ZeroMode, half_width: usize) -> Vec<C64> {
    let v = mode.to_chain(half_width);
    debug_assert_eq!(v.len(), chain_dim(half_width));
    v
}

/// Index helper re-exported for callers that walk mode components.
pub fn site(half_width: usize, j: u8, n: i64) -> Option<usize> {
    chain_index(half_width, j, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Complex;
    use proptest::prelude::*;

    fn prof(dp: f64, dm: f64, c: f64) -> HoppingProfile {
        HoppingProfile::new(60.0, 60.0, dp, dm, c).unwrap()
    }

    fn rel(a: &Matrix2<C64>, b: &Matrix2<C64>) -> f64 {
        (a - b).norm() / a.norm().max(b.norm())
    }

    fn eig2(m: &Matrix2<C64>) -> (C64, C64) {
        let tr = m.trace();
        let det = m.determinant();
        let s = (tr * tr - 4.0 * det).sqrt();
        let (a, b) = ((tr - s) / 2.0, (tr + s) / 2.0);
        if a.norm() < b.norm() {
            (a, b)
        } else {
            (b, a)
        }
    }

    #[test]
    fn a4_block_and_identity_limit() {
        let a4 = a_block(7.0, 2.0, 0.3, 4);
        assert_eq!(a4, Matrix2::new(cx(-7.0), cx(-7.0), cx(0.0), cx(-9.0)));
        for j in 1..=6 {
            let m = a_block(5.0, 0.0, 0.0, j);
            assert!(m.iter().all(|z| *z == cx(0.0) || *z == cx(-5.0)));
        }
        let p = propagation_matrix(1.0, 0.0, 0.0).unwrap();
        assert!(rel(&p, &Matrix2::identity()) < 1e-15);
        let (a, b, g) = p_elements(3.0, 0.0, 0.0).unwrap();
        assert!((a - 1.0).norm() < 1e-14 && b.norm() < 1e-14 && (g - 1.0).norm() < 1e-14);
    }

    #[test]
    fn tilde_blocks() {
        let p = HoppingProfile::new(60.0, 40.0, 30.0, -10.0, 25.0).unwrap();
        let m = a_matrices(&p, 60.0, 30.0, 0.0);
        assert_eq!(m.a1_tilde, Matrix2::new(cx(-60.0), cx(0.0), cx(-60.0), cx(-25.0)));
        assert_eq!(m.a6_tilde, Matrix2::new(cx(-25.0), cx(-40.0), cx(0.0), cx(-40.0)));
        assert_eq!(m.a[1].determinant(), cx(3600.0));
    }

    #[test]
    fn trace_formula() {
        let (b, eps) = (60.0, 30.0);
        let p = propagation_matrix(b, eps, 0.0).unwrap();
        let s = 2.0 * b / (b + eps) + ((b + eps) / b).powi(2) - 1.0;
        assert!((p.trace().re - (s * s - 2.0)).abs() < 1e-12 * s * s);
        let k = std::f64::consts::FRAC_PI_3;
        let det = propagation_matrix(b, eps, k).unwrap().determinant();
        assert!((det - C64::from_polar(1.0, -2.0 * k)).norm() < 1e-12);
    }

    #[test]
    fn known_decay_rates() {
        let r = p_eigen(60.0, 30.0, 0.0).unwrap();
        assert!((r.lambda1.re - 0.22478).abs() < 1e-4);
        assert!((r.lambda2.re - 4.4488).abs() < 1e-3);
        let f = r.f1.unwrap();
        assert!(f > -1.0 && f < 0.0);
        let r = p_eigen(60.0, -30.0, 0.0).unwrap();
        assert!((r.lambda1.re - 0.11843).abs() < 1e-4);
        assert!(r.f1.unwrap() < -1.0);
        // brute-force eigendecomposition of the explicit product
        for (b, eps) in [(60.0, 30.0), (60.0, -30.0), (7.0, 0.5)] {
            let (l1, l2) = eig2(&propagation_matrix(b, eps, 0.0).unwrap());
            let r = p_eigen(b, eps, 0.0).unwrap();
            assert!((l1 - r.lambda1).norm() < 1e-10 * l2.norm());
            assert!((l2 - r.lambda2).norm() < 1e-10 * l2.norm());
        }
        assert_eq!(p_eigen(5.0, 0.0, 0.0).unwrap_err(), EdgeError::DegenerateGapless);
    }

    #[test]
    fn eigenvectors_are_eigenvectors() {
        for (b, eps, k) in [(60.0, 30.0, 0.0), (60.0, -30.0, 0.0), (10.0, 3.0, 0.8), (10.0, 0.0, -1.2)] {
            let r = p_eigen(b, eps, k).unwrap();
            let p = propagation_matrix(b, eps, k).unwrap();
            for (l, v) in [(r.lambda1, r.v1), (r.lambda2, r.v2)] {
                let v = Vector2::new(v[0], v[1]);
                let pv = p * v;
                assert!((pv - v * l).norm() < 1e-10 * p.norm() * v.norm());
            }
        }
    }

    #[test]
    fn monotonicity_on_grid() {
        let b = 60.0;
        let grid: Vec<f64> = (-170..=300).map(|i| i as f64 * 0.3).collect();
        let el: Vec<(f64, f64, f64)> = grid
            .iter()
            .map(|&e| {
                let (a, be, g) = p_elements(b, e, 0.0).unwrap();
                (a.re, be.re, g.re)
            })
            .collect();
        for w in el.windows(2) {
            let ((a0, b0, g0), (a1, b1, g1)) = (w[0], w[1]);
            assert!(a1 < a0 && b1 < b0);
            assert!(g1 > g0);
            assert!(g1 - a1 - 2.0 * b1 > g0 - a0 - 2.0 * b0);
            assert!(g1 - a1 + 2.0 * b1 > g0 - a0 + 2.0 * b0);
            assert!(g1 - a1 > g0 - a0);
        }
        let sums: Vec<f64> = el.iter().map(|(a, _, g)| a + g).collect();
        let imin = sums.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(grid[imin], 0.0);
        for (&e, _) in grid.iter().zip(&el) {
            if e != 0.0 {
                let f = f1(b, e).unwrap();
                if e < 0.0 {
                    assert!(f < -1.0);
                } else {
                    assert!(f > -1.0 && f < 0.0);
                }
            }
        }
    }

    #[test]
    fn matching_values() {
        let cases = [((30.0, 30.0), 25.3394), ((30.0, -30.0), 63.5443), ((-30.0, 30.0), 63.5443), ((-30.0, -30.0), 159.352)];
        for ((dp, dm), want) in cases {
            let c = matching_c_star(&prof(dp, dm, 50.0)).unwrap();
            assert!((c - want).abs() < 1e-3, "{dp} {dm}: {c}");
        }
        let p = prof(30.0, 30.0, 50.0);
        let f = f1(60.0, 30.0).unwrap();
        assert!((matching_c_star(&p).unwrap() - 90.0 * f.abs()).abs() < 1e-12);
        assert!(!type1_zero_exists(&p, 50.0, 0.0).unwrap());
        let cs = matching_c_star(&p).unwrap();
        assert!(type1_zero_exists(&p, cs, 0.0).unwrap());
        assert_eq!(matching_c_star(&prof(0.0, 30.0, 50.0)).unwrap_err(), EdgeError::DegenerateGapless);
    }

    #[test]
    fn cell_transfer_squares_to_propagation() {
        let p = HoppingProfile::new(60.0, 40.0, 30.0, -12.0, 50.0).unwrap();
        for k in [0.0, 0.4, -2.0] {
            let t = cell_transfer(&p, 7, k);
            let pp = propagation_matrix(60.0, 30.0, k).unwrap();
            assert!(rel(&(t * t), &pp) < 1e-12);
            let t = cell_transfer(&p, -7, k);
            let pm = propagation_matrix(40.0, -12.0, k).unwrap();
            assert!(rel(&(t * t), &pm) < 1e-12);
        }
    }

    #[test]
    fn alignment_matches_cell_recursion() {
        // the diagonal alignment criterion agrees with a direct shooting check
        for (dp, dm) in [(30.0, 30.0), (30.0, -30.0), (-20.0, 10.0)] {
            let base = prof(dp, dm, 1.0);
            let cs = matching_c_star(&base).unwrap();
            for c in [cs, 0.8 * cs, 1.3 * cs] {
                let p = base.with_c(c);
                let v1 = p_eigen(60.0, dp, 0.0).unwrap().v1;
                let v2 = p_eigen(60.0, dm, 0.0).unwrap().v2;
                let x0 = cell_transfer(&p, 0, 0.0).try_inverse().unwrap() * Vector2::new(v1[0], v1[1]);
                let xm = cell_transfer(&p, -1, 0.0).try_inverse().unwrap() * x0;
                let shoot = parallel_defect([xm[0], xm[1]], v2) < 1e-9;
                assert_eq!(shoot, type1_zero_exists(&p, c, 0.0).unwrap());
                assert_eq!(shoot, c == cs);
            }
        }
    }

    #[test]
    fn type1_modes() {
        for (dp, dm) in [(30.0, 30.0), (30.0, -30.0), (-30.0, -30.0)] {
            let base = prof(dp, dm, 1.0);
            let p = base.with_c(matching_c_star(&base).unwrap());
            let (a, b) = build_type1_zero_modes(&p).unwrap();
            assert!(a.residual < 1e-10 && b.residual < 1e-10);
            assert!((a.norm() - 1.0).abs() < 1e-12);
            let first = a.cells.iter().flatten().find(|z| z.norm() > 0.0).unwrap();
            assert!(first.re > 0.0);
            let w = a.half_width();
            let ip: C64 = a.to_chain(w).iter().zip(b.to_chain(w)).map(|(x, y)| x.conj() * y).sum();
            assert_eq!(ip, cx(0.0));
            for n in a.first_cell..a.last_cell() {
                assert!(a.amplitude(n)[5].re * a.amplitude(n + 1)[3].re < 0.0);
                assert!(a.amplitude(n)[..3].iter().all(|z| *z == cx(0.0)));
            }
        }
        assert!(matches!(build_type1_zero_modes(&prof(30.0, 30.0, 50.0)), Err(EdgeError::NotAZeroMode { .. })));
    }

    #[test]
    fn type1_mode_decay() {
        let base = prof(30.0, -30.0, 1.0);
        let p = base.with_c(matching_c_star(&base).unwrap());
        let (a, _) = build_type1_zero_modes(&p).unwrap();
        let rate = a.decay_rate;
        let expected = p_eigen(60.0, 30.0, 0.0).unwrap().lambda1.re.max(1.0 / p_eigen(60.0, -30.0, 0.0).unwrap().lambda2.re);
        assert!((rate - expected).abs() < 1e-14);
        let amp = |n| a.amplitude(n).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let c = (a.first_cell..=a.last_cell()).map(|n| amp(n) / rate.powf(n.abs() as f64 / 2.0)).fold(0.0, f64::max);
        assert!(c.is_finite());
        // decay on the + side follows λ₁ per two cells
        let ratio = amp(12) / amp(10);
        assert!((ratio - p_eigen(60.0, 30.0, 0.0).unwrap().lambda1.re).abs() < 1e-10);
    }

    #[test]
    fn q_spectrum() {
        let q = q_eigen(60.0, 30.0).unwrap();
        assert_eq!(q.mu3, 1.5);
        assert!((q.mu1 + 2.1269).abs() < 1e-4 && (q.mu2 - 0.6269).abs() < 1e-4);
        let m = q_matrix(60.0, 30.0, 0.0).unwrap();
        assert!((m[(2, 0)].re - 60.0 * 60.0 / (90.0 * 90.0)).abs() < 1e-15);
        assert!(m.determinant().norm() > 0.0);
        for (mu, v) in [(q.mu1, q.v1), (q.mu2, q.v2), (q.mu3, q.v3)] {
            let v = Vector3::new(v[0], v[1], v[2]);
            assert!((m * v - v * cx(mu)).norm() < 1e-12);
        }
        let qm = q_eigen(60.0, -30.0).unwrap();
        assert!(qm.mu2 > 1.0 && qm.mu1 < -2.0);
    }

    #[test]
    fn boundary_q_matrices() {
        let p = HoppingProfile::new(55.0, 45.0, 20.0, -15.0, 50.0).unwrap();
        let [am1, am2, b0, bm1] = q_boundary_matrices(&p, 0.0).unwrap();
        let (bp, bm, c) = (55.0, 45.0, 50.0);
        let (tp, tm) = (75.0 / 55.0, 30.0 / 45.0);
        let close = |z: C64, x: f64| (z.re - x).abs() < 1e-13 * x.abs().max(1.0) && z.im == 0.0;
        assert!(close(am1[(0, 1)], -c / bm) && close(am1[(2, 0)], bp * bp / (75.0 * c)));
        assert!(close(am2[(0, 1)], -tm) && close(am2[(2, 0)], bp * bm / (c * c)));
        assert!(close(b0[(0, 1)], -tp) && close(b0[(2, 1)], bp * bm / (c * c)));
        assert!(close(bm1[(1, 0)], -c / bp) && close(bm1[(2, 0)], bm * bm / (30.0 * c)));
        // bulk recursion rows reduce to the homogeneous matrix
        let k = 0.37;
        assert!((q_a(&p, 3, k) - q_matrix(bp, 20.0, k).unwrap()).norm() < 1e-14);
        assert!((q_b(&p, 3, k) - q_matrix(bp, 20.0, k).unwrap()).norm() < 1e-14);
        assert!((q_a(&p, -6, k) - q_matrix(bm, -15.0, k).unwrap()).norm() < 1e-14);
        assert!((q_b(&p, -4, k) - q_matrix(bm, -15.0, k).unwrap()).norm() < 1e-14);
        // product matches the closed form except where the displayed (2,2) entry is misprinted
        let prod = real3(&(am2 * am1));
        let h3 = c * tm / bm;
        let g = tm * bp / (c * tp);
        let want = Matrix3::new(h3 + g, g, -h3, g, h3 + g, -h3, -bp / c, -bp / c, 2.0 * bp / c);
        assert!((prod - want).norm() < 1e-12);
    }

    #[test]
    fn type2_modes_distinct_materials() {
        for (dp, dm) in [(30.0, -30.0), (-30.0, 30.0), (12.0, -40.0)] {
            let p = prof(dp, dm, 50.0);
            assert!(type2_zero_exists(&p).unwrap());
            let (a, b) = build_type2_zero_modes(&p).unwrap();
            assert!(a.residual < 1e-10 && b.residual < 1e-10, "{} {}", a.residual, b.residual);
            for (m, off) in [(&a, 3), (&b, 0)] {
                let anti = m.cells.iter().all(|u| u[off + 1].norm() < 1e-14);
                for u in &m.cells {
                    let (x, z, y) = (u[off].re, u[off + 1].re, u[off + 2].re);
                    let _ = z;
                    if anti {
                        assert!(x > 0.0 && (x + y).abs() < 1e-14);
                    } else {
                        assert!(x < 0.0 && (x - y).abs() < 1e-14);
                    }
                }
            }
        }
        let p = prof(30.0, -30.0, 50.0);
        let (a, _) = build_type2_zero_modes(&p).unwrap();
        for n in 0..10 {
            let ratio = a.amplitude(n)[3].re / a.amplitude(n + 1)[3].re;
            assert!((ratio - 1.5).abs() < 1e-12);
        }
        // h₃ = c t₋ / b₋
        let chi = real3(&(q_a(&p, -2, 0.0) * q_a(&p, -1, 0.0))) * Vector3::new(1.0, -1.0, 0.0);
        let h3 = chi[0];
        assert!((h3 - 50.0 * 0.5 / 60.0).abs() < 1e-14 && h3 > 0.0);
        assert!((chi - Vector3::new(h3, -h3, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn type2_identical_materials() {
        for (dp, dm) in [(30.0, 30.0), (-30.0, -30.0)] {
            let p = prof(dp, dm, 50.0);
            assert!(!type2_zero_exists(&p).unwrap());
            for chain in [Chain::A, Chain::B] {
                assert!(type2_chain(&p, chain).is_err());
            }
        }
        assert_eq!(type2_zero_exists(&prof(0.0, 30.0, 50.0)).unwrap_err(), EdgeError::DegenerateGapless);
    }

    fn sample() -> impl Strategy<Value = (f64, f64, f64)> {
        (1.0..100.0f64, -0.9..2.0f64, -std::f64::consts::PI..std::f64::consts::PI)
            .prop_map(|(b, s, k)| (b, s * b, k))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn determinant_identity((b, eps, k) in sample()) {
            let p = propagation_matrix(b, eps, k).unwrap();
            let want = Complex::from_polar(1.0, -2.0 * k);
            prop_assert!((p.determinant() - want).norm() < 1e-12 * p.norm_squared().max(1.0));
        }

        #[test]
        fn spectral_splitting((b, eps, k) in sample()) {
            prop_assume!(eps != 0.0 || k != 0.0);
            let r = p_eigen(b, eps, k).unwrap();
            prop_assert!(r.lambda1.norm() < 1.0 && r.lambda2.norm() > 1.0);
            prop_assert!((r.lambda1 * r.lambda2 - Complex::from_polar(1.0, -2.0 * k)).norm() < 1e-12);
        }

        #[test]
        fn closed_form_matches_product((b, eps, k) in sample()) {
            let (a, be, g) = p_elements(b, eps, k).unwrap();
            let closed = p_from_elements(a, be, g, k);
            prop_assert!(rel(&closed, &propagation_matrix(b, eps, k).unwrap()) < 1e-12);
        }

        #[test]
        fn tuned_coupling_always_aligns(
            bp in 1.0..100.0f64, bm in 1.0..100.0f64,
            sp in -0.9..2.0f64, sm in -0.9..2.0f64,
        ) {
            prop_assume!(sp.abs() > 1e-3 && sm.abs() > 1e-3);
            let p = HoppingProfile::new(bp, bm, sp * bp, sm * bm, 1.0).unwrap();
            let c = matching_c_star(&p).unwrap();
            prop_assert!(type1_zero_exists(&p, c, 0.0).unwrap());
        }
    }
}
