//! The six-band bulk model: one hexagon per cell, intracell hopping `b`,
//! intercell hopping `b + eps`, over the two-dimensional Brillouin zone.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EdgeError, Result};
use crate::lattice::{LatticeVector, SiteIndex, E_ALPHA, E_BETA};
use crate::linalg::DenseMatrix;
use crate::C64;

/// Relative spread allowed in the Dirac-cone slope fit.
pub const CONE_TOLERANCE: f64 = 0.01;
const CONE_RADII: [f64; 3] = [1e-3, 5e-4, 2.5e-4];
const CONE_DIRECTIONS: [f64; 3] = [0.0, 0.65, 1.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkParams {
    pub b: f64,
    pub eps: f64,
    pub kvec: [f64; 2],
}

impl BulkParams {
    pub fn new(b: f64, eps: f64, kvec: [f64; 2]) -> Result<Self> {
        let p = Self { b, eps, kvec };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.b.is_finite() && self.eps.is_finite() && self.b > 0.0 && self.b + self.eps > 0.0;
        if !ok {
            return Err(EdgeError::InvalidInput(format!(
                "bulk parameters need b > 0 and b + eps > 0 (b = {}, eps = {})",
                self.b, self.eps
            )));
        }
        if !self.kvec.iter().all(|x| x.is_finite()) {
            return Err(EdgeError::InvalidInput("non-finite quasi-momentum".into()));
        }
        Ok(())
    }
}

/// Dual basis `(k_alpha, k_beta)` with `k_i · e_j = 2π δ_ij`.
pub fn dual_basis() -> ([f64; 2], [f64; 2]) {
    let a = SMatrix::<f64, 2, 2>::new(E_ALPHA[0], E_ALPHA[1], E_BETA[0], E_BETA[1]);
    let inv = a.try_inverse().expect("lattice vectors are independent");
    // columns of (2π) A⁻¹ are the dual vectors
    let s = 2.0 * PI;
    ([s * inv[(0, 0)], s * inv[(1, 0)]], [s * inv[(0, 1)], s * inv[(1, 1)]])
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Bloch Hamiltonian: entry `(j, j')` collects `-w exp(i k · r)` over bonds from
/// site `j` of the home cell to site `j'` of the cell at `r`.
pub fn bulk_h(params: &BulkParams) -> Result<DenseMatrix> {
    params.validate()?;
    let inter = params.b + params.eps;
    let mut h = DenseMatrix::zeros(6);
    for j in 1..=3u8 {
        for t in SiteIndex::raw(j, LatticeVector::ZERO).neighbors() {
            let w = if t.cell == LatticeVector::ZERO { params.b } else { inter };
            let z = -w * C64::from_polar(1.0, dot(params.kvec, t.cell.position()));
            let (r, c) = (j as usize - 1, t.sublattice() as usize - 1);
            h.add_to(r, c, z);
            h.add_to(c, r, z.conj());
        }
    }
    Ok(h)
}

fn eigenvalues(params: &BulkParams) -> Result<[f64; 6]> {
    let e = bulk_h(params)?.eigh();
    let mut out = [0.0; 6];
    out.copy_from_slice(&e.values);
    Ok(out)
}

/// Numerical spectrum at the zone center, ascending.
pub fn gamma_eigs(b: f64, eps: f64) -> Result<[f64; 6]> {
    eigenvalues(&BulkParams::new(b, eps, [0.0, 0.0])?)
}

/// Exact zone-center spectrum.
///
/// At `k = 0` the off-diagonal block is `b J + eps X` (`J` all ones, `X` the
/// anti-diagonal exchange), whose singular values are `3b + eps` on the
/// uniform vector and `|eps|` twice on its complement.
pub fn gamma_closed_form(b: f64, eps: f64) -> [f64; 6] {
    let top = 3.0 * b + eps;
    let e = eps.abs();
    [-top, -e, -e, e, e, top]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint {
    pub t: f64,
    pub kvec: [f64; 2],
}

/// Γ → M → K → Γ with `points_per_segment` samples per leg (Γ repeated at the end).
pub fn default_path(points_per_segment: usize) -> Vec<PathPoint> {
    let (ka, kb) = dual_basis();
    let gamma = [0.0, 0.0];
    let m = [ka[0] / 2.0, ka[1] / 2.0];
    let k = [(2.0 * ka[0] + kb[0]) / 3.0, (2.0 * ka[1] + kb[1]) / 3.0];
    let corners = [gamma, m, k, gamma];
    let n = points_per_segment.max(1);
    let mut out = Vec::with_capacity(3 * n + 1);
    let mut t = 0.0;
    for w in corners.windows(2) {
        let (p, q) = (w[0], w[1]);
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        for i in 0..n {
            let s = i as f64 / n as f64;
            out.push(PathPoint { t: t + s * len, kvec: [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])] });
        }
        t += len;
    }
    out.push(PathPoint { t, kvec: gamma });
    out
}

/// Six ascending energies per point.
pub fn bulk_bands(b: f64, eps: f64, path: &[PathPoint]) -> Result<Vec<[f64; 6]>> {
    BulkParams::new(b, eps, [0.0, 0.0])?;
    path.par_iter().map(|p| eigenvalues(&BulkParams { b, eps, kvec: p.kvec })).collect()
}

/// Uniform `n × n` sample of the dual cell.
pub fn zone_grid(n: usize) -> Vec<[f64; 2]> {
    let (ka, kb) = dual_basis();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
            out.push([s * ka[0] + t * kb[0], s * ka[1] + t * kb[1]]);
        }
    }
    out
}

/// `max(|eps| - min_k |λ(k)|, 0)`: how far any band dips into the gap.
pub fn gap_law_defect(bands: &[[f64; 6]], eps: f64) -> f64 {
    bands.iter().flatten().map(|e| eps.abs() - e.abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiracReport {
    /// Extrapolated cone slope.
    pub slope: f64,
    /// Extrapolated slope per probe direction (radians).
    pub per_direction: Vec<(f64, f64)>,
    /// `(max - min) / slope` over every ratio and extrapolation.
    pub spread: f64,
}

/// Slope of the fourth band at the zone center for `eps = 0`.
pub fn dirac_slope(b: f64) -> Result<DiracReport> {
    BulkParams::new(b, 0.0, [0.0, 0.0])?;
    let mut all = Vec::new();
    let mut per_direction = Vec::new();
    for theta in CONE_DIRECTIONS {
        let dir = [theta.cos(), theta.sin()];
        let ratios = CONE_RADII
            .iter()
            .map(|r| {
                let e = eigenvalues(&BulkParams { b, eps: 0.0, kvec: [r * dir[0], r * dir[1]] })?;
                Ok(e[3] / r)
            })
            .collect::<Result<Vec<_>>>()?;
        // ratios are linear in |k| to leading order; extrapolate on the last pair
        let extrap = 2.0 * ratios[2] - ratios[1];
        all.extend(&ratios);
        all.push(extrap);
        per_direction.push((theta, extrap));
    }
    let slope = per_direction.iter().map(|p| p.1).sum::<f64>() / per_direction.len() as f64;
    let (lo, hi) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    let spread = (hi - lo) / slope.abs();
    if !(spread < CONE_TOLERANCE) || slope <= 0.0 {
        return Err(EdgeError::NotConical { spread });
    }
    Ok(DiracReport { slope, per_direction, spread })
}

/// Orthonormal bases of the two degenerate pairs at the zone center.
#[derive(Debug, Clone, Serialize)]
pub struct BandInversion {
    pub eps: f64,
    /// Bands 2 and 3 (energy `-|eps|`).
    pub lower: [[f64; 6]; 2],
    /// Bands 4 and 5 (energy `+|eps|`).
    pub upper: [[f64; 6]; 2],
}

pub fn band_inversion(b: f64, eps: f64) -> Result<BandInversion> {
    if eps == 0.0 {
        return Err(EdgeError::InvalidInput("band inversion needs eps != 0".into()));
    }
    let e = bulk_h(&BulkParams::new(b, eps, [0.0, 0.0])?)?.eigh();
    let real = |i: usize| {
        let mut v = [0.0; 6];
        for (d, z) in v.iter_mut().zip(e.vector(i)) {
            *d = z.re;
        }
        v
    };
    Ok(BandInversion { eps, lower: [real(1), real(2)], upper: [real(3), real(4)] })
}

/// Reference vectors listed in hexagon ring order `(1, 2, 3, 4, 5, 6)` around
/// the cell, re-indexed to site labels: ring position `r` holds site
/// `[1, 4, 2, 6, 3, 5][r]`.
pub fn ring_to_sites(v: [f64; 6]) -> [f64; 6] {
    [v[0], v[2], v[4], v[1], v[5], v[3]]
}

/// The pair that sits below the gap when `eps < 0` (above it when `eps > 0`).
pub fn odd_pair() -> [[f64; 6]; 2] {
    [ring_to_sites([1.0, 1.0, 0.0, -1.0, -1.0, 0.0]), ring_to_sites([1.0, 2.0, 1.0, -1.0, -2.0, -1.0])]
}

/// The pair that sits above the gap when `eps < 0` (below it when `eps > 0`).
pub fn even_pair() -> [[f64; 6]; 2] {
    [ring_to_sites([1.0, -1.0, 0.0, 1.0, -1.0, 0.0]), ring_to_sites([1.0, -2.0, 1.0, 1.0, -2.0, 1.0])]
}

fn orthonormal(cols: &[[f64; 6]]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(6, cols.len(), |i, j| cols[j][i]);
    m.qr().q()
}

/// Largest principal angle between two subspaces of R⁶.
///
/// Computed from `‖(I - P_a) Q_b‖₂ = sin θ_max`, which stays accurate for tiny angles.
pub fn max_principal_angle(a: &[[f64; 6]], b: &[[f64; 6]]) -> f64 {
    let qa = orthonormal(a);
    let qb = orthonormal(b);
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let s = resid.singular_values().max();
    let angle = s.min(1.0).asin();
    if a.len() == b.len() {
        angle
    } else {
        // differing dimensions: report the angle for the smaller space inside the larger
        let back = &qa - &qb * (qb.transpose() * &qa);
        angle.min(back.singular_values().max().min(1.0).asin())
    }
}

/// `(angle(lower, expected lower), angle(upper, expected upper))` for the sign of `eps`.
pub fn inversion_angles(b: f64, eps: f64) -> Result<(f64, f64)> {
    let inv = band_inversion(b, eps)?;
    let (lo, hi) = if eps < 0.0 { (odd_pair(), even_pair()) } else { (even_pair(), odd_pair()) };
    Ok((max_principal_angle(&inv.lower, &lo), max_principal_angle(&inv.upper, &hi)))
}
