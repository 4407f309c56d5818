//! Supercell spectra with artificial-boundary filtering, edge branches and
//! the first-order slope of the zero-energy crossing.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{EdgeError, Result};
use crate::hamiltonian::{apply_first_order, BlochOperator, HoppingProfile};
use crate::lattice::InterfaceKind;
use crate::linalg::{inner, DenseMatrix, Eigh};
use crate::transfer::{build_zero_modes, ZeroMode};
use crate::C64;

/// Eigenvalues closer than this (relative to the spectral radius) are treated as one cluster.
const CLUSTER_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupercellOptions {
    pub half_width: usize,
    pub margin: usize,
    pub threshold: f64,
}

impl Default for SupercellOptions {
    fn default() -> Self {
        Self { half_width: 80, margin: 5, threshold: 0.01 }
    }
}

impl SupercellOptions {
    pub fn validate(&self) -> Result<()> {
        if self.half_width < 20 {
            return Err(EdgeError::InvalidInput(format!("supercell half width {} below 20", self.half_width)));
        }
        if 4 * self.margin >= self.half_width {
            return Err(EdgeError::InvalidInput(format!(
                "margin {} must be below a quarter of the half width {}",
                self.margin, self.half_width
            )));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(EdgeError::InvalidInput("threshold must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// `n` quasi-momenta in `[-π, π)`, always containing `k = 0`.
///
/// Even counts use the usual grid starting at `-π`; odd counts are centred on zero.
pub fn k_grid(n: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    match n {
        0 => vec![],
        1 => vec![0.0],
        n if n % 2 == 0 => (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect(),
        n => {
            let mid = (n - 1) / 2;
            (0..n).map(|i| 2.0 * PI * (i as f64 - mid as f64) / n as f64).collect()
        }
    }
}

/// Filtered eigen data at one quasi-momentum.
#[derive(Debug, Clone, Serialize)]
pub struct KSlice {
    pub k: f64,
    pub eigenvalues: Vec<f64>,
    pub localization: Vec<f64>,
    pub kept: Vec<bool>,
}

impl KSlice {
    pub fn kept_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().zip(&self.kept).filter(|(_, k)| **k).map(|(e, _)| *e)
    }

    pub fn min_kept_abs(&self) -> Option<f64> {
        self.kept_values().map(f64::abs).min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumTable {
    pub kind: InterfaceKind,
    pub profile: HoppingProfile,
    pub c_used: f64,
    pub options: SupercellOptions,
    pub slices: Vec<KSlice>,
}

/// One CSV row: `k, eig_index, energy, localization, kept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub k: f64,
    pub eig_index: usize,
    pub energy: f64,
    pub localization: f64,
    pub kept: bool,
}

impl SpectrumTable {
    pub fn k_grid(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.k).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = SpectrumRow> + '_ {
        self.slices.iter().flat_map(|s| {
            (0..s.eigenvalues.len()).map(move |i| SpectrumRow {
                k: s.k,
                eig_index: i,
                energy: s.eigenvalues[i],
                localization: s.localization[i],
                kept: s.kept[i],
            })
        })
    }

    pub fn slice_at(&self, k: f64) -> Option<&KSlice> {
        self.slices.iter().find(|s| s.k == k)
    }

    /// Smallest kept `|E|` over the whole grid.
    pub fn min_kept_abs(&self) -> Option<f64> {
        self.slices.iter().filter_map(KSlice::min_kept_abs).min_by(f64::total_cmp)
    }
}

/// Fraction of `|v|²` in the outermost `margin` cells at each end.
fn boundary_mass(v: &[C64], margin: usize) -> f64 {
    let edge = 6 * margin;
    let n = v.len();
    v[..edge].iter().chain(&v[n - edge..]).map(|z| z.norm_sqr()).sum()
}

/// Boundary mass per eigenpair, returned with the (possibly adjusted) energies.
///
/// Degenerate clusters are first rotated to the eigenbasis of the boundary
/// projector so the split does not depend on the basis the solver happened to
/// return; each rotated vector carries its Rayleigh energy, which lies inside
/// the cluster.
pub fn boundary_localization(eig: &Eigh, margin: usize) -> (Vec<f64>, Vec<f64>) {
    let values = &eig.values;
    let n = values.len();
    let scale = values.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(f64::MIN_POSITIVE);
    let mut loc = vec![0.0; n];
    let mut energy = values.clone();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] < CLUSTER_GAP * scale {
            end += 1;
        }
        if end - start == 1 {
            loc[start] = boundary_mass(eig.vector(start), margin);
        } else {
            let m = end - start;
            let edge = 6 * margin;
            let g = DenseMatrix::from_fn(m, |a, b| {
                let (va, vb) = (eig.vector(start + a), eig.vector(start + b));
                let head = inner(&va[..edge], &vb[..edge]);
                let tail = inner(&va[va.len() - edge..], &vb[vb.len() - edge..]);
                head + tail
            });
            let ge = g.eigh();
            let mut rotated: Vec<(f64, f64)> = (0..m)
                .map(|i| {
                    let u = ge.vector(i);
                    let e = (0..m).map(|b| u[b].norm_sqr() * values[start + b]).sum::<f64>();
                    (e, ge.values[i].clamp(0.0, 1.0))
                })
                .collect();
            rotated.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            for (i, (e, l)) in rotated.into_iter().enumerate() {
                energy[start + i] = e;
                loc[start + i] = l;
            }
        }
        start = end;
    }
    (energy, loc)
}

fn slice(kind: InterfaceKind, profile: &HoppingProfile, k: f64, opts: &SupercellOptions) -> Result<KSlice> {
    let op = BlochOperator::new(kind, profile, k, opts.half_width)?;
    let eig = op.matrix.eigh();
    let (eigenvalues, localization) = boundary_localization(&eig, opts.margin);
    let kept = localization.iter().map(|l| *l < opts.threshold).collect();
    Ok(KSlice { k, eigenvalues, localization, kept })
}

/// Filtered supercell spectrum; `c` overrides the profile's interface coupling.
pub fn supercell_spectrum(
    kind: InterfaceKind,
    profile: &HoppingProfile,
    c: f64,
    k_grid: &[f64],
    opts: &SupercellOptions,
) -> Result<SpectrumTable> {
    opts.validate()?;
    let p = profile.with_c(c);
    p.validate()?;
    let slices = k_grid.par_iter().map(|&k| slice(kind, &p, k, opts)).collect::<Result<Vec<_>>>()?;
    Ok(SpectrumTable { kind, profile: p, c_used: c, options: *opts, slices })
}

/// The two kept branches closest to zero.
#[derive(Debug, Clone, Serialize)]
pub struct EdgeCurves {
    pub k: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
    pub min_abs_e0: f64,
}

/// Bulk gap of the two materials: eigenvalues below `min(|δ₊|, |δ₋|)` are mid-gap.
pub fn bulk_gap(profile: &HoppingProfile) -> f64 {
    profile.delta_plus.abs().min(profile.delta_minus.abs())
}

pub fn edge_curves(table: &SpectrumTable) -> Result<EdgeCurves> {
    let gap = bulk_gap(&table.profile);
    let at0 = table.slice_at(0.0).ok_or_else(|| EdgeError::InvalidInput("k grid does not contain 0".into()))?;
    let min_abs_e0 = at0.min_kept_abs().ok_or(EdgeError::NoMidGapState)?;
    if !table.slices.iter().any(|s| s.min_kept_abs().is_some_and(|e| e < gap)) {
        return Err(EdgeError::NoMidGapState);
    }
    let mut curves = EdgeCurves { k: vec![], e_plus: vec![], e_minus: vec![], min_abs_e0 };
    for s in &table.slices {
        let (plus, minus) = if s.k == 0.0 {
            (min_abs_e0, -min_abs_e0)
        } else {
            let plus = s.kept_values().filter(|e| *e >= 0.0).min_by(f64::total_cmp);
            let minus = s.kept_values().filter(|e| *e <= 0.0).max_by(f64::total_cmp);
            match (plus, minus) {
                (Some(p), Some(m)) => (p, m),
                _ => continue,
            }
        };
        curves.k.push(s.k);
        curves.e_plus.push(plus);
        curves.e_minus.push(minus);
    }
    Ok(curves)
}

/// Smallest non-negative kept eigenvalue at `k`.
pub fn upper_branch(kind: InterfaceKind, profile: &HoppingProfile, k: f64, opts: &SupercellOptions) -> Result<f64> {
    let s = slice(kind, profile, k, opts)?;
    if k == 0.0 {
        return s.min_kept_abs().ok_or(EdgeError::NoMidGapState);
    }
    s.kept_values().filter(|e| *e >= 0.0).min_by(f64::total_cmp).ok_or(EdgeError::NoMidGapState)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    pub kind: InterfaceKind,
    /// `⟨X, H⁽¹⁾ Y⟩` for `X, Y ∈ {A, B}`.
    pub m0: [[C64; 2]; 2],
    pub slope: f64,
    pub fd_slope: f64,
    /// One-sided difference at half the step.
    pub fd_slope_half: f64,
    /// `2·fd(h/2) − fd(h)`.
    pub richardson: f64,
    pub rel_gap: f64,
    pub h: f64,
}

impl SlopeReport {
    /// Coefficients of modes `(A, B)` for the branch moving in `direction` (±1).
    pub fn branch_combination(&self, direction: i32) -> (C64, C64) {
        branch_coefficients(&self.m0, direction)
    }
}

/// Eigenvector of `M₀` whose eigenvalue has the sign of `direction`.
pub fn branch_coefficients(m0: &[[C64; 2]; 2], direction: i32) -> (C64, C64) {
    let s = m0[0][1].im;
    let sign = if direction >= 0 { 1.0 } else { -1.0 };
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // m0 = [[0, iS], [-iS, 0]] has eigenvector (1, -i sgn(S) sign) for eigenvalue sign·|S|
    (C64::new(r, 0.0), C64::new(0.0, -r * s.signum() * sign))
}

/// `M₀` from the two real zero modes.
pub fn m0_matrix(kind: InterfaceKind, profile: &HoppingProfile, modes: &(ZeroMode, ZeroMode)) -> [[C64; 2]; 2] {
    let w = modes.0.half_width().max(modes.1.half_width()).max(4) + 2;
    let (a, b) = (modes.0.to_chain(w), modes.1.to_chain(w));
    let ha = apply_first_order(kind, profile, w, &a);
    let hb = apply_first_order(kind, profile, w, &b);
    [[inner(&a, &ha), inner(&a, &hb)], [inner(&b, &ha), inner(&b, &hb)]]
}

/// First-order slope of the crossing, checked against a one-sided finite difference
/// of the supercell branch with step `h`.
pub fn perturbation_matrix(
    kind: InterfaceKind,
    profile: &HoppingProfile,
    opts: &SupercellOptions,
    h: f64,
) -> Result<SlopeReport> {
    opts.validate()?;
    let modes = build_zero_modes(kind, profile)?;
    let m0 = m0_matrix(kind, profile, &modes);
    let slope = m0[0][1].im.abs();
    let e = [0.0, h / 2.0, h]
        .par_iter()
        .map(|&k| upper_branch(kind, profile, k, opts))
        .collect::<Result<Vec<_>>>()?;
    let fd_slope = (e[2] - e[0]) / h;
    let fd_slope_half = (e[1] - e[0]) / (h / 2.0);
    Ok(SlopeReport {
        kind,
        m0,
        slope,
        fd_slope,
        fd_slope_half,
        richardson: 2.0 * fd_slope_half - fd_slope,
        rel_gap: (slope - fd_slope).abs() / slope,
        h,
    })
}
