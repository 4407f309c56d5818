//! Hopping profiles and the Bloch-reduced interface Hamiltonians.
//!
//! A chain state holds six complex amplitudes per cell `n` in
//! `-N..=N`, stored at index `6 * (n + N) + (j - 1)`. Couplings that leave
//! the window are dropped (open truncation).

use serde::{Deserialize, Serialize};

use crate::error::{EdgeError, Result};
use crate::lattice::InterfaceKind;
use crate::linalg::DenseMatrix;
use crate::C64;

/// The five hopping parameters of a two-material interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoppingProfile {
    pub b_plus: f64,
    pub b_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub c: f64,
}

impl HoppingProfile {
    pub fn new(b_plus: f64, b_minus: f64, delta_plus: f64, delta_minus: f64, c: f64) -> Result<Self> {
        let p = Self { b_plus, b_minus, delta_plus, delta_minus, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.b_plus, self.b_minus, self.delta_plus, self.delta_minus, self.c];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(EdgeError::InvalidProfile("non-finite parameter".into()));
        }
        let checks = [
            (self.b_plus > 0.0, "b_plus must be positive"),
            (self.b_minus > 0.0, "b_minus must be positive"),
            (self.c > 0.0, "c must be positive"),
            (self.b_plus + self.delta_plus > 0.0, "b_plus + delta_plus must be positive"),
            (self.b_minus + self.delta_minus > 0.0, "b_minus + delta_minus must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(EdgeError::InvalidProfile(msg.into()));
            }
        }
        Ok(())
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..*self }
    }

    /// Intercell hopping deep inside the `+` material.
    pub fn inter_plus(&self) -> f64 {
        self.b_plus + self.delta_plus
    }

    pub fn inter_minus(&self) -> f64 {
        self.b_minus + self.delta_minus
    }
}

/// Hopping coefficients attached to row `n` of an interface chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

fn intra(p: &HoppingProfile, n: i64) -> f64 {
    if n >= 0 {
        p.b_plus
    } else {
        p.b_minus
    }
}

pub fn coeffs_type1(p: &HoppingProfile, n: i64) -> CoefficientRow {
    let a = |n: i64| match n {
        n if n >= 1 => p.inter_plus(),
        0 => p.c,
        _ => p.inter_minus(),
    };
    CoefficientRow {
        a: a(n),
        b: intra(p, n),
        c: a(n + 1),
        d: if n >= 0 { p.inter_plus() } else { p.inter_minus() },
    }
}

pub fn coeffs_type2(p: &HoppingProfile, n: i64) -> CoefficientRow {
    let a = match n {
        n if n >= 0 => p.inter_plus(),
        -1 => p.c,
        _ => p.inter_minus(),
    };
    let d = match n {
        n if n >= 0 => p.inter_plus(),
        -1 | -2 => p.c,
        _ => p.inter_minus(),
    };
    CoefficientRow { a, b: intra(p, n), c: a, d }
}

pub fn coeffs(kind: InterfaceKind, p: &HoppingProfile, n: i64) -> CoefficientRow {
    match kind {
        InterfaceKind::TypeI => coeffs_type1(p, n),
        InterfaceKind::TypeII => coeffs_type2(p, n),
    }
}

/// One term of a Hamiltonian row: contributes `-weight * exp(i * phase * k)`
/// times the amplitude of site `(j, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub j: u8,
    pub n: i64,
    pub weight: f64,
    pub phase: i8,
}

const fn cp(j: u8, n: i64, weight: f64, phase: i8) -> Coupling {
    Coupling { j, n, weight, phase }
}

/// The three couplings of row `(j, n)` of the Bloch operator.
pub fn bloch_row(kind: InterfaceKind, p: &HoppingProfile, j: u8, n: i64) -> [Coupling; 3] {
    let r = coeffs(kind, p, n);
    let prev = coeffs(kind, p, n - 1);
    let b = r.b;
    match kind {
        InterfaceKind::TypeI => match j {
            1 => [cp(4, n, b, 0), cp(5, n, b, 0), cp(6, n - 1, prev.c, -1)],
            2 => [cp(4, n, b, 0), cp(5, n, r.d, 1), cp(6, n, b, 0)],
            3 => [cp(4, n + 1, r.c, 0), cp(5, n, b, 0), cp(6, n, b, 0)],
            4 => [cp(1, n, b, 0), cp(2, n, b, 0), cp(3, n - 1, prev.c, 0)],
            5 => [cp(1, n, b, 0), cp(2, n, r.d, -1), cp(3, n, b, 0)],
            6 => [cp(1, n + 1, r.c, 1), cp(2, n, b, 0), cp(3, n, b, 0)],
            _ => panic!("sublattice index {j} out of range"),
        },
        InterfaceKind::TypeII => {
            let d2 = coeffs_type2(p, n - 2).d;
            match j {
                1 => [cp(4, n, b, 0), cp(5, n, b, 0), cp(6, n + 1, r.c, -1)],
                2 => [cp(4, n, b, 0), cp(5, n - 2, d2, 1), cp(6, n, b, 0)],
                3 => [cp(4, n + 1, r.c, 0), cp(5, n, b, 0), cp(6, n, b, 0)],
                4 => [cp(1, n, b, 0), cp(2, n, b, 0), cp(3, n - 1, prev.c, 0)],
                5 => [cp(1, n, b, 0), cp(2, n + 2, r.d, -1), cp(3, n, b, 0)],
                6 => [cp(1, n - 1, prev.c, 1), cp(2, n, b, 0), cp(3, n, b, 0)],
                _ => panic!("sublattice index {j} out of range"),
            }
        }
    }
}

/// Index of `(j, n)` in a chain of half width `half_width`, if inside.
#[inline]
pub fn chain_index(half_width: usize, j: u8, n: i64) -> Option<usize> {
    let w = half_width as i64;
    if n < -w || n > w {
        None
    } else {
        Some(6 * (n + w) as usize + (j as usize - 1))
    }
}

pub fn chain_dim(half_width: usize) -> usize {
    6 * (2 * half_width + 1)
}

fn min_half_width(kind: InterfaceKind) -> usize {
    match kind {
        InterfaceKind::TypeI => 2,
        InterfaceKind::TypeII => 4,
    }
}

fn check_width(kind: InterfaceKind, half_width: usize) -> Result<()> {
    let min = min_half_width(kind);
    if half_width < min {
        return Err(EdgeError::InvalidInput(format!(
            "half width {half_width} below minimum {min} for type {} interface",
            kind.label()
        )));
    }
    Ok(())
}

fn assemble(
    kind: InterfaceKind,
    p: &HoppingProfile,
    half_width: usize,
    entry: impl Fn(&Coupling) -> C64,
) -> DenseMatrix {
    let w = half_width as i64;
    let mut m = DenseMatrix::zeros(chain_dim(half_width));
    for n in -w..=w {
        for j in 1..=6u8 {
            let row = chain_index(half_width, j, n).unwrap();
            for c in bloch_row(kind, p, j, n) {
                if let Some(col) = chain_index(half_width, c.j, c.n) {
                    m.add_to(row, col, entry(&c));
                }
            }
        }
    }
    m
}

fn phase_factor(phase: i8, k: f64) -> C64 {
    match phase {
        0 => C64::new(1.0, 0.0),
        s => C64::from_polar(1.0, s as f64 * k),
    }
}

/// Truncated Bloch Hamiltonian of either interface type.
#[derive(Debug, Clone)]
pub struct BlochOperator {
    pub kind: InterfaceKind,
    pub profile: HoppingProfile,
    pub k: f64,
    pub half_width: usize,
    pub matrix: DenseMatrix,
}

impl BlochOperator {
    pub fn new(kind: InterfaceKind, profile: &HoppingProfile, k: f64, half_width: usize) -> Result<Self> {
        profile.validate()?;
        check_width(kind, half_width)?;
        let matrix = assemble(kind, profile, half_width, |c| -c.weight * phase_factor(c.phase, k));
        Ok(Self { kind, profile: *profile, k, half_width, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

pub fn bloch_h1(profile: &HoppingProfile, k: f64, half_width: usize) -> Result<BlochOperator> {
    BlochOperator::new(InterfaceKind::TypeI, profile, k, half_width)
}

pub fn bloch_h2(profile: &HoppingProfile, k: f64, half_width: usize) -> Result<BlochOperator> {
    BlochOperator::new(InterfaceKind::TypeII, profile, k, half_width)
}

/// `dH/dk` at `k = 0`; Hermitian and purely imaginary.
pub fn first_order(kind: InterfaceKind, profile: &HoppingProfile, half_width: usize) -> Result<DenseMatrix> {
    profile.validate()?;
    check_width(kind, half_width)?;
    Ok(assemble(kind, profile, half_width, |c| C64::new(0.0, -(c.phase as f64) * c.weight)))
}

pub fn h1_first_order(profile: &HoppingProfile, half_width: usize) -> Result<DenseMatrix> {
    first_order(InterfaceKind::TypeI, profile, half_width)
}

pub fn h2_first_order(profile: &HoppingProfile, half_width: usize) -> Result<DenseMatrix> {
    first_order(InterfaceKind::TypeII, profile, half_width)
}

fn apply_rows(
    kind: InterfaceKind,
    p: &HoppingProfile,
    half_width: usize,
    x: &[C64],
    entry: impl Fn(&Coupling) -> C64,
) -> Vec<C64> {
    assert_eq!(x.len(), chain_dim(half_width));
    let w = half_width as i64;
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    for n in -w..=w {
        for j in 1..=6u8 {
            let row = chain_index(half_width, j, n).unwrap();
            let mut acc = C64::new(0.0, 0.0);
            for c in bloch_row(kind, p, j, n) {
                if let Some(col) = chain_index(half_width, c.j, c.n) {
                    acc += entry(&c) * x[col];
                }
            }
            y[row] = acc;
        }
    }
    y
}

/// Matrix-free `H(k) x` on a chain of half width `half_width`.
pub fn apply_bloch(kind: InterfaceKind, p: &HoppingProfile, k: f64, half_width: usize, x: &[C64]) -> Vec<C64> {
    apply_rows(kind, p, half_width, x, |c| -c.weight * phase_factor(c.phase, k))
}

/// Matrix-free first-order operator.
pub fn apply_first_order(kind: InterfaceKind, p: &HoppingProfile, half_width: usize, x: &[C64]) -> Vec<C64> {
    apply_rows(kind, p, half_width, x, |c| C64::new(0.0, -(c.phase as f64) * c.weight))
}

fn map_cells(half_width: usize, state: &[C64], f: impl Fn(i64, &[C64]) -> [C64; 6]) -> Vec<C64> {
    assert_eq!(state.len(), chain_dim(half_width));
    let w = half_width as i64;
    let mut out = Vec::with_capacity(state.len());
    for n in -w..=w {
        let i = 6 * (n + w) as usize;
        out.extend(f(n, &state[i..i + 6]));
    }
    out
}

/// Antiunitary symmetry of the type-I operator: block swap, conjugation and a `exp(-i n k)` phase.
pub fn apply_t(k: f64, half_width: usize, state: &[C64]) -> Vec<C64> {
    map_cells(half_width, state, |n, u| {
        let ph = C64::from_polar(1.0, -(n as f64) * k);
        [u[3], u[4], u[5], u[0], u[1], u[2]].map(|z| ph * z.conj())
    })
}

/// Chiral operator: flips the sign of sublattices 4, 5, 6.
pub fn apply_v(half_width: usize, state: &[C64]) -> Vec<C64> {
    map_cells(half_width, state, |_, u| [u[0], u[1], u[2], -u[3], -u[4], -u[5]])
}

/// Antiunitary symmetry of the type-II operator: reverses each block, conjugates, `exp(i n k)` phase.
pub fn apply_r(k: f64, half_width: usize, state: &[C64]) -> Vec<C64> {
    map_cells(half_width, state, |n, u| {
        let ph = C64::from_polar(1.0, n as f64 * k);
        [u[2], u[1], u[0], u[5], u[4], u[3]].map(|z| ph * z.conj())
    })
}
