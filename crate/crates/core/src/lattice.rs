//! Generalized honeycomb geometry.
//!
//! Cells live on the triangular lattice spanned by `e_alpha = (sqrt3/2, -1/2)`
//! and `e_beta = (sqrt3/2, 1/2)`; each cell carries a hexagon of six sites.
//! All neighbor arithmetic is done in integer lattice coordinates.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{EdgeError, Result};

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

pub const E_ALPHA: [f64; 2] = [HALF_SQRT3, -0.5];
pub const E_BETA: [f64; 2] = [HALF_SQRT3, 0.5];

/// Integer combination `p * e_alpha + q * e_beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticeVector {
    pub p: i64,
    pub q: i64,
}

impl LatticeVector {
    pub const ZERO: LatticeVector = LatticeVector { p: 0, q: 0 };
    pub const ALPHA: LatticeVector = LatticeVector { p: 1, q: 0 };
    pub const BETA: LatticeVector = LatticeVector { p: 0, q: 1 };

    pub const fn new(p: i64, q: i64) -> Self {
        Self { p, q }
    }

    pub fn position(self) -> [f64; 2] {
        let (p, q) = (self.p as f64, self.q as f64);
        [p * E_ALPHA[0] + q * E_BETA[0], p * E_ALPHA[1] + q * E_BETA[1]]
    }

    /// Counter-clockwise rotation by 60 degrees: alpha -> beta, beta -> beta - alpha.
    pub fn rotate60(self) -> Self {
        Self { p: -self.q, q: self.p + self.q }
    }

    /// Rotation by `sixths * 60` degrees (any sign).
    pub fn rotate(self, sixths: i32) -> Self {
        let mut v = self;
        for _ in 0..sixths.rem_euclid(6) {
            v = v.rotate60();
        }
        v
    }
}

impl Add for LatticeVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { p: self.p + o.p, q: self.q + o.q }
    }
}

impl Sub for LatticeVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { p: self.p - o.p, q: self.q - o.q }
    }
}

impl Neg for LatticeVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self { p: -self.p, q: -self.q }
    }
}

impl Mul<LatticeVector> for i64 {
    type Output = LatticeVector;
    fn mul(self, v: LatticeVector) -> LatticeVector {
        LatticeVector { p: self * v.p, q: self * v.q }
    }
}

/// Offset of sublattice site `j` (1..=6) from its cell origin.
pub fn site_offset(j: u8) -> [f64; 2] {
    let a = E_ALPHA;
    let b = E_BETA;
    let third = 1.0 / 3.0;
    let v1 = [-a[0] * third, -a[1] * third];
    let v2 = [(a[0] - b[0]) * third, (a[1] - b[1]) * third];
    let v3 = [b[0] * third, b[1] * third];
    match j {
        1 => v1,
        2 => v2,
        3 => v3,
        4 => [-v3[0], -v3[1]],
        5 => [-v2[0], -v2[1]],
        6 => [-v1[0], -v1[1]],
        _ => panic!("sublattice index {j} out of range"),
    }
}

/// A site of the generalized honeycomb structure: sublattice `j` of cell `cell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteIndex {
    j: u8,
    pub cell: LatticeVector,
}

impl SiteIndex {
    pub fn new(j: u8, cell: LatticeVector) -> Result<Self> {
        if !(1..=6).contains(&j) {
            return Err(EdgeError::InvalidInput(format!("sublattice index {j} not in 1..=6")));
        }
        Ok(Self { j, cell })
    }

    pub(crate) const fn raw(j: u8, cell: LatticeVector) -> Self {
        Self { j, cell }
    }

    pub fn sublattice(&self) -> u8 {
        self.j
    }

    pub fn position(&self) -> [f64; 2] {
        let o = site_offset(self.j);
        let c = self.cell.position();
        [o[0] + c[0], o[1] + c[1]]
    }

    /// The three nearest neighbors, intracell pair first in the fixed row order.
    pub fn neighbors(&self) -> [SiteIndex; 3] {
        use LatticeVector as L;
        let l = self.cell;
        let s = |j: u8, cell: L| SiteIndex::raw(j, cell);
        match self.j {
            1 => [s(4, l), s(5, l), s(6, l - L::ALPHA)],
            2 => [s(4, l), s(5, l + L::ALPHA - L::BETA), s(6, l)],
            3 => [s(4, l + L::BETA), s(5, l), s(6, l)],
            4 => [s(1, l), s(2, l), s(3, l - L::BETA)],
            5 => [s(1, l), s(2, l - L::ALPHA + L::BETA), s(3, l)],
            6 => [s(1, l + L::ALPHA), s(2, l), s(3, l)],
            _ => unreachable!(),
        }
    }

    /// Splits the neighbors into the two sites of the same hexagon and the
    /// single site of a neighboring hexagon.
    pub fn classify_neighbors(&self) -> ([SiteIndex; 2], SiteIndex) {
        let n = self.neighbors();
        let mut intra = Vec::with_capacity(2);
        let mut inter = None;
        for t in n {
            if t.cell == self.cell {
                intra.push(t);
            } else {
                inter = Some(t);
            }
        }
        ([intra[0], intra[1]], inter.expect("exactly one intercell neighbor"))
    }
}

/// Orientation of the interface between the two half-lattices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InterfaceKind {
    /// Zigzag-like: periodic along `e_alpha - e_beta`.
    #[serde(rename = "I")]
    TypeI,
    /// Armchair-like: periodic along `e_alpha + e_beta`.
    #[serde(rename = "II")]
    TypeII,
}

impl InterfaceKind {
    /// `(v_a, v_b)`: periodic direction and transverse direction.
    pub fn frame(self) -> (LatticeVector, LatticeVector) {
        match self {
            InterfaceKind::TypeI => (LatticeVector::new(1, -1), LatticeVector::new(0, 1)),
            InterfaceKind::TypeII => (LatticeVector::new(1, 1), LatticeVector::new(0, 1)),
        }
    }

    /// `m * v_a + n * v_b`.
    pub fn to_lattice(self, m: i64, n: i64) -> LatticeVector {
        let (va, vb) = self.frame();
        m * va + n * vb
    }

    /// Inverse of [`to_lattice`](Self::to_lattice).
    pub fn to_frame(self, v: LatticeVector) -> (i64, i64) {
        match self {
            InterfaceKind::TypeI => (v.p, v.p + v.q),
            InterfaceKind::TypeII => (v.p, v.q - v.p),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InterfaceKind::TypeI => "I",
            InterfaceKind::TypeII => "II",
        }
    }
}

pub fn interface_frame(kind: InterfaceKind) -> (LatticeVector, LatticeVector) {
    kind.frame()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> i8 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }
}

/// Half-space split of the straight interface: `+` iff `n >= 0`.
pub fn material_sign(_kind: InterfaceKind, _m: i64, n: i64) -> Side {
    if n >= 0 {
        Side::Plus
    } else {
        Side::Minus
    }
}
