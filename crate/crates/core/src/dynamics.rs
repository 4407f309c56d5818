//! Wavepacket dynamics on finite two-dimensional domains.
//!
//! A domain is a block of cells `(m, n)` in the interface frame of its
//! [`InterfaceKind`]. The material map is the half-plane `n >= 0` for a
//! straight interface; a bend turns the interface path by a multiple of 60
//! degrees at cell column `vertex_m`. Time stepping is classic RK4 on
//! `dΦ/dt = -iHΦ` with a sparse, real symmetric `H`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EdgeError, Result};
use crate::hamiltonian::HoppingProfile;
use crate::lattice::{InterfaceKind, Side, SiteIndex};
use crate::spectrum::{branch_coefficients, m0_matrix};
use crate::transfer::build_zero_modes;
use crate::C64;

pub const MIN_EXTENT: usize = 20;
/// Largest admissible `dt · ρ(H)`.
pub const STEP_LIMIT: f64 = 0.5;
/// Default step is `DT_FACTOR / ρ(H)`.
pub const DT_FACTOR: f64 = 0.1;

const PAR_THRESHOLD: usize = 8192;

/// Where and how the interface path turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bend {
    /// Cell column of the vertex (the vertex cell is `(vertex_m, 0)`).
    pub vertex_m: i64,
    /// Counter-clockwise change of direction: one of ±60, ±120.
    pub turn_degrees: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: InterfaceKind,
    pub profile: HoppingProfile,
    /// `(M_a, M_b)`: cells along and across the interface.
    pub extent: (usize, usize),
    pub bend: Option<Bend>,
    /// Keep only cells within this many cells of the interface path.
    pub tube: Option<usize>,
}

/// Cell coordinates relative to the incoming leg `(a, b)` and the outgoing leg `(m2, n2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegCoords {
    pub a: i64,
    pub b: i64,
    pub m2: i64,
    pub n2: i64,
}

/// Rows above the interface line are `0, 1, ...`, rows below are `0, 1, ...` as well.
fn row_distance(n: i64) -> i64 {
    if n >= 0 {
        n
    } else {
        -n - 1
    }
}

impl DomainSpec {
    pub fn straight(kind: InterfaceKind, profile: HoppingProfile, extent: (usize, usize)) -> Self {
        Self { kind, profile, extent, bend: None, tube: None }
    }

    pub fn bent(
        kind: InterfaceKind,
        profile: HoppingProfile,
        extent: (usize, usize),
        vertex_m: i64,
        turn_degrees: i32,
    ) -> Self {
        Self { kind, profile, extent, bend: Some(Bend { vertex_m, turn_degrees }), tube: None }
    }

    pub fn with_tube(mut self, radius: usize) -> Self {
        self.tube = Some(radius);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        let (ma, mb) = self.extent;
        if ma < MIN_EXTENT || mb < MIN_EXTENT {
            return Err(EdgeError::DegenerateExtent(ma, mb));
        }
        if let Some(b) = self.bend {
            if ![-120, -60, 60, 120].contains(&b.turn_degrees) {
                return Err(EdgeError::InvalidInput(format!(
                    "turn of {} degrees; expected one of ±60, ±120",
                    b.turn_degrees
                )));
            }
            if b.vertex_m <= 0 || b.vertex_m >= ma as i64 - 1 {
                return Err(EdgeError::InvalidInput(format!("bend vertex {} outside the domain", b.vertex_m)));
            }
        }
        Ok(())
    }

    /// Half-open range of transverse rows.
    pub fn n_range(&self) -> (i64, i64) {
        let mb = self.extent.1 as i64;
        (-(mb / 2), mb - mb / 2)
    }

    pub fn leg_coords(&self, m: i64, n: i64) -> LegCoords {
        match self.bend {
            None => LegCoords { a: m, b: n, m2: m, n2: n },
            Some(bend) => {
                let a = m - bend.vertex_m;
                let v = self.kind.to_lattice(a, n).rotate(-bend.turn_degrees / 60);
                let (m2, n2) = self.kind.to_frame(v);
                LegCoords { a, b: n, m2, n2 }
            }
        }
    }

    /// Material map: `+` left of the interface path, `-` right of it.
    pub fn side(&self, m: i64, n: i64) -> Side {
        let l = self.leg_coords(m, n);
        let plus = match self.bend {
            None => n >= 0,
            Some(b) if b.turn_degrees > 0 => l.b >= 0 && l.n2 >= 0,
            Some(_) => l.b >= 0 || l.n2 >= 0,
        };
        if plus {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    /// Distance in cell rows from the interface path.
    pub fn path_distance(&self, m: i64, n: i64) -> i64 {
        let l = self.leg_coords(m, n);
        if self.bend.is_none() {
            return row_distance(n);
        }
        let mut d = l.a.abs() + l.b.abs();
        if l.a <= 0 {
            d = d.min(row_distance(l.b));
        }
        if l.m2 >= 0 {
            d = d.min(row_distance(l.n2));
        }
        d
    }
}

/// Real symmetric sparse matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    rho: f64,
}

impl SparseHamiltonian {
    /// Sums duplicate entries; the caller supplies both triangles.
    pub fn from_triplets(dim: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in entries {
            if i >= dim || j >= dim {
                return Err(EdgeError::InvalidInput(format!("entry ({i}, {j}) outside dimension {dim}")));
            }
            rows[i].push((j as u32, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let rho = (0..dim)
            .map(|i| vals[row_ptr[i]..row_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self { dim, row_ptr, cols, vals, rho })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Max absolute row sum; bounds the spectral radius.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[lo..hi].binary_search(&(j as u32)) {
            Ok(p) => self.vals[lo + p],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(c, v)| (*c as usize, *v))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, v)| self.entry(j, i) == v))
    }

    fn row_dot(&self, i: usize, x: &[C64]) -> C64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let mut acc = C64::new(0.0, 0.0);
        for p in lo..hi {
            acc += self.vals[p] * x[self.cols[p] as usize];
        }
        acc
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        if self.dim >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
        }
    }

    /// `y = -i H x`.
    fn derivative(&self, x: &[C64], y: &mut [C64]) {
        let f = |(i, yi): (usize, &mut C64)| {
            let h = self.row_dot(i, x);
            *yi = C64::new(h.im, -h.re);
        };
        if self.dim >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(f);
        } else {
            y.iter_mut().enumerate().for_each(f);
        }
    }

    /// `⟨x, H x⟩` (real since `H` is symmetric).
    pub fn expectation(&self, x: &[C64]) -> f64 {
        (0..self.dim).map(|i| (x[i].conj() * self.row_dot(i, x)).re).sum()
    }
}

/// A finite domain: cells, their material, and the assembled Hamiltonian.
#[derive(Debug, Clone)]
pub struct Domain {
    pub spec: DomainSpec,
    /// `(m, n)` of every cell; sites are numbered `6 * cell + (j - 1)`.
    pub cells: Vec<(i64, i64)>,
    sides: Vec<Side>,
    lookup: HashMap<(i64, i64), usize>,
    pub hamiltonian: SparseHamiltonian,
}

impl Domain {
    pub fn n_sites(&self) -> usize {
        6 * self.cells.len()
    }

    /// `(j, m, n)` of site `i`.
    pub fn site(&self, i: usize) -> (u8, i64, i64) {
        let (m, n) = self.cells[i / 6];
        ((i % 6) as u8 + 1, m, n)
    }

    pub fn site_index(&self, j: u8, m: i64, n: i64) -> Option<usize> {
        if !(1..=6).contains(&j) {
            return None;
        }
        self.lookup.get(&(m, n)).map(|c| 6 * c + (j as usize - 1))
    }

    pub fn cell_side(&self, m: i64, n: i64) -> Option<Side> {
        self.lookup.get(&(m, n)).map(|c| self.sides[*c])
    }

    /// Euclidean position of site `i`.
    pub fn position(&self, i: usize) -> [f64; 2] {
        let (j, m, n) = self.site(i);
        SiteIndex::raw(j, self.spec.kind.to_lattice(m, n)).position()
    }

    pub fn rho(&self) -> f64 {
        self.hamiltonian.rho()
    }

    pub fn default_dt(&self) -> f64 {
        DT_FACTOR / self.rho()
    }
}

/// Assembles the nearest-neighbor Hamiltonian with open boundaries.
pub fn build_domain(spec: &DomainSpec) -> Result<Domain> {
    spec.validate()?;
    let (ma, _) = spec.extent;
    let (lo, hi) = spec.n_range();
    let mut cells = Vec::new();
    for m in 0..ma as i64 {
        for n in lo..hi {
            if spec.tube.map_or(true, |r| spec.path_distance(m, n) <= r as i64) {
                cells.push((m, n));
            }
        }
    }
    let lookup: HashMap<(i64, i64), usize> = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let sides: Vec<Side> = cells.iter().map(|&(m, n)| spec.side(m, n)).collect();
    let p = &spec.profile;
    let intra = |s: Side| match s {
        Side::Plus => p.b_plus,
        Side::Minus => p.b_minus,
    };
    let inter = |s: Side| match s {
        Side::Plus => p.inter_plus(),
        Side::Minus => p.inter_minus(),
    };
    let mut entries = Vec::with_capacity(18 * cells.len());
    for (ci, &(m, n)) in cells.iter().enumerate() {
        let l = spec.kind.to_lattice(m, n);
        let s = sides[ci];
        for j in 1..=3u8 {
            for t in SiteIndex::raw(j, l).neighbors() {
                let Some(&cj) = lookup.get(&spec.kind.to_frame(t.cell)) else { continue };
                let w = if t.cell == l {
                    intra(s)
                } else if sides[cj] != s {
                    p.c
                } else {
                    inter(s)
                };
                let (a, b) = (6 * ci + j as usize - 1, 6 * cj + t.sublattice() as usize - 1);
                entries.push((a, b, -w));
                entries.push((b, a, -w));
            }
        }
    }
    let hamiltonian = SparseHamiltonian::from_triplets(6 * cells.len(), &entries)?;
    Ok(Domain { spec: spec.clone(), cells, sides, lookup, hamiltonian })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavepacketState {
    pub amplitudes: Vec<C64>,
    pub time: f64,
    /// Norm when the state was created; reference for drift checks.
    pub initial_norm: f64,
}

impl WavepacketState {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        let initial_norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Self { amplitudes, time: 0.0, initial_norm }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Multiplies every amplitude by `exp(i k0 m)`, shifting the packet in quasi-momentum.
    pub fn boosted(mut self, domain: &Domain, k0: f64) -> Self {
        for (i, z) in self.amplitudes.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, k0 * domain.cells[i / 6].0 as f64);
        }
        self
    }

    /// Mass-weighted mean cell column.
    pub fn mean_m(&self, domain: &Domain) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, z) in self.amplitudes.iter().enumerate() {
            let w = z.norm_sqr();
            num += w * domain.cells[i / 6].0 as f64;
            den += w;
        }
        num / den
    }
}

/// Packet built from the `k = 0` zero modes of the straight interface.
///
/// The transverse profile is the combination of the two zero modes that
/// diagonalizes the first-order operator with eigenvalue of sign `direction`;
/// the envelope along the interface is `exp(-(m - center_m)^2 / (2 width^2))`.
pub fn initial_wavepacket(domain: &Domain, center_m: f64, width: f64, direction: i32) -> Result<WavepacketState> {
    if !(width > 0.0 && width.is_finite()) || !center_m.is_finite() {
        return Err(EdgeError::InvalidInput(format!("bad envelope (center {center_m}, width {width})")));
    }
    if direction != 1 && direction != -1 {
        return Err(EdgeError::InvalidInput(format!("direction must be ±1, got {direction}")));
    }
    let kind = domain.spec.kind;
    let profile = &domain.spec.profile;
    let modes = build_zero_modes(kind, profile)?;
    let m0 = m0_matrix(kind, profile, &modes);
    let (ca, cb) = branch_coefficients(&m0, direction);
    let amplitudes: Vec<C64> = (0..domain.n_sites())
        .map(|i| {
            let (j, m, n) = domain.site(i);
            let t = ca * modes.0.amplitude(n)[j as usize - 1] + cb * modes.1.amplitude(n)[j as usize - 1];
            let x = m as f64 - center_m;
            t * (-x * x / (2.0 * width * width)).exp()
        })
        .collect();
    let nrm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return Err(EdgeError::InvalidInput("wavepacket vanishes on the domain".into()));
    }
    Ok(WavepacketState::new(amplitudes.into_iter().map(|z| z / nrm).collect()))
}

/// Classic RK4 for `dΦ/dt = -iHΦ`; negative `dt` runs backwards.
pub fn evolve(mut state: WavepacketState, h: &SparseHamiltonian, dt: f64, steps: usize) -> Result<WavepacketState> {
    let product = dt.abs() * h.rho();
    if !(product <= STEP_LIMIT) {
        return Err(EdgeError::StepTooLarge { product, limit: STEP_LIMIT });
    }
    let dim = h.dim();
    if state.amplitudes.len() != dim {
        return Err(EdgeError::InvalidInput(format!(
            "state of length {} for operator of dimension {dim}",
            state.amplitudes.len()
        )));
    }
    let zero = C64::new(0.0, 0.0);
    let (mut k, mut acc, mut tmp) = (vec![zero; dim], vec![zero; dim], vec![zero; dim]);
    let y = &mut state.amplitudes;
    let half = dt / 2.0;
    for _ in 0..steps {
        h.derivative(y, &mut k);
        for i in 0..dim {
            acc[i] = k[i];
            tmp[i] = y[i] + half * k[i];
        }
        h.derivative(&tmp, &mut k);
        for i in 0..dim {
            acc[i] += 2.0 * k[i];
            tmp[i] = y[i] + half * k[i];
        }
        h.derivative(&tmp, &mut k);
        for i in 0..dim {
            acc[i] += 2.0 * k[i];
            tmp[i] = y[i] + dt * k[i];
        }
        h.derivative(&tmp, &mut k);
        for i in 0..dim {
            y[i] += (dt / 6.0) * (acc[i] + k[i]);
        }
    }
    state.time += dt * steps as f64;
    Ok(state)
}

/// Fraction of `|Φ|²` on cells within `tube_radius` rows of the interface path.
pub fn interface_mass(domain: &Domain, state: &WavepacketState, tube_radius: i64) -> f64 {
    let inside: Vec<bool> =
        domain.cells.iter().map(|&(m, n)| domain.spec.path_distance(m, n) <= tube_radius).collect();
    let mut total = 0.0;
    let mut near = 0.0;
    for (i, z) in state.amplitudes.iter().enumerate() {
        let w = z.norm_sqr();
        total += w;
        if inside[i / 6] {
            near += w;
        }
    }
    near / total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Leg {
    Incoming,
    Outgoing,
    Elsewhere,
}

/// Split of a bent domain into the tubes around the incoming and outgoing legs.
#[derive(Debug, Clone)]
pub struct Partition {
    pub radius: i64,
    legs: Vec<Leg>,
}

impl Partition {
    pub fn new(domain: &Domain, radius: i64) -> Result<Self> {
        if domain.spec.bend.is_none() {
            return Err(EdgeError::InvalidInput("transmission needs a bent interface".into()));
        }
        let legs = domain
            .cells
            .iter()
            .map(|&(m, n)| {
                let l = domain.spec.leg_coords(m, n);
                if l.a < 0 && row_distance(l.b) <= radius {
                    Leg::Incoming
                } else if l.m2 > 0 && row_distance(l.n2) <= radius {
                    Leg::Outgoing
                } else {
                    Leg::Elsewhere
                }
            })
            .collect();
        Ok(Self { radius, legs })
    }

    pub fn leg_of_cell(&self, cell: usize) -> Leg {
        self.legs[cell]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transmission {
    pub transmitted: f64,
    pub reflected: f64,
    pub residual: f64,
}

impl Transmission {
    pub fn sum(&self) -> f64 {
        self.transmitted + self.reflected + self.residual
    }
}

pub fn transmission(state: &WavepacketState, partition: &Partition) -> Transmission {
    let mut acc = [0.0; 3];
    for (i, z) in state.amplitudes.iter().enumerate() {
        let slot = match partition.legs[i / 6] {
            Leg::Outgoing => 0,
            Leg::Incoming => 1,
            Leg::Elsewhere => 2,
        };
        acc[slot] += z.norm_sqr();
    }
    let total: f64 = acc.iter().sum();
    Transmission { transmitted: acc[0] / total, reflected: acc[1] / total, residual: acc[2] / total }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOptions {
    /// Defaults to `0.1 / ρ(H)`.
    pub dt: Option<f64>,
    pub total_time: f64,
    /// Record every `stride` steps (the last step is always recorded).
    pub stride: usize,
    pub tube_radius: i64,
    pub partition_radius: i64,
    pub keep_snapshots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { dt: None, total_time: 1.0, stride: 200, tube_radius: 5, partition_radius: 5, keep_snapshots: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSample {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
    pub energy: f64,
    pub interface_mass: f64,
    pub transmission: Option<Transmission>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub dt: f64,
    pub rho: f64,
    pub steps: usize,
    pub samples: Vec<RunSample>,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
    #[serde(skip)]
    pub final_state: WavepacketState,
}

impl RunRecord {
    fn elapsed(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time.abs())
    }

    /// `max_t |‖Φ(t)‖ - ‖Φ(0)‖| / T`.
    pub fn norm_drift_rate(&self) -> f64 {
        self.drift(|s| s.norm)
    }

    /// `max_t |E(t) - E(0)| / (ρ(H) T)`.
    pub fn energy_drift_rate(&self) -> f64 {
        self.drift(|s| s.energy) / self.rho
    }

    pub fn min_interface_mass(&self) -> f64 {
        self.samples.iter().map(|s| s.interface_mass).fold(f64::INFINITY, f64::min)
    }

    /// Largest deviation of the transmission sum rule.
    pub fn max_sum_defect(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.transmission.map(|t| (t.sum() - 1.0).abs())).try_fold(0.0f64, |m, d| Some(m.max(d?)))
    }

    fn drift(&self, f: impl Fn(&RunSample) -> f64) -> f64 {
        let Some(first) = self.samples.first() else { return 0.0 };
        let q0 = f(first);
        let d = self.samples.iter().map(|s| (f(s) - q0).abs()).fold(0.0, f64::max);
        let t = self.elapsed();
        if t > 0.0 {
            d / t
        } else {
            d
        }
    }
}

fn sample(domain: &Domain, state: &WavepacketState, step: usize, opts: &RunOptions, part: Option<&Partition>) -> RunSample {
    RunSample {
        step,
        time: state.time,
        norm: state.norm(),
        energy: domain.hamiltonian.expectation(&state.amplitudes),
        interface_mass: interface_mass(domain, state, opts.tube_radius),
        transmission: part.map(|p| transmission(state, p)),
    }
}

/// Evolves `state` for `total_time`, recording diagnostics every `stride` steps.
pub fn run(domain: &Domain, state: WavepacketState, opts: &RunOptions) -> Result<RunRecord> {
    if opts.stride == 0 || !(opts.total_time >= 0.0) {
        return Err(EdgeError::InvalidInput("stride must be positive and total_time non-negative".into()));
    }
    let dt = opts.dt.unwrap_or_else(|| domain.default_dt());
    if !(dt > 0.0) {
        return Err(EdgeError::InvalidInput(format!("time step {dt} must be positive")));
    }
    let product = dt * domain.rho();
    if product > STEP_LIMIT {
        return Err(EdgeError::StepTooLarge { product, limit: STEP_LIMIT });
    }
    let steps = (opts.total_time / dt).round() as usize;
    let part = if domain.spec.bend.is_some() { Some(Partition::new(domain, opts.partition_radius)?) } else { None };
    let mut samples = vec![sample(domain, &state, 0, opts, part.as_ref())];
    let mut snapshots = Vec::new();
    if opts.keep_snapshots {
        snapshots.push(Snapshot { step: 0, time: state.time, density: state.density() });
    }
    let mut state = state;
    let mut done = 0;
    while done < steps {
        let chunk = opts.stride.min(steps - done);
        state = evolve(state, &domain.hamiltonian, dt, chunk)?;
        done += chunk;
        samples.push(sample(domain, &state, done, opts, part.as_ref()));
        if opts.keep_snapshots {
            snapshots.push(Snapshot { step: done, time: state.time, density: state.density() });
        }
    }
    Ok(RunRecord { dt, rho: domain.rho(), steps, samples, snapshots, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeVector as L;
    use crate::transfer::matching_c_star;

    fn pm() -> HoppingProfile {
        HoppingProfile::new(60.0, 60.0, 30.0, -30.0, 50.0).unwrap()
    }

    fn small_straight(kind: InterfaceKind) -> Domain {
        build_domain(&DomainSpec::straight(kind, pm(), (24, 24))).unwrap()
    }

    fn h_entry(d: &Domain, a: (u8, L), b: (u8, L)) -> f64 {
        let (ma, na) = d.spec.kind.to_frame(a.1);
        let (mb, nb) = d.spec.kind.to_frame(b.1);
        let i = d.site_index(a.0, ma, na).unwrap();
        let j = d.site_index(b.0, mb, nb).unwrap();
        d.hamiltonian.entry(i, j)
    }

    #[test]
    fn rejects_degenerate_extent() {
        let s = DomainSpec::straight(InterfaceKind::TypeI, pm(), (19, 40));
        assert!(matches!(build_domain(&s), Err(EdgeError::DegenerateExtent(19, 40))));
        let s = DomainSpec::bent(InterfaceKind::TypeI, pm(), (40, 40), 20, 90);
        assert!(build_domain(&s).is_err());
    }

    #[test]
    fn bond_weights_follow_the_material_map() {
        for kind in [InterfaceKind::TypeI, InterfaceKind::TypeII] {
            let d = small_straight(kind);
            let deep_plus = kind.to_lattice(10, 5);
            let deep_minus = kind.to_lattice(10, -5);
            assert_eq!(h_entry(&d, (1, deep_plus), (5, deep_plus)), -60.0);
            assert_eq!(h_entry(&d, (1, deep_minus), (5, deep_minus)), -60.0);
            assert_eq!(h_entry(&d, (3, deep_plus), (4, deep_plus + L::BETA)), -90.0);
            assert_eq!(h_entry(&d, (3, deep_minus), (4, deep_minus + L::BETA)), -30.0);
            assert_eq!(h_entry(&d, (1, deep_plus), (2, deep_plus)), 0.0);
            assert!(d.hamiltonian.is_symmetric());
            assert!(d.rho() <= 3.0 * 90.0);
        }
        // bond (3, λ)–(4, λ + β) across the interface row
        let d = small_straight(InterfaceKind::TypeI);
        let below = InterfaceKind::TypeI.to_lattice(10, -1);
        assert_eq!(d.spec.side(10, -1), Side::Minus);
        assert_eq!(h_entry(&d, (3, below), (4, below + L::BETA)), -50.0);
    }

    #[test]
    fn straight_domain_matches_bloch_rows() {
        use crate::hamiltonian::bloch_row;
        for kind in [InterfaceKind::TypeI, InterfaceKind::TypeII] {
            let d = small_straight(kind);
            let p = pm();
            let m = 12;
            for n in -6..=6 {
                for j in 1..=6u8 {
                    let i = d.site_index(j, m, n).unwrap();
                    for c in bloch_row(kind, &p, j, n) {
                        let t = d.site_index(c.j, m + c.phase as i64, c.n).unwrap();
                        assert_eq!(d.hamiltonian.entry(i, t), -c.weight, "{kind:?} j={j} n={n}");
                    }
                    assert_eq!(d.hamiltonian.row(i).count(), 3);
                }
            }
        }
    }

    fn connected(d: &Domain, side: Side) -> bool {
        let kind = d.spec.kind;
        let members: Vec<(i64, i64)> =
            d.cells.iter().copied().filter(|&(m, n)| d.cell_side(m, n) == Some(side)).collect();
        if members.is_empty() {
            return false;
        }
        let mut seen = std::collections::HashSet::from([members[0]]);
        let mut stack = vec![members[0]];
        while let Some((m, n)) = stack.pop() {
            let l = kind.to_lattice(m, n);
            for s in 0..6 {
                let nb = kind.to_frame(l + L::ALPHA.rotate(s));
                if d.cell_side(nb.0, nb.1) == Some(side) && seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        seen.len() == members.len()
    }

    #[test]
    fn bent_material_map_has_two_connected_regions() {
        for kind in [InterfaceKind::TypeI, InterfaceKind::TypeII] {
            for turn in [-120, -60, 60, 120] {
                let d = build_domain(&DomainSpec::bent(kind, pm(), (40, 40), 20, turn)).unwrap();
                assert!(connected(&d, Side::Plus), "{kind:?} {turn}");
                assert!(connected(&d, Side::Minus), "{kind:?} {turn}");
                assert!(d.hamiltonian.is_symmetric());
                // far up the incoming leg the split is the straight one
                assert_eq!(d.cell_side(2, 0), Some(Side::Plus));
                assert_eq!(d.cell_side(2, -1), Some(Side::Minus));
            }
        }
    }

    #[test]
    fn outgoing_leg_is_the_rotated_incoming_leg() {
        let spec = DomainSpec::bent(InterfaceKind::TypeII, pm(), (40, 40), 20, 60);
        let kind = spec.kind;
        for s in 1..8 {
            // cells just left/right of the outgoing line, in rotated coordinates
            for (n2, want) in [(0, Side::Plus), (-1, Side::Minus)] {
                let v = kind.to_lattice(s, n2).rotate(1);
                let (a, n) = kind.to_frame(v);
                assert_eq!(spec.side(a + 20, n), want);
                assert_eq!(spec.path_distance(a + 20, n), 0);
            }
        }
    }

    #[test]
    fn tube_crop_keeps_the_path() {
        let spec = DomainSpec::bent(InterfaceKind::TypeI, pm(), (60, 80), 30, 60).with_tube(6);
        let d = build_domain(&spec).unwrap();
        assert!(d.cells.iter().all(|&(m, n)| spec.path_distance(m, n) <= 6));
        assert!(d.cells.len() < 60 * 80 / 2);
        assert!(d.hamiltonian.is_symmetric());
    }

    #[test]
    fn zero_generator_leaves_state_unchanged() {
        let h = SparseHamiltonian::from_triplets(4, &[]).unwrap();
        let psi = WavepacketState::new(vec![C64::new(0.5, -0.5); 4]);
        let out = evolve(psi.clone(), &h, 0.1, 50).unwrap();
        assert_eq!(out.amplitudes, psi.amplitudes);
        assert!((out.time - 5.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_generator_matches_exponential() {
        let e = 3.7;
        let h = SparseHamiltonian::from_triplets(1, &[(0, 0, e)]).unwrap();
        let psi = WavepacketState::new(vec![C64::new(1.0, 0.0)]);
        let out = evolve(psi, &h, 1e-3, 2000).unwrap();
        let exact = C64::from_polar(1.0, -e * 2.0);
        assert!((out.amplitudes[0] - exact).norm() < 2e-10);
    }

    #[test]
    fn step_rule_is_enforced() {
        let d = small_straight(InterfaceKind::TypeII);
        let psi = WavepacketState::new(vec![C64::new(0.0, 0.0); d.n_sites()]);
        let dt = 0.6 / d.rho();
        assert!(matches!(evolve(psi, &d.hamiltonian, dt, 1), Err(EdgeError::StepTooLarge { .. })));
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let h = SparseHamiltonian::from_triplets(2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(h.entry(0, 1), 3.0);
        assert_eq!(h.nnz(), 2);
        assert_eq!(h.rho(), 3.0);
    }

    #[test]
    fn fresh_packet_is_normalized_and_localized() {
        let tuned = pm().with_c(matching_c_star(&pm()).unwrap());
        for (kind, p) in [(InterfaceKind::TypeI, tuned), (InterfaceKind::TypeII, pm())] {
            let d = build_domain(&DomainSpec::straight(kind, p, (48, 40))).unwrap();
            let psi = initial_wavepacket(&d, 24.0, 8.0, 1).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-12);
            assert!(interface_mass(&d, &psi, 5) >= 0.9);
            let m0 = interface_mass(&d, &psi, 0);
            assert!(m0 > 0.0 && m0 < 1.0);
        }
    }

    #[test]
    fn uniform_state_fills_a_wide_tube() {
        let d = small_straight(InterfaceKind::TypeI);
        let psi = WavepacketState::new(vec![C64::new(1.0, 0.0); d.n_sites()]);
        assert!((interface_mass(&d, &psi, 100) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn packet_moves_with_the_branch_slope() {
        use crate::spectrum::perturbation_matrix;
        use crate::spectrum::SupercellOptions;
        let p = pm();
        let slope = perturbation_matrix(InterfaceKind::TypeII, &p, &SupercellOptions { half_width: 30, margin: 3, threshold: 0.01 }, 1e-3)
            .unwrap()
            .slope;
        let d = build_domain(&DomainSpec::straight(InterfaceKind::TypeII, p, (80, 30))).unwrap();
        for dir in [1, -1] {
            let start = if dir > 0 { 25.0 } else { 55.0 };
            let psi = initial_wavepacket(&d, start, 8.0, dir).unwrap();
            let c0 = psi.mean_m(&d);
            let out = evolve(psi, &d.hamiltonian, d.default_dt(), (1.0 / d.default_dt()).round() as usize).unwrap();
            let v = (out.mean_m(&d) - c0) / out.time;
            assert!(v * dir as f64 > 0.0);
            assert!((v.abs() - slope).abs() < 0.1 * slope, "v={v} slope={slope}");
        }
    }

    #[test]
    fn forward_then_backward_is_identity() {
        let d = small_straight(InterfaceKind::TypeI);
        let p = HoppingProfile { c: matching_c_star(&d.spec.profile).unwrap(), ..d.spec.profile };
        let d = build_domain(&DomainSpec { profile: p, ..d.spec.clone() }).unwrap();
        let psi = initial_wavepacket(&d, 12.0, 4.0, 1).unwrap();
        let dt = d.default_dt();
        let n = (0.5 / dt) as usize;
        let fwd = evolve(psi.clone(), &d.hamiltonian, dt, n).unwrap();
        let back = evolve(fwd, &d.hamiltonian, -dt, n).unwrap();
        let err: f64 = back.amplitudes.iter().zip(&psi.amplitudes).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-5, "{err}");
        assert!(back.time.abs() < 1e-9);
    }

    #[test]
    fn run_records_conserved_quantities() {
        let spec = DomainSpec::bent(InterfaceKind::TypeII, pm(), (40, 40), 20, 60);
        let d = build_domain(&spec).unwrap();
        let psi = initial_wavepacket(&d, 10.0, 4.0, 1).unwrap();
        let rec = run(&d, psi, &RunOptions { total_time: 0.25, stride: 100, keep_snapshots: true, ..Default::default() })
            .unwrap();
        assert!(rec.norm_drift_rate() < 1e-6);
        assert!(rec.energy_drift_rate() < 1e-6);
        // the chiral balance of the launched packet pins ⟨H⟩ at zero
        assert!(rec.samples.iter().all(|s| s.energy.abs() < 1e-9 * rec.rho));
        assert!(rec.max_sum_defect().unwrap() < 1e-9);
        let t0 = rec.samples[0].transmission.unwrap();
        assert!(t0.transmitted < 1e-3 && t0.reflected > 0.9);
        assert_eq!(rec.snapshots.len(), rec.samples.len());
        assert_eq!(rec.samples.last().unwrap().step, rec.steps);
    }

    #[test]
    fn boosted_packet_carries_branch_energy() {
        let d = build_domain(&DomainSpec::straight(InterfaceKind::TypeII, pm(), (60, 30))).unwrap();
        let psi = initial_wavepacket(&d, 30.0, 8.0, 1).unwrap().boosted(&d, 0.1);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let e = d.hamiltonian.expectation(&psi.amplitudes);
        // E ≈ slope · k0 on the right-moving branch
        assert!(e > 0.5 && e < 3.0, "{e}");
    }

    #[test]
    fn straight_domain_has_no_partition() {
        let d = small_straight(InterfaceKind::TypeI);
        assert!(Partition::new(&d, 5).is_err());
    }
}
