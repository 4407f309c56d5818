//! Flat JSON run configurations, one record per subcommand.
//!
//! Every field has a default, so an absent `--config` runs the reference
//! parameters. Unknown keys are rejected.

use std::path::Path;

use edgelab_core::dynamics::{Bend, DomainSpec, RunOptions};
use edgelab_core::spectrum::SupercellOptions;
use edgelab_core::transfer::matching_c_star;
use edgelab_core::{HoppingProfile, InterfaceKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn profile(b_plus: f64, b_minus: f64, delta_plus: f64, delta_minus: f64, c: f64) -> Result<HoppingProfile, CliError> {
    HoppingProfile::new(b_plus, b_minus, delta_plus, delta_minus, c).map_err(CliError::config)
}

/// `c` if given, otherwise the matching coupling (type I only).
fn resolve_c(kind: InterfaceKind, base: &HoppingProfile, c: Option<f64>) -> Result<f64, CliError> {
    match (c, kind) {
        (Some(c), _) => Ok(c),
        (None, InterfaceKind::TypeI) => matching_c_star(base).map_err(CliError::config),
        (None, InterfaceKind::TypeII) => Err(CliError::config("type II interfaces need an explicit `c`")),
    }
}

fn check_positive_count(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::config(format!("`{name}` must be positive")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub kind: InterfaceKind,
    pub b_plus: f64,
    pub b_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// Interface coupling; omitted means the matching value (type I only).
    pub c: Option<f64>,
    /// Half width `N` of the supercell.
    pub n_cells: usize,
    pub margin: usize,
    pub threshold: f64,
    pub k_points: usize,
    /// A crossing is declared when `min |E(0)| < crossing_tolerance · max(b₊, b₋)`.
    pub crossing_tolerance: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            kind: InterfaceKind::TypeII,
            b_plus: 60.0,
            b_minus: 60.0,
            delta_plus: 30.0,
            delta_minus: -30.0,
            c: Some(50.0),
            n_cells: 80,
            margin: 5,
            threshold: 0.01,
            k_points: 201,
            crossing_tolerance: 1e-6,
        }
    }
}

impl SpectrumConfig {
    /// Validates and returns the profile with `c` resolved.
    pub fn resolve(&mut self) -> Result<HoppingProfile, CliError> {
        let base = profile(self.b_plus, self.b_minus, self.delta_plus, self.delta_minus, self.c.unwrap_or(1.0))?;
        let c = resolve_c(self.kind, &base, self.c)?;
        self.c = Some(c);
        self.options().validate().map_err(CliError::config)?;
        check_positive_count("k_points", self.k_points)?;
        if !(self.crossing_tolerance > 0.0) {
            return Err(CliError::config("`crossing_tolerance` must be positive"));
        }
        profile(self.b_plus, self.b_minus, self.delta_plus, self.delta_minus, c)
    }

    pub fn options(&self) -> SupercellOptions {
        SupercellOptions { half_width: self.n_cells, margin: self.margin, threshold: self.threshold }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    pub b_plus: f64,
    pub b_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub n_cells: usize,
    pub margin: usize,
    pub threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { b_plus: 60.0, b_minus: 60.0, delta_plus: 30.0, delta_minus: -30.0, n_cells: 80, margin: 5, threshold: 0.01 }
    }
}

impl MatchConfig {
    pub fn resolve(&self) -> Result<HoppingProfile, CliError> {
        if self.delta_plus == 0.0 || self.delta_minus == 0.0 {
            return Err(CliError::config("matching needs nonzero delta_plus and delta_minus"));
        }
        self.options().validate().map_err(CliError::config)?;
        let base = profile(self.b_plus, self.b_minus, self.delta_plus, self.delta_minus, 1.0)?;
        let c = matching_c_star(&base).map_err(CliError::config)?;
        Ok(base.with_c(c))
    }

    pub fn options(&self) -> SupercellOptions {
        SupercellOptions { half_width: self.n_cells, margin: self.margin, threshold: self.threshold }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExistConfig {
    pub kind: InterfaceKind,
    pub b_plus: f64,
    pub b_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub c: f64,
}

impl Default for ExistConfig {
    fn default() -> Self {
        Self { kind: InterfaceKind::TypeII, b_plus: 60.0, b_minus: 60.0, delta_plus: 30.0, delta_minus: -30.0, c: 50.0 }
    }
}

impl ExistConfig {
    pub fn resolve(&self) -> Result<HoppingProfile, CliError> {
        if self.delta_plus == 0.0 || self.delta_minus == 0.0 {
            return Err(CliError::config("existence analysis needs nonzero delta_plus and delta_minus"));
        }
        profile(self.b_plus, self.b_minus, self.delta_plus, self.delta_minus, self.c)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub kind: InterfaceKind,
    pub b_plus: f64,
    pub b_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// Omitted means the matching value (type I only).
    pub c: Option<f64>,
    /// Cells along the incoming interface.
    pub extent_a: usize,
    /// Cells across it.
    pub extent_b: usize,
    /// Cell column of the bend vertex; omitted for a straight interface.
    pub bend_vertex: Option<i64>,
    /// Counter-clockwise turn at the vertex: ±60 or ±120.
    pub turn_degrees: i32,
    /// Keep only cells within this many rows of the interface path.
    pub tube: Option<usize>,
    pub center_m: f64,
    pub width: f64,
    pub direction: i32,
    pub total_time: f64,
    /// Omitted means `0.1 / ρ(H)`.
    pub dt: Option<f64>,
    pub stride: usize,
    pub tube_radius: i64,
    pub partition_radius: i64,
    pub snapshots: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            kind: InterfaceKind::TypeII,
            b_plus: 60.0,
            b_minus: 60.0,
            delta_plus: 30.0,
            delta_minus: -30.0,
            c: Some(50.0),
            extent_a: 60,
            extent_b: 30,
            bend_vertex: None,
            turn_degrees: 60,
            tube: None,
            center_m: 20.0,
            width: 8.0,
            direction: 1,
            total_time: 1.0,
            dt: None,
            stride: 500,
            tube_radius: 5,
            partition_radius: 5,
            snapshots: true,
        }
    }
}

impl EvolveConfig {
    pub fn resolve(&mut self) -> Result<(DomainSpec, RunOptions), CliError> {
        let base = profile(self.b_plus, self.b_minus, self.delta_plus, self.delta_minus, self.c.unwrap_or(1.0))?;
        let c = resolve_c(self.kind, &base, self.c)?;
        self.c = Some(c);
        let p = profile(self.b_plus, self.b_minus, self.delta_plus, self.delta_minus, c)?;
        check_positive_count("stride", self.stride)?;
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            return Err(CliError::config("`total_time` must be finite and non-negative"));
        }
        if !(self.width > 0.0) {
            return Err(CliError::config("`width` must be positive"));
        }
        if self.direction != 1 && self.direction != -1 {
            return Err(CliError::config("`direction` must be 1 or -1"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(CliError::config("`dt` must be positive"));
            }
        }
        let spec = DomainSpec {
            kind: self.kind,
            profile: p,
            extent: (self.extent_a, self.extent_b),
            bend: self.bend_vertex.map(|vertex_m| Bend { vertex_m, turn_degrees: self.turn_degrees }),
            tube: self.tube,
        };
        let opts = RunOptions {
            dt: self.dt,
            total_time: self.total_time,
            stride: self.stride,
            tube_radius: self.tube_radius,
            partition_radius: self.partition_radius,
            keep_snapshots: self.snapshots,
        };
        Ok((spec, opts))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BulkConfig {
    pub b: f64,
    pub eps: f64,
    pub points_per_segment: usize,
}

impl Default for BulkConfig {
    fn default() -> Self {
        Self { b: 5.0, eps: 0.0, points_per_segment: 60 }
    }
}

impl BulkConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_positive_count("points_per_segment", self.points_per_segment)?;
        edgelab_core::bulk::BulkParams::new(self.b, self.eps, [0.0, 0.0]).map_err(CliError::config)?;
        Ok(())
    }
}
