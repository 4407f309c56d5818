use std::fs;
use std::path::Path;

use edgelab_core::bulk::{
    bulk_bands, default_path, dirac_slope, gamma_closed_form, gamma_eigs, gap_law_defect, inversion_angles,
};
use edgelab_core::dynamics::{build_domain, initial_wavepacket, run, Transmission};
use edgelab_core::spectrum::{bulk_gap, k_grid, supercell_spectrum};
use edgelab_core::transfer::{f1, transfer_report};
use edgelab_core::{EdgeError, InterfaceKind};
use serde::Serialize;
use serde_json::json;

use crate::config::{BulkConfig, EvolveConfig, ExistConfig, MatchConfig, SpectrumConfig};
use crate::error::CliError;

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn spectrum(cfg: &mut SpectrumConfig, out: &Path, require_crossing: bool) -> Result<(), CliError> {
    let p = cfg.resolve()?;
    let table = supercell_spectrum(cfg.kind, &p, p.c, &k_grid(cfg.k_points), &cfg.options())?;

    let mut w = csv::Writer::from_path(out.join("spectrum.csv"))?;
    for row in table.rows() {
        w.serialize(row)?;
    }
    w.flush()?;

    let min_abs_e0 = table.slice_at(0.0).and_then(|s| s.min_kept_abs());
    // narrowest distance between the kept levels just above and just below zero
    let gap_width = table
        .slices
        .iter()
        .filter_map(|s| {
            let up = s.kept_values().filter(|e| *e >= 0.0).min_by(f64::total_cmp)?;
            let down = s.kept_values().filter(|e| *e <= 0.0).max_by(f64::total_cmp)?;
            Some(up - down)
        })
        .min_by(f64::total_cmp);
    let scale = p.b_plus.max(p.b_minus);
    let crossing = min_abs_e0.is_some_and(|e| e < cfg.crossing_tolerance * scale);
    write_json(
        &out.join("summary.json"),
        &json!({
            "config": cfg,
            "c_used": p.c,
            "bulk_gap": bulk_gap(&p),
            "min_abs_e0": min_abs_e0,
            "gap_width": gap_width,
            "crossing": crossing,
            "rows": table.slices.iter().map(|s| s.eigenvalues.len()).sum::<usize>(),
        }),
    )?;
    println!("crossing: {crossing}  min|E(0)| = {}", min_abs_e0.map_or("none".into(), |e| format!("{e:.3e}")));
    if require_crossing && !crossing {
        return Err(CliError::from(EdgeError::NoMidGapState));
    }
    Ok(())
}

pub fn match_c(cfg: &MatchConfig, out: &Path) -> Result<(), CliError> {
    let p = cfg.resolve()?;
    let f1_plus = f1(p.b_plus, p.delta_plus)?;
    let f1_minus = f1(p.b_minus, p.delta_minus)?;
    let table = supercell_spectrum(InterfaceKind::TypeI, &p, p.c, &[0.0], &cfg.options())?;
    let residual = table.slices[0].min_kept_abs().ok_or(EdgeError::NoMidGapState)?;
    let tolerance = 1e-6 * p.b_plus.max(p.b_minus);
    write_json(
        &out.join("match_c.json"),
        &json!({
            "config": cfg,
            "c_star": p.c,
            "f1_plus": f1_plus,
            "f1_minus": f1_minus,
            "residual": residual,
            "residual_tolerance": tolerance,
            "verified": residual < tolerance,
        }),
    )?;
    println!("c* = {:.12}  residual min|E(0)| = {residual:.3e}", p.c);
    Ok(())
}

pub fn exist(cfg: &ExistConfig, out: &Path) -> Result<(), CliError> {
    let p = cfg.resolve()?;
    let report = transfer_report(cfg.kind, &p)?;
    write_json(&out.join("exist.json"), &json!({ "config": cfg, "exists": report.exists, "report": report }))?;
    println!("exists: {}", report.exists);
    Ok(())
}

#[derive(Serialize)]
struct SnapshotEntry {
    step: usize,
    time: f64,
    file: String,
}

#[derive(Serialize)]
struct SnapshotRow {
    x: f64,
    y: f64,
    density: f64,
}

#[derive(Serialize)]
struct StateRow {
    j: u8,
    m: i64,
    n: i64,
    x: f64,
    y: f64,
    re: f64,
    im: f64,
}

pub fn evolve(cfg: &mut EvolveConfig, out: &Path) -> Result<(), CliError> {
    let (spec, opts) = cfg.resolve()?;
    let domain = build_domain(&spec)?;
    let psi = initial_wavepacket(&domain, cfg.center_m, cfg.width, cfg.direction)?;
    let rec = run(&domain, psi, &opts)?;
    let positions: Vec<[f64; 2]> = (0..domain.n_sites()).map(|i| domain.position(i)).collect();

    let mut entries = Vec::with_capacity(rec.snapshots.len());
    for snap in &rec.snapshots {
        let file = format!("snapshot_{:07}.csv", snap.step);
        let mut w = csv::Writer::from_path(out.join(&file))?;
        for (pos, d) in positions.iter().zip(&snap.density) {
            w.serialize(SnapshotRow { x: pos[0], y: pos[1], density: *d })?;
        }
        w.flush()?;
        entries.push(SnapshotEntry { step: snap.step, time: snap.time, file });
    }
    let mut w = csv::Writer::from_path(out.join("final_state.csv"))?;
    for (i, z) in rec.final_state.amplitudes.iter().enumerate() {
        let (j, m, n) = domain.site(i);
        w.serialize(StateRow { j, m, n, x: positions[i][0], y: positions[i][1], re: z.re, im: z.im })?;
    }
    w.flush()?;

    let last: Option<Transmission> = rec.samples.last().and_then(|s| s.transmission);
    write_json(
        &out.join("manifest.json"),
        &json!({
            "config": cfg,
            "n_sites": domain.n_sites(),
            "rho": rec.rho,
            "dt": rec.dt,
            "steps": rec.steps,
            "norm_drift_rate": rec.norm_drift_rate(),
            "energy_drift_rate": rec.energy_drift_rate(),
            "min_interface_mass": rec.min_interface_mass(),
            "max_sum_defect": rec.max_sum_defect(),
            "final_transmission": last,
            "samples": rec.samples,
            "snapshots": entries,
        }),
    )?;
    println!(
        "{} sites, {} steps of dt = {:.4e}; min interface mass {:.4}",
        domain.n_sites(),
        rec.steps,
        rec.dt,
        rec.min_interface_mass()
    );
    if let Some(t) = last {
        println!("transmitted {:.4}  reflected {:.4}  residual {:.4}", t.transmitted, t.reflected, t.residual);
    }
    Ok(())
}

#[derive(Serialize)]
struct BandRow {
    path_parameter: f64,
    band_index: usize,
    energy: f64,
}

pub fn bulk(cfg: &BulkConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let path = default_path(cfg.points_per_segment);
    let bands = bulk_bands(cfg.b, cfg.eps, &path)?;
    let mut w = csv::Writer::from_path(out.join("bands.csv"))?;
    for (pt, e) in path.iter().zip(&bands) {
        for (i, energy) in e.iter().enumerate() {
            w.serialize(BandRow { path_parameter: pt.t, band_index: i + 1, energy: *energy })?;
        }
    }
    w.flush()?;

    let (dirac, slope, spread) = if cfg.eps == 0.0 {
        match dirac_slope(cfg.b) {
            Ok(r) => (true, Some(r.slope), Some(r.spread)),
            Err(EdgeError::NotConical { spread }) => (false, None, Some(spread)),
            Err(e) => return Err(e.into()),
        }
    } else {
        (false, None, None)
    };
    let inversion = if cfg.eps != 0.0 {
        let (lower, upper) = inversion_angles(cfg.b, cfg.eps)?;
        Some(json!({ "lower_angle": lower, "upper_angle": upper }))
    } else {
        None
    };
    write_json(
        &out.join("bulk.json"),
        &json!({
            "config": cfg,
            "gamma_eigs": gamma_eigs(cfg.b, cfg.eps)?,
            "gamma_closed_form": gamma_closed_form(cfg.b, cfg.eps),
            "gap_law_defect": gap_law_defect(&bands, cfg.eps),
            "dirac": dirac,
            "dirac_slope": slope,
            "dirac_fit_spread": spread,
            "band_inversion": inversion,
        }),
    )?;
    println!("dirac: {dirac}{}", slope.map_or(String::new(), |s| format!("  slope = {s:.6}")));
    Ok(())
}
