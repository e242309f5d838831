//! Implementations of the CLI verbs. Each command validates its inputs, runs
//! the corresponding pipeline from the core crate, and writes deterministic
//! artifacts into the output directory.

use crate::config::RunConfig;
use crate::output::{ensure_dir, fmt_f64, write_json, CsvWriter};
use anyhow::{anyhow, bail, Result};
use mvcircle::bessel::{clustering_diagnostic, signature_ratio_transformer};
use mvcircle::bifurcation::{
    classify_multi_mode, classify_resonance, classify_single_mode, find_bifurcation_points,
    BifurcationReport, COINCIDENCE_TOL,
};
use mvcircle::continuation::{fit_bifurcation_curvature, newton_solve, z_recursion, Branch};
use mvcircle::energy::{branch_catalog, interaction_energy, minimize_energy, scan_m};
use mvcircle::particle::stationary_compare;
use mvcircle::spectral::{fixed_point_map, synthesize_density};
use mvcircle::{ModeVector, PotentialSpectrum};
use std::f64::consts::TAU;
use std::path::Path;

fn config_json(config: &RunConfig) -> serde_json::Value {
    serde_json::to_value(config).expect("config serializes")
}

/// `spectrum`: coefficient table with bifurcation points and signatures.
pub fn cmd_spectrum(config: &RunConfig) -> Result<()> {
    let w = config.build_potential()?;
    let dir = ensure_dir(&config.output.dir)?;
    let transformer_beta = match config.potential.kind.as_str() {
        "transformer" => config.potential.beta,
        _ => None,
    };
    let mut columns = vec!["l", "a_l", "kappa_star", "signature"];
    if transformer_beta.is_some() {
        columns.push("r_l_beta");
    }
    let mut csv = CsvWriter::new(&config.resolved_line(), &columns);
    for l in 1..=w.stored_len() {
        let a = w.coeff(l);
        let kappa_star = if a > 0.0 { 2.0 / a } else { f64::INFINITY };
        let a2 = w.coeff(2 * l);
        let signature = if (a - a2).abs() > 0.0 { (a - 2.0 * a2) / (a - a2) } else { f64::NAN };
        let mut row = vec![l.to_string(), fmt_f64(a), fmt_f64(kappa_star), fmt_f64(signature)];
        if let Some(beta) = transformer_beta {
            let r = signature_ratio_transformer(beta, l).map_err(|e| anyhow!("{e}"))?;
            row.push(fmt_f64(r));
        }
        csv.row(&row);
    }
    csv.write(&dir.join("spectrum.csv"))?;

    if let Some(beta) = transformer_beta {
        let l_cap = w.stored_len().min(12).max(2);
        let gaps = clustering_diagnostic(beta, l_cap).map_err(|e| anyhow!("{e}"))?;
        let mut csv =
            CsvWriter::new(&config.resolved_line(), &["l1", "l2", "exact_gap", "predicted_gap"]);
        for g in gaps {
            csv.row(&[
                g.l1.to_string(),
                g.l2.to_string(),
                fmt_f64(g.exact),
                fmt_f64(g.predicted),
            ]);
        }
        csv.write(&dir.join("clustering.csv"))?;
    }
    Ok(())
}

/// Classification cascade over a detected coincidence set.
fn classify(w: &PotentialSpectrum, report: &BifurcationReport) -> Vec<BifurcationReport> {
    let modes = &report.coincident_modes;
    if modes.len() == 1 {
        return classify_single_mode(w, modes[0], COINCIDENCE_TOL).into_iter().collect();
    }
    if modes.len() == 3 {
        for &m in modes {
            for &l in modes {
                if m < l && l != 2 * m && modes.contains(&(l + m)) {
                    let patterns =
                        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
                    let out: Vec<BifurcationReport> = patterns
                        .iter()
                        .filter_map(|signs| {
                            classify_resonance(w, l, m, *signs, COINCIDENCE_TOL).ok()
                        })
                        .collect();
                    if !out.is_empty() {
                        return out;
                    }
                }
            }
        }
    }
    classify_multi_mode(w, modes, None).into_iter().collect()
}

/// `bifurcate`: classified bifurcation reports as JSON.
pub fn cmd_bifurcate(config: &RunConfig) -> Result<()> {
    let w = config.build_potential()?;
    let dir = ensure_dir(&config.output.dir)?;
    let detected = find_bifurcation_points(&w, config.kappa.max, COINCIDENCE_TOL)
        .map_err(|e| anyhow!("{e}"))?;
    let mut reports = Vec::new();
    for found in &detected {
        let classified = classify(&w, found);
        if classified.is_empty() {
            reports.push(found.clone());
        } else {
            reports.extend(classified);
        }
    }
    write_json(
        &dir.join("bifurcations.json"),
        &config_json(config),
        serde_json::to_value(&reports)?,
    )?;
    Ok(())
}

fn write_branch_csv(path: &Path, config_line: &str, branch: &Branch, n: usize) -> Result<()> {
    let mut columns: Vec<String> = vec!["s".into(), "kappa".into()];
    columns.extend((1..=n).map(|l| format!("p_{l}")));
    columns.push("residual_norm".into());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut csv = CsvWriter::new(config_line, &cols);
    for pt in &branch.points {
        let mut row = vec![fmt_f64(pt.arclength), fmt_f64(pt.kappa)];
        row.extend((1..=n).map(|l| fmt_f64(pt.p.get(l))));
        row.push(fmt_f64(pt.residual_norm));
        csv.row(&row);
    }
    csv.write(path)
}

/// `continue`: continued branches as CSV files plus a curvature-fit summary.
pub fn cmd_continue(config: &RunConfig) -> Result<()> {
    let w = config.build_potential()?;
    let dir = ensure_dir(&config.output.dir)?;
    let n = config.truncation;
    let catalog = branch_catalog(
        &w,
        n,
        config.kappa.min,
        config.kappa.max,
        &config.continuation_controls(),
    )
    .map_err(|e| anyhow!("{e}"))?;
    if catalog.is_empty() {
        bail!("no bifurcating branches inside the configured kappa range");
    }
    let mut branch_summaries = Vec::new();
    for (i, branch) in catalog.iter().enumerate() {
        write_branch_csv(
            &dir.join(format!("branch_{i:03}.csv")),
            &config.resolved_line(),
            branch,
            n,
        )?;
        let (lo, hi) = branch.kappa_range().unwrap_or((f64::NAN, f64::NAN));
        branch_summaries.push(serde_json::json!({
            "branch": i,
            "file": format!("branch_{i:03}.csv"),
            "provenance": format!("{:?}", branch.provenance),
            "complete": branch.complete,
            "points": branch.points.len(),
            "kappa_min": lo,
            "kappa_max": hi,
        }));
    }
    // per-report curvature fits on dedicated two-sided amplitude traces
    let newton = config.newton_controls();
    let mut fits = Vec::new();
    let detected = find_bifurcation_points(&w, config.kappa.max, COINCIDENCE_TOL)
        .map_err(|e| anyhow!("{e}"))?;
    for found in &detected {
        for report in classify(&w, found) {
            let fit = fit_bifurcation_curvature(&report, n, &w, 0.12, 12, &newton).ok();
            fits.push(serde_json::json!({
                "kappa_star": report.kappa_star,
                "kind": format!("{:?}", report.kind),
                "modes": report.coincident_modes,
                "predicted_curvature": report.curvature,
                "predicted_slope": report.kappa_slope,
                "fit_slope": fit.map(|f| f.slope),
                "fit_curvature": fit.map(|f| f.curvature),
                "fit_rms": fit.map(|f| f.rms),
            }));
        }
    }
    write_json(
        &dir.join("continue_summary.json"),
        &config_json(config),
        serde_json::json!({ "branches": branch_summaries, "bifurcation_fits": fits }),
    )?;
    Ok(())
}

/// `energy`: free-energy scan CSV plus transition summary.
pub fn cmd_energy(config: &RunConfig) -> Result<()> {
    let w = config.build_potential()?;
    let dir = ensure_dir(&config.output.dir)?;
    let scan = scan_m(
        &w,
        config.truncation,
        config.kappa.min,
        config.kappa.max,
        config.kappa.step,
        &config.energy_controls(),
        &config.continuation_controls(),
    )
    .map_err(|e| anyhow!("{e}"))?;
    let mut csv = CsvWriter::new(
        &config.resolved_line(),
        &["kappa", "m", "interaction_energy", "entropy", "minimizer_norm", "kink"],
    );
    for i in 0..scan.kappas.len() {
        csv.row(&[
            fmt_f64(scan.kappas[i]),
            fmt_f64(scan.m_values[i]),
            fmt_f64(scan.interaction[i]),
            fmt_f64(scan.entropy[i]),
            fmt_f64(scan.minimizer_norms[i]),
            if scan.kinks.contains(&i) { "1".into() } else { "0".into() },
        ]);
    }
    csv.write(&dir.join("energy_scan.csv"))?;
    let payload = serde_json::json!({
        "kappa_c": scan.transition.map(|t| t.0),
        "kind": scan.transition.map(|t| format!("{:?}", t.1)),
        "kinks": scan.kinks.iter().map(|&i| scan.kappas[i]).collect::<Vec<_>>(),
    });
    write_json(&dir.join("energy_summary.json"), &config_json(config), payload)?;
    Ok(())
}

/// `density`: density profile at a given kappa, either from the solver branch
/// catalog (Newton-certified) or from the series representation.
pub fn cmd_density(
    config: &RunConfig,
    kappa: f64,
    branch_id: Option<usize>,
    series: bool,
    series_mode: usize,
) -> Result<()> {
    let w = config.build_potential()?;
    let dir = ensure_dir(&config.output.dir)?;
    let n = config.truncation;
    let grid = if config.solver.grid == 0 {
        mvcircle::spectral::default_grid(n)
    } else {
        config.solver.grid
    };

    if series {
        // formal series density (both amplitude signs), Gibbs-mapped
        let m = series_mode.max(1);
        let am = w.coeff(m);
        let a2m = w.coeff(2 * m);
        if am <= 0.0 {
            bail!("series density requires a positive coefficient at the base mode {m}");
        }
        let s_sq =
            2.0 * (kappa * am - 2.0) * (2.0 - kappa * a2m) / (kappa * kappa * am * (am - 2.0 * a2m));
        if s_sq < 0.0 {
            bail!("series amplitude is imaginary at kappa = {kappa}");
        }
        let s = s_sq.sqrt();
        let z = z_recursion(&w, m, kappa, 10).map_err(|e| anyhow!("{e}"))?;
        let assemble = |sgn: f64| -> Result<ModeVector> {
            let mut p = ModeVector::zeros(n);
            let mut sl = 1.0;
            for (l, zl) in z.iter().enumerate() {
                sl *= sgn * s;
                let mode = (l + 1) * m;
                if mode <= n {
                    p.set(mode, sl * zl);
                }
            }
            Ok(p)
        };
        let dp = fixed_point_map(&assemble(1.0)?, kappa, &w, grid).map_err(|e| anyhow!("{e}"))?;
        let dm = fixed_point_map(&assemble(-1.0)?, kappa, &w, grid).map_err(|e| anyhow!("{e}"))?;
        let mut csv =
            CsvWriter::new(&config.resolved_line(), &["theta", "p_plus", "p_minus"]);
        for j in 0..grid {
            let theta = TAU * j as f64 / grid as f64;
            csv.row(&[fmt_f64(theta), fmt_f64(dp.values()[j]), fmt_f64(dm.values()[j])]);
        }
        csv.write(&dir.join("density.csv"))?;
        return Ok(());
    }

    let catalog = branch_catalog(
        &w,
        n,
        config.kappa.min.min(kappa),
        config.kappa.max.max(kappa),
        &config.continuation_controls(),
    )
    .map_err(|e| anyhow!("{e}"))?;
    let newton = config.newton_controls();
    let solution = match branch_id {
        Some(id) => {
            let branch = catalog
                .get(id)
                .ok_or_else(|| anyhow!("branch id {id} out of range (have {})", catalog.len()))?;
            let near = branch
                .nearest_by_kappa(kappa)
                .ok_or_else(|| anyhow!("branch {id} is empty"))?;
            newton_solve(&near.p, kappa, &w, &newton).map_err(|e| anyhow!("{e}"))?
        }
        None => {
            // global minimizer at this kappa
            let starts: Vec<ModeVector> = catalog
                .iter()
                .filter_map(|b| b.nearest_by_kappa(kappa).map(|pt| pt.p.clone()))
                .collect();
            let min = minimize_energy(kappa, &w, n, &starts, &config.energy_controls())
                .map_err(|e| anyhow!("{e}"))?;
            newton_solve(&min.p, kappa, &w, &newton)
                .unwrap_or(mvcircle::continuation::BranchPoint {
                    p: min.p,
                    kappa,
                    arclength: 0.0,
                    residual_norm: f64::NAN,
                    stability: None,
                })
        }
    };
    let density = synthesize_density(&solution.p, grid).map_err(|e| anyhow!("{e}"))?;
    let mut csv = CsvWriter::new(&config.resolved_line(), &["theta", "p"]);
    for j in 0..grid {
        let theta = TAU * j as f64 / grid as f64;
        csv.row(&[fmt_f64(theta), fmt_f64(density.values()[j])]);
    }
    csv.write(&dir.join("density.csv"))?;
    write_json(
        &dir.join("density_summary.json"),
        &config_json(config),
        serde_json::json!({
            "kappa": kappa,
            "residual_norm": solution.residual_norm,
            "p1": solution.p.get(1),
            "norm": solution.p.norm(),
        }),
    )?;
    Ok(())
}

/// `simulate`: particle run with comparison against the solver prediction.
pub fn cmd_simulate(config: &RunConfig, kappa: f64) -> Result<()> {
    let w = config.build_potential()?;
    let dir = ensure_dir(&config.output.dir)?;
    let n = config.truncation;
    // solver reference: |p_1| of the global minimizer at this kappa
    let min = minimize_energy(kappa, &w, n, &[], &config.energy_controls())
        .map_err(|e| anyhow!("{e}"))?;
    let solver_order = min.p.get(1).abs();
    let report = stationary_compare(kappa, &w, solver_order, &config.sim_controls())
        .map_err(|e| anyhow!("{e}"))?;
    let mut csv =
        CsvWriter::new(&config.resolved_line(), &["time", "p1", "p2", "interaction_energy"]);
    for (t, p1, p2, e) in &report.trajectory {
        csv.row(&[fmt_f64(*t), fmt_f64(*p1), fmt_f64(*p2), fmt_f64(*e)]);
    }
    csv.write(&dir.join("trajectory.csv"))?;
    write_json(
        &dir.join("simulate_summary.json"),
        &config_json(config),
        serde_json::json!({
            "kappa": kappa,
            "solver_order": report.solver_order,
            "mean_order": report.mean_order,
            "standard_error": report.standard_error,
            "z_score": report.z_score,
            "samples": report.samples,
            "solver_interaction_energy": interaction_energy(&min.p, &w),
        }),
    )?;
    Ok(())
}
