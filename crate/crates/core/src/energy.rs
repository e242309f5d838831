//! Free-energy landscape: evaluation, global minimization over the truncated
//! mode space, transition-point detection and classification.
//!
//! The free energy of a density with modes `p` is
//! `F(p, kappa) = (1/2pi) int rho log rho  -  (kappa/2) sum_l a_l p_l^2`,
//! where the interaction term is the spectral form of
//! `(kappa/8pi^2) iint W(theta-phi) rho rho`. The uniform state has `F = 0`
//! for every kappa (the potential is zero-mean), so `m(kappa) <= 0` always.

use crate::bifurcation::{
    classify_multi_mode, classify_resonance, classify_single_mode, find_bifurcation_points,
    BifurcationKind, BifurcationReport, COINCIDENCE_TOL,
};
use crate::continuation::{
    continue_branch, kernel_direction, newton_solve, solve_with_amplitude, switch_branch, Branch,
    BranchPoint, ContinuationControls, NewtonControls, Provenance,
};
use crate::error::{Error, Result};
use crate::modes::ModeVector;
use crate::potential::PotentialSpectrum;
use crate::spectral::{default_grid, synthesize_density};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Tolerances and quadrature controls for the energy routines.
#[derive(Debug, Clone, Copy)]
pub struct EnergyControls {
    /// Quadrature grid size; 0 selects `default_grid(n)`.
    pub grid: usize,
    /// `m(kappa) < -m_tol` counts as a broken uniform phase.
    pub m_tol: f64,
    /// Minimizer-norm jump above which a transition is discontinuous.
    pub jump_tol: f64,
    /// Kink detector ratio: second differences larger than `kink_tol` times
    /// the median second difference flag a kink.
    pub kink_tol: f64,
    pub newton: NewtonControls,
}

impl Default for EnergyControls {
    fn default() -> Self {
        Self {
            grid: 0,
            m_tol: 1e-10,
            jump_tol: 1e-3,
            kink_tol: 10.0,
            newton: NewtonControls::default(),
        }
    }
}

/// Value of the free-energy functional split into its parts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FreeEnergy {
    pub total: f64,
    pub entropy: f64,
    /// `(kappa/2) * sum a_l p_l^2`.
    pub interaction: f64,
    /// False when the synthesized density is not strictly positive; `total`
    /// is then `+inf`.
    pub finite: bool,
}

/// Interaction energy `E(rho, rho) = sum_l a_l p_l^2` (spectral form).
pub fn interaction_energy(p: &ModeVector, w: &PotentialSpectrum) -> f64 {
    (1..=p.truncation()).map(|l| w.coeff(l) * p.get(l) * p.get(l)).sum()
}

/// Interaction energy by double quadrature of `iint W(theta - phi) rho rho`
/// normalized by `(2 pi)^2`. Slow; the independent oracle for the spectral form.
pub fn interaction_energy_quadrature(
    p: &ModeVector,
    w: &PotentialSpectrum,
    grid: usize,
) -> Result<f64> {
    let d = synthesize_density(p, grid)?;
    let vals = d.values();
    let m = vals.len();
    let wdiff: Vec<f64> = (0..m).map(|j| w.eval(TAU * j as f64 / m as f64)).collect();
    let mut acc = 0.0;
    for j in 0..m {
        let mut row = 0.0;
        for (k, vk) in vals.iter().enumerate() {
            let idx = (j + m - k) % m;
            row += wdiff[idx] * vk;
        }
        acc += row * vals[j];
    }
    Ok(acc / (m as f64 * m as f64))
}

/// Evaluates the free energy of the density synthesized from `p`.
///
/// A density that is not strictly positive has infinite entropy; the result is
/// flagged rather than treated as an error.
pub fn free_energy(
    p: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    grid: usize,
) -> Result<FreeEnergy> {
    let d = synthesize_density(p, grid)?;
    let interaction = 0.5 * kappa * interaction_energy(p, w);
    if d.min_value() <= 0.0 {
        return Ok(FreeEnergy {
            total: f64::INFINITY,
            entropy: f64::INFINITY,
            interaction,
            finite: false,
        });
    }
    let entropy = d.values().iter().map(|v| v * v.ln()).sum::<f64>() / d.grid_size() as f64;
    Ok(FreeEnergy { total: entropy - interaction, entropy, interaction, finite: true })
}

/// Gradient of the free energy in mode space:
/// `dF/dp_l = 2 (log rho)_l - kappa a_l p_l`.
fn free_energy_gradient(
    p: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    grid: usize,
) -> Result<Option<Vec<f64>>> {
    let d = synthesize_density(p, grid)?;
    if d.min_value() <= 0.0 {
        return Ok(None);
    }
    let n = p.truncation();
    let m = d.grid_size();
    let logs: Vec<f64> = d.values().iter().map(|v| v.ln()).collect();
    let mut grad = vec![0.0; n];
    for l in 1..=n {
        let mode: f64 = logs
            .iter()
            .enumerate()
            .map(|(j, v)| v * ((l as f64) * TAU * j as f64 / m as f64).cos())
            .sum::<f64>()
            / m as f64;
        grad[l - 1] = 2.0 * mode - kappa * w.coeff(l) * p.get(l);
    }
    Ok(Some(grad))
}

/// Backtracking gradient descent on the free energy from a start point.
fn descend(
    start: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    grid: usize,
    max_iter: usize,
) -> Result<ModeVector> {
    let n = start.truncation();
    let mut p = start.clone();
    let mut value = free_energy(&p, kappa, w, grid)?.total;
    if !value.is_finite() {
        // pull an invalid start into the positive cone through the Gibbs map
        let d = crate::spectral::fixed_point_map(&p, kappa, w, grid)?;
        p = crate::spectral::analyze_density(&d, n)?;
        value = free_energy(&p, kappa, w, grid)?.total;
    }
    for _ in 0..max_iter {
        let grad = match free_energy_gradient(&p, kappa, w, grid)? {
            Some(g) => g,
            None => break,
        };
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < 1e-11 {
            break;
        }
        let mut step = 0.25 / (1.0 + kappa);
        let mut moved = false;
        for _ in 0..40 {
            let mut trial = p.clone();
            for l in 1..=n {
                trial.set(l, p.get(l) - step * grad[l - 1]);
            }
            let tv = free_energy(&trial, kappa, w, grid)?.total;
            if tv.is_finite() && tv < value - 1e-4 * step * gnorm2 {
                p = trial;
                value = tv;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(p)
}

/// Result of a global-minimization attempt at one kappa.
#[derive(Debug, Clone)]
pub struct Minimizer {
    pub p: ModeVector,
    pub value: f64,
    /// True when the reported minimizer is a Newton-certified critical point.
    pub certified: bool,
}

/// Multi-start minimization of the free energy at fixed kappa.
///
/// The start set is the bifurcation-theoretic catalog: the uniform state,
/// series seeds at admissible bifurcation modes, and caller-provided starts
/// (branch-catalog points, previous-kappa warm starts). Each start is
/// descended, Newton-polished on `F`, and the best value wins.
pub fn minimize_energy(
    kappa: f64,
    w: &PotentialSpectrum,
    n: usize,
    extra_starts: &[ModeVector],
    controls: &EnergyControls,
) -> Result<Minimizer> {
    let grid = if controls.grid == 0 { default_grid(n) } else { controls.grid };
    let mut starts: Vec<ModeVector> = vec![ModeVector::zeros(n)];
    for s in extra_starts {
        starts.push(s.resized(n));
    }
    if let Ok(reports) = find_bifurcation_points(w, kappa * 1.25, COINCIDENCE_TOL) {
        for report in &reports {
            if report.coincident_modes.len() == 1 {
                let m = report.coincident_modes[0];
                if let Ok(series) = crate::continuation::series_density(w, m, kappa, 12, n) {
                    starts.push(series.modes_plus.clone());
                    starts.push(series.modes_minus.clone());
                }
            }
        }
    }

    let mut best: Option<Minimizer> = None;
    for start in &starts {
        let descended = descend(start, kappa, w, grid, 150)?;
        let (candidate, certified) = match newton_solve(&descended, kappa, w, &controls.newton) {
            Ok(pt) => (pt.p, true),
            Err(_) => (descended, false),
        };
        let fe = free_energy(&candidate, kappa, w, grid)?;
        if !fe.finite {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => fe.total < b.value - 1e-15 || (fe.total < b.value && certified),
        };
        if better {
            best = Some(Minimizer { p: candidate, value: fe.total, certified });
        }
    }
    best.ok_or_else(|| Error::Numerical("all minimization starts failed".into()))
}

/// The continued branch catalog used by scans: every classified bifurcation
/// with `kappa* <= kappa_hi * 1.1` is switched and continued in both
/// directions within the scan window.
pub fn branch_catalog(
    w: &PotentialSpectrum,
    n: usize,
    kappa_lo: f64,
    kappa_hi: f64,
    controls: &ContinuationControls,
) -> Result<Vec<Branch>> {
    let reports = find_bifurcation_points(w, kappa_hi * 1.1, COINCIDENCE_TOL)?;
    let mut catalog = Vec::new();
    for report in &reports {
        for classified in classify_report(w, report) {
            for eps in [0.02, -0.02] {
                let seed = match switch_branch(&classified, eps, 0.5, n, w, &controls.newton) {
                    Ok(pt) => pt,
                    Err(_) => continue,
                };
                let v = kernel_direction(&classified, n)?;
                let mut ctl = *controls;
                ctl.kappa_min = (kappa_lo * 0.9).min(kappa_lo - 0.05);
                ctl.kappa_max = kappa_hi * 1.1;
                let provenance = provenance_of(&classified);
                if let Ok(branch) = continue_branch(&seed, (&v, 0.0), w, &ctl, provenance) {
                    catalog.push(branch);
                }
            }
        }
    }
    Ok(catalog)
}

/// All classifications applicable to a detected report: single-mode pitchfork,
/// the four transcritical sign patterns, or a multi-mode pitchfork.
fn classify_report(w: &PotentialSpectrum, report: &BifurcationReport) -> Vec<BifurcationReport> {
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
                    let mut out = Vec::new();
                    for signs in patterns {
                        if let Ok(r) = classify_resonance(w, l, m, signs, COINCIDENCE_TOL) {
                            out.push(r);
                        }
                    }
                    if !out.is_empty() {
                        return out;
                    }
                }
            }
        }
    }
    classify_multi_mode(w, modes, None).into_iter().collect()
}

fn provenance_of(report: &BifurcationReport) -> Provenance {
    match report.kind {
        BifurcationKind::Transcritical => {
            Provenance::Transcritical(report.resonance_triple.unwrap_or([0, 0, 0]))
        }
        BifurcationKind::MultiModePitchfork => {
            Provenance::MultiMode(report.coincident_modes.clone())
        }
        _ => Provenance::Pitchfork(report.primary_mode().unwrap_or(0)),
    }
}

/// How the uniform phase breaks at the transition point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    Continuous,
    Discontinuous,
    None,
}

/// Free-energy scan over a kappa grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyScan {
    pub kappas: Vec<f64>,
    pub m_values: Vec<f64>,
    /// Interaction energies `E(rho, rho)` of the minimizers.
    pub interaction: Vec<f64>,
    pub entropy: Vec<f64>,
    pub minimizer_norms: Vec<f64>,
    pub minimizers: Vec<ModeVector>,
    /// Grid indices flagged by the kink detector.
    pub kinks: Vec<usize>,
    pub transition: Option<(f64, TransitionKind)>,
}

/// Warm-started sweep of `m(kappa)` over `[kappa_lo, kappa_hi]`.
///
/// Minimization at each grid point starts from the uniform state, the branch
/// catalog near that kappa, and the previous minimizer. Kinks are grid points
/// whose centered second difference of `m` is negative and `kink_tol` times
/// the median magnitude.
pub fn scan_m(
    w: &PotentialSpectrum,
    n: usize,
    kappa_lo: f64,
    kappa_hi: f64,
    step: f64,
    controls: &EnergyControls,
    continuation: &ContinuationControls,
) -> Result<EnergyScan> {
    if !(step > 0.0) || kappa_hi <= kappa_lo {
        return Err(Error::InvalidInput("need kappa_lo < kappa_hi and step > 0".into()));
    }
    let catalog = branch_catalog(w, n, kappa_lo, kappa_hi, continuation)?;
    let count = ((kappa_hi - kappa_lo) / step).round() as usize + 1;
    let mut kappas = Vec::with_capacity(count);
    let mut m_values = Vec::with_capacity(count);
    let mut interaction = Vec::with_capacity(count);
    let mut entropy = Vec::with_capacity(count);
    let mut norms = Vec::with_capacity(count);
    let mut minimizers: Vec<ModeVector> = Vec::with_capacity(count);
    let grid = if controls.grid == 0 { default_grid(n) } else { controls.grid };

    for i in 0..count {
        let kappa = kappa_lo + step * i as f64;
        let mut starts: Vec<ModeVector> = Vec::new();
        if let Some(prev) = minimizers.last() {
            starts.push(prev.clone());
        }
        for branch in &catalog {
            if let Some(pt) = branch.nearest_by_kappa(kappa) {
                if (pt.kappa - kappa).abs() <= 5.0 * step + 0.05 {
                    starts.push(pt.p.clone());
                }
            }
        }
        let min = minimize_energy(kappa, w, n, &starts, controls)?;
        kappas.push(kappa);
        m_values.push(min.value.min(0.0));
        interaction.push(interaction_energy(&min.p, w));
        let fe = free_energy(&min.p, kappa, w, grid)?;
        entropy.push(fe.entropy);
        norms.push(min.p.norm());
        minimizers.push(min.p);
    }

    let mut d2 = vec![0.0; count];
    for i in 1..count.saturating_sub(1) {
        d2[i] = m_values[i + 1] - 2.0 * m_values[i] + m_values[i - 1];
    }
    let mut magnitudes: Vec<f64> = d2.iter().map(|v| v.abs()).collect();
    magnitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = magnitudes.get(count / 2).copied().unwrap_or(0.0);
    let floor = 1e-14 * (1.0 + m_values.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
    let kinks: Vec<usize> = (1..count.saturating_sub(1))
        .filter(|&i| d2[i] < 0.0 && d2[i].abs() > controls.kink_tol * median.max(floor))
        .collect();

    let transition = classify_transition(w, n, kappa_hi, controls, continuation).ok();

    Ok(EnergyScan {
        kappas,
        m_values,
        interaction,
        entropy,
        minimizer_norms: norms,
        minimizers,
        kinks,
        transition,
    })
}

/// Locates the transition point `kappa_c` (smallest kappa where the uniform
/// state stops being the global minimizer) and classifies its continuity.
///
/// The primary bifurcating branch at `kappa* = 2/max a_l` is continued; for a
/// supercritical branch the transition is continuous at `kappa*` itself, while
/// a branch with a subcritical segment has the free energy of the tracked
/// non-trivial solution bisected to its zero crossing, giving a coexistence
/// point strictly below `kappa*`.
pub fn classify_transition(
    w: &PotentialSpectrum,
    n: usize,
    kappa_cap: f64,
    controls: &EnergyControls,
    continuation: &ContinuationControls,
) -> Result<(f64, TransitionKind)> {
    let (max_a, _) = w
        .max_coeff()
        .filter(|(a, _)| *a > 0.0)
        .ok_or_else(|| Error::InvalidInput("no positive coefficient: no transition".into()))?;
    let kappa_star = 2.0 / max_a;
    if kappa_star > kappa_cap {
        return Ok((kappa_star, TransitionKind::None));
    }
    let grid = if controls.grid == 0 { default_grid(n) } else { controls.grid };
    let reports = find_bifurcation_points(w, kappa_star * 1.001, COINCIDENCE_TOL)?;
    let report =
        reports.first().ok_or_else(|| Error::Numerical("no bifurcation at 2/max(a)".into()))?;

    let mut best: Option<(f64, f64)> = None; // (kappa_c, minimizer norm there)
    for classified in classify_report(w, report) {
        let v = kernel_direction(&classified, n)?;
        for eps in [0.02, -0.02] {
            let seed = match switch_branch(&classified, eps, 0.5, n, w, &controls.newton) {
                Ok(pt) => pt,
                Err(_) => continue,
            };
            let mut ctl = *continuation;
            ctl.kappa_min = 0.0;
            ctl.kappa_max = kappa_star * 1.05;
            ctl.max_points = ctl.max_points.max(600);
            let branch =
                match continue_branch(&seed, (&v, 0.0), w, &ctl, provenance_of(&classified)) {
                    Ok(b) => b,
                    Err(_) => continue,
                };
            if let Some((kc, norm)) = branch_energy_zero(&branch, w, grid, &v, &controls.newton)? {
                if kc < kappa_star - 1e-12 {
                    let better = best.map(|(k, _)| kc < k).unwrap_or(true);
                    if better {
                        best = Some((kc, norm));
                    }
                }
            }
        }
    }

    match best {
        Some((kappa_c, norm)) if norm > controls.jump_tol => {
            Ok((kappa_c, TransitionKind::Discontinuous))
        }
        _ => {
            // no subcritical zero crossing: continuous transition at kappa*,
            // provided the branch lowers the energy just past it
            let primary = report.primary_mode().unwrap_or(1);
            let v = ModeVector::unit(n, primary, 1.0);
            let probe_kappa = kappa_star * (1.0 + 1e-3);
            let seed = ModeVector::unit(n, primary, 0.05);
            let mut broken = false;
            if let Ok(pt) = solve_with_amplitude(&v, 0.05, &seed, probe_kappa, w, &controls.newton)
            {
                if pt.kappa > kappa_star {
                    let fe = free_energy(&pt.p, pt.kappa, w, grid)?;
                    broken = fe.total < -controls.m_tol;
                }
            }
            if broken {
                Ok((kappa_star, TransitionKind::Continuous))
            } else {
                Ok((kappa_star, TransitionKind::None))
            }
        }
    }
}

/// Finds the zero crossing of `s -> F(p(s), kappa(s))` along a branch (past
/// the fold for subcritical branches) and refines it by bisection on the
/// kernel amplitude. Returns `(kappa_c, ||p_c||)`, or `None` when the branch
/// energy never turns negative below `kappa*`.
fn branch_energy_zero(
    branch: &Branch,
    w: &PotentialSpectrum,
    grid: usize,
    direction: &ModeVector,
    newton: &NewtonControls,
) -> Result<Option<(f64, f64)>> {
    let mut prev: Option<(&BranchPoint, f64)> = None;
    for pt in &branch.points {
        let fe = free_energy(&pt.p, pt.kappa, w, grid)?;
        if !fe.finite {
            break;
        }
        if let Some((p0, g0)) = prev {
            if g0 > 0.0 && fe.total <= 0.0 {
                let vv: f64 = direction.as_slice().iter().map(|x| x * x).sum();
                let proj = |p: &ModeVector| {
                    p.as_slice().iter().zip(direction.as_slice()).map(|(a, b)| a * b).sum::<f64>()
                        / vv
                };
                let (mut s_lo, mut s_hi) = (proj(&p0.p), proj(&pt.p));
                let mut seed = p0.p.clone();
                let mut kappa = p0.kappa;
                let mut out = pt.clone();
                for _ in 0..60 {
                    let s_mid = 0.5 * (s_lo + s_hi);
                    let mid = solve_with_amplitude(direction, s_mid, &seed, kappa, w, newton)?;
                    let fe_mid = free_energy(&mid.p, mid.kappa, w, grid)?;
                    if fe_mid.total > 0.0 {
                        s_lo = s_mid;
                    } else {
                        s_hi = s_mid;
                        out = mid.clone();
                    }
                    seed = mid.p;
                    kappa = mid.kappa;
                    if (s_hi - s_lo).abs() < 1e-13 {
                        break;
                    }
                }
                return Ok(Some((out.kappa, out.p.norm())));
            }
        }
        prev = Some((pt, fe.total));
    }
    Ok(None)
}

/// Report of the subcritical energy certificate along a branch.
#[derive(Debug, Clone, Copy)]
pub struct EnergyCertificate {
    /// `F(p_end, kappa*) - F(p_0, kappa*)` by direct evaluation.
    pub direct: f64,
    /// The same difference by integrating
    /// `dF/ds = (kappa_s - kappa*) * (1/2) dE/ds` along the branch.
    pub integrated: f64,
    pub points_used: usize,
}

/// Evaluates the energy-drop certificate along the maximal initial branch
/// segment with `kappa < kappa*`: both routes must agree, and a negative value
/// certifies that the uniform state is not the global minimizer at `kappa*`.
pub fn subcritical_energy_certificate(
    branch: &Branch,
    kappa_star: f64,
    w: &PotentialSpectrum,
    grid: usize,
) -> Result<EnergyCertificate> {
    let mut segment: Vec<&BranchPoint> = Vec::new();
    for (i, pt) in branch.points.iter().enumerate() {
        if i == 0 {
            if pt.kappa >= kappa_star {
                return Err(Error::NotSubcritical);
            }
            segment.push(pt);
            continue;
        }
        if pt.kappa < kappa_star {
            segment.push(pt);
        } else {
            break;
        }
    }
    if segment.len() < 3 {
        return Err(Error::NotSubcritical);
    }
    let last = segment.last().unwrap();
    let direct = free_energy(&last.p, kappa_star, w, grid)?.total
        - free_energy(&segment[0].p, kappa_star, w, grid)?.total;
    let mut integrated = 0.0;
    for pair in segment.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let e_a = interaction_energy(&a.p, w);
        let e_b = interaction_energy(&b.p, w);
        let kappa_mid = 0.5 * (a.kappa + b.kappa);
        integrated += 0.5 * (kappa_mid - kappa_star) * (e_b - e_a);
    }
    Ok(EnergyCertificate { direct, integrated, points_used: segment.len() })
}
