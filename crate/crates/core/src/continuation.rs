//! Newton solvers and branch continuation for the truncated system.
//!
//! Branches of `F(p, kappa) = 0` are tracked three ways:
//! * plain Newton at fixed `kappa` ([`newton_solve`]), with optional pinning of
//!   one mode for one-parameter solution families;
//! * amplitude-parameterized solves ([`solve_with_amplitude`]) where the
//!   projection of `p` onto a kernel direction is prescribed and `kappa` is an
//!   unknown -- the natural parameterization through pitchforks and folds;
//! * pseudo-arclength predictor-corrector continuation ([`continue_branch`])
//!   with secant tangents in the `(1+l^2)`-weighted metric.

use crate::bifurcation::{BifurcationKind, BifurcationReport};
use crate::error::{ensure_finite, Error, Result};
use crate::modes::ModeVector;
use crate::potential::PotentialSpectrum;
use crate::spectral::{jacobian, residual};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Convergence controls for the Newton correctors.
#[derive(Debug, Clone, Copy)]
pub struct NewtonControls {
    pub tol: f64,
    pub max_iter: usize,
    /// Max step halvings when the full step increases the residual.
    pub max_halvings: usize,
    /// Gibbs self-consistency iterations applied to the seed before Newton
    /// (plain solves only). The fixed-point map contracts toward stable
    /// solutions, moving far-away seeds into the right Newton basin.
    pub presmooth: usize,
}

impl Default for NewtonControls {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 50, max_halvings: 25, presmooth: 0 }
    }
}

impl NewtonControls {
    /// Controls with `k` self-consistency pre-iterations.
    pub fn with_presmooth(k: usize) -> Self {
        Self { presmooth: k, ..Self::default() }
    }
}

/// Controls for pseudo-arclength continuation.
#[derive(Debug, Clone, Copy)]
pub struct ContinuationControls {
    pub step: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub max_points: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub newton: NewtonControls,
}

impl Default for ContinuationControls {
    fn default() -> Self {
        Self {
            step: 0.01,
            step_min: 1e-5,
            step_max: 0.05,
            max_points: 400,
            kappa_min: 0.0,
            kappa_max: f64::INFINITY,
            newton: NewtonControls::default(),
        }
    }
}

/// One accepted point on a solution branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPoint {
    pub p: ModeVector,
    pub kappa: f64,
    /// Cumulative weighted arclength along the branch (0 at the seed point).
    pub arclength: f64,
    pub residual_norm: f64,
    /// Largest real part over the Jacobian spectrum, when requested.
    pub stability: Option<f64>,
}

/// How a branch was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Trivial,
    Pitchfork(usize),
    MultiMode(Vec<usize>),
    Transcritical([usize; 3]),
    SeriesSeeded,
}

/// An ordered sequence of branch points with strictly increasing arclength.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub provenance: Provenance,
    /// False when the corrector failed and only a partial branch is returned.
    pub complete: bool,
}

impl Branch {
    /// Point with kappa closest to the target.
    pub fn nearest_by_kappa(&self, kappa: f64) -> Option<&BranchPoint> {
        self.points.iter().min_by(|a, b| {
            (a.kappa - kappa).abs().partial_cmp(&(b.kappa - kappa).abs()).unwrap()
        })
    }

    pub fn kappa_range(&self) -> Option<(f64, f64)> {
        let mut it = self.points.iter().map(|pt| pt.kappa);
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for k in it {
            lo = lo.min(k);
            hi = hi.max(k);
        }
        Some((lo, hi))
    }
}

/// Weighted inner product on `(p, kappa)` states: modes carry `(1 + l^2)`.
fn weighted_dot(pa: &[f64], ka: f64, pb: &[f64], kb: f64) -> f64 {
    let modes: f64 = pa
        .iter()
        .zip(pb)
        .enumerate()
        .map(|(i, (a, b))| {
            let l = i as f64 + 1.0;
            (1.0 + l * l) * a * b
        })
        .sum();
    modes + ka * kb
}

/// `dF/dkappa` at `(p, kappa)`.
fn kappa_derivative(p: &ModeVector, w: &PotentialSpectrum) -> Vec<f64> {
    let n = p.truncation();
    let x = p.as_slice();
    let mut out = vec![0.0; n];
    for l in 1..=n {
        let mut acc = -(l as f64) * w.coeff(l) * x[l - 1];
        for j in 1..l {
            acc -= (j as f64) * w.coeff(j) * x[j - 1] * x[l - j - 1];
        }
        for j in (l + 1)..=n {
            acc -= ((j as f64) * w.coeff(j) - ((j - l) as f64) * w.coeff(j - l))
                * x[j - 1]
                * x[j - l - 1];
        }
        out[l - 1] = acc;
    }
    out
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest real part over the spectrum of the Jacobian at `(p, kappa)`.
pub fn leading_eigenvalue(p: &ModeVector, kappa: f64, w: &PotentialSpectrum) -> Result<f64> {
    let j = jacobian(p, kappa, w)?;
    let eig = j.complex_eigenvalues();
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Newton iteration on `F(., kappa) = 0` at fixed `kappa`.
///
/// Steps are halved while the full step increases the residual norm.
pub fn newton_solve(
    seed: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    controls: &NewtonControls,
) -> Result<BranchPoint> {
    newton_solve_impl(seed, kappa, w, controls, None)
}

/// Newton iteration with mode `pin` frozen at its seed value; the equation for
/// the pinned mode is dropped. This removes the one-dimensional degeneracy of
/// symmetric solution families (for example the Poisson-kernel family).
pub fn newton_solve_pinned(
    seed: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    pin: usize,
    controls: &NewtonControls,
) -> Result<BranchPoint> {
    if pin < 1 || pin > seed.truncation() {
        return Err(Error::InvalidInput(format!(
            "pin mode {pin} outside 1..={}",
            seed.truncation()
        )));
    }
    newton_solve_impl(seed, kappa, w, controls, Some(pin))
}

fn newton_solve_impl(
    seed: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    controls: &NewtonControls,
    pin: Option<usize>,
) -> Result<BranchPoint> {
    ensure_finite(seed.as_slice(), "newton seed")?;
    let n = seed.truncation();
    let mut p = seed.clone();
    if pin.is_none() {
        let grid = crate::spectral::default_grid(n);
        for _ in 0..controls.presmooth {
            let d = crate::spectral::fixed_point_map(&p, kappa, w, grid)?;
            p = crate::spectral::analyze_density(&d, n)?;
        }
    }
    let mut f = residual(&p, kappa, w)?;
    let mut fnorm = norm2(&f);
    for _ in 0..controls.max_iter {
        if fnorm <= controls.tol {
            return Ok(BranchPoint { p, kappa, arclength: 0.0, residual_norm: fnorm, stability: None });
        }
        let jac = jacobian(&p, kappa, w)?;
        let delta = match pin {
            None => {
                let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
                jac.lu().solve(&rhs).ok_or(Error::SingularJacobian)?
            }
            Some(pin) => {
                // drop the pinned row and column
                let m = n - 1;
                let mut red = DMatrix::<f64>::zeros(m, m);
                let mut rhs = DVector::<f64>::zeros(m);
                let keep: Vec<usize> = (1..=n).filter(|l| *l != pin).collect();
                for (r, &lr) in keep.iter().enumerate() {
                    rhs[r] = -f[lr - 1];
                    for (c, &lc) in keep.iter().enumerate() {
                        red[(r, c)] = jac[(lr - 1, lc - 1)];
                    }
                }
                let sol = red.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
                let mut full = DVector::<f64>::zeros(n);
                for (r, &lr) in keep.iter().enumerate() {
                    full[lr - 1] = sol[r];
                }
                full
            }
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=controls.max_halvings {
            let mut trial = p.clone();
            for l in 1..=n {
                trial.set(l, p.get(l) + lambda * delta[l - 1]);
            }
            let ft = residual(&trial, kappa, w)?;
            let ftn = norm2(&ft);
            if ftn < fnorm || ftn <= controls.tol {
                p = trial;
                f = ft;
                fnorm = ftn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged { iterations: controls.max_iter, residual: fnorm });
        }
    }
    if fnorm <= controls.tol {
        Ok(BranchPoint { p, kappa, arclength: 0.0, residual_norm: fnorm, stability: None })
    } else {
        Err(Error::NewtonDiverged { iterations: controls.max_iter, residual: fnorm })
    }
}

/// Solves the bordered system `F(p, kappa) = 0`, `<p, v> = s <v, v>` for
/// `(p, kappa)`: the solution has prescribed amplitude `s` along the kernel
/// direction `v` while `kappa` adjusts. Parameterizing by amplitude is
/// transverse to both pitchforks and folds.
pub fn solve_with_amplitude(
    direction: &ModeVector,
    s: f64,
    seed: &ModeVector,
    kappa_guess: f64,
    w: &PotentialSpectrum,
    controls: &NewtonControls,
) -> Result<BranchPoint> {
    let n = seed.truncation();
    if direction.truncation() != n {
        return Err(Error::InvalidInput("direction/seed truncation mismatch".into()));
    }
    let v = direction.as_slice();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if vv == 0.0 {
        return Err(Error::InvalidInput("kernel direction must be nonzero".into()));
    }
    let mut p = seed.clone();
    let mut kappa = kappa_guess;

    let eval = |p: &ModeVector, kappa: f64| -> Result<(Vec<f64>, f64)> {
        let f = residual(p, kappa, w)?;
        let c: f64 = p.as_slice().iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - s * vv;
        let mut full = f;
        full.push(c);
        let norm = norm2(&full);
        Ok((full, norm))
    };

    let (mut f, mut fnorm) = eval(&p, kappa)?;
    for _ in 0..controls.max_iter {
        if fnorm <= controls.tol {
            let rn = norm2(&f[..n]);
            return Ok(BranchPoint { p, kappa, arclength: 0.0, residual_norm: rn, stability: None });
        }
        let jac = jacobian(&p, kappa, w)?;
        let dk = kappa_derivative(&p, w);
        let mut big = DMatrix::<f64>::zeros(n + 1, n + 1);
        big.view_mut((0, 0), (n, n)).copy_from(&jac);
        for l in 0..n {
            big[(l, n)] = dk[l];
            big[(n, l)] = v[l];
        }
        let rhs = DVector::from_iterator(n + 1, f.iter().map(|x| -x));
        let delta = big.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=controls.max_halvings {
            let mut trial = p.clone();
            for l in 1..=n {
                trial.set(l, p.get(l) + lambda * delta[l - 1]);
            }
            let ktrial = kappa + lambda * delta[n];
            let (ft, ftn) = eval(&trial, ktrial)?;
            if ftn < fnorm || ftn <= controls.tol {
                p = trial;
                kappa = ktrial;
                f = ft;
                fnorm = ftn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged { iterations: controls.max_iter, residual: fnorm });
        }
    }
    if fnorm <= controls.tol {
        let rn = norm2(&f[..n]);
        Ok(BranchPoint { p, kappa, arclength: 0.0, residual_norm: rn, stability: None })
    } else {
        Err(Error::NewtonDiverged { iterations: controls.max_iter, residual: fnorm })
    }
}

/// Pseudo-arclength continuation from a converged start point.
///
/// The tangent is the secant between consecutive points, normalized in the
/// weighted metric; the corrector is Newton on the bordered system
/// `[F; <u - u_pred, t>_w]`. The step length adapts between `step_min` and
/// `step_max`. Stops at the kappa bounds, on step collapse (partial branch,
/// `complete = false`), or when the point budget is exhausted.
pub fn continue_branch(
    start: &BranchPoint,
    initial_tangent: (&ModeVector, f64),
    w: &PotentialSpectrum,
    controls: &ContinuationControls,
    provenance: Provenance,
) -> Result<Branch> {
    let mut tangent_p: Vec<f64> = initial_tangent.0.as_slice().to_vec();
    let mut tangent_k = initial_tangent.1;
    let tnorm = weighted_dot(&tangent_p, tangent_k, &tangent_p, tangent_k).sqrt();
    if tnorm == 0.0 {
        return Err(Error::InvalidInput("initial tangent must be nonzero".into()));
    }
    for t in tangent_p.iter_mut() {
        *t /= tnorm;
    }
    tangent_k /= tnorm;

    let mut points = vec![start.clone()];
    let mut h = controls.step.clamp(controls.step_min, controls.step_max);
    let mut complete = true;

    'outer: while points.len() < controls.max_points {
        let last = points.last().unwrap().clone();
        let mut converged: Option<(BranchPoint, usize)> = None;
        while converged.is_none() {
            match arclength_corrector(&last, &tangent_p, tangent_k, h, w, &controls.newton) {
                Ok(res) => converged = Some(res),
                Err(_) => {
                    h *= 0.5;
                    if h < controls.step_min {
                        complete = false;
                        break 'outer;
                    }
                }
            }
        }
        let (mut point, iters) = converged.unwrap();
        let dp: Vec<f64> =
            point.p.as_slice().iter().zip(last.p.as_slice()).map(|(a, b)| a - b).collect();
        let dk = point.kappa - last.kappa;
        let ds = weighted_dot(&dp, dk, &dp, dk).sqrt();
        if ds < 1e-15 {
            // duplicate point: stop rather than loop in place
            complete = false;
            break;
        }
        point.arclength = last.arclength + ds;
        // secant tangent for the next step
        let mut tp = dp;
        let mut tk = dk;
        let tn = weighted_dot(&tp, tk, &tp, tk).sqrt();
        for t in tp.iter_mut() {
            *t /= tn;
        }
        tk /= tn;
        tangent_p = tp;
        tangent_k = tk;

        let kappa = point.kappa;
        points.push(point);
        if kappa < controls.kappa_min || kappa > controls.kappa_max {
            break;
        }
        if iters <= 3 {
            h = (h * 1.4).min(controls.step_max);
        }
    }

    Ok(Branch { points, provenance, complete })
}

/// One predictor-corrector step; returns the accepted point and the number of
/// Newton iterations used.
fn arclength_corrector(
    last: &BranchPoint,
    tangent_p: &[f64],
    tangent_k: f64,
    h: f64,
    w: &PotentialSpectrum,
    newton: &NewtonControls,
) -> Result<(BranchPoint, usize)> {
    let n = last.p.truncation();
    let mut p = last.p.clone();
    for l in 1..=n {
        p.set(l, p.get(l) + h * tangent_p[l - 1]);
    }
    let mut kappa = last.kappa + h * tangent_k;
    let pred_p = p.clone();
    let pred_k = kappa;

    let eval = |p: &ModeVector, kappa: f64| -> Result<(Vec<f64>, f64)> {
        let f = residual(p, kappa, w)?;
        let dp: Vec<f64> =
            p.as_slice().iter().zip(pred_p.as_slice()).map(|(a, b)| a - b).collect();
        let c = weighted_dot(&dp, kappa - pred_k, tangent_p, tangent_k);
        let mut full = f;
        full.push(c);
        let norm = norm2(&full);
        Ok((full, norm))
    };

    let max_iter = 12;
    let (mut f, mut fnorm) = eval(&p, kappa)?;
    for it in 0..max_iter {
        if fnorm <= newton.tol {
            let rn = norm2(&f[..n]);
            return Ok((
                BranchPoint { p, kappa, arclength: 0.0, residual_norm: rn, stability: None },
                it,
            ));
        }
        let jac = jacobian(&p, kappa, w)?;
        let dk = kappa_derivative(&p, w);
        let mut big = DMatrix::<f64>::zeros(n + 1, n + 1);
        big.view_mut((0, 0), (n, n)).copy_from(&jac);
        for l in 0..n {
            big[(l, n)] = dk[l];
            // constraint row carries the weighted metric
            let ll = (l + 1) as f64;
            big[(n, l)] = (1.0 + ll * ll) * tangent_p[l];
        }
        big[(n, n)] = tangent_k;
        let rhs = DVector::from_iterator(n + 1, f.iter().map(|x| -x));
        let delta = big.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        for l in 1..=n {
            p.set(l, p.get(l) + delta[l - 1]);
        }
        kappa += delta[n];
        let (ft, ftn) = eval(&p, kappa)?;
        f = ft;
        fnorm = ftn;
    }
    if fnorm <= newton.tol {
        let rn = norm2(&f[..n]);
        Ok((BranchPoint { p, kappa, arclength: 0.0, residual_norm: rn, stability: None }, max_iter))
    } else {
        Err(Error::NewtonDiverged { iterations: max_iter, residual: fnorm })
    }
}

/// Kernel direction associated with a classified bifurcation report.
pub fn kernel_direction(report: &BifurcationReport, n: usize) -> Result<ModeVector> {
    match &report.kind {
        BifurcationKind::SupercriticalPitchfork
        | BifurcationKind::SubcriticalPitchfork
        | BifurcationKind::Critical => {
            let l = report
                .primary_mode()
                .ok_or_else(|| Error::InvalidInput("report lacks a primary mode".into()))?;
            if l > n {
                return Err(Error::InvalidInput(format!("mode {l} beyond truncation {n}")));
            }
            Ok(ModeVector::unit(n, l, 1.0))
        }
        BifurcationKind::MultiModePitchfork => {
            let weights = report
                .modal_weights
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("multi-mode report lacks weights".into()))?;
            let mut v = ModeVector::zeros(n);
            for (l, b) in report.coincident_modes.iter().zip(&weights.weights) {
                if *l > n {
                    return Err(Error::InvalidInput(format!("mode {l} beyond truncation {n}")));
                }
                v.set(*l, *b);
            }
            Ok(v)
        }
        BifurcationKind::Transcritical => {
            let triple = report.resonance_triple.ok_or_else(|| {
                Error::InvalidInput("transcritical report lacks a resonance triple".into())
            })?;
            let signs = report.resonance_signs.unwrap_or([1.0, 1.0, 1.0]);
            let mut v = ModeVector::zeros(n);
            for (l, s) in triple.iter().zip(signs) {
                if *l > n {
                    return Err(Error::InvalidInput(format!("mode {l} beyond truncation {n}")));
                }
                v.set(*l, s);
            }
            Ok(v)
        }
        BifurcationKind::Unclassified => {
            Err(Error::InvalidInput("classify the report before switching branches".into()))
        }
    }
}

/// Local kappa prediction `kappa(s)` for a classified report.
pub fn predicted_kappa(report: &BifurcationReport, s: f64) -> f64 {
    match report.kind {
        BifurcationKind::Transcritical => report.kappa_star * (1.0 - s),
        _ => report.kappa_star + 0.5 * report.curvature * s * s,
    }
}

/// Switches onto the non-trivial branch at a classified bifurcation point.
///
/// Seeds `epsilon` along the kernel direction at the locally predicted kappa
/// and corrects with the amplitude-pinned bordered solve; on collapse to the
/// trivial solution the amplitude is doubled, up to `epsilon_max`.
pub fn switch_branch(
    report: &BifurcationReport,
    epsilon: f64,
    epsilon_max: f64,
    n: usize,
    w: &PotentialSpectrum,
    controls: &NewtonControls,
) -> Result<BranchPoint> {
    if epsilon == 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidInput("epsilon must be nonzero and finite".into()));
    }
    let v = kernel_direction(report, n)?;
    let mut eps = epsilon;
    loop {
        let mut seed = ModeVector::zeros(n);
        for l in 1..=n {
            seed.set(l, eps * v.get(l));
        }
        let kappa_guess = predicted_kappa(report, eps);
        if let Ok(point) = solve_with_amplitude(&v, eps, &seed, kappa_guess, w, controls) {
            if point.p.norm() >= 0.1 * eps.abs() {
                return Ok(point);
            }
        }
        eps *= 2.0;
        if eps.abs() > epsilon_max {
            return Err(Error::BranchCollapse);
        }
    }
}

/// Drives the amplitude from `s_from` to `s_to` in `steps` warm-started
/// amplitude-pinned solves; returns the branch over the amplitude grid.
pub fn trace_amplitude_branch(
    direction: &ModeVector,
    s_from: f64,
    s_to: f64,
    steps: usize,
    seed: &BranchPoint,
    w: &PotentialSpectrum,
    controls: &NewtonControls,
    provenance: Provenance,
) -> Result<Branch> {
    if steps < 1 {
        return Err(Error::InvalidInput("need at least one amplitude step".into()));
    }
    let mut points = Vec::with_capacity(steps + 1);
    let mut current = seed.clone();
    let mut arclength = 0.0;
    let mut s_prev = s_from;
    points.push(current.clone());
    for k in 1..=steps {
        let s = s_from + (s_to - s_from) * (k as f64) / (steps as f64);
        // linear predictor along the pinned direction; also moves the very
        // first solve off the (singular) bifurcation point itself
        let mut guess = current.p.clone();
        for l in 1..=guess.truncation() {
            guess.set(l, guess.get(l) + (s - s_prev) * direction.get(l));
        }
        let next = solve_with_amplitude(direction, s, &guess, current.kappa, w, controls)?;
        let dp: Vec<f64> =
            next.p.as_slice().iter().zip(current.p.as_slice()).map(|(a, b)| a - b).collect();
        let ds =
            weighted_dot(&dp, next.kappa - current.kappa, &dp, next.kappa - current.kappa).sqrt();
        arclength += ds;
        let mut pt = next.clone();
        pt.arclength = arclength;
        points.push(pt);
        current = next;
        s_prev = s;
    }
    Ok(Branch { points, provenance, complete: true })
}

/// Forward z-recursion of the series representation:
/// `z_m = 1`, `l m (2 - kappa a_{lm}) z_{lm} = kappa sum_{j<l} j m a_{jm} z_{jm} z_{(l-j)m}`.
///
/// Returns `z_{lm}` for `l = 1..=l_count`.
pub fn z_recursion(
    w: &PotentialSpectrum,
    m: usize,
    kappa: f64,
    l_count: usize,
) -> Result<Vec<f64>> {
    if m == 0 || l_count == 0 {
        return Err(Error::InvalidInput("need m >= 1 and at least one coefficient".into()));
    }
    let mut z = vec![0.0; l_count];
    z[0] = 1.0;
    for l in 2..=l_count {
        let denom = 2.0 - kappa * w.coeff(l * m);
        if denom.abs() < 1e-12 {
            return Err(Error::ResonantDenominator { mode: l });
        }
        let mut acc = 0.0;
        for j in 1..l {
            acc += (j as f64) * w.coeff(j * m) * z[j - 1] * z[l - j - 1];
        }
        z[l - 1] = kappa * acc / ((l as f64) * denom);
    }
    Ok(z)
}

/// Series solution of the stationary equation near the bifurcation at mode `m`.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    pub m: usize,
    pub z: Vec<f64>,
    /// Leading-order amplitudes `(s+, s-)`.
    pub amplitude: (f64, f64),
    pub modes_plus: ModeVector,
    pub modes_minus: ModeVector,
}

/// Leading-order amplitude `s+(kappa)`; the minus branch is its negative.
///
/// `s(kappa)^2 = 2 (kappa a_m - 2)(2 - kappa a_{2m}) / (kappa^2 a_m (a_m - 2 a_{2m}))`.
pub fn series_amplitude(w: &PotentialSpectrum, m: usize, kappa: f64) -> Result<f64> {
    let am = w.coeff(m);
    let a2m = w.coeff(2 * m);
    if am <= 0.0 {
        return Err(Error::InvalidInput(format!("a_{m} must be positive")));
    }
    let signature = (am - 2.0 * a2m) / (am - a2m);
    let side = kappa * am - 2.0;
    if (signature > 0.0 && side <= 0.0) || (signature < 0.0 && side >= 0.0) {
        return Err(Error::SideMismatch);
    }
    let value = 2.0 * side * (2.0 - kappa * a2m) / (kappa * kappa * am * (am - 2.0 * a2m));
    if value < 0.0 {
        return Err(Error::SideMismatch);
    }
    Ok(value.sqrt())
}

/// Assembles the series predictor `p_{lm} = s^l z_{lm}` for both amplitude
/// signs at truncation `n`. Remainder terms are dropped: the output is a
/// predictor to be Newton-refined, not a certified solution.
pub fn series_density(
    w: &PotentialSpectrum,
    m: usize,
    kappa: f64,
    l_count: usize,
    n: usize,
) -> Result<SeriesSolution> {
    let s = series_amplitude(w, m, kappa)?;
    let z = z_recursion(w, m, kappa, l_count)?;
    let assemble = |s: f64| -> ModeVector {
        let mut p = ModeVector::zeros(n);
        let mut sl = 1.0;
        for (l, zl) in z.iter().enumerate() {
            sl *= s;
            let mode = (l + 1) * m;
            if mode <= n {
                p.set(mode, sl * zl);
            }
        }
        p
    };
    let modes_plus = assemble(s);
    let modes_minus = assemble(-s);
    Ok(SeriesSolution { m, z, amplitude: (s, -s), modes_plus, modes_minus })
}

/// Two-sided amplitude trace through a classified bifurcation point followed
/// by a quadratic fit of `kappa` against the kernel amplitude. This is the
/// standard validation of the local expansion: the fitted `kappa''(0)` should
/// match `(2/a) R` for pitchforks and the fitted slope `-2/a` for
/// transcritical branches.
pub fn fit_bifurcation_curvature(
    report: &BifurcationReport,
    n: usize,
    w: &PotentialSpectrum,
    s_max: f64,
    steps: usize,
    newton: &NewtonControls,
) -> Result<CurvatureFit> {
    let v = kernel_direction(report, n)?;
    let seed = BranchPoint {
        p: ModeVector::zeros(n),
        kappa: report.kappa_star,
        arclength: 0.0,
        residual_norm: 0.0,
        stability: None,
    };
    let provenance = Provenance::SeriesSeeded;
    let up = trace_amplitude_branch(&v, 0.0, s_max, steps, &seed, w, newton, provenance.clone())?;
    let down = trace_amplitude_branch(&v, 0.0, -s_max, steps, &seed, w, newton, provenance)?;
    let mut merged = up;
    merged.points.extend(down.points.into_iter().skip(1));
    branch_curvature_fit(&merged, &v, s_max * 1.001)
}

/// Quadratic least-squares fit of `kappa` against a branch amplitude.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureFit {
    /// Fitted `kappa'(0)`.
    pub slope: f64,
    /// Fitted `kappa''(0)` (twice the quadratic coefficient).
    pub curvature: f64,
    /// Root-mean-square residual of the fit.
    pub rms: f64,
    pub points_used: usize,
}

/// Fits `kappa(s) ~ c0 + c1 s + c2 s^2` over branch points with `|s| <= s_fit`,
/// where `s` is the signed projection of `p` onto `direction` (normalized so a
/// pure kernel-direction state has `s` equal to its coefficient).
pub fn branch_curvature_fit(
    branch: &Branch,
    direction: &ModeVector,
    s_fit: f64,
) -> Result<CurvatureFit> {
    let vv: f64 = direction.as_slice().iter().map(|x| x * x).sum();
    if vv == 0.0 {
        return Err(Error::InvalidInput("fit direction must be nonzero".into()));
    }
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for pt in &branch.points {
        let s: f64 = pt
            .p
            .as_slice()
            .iter()
            .zip(direction.as_slice())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / vv;
        if s.abs() <= s_fit {
            rows.push((s, pt.kappa));
        }
    }
    if rows.len() < 8 {
        return Err(Error::InsufficientPoints { have: rows.len(), need: 8 });
    }
    let mut ata = DMatrix::<f64>::zeros(3, 3);
    let mut atb = DVector::<f64>::zeros(3);
    for &(s, k) in &rows {
        let basis = [1.0, s, s * s];
        for i in 0..3 {
            for j in 0..3 {
                ata[(i, j)] += basis[i] * basis[j];
            }
            atb[i] += basis[i] * k;
        }
    }
    let coef = ata.lu().solve(&atb).ok_or(Error::SingularJacobian)?;
    let rms = (rows
        .iter()
        .map(|&(s, k)| {
            let fit = coef[0] + coef[1] * s + coef[2] * s * s;
            (k - fit) * (k - fit)
        })
        .sum::<f64>()
        / rows.len() as f64)
        .sqrt();
    Ok(CurvatureFit { slope: coef[1], curvature: 2.0 * coef[2], rms, points_used: rows.len() })
}
