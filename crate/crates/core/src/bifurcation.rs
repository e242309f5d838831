//! Detection and classification of bifurcations off the trivial branch.
//!
//! Bifurcation points are exactly the values `kappa = 2/a_l` over positive
//! Fourier modes of the potential. A single dominant mode gives a pitchfork
//! whose direction is decided by the l-signature
//! `R_l = (a_l - 2 a_{2l}) / (a_l - a_{2l})`; coincident modes interact through
//! the B-matrix, and the resonance pattern `a_l = a_m = a_{l+m}` produces
//! transcritical branches.

use crate::error::{Error, Result};
use crate::potential::PotentialSpectrum;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Relative tolerance under which two coefficients count as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-9;
/// Conditioning threshold for signature denominators `a - a_{2l}`.
pub const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BifurcationKind {
    Unclassified,
    SupercriticalPitchfork,
    SubcriticalPitchfork,
    Critical,
    Transcritical,
    MultiModePitchfork,
}

/// Modal weights of a multi-mode pitchfork: `p(s) = s sum b_r e_{l_r} + O(s^2)`
/// with `kappa(s) = kappa* (1 + sigma s^2 / 2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModalWeights {
    pub weights: Vec<f64>,
    pub sigma: f64,
}

/// A detected (and possibly classified) bifurcation point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub kappa_star: f64,
    /// Modes whose coefficients attain the level `2/kappa_star` within tolerance.
    pub coincident_modes: Vec<usize>,
    /// Single-mode signature `R_{l*}`; zero until classified.
    pub signature: f64,
    /// Curvature `kappa''(0)`; for transcritical reports the slope lives in
    /// `kappa_slope` instead.
    pub curvature: f64,
    /// Transcritical slope `kappa'(0)`, when applicable.
    pub kappa_slope: f64,
    pub kind: BifurcationKind,
    pub modal_weights: Option<ModalWeights>,
    /// Resonance triple stored as `[l, m, l+m]`.
    pub resonance_triple: Option<[usize; 3]>,
    pub resonance_signs: Option<[f64; 3]>,
    /// gcd of the coincident set; every bifurcating solution is g-periodic.
    pub periodicity: usize,
    /// Set when the signature denominator is smaller than `DEGENERACY_TOL * a`.
    pub ill_conditioned: bool,
}

impl BifurcationReport {
    pub fn primary_mode(&self) -> Option<usize> {
        self.coincident_modes.first().copied()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn gcd_set(modes: &[usize]) -> usize {
    modes.iter().fold(0, |acc, &m| gcd(acc, m))
}

/// All bifurcation points `kappa = 2/a_l <= kappa_max` over positive
/// coefficients, sorted by kappa, with coincident modes merged.
pub fn find_bifurcation_points(
    w: &PotentialSpectrum,
    kappa_max: f64,
    coincidence_tol: f64,
) -> Result<Vec<BifurcationReport>> {
    if !(kappa_max > 0.0) {
        return Err(Error::InvalidInput(format!("kappa_max must be positive, got {kappa_max}")));
    }
    // collect (a_l, l) for positive coefficients with 2/a_l <= kappa_max
    let mut levels: Vec<(f64, usize)> = (1..=w.stored_len())
        .filter_map(|l| {
            let a = w.coeff(l);
            if a > 0.0 && 2.0 / a <= kappa_max {
                Some((a, l))
            } else {
                None
            }
        })
        .collect();
    // descending level = ascending kappa
    levels.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    let mut reports: Vec<BifurcationReport> = Vec::new();
    for (a, l) in levels {
        let merged = reports.last_mut().filter(|r| {
            let level = 2.0 / r.kappa_star;
            (level - a).abs() <= coincidence_tol * level.max(a)
        });
        match merged {
            Some(r) => {
                r.coincident_modes.push(l);
                r.periodicity = gcd_set(&r.coincident_modes);
            }
            None => reports.push(BifurcationReport {
                kappa_star: 2.0 / a,
                coincident_modes: vec![l],
                signature: 0.0,
                curvature: 0.0,
                kappa_slope: 0.0,
                kind: BifurcationKind::Unclassified,
                modal_weights: None,
                resonance_triple: None,
                resonance_signs: None,
                periodicity: l,
                ill_conditioned: false,
            }),
        }
    }
    Ok(reports)
}

/// Classifies the single-mode pitchfork at `l*`.
///
/// `R = (a_{l*} - 2 a_{2l*})/(a_{l*} - a_{2l*})`, `kappa''(0) = (2/a_{l*}) R`;
/// supercritical for `R > 0`, subcritical for `R < 0`, critical at `R = 0`.
pub fn classify_single_mode(
    w: &PotentialSpectrum,
    l_star: usize,
    coincidence_tol: f64,
) -> Result<BifurcationReport> {
    let a = w.coeff(l_star);
    if a <= 0.0 {
        return Err(Error::InvalidInput(format!("a_{l_star} must be positive, got {a}")));
    }
    for j in 1..=w.stored_len() {
        if j != l_star {
            let aj = w.coeff(j);
            if (aj - a).abs() <= coincidence_tol * a.abs().max(aj.abs()) {
                return Err(Error::CoincidentModes { level: a });
            }
        }
    }
    let a2 = w.coeff(2 * l_star);
    let denom = a - a2;
    let signature = (a - 2.0 * a2) / denom;
    let curvature = 2.0 / a * signature;
    let kind = if signature.abs() <= 1e-12 {
        BifurcationKind::Critical
    } else if signature > 0.0 {
        BifurcationKind::SupercriticalPitchfork
    } else {
        BifurcationKind::SubcriticalPitchfork
    };
    Ok(BifurcationReport {
        kappa_star: 2.0 / a,
        coincident_modes: vec![l_star],
        signature,
        curvature,
        kappa_slope: 0.0,
        kind,
        modal_weights: None,
        resonance_triple: None,
        resonance_signs: None,
        periodicity: l_star,
        ill_conditioned: denom.abs() < DEGENERACY_TOL * a,
    })
}

/// Interaction matrix between coincident dominant modes at level `a`.
#[derive(Debug, Clone)]
pub struct BMatrix {
    pub modes: Vec<usize>,
    pub level: f64,
    pub entries: DMatrix<f64>,
}

/// Checks the no-resonance conditions of the multi-mode theorem for the set.
fn check_no_resonance(modes: &[usize]) -> Result<()> {
    let in_set = |x: usize| modes.contains(&x);
    for &i in modes {
        for &j in modes {
            if in_set(i + j) {
                return Err(Error::ResonanceViolation {
                    condition: "(i): l_i + l_j must avoid the set",
                    detail: format!("{i} + {j} = {} is coincident", i + j),
                });
            }
        }
    }
    for &i in modes {
        for &j in modes {
            for &r in modes {
                if in_set(i + j + r) {
                    return Err(Error::ResonanceViolation {
                        condition: "(ii): triple sums must avoid the set",
                        detail: format!("{i} + {j} + {r} = {}", i + j + r),
                    });
                }
            }
        }
    }
    // (iii) pairwise sums must be distinct across distinct unordered pairs
    let mut sums: Vec<(usize, (usize, usize))> = Vec::new();
    for (ai, &i) in modes.iter().enumerate() {
        for &j in &modes[ai..] {
            sums.push((i + j, (i.min(j), i.max(j))));
        }
    }
    for (x, px) in &sums {
        for (y, py) in &sums {
            if x == y && px != py {
                return Err(Error::ResonanceViolation {
                    condition: "(iii): pairwise sums must identify the pair",
                    detail: format!("{:?} and {:?} share the sum {x}", px, py),
                });
            }
        }
    }
    Ok(())
}

/// Builds the B-matrix for a coincident set at level `a`.
///
/// In the exactly equalized case `a = a_{l}` for every `l` in the set. For
/// near-clusters each row `l` is evaluated at its own level `a_l` (the natural
/// reading of the clustered regime); pass `level = None` for that behavior or
/// a fixed common level otherwise.
pub fn build_b_matrix(
    w: &PotentialSpectrum,
    modes: &[usize],
    level: Option<f64>,
) -> Result<BMatrix> {
    if modes.is_empty() {
        return Err(Error::InvalidInput("mode set must be nonempty".into()));
    }
    let mut sorted = modes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != modes.len() {
        return Err(Error::InvalidInput("mode set must not contain duplicates".into()));
    }
    check_no_resonance(&sorted)?;
    let k = sorted.len();
    let row_level = |li: usize| level.unwrap_or_else(|| w.coeff(li));
    let mut entries = DMatrix::<f64>::zeros(k, k);
    let denom_guard = |a: f64, idx: usize, i: usize, j: usize| -> Result<f64> {
        let d = a - w.coeff(idx);
        if d.abs() < DEGENERACY_TOL * a.abs() {
            Err(Error::DegenerateLevel { i, j, denominator: d })
        } else {
            Ok(d)
        }
    };
    for (r, &li) in sorted.iter().enumerate() {
        let a = row_level(li);
        if a <= 0.0 {
            return Err(Error::InvalidInput(format!("level at mode {li} must be positive")));
        }
        for (c, &lj) in sorted.iter().enumerate() {
            let value = if r == c {
                let d = denom_guard(a, 2 * li, li, li)?;
                (a - 2.0 * w.coeff(2 * li)) / d
            } else if li < lj {
                let dsum = denom_guard(a, li + lj, li, lj)?;
                let ddiff = denom_guard(a, lj - li, li, lj)?;
                2.0 / (li as f64)
                    * (((lj as f64) * a - ((li + lj) as f64) * w.coeff(li + lj)) / dsum
                        + (((lj - li) as f64) * w.coeff(lj - li) - (lj as f64) * a) / ddiff)
            } else {
                let dsum = denom_guard(a, li + lj, li, lj)?;
                let ddiff = denom_guard(a, li - lj, li, lj)?;
                2.0 / (li as f64)
                    * (((lj as f64) * a - ((li + lj) as f64) * w.coeff(li + lj)) / dsum
                        - (((li - lj) as f64) * w.coeff(li - lj) + (lj as f64) * a) / ddiff)
            };
            entries[(r, c)] = value;
        }
    }
    Ok(BMatrix { modes: sorted, level: level.unwrap_or_else(|| w.coeff(modes[0])), entries })
}

/// Large-beta leading-order prediction of the B-matrix entries for a pair of
/// clustered transformer modes: diagonals `-2 beta/(3 l^2)`, off-diagonals
/// `8 beta/(4 l_row^2 - l_col^2)` with the sign fixed by consistency with the
/// exact matrix and the rational weight constants.
pub fn b_matrix_large_beta_prediction(l1: usize, l2: usize, beta: f64) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(2, 2);
    m[(0, 0)] = -2.0 * beta / (3.0 * (l1 * l1) as f64);
    m[(1, 1)] = -2.0 * beta / (3.0 * (l2 * l2) as f64);
    m[(0, 1)] = 8.0 * beta / ((4 * l1 * l1) as f64 - (l2 * l2) as f64);
    m[(1, 0)] = 8.0 * beta / ((4 * l2 * l2) as f64 - (l1 * l1) as f64);
    m
}

/// Exact rational constants `k_1, k_2` of the large-beta modal-weight law
/// `x_i = k_i / beta + O(beta^{-2})`, evaluated in integer arithmetic.
///
/// `k_1 = (-12 l1^6 + 15 l1^4 l2^2 + 132 l1^2 l2^4) / (8 l1^4 + 254 l1^2 l2^2 + 8 l2^4)`
/// and `k_2` with the roles of `l1`, `l2` mirrored.
pub fn large_beta_weight_constants(l1: u32, l2: u32) -> ((i128, i128), (i128, i128)) {
    let (a, b) = (l1 as i128, l2 as i128);
    let (a2, b2) = (a * a, b * b);
    let den = 8 * a2 * a2 + 254 * a2 * b2 + 8 * b2 * b2;
    let num1 = -12 * a2 * a2 * a2 + 15 * a2 * a2 * b2 + 132 * a2 * b2 * b2;
    let num2 = 132 * a2 * a2 * b2 + 15 * a2 * b2 * b2 - 12 * b2 * b2 * b2;
    (reduce(num1, den), reduce(num2, den))
}

fn reduce(num: i128, den: i128) -> (i128, i128) {
    fn g(a: i128, b: i128) -> i128 {
        if b == 0 {
            a.abs()
        } else {
            g(b, a % b)
        }
    }
    let d = g(num, den).max(1);
    (num / d, den / d)
}

/// Outcome of the same-sign solvability test for a multi-mode pitchfork.
#[derive(Debug, Clone)]
pub enum WeightsOutcome {
    /// `p(s) = s sum b_r e_{l_r} + O(s^2)`, `kappa(s) = kappa*(1 + sigma s^2/2)`.
    Feasible(ModalWeights),
    /// Entries of `B^{-1} 1` are nonzero but of mixed sign: no same-signed
    /// multi-mode pitchfork exists for this subset. A documented outcome,
    /// not an error.
    Infeasible { solution: Vec<f64> },
}

/// Solves `B~ x = 1` on a subset of the B-matrix modes and converts a
/// same-signed solution into modal weights `b_r = sqrt(|x_r|)`.
pub fn multi_mode_weights(b: &BMatrix, subset: &[usize]) -> Result<WeightsOutcome> {
    if subset.is_empty() {
        return Err(Error::InvalidInput("subset must be nonempty".into()));
    }
    let idx: Vec<usize> = subset
        .iter()
        .map(|l| {
            b.modes
                .iter()
                .position(|m| m == l)
                .ok_or_else(|| Error::InvalidInput(format!("mode {l} not in the B-matrix")))
        })
        .collect::<Result<_>>()?;
    let m = idx.len();
    let mut sub = DMatrix::<f64>::zeros(m, m);
    for (r, &ir) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            sub[(r, c)] = b.entries[(ir, ic)];
        }
    }
    // condition-number guard via smallest/largest singular value
    let svd = sub.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(Error::SingularJacobian);
    }
    let x = sub
        .lu()
        .solve(&DVector::from_element(m, 1.0))
        .ok_or(Error::SingularJacobian)?;
    let solution: Vec<f64> = x.iter().cloned().collect();
    if solution.iter().any(|v| *v == 0.0) {
        return Ok(WeightsOutcome::Infeasible { solution });
    }
    let sigma = solution[0].signum();
    if solution.iter().any(|v| v.signum() != sigma) {
        return Ok(WeightsOutcome::Infeasible { solution });
    }
    let weights = solution.iter().map(|v| v.abs().sqrt()).collect();
    Ok(WeightsOutcome::Feasible(ModalWeights { weights, sigma }))
}

/// Classified multi-mode pitchfork report from a coincident set.
pub fn classify_multi_mode(
    w: &PotentialSpectrum,
    modes: &[usize],
    level: Option<f64>,
) -> Result<BifurcationReport> {
    let b = build_b_matrix(w, modes, level)?;
    let outcome = multi_mode_weights(&b, &b.modes)?;
    let a = b.level;
    match outcome {
        WeightsOutcome::Feasible(weights) => Ok(BifurcationReport {
            kappa_star: 2.0 / a,
            coincident_modes: b.modes.clone(),
            signature: 0.0,
            curvature: 2.0 / a * weights.sigma,
            kappa_slope: 0.0,
            kind: BifurcationKind::MultiModePitchfork,
            modal_weights: Some(weights),
            resonance_triple: None,
            resonance_signs: None,
            periodicity: gcd_set(&b.modes),
            ill_conditioned: false,
        }),
        WeightsOutcome::Infeasible { solution } => Err(Error::InvalidInput(format!(
            "no same-signed multi-mode pitchfork: B^-1 1 = {solution:?}"
        ))),
    }
}

/// One transcritical branch descriptor of the resonance case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceBranch {
    /// Signs `(sigma_1, sigma_2, sigma_3)` on `(e_l, e_m, e_{l+m})`.
    pub signs: [f64; 3],
    /// `kappa'(0) = -2/a`.
    pub kappa_slope: f64,
}

/// The four transcritical branches at a resonance triple `a_l = a_m = a_{l+m}`.
///
/// Requires `m < l`, `l != 2m`, the three coefficients coincident within
/// tolerance, and all other coefficients strictly below the common level.
pub fn resonance_branches(
    w: &PotentialSpectrum,
    l: usize,
    m: usize,
    coincidence_tol: f64,
) -> Result<Vec<ResonanceBranch>> {
    if m == 0 || l == 0 || m >= l {
        return Err(Error::NotResonant(format!("need 0 < m < l, got l={l}, m={m}")));
    }
    if l == 2 * m {
        return Err(Error::NotResonant(format!(
            "l = 2m ({l} = 2*{m}) is excluded: the quadratic interaction degenerates"
        )));
    }
    let triple = [l, m, l + m];
    let a = w.coeff(l);
    if a <= 0.0 {
        return Err(Error::NotResonant(format!("common level must be positive, got {a}")));
    }
    for &t in &triple {
        let at = w.coeff(t);
        if (at - a).abs() > coincidence_tol * a.abs().max(at.abs()) {
            return Err(Error::NotResonant(format!(
                "a_{t} = {at} differs from the common level {a}"
            )));
        }
    }
    for j in 1..=w.stored_len() {
        if !triple.contains(&j) && w.coeff(j) >= a * (1.0 - coincidence_tol) {
            return Err(Error::NotResonant(format!(
                "a_{j} = {} is not strictly below the level {a}",
                w.coeff(j)
            )));
        }
    }
    let patterns: [[f64; 3]; 4] =
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    Ok(patterns
        .iter()
        .map(|signs| ResonanceBranch { signs: *signs, kappa_slope: -2.0 / a })
        .collect())
}

/// Transcritical report for a validated resonance triple.
pub fn classify_resonance(
    w: &PotentialSpectrum,
    l: usize,
    m: usize,
    signs: [f64; 3],
    coincidence_tol: f64,
) -> Result<BifurcationReport> {
    let branches = resonance_branches(w, l, m, coincidence_tol)?;
    if !branches.iter().any(|b| b.signs == signs) {
        return Err(Error::NotResonant(format!(
            "sign pattern {signs:?} violates sigma_1 sigma_2 sigma_3 = 1"
        )));
    }
    let a = w.coeff(l);
    Ok(BifurcationReport {
        kappa_star: 2.0 / a,
        coincident_modes: vec![m, l, l + m],
        signature: 0.0,
        curvature: 0.0,
        kappa_slope: -2.0 / a,
        kind: BifurcationKind::Transcritical,
        modal_weights: None,
        resonance_triple: Some([l, m, l + m]),
        resonance_signs: Some(signs),
        periodicity: gcd_set(&[l, m]),
        ill_conditioned: false,
    })
}

/// Periodicity forced on every branch at a bifurcation report: the gcd `g` of
/// the coincident set, a mask of the modes forced to zero (`g` does not divide
/// them), and the decimated potential for branch lifting.
pub struct PeriodicityPrediction {
    pub g: usize,
    /// `forced_zero[l-1]` is true when mode `l` must vanish on the branch.
    pub forced_zero: Vec<bool>,
    pub decimated: PotentialSpectrum,
}

pub fn periodicity_prediction(
    w: &PotentialSpectrum,
    report: &BifurcationReport,
    n: usize,
) -> PeriodicityPrediction {
    let g = gcd_set(&report.coincident_modes).max(1);
    let forced_zero = (1..=n).map(|l| l % g != 0).collect();
    PeriodicityPrediction { g, forced_zero, decimated: w.decimate(g) }
}
