//! Modified Bessel functions of the first kind and the Noisy-Transformer
//! spectral quantities built from them.
//!
//! The exponentially scaled value `e^{-x} I_l(x)` is the internal workhorse:
//! every ratio-type quantity (`kappa*_l`, the l-signature `R_l`, coefficient
//! gaps) is formed from scaled values so that inverse temperatures up to at
//! least `beta = 700` never overflow.

use crate::error::{Error, Result};
use crate::potential::PotentialSpectrum;

/// Largest order accepted by the point evaluators.
pub const MAX_ORDER: usize = 256;
/// Largest argument accepted by the unscaled evaluator (`e^x` must be finite).
pub const MAX_UNSCALED_ARG: f64 = 700.0;

/// Power series `e^{-x} sum_k (x/2)^{l+2k} / (k! (l+k)!)`.
///
/// All terms are positive, so there is no cancellation; used below the
/// series/recurrence switch and as an independent oracle in tests.
fn scaled_series(l: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    // ln t0 = l ln(x/2) - ln(l!) - x, accumulated with compensated summation
    let mut ln_fact = 0.0;
    let mut comp = 0.0;
    for i in 1..=l {
        let term = (i as f64).ln();
        let y = term - comp;
        let t = ln_fact + y;
        comp = (t - ln_fact) - y;
        ln_fact = t;
    }
    let ln_t0 = (l as f64) * (x / 2.0).ln() - ln_fact - x;
    let ratio_base = x * x / 4.0;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = 1.0;
    let lf = l as f64;
    loop {
        term *= ratio_base / (k * (lf + k));
        sum += term;
        if term < sum * 1e-18 || k > 60_000.0 {
            break;
        }
        k += 1.0;
    }
    ln_t0.exp() * sum
}

/// Scaled values `e^{-x} I_l(x)` for `l = 0..=l_max` by backward (Miller)
/// recurrence normalized with `I_0 + 2 sum_k I_k = e^x`.
pub fn bessel_i_scaled_family(l_max: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidInput(format!("argument must be finite and >= 0, got {x}")));
    }
    if x == 0.0 {
        let mut out = vec![0.0; l_max + 1];
        out[0] = 1.0;
        return Ok(out);
    }
    let m0 = (l_max as f64).max(x).ceil() as usize;
    let mut start = m0 + 2 * (m0 as f64).sqrt().ceil() as usize + 32;
    let mut prev: Option<Vec<f64>> = None;
    for _ in 0..6 {
        let fam = miller_pass(l_max, x, start);
        if let Some(p) = &prev {
            let close = fam
                .iter()
                .zip(p)
                .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1e-280));
            if close {
                return Ok(fam);
            }
        }
        prev = Some(fam);
        start += 24;
    }
    Ok(prev.unwrap())
}

fn miller_pass(l_max: usize, x: f64, start: usize) -> Vec<f64> {
    let mut high = 0.0_f64; // stands for I_{k+1}
    let mut mid = 1e-280_f64; // stands for I_k
    let mut norm = 0.0_f64;
    let mut out = vec![0.0; l_max + 1];
    let mut k = start;
    loop {
        let low = high + (2.0 * k as f64 / x) * mid; // I_{k-1}
        if k - 1 <= l_max {
            out[k - 1] = low;
        }
        norm += 2.0 * mid;
        high = mid;
        mid = low;
        if !mid.is_finite() || mid > 1e250 {
            let scale = 1e-250;
            high *= scale;
            mid *= scale;
            norm *= scale;
            for v in out.iter_mut() {
                *v *= scale;
            }
        }
        k -= 1;
        if k == 0 {
            break;
        }
    }
    norm += mid; // adds I_0 (mid now holds I_0 after the last step)
    out[0] = mid;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Exponentially scaled `e^{-x} I_l(x)`.
pub fn bessel_i_scaled(l: usize, x: f64) -> Result<f64> {
    if l > MAX_ORDER {
        return Err(Error::InvalidInput(format!("order {l} exceeds {MAX_ORDER}")));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidInput(format!("argument must be finite and >= 0, got {x}")));
    }
    let x_switch = 30.0_f64.max(2.0 * l as f64);
    if x <= x_switch {
        Ok(scaled_series(l, x))
    } else {
        Ok(bessel_i_scaled_family(l, x)?[l])
    }
}

/// Modified Bessel function of the first kind `I_l(x)`.
pub fn bessel_i(l: usize, x: f64) -> Result<f64> {
    if x > MAX_UNSCALED_ARG {
        return Err(Error::InvalidInput(format!(
            "argument {x} exceeds {MAX_UNSCALED_ARG}; use the scaled variant"
        )));
    }
    Ok(bessel_i_scaled(l, x)? * x.exp())
}

/// The Noisy mean-field Transformer potential `W_beta` with coefficients
/// `a_l(beta) = 2 I_l(beta) / beta`.
#[derive(Debug, Clone)]
pub struct TransformerSpectrum {
    beta: f64,
    spectrum: PotentialSpectrum,
}

impl TransformerSpectrum {
    pub fn new(beta: f64, n_w: usize) -> Result<Self> {
        Ok(Self { beta, spectrum: transformer_spectrum(beta, n_w)? })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn spectrum(&self) -> &PotentialSpectrum {
        &self.spectrum
    }

    pub fn into_spectrum(self) -> PotentialSpectrum {
        self.spectrum
    }
}

/// Builds the transformer spectrum `a_l(beta) = 2 I_l(beta)/beta`, `l <= n_w`.
///
/// The tail bound scans `l |a_l|` past the truncation until the decay regime
/// `l > beta` is reached, so it is valid even when `n_w < beta`.
pub fn transformer_spectrum(beta: f64, n_w: usize) -> Result<PotentialSpectrum> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidInput(format!("beta must be positive and finite, got {beta}")));
    }
    if n_w == 0 {
        return Err(Error::InvalidInput("n_w must be >= 1".into()));
    }
    let cap = (n_w + 1).max(beta.ceil() as usize + 50);
    let fam = bessel_i_scaled_family(cap, beta)?;
    let unscale = beta.exp();
    if !unscale.is_finite() {
        return Err(Error::InvalidInput(format!(
            "beta {beta} too large for unscaled coefficients; reduce beta"
        )));
    }
    let coefficients: Vec<f64> = (1..=n_w).map(|l| 2.0 * fam[l] * unscale / beta).collect();
    let tail = ((n_w + 1)..=cap)
        .map(|l| (l as f64) * 2.0 * fam[l] * unscale / beta)
        .fold(0.0_f64, f64::max);
    PotentialSpectrum::new(coefficients, tail * 1.01)
}

/// Bifurcation point of the transformer model at mode `l`:
/// `kappa*_l(beta) = beta / I_l(beta)` (computed from scaled values).
pub fn kappa_star(beta: f64, l: usize) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if l == 0 {
        return Err(Error::InvalidInput("mode must be >= 1".into()));
    }
    let fam = bessel_i_scaled_family(l, beta)?;
    Ok(beta * (-beta).exp() / fam[l])
}

/// l-signature of the transformer potential:
/// `R_l(beta) = (I_l - 2 I_{2l}) / (I_l - I_{2l})`.
pub fn signature_ratio_transformer(beta: f64, l: usize) -> Result<f64> {
    if !(beta > 0.0) || l == 0 {
        return Err(Error::InvalidInput("need beta > 0 and l >= 1".into()));
    }
    let fam = bessel_i_scaled_family(2 * l, beta)?;
    let (il, i2l) = (fam[l], fam[2 * l]);
    Ok((il - 2.0 * i2l) / (il - i2l))
}

/// Solves `I_2(beta)/I_1(beta) = target` for `beta` by bisection.
///
/// The ratio is strictly increasing from 0 towards 1, so bisection on the
/// bracket `[1e-8, 1e4]` is unconditionally robust for attainable targets.
pub fn solve_beta_threshold(target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!("target must lie in (0,1), got {target}")));
    }
    let ratio = |beta: f64| -> Result<f64> {
        let fam = bessel_i_scaled_family(2, beta)?;
        Ok(fam[2] / fam[1])
    };
    let (mut lo, mut hi) = (1e-8, 1e4);
    let (flo, fhi) = (ratio(lo)? - target, ratio(hi)? - target);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::NoRoot);
    }
    while hi - lo > 1e-10 * hi.max(1.0) {
        let midpoint = 0.5 * (lo + hi);
        if ratio(midpoint)? - target <= 0.0 {
            lo = midpoint;
        } else {
            hi = midpoint;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One entry of the clustering diagnostic for a pair of modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterGap {
    pub l1: usize,
    pub l2: usize,
    /// Exact relative gap `(a_{l1} - a_{l2}) / a_{l1}`.
    pub exact: f64,
    /// Large-beta prediction `(l2^2 - l1^2) / (2 beta)`.
    pub predicted: f64,
}

/// Relative coefficient gaps for all pairs `l1 < l2 <= l_cap` together with
/// the large-beta clustering prediction.
pub fn clustering_diagnostic(beta: f64, l_cap: usize) -> Result<Vec<ClusterGap>> {
    if !(beta > 0.0) || l_cap < 2 {
        return Err(Error::InvalidInput("need beta > 0 and L >= 2".into()));
    }
    let fam = bessel_i_scaled_family(l_cap, beta)?;
    let mut out = Vec::new();
    for l1 in 1..=l_cap {
        for l2 in l1..=l_cap {
            let exact = (fam[l1] - fam[l2]) / fam[l1];
            let predicted = ((l2 * l2 - l1 * l1) as f64) / (2.0 * beta);
            out.push(ClusterGap { l1, l2, exact, predicted });
        }
    }
    Ok(out)
}

/// Leading coefficient of the Laplace expansion:
/// `I_l(beta) * sqrt(2 pi beta) * e^{-beta} = 1 - (4 l^2 - 1)/(8 beta) + O(beta^-2)`.
pub fn large_beta_leading(l: usize, beta: f64) -> f64 {
    1.0 - ((4 * l * l) as f64 - 1.0) / (8.0 * beta)
}
