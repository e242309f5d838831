//! Interacting-particle simulation of the McKean-Vlasov dynamics:
//! `d theta_i = (kappa/N) sum_j W'(theta_i - theta_j) dt + sqrt(2) dB_i`.
//!
//! The drift is evaluated in `O(N * N_W)` through the per-mode sufficient
//! statistics `C_l = mean cos(l theta_j)`, `S_l = mean sin(l theta_j)`:
//! with `W' = -sum_l l a_l sin(l theta)`,
//! `drift_i = -kappa sum_l l a_l (sin(l theta_i) C_l - cos(l theta_i) S_l)`.
//!
//! Noise is counter-based (seed, step, particle), so trajectories are
//! bit-identical for a fixed seed regardless of how the update loop is split
//! across threads.

use crate::error::{Error, Result};
use crate::modes::ModeVector;
use crate::potential::PotentialSpectrum;
use rayon::prelude::*;
use std::f64::consts::TAU;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn uniform_01(seed: u64, counter: u64) -> f64 {
    let bits = splitmix64(seed ^ splitmix64(counter));
    // (0, 1]: never returns 0, safe under log
    ((bits >> 11) + 1) as f64 / (1u64 << 53) as f64
}

/// Standard Gaussian draw addressed by (seed, step, particle).
fn gaussian(seed: u64, step: u64, particle: u64) -> f64 {
    let base = step.wrapping_mul(0x2545F4914F6CDD1D).wrapping_add(particle << 1);
    let u1 = uniform_01(seed, base);
    let u2 = uniform_01(seed, base + 1);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// State of the N-particle system on the circle.
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub angles: Vec<f64>,
    pub time: f64,
    pub seed: u64,
    step_count: u64,
}

impl ParticleState {
    /// Uniformly distributed initial angles drawn from the counter stream.
    pub fn uniform(n: usize, seed: u64) -> Self {
        let angles = (0..n).map(|i| TAU * uniform_01(seed, u64::MAX - i as u64)).collect();
        Self { angles, time: 0.0, seed, step_count: 0 }
    }

    pub fn from_angles(angles: Vec<f64>, seed: u64) -> Self {
        let angles = angles.into_iter().map(|a| a.rem_euclid(TAU)).collect();
        Self { angles, time: 0.0, seed, step_count: 0 }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Per-mode sufficient statistics `(C_l, S_l)`, `l = 1..=n_modes`.
fn sufficient_stats(angles: &[f64], n_modes: usize) -> (Vec<f64>, Vec<f64>) {
    let mut c = vec![0.0; n_modes];
    let mut s = vec![0.0; n_modes];
    for &theta in angles {
        let (sin1, cos1) = theta.sin_cos();
        let (mut sl, mut cl) = (sin1, cos1);
        for l in 0..n_modes {
            c[l] += cl;
            s[l] += sl;
            // angle-addition recurrence for (l+1) theta
            let next_c = cl * cos1 - sl * sin1;
            let next_s = sl * cos1 + cl * sin1;
            cl = next_c;
            sl = next_s;
        }
    }
    let inv = 1.0 / angles.len() as f64;
    for l in 0..n_modes {
        c[l] *= inv;
        s[l] *= inv;
    }
    (c, s)
}

fn drift_at(theta: f64, kappa: f64, w: &PotentialSpectrum, c: &[f64], s: &[f64]) -> f64 {
    let (sin1, cos1) = theta.sin_cos();
    let (mut sl, mut cl) = (sin1, cos1);
    let mut acc = 0.0;
    for l in 0..c.len() {
        let coeff = (l as f64 + 1.0) * w.coeff(l + 1);
        if coeff != 0.0 {
            acc += coeff * (sl * c[l] - cl * s[l]);
        }
        let next_c = cl * cos1 - sl * sin1;
        let next_s = sl * cos1 + cl * sin1;
        cl = next_c;
        sl = next_s;
    }
    -kappa * acc
}

/// One Euler-Maruyama step. Particles update in parallel from frozen
/// sufficient statistics; results are identical to serial execution.
pub fn step(state: &mut ParticleState, dt: f64, kappa: f64, w: &PotentialSpectrum) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if state.angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("particle angles"));
    }
    let n_modes = w.stored_len();
    let (c, s) = sufficient_stats(&state.angles, n_modes);
    let noise_scale = (2.0 * dt).sqrt();
    let seed = state.seed;
    let step_idx = state.step_count;
    let update = |(i, theta): (usize, &mut f64)| {
        let drift = drift_at(*theta, kappa, w, &c, &s);
        let xi = gaussian(seed, step_idx, i as u64);
        *theta = (*theta + drift * dt + noise_scale * xi).rem_euclid(TAU);
    };
    if state.angles.len() >= 512 {
        state.angles.par_iter_mut().enumerate().for_each(update);
    } else {
        state.angles.iter_mut().enumerate().for_each(update);
    }
    state.time += dt;
    state.step_count += 1;
    Ok(())
}

/// Reference O(N^2) drift used to validate the sufficient-statistics path.
pub fn drift_naive(angles: &[f64], i: usize, kappa: f64, w: &PotentialSpectrum) -> f64 {
    let n = angles.len() as f64;
    let mut acc = 0.0;
    for &tj in angles {
        let d = angles[i] - tj;
        // W'(theta) = -sum_l l a_l sin(l theta)
        for l in 1..=w.stored_len() {
            acc -= (l as f64) * w.coeff(l) * ((l as f64) * d).sin();
        }
    }
    kappa * acc / n
}

/// Empirical cosine modes `(1/N) sum cos(l theta_i)` with the `1/sqrt(N)`
/// sampling-error scale attached.
pub fn empirical_modes(state: &ParticleState, n_modes: usize) -> (ModeVector, f64) {
    let (c, _) = sufficient_stats(&state.angles, n_modes);
    let se = 1.0 / (state.len() as f64).sqrt();
    (ModeVector::new(c).expect("finite statistics"), se)
}

/// Rotation-invariant order parameter `|p_1| = |mean exp(i theta)|`.
pub fn order_parameter(state: &ParticleState) -> f64 {
    let (c, s) = sufficient_stats(&state.angles, 1);
    (c[0] * c[0] + s[0] * s[0]).sqrt()
}

/// Controls for the stationary comparison run.
#[derive(Debug, Clone, Copy)]
pub struct SimControls {
    pub n_particles: usize,
    pub dt: f64,
    pub burn_in: f64,
    pub horizon: f64,
    /// Steps between recorded samples after burn-in.
    pub sample_every: usize,
    pub seed: u64,
}

impl Default for SimControls {
    fn default() -> Self {
        Self { n_particles: 4000, dt: 1e-3, burn_in: 50.0, horizon: 200.0, sample_every: 100, seed: 1 }
    }
}

/// Comparison of the simulated order parameter against a solver prediction.
#[derive(Debug, Clone)]
pub struct StationaryComparison {
    pub mean_order: f64,
    pub solver_order: f64,
    /// Batch-means standard error of the time average.
    pub standard_error: f64,
    pub z_score: f64,
    pub samples: usize,
    /// Time series of (time, |p1|, |p2|, interaction energy) summaries.
    pub trajectory: Vec<(f64, f64, f64, f64)>,
}

/// Simulates the particle system and compares the long-run mean `|p_1|`
/// against the solver value (rotation-invariant observable; the solver fixes
/// a phase, the simulation does not).
pub fn stationary_compare(
    kappa: f64,
    w: &PotentialSpectrum,
    solver_order: f64,
    controls: &SimControls,
) -> Result<StationaryComparison> {
    let mut state = ParticleState::uniform(controls.n_particles, controls.seed);
    let burn_steps = (controls.burn_in / controls.dt).round() as usize;
    let run_steps = ((controls.horizon - controls.burn_in) / controls.dt).round() as usize;
    if run_steps == 0 {
        return Err(Error::InvalidInput("horizon must exceed burn_in".into()));
    }
    for _ in 0..burn_steps {
        step(&mut state, controls.dt, kappa, w)?;
    }
    let mut samples = Vec::new();
    let mut trajectory = Vec::new();
    for k in 0..run_steps {
        step(&mut state, controls.dt, kappa, w)?;
        if k % controls.sample_every == 0 {
            let (c, s) = sufficient_stats(&state.angles, 2);
            let p1 = (c[0] * c[0] + s[0] * s[0]).sqrt();
            let p2 = (c[1] * c[1] + s[1] * s[1]).sqrt();
            let energy: f64 = (1..=2.min(w.stored_len()))
                .map(|l| {
                    let (cl, sl) = (c[l - 1], s[l - 1]);
                    w.coeff(l) * (cl * cl + sl * sl)
                })
                .sum();
            samples.push(p1);
            trajectory.push((state.time, p1, p2, energy));
        }
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    // batch means over 20 batches absorb the autocorrelation of the chain
    let batches = 20.min(samples.len());
    let per = samples.len() / batches;
    let mut batch_means = Vec::with_capacity(batches);
    for b in 0..batches {
        let chunk = &samples[b * per..(b + 1) * per];
        batch_means.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
    }
    let bm = batch_means.iter().sum::<f64>() / batches as f64;
    let var = batch_means.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>()
        / (batches as f64 - 1.0).max(1.0);
    let standard_error = (var / batches as f64).sqrt();
    let z_score = (mean - solver_order) / standard_error.max(1e-300);
    Ok(StationaryComparison {
        mean_order: mean,
        solver_order,
        standard_error,
        z_score,
        samples: samples.len(),
        trajectory,
    })
}

/// Exact sampler of the Poisson-kernel density `P_r(theta)` through the
/// Moebius map of the uniform distribution (test oracle).
pub fn poisson_kernel_sample(r: f64, seed: u64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let phi = TAU * uniform_01(seed, i as u64);
            // boundary angle of (e^{i phi} + r) / (1 + r e^{i phi})
            let (sin_p, cos_p) = phi.sin_cos();
            let num = (cos_p + r, sin_p);
            let den = (1.0 + r * cos_p, r * sin_p);
            let re = num.0 * den.0 + num.1 * den.1;
            let im = num.1 * den.0 - num.0 * den.1;
            im.atan2(re).rem_euclid(TAU)
        })
        .collect()
}
