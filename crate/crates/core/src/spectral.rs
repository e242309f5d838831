//! The Fourier form of the stationary equation.
//!
//! Stationary densities solve `F(p, kappa) = 0` where
//!
//! ```text
//! F_l = l(2 - kappa a_l) p_l - kappa sum_{j<l} j a_j p_j p_{l-j}
//!                             - kappa sum_{j>l} (j a_j - (j-l) a_{j-l}) p_j p_{j-l}
//! ```
//!
//! with every sum truncated at the stored truncation `N`. The residual is a
//! quadratic map, so all derivatives below are exact and cheap.

use crate::error::{ensure_finite, Error, Result};
use crate::modes::{DensityProfile, ModeVector};
use crate::potential::PotentialSpectrum;
use nalgebra::DMatrix;
use std::f64::consts::TAU;

/// Default quadrature grid for a given truncation.
pub fn default_grid(n: usize) -> usize {
    (4 * n).max(256)
}

fn check_inputs(p: &ModeVector, kappa: f64) -> Result<()> {
    ensure_finite(p.as_slice(), "mode vector")?;
    if !kappa.is_finite() {
        return Err(Error::NonFinite("kappa"));
    }
    Ok(())
}

/// Residual `F(p, kappa)` of the truncated quadratic system.
pub fn residual(p: &ModeVector, kappa: f64, w: &PotentialSpectrum) -> Result<Vec<f64>> {
    check_inputs(p, kappa)?;
    let n = p.truncation();
    let x = p.as_slice();
    let mut f = vec![0.0; n];
    for l in 1..=n {
        let mut acc = (l as f64) * (2.0 - kappa * w.coeff(l)) * x[l - 1];
        let mut quad = 0.0;
        for j in 1..l {
            quad += (j as f64) * w.coeff(j) * x[j - 1] * x[l - j - 1];
        }
        for j in (l + 1)..=n {
            let c = (j as f64) * w.coeff(j) - ((j - l) as f64) * w.coeff(j - l);
            quad += c * x[j - 1] * x[j - l - 1];
        }
        acc -= kappa * quad;
        f[l - 1] = acc;
    }
    Ok(f)
}

/// Jacobian matrix `dF_l/dp_r` of the truncated system.
///
/// At `p = 0` this is diagonal with entries `l(2 - kappa a_l)`.
pub fn jacobian(p: &ModeVector, kappa: f64, w: &PotentialSpectrum) -> Result<DMatrix<f64>> {
    check_inputs(p, kappa)?;
    let n = p.truncation();
    let x = p.as_slice();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for l in 1..=n {
        jac[(l - 1, l - 1)] += (l as f64) * (2.0 - kappa * w.coeff(l));
        // d/dp of -kappa * j a_j p_j p_{l-j} over j < l
        for j in 1..l {
            let c = kappa * (j as f64) * w.coeff(j);
            jac[(l - 1, j - 1)] -= c * x[l - j - 1];
            jac[(l - 1, l - j - 1)] -= c * x[j - 1];
        }
        // d/dp of -kappa * (j a_j - (j-l) a_{j-l}) p_j p_{j-l} over j > l
        for j in (l + 1)..=n {
            let c = kappa * ((j as f64) * w.coeff(j) - ((j - l) as f64) * w.coeff(j - l));
            jac[(l - 1, j - 1)] -= c * x[j - l - 1];
            jac[(l - 1, j - l - 1)] -= c * x[j - 1];
        }
    }
    Ok(jac)
}

/// Bilinear second derivative `D^2_pp F(p, kappa)[h, k]`; independent of `p`.
pub fn second_derivative(
    p: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    h: &ModeVector,
    k: &ModeVector,
) -> Result<Vec<f64>> {
    check_inputs(p, kappa)?;
    ensure_finite(h.as_slice(), "direction h")?;
    ensure_finite(k.as_slice(), "direction k")?;
    let n = p.truncation();
    let (hs, ks) = (h.as_slice(), k.as_slice());
    let mut out = vec![0.0; n];
    for l in 1..=n {
        let mut acc = 0.0;
        for j in 1..l {
            acc += (j as f64) * w.coeff(j) * (hs[j - 1] * ks[l - j - 1] + ks[j - 1] * hs[l - j - 1]);
        }
        for j in (l + 1)..=n {
            let c = (j as f64) * w.coeff(j) - ((j - l) as f64) * w.coeff(j - l);
            acc += c * (hs[j - 1] * ks[j - l - 1] + ks[j - 1] * hs[j - l - 1]);
        }
        out[l - 1] = -kappa * acc;
    }
    Ok(out)
}

/// Mixed derivative `D^2_{p kappa} F(p, kappa) h`.
///
/// At `p = 0` applied to `e_l` the only nonzero entry is `-l a_l` at position `l`.
pub fn mixed_derivative(
    p: &ModeVector,
    _kappa: f64,
    w: &PotentialSpectrum,
    h: &ModeVector,
) -> Result<Vec<f64>> {
    ensure_finite(p.as_slice(), "mode vector")?;
    ensure_finite(h.as_slice(), "direction h")?;
    let n = p.truncation();
    let (x, hs) = (p.as_slice(), h.as_slice());
    let mut out = vec![0.0; n];
    for l in 1..=n {
        let mut acc = -(l as f64) * w.coeff(l) * hs[l - 1];
        for j in 1..l {
            acc -= (j as f64) * w.coeff(j) * (x[j - 1] * hs[l - j - 1] + hs[j - 1] * x[l - j - 1]);
        }
        for j in (l + 1)..=n {
            let c = (j as f64) * w.coeff(j) - ((j - l) as f64) * w.coeff(j - l);
            acc -= c * (x[j - 1] * hs[j - l - 1] + hs[j - 1] * x[j - l - 1]);
        }
        out[l - 1] = acc;
    }
    Ok(out)
}

/// Synthesizes the density `1 + 2 sum p_l cos(l theta)` on a uniform grid.
///
/// The result may be negative for inputs that are not solutions; callers that
/// need positivity should go through [`fixed_point_map`].
pub fn synthesize_density(p: &ModeVector, grid_size: usize) -> Result<DensityProfile> {
    ensure_finite(p.as_slice(), "mode vector")?;
    let n = p.truncation();
    if grid_size < 4 * n {
        return Err(Error::Aliasing { grid: grid_size, truncation: n });
    }
    let values = (0..grid_size)
        .map(|j| {
            let theta = TAU * j as f64 / grid_size as f64;
            let mut v = 1.0;
            for l in 1..=n {
                v += 2.0 * p.get(l) * ((l as f64) * theta).cos();
            }
            v
        })
        .collect();
    Ok(DensityProfile::from_parts(values, TAU.ln()))
}

/// Projects a density profile back onto cosine modes by trapezoid quadrature,
/// `p_l = (1/2pi) int cos(l theta) d(theta) dtheta`.
///
/// Returns the modes together with the odd-component (sine) energy of the
/// profile; a large odd energy signals a symmetry violation and is reported
/// via `log::warn`.
pub fn analyze_density(d: &DensityProfile, n: usize) -> Result<ModeVector> {
    let m = d.grid_size();
    if m < 4 * n {
        return Err(Error::Aliasing { grid: m, truncation: n });
    }
    ensure_finite(d.values(), "density values")?;
    let odd = odd_energy(d, n);
    if odd > 1e-8 {
        log::warn!("density has odd-component energy {odd:.3e}; even-mode projection is lossy");
    }
    let mut modes = vec![0.0; n];
    for (l, slot) in modes.iter_mut().enumerate() {
        let l = l + 1;
        let mut acc = 0.0;
        for (j, v) in d.values().iter().enumerate() {
            acc += v * ((l as f64) * TAU * j as f64 / m as f64).cos();
        }
        *slot = acc / m as f64;
    }
    ModeVector::new(modes)
}

/// Energy in the sine components `1..=n` of a profile (diagnostic).
pub fn odd_energy(d: &DensityProfile, n: usize) -> f64 {
    let m = d.grid_size();
    (1..=n)
        .map(|l| {
            let s: f64 = d
                .values()
                .iter()
                .enumerate()
                .map(|(j, v)| v * ((l as f64) * TAU * j as f64 / m as f64).sin())
                .sum::<f64>()
                / m as f64;
            s * s
        })
        .sum::<f64>()
        .sqrt()
}

/// Gibbs fixed-point map: `p(theta) = exp(kappa sum p_l a_l cos(l theta)) / Z`.
///
/// The exponent is shifted by its maximum before exponentiation, so the map is
/// safe for strongly concentrated densities. For a converged solution,
/// `analyze_density(fixed_point_map(p)) == p` up to solver tolerance.
pub fn fixed_point_map(
    p: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    grid_size: usize,
) -> Result<DensityProfile> {
    check_inputs(p, kappa)?;
    let n = p.truncation();
    if grid_size < 4 * n {
        return Err(Error::Aliasing { grid: grid_size, truncation: n });
    }
    let exponent: Vec<f64> = (0..grid_size)
        .map(|j| {
            let theta = TAU * j as f64 / grid_size as f64;
            (1..=n).map(|l| kappa * p.get(l) * w.coeff(l) * ((l as f64) * theta).cos()).sum()
        })
        .collect();
    ensure_finite(&exponent, "Gibbs exponent")?;
    let shift = exponent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = exponent.iter().map(|e| (e - shift).exp()).collect();
    let mean = raw.iter().sum::<f64>() / grid_size as f64;
    let values = raw.iter().map(|r| r / mean).collect();
    // Z = int_0^{2pi} exp(exponent) = 2*pi * mean(exp) = 2*pi * mean * e^shift
    let log_z = TAU.ln() + mean.ln() + shift;
    Ok(DensityProfile::from_parts(values, log_z))
}

/// Self-consistency defect `||analyze(fixed_point_map(p)) - p||`; a solution
/// certificate that is zero exactly on stationary densities.
pub fn fixed_point_defect(
    p: &ModeVector,
    kappa: f64,
    w: &PotentialSpectrum,
    grid_size: usize,
) -> Result<f64> {
    let d = fixed_point_map(p, kappa, w, grid_size)?;
    let q = analyze_density(&d, p.truncation())?;
    let defect = q
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(defect)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(v: &[f64]) -> ModeVector {
        ModeVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn residual_at_zero_is_zero() {
        let w = PotentialSpectrum::finite(vec![1.0, 0.4, 0.1]).unwrap();
        for kappa in [0.5, 2.0, 7.3] {
            let f = residual(&ModeVector::zeros(8), kappa, &w).unwrap();
            assert!(f.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn residual_matches_worked_two_mode_example() {
        // N=2, a=(1,0.5), kappa=1, p=(0.1,0.2): F_1 = 0.1, F_2 = 0.59
        let w = PotentialSpectrum::finite(vec![1.0, 0.5]).unwrap();
        let f = residual(&mv(&[0.1, 0.2]), 1.0, &w).unwrap();
        assert!((f[0] - 0.1).abs() < 1e-15, "F_1 = {}", f[0]);
        assert!((f[1] - 0.59).abs() < 1e-15, "F_2 = {}", f[1]);
    }

    /// Independent brute-force oracle: assembles F_l from the same double-sum
    /// definition but written index-by-index without any loop fusion.
    fn residual_oracle(p: &ModeVector, kappa: f64, w: &PotentialSpectrum) -> Vec<f64> {
        let n = p.truncation();
        let mut f = vec![0.0; n];
        for l in 1..=n {
            let mut v = (l as f64) * (2.0 - kappa * w.coeff(l)) * p.get(l);
            for j in 1..=n {
                if j < l {
                    v -= kappa * (j as f64) * w.coeff(j) * p.get(j) * p.get(l - j);
                } else if j > l {
                    v -= kappa
                        * ((j as f64) * w.coeff(j) - ((j - l) as f64) * w.coeff(j - l))
                        * p.get(j)
                        * p.get(j - l);
                }
            }
            f[l - 1] = v;
        }
        f
    }

    #[test]
    fn residual_matches_brute_force_oracle_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..40 {
            let n = rng.gen_range(1..=12);
            let w = PotentialSpectrum::finite((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let p = mv(&(0..n).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<_>>());
            let kappa = rng.gen_range(0.1..5.0);
            let f = residual(&p, kappa, &w).unwrap();
            let g = residual_oracle(&p, kappa, &w);
            for (a, b) in f.iter().zip(&g) {
                // same truncation, same terms; only summation-order rounding differs
                let scale = a.abs().max(b.abs()).max(1.0);
                assert!((a - b).abs() <= 1e-14 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn poisson_geometric_family_is_residual_free() {
        // a_l = 1/l makes the second sum vanish identically, so the truncated
        // geometric family p_{k l*} = r^k is an exact zero of the truncated system.
        let n = 40;
        let w = PotentialSpectrum::log_sine(n);
        for (lstar, r) in [(1usize, 0.3), (2, -0.45), (1, 0.6)] {
            let mut p = ModeVector::zeros(n);
            for k in 1..=(n / lstar) {
                p.set(k * lstar, r_pow(r, k));
            }
            let f = residual(&p, 2.0 * lstar as f64, &w).unwrap();
            let max = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(max < 1e-13, "max residual {max:.3e} for lstar={lstar}, r={r}");
        }
    }

    fn r_pow(r: f64, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, _| acc * r)
    }

    #[test]
    fn jacobian_diagonal_at_origin() {
        let w = PotentialSpectrum::finite(vec![1.0, 0.4, 0.1]).unwrap();
        let j = jacobian(&ModeVector::zeros(3), 2.0, &w).unwrap();
        let expect = [0.0, 2.0 * (2.0 - 0.8), 3.0 * (2.0 - 0.2)];
        for (i, e) in expect.iter().enumerate() {
            assert!((j[(i, i)] - e).abs() < 1e-14);
            for k in 0..3 {
                if k != i {
                    assert_eq!(j[(i, k)], 0.0);
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_central_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = 8;
            let w = PotentialSpectrum::finite((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let p = mv(&(0..n).map(|_| rng.gen_range(-0.4..0.4)).collect::<Vec<_>>());
            let kappa = rng.gen_range(0.5..4.0);
            let jac = jacobian(&p, kappa, &w).unwrap();
            let h = 1e-6;
            for r in 1..=n {
                let mut pp = p.clone();
                pp.set(r, p.get(r) + h);
                let mut pm = p.clone();
                pm.set(r, p.get(r) - h);
                let fp = residual(&pp, kappa, &w).unwrap();
                let fm = residual(&pm, kappa, &w).unwrap();
                for l in 1..=n {
                    let fd = (fp[l - 1] - fm[l - 1]) / (2.0 * h);
                    let exact = jac[(l - 1, r - 1)];
                    let scale = exact.abs().max(1.0);
                    assert!(
                        (fd - exact).abs() / scale < 1e-6,
                        "J[{l},{r}] fd={fd} exact={exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn second_derivative_is_symmetric_bilinear() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 10;
        let w = PotentialSpectrum::finite((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let p = mv(&(0..n).map(|_| rng.gen_range(-0.3..0.3)).collect::<Vec<_>>());
        let h = mv(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let k = mv(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let hk = second_derivative(&p, 1.7, &w, &h, &k).unwrap();
        let kh = second_derivative(&p, 1.7, &w, &k, &h).unwrap();
        assert_eq!(hk, kh);
    }

    #[test]
    fn mixed_derivative_at_origin_is_minus_l_al() {
        let w = PotentialSpectrum::finite(vec![1.0, 0.4, 0.1, 0.05]).unwrap();
        let n = 4;
        for l in 1..=n {
            let out =
                mixed_derivative(&ModeVector::zeros(n), 2.0, &w, &ModeVector::unit(n, l, 1.0))
                    .unwrap();
            for (i, v) in out.iter().enumerate() {
                let expect = if i + 1 == l { -(l as f64) * w.coeff(l) } else { 0.0 };
                assert!((v - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mixed_derivative_matches_kappa_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let w = PotentialSpectrum::finite((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let p = mv(&(0..n).map(|_| rng.gen_range(-0.4..0.4)).collect::<Vec<_>>());
        let h = mv(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let kappa = 1.3;
        let dk = 1e-6;
        let exact = mixed_derivative(&p, kappa, &w, &h).unwrap();
        // directional derivative of D_p F h in kappa
        let apply = |kap: f64| -> Vec<f64> {
            let j = jacobian(&p, kap, &w).unwrap();
            let hv = nalgebra::DVector::from_column_slice(h.as_slice());
            (j * hv).iter().cloned().collect()
        };
        let fp = apply(kappa + dk);
        let fm = apply(kappa - dk);
        for i in 0..n {
            let fd = (fp[i] - fm[i]) / (2.0 * dk);
            let scale = exact[i].abs().max(1.0);
            assert!((fd - exact[i]).abs() / scale < 1e-6);
        }
        // linearity: h = 0 maps to 0
        let zero = mixed_derivative(&p, kappa, &w, &ModeVector::zeros(n)).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn synthesis_of_zero_modes_is_uniform() {
        let d = synthesize_density(&ModeVector::zeros(4), 64).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!((d.mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn synthesis_matches_poisson_closed_form() {
        let n = 64;
        let r = 0.3;
        let mut modes = vec![0.0; n];
        let mut rk = 1.0;
        for m in modes.iter_mut() {
            rk *= r;
            *m = rk;
        }
        let p = mv(&modes);
        let d = synthesize_density(&p, 4 * n).unwrap();
        for j in 0..d.grid_size() {
            let theta = d.angle(j);
            let closed = (1.0 - r * r) / (1.0 - 2.0 * r * theta.cos() + r * r);
            assert!((d.values()[j] - closed).abs() < 1e-10);
        }
    }

    #[test]
    fn analysis_synthesis_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 24;
        let p = mv(&(0..n).map(|_| rng.gen_range(-0.2..0.2)).collect::<Vec<_>>());
        let d = synthesize_density(&p, default_grid(n)).unwrap();
        let q = analyze_density(&d, n).unwrap();
        for l in 1..=n {
            assert!((p.get(l) - q.get(l)).abs() < 1e-12);
        }
        // uniform density has zero modes
        let u = synthesize_density(&ModeVector::zeros(n), default_grid(n)).unwrap();
        let qu = analyze_density(&u, n).unwrap();
        assert!(qu.max_abs() < 1e-15);
    }

    #[test]
    fn aliasing_guard_triggers() {
        let p = ModeVector::zeros(16);
        assert!(matches!(
            synthesize_density(&p, 32),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn fixed_point_map_of_zero_is_uniform_with_z_2pi() {
        let w = PotentialSpectrum::kuramoto();
        let d = fixed_point_map(&ModeVector::zeros(4), 2.0, &w, 256).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!((d.z() - TAU).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_map_survives_huge_exponents() {
        // kappa * a_1 * p_1 = 400: raw exp would overflow without the shift
        let w = PotentialSpectrum::kuramoto();
        let p = mv(&[1.0]);
        let d = fixed_point_map(&p, 400.0, &w, 256).unwrap();
        assert!(d.values().iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((d.mean() - 1.0).abs() < 1e-12);
        assert!(d.log_z().is_finite());
    }

    #[test]
    fn fixed_point_defect_positive_off_solution() {
        let w = PotentialSpectrum::kuramoto();
        let defect = fixed_point_defect(&mv(&[0.2, 0.0, 0.0]), 1.0, &w, 256).unwrap();
        assert!(defect > 1e-3, "non-solution must have positive defect, got {defect}");
    }
}
