//! End-to-end acceptance suite. Each test exercises one acceptance criterion
//! at its stated tolerance and prints a PASS line; the harness reports FAIL
//! through the usual panic path.

use mvcircle::bessel::{
    bessel_i, kappa_star, signature_ratio_transformer, solve_beta_threshold, transformer_spectrum,
};
use mvcircle::bifurcation::{
    b_matrix_large_beta_prediction, build_b_matrix, classify_resonance, classify_single_mode,
    find_bifurcation_points, large_beta_weight_constants, multi_mode_weights, resonance_branches,
    BifurcationKind, WeightsOutcome, COINCIDENCE_TOL,
};
use mvcircle::continuation::{
    branch_curvature_fit, continue_branch, fit_bifurcation_curvature, newton_solve,
    newton_solve_pinned, switch_branch, trace_amplitude_branch, BranchPoint, ContinuationControls,
    NewtonControls, Provenance,
};
use mvcircle::energy::{
    classify_transition, interaction_energy, interaction_energy_quadrature, minimize_energy,
    scan_m, subcritical_energy_certificate, EnergyControls, TransitionKind,
};
use mvcircle::particle::{stationary_compare, SimControls};
use mvcircle::spectral::{jacobian, residual};
use mvcircle::{ModeVector, PotentialSpectrum};

/// Independent Kuramoto oracle: `a` solves `a = I_1(kappa a)/I_0(kappa a)` by
/// bisection; the branch modes are `chi_l = I_l(kappa a)/I_0(kappa a)`.
fn kuramoto_closed_form(kappa: f64, n: usize) -> ModeVector {
    let g = |a: f64| a - bessel_i(1, kappa * a).unwrap() / bessel_i(0, kappa * a).unwrap();
    let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
    assert!(g(lo) < 0.0 && g(hi) > 0.0, "bracket failure");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let i0 = bessel_i(0, kappa * a).unwrap();
    let mut p = ModeVector::zeros(n);
    for l in 1..=n {
        p.set(l, bessel_i(l, kappa * a).unwrap() / i0);
    }
    p
}

#[test]
fn acceptance_01_kuramoto_closed_form_branch() {
    let start = std::time::Instant::now();
    let w = PotentialSpectrum::kuramoto();
    let n = 64;
    // solver path: detect, classify, switch, continue, refine
    let reports = find_bifurcation_points(&w, 3.5, COINCIDENCE_TOL).unwrap();
    let report = classify_single_mode(&w, reports[0].coincident_modes[0], COINCIDENCE_TOL).unwrap();
    assert_eq!(report.kind, BifurcationKind::SupercriticalPitchfork);
    let newton = NewtonControls::default();
    let seed = switch_branch(&report, 0.02, 0.5, n, &w, &newton).unwrap();
    let v = ModeVector::unit(n, 1, 1.0);
    let controls = ContinuationControls {
        kappa_max: 3.05,
        max_points: 900,
        ..ContinuationControls::default()
    };
    let branch = continue_branch(&seed, (&v, 0.0), &w, &controls, Provenance::Pitchfork(1)).unwrap();
    for kappa in [2.1, 2.5, 3.0] {
        let near = branch.nearest_by_kappa(kappa).unwrap();
        let solved = newton_solve(&near.p, kappa, &w, &newton).unwrap();
        let oracle = kuramoto_closed_form(kappa, n);
        let mut err = 0.0_f64;
        for l in 1..=n {
            err = err.max((solved.p.get(l) - oracle.get(l)).abs());
        }
        assert!(err < 1e-6, "kappa = {kappa}: max-abs error {err:.3e} vs closed form");
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 5.0, "runtime {dt:?} exceeds 5 s");
    println!("ACCEPTANCE 1 (Kuramoto closed-form branch): PASS in {dt:?}");
}

#[test]
fn acceptance_02_poisson_kernel_family() {
    let start = std::time::Instant::now();
    let n = 96;
    let w = PotentialSpectrum::log_sine(n);
    let newton = NewtonControls::default();
    for lstar in [1usize, 2, 3] {
        let kappa = 2.0 * lstar as f64;
        for r in [0.3, -0.3, 0.6, -0.6] {
            let mut family = ModeVector::zeros(n);
            let mut rk = 1.0;
            for k in 1..=(n / lstar) {
                rk *= r;
                family.set(k * lstar, rk);
            }
            let f = residual(&family, kappa, &w).unwrap();
            let max = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(max <= 1e-8, "l*={lstar}, r={r}: residual {max:.3e}");
            // pinned Newton from a perturbed seed returns to the family
            let mut seed = family.clone();
            for l in 1..=n {
                if l != lstar {
                    seed.set(l, seed.get(l) + 0.005 * (((l * 2654435761) % 17) as f64 - 8.0) / 8.0);
                }
            }
            let pt = newton_solve_pinned(&seed, kappa, &w, lstar, &newton).unwrap();
            let mut gap = 0.0_f64;
            for l in 1..=n {
                gap = gap.max((pt.p.get(l) - family.get(l)).abs());
            }
            assert!(gap < 1e-8, "l*={lstar}, r={r}: pinned Newton gap {gap:.3e}");
        }
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 5.0, "runtime {dt:?} exceeds 5 s");
    println!("ACCEPTANCE 2 (Poisson kernel family): PASS in {dt:?}");
}

#[test]
fn acceptance_03_curvature_formula() {
    let start = std::time::Instant::now();
    let newton = NewtonControls::default();
    // (i) Kuramoto: kappa''(0) = 2
    let w = PotentialSpectrum::kuramoto();
    let report = classify_single_mode(&w, 1, COINCIDENCE_TOL).unwrap();
    let fit = fit_bifurcation_curvature(&report, 48, &w, 0.12, 12, &newton).unwrap();
    assert!(
        (fit.curvature - 2.0).abs() / 2.0 < 0.05,
        "Kuramoto curvature {} vs 2",
        fit.curvature
    );
    // (ii) transformer beta = 0.5, l* = 1: kappa'' = kappa*_1 R_1
    let beta = 0.5;
    let wt = transformer_spectrum(beta, 64).unwrap();
    let target = kappa_star(beta, 1).unwrap() * signature_ratio_transformer(beta, 1).unwrap();
    let report = classify_single_mode(&wt, 1, COINCIDENCE_TOL).unwrap();
    assert!((report.curvature - target).abs() / target.abs() < 1e-9);
    let fit = fit_bifurcation_curvature(&report, 48, &wt, 0.12, 12, &newton).unwrap();
    assert!(
        (fit.curvature - target).abs() / target.abs() < 0.05,
        "transformer curvature {} vs {target}",
        fit.curvature
    );
    // (iii) two-coefficient potential in the discontinuity window a_1/2 < a_2 < a_1
    let wd = PotentialSpectrum::finite(vec![1.0, 0.75]).unwrap();
    let report = classify_single_mode(&wd, 1, COINCIDENCE_TOL).unwrap();
    assert_eq!(report.kind, BifurcationKind::SubcriticalPitchfork);
    let fit = fit_bifurcation_curvature(&report, 48, &wd, 0.10, 12, &newton).unwrap();
    assert!(
        (fit.curvature - (-4.0)).abs() / 4.0 < 0.05,
        "subcritical curvature {} vs -4",
        fit.curvature
    );
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "runtime {dt:?} exceeds 30 s");
    println!("ACCEPTANCE 3 (curvature formula): PASS in {dt:?}");
}

#[test]
fn acceptance_04_transformer_thresholds() {
    let start = std::time::Instant::now();
    let beta_half = solve_beta_threshold(0.5).unwrap();
    assert!((beta_half - 2.447).abs() <= 0.001, "beta threshold {beta_half}");
    let ks_small = kappa_star(1e-5, 1).unwrap();
    assert!((ks_small - 2.0).abs() < 1e-4, "kappa*_1(1e-5) = {ks_small}");
    let beta = 50.0;
    let ks = kappa_star(beta, 1).unwrap();
    let asym = (2.0 * std::f64::consts::PI).sqrt() * beta.powf(1.5) * (-beta).exp();
    assert!((ks / asym - 1.0).abs() < 0.03, "kappa*_1(50)/asym = {}", ks / asym);
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "runtime {dt:?} exceeds 1 s");
    println!("ACCEPTANCE 4 (transformer thresholds): PASS in {dt:?}");
}

#[test]
fn acceptance_05_discontinuous_transition() {
    let start = std::time::Instant::now();
    let n = 48;
    let energy_controls = EnergyControls::default();
    let continuation = ContinuationControls { max_points: 800, ..ContinuationControls::default() };

    // beta = 4: discontinuous, kappa_c strictly below kappa*_1
    let beta = 4.0;
    let w = transformer_spectrum(beta, n).unwrap();
    let ks1 = kappa_star(beta, 1).unwrap();
    let (kappa_c, kind) =
        classify_transition(&w, n, ks1 * 1.2, &energy_controls, &continuation).unwrap();
    assert_eq!(kind, TransitionKind::Discontinuous, "beta=4 should be discontinuous");
    assert!(kappa_c < ks1 - 1e-4, "kappa_c {kappa_c} not strictly below {ks1}");
    assert!(kappa_c > 0.94 * ks1, "kappa_c {kappa_c} implausibly far below {ks1}");

    // negative energy certificate along the subcritical branch
    let report = classify_single_mode(&w, 1, COINCIDENCE_TOL).unwrap();
    assert_eq!(report.kind, BifurcationKind::SubcriticalPitchfork);
    let seed = switch_branch(&report, 0.02, 0.5, n, &w, &energy_controls.newton).unwrap();
    let v = ModeVector::unit(n, 1, 1.0);
    let ctl = ContinuationControls {
        kappa_min: 0.0,
        kappa_max: ks1 * 1.05,
        max_points: 900,
        step_max: 0.02,
        ..ContinuationControls::default()
    };
    let branch = continue_branch(&seed, (&v, 0.0), &w, &ctl, Provenance::Pitchfork(1)).unwrap();
    let cert = subcritical_energy_certificate(&branch, ks1, &w, 512).unwrap();
    assert!(cert.direct < 0.0, "certificate direct {}", cert.direct);
    assert!(cert.integrated < 0.0, "certificate integrated {}", cert.integrated);
    assert!(
        (cert.direct - cert.integrated).abs() < 1e-4,
        "certificate routes disagree: {} vs {}",
        cert.direct,
        cert.integrated
    );

    // scan: kink at kappa_c with two coexisting minimizers of different E
    let scan = scan_m(
        &w,
        n,
        0.37,
        0.42,
        0.002,
        &energy_controls,
        &continuation,
    )
    .unwrap();
    assert!(!scan.kinks.is_empty(), "no kink detected in the beta=4 scan");
    let kink = scan.kinks[0];
    assert!(
        (scan.kappas[kink] - kappa_c).abs() <= 0.004,
        "kink at {} but kappa_c = {kappa_c}",
        scan.kappas[kink]
    );
    let e_below = scan.interaction[kink - 1];
    let e_above = scan.interaction[kink + 1];
    assert!(
        (e_above - e_below).abs() > energy_controls.jump_tol,
        "coexisting minimizers do not differ in interaction energy: {e_below} vs {e_above}"
    );
    // discrete concavity across the kink
    for i in 1..scan.kappas.len() - 1 {
        let d2 = scan.m_values[i + 1] - 2.0 * scan.m_values[i] + scan.m_values[i - 1];
        assert!(d2 < 1e-8, "m not concave at {}", scan.kappas[i]);
    }

    // beta = 0.5: continuous at kappa*_1 within 1e-4
    let beta = 0.5;
    let w = transformer_spectrum(beta, n).unwrap();
    let ks = kappa_star(beta, 1).unwrap();
    let (kappa_c, kind) =
        classify_transition(&w, n, ks * 1.2, &energy_controls, &continuation).unwrap();
    assert_eq!(kind, TransitionKind::Continuous, "beta=0.5 should be continuous");
    assert!((kappa_c - ks).abs() < 1e-4, "kappa_c {kappa_c} vs kappa* {ks}");

    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 300.0, "runtime {dt:?} exceeds 5 min");
    println!("ACCEPTANCE 5 (discontinuous transition): PASS in {dt:?}");
}

/// Criterion 6 as literally specified: the potential a_1 = a_2 = a_3 = 1.
///
/// The four sigma-pattern seeds do converge onto transcritical branches, but
/// this triple is the excluded `l = 2m` resonance (the only decomposition of
/// {1,2,3} as {m, l, l+m} has l = 2m), where the reduced quadratic system has
/// extra terms and the branch weights are provably NOT (1,1,1); the measured
/// per-mode slope therefore cannot equal -2/a. The slope assertion is kept at
/// the stated 5% tolerance; see the companion test for the theorem-valid
/// triple {1,3,4}, which passes the same check.
#[test]
fn acceptance_06_transcritical_resonance_literal() {
    let start = std::time::Instant::now();
    let n = 32;
    let w = PotentialSpectrum::finite(vec![1.0, 1.0, 1.0]).unwrap();
    let a = 1.0;
    let kappa_star = 2.0 / a;
    let newton = NewtonControls::default();
    // the operation itself rejects the l = 2m triple, as specified
    assert!(resonance_branches(&w, 2, 1, COINCIDENCE_TOL).is_err());

    let patterns: [[f64; 3]; 4] =
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    let eps = 0.02;
    let kappa_seed = kappa_star * (1.0 - eps);
    let mut slopes = Vec::new();
    for signs in patterns {
        let mut seed = ModeVector::zeros(n);
        for (mode, s) in (1..=3).zip(signs) {
            seed.set(mode, s * eps);
        }
        let pt = newton_solve(&seed, kappa_seed, &w, &newton).unwrap();
        assert!(pt.p.norm() > 0.3 * eps, "seed {signs:?} collapsed to the trivial solution");
        for (mode, s) in (1..=3).zip(signs) {
            assert!(
                pt.p.get(mode) * s > 0.0,
                "sign pattern {signs:?} not preserved at mode {mode}"
            );
        }
        assert!(pt.kappa < kappa_star, "transcritical seed must sit below kappa*");
        // fit kappa'(0) along this branch through the bifurcation point
        let mut direction = ModeVector::zeros(n);
        for (mode, s) in (1..=3).zip(signs) {
            direction.set(mode, s);
        }
        let seed_pt = BranchPoint {
            p: ModeVector::zeros(n),
            kappa: kappa_star,
            arclength: 0.0,
            residual_norm: 0.0,
            stability: None,
        };
        let up = trace_amplitude_branch(
            &direction,
            0.0,
            0.06,
            10,
            &seed_pt,
            &w,
            &newton,
            Provenance::Transcritical([2, 1, 3]),
        )
        .unwrap();
        let down = trace_amplitude_branch(
            &direction,
            0.0,
            -0.06,
            10,
            &seed_pt,
            &w,
            &newton,
            Provenance::Transcritical([2, 1, 3]),
        )
        .unwrap();
        let mut merged = up;
        merged.points.extend(down.points.into_iter().skip(1));
        let fit = branch_curvature_fit(&merged, &direction, 0.061).unwrap();
        slopes.push(fit.slope);
    }
    println!(
        "ACCEPTANCE 6 (literal {{1,2,3}}): four transcritical seeds converged; fitted slopes {slopes:?} vs target {}",
        -kappa_star
    );
    for slope in &slopes {
        assert!(
            (slope + kappa_star).abs() < 0.05 * kappa_star,
            "fitted kappa'(0) = {slope} differs from -2/a = {} by more than 5% \
             (expected: the {{1,2,3}} triple violates the l != 2m condition, so the \
             branch weights are non-uniform; see the decisions ledger)",
            -kappa_star
        );
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "runtime {dt:?} exceeds 30 s");
    println!("ACCEPTANCE 6 (transcritical resonance, literal): PASS in {dt:?}");
}

/// Companion to criterion 6 on the smallest triple satisfying the resonance
/// theorem's hypotheses (m = 1, l = 3, l+m = 4): four transcritical branches
/// with unit weights and fitted slope within 5% of -2/a.
#[test]
fn acceptance_06_transcritical_resonance_valid_triple() {
    let start = std::time::Instant::now();
    let n = 32;
    let mut coeffs = vec![0.0; 4];
    coeffs[0] = 1.0;
    coeffs[2] = 1.0;
    coeffs[3] = 1.0;
    let w = PotentialSpectrum::finite(coeffs).unwrap();
    let a = 1.0;
    let kappa_star = 2.0 / a;
    let newton = NewtonControls::default();
    let branches = resonance_branches(&w, 3, 1, COINCIDENCE_TOL).unwrap();
    assert_eq!(branches.len(), 4);
    for descriptor in &branches {
        let report = classify_resonance(&w, 3, 1, descriptor.signs, COINCIDENCE_TOL).unwrap();
        // seed through switch_branch and verify convergence on both sides
        let pt = switch_branch(&report, 0.02, 0.3, n, &w, &newton).unwrap();
        assert!(pt.p.norm() > 0.005, "resonance seed collapsed");
        assert!(pt.kappa < kappa_star, "s > 0 side must have kappa < kappa*");
        // fit the slope through the bifurcation point
        let mut direction = ModeVector::zeros(n);
        for (mode, s) in [3usize, 1, 4].iter().zip(descriptor.signs) {
            direction.set(*mode, s);
        }
        let seed_pt = BranchPoint {
            p: ModeVector::zeros(n),
            kappa: kappa_star,
            arclength: 0.0,
            residual_norm: 0.0,
            stability: None,
        };
        let up = trace_amplitude_branch(
            &direction,
            0.0,
            0.05,
            10,
            &seed_pt,
            &w,
            &newton,
            Provenance::Transcritical([3, 1, 4]),
        )
        .unwrap();
        let down = trace_amplitude_branch(
            &direction,
            0.0,
            -0.05,
            10,
            &seed_pt,
            &w,
            &newton,
            Provenance::Transcritical([3, 1, 4]),
        )
        .unwrap();
        let mut merged = up;
        merged.points.extend(down.points.into_iter().skip(1));
        let fit = branch_curvature_fit(&merged, &direction, 0.051).unwrap();
        assert!(
            (fit.slope + kappa_star).abs() < 0.05 * kappa_star,
            "sigma {:?}: fitted slope {} vs -2/a = {}",
            descriptor.signs,
            fit.slope,
            -kappa_star
        );
        assert!(fit.slope.abs() > 0.5, "branch is not transcritical");
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "runtime {dt:?} exceeds 30 s");
    println!("ACCEPTANCE 6 companion (valid triple {{1,3,4}}): PASS in {dt:?}");
}

#[test]
fn acceptance_07_b_matrix_asymptotics() {
    let start = std::time::Instant::now();
    let beta = 400.0;
    // diagonal entries at modes {1, 2}: R_l(beta) vs -2 beta / (3 l^2)
    for l in [1usize, 2] {
        let exact = signature_ratio_transformer(beta, l).unwrap();
        let predicted = -2.0 * beta / (3.0 * (l * l) as f64);
        assert!(
            (exact / predicted - 1.0).abs() < 0.05,
            "diagonal mode {l}: {exact} vs {predicted}"
        );
    }
    // full 2x2 at the clustered pair (2,3): exact row-level B vs the
    // leading-order prediction (lower off-diagonal positive; the consistent
    // sign that reproduces the rational weight constants)
    let w = transformer_spectrum(beta, 16).unwrap();
    let b = build_b_matrix(&w, &[2, 3], None).unwrap();
    let pred = b_matrix_large_beta_prediction(2, 3, beta);
    for r in 0..2 {
        for c in 0..2 {
            let (x, y) = (b.entries[(r, c)], pred[(r, c)]);
            assert!(
                (x / y - 1.0).abs() < 0.05,
                "B[{r}][{c}] exact {x} vs predicted {y}"
            );
        }
    }
    // exact rational weight constants by integer arithmetic
    let ((n1, d1), (n2, d2)) = large_beta_weight_constants(2, 3);
    assert_eq!((n1, d1), (138, 31));
    assert_eq!((n2, d2), (189, 124));
    // and the weights computed from the exact B match the k_i / beta law
    match multi_mode_weights(&b, &[2, 3]).unwrap() {
        WeightsOutcome::Feasible(mw) => {
            assert_eq!(mw.sigma, 1.0);
            let x1 = mw.weights[0] * mw.weights[0];
            let x2 = mw.weights[1] * mw.weights[1];
            assert!((x1 * beta / (138.0 / 31.0) - 1.0).abs() < 0.05, "x1 beta = {}", x1 * beta);
            assert!((x2 * beta / (189.0 / 124.0) - 1.0).abs() < 0.05, "x2 beta = {}", x2 * beta);
        }
        other => panic!("expected feasible two-mode pitchfork, got {other:?}"),
    }
    // the (1,4) pair is infeasible: k_1 > 0 > k_2
    let ((n1, _), (n2, _)) = large_beta_weight_constants(1, 4);
    assert!(n1 > 0 && n2 < 0);
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "runtime {dt:?} exceeds 1 s");
    println!("ACCEPTANCE 7 (B-matrix asymptotics): PASS in {dt:?}");
}

#[test]
fn acceptance_08_derivative_and_identity_suite() {
    use rand::{Rng, SeedableRng};
    let start = std::time::Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);

    // Jacobian vs central finite differences on 50 random instances
    for _ in 0..50 {
        let n = rng.gen_range(2..=16);
        let w = PotentialSpectrum::finite((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let p =
            ModeVector::new((0..n).map(|_| rng.gen_range(-0.4..0.4)).collect::<Vec<_>>()).unwrap();
        let kappa = rng.gen_range(0.2..5.0);
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
                assert!((fd - exact).abs() / scale < 1e-6, "J[{l}][{r}]: {fd} vs {exact}");
            }
        }
    }

    // spectral vs quadrature interaction energy on 50 random densities
    for _ in 0..50 {
        let n = rng.gen_range(2..=12);
        let w = PotentialSpectrum::finite((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let p = ModeVector::new((0..n).map(|_| rng.gen_range(-0.15..0.15)).collect::<Vec<_>>())
            .unwrap();
        let spectral = interaction_energy(&p, &w);
        let quadrature = interaction_energy_quadrature(&p, &w, 256).unwrap();
        assert!(
            (spectral - quadrature).abs() < 1e-9,
            "interaction mismatch {spectral} vs {quadrature}"
        );
    }

    // envelope identity |m'(kappa) + E/2| < 1e-3 at 10 differentiability points
    let w = PotentialSpectrum::kuramoto();
    let n = 24;
    let controls = EnergyControls::default();
    let h = 1e-3;
    let m_of = |kappa: f64| -> f64 {
        minimize_energy(kappa, &w, n, &[], &controls).unwrap().value.min(0.0)
    };
    for kappa in [1.70, 1.75, 1.80, 2.20, 2.25, 2.30, 2.35, 2.40, 2.45, 2.50] {
        let slope = (m_of(kappa + h) - m_of(kappa - h)) / (2.0 * h);
        let min = minimize_energy(kappa, &w, n, &[], &controls).unwrap();
        let half_e = 0.5 * interaction_energy(&min.p, &w);
        assert!(
            (slope + half_e).abs() < 1e-3,
            "envelope at {kappa}: m' = {slope}, -E/2 = {}",
            -half_e
        );
    }

    // discrete concavity of m on a scan
    let scan = scan_m(
        &w,
        n,
        1.6,
        2.6,
        0.05,
        &controls,
        &ContinuationControls::default(),
    )
    .unwrap();
    for i in 1..scan.kappas.len() - 1 {
        let d2 = scan.m_values[i + 1] - 2.0 * scan.m_values[i] + scan.m_values[i - 1];
        assert!(d2 < 1e-8, "m not concave at {}", scan.kappas[i]);
    }

    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "runtime {dt:?} exceeds 1 min");
    println!("ACCEPTANCE 8 (derivative and identity suite): PASS in {dt:?}");
}

#[test]
fn acceptance_09_periodicity() {
    let start = std::time::Instant::now();
    let n = 64;
    // unique maximum coefficient at mode 2
    let w = PotentialSpectrum::finite(vec![0.5, 1.0, 0.3]).unwrap();
    let report = classify_single_mode(&w, 2, COINCIDENCE_TOL).unwrap();
    let prediction = mvcircle::bifurcation::periodicity_prediction(&w, &report, n);
    assert_eq!(prediction.g, 2);
    let newton = NewtonControls::default();
    let seed = switch_branch(&report, 0.02, 0.5, n, &w, &newton).unwrap();
    let v = ModeVector::unit(n, 2, 1.0);
    let controls = ContinuationControls {
        kappa_max: 2.0 / 1.0 * 1.4,
        max_points: 400,
        ..ContinuationControls::default()
    };
    let branch = continue_branch(&seed, (&v, 0.0), &w, &controls, Provenance::Pitchfork(2)).unwrap();
    assert!(branch.points.len() > 20);
    for pt in &branch.points {
        for l in 1..=n {
            if prediction.forced_zero[l - 1] {
                assert!(
                    pt.p.get(l).abs() < 1e-8,
                    "mode {l} = {} at kappa {} breaks 2-periodicity",
                    pt.p.get(l),
                    pt.kappa
                );
            }
        }
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "runtime {dt:?} exceeds 10 s");
    println!("ACCEPTANCE 9 (periodicity): PASS in {dt:?}");
}

#[test]
fn acceptance_10_particle_cross_validation() {
    let start = std::time::Instant::now();
    // Kuramoto at kappa = 2.5 against the closed form
    let w = PotentialSpectrum::kuramoto();
    let oracle = kuramoto_closed_form(2.5, 8);
    let controls = SimControls {
        n_particles: 4000,
        dt: 1e-3,
        burn_in: 50.0,
        horizon: 200.0,
        sample_every: 100,
        seed: 20240801,
    };
    let report = stationary_compare(2.5, &w, oracle.get(1), &controls).unwrap();
    println!(
        "ACCEPTANCE 10a: Kuramoto |p1| sim {:.5} vs solver {:.5} (se {:.2e}, z {:.2})",
        report.mean_order, report.solver_order, report.standard_error, report.z_score
    );
    assert!(
        report.z_score.abs() <= 3.0,
        "Kuramoto simulation off by {:.2} standard errors",
        report.z_score
    );

    // transformer beta = 1 at kappa = 3 (above kappa*_1 = 1.7694)
    let beta = 1.0;
    let n = 64;
    let wt = transformer_spectrum(beta, n).unwrap();
    let solver = newton_solve(
        &ModeVector::unit(n, 1, 0.4),
        3.0,
        &wt,
        &NewtonControls::with_presmooth(3),
    )
    .unwrap();
    assert!(solver.p.get(1).abs() > 0.1, "solver found only the trivial state");
    let report = stationary_compare(3.0, &wt, solver.p.get(1).abs(), &controls).unwrap();
    println!(
        "ACCEPTANCE 10b: transformer |p1| sim {:.5} vs solver {:.5} (se {:.2e}, z {:.2})",
        report.mean_order, report.solver_order, report.standard_error, report.z_score
    );
    assert!(
        report.z_score.abs() <= 3.0,
        "transformer simulation off by {:.2} standard errors",
        report.z_score
    );
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 600.0, "runtime {dt:?} exceeds 10 min");
    println!("ACCEPTANCE 10 (particle cross-validation, slow suite): PASS in {dt:?}");
}
