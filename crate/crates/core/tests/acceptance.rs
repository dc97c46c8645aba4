//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any criterion fails.

mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::time::{Duration, Instant};

use mbqeq::ablation::{ablate_source, ablation_report, Source};
use mbqeq::accidentals::{coincidence_rates, estimate_mu, visibility, DetectorContext};
use mbqeq::fit::{mbqeq_fit, stability_scan_with_threads, OptimizerConfig};
use mbqeq::io;
use mbqeq::mle::{mle_fit, MleInput};
use mbqeq::model::{build_source_state, ErrorParams, SimConfig, Simulator};
use mbqeq::quantum::{depolarize, fidelity_pure, trace_distance, DensityMatrix, PureState2Q};
use mbqeq::tomography::{linear_qst, measure_probs, ProbVector, ProjectorSet};
use mbqeq::wavepacket::{effective_state, Geometry, WavepacketBasis, WavepacketConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fit_cfg() -> SimConfig {
    SimConfig::for_fitting(Geometry::default())
}

fn c1_visibility_table() -> Outcome {
    let ctx = DetectorContext::default();
    let table = [(0.75, 0.43), (0.50, 0.34), (0.22, 0.18), (0.14, 0.12)];
    let mut worst_eta: f64 = 0.0;
    let mut worst_mu: f64 = 0.0;
    for (mu, eta_exp) in table {
        let (r_max, r_min) = coincidence_rates(mu, &ctx);
        let v = visibility(r_max, r_min).map_err(|e| e.to_string())?;
        worst_eta = worst_eta.max((1.0 - v - eta_exp).abs());
        let mu_back = estimate_mu(1.0 - eta_exp, &ctx).map_err(|e| e.to_string())?;
        worst_mu = worst_mu.max((mu_back - mu).abs());
    }
    // η_exp is tabulated to two decimals; inverting it amplifies that rounding
    // by 1/|dη/dμ| ≈ 3, so the inverse is reported but not graded.
    println!("    info: max |μ(η_exp) − μ| = {worst_mu:.4}");
    check(worst_eta <= 0.01, format!("max |1 − V(μ) − η_exp| = {worst_eta:.4}"))
}

fn c2_mu_inverse() -> Outcome {
    let ctx = DetectorContext::default();
    let mut worst: f64 = 0.0;
    for mu0 in [0.1, 0.5, 1.0] {
        let (r_max, r_min) = coincidence_rates(mu0, &ctx);
        let v = visibility(r_max, r_min).map_err(|e| e.to_string())?;
        let mu = estimate_mu(v, &ctx).map_err(|e| e.to_string())?;
        worst = worst.max((mu - mu0).abs());
    }
    check(worst <= 1e-6, format!("max |μ − μ₀| = {worst:.2e}"))
}

fn c3_linear_qst() -> Outcome {
    let mut rng = common::rng(3);
    let bases = ProjectorSet::ideal();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = common::random_density(&mut rng);
        let back = linear_qst(&measure_probs(&rho, &bases, &[0.0; 16]));
        worst = worst.max(back.max_abs_diff(&rho));
    }
    check(worst <= 1e-12, format!("100 states, max element error {worst:.2e}"))
}

/// Sub-box of the fit bounds used for the recovery sets.
fn random_params(rng: &mut impl Rng) -> ErrorParams {
    ErrorParams {
        r_corr: rng.random_range(1.0..=3.0),
        theta_22: rng.random_range(-0.3..=0.3),
        p: rng.random_range(0.35..=0.65),
        p_a: rng.random_range(0.4..=0.6),
        p_b: rng.random_range(0.4..=0.6),
        theta_plus_a: rng.random_range(-0.5..=0.5),
        theta_l_a: rng.random_range(-0.5..=0.5),
        theta_plus_b: rng.random_range(-0.5..=0.5),
        theta_l_b: rng.random_range(-0.5..=0.5),
        eta: rng.random_range(0.0..=0.5),
        delta: [0.0; 16],
    }
}

fn c4_recovery() -> Outcome {
    let cfg = fit_cfg();
    let opt = OptimizerConfig::default();
    let mut sim = Simulator::new(cfg).map_err(|e| e.to_string())?;
    let mut rng = common::rng(4);
    let mut failures = Vec::new();
    let mut gauge = Vec::new();
    let (mut e_eta, mut e_p, mut e_pab, mut e_t22, mut e_sum, mut cost) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for set in 0..10 {
        let truth = random_params(&mut rng);
        let rho = sim.simulate(&truth, &[0.0; 16]).map_err(|e| e.to_string())?;
        let fit = mbqeq_fit(&rho, &[0.0; 16], &cfg, &opt).map_err(|e| e.to_string())?;
        let f = fit.params;
        let d_eta = (f.eta - truth.eta).abs();
        let d_p = (f.p - truth.p).abs();
        let d_pab = (f.p_a - truth.p_a).abs().max((f.p_b - truth.p_b).abs());
        let d_t22 = common::angle_diff(f.theta_22, truth.theta_22);
        let want = truth.net_phases().radians;
        let got = fit.net_phases.radians;
        let d_sum = (0..4).map(|k| common::angle_diff(got[k], want[k])).fold(0.0, f64::max);
        let d_gauge = (0..4)
            .map(|k| common::angle_diff(got[k] + f.theta_22, want[k] + truth.theta_22))
            .fold(0.0, f64::max);
        e_eta = e_eta.max(d_eta);
        e_p = e_p.max(d_p);
        e_pab = e_pab.max(d_pab);
        e_t22 = e_t22.max(d_t22);
        e_sum = e_sum.max(d_sum);
        gauge.push(format!("{d_gauge:.0e}"));
        cost = cost.max(fit.final_cost);
        if d_eta > 0.01 || d_p > 0.01 || d_pab > 0.02 || d_t22 > 0.02 || d_sum > 0.02 || fit.final_cost > 1e-3 {
            failures.push(format!(
                "set {set} (θ22 = {:+.3}, fitted {:+.3})",
                truth.theta_22, f.theta_22
            ));
        }
    }
    println!("    info: per-set max error of the gauge-invariant S_k + θ22 (rad): {}", gauge.join(" "));
    let detail = format!(
        "max errors: η {e_eta:.1e}, p {e_p:.1e}, p_A/p_B {e_pab:.1e}, θ22 {e_t22:.1e}, sums {e_sum:.1e}; max cost {cost:.1e}"
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; out of tolerance: {}", failures.join(", ")))
    }
}

fn c5_phase_emulation() -> Outcome {
    let truth = ErrorParams {
        r_corr: 2.2,
        theta_22: 0.0,
        p: 0.52,
        p_a: 0.47,
        p_b: 0.47,
        theta_plus_a: FRAC_PI_4,
        theta_l_a: 0.0,
        theta_plus_b: FRAC_PI_4,
        theta_l_b: 0.0,
        eta: 0.1,
        delta: [0.0; 16],
    };
    let cfg = fit_cfg();
    let rho = Simulator::new(cfg)
        .and_then(|mut s| s.simulate(&truth, &[0.0; 16]))
        .map_err(|e| e.to_string())?;
    let fit = mbqeq_fit(&rho, &[0.0; 16], &cfg, &OptimizerConfig::default()).map_err(|e| e.to_string())?;
    let intended = [FRAC_PI_2, FRAC_PI_4, FRAC_PI_4, 0.0];
    let got = fit.net_phases.degrees;
    let worst = (0..4)
        .map(|k| common::angle_diff(fit.net_phases.radians[k], intended[k]).to_degrees())
        .fold(0.0, f64::max);
    check(
        worst <= 3.0,
        format!(
            "recovered {:.1}°, {:.1}°, {:.1}°, {:.1}° (max error {worst:.3}°)",
            got[0], got[1], got[2], got[3]
        ),
    )
}

fn c6_depolarization() -> Outcome {
    let ideal = DensityMatrix::ideal();
    let bell = PureState2Q::bell();
    let mut worst: f64 = 0.0;
    for k in 0..=10 {
        let eta = k as f64 / 10.0;
        let out = depolarize(&ideal, eta).map_err(|e| e.to_string())?;
        worst = worst
            .max((fidelity_pure(&bell, &out) - (1.0 - 0.75 * eta)).abs())
            .max((trace_distance(&ideal, &out) - 0.75 * eta).abs());
    }
    check(worst <= 1e-12, format!("η grid 0..1, max deviation {worst:.2e}"))
}

fn c7_mle_physicality() -> Outcome {
    let ideal = ProjectorSet::ideal();
    let mut rng = common::rng(7);
    let mut non_psd = 0;
    let (mut worst_trace, mut worst_herm, mut worst_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    while non_psd < 50 {
        let rho = common::random_pure(&mut rng);
        let mut s = measure_probs(&rho, &ideal, &[0.0; 16]).s;
        for v in s.iter_mut() {
            *v += rng.random_range(-0.03..=0.03);
        }
        if linear_qst(&ProbVector::exact(s)).min_eigenvalue() >= 0.0 {
            continue;
        }
        non_psd += 1;
        let res = mle_fit(MleInput::Probs(&ProbVector::exact(s))).map_err(|e| e.to_string())?;
        let m = res.rho.matrix();
        worst_trace = worst_trace.max((res.rho.trace() - 1.0).abs());
        worst_herm = worst_herm.max(mbqeq::linalg::hermitian_defect(m));
        worst_eig = worst_eig.min(res.rho.min_eigenvalue());
    }
    let mut worst_td: f64 = 0.0;
    for _ in 0..10 {
        let rho = common::random_density(&mut rng);
        let s = measure_probs(&rho, &ideal, &[0.0; 16]);
        let res = mle_fit(MleInput::Probs(&s)).map_err(|e| e.to_string())?;
        worst_td = worst_td.max(trace_distance(&res.rho, &rho));
    }
    check(
        worst_trace <= 1e-10 && worst_herm <= 1e-12 && worst_eig >= -1e-10 && worst_td <= 1e-4,
        format!(
            "50 non-PSD inputs: |Tr−1| ≤ {worst_trace:.1e}, min eigenvalue {worst_eig:.1e}; exact inputs: max D {worst_td:.1e}"
        ),
    )
}

fn c8_wavepacket_limits() -> Outcome {
    let geometry = Geometry::default();
    let mut worst_f: f64 = 1.0;
    for p in [0.3, 0.5, 0.7] {
        for theta in [-0.4, 0.0, 0.4] {
            let (_, rho) = effective_state(&WavepacketConfig::for_model(geometry, 1.0, p, theta))
                .map_err(|e| e.to_string())?;
            let phi = build_source_state(p, theta).map_err(|e| e.to_string())?;
            worst_f = worst_f.min(fidelity_pure(&phi, &rho));
        }
    }
    let mut coherences = Vec::new();
    let mut leakage = Vec::new();
    for r in [1.0, 1.5, 2.0, 2.5, 3.0] {
        let basis = WavepacketBasis::new(geometry, r).map_err(|e| e.to_string())?;
        let (gram, rho) = basis.effective_state(0.5, 0.0).map_err(|e| e.to_string())?;
        coherences.push(gram.normalized_coherence());
        leakage.push(format!("{:.1e}", rho.get(1, 2).norm()));
    }
    println!("    info: |ρ(12,21)| over r_corr 1..3: {}", leakage.join(", "));
    let monotone = coherences.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let listed: Vec<String> = coherences.iter().map(|c| format!("1{:+.1e}", c - 1.0)).collect();
    check(
        worst_f >= 0.999 && monotone,
        format!("min F at r_corr = 1: {worst_f:.6}; coherence over r_corr 1..3: {}", listed.join(", ")),
    )
}

fn c9_ablation() -> Outcome {
    let cfg = fit_cfg();
    let ideal = ErrorParams::ideal();
    let cases = [
        (Source::Eta, ErrorParams { eta: 0.2, ..ideal }),
        (
            Source::ThetaNet,
            ErrorParams {
                theta_plus_a: 0.15,
                theta_l_b: -0.1,
                ..ideal
            },
        ),
        (Source::P, ErrorParams { p: 0.6, ..ideal }),
        (Source::PAb, ErrorParams { p_a: 0.6, ..ideal }),
    ];
    let mut sim = Simulator::new(cfg).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for (source, truth) in cases {
        let rho = sim.simulate(&truth, &[0.0; 16]).map_err(|e| e.to_string())?;
        let fit = mbqeq_fit(&rho, &[0.0; 16], &cfg, &OptimizerConfig::default()).map_err(|e| e.to_string())?;
        let report = ablation_report(&rho, &fit.params, &cfg).map_err(|e| e.to_string())?;
        let top = report.top_single_source().map(|e| e.source);
        let single = ablate_source(&rho, &fit.params, source, &cfg).map_err(|e| e.to_string())?;
        let f = single.entry.predicted_fidelity;
        ok &= top == Some(source) && f >= 0.998;
        lines.push(format!(
            "{source}: F {f:.5}, top {}",
            top.map_or("none".to_string(), |s| s.to_string())
        ));
    }
    check(ok, lines.join("; "))
}

fn c10_stability() -> Outcome {
    let cfg = fit_cfg();
    let opt = OptimizerConfig::default();
    let truth = ErrorParams {
        eta: 0.15,
        ..common::table1_row1()
    };
    let rho = Simulator::new(cfg)
        .and_then(|mut s| s.simulate(&truth, &[0.0; 16]))
        .map_err(|e| e.to_string())?;
    let run = |threads| {
        stability_scan_with_threads(&rho, &[0.0; 16], &cfg, &opt, 20, 10, threads)
            .map_err(|e| e.to_string())
            .and_then(|r| Ok((io::to_json_string(&r).map_err(|e| e.to_string())?, r)))
    };
    let (a, report) = run(1)?;
    let (b, _) = run(1)?;
    let (c, _) = run(2)?;
    let iqr = report.summary("eta").map(|s| s.iqr()).unwrap_or(f64::INFINITY);
    check(
        a == b && a == c && iqr <= 0.02,
        format!(
            "repeat identical: {}, 1 vs 2 threads identical: {}, IQR(η) = {iqr:.2e} over 20 runs",
            a == b,
            a == c
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("1 visibility table", c1_visibility_table, Duration::from_secs(1)),
        ("2 estimate_mu inverse", c2_mu_inverse, Duration::from_secs(1)),
        ("3 linear-QST exactness", c3_linear_qst, Duration::from_secs(5)),
        ("4 synthetic recovery", c4_recovery, Duration::from_secs(600)),
        ("5 phase-error emulation", c5_phase_emulation, Duration::from_secs(120)),
        ("6 depolarization analytics", c6_depolarization, Duration::from_secs(1)),
        ("7 MLE physicality", c7_mle_physicality, Duration::from_secs(120)),
        ("8 wavepacket limits", c8_wavepacket_limits, Duration::from_secs(60)),
        ("9 ablation exactness", c9_ablation, Duration::from_secs(300)),
        ("10 stability determinism", c10_stability, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed <= limit, d),
            Err(d) => (false, d),
        };
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!(
            "criterion {name}: {verdict} [{:.2} s, limit {} s] {detail}",
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        if !ok {
            failed += 1;
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
