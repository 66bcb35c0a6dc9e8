//! Acceptance criteria, one line of output each. Exits nonzero if any fail.
//!
//! Run with `cargo test --test acceptance`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use consensus_core::cli::run_and_write;
use consensus_core::design::{gamma_equation, gamma_tau2, mult_gain_interval, necessity_bound};
use consensus_core::gains::{check_conditions, ConditionRates, GainFunction, Verdict};
use consensus_core::graph::{example_directed, example_undirected, spectral_decompose, Digraph};
use consensus_core::metrics::{martingale_variance_oracle, EnsembleStats};
use consensus_core::noise::NoiseModel;
use consensus_core::numeric::ls_slope;
use consensus_core::resolvent::{
    decay_exponents, decay_rate, rho1_equation, solve_resolvent, verify_envelope, ResolventProblem,
    DEFAULT_ENVELOPE_HORIZON,
};
use consensus_core::scenarios::Scenario;
use consensus_core::sdde::{simulate, simulate_ensemble, History, SimConfig};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const WORKERS: usize = 4;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

fn ensemble(cfg: &SimConfig) -> EnsembleStats {
    simulate_ensemble(cfg, WORKERS).expect("ensemble runs")
}

fn spectral_reproduction() -> Outcome {
    let start = Instant::now();
    let dir = spectral_decompose(&example_directed()).unwrap();
    let und = spectral_decompose(&example_undirected()).unwrap();
    let mut re: Vec<f64> = dir.nonzero_eigs.iter().map(|l| l.re).collect();
    re.sort_by(f64::total_cmp);
    let imag_ok = dir.nonzero_eigs.iter().all(|l| l.im.abs() < 1e-3);
    let dir_ok = imag_ok && re.len() == 3 && [1.0, 1.0, 3.0].iter().zip(&re).all(|(a, b)| (a - b).abs() < 1e-3);
    let (l2, ln) = (und.lambda2.unwrap(), und.lambda_n.unwrap());
    let und_ok = (l2 - 0.5858).abs() < 1e-3 && (ln - 3.4142).abs() < 1e-3;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        dir_ok && und_ok && secs < 1.0,
        format!("directed {re:?}, undirected lambda2 {l2:.4} lambdaN {ln:.4}, {secs:.3}s"),
    )
}

fn design_constants() -> Outcome {
    let start = Instant::now();
    let und = spectral_decompose(&example_undirected()).unwrap();
    let short = mult_gain_interval(&und, 0.2, 2.0, 4).unwrap();
    let long = mult_gain_interval(&und, 3.5, 2.0, 4).unwrap();
    let nec = necessity_bound(2.0, 4);
    let secs = start.elapsed().as_secs_f64();
    let pass = (short - 0.2715).abs() < 1e-3 && (long - 0.0669).abs() < 1e-3 && nec == 1.0 / 3.0 && secs < 1.0;
    outcome(
        pass,
        format!("k_max {short:.4} / {long:.4}, necessity {nec}, {secs:.3}s"),
    )
}

fn condition_truth_table() -> Outcome {
    use Verdict::{Fails as F, Holds as H};
    // (gain, [C1, C2, C3, C4, C4', C5, C5'], C5 limit)
    let table: [(GainFunction, [Verdict; 7], f64); 4] = [
        (GainFunction::power_law(1.0, 1.0).unwrap(), [H, H, H, H, H, H, H], 0.0),
        (
            GainFunction::power_law(1.0, 1.0 / 3.0).unwrap(),
            [H, F, H, H, H, H, H],
            0.0,
        ),
        (GainFunction::log_inverse(4.0).unwrap(), [H, F, H, H, H, F, F], 1.0),
        (
            GainFunction::constant(0.12).unwrap(),
            [H, F, F, F, F, F, F],
            f64::INFINITY,
        ),
    ];
    let rates = ConditionRates {
        c4: Some(0.5),
        c4prime: Some(2.0),
    };
    let mut disagreements = 0;
    for (gain, want, limit) in &table {
        let r = check_conditions(gain, rates);
        let got = [r.c1, r.c2, r.c3, r.c4.unwrap(), r.c4prime.unwrap(), r.c5, r.c5prime];
        disagreements += got.iter().zip(want).filter(|(a, b)| a != b).count();
        if r.c5_limit != Some(*limit) {
            disagreements += 1;
        }
    }
    outcome(
        disagreements == 0,
        format!("{disagreements} disagreements over 4 gains"),
    )
}

fn martingale_variance() -> Outcome {
    let start = Instant::now();
    let mut cfg = Scenario::Fig2.config();
    cfg.trials = 500;
    cfg.horizon = 50.0;
    let stats = ensemble(&cfg);
    let spec = spectral_decompose(&cfg.graph).unwrap();
    let want = martingale_variance_oracle(&spec, &cfg.noise, &cfg.gain, 50.0, 1).unwrap();
    // agents 2..4 carry weight 1/3 and receive four edges between them; agent 1 has weight 0
    let by_hand = 4.0 * (1.0 / 9.0) * 4.0 * 3.0 * (51f64.cbrt() - 1.0);
    let got = stats.centroid_var[stats.index_at(50.0)];
    let rel = (got - want).abs() / want;
    outcome(
        rel < 0.1 && (want - by_hand).abs() < 1e-9 * by_hand,
        format!(
            "centroid variance {got:.4} vs {want:.4} (rel err {rel:.3}), {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn strong_consensus() -> Outcome {
    let mut cfg = Scenario::Fig1.config();
    cfg.trials = 100;
    cfg.horizon = 200.0;
    let stats = ensemble(&cfg);
    let m = &stats.max_pairwise_ms;
    let (first, last) = (m[0], *m.last().unwrap());
    let half = stats.index_at(100.0);
    let logs: Vec<f64> = m[half..].iter().map(|v| v.ln()).collect();
    let slope = ls_slope(&stats.times[half..], &logs).unwrap_or(f64::NAN);
    let pass = last < 0.02 * first && last < m[half] && slope < 0.0;
    outcome(
        pass,
        format!(
            "max pairwise ms {first:.3} -> {last:.4} ({:.2}%), at T/2 {:.4}, log slope {slope:.2e}",
            100.0 * last / first,
            m[half]
        ),
    )
}

fn weak_only() -> Outcome {
    let mut cfg = Scenario::Fig2.config();
    cfg.trials = 100;
    cfg.horizon = 200.0;
    let stats = ensemble(&cfg);
    let ms = &stats.ms_disagreement;
    let (first, last) = (ms[0], *ms.last().unwrap());
    let var_end = *stats.centroid_var.last().unwrap();
    let var_eighth = stats.centroid_var[stats.index_at(25.0)];
    let ratio = var_end / var_eighth;
    outcome(
        last < 0.1 * first && ratio > 5.0,
        format!(
            "ms disagreement {:.2}% of initial; centroid variance T/T8 ratio {ratio:.3} (needs > 5)",
            100.0 * last / first
        ),
    )
}

fn multiplicative_decay() -> Outcome {
    let und = spectral_decompose(&example_undirected()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for tau2 in [0.0, 2.0, 10.0] {
        let mut cfg = Scenario::Fig3.config();
        cfg.tau2 = tau2;
        cfg.trials = 200;
        cfg.horizon = 100.0;
        let stats = ensemble(&cfg);
        let exponent = stats.ms_decay_exponent(0.2).unwrap_or(f64::NAN);
        let gamma = gamma_tau2(&und, 0.12, 0.2, tau2, 2.0, 4).unwrap();
        let ok = exponent <= -0.8 * gamma;
        pass &= ok;
        parts.push(format!("tau2={tau2}: {exponent:.4} vs -0.8*{gamma:.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn instability() -> Outcome {
    let mut cfg = Scenario::Fig7.config();
    cfg.trials = 200;
    cfg.horizon = 50.0;
    let long = ensemble(&cfg);
    let (a0, a1) = (long.ms_disagreement[0], *long.ms_disagreement.last().unwrap());

    let mut cfg = Scenario::Fig3.config();
    cfg.gain = GainFunction::constant(0.4).unwrap();
    cfg.trials = 200;
    cfg.horizon = 50.0;
    let hot = ensemble(&cfg);
    let (b0, b1) = (hot.ms_disagreement[0], *hot.ms_disagreement.last().unwrap());
    outcome(
        a1 >= a0 && b1 >= 0.25 * b0,
        format!(
            "tau1=3.5: {a0:.1} -> {a1:.1}; k=0.4: {b0:.1} -> {b1:.3e} ({} of 200 diverged)",
            hot.diverged
        ),
    )
}

fn resolvent_envelopes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    let mut worst_residual: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let lambda = Complex64::new(uniform(&mut rng, 0.2, 5.0), uniform(&mut rng, -3.0, 3.0));
        let c_bar = uniform(&mut rng, 0.2, 3.0);
        let margin = uniform(&mut rng, 0.05, 0.95);
        let tau1 = margin / (c_bar * lambda.norm_sqr() / lambda.re);
        if tau1 < 0.01 {
            continue;
        }
        done += 1;
        let p = ResolventProblem::new(lambda, GainFunction::constant(c_bar).unwrap(), tau1, 0.0).unwrap();
        let rate = decay_rate(&p).unwrap();
        let env = verify_envelope(&p, &rate, DEFAULT_ENVELOPE_HORIZON).unwrap();
        let residual = rho1_equation(rate.rho1, lambda, tau1, c_bar).abs();
        worst_residual = worst_residual.max(residual);
        if !(env.holds && env.b_fit.is_finite() && residual < 1e-10) {
            failures += 1;
        }
    }

    let mut worst_exact: f64 = 0.0;
    let lambda = Complex64::new(1.3, 0.7);
    for gain in [
        GainFunction::constant(0.8).unwrap(),
        GainFunction::power_law(1.0, 1.0).unwrap(),
        GainFunction::power_law(2.0, 0.5).unwrap(),
        GainFunction::log_inverse(4.0).unwrap(),
    ] {
        let p = ResolventProblem::new(lambda, gain.clone(), 0.0, 0.0).unwrap();
        let sol = solve_resolvent(&p, 0.0, 20.0, 1e-3).unwrap();
        for (t, g) in sol.times.iter().zip(&sol.values) {
            let exact = (-lambda * gain.integral(0.0, *t).unwrap()).exp();
            worst_exact = worst_exact.max((g - exact).norm());
        }
    }
    outcome(
        failures == 0 && worst_exact < 1e-6,
        format!(
            "{failures}/100 envelope failures, max rho1 residual {worst_residual:.1e}, undelayed error {worst_exact:.1e}"
        ),
    )
}

fn gamma_properties() -> Outcome {
    let und = spectral_decompose(&example_undirected()).unwrap();
    let (l2, ln) = (und.lambda2.unwrap(), und.lambda_n.unwrap());
    let (k, tau1, sigma) = (0.12, 0.2, 2.0);
    let taus = [0.0, 1.0, 2.0, 5.0, 10.0, 100.0];
    let gammas: Vec<f64> = taus
        .iter()
        .map(|&t2| gamma_tau2(&und, k, tau1, t2, sigma, 4).unwrap())
        .collect();
    let residual = taus
        .iter()
        .zip(&gammas)
        .map(|(&t2, &g)| gamma_equation(g, k, tau1, t2, sigma, 4, l2, ln).abs())
        .fold(0.0, f64::max);
    let decreasing = gammas.windows(2).all(|w| w[1] < w[0]);
    let ratio = gammas[5] / gammas[0];
    outcome(
        residual < 1e-10 && decreasing && ratio < 0.1,
        format!("gammas {gammas:.4?}, residual {residual:.1e}, last/first {ratio:.4} (needs < 0.1)"),
    )
}

fn random_spanning_digraph(rng: &mut ChaCha8Rng) -> Digraph {
    loop {
        let n = 2 + (rng.next_u32() % 7) as usize;
        let mut g = Digraph::empty(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j && uniform(rng, 0.0, 1.0) < 0.35 {
                    g.add_edge(i, j).unwrap();
                }
            }
        }
        if spectral_decompose(&g).map(|s| s.has_spanning_tree).unwrap_or(false) {
            return g;
        }
    }
}

fn deterministic_consensus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..20 {
        let g = random_spanning_digraph(&mut rng);
        let n = g.n_agents();
        let spec = spectral_decompose(&g).unwrap();
        let margin = uniform(&mut rng, 0.2, 0.7);
        let tau1 = margin / spec.delay_sensitivity();
        let dt = tau1 / (tau1 / 1e-3).ceil();
        let gain = GainFunction::constant(1.0).unwrap();
        let mut rho0 = f64::INFINITY;
        for l in &spec.nonzero_eigs {
            let p = ResolventProblem::new(*l, gain.clone(), tau1, 0.0).unwrap();
            rho0 = rho0.min(decay_exponents(&p).unwrap().2);
        }
        let horizon = ((30f64).max(2.0 * 1e8f64.ln() / rho0) / dt).ceil() * dt;
        let psi: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -10.0, 10.0)).collect();
        let target: f64 = spec.pi.iter().zip(&psi).map(|(p, x)| p * x).sum();
        let mut cfg = SimConfig::new(g, gain, NoiseModel::silent(n), History::Constant(psi));
        cfg.tau1 = tau1;
        cfg.dt = dt;
        cfg.horizon = horizon;
        cfg.stride = usize::MAX;
        let traj = simulate(&cfg).unwrap();
        let err = traj
            .final_state()
            .iter()
            .map(|x| (x - target).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if err >= 1e-4 || err.is_nan() {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{failures}/20 failed, worst final error {worst:.1e}"),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    for sc in Scenario::ALL {
        let mut cfg = sc.config();
        cfg.trials = 6;
        cfg.horizon = 10.0;
        cfg.seed = 42;
        let runs: Vec<_> = [(1, "a"), (1, "b"), (3, "c")]
            .iter()
            .map(|(workers, tag)| {
                let dir = root.path().join(format!("{}-{tag}", sc.id()));
                run_and_write(sc.id(), &cfg, &dir, *workers).unwrap();
                dir_bytes(&dir)
            })
            .collect();
        if runs[0].len() != 3 || runs[0] != runs[1] || runs[0] != runs[2] {
            mismatches.push(sc.id());
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("8 scenarios x (rerun, 1 vs 3 workers); mismatches {mismatches:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("spectral reproduction", spectral_reproduction),
        ("design constants", design_constants),
        ("condition truth table", condition_truth_table),
        ("martingale variance oracle", martingale_variance),
        ("strong consensus, decaying gain", strong_consensus),
        ("weak-only consensus, unbounded centroid variance", weak_only),
        ("multiplicative exponential decay", multiplicative_decay),
        ("instability and necessity", instability),
        ("resolvent envelopes", resolvent_envelopes),
        ("gamma_tau2 properties", gamma_properties),
        ("deterministic consensus", deterministic_consensus),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let r = check();
        if !r.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            i + 1,
            r.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
