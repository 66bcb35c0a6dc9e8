use consensus_core::design::{
    additive_delay_check, gamma_equation, gamma_from_extremes, mult_gain_interval, necessity_bound,
};
use consensus_core::gains::{GainFunction, GainSpec};
use consensus_core::graph::{spectral_decompose, Digraph};
use consensus_core::noise::{NoiseModel, NoiseStream};
use consensus_core::resolvent::{decay_exponents, rho1_equation, ResolventProblem};
use consensus_core::sdde::{step_diffusion, step_drift, DelayBuffer};
use num_complex::Complex64;
use proptest::prelude::*;
use std::path::Path;

fn digraph() -> impl Strategy<Value = Digraph> {
    (2usize..=8).prop_flat_map(|n| {
        proptest::collection::vec(proptest::bool::weighted(0.35), n * n).prop_map(move |bits| {
            let mut g = Digraph::empty(n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if i != j && bits[i * n + j] {
                        g.add_edge(i, j).unwrap();
                    }
                }
            }
            g
        })
    })
}

fn undirected() -> impl Strategy<Value = Digraph> {
    digraph().prop_map(|g| {
        let n = g.n_agents();
        let mut u = Digraph::empty(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                if g.has_edge(i, j) {
                    u.add_edge(i, j).unwrap();
                    u.add_edge(j, i).unwrap();
                }
            }
        }
        u
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_distribution_is_a_left_null_vector(g in digraph()) {
        let spec = spectral_decompose(&g).unwrap();
        prop_assume!(spec.has_spanning_tree);
        prop_assert!((spec.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(spec.pi.iter().all(|p| *p >= 0.0));
        prop_assert!(spec.pi_residual() < 1e-10);
        prop_assert!(spec.nonzero_eigs.iter().all(|l| l.re > 0.0));
        prop_assert_eq!(spec.spectral_spanning_tree(), true);
    }

    #[test]
    fn edge_lists_round_trip(g in digraph()) {
        let back: Digraph = g.to_string().parse().unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn undirected_margin_is_tau_c_lambda_n(g in undirected(), tau1 in 0.01f64..1.0, k in 0.1f64..2.0) {
        let spec = spectral_decompose(&g).unwrap();
        prop_assume!(spec.has_spanning_tree);
        let c = GainFunction::constant(k).unwrap();
        let (_, margin) = additive_delay_check(&spec, &c, tau1, 0.0).unwrap();
        let want = tau1 * k * spec.lambda_n.unwrap();
        prop_assert!((margin - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn rho1_solves_its_equation(
        re in 0.2f64..5.0, im in -3.0f64..3.0, c_bar in 0.2f64..3.0, margin in 0.05f64..0.95,
    ) {
        let lambda = Complex64::new(re, im);
        let tau1 = margin * re / (c_bar * lambda.norm_sqr());
        let p = ResolventProblem::new(lambda, GainFunction::constant(c_bar).unwrap(), tau1, 0.0).unwrap();
        let (rho1, rho2, rho) = decay_exponents(&p).unwrap();
        prop_assert!(rho1 > 0.0 && rho2 > 0.0);
        prop_assert_eq!(rho, rho1.min(rho2));
        prop_assert!(rho1_equation(rho1, lambda, tau1, c_bar).abs() < 1e-10);
        prop_assert!(rho1 <= 2.0 * re);
    }

    #[test]
    fn rates_shrink_with_the_delay(re in 0.2f64..5.0, im in -3.0f64..3.0, c_bar in 0.2f64..3.0, m in 0.05f64..0.9) {
        let lambda = Complex64::new(re, im);
        let unit = re / (c_bar * lambda.norm_sqr());
        let gain = GainFunction::constant(c_bar).unwrap();
        let rate = |margin: f64| {
            decay_exponents(&ResolventProblem::new(lambda, gain.clone(), margin * unit, 0.0).unwrap()).unwrap().2
        };
        prop_assert!(rate(m + 0.05) < rate(m));
        prop_assert!(rate(m) < 2.0 * re);
    }

    #[test]
    fn gamma_solves_and_decreases(
        l2 in 0.1f64..2.0, spread in 0.0f64..4.0, n in 2usize..10, tau1 in 0.0f64..0.5,
        tau2 in 0.0f64..20.0, sigma in 0.0f64..2.0, frac in 0.05f64..0.95,
    ) {
        let ln = l2 + spread;
        let nf = n as f64;
        let k_max = 1.0 / (ln * tau1 + (nf - 1.0) / nf * sigma * sigma);
        let k = frac * k_max.min(10.0);
        let g = gamma_from_extremes(k, tau1, tau2, sigma, n, l2, ln).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!(gamma_equation(g, k, tau1, tau2, sigma, n, l2, ln).abs() < 1e-10);
        let later = gamma_from_extremes(k, tau1, tau2 + 1.0, sigma, n, l2, ln).unwrap();
        prop_assert!(sigma == 0.0 || later < g);
        prop_assert!(later <= g);
        if tau1 > 0.0 || sigma > 0.0 {
            let k_max_later = 1.0 / (ln * (tau1 + 0.1) + (nf - 1.0) / nf * sigma * sigma);
            if k < k_max_later {
                let slower = gamma_from_extremes(k, tau1 + 0.1, tau2, sigma, n, l2, ln).unwrap();
                prop_assert!(slower < g);
            }
        }
    }

    #[test]
    fn gain_interval_shrinks(g in undirected(), tau1 in 0.0f64..2.0, sigma in 0.0f64..3.0) {
        let spec = spectral_decompose(&g).unwrap();
        prop_assume!(spec.has_spanning_tree);
        let n = g.n_agents();
        let k = mult_gain_interval(&spec, tau1, sigma, n).unwrap();
        prop_assert!(mult_gain_interval(&spec, tau1 + 0.1, sigma, n).unwrap() < k);
        prop_assert!(mult_gain_interval(&spec, tau1, sigma + 0.1, n).unwrap() < k);
        if sigma > 0.0 {
            // the sufficient interval sits inside the necessary one
            prop_assert!(k <= necessity_bound(sigma, n));
        }
    }

    #[test]
    fn drift_vanishes_on_consensus(g in digraph(), v in -10.0f64..10.0, c in 0.0f64..5.0) {
        let n = g.n_agents();
        let mut buf = DelayBuffer::new(n, 1);
        buf.push(&vec![v; n]);
        prop_assert!(step_drift(&g, &buf, 0, c, 1).unwrap().iter().all(|x| *x == 0.0));
        let noise = NoiseModel::multiplicative_linear(n, 2.0).unwrap();
        let dw = vec![0.3; g.channels().len()];
        prop_assert!(step_diffusion(&g, &buf, 0, c, &noise, &dw, 1).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn drift_preserves_the_weighted_centroid(g in digraph(), x in proptest::collection::vec(-10.0f64..10.0, 8)) {
        let spec = spectral_decompose(&g).unwrap();
        prop_assume!(spec.has_spanning_tree);
        let n = g.n_agents();
        let mut buf = DelayBuffer::new(n, 1);
        buf.push(&x[..n]);
        let d = step_drift(&g, &buf, 0, 1.0, 1).unwrap();
        let moved: f64 = spec.pi.iter().zip(&d).map(|(p, v)| p * v).sum();
        prop_assert!(moved.abs() < 1e-9);
    }

    #[test]
    fn linear_intensity_respects_its_bound(
        sigma in 0.0f64..3.0, delta in proptest::collection::vec(-5.0f64..5.0, 1..4),
    ) {
        let noise = NoiseModel::multiplicative_linear(3, sigma).unwrap();
        let f = noise.intensity(0, 1, &delta).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(norm(&f) <= noise.bound() * norm(&delta) * (1.0 + 1e-12));
    }

    #[test]
    fn gain_specs_round_trip(a in 0.01f64..10.0, beta in 0.0f64..2.0, k in 0.001f64..5.0, s in 1.5f64..10.0) {
        for gain in [
            GainFunction::power_law(a, beta).unwrap(),
            GainFunction::constant(k).unwrap(),
            GainFunction::log_inverse(s).unwrap(),
        ] {
            let back = GainSpec::parse(&gain.to_string()).unwrap().load(Path::new(".")).unwrap();
            for t in [0.0, 1.0, 17.5] {
                prop_assert_eq!(back.eval(t).unwrap(), gain.eval(t).unwrap());
            }
        }
    }
}

#[test]
fn increments_have_brownian_moments() {
    let draws = 1_000_000u64;
    let dt: f64 = 1e-3;
    let stream = NoiseStream::new(7, 0, 0);
    let other = NoiseStream::new(7, 0, 1);
    let (mut a, mut b) = (stream.source(), other.source());
    let (mut sum, mut sq, mut cross, mut sq_b) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..draws {
        let x = a.next_increment(dt.sqrt());
        let y = b.next_increment(dt.sqrt());
        sum += x;
        sq += x * x;
        cross += x * y;
        sq_b += y * y;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = sq / n - mean * mean;
    // standard error of the mean is sqrt(dt / n) ~ 3e-5
    assert!(mean.abs() < 1.5e-4, "{mean}");
    assert!((var / dt - 1.0).abs() < 0.01, "{var}");
    let corr = cross / (sq * sq_b).sqrt();
    assert!(corr.abs() < 0.01, "{corr}");
}

#[test]
fn streams_are_keyed_by_trial_and_channel() {
    let draw = |s: NoiseStream| s.source().next_standard_normal();
    let base = draw(NoiseStream::for_channel(1, 0, 2, 1, 4));
    assert_eq!(base, draw(NoiseStream::for_channel(1, 0, 2, 1, 4)));
    assert_ne!(base, draw(NoiseStream::for_channel(1, 1, 2, 1, 4)));
    assert_ne!(base, draw(NoiseStream::for_channel(1, 0, 1, 2, 4)));
    assert_ne!(base, draw(NoiseStream::for_channel(2, 0, 2, 1, 4)));
}
