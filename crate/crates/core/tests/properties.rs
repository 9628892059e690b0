//! Property suites for the invariants of every module, runnable as one
//! command: `cargo test -p cptlaw-core --test properties`.

use cptlaw_core::allocator::{coefficients_cpt, coefficients_scratch, numeric_optimal_params, optimal_allocation};
use cptlaw_core::catalog::{catalog, catalog_lookup};
use cptlaw_core::fitter::{
    extract_compute_frontier, fit_scratch, objective_cpt, objective_scratch, CptTheta, FitConfig, FixedTerms,
    InitGrid, ScratchTheta,
};
use cptlaw_core::numeric::{huber, lse};
use cptlaw_core::run::{attribute_flops_by_language, compute_flops};
use cptlaw_core::synth::{generate_runset, SynthConfig};
use cptlaw_core::transfer::{flops_saving_from_frontiers, parametric_transfer, CurveInterpolator};
use cptlaw_core::{ChinchillaParams, ExtendedCptParams, FrontierParams, ScalingLaw};
use proptest::prelude::*;

const S: ChinchillaParams = ChinchillaParams::REFERENCE_SCRATCH;
const C: ExtendedCptParams = ExtendedCptParams::REFERENCE_CPT;

fn chinchilla() -> impl Strategy<Value = ChinchillaParams> {
    (0.5f64..3.0, 10.0f64..1e4, 10.0f64..1e4, 0.05f64..1.0, 0.05f64..1.0)
        .prop_map(|(e, a, b, alpha, beta)| ChinchillaParams::new(e, a, b, alpha, beta).unwrap())
}

/// Extended laws inside the allocation regime (γ < min(α, β′)).
fn extended() -> impl Strategy<Value = ExtendedCptParams> {
    (chinchilla(), -0.5f64..0.99).prop_map(|(p, frac)| {
        let gamma = frac * p.alpha.min(p.beta);
        ExtendedCptParams::new(p.e, p.a, p.alpha, p.b, p.beta, gamma).unwrap()
    })
}

fn frontier() -> impl Strategy<Value = FrontierParams> {
    (1.0f64..100.0, 0.01f64..0.2, prop_oneof![Just(0.0), 0.0f64..1.0])
        .prop_map(|(a, g, e)| FrontierParams::new(a, g, e).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    // ingest

    #[test]
    fn flops_split_sums_exactly(total in 0.0f64..1e25, ratio in 0.0f64..=1.0) {
        let (src, tgt) = attribute_flops_by_language(total, ratio).unwrap();
        prop_assert_eq!(src + tgt, total);
        prop_assert!(src >= 0.0 && tgt >= 0.0);
    }

    #[test]
    fn compute_flops_monotone(n in 1.0f64..1e12, d in 1.0f64..1e13, k in 1.0001f64..10.0) {
        let c = compute_flops(n, d).unwrap();
        prop_assert!(compute_flops(n * k, d).unwrap() > c);
        prop_assert!(compute_flops(n, d * k).unwrap() > c);
    }

    #[test]
    fn catalog_lookup_returns_a_nearest_row(target in 1.0f64..8000.0) {
        let rows = catalog().unwrap();
        let hit = catalog_lookup(target).unwrap();
        prop_assert!(rows.contains(&hit));
        let best = rows.iter().map(|r| (r.param_size_millions as f64 - target).abs()).fold(f64::INFINITY, f64::min);
        prop_assert_eq!((hit.param_size_millions as f64 - target).abs(), best);
    }

    // laws

    #[test]
    fn laws_decrease_and_stay_above_floor(
        p in chinchilla(), x in extended(), f in frontier(),
        n in 1e6f64..1e12, d in 1e6f64..1e13, k in 1.01f64..10.0,
    ) {
        // Strict where the moving term is resolvable next to the loss.
        let below = |after: f64, before: f64, term: f64| {
            if term > 1e-12 * before { after < before } else { after <= before }
        };
        let l = p.eval(n, d).unwrap();
        prop_assert!(l > p.e);
        prop_assert!(below(p.eval(n * k, d).unwrap(), l, p.a * n.powf(-p.alpha)));
        prop_assert!(below(p.eval(n, d * k).unwrap(), l, p.b * d.powf(-p.beta)));
        let l = x.eval(n, d).unwrap();
        let joint = x.b_prime * d.powf(-x.beta_prime) * n.powf(-x.gamma);
        prop_assert!(l > x.e);
        prop_assert!(below(x.eval(n, d * k).unwrap(), l, joint));
        if x.gamma >= 0.0 {
            prop_assert!(below(x.eval(n * k, d).unwrap(), l, x.a * n.powf(-x.alpha) + joint));
        }
        let c = 6.0 * n * d;
        let l = f.eval(c).unwrap();
        prop_assert!(l > f.offset);
        prop_assert!(below(f.eval(c * k).unwrap(), l, f.coefficient * c.powf(-f.exponent)));
    }

    #[test]
    fn reference_cpt_law_prefers_larger_models(n in 1e6f64..1e12, d in 1e6f64..1e13, k in 1.01f64..10.0) {
        prop_assert!(C.eval(n * k, d).unwrap() < C.eval(n, d).unwrap());
    }

    #[test]
    fn inverses_round_trip(p in chinchilla(), x in extended(), n in 1e6f64..1e12, d in 1e6f64..1e13) {
        // Inversion amplifies rounding by L / term; keep that below 1e6.
        let l = p.eval(n, d).unwrap();
        prop_assume!(p.b * d.powf(-p.beta) > 1e-6 * l && p.a * n.powf(-p.alpha) > 1e-6 * l);
        prop_assume!(x.b_prime * d.powf(-x.beta_prime) * n.powf(-x.gamma) > 1e-6 * x.eval(n, d).unwrap());
        prop_assert!(rel(p.solve_tokens_for_loss(n, l).unwrap(), d) < 1e-6);
        prop_assert!(rel(p.solve_params_for_loss(d, l).unwrap(), n) < 1e-6);
        let l = x.eval(n, d).unwrap();
        prop_assert!(rel(x.solve_tokens_for_loss(n, l).unwrap(), d) < 1e-6);
    }

    #[test]
    fn extended_with_zero_gamma_is_chinchilla(p in chinchilla(), n in 1e6f64..1e12, d in 1e6f64..1e13) {
        let x = ExtendedCptParams::new(p.e, p.a, p.alpha, p.b, p.beta, 0.0).unwrap();
        prop_assert!(rel(x.eval(n, d).unwrap(), p.eval(n, d).unwrap()) < 1e-15);
    }

    // fitter primitives

    #[test]
    fn huber_even_monotone_continuous(r in -1.0f64..1.0, delta in 1e-4f64..1.0, t in 0.0f64..1.0) {
        prop_assert_eq!(huber(r, delta), huber(-r, delta));
        prop_assert!(huber(r * t, delta) <= huber(r, delta));
        let h = 1e-9 * delta;
        prop_assert!((huber(delta + h, delta) - huber(delta - h, delta)).abs() <= 2.0 * h * delta * (1.0 + 1e-6));
        let slope_in = (huber(delta, delta) - huber(delta - h, delta)) / h;
        let slope_out = (huber(delta + h, delta) - huber(delta, delta)) / h;
        prop_assert!((slope_in - slope_out).abs() < 1e-6);
    }

    #[test]
    fn lse_bounds_and_shift(xs in proptest::collection::vec(-300.0f64..300.0, 1..8), c in -100.0f64..100.0) {
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v = lse(&xs).unwrap();
        prop_assert!(v >= m && v <= m + (xs.len() as f64).ln() + 1e-12);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((lse(&shifted).unwrap() - (v + c)).abs() < 1e-10);
    }

    // allocator

    #[test]
    fn exponents_sum_to_one(p in chinchilla(), x in extended()) {
        let k = coefficients_scratch(&p).unwrap();
        prop_assert!((k.a + k.b - 1.0).abs() < 1e-12);
        let k = coefficients_cpt(&x).unwrap();
        prop_assert!((k.a + k.b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plans_are_first_order_optimal(p in chinchilla(), x in extended(), lc in 18.0f64..23.0) {
        let c = 10f64.powf(lc);
        for law in [ScalingLaw::from(p), ScalingLaw::from(x)] {
            let k = cptlaw_core::allocator::coefficients(&law).unwrap();
            let plan = optimal_allocation(&k, c, &law).unwrap();
            prop_assert!(rel(6.0 * plan.n_opt * plan.d_opt, c) < 1e-9);
            for f in [0.99, 1.01] {
                let n = plan.n_opt * f;
                prop_assert!(law.eval(n, c / (6.0 * n)).unwrap() >= plan.predicted_loss * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn numeric_frontier_matches_closed_form(lc in 18.0f64..23.0) {
        let c = 10f64.powf(lc);
        for law in [ScalingLaw::from(S), ScalingLaw::from(C)] {
            let k = cptlaw_core::allocator::coefficients(&law).unwrap();
            let plan = optimal_allocation(&k, c, &law).unwrap();
            prop_assert!(rel(numeric_optimal_params(&law, c).unwrap(), plan.n_opt) < 0.01);
        }
    }

    // transfer

    #[test]
    fn interpolator_round_trips(steps in proptest::collection::vec((1u64..10_000, 1e-3f64..0.5), 2..30)) {
        let mut tokens = 100u64;
        let mut ln_loss = 2.0;
        let mut pts = Vec::new();
        for (dt, dl) in steps {
            tokens += dt;
            ln_loss -= dl;
            pts.push((tokens, f64::exp(ln_loss)));
        }
        let c = CurveInterpolator::from_points(&pts).unwrap();
        for &(t, l) in &pts {
            prop_assert_eq!(c.tokens_at_loss(l).unwrap(), t as f64);
            prop_assert!(rel(c.loss_at_tokens(t as f64).unwrap(), l) < 1e-14);
        }
        for w in pts.windows(2) {
            for frac in [0.25, 0.5, 0.75] {
                let ln_t = (w[0].0 as f64).ln() * (1.0 - frac) + (w[1].0 as f64).ln() * frac;
                let back = c.tokens_at_loss(c.loss_at_tokens(ln_t.exp()).unwrap()).unwrap();
                prop_assert!((back.ln() - ln_t).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn savings_monotone_in_loss(a in 20.0f64..40.0, b in 20.0f64..40.0, g1 in 0.03f64..0.08, g2 in 0.03f64..0.08) {
        prop_assume!((g1 - g2).abs() > 1e-3);
        let f1 = FrontierParams::new(a, g1, 0.0).unwrap();
        let f2 = FrontierParams::new(b, g2, 0.0).unwrap();
        let ceiling = a.min(b);
        let s: Vec<f64> = (1..50)
            .map(|i| flops_saving_from_frontiers(&f1, &f2, ceiling * i as f64 / 50.0).unwrap())
            .collect();
        let up = s.windows(2).all(|w| w[1] >= w[0]);
        let down = s.windows(2).all(|w| w[1] <= w[0]);
        prop_assert!(up || down);
    }

    #[test]
    fn reference_transfer_sign_flips_at_equal_data_terms(n in 1e7f64..1e11, f in 0.05f64..0.95) {
        // B·D^-β = B′·D^-β′·N^-γ at D* = (B·N^γ/B′)^(1/(β−β′)).
        let d_eq = (S.b * n.powf(C.gamma) / C.b_prime).powf(1.0 / (S.beta - C.beta_prime));
        prop_assert!(parametric_transfer(&S, &C, n, d_eq * f).unwrap() > 0.0);
        prop_assert!(parametric_transfer(&S, &C, n, d_eq / f).unwrap() < 0.0);
    }

    // synth

    #[test]
    fn synth_grid_and_seeds(seed in any::<u64>(), n in 1_000_000u64..10_000_000_000, m in 1.0f64..100.0) {
        let cfg = SynthConfig { param_sizes: vec![n], token_multiple: m, noise_sigma: 0.05, seed, ..SynthConfig::default() };
        let a = generate_runset(&cfg).unwrap();
        prop_assert_eq!(&a, &generate_runset(&cfg).unwrap());
        let b = generate_runset(&SynthConfig { seed: seed ^ 1, ..cfg.clone() }).unwrap();
        let (ra, rb) = (&a.runs()[0], &b.runs()[0]);
        prop_assert!(ra.max_tokens() as f64 <= m * n as f64 + 0.5);
        let ta: Vec<u64> = ra.records().iter().map(|r| r.tokens).collect();
        let tb: Vec<u64> = rb.records().iter().map(|r| r.tokens).collect();
        prop_assert_eq!(ta, tb);
        prop_assert!(ra.records().iter().zip(rb.records()).any(|(x, y)| x.loss != y.loss));
    }
}

fn small_sizes() -> Vec<u64> {
    vec![50_000_000, 120_000_000, 300_000_000, 700_000_000, 1_500_000_000, 3_000_000_000]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn ground_truth_is_a_stationary_zero(p in chinchilla(), x in extended()) {
        let data = generate_runset(&SynthConfig { law: p.into(), param_sizes: small_sizes(), ..SynthConfig::default() }).unwrap();
        let theta = ScratchTheta::from_params(&p);
        prop_assert!(objective_scratch(&theta, &data, 1e-3).unwrap() < 1e-26);
        let h = 1e-6;
        let coords: [fn(&mut ScratchTheta) -> &mut f64; 5] =
            [|t| &mut t.a, |t| &mut t.b, |t| &mut t.e, |t| &mut t.alpha, |t| &mut t.beta];
        for get in coords {
            let (mut up, mut dn) = (theta, theta);
            *get(&mut up) += h;
            *get(&mut dn) -= h;
            let g = (objective_scratch(&up, &data, 1e-3).unwrap() - objective_scratch(&dn, &data, 1e-3).unwrap()) / (2.0 * h);
            prop_assert!(g.abs() < 1e-6, "{g}");
        }

        let data = generate_runset(&SynthConfig { law: x.into(), param_sizes: small_sizes(), ..SynthConfig::default() }).unwrap();
        let fixed = FixedTerms { e: x.e, a: x.a, alpha: x.alpha };
        let theta = CptTheta { b_prime: x.b_prime.ln(), beta_prime: x.beta_prime, gamma: x.gamma };
        prop_assert!(objective_cpt(&theta, &fixed, &data, 1e-3).unwrap() < 1e-26);
    }

    #[test]
    fn frontier_strictly_monotone(p in chinchilla(), bins in 1usize..20) {
        let data = generate_runset(&SynthConfig { law: p.into(), param_sizes: small_sizes(), ..SynthConfig::default() }).unwrap();
        let pts = extract_compute_frontier(&data, bins).unwrap();
        prop_assert!(!pts.is_empty());
        prop_assert!(pts.windows(2).all(|w| w[0].compute < w[1].compute && w[0].loss > w[1].loss));
    }
}

#[test]
fn fits_are_deterministic() {
    let data = generate_runset(&SynthConfig {
        param_sizes: small_sizes(),
        noise_sigma: 0.01,
        seed: 5,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = FitConfig {
        init_grid: InitGrid {
            log_a: vec![4.0, 8.0],
            log_b: vec![4.0, 8.0],
            alpha: vec![0.3],
            beta: vec![0.3],
            ..InitGrid::default()
        },
        ..FitConfig::default()
    };
    let a = fit_scratch(&data, &cfg).unwrap();
    let b = fit_scratch(&data, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cpt_allocates_fewer_params_per_flop_than_scratch() {
    let s = coefficients_scratch(&S).unwrap();
    let c = coefficients_cpt(&C).unwrap();
    assert!(c.a < s.a && c.b > s.b);
}
