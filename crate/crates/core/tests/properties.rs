use bleed_core::bleed::{bleed, bleed_decomposition};
use bleed_core::closed_form::{bs_call, bs_call_greeks};
use bleed_core::experiments::{
    bk_cva::bk_cva_problem, lognormal_model, run_gatheral_local_vol, run_piterbarg_discounting, BkCvaParams,
    DiscountingParams, HazardSpec, LocalVolParams, RateCurve,
};
use bleed_core::mc::{estimate_adjustment, Measure};
use bleed_core::model::apply_generator;
use bleed_core::{Executor, GreekBundle, MonteCarloConfig, Sequential};
use proptest::prelude::*;

/// Runs jobs last to first, to show results do not depend on execution order.
struct Reversed;

impl Executor for Reversed {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut out: Vec<(usize, T)> = (0..n).rev().map(|i| (i, f(i))).collect();
        out.sort_by_key(|(i, _)| *i);
        out.into_iter().map(|(_, t)| t).collect()
    }
}

#[test]
fn estimates_do_not_depend_on_execution_order() {
    let p = LocalVolParams::default();
    let cfg = MonteCarloConfig::new(300, 40, 11);
    let a = run_gatheral_local_vol(&p, &cfg, &Sequential).unwrap();
    let b = run_gatheral_local_vol(&p, &cfg, &Reversed).unwrap();
    assert_eq!(a, b);
}

#[test]
fn black_scholes_price_solves_its_pricing_equation() {
    // dV/dt + L V = 0 for a driftless lognormal stock at zero rates
    let sigma = 0.3;
    let model = lognormal_model(move |_, _| sigma).unwrap();
    let (k, horizon) = (100.0, 2.0);
    let price = |t: f64, s: f64| bs_call(s, k, sigma * sigma * (horizon - t)).unwrap();
    for (t, s) in [(0.0, 100.0), (0.5, 80.0), (1.5, 130.0)] {
        let g = bs_call_greeks(s, k, sigma * sigma * (horizon - t)).unwrap();
        let mut bundle = GreekBundle::zeros(1);
        bundle.value = g.price;
        bundle.grad[0] = g.delta;
        bundle.hess[(0, 0)] = g.gamma;
        let lv = apply_generator(&model, &bundle, t, &[s]).unwrap();
        let h = 1e-5;
        let theta = (price(t + h, s) - price(t - h, s)) / (2.0 * h);
        assert!(
            (theta + lv).abs() < 1e-6 * lv.abs().max(1.0),
            "t={t} s={s}: {theta} vs {lv}"
        );
    }
}

#[test]
fn linear_rate_curves_match_closed_form() {
    let p = DiscountingParams {
        r: RateCurve::Linear {
            level: 0.01,
            slope: 0.005,
        },
        r_hat: RateCurve::Linear {
            level: 0.03,
            slope: -0.002,
        },
        ..Default::default()
    };
    let r = run_piterbarg_discounting(&p, &MonteCarloConfig::new(20_000, 200, 3), &Sequential).unwrap();
    // independent reference: integrate the curves by hand
    let int = |level: f64, slope: f64| level * p.maturity + 0.5 * slope * p.maturity * p.maturity;
    let c = bs_call(p.s0, p.strike, p.sigma_s * p.sigma_s * p.maturity).unwrap();
    let expected = ((-int(0.03, -0.002)).exp() - (-int(0.01, 0.005)).exp()) * c;
    assert!(r.u_mc.within(expected, 3.0), "{:?} vs {expected}", r.u_mc);
}

#[test]
fn antithetic_sampling_agrees_and_tightens() {
    // the discounting bleed is monotone in the spot, where mirrored paths help
    let p = DiscountingParams::default();
    let plain = run_piterbarg_discounting(&p, &MonteCarloConfig::new(8_000, 100, 5), &Sequential).unwrap();
    let anti = run_piterbarg_discounting(
        &p,
        &MonteCarloConfig::new(4_000, 100, 5).with_antithetic(true),
        &Sequential,
    )
    .unwrap();
    assert!(
        anti.u_mc.agrees_with(&plain.u_mc, 3.0),
        "{:?} vs {:?}",
        anti.u_mc,
        plain.u_mc
    );
    assert!(
        anti.u_mc.std_error < plain.u_mc.std_error,
        "{:?} vs {:?}",
        anti.u_mc,
        plain.u_mc
    );
}

#[test]
fn measure_choice_matters_only_through_the_paths() {
    // identical dynamics under both measures: the estimates coincide exactly
    let p = BkCvaParams::default();
    let problem = bk_cva_problem(&p).unwrap();
    let cfg = MonteCarloConfig::new(200, 30, 8);
    let x0 = [0.05, 100.0];
    let a = estimate_adjustment(&problem, Measure::Base, &x0, &cfg, &Sequential).unwrap();
    let b = estimate_adjustment(&problem, Measure::Target, &x0, &cfg, &Sequential).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn bleed_is_the_sum_of_its_terms(
        lambda in -0.05..0.3f64, s in 40.0..250.0f64, t in 0.0..2.9f64,
        r in -0.01..0.05f64, f in -1.0..1.0f64, sigma in 0.0..0.05f64, rho in -1.0..1.0f64,
    ) {
        let p = BkCvaParams {
            r,
            friction: f,
            hazard: HazardSpec::HoLee { lambda0: 0.05, sigma, rho },
            ..Default::default()
        };
        let problem = bk_cva_problem(&p).unwrap();
        let d = bleed_decomposition(&problem, t, &[lambda, s]).unwrap();
        prop_assert_eq!(bleed(&problem, t, &[lambda, s]).unwrap(), d.model_term + d.discount_term + d.payoff_term);
        // a call is never negative, so V⁺ = V and the bleed is f - λV
        let tau = 3.0 - t;
        let v = (-r * tau).exp() * bs_call(s, 100.0, 0.04 * tau).unwrap();
        prop_assert!((d.total() - (f - lambda * v)).abs() <= 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn same_seed_same_estimate(seed in any::<u64>()) {
        let p = LocalVolParams::default();
        let cfg = MonteCarloConfig::new(20, 10, seed);
        let a = run_gatheral_local_vol(&p, &cfg, &Sequential).unwrap();
        let b = run_gatheral_local_vol(&p, &cfg, &Reversed).unwrap();
        prop_assert_eq!(a, b);
    }
}
