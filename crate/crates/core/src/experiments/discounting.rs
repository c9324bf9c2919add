//! Discounting adjustment: the same call discounted at a target rate `R̂`
//! instead of the base rate `R`. The bleed is `-(R̂ - R)V` and paths run under
//! the common base dynamics.

use crate::bleed::{AdjustmentProblem, CashflowSpec, PricingProblem};
use crate::closed_form::{bs_call, bs_call_greeks};
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::experiments::{fill_call_greeks, lognormal_model, require_positive};
use crate::mc::{estimate_adjustment, Estimate, Measure, MonteCarloConfig};
use crate::model::GreekBundle;

/// Deterministic short rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateCurve {
    Constant(f64),
    /// `level + slope·t`.
    Linear {
        level: f64,
        slope: f64,
    },
}

impl RateCurve {
    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            RateCurve::Constant(r) => r,
            RateCurve::Linear { level, slope } => level + slope * t,
        }
    }

    /// `∫ₐᵇ r(t) dt`.
    #[inline]
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            RateCurve::Constant(r) => r * (b - a),
            RateCurve::Linear { level, slope } => level * (b - a) + 0.5 * slope * (b * b - a * a),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RateCurve::Constant(r) => r.is_finite(),
            RateCurve::Linear { level, slope } => level.is_finite() && slope.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid!("rate curve {self:?} must be finite"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountingParams {
    pub r: RateCurve,
    pub r_hat: RateCurve,
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub sigma_s: f64,
}

impl Default for DiscountingParams {
    fn default() -> Self {
        Self {
            r: RateCurve::Constant(0.02),
            r_hat: RateCurve::Constant(0.05),
            s0: 100.0,
            strike: 100.0,
            maturity: 3.0,
            sigma_s: 0.2,
        }
    }
}

impl DiscountingParams {
    pub fn validate(&self) -> Result<()> {
        self.r.validate()?;
        self.r_hat.validate()?;
        require_positive("s0", self.s0)?;
        require_positive("strike", self.strike)?;
        require_positive("maturity", self.maturity)?;
        require_positive("sigma_s", self.sigma_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountingResult {
    pub u_mc: Estimate,
    /// `(e^{-∫R̂} - e^{-∫R})·C(S₀, K, σ²T)`.
    pub u_ref: f64,
    /// Base price `e^{-∫R} C`.
    pub v0: f64,
}

/// Problems with a shared driftless lognormal stock; the base price is
/// `V = e^{-∫ₜᵀR} C(S, K, σ²(T - t))`.
pub fn discounting_problem(p: &DiscountingParams) -> Result<AdjustmentProblem> {
    p.validate()?;
    let (r, r_hat, strike, maturity, sigma) = (p.r, p.r_hat, p.strike, p.maturity, p.sigma_s);
    let model = lognormal_model(move |_, _| sigma)?;
    let payoff = CashflowSpec::terminal_only(move |x: &[f64]| (x[0] - strike).max(0.0));
    let base = PricingProblem::new(model.clone(), payoff.with_rate(move |t, _| r.rate(t)), maturity)?;
    let target = PricingProblem::new(model, payoff.with_rate(move |t, _| r_hat.rate(t)), maturity)?;
    AdjustmentProblem::new(base, target, move |t, x: &[f64], g: &mut GreekBundle| {
        let tau = (maturity - t).max(0.0);
        let df = libm::exp(-r.integral(t, maturity));
        fill_call_greeks(g, 0, &bs_call_greeks(x[0], strike, sigma * sigma * tau)?, df);
        Ok(())
    })
}

pub fn run_piterbarg_discounting<E: Executor + ?Sized>(
    p: &DiscountingParams,
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<DiscountingResult> {
    let problem = discounting_problem(p)?;
    let c0 = bs_call(p.s0, p.strike, p.sigma_s * p.sigma_s * p.maturity)?;
    let df = libm::exp(-p.r.integral(0.0, p.maturity));
    let df_hat = libm::exp(-p.r_hat.integral(0.0, p.maturity));
    let u_mc = estimate_adjustment(&problem, Measure::Base, &[p.s0], cfg, exec)?;
    Ok(DiscountingResult {
        u_mc,
        u_ref: (df_hat - df) * c0,
        v0: df * c0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bleed::bleed_decomposition;
    use crate::exec::Sequential;

    #[test]
    fn curve_integral() {
        let c = RateCurve::Linear {
            level: 0.01,
            slope: 0.02,
        };
        assert!((c.integral(1.0, 3.0) - (0.02 + 0.08)).abs() < 1e-15);
    }

    #[test]
    fn equal_rates_give_exact_zero() {
        let p = DiscountingParams {
            r_hat: RateCurve::Constant(0.02),
            ..Default::default()
        };
        let r = run_piterbarg_discounting(&p, &MonteCarloConfig::new(100, 20, 1), &Sequential).unwrap();
        assert_eq!(r.u_mc, Estimate::exact(0.0, 100));
        assert_eq!(r.u_ref, 0.0);
    }

    #[test]
    fn bleed_is_pure_discount_term() {
        let problem = discounting_problem(&DiscountingParams::default()).unwrap();
        let d = bleed_decomposition(&problem, 1.0, &[95.0]).unwrap();
        assert_eq!((d.model_term, d.payoff_term), (0.0, 0.0));
        assert!(d.discount_term < 0.0);
    }

    #[test]
    fn matches_discount_factor_closed_form() {
        let cfg = MonteCarloConfig::new(10_000, 100, 3);
        let r = run_piterbarg_discounting(&DiscountingParams::default(), &cfg, &Sequential).unwrap();
        assert!(r.u_mc.within(r.u_ref, 3.0), "{:?} vs {}", r.u_mc, r.u_ref);

        let lower = DiscountingParams {
            r_hat: RateCurve::Constant(0.01),
            ..Default::default()
        };
        let r = run_piterbarg_discounting(&lower, &cfg, &Sequential).unwrap();
        assert!(r.u_ref > 0.0 && r.u_mc.mean > 0.0);
    }

    #[test]
    fn time_varying_rates() {
        let p = DiscountingParams {
            r: RateCurve::Linear {
                level: 0.01,
                slope: 0.01,
            },
            r_hat: RateCurve::Linear {
                level: 0.03,
                slope: 0.02,
            },
            ..Default::default()
        };
        let r = run_piterbarg_discounting(&p, &MonteCarloConfig::new(10_000, 200, 8), &Sequential).unwrap();
        assert!(r.u_mc.within(r.u_ref, 3.0), "{:?} vs {}", r.u_mc, r.u_ref);
    }
}
