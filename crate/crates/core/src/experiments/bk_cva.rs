//! CVA on a call as a discounting and payoff adjustment, with an optional
//! constant friction cost `f` added to the target running payoff.
//!
//! State is `(λ, S)`. The base prices the call at the risk-free rate `r`; the
//! target discounts at `r + λ` and receives `λ(V - V⁺) + f`, so the bleed is
//! `-λV⁺ + f` and
//!
//! ```text
//! U = E[∫ e^{-∫(r+λ)} (f - λV⁺) dt].
//! ```

use crate::bleed::{AdjustmentProblem, CashflowSpec, PricingProblem};
use crate::closed_form::{bs_call, bs_call_greeks};
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::experiments::meta_cva::ho_lee_hazard_model;
use crate::experiments::{fill_call_greeks, require_finite, require_positive};
use crate::mc::{estimate_adjustment, Estimate, Measure, MonteCarloConfig};
use crate::model::{GreekBundle, ModelDynamics};

/// Hazard rate dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HazardSpec {
    Constant(f64),
    /// Gaussian `dλ = σ²t dt + σ dW^λ`, calibrated to the flat survival curve
    /// `e^{-λ₀T}`, correlated with the stock at `rho`.
    HoLee {
        lambda0: f64,
        sigma: f64,
        rho: f64,
    },
}

impl HazardSpec {
    pub fn lambda0(&self) -> f64 {
        match *self {
            HazardSpec::Constant(l) => l,
            HazardSpec::HoLee { lambda0, .. } => lambda0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            HazardSpec::Constant(l) => require_finite("lambda", l),
            HazardSpec::HoLee { lambda0, sigma, rho } => {
                require_finite("lambda0", lambda0)?;
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(invalid!("hazard volatility must be non-negative, got {sigma}"));
                }
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(invalid!("correlation must lie in [-1, 1], got {rho}"));
                }
                Ok(())
            }
        }
    }
}

/// `(λ, S)` dynamics: Ho-Lee or frozen hazard, driftless lognormal stock.
pub fn hazard_stock_model(hazard: &HazardSpec, sigma_s: f64) -> Result<ModelDynamics> {
    match *hazard {
        HazardSpec::Constant(_) => ho_lee_hazard_model(0.0, sigma_s, 0.0),
        HazardSpec::HoLee { sigma, rho, .. } => ho_lee_hazard_model(sigma, sigma_s, rho),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BkCvaParams {
    pub r: f64,
    pub hazard: HazardSpec,
    /// Constant friction cost rate added to the target running payoff.
    pub friction: f64,
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub sigma_s: f64,
}

impl Default for BkCvaParams {
    fn default() -> Self {
        Self {
            r: 0.0,
            hazard: HazardSpec::Constant(0.05),
            friction: 0.0,
            s0: 100.0,
            strike: 100.0,
            maturity: 3.0,
            sigma_s: 0.2,
        }
    }
}

impl BkCvaParams {
    pub fn validate(&self) -> Result<()> {
        require_finite("r", self.r)?;
        require_finite("friction", self.friction)?;
        self.hazard.validate()?;
        require_positive("s0", self.s0)?;
        require_positive("strike", self.strike)?;
        require_positive("maturity", self.maturity)?;
        require_positive("sigma_s", self.sigma_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BkCvaResult {
    pub u_mc: Estimate,
    /// Closed form whenever the hazard rate is independent of the stock.
    pub u_ref: Option<f64>,
    /// Call price discounted at `r`.
    pub v0: f64,
}

pub fn bk_cva_problem(p: &BkCvaParams) -> Result<AdjustmentProblem> {
    p.validate()?;
    let (r, f, strike, maturity, sigma) = (p.r, p.friction, p.strike, p.maturity, p.sigma_s);
    let model = hazard_stock_model(&p.hazard, sigma)?;
    let price = move |t: f64, s: f64| -> f64 {
        let tau = (maturity - t).max(0.0);
        bs_call(s, strike, sigma * sigma * tau).map_or(f64::NAN, |c| libm::exp(-r * tau) * c)
    };
    let payoff = CashflowSpec::terminal_only(move |x: &[f64]| (x[1] - strike).max(0.0));
    let base = PricingProblem::new(model.clone(), payoff.with_rate(move |_, _| r), maturity)?;
    let target = PricingProblem::new(
        model,
        payoff
            .with_rate(move |_, x: &[f64]| r + x[0])
            .with_flow(move |t, x: &[f64]| {
                let v = price(t, x[1]);
                x[0] * (v - v.max(0.0)) + f
            }),
        maturity,
    )?;
    AdjustmentProblem::new(base, target, move |t, x: &[f64], g: &mut GreekBundle| {
        let tau = (maturity - t).max(0.0);
        let c = bs_call_greeks(x[1], strike, sigma * sigma * tau)?;
        fill_call_greeks(g, 1, &c, libm::exp(-r * tau));
        Ok(())
    })
}

/// `∫₀ᵀ e^{-k t} dt`.
fn annuity(k: f64, horizon: f64) -> f64 {
    if k == 0.0 {
        horizon
    } else {
        -libm::expm1(-k * horizon) / k
    }
}

pub fn run_bk_cva<E: Executor + ?Sized>(p: &BkCvaParams, cfg: &MonteCarloConfig, exec: &E) -> Result<BkCvaResult> {
    let problem = bk_cva_problem(p)?;
    let lambda0 = p.hazard.lambda0();
    let v0 = libm::exp(-p.r * p.maturity) * bs_call(p.s0, p.strike, p.sigma_s * p.sigma_s * p.maturity)?;
    let independent = match p.hazard {
        HazardSpec::Constant(_) => true,
        HazardSpec::HoLee { rho, sigma, .. } => rho == 0.0 || sigma == 0.0,
    };
    // Independence plus the flat calibration E[e^{-∫₀ᵗλ}] = e^{-λ₀t} give
    // E[∫ e^{-∫(r+λ)} λ V dt] = V₀ (1 - e^{-λ₀T}).
    let u_ref =
        independent.then(|| libm::expm1(-lambda0 * p.maturity) * v0 + p.friction * annuity(p.r + lambda0, p.maturity));
    let u_mc = estimate_adjustment(&problem, Measure::Base, &[lambda0, p.s0], cfg, exec)?;
    Ok(BkCvaResult { u_mc, u_ref, v0 })
}
