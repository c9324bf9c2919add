//! Black-Scholes volatility promoted to a state variable: frozen under the
//! base (`dα = 0`), stochastic under the target (`dα = β̂ dt + γ̂ dW^α`).
//!
//! The gamma terms cancel and the bleed is
//! `β̂ ∂_αV + ½γ̂² ∂_ααV + ρ αSγ̂ ∂_SαV` with Black-Scholes vega, volga and
//! vanna. The direct reference reprices the call on the same paths.

use crate::bleed::{AdjustmentProblem, CashflowSpec, PricingProblem};
use crate::closed_form::{bs_call, bs_call_greeks, bs_greeks_sv};
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::experiments::{fill_call_greeks, require_positive, BleedAndPayoff};
use crate::mc::{sample_functionals, Estimate, MonteCarloConfig, TimeGrid};
use crate::model::{Correlation, GreekBundle, ModelDynamics};

/// Floor applied to `α` inside drift and diffusion evaluations.
pub const ALPHA_FLOOR: f64 = 1e-8;

/// Target volatility dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolDynamics {
    /// `β̂ = γ̂ = 0`.
    Frozen,
    Constant {
        beta: f64,
        gamma: f64,
    },
    /// `dα² = κ(θ - α²)dt + vα dW^α`, i.e. by Itô
    /// `β̂ = (κ(θ - α²) - v²/4) / 2α` and `γ̂ = v/2`.
    Heston {
        kappa: f64,
        theta: f64,
        v: f64,
    },
}

impl VolDynamics {
    #[inline]
    pub fn beta(&self, alpha: f64) -> f64 {
        match *self {
            VolDynamics::Frozen => 0.0,
            VolDynamics::Constant { beta, .. } => beta,
            VolDynamics::Heston { kappa, theta, v } => {
                let a = alpha.max(ALPHA_FLOOR);
                (kappa * (theta - a * a) - 0.25 * v * v) / (2.0 * a)
            }
        }
    }

    #[inline]
    pub fn gamma(&self, _alpha: f64) -> f64 {
        match *self {
            VolDynamics::Frozen => 0.0,
            VolDynamics::Constant { gamma, .. } => gamma,
            VolDynamics::Heston { v, .. } => 0.5 * v,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            VolDynamics::Frozen => true,
            VolDynamics::Constant { beta, gamma } => beta.is_finite() && gamma.is_finite(),
            VolDynamics::Heston { kappa, theta, v } => {
                kappa.is_finite() && theta >= 0.0 && theta.is_finite() && v.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid!("volatility dynamics {self:?} must be finite"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochVolParams {
    pub s0: f64,
    pub alpha0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rho: f64,
    pub dynamics: VolDynamics,
}

impl Default for StochVolParams {
    fn default() -> Self {
        Self {
            s0: 100.0,
            alpha0: 0.2,
            strike: 100.0,
            maturity: 1.0,
            rho: -0.5,
            dynamics: VolDynamics::Heston {
                kappa: 1.5,
                theta: 0.0625,
                v: 0.1,
            },
        }
    }
}

impl StochVolParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("s0", self.s0)?;
        require_positive("alpha0", self.alpha0)?;
        require_positive("strike", self.strike)?;
        require_positive("maturity", self.maturity)?;
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(invalid!("correlation must lie in [-1, 1], got {}", self.rho));
        }
        self.dynamics.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochVolResult {
    /// Bleed-integral estimate of `U₀`.
    pub u_mc: Estimate,
    /// `E[(S_T - K)⁺] - C(S₀, K, α₀²T)` on the same paths.
    pub u_direct: Estimate,
    pub v0: f64,
    /// Sample variance of the per-path bleed integral.
    pub bleed_variance: f64,
    /// Sample variance of the per-path discounted payoff.
    pub direct_variance: f64,
    /// Visited states with `α` below [`ALPHA_FLOOR`].
    pub floored_states: u64,
}

fn spot_vol_model(rho: f64, dynamics: Option<VolDynamics>) -> Result<ModelDynamics> {
    ModelDynamics::new(
        2,
        2,
        move |_, x: &[f64], mu: &mut [f64]| {
            mu[0] = 0.0;
            mu[1] = dynamics.map_or(0.0, |d| d.beta(x[1]));
        },
        move |_, x: &[f64], s: &mut [f64]| {
            s[0] = x[1].max(ALPHA_FLOOR) * x[0];
            s[1] = 0.0;
            s[2] = 0.0;
            s[3] = dynamics.map_or(0.0, |d| d.gamma(x[1]));
        },
        Correlation::pair(rho)?,
    )
}

pub fn stoch_vol_problem(p: &StochVolParams) -> Result<AdjustmentProblem> {
    p.validate()?;
    let (strike, maturity) = (p.strike, p.maturity);
    let payoff = CashflowSpec::terminal_only(move |x: &[f64]| (x[0] - strike).max(0.0));
    let base = PricingProblem::new(spot_vol_model(p.rho, None)?, payoff.clone(), maturity)?;
    let target = PricingProblem::new(spot_vol_model(p.rho, Some(p.dynamics))?, payoff, maturity)?;
    AdjustmentProblem::new(base, target, move |t, x: &[f64], g: &mut GreekBundle| {
        let (s, alpha) = (x[0], x[1]);
        let tau = (maturity - t).max(0.0);
        fill_call_greeks(g, 0, &bs_call_greeks(s, strike, alpha * alpha * tau)?, 1.0);
        if tau > 0.0 {
            let sv = bs_greeks_sv(s, alpha, tau, strike)?;
            g.grad[1] = sv.vega;
            g.hess[(0, 1)] = sv.vanna;
            g.hess[(1, 0)] = sv.vanna;
            g.hess[(1, 1)] = sv.volga;
        }
        Ok(())
    })
}

fn sample_variance(e: &Estimate) -> f64 {
    e.std_error * e.std_error * e.n_paths as f64
}

pub fn run_gatheral_stoch_vol<E: Executor + ?Sized>(
    p: &StochVolParams,
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<StochVolResult> {
    let problem = stoch_vol_problem(p)?;
    let v0 = bs_call(p.s0, p.strike, p.alpha0 * p.alpha0 * p.maturity)?;
    let grid = TimeGrid::new(p.maturity, cfg.n_steps)?;
    let strike = p.strike;
    let payoff = move |x: &[f64]| (x[0] - strike).max(0.0);
    let samples = sample_functionals(
        &problem.target.model,
        &[p.s0, p.alpha0],
        p.maturity,
        cfg,
        exec,
        |path| BleedAndPayoff::new(&problem, &grid, path, &payoff, Some((1, ALPHA_FLOOR))),
    )?;
    let [u_mc, repriced, _] = crate::mc::estimates_of(&samples);
    let floored_states = samples.iter().map(|s| s[2] as u64).sum();
    Ok(StochVolResult {
        u_mc,
        u_direct: repriced.offset(-v0),
        v0,
        bleed_variance: sample_variance(&u_mc),
        direct_variance: sample_variance(&repriced),
        floored_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bleed::bleed_decomposition;
    use crate::exec::Sequential;

    #[test]
    fn heston_mapping_matches_ito() {
        // dα² = 2α dα + γ̂² dt must give back κ(θ - α²)dt + vα dW
        let d = VolDynamics::Heston {
            kappa: 1.2,
            theta: 0.05,
            v: 0.3,
        };
        let a = 0.22;
        let drift_sq = 2.0 * a * d.beta(a) + d.gamma(a) * d.gamma(a);
        assert!((drift_sq - 1.2 * (0.05 - a * a)).abs() < 1e-15);
        assert!((2.0 * a * d.gamma(a) - 0.3 * a).abs() < 1e-15);
        assert!(d.beta(-1.0).is_finite());
    }

    #[test]
    fn frozen_target_gives_exact_zero() {
        let p = StochVolParams {
            dynamics: VolDynamics::Frozen,
            ..Default::default()
        };
        let r = run_gatheral_stoch_vol(&p, &MonteCarloConfig::new(100, 30, 1), &Sequential).unwrap();
        assert_eq!(r.u_mc, Estimate::exact(0.0, 100));
    }

    #[test]
    fn uncorrelated_driftless_bleed_is_volga_only() {
        let p = StochVolParams {
            rho: 0.0,
            dynamics: VolDynamics::Constant { beta: 0.0, gamma: 0.05 },
            ..Default::default()
        };
        let problem = stoch_vol_problem(&p).unwrap();
        let (s, a, t) = (103.0, 0.21, 0.4);
        let d = bleed_decomposition(&problem, t, &[s, a]).unwrap();
        let volga = bs_greeks_sv(s, a, 1.0 - t, 100.0).unwrap().volga;
        assert_eq!((d.discount_term, d.payoff_term), (0.0, 0.0));
        assert!((d.model_term - 0.5 * 0.05 * 0.05 * volga).abs() < 1e-14);
    }

    #[test]
    fn heston_bleed_matches_direct_repricing() {
        let r = run_gatheral_stoch_vol(
            &StochVolParams::default(),
            &MonteCarloConfig::new(20_000, 200, 4),
            &Sequential,
        )
        .unwrap();
        assert!(r.u_mc.agrees_with(&r.u_direct, 3.0), "{:?} vs {:?}", r.u_mc, r.u_direct);
        assert!(r.bleed_variance < r.direct_variance);
        assert_eq!(r.floored_states, 0);
    }
}
