//! Constant Black-Scholes volatility `α` adjusted to a local volatility
//! `α̂(t, S)`. The bleed is the gamma term `½(α̂² - α²)S² ∂_SS V`.

use crate::bleed::{AdjustmentProblem, CashflowSpec, PricingProblem};
use crate::closed_form::{bs_call, bs_call_greeks};
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::experiments::{fill_call_greeks, lognormal_model, require_positive, BleedAndPayoff};
use crate::mc::{estimate_functionals, Estimate, MonteCarloConfig, TimeGrid};
use crate::model::GreekBundle;

/// Target volatility surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalVol {
    Constant(f64),
    /// `before` up to `switch_time`, `after` from then on.
    Step {
        switch_time: f64,
        before: f64,
        after: f64,
    },
    /// `base + bump` below the barrier, `base` at or above it.
    DownBump {
        base: f64,
        bump: f64,
        barrier: f64,
    },
}

impl LocalVol {
    #[inline]
    pub fn vol(&self, t: f64, s: f64) -> f64 {
        match *self {
            LocalVol::Constant(a) => a,
            LocalVol::Step {
                switch_time,
                before,
                after,
            } => {
                if t < switch_time {
                    before
                } else {
                    after
                }
            }
            LocalVol::DownBump { base, bump, barrier } => {
                if s < barrier {
                    base + bump
                } else {
                    base
                }
            }
        }
    }

    /// `∫₀ᵀ α̂² dt` when the surface does not depend on the spot.
    pub fn integrated_variance(&self, horizon: f64) -> Option<f64> {
        match *self {
            LocalVol::Constant(a) => Some(a * a * horizon),
            LocalVol::Step {
                switch_time,
                before,
                after,
            } => {
                let cut = switch_time.clamp(0.0, horizon);
                Some(before * before * cut + after * after * (horizon - cut))
            }
            LocalVol::DownBump { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LocalVol::Constant(a) => a >= 0.0 && a.is_finite(),
            LocalVol::Step {
                switch_time,
                before,
                after,
            } => switch_time.is_finite() && before >= 0.0 && after >= 0.0 && before.is_finite() && after.is_finite(),
            LocalVol::DownBump { base, bump, barrier } => {
                base >= 0.0 && base + bump >= 0.0 && base.is_finite() && bump.is_finite() && barrier.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid!("local volatility {self:?} must be finite and non-negative"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalVolParams {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub alpha: f64,
    pub alpha_hat: LocalVol,
}

impl Default for LocalVolParams {
    fn default() -> Self {
        Self {
            s0: 100.0,
            strike: 100.0,
            maturity: 1.0,
            alpha: 0.2,
            alpha_hat: LocalVol::Step {
                switch_time: 0.5,
                before: 0.2,
                after: 0.25,
            },
        }
    }
}

impl LocalVolParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("s0", self.s0)?;
        require_positive("strike", self.strike)?;
        require_positive("maturity", self.maturity)?;
        require_positive("alpha", self.alpha)?;
        self.alpha_hat.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalVolResult {
    /// Bleed-integral estimate of `U₀`.
    pub u_mc: Estimate,
    /// `C(S₀, K, ∫α̂²) - C(S₀, K, α²T)` for spot-independent surfaces.
    pub u_ref: Option<f64>,
    /// Plain repricing `E[(S_T - K)⁺] - C(S₀, K, α²T)` on the same paths.
    pub u_direct: Estimate,
    pub v0: f64,
}

/// Base constant-vol and target local-vol problems with the Black-Scholes
/// greek oracle.
pub fn local_vol_problem(p: &LocalVolParams) -> Result<AdjustmentProblem> {
    p.validate()?;
    let (alpha, surface, strike, maturity) = (p.alpha, p.alpha_hat, p.strike, p.maturity);
    let payoff = CashflowSpec::terminal_only(move |x: &[f64]| (x[0] - strike).max(0.0));
    let base = PricingProblem::new(lognormal_model(move |_, _| alpha)?, payoff.clone(), maturity)?;
    let target = PricingProblem::new(lognormal_model(move |t, s| surface.vol(t, s))?, payoff, maturity)?;
    AdjustmentProblem::new(base, target, move |t, x: &[f64], g: &mut GreekBundle| {
        let v = alpha * alpha * (maturity - t).max(0.0);
        fill_call_greeks(g, 0, &bs_call_greeks(x[0], strike, v)?, 1.0);
        Ok(())
    })
}

pub fn run_gatheral_local_vol<E: Executor + ?Sized>(
    p: &LocalVolParams,
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<LocalVolResult> {
    let problem = local_vol_problem(p)?;
    let v0 = bs_call(p.s0, p.strike, p.alpha * p.alpha * p.maturity)?;
    let u_ref = match p.alpha_hat.integrated_variance(p.maturity) {
        Some(var) => Some(bs_call(p.s0, p.strike, var)? - v0),
        None => None,
    };
    let grid = TimeGrid::new(p.maturity, cfg.n_steps)?;
    let strike = p.strike;
    let payoff = move |x: &[f64]| (x[0] - strike).max(0.0);
    let [u_mc, repriced, _] = estimate_functionals(&problem.target.model, &[p.s0], p.maturity, cfg, exec, |path| {
        BleedAndPayoff::new(&problem, &grid, path, &payoff, None)
    })?;
    Ok(LocalVolResult {
        u_mc,
        u_ref,
        u_direct: repriced.offset(-v0),
        v0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bleed::bleed_decomposition;
    use crate::exec::Sequential;

    #[test]
    fn integrated_variance_of_step() {
        let s = LocalVol::Step {
            switch_time: 0.5,
            before: 0.2,
            after: 0.25,
        };
        assert!((s.integrated_variance(1.0).unwrap() - (0.02 + 0.03125)).abs() < 1e-15);
        assert_eq!(
            LocalVol::DownBump {
                base: 0.2,
                bump: 0.1,
                barrier: 90.0
            }
            .vol(0.0, 89.0),
            0.30000000000000004
        );
    }

    #[test]
    fn unchanged_vol_gives_exact_zero() {
        let p = LocalVolParams {
            alpha_hat: LocalVol::Constant(0.2),
            ..Default::default()
        };
        let r = run_gatheral_local_vol(&p, &MonteCarloConfig::new(200, 50, 1), &Sequential).unwrap();
        assert_eq!(r.u_mc, Estimate::exact(0.0, 200));
        assert_eq!(r.u_ref, Some(0.0));
    }

    #[test]
    fn bleed_is_pure_gamma_term() {
        let problem = local_vol_problem(&LocalVolParams::default()).unwrap();
        let d = bleed_decomposition(&problem, 0.75, &[104.0]).unwrap();
        assert_eq!((d.discount_term, d.payoff_term), (0.0, 0.0));
        let gamma = bs_call_greeks(104.0, 100.0, 0.04 * 0.25).unwrap().gamma;
        let expected = 0.5 * (0.0625 - 0.04) * 104.0 * 104.0 * gamma;
        assert!((d.model_term - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn step_vol_matches_closed_form() {
        let r = run_gatheral_local_vol(
            &LocalVolParams::default(),
            &MonteCarloConfig::new(20_000, 200, 7),
            &Sequential,
        )
        .unwrap();
        let u_ref = r.u_ref.unwrap();
        assert!(u_ref > 0.0);
        assert!(r.u_mc.within(u_ref, 3.0), "{:?} vs {u_ref}", r.u_mc);
    }
}
