//! Fully wired adjustment experiments, each pairing a Monte Carlo estimate
//! with a closed-form or direct-simulation reference.
//!
//! | experiment | adjustment family |
//! |---|---|
//! | [`local_vol`] | model: constant to local volatility |
//! | [`stoch_vol`] | model: frozen to stochastic volatility |
//! | [`discounting`] | discounting: collateral to funding rate |
//! | [`bk_cva`] | discounting and payoff: CVA, friction costs |
//! | [`meta_cva`] | model adjustment of a CVA: hazard rate volatility |
//! | [`tau_invariance`] | bleed integral stopped early plus terminal price gap |

pub mod bk_cva;
pub mod discounting;
pub mod local_vol;
pub mod meta_cva;
pub mod stoch_vol;
pub mod tau_invariance;

pub use bk_cva::{run_bk_cva, BkCvaParams, BkCvaResult, HazardSpec};
pub use discounting::{run_piterbarg_discounting, DiscountingParams, DiscountingResult, RateCurve};
pub use local_vol::{run_gatheral_local_vol, LocalVol, LocalVolParams, LocalVolResult};
pub use meta_cva::{run_meta_cva, run_meta_cva_pnl_paths, MetaCvaParams, MetaCvaResult, RealWorldDrift};
pub use stoch_vol::{run_gatheral_stoch_vol, StochVolParams, StochVolResult, VolDynamics};
pub use tau_invariance::{run_tau_invariance, TauInvarianceParams, TauInvarianceResult, TauPoint};

use crate::bleed::AdjustmentProblem;
use crate::closed_form::CallGreeks;
use crate::error::{invalid, Result};
use crate::mc::{AdjustmentObserver, PathObserver, TimeGrid};
use crate::model::{Correlation, GreekBundle, ModelDynamics};

/// `dS = vol(t, S) S dW` with no drift.
pub fn lognormal_model<V>(vol: V) -> Result<ModelDynamics>
where
    V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
{
    ModelDynamics::new(
        1,
        1,
        |_, _, mu: &mut [f64]| mu[0] = 0.0,
        move |t, x: &[f64], sigma: &mut [f64]| sigma[0] = vol(t, x[0]) * x[0],
        Correlation::identity(1),
    )
}

/// Writes `df · C` and its spot delta and gamma at state coordinate `s_index`,
/// zeroing every other entry.
pub(crate) fn fill_call_greeks(g: &mut GreekBundle, s_index: usize, c: &CallGreeks, df: f64) {
    g.clear();
    g.value = df * c.price;
    g.grad[s_index] = df * c.delta;
    g.hess[(s_index, s_index)] = df * c.gamma;
}

pub(crate) fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid!("{name} must be positive and finite, got {v}"))
    }
}

pub(crate) fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid!("{name} must be finite, got {v}"))
    }
}

/// Bleed integral, a terminal payoff and the number of visited states with
/// coordinate `floor.0` below `floor.1`, all from one path.
pub(crate) struct BleedAndPayoff<'a, G> {
    adj: AdjustmentObserver<'a>,
    payoff: &'a G,
    floor: Option<(usize, f64)>,
    last: usize,
    payoff_value: f64,
    below_floor: f64,
}

impl<'a, G> BleedAndPayoff<'a, G> {
    pub(crate) fn new(
        problem: &'a AdjustmentProblem,
        grid: &TimeGrid,
        path: usize,
        payoff: &'a G,
        floor: Option<(usize, f64)>,
    ) -> Self {
        Self {
            adj: AdjustmentObserver::new(problem, grid, path, false),
            payoff,
            floor,
            last: grid.n_steps,
            payoff_value: 0.0,
            below_floor: 0.0,
        }
    }
}

impl<G: Fn(&[f64]) -> f64> PathObserver for BleedAndPayoff<'_, G> {
    type Output = [f64; 3];

    fn observe(&mut self, step: usize, t: f64, x: &[f64]) -> Result<()> {
        self.adj.observe(step, t, x)?;
        if let Some((i, level)) = self.floor {
            if x[i] < level {
                self.below_floor += 1.0;
            }
        }
        if step == self.last {
            self.payoff_value = (self.payoff)(x);
        }
        Ok(())
    }

    fn finish(self) -> Result<[f64; 3]> {
        let (bleed, _) = self.adj.finish()?;
        Ok([bleed, self.payoff_value, self.below_floor])
    }
}
