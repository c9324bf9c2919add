//! The constant-to-constant volatility adjustment computed by integrating the
//! bleed only up to `τ` and settling the remaining price gap
//! `Ĝ(S_τ) - G(S_τ) = C(S_τ, K, α̂²(T - τ)) - C(S_τ, K, α²(T - τ))` there.
//! The result must not depend on `τ`.

use alloc::vec::Vec;

use crate::closed_form::bs_call;
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::experiments::local_vol::{local_vol_problem, LocalVol, LocalVolParams};
use crate::experiments::require_positive;
use crate::mc::{estimate_adjustment, Estimate, Measure, MonteCarloConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TauInvarianceParams {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub alpha: f64,
    pub alpha_hat: f64,
    /// Stopping times in `[0, maturity]`.
    pub taus: Vec<f64>,
}

impl Default for TauInvarianceParams {
    fn default() -> Self {
        let maturity = 1.0;
        Self {
            s0: 100.0,
            strike: 100.0,
            maturity,
            alpha: 0.2,
            alpha_hat: 0.25,
            taus: alloc::vec![0.0, 0.25 * maturity, 0.5 * maturity, maturity],
        }
    }
}

impl TauInvarianceParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("s0", self.s0)?;
        require_positive("strike", self.strike)?;
        require_positive("maturity", self.maturity)?;
        require_positive("alpha", self.alpha)?;
        require_positive("alpha_hat", self.alpha_hat)?;
        if self.taus.is_empty() {
            return Err(invalid!("at least one stopping time is required"));
        }
        if let Some(bad) = self.taus.iter().find(|t| !(0.0..=self.maturity).contains(*t)) {
            return Err(invalid!("stopping time {bad} outside [0, {}]", self.maturity));
        }
        Ok(())
    }

    fn local_vol(&self) -> LocalVolParams {
        LocalVolParams {
            s0: self.s0,
            strike: self.strike,
            maturity: self.maturity,
            alpha: self.alpha,
            alpha_hat: LocalVol::Constant(self.alpha_hat),
        }
    }

    /// `Ĝ - G` at `τ` for spot `s`.
    pub fn price_gap(&self, tau: f64, s: f64) -> Result<f64> {
        let rest = self.maturity - tau;
        Ok(bs_call(s, self.strike, self.alpha_hat * self.alpha_hat * rest)?
            - bs_call(s, self.strike, self.alpha * self.alpha * rest)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauPoint {
    pub tau: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauInvarianceResult {
    pub points: Vec<TauPoint>,
    /// `C(S₀, K, α̂²T) - C(S₀, K, α²T)`, also the exact value at `τ = 0`.
    pub u_ref: f64,
    /// Largest `|m_i - m_j| / (SE_i + SE_j)` over all pairs (0 when every
    /// pair is exact).
    pub max_pairwise_score: f64,
}

pub fn run_tau_invariance<E: Executor + ?Sized>(
    p: &TauInvarianceParams,
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<TauInvarianceResult> {
    p.validate()?;
    let base_problem = local_vol_problem(&p.local_vol())?;
    let mut points = Vec::with_capacity(p.taus.len());
    for &tau in &p.taus {
        let gap = p.clone();
        let problem = base_problem
            .clone()
            .with_intermediate_horizon(tau, move |x: &[f64]| gap.price_gap(tau, x[0]).unwrap_or(f64::NAN))?;
        let estimate = estimate_adjustment(&problem, Measure::Target, &[p.s0], cfg, exec)?;
        points.push(TauPoint { tau, estimate });
    }
    let mut max_pairwise_score = 0.0_f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let diff = (a.estimate.mean - b.estimate.mean).abs();
            let se = a.estimate.std_error + b.estimate.std_error;
            let score = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            max_pairwise_score = max_pairwise_score.max(score);
        }
    }
    Ok(TauInvarianceResult {
        points,
        u_ref: p.price_gap(0.0, p.s0)?,
        max_pairwise_score,
    })
}
