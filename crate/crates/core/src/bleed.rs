//! The P&L bleed `Z = (L̂ - L)V - (R̂ - R)V + (F̂ - F)` of a base/target pair.

use alloc::string::ToString;
use alloc::sync::Arc;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::model::{generator_difference_from, CoefficientBuffers, GreekBundle, ModelDynamics};

pub type RateFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
pub type FlowFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
pub type TerminalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
/// Fills a [`GreekBundle`] for the base price at `(t, x)`.
pub type PriceOracle = dyn Fn(f64, &[f64], &mut GreekBundle) -> Result<()> + Send + Sync;

/// Discount rate `R`, running payoff `F` and terminal payoff `G`.
#[derive(Clone)]
pub struct CashflowSpec {
    rate: Arc<RateFn>,
    flow: Arc<FlowFn>,
    terminal: Arc<TerminalFn>,
}

impl fmt::Debug for CashflowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CashflowSpec { .. }")
    }
}

impl CashflowSpec {
    pub fn new<R, F, G>(rate: R, flow: F, terminal: G) -> Self
    where
        R: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            rate: Arc::new(rate),
            flow: Arc::new(flow),
            terminal: Arc::new(terminal),
        }
    }

    /// No discounting, no running payoff, terminal payoff `G`.
    pub fn terminal_only<G>(terminal: G) -> Self
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(|_, _| 0.0, |_, _| 0.0, terminal)
    }

    pub fn with_rate<R>(&self, rate: R) -> Self
    where
        R: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            rate: Arc::new(rate),
            ..self.clone()
        }
    }

    pub fn with_flow<F>(&self, flow: F) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            flow: Arc::new(flow),
            ..self.clone()
        }
    }

    /// Whether both specs share the same rate function object.
    pub fn shares_rate(&self, other: &CashflowSpec) -> bool {
        Arc::ptr_eq(&self.rate, &other.rate)
    }

    /// Whether both specs share the same running payoff function object.
    pub fn shares_flow(&self, other: &CashflowSpec) -> bool {
        Arc::ptr_eq(&self.flow, &other.flow)
    }

    #[inline]
    pub fn rate(&self, t: f64, x: &[f64]) -> f64 {
        (self.rate)(t, x)
    }

    #[inline]
    pub fn flow(&self, t: f64, x: &[f64]) -> f64 {
        (self.flow)(t, x)
    }

    #[inline]
    pub fn terminal(&self, x: &[f64]) -> f64 {
        (self.terminal)(x)
    }
}

/// Dynamics plus cashflows up to a horizon.
#[derive(Debug, Clone)]
pub struct PricingProblem {
    pub model: ModelDynamics,
    pub cashflows: CashflowSpec,
    pub horizon: f64,
}

impl PricingProblem {
    pub fn new(model: ModelDynamics, cashflows: CashflowSpec, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid!("horizon must be positive, got {horizon}"));
        }
        Ok(Self {
            model,
            cashflows,
            horizon,
        })
    }
}

/// A terminal payment `G* = Ĝ - G` at an intermediate time `τ ≤ T`, replacing
/// the bleed integral beyond `τ`.
#[derive(Clone)]
pub struct IntermediateHorizon {
    pub tau: f64,
    pub payoff_difference: Arc<TerminalFn>,
}

impl fmt::Debug for IntermediateHorizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntermediateHorizon")
            .field("tau", &self.tau)
            .finish_non_exhaustive()
    }
}

/// Base and target problems on a common domain, and a greek oracle for the
/// base price `V`.
///
/// Unless an [`IntermediateHorizon`] is attached the terminal payoffs are
/// taken to coincide (`Ĝ = G`) and only the bleed is integrated.
#[derive(Clone)]
pub struct AdjustmentProblem {
    pub base: PricingProblem,
    pub target: PricingProblem,
    oracle: Arc<PriceOracle>,
    intermediate: Option<IntermediateHorizon>,
}

impl fmt::Debug for AdjustmentProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdjustmentProblem")
            .field("base", &self.base)
            .field("target", &self.target)
            .field("intermediate", &self.intermediate)
            .finish_non_exhaustive()
    }
}

impl AdjustmentProblem {
    pub fn new<O>(base: PricingProblem, target: PricingProblem, oracle: O) -> Result<Self>
    where
        O: Fn(f64, &[f64], &mut GreekBundle) -> Result<()> + Send + Sync + 'static,
    {
        if base.horizon != target.horizon {
            return Err(invalid!(
                "base horizon {} differs from target horizon {}",
                base.horizon,
                target.horizon
            ));
        }
        if base.model.state_dim() != target.model.state_dim() {
            return Err(invalid!(
                "base has {} state components, target has {}",
                base.model.state_dim(),
                target.model.state_dim()
            ));
        }
        Ok(Self {
            base,
            target,
            oracle: Arc::new(oracle),
            intermediate: None,
        })
    }

    /// Stops the bleed integral at `tau` and pays `G*(X_τ)` there.
    pub fn with_intermediate_horizon<G>(mut self, tau: f64, payoff_difference: G) -> Result<Self>
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(0.0..=self.horizon()).contains(&tau) {
            return Err(invalid!("tau = {tau} outside [0, {}]", self.horizon()));
        }
        self.intermediate = Some(IntermediateHorizon {
            tau,
            payoff_difference: Arc::new(payoff_difference),
        });
        Ok(self)
    }

    pub fn horizon(&self) -> f64 {
        self.base.horizon
    }

    pub fn state_dim(&self) -> usize {
        self.base.model.state_dim()
    }

    pub fn intermediate(&self) -> Option<&IntermediateHorizon> {
        self.intermediate.as_ref()
    }

    /// End of the bleed integral: `τ` when attached, else `T`.
    pub fn integration_horizon(&self) -> f64 {
        self.intermediate.as_ref().map_or(self.horizon(), |i| i.tau)
    }

    pub fn evaluate_oracle(&self, t: f64, x: &[f64], out: &mut GreekBundle) -> Result<()> {
        (self.oracle)(t, x, out).map_err(|e| match e {
            Error::Oracle { .. } => e,
            other => Error::Oracle {
                t,
                message: other.to_string(),
            },
        })?;
        out.symmetrize();
        Ok(())
    }
}

/// Model, discounting and payoff parts of the bleed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BleedDecomposition {
    /// `(L̂ - L)V`
    pub model_term: f64,
    /// `-(R̂ - R)V`
    pub discount_term: f64,
    /// `F̂ - F`
    pub payoff_term: f64,
}

impl BleedDecomposition {
    pub fn total(&self) -> f64 {
        self.model_term + self.discount_term + self.payoff_term
    }
}

/// Scratch space for repeated bleed evaluations on one thread.
#[derive(Debug, Clone)]
pub struct BleedEvaluator {
    greeks: GreekBundle,
    base: CoefficientBuffers,
    target: CoefficientBuffers,
}

impl BleedEvaluator {
    pub fn new(problem: &AdjustmentProblem) -> Self {
        Self {
            greeks: GreekBundle::zeros(problem.state_dim()),
            base: CoefficientBuffers::for_model(&problem.base.model),
            target: CoefficientBuffers::for_model(&problem.target.model),
        }
    }

    pub fn decompose(&mut self, problem: &AdjustmentProblem, t: f64, x: &[f64]) -> Result<BleedDecomposition> {
        problem.evaluate_oracle(t, x, &mut self.greeks)?;
        let (base_model, target_model) = (&problem.base.model, &problem.target.model);
        let model_term = if target_model.shares_coefficients(base_model) {
            0.0
        } else {
            self.base.evaluate(base_model, t, x);
            self.target.evaluate(target_model, t, x);
            generator_difference_from(&self.base, &self.target, &self.greeks)
        };
        let (base, target) = (&problem.base.cashflows, &problem.target.cashflows);
        // a shared pure function contributes exactly nothing
        let rate_diff = if target.shares_rate(base) {
            0.0
        } else {
            target.rate(t, x) - base.rate(t, x)
        };
        let flow_diff = if target.shares_flow(base) {
            0.0
        } else {
            target.flow(t, x) - base.flow(t, x)
        };
        Ok(BleedDecomposition {
            model_term,
            discount_term: -rate_diff * self.greeks.value,
            payoff_term: flow_diff,
        })
    }

    pub fn bleed(&mut self, problem: &AdjustmentProblem, t: f64, x: &[f64]) -> Result<f64> {
        self.decompose(problem, t, x).map(|d| d.total())
    }

    /// Greeks from the most recent evaluation.
    pub fn greeks(&self) -> &GreekBundle {
        &self.greeks
    }
}

fn check_point(problem: &AdjustmentProblem, t: f64, x: &[f64]) -> Result<()> {
    if x.len() != problem.state_dim() {
        return Err(invalid!(
            "state has {} components, problem expects {}",
            x.len(),
            problem.state_dim()
        ));
    }
    if !(0.0..=problem.horizon()).contains(&t) {
        return Err(invalid!("t = {t} outside [0, {}]", problem.horizon()));
    }
    Ok(())
}

/// `Z(t, x)`.
pub fn bleed(problem: &AdjustmentProblem, t: f64, x: &[f64]) -> Result<f64> {
    bleed_decomposition(problem, t, x).map(|d| d.total())
}

pub fn bleed_decomposition(problem: &AdjustmentProblem, t: f64, x: &[f64]) -> Result<BleedDecomposition> {
    check_point(problem, t, x)?;
    BleedEvaluator::new(problem).decompose(problem, t, x)
}
