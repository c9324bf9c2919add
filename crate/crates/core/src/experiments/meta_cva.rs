//! Hazard rate volatility risk on the CVA of a call.
//!
//! State `(λ, S)`. Both the base CVA `U` and the target `Û` discount at `λ` and
//! pay `-λV⁺` with `V = C(S, K, σ_S²(T - t))`; they differ only in the Ho-Lee
//! volatility of `λ` (`σ_λ` versus `σ̂_λ`, drifts `σ²t` keep both calibrated
//! to the flat survival curve `e^{-λ₀T}`). The meta-adjustment
//! `A₀ = E^Q̂[∫ e^{-∫λ} Z dt]` is estimated on the boundary `σ_λ = 0`, where `U`
//! and its greeks are closed-form.

use alloc::sync::Arc;

use crate::bleed::{AdjustmentProblem, CashflowSpec, PricingProblem};
use crate::closed_form::{boundary_cva, boundary_cva_greeks_into, bs_call, CallSpec};
use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::experiments::{require_finite, require_positive};
use crate::mc::{
    sample_functionals, simulate_pnl_paths_sampled, AdjustmentObserver, DiscountedIntegrator, Estimate,
    MonteCarloConfig, PathObserver, PnlEnsemble, TimeGrid,
};
use crate::model::{Correlation, DriftFn, GreekBundle, ModelDynamics};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaCvaParams {
    pub rho_lambda_s: f64,
    pub sigma_lambda_hat: f64,
    /// Base hazard volatility; only the closed-form boundary `0` is supported.
    pub sigma_lambda: f64,
    pub sigma_s: f64,
    pub lambda0: f64,
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
}

impl Default for MetaCvaParams {
    fn default() -> Self {
        Self {
            rho_lambda_s: 0.9,
            sigma_lambda_hat: 0.01,
            sigma_lambda: 0.0,
            sigma_s: 0.2,
            lambda0: 0.05,
            s0: 100.0,
            strike: 100.0,
            maturity: 3.0,
        }
    }
}

impl MetaCvaParams {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.rho_lambda_s) {
            return Err(invalid!("correlation must lie in [-1, 1], got {}", self.rho_lambda_s));
        }
        if !(self.sigma_lambda_hat >= 0.0 && self.sigma_lambda_hat.is_finite()) {
            return Err(invalid!(
                "target hazard volatility must be non-negative, got {}",
                self.sigma_lambda_hat
            ));
        }
        require_finite("sigma_lambda", self.sigma_lambda)?;
        if self.sigma_lambda != 0.0 {
            return Err(Error::Unsupported(alloc::format!(
                "base hazard volatility {} needs future CVA greeks without closed form; only 0 is supported",
                self.sigma_lambda
            )));
        }
        require_positive("sigma_s", self.sigma_s)?;
        require_finite("lambda0", self.lambda0)?;
        require_positive("s0", self.s0)?;
        require_positive("strike", self.strike)?;
        require_positive("maturity", self.maturity)
    }

    fn call(&self) -> Result<CallSpec> {
        CallSpec::new(self.strike, self.maturity, self.sigma_s)
    }
}

/// Ho-Lee hazard `dλ = σ_λ²t dt + σ_λ dW^λ` with lognormal stock.
pub fn ho_lee_hazard_model(sigma_lambda: f64, sigma_s: f64, rho: f64) -> Result<ModelDynamics> {
    ModelDynamics::new(
        2,
        2,
        move |t, _, mu: &mut [f64]| {
            mu[0] = sigma_lambda * sigma_lambda * t;
            mu[1] = 0.0;
        },
        move |_, x: &[f64], s: &mut [f64]| {
            s[0] = sigma_lambda;
            s[1] = 0.0;
            s[2] = 0.0;
            s[3] = sigma_s * x[1];
        },
        Correlation::pair(rho)?,
    )
}

/// Base and target CVA problems with the boundary CVA greeks as oracle.
pub fn meta_cva_problem(p: &MetaCvaParams) -> Result<AdjustmentProblem> {
    p.validate()?;
    let spec = p.call()?;
    let cashflows = CashflowSpec::new(
        |_, x: &[f64]| x[0],
        move |t, x: &[f64]| {
            let v = bs_call(x[1], spec.strike, spec.variance_at(t)).unwrap_or(f64::NAN);
            -x[0] * v.max(0.0)
        },
        |_| 0.0,
    );
    let base = PricingProblem::new(
        ho_lee_hazard_model(p.sigma_lambda, p.sigma_s, p.rho_lambda_s)?,
        cashflows.clone(),
        p.maturity,
    )?;
    let target = PricingProblem::new(
        ho_lee_hazard_model(p.sigma_lambda_hat, p.sigma_s, p.rho_lambda_s)?,
        cashflows,
        p.maturity,
    )?;
    AdjustmentProblem::new(base, target, move |t, x: &[f64], g: &mut GreekBundle| {
        boundary_cva_greeks_into(t, x[0], x[1], &spec, g)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaCvaResult {
    /// Call price `C(S₀, K, σ_S²T)`.
    pub v0: f64,
    /// Closed-form base CVA.
    pub u0: f64,
    pub a0: Estimate,
    /// Plain simulation of the target CVA `-E^Q̂[∫ e^{-∫λ} λV⁺ dt]` on the same paths.
    pub u_hat_direct: Estimate,
    /// `E^Q̂[e^{-∫₀ᵀλ}]`, which calibration pins to `e^{-λ₀T}`.
    pub survival: Estimate,
    pub survival_ref: f64,
    /// `U₀ + A₀ - Û₀_direct`.
    pub consistency_gap: f64,
    /// `SE(A₀) / SE(Û₀_direct)`.
    pub se_ratio: f64,
}

struct MetaCvaObserver<'a> {
    adj: AdjustmentObserver<'a>,
    direct: DiscountedIntegrator,
    spec: CallSpec,
    path: usize,
}

impl PathObserver for MetaCvaObserver<'_> {
    type Output = [f64; 3];

    fn observe(&mut self, step: usize, t: f64, x: &[f64]) -> Result<()> {
        self.adj.observe(step, t, x)?;
        let v = bs_call(x[1], self.spec.strike, self.spec.variance_at(t)).unwrap_or(f64::NAN);
        let z = -x[0] * v.max(0.0);
        if !z.is_finite() {
            return Err(Error::NonFinite {
                quantity: "direct CVA integrand",
                path: self.path,
                step,
                coordinate: 1,
            });
        }
        self.direct.push(x[0], z);
        Ok(())
    }

    fn finish(self) -> Result<[f64; 3]> {
        let (a, _) = self.adj.finish()?;
        // left-point discount at T: exp(-Σ_{k<n} λ_k Δt) over all of [0, T]
        let survival = self.direct.discount();
        Ok([a, self.direct.cumulative(), survival])
    }
}

pub fn run_meta_cva<E: Executor + ?Sized>(
    p: &MetaCvaParams,
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<MetaCvaResult> {
    let problem = meta_cva_problem(p)?;
    let spec = p.call()?;
    let v0 = bs_call(p.s0, p.strike, spec.variance_at(0.0))?;
    let u0 = boundary_cva(0.0, p.lambda0, p.s0, &spec)?;
    let grid = TimeGrid::new(p.maturity, cfg.n_steps)?;
    let samples = sample_functionals(
        &problem.target.model,
        &[p.lambda0, p.s0],
        p.maturity,
        cfg,
        exec,
        |path| MetaCvaObserver {
            adj: AdjustmentObserver::new(&problem, &grid, path, false),
            direct: DiscountedIntegrator::new(grid.dt()),
            spec,
            path,
        },
    )?;
    let [a0, u_hat_direct, survival] = crate::mc::estimates_of(&samples);
    let se_ratio = if u_hat_direct.std_error > 0.0 {
        a0.std_error / u_hat_direct.std_error
    } else {
        f64::NAN
    };
    Ok(MetaCvaResult {
        v0,
        u0,
        a0,
        u_hat_direct,
        survival,
        survival_ref: libm::exp(-p.lambda0 * p.maturity),
        consistency_gap: u0 + a0.mean - u_hat_direct.mean,
        se_ratio,
    })
}

/// Real-world drift of `(λ, S)`: `(σ̂_λ²t + lambda_shift, stock_drift·S)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RealWorldDrift {
    pub lambda_shift: f64,
    pub stock_drift: f64,
}

/// Pathwise discounted P&L of the unadjusted, hedged CVA position, with the
/// state drifting at `real_world` (the risk-neutral target drift when `None`).
/// Trajectories are kept for the first `keep_paths` paths only.
pub fn run_meta_cva_pnl_paths<E: Executor + ?Sized>(
    p: &MetaCvaParams,
    real_world: Option<RealWorldDrift>,
    keep_paths: usize,
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<PnlEnsemble> {
    let problem = meta_cva_problem(p)?;
    let drift: Option<Arc<DriftFn>> = match real_world {
        Some(rw) => {
            require_finite("lambda_shift", rw.lambda_shift)?;
            require_finite("stock_drift", rw.stock_drift)?;
            let s2 = p.sigma_lambda_hat * p.sigma_lambda_hat;
            Some(Arc::new(move |t: f64, x: &[f64], mu: &mut [f64]| {
                mu[0] = s2 * t + rw.lambda_shift;
                mu[1] = rw.stock_drift * x[1];
            }))
        }
        None => None,
    };
    simulate_pnl_paths_sampled(&problem, drift, &[p.lambda0, p.s0], cfg, exec, keep_paths)
}
