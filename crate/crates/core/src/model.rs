//! Itô model coefficients, covariation and generator application.
//!
//! A model is `dX = μ(t,X) dt + σ(t,X) dW` with `d⟨W⟩ = ρ dt`. Its generator
//! acts on a [`GreekBundle`] as `L V = μ·∂ₓV + ½ a:∂ₓₓV` with covariation
//! `a = σ ρ σᵀ`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, Matrix};

/// Added once to the diagonal of a correlation matrix whose Cholesky
/// factorisation fails.
pub const CORRELATION_JITTER: f64 = 1e-12;

const CORRELATION_TOL: f64 = 1e-12;

/// Drift `μ(t, x)` written into an `n`-vector.
pub type DriftFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// Diffusion `σ(t, x)` written into an `n × d` row-major buffer.
pub type DiffusionFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A point `(t, x)` of the space-time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub t: f64,
    pub x: Vec<f64>,
}

impl StateVector {
    pub fn new(t: f64, x: Vec<f64>) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid!("time must be finite and non-negative, got {t}"));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(invalid!("state component {i} is not finite"));
        }
        Ok(Self { t, x })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Validated Brownian correlation matrix together with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    rho: Matrix,
    factor: Matrix,
    jittered: bool,
}

impl Correlation {
    pub fn new(rho: Matrix) -> Result<Self> {
        if !rho.is_square() {
            return Err(invalid!("correlation matrix must be square"));
        }
        if rho.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(invalid!("correlation matrix has non-finite entries"));
        }
        let d = rho.rows();
        if rho.asymmetry() > CORRELATION_TOL {
            return Err(invalid!("correlation matrix is not symmetric"));
        }
        for i in 0..d {
            if (rho[(i, i)] - 1.0).abs() > CORRELATION_TOL {
                return Err(invalid!("correlation diagonal entry {i} is {}, not 1", rho[(i, i)]));
            }
        }
        match rho.cholesky() {
            Ok(factor) => Ok(Self {
                rho,
                factor,
                jittered: false,
            }),
            Err(_) => {
                let mut bumped = rho.clone();
                for i in 0..d {
                    bumped[(i, i)] += CORRELATION_JITTER;
                }
                let factor = bumped.cholesky().map_err(|e| {
                    Error::ModelSpec(alloc::format!("correlation matrix not factorisable after jitter: {e}"))
                })?;
                Ok(Self {
                    rho,
                    factor,
                    jittered: true,
                })
            }
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            rho: Matrix::identity(d),
            factor: Matrix::identity(d),
            jittered: false,
        }
    }

    /// Two factors with correlation `rho` between them.
    pub fn pair(rho: f64) -> Result<Self> {
        Self::new(Matrix::from_rows(&[[1.0, rho], [rho, 1.0]]))
    }

    pub fn dim(&self) -> usize {
        self.rho.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rho
    }

    /// Lower Cholesky factor used to correlate independent normals.
    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    /// Whether the diagonal jitter was needed to factorise.
    pub fn jittered(&self) -> bool {
        self.jittered
    }
}

/// Drift, diffusion and correlation of an `n`-dimensional Itô process driven
/// by a `d`-dimensional Brownian motion.
///
/// Coefficient closures must be pure; models are shared across worker threads.
#[derive(Clone)]
pub struct ModelDynamics {
    n: usize,
    d: usize,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    correlation: Correlation,
}

impl fmt::Debug for ModelDynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelDynamics")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("correlation", &self.correlation.matrix())
            .finish_non_exhaustive()
    }
}

impl ModelDynamics {
    pub fn new<M, S>(n: usize, d: usize, drift: M, diffusion: S, correlation: Correlation) -> Result<Self>
    where
        M: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if n == 0 || d == 0 {
            return Err(invalid!("state and Brownian dimensions must be positive"));
        }
        if correlation.dim() != d {
            return Err(invalid!(
                "correlation is {0}x{0} but the model has {d} Brownian factors",
                correlation.dim()
            ));
        }
        Ok(Self {
            n,
            d,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            correlation,
        })
    }

    /// `dX = 0`: every coefficient vanishes.
    pub fn frozen(n: usize) -> Self {
        Self {
            n,
            d: n,
            drift: Arc::new(|_, _, out: &mut [f64]| out.fill(0.0)),
            diffusion: Arc::new(|_, _, out: &mut [f64]| out.fill(0.0)),
            correlation: Correlation::identity(n),
        }
    }

    /// Same diffusion and correlation, different drift.
    pub fn with_drift<M>(&self, drift: M) -> Self
    where
        M: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            drift: Arc::new(drift),
            ..self.clone()
        }
    }

    pub fn with_shared_drift(&self, drift: Arc<DriftFn>) -> Self {
        Self { drift, ..self.clone() }
    }

    /// True when both models hold the same drift, diffusion and correlation,
    /// so their generators coincide exactly.
    pub fn shares_coefficients(&self, other: &ModelDynamics) -> bool {
        Arc::ptr_eq(&self.drift, &other.drift)
            && Arc::ptr_eq(&self.diffusion, &other.diffusion)
            && self.correlation == other.correlation
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn brownian_dim(&self) -> usize {
        self.d
    }

    pub fn correlation(&self) -> &Correlation {
        &self.correlation
    }

    #[inline]
    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }

    #[inline]
    pub fn diffusion_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, out)
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(invalid!("state has {} components, model expects {}", x.len(), self.n));
        }
        Ok(())
    }
}

/// Instantaneous covariation `a = σ ρ σᵀ` of the state process.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariationMatrix(Matrix);

impl CovariationMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Value, gradient and Hessian of a price at one space-time point.
#[derive(Debug, Clone, PartialEq)]
pub struct GreekBundle {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Matrix,
}

impl GreekBundle {
    /// Builds a bundle, replacing the Hessian by `(H + Hᵀ)/2`.
    pub fn new(value: f64, grad: Vec<f64>, hess: Matrix) -> Result<Self> {
        let n = grad.len();
        if hess.rows() != n || hess.cols() != n {
            return Err(invalid!(
                "hessian is {}x{} but gradient has {n} components",
                hess.rows(),
                hess.cols()
            ));
        }
        let mut g = Self { value, grad, hess };
        g.symmetrize();
        Ok(g)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; n],
            hess: Matrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn clear(&mut self) {
        self.value = 0.0;
        self.grad.fill(0.0);
        self.hess.as_mut_slice().fill(0.0);
    }

    pub fn symmetrize(&mut self) {
        let n = self.grad.len();
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (self.hess[(i, j)] + self.hess[(j, i)]);
                self.hess[(i, j)] = m;
                self.hess[(j, i)] = m;
            }
        }
    }
}

/// Reusable buffers holding `μ`, `σ` and `a` of one model at one point.
#[derive(Debug, Clone)]
pub struct CoefficientBuffers {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub covariation: Matrix,
}

impl CoefficientBuffers {
    pub fn for_model(model: &ModelDynamics) -> Self {
        Self {
            drift: vec![0.0; model.n],
            diffusion: vec![0.0; model.n * model.d],
            covariation: Matrix::zeros(model.n, model.n),
        }
    }

    /// Evaluates drift, diffusion and covariation at `(t, x)`.
    pub fn evaluate(&mut self, model: &ModelDynamics, t: f64, x: &[f64]) {
        model.drift_into(t, x, &mut self.drift);
        model.diffusion_into(t, x, &mut self.diffusion);
        assemble_covariation(
            model.n,
            model.d,
            &self.diffusion,
            model.correlation.matrix(),
            &mut self.covariation,
        );
    }

    /// `μ·grad + ½ a:hess` for the coefficients currently held.
    pub fn generator(&self, greeks: &GreekBundle) -> f64 {
        dot(&self.drift, &greeks.grad) + 0.5 * self.covariation.frobenius_dot(&greeks.hess)
    }
}

fn assemble_covariation(n: usize, d: usize, sigma: &[f64], rho: &Matrix, out: &mut Matrix) {
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..d {
                let sik = sigma[i * d + k];
                if sik == 0.0 {
                    continue;
                }
                for l in 0..d {
                    s += rho[(k, l)] * sik * sigma[j * d + l];
                }
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
}

/// `a_ij = Σ_kl ρ_kl σ_ik σ_jl` at `(t, x)`.
pub fn covariation(model: &ModelDynamics, t: f64, x: &[f64]) -> Result<CovariationMatrix> {
    model.check_state(x)?;
    let mut buf = CoefficientBuffers::for_model(model);
    buf.evaluate(model, t, x);
    Ok(CovariationMatrix(buf.covariation))
}

/// Applies the generator `L = μ·∂ₓ + ½ a:∂ₓₓ` to a greek bundle.
pub fn apply_generator(model: &ModelDynamics, greeks: &GreekBundle, t: f64, x: &[f64]) -> Result<f64> {
    model.check_state(x)?;
    if greeks.dim() != model.n {
        return Err(invalid!(
            "greeks have dimension {}, model has {}",
            greeks.dim(),
            model.n
        ));
    }
    let mut buf = CoefficientBuffers::for_model(model);
    buf.evaluate(model, t, x);
    Ok(buf.generator(greeks))
}

/// `(L̂ - L)V = (μ̂ - μ)·∂ₓV + ½ (â - a):∂ₓₓV`.
pub fn generator_difference(
    base: &ModelDynamics,
    target: &ModelDynamics,
    greeks: &GreekBundle,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    if base.n != target.n {
        return Err(invalid!(
            "base model has {} state components, target has {}",
            base.n,
            target.n
        ));
    }
    base.check_state(x)?;
    if greeks.dim() != base.n {
        return Err(invalid!(
            "greeks have dimension {}, models have {}",
            greeks.dim(),
            base.n
        ));
    }
    let mut b = CoefficientBuffers::for_model(base);
    let mut tb = CoefficientBuffers::for_model(target);
    b.evaluate(base, t, x);
    tb.evaluate(target, t, x);
    Ok(generator_difference_from(&b, &tb, greeks))
}

/// Generator difference from pre-evaluated coefficient buffers.
pub fn generator_difference_from(base: &CoefficientBuffers, target: &CoefficientBuffers, greeks: &GreekBundle) -> f64 {
    let n = greeks.dim();
    let mut first = 0.0;
    for i in 0..n {
        first += (target.drift[i] - base.drift[i]) * greeks.grad[i];
    }
    let ta = target.covariation.as_slice();
    let ba = base.covariation.as_slice();
    let h = greeks.hess.as_slice();
    let mut second = 0.0;
    for k in 0..n * n {
        second += (ta[k] - ba[k]) * h[k];
    }
    first + 0.5 * second
}
