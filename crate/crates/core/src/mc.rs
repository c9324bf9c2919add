//! Euler–Maruyama path simulation and discounted bleed integration.
//!
//! Every path draws from its own counter-based stream ([`PathRng`]) and
//! per-path results are reduced in path order, so estimates are bit-identical
//! for a given `(seed, config, problem)` whatever the [`Executor`].
//!
//! Along a path on the uniform grid `t_k = k Δt` the discounted bleed is
//! integrated with the trapezoid rule on `D_k Z_k`, where the discount factor
//! `D_k = exp(-Σ_{j<k} R̂(t_j, X_j) Δt)` only uses rates already observed.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::bleed::{AdjustmentProblem, BleedEvaluator};
use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::model::{DriftFn, ModelDynamics};
use crate::rng::PathRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Simulate each path together with its mirror (all draws negated) and
    /// average the pair. `n_paths` then counts pairs.
    pub antithetic: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 1_000,
            seed: 42,
            antithetic: false,
        }
    }
}

impl MonteCarloConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
            antithetic: false,
        }
    }

    pub fn with_antithetic(self, antithetic: bool) -> Self {
        Self { antithetic, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(invalid!("n_paths must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(invalid!("n_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl Estimate {
    /// Mean and `s/√n` of the samples, summed in order. A single sample has
    /// zero standard error.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                std_error: 0.0,
                n_paths: 0,
            };
        }
        // identical samples are reported as an exact value; summing them can
        // otherwise leave rounding noise in the mean and a spurious SE
        if samples.iter().all(|&x| x == samples[0]) {
            return Self::exact(samples[0], n);
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            libm::sqrt(ss / (n - 1) as f64 / n as f64)
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            n_paths: n,
        }
    }

    pub fn exact(value: f64, n_paths: usize) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            n_paths,
        }
    }

    /// The same estimate shifted by a known constant.
    pub fn offset(self, c: f64) -> Self {
        Self {
            mean: self.mean + c,
            ..self
        }
    }

    /// `|mean - reference| ≤ k·SE`.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.std_error
    }

    /// `|mean - other.mean| ≤ k·(SE + SE_other)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * (self.std_error + other.std_error)
    }
}

/// Which dynamics drive the paths of an adjustment estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    /// `Q̂`, the general case.
    #[default]
    Target,
    /// `Q`, legitimate only when `L̂ = L`.
    Base,
}

/// Uniform grid `t_k = k·horizon/n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(invalid!("horizon must be finite and non-negative, got {horizon}"));
        }
        if n_steps == 0 {
            return Err(invalid!("n_steps must be at least 1"));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

/// Receives the states of one path in time order.
pub trait PathObserver {
    type Output: Send;

    fn observe(&mut self, step: usize, t: f64, x: &[f64]) -> Result<()>;

    fn finish(self) -> Result<Self::Output>;
}

struct EulerStepper<'a> {
    model: &'a ModelDynamics,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
}

impl<'a> EulerStepper<'a> {
    fn new(model: &'a ModelDynamics) -> Self {
        let (n, d) = (model.state_dim(), model.brownian_dim());
        Self {
            model,
            drift: vec![0.0; n],
            diffusion: vec![0.0; n * d],
            z: vec![0.0; d],
            w: vec![0.0; d],
        }
    }

    /// `x ← x + μ(t,x)Δt + σ(t,x) L z √Δt` with `L Lᵀ = ρ`.
    fn step(&mut self, t: f64, dt: f64, sqrt_dt: f64, x: &mut [f64], rng: &mut PathRng) {
        let d = self.z.len();
        self.model.drift_into(t, x, &mut self.drift);
        self.model.diffusion_into(t, x, &mut self.diffusion);
        rng.fill_normals(&mut self.z);
        let l = self.model.correlation().factor();
        for i in 0..d {
            let mut s = 0.0;
            for k in 0..=i {
                s += l[(i, k)] * self.z[k];
            }
            self.w[i] = s;
        }
        for (i, xi) in x.iter_mut().enumerate() {
            let row = &self.diffusion[i * d..(i + 1) * d];
            let shock = row.iter().zip(&self.w).fold(0.0, |acc, (r, w)| acc + r * w);
            *xi += self.drift[i] * dt + shock * sqrt_dt;
        }
    }
}

fn run_path<O: PathObserver>(
    model: &ModelDynamics,
    x0: &[f64],
    grid: &TimeGrid,
    mut rng: PathRng,
    path: usize,
    mut observer: O,
) -> Result<O::Output> {
    let dt = grid.dt();
    let sqrt_dt = libm::sqrt(dt);
    let mut stepper = EulerStepper::new(model);
    let mut x = x0.to_vec();
    observer.observe(0, 0.0, &x)?;
    for k in 0..grid.n_steps {
        stepper.step(grid.time(k), dt, sqrt_dt, &mut x, &mut rng);
        if let Some(coordinate) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "state",
                path,
                step: k + 1,
                coordinate,
            });
        }
        observer.observe(k + 1, grid.time(k + 1), &x)?;
    }
    observer.finish()
}

type PairOutput<T> = (T, Option<T>);

/// Simulates every path (and its mirror when antithetic) through a fresh
/// observer from `make(path)`; results come back in path order.
pub fn run_paths<O, F, E>(
    model: &ModelDynamics,
    x0: &[f64],
    horizon: f64,
    cfg: &MonteCarloConfig,
    exec: &E,
    make: F,
) -> Result<Vec<PairOutput<O::Output>>>
where
    O: PathObserver,
    F: Fn(usize) -> O + Sync + Send,
    E: Executor + ?Sized,
{
    cfg.validate()?;
    if x0.len() != model.state_dim() {
        return Err(invalid!(
            "initial state has {} components, model expects {}",
            x0.len(),
            model.state_dim()
        ));
    }
    let grid = TimeGrid::new(horizon, cfg.n_steps)?;
    let seed = cfg.seed;
    let antithetic = cfg.antithetic;
    let results = exec.map_indexed(cfg.n_paths, |p| -> Result<PairOutput<O::Output>> {
        let first = run_path(model, x0, &grid, PathRng::new(seed, p as u64), p, make(p))?;
        let mirror = if antithetic {
            Some(run_path(
                model,
                x0,
                &grid,
                PathRng::antithetic(seed, p as u64),
                p,
                make(p),
            )?)
        } else {
            None
        };
        Ok((first, mirror))
    });
    results.into_iter().collect()
}

/// Per-path values of `N` path functionals, antithetic pairs averaged.
pub fn sample_functionals<const N: usize, O, F, E>(
    model: &ModelDynamics,
    x0: &[f64],
    horizon: f64,
    cfg: &MonteCarloConfig,
    exec: &E,
    make: F,
) -> Result<Vec<[f64; N]>>
where
    O: PathObserver<Output = [f64; N]>,
    F: Fn(usize) -> O + Sync + Send,
    E: Executor + ?Sized,
{
    let pairs = run_paths(model, x0, horizon, cfg, exec, make)?;
    Ok(pairs
        .into_iter()
        .map(|(a, b)| match b {
            Some(b) => core::array::from_fn(|i| 0.5 * (a[i] + b[i])),
            None => a,
        })
        .collect())
}

/// Column-wise estimates of per-path samples.
pub fn estimates_of<const N: usize>(samples: &[[f64; N]]) -> [Estimate; N] {
    core::array::from_fn(|i| {
        let column: Vec<f64> = samples.iter().map(|s| s[i]).collect();
        Estimate::from_samples(&column)
    })
}

pub fn estimate_functionals<const N: usize, O, F, E>(
    model: &ModelDynamics,
    x0: &[f64],
    horizon: f64,
    cfg: &MonteCarloConfig,
    exec: &E,
    make: F,
) -> Result<[Estimate; N]>
where
    O: PathObserver<Output = [f64; N]>,
    F: Fn(usize) -> O + Sync + Send,
    E: Executor + ?Sized,
{
    let samples = sample_functionals(model, x0, horizon, cfg, exec, make)?;
    Ok(estimates_of(&samples))
}

/// States of simulated paths on a common grid, path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    dim: usize,
    states: Vec<f64>,
}

/// One path of a [`PathEnsemble`].
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub index: usize,
    pub times: &'a [f64],
    dim: usize,
    states: &'a [f64],
}

impl<'a> PathView<'a> {
    pub fn state(&self, step: usize) -> &'a [f64] {
        &self.states[step * self.dim..(step + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        let per_path = self.times.len() * self.dim;
        self.states.len().checked_div(per_path).unwrap_or(0)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn path(&self, index: usize) -> PathView<'_> {
        let per_path = self.times.len() * self.dim;
        PathView {
            index,
            times: &self.times,
            dim: self.dim,
            states: &self.states[index * per_path..(index + 1) * per_path],
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = PathView<'_>> {
        (0..self.n_paths()).map(move |i| self.path(i))
    }
}

struct Recorder {
    states: Vec<f64>,
}

impl PathObserver for Recorder {
    type Output = Vec<f64>;

    fn observe(&mut self, _step: usize, _t: f64, x: &[f64]) -> Result<()> {
        self.states.extend_from_slice(x);
        Ok(())
    }

    fn finish(self) -> Result<Vec<f64>> {
        Ok(self.states)
    }
}

/// Euler–Maruyama paths of `model` from `x0` on `[0, horizon]`. With
/// antithetic sampling both members of each pair are kept, adjacent.
pub fn simulate_paths<E: Executor + ?Sized>(
    model: &ModelDynamics,
    x0: &[f64],
    horizon: f64,
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<PathEnsemble> {
    let cap = (cfg.n_steps + 1) * x0.len();
    let pairs = run_paths(model, x0, horizon, cfg, exec, |_| Recorder {
        states: Vec::with_capacity(cap),
    })?;
    let mut states = Vec::with_capacity(pairs.len() * cap * if cfg.antithetic { 2 } else { 1 });
    for (a, b) in pairs {
        states.extend_from_slice(&a);
        if let Some(b) = b {
            states.extend_from_slice(&b);
        }
    }
    Ok(PathEnsemble {
        times: TimeGrid::new(horizon, cfg.n_steps)?.times(),
        dim: x0.len(),
        states,
    })
}

/// Trapezoid accumulation of `∫ D_t Z_t dt` with left-point discounting.
#[derive(Debug, Clone)]
pub struct DiscountedIntegrator {
    dt: f64,
    log_discount: f64,
    discount: f64,
    prev: f64,
    cum: f64,
    started: bool,
}

impl DiscountedIntegrator {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            log_discount: 0.0,
            discount: 1.0,
            prev: 0.0,
            cum: 0.0,
            started: false,
        }
    }

    /// Adds the next grid point with rate `R̂` and bleed `Z` observed there;
    /// returns the cumulative discounted P&L up to it.
    pub fn push(&mut self, rate: f64, bleed: f64) -> f64 {
        self.discount = libm::exp(self.log_discount);
        let f = self.discount * bleed;
        if self.started {
            self.cum += 0.5 * self.dt * (self.prev + f);
        }
        self.prev = f;
        self.started = true;
        self.log_discount -= rate * self.dt;
        self.cum
    }

    pub fn cumulative(&self) -> f64 {
        self.cum
    }

    /// Discount factor at the most recently pushed point.
    pub fn discount(&self) -> f64 {
        self.discount
    }
}

/// Cumulative discounted P&L `∫₀ᵗ e^{-∫₀ᵘ R̂} Z_u du` along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PnlPath {
    pub times: Vec<f64>,
    pub cum_pnl: Vec<f64>,
}

impl PnlPath {
    pub fn terminal(&self) -> f64 {
        self.cum_pnl.last().copied().unwrap_or(0.0)
    }
}

/// Integrates `Z` discounted at `R̂` along a simulated path.
pub fn integrate_discounted_bleed<R, Z>(path: &PathView<'_>, rate: R, mut bleed: Z) -> Result<PnlPath>
where
    R: Fn(f64, &[f64]) -> f64,
    Z: FnMut(f64, &[f64]) -> Result<f64>,
{
    let n = path.len();
    if n < 2 {
        return Err(invalid!("a path needs at least two grid points"));
    }
    let dt = path.times[1] - path.times[0];
    let mut integ = DiscountedIntegrator::new(dt);
    let mut cum_pnl = Vec::with_capacity(n);
    for (k, &t) in path.times.iter().enumerate() {
        let x = path.state(k);
        let z = bleed(t, x)?;
        let r = rate(t, x);
        check_finite(z, "bleed", path.index, k)?;
        check_finite(r, "discount rate", path.index, k)?;
        cum_pnl.push(integ.push(r, z));
    }
    Ok(PnlPath {
        times: path.times.to_vec(),
        cum_pnl,
    })
}

#[inline]
fn check_finite(v: f64, quantity: &'static str, path: usize, step: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            quantity,
            path,
            step,
            coordinate: 0,
        })
    }
}

/// Integrates the discounted bleed of an [`AdjustmentProblem`] along a path,
/// adding the discounted `G*` at an intermediate horizon when configured.
pub struct AdjustmentObserver<'a> {
    problem: &'a AdjustmentProblem,
    evaluator: BleedEvaluator,
    integ: DiscountedIntegrator,
    path: usize,
    last_step: usize,
    terminal: f64,
    record: Option<Vec<f64>>,
}

impl<'a> AdjustmentObserver<'a> {
    pub fn new(problem: &'a AdjustmentProblem, grid: &TimeGrid, path: usize, record: bool) -> Self {
        Self {
            problem,
            evaluator: BleedEvaluator::new(problem),
            integ: DiscountedIntegrator::new(grid.dt()),
            path,
            last_step: grid.n_steps,
            terminal: 0.0,
            record: record.then(|| Vec::with_capacity(grid.n_steps + 1)),
        }
    }
}

impl PathObserver for AdjustmentObserver<'_> {
    type Output = (f64, Option<Vec<f64>>);

    fn observe(&mut self, step: usize, t: f64, x: &[f64]) -> Result<()> {
        let z = self.evaluator.bleed(self.problem, t, x)?;
        let r = self.problem.target.cashflows.rate(t, x);
        check_finite(z, "bleed", self.path, step)?;
        check_finite(r, "discount rate", self.path, step)?;
        let cum = self.integ.push(r, z);
        if let Some(rec) = self.record.as_mut() {
            rec.push(cum);
        }
        if step == self.last_step {
            if let Some(mid) = self.problem.intermediate() {
                let g = (mid.payoff_difference)(x);
                check_finite(g, "terminal payoff difference", self.path, step)?;
                self.terminal = self.integ.discount() * g;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Self::Output> {
        Ok((self.integ.cumulative() + self.terminal, self.record))
    }
}

struct ScalarAdjustment<'a>(AdjustmentObserver<'a>);

impl PathObserver for ScalarAdjustment<'_> {
    type Output = [f64; 1];

    fn observe(&mut self, step: usize, t: f64, x: &[f64]) -> Result<()> {
        self.0.observe(step, t, x)
    }

    fn finish(self) -> Result<[f64; 1]> {
        self.0.finish().map(|(v, _)| [v])
    }
}

fn check_x0(problem: &AdjustmentProblem, x0: &[f64]) -> Result<()> {
    if x0.len() != problem.state_dim() {
        return Err(invalid!(
            "initial state has {} components, problem expects {}",
            x0.len(),
            problem.state_dim()
        ));
    }
    Ok(())
}

/// Monte Carlo estimate of the adjustment `U₀`: the expected discounted bleed
/// (plus discounted `G*` at an intermediate horizon, when attached).
pub fn estimate_adjustment<E: Executor + ?Sized>(
    problem: &AdjustmentProblem,
    measure: Measure,
    x0: &[f64],
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<Estimate> {
    check_x0(problem, x0)?;
    let model = match measure {
        Measure::Target => &problem.target.model,
        Measure::Base => &problem.base.model,
    };
    let grid = TimeGrid::new(problem.integration_horizon(), cfg.n_steps)?;
    let [est] = estimate_functionals(model, x0, grid.horizon, cfg, exec, |p| {
        ScalarAdjustment(AdjustmentObserver::new(problem, &grid, p, false))
    })?;
    Ok(est)
}

/// P&L paths and the estimate of their terminal value.
#[derive(Debug, Clone, PartialEq)]
pub struct PnlEnsemble {
    /// One entry per recorded path; antithetic mirrors follow their partner.
    pub paths: Vec<PnlPath>,
    pub terminal: Estimate,
}

/// Pathwise discounted P&L with paths drifting at `real_world_drift` (the
/// target drift when `None`) while the bleed keeps the problem's coefficients.
pub fn simulate_pnl_paths<E: Executor + ?Sized>(
    problem: &AdjustmentProblem,
    real_world_drift: Option<Arc<DriftFn>>,
    x0: &[f64],
    cfg: &MonteCarloConfig,
    exec: &E,
) -> Result<PnlEnsemble> {
    simulate_pnl_paths_sampled(problem, real_world_drift, x0, cfg, exec, usize::MAX)
}

/// As [`simulate_pnl_paths`], but only the trajectories of the first
/// `keep_paths` paths (or pairs) are kept; the terminal estimate uses all.
pub fn simulate_pnl_paths_sampled<E: Executor + ?Sized>(
    problem: &AdjustmentProblem,
    real_world_drift: Option<Arc<DriftFn>>,
    x0: &[f64],
    cfg: &MonteCarloConfig,
    exec: &E,
    keep_paths: usize,
) -> Result<PnlEnsemble> {
    check_x0(problem, x0)?;
    let model = match real_world_drift {
        Some(drift) => problem.target.model.with_shared_drift(drift),
        None => problem.target.model.clone(),
    };
    let grid = TimeGrid::new(problem.integration_horizon(), cfg.n_steps)?;
    let times = grid.times();
    let pairs = run_paths(&model, x0, grid.horizon, cfg, exec, |p| {
        AdjustmentObserver::new(problem, &grid, p, p < keep_paths)
    })?;
    let mut paths = Vec::with_capacity(pairs.len());
    let mut terminal = Vec::with_capacity(pairs.len());
    let mut push = |rec: Option<Vec<f64>>| {
        if let Some(cum_pnl) = rec {
            paths.push(PnlPath {
                times: times.clone(),
                cum_pnl,
            })
        }
    };
    for ((va, ra), b) in pairs {
        push(ra);
        match b {
            Some((vb, rb)) => {
                push(rb);
                terminal.push(0.5 * (va + vb));
            }
            None => terminal.push(va),
        }
    }
    Ok(PnlEnsemble {
        paths,
        terminal: Estimate::from_samples(&terminal),
    })
}
