//! TOML run configurations.
//!
//! ```toml
//! experiment = "meta-cva"
//! output_dir = "out"          # optional, overridable with --output-dir
//!
//! [mc]
//! n_paths = 100000
//! n_steps = 1000
//! seed = 42                   # or a decimal string for seeds above 2^63 - 1
//! antithetic = false
//!
//! [params]
//! sigma_lambda_hat = 0.01
//! ```
//!
//! Every table is strict: unknown keys are errors reported with their line.
//! Omitted keys take the defaults of the experiment.

use std::fmt;
use std::path::{Path, PathBuf};

use bleed_core::experiments::{
    BkCvaParams, DiscountingParams, HazardSpec, LocalVol, LocalVolParams, MetaCvaParams, RateCurve, RealWorldDrift,
    StochVolParams, TauInvarianceParams, VolDynamics,
};
use bleed_core::MonteCarloConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: unknown experiment `{name}` (see `bleed list`)")]
    UnknownExperiment { origin: String, name: String },
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output_dir: Option<PathBuf>,
    pub mc: MonteCarloConfig,
    /// The resolved parameter table, echoed into `results.json`.
    pub params: serde_json::Value,
}

/// Trajectories written to `pnl_paths.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvSampling {
    pub paths: usize,
    /// Keep every `stride`-th grid point (the final point is always kept).
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    GatheralLocalVol(LocalVolParams),
    GatheralStochVol(StochVolParams),
    Piterbarg(DiscountingParams),
    BkCva(BkCvaParams),
    MetaCva {
        params: MetaCvaParams,
        csv: CsvSampling,
    },
    TauInvariance(TauInvarianceParams),
    PnlPaths {
        params: MetaCvaParams,
        real_world: Option<RealWorldDrift>,
        csv: CsvSampling,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::GatheralLocalVol(_) => "gatheral-local-vol",
            Experiment::GatheralStochVol(_) => "gatheral-stoch-vol",
            Experiment::Piterbarg(_) => "piterbarg",
            Experiment::BkCva(_) => "bk-cva",
            Experiment::MetaCva { .. } => "meta-cva",
            Experiment::TauInvariance(_) => "tau-invariance",
            Experiment::PnlPaths { .. } => "pnl-paths",
        }
    }
}

/// Seed given as a TOML integer or, beyond the signed range, as a string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SeedRepr", into = "u64")]
pub struct Seed(pub u64);

#[derive(Deserialize)]
#[serde(untagged)]
enum SeedRepr {
    Int(i64),
    Text(String),
}

impl TryFrom<SeedRepr> for Seed {
    type Error = String;

    fn try_from(r: SeedRepr) -> Result<Self, String> {
        match r {
            SeedRepr::Int(i) => u64::try_from(i)
                .map(Seed)
                .map_err(|_| format!("seed must be non-negative, got {i}")),
            SeedRepr::Text(s) => s
                .trim()
                .parse::<u64>()
                .map(Seed)
                .map_err(|e| format!("seed `{s}` is not an unsigned 64-bit integer: {e}")),
        }
    }
}

impl From<Seed> for u64 {
    fn from(s: Seed) -> u64 {
        s.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: Seed,
    pub antithetic: bool,
}

impl Default for McSection {
    fn default() -> Self {
        let d = MonteCarloConfig::default();
        Self {
            n_paths: d.n_paths,
            n_steps: d.n_steps,
            seed: Seed(d.seed),
            antithetic: d.antithetic,
        }
    }
}

impl From<&McSection> for MonteCarloConfig {
    fn from(m: &McSection) -> Self {
        MonteCarloConfig::new(m.n_paths, m.n_steps, m.seed.0).with_antithetic(m.antithetic)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LocalVolSpec {
    Constant { value: f64 },
    Step { switch_time: f64, before: f64, after: f64 },
    DownBump { base: f64, bump: f64, barrier: f64 },
}

impl From<&LocalVolSpec> for LocalVol {
    fn from(s: &LocalVolSpec) -> Self {
        match *s {
            LocalVolSpec::Constant { value } => LocalVol::Constant(value),
            LocalVolSpec::Step {
                switch_time,
                before,
                after,
            } => LocalVol::Step {
                switch_time,
                before,
                after,
            },
            LocalVolSpec::DownBump { base, bump, barrier } => LocalVol::DownBump { base, bump, barrier },
        }
    }
}

impl From<LocalVol> for LocalVolSpec {
    fn from(v: LocalVol) -> Self {
        match v {
            LocalVol::Constant(value) => LocalVolSpec::Constant { value },
            LocalVol::Step {
                switch_time,
                before,
                after,
            } => LocalVolSpec::Step {
                switch_time,
                before,
                after,
            },
            LocalVol::DownBump { base, bump, barrier } => LocalVolSpec::DownBump { base, bump, barrier },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalVolSection {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub alpha: f64,
    pub alpha_hat: LocalVolSpec,
}

impl Default for LocalVolSection {
    fn default() -> Self {
        let d = LocalVolParams::default();
        Self {
            s0: d.s0,
            strike: d.strike,
            maturity: d.maturity,
            alpha: d.alpha,
            alpha_hat: d.alpha_hat.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VolSpec {
    Frozen,
    Constant { beta: f64, gamma: f64 },
    Heston { kappa: f64, theta: f64, v: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochVolSection {
    pub s0: f64,
    pub alpha0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rho: f64,
    pub dynamics: VolSpec,
}

impl Default for StochVolSection {
    fn default() -> Self {
        let d = StochVolParams::default();
        let dynamics = match d.dynamics {
            VolDynamics::Frozen => VolSpec::Frozen,
            VolDynamics::Constant { beta, gamma } => VolSpec::Constant { beta, gamma },
            VolDynamics::Heston { kappa, theta, v } => VolSpec::Heston { kappa, theta, v },
        };
        Self {
            s0: d.s0,
            alpha0: d.alpha0,
            strike: d.strike,
            maturity: d.maturity,
            rho: d.rho,
            dynamics,
        }
    }
}

/// A constant rate, or `{ level, slope }` for `level + slope·t`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Constant(f64),
    Linear(LinearRate),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRate {
    pub level: f64,
    pub slope: f64,
}

impl From<RateSpec> for RateCurve {
    fn from(r: RateSpec) -> Self {
        match r {
            RateSpec::Constant(v) => RateCurve::Constant(v),
            RateSpec::Linear(l) => RateCurve::Linear {
                level: l.level,
                slope: l.slope,
            },
        }
    }
}

fn rate_spec(c: RateCurve) -> RateSpec {
    match c {
        RateCurve::Constant(v) => RateSpec::Constant(v),
        RateCurve::Linear { level, slope } => RateSpec::Linear(LinearRate { level, slope }),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiterbargSection {
    pub r: RateSpec,
    pub r_hat: RateSpec,
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub sigma_s: f64,
}

impl Default for PiterbargSection {
    fn default() -> Self {
        let d = DiscountingParams::default();
        Self {
            r: rate_spec(d.r),
            r_hat: rate_spec(d.r_hat),
            s0: d.s0,
            strike: d.strike,
            maturity: d.maturity,
            sigma_s: d.sigma_s,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HazardSection {
    Constant { lambda: f64 },
    HoLee { lambda0: f64, sigma: f64, rho: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BkCvaSection {
    pub r: f64,
    pub hazard: HazardSection,
    pub friction: f64,
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub sigma_s: f64,
}

impl Default for BkCvaSection {
    fn default() -> Self {
        let d = BkCvaParams::default();
        let hazard = match d.hazard {
            HazardSpec::Constant(lambda) => HazardSection::Constant { lambda },
            HazardSpec::HoLee { lambda0, sigma, rho } => HazardSection::HoLee { lambda0, sigma, rho },
        };
        Self {
            r: d.r,
            hazard,
            friction: d.friction,
            s0: d.s0,
            strike: d.strike,
            maturity: d.maturity,
            sigma_s: d.sigma_s,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RealWorldSection {
    pub lambda_shift: f64,
    pub stock_drift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaCvaSection {
    pub rho_lambda_s: f64,
    pub sigma_lambda_hat: f64,
    pub sigma_lambda: f64,
    pub sigma_s: f64,
    pub lambda0: f64,
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub csv_paths: usize,
    pub csv_stride: usize,
    /// Real-world drift for the P&L paths (`pnl-paths` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_world: Option<RealWorldSection>,
}

impl Default for MetaCvaSection {
    fn default() -> Self {
        let d = MetaCvaParams::default();
        Self {
            rho_lambda_s: d.rho_lambda_s,
            sigma_lambda_hat: d.sigma_lambda_hat,
            sigma_lambda: d.sigma_lambda,
            sigma_s: d.sigma_s,
            lambda0: d.lambda0,
            s0: d.s0,
            strike: d.strike,
            maturity: d.maturity,
            csv_paths: 100,
            csv_stride: 10,
            real_world: None,
        }
    }
}

impl MetaCvaSection {
    fn params(&self) -> MetaCvaParams {
        MetaCvaParams {
            rho_lambda_s: self.rho_lambda_s,
            sigma_lambda_hat: self.sigma_lambda_hat,
            sigma_lambda: self.sigma_lambda,
            sigma_s: self.sigma_s,
            lambda0: self.lambda0,
            s0: self.s0,
            strike: self.strike,
            maturity: self.maturity,
        }
    }

    fn csv(&self) -> Result<CsvSampling, String> {
        if self.csv_stride == 0 {
            return Err("params.csv_stride must be at least 1".into());
        }
        Ok(CsvSampling {
            paths: self.csv_paths,
            stride: self.csv_stride,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TauInvarianceSection {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub alpha: f64,
    pub alpha_hat: f64,
    /// Stopping times; defaults to `0, T/4, T/2, T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
}

impl Default for TauInvarianceSection {
    fn default() -> Self {
        let d = TauInvarianceParams::default();
        Self {
            s0: d.s0,
            strike: d.strike,
            maturity: d.maturity,
            alpha: d.alpha,
            alpha_hat: d.alpha_hat,
            taus: None,
        }
    }
}

#[derive(Deserialize)]
struct Header {
    experiment: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "P: DeserializeOwned + Default"))]
struct Document<P> {
    #[allow(dead_code)]
    experiment: String,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    mc: McSection,
    #[serde(default)]
    params: P,
}

struct Parsed<P> {
    output_dir: Option<PathBuf>,
    mc: MonteCarloConfig,
    params: P,
}

fn parse_as<P>(text: &str, origin: &str) -> Result<Parsed<P>, ConfigError>
where
    P: DeserializeOwned + Default,
{
    let doc: Document<P> = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
    Ok(Parsed {
        output_dir: doc.output_dir,
        mc: MonteCarloConfig::from(&doc.mc),
        params: doc.params,
    })
}

fn parse_error(origin: &str, e: impl fmt::Display) -> ConfigError {
    ConfigError::Parse {
        origin: origin.to_string(),
        message: e.to_string().trim_end().to_string(),
    }
}

fn echo<P: Serialize>(p: &P) -> serde_json::Value {
    serde_json::to_value(p).expect("parameter tables serialize to JSON")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Parses a config; `origin` names the source in diagnostics.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let header: Header = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
        let invalid = |message: String| ConfigError::Invalid {
            origin: origin.to_string(),
            message,
        };
        let (experiment, output_dir, mc, params) = match header.experiment.as_str() {
            "gatheral-local-vol" => {
                let p = parse_as::<LocalVolSection>(text, origin)?;
                let e = Experiment::GatheralLocalVol(LocalVolParams {
                    s0: p.params.s0,
                    strike: p.params.strike,
                    maturity: p.params.maturity,
                    alpha: p.params.alpha,
                    alpha_hat: (&p.params.alpha_hat).into(),
                });
                (e, p.output_dir, p.mc, echo(&p.params))
            }
            "gatheral-stoch-vol" => {
                let p = parse_as::<StochVolSection>(text, origin)?;
                let s = &p.params;
                let dynamics = match s.dynamics {
                    VolSpec::Frozen => VolDynamics::Frozen,
                    VolSpec::Constant { beta, gamma } => VolDynamics::Constant { beta, gamma },
                    VolSpec::Heston { kappa, theta, v } => VolDynamics::Heston { kappa, theta, v },
                };
                let e = Experiment::GatheralStochVol(StochVolParams {
                    s0: s.s0,
                    alpha0: s.alpha0,
                    strike: s.strike,
                    maturity: s.maturity,
                    rho: s.rho,
                    dynamics,
                });
                (e, p.output_dir, p.mc, echo(&p.params))
            }
            "piterbarg" => {
                let p = parse_as::<PiterbargSection>(text, origin)?;
                let s = &p.params;
                let e = Experiment::Piterbarg(DiscountingParams {
                    r: s.r.into(),
                    r_hat: s.r_hat.into(),
                    s0: s.s0,
                    strike: s.strike,
                    maturity: s.maturity,
                    sigma_s: s.sigma_s,
                });
                (e, p.output_dir, p.mc, echo(&p.params))
            }
            "bk-cva" => {
                let p = parse_as::<BkCvaSection>(text, origin)?;
                let s = &p.params;
                let hazard = match s.hazard {
                    HazardSection::Constant { lambda } => HazardSpec::Constant(lambda),
                    HazardSection::HoLee { lambda0, sigma, rho } => HazardSpec::HoLee { lambda0, sigma, rho },
                };
                let e = Experiment::BkCva(BkCvaParams {
                    r: s.r,
                    hazard,
                    friction: s.friction,
                    s0: s.s0,
                    strike: s.strike,
                    maturity: s.maturity,
                    sigma_s: s.sigma_s,
                });
                (e, p.output_dir, p.mc, echo(&p.params))
            }
            "meta-cva" => {
                let p = parse_as::<MetaCvaSection>(text, origin)?;
                if p.params.real_world.is_some() {
                    return Err(invalid(
                        "params.real_world applies to the pnl-paths experiment only".into(),
                    ));
                }
                let e = Experiment::MetaCva {
                    params: p.params.params(),
                    csv: p.params.csv().map_err(invalid)?,
                };
                (e, p.output_dir, p.mc, echo(&p.params))
            }
            "pnl-paths" => {
                let p = parse_as::<MetaCvaSection>(text, origin)?;
                let e = Experiment::PnlPaths {
                    params: p.params.params(),
                    real_world: p.params.real_world.map(|r| RealWorldDrift {
                        lambda_shift: r.lambda_shift,
                        stock_drift: r.stock_drift,
                    }),
                    csv: p.params.csv().map_err(invalid)?,
                };
                (e, p.output_dir, p.mc, echo(&p.params))
            }
            "tau-invariance" => {
                let p = parse_as::<TauInvarianceSection>(text, origin)?;
                let s = &p.params;
                let taus = s
                    .taus
                    .clone()
                    .unwrap_or_else(|| vec![0.0, 0.25 * s.maturity, 0.5 * s.maturity, s.maturity]);
                let e = Experiment::TauInvariance(TauInvarianceParams {
                    s0: s.s0,
                    strike: s.strike,
                    maturity: s.maturity,
                    alpha: s.alpha,
                    alpha_hat: s.alpha_hat,
                    taus: taus.clone(),
                });
                let mut params = echo(&p.params);
                params["taus"] = serde_json::json!(taus);
                (e, p.output_dir, p.mc, params)
            }
            other => {
                return Err(ConfigError::UnknownExperiment {
                    origin: origin.to_string(),
                    name: other.to_string(),
                })
            }
        };
        Ok(RunConfig {
            experiment,
            output_dir,
            mc,
            params,
        })
    }
}
