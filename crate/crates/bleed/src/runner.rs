//! Dispatches a [`RunConfig`] to its experiment and collects the results.

use anyhow::Context;
use bleed_core::experiments::{
    run_bk_cva, run_gatheral_local_vol, run_gatheral_stoch_vol, run_meta_cva, run_meta_cva_pnl_paths,
    run_piterbarg_discounting, run_tau_invariance,
};
use bleed_core::mc::PnlEnsemble;
use bleed_core::{Estimate, Executor, MonteCarloConfig};
use serde_json::{json, Value};

use crate::config::{CsvSampling, Experiment, RunConfig};

/// Everything a run produces besides timing.
#[derive(Debug)]
pub struct RunOutput {
    pub results: Value,
    /// Trajectories for `pnl_paths.csv`.
    pub pnl: Option<(PnlEnsemble, CsvSampling)>,
    pub warnings: Vec<String>,
    /// Short human-readable lines for the terminal.
    pub summary: Vec<String>,
}

pub fn estimate_json(e: &Estimate) -> Value {
    json!({ "mean": e.mean, "std_error": e.std_error, "n_paths": e.n_paths })
}

/// `|estimate - reference|` in standard errors (0 or infinity when exact).
pub fn z_score(e: &Estimate, reference: f64) -> f64 {
    let d = (e.mean - reference).abs();
    if e.std_error > 0.0 {
        d / e.std_error
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn fmt_est(e: &Estimate) -> String {
    format!("{:.6} ± {:.6}", e.mean, e.std_error)
}

fn against(e: &Estimate, reference: f64) -> Value {
    let z = z_score(e, reference);
    // JSON has no infinity
    json!({ "reference": reference, "z_score": if z.is_finite() { Some(z) } else { None } })
}

fn csv_config(cfg: &MonteCarloConfig, csv: CsvSampling) -> MonteCarloConfig {
    MonteCarloConfig {
        n_paths: csv.paths,
        ..*cfg
    }
}

pub fn run_experiment<E: Executor>(config: &RunConfig, exec: &E) -> anyhow::Result<RunOutput> {
    let name = config.experiment.name();
    let cfg = &config.mc;
    cfg.validate()
        .with_context(|| format!("{name}: invalid [mc] section"))?;
    let ctx = || format!("experiment {name} failed");
    let mut warnings = Vec::new();
    let mut pnl = None;
    let (results, summary) = match &config.experiment {
        Experiment::GatheralLocalVol(p) => {
            let r = run_gatheral_local_vol(p, cfg, exec).with_context(ctx)?;
            let mut results = json!({
                "v0": r.v0,
                "u_mc": estimate_json(&r.u_mc),
                "u_direct": estimate_json(&r.u_direct),
                "u_ref": r.u_ref,
            });
            let mut summary = vec![
                format!("U (bleed)  {}", fmt_est(&r.u_mc)),
                format!("U (direct) {}", fmt_est(&r.u_direct)),
            ];
            if let Some(u_ref) = r.u_ref {
                results["u_mc_vs_ref"] = against(&r.u_mc, u_ref);
                summary.push(format!("U (closed) {u_ref:.6}"));
            }
            (results, summary)
        }
        Experiment::GatheralStochVol(p) => {
            let r = run_gatheral_stoch_vol(p, cfg, exec).with_context(ctx)?;
            if r.floored_states > 0 {
                warnings.push(format!(
                    "volatility fell below the floor in {} visited states; drift and diffusion used the floor",
                    r.floored_states
                ));
            }
            let results = json!({
                "v0": r.v0,
                "u_mc": estimate_json(&r.u_mc),
                "u_direct": estimate_json(&r.u_direct),
                "bleed_variance": r.bleed_variance,
                "direct_variance": r.direct_variance,
                "floored_states": r.floored_states,
            });
            let summary = vec![
                format!("U (bleed)  {}", fmt_est(&r.u_mc)),
                format!("U (direct) {}", fmt_est(&r.u_direct)),
                format!("variance ratio {:.4}", r.bleed_variance / r.direct_variance),
            ];
            (results, summary)
        }
        Experiment::Piterbarg(p) => {
            let r = run_piterbarg_discounting(p, cfg, exec).with_context(ctx)?;
            let results = json!({
                "v0": r.v0,
                "u_mc": estimate_json(&r.u_mc),
                "u_ref": r.u_ref,
                "u_mc_vs_ref": against(&r.u_mc, r.u_ref),
            });
            (
                results,
                vec![
                    format!("U (bleed)  {}", fmt_est(&r.u_mc)),
                    format!("U (closed) {:.6}", r.u_ref),
                ],
            )
        }
        Experiment::BkCva(p) => {
            let r = run_bk_cva(p, cfg, exec).with_context(ctx)?;
            let mut results = json!({
                "v0": r.v0,
                "u_mc": estimate_json(&r.u_mc),
                "u_ref": r.u_ref,
            });
            let mut summary = vec![format!("U (bleed)  {}", fmt_est(&r.u_mc))];
            if let Some(u_ref) = r.u_ref {
                results["u_mc_vs_ref"] = against(&r.u_mc, u_ref);
                summary.push(format!("U (closed) {u_ref:.6}"));
            }
            (results, summary)
        }
        Experiment::MetaCva { params, csv } => {
            let r = run_meta_cva(params, cfg, exec).with_context(ctx)?;
            // same seed and stream layout: these are the first paths of the run above
            let ens =
                run_meta_cva_pnl_paths(params, None, csv.paths, &csv_config(cfg, *csv), exec).with_context(ctx)?;
            let results = json!({
                "v0": r.v0,
                "u0": r.u0,
                "a0": estimate_json(&r.a0),
                "u0_plus_a0": r.u0 + r.a0.mean,
                "u_hat_direct": estimate_json(&r.u_hat_direct),
                "consistency_gap": r.consistency_gap,
                "consistency_bound": 3.0 * (r.a0.std_error + r.u_hat_direct.std_error),
                "se_ratio": r.se_ratio,
                "survival": estimate_json(&r.survival),
                "survival_ref": r.survival_ref,
                "csv_terminal_pnl": estimate_json(&ens.terminal),
            });
            let summary = vec![
                format!("V0  {:.4}", r.v0),
                format!("U0  {:.4}", r.u0),
                format!("A0  {}", fmt_est(&r.a0)),
                format!("U0 + A0 {:.4}, direct {}", r.u0 + r.a0.mean, fmt_est(&r.u_hat_direct)),
            ];
            pnl = Some((ens, *csv));
            (results, summary)
        }
        Experiment::PnlPaths {
            params,
            real_world,
            csv,
        } => {
            let ens = run_meta_cva_pnl_paths(params, *real_world, csv.paths, cfg, exec).with_context(ctx)?;
            let results = json!({
                "terminal_pnl": estimate_json(&ens.terminal),
                "real_world": real_world.map(|rw| json!({ "lambda_shift": rw.lambda_shift, "stock_drift": rw.stock_drift })),
                "recorded_paths": ens.paths.len(),
            });
            let summary = vec![format!("terminal P&L {}", fmt_est(&ens.terminal))];
            pnl = Some((ens, *csv));
            (results, summary)
        }
        Experiment::TauInvariance(p) => {
            let r = run_tau_invariance(p, cfg, exec).with_context(ctx)?;
            let points: Vec<Value> = r
                .points
                .iter()
                .map(|pt| json!({ "tau": pt.tau, "estimate": estimate_json(&pt.estimate) }))
                .collect();
            let mut summary: Vec<String> = r
                .points
                .iter()
                .map(|pt| format!("tau {:<6} {}", pt.tau, fmt_est(&pt.estimate)))
                .collect();
            summary.push(format!("closed form {:.6}", r.u_ref));
            let results = json!({
                "points": points,
                "u_ref": r.u_ref,
                "max_pairwise_score": r.max_pairwise_score,
            });
            (results, summary)
        }
    };
    Ok(RunOutput {
        results,
        pnl,
        warnings,
        summary,
    })
}
