//! The experiments known to `bleed run`, in listing order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub topic: &'static str,
    pub description: &'static str,
}

pub const EXPERIMENTS: [ExperimentInfo; 7] = [
    ExperimentInfo {
        name: "gatheral-local-vol",
        topic: "volatility",
        description: "constant base volatility adjusted to a local volatility target",
    },
    ExperimentInfo {
        name: "gatheral-stoch-vol",
        topic: "volatility",
        description: "frozen base volatility adjusted to Heston-type stochastic volatility",
    },
    ExperimentInfo {
        name: "piterbarg",
        topic: "discounting",
        description: "call repriced under a different discount curve",
    },
    ExperimentInfo {
        name: "bk-cva",
        topic: "credit",
        description: "CVA and friction costs as discounting and payoff adjustments",
    },
    ExperimentInfo {
        name: "meta-cva",
        topic: "meta-adjustment",
        description: "model risk of a CVA model with frozen hazard rates",
    },
    ExperimentInfo {
        name: "tau-invariance",
        topic: "consistency",
        description: "adjustment settled at intermediate stopping times",
    },
    ExperimentInfo {
        name: "pnl-paths",
        topic: "meta-adjustment",
        description: "hedged P&L trajectories of the unadjusted CVA position",
    },
];

pub fn find(name: &str) -> Option<&'static ExperimentInfo> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

/// One aligned line per experiment.
pub fn render_list() -> String {
    let w_name = EXPERIMENTS.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let w_topic = EXPERIMENTS.iter().map(|e| e.topic.len()).max().unwrap_or(0);
    let mut out = String::new();
    for e in &EXPERIMENTS {
        out.push_str(&format!(
            "{:w_name$}  {:w_topic$}  {}\n",
            e.name, e.topic, e.description
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn every_listed_experiment_parses_with_defaults() {
        for e in &EXPERIMENTS {
            let c = RunConfig::from_toml_str(&format!("experiment = \"{}\"\n", e.name), "t").unwrap();
            assert_eq!(c.experiment.name(), e.name);
        }
    }

    #[test]
    fn listing_is_stable() {
        let s = render_list();
        assert_eq!(s.lines().count(), 7);
        assert!(s.starts_with("gatheral-local-vol"));
        assert_eq!(render_list(), s);
        assert!(find("meta-cva").is_some() && find("nope").is_none());
    }
}
