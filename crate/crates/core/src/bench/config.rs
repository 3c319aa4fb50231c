use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{break_graph, generate_chimera, load_edge_list, ChimeraSpec, Graph};
use crate::greedy::GreedyParams;
use crate::ising::{ReferenceBudget, SaParams};
use crate::parameterize::DEFAULT_PREFACTOR;

/// Experiment grid and run settings, read from a flat TOML document. Every
/// key is optional; missing keys take the desk-scale defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub densities: Vec<f64>,
    pub problems_per_cell: usize,
    pub embeddings_per_problem: usize,
    pub patience_values: Vec<usize>,
    /// Prefactor sweep of the stressed experiment.
    pub prefactors: Vec<f64>,
    /// Fixed prefactor of the general experiment.
    pub rq1_prefactor: f64,
    /// Patience used by the boundary experiment.
    pub rq2_patience: usize,
    /// Add one cell per size whose source is a subgraph of the target.
    pub native_cells: bool,
    pub reads: usize,
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub chimera_m: usize,
    /// Target adjacency from an edge-list file; overrides `chimera_m`.
    pub target_edge_list: Option<PathBuf>,
    pub node_drop: f64,
    pub edge_drop: f64,
    pub seed: u64,
    pub trial_count: usize,
    pub max_passes: usize,
    pub max_no_improvement: usize,
    pub tries: usize,
    pub reference_restarts: usize,
    pub reference_reads: usize,
    pub reference_sweeps: usize,
    /// Per-run wall-clock budget for the greedy embedder, in seconds.
    pub time_budget_secs: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sizes: (8..=48).step_by(4).collect(),
            densities: (1..=10).map(|k| f64::from(k) / 10.0).collect(),
            problems_per_cell: 1,
            embeddings_per_problem: 10,
            patience_values: (0..=10).collect(),
            prefactors: vec![0.5, 0.75, 1.0, DEFAULT_PREFACTOR, 2.0],
            rq1_prefactor: DEFAULT_PREFACTOR,
            rq2_patience: 10,
            native_cells: true,
            reads: 500,
            sweeps: 10,
            beta_min: 0.1,
            beta_max: 10.0,
            chimera_m: 4,
            target_edge_list: None,
            node_drop: 0.0,
            edge_drop: 0.0,
            seed: 0,
            trial_count: 32,
            max_passes: 1000,
            max_no_improvement: 10,
            tries: 1,
            reference_restarts: 4,
            reference_reads: 100,
            reference_sweeps: 1000,
            time_budget_secs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.sizes.iter().any(|&n| n < 1) {
            return bad("sizes must be >= 1");
        }
        if self.densities.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return bad("densities must lie in [0, 1]");
        }
        if self.prefactors.iter().chain([&self.rq1_prefactor]).any(|&p| p <= 0.0) {
            return bad("prefactors must be positive");
        }
        if self.reads < 1 || self.sweeps < 1 {
            return bad("reads and sweeps must be >= 1");
        }
        if !(self.beta_min > 0.0 && self.beta_min < self.beta_max) {
            return bad("need 0 < beta_min < beta_max");
        }
        if self.chimera_m < 1 {
            return bad("chimera_m must be >= 1");
        }
        if !(0.0..1.0).contains(&self.node_drop) || !(0.0..1.0).contains(&self.edge_drop) {
            return bad("break ratios must lie in [0, 1)");
        }
        if self.patience_values.is_empty() {
            return bad("patience_values must be non-empty");
        }
        Ok(())
    }

    /// Target graph: edge-list file or ideal Chimera, then the break model
    /// seeded from the base seed.
    pub fn target(&self) -> Result<Graph> {
        let ideal = match &self.target_edge_list {
            Some(path) => load_edge_list(path)?,
            None => generate_chimera(ChimeraSpec::new(self.chimera_m)?)?,
        };
        if self.node_drop == 0.0 && self.edge_drop == 0.0 {
            return Ok(ideal);
        }
        break_graph(&ideal, self.node_drop, self.edge_drop, crate::seed::derive(self.seed, &[0x4252]))
    }

    pub fn greedy_params(&self, patience: usize) -> GreedyParams {
        GreedyParams {
            tries: self.tries.max(1),
            chain_length_patience: patience,
            max_passes: self.max_passes,
            max_no_improvement: self.max_no_improvement,
            time_budget: self.time_budget_secs.map(Duration::from_secs_f64),
            ..GreedyParams::default()
        }
    }

    pub fn sampler(&self) -> SaParams {
        SaParams {
            reads: self.reads,
            sweeps: self.sweeps,
            beta_range: (self.beta_min, self.beta_max),
            seed: 0,
        }
    }

    pub fn reference_budget(&self) -> ReferenceBudget {
        ReferenceBudget {
            restarts: self.reference_restarts.max(1),
            sa: SaParams {
                reads: self.reference_reads.max(1),
                sweeps: self.reference_sweeps.max(1),
                beta_range: (0.1, 10.0),
                seed: 0,
            },
            force_sampling: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trip_and_validation() {
        let cfg = ExperimentConfig { sizes: vec![6, 9], seed: 12, ..ExperimentConfig::default() };
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(ExperimentConfig::from_toml("densities = [1.5]").is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml("reads = 0").is_err());
    }

    #[test]
    fn target_defaults_to_chimera() {
        let g = ExperimentConfig::default().target().unwrap();
        assert_eq!(g.num_nodes(), 128);
        let broken = ExperimentConfig { node_drop: 0.05, ..ExperimentConfig::default() }
            .target()
            .unwrap();
        assert_eq!(broken.num_nodes(), 122);
    }
}
