//! Desk-scale experiment drivers.
//!
//! * [`run_rq1_general`]: sampling quality against embedding size over a
//!   size × density grid with a patience sweep.
//! * [`run_rq1_stressed`]: one cell, many embeddings, a chain-strength sweep
//!   and per-prefactor regressions against ACL.
//! * [`run_rq2`]: embeddability boundary, ACL quality and dispersion, run
//!   time, and the clique-embedding baseline.
//!
//! Every job seed is derived from the base seed and the job's grid indices,
//! and results are assembled in grid order, so tables do not depend on how
//! jobs are scheduled.

mod config;
mod table;

use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;
pub use table::Table;

use crate::clique::{clique_acl, CliqueEmbedder};
use crate::error::Result;
use crate::graph::{generate_er, Graph};
use crate::greedy::{Embedder, GreedyEmbedder};
use crate::ising::{random_ising, reference_energy, IsingModel, ReferenceBudget, SaParams};
use crate::parameterize::{solve_embedded, ChainStrengthSpec, PipelineConfig, PipelineResult};
use crate::seed::{derive, ratio_component};
use crate::stats::{self, box_stats, ols, BoxStats, RegressionFit};

pub use crate::stats::{box_stats as box_summary, ols as least_squares, spearman};

const TAG_PROBLEM: u64 = 0x5052_4f42;
const TAG_EMBED: u64 = 0x454d_4244;
const TAG_SAMPLE: u64 = 0x5341_4d50;
const TAG_RQ2: u64 = 0x5251_32;
const TAG_NATIVE: u64 = 0x4e41_54;

/// A generated problem: graph, couplings and reference energy.
#[derive(Clone, Debug)]
pub struct Instance {
    pub size: usize,
    pub density: f64,
    pub index: usize,
    pub model: IsingModel,
    pub reference_energy: f64,
}

fn cell_seed(base: u64, size: usize, density: f64, problem: usize) -> u64 {
    derive(base, &[TAG_PROBLEM, size as u64, ratio_component(density), problem as u64])
}

pub fn make_instance(
    base_seed: u64,
    size: usize,
    density: f64,
    index: usize,
    budget: &ReferenceBudget,
) -> Result<Instance> {
    let seed = cell_seed(base_seed, size, density, index);
    let graph = generate_er(size, density, seed)?;
    let model = random_ising(&graph, derive(seed, &[1]));
    let budget = ReferenceBudget {
        sa: SaParams { seed: derive(seed, &[2]), ..budget.sa.clone() },
        ..budget.clone()
    };
    let reference_energy = reference_energy(&model, &budget)?;
    Ok(Instance { size, density, index, model, reference_energy })
}

/// One sampled embedding of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rq1Row {
    pub size: usize,
    pub density: f64,
    pub problem: usize,
    pub embedding: usize,
    pub patience: usize,
    pub prefactor: f64,
    pub success: bool,
    pub n_qubits: Option<usize>,
    pub acl: Option<f64>,
    pub chain_strength: Option<f64>,
    pub reference_energy: f64,
    pub median_relative_error: Option<f64>,
    pub min_relative_error: Option<f64>,
    pub median_unembedded_relative_error: Option<f64>,
    pub min_unembedded_relative_error: Option<f64>,
    pub median_chain_break_fraction: Option<f64>,
    pub min_chain_break_fraction: Option<f64>,
}

impl Rq1Row {
    fn from_result(
        inst: &Instance,
        embedding: usize,
        patience: usize,
        prefactor: f64,
        res: Option<&PipelineResult>,
    ) -> Self {
        let summary = res.and_then(|r| r.summary.as_ref());
        Rq1Row {
            size: inst.size,
            density: inst.density,
            problem: inst.index,
            embedding,
            patience,
            prefactor,
            success: res.is_some_and(|r| r.success),
            n_qubits: res.and_then(|r| r.metrics.as_ref().map(|m| m.n_qubits)),
            acl: res.and_then(|r| r.metrics.as_ref().map(|m| m.acl)),
            chain_strength: res.and_then(|r| r.chain_strength),
            reference_energy: inst.reference_energy,
            median_relative_error: summary.map(|s| s.median_relative_error),
            min_relative_error: summary.map(|s| s.min_relative_error),
            median_unembedded_relative_error: summary.map(|s| s.median_unembedded_relative_error),
            min_unembedded_relative_error: summary.map(|s| s.min_unembedded_relative_error),
            median_chain_break_fraction: summary.map(|s| s.median_chain_break_fraction),
            min_chain_break_fraction: summary.map(|s| s.min_chain_break_fraction),
        }
    }
}

pub fn rq1_table(name: &str, rows: &[Rq1Row]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "size",
            "density",
            "problem",
            "embedding",
            "patience",
            "prefactor",
            "success",
            "n_qubits",
            "acl",
            "chain_strength",
            "reference_energy",
            "median_relative_error",
            "min_relative_error",
            "median_unembedded_relative_error",
            "min_unembedded_relative_error",
            "median_chain_break_fraction",
            "min_chain_break_fraction",
        ],
    );
    for r in rows {
        t.push(vec![
            r.size.to_string(),
            r.density.to_string(),
            r.problem.to_string(),
            r.embedding.to_string(),
            r.patience.to_string(),
            r.prefactor.to_string(),
            r.success.to_string(),
            table::opt(r.n_qubits),
            table::opt(r.acl),
            table::opt(r.chain_strength),
            r.reference_energy.to_string(),
            table::opt(r.median_relative_error),
            table::opt(r.min_relative_error),
            table::opt(r.median_unembedded_relative_error),
            table::opt(r.min_unembedded_relative_error),
            table::opt(r.median_chain_break_fraction),
            table::opt(r.min_chain_break_fraction),
        ]);
    }
    t
}

fn embedding_seed(base: u64, inst: &Instance, embedding: usize) -> u64 {
    derive(
        base,
        &[TAG_EMBED, inst.size as u64, ratio_component(inst.density), inst.index as u64, embedding as u64],
    )
}

fn sample_seed(base: u64, inst: &Instance, embedding: usize) -> u64 {
    derive(
        base,
        &[TAG_SAMPLE, inst.size as u64, ratio_component(inst.density), inst.index as u64, embedding as u64],
    )
}

/// Embed `inst` once per embedding index with the patience sweep, then sample
/// every successful embedding at each prefactor.
fn rq1_rows(
    cfg: &ExperimentConfig,
    target: &Graph,
    inst: &Instance,
    prefactors: &[f64],
) -> Result<Vec<Rq1Row>> {
    let jobs: Vec<Result<Vec<Rq1Row>>> = (0..cfg.embeddings_per_problem)
        .into_par_iter()
        .map(|k| {
            let patience = cfg.patience_values[k % cfg.patience_values.len()];
            let embedder = GreedyEmbedder::new(cfg.greedy_params(patience));
            let outcome = embedder.embed(inst.model.graph(), target, embedding_seed(cfg.seed, inst, k));
            let mut rows = Vec::with_capacity(prefactors.len());
            for &prefactor in prefactors {
                let res = match &outcome.embedding {
                    Some(e) => {
                        let pcfg = PipelineConfig {
                            chain_strength: ChainStrengthSpec::utc(prefactor),
                            sampler: cfg.sampler(),
                            reference: cfg.reference_budget(),
                        };
                        Some(solve_embedded(
                            &inst.model,
                            target,
                            e,
                            &pcfg,
                            inst.reference_energy,
                            sample_seed(cfg.seed, inst, k),
                        )?)
                    }
                    None => None,
                };
                rows.push(Rq1Row::from_result(inst, k, patience, prefactor, res.as_ref()));
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for job in jobs {
        rows.extend(job?);
    }
    Ok(rows)
}

/// Relative error against embedding size over the whole grid at a fixed
/// prefactor.
pub fn run_rq1_general(cfg: &ExperimentConfig) -> Result<Vec<Rq1Row>> {
    cfg.check()?;
    let target = cfg.target()?;
    let budget = cfg.reference_budget();
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        for &density in &cfg.densities {
            for p in 0..cfg.problems_per_cell {
                let inst = make_instance(cfg.seed, size, density, p, &budget)?;
                rows.extend(rq1_rows(cfg, &target, &inst, &[cfg.rq1_prefactor])?);
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub prefactor: f64,
    pub response: String,
    pub fit: Option<RegressionFit>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StressedOutput {
    pub rows: Vec<Rq1Row>,
    pub slopes: Vec<SlopeRow>,
}

impl StressedOutput {
    pub fn slopes_table(&self) -> Table {
        let mut t = Table::new("rq1b_slopes", &["prefactor", "response", "slope", "intercept", "r", "n_points"]);
        for s in &self.slopes {
            t.push(vec![
                s.prefactor.to_string(),
                s.response.clone(),
                table::opt(s.fit.as_ref().map(|f| f.slope)),
                table::opt(s.fit.as_ref().map(|f| f.intercept)),
                table::opt(s.fit.as_ref().map(|f| f.r)),
                s.fit.as_ref().map_or(0, |f| f.n_points).to_string(),
            ]);
        }
        t
    }

    pub fn tables(&self) -> Vec<Table> {
        vec![rq1_table("rq1b_rows", &self.rows), self.slopes_table()]
    }
}

const RESPONSES: [&str; 6] = [
    "median_relative_error",
    "min_relative_error",
    "median_unembedded_relative_error",
    "min_unembedded_relative_error",
    "median_chain_break_fraction",
    "min_chain_break_fraction",
];

fn response(row: &Rq1Row, name: &str) -> Option<f64> {
    match name {
        "median_relative_error" => row.median_relative_error,
        "min_relative_error" => row.min_relative_error,
        "median_unembedded_relative_error" => row.median_unembedded_relative_error,
        "min_unembedded_relative_error" => row.min_unembedded_relative_error,
        "median_chain_break_fraction" => row.median_chain_break_fraction,
        "min_chain_break_fraction" => row.min_chain_break_fraction,
        _ => None,
    }
}

/// Chain-strength sweep on the first (size, density) cell. Each embedding is
/// sampled with the same seed at every prefactor.
pub fn run_rq1_stressed(cfg: &ExperimentConfig) -> Result<StressedOutput> {
    cfg.check()?;
    let (Some(&size), Some(&density)) = (cfg.sizes.first(), cfg.densities.first()) else {
        return Err(crate::Error::Config("stressed experiment needs one size and one density".into()));
    };
    if cfg.prefactors.is_empty() {
        return Err(crate::Error::Config("prefactors must be non-empty".into()));
    }
    let target = cfg.target()?;
    let budget = cfg.reference_budget();
    let mut rows = Vec::new();
    for p in 0..cfg.problems_per_cell {
        let inst = make_instance(cfg.seed, size, density, p, &budget)?;
        rows.extend(rq1_rows(cfg, &target, &inst, &cfg.prefactors)?);
    }
    let mut slopes = Vec::new();
    for &prefactor in &cfg.prefactors {
        for name in RESPONSES {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.prefactor == prefactor)
                .filter_map(|r| Some((r.acl?, response(r, name)?)))
                .collect();
            slopes.push(SlopeRow {
                prefactor,
                response: name.to_string(),
                fit: ols(&points).ok(),
            });
        }
    }
    Ok(StressedOutput { rows, slopes })
}

/// Aggregate of `trial_count` embedder runs on one (size, density) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rq2Cell {
    pub embedder: String,
    pub size: usize,
    pub density: f64,
    pub source_avg_degree: f64,
    pub trials: usize,
    pub successes: usize,
    pub timeouts: usize,
    pub success_probability: f64,
    /// ACLs of the valid embeddings only, in trial order.
    pub acls: Vec<f64>,
    pub mean_acl: Option<f64>,
    pub std_acl: Option<f64>,
    pub acl_box: Option<BoxStats>,
    pub mean_passes: f64,
    pub wall_times: Vec<Duration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeBaselineRow {
    pub size: usize,
    pub available: bool,
    pub capacity: Option<usize>,
    pub acl: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rq2Output {
    pub target_avg_degree: f64,
    pub cells: Vec<Rq2Cell>,
    /// Cells whose source is the target induced on its first `size` nodes.
    pub native: Vec<Rq2Cell>,
    pub ce_baseline: Vec<CeBaselineRow>,
}

/// Run one cell: `trials` embeddings of `h` with derived seeds.
pub fn run_cell(
    embedder: &dyn Embedder,
    h: &Graph,
    target: &Graph,
    density: f64,
    trials: usize,
    seed: u64,
) -> Rq2Cell {
    let outcomes: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|t| embedder.embed(h, target, derive(seed, &[t as u64])))
        .collect();
    let acls: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.embedding.as_ref())
        .map(|e| e.num_qubits() as f64 / h.num_nodes().max(1) as f64)
        .collect();
    let successes = outcomes.iter().filter(|o| o.success).count();
    Rq2Cell {
        embedder: embedder.name().to_string(),
        size: h.num_nodes(),
        density,
        source_avg_degree: h.stats().avg_degree,
        trials,
        successes,
        timeouts: outcomes.iter().filter(|o| o.timed_out()).count(),
        success_probability: successes as f64 / trials.max(1) as f64,
        mean_acl: stats::mean(&acls),
        std_acl: stats::std_dev(&acls),
        acl_box: box_stats(&acls).ok(),
        acls,
        mean_passes: outcomes.iter().map(|o| o.passes_used as f64).sum::<f64>() / trials.max(1) as f64,
        wall_times: outcomes.iter().map(|o| o.wall_time).collect(),
    }
}

/// Boundary sweep with the configured greedy embedder.
pub fn run_rq2(cfg: &ExperimentConfig) -> Result<Rq2Output> {
    let greedy = GreedyEmbedder::new(cfg.greedy_params(cfg.rq2_patience));
    run_rq2_with(cfg, &[&greedy])
}

/// Boundary sweep for each embedder, plus the clique baseline on the target.
pub fn run_rq2_with(cfg: &ExperimentConfig, embedders: &[&dyn Embedder]) -> Result<Rq2Output> {
    cfg.check()?;
    if cfg.trial_count < 2 {
        return Err(crate::Error::Config("trial_count must be >= 2".into()));
    }
    let target = cfg.target()?;
    let mut cells = Vec::new();
    let mut native = Vec::new();
    for embedder in embedders {
        if cfg.native_cells {
            for &size in cfg.sizes.iter().filter(|&&n| n <= target.num_nodes()) {
                let keep = target.nodes()[..size].iter().copied().collect();
                let h = target.induced_subgraph(&keep);
                let density = h.stats().density;
                let seed = derive(cfg.seed, &[TAG_NATIVE, size as u64]);
                native.push(run_cell(*embedder, &h, &target, density, cfg.trial_count, seed));
            }
        }
        for &size in &cfg.sizes {
            for &density in &cfg.densities {
                let seed = cell_seed(cfg.seed, size, density, 0);
                let h = generate_er(size, density, seed)?;
                cells.push(run_cell(
                    *embedder,
                    &h,
                    &target,
                    density,
                    cfg.trial_count,
                    derive(seed, &[TAG_RQ2]),
                ));
            }
        }
    }
    let ce = CliqueEmbedder::for_target(&target);
    let ce_baseline = cfg
        .sizes
        .iter()
        .map(|&size| {
            let capacity = ce.cache().map(|c| c.max_clique_size);
            let fits = capacity.is_some_and(|c| size <= c);
            CeBaselineRow {
                size,
                available: capacity.is_some(),
                capacity,
                acl: fits.then(|| clique_acl(size)),
            }
        })
        .collect();
    Ok(Rq2Output {
        target_avg_degree: target.stats().avg_degree,
        cells,
        native,
        ce_baseline,
    })
}

fn boundary_rows(name: &str, cells: &[Rq2Cell]) -> Table {
    let mut t = Table::new(
        name,
        &["embedder", "size", "density", "source_avg_degree", "trials", "successes", "timeouts", "success_probability"],
    );
    for c in cells {
        t.push(vec![
            c.embedder.clone(),
            c.size.to_string(),
            c.density.to_string(),
            c.source_avg_degree.to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            c.timeouts.to_string(),
            c.success_probability.to_string(),
        ]);
    }
    t
}

impl Rq2Output {
    pub fn ce_acl(&self, size: usize) -> Option<f64> {
        self.ce_baseline.iter().find(|r| r.size == size).and_then(|r| r.acl)
    }

    pub fn boundary_table(&self) -> Table {
        boundary_rows("rq2_boundary", &self.cells)
    }

    pub fn native_table(&self) -> Table {
        boundary_rows("rq2_native", &self.native)
    }

    pub fn acl_table(&self) -> Table {
        let mut t = Table::new(
            "rq2_acl",
            &[
                "embedder", "size", "density", "n_valid", "mean_acl", "median_acl", "q1", "q3", "whisker_lo",
                "whisker_hi", "n_outliers", "mean_passes",
            ],
        );
        for c in &self.cells {
            let b = c.acl_box.as_ref();
            t.push(vec![
                c.embedder.clone(),
                c.size.to_string(),
                c.density.to_string(),
                c.acls.len().to_string(),
                table::opt(c.mean_acl),
                table::opt(b.map(|b| b.median)),
                table::opt(b.map(|b| b.q1)),
                table::opt(b.map(|b| b.q3)),
                table::opt(b.map(|b| b.whisker_lo)),
                table::opt(b.map(|b| b.whisker_hi)),
                table::opt(b.map(|b| b.outliers.len())),
                c.mean_passes.to_string(),
            ]);
        }
        t
    }

    pub fn dispersion_table(&self) -> Table {
        let mut t = Table::new("rq2_dispersion", &["embedder", "size", "density", "n_valid", "std_acl"]);
        for c in &self.cells {
            t.push(vec![
                c.embedder.clone(),
                c.size.to_string(),
                c.density.to_string(),
                c.acls.len().to_string(),
                table::opt(c.std_acl),
            ]);
        }
        t
    }

    /// Wall-clock statistics; the only table that varies between reruns.
    pub fn time_table(&self) -> Table {
        let mut t = Table::new(
            "rq2_time",
            &["embedder", "size", "density", "total_seconds", "mean_seconds", "median_seconds", "max_seconds"],
        );
        for c in &self.cells {
            let secs: Vec<f64> = c.wall_times.iter().map(Duration::as_secs_f64).collect();
            t.push(vec![
                c.embedder.clone(),
                c.size.to_string(),
                c.density.to_string(),
                secs.iter().sum::<f64>().to_string(),
                table::opt(stats::mean(&secs)),
                table::opt(stats::median(&secs)),
                table::opt(secs.iter().copied().reduce(f64::max)),
            ]);
        }
        t
    }

    pub fn ce_table(&self) -> Table {
        let mut t = Table::new("rq2_ce_baseline", &["size", "available", "capacity", "acl"]);
        for r in &self.ce_baseline {
            t.push(vec![r.size.to_string(), r.available.to_string(), table::opt(r.capacity), table::opt(r.acl)]);
        }
        t
    }

    /// Mean greedy ACL minus the clique baseline ACL, where both exist.
    pub fn diff_table(&self) -> Table {
        let mut t = Table::new(
            "rq2_acl_diff",
            &["embedder", "size", "density", "source_avg_degree", "mean_acl", "ce_acl", "acl_difference"],
        );
        for c in &self.cells {
            let ce = self.ce_acl(c.size);
            let diff = c.mean_acl.zip(ce).map(|(a, b)| a - b);
            t.push(vec![
                c.embedder.clone(),
                c.size.to_string(),
                c.density.to_string(),
                c.source_avg_degree.to_string(),
                table::opt(c.mean_acl),
                table::opt(ce),
                table::opt(diff),
            ]);
        }
        t
    }

    /// Tables whose bytes are fixed by the config and base seed.
    pub fn deterministic_tables(&self) -> Vec<Table> {
        vec![
            self.boundary_table(),
            self.native_table(),
            self.acl_table(),
            self.dispersion_table(),
            self.ce_table(),
            self.diff_table(),
        ]
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut t = self.deterministic_tables();
        t.push(self.time_table());
        t
    }
}
