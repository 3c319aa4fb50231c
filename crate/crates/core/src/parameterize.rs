//! Embedded Ising construction, chain strength, and majority-vote
//! unembedding, plus the end-to-end embed → sample → unembed pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{couplers_between, metrics, validate, Embedding, EmbeddingMetrics};
use crate::error::{Error, Result};
use crate::graph::{hex_digest, Graph, NodeId};
use crate::greedy::{Embedder, Failure};
use crate::ising::{
    reference_energy, relative_error, simulated_annealing, IsingModel, ReferenceBudget, SaParams,
    SpinAssignment,
};
use crate::seed;
use crate::stats;

pub const DEFAULT_PREFACTOR: f64 = 1.414;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainStrengthMode {
    Utc,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStrengthSpec {
    pub mode: ChainStrengthMode,
    pub prefactor: f64,
    pub fixed_value: f64,
}

impl Default for ChainStrengthSpec {
    fn default() -> Self {
        ChainStrengthSpec::utc(DEFAULT_PREFACTOR)
    }
}

impl ChainStrengthSpec {
    pub fn utc(prefactor: f64) -> Self {
        ChainStrengthSpec {
            mode: ChainStrengthMode::Utc,
            prefactor,
            fixed_value: 0.0,
        }
    }

    pub fn fixed(value: f64) -> Self {
        ChainStrengthSpec {
            mode: ChainStrengthMode::Fixed,
            prefactor: 1.0,
            fixed_value: value,
        }
    }

    pub fn resolve(&self, m: &IsingModel) -> f64 {
        match self.mode {
            ChainStrengthMode::Utc => utc_chain_strength(m, self.prefactor),
            ChainStrengthMode::Fixed => self.fixed_value,
        }
    }
}

/// Uniform torque compensation: `prefactor · rms(J) · sqrt(avg degree)`,
/// or `prefactor` alone for edgeless models.
pub fn utc_chain_strength(m: &IsingModel, prefactor: f64) -> f64 {
    let j = m.j_dense();
    if j.is_empty() {
        return prefactor;
    }
    let rms = (j.iter().map(|w| w * w).sum::<f64>() / j.len() as f64).sqrt();
    let avg_degree = m.graph().stats().avg_degree;
    prefactor * rms * avg_degree.sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedIsing {
    pub model: IsingModel,
    pub chains: Embedding,
    pub chain_strength: f64,
    pub source_ref: String,
    /// Number of target couplers inside chains, each weighted `-chain_strength`.
    pub intra_chain_couplers: usize,
}

impl EmbeddedIsing {
    /// Energy shift of every unbroken target state relative to the source.
    pub fn chain_offset(&self) -> f64 {
        -self.chain_strength * self.intra_chain_couplers as f64
    }
}

/// Fingerprint of a model's structure and weights.
pub fn model_fingerprint(m: &IsingModel) -> String {
    hex_digest(
        serde_json::to_string(&m.to_json())
            .expect("model serializes")
            .as_bytes(),
    )
}

pub fn embed_ising(
    m: &IsingModel,
    e: &Embedding,
    g: &Graph,
    cs: &ChainStrengthSpec,
) -> Result<EmbeddedIsing> {
    let report = validate(m.graph(), g, e)?;
    if !report.valid {
        return Err(Error::InvalidEmbedding(format!("{report:?}")));
    }
    let chain_strength = cs.resolve(m);

    let mut h: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (v, bias) in m.biases() {
        let chain = e.chain(v).expect("validated embedding is total");
        let share = bias / chain.len() as f64;
        for &t in chain {
            h.insert(t, share);
        }
    }

    let mut j: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for ((u, v), w) in m.couplings() {
        let couplers = couplers_between(g, e.chain(u).unwrap(), e.chain(v).unwrap());
        let share = w / couplers.len() as f64;
        for c in couplers {
            j.insert(c, share);
        }
    }
    let mut intra = 0;
    for (_, chain) in e.chains() {
        let members: BTreeSet<NodeId> = chain.iter().copied().collect();
        for &t in chain {
            for t2 in g.neighbors(t) {
                if t < t2 && members.contains(&t2) {
                    j.insert((t, t2), -chain_strength);
                    intra += 1;
                }
            }
        }
    }

    let graph = Graph::from_edges(h.keys().copied().collect::<Vec<_>>(), j.keys().copied().collect::<Vec<_>>())?;
    Ok(EmbeddedIsing {
        model: IsingModel::new(graph, &h, &j)?,
        chains: e.clone(),
        chain_strength,
        source_ref: model_fingerprint(m),
        intra_chain_couplers: intra,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnembeddedSample {
    pub assignment: SpinAssignment,
    pub broken_chains: BTreeSet<NodeId>,
    pub chain_break_fraction: f64,
}

/// Majority vote per chain; exact ties take a seeded fair coin.
pub fn unembed(s: &SpinAssignment, e: &Embedding, seed: u64) -> Result<UnembeddedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = BTreeMap::new();
    let mut broken = BTreeSet::new();
    for (v, chain) in e.chains() {
        let spins = chain
            .iter()
            .map(|&t| s.get(t).ok_or(Error::MissingNode(t)))
            .collect::<Result<Vec<i8>>>()?;
        let (value, is_broken) = vote(&spins, &mut rng);
        values.insert(v, value);
        if is_broken {
            broken.insert(v);
        }
    }
    let fraction = if e.is_empty() {
        0.0
    } else {
        broken.len() as f64 / e.len() as f64
    };
    Ok(UnembeddedSample {
        assignment: SpinAssignment { values },
        broken_chains: broken,
        chain_break_fraction: fraction,
    })
}

fn vote(spins: &[i8], rng: &mut ChaCha8Rng) -> (i8, bool) {
    let sum: i32 = spins.iter().map(|&s| i32::from(s)).sum();
    let len = spins.len() as i32;
    if sum.abs() == len {
        return (spins[0], false);
    }
    let value = match sum.signum() {
        1 => 1,
        -1 => -1,
        _ => {
            if rng.gen::<bool>() {
                1
            } else {
                -1
            }
        }
    };
    (value, true)
}

/// Chain positions resolved against the embedded model's node order so a
/// whole sample set can be unembedded without map lookups.
struct DenseUnembedder {
    /// per source variable (source node order): positions in the embedded model
    chains: Vec<Vec<usize>>,
}

impl DenseUnembedder {
    fn new(source: &Graph, embedded: &EmbeddedIsing) -> Self {
        let g = embedded.model.graph();
        let chains = source
            .nodes()
            .iter()
            .map(|&v| {
                embedded
                    .chains
                    .chain(v)
                    .expect("validated embedding is total")
                    .iter()
                    .map(|&t| g.index_of(t).expect("chain node in embedded model"))
                    .collect()
            })
            .collect();
        DenseUnembedder { chains }
    }

    fn unembed(&self, state: &[i8], seed: u64) -> (Vec<i8>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut broken = 0;
        let mut buf = Vec::new();
        let spins = self
            .chains
            .iter()
            .map(|chain| {
                buf.clear();
                buf.extend(chain.iter().map(|&i| state[i]));
                let (value, is_broken) = vote(&buf, &mut rng);
                broken += usize::from(is_broken);
                value
            })
            .collect();
        (spins, broken)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub chain_strength: ChainStrengthSpec,
    /// Sampler for the embedded model; `seed` is overridden per run.
    pub sampler: SaParams,
    pub reference: ReferenceBudget,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chain_strength: ChainStrengthSpec::default(),
            sampler: SaParams::default(),
            reference: ReferenceBudget::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub median_embedded_energy: f64,
    pub min_embedded_energy: f64,
    pub median_unembedded_energy: f64,
    pub min_unembedded_energy: f64,
    pub median_relative_error: f64,
    pub min_relative_error: f64,
    pub median_unembedded_relative_error: f64,
    pub min_unembedded_relative_error: f64,
    pub median_chain_break_fraction: f64,
    pub min_chain_break_fraction: f64,
}

/// Output of one embed → sample → unembed run.
///
/// `embedded_energies` are raw energies of the embedded model. Relative
/// errors against the source reference are computed on
/// `embedded_energy - chain_offset`, which equals the source energy for
/// unbroken samples and exceeds it by `2·chain_strength` per broken
/// intra-chain coupler otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub success: bool,
    pub failure: Option<Failure>,
    pub embedder: String,
    pub embedding_fingerprint: Option<String>,
    pub metrics: Option<EmbeddingMetrics>,
    pub chain_strength: Option<f64>,
    pub chain_offset: Option<f64>,
    pub reference_energy: f64,
    pub reads: usize,
    pub seed: u64,
    pub embedded_energies: Vec<f64>,
    pub unembedded_energies: Vec<f64>,
    pub chain_break_fractions: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub unembedded_relative_errors: Vec<f64>,
    pub summary: Option<PipelineSummary>,
}

impl PipelineResult {
    /// Per-read CSV: `read_index,embedded_energy,unembedded_energy,
    /// chain_break_fraction,relative_error,unembedded_relative_error`.
    pub fn write_reads_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "read_index",
            "embedded_energy",
            "unembedded_energy",
            "chain_break_fraction",
            "relative_error",
            "unembedded_relative_error",
        ])?;
        for i in 0..self.embedded_energies.len() {
            w.write_record([
                i.to_string(),
                self.embedded_energies[i].to_string(),
                self.unembedded_energies[i].to_string(),
                self.chain_break_fractions[i].to_string(),
                self.relative_errors[i].to_string(),
                self.unembedded_relative_errors[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Embed with `embedder`, then sample and unembed.
pub fn solve_pipeline(
    m: &IsingModel,
    g: &Graph,
    embedder: &dyn Embedder,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PipelineResult> {
    let reference = reference_energy(m, &ReferenceBudget {
        sa: SaParams { seed: seed::derive(seed, &[0x5245]), ..cfg.reference.sa.clone() },
        ..cfg.reference.clone()
    })?;
    let outcome = embedder.embed(m.graph(), g, seed::derive(seed, &[0x454d]));
    match outcome.embedding {
        Some(e) => {
            let mut res = solve_embedded(m, g, &e, cfg, reference, seed)?;
            res.embedder = embedder.name().to_string();
            Ok(res)
        }
        None => Ok(PipelineResult {
            success: false,
            failure: outcome.failure,
            embedder: embedder.name().to_string(),
            embedding_fingerprint: None,
            metrics: None,
            chain_strength: None,
            chain_offset: None,
            reference_energy: reference,
            reads: cfg.sampler.reads,
            seed,
            embedded_energies: Vec::new(),
            unembedded_energies: Vec::new(),
            chain_break_fractions: Vec::new(),
            relative_errors: Vec::new(),
            unembedded_relative_errors: Vec::new(),
            summary: None,
        }),
    }
}

/// Sample a given valid embedding of `m` and unembed every read.
pub fn solve_embedded(
    m: &IsingModel,
    g: &Graph,
    e: &Embedding,
    cfg: &PipelineConfig,
    reference: f64,
    seed: u64,
) -> Result<PipelineResult> {
    let embedded = embed_ising(m, e, g, &cfg.chain_strength)?;
    let sample = simulated_annealing(
        &embedded.model,
        &SaParams { seed: seed::derive(seed, &[0x5341]), ..cfg.sampler.clone() },
    )?;
    let unembedder = DenseUnembedder::new(m.graph(), &embedded);
    let offset = embedded.chain_offset();
    let n_vars = m.num_variables().max(1) as f64;

    let mut unembedded_energies = Vec::with_capacity(sample.num_reads);
    let mut fractions = Vec::with_capacity(sample.num_reads);
    for read in 0..sample.num_reads {
        let vote_seed = seed::derive(seed, &[0x5655, read as u64]);
        let (spins, broken) = unembedder.unembed(sample.state(read), vote_seed);
        unembedded_energies.push(m.energy_dense(&spins));
        fractions.push(broken as f64 / n_vars);
    }
    let relative_errors: Vec<f64> = sample
        .energies
        .iter()
        .map(|&x| relative_error(reference, x - offset))
        .collect();
    let unembedded_relative_errors: Vec<f64> = unembedded_energies
        .iter()
        .map(|&x| relative_error(reference, x))
        .collect();

    let med = |xs: &[f64]| stats::median(xs).unwrap_or(f64::NAN);
    let lo = |xs: &[f64]| stats::min(xs).unwrap_or(f64::NAN);
    let summary = PipelineSummary {
        median_embedded_energy: med(&sample.energies),
        min_embedded_energy: lo(&sample.energies),
        median_unembedded_energy: med(&unembedded_energies),
        min_unembedded_energy: lo(&unembedded_energies),
        median_relative_error: med(&relative_errors),
        min_relative_error: lo(&relative_errors),
        median_unembedded_relative_error: med(&unembedded_relative_errors),
        min_unembedded_relative_error: lo(&unembedded_relative_errors),
        median_chain_break_fraction: med(&fractions),
        min_chain_break_fraction: lo(&fractions),
    };
    Ok(PipelineResult {
        success: true,
        failure: None,
        embedder: String::new(),
        embedding_fingerprint: Some(hex_digest(e.to_canonical_json().as_bytes())),
        metrics: Some(metrics(m.graph(), e)?),
        chain_strength: Some(embedded.chain_strength),
        chain_offset: Some(offset),
        reference_energy: reference,
        reads: sample.num_reads,
        seed,
        embedded_energies: sample.energies,
        unembedded_energies,
        chain_break_fractions: fractions,
        relative_errors,
        unembedded_relative_errors,
        summary: Some(summary),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_chimera, generate_er, ChimeraSpec};
    use crate::greedy::{GreedyEmbedder, GreedyParams};
    use crate::ising::{brute_force_min, random_ising};

    fn identity(g: &Graph) -> Embedding {
        Embedding::from_chains(g.nodes().iter().map(|&v| (v, [v]))).unwrap()
    }

    #[test]
    fn utc_examples() {
        // 4-regular circulant on 6 nodes with |J| = 1
        let g = Graph::from_edges(0..6, (0..6).flat_map(|i| [(i, (i + 1) % 6), (i, (i + 2) % 6)])).unwrap();
        assert_eq!(g.stats().avg_degree, 4.0);
        let signs: Vec<f64> = (0..g.num_edges()).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = IsingModel::from_dense(g.clone(), vec![0.0; 6], signs.clone()).unwrap();
        assert!((utc_chain_strength(&m, 1.414) - 2.828).abs() < 1e-12);

        let lone = IsingModel::from_dense(Graph::empty(3), vec![0.3; 3], vec![]).unwrap();
        assert_eq!(utc_chain_strength(&lone, 0.75), 0.75);

        let scaled: Vec<f64> = signs.iter().map(|w| w * 3.5).collect();
        let m2 = IsingModel::from_dense(g, vec![0.0; 6], scaled).unwrap();
        assert!((utc_chain_strength(&m2, 1.0) - 3.5 * utc_chain_strength(&m, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn singleton_chains_reproduce_the_source() {
        let g = Graph::complete(4);
        let m = random_ising(&g, 3);
        let emb = embed_ising(&m, &identity(&g), &g, &ChainStrengthSpec::default()).unwrap();
        assert_eq!(emb.intra_chain_couplers, 0);
        assert_eq!(emb.model, m);
    }

    #[test]
    fn bias_split_is_uniform() {
        let h = Graph::empty(1);
        let m = IsingModel::from_dense(h, vec![0.6], vec![]).unwrap();
        let g = Graph::path(3);
        let e = Embedding::from_chains([(0, vec![0, 1, 2])]).unwrap();
        let emb = embed_ising(&m, &e, &g, &ChainStrengthSpec::fixed(2.0)).unwrap();
        for t in 0..3 {
            assert!((emb.model.h(t).unwrap() - 0.2).abs() < 1e-15);
        }
        assert_eq!(emb.model.j(0, 1), Some(-2.0));
        assert_eq!(emb.intra_chain_couplers, 2);
    }

    #[test]
    fn invalid_embeddings_are_rejected() {
        let m = random_ising(&Graph::complete(3), 1);
        let g = Graph::path(3);
        let e = identity(&Graph::complete(3));
        assert!(matches!(
            embed_ising(&m, &e, &g, &ChainStrengthSpec::default()),
            Err(Error::InvalidEmbedding(_))
        ));
    }

    #[test]
    fn strong_chains_keep_the_ground_state() {
        let h = Graph::complete(2);
        let m = IsingModel::from_dense(h, vec![0.1, -0.2], vec![-1.0]).unwrap();
        let g = Graph::path(3);
        let e = Embedding::from_chains([(0, vec![0, 1]), (1, vec![2])]).unwrap();
        let emb = embed_ising(&m, &e, &g, &ChainStrengthSpec::fixed(3.0)).unwrap();
        let (ground, _) = brute_force_min(&emb.model).unwrap();
        let un = unembed(&ground, &e, 0).unwrap();
        assert!(un.broken_chains.is_empty());
        let (opt, opt_e) = brute_force_min(&m).unwrap();
        assert_eq!(un.assignment, opt);
        assert_eq!(m.energy(&un.assignment).unwrap(), opt_e);
    }

    #[test]
    fn majority_vote_examples() {
        let e = Embedding::from_chains([(0, vec![0, 1, 2])]).unwrap();
        let s = SpinAssignment { values: [(0, 1), (1, 1), (2, -1)].into_iter().collect() };
        let out = unembed(&s, &e, 0).unwrap();
        assert_eq!(out.assignment.get(0), Some(1));
        assert_eq!(out.broken_chains, BTreeSet::from([0]));
        assert_eq!(out.chain_break_fraction, 1.0);

        let singles = Embedding::from_chains((0..5).map(|v| (v, [v]))).unwrap();
        let s = SpinAssignment { values: (0..5).map(|v| (v, if v % 2 == 0 { 1 } else { -1 })).collect() };
        assert_eq!(unembed(&s, &singles, 0).unwrap().chain_break_fraction, 0.0);

        let missing = SpinAssignment { values: [(0, 1)].into_iter().collect() };
        assert!(matches!(unembed(&missing, &e, 0), Err(Error::MissingNode(1))));
    }

    #[test]
    fn one_broken_chain_in_ten() {
        let e = Embedding::from_chains((0..10).map(|v| (v, vec![2 * v, 2 * v + 1]))).unwrap();
        let mut values: BTreeMap<NodeId, i8> = (0..20).map(|t| (t, 1)).collect();
        values.insert(7, -1);
        let out = unembed(&SpinAssignment { values }, &e, 4).unwrap();
        assert_eq!(out.chain_break_fraction, 0.1);
        assert_eq!(out.broken_chains, BTreeSet::from([3]));
    }

    #[test]
    fn even_chain_ties_use_both_values() {
        let e = Embedding::from_chains([(0, vec![0, 1])]).unwrap();
        let s = SpinAssignment { values: [(0, 1), (1, -1)].into_iter().collect() };
        let ups = (0..200).filter(|&seed| unembed(&s, &e, seed).unwrap().assignment.get(0) == Some(1)).count();
        assert!((60..=140).contains(&ups), "{ups}");
    }

    #[test]
    fn split_weights_sum_to_source_weights() {
        let g = generate_chimera(ChimeraSpec { m: 2 }).unwrap();
        let h = generate_er(8, 0.6, 3).unwrap();
        let m = random_ising(&h, 3);
        let e = GreedyEmbedder::default().embed(&h, &g, 1).embedding.unwrap();
        let emb = embed_ising(&m, &e, &g, &ChainStrengthSpec::default()).unwrap();
        for (v, bias) in m.biases() {
            let total: f64 = e.chain(v).unwrap().iter().map(|&t| emb.model.h(t).unwrap()).sum();
            assert!((total - bias).abs() < 1e-12);
        }
        for ((u, v), w) in m.couplings() {
            let total: f64 = couplers_between(&g, e.chain(u).unwrap(), e.chain(v).unwrap())
                .iter()
                .map(|&(a, b)| emb.model.j(a, b).unwrap())
                .sum();
            assert!((total - w).abs() < 1e-12);
        }
    }

    #[test]
    fn pipeline_on_native_subgraph() {
        let g = generate_chimera(ChimeraSpec { m: 1 }).unwrap();
        let h = g.induced_subgraph(&[0, 1, 4, 5].into_iter().collect());
        let m = random_ising(&h, 2);
        let cfg = PipelineConfig {
            sampler: SaParams { reads: 50, sweeps: 100, ..SaParams::default() },
            ..PipelineConfig::default()
        };
        let res = solve_pipeline(&m, &g, &GreedyEmbedder::default(), &cfg, 3).unwrap();
        assert!(res.success);
        assert_eq!(res.metrics.as_ref().unwrap().acl, 1.0);
        assert!(res.chain_break_fractions.iter().all(|&f| f == 0.0));
        assert_eq!(res.embedded_energies.len(), 50);
        assert_eq!(res.unembedded_energies.len(), 50);
        // singleton chains: both energy series coincide
        assert_eq!(res.embedded_energies, res.unembedded_energies);
    }

    #[test]
    fn pipeline_failure_is_a_value() {
        let m = random_ising(&Graph::complete(5), 0);
        let cfg = PipelineConfig {
            sampler: SaParams { reads: 5, sweeps: 10, ..SaParams::default() },
            ..PipelineConfig::default()
        };
        let res = solve_pipeline(&m, &Graph::complete(4), &GreedyEmbedder::new(GreedyParams::default()), &cfg, 0)
            .unwrap();
        assert!(!res.success);
        assert!(res.summary.is_none());
    }
}
