//! Ising models `E(s) = Σ h_i s_i + Σ J_ij s_i s_j`, samplers and reference
//! solvers.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::seed;

/// Largest model solved by exhaustive enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 26;

#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    graph: Graph,
    h: Vec<f64>,
    /// parallel to `edges`
    j: Vec<f64>,
    edges: Vec<(usize, usize)>,
    /// (neighbor position, J) per node position
    couplings: Vec<Vec<(usize, f64)>>,
}

impl IsingModel {
    /// Build from dense vectors: `h` in node order, `j` in [`Graph::edges`] order.
    pub fn from_dense(graph: Graph, h: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        if h.len() != graph.num_nodes() || j.len() != graph.num_edges() {
            return Err(Error::InvalidParameter(format!(
                "expected {} biases and {} couplings, got {} and {}",
                graph.num_nodes(),
                graph.num_edges(),
                h.len(),
                j.len()
            )));
        }
        if let Some(x) = h.iter().chain(&j).find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite weight {x}")));
        }
        let edges: Vec<(usize, usize)> = graph.edge_indices().collect();
        let mut couplings = vec![Vec::new(); graph.num_nodes()];
        for (&(a, b), &w) in edges.iter().zip(&j) {
            couplings[a].push((b, w));
            couplings[b].push((a, w));
        }
        Ok(IsingModel {
            graph,
            h,
            j,
            edges,
            couplings,
        })
    }

    /// Build from keyed maps; keys must match the graph's nodes and edges exactly.
    pub fn new(
        graph: Graph,
        h: &BTreeMap<NodeId, f64>,
        j: &BTreeMap<(NodeId, NodeId), f64>,
    ) -> Result<Self> {
        if h.len() != graph.num_nodes() || j.len() != graph.num_edges() {
            return Err(Error::InvalidParameter(
                "bias/coupling keys do not match the graph".into(),
            ));
        }
        let hv = graph
            .nodes()
            .iter()
            .map(|v| {
                h.get(v).copied().ok_or_else(|| {
                    Error::InvalidParameter(format!("missing bias for node {v}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let jv = graph
            .edges()
            .map(|(u, v)| {
                j.get(&(u, v))
                    .or_else(|| j.get(&(v, u)))
                    .copied()
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("missing coupling for edge ({u}, {v})"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        IsingModel::from_dense(graph, hv, jv)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn num_variables(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Biases in node order.
    pub fn h_dense(&self) -> &[f64] {
        &self.h
    }

    /// Couplings in edge order.
    pub fn j_dense(&self) -> &[f64] {
        &self.j
    }

    pub fn h(&self, id: NodeId) -> Option<f64> {
        self.graph.index_of(id).map(|i| self.h[i])
    }

    pub fn j(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let (iu, iv) = (self.graph.index_of(u)?, self.graph.index_of(v)?);
        let key = (iu.min(iv), iu.max(iv));
        self.edges.binary_search(&key).ok().map(|k| self.j[k])
    }

    pub fn biases(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.graph.nodes().iter().copied().zip(self.h.iter().copied())
    }

    pub fn couplings(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.edges
            .iter()
            .map(|&(a, b)| (self.graph.id(a), self.graph.id(b)))
            .zip(self.j.iter().copied())
    }

    pub(crate) fn couplings_by_index(&self) -> &[Vec<(usize, f64)>] {
        &self.couplings
    }

    /// Energy of a spin vector aligned with node order.
    pub fn energy_dense(&self, spins: &[i8]) -> f64 {
        let linear: f64 = self
            .h
            .iter()
            .zip(spins)
            .map(|(h, &s)| h * f64::from(s))
            .sum();
        let quadratic: f64 = self
            .edges
            .iter()
            .zip(&self.j)
            .map(|(&(a, b), w)| w * f64::from(spins[a] * spins[b]))
            .sum();
        linear + quadratic
    }

    pub fn energy(&self, x: &SpinAssignment) -> Result<f64> {
        let dense = x.dense_for(&self.graph)?;
        Ok(self.energy_dense(&dense))
    }

    pub fn to_json(&self) -> IsingJson {
        IsingJson {
            n: self.graph.num_nodes(),
            h: self.biases().collect(),
            j: self.couplings().map(|((u, v), w)| (u, v, w)).collect(),
        }
    }

    pub fn from_json(doc: &IsingJson) -> Result<Self> {
        let nodes = (0..doc.n).chain(doc.h.keys().copied());
        let graph = Graph::from_edges(nodes, doc.j.iter().map(|&(u, v, _)| (u, v)))?;
        let j: BTreeMap<(NodeId, NodeId), f64> = doc
            .j
            .iter()
            .map(|&(u, v, w)| ((u.min(v), u.max(v)), w))
            .collect();
        let mut h = doc.h.clone();
        for &v in graph.nodes() {
            h.entry(v).or_insert(0.0);
        }
        IsingModel::new(graph, &h, &j)
    }
}

/// Serialized model: `{"n": int, "h": {node: real}, "J": [[u, v, real], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingJson {
    pub n: usize,
    pub h: BTreeMap<NodeId, f64>,
    #[serde(rename = "J")]
    pub j: Vec<(NodeId, NodeId, f64)>,
}

/// Spin values keyed by node id.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpinAssignment {
    pub values: BTreeMap<NodeId, i8>,
}

impl SpinAssignment {
    pub fn from_dense(graph: &Graph, spins: &[i8]) -> Self {
        SpinAssignment {
            values: graph.nodes().iter().copied().zip(spins.iter().copied()).collect(),
        }
    }

    pub fn get(&self, id: NodeId) -> Option<i8> {
        self.values.get(&id).copied()
    }

    pub(crate) fn dense_for(&self, graph: &Graph) -> Result<Vec<i8>> {
        graph
            .nodes()
            .iter()
            .map(|&v| self.get(v).ok_or(Error::MissingNode(v)))
            .collect()
    }
}

/// Draws every `h_i` and `J_ij` independently from U[-1, 1].
pub fn random_ising(g: &Graph, seed: u64) -> IsingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = (0..g.num_nodes())
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    let j = (0..g.num_edges())
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    IsingModel::from_dense(g.clone(), h, j).expect("dimensions match by construction")
}

/// Exhaustive minimum. Ties resolve to the lexicographically smallest
/// assignment in node-id order with `-1 < +1`.
pub fn brute_force_min(m: &IsingModel) -> Result<(SpinAssignment, f64)> {
    let n = m.num_variables();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            nodes: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let (spins, e) = gray_code_min(m);
    Ok((SpinAssignment::from_dense(m.graph(), &spins), e))
}

/// Gray-code walk with incremental energies. Node position `i` maps to bit
/// `n-1-i` of the packed state so integer order is lexicographic order.
fn gray_code_min(m: &IsingModel) -> (Vec<i8>, f64) {
    let n = m.num_variables();
    let couplings = m.couplings_by_index();
    let mut spins = vec![-1i8; n];
    let mut energy = m.energy_dense(&spins);
    let mut state: u64 = 0;
    let mut best_state = state;
    let mut best_exact = energy;
    let unpack = |packed: u64| -> Vec<i8> {
        (0..n)
            .map(|i| if packed >> (n - 1 - i) & 1 == 1 { 1 } else { -1 })
            .collect()
    };
    for k in 1u64..(1u64 << n) {
        let bit = k.trailing_zeros() as usize;
        let i = n - 1 - bit;
        let field: f64 = m.h[i]
            + couplings[i]
                .iter()
                .map(|&(j, w)| w * f64::from(spins[j]))
                .sum::<f64>();
        energy -= 2.0 * f64::from(spins[i]) * field;
        spins[i] = -spins[i];
        state ^= 1u64 << bit;
        let tol = 1e-9 * (1.0 + best_exact.abs());
        if energy < best_exact - tol {
            best_state = state;
            best_exact = m.energy_dense(&spins);
            energy = best_exact;
        } else if energy <= best_exact + tol {
            let exact = m.energy_dense(&spins);
            energy = exact;
            if exact < best_exact || (exact == best_exact && state < best_state) {
                best_state = state;
                best_exact = exact;
            }
        }
    }
    (unpack(best_state), best_exact)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub reads: usize,
    pub sweeps: usize,
    pub beta_range: (f64, f64),
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            reads: 1000,
            sweeps: 1000,
            beta_range: (0.1, 10.0),
            seed: 0,
        }
    }
}

impl SaParams {
    fn check(&self) -> Result<()> {
        let (lo, hi) = self.beta_range;
        if self.reads < 1 || self.sweeps < 1 {
            return Err(Error::InvalidParameter(
                "simulated annealing needs reads >= 1 and sweeps >= 1".into(),
            ));
        }
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta range must satisfy 0 < min < max, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Geometric inverse-temperature schedule with `sweeps` points.
pub fn geometric_schedule(beta_min: f64, beta_max: f64, sweeps: usize) -> Vec<f64> {
    if sweeps == 1 {
        return vec![beta_max];
    }
    let (l0, l1) = (beta_min.ln(), beta_max.ln());
    let step = (l1 - l0) / (sweeps - 1) as f64;
    (0..sweeps).map(|k| (l0 + step * k as f64).exp()).collect()
}

/// Reads from independent Metropolis annealing runs.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    nodes: Vec<NodeId>,
    states: Vec<Vec<i8>>,
    pub energies: Vec<f64>,
    pub num_reads: usize,
    pub seed: u64,
}

impl SampleSet {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Spin vector of read `i`, aligned with [`SampleSet::nodes`].
    pub fn state(&self, i: usize) -> &[i8] {
        &self.states[i]
    }

    pub fn assignment(&self, i: usize) -> SpinAssignment {
        SpinAssignment {
            values: self
                .nodes
                .iter()
                .copied()
                .zip(self.states[i].iter().copied())
                .collect(),
        }
    }

    pub fn assignments(&self) -> impl Iterator<Item = SpinAssignment> + '_ {
        (0..self.num_reads).map(|i| self.assignment(i))
    }

    pub fn min_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV rows `read_index,energy,spins` with spins as `+`/`-` characters in
    /// ascending node order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["read_index", "energy", "spins"])?;
        for (i, (state, e)) in self.states.iter().zip(&self.energies).enumerate() {
            let spins: String = state.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect();
            w.write_record([i.to_string(), e.to_string(), spins])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn simulated_annealing(m: &IsingModel, params: &SaParams) -> Result<SampleSet> {
    params.check()?;
    let schedule = geometric_schedule(params.beta_range.0, params.beta_range.1, params.sweeps);
    let states: Vec<Vec<i8>> = (0..params.reads)
        .into_par_iter()
        .map(|read| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(params.seed, &[read as u64]));
            anneal_once(m, &schedule, &mut rng)
        })
        .collect();
    let energies = states.iter().map(|s| m.energy_dense(s)).collect();
    Ok(SampleSet {
        nodes: m.graph().nodes().to_vec(),
        states,
        energies,
        num_reads: params.reads,
        seed: params.seed,
    })
}

fn anneal_once(m: &IsingModel, schedule: &[f64], rng: &mut ChaCha8Rng) -> Vec<i8> {
    let n = m.num_variables();
    let couplings = m.couplings_by_index();
    let mut spins: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    for &beta in schedule {
        for i in 0..n {
            let field = m.h[i]
                + couplings[i]
                    .iter()
                    .map(|&(j, w)| w * f64::from(spins[j]))
                    .sum::<f64>();
            let delta = -2.0 * f64::from(spins[i]) * field;
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                spins[i] = -spins[i];
            }
        }
    }
    spins
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBudget {
    pub restarts: usize,
    pub sa: SaParams,
    /// Skip exhaustive search even for small models.
    pub force_sampling: bool,
}

impl Default for ReferenceBudget {
    fn default() -> Self {
        ReferenceBudget {
            restarts: 4,
            sa: SaParams {
                reads: 100,
                ..SaParams::default()
            },
            force_sampling: false,
        }
    }
}

/// Best classical energy: exact for small models, otherwise the minimum over
/// independent annealing restarts.
pub fn reference_energy(m: &IsingModel, budget: &ReferenceBudget) -> Result<f64> {
    if m.num_variables() == 0 {
        return Ok(0.0);
    }
    if !budget.force_sampling && m.num_variables() <= BRUTE_FORCE_LIMIT {
        return brute_force_min(m).map(|(_, e)| e);
    }
    let mut best = f64::INFINITY;
    for restart in 0..budget.restarts.max(1) {
        let params = SaParams {
            seed: seed::derive(budget.sa.seed, &[0x5245_4600, restart as u64]),
            ..budget.sa.clone()
        };
        best = best.min(simulated_annealing(m, &params)?.min_energy());
    }
    Ok(best)
}

/// `|(e_ref - e)/e_ref|`, or `|e_ref - e|` when `|e_ref| < 1e-9`.
pub fn relative_error(e_ref: f64, e: f64) -> f64 {
    if e_ref.abs() >= 1e-9 {
        ((e_ref - e) / e_ref).abs()
    } else {
        (e_ref - e).abs()
    }
}
