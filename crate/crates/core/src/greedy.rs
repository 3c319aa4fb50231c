//! Greedy minor embedding by node-weighted shortest paths with
//! rip-up-and-reroute refinement.
//!
//! Target nodes carry weight `penalty_base^usage`, where `usage` counts the
//! chains currently holding the node. Chains may overlap while the search is
//! running; the exponential weights push them apart. A vertex is (re)placed
//! by picking the root minimizing its own weight plus the weighted distances
//! to every embedded neighbor chain, then joining the root to each neighbor
//! chain along one shortest path.
//!
//! Construction places vertices once in descending-degree order. Refinement
//! repeats full rip-up passes and keeps the best state under the objective
//! `(overloaded nodes, total qubits, longest chain)`, stopping once the best
//! state is overlap-free and `chain_length_patience` passes in a row brought
//! no improvement.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{validate, Embedding};
use crate::graph::Graph;
use crate::seed;

/// Upper bound on a single node weight.
const WEIGHT_CEILING: f64 = 1e15;
/// Relative amplitude of the tie-breaking noise on node weights.
const JITTER: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyParams {
    pub tries: usize,
    pub chain_length_patience: usize,
    pub max_passes: usize,
    /// Passes without improvement tolerated while chains still overlap.
    pub max_no_improvement: usize,
    pub penalty_base: f64,
    pub seed: u64,
    /// Wall-clock budget per try; exceeding it discards the try.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_budget: Option<Duration>,
}

impl Default for GreedyParams {
    fn default() -> Self {
        GreedyParams {
            tries: 1,
            chain_length_patience: 10,
            max_passes: 1000,
            max_no_improvement: 10,
            penalty_base: 10.0,
            seed: 0,
            time_budget: None,
        }
    }
}

/// Lexicographic refinement objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Objective {
    pub overloaded: usize,
    pub total_qubits: usize,
    pub max_chain: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    /// More source vertices or edges than the target can possibly host.
    TooLarge,
    /// Some vertex could not reach all of its neighbor chains.
    Unreachable,
    /// Overlaps persisted through `max_no_improvement` stalled passes.
    Stalled,
    /// `max_passes` ran out with overlaps remaining.
    PassesExhausted,
    TimedOut,
    /// The embedder does not support this target.
    Unsupported,
    /// The embedder cannot host a source of this size.
    Capacity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedOutcome {
    pub embedding: Option<Embedding>,
    pub success: bool,
    pub failure: Option<Failure>,
    pub passes_used: usize,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    pub try_index: usize,
    pub objective: Option<Objective>,
}

impl EmbedOutcome {
    pub fn failed(failure: Failure, passes_used: usize, wall_time: Duration) -> Self {
        EmbedOutcome {
            embedding: None,
            success: false,
            failure: Some(failure),
            passes_used,
            wall_time,
            try_index: 0,
            objective: None,
        }
    }

    pub fn timed_out(&self) -> bool {
        self.failure == Some(Failure::TimedOut)
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(secs.max(0.0)))
    }
}

/// Uniform interface for pluggable embedders.
pub trait Embedder: Sync {
    fn name(&self) -> &str;
    fn embed(&self, h: &Graph, g: &Graph, seed: u64) -> EmbedOutcome;
}

#[derive(Clone, Debug, Default)]
pub struct GreedyEmbedder {
    pub params: GreedyParams,
}

impl GreedyEmbedder {
    pub fn new(params: GreedyParams) -> Self {
        GreedyEmbedder { params }
    }
}

impl Embedder for GreedyEmbedder {
    fn name(&self) -> &str {
        "greedy"
    }

    fn embed(&self, h: &Graph, g: &Graph, seed: u64) -> EmbedOutcome {
        greedy_embed(h, g, &GreedyParams { seed, ..self.params.clone() })
    }
}

/// Run `p.tries` independent attempts and keep the successful one with the
/// fewest qubits (earliest try on ties). Try 0 uses `p.seed` itself.
pub fn greedy_embed(h: &Graph, g: &Graph, p: &GreedyParams) -> EmbedOutcome {
    let tries = p.tries.max(1);
    let outcomes: Vec<EmbedOutcome> = (0..tries)
        .into_par_iter()
        .map(|t| {
            let seed = if t == 0 { p.seed } else { seed::derive(p.seed, &[t as u64]) };
            let mut out = embed_once(h, g, p, seed);
            out.try_index = t;
            out
        })
        .collect();
    let best = outcomes
        .iter()
        .filter(|o| o.success)
        .min_by_key(|o| (o.objective.map(|x| x.total_qubits), o.try_index));
    match best {
        Some(o) => o.clone(),
        None => outcomes.into_iter().next().expect("at least one try"),
    }
}

/// Fraction of `trials` independent runs that succeed.
pub fn embed_probability(h: &Graph, g: &Graph, p: &GreedyParams, trials: usize) -> f64 {
    let trials = trials.max(1);
    let successes = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let params = GreedyParams {
                seed: seed::derive(p.seed, &[t as u64]),
                ..p.clone()
            };
            greedy_embed(h, g, &params).success
        })
        .count();
    successes as f64 / trials as f64
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path tree grown from one chain.
struct ChainDistances {
    /// Weight of the best path from the chain to `t`, counting `t` itself.
    reach: Vec<f64>,
    parent: Vec<usize>,
    in_chain: Vec<bool>,
}

struct State<'a> {
    source: &'a Graph,
    target: &'a Graph,
    chains: Vec<Vec<usize>>,
    usage: Vec<u32>,
    weight_table: Vec<f64>,
    /// Per-node multiplicative noise, redrawn for every placement, that
    /// breaks ties among equal-weight paths at random.
    jitter: Vec<f64>,
    rng: ChaCha8Rng,
    heap: BinaryHeap<HeapEntry>,
}

impl<'a> State<'a> {
    fn new(source: &'a Graph, target: &'a Graph, base: f64, seed: u64) -> Self {
        let cap = (WEIGHT_CEILING.ln() / base.ln()).floor().max(1.0) as usize;
        State {
            source,
            target,
            chains: vec![Vec::new(); source.num_nodes()],
            usage: vec![0; target.num_nodes()],
            weight_table: (0..=cap).map(|k| base.powi(k as i32).min(WEIGHT_CEILING)).collect(),
            jitter: vec![1.0; target.num_nodes()],
            rng: ChaCha8Rng::seed_from_u64(seed),
            heap: BinaryHeap::new(),
        }
    }

    fn weight(&self, t: usize) -> f64 {
        let k = (self.usage[t] as usize).min(self.weight_table.len() - 1);
        self.weight_table[k] * self.jitter[t]
    }

    /// Dijkstra from `chain`; nodes with usage `>= bound` are impassable.
    fn distances_from(&mut self, chain: &[usize], bound: u32) -> ChainDistances {
        let n = self.target.num_nodes();
        let mut reach = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut in_chain = vec![false; n];
        self.heap.clear();
        for &t in chain {
            reach[t] = 0.0;
            in_chain[t] = true;
            self.heap.push(HeapEntry { cost: 0.0, node: t });
        }
        while let Some(HeapEntry { cost, node }) = self.heap.pop() {
            if cost > reach[node] {
                continue;
            }
            for &next in self.target.neighbors_by_index(node) {
                if self.usage[next] >= bound {
                    continue;
                }
                let c = cost + self.weight(next);
                if c < reach[next] {
                    reach[next] = c;
                    parent[next] = node;
                    self.heap.push(HeapEntry { cost: c, node: next });
                }
            }
        }
        ChainDistances { reach, parent, in_chain }
    }

    fn restore_chain(&mut self, u: usize, chain: Vec<usize>) {
        for &t in &chain {
            self.usage[t] += 1;
        }
        self.chains[u] = chain;
    }

    fn remove_chain(&mut self, u: usize) {
        for &t in &self.chains[u] {
            self.usage[t] -= 1;
        }
        self.chains[u].clear();
    }

    /// Place vertex `u` against the current usage map, avoiding nodes whose
    /// usage reaches `bound`. Arms of the new chain that serve a single
    /// neighbor are handed to that neighbor until its chain holds
    /// `arm_limit` nodes (0 = no limit). Returns false, leaving the state
    /// untouched, when no admissible root reaches every embedded neighbor.
    fn place(&mut self, u: usize, bound: u32, arm_limit: usize) -> bool {
        let neighbors: Vec<usize> = self
            .source
            .neighbors_by_index(u)
            .iter()
            .copied()
            .filter(|&v| !self.chains[v].is_empty())
            .collect();
        let n = self.target.num_nodes();
        for j in self.jitter.iter_mut() {
            *j = 1.0 + JITTER * self.rng.gen::<f64>();
        }

        let trees: Vec<ChainDistances> = neighbors
            .iter()
            .map(|&v| {
                let chain = self.chains[v].clone();
                self.distances_from(&chain, bound)
            })
            .collect();

        // every neighbor chain charges the root its weight, including a
        // chain the root already belongs to
        let total: Vec<f64> = (0..n)
            .map(|q| {
                if self.usage[q] >= bound {
                    return f64::INFINITY;
                }
                let w = self.weight(q);
                if trees.is_empty() {
                    return w;
                }
                trees.iter().map(|t| if t.in_chain[q] { w } else { t.reach[q] }).sum()
            })
            .collect();

        let mut best = f64::INFINITY;
        let mut root = usize::MAX;
        let mut ties = 0u32;
        for (q, &c) in total.iter().enumerate() {
            if !c.is_finite() {
                continue;
            }
            match c.total_cmp(&best) {
                Ordering::Less => {
                    best = c;
                    root = q;
                    ties = 1;
                }
                Ordering::Equal => {
                    ties += 1;
                    if self.rng.gen_range(0..ties) == 0 {
                        root = q;
                    }
                }
                Ordering::Greater => {}
            }
        }
        if root == usize::MAX {
            return false;
        }

        // grow the chain as a tree one neighbor at a time, leaving from
        // whichever chain node is already closest to that neighbor
        let mut chain = vec![root];
        let mut up = vec![usize::MAX; n];
        let mut refs = vec![0u32; n];
        refs[root] = 1;
        let mut links = Vec::with_capacity(trees.len());
        for tree in &trees {
            let mut cur = *chain
                .iter()
                .min_by(|&&a, &&b| tree.reach[a].total_cmp(&tree.reach[b]))
                .expect("chain holds the root");
            if !tree.in_chain[cur] {
                let mut next = tree.parent[cur];
                while !tree.in_chain[next] {
                    chain.push(next);
                    up[next] = cur;
                    refs[cur] += 1;
                    cur = next;
                    next = tree.parent[next];
                }
            }
            refs[cur] += 1;
            links.push(cur);
        }

        // a node referenced only by one link is the tip of an arm serving
        // that neighbor alone; move it over and continue toward the root
        let mut handed = vec![false; n];
        for (k, &v) in neighbors.iter().enumerate() {
            let mut x = links[k];
            while x != root
                && refs[x] == 1
                && (arm_limit == 0 || self.chains[v].len() < arm_limit)
            {
                handed[x] = true;
                self.chains[v].push(x);
                self.usage[x] += 1;
                x = up[x];
            }
            self.chains[v].sort_unstable();
        }
        chain.retain(|&t| !handed[t]);
        chain.sort_unstable();
        for &t in &chain {
            self.usage[t] += 1;
        }
        self.chains[u] = chain;
        true
    }

    fn objective(&self) -> Objective {
        Objective {
            overloaded: self.usage.iter().filter(|&&c| c > 1).count(),
            total_qubits: self.chains.iter().map(Vec::len).sum(),
            max_chain: self.chains.iter().map(Vec::len).max().unwrap_or(0),
        }
    }

    fn embedding(&self, chains: &[Vec<usize>]) -> Embedding {
        Embedding::from_chains(chains.iter().enumerate().map(|(u, c)| {
            (self.source.id(u), c.iter().map(|&t| self.target.id(t)).collect::<Vec<_>>())
        }))
        .expect("chains are non-empty and duplicate-free")
    }
}

/// Connectivity-first order: repeatedly take the vertex with the most
/// already-ordered neighbors, preferring higher degree, then a seeded
/// shuffle.
fn vertex_order(h: &Graph, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = h.num_nodes();
    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(rng);
    let mut rank = vec![0usize; n];
    for (i, &u) in shuffled.iter().enumerate() {
        rank[u] = i;
    }
    let mut heap = BinaryHeap::new();
    for u in 0..n {
        heap.push((0usize, h.neighbors_by_index(u).len(), std::cmp::Reverse(rank[u]), u));
    }
    let mut seen = vec![0usize; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while let Some((count, _, _, u)) = heap.pop() {
        if done[u] || count != seen[u] {
            continue;
        }
        done[u] = true;
        order.push(u);
        for &v in h.neighbors_by_index(u) {
            if !done[v] {
                seen[v] += 1;
                heap.push((seen[v], h.neighbors_by_index(v).len(), std::cmp::Reverse(rank[v]), v));
            }
        }
    }
    order
}

/// Singleton chains on the same ids are optimal whenever `h` is already a
/// subgraph of `g`.
fn identity_embedding(h: &Graph, g: &Graph, start: Instant) -> Option<EmbedOutcome> {
    if !h.nodes().iter().all(|&v| g.contains_node(v)) || !h.edges().all(|(a, b)| g.has_edge(a, b)) {
        return None;
    }
    let embedding = Embedding::from_chains(h.nodes().iter().map(|&v| (v, vec![v]))).ok()?;
    let max_chain = usize::from(h.num_nodes() > 0);
    Some(EmbedOutcome {
        embedding: Some(embedding),
        success: true,
        failure: None,
        passes_used: 0,
        wall_time: start.elapsed(),
        try_index: 0,
        objective: Some(Objective { overloaded: 0, total_qubits: h.num_nodes(), max_chain }),
    })
}

fn embed_once(h: &Graph, g: &Graph, p: &GreedyParams, seed: u64) -> EmbedOutcome {
    let start = Instant::now();
    if h.num_nodes() == 0 {
        return EmbedOutcome {
            embedding: Some(Embedding::new()),
            success: true,
            failure: None,
            passes_used: 0,
            wall_time: start.elapsed(),
            try_index: 0,
            objective: Some(Objective { overloaded: 0, total_qubits: 0, max_chain: 0 }),
        };
    }
    if h.num_nodes() > g.num_nodes() || h.num_edges() > g.num_edges() {
        return EmbedOutcome::failed(Failure::TooLarge, 0, start.elapsed());
    }
    if let Some(out) = identity_embedding(h, g, start) {
        return out;
    }
    let base = if p.penalty_base > 1.0 { p.penalty_base } else { 10.0 };
    let mut state = State::new(h, g, base, seed);

    for u in vertex_order(h, &mut state.rng) {
        if !state.place(u, u32::MAX, 0) {
            return EmbedOutcome::failed(Failure::Unreachable, 0, start.elapsed());
        }
    }

    let mut best = state.objective();
    let mut best_chains = state.chains.clone();
    let mut stall = 0usize;
    let mut passes = 0usize;
    let mut failure = None;
    loop {
        if best.overloaded == 0 && stall >= p.chain_length_patience {
            break;
        }
        if best.overloaded > 0 && stall >= p.max_no_improvement {
            failure = Some(Failure::Stalled);
            break;
        }
        if passes >= p.max_passes {
            if best.overloaded > 0 {
                failure = Some(Failure::PassesExhausted);
            }
            break;
        }
        if let Some(budget) = p.time_budget {
            if start.elapsed() > budget {
                failure = Some(Failure::TimedOut);
                break;
            }
        }
        passes += 1;
        // once overlap-free, arms may not grow a neighbor past the longest
        // chain of the best state
        let arm_limit = if best.overloaded == 0 { best.max_chain } else { 0 };
        let mut improved = false;
        for u in vertex_order(h, &mut state.rng) {
            // never route through nodes as full as the fullest node of the
            // old chain; keep the old chain when no such route exists
            let fill = state.chains[u].iter().map(|&t| state.usage[t]).max().unwrap_or(1);
            let old = state.chains[u].clone();
            state.remove_chain(u);
            if !state.place(u, fill, arm_limit) {
                state.restore_chain(u, old);
            }
            let current = state.objective();
            if current < best {
                best = current;
                best_chains.clone_from(&state.chains);
                improved = true;
            }
        }
        if improved {
            stall = 0;
        } else {
            stall += 1;
        }
    }

    if let Some(f) = failure {
        return EmbedOutcome::failed(f, passes, start.elapsed());
    }
    let embedding = state.embedding(&best_chains);
    let report = validate(h, g, &embedding).expect("chains reference target nodes only");
    assert!(report.valid, "overlap-free greedy state failed validation: {report:?}");
    EmbedOutcome {
        embedding: Some(embedding),
        success: true,
        failure: None,
        passes_used: passes,
        wall_time: start.elapsed(),
        try_index: 0,
        objective: Some(best),
    }
}
