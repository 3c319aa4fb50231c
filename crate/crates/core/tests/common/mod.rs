//! Shared fixtures for integration tests: random valid embeddings and the
//! three single-condition validator mutations.

#![allow(dead_code)]

use std::collections::BTreeSet;

use qaembed::clique::{clique_embedding, preprocess};
use qaembed::embedding::{couplers_between, validate};
use qaembed::graph::{break_graph, generate_chimera, generate_er, ChimeraSpec};
use qaembed::greedy::{greedy_embed, GreedyParams};
use qaembed::{Embedding, Graph, NodeId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A source graph, a target graph and a valid embedding between them.
#[derive(Clone, Debug)]
pub struct Case {
    pub h: Graph,
    pub g: Graph,
    pub e: Embedding,
    pub origin: &'static str,
}

pub fn chimera(m: usize) -> Graph {
    generate_chimera(ChimeraSpec::new(m).unwrap()).unwrap()
}

/// Random source with at least one edge and `n >= 2` nodes.
fn source_with_edge(n: usize, rng: &mut ChaCha8Rng) -> Graph {
    loop {
        let p = rng.gen_range(0.15..=1.0);
        let h = generate_er(n, p, rng.gen()).unwrap();
        if h.num_edges() > 0 {
            return h;
        }
    }
}

/// Greedy embedding of a random ER source into a random (possibly broken)
/// Chimera graph with at most 128 nodes.
pub fn greedy_case(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> Option<Case> {
    let m = rng.gen_range(1..=max_m);
    let mut g = chimera(m);
    if rng.gen_bool(0.5) {
        g = break_graph(&g, rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.1), rng.gen()).unwrap();
    }
    let n = rng.gen_range(2..=max_n.min(g.num_nodes()).max(2));
    let h = source_with_edge(n, rng);
    let out = greedy_embed(&h, &g, &GreedyParams { seed: rng.gen(), ..GreedyParams::default() });
    out.embedding.map(|e| Case { h, g, e, origin: "greedy" })
}

/// Clique embedding of K_n on C_m, used for a random subgraph of K_n.
pub fn clique_case(rng: &mut ChaCha8Rng, max_m: usize) -> Case {
    let m = rng.gen_range(1..=max_m);
    let g = chimera(m);
    let cache = preprocess(&g).unwrap();
    let n = rng.gen_range(2..=4 * m);
    let h = source_with_edge(n, rng);
    let e = clique_embedding(&cache, n).unwrap();
    Case { h, g, e, origin: "clique" }
}

/// Grow random chains by unused neighboring qubits; validity is preserved.
pub fn grow(case: &mut Case, steps: usize, max_qubits: usize, rng: &mut ChaCha8Rng) {
    let vars: Vec<NodeId> = case.h.nodes().to_vec();
    for _ in 0..steps {
        if case.e.num_qubits() >= max_qubits {
            return;
        }
        let used = case.e.qubits();
        let v = *vars.choose(rng).unwrap();
        let chain = case.e.chain(v).unwrap().to_vec();
        let free: BTreeSet<NodeId> = chain
            .iter()
            .flat_map(|&t| case.g.neighbors(t))
            .filter(|t| !used.contains(t))
            .collect();
        let free: Vec<NodeId> = free.into_iter().collect();
        if let Some(&t) = free.choose(rng) {
            case.e.insert(v, chain.into_iter().chain([t])).unwrap();
        }
    }
}

/// Add to one chain a qubit that is not adjacent to it. An unused target
/// qubit is preferred; otherwise a fresh isolated target node is added.
/// Returns the mutated case and the variable whose chain is disconnected.
pub fn break_connectivity(case: &Case, rng: &mut ChaCha8Rng) -> (Case, NodeId) {
    let mut out = case.clone();
    let used = case.e.qubits();
    let mut vars: Vec<NodeId> = case.h.nodes().to_vec();
    vars.shuffle(rng);
    for &v in &vars {
        let chain = case.e.chain(v).unwrap();
        let near: BTreeSet<NodeId> = chain.iter().flat_map(|&t| case.g.neighbors(t)).collect();
        let far: Vec<NodeId> = case
            .g
            .nodes()
            .iter()
            .copied()
            .filter(|t| !used.contains(t) && !near.contains(t))
            .collect();
        if let Some(&t) = far.choose(rng) {
            out.e.insert(v, chain.iter().copied().chain([t])).unwrap();
            return (out, v);
        }
    }
    let v = vars[0];
    let fresh = case.g.nodes().last().unwrap() + 1;
    let nodes: Vec<NodeId> = case.g.nodes().iter().copied().chain([fresh]).collect();
    out.g = Graph::from_edges(nodes, case.g.edges().collect::<Vec<_>>()).unwrap();
    out.e.insert(v, case.e.chain(v).unwrap().iter().copied().chain([fresh])).unwrap();
    (out, v)
}

/// For a source edge (u, v), copy into φ(v) a qubit of φ(u) that touches φ(v).
/// Returns the mutated case and the overlapping pair.
pub fn break_disjointness(case: &Case, rng: &mut ChaCha8Rng) -> (Case, (NodeId, NodeId)) {
    let edges: Vec<(NodeId, NodeId)> = case.h.edges().collect();
    let (mut u, mut v) = *edges.choose(rng).unwrap();
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut u, &mut v);
    }
    let cu = case.e.chain(u).unwrap();
    let cv = case.e.chain(v).unwrap();
    let (a, b) = couplers_between(&case.g, cu, cv)[0];
    let shared = if cu.binary_search(&a).is_ok() { a } else { b };
    let mut out = case.clone();
    out.e.insert(v, cv.iter().copied().chain([shared])).unwrap();
    (out, (u.min(v), u.max(v)))
}

/// Remove every target coupler between the chains of one source edge.
pub fn delete_covered_edge(case: &Case, rng: &mut ChaCha8Rng) -> (Case, (NodeId, NodeId)) {
    let edges: Vec<(NodeId, NodeId)> = case.h.edges().collect();
    let (u, v) = *edges.choose(rng).unwrap();
    let couplers: BTreeSet<(NodeId, NodeId)> =
        couplers_between(&case.g, case.e.chain(u).unwrap(), case.e.chain(v).unwrap()).into_iter().collect();
    let mut out = case.clone();
    out.g = case.g.without_edges(&couplers);
    (out, (u, v))
}

pub fn is_valid(case: &Case) -> bool {
    validate(&case.h, &case.g, &case.e).unwrap().valid
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
