//! Minor embeddings: the chain map, its validator and quality metrics.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Map from each source variable to its chain of target nodes. Chains are
/// non-empty and stored ascending, so the JSON form is canonical.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    chains: BTreeMap<NodeId, Vec<NodeId>>,
}

impl Embedding {
    pub fn new() -> Self {
        Embedding::default()
    }

    pub fn from_chains<I, C>(chains: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, C)>,
        C: IntoIterator<Item = NodeId>,
    {
        let mut e = Embedding::new();
        for (v, chain) in chains {
            e.insert(v, chain)?;
        }
        Ok(e)
    }

    /// Insert or replace the chain of `v`. Duplicate target nodes are an error.
    pub fn insert(&mut self, v: NodeId, chain: impl IntoIterator<Item = NodeId>) -> Result<()> {
        let mut nodes: Vec<NodeId> = chain.into_iter().collect();
        let len = nodes.len();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::InvalidEmbedding(format!("empty chain for variable {v}")));
        }
        if nodes.len() != len {
            return Err(Error::InvalidEmbedding(format!(
                "chain for variable {v} repeats a target node"
            )));
        }
        self.chains.insert(v, nodes);
        Ok(())
    }

    pub fn chain(&self, v: NodeId) -> Option<&[NodeId]> {
        self.chains.get(&v).map(Vec::as_slice)
    }

    pub fn chains(&self) -> impl Iterator<Item = (NodeId, &[NodeId])> {
        self.chains.iter().map(|(&v, c)| (v, c.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn remove(&mut self, v: NodeId) -> Option<Vec<NodeId>> {
        self.chains.remove(&v)
    }

    /// Restrict to the given source variables.
    pub fn restrict(&self, keep: impl IntoIterator<Item = NodeId>) -> Embedding {
        let chains = keep
            .into_iter()
            .filter_map(|v| self.chains.get(&v).map(|c| (v, c.clone())))
            .collect();
        Embedding { chains }
    }

    /// Relabel source variables through `f`.
    pub fn relabel(&self, mut f: impl FnMut(NodeId) -> NodeId) -> Embedding {
        Embedding {
            chains: self.chains.iter().map(|(&v, c)| (f(v), c.clone())).collect(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.chains.values().map(Vec::len).sum()
    }

    /// Union of all chain nodes, ascending.
    pub fn qubits(&self) -> BTreeSet<NodeId> {
        self.chains.values().flatten().copied().collect()
    }

    /// Byte-stable JSON: `{"chains": {"<source>": [<target>, ...]}}`.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("embedding serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Embedding = serde_json::from_str(text)?;
        Embedding::from_chains(raw.chains)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    /// Source nodes whose chain is absent.
    pub unembedded: Vec<NodeId>,
    /// Source nodes whose chain induces a disconnected target subgraph.
    pub connectivity_violations: Vec<NodeId>,
    /// Source edges with no target coupler between the two chains.
    pub missing_edges: Vec<(NodeId, NodeId)>,
    /// Pairs of source nodes whose chains share a target node.
    pub overlap_pairs: Vec<(NodeId, NodeId)>,
}

/// Check an embedding of `h` into `g`: chain connectivity, edge coverage,
/// pairwise disjointness, and that every source node has a chain. All
/// violations are collected.
pub fn validate(h: &Graph, g: &Graph, e: &Embedding) -> Result<ValidationReport> {
    for (v, chain) in e.chains() {
        if !h.contains_node(v) {
            return Err(Error::DomainMismatch(format!(
                "chain for variable {v} which is not in the source graph"
            )));
        }
        if let Some(&t) = chain.iter().find(|&&t| !g.contains_node(t)) {
            return Err(Error::UnknownTargetNode(t));
        }
    }

    let unembedded: Vec<NodeId> = h
        .nodes()
        .iter()
        .copied()
        .filter(|&v| e.chain(v).is_none())
        .collect();

    let connectivity_violations: Vec<NodeId> = e
        .chains()
        .filter(|(_, chain)| !is_connected_within(g, chain))
        .map(|(v, _)| v)
        .collect();

    let missing_edges: Vec<(NodeId, NodeId)> = h
        .edges()
        .filter(|&(u, v)| match (e.chain(u), e.chain(v)) {
            (Some(a), Some(b)) => !chains_adjacent(g, a, b),
            _ => true,
        })
        .collect();

    let mut owners: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (v, chain) in e.chains() {
        for &t in chain {
            owners.entry(t).or_default().push(v);
        }
    }
    let overlaps: BTreeSet<(NodeId, NodeId)> = owners
        .values()
        .filter(|vs| vs.len() > 1)
        .flat_map(|vs| {
            vs.iter()
                .enumerate()
                .flat_map(move |(i, &a)| vs[i + 1..].iter().map(move |&b| (a.min(b), a.max(b))))
        })
        .collect();
    let overlap_pairs: Vec<(NodeId, NodeId)> = overlaps.into_iter().collect();

    let valid = unembedded.is_empty()
        && connectivity_violations.is_empty()
        && missing_edges.is_empty()
        && overlap_pairs.is_empty();
    Ok(ValidationReport {
        valid,
        unembedded,
        connectivity_violations,
        missing_edges,
        overlap_pairs,
    })
}

/// Whether `chain` induces a connected subgraph of `g`.
pub fn is_connected_within(g: &Graph, chain: &[NodeId]) -> bool {
    if chain.len() <= 1 {
        return true;
    }
    let members: BTreeSet<NodeId> = chain.iter().copied().collect();
    let mut seen = BTreeSet::from([chain[0]]);
    let mut queue = VecDeque::from([chain[0]]);
    while let Some(t) = queue.pop_front() {
        for u in g.neighbors(t) {
            if members.contains(&u) && seen.insert(u) {
                queue.push_back(u);
            }
        }
    }
    seen.len() == members.len()
}

/// Number of target couplers with one endpoint in each chain.
pub fn couplers_between(g: &Graph, a: &[NodeId], b: &[NodeId]) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for &x in a {
        for y in g.neighbors(x) {
            if b.binary_search(&y).is_ok() {
                out.push((x.min(y), x.max(y)));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn chains_adjacent(g: &Graph, a: &[NodeId], b: &[NodeId]) -> bool {
    a.iter()
        .any(|&x| g.neighbors(x).any(|y| b.binary_search(&y).is_ok()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetrics {
    pub n_qubits: usize,
    pub acl: f64,
    pub max_chain: usize,
    pub chain_length_histogram: BTreeMap<usize, usize>,
}

pub fn metrics(h: &Graph, e: &Embedding) -> Result<EmbeddingMetrics> {
    let domain: Vec<NodeId> = e.chains().map(|(v, _)| v).collect();
    if domain.as_slice() != h.nodes() {
        return Err(Error::DomainMismatch(format!(
            "embedding covers {} variables, source has {}",
            domain.len(),
            h.num_nodes()
        )));
    }
    let mut histogram = BTreeMap::new();
    for (_, chain) in e.chains() {
        *histogram.entry(chain.len()).or_insert(0) += 1;
    }
    let n_qubits = e.num_qubits();
    Ok(EmbeddingMetrics {
        n_qubits,
        acl: if h.num_nodes() == 0 {
            0.0
        } else {
            n_qubits as f64 / h.num_nodes() as f64
        },
        max_chain: e.chains().map(|(_, c)| c.len()).max().unwrap_or(0),
        chain_length_histogram: histogram,
    })
}

/// Share of embedded states whose chains are all unbroken, `2^{n(1-ACL)}`.
pub fn valid_solution_fraction(n: usize, acl: f64) -> f64 {
    (n as f64 * (1.0 - acl)).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_chimera, ChimeraSpec};

    fn emb(pairs: &[(NodeId, &[NodeId])]) -> Embedding {
        Embedding::from_chains(pairs.iter().map(|&(v, c)| (v, c.to_vec()))).unwrap()
    }

    #[test]
    fn single_edge_is_valid() {
        let h = Graph::complete(2);
        let g = Graph::complete(2);
        let report = validate(&h, &g, &emb(&[(0, &[0]), (1, &[1])])).unwrap();
        assert!(report.valid);
        assert_eq!(report, ValidationReport { valid: true, ..Default::default() });
    }

    #[test]
    fn triangle_on_path_misses_an_edge() {
        let h = Graph::complete(3);
        let g = Graph::path(3);
        let report = validate(&h, &g, &emb(&[(0, &[0]), (1, &[1]), (2, &[2])])).unwrap();
        assert!(!report.valid);
        assert_eq!(report.missing_edges, vec![(0, 2)]);
        assert!(report.connectivity_violations.is_empty());
        assert!(report.overlap_pairs.is_empty());
    }

    #[test]
    fn reports_every_violation_class() {
        let h = Graph::from_edges(0..4, [(0, 1), (1, 2)]).unwrap();
        let g = Graph::path(6);
        // 0: disconnected chain {0, 2}; 1 overlaps 0; 3 missing
        let e = emb(&[(0, &[0, 2]), (1, &[2, 3]), (2, &[5])]);
        let report = validate(&h, &g, &e).unwrap();
        assert!(!report.valid);
        assert_eq!(report.unembedded, vec![3]);
        assert_eq!(report.connectivity_violations, vec![0]);
        assert_eq!(report.overlap_pairs, vec![(0, 1)]);
        assert_eq!(report.missing_edges, vec![(1, 2)]);
    }

    #[test]
    fn unknown_nodes_are_errors() {
        let h = Graph::complete(2);
        let g = Graph::complete(2);
        assert!(matches!(
            validate(&h, &g, &emb(&[(0, &[0]), (1, &[7])])),
            Err(Error::UnknownTargetNode(7))
        ));
        assert!(matches!(
            validate(&h, &g, &emb(&[(0, &[0]), (5, &[1])])),
            Err(Error::DomainMismatch(_))
        ));
    }

    #[test]
    fn chain_construction_rules() {
        let mut e = Embedding::new();
        assert!(e.insert(0, Vec::<NodeId>::new()).is_err());
        assert!(e.insert(0, vec![1, 1]).is_err());
        e.insert(0, vec![3, 1, 2]).unwrap();
        assert_eq!(e.chain(0), Some(&[1, 2, 3][..]));
    }

    #[test]
    fn metrics_examples() {
        let h = Graph::complete(2);
        let m = metrics(&h, &emb(&[(0, &[1]), (1, &[2, 3])])).unwrap();
        assert_eq!(m.n_qubits, 3);
        assert_eq!(m.acl, 1.5);
        assert_eq!(m.max_chain, 2);
        assert_eq!(m.chain_length_histogram, BTreeMap::from([(1, 1), (2, 1)]));

        let g = generate_chimera(ChimeraSpec { m: 1 }).unwrap();
        let identity = Embedding::from_chains(g.nodes().iter().map(|&v| (v, [v]))).unwrap();
        assert_eq!(metrics(&g, &identity).unwrap().acl, 1.0);

        assert!(metrics(&Graph::complete(3), &emb(&[(0, &[0])])).is_err());

        // 150 variables on 2850 qubits
        let h = Graph::empty(150);
        let e = Embedding::from_chains((0..150).map(|v| (v, (19 * v..19 * v + 19).collect::<Vec<_>>())))
            .unwrap();
        assert_eq!(metrics(&h, &e).unwrap().acl, 19.0);
    }

    #[test]
    fn valid_solution_fraction_examples() {
        assert_eq!(valid_solution_fraction(7, 1.0), 1.0);
        assert_eq!(valid_solution_fraction(2, 1.5), 0.5);
        assert!((valid_solution_fraction(3, 5.0 / 3.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unbroken_fraction_matches_enumeration_on_path() {
        // 3 variables, chains {0,1}, {2,3}, {4} on a 5-node path
        let g = Graph::path(5);
        let h = Graph::path(3);
        let e = emb(&[(0, &[0, 1]), (1, &[2, 3]), (2, &[4])]);
        assert!(validate(&h, &g, &e).unwrap().valid);
        let unbroken = (0u32..32)
            .filter(|mask| {
                e.chains().all(|(_, c)| {
                    let first = mask >> c[0] & 1;
                    c.iter().all(|&t| mask >> t & 1 == first)
                })
            })
            .count();
        assert_eq!(unbroken, 8);
        let acl = metrics(&h, &e).unwrap().acl;
        assert!((unbroken as f64 / 32.0 - valid_solution_fraction(3, acl)).abs() < 1e-15);
    }

    #[test]
    fn json_is_canonical() {
        let e = emb(&[(10, &[5, 1]), (2, &[3])]);
        let text = e.to_canonical_json();
        assert_eq!(text, r#"{"chains":{"2":[3],"10":[1,5]}}"#);
        assert_eq!(Embedding::from_json(&text).unwrap(), e);
        assert!(Embedding::from_json(r#"{"chains":{"0":[]}}"#).is_err());
    }
}
