//! Undirected simple graphs used for both source (problem) and target
//! (hardware) topologies, plus generators, damage models and edge-list I/O.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Undirected simple graph with ascending node ids.
///
/// Nodes are kept in a sorted vector; adjacency is stored by node position
/// so algorithms can work on dense indices and translate back with
/// [`Graph::id`] / [`Graph::index_of`].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Graph {
    ids: Vec<NodeId>,
    adj: Vec<Vec<usize>>,
    n_edges: usize,
}

impl Graph {
    /// Build a graph from a node set and an edge list. Endpoints not present in
    /// `nodes` are added. Duplicate edges collapse; self-loops are rejected.
    pub fn from_edges<N, E>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = NodeId>,
        E: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut node_set: BTreeSet<NodeId> = nodes.into_iter().collect();
        let mut edge_set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            node_set.insert(u);
            node_set.insert(v);
            edge_set.insert((u.min(v), u.max(v)));
        }
        let ids: Vec<NodeId> = node_set.into_iter().collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for &(u, v) in &edge_set {
            let iu = ids.binary_search(&u).expect("endpoint inserted");
            let iv = ids.binary_search(&v).expect("endpoint inserted");
            adj[iu].push(iv);
            adj[iv].push(iu);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Graph {
            ids,
            adj,
            n_edges: edge_set.len(),
        })
    }

    /// Graph on `n` isolated nodes `0..n`.
    pub fn empty(n: usize) -> Self {
        Graph {
            ids: (0..n).collect(),
            adj: vec![Vec::new(); n],
            n_edges: 0,
        }
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Graph::from_edges(0..n, edges).expect("complete graph has no self-loops")
    }

    pub fn path(n: usize) -> Self {
        Graph::from_edges(0..n, (1..n).map(|v| (v - 1, v))).expect("path has no self-loops")
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.n_edges
    }

    /// Node ids in ascending order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> NodeId {
        self.ids[index]
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.index_of(id).is_some()
    }

    /// Neighbor positions (not ids) of the node at position `index`, ascending.
    pub fn neighbors_by_index(&self, index: usize) -> &[usize] {
        &self.adj[index]
    }

    /// Neighbor ids of `id`, ascending. Empty for unknown nodes.
    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let list: &[usize] = match self.index_of(id) {
            Some(i) => &self.adj[i],
            None => &[],
        };
        list.iter().map(move |&j| self.ids[j])
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.index_of(id).map_or(0, |i| self.adj[i].len())
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        match (self.index_of(u), self.index_of(v)) {
            (Some(iu), Some(iv)) => self.adj[iu].binary_search(&iv).is_ok(),
            _ => false,
        }
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(iu, list)| {
            list.iter()
                .filter(move |&&iv| iv > iu)
                .map(move |&iv| (self.ids[iu], self.ids[iv]))
        })
    }

    /// Edges by position, `(iu, iv)` with `iu < iv`, in lexicographic order.
    pub fn edge_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(iu, list)| {
            list.iter().filter(move |&&iv| iv > iu).map(move |&iv| (iu, iv))
        })
    }

    /// Subgraph induced by the given node ids (unknown ids are ignored).
    pub fn induced_subgraph(&self, keep: &BTreeSet<NodeId>) -> Graph {
        let nodes = self.ids.iter().copied().filter(|v| keep.contains(v));
        let edges = self
            .edges()
            .filter(|(u, v)| keep.contains(u) && keep.contains(v));
        Graph::from_edges(nodes.collect::<Vec<_>>(), edges.collect::<Vec<_>>())
            .expect("subgraph of a simple graph is simple")
    }

    /// Copy of the graph without the listed edges.
    pub fn without_edges(&self, remove: &BTreeSet<(NodeId, NodeId)>) -> Graph {
        let edges = self
            .edges()
            .filter(|e| !remove.contains(e))
            .collect::<Vec<_>>();
        Graph::from_edges(self.ids.clone(), edges).expect("subgraph of a simple graph is simple")
    }

    /// Canonical text form: node count, then ascending edges.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "nodes");
        for id in &self.ids {
            let _ = write!(out, " {id}");
        }
        out.push('\n');
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex_digest(self.canonical_string().as_bytes())
    }

    pub fn stats(&self) -> GraphStats {
        stats(self)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub density: f64,
    pub avg_degree: f64,
    pub max_degree: usize,
}

pub fn stats(g: &Graph) -> GraphStats {
    let n = g.num_nodes();
    let m = g.num_edges();
    let density = if n >= 2 {
        m as f64 / (n as f64 * (n as f64 - 1.0) / 2.0)
    } else {
        0.0
    };
    let avg_degree = if n >= 1 { 2.0 * m as f64 / n as f64 } else { 0.0 };
    let max_degree = (0..n).map(|i| g.adj[i].len()).max().unwrap_or(0);
    GraphStats {
        n_nodes: n,
        n_edges: m,
        density,
        avg_degree,
        max_degree,
    }
}

/// Chimera C_m: an m×m grid of K_{4,4} cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChimeraSpec {
    pub m: usize,
}

/// Cell side of a Chimera qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Horizontal = 0,
    Vertical = 1,
}

impl ChimeraSpec {
    pub fn new(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter(format!(
                "chimera grid dimension must be >= 1, got {m}"
            )));
        }
        Ok(ChimeraSpec { m })
    }

    pub fn num_nodes(&self) -> usize {
        8 * self.m * self.m
    }

    pub fn num_edges(&self) -> usize {
        16 * self.m * self.m + 8 * self.m * (self.m - 1)
    }

    /// Linear id of qubit `k` on `side` in cell `(row, col)`.
    pub fn qubit(&self, row: usize, col: usize, side: Side, k: usize) -> NodeId {
        8 * (row * self.m + col) + 4 * side as usize + k
    }
}

pub fn generate_chimera(spec: ChimeraSpec) -> Result<Graph> {
    let ChimeraSpec { m } = ChimeraSpec::new(spec.m)?;
    let mut edges = Vec::with_capacity(spec.num_edges());
    for r in 0..m {
        for c in 0..m {
            for a in 0..4 {
                for b in 0..4 {
                    edges.push((
                        spec.qubit(r, c, Side::Horizontal, a),
                        spec.qubit(r, c, Side::Vertical, b),
                    ));
                }
                if c + 1 < m {
                    edges.push((
                        spec.qubit(r, c, Side::Horizontal, a),
                        spec.qubit(r, c + 1, Side::Horizontal, a),
                    ));
                }
                if r + 1 < m {
                    edges.push((
                        spec.qubit(r, c, Side::Vertical, a),
                        spec.qubit(r + 1, c, Side::Vertical, a),
                    ));
                }
            }
        }
    }
    Graph::from_edges(0..spec.num_nodes(), edges)
}

/// Remove `⌊node_drop·|V|⌋` uniformly chosen nodes, then `⌊edge_drop·|E'|⌋`
/// uniformly chosen edges of what remains.
pub fn break_graph(g: &Graph, node_drop: f64, edge_drop: f64, seed: u64) -> Result<Graph> {
    for (name, r) in [("node_drop", node_drop), ("edge_drop", edge_drop)] {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "{name} must lie in [0, 1), got {r}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.num_nodes();
    let n_drop = (node_drop * n as f64).floor() as usize;
    let dropped: BTreeSet<usize> = sample(&mut rng, n, n_drop).into_iter().collect();
    let keep: BTreeSet<NodeId> = (0..n)
        .filter(|i| !dropped.contains(i))
        .map(|i| g.id(i))
        .collect();
    let reduced = g.induced_subgraph(&keep);
    let edges: Vec<(NodeId, NodeId)> = reduced.edges().collect();
    let e_drop = (edge_drop * edges.len() as f64).floor() as usize;
    let removed: BTreeSet<(NodeId, NodeId)> = sample(&mut rng, edges.len(), e_drop)
        .into_iter()
        .map(|i| edges[i])
        .collect();
    Ok(reduced.without_edges(&removed))
}

/// Erdős–Rényi G(n, p) on nodes `0..n`.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 1 {
        return Err(Error::InvalidParameter("ER graph needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "edge probability must lie in [0, 1], got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            // one draw per candidate pair regardless of p
            let x: f64 = rng.gen();
            if x < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(0..n, edges)
}

/// Parse the edge-list format: optional `n <count>` header, `#` comments,
/// one whitespace-separated pair per line. Graphs with non-contiguous ids
/// carry their isolated nodes as `v <id>` lines.
pub fn read_edge_list<R: Read>(reader: R) -> Result<Graph> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut isolated: Vec<NodeId> = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let malformed = |msg: &str| Error::Parse {
            line: lineno,
            message: format!("{msg}: {trimmed:?}"),
        };
        if fields.len() != 2 {
            return Err(malformed("expected two fields"));
        }
        if fields[0] == "v" {
            isolated.push(
                fields[1]
                    .parse()
                    .map_err(|_| malformed("invalid node id"))?,
            );
            continue;
        }
        if fields[0] == "n" {
            if declared.is_some() || !edges.is_empty() {
                return Err(malformed("node-count header must come first"));
            }
            declared = Some(
                fields[1]
                    .parse()
                    .map_err(|_| malformed("invalid node count"))?,
            );
            continue;
        }
        let u: NodeId = fields[0]
            .parse()
            .map_err(|_| malformed("invalid node id"))?;
        let v: NodeId = fields[1]
            .parse()
            .map_err(|_| malformed("invalid node id"))?;
        if u == v {
            return Err(Error::Parse {
                line: lineno,
                message: format!("self-loop on node {u}"),
            });
        }
        if let Some(n) = declared {
            if u >= n || v >= n {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("endpoint out of range for declared n = {n}"),
                });
            }
        }
        edges.push((u, v));
    }
    if let Some(n) = declared {
        if let Some(&bad) = isolated.iter().find(|&&v| v >= n) {
            return Err(Error::Parse {
                line: 0,
                message: format!("isolated node {bad} out of range for declared n = {n}"),
            });
        }
    }
    Graph::from_edges((0..declared.unwrap_or(0)).chain(isolated), edges)
}

pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    let dense = g.nodes().iter().enumerate().all(|(i, &id)| i == id);
    if dense {
        writeln!(out, "n {}", g.num_nodes())?;
    } else {
        // sparse id sets (damaged hardware) list their isolated survivors
        for &id in g.nodes() {
            if g.degree(id) == 0 {
                writeln!(out, "v {id}")?;
            }
        }
    }
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let file = std::fs::File::open(path)?;
    read_edge_list(file)
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_edge_list(g, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chimera_single_cell_is_k44() {
        let g = generate_chimera(ChimeraSpec { m: 1 }).unwrap();
        assert_eq!(g.num_nodes(), 8);
        assert_eq!(g.num_edges(), 16);
        for h in 0..4 {
            for v in 4..8 {
                assert!(g.has_edge(h, v));
            }
            for h2 in 0..4 {
                assert!(!g.has_edge(h, h2));
            }
        }
    }

    #[test]
    fn chimera_m2_counts_by_enumeration() {
        let g = generate_chimera(ChimeraSpec { m: 2 }).unwrap();
        assert_eq!(g.num_nodes(), 32);
        // count cell-crossing edges directly from the generator output
        let inter = g.edges().filter(|(u, v)| u / 8 != v / 8).count();
        let intra = g.edges().filter(|(u, v)| u / 8 == v / 8).count();
        assert_eq!(intra, 64);
        assert_eq!(inter, 16);
        assert_eq!(g.num_edges(), 80);
    }

    #[test]
    fn chimera_m4_interior_degrees() {
        let spec = ChimeraSpec { m: 4 };
        let g = generate_chimera(spec).unwrap();
        assert_eq!(g.num_nodes(), 128);
        assert_eq!(g.num_edges(), spec.num_edges());
        for r in 1..3 {
            for c in 1..3 {
                for s in [Side::Horizontal, Side::Vertical] {
                    for k in 0..4 {
                        assert_eq!(g.degree(spec.qubit(r, c, s, k)), 6);
                    }
                }
            }
        }
        assert_eq!(g.stats().max_degree, 6);
    }

    #[test]
    fn chimera_rejects_zero() {
        assert!(matches!(
            generate_chimera(ChimeraSpec { m: 0 }),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn break_graph_noop_and_floor_counts() {
        let g = generate_chimera(ChimeraSpec { m: 4 }).unwrap();
        assert_eq!(break_graph(&g, 0.0, 0.0, 3).unwrap(), g);

        let b = break_graph(&g, 0.007, 0.0, 11).unwrap();
        assert_eq!(b.num_nodes(), 128 - (0.007f64 * 128.0).floor() as usize);
        assert_eq!(b.num_nodes(), 128);

        let b = break_graph(&g, 0.05, 0.1, 11).unwrap();
        assert_eq!(b.num_nodes(), 122);
        let survivors: BTreeSet<_> = b.nodes().iter().copied().collect();
        let remaining = g.induced_subgraph(&survivors).num_edges();
        assert_eq!(b.num_edges(), remaining - (0.1 * remaining as f64).floor() as usize);
        assert!(b.edges().all(|(u, v)| g.has_edge(u, v)));

        assert_eq!(b, break_graph(&g, 0.05, 0.1, 11).unwrap());
        assert!(break_graph(&g, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn er_extremes_are_exact() {
        let k5 = generate_er(5, 1.0, 99).unwrap();
        assert_eq!(k5, Graph::complete(5));
        let empty = generate_er(5, 0.0, 99).unwrap();
        assert_eq!(empty.num_nodes(), 5);
        assert_eq!(empty.num_edges(), 0);
        assert!(generate_er(0, 0.5, 1).is_err());
    }

    #[test]
    fn er_mean_density_matches_binomial_mean() {
        let mean: f64 = (0..200)
            .map(|s| generate_er(100, 0.3, s).unwrap().stats().density)
            .sum::<f64>()
            / 200.0;
        assert!((0.27..=0.33).contains(&mean), "mean density {mean}");
    }

    #[test]
    fn stats_examples() {
        let k4 = Graph::complete(4).stats();
        assert_eq!(k4.density, 1.0);
        assert_eq!(k4.avg_degree, 3.0);
        assert_eq!(Graph::empty(3).stats().density, 0.0);
        assert_eq!(Graph::empty(1).stats().density, 0.0);

        // the sparse hardware-scale density figure
        let d: f64 = 40_000.0 / (5600.0 * 5599.0 / 2.0);
        assert!((d - 0.0025).abs() < 1e-4);
    }

    #[test]
    fn edge_list_parsing() {
        let g = read_edge_list("0 1\n1 2".as_bytes()).unwrap();
        assert_eq!(g, Graph::path(3));

        let g = read_edge_list("# comment\nn 5\n0 1\n".as_bytes()).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.num_edges(), 1);

        match read_edge_list("0 1\n1 1\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match read_edge_list("n 3\n0 3\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(read_edge_list("0 x\n".as_bytes()).is_err());
        assert!(read_edge_list("0 1 2\n".as_bytes()).is_err());
    }

    #[test]
    fn edge_list_round_trip_chimera() {
        let g = generate_chimera(ChimeraSpec { m: 2 }).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(read_edge_list(buf.as_slice()).unwrap(), g);
    }
}
