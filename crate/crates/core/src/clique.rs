//! Deterministic clique embedding for ideal Chimera targets.
//!
//! Variable `i` of K_{4k} lives in block `c = i / 4` and lane `u = i % 4`.
//! Its chain climbs the vertical lane-`u` qubits of column `c` from row 0 to
//! row `c`, then runs along the horizontal lane-`u` qubits of row `c` from
//! column `c` to column `k - 1`. Two chains from blocks `a <= b` meet in cell
//! `(a, b)` through an intra-cell coupler, and every chain has `k + 1` qubits.

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::graph::{generate_chimera, ChimeraSpec, Graph, Side};
use crate::greedy::{EmbedOutcome, Embedder, Failure, Objective};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueCache {
    pub target_fingerprint: String,
    pub m: usize,
    pub max_clique_size: usize,
    pub master: Embedding,
}

/// Recognize `g` as an ideal Chimera graph under the canonical numbering.
pub fn recognize_chimera(g: &Graph) -> Option<ChimeraSpec> {
    let n = g.num_nodes();
    if n == 0 || n % 8 != 0 {
        return None;
    }
    let m = ((n / 8) as f64).sqrt().round() as usize;
    if 8 * m * m != n {
        return None;
    }
    let spec = ChimeraSpec { m };
    if g.num_edges() != spec.num_edges() {
        return None;
    }
    let ideal = generate_chimera(spec).ok()?;
    (ideal == *g).then_some(spec)
}

/// Triangle construction of K_{4k} on the top-left `k × k` corner of `spec`.
fn triangle(spec: ChimeraSpec, k: usize, n: usize) -> Embedding {
    debug_assert!(k <= spec.m && n <= 4 * k);
    let chains = (0..n).map(|i| {
        let (c, u) = (i / 4, i % 4);
        let vertical = (0..=c).map(move |r| spec.qubit(r, c, Side::Vertical, u));
        let horizontal = (c..k).map(move |col| spec.qubit(c, col, Side::Horizontal, u));
        (i, vertical.chain(horizontal).collect::<Vec<_>>())
    });
    Embedding::from_chains(chains).expect("triangle chains are disjoint within themselves")
}

pub fn preprocess(g: &Graph) -> Result<CliqueCache> {
    let spec = recognize_chimera(g).ok_or_else(|| {
        Error::UnsupportedTarget("clique embedding needs an ideal Chimera target".into())
    })?;
    Ok(CliqueCache {
        target_fingerprint: g.fingerprint(),
        m: spec.m,
        max_clique_size: 4 * spec.m,
        master: triangle(spec, spec.m, 4 * spec.m),
    })
}

/// K_n embedding, built on the smallest corner sub-grid that holds it.
pub fn clique_embedding(cache: &CliqueCache, n: usize) -> Result<Embedding> {
    if n < 1 || n > cache.max_clique_size {
        return Err(Error::Capacity {
            requested: n,
            capacity: cache.max_clique_size,
        });
    }
    Ok(triangle(ChimeraSpec { m: cache.m }, n.div_ceil(4), n))
}

/// Chain length of the K_n embedding, `⌈n/4⌉ + 1`.
pub fn clique_acl(n: usize) -> f64 {
    (n.div_ceil(4) + 1) as f64
}

/// `(n, acl)` for every retrievable clique size.
pub fn acl_line(cache: &CliqueCache) -> Vec<(usize, f64)> {
    (1..=cache.max_clique_size).map(|n| (n, clique_acl(n))).collect()
}

impl CliqueCache {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cache serializes")
    }
}

/// Clique embedding behind the [`Embedder`] interface. Any source with
/// `n <= max_clique_size` vertices receives the K_n chains.
#[derive(Clone, Debug)]
pub struct CliqueEmbedder {
    cache: Option<CliqueCache>,
}

impl CliqueEmbedder {
    /// Preprocess `g`; non-Chimera targets yield an embedder that always
    /// reports [`Failure::Unsupported`].
    pub fn for_target(g: &Graph) -> Self {
        CliqueEmbedder { cache: preprocess(g).ok() }
    }

    pub fn cache(&self) -> Option<&CliqueCache> {
        self.cache.as_ref()
    }
}

impl Embedder for CliqueEmbedder {
    fn name(&self) -> &str {
        "clique"
    }

    fn embed(&self, h: &Graph, g: &Graph, _seed: u64) -> EmbedOutcome {
        let start = std::time::Instant::now();
        let Some(cache) = self.cache.as_ref().filter(|c| c.target_fingerprint == g.fingerprint())
        else {
            return EmbedOutcome::failed(Failure::Unsupported, 0, start.elapsed());
        };
        let n = h.num_nodes();
        let Ok(clique) = clique_embedding(cache, n) else {
            return EmbedOutcome::failed(Failure::Capacity, 0, start.elapsed());
        };
        let ids = h.nodes();
        let embedding = clique.relabel(|i| ids[i]);
        let total = embedding.num_qubits();
        EmbedOutcome {
            embedding: Some(embedding),
            success: true,
            failure: None,
            passes_used: 0,
            wall_time: start.elapsed(),
            try_index: 0,
            objective: Some(Objective {
                overloaded: 0,
                total_qubits: total,
                max_chain: n.div_ceil(4) + 1,
            }),
        }
    }
}
