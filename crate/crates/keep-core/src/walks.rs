//! Second-order biased random walks over the concept graph.
//!
//! Is-a edges are walked undirected. Transition weights from state
//! (prev, cur) to candidate x are 1/p when x == prev, 1 when x neighbors
//! both prev and cur, and 1/q otherwise, normalized per step. Each
//! (start node, replica) pair draws from its own counter-derived RNG
//! stream, so the corpus is reproducible for a given seed regardless of
//! how walks are scheduled across workers.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ontology::Ontology;

#[derive(Debug, Clone)]
pub struct WalkConfig {
    /// Nodes per walk, start node included.
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// Return parameter: weight 1/p for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight 1/q for leaving the previous node's neighborhood.
    pub q: f64,
    pub rng_seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_length: 30,
            walks_per_node: 750,
            p: 1.0,
            q: 1.0,
            rng_seed: 42,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(Error::config("walk_length", "must be >= 2"));
        }
        if self.walks_per_node < 1 {
            return Err(Error::config("walks_per_node", "must be >= 1"));
        }
        if !(self.p > 0.0) {
            return Err(Error::config("p", "must be > 0"));
        }
        if !(self.q > 0.0) {
            return Err(Error::config("q", "must be > 0"));
        }
        Ok(())
    }
}

/// Walk corpus over internal indices, ordered by (start node, replica).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<u32>>,
    pub vocab_size: usize,
}

impl WalkCorpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// One walk per line, space-separated internal indices.
    pub fn write_path(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        for walk in &self.walks {
            let mut first = true;
            for &t in walk {
                if first {
                    write!(out, "{t}")?;
                    first = false;
                } else {
                    write!(out, " {t}")?;
                }
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_path(path: &Path, vocab_size: usize) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut walks = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut walk = Vec::new();
            for tok in line.split(' ') {
                let t: u32 = tok
                    .parse()
                    .map_err(|_| Error::parse(path, lineno + 1, "bad token"))?;
                if t as usize >= vocab_size {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        format!("token {t} out of range for vocab size {vocab_size}"),
                    ));
                }
                walk.push(t);
            }
            walks.push(walk);
        }
        Ok(WalkCorpus { walks, vocab_size })
    }
}

/// Generates `walks_per_node` walks from every node. Isolated nodes emit
/// single-node walks so every vocabulary entry appears in the corpus.
pub fn generate_walks(ont: &Ontology, cfg: &WalkConfig, threads: usize) -> Result<WalkCorpus> {
    cfg.validate()?;
    if ont.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let adjacency = ont.undirected_adjacency();
    let n = adjacency.len();
    let wpn = cfg.walks_per_node;

    let run = |slot: usize| -> Vec<u32> {
        let node = (slot / wpn) as u32;
        let replica = (slot % wpn) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(node as u64 * wpn as u64 + replica);
        walk_from(node, &adjacency, cfg, &mut rng)
    };

    let walks: Vec<Vec<u32>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| (0..n * wpn).into_par_iter().map(run).collect())
    } else {
        (0..n * wpn).map(run).collect()
    };

    Ok(WalkCorpus {
        walks,
        vocab_size: n,
    })
}

fn walk_from(start: u32, adjacency: &[Vec<u32>], cfg: &WalkConfig, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let first_neighbors = &adjacency[start as usize];
    if first_neighbors.is_empty() {
        return walk;
    }
    let uniform = cfg.p == 1.0 && cfg.q == 1.0;
    let mut cur = first_neighbors[rng.gen_range(0..first_neighbors.len())];
    walk.push(cur);
    let mut prev = start;
    while walk.len() < cfg.walk_length {
        let neighbors = &adjacency[cur as usize];
        let next = if uniform {
            neighbors[rng.gen_range(0..neighbors.len())]
        } else {
            sample_second_order(prev, neighbors, &adjacency[prev as usize], cfg, rng)
        };
        walk.push(next);
        prev = cur;
        cur = next;
    }
    walk
}

/// Exact cumulative-sum sampling over the unnormalized {1/p, 1, 1/q} weights.
fn sample_second_order(
    prev: u32,
    neighbors: &[u32],
    prev_neighbors: &[u32],
    cfg: &WalkConfig,
    rng: &mut ChaCha8Rng,
) -> u32 {
    let mut cumulative = Vec::with_capacity(neighbors.len());
    let mut total = 0.0f64;
    for &x in neighbors {
        let w = second_order_weight(prev, x, prev_neighbors, cfg);
        total += w;
        cumulative.push(total);
    }
    let u = rng.gen::<f64>() * total;
    let idx = cumulative.partition_point(|&c| c <= u).min(neighbors.len() - 1);
    neighbors[idx]
}

pub(crate) fn second_order_weight(prev: u32, x: u32, prev_neighbors: &[u32], cfg: &WalkConfig) -> f64 {
    if x == prev {
        1.0 / cfg.p
    } else if prev_neighbors.binary_search(&x).is_ok() {
        1.0
    } else {
        1.0 / cfg.q
    }
}

/// Exact second-order transition distribution from (prev, cur); used by the
/// statistical acceptance checks.
pub fn exact_transition_distribution(
    adjacency: &[Vec<u32>],
    prev: u32,
    cur: u32,
    cfg: &WalkConfig,
) -> Vec<(u32, f64)> {
    let neighbors = &adjacency[cur as usize];
    let prev_neighbors = &adjacency[prev as usize];
    let weights: Vec<f64> = neighbors
        .iter()
        .map(|&x| second_order_weight(prev, x, prev_neighbors, cfg))
        .collect();
    let total: f64 = weights.iter().sum();
    neighbors
        .iter()
        .zip(weights)
        .map(|(&x, w)| (x, w / total))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Ontology;
    use crate::vocab::ConceptId;
    use std::collections::HashMap;

    fn path_graph() -> Ontology {
        // 1 <- 2 <- 3: undirected path a-b-c.
        let edges = vec![
            (ConceptId(2), ConceptId(1)),
            (ConceptId(3), ConceptId(2)),
        ];
        Ontology::from_edges(&edges, ConceptId(1), &HashMap::new())
            .unwrap()
            .ontology
    }

    fn star_graph() -> Ontology {
        let edges: Vec<_> = (2..=5).map(|c| (ConceptId(c), ConceptId(1))).collect();
        Ontology::from_edges(&edges, ConceptId(1), &HashMap::new())
            .unwrap()
            .ontology
    }

    #[test]
    fn path_midpoint_is_uniform() {
        let ont = path_graph();
        let adjacency = ont.undirected_adjacency();
        let b = ont.vocab().index_of(ConceptId(2)).unwrap();
        let cfg = WalkConfig {
            walk_length: 2,
            walks_per_node: 1,
            rng_seed: 7,
            ..WalkConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = HashMap::new();
        for _ in 0..10_000 {
            let w = walk_from(b, &adjacency, &cfg, &mut rng);
            *hits.entry(w[1]).or_insert(0u32) += 1;
        }
        for (_, count) in hits {
            let freq = count as f64 / 10_000.0;
            assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
        }
    }

    #[test]
    fn star_walk_alternates_through_hub() {
        let ont = star_graph();
        let hub = ont.root();
        let leaf = ont.vocab().index_of(ConceptId(3)).unwrap();
        let cfg = WalkConfig {
            walk_length: 9,
            walks_per_node: 1,
            rng_seed: 3,
            ..WalkConfig::default()
        };
        let corpus = generate_walks(&ont, &cfg, 1).unwrap();
        let walk = &corpus.walks[leaf as usize];
        for (i, &node) in walk.iter().enumerate() {
            if i % 2 == 1 {
                assert_eq!(node, hub);
            } else {
                assert_ne!(node, hub);
            }
        }
    }

    #[test]
    fn corpus_is_deterministic_and_ordered() {
        let ont = path_graph();
        let cfg = WalkConfig {
            walk_length: 10,
            walks_per_node: 4,
            rng_seed: 99,
            ..WalkConfig::default()
        };
        let a = generate_walks(&ont, &cfg, 1).unwrap();
        let b = generate_walks(&ont, &cfg, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.walks.len(), 3 * 4);
    }

    #[test]
    fn consecutive_pairs_are_edges() {
        let ont = path_graph();
        let adjacency = ont.undirected_adjacency();
        let cfg = WalkConfig {
            walk_length: 12,
            walks_per_node: 3,
            p: 0.5,
            q: 2.0,
            rng_seed: 5,
        };
        let corpus = generate_walks(&ont, &cfg, 1).unwrap();
        for walk in &corpus.walks {
            for pair in walk.windows(2) {
                assert!(adjacency[pair[0] as usize].binary_search(&pair[1]).is_ok());
            }
        }
    }

    #[test]
    fn corpus_round_trips_through_file() {
        let ont = star_graph();
        let cfg = WalkConfig {
            walk_length: 5,
            walks_per_node: 2,
            rng_seed: 11,
            ..WalkConfig::default()
        };
        let corpus = generate_walks(&ont, &cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("walks.txt");
        corpus.write_path(&path).unwrap();
        let back = WalkCorpus::read_path(&path, corpus.vocab_size).unwrap();
        assert_eq!(corpus, back);
    }

    #[test]
    fn rejects_bad_config() {
        let ont = path_graph();
        let cfg = WalkConfig {
            walk_length: 1,
            ..WalkConfig::default()
        };
        assert!(generate_walks(&ont, &cfg, 1).is_err());
    }
}
