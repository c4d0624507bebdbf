//! Synthetic ontologies and patient cohorts with planted comorbidity
//! structure, sized so the full pipeline runs at desk scale.
//!
//! Concepts are partitioned into latent clusters; half the clusters follow
//! ontology subtrees and half cut across them, so an embedding has to use
//! both the graph and the co-occurrence signal to score well on both
//! evaluation axes.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::cooc::{CooccurrenceMatrix, PatientRecord};
use crate::error::{Error, Result};
use crate::eval::RelationshipSet;
use crate::ontology::{Ontology, RollUpMap};
use crate::vocab::ConceptId;

/// External id of the generated root; node i gets id `1000 + 3*i`.
pub const SYNTH_ROOT_ID: ConceptId = ConceptId(1000);

fn external_id(node: usize) -> ConceptId {
    ConceptId(1000 + 3 * node as u64)
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_concepts: usize,
    /// Mean children per internal node; shapes tree width vs depth.
    pub branching: f64,
    pub max_depth_generated: u32,
    pub n_patients: usize,
    pub n_clusters: usize,
    pub within_cluster_rate: f64,
    pub background_rate: f64,
    /// Mean extra repetitions beyond the two guaranteed occurrences.
    pub repeat_mean: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_concepts: 250,
            branching: 3.0,
            max_depth_generated: 8,
            n_patients: 1000,
            n_clusters: 8,
            within_cluster_rate: 0.35,
            background_rate: 0.01,
            repeat_mean: 1.5,
            rng_seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_concepts < 10 {
            return Err(Error::config("n_concepts", "must be >= 10"));
        }
        if self.branching < 1.0 {
            return Err(Error::config("branching", "must be >= 1"));
        }
        if self.max_depth_generated < 2 {
            return Err(Error::config("max_depth_generated", "must be >= 2"));
        }
        if self.n_clusters < 1 {
            return Err(Error::config("n_clusters", "must be >= 1"));
        }
        if !(self.within_cluster_rate > 0.0 && self.within_cluster_rate <= 1.0) {
            return Err(Error::config("within_cluster_rate", "must be in (0, 1]"));
        }
        if !(self.background_rate >= 0.0 && self.background_rate < 1.0) {
            return Err(Error::config("background_rate", "must be in [0, 1)"));
        }
        if self.within_cluster_rate <= self.background_rate {
            return Err(Error::config(
                "within_cluster_rate",
                "must exceed background_rate",
            ));
        }
        if !(self.repeat_mean >= 0.0) {
            return Err(Error::config("repeat_mean", "must be >= 0"));
        }
        Ok(())
    }
}

/// Cluster assignments over the retained vocabulary plus the relationship
/// sets planted with them.
#[derive(Debug, Clone)]
pub struct PlantedTruth {
    /// Cluster id per internal index of the pruned ontology.
    pub cluster_of: Vec<usize>,
    pub n_clusters: usize,
    pub relationship_sets: Vec<RelationshipSet>,
}

/// Random rooted DAG: a depth-guaranteeing spine, capacity-limited
/// preferential growth, then ~5% extra multi-parent edges.
pub fn generate_ontology(cfg: &SynthConfig) -> Result<Ontology> {
    cfg.validate()?;
    let n = cfg.n_concepts;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(0);

    let spine_len = (cfg.max_depth_generated as usize + 1).min(n);
    let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut children_count = vec![0usize; n];
    let mut capacity = vec![0usize; n];
    let cap_extra = Poisson::new((cfg.branching - 1.0).max(1e-9)).expect("positive mean");
    let draw_capacity = |rng: &mut ChaCha8Rng| 1 + cap_extra.sample(rng) as usize;

    capacity[0] = draw_capacity(&mut rng);
    for i in 1..spine_len {
        parents_of[i].push(i - 1);
        children_count[i - 1] += 1;
        capacity[i] = draw_capacity(&mut rng);
    }
    for i in spine_len..n {
        capacity[i] = draw_capacity(&mut rng);
        let open: Vec<usize> = (0..i).filter(|&v| children_count[v] < capacity[v]).collect();
        let parent = if open.is_empty() {
            rng.gen_range(0..i)
        } else {
            open[rng.gen_range(0..open.len())]
        };
        parents_of[i].push(parent);
        children_count[parent] += 1;
    }

    // Extra edges toward non-descendants make the tree a DAG.
    let n_extra = n.div_ceil(20);
    let mut added = 0;
    let mut attempts = 0;
    while added < n_extra && attempts < n_extra * 30 {
        attempts += 1;
        let child = rng.gen_range(1..n);
        let parent = rng.gen_range(0..n);
        if parent == child || parents_of[child].contains(&parent) {
            continue;
        }
        if reaches(&parents_of, parent, child) {
            continue;
        }
        parents_of[child].push(parent);
        added += 1;
    }

    let mut edges = Vec::new();
    for (child, ps) in parents_of.iter().enumerate() {
        for &p in ps {
            edges.push((external_id(child), external_id(p)));
        }
    }
    let load = Ontology::from_edges(&edges, SYNTH_ROOT_ID, &HashMap::new())?;
    debug_assert!(load.unreachable.is_empty());
    Ok(load.ontology)
}

/// True when `to` is reachable from `from` by walking parent links upward.
fn reaches(parents_of: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![false; parents_of.len()];
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        if seen[u] {
            continue;
        }
        seen[u] = true;
        for &p in &parents_of[u] {
            stack.push(p);
        }
    }
    false
}

/// Partitions the retained vocabulary into clusters: half grown along
/// subtrees, half cut across them by shuffling the remainder.
pub fn assign_clusters(pruned: &Ontology, cfg: &SynthConfig, min_set_size: usize) -> PlantedTruth {
    let v = pruned.len();
    let k = cfg.n_clusters.min(v.max(1));
    let target = (v / k).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(1);

    let mut cluster_of: Vec<Option<usize>> = vec![None; v];
    let subtree_clusters = k / 2;
    let mut next_cluster = 0;

    if subtree_clusters > 0 {
        // Seed candidates: internal nodes with a usable retained subtree.
        let mut candidates: Vec<(usize, u32)> = (0..v as u32)
            .filter_map(|i| {
                let size = pruned.descendants(i).len() + 1;
                (size >= target.max(4) / 2 && size <= 4 * target).then_some((size, i))
            })
            .collect();
        candidates.sort_unstable();
        candidates.reverse();
        for (_, seed) in candidates {
            if next_cluster >= subtree_clusters {
                break;
            }
            if cluster_of[seed as usize].is_some() {
                continue;
            }
            let mut members = vec![seed];
            for node in pruned.descendants(seed) {
                if members.len() >= target {
                    break;
                }
                if cluster_of[node as usize].is_none() {
                    members.push(node);
                }
            }
            if members.len() < target.max(4) / 2 {
                continue;
            }
            for m in members {
                cluster_of[m as usize] = Some(next_cluster);
            }
            next_cluster += 1;
        }
    }

    // Remaining nodes shuffle into the cross-cutting clusters.
    let mut rest: Vec<usize> = (0..v).filter(|&i| cluster_of[i].is_none()).collect();
    use rand::seq::SliceRandom;
    rest.shuffle(&mut rng);
    let cross = (k - next_cluster).max(1);
    for (pos, node) in rest.into_iter().enumerate() {
        cluster_of[node] = Some(next_cluster + pos % cross);
    }
    let n_clusters = next_cluster + cross;
    let cluster_of: Vec<usize> = cluster_of.into_iter().map(Option::unwrap).collect();

    let mut members: Vec<Vec<u32>> = vec![Vec::new(); n_clusters];
    for (node, &c) in cluster_of.iter().enumerate() {
        members[c].push(node as u32);
    }
    let mut relationship_sets = Vec::new();
    for group in &members {
        if group.len() < min_set_size.max(2) {
            continue;
        }
        let core = pruned.vocab().external(group[0]);
        let positives = group[1..]
            .iter()
            .map(|&m| pruned.vocab().external(m))
            .collect();
        relationship_sets
            .push(RelationshipSet::new(core, positives).expect("non-empty planted positives"));
    }

    PlantedTruth {
        cluster_of,
        n_clusters,
        relationship_sets,
    }
}

/// Draws each patient's home cluster, activates concepts by cluster
/// membership, and emits 2 + Poisson(repeat_mean) events per active concept.
pub fn generate_patients(
    pruned: &Ontology,
    truth: &PlantedTruth,
    cfg: &SynthConfig,
) -> Result<Vec<PatientRecord>> {
    cfg.validate()?;
    let v = pruned.len();
    if truth.cluster_of.len() != v {
        return Err(Error::ShapeMismatch(
            "cluster assignment does not match the retained vocabulary".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(2);
    let repeat = if cfg.repeat_mean > 0.0 {
        Some(Poisson::new(cfg.repeat_mean).expect("positive mean"))
    } else {
        None
    };

    let mut records = Vec::with_capacity(cfg.n_patients);
    for p in 0..cfg.n_patients {
        let home = rng.gen_range(0..truth.n_clusters);
        let mut events = Vec::new();
        for node in 0..v {
            let rate = if truth.cluster_of[node] == home {
                cfg.within_cluster_rate
            } else {
                cfg.background_rate
            };
            if rate > 0.0 && rng.gen::<f64>() < rate {
                let reps = 2 + repeat.as_ref().map_or(0, |d| d.sample(&mut rng) as usize);
                let id = pruned.vocab().external(node as u32);
                for _ in 0..reps {
                    events.push((id, rng.gen_range(0..3650u32)));
                }
            }
        }
        records.push(PatientRecord {
            patient_id: format!("p{p:06}"),
            events,
        });
    }
    Ok(records)
}

/// Everything one synthetic run produces.
pub struct SynthDataset {
    pub full_ontology: Ontology,
    pub pruned: Ontology,
    pub rollup: RollUpMap,
    pub truth: PlantedTruth,
    pub records: Vec<PatientRecord>,
}

/// Generates the ontology, prunes it, assigns clusters over the retained
/// vocabulary, and draws the patient cohort.
pub fn generate_dataset(cfg: &SynthConfig, prune_depth: u32) -> Result<SynthDataset> {
    let full_ontology = generate_ontology(cfg)?;
    let (pruned, rollup) = full_ontology.prune_to_depth(prune_depth);
    let truth = assign_clusters(&pruned, cfg, 6);
    let records = generate_patients(&pruned, &truth, cfg)?;
    Ok(SynthDataset {
        full_ontology,
        pruned,
        rollup,
        truth,
        records,
    })
}

#[derive(Debug, Clone)]
pub struct LiftCheck {
    pub within_nonzero_rate: f64,
    pub cross_nonzero_rate: f64,
    /// One-sided sign-test p-value for within > cross co-occurrence.
    pub p_value: f64,
}

/// Draws matched (within-cluster, cross-cluster) pair samples and sign-tests
/// that planted pairs co-occur more often.
pub fn planted_lift_sign_test(
    x: &CooccurrenceMatrix,
    truth: &PlantedTruth,
    samples: usize,
    seed: u64,
) -> Result<LiftCheck> {
    let v = x.vocab_size();
    if truth.cluster_of.len() != v {
        return Err(Error::ShapeMismatch(
            "cluster assignment does not match the matrix".into(),
        ));
    }
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); truth.n_clusters];
    for (node, &c) in truth.cluster_of.iter().enumerate() {
        members[c].push(node as u32);
    }
    let usable: Vec<usize> = (0..truth.n_clusters)
        .filter(|&c| members[c].len() >= 2)
        .collect();
    if usable.len() < 2 {
        return Err(Error::config("n_clusters", "need two clusters with >= 2 members"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wins = 0u64;
    let mut losses = 0u64;
    let mut within_nonzero = 0usize;
    let mut cross_nonzero = 0usize;
    for _ in 0..samples {
        let c = usable[rng.gen_range(0..usable.len())];
        let group = &members[c];
        let a = group[rng.gen_range(0..group.len())];
        let b = loop {
            let b = group[rng.gen_range(0..group.len())];
            if b != a {
                break b;
            }
        };
        let within = x.get(a, b);

        let c2 = loop {
            let c2 = usable[rng.gen_range(0..usable.len())];
            if c2 != c {
                break c2;
            }
        };
        let u = members[c][rng.gen_range(0..members[c].len())];
        let w = members[c2][rng.gen_range(0..members[c2].len())];
        let cross = x.get(u, w);

        if within > 0 {
            within_nonzero += 1;
        }
        if cross > 0 {
            cross_nonzero += 1;
        }
        if within > cross {
            wins += 1;
        } else if within < cross {
            losses += 1;
        }
    }
    let trials = wins + losses;
    let p_value = if trials == 0 {
        1.0
    } else {
        let binom = Binomial::new(0.5, trials).expect("valid binomial");
        1.0 - binom.cdf(wins.saturating_sub(1))
    };
    Ok(LiftCheck {
        within_nonzero_rate: within_nonzero as f64 / samples as f64,
        cross_nonzero_rate: cross_nonzero as f64 / samples as f64,
        p_value,
    })
}
