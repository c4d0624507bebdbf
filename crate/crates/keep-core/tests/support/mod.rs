//! Shared oracles for the integration and acceptance suites. Everything here
//! re-derives expected values through independent code paths; nothing calls
//! back into the implementation it checks beyond plain data accessors.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use keep_core::cooc::{CooccurrenceMatrix, PatientRecord};
use keep_core::embedding::{EmbeddingKind, EmbeddingMatrix};
use keep_core::ontology::{InformationContentTable, Ontology, RollUpMap};
use keep_core::trainer::KeepConfig;
use keep_core::vocab::{ConceptId, Vocabulary};

/// Random rooted DAG edge list: spanning tree plus optional extra
/// child->ancestor-free edges, over shuffled non-dense external ids.
pub fn random_dag_edges(
    rng: &mut ChaCha8Rng,
    n: usize,
    extra_edge_prob: f64,
) -> (Vec<(ConceptId, ConceptId)>, ConceptId) {
    assert!(n >= 2);
    let mut ids: Vec<u64> = (0..n as u64).map(|k| 500 + 7 * k).collect();
    ids.shuffle(rng);
    let mut edges = Vec::new();
    // parents_of over generation order: node k attaches under some m < k.
    let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for k in 1..n {
        let p = rng.gen_range(0..k);
        parents_of[k].push(p);
        edges.push((ConceptId(ids[k]), ConceptId(ids[p])));
    }
    for k in 1..n {
        if rng.gen::<f64>() < extra_edge_prob {
            let p = rng.gen_range(0..k);
            if !parents_of[k].contains(&p) {
                parents_of[k].push(p);
                edges.push((ConceptId(ids[k]), ConceptId(ids[p])));
            }
        }
    }
    (edges, ConceptId(ids[0]))
}

/// Ancestor set (self-inclusive) by upward BFS; the slow reference for the
/// bitset closure.
pub fn ancestor_set(ont: &Ontology, node: u32) -> HashSet<u32> {
    let mut seen = HashSet::new();
    let mut stack = vec![node];
    while let Some(u) = stack.pop() {
        if seen.insert(u) {
            for &p in ont.parents(u) {
                stack.push(p);
            }
        }
    }
    seen
}

/// Exhaustive Resnik: intersect full ancestor sets, take the max IC.
pub fn resnik_oracle(
    ont: &Ontology,
    ic: &InformationContentTable,
    a: u32,
    b: u32,
) -> Option<f64> {
    let anc_a = ancestor_set(ont, a);
    let anc_b = ancestor_set(ont, b);
    anc_a
        .intersection(&anc_b)
        .map(|&x| ic.get(x))
        .fold(None, |acc, v| Some(acc.map_or(v, |m: f64| m.max(v))))
}

/// Descendant count (self-inclusive) by downward BFS.
pub fn descendant_count_oracle(ont: &Ontology, node: u32) -> usize {
    let mut seen = HashSet::new();
    let mut stack = vec![node];
    while let Some(u) = stack.pop() {
        if seen.insert(u) {
            for &c in ont.children(u) {
                stack.push(c);
            }
        }
    }
    seen.len()
}

/// Nearest retained ancestors of an excluded node by plain recursion over
/// every upward path, no memoization.
pub fn rollup_oracle(ont: &Ontology, retained: &HashSet<u32>, node: u32) -> BTreeSet<ConceptId> {
    let mut out = BTreeSet::new();
    for &p in ont.parents(node) {
        if retained.contains(&p) {
            out.insert(ont.vocab().external(p));
        } else {
            out.extend(rollup_oracle(ont, retained, p));
        }
    }
    out
}

/// O(P * V^2) co-occurrence recount with its own phenotype expansion.
pub fn cooc_brute_force(
    records: &[PatientRecord],
    rollup: &RollUpMap,
    vocab: &Vocabulary,
) -> (HashMap<(u32, u32), u32>, Vec<u32>) {
    let v = vocab.len();
    let mut pair_counts: HashMap<(u32, u32), u32> = HashMap::new();
    let mut marginals = vec![0u32; v];
    for record in records {
        let mut occurrences = vec![0u32; v];
        for &(concept, _) in &record.events {
            if let Some(idx) = vocab.index_of(concept) {
                occurrences[idx as usize] += 1;
            } else if let Some(targets) = rollup.targets(concept) {
                for t in targets {
                    if let Some(idx) = vocab.index_of(*t) {
                        occurrences[idx as usize] += 1;
                    }
                }
            }
        }
        let has: Vec<bool> = occurrences.iter().map(|&c| c >= 2).collect();
        for i in 0..v {
            if !has[i] {
                continue;
            }
            marginals[i] += 1;
            for j in i + 1..v {
                if has[j] {
                    *pair_counts.entry((i as u32, j as u32)).or_insert(0) += 1;
                }
            }
        }
    }
    (pair_counts, marginals)
}

/// Independent re-summation of the full objective.
pub fn keep_loss_oracle(
    w: &[f64],
    w_ctx: &[f64],
    b: &[f64],
    b_ctx: &[f64],
    anchor: Option<&[f64]>,
    x: &CooccurrenceMatrix,
    x_max: f64,
    alpha: f64,
    lambda: f64,
    dim: usize,
) -> f64 {
    let weight = |c: f64| if c < x_max { (c / x_max).powf(alpha) } else { 1.0 };
    let mut terms: Vec<f64> = Vec::new();
    for (i, j, c) in x.sorted_entries() {
        for (s, t) in [(i as usize, j as usize), (j as usize, i as usize)] {
            let dot: f64 = (0..dim).map(|k| w[s * dim + k] * w_ctx[t * dim + k]).sum();
            let residual = dot + b[s] + b_ctx[t] - (c as f64).ln();
            terms.push(weight(c as f64) * residual * residual);
        }
    }
    if let Some(anchor) = anchor {
        let reg: f64 = w.iter().zip(anchor).map(|(x, a)| (x - a) * (x - a)).sum();
        terms.push(lambda * reg);
    }
    terms.iter().sum()
}

/// Builds a random small instance (V <= 6, d <= 4, anchor coin-flipped) and
/// returns the max relative error between analytic gradients and central
/// finite differences (h = 1e-6) over every parameter.
pub fn keep_fd_max_rel_err(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
    use keep_core::trainer::{keep_gradients, keep_loss, KeepModel, WeightingFunction};

    let v = rng.gen_range(3..=6usize);
    let d = rng.gen_range(1..=4usize);
    let nnz = rng.gen_range(1..=v * (v - 1) / 2);
    let mut entries = HashMap::new();
    while entries.len() < nnz {
        let i = rng.gen_range(0..v as u32 - 1);
        let j = rng.gen_range(i + 1..v as u32);
        entries.insert((i, j), rng.gen_range(1..30u32));
    }
    let x = CooccurrenceMatrix::from_entries(v, entries).unwrap();
    let wfn = WeightingFunction {
        x_max: rng.gen_range(2.0..20.0),
        alpha: 0.75,
    };
    let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let w = draw(rng, v * d);
    let wc = draw(rng, v * d);
    let b = draw(rng, v);
    let bc = draw(rng, v);
    let anchor = if rng.gen::<bool>() {
        Some(draw(rng, v * d))
    } else {
        None
    };

    let model = KeepModel::from_parts(
        d,
        v,
        w.clone(),
        wc.clone(),
        b.clone(),
        bc.clone(),
        anchor.clone(),
    )
    .unwrap();
    let analytic = keep_gradients(&model, &x, &wfn, lambda).unwrap();

    let h = 1e-6;
    let loss_of = |w: &[f64], wc: &[f64], b: &[f64], bc: &[f64]| -> f64 {
        let m = KeepModel::from_parts(
            d,
            v,
            w.to_vec(),
            wc.to_vec(),
            b.to_vec(),
            bc.to_vec(),
            anchor.clone(),
        )
        .unwrap();
        keep_loss(&m, &x, &wfn, lambda).unwrap()
    };

    let mut max_rel = 0.0f64;
    let mut check = |analytic: f64, numeric: f64| {
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max((analytic - numeric).abs() / denom);
    };
    for k in 0..v * d {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[k] += h;
        wm[k] -= h;
        check(
            analytic.w[k],
            (loss_of(&wp, &wc, &b, &bc) - loss_of(&wm, &wc, &b, &bc)) / (2.0 * h),
        );
        let mut cp = wc.clone();
        let mut cm = wc.clone();
        cp[k] += h;
        cm[k] -= h;
        check(
            analytic.w_ctx[k],
            (loss_of(&w, &cp, &b, &bc) - loss_of(&w, &cm, &b, &bc)) / (2.0 * h),
        );
    }
    for k in 0..v {
        let mut bp = b.clone();
        let mut bm = b.clone();
        bp[k] += h;
        bm[k] -= h;
        check(
            analytic.b[k],
            (loss_of(&w, &wc, &bp, &bc) - loss_of(&w, &wc, &bm, &bc)) / (2.0 * h),
        );
        let mut cp = bc.clone();
        let mut cm = bc.clone();
        cp[k] += h;
        cm[k] -= h;
        check(
            analytic.b_ctx[k],
            (loss_of(&w, &wc, &b, &cp) - loss_of(&w, &wc, &b, &cm)) / (2.0 * h),
        );
    }
    max_rel
}

/// Chi-square upper tail p-value for observed counts against expected
/// probabilities.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = total as f64 * p;
        assert!(expected > 0.0);
        stat += (c as f64 - expected) * (c as f64 - expected) / expected;
    }
    let dof = (counts.len() - 1) as f64;
    if dof == 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof).unwrap();
    1.0 - dist.cdf(stat)
}

pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let p = 1.0 / counts.len() as f64;
    let probs = vec![p; counts.len()];
    chi_square_p(counts, &probs)
}

/// Embedding whose cosine is an exactly monotone (linear) transform of
/// Resnik similarity on a tree.
///
/// Rows carry the ancestor feature map F[a] = sqrt(ic(a) - ic(parent(a)))
/// over self-inclusive ancestors, so dot(x, y) telescopes to ic(lca). A
/// per-row private coordinate pads every norm to a shared constant C, hence
/// cos(x, y) = ic(lca)/C for all x != y.
pub fn resnik_monotone_embedding(ont: &Ontology, ic: &InformationContentTable) -> EmbeddingMatrix {
    let v = ont.len();
    for i in 0..v as u32 {
        assert!(
            ont.parents(i).len() <= 1,
            "construction requires a tree, node {i} has multiple parents"
        );
    }
    let c_norm = (0..v as u32).map(|i| ic.get(i)).fold(0.0f64, f64::max) + 1.0;
    let dim = 2 * v;
    let mut values = vec![0.0f32; v * dim];
    for node in 0..v as u32 {
        let mut anc: Vec<u32> = ancestor_set(ont, node).into_iter().collect();
        anc.sort_unstable();
        for a in anc {
            let parent_ic = ont.parents(a).first().map_or(0.0, |&p| ic.get(p));
            let delta = ic.get(a) - parent_ic;
            values[node as usize * dim + a as usize] = delta.max(0.0).sqrt() as f32;
        }
        let pad = (c_norm - ic.get(node)).max(0.0).sqrt();
        values[node as usize * dim + v + node as usize] = pad as f32;
    }
    EmbeddingMatrix::new(values, v, dim, EmbeddingKind::Final).unwrap()
}

/// Perfect k-ary tree ontology of the given depth.
pub fn perfect_tree(arity: usize, depth: usize) -> Ontology {
    let mut edges = Vec::new();
    let mut next_id = 1u64;
    let mut frontier = vec![0u64];
    for _ in 0..depth {
        let mut new_frontier = Vec::new();
        for &p in &frontier {
            for _ in 0..arity {
                edges.push((ConceptId(next_id), ConceptId(p)));
                new_frontier.push(next_id);
                next_id += 1;
            }
        }
        frontier = new_frontier;
    }
    Ontology::from_edges(&edges, ConceptId(0), &HashMap::new())
        .unwrap()
        .ontology
}

/// Plain GloVe-with-AdamW reference path for the lambda = 0 equivalence
/// check. Follows the trainer's documented seeding, shuffle, batching, and
/// update-order conventions, but re-derives the objective, gradients, and
/// AdamW arithmetic in straight-line code of its own.
pub fn reference_glove(x: &CooccurrenceMatrix, cfg: &KeepConfig) -> (Vec<f64>, Vec<f64>) {
    let v = x.vocab_size();
    let d = cfg.dim;

    // Nearest-rank percentile of nonzero counts.
    let mut counts: Vec<f64> = x.nonzero_counts().iter().map(|&c| c as f64).collect();
    counts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((cfg.x_max_percentile / 100.0 * counts.len() as f64).ceil() as usize)
        .clamp(1, counts.len());
    let x_max = counts[rank - 1];
    let weight = |c: f64| if c < x_max { (c / x_max).powf(cfg.alpha) } else { 1.0 };

    // Ordered pair list in sorted-entry order, (i, j) then (j, i).
    let mut pairs: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(2 * x.nnz());
    for (i, j, c) in x.sorted_entries() {
        let lnx = (c as f64).ln();
        let f = weight(c as f64);
        pairs.push((i as usize, j as usize, lnx, f));
        pairs.push((j as usize, i as usize, lnx, f));
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    init_rng.set_stream(0);
    let scale = 0.5 / d as f64;
    let mut w: Vec<f64> = (0..v * d)
        .map(|_| (init_rng.gen::<f64>() - 0.5) * 2.0 * scale)
        .collect();
    let mut wc: Vec<f64> = (0..v * d)
        .map(|_| (init_rng.gen::<f64>() - 0.5) * 2.0 * scale)
        .collect();
    let mut b = vec![0.0f64; v];
    let mut bc = vec![0.0f64; v];

    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8f64);
    let mut m_w = vec![0.0; v * d];
    let mut v_w = vec![0.0; v * d];
    let mut m_wc = vec![0.0; v * d];
    let mut v_wc = vec![0.0; v * d];
    let mut m_b = vec![0.0; v];
    let mut v_b = vec![0.0; v];
    let mut m_bc = vec![0.0; v];
    let mut v_bc = vec![0.0; v];
    let mut step = 0u64;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<u32> = (0..pairs.len() as u32).collect();

    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut gw = vec![0.0f64; v * d];
    let mut gwc = vec![0.0f64; v * d];
    let mut gb = vec![0.0f64; v];
    let mut gbc = vec![0.0f64; v];

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut touched_t: Vec<usize> = Vec::new();
            let mut touched_c: Vec<usize> = Vec::new();
            for &idx in batch {
                let (i, j, lnx, f) = pairs[idx as usize];
                let mut dot = 0.0;
                for k in 0..d {
                    dot += w[i * d + k] * wc[j * d + k];
                }
                let e = dot + b[i] + bc[j] - lnx;
                epoch_loss += f * e * e;
                let coeff = 2.0 * f * e;
                for k in 0..d {
                    gw[i * d + k] += coeff * wc[j * d + k];
                    gwc[j * d + k] += coeff * w[i * d + k];
                }
                gb[i] += coeff;
                gbc[j] += coeff;
                if !touched_t.contains(&i) {
                    touched_t.push(i);
                }
                if !touched_c.contains(&j) {
                    touched_c.push(j);
                }
            }
            step += 1;
            let t = step as f64;
            let bc1 = 1.0 - beta1.powf(t);
            let bc2 = 1.0 - beta2.powf(t);
            let mut adam = |p: &mut [f64], m: &mut [f64], vv: &mut [f64], g: &[f64], off: usize| {
                for k in 0..g.len() {
                    m[off + k] = beta1 * m[off + k] + (1.0 - beta1) * g[k];
                    vv[off + k] = beta2 * vv[off + k] + (1.0 - beta2) * g[k] * g[k];
                    let m_hat = m[off + k] / bc1;
                    let v_hat = vv[off + k] / bc2;
                    p[off + k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
            };
            for &i in &touched_t {
                let g: Vec<f64> = gw[i * d..(i + 1) * d].to_vec();
                adam(&mut w, &mut m_w, &mut v_w, &g, i * d);
            }
            for &j in &touched_c {
                let g: Vec<f64> = gwc[j * d..(j + 1) * d].to_vec();
                adam(&mut wc, &mut m_wc, &mut v_wc, &g, j * d);
            }
            for &i in &touched_t {
                adam(&mut b, &mut m_b, &mut v_b, &[gb[i]], i);
            }
            for &j in &touched_c {
                adam(&mut bc, &mut m_bc, &mut v_bc, &[gbc[j]], j);
            }
            for &i in &touched_t {
                gw[i * d..(i + 1) * d].iter_mut().for_each(|g| *g = 0.0);
                gb[i] = 0.0;
            }
            for &j in &touched_c {
                gwc[j * d..(j + 1) * d].iter_mut().for_each(|g| *g = 0.0);
                gbc[j] = 0.0;
            }
        }
        trace.push(epoch_loss);
    }
    (w, trace)
}
