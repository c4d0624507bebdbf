//! Intrinsic evaluation harnesses.
//!
//! Two assessments run on a trained embedding: a correlation probe that asks
//! how well cosine geometry tracks hierarchy similarity and raw co-occurrence
//! counts, and a discrimination benchmark that scores known relationships
//! against a null distribution of random concepts.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooc::CooccurrenceMatrix;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::ontology::{InformationContentTable, Ontology};
use crate::stats::{median, pearson, percentile_nearest_rank, spearman, wilcoxon_signed_rank};
use crate::vocab::{ConceptId, Vocabulary};

/// Cosine neighbors probed per code in the impact assessment.
pub const IMPACT_TOP_NEIGHBORS: usize = 10;
/// Uniformly sampled comparison concepts per probe.
pub const IMPACT_RANDOM_SAMPLE: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationKind {
    #[default]
    Spearman,
    Pearson,
}

fn correlate(kind: CorrelationKind, xs: &[f64], ys: &[f64]) -> Option<f64> {
    match kind {
        CorrelationKind::Spearman => spearman(xs, ys),
        CorrelationKind::Pearson => pearson(xs, ys),
    }
}

/// Cosine similarity between rows i and j; errors on a zero-norm row.
pub fn cosine_similarity(emb: &EmbeddingMatrix, i: usize, j: usize) -> Result<f64> {
    let (mut dot, mut ni, mut nj) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in emb.row(i).iter().zip(emb.row(j)) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        ni += a * a;
        nj += b * b;
    }
    if ni == 0.0 {
        return Err(Error::ZeroNormRow { row: i });
    }
    if nj == 0.0 {
        return Err(Error::ZeroNormRow { row: j });
    }
    Ok(dot / (ni.sqrt() * nj.sqrt()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpactResult {
    /// Median correlation between cosine and Resnik similarity.
    pub resnik_corr: f64,
    /// Median correlation between cosine and co-occurrence counts.
    pub cooc_corr: f64,
    pub probes: usize,
    /// Probes dropped because one side was constant over the selection.
    pub degenerate_probes: usize,
}

/// Unit-norm f64 copy of the embedding; errors on zero rows.
fn normalized_rows(emb: &EmbeddingMatrix) -> Result<Vec<f64>> {
    let (v, d) = (emb.vocab_size(), emb.dim());
    let mut out = vec![0.0f64; v * d];
    for i in 0..v {
        let row = emb.row(i);
        let norm: f64 = row.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNormRow { row: i });
        }
        for (k, &x) in row.iter().enumerate() {
            out[i * d + k] = x as f64 / norm;
        }
    }
    Ok(out)
}

fn top_neighbors(normalized: &[f64], v: usize, d: usize, code: usize, take: usize) -> Vec<u32> {
    let mut best: Vec<(f64, u32)> = Vec::with_capacity(take + 1);
    for y in 0..v {
        if y == code {
            continue;
        }
        let mut dot = 0.0;
        for k in 0..d {
            dot += normalized[code * d + k] * normalized[y * d + k];
        }
        if best.len() < take || dot > best.last().unwrap().0 {
            let pos = best.partition_point(|&(s, _)| s > dot);
            best.insert(pos, (dot, y as u32));
            if best.len() > take {
                best.pop();
            }
        }
    }
    best.into_iter().map(|(_, y)| y).collect()
}

/// Probes every code: its top cosine neighbors plus a fresh uniform sample
/// per repetition, correlating cosine against Resnik similarity and against
/// co-occurrence counts. Reports the median correlation over all probes.
///
/// Repetitions run in parallel over per-repetition RNG streams and reduce in
/// repetition order, so results are independent of thread count.
pub fn impact_assessment(
    emb: &EmbeddingMatrix,
    ont: &Ontology,
    ic: &InformationContentTable,
    x: &CooccurrenceMatrix,
    repetitions: usize,
    seed: u64,
    kind: CorrelationKind,
) -> Result<ImpactResult> {
    let v = emb.vocab_size();
    let d = emb.dim();
    if ont.len() != v || x.vocab_size() != v {
        return Err(Error::ShapeMismatch(format!(
            "embedding V={v}, graph V={}, matrix V={}",
            ont.len(),
            x.vocab_size()
        )));
    }
    let need = IMPACT_RANDOM_SAMPLE + IMPACT_TOP_NEIGHBORS + 1;
    if v < need {
        return Err(Error::VocabularyTooSmall { need, have: v });
    }
    if repetitions == 0 {
        return Err(Error::config("repetitions", "must be >= 1"));
    }

    let normalized = normalized_rows(emb)?;
    let neighbors: Vec<Vec<u32>> = (0..v)
        .into_par_iter()
        .map(|c| top_neighbors(&normalized, v, d, c, IMPACT_TOP_NEIGHBORS))
        .collect();

    let per_rep: Vec<Result<(Vec<f64>, Vec<f64>, usize)>> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let mut resnik_corrs = Vec::with_capacity(v);
            let mut cooc_corrs = Vec::with_capacity(v);
            let mut degenerate = 0usize;
            let mut cos = Vec::with_capacity(need);
            let mut res = Vec::with_capacity(need);
            let mut cnt = Vec::with_capacity(need);
            for code in 0..v {
                let mut selected: BTreeSet<u32> =
                    neighbors[code].iter().copied().collect();
                // Sample from 0..v-1 and shift past the probed code itself.
                for idx in rand::seq::index::sample(&mut rng, v - 1, IMPACT_RANDOM_SAMPLE) {
                    let y = if idx < code { idx } else { idx + 1 };
                    selected.insert(y as u32);
                }
                cos.clear();
                res.clear();
                cnt.clear();
                for &y in &selected {
                    let yu = y as usize;
                    let mut dot = 0.0;
                    for k in 0..d {
                        dot += normalized[code * d + k] * normalized[yu * d + k];
                    }
                    cos.push(dot);
                    res.push(ont.resnik(ic, code as u32, y)?);
                    cnt.push(x.get(code as u32, y) as f64);
                }
                match correlate(kind, &cos, &res) {
                    Some(c) => resnik_corrs.push(c),
                    None => degenerate += 1,
                }
                match correlate(kind, &cos, &cnt) {
                    Some(c) => cooc_corrs.push(c),
                    None => degenerate += 1,
                }
            }
            Ok((resnik_corrs, cooc_corrs, degenerate))
        })
        .collect();

    let mut resnik_all = Vec::with_capacity(repetitions * v);
    let mut cooc_all = Vec::with_capacity(repetitions * v);
    let mut degenerate = 0;
    for rep in per_rep {
        let (r, c, dg) = rep?;
        resnik_all.extend(r);
        cooc_all.extend(c);
        degenerate += dg;
    }
    if resnik_all.is_empty() || cooc_all.is_empty() {
        return Err(Error::ShapeMismatch(
            "every correlation probe was degenerate".into(),
        ));
    }
    Ok(ImpactResult {
        resnik_corr: median(&resnik_all),
        cooc_corr: median(&cooc_all),
        probes: repetitions * v,
        degenerate_probes: degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationType {
    Synonym,
    Child,
    Complication,
    Comorbidity,
}

impl FromStr for RelationType {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "synonym" => Ok(RelationType::Synonym),
            "child" => Ok(RelationType::Child),
            "complication" => Ok(RelationType::Complication),
            "comorbidity" => Ok(RelationType::Comorbidity),
            _ => Err(()),
        }
    }
}

/// A core concept with its known related concepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationshipSet {
    pub core: ConceptId,
    pub positives: BTreeSet<ConceptId>,
}

impl RelationshipSet {
    pub fn new(core: ConceptId, positives: BTreeSet<ConceptId>) -> Result<Self> {
        if positives.is_empty() {
            return Err(Error::config("positives", "must be non-empty"));
        }
        if positives.contains(&core) {
            return Err(Error::config("positives", "must not contain the core concept"));
        }
        Ok(RelationshipSet { core, positives })
    }

    /// Adds every graph descendant of each positive to the positive set.
    pub fn expand_with_descendants(&self, ont: &Ontology) -> RelationshipSet {
        let mut positives = self.positives.clone();
        for &p in &self.positives {
            if let Some(idx) = ont.vocab().index_of(p) {
                for c in ont.descendants(idx) {
                    positives.insert(ont.vocab().external(c));
                }
            }
        }
        positives.remove(&self.core);
        RelationshipSet {
            core: self.core,
            positives,
        }
    }
}

/// Reads `core_id\trelation_type\tconcept_id` TSV, one set per core in
/// first-seen order.
pub fn read_relationship_sets_path(path: &Path) -> Result<Vec<RelationshipSet>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut order: Vec<ConceptId> = Vec::new();
    let mut by_core: std::collections::HashMap<ConceptId, BTreeSet<ConceptId>> =
        std::collections::HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let core: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, lineno + 1, "bad core id"))?;
        let rel = parts
            .next()
            .ok_or_else(|| Error::parse(path, lineno + 1, "missing relation type"))?;
        RelationType::from_str(rel)
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad relation type {rel:?}")))?;
        let concept: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, lineno + 1, "bad concept id"))?;
        let core = ConceptId(core);
        if !by_core.contains_key(&core) {
            order.push(core);
        }
        by_core.entry(core).or_default().insert(ConceptId(concept));
    }
    order
        .into_iter()
        .map(|core| {
            let positives = by_core.remove(&core).unwrap();
            RelationshipSet::new(core, positives)
        })
        .collect()
}

pub fn write_relationship_sets_path(
    sets: &[(RelationshipSet, RelationType)],
    path: &Path,
) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (set, rel) in sets {
        let tag = match rel {
            RelationType::Synonym => "synonym",
            RelationType::Child => "child",
            RelationType::Complication => "complication",
            RelationType::Comorbidity => "comorbidity",
        };
        for p in &set.positives {
            writeln!(out, "{}\t{}\t{}", set.core, tag, p)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Discrimination {
    /// Bootstrap median of the discrimination score.
    pub score: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Score on the full positive set without resampling.
    pub point_score: f64,
    /// 95th percentile of the null cosine distribution.
    pub threshold: f64,
    /// Fraction of listed positives resolvable in the vocabulary.
    pub coverage: f64,
    pub n_positives: usize,
}

/// Fraction of known positives whose cosine to the core strictly exceeds the
/// 95th percentile of a random-concept null, with a bootstrap CI over the
/// positive set.
pub fn intrinsic_discrimination(
    emb: &EmbeddingMatrix,
    relset: &RelationshipSet,
    vocab: &Vocabulary,
    null_size: usize,
    bootstrap_iters: usize,
    seed: u64,
) -> Result<Discrimination> {
    if vocab.len() != emb.vocab_size() {
        return Err(Error::ShapeMismatch(format!(
            "vocabulary has {} entries, embedding has {} rows",
            vocab.len(),
            emb.vocab_size()
        )));
    }
    if null_size == 0 || bootstrap_iters == 0 {
        return Err(Error::config("null_size/bootstrap_iters", "must be >= 1"));
    }
    let core = vocab
        .index_of(relset.core)
        .ok_or(Error::UnknownConcept(relset.core))?;
    let mut positives: Vec<u32> = relset
        .positives
        .iter()
        .filter_map(|&p| vocab.index_of(p))
        .filter(|&p| p != core)
        .collect();
    positives.sort_unstable();
    positives.dedup();
    let coverage = positives.len() as f64 / relset.positives.len() as f64;
    if positives.is_empty() {
        return Err(Error::config(
            "positives",
            "no positive concept resolves in the embedding vocabulary",
        ));
    }

    let positive_set: BTreeSet<u32> = positives.iter().copied().collect();
    let candidates: Vec<u32> = (0..vocab.len() as u32)
        .filter(|&i| i != core && !positive_set.contains(&i))
        .collect();
    if candidates.len() < 20 {
        return Err(Error::VocabularyTooSmall {
            need: 20,
            have: candidates.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut null = Vec::with_capacity(null_size);
    for _ in 0..null_size {
        let y = candidates[rng.gen_range(0..candidates.len())];
        null.push(cosine_similarity(emb, core as usize, y as usize)?);
    }
    let threshold = percentile_nearest_rank(&null, 95.0);

    let pos_cos: Vec<f64> = positives
        .iter()
        .map(|&p| cosine_similarity(emb, core as usize, p as usize))
        .collect::<Result<_>>()?;
    let exceed: Vec<bool> = pos_cos.iter().map(|&c| c > threshold).collect();
    let point_score = exceed.iter().filter(|&&e| e).count() as f64 / exceed.len() as f64;

    let n = exceed.len();
    let mut boot_scores = Vec::with_capacity(bootstrap_iters);
    for _ in 0..bootstrap_iters {
        let mut hits = 0usize;
        for _ in 0..n {
            if exceed[rng.gen_range(0..n)] {
                hits += 1;
            }
        }
        boot_scores.push(hits as f64 / n as f64);
    }
    let score = median(&boot_scores);
    let ci_low = percentile_nearest_rank(&boot_scores, 2.5);
    let ci_high = percentile_nearest_rank(&boot_scores, 97.5);

    Ok(Discrimination {
        score,
        ci_low,
        ci_high,
        point_score,
        threshold,
        coverage,
        n_positives: n,
    })
}

/// Dense per-method, per-task score table for method ranking.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub tasks: Vec<String>,
    /// `scores[m][t]`; `None` marks a missing cell.
    pub scores: Vec<Vec<Option<f64>>>,
}

impl ScoreTable {
    pub fn new(methods: Vec<String>, tasks: Vec<String>) -> Self {
        let scores = vec![vec![None; tasks.len()]; methods.len()];
        ScoreTable {
            methods,
            tasks,
            scores,
        }
    }

    pub fn set(&mut self, method: usize, task: usize, score: f64) {
        self.scores[method][task] = Some(score);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankSummary {
    pub methods: Vec<String>,
    pub tasks: Vec<String>,
    /// Mean over per-task average ranks; rank 1 is the highest score.
    pub mean_ranks: Vec<f64>,
    pub best: String,
    /// Two-sided signed-rank p-value of each method against the best.
    pub p_values: Vec<f64>,
}

/// Ranks methods per task (ties averaged, higher score is better) and tests
/// each method against the best mean rank with the Wilcoxon signed-rank test.
pub fn rank_methods(table: &ScoreTable) -> Result<RankSummary> {
    let m = table.methods.len();
    let t = table.tasks.len();
    if m < 2 {
        return Err(Error::config("methods", "need at least 2"));
    }
    if t < 2 {
        return Err(Error::config("tasks", "need at least 2"));
    }
    let mut missing = Vec::new();
    for (mi, row) in table.scores.iter().enumerate() {
        for (ti, cell) in row.iter().enumerate() {
            if cell.is_none() {
                missing.push(format!("{}/{}", table.methods[mi], table.tasks[ti]));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing.join(", ")));
    }

    let mut rank_sums = vec![0.0; m];
    for ti in 0..t {
        let negated: Vec<f64> = (0..m).map(|mi| -table.scores[mi][ti].unwrap()).collect();
        let ranks = crate::stats::average_ranks(&negated);
        for (mi, r) in ranks.iter().enumerate() {
            rank_sums[mi] += r;
        }
    }
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / t as f64).collect();
    let best_idx = mean_ranks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let best_scores: Vec<f64> = (0..t).map(|ti| table.scores[best_idx][ti].unwrap()).collect();
    let mut p_values = Vec::with_capacity(m);
    for mi in 0..m {
        let scores: Vec<f64> = (0..t).map(|ti| table.scores[mi][ti].unwrap()).collect();
        p_values.push(wilcoxon_signed_rank(&scores, &best_scores)?);
    }
    Ok(RankSummary {
        methods: table.methods.clone(),
        tasks: table.tasks.clone(),
        mean_ranks,
        best: table.methods[best_idx].clone(),
        p_values,
    })
}

/// Aggregated evaluation output; sections are filled by whichever stages ran.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlations: Option<Vec<MethodCorrelations>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrimination: Option<Vec<MethodDiscrimination>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodCorrelations {
    pub method: String,
    pub resnik_corr: f64,
    pub cooc_corr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodDiscrimination {
    pub method: String,
    pub cores: Vec<CoreDiscrimination>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoreDiscrimination {
    pub core: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub result: Discrimination,
}

impl EvalReport {
    /// Aligned-column text rendering of whichever sections are present.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if let Some(correlations) = &self.correlations {
            out.push_str("Similarity correlations\n");
            out.push_str(&render_table(
                &["Model", "Resnik Sim.", "Co-occur. Sim."],
                &correlations
                    .iter()
                    .map(|c| {
                        vec![
                            c.method.clone(),
                            format!("{:.2}", c.resnik_corr),
                            format!("{:.2}", c.cooc_corr),
                        ]
                    })
                    .collect::<Vec<_>>(),
            ));
        }
        if let Some(discrimination) = &self.discrimination {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("Known-relationship discrimination\n");
            let mut cores: Vec<u64> = Vec::new();
            for m in discrimination {
                for c in &m.cores {
                    if !cores.contains(&c.core) {
                        cores.push(c.core);
                    }
                }
            }
            let mut header: Vec<String> = vec!["Model".into()];
            header.extend(cores.iter().map(|c| c.to_string()));
            let rows: Vec<Vec<String>> = discrimination
                .iter()
                .map(|m| {
                    let mut row = vec![m.method.clone()];
                    for core in &cores {
                        let cell = m
                            .cores
                            .iter()
                            .find(|c| c.core == *core)
                            .map(|c| format!("{:.2}", c.result.score))
                            .unwrap_or_else(|| "-".into());
                        row.push(cell);
                    }
                    row
                })
                .collect();
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            out.push_str(&render_table(&header_refs, &rows));
        }
        if let Some(ranking) = &self.ranking {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("Method ranking\n");
            let rows: Vec<Vec<String>> = ranking
                .methods
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    vec![
                        m.clone(),
                        format!("{:.2}", ranking.mean_ranks[i]),
                        format!("{:.4}", ranking.p_values[i]),
                    ]
                })
                .collect();
            out.push_str(&render_table(&["Model", "Mean Rank", "p-val"], &rows));
            out.push_str(&format!("best: {}\n", ranking.best));
        }
        out
    }
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let mut push_row = |cells: Vec<&str>| {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            for _ in cell.len()..widths[i] {
                out.push(' ');
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    push_row(header.to_vec());
    push_row(widths.iter().map(|_| "-").collect());
    for row in rows {
        push_row(row.iter().map(String::as_str).collect());
    }
    out
}
