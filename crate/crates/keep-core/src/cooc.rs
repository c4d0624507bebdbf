//! Patient-level co-occurrence counting.
//!
//! Events roll up to retained concepts, a concept enters a patient's
//! phenotype only with two or more post-roll-up occurrences, and each
//! patient contributes at most one count per unordered concept pair.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ontology::RollUpMap;
use crate::vocab::{ConceptId, Vocabulary};

#[derive(Debug, Clone)]
pub struct PatientRecord {
    pub patient_id: String,
    /// (concept, day ordinal); concepts may repeat.
    pub events: Vec<(ConceptId, u32)>,
}

/// What to do with events whose concept is neither retained nor rolled up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownConceptPolicy {
    #[default]
    Skip,
    Error,
}

/// Sparse symmetric pair counts stored for i < j only, plus per-concept
/// phenotype patient counts when built from records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    vocab_size: usize,
    entries: HashMap<(u32, u32), u32>,
    marginals: Option<Vec<u32>>,
}

impl CooccurrenceMatrix {
    pub fn from_entries(vocab_size: usize, entries: HashMap<(u32, u32), u32>) -> Result<Self> {
        for (&(i, j), &c) in &entries {
            if i >= j || j as usize >= vocab_size {
                return Err(Error::ShapeMismatch(format!(
                    "entry ({i},{j}) violates i<j<V={vocab_size}"
                )));
            }
            if c == 0 {
                return Err(Error::ShapeMismatch(format!("entry ({i},{j}) has zero count")));
            }
        }
        Ok(CooccurrenceMatrix {
            vocab_size,
            entries,
            marginals: None,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Symmetric lookup; the diagonal is 0 by contract.
    pub fn get(&self, i: u32, j: u32) -> u32 {
        if i == j {
            return 0;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        self.entries.get(&key).copied().unwrap_or(0)
    }

    /// Patients per phenotype concept; absent when loaded from a matrix file.
    pub fn marginals(&self) -> Option<&[u32]> {
        self.marginals.as_deref()
    }

    /// Entries sorted by (i, j); the deterministic iteration order used by
    /// training and serialization.
    pub fn sorted_entries(&self) -> Vec<(u32, u32, u32)> {
        let mut out: Vec<(u32, u32, u32)> =
            self.entries.iter().map(|(&(i, j), &c)| (i, j, c)).collect();
        out.sort_unstable();
        out
    }

    pub fn nonzero_counts(&self) -> Vec<u32> {
        self.entries.values().copied().collect()
    }

    pub fn total_pair_count(&self) -> u64 {
        self.entries.values().map(|&c| c as u64).sum()
    }

    /// TSV with header `#V=<V>` and lines `i\tj\tcount`, i < j.
    pub fn write_tsv_path(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "#V={}", self.vocab_size)?;
        for (i, j, c) in self.sorted_entries() {
            writeln!(out, "{i}\t{j}\t{c}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv_path(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut vocab_size: Option<usize> = None;
        let mut entries = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("#V=") {
                vocab_size = Some(
                    rest.parse()
                        .map_err(|_| Error::parse(path, lineno + 1, "bad V header"))?,
                );
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let mut next_u32 = |what: &str| -> Result<u32> {
                parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(path, lineno + 1, format!("bad {what}")))
            };
            let i = next_u32("i")?;
            let j = next_u32("j")?;
            let c = next_u32("count")?;
            entries.insert((i, j), c);
        }
        let vocab_size =
            vocab_size.ok_or_else(|| Error::parse(path, 1, "missing #V= header"))?;
        CooccurrenceMatrix::from_entries(vocab_size, entries)
    }
}

/// Rolls events up to retained concepts and applies the two-occurrence rule.
///
/// An event on a retained concept counts toward that concept; an event on an
/// excluded concept counts toward every roll-up target. A concept is in the
/// phenotype iff its post-roll-up occurrence count is >= 2.
pub fn phenotype(
    record: &PatientRecord,
    rollup: &RollUpMap,
    vocab: &Vocabulary,
    unknown: UnknownConceptPolicy,
) -> Result<BTreeSet<u32>> {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for &(concept, _day) in &record.events {
        if let Some(idx) = vocab.index_of(concept) {
            *counts.entry(idx).or_insert(0) += 1;
        } else if let Some(targets) = rollup.targets(concept) {
            for &t in targets {
                if let Some(idx) = vocab.index_of(t) {
                    *counts.entry(idx).or_insert(0) += 1;
                }
            }
        } else if unknown == UnknownConceptPolicy::Error {
            return Err(Error::UnknownConcept(concept));
        }
    }
    Ok(counts
        .into_iter()
        .filter(|&(_, c)| c >= 2)
        .map(|(idx, _)| idx)
        .collect())
}

/// Accumulates the symmetric patient-pair incidence matrix. Workers fold
/// disjoint record shards and merge commutatively, so the result does not
/// depend on record order or thread count.
pub fn build_cooccurrence(
    records: &[PatientRecord],
    rollup: &RollUpMap,
    vocab: &Vocabulary,
    unknown: UnknownConceptPolicy,
    threads: usize,
) -> Result<CooccurrenceMatrix> {
    type Partial = (HashMap<(u32, u32), u32>, Vec<u32>);

    let fold = |mut acc: Partial, record: &PatientRecord| -> Result<Partial> {
        let set = phenotype(record, rollup, vocab, unknown)?;
        let members: Vec<u32> = set.into_iter().collect();
        for m in 0..members.len() {
            acc.1[members[m] as usize] += 1;
            for n in m + 1..members.len() {
                *acc.0.entry((members[m], members[n])).or_insert(0) += 1;
            }
        }
        Ok(acc)
    };

    let empty = || (HashMap::new(), vec![0u32; vocab.len()]);
    let merge = |mut a: Partial, b: Partial| -> Partial {
        for (k, v) in b.0 {
            *a.0.entry(k).or_insert(0) += v;
        }
        for (x, y) in a.1.iter_mut().zip(b.1) {
            *x += y;
        }
        a
    };

    let (entries, marginals) = if threads > 1 && records.len() > 64 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        let partials: Vec<Result<Partial>> = pool.install(|| {
            records
                .par_chunks(records.len().div_ceil(threads))
                .map(|chunk| chunk.iter().try_fold(empty(), fold))
                .collect()
        });
        let mut acc = empty();
        for p in partials {
            acc = merge(acc, p?);
        }
        acc
    } else {
        records.iter().try_fold(empty(), fold)?
    };

    Ok(CooccurrenceMatrix {
        vocab_size: vocab.len(),
        entries,
        marginals: Some(marginals),
    })
}

/// Reads `patient_id\tconcept_id\tday_ordinal` TSV, grouping rows by patient
/// in first-seen order. Rows need not be sorted.
pub fn read_patients_path(path: &Path) -> Result<Vec<PatientRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut order: Vec<String> = Vec::new();
    let mut by_patient: HashMap<String, Vec<(ConceptId, u32)>> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let pid = parts
            .next()
            .ok_or_else(|| Error::parse(path, lineno + 1, "missing patient id"))?;
        let concept: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, lineno + 1, "bad concept id"))?;
        let day: u32 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, lineno + 1, "bad day ordinal"))?;
        if !by_patient.contains_key(pid) {
            order.push(pid.to_owned());
        }
        by_patient
            .entry(pid.to_owned())
            .or_default()
            .push((ConceptId(concept), day));
    }
    Ok(order
        .into_iter()
        .map(|pid| {
            let events = by_patient.remove(&pid).unwrap();
            PatientRecord {
                patient_id: pid,
                events,
            }
        })
        .collect())
}

pub fn write_patients_path(records: &[PatientRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        for &(concept, day) in &r.events {
            writeln!(out, "{}\t{}\t{}", r.patient_id, concept, day)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn vocab3() -> Vocabulary {
        Vocabulary::from_ids(vec![ConceptId(10), ConceptId(20), ConceptId(30)]).unwrap()
    }

    fn record(pid: &str, concepts: &[u64]) -> PatientRecord {
        PatientRecord {
            patient_id: pid.into(),
            events: concepts.iter().map(|&c| (ConceptId(c), 0)).collect(),
        }
    }

    #[test]
    fn two_occurrences_admit_a_concept() {
        let vocab = vocab3();
        let rollup = RollUpMap::default();
        let set = phenotype(&record("p", &[10, 10]), &rollup, &vocab, Default::default()).unwrap();
        assert_eq!(set.into_iter().collect::<Vec<_>>(), vec![0]);
        let set = phenotype(&record("p", &[10]), &rollup, &vocab, Default::default()).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn rollup_expands_to_all_targets() {
        let vocab = vocab3();
        let mut map = BTreeMap::new();
        map.insert(
            ConceptId(99),
            [ConceptId(10), ConceptId(20)].into_iter().collect(),
        );
        let rollup = RollUpMap::new(map);
        let set = phenotype(&record("p", &[99, 99]), &rollup, &vocab, Default::default()).unwrap();
        assert_eq!(set.into_iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn unknown_concept_policy() {
        let vocab = vocab3();
        let rollup = RollUpMap::default();
        let rec = record("p", &[77, 77]);
        assert!(phenotype(&rec, &rollup, &vocab, UnknownConceptPolicy::Skip)
            .unwrap()
            .is_empty());
        assert!(matches!(
            phenotype(&rec, &rollup, &vocab, UnknownConceptPolicy::Error),
            Err(Error::UnknownConcept(_))
        ));
    }

    #[test]
    fn one_patient_triangle() {
        let vocab = vocab3();
        let rollup = RollUpMap::default();
        let recs = vec![record("p", &[10, 10, 20, 20, 30, 30])];
        let x = build_cooccurrence(&recs, &rollup, &vocab, Default::default(), 1).unwrap();
        assert_eq!(x.get(0, 1), 1);
        assert_eq!(x.get(0, 2), 1);
        assert_eq!(x.get(1, 2), 1);
        assert_eq!(x.get(1, 1), 0);
        assert_eq!(x.marginals().unwrap(), &[1, 1, 1]);
    }

    #[test]
    fn identical_patients_add_up() {
        let vocab = vocab3();
        let rollup = RollUpMap::default();
        let recs = vec![record("a", &[10, 10, 20, 20]), record("b", &[10, 10, 20, 20])];
        let x = build_cooccurrence(&recs, &rollup, &vocab, Default::default(), 1).unwrap();
        assert_eq!(x.get(0, 1), 2);
        assert_eq!(x.get(1, 0), 2);
    }

    #[test]
    fn empty_stream_is_valid() {
        let vocab = vocab3();
        let x = build_cooccurrence(&[], &RollUpMap::default(), &vocab, Default::default(), 1)
            .unwrap();
        assert_eq!(x.nnz(), 0);
    }

    #[test]
    fn matrix_file_round_trip() {
        let vocab = vocab3();
        let rollup = RollUpMap::default();
        let recs = vec![
            record("a", &[10, 10, 20, 20]),
            record("b", &[10, 10, 30, 30]),
        ];
        let x = build_cooccurrence(&recs, &rollup, &vocab, Default::default(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tsv");
        x.write_tsv_path(&path).unwrap();
        let back = CooccurrenceMatrix::read_tsv_path(&path).unwrap();
        assert_eq!(back.vocab_size(), 3);
        assert_eq!(back.get(0, 1), 1);
        assert_eq!(back.get(0, 2), 1);
        assert!(back.marginals().is_none());
    }

    #[test]
    fn patients_file_round_trip() {
        let recs = vec![
            record("a", &[10, 20]),
            record("b", &[30]),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patients.tsv");
        write_patients_path(&recs, &path).unwrap();
        let back = read_patients_path(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].patient_id, "a");
        assert_eq!(back[0].events.len(), 2);
    }
}
