//! Concept identifiers and the external-id <-> dense-index vocabulary table.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// External identifier of a concept, stable across the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub u64);

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for ConceptId {
    fn from(id: u64) -> Self {
        ConceptId(id)
    }
}

/// Dense re-indexing of concepts to `0..V-1`.
///
/// Row `i` of every matrix in the pipeline corresponds to `external(i)`.
/// When the vocabulary comes out of graph construction, row 0 is the
/// hierarchy root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    external: Vec<ConceptId>,
    labels: Vec<Option<String>>,
    index: HashMap<ConceptId, u32>,
}

impl Vocabulary {
    pub fn new(external: Vec<ConceptId>, labels: Vec<Option<String>>) -> Result<Self> {
        assert_eq!(external.len(), labels.len());
        let mut index = HashMap::with_capacity(external.len());
        for (i, &id) in external.iter().enumerate() {
            if index.insert(id, i as u32).is_some() {
                return Err(Error::config("vocabulary", format!("duplicate concept id {id}")));
            }
        }
        Ok(Vocabulary {
            external,
            labels,
            index,
        })
    }

    pub fn from_ids(external: Vec<ConceptId>) -> Result<Self> {
        let labels = vec![None; external.len()];
        Vocabulary::new(external, labels)
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    pub fn external(&self, index: u32) -> ConceptId {
        self.external[index as usize]
    }

    pub fn label(&self, index: u32) -> Option<&str> {
        self.labels[index as usize].as_deref()
    }

    pub fn index_of(&self, id: ConceptId) -> Option<u32> {
        self.index.get(&id).copied()
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn ids(&self) -> &[ConceptId] {
        &self.external
    }

    /// Writes the TSV vocabulary table: `internal_index\texternal_id\tlabel`.
    pub fn write_tsv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        for (i, id) in self.external.iter().enumerate() {
            let label = self.labels[i].as_deref().unwrap_or("");
            writeln!(out, "{i}\t{id}\t{label}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_tsv_path(&self, path: &Path) -> Result<()> {
        self.write_tsv(std::fs::File::create(path)?)
    }

    /// Reads a vocabulary table, requiring internal indices to be `0..V-1` in order.
    pub fn read_tsv_path(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut external = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(path, lineno + 1, "bad internal index"))?;
            let id: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(path, lineno + 1, "bad external id"))?;
            if idx != external.len() {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("expected index {}, found {}", external.len(), idx),
                ));
            }
            let label = parts.next().filter(|s| !s.is_empty()).map(str::to_owned);
            external.push(ConceptId(id));
            labels.push(label);
        }
        Vocabulary::new(external, labels)
    }
}
