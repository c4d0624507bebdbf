//! Dense V x d embedding matrices and their on-disk formats.
//!
//! Text format: header line `V d kind`, then one line per row,
//! `external_id v1 ... vd` with six decimal places. Binary format: magic
//! `KEEPEMB1`, little-endian u32 V and d, then V*d little-endian f32 values
//! row-major. Rows follow the vocabulary's internal index order.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

const BINARY_MAGIC: &[u8; 8] = b"KEEPEMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Anchor,
    Target,
    Context,
    Final,
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EmbeddingKind::Anchor => "anchor",
            EmbeddingKind::Target => "target",
            EmbeddingKind::Context => "context",
            EmbeddingKind::Final => "final",
        };
        f.write_str(s)
    }
}

impl FromStr for EmbeddingKind {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "anchor" => Ok(EmbeddingKind::Anchor),
            "target" => Ok(EmbeddingKind::Target),
            "context" => Ok(EmbeddingKind::Context),
            "final" => Ok(EmbeddingKind::Final),
            _ => Err(()),
        }
    }
}

/// Row-major V x d matrix; row i is the vector of internal index i.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Vec<f32>,
    vocab_size: usize,
    dim: usize,
    kind: EmbeddingKind,
}

impl EmbeddingMatrix {
    pub fn new(values: Vec<f32>, vocab_size: usize, dim: usize, kind: EmbeddingKind) -> Result<Self> {
        if values.len() != vocab_size * dim {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{}={} values, got {}",
                vocab_size,
                dim,
                vocab_size * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "embedding value",
                epoch: 0,
            });
        }
        Ok(EmbeddingMatrix {
            values,
            vocab_size,
            dim,
            kind,
        })
    }

    pub fn from_f64(values: &[f64], vocab_size: usize, dim: usize, kind: EmbeddingKind) -> Result<Self> {
        let v32: Vec<f32> = values.iter().map(|&v| v as f32).collect();
        EmbeddingMatrix::new(v32, vocab_size, dim, kind)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Row copied to f64, the working precision of training and evaluation.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    pub fn write_text<W: Write>(&self, vocab: &Vocabulary, out: W) -> Result<()> {
        if vocab.len() != self.vocab_size {
            return Err(Error::ShapeMismatch(format!(
                "vocabulary has {} entries, matrix has {} rows",
                vocab.len(),
                self.vocab_size
            )));
        }
        let mut out = BufWriter::new(out);
        writeln!(out, "{} {} {}", self.vocab_size, self.dim, self.kind)?;
        for i in 0..self.vocab_size {
            write!(out, "{}", vocab.external(i as u32))?;
            for v in self.row(i) {
                write!(out, " {v:.6}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_text_path(&self, vocab: &Vocabulary, path: &Path) -> Result<()> {
        self.write_text(vocab, std::fs::File::create(path)?)
    }

    /// Reads the text format, checking row order against `vocab` when given.
    pub fn read_text_path(path: &Path, vocab: Option<&Vocabulary>) -> Result<Self> {
        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file"))??;
        let mut parts = header.split_whitespace();
        let v: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "bad vocab size"))?;
        let d: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "bad dimension"))?;
        let kind: EmbeddingKind = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "bad kind tag"))?;
        let mut values = Vec::with_capacity(v * d);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(path, row + 2, "bad external id"))?;
            if let Some(vocab) = vocab {
                if row >= vocab.len() || vocab.external(row as u32).0 != id {
                    return Err(Error::parse(
                        path,
                        row + 2,
                        format!("row id {id} does not match vocabulary order"),
                    ));
                }
            }
            let mut n = 0;
            for p in parts {
                let x: f32 = p
                    .parse()
                    .map_err(|_| Error::parse(path, row + 2, "bad value"))?;
                values.push(x);
                n += 1;
            }
            if n != d {
                return Err(Error::parse(path, row + 2, format!("expected {d} values, got {n}")));
            }
        }
        EmbeddingMatrix::new(values, v, d, kind)
    }

    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.vocab_size as u32).to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_binary_path(&self, path: &Path) -> Result<()> {
        self.write_binary(std::fs::File::create(path)?)
    }

    /// Reads the binary format; the kind tag is not stored and is supplied by
    /// the caller.
    pub fn read_binary_path(path: &Path, kind: EmbeddingKind) -> Result<Self> {
        let mut input = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::parse(path, 0, "bad magic bytes"));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let v = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let d = u32::from_le_bytes(word) as usize;
        let mut values = Vec::with_capacity(v * d);
        for _ in 0..v * d {
            input.read_exact(&mut word)?;
            values.push(f32::from_le_bytes(word));
        }
        EmbeddingMatrix::new(values, v, d, kind)
    }

    /// Loads either format, sniffing the binary magic bytes.
    pub fn read_path(path: &Path, vocab: Option<&Vocabulary>, kind: EmbeddingKind) -> Result<Self> {
        let mut head = [0u8; 8];
        let n = {
            let mut f = std::fs::File::open(path)?;
            f.read(&mut head)?
        };
        if n == 8 && &head == BINARY_MAGIC {
            EmbeddingMatrix::read_binary_path(path, kind)
        } else {
            EmbeddingMatrix::read_text_path(path, vocab)
        }
    }
}
