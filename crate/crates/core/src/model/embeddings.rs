//! External embedding files: precomputed contextual vectors keyed by record
//! id, stored as float32 subword rows plus a subword-to-token alignment map.
//! Reading averages the subword rows of each token.
//!
//! Layout (little-endian): magic `EDEMBF01`, u32 record count, then per
//! record: u32 id length, id bytes, u32 token_count, u32 subword_count,
//! u32 dim, subword_count u32 alignment entries (token index per subword),
//! subword_count x dim f32 rows.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::ModelError;

const MAGIC: &[u8; 8] = b"EDEMBF01";

/// One record as written by an embedding producer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub token_count: u32,
    pub dim: u32,
    /// Token index of each subword row.
    pub alignment: Vec<u32>,
    /// subword_count x dim, row-major.
    pub rows: Vec<f32>,
}

/// Token-level vectors per record id, subwords already averaged.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    records: BTreeMap<String, Array2<f64>>,
}

impl EmbeddingStore {
    pub fn get(&self, id: &str) -> Option<&Array2<f64>> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn write_embedding_file(path: &Path, records: &[EmbeddingRecord]) -> Result<(), ModelError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(records.len() as u32).to_le_bytes())?;
    for rec in records {
        let subwords = rec.alignment.len();
        if rec.rows.len() != subwords * rec.dim as usize {
            return Err(ModelError::BadFile(format!(
                "record {}: {} rows for {} subwords x {} dim",
                rec.id,
                rec.rows.len(),
                subwords,
                rec.dim
            )));
        }
        out.write_all(&(rec.id.len() as u32).to_le_bytes())?;
        out.write_all(rec.id.as_bytes())?;
        out.write_all(&rec.token_count.to_le_bytes())?;
        out.write_all(&(subwords as u32).to_le_bytes())?;
        out.write_all(&rec.dim.to_le_bytes())?;
        for a in &rec.alignment {
            out.write_all(&a.to_le_bytes())?;
        }
        for x in &rec.rows {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_embedding_file(path: &Path) -> Result<EmbeddingStore, ModelError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::BadFile("not an embedding file (bad magic)".into()));
    }
    let count = read_u32(&mut input)?;
    let mut store = EmbeddingStore::default();
    for _ in 0..count {
        let id_len = read_u32(&mut input)? as usize;
        let mut id_buf = vec![0u8; id_len];
        input.read_exact(&mut id_buf)?;
        let id = String::from_utf8(id_buf)
            .map_err(|_| ModelError::BadFile("record id is not UTF-8".into()))?;
        let token_count = read_u32(&mut input)? as usize;
        let subwords = read_u32(&mut input)? as usize;
        let dim = read_u32(&mut input)? as usize;
        let mut alignment = Vec::with_capacity(subwords);
        for _ in 0..subwords {
            let a = read_u32(&mut input)? as usize;
            if a >= token_count {
                return Err(ModelError::BadFile(format!(
                    "record {id}: alignment entry {a} out of range for {token_count} tokens"
                )));
            }
            alignment.push(a);
        }
        let mut sums = Array2::<f64>::zeros((token_count, dim));
        let mut counts = vec![0usize; token_count];
        let mut buf = [0u8; 4];
        for &tok in &alignment {
            counts[tok] += 1;
            for c in 0..dim {
                input.read_exact(&mut buf)?;
                sums[(tok, c)] += f64::from(f32::from_le_bytes(buf));
            }
        }
        for (tok, &n) in counts.iter().enumerate() {
            if n == 0 {
                return Err(ModelError::BadFile(format!(
                    "record {id}: token {tok} has no subword rows"
                )));
            }
            for c in 0..dim {
                sums[(tok, c)] /= n as f64;
            }
        }
        store.records.insert(id, sums);
    }
    Ok(store)
}

fn read_u32(input: &mut impl Read) -> Result<u32, ModelError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
