//! Versioned binary checkpoint: a JSON config header (model config plus both
//! vocabularies) followed by the raw little-endian f64 parameter buffer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

use super::params::Parameters;
use super::prep::{LabelVocab, TokenVocab};
use super::ModelConfig;

const MAGIC: &[u8; 8] = b"EDCKPT01";

#[derive(Serialize, Deserialize)]
struct Header {
    cfg: ModelConfig,
    token_words: Vec<String>,
    label_words: Vec<String>,
}

pub fn save_checkpoint(
    path: &Path,
    params: &Parameters,
    vocab: &TokenVocab,
    labels: &LabelVocab,
) -> Result<(), ModelError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    let header = Header {
        cfg: params.cfg.clone(),
        token_words: vocab.words().to_vec(),
        label_words: labels.words().to_vec(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| ModelError::BadFile(e.to_string()))?;
    out.write_all(&(header_json.len() as u64).to_le_bytes())?;
    out.write_all(&header_json)?;
    out.write_all(&(params.data.len() as u64).to_le_bytes())?;
    for x in &params.data {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Parameters, TokenVocab, LabelVocab), ModelError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::BadFile("not a checkpoint file (bad magic)".into()));
    }
    let header_len = read_u64(&mut input)? as usize;
    let mut header_buf = vec![0u8; header_len];
    input.read_exact(&mut header_buf)?;
    let header: Header = serde_json::from_slice(&header_buf)
        .map_err(|e| ModelError::BadFile(format!("corrupt checkpoint header: {e}")))?;

    let count = read_u64(&mut input)? as usize;
    let mut params = Parameters::init(&header.cfg)?;
    if params.data.len() != count {
        return Err(ModelError::BadFile(format!(
            "checkpoint has {count} parameters but the config implies {}",
            params.data.len()
        )));
    }
    let mut buf = [0u8; 8];
    for x in &mut params.data {
        input.read_exact(&mut buf)?;
        *x = f64::from_le_bytes(buf);
    }
    let vocab = TokenVocab::from_words(header.token_words);
    let labels = LabelVocab::from_words(header.label_words);
    Ok((params, vocab, labels))
}

fn read_u64(input: &mut impl Read) -> Result<u64, ModelError> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
