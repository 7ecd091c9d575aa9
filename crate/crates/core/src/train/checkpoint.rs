//! Binary checkpoint: magic, version, JSON config block, vocabulary block,
//! corpus block, then named tensors as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, TrainConfig};
use crate::ingest::{EntityIndex, ReviewIndex, StoredReview, Vocabulary};
use crate::model::{Model, ModelConfig};
use crate::nn::Matrix;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"REVFMCKP";
pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on any single length field, against corrupt headers.
const MAX_BLOCK: u64 = 1 << 34;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub train_config: TrainConfig,
    pub corpus: Corpus,
}

#[derive(Serialize, Deserialize)]
struct ConfigBlock {
    seed: u64,
    model: ModelConfig,
    train: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct CorpusBlock {
    devices: Vec<String>,
    services: Vec<String>,
    max_tokens: usize,
    reviews: Vec<StoredReview>,
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_bytes(w: &mut impl Write, bytes: &[u8]) -> Result<()> {
    put_u64(w, bytes.len() as u64)?;
    Ok(w.write_all(bytes)?)
}

pub fn write_checkpoint(mut w: impl Write, model: &Model, train_config: &TrainConfig, corpus: &Corpus) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, FORMAT_VERSION)?;
    let config = ConfigBlock {
        seed: model.params().seed(),
        model: model.config().clone(),
        train: train_config.clone(),
    };
    put_bytes(&mut w, &serde_json::to_vec(&config)?)?;

    let words = corpus.vocab.words();
    put_u64(&mut w, words.len() as u64)?;
    for word in words {
        put_u32(&mut w, word.len() as u32)?;
        w.write_all(word.as_bytes())?;
    }

    let index = &corpus.index;
    let block = CorpusBlock {
        devices: index.devices().ids().to_vec(),
        services: index.services().ids().to_vec(),
        max_tokens: index.max_tokens(),
        reviews: index.reviews().to_vec(),
    };
    put_bytes(&mut w, &serde_json::to_vec(&block)?)?;

    let params = model.params();
    put_u64(&mut w, params.len() as u64)?;
    for id in params.ids() {
        let name = params.name(id);
        put_u32(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        let m = params.value(id);
        put_u64(&mut w, m.rows() as u64)?;
        put_u64(&mut w, m.cols() as u64)?;
        for v in m.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint(path: &Path, model: &Model, train_config: &TrainConfig, corpus: &Corpus) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io_at(path, e))?;
    write_checkpoint(BufWriter::new(file), model, train_config, corpus)
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Checkpoint(format!("truncated while reading {what}")),
            _ => Error::Io(e),
        })
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn bytes(&mut self, len: u64, what: &str) -> Result<Vec<u8>> {
        if len > MAX_BLOCK {
            return Err(Error::Checkpoint(format!("implausible length {len} for {what}")));
        }
        let mut buf = vec![0u8; len as usize];
        self.exact(&mut buf, what)?;
        Ok(buf)
    }

    fn string(&mut self, len: u64, what: &str) -> Result<String> {
        String::from_utf8(self.bytes(len, what)?).map_err(|_| Error::Checkpoint(format!("{what} is not UTF-8")))
    }
}

pub fn read_checkpoint(r: impl Read) -> Result<Checkpoint> {
    let mut r = Reader { inner: r };
    let mut magic = [0u8; 8];
    r.exact(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let len = r.u64("config length")?;
    let config: ConfigBlock = serde_json::from_slice(&r.bytes(len, "config block")?)
        .map_err(|e| Error::Checkpoint(format!("config block: {e}")))?;

    let n_words = r.u64("vocabulary size")?;
    let mut words = Vec::new();
    for _ in 0..n_words {
        let len = r.u32("word length")?;
        words.push(r.string(len as u64, "vocabulary entry")?);
    }
    let vocab = Vocabulary::from_id_list(words)?;

    let len = r.u64("corpus length")?;
    let block: CorpusBlock = serde_json::from_slice(&r.bytes(len, "corpus block")?)
        .map_err(|e| Error::Checkpoint(format!("corpus block: {e}")))?;
    let index = ReviewIndex::from_parts(
        EntityIndex::from_sorted(block.devices),
        EntityIndex::from_sorted(block.services),
        block.reviews,
        block.max_tokens,
    )?;

    let mut model = Model::new(config.model, config.seed)?;
    let n_tensors = r.u64("tensor count")?;
    if n_tensors != model.params().len() as u64 {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {n_tensors}",
            model.params().len()
        )));
    }
    for _ in 0..n_tensors {
        let len = r.u32("tensor name length")?;
        let name = r.string(len as u64, "tensor name")?;
        let rows = r.u64("tensor rows")?;
        let cols = r.u64("tensor cols")?;
        let id = model
            .params()
            .id(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
        if model.params().value(id).shape() != (rows as usize, cols as usize) {
            return Err(Error::Checkpoint(format!("tensor {name} has shape {rows}x{cols}")));
        }
        let raw = r.bytes(rows.saturating_mul(cols).saturating_mul(8), "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        *model.params_mut().value_mut(id) = Matrix::from_vec(rows as usize, cols as usize, data);
    }
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after the last tensor".into()));
    }
    if vocab.len() != model.config().vocab_size {
        return Err(Error::Checkpoint("vocabulary size disagrees with the model".into()));
    }
    Ok(Checkpoint {
        model,
        train_config: config.train,
        corpus: Corpus { vocab, index },
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
    read_checkpoint(BufReader::new(file))
}
