//! Model parameters: one shared encoder block, the event-attention
//! projections, both classifier heads and the zero-knowledge embedding.
//!
//! # Model file layout (version 1, all integers and floats little-endian)
//!
//! ```text
//! magic   b"SKGM"
//! version u32
//! header  u64 byte length, then JSON: {"config": ModelConfig, "vocab": [tokens]}
//! tensors for each tensor in Parameters::NAMES order:
//!         rows u64, cols u64, rows*cols f64 values
//! ```

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::tensor::Matrix;
use crate::vocab::Vocabulary;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SKGM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub tok_emb: Matrix,
    pub pos_emb: Matrix,
    pub enc_wq: Matrix,
    pub enc_bq: Matrix,
    pub enc_wk: Matrix,
    pub enc_bk: Matrix,
    pub enc_wv: Matrix,
    pub enc_bv: Matrix,
    pub enc_wo: Matrix,
    pub enc_bo: Matrix,
    pub ff_w1: Matrix,
    pub ff_b1: Matrix,
    pub ff_w2: Matrix,
    pub ff_b2: Matrix,
    pub base_w1: Matrix,
    pub base_b1: Matrix,
    pub base_w2: Matrix,
    pub base_b2: Matrix,
    pub ev_wq: Matrix,
    pub ev_bq: Matrix,
    pub ev_wk: Matrix,
    pub ev_bk: Matrix,
    pub ev_wv: Matrix,
    pub ev_bv: Matrix,
    pub fused_w1: Matrix,
    pub fused_b1: Matrix,
    pub fused_w2: Matrix,
    pub fused_b2: Matrix,
    pub no_knowledge: Matrix,
}

macro_rules! for_each_tensor {
    ($macro:ident) => {
        $macro!(
            tok_emb, pos_emb, enc_wq, enc_bq, enc_wk, enc_bk, enc_wv, enc_bv, enc_wo, enc_bo,
            ff_w1, ff_b1, ff_w2, ff_b2, base_w1, base_b1, base_w2, base_b2, ev_wq, ev_bq, ev_wk,
            ev_bk, ev_wv, ev_bv, fused_w1, fused_b1, fused_w2, fused_b2, no_knowledge
        )
    };
}

impl Parameters {
    pub const NAMES: [&'static str; 29] = [
        "tok_emb",
        "pos_emb",
        "enc_wq",
        "enc_bq",
        "enc_wk",
        "enc_bk",
        "enc_wv",
        "enc_bv",
        "enc_wo",
        "enc_bo",
        "ff_w1",
        "ff_b1",
        "ff_w2",
        "ff_b2",
        "base_w1",
        "base_b1",
        "base_w2",
        "base_b2",
        "ev_wq",
        "ev_bq",
        "ev_wk",
        "ev_bk",
        "ev_wv",
        "ev_bv",
        "fused_w1",
        "fused_b1",
        "fused_w2",
        "fused_b2",
        "no_knowledge",
    ];

    /// Xavier-style uniform init; biases start at zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.vocab_size < 3 {
            return Err(Error::Config(format!(
                "vocab_size {} too small (need the 3 special tokens)",
                config.vocab_size
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.embed_dim;
        let f = 2 * d;
        let c = config.num_classes;
        let xavier = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Matrix::uniform(rows, cols, bound, rng)
        };
        Ok(Parameters {
            tok_emb: Matrix::uniform(config.vocab_size, d, 0.1, &mut rng),
            pos_emb: Matrix::uniform(config.max_positions(), d, 0.1, &mut rng),
            enc_wq: xavier(d, d, &mut rng),
            enc_bq: Matrix::zeros(1, d),
            enc_wk: xavier(d, d, &mut rng),
            enc_bk: Matrix::zeros(1, d),
            enc_wv: xavier(d, d, &mut rng),
            enc_bv: Matrix::zeros(1, d),
            enc_wo: xavier(d, d, &mut rng),
            enc_bo: Matrix::zeros(1, d),
            ff_w1: xavier(d, f, &mut rng),
            ff_b1: Matrix::zeros(1, f),
            ff_w2: xavier(f, d, &mut rng),
            ff_b2: Matrix::zeros(1, d),
            base_w1: xavier(d, d, &mut rng),
            base_b1: Matrix::zeros(1, d),
            base_w2: xavier(d, c, &mut rng),
            base_b2: Matrix::zeros(1, c),
            ev_wq: xavier(2 * d, d, &mut rng),
            ev_bq: Matrix::zeros(1, d),
            ev_wk: xavier(2 * d, d, &mut rng),
            ev_bk: Matrix::zeros(1, d),
            ev_wv: xavier(2 * d, d, &mut rng),
            ev_bv: Matrix::zeros(1, d),
            fused_w1: xavier(2 * d, d, &mut rng),
            fused_b1: Matrix::zeros(1, d),
            fused_w2: xavier(d, c, &mut rng),
            fused_b2: Matrix::zeros(1, c),
            no_knowledge: Matrix::uniform(1, d, 0.1, &mut rng),
        })
    }

    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        let mut params = Parameters::init(config, 0)?;
        for tensor in params.tensors_mut() {
            for v in &mut tensor.data {
                *v = 0.0;
            }
        }
        Ok(params)
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        macro_rules! refs {
            ($($field:ident),*) => { vec![$(&self.$field),*] };
        }
        for_each_tensor!(refs)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        macro_rules! muts {
            ($($field:ident),*) => { vec![$(&mut self.$field),*] };
        }
        for_each_tensor!(muts)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vec<String>,
}

/// Serialize config, vocabulary and tensors to the versioned binary format.
pub fn save_model(
    mut writer: impl Write,
    params: &Parameters,
    config: &ModelConfig,
    vocab: &Vocabulary,
) -> Result<()> {
    writer.write_all(MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(&Header {
        config: config.clone(),
        vocab: vocab.tokens().to_vec(),
    })?;
    writer.write_all(&(header.len() as u64).to_le_bytes())?;
    writer.write_all(&header)?;
    for tensor in params.tensors() {
        writer.write_all(&(tensor.rows as u64).to_le_bytes())?;
        writer.write_all(&(tensor.cols as u64).to_le_bytes())?;
        for v in &tensor.data {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64(reader: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    reader.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn load_model(mut reader: impl Read) -> Result<(Parameters, ModelConfig, Vocabulary)> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Model("bad magic; not a model file".to_string()));
    }
    let mut version = [0u8; 4];
    reader.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != VERSION {
        return Err(Error::Model(format!(
            "unsupported model version {version} (expected {VERSION})"
        )));
    }
    let header_len = read_u64(&mut reader)? as usize;
    let mut header_bytes = vec![0u8; header_len];
    reader.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    header.config.validate()?;

    let mut params = Parameters::zeros(&header.config)?;
    for (name, tensor) in Parameters::NAMES.iter().zip(params.tensors_mut()) {
        let rows = read_u64(&mut reader)? as usize;
        let cols = read_u64(&mut reader)? as usize;
        if (rows, cols) != (tensor.rows, tensor.cols) {
            return Err(Error::Model(format!(
                "tensor {name} has shape {rows}x{cols}, expected {}x{}",
                tensor.rows, tensor.cols
            )));
        }
        let mut buf = [0u8; 8];
        for v in &mut tensor.data {
            reader.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
    }
    let vocab = Vocabulary::from_tokens(header.vocab);
    Ok((params, header.config, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ModelConfig {
        ModelConfig {
            vocab_size: 11,
            embed_dim: 8,
            heads: 2,
            max_seq_len: 16,
            knowledge_max_len: 12,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let config = small_config();
        let a = Parameters::init(&config, 7).unwrap();
        let b = Parameters::init(&config, 7).unwrap();
        assert_eq!(a, b);
        let c = Parameters::init(&config, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tensor_list_matches_names() {
        let params = Parameters::init(&small_config(), 1).unwrap();
        assert_eq!(params.tensors().len(), Parameters::NAMES.len());
    }

    #[test]
    fn save_load_roundtrip() {
        let config = small_config();
        let params = Parameters::init(&config, 42).unwrap();
        let vocab = Vocabulary::from_tokens(
            (0..config.vocab_size).map(|i| format!("t{i}")).collect(),
        );
        let mut buffer = Vec::new();
        save_model(&mut buffer, &params, &config, &vocab).unwrap();
        let (reloaded, config2, vocab2) = load_model(buffer.as_slice()).unwrap();
        assert_eq!(params, reloaded);
        assert_eq!(config, config2);
        assert_eq!(vocab.tokens(), vocab2.tokens());
    }

    #[test]
    fn corrupt_magic_rejected() {
        let err = load_model(&b"NOPE\x01\x00\x00\x00"[..]).unwrap_err();
        assert!(matches!(err, Error::Model(_)));
    }
}
