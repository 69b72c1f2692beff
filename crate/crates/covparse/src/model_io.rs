//! Model serialization: a magic header, a JSON metadata block, and an
//! ordered block of named tensors stored as little-endian 32-bit floats.
//!
//! Training runs in 64-bit floats; narrowing to 32 bits on save halves the
//! file and costs at most ~1e-7 relative precision per weight. Loading
//! widens exactly, so `save(load(f))` is byte-identical to `f`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scorer::{Channels, ExternalEmbeddings, Hyperparams, Model, ScorerError, Vocabulary};

pub const MODEL_MAGIC: &[u8; 8] = b"COVPARSE";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a parser model file (bad magic)")]
    BadMagic,
    #[error("model format version {found} is not supported (this build reads version {MODEL_FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("model file is missing tensor {0:?}")]
    MissingTensor(String),
    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// Everything needed to rebuild the model skeleton before tensor loading.
#[derive(Serialize, Deserialize)]
struct Metadata {
    hyper: Hyperparams,
    vocab: Vocabulary,
    channels: Channels,
    external_words: Vec<String>,
}

pub fn save_model<W: Write>(model: &Model, sink: &mut W) -> Result<(), ModelIoError> {
    sink.write_all(MODEL_MAGIC)?;
    sink.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())?;
    let meta = Metadata {
        hyper: model.hyper.clone(),
        vocab: model.vocab.clone(),
        channels: model.channels,
        external_words: model.ext_words.clone(),
    };
    let meta_bytes =
        serde_json::to_vec(&meta).map_err(|e| ModelIoError::Corrupt(e.to_string()))?;
    sink.write_all(&(meta_bytes.len() as u64).to_le_bytes())?;
    sink.write_all(&meta_bytes)?;
    let tensors: Vec<_> = model.store.iter().collect();
    sink.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, tensor, _learnable) in tensors {
        sink.write_all(&(name.len() as u32).to_le_bytes())?;
        sink.write_all(name.as_bytes())?;
        sink.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            sink.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in tensor.values() {
            sink.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_model_file(model: &Model, path: &Path) -> Result<(), ModelIoError> {
    let mut out = BufWriter::new(File::create(path)?);
    save_model(model, &mut out)?;
    out.flush()?;
    Ok(())
}

fn read_exact<R: Read>(source: &mut R, n: usize) -> Result<Vec<u8>, ModelIoError> {
    let mut buf = vec![0u8; n];
    source.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(source: &mut R) -> Result<u32, ModelIoError> {
    let mut buf = [0u8; 4];
    source.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn load_model<R: Read>(source: &mut R) -> Result<Model, ModelIoError> {
    let magic = read_exact(source, 8)?;
    if magic != MODEL_MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    let version = read_u32(source)?;
    if version != MODEL_FORMAT_VERSION {
        return Err(ModelIoError::UnsupportedVersion { found: version });
    }
    let mut len_buf = [0u8; 8];
    source.read_exact(&mut len_buf)?;
    let meta_len = u64::from_le_bytes(len_buf) as usize;
    let meta_bytes = read_exact(source, meta_len)?;
    let meta: Metadata = serde_json::from_slice(&meta_bytes)
        .map_err(|e| ModelIoError::Corrupt(format!("metadata: {e}")))?;
    let tensor_count = read_u32(source)? as usize;
    let mut tensors: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        let name_len = read_u32(source)? as usize;
        let name = String::from_utf8(read_exact(source, name_len)?)
            .map_err(|e| ModelIoError::Corrupt(format!("tensor name: {e}")))?;
        let rank = read_u32(source)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(source)? as usize);
        }
        let len: usize = shape.iter().product();
        let bytes = read_exact(source, len * 4)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        tensors.push((name, shape, values));
    }
    // Rebuild the skeleton deterministically, then overwrite every tensor.
    let external = if meta.channels.external {
        let dim = meta.hyper.dim_external;
        let table = tensors
            .iter()
            .find(|(name, _, _)| name == "ext.table")
            .ok_or_else(|| ModelIoError::MissingTensor("ext.table".to_string()))?;
        Some(ExternalEmbeddings {
            dim,
            words: meta.external_words.clone(),
            matrix: table.2.clone(),
        })
    } else {
        None
    };
    let mut model = Model::new(meta.hyper, meta.vocab, meta.channels, external, 0)?;
    if tensors.len() != model.store.len() {
        return Err(ModelIoError::Corrupt(format!(
            "expected {} tensors, file has {}",
            model.store.len(),
            tensors.len()
        )));
    }
    for (name, shape, values) in tensors {
        let id = model
            .store
            .find(&name)
            .ok_or_else(|| ModelIoError::Corrupt(format!("unknown tensor {name:?}")))?;
        let tensor = model.store.get_mut(id);
        if tensor.shape() != shape.as_slice() {
            return Err(ModelIoError::ShapeMismatch {
                name,
                expected: tensor.shape().to_vec(),
                found: shape,
            });
        }
        tensor.values_mut().copy_from_slice(&values);
    }
    Ok(model)
}

pub fn load_model_file(path: &Path) -> Result<Model, ModelIoError> {
    let mut source = BufReader::new(File::open(path)?);
    load_model(&mut source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::{build_vocab, Channels};
    use crate::treebank::{Sentence, Token};

    fn test_model(with_external: bool) -> Model {
        let mut tokens = Vec::new();
        for (i, (form, upos)) in [("a", "DET"), ("b", "NOUN")].iter().enumerate() {
            let mut t = Token::bare(i + 1, form, upos);
            t.head = Some(if i == 0 { 2 } else { 0 });
            t.deprel = Some(if i == 0 { "det" } else { "root" }.to_string());
            tokens.push(t);
        }
        let s = Sentence::from_tokens(tokens);
        let tree = s.gold_tree().unwrap();
        let corpus = vec![(s, tree)];
        let vocab = build_vocab(&corpus, 1).unwrap();
        let hyper = Hyperparams {
            dim_word: 5,
            dim_upos: 3,
            dim_xpos: 3,
            dim_feats: 3,
            dim_external: 4,
            bilstm_out: 6,
            bilstm_layers: 1,
            mlp_hidden: 4,
            ..Hyperparams::default()
        };
        let mut channels = Channels::detect(&vocab, with_external);
        channels.external = with_external;
        let external = with_external.then(|| ExternalEmbeddings {
            dim: 4,
            words: vec!["a".to_string()],
            matrix: vec![0.25, -0.5, 0.75, 1.0],
        });
        Model::new(hyper, vocab, channels, external, 99).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        for with_external in [false, true] {
            let model = test_model(with_external);
            let mut first = Vec::new();
            save_model(&model, &mut first).unwrap();
            let loaded = load_model(&mut first.as_slice()).unwrap();
            let mut second = Vec::new();
            save_model(&loaded, &mut second).unwrap();
            assert_eq!(first, second, "external={with_external}");
        }
    }

    #[test]
    fn magic_and_version_are_enforced()  {
        let model = test_model(false);
        let mut bytes = Vec::new();
        save_model(&model, &mut bytes).unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            load_model(&mut bad_magic.as_slice()),
            Err(ModelIoError::BadMagic)
        ));
        let mut bad_version = bytes.clone();
        bad_version[8] = 99;
        assert!(matches!(
            load_model(&mut bad_version.as_slice()),
            Err(ModelIoError::UnsupportedVersion { found: 99 })
        ));
        let truncated = &bytes[..bytes.len() / 2];
        assert!(load_model(&mut &truncated[..]).is_err());
    }

    #[test]
    fn loaded_model_keeps_vocabulary_and_weights() {
        let model = test_model(false);
        let mut bytes = Vec::new();
        save_model(&model, &mut bytes).unwrap();
        let loaded = load_model(&mut bytes.as_slice()).unwrap();
        assert_eq!(loaded.vocab, model.vocab);
        assert_eq!(loaded.channels, model.channels);
        for ((n1, t1, _), (n2, t2, _)) in model.store.iter().zip(loaded.store.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            for (a, b) in t1.values().iter().zip(t2.values()) {
                assert_eq!(*a as f32, *b as f32);
            }
        }
    }
}
