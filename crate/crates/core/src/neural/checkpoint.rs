//! Checkpoint format: one JSON header line, then every parameter group in declared
//! order as little-endian f64.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Model;
use super::params::{ModelConfig, ModelParams};
use super::vocab::Vocab;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const FORMAT: &str = "itermem-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    groups: Vec<(String, usize)>,
}

pub fn write_checkpoint<W: Write, T: Scalar>(mut w: W, model: &Model<T>) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        config: model.config,
        vocab: model.vocab.tokens().to_vec(),
        groups: model
            .params
            .groups()
            .iter()
            .map(|(n, g)| (n.to_string(), g.len()))
            .collect(),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let wr = |e: std::io::Error| Error::Checkpoint(e.to_string());
    w.write_all(line.as_bytes()).map_err(wr)?;
    w.write_all(b"\n").map_err(wr)?;
    for (_, g) in model.params.groups() {
        for v in g {
            w.write_all(&v.to_f64_lossy().to_le_bytes()).map_err(wr)?;
        }
    }
    w.flush().map_err(wr)
}

pub fn read_checkpoint<R: Read, T: Scalar>(r: R) -> Result<Model<T>> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let header: Header =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    let vocab = Vocab::from_tokens(header.vocab)
        .ok_or_else(|| Error::Checkpoint("vocabulary lacks the reserved symbols".into()))?;
    let mut params = ModelParams::<T>::zeros(&header.config, vocab.len());
    {
        let groups = params.groups_mut();
        if groups.len() != header.groups.len() {
            return Err(Error::Checkpoint("parameter group count mismatch".into()));
        }
        let mut buf = [0u8; 8];
        for ((name, dst), (hname, hlen)) in groups.into_iter().zip(&header.groups) {
            if name != hname || dst.len() != *hlen {
                return Err(Error::Checkpoint(format!(
                    "group {hname} ({hlen}) does not match {name} ({})",
                    dst.len()
                )));
            }
            for v in dst.iter_mut() {
                r.read_exact(&mut buf)
                    .map_err(|e| Error::Checkpoint(format!("group {name}: {e}")))?;
                *v = T::of(f64::from_le_bytes(buf));
            }
        }
    }
    if r.read(&mut [0u8; 1]).map_err(|e| Error::Checkpoint(e.to_string()))? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    if !params.all_finite() {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    Ok(Model {
        config: header.config,
        vocab,
        params,
    })
}

pub fn save<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(f), model)
}

pub fn load<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuple::split_tokens;

    fn model() -> Model<f64> {
        let toks = split_tokens("a b a b c").unwrap();
        let cfg = ModelConfig {
            embed_dim: 3,
            hidden_dim: 2,
            attn_dim: 2,
            vocab_min_freq: 1,
        };
        Model::from_corpus(cfg, &toks, 9)
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m).unwrap();
        let back: Model<f64> = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(back.config, m.config);
        assert_eq!(back.params.groups(), m.params.groups());
    }

    #[test]
    fn single_precision_load() {
        let m = model();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m).unwrap();
        let back: Model<f32> = read_checkpoint(buf.as_slice()).unwrap();
        for ((_, a), (_, b)) in back.params.groups().iter().zip(m.params.groups()) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| (*x as f64 - y).abs() < 1e-6));
        }
    }

    #[test]
    fn damage_is_detected() {
        let m = model();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m).unwrap();
        let mut short = buf.clone();
        short.pop();
        assert!(read_checkpoint::<_, f64>(short.as_slice()).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint::<_, f64>(long.as_slice()).is_err());
        let mut nan = buf.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(read_checkpoint::<_, f64>(nan.as_slice()).is_err());
        assert!(read_checkpoint::<_, f64>(&b"{}\n"[..]).is_err());
    }
}
