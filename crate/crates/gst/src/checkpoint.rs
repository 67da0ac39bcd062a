//! Checkpoint directories.
//!
//! ```text
//! <dir>/params.bin       binary parameter file
//! <dir>/manifest.txt     one "name rows cols precision" line per parameter
//! <dir>/checkpoint.json  model spec, world, training config, metrics
//! ```
//!
//! `params.bin` layout, all integers little-endian:
//!
//! ```text
//! magic "GSTCKPT\0" | u32 version | u64 seed | u32 count
//! count × { u32 name_len | name (UTF-8) | u32 rows | u32 cols | u8 precision | rows·cols × f64 }
//! ```
//!
//! Precision is the byte width of each value; only 8 is written or accepted.

use std::path::Path;

use gst_core::autodiff::{Array, ParameterStore};
use gst_core::env::EnvConfig;
use gst_core::model::ModelSpec;
use gst_core::train::{Checkpoint, MetricsRecord, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read, read_string, write, Error, Result};

pub const MAGIC: &[u8; 8] = b"GSTCKPT\0";
pub const FORMAT_VERSION: u32 = 1;
pub const PARAMS_FILE: &str = "params.bin";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const META_FILE: &str = "checkpoint.json";

pub fn encode_params(store: &ParameterStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + store.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&store.seed().to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (_, name, value) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(value.cols() as u32).to_le_bytes());
        out.push(8);
        for v in value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or("truncated file")?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_params(bytes: &[u8]) -> Result<ParameterStore, String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let mut store = ParameterStore::new(r.u64()?);
    for _ in 0..r.u32()? {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| "parameter name is not UTF-8")?.to_owned();
        let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
        let precision = r.take(1)?[0];
        if precision != 8 {
            return Err(format!("{name}: unsupported precision of {precision} bytes"));
        }
        let raw = r.take(rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or("shape overflow")?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let value = Array::new(rows, cols, data).map_err(|e| e.to_string())?;
        store.add(&name, value).map_err(|e| e.to_string())?;
    }
    if r.at != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.at));
    }
    Ok(store)
}

pub fn manifest_text(store: &ParameterStore) -> String {
    let mut s = format!("# gst checkpoint v{FORMAT_VERSION} seed {}\n", store.seed());
    for (_, name, v) in store.iter() {
        s.push_str(&format!("{name} {} {} f64\n", v.rows(), v.cols()));
    }
    s
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    spec: ModelSpec,
    env: EnvConfig,
    train: TrainConfig,
    epoch: usize,
    metrics: Vec<MetricsRecord>,
}

pub fn save(dir: &Path, ckpt: &Checkpoint) -> Result<()> {
    write(&dir.join(PARAMS_FILE), encode_params(&ckpt.store))?;
    write(&dir.join(MANIFEST_FILE), manifest_text(&ckpt.store))?;
    let meta = Meta {
        format_version: FORMAT_VERSION,
        spec: ckpt.spec.clone(),
        env: ckpt.env.clone(),
        train: ckpt.train.clone(),
        epoch: ckpt.epoch,
        metrics: ckpt.metrics.clone(),
    };
    write(&dir.join(META_FILE), serde_json::to_string_pretty(&meta).expect("serializable") + "\n")
}

/// Loads and cross-checks all three files; the model must bind to the store.
pub fn load(dir: &Path) -> Result<Checkpoint> {
    let params = dir.join(PARAMS_FILE);
    let store = decode_params(&read(&params)?).map_err(|e| Error::format(&params, e))?;
    let manifest = dir.join(MANIFEST_FILE);
    if read_string(&manifest)? != manifest_text(&store) {
        return Err(Error::format(&manifest, "does not match params.bin"));
    }
    let meta_path = dir.join(META_FILE);
    let meta: Meta = serde_json::from_str(&read_string(&meta_path)?).map_err(|e| Error::format(&meta_path, e))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::format(&meta_path, format!("unsupported version {}", meta.format_version)));
    }
    let ckpt = Checkpoint { spec: meta.spec, store, env: meta.env, train: meta.train, epoch: meta.epoch, metrics: meta.metrics };
    ckpt.model()?;
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gst_core::model::Model;
    use gst_core::tracker::ModelConfig;

    #[test]
    fn params_round_trip_bit_exact() {
        let (_, mut store) = Model::init(&ModelSpec::gst(ModelConfig { dim: 4, scorer_hidden: 3, ..Default::default() }), 9).unwrap();
        let id = store.ids().next().unwrap();
        store.values_mut(id)[..4].copy_from_slice(&[f64::MIN_POSITIVE, -0.0, 1e300, 5e-324]);
        let back = decode_params(&encode_params(&store)).unwrap();
        assert_eq!(back.seed(), 9);
        for ((_, n1, a), (_, n2, b)) in store.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(a.shape(), b.shape());
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let store = ParameterStore::new(1);
        let mut bytes = encode_params(&store);
        assert!(decode_params(&bytes[..10]).is_err());
        bytes[0] = b'X';
        assert!(decode_params(&bytes).unwrap_err().contains("magic"));
        let mut bytes = encode_params(&store);
        bytes.push(0);
        assert!(decode_params(&bytes).unwrap_err().contains("trailing"));
    }
}
