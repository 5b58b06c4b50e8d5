//! Binary checkpoint format. Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "FQSL"
//! version u32      currently 1
//! config  u64 length + UTF-8 model-config text
//! count   u64      number of parameter records
//! record  u64 name length + name bytes
//!         u32 rank + per-axis u64 extents
//!         raw f64 values (row-major)
//! ```
//!
//! Values round-trip bit-exactly: f64s are copied via `to_le_bytes`, never
//! reformatted through text.

use crate::autodiff::{ParamStore, ParamId};
use crate::error::{Error, Result};
use crate::io::config::{self, Config};
use crate::model::{ModelConfig, ModelWeights};
use crate::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FQSL";
const VERSION: u32 = 1;

/// Writes the model configuration and every parameter tensor to `path`.
pub fn save(path: &Path, store: &ParamStore, cfg: &ModelConfig) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let cfg_text = config::render_model_config(cfg);
    out.extend_from_slice(&(cfg_text.len() as u64).to_le_bytes());
    out.extend_from_slice(cfg_text.as_bytes());

    // Step 1: collect (name, id) sorted by name so the byte stream is a pure
    // function of the parameter values, independent of registration order.
    let mut named: Vec<(String, ParamId)> =
        store.ids().map(|id| (store.name_of(id).to_string(), id)).collect();
    named.sort_by(|a, b| a.0.cmp(&b.0));

    out.extend_from_slice(&(named.len() as u64).to_le_bytes());
    for (name, id) in &named {
        let t = store.value(*id);
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Reads a checkpoint and rebuilds the model: the embedded configuration
/// recreates the parameter layout, then stored values overwrite every tensor.
pub fn load(path: &Path) -> Result<(ParamStore, ModelWeights)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };

    if r.take(4)? != MAGIC {
        return Err(r.fail("bad magic (not a checkpoint)"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(r.fail(format!("unsupported version {version}")));
    }
    let cfg_len = r.u64()? as usize;
    let cfg_text = std::str::from_utf8(r.take(cfg_len)?)
        .map_err(|_| Error::format("checkpoint config block is not UTF-8"))?;
    let mc = config::model_config(&Config::parse(cfg_text)?)?;

    let mut store = ParamStore::new();
    let weights = ModelWeights::register(&mut store, &mc)?;

    let count = r.u64()? as usize;
    if count != store.ids().count() {
        return Err(r.fail(format!(
            "parameter count mismatch: file has {count}, model has {}",
            store.ids().count()
        )));
    }
    for _ in 0..count {
        let name_len = r.u64()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::format("parameter name is not UTF-8"))?
            .to_string();
        let rank = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * 8)?;
        let id = store
            .id_of(&name)
            .ok_or_else(|| Error::format(format!("checkpoint has unknown parameter `{name}`")))?;
        if store.value(id).shape() != shape.as_slice() {
            return Err(Error::format(format!(
                "parameter `{name}` shape mismatch: file {shape:?}, model {:?}",
                store.value(id).shape()
            )));
        }
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *store.value_mut(id) = Tensor::new(&shape, data)?;
    }
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after last parameter record"));
    }
    Ok((store, weights))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.fail("truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn fail(&self, msg: impl std::fmt::Display) -> Error {
        Error::format(format!("{}: {msg} at byte {}", self.path.display(), self.pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> (ParamStore, ModelConfig) {
        let mc = ModelConfig {
            input_size: 32,
            stage_channels: [2, 3, 4, 5],
            n_filters: 2,
            c_edge: 2,
            seed: 11,
            ..Default::default()
        };
        let mut store = ParamStore::new();
        ModelWeights::register(&mut store, &mc).unwrap();
        (store, mc)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (store, mc) = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fqsl");
        save(&path, &store, &mc).unwrap();

        let (loaded, _) = load(&path).unwrap();
        assert_eq!(loaded.ids().count(), store.ids().count());
        for id in store.ids() {
            let name = store.name_of(id);
            let other = loaded.id_of(name).expect("name survives");
            assert_eq!(store.value(id).shape(), loaded.value(other).shape());
            for (a, b) in store.value(id).data().iter().zip(loaded.value(other).data()) {
                assert_eq!(a.to_bits(), b.to_bits(), "param {name}");
            }
        }

        // Saving the loaded model reproduces the file byte for byte.
        let path2 = dir.path().join("m2.fqsl");
        save(&path2, &loaded, &mc).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let (store, mc) = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fqsl");
        save(&path, &store, &mc).unwrap();
        let good = std::fs::read(&path).unwrap();

        let bad_magic = {
            let mut b = good.clone();
            b[0] = b'X';
            b
        };
        let bad_version = {
            let mut b = good.clone();
            b[4] = 99;
            b
        };
        let truncated = good[..good.len() - 5].to_vec();
        for (label, bytes) in
            [("magic", bad_magic), ("version", bad_version), ("truncated", truncated)]
        {
            let p = dir.path().join(format!("{label}.fqsl"));
            std::fs::write(&p, bytes).unwrap();
            assert!(load(&p).is_err(), "{label} should fail");
        }
    }
}
