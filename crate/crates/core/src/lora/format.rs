//! Binary plugin file layout, all integers little-endian:
//!
//! ```text
//! "FSQL" | version u32 | meta_len u64 | meta JSON
//! per layer, in manifest order, A then B:
//!     name_len u32 | name | tag u8 (0 = A, 1 = B) | rows u32 | cols u32 | rows*cols f32
//! crc32 u32 over every preceding byte
//! ```

use serde::{Deserialize, Serialize};

use super::{LayerFactors, LoraError, LoraPlugin, Matrix, ProvenanceEntry};

pub const MAGIC: &[u8; 4] = b"FSQL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LayerManifest {
    name: String,
    a_shape: [usize; 2],
    b_shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    plugin_id: String,
    base_model_id: String,
    domain: String,
    rank: usize,
    layers: Vec<LayerManifest>,
    #[serde(default)]
    provenance: Vec<ProvenanceEntry>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<(), LoraError> {
    let v = u32::try_from(v).map_err(|_| LoraError::ShapeViolation(format!("{v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_tensor(out: &mut Vec<u8>, name: &str, tag: u8, m: &Matrix) -> Result<(), LoraError> {
    put_u32(out, name.len())?;
    out.extend_from_slice(name.as_bytes());
    out.push(tag);
    put_u32(out, m.rows())?;
    put_u32(out, m.cols())?;
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn encode_plugin(plugin: &LoraPlugin) -> Result<Vec<u8>, LoraError> {
    plugin.validate()?;
    let meta = Meta {
        plugin_id: plugin.plugin_id.clone(),
        base_model_id: plugin.base_model_id.clone(),
        domain: plugin.domain.clone(),
        rank: plugin.rank,
        layers: plugin
            .layers
            .iter()
            .map(|(name, f)| LayerManifest {
                name: name.clone(),
                a_shape: f.a.shape(),
                b_shape: f.b.shape(),
            })
            .collect(),
        provenance: plugin.provenance.clone(),
    };
    let meta = serde_json::to_vec(&meta).map_err(|e| LoraError::Format(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    for (name, f) in &plugin.layers {
        put_tensor(&mut out, name, 0, &f.a)?;
        put_tensor(&mut out, name, 1, &f.b)?;
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LoraError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| LoraError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, LoraError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize, LoraError> {
        let b = self.take(8)?;
        usize::try_from(u64::from_le_bytes(b.try_into().expect("8 bytes")))
            .map_err(|_| LoraError::Format("length overflow".into()))
    }

    fn tensor(&mut self, name: &str, tag: u8, shape: [usize; 2]) -> Result<Matrix, LoraError> {
        let len = self.u32()?;
        let got_name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| LoraError::Format("layer name is not UTF-8".into()))?;
        let got_tag = self.take(1)?[0];
        let (rows, cols) = (self.u32()?, self.u32()?);
        if got_name != name || got_tag != tag || [rows, cols] != shape {
            return Err(LoraError::Format(format!(
                "record `{got_name}`/{got_tag} {rows}×{cols} does not match manifest `{name}`/{tag} {}×{}",
                shape[0], shape[1]
            )));
        }
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| LoraError::Format("tensor size overflow".into()))?;
        let data = self
            .take(n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

/// Verifies the trailing checksum, then the header, manifest and records.
pub fn decode_plugin(bytes: &[u8]) -> Result<LoraPlugin, LoraError> {
    if bytes.len() < 4 + 4 + 8 + 4 {
        return Err(LoraError::Format("file too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(LoraError::ChecksumMismatch { stored, computed });
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(LoraError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(LoraError::Format(format!("unsupported version {version}")));
    }
    let meta_len = r.u64()?;
    let meta: Meta =
        serde_json::from_slice(r.take(meta_len)?).map_err(|e| LoraError::Format(e.to_string()))?;
    let mut layers = std::collections::BTreeMap::new();
    for l in &meta.layers {
        let a = r.tensor(&l.name, 0, l.a_shape)?;
        let b = r.tensor(&l.name, 1, l.b_shape)?;
        if layers.insert(l.name.clone(), LayerFactors { a, b }).is_some() {
            return Err(LoraError::Format(format!("duplicate layer `{}`", l.name)));
        }
    }
    if r.pos != body.len() {
        return Err(LoraError::Format("trailing bytes after last record".into()));
    }
    let plugin = LoraPlugin {
        plugin_id: meta.plugin_id,
        base_model_id: meta.base_model_id,
        domain: meta.domain,
        rank: meta.rank,
        layers,
        provenance: meta.provenance,
    };
    plugin.validate()?;
    Ok(plugin)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::lora::testing::random_plugin;

    fn bits(p: &LoraPlugin) -> Vec<Vec<u32>> {
        p.layers
            .values()
            .flat_map(|f| [f.a.data(), f.b.data()])
            .map(|d| d.iter().map(|v| v.to_bits()).collect())
            .collect()
    }

    #[test]
    fn two_layer_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_plugin(&mut rng, "p", &[("q_proj", 4, 3), ("v_proj", 4, 3)], 2);
        let bytes = encode_plugin(&p).unwrap();
        assert_eq!(&bytes[..4], b"FSQL");
        let back = decode_plugin(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(bits(&back), bits(&p));
    }

    #[test]
    fn every_single_byte_flip_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_plugin(&mut rng, "p", &[("l", 2, 2)], 1);
        let bytes = encode_plugin(&p).unwrap();
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x5a;
            assert!(
                matches!(decode_plugin(&bad), Err(LoraError::ChecksumMismatch { .. })),
                "byte {i}"
            );
        }
    }

    #[test]
    fn invalid_plugins_are_refused_on_save() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = random_plugin(&mut rng, "p", &[("l", 4, 3)], 2);
        let f = p.layers.get_mut("l").unwrap();
        f.b = Matrix::zeros(3, 3);
        assert!(matches!(encode_plugin(&p), Err(LoraError::ShapeViolation(_))));
    }

    #[test]
    fn truncation_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bytes = encode_plugin(&random_plugin(&mut rng, "p", &[("l", 2, 2)], 1)).unwrap();
        assert!(decode_plugin(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_plugin(&bytes[..10]).is_err());
    }
}
