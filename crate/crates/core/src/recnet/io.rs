//! Binary model container.
//!
//! Fixed little-endian layout: 4-byte magic, u32 format version, four u32
//! shape fields (vocab, embedding width, hidden width, classes), the
//! 64-byte hex hash of the configuration space the classes index into, then
//! every parameter tensor as raw f32 words in canonical field order. Sizes
//! are fully determined by the header, and the loader refuses files whose
//! length disagrees with it, so a round trip is bit-exact or an error.

use super::{RecModel, Shape, Tensors};
use crate::domain::ConfigSpace;
use std::io;
use std::path::Path;
use thiserror::Error;

const MAGIC: [u8; 4] = *b"GFRN";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 * 4 + 64;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a recommender model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    BadVersion(u32),
    #[error("model file corrupt: {0}")]
    Corrupt(String),
    #[error("model was trained for space {model}, expected {expected}")]
    SpaceMismatch { model: String, expected: String },
}

fn read_u32(buf: &[u8], pos: &mut usize) -> u32 {
    let v = u32::from_le_bytes(buf[*pos..*pos + 4].try_into().expect("bounds checked"));
    *pos += 4;
    v
}

impl RecModel {
    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        let mut buf = Vec::with_capacity(HEADER_LEN + 4 * self.param_count());
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        for dim in [self.vocab, self.embed_dim, self.hidden, self.classes] {
            let dim = u32::try_from(dim).map_err(|_| {
                ModelIoError::Corrupt(format!("dimension {dim} exceeds file format"))
            })?;
            buf.extend_from_slice(&dim.to_le_bytes());
        }
        if self.space_hash.len() != 64 || !self.space_hash.is_ascii() {
            return Err(ModelIoError::Corrupt(
                "space hash is not 64 hex characters".into(),
            ));
        }
        buf.extend_from_slice(self.space_hash.as_bytes());
        for field in self.t.fields() {
            for &v in field {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RecModel, ModelIoError> {
        let buf = std::fs::read(path)?;
        if buf.len() < HEADER_LEN {
            return Err(ModelIoError::Corrupt("shorter than header".into()));
        }
        if buf[..4] != MAGIC {
            return Err(ModelIoError::BadMagic);
        }
        let mut pos = 4;
        let version = read_u32(&buf, &mut pos);
        if version != VERSION {
            return Err(ModelIoError::BadVersion(version));
        }
        let vocab = read_u32(&buf, &mut pos) as usize;
        let embed_dim = read_u32(&buf, &mut pos) as usize;
        let hidden = read_u32(&buf, &mut pos) as usize;
        let classes = read_u32(&buf, &mut pos) as usize;
        if vocab == 0 || embed_dim == 0 || hidden == 0 || classes == 0 {
            return Err(ModelIoError::Corrupt("zero-sized dimension".into()));
        }
        let space_hash = String::from_utf8(buf[pos..pos + 64].to_vec())
            .ok()
            .filter(|h| h.bytes().all(|b| b.is_ascii_hexdigit()))
            .ok_or_else(|| ModelIoError::Corrupt("space hash is not hex".into()))?;
        pos += 64;

        let s = Shape {
            vocab,
            d: embed_dim,
            hidden,
            classes,
        };
        let expected = HEADER_LEN + 4 * s.param_count();
        if buf.len() != expected {
            return Err(ModelIoError::Corrupt(format!(
                "file is {} bytes, header implies {expected}",
                buf.len()
            )));
        }
        let mut t: Tensors<f32> = Tensors::zeros(&s);
        for field in t.fields_mut() {
            for v in field.iter_mut() {
                *v = f32::from_le_bytes(buf[pos..pos + 4].try_into().expect("length checked"));
                pos += 4;
            }
        }
        debug_assert_eq!(pos, expected);
        Ok(RecModel {
            vocab,
            embed_dim,
            hidden,
            classes,
            space_hash,
            t,
        })
    }

    /// Loads and verifies the model actually recommends over `space`.
    pub fn load_for_space(path: &Path, space: &ConfigSpace) -> Result<RecModel, ModelIoError> {
        let model = RecModel::load(path)?;
        if model.space_hash() != space.space_hash() {
            return Err(ModelIoError::SpaceMismatch {
                model: model.space_hash.clone(),
                expected: space.space_hash(),
            });
        }
        if model.classes() != space.len() {
            return Err(ModelIoError::Corrupt(format!(
                "class count {} does not match space size {}",
                model.classes(),
                space.len()
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{enumerate_configs, ArrayGeometry, GemmWorkload};
    use crate::rng::Xoshiro256StarStar;

    fn model_for(space_hash: String, classes: usize) -> RecModel {
        let mut rng = Xoshiro256StarStar::seed_from_u64(9);
        RecModel::init(30, 6, 12, classes, space_hash, &mut rng)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let space = enumerate_configs(ArrayGeometry::new(16, 16, 4).unwrap());
        let model = model_for(space.space_hash(), space.len());
        model.save(&path).unwrap();

        let back = RecModel::load(&path).unwrap();
        assert_eq!(back.t, model.t);
        assert_eq!(back.vocab(), model.vocab());
        assert_eq!(back.space_hash(), model.space_hash());
        for m in 1..20 {
            let w = GemmWorkload::new(m, 29 - m, m * 3).unwrap();
            assert_eq!(back.predict(&w), model.predict(&w));
            assert_eq!(back.class_probs(&w), model.class_probs(&w));
        }

        assert!(RecModel::load_for_space(&path, &space).is_ok());
    }

    #[test]
    fn loader_rejects_damage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let space = enumerate_configs(ArrayGeometry::new(16, 16, 4).unwrap());
        let model = model_for(space.space_hash(), space.len());
        model.save(&path).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(RecModel::load(&path), Err(ModelIoError::BadMagic)));

        let mut bad = good.clone();
        bad[4] = 9;
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(
            RecModel::load(&path),
            Err(ModelIoError::BadVersion(9))
        ));

        std::fs::write(&path, &good[..good.len() - 5]).unwrap();
        assert!(matches!(RecModel::load(&path), Err(ModelIoError::Corrupt(_))));

        let mut bad = good.clone();
        bad.push(0);
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(RecModel::load(&path), Err(ModelIoError::Corrupt(_))));

        // Hash bytes must stay hex.
        let mut bad = good.clone();
        bad[24] = b'z';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(RecModel::load(&path), Err(ModelIoError::Corrupt(_))));
    }

    #[test]
    fn space_binding_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let trained = enumerate_configs(ArrayGeometry::new(16, 16, 4).unwrap());
        model_for(trained.space_hash(), trained.len())
            .save(&path)
            .unwrap();

        let other = enumerate_configs(ArrayGeometry::new(8, 8, 4).unwrap());
        assert!(matches!(
            RecModel::load_for_space(&path, &other),
            Err(ModelIoError::SpaceMismatch { .. })
        ));
    }
}
