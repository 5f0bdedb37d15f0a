use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{param_name, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::layers::Pointwise;
use crate::tensor::{read_exact_at, RealTensor4, TENSOR_HEADER_LEN};

/// A learnable tensor and its SGD momentum buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: RealTensor4,
    pub momentum: RealTensor4,
}

impl Param {
    pub fn new(value: RealTensor4) -> Self {
        let momentum = RealTensor4::zeros(value.shape());
        Param { value, momentum }
    }
}

/// Parameters keyed by `L{layer:02}.{name}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Param>,
}

pub type ParamGrads = BTreeMap<String, RealTensor4>;

pub const PARAM_MAGIC: &[u8; 4] = b"SCLP";
pub const PARAM_VERSION: u32 = 1;

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// He-style uniform initialization, deterministic in `seed`.
    ///
    /// Weights are drawn from `U(-b, b)` with `b = gain·sqrt(3 / fan_in)`;
    /// `gain` is `sqrt 2` in front of a relu and 1 otherwise. Spectral pools
    /// between two learnable layers multiply smooth signals by the area
    /// ratio of the crop, so that ratio is divided out of the next layer's
    /// bound. Biases start at zero.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let shapes = spec.infer_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut pool_gain = 1.0;
        let mut prev_hw = (spec.input_shape.h, spec.input_shape.w);
        for (i, layer) in spec.layers.iter().enumerate() {
            let out = shapes[i].shape;
            if let LayerSpec::SpectralPool { out_h, out_w } = *layer {
                pool_gain *= (prev_hw.0 * prev_hw.1) as f64 / (out_h * out_w) as f64;
            }
            prev_hw = (out.h, out.w);
            if !layer.is_learnable() {
                continue;
            }
            let followed_by_relu = matches!(spec.layers.get(i + 1), Some(LayerSpec::Pointwise(Pointwise::Relu)));
            let gain = if followed_by_relu { 2f64.sqrt() } else { 1.0 } / pool_gain;
            pool_gain = 1.0;
            for (name, shape) in layer.param_shapes() {
                let value = if name == "bias" {
                    RealTensor4::zeros(shape)
                } else {
                    let fan_in = shape.c * shape.h * shape.w;
                    let bound = gain * (3.0 / fan_in as f64).sqrt();
                    RealTensor4::from_fn(shape, |_, _, _, _| rng.gen_range(-bound..bound))
                };
                store.insert(param_name(i, name), Param::new(value));
            }
        }
        Ok(store)
    }

    pub fn insert(&mut self, name: String, param: Param) {
        self.entries.insert(name, param);
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.entries.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Result<&RealTensor4> {
        self.entries
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::State(format!("missing parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every learnable layer of `spec` has exactly its tensors, with
    /// matching shapes, and nothing else is stored.
    pub fn check_against(&self, spec: &NetworkSpec) -> Result<()> {
        let mut expected = 0;
        for (i, layer) in spec.layers.iter().enumerate() {
            for (name, shape) in layer.param_shapes() {
                expected += 1;
                let key = param_name(i, name);
                let p = self
                    .entries
                    .get(&key)
                    .ok_or_else(|| Error::State(format!("{}: missing parameter {key}", spec.name)))?;
                if p.value.shape() != shape || p.momentum.shape() != shape {
                    return Err(Error::shape("ParamStore::check_against", shape, p.value.shape()));
                }
            }
        }
        if expected != self.entries.len() {
            return Err(Error::State(format!(
                "{}: store holds {} tensors, spec needs {expected}",
                spec.name,
                self.entries.len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(PARAM_MAGIC);
        buf.extend_from_slice(&PARAM_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, p) in &self.entries {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            p.value.write_to(&mut buf).expect("vec write");
            p.momentum.write_to(&mut buf).expect("vec write");
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    /// CRC32 of the serialized store (excluding the trailer itself).
    pub fn checksum(&self) -> u32 {
        let bytes = self.to_bytes();
        u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::format(0, "file too short for a parameter store"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(Error::format(
                body.len() as u64,
                format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}"),
            ));
        }
        let mut cur = body;
        let mut offset = 0u64;
        let word = |cur: &mut &[u8], offset: &mut u64| -> Result<u32> {
            let mut b = [0u8; 4];
            read_exact_at(cur, &mut b, *offset)?;
            *offset += 4;
            Ok(u32::from_le_bytes(b))
        };
        let mut magic = [0u8; 4];
        read_exact_at(&mut cur, &mut magic, 0)?;
        offset += 4;
        if &magic != PARAM_MAGIC {
            return Err(Error::format(0, "bad parameter-store magic"));
        }
        let version = word(&mut cur, &mut offset)?;
        if version != PARAM_VERSION {
            return Err(Error::format(
                4,
                format!("unsupported parameter-store version {version}"),
            ));
        }
        let count = word(&mut cur, &mut offset)?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let name_len = word(&mut cur, &mut offset)? as usize;
            let mut name = vec![0u8; name_len];
            read_exact_at(&mut cur, &mut name, offset)?;
            let name = String::from_utf8(name).map_err(|_| Error::format(offset, "parameter name is not utf-8"))?;
            offset += name_len as u64;
            let value = RealTensor4::read_from(&mut cur, offset)?;
            offset += (TENSOR_HEADER_LEN + value.shape().len() * 8) as u64;
            let momentum = RealTensor4::read_from(&mut cur, offset)?;
            offset += (TENSOR_HEADER_LEN + momentum.shape().len() * 8) as u64;
            if momentum.shape() != value.shape() {
                return Err(Error::format(
                    offset,
                    format!("{name}: momentum shape differs from value"),
                ));
            }
            store.insert(name, Param { value, momentum });
        }
        if !cur.is_empty() {
            return Err(Error::format(offset, "trailing bytes after last parameter"));
        }
        Ok(store)
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_params(params: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, params.to_bytes())?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ParamStore> {
    ParamStore::from_bytes(&std::fs::read(path)?)
}

/// Loads a store and checks it against `spec`.
pub fn load_params_for(spec: &NetworkSpec, path: impl AsRef<Path>) -> Result<ParamStore> {
    let store = load_params(path)?;
    store.check_against(spec)?;
    Ok(store)
}

/// Copies the teacher's last dense layer into the student's when their
/// shapes agree.
pub fn copy_backend(
    teacher: &NetworkSpec,
    teacher_params: &ParamStore,
    student: &NetworkSpec,
    student_params: &mut ParamStore,
) -> Result<()> {
    let last_dense = |spec: &NetworkSpec| {
        spec.layers
            .iter()
            .rposition(|l| matches!(l, LayerSpec::Dense { .. }))
            .ok_or_else(|| Error::Config(format!("{} has no dense backend", spec.name)))
    };
    let (ti, si) = (last_dense(teacher)?, last_dense(student)?);
    if teacher.layers[ti] != student.layers[si] {
        return Err(Error::shape("copy_backend", &teacher.layers[ti], &student.layers[si]));
    }
    for name in ["weight", "bias"] {
        let value = teacher_params.value(&param_name(ti, name))?.clone();
        student_params.insert(param_name(si, name), Param::new(value));
    }
    Ok(())
}
