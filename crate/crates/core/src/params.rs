//! Named parameter storage, initialization and (de)serialization.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use colsod_autograd::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

/// Trainable parameters and non-trainable buffers, keyed by module path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    buffers: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn param(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| CoreError::UnknownParam(name.to_string()))
    }

    pub fn param_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| CoreError::UnknownParam(name.to_string()))
    }

    pub fn buffer(&self, name: &str) -> Result<&Tensor> {
        self.buffers
            .get(name)
            .ok_or_else(|| CoreError::UnknownParam(name.to_string()))
    }

    pub fn buffer_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.buffers
            .get_mut(name)
            .ok_or_else(|| CoreError::UnknownParam(name.to_string()))
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.buffers.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Number of trainable scalars.
    pub fn num_params(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }

    pub fn insert_param(&mut self, name: String, value: Tensor) -> Result<()> {
        insert_unique(&mut self.params, name, value)
    }

    pub fn insert_buffer(&mut self, name: String, value: Tensor) -> Result<()> {
        insert_unique(&mut self.buffers, name, value)
    }

    /// Copies every parameter and buffer of `other` whose name starts with
    /// `prefix` into `self`. Returns how many tensors were copied.
    pub fn load_prefixed(&mut self, other: &ParamStore, prefix: &str) -> Result<usize> {
        let mut copied = 0;
        for (mine, theirs) in [
            (&mut self.params, &other.params),
            (&mut self.buffers, &other.buffers),
        ] {
            for (name, value) in theirs.range(prefix.to_string()..) {
                if !name.starts_with(prefix) {
                    break;
                }
                let slot = mine
                    .get_mut(name)
                    .ok_or_else(|| CoreError::UnknownParam(name.clone()))?;
                if slot.shape() != value.shape() {
                    return Err(CoreError::Format(format!(
                        "`{name}` has shape {:?}, expected {:?}",
                        value.shape(),
                        slot.shape()
                    )));
                }
                *slot = value.clone();
                copied += 1;
            }
        }
        Ok(copied)
    }

    /// Little-endian binary layout: for params then buffers, a `u64` count
    /// followed by `(name, rank, dims, f64 data)` records in name order.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for map in [&self.params, &self.buffers] {
            w.write_all(&(map.len() as u64).to_le_bytes())?;
            for (name, t) in map {
                w.write_all(&(name.len() as u64).to_le_bytes())?;
                w.write_all(name.as_bytes())?;
                w.write_all(&(t.shape().len() as u64).to_le_bytes())?;
                for &d in t.shape() {
                    w.write_all(&(d as u64).to_le_bytes())?;
                }
                for v in t.data() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut store = Self::new();
        for is_param in [true, false] {
            let count = read_u64(r)?;
            for _ in 0..count {
                let len = read_len(r, 1 << 16)?;
                let mut name = vec![0u8; len];
                r.read_exact(&mut name)?;
                let name = String::from_utf8(name)
                    .map_err(|_| CoreError::Format("parameter name is not UTF-8".into()))?;
                let rank = read_len(r, 8)?;
                let shape: Vec<usize> = (0..rank)
                    .map(|_| read_len(r, 1 << 30))
                    .collect::<Result<_>>()?;
                let numel: usize = shape.iter().product();
                let mut data = Vec::with_capacity(numel);
                let mut buf = [0u8; 8];
                for _ in 0..numel {
                    r.read_exact(&mut buf)?;
                    data.push(f64::from_le_bytes(buf));
                }
                let t = Tensor::new(&shape, data)?;
                if is_param {
                    store.insert_param(name, t)?;
                } else {
                    store.insert_buffer(name, t)?;
                }
            }
        }
        Ok(store)
    }
}

fn insert_unique(map: &mut BTreeMap<String, Tensor>, name: String, value: Tensor) -> Result<()> {
    if map.contains_key(&name) {
        return Err(CoreError::Config(format!("duplicate parameter `{name}`")));
    }
    map.insert(name, value);
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_len<R: Read>(r: &mut R, max: usize) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v)
        .ok()
        .filter(|&v| v <= max)
        .ok_or_else(|| CoreError::Format(format!("length {v} exceeds {max}")))
}

/// Registers parameters in construction order, drawing initial values from a
/// seeded stream so that a configuration and seed fully determine the model.
pub struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl<'a> Builder<'a> {
    pub fn new(store: &'a mut ParamStore, seed: u64) -> Self {
        Self {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `±1/√fan_in`, the usual default for convolution weights and biases.
    pub fn uniform(&mut self, name: String, shape: &[usize], fan_in: usize) -> Result<()> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let t = Tensor::from_fn(shape, |_| self.rng.gen_range(-bound..bound));
        self.store.insert_param(name, t)
    }

    pub fn constant(&mut self, name: String, shape: &[usize], value: f64) -> Result<()> {
        self.store.insert_param(name, Tensor::full(shape, value))
    }

    pub fn buffer(&mut self, name: String, shape: &[usize], value: f64) -> Result<()> {
        self.store.insert_buffer(name, Tensor::full(shape, value))
    }
}
