use std::io::{Cursor, Read, Write};
use std::path::Path;

use colsod_core::{LossBreakdown, Model, ParamStore};

use crate::config::RunConfig;
use crate::error::{file, HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"COLSODCK";
pub const FORMAT_VERSION: u32 = 1;

/// Trained state plus everything needed to rebuild the model around it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed SGD steps.
    pub step: usize,
    /// Loss breakdown of every step so far.
    pub history: Vec<LossBreakdown>,
    pub params: ParamStore,
}

fn bad(path: &Path, reason: impl Into<String>) -> HarnessError {
    HarnessError::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn u64_of(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

impl Checkpoint {
    /// Layout, little endian: magic, `u32` version, config TOML (`u64`
    /// length and bytes), epoch, step, history (`u64` count, then five `f64`
    /// per step), then the parameter store.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let cfg = self.config.to_toml();
        out.write_all(&(cfg.len() as u64).to_le_bytes())?;
        out.write_all(cfg.as_bytes())?;
        out.write_all(&(self.epoch as u64).to_le_bytes())?;
        out.write_all(&(self.step as u64).to_le_bytes())?;
        out.write_all(&(self.history.len() as u64).to_le_bytes())?;
        for b in &self.history {
            for (_, v) in b.terms() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        self.params.write_to(&mut out)?;
        Ok(out)
    }

    /// `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let truncated = |_| bad(path, "truncated");
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(bad(path, "not a checkpoint"));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v).map_err(truncated)?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(bad(path, format!("format version {version}, expected {FORMAT_VERSION}")));
        }
        let len = u64_of(&mut r).map_err(truncated)? as usize;
        if len > bytes.len() {
            return Err(bad(path, "truncated"));
        }
        let mut cfg = vec![0u8; len];
        r.read_exact(&mut cfg).map_err(truncated)?;
        let cfg = String::from_utf8(cfg).map_err(|_| bad(path, "config is not UTF-8"))?;
        // The snapshot is authoritative; the environment does not apply.
        let config = RunConfig::parse(&cfg, []).map_err(|e| bad(path, e.to_string()))?;
        let epoch = u64_of(&mut r).map_err(truncated)? as usize;
        let step = u64_of(&mut r).map_err(truncated)? as usize;
        let n = u64_of(&mut r).map_err(truncated)? as usize;
        if n.saturating_mul(40) > bytes.len() {
            return Err(bad(path, "truncated"));
        }
        let mut history = Vec::with_capacity(n);
        for _ in 0..n {
            let mut t = [0.0; 5];
            for v in &mut t {
                *v = f64::from_bits(u64_of(&mut r).map_err(truncated)?);
            }
            history.push(LossBreakdown {
                edge: t[0],
                sal: t[1],
                depth: t[2],
                fin: t[3],
                total: t[4],
            });
        }
        let params = ParamStore::read_from(&mut r).map_err(|e| bad(path, e.to_string()))?;
        if (r.position() as usize) != bytes.len() {
            return Err(bad(path, "trailing bytes"));
        }
        Ok(Self {
            config,
            epoch,
            step,
            history,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(file(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(file(path))?;
        Self::from_bytes(&bytes, path)
    }

    /// Rebuilds the model from the config snapshot and checks that the stored
    /// tensors are exactly the ones it expects. Pretrained weights are not
    /// reloaded: the stored parameters already hold the trained values.
    pub fn model(&self) -> Result<Model> {
        let mut cfg = self.config.model_config()?;
        cfg.backbone.pretrained_weights_path = None;
        let (model, fresh) = Model::new(cfg, self.config.seed)?;
        let layout = |s: &ParamStore| {
            let p: Vec<(String, Vec<usize>)> = s.params().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect();
            let b: Vec<(String, Vec<usize>)> = s.buffers().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect();
            (p, b)
        };
        if layout(&fresh) != layout(&self.params) {
            return Err(HarnessError::Checkpoint {
                path: Default::default(),
                reason: "stored parameters do not match the configured model".into(),
            });
        }
        Ok(model)
    }
}
