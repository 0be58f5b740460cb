use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{ingestion, DataError, Result};

/// Default cache file name inside a split directory.
pub const CACHE_FILE: &str = "manifest.txt";

const CACHE_HEADER: &str = "# colsod manifest v1";
const RGB_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(DataError::Validation(format!("unknown split `{other}`"))),
        }
    }
}

/// Files of one sample, matched by stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub rgb: PathBuf,
    pub depth: Option<PathBuf>,
    pub gt: PathBuf,
}

/// Records of `<root>/<split>/{RGB,depth,GT}`, sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub split: Split,
    pub invert_depth: bool,
    pub records: Vec<Record>,
}

fn stems(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| ingestion(dir, e))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        let stem = path.file_stem().and_then(|s| s.to_str());
        if let (Some(ext), Some(stem)) = (ext, stem) {
            if extensions.contains(&ext.as_str()) {
                if let Some(prev) = out.insert(stem.to_string(), path.clone()) {
                    return Err(ingestion(path, format!("stem clashes with {}", prev.display())));
                }
            }
        }
    }
    Ok(out)
}

impl DatasetManifest {
    pub fn split_dir(root: &Path, split: Split) -> PathBuf {
        root.join(split.to_string())
    }

    /// Lists the split directory. Every RGB file needs a GT file of the same
    /// stem; depth is optional here and enforced by the loader.
    pub fn scan(root: impl AsRef<Path>, split: Split) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let dir = Self::split_dir(&root, split);
        let rgb = stems(&dir.join("RGB"), &RGB_EXTENSIONS)?;
        let gt = stems(&dir.join("GT"), &["png"])?;
        let depth_dir = dir.join("depth");
        let depth = if depth_dir.is_dir() {
            stems(&depth_dir, &["png"])?
        } else {
            BTreeMap::new()
        };
        let mut records = Vec::with_capacity(rgb.len());
        for (id, rgb_path) in rgb {
            let gt_path = gt
                .get(&id)
                .ok_or_else(|| ingestion(&rgb_path, format!("no ground truth `GT/{id}.png`")))?;
            records.push(Record {
                depth: depth.get(&id).cloned(),
                gt: gt_path.clone(),
                rgb: rgb_path,
                id,
            });
        }
        if records.is_empty() {
            return Err(ingestion(dir.join("RGB"), "no images"));
        }
        Ok(Self {
            root,
            split,
            invert_depth: false,
            records,
        })
    }

    /// Reads `cache` when it exists, otherwise scans and writes it.
    pub fn open_cached(root: impl AsRef<Path>, split: Split, cache: impl AsRef<Path>) -> Result<Self> {
        let cache = cache.as_ref();
        if cache.is_file() {
            return Self::read_cache(cache);
        }
        let m = Self::scan(root, split)?;
        m.write_cache(cache)?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Line-oriented cache: a header, three `key\tvalue` lines, then one
    /// `id\trgb\tdepth\tgt` line per record (`-` for missing depth).
    pub fn write_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        out.push_str(CACHE_HEADER);
        out.push('\n');
        out.push_str(&format!("root\t{}\nsplit\t{}\ninvert_depth\t{}\n", self.root.display(), self.split, self.invert_depth));
        for r in &self.records {
            let depth = r.depth.as_ref().map_or("-".to_string(), |p| p.display().to_string());
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.id, r.rgb.display(), depth, r.gt.display()));
        }
        let mut f = fs::File::create(path.as_ref())?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_cache(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ingestion(path, e))?;
        let bad = |line: usize, reason: &str| DataError::Cache {
            path: path.to_path_buf(),
            line: line + 1,
            reason: reason.to_string(),
        };
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&CACHE_HEADER) {
            return Err(bad(0, "missing header"));
        }
        let value = |i: usize, key: &str| -> Result<&str> {
            lines
                .get(i)
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix('\t'))
                .ok_or_else(|| bad(i, &format!("expected `{key}`")))
        };
        let root = PathBuf::from(value(1, "root")?);
        let split = value(2, "split")?.parse()?;
        let invert_depth = value(3, "invert_depth")?.parse().map_err(|_| bad(3, "not a boolean"))?;
        let mut records = Vec::new();
        for (i, line) in lines.iter().enumerate().skip(4) {
            let f: Vec<&str> = line.split('\t').collect();
            let [id, rgb, depth, gt] = f[..] else {
                return Err(bad(i, "expected four tab-separated fields"));
            };
            records.push(Record {
                id: id.to_string(),
                rgb: rgb.into(),
                depth: (depth != "-").then(|| depth.into()),
                gt: gt.into(),
            });
        }
        if !records.windows(2).all(|w| w[0].id < w[1].id) {
            return Err(bad(4, "records are not sorted by id"));
        }
        Ok(Self {
            root,
            split,
            invert_depth,
            records,
        })
    }
}
