//! Text manifests: a `domain=<d> size=<h>x<w>` header, then one sample
//! path per line, relative to the manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{load_sample, RawSample};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Synthetic,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Synthetic => "synthetic",
            Domain::Target => "target",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Domain::Synthetic),
            "target" => Ok(Domain::Target),
            _ => Err(Error::InvalidArgument(format!("unknown domain {s:?} (expected synthetic or target)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub domain: Domain,
    /// `[height, width]` shared by every sample.
    pub size: [usize; 2],
    /// Sample paths relative to `root`.
    pub paths: Vec<PathBuf>,
    /// Directory the manifest lives in.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn sample_path(&self, i: usize) -> PathBuf {
        self.root.join(&self.paths[i])
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("domain={} size={}x{}\n", self.domain, self.size[0], self.size[1]);
        for p in &self.paths {
            s.push_str(&p.to_string_lossy());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, root: &Path, origin: &Path) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(format!("{}: {m}", origin.display()));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty manifest".into()))?;
        let mut domain = None;
        let mut size = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("domain", d)) => domain = Some(d.parse::<Domain>()?),
                Some(("size", s)) => {
                    let (h, w) = s.split_once('x').ok_or_else(|| bad(format!("bad size {s:?}")))?;
                    let dim = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad size {s:?}")));
                    size = Some([dim(h)?, dim(w)?]);
                }
                _ => return Err(bad(format!("unexpected header field {field:?}"))),
            }
        }
        Ok(DatasetManifest {
            domain: domain.ok_or_else(|| bad("header lacks domain=".into()))?,
            size: size.ok_or_else(|| bad("header lacks size=".into()))?,
            paths: lines.map(str::trim).filter(|l| !l.is_empty()).map(PathBuf::from).collect(),
            root: root.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let root = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, root, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// A manifest with every sample loaded and scaled to `[1, 4, h, w]`.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<Tensor<f32>>,
}

impl Dataset {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let samples = (0..manifest.len())
            .map(|i| {
                let path = manifest.sample_path(i);
                let raw = load_sample(&path)?;
                check_sample(&raw, &manifest, &path)?;
                raw.to_tensor()
            })
            .collect::<Result<_>>()?;
        Ok(Dataset { manifest, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `[indices.len(), 4, h, w]` batch.
    pub fn stack(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        let items: Vec<Tensor<f32>> = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Tensor::stack(&items)
    }
}

fn check_sample(raw: &RawSample, manifest: &DatasetManifest, path: &Path) -> Result<()> {
    if [raw.height, raw.width] != manifest.size {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            detail: format!(
                "sample is {}x{}, manifest says {}x{}",
                raw.height, raw.width, manifest.size[0], manifest.size[1]
            ),
        });
    }
    raw.check().map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}
