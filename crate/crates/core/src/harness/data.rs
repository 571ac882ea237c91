//! Datasets for the MLP experiments: a synthetic Gaussian mixture and the
//! IDX image/label format used by MNIST-style corpora.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::objectives::Dataset;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Class `c` is centered at `±separation · e_{c/2}` (sign alternating with
    /// `c`), with isotropic Gaussian noise of standard deviation `noise`.
    /// Labels cycle through the classes.
    SyntheticGaussianMixture { separation: f64, noise: f64 },
    /// IDX files; pixels are scaled by 1/255 and the first `n` examples used.
    IdxFiles { images: PathBuf, labels: PathBuf },
}

impl DataSource {
    pub fn name(&self) -> &'static str {
        match self {
            DataSource::SyntheticGaussianMixture { .. } => "synthetic_gaussian_mixture",
            DataSource::IdxFiles { .. } => "idx_files",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub source: DataSource,
    pub n: usize,
    pub center: bool,
    /// One-hot targets; otherwise a single target column holding the label.
    pub one_hot: bool,
    pub classes: usize,
    /// Feature count. For IDX files it must equal `rows · cols`.
    pub input_dim: usize,
}

impl DatasetSpec {
    pub fn synthetic(n: usize, classes: usize, input_dim: usize) -> Self {
        DatasetSpec {
            source: DataSource::SyntheticGaussianMixture {
                separation: 1.0,
                noise: 1.0,
            },
            n,
            center: true,
            one_hot: true,
            classes,
            input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        if self.one_hot {
            self.classes
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("data.n", "must be >= 1"));
        }
        if self.classes == 0 {
            return Err(Error::config("data.classes", "must be >= 1"));
        }
        if self.input_dim == 0 {
            return Err(Error::config("data.input_dim", "must be >= 1"));
        }
        if let DataSource::SyntheticGaussianMixture { separation, noise } = self.source {
            if self.input_dim < self.classes.div_ceil(2) {
                return Err(Error::config(
                    "data.input_dim",
                    format!("need at least {} features for {} classes", self.classes.div_ceil(2), self.classes),
                ));
            }
            if !separation.is_finite() || !(noise >= 0.0) || !noise.is_finite() {
                return Err(Error::config("data.noise", "separation and noise must be finite, noise >= 0"));
            }
        }
        Ok(())
    }
}

/// Materializes the dataset described by `spec`.
pub fn load_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset<f64>> {
    spec.validate()?;
    let (mut inputs, labels) = match &spec.source {
        DataSource::SyntheticGaussianMixture { separation, noise } => {
            synthetic_mixture(spec, *separation, *noise, seed)
        }
        DataSource::IdxFiles { images, labels } => read_idx_pair(spec, images, labels)?,
    };
    if spec.center {
        center_columns(&mut inputs, spec.input_dim);
    }
    let q = spec.output_dim();
    let mut targets = vec![0.0; labels.len() * q];
    for (i, &label) in labels.iter().enumerate() {
        if spec.one_hot {
            targets[i * q + label] = 1.0;
        } else {
            targets[i] = label as f64;
        }
    }
    Dataset::new(inputs, targets, spec.input_dim, q)
}

fn synthetic_mixture(spec: &DatasetSpec, separation: f64, noise: f64, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.input_dim;
    let mut inputs = Vec::with_capacity(spec.n * p);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let class = i % spec.classes;
        let axis = class / 2;
        let sign = if class % 2 == 0 { 1.0 } else { -1.0 };
        for j in 0..p {
            let mean = if j == axis { sign * separation } else { 0.0 };
            let z: f64 = rng.sample(StandardNormal);
            inputs.push(mean + noise * z);
        }
        labels.push(class);
    }
    (inputs, labels)
}

/// Subtracts each column's mean, using a compensated second pass so the
/// residual mean is at rounding level.
pub fn center_columns(inputs: &mut [f64], width: usize) {
    let n = inputs.len() / width;
    if n == 0 {
        return;
    }
    for _ in 0..2 {
        for j in 0..width {
            let mean = (0..n).map(|i| inputs[i * width + j]).sum::<f64>() / n as f64;
            for i in 0..n {
                inputs[i * width + j] -= mean;
            }
        }
    }
}

struct IdxFile {
    dims: Vec<usize>,
    data: Vec<u8>,
}

fn parse_idx(bytes: &[u8], expected_magic: u32, what: &str) -> Result<IdxFile> {
    if bytes.len() < 4 {
        return Err(Error::Dataset(format!("{what}: truncated header")));
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    if magic != expected_magic {
        return Err(Error::Dataset(format!(
            "{what}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )));
    }
    let ndims = (magic & 0xff) as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::Dataset(format!("{what}: truncated header")));
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize)
        .collect();
    let len: usize = dims.iter().product();
    if bytes.len() < header + len {
        return Err(Error::Dataset(format!(
            "{what}: truncated body ({} of {} bytes)",
            bytes.len() - header,
            len
        )));
    }
    Ok(IdxFile {
        dims,
        data: bytes[header..header + len].to_vec(),
    })
}

fn read_idx_pair(spec: &DatasetSpec, images: &Path, labels: &Path) -> Result<(Vec<f64>, Vec<usize>)> {
    let img = parse_idx(&fs::read(images)?, IDX_IMAGES_MAGIC, "images")?;
    let lab = parse_idx(&fs::read(labels)?, IDX_LABELS_MAGIC, "labels")?;
    let count = img.dims[0];
    if lab.dims[0] != count {
        return Err(Error::Dataset(format!(
            "label count {} does not match image count {}",
            lab.dims[0], count
        )));
    }
    let pixels = img.dims[1] * img.dims[2];
    if pixels != spec.input_dim {
        return Err(Error::Dataset(format!(
            "images have {pixels} pixels but input_dim is {}",
            spec.input_dim
        )));
    }
    if spec.n > count {
        return Err(Error::Dataset(format!("requested {} examples, file has {count}", spec.n)));
    }
    let labels: Vec<usize> = lab.data[..spec.n].iter().map(|&l| l as usize).collect();
    if let Some(bad) = labels.iter().find(|&&l| l >= spec.classes) {
        return Err(Error::Dataset(format!(
            "label {bad} out of range for {} classes",
            spec.classes
        )));
    }
    let inputs = img.data[..spec.n * pixels]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Ok((inputs, labels))
}

/// Writes an IDX image file (`n × rows × cols` unsigned bytes).
pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let n = pixels.len() / (rows * cols);
    let mut out = IDX_IMAGES_MAGIC.to_be_bytes().to_vec();
    for d in [n, rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

/// Writes an IDX label file.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out)?;
    Ok(())
}
