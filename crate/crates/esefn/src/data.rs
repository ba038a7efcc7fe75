//! Paired-modality samples: synthetic generation, file I/O, and splits.
//!
//! The synthetic task is built so that fusion is *provably* required: the
//! class label combines two latent factors, one encoded only in each
//! modality, so a single-modality classifier cannot beat chance on the
//! factor it never sees.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One of the two input streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Rgb,
    Skeleton,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Rgb => write!(f, "rgb"),
            Modality::Skeleton => write!(f, "skeleton"),
        }
    }
}

/// A paired sample: one feature vector per modality plus a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalFeature {
    pub sample_id: u64,
    pub label: usize,
    pub f_r: Vec<f64>,
    pub f_s: Vec<f64>,
}

/// Configuration of the jointly-separable synthetic dataset.
///
/// Labels are `z_r * factors_s + z_s` for latent factors `z_r` (encoded only
/// in the first modality) and `z_s` (encoded only in the second), so the
/// class count is `factors_r * factors_s`.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub factors_r: usize,
    pub factors_s: usize,
    pub dim_r: usize,
    pub dim_s: usize,
    pub noise_sigma: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// The default task: 2 x 2 latent factors (4 classes), 8-dim features,
    /// noise 0.1, 100 samples per class.
    pub fn xor_pair(seed: u64) -> SynthSpec {
        SynthSpec {
            factors_r: 2,
            factors_s: 2,
            dim_r: 8,
            dim_s: 8,
            noise_sigma: 0.1,
            samples_per_class: 100,
            seed,
        }
    }

    pub fn classes(&self) -> usize {
        self.factors_r * self.factors_s
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors_r < 2 || self.factors_s < 2 {
            return Err(Error::Input(format!(
                "both latent factor counts must be >= 2, got {} and {}",
                self.factors_r, self.factors_s
            )));
        }
        if self.dim_r < self.factors_r || self.dim_s < self.factors_s {
            return Err(Error::Input(format!(
                "feature dims ({}, {}) must cover the factor counts ({}, {})",
                self.dim_r, self.dim_s, self.factors_r, self.factors_s
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Input(format!(
                "noise sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.samples_per_class == 0 {
            return Err(Error::Input("samples_per_class must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Prototype scale: grows with the noise so the minimum prototype
    /// separation stays at least four sigma, and never collapses to zero.
    fn prototype_scale(&self) -> f64 {
        1.0 + 4.0 * self.noise_sigma
    }

    /// Prototype for factor value `z` in a `dim`-dimensional modality: a
    /// scaled one-hot vector.
    pub fn prototype(&self, dim: usize, z: usize) -> Vec<f64> {
        let mut p = vec![0.0; dim];
        p[z] = self.prototype_scale();
        p
    }
}

/// Generates the jointly-separable dataset: class-balanced, deterministic
/// in the seed.
///
/// Modality `r` carries only the first latent factor and modality `s` only
/// the second, as a scaled one-hot prototype plus isotropic Gaussian noise.
pub fn generate_xor_pair(spec: &SynthSpec) -> Result<Vec<MultiModalFeature>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.classes() * spec.samples_per_class);
    let mut sample_id = 0;
    for z_r in 0..spec.factors_r {
        for z_s in 0..spec.factors_s {
            let label = z_r * spec.factors_s + z_s;
            for _ in 0..spec.samples_per_class {
                let f_r = noisy(spec.prototype(spec.dim_r, z_r), spec.noise_sigma, &mut rng);
                let f_s = noisy(spec.prototype(spec.dim_s, z_s), spec.noise_sigma, &mut rng);
                samples.push(MultiModalFeature {
                    sample_id,
                    label,
                    f_r,
                    f_s,
                });
                sample_id += 1;
            }
        }
    }
    Ok(samples)
}

fn noisy<R: Rng>(mut proto: Vec<f64>, sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma > 0.0 {
        for v in &mut proto {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    proto
}

/// Train/test halves of a dataset.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Vec<MultiModalFeature>,
    pub test: Vec<MultiModalFeature>,
}

/// Stratified split: per class, a seeded shuffle sends `test_fraction` of
/// the samples to the test half.
pub fn split_train_test(
    data: &[MultiModalFeature],
    test_fraction: f64,
    seed: u64,
) -> Result<DataSplit> {
    if data.is_empty() {
        return Err(Error::Input("cannot split an empty dataset".to_string()));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Input(format!(
            "test fraction must be in [0, 1), got {test_fraction}"
        )));
    }
    let classes = 1 + data.iter().map(|s| s.label).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = DataSplit {
        train: Vec::new(),
        test: Vec::new(),
    };
    for class in 0..classes {
        let mut members: Vec<&MultiModalFeature> =
            data.iter().filter(|s| s.label == class).collect();
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        for (i, s) in members.into_iter().enumerate() {
            if i < n_test {
                split.test.push(s.clone());
            } else {
                split.train.push(s.clone());
            }
        }
    }
    Ok(split)
}

/// Number of distinct labels, assuming labels are dense `0..k`.
pub fn class_count(data: &[MultiModalFeature]) -> usize {
    data.iter().map(|s| s.label + 1).max().unwrap_or(0)
}

/// Feature dims `(dim_r, dim_s)` of the first sample.
pub fn feature_dims(data: &[MultiModalFeature]) -> Result<(usize, usize)> {
    let first = data
        .first()
        .ok_or_else(|| Error::Input("empty dataset".to_string()))?;
    Ok((first.f_r.len(), first.f_s.len()))
}

/// Writes one modality of `data` as a feature file:
/// a `#esef v1 dim=<D> classes=<K>` header, then one
/// `sample_id,label,x1,...,xD` row per sample. Floats are printed with 17
/// significant digits, enough to round-trip `f64` exactly.
pub fn write_features(path: &Path, data: &[MultiModalFeature], modality: Modality) -> Result<()> {
    let (dim, classes) = match modality {
        Modality::Rgb => (feature_dims(data)?.0, class_count(data)),
        Modality::Skeleton => (feature_dims(data)?.1, class_count(data)),
    };
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "#esef v1 dim={dim} classes={classes}")?;
    for s in data {
        let features = match modality {
            Modality::Rgb => &s.f_r,
            Modality::Skeleton => &s.f_s,
        };
        if features.len() != dim {
            return Err(Error::Input(format!(
                "sample {} has {} features, expected {dim}",
                s.sample_id,
                features.len()
            )));
        }
        write!(w, "{},{}", s.sample_id, s.label)?;
        for v in features {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug)]
struct FeatureFile {
    classes: usize,
    rows: Vec<(u64, usize, Vec<f64>)>,
}

fn read_feature_file(path: &Path) -> Result<FeatureFile> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            detail: "file is empty, expected '#esef v1 dim=<D> classes=<K>' header".to_string(),
        })??;
    let (dim, classes) = parse_header(&header)?;

    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let sample_id: u64 = next_field(&mut fields, line_no, "sample_id")?
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "sample_id is not an unsigned integer"))?;
        let label: usize = next_field(&mut fields, line_no, "label")?
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "label is not an unsigned integer"))?;
        if label >= classes {
            return Err(parse_err(
                line_no,
                &format!("label {label} out of range for {classes} classes"),
            ));
        }
        let mut features = Vec::with_capacity(dim);
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(line_no, &format!("non-numeric feature value {f:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, "feature values must be finite"));
            }
            features.push(v);
        }
        if features.len() != dim {
            return Err(parse_err(
                line_no,
                &format!("row has {} features, header says dim={dim}", features.len()),
            ));
        }
        rows.push((sample_id, label, features));
    }
    Ok(FeatureFile { classes, rows })
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let bad = |detail: &str| parse_err(1, detail);
    let rest = header
        .strip_prefix("#esef v1 ")
        .ok_or_else(|| bad("header must start with '#esef v1 '"))?;
    let mut dim = None;
    let mut classes = None;
    for part in rest.split_whitespace() {
        if let Some(v) = part.strip_prefix("dim=") {
            dim = Some(v.parse().map_err(|_| bad("dim= is not an integer"))?);
        } else if let Some(v) = part.strip_prefix("classes=") {
            classes = Some(v.parse().map_err(|_| bad("classes= is not an integer"))?);
        } else {
            return Err(bad(&format!("unexpected header field {part:?}")));
        }
    }
    match (dim, classes) {
        (Some(d), Some(k)) if d > 0 && k > 0 => Ok((d, k)),
        _ => Err(bad("header needs positive dim= and classes= fields")),
    }
}

fn parse_err(line: usize, detail: &str) -> Error {
    Error::Parse {
        line,
        detail: detail.to_string(),
    }
}

fn next_field<'a>(
    fields: &mut impl Iterator<Item = &'a str>,
    line: usize,
    what: &str,
) -> Result<&'a str> {
    fields
        .next()
        .ok_or_else(|| parse_err(line, &format!("missing {what} field")))
}

/// Reads a pair of per-modality feature files into paired samples.
///
/// The files must list the same sample ids with the same labels in the same
/// order; the first disagreement is reported as a pairing error naming the
/// offending id.
pub fn read_feature_pair(rgb_path: &Path, skel_path: &Path) -> Result<Vec<MultiModalFeature>> {
    let rgb = read_feature_file(rgb_path)?;
    let skel = read_feature_file(skel_path)?;
    if rgb.classes != skel.classes {
        return Err(Error::Pairing {
            detail: format!(
                "modality files disagree on the class count: {} vs {}",
                rgb.classes, skel.classes
            ),
        });
    }
    if rgb.rows.len() != skel.rows.len() {
        return Err(Error::Pairing {
            detail: format!(
                "modality files hold different sample counts: {} vs {}",
                rgb.rows.len(),
                skel.rows.len()
            ),
        });
    }
    let mut out = Vec::with_capacity(rgb.rows.len());
    for ((rid, rlabel, f_r), (sid, slabel, f_s)) in rgb.rows.into_iter().zip(skel.rows) {
        if rid != sid {
            return Err(Error::Pairing {
                detail: format!("sample id {rid} in one modality is paired with {sid} in the other"),
            });
        }
        if rlabel != slabel {
            return Err(Error::Pairing {
                detail: format!("sample id {rid} carries labels {rlabel} and {slabel}"),
            });
        }
        out.push(MultiModalFeature {
            sample_id: rid,
            label: rlabel,
            f_r,
            f_s,
        });
    }
    Ok(out)
}
