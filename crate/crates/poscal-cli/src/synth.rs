//! Synthetic classification datasets: Gaussian class blobs and a two-moons
//! variant, with optional label noise to induce miscalibration pressure.

use std::path::Path;

use poscal::{Dataset, Matrix, SplitTag};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    GaussianBlobs,
    NoisyMoonsLike,
}

/// Recipe for a synthetic dataset. The same spec always produces the same
/// dataset, bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub generator: GeneratorKind,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    /// Standard deviation of the noise around each class's clean geometry;
    /// 0 gives perfectly separable data.
    pub overlap: f64,
    /// Probability of flipping each label to a uniformly random other class.
    pub label_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::config("n must be >= 1"));
        }
        if self.p == 0 {
            return Err(CliError::config("p must be >= 1"));
        }
        if self.k < 2 {
            return Err(CliError::config("k must be >= 2"));
        }
        if !(self.overlap.is_finite() && self.overlap >= 0.0) {
            return Err(CliError::config("overlap must be finite and >= 0"));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(CliError::config("label-noise rate must lie in [0, 0.5)"));
        }
        if matches!(self.generator, GeneratorKind::NoisyMoonsLike) {
            if self.k != 2 {
                return Err(CliError::config("the moons generator is binary (k = 2)"));
            }
            if self.p < 2 {
                return Err(CliError::config("the moons generator needs p >= 2"));
            }
        }
        Ok(())
    }
}

/// Class means for the blob generator: evenly spaced on a radius-2 circle in
/// the first two dimensions (a spaced line when p = 1), zero elsewhere.
fn blob_mean(class: usize, k: usize, p: usize) -> Vec<f64> {
    let mut mean = vec![0.0; p];
    if p == 1 {
        mean[0] = 2.0 * class as f64 - (k as f64 - 1.0);
    } else {
        let angle = 2.0 * std::f64::consts::PI * class as f64 / k as f64;
        mean[0] = 2.0 * angle.cos();
        mean[1] = 2.0 * angle.sin();
    }
    mean
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, CliError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Matrix::zeros(spec.n, spec.p);
    let mut labels = Vec::with_capacity(spec.n);

    for i in 0..spec.n {
        let class = i % spec.k;
        labels.push(class);
        let row = features.row_mut(i);
        match spec.generator {
            GeneratorKind::GaussianBlobs => {
                let mean = blob_mean(class, spec.k, spec.p);
                for (d, v) in row.iter_mut().enumerate() {
                    let noise: f64 = rng.sample(StandardNormal);
                    *v = mean[d] + spec.overlap * noise;
                }
            }
            GeneratorKind::NoisyMoonsLike => {
                let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let (x, y) = if class == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                for (d, v) in row.iter_mut().enumerate() {
                    let noise: f64 = rng.sample(StandardNormal);
                    let base = match d {
                        0 => x,
                        1 => y,
                        _ => 0.0,
                    };
                    *v = base + spec.overlap * noise;
                }
            }
        }
    }

    // Label noise as a second pass so the feature stream layout stays simple.
    if spec.label_noise > 0.0 {
        for label in labels.iter_mut() {
            if rng.gen_range(0.0..1.0) < spec.label_noise {
                let shift = rng.gen_range(1..spec.k);
                *label = (*label + shift) % spec.k;
            }
        }
    }

    Ok(Dataset::new(features, labels, spec.k, SplitTag::Train)?)
}

/// Writes a dataset as CSV with columns `f0..f{p-1},label`. Feature values
/// use the shortest representation that parses back to the same float.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)?;
    let p = dataset.num_features();
    let mut header: Vec<String> = (0..p).map(|d| format!("f{d}")).collect();
    header.push("label".to_string());
    writer.write_record(&header)?;
    for i in 0..dataset.num_samples() {
        let mut record: Vec<String> = dataset.features().row(i).iter().map(|v| format!("{v}")).collect();
        record.push(dataset.labels()[i].to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_dataset, DataFormat, Featurizer};

    fn spec(n: usize, overlap: f64, noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            generator: GeneratorKind::GaussianBlobs,
            n,
            p: 3,
            k: 3,
            overlap,
            label_noise: noise,
            seed: 9,
        }
    }

    #[test]
    fn same_seed_same_dataset_bitwise() {
        let a = generate_synthetic(&spec(200, 1.0, 0.2)).unwrap();
        let b = generate_synthetic(&spec(200, 1.0, 0.2)).unwrap();
        assert_eq!(a.features().data(), b.features().data());
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn zero_overlap_collapses_to_the_means() {
        let d = generate_synthetic(&spec(30, 0.0, 0.0)).unwrap();
        for i in 0..30 {
            let mean = blob_mean(d.labels()[i], 3, 3);
            assert_eq!(d.features().row(i), mean.as_slice());
        }
    }

    #[test]
    fn label_noise_flips_roughly_the_requested_fraction() {
        let clean = generate_synthetic(&spec(20_000, 1.0, 0.0)).unwrap();
        let noisy = generate_synthetic(&spec(20_000, 1.0, 0.2)).unwrap();
        let flipped = clean
            .labels()
            .iter()
            .zip(noisy.labels())
            .filter(|(a, b)| a != b)
            .count();
        let rate = flipped as f64 / 20_000.0;
        assert!((rate - 0.2).abs() < 0.02, "flip rate {rate}");
    }

    #[test]
    fn moons_requires_binary() {
        let bad = SyntheticSpec {
            generator: GeneratorKind::NoisyMoonsLike,
            k: 3,
            ..spec(10, 0.1, 0.0)
        };
        assert!(generate_synthetic(&bad).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_matrices() {
        let d = generate_synthetic(&spec(50, 1.3, 0.1)).unwrap();
        let path = tempfile::Builder::new().suffix(".csv").tempfile().unwrap().into_temp_path();
        write_dataset_csv(&d, &path).unwrap();
        let loaded = load_dataset(&path, DataFormat::Csv, "label", &Featurizer::Numeric).unwrap();
        assert_eq!(loaded.dataset.num_samples(), 50);
        assert_eq!(loaded.dataset.features().data(), d.features().data());
        // Labels come back through the name mapping.
        let mapped: Vec<usize> = loaded
            .dataset
            .labels()
            .iter()
            .map(|&y| loaded.label_names[y].parse::<usize>().unwrap())
            .collect();
        assert_eq!(mapped, d.labels());
    }
}
