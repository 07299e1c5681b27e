//! Toy-problem generators and CSV point-cloud ingestion.

use crate::error::{Error, Result};
use crate::rng::{phase, Seed};
use crate::transport::DiscreteMeasure;
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Write;
use std::path::Path;

/// Two independent Gaussian clouds: means from N(0, I_d), covariances
/// U^T U and V^T V for independent Gaussian matrices U, V, and M i.i.d.
/// atoms each with uniform weights.
pub fn gen_gaussian_pair(d: usize, m: usize, seed: Seed) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if m < 1 {
        return Err(Error::InvalidCount(m, 1));
    }
    let mut rng = seed.phase(phase::PROBLEM);
    let cloud = |rng: &mut rand_chacha::ChaCha12Rng| -> DiscreteMeasure {
        let mean: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        // Row-major factor U; atoms are mean + U^T z so the covariance is U^T U.
        let factor: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
        let atoms: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                (0..d)
                    .map(|c| {
                        mean[c] + (0..d).map(|r| factor[r * d + c] * z[r]).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        DiscreteMeasure::uniform(atoms).expect("nonempty atom list")
    };
    Ok((cloud(&mut rng), cloud(&mut rng)))
}

/// The covariance factor used by [`gen_gaussian_pair`] for the first cloud;
/// exposed for moment tests.
pub fn gaussian_pair_first_covariance(d: usize, seed: Seed) -> Vec<f64> {
    let mut rng = seed.phase(phase::PROBLEM);
    let _mean: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let factor: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                cov[i * d + j] += factor[k * d + i] * factor[k * d + j];
            }
        }
    }
    cov
}

/// Banana-shaped cloud: a standard Gaussian pushed through the map that
/// keeps odd slots and bends each even slot by the previous one,
/// out_{2j+1} = x_{2j+1}, out_{2j+2} = -x_{2j+2} + (x_{2j+1} - 5)^2
/// (1-based slots).
pub fn gen_banana_sample(d: usize, m: usize, seed: Seed) -> Result<DiscreteMeasure> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::InvalidDimension(d));
    }
    if m < 1 {
        return Err(Error::InvalidCount(m, 1));
    }
    let mut rng = seed.phase(phase::PROBLEM);
    let atoms: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            banana_map(&x)
        })
        .collect();
    DiscreteMeasure::uniform(atoms)
}

/// The banana push-forward map itself.
pub fn banana_map(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for k in (0..x.len()).step_by(2) {
        out[k] = x[k];
        out[k + 1] = -x[k + 1] + (x[k] - 5.0) * (x[k] - 5.0);
    }
    out
}

/// Whether a CSV carries a trailing weight column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightColumn {
    None,
    Trailing,
}

/// A loaded cloud plus ingestion notes.
#[derive(Debug)]
pub struct LoadedCloud {
    pub measure: DiscreteMeasure,
    /// The weight column did not sum to 1 within 1e-6 and was renormalized.
    pub renormalized: bool,
}

/// Read a point cloud from CSV: one row per atom, d numeric columns,
/// optionally followed by a weight column.
pub fn load_point_cloud(path: &Path, weights: WeightColumn) -> Result<LoadedCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut atoms: Vec<Vec<f64>> = Vec::new();
    let mut weight_values: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: format!("ragged row: {} fields, expected {w}", fields.len()),
                })
            }
            _ => {}
        }
        match weights {
            WeightColumn::None => atoms.push(fields),
            WeightColumn::Trailing => {
                let (coords, w) = fields.split_at(fields.len() - 1);
                if w[0] < 0.0 {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: idx + 1,
                        message: format!("negative weight {}", w[0]),
                    });
                }
                weight_values.push(w[0]);
                atoms.push(coords.to_vec());
            }
        }
    }
    if atoms.is_empty() {
        return Err(Error::Empty);
    }
    match weights {
        WeightColumn::None => Ok(LoadedCloud {
            measure: DiscreteMeasure::uniform(atoms)?,
            renormalized: false,
        }),
        WeightColumn::Trailing => {
            let sum: f64 = weight_values.iter().sum();
            let renormalized = (sum - 1.0).abs() > 1e-6;
            let measure = DiscreteMeasure::with_normalized_weights(atoms, weight_values)?;
            Ok(LoadedCloud {
                measure,
                renormalized,
            })
        }
    }
}

/// Write a point cloud as CSV with 17 significant digits, so that a
/// save/load round trip is value-exact.
pub fn save_point_cloud(m: &DiscreteMeasure, path: &Path, weights: WeightColumn) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(file);
    for i in 0..m.len() {
        let mut fields: Vec<String> = m.atom(i).iter().map(|c| format!("{c:.16e}")).collect();
        if weights == WeightColumn::Trailing {
            fields.push(format!("{:.16e}", m.weights()[i]));
        }
        writeln!(out, "{}", fields.join(","))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
