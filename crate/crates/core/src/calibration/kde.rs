use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::CalibrationError;

/// Smallest kernel bandwidth, used for degenerate samples.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;
/// Density floor that keeps log-likelihoods finite.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Kernel support truncation, in bandwidths.
const KERNEL_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodModel {
    /// Gaussian kernel density estimate of the simulated sample.
    #[default]
    Kde,
    /// Normal distribution with the simulated sample's mean and deviation.
    Gaussian,
}

impl LikelihoodModel {
    /// Sum of log densities of `recorded` under the model fitted to `simulated`.
    pub fn log_likelihood(self, recorded: &[f64], simulated: &[f64]) -> Result<f64, CalibrationError> {
        match self {
            LikelihoodModel::Kde => log_likelihood(recorded, simulated),
            LikelihoodModel::Gaussian => gaussian_log_likelihood(recorded, simulated),
        }
    }
}

fn check(recorded: &[f64], simulated: &[f64]) -> Result<(), CalibrationError> {
    if recorded.is_empty() {
        return Err(CalibrationError::EmptySample("recorded sample is empty".into()));
    }
    if simulated.is_empty() {
        return Err(CalibrationError::EmptySample("simulated sample is empty".into()));
    }
    Ok(())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Gaussian kernel density estimate with Silverman's rule-of-thumb bandwidth.
#[derive(Debug, Clone)]
pub struct Kde {
    sorted: Vec<f64>,
    h: f64,
}

impl Kde {
    pub fn new(sample: &[f64]) -> Result<Self, CalibrationError> {
        if sample.is_empty() {
            return Err(CalibrationError::EmptySample("KDE sample is empty".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let h = silverman_bandwidth(&sorted);
        Ok(Self { sorted, h })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn density(&self, x: f64) -> f64 {
        let reach = KERNEL_CUTOFF * self.h;
        let lo = self.sorted.partition_point(|v| *v < x - reach);
        let hi = self.sorted.partition_point(|v| *v <= x + reach);
        let sum: f64 = self.sorted[lo..hi]
            .iter()
            .map(|v| {
                let z = (x - v) / self.h;
                (-0.5 * z * z).exp()
            })
            .sum();
        sum / (self.sorted.len() as f64 * self.h * (2.0 * PI).sqrt())
    }

    /// Floored log density.
    pub fn log_density(&self, x: f64) -> f64 {
        self.density(x).max(DENSITY_FLOOR).ln()
    }
}

/// `0.9 min(sd, IQR / 1.34) n^(-1/5)`, falling back to whichever spread
/// estimate is non-zero and never below [`BANDWIDTH_FLOOR`].
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let (_, sd) = mean_std(sorted);
    let iqr = if n > 1 {
        quantile(sorted, 0.75) - quantile(sorted, 0.25)
    } else {
        0.0
    };
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 0.0,
    };
    (0.9 * spread * (n as f64).powf(-0.2)).max(BANDWIDTH_FLOOR)
}

/// `sum_i log p(x_i)` over the recorded values, `p` being the KDE of the
/// simulated sample floored at [`DENSITY_FLOOR`].
pub fn log_likelihood(recorded: &[f64], simulated: &[f64]) -> Result<f64, CalibrationError> {
    check(recorded, simulated)?;
    let kde = Kde::new(simulated)?;
    Ok(recorded.iter().map(|x| kde.log_density(*x)).sum())
}

/// As [`log_likelihood`] with a fitted normal density instead of the KDE.
pub fn gaussian_log_likelihood(recorded: &[f64], simulated: &[f64]) -> Result<f64, CalibrationError> {
    check(recorded, simulated)?;
    let (mean, sd) = mean_std(simulated);
    let sd = sd.max(BANDWIDTH_FLOOR);
    let norm = 1.0 / (sd * (2.0 * PI).sqrt());
    Ok(recorded
        .iter()
        .map(|x| {
            let z = (x - mean) / sd;
            (norm * (-0.5 * z * z).exp()).max(DENSITY_FLOOR).ln()
        })
        .sum())
}
