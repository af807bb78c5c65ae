//! Achievable rates, the sampled SINR approximation and beam patterns.

use nalgebra::{DMatrix, DVector};

use crate::amm::{sample_angle_range, AmmConfig, AngleRange};
use crate::array_channel::{steering_entries, ChannelRealization, SystemConfig};
use crate::error::{param, Result};
use crate::linalg::inner;
use crate::pwmmse::{AnalogBeamformer, DigitalBeamformer};
use crate::C64;

/// Per-user achievable rates in bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_rates: Vec<f64>,
    pub sum_rate: f64,
}

impl RateReport {
    fn from_rates(per_user_rates: Vec<f64>) -> Self {
        let sum_rate = per_user_rates.iter().sum();
        Self {
            per_user_rates,
            sum_rate,
        }
    }
}

/// Rates for channels `h_k` and precoder columns `F[:, i]` of matching
/// dimension: `R_k = log2(1 + p|h_k^H F_k|² / (p Σ_{i≠k} |h_k^H F_i|² + σ²))`.
pub fn rates_from_effective(channels: &[DVector<C64>], precoder: &DMatrix<C64>, cfg: &SystemConfig) -> RateReport {
    let p = cfg.stream_power();
    let rates = channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let powers: Vec<f64> = precoder.column_iter().map(|col| h.dotc(&col).norm_sqr()).collect();
            let signal = p * powers[k];
            let interference = p * (powers.iter().sum::<f64>() - powers[k]);
            (1.0 + signal / (interference.max(0.0) + cfg.noise_var())).log2()
        })
        .collect();
    RateReport::from_rates(rates)
}

/// Rates of the hybrid beamformer `F_RF F_BB`.
pub fn sum_rate(
    channels: &[ChannelRealization],
    analog: &AnalogBeamformer,
    digital: &DigitalBeamformer,
    cfg: &SystemConfig,
) -> Result<RateReport> {
    if analog.n_bs() != cfg.n_bs() || digital.matrix.nrows() != analog.n_subarrays() {
        return param("beamformer dimensions do not match the system");
    }
    let power = hybrid_power(analog, digital);
    if (power - cfg.k_users() as f64).abs() > 1e-6 {
        log::warn!("hybrid beamformer power {power} differs from K = {}", cfg.k_users());
    }
    let eff = channels
        .iter()
        .map(|h| analog.effective_channel(h.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(rates_from_effective(&eff, &digital.matrix, cfg))
}

/// Rates of an `n_bs × K` precoder applied directly to the raw channels.
pub fn sum_rate_dense(
    channels: &[ChannelRealization],
    precoder: &DMatrix<C64>,
    cfg: &SystemConfig,
) -> Result<RateReport> {
    if precoder.nrows() != cfg.n_bs() || precoder.ncols() != cfg.k_users() {
        return param("precoder must be n_bs x K");
    }
    let hs: Vec<DVector<C64>> = channels.iter().map(|h| h.vector().clone()).collect();
    Ok(rates_from_effective(&hs, precoder, cfg))
}

/// `‖F_RF F_BB‖_F²`.
pub fn hybrid_power(analog: &AnalogBeamformer, digital: &DigitalBeamformer) -> f64 {
    (analog.assemble() * &digital.matrix).norm_squared()
}

/// Sampled SINR of user `q` (0-based) for an analog-only beamformer
/// (`F_BB = I`): desired power through subarray `q` and interference through
/// every other subarray, each averaged over the `M` samples of `Ω_q`.
pub fn approx_sinr(
    q: usize,
    analog: &AnalogBeamformer,
    ranges: &[AngleRange],
    cfg: &SystemConfig,
    amm: &AmmConfig,
) -> Result<f64> {
    let k = cfg.k_users();
    if ranges.len() != k || analog.n_subarrays() != k || q >= k {
        return param("need one range and one subarray per user");
    }
    let samples = sample_angle_range(&ranges[q], amm.samples_per_range);
    let m = samples.len() as f64;
    let p = cfg.stream_power();
    let mut desired = 0.0;
    let mut interference = 0.0;
    for &phi in &samples {
        for j in 0..k {
            let a = steering_entries(phi, cfg.subarray(j).start, cfg.n_s(), cfg.n_bs());
            let g = inner(&a, analog.vector(j).as_slice()).norm_sqr();
            if j == q {
                desired += g;
            } else {
                interference += g;
            }
        }
    }
    Ok(p * desired / m / (p * interference / m + cfg.noise_var()))
}

/// Floor applied to exact zeros of a pattern before conversion to dB.
pub const PATTERN_FLOOR_DB: f64 = -400.0;

/// Peak-normalized power pattern of one subarray beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    /// AoD sines of the grid.
    pub angles: Vec<f64>,
    pub gains_db: Vec<f64>,
    pub user_index: usize,
}

impl BeamPattern {
    pub fn peak_sine(&self) -> f64 {
        let i = self
            .gains_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.angles[i]
    }
}

/// Unit-norm steering vector local to an `n`-element subarray.
pub fn local_steering(aod_sine: f64, n: usize) -> Vec<C64> {
    steering_entries(aod_sine, 0, n, n)
}

/// `|ã(φ)^H f|²` on `grid_size` evenly spaced sines over `[-1, 1]`, in dB
/// relative to the grid maximum.
pub fn beam_pattern(f: &DVector<C64>, grid_size: usize, user_index: usize) -> Result<BeamPattern> {
    if grid_size < 2 {
        return param("beam pattern grid needs at least two points");
    }
    let n = f.len();
    let step = 2.0 / (grid_size - 1) as f64;
    let angles: Vec<f64> = (0..grid_size)
        .map(|i| {
            if i == grid_size - 1 {
                1.0
            } else {
                -1.0 + step * i as f64
            }
        })
        .collect();
    let gains: Vec<f64> = angles
        .iter()
        .map(|&phi| inner(&local_steering(phi, n), f.as_slice()).norm_sqr())
        .collect();
    let peak = gains.iter().cloned().fold(0.0, f64::max);
    if peak.is_nan() || peak <= 0.0 {
        return param("beam pattern of a zero vector");
    }
    let gains_db = gains
        .iter()
        .map(|&g| (10.0 * (g / peak).log10()).max(PATTERN_FLOOR_DB))
        .collect();
    Ok(BeamPattern {
        angles,
        gains_db,
        user_index,
    })
}

/// Largest pattern gain (dB) at grid points inside `range`; `None` if the grid
/// has no point there.
pub fn nulling_depth(pattern: &BeamPattern, range: &AngleRange) -> Option<f64> {
    pattern
        .angles
        .iter()
        .zip(&pattern.gains_db)
        .filter(|(a, _)| range.contains(**a))
        .map(|(_, g)| *g)
        .max_by(f64::total_cmp)
}
