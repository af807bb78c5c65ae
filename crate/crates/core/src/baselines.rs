//! Reference schemes: fully digital WMMSE and sweep-plus-zero-forcing (TSH).

use nalgebra::{DMatrix, DVector};

use crate::amm::{beam_sweep, stream_rng, Codebook, SweepResult};
use crate::array_channel::{complex_gaussian, ChannelRealization, SystemConfig};
use crate::error::{param, Error, Result};
use crate::pwmmse::{normalize_columns, solve_wmmse, AnalogBeamformer, DigitalBeamformer, WmmseConfig, WmmseState};
use crate::C64;

pub const TRAINING_STREAM: u64 = 2;

/// Unconstrained `n_bs × K` precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FullyDigitalBeamformer {
    pub matrix: DMatrix<C64>,
}

impl FullyDigitalBeamformer {
    pub fn power(&self) -> f64 {
        self.matrix.norm_squared()
    }
}

/// WMMSE on the raw channels, initialized with column-normalized matched
/// filtering.
pub fn run_fully_digital(
    channels: &[ChannelRealization],
    cfg: &SystemConfig,
    wcfg: &WmmseConfig,
) -> Result<(FullyDigitalBeamformer, WmmseState)> {
    if channels.len() != cfg.k_users() || channels.iter().any(|h| h.len() != cfg.n_bs()) {
        return param("expected K channels of length n_bs");
    }
    let hs: Vec<DVector<C64>> = channels.iter().map(|h| h.vector().clone()).collect();
    let mut initial = DMatrix::from_columns(&hs);
    normalize_columns(&mut initial);
    let (matrix, state) = solve_wmmse(&hs, initial, cfg, wcfg)?;
    Ok((FullyDigitalBeamformer { matrix }, state))
}

#[derive(Debug, Clone)]
pub struct TshOutput {
    pub analog: AnalogBeamformer,
    pub digital: DigitalBeamformer,
    pub sweep: SweepResult,
    /// Set when the estimated effective channel needed diagonal loading.
    pub regularized: bool,
}

/// Sweep, then zero-forcing on noisy estimates of the effective channels.
pub fn run_tsh(
    channels: &[ChannelRealization],
    codebook: &Codebook,
    cfg: &SystemConfig,
    sweep_snr: f64,
    eff_csi_snr: f64,
    rng_seed: u64,
) -> Result<TshOutput> {
    let sweep = beam_sweep(channels, codebook, cfg, sweep_snr, rng_seed)?;
    run_tsh_with_sweep(channels, sweep, cfg, eff_csi_snr, rng_seed)
}

/// TSH digital stage on top of an existing sweep.
///
/// Each entry of `h̃_k = F_RF^H h_k` is observed with additive `CN(0, v)`
/// noise, `v = mean |h̃_{k,i}|² / eff_csi_snr` (`∞` is perfect training). The
/// precoder is the inverse of the estimated effective channel matrix with
/// unit-norm columns, so `‖F_RF F_BB‖_F² = K`.
pub fn run_tsh_with_sweep(
    channels: &[ChannelRealization],
    sweep: SweepResult,
    cfg: &SystemConfig,
    eff_csi_snr: f64,
    rng_seed: u64,
) -> Result<TshOutput> {
    if eff_csi_snr.is_nan() || eff_csi_snr <= 0.0 {
        return param("effective-channel SNR must be positive");
    }
    let k = cfg.k_users();
    let analog = AnalogBeamformer::new(sweep.codewords.clone())?;
    let mut rows = DMatrix::<C64>::zeros(k, k);
    for (j, h) in channels.iter().enumerate() {
        let eff = analog.effective_channel(h.as_slice())?;
        rows.row_mut(j).copy_from(&eff.adjoint());
    }
    if eff_csi_snr.is_finite() {
        let mean_power = rows.norm_squared() / (k * k) as f64;
        let var = mean_power / eff_csi_snr;
        let mut rng = stream_rng(rng_seed, TRAINING_STREAM);
        for z in rows.iter_mut() {
            *z += complex_gaussian(&mut rng, var).conj();
        }
    }
    let (mut matrix, regularized) = zero_forcing(&rows)?;
    normalize_columns(&mut matrix);
    if matrix.column_iter().any(|c| c.norm() == 0.0) {
        return Err(Error::Numerical("zero-forcing produced a zero column".into()));
    }
    Ok(TshOutput {
        analog,
        digital: DigitalBeamformer { matrix },
        sweep,
        regularized,
    })
}

/// `H^H (H H^H)^{-1}` for the `K × K` matrix `H` whose rows are `h̃_k^H`,
/// falling back to diagonal loading `1e-8 · tr(H H^H)/K` when `H` is
/// numerically rank deficient.
fn zero_forcing(rows: &DMatrix<C64>) -> Result<(DMatrix<C64>, bool)> {
    let k = rows.nrows();
    let svals = rows.clone().singular_values();
    let max = svals.max();
    let min = svals.min();
    if max > 0.0 && min > max * 1e-10 {
        if let Some(inv) = rows.clone().try_inverse() {
            if inv.iter().all(|z| z.is_finite()) {
                return Ok((inv, false));
            }
        }
    }
    let gram = rows * rows.adjoint();
    let trace = gram.trace().re;
    if trace.is_nan() || trace <= 0.0 {
        return Err(Error::Numerical("effective channel matrix is zero".into()));
    }
    log::warn!("zero-forcing: rank-deficient effective channel, applying diagonal loading");
    let loaded = gram + DMatrix::<C64>::identity(k, k) * C64::new(1e-8 * trace / k as f64, 0.0);
    let inv = loaded
        .try_inverse()
        .ok_or_else(|| Error::Numerical("loaded Gram matrix is singular".into()))?;
    Ok((rows.adjoint() * inv, true))
}
