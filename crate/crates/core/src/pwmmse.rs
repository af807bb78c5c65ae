//! Hybrid beamforming with perfect CSI: a phase-aligned analog stage followed
//! by a WMMSE digital stage.
//!
//! The analog vector of RF chain `k` copies the phases of user `k`'s channel on
//! subarray `S_k`, which makes `f_k^H h_{k,S_k} = Σ_{t∈S_k} |h_{k,t}| / √n_s`.
//! The digital stage then works on the `K`-dimensional effective channels
//! `h̃_k = F_RF^H h_k`.
//!
//! # Digital stage
//!
//! With per-stream power `p = P/K`, `a_ki = h̃_k^H F[:, i]` and receiver `u_k`,
//! the MSE of user `k` is
//!
//! ```text
//! e_k = p |1 - u_k a_kk|² + p Σ_{i≠k} |u_k a_ki|² + σ² |u_k|²
//! ```
//!
//! Setting `∂e_k/∂u_k* = 0` gives `u_k = p a_kk* / (p Σ_i |a_ki|² + σ²)`, and at
//! that point `p / e_k = 1 + SINR_k`, so `Σ_k (w_k e_k - ln w_k)` with
//! `w_k = 1/e_k` is `Σ_k (1 - ln(1 + SINR_k)) + const`.
//!
//! For fixed `u`, `w`, the `F` part of `Σ_k w_k e_k` is the convex quadratic
//! `p Σ_i F[:,i]^H A F[:,i] - 2p Re Σ_k w_k u_k a_kk` with
//! `A = Σ_k w_k |u_k|² h̃_k h̃_k^H`. Its minimizer over `‖F‖_F² ≤ K` is
//!
//! ```text
//! F[:, k] = w_k u_k* (A + μ' I)^{-1} h̃_k
//! ```
//!
//! where `μ' ≥ 0` is the scaled multiplier of the power constraint. Writing
//! `A = G G^H` with `G[:, k] = √(w_k |u_k|²) h̃_k`, the push-through identity
//! `(G G^H + μ' I)^{-1} G = G (G^H G + μ' I)^{-1}` reduces every solve to the
//! `K × K` Gram matrix, whose eigenbasis makes `‖F(μ')‖_F²` an explicit
//! decreasing function of `μ'`. The same machinery drives the fully digital
//! baseline, where `h̃_k` is replaced by the raw `h_k`.
//!
//! Each of the three block updates is an exact minimizer, so the natural-log
//! objective never increases. The literal update rules (receiver without the
//! desired-signal term and `p` scaling, precoder with `u_k` instead of `u_k*`)
//! are available as [`UpdateVariant::Literal`] for comparison; they carry no
//! descent guarantee and report the `log2` objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array_channel::{ChannelRealization, SystemConfig};
use crate::error::{param, Error, Result};
use crate::linalg::{gram_eigen, inner, phase, phasor};
use crate::metrics::{rates_from_effective, RateReport};
use crate::C64;

/// Block-diagonal analog beamformer, one constant-modulus vector per subarray.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogBeamformer {
    n_s: usize,
    subarray_vectors: Vec<DVector<C64>>,
}

impl AnalogBeamformer {
    pub fn new(subarray_vectors: Vec<DVector<C64>>) -> Result<Self> {
        let Some(first) = subarray_vectors.first() else {
            return param("analog beamformer needs at least one subarray");
        };
        let n_s = first.len();
        if n_s == 0 || subarray_vectors.iter().any(|f| f.len() != n_s) {
            return param("subarray vectors must share a positive length");
        }
        Ok(Self { n_s, subarray_vectors })
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_subarrays(&self) -> usize {
        self.subarray_vectors.len()
    }

    pub fn n_bs(&self) -> usize {
        self.n_s * self.n_subarrays()
    }

    pub fn vectors(&self) -> &[DVector<C64>] {
        &self.subarray_vectors
    }

    pub fn vector(&self, q: usize) -> &DVector<C64> {
        &self.subarray_vectors[q]
    }

    /// Dense `n_bs × K` view of `F_RF`.
    pub fn assemble(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n_bs(), self.n_subarrays());
        for (q, f) in self.subarray_vectors.iter().enumerate() {
            m.view_mut((q * self.n_s, q), (self.n_s, 1)).copy_from(f);
        }
        m
    }

    /// Largest deviation of any entry modulus from `1/√n_s`.
    pub fn modulus_error(&self) -> f64 {
        let target = 1.0 / (self.n_s as f64).sqrt();
        self.subarray_vectors
            .iter()
            .flat_map(|f| f.iter())
            .map(|z| (z.norm() - target).abs())
            .fold(0.0, f64::max)
    }

    /// `F_RF^H h`.
    pub fn effective_channel(&self, h: &[C64]) -> Result<DVector<C64>> {
        if h.len() != self.n_bs() {
            return param(format!(
                "channel length {} does not match {} antennas",
                h.len(),
                self.n_bs()
            ));
        }
        Ok(DVector::from_iterator(
            self.n_subarrays(),
            self.subarray_vectors
                .iter()
                .enumerate()
                .map(|(q, f)| inner(f.as_slice(), &h[q * self.n_s..(q + 1) * self.n_s])),
        ))
    }
}

/// `K × K` baseband precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalBeamformer {
    pub matrix: DMatrix<C64>,
}

impl DigitalBeamformer {
    pub fn identity(k: usize) -> Self {
        Self {
            matrix: DMatrix::identity(k, k),
        }
    }

    pub fn frobenius_power(&self) -> f64 {
        self.matrix.norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateVariant {
    /// Exact block minimizers of the MSE objective (monotone descent).
    #[default]
    DerivedOptimal,
    /// Receiver without the desired-signal term and `p` scaling, precoder
    /// with `u_k`; no descent guarantee.
    Literal,
}

impl std::str::FromStr for UpdateVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived-optimal" => Ok(Self::DerivedOptimal),
            "literal" => Ok(Self::Literal),
            other => Err(Error::Parameter(format!("unknown update variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WmmseConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub variant: UpdateVariant,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            rel_tol: 1e-4,
            variant: UpdateVariant::DerivedOptimal,
        }
    }
}

impl WmmseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return param("max_iters must be at least 1");
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return param("rel_tol must be positive");
        }
        Ok(())
    }
}

/// Auxiliary variables of the alternating optimization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WmmseState {
    pub receivers: Vec<C64>,
    pub weights: Vec<f64>,
    pub errors: Vec<f64>,
    pub multiplier: f64,
    /// Objective after each completed iteration.
    pub objective_trace: Vec<f64>,
    /// Sum-rate of the (unscaled) iterate after each completed iteration.
    pub sum_rate_trace: Vec<f64>,
}

impl WmmseState {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len()
    }
}

/// Phase-aligned analog beamformer: `[f_k]_n = e^{j∠h_{k,t}} / √n_s` for `t ∈ S_k`.
pub fn phase_align_analog(channels: &[ChannelRealization], cfg: &SystemConfig) -> Result<AnalogBeamformer> {
    check_channels(channels, cfg)?;
    let amp = 1.0 / (cfg.n_s() as f64).sqrt();
    let vectors = channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            DVector::from_iterator(
                cfg.n_s(),
                h.as_slice()[cfg.subarray(k)].iter().map(|&z| phasor(phase(z)) * amp),
            )
        })
        .collect();
    AnalogBeamformer::new(vectors)
}

fn check_channels(channels: &[ChannelRealization], cfg: &SystemConfig) -> Result<()> {
    if channels.len() != cfg.k_users() {
        return param(format!(
            "expected {} user channels, got {}",
            cfg.k_users(),
            channels.len()
        ));
    }
    if channels.iter().any(|h| h.len() != cfg.n_bs()) {
        return param("channel length does not match n_bs");
    }
    Ok(())
}

/// `h̃_k = F_RF^H h_k` for every user.
pub fn effective_channels(analog: &AnalogBeamformer, channels: &[ChannelRealization]) -> Result<Vec<DVector<C64>>> {
    channels
        .iter()
        .map(|h| analog.effective_channel(h.as_slice()))
        .collect()
}

/// `a_ki = h_k^H F[:, i]` for all streams `i`.
fn stream_gains(h: &DVector<C64>, precoder: &DMatrix<C64>) -> Vec<C64> {
    (0..precoder.ncols()).map(|i| h.dotc(&precoder.column(i))).collect()
}

/// Receiver update for every user.
pub fn update_receivers(
    channels: &[DVector<C64>],
    precoder: &DMatrix<C64>,
    cfg: &SystemConfig,
    variant: UpdateVariant,
) -> Vec<C64> {
    let p = cfg.stream_power();
    let noise = cfg.noise_var();
    channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let gains = stream_gains(h, precoder);
            let desired = gains[k];
            let total: f64 = gains.iter().map(|g| g.norm_sqr()).sum();
            match variant {
                UpdateVariant::DerivedOptimal => desired.conj() * p / (p * total + noise),
                UpdateVariant::Literal => desired / (total - desired.norm_sqr() + noise),
            }
        })
        .collect()
}

/// MSE `e_k` of user `k` for receiver `u`.
pub fn mse(u: C64, channel: &DVector<C64>, precoder: &DMatrix<C64>, k: usize, cfg: &SystemConfig) -> f64 {
    let p = cfg.stream_power();
    let one = C64::new(1.0, 0.0);
    stream_gains(channel, precoder)
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            if i == k {
                p * (one - u * g).norm_sqr()
            } else {
                p * (u * g).norm_sqr()
            }
        })
        .sum::<f64>()
        + cfg.noise_var() * u.norm_sqr()
}

/// `w_k = 1 / e_k`.
pub fn update_weights(errors: &[f64]) -> Result<Vec<f64>> {
    errors
        .iter()
        .enumerate()
        .map(|(user, &e)| {
            if e > 0.0 && e.is_finite() {
                Ok(1.0 / e)
            } else {
                Err(Error::DegenerateError { user })
            }
        })
        .collect()
}

/// Weighted-MSE objective `Σ_k (w_k e_k - log w_k)`, natural log for the
/// derived variant and base 2 for the literal one.
pub fn objective(weights: &[f64], errors: &[f64], variant: UpdateVariant) -> f64 {
    weights
        .iter()
        .zip(errors)
        .map(|(&w, &e)| {
            let log = match variant {
                UpdateVariant::DerivedOptimal => w.ln(),
                UpdateVariant::Literal => w.log2(),
            };
            w * e - log
        })
        .sum()
}

/// Result of a precoder update.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderUpdate {
    pub matrix: DMatrix<C64>,
    pub multiplier: f64,
}

/// The closed-form precoder family `F(μ)` in the Gram eigenbasis.
struct PrecoderFamily {
    /// `G V`, columns restricted to the retained eigenvalues.
    basis: DMatrix<C64>,
    eigenvalues: Vec<f64>,
    /// Rows of `V^H D` matching `eigenvalues`.
    coeffs: DMatrix<C64>,
    row_energy: Vec<f64>,
}

impl PrecoderFamily {
    fn new(channels: &[DVector<C64>], receivers: &[C64], weights: &[f64], variant: UpdateVariant) -> Result<Self> {
        let k = channels.len();
        if receivers.len() != k || weights.len() != k {
            return param("receivers and weights must have one entry per user");
        }
        let dim = channels[0].len();
        let mut g = DMatrix::zeros(dim, k);
        let mut d = DMatrix::zeros(k, k);
        for j in 0..k {
            let c = weights[j] * receivers[j].norm_sqr();
            if c > 0.0 {
                let root = c.sqrt();
                g.column_mut(j).copy_from(&(&channels[j] * C64::new(root, 0.0)));
                let scale = match variant {
                    UpdateVariant::DerivedOptimal => receivers[j].conj(),
                    UpdateVariant::Literal => receivers[j],
                } * weights[j];
                d[(j, j)] = scale / root;
            }
        }
        let gram = g.adjoint() * &g;
        let (values, vectors) = gram_eigen(&gram);
        let max = values.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..k).filter(|&i| values[i] > max * 1e-13 && values[i] > 0.0).collect();
        let v_kept = vectors.select_columns(&keep);
        let basis = &g * &v_kept;
        let coeffs = v_kept.adjoint() * d;
        let row_energy = (0..keep.len()).map(|r| coeffs.row(r).norm_squared()).collect();
        let eigenvalues = keep.iter().map(|&i| values[i]).collect();
        if !basis.iter().all(|z| z.is_finite()) {
            return Err(Error::Numerical("non-finite precoder basis".into()));
        }
        Ok(Self {
            basis,
            eigenvalues,
            coeffs,
            row_energy,
        })
    }

    fn power(&self, mu: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.row_energy)
            .map(|(&l, &e)| l * e / ((l + mu) * (l + mu)))
            .sum()
    }

    fn precoder(&self, mu: f64) -> DMatrix<C64> {
        let mut scaled = self.coeffs.clone();
        for (r, &l) in self.eigenvalues.iter().enumerate() {
            scaled.row_mut(r).scale_mut(1.0 / (l + mu));
        }
        &self.basis * scaled
    }
}

/// Precoder update with the multiplier chosen so that `‖F‖_F² ≤ power_budget`,
/// tight whenever the unconstrained minimizer exceeds the budget.
pub fn update_precoder(
    channels: &[DVector<C64>],
    receivers: &[C64],
    weights: &[f64],
    variant: UpdateVariant,
    power_budget: f64,
) -> Result<PrecoderUpdate> {
    let family = PrecoderFamily::new(channels, receivers, weights, variant)?;
    let multiplier = if family.power(0.0) <= power_budget {
        0.0
    } else {
        let scale = family.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mut hi = scale * 1e-6 + f64::MIN_POSITIVE;
        while family.power(hi) > power_budget {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical("multiplier search diverged".into()));
            }
        }
        let mut lo = 0.0;
        // Keep `hi` feasible and shrink until the bracket is at rounding level.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if family.power(mid) > power_budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let matrix = family.precoder(multiplier);
    if !matrix.iter().all(|z| z.is_finite()) {
        return Err(Error::Numerical("non-finite precoder".into()));
    }
    Ok(PrecoderUpdate { matrix, multiplier })
}

/// Explicit `F(μ) = diag-scaled (A + μI)^{-1} h̃_k` columns, evaluated by a
/// dense solve. Used to cross-check [`update_precoder`].
pub fn precoder_for_multiplier(
    channels: &[DVector<C64>],
    receivers: &[C64],
    weights: &[f64],
    variant: UpdateVariant,
    multiplier: f64,
) -> Result<DMatrix<C64>> {
    let dim = channels[0].len();
    let mut a = DMatrix::<C64>::identity(dim, dim) * C64::new(multiplier, 0.0);
    for (j, h) in channels.iter().enumerate() {
        let c = weights[j] * receivers[j].norm_sqr();
        a += h * h.adjoint() * C64::new(c, 0.0);
    }
    let lu = a.lu();
    let mut f = DMatrix::zeros(dim, channels.len());
    for (j, h) in channels.iter().enumerate() {
        let x = lu
            .solve(h)
            .ok_or_else(|| Error::Numerical("singular regularized matrix".into()))?;
        let s = match variant {
            UpdateVariant::DerivedOptimal => receivers[j].conj(),
            UpdateVariant::Literal => receivers[j],
        } * weights[j];
        f.column_mut(j).copy_from(&(x * s));
    }
    Ok(f)
}

/// Scales every column of `m` to unit norm (zero columns are left alone).
pub fn normalize_columns(m: &mut DMatrix<C64>) {
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col.unscale_mut(n);
        }
    }
}

/// Global rescale so that `‖m‖_F² = power`.
pub(crate) fn rescale_to_power(m: &mut DMatrix<C64>, power: f64) -> Result<()> {
    let current = m.norm_squared();
    if !current.is_finite() || current <= 0.0 {
        return Err(Error::Numerical("precoder collapsed to zero".into()));
    }
    m.scale_mut((power / current).sqrt());
    Ok(())
}

/// Alternating WMMSE on arbitrary-dimension channels, starting from `initial`.
///
/// Returns the final precoder rescaled to `‖F‖_F² = K` and the solver state.
pub fn solve_wmmse(
    channels: &[DVector<C64>],
    initial: DMatrix<C64>,
    cfg: &SystemConfig,
    wcfg: &WmmseConfig,
) -> Result<(DMatrix<C64>, WmmseState)> {
    wcfg.validate()?;
    let k = cfg.k_users();
    if channels.len() != k || initial.ncols() != k {
        return param("channel count and precoder width must equal K");
    }
    let budget = k as f64;
    let mut precoder = initial;
    let mut state = WmmseState::default();
    for _ in 0..wcfg.max_iters {
        let receivers = update_receivers(channels, &precoder, cfg, wcfg.variant);
        let errors: Vec<f64> = (0..k)
            .map(|j| mse(receivers[j], &channels[j], &precoder, j, cfg))
            .collect();
        let weights = update_weights(&errors)?;
        let update = update_precoder(channels, &receivers, &weights, wcfg.variant, budget)?;
        precoder = update.matrix;

        let post_errors: Vec<f64> = (0..k)
            .map(|j| mse(receivers[j], &channels[j], &precoder, j, cfg))
            .collect();
        let obj = objective(&weights, &post_errors, wcfg.variant);
        let rate = rates_from_effective(channels, &precoder, cfg).sum_rate;
        state.receivers = receivers;
        state.weights = weights;
        state.errors = errors;
        state.multiplier = update.multiplier;
        let prev = state.objective_trace.last().copied();
        state.objective_trace.push(obj);
        state.sum_rate_trace.push(rate);
        if let Some(prev) = prev {
            if (obj - prev).abs() <= wcfg.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    rescale_to_power(&mut precoder, budget)?;
    Ok((precoder, state))
}

/// Output of the perfect-CSI hybrid scheme.
#[derive(Debug, Clone)]
pub struct PwmmseOutput {
    pub analog: AnalogBeamformer,
    pub digital: DigitalBeamformer,
    pub state: WmmseState,
}

impl PwmmseOutput {
    pub fn rates(&self, channels: &[ChannelRealization], cfg: &SystemConfig) -> Result<RateReport> {
        crate::metrics::sum_rate(channels, &self.analog, &self.digital, cfg)
    }
}

/// Phase alignment, effective channels, matched-filter initialization with
/// per-column normalization, then alternating WMMSE updates.
pub fn run_pwmmse(channels: &[ChannelRealization], cfg: &SystemConfig, wcfg: &WmmseConfig) -> Result<PwmmseOutput> {
    let analog = phase_align_analog(channels, cfg)?;
    let eff = effective_channels(&analog, channels)?;
    let mut initial = DMatrix::from_columns(&eff);
    normalize_columns(&mut initial);
    let (matrix, state) = solve_wmmse(&eff, initial, cfg, wcfg)?;
    Ok(PwmmseOutput {
        analog,
        digital: DigitalBeamformer { matrix },
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_channel::{generate_user_channels, ChannelParams};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cfg(n_bs: usize, k: usize, snr_db: f64) -> SystemConfig {
        SystemConfig::with_snr_db(n_bs, k, snr_db).unwrap()
    }

    fn channel_from(entries: Vec<C64>) -> ChannelRealization {
        ChannelRealization::from_raw_vector(entries)
    }

    #[test]
    fn alignment_reads_off_phases() {
        let cfg = cfg(4, 1, 10.0);
        let h = channel_from(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]);
        let a = phase_align_analog(&[h], &cfg).unwrap();
        let expected = [c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)];
        for (z, e) in a.vector(0).iter().zip(expected) {
            assert_abs_diff_eq!((z - e).norm(), 0.0, epsilon = 1e-15);
        }
        let h = channel_from(vec![c(2.0, 0.0), c(0.1, 0.0), c(3.0, 0.0), c(0.0, 0.0)]);
        let a = phase_align_analog(&[h], &cfg).unwrap();
        for z in a.vector(0).iter() {
            assert_abs_diff_eq!((z - c(0.5, 0.0)).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn alignment_combines_coherently() {
        let cfg = cfg(64, 4, 0.0);
        let hs = generate_user_channels(5, &cfg, &ChannelParams::default()).unwrap();
        let a = phase_align_analog(&hs, &cfg).unwrap();
        assert!(a.modulus_error() < 1e-12);
        for (k, h) in hs.iter().enumerate() {
            let seg = &h.as_slice()[cfg.subarray(k)];
            let direct: f64 = seg.iter().map(|z| z.norm()).sum::<f64>() / (cfg.n_s() as f64).sqrt();
            let got = inner(a.vector(k).as_slice(), seg).norm();
            assert_abs_diff_eq!(got, direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn effective_channel_of_ones() {
        let cfg = cfg(8, 2, 0.0);
        let f = DVector::from_element(4, c(0.5, 0.0));
        let a = AnalogBeamformer::new(vec![f.clone(), f]).unwrap();
        let h = channel_from(vec![c(1.0, 0.0); 8]);
        let eff = effective_channels(&a, &[h.clone(), h]).unwrap();
        for z in eff[0].iter() {
            assert_abs_diff_eq!((z - c(2.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        }
        assert_eq!(cfg.n_s(), 4);
    }

    #[test]
    fn effective_channel_matches_dense_product() {
        let cfg = cfg(48, 3, 0.0);
        let hs = generate_user_channels(17, &cfg, &ChannelParams::default()).unwrap();
        let a = phase_align_analog(&hs, &cfg).unwrap();
        let dense = a.assemble();
        assert_eq!(dense.iter().filter(|z| z.norm() > 0.0).count(), cfg.n_bs());
        let eff = effective_channels(&a, &hs).unwrap();
        for (h, e) in hs.iter().zip(&eff) {
            let reference = dense.adjoint() * h.vector();
            assert!((reference - e).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_precoder_gives_zero_receivers() {
        let cfg = cfg(8, 2, 0.0);
        let eff = vec![DVector::from_element(2, c(1.0, 0.5)); 2];
        let zero = DMatrix::zeros(2, 2);
        for variant in [UpdateVariant::DerivedOptimal, UpdateVariant::Literal] {
            let u = update_receivers(&eff, &zero, &cfg, variant);
            assert!(u.iter().all(|z| z.norm() == 0.0));
        }
        assert_abs_diff_eq!(mse(C64::new(0.0, 0.0), &eff[0], &zero, 0, &cfg), cfg.stream_power());
    }

    #[test]
    fn weights_are_reciprocal_errors() {
        let w = update_weights(&[1.0, 0.25, 2.0]).unwrap();
        assert_eq!(w, vec![1.0, 4.0, 0.5]);
        assert!(matches!(
            update_weights(&[1.0, 0.0]),
            Err(Error::DegenerateError { user: 1 })
        ));
    }

    #[test]
    fn perfect_equalization_leaves_noise_term() {
        let cfg = cfg(4, 2, 3.0);
        let eff = DVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]);
        let f = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let u = c(0.5, 0.0);
        assert_abs_diff_eq!(mse(u, &eff, &f, 0, &cfg), cfg.noise_var() * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn single_user_precoder_is_matched() {
        let g = DVector::from_vec(vec![c(0.3, -1.1)]);
        let u = vec![c(0.2, 0.4)];
        let w = vec![1.7];
        let up = update_precoder(std::slice::from_ref(&g), &u, &w, UpdateVariant::DerivedOptimal, 1.0).unwrap();
        let mut f = up.matrix.clone();
        rescale_to_power(&mut f, 1.0).unwrap();
        assert_abs_diff_eq!(f[(0, 0)].norm(), 1.0, epsilon = 1e-12);
        // Collinear with w u* g, i.e. a positive multiple of u* g.
        let dir = u[0].conj() * g[0];
        let ratio = f[(0, 0)] / dir;
        assert!(ratio.re > 0.0 && ratio.im.abs() < 1e-12);
    }

    #[test]
    fn power_constraint_is_tight_when_active() {
        let cfg = cfg(64, 4, 20.0);
        let hs = generate_user_channels(3, &cfg, &ChannelParams::default()).unwrap();
        let a = phase_align_analog(&hs, &cfg).unwrap();
        let eff = effective_channels(&a, &hs).unwrap();
        let u = vec![c(0.01, 0.002), c(-0.003, 0.02), c(0.004, 0.001), c(0.0, -0.01)];
        let w = vec![2.0, 1.0, 3.0, 0.5];
        let up = update_precoder(&eff, &u, &w, UpdateVariant::DerivedOptimal, 4.0).unwrap();
        assert!(up.multiplier > 0.0);
        let dense = precoder_for_multiplier(&eff, &u, &w, UpdateVariant::DerivedOptimal, up.multiplier).unwrap();
        assert!((dense.norm_squared() - 4.0).abs() < 1e-6);
        assert!((dense - &up.matrix).norm() < 1e-8 * up.matrix.norm());
    }

    #[test]
    fn single_user_rate_matches_closed_form() {
        let cfg = cfg(16, 1, 5.0);
        let hs = generate_user_channels(8, &cfg, &ChannelParams::default()).unwrap();
        let out = run_pwmmse(&hs, &cfg, &WmmseConfig::default()).unwrap();
        assert_abs_diff_eq!(out.digital.matrix[(0, 0)].norm(), 1.0, epsilon = 1e-10);
        let g = out.analog.effective_channel(hs[0].as_slice()).unwrap()[0];
        let expected = (1.0 + cfg.total_power() * g.norm_sqr() / cfg.noise_var()).log2();
        let rate = out.rates(&hs, &cfg).unwrap();
        assert_abs_diff_eq!(rate.sum_rate, expected, epsilon = 1e-10);
    }

    #[test]
    fn rejects_bad_solver_config() {
        let cfg = cfg(16, 2, 5.0);
        let hs = generate_user_channels(8, &cfg, &ChannelParams::default()).unwrap();
        let bad = WmmseConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(run_pwmmse(&hs, &cfg, &bad).is_err());
        assert!(run_pwmmse(&hs[..1], &cfg, &WmmseConfig::default()).is_err());
    }

    #[test]
    fn variant_parses() {
        assert_eq!(
            "literal".parse::<UpdateVariant>().unwrap(),
            UpdateVariant::Literal
        );
        assert!("other".parse::<UpdateVariant>().is_err());
    }
}
