//! ULA steering vectors and the geometric (Saleh-Valenzuela) channel.
//!
//! A path with angle-of-departure sine `θ` contributes `α a(θ)` where
//! `a(θ)[m] = exp(jπ m θ) / √N` for a half-wavelength ULA. A user's channel
//! is `h = √(N / L) Σ_l α_l a(θ_l)`, with the first path line-of-sight.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::C64;

/// Array and link-budget dimensions shared by every scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    n_bs: usize,
    n_rf: usize,
    k_users: usize,
    n_s: usize,
    total_power: f64,
    noise_var: f64,
}

impl SystemConfig {
    /// Builds a configuration serving `n_rf` users, one per RF chain.
    pub fn new(n_bs: usize, n_rf: usize, total_power: f64, noise_var: f64) -> Result<Self> {
        if n_bs == 0 || n_rf == 0 {
            return param("antenna and RF-chain counts must be positive");
        }
        if !n_bs.is_multiple_of(n_rf) {
            return param(format!("n_bs = {n_bs} is not divisible by n_rf = {n_rf}"));
        }
        if !(total_power > 0.0 && total_power.is_finite()) {
            return param(format!("total power must be positive, got {total_power}"));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return param(format!("noise variance must be positive, got {noise_var}"));
        }
        Ok(Self {
            n_bs,
            n_rf,
            k_users: n_rf,
            n_s: n_bs / n_rf,
            total_power,
            noise_var,
        })
    }

    /// Unit per-stream power (`P = K`) and `σ² = P / 10^(snr/10)`.
    pub fn with_snr_db(n_bs: usize, n_rf: usize, snr_db: f64) -> Result<Self> {
        let total_power = n_rf as f64;
        Self::new(n_bs, n_rf, total_power, total_power / db_to_linear(snr_db))
    }

    pub fn n_bs(&self) -> usize {
        self.n_bs
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    pub fn k_users(&self) -> usize {
        self.k_users
    }

    /// Antennas per subarray.
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// `P / K`.
    pub fn stream_power(&self) -> f64 {
        self.total_power / self.k_users as f64
    }

    /// Antenna indices (0-based) of subarray `q` (0-based).
    pub fn subarray(&self, q: usize) -> std::ops::Range<usize> {
        q * self.n_s..(q + 1) * self.n_s
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn check_sine(aod_sine: f64) -> Result<()> {
    if !(aod_sine > -1.0 && aod_sine <= 1.0) {
        return param(format!("AoD sine {aod_sine} outside (-1, 1]"));
    }
    Ok(())
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: C64,
    pub aod_sine: f64,
}

impl PathComponent {
    pub fn new(gain: C64, aod_sine: f64) -> Result<Self> {
        check_sine(aod_sine)?;
        Ok(Self { gain, aod_sine })
    }
}

/// A user's multipath parameters together with the realized channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    paths: Vec<PathComponent>,
    vector: DVector<C64>,
}

impl ChannelRealization {
    pub fn from_paths(paths: Vec<PathComponent>, n_bs: usize) -> Result<Self> {
        let vector = synthesize(&paths, n_bs)?;
        Ok(Self { paths, vector })
    }

    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.vector
    }

    pub fn as_slice(&self) -> &[C64] {
        self.vector.as_slice()
    }

    pub fn len(&self) -> usize {
        self.vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vector.is_empty()
    }

    /// Rebuilds the channel vector from the stored paths.
    pub fn recompute(&self) -> DVector<C64> {
        synthesize(&self.paths, self.vector.len()).expect("paths validated at construction")
    }

    /// Wraps an arbitrary vector, bypassing the path model.
    #[cfg(test)]
    pub(crate) fn from_raw_vector(vector: Vec<C64>) -> Self {
        Self {
            paths: vec![PathComponent {
                gain: C64::new(1.0, 0.0),
                aod_sine: 0.0,
            }],
            vector: DVector::from_vec(vector),
        }
    }

    /// Line-of-sight AoD sine (first path).
    pub fn los_sine(&self) -> f64 {
        self.paths[0].aod_sine
    }
}

fn synthesize(paths: &[PathComponent], n_bs: usize) -> Result<DVector<C64>> {
    if paths.is_empty() {
        return param("a channel needs at least one path");
    }
    let scale = (n_bs as f64 / paths.len() as f64).sqrt();
    let mut h = DVector::zeros(n_bs);
    for path in paths {
        let a = steering_vector(path.aod_sine, n_bs)?;
        h.axpy(path.gain * scale, &a, C64::new(1.0, 0.0));
    }
    Ok(h)
}

/// `a(θ)` for an `n`-element half-wavelength ULA, unit norm.
pub fn steering_vector(aod_sine: f64, n: usize) -> Result<DVector<C64>> {
    if n == 0 {
        return param("steering vector length must be positive");
    }
    check_sine(aod_sine)?;
    Ok(DVector::from_vec(steering_entries(aod_sine, 0, n, n)))
}

/// Entries `offset..offset+len` of the `n_total`-element steering vector.
pub(crate) fn steering_entries(aod_sine: f64, offset: usize, len: usize, n_total: usize) -> Vec<C64> {
    let amp = 1.0 / (n_total as f64).sqrt();
    (offset..offset + len)
        .map(|m| C64::from_polar(amp, PI * m as f64 * aod_sine))
        .collect()
}

/// `a(θ)_{S_q}`: the entries of the full-array steering vector that drive
/// subarray `subarray_index` (1-based, as RF chains are numbered 1..=K).
pub fn subarray_steering(aod_sine: f64, subarray_index: usize, cfg: &SystemConfig) -> Result<DVector<C64>> {
    if subarray_index == 0 || subarray_index > cfg.k_users() {
        return param(format!("subarray index {subarray_index} outside 1..={}", cfg.k_users()));
    }
    check_sine(aod_sine)?;
    let range = cfg.subarray(subarray_index - 1);
    Ok(DVector::from_vec(steering_entries(
        aod_sine,
        range.start,
        cfg.n_s(),
        cfg.n_bs(),
    )))
}

/// Multipath statistics of the channel generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub n_paths: usize,
    pub los_var: f64,
    pub nlos_var: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            n_paths: 3,
            los_var: 1.0,
            nlos_var: 0.01,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return param("n_paths must be at least 1");
        }
        if !(self.los_var > 0.0 && self.nlos_var > 0.0) {
            return param("path gain variances must be positive");
        }
        Ok(())
    }
}

/// Draws from `CN(0, var)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Uniform on `(-1, 1]`.
pub fn uniform_sine<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - 2.0 * rng.random::<f64>()
}

pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws one channel from an existing generator.
pub fn draw_channel<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    params: &ChannelParams,
) -> Result<ChannelRealization> {
    params.validate()?;
    let paths = (0..params.n_paths)
        .map(|l| {
            let var = if l == 0 { params.los_var } else { params.nlos_var };
            let gain = complex_gaussian(rng, var);
            PathComponent::new(gain, uniform_sine(rng))
        })
        .collect::<Result<Vec<_>>>()?;
    ChannelRealization::from_paths(paths, cfg.n_bs())
}

/// One channel realization, fully determined by `rng_seed`.
pub fn generate_channel(rng_seed: u64, cfg: &SystemConfig, params: &ChannelParams) -> Result<ChannelRealization> {
    draw_channel(&mut trial_rng(rng_seed), cfg, params)
}

/// Channels of all K users for one trial, drawn in user order from `rng_seed`.
pub fn generate_user_channels(
    rng_seed: u64,
    cfg: &SystemConfig,
    params: &ChannelParams,
) -> Result<Vec<ChannelRealization>> {
    let mut rng = trial_rng(rng_seed);
    (0..cfg.k_users())
        .map(|_| draw_channel(&mut rng, cfg, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg(n_bs: usize, n_rf: usize) -> SystemConfig {
        SystemConfig::new(n_bs, n_rf, n_rf as f64, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SystemConfig::new(10, 4, 4.0, 1.0).is_err());
        assert!(SystemConfig::new(0, 4, 4.0, 1.0).is_err());
        assert!(SystemConfig::new(8, 4, 0.0, 1.0).is_err());
        assert!(SystemConfig::new(8, 4, 4.0, -1.0).is_err());
        let c = cfg(512, 4);
        assert_eq!((c.n_s(), c.k_users()), (128, 4));
    }

    #[test]
    fn steering_examples() {
        let a = steering_vector(0.0, 4).unwrap();
        for z in a.iter() {
            assert_abs_diff_eq!(z.re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
        let a = steering_vector(1.0, 2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(a[0].re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].re, -r, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].im, 0.0, epsilon = 1e-15);
        let a = steering_vector(0.5, 8).unwrap();
        assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[2].re, -1.0 / 8f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(a[2].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn steering_rejects_out_of_range() {
        assert!(steering_vector(-1.0, 4).is_err());
        assert!(steering_vector(1.2, 4).is_err());
        assert!(steering_vector(0.3, 0).is_err());
    }

    #[test]
    fn subarray_examples() {
        let c = cfg(8, 2);
        let s = subarray_steering(0.0, 2, &c).unwrap();
        for z in s.iter() {
            assert_abs_diff_eq!(z.re, 1.0 / 8f64.sqrt(), epsilon = 1e-15);
        }
        // Independent closed form: entry 4 (0-based) of a(0.25) has phase π·4·0.25 = π.
        let s = subarray_steering(0.25, 2, &c).unwrap();
        let expected = C64::from_polar(1.0 / 8f64.sqrt(), std::f64::consts::PI);
        assert_abs_diff_eq!((s[0] - expected).norm(), 0.0, epsilon = 1e-15);
        assert!(subarray_steering(0.1, 0, &c).is_err());
        assert!(subarray_steering(0.1, 3, &c).is_err());
    }

    #[test]
    fn single_path_unit_gain() {
        let c = cfg(16, 4);
        let path = PathComponent::new(C64::new(1.0, 0.0), 0.37).unwrap();
        let h = ChannelRealization::from_paths(vec![path], 16).unwrap();
        let a = steering_vector(0.37, 16).unwrap() * C64::new(4.0, 0.0);
        assert_abs_diff_eq!((h.vector() - a).norm(), 0.0, epsilon = 1e-13);
        assert_eq!(c.n_bs(), h.len());
    }

    #[test]
    fn generation_is_deterministic() {
        let c = cfg(64, 4);
        let p = ChannelParams::default();
        let a = generate_user_channels(99, &c, &p).unwrap();
        let b = generate_user_channels(99, &c, &p).unwrap();
        assert_eq!(a, b);
        let other = generate_user_channels(100, &c, &p).unwrap();
        assert_ne!(a, other);
    }

    proptest! {
        #[test]
        fn steering_has_unit_norm(theta in -0.999_999f64..=1.0, n in 1usize..300) {
            let a = steering_vector(theta, n).unwrap();
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn subarrays_concatenate_to_full_vector(theta in -0.999f64..=1.0, k in 1usize..6, n_s in 1usize..20) {
            let c = cfg(k * n_s, k);
            let full = steering_vector(theta, c.n_bs()).unwrap();
            let mut joined = Vec::new();
            for q in 1..=k {
                joined.extend(subarray_steering(theta, q, &c).unwrap().iter().copied());
            }
            prop_assert_eq!(joined.as_slice(), full.as_slice());
        }

        #[test]
        fn stored_vector_matches_paths(seed in any::<u64>()) {
            let c = cfg(32, 4);
            let h = generate_channel(seed, &c, &ChannelParams::default()).unwrap();
            prop_assert!((h.recompute() - h.vector()).norm() < 1e-12);
            for p in h.paths() {
                prop_assert!(p.aod_sine > -1.0 && p.aod_sine <= 1.0);
            }
        }
    }
}
