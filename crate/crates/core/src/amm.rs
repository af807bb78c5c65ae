//! Analog-only beamforming from beam-sweeping feedback.
//!
//! After sweeping, user `q` is known only through the angular interval `Ω_q`
//! of its best codeword. Each RF chain then solves an independent nulling
//! problem on its own subarray: keep the power radiated into `Ω_q` and push
//! down the power leaked into every other `Ω_k`,
//!
//! ```text
//! min_f  -Σ_m |a(φ_{q,m})_{S_q}^H f|² + λ Σ_{k≠q} Σ_m |a(φ_{k,m})_{S_q}^H f|²
//! s.t.   |f_n| = 1/√n_s
//! ```
//!
//! with `φ_{k,m}` evenly spaced samples of `Ω_k`. The first term is concave
//! and is majorized by its tangent; each leakage term `f^H P f` with
//! `P = a a^H ≼ I` is majorized by `f^H f + f_i^H (I - P) f_i + 2 Re{f^H (P - I) f_i}`,
//! where `f^H f` is constant on the constraint set. The surrogate is linear
//! in `f`, so its constrained minimizer is a phase-only projection of
//! `Σ₁ - λ Σ₂`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_channel::{complex_gaussian, steering_entries, ChannelRealization, SystemConfig};
use crate::error::{param, Result};
use crate::linalg::{inner, norm_sqr, phase, phasor};
use crate::pwmmse::AnalogBeamformer;
use crate::C64;

/// Interval of AoD sines `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    lo: f64,
    hi: f64,
}

impl AngleRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(-1.0 <= lo && lo < hi && hi <= 1.0) {
            return param(format!("invalid angle range [{lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }

    /// Range given by physical angles in degrees.
    pub fn from_degrees(lo_deg: f64, hi_deg: f64) -> Result<Self> {
        Self::new(lo_deg.to_radians().sin(), hi_deg.to_radians().sin())
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, sine: f64) -> bool {
        self.lo <= sine && sine <= self.hi
    }

    pub fn lo_degrees(&self) -> f64 {
        self.lo.asin().to_degrees()
    }

    pub fn hi_degrees(&self) -> f64 {
        self.hi.asin().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmmConfig {
    /// Leakage weight `λ`.
    pub lambda: f64,
    /// Samples `M` per angular interval.
    pub samples_per_range: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for AmmConfig {
    fn default() -> Self {
        Self {
            lambda: 1000.0,
            samples_per_range: 10,
            max_iters: 50,
            rel_tol: 1e-6,
        }
    }
}

impl AmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return param("lambda must be positive");
        }
        if self.samples_per_range == 0 {
            return param("samples_per_range must be at least 1");
        }
        if self.max_iters == 0 {
            return param("max_iters must be at least 1");
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return param("rel_tol must be non-negative");
        }
        Ok(())
    }
}

/// Sweeping codebook: constant-modulus subarray beams on a uniform sine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    codewords: Vec<DVector<C64>>,
    centers: Vec<f64>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn codeword(&self, i: usize) -> &DVector<C64> {
        &self.codewords[i]
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Nominal coverage `[c_i - 1/N, c_i + 1/N]` of codeword `i`.
    pub fn range(&self, i: usize) -> AngleRange {
        let half = 1.0 / self.len() as f64;
        let c = self.centers[i];
        AngleRange {
            lo: (c - half).max(-1.0),
            hi: (c + half).min(1.0),
        }
    }

    /// Index of the codeword whose coverage contains `sine`.
    pub fn index_of(&self, sine: f64) -> usize {
        let n = self.len() as f64;
        (((sine + 1.0) * n / 2.0).floor() as usize).min(self.len() - 1)
    }
}

/// Codebook of `n_cb` beams with centers `-1 + (2i + 1)/n_cb`.
pub fn build_codebook(cfg: &SystemConfig, n_cb: usize) -> Result<Codebook> {
    if n_cb == 0 {
        return param("codebook needs at least one codeword");
    }
    let n_s = cfg.n_s();
    let centers: Vec<f64> = (0..n_cb).map(|i| -1.0 + (2 * i + 1) as f64 / n_cb as f64).collect();
    let codewords = centers
        .iter()
        .map(|&c| DVector::from_vec(steering_entries(c, 0, n_s, n_s)))
        .collect();
    Ok(Codebook { codewords, centers })
}

/// Outcome of beam sweeping for all users.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub indices: Vec<usize>,
    pub codewords: Vec<DVector<C64>>,
    pub ranges: Vec<AngleRange>,
}

impl SweepResult {
    pub fn has_collision(&self) -> bool {
        let mut seen = self.indices.clone();
        seen.sort_unstable();
        seen.windows(2).any(|w| w[0] == w[1])
    }
}

/// RNG for an auxiliary noise source of a trial. Streams keep the sweep and
/// training noise independent of the channel draw under the same seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const SWEEP_STREAM: u64 = 1;

/// Exhaustive sweep: user `k` measures every codeword on subarray `k` with a
/// single pilot, `y = h_{k,S_k}^H w_i + n`, `n ~ CN(0, 1/sweep_snr)`, and
/// reports the strongest. `sweep_snr = ∞` is noiseless.
pub fn beam_sweep(
    channels: &[ChannelRealization],
    codebook: &Codebook,
    cfg: &SystemConfig,
    sweep_snr: f64,
    rng_seed: u64,
) -> Result<SweepResult> {
    if codebook.is_empty() {
        return param("empty codebook");
    }
    if sweep_snr.is_nan() || sweep_snr <= 0.0 {
        return param("sweep SNR must be positive");
    }
    if channels.len() != cfg.k_users() {
        return param("one channel per user required");
    }
    let noise_var = 1.0 / sweep_snr;
    let mut rng = stream_rng(rng_seed, SWEEP_STREAM);
    let mut indices = Vec::with_capacity(channels.len());
    for (k, h) in channels.iter().enumerate() {
        let seg = &h.as_slice()[cfg.subarray(k)];
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..codebook.len() {
            let mut y = inner(seg, codebook.codeword(i).as_slice());
            if noise_var > 0.0 {
                y += complex_gaussian(&mut rng, noise_var);
            }
            let power = y.norm_sqr();
            if power > best.1 {
                best = (i, power);
            }
        }
        indices.push(best.0);
    }
    let result = SweepResult {
        codewords: indices.iter().map(|&i| codebook.codeword(i).clone()).collect(),
        ranges: indices.iter().map(|&i| codebook.range(i)).collect(),
        indices,
    };
    if result.has_collision() {
        log::warn!("beam sweep: users share a codeword {:?}", result.indices);
    }
    Ok(result)
}

/// `m` evenly spaced sines covering `[lo, hi]`; one sample is the midpoint.
pub fn sample_angle_range(range: &AngleRange, m_samples: usize) -> Vec<f64> {
    match m_samples {
        0 => Vec::new(),
        1 => vec![range.center()],
        m => {
            let step = (range.hi - range.lo) / (m - 1) as f64;
            (0..m)
                .map(|i| {
                    if i == m - 1 {
                        range.hi
                    } else {
                        range.lo + step * i as f64
                    }
                })
                .collect()
        }
    }
}

/// Precomputed sampled steering slices of one subarray's nulling problem.
#[derive(Debug, Clone)]
pub struct NullingProblem {
    desired: Vec<Vec<C64>>,
    leakage: Vec<Vec<C64>>,
    lambda: f64,
    n_s: usize,
}

impl NullingProblem {
    /// Problem of subarray `q` (0-based) given every user's interval.
    pub fn new(q: usize, ranges: &[AngleRange], cfg: &SystemConfig, amm: &AmmConfig) -> Result<Self> {
        amm.validate()?;
        if ranges.len() != cfg.k_users() || q >= ranges.len() {
            return param("need one angle range per user and a valid subarray");
        }
        let offset = cfg.subarray(q).start;
        let slice = |phi: f64| steering_entries(phi, offset, cfg.n_s(), cfg.n_bs());
        let desired = sample_angle_range(&ranges[q], amm.samples_per_range)
            .into_iter()
            .map(slice)
            .collect();
        let leakage = ranges
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != q)
            .flat_map(|(_, r)| sample_angle_range(r, amm.samples_per_range))
            .map(slice)
            .collect();
        Ok(Self {
            desired,
            leakage,
            lambda: amm.lambda,
            n_s: cfg.n_s(),
        })
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// `Σ_m |a_m^H f|²` over the desired samples.
    pub fn desired_power(&self, f: &[C64]) -> f64 {
        self.desired.iter().map(|a| inner(a, f).norm_sqr()).sum()
    }

    /// `Σ_{k≠q} Σ_m |a_{k,m}^H f|²`.
    pub fn leaked_power(&self, f: &[C64]) -> f64 {
        self.leakage.iter().map(|a| inner(a, f).norm_sqr()).sum()
    }

    /// Nulling objective (without the constant `λ M σ²`).
    pub fn objective(&self, f: &[C64]) -> f64 {
        -self.desired_power(f) + self.lambda * self.leaked_power(f)
    }

    /// `(Σ₁, Σ₂)` at expansion point `f_iter`.
    pub fn surrogate_coeffs(&self, f_iter: &[C64]) -> (DVector<C64>, DVector<C64>) {
        let mut s1 = DVector::zeros(self.n_s);
        for a in &self.desired {
            let c = inner(a, f_iter);
            for (s, &x) in s1.iter_mut().zip(a) {
                *s += x * c;
            }
        }
        let mut s2 = DVector::zeros(self.n_s);
        for a in &self.leakage {
            let c = inner(a, f_iter);
            for (s, &x) in s2.iter_mut().zip(a) {
                *s += x * c;
            }
        }
        let count = self.leakage.len() as f64;
        for (s, &x) in s2.iter_mut().zip(f_iter) {
            *s -= x * count;
        }
        (s1, s2)
    }

    /// Value at `f` of the surrogate built at `f_iter`, constants included.
    /// Valid as an upper bound for constant-modulus `f`.
    pub fn majorizer_value(&self, f: &[C64], f_iter: &[C64]) -> f64 {
        let first: f64 = self
            .desired
            .iter()
            .map(|a| {
                let ci = inner(a, f_iter);
                let cf = inner(a, f);
                // Tangent of -|a^H f|² at f_iter.
                ci.norm_sqr() - 2.0 * (ci * cf.conj()).re
            })
            .sum();
        let ff = norm_sqr(f);
        let fi = norm_sqr(f_iter);
        let cross = inner(f, f_iter).re;
        let second: f64 = self
            .leakage
            .iter()
            .map(|a| {
                let ci = inner(a, f_iter);
                let cf = inner(a, f);
                let p_quad = ci.norm_sqr();
                // f^H (a a^H - I) f_iter = (a^H f)^* (a^H f_iter) - f^H f_iter
                let lin = (cf.conj() * ci).re - cross;
                ff + (fi - p_quad) + 2.0 * lin
            })
            .sum();
        first + self.lambda * second
    }
}

/// Nulling objective of `f_q` for subarray `q` (0-based).
pub fn slnr_objective(
    f_q: &[C64],
    q: usize,
    ranges: &[AngleRange],
    cfg: &SystemConfig,
    amm: &AmmConfig,
) -> Result<f64> {
    if f_q.len() != cfg.n_s() {
        return param("beamformer length must equal n_s");
    }
    Ok(NullingProblem::new(q, ranges, cfg, amm)?.objective(f_q))
}

/// `(Σ₁, Σ₂)` for subarray `q` (0-based) at `f_iter`.
pub fn mm_surrogate_coeffs(
    f_iter: &[C64],
    q: usize,
    ranges: &[AngleRange],
    cfg: &SystemConfig,
    amm: &AmmConfig,
) -> Result<(DVector<C64>, DVector<C64>)> {
    if f_iter.len() != cfg.n_s() {
        return param("beamformer length must equal n_s");
    }
    Ok(NullingProblem::new(q, ranges, cfg, amm)?.surrogate_coeffs(f_iter))
}

/// Constant-modulus maximizer of `Re{f^H (Σ₁ - λΣ₂)}`:
/// `f_n = e^{j∠[Σ₁ - λΣ₂]_n} / √n_s`. If `Σ₁ - λΣ₂` vanishes every feasible
/// point is optimal and `current` is returned unchanged.
pub fn mm_closed_form_update(
    sigma1: &DVector<C64>,
    sigma2: &DVector<C64>,
    lambda: f64,
    current: &DVector<C64>,
) -> DVector<C64> {
    let n_s = current.len();
    let target = sigma1 - sigma2 * C64::new(lambda, 0.0);
    if target.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return current.clone();
    }
    let amp = 1.0 / (n_s as f64).sqrt();
    target.map(|z| phasor(phase(z)) * amp)
}

/// Result of one subarray's MM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct NullingTrace {
    pub initial_objective: f64,
    /// Objective after each update.
    pub objective_trace: Vec<f64>,
}

impl NullingTrace {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len()
    }
}

/// MM iteration of one subarray starting from `initial`.
pub fn solve_nulling(
    problem: &NullingProblem,
    initial: &DVector<C64>,
    amm: &AmmConfig,
) -> (DVector<C64>, NullingTrace) {
    let mut f = initial.clone();
    let mut prev = problem.objective(f.as_slice());
    let mut trace = NullingTrace {
        initial_objective: prev,
        objective_trace: Vec::new(),
    };
    for _ in 0..amm.max_iters {
        let (s1, s2) = problem.surrogate_coeffs(f.as_slice());
        f = mm_closed_form_update(&s1, &s2, amm.lambda, &f);
        let obj = problem.objective(f.as_slice());
        trace.objective_trace.push(obj);
        let converged = (prev - obj).abs() <= amm.rel_tol * prev.abs().max(f64::MIN_POSITIVE);
        prev = obj;
        if converged {
            break;
        }
    }
    (f, trace)
}

#[derive(Debug, Clone)]
pub struct AmmOutput {
    pub analog: AnalogBeamformer,
    pub traces: Vec<NullingTrace>,
}

impl AmmOutput {
    pub fn max_iterations(&self) -> usize {
        self.traces.iter().map(NullingTrace::iterations).max().unwrap_or(0)
    }
}

/// Runs the K decoupled nulling problems, each initialized at its user's
/// swept codeword, and stacks the results into a block-diagonal `F_RF`.
pub fn run_amm(
    codewords: &[DVector<C64>],
    ranges: &[AngleRange],
    cfg: &SystemConfig,
    amm: &AmmConfig,
) -> Result<AmmOutput> {
    amm.validate()?;
    let k = cfg.k_users();
    if codewords.len() != k || ranges.len() != k {
        return param("need one codeword and one range per user");
    }
    if codewords.iter().any(|w| w.len() != cfg.n_s()) {
        return param("codeword length must equal n_s");
    }
    let solved = (0..k)
        .into_par_iter()
        .map(|q| {
            let problem = NullingProblem::new(q, ranges, cfg, amm)?;
            Ok(solve_nulling(&problem, &codewords[q], amm))
        })
        .collect::<Result<Vec<_>>>()?;
    let (vectors, traces): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    Ok(AmmOutput {
        analog: AnalogBeamformer::new(vectors)?,
        traces,
    })
}
