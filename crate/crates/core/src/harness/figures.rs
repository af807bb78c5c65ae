//! Beam-pattern and convergence-trace outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::amm::{beam_sweep, build_codebook, run_amm, AmmOutput, AngleRange};
use crate::array_channel::{generate_user_channels, SystemConfig};
use crate::baselines::run_fully_digital;
use crate::error::{param, Result};
use crate::harness::config::{ExperimentConfig, Scheme};
use crate::harness::results::format_sig;
use crate::metrics::{beam_pattern, nulling_depth, BeamPattern};
use crate::pwmmse::run_pwmmse;
use crate::C64;

/// Quiescent and nulled patterns of one user.
#[derive(Debug, Clone)]
pub struct PatternPair {
    /// 1-based.
    pub user: usize,
    pub quiescent: BeamPattern,
    pub nulled: BeamPattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub user: usize,
    pub beam: &'static str,
    /// 1-based index of the interval.
    pub range_index: usize,
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub depth_db: f64,
}

#[derive(Debug, Clone)]
pub struct BeampatternReport {
    pub system: SystemConfig,
    pub ranges: Vec<AngleRange>,
    pub quiescent: Vec<DVector<C64>>,
    pub output: AmmOutput,
    pub patterns: Vec<PatternPair>,
    pub depths: Vec<DepthRow>,
}

impl BeampatternReport {
    /// Depth of `beam` ("amm" or "quiescent") for `user` inside interval `range_index` (both 1-based).
    pub fn depth(&self, user: usize, beam: &str, range_index: usize) -> Option<f64> {
        self.depths
            .iter()
            .find(|d| d.user == user && d.beam == beam && d.range_index == range_index)
            .map(|d| d.depth_db)
    }
}

/// Runs A-MM on the configured intervals (or on a trial-0 sweep when none
/// are given) and evaluates quiescent and nulled patterns.
pub fn beampattern(config: &ExperimentConfig) -> Result<BeampatternReport> {
    config.validate()?;
    let sweep_value = config.sweep.values[0];
    let sys = config.system_for(sweep_value)?;
    let codebook = build_codebook(&sys, config.codebook_size(&sys))?;
    let (ranges, quiescent) = match &config.beampattern.ranges_deg {
        Some(deg) => {
            if deg.len() != sys.k_users() {
                return param(format!("need {} angle ranges, got {}", sys.k_users(), deg.len()));
            }
            let ranges = deg
                .iter()
                .map(|[lo, hi]| AngleRange::from_degrees(*lo, *hi))
                .collect::<Result<Vec<_>>>()?;
            let words = ranges
                .iter()
                .map(|r| codebook.codeword(codebook.index_of(r.center())).clone())
                .collect();
            (ranges, words)
        }
        None => {
            let seed = config.trial_seed(0);
            let channels = generate_user_channels(seed, &sys, &config.channel)?;
            let sweep = beam_sweep(&channels, &codebook, &sys, config.sweep_snr(sweep_value), seed)?;
            (sweep.ranges, sweep.codewords)
        }
    };
    let output = run_amm(&quiescent, &ranges, &sys, &config.amm)?;
    let users: Vec<usize> = config
        .beampattern
        .users
        .clone()
        .unwrap_or_else(|| (1..=sys.k_users()).collect());
    let mut patterns = Vec::new();
    let mut depths = Vec::new();
    for &user in &users {
        if user == 0 || user > sys.k_users() {
            return param(format!("user {user} outside 1..={}", sys.k_users()));
        }
        let q = user - 1;
        let grid = config.beampattern.grid_size;
        let pair = PatternPair {
            user,
            quiescent: beam_pattern(&quiescent[q], grid, user)?,
            nulled: beam_pattern(output.analog.vector(q), grid, user)?,
        };
        for (beam, pattern) in [("amm", &pair.nulled), ("quiescent", &pair.quiescent)] {
            for (i, r) in ranges.iter().enumerate() {
                depths.push(DepthRow {
                    user,
                    beam,
                    range_index: i + 1,
                    lo_deg: r.lo_degrees(),
                    hi_deg: r.hi_degrees(),
                    depth_db: nulling_depth(pattern, r).unwrap_or(f64::NAN),
                });
            }
        }
        patterns.push(pair);
    }
    Ok(BeampatternReport {
        system: sys,
        ranges,
        quiescent,
        output,
        patterns,
        depths,
    })
}

fn write_pattern(path: &Path, pattern: &BeamPattern) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sine", "degrees", "gain_db"])?;
    for (a, g) in pattern.angles.iter().zip(&pattern.gains_db) {
        w.write_record([format_sig(*a), format_sig(a.asin().to_degrees()), format_sig(*g)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `pattern_user{q}_amm.csv`, `pattern_user{q}_quiescent.csv` per
/// exported user and `nulling_depths.csv`; returns the written paths.
pub fn write_beampattern(report: &BeampatternReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for pair in &report.patterns {
        for (kind, pattern) in [("amm", &pair.nulled), ("quiescent", &pair.quiescent)] {
            let path = dir.join(format!("pattern_user{}_{kind}.csv", pair.user));
            write_pattern(&path, pattern)?;
            written.push(path);
        }
    }
    let path = dir.join("nulling_depths.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["user", "beam", "range", "lo_deg", "hi_deg", "depth_db"])?;
    for d in &report.depths {
        w.write_record([
            d.user.to_string(),
            d.beam.to_string(),
            d.range_index.to_string(),
            format_sig(d.lo_deg),
            format_sig(d.hi_deg),
            format_sig(d.depth_db),
        ])?;
    }
    w.flush()?;
    written.push(path);
    Ok(written)
}

/// One point of an iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub scheme: Scheme,
    /// 1-based subproblem for A-MM, `None` for the joint WMMSE solvers.
    pub user: Option<usize>,
    /// 1-based iteration.
    pub iteration: usize,
    pub objective: f64,
    pub sum_rate: Option<f64>,
}

/// Per-iteration objectives of every enabled iterative scheme on the
/// instance of trial 0 at the first sweep point.
pub fn convergence(config: &ExperimentConfig) -> Result<Vec<TraceRow>> {
    config.validate()?;
    let sweep_value = config.sweep.values[0];
    let sys = config.system_for(sweep_value)?;
    let seed = config.trial_seed(0);
    let channels = generate_user_channels(seed, &sys, &config.channel)?;
    let mut rows = Vec::new();
    let wmmse_rows = |scheme, objective: &[f64], rates: &[f64]| {
        objective
            .iter()
            .zip(rates)
            .enumerate()
            .map(|(i, (&o, &r))| TraceRow {
                scheme,
                user: None,
                iteration: i + 1,
                objective: o,
                sum_rate: Some(r),
            })
            .collect::<Vec<_>>()
    };
    for &scheme in &config.run.schemes {
        match scheme {
            Scheme::Pwmmse => {
                let out = run_pwmmse(&channels, &sys, &config.pwmmse)?;
                rows.extend(wmmse_rows(
                    scheme,
                    &out.state.objective_trace,
                    &out.state.sum_rate_trace,
                ));
            }
            Scheme::FullyDigital => {
                let (_, state) = run_fully_digital(&channels, &sys, &config.pwmmse)?;
                rows.extend(wmmse_rows(scheme, &state.objective_trace, &state.sum_rate_trace));
            }
            Scheme::Amm => {
                let codebook = build_codebook(&sys, config.codebook_size(&sys))?;
                let sweep = beam_sweep(&channels, &codebook, &sys, config.sweep_snr(sweep_value), seed)?;
                let out = run_amm(&sweep.codewords, &sweep.ranges, &sys, &config.amm)?;
                for (q, t) in out.traces.iter().enumerate() {
                    rows.extend(t.objective_trace.iter().enumerate().map(|(i, &o)| TraceRow {
                        scheme,
                        user: Some(q + 1),
                        iteration: i + 1,
                        objective: o,
                        sum_rate: None,
                    }));
                }
            }
            Scheme::Tsh => {}
        }
    }
    Ok(rows)
}

pub fn write_convergence<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scheme", "user", "iteration", "objective", "sum_rate"])?;
    for r in rows {
        w.write_record([
            r.scheme.name().to_string(),
            r.user.map_or(String::new(), |u| u.to_string()),
            r.iteration.to_string(),
            format_sig(r.objective),
            r.sum_rate.map_or(String::new(), format_sig),
        ])?;
    }
    w.flush()?;
    Ok(())
}
