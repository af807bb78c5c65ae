//! Paired Monte Carlo trials.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::amm::{beam_sweep, build_codebook, run_amm, Codebook, SweepResult};
use crate::array_channel::{generate_user_channels, ChannelRealization, SystemConfig};
use crate::baselines::{run_fully_digital, run_tsh_with_sweep};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Scheme};
use crate::harness::results::{ResultRow, RunResult};
use crate::metrics::{sum_rate, sum_rate_dense, RateReport};
use crate::pwmmse::{run_pwmmse, AnalogBeamformer, DigitalBeamformer};
use crate::C64;

/// Tolerance on `|[f_k]_n| - 1/√n_s`.
pub const MODULUS_TOL: f64 = 1e-10;
/// Tolerance on `‖F_RF F_BB‖_F² - K`.
pub const POWER_TOL: f64 = 1e-8;

/// Beamformer produced by one scheme.
#[derive(Debug, Clone)]
pub enum SchemeBeamformer {
    Hybrid {
        analog: AnalogBeamformer,
        digital: DigitalBeamformer,
    },
    Digital(DMatrix<C64>),
}

impl SchemeBeamformer {
    /// Constant modulus, block-diagonal support and total power.
    pub fn check_structure(&self, cfg: &SystemConfig) -> Result<()> {
        let k = cfg.k_users() as f64;
        let fail = |m: String| Err(Error::Numerical(m));
        match self {
            SchemeBeamformer::Hybrid { analog, digital } => {
                if analog.n_bs() != cfg.n_bs() || analog.n_subarrays() != cfg.k_users() {
                    return fail("analog beamformer has wrong shape".into());
                }
                let modulus = analog.modulus_error();
                if modulus > MODULUS_TOL {
                    return fail(format!("constant modulus violated by {modulus:e}"));
                }
                let dense = analog.assemble();
                for ((t, q), z) in dense
                    .iter()
                    .enumerate()
                    .map(|(i, z)| ((i % cfg.n_bs(), i / cfg.n_bs()), z))
                {
                    let inside = cfg.subarray(q).contains(&t);
                    if inside == (*z == C64::new(0.0, 0.0)) {
                        return fail(format!("block structure violated at ({t}, {q})"));
                    }
                }
                let power = (dense * &digital.matrix).norm_squared();
                if (power - k).abs() > POWER_TOL {
                    return fail(format!("hybrid power {power} != {k}"));
                }
            }
            SchemeBeamformer::Digital(m) => {
                let power = m.norm_squared();
                if (power - k).abs() > POWER_TOL {
                    return fail(format!("digital power {power} != {k}"));
                }
            }
        }
        Ok(())
    }
}

/// Successful evaluation of one scheme on one trial.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub rates: RateReport,
    pub iterations: usize,
    pub beamformer: SchemeBeamformer,
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub outcome: Result<SchemeOutcome>,
}

/// Shared per-trial inputs: channels and (lazily) the sweep.
struct TrialContext<'a> {
    config: &'a ExperimentConfig,
    sys: SystemConfig,
    codebook: &'a Codebook,
    channels: Vec<ChannelRealization>,
    seed: u64,
    sweep_value: f64,
    sweep: Option<SweepResult>,
}

impl TrialContext<'_> {
    fn sweep(&mut self) -> Result<SweepResult> {
        if self.sweep.is_none() {
            self.sweep = Some(beam_sweep(
                &self.channels,
                self.codebook,
                &self.sys,
                self.config.sweep_snr(self.sweep_value),
                self.seed,
            )?);
        }
        Ok(self.sweep.clone().expect("sweep computed"))
    }

    fn run(&mut self, scheme: Scheme) -> Result<SchemeOutcome> {
        let start = Instant::now();
        let sys = self.sys;
        let (beamformer, iterations) = match scheme {
            Scheme::Pwmmse => {
                let out = run_pwmmse(&self.channels, &sys, &self.config.pwmmse)?;
                let iters = out.state.iterations();
                (
                    SchemeBeamformer::Hybrid {
                        analog: out.analog,
                        digital: out.digital,
                    },
                    iters,
                )
            }
            Scheme::Amm => {
                let sweep = self.sweep()?;
                let out = run_amm(&sweep.codewords, &sweep.ranges, &sys, &self.config.amm)?;
                let iters = out.max_iterations();
                (
                    SchemeBeamformer::Hybrid {
                        analog: out.analog,
                        digital: DigitalBeamformer::identity(sys.k_users()),
                    },
                    iters,
                )
            }
            Scheme::FullyDigital => {
                let (fd, state) = run_fully_digital(&self.channels, &sys, &self.config.pwmmse)?;
                (SchemeBeamformer::Digital(fd.matrix), state.iterations())
            }
            Scheme::Tsh => {
                let sweep = self.sweep()?;
                let out = run_tsh_with_sweep(
                    &self.channels,
                    sweep,
                    &sys,
                    self.config.eff_csi_snr(self.sweep_value),
                    self.seed,
                )?;
                (
                    SchemeBeamformer::Hybrid {
                        analog: out.analog,
                        digital: out.digital,
                    },
                    0,
                )
            }
        };
        let rates = match &beamformer {
            SchemeBeamformer::Hybrid { analog, digital } => sum_rate(&self.channels, analog, digital, &sys)?,
            SchemeBeamformer::Digital(m) => sum_rate_dense(&self.channels, m, &sys)?,
        };
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        beamformer.check_structure(&sys)?;
        if !rates.sum_rate.is_finite() {
            return Err(Error::Numerical("non-finite sum-rate".into()));
        }
        Ok(SchemeOutcome {
            rates,
            iterations,
            beamformer,
            wall_ms,
        })
    }
}

/// Runs every configured scheme on the channels of `(sweep_value, trial)`.
/// All schemes see the same channels, drawn from `root_seed + trial`.
pub fn evaluate_trial(config: &ExperimentConfig, sweep_value: f64, trial: usize) -> Result<Vec<SchemeRun>> {
    let sys = config.system_for(sweep_value)?;
    let codebook = build_codebook(&sys, config.codebook_size(&sys))?;
    evaluate_with_codebook(config, sys, &codebook, sweep_value, trial)
}

fn evaluate_with_codebook(
    config: &ExperimentConfig,
    sys: SystemConfig,
    codebook: &Codebook,
    sweep_value: f64,
    trial: usize,
) -> Result<Vec<SchemeRun>> {
    let seed = config.trial_seed(trial);
    let channels = generate_user_channels(seed, &sys, &config.channel)?;
    let mut ctx = TrialContext {
        config,
        sys,
        codebook,
        channels,
        seed,
        sweep_value,
        sweep: None,
    };
    Ok(config
        .run
        .schemes
        .iter()
        .map(|&scheme| SchemeRun {
            scheme,
            outcome: ctx.run(scheme),
        })
        .collect())
}

/// Full sweep × trials × schemes grid. Failed scheme runs become flagged
/// rows and are listed in [`RunResult::failures`]; the run continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let k = config.system.n_rf;
    let mut jobs = Vec::new();
    for &value in &config.sweep.values {
        let sys = config.system_for(value)?;
        let codebook = build_codebook(&sys, config.codebook_size(&sys))?;
        jobs.push((value, sys, codebook));
    }
    let tasks: Vec<(usize, usize)> = (0..jobs.len())
        .flat_map(|j| (0..config.run.trials).map(move |t| (j, t)))
        .collect();
    let per_task: Vec<Vec<(ResultRow, Option<String>)>> = tasks
        .par_iter()
        .map(|&(j, trial)| {
            let (value, sys, codebook) = &jobs[j];
            match evaluate_with_codebook(config, *sys, codebook, *value, trial) {
                Ok(runs) => runs
                    .into_iter()
                    .map(|run| row_for(config, k, *value, trial, run))
                    .collect(),
                Err(e) => config
                    .run
                    .schemes
                    .iter()
                    .map(|&scheme| {
                        (
                            ResultRow::failed(scheme, *value, trial, k),
                            Some(format!("{scheme} at {value}, trial {trial}: {e}")),
                        )
                    })
                    .collect(),
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(tasks.len() * config.run.schemes.len());
    let mut failures = Vec::new();
    for (row, failure) in per_task.into_iter().flatten() {
        rows.push(row);
        failures.extend(failure);
    }
    Ok(RunResult::new(rows, failures))
}

fn row_for(
    config: &ExperimentConfig,
    k: usize,
    value: f64,
    trial: usize,
    run: SchemeRun,
) -> (ResultRow, Option<String>) {
    match run.outcome {
        Ok(out) => {
            let wall_ms = if config.run.record_timing { out.wall_ms } else { 0.0 };
            (
                ResultRow::new(
                    run.scheme,
                    value,
                    trial,
                    out.rates.per_user_rates,
                    out.iterations,
                    wall_ms,
                ),
                None,
            )
        }
        Err(e) => {
            log::error!("{} failed at {value}, trial {trial}: {e}", run.scheme);
            (
                ResultRow::failed(run.scheme, value, trial, k),
                Some(format!("{} at {value}, trial {trial}: {e}", run.scheme)),
            )
        }
    }
}
