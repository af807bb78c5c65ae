//! TOML experiment descriptions.
//!
//! ```toml
//! [system]
//! n_bs = 512          # antennas
//! n_rf = 4            # RF chains = users
//! snr_db = 10.0       # used when the sweep axis is n_bs
//!
//! [channel]           # optional
//! n_paths = 3
//! los_var = 1.0
//! nlos_var = 0.01
//!
//! [amm]               # optional
//! lambda = 1000.0
//! samples_per_range = 10
//! max_iters = 50
//! rel_tol = 1e-6
//!
//! [pwmmse]            # optional, also drives the fully digital baseline
//! max_iters = 20
//! rel_tol = 1e-4
//! variant = "derived-optimal"   # or "literal"
//!
//! [csi]               # optional
//! codebook_size = 512           # default n_bs
//! sweep_snr_db = 10.0           # default: the trial SNR; inf = noiseless
//! eff_csi_snr_db = 10.0         # default: the trial SNR; inf = perfect
//!
//! [sweep]
//! axis = "snr_db"               # or "n_bs"
//! values = [-10, -5, 0, 5, 10]
//!
//! [run]
//! schemes = ["pwmmse", "amm", "fully_digital", "tsh"]
//! trials = 200
//! root_seed = 1
//! output_path = "sumrate_snr.csv"
//! record_timing = false         # wall_ms is 0 unless enabled
//!
//! [beampattern]       # optional, used by the beampattern command
//! ranges_deg = [[-0.9, 0.0], [4.5, 5.4], [-9.9, -9.0], [15.4, 16.3]]
//! users = [1]
//! grid_size = 20001
//! ```
//!
//! SNR is `P/σ²` with `P = K`, i.e. unit power per stream. Unknown keys are
//! rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::amm::AmmConfig;
use crate::array_channel::{db_to_linear, ChannelParams, SystemConfig};
use crate::error::{Error, Result};
use crate::pwmmse::WmmseConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Pwmmse,
    Amm,
    FullyDigital,
    Tsh,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Pwmmse, Scheme::Amm, Scheme::FullyDigital, Scheme::Tsh];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Pwmmse => "pwmmse",
            Scheme::Amm => "amm",
            Scheme::FullyDigital => "fully_digital",
            Scheme::Tsh => "tsh",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    NBs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n_bs: usize,
    pub n_rf: usize,
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
}

fn default_snr_db() -> f64 {
    10.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsiSection {
    pub codebook_size: Option<usize>,
    pub sweep_snr_db: Option<f64>,
    pub eff_csi_snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub root_seed: u64,
    pub output_path: String,
    pub record_timing: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            trials: 200,
            root_seed: 1,
            output_path: "results.csv".into(),
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeampatternSection {
    /// Per-user AoD intervals in degrees; swept from trial 0 when absent.
    pub ranges_deg: Option<Vec<[f64; 2]>>,
    /// 1-based users to export; all users when absent.
    pub users: Option<Vec<usize>>,
    pub grid_size: usize,
}

impl Default for BeampatternSection {
    fn default() -> Self {
        Self {
            ranges_deg: None,
            users: None,
            grid_size: 20001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub amm: AmmConfig,
    #[serde(default)]
    pub pwmmse: WmmseConfig,
    #[serde(default)]
    pub csi: CsiSection,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub beampattern: BeampatternSection,
}

/// `λ = 1000`, 10 samples per interval, run until the objective settles.
impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.run.trials == 0 {
            return cfg_err("trials must be at least 1".into());
        }
        if self.sweep.values.is_empty() {
            return cfg_err("sweep values must be non-empty".into());
        }
        if self.run.schemes.is_empty() {
            return cfg_err("at least one scheme is required".into());
        }
        if self.csi.codebook_size == Some(0) {
            return cfg_err("codebook_size must be positive".into());
        }
        if self.beampattern.grid_size < 2 {
            return cfg_err("beampattern grid_size must be at least 2".into());
        }
        self.channel.validate()?;
        self.amm.validate()?;
        self.pwmmse.validate()?;
        for &v in &self.sweep.values {
            self.system_for(v)?;
        }
        Ok(())
    }

    /// System seen at one sweep point.
    pub fn system_for(&self, sweep_value: f64) -> Result<SystemConfig> {
        match self.sweep.axis {
            SweepAxis::SnrDb => SystemConfig::with_snr_db(self.system.n_bs, self.system.n_rf, sweep_value),
            SweepAxis::NBs => {
                if sweep_value.fract() != 0.0 || sweep_value < 1.0 {
                    return Err(Error::Config(format!(
                        "n_bs sweep value {sweep_value} is not a positive integer"
                    )));
                }
                SystemConfig::with_snr_db(sweep_value as usize, self.system.n_rf, self.system.snr_db)
            }
        }
    }

    pub fn snr_db_for(&self, sweep_value: f64) -> f64 {
        match self.sweep.axis {
            SweepAxis::SnrDb => sweep_value,
            SweepAxis::NBs => self.system.snr_db,
        }
    }

    pub fn codebook_size(&self, sys: &SystemConfig) -> usize {
        self.csi.codebook_size.unwrap_or(sys.n_bs())
    }

    /// Linear SNR of a sweep pilot.
    pub fn sweep_snr(&self, sweep_value: f64) -> f64 {
        db_to_linear(self.csi.sweep_snr_db.unwrap_or(self.snr_db_for(sweep_value)))
    }

    /// Linear SNR of effective-channel training for TSH.
    pub fn eff_csi_snr(&self, sweep_value: f64) -> f64 {
        db_to_linear(self.csi.eff_csi_snr_db.unwrap_or(self.snr_db_for(sweep_value)))
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.run.root_seed.wrapping_add(trial as u64)
    }

    fn base(n_bs: usize, sweep: SweepSpec, output: &str) -> Self {
        Self {
            system: SystemSection {
                n_bs,
                n_rf: 4,
                snr_db: 10.0,
            },
            channel: ChannelParams::default(),
            amm: AmmConfig::default(),
            pwmmse: WmmseConfig::default(),
            csi: CsiSection::default(),
            sweep,
            run: RunSection {
                output_path: output.into(),
                ..RunSection::default()
            },
            beampattern: BeampatternSection::default(),
        }
    }

    /// Nulling demonstration: 128 antennas, 4 subarrays, fixed intervals.
    pub fn beampattern_preset() -> Self {
        let mut cfg = Self::base(
            128,
            SweepSpec {
                axis: SweepAxis::SnrDb,
                values: vec![10.0],
            },
            "beampattern",
        );
        cfg.run.schemes = vec![Scheme::Amm];
        cfg.run.trials = 1;
        cfg.amm = AmmConfig {
            lambda: 1000.0,
            samples_per_range: 10,
            max_iters: 5000,
            rel_tol: 1e-9,
        };
        cfg.beampattern = BeampatternSection {
            ranges_deg: Some(vec![[-0.9, 0.0], [4.5, 5.4], [-9.9, -9.0], [15.4, 16.3]]),
            users: Some(vec![1]),
            grid_size: 20001,
        };
        cfg
    }

    /// Sum-rate versus SNR at 512 antennas.
    pub fn sumrate_snr_preset() -> Self {
        Self::base(
            512,
            SweepSpec {
                axis: SweepAxis::SnrDb,
                values: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            },
            "sumrate_snr.csv",
        )
    }

    /// Sum-rate versus array size at 10 dB.
    pub fn sumrate_nbs_preset() -> Self {
        Self::base(
            512,
            SweepSpec {
                axis: SweepAxis::NBs,
                values: vec![64.0, 128.0, 256.0, 512.0],
            },
            "sumrate_nbs.csv",
        )
    }

    /// Objective traces of the iterative schemes on one instance.
    pub fn convergence_preset() -> Self {
        let mut cfg = Self::base(
            128,
            SweepSpec {
                axis: SweepAxis::SnrDb,
                values: vec![10.0],
            },
            "convergence.csv",
        );
        cfg.run.schemes = vec![Scheme::Pwmmse, Scheme::Amm, Scheme::FullyDigital];
        cfg.run.trials = 1;
        cfg.pwmmse.rel_tol = 1e-9;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
n_bs = 64
n_rf = 4

[sweep]
axis = "snr_db"
values = [0.0, 10.0]
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.run.trials, 200);
        assert_eq!(cfg.run.schemes, Scheme::ALL.to_vec());
        assert_eq!(cfg.pwmmse, WmmseConfig::default());
        let sys = cfg.system_for(10.0).unwrap();
        assert_eq!(sys.total_power(), 4.0);
        assert!((sys.noise_var() - 0.4).abs() < 1e-12);
        assert_eq!(cfg.codebook_size(&sys), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[run]\ntrails = 3\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace("n_rf = 4", "n_rf = 4\nnrf = 4");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let text = format!("{MINIMAL}\n[run]\nschemes = [\"hysbd\"]\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = format!("{MINIMAL}\n[run]\ntrials = 0\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = MINIMAL.replace("values = [0.0, 10.0]", "values = []");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = MINIMAL.replace("n_bs = 64", "n_bs = 66");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = MINIMAL
            .replace("\"snr_db\"", "\"n_bs\"")
            .replace("[0.0, 10.0]", "[64.5]");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for cfg in [
            ExperimentConfig::beampattern_preset(),
            ExperimentConfig::sumrate_snr_preset(),
            ExperimentConfig::sumrate_nbs_preset(),
            ExperimentConfig::convergence_preset(),
        ] {
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn infinite_csi_snr_is_noiseless() {
        let text = format!("{MINIMAL}\n[csi]\nsweep_snr_db = inf\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!(cfg.sweep_snr(0.0).is_infinite());
        assert!((cfg.eff_csi_snr(10.0) - 10.0).abs() < 1e-12);
    }
}
