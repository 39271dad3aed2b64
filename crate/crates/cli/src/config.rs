use std::f64::consts::PI;
use std::path::Path;

use holonomic_noise::bath::BathSpec;
use holonomic_noise::functionals::{NoiseOperator, PdWindow};
use holonomic_noise::model::{GateLabel, GateSpec, PhysicalParams};
use holonomic_noise::oracle::{KernelSign, StirapFill};
use serde::Deserialize;

use crate::CliError;

/// Values in a config file, all optional; omitted keys keep the reference
/// parameter set.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub bath: BathSection,
    #[serde(default)]
    pub gate: GateSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub epsilon_mev: f64,
    pub omega_mev: f64,
    /// v_max = (Ω/ħ)/divisor.
    pub rabi_divisor: f64,
    /// Overrides `rabi_divisor` when set.
    pub v_max_rad_per_ps: Option<f64>,
    pub temperature_mev: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            epsilon_mev: 1000.0,
            omega_mev: 10.0,
            rabi_divisor: 50.0,
            v_max_rad_per_ps: None,
            temperature_mev: 0.01,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub s: f64,
    /// Prefactor of J(ω) = k ω^s e^{-(ω/ω_c)²}, in meV^(1-s).
    pub coupling_k: f64,
    pub omega_c_mev: f64,
}

impl Default for BathSection {
    fn default() -> Self {
        let b = BathSpec::reference();
        Self { s: b.s, coupling_k: b.k, omega_c_mev: b.omega_c }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSection {
    pub label: String,
    pub solid_angle_rad: Option<f64>,
}

impl Default for GateSection {
    fn default() -> Self {
        Self { label: "not".into(), solid_angle_rad: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Explicit θ_M grid (rad); otherwise `theta_points` uniform points on (0, π].
    pub theta_grid_rad: Option<Vec<f64>>,
    pub theta_points: usize,
    /// Explicit gate-time grid (ps); otherwise `time_points` log-spaced
    /// points on [t_min_ps, t_max_ps].
    pub time_grid_ps: Option<Vec<f64>>,
    pub time_points: usize,
    pub t_min_ps: Option<f64>,
    pub t_max_ps: Option<f64>,
    /// Time budget of `optimize`.
    pub t_ad_ps: f64,
    /// Optional budget for the brute-force search, in ps.
    pub t_budget_ps: Option<f64>,
    pub resolution: usize,
    pub max_parallels: usize,
    pub splits: usize,
    pub seed: u64,
    pub samples: usize,
    pub steps: usize,
    pub pd_window: PdWindow,
    pub noise: NoiseOperator,
    pub kernel_sign: KernelSign,
    pub stirap_fill: StirapFill,
    /// (θ_M rad, Δφ rad) loops for `oracle-check`.
    pub oracle_loops: Vec<(f64, f64)>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            theta_grid_rad: None,
            theta_points: 180,
            time_grid_ps: None,
            time_points: 40,
            t_min_ps: None,
            t_max_ps: None,
            t_ad_ps: 50.0,
            t_budget_ps: None,
            resolution: 64,
            max_parallels: 3,
            splits: 8,
            seed: 7,
            samples: 1000,
            steps: 3000,
            pd_window: PdWindow::Parallel,
            noise: NoiseOperator::Dephase0,
            kernel_sign: KernelSign::Printed,
            stirap_fill: StirapFill::SlowMeridian,
            oracle_loops: vec![(PI / 8.0, 70.0), (PI / 4.0, 40.0), (PI / 4.0, 80.0), (PI / 2.0, 27.0), (PI / 2.0, 60.0)],
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub bath: BathSpec,
    pub gate: GateSpec,
    pub run: RunSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        Self::from_file(file)
    }

    pub fn from_file(f: ConfigFile) -> Result<Self, CliError> {
        let s = &f.system;
        let mut params = PhysicalParams::with_rabi_fraction(s.epsilon_mev, s.omega_mev, s.rabi_divisor, s.temperature_mev);
        if let Some(v) = s.v_max_rad_per_ps {
            params.v_max = v;
        }
        let warnings = params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        let bath = BathSpec { s: f.bath.s, k: f.bath.coupling_k, omega_c: f.bath.omega_c_mev };
        bath.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let label: GateLabel = f.gate.label.parse().map_err(|e: holonomic_noise::Error| CliError::Config(e.to_string()))?;
        let gate = GateSpec::from_label(label, f.gate.solid_angle_rad).map_err(|e| CliError::Config(e.to_string()))?;
        let r = &f.run;
        if r.theta_points < 1 || r.time_points < 2 {
            return Err(CliError::Config("theta_points must be >= 1 and time_points >= 2".into()));
        }
        if r.steps < 1 || r.samples < 1 {
            return Err(CliError::Config("steps and samples must be positive".into()));
        }
        Ok(Self { params, bath, gate, run: f.run })
    }

    pub fn temperature(&self) -> f64 {
        self.params.temperature
    }

    pub fn theta_grid(&self) -> Vec<f64> {
        match &self.run.theta_grid_rad {
            Some(g) => g.clone(),
            None => {
                let n = self.run.theta_points;
                (1..=n).map(|i| PI * i as f64 / n as f64).collect()
            }
        }
    }

    /// Explicit grid, or log-spaced points between the given bounds
    /// (defaulting to `lo_default`..`hi_default`).
    pub fn time_grid(&self, lo_default: f64, hi_default: f64) -> Vec<f64> {
        if let Some(g) = &self.run.time_grid_ps {
            return g.clone();
        }
        let lo = self.run.t_min_ps.unwrap_or(lo_default);
        let hi = self.run.t_max_ps.unwrap_or(hi_default);
        let n = self.run.time_points;
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }
}
