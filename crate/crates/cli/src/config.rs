//! Experiment configuration: a JSON document with unit-tagged physical
//! quantities.
//!
//! ```json
//! {
//!   "experiment": "rates",
//!   "physical": {
//!     "rho":   { "value": 19050, "unit": "kg/m^3" },
//!     "r":     { "value": 0.1,   "unit": "m" },
//!     "d":     { "value": 0.2,   "unit": "m" },
//!     "omega": { "value": 1,     "unit": "Hz" },
//!     "Q":     { "value": 1e9,   "unit": "1" }
//!   }
//! }
//! ```
//!
//! Model parameters are dimensionless (`hbar = m = omega = 1`) and given as
//! plain numbers.

use std::f64::consts::PI;
use std::path::PathBuf;

use gravchan::{ModelSpec, PhysicalSetup};
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Rates,
    SplittingBound,
    Heat,
    Decohere,
    EntangleWitness,
    EpsilonScan,
    Trajectories,
    OracleCompare,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rates => "rates",
            Self::SplittingBound => "splitting-bound",
            Self::Heat => "heat",
            Self::Decohere => "decohere",
            Self::EntangleWitness => "entangle-witness",
            Self::EpsilonScan => "epsilon-scan",
            Self::Trajectories => "trajectories",
            Self::OracleCompare => "oracle-compare",
        }
    }

    fn needs_physical(self) -> bool {
        matches!(self, Self::Rates | Self::SplittingBound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Unit {
    #[serde(rename = "m")]
    Metre,
    #[serde(rename = "cm")]
    Centimetre,
    #[serde(rename = "mm")]
    Millimetre,
    #[serde(rename = "um")]
    Micrometre,
    #[serde(rename = "kg")]
    Kilogram,
    #[serde(rename = "g")]
    Gram,
    #[serde(rename = "kg/m^3")]
    KilogramPerCubicMetre,
    #[serde(rename = "g/cm^3")]
    GramPerCubicCentimetre,
    #[serde(rename = "rad/s")]
    RadianPerSecond,
    #[serde(rename = "Hz")]
    Hertz,
    #[serde(rename = "1/s")]
    PerSecond,
    #[serde(rename = "K")]
    Kelvin,
    #[serde(rename = "1")]
    Dimensionless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Length,
    Mass,
    Density,
    AngularFrequency,
    Rate,
    Temperature,
    Dimensionless,
}

impl Unit {
    fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            Metre | Centimetre | Millimetre | Micrometre => Dimension::Length,
            Kilogram | Gram => Dimension::Mass,
            KilogramPerCubicMetre | GramPerCubicCentimetre => Dimension::Density,
            RadianPerSecond | Hertz => Dimension::AngularFrequency,
            PerSecond => Dimension::Rate,
            Kelvin => Dimension::Temperature,
            Dimensionless => Dimension::Dimensionless,
        }
    }

    /// Factor to the SI unit of the dimension (Hz counts as `2 pi rad/s`).
    fn to_si(self) -> f64 {
        use Unit::*;
        match self {
            Metre
            | Kilogram
            | KilogramPerCubicMetre
            | RadianPerSecond
            | PerSecond
            | Kelvin
            | Dimensionless => 1.0,
            Centimetre => 1e-2,
            Millimetre => 1e-3,
            Micrometre => 1e-6,
            Gram => 1e-3,
            GramPerCubicCentimetre => 1e3,
            Hertz => 2.0 * PI,
        }
    }
}

fn si(name: &str, q: Option<Quantity>, dim: Dimension) -> Result<Option<f64>, CliError> {
    match q {
        None => Ok(None),
        Some(q) if q.unit.dimension() == dim => Ok(Some(q.value * q.unit.to_si())),
        Some(q) => Err(CliError::Config(format!(
            "physical.{name}: unit {:?} is not a {dim:?} unit",
            q.unit
        ))),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub rho: Option<Quantity>,
    pub r: Option<Quantity>,
    pub m1: Option<Quantity>,
    pub m2: Option<Quantity>,
    pub omega: Option<Quantity>,
    pub omega1: Option<Quantity>,
    pub omega2: Option<Quantity>,
    pub d: Option<Quantity>,
    pub gamma: Option<Quantity>,
    #[serde(rename = "Q")]
    pub q: Option<Quantity>,
    pub t_bath: Option<Quantity>,
}

fn missing(name: &str) -> CliError {
    CliError::Config(format!("physical.{name} is required"))
}

impl PhysicalConfig {
    pub fn density(&self) -> Result<Option<f64>, CliError> {
        si("rho", self.rho, Dimension::Density)
    }

    /// Bare angular frequencies in rad/s.
    pub fn frequencies(&self) -> Result<(f64, f64), CliError> {
        let omega = si("omega", self.omega, Dimension::AngularFrequency)?;
        let o1 = si("omega1", self.omega1, Dimension::AngularFrequency)?;
        let o2 = si("omega2", self.omega2, Dimension::AngularFrequency)?;
        match (omega, o1, o2) {
            (Some(w), None, None) => Ok((w, w)),
            (None, Some(a), Some(b)) => Ok((a, b)),
            _ => Err(CliError::Config(
                "physical: give either omega or both omega1 and omega2".into(),
            )),
        }
    }

    pub fn separation(&self) -> Result<Option<f64>, CliError> {
        si("d", self.d, Dimension::Length)
    }

    pub fn radius(&self) -> Result<Option<f64>, CliError> {
        si("r", self.r, Dimension::Length)
    }

    /// Full two-oscillator setup: spheres from `rho` and `r`, or explicit
    /// masses.
    pub fn setup(&self) -> Result<PhysicalSetup, CliError> {
        let (o1, o2) = self.frequencies()?;
        let d = self.separation()?.ok_or_else(|| missing("d"))?;
        let m1 = si("m1", self.m1, Dimension::Mass)?;
        let m2 = si("m2", self.m2, Dimension::Mass)?;
        let mut setup = match (self.density()?, self.radius()?, m1, m2) {
            (Some(rho), Some(r), None, None) => {
                let mut s = PhysicalSetup::spheres(rho, r, o1, d);
                s.omega2 = o2;
                s
            }
            (None, None, Some(m1), Some(m2)) => PhysicalSetup::new(m1, m2, o1, o2, d),
            _ => {
                return Err(CliError::Config(
                    "physical: give either rho and r, or m1 and m2".into(),
                ))
            }
        };
        setup.gamma = si("gamma", self.gamma, Dimension::Rate)?;
        setup.q = si("Q", self.q, Dimension::Dimensionless)?;
        setup.t_bath = si("t_bath", self.t_bath, Dimension::Temperature)?;
        setup.validate()?;
        Ok(setup)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum PerMode {
    Both(f64),
    Each([f64; 2]),
}

impl PerMode {
    fn pair(self) -> [f64; 2] {
        match self {
            Self::Both(v) => [v, v],
            Self::Each(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Minimal,
    Feedback,
    Scaled,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QbmConfig {
    pub damping: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: VariantName,
    pub g: Option<f64>,
    pub y: Option<f64>,
    pub chi: Option<PerMode>,
    pub gamma: Option<PerMode>,
    pub frequencies: Option<[f64; 2]>,
    #[serde(default = "yes")]
    pub coherent: bool,
    pub qbm: Option<QbmConfig>,
    /// Noise reduction below the minimal channel, `Y = (2g - epsilon) I`.
    pub epsilon: Option<f64>,
}

fn yes() -> bool {
    true
}

fn model_field(name: &str, v: Option<f64>) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("model.{name} is required")))
}

impl ModelConfig {
    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let mut spec = match self.variant {
            VariantName::Minimal => ModelSpec::minimal(model_field("g", self.g)?),
            VariantName::Scaled => {
                ModelSpec::scaled(model_field("g", self.g)?, model_field("y", self.y)?)
            }
            VariantName::Feedback => {
                let chi = self
                    .chi
                    .ok_or_else(|| CliError::Config("model.chi is required".into()))?;
                let gamma = self
                    .gamma
                    .ok_or_else(|| CliError::Config("model.gamma is required".into()))?;
                ModelSpec::feedback_with_rates(chi.pair(), gamma.pair())
            }
        };
        if let Some(f) = self.frequencies {
            spec = spec.with_frequencies(f);
        }
        if let Some(q) = self.qbm {
            spec = spec.with_qbm(q.damping, q.temperature);
        }
        if !self.coherent {
            spec = spec.decoherence_only();
        }
        gravchan::gaussian::build_generator(&spec)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Keep every this many steps in the series (default: at most ~1000 rows).
    pub record_every: Option<usize>,
}

impl IntegrationConfig {
    pub fn n_steps(&self) -> Result<usize, CliError> {
        if !(self.dt > 0.0 && self.t_final > 0.0) {
            return Err(CliError::Config(
                "integration.dt and integration.t_final must be positive".into(),
            ));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final || n < 1.0 {
            return Err(CliError::Config(
                "integration.t_final must be a whole number of steps".into(),
            ));
        }
        Ok(n as usize)
    }

    pub fn stride(&self) -> Result<usize, CliError> {
        let n = self.n_steps()?;
        let stride = self.record_every.unwrap_or_else(|| n.div_ceil(1000)).max(1);
        if n % stride != 0 {
            return Err(CliError::Config(
                "integration.record_every must divide the number of steps".into(),
            ));
        }
        Ok(stride)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "one")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_resamples")]
    pub bootstrap: usize,
}

fn one() -> usize {
    1
}

fn default_resamples() -> usize {
    200
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_traj: 1,
            seed: 0,
            bootstrap: default_resamples(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockSection {
    pub n: usize,
    pub leakage_tol: Option<f64>,
    pub positivity_stride: Option<usize>,
}

impl FockSection {
    pub fn config(&self) -> gravchan::FockConfig {
        let mut cfg = gravchan::FockConfig::new(self.n);
        if let Some(t) = self.leakage_tol {
            cfg = cfg.with_leakage_tol(t);
        }
        if let Some(s) = self.positivity_stride {
            cfg = cfg.with_positivity_stride(s);
        }
        cfg
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub separations: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Coherent-state quadrature means `(x1, p1, x2, p2)`.
    pub mean: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: all_formats(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub physical: Option<PhysicalConfig>,
    pub model: Option<ModelConfig>,
    pub integration: Option<IntegrationConfig>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    pub fock: Option<FockSection>,
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_value(v: &Value) -> Result<Self, CliError> {
        let cfg: Self =
            serde_json::from_value(v.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Everything that can be checked without running the experiment.
    pub fn validate(&self) -> Result<(), CliError> {
        let needs_physical = self.experiment.needs_physical();
        match (
            needs_physical,
            self.physical.is_some(),
            self.model.is_some(),
        ) {
            (true, true, false) | (false, false, true) => {}
            (true, _, _) => {
                return Err(CliError::Config(format!(
                    "{} needs a physical section and no model section",
                    self.experiment.name()
                )))
            }
            (false, _, _) => {
                return Err(CliError::Config(format!(
                    "{} needs a model section and no physical section",
                    self.experiment.name()
                )))
            }
        }
        if let Some(p) = &self.physical {
            match self.experiment {
                Experiment::Rates => {
                    p.setup()?;
                }
                _ => {
                    p.density()?.ok_or_else(|| missing("rho"))?;
                    p.frequencies()?;
                    p.radius()?;
                    p.separation()?;
                }
            }
        }
        if let Some(m) = &self.model {
            m.spec()?;
            if self.experiment == Experiment::EpsilonScan {
                self.epsilon_spec()?;
            }
            if matches!(self.experiment, Experiment::Trajectories)
                && m.variant != VariantName::Feedback
            {
                return Err(CliError::Config(
                    "trajectories needs a feedback model".into(),
                ));
            }
        }
        if !needs_physical {
            let integ = self
                .integration
                .ok_or_else(|| CliError::Config("integration section is required".into()))?;
            integ.stride()?;
        }
        if matches!(
            self.experiment,
            Experiment::Decohere | Experiment::OracleCompare
        ) {
            let f = self.fock.ok_or_else(|| {
                CliError::Config(format!("{} needs a fock section", self.experiment.name()))
            })?;
            f.config().validate()?;
        }
        if self.experiment == Experiment::Decohere {
            let probe = self
                .probe
                .as_ref()
                .ok_or_else(|| CliError::Config("decohere needs probe.separations".into()))?;
            if probe.separations.is_empty() || probe.separations.iter().any(|s| !(*s >= 0.0)) {
                return Err(CliError::Config(
                    "probe.separations must be a non-empty list of non-negative numbers".into(),
                ));
            }
        }
        if self.experiment == Experiment::Trajectories && self.ensemble.n_traj < 2 {
            return Err(CliError::Config(
                "ensemble.n_traj must be at least 2".into(),
            ));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats is empty".into()));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("model section is required".into()))?
            .spec()
    }

    /// `(g, epsilon, spec)` with `Y = (2g - epsilon) I`.
    pub fn epsilon_spec(&self) -> Result<(f64, f64, ModelSpec), CliError> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("model section is required".into()))?;
        if m.variant == VariantName::Feedback {
            return Err(CliError::Config(
                "epsilon-scan needs a minimal or scaled model".into(),
            ));
        }
        let g = model_field("g", m.g)?;
        let eps = m.epsilon.unwrap_or(0.0);
        let y = 2.0 * g - eps;
        if y < 0.0 {
            return Err(CliError::Config(format!(
                "model.epsilon = {eps} exceeds 2g = {}",
                2.0 * g
            )));
        }
        let mut scaled = ModelConfig {
            variant: VariantName::Scaled,
            y: Some(y),
            ..m.clone()
        };
        scaled.epsilon = None;
        Ok((g, eps, scaled.spec()?))
    }

    pub fn physical(&self) -> Result<&PhysicalConfig, CliError> {
        self.physical
            .as_ref()
            .ok_or_else(|| CliError::Config("physical section is required".into()))
    }

    pub fn integration(&self) -> Result<IntegrationConfig, CliError> {
        self.integration
            .ok_or_else(|| CliError::Config("integration section is required".into()))
    }

    pub fn initial_mean(&self) -> nalgebra::Vector4<f64> {
        self.initial
            .mean
            .map(nalgebra::Vector4::from)
            .unwrap_or_else(nalgebra::Vector4::zeros)
    }
}
