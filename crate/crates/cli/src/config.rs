//! Experiment configuration: TOML schema, `key=value` overrides and
//! validation into a ready-to-run setup.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use qwl_core::random::random_state;
use qwl_core::solver::ProblemSpec;
use qwl_core::spectral::{make_basis, Basis, CoeffField, StatePair};
use qwl_core::{Error as CoreError, NonlinearitySpec};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub gamma: f64,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    pub experiment: ExperimentSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("qwl-output")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub modes_per_dim: usize,
    #[serde(default = "default_grid_factor")]
    pub grid_factor: usize,
    /// Galerkin truncation; all modes when absent.
    pub galerkin_n: Option<usize>,
}

fn default_grid_factor() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityKind {
    #[default]
    Quintic,
    Zero,
    Polynomial,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    #[serde(rename = "type", default)]
    pub kind: NonlinearityKind,
    /// Coefficients of `f` in increasing degree, for `type = "polynomial"`.
    pub coeffs: Option<Vec<f64>>,
    pub growth_exponent: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    /// Multi-index `(k_1, ..., k_d)`, each `k_i ≥ 1`.
    pub index: Vec<usize>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    #[serde(default)]
    pub modes: Vec<ModeAmplitude>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Modes {
        #[serde(default)]
        u: Vec<ModeAmplitude>,
        #[serde(default)]
        ut: Vec<ModeAmplitude>,
    },
    Random {
        seed: u64,
        /// Target `‖ξ‖_ℰ`.
        energy: f64,
        /// Number of lowest modes carrying data; all modes when absent.
        active_modes: Option<usize>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub total: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Simulate,
    EnergyReport,
    PerturbedEnergy,
    Splitting,
    GalerkinConvergence,
    StrichartzProbe,
    ContinuousDependence,
    MEnergy,
    Attractor,
    H2Check,
}

impl ExperimentName {
    pub const ALL: [(ExperimentName, &'static str, &'static str); 10] = [
        (ExperimentName::Simulate, "simulate", "evolve the Galerkin system and record the trajectory"),
        (ExperimentName::EnergyReport, "energy-report", "energy norms, dissipation integral and energy-identity residual"),
        (ExperimentName::PerturbedEnergy, "perturbed-energy", "perturbed energy identity and positivity of its quadratic form"),
        (ExperimentName::Splitting, "splitting", "linear/remainder splitting and regularity gain of the remainder"),
        (ExperimentName::GalerkinConvergence, "galerkin-convergence", "self-convergence of Galerkin truncations"),
        (ExperimentName::StrichartzProbe, "strichartz-probe", "Strichartz ratios of the linear equation and interpolation check"),
        (ExperimentName::ContinuousDependence, "continuous-dependence", "growth of a perturbation against the Gronwall majorant"),
        (ExperimentName::MEnergy, "m-energy", "M-energy surrogate along the Galerkin sequence"),
        (ExperimentName::Attractor, "attractor", "omega-limit cloud, attraction curve and regularity of the attractor surrogate"),
        (ExperimentName::H2Check, "h2-check", "elliptic H2 bound along a trajectory"),
    ];

    pub fn as_str(self) -> &'static str {
        Self::ALL.iter().find(|e| e.0 == self).map(|e| e.1).unwrap_or("?")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: ExperimentName,
    #[serde(default)]
    pub parameters: Parameters,
}

/// Per-experiment knobs; every field is optional and only read by the
/// experiments that use it.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub alpha: Option<f64>,
    pub kappa: Option<f64>,
    pub residual_tol: Option<f64>,
    pub dt_sweep: Option<Vec<f64>>,
    pub kappa_sub: Option<f64>,
    pub n_list: Option<Vec<usize>>,
    pub ensemble_size: Option<usize>,
    pub seed: Option<u64>,
    pub scales: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub active_modes: Option<usize>,
    pub perturbation: Option<f64>,
    pub members: Option<usize>,
    pub t_min: Option<f64>,
    pub stride: Option<f64>,
    pub window: Option<f64>,
    pub tolerance: Option<f64>,
    pub beta: Option<f64>,
    pub k_cert: Option<f64>,
    pub samples: Option<usize>,
    pub sobolev_starts: Option<usize>,
}

/// Reads a config file and applies `key=value` overrides (dotted keys,
/// TOML values; bare words are taken as strings).
pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation("config", format!("cannot read {}: {e}", path.display())))?;
    parse(&text, overrides)
}

pub fn parse(text: &str, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut doc: toml::Table =
        toml::from_str(text).map_err(|e| CliError::validation("config", e.message().to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::validation("config", e.message().to_string()))
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(doc: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::validation("override", format!("expected key=value, got `{item}`")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::validation("override", format!("bad key `{key}`")));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::validation("override", format!("`{p}` in `{key}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Validated, ready-to-run inputs.
#[derive(Debug, Clone)]
pub struct Setup {
    pub basis: Arc<Basis>,
    pub problem: Arc<ProblemSpec>,
    pub xi0: StatePair,
    pub dt: f64,
    pub total: f64,
    pub stride: usize,
}

fn mode_field(basis: &Arc<Basis>, modes: &[ModeAmplitude], field: &str) -> Result<CoeffField, CliError> {
    let mut f = CoeffField::zeros(basis);
    for (i, m) in modes.iter().enumerate() {
        let name = format!("{field}[{i}]");
        if m.index.len() != basis.dim() {
            return Err(CliError::validation(
                &format!("{name}.index"),
                format!("needs {} entries, got {}", basis.dim(), m.index.len()),
            ));
        }
        let k = basis.sorted_index_of(&m.index).ok_or_else(|| {
            CliError::validation(
                &format!("{name}.index"),
                format!("{:?} outside 1..={} per axis", m.index, basis.modes_per_dim()),
            )
        })?;
        if !m.amplitude.is_finite() {
            return Err(CliError::validation(&format!("{name}.amplitude"), "must be finite"));
        }
        f.coeffs_mut()[k] += m.amplitude;
    }
    Ok(f)
}

fn core_field(e: &CoreError) -> String {
    match e.root() {
        CoreError::InvalidParameter { name, .. } => name.to_string(),
        CoreError::ModeOutOfRange { .. } => "domain.galerkin_n".into(),
        CoreError::InvalidBasis(_) => "domain".into(),
        CoreError::DegenerateNonlinearity(_) | CoreError::NonFinite(_) => "nonlinearity".into(),
        _ => "config".into(),
    }
}

pub fn from_core(e: CoreError) -> CliError {
    CliError::validation(&core_field(&e), e.to_string())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Setup, CliError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(CliError::validation("gamma", format!("must be positive, got {}", self.gamma)));
        }
        let d = &self.domain;
        if !(1..=3).contains(&d.dim) {
            return Err(CliError::validation("domain.dim", format!("must be 1, 2 or 3, got {}", d.dim)));
        }
        let basis = make_basis(d.dim, d.modes_per_dim, d.grid_factor).map_err(from_core)?;
        let nl = match self.nonlinearity.kind {
            NonlinearityKind::Quintic => NonlinearitySpec::quintic(),
            NonlinearityKind::Zero => NonlinearitySpec::zero(),
            NonlinearityKind::Polynomial => {
                let c = self.nonlinearity.coeffs.clone().ok_or_else(|| {
                    CliError::validation("nonlinearity.coeffs", "required for type = \"polynomial\"")
                })?;
                NonlinearitySpec::polynomial(c).map_err(|e| CliError::validation("nonlinearity.coeffs", e.to_string()))?
            }
        };
        let nl = match self.nonlinearity.growth_exponent {
            Some(p) => nl.with_growth_exponent(p),
            None => nl,
        };
        let forcing = mode_field(&basis, &self.forcing.modes, "forcing.modes")?;
        let galerkin_n = d.galerkin_n.unwrap_or(basis.total_modes());
        let problem = ProblemSpec::new(&basis, self.gamma, forcing, nl, galerkin_n).map_err(from_core)?;

        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(CliError::validation("time.dt", format!("must be positive, got {}", t.dt)));
        }
        if !(t.total > 0.0 && t.total.is_finite()) {
            return Err(CliError::validation("time.T", format!("must be positive, got {}", t.total)));
        }
        let steps = (t.total / t.dt).round();
        if steps < 1.0 || (steps * t.dt - t.total).abs() > 1e-12 * t.total.max(1.0) {
            return Err(CliError::validation("time.dt", format!("{} does not divide T = {}", t.dt, t.total)));
        }
        if t.record_stride == 0 || (steps as usize) % t.record_stride != 0 {
            return Err(CliError::validation(
                "time.record_stride",
                format!("{} does not divide the step count {}", t.record_stride, steps),
            ));
        }

        let xi0 = match &self.initial {
            InitialConfig::Modes { u, ut } => StatePair {
                u: mode_field(&basis, u, "initial.u")?,
                ut: mode_field(&basis, ut, "initial.ut")?,
            },
            InitialConfig::Random { seed, energy, active_modes } => {
                if !(*energy >= 0.0 && energy.is_finite()) {
                    return Err(CliError::validation("initial.energy", "must be nonnegative"));
                }
                let active = active_modes.unwrap_or(basis.total_modes());
                if active == 0 || active > basis.total_modes() {
                    return Err(CliError::validation(
                        "initial.active_modes",
                        format!("must lie in 1..={}", basis.total_modes()),
                    ));
                }
                random_state(&basis, &mut qwl_core::random::rng(*seed), active, *energy)
            }
        };
        Ok(Setup {
            basis,
            problem: Arc::new(problem),
            xi0,
            dt: t.dt,
            total: t.total,
            stride: t.record_stride,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
gamma = 1.0
output_dir = "out"
[domain]
dim = 1
modes_per_dim = 8
[initial]
type = "random"
seed = 3
energy = 1.0
[time]
dt = 0.01
T = 1.0
[experiment]
name = "simulate"
"#;

    #[test]
    fn parses_and_validates() {
        let c = parse(BASE, &[]).unwrap();
        let s = c.validate().unwrap();
        assert_eq!(s.basis.total_modes(), 8);
        assert_eq!(c.nonlinearity.kind, NonlinearityKind::Quintic);
    }

    #[test]
    fn overrides_apply_after_parse() {
        let c = parse(BASE, &["gamma=0.5".into(), "experiment.parameters.n_list=[2,4]".into(), "experiment.name=h2-check".into()]).unwrap();
        assert_eq!(c.gamma, 0.5);
        assert_eq!(c.experiment.parameters.n_list, Some(vec![2, 4]));
        assert_eq!(c.experiment.name, ExperimentName::H2Check);
    }

    #[test]
    fn bad_gamma_names_the_field() {
        let c = parse(BASE, &["gamma=-1".into()]).unwrap();
        match c.validate() {
            Err(CliError::Validation { field, .. }) => assert_eq!(field, "gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_initial_requires_seed() {
        let text = BASE.replace("seed = 3\n", "");
        let e = parse(&text, &[]).unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse(BASE, &["experiment.parameters.bogus=1".into()]).is_err());
        assert!(parse(BASE, &["experiment.name=nope".into()]).is_err());
    }

    #[test]
    fn misaligned_time_rejected() {
        let c = parse(BASE, &["time.dt=0.03".into()]).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Validation { field, .. }) if field == "time.dt"));
    }

    #[test]
    fn forcing_mode_out_of_range() {
        let c = parse(BASE, &["forcing.modes=[{index=[9], amplitude=1.0}]".into()]).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Validation { field, .. }) if field == "forcing.modes[0].index"));
    }
}
