//! Experiment configuration: a TOML document with per-section defaults,
//! resolution of kind-dependent defaults, and validation with field paths.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capacity::{default_noise_sweep, log_sweep, CapacityOptions, LabelMode, DEFAULT_LABELLINGS};
use crate::elm::WeightNorm;
use crate::error::{Error, Result};
use crate::fock::{SpaceSpec, R_MAX_DEFAULT};
use crate::readout::FitOptions;
use crate::reservoir::{ReservoirConfig, LEAKAGE_THRESHOLD_DEFAULT};
use crate::tasks::{DEFAULT_TEST, DEFAULT_TRAIN};

/// Fock cutoff for classical inputs (occupations 0..=3).
pub const CLASSICAL_CUTOFF: usize = 4;
/// Fock cutoff for injected quantum states. At 4, random inputs put enough
/// weight on total photon numbers >= the cutoff that the truncated
/// interferometer loses up to half the norm; at 6 the loss stays below the
/// default leakage threshold.
pub const QUANTUM_TASK_CUTOFF: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CapacityVsNw,
    CapacityVsNs,
    CapacityVsNoise,
    EpsP,
    TaskNmse,
    Generalize,
    RangeGeneralize,
    ElmBaseline,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::CapacityVsNw,
        Self::CapacityVsNs,
        Self::CapacityVsNoise,
        Self::EpsP,
        Self::TaskNmse,
        Self::Generalize,
        Self::RangeGeneralize,
        Self::ElmBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CapacityVsNw => "capacity-vs-nw",
            Self::CapacityVsNs => "capacity-vs-ns",
            Self::CapacityVsNoise => "capacity-vs-noise",
            Self::EpsP => "eps-p",
            Self::TaskNmse => "task-nmse",
            Self::Generalize => "generalize",
            Self::RangeGeneralize => "range-generalize",
            Self::ElmBaseline => "elm-baseline",
        }
    }

    /// What `sweep.values` means for this kind.
    pub fn sweep_meaning(self) -> &'static str {
        match self {
            Self::CapacityVsNw | Self::TaskNmse | Self::RangeGeneralize | Self::ElmBaseline => "n_w",
            Self::CapacityVsNs => "shots",
            Self::CapacityVsNoise | Self::EpsP => "noise amplitude",
            Self::Generalize => "n_train",
        }
    }

    fn default_learner(self) -> LearnerKind {
        match self {
            Self::EpsP | Self::ElmBaseline => LearnerKind::Elm,
            _ => LearnerKind::Fqrc,
        }
    }

    fn default_sweep(self) -> Vec<f64> {
        let nw = vec![5.0, 10.0, 15.0, 20.0, 25.0, 31.0];
        match self {
            Self::CapacityVsNw | Self::TaskNmse | Self::ElmBaseline => nw,
            Self::CapacityVsNs => vec![1e2, 1e3, 1e4, 1e5],
            Self::CapacityVsNoise => log_sweep(1e-20, 1e2, 23),
            Self::EpsP => default_noise_sweep(),
            Self::Generalize => {
                vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 50.0, 62.0, 80.0, 100.0, 150.0, 200.0, 300.0, 500.0]
            }
            Self::RangeGeneralize => vec![31.0],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Config {
            path: "experiment".into(),
            message: format!("unknown experiment `{s}`; expected one of {}", Self::ALL.map(|k| k.name()).join(", ")),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Fqrc,
    Elm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ExactTag {
    Exact,
}

/// A shot count, or `"exact"` for the exact expectation values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Shots {
    Count(u64),
    #[serde(with = "exact_tag")]
    Exact,
}

mod exact_tag {
    use super::ExactTag;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        ExactTag::Exact.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        ExactTag::deserialize(d).map(|_| ())
    }
}

impl Shots {
    pub fn count(self) -> Option<usize> {
        match self {
            Shots::Count(n) => Some(n as usize),
            Shots::Exact => None,
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Count(n) => write!(f, "{n}"),
            Shots::Exact => f.write_str("exact"),
        }
    }
}

/// `eps_p` in bits, or `"calibrate"` to measure it in the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsP {
    Bits(f64),
    #[default]
    #[serde(with = "calibrate_tag")]
    Calibrate,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CalibrateTag {
    Calibrate,
}

mod calibrate_tag {
    use super::CalibrateTag;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        CalibrateTag::Calibrate.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        CalibrateTag::deserialize(d).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSpec {
    /// Resolved from the experiment kind when absent.
    pub kind: Option<LearnerKind>,
    pub n_w: usize,
    /// Reservoir readout shots (fqrc only).
    pub shots: Shots,
    /// Additive uniform noise amplitude on the features.
    pub noise: f64,
    pub modes: usize,
    /// Resolved from the task when absent: 4 for classical inputs,
    /// [`QUANTUM_TASK_CUTOFF`] for injected quantum states.
    pub cutoff: Option<usize>,
    pub r_max: f64,
    pub leakage_threshold: f64,
    /// Resolved from the experiment seed when absent.
    pub interferometer_seed: Option<u64>,
    pub quantum_input_squeezing: Vec<f64>,
    pub rho: f64,
    pub elm_norm: WeightNorm,
    /// Resolved from the experiment seed when absent.
    pub elm_seed: Option<u64>,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        Self {
            kind: None,
            n_w: 31,
            shots: Shots::Exact,
            noise: 0.0,
            modes: 5,
            cutoff: None,
            r_max: R_MAX_DEFAULT,
            leakage_threshold: LEAKAGE_THRESHOLD_DEFAULT,
            interferometer_seed: None,
            quantum_input_squeezing: Vec::new(),
            rho: 1.0,
            elm_norm: WeightNorm::MaxAbs,
            elm_seed: None,
        }
    }
}

impl LearnerSpec {
    pub fn kind(&self) -> LearnerKind {
        self.kind.unwrap_or(LearnerKind::Fqrc)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff.unwrap_or(CLASSICAL_CUTOFF)
    }

    pub fn reservoir(&self, n_w: usize) -> Result<ReservoirConfig> {
        Ok(ReservoirConfig {
            space: SpaceSpec::new(self.modes, self.cutoff())?,
            r_max: self.r_max,
            interferometer_seed: self.interferometer_seed.unwrap_or(0),
            n_w,
            leakage_threshold: self.leakage_threshold,
            quantum_input_squeezing: self.quantum_input_squeezing.clone(),
        })
    }

    pub fn max_features(&self) -> usize {
        (1usize << self.modes.min(usize::BITS as usize - 1)) - 1
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Meaning depends on the experiment kind; resolved when absent.
    pub values: Option<Vec<f64>>,
    /// Readouts compared by task experiments; resolved when absent.
    pub readouts: Option<Vec<Shots>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySpec {
    pub n_labellings: usize,
    pub label_mode: LabelMode,
    /// Grid of `N`; empty selects `{1..n_w+5} U {2 n_w}` per sweep point.
    pub grid: Vec<usize>,
    pub eps_p: EpsP,
    /// Hidden units of the reference ELM used to calibrate `eps_p`.
    pub calibration_n_w: usize,
    pub calibration_amplitudes: Vec<f64>,
    pub rcond: Option<f64>,
    pub ridge: f64,
}

impl Default for CapacitySpec {
    fn default() -> Self {
        Self {
            n_labellings: DEFAULT_LABELLINGS,
            label_mode: LabelMode::Random,
            grid: Vec::new(),
            eps_p: EpsP::Calibrate,
            calibration_n_w: 31,
            calibration_amplitudes: default_noise_sweep(),
            rcond: None,
            ridge: 0.0,
        }
    }
}

impl CapacitySpec {
    pub fn fit(&self) -> FitOptions {
        FitOptions { rcond: self.rcond, ridge: self.ridge }
    }

    pub fn options(&self) -> CapacityOptions {
        CapacityOptions { n_labellings: self.n_labellings, label_mode: self.label_mode, fit: self.fit() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskChoice {
    ClassicalNamed,
    Linear,
    Sinusoid,
    QuantumOperator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    /// Resolved from the experiment kind when absent.
    pub kind: Option<TaskChoice>,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self { kind: None, n_train: DEFAULT_TRAIN, n_test: DEFAULT_TEST }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[serde(default)]
    pub threads: usize,
    /// Output directory; the CLI falls back to `--out` or the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub learner: LearnerSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub capacity: CapacitySpec,
    #[serde(default)]
    pub task: TaskSection,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: 0,
            precision: Precision::F64,
            threads: 0,
            out: None,
            learner: LearnerSpec::default(),
            sweep: SweepSpec::default(),
            capacity: CapacitySpec::default(),
            task: TaskSection::default(),
        }
    }

    /// Parse without resolving; errors name the offending field.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::Config { path: String::new(), message: e.to_string() })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config { path: if path == "." { String::new() } else { path }, message: e.into_inner().to_string() }
        })
    }

    /// Fill every kind-dependent default and the derived seeds.
    pub fn resolve(mut self) -> Self {
        let kind = self.experiment;
        self.learner.kind.get_or_insert(kind.default_learner());
        if self.learner.kind() == LearnerKind::Fqrc {
            self.learner
                .interferometer_seed
                .get_or_insert(crate::seed::derive_recorded(self.seed, &[crate::seed::stream::INTERFEROMETER]));
        } else {
            self.learner
                .elm_seed
                .get_or_insert(crate::seed::derive_recorded(self.seed, &[crate::seed::stream::ELM_WEIGHTS]));
        }
        self.sweep.values.get_or_insert_with(|| kind.default_sweep());
        self.sweep.readouts.get_or_insert_with(|| match (kind, self.learner.kind()) {
            (ExperimentKind::TaskNmse, LearnerKind::Fqrc) => {
                vec![Shots::Exact, Shots::Count(1000)]
            }
            _ => vec![self.learner.shots],
        });
        let task = *self.task.kind.get_or_insert(match kind {
            ExperimentKind::RangeGeneralize => TaskChoice::Sinusoid,
            _ => TaskChoice::ClassicalNamed,
        });
        self.learner.cutoff.get_or_insert(match task {
            TaskChoice::QuantumOperator => QUANTUM_TASK_CUTOFF,
            _ => CLASSICAL_CUTOFF,
        });
        self
    }

    pub fn sweep_values(&self) -> &[f64] {
        self.sweep.values.as_deref().unwrap_or(&[])
    }

    pub fn readouts(&self) -> &[Shots] {
        self.sweep.readouts.as_deref().unwrap_or(&[])
    }

    pub fn task_choice(&self) -> TaskChoice {
        self.task.kind.unwrap_or(TaskChoice::ClassicalNamed)
    }

    /// Whether the run needs `eps_p` (and calibrates it unless given).
    pub fn needs_eps_p(&self) -> bool {
        !matches!(self.experiment, ExperimentKind::TaskNmse | ExperimentKind::RangeGeneralize)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Semantic checks on a resolved config.
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Err(Error::Config { path: path.into(), message });
        let l = &self.learner;
        let kind = self.experiment;
        // Only the reservoir is bounded by its number of photon-number products.
        let max_nw = if l.kind() == LearnerKind::Fqrc { l.max_features() } else { usize::MAX };
        let check_nw = |path: &str, n: usize| {
            if n == 0 {
                return bad(path, "n_w must be >= 1".into());
            }
            if n > max_nw {
                return bad(path, format!("n_w = {n} outside [1, 2^modes - 1 = {max_nw}]"));
            }
            Ok(())
        };
        check_nw("learner.n_w", l.n_w)?;
        if l.kind() == LearnerKind::Fqrc {
            l.reservoir(l.n_w).and_then(|r| r.validate()).or_else(|e| bad("learner", e.to_string()))?;
        } else {
            if !(l.rho > 0.0 && l.rho.is_finite()) {
                return bad("learner.rho", format!("must be finite and > 0, got {}", l.rho));
            }
            if l.shots != Shots::Exact {
                return bad("learner.shots", "shot sampling applies to the fqrc learner only".into());
            }
        }
        if !(l.noise >= 0.0 && l.noise.is_finite()) {
            return bad("learner.noise", format!("must be finite and >= 0, got {}", l.noise));
        }
        if l.shots == Shots::Count(0) {
            return bad("learner.shots", "must be >= 1 or \"exact\"".into());
        }

        let values = self.sweep_values();
        if values.is_empty() {
            return bad("sweep.values", "must not be empty".into());
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return bad("sweep.values", format!("entries must be finite and > 0, got {v}"));
        }
        let integral = matches!(kind.sweep_meaning(), "n_w" | "shots" | "n_train");
        if integral {
            if let Some(v) = values.iter().find(|v| v.fract() != 0.0) {
                return bad("sweep.values", format!("{} values must be integers, got {v}", kind.sweep_meaning()));
            }
        }
        if kind.sweep_meaning() == "n_w" {
            for v in values {
                check_nw("sweep.values", *v as usize)?;
            }
        }
        if matches!(kind, ExperimentKind::CapacityVsNs) && l.kind() != LearnerKind::Fqrc {
            return bad("learner.kind", "capacity-vs-ns needs the fqrc learner".into());
        }
        if matches!(kind, ExperimentKind::EpsP) && (values.len() < 2 || values.windows(2).any(|w| w[0] >= w[1])) {
            return bad("sweep.values", "eps-p needs >= 2 strictly increasing amplitudes".into());
        }
        if kind == ExperimentKind::Generalize && values.iter().any(|v| *v as usize > self.task.n_train) {
            return bad("sweep.values", format!("n_train values must not exceed task.n_train = {}", self.task.n_train));
        }
        let readouts = self.readouts();
        if readouts.is_empty() {
            return bad("sweep.readouts", "must not be empty".into());
        }
        if readouts.contains(&Shots::Count(0)) {
            return bad("sweep.readouts", "shot counts must be >= 1".into());
        }
        if l.kind() == LearnerKind::Elm && readouts.iter().any(|r| *r != Shots::Exact) {
            return bad("sweep.readouts", "the elm learner has no shot readout".into());
        }

        let c = &self.capacity;
        if c.n_labellings == 0 {
            return bad("capacity.n_labellings", "must be >= 1".into());
        }
        if !c.grid.is_empty() && (c.grid[0] == 0 || c.grid.windows(2).any(|w| w[0] >= w[1])) {
            return bad("capacity.grid", "must be positive and strictly increasing".into());
        }
        if let EpsP::Bits(b) = c.eps_p {
            if !(b > 0.0 && b.is_finite()) {
                return bad("capacity.eps_p", format!("must be > 0 bits or \"calibrate\", got {b}"));
            }
        }
        if c.calibration_n_w == 0 {
            return bad("capacity.calibration_n_w", "must be >= 1".into());
        }
        let amps = &c.calibration_amplitudes;
        if amps.len() < 2 || amps[0] <= 0.0 || amps.windows(2).any(|w| w[0] >= w[1]) {
            return bad("capacity.calibration_amplitudes", "need >= 2 positive increasing amplitudes".into());
        }
        c.fit().validate().or_else(|e| bad("capacity", e.to_string()))?;

        let t = &self.task;
        if t.n_train == 0 || t.n_test == 0 {
            return bad("task", "n_train and n_test must be >= 1".into());
        }
        let task = self.task_choice();
        if task == TaskChoice::QuantumOperator {
            if l.kind() != LearnerKind::Fqrc {
                return bad("task.kind", "quantum inputs need the fqrc learner".into());
            }
            if l.modes < 3 || l.cutoff() < 3 {
                return bad("task.kind", "quantum_operator needs >= 3 modes and cutoff >= 3".into());
            }
        }
        if kind == ExperimentKind::RangeGeneralize && !matches!(task, TaskChoice::Linear | TaskChoice::Sinusoid) {
            return bad("task.kind", "range-generalize needs a 1-D task (linear or sinusoid)".into());
        }
        if kind == ExperimentKind::Generalize && task == TaskChoice::QuantumOperator {
            return bad("task.kind", "generalize uses classical tasks".into());
        }
        if matches!(task, TaskChoice::ClassicalNamed) && l.modes != 5 {
            return bad("learner.modes", "classical_named has five inputs and needs five modes".into());
        }
        Ok(())
    }
}

/// Outcome of validating a config document.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub config: ExperimentConfig,
    /// Dotted paths of every field filled by a default.
    pub defaulted: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "config OK: experiment {}", self.config.experiment)?;
        if self.defaulted.is_empty() {
            return writeln!(f, "no defaulted fields");
        }
        writeln!(f, "defaulted fields:")?;
        let resolved: toml::Table = toml::Table::try_from(&self.config).expect("config serializes");
        for path in &self.defaulted {
            let value = lookup(&resolved, path).map_or_else(String::new, |v| v.to_string());
            writeln!(f, "  {path} = {value}")?;
        }
        Ok(())
    }
}

fn lookup<'a>(table: &'a toml::Table, path: &str) -> Option<&'a toml::Value> {
    let mut parts = path.split('.');
    let mut v = table.get(parts.next()?)?;
    for p in parts {
        v = v.as_table()?.get(p)?;
    }
    Some(v)
}

fn leaf_paths(table: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => leaf_paths(t, &path, out),
            _ => out.push(path),
        }
    }
}

/// Parse, resolve and validate a config document, listing the defaulted
/// fields.
pub fn validate_document(text: &str) -> Result<ValidationReport> {
    let raw: toml::Table =
        text.parse().map_err(|e: toml::de::Error| Error::Config { path: String::new(), message: e.to_string() })?;
    let config = ExperimentConfig::parse(text)?.resolve();
    config.validate()?;
    Ok(ValidationReport { defaulted: defaulted_fields(&raw, &config), config })
}

/// Leaf paths present in the resolved config but absent from `raw`.
pub fn defaulted_fields(raw: &toml::Table, config: &ExperimentConfig) -> Vec<String> {
    let resolved = toml::Table::try_from(config).expect("config serializes");
    let mut paths = Vec::new();
    leaf_paths(&resolved, "", &mut paths);
    paths.retain(|p| lookup(raw, p).is_none());
    paths
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_lists_defaults() {
        let r = validate_document("experiment = \"capacity-vs-nw\"\n").unwrap();
        assert!(r.defaulted.contains(&"seed".to_string()));
        assert!(r.defaulted.contains(&"learner.n_w".to_string()));
        assert!(r.defaulted.contains(&"sweep.values".to_string()));
        assert!(!r.defaulted.contains(&"experiment".to_string()));
        assert_eq!(r.config.sweep_values(), &[5.0, 10.0, 15.0, 20.0, 25.0, 31.0]);
        assert!(r.to_string().contains("seed = 0"));
    }

    #[test]
    fn given_fields_are_not_defaulted() {
        let r = validate_document("experiment = \"eps-p\"\nseed = 4\n[learner]\nrho = 0.5\n").unwrap();
        assert!(!r.defaulted.contains(&"seed".to_string()));
        assert!(!r.defaulted.contains(&"learner.rho".to_string()));
        assert_eq!(r.config.learner.kind, Some(LearnerKind::Elm));
    }

    #[test]
    fn oversized_n_w_is_rejected_with_path() {
        let e = validate_document("experiment = \"task-nmse\"\n[learner]\nn_w = 32\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "learner.n_w"), "{e}");
        let e = validate_document("experiment = \"capacity-vs-nw\"\n[sweep]\nvalues = [5, 40]\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "sweep.values"), "{e}");
    }

    #[test]
    fn schema_errors_carry_paths() {
        let e = ExperimentConfig::parse("experiment = \"eps-p\"\n[learner]\nrhoo = 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path.starts_with("learner")), "{e}");
        let e = ExperimentConfig::parse("experiment = \"nope\"\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "experiment"), "{e}");
        let e = ExperimentConfig::parse("experiment = \"eps-p\"\n[capacity]\nn_labellings = \"x\"\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "capacity.n_labellings"), "{e}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::new(ExperimentKind::TaskNmse).resolve();
        let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.readouts(), &[Shots::Exact, Shots::Count(1000)]);
        assert!(validate_document(&c.to_toml()).unwrap().defaulted.is_empty());
    }

    #[test]
    fn eps_p_accepts_number_or_calibrate() {
        let c = ExperimentConfig::parse("experiment = \"generalize\"\n[capacity]\neps_p = 45.0\n").unwrap();
        assert_eq!(c.capacity.eps_p, EpsP::Bits(45.0));
        let c = ExperimentConfig::parse("experiment = \"generalize\"\n[capacity]\neps_p = \"calibrate\"\n").unwrap();
        assert_eq!(c.capacity.eps_p, EpsP::Calibrate);
    }
}
