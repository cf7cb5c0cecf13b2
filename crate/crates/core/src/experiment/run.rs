//! Experiment runners. Sweep points run in order; each one is written to its
//! own CSV and summarized in a flushed row before the next starts, so an
//! interrupted run resumes where it stopped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EpsP, ExperimentConfig, ExperimentKind, LearnerKind, Precision, Shots, TaskChoice};
use super::io::{Manifest, RunDir, Schema};
use crate::capacity::{
    bits_per_label, capacity_direct, default_grid, noise_point, precision_floor_from, w_budget, CapacityReport,
    EpsPoint, NoisePoint, PrecisionFloor, NORMALIZED_THRESHOLD,
};
use crate::elm::{Elm, ElmConfig};
use crate::error::{Error, Result};
use crate::fock::Ensemble;
use crate::learner::{evaluate, FqrcLearner, Learner, Readout};
use crate::readout::{design_matrix, fit, nmse, predict_all};
use crate::reservoir::ReservoirInput;
use crate::scalar::Real;
use crate::seed::{self, stream};
use crate::tasks::{make_dataset, Dataset, Function1d, TaskInput, TaskKind, TaskSpec, RANGE_TRAIN};

/// What a finished run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub eps_p_bits: Option<f64>,
    /// Capacity reports exceeding their `W` budget beyond tolerance.
    pub bound_anomalies: usize,
}

/// Seeds every random stream of a run is derived from.
pub fn resolved_seeds(cfg: &ExperimentConfig) -> BTreeMap<String, u64> {
    let s = cfg.seed;
    let mut m = BTreeMap::new();
    m.insert("experiment".to_string(), s);
    if let Some(v) = cfg.learner.interferometer_seed {
        m.insert("interferometer".into(), v);
    }
    if let Some(v) = cfg.learner.elm_seed {
        m.insert("elm_weights".into(), v);
    }
    m.insert("capacity".into(), seed::derive_recorded(s, &[stream::CAPACITY]));
    m.insert("calibration".into(), seed::derive_recorded(s, &[stream::CALIBRATION]));
    m.insert("dataset".into(), seed::derive_recorded(s, &[stream::TASK]));
    m.insert("train_eval".into(), seed::derive_recorded(s, &[stream::TRAIN_EVAL]));
    m.insert("test_eval".into(), seed::derive_recorded(s, &[stream::TEST_EVAL]));
    m
}

/// Resolve, validate and run `config`, writing into `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let cfg = config.clone().resolve();
    cfg.validate()?;
    let seeds = resolved_seeds(&cfg);
    let dir = RunDir::open(out, &Manifest::new(&cfg, seeds.clone()))?;
    let go = || match cfg.precision {
        Precision::F64 => Runner::<f64>::new(&cfg, &dir, seeds.clone()).run(),
        Precision::F32 => Runner::<f32>::new(&cfg, &dir, seeds.clone()).run(),
    };
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(go)
    } else {
        go()
    }
}

/// Re-run the config recorded in a run directory into `out`.
pub fn rerun(manifest_dir: &Path, out: &Path) -> Result<RunSummary> {
    run(&Manifest::load(manifest_dir)?.config, out)
}

/// A learner built for one sweep point.
enum Built<T: Real> {
    Fqrc(Box<FqrcLearner<T>>),
    Elm(Elm<T>),
}

impl<T: Real> Built<T> {
    fn as_learner(&self) -> &dyn Learner<T> {
        match self {
            Built::Fqrc(l) => l.as_ref(),
            Built::Elm(l) => l,
        }
    }
}

enum Inputs<T: Real> {
    Classical(Vec<Vec<f64>>),
    Quantum(Vec<Ensemble<T>>),
}

impl<T: Real> Inputs<T> {
    fn of(d: &Dataset) -> Result<Self> {
        if d.inputs.iter().all(|i| matches!(i, TaskInput::Classical { .. })) {
            return Ok(Inputs::Classical(
                d.inputs
                    .iter()
                    .map(|i| match i {
                        TaskInput::Classical { normalized, .. } => normalized.clone(),
                        TaskInput::Quantum(_) => unreachable!(),
                    })
                    .collect(),
            ));
        }
        d.inputs
            .par_iter()
            .map(|i| match i {
                TaskInput::Quantum(spec) => spec.build::<T>(),
                TaskInput::Classical { .. } => Err(Error::InvalidArgument("mixed classical and quantum inputs".into())),
            })
            .collect::<Result<Vec<_>>>()
            .map(Inputs::Quantum)
    }

    /// Design matrix of the learner over these inputs; classical inputs in
    /// `[0, 1]` are mapped affinely onto the learner's input domain.
    fn design(&self, built: &Built<T>, eval_seed: u64) -> Result<DMatrix<T>> {
        match self {
            Inputs::Classical(xs) => {
                let l = built.as_learner();
                let (lo, hi) = l.input_domain();
                let mapped: Vec<Vec<T>> =
                    xs.iter().map(|x| x.iter().map(|u| T::lit(lo + (hi - lo) * u)).collect()).collect();
                evaluate(l, &mapped, eval_seed)
            }
            Inputs::Quantum(states) => {
                let Built::Fqrc(l) = built else {
                    return Err(Error::InvalidArgument("quantum inputs need the fqrc learner".into()));
                };
                let rows = states
                    .par_iter()
                    .enumerate()
                    .map(|(i, e)| l.features_of(ReservoirInput::Ensemble(e), seed::derive(eval_seed, &[i as u64])))
                    .collect::<Result<Vec<_>>>()?;
                design_matrix(&rows)
            }
        }
    }
}

fn nmse_f64<T: Real>(pred: &DVector<T>, truth: &[f64]) -> Result<f64> {
    let t: Vec<T> = truth.iter().map(|v| T::lit(*v)).collect();
    Ok(nmse(pred.as_slice(), &t)?.as_f64())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CapacityRow {
    #[serde(rename = "N")]
    n: usize,
    eps_mean: f64,
    eps_stderr: f64,
    #[serde(rename = "C_direct_bits")]
    c_direct_bits: f64,
    #[serde(rename = "C_norm_bits")]
    c_norm_bits: Option<f64>,
    #[serde(rename = "W_bits")]
    w_bits: Option<f64>,
    n_labellings: usize,
    seed: u64,
}

fn capacity_schema(file: &str) -> Schema {
    Schema::new(
        file,
        "Memorization error eps(N) over random labellings and the capacity each grid point supports. The run's \
         capacity is the column maximum.",
        &[
            ("N", "int", "number of random input/label pairs"),
            ("eps_mean", "float", "mean absolute normalized training error over labellings"),
            ("eps_stderr", "float", "standard error of eps_mean"),
            ("C_direct_bits", "float", "N log2(1/eps_mean), eps floored at 2^-52"),
            ("C_norm_bits", "float", "N eps_p when eps_mean < 1e-10, else 0; empty while eps_p is unknown"),
            ("W_bits", "float", "parameter-precision budget W of the learner; empty while eps_p is unknown"),
            ("n_labellings", "int", "random labellings averaged"),
            ("seed", "int", "seed of the capacity measurement"),
        ],
    )
}

fn capacity_rows(report: &CapacityReport) -> Vec<CapacityRow> {
    report
        .points
        .iter()
        .map(|p| CapacityRow {
            n: p.n,
            eps_mean: p.eps_mean,
            eps_stderr: p.eps_stderr,
            c_direct_bits: (p.n as f64 * bits_per_label(p.eps_mean)).max(0.0),
            c_norm_bits: report.eps_p_bits.map(
                |e| {
                    if p.eps_mean < NORMALIZED_THRESHOLD {
                        p.n as f64 * e
                    } else {
                        0.0
                    }
                },
            ),
            w_bits: report.w_bits,
            n_labellings: report.n_labellings,
            seed: report.seed,
        })
        .collect()
}

fn report_from_rows(rows: Vec<CapacityRow>) -> Result<CapacityReport> {
    let first = rows.first().ok_or_else(|| Error::InvalidArgument("empty capacity table".into()))?;
    let (n_lab, seed) = (first.n_labellings, first.seed);
    let points = rows.iter().map(|r| EpsPoint { n: r.n, eps_mean: r.eps_mean, eps_stderr: r.eps_stderr }).collect();
    Ok(CapacityReport::from_points(points, n_lab, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SummaryRow {
    index: usize,
    value: f64,
    n_w: usize,
    shots: String,
    noise: f64,
    #[serde(rename = "C_direct_bits")]
    c_direct_bits: f64,
    argmax_n: Option<usize>,
    #[serde(rename = "C_norm_bits")]
    c_norm_bits: f64,
    #[serde(rename = "C_est_bits")]
    c_est_bits: f64,
    eps_p_bits: f64,
    #[serde(rename = "W_bits")]
    w_bits: f64,
    bound_satisfied: bool,
    bound_anomaly: bool,
    curve: String,
    seed: u64,
}

fn summary_schema(meaning: &str) -> Schema {
    let value = format!("swept value ({meaning})");
    Schema::new(
        "summary.csv",
        "One row per sweep point: capacity estimates, the W budget and the C <= W check.",
        &[
            ("index", "int", "sweep point index"),
            ("value", "float", value.as_str()),
            ("n_w", "int", "trainable readout weights"),
            ("shots", "string", "shots per feature estimate, or exact"),
            ("noise", "float", "additive uniform noise amplitude on the features"),
            ("C_direct_bits", "float", "max_N N log2(1/eps(N))"),
            ("argmax_n", "int", "maximizing N; empty when C_direct is 0"),
            ("C_norm_bits", "float", "largest N with eps < 1e-10, times eps_p"),
            ("C_est_bits", "float", "max(C_direct_bits, C_norm_bits)"),
            ("eps_p_bits", "float", "precision floor used for C_norm and W"),
            ("W_bits", "float", "parameter-precision budget"),
            ("bound_satisfied", "bool", "C_est <= W"),
            ("bound_anomaly", "bool", "C_est > 1.1 W"),
            ("curve", "string", "CSV with the eps(N) curve of this point"),
            ("seed", "int", "seed of the capacity measurement"),
        ],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NoiseRow {
    index: usize,
    amplitude: f64,
    #[serde(rename = "C_direct_bits")]
    c_direct_bits: f64,
    argmax_n: Option<usize>,
    bits_per_label: f64,
    curve: String,
    seed: u64,
}

fn noise_schema(file: &str) -> Schema {
    Schema::new(
        file,
        "Direct capacity versus additive feature noise; the low-noise plateau calibrates eps_p.",
        &[
            ("index", "int", "sweep point index"),
            ("amplitude", "float", "peak amplitude of the uniform feature noise"),
            ("C_direct_bits", "float", "max_N N log2(1/eps(N))"),
            ("argmax_n", "int", "maximizing N; empty when C_direct is 0"),
            ("bits_per_label", "float", "C_direct_bits / argmax_n"),
            ("curve", "string", "CSV with the eps(N) curve of this point"),
            ("seed", "int", "seed of the capacity measurement"),
        ],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EpsPRow {
    eps_p_bits: f64,
    knee_amplitude: f64,
    plateau_len: usize,
    n_w: usize,
    learner: String,
}

fn eps_p_schema(file: &str) -> Schema {
    Schema::new(
        file,
        "Calibrated precision floor eps_p: mean bits per label over the low-noise plateau.",
        &[
            ("eps_p_bits", "float", "precision floor in bits"),
            ("knee_amplitude", "float", "largest noise amplitude on the plateau"),
            ("plateau_len", "int", "sweep points on the plateau"),
            ("n_w", "int", "trainable weights of the calibration learner"),
            ("learner", "string", "calibration learner"),
        ],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TaskRow {
    n_w: usize,
    n_s_or_exact: String,
    nmse_train: f64,
    nmse_test: f64,
    seed: u64,
}

fn task_schema() -> Schema {
    Schema::new(
        "task.csv",
        "Task NMSE, mean((y - y_true)^2 / y_true^2), on the training and the independent test set.",
        &[
            ("n_w", "int", "trainable readout weights"),
            ("n_s_or_exact", "string", "shots per feature estimate, or exact"),
            ("nmse_train", "float", "NMSE on the training set"),
            ("nmse_test", "float", "NMSE on the test set"),
            ("seed", "int", "evaluation seed of this point"),
        ],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GeneralizeRow {
    #[serde(rename = "T_bits")]
    t_bits: f64,
    #[serde(rename = "C_bits")]
    c_bits: f64,
    nmse_train: f64,
    nmse_test: f64,
}

fn generalize_schema() -> Schema {
    Schema::new(
        "generalize.csv",
        "Training and test NMSE versus the training information T = N_T eps_p, against the learner's capacity.",
        &[
            ("T_bits", "float", "training points times eps_p"),
            ("C_bits", "float", "capacity estimate C_est of the learner"),
            ("nmse_train", "float", "NMSE on the training points"),
            ("nmse_test", "float", "NMSE on the test set"),
        ],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RangeRow {
    n_w: usize,
    n_s_or_exact: String,
    nmse_train: f64,
    nmse_test_in_range: f64,
    nmse_test_out_of_range: f64,
    curve: String,
    seed: u64,
}

fn range_schema() -> Schema {
    Schema::new(
        "range.csv",
        "1-D task trained on x in [0, 10] and tested on an extended range.",
        &[
            ("n_w", "int", "trainable readout weights"),
            ("n_s_or_exact", "string", "shots per feature estimate, or exact"),
            ("nmse_train", "float", "NMSE on the training set"),
            ("nmse_test_in_range", "float", "test NMSE over inputs inside the training range"),
            ("nmse_test_out_of_range", "float", "test NMSE over inputs outside the training range"),
            ("curve", "string", "CSV with test predictions"),
            ("seed", "int", "evaluation seed of this point"),
        ],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CurveRow {
    x: f64,
    target: f64,
    prediction: f64,
    in_train_range: bool,
}

fn curve_schema(file: &str) -> Schema {
    Schema::new(
        file,
        "Test predictions of a 1-D task, sorted by x.",
        &[
            ("x", "float", "raw task input"),
            ("target", "float", "true value"),
            ("prediction", "float", "trained readout output"),
            ("in_train_range", "bool", "x inside the training range"),
        ],
    )
}

struct Runner<'a, T> {
    cfg: &'a ExperimentConfig,
    dir: &'a RunDir,
    seeds: BTreeMap<String, u64>,
    anomalies: usize,
    eps_p: Option<f64>,
    _t: std::marker::PhantomData<T>,
}

impl<'a, T: Real> Runner<'a, T> {
    fn new(cfg: &'a ExperimentConfig, dir: &'a RunDir, seeds: BTreeMap<String, u64>) -> Self {
        Self { cfg, dir, seeds, anomalies: 0, eps_p: None, _t: std::marker::PhantomData }
    }

    fn seed(&self, name: &str) -> u64 {
        self.seeds[name]
    }

    fn run(mut self) -> Result<RunSummary> {
        match self.cfg.experiment {
            ExperimentKind::CapacityVsNw | ExperimentKind::CapacityVsNs | ExperimentKind::CapacityVsNoise => {
                self.capacity_sweep()?
            }
            ExperimentKind::ElmBaseline => {
                self.capacity_sweep()?;
                self.task_sweep()?;
            }
            ExperimentKind::EpsP => {
                let floor = self.eps_p_experiment()?;
                self.eps_p = Some(floor.eps_p_bits);
            }
            ExperimentKind::TaskNmse => self.task_sweep()?,
            ExperimentKind::Generalize => self.generalize()?,
            ExperimentKind::RangeGeneralize => self.range_generalize()?,
        }
        Ok(RunSummary { dir: self.dir.path().to_path_buf(), eps_p_bits: self.eps_p, bound_anomalies: self.anomalies })
    }

    fn build(&self, n_w: usize, shots: Shots, noise: f64) -> Result<Built<T>> {
        let l = &self.cfg.learner;
        match l.kind() {
            LearnerKind::Fqrc => {
                let readout = match (shots.count(), noise > 0.0) {
                    (None, false) => Readout::Exact,
                    (None, true) => Readout::Noisy { amplitude: noise },
                    (Some(shots), false) => Readout::Sampled { shots },
                    (Some(shots), true) => Readout::SampledNoisy { shots, amplitude: noise },
                };
                Ok(Built::Fqrc(Box::new(FqrcLearner::new(l.reservoir(n_w)?, readout)?)))
            }
            LearnerKind::Elm => Ok(Built::Elm(Elm::new(ElmConfig {
                inputs: l.modes,
                n_w,
                rho: l.rho,
                noise,
                seed: l.elm_seed.unwrap_or(0),
                norm: l.elm_norm,
            })?)),
        }
    }

    fn grid(&self, n_w: usize) -> Vec<usize> {
        if self.cfg.capacity.grid.is_empty() {
            default_grid(n_w)
        } else {
            self.cfg.capacity.grid.clone()
        }
    }

    /// `eps_p` from the config, or calibrated (and cached) on the reference
    /// ELM.
    fn eps_p(&mut self) -> Result<f64> {
        if let Some(e) = self.eps_p {
            return Ok(e);
        }
        let e = match self.cfg.capacity.eps_p {
            EpsP::Bits(b) => b,
            EpsP::Calibrate => {
                let c = &self.cfg.capacity;
                let n_w = c.calibration_n_w;
                let elm_seed = seed::derive(self.seed("calibration"), &[stream::ELM_WEIGHTS]);
                let make = |a: f64| -> Result<Built<T>> {
                    Ok(Built::Elm(Elm::new(ElmConfig {
                        inputs: 5,
                        n_w,
                        noise: a,
                        seed: elm_seed,
                        ..ElmConfig::default()
                    })?))
                };
                let amps = c.calibration_amplitudes.clone();
                let floor = self.precision_sweep(make, n_w, &amps, "calibration_", self.seed("calibration"), "elm")?;
                log::info!("calibrated eps_p = {:.2} bits", floor.eps_p_bits);
                floor.eps_p_bits
            }
        };
        self.eps_p = Some(e);
        Ok(e)
    }

    /// Noise sweep with per-point flushing; returns the detected floor.
    fn precision_sweep(
        &self,
        make: impl Fn(f64) -> Result<Built<T>>,
        n_w: usize,
        amplitudes: &[f64],
        prefix: &str,
        base_seed: u64,
        label: &str,
    ) -> Result<PrecisionFloor> {
        let eps_schema = eps_p_schema(&format!("{prefix}eps_p.csv"));
        let mut table = self.dir.table::<NoiseRow>(noise_schema(&format!("{prefix}noise.csv")))?;
        let mut points: Vec<NoisePoint> = Vec::with_capacity(amplitudes.len());
        for row in table.existing().to_vec() {
            let rows = self.dir.read_table::<CapacityRow>(&capacity_schema(&row.curve))?.ok_or_else(|| {
                Error::InvalidArgument(format!("resume: missing {} listed in {prefix}noise.csv", row.curve))
            })?;
            points.push(NoisePoint {
                amplitude: row.amplitude,
                report: report_from_rows(rows)?,
                bits: row.bits_per_label,
            });
        }
        let opts = self.cfg.capacity.options();
        let grid = self.grid(n_w);
        for (k, &a) in amplitudes.iter().enumerate().skip(points.len()) {
            log::info!("{prefix}noise point {k}: amplitude {a:e}");
            let built = make(a)?;
            let p = noise_point(built.as_learner(), a, &grid, &opts, base_seed)?;
            let curve = format!("{prefix}capacity_{k:02}.csv");
            self.dir.write_table(&capacity_schema(&curve), &capacity_rows(&p.report))?;
            table.append(&NoiseRow {
                index: k,
                amplitude: a,
                c_direct_bits: p.report.c_direct_bits,
                argmax_n: p.report.argmax_n,
                bits_per_label: p.bits,
                curve,
                seed: p.report.seed,
            })?;
            points.push(p);
        }
        let floor = precision_floor_from(points)?;
        self.dir.write_table(
            &eps_schema,
            &[EpsPRow {
                eps_p_bits: floor.eps_p_bits,
                knee_amplitude: floor.knee_amplitude,
                plateau_len: floor.plateau_len,
                n_w,
                learner: label.to_string(),
            }],
        )?;
        Ok(floor)
    }

    fn eps_p_experiment(&mut self) -> Result<PrecisionFloor> {
        let n_w = self.cfg.learner.n_w;
        let shots = self.cfg.learner.shots;
        let amps = self.cfg.sweep_values().to_vec();
        let label = format!("{:?}", self.cfg.learner.kind()).to_lowercase();
        self.precision_sweep(|a| self.build(n_w, shots, a), n_w, &amps, "", self.seed("capacity"), &label)
    }

    fn check(&mut self, report: &CapacityReport) {
        if let Some(b) = report.bound() {
            if b.anomaly {
                self.anomalies += 1;
            }
        }
    }

    fn capacity_sweep(&mut self) -> Result<()> {
        let eps_p = self.eps_p()?;
        let kind = self.cfg.experiment;
        let l = self.cfg.learner.clone();
        let mut table = self.dir.table::<SummaryRow>(summary_schema(kind.sweep_meaning()))?;
        self.anomalies += table.existing().iter().filter(|r| r.bound_anomaly).count();
        let opts = self.cfg.capacity.options();
        let done = table.existing().len();
        for (k, &v) in self.cfg.sweep_values().iter().enumerate().skip(done) {
            let (n_w, shots, noise) = match kind {
                ExperimentKind::CapacityVsNs => (l.n_w, Shots::Count(v as u64), l.noise),
                ExperimentKind::CapacityVsNoise => (l.n_w, l.shots, v),
                _ => (v as usize, l.shots, l.noise),
            };
            log::info!("{kind} point {k}: n_w {n_w}, shots {shots}, noise {noise:e}");
            let built = self.build(n_w, shots, noise)?;
            // Shared across points: each point sees the same tasks.
            let seed = self.seed("capacity");
            let w = w_budget(n_w, eps_p, shots.count(), noise)?;
            let report = capacity_direct(built.as_learner(), &self.grid(n_w), &opts, seed)?.with_budget(eps_p, w);
            self.check(&report);
            let curve = format!("capacity_{k:02}.csv");
            self.dir.write_table(&capacity_schema(&curve), &capacity_rows(&report))?;
            let bound = report.bound().expect("budget attached");
            table.append(&SummaryRow {
                index: k,
                value: v,
                n_w,
                shots: shots.to_string(),
                noise,
                c_direct_bits: report.c_direct_bits,
                argmax_n: report.argmax_n,
                c_norm_bits: report.c_norm_bits.unwrap_or(0.0),
                c_est_bits: report.c_est(),
                eps_p_bits: eps_p,
                w_bits: w,
                bound_satisfied: bound.satisfied,
                bound_anomaly: bound.anomaly,
                curve,
                seed,
            })?;
        }
        Ok(())
    }

    fn dataset(&self, range_mode: bool) -> Result<(Dataset, Dataset)> {
        let task = match self.cfg.task_choice() {
            TaskChoice::ClassicalNamed => TaskKind::ClassicalNamed,
            TaskChoice::Linear => TaskKind::Classical1d { function: Function1d::Linear },
            TaskChoice::Sinusoid => TaskKind::Classical1d { function: Function1d::Sinusoid },
            TaskChoice::QuantumOperator => {
                TaskKind::QuantumOperator { modes: self.cfg.learner.modes, cutoff: self.cfg.learner.cutoff() }
            }
        };
        make_dataset(&TaskSpec {
            task,
            n_train: self.cfg.task.n_train,
            n_test: self.cfg.task.n_test,
            range_mode,
            seed: self.seed("dataset"),
        })
    }

    /// Points of a task sweep: every readout crossed with every `n_w`.
    fn task_points(&self) -> Vec<(usize, Shots)> {
        let n_ws: Vec<usize> = self.cfg.sweep_values().iter().map(|v| *v as usize).collect();
        self.cfg.readouts().iter().flat_map(|r| n_ws.iter().map(move |n| (*n, *r))).collect()
    }

    fn eval_seeds(&self, k: usize) -> (u64, u64) {
        (seed::derive(self.seed("train_eval"), &[k as u64]), seed::derive(self.seed("test_eval"), &[k as u64]))
    }

    fn task_sweep(&mut self) -> Result<()> {
        let (train, test) = self.dataset(false)?;
        let (xtr, xte) = (Inputs::<T>::of(&train)?, Inputs::<T>::of(&test)?);
        let mut table = self.dir.table::<TaskRow>(task_schema())?;
        let noise = self.cfg.learner.noise;
        let done = table.existing().len();
        for (k, (n_w, shots)) in self.task_points().into_iter().enumerate().skip(done) {
            log::info!("task point {k}: n_w {n_w}, readout {shots}");
            let built = self.build(n_w, shots, noise)?;
            let (s_tr, s_te) = self.eval_seeds(k);
            let a = xtr.design(&built, s_tr)?;
            let b = xte.design(&built, s_te)?;
            let y = DVector::from_iterator(train.len(), train.targets.iter().map(|v| T::lit(*v)));
            let w = fit(&a, &y, &self.cfg.capacity.fit())?;
            table.append(&TaskRow {
                n_w,
                n_s_or_exact: shots.to_string(),
                nmse_train: nmse_f64(&predict_all(&w, &a)?, &train.targets)?,
                nmse_test: nmse_f64(&predict_all(&w, &b)?, &test.targets)?,
                seed: s_tr,
            })?;
        }
        Ok(())
    }

    /// Capacity of the configured learner, cached in `capacity.csv`.
    fn learner_capacity(&mut self) -> Result<CapacityReport> {
        let eps_p = self.eps_p()?;
        let l = self.cfg.learner.clone();
        let schema = capacity_schema("capacity.csv");
        let w = w_budget(l.n_w, eps_p, l.shots.count(), l.noise)?;
        let report = match self.dir.read_table::<CapacityRow>(&schema)? {
            Some(rows) => report_from_rows(rows)?,
            None => {
                let built = self.build(l.n_w, l.shots, l.noise)?;
                capacity_direct(
                    built.as_learner(),
                    &self.grid(l.n_w),
                    &self.cfg.capacity.options(),
                    self.seed("capacity"),
                )?
            }
        }
        .with_budget(eps_p, w);
        self.check(&report);
        self.dir.write_table(&schema, &capacity_rows(&report))?;
        Ok(report)
    }

    fn generalize(&mut self) -> Result<()> {
        let eps_p = self.eps_p()?;
        let c = self.learner_capacity()?.c_est();
        let l = self.cfg.learner.clone();
        let (train, test) = self.dataset(false)?;
        let built = self.build(l.n_w, l.shots, l.noise)?;
        let (s_tr, s_te) = self.eval_seeds(0);
        let a_all = Inputs::<T>::of(&train)?.design(&built, s_tr)?;
        let b = Inputs::<T>::of(&test)?.design(&built, s_te)?;
        let mut table = self.dir.table::<GeneralizeRow>(generalize_schema())?;
        let done = table.existing().len();
        for (k, &v) in self.cfg.sweep_values().iter().enumerate().skip(done) {
            let n_t = v as usize;
            log::info!("generalize point {k}: {n_t} training points");
            let a = a_all.rows(0, n_t).into_owned();
            let y = DVector::from_iterator(n_t, train.targets[..n_t].iter().map(|v| T::lit(*v)));
            let w = fit(&a, &y, &self.cfg.capacity.fit())?;
            table.append(&GeneralizeRow {
                t_bits: n_t as f64 * eps_p,
                c_bits: c,
                nmse_train: nmse_f64(&predict_all(&w, &a)?, &train.targets[..n_t])?,
                nmse_test: nmse_f64(&predict_all(&w, &b)?, &test.targets)?,
            })?;
        }
        Ok(())
    }

    fn range_generalize(&mut self) -> Result<()> {
        let (train, test) = self.dataset(true)?;
        let raw = |d: &Dataset| -> Vec<f64> {
            d.inputs
                .iter()
                .map(|i| match i {
                    TaskInput::Classical { raw, .. } => raw[0],
                    TaskInput::Quantum(_) => f64::NAN,
                })
                .collect()
        };
        let x_test = raw(&test);
        let inside: Vec<bool> = x_test.iter().map(|x| (RANGE_TRAIN.0..=RANGE_TRAIN.1).contains(x)).collect();
        let (xtr, xte) = (Inputs::<T>::of(&train)?, Inputs::<T>::of(&test)?);
        let mut table = self.dir.table::<RangeRow>(range_schema())?;
        let noise = self.cfg.learner.noise;
        let done = table.existing().len();
        for (k, (n_w, shots)) in self.task_points().into_iter().enumerate().skip(done) {
            log::info!("range point {k}: n_w {n_w}, readout {shots}");
            let built = self.build(n_w, shots, noise)?;
            let (s_tr, s_te) = self.eval_seeds(k);
            let a = xtr.design(&built, s_tr)?;
            let b = xte.design(&built, s_te)?;
            let y = DVector::from_iterator(train.len(), train.targets.iter().map(|v| T::lit(*v)));
            let w = fit(&a, &y, &self.cfg.capacity.fit())?;
            let pred: Vec<f64> = predict_all(&w, &b)?.iter().map(|v| v.as_f64()).collect();
            let subset = |want: bool| -> Result<f64> {
                let (p, t): (Vec<f64>, Vec<f64>) =
                    (0..test.len()).filter(|&i| inside[i] == want).map(|i| (pred[i], test.targets[i])).unzip();
                if t.is_empty() {
                    return Ok(f64::NAN);
                }
                nmse(&p, &t)
            };
            let mut curve: Vec<CurveRow> = (0..test.len())
                .map(|i| CurveRow {
                    x: x_test[i],
                    target: test.targets[i],
                    prediction: pred[i],
                    in_train_range: inside[i],
                })
                .collect();
            curve.sort_by(|p, q| p.x.total_cmp(&q.x));
            let file = format!("curve_{k:02}.csv");
            self.dir.write_table(&curve_schema(&file), &curve)?;
            table.append(&RangeRow {
                n_w,
                n_s_or_exact: shots.to_string(),
                nmse_train: nmse_f64(&predict_all(&w, &a)?, &train.targets)?,
                nmse_test_in_range: subset(true)?,
                nmse_test_out_of_range: subset(false)?,
                curve: file,
                seed: s_tr,
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::ExperimentConfig;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.capacity.n_labellings = 3;
        c.capacity.eps_p = EpsP::Bits(45.0);
        c.task.n_train = 40;
        c.task.n_test = 30;
        c
    }

    #[test]
    fn capacity_run_writes_tables_and_resumes_identically() {
        let mut c = small(ExperimentKind::CapacityVsNw);
        c.sweep.values = Some(vec![3.0, 5.0]);
        let d1 = tempfile::tempdir().unwrap();
        run(&c, d1.path()).unwrap();
        let summary = std::fs::read_to_string(d1.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 3);
        assert!(d1.path().join("summary.schema.json").exists());
        assert!(d1.path().join("capacity_01.csv").exists());

        // Drop the last point and resume.
        let d2 = tempfile::tempdir().unwrap();
        run(&c, d2.path()).unwrap();
        let lines: Vec<&str> = summary.lines().take(2).collect();
        std::fs::write(d2.path().join("summary.csv"), lines.join("\n") + "\n").unwrap();
        std::fs::remove_file(d2.path().join("capacity_01.csv")).unwrap();
        run(&c, d2.path()).unwrap();
        for f in ["summary.csv", "capacity_00.csv", "capacity_01.csv"] {
            assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn rerun_from_manifest_is_byte_identical() {
        let mut c = small(ExperimentKind::TaskNmse);
        c.sweep.values = Some(vec![4.0]);
        c.sweep.readouts = Some(vec![Shots::Exact, Shots::Count(50)]);
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(&c, d1.path()).unwrap();
        rerun(d1.path(), d2.path()).unwrap();
        let a = std::fs::read(d1.path().join("task.csv")).unwrap();
        assert_eq!(a, std::fs::read(d2.path().join("task.csv")).unwrap());
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
    }

    #[test]
    fn range_run_reports_both_ranges() {
        let mut c = small(ExperimentKind::RangeGeneralize);
        c.sweep.values = Some(vec![8.0]);
        let d = tempfile::tempdir().unwrap();
        run(&c, d.path()).unwrap();
        let text = std::fs::read_to_string(d.path().join("range.csv")).unwrap();
        assert!(text.starts_with("n_w,n_s_or_exact,nmse_train,nmse_test_in_range,nmse_test_out_of_range"));
        assert!(d.path().join("curve_00.csv").exists());
    }
}
