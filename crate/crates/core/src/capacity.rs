//! Memory-capacity measurement: random-access-memory emulation tasks, the
//! memorization error `eps(N)`, the capacity estimates built from it, the
//! precision-floor calibration, and `C <= W` bookkeeping.

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{evaluate, Learner};
use crate::readout::{design_matrix, fit_many, mean_abs_norm_err, FitOptions};
use crate::scalar::Real;
use crate::seed;

/// Labels are drawn uniformly from this interval.
pub const LABEL_RANGE: (f64, f64) = (0.1, 1.1);
/// Floor applied to `eps` before taking `log2`.
pub const EPS_FLOOR: f64 = f64::EPSILON;
/// Default number of random labellings per grid point.
pub const DEFAULT_LABELLINGS: usize = 30;
/// Memorization threshold for the precision-normalized estimate.
pub const NORMALIZED_THRESHOLD: f64 = 1e-10;
/// Relative excess of `C` over `W` tolerated as estimation error.
pub const BOUND_TOLERANCE: f64 = 0.1;
/// Largest relative change of `C` per decade of noise inside the plateau.
pub const PLATEAU_TOLERANCE: f64 = 0.05;

/// How labels are assigned to the `N` inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    #[default]
    Random,
    /// Every label equal.
    AllIdentical,
    /// Every label equal except the last.
    AllButOne,
}

/// `N` pairwise-distinct inputs with `n_labellings` label vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct RamTask<T> {
    pub inputs: Vec<Vec<T>>,
    /// `labels[k][i]`: label of input `i` in labelling `k`.
    pub labels: Vec<Vec<T>>,
    pub seed: u64,
}

fn draw_label(rng: &mut seed::Rng) -> f64 {
    rng.random_range(LABEL_RANGE.0..LABEL_RANGE.1)
}

fn labelling(n: usize, mode: LabelMode, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    match mode {
        LabelMode::Random => loop {
            let labels: Vec<f64> = (0..n).map(|_| draw_label(&mut rng)).collect();
            if pairwise_distinct(&labels) {
                break labels;
            }
        },
        LabelMode::AllIdentical => vec![draw_label(&mut rng); n],
        LabelMode::AllButOne => {
            let common = draw_label(&mut rng);
            let mut labels = vec![common; n];
            if n > 1 {
                labels[n - 1] = loop {
                    let v = draw_label(&mut rng);
                    if v != common {
                        break v;
                    }
                };
            }
            labels
        }
    }
}

fn pairwise_distinct(v: &[f64]) -> bool {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// Build a task whose inputs are uniform over `domain^dim`.
pub fn gen_ram_task<T: Real>(
    n: usize,
    dim: usize,
    domain: (f64, f64),
    n_labellings: usize,
    mode: LabelMode,
    seed: u64,
) -> Result<RamTask<T>> {
    if n == 0 || n_labellings == 0 || dim == 0 {
        return Err(Error::InvalidArgument("task needs N >= 1, dim >= 1 and at least one labelling".into()));
    }
    if !(domain.0 < domain.1) {
        return Err(Error::InvalidArgument(format!("empty input domain [{}, {}]", domain.0, domain.1)));
    }
    let mut rng = seed::rng(seed::derive(seed, &[seed::stream::TASK]));
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while inputs.len() < n {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(domain.0..=domain.1)).collect();
        if !inputs.contains(&x) {
            inputs.push(x);
        }
    }
    let labels = (0..n_labellings)
        .map(|k| labelling(n, mode, seed::derive(seed, &[seed::stream::LABELS, k as u64])))
        .map(|l| l.into_iter().map(T::lit).collect())
        .collect();
    let inputs = inputs.into_iter().map(|x| x.into_iter().map(T::lit).collect()).collect();
    Ok(RamTask { inputs, labels, seed })
}

/// `eps(N)` averaged over labellings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsPoint {
    pub n: usize,
    pub eps_mean: f64,
    pub eps_stderr: f64,
}

/// Options shared by every capacity measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityOptions {
    pub n_labellings: usize,
    #[serde(default)]
    pub label_mode: LabelMode,
    #[serde(default)]
    pub fit: FitOptions,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self { n_labellings: DEFAULT_LABELLINGS, label_mode: LabelMode::Random, fit: FitOptions::default() }
    }
}

/// Train the readout on `N` random pairs for every labelling and report the
/// mean absolute normalized error on the same pairs.
///
/// Non-deterministic learners are evaluated afresh for every labelling, once
/// to train and once to test, so each labelling sees its own noise.
pub fn eps_of_n<T: Real, L: Learner<T> + ?Sized>(
    learner: &L,
    n: usize,
    opts: &CapacityOptions,
    seed: u64,
) -> Result<EpsPoint> {
    let task =
        gen_ram_task::<T>(n, learner.input_dim(), learner.input_domain(), opts.n_labellings, opts.label_mode, seed)?;
    let errs = if learner.is_deterministic() {
        let features = evaluate(learner, &task.inputs, seed::derive(seed, &[seed::stream::TRAIN_EVAL]))?;
        let targets = DMatrix::from_fn(n, task.labels.len(), |i, k| task.labels[k][i]);
        let pred = &features * fit_many(&features, &targets, &opts.fit)?;
        (0..task.labels.len())
            .map(|k| {
                let p: Vec<T> = pred.column(k).iter().copied().collect();
                Ok(mean_abs_norm_err(&p, &task.labels[k])?.as_f64())
            })
            .collect::<Result<Vec<f64>>>()?
    } else {
        let n_lab = task.labels.len();
        // evals[i][2k] trains labelling k, evals[i][2k + 1] tests it.
        let evals = task
            .inputs
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let seeds: Vec<u64> = (0..n_lab)
                    .flat_map(|k| {
                        [seed::stream::TRAIN_EVAL, seed::stream::TEST_EVAL]
                            .map(|stream| seed::derive(seed, &[stream, i as u64, k as u64]))
                    })
                    .collect();
                learner.features_repeated(x, &seeds)
            })
            .collect::<Result<Vec<_>>>()?;
        (0..n_lab)
            .into_par_iter()
            .map(|k| {
                let train = design_matrix(&evals.iter().map(|e| e[2 * k].clone()).collect::<Vec<_>>())?;
                let test = design_matrix(&evals.iter().map(|e| e[2 * k + 1].clone()).collect::<Vec<_>>())?;
                let y = DMatrix::from_column_slice(n, 1, &task.labels[k]);
                let pred = test * fit_many(&train, &y, &opts.fit)?;
                Ok(mean_abs_norm_err(pred.as_slice(), &task.labels[k])?.as_f64())
            })
            .collect::<Result<Vec<f64>>>()?
    };
    let (mean, stderr) = mean_stderr(&errs);
    Ok(EpsPoint { n, eps_mean: mean, eps_stderr: stderr })
}

pub(crate) fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `log2(1/eps)` with `eps` floored at machine epsilon.
pub fn bits_per_label(eps: f64) -> f64 {
    (1.0 / eps.max(EPS_FLOOR)).log2()
}

/// `max(0, max_N N log2(1/eps(N)))` and the maximizing `N`.
pub fn c_direct(points: &[EpsPoint]) -> (f64, Option<usize>) {
    points.iter().fold((0.0, None), |(best, arg), p| {
        let c = p.n as f64 * bits_per_label(p.eps_mean);
        if c > best {
            (c, Some(p.n))
        } else {
            (best, arg)
        }
    })
}

/// Largest `N` with `eps(N) < threshold`, if any.
pub fn largest_memorized(points: &[EpsPoint], threshold: f64) -> Option<usize> {
    points.iter().filter(|p| p.eps_mean < threshold).map(|p| p.n).max()
}

/// `max[N] * eps_p` over grid points memorized below `threshold`; zero when
/// none are.
pub fn c_normalized(points: &[EpsPoint], eps_p: f64, threshold: f64) -> f64 {
    match largest_memorized(points, threshold) {
        Some(n) => n as f64 * eps_p,
        None => {
            log::info!("no grid point reached eps < {threshold:e}; normalized capacity is 0");
            0.0
        }
    }
}

/// `{1, ..., n_w + 5} U {2 n_w}`.
pub fn default_grid(n_w: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = (1..=n_w + 5).collect();
    if 2 * n_w > n_w + 5 {
        grid.push(2 * n_w);
    }
    grid
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("N grid must be nonempty, positive and strictly increasing".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub points: Vec<EpsPoint>,
    pub c_direct_bits: f64,
    pub argmax_n: Option<usize>,
    pub c_norm_bits: Option<f64>,
    pub eps_p_bits: Option<f64>,
    pub w_bits: Option<f64>,
    pub n_labellings: usize,
    pub seed: u64,
}

impl CapacityReport {
    /// Report over already-measured points, without a budget.
    pub fn from_points(points: Vec<EpsPoint>, n_labellings: usize, seed: u64) -> Self {
        let (c, argmax) = c_direct(&points);
        Self {
            points,
            c_direct_bits: c,
            argmax_n: argmax,
            c_norm_bits: None,
            eps_p_bits: None,
            w_bits: None,
            n_labellings,
            seed,
        }
    }

    /// Attach `eps_p`, the normalized estimate it implies, and a `W` budget.
    pub fn with_budget(mut self, eps_p: f64, w_bits: f64) -> Self {
        self.eps_p_bits = Some(eps_p);
        self.c_norm_bits = Some(c_normalized(&self.points, eps_p, NORMALIZED_THRESHOLD));
        self.w_bits = Some(w_bits);
        self
    }

    /// The estimate checked against `W`. When the learner still memorizes
    /// below the threshold at the `N` maximizing the direct estimate, its
    /// error there is set by numerical precision and the normalized value is
    /// used; otherwise the direct estimate.
    pub fn c_est(&self) -> f64 {
        let memorized = largest_memorized(&self.points, NORMALIZED_THRESHOLD);
        match (self.c_norm_bits, memorized, self.argmax_n) {
            (Some(c), Some(m), Some(k)) if m >= k => c,
            _ => self.c_direct_bits,
        }
    }

    pub fn bound(&self) -> Option<BoundCheck> {
        self.w_bits.map(|w| check_bound(self.c_est(), w))
    }
}

/// Measure `eps(N)` on every grid point and apply the direct estimate.
/// Grid points run in parallel; each gets a seed derived from its index.
pub fn capacity_direct<T: Real, L: Learner<T> + ?Sized>(
    learner: &L,
    grid: &[usize],
    opts: &CapacityOptions,
    seed: u64,
) -> Result<CapacityReport> {
    check_grid(grid)?;
    if opts.n_labellings == 0 {
        return Err(Error::InvalidArgument("n_labellings must be >= 1".into()));
    }
    let points = grid
        .par_iter()
        .map(|&n| eps_of_n(learner, n, opts, seed::derive(seed, &[n as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(CapacityReport::from_points(points, opts.n_labellings, seed))
}

/// One amplitude of a precision-floor sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub amplitude: f64,
    pub report: CapacityReport,
    /// `C_direct / N*` with `N*` the maximizing grid point.
    pub bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionFloor {
    pub points: Vec<NoisePoint>,
    pub eps_p_bits: f64,
    /// Largest amplitude still on the plateau.
    pub knee_amplitude: f64,
    pub plateau_len: usize,
}

/// `n` amplitudes log-spaced from `lo` to `hi` inclusive.
pub fn log_sweep(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

/// Default sweep: one point per decade from `1e-20` to `1e-6`. The quiet end
/// sits well below f64 resolution so the plateau is resolved.
pub fn default_noise_sweep() -> Vec<f64> {
    log_sweep(1e-20, 1e-6, 15)
}

/// Longest run of amplitudes, starting at the quietest, over which `C`
/// changes by less than [`PLATEAU_TOLERANCE`] per decade and stays within
/// [`PLATEAU_TOLERANCE`] of the quietest value. Returns its length.
pub fn plateau_length(amplitudes: &[f64], c: &[f64]) -> usize {
    let mut len = 1;
    for k in 1..c.len() {
        let decades = (amplitudes[k] / amplitudes[k - 1]).log10().abs().max(f64::MIN_POSITIVE);
        let rel = if c[k - 1] > 0.0 { (c[k] - c[k - 1]).abs() / c[k - 1] } else { f64::INFINITY };
        let total = if c[0] > 0.0 { (c[k] - c[0]).abs() / c[0] } else { f64::INFINITY };
        if rel / decades >= PLATEAU_TOLERANCE || total >= PLATEAU_TOLERANCE {
            break;
        }
        len += 1;
    }
    len
}

/// Capacity of one noise amplitude of a precision-floor sweep.
///
/// Every amplitude of a sweep should get the same `seed`: the inputs, labels
/// and noise pattern are then shared and only the noise scale differs, so the
/// plateau is not blurred by task-to-task scatter.
pub fn noise_point<T: Real, L: Learner<T> + ?Sized>(
    learner: &L,
    amplitude: f64,
    grid: &[usize],
    opts: &CapacityOptions,
    seed: u64,
) -> Result<NoisePoint> {
    let report = capacity_direct(learner, grid, opts, seed)?;
    let bits = report.argmax_n.map_or(0.0, |n| report.c_direct_bits / n as f64);
    Ok(NoisePoint { amplitude, report, bits })
}

/// Find the low-noise plateau of a finished sweep and average the per-label
/// bit depth `C / N*` over it.
pub fn precision_floor_from(points: Vec<NoisePoint>) -> Result<PrecisionFloor> {
    let amplitudes: Vec<f64> = points.iter().map(|p| p.amplitude).collect();
    check_sweep(&amplitudes)?;
    let c: Vec<f64> = points.iter().map(|p| p.report.c_direct_bits).collect();
    let len = plateau_length(&amplitudes, &c);
    if len < 2 || c[0] == 0.0 {
        return Err(Error::NoPlateau);
    }
    let eps_p = points[..len].iter().map(|p| p.bits).sum::<f64>() / len as f64;
    Ok(PrecisionFloor { eps_p_bits: eps_p, knee_amplitude: amplitudes[len - 1], plateau_len: len, points })
}

fn check_sweep(amplitudes: &[f64]) -> Result<()> {
    if amplitudes.len() < 2 || amplitudes.windows(2).any(|w| !(w[0] < w[1])) || !(amplitudes[0] > 0.0) {
        return Err(Error::InvalidArgument("noise sweep needs >= 2 positive increasing amplitudes".into()));
    }
    Ok(())
}

/// Calibrate `eps_p` by sweeping additive noise: build a learner per
/// amplitude, measure `C_direct`, and hand the sweep to
/// [`precision_floor_from`].
pub fn estimate_precision_floor<T, F>(
    make_learner: F,
    amplitudes: &[f64],
    grid: &[usize],
    opts: &CapacityOptions,
    seed: u64,
) -> Result<PrecisionFloor>
where
    T: Real,
    F: Fn(f64) -> Result<Box<dyn Learner<T>>> + Sync,
{
    check_sweep(amplitudes)?;
    let points = amplitudes
        .iter()
        .map(|&a| noise_point(make_learner(a)?.as_ref(), a, grid, opts, seed))
        .collect::<Result<Vec<_>>>()?;
    precision_floor_from(points)
}

/// `W = sum log2 M_i`.
pub fn w_bits(levels: &[f64]) -> Result<f64> {
    if let Some(m) = levels.iter().find(|m| !(**m >= 2.0)) {
        return Err(Error::InvalidArgument(format!("parameter levels must be >= 2, got {m}")));
    }
    Ok(levels.iter().map(|m| m.log2()).sum())
}

/// `W = N_w (b0 + log2(N_s / N_s0) / 2)`: weight precision grows by half a bit
/// per doubling of the shot count.
pub fn w_bits_sampled(n_w: usize, shots: f64, shots_ref: f64, bits_ref: f64) -> Result<f64> {
    if !(shots >= 1.0 && shots_ref > 0.0) {
        return Err(Error::InvalidArgument("shot counts must be positive".into()));
    }
    Ok(n_w as f64 * (bits_ref + 0.5 * (shots / shots_ref).log2()))
}

/// `W` for a readout of `n_w` features at precision floor `eps_p`, limited by
/// shot noise (anchored so `N_s0 = 2^(2 eps_p)` shots reach the floor) and by
/// additive noise of `amplitude` relative to unit-scale features.
pub fn w_budget(n_w: usize, eps_p: f64, shots: Option<usize>, amplitude: f64) -> Result<f64> {
    let mut per_weight = eps_p;
    if let Some(s) = shots {
        let sampled = w_bits_sampled(1, s as f64, 2f64.powf(2.0 * eps_p), eps_p)?;
        per_weight = per_weight.min(sampled);
    }
    if amplitude > 0.0 {
        per_weight = per_weight.min((1.0 / amplitude).log2().max(0.0));
    }
    Ok(n_w as f64 * per_weight.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub c_bits: f64,
    pub w_bits: f64,
    /// `C - W`.
    pub margin: f64,
    pub satisfied: bool,
    /// Excess beyond [`BOUND_TOLERANCE`].
    pub anomaly: bool,
}

pub fn check_bound(c: f64, w: f64) -> BoundCheck {
    let anomaly = c > w * (1.0 + BOUND_TOLERANCE);
    if anomaly {
        log::warn!("capacity {c:.2} bits exceeds W = {w:.2} bits beyond tolerance");
    }
    BoundCheck { c_bits: c, w_bits: w, margin: c - w, satisfied: c <= w, anomaly }
}
