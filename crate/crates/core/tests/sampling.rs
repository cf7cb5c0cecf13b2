use qrc_core::learner::{FqrcLearner, Readout};
use qrc_core::reservoir::{Reservoir, ReservoirConfig, ReservoirInput};
use qrc_core::seed;

const REPS: usize = 400;

/// Per-component mean and standard deviation of `REPS` sampled feature vectors.
fn sampled_moments(r: &Reservoir<f64>, x: &[f64], shots: usize) -> (Vec<f64>, Vec<f64>) {
    let dist = r.output_distribution(ReservoirInput::Classical(x)).unwrap();
    let runs: Vec<Vec<f64>> = (0..REPS)
        .map(|k| r.sampled_from(&dist, shots, seed::derive(shots as u64, &[k as u64])).unwrap().values)
        .collect();
    let n = r.n_w();
    let mean: Vec<f64> = (0..n).map(|f| runs.iter().map(|v| v[f]).sum::<f64>() / REPS as f64).collect();
    let sd = (0..n)
        .map(|f| (runs.iter().map(|v| (v[f] - mean[f]).powi(2)).sum::<f64>() / (REPS - 1) as f64).sqrt())
        .collect();
    (mean, sd)
}

#[test]
fn standard_error_scales_as_inverse_root_shots_and_is_unbiased() {
    let r = Reservoir::<f64>::new(ReservoirConfig::default()).unwrap();
    let x = [1.0, 0.8, 0.6, 0.9, 1.0];
    let exact = r.run_exact(ReservoirInput::Classical(&x)).unwrap().values;
    let decades = [10_000, 100_000, 1_000_000];
    let moments: Vec<_> = decades.iter().map(|&s| sampled_moments(&r, &x, s)).collect();
    for (k, (mean, sd)) in moments.iter().enumerate() {
        for f in 0..exact.len() {
            let se = sd[f] / (REPS as f64).sqrt();
            assert!((mean[f] - exact[f]).abs() <= 5.0 * se, "N_s={} feature {f}: bias beyond 5 sigma", decades[k]);
        }
    }
    let expected = 10f64.sqrt();
    for w in moments.windows(2) {
        for f in 0..exact.len() {
            let ratio = w[0].1[f] / w[1].1[f];
            assert!(ratio > expected / 2.0 && ratio < expected * 2.0, "feature {f}: sd ratio {ratio}");
        }
    }
}

#[test]
fn sup_norm_error_shrinks_with_shots() {
    let learner = FqrcLearner::<f64>::new(ReservoirConfig::default(), Readout::Exact).unwrap();
    let x = [0.3, 0.7, 0.2, 0.9, 0.5];
    let exact = learner.features_of(ReservoirInput::Classical(&x), 0).unwrap();
    let sup = |shots: usize| -> f64 {
        let l = FqrcLearner::<f64>::new(ReservoirConfig::default(), Readout::Sampled { shots }).unwrap();
        let seeds: Vec<u64> = (0..64).collect();
        let runs = l.features_repeated_of(ReservoirInput::Classical(&x), &seeds).unwrap();
        let mse = runs
            .iter()
            .map(|v| v.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max).powi(2))
            .sum::<f64>()
            / runs.len() as f64;
        mse.sqrt()
    };
    let errs: Vec<f64> = [1_000, 10_000, 100_000].map(sup).to_vec();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 10f64.sqrt() / 2.0 && ratio < 10f64.sqrt() * 2.0, "{errs:?}");
    }
}
