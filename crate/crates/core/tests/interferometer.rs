use nalgebra::DMatrix;
use proptest::prelude::*;
use qrc_core::fock::{PureState, SpaceSpec};
use qrc_core::interferometer::{clements_decompose, haar_unitary, lift_oracle, FockInterferometer};
use qrc_core::scalar::C;
use qrc_core::seed;
use rand::Rng as _;

fn max_abs(m: &DMatrix<C<f64>>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Random normalized state supported on total photon number below the cutoff.
fn sub_cutoff_state(space: SpaceSpec, seed: u64) -> PureState<f64> {
    let mut rng = seed::rng(seed);
    let d = space.cutoff();
    let mut amps: Vec<C<f64>> = (0..space.dim())
        .map(|f| {
            if space.occupation(f).total() < d {
                C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                C::new(0.0, 0.0)
            }
        })
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    PureState::new(space, amps).unwrap()
}

#[test]
fn first_row_weight_follows_beta_one_m_minus_one() {
    // |U_00|^2 of a Haar unitary on M modes has CDF 1 - (1 - x)^(M - 1).
    let m = 3;
    let n = 2000;
    let mut xs: Vec<f64> = (0..n).map(|s| haar_unitary::<f64>(m, s).unwrap().matrix()[(0, 0)].norm_sqr()).collect();
    xs.sort_by(f64::total_cmp);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = 1.0 - (1.0 - x).powi(m as i32 - 1);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic.
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
}

#[test]
fn two_mode_eigenphases_repel() {
    // Haar U(2) eigenphase gap has density (1 - cos D) / 2 pi: E[cos D] = -1/2,
    // standard deviation 1/2.
    let n = 4000;
    let cos: Vec<f64> = (0..n)
        .map(|s| {
            let u = haar_unitary::<f64>(2, 10_000 + s).unwrap();
            let u = u.matrix();
            let tr = u[(0, 0)] + u[(1, 1)];
            let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
            let disc = (tr * tr - det * 4.0).sqrt();
            let (a, b) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
            (a.arg() - b.arg()).cos()
        })
        .collect();
    let mean = cos.iter().sum::<f64>() / n as f64;
    assert!((mean + 0.5).abs() < 5.0 * 0.5 / (n as f64).sqrt(), "mean cos = {mean}");
}

#[test]
fn clements_action_matches_lift_oracle() {
    let space = SpaceSpec::new(3, 4).unwrap();
    for s in 0..5 {
        let u = haar_unitary::<f64>(3, 700 + s).unwrap();
        let lift = lift_oracle(&u, 4).unwrap();
        let fi = FockInterferometer::new(&clements_decompose(&u).unwrap(), space).unwrap();
        let psi = sub_cutoff_state(space, s);
        let expected = &lift * nalgebra::DVector::from_column_slice(psi.amplitudes());
        let mut out = psi.clone();
        fi.apply_pure(&mut out).unwrap();
        let err = out.amplitudes().iter().zip(expected.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "seed {s}: {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn haar_is_unitary_and_clements_round_trips(modes in 1usize..7, s in any::<u64>()) {
        let u = haar_unitary::<f64>(modes, s).unwrap();
        prop_assert!(u.deviation() < 1e-12);
        let plan = clements_decompose(&u).unwrap();
        prop_assert_eq!(plan.rotations.len(), modes * (modes - 1) / 2);
        prop_assert!(max_abs(&(plan.reconstruct() - u.matrix())) < 1e-10);
    }

    #[test]
    fn interferometer_preserves_norm_and_photon_number(s in any::<u64>()) {
        let space = SpaceSpec::new(3, 4).unwrap();
        let fi = FockInterferometer::new(&clements_decompose(&haar_unitary::<f64>(3, s).unwrap()).unwrap(), space)
            .unwrap();
        let psi = sub_cutoff_state(space, s ^ 1);
        let mut out = psi.clone();
        fi.apply_pure(&mut out).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        let mean_n = |p: &PureState<f64>| -> f64 {
            p.weights().iter().enumerate().map(|(f, w)| w * space.occupation(f).total() as f64).sum()
        };
        prop_assert!((mean_n(&out) - mean_n(&psi)).abs() < 1e-10);
    }
}
