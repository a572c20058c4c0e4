//! Property tests for the structural invariants: randomized inputs are
//! generated from proptest-driven seeds so shrinking stays meaningful.

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use steerkit::lp::DenseLp;
use steerkit::qstate::{
    bloch_decompose, bloch_reassemble, canonical_form, fidelity, random_state, su2_rotation,
    werner_state, WernerSpec,
};
use steerkit::steering_game::SteeringData;

fn state_from_seed(seed: u64) -> steerkit::qstate::DensityMatrix4 {
    random_state(&mut ChaCha12Rng::seed_from_u64(seed))
}

/// Maximizer soundness at full scale: 200 random canonical forms, three
/// efficiencies, against a shared million-point grid.
#[test]
fn maximizer_sound_against_million_point_grid() {
    let grid = steerkit::sphere::fibonacci_sphere(1_000_000);
    let cell = steerkit::sphere::fibonacci_cell_radius(1_000_000);
    let mut rng = ChaCha12Rng::seed_from_u64(0x50_000);
    for _ in 0..200 {
        let bf = canonical_form(&bloch_decompose(&random_state(&mut rng)));
        let v = bf.b;
        for eps in [0.0, 0.1, 1.0 / 3.0] {
            let claimed = steerkit::criteria::n_povm(&bf, eps, steerkit::qstate::Party::Bob)
                .unwrap()
                .n_value;
            let oracle = grid
                .iter()
                .map(|x| {
                    let p = v.dot(x);
                    (1.0 - 3.0 * eps) * p.abs() + 1.5 * eps * (1.0 + p * p) + (bf.t * x).norm()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                claimed >= oracle - 1e-7,
                "maximizer {claimed} below grid oracle {oracle} at eps={eps}"
            );
            let sv = bf.t.svd(false, false).singular_values;
            let lip = (1.0 - 3.0 * eps) * v.norm() + 3.0 * eps * v.norm() + sv[0];
            assert!(
                claimed <= oracle + lip * cell + 1e-9,
                "maximizer {claimed} exceeds grid {oracle} plus Lipschitz gap at eps={eps}"
            );
        }
    }
}

proptest! {
    // Integration-test binaries have no source root for regression files;
    // seeds are already explicit in every strategy, so persistence is off.
    #![proptest_config(ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn bloch_round_trip(seed in any::<u64>()) {
        let rho = state_from_seed(seed);
        let back = bloch_reassemble(&bloch_decompose(&rho)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((rho.entry(i, j) - back.entry(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_form_invariants(seed in any::<u64>()) {
        let bf = bloch_decompose(&state_from_seed(seed));
        let canon = canonical_form(&bf);
        prop_assert!(canon.is_canonical());
        // Proper rotations.
        prop_assert!((canon.rot_a.determinant() - 1.0).abs() < 1e-10);
        prop_assert!((canon.rot_b.determinant() - 1.0).abs() < 1e-10);
        prop_assert!(
            (canon.rot_a * canon.rot_a.transpose() - Matrix3::identity()).norm() < 1e-10
        );
        // The recorded rotations actually produce the canonical triple.
        prop_assert!((canon.rot_a * bf.a - canon.a).norm() < 1e-12);
        prop_assert!((canon.rot_b * bf.b - canon.b).norm() < 1e-12);
        prop_assert!((canon.rot_a * bf.t * canon.rot_b.transpose() - canon.t).norm() < 1e-10);
        // Idempotence.
        let twice = canonical_form(&canon);
        prop_assert!((twice.t - canon.t).norm() < 1e-12);
        prop_assert!((twice.a - canon.a).norm() < 1e-12);
        prop_assert!((twice.b - canon.b).norm() < 1e-12);
    }

    #[test]
    fn fidelity_bounds_and_symmetry(s1 in any::<u64>(), s2 in any::<u64>()) {
        let rho = state_from_seed(s1);
        let sig = state_from_seed(s2);
        let f12 = fidelity(&rho, &sig);
        let f21 = fidelity(&sig, &rho);
        prop_assert!((0.0..=1.0).contains(&f12));
        prop_assert!((f12 - f21).abs() < 1e-12);
        prop_assert!((fidelity(&rho, &rho) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn werner_is_isotropic(mu in 0.0_f64..=1.0, seed in any::<u64>()) {
        let w = werner_state(WernerSpec::new(mu).unwrap());
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        use rand::Rng;
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0_f64),
            rng.random_range(-1.0..1.0_f64),
            rng.random_range(0.1..1.0_f64),
        );
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let u = su2_rotation(&axis, angle);
        let rotated = w.conjugate_local(&u, &u).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((w.entry(i, j) - rotated.entry(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn steering_csv_round_trip(
        counts in proptest::collection::vec(
            proptest::array::uniform4(0u64..1_000_000), 1..8
        )
    ) {
        let data = SteeringData { counts };
        let back = SteeringData::from_csv(&data.to_csv()).unwrap();
        prop_assert_eq!(data, back);
    }

    #[test]
    fn criterion_never_exceeds_lipschitz_gap(seed in any::<u64>(), eps in 0.0_f64..=(1.0/3.0)) {
        // Upper-side sanity per state: the maximizer cannot beat the true
        // maximum, bounded by a coarse grid plus the Lipschitz gap.
        let bf = canonical_form(&bloch_decompose(&state_from_seed(seed)));
        let claimed = steerkit::criteria::n_povm(&bf, eps, steerkit::qstate::Party::Bob)
            .unwrap()
            .n_value;
        let grid = steerkit::sphere::fibonacci_sphere(20_000);
        let v = bf.b;
        let oracle = grid
            .iter()
            .map(|x| {
                let p = v.dot(x);
                (1.0 - 3.0 * eps) * p.abs() + 1.5 * eps * (1.0 + p * p) + (bf.t * x).norm()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let sv = bf.t.svd(false, false).singular_values;
        let lip = (1.0 - 3.0 * eps) * v.norm() + 3.0 * eps * v.norm() + sv[0];
        let cell = steerkit::sphere::fibonacci_cell_radius(20_000);
        prop_assert!(claimed >= oracle - 1e-9);
        prop_assert!(claimed <= oracle + lip * cell + 1e-9);
    }

    #[test]
    fn simplex_solves_box_lp(
        costs in proptest::collection::vec(-1.0_f64..1.0, 1..6),
        bounds in proptest::collection::vec(0.1_f64..5.0, 6)
    ) {
        // max c·x  s.t.  x_i ≤ u_i, x ≥ 0: optimum picks u_i where c_i > 0.
        let n = costs.len();
        let mut lp = DenseLp::new(bounds[..n].to_vec());
        for (i, &c) in costs.iter().enumerate() {
            let mut col = vec![0.0; n];
            col[i] = 1.0;
            lp.push_column(col, c);
        }
        for i in 0..n {
            let mut col = vec![0.0; n];
            col[i] = 1.0;
            lp.push_column(col, 0.0);
        }
        let sol = lp.solve().unwrap();
        prop_assert!(sol.feasible);
        let expect: f64 = costs
            .iter()
            .zip(&bounds)
            .map(|(&c, &u)| if c > 0.0 { c * u } else { 0.0 })
            .sum();
        prop_assert!((sol.objective - expect).abs() < 1e-9);
        // Strong duality: y·b equals the optimum.
        let dual_value: f64 = sol.duals.iter().zip(&bounds).map(|(y, u)| y * u).sum();
        prop_assert!((dual_value - expect).abs() < 1e-9);
    }
}
