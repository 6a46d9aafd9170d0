use bscb_core::bandit::{alpha_from_delta, reward_idle, reward_tx, select_arm, Arm, ArmState, BanditConfig, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Batch ridge solve of `(I + Σ x xᵀ) θ = Σ r x` by Gaussian elimination with
/// partial pivoting on the accumulated system.
fn ridge_oracle(history: &[(Vector, f64)]) -> Vector {
    let mut m = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    for (x, r) in history {
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += x[i] * x[j];
            }
            m[i][2] += r * x[i];
        }
    }
    if m[1][0].abs() > m[0][0].abs() {
        m.swap(0, 1);
    }
    let f = m[1][0] / m[0][0];
    let pivot = m[0];
    for (a, b) in m[1].iter_mut().zip(pivot) {
        *a -= f * b;
    }
    let t1 = m[1][2] / m[1][1];
    let t0 = (m[0][2] - m[0][1] * t1) / m[0][0];
    [t0, t1]
}

#[test]
fn theta_matches_batch_ridge_after_ten_thousand_updates() {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let mut arms = [ArmState::new(), ArmState::new()];
    let mut history: [Vec<(Vector, f64)>; 2] = [vec![], vec![]];
    for _ in 0..10_000 {
        let x = [r.random_range(0.0..1.5), r.random_range(0.0..1.5)];
        let reward = r.random_range(-1.0..1.0);
        let arm = r.random_range(0..2);
        arms[arm].update(&x, reward).unwrap();
        history[arm].push((x, reward));
    }
    for arm in 0..2 {
        let oracle = ridge_oracle(&history[arm]);
        let got = arms[arm].theta();
        let err = (got[0] - oracle[0]).abs().max((got[1] - oracle[1]).abs());
        assert!(err <= 1e-9, "arm {arm}: {got:?} vs {oracle:?}");
    }
}

#[test]
fn alpha_closed_forms() {
    // ln(2/δ) = 2 at δ = 2e⁻²
    let a = alpha_from_delta(2.0 * (-2.0f64).exp()).unwrap();
    assert!((a - 2.0).abs() < 1e-15);
    assert!(alpha_from_delta(0.0).is_err());
    assert!(alpha_from_delta(1.0).is_err());
}

#[test]
fn reward_hand_values() {
    let cfg = BanditConfig::default();
    let r = reward_tx(cfg.s_target + cfg.s_max, cfg.dt_max, &cfg);
    assert!((r - 1.0).abs() < 1e-12);
    assert_eq!(reward_idle(120.0, &cfg), -1.0);
    assert_eq!(reward_idle(119.999, &cfg), 0.0);
}

fn eigenvalues(a: &[[f64; 2]; 2]) -> (f64, f64) {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 - disc, tr / 2.0 + disc)
}

proptest! {
    #[test]
    fn a_stays_symmetric_with_eigenvalues_at_least_one(
        updates in prop::collection::vec(((-2.0f64..2.0, -2.0f64..2.0), -5.0f64..5.0), 0..200),
    ) {
        let mut arm = ArmState::new();
        for ((x0, x1), r) in updates {
            arm.update(&[x0, x1], r).unwrap();
        }
        let a = arm.a();
        prop_assert_eq!(a[0][1], a[1][0]);
        let (lo, _) = eigenvalues(a);
        prop_assert!(lo >= 1.0 - 1e-9, "smallest eigenvalue {}", lo);
    }

    #[test]
    fn width_shrinks_with_repeated_context(
        x0 in 0.0f64..1.5, x1 in 0.0f64..1.5,
        warmup in prop::collection::vec(((0.0f64..1.5, 0.0f64..1.5), -1.0f64..1.0), 0..20),
        rewards in prop::collection::vec(-1.0f64..1.0, 1..50),
    ) {
        let mut arm = ArmState::new();
        for ((a, b), r) in warmup {
            arm.update(&[a, b], r).unwrap();
        }
        let x = [x0, x1];
        let mut width = arm.width_sq(&x);
        for r in rewards {
            arm.update(&x, r).unwrap();
            let next = arm.width_sq(&x);
            prop_assert!(next <= width * (1.0 + 1e-12) + 1e-15);
            width = next;
        }
    }

    #[test]
    fn selection_is_symmetric_in_arm_labels(
        h0 in prop::collection::vec(((0.0f64..1.5, 0.0f64..1.5), -1.0f64..1.0), 0..20),
        h1 in prop::collection::vec(((0.0f64..1.5, 0.0f64..1.5), -1.0f64..1.0), 0..20),
        x0 in 0.0f64..1.5, x1 in 0.0f64..1.5,
        alpha in 0.0f64..3.0,
    ) {
        let train = |h: &[((f64, f64), f64)]| {
            let mut arm = ArmState::new();
            for ((a, b), r) in h {
                arm.update(&[*a, *b], *r).unwrap();
            }
            arm
        };
        let (a, b) = (train(&h0), train(&h1));
        let x = [x0, x1];
        prop_assume!((a.score(&x, alpha) - b.score(&x, alpha)).abs() > 1e-12);
        let swap = |arm: Arm| if arm == Arm::Tx { Arm::Idle } else { Arm::Tx };
        prop_assert_eq!(select_arm(&[a.clone(), b.clone()], &x, alpha), swap(select_arm(&[b, a], &x, alpha)));
    }

    #[test]
    fn reward_tx_slopes_by_finite_differences(
        s in 0.0f64..30.0, dt in 0.0f64..120.0, w in 0.0f64..=1.0, h in 0.01f64..10.0,
    ) {
        let cfg = BanditConfig { w, ..BanditConfig::default() };
        let ds = (reward_tx(s + h, dt, &cfg) - reward_tx(s, dt, &cfg)) / h;
        let dd = (reward_tx(s, dt + h, &cfg) - reward_tx(s, dt, &cfg)) / h;
        prop_assert!((ds - w / cfg.s_max).abs() <= 1e-12);
        prop_assert!((dd - (1.0 - w) / cfg.dt_max).abs() <= 1e-12);
    }
}
