use fadmit::expert::{sample_demo, SupervisionTuple};
use fadmit::policy::*;
use fadmit::scenario::{EnvParams, Task};
use proptest::prelude::*;

fn tuple() -> impl Strategy<Value = SupervisionTuple> {
    (prop::array::uniform10(-1.0..1.0f64), prop::array::uniform3(-1.0..1.0f64), any::<bool>()).prop_map(
        |(pose, n, contact)| SupervisionTuple { pose, normal: fadmit::geometry::Vec3::new(n[0], n[1], n[2]), contact },
    )
}

fn weights() -> impl Strategy<Value = LossWeights> {
    (0.0..5.0f64, 0.0..5.0f64, 0.0..5.0f64).prop_map(|(pose, normal, contact)| LossWeights { pose, normal, contact })
}

proptest! {
    #[test]
    fn loss_is_nonnegative_and_zero_on_match(a in prop::collection::vec(tuple(), 1..20), b in prop::collection::vec(tuple(), 1..20), w in weights()) {
        let n = a.len().min(b.len());
        prop_assert!(loss(&a[..n], &b[..n], &w).unwrap() >= 0.0);
        prop_assert_eq!(loss(&a, &a, &w).unwrap(), 0.0);
    }

    #[test]
    fn pose_error_is_positive(a in prop::collection::vec(tuple(), 1..20), k in 0usize..10, delta in 1e-6..1.0f64) {
        let mut b = a.clone();
        b[0].pose[k] += delta;
        let l = loss(&b, &a, &LossWeights::default()).unwrap();
        prop_assert!((l - delta / (10.0 * a.len() as f64)).abs() < 1e-12);
    }

    #[test]
    fn loss_is_linear_in_weights(a in prop::collection::vec(tuple(), 8), b in prop::collection::vec(tuple(), 8), w1 in weights(), w2 in weights(), lam in 0.0..10.0f64) {
        let scaled = LossWeights { pose: lam * w1.pose, normal: lam * w1.normal, contact: lam * w1.contact };
        let l1 = loss(&a, &b, &w1).unwrap();
        prop_assert!((loss(&a, &b, &scaled).unwrap() - lam * l1).abs() < 1e-9 * (1.0 + lam * l1));
        let sum = LossWeights { pose: w1.pose + w2.pose, normal: w1.normal + w2.normal, contact: w1.contact + w2.contact };
        let l2 = loss(&a, &b, &w2).unwrap();
        prop_assert!((loss(&a, &b, &sum).unwrap() - l1 - l2).abs() < 1e-9 * (1.0 + l1 + l2));
    }

    #[test]
    fn normals_out_of_contact_are_masked(a in prop::collection::vec(tuple(), 1..10)) {
        let gt: Vec<_> = a.iter().map(|t| SupervisionTuple { contact: false, ..*t }).collect();
        let mut pred = gt.clone();
        for p in &mut pred {
            p.normal = p.normal * -3.0;
        }
        prop_assert_eq!(loss(&pred, &gt, &LossWeights::default()).unwrap(), 0.0);
    }
}

#[test]
fn loss_grows_with_position_noise() {
    let demo = sample_demo(Task::WW, &EnvParams::default(), 4, 0).unwrap().tuples;
    let h = DEFAULT_HORIZON;
    let mean_loss = |pos_std: f64| {
        let mut total = 0.0;
        for seed in 0..100 {
            let noise = NoiseSpec { pos_std, seed, ..Default::default() };
            let obs = Observation { proprio: [0.0; 10], time: 20 };
            let chunk = predict(&obs, &demo, &noise, h).unwrap();
            total += loss(chunk.actions(), &demo[20..20 + h], &LossWeights::default()).unwrap();
        }
        total / 100.0
    };
    let grid = [0.001, 0.005, 0.02].map(mean_loss);
    assert!(grid[0] < grid[1] && grid[1] < grid[2], "{grid:?}");
    // E|N(0, s)| = s sqrt(2/pi); 3 of 10 pose components carry the noise.
    for (s, l) in [0.001, 0.005, 0.02].iter().zip(grid) {
        let expected = 0.3 * s * (2.0 / std::f64::consts::PI).sqrt();
        assert!((l - expected).abs() < 0.1 * expected, "{s}: {l} vs {expected}");
    }
}

#[test]
fn prediction_is_seeded() {
    let demo = sample_demo(Task::PH, &EnvParams::default(), 1, 0).unwrap().tuples;
    let noise = NoiseSpec { pos_std: 0.002, rot_std: 0.01, seed: 77, ..Default::default() };
    let obs = Observation { proprio: [0.0; 10], time: 3 };
    let a = predict(&obs, &demo, &noise, 8).unwrap();
    assert_eq!(a, predict(&obs, &demo, &noise, 8).unwrap());
    let other = NoiseSpec { seed: 78, ..noise };
    assert_ne!(a, predict(&obs, &demo, &other, 8).unwrap());
    assert!(predict(&obs, &demo, &noise, 0).is_err());
}
