use fadmit::environment::*;
use fadmit::geometry::{Pose, Rotation, UnitVec3, Vec3};
use proptest::prelude::*;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = UnitVec3> {
    vec3(1.0).prop_filter_map("non-zero", |v| v.try_normalize(1e-3))
}

fn board(tilt: f64) -> PlaneBoard {
    let pose = Pose::new(Vec3::new(0.5, 0.0, 0.15), Rotation::from_axis_angle(UnitVec3::X, tilt));
    PlaneBoard::new(pose, (0.3, 0.2), 1000.0, FrictionModel::default(), DEFAULT_INK_CELL).unwrap()
}

proptest! {
    #[test]
    fn spring_is_unilateral(k in 1.0..1e4f64, rest in vec3(1.0), n in unit(), p in vec3(1.0)) {
        let s = SpringContact::new(k, rest, n).unwrap();
        let f = s.normal_force(p);
        prop_assert!(f >= 0.0);
        if s.penetration(p) <= 0.0 {
            prop_assert_eq!(f, 0.0);
        } else {
            prop_assert!((f - s.bilateral_force(p)).abs() < 1e-9 * k);
        }
    }

    #[test]
    fn board_force_never_pulls(tilt in -0.35..0.35f64, p in vec3(0.2), vel in vec3(0.5)) {
        let b = board(tilt);
        let p = b.pose().position + p;
        let f = b.contact_force(p, vel);
        let n = b.pose().orientation.rotate(Vec3::Z);
        prop_assert!(f.dot(n) >= 0.0);
        if b.to_local(p).z >= 0.0 {
            prop_assert_eq!(f, Vec3::ZERO);
        }
    }

    #[test]
    fn friction_dissipates(mu in 0.0..1.0f64, visc in 0.0..10.0f64, fn_mag in 0.0..50.0f64, v in vec3(1.0)) {
        let fr = FrictionModel { coulomb_mu: mu, viscous: visc };
        prop_assert!(fr.force(fn_mag, v).dot(v) <= 0.0);
    }

    #[test]
    fn ink_never_increases(wipes in prop::collection::vec((vec3(0.2), any::<bool>(), 0.0..5.0f64), 1..40)) {
        let mut b = board(0.1);
        b.ink.draw_stroke(&[(-0.1, -0.05), (0.0, 0.05), (0.1, -0.05)]);
        let mut prev = b.remaining_ink_length();
        for (offset, contact, force) in wipes {
            let eef = Pose::new(b.pose().position + offset, Rotation::IDENTITY);
            b.update_ink(&eef, contact, force);
            let now = b.remaining_ink_length();
            prop_assert!(now <= prev);
            prev = now;
        }
    }

    #[test]
    fn wipe_rect_matches_brute_force(u in -0.2..0.2f64, v in -0.15..0.15f64, hu in 0.0..0.05f64, hv in 0.0..0.05f64) {
        let mut grid = InkGrid::new((0.3, 0.2), 0.005).unwrap();
        for j in 0..grid.rows() {
            for i in 0..grid.cols() {
                grid.set(i, j, (i * 7 + j * 3) % 4 != 0);
            }
        }
        let mut expected = grid.clone();
        let mut n = 0;
        for j in 0..expected.rows() {
            for i in 0..expected.cols() {
                let (cu, cv) = expected.cell_center(i, j);
                if (cu - u).abs() <= hu + 1e-9 && (cv - v).abs() <= hv + 1e-9 && expected.is_inked(i, j) {
                    expected.set(i, j, false);
                    n += 1;
                }
            }
        }
        prop_assert_eq!(grid.wipe_rect(u, v, hu, hv), n);
        prop_assert_eq!(grid, expected);
    }

    #[test]
    fn latch_stays_released(moves in prop::collection::vec((0.0..1.5f64, 0.0..1.2f64), 1..30), door_kind in any::<bool>()) {
        let mut d = if door_kind {
            HingedDoor::door(Vec3::new(0.6, -0.5, 0.4), 0.0, 0.7)
        } else {
            HingedDoor::microwave(Vec3::new(0.6, -0.15, 0.25), 0.0, 0.3)
        };
        let far = Pose::from_position(Vec3::new(0.0, 0.0, 2.0));
        let mut released = false;
        for (theta, phi) in moves {
            d.set_angles(theta, phi);
            d.advance(&far, Vec3::ZERO, 0.0, 1e-3);
            if released {
                prop_assert!(!d.latch_engaged());
                prop_assert_eq!(d.latch_resistance(0.0, 0.0), Vec3::ZERO);
            }
            released |= !d.latch_engaged();
        }
    }

    #[test]
    fn displacement_disturbances_are_continuous(start in 0.0..5.0f64, ramp in 0.01..2.0f64, mag in -0.1..0.1f64, t in 0.0..10.0f64) {
        let ev = DisturbanceEvent::new(DisturbanceKind::Lower, start, 5.0, mag, ramp);
        let n = Vec3::Z;
        let h = 1e-7;
        let jump = (ev.translation(t + h, n) - ev.translation(t, n)).norm();
        prop_assert!(jump <= mag.abs() / ramp * h * 1.0001 + 1e-15);
    }
}

#[test]
fn door_reacts_only_through_grasp() {
    let d = HingedDoor::microwave(Vec3::new(0.6, -0.15, 0.25), 0.0, 0.3);
    let env = TaskEnvironment::HingedDoor(d.clone());
    let w = env.external_wrench(&Pose::new(d.grip_point(), d.grip_orientation()), Vec3::ZERO);
    assert_eq!(w.force, Vec3::ZERO);
}
