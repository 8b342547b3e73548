//! Scripted stand-in for a learned policy: replays expert supervision in
//! action chunks with seeded prediction noise, plus the training loss.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expert::{encode_pose10, episode_rng, SupervisionTuple};
use crate::geometry::{rot6d_encode, Pose, Rotation, UnitVec3, Vec3};

pub const DEFAULT_HORIZON: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Position, 6-d rotation, gripper.
    pub proprio: [f64; 10],
    /// Policy step index.
    pub time: usize,
}

impl Observation {
    pub fn new(pose: &Pose, gripper: f64, time: usize) -> Self {
        Self { proprio: encode_pose10(pose, gripper), time }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionChunk {
    actions: Vec<SupervisionTuple>,
}

impl ActionChunk {
    pub fn new(actions: Vec<SupervisionTuple>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidParameter("action chunk horizon must be >= 1".into()));
        }
        Ok(Self { actions })
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[SupervisionTuple] {
        &self.actions
    }
}

/// Prediction error model. `pos_bias_std` draws one offset per episode (a
/// systematic error); the other terms are drawn per action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Per-action position noise (m).
    pub pos_std: f64,
    /// Per-episode position offset (m).
    pub pos_bias_std: f64,
    /// Per-action rotation noise (rad, per axis).
    pub rot_std: f64,
    /// Tilt of contact normals (rad).
    pub normal_cone_std: f64,
    pub contact_flip_prob: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { pos_std: 0.0, pos_bias_std: 0.0, rot_std: 0.0, normal_cone_std: 0.0, contact_flip_prob: 0.0, seed: 0 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pos_std", self.pos_std),
            ("pos_bias_std", self.pos_bias_std),
            ("rot_std", self.rot_std),
            ("normal_cone_std", self.normal_cone_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.contact_flip_prob) {
            return Err(Error::InvalidParameter(format!(
                "contact_flip_prob must be in [0, 1], got {}",
                self.contact_flip_prob
            )));
        }
        Ok(())
    }

    /// Episode-level position offset.
    pub fn episode_bias(&self) -> Vec3 {
        if self.pos_bias_std == 0.0 {
            return Vec3::ZERO;
        }
        let mut rng = episode_rng(self.seed, 0);
        gaussian_vec(&mut rng, self.pos_bias_std)
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, std: f64) -> Vec3 {
    if std == 0.0 {
        return Vec3::ZERO;
    }
    let n = Normal::new(0.0, std).expect("std validated");
    Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

/// Rotates `n` by an angle ~ |N(0, std)| about a random axis orthogonal to it.
fn tilt_normal<R: Rng>(rng: &mut R, n: UnitVec3, std: f64) -> UnitVec3 {
    if std == 0.0 {
        return n;
    }
    let angle: f64 = Normal::new(0.0, std).expect("std validated").sample(rng);
    let helper = if n.get().x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
    let e1 = n.get().cross(helper).try_normalize(1e-12).expect("helper not parallel").get();
    let e2 = n.get().cross(e1);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let axis = UnitVec3::new(e1 * phi.cos() + e2 * phi.sin()).expect("unit");
    let v = Rotation::from_axis_angle(axis, angle).rotate(n.get());
    v.try_normalize(1e-12).expect("rotation keeps length")
}

fn perturb<R: Rng>(t: &SupervisionTuple, noise: &NoiseSpec, bias: Vec3, rng: &mut R) -> Result<SupervisionTuple> {
    let mut out = *t;
    let p = t.position() + bias + gaussian_vec(rng, noise.pos_std);
    out.pose[..3].copy_from_slice(&p.to_array());
    if noise.rot_std > 0.0 {
        let q = t.decode_pose()?.orientation;
        let dq = Rotation::from_rotation_vector(gaussian_vec(rng, noise.rot_std));
        out.pose[3..9].copy_from_slice(&rot6d_encode(&dq.compose(&q)).0);
    }
    if let Some(n) = t.normal_unit() {
        out.normal = tilt_normal(rng, n, noise.normal_cone_std).get();
    }
    if noise.contact_flip_prob > 0.0 && rng.gen_bool(noise.contact_flip_prob) {
        out.contact = !out.contact;
        if !out.contact {
            out.normal = Vec3::ZERO;
        }
    }
    Ok(out)
}

/// Next `horizon` demo tuples from `obs.time`, padded with the last tuple and
/// perturbed by `noise`. Deterministic in `(noise.seed, obs.time)`.
pub fn predict(obs: &Observation, demo: &[SupervisionTuple], noise: &NoiseSpec, horizon: usize) -> Result<ActionChunk> {
    noise.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("action chunk horizon must be >= 1".into()));
    }
    if obs.time >= demo.len() {
        return Err(Error::EndOfDemo { time: obs.time, len: demo.len() });
    }
    let bias = noise.episode_bias();
    let mut rng = episode_rng(noise.seed, obs.time as u64 + 1);
    let last = demo.len() - 1;
    let actions = (0..horizon)
        .map(|k| perturb(&demo[(obs.time + k).min(last)], noise, bias, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    ActionChunk::new(actions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub pose: f64,
    pub normal: f64,
    pub contact: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { pose: 1.0, normal: 1.0, contact: 1.0 }
    }
}

/// Weighted mean-absolute loss. The normal term averages only over steps
/// where the ground truth is in contact.
pub fn loss(pred: &[SupervisionTuple], gt: &[SupervisionTuple], w: &LossWeights) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: gt.len() });
    }
    if gt.is_empty() {
        return Ok(0.0);
    }
    let n = gt.len() as f64;
    let mut pose = 0.0;
    let mut normal = 0.0;
    let mut masked = 0usize;
    let mut contact = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        pose += p.pose.iter().zip(&g.pose).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if g.contact {
            let d = p.normal - g.normal;
            normal += d.x.abs() + d.y.abs() + d.z.abs();
            masked += 1;
        }
        contact += (f64::from(u8::from(p.contact)) - f64::from(u8::from(g.contact))).abs();
    }
    let normal_term = if masked == 0 { 0.0 } else { normal / (3.0 * masked as f64) };
    Ok(w.pose * pose / (10.0 * n) + w.normal * normal_term + w.contact * contact / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::sample_demo;
    use crate::scenario::{EnvParams, Task};

    fn demo() -> Vec<SupervisionTuple> {
        sample_demo(Task::WW, &EnvParams::default(), 5, 0).unwrap().tuples
    }

    #[test]
    fn zero_noise_is_exact_slice() {
        let d = demo();
        let obs = Observation { proprio: [0.0; 10], time: 30 };
        let c = predict(&obs, &d, &NoiseSpec::default(), 16).unwrap();
        assert_eq!(c.actions(), &d[30..46]);
        assert_eq!(loss(c.actions(), &d[30..46], &LossWeights::default()).unwrap(), 0.0);
    }

    #[test]
    fn pads_at_end_and_errors_past_it() {
        let d = demo();
        let obs = Observation { proprio: [0.0; 10], time: d.len() - 3 };
        let c = predict(&obs, &d, &NoiseSpec::default(), 16).unwrap();
        assert!(c.actions()[3..].iter().all(|a| a == d.last().unwrap()));
        let obs = Observation { proprio: [0.0; 10], time: d.len() };
        assert!(matches!(predict(&obs, &d, &NoiseSpec::default(), 16), Err(Error::EndOfDemo { .. })));
    }

    #[test]
    fn noisy_normals_stay_unit_and_seeded() {
        let d = demo();
        let noise = NoiseSpec { pos_std: 0.001, rot_std: 0.02, normal_cone_std: 0.1, seed: 9, ..Default::default() };
        let obs = Observation { proprio: [0.0; 10], time: 40 };
        let a = predict(&obs, &d, &noise, 16).unwrap();
        let b = predict(&obs, &d, &noise, 16).unwrap();
        assert_eq!(a, b);
        for t in a.actions().iter().filter(|t| t.contact) {
            assert!((t.normal.norm() - 1.0).abs() < 1e-9);
            t.decode_pose().unwrap();
        }
        assert_ne!(a.actions(), &d[40..56]);
    }

    fn tuple(pose0: f64, contact: bool) -> SupervisionTuple {
        let mut t = SupervisionTuple::new(&Pose::default(), 0.0, contact.then_some(UnitVec3::Z), contact);
        t.pose[0] = pose0;
        t
    }

    #[test]
    fn loss_examples() {
        let gt = vec![tuple(0.0, false)];
        let pred = vec![tuple(0.1, false)];
        let w = LossWeights { pose: 1.0, normal: 0.0, contact: 0.0 };
        assert!((loss(&pred, &gt, &w).unwrap() - 0.01).abs() < 1e-15);

        let gt = vec![tuple(0.0, true); 4];
        let mut pred = gt.clone();
        pred[2].contact = false;
        let w = LossWeights { pose: 0.0, normal: 0.0, contact: 1.0 };
        assert_eq!(loss(&pred, &gt, &w).unwrap(), 0.25);
        assert!(matches!(loss(&pred[..3], &gt, &w), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn normal_loss_ignores_free_steps() {
        let gt = vec![tuple(0.0, false)];
        let mut pred = gt.clone();
        pred[0].normal = Vec3::X;
        assert_eq!(loss(&pred, &gt, &LossWeights::default()).unwrap(), 0.0);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseSpec { contact_flip_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(NoiseSpec { pos_std: -1.0, ..Default::default() }.validate().is_err());
    }
}
