//! Privileged-state expert: key-pose schedules, task-specific contact plans
//! and supervision extraction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::environment::{DoorConstraint, DoorKind, HingedDoor, HoleFixture, PlaneBoard, TaskEnvironment};
use crate::error::{Error, Result};
use crate::geometry::{interpolate_pose, rot6d_decode, rot6d_encode, Pose, Rot6D, Rotation, UnitVec3, Vec3};
use crate::scenario::{sample_initial_state, EnvParams, Task};

/// Policy step (s).
pub const POLICY_DT: f64 = 0.1;
/// Contact poses sit this far below the board surface (m).
pub const PRESS_DEPTH: f64 = 0.005;
/// Spacing of wiping poses (m), i.e. wipe speed times the policy step.
pub const WIPE_STEP: f64 = 0.004;
pub const LANE_OVERLAP: f64 = 0.25;
/// Lanes extend past the inked bounding box by this much at both ends (m).
pub const LANE_OVERRUN: f64 = 0.01;
/// Lateral tolerance for starting an insertion (m).
pub const ALIGN_TOLERANCE: f64 = 1e-4;

const APPROACH_STEPS: usize = 20;
const FINAL_APPROACH_STEPS: usize = 10;
const GRASP_STEPS: usize = 5;
const RETRACT_STEPS: usize = 10;
const HOLD_STEPS: usize = 20;
const HOVER_HEIGHT: f64 = 0.02;
const INSERT_START_HEIGHT: f64 = 0.01;
const INSERT_STEP: f64 = 0.001;
const PREGRASP_OFFSET: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PhaseLabel {
    Approach,
    Grasp,
    ContactInteraction,
    Retract,
}

impl PhaseLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseLabel::Approach => "approach",
            PhaseLabel::Grasp => "grasp",
            PhaseLabel::ContactInteraction => "contact",
            PhaseLabel::Retract => "retract",
        }
    }
}

/// FSM phase; the contact flag is derived from the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FsmPhase {
    pub label: PhaseLabel,
}

impl FsmPhase {
    pub const fn new(label: PhaseLabel) -> Self {
        Self { label }
    }

    pub fn contact_flag(self) -> bool {
        self.label == PhaseLabel::ContactInteraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyPose {
    pub pose: Pose,
    pub gripper: f64,
    pub phase: PhaseLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyPoseSchedule {
    keys: Vec<KeyPose>,
}

impl KeyPoseSchedule {
    pub fn new(keys: Vec<KeyPose>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::EmptySchedule);
        }
        if keys.windows(2).any(|w| w[1].phase < w[0].phase) {
            return Err(Error::InvalidParameter("key pose phases must follow task order".into()));
        }
        Ok(Self { keys })
    }

    pub fn keys(&self) -> &[KeyPose] {
        &self.keys
    }
}

/// Piecewise interpolation through the schedule; segments share endpoints.
pub fn plan_free_motion(schedule: &KeyPoseSchedule, steps_per_segment: usize) -> Result<Vec<Pose>> {
    if steps_per_segment == 0 {
        return Err(Error::InvalidParameter("steps_per_segment must be >= 1".into()));
    }
    let keys = schedule.keys();
    let mut out = vec![keys[0].pose];
    for w in keys.windows(2) {
        for i in 1..=steps_per_segment {
            out.push(interpolate_pose(&w[0].pose, &w[1].pose, i as f64 / steps_per_segment as f64));
        }
    }
    Ok(out)
}

fn straight_line(a: &Pose, b: &Pose, steps: usize) -> Vec<Pose> {
    let schedule = KeyPoseSchedule {
        keys: vec![
            KeyPose { pose: *a, gripper: 0.0, phase: PhaseLabel::Approach },
            KeyPose { pose: *b, gripper: 0.0, phase: PhaseLabel::Approach },
        ],
    };
    plan_free_motion(&schedule, steps.max(1)).expect("non-empty schedule")
}

fn step_count(length: f64, step: f64) -> usize {
    ((length / step) - 1e-9).ceil().max(0.0) as usize
}

/// Descent along the hole axis from `start` to the bottom, orientation fixed.
pub fn plan_insertion(hole: &HoleFixture, start: &Pose, step: f64) -> Result<Vec<Pose>> {
    if !(step > 0.0) {
        return Err(Error::NonPositiveParameter { name: "step", value: step });
    }
    let offset = hole.lateral_offset(start.position);
    if offset > ALIGN_TOLERANCE {
        return Err(Error::NotAligned { offset });
    }
    let height = hole.to_local(start.position).z + hole.depth;
    let n = step_count(height, step);
    let axis = hole.axis().get();
    Ok((0..=n)
        .map(|i| {
            let s = if n == 0 { 0.0 } else { i as f64 / n as f64 };
            Pose::new(start.position - axis * (height * s), start.orientation)
        })
        .collect())
}

/// Tool orientation pressing into the board: tool z along the inward normal.
pub fn eraser_orientation(board: &PlaneBoard) -> Rotation {
    board.pose().orientation.compose(&crate::scenario::tool_down())
}

/// Lane centre lines `(v, u_start, u_end)` of the boustrophedon sweep, in
/// board coordinates.
pub fn wiping_lanes(board: &PlaneBoard) -> Result<Vec<(f64, f64, f64)>> {
    let (umin, umax, vmin, vmax) = board.ink.inked_bounds().ok_or(Error::NothingToWipe)?;
    let spacing = board.eraser.1 * (1.0 - LANE_OVERLAP);
    let lanes = step_count(vmax - vmin, spacing) + 1;
    let (hu, hv) = (0.5 * board.size.0, 0.5 * board.size.1);
    let (u0, u1) = ((umin - LANE_OVERRUN).max(-hu), (umax + LANE_OVERRUN).min(hu));
    Ok((0..lanes)
        .map(|i| {
            let v = (vmin + i as f64 * spacing).min(vmax).clamp(-hv, hv);
            if i % 2 == 0 {
                (v, u0, u1)
            } else {
                (v, u1, u0)
            }
        })
        .collect())
}

/// Zigzag sweep over the inked bounding box at press depth.
pub fn plan_wiping(board: &PlaneBoard) -> Result<Vec<Pose>> {
    let lanes = wiping_lanes(board)?;
    let q = eraser_orientation(board);
    let mut pts: Vec<(f64, f64)> = vec![(lanes[0].1, lanes[0].0)];
    let push_segment = |pts: &mut Vec<(f64, f64)>, to: (f64, f64)| {
        let from = *pts.last().expect("seeded");
        let len = ((to.0 - from.0).powi(2) + (to.1 - from.1).powi(2)).sqrt();
        let n = step_count(len, WIPE_STEP);
        for i in 1..=n {
            let s = i as f64 / n as f64;
            pts.push((from.0 + (to.0 - from.0) * s, from.1 + (to.1 - from.1) * s));
        }
    };
    for (k, &(v, u_start, u_end)) in lanes.iter().enumerate() {
        if k > 0 {
            push_segment(&mut pts, (u_start, v));
        }
        push_segment(&mut pts, (u_end, v));
    }
    Ok(pts.into_iter().map(|(u, v)| Pose::new(board.to_world(Vec3::new(u, v, -PRESS_DEPTH)), q)).collect())
}

/// Board after executing `poses` with ideal tracking and sufficient force.
pub fn ideal_wipe(board: &PlaneBoard, poses: &[Pose]) -> PlaneBoard {
    let mut b = board.clone();
    let (hu, hv) = (0.5 * b.eraser.0, 0.5 * b.eraser.1);
    let wipe_at = |b: &mut PlaneBoard, p: Vec3| {
        let l = b.to_local(p);
        b.ink.wipe_rect(l.x, l.y, hu, hv);
    };
    if let Some(first) = poses.first() {
        wipe_at(&mut b, first.position);
    }
    for w in poses.windows(2) {
        let n = step_count((w[1].position - w[0].position).norm(), 0.001).max(1);
        for i in 1..=n {
            wipe_at(&mut b, w[0].position.lerp(w[1].position, i as f64 / n as f64));
        }
    }
    b
}

/// Every inked cell is erased by the plan under ideal tracking.
pub fn coverage_complete(board: &PlaneBoard, poses: &[Pose]) -> bool {
    ideal_wipe(board, poses).ink.inked_count() == 0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArticulatedPlan {
    pub poses: Vec<Pose>,
    pub constraints: Vec<DoorConstraint>,
}

/// Circular grasp trajectory: for a door, a handle turn followed by the hinge
/// pull; for a microwave, the hinge pull only. `target_angle` is the final
/// door angle.
pub fn plan_articulated(door: &HingedDoor, target_angle: f64, step: f64) -> Result<ArticulatedPlan> {
    if !(step > 0.0) {
        return Err(Error::NonPositiveParameter { name: "step", value: step });
    }
    let (theta0, phi0) = (door.door_angle, door.handle_angle);
    let pose_at =
        |theta: f64, phi: f64| Pose::new(door.grip_point_at(theta, phi), door.grip_orientation_at(theta, phi));
    let mut poses = vec![pose_at(theta0, phi0)];
    let mut constraints = vec![DoorConstraint::Hinge];
    let mut phi = phi0;
    if door.kind == DoorKind::Door && door.handle_turn > phi0 {
        constraints[0] = DoorConstraint::Handle;
        let n = step_count(door.handle_turn - phi0, step);
        for i in 1..=n {
            phi = phi0 + (door.handle_turn - phi0) * i as f64 / n as f64;
            poses.push(pose_at(theta0, phi));
            constraints.push(DoorConstraint::Handle);
        }
    }
    let n = step_count(target_angle - theta0, step);
    for i in 1..=n {
        poses.push(pose_at(theta0 + (target_angle - theta0) * i as f64 / n as f64, phi));
        constraints.push(DoorConstraint::Hinge);
    }
    Ok(ArticulatedPlan { poses, constraints })
}

/// Expert output at one policy step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertStep {
    pub pose: Pose,
    pub gripper: f64,
    /// Active door constraint during articulated contact.
    pub constraint: Option<DoorConstraint>,
}

/// Per-step supervision target: 10-d pose (position, 6-d rotation, gripper),
/// contact normal (zero when out of contact) and contact flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervisionTuple {
    pub pose: [f64; 10],
    pub normal: Vec3,
    pub contact: bool,
}

pub const RECORD_LEN: usize = 14;

impl SupervisionTuple {
    pub fn new(pose: &Pose, gripper: f64, normal: Option<UnitVec3>, contact: bool) -> Self {
        Self { pose: encode_pose10(pose, gripper), normal: normal.map(|n| n.get()).unwrap_or(Vec3::ZERO), contact }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.pose[0], self.pose[1], self.pose[2])
    }

    pub fn rot6d(&self) -> Rot6D {
        let mut r = [0.0; 6];
        r.copy_from_slice(&self.pose[3..9]);
        Rot6D(r)
    }

    pub fn gripper(&self) -> f64 {
        self.pose[9]
    }

    pub fn decode_pose(&self) -> Result<Pose> {
        Ok(Pose::new(self.position(), rot6d_decode(&self.rot6d())?))
    }

    /// Normal when the tuple is in contact and carries a usable direction.
    pub fn normal_unit(&self) -> Option<UnitVec3> {
        if self.contact {
            self.normal.try_normalize(1e-9)
        } else {
            None
        }
    }

    pub fn to_record(&self) -> [f64; RECORD_LEN] {
        let mut r = [0.0; RECORD_LEN];
        r[..10].copy_from_slice(&self.pose);
        r[10..13].copy_from_slice(&self.normal.to_array());
        r[13] = if self.contact { 1.0 } else { 0.0 };
        r
    }

    /// Parses a record, checking that the rotation decodes and the contact
    /// normal is unit.
    pub fn from_record(r: &[f64; RECORD_LEN]) -> Result<Self> {
        let mut pose = [0.0; 10];
        pose.copy_from_slice(&r[..10]);
        let contact = if r[13] == 0.0 {
            false
        } else if r[13] == 1.0 {
            true
        } else {
            return Err(Error::Dataset(format!("contact flag must be 0 or 1, got {}", r[13])));
        };
        let t = Self { pose, normal: Vec3::new(r[10], r[11], r[12]), contact };
        t.decode_pose()?;
        if contact && (t.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Dataset("contact normal is not unit".into()));
        }
        Ok(t)
    }
}

pub fn encode_pose10(pose: &Pose, gripper: f64) -> [f64; 10] {
    let r = rot6d_encode(&pose.orientation).0;
    [pose.position.x, pose.position.y, pose.position.z, r[0], r[1], r[2], r[3], r[4], r[5], gripper]
}

fn step_normal(env: &TaskEnvironment, step: &ExpertStep, fallback: Option<DoorConstraint>) -> Result<UnitVec3> {
    match (env, step.constraint.or(fallback)) {
        (TaskEnvironment::HingedDoor(d), Some(c)) => d.constraint_normal(c, step.pose.position),
        _ => env.manifold_normal(&step.pose),
    }
}

/// Shifts the trajectory by one step: tuple `t` targets step `t + 1`, with the
/// normal of the manifold at `t + 1` and the contact flag of step `t`.
pub fn extract_supervision(
    steps: &[ExpertStep],
    phases: &[FsmPhase],
    env: &TaskEnvironment,
) -> Result<Vec<SupervisionTuple>> {
    if steps.len() != phases.len() {
        return Err(Error::LengthMismatch { left: steps.len(), right: phases.len() });
    }
    (0..steps.len().saturating_sub(1))
        .map(|t| {
            let next = &steps[t + 1];
            let contact = phases[t].contact_flag();
            let normal = if contact { Some(step_normal(env, next, steps[t].constraint)?) } else { None };
            Ok(SupervisionTuple::new(&next.pose, next.gripper, normal, contact))
        })
        .collect()
}

/// One expert rollout with its supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub task: Task,
    /// Environment the plan was made for.
    pub env: TaskEnvironment,
    pub steps: Vec<ExpertStep>,
    pub phases: Vec<FsmPhase>,
    pub tuples: Vec<SupervisionTuple>,
}

impl Demonstration {
    pub fn start_pose(&self) -> Pose {
        self.steps[0].pose
    }

    /// Time covered by the supervision (s).
    pub fn duration(&self) -> f64 {
        self.tuples.len() as f64 * POLICY_DT
    }

    /// Index of the first contact tuple.
    pub fn contact_onset(&self) -> Option<usize> {
        self.tuples.iter().position(|t| t.contact)
    }
}

#[derive(Default)]
struct Builder {
    steps: Vec<ExpertStep>,
    phases: Vec<FsmPhase>,
}

impl Builder {
    /// Appends `poses`, skipping the first when it continues the previous segment.
    fn extend(&mut self, poses: &[Pose], gripper: f64, label: PhaseLabel, constraint: Option<DoorConstraint>) {
        let skip = usize::from(!self.steps.is_empty());
        for p in poses.iter().skip(skip) {
            self.steps.push(ExpertStep { pose: *p, gripper, constraint });
            self.phases.push(FsmPhase::new(label));
        }
    }

    fn hold(&mut self, n: usize, gripper: f64, label: PhaseLabel) {
        let last = *self.steps.last().expect("hold after a segment");
        for _ in 0..n {
            self.steps.push(ExpertStep { gripper, ..last });
            self.phases.push(FsmPhase::new(label));
        }
    }

    fn last_pose(&self) -> Pose {
        self.steps.last().expect("non-empty").pose
    }

    fn finish(self, task: Task, env: &TaskEnvironment) -> Result<Demonstration> {
        let tuples = extract_supervision(&self.steps, &self.phases, env)?;
        Ok(Demonstration { task, env: env.clone(), steps: self.steps, phases: self.phases, tuples })
    }
}

/// Opening targets and arc steps per articulated task (rad).
pub fn articulation_targets(kind: DoorKind) -> (f64, f64) {
    match kind {
        DoorKind::Microwave => (65f64.to_radians(), 1.5f64.to_radians()),
        DoorKind::Door => (40f64.to_radians(), 1f64.to_radians()),
    }
}

/// Plans a full expert rollout for `env` starting at `start`.
pub fn generate_demo(task: Task, env: &TaskEnvironment, start: &Pose) -> Result<Demonstration> {
    let mut b = Builder::default();
    match task {
        Task::WW => {
            let board = env.as_board()?;
            let sweep = plan_wiping(board)?;
            let n = board.contact.normal.get();
            let first = sweep[0];
            let hover = Pose::new(first.position + n * (HOVER_HEIGHT + PRESS_DEPTH), first.orientation);
            b.extend(&straight_line(start, &hover, APPROACH_STEPS), 1.0, PhaseLabel::Approach, None);
            b.extend(&straight_line(&hover, &first, FINAL_APPROACH_STEPS), 1.0, PhaseLabel::ContactInteraction, None);
            b.extend(&sweep, 1.0, PhaseLabel::ContactInteraction, None);
            let last = b.last_pose();
            let up = Pose::new(last.position + n * 0.05, last.orientation);
            b.extend(&straight_line(&last, &up, RETRACT_STEPS), 1.0, PhaseLabel::Retract, None);
        }
        Task::PH => {
            let hole = env.as_hole()?;
            let q = hole.pose().orientation.compose(&crate::scenario::tool_down());
            let above = Pose::new(hole.rim_center() + hole.axis().get() * INSERT_START_HEIGHT, q);
            b.extend(&straight_line(start, &above, APPROACH_STEPS), 1.0, PhaseLabel::Approach, None);
            b.extend(&plan_insertion(hole, &above, INSERT_STEP)?, 1.0, PhaseLabel::ContactInteraction, None);
            b.hold(HOLD_STEPS, 1.0, PhaseLabel::ContactInteraction);
        }
        Task::MO | Task::DO => {
            let door = env.as_door()?;
            let expected = if task == Task::MO { DoorKind::Microwave } else { DoorKind::Door };
            if door.kind != expected {
                return Err(Error::InvalidParameter(format!("task {task} needs a {expected:?} environment")));
            }
            let grasp = Pose::new(door.grip_point(), door.grip_orientation());
            let tool_z = grasp.orientation.rotate(Vec3::Z);
            let pregrasp = Pose::new(grasp.position - tool_z * PREGRASP_OFFSET, grasp.orientation);
            b.extend(&straight_line(start, &pregrasp, APPROACH_STEPS), 0.0, PhaseLabel::Approach, None);
            b.extend(&straight_line(&pregrasp, &grasp, FINAL_APPROACH_STEPS), 0.0, PhaseLabel::Approach, None);
            b.hold(GRASP_STEPS, 1.0, PhaseLabel::Grasp);
            let (target, step) = articulation_targets(door.kind);
            let plan = plan_articulated(door, target, step)?;
            for (p, c) in plan.poses.iter().zip(&plan.constraints).skip(1) {
                b.steps.push(ExpertStep { pose: *p, gripper: 1.0, constraint: Some(*c) });
                b.phases.push(FsmPhase::new(PhaseLabel::ContactInteraction));
            }
            b.hold(GRASP_STEPS, 0.0, PhaseLabel::Retract);
            let last = b.last_pose();
            let away = Pose::new(last.position - last.orientation.rotate(Vec3::Z) * 0.08, last.orientation);
            let mut retreat = straight_line(&last, &away, RETRACT_STEPS);
            retreat.remove(0);
            for p in retreat {
                b.steps.push(ExpertStep { pose: p, gripper: 0.0, constraint: None });
                b.phases.push(FsmPhase::new(PhaseLabel::Retract));
            }
        }
    }
    b.finish(task, env)
}

/// Deterministic per-episode generator: stream `index` of the seed.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Randomized initial state plus expert rollout for episode `index`.
pub fn sample_demo(task: Task, params: &EnvParams, seed: u64, index: u64) -> Result<Demonstration> {
    let mut rng = episode_rng(seed, index);
    let (env, start) = sample_initial_state(task, params, &mut rng)?;
    generate_demo(task, &env, &start)
}

/// Generates `count` demonstrations in parallel; output order follows the index.
pub fn generate_demos(task: Task, params: &EnvParams, seed: u64, count: usize) -> Result<Vec<Demonstration>> {
    (0..count as u64).into_par_iter().map(|i| sample_demo(task, params, seed, i)).collect()
}

/// Wiping coverage of a demonstration's contact poses (true for other tasks).
pub fn demo_coverage_ok(demo: &Demonstration) -> bool {
    match &demo.env {
        TaskEnvironment::PlaneBoard(board) => {
            let contact: Vec<Pose> =
                demo.steps.iter().zip(&demo.phases).filter(|(_, ph)| ph.contact_flag()).map(|(s, _)| s.pose).collect();
            coverage_complete(board, &contact)
        }
        _ => true,
    }
}
