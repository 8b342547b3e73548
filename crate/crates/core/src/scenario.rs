//! Task definitions and randomized initial states.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{FrictionModel, HingedDoor, HoleFixture, PlaneBoard, TaskEnvironment};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, UnitVec3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    /// Microwave opening.
    MO,
    /// Peg in hole.
    PH,
    /// Whiteboard wiping.
    WW,
    /// Door opening.
    DO,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::MO, Task::PH, Task::WW, Task::DO];

    /// Episode time limit (s).
    pub fn time_limit(self) -> f64 {
        match self {
            Task::PH => 60.0,
            _ => 120.0,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Task::MO => 0,
            Task::PH => 1,
            Task::WW => 2,
            Task::DO => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::MO => "MO",
            Task::PH => "PH",
            Task::WW => "WW",
            Task::DO => "DO",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MO" => Ok(Task::MO),
            "PH" => Ok(Task::PH),
            "WW" => Ok(Task::WW),
            "DO" => Ok(Task::DO),
            other => Err(Error::ConfigParse(format!("unknown task `{other}` (expected MO, PH, WW or DO)"))),
        }
    }
}

/// Physical parameters shared by all randomized instances of a task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    /// Surface stiffness k_e (N/m).
    pub surface_stiffness: f64,
    pub friction: FrictionModel,
    /// Latch / snap-lock resistance (N).
    pub latch_force: f64,
    /// Sample object poses and scribbles; when false the nominal layout is used.
    pub randomize: bool,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            surface_stiffness: crate::environment::DEFAULT_SURFACE_STIFFNESS,
            friction: FrictionModel::default(),
            latch_force: 15.0,
            randomize: true,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.surface_stiffness > 0.0) {
            return Err(Error::NonPositiveParameter { name: "surface_stiffness", value: self.surface_stiffness });
        }
        if !(self.latch_force >= 0.0) {
            return Err(Error::InvalidParameter("latch_force must be >= 0".into()));
        }
        self.friction.validate()
    }
}

/// Tool pointing straight down (tool z along world -z).
pub fn tool_down() -> Rotation {
    Rotation::from_axis_angle(UnitVec3::X, std::f64::consts::PI)
}

fn sym<R: Rng>(rng: &mut R, half: f64, randomize: bool) -> f64 {
    if randomize && half > 0.0 {
        rng.gen_range(-half..=half)
    } else {
        0.0
    }
}

/// Samples an initial environment and robot start pose for `task`.
pub fn sample_initial_state<R: Rng>(task: Task, params: &EnvParams, rng: &mut R) -> Result<(TaskEnvironment, Pose)> {
    params.validate()?;
    let r = params.randomize;
    let start = Pose::new(Vec3::new(0.3 + sym(rng, 0.05, r), sym(rng, 0.05, r), 0.4 + sym(rng, 0.05, r)), tool_down());
    let env = match task {
        Task::WW => {
            let height = 0.15 + sym(rng, 0.05, r);
            let tilt = sym(rng, 20f64.to_radians(), r);
            let pose = Pose::new(Vec3::new(0.5, 0.0, height), Rotation::from_axis_angle(UnitVec3::X, tilt));
            let mut board = PlaneBoard::new(
                pose,
                (0.3, 0.2),
                params.surface_stiffness,
                params.friction,
                crate::environment::DEFAULT_INK_CELL,
            )?;
            draw_scribbles(&mut board, rng, r);
            TaskEnvironment::PlaneBoard(board)
        }
        Task::PH => {
            let p = Vec3::new(0.5 + sym(rng, 0.2, r), sym(rng, 0.2, r), 0.1 + sym(rng, 0.1, r));
            let yaw = sym(rng, std::f64::consts::FRAC_PI_2, r);
            let mut hole = HoleFixture::new(Pose::new(p, Rotation::from_axis_angle(UnitVec3::Z, yaw)));
            hole.stiffness = params.surface_stiffness;
            TaskEnvironment::HoleFixture(hole)
        }
        Task::MO => {
            let pivot = Vec3::new(0.6 + sym(rng, 0.05, r), -0.15 + sym(rng, 0.1, r), 0.25 + sym(rng, 0.05, r));
            let mut door = HingedDoor::microwave(pivot, sym(rng, 15f64.to_radians(), r), 0.3);
            door.latch_force = params.latch_force;
            TaskEnvironment::HingedDoor(door)
        }
        Task::DO => {
            let pivot = Vec3::new(0.65 + sym(rng, 0.05, r), -0.5 + sym(rng, 0.15, r), 0.4 + sym(rng, 0.05, r));
            let mut door = HingedDoor::door(pivot, sym(rng, 15f64.to_radians(), r), 0.7);
            door.latch_force = params.latch_force;
            TaskEnvironment::HingedDoor(door)
        }
    };
    env.validate()?;
    Ok((env, start))
}

/// Random polyline strokes in the central region of the board.
fn draw_scribbles<R: Rng>(board: &mut PlaneBoard, rng: &mut R, randomize: bool) {
    let (hu, hv) = (0.09, 0.05);
    if !randomize {
        board.ink.draw_stroke(&[(-0.06, -0.03), (-0.02, 0.03), (0.02, -0.03), (0.06, 0.03)]);
        return;
    }
    let strokes = rng.gen_range(2..=4);
    for _ in 0..strokes {
        let mut p = (rng.gen_range(-hu..=hu), rng.gen_range(-hv..=hv));
        let mut pts = vec![p];
        for _ in 0..rng.gen_range(3..=6) {
            let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let len = rng.gen_range(0.02..=0.05);
            p = ((p.0 + len * ang.cos()).clamp(-hu, hu), (p.1 + len * ang.sin()).clamp(-hv, hv));
            pts.push(p);
        }
        board.ink.draw_stroke(&pts);
    }
}
