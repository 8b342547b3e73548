//! Closed-loop episodes: oracle policy at 10 Hz, admittance controller at
//! 1 kHz, environment contact and disturbances, safety monitoring, metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{AdmittanceConfig, AdmittanceController, ControllerCommand, ControllerState, CONTROL_DT};
use crate::environment::{DisturbanceEvent, DisturbanceKind, TaskEnvironment};
use crate::error::{Error, Result};
use crate::expert::{episode_rng, generate_demo, Demonstration, PhaseLabel, SupervisionTuple, POLICY_DT};
use crate::geometry::{interpolate_pose, Pose, Vec3};
use crate::policy::{predict, ActionChunk, NoiseSpec, Observation, DEFAULT_HORIZON};
use crate::scenario::{sample_initial_state, EnvParams, Task};

/// Controller ticks per policy step.
pub const TICKS_PER_POLICY_STEP: usize = 100;
/// Time simulated after the demonstration ends when no duration is given (s).
pub const DEFAULT_SETTLE_TIME: f64 = 2.0;

pub const MO_SUCCESS_ANGLE: f64 = 50.0;
pub const DO_SUCCESS_ANGLE: f64 = 30.0;
pub const PH_SUCCESS_DEPTH: f64 = 10.0;
pub const WW_SUCCESS_INK: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    ForceAware,
    BaselineLow,
    BaselineMid,
    BaselineHigh,
}

impl ControllerMode {
    pub const ALL: [ControllerMode; 4] = [
        ControllerMode::ForceAware,
        ControllerMode::BaselineLow,
        ControllerMode::BaselineMid,
        ControllerMode::BaselineHigh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerMode::ForceAware => "force_aware",
            ControllerMode::BaselineLow => "baseline_low",
            ControllerMode::BaselineMid => "baseline_mid",
            ControllerMode::BaselineHigh => "baseline_high",
        }
    }

    /// Controller configuration for `task`. Baselines are isotropic with
    /// stiffness 50/200/800 and no force terms; the force-aware mode keeps the
    /// base stiffness and enables the per-task force features.
    pub fn admittance_config(self, task: Task, base: &AdmittanceConfig, target_force: Option<f64>) -> AdmittanceConfig {
        let mut cfg = *base;
        let baseline = |cfg: &mut AdmittanceConfig, k: f64| {
            cfg.stiffness = k;
            cfg.enable_normal_regulation = false;
            cfg.enable_tangent_stiffening = false;
            cfg.target_force = 0.0;
        };
        match self {
            ControllerMode::BaselineLow => baseline(&mut cfg, 50.0),
            ControllerMode::BaselineMid => baseline(&mut cfg, 200.0),
            ControllerMode::BaselineHigh => baseline(&mut cfg, 800.0),
            ControllerMode::ForceAware => {
                let (stiffen, regulate, f_h) = match task {
                    Task::MO => (true, false, 0.0),
                    Task::PH => (false, true, 2.0),
                    Task::WW => (true, true, 4.0),
                    Task::DO => (true, false, 0.0),
                };
                cfg.enable_tangent_stiffening = stiffen;
                cfg.enable_normal_regulation = regulate;
                cfg.target_force = target_force.unwrap_or(f_h);
            }
        }
        cfg
    }
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::ConfigParse(format!("unknown controller mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyLimits {
    /// Force magnitude limit (N).
    pub force: f64,
    /// Torque magnitude limit (Nm).
    pub torque: f64,
    /// Violations must last longer than this to stop the robot (s).
    pub debounce: f64,
}

impl Default for SafetyLimits {
    fn default() -> Self {
        Self { force: 25.0, torque: 10.0, debounce: 0.02 }
    }
}

impl SafetyLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.force > 0.0) {
            return Err(Error::NonPositiveParameter { name: "safety force limit", value: self.force });
        }
        if !(self.torque > 0.0) {
            return Err(Error::NonPositiveParameter { name: "safety torque limit", value: self.torque });
        }
        if !(self.debounce >= 0.0) {
            return Err(Error::InvalidParameter("safety debounce must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyStatus {
    Ok,
    Stopped,
}

/// Debounced limit check, fed one sample per tick.
#[derive(Debug, Clone)]
pub struct SafetyMonitor {
    limits: SafetyLimits,
    dt: f64,
    over: usize,
}

impl SafetyMonitor {
    pub fn new(limits: SafetyLimits, dt: f64) -> Self {
        Self { limits, dt, over: 0 }
    }

    pub fn update(&mut self, force: f64, torque: f64) -> SafetyStatus {
        if force > self.limits.force || torque > self.limits.torque {
            self.over += 1;
        } else {
            self.over = 0;
        }
        if self.over as f64 * self.dt > self.limits.debounce + 1e-12 {
            SafetyStatus::Stopped
        } else {
            SafetyStatus::Ok
        }
    }
}

/// Checks force/torque magnitude series sampled every `dt`.
pub fn safety_monitor(forces: &[f64], torques: &[f64], limits: &SafetyLimits, dt: f64) -> SafetyStatus {
    let mut m = SafetyMonitor::new(*limits, dt);
    let n = forces.len().max(torques.len());
    for i in 0..n {
        let f = forces.get(i).copied().unwrap_or(0.0);
        let tq = torques.get(i).copied().unwrap_or(0.0);
        if m.update(f, tq) == SafetyStatus::Stopped {
            return SafetyStatus::Stopped;
        }
    }
    SafetyStatus::Ok
}

fn default_mode() -> ControllerMode {
    ControllerMode::ForceAware
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub task: Task,
    #[serde(default = "default_mode")]
    pub mode: ControllerMode,
    #[serde(default)]
    pub seed: u64,
    /// Episode length (s); defaults to the demonstration plus a settle time,
    /// capped at the task time limit.
    #[serde(default)]
    pub duration: Option<f64>,
    /// Overrides the per-task target normal force in force-aware mode (N).
    #[serde(default)]
    pub target_force: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// End the episode as soon as the task succeeds.
    #[serde(default)]
    pub stop_on_success: bool,
    #[serde(default)]
    pub env: EnvParams,
    #[serde(default)]
    pub admittance: AdmittanceConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub safety: SafetyLimits,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceEvent>,
}

impl ScenarioConfig {
    pub fn new(task: Task, mode: ControllerMode, seed: u64) -> Self {
        Self {
            task,
            mode,
            seed,
            duration: None,
            target_force: None,
            horizon: DEFAULT_HORIZON,
            stop_on_success: false,
            env: EnvParams::default(),
            admittance: AdmittanceConfig::default(),
            noise: NoiseSpec::default(),
            safety: SafetyLimits::default(),
            disturbances: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d <= self.task.time_limit()) {
                return Err(Error::InvalidParameter(format!(
                    "duration {d} s outside [0, {}] for task {}",
                    self.task.time_limit(),
                    self.task
                )));
            }
        }
        if let Some(f) = self.target_force {
            if !(f >= 0.0) {
                return Err(Error::InvalidParameter("target_force must be >= 0".into()));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        self.env.validate()?;
        self.controller_config().validate()?;
        self.noise.validate()?;
        self.safety.validate()?;
        for ev in &self.disturbances {
            ev.validate()?;
        }
        Ok(())
    }

    pub fn controller_config(&self) -> AdmittanceConfig {
        self.mode.admittance_config(self.task, &self.admittance, self.target_force)
    }

    pub fn is_disturbed(&self) -> bool {
        !self.disturbances.is_empty()
    }

    /// Initial environment and expert rollout for this seed.
    pub fn initial_state(&self) -> Result<(TaskEnvironment, Demonstration)> {
        let mut rng = episode_rng(self.seed, 0);
        let (env, start) = sample_initial_state(self.task, &self.env, &mut rng)?;
        let demo = generate_demo(self.task, &env, &start)?;
        Ok((env, demo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    /// Time at the end of the tick (s).
    pub t: f64,
    pub x_r: Vec3,
    pub v_r: Vec3,
    /// Deadbanded external force seen by the controller.
    pub f_ext: Vec3,
    /// External force before the deadband.
    pub f_raw: Vec3,
    pub torque_raw: Vec3,
    pub f_cmd: Vec3,
    /// Eigenvalues of the effective stiffness, ascending.
    pub k_eig: [f64; 3],
    pub x_cmd: Vec3,
    pub phase: PhaseLabel,
    pub contact: bool,
    /// Commanded contact normal, zero when none.
    pub normal: Vec3,
    pub disturbed: bool,
}

impl TickRecord {
    /// Sensed force along the commanded normal.
    pub fn normal_force(&self) -> f64 {
        self.normal.dot(self.f_ext)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeMetrics {
    pub success: bool,
    pub safety_stop: bool,
    pub stop_time: Option<f64>,
    /// mm
    pub insertion_depth: Option<f64>,
    /// cm
    pub initial_ink: Option<f64>,
    /// cm
    pub remaining_ink: Option<f64>,
    /// deg
    pub opening_angle: Option<f64>,
    /// Peak raw force magnitude (N).
    pub peak_force: f64,
}

impl EpisodeMetrics {
    /// The task's headline metric.
    pub fn primary(&self, task: Task) -> f64 {
        match task {
            Task::PH => self.insertion_depth,
            Task::WW => self.remaining_ink,
            Task::MO | Task::DO => self.opening_angle,
        }
        .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub task: Task,
    pub mode: ControllerMode,
    pub seed: u64,
    pub records: Vec<TickRecord>,
    pub metrics: EpisodeMetrics,
    /// Time the expert schedule enters contact (s).
    pub contact_phase_start: Option<f64>,
}

/// Applies the task's success threshold; any safety stop is a failure.
pub fn success_check(task: Task, m: &EpisodeMetrics) -> bool {
    if m.safety_stop {
        return false;
    }
    match task {
        Task::MO => m.opening_angle.is_some_and(|a| a >= MO_SUCCESS_ANGLE),
        Task::DO => m.opening_angle.is_some_and(|a| a >= DO_SUCCESS_ANGLE),
        Task::PH => m.insertion_depth.is_some_and(|d| d >= PH_SUCCESS_DEPTH),
        Task::WW => m.remaining_ink.is_some_and(|r| r < WW_SUCCESS_INK),
    }
}

fn task_metrics(task: Task, env: &TaskEnvironment, eef: &Pose, m: &mut EpisodeMetrics) -> Result<()> {
    match task {
        Task::PH => m.insertion_depth = Some(env.insertion_depth(eef)?),
        Task::WW => m.remaining_ink = Some(env.remaining_ink_length()?),
        Task::MO | Task::DO => m.opening_angle = Some(env.opening_angle()?),
    }
    Ok(())
}

pub fn run_episode(cfg: &ScenarioConfig) -> Result<RunLog> {
    cfg.validate()?;
    let (env, demo) = cfg.initial_state()?;
    run_with_demo(cfg, env, &demo)
}

struct Policy<'a> {
    demo: &'a Demonstration,
    noise: NoiseSpec,
    horizon: usize,
    chunk: Option<ActionChunk>,
}

impl Policy<'_> {
    /// Action for policy step `j`; past the demo the last action is held.
    fn action(&mut self, j: usize, current: &Pose, gripper: f64) -> Result<Option<SupervisionTuple>> {
        if j >= self.demo.tuples.len() {
            return Ok(None);
        }
        if j.is_multiple_of(self.horizon) || self.chunk.is_none() {
            let obs = Observation::new(current, gripper, j);
            self.chunk = Some(predict(&obs, &self.demo.tuples, &self.noise, self.horizon)?);
        }
        Ok(self.chunk.as_ref().map(|c| c.actions()[j % self.horizon]))
    }
}

/// Runs one episode against a given initial environment and demonstration.
pub fn run_with_demo(cfg: &ScenarioConfig, mut env: TaskEnvironment, demo: &Demonstration) -> Result<RunLog> {
    let dt = CONTROL_DT;
    let start = demo.start_pose();
    let duration = cfg.duration.unwrap_or_else(|| (demo.duration() + DEFAULT_SETTLE_TIME).min(cfg.task.time_limit()));
    let n_ticks = (duration / dt).round() as usize;

    let mut ctrl = AdmittanceController::new(
        cfg.controller_config(),
        ControllerState::at_rest(start.position, start.orientation),
    )?;
    let mut policy = Policy { demo, noise: cfg.noise, horizon: cfg.horizon, chunk: None };
    let mut monitor = SafetyMonitor::new(cfg.safety, dt);
    let mut metrics = EpisodeMetrics::default();
    if cfg.task == Task::WW {
        metrics.initial_ink = Some(env.remaining_ink_length()?);
    }

    let mut records = Vec::with_capacity(n_ticks);
    let mut prev_pose = start;
    let mut action = SupervisionTuple::new(&start, demo.steps[0].gripper, None, false);
    let mut target = start;
    let mut phase = demo.phases[0].label;
    let disturbed = cfg.is_disturbed();

    for i in 0..n_ticks {
        let t = i as f64 * dt;
        if i % TICKS_PER_POLICY_STEP == 0 {
            let j = i / TICKS_PER_POLICY_STEP;
            prev_pose = target;
            let st = ctrl.state();
            if let Some(a) = policy.action(j, &Pose::new(st.x_r, st.q_r), action.gripper())? {
                action = a;
                target = a.decode_pose()?;
                phase = demo.phases[j.min(demo.phases.len() - 1)].label;
            }
        }
        let s = ((i % TICKS_PER_POLICY_STEP) + 1) as f64 / TICKS_PER_POLICY_STEP as f64;
        let pose_cmd = interpolate_pose(&prev_pose, &target, s);
        let cmd = ControllerCommand {
            x_cmd: pose_cmd.position,
            q_cmd: pose_cmd.orientation,
            gripper: action.gripper(),
            normal: action.normal_unit(),
            contact: action.contact,
        };

        if disturbed {
            env.apply_disturbances(&cfg.disturbances, t);
        }
        let st = *ctrl.state();
        let eef = Pose::new(st.x_r, st.q_r);
        let mut raw = env.external_wrench(&eef, st.v_r);
        if let TaskEnvironment::PlaneBoard(board) = &mut env {
            let fn_env = board.contact.normal.get().dot(raw.force);
            board.update_ink(&eef, fn_env > 0.0, fn_env);
        }
        let mut active = false;
        for ev in &cfg.disturbances {
            if ev.kind == DisturbanceKind::ForcePulse {
                raw.force += ev.force(t);
            }
            active |= ev.is_active(t);
        }

        let status = monitor.update(raw.force.norm(), raw.torque.norm());
        metrics.peak_force = metrics.peak_force.max(raw.force.norm());

        let out = ctrl
            .tick(&cmd, raw, dt)
            .map_err(|e| Error::NonFiniteState(format!("t = {t:.3} s, task {}, mode {}: {e}", cfg.task, cfg.mode)))?;
        let next = *ctrl.state();
        env.advance(&Pose::new(next.x_r, next.q_r), next.v_r, cmd.gripper, dt);

        records.push(TickRecord {
            t: (i + 1) as f64 * dt,
            x_r: next.x_r,
            v_r: next.v_r,
            f_ext: out.sensed.force,
            f_raw: raw.force,
            torque_raw: raw.torque,
            f_cmd: out.f_cmd,
            k_eig: out.k_eff.symmetric_eigenvalues(),
            x_cmd: cmd.x_cmd,
            phase,
            contact: cmd.contact,
            normal: cmd.normal.filter(|_| cmd.contact).map(|n| n.get()).unwrap_or(Vec3::ZERO),
            disturbed: active,
        });

        if status == SafetyStatus::Stopped {
            metrics.safety_stop = true;
            metrics.stop_time = Some((i + 1) as f64 * dt);
            break;
        }
        if cfg.stop_on_success && (i + 1) % TICKS_PER_POLICY_STEP == 0 {
            task_metrics(cfg.task, &env, &Pose::new(next.x_r, next.q_r), &mut metrics)?;
            if success_check(cfg.task, &metrics) {
                break;
            }
        }
    }

    let st = ctrl.state();
    task_metrics(cfg.task, &env, &Pose::new(st.x_r, st.q_r), &mut metrics)?;
    metrics.success = success_check(cfg.task, &metrics);
    Ok(RunLog {
        task: cfg.task,
        mode: cfg.mode,
        seed: cfg.seed,
        records,
        metrics,
        contact_phase_start: demo.contact_onset().map(|k| k as f64 * POLICY_DT),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub task: Task,
    pub mode: ControllerMode,
    pub seed: u64,
    pub disturbed: bool,
    pub metrics: EpisodeMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub task: Task,
    pub mode: ControllerMode,
    pub disturbed: bool,
    pub count: usize,
    pub success_rate: f64,
    pub safety_stop_rate: f64,
    /// Mean of the task's headline metric.
    pub mean_metric: f64,
    pub mean_peak_force: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteResult {
    pub episodes: Vec<EpisodeResult>,
    pub rows: Vec<SummaryRow>,
}

/// Runs every scenario (in parallel) and aggregates per task, mode and
/// disturbance setting. Results do not depend on thread scheduling.
pub fn run_suite(cfgs: &[ScenarioConfig]) -> Result<SuiteResult> {
    let episodes = cfgs
        .par_iter()
        .map(|cfg| {
            let log = run_episode(cfg)?;
            Ok(EpisodeResult {
                task: cfg.task,
                mode: cfg.mode,
                seed: cfg.seed,
                disturbed: cfg.is_disturbed(),
                metrics: log.metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut groups: BTreeMap<(Task, ControllerMode, bool), Vec<&EpisodeResult>> = BTreeMap::new();
    for e in &episodes {
        groups.entry((e.task, e.mode, e.disturbed)).or_default().push(e);
    }
    let rows = groups
        .into_iter()
        .map(|((task, mode, disturbed), es)| {
            let n = es.len() as f64;
            let rate = |f: &dyn Fn(&EpisodeResult) -> bool| es.iter().filter(|e| f(e)).count() as f64 / n;
            SummaryRow {
                task,
                mode,
                disturbed,
                count: es.len(),
                success_rate: rate(&|e| e.metrics.success),
                safety_stop_rate: rate(&|e| e.metrics.safety_stop),
                mean_metric: es.iter().map(|e| e.metrics.primary(task)).sum::<f64>() / n,
                mean_peak_force: es.iter().map(|e| e.metrics.peak_force).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(SuiteResult { episodes, rows })
}

fn default_modes() -> Vec<ControllerMode> {
    ControllerMode::ALL.to_vec()
}

fn default_seeds() -> u64 {
    25
}

fn default_true() -> bool {
    true
}

/// Batch description: a template scenario run for each mode and seed, with
/// and without the listed disturbances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_modes")]
    pub modes: Vec<ControllerMode>,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub first_seed: u64,
    /// Also run each seed without disturbances.
    #[serde(default = "default_true")]
    pub undisturbed: bool,
    /// Events for the disturbed runs; none means no disturbed runs.
    #[serde(default)]
    pub disturbances: Vec<DisturbanceEvent>,
}

impl SuiteConfig {
    pub fn new(scenario: ScenarioConfig) -> Self {
        Self {
            scenario,
            modes: default_modes(),
            seeds: default_seeds(),
            first_seed: 0,
            undisturbed: true,
            disturbances: Vec::new(),
        }
    }

    /// One scenario per (mode, seed, variant). Seeds drive both the initial
    /// state and the policy noise.
    pub fn expand(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &mode in &self.modes {
            for seed in self.first_seed..self.first_seed + self.seeds {
                let mut cfg = self.scenario.clone();
                cfg.mode = mode;
                cfg.seed = seed;
                cfg.noise.seed = seed;
                if self.undisturbed {
                    let mut c = cfg.clone();
                    c.disturbances.clear();
                    out.push(c);
                }
                if !self.disturbances.is_empty() {
                    cfg.disturbances = self.disturbances.clone();
                    out.push(cfg);
                }
            }
        }
        out
    }
}
