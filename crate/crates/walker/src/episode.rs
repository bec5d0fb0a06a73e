//! Episode rollout: terrain, rig, controller, reward, termination.

use physics2d::{EngineConfig, Vec2, World};
use serde::{Deserialize, Serialize};

use crate::genome::{GenomeError, Genotype, N_INPUT, N_OUTPUT};
use crate::params::EnvParams;
use crate::rig::{
    build_walker, WalkerRig, MOTORS_TORQUE, SPEED_HIP, SPEED_KNEE, WALKER_GROUP,
};
use crate::terrain::{generate_terrain, SCALE, TERRAIN_FRICTION};

/// Simulation rate, steps per second.
pub const FPS: f64 = 50.0;
/// Fixed physics timestep.
pub const DT: f64 = 1.0 / FPS;
/// Hard step limit per episode.
pub const EPISODE_CAP: usize = 1000;
/// Lidar reach in world units.
pub const LIDAR_RANGE: f64 = 160.0 / SCALE;
/// Number of lidar rays.
pub const LIDAR_COUNT: usize = 10;

const VIEWPORT_W: f64 = 600.0;
const VIEWPORT_H: f64 = 400.0;

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// The hull touched the terrain.
    HeadContact,
    /// The hull reached the course-complete flag.
    ReachedFlag,
    /// The step cap elapsed.
    StepCap,
}

/// Outcome of one episode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub total_reward: f64,
    pub steps: u32,
    pub termination: Termination,
    /// Hull x at spawn and at the final step, for displacement metrics.
    pub start_x: f64,
    pub final_x: f64,
}

impl EpisodeResult {
    /// Forward hull displacement over the episode, in world units (metres).
    pub fn displacement(&self) -> f64 {
        self.final_x - self.start_x
    }
}

/// One step of a traced episode, for replay output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: u32,
    pub hull_x: f64,
    pub hull_y: f64,
    pub hull_angle: f64,
    pub action: [f64; N_OUTPUT],
    pub joint_angles: [f64; 4],
    pub reward: f64,
}

/// The 24-entry observation vector:
/// hull angle, scaled angular and linear velocities, per-joint angle and
/// speed (hip-left, knee-left, hip-right, knee-right; knee angles offset by
/// +1), two foot contact flags, then ten lidar fractions.
pub fn observe(world: &World, rig: &WalkerRig) -> [f64; N_INPUT] {
    let hull = world.body(rig.hull);
    let mut obs = [0.0; N_INPUT];
    obs[0] = hull.angle;
    obs[1] = 2.0 * hull.angular_velocity / FPS;
    obs[2] = 0.3 * hull.linear_velocity.x * (VIEWPORT_W / SCALE) / FPS;
    obs[3] = 0.3 * hull.linear_velocity.y * (VIEWPORT_H / SCALE) / FPS;
    for k in 0..4 {
        let angle = world.joint_angle(rig.joints[k]);
        let speed = world.joint_speed(rig.joints[k]);
        if k % 2 == 0 {
            obs[4 + 2 * k] = angle;
            obs[5 + 2 * k] = speed / SPEED_HIP;
        } else {
            obs[4 + 2 * k] = angle + 1.0;
            obs[5 + 2 * k] = speed / SPEED_KNEE;
        }
    }
    obs[12] = f64::from(world.body(rig.legs[1]).touching_terrain());
    obs[13] = f64::from(world.body(rig.legs[3]).touching_terrain());
    for i in 0..LIDAR_COUNT {
        let angle = 1.5 * i as f64 / LIDAR_COUNT as f64;
        let dir = Vec2::new(angle.sin(), -angle.cos());
        obs[14 + i] = world.raycast(hull.position, dir, LIDAR_RANGE, WALKER_GROUP);
    }
    obs
}

fn motor_sign(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Commands all four joint motors from one action vector.
pub fn apply_action(world: &mut World, rig: &WalkerRig, action: &[f64; N_OUTPUT]) {
    for k in 0..4 {
        let speed = if k % 2 == 0 { SPEED_HIP } else { SPEED_KNEE };
        let torque = MOTORS_TORQUE * action[k].abs().clamp(0.0, 1.0);
        world
            .joint_mut(rig.joints[k])
            .set_motor(speed * motor_sign(action[k]), torque);
    }
}

fn shaping(world: &World, rig: &WalkerRig) -> f64 {
    let hull = world.body(rig.hull);
    130.0 * hull.position.x / SCALE - 5.0 * hull.angle.abs()
}

fn run(
    engine: &EngineConfig,
    genotype: &Genotype,
    params: &EnvParams,
    seed: u64,
    mut trace: Option<&mut Vec<StepTrace>>,
) -> Result<EpisodeResult, GenomeError> {
    let layout = generate_terrain(params, seed);
    let flag_x = layout.flag_x;
    let mut world = World::new(engine.clone());
    world.set_terrain(layout.points, TERRAIN_FRICTION);
    let rig = build_walker(
        &mut world,
        &genotype.morphology,
        layout.start_x,
        layout.ground_height,
    )?;
    // Displacement and shaping both track the hull's centre of mass.
    let start_x = world.body(rig.hull).position.x;

    let mut prev_shaping = shaping(&world, &rig);
    let mut total = 0.0;
    let mut steps = EPISODE_CAP as u32;
    let mut termination = Termination::StepCap;
    for step in 0..EPISODE_CAP {
        let obs = observe(&world, &rig);
        let action = genotype.forward(&obs);
        apply_action(&mut world, &rig, &action);
        world.step(DT);

        let new_shaping = shaping(&world, &rig);
        let mut reward = new_shaping - prev_shaping;
        prev_shaping = new_shaping;
        for a in &action {
            reward -= 0.00035 * MOTORS_TORQUE * a.abs().clamp(0.0, 1.0);
        }

        let hull = world.body(rig.hull);
        let fell = hull.touching_terrain();
        if fell {
            // A fall replaces the step reward with the terminal penalty.
            reward = -100.0;
        }
        total += reward;

        if let Some(out) = trace.as_deref_mut() {
            out.push(StepTrace {
                step: step as u32,
                hull_x: hull.position.x,
                hull_y: hull.position.y,
                hull_angle: hull.angle,
                action,
                joint_angles: [
                    world.joint_angle(rig.joints[0]),
                    world.joint_angle(rig.joints[1]),
                    world.joint_angle(rig.joints[2]),
                    world.joint_angle(rig.joints[3]),
                ],
                reward,
            });
        }

        if fell {
            steps = step as u32 + 1;
            termination = Termination::HeadContact;
            break;
        }
        if world.body(rig.hull).position.x >= flag_x {
            steps = step as u32 + 1;
            termination = Termination::ReachedFlag;
            break;
        }
    }

    Ok(EpisodeResult {
        total_reward: total,
        steps,
        termination,
        start_x,
        final_x: world.body(rig.hull).position.x,
    })
}

/// Rolls out one episode of `genotype` on the course `(params, seed)`
/// under the default solver settings.
pub fn run_episode(
    genotype: &Genotype,
    params: &EnvParams,
    seed: u64,
) -> Result<EpisodeResult, GenomeError> {
    run(&EngineConfig::default(), genotype, params, seed, None)
}

/// As [`run_episode`], but under explicit solver settings. Experiments use
/// this so the physics recorded in their config is the physics that ran.
pub fn run_episode_with(
    engine: &EngineConfig,
    genotype: &Genotype,
    params: &EnvParams,
    seed: u64,
) -> Result<EpisodeResult, GenomeError> {
    run(engine, genotype, params, seed, None)
}

/// As [`run_episode`], additionally appending one [`StepTrace`] per step.
pub fn run_episode_traced(
    genotype: &Genotype,
    params: &EnvParams,
    seed: u64,
    trace: &mut Vec<StepTrace>,
) -> Result<EpisodeResult, GenomeError> {
    run(&EngineConfig::default(), genotype, params, seed, Some(trace))
}
