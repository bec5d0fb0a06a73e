//! Baseline curricula: a fixed flat environment and a round-robin rotation
//! over hand-designed environments with fitness-triggered escalation.

use serde::{Deserialize, Serialize};

use crate::params::{
    EnvParams, PIT_GAP_MAX, ROUGHNESS_MAX, STAIR_HEIGHT_MAX, STAIR_STEPS_MAX, STUMP_HEIGHT_MAX,
};

/// The static baseline trains on this single environment forever.
pub fn static_env() -> EnvParams {
    EnvParams::flat()
}

/// Generations spent on each environment before the rotation advances.
pub const RRI_BLOCK: u64 = 5;
/// Number of environments in the rotation.
pub const RRI_SLOTS: usize = 5;

/// Fresh-fitness threshold that triggers an escalation.
pub const RRI_ESCALATION_THRESHOLD: f64 = 150.0;

/// Round-robin-with-intensification state: the five rotation environments,
/// whose difficulty only ever increases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RriSchedule {
    pub envs: [EnvParams; RRI_SLOTS],
    /// Completed escalations of the stairs slot; every second one also adds
    /// a step.
    stairs_escalations: u32,
}

/// Record of one escalation, for logging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RriEscalation {
    pub slot: usize,
    pub env: EnvParams,
}

impl Default for RriSchedule {
    fn default() -> Self {
        Self::new()
    }
}

impl RriSchedule {
    /// The initial rotation: flat, narrow pits, mild roughness, low stumps,
    /// and a single low stair step.
    pub fn new() -> Self {
        let flat = EnvParams::flat();
        let mut pits = flat;
        pits.pit_gap = (0.4, 0.4);
        let mut rough = flat;
        rough.roughness = 0.6;
        let mut stumps = flat;
        stumps.stump_height = (0.2, 0.2);
        let mut stairs = flat;
        stairs.stair_height = (0.2, 0.2);
        stairs.stair_steps = 1;
        Self {
            envs: [flat, pits, rough, stumps, stairs],
            stairs_escalations: 0,
        }
    }

    /// Which rotation slot a generation trains on: five consecutive
    /// generations per slot, cycling through all five slots.
    pub fn slot(generation: u64) -> usize {
        ((generation / RRI_BLOCK) % RRI_SLOTS as u64) as usize
    }

    /// The environment trained on at `generation`.
    pub fn current(&self, generation: u64) -> &EnvParams {
        &self.envs[Self::slot(generation)]
    }

    /// Escalates the active slot when this generation's best freshly
    /// evaluated fitness reaches the threshold on a non-flat slot. Checked
    /// once per generation; at most one escalation results, difficulty never
    /// decreases, and every parameter stays clamped to its bounds.
    pub fn maybe_escalate(
        &mut self,
        generation: u64,
        best_child_fitness: f64,
    ) -> Option<RriEscalation> {
        let slot = Self::slot(generation);
        if slot == 0 || best_child_fitness < RRI_ESCALATION_THRESHOLD {
            return None;
        }
        let env = &mut self.envs[slot];
        match slot {
            1 => {
                env.pit_gap.0 = (env.pit_gap.0 + 0.4).min(PIT_GAP_MAX);
                env.pit_gap.1 = (env.pit_gap.1 + 0.4).min(PIT_GAP_MAX);
            }
            2 => {
                env.roughness = (env.roughness + 0.6).min(ROUGHNESS_MAX);
            }
            3 => {
                env.stump_height.0 = (env.stump_height.0 + 0.2).min(STUMP_HEIGHT_MAX);
                env.stump_height.1 = (env.stump_height.1 + 0.2).min(STUMP_HEIGHT_MAX);
            }
            4 => {
                env.stair_height.0 = (env.stair_height.0 + 0.2).min(STAIR_HEIGHT_MAX);
                env.stair_height.1 = (env.stair_height.1 + 0.2).min(STAIR_HEIGHT_MAX);
                self.stairs_escalations += 1;
                if self.stairs_escalations % 2 == 0 {
                    env.stair_steps = (env.stair_steps + 1).min(STAIR_STEPS_MAX);
                }
            }
            _ => unreachable!("slot index is mod 5"),
        }
        Some(RriEscalation {
            slot,
            env: self.envs[slot],
        })
    }
}
