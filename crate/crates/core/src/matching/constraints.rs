use serde::{Deserialize, Serialize};

use crate::ids::Seconds;

/// Capacity and time bounds every plan must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    /// Maximum number of requests a taxi carries or has committed to.
    pub capacity: u32,
    /// Bound on pickup time minus arrival time.
    pub max_pickup_delay: Seconds,
    /// Bound on ride time minus the direct travel time.
    pub max_detour_delay: Seconds,
    /// Duration of one decision epoch.
    pub epoch_length: Seconds,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            capacity: 4,
            max_pickup_delay: 300,
            max_detour_delay: 600,
            epoch_length: 60,
        }
    }
}

impl Constraints {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("capacity", u64::from(self.capacity)),
            ("max_pickup_delay", self.max_pickup_delay),
            ("max_detour_delay", self.max_detour_delay),
            ("epoch_length", self.epoch_length),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(format!("{name} must be positive")),
            None => Ok(()),
        }
    }
}

/// Batch objective: `reward_per_match * matched - detour_penalty * added_detour`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub reward_per_match: i64,
    pub detour_penalty: i64,
}

impl ObjectiveWeights {
    /// One extra match always outweighs any detour saving the bounds allow.
    pub fn for_constraints(c: &Constraints) -> Self {
        let detour_penalty = 1;
        Self {
            reward_per_match: 10 * c.max_detour_delay as i64 * detour_penalty,
            detour_penalty,
        }
    }

    pub fn value(&self, group_size: usize, added_detour: i64) -> i64 {
        self.reward_per_match * group_size as i64 - self.detour_penalty * added_detour
    }
}
