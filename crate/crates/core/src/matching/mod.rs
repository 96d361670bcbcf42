//! Batch request-to-taxi matching: plan feasibility, candidate groups, the
//! exact assignment solver and a sequential greedy baseline.

mod candidates;
mod constraints;
mod greedy;
mod ilp;
mod insertion;
mod plan;
mod policy;

use serde::{Deserialize, Serialize};

pub use candidates::{generate_candidates, Candidate};
pub use constraints::{Constraints, ObjectiveWeights};
pub use greedy::greedy_sequential_match;
pub use ilp::{select_candidates, solve_batch_ilp};
pub use insertion::{can_reach_pickup, feasible_insertion, Insertion};
pub use plan::{evaluate_plan, EvaluatedPlan, PlanError, Ride, Stop, StopKind, StopPlan};
pub use policy::{
    validate_assignment, AssignmentError, GreedySequential, MatchContext, MatchingPolicy, PolicyKind, RewardPlusDelay,
};

use crate::ids::{RequestId, TaxiId};

/// The group and new plan given to one taxi in one epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxiAssignment {
    pub taxi: TaxiId,
    pub requests: Vec<RequestId>,
    pub plan: StopPlan,
    pub added_detour: i64,
}

/// One epoch's matches, ordered by taxi.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub matches: Vec<TaxiAssignment>,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (RequestId, TaxiId)> + '_ {
        self.matches
            .iter()
            .flat_map(|m| m.requests.iter().map(move |r| (*r, m.taxi)))
    }

    pub fn matched_count(&self) -> usize {
        self.matches.iter().map(|m| m.requests.len()).sum()
    }

    pub fn objective(&self, weights: &ObjectiveWeights) -> i64 {
        self.matches
            .iter()
            .map(|m| weights.value(m.requests.len(), m.added_detour))
            .sum()
    }
}
