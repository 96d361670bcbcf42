use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::Request;
use crate::ids::{Epoch, RequestId, Seconds, TaxiId};
use crate::matching::{
    evaluate_plan, generate_candidates, greedy_sequential_match, solve_batch_ilp, Assignment, Constraints,
    ObjectiveWeights, PlanError,
};
use crate::network::RoadNetwork;
use crate::simulator::{ride_for, TaxiState};

/// Everything a policy sees when asked to match one batch.
#[derive(Clone, Copy)]
pub struct MatchContext<'a> {
    pub epoch: Epoch,
    /// Dispatch instant, `epoch * epoch_length`.
    pub now: Seconds,
    pub taxis: &'a [TaxiState],
    /// Pending requests, ascending id.
    pub batch: &'a [Request],
    pub constraints: &'a Constraints,
    pub max_group_size: u32,
    pub net: &'a RoadNetwork,
}

/// A batch matching strategy. Implementations must return feasible
/// assignments; the engine checks them with [`validate_assignment`] and aborts
/// the run otherwise.
pub trait MatchingPolicy: Send + Sync {
    fn name(&self) -> &str;

    fn assign(&self, ctx: &MatchContext<'_>) -> Assignment;
}

/// Feasible groups matched to taxis by an exact integer program that
/// maximises matches and, secondarily, minimises added detour.
#[derive(Debug, Clone)]
pub struct RewardPlusDelay {
    pub weights: ObjectiveWeights,
}

impl MatchingPolicy for RewardPlusDelay {
    fn name(&self) -> &str {
        "rpd"
    }

    fn assign(&self, ctx: &MatchContext<'_>) -> Assignment {
        let candidates = generate_candidates(
            ctx.taxis,
            ctx.batch,
            ctx.now,
            ctx.constraints,
            ctx.max_group_size,
            ctx.net,
        );
        solve_batch_ilp(&candidates, &self.weights)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedySequential;

impl MatchingPolicy for GreedySequential {
    fn name(&self) -> &str {
        "greedy"
    }

    fn assign(&self, ctx: &MatchContext<'_>) -> Assignment {
        greedy_sequential_match(
            ctx.taxis,
            ctx.batch,
            ctx.now,
            ctx.constraints,
            ctx.max_group_size,
            ctx.net,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Rpd,
    Greedy,
}

impl PolicyKind {
    pub fn build(self, weights: ObjectiveWeights) -> Box<dyn MatchingPolicy> {
        match self {
            PolicyKind::Rpd => Box::new(RewardPlusDelay { weights }),
            PolicyKind::Greedy => Box::new(GreedySequential),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Rpd => "rpd",
            PolicyKind::Greedy => "greedy",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rpd" => Ok(PolicyKind::Rpd),
            "greedy" => Ok(PolicyKind::Greedy),
            other => Err(format!("unknown policy {other:?}; expected rpd|greedy")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignmentError {
    #[error("taxi {0} does not exist")]
    UnknownTaxi(TaxiId),
    #[error("taxi {0} received more than one group")]
    TaxiReused(TaxiId),
    #[error("taxi {0} received an empty group")]
    EmptyGroup(TaxiId),
    #[error("request {0} is not pending")]
    NotPending(RequestId),
    #[error("request {0} matched more than once")]
    RequestReused(RequestId),
    #[error("taxi {taxi} would hold {total} requests, capacity {capacity}")]
    OverCapacity { taxi: TaxiId, total: usize, capacity: u32 },
    #[error("taxi {taxi}: group of {size} exceeds max group size {max}")]
    GroupTooLarge { taxi: TaxiId, size: usize, max: u32 },
    #[error("taxi {taxi}: infeasible plan: {source}")]
    Plan {
        taxi: TaxiId,
        #[source]
        source: PlanError,
    },
    #[error("taxi {taxi}: plan ETAs {claimed:?} differ from replayed {actual:?}")]
    EtaMismatch {
        taxi: TaxiId,
        claimed: Vec<Seconds>,
        actual: Vec<Seconds>,
    },
}

/// Re-checks a policy's output against the context it was computed for.
pub fn validate_assignment(ctx: &MatchContext<'_>, assignment: &Assignment) -> Result<(), AssignmentError> {
    let taxis: BTreeMap<TaxiId, &TaxiState> = ctx.taxis.iter().map(|t| (t.id, t)).collect();
    let pending: BTreeMap<RequestId, &Request> = ctx.batch.iter().map(|r| (r.id, r)).collect();
    let mut seen_taxis = BTreeSet::new();
    let mut seen_requests = BTreeSet::new();
    for m in &assignment.matches {
        let taxi = *taxis.get(&m.taxi).ok_or(AssignmentError::UnknownTaxi(m.taxi))?;
        if !seen_taxis.insert(m.taxi) {
            return Err(AssignmentError::TaxiReused(m.taxi));
        }
        if m.requests.is_empty() {
            return Err(AssignmentError::EmptyGroup(m.taxi));
        }
        if m.requests.len() > ctx.max_group_size as usize {
            return Err(AssignmentError::GroupTooLarge {
                taxi: m.taxi,
                size: m.requests.len(),
                max: ctx.max_group_size,
            });
        }
        let total = taxi.trips.len() + m.requests.len();
        if total > ctx.constraints.capacity as usize {
            return Err(AssignmentError::OverCapacity {
                taxi: m.taxi,
                total,
                capacity: ctx.constraints.capacity,
            });
        }
        let mut rides = taxi
            .rides(ctx.constraints, ctx.net)
            .expect("existing trips were validated on assignment");
        for id in &m.requests {
            let r = pending.get(id).ok_or(AssignmentError::NotPending(*id))?;
            if !seen_requests.insert(*id) {
                return Err(AssignmentError::RequestReused(*id));
            }
            rides.push(ride_for(r, None, ctx.constraints, ctx.net).ok_or(AssignmentError::NotPending(*id))?);
        }
        let (anchor, offset) = taxi.position.anchor();
        let evaluated = evaluate_plan(
            anchor,
            ctx.now + offset,
            &m.plan.stops,
            &rides,
            ctx.constraints,
            ctx.net,
        )
        .map_err(|source| AssignmentError::Plan { taxi: m.taxi, source })?;
        if evaluated.etas != m.plan.etas {
            return Err(AssignmentError::EtaMismatch {
                taxi: m.taxi,
                claimed: m.plan.etas.clone(),
                actual: evaluated.etas,
            });
        }
    }
    Ok(())
}
