use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NodeId, RequestId, Seconds};
use crate::matching::Constraints;
use crate::network::RoadNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopKind {
    Pickup,
    Dropoff,
}

/// Field order defines the lexicographic order used for tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stop {
    pub node: NodeId,
    pub kind: StopKind,
    pub request: RequestId,
}

/// Future stops of a taxi with their absolute ETAs in seconds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopPlan {
    pub stops: Vec<Stop>,
    pub etas: Vec<Seconds>,
}

impl StopPlan {
    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.stops.len()
    }
}

/// Everything plan evaluation needs to know about one request on a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ride {
    pub request: RequestId,
    pub pickup: NodeId,
    pub dropoff: NodeId,
    /// Latest admissible pickup instant.
    pub pickup_deadline: Seconds,
    /// Shortest-path time from pickup to dropoff.
    pub direct: Seconds,
    /// Set once the passenger is onboard.
    pub picked_up_at: Option<Seconds>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("stop for request {0} which is not on this taxi")]
    UnknownRequest(RequestId),
    #[error("request {0} is not covered by exactly the stops it needs")]
    Coverage(RequestId),
    #[error("request {0} is dropped off before it is picked up")]
    Precedence(RequestId),
    #[error("stop at node {0} does not match the request's location")]
    WrongNode(NodeId),
    #[error("occupancy {occupancy} exceeds capacity {capacity}")]
    Capacity { occupancy: u32, capacity: u32 },
    #[error("node {0} cannot be reached")]
    Unreachable(NodeId),
    #[error("request {request} picked up at {eta}, after its deadline {deadline}")]
    PickupDelay {
        request: RequestId,
        eta: Seconds,
        deadline: Seconds,
    },
    #[error("request {request} detour {detour}s exceeds {bound}s")]
    DetourDelay {
        request: RequestId,
        detour: Seconds,
        bound: Seconds,
    },
}

/// Result of replaying a stop sequence from a taxi's anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluatedPlan {
    pub etas: Vec<Seconds>,
    pub total_detour: Seconds,
}

/// Replays `stops` starting `start` seconds from now at `anchor` and checks
/// every constraint. `rides` must list every request the taxi is responsible
/// for; each must be served exactly as its state requires.
pub fn evaluate_plan(
    anchor: NodeId,
    start: Seconds,
    stops: &[Stop],
    rides: &[Ride],
    constraints: &Constraints,
    net: &RoadNetwork,
) -> Result<EvaluatedPlan, PlanError> {
    let by_id: BTreeMap<RequestId, &Ride> = rides.iter().map(|r| (r.request, r)).collect();
    let mut picked: BTreeMap<RequestId, Seconds> = rides
        .iter()
        .filter_map(|r| r.picked_up_at.map(|t| (r.request, t)))
        .collect();
    let mut dropped = std::collections::BTreeSet::new();
    let mut occupancy = picked.len() as u32;
    if occupancy > constraints.capacity {
        return Err(PlanError::Capacity {
            occupancy,
            capacity: constraints.capacity,
        });
    }
    let mut node = anchor;
    let mut t = start;
    let mut etas = Vec::with_capacity(stops.len());
    let mut total_detour = 0;
    for stop in stops {
        let ride = by_id
            .get(&stop.request)
            .ok_or(PlanError::UnknownRequest(stop.request))?;
        t += net.tt(node, stop.node).ok_or(PlanError::Unreachable(stop.node))?;
        node = stop.node;
        match stop.kind {
            StopKind::Pickup => {
                if stop.node != ride.pickup {
                    return Err(PlanError::WrongNode(stop.node));
                }
                if picked.contains_key(&ride.request) || dropped.contains(&ride.request) {
                    return Err(PlanError::Coverage(ride.request));
                }
                if t > ride.pickup_deadline {
                    return Err(PlanError::PickupDelay {
                        request: ride.request,
                        eta: t,
                        deadline: ride.pickup_deadline,
                    });
                }
                picked.insert(ride.request, t);
                occupancy += 1;
                if occupancy > constraints.capacity {
                    return Err(PlanError::Capacity {
                        occupancy,
                        capacity: constraints.capacity,
                    });
                }
            }
            StopKind::Dropoff => {
                if stop.node != ride.dropoff {
                    return Err(PlanError::WrongNode(stop.node));
                }
                let pickup_time = *picked.get(&ride.request).ok_or(PlanError::Precedence(ride.request))?;
                if !dropped.insert(ride.request) {
                    return Err(PlanError::Coverage(ride.request));
                }
                let detour = (t - pickup_time).saturating_sub(ride.direct);
                if detour > constraints.max_detour_delay {
                    return Err(PlanError::DetourDelay {
                        request: ride.request,
                        detour,
                        bound: constraints.max_detour_delay,
                    });
                }
                total_detour += detour;
                occupancy -= 1;
            }
        }
        etas.push(t);
    }
    if let Some(r) = rides.iter().find(|r| !dropped.contains(&r.request)) {
        return Err(PlanError::Coverage(r.request));
    }
    Ok(EvaluatedPlan { etas, total_detour })
}
