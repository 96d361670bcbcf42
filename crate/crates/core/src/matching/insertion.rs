use crate::demand::Request;
use crate::ids::{NodeId, Seconds};
use crate::matching::{evaluate_plan, Constraints, Ride, Stop, StopKind, StopPlan};
use crate::network::RoadNetwork;
use crate::simulator::{ride_for, TaxiState};

/// Best plan found for a taxi after adding a group of requests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Insertion {
    pub plan: StopPlan,
    /// Sum of detour delays over every request on the new plan.
    pub total_detour: Seconds,
    /// `total_detour` minus the total of the taxi's current plan.
    pub added_detour: i64,
}

/// Cheap necessary condition: can the taxi reach the pickup before the
/// request's deadline, ignoring its other obligations?
pub fn can_reach_pickup(
    taxi: &TaxiState,
    request: &Request,
    now: Seconds,
    constraints: &Constraints,
    net: &RoadNetwork,
) -> bool {
    let (anchor, offset) = taxi.position.anchor();
    let deadline = request.arrival_time(constraints.epoch_length) + constraints.max_pickup_delay;
    net.tt(anchor, request.pickup)
        .is_some_and(|t| now + offset + t <= deadline)
}

/// Searches every stop ordering that serves the taxi's current trips plus
/// `new_requests` and returns the one with the least total detour; ties go to
/// the lexicographically smallest stop sequence. `None` when no ordering
/// satisfies capacity and delay bounds.
pub fn feasible_insertion(
    taxi: &TaxiState,
    new_requests: &[Request],
    now: Seconds,
    constraints: &Constraints,
    net: &RoadNetwork,
) -> Option<Insertion> {
    if taxi.trips.len() + new_requests.len() > constraints.capacity as usize {
        return None;
    }
    if new_requests.iter().any(|r| taxi.trips.contains_key(&r.id)) {
        return None;
    }
    let (anchor, offset) = taxi.position.anchor();
    let mut rides = taxi.rides(constraints, net)?;
    let old_total = if taxi.plan.is_empty() {
        0
    } else {
        evaluate_plan(anchor, now + offset, &taxi.plan.stops, &rides, constraints, net)
            .ok()?
            .total_detour
    };
    for r in new_requests {
        rides.push(ride_for(r, None, constraints, net)?);
    }

    let mut stops = Vec::with_capacity(rides.len() * 2);
    for (i, ride) in rides.iter().enumerate() {
        if ride.picked_up_at.is_none() {
            stops.push((
                Stop {
                    node: ride.pickup,
                    kind: StopKind::Pickup,
                    request: ride.request,
                },
                i,
            ));
        }
        stops.push((
            Stop {
                node: ride.dropoff,
                kind: StopKind::Dropoff,
                request: ride.request,
            },
            i,
        ));
    }
    stops.sort_unstable();

    let mut search = Search {
        stops: &stops,
        rides: &rides,
        constraints,
        net,
        picked: rides.iter().map(|r| r.picked_up_at).collect(),
        done: vec![false; stops.len()],
        seq: Vec::with_capacity(stops.len()),
        etas: Vec::with_capacity(stops.len()),
        best: None,
    };
    let onboard = rides.iter().filter(|r| r.picked_up_at.is_some()).count() as u32;
    search.dfs(anchor, now + offset, onboard, 0);
    let (total_detour, seq, etas) = search.best?;
    Some(Insertion {
        plan: StopPlan {
            stops: seq.iter().map(|&i| stops[i].0).collect(),
            etas,
        },
        total_detour,
        added_detour: total_detour as i64 - old_total as i64,
    })
}

struct Search<'a> {
    stops: &'a [(Stop, usize)],
    rides: &'a [Ride],
    constraints: &'a Constraints,
    net: &'a RoadNetwork,
    picked: Vec<Option<Seconds>>,
    done: Vec<bool>,
    seq: Vec<usize>,
    etas: Vec<Seconds>,
    best: Option<(Seconds, Vec<usize>, Vec<Seconds>)>,
}

impl Search<'_> {
    /// Depth-first over stops in sorted order; only strict improvements
    /// replace the incumbent, so the first optimum found is the
    /// lexicographically smallest.
    fn dfs(&mut self, node: NodeId, t: Seconds, onboard: u32, detour: Seconds) {
        if self.seq.len() == self.stops.len() {
            if self.best.as_ref().is_none_or(|b| detour < b.0) {
                self.best = Some((detour, self.seq.clone(), self.etas.clone()));
            }
            return;
        }
        for i in 0..self.stops.len() {
            if self.done[i] {
                continue;
            }
            let (stop, r) = self.stops[i];
            let ride = &self.rides[r];
            let Some(leg) = self.net.tt(node, stop.node) else {
                continue;
            };
            let arrive = t + leg;
            let (next_onboard, next_detour) = match stop.kind {
                StopKind::Pickup => {
                    if onboard >= self.constraints.capacity || arrive > ride.pickup_deadline {
                        continue;
                    }
                    (onboard + 1, detour)
                }
                StopKind::Dropoff => {
                    let Some(pickup_time) = self.picked[r] else {
                        continue;
                    };
                    let d = (arrive - pickup_time).saturating_sub(ride.direct);
                    if d > self.constraints.max_detour_delay {
                        continue;
                    }
                    let total = detour + d;
                    if self.best.as_ref().is_some_and(|b| total >= b.0) {
                        continue;
                    }
                    (onboard - 1, total)
                }
            };
            if stop.kind == StopKind::Pickup {
                self.picked[r] = Some(arrive);
            }
            if !self.pickups_still_reachable(stop.node, arrive) {
                if stop.kind == StopKind::Pickup {
                    self.picked[r] = None;
                }
                continue;
            }
            self.done[i] = true;
            self.seq.push(i);
            self.etas.push(arrive);
            self.dfs(stop.node, arrive, next_onboard, next_detour);
            self.etas.pop();
            self.seq.pop();
            self.done[i] = false;
            if stop.kind == StopKind::Pickup {
                self.picked[r] = None;
            }
        }
    }

    fn pickups_still_reachable(&self, node: NodeId, t: Seconds) -> bool {
        self.rides.iter().zip(&self.picked).all(|(ride, picked)| {
            picked.is_some()
                || self
                    .net
                    .tt(node, ride.pickup)
                    .is_some_and(|leg| t + leg <= ride.pickup_deadline)
        })
    }
}
