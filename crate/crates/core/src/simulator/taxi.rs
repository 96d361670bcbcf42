use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::demand::Request;
use crate::ids::{NodeId, RequestId, Seconds, TaxiId};
use crate::matching::{Constraints, Ride, StopKind, StopPlan};
use crate::network::RoadNetwork;

/// Partial traversal of the edge `node -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeProgress {
    pub to: NodeId,
    pub cost: Seconds,
    /// Seconds already travelled; always `< cost`.
    pub progress: Seconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub node: NodeId,
    pub edge: Option<EdgeProgress>,
}

impl Position {
    pub fn at(node: NodeId) -> Self {
        Self { node, edge: None }
    }

    /// First node where the taxi can stop, and the seconds until it gets
    /// there. A taxi mid-edge must finish the edge.
    pub fn anchor(&self) -> (NodeId, Seconds) {
        match self.edge {
            Some(e) => (e.to, e.cost - e.progress),
            None => (self.node, 0),
        }
    }

    pub fn progress(&self) -> Seconds {
        self.edge.map_or(0, |e| e.progress)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub request: Request,
    pub picked_up_at: Option<Seconds>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaxiState {
    pub id: TaxiId,
    pub position: Position,
    pub plan: StopPlan,
    /// Requests this taxi is responsible for: onboard or assigned.
    pub trips: BTreeMap<RequestId, Trip>,
    /// Remaining nodes of the current leg, last element next.
    route: Vec<NodeId>,
}

/// A stop reached while advancing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopEvent {
    pub ts: Seconds,
    pub kind: StopKind,
    pub request: RequestId,
}

/// How a taxi consumes the travel time of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovementMode {
    /// Partial edge progress carries over between epochs.
    #[default]
    Continuous,
    /// Faulty mode kept for regression tests: an edge is only entered when it
    /// can be finished inside the current epoch, so taxis facing edges longer
    /// than the epoch never move.
    SnapToNode,
}

impl MovementMode {
    pub fn is_continuous(&self) -> bool {
        *self == MovementMode::Continuous
    }
}

impl TaxiState {
    pub fn new(id: TaxiId, node: NodeId) -> Self {
        Self {
            id,
            position: Position::at(node),
            plan: StopPlan::default(),
            trips: BTreeMap::new(),
            route: Vec::new(),
        }
    }

    pub fn n_onboard(&self) -> usize {
        self.trips.values().filter(|t| t.picked_up_at.is_some()).count()
    }

    pub fn onboard(&self) -> impl Iterator<Item = RequestId> + '_ {
        self.trips
            .values()
            .filter(|t| t.picked_up_at.is_some())
            .map(|t| t.request.id)
    }

    pub fn assigned_not_picked(&self) -> impl Iterator<Item = RequestId> + '_ {
        self.trips
            .values()
            .filter(|t| t.picked_up_at.is_none())
            .map(|t| t.request.id)
    }

    /// Plan-evaluation view of every trip.
    pub fn rides(&self, constraints: &Constraints, net: &RoadNetwork) -> Option<Vec<Ride>> {
        self.trips
            .values()
            .map(|t| ride_for(&t.request, t.picked_up_at, constraints, net))
            .collect()
    }

    /// Adopts a new plan covering the existing trips plus `new_requests`.
    pub fn assign(&mut self, new_requests: impl IntoIterator<Item = Request>, plan: StopPlan) {
        for r in new_requests {
            self.trips.insert(
                r.id,
                Trip {
                    request: r,
                    picked_up_at: None,
                },
            );
        }
        self.plan = plan;
        self.route.clear();
    }

    /// Travels for `dt` seconds starting at `now`, serving stops as they are
    /// reached. A stop reached exactly at `now + dt` belongs to this call.
    pub fn advance(&mut self, now: Seconds, dt: Seconds, net: &RoadNetwork, mode: MovementMode) -> Vec<StopEvent> {
        let end = now + dt;
        let mut t = now;
        let mut events = Vec::new();
        loop {
            if let Some(mut edge) = self.position.edge {
                let need = edge.cost - edge.progress;
                if t + need > end {
                    edge.progress += end - t;
                    self.position.edge = Some(edge);
                    break;
                }
                t += need;
                self.position = Position::at(edge.to);
            }
            while let Some(stop) = self.plan.stops.first().copied() {
                if stop.node != self.position.node {
                    break;
                }
                debug_assert_eq!(self.plan.etas[0], t, "taxi {} off schedule", self.id);
                self.plan.stops.remove(0);
                self.plan.etas.remove(0);
                match stop.kind {
                    StopKind::Pickup => {
                        if let Some(trip) = self.trips.get_mut(&stop.request) {
                            trip.picked_up_at = Some(t);
                        }
                    }
                    StopKind::Dropoff => {
                        self.trips.remove(&stop.request);
                    }
                }
                events.push(StopEvent {
                    ts: t,
                    kind: stop.kind,
                    request: stop.request,
                });
                self.route.clear();
            }
            let Some(target) = self.plan.stops.first().map(|s| s.node) else {
                self.route.clear();
                break;
            };
            if t == end {
                break;
            }
            if self.route.is_empty() {
                let path = net
                    .shortest_path(self.position.node, target)
                    .expect("planned stops are reachable");
                self.route = path.into_iter().skip(1).rev().collect();
            }
            let next = *self.route.last().expect("non-empty leg");
            let cost = net
                .edge_cost(self.position.node, next)
                .expect("consecutive path nodes share an edge");
            if mode == MovementMode::SnapToNode && t + cost > end {
                break;
            }
            self.route.pop();
            self.position.edge = Some(EdgeProgress {
                to: next,
                cost,
                progress: 0,
            });
        }
        events
    }
}

/// Builds the plan-evaluation record of a request; `None` when its dropoff
/// cannot be reached from its pickup.
pub fn ride_for(
    request: &Request,
    picked_up_at: Option<Seconds>,
    constraints: &Constraints,
    net: &RoadNetwork,
) -> Option<Ride> {
    Some(Ride {
        request: request.id,
        pickup: request.pickup,
        dropoff: request.dropoff,
        pickup_deadline: request.arrival_time(constraints.epoch_length) + constraints.max_pickup_delay,
        direct: net.tt(request.pickup, request.dropoff)?,
        picked_up_at,
    })
}
