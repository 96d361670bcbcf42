//! Semantic replay of a run log.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::ids::{NodeId, RequestId, Seconds, TaxiId};
use crate::matching::Constraints;
use crate::network::RoadNetwork;
use crate::runlog::{Event, RunLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Capacity,
    PickupDelay,
    DetourDelay,
    DropoffWithoutPickup,
    Teleport,
    DuplicateMatch,
    /// Event out of the arrived/matched/pickup/dropoff lifecycle, or
    /// referring to an unknown request.
    Lifecycle,
    Ordering,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub ts: Seconds,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub events: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loc {
    Node(NodeId),
    Edge {
        from: NodeId,
        to: NodeId,
        progress: Seconds,
    },
}

#[derive(Debug)]
struct RequestState {
    pickup: NodeId,
    dropoff: NodeId,
    arrival: Seconds,
    direct: Option<Seconds>,
    matched: Option<TaxiId>,
    picked: Option<Seconds>,
    dropped: bool,
    unmatched: bool,
}

#[derive(Debug, Default)]
struct TaxiTrack {
    onboard: BTreeSet<RequestId>,
    last: Option<(Seconds, Loc)>,
}

/// Incremental validator; feed events in file order, then call
/// [`Validator::finish`].
pub struct Validator<'a> {
    net: &'a RoadNetwork,
    constraints: Constraints,
    requests: HashMap<RequestId, RequestState>,
    taxis: HashMap<TaxiId, TaxiTrack>,
    last_ts: Seconds,
    report: ValidationReport,
}

impl<'a> Validator<'a> {
    pub fn new(net: &'a RoadNetwork, constraints: Constraints) -> Self {
        Self {
            net,
            constraints,
            requests: HashMap::new(),
            taxis: HashMap::new(),
            last_ts: 0,
            report: ValidationReport::default(),
        }
    }

    fn flag(&mut self, kind: ViolationKind, ts: Seconds, message: String) {
        self.report.violations.push(Violation { kind, ts, message });
    }

    pub fn observe(&mut self, event: &Event) {
        use ViolationKind::*;
        self.report.events += 1;
        let ts = event.ts();
        if ts < self.last_ts {
            self.flag(Ordering, ts, format!("timestamp {ts} after {}", self.last_ts));
        }
        self.last_ts = self.last_ts.max(ts);

        match *event {
            Event::RequestArrived {
                request_id,
                pickup,
                dropoff,
                arrival_epoch,
                ..
            } => {
                if self.requests.contains_key(&request_id) {
                    self.flag(Lifecycle, ts, format!("request {request_id} arrived twice"));
                    return;
                }
                self.requests.insert(
                    request_id,
                    RequestState {
                        pickup,
                        dropoff,
                        arrival: u64::from(arrival_epoch) * self.constraints.epoch_length,
                        direct: self.net.tt(pickup, dropoff),
                        matched: None,
                        picked: None,
                        dropped: false,
                        unmatched: false,
                    },
                );
            }
            Event::Matched {
                request_id, taxi_id, ..
            } => {
                let Some(r) = self.requests.get_mut(&request_id) else {
                    return self.flag(Lifecycle, ts, format!("match for unknown request {request_id}"));
                };
                if r.matched.is_some() {
                    return self.flag(DuplicateMatch, ts, format!("request {request_id} matched twice"));
                }
                r.matched = Some(taxi_id);
                if r.unmatched {
                    self.flag(
                        Lifecycle,
                        ts,
                        format!("request {request_id} matched after final unmatch"),
                    );
                }
            }
            Event::Pickup {
                request_id, taxi_id, ..
            } => self.pickup(ts, request_id, taxi_id),
            Event::Dropoff {
                request_id, taxi_id, ..
            } => self.dropoff(ts, request_id, taxi_id),
            Event::UnmatchedFinal { request_id, .. } => {
                let Some(r) = self.requests.get_mut(&request_id) else {
                    return self.flag(Lifecycle, ts, format!("unmatch for unknown request {request_id}"));
                };
                let was_matched = r.matched.is_some() || r.unmatched;
                r.unmatched = true;
                if was_matched {
                    self.flag(Lifecycle, ts, format!("request {request_id} already resolved"));
                }
            }
            Event::Position {
                taxi_id,
                node,
                toward,
                progress_s,
                n_onboard,
                ..
            } => {
                if n_onboard > self.constraints.capacity {
                    self.flag(
                        Capacity,
                        ts,
                        format!(
                            "taxi {taxi_id} reports {n_onboard} onboard, capacity {}",
                            self.constraints.capacity
                        ),
                    );
                }
                let tracked = self.taxis.entry(taxi_id).or_default().onboard.len();
                if tracked != n_onboard as usize {
                    self.flag(
                        Lifecycle,
                        ts,
                        format!("taxi {taxi_id} reports {n_onboard} onboard, replay has {tracked}"),
                    );
                }
                let loc = match toward {
                    Some(to) if progress_s > 0 => Loc::Edge {
                        from: node,
                        to,
                        progress: progress_s,
                    },
                    _ => Loc::Node(node),
                };
                self.locate(taxi_id, ts, loc);
            }
        }
    }

    fn pickup(&mut self, ts: Seconds, id: RequestId, taxi: TaxiId) {
        use ViolationKind::*;
        let Some(r) = self.requests.get_mut(&id) else {
            return self.flag(Lifecycle, ts, format!("pickup of unknown request {id}"));
        };
        let mut problems = Vec::new();
        if r.matched != Some(taxi) {
            problems.push((
                Lifecycle,
                format!("taxi {taxi} picks up request {id} it was not matched to"),
            ));
        }
        if r.picked.is_some() {
            problems.push((Lifecycle, format!("request {id} picked up twice")));
        }
        r.picked = Some(ts);
        let delay = ts.saturating_sub(r.arrival);
        if delay > self.constraints.max_pickup_delay {
            problems.push((
                PickupDelay,
                format!(
                    "request {id} pickup delay {delay}s > {}s",
                    self.constraints.max_pickup_delay
                ),
            ));
        }
        let node = r.pickup;
        let track = self.taxis.entry(taxi).or_default();
        track.onboard.insert(id);
        let onboard = track.onboard.len();
        if onboard > self.constraints.capacity as usize {
            problems.push((
                Capacity,
                format!(
                    "taxi {taxi} holds {onboard} requests, capacity {}",
                    self.constraints.capacity
                ),
            ));
        }
        for (k, m) in problems {
            self.flag(k, ts, m);
        }
        self.locate(taxi, ts, Loc::Node(node));
    }

    fn dropoff(&mut self, ts: Seconds, id: RequestId, taxi: TaxiId) {
        use ViolationKind::*;
        let Some(r) = self.requests.get_mut(&id) else {
            return self.flag(Lifecycle, ts, format!("dropoff of unknown request {id}"));
        };
        let track = self.taxis.entry(taxi).or_default();
        let node = r.dropoff;
        match r.picked {
            Some(picked) if track.onboard.remove(&id) && !r.dropped => {
                r.dropped = true;
                let detour = match r.direct {
                    Some(direct) => (ts - picked).saturating_sub(direct),
                    None => 0,
                };
                if detour > self.constraints.max_detour_delay {
                    self.flag(
                        DetourDelay,
                        ts,
                        format!(
                            "request {id} detour delay {detour}s > {}s",
                            self.constraints.max_detour_delay
                        ),
                    );
                }
            }
            _ => {
                self.flag(
                    DropoffWithoutPickup,
                    ts,
                    format!("taxi {taxi} drops off request {id} which it is not carrying"),
                );
            }
        }
        self.locate(taxi, ts, Loc::Node(node));
    }

    fn locate(&mut self, taxi: TaxiId, ts: Seconds, loc: Loc) {
        let track = self.taxis.entry(taxi).or_default();
        let prev = track.last.replace((ts, loc));
        let Some((prev_ts, prev_loc)) = prev else {
            return;
        };
        let elapsed = ts.saturating_sub(prev_ts);
        match min_travel(self.net, prev_loc, loc) {
            Some(need) if need <= elapsed => {}
            Some(need) => self.flag(
                ViolationKind::Teleport,
                ts,
                format!("taxi {taxi} moved {prev_loc:?} -> {loc:?} in {elapsed}s, needs {need}s"),
            ),
            None => self.flag(
                ViolationKind::Teleport,
                ts,
                format!("taxi {taxi} moved {prev_loc:?} -> {loc:?}, which the network cannot connect"),
            ),
        }
    }

    pub fn finish(self) -> ValidationReport {
        self.report
    }
}

/// Least travel time between two fleet locations. Taxis never reverse on an
/// edge, so leaving a partial edge means finishing it.
fn min_travel(net: &RoadNetwork, a: Loc, b: Loc) -> Option<Seconds> {
    let (start, base) = match a {
        Loc::Node(n) => (n, 0),
        Loc::Edge { from, to, progress } => {
            if let Loc::Edge {
                from: f,
                to: t,
                progress: p,
            } = b
            {
                if f == from && t == to && p >= progress {
                    return Some(p - progress);
                }
            }
            (to, net.edge_cost(from, to)?.checked_sub(progress)?)
        }
    };
    match b {
        Loc::Node(n) => Some(base + net.tt(start, n)?),
        Loc::Edge { from, to, progress } => {
            let cost = net.edge_cost(from, to)?;
            if progress >= cost {
                return None;
            }
            Some(base + net.tt(start, from)? + progress)
        }
    }
}

/// Replays `log` and reports every constraint or consistency violation.
pub fn validate_runlog(log: &RunLog, net: &RoadNetwork, constraints: &Constraints) -> ValidationReport {
    let mut v = Validator::new(net, *constraints);
    for e in &log.events {
        v.observe(e);
    }
    v.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;
    use crate::runlog::{InputDigests, RunHeader};
    use crate::simulator::SimConfig;

    fn line() -> RoadNetwork {
        load_network(
            "node_id,lat,lon\n1,0,0\n2,0,1\n3,0,2\n".as_bytes(),
            "from,to,cost_seconds\n1,2,60\n2,3,120\n2,1,60\n3,2,120\n".as_bytes(),
        )
        .unwrap()
    }

    fn log(events: Vec<Event>) -> RunLog {
        RunLog {
            header: RunHeader::new(SimConfig::default(), InputDigests::default()),
            events,
        }
    }

    fn arrive(id: u64, pickup: u64, dropoff: u64) -> Event {
        Event::RequestArrived {
            ts: 0,
            request_id: RequestId(id),
            pickup: NodeId(pickup),
            dropoff: NodeId(dropoff),
            arrival_epoch: 0,
            fare: 1.0,
            direct_s: 0,
        }
    }

    fn matched(id: u64) -> Event {
        Event::Matched {
            ts: 0,
            request_id: RequestId(id),
            taxi_id: TaxiId(0),
            epoch: 0,
        }
    }

    #[test]
    fn dropoff_before_pickup() {
        let net = line();
        let l = log(vec![
            arrive(1, 1, 3),
            matched(1),
            Event::Dropoff {
                ts: 180,
                request_id: RequestId(1),
                taxi_id: TaxiId(0),
            },
        ]);
        let rep = validate_runlog(&l, &net, &Constraints::default());
        assert_eq!(rep.violations.len(), 1, "{:?}", rep.violations);
        assert_eq!(rep.count(ViolationKind::DropoffWithoutPickup), 1);
    }

    #[test]
    fn five_onboard_breaches_capacity() {
        let net = line();
        let mut events = Vec::new();
        for id in 1..=5 {
            events.push(arrive(id, 1, 3));
        }
        for id in 1..=5 {
            events.push(matched(id));
        }
        for id in 1..=5 {
            events.push(Event::Pickup {
                ts: 0,
                request_id: RequestId(id),
                taxi_id: TaxiId(0),
            });
        }
        let rep = validate_runlog(&log(events), &net, &Constraints::default());
        assert_eq!(rep.count(ViolationKind::Capacity), 1, "{:?}", rep.violations);
        assert_eq!(rep.violations.len(), 1);
    }

    #[test]
    fn duplicate_match_and_teleport() {
        let net = line();
        let rep = validate_runlog(
            &log(vec![arrive(1, 1, 3), matched(1), matched(1)]),
            &net,
            &Constraints::default(),
        );
        assert_eq!(rep.count(ViolationKind::DuplicateMatch), 1);

        let pos = |ts, node| Event::Position {
            ts,
            taxi_id: TaxiId(0),
            epoch: (ts / 60) as u32,
            node: NodeId(node),
            toward: None,
            progress_s: 0,
            n_onboard: 0,
        };
        let rep = validate_runlog(&log(vec![pos(0, 1), pos(60, 3)]), &net, &Constraints::default());
        assert_eq!(rep.count(ViolationKind::Teleport), 1);
        let rep = validate_runlog(&log(vec![pos(0, 1), pos(180, 3)]), &net, &Constraints::default());
        assert!(rep.is_clean());
    }

    #[test]
    fn late_pickup_and_long_detour() {
        let net = line();
        let c = Constraints {
            max_pickup_delay: 60,
            max_detour_delay: 30,
            ..Constraints::default()
        };
        let l = log(vec![
            arrive(1, 1, 2),
            matched(1),
            Event::Pickup {
                ts: 120,
                request_id: RequestId(1),
                taxi_id: TaxiId(0),
            },
            Event::Dropoff {
                ts: 240,
                request_id: RequestId(1),
                taxi_id: TaxiId(0),
            },
        ]);
        let rep = validate_runlog(&l, &net, &c);
        assert_eq!(rep.count(ViolationKind::PickupDelay), 1);
        assert_eq!(rep.count(ViolationKind::DetourDelay), 1);
    }
}
