//! Brute-force reference implementations and random instance builders for
//! test suites. Nothing here is tuned for speed.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demand::{FareRule, Request, RequestStream};
use crate::ids::{Epoch, NodeId, RequestId, Seconds, TaxiId, ZoneId};
use crate::matching::{feasible_insertion, Constraints, ObjectiveWeights, Stop, StopKind};
use crate::metrics::Window;
use crate::network::{grid_network, RoadNetwork};
use crate::runlog::{Event, RunLog};
use crate::simulator::{MovementMode, Placement, SimConfig, TaxiState};
use crate::zones::{grid_zones, ZonePartition};

/// All-pairs travel times by Bellman-Ford relaxation over the edge list.
pub struct DistanceTable {
    index: HashMap<NodeId, usize>,
    dist: Vec<Vec<Option<Seconds>>>,
}

impl DistanceTable {
    pub fn new(net: &RoadNetwork) -> Self {
        let index: HashMap<NodeId, usize> = net.nodes().iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let dist = (0..net.node_count()).map(|s| bellman_ford(net, &index, s)).collect();
        Self { index, dist }
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Option<Seconds> {
        self.dist[*self.index.get(&a)?][*self.index.get(&b)?]
    }
}

fn bellman_ford(net: &RoadNetwork, index: &HashMap<NodeId, usize>, source: usize) -> Vec<Option<Seconds>> {
    let edges: Vec<(usize, usize, Seconds)> = net.edges().map(|e| (index[&e.from], index[&e.to], e.cost)).collect();
    let mut d = vec![None; net.node_count()];
    d[source] = Some(0);
    for _ in 0..net.node_count() {
        let mut changed = false;
        for &(a, b, w) in &edges {
            if let Some(da) = d[a] {
                if d[b].is_none_or(|db| da + w < db) {
                    d[b] = Some(da + w);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Single-source Bellman-Ford, keyed by node id.
pub fn shortest_times_from(net: &RoadNetwork, source: NodeId) -> BTreeMap<NodeId, Seconds> {
    let index: HashMap<NodeId, usize> = net.nodes().iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    bellman_ford(net, &index, index[&source])
        .into_iter()
        .enumerate()
        .filter_map(|(i, d)| Some((net.nodes()[i].id, d?)))
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct RideInfo {
    id: RequestId,
    pickup: NodeId,
    dropoff: NodeId,
    deadline: Seconds,
    direct: Seconds,
    picked: Option<Seconds>,
}

fn ride_info(r: &Request, picked: Option<Seconds>, c: &Constraints, d: &DistanceTable) -> Option<RideInfo> {
    Some(RideInfo {
        id: r.id,
        pickup: r.pickup,
        dropoff: r.dropoff,
        deadline: u64::from(r.arrival_epoch) * c.epoch_length + c.max_pickup_delay,
        direct: d.get(r.pickup, r.dropoff)?,
        picked,
    })
}

/// Total detour of serving `order` from the taxi's anchor, or `None` if any
/// bound is violated or a request is left unserved.
fn walk(
    anchor: NodeId,
    start: Seconds,
    order: &[Stop],
    rides: &[RideInfo],
    c: &Constraints,
    d: &DistanceTable,
) -> Option<Seconds> {
    let mut picked: HashMap<RequestId, Option<Seconds>> = rides.iter().map(|r| (r.id, r.picked)).collect();
    let mut dropped = 0usize;
    let mut onboard = rides.iter().filter(|r| r.picked.is_some()).count() as u32;
    let (mut node, mut t, mut total) = (anchor, start, 0);
    for s in order {
        let ride = rides.iter().find(|r| r.id == s.request)?;
        t += d.get(node, s.node)?;
        node = s.node;
        match s.kind {
            StopKind::Pickup => {
                if picked[&s.request].is_some() || s.node != ride.pickup || t > ride.deadline {
                    return None;
                }
                onboard += 1;
                if onboard > c.capacity {
                    return None;
                }
                picked.insert(s.request, Some(t));
            }
            StopKind::Dropoff => {
                let p = picked[&s.request]?;
                if s.node != ride.dropoff {
                    return None;
                }
                let detour = (t - p).saturating_sub(ride.direct);
                if detour > c.max_detour_delay {
                    return None;
                }
                total += detour;
                onboard -= 1;
                dropped += 1;
            }
        }
    }
    (dropped == rides.len()).then_some(total)
}

fn permutations(items: &[Stop], used: &mut Vec<bool>, cur: &mut Vec<Stop>, visit: &mut dyn FnMut(&[Stop])) {
    if cur.len() == items.len() {
        visit(cur);
        return;
    }
    for i in 0..items.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        cur.push(items[i]);
        permutations(items, used, cur, visit);
        cur.pop();
        used[i] = false;
    }
}

/// Reference answer of the insertion search: (total detour, added detour,
/// stop order) over every permutation of stops, first minimum in
/// lexicographic order.
pub fn brute_force_insertion(
    taxi: &TaxiState,
    new: &[Request],
    now: Seconds,
    c: &Constraints,
    d: &DistanceTable,
) -> Option<(Seconds, i64, Vec<Stop>)> {
    if taxi.trips.len() + new.len() > c.capacity as usize {
        return None;
    }
    let (anchor, offset) = taxi.position.anchor();
    let mut rides: Vec<RideInfo> = taxi
        .trips
        .values()
        .map(|t| ride_info(&t.request, t.picked_up_at, c, d))
        .collect::<Option<_>>()?;
    let old = if taxi.plan.stops.is_empty() {
        0
    } else {
        walk(anchor, now + offset, &taxi.plan.stops, &rides, c, d)?
    };
    for r in new {
        rides.push(ride_info(r, None, c, d)?);
    }
    let mut stops: Vec<Stop> = Vec::new();
    for r in &rides {
        if r.picked.is_none() {
            stops.push(Stop {
                node: r.pickup,
                kind: StopKind::Pickup,
                request: r.id,
            });
        }
        stops.push(Stop {
            node: r.dropoff,
            kind: StopKind::Dropoff,
            request: r.id,
        });
    }
    stops.sort();
    let mut best: Option<(Seconds, Vec<Stop>)> = None;
    permutations(&stops, &mut vec![false; stops.len()], &mut Vec::new(), &mut |order| {
        if let Some(total) = walk(anchor, now + offset, order, &rides, c, d) {
            if best.as_ref().is_none_or(|b| total < b.0) {
                best = Some((total, order.to_vec()));
            }
        }
    });
    best.map(|(total, order)| (total, total as i64 - old as i64, order))
}

/// Every feasible (taxi, group) with its added detour, by exhaustive subset
/// enumeration. Ordered by taxi, then group.
pub fn brute_force_candidates(
    taxis: &[TaxiState],
    batch: &[Request],
    now: Seconds,
    c: &Constraints,
    max_group_size: u32,
    d: &DistanceTable,
) -> Vec<(TaxiId, Vec<RequestId>, i64)> {
    let mut batch = batch.to_vec();
    batch.sort_by_key(|r| r.id);
    let mut out = Vec::new();
    let mut taxis: Vec<&TaxiState> = taxis.iter().collect();
    taxis.sort_by_key(|t| t.id);
    for taxi in taxis {
        let mut groups = Vec::new();
        for mask in 1u32..(1 << batch.len()) {
            let group: Vec<Request> = (0..batch.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| batch[i])
                .collect();
            if group.len() > max_group_size as usize {
                continue;
            }
            if let Some((_, added, _)) = brute_force_insertion(taxi, &group, now, c, d) {
                groups.push((group.iter().map(|r| r.id).collect::<Vec<_>>(), added));
            }
        }
        groups.sort();
        out.extend(groups.into_iter().map(|(g, a)| (taxi.id, g, a)));
    }
    out
}

/// Best achievable objective by trying every disjoint choice of at most one
/// candidate per taxi.
pub fn brute_force_objective(candidates: &[(TaxiId, Vec<RequestId>, i64)], weights: &ObjectiveWeights) -> i64 {
    let mut by_taxi: BTreeMap<TaxiId, Vec<(Vec<RequestId>, i64)>> = BTreeMap::new();
    for (t, g, a) in candidates {
        by_taxi
            .entry(*t)
            .or_default()
            .push((g.clone(), weights.value(g.len(), *a)));
    }
    let lists: Vec<Vec<(Vec<RequestId>, i64)>> = by_taxi.into_values().collect();
    fn go(lists: &[Vec<(Vec<RequestId>, i64)>], used: &mut Vec<RequestId>) -> i64 {
        let Some((first, rest)) = lists.split_first() else {
            return 0;
        };
        let mut best = go(rest, used);
        for (g, v) in first {
            if g.iter().any(|r| used.contains(r)) {
                continue;
            }
            let n = used.len();
            used.extend(g);
            best = best.max(v + go(rest, used));
            used.truncate(n);
        }
        best
    }
    go(&lists, &mut Vec::new())
}

/// A small batch-matching problem.
pub struct Instance {
    pub net: RoadNetwork,
    pub taxis: Vec<TaxiState>,
    pub batch: Vec<Request>,
    pub constraints: Constraints,
    pub now: Seconds,
}

/// Grid with two-way edges whose costs are drawn from `lo..=hi`.
pub fn random_grid(rng: &mut impl Rng, rows: u32, cols: u32, lo: Seconds, hi: Seconds) -> RoadNetwork {
    let mut costs: HashMap<(NodeId, NodeId), Seconds> = HashMap::new();
    grid_network(rows, cols, |a, b| {
        *costs
            .entry((a.min(b), a.max(b)))
            .or_insert_with(|| rng.random_range(lo..=hi))
    })
}

fn random_request(rng: &mut impl Rng, net: &RoadNetwork, id: u64, epoch: Epoch) -> Request {
    let n = net.node_count();
    let pickup = net.nodes()[rng.random_range(0..n)].id;
    let dropoff = loop {
        let b = net.nodes()[rng.random_range(0..n)].id;
        if b != pickup {
            break b;
        }
    };
    Request {
        id: RequestId(id),
        pickup,
        dropoff,
        arrival_epoch: epoch,
        fare: 1.0,
    }
}

/// Instance at epoch 1 on a small grid. Some taxis already carry or are
/// heading to an earlier request, and may be mid-edge.
pub fn random_instance(seed: u64, max_taxis: u32, max_requests: u32) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(2..=4);
    let cols = rng.random_range(2..=4);
    let net = random_grid(&mut rng, rows, cols, 30, 150);
    let constraints = Constraints {
        capacity: rng.random_range(2..=4),
        max_pickup_delay: rng.random_range(120..=420),
        max_detour_delay: rng.random_range(60..=600),
        epoch_length: 60,
    };
    let n_taxis = rng.random_range(1..=max_taxis);
    let mut next_id = 1000;
    let mut taxis = Vec::new();
    for i in 0..n_taxis {
        let node = net.nodes()[rng.random_range(0..net.node_count())].id;
        let mut taxi = TaxiState::new(TaxiId(i), node);
        if rng.random_bool(0.5) {
            let r = random_request(&mut rng, &net, next_id, 0);
            next_id += 1;
            if let Some(ins) = feasible_insertion(&taxi, &[r], 0, &constraints, &net) {
                taxi.assign([r], ins.plan);
            }
        }
        taxi.advance(0, 60, &net, MovementMode::Continuous);
        taxis.push(taxi);
    }
    let n_req = rng.random_range(1..=max_requests);
    let batch = (0..n_req)
        .map(|i| {
            let epoch = rng.random_range(0..=1);
            random_request(&mut rng, &net, u64::from(i), epoch)
        })
        .collect();
    Instance {
        net,
        taxis,
        batch,
        constraints,
        now: 60,
    }
}

/// A grid world with zones, demand and a matching config, ready to simulate.
pub struct Scenario {
    pub net: RoadNetwork,
    pub zones: ZonePartition,
    pub demand: RequestStream,
    pub config: SimConfig,
}

/// Randomised small scenario: grid, 2x2-node zones, uniform demand of
/// roughly `requests` arrivals.
pub fn random_scenario(seed: u64, requests: u32) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let rows = rng.random_range(3..=5);
    let cols = rng.random_range(3..=5);
    let net = random_grid(&mut rng, rows, cols, 40, 120);
    let zones = grid_zones(&net, cols, 2);
    let horizon: Epoch = rng.random_range(20..=40);
    let rate = f64::from(requests) / f64::from(horizon);
    let demand =
        crate::demand::generate_synthetic(&net, horizon, &vec![rate; horizon as usize], &FareRule::default(), seed)
            .expect("grid has node pairs");
    let constraints = Constraints {
        capacity: rng.random_range(1..=4),
        max_pickup_delay: rng.random_range(60..=300),
        max_detour_delay: rng.random_range(60..=600),
        epoch_length: 60,
    };
    let config = SimConfig {
        horizon_epochs: horizon + 10,
        n_taxis: rng.random_range(2..=8),
        placement: Placement::Uniform,
        constraints,
        weights: ObjectiveWeights::for_constraints(&constraints),
        max_group_size: rng.random_range(1..=3),
        seed,
        ..SimConfig::default()
    };
    Scenario {
        net,
        zones,
        demand,
        config,
    }
}

/// Per-request outcome recounted straight from events.
#[derive(Debug, Clone)]
pub struct Recount {
    pub pickup: NodeId,
    pub dropoff: NodeId,
    pub arrival_epoch: Epoch,
    pub fare: f64,
    pub direct: Seconds,
    pub taxi: Option<TaxiId>,
    pub picked: Option<Seconds>,
    pub dropped: Option<Seconds>,
    pub unmatched: bool,
}

/// Raw per-request view of a log, independent of the metrics index.
pub fn recount(log: &RunLog) -> BTreeMap<RequestId, Recount> {
    let mut out: BTreeMap<RequestId, Recount> = BTreeMap::new();
    for e in &log.events {
        match e {
            Event::RequestArrived {
                request_id,
                pickup,
                dropoff,
                arrival_epoch,
                fare,
                direct_s,
                ..
            } => {
                out.insert(
                    *request_id,
                    Recount {
                        pickup: *pickup,
                        dropoff: *dropoff,
                        arrival_epoch: *arrival_epoch,
                        fare: *fare,
                        direct: *direct_s,
                        taxi: None,
                        picked: None,
                        dropped: None,
                        unmatched: false,
                    },
                );
            }
            Event::Matched {
                request_id, taxi_id, ..
            } => out.get_mut(request_id).unwrap().taxi = Some(*taxi_id),
            Event::Pickup { ts, request_id, .. } => out.get_mut(request_id).unwrap().picked = Some(*ts),
            Event::Dropoff { ts, request_id, .. } => out.get_mut(request_id).unwrap().dropped = Some(*ts),
            Event::UnmatchedFinal { request_id, .. } => out.get_mut(request_id).unwrap().unmatched = true,
            Event::Position { .. } => {}
        }
    }
    out
}

/// (incoming, matched, completed, detour sum) per zone pair for arrivals in
/// `window`.
pub fn recount_pairs(
    log: &RunLog,
    zones: &ZonePartition,
    window: Window,
) -> BTreeMap<(ZoneId, ZoneId), (u64, u64, u64, u64)> {
    let mut out: BTreeMap<(ZoneId, ZoneId), (u64, u64, u64, u64)> = BTreeMap::new();
    for r in recount(log).values() {
        let lo = i64::from(window.end_epoch) - i64::from(window.length_epochs);
        let e = i64::from(r.arrival_epoch);
        if e <= lo || e > i64::from(window.end_epoch) {
            continue;
        }
        let k = (zones.zone_of(r.pickup).unwrap(), zones.zone_of(r.dropoff).unwrap());
        let s = out.entry(k).or_default();
        s.0 += 1;
        if r.taxi.is_some() {
            s.1 += 1;
            if let (Some(p), Some(d)) = (r.picked, r.dropped) {
                s.2 += 1;
                s.3 += (d - p).saturating_sub(r.direct);
            }
        }
    }
    out
}

/// Minimum matched/incoming over pairs with arrivals as an exact fraction.
pub fn recount_zonal_fairness(log: &RunLog, zones: &ZonePartition, window: Window) -> Option<(u64, u64)> {
    recount_pairs(log, zones, window)
        .values()
        .map(|s| (s.1, s.0))
        .min_by(|a, b| (u128::from(a.0) * u128::from(b.1)).cmp(&(u128::from(b.0) * u128::from(a.1))))
}

/// Sort-based quantile with linear interpolation between closest ranks.
pub fn sorted_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (v.len() - 1) as f64;
    let below = pos.floor();
    let frac = pos - below;
    let i = below as usize;
    match v.get(i + 1) {
        Some(next) => v[i] + frac * (next - v[i]),
        None => v[i],
    }
}
