use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use fairride_core::metrics::{
    completed_boxplots, delay_timeseries, numeric_dashboard, request_timeseries, BoxplotBin, IndexBuilder, PairStats,
    RequestRecord, RunIndex, Window, ZonePairStats,
};
use fairride_core::network::RoadNetwork;
use fairride_core::runlog::{Event, LogError, RunHeader, RunLog};
use fairride_core::simulator::Validator;
use fairride_core::zones::ZonePartition;
use fairride_core::{Epoch, NodeId, RequestId, Seconds, TaxiId, ZoneId};
use serde::Serialize;
use thiserror::Error;

use crate::bodies::{to_body, BoxplotBody, DelaySeriesBody, RequestSeriesBody};
use crate::API_FORMAT;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("run id {0:?} is already registered")]
    DuplicateId(String),
    #[error("run {id}: log has {count} violations, first: {first}")]
    Invalid { id: String, count: usize, first: String },
    #[error("run {id}: {message}")]
    Incomplete { id: String, message: String },
    #[error("run {id}: {source}")]
    Log {
        id: String,
        #[source]
        source: LogError,
    },
}

/// Where a taxi stands at the start of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    pub node: NodeId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toward: Option<NodeId>,
    pub progress_s: Seconds,
    pub n_onboard: u32,
}

#[derive(Debug, Clone, Copy)]
struct TaxiStop {
    request: RequestId,
    match_epoch: Epoch,
    pickup: Option<(Seconds, u64)>,
    dropoff: Option<(Seconds, u64)>,
}

/// A registered run with everything needed to answer queries precomputed.
pub struct RunData {
    pub id: String,
    pub header: RunHeader,
    pub index: RunIndex,
    pub net: Arc<RoadNetwork>,
    pub zones: Arc<ZonePartition>,
    n_taxis: usize,
    /// `[epoch * n_taxis + taxi]`.
    positions: Vec<Snapshot>,
    /// `[taxi * (horizon + 1) + e]`: matches in epochs `< e`.
    match_prefix: Vec<u32>,
    /// Indices into `index.requests`, by (arrival epoch, id).
    by_arrival: Vec<u32>,
    arrival_offsets: Vec<u32>,
    /// Cumulative counts at each epoch with arrivals, by pair.
    pair_prefix: PairPrefix,
    /// Cumulative (delay sum, count) by pickup zone.
    delay_prefix: DelayPrefix,
    stops: Vec<Vec<TaxiStop>>,
    pub(crate) request_series: String,
    pub(crate) delay_series: String,
    pub(crate) boxplots_hour: String,
    pub(crate) boxplots_day: String,
    pub(crate) dashboard: String,
}

fn prefix_at<T: Copy>(entries: &[(Epoch, T)], upto: i64) -> Option<T> {
    if upto < 0 {
        return None;
    }
    let n = entries.partition_point(|(e, _)| i64::from(*e) <= upto);
    n.checked_sub(1).map(|i| entries[i].1)
}

impl RunData {
    pub fn from_log(
        id: &str,
        log: &RunLog,
        net: Arc<RoadNetwork>,
        zones: Arc<ZonePartition>,
    ) -> Result<Self, RegistryError> {
        Self::from_events(id, log.header.clone(), log.events.iter().cloned().map(Ok), net, zones)
    }

    /// Validates and indexes a log in one pass over its events.
    pub fn from_events(
        id: &str,
        header: RunHeader,
        events: impl IntoIterator<Item = Result<Event, LogError>>,
        net: Arc<RoadNetwork>,
        zones: Arc<ZonePartition>,
    ) -> Result<Self, RegistryError> {
        let horizon = header.config.horizon_epochs as usize;
        let n_taxis = header.config.n_taxis as usize;
        let incomplete = |message: String| RegistryError::Incomplete {
            id: id.to_string(),
            message,
        };
        let mut validator = Validator::new(&net, header.config.constraints);
        let mut builder = IndexBuilder::new(header.clone());
        let mut positions: Vec<Option<Snapshot>> = vec![None; horizon * n_taxis];
        let mut matches = vec![0u32; n_taxis * (horizon + 1)];
        let mut stops: HashMap<RequestId, (TaxiId, TaxiStop)> = HashMap::new();

        for (seq, event) in events.into_iter().enumerate() {
            let event = event.map_err(|source| RegistryError::Log {
                id: id.to_string(),
                source,
            })?;
            validator.observe(&event);
            builder.observe(&event);
            if let Some(t) = event.taxi() {
                if t.0 as usize >= n_taxis {
                    return Err(incomplete(format!("taxi {t} is outside the fleet of {n_taxis}")));
                }
            }
            match event {
                Event::Position {
                    taxi_id,
                    epoch,
                    node,
                    toward,
                    progress_s,
                    n_onboard,
                    ..
                } => {
                    if let Some(slot) = positions.get_mut(epoch as usize * n_taxis + taxi_id.0 as usize) {
                        *slot = Some(Snapshot {
                            node,
                            toward,
                            progress_s,
                            n_onboard,
                        });
                    }
                }
                Event::Matched {
                    request_id,
                    taxi_id,
                    epoch,
                    ..
                } => {
                    if (epoch as usize) < horizon {
                        matches[taxi_id.0 as usize * (horizon + 1) + epoch as usize + 1] += 1;
                    }
                    stops.insert(
                        request_id,
                        (
                            taxi_id,
                            TaxiStop {
                                request: request_id,
                                match_epoch: epoch,
                                pickup: None,
                                dropoff: None,
                            },
                        ),
                    );
                }
                Event::Pickup { ts, request_id, .. } => {
                    if let Some((_, s)) = stops.get_mut(&request_id) {
                        s.pickup = Some((ts, seq as u64));
                    }
                }
                Event::Dropoff { ts, request_id, .. } => {
                    if let Some((_, s)) = stops.get_mut(&request_id) {
                        s.dropoff = Some((ts, seq as u64));
                    }
                }
                _ => {}
            }
        }

        let report = validator.finish();
        if let Some(first) = report.violations.first() {
            return Err(RegistryError::Invalid {
                id: id.to_string(),
                count: report.violations.len(),
                first: first.message.clone(),
            });
        }
        let positions = positions
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                p.ok_or_else(|| incomplete(format!("no position for taxi {} in epoch {}", i % n_taxis, i / n_taxis)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for t in 0..n_taxis {
            let row = &mut matches[t * (horizon + 1)..(t + 1) * (horizon + 1)];
            for e in 1..row.len() {
                row[e] += row[e - 1];
            }
        }
        let mut per_taxi: Vec<Vec<TaxiStop>> = vec![Vec::new(); n_taxis];
        for (taxi, s) in stops.into_values() {
            per_taxi[taxi.0 as usize].push(s);
        }
        for v in &mut per_taxi {
            v.sort_by_key(|s| s.request);
        }

        let index = builder.finish();
        let mut by_arrival: Vec<u32> = (0..index.requests.len() as u32).collect();
        by_arrival.sort_by_key(|&i| {
            let r = &index.requests[i as usize];
            (r.arrival_epoch, r.id)
        });
        let mut arrival_offsets = vec![0u32; horizon + 1];
        for r in &index.requests {
            if (r.arrival_epoch as usize) < horizon {
                arrival_offsets[r.arrival_epoch as usize + 1] += 1;
            }
        }
        for e in 1..arrival_offsets.len() {
            arrival_offsets[e] += arrival_offsets[e - 1];
        }

        let (pair_prefix, delay_prefix) = build_prefixes(&index, &by_arrival, &zones);
        let dt = index.epoch_length();
        Ok(RunData {
            id: id.to_string(),
            request_series: to_body(&RequestSeriesBody {
                format: API_FORMAT,
                run: id,
                epoch_length_s: dt,
                points: request_timeseries(&index),
            }),
            delay_series: to_body(&DelaySeriesBody {
                format: API_FORMAT,
                run: id,
                epoch_length_s: dt,
                series: delay_timeseries(&index),
            }),
            boxplots_hour: to_body(&BoxplotBody {
                format: API_FORMAT,
                run: id,
                bin: BoxplotBin::Hour,
                bins: completed_boxplots(&index, BoxplotBin::Hour),
            }),
            boxplots_day: to_body(&BoxplotBody {
                format: API_FORMAT,
                run: id,
                bin: BoxplotBin::Day,
                bins: completed_boxplots(&index, BoxplotBin::Day),
            }),
            dashboard: numeric_dashboard(&index, &zones).to_json(),
            header,
            index,
            net,
            zones,
            n_taxis,
            positions,
            match_prefix: matches,
            by_arrival,
            arrival_offsets,
            pair_prefix,
            delay_prefix,
            stops: per_taxi,
        })
    }

    pub fn horizon(&self) -> Epoch {
        self.header.config.horizon_epochs
    }

    pub fn n_taxis(&self) -> usize {
        self.n_taxis
    }

    pub fn epoch_length(&self) -> Seconds {
        self.header.config.constraints.epoch_length
    }

    pub fn snapshot(&self, epoch: Epoch, taxi: usize) -> Snapshot {
        self.positions[epoch as usize * self.n_taxis + taxi]
    }

    /// Matches made in the `window` epochs before `epoch`, not counting
    /// `epoch` itself since snapshots precede dispatch.
    pub fn matches_before(&self, taxi: usize, epoch: Epoch, window: Epoch) -> u32 {
        let row = &self.match_prefix[taxi * (self.horizon() as usize + 1)..];
        let end = epoch as usize;
        let start = end.saturating_sub(window as usize);
        row[end] - row[start]
    }

    pub fn arrivals_at(&self, epoch: Epoch) -> impl Iterator<Item = &RequestRecord> {
        let lo = self.arrival_offsets[epoch as usize] as usize;
        let hi = self.arrival_offsets[epoch as usize + 1] as usize;
        self.by_arrival[lo..hi]
            .iter()
            .map(|&i| &self.index.requests[i as usize])
    }

    /// Same result as `metrics::zone_pair_stats` for `window`.
    pub fn pair_stats(&self, window: Window) -> ZonePairStats {
        let hi = i64::from(window.end_epoch);
        let lo = hi - i64::from(window.length_epochs);
        let mut out = ZonePairStats::default();
        for (pair, entries) in &self.pair_prefix {
            let upper = prefix_at(entries, hi).unwrap_or_default();
            let lower = prefix_at(entries, lo).unwrap_or_default();
            if upper.incoming > lower.incoming {
                out.pairs.insert(
                    *pair,
                    PairStats {
                        incoming: upper.incoming - lower.incoming,
                        matched: upper.matched - lower.matched,
                        completed: upper.completed - lower.completed,
                        detour_sum_s: upper.detour_sum_s - lower.detour_sum_s,
                    },
                );
            }
        }
        out
    }

    /// (delay sum, count) per zone for `window`; zones without data absent.
    pub fn zone_delays(&self, window: Window) -> BTreeMap<ZoneId, (u64, u64)> {
        let hi = i64::from(window.end_epoch);
        let lo = hi - i64::from(window.length_epochs);
        let mut out = BTreeMap::new();
        for (zone, entries) in &self.delay_prefix {
            let at = |x: i64| {
                if x < 0 {
                    return (0, 0);
                }
                let n = entries.partition_point(|(e, _, _)| i64::from(*e) <= x);
                n.checked_sub(1).map_or((0, 0), |i| (entries[i].1, entries[i].2))
            };
            let (su, cu) = at(hi);
            let (sl, cl) = at(lo);
            if cu > cl {
                out.insert(*zone, (su - sl, cu - cl));
            }
        }
        out
    }

    /// Remaining stops of `taxi` at the start of `epoch`: (request, is_pickup,
    /// node, timestamp when reached within the run).
    pub fn remaining_stops(&self, taxi: usize, epoch: Epoch) -> Vec<(RequestId, bool, NodeId, Option<Seconds>)> {
        let now = u64::from(epoch) * self.epoch_length();
        let mut realized = Vec::new();
        let mut pending = Vec::new();
        for s in &self.stops[taxi] {
            if s.match_epoch >= epoch || s.dropoff.is_some_and(|(ts, _)| ts <= now) {
                continue;
            }
            let Ok(i) = self.index.requests.binary_search_by_key(&s.request, |r| r.id) else {
                continue;
            };
            let r = &self.index.requests[i];
            let mut push = |is_pickup: bool, node: NodeId, at: Option<(Seconds, u64)>| match at {
                Some((ts, seq)) => realized.push((ts, seq, (s.request, is_pickup, node, Some(ts)))),
                None => pending.push((s.request, !is_pickup, (s.request, is_pickup, node, None))),
            };
            if s.pickup.is_none_or(|(ts, _)| ts > now) {
                push(true, r.pickup, s.pickup);
            }
            push(false, r.dropoff, s.dropoff);
        }
        realized.sort_by_key(|x| (x.0, x.1));
        pending.sort_by_key(|x| (x.0, x.1));
        realized
            .into_iter()
            .map(|x| x.2)
            .chain(pending.into_iter().map(|x| x.2))
            .collect()
    }
}

type PairPrefix = BTreeMap<(ZoneId, ZoneId), Vec<(Epoch, PairStats)>>;
type DelayPrefix = BTreeMap<ZoneId, Vec<(Epoch, u64, u64)>>;

fn build_prefixes(index: &RunIndex, by_arrival: &[u32], zones: &ZonePartition) -> (PairPrefix, DelayPrefix) {
    let dt = index.epoch_length();
    let mut pairs: PairPrefix = BTreeMap::new();
    let mut delays: DelayPrefix = BTreeMap::new();
    for &i in by_arrival {
        let r = &index.requests[i as usize];
        let e = r.arrival_epoch;
        if let (Some(a), Some(b)) = (zones.zone_of(r.pickup), zones.zone_of(r.dropoff)) {
            let v = pairs.entry((a, b)).or_default();
            let mut cur = v.last().map(|x| x.1).unwrap_or_default();
            cur.incoming += 1;
            if r.is_matched() {
                cur.matched += 1;
            }
            if let (true, Some(d)) = (r.is_completed(), r.detour_delay()) {
                cur.completed += 1;
                cur.detour_sum_s += d;
            }
            match v.last_mut() {
                Some(last) if last.0 == e => last.1 = cur,
                _ => v.push((e, cur)),
            }
        }
        if let (true, Some(d), Some(z)) = (r.is_matched(), r.pickup_delay(dt), zones.zone_of(r.pickup)) {
            let v = delays.entry(z).or_default();
            let (s, c) = v.last().map_or((0, 0), |x| (x.1, x.2));
            match v.last_mut() {
                Some(last) if last.0 == e => *last = (e, s + d, c + 1),
                _ => v.push((e, s + d, c + 1)),
            }
        }
    }
    (pairs, delays)
}

type RunMap = Arc<BTreeMap<String, Arc<RunData>>>;

/// Registered runs. Registration swaps in a new map so readers always see a
/// consistent set.
#[derive(Default, Clone)]
pub struct RunRegistry {
    runs: Arc<RwLock<RunMap>>,
}

impl RunRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, run: RunData) -> Result<(), RegistryError> {
        let mut guard = self.runs.write().expect("registry lock");
        if guard.contains_key(&run.id) {
            return Err(RegistryError::DuplicateId(run.id));
        }
        let mut next = (**guard).clone();
        next.insert(run.id.clone(), Arc::new(run));
        *guard = Arc::new(next);
        Ok(())
    }

    pub fn snapshot(&self) -> RunMap {
        self.runs.read().expect("registry lock").clone()
    }

    pub fn get(&self, id: &str) -> Option<Arc<RunData>> {
        self.snapshot().get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
