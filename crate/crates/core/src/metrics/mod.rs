//! Fairness and service metrics computed from run logs.
//!
//! Everything here is a pure function of a [`RunIndex`], which is a
//! per-request digest of a log built in one streaming pass. Requests are
//! cohorted by arrival epoch; a request counts as matched once a match event
//! exists, while delay metrics only consider completed rides.

mod report;
mod series;
mod summary;
mod zonal;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ids::{Epoch, NodeId, RequestId, Seconds, TaxiId};
use crate::runlog::{Event, LogError, RunHeader, RunLog};

pub use report::{numeric_dashboard, DashboardReport, RunInfo, REPORT_FORMAT};
pub use series::{
    completed_boxplots, completed_counts, delay_timeseries, driver_revenue, request_timeseries, BinSummary, BoxplotBin,
    DelayPoint, DelaySeries, RequestCounts,
};
pub use summary::{quantile, DistributionSummary, SummaryStats};
pub use zonal::{
    zonal_fairness, zone_pair_stats, zone_pickup_delay, PairStats, ZonalFairness, ZoneDelay, ZonePairRow, ZonePairStats,
};

/// What the log says happened to one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: RequestId,
    pub pickup: NodeId,
    pub dropoff: NodeId,
    pub arrival_epoch: Epoch,
    pub fare: f64,
    pub direct_s: Seconds,
    pub matched: Option<(TaxiId, Epoch)>,
    pub pickup_ts: Option<Seconds>,
    pub dropoff_ts: Option<Seconds>,
    pub unmatched: bool,
}

impl RequestRecord {
    pub fn is_matched(&self) -> bool {
        self.matched.is_some()
    }

    pub fn is_completed(&self) -> bool {
        self.matched.is_some() && self.pickup_ts.is_some() && self.dropoff_ts.is_some()
    }

    pub fn taxi(&self) -> Option<TaxiId> {
        self.matched.map(|(t, _)| t)
    }

    pub fn pickup_delay(&self, epoch_length: Seconds) -> Option<Seconds> {
        self.pickup_ts
            .map(|p| p.saturating_sub(u64::from(self.arrival_epoch) * epoch_length))
    }

    pub fn detour_delay(&self) -> Option<Seconds> {
        Some((self.dropoff_ts? - self.pickup_ts?).saturating_sub(self.direct_s))
    }
}

/// Per-request digest of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunIndex {
    pub header: RunHeader,
    /// Ascending id.
    pub requests: Vec<RequestRecord>,
}

impl RunIndex {
    pub fn epoch_length(&self) -> Seconds {
        self.header.config.constraints.epoch_length
    }

    pub fn horizon(&self) -> Epoch {
        self.header.config.horizon_epochs
    }

    pub fn n_taxis(&self) -> u32 {
        self.header.config.n_taxis
    }

    /// Epoch whose block a timestamp falls in; stops exactly on a boundary
    /// belong to the earlier epoch.
    pub fn epoch_of_stop(&self, ts: Seconds) -> Epoch {
        (ts.saturating_sub(1) / self.epoch_length()) as Epoch
    }

    pub fn from_log(log: &RunLog) -> Self {
        let mut b = IndexBuilder::new(log.header.clone());
        for e in &log.events {
            b.observe(e);
        }
        b.finish()
    }

    /// Builds the index from a streamed event sequence.
    pub fn from_events(
        header: RunHeader,
        events: impl IntoIterator<Item = Result<Event, LogError>>,
    ) -> Result<Self, LogError> {
        let mut b = IndexBuilder::new(header);
        for e in events {
            b.observe(&e?);
        }
        Ok(b.finish())
    }
}

pub struct IndexBuilder {
    header: RunHeader,
    records: Vec<RequestRecord>,
    by_id: HashMap<RequestId, usize>,
}

impl IndexBuilder {
    pub fn new(header: RunHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
            by_id: HashMap::new(),
        }
    }

    pub fn observe(&mut self, event: &Event) {
        let rec = |b: &mut Self, id: &RequestId| b.by_id.get(id).copied();
        match *event {
            Event::RequestArrived {
                request_id,
                pickup,
                dropoff,
                arrival_epoch,
                fare,
                direct_s,
                ..
            } => {
                if self.by_id.contains_key(&request_id) {
                    return;
                }
                self.by_id.insert(request_id, self.records.len());
                self.records.push(RequestRecord {
                    id: request_id,
                    pickup,
                    dropoff,
                    arrival_epoch,
                    fare,
                    direct_s,
                    matched: None,
                    pickup_ts: None,
                    dropoff_ts: None,
                    unmatched: false,
                });
            }
            Event::Matched {
                request_id,
                taxi_id,
                epoch,
                ..
            } => {
                if let Some(i) = rec(self, &request_id) {
                    self.records[i].matched.get_or_insert((taxi_id, epoch));
                }
            }
            Event::Pickup { ts, request_id, .. } => {
                if let Some(i) = rec(self, &request_id) {
                    self.records[i].pickup_ts.get_or_insert(ts);
                }
            }
            Event::Dropoff { ts, request_id, .. } => {
                if let Some(i) = rec(self, &request_id) {
                    self.records[i].dropoff_ts.get_or_insert(ts);
                }
            }
            Event::UnmatchedFinal { request_id, .. } => {
                if let Some(i) = rec(self, &request_id) {
                    self.records[i].unmatched = true;
                }
            }
            Event::Position { .. } => {}
        }
    }

    pub fn finish(mut self) -> RunIndex {
        self.records.sort_by_key(|r| r.id);
        RunIndex {
            header: self.header,
            requests: self.records,
        }
    }
}

/// Trailing epochs `(end - length, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub end_epoch: Epoch,
    pub length_epochs: Epoch,
}

impl Window {
    pub fn new(end_epoch: Epoch, length_epochs: Epoch) -> Self {
        Self {
            end_epoch,
            length_epochs: length_epochs.max(1),
        }
    }

    /// The whole horizon.
    pub fn day(horizon: Epoch) -> Self {
        Self::new(horizon.saturating_sub(1), horizon.max(1))
    }

    pub fn contains(&self, epoch: Epoch) -> bool {
        epoch <= self.end_epoch && u64::from(epoch) + u64::from(self.length_epochs) > u64::from(self.end_epoch)
    }

    /// First epoch covered, clamped at 0.
    pub fn start_epoch(&self) -> Epoch {
        (self.end_epoch + 1).saturating_sub(self.length_epochs)
    }
}
