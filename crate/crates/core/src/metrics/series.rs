use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::{Epoch, Seconds};
use crate::metrics::{DistributionSummary, RunIndex};

/// Arrival-cohort dispositions for one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestCounts {
    pub epoch: Epoch,
    pub total: u64,
    pub matched: u64,
    pub unmatched: u64,
    pub pending: u64,
}

/// One entry per horizon epoch, by arrival epoch and final disposition.
pub fn request_timeseries(index: &RunIndex) -> Vec<RequestCounts> {
    let mut out: Vec<RequestCounts> = (0..index.horizon())
        .map(|epoch| RequestCounts {
            epoch,
            ..Default::default()
        })
        .collect();
    for r in &index.requests {
        let Some(c) = out.get_mut(r.arrival_epoch as usize) else {
            continue;
        };
        c.total += 1;
        if r.is_matched() {
            c.matched += 1;
        } else if r.unmatched {
            c.unmatched += 1;
        } else {
            c.pending += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPoint {
    pub epoch: Epoch,
    pub completed: u64,
    pub mean_pickup_s: f64,
    pub mean_detour_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySeries {
    /// Only epochs with at least one completed arrival.
    pub points: Vec<DelayPoint>,
    pub completed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day_mean_pickup_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day_mean_detour_s: Option<f64>,
}

/// Mean pickup and detour delay of completed requests by arrival epoch,
/// plus request-weighted means over the whole run.
pub fn delay_timeseries(index: &RunIndex) -> DelaySeries {
    let dt = index.epoch_length();
    let mut per: Vec<(u64, u64, u64)> = vec![(0, 0, 0); index.horizon() as usize];
    let (mut n, mut sp, mut sd) = (0u64, 0u64, 0u64);
    for r in index.requests.iter().filter(|r| r.is_completed()) {
        let (Some(p), Some(d)) = (r.pickup_delay(dt), r.detour_delay()) else {
            continue;
        };
        if let Some(slot) = per.get_mut(r.arrival_epoch as usize) {
            slot.0 += 1;
            slot.1 += p;
            slot.2 += d;
        }
        n += 1;
        sp += p;
        sd += d;
    }
    let points = per
        .iter()
        .enumerate()
        .filter(|(_, s)| s.0 > 0)
        .map(|(e, &(c, p, d))| DelayPoint {
            epoch: e as Epoch,
            completed: c,
            mean_pickup_s: p as f64 / c as f64,
            mean_detour_s: d as f64 / c as f64,
        })
        .collect();
    DelaySeries {
        points,
        completed: n,
        day_mean_pickup_s: (n > 0).then(|| sp as f64 / n as f64),
        day_mean_detour_s: (n > 0).then(|| sd as f64 / n as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxplotBin {
    Hour,
    Day,
}

impl BoxplotBin {
    pub fn seconds(self) -> Seconds {
        match self {
            BoxplotBin::Hour => 3600,
            BoxplotBin::Day => 86_400,
        }
    }
}

impl fmt::Display for BoxplotBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxplotBin::Hour => "hour",
            BoxplotBin::Day => "day",
        })
    }
}

impl FromStr for BoxplotBin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hour" => Ok(BoxplotBin::Hour),
            "day" => Ok(BoxplotBin::Day),
            other => Err(format!("unknown bin {other:?}; expected hour|day")),
        }
    }
}

fn fleet_size(index: &RunIndex) -> usize {
    let seen = index
        .requests
        .iter()
        .filter_map(|r| r.taxi())
        .map(|t| t.0 as usize + 1)
        .max()
        .unwrap_or(0);
    seen.max(index.n_taxis() as usize)
}

/// Completed requests per bin per taxi, `[bin][taxi]`. A ride belongs to the
/// bin holding the epoch in which it was dropped off.
pub fn completed_counts(index: &RunIndex, bin: BoxplotBin) -> Vec<Vec<u64>> {
    let len = bin.seconds();
    let span = u64::from(index.horizon()) * index.epoch_length();
    let n_bins = span.div_ceil(len) as usize;
    let mut out = vec![vec![0u64; fleet_size(index)]; n_bins];
    if n_bins == 0 {
        return out;
    }
    for r in index.requests.iter().filter(|r| r.is_completed()) {
        let (Some(taxi), Some(ts)) = (r.taxi(), r.dropoff_ts) else {
            continue;
        };
        let start = u64::from(index.epoch_of_stop(ts)) * index.epoch_length();
        let b = ((start / len) as usize).min(n_bins - 1);
        out[b][taxi.0 as usize] += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin: u32,
    pub start_s: Seconds,
    pub summary: DistributionSummary,
}

/// Distribution over taxis of completed-ride counts, per bin. Taxis without
/// completions count as zero.
pub fn completed_boxplots(index: &RunIndex, bin: BoxplotBin) -> Vec<BinSummary> {
    completed_counts(index, bin)
        .into_iter()
        .enumerate()
        .map(|(i, counts)| BinSummary {
            bin: i as u32,
            start_s: i as u64 * bin.seconds(),
            summary: DistributionSummary::of_counts(counts),
        })
        .collect()
}

/// Per-taxi revenue from completed rides, summarised over the fleet.
pub fn driver_revenue(index: &RunIndex) -> DistributionSummary {
    let mut cents = vec![0i64; fleet_size(index)];
    for r in index.requests.iter().filter(|r| r.is_completed()) {
        if let Some(t) = r.taxi() {
            cents[t.0 as usize] += (r.fare * 100.0).round() as i64;
        }
    }
    DistributionSummary::of(cents.into_iter().map(|c| c as f64 / 100.0))
}
