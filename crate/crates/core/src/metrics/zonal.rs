use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::ZoneId;
use crate::metrics::{RequestRecord, RunIndex, Window};
use crate::zones::ZonePartition;

/// Counts for one ordered (pickup zone, dropoff zone) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub incoming: u64,
    pub matched: u64,
    pub completed: u64,
    pub detour_sum_s: u64,
}

impl PairStats {
    fn add(&mut self, other: &PairStats) {
        self.incoming += other.incoming;
        self.matched += other.matched;
        self.completed += other.completed;
        self.detour_sum_s += other.detour_sum_s;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ZonePairStats {
    pub pairs: BTreeMap<(ZoneId, ZoneId), PairStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePairRow {
    pub origin: ZoneId,
    pub destination: ZoneId,
    pub incoming: u64,
    pub matched: u64,
    pub acceptance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_detour_s: Option<f64>,
}

impl ZonePairStats {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RequestRecord>, partition: &ZonePartition) -> Self {
        let mut out = Self::default();
        for r in records {
            let (Some(a), Some(b)) = (partition.zone_of(r.pickup), partition.zone_of(r.dropoff)) else {
                continue;
            };
            let p = out.pairs.entry((a, b)).or_default();
            p.incoming += 1;
            if r.is_matched() {
                p.matched += 1;
            }
            if let (true, Some(d)) = (r.is_completed(), r.detour_delay()) {
                p.completed += 1;
                p.detour_sum_s += d;
            }
        }
        out
    }

    /// Sums two disjoint sets of counts. Associative and commutative.
    pub fn merge(mut self, other: &ZonePairStats) -> Self {
        for (k, v) in &other.pairs {
            self.pairs.entry(*k).or_default().add(v);
        }
        self
    }

    pub fn rows(&self) -> Vec<ZonePairRow> {
        self.pairs
            .iter()
            .filter(|(_, s)| s.incoming > 0)
            .map(|(&(origin, destination), s)| ZonePairRow {
                origin,
                destination,
                incoming: s.incoming,
                matched: s.matched,
                acceptance: s.matched as f64 / s.incoming as f64,
                mean_detour_s: (s.completed > 0).then(|| s.detour_sum_s as f64 / s.completed as f64),
            })
            .collect()
    }

    pub fn total_incoming(&self) -> u64 {
        self.pairs.values().map(|s| s.incoming).sum()
    }

    pub fn total_matched(&self) -> u64 {
        self.pairs.values().map(|s| s.matched).sum()
    }
}

/// Per-pair counts of requests arriving inside `window`.
pub fn zone_pair_stats(index: &RunIndex, partition: &ZonePartition, window: Window) -> ZonePairStats {
    ZonePairStats::from_records(
        index.requests.iter().filter(|r| window.contains(r.arrival_epoch)),
        partition,
    )
}

/// The most underserved zone pair and its acceptance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZonalFairness {
    pub origin: ZoneId,
    pub destination: ZoneId,
    pub matched: u64,
    pub incoming: u64,
    pub value: f64,
}

impl ZonalFairness {
    /// Minimum acceptance over pairs with arrivals; ties go to the first pair
    /// in (origin, destination) order. `None` when no pair has arrivals.
    pub fn of(stats: &ZonePairStats) -> Option<Self> {
        let mut best: Option<Self> = None;
        for (&(origin, destination), s) in &stats.pairs {
            if s.incoming == 0 {
                continue;
            }
            let lower = match &best {
                None => true,
                Some(b) => {
                    (u128::from(s.matched) * u128::from(b.incoming))
                        .cmp(&(u128::from(b.matched) * u128::from(s.incoming)))
                        == Ordering::Less
                }
            };
            if lower {
                best = Some(Self {
                    origin,
                    destination,
                    matched: s.matched,
                    incoming: s.incoming,
                    value: s.matched as f64 / s.incoming as f64,
                });
            }
        }
        best
    }
}

pub fn zonal_fairness(index: &RunIndex, partition: &ZonePartition, window: Window) -> Option<ZonalFairness> {
    ZonalFairness::of(&zone_pair_stats(index, partition, window))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneDelay {
    pub mean_s: f64,
    pub count: u64,
}

/// Mean pickup delay per pickup zone over picked-up requests arriving in
/// `window`. Zones without such requests are absent.
pub fn zone_pickup_delay(index: &RunIndex, partition: &ZonePartition, window: Window) -> BTreeMap<ZoneId, ZoneDelay> {
    let dt = index.epoch_length();
    let mut acc: BTreeMap<ZoneId, (u64, u64)> = BTreeMap::new();
    for r in &index.requests {
        if !window.contains(r.arrival_epoch) || !r.is_matched() {
            continue;
        }
        let (Some(d), Some(z)) = (r.pickup_delay(dt), partition.zone_of(r.pickup)) else {
            continue;
        };
        let e = acc.entry(z).or_default();
        e.0 += d;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(z, (sum, n))| {
            (
                z,
                ZoneDelay {
                    mean_s: sum as f64 / n as f64,
                    count: n,
                },
            )
        })
        .collect()
}
