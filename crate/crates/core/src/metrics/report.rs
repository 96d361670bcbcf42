use serde::{Deserialize, Serialize};

use crate::ids::Epoch;
use crate::matching::PolicyKind;
use crate::metrics::{
    completed_counts, request_timeseries, zone_pair_stats, BoxplotBin, DistributionSummary, RunIndex, Window,
    ZonalFairness,
};
use crate::zones::ZonePartition;

pub const REPORT_FORMAT: &str = "fairride-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub policy: PolicyKind,
    pub seed: u64,
    pub horizon_epochs: Epoch,
    pub n_taxis: u32,
    pub arrivals: u64,
    pub matched: u64,
    pub unmatched: u64,
    pub pending_at_horizon: u64,
}

/// The six benchmark metrics of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardReport {
    pub format: String,
    pub run: RunInfo,
    /// Whole-run completed rides per taxi.
    pub completed_per_driver: DistributionSummary,
    pub total_completed: u64,
    /// Matched share of each epoch's arrivals, over epochs with arrivals.
    pub acceptance_per_epoch: DistributionSummary,
    /// Whole-run acceptance of each zone pair with arrivals.
    pub interzone_acceptance: DistributionSummary,
    /// Over completed rides.
    pub pickup_delay_s: DistributionSummary,
    /// Over completed rides.
    pub detour_delay_s: DistributionSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zonal_fairness: Option<ZonalFairness>,
}

impl DashboardReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn numeric_dashboard(index: &RunIndex, partition: &ZonePartition) -> DashboardReport {
    let dt = index.epoch_length();
    let series = request_timeseries(index);
    let sum = |f: fn(&crate::metrics::RequestCounts) -> u64| series.iter().map(f).sum::<u64>();
    let run = RunInfo {
        policy: index.header.policy,
        seed: index.header.seed,
        horizon_epochs: index.horizon(),
        n_taxis: index.n_taxis(),
        arrivals: sum(|c| c.total),
        matched: sum(|c| c.matched),
        unmatched: sum(|c| c.unmatched),
        pending_at_horizon: sum(|c| c.pending),
    };

    let per_driver: Vec<u64> = {
        let bins = completed_counts(index, BoxplotBin::Day);
        let n = bins.first().map_or(index.n_taxis() as usize, Vec::len);
        (0..n).map(|t| bins.iter().map(|b| b[t]).sum()).collect()
    };
    let total_completed = per_driver.iter().sum();

    let acceptance_per_epoch = DistributionSummary::of(
        series
            .iter()
            .filter(|c| c.total > 0)
            .map(|c| c.matched as f64 / c.total as f64),
    );

    let pairs = zone_pair_stats(index, partition, Window::day(index.horizon()));
    let interzone_acceptance = DistributionSummary::of(pairs.rows().into_iter().map(|r| r.acceptance));

    let completed = || index.requests.iter().filter(|r| r.is_completed());
    DashboardReport {
        format: REPORT_FORMAT.to_string(),
        run,
        completed_per_driver: DistributionSummary::of_counts(per_driver),
        total_completed,
        acceptance_per_epoch,
        interzone_acceptance,
        pickup_delay_s: DistributionSummary::of(completed().filter_map(|r| r.pickup_delay(dt)).map(|d| d as f64)),
        detour_delay_s: DistributionSummary::of(completed().filter_map(|r| r.detour_delay()).map(|d| d as f64)),
        zonal_fairness: ZonalFairness::of(&pairs),
    }
}
