use std::collections::HashSet;

use rayon::prelude::*;

use crate::demand::Request;
use crate::ids::{RequestId, Seconds, TaxiId};
use crate::matching::{can_reach_pickup, feasible_insertion, Constraints, ObjectiveWeights, StopPlan};
use crate::network::RoadNetwork;
use crate::simulator::TaxiState;

/// A feasible group of batch requests for one taxi.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub taxi: TaxiId,
    /// Ascending request ids.
    pub group: Vec<RequestId>,
    pub plan: StopPlan,
    pub added_detour: i64,
}

impl Candidate {
    pub fn value(&self, weights: &ObjectiveWeights) -> i64 {
        weights.value(self.group.len(), self.added_detour)
    }
}

/// Enumerates every feasible (taxi, group) pair with `1 <= |group| <=
/// min(remaining capacity, max_group_size)`. A group of size k is tried only
/// when all of its (k-1)-subsets were feasible for that taxi.
///
/// Output is ordered by `(taxi, group)`; a candidate's index in this list is
/// its id for tie-breaking.
pub fn generate_candidates(
    taxis: &[TaxiState],
    batch: &[Request],
    now: Seconds,
    constraints: &Constraints,
    max_group_size: u32,
    net: &RoadNetwork,
) -> Vec<Candidate> {
    if batch.is_empty() {
        return Vec::new();
    }
    let mut batch: Vec<Request> = batch.to_vec();
    batch.sort_by_key(|r| r.id);
    let mut order: Vec<&TaxiState> = taxis.iter().collect();
    order.sort_by_key(|t| t.id);
    order
        .par_iter()
        .map(|taxi| taxi_candidates(taxi, &batch, now, constraints, max_group_size, net))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn taxi_candidates(
    taxi: &TaxiState,
    batch: &[Request],
    now: Seconds,
    constraints: &Constraints,
    max_group_size: u32,
    net: &RoadNetwork,
) -> Vec<Candidate> {
    let room = (constraints.capacity as usize).saturating_sub(taxi.trips.len());
    let cap = room.min(max_group_size as usize);
    let mut out = Vec::new();
    if cap == 0 {
        return out;
    }
    // Level 1.
    let mut level: Vec<Vec<usize>> = Vec::new();
    for (i, r) in batch.iter().enumerate() {
        if !can_reach_pickup(taxi, r, now, constraints, net) {
            continue;
        }
        if let Some(ins) = feasible_insertion(taxi, std::slice::from_ref(r), now, constraints, net) {
            out.push(candidate(taxi, batch, &[i], ins));
            level.push(vec![i]);
        }
    }
    let singles: Vec<usize> = level.iter().map(|g| g[0]).collect();
    for _size in 2..=cap {
        let feasible: HashSet<&[usize]> = level.iter().map(Vec::as_slice).collect();
        let mut next = Vec::new();
        for group in &level {
            let last = *group.last().expect("non-empty group");
            for &j in singles.iter().filter(|&&j| j > last) {
                let mut grown = group.clone();
                grown.push(j);
                let all_subsets_feasible = (0..grown.len()).all(|skip| {
                    let sub: Vec<usize> = grown
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    feasible.contains(sub.as_slice())
                });
                if !all_subsets_feasible {
                    continue;
                }
                let requests: Vec<Request> = grown.iter().map(|&k| batch[k]).collect();
                if let Some(ins) = feasible_insertion(taxi, &requests, now, constraints, net) {
                    out.push(candidate(taxi, batch, &grown, ins));
                    next.push(grown);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    out.sort_by(|a, b| a.group.cmp(&b.group));
    out
}

fn candidate(taxi: &TaxiState, batch: &[Request], members: &[usize], ins: crate::matching::Insertion) -> Candidate {
    Candidate {
        taxi: taxi.id,
        group: members.iter().map(|&k| batch[k].id).collect(),
        plan: ins.plan,
        added_detour: ins.added_detour,
    }
}
