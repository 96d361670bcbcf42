use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::demand::Request;
use crate::ids::{RequestId, Seconds};
use crate::matching::{can_reach_pickup, feasible_insertion, Assignment, Constraints, TaxiAssignment};
use crate::network::RoadNetwork;
use crate::simulator::TaxiState;

/// Taxi state after the requests greedily added to it this epoch.
struct Working {
    state: TaxiState,
    added: Vec<RequestId>,
    added_detour: i64,
}

/// Assigns requests one at a time in id order, each to the feasible taxi with
/// the smallest added detour (lowest taxi id on ties), committing the new plan
/// before the next request is considered. Requests with no feasible taxi are
/// skipped. A taxi takes at most `max_group_size` new requests per call.
pub fn greedy_sequential_match(
    taxis: &[TaxiState],
    batch: &[Request],
    now: Seconds,
    constraints: &Constraints,
    max_group_size: u32,
    net: &RoadNetwork,
) -> Assignment {
    let mut batch = batch.to_vec();
    batch.sort_by_key(|r| r.id);
    let mut working: BTreeMap<usize, Working> = BTreeMap::new();

    for request in &batch {
        let best = taxis
            .par_iter()
            .enumerate()
            .filter_map(|(i, base)| {
                let w = working.get(&i);
                if w.is_some_and(|w| w.added.len() >= max_group_size as usize) {
                    return None;
                }
                let taxi = w.map_or(base, |w| &w.state);
                if !can_reach_pickup(taxi, request, now, constraints, net) {
                    return None;
                }
                let ins = feasible_insertion(taxi, std::slice::from_ref(request), now, constraints, net)?;
                Some(((ins.added_detour, taxi.id), i, ins))
            })
            .min_by(|a, b| a.0.cmp(&b.0));
        let Some((_, i, ins)) = best else {
            continue;
        };
        let w = working.entry(i).or_insert_with(|| Working {
            state: taxis[i].clone(),
            added: Vec::new(),
            added_detour: 0,
        });
        w.state.assign([*request], ins.plan);
        w.added.push(request.id);
        w.added_detour += ins.added_detour;
    }

    let mut matches: Vec<TaxiAssignment> = working
        .into_values()
        .map(|w| TaxiAssignment {
            taxi: w.state.id,
            requests: w.added,
            plan: w.state.plan,
            added_detour: w.added_detour,
        })
        .collect();
    matches.sort_by_key(|m| m.taxi);
    Assignment { matches }
}
