//! Epoch loop driving a fleet through a request stream.

mod taxi;
mod validate;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{Request, RequestStream};
use crate::ids::{Epoch, NodeId, RequestId, TaxiId};
use crate::matching::{
    validate_assignment, AssignmentError, Constraints, MatchContext, MatchingPolicy, ObjectiveWeights, PolicyKind,
    StopKind,
};
use crate::network::RoadNetwork;
use crate::runlog::{Event, EventSink, InputDigests, LogError, RunHeader, RunLog, RunLogBuilder};

pub use taxi::{ride_for, EdgeProgress, MovementMode, Position, StopEvent, TaxiState, Trip};
pub use validate::{validate_runlog, ValidationReport, Validator, Violation, ViolationKind};

/// Where taxis start the day.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "nodes")]
pub enum Placement {
    /// Each taxi on a node drawn uniformly with the run seed.
    #[default]
    Uniform,
    /// Taxi `i` starts on `nodes[i % nodes.len()]`.
    Fixed(Vec<NodeId>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon_epochs: Epoch,
    pub n_taxis: u32,
    pub placement: Placement,
    pub policy: PolicyKind,
    pub constraints: Constraints,
    pub max_group_size: u32,
    pub weights: ObjectiveWeights,
    pub seed: u64,
    /// Only [`MovementMode::Continuous`] is correct; the other mode exists
    /// for regression tests and is omitted from logs when unset.
    #[serde(default, skip_serializing_if = "MovementMode::is_continuous")]
    pub movement: MovementMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        let constraints = Constraints::default();
        Self {
            horizon_epochs: 1440,
            n_taxis: 1000,
            placement: Placement::Uniform,
            policy: PolicyKind::Rpd,
            constraints,
            max_group_size: 3,
            weights: ObjectiveWeights::for_constraints(&constraints),
            seed: 0,
            movement: MovementMode::Continuous,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, net: &RoadNetwork) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if let Err(m) = self.constraints.validate() {
            return bad(m);
        }
        if self.max_group_size == 0 {
            return bad("max_group_size must be positive".into());
        }
        if self.n_taxis > 0 && net.node_count() == 0 {
            return bad("network has no nodes to place taxis on".into());
        }
        if let Placement::Fixed(nodes) = &self.placement {
            if nodes.is_empty() && self.n_taxis > 0 {
                return bad("fixed placement lists no nodes".into());
            }
            if let Some(n) = nodes.iter().find(|n| !net.contains(**n)) {
                return bad(format!("placement node {n} is not in the network"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("request {request} arrives in epoch {epoch}, beyond the horizon of {horizon} epochs")]
    DemandOutsideHorizon {
        request: RequestId,
        epoch: Epoch,
        horizon: Epoch,
    },
    #[error("request {request}: {reason}")]
    DemandNetworkMismatch { request: RequestId, reason: String },
    #[error("policy {policy} returned an infeasible assignment in epoch {epoch}: {source}")]
    InfeasibleAssignment {
        policy: String,
        epoch: Epoch,
        #[source]
        source: AssignmentError,
    },
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Request dispositions at the end of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub arrivals: u64,
    pub matched: u64,
    pub unmatched: u64,
    pub pending_at_horizon: u64,
    pub completed: u64,
}

fn check_demand(config: &SimConfig, net: &RoadNetwork, demand: &RequestStream) -> Result<(), SimError> {
    for r in demand.requests() {
        if r.arrival_epoch >= config.horizon_epochs {
            return Err(SimError::DemandOutsideHorizon {
                request: r.id,
                epoch: r.arrival_epoch,
                horizon: config.horizon_epochs,
            });
        }
        for node in [r.pickup, r.dropoff] {
            if !net.contains(node) {
                return Err(SimError::DemandNetworkMismatch {
                    request: r.id,
                    reason: format!("node {node} is not in the network"),
                });
            }
        }
        if net.tt(r.pickup, r.dropoff).is_none() {
            return Err(SimError::DemandNetworkMismatch {
                request: r.id,
                reason: format!("dropoff {} is unreachable from pickup {}", r.dropoff, r.pickup),
            });
        }
    }
    Ok(())
}

fn place_taxis(config: &SimConfig, net: &RoadNetwork) -> Vec<TaxiState> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_taxis)
        .map(|i| {
            let node = match &config.placement {
                Placement::Uniform => net.nodes()[rng.random_range(0..net.node_count())].id,
                Placement::Fixed(nodes) => nodes[i as usize % nodes.len()],
            };
            TaxiState::new(TaxiId(i), node)
        })
        .collect()
}

/// Runs the configured policy and collects the log in memory.
pub fn run(
    config: &SimConfig,
    inputs: InputDigests,
    net: &RoadNetwork,
    demand: &RequestStream,
) -> Result<(RunLog, RunSummary), SimError> {
    let policy = config.policy.build(config.weights);
    let mut sink = RunLogBuilder::new();
    let summary = run_with_policy(config, inputs, net, demand, policy.as_ref(), &mut sink)?;
    Ok((sink.finish()?, summary))
}

/// Runs `policy` and streams the header and events into `sink`.
pub fn run_with_policy(
    config: &SimConfig,
    inputs: InputDigests,
    net: &RoadNetwork,
    demand: &RequestStream,
    policy: &dyn MatchingPolicy,
    sink: &mut dyn EventSink,
) -> Result<RunSummary, SimError> {
    config.validate(net)?;
    check_demand(config, net, demand)?;
    let c = config.constraints;
    let dt = c.epoch_length;
    let mut taxis = place_taxis(config, net);
    let mut pool: BTreeMap<RequestId, Request> = BTreeMap::new();
    let mut summary = RunSummary::default();
    let mut block: Vec<Event> = Vec::new();

    sink.begin(&RunHeader::new(config.clone(), inputs))?;
    for epoch in 0..config.horizon_epochs {
        let now = u64::from(epoch) * dt;
        block.clear();

        for r in demand.batch_at(epoch) {
            pool.insert(r.id, *r);
            summary.arrivals += 1;
            block.push(Event::RequestArrived {
                ts: now,
                request_id: r.id,
                pickup: r.pickup,
                dropoff: r.dropoff,
                arrival_epoch: r.arrival_epoch,
                fare: r.fare,
                direct_s: net.tt(r.pickup, r.dropoff).expect("checked reachable"),
            });
        }

        for t in &taxis {
            block.push(position_event(t, now, epoch));
        }

        if !pool.is_empty() && !taxis.is_empty() {
            let batch: Vec<Request> = pool.values().copied().collect();
            let ctx = MatchContext {
                epoch,
                now,
                taxis: &taxis,
                batch: &batch,
                constraints: &c,
                max_group_size: config.max_group_size,
                net,
            };
            let assignment = policy.assign(&ctx);
            validate_assignment(&ctx, &assignment).map_err(|source| SimError::InfeasibleAssignment {
                policy: policy.name().to_string(),
                epoch,
                source,
            })?;
            for m in assignment.matches {
                let reqs: Vec<Request> = m
                    .requests
                    .iter()
                    .map(|id| pool.remove(id).expect("validated as pending"))
                    .collect();
                for r in &reqs {
                    summary.matched += 1;
                    block.push(Event::Matched {
                        ts: now,
                        request_id: r.id,
                        taxi_id: m.taxi,
                        epoch,
                    });
                }
                taxis[m.taxi.0 as usize].assign(reqs, m.plan);
            }
        }

        let stops: Vec<Vec<StopEvent>> = taxis
            .par_iter_mut()
            .map(|t| t.advance(now, dt, net, config.movement))
            .collect();
        for (t, evs) in taxis.iter().zip(stops) {
            for s in evs {
                block.push(match s.kind {
                    StopKind::Pickup => Event::Pickup {
                        ts: s.ts,
                        request_id: s.request,
                        taxi_id: t.id,
                    },
                    StopKind::Dropoff => {
                        summary.completed += 1;
                        Event::Dropoff {
                            ts: s.ts,
                            request_id: s.request,
                            taxi_id: t.id,
                        }
                    }
                });
            }
        }

        let end = now + dt;
        let expired: Vec<RequestId> = pool
            .values()
            .filter(|r| r.arrival_time(dt) + c.max_pickup_delay < end)
            .map(|r| r.id)
            .collect();
        for id in expired {
            pool.remove(&id);
            summary.unmatched += 1;
            block.push(Event::UnmatchedFinal {
                ts: end,
                request_id: id,
                epoch,
            });
        }

        block.sort_by_key(|e| (e.ts(), e.order_group()));
        for e in &block {
            sink.append(e)?;
        }
        sink.flush()?;
    }
    summary.pending_at_horizon = pool.len() as u64;
    Ok(summary)
}

fn position_event(t: &TaxiState, now: u64, epoch: Epoch) -> Event {
    Event::Position {
        ts: now,
        taxi_id: t.id,
        epoch,
        node: t.position.node,
        toward: t.position.edge.map(|e| e.to),
        progress_s: t.position.progress(),
        n_onboard: t.n_onboard() as u32,
    }
}
