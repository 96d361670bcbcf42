//! Passenger requests: ingestion, synthetic generation and per-epoch batches.

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{Epoch, NodeId, RequestId, Seconds};
use crate::network::RoadNetwork;
use crate::table::read_rows;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("requests line {line}: malformed row: {message}")]
    Malformed { line: u64, message: String },
    #[error("requests line {line}: node {node} is not in the network")]
    UnknownNode { line: u64, node: NodeId },
    #[error("requests line {line}: pickup and dropoff are both node {node}")]
    SameEndpoints { line: u64, node: NodeId },
    #[error("requests line {line}: dropoff {dropoff} is unreachable from pickup {pickup}")]
    Unreachable { line: u64, pickup: NodeId, dropoff: NodeId },
    #[error("requests line {line}: fare must be non-negative, got {fare}")]
    NegativeFare { line: u64, fare: f64 },
    #[error("requests line {line}: arrival epoch must be non-negative, got {value}")]
    NegativeArrival { line: u64, value: f64 },
    #[error("requests line {line}: duplicate request_id {id}")]
    DuplicateId { line: u64, id: RequestId },
    #[error("network has no pair of distinct nodes with a path between them")]
    EmptyNetwork,
    #[error("rate profile has {got} entries but the horizon is {horizon} epochs")]
    ProfileLength { got: usize, horizon: u32 },
    #[error("rate profile entry {epoch} is not a finite non-negative number")]
    InvalidRate { epoch: usize },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub pickup: NodeId,
    pub dropoff: NodeId,
    pub arrival_epoch: Epoch,
    pub fare: f64,
}

impl Request {
    /// Arrival instant in seconds for the given epoch length.
    pub fn arrival_time(&self, epoch_length: Seconds) -> Seconds {
        Seconds::from(self.arrival_epoch) * epoch_length
    }
}

/// Requests sorted by `(arrival_epoch, id)` with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequestStream {
    requests: Vec<Request>,
}

impl RequestStream {
    /// Sorts the requests; fails on duplicate ids (reported with line 0).
    pub fn new(mut requests: Vec<Request>) -> Result<Self, DemandError> {
        requests.sort_by_key(|r| (r.arrival_epoch, r.id));
        let mut ids: Vec<_> = requests.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(DemandError::DuplicateId { line: 0, id: w[0] });
        }
        Ok(Self { requests })
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// Requests arriving exactly at `epoch`, in id order.
    pub fn batch_at(&self, epoch: Epoch) -> &[Request] {
        let lo = self.requests.partition_point(|r| r.arrival_epoch < epoch);
        let hi = self.requests.partition_point(|r| r.arrival_epoch <= epoch);
        &self.requests[lo..hi]
    }

    /// Last arrival epoch, if any.
    pub fn last_epoch(&self) -> Option<Epoch> {
        self.requests.last().map(|r| r.arrival_epoch)
    }
}

#[derive(Deserialize)]
struct RequestRow {
    request_id: u64,
    pickup_node: u64,
    dropoff_node: u64,
    arrival_epoch: f64,
    fare: f64,
}

/// Reads `request_id,pickup_node,dropoff_node,arrival_epoch,fare`. Fractional
/// arrival epochs are floored.
pub fn load_requests(source: impl Read, net: &RoadNetwork) -> Result<RequestStream, DemandError> {
    let rows = read_rows::<RequestRow>(source).map_err(|e| DemandError::Malformed {
        line: e.line,
        message: e.message,
    })?;
    let mut seen = std::collections::HashSet::with_capacity(rows.len());
    let mut requests = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let (pickup, dropoff) = (NodeId(row.pickup_node), NodeId(row.dropoff_node));
        for node in [pickup, dropoff] {
            if !net.contains(node) {
                return Err(DemandError::UnknownNode { line, node });
            }
        }
        if pickup == dropoff {
            return Err(DemandError::SameEndpoints { line, node: pickup });
        }
        if net.tt(pickup, dropoff).is_none() {
            return Err(DemandError::Unreachable { line, pickup, dropoff });
        }
        if !row.fare.is_finite() || !row.arrival_epoch.is_finite() {
            return Err(DemandError::Malformed {
                line,
                message: "fare and arrival_epoch must be finite".into(),
            });
        }
        if row.fare < 0.0 {
            return Err(DemandError::NegativeFare { line, fare: row.fare });
        }
        if row.arrival_epoch < 0.0 || row.arrival_epoch >= f64::from(u32::MAX) {
            return Err(DemandError::NegativeArrival {
                line,
                value: row.arrival_epoch,
            });
        }
        let id = RequestId(row.request_id);
        if !seen.insert(id) {
            return Err(DemandError::DuplicateId { line, id });
        }
        requests.push(Request {
            id,
            pickup,
            dropoff,
            arrival_epoch: row.arrival_epoch.floor() as Epoch,
            fare: row.fare,
        });
    }
    RequestStream::new(requests)
}

pub fn load_requests_file(path: impl AsRef<Path>, net: &RoadNetwork) -> Result<RequestStream, DemandError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DemandError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_requests(file, net)
}

/// Distance-proportional fare: `base + per_second * direct_travel_time`,
/// rounded to cents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FareRule {
    pub base: f64,
    pub per_second: f64,
}

impl Default for FareRule {
    fn default() -> Self {
        Self {
            base: 2.5,
            per_second: 0.008,
        }
    }
}

impl FareRule {
    pub fn fare(&self, direct: Seconds) -> f64 {
        let raw = self.base + self.per_second * direct as f64;
        (raw * 100.0).round() / 100.0
    }
}

/// Samples a request stream: Poisson arrival counts per epoch, endpoints
/// uniform over ordered pairs of distinct nodes with a path between them.
///
/// Output is a pure function of the arguments. Request ids are assigned
/// sequentially from 0 in arrival order.
pub fn generate_synthetic(
    net: &RoadNetwork,
    horizon_epochs: u32,
    rate_profile: &[f64],
    fare_rule: &FareRule,
    seed: u64,
) -> Result<RequestStream, DemandError> {
    if rate_profile.len() != horizon_epochs as usize {
        return Err(DemandError::ProfileLength {
            got: rate_profile.len(),
            horizon: horizon_epochs,
        });
    }
    if let Some(epoch) = rate_profile.iter().position(|r| !r.is_finite() || *r < 0.0) {
        return Err(DemandError::InvalidRate { epoch });
    }
    let nodes = net.nodes();
    let has_pair = nodes
        .iter()
        .any(|a| nodes.iter().any(|b| a.id != b.id && net.tt(a.id, b.id).is_some()));
    if !has_pair {
        return Err(DemandError::EmptyNetwork);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut requests = Vec::new();
    for (epoch, &rate) in rate_profile.iter().enumerate() {
        let count = if rate > 0.0 {
            Poisson::new(rate).expect("positive finite rate").sample(&mut rng) as u64
        } else {
            0
        };
        for _ in 0..count {
            // Rejection sampling keeps the draw uniform over valid pairs.
            let (pickup, dropoff, direct) = loop {
                let a = nodes[rng.random_range(0..nodes.len())].id;
                let b = nodes[rng.random_range(0..nodes.len())].id;
                if a == b {
                    continue;
                }
                if let Some(t) = net.tt(a, b) {
                    break (a, b, t);
                }
            };
            requests.push(Request {
                id: RequestId(requests.len() as u64),
                pickup,
                dropoff,
                arrival_epoch: epoch as Epoch,
                fare: fare_rule.fare(direct),
            });
        }
    }
    RequestStream::new(requests)
}
