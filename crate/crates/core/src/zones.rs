//! Node-to-zone partition used by every zonal metric.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NodeId, ZoneId};
use crate::network::RoadNetwork;
use crate::table::read_rows;

#[derive(Debug, Error)]
pub enum ZoneError {
    #[error("zones line {line}: malformed row: {message}")]
    Malformed { line: u64, message: String },
    #[error("zones line {line}: node {node} is not in the network")]
    UnknownNode { line: u64, node: NodeId },
    #[error("zones line {line}: node {node} is assigned twice")]
    DuplicateAssignment { line: u64, node: NodeId },
    #[error("zones line {line}: zone {zone} already named {expected:?}")]
    InconsistentName { line: u64, zone: ZoneId, expected: String },
    #[error("node {0} has no zone assignment")]
    MissingAssignment(NodeId),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: ZoneId,
    pub name: String,
    /// Mean of member-node coordinates.
    pub centroid: LatLon,
    /// Member nodes in ascending id order.
    pub members: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct ZonePartition {
    assignment: HashMap<NodeId, ZoneId>,
    zones: BTreeMap<ZoneId, Zone>,
}

#[derive(Deserialize)]
struct ZoneRow {
    node_id: u64,
    zone_id: u32,
    zone_name: String,
}

pub fn load_zones(net: &RoadNetwork, source: impl Read) -> Result<ZonePartition, ZoneError> {
    let rows = read_rows::<ZoneRow>(source).map_err(|e| ZoneError::Malformed {
        line: e.line,
        message: e.message,
    })?;
    let mut names: BTreeMap<ZoneId, String> = BTreeMap::new();
    let mut assignment = HashMap::with_capacity(rows.len());
    for (line, row) in rows {
        let node = NodeId(row.node_id);
        let zone = ZoneId(row.zone_id);
        if !net.contains(node) {
            return Err(ZoneError::UnknownNode { line, node });
        }
        if assignment.insert(node, zone).is_some() {
            return Err(ZoneError::DuplicateAssignment { line, node });
        }
        match names.get(&zone) {
            Some(existing) if *existing != row.zone_name => {
                return Err(ZoneError::InconsistentName {
                    line,
                    zone,
                    expected: existing.clone(),
                })
            }
            Some(_) => {}
            None => {
                names.insert(zone, row.zone_name);
            }
        }
    }
    ZonePartition::build(net, assignment, names)
}

pub fn load_zones_file(net: &RoadNetwork, path: impl AsRef<Path>) -> Result<ZonePartition, ZoneError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| ZoneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_zones(net, file)
}

impl ZonePartition {
    /// Builds a partition from an explicit node→zone map. Zone names default
    /// to `zone-<id>` when absent from `names`.
    pub fn build(
        net: &RoadNetwork,
        assignment: HashMap<NodeId, ZoneId>,
        mut names: BTreeMap<ZoneId, String>,
    ) -> Result<Self, ZoneError> {
        let mut members: BTreeMap<ZoneId, Vec<NodeId>> = BTreeMap::new();
        for node in net.nodes() {
            let zone = assignment.get(&node.id).ok_or(ZoneError::MissingAssignment(node.id))?;
            members.entry(*zone).or_default().push(node.id);
        }
        if let Some(node) = assignment.keys().find(|n| !net.contains(**n)) {
            return Err(ZoneError::UnknownNode { line: 0, node: *node });
        }
        let zones = members
            .into_iter()
            .map(|(id, members)| {
                // net.nodes() is id-sorted, so summation order is fixed
                // regardless of input row order.
                let n = members.len() as f64;
                let (lat, lon) = members.iter().fold((0.0, 0.0), |(la, lo), id| {
                    let node = net.node(*id).expect("member of network");
                    (la + node.lat, lo + node.lon)
                });
                let zone = Zone {
                    id,
                    name: names.remove(&id).unwrap_or_else(|| format!("zone-{id}")),
                    centroid: LatLon {
                        lat: lat / n,
                        lon: lon / n,
                    },
                    members,
                };
                (id, zone)
            })
            .collect();
        Ok(ZonePartition { assignment, zones })
    }

    pub fn zone_of(&self, node: NodeId) -> Option<ZoneId> {
        self.assignment.get(&node).copied()
    }

    pub fn zone(&self, id: ZoneId) -> Option<&Zone> {
        self.zones.get(&id)
    }

    /// Zones in ascending id order.
    pub fn zones(&self) -> impl Iterator<Item = &Zone> {
        self.zones.values()
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }
}

/// Square `block x block` tiles over a grid built by
/// [`grid_network`](crate::network::grid_network).
pub fn grid_zones(net: &RoadNetwork, cols: u32, block: u32) -> ZonePartition {
    let block = block.max(1);
    let zones_per_row = cols.div_ceil(block);
    let assignment = net
        .nodes()
        .iter()
        .map(|n| {
            let (r, c) = ((n.id.0 / u64::from(cols)) as u32, (n.id.0 % u64::from(cols)) as u32);
            (n.id, ZoneId((r / block) * zones_per_row + c / block))
        })
        .collect();
    ZonePartition::build(net, assignment, BTreeMap::new()).expect("grid zones cover every node")
}

/// Writes the partition in the `node_id,zone_id,zone_name` format.
pub fn write_zones_csv(partition: &ZonePartition, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "zone_id", "zone_name"])?;
    for zone in partition.zones() {
        for node in &zone.members {
            w.write_record([node.to_string(), zone.id.to_string(), zone.name.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}
