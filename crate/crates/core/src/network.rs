//! Directed road graph with integer-second edge costs.
//!
//! Shortest-path trees are computed on demand, one Dijkstra search per source
//! node, and kept for the lifetime of the network. The network itself never
//! changes after construction, so cached trees stay valid and can be shared
//! between threads.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;
use thiserror::Error;

use crate::ids::{NodeId, Seconds};
use crate::table::read_rows;

const UNREACHABLE: Seconds = Seconds::MAX;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{file} line {line}: malformed row: {message}")]
    Malformed {
        file: &'static str,
        line: u64,
        message: String,
    },
    #[error("nodes line {line}: duplicate node_id {node}")]
    DuplicateNode { line: u64, node: NodeId },
    #[error("edges line {line}: cost must be a positive number of seconds, got {cost}")]
    NonPositiveCost { line: u64, cost: i64 },
    #[error("edges line {line}: edge references unknown node {node}")]
    DanglingEdge { line: u64, node: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no path from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub cost: Seconds,
}

/// Maps external node ids to dense indices. Nodes are stored sorted by id, so
/// index order and id order agree.
#[derive(Debug)]
enum IdIndex {
    /// Ids form the contiguous range `first..first + n`.
    Dense {
        first: u64,
    },
    Sorted,
}

pub struct RoadNetwork {
    nodes: Vec<Node>,
    index: IdIndex,
    /// Outgoing arcs per node, sorted by target index.
    out: Vec<Vec<(u32, Seconds)>>,
    /// Incoming arcs per node, sorted by source index.
    inc: Vec<Vec<(u32, Seconds)>>,
    edge_count: usize,
    trees: Vec<OnceLock<Box<[Seconds]>>>,
}

impl fmt::Debug for RoadNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RoadNetwork")
            .field("nodes", &self.nodes.len())
            .field("edges", &self.edge_count)
            .finish()
    }
}

#[derive(Deserialize)]
struct NodeRow {
    node_id: u64,
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct EdgeRow {
    from: u64,
    to: u64,
    cost_seconds: i64,
}

/// Loads a network from the `node_id,lat,lon` and `from,to,cost_seconds`
/// tables.
pub fn load_network(nodes: impl Read, edges: impl Read) -> Result<RoadNetwork, NetworkError> {
    let node_rows = read_rows::<NodeRow>(nodes).map_err(|e| NetworkError::Malformed {
        file: "nodes",
        line: e.line,
        message: e.message,
    })?;
    let mut seen = std::collections::HashSet::with_capacity(node_rows.len());
    let mut node_list = Vec::with_capacity(node_rows.len());
    for (line, row) in node_rows {
        if !row.lat.is_finite() || !row.lon.is_finite() {
            return Err(NetworkError::Malformed {
                file: "nodes",
                line,
                message: "coordinates must be finite".into(),
            });
        }
        if !seen.insert(NodeId(row.node_id)) {
            return Err(NetworkError::DuplicateNode {
                line,
                node: NodeId(row.node_id),
            });
        }
        node_list.push(Node {
            id: NodeId(row.node_id),
            lat: row.lat,
            lon: row.lon,
        });
    }

    let edge_rows = read_rows::<EdgeRow>(edges).map_err(|e| NetworkError::Malformed {
        file: "edges",
        line: e.line,
        message: e.message,
    })?;
    let mut edge_list = Vec::with_capacity(edge_rows.len());
    for (line, row) in edge_rows {
        if row.cost_seconds <= 0 {
            return Err(NetworkError::NonPositiveCost {
                line,
                cost: row.cost_seconds,
            });
        }
        for id in [row.from, row.to] {
            if !seen.contains(&NodeId(id)) {
                return Err(NetworkError::DanglingEdge { line, node: NodeId(id) });
            }
        }
        edge_list.push(Edge {
            from: NodeId(row.from),
            to: NodeId(row.to),
            cost: row.cost_seconds as Seconds,
        });
    }

    RoadNetwork::new(node_list, edge_list)
}

/// File-path convenience wrapper around [`load_network`].
pub fn load_network_files(nodes: impl AsRef<Path>, edges: impl AsRef<Path>) -> Result<RoadNetwork, NetworkError> {
    let open = |p: &Path| {
        std::fs::File::open(p).map_err(|source| NetworkError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    load_network(open(nodes.as_ref())?, open(edges.as_ref())?)
}

impl RoadNetwork {
    /// Builds a validated network. Duplicate node ids, dangling edge
    /// endpoints and zero costs are rejected; line numbers in errors are 0
    /// because there is no source table.
    pub fn new(mut nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        nodes.sort_by_key(|n| n.id);
        if let Some(w) = nodes.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(NetworkError::DuplicateNode { line: 0, node: w[0].id });
        }
        let index = match (nodes.first(), nodes.last()) {
            (Some(first), Some(last)) if last.id.0 - first.id.0 + 1 == nodes.len() as u64 => {
                IdIndex::Dense { first: first.id.0 }
            }
            (None, _) => IdIndex::Dense { first: 0 },
            _ => IdIndex::Sorted,
        };
        let mut net = RoadNetwork {
            out: vec![Vec::new(); nodes.len()],
            inc: vec![Vec::new(); nodes.len()],
            trees: (0..nodes.len()).map(|_| OnceLock::new()).collect(),
            nodes,
            index,
            edge_count: edges.len(),
        };
        for e in &edges {
            if e.cost == 0 {
                return Err(NetworkError::NonPositiveCost { line: 0, cost: 0 });
            }
            let from = net
                .ix(e.from)
                .ok_or(NetworkError::DanglingEdge { line: 0, node: e.from })?;
            let to = net.ix(e.to).ok_or(NetworkError::DanglingEdge { line: 0, node: e.to })?;
            net.out[from].push((to as u32, e.cost));
            net.inc[to].push((from as u32, e.cost));
        }
        for adj in net.out.iter_mut().chain(net.inc.iter_mut()) {
            adj.sort_unstable();
        }
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.ix(id).map(|i| &self.nodes[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.ix(id).is_some()
    }

    /// All directed edges, ordered by (from, to, cost).
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out.iter().enumerate().flat_map(move |(i, adj)| {
            adj.iter().map(move |&(j, cost)| Edge {
                from: self.nodes[i].id,
                to: self.nodes[j as usize].id,
                cost,
            })
        })
    }

    /// Cheapest direct edge `from -> to`, if one exists.
    pub fn edge_cost(&self, from: NodeId, to: NodeId) -> Option<Seconds> {
        let (a, b) = (self.ix(from)?, self.ix(to)? as u32);
        self.out[a].iter().filter(|&&(j, _)| j == b).map(|&(_, c)| c).min()
    }

    fn ix(&self, id: NodeId) -> Option<usize> {
        match self.index {
            IdIndex::Dense { first } => {
                let i = id.0.checked_sub(first)? as usize;
                (i < self.nodes.len()).then_some(i)
            }
            IdIndex::Sorted => self.nodes.binary_search_by_key(&id, |n| n.id).ok(),
        }
    }

    fn tree(&self, source: usize) -> &[Seconds] {
        self.trees[source].get_or_init(|| self.dijkstra(source))
    }

    fn dijkstra(&self, source: usize) -> Box<[Seconds]> {
        let mut dist = vec![UNREACHABLE; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0;
        heap.push(Reverse((0, source as u32)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for &(v, cost) in &self.out[u as usize] {
                let nd = d + cost;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist.into_boxed_slice()
    }

    /// Minimum travel time from `from` to `to`; `Ok(None)` when `to` cannot be
    /// reached.
    pub fn travel_time(&self, from: NodeId, to: NodeId) -> Result<Option<Seconds>, NetworkError> {
        let a = self.ix(from).ok_or(NetworkError::UnknownNode(from))?;
        let b = self.ix(to).ok_or(NetworkError::UnknownNode(to))?;
        let d = self.tree(a)[b];
        Ok((d != UNREACHABLE).then_some(d))
    }

    /// Same as [`travel_time`](Self::travel_time) but folds unknown nodes into
    /// `None`. Used on hot paths where nodes were validated upstream.
    pub fn tt(&self, from: NodeId, to: NodeId) -> Option<Seconds> {
        let (a, b) = (self.ix(from)?, self.ix(to)?);
        let d = self.tree(a)[b];
        (d != UNREACHABLE).then_some(d)
    }

    /// Minimum-cost path from `from` to `to` (both inclusive). Among equal-cost
    /// paths the lexicographically smallest node sequence is returned.
    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>, NetworkError> {
        let a = self.ix(from).ok_or(NetworkError::UnknownNode(from))?;
        let b = self.ix(to).ok_or(NetworkError::UnknownNode(to))?;
        let dist = self.tree(a);
        if dist[b] == UNREACHABLE {
            return Err(NetworkError::Unreachable { from, to });
        }
        // Mark nodes that reach `to` over tight edges (edges lying on some
        // shortest path from `from`), then walk forward taking the smallest
        // tight successor each step.
        let mut reaches = vec![false; self.nodes.len()];
        reaches[b] = true;
        let mut stack = vec![b];
        while let Some(v) = stack.pop() {
            for &(u, cost) in &self.inc[v] {
                let u = u as usize;
                if !reaches[u] && dist[u] != UNREACHABLE && dist[u] + cost == dist[v] {
                    reaches[u] = true;
                    stack.push(u);
                }
            }
        }
        let mut path = vec![self.nodes[a].id];
        let mut cur = a;
        while cur != b {
            let next = self.out[cur]
                .iter()
                .find(|&&(v, cost)| reaches[v as usize] && dist[cur] + cost == dist[v as usize])
                .map(|&(v, _)| v as usize)
                .expect("tight successor exists on a reachable shortest path");
            path.push(self.nodes[next].id);
            cur = next;
        }
        Ok(path)
    }
}

/// Writes the nodes table in the ingestion format.
pub fn write_nodes_csv(net: &RoadNetwork, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "lat", "lon"])?;
    for n in net.nodes() {
        w.write_record([n.id.to_string(), n.lat.to_string(), n.lon.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the edges table in the ingestion format.
pub fn write_edges_csv(net: &RoadNetwork, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["from", "to", "cost_seconds"])?;
    for e in net.edges() {
        w.write_record([e.from.to_string(), e.to.to_string(), e.cost.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// A `rows x cols` grid with two-way edges between 4-neighbours. Node ids are
/// `row * cols + col`; coordinates sit on a 0.005-degree lattice.
pub fn grid_network(rows: u32, cols: u32, mut cost: impl FnMut(NodeId, NodeId) -> Seconds) -> RoadNetwork {
    let id = |r: u32, c: u32| NodeId(u64::from(r) * u64::from(cols) + u64::from(c));
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(Node {
                id: id(r, c),
                lat: 40.70 + 0.005 * f64::from(r),
                lon: -74.02 + 0.005 * f64::from(c),
            });
            let mut link = |a: NodeId, b: NodeId| {
                edges.push(Edge {
                    from: a,
                    to: b,
                    cost: cost(a, b),
                });
                edges.push(Edge {
                    from: b,
                    to: a,
                    cost: cost(b, a),
                });
            };
            if c + 1 < cols {
                link(id(r, c), id(r, c + 1));
            }
            if r + 1 < rows {
                link(id(r, c), id(r + 1, c));
            }
        }
    }
    RoadNetwork::new(nodes, edges).expect("grid construction is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph() -> RoadNetwork {
        load_network(
            "node_id,lat,lon\n1,0,0\n2,0,1\n3,0,2\n".as_bytes(),
            "from,to,cost_seconds\n1,2,60\n2,3,120\n".as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn minimal_network_loads() {
        let net = load_network(
            "node_id,lat,lon\n1,40.7,-74.0\n2,40.8,-74.0\n".as_bytes(),
            "from,to,cost_seconds\n1,2,60\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn dangling_edge_is_rejected_with_line() {
        let err = load_network(
            "node_id,lat,lon\n1,0,0\n2,0,1\n".as_bytes(),
            "from,to,cost_seconds\n1,2,60\n2,99,60\n".as_bytes(),
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                NetworkError::DanglingEdge {
                    line: 3,
                    node: NodeId(99)
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn zero_and_negative_costs_are_rejected() {
        for cost in ["0", "-5"] {
            let edges = format!("from,to,cost_seconds\n1,2,{cost}\n");
            let err = load_network("node_id,lat,lon\n1,0,0\n2,0,1\n".as_bytes(), edges.as_bytes()).unwrap_err();
            assert!(matches!(err, NetworkError::NonPositiveCost { line: 2, .. }), "{err}");
        }
    }

    #[test]
    fn duplicate_node_and_malformed_rows() {
        let err = load_network(
            "node_id,lat,lon\n1,0,0\n1,0,1\n".as_bytes(),
            "from,to,cost_seconds\n".as_bytes(),
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::DuplicateNode { line: 3, .. }), "{err}");

        let err = load_network(
            "node_id,lat,lon\n1,0,0\n2,zero,1\n".as_bytes(),
            "from,to,cost_seconds\n".as_bytes(),
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                NetworkError::Malformed {
                    file: "nodes",
                    line: 3,
                    ..
                }
            ),
            "{err}"
        );

        let err = load_network(
            "node_id,lat,lon\n1,0,0\n2,0,1\n".as_bytes(),
            "from,to,cost_seconds\n1,2,60.5\n".as_bytes(),
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                NetworkError::Malformed {
                    file: "edges",
                    line: 2,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn travel_time_basics() {
        let net = line_graph();
        assert_eq!(net.travel_time(NodeId(2), NodeId(2)).unwrap(), Some(0));
        assert_eq!(net.travel_time(NodeId(1), NodeId(3)).unwrap(), Some(180));
        assert_eq!(net.travel_time(NodeId(3), NodeId(1)).unwrap(), None);
        assert!(matches!(
            net.travel_time(NodeId(1), NodeId(7)),
            Err(NetworkError::UnknownNode(NodeId(7)))
        ));
    }

    #[test]
    fn isolated_nodes_are_unreachable() {
        let net = RoadNetwork::new(
            vec![
                Node {
                    id: NodeId(10),
                    lat: 0.0,
                    lon: 0.0,
                },
                Node {
                    id: NodeId(20),
                    lat: 0.0,
                    lon: 0.0,
                },
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(net.travel_time(NodeId(10), NodeId(20)).unwrap(), None);
        assert!(matches!(
            net.shortest_path(NodeId(10), NodeId(20)),
            Err(NetworkError::Unreachable { .. })
        ));
    }

    #[test]
    fn shortest_path_line_and_self() {
        let net = line_graph();
        assert_eq!(net.shortest_path(NodeId(3), NodeId(3)).unwrap(), vec![NodeId(3)]);
        assert_eq!(
            net.shortest_path(NodeId(1), NodeId(3)).unwrap(),
            vec![NodeId(1), NodeId(2), NodeId(3)]
        );
    }

    #[test]
    fn diamond_tie_breaks_lexicographically() {
        // Listed so that the larger branch appears first in the input.
        let net = load_network(
            "node_id,lat,lon\n4,0,0\n3,0,0\n2,0,0\n1,0,0\n".as_bytes(),
            "from,to,cost_seconds\n1,3,60\n3,4,60\n1,2,60\n2,4,60\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(
            net.shortest_path(NodeId(1), NodeId(4)).unwrap(),
            vec![NodeId(1), NodeId(2), NodeId(4)]
        );
    }

    #[test]
    fn tie_break_prefers_smaller_prefix_even_when_longer() {
        // 1->5->9 and 1->2->3->9 both cost 120; [1,2,3,9] < [1,5,9].
        let net = load_network(
            "node_id,lat,lon\n1,0,0\n2,0,0\n3,0,0\n5,0,0\n9,0,0\n".as_bytes(),
            "from,to,cost_seconds\n1,5,60\n5,9,60\n1,2,40\n2,3,40\n3,9,40\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(
            net.shortest_path(NodeId(1), NodeId(9)).unwrap(),
            vec![NodeId(1), NodeId(2), NodeId(3), NodeId(9)]
        );
    }

    #[test]
    fn sparse_ids_use_sorted_lookup() {
        let net = load_network(
            "node_id,lat,lon\n1000,0,0\n7,0,0\n42,0,0\n".as_bytes(),
            "from,to,cost_seconds\n7,42,5\n42,1000,5\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(net.tt(NodeId(7), NodeId(1000)), Some(10));
        assert_eq!(net.tt(NodeId(8), NodeId(1000)), None);
        assert_eq!(net.edge_cost(NodeId(7), NodeId(42)), Some(5));
    }

    #[test]
    fn csv_round_trip_of_grid() {
        let net = grid_network(3, 4, |a, b| 30 + (a.0 + b.0) % 7);
        let (mut nodes, mut edges) = (Vec::new(), Vec::new());
        write_nodes_csv(&net, &mut nodes).unwrap();
        write_edges_csv(&net, &mut edges).unwrap();
        let back = load_network(nodes.as_slice(), edges.as_slice()).unwrap();
        assert_eq!(back.nodes(), net.nodes());
        assert_eq!(back.edges().collect::<Vec<_>>(), net.edges().collect::<Vec<_>>());
    }
}
