use std::collections::{BTreeMap, HashMap};

use fairride_core::network::{load_network, Edge, Node, RoadNetwork};
use fairride_core::testkit::{shortest_times_from, DistanceTable};
use fairride_core::zones::load_zones;
use fairride_core::{NodeId, ZoneId};
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = RoadNetwork> {
    (2usize..50)
        .prop_flat_map(|n| {
            let ids = proptest::collection::btree_set(0u64..500, n);
            let edges = proptest::collection::vec((0..n, 0..n, 1u64..200), 0..n * 4);
            (ids, edges)
        })
        .prop_map(|(ids, edges)| {
            let ids: Vec<u64> = ids.into_iter().collect();
            let nodes = ids
                .iter()
                .map(|&id| Node {
                    id: NodeId(id),
                    lat: id as f64,
                    lon: 0.0,
                })
                .collect();
            let mut seen = HashMap::new();
            for (a, b, c) in edges {
                if a != b {
                    seen.entry((a, b)).or_insert(c);
                }
            }
            let edges = seen
                .into_iter()
                .map(|((a, b), cost)| Edge {
                    from: NodeId(ids[a]),
                    to: NodeId(ids[b]),
                    cost,
                })
                .collect();
            RoadNetwork::new(nodes, edges).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn travel_time_matches_bellman_ford(net in graph_strategy()) {
        let oracle = DistanceTable::new(&net);
        for a in net.nodes() {
            for b in net.nodes() {
                prop_assert_eq!(net.travel_time(a.id, b.id).unwrap(), oracle.get(a.id, b.id));
            }
        }
    }

    #[test]
    fn triangle_inequality(net in graph_strategy()) {
        let ids: Vec<NodeId> = net.nodes().iter().map(|n| n.id).collect();
        for &a in &ids {
            for &b in &ids {
                let Some(ab) = net.tt(a, b) else { continue };
                for &c in &ids {
                    if let (Some(bc), Some(ac)) = (net.tt(b, c), net.tt(a, c)) {
                        prop_assert!(ac <= ab + bc);
                    }
                }
            }
        }
    }

    #[test]
    fn path_cost_equals_travel_time(net in graph_strategy()) {
        for a in net.nodes() {
            let reach = shortest_times_from(&net, a.id);
            for (&b, &t) in &reach {
                let path = net.shortest_path(a.id, b).unwrap();
                prop_assert_eq!(path[0], a.id);
                prop_assert_eq!(*path.last().unwrap(), b);
                let cost: u64 = path.windows(2).map(|w| net.edge_cost(w[0], w[1]).unwrap()).sum();
                prop_assert_eq!(cost, t);
            }
        }
    }

    #[test]
    fn centroids_ignore_row_order(seed in any::<u64>()) {
        let nodes = "node_id,lat,lon\n1,0.5,1\n2,2.25,3\n3,4,0.125\n4,-1,7\n5,3,3\n";
        let net = load_network(nodes.as_bytes(), "from,to,cost_seconds\n".as_bytes()).unwrap();
        let mut rows: Vec<String> = (1..=5).map(|n| format!("{n},{},Z{}", n % 2, n % 2)).collect();
        let base = load_zones(&net, format!("node_id,zone_id,zone_name\n{}\n", rows.join("\n")).as_bytes()).unwrap();
        let mut s = seed;
        for i in (1..rows.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            rows.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = load_zones(&net, format!("node_id,zone_id,zone_name\n{}\n", rows.join("\n")).as_bytes()).unwrap();
        for z in [ZoneId(0), ZoneId(1)] {
            prop_assert_eq!(base.zone(z).unwrap(), shuffled.zone(z).unwrap());
        }
    }
}

/// Every simple path of the line graph, by exhaustive enumeration.
fn all_simple_path_costs(net: &RoadNetwork, from: NodeId, to: NodeId) -> BTreeMap<u64, Vec<Vec<NodeId>>> {
    fn go(net: &RoadNetwork, path: &mut Vec<NodeId>, cost: u64, to: NodeId, out: &mut BTreeMap<u64, Vec<Vec<NodeId>>>) {
        let last = *path.last().unwrap();
        if last == to {
            out.entry(cost).or_default().push(path.clone());
            return;
        }
        for e in net.edges().filter(|e| e.from == last) {
            if !path.contains(&e.to) {
                path.push(e.to);
                go(net, path, cost + e.cost, to, out);
                path.pop();
            }
        }
    }
    let mut out = BTreeMap::new();
    go(net, &mut vec![from], 0, to, &mut out);
    out
}

#[test]
fn line_graph_against_path_enumeration() {
    let net = load_network(
        "node_id,lat,lon\n1,0,0\n2,0,1\n3,0,2\n".as_bytes(),
        "from,to,cost_seconds\n1,2,60\n2,3,120\n".as_bytes(),
    )
    .unwrap();
    let paths = all_simple_path_costs(&net, NodeId(1), NodeId(3));
    let (&best, routes) = paths.iter().next().unwrap();
    assert_eq!(best, 180);
    assert_eq!(net.travel_time(NodeId(1), NodeId(3)).unwrap(), Some(best));
    assert_eq!(
        net.shortest_path(NodeId(1), NodeId(3)).unwrap(),
        routes.iter().min().unwrap().clone()
    );
}

#[test]
fn diamond_paths_against_enumeration() {
    let net = load_network(
        "node_id,lat,lon\n1,0,0\n2,0,1\n3,1,0\n4,1,1\n".as_bytes(),
        "from,to,cost_seconds\n1,3,60\n3,4,60\n1,2,60\n2,4,60\n".as_bytes(),
    )
    .unwrap();
    let paths = all_simple_path_costs(&net, NodeId(1), NodeId(4));
    let routes = &paths[&120];
    assert_eq!(routes.len(), 2);
    assert_eq!(
        net.shortest_path(NodeId(1), NodeId(4)).unwrap(),
        routes.iter().min().unwrap().clone()
    );
    assert_eq!(
        net.shortest_path(NodeId(1), NodeId(4)).unwrap(),
        vec![NodeId(1), NodeId(2), NodeId(4)]
    );
}
