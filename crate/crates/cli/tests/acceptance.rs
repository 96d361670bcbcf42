//! One check per acceptance criterion. Each prints a PASS or FAIL line; the
//! test fails if any criterion fails.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use fairride_core::demand::{Request, RequestStream};
use fairride_core::matching::{
    generate_candidates, greedy_sequential_match, solve_batch_ilp, validate_assignment, Constraints, MatchContext,
    ObjectiveWeights, PolicyKind,
};
use fairride_core::metrics::{
    completed_boxplots, delay_timeseries, numeric_dashboard, request_timeseries, zonal_fairness, zone_pair_stats,
    zone_pickup_delay, BoxplotBin, DistributionSummary, RunIndex, Window,
};
use fairride_core::network::{grid_network, load_network, load_network_files};
use fairride_core::runlog::{read_runlog, Event, InputDigests, RunHeader, RunLog, RunLogBuilder, RunLogReader};
use fairride_core::simulator::{
    run, run_with_policy, validate_runlog, MovementMode, Placement, SimConfig, TaxiState, ViolationKind,
};
use fairride_core::testkit::{
    brute_force_objective, random_instance, random_scenario, recount, recount_pairs, recount_zonal_fairness,
    sorted_quantile, Instance, Scenario,
};
use fairride_core::zones::{load_zones_file, ZonePartition};
use fairride_core::{Epoch, NodeId, RequestId, TaxiId, ZoneId};

const BIN: &str = env!("CARGO_BIN_EXE_fairride");

fn fairride(args: &[&str]) -> std::process::Output {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "fairride {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn context<'a>(inst: &'a Instance, max_group: u32) -> MatchContext<'a> {
    MatchContext {
        epoch: 1,
        now: inst.now,
        taxis: &inst.taxis,
        batch: &inst.batch,
        constraints: &inst.constraints,
        max_group_size: max_group,
        net: &inst.net,
    }
}

fn ilp_optimality() -> String {
    let started = Instant::now();
    for seed in 0..100 {
        let inst = random_instance(10_000 + seed, 4, 6);
        assert!((2..=4).contains(&inst.constraints.capacity));
        assert!(inst.taxis.len() <= 4 && inst.batch.len() <= 6);
        let w = ObjectiveWeights::for_constraints(&inst.constraints);
        let cands = generate_candidates(&inst.taxis, &inst.batch, inst.now, &inst.constraints, 3, &inst.net);
        let a = solve_batch_ilp(&cands, &w);
        validate_assignment(&context(&inst, 3), &a).unwrap();
        let exhaustive: Vec<_> = cands
            .iter()
            .map(|c| (c.taxi, c.group.clone(), c.added_detour))
            .collect();
        assert_eq!(a.objective(&w), brute_force_objective(&exhaustive, &w), "seed {seed}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "{elapsed:?}");
    format!("100 instances equal exhaustive optimum in {elapsed:.2?}")
}

fn dominance() -> String {
    let mut strict = 0;
    for seed in 0..50 {
        let inst = random_instance(20_000 + seed, 4, 6);
        let w = ObjectiveWeights::for_constraints(&inst.constraints);
        let ilp = solve_batch_ilp(
            &generate_candidates(&inst.taxis, &inst.batch, inst.now, &inst.constraints, 3, &inst.net),
            &w,
        );
        let greedy = greedy_sequential_match(&inst.taxis, &inst.batch, inst.now, &inst.constraints, 3, &inst.net);
        validate_assignment(&context(&inst, 3), &greedy).unwrap();
        assert!(ilp.objective(&w) >= greedy.objective(&w), "seed {seed}");
        strict += usize::from(ilp.objective(&w) > greedy.objective(&w));
    }

    // Greedy hands request 1 to the taxi at node 2, which then cannot reach
    // request 2's pickup in time.
    let net = load_network(
        "node_id,lat,lon\n1,0,0\n2,0,1\n3,0,2\n4,0,3\n".as_bytes(),
        "from,to,cost_seconds\n1,2,60\n2,1,60\n2,3,60\n3,2,60\n3,4,60\n4,3,60\n".as_bytes(),
    )
    .unwrap();
    let c = Constraints {
        capacity: 1,
        max_pickup_delay: 60,
        ..Constraints::default()
    };
    let taxis = [
        TaxiState::new(TaxiId(0), NodeId(2)),
        TaxiState::new(TaxiId(1), NodeId(1)),
    ];
    let req = |id, s, g| Request {
        id: RequestId(id),
        pickup: NodeId(s),
        dropoff: NodeId(g),
        arrival_epoch: 0,
        fare: 1.0,
    };
    let batch = [req(1, 1, 2), req(2, 3, 4)];
    let greedy = greedy_sequential_match(&taxis, &batch, 0, &c, 3, &net);
    let ilp = solve_batch_ilp(
        &generate_candidates(&taxis, &batch, 0, &c, 3, &net),
        &ObjectiveWeights::for_constraints(&c),
    );
    assert_eq!((ilp.matched_count(), greedy.matched_count()), (2, 1));
    format!("ILP >= greedy on 50 instances ({strict} strictly better); fixture 2 vs 1")
}

fn scenario_run(seed: u64, policy: PolicyKind, requests: u32) -> (Scenario, RunLog) {
    let mut s = random_scenario(seed, requests);
    s.config.policy = policy;
    let (log, _) = run(&s.config, InputDigests::default(), &s.net, &s.demand).unwrap();
    (s, log)
}

fn hand_log(events: Vec<Event>) -> RunLog {
    RunLog {
        header: RunHeader::new(SimConfig::default(), InputDigests::default()),
        events,
    }
}

fn arrival(id: u64, pickup: u64, dropoff: u64) -> Event {
    Event::RequestArrived {
        ts: 0,
        request_id: RequestId(id),
        pickup: NodeId(pickup),
        dropoff: NodeId(dropoff),
        arrival_epoch: 0,
        fare: 1.0,
        direct_s: 180,
    }
}

fn constraint_soundness() -> String {
    let mut configs = 0;
    for seed in 0..12 {
        for policy in [PolicyKind::Rpd, PolicyKind::Greedy] {
            let (s, log) = scenario_run(seed, policy, 120);
            let report = validate_runlog(&log, &s.net, &s.config.constraints);
            assert!(
                report.is_clean(),
                "seed {seed} {policy}: {:?}",
                report.violations.first()
            );
            configs += 1;
        }
    }

    let line = load_network(
        "node_id,lat,lon\n1,0,0\n2,0,1\n3,0,2\n".as_bytes(),
        "from,to,cost_seconds\n1,2,60\n2,3,120\n2,1,60\n3,2,120\n".as_bytes(),
    )
    .unwrap();
    let matched = |id| Event::Matched {
        ts: 0,
        request_id: RequestId(id),
        taxi_id: TaxiId(0),
        epoch: 0,
    };
    let pickup = |ts, id| Event::Pickup {
        ts,
        request_id: RequestId(id),
        taxi_id: TaxiId(0),
    };
    let dropoff = |ts, id| Event::Dropoff {
        ts,
        request_id: RequestId(id),
        taxi_id: TaxiId(0),
    };
    let c = Constraints::default();

    let early_drop = hand_log(vec![arrival(1, 1, 3), matched(1), dropoff(180, 1)]);
    let r = validate_runlog(&early_drop, &line, &c);
    assert_eq!(
        (r.count(ViolationKind::DropoffWithoutPickup), r.violations.len()),
        (1, 1)
    );

    let mut crowd: Vec<Event> = (1..=5).map(|i| arrival(i, 1, 3)).collect();
    crowd.extend((1..=5).map(matched));
    crowd.extend((1..=5).map(|i| pickup(0, i)));
    let r = validate_runlog(&hand_log(crowd), &line, &c);
    assert_eq!((r.count(ViolationKind::Capacity), r.violations.len()), (1, 1));

    let late = hand_log(vec![arrival(1, 2, 3), matched(1), pickup(360, 1), dropoff(480, 1)]);
    let r = validate_runlog(&late, &line, &c);
    assert_eq!((r.count(ViolationKind::PickupDelay), r.violations.len()), (1, 1));

    format!("{configs} engine configurations clean; 3 fixtures flagged")
}

fn fairness_recount() -> String {
    let mut checked = 0;
    for seed in 0..10 {
        let policy = if seed % 2 == 0 {
            PolicyKind::Rpd
        } else {
            PolicyKind::Greedy
        };
        let (s, log) = scenario_run(seed, policy, 200);
        let index = RunIndex::from_log(&log);
        let h = s.config.horizon_epochs;
        for w in [
            Window::day(h),
            Window::new(0, 1),
            Window::new(h / 2, 5),
            Window::new(h - 1, 1),
            Window::new(h / 3, h),
        ] {
            let lib = zonal_fairness(&index, &s.zones, w);
            let oracle = recount_zonal_fairness(&log, &s.zones, w);
            match (lib, oracle) {
                (None, None) => {}
                (Some(f), Some((m, n))) => {
                    assert_eq!(
                        u128::from(f.matched) * u128::from(n),
                        u128::from(m) * u128::from(f.incoming)
                    );
                    assert_eq!(f.value, f.matched as f64 / f.incoming as f64);
                }
                other => panic!("seed {seed} {w:?}: {other:?}"),
            }
            checked += 1;
        }
    }

    let net = grid_network(2, 2, |_, _| 60);
    let assignment = [(0, 0), (1, 0), (2, 1), (3, 1)]
        .into_iter()
        .map(|(n, z)| (NodeId(n), ZoneId(z)))
        .collect();
    let zones = ZonePartition::build(&net, assignment, BTreeMap::new()).unwrap();
    let trip = |id: u64, pickup: u64, dropoff: u64| Event::RequestArrived {
        ts: 0,
        request_id: RequestId(id),
        pickup: NodeId(pickup),
        dropoff: NodeId(dropoff),
        arrival_epoch: 0,
        fare: 1.0,
        direct_s: 60,
    };
    let m = |id: u64| Event::Matched {
        ts: 0,
        request_id: RequestId(id),
        taxi_id: TaxiId(id as u32),
        epoch: 0,
    };
    let header = |n| {
        RunHeader::new(
            SimConfig {
                n_taxis: n,
                horizon_epochs: 5,
                ..SimConfig::default()
            },
            InputDigests::default(),
        )
    };
    let all = RunLog {
        header: header(2),
        events: vec![trip(0, 0, 2), trip(1, 2, 0), m(0), m(1)],
    };
    let starved = RunLog {
        header: header(2),
        events: vec![
            trip(0, 0, 2),
            trip(1, 2, 0),
            m(0),
            Event::UnmatchedFinal {
                ts: 300,
                request_id: RequestId(1),
                epoch: 4,
            },
        ],
    };
    let value = |log: &RunLog| {
        zonal_fairness(&RunIndex::from_log(log), &zones, Window::day(5))
            .unwrap()
            .value
    };
    assert_eq!(value(&all), 1.0);
    assert_eq!(value(&starved), 0.0);
    format!("{checked} windows equal the recount exactly; boundaries 1.0 and 0.0")
}

fn summary_equals_oracle(s: &DistributionSummary, values: &[f64]) {
    assert_eq!(s.count, values.len() as u64);
    let Some(st) = s.stats else {
        assert!(values.is_empty());
        return;
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!((st.min, st.max), (sorted[0], sorted[sorted.len() - 1]));
    for (got, p) in [
        (st.p10, 0.1),
        (st.p25, 0.25),
        (st.median, 0.5),
        (st.p75, 0.75),
        (st.p90, 0.9),
    ] {
        assert_eq!(got, sorted_quantile(values, p), "p{p}");
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    assert!((st.mean - mean).abs() <= 1e-9 * mean.abs().max(1.0));
}

fn metric_equivalence() -> String {
    for seed in 0..10 {
        let policy = if seed % 2 == 0 {
            PolicyKind::Rpd
        } else {
            PolicyKind::Greedy
        };
        let (s, log) = scenario_run(seed, policy, 200);
        let index = RunIndex::from_log(&log);
        let raw = recount(&log);
        let dt = s.config.constraints.epoch_length;
        let h = s.config.horizon_epochs;
        let pickup_delay = |r: &fairride_core::testkit::Recount| r.picked.unwrap() - u64::from(r.arrival_epoch) * dt;
        let detour =
            |r: &fairride_core::testkit::Recount| (r.dropped.unwrap() - r.picked.unwrap()).saturating_sub(r.direct);

        for w in [Window::day(h), Window::new(h / 2, 7), Window::new(0, 1)] {
            let pairs: BTreeMap<_, _> = zone_pair_stats(&index, &s.zones, w)
                .pairs
                .iter()
                .map(|(k, p)| (*k, (p.incoming, p.matched, p.completed, p.detour_sum_s)))
                .collect();
            assert_eq!(pairs, recount_pairs(&log, &s.zones, w));

            let mut delays: BTreeMap<ZoneId, (u64, u64)> = BTreeMap::new();
            for r in raw
                .values()
                .filter(|r| w.contains(r.arrival_epoch) && r.taxi.is_some() && r.picked.is_some())
            {
                let e = delays.entry(s.zones.zone_of(r.pickup).unwrap()).or_default();
                e.0 += pickup_delay(r);
                e.1 += 1;
            }
            let lib = zone_pickup_delay(&index, &s.zones, w);
            assert_eq!(lib.len(), delays.len());
            for (z, (sum, n)) in delays {
                assert_eq!((lib[&z].count, lib[&z].mean_s), (n, sum as f64 / n as f64));
            }
        }

        let series = request_timeseries(&index);
        assert_eq!(series.len(), h as usize);
        for c in &series {
            let cohort: Vec<_> = raw.values().filter(|r| r.arrival_epoch == c.epoch).collect();
            let matched = cohort.iter().filter(|r| r.taxi.is_some()).count() as u64;
            let unmatched = cohort.iter().filter(|r| r.unmatched).count() as u64;
            assert_eq!(
                (c.total, c.matched, c.unmatched),
                (cohort.len() as u64, matched, unmatched)
            );
            assert_eq!(c.pending, c.total - matched - unmatched);
        }
        let delays = delay_timeseries(&index);
        let done: Vec<_> = raw.values().filter(|r| r.dropped.is_some()).collect();
        assert_eq!(delays.completed, done.len() as u64);
        for p in &delays.points {
            let cohort: Vec<_> = done.iter().filter(|r| r.arrival_epoch == p.epoch).collect();
            let n = cohort.len() as f64;
            assert_eq!(p.completed, cohort.len() as u64);
            assert_eq!(
                p.mean_pickup_s,
                cohort.iter().map(|r| pickup_delay(r)).sum::<u64>() as f64 / n
            );
            assert_eq!(
                p.mean_detour_s,
                cohort.iter().map(|r| detour(r)).sum::<u64>() as f64 / n
            );
        }

        for bin in [BoxplotBin::Hour, BoxplotBin::Day] {
            let len = bin.seconds();
            let boxes = completed_boxplots(&index, bin);
            let mut counts = vec![vec![0f64; s.config.n_taxis as usize]; boxes.len()];
            for r in &done {
                let stop_epoch = (r.dropped.unwrap() - 1) / dt;
                let b = ((stop_epoch * dt / len) as usize).min(boxes.len() - 1);
                counts[b][r.taxi.unwrap().0 as usize] += 1.0;
            }
            for (got, want) in boxes.iter().zip(&counts) {
                summary_equals_oracle(&got.summary, want);
            }
        }

        let report = numeric_dashboard(&index, &s.zones);
        let mut per_taxi = vec![0f64; s.config.n_taxis as usize];
        for r in &done {
            per_taxi[r.taxi.unwrap().0 as usize] += 1.0;
        }
        summary_equals_oracle(&report.completed_per_driver, &per_taxi);
        let mut per_epoch: BTreeMap<Epoch, (u64, u64)> = BTreeMap::new();
        for r in raw.values() {
            let e = per_epoch.entry(r.arrival_epoch).or_default();
            e.0 += 1;
            e.1 += u64::from(r.taxi.is_some());
        }
        let ratios: Vec<f64> = per_epoch.values().map(|(n, m)| *m as f64 / *n as f64).collect();
        summary_equals_oracle(&report.acceptance_per_epoch, &ratios);
        let pair_ratios: Vec<f64> = recount_pairs(&log, &s.zones, Window::day(h))
            .values()
            .map(|p| p.1 as f64 / p.0 as f64)
            .collect();
        summary_equals_oracle(&report.interzone_acceptance, &pair_ratios);
        let pickups: Vec<f64> = done.iter().map(|r| pickup_delay(r) as f64).collect();
        let detours: Vec<f64> = done.iter().map(|r| detour(r) as f64).collect();
        summary_equals_oracle(&report.pickup_delay_s, &pickups);
        summary_equals_oracle(&report.detour_delay_s, &detours);
    }
    "dashboard, zone pairs, zone delay, both series and box plots equal recounts on 10 logs".to_string()
}

fn determinism(dir: &Path) -> String {
    let grid = dir.join("det");
    fairride(&["generate-grid", "--rows", "5", "--cols", "5", "--out-dir", arg(&grid)]);
    let (nodes, edges, zones) = (grid.join("nodes.csv"), grid.join("edges.csv"), grid.join("zones.csv"));
    let mut runs = 0;
    for seed in 1..=5u32 {
        for policy in ["rpd", "greedy"] {
            let mut bytes = Vec::new();
            for attempt in 0..2 {
                let out = grid.join(format!("{policy}-{seed}-{attempt}.log"));
                let seed = seed.to_string();
                fairride(&[
                    "simulate",
                    "--nodes",
                    arg(&nodes),
                    "--edges",
                    arg(&edges),
                    "--zones",
                    arg(&zones),
                    "--synthetic",
                    "--rate",
                    "4",
                    "--horizon",
                    "60",
                    "--taxis",
                    "12",
                    "--policy",
                    policy,
                    "--seed",
                    &seed,
                    "--out",
                    arg(&out),
                ]);
                bytes.push(std::fs::read(&out).unwrap());
            }
            assert!(!bytes[0].is_empty());
            assert!(bytes[0] == bytes[1], "{policy} seed {seed} differs");
            runs += 1;
        }
    }
    format!("{runs} seed/policy pairs byte-identical across two runs")
}

/// Taxis with work during epoch `e` whose state at `e + 1` is unchanged.
fn stuck(log: &RunLog) -> usize {
    let dt = log.header.config.constraints.epoch_length;
    let index = RunIndex::from_log(log);
    let mut pos = BTreeMap::new();
    for e in &log.events {
        if let Event::Position {
            taxi_id,
            epoch,
            node,
            toward,
            progress_s,
            ..
        } = *e
        {
            pos.insert((taxi_id, epoch), (node, toward, progress_s));
        }
    }
    pos.iter()
        .filter(|((taxi, e), here)| {
            let busy = index.requests.iter().any(|r| {
                matches!(r.matched, Some((t, m)) if t == *taxi && m <= *e)
                    && r.dropoff_ts.is_none_or(|d| d > u64::from(*e) * dt)
            });
            busy && pos.get(&(*taxi, e + 1)) == Some(here)
        })
        .count()
}

fn long_edge_log(movement: MovementMode) -> RunLog {
    let net = grid_network(4, 4, |_, _| 90);
    let requests = (0..12)
        .map(|i| Request {
            id: RequestId(i),
            pickup: NodeId(i % 16),
            dropoff: NodeId(15 - i % 16),
            arrival_epoch: (i / 3) as u32,
            fare: 5.0,
        })
        .collect();
    let config = SimConfig {
        horizon_epochs: 40,
        n_taxis: 4,
        placement: Placement::Fixed(vec![NodeId(0), NodeId(5), NodeId(10), NodeId(15)]),
        constraints: Constraints {
            max_pickup_delay: 600,
            max_detour_delay: 900,
            ..Constraints::default()
        },
        movement,
        ..SimConfig::default()
    };
    let policy = config.policy.build(config.weights);
    let mut sink = RunLogBuilder::new();
    let demand = RequestStream::new(requests).unwrap();
    // The snapping mode breaks plan timing, so its run may abort part way.
    let _ = run_with_policy(
        &config,
        InputDigests::default(),
        &net,
        &demand,
        policy.as_ref(),
        &mut sink,
    );
    sink.finish().unwrap()
}

fn stuck_taxi_regression() -> String {
    let good = long_edge_log(MovementMode::Continuous);
    assert!(good.events.iter().any(|e| matches!(e, Event::Dropoff { .. })));
    assert_eq!(stuck(&good), 0);
    let bad = stuck(&long_edge_log(MovementMode::SnapToNode));
    assert!(bad > 0);
    format!("continuous movement never stalls; snap-to-node stalls {bad} taxi-epochs")
}

fn http_get(addr: &str, path: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(
        stream,
        "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status = response[9..12].parse().unwrap();
    let body = response
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

fn scale(dir: &Path) -> String {
    let grid = dir.join("scale");
    fairride(&[
        "generate-grid",
        "--rows",
        "40",
        "--cols",
        "40",
        "--zone-block",
        "8",
        "--out-dir",
        arg(&grid),
    ]);
    let (nodes, edges, zones) = (grid.join("nodes.csv"), grid.join("edges.csv"), grid.join("zones.csv"));
    let log = grid.join("scale.log");
    let report = grid.join("scale.json");

    let started = Instant::now();
    fairride(&[
        "simulate",
        "--nodes",
        arg(&nodes),
        "--edges",
        arg(&edges),
        "--zones",
        arg(&zones),
        "--synthetic",
        "--rate",
        "80",
        "--taxis",
        "1000",
        "--horizon",
        "1440",
        "--policy",
        "greedy",
        "--seed",
        "3",
        "--out",
        arg(&log),
    ]);
    fairride(&["report", "--log", arg(&log), "--out", arg(&report)]);
    let pipeline = started.elapsed();
    assert!(pipeline < Duration::from_secs(600), "{pipeline:?}");

    let parsed: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let arrivals = parsed["run"]["arrivals"].as_u64().unwrap();
    assert!(arrivals >= 100_000, "{arrivals} arrivals");
    assert_eq!(parsed["run"]["n_taxis"], 1000);
    assert_eq!(parsed["run"]["horizon_epochs"], 1440);

    let mut server = Command::new(BIN)
        .args(["serve", "--runs", arg(&log), "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line.trim().rsplit("http://").next().unwrap().to_string();
    let queries = [
        "/runs".to_string(),
        "/runs/scale".to_string(),
        "/runs/scale/taxis?epoch=720&window=60".to_string(),
        "/runs/scale/taxis?epoch=1439&window=1440&taxi=17".to_string(),
        "/runs/scale/requests?epoch=900&filter=all&dropoffs=true".to_string(),
        "/runs/scale/requests?epoch=900&filter=unmatched".to_string(),
        "/runs/scale/zones/flows?epoch=1439&window=1440&metric=acceptance".to_string(),
        "/runs/scale/zones/flows?epoch=700&window=30&metric=detour".to_string(),
        "/runs/scale/zones/choropleth?epoch=1000&window=120".to_string(),
        "/runs/scale/timeseries/requests".to_string(),
        "/runs/scale/timeseries/delays".to_string(),
        "/runs/scale/timeseries/boxplots?bin=hour".to_string(),
        "/runs/scale/timeseries/boxplots?bin=day".to_string(),
        "/runs/scale/fairness/zonal?window=day".to_string(),
        "/runs/scale/fairness/zonal?epoch=800&window=60".to_string(),
        "/runs/scale/dashboard".to_string(),
    ];
    let mut slowest = Duration::ZERO;
    let mut dashboard = String::new();
    let result = catch_unwind(AssertUnwindSafe(|| {
        for q in &queries {
            let t = Instant::now();
            let (status, body) = http_get(&addr, q);
            let took = t.elapsed();
            assert_eq!(status, 200, "{q}: {body}");
            assert!(took < Duration::from_millis(100), "{q} took {took:?}");
            slowest = slowest.max(took);
            if q.ends_with("dashboard") {
                dashboard = body;
            }
        }
    }));
    let _ = server.kill();
    let _ = server.wait();
    if let Err(e) = result {
        std::panic::resume_unwind(e);
    }
    assert_eq!(dashboard, std::fs::read_to_string(&report).unwrap());
    format!(
        "{arrivals} requests simulated and reported in {pipeline:.1?}; slowest of {} queries {slowest:.1?}",
        queries.len()
    )
}

fn conservation(dir: &Path) -> String {
    let mut runs = 0;
    for seed in 0..12 {
        for policy in [PolicyKind::Rpd, PolicyKind::Greedy] {
            let mut s = random_scenario(seed, 150);
            s.config.policy = policy;
            let (log, summary) = run(&s.config, InputDigests::default(), &s.net, &s.demand).unwrap();
            assert_eq!(
                summary.arrivals,
                summary.matched + summary.unmatched + summary.pending_at_horizon
            );
            let index = RunIndex::from_log(&log);
            let pairs = zone_pair_stats(&index, &s.zones, Window::day(s.config.horizon_epochs));
            assert_eq!(
                (pairs.total_incoming(), pairs.total_matched()),
                (summary.arrivals, summary.matched)
            );
            runs += 1;
        }
    }

    let grid = dir.join("scale");
    let log = grid.join("scale.log");
    if log.exists() {
        let net = load_network_files(grid.join("nodes.csv"), grid.join("edges.csv")).unwrap();
        let zones = load_zones_file(&net, grid.join("zones.csv")).unwrap();
        let reader = RunLogReader::open(&log).unwrap();
        let index = RunIndex::from_events(reader.header().clone(), reader).unwrap();
        let report = numeric_dashboard(&index, &zones);
        let r = &report.run;
        assert_eq!(r.arrivals, r.matched + r.unmatched + r.pending_at_horizon);
        let pairs = zone_pair_stats(&index, &zones, Window::day(index.horizon()));
        assert_eq!(pairs.total_matched(), r.matched);
        runs += 1;
    }
    for entry in std::fs::read_dir(dir.join("det")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "log") {
            let log = read_runlog(&path).unwrap();
            let mut counts = [0u64; 3];
            for e in &log.events {
                match e {
                    Event::RequestArrived { .. } => counts[0] += 1,
                    Event::Matched { .. } => counts[1] += 1,
                    Event::UnmatchedFinal { .. } => counts[2] += 1,
                    _ => {}
                }
            }
            let index = RunIndex::from_log(&log);
            let pending = index
                .requests
                .iter()
                .filter(|r| !r.is_matched() && !r.unmatched)
                .count() as u64;
            assert_eq!(counts[0], counts[1] + counts[2] + pending);
            runs += 1;
        }
    }
    format!("arrivals = matched + unmatched + pending and pair sums agree on {runs} runs")
}

type Criterion<'a> = Box<dyn FnOnce() -> String + 'a>;

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("ILP optimality", Box::new(ilp_optimality)),
        ("Batch-vs-sequential dominance", Box::new(dominance)),
        ("Constraint soundness", Box::new(constraint_soundness)),
        ("Zonal fairness recount", Box::new(fairness_recount)),
        ("Metric-oracle equivalence", Box::new(metric_equivalence)),
        ("Determinism", Box::new(|| determinism(path))),
        ("Stuck-taxi regression", Box::new(stuck_taxi_regression)),
        ("Scale target", Box::new(|| scale(path))),
        ("Conservation", Box::new(|| conservation(path))),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL  {name}: {msg}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
