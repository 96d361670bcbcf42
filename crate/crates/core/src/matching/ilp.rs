//! Exact weighted set packing over candidate groups.
//!
//! Each chosen candidate consumes one taxi and its requests; the objective is
//! the sum of candidate values. Independent components (taxis linked through
//! shared requests) are solved separately by depth-first branch and bound.

use std::collections::BTreeMap;

use crate::ids::{RequestId, TaxiId};
use crate::matching::{Assignment, Candidate, ObjectiveWeights, TaxiAssignment};

/// Solves the batch assignment exactly and returns the chosen plans.
///
/// Among optimal selections the one preferring smaller candidate ids wins:
/// selections are compared at the smallest id where they differ, and the one
/// containing it is kept.
pub fn solve_batch_ilp(candidates: &[Candidate], weights: &ObjectiveWeights) -> Assignment {
    let chosen = select_candidates(candidates, weights);
    let mut matches: Vec<TaxiAssignment> = chosen
        .iter()
        .map(|&i| {
            let c = &candidates[i];
            TaxiAssignment {
                taxi: c.taxi,
                requests: c.group.clone(),
                plan: c.plan.clone(),
                added_detour: c.added_detour,
            }
        })
        .collect();
    matches.sort_by_key(|m| m.taxi);
    Assignment { matches }
}

/// Indices of the optimal candidate selection, ascending.
pub fn select_candidates(candidates: &[Candidate], weights: &ObjectiveWeights) -> Vec<usize> {
    let values: Vec<i64> = candidates.iter().map(|c| c.value(weights)).collect();
    // A non-positive candidate never raises the objective.
    let useful: Vec<usize> = (0..candidates.len()).filter(|&i| values[i] > 0).collect();

    let mut taxi_ix: BTreeMap<TaxiId, usize> = BTreeMap::new();
    let mut request_ix: BTreeMap<RequestId, usize> = BTreeMap::new();
    for &i in &useful {
        let n = taxi_ix.len();
        taxi_ix.entry(candidates[i].taxi).or_insert(n);
        for r in &candidates[i].group {
            let n = request_ix.len();
            request_ix.entry(*r).or_insert(n);
        }
    }
    // Union-find over taxis followed by requests.
    let offset = taxi_ix.len();
    let mut uf = UnionFind::new(offset + request_ix.len());
    for &i in &useful {
        let t = taxi_ix[&candidates[i].taxi];
        for r in &candidates[i].group {
            uf.union(t, offset + request_ix[r]);
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &useful {
        components
            .entry(uf.find(taxi_ix[&candidates[i].taxi]))
            .or_default()
            .push(i);
    }

    let mut chosen = Vec::new();
    for ids in components.values() {
        chosen.extend(solve_component(candidates, &values, ids, &request_ix));
    }
    chosen.sort_unstable();
    chosen
}

fn solve_component(
    candidates: &[Candidate],
    values: &[i64],
    ids: &[usize],
    request_ix: &BTreeMap<RequestId, usize>,
) -> Vec<usize> {
    // Work on positions within `ids`. `ids` ascend and candidates are sorted
    // by taxi, so consecutive runs share a taxi.
    let mut per_taxi: Vec<Vec<usize>> = Vec::new();
    let mut last_taxi = None;
    for (k, &i) in ids.iter().enumerate() {
        if last_taxi != Some(candidates[i].taxi) {
            per_taxi.push(Vec::new());
            last_taxi = Some(candidates[i].taxi);
        }
        per_taxi.last_mut().expect("pushed above").push(k);
    }
    let mut bb = BranchAndBound {
        values: ids.iter().map(|&i| values[i]).collect(),
        members: ids
            .iter()
            .map(|&i| candidates[i].group.iter().map(|r| request_ix[r]).collect())
            .collect(),
        shares: ids
            .iter()
            .map(|&i| {
                let n = candidates[i].group.len() as i64;
                (values[i] + n - 1) / n
            })
            .collect(),
        per_taxi,
        used: vec![false; request_ix.len()],
        best_share: vec![0; request_ix.len()],
        current: Vec::new(),
        best_value: 0,
        best: Vec::new(),
    };
    bb.search(0, 0);
    bb.best.into_iter().map(|k| ids[k]).collect()
}

struct BranchAndBound {
    values: Vec<i64>,
    members: Vec<Vec<usize>>,
    /// `values[c] / |group|` rounded up.
    shares: Vec<i64>,
    per_taxi: Vec<Vec<usize>>,
    used: Vec<bool>,
    best_share: Vec<i64>,
    current: Vec<usize>,
    best_value: i64,
    best: Vec<usize>,
}

impl BranchAndBound {
    fn compatible(&self, c: usize) -> bool {
        self.members[c].iter().all(|&r| !self.used[r])
    }

    /// The smaller of two relaxations: every remaining taxi takes its best
    /// compatible candidate, or every free request earns its best share.
    fn bound(&mut self, from: usize) -> i64 {
        self.best_share.iter_mut().for_each(|s| *s = 0);
        let mut by_taxi = 0;
        for cs in &self.per_taxi[from..] {
            let mut top = 0;
            for &c in cs {
                if !self.members[c].iter().all(|&r| !self.used[r]) {
                    continue;
                }
                top = top.max(self.values[c]);
                for &r in &self.members[c] {
                    self.best_share[r] = self.best_share[r].max(self.shares[c]);
                }
            }
            by_taxi += top;
        }
        by_taxi.min(self.best_share.iter().sum())
    }

    /// Branches per taxi: each of its compatible candidates in id order, then
    /// "no candidate". That order visits selections from most to least
    /// preferred, so only strictly better objectives replace the incumbent.
    fn search(&mut self, taxi: usize, value: i64) {
        if taxi == self.per_taxi.len() {
            if value > self.best_value {
                self.best_value = value;
                self.best = self.current.clone();
            }
            return;
        }
        if value + self.bound(taxi) <= self.best_value {
            return;
        }
        for k in 0..self.per_taxi[taxi].len() {
            let c = self.per_taxi[taxi][k];
            if !self.compatible(c) {
                continue;
            }
            self.set_used(c, true);
            self.current.push(c);
            self.search(taxi + 1, value + self.values[c]);
            self.current.pop();
            self.set_used(c, false);
        }
        self.search(taxi + 1, value);
    }

    fn set_used(&mut self, c: usize, flag: bool) {
        for &r in &self.members[c] {
            self.used[r] = flag;
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut x = x;
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
