//! Most-compliant classes as convex-cost flows from blocks to support rows.

pub mod graph;
pub mod matchings;

use std::ops::ControlFlow;

use thiserror::Error;

use crate::compliance::{class_distance, marginal_cost, per_tuple_term, DistanceKind};
use crate::tolerance::tie;
use crate::worlds::{classes_by_enumeration, is_admissible, ClassVector, Support, WorldError};
use graph::Graph;

pub use matchings::{count_perfect_matchings, matchings_instance, random_cubic_bipartite, BipartiteGraph};

pub const DEFAULT_MAX_EMISSIONS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("cannot route one unit per block; the BID is malformed")]
    Infeasible,
    #[error("more than {cap} most-compliant classes")]
    EnumerationBudgetExceeded { cap: u64 },
    #[error("vertex {vertex} has degree {degree}, expected 3")]
    NotThreeRegular { vertex: usize, degree: usize },
    #[error("graph is not bipartite")]
    NotBipartite,
    #[error("bipartition sides differ in size ({left} vs {right})")]
    UnbalancedSides { left: usize, right: usize },
    #[error("edge {0}-{1} is repeated")]
    RepeatedEdge(usize, usize),
    #[error(transparent)]
    Worlds(#[from] WorldError),
}

/// Source, one node per block, one per support row, sink. Sink arcs are
/// expanded into `n_j` unit arcs with marginal costs.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    pub kind: DistanceKind,
    pub n: usize,
    pub m: usize,
    /// (block, support row) pairs, one per BID tuple.
    pub middle: Vec<(usize, usize)>,
    /// `n_j`, the in-degree of row node `j`.
    pub sink_capacity: Vec<u32>,
    /// `Δ_j(q)` for `q = 1..=n_j`.
    pub marginal_costs: Vec<Vec<f64>>,
    /// `Σ_j d_j(0)`.
    pub base_cost: f64,
    pub induced: Vec<f64>,
}

/// An integral flow of value `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolution {
    /// Sink-arc flows.
    pub k: ClassVector,
    /// Row chosen by each block.
    pub assignment: Vec<usize>,
    /// Cost of the arcs used, without `base_cost`.
    pub flow_cost: f64,
    pub distance: f64,
}

pub fn build_network(support: &Support, kind: DistanceKind, induced: &[f64]) -> FlowNetwork {
    let n = support.n();
    let middle = support
        .blocks
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.iter().map(move |&(j, _)| (i, j)))
        .collect();
    let marginal_costs = support
        .multiplicities
        .iter()
        .zip(induced)
        .map(|(&nj, &p)| (1..=nj).map(|q| marginal_cost(kind, q, n, p)).collect())
        .collect();
    let base_cost = induced.iter().map(|&p| per_tuple_term(kind, 0, n, p)).sum();
    FlowNetwork {
        kind,
        n,
        m: support.m(),
        middle,
        sink_capacity: support.multiplicities.clone(),
        marginal_costs,
        base_cost,
        induced: induced.to_vec(),
    }
}

impl FlowNetwork {
    /// Minimum-cost flow with the sink flow of rows `0..prefix.len()` fixed
    /// to the prefix values. Fixed rows drain into a super-sink with capacity
    /// `k_j`; the free rows reach it through `t` with capacity
    /// `n − Σ prefix`, so a flow of value `n` saturates every fixed row.
    pub fn solve(&self, prefix: &[u32]) -> Option<FlowSolution> {
        let fixed: u64 = prefix.iter().map(|&x| x as u64).sum();
        if fixed > self.n as u64 || prefix.len() > self.m {
            return None;
        }
        let (n, m) = (self.n, self.m);
        let s = 0;
        let block = |i: usize| 1 + i;
        let row = |j: usize| 1 + n + j;
        let t = 1 + n + m;
        let super_sink = t + 1;
        let mut g = Graph::new(n + m + 3);
        for i in 0..n {
            g.add_edge(s, block(i), 1, 0.0);
        }
        let middle_ids: Vec<usize> = self.middle.iter().map(|&(i, j)| g.add_edge(block(i), row(j), 1, 0.0)).collect();
        let mut sink_ids: Vec<Vec<usize>> = Vec::with_capacity(m);
        for j in 0..m {
            if j < prefix.len() {
                if prefix[j] > self.sink_capacity[j] {
                    return None;
                }
                sink_ids.push(vec![g.add_edge(row(j), super_sink, prefix[j] as i64, 0.0)]);
            } else {
                sink_ids.push(self.marginal_costs[j].iter().map(|&c| g.add_edge(row(j), t, 1, c)).collect());
            }
        }
        g.add_edge(t, super_sink, n as i64 - fixed as i64, 0.0);
        let flow_cost = g.min_cost_flow(s, super_sink, n as i64)?;
        let k: ClassVector = sink_ids.iter().map(|ids| ids.iter().map(|&e| g.flow(e) as u32).sum()).collect();
        let mut assignment = vec![usize::MAX; n];
        for (&(i, j), &e) in self.middle.iter().zip(&middle_ids) {
            if g.flow(e) > 0 {
                assignment[i] = j;
            }
        }
        let distance = class_distance(self.kind, &k, n, &self.induced);
        Some(FlowSolution { k, assignment, flow_cost, distance })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MccSolution {
    /// Lexicographically smallest most-compliant class.
    pub k: ClassVector,
    pub c_min: f64,
    /// The unconstrained optimal flow.
    pub flow: FlowSolution,
}

pub fn solve_mcc(support: &Support, kind: DistanceKind, induced: &[f64]) -> Result<MccSolution, FlowError> {
    let net = build_network(support, kind, induced);
    let flow = net.solve(&[]).ok_or(FlowError::Infeasible)?;
    let mut first = None;
    let mut e = Enumerator::new(&net, flow.distance, flow.k.clone());
    e.run(&mut |k: &[u32]| {
        first = Some(k.to_vec());
        ControlFlow::Break(())
    });
    let k = first.ok_or(FlowError::Infeasible)?;
    let c_min = class_distance(kind, &k, support.n(), induced);
    Ok(MccSolution { k, c_min, flow })
}

pub fn verify_optimal(support: &Support, kind: DistanceKind, induced: &[f64], k: &[u32], c_min: f64) -> bool {
    is_admissible(support, k) && tie(class_distance(kind, k, support.n(), induced), c_min)
}

/// Work counters of one enumeration run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnumStats {
    pub emitted: u64,
    pub solves: u64,
    /// Largest number of constrained solves before an emission, counted
    /// from the previous emission (or the start).
    pub max_solves_between_emissions: u64,
    /// `m · n_max + 1`.
    pub bound: u64,
}

struct Enumerator<'a> {
    net: &'a FlowNetwork,
    c_min: f64,
    root: ClassVector,
    /// Σ_{j ≥ l} n_j.
    suffix_capacity: Vec<u64>,
    since_emit: u64,
    stats: EnumStats,
}

impl<'a> Enumerator<'a> {
    fn new(net: &'a FlowNetwork, c_min: f64, root: ClassVector) -> Self {
        let mut suffix_capacity = vec![0u64; net.m + 1];
        for j in (0..net.m).rev() {
            suffix_capacity[j] = suffix_capacity[j + 1] + net.sink_capacity[j] as u64;
        }
        let mut block_sizes = vec![0u64; net.n];
        for &(i, _) in &net.middle {
            block_sizes[i] += 1;
        }
        let n_max = block_sizes.into_iter().max().unwrap_or(0);
        let stats = EnumStats { bound: net.m as u64 * n_max + 1, ..EnumStats::default() };
        // The root solve is counted towards the first emission.
        Enumerator { net, c_min, root, suffix_capacity, since_emit: 1, stats: EnumStats { solves: 1, ..stats } }
    }

    fn run(&mut self, emit: &mut dyn FnMut(&[u32]) -> ControlFlow<()>) {
        let root = self.root.clone();
        let _ = self.visit(&mut Vec::with_capacity(self.net.m), root, emit);
    }

    fn check(&mut self, prefix: &[u32]) -> Option<ClassVector> {
        self.stats.solves += 1;
        self.since_emit += 1;
        self.net.solve(prefix).filter(|s| tie(s.distance, self.c_min)).map(|s| s.k)
    }

    /// `witness` is an optimal class whose first `prefix.len()` entries
    /// equal `prefix`. Valid values of the next entry form an interval that
    /// contains `witness[l]`; it is walked down, then up, and each valid
    /// value is expanded in increasing order.
    fn visit(
        &mut self,
        prefix: &mut Vec<u32>,
        witness: ClassVector,
        emit: &mut dyn FnMut(&[u32]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let l = prefix.len();
        if l + 1 >= self.net.m {
            // The last entry is forced by Σk = n.
            if l < self.net.m {
                prefix.push(witness[l]);
            }
            self.stats.emitted += 1;
            self.stats.max_solves_between_emissions = self.stats.max_solves_between_emissions.max(self.since_emit);
            self.since_emit = 0;
            let r = emit(prefix);
            if l < self.net.m {
                prefix.pop();
            }
            return r;
        }
        let rem = self.net.n as u64 - prefix.iter().map(|&x| x as u64).sum::<u64>();
        let lo = rem.saturating_sub(self.suffix_capacity[l + 1]) as u32;
        let hi = (self.net.sink_capacity[l] as u64).min(rem) as u32;
        let start = witness[l];
        let mut below = vec![(start, witness)];
        let mut v = start;
        while v > lo {
            v -= 1;
            prefix.push(v);
            let found = self.check(prefix);
            prefix.pop();
            match found {
                Some(w) => below.push((v, w)),
                None => break,
            }
        }
        for (v, w) in below.into_iter().rev() {
            prefix.push(v);
            let r = self.visit(prefix, w, emit);
            prefix.pop();
            r?;
        }
        let mut v = start + 1;
        while v <= hi {
            prefix.push(v);
            let r = match self.check(prefix) {
                Some(w) => self.visit(prefix, w, emit),
                None => {
                    prefix.pop();
                    break;
                }
            };
            prefix.pop();
            r?;
            v += 1;
        }
        ControlFlow::Continue(())
    }
}

/// Streams every most-compliant class in increasing lexicographic order.
/// `emit` may stop the stream early by returning `Break`.
pub fn enumerate_mcc_with(
    support: &Support,
    kind: DistanceKind,
    induced: &[f64],
    mut emit: impl FnMut(&[u32]) -> ControlFlow<()>,
) -> Result<(f64, EnumStats), FlowError> {
    let net = build_network(support, kind, induced);
    let flow = net.solve(&[]).ok_or(FlowError::Infeasible)?;
    let mut e = Enumerator::new(&net, flow.distance, flow.k.clone());
    e.run(&mut emit);
    Ok((flow.distance, e.stats))
}

/// Collects the enumeration, failing past `cap` classes.
pub fn enumerate_mcc(
    support: &Support,
    kind: DistanceKind,
    induced: &[f64],
    cap: u64,
) -> Result<(Vec<ClassVector>, EnumStats), FlowError> {
    let mut out = Vec::new();
    let mut over = false;
    let (_, stats) = enumerate_mcc_with(support, kind, induced, |k| {
        if out.len() as u64 >= cap {
            over = true;
            return ControlFlow::Break(());
        }
        out.push(k.to_vec());
        ControlFlow::Continue(())
    })?;
    if over {
        return Err(FlowError::EnumerationBudgetExceeded { cap });
    }
    Ok((out, stats))
}

pub fn count_mcc(support: &Support, kind: DistanceKind, induced: &[f64], cap: u64) -> Result<u64, FlowError> {
    let mut count = 0u64;
    let mut over = false;
    enumerate_mcc_with(support, kind, induced, |_| {
        if count >= cap {
            over = true;
            return ControlFlow::Break(());
        }
        count += 1;
        ControlFlow::Continue(())
    })?;
    if over {
        return Err(FlowError::EnumerationBudgetExceeded { cap });
    }
    Ok(count)
}

/// Minimum distance and its argmin set over classes found by world
/// enumeration.
pub fn brute_force_mcc(
    support: &Support,
    kind: DistanceKind,
    induced: &[f64],
    world_cap: u128,
) -> Result<(f64, Vec<ClassVector>), FlowError> {
    let classes = classes_by_enumeration(support, world_cap)?;
    let n = support.n();
    let dists: Vec<f64> = classes.iter().map(|c| class_distance(kind, &c.k, n, induced)).collect();
    let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let argmin = classes.into_iter().zip(&dists).filter(|(_, &d)| tie(d, best)).map(|(c, _)| c.k).collect();
    Ok((best, argmin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worlds::{support_of, Support};

    fn running() -> Support {
        let rows = [["a", "0", "0"], ["a", "1", "0"], ["a", "1", "1"], ["a", "1", "2"]];
        let single = |j: usize| vec![(j, 1.0)];
        let open = || vec![(1, 0.5), (2, 0.25), (3, 0.25)];
        Support {
            rows: rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
            multiplicities: vec![2, 4, 4, 4],
            blocks: vec![single(0), single(0), open(), single(1), open(), single(2), open(), single(3)],
        }
    }

    const P: [f64; 4] = [0.225, 0.225, 0.1125, 0.1125];

    #[test]
    fn running_example_network() {
        let s = running();
        let net = build_network(&s, DistanceKind::Kl, &P);
        assert_eq!((net.n, net.m), (8, 4));
        assert_eq!(net.middle.len(), 14);
        assert_eq!(net.sink_capacity, vec![2, 4, 4, 4]);
        for c in &net.marginal_costs {
            assert!(c.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
    }

    #[test]
    fn running_example_kl() {
        let s = running();
        let sol = solve_mcc(&s, DistanceKind::Kl, &P).unwrap();
        assert!((sol.c_min - 0.4307).abs() < 1e-4);
        assert_eq!(sol.k, vec![2, 3, 1, 2]);
        let telescoped = sol.flow.flow_cost + build_network(&s, DistanceKind::Kl, &P).base_cost;
        assert!((telescoped - sol.flow.distance).abs() < 1e-9);
        assert!(verify_optimal(&s, DistanceKind::Kl, &P, &[2, 3, 1, 2], sol.c_min));
        assert!(!verify_optimal(&s, DistanceKind::Kl, &P, &[2, 1, 1, 4], sol.c_min));
        let (all, stats) = enumerate_mcc(&s, DistanceKind::Kl, &P, 100).unwrap();
        assert_eq!(all, vec![vec![2, 3, 1, 2], vec![2, 3, 2, 1]]);
        assert!(stats.max_solves_between_emissions <= stats.bound, "{stats:?}");
        assert_eq!(count_mcc(&s, DistanceKind::Kl, &P, 100).unwrap(), 2);
        assert_eq!(
            count_mcc(&s, DistanceKind::Kl, &P, 1),
            Err(FlowError::EnumerationBudgetExceeded { cap: 1 })
        );
        let (best, argmin) = brute_force_mcc(&s, DistanceKind::Kl, &P, 1000).unwrap();
        assert!(tie(best, sol.c_min));
        assert_eq!(argmin, all);
    }

    #[test]
    fn all_singletons() {
        let rel = crate::bid::BidRelation {
            name: "R".into(),
            attributes: vec!["A".into()],
            blocks: ["x", "y", "x"]
                .iter()
                .enumerate()
                .map(|(i, v)| crate::bid::Block {
                    origin: format!("t{i}"),
                    tuples: vec![crate::bid::BidTuple { tid: format!("t{i}#1"), values: vec![v.to_string()], prob: 1.0 }],
                })
                .collect(),
        };
        let s = support_of(&rel);
        let p = [0.3, 0.7];
        for kind in DistanceKind::STATISTICAL {
            let sol = solve_mcc(&s, kind, &p).unwrap();
            assert_eq!(sol.k, vec![2, 1]);
            assert_eq!(enumerate_mcc(&s, kind, &p, 10).unwrap().0, vec![vec![2, 1]]);
        }
    }

    #[test]
    fn empty_relation_has_one_class() {
        let s = Support { rows: vec![], multiplicities: vec![], blocks: vec![] };
        assert_eq!(count_mcc(&s, DistanceKind::Kl, &[], 10).unwrap(), 1);
    }
}
