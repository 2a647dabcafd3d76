//! Seeded generators for small random instances, used by tests, the
//! acceptance suite and the benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bid::{build_bid, BidRelation, BidTuple, Block};
use crate::embedding::{Tid, TidRelation, TidTuple};
use crate::mg::{indicator_name, MgBuilder, MissingnessGraph};
use crate::observed::{
    bind_mg, AttributeDecl, Cell, ObservedDatabase, ObservedRelation, ObservedTuple, RelationSchema, Role,
};

#[derive(Clone, Copy, Debug)]
pub struct InstanceShape {
    pub max_tuples: usize,
    pub max_domain: usize,
    pub max_attributes: usize,
    /// Instances whose BID has more worlds are redrawn.
    pub max_worlds: u128,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape { max_tuples: 6, max_domain: 4, max_attributes: 3, max_worlds: 50_000 }
    }
}

#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub observed: ObservedDatabase,
    pub mg: MissingnessGraph,
    pub bid: BidRelation,
}

struct Node {
    name: String,
    domain: Vec<String>,
    parents: Vec<usize>,
    /// One distribution per parent assignment, first parent most significant.
    table: Vec<Vec<f64>>,
}

fn random_distribution<R: Rng>(rng: &mut R, size: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..size).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.05..1.0) }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.gen_range(0..size)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn sample<R: Rng>(rng: &mut R, dist: &[f64]) -> usize {
    let mut u: f64 = rng.gen();
    for (i, &p) in dist.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn pick_parents<R: Rng>(rng: &mut R, candidates: &[usize], prob: f64, max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = candidates.iter().copied().filter(|_| rng.gen_bool(prob)).collect();
    out.shuffle(rng);
    out.truncate(max);
    out.sort_unstable();
    out
}

/// Single relation `R` with 2 to `max_attributes` attributes, at least one
/// of them missing; a random graph and CPTs; tuples sampled from the graph.
pub fn random_instance<R: Rng>(rng: &mut R, shape: InstanceShape) -> RandomInstance {
    loop {
        if let Some(inst) = try_instance(rng, shape) {
            return inst;
        }
    }
}

fn try_instance<R: Rng>(rng: &mut R, shape: InstanceShape) -> Option<RandomInstance> {
    let a = rng.gen_range(2..=shape.max_attributes.max(2));
    let mut missing: Vec<bool> = (0..a).map(|_| rng.gen_bool(0.5)).collect();
    if !missing.contains(&true) {
        missing[rng.gen_range(0..a)] = true;
    }
    let mut nodes: Vec<Node> = Vec::new();
    for i in 0..a {
        let d = rng.gen_range(2..=shape.max_domain.max(2));
        let domain: Vec<String> = (0..d).map(|v| v.to_string()).collect();
        let parents = pick_parents(rng, &(0..i).collect::<Vec<_>>(), 0.5, 2);
        let rows: usize = parents.iter().map(|&p| nodes[p].domain.len()).product();
        let table = (0..rows).map(|_| random_distribution(rng, d)).collect();
        nodes.push(Node { name: format!("X{}", i + 1), domain, parents, table });
    }
    // Indicator of attribute i sits at nodes[a + position among missing].
    let missing_attrs: Vec<usize> = (0..a).filter(|&i| missing[i]).collect();
    for &i in &missing_attrs {
        let parents = pick_parents(rng, &(0..a).collect::<Vec<_>>(), 0.35, 2);
        let rows: usize = parents.iter().map(|&p| nodes[p].domain.len()).product();
        let table = (0..rows)
            .map(|_| {
                let p1 = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.1..0.9) };
                vec![1.0 - p1, p1]
            })
            .collect();
        nodes.push(Node { name: indicator_name(&nodes[i].name), domain: vec!["0".into(), "1".into()], parents, table });
    }

    let mut b = MgBuilder::new();
    b.relation("R");
    for (i, n) in nodes.iter().take(a).enumerate() {
        b.var(&n.name, missing[i], &n.domain).ok()?;
    }
    for n in &nodes {
        let names: Vec<&str> = n.parents.iter().map(|&p| nodes[p].name.as_str()).collect();
        b.parents(&n.name, &names);
        let radices: Vec<usize> = n.parents.iter().map(|&p| nodes[p].domain.len()).collect();
        for (row, digits) in crate::bid::odometer(&radices).into_iter().enumerate() {
            let cond: Vec<(&str, &str)> =
                n.parents.iter().zip(&digits).map(|(&p, &d)| (nodes[p].name.as_str(), nodes[p].domain[d].as_str())).collect();
            let probs: Vec<(&str, f64)> = n.domain.iter().map(String::as_str).zip(n.table[row].iter().copied()).collect();
            b.cpt_row(&n.name, &cond, &probs);
        }
    }
    let mg = b.build().ok()?.validated().ok()?;

    let count = rng.gen_range(1..=shape.max_tuples.max(1));
    let mut tuples = Vec::with_capacity(count);
    for t in 0..count {
        let mut values = vec![0usize; nodes.len()];
        for (v, n) in nodes.iter().enumerate() {
            let row = n.parents.iter().fold(0, |acc, &p| acc * nodes[p].domain.len() + values[p]);
            values[v] = sample(rng, &n.table[row]);
        }
        let mut cells: Vec<Cell> = (0..a).map(|i| Cell::Value(nodes[i].domain[values[i]].clone())).collect();
        for (pos, &i) in missing_attrs.iter().enumerate() {
            if values[a + pos] == 1 {
                cells[i] = Cell::Na;
            }
        }
        tuples.push(ObservedTuple { tid: format!("t{}", t + 1), cells });
    }
    let attributes = (0..a)
        .map(|i| AttributeDecl {
            name: nodes[i].name.clone(),
            role: if missing[i] { Role::PartiallyObserved } else { Role::FullyObserved },
            domain: nodes[i].domain.clone(),
        })
        .collect();
    let observed = ObservedDatabase {
        relations: vec![ObservedRelation { schema: RelationSchema { name: "R".into(), attributes }, tuples }],
    };
    let bound = bind_mg(&observed, vec![mg.clone()]).ok()?;
    let bid = build_bid(&bound).ok()?.relations.into_iter().next()?;
    if bid.world_count() > shape.max_worlds {
        return None;
    }
    Some(RandomInstance { observed, mg, bid })
}

/// Relation `R(X)` with up to `max_blocks` blocks of up to `max_tuples`
/// distinct rows drawn from `max_values` values.
pub fn random_bid<R: Rng>(rng: &mut R, max_blocks: usize, max_tuples: usize, max_values: usize) -> BidRelation {
    let values: Vec<String> = (0..max_values.max(1)).map(|v| format!("v{v}")).collect();
    let n = rng.gen_range(1..=max_blocks.max(1));
    let blocks = (0..n)
        .map(|i| {
            let size = rng.gen_range(1..=max_tuples.max(1).min(values.len()));
            let rows: Vec<&String> = values.choose_multiple(rng, size).collect();
            let mut w: Vec<f64> = (0..size).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let origin = format!("b{}", i + 1);
            Block {
                tuples: rows
                    .into_iter()
                    .zip(w)
                    .enumerate()
                    .map(|(r, (v, p))| BidTuple { tid: format!("{origin}#{}", r + 1), values: vec![v.clone()], prob: p })
                    .collect(),
                origin,
            }
        })
        .collect();
    BidRelation { name: "R".into(), attributes: vec!["X".into()], blocks }
}

pub const TID_QUERY: &str = "ans() :- R(x, y), S(y)";

/// Three tuples spread over `R(A, B)` and `S(A)` with values in `{a, b}`,
/// rows distinct within each relation.
pub fn random_tid<R: Rng>(rng: &mut R) -> Tid {
    let domain = vec!["a".to_string(), "b".to_string()];
    let decl = |name: &str| AttributeDecl { name: name.into(), role: Role::FullyObserved, domain: domain.clone() };
    let mut r = TidRelation {
        schema: RelationSchema { name: "R".into(), attributes: vec![decl("A"), decl("B")] },
        tuples: Vec::new(),
    };
    let mut s = TidRelation { schema: RelationSchema { name: "S".into(), attributes: vec![decl("A")] }, tuples: Vec::new() };
    let mut id = 0;
    while id < 3 {
        let in_r = rng.gen_bool(0.5);
        let (rel, arity) = if in_r { (&mut r, 2) } else { (&mut s, 1) };
        let values: Vec<String> = (0..arity).map(|_| domain[rng.gen_range(0..2)].clone()).collect();
        if rel.tuples.iter().any(|t| t.values == values) {
            continue;
        }
        id += 1;
        rel.tuples.push(TidTuple { tid: format!("t{id}"), values, prob: rng.gen_range(0.01..1.0) });
    }
    Tid { relations: vec![r, s] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instances_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let inst = random_instance(&mut rng, InstanceShape::default());
            inst.bid.check().unwrap();
            assert!(inst.bid.world_count() <= 50_000);
            assert!(inst.bid.blocks.len() <= 6);
        }
    }

    #[test]
    fn bids_and_tids_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let d = random_bid(&mut rng, 4, 3, 5);
            d.check().unwrap();
            assert!(d.blocks.len() <= 4 && d.blocks.iter().all(|b| b.len() <= 3));
            let t = random_tid(&mut rng);
            assert_eq!(t.relations.iter().map(|r| r.tuples.len()).sum::<usize>(), 3);
        }
    }
}
