//! BID equivalence, representing an arbitrary BID as observed data plus a
//! missingness graph, and reducing tuple-independent databases to observed
//! data with a fresh missing attribute.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::bid::{build_bid, parse_prob, Bid, BidError, BidRelation, Block};
use crate::format;
use crate::mg::{indicator_name, MgBuilder, MgError, MissingnessGraph, DEFAULT_ASSIGNMENT_CAP};
use crate::observed::{
    bind_mg, parse_schema, AttributeDecl, BindError, Cell, ObservedDatabase, ObservedError, ObservedRelation,
    ObservedTuple, RelationSchema, Role,
};
use crate::query::{answers_by_worlds, evaluate_on_world, AnswerValue, Evaluation, Instance, Query, QueryError};

pub const EQUIVALENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedding needs {space} joint assignments, cap is {cap}")]
    UnencodableBid { space: u128, cap: u128 },
    #[error("relation `{relation}`: row {row} appears with probabilities {a} and {b}")]
    TidConflict { relation: String, row: String, a: f64, b: f64 },
    #[error("relation `{relation}` line {line}: {message}")]
    TidSyntax { relation: String, line: u64, message: String },
    #[error("the reduced query must be Boolean")]
    NotBoolean,
    #[error(transparent)]
    Observed(#[from] ObservedError),
    #[error(transparent)]
    Mg(#[from] MgError),
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error(transparent)]
    Bid(#[from] BidError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

// ----------------------------------------------------------- equivalence

/// `blocks[i]` is the block of the second BID matched to block `i` of the
/// first; `tuples[i][r]` is the matched tuple inside it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidEquivalenceWitness {
    pub blocks: Vec<usize>,
    pub tuples: Vec<Vec<usize>>,
}

fn canonical_key(b: &Block) -> Vec<(Vec<String>, String)> {
    let mut key: Vec<_> = b.tuples.iter().map(|t| (t.values.clone(), format::sig(t.prob, 12))).collect();
    key.sort();
    key
}

/// Tuple bijection from `a` to `b` pairing equal rows with probabilities
/// within [`EQUIVALENCE_TOL`].
fn match_tuples(a: &Block, b: &Block) -> Option<Vec<usize>> {
    if a.tuples.len() != b.tuples.len() {
        return None;
    }
    let mut used = vec![false; b.tuples.len()];
    let mut out = Vec::with_capacity(a.tuples.len());
    for t in &a.tuples {
        let r = b
            .tuples
            .iter()
            .enumerate()
            .position(|(r, u)| !used[r] && u.values == t.values && (u.prob - t.prob).abs() <= EQUIVALENCE_TOL)?;
        used[r] = true;
        out.push(r);
    }
    Some(out)
}

/// Blocks are first paired by canonical key; if that leaves a block
/// unpaired, a bipartite matching over tolerance-compatible pairs decides.
pub fn bid_equivalent(d: &BidRelation, e: &BidRelation) -> Option<BidEquivalenceWitness> {
    if d.attributes != e.attributes || d.blocks.len() != e.blocks.len() {
        return None;
    }
    let mut buckets: BTreeMap<Vec<(Vec<String>, String)>, Vec<usize>> = BTreeMap::new();
    for (i, b) in e.blocks.iter().enumerate().rev() {
        buckets.entry(canonical_key(b)).or_default().push(i);
    }
    let mut blocks = Vec::with_capacity(d.blocks.len());
    for b in &d.blocks {
        match buckets.get_mut(&canonical_key(b)).and_then(Vec::pop) {
            Some(j) => blocks.push(j),
            None => return bid_equivalent_exhaustive(d, e),
        }
    }
    let tuples = d
        .blocks
        .iter()
        .zip(&blocks)
        .map(|(b, &j)| match_tuples(b, &e.blocks[j]))
        .collect::<Option<Vec<_>>>();
    match tuples {
        Some(tuples) => Some(BidEquivalenceWitness { blocks, tuples }),
        None => bid_equivalent_exhaustive(d, e),
    }
}

fn bid_equivalent_exhaustive(d: &BidRelation, e: &BidRelation) -> Option<BidEquivalenceWitness> {
    let n = d.blocks.len();
    let compat: Vec<Vec<Option<Vec<usize>>>> =
        d.blocks.iter().map(|a| e.blocks.iter().map(|b| match_tuples(a, b)).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn try_assign(i: usize, compat: &[Vec<Option<Vec<usize>>>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for j in 0..owner.len() {
            if compat[i][j].is_some() && !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|o| try_assign(o, compat, seen, owner)) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    for i in 0..n {
        if !try_assign(i, &compat, &mut vec![false; n], &mut owner) {
            return None;
        }
    }
    let mut blocks = vec![0; n];
    for (j, o) in owner.iter().enumerate() {
        blocks[o.expect("perfect matching")] = j;
    }
    let tuples = (0..n).map(|i| compat[i][blocks[i]].clone().expect("compatible")).collect();
    Some(BidEquivalenceWitness { blocks, tuples })
}

// ------------------------------------------------------------- embedding

/// Observed data and graph whose BID, decoded, is equivalent to the input.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub observed: ObservedDatabase,
    pub mg: MissingnessGraph,
    /// Token of attribute `T` to the original row.
    pub decode: BTreeMap<String, Vec<String>>,
    pub original_attributes: Vec<String>,
}

pub const TOKEN_ATTRIBUTE: &str = "T";

pub fn block_attribute(l: usize) -> String {
    format!("A{}", l + 1)
}

/// Schema `T, A1..An`: one observed row per block `i` with `A{i} = 1` and
/// everything else missing. `I_{A_l}` are fair coins, `I_T` is always 1,
/// `T` depends on the indicators (the pattern with only `I_{A_i} = 0`
/// selects block `i`'s distribution) and `A_l = 1` exactly when `T` is a
/// row of block `l`.
pub fn embed_bid(d: &BidRelation, cap: u128) -> Result<Embedding, EmbedError> {
    let n = d.blocks.len();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for b in &d.blocks {
        for t in &b.tuples {
            if !rows.contains(&t.values) {
                rows.push(t.values.clone());
            }
        }
    }
    let m = rows.len();
    // T, T*, I_T, then A_l, A_l*, I_{A_l} for each block.
    let space = 12u128.saturating_pow(n as u32).saturating_mul(m as u128 * (m as u128 + 1) * 2);
    if n == 0 || space > cap {
        return Err(EmbedError::UnencodableBid { space, cap });
    }
    let tokens: Vec<String> = (1..=m).map(|j| format!("t{j}")).collect();
    let token_of = |values: &Vec<String>| tokens[rows.iter().position(|r| r == values).unwrap()].clone();
    let members: Vec<HashSet<String>> =
        d.blocks.iter().map(|b| b.tuples.iter().map(|t| token_of(&t.values)).collect()).collect();

    let mut b = MgBuilder::new();
    b.relation(d.name.clone());
    b.var(TOKEN_ATTRIBUTE, true, &tokens)?;
    let attrs: Vec<String> = (0..n).map(block_attribute).collect();
    for a in &attrs {
        b.var(a, true, &["0", "1"])?;
    }
    b.cpt_row(&indicator_name(TOKEN_ATTRIBUTE), &[] as &[(&str, &str)], &[("1", 1.0)]);
    let indicators: Vec<String> = attrs.iter().map(|a| indicator_name(a)).collect();
    for i in &indicators {
        b.cpt_row(i, &[] as &[(&str, &str)], &[("0", 0.5), ("1", 0.5)]);
    }
    b.parents(TOKEN_ATTRIBUTE, &indicators);
    let uniform: Vec<(String, f64)> = tokens.iter().map(|t| (t.clone(), 1.0 / m as f64)).collect();
    for pattern in 0..(1usize << n) {
        let bits: Vec<&str> = (0..n).map(|l| if pattern >> (n - 1 - l) & 1 == 1 { "1" } else { "0" }).collect();
        let cond: Vec<(String, &str)> = indicators.iter().cloned().zip(bits.iter().copied()).collect();
        let zeros: Vec<usize> = (0..n).filter(|&l| bits[l] == "0").collect();
        match zeros.as_slice() {
            [i] => {
                let probs: Vec<(String, f64)> =
                    d.blocks[*i].tuples.iter().map(|t| (token_of(&t.values), t.prob)).collect();
                b.cpt_row(TOKEN_ATTRIBUTE, &cond, &probs);
            }
            _ => {
                b.cpt_row(TOKEN_ATTRIBUTE, &cond, &uniform);
            }
        }
    }
    for (l, a) in attrs.iter().enumerate() {
        b.parents(a, &[TOKEN_ATTRIBUTE]);
        for t in &tokens {
            let v = if members[l].contains(t) { "1" } else { "0" };
            b.cpt_row(a, &[(TOKEN_ATTRIBUTE, t.as_str())], &[(v, 1.0)]);
        }
    }
    let mg = b.build()?.with_assignment_cap(cap).validated()?;

    let mut attributes = vec![AttributeDecl { name: TOKEN_ATTRIBUTE.into(), role: Role::PartiallyObserved, domain: tokens.clone() }];
    attributes.extend(attrs.iter().map(|a| AttributeDecl {
        name: a.clone(),
        role: Role::PartiallyObserved,
        domain: vec!["0".into(), "1".into()],
    }));
    let tuples = d
        .blocks
        .iter()
        .enumerate()
        .map(|(i, blk)| {
            let mut cells = vec![Cell::Na; n + 1];
            cells[i + 1] = Cell::Value("1".into());
            ObservedTuple { tid: blk.origin.clone(), cells }
        })
        .collect();
    let observed = ObservedDatabase {
        relations: vec![ObservedRelation { schema: RelationSchema { name: d.name.clone(), attributes }, tuples }],
    };
    let decode = tokens.into_iter().zip(rows).collect();
    Ok(Embedding { observed, mg, decode, original_attributes: d.attributes.clone() })
}

impl Embedding {
    /// BID of the embedded data, as produced by the ordinary pipeline.
    pub fn derived_bid(&self) -> Result<Bid, EmbedError> {
        let bound = bind_mg(&self.observed, vec![self.mg.clone()])?;
        Ok(build_bid(&bound)?)
    }

    /// Projects a derived relation back onto the original attributes.
    pub fn decode_relation(&self, derived: &BidRelation) -> BidRelation {
        let mut out = derived.clone();
        out.attributes = self.original_attributes.clone();
        for b in &mut out.blocks {
            for t in &mut b.tuples {
                t.values = self.decode[&t.values[0]].clone();
            }
        }
        out
    }
}

// ---------------------------------------------------------- TID reduction

#[derive(Clone, Debug, PartialEq)]
pub struct TidTuple {
    pub tid: String,
    pub values: Vec<String>,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TidRelation {
    pub schema: RelationSchema,
    pub tuples: Vec<TidTuple>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tid {
    pub relations: Vec<TidRelation>,
}

impl Tid {
    /// Schema in the observed-data format (roles are ignored) and one CSV
    /// per relation with header `tid,<attrs...>,prob`.
    pub fn load(schema_text: &str, csv_texts: &[(&str, &str)]) -> Result<Tid, EmbedError> {
        let schemas = parse_schema(schema_text)?;
        let mut relations = Vec::new();
        for s in schemas {
            let text = csv_texts
                .iter()
                .find(|(n, _)| *n == s.name)
                .map(|(_, t)| *t)
                .ok_or_else(|| ObservedError::MissingData(s.name.clone()))?;
            let syntax = |line: u64, message: String| EmbedError::TidSyntax { relation: s.name.clone(), line, message };
            let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
            let header: Vec<String> = reader.headers().map_err(|e| syntax(1, e.to_string()))?.iter().map(String::from).collect();
            let mut want = vec!["tid".to_string()];
            want.extend(s.attribute_names());
            want.push("prob".into());
            if header != want {
                return Err(syntax(1, format!("header must be `{}`", want.join(","))));
            }
            let mut tuples = Vec::new();
            for rec in reader.records() {
                let rec = rec.map_err(|e| syntax(0, e.to_string()))?;
                let line = rec.position().map_or(0, |p| p.line());
                let values: Vec<String> = rec.iter().skip(1).take(s.attributes.len()).map(String::from).collect();
                for (v, a) in values.iter().zip(&s.attributes) {
                    if !a.domain.contains(v) {
                        return Err(syntax(line, format!("`{v}` is not in the domain of `{}`", a.name)));
                    }
                }
                let prob = parse_prob(&rec[rec.len() - 1])
                    .filter(|p| (0.0..=1.0).contains(p))
                    .ok_or_else(|| syntax(line, "probability must lie in [0,1]".into()))?;
                tuples.push(TidTuple { tid: rec[0].to_string(), values, prob });
            }
            relations.push(TidRelation { schema: s, tuples });
        }
        Ok(Tid { relations })
    }

    /// Probability that a Boolean query holds, by enumerating all subsets.
    pub fn query_probability(&self, q: &Query) -> Result<f64, EmbedError> {
        if !q.is_boolean() {
            return Err(EmbedError::NotBoolean);
        }
        let all: Vec<(&str, &TidTuple)> =
            self.relations.iter().flat_map(|r| r.tuples.iter().map(move |t| (r.schema.name.as_str(), t))).collect();
        let mut total = 0.0;
        for mask in 0u64..(1u64 << all.len()) {
            let mut world: Instance = self.relations.iter().map(|r| (r.schema.name.clone(), Vec::new())).collect();
            let mut p = 1.0;
            for (i, (rel, t)) in all.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    world.get_mut(*rel).unwrap().push(t.values.clone());
                    p *= t.prob;
                } else {
                    p *= 1.0 - t.prob;
                }
            }
            if p > 0.0 && evaluate_on_world(q, &world)? == Evaluation::Bool(true) {
                total += p;
            }
        }
        Ok(total)
    }
}

#[derive(Clone, Debug)]
pub struct TidReduction {
    pub observed: ObservedDatabase,
    pub mgs: Vec<MissingnessGraph>,
    pub query: Query,
    /// Name of the added attribute in each relation.
    pub flag_attribute: Vec<String>,
}

/// Adds a missing binary attribute to every relation whose conditional
/// probability of being 1 given the row equals the tuple's probability.
pub fn tid_to_observed(tid: &Tid, q: &Query) -> Result<TidReduction, EmbedError> {
    let mut relations = Vec::new();
    let mut mgs = Vec::new();
    let mut flags = Vec::new();
    for r in &tid.relations {
        let s = &r.schema;
        let mut flag = "M".to_string();
        while s.attributes.iter().any(|a| a.name == flag) {
            flag.push('_');
        }
        let mut probs: BTreeMap<&[String], f64> = BTreeMap::new();
        for t in &r.tuples {
            if let Some(&old) = probs.get(t.values.as_slice()) {
                if old != t.prob {
                    return Err(EmbedError::TidConflict {
                        relation: s.name.clone(),
                        row: t.values.join(","),
                        a: old,
                        b: t.prob,
                    });
                }
            }
            probs.insert(&t.values, t.prob);
        }
        let mut b = MgBuilder::new();
        b.relation(s.name.clone());
        for a in &s.attributes {
            b.var(&a.name, false, &a.domain)?;
            let p = 1.0 / a.domain.len() as f64;
            let row: Vec<(String, f64)> = a.domain.iter().map(|v| (v.clone(), p)).collect();
            b.cpt_row(&a.name, &[] as &[(&str, &str)], &row);
        }
        b.var(&flag, true, &["0", "1"])?;
        b.cpt_row(&indicator_name(&flag), &[] as &[(&str, &str)], &[("0", 0.5), ("1", 0.5)]);
        let names = s.attribute_names();
        b.parents(&flag, &names);
        let radices: Vec<usize> = s.attributes.iter().map(|a| a.domain.len()).collect();
        for digits in crate::bid::odometer(&radices) {
            let values: Vec<String> = digits.iter().zip(&s.attributes).map(|(&d, a)| a.domain[d].clone()).collect();
            let cond: Vec<(String, String)> = names.iter().cloned().zip(values.iter().cloned()).collect();
            let p = probs.get(values.as_slice()).copied().unwrap_or(0.5);
            b.cpt_row(&flag, &cond, &[("1", p), ("0", 1.0 - p)]);
        }
        mgs.push(b.build()?.with_assignment_cap(DEFAULT_ASSIGNMENT_CAP).validated()?);

        let mut attributes = s.attributes.clone();
        for a in &mut attributes {
            a.role = Role::FullyObserved;
        }
        attributes.push(AttributeDecl { name: flag.clone(), role: Role::PartiallyObserved, domain: vec!["0".into(), "1".into()] });
        let tuples = r
            .tuples
            .iter()
            .map(|t| {
                let mut cells: Vec<Cell> = t.values.iter().cloned().map(Cell::Value).collect();
                cells.push(Cell::Na);
                ObservedTuple { tid: t.tid.clone(), cells }
            })
            .collect();
        relations.push(ObservedRelation { schema: RelationSchema { name: s.name.clone(), attributes }, tuples });
        flags.push(flag);
    }
    Ok(TidReduction {
        observed: ObservedDatabase { relations },
        mgs,
        query: q.with_appended_constant("1"),
        flag_attribute: flags,
    })
}

impl TidReduction {
    pub fn bid(&self) -> Result<Bid, EmbedError> {
        Ok(build_bid(&bind_mg(&self.observed, self.mgs.clone())?)?)
    }

    /// Probability of the rewritten query over the worlds of the BID.
    pub fn query_probability(&self, world_cap: u128) -> Result<f64, EmbedError> {
        let bid = self.bid()?;
        let answers = answers_by_worlds(&self.query, &bid, world_cap)?;
        Ok(answers.iter().find(|(a, _)| *a == AnswerValue::Bool(true)).map_or(0.0, |(_, p)| *p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bid::BidTuple;

    fn rel(blocks: &[&[(&str, f64)]]) -> BidRelation {
        BidRelation {
            name: "R".into(),
            attributes: vec!["X".into()],
            blocks: blocks
                .iter()
                .enumerate()
                .map(|(i, b)| Block {
                    origin: format!("b{i}"),
                    tuples: b
                        .iter()
                        .enumerate()
                        .map(|(r, (v, p))| BidTuple { tid: format!("b{i}#{r}"), values: vec![v.to_string()], prob: *p })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn equivalence_basics() {
        let d = rel(&[&[("x", 0.3), ("y", 0.7)], &[("z", 1.0)]]);
        let w = bid_equivalent(&d, &d).unwrap();
        assert_eq!(w.blocks, vec![0, 1]);
        let mut e = rel(&[&[("z", 1.0)], &[("y", 0.7), ("x", 0.3)]]);
        e.blocks[0].origin = "other".into();
        let w = bid_equivalent(&d, &e).unwrap();
        assert_eq!(w.blocks, vec![1, 0]);
        assert_eq!(w.tuples[0], vec![1, 0]);
        assert!(bid_equivalent(&e, &d).is_some());
        let f = rel(&[&[("x", 0.301), ("y", 0.699)], &[("z", 1.0)]]);
        assert!(bid_equivalent(&d, &f).is_none());
        // Within tolerance but on different sides of a 12-digit rounding edge.
        let g = rel(&[&[("x", 0.3 + 4e-13), ("y", 0.7 - 4e-13)], &[("z", 1.0)]]);
        assert!(bid_equivalent(&d, &g).is_some());
    }

    #[test]
    fn embeds_two_blocks() {
        let p1 = 0.3;
        let p2 = 0.8;
        let d = BidRelation {
            name: "R".into(),
            attributes: vec!["A".into(), "B".into(), "M".into()],
            blocks: [("t1", ["a", "b"], p1), ("t2", ["a'", "b'"], p2)]
                .iter()
                .map(|(tid, ab, p)| Block {
                    origin: tid.to_string(),
                    tuples: [("1", *p), ("0", 1.0 - p)]
                        .iter()
                        .enumerate()
                        .map(|(i, (mv, q))| BidTuple {
                            tid: format!("{tid}#{}", i + 1),
                            values: vec![ab[0].into(), ab[1].into(), mv.to_string()],
                            prob: *q,
                        })
                        .collect(),
                })
                .collect(),
        };
        let emb = embed_bid(&d, DEFAULT_ASSIGNMENT_CAP).unwrap();
        let derived = emb.derived_bid().unwrap();
        let back = emb.decode_relation(derived.single().unwrap());
        assert!(bid_equivalent(&d, &back).is_some());
        let probs: Vec<f64> = back.blocks.iter().flat_map(|b| b.tuples.iter().map(|t| t.prob)).collect();
        for (a, b) in probs.iter().zip([p1, 1.0 - p1, p2, 1.0 - p2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_blocks_embed() {
        let d = rel(&[&[("x", 1.0)], &[("x", 1.0)], &[("y", 1.0)]]);
        let emb = embed_bid(&d, DEFAULT_ASSIGNMENT_CAP).unwrap();
        let back = emb.decode_relation(emb.derived_bid().unwrap().single().unwrap());
        assert!(bid_equivalent(&d, &back).is_some());
        assert_eq!(emb.mg.assignment_space(), 12u128.pow(3) * 2 * 3 * 2);
        assert!(matches!(embed_bid(&d, 10), Err(EmbedError::UnencodableBid { .. })));
    }

    const TID_SCHEMA: &str = "relation R\nattr A role=o domain=a,a',b,b'\nattr B role=o domain=a,a',b,b'\n\
                              relation S\nattr A role=o domain=a,a',b,b'\n";

    #[test]
    fn tid_reduction_matches() {
        let tid = Tid::load(
            TID_SCHEMA,
            &[("R", "tid,A,B,prob\nt1,a,b,0.3\nt2,a',b',0.6\n"), ("S", "tid,A,prob\nt3,a,0.5\nt4,b,0.25\nt5,b',0.9\n")],
        )
        .unwrap();
        let q = Query::parse("ans() :- R(x, y), S(y)").unwrap();
        let red = tid_to_observed(&tid, &q).unwrap();
        assert_eq!(red.query.to_string(), "ans() :- R(x, y, 1), S(y, 1)");
        let bid = red.bid().unwrap();
        let r = bid.relation("R").unwrap();
        assert_eq!(r.blocks[0].tuples[0].values, vec!["a", "b", "0"]);
        assert!((r.blocks[0].tuples[1].prob - 0.3).abs() < 1e-12);
        let direct = tid.query_probability(&q).unwrap();
        let want = 1.0 - (1.0 - 0.3 * 0.25) * (1.0 - 0.6 * 0.9);
        assert!((direct - want).abs() < 1e-12);
        assert!((red.query_probability(1 << 20).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn tid_conflicts_are_rejected() {
        let tid = Tid::load(
            "relation S\nattr A role=o domain=a\n",
            &[("S", "tid,A,prob\nt1,a,0.5\nt2,a,0.4\n")],
        )
        .unwrap();
        let q = Query::parse("ans() :- S(y)").unwrap();
        assert!(matches!(tid_to_observed(&tid, &q), Err(EmbedError::TidConflict { .. })));
    }
}
