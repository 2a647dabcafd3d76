//! Block-independent probabilistic database induced by observed data and
//! its missingness graphs.

use thiserror::Error;

use crate::format;
use crate::mg::{star_name, Assignment, MgError, NA};
use crate::observed::{BoundDatabase, BoundRelation, Cell};
use crate::tolerance::PROB_SUM_TOL;

#[derive(Clone, Debug, PartialEq)]
pub struct BidTuple {
    pub tid: String,
    pub values: Vec<String>,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub origin: String,
    pub tuples: Vec<BidTuple>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BidRelation {
    pub name: String,
    pub attributes: Vec<String>,
    pub blocks: Vec<Block>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bid {
    pub relations: Vec<BidRelation>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BidError {
    #[error("relation `{relation}` tid `{tid}`: observed tuple has probability 0 under the missingness graph")]
    ObservedTupleImpossible { relation: String, tid: String },
    #[error(transparent)]
    Mg(#[from] MgError),
    #[error("BID line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("expected a single relation, found {0}")]
    NotSingleRelation(usize),
    #[error("block `{block}`: {message}")]
    BadBlock { block: String, message: String },
}

/// Builds one block per observed tuple. Completions follow domain order with
/// the leftmost missing attribute varying slowest; zero-probability
/// completions are dropped.
pub fn build_bid(bound: &BoundDatabase) -> Result<Bid, BidError> {
    let relations = bound.relations.iter().map(build_relation).collect::<Result<_, _>>()?;
    Ok(Bid { relations })
}

fn build_relation(rel: &BoundRelation) -> Result<BidRelation, BidError> {
    let schema = &rel.observed.schema;
    let mut blocks = Vec::with_capacity(rel.observed.tuples.len());
    for t in &rel.observed.tuples {
        let mut evidence = Assignment::new();
        let mut missing = Vec::new();
        for (i, (attr, cell)) in schema.attributes.iter().zip(&t.cells).enumerate() {
            let is_m = rel.mg.variable(&star_name(&attr.name)).is_some();
            match cell {
                Cell::Value(v) if is_m => evidence.set(star_name(&attr.name), v.clone()),
                Cell::Value(v) => evidence.set(attr.name.clone(), v.clone()),
                Cell::Na => {
                    evidence.set(star_name(&attr.name), NA);
                    missing.push(i);
                }
            }
        }
        let impossible = || BidError::ObservedTupleImpossible {
            relation: schema.name.clone(),
            tid: t.tid.clone(),
        };
        let denom = rel.mg.marginal(&evidence)?;
        if denom <= 0.0 {
            return Err(impossible());
        }
        let radices: Vec<usize> = missing.iter().map(|&i| schema.attributes[i].domain.len()).collect();
        let mut tuples = Vec::new();
        for digits in odometer(&radices) {
            let mut target = evidence.clone();
            let mut values: Vec<String> = t.cells.iter().map(|c| c.as_str().to_string()).collect();
            for (&pos, &d) in missing.iter().zip(&digits) {
                let attr = &schema.attributes[pos];
                target.set(attr.name.clone(), attr.domain[d].clone());
                values[pos] = attr.domain[d].clone();
            }
            let prob = rel.mg.marginal(&target)? / denom;
            if prob > 0.0 {
                tuples.push(BidTuple { tid: format!("{}#{}", t.tid, tuples.len() + 1), values, prob });
            }
        }
        if tuples.is_empty() {
            return Err(impossible());
        }
        blocks.push(Block { origin: t.tid.clone(), tuples });
    }
    Ok(BidRelation { name: schema.name.clone(), attributes: schema.attribute_names(), blocks })
}

/// All digit vectors over the given radices, first digit most significant.
pub(crate) fn odometer(radices: &[usize]) -> Vec<Vec<usize>> {
    if radices.contains(&0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; radices.len()];
    loop {
        out.push(cur.clone());
        let mut i = radices.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < radices[i] {
                break;
            }
            cur[i] = 0;
        }
    }
}

impl BidRelation {
    /// Number of possible worlds; saturates at `u128::MAX`.
    pub fn world_count(&self) -> u128 {
        self.blocks.iter().fold(1u128, |acc, b| acc.saturating_mul(b.len() as u128))
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Checks non-empty blocks, positive probabilities summing to one and
    /// pairwise distinct rows within each block.
    pub fn check(&self) -> Result<(), BidError> {
        for b in &self.blocks {
            let bad = |message: &str| BidError::BadBlock { block: b.origin.clone(), message: message.into() };
            if b.tuples.is_empty() {
                return Err(bad("empty block"));
            }
            if b.tuples.iter().any(|t| !(t.prob > 0.0 && t.prob <= 1.0 + PROB_SUM_TOL)) {
                return Err(bad("probability outside (0,1]"));
            }
            if b.tuples.iter().any(|t| t.values.len() != self.attributes.len()) {
                return Err(bad("row arity differs from the relation"));
            }
            let sum: f64 = b.tuples.iter().map(|t| t.prob).sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(bad("probabilities do not sum to 1"));
            }
            for (i, t) in b.tuples.iter().enumerate() {
                if b.tuples[..i].iter().any(|u| u.values == t.values) {
                    return Err(bad("repeated row"));
                }
            }
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("block_id\ttid\t{}\tprob\n", self.attributes.join("\t"));
        for b in &self.blocks {
            for t in &b.tuples {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    b.origin,
                    t.tid,
                    t.values.join("\t"),
                    format::prob(t.prob)
                ));
            }
        }
        out
    }
}

impl Bid {
    pub fn relation(&self, name: &str) -> Option<&BidRelation> {
        self.relations.iter().find(|r| r.name == name)
    }

    /// The only relation, for operations defined per single relation.
    pub fn single(&self) -> Result<&BidRelation, BidError> {
        match self.relations.as_slice() {
            [r] => Ok(r),
            rs => Err(BidError::NotSingleRelation(rs.len())),
        }
    }

    pub fn world_count(&self) -> u128 {
        self.relations.iter().fold(1u128, |acc, r| acc.saturating_mul(r.world_count()))
    }

    /// TSV with one `# relation <name>` line before each relation's table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.relations {
            out.push_str(&format!("# relation {}\n", r.name));
            out.push_str(&r.to_tsv());
        }
        out
    }

    /// Parses the output of [`Bid::to_tsv`]. Consecutive rows with the same
    /// `block_id` form one block.
    pub fn parse_tsv(text: &str) -> Result<Bid, BidError> {
        let mut relations: Vec<BidRelation> = Vec::new();
        let mut pending_name: Option<String> = None;
        let mut expect_header = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| BidError::Syntax { line: line_no, message };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let name = rest
                    .trim()
                    .strip_prefix("relation")
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| err("expected `# relation <name>`".into()))?;
                pending_name = Some(name.to_string());
                expect_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if expect_header || relations.is_empty() {
                if fields.len() < 3 || fields[0] != "block_id" || fields[1] != "tid" || fields.last() != Some(&"prob") {
                    return Err(err("expected header `block_id<TAB>tid<TAB>...<TAB>prob`".into()));
                }
                relations.push(BidRelation {
                    name: pending_name.take().unwrap_or_else(|| "R".to_string()),
                    attributes: fields[2..fields.len() - 1].iter().map(|s| s.to_string()).collect(),
                    blocks: Vec::new(),
                });
                expect_header = false;
                continue;
            }
            let rel = relations.last_mut().expect("header seen");
            if fields.len() != rel.attributes.len() + 3 {
                return Err(err(format!("expected {} fields, found {}", rel.attributes.len() + 3, fields.len())));
            }
            let prob: f64 = parse_prob(fields[fields.len() - 1]).ok_or_else(|| err("bad probability".into()))?;
            let tuple = BidTuple {
                tid: fields[1].to_string(),
                values: fields[2..fields.len() - 1].iter().map(|s| s.to_string()).collect(),
                prob,
            };
            match rel.blocks.last_mut() {
                Some(b) if b.origin == fields[0] => b.tuples.push(tuple),
                _ => {
                    if rel.blocks.iter().any(|b| b.origin == fields[0]) {
                        return Err(err(format!("block `{}` is not contiguous", fields[0])));
                    }
                    rel.blocks.push(Block { origin: fields[0].to_string(), tuples: vec![tuple] })
                }
            }
        }
        for r in &relations {
            r.check()?;
        }
        Ok(Bid { relations })
    }
}

/// Accepts decimals and `a/b` fractions.
pub(crate) fn parse_prob(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mg::MissingnessGraph;
    use crate::observed::{bind_mg, load_observed};

    pub(crate) const SCHEMA: &str = "\
relation R
attr A role=o domain=a
attr B role=o domain=0,1
attr C role=m domain=0,1,2
";
    pub(crate) const DATA: &str = "\
tid,A,B,C
t1,a,0,0
t2,a,0,0
t3,a,1,na
t4,a,1,0
t5,a,1,na
t6,a,1,1
t7,a,1,na
t8,a,1,2
";
    pub(crate) const MG: &str = "\
relation R
var A kind=o domain=a
var B kind=o domain=0,1
var C kind=m domain=0,1,2
parents I_C = B
cpt A : a=1
cpt B : 0=1/2, 1=1/2
cpt C : 0=1/2, 1=1/4, 2=1/4
cpt I_C | B=0 : 0=1, 1=0
cpt I_C | B=1 : 0=0.6, 1=0.4
";

    fn running() -> Bid {
        let db = load_observed(SCHEMA, &[("R", DATA)]).unwrap();
        let mg = MissingnessGraph::parse(MG).unwrap();
        build_bid(&bind_mg(&db, vec![mg]).unwrap()).unwrap()
    }

    #[test]
    fn running_example_blocks() {
        let bid = running();
        let r = bid.single().unwrap();
        assert_eq!(r.blocks.len(), 8);
        for b in &r.blocks {
            if ["t3", "t5", "t7"].contains(&b.origin.as_str()) {
                let ps: Vec<f64> = b.tuples.iter().map(|t| t.prob).collect();
                assert_eq!(b.tuples[1].values, vec!["a", "1", "1"]);
                for (p, want) in ps.iter().zip([0.5, 0.25, 0.25]) {
                    assert!((p - want).abs() <= 1e-12);
                }
                assert_eq!(b.tuples[2].tid, format!("{}#3", b.origin));
            } else {
                assert_eq!(b.tuples.len(), 1);
                assert_eq!(b.tuples[0].prob, 1.0);
            }
        }
        assert_eq!(r.world_count(), 27);
    }

    #[test]
    fn no_missing_values_gives_singletons() {
        let db = load_observed(SCHEMA, &[("R", "tid,A,B,C\nx,a,0,1\ny,a,1,2\n")]).unwrap();
        let mg = MissingnessGraph::parse(MG).unwrap();
        let bid = build_bid(&bind_mg(&db, vec![mg]).unwrap()).unwrap();
        let r = bid.single().unwrap();
        assert!(r.blocks.iter().all(|b| b.len() == 1 && b.tuples[0].prob == 1.0));
        assert_eq!(r.world_count(), 1);
    }

    #[test]
    fn impossible_tuple_is_reported() {
        // B=0 never produces a missing C.
        let db = load_observed(SCHEMA, &[("R", "tid,A,B,C\nx,a,0,na\n")]).unwrap();
        let mg = MissingnessGraph::parse(MG).unwrap();
        let err = build_bid(&bind_mg(&db, vec![mg]).unwrap()).unwrap_err();
        assert_eq!(err, BidError::ObservedTupleImpossible { relation: "R".into(), tid: "x".into() });
    }

    #[test]
    fn tsv_round_trip_and_determinism() {
        let a = running().to_tsv();
        assert_eq!(a, running().to_tsv());
        let parsed = Bid::parse_tsv(&a).unwrap();
        assert_eq!(parsed.to_tsv(), a);
        assert!(a.contains("t3\tt3#2\ta\t1\t1\t0.25\n"));
    }

    #[test]
    fn odometer_order() {
        assert_eq!(odometer(&[2, 2]), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(odometer(&[]), vec![Vec::<usize>::new()]);
    }
}
