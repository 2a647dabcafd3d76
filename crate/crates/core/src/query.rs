//! Conjunctive queries and aggregates under bag semantics, evaluated on
//! class representatives and on enumerated worlds.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, Zero};
use thiserror::Error;

use crate::bid::Bid;
use crate::observed::RelationSchema;
use crate::tolerance::tie;
use crate::worlds::{representative_world, ClassVector, Support, WorldError};

pub type Number = Ratio<i128>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(String),
    Anon,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Term>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    Sum,
    Count,
    Avg,
    Min,
    Max,
}

impl Aggregate {
    fn name(self) -> &'static str {
        match self {
            Aggregate::Sum => "sum",
            Aggregate::Count => "count",
            Aggregate::Avg => "avg",
            Aggregate::Min => "min",
            Aggregate::Max => "max",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [Aggregate::Sum, Aggregate::Count, Aggregate::Avg, Aggregate::Min, Aggregate::Max]
            .into_iter()
            .find(|a| a.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Head {
    /// Projection onto variables; empty means a Boolean query.
    Project { name: String, vars: Vec<String> },
    /// `None` stands for `count(*)`.
    Aggregate(Aggregate, Option<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub head: Head,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("query syntax at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` has {expected} attributes, atom has {got}")]
    Arity { relation: String, expected: usize, got: usize },
    #[error("head variable `{0}` does not occur in the body")]
    Unsafe(String),
    #[error("constant `{value}` is not in the domain of `{relation}.{attribute}`")]
    ConstantNotInDomain { relation: String, attribute: String, value: String },
    #[error("aggregate over non-numeric token `{0}`")]
    NonNumericAggregate(String),
    #[error("{0} of an empty bag is undefined")]
    EmptyAggregate(&'static str),
    #[error("aggregate overflowed exact arithmetic")]
    Overflow,
    #[error("classes are defined for a single relation, the query uses `{0}`")]
    OtherRelation(String),
    #[error("class vector {0:?} is not admissible")]
    NotAdmissible(ClassVector),
    #[error(transparent)]
    Worlds(#[from] WorldError),
}

// ---------------------------------------------------------------- parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Implies,
    Star,
    Dot,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |column: usize, message: &str| QueryError::Syntax { column: column + 1, message: message.into() };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push((start, Tok::LParen));
                i += 1
            }
            ')' => {
                out.push((start, Tok::RParen));
                i += 1
            }
            ',' => {
                out.push((start, Tok::Comma));
                i += 1
            }
            '*' => {
                out.push((start, Tok::Star));
                i += 1
            }
            '.' => {
                out.push((start, Tok::Dot));
                i += 1
            }
            ':' if chars.get(i + 1) == Some(&'-') => {
                out.push((start, Tok::Implies));
                i += 2
            }
            '\'' | '"' => {
                let close = chars[i + 1..]
                    .iter()
                    .position(|&d| d == c)
                    .ok_or_else(|| err(start, "unterminated string"))?;
                out.push((start, Tok::Str(chars[i + 1..i + 1 + close].iter().collect())));
                i += close + 2;
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let tok: String = chars[start..i].iter().collect();
                let tok = tok.trim_end_matches('.').to_string();
                i = start + tok.chars().count();
                out.push((start, Tok::Number(tok)));
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            }
            _ => return Err(err(start, &format!("unexpected `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |t| t.0) + 1
    }

    fn err(&self, message: impl Into<String>) -> QueryError {
        QueryError::Syntax { column: self.column(), message: message.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), QueryError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected a name")),
        }
    }

    fn term(&mut self) -> Result<Term, QueryError> {
        match self.next() {
            Some(Tok::Ident(s)) if s == "_" => Ok(Term::Anon),
            Some(Tok::Ident(s)) => Ok(Term::Var(s)),
            Some(Tok::Number(s)) | Some(Tok::Str(s)) => Ok(Term::Const(s)),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a variable or constant"))
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, QueryError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            match self.next() {
                Some(Tok::Comma) => {}
                Some(Tok::RParen) => return Ok(args),
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected `,` or `)`"));
                }
            }
        }
    }
}

impl Query {
    pub fn parse(text: &str) -> Result<Query, QueryError> {
        let mut p = Parser { toks: tokenize(text)?, pos: 0, len: text.chars().count() };
        let name = p.ident()?;
        let head = match Aggregate::from_name(&name) {
            Some(agg) => {
                p.expect(Tok::LParen, "`(`")?;
                let var = if agg == Aggregate::Count && p.peek() == Some(&Tok::Star) {
                    p.pos += 1;
                    None
                } else {
                    Some(p.ident()?)
                };
                p.expect(Tok::RParen, "`)`")?;
                Head::Aggregate(agg, var)
            }
            None => {
                let vars = p
                    .args()?
                    .into_iter()
                    .map(|t| match t {
                        Term::Var(v) => Ok(v),
                        _ => Err(QueryError::Syntax { column: 1, message: "head arguments must be variables".into() }),
                    })
                    .collect::<Result<_, _>>()?;
                Head::Project { name, vars }
            }
        };
        p.expect(Tok::Implies, "`:-`")?;
        let mut atoms = Vec::new();
        loop {
            let relation = p.ident()?;
            let args = p.args()?;
            atoms.push(Atom { relation, args });
            match p.next() {
                Some(Tok::Comma) => {}
                Some(Tok::Dot) | None => break,
                _ => {
                    p.pos -= 1;
                    return Err(p.err("expected `,` or end of query"));
                }
            }
        }
        if p.pos < p.toks.len() {
            return Err(p.err("trailing input"));
        }
        let q = Query { head, atoms };
        for v in q.head_vars() {
            if !q.body_vars().contains(&v) {
                return Err(QueryError::Unsafe(v));
            }
        }
        Ok(q)
    }

    fn head_vars(&self) -> Vec<String> {
        match &self.head {
            Head::Project { vars, .. } => vars.clone(),
            Head::Aggregate(_, v) => v.iter().cloned().collect(),
        }
    }

    fn body_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in &self.atoms {
            for t in &a.args {
                if let Term::Var(v) = t {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }

    pub fn is_boolean(&self) -> bool {
        matches!(&self.head, Head::Project { vars, .. } if vars.is_empty())
    }

    /// Checks relation names, arities and constants against a schema.
    pub fn check_schema(&self, schemas: &[RelationSchema]) -> Result<(), QueryError> {
        for a in &self.atoms {
            let s = schemas
                .iter()
                .find(|s| s.name == a.relation)
                .ok_or_else(|| QueryError::UnknownRelation(a.relation.clone()))?;
            if s.attributes.len() != a.args.len() {
                return Err(QueryError::Arity {
                    relation: a.relation.clone(),
                    expected: s.attributes.len(),
                    got: a.args.len(),
                });
            }
            for (t, attr) in a.args.iter().zip(&s.attributes) {
                if let Term::Const(c) = t {
                    if !attr.domain.contains(c) {
                        return Err(QueryError::ConstantNotInDomain {
                            relation: a.relation.clone(),
                            attribute: attr.name.clone(),
                            value: c.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Appends the constant `value` to every atom.
    pub fn with_appended_constant(&self, value: &str) -> Query {
        let mut q = self.clone();
        for a in &mut q.atoms {
            a.args.push(Term::Const(value.to_string()));
        }
        q
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    match t {
        Term::Var(v) => f.write_str(v),
        Term::Anon => f.write_str("_"),
        Term::Const(c) if parse_number(c).is_some() => f.write_str(c),
        Term::Const(c) => write!(f, "'{c}'"),
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.head {
            Head::Project { name, vars } => write!(f, "{name}({})", vars.join(", "))?,
            Head::Aggregate(a, Some(v)) => write!(f, "{}({v})", a.name())?,
            Head::Aggregate(a, None) => write!(f, "{}(*)", a.name())?,
        }
        f.write_str(" :- ")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}(", a.relation)?;
            for (j, t) in a.args.iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write_term(f, t)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

// ------------------------------------------------------------- evaluation

/// A world as bags of rows per relation.
pub type Instance = BTreeMap<String, Vec<Vec<String>>>;

/// Decimal integers and decimals only.
pub fn parse_number(s: &str) -> Option<Number> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if body.contains('.') && frac.is_empty() {
        return None;
    }
    let digits: i128 = format!("{int}{frac}").parse().ok()?;
    let scale = 10i128.checked_pow(frac.len() as u32)?;
    let v = Ratio::new(digits, scale);
    Some(if neg { -v } else { v })
}

pub fn format_number(x: &Number) -> String {
    if x.is_integer() {
        return x.to_integer().to_string();
    }
    let mut d = *x.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", x.numer(), x.denom());
    }
    let places = twos.max(fives);
    let scaled = x * Ratio::from_integer(10i128.pow(places));
    let n = scaled.to_integer();
    let sign = if n < 0 { "-" } else { "" };
    let digits = format!("{:0>width$}", n.unsigned_abs(), width = places as usize + 1);
    let (i, f) = digits.split_at(digits.len() - places as usize);
    format!("{sign}{i}.{f}")
}

/// One answer value. Orders numbers numerically, then tuples element-wise
/// (numerically where both tokens are numbers).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnswerValue {
    Bool(bool),
    Number(Number),
    Tuple(Vec<String>),
}

fn token_cmp(a: &str, b: &str) -> Ordering {
    match (parse_number(a), parse_number(b)) {
        (Some(x), Some(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

impl Ord for AnswerValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use AnswerValue::*;
        match (self, other) {
            (Bool(a), Bool(b)) => a.cmp(b),
            (Number(a), Number(b)) => a.cmp(b),
            (Tuple(a), Tuple(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| token_cmp(x, y))
                .find(|o| o.is_ne())
                .unwrap_or_else(|| a.len().cmp(&b.len())),
            (Bool(_), _) => Ordering::Less,
            (_, Bool(_)) => Ordering::Greater,
            (Number(_), _) => Ordering::Less,
            (_, Number(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for AnswerValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerValue::Bool(b) => write!(f, "{b}"),
            AnswerValue::Number(x) => f.write_str(&format_number(x)),
            AnswerValue::Tuple(t) => f.write_str(&t.join(",")),
        }
    }
}

/// Result of a query on one world.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Evaluation {
    Bool(bool),
    /// Sorted bag of head tuples.
    Bag(Vec<Vec<String>>),
    Scalar(Number),
}

impl Evaluation {
    /// Distinct answer values carried by this evaluation.
    pub fn answers(&self) -> Vec<AnswerValue> {
        match self {
            Evaluation::Bool(b) => vec![AnswerValue::Bool(*b)],
            Evaluation::Scalar(x) => vec![AnswerValue::Number(*x)],
            Evaluation::Bag(rows) => {
                let mut v: Vec<AnswerValue> = rows.iter().cloned().map(AnswerValue::Tuple).collect();
                v.sort();
                v.dedup();
                v
            }
        }
    }
}

/// All satisfying bindings of the body, as a bag.
fn bindings(q: &Query, world: &Instance) -> Result<Vec<BTreeMap<String, String>>, QueryError> {
    let empty = Vec::new();
    let mut rels = Vec::with_capacity(q.atoms.len());
    for a in &q.atoms {
        let rows = world.get(&a.relation).unwrap_or(&empty);
        if let Some(r) = rows.first() {
            if r.len() != a.args.len() {
                return Err(QueryError::Arity { relation: a.relation.clone(), expected: r.len(), got: a.args.len() });
            }
        }
        rels.push(rows);
    }
    let mut out = Vec::new();
    let mut binding = BTreeMap::new();
    join(q, &rels, 0, &mut binding, &mut out);
    Ok(out)
}

fn join(
    q: &Query,
    rels: &[&Vec<Vec<String>>],
    i: usize,
    binding: &mut BTreeMap<String, String>,
    out: &mut Vec<BTreeMap<String, String>>,
) {
    let Some(atom) = q.atoms.get(i) else {
        out.push(binding.clone());
        return;
    };
    for row in rels[i] {
        let mut added = Vec::new();
        let mut ok = true;
        for (t, v) in atom.args.iter().zip(row) {
            match t {
                Term::Anon => {}
                Term::Const(c) => ok = c == v,
                Term::Var(x) => match binding.get(x) {
                    Some(b) => ok = b == v,
                    None => {
                        binding.insert(x.clone(), v.clone());
                        added.push(x.clone());
                    }
                },
            }
            if !ok {
                break;
            }
        }
        if ok {
            join(q, rels, i + 1, binding, out);
        }
        for x in added {
            binding.remove(&x);
        }
    }
}

pub fn evaluate_on_world(q: &Query, world: &Instance) -> Result<Evaluation, QueryError> {
    let bs = bindings(q, world)?;
    match &q.head {
        Head::Project { vars, .. } if vars.is_empty() => Ok(Evaluation::Bool(!bs.is_empty())),
        Head::Project { vars, .. } => {
            let mut rows: Vec<Vec<String>> = bs.iter().map(|b| vars.iter().map(|v| b[v].clone()).collect()).collect();
            rows.sort_by_key(|r| AnswerValue::Tuple(r.clone()));
            Ok(Evaluation::Bag(rows))
        }
        Head::Aggregate(Aggregate::Count, _) => Ok(Evaluation::Scalar(Ratio::from_integer(bs.len() as i128))),
        Head::Aggregate(agg, var) => {
            let var = var.as_ref().expect("only count takes `*`");
            let nums = bs
                .iter()
                .map(|b| parse_number(&b[var]).ok_or_else(|| QueryError::NonNumericAggregate(b[var].clone())))
                .collect::<Result<Vec<Number>, _>>()?;
            let sum = || {
                nums.iter().try_fold(Number::zero(), |acc, x| acc.checked_add(x)).ok_or(QueryError::Overflow)
            };
            let value = match agg {
                Aggregate::Sum => sum()?,
                Aggregate::Avg if nums.is_empty() => return Err(QueryError::EmptyAggregate("avg")),
                Aggregate::Avg => {
                    let n = Ratio::from_integer(nums.len() as i128);
                    sum()?.checked_mul(&n.recip()).ok_or(QueryError::Overflow)?
                }
                Aggregate::Min => *nums.iter().min().ok_or(QueryError::EmptyAggregate("min"))?,
                Aggregate::Max => *nums.iter().max().ok_or(QueryError::EmptyAggregate("max"))?,
                Aggregate::Count => unreachable!(),
            };
            Ok(Evaluation::Scalar(value))
        }
    }
}

// ------------------------------------------------------ preferred answers

#[derive(Clone, Debug, PartialEq)]
pub struct ClassAnswer {
    pub k: ClassVector,
    pub probability: f64,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnswerSet {
    pub per_class: Vec<ClassAnswer>,
    /// Distinct answers with summed class probabilities, sorted by value.
    pub merged: Vec<(AnswerValue, f64)>,
}

impl AnswerSet {
    /// Highest merged probability; ties go to the smallest value.
    pub fn most_probable(&self) -> Option<&(AnswerValue, f64)> {
        let best = self.merged.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
        self.merged.iter().find(|a| tie(a.1, best))
    }
}

fn merge(entries: impl IntoIterator<Item = (AnswerValue, f64)>) -> Vec<(AnswerValue, f64)> {
    let mut m: BTreeMap<AnswerValue, f64> = BTreeMap::new();
    for (a, p) in entries {
        *m.entry(a).or_insert(0.0) += p;
    }
    m.into_iter().collect()
}

/// Materializes a world of a single relation.
pub fn instance_of(relation: &str, support: &Support, world: &[usize]) -> Instance {
    let rows = world.iter().zip(&support.blocks).map(|(&c, b)| support.rows[b[c].0].clone()).collect();
    BTreeMap::from([(relation.to_string(), rows)])
}

/// Evaluates `q` on one representative world per class and merges equal
/// answers by summing class probabilities.
pub fn preferred_answers(
    q: &Query,
    classes: &[(ClassVector, f64)],
    relation: &str,
    support: &Support,
) -> Result<AnswerSet, QueryError> {
    if let Some(a) = q.atoms.iter().find(|a| a.relation != relation) {
        return Err(QueryError::OtherRelation(a.relation.clone()));
    }
    let mut per_class = Vec::with_capacity(classes.len());
    for (k, p) in classes {
        let w = representative_world(support, k).ok_or_else(|| QueryError::NotAdmissible(k.clone()))?;
        let evaluation = evaluate_on_world(q, &instance_of(relation, support, &w))?;
        per_class.push(ClassAnswer { k: k.clone(), probability: *p, evaluation });
    }
    let merged = merge(per_class.iter().flat_map(|c| c.evaluation.answers().into_iter().map(|a| (a, c.probability))));
    Ok(AnswerSet { per_class, merged })
}

/// Answer distribution over every world of a (multi-relation) BID.
pub fn answers_by_worlds(q: &Query, bid: &Bid, cap: u128) -> Result<Vec<(AnswerValue, f64)>, QueryError> {
    let count = bid.world_count();
    if count > cap {
        return Err(WorldError::CapExceeded { count, cap }.into());
    }
    let blocks: Vec<(&str, &crate::bid::Block)> =
        bid.relations.iter().flat_map(|r| r.blocks.iter().map(move |b| (r.name.as_str(), b))).collect();
    let mut entries = Vec::new();
    let mut choice = vec![0usize; blocks.len()];
    loop {
        let mut world: Instance = bid.relations.iter().map(|r| (r.name.clone(), Vec::new())).collect();
        let mut p = 1.0;
        for (&(rel, b), &c) in blocks.iter().zip(&choice) {
            world.get_mut(rel).unwrap().push(b.tuples[c].values.clone());
            p *= b.tuples[c].prob;
        }
        for a in evaluate_on_world(q, &world)?.answers() {
            entries.push((a, p));
        }
        let mut i = blocks.len();
        loop {
            if i == 0 {
                return Ok(merge(entries));
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < blocks[i].1.tuples.len() {
                break;
            }
            choice[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(rows: &[[&str; 3]]) -> Instance {
        BTreeMap::from([("R".to_string(), rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect())])
    }

    #[test]
    fn parses_and_prints() {
        let q = Query::parse("ans(x, y) :- R(x, 0, z), S(z, y)").unwrap();
        assert_eq!(q.atoms.len(), 2);
        assert_eq!(q.atoms[0].args[1], Term::Const("0".into()));
        assert_eq!(q.to_string(), "ans(x, y) :- R(x, 0, z), S(z, y)");
        let q = Query::parse("count(*) :- R(_, 'a b', -1.5).").unwrap();
        assert_eq!(q.to_string(), "count(*) :- R(_, 'a b', -1.5)");
        assert!(Query::parse("ans() :- R(x,y)").unwrap().is_boolean());
        assert!(matches!(Query::parse("ans(w) :- R(x)"), Err(QueryError::Unsafe(v)) if v == "w"));
        assert!(matches!(Query::parse("ans(x) :- R(x"), Err(QueryError::Syntax { .. })));
        let r = Query::parse("ans() :- R(x, y), S(y)").unwrap().with_appended_constant("1");
        assert_eq!(r.to_string(), "ans() :- R(x, y, 1), S(y, 1)");
    }

    #[test]
    fn sum_on_running_world() {
        let w = world(&[
            ["a", "0", "0"],
            ["a", "0", "0"],
            ["a", "1", "0"],
            ["a", "1", "0"],
            ["a", "1", "0"],
            ["a", "1", "1"],
            ["a", "1", "0"],
            ["a", "1", "2"],
        ]);
        let q = Query::parse("sum(z) :- R(x, y, z)").unwrap();
        assert_eq!(evaluate_on_world(&q, &w).unwrap(), Evaluation::Scalar(Ratio::from_integer(3)));
        let q = Query::parse("count(*) :- R(x, y, z)").unwrap();
        assert_eq!(evaluate_on_world(&q, &w).unwrap(), Evaluation::Scalar(Ratio::from_integer(8)));
        let q = Query::parse("avg(z) :- R(x, 1, z)").unwrap();
        assert_eq!(evaluate_on_world(&q, &w).unwrap(), Evaluation::Scalar(Ratio::new(1, 2)));
        let q = Query::parse("ans(y) :- R(x, y, 2)").unwrap();
        assert_eq!(evaluate_on_world(&q, &w).unwrap(), Evaluation::Bag(vec![vec!["1".into()]]));
    }

    #[test]
    fn empty_bags_and_bad_tokens() {
        let w = world(&[["a", "0", "x"]]);
        let q = |s: &str| Query::parse(s).unwrap();
        let zero = Evaluation::Scalar(Number::zero());
        assert_eq!(evaluate_on_world(&q("sum(z) :- R(x, 1, z)"), &w).unwrap(), zero);
        assert_eq!(evaluate_on_world(&q("count(z) :- R(x, 1, z)"), &w).unwrap(), zero);
        assert_eq!(evaluate_on_world(&q("avg(z) :- R(x, 1, z)"), &w), Err(QueryError::EmptyAggregate("avg")));
        assert_eq!(evaluate_on_world(&q("max(z) :- R(x, 1, z)"), &w), Err(QueryError::EmptyAggregate("max")));
        assert_eq!(
            evaluate_on_world(&q("sum(z) :- R(x, 0, z)"), &w),
            Err(QueryError::NonNumericAggregate("x".into()))
        );
        assert_eq!(evaluate_on_world(&q("ans() :- R(x, 1, z)"), &w).unwrap(), Evaluation::Bool(false));
    }

    #[test]
    fn number_formatting() {
        assert_eq!(parse_number("1.50"), Some(Ratio::new(3, 2)));
        assert_eq!(parse_number("1e3"), None);
        assert_eq!(parse_number("1."), None);
        assert_eq!(format_number(&Ratio::new(-3, 8)), "-0.375");
        assert_eq!(format_number(&Ratio::new(7, 3)), "7/3");
        assert_eq!(format_number(&Ratio::from_integer(5)), "5");
    }

    #[test]
    fn answer_order_is_numeric() {
        let mut v = [
            AnswerValue::Tuple(vec!["10".into()]),
            AnswerValue::Tuple(vec!["9".into()]),
            AnswerValue::Tuple(vec!["b".into()]),
        ];
        v.sort();
        assert_eq!(v[0], AnswerValue::Tuple(vec!["9".into()]));
    }
}
