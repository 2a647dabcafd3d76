//! Observed relations with `na` cells, their schemas, and binding to
//! per-relation missingness graphs.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::mg::{MgError, MissingnessGraph, VariableKind, NA};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Never shows `na`.
    FullyObserved,
    /// May show `na`.
    PartiallyObserved,
}

impl Role {
    pub fn short(self) -> &'static str {
        match self {
            Role::FullyObserved => "o",
            Role::PartiallyObserved => "m",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeDecl {
    pub name: String,
    pub role: Role,
    pub domain: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: String,
    pub attributes: Vec<AttributeDecl>,
}

impl RelationSchema {
    pub fn attribute_names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    Value(String),
    Na,
}

impl Cell {
    pub fn as_str(&self) -> &str {
        match self {
            Cell::Value(v) => v,
            Cell::Na => NA,
        }
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Cell::Na)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedTuple {
    pub tid: String,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedRelation {
    pub schema: RelationSchema,
    pub tuples: Vec<ObservedTuple>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedDatabase {
    pub relations: Vec<ObservedRelation>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservedError {
    #[error("schema line {line}: {message}")]
    SchemaSyntax { line: usize, message: String },
    #[error("relation `{relation}`: {message}")]
    SchemaMismatch { relation: String, message: String },
    #[error("relation `{relation}` line {line} tid `{tid}`: value `{value}` is not in the domain of `{attribute}`")]
    DomainViolation { relation: String, line: u64, tid: String, attribute: String, value: String },
    #[error("relation `{relation}` line {line} tid `{tid}`: `na` in fully observed attribute `{attribute}`")]
    NaInObservedColumn { relation: String, line: u64, tid: String, attribute: String },
    #[error("relation `{relation}` line {line}: duplicate tid `{tid}`")]
    DuplicateTid { relation: String, line: u64, tid: String },
    #[error("relation `{relation}` line {line}: {message}")]
    Csv { relation: String, line: u64, message: String },
    #[error("no data given for relation `{0}`")]
    MissingData(String),
    #[error("data given for undeclared relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BindError {
    #[error("relation `{relation}`, attribute `{attribute}`: {reason}")]
    AttributeMgMismatch { relation: String, attribute: String, reason: String },
    #[error("no missingness graph governs relation `{0}`")]
    MissingMg(String),
    #[error("more than one missingness graph governs relation `{0}`")]
    DuplicateMg(String),
    #[error("missingness graph for relation `{relation}` is invalid: {source}")]
    InvalidMg { relation: String, source: MgError },
}

/// Parses `relation <name>` blocks followed by
/// `attr <name> role=<o|m> domain=<v1,...>` lines.
pub fn parse_schema(text: &str) -> Result<Vec<RelationSchema>, ObservedError> {
    let mut out: Vec<RelationSchema> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| ObservedError::SchemaSyntax { line, message };
        let mut parts = content.split_whitespace();
        match parts.next() {
            Some("relation") => {
                let name = parts.next().ok_or_else(|| err("missing relation name".into()))?;
                if out.iter().any(|r| r.name == name) {
                    return Err(err(format!("relation `{name}` declared twice")));
                }
                out.push(RelationSchema { name: name.to_string(), attributes: Vec::new() });
            }
            Some("attr") => {
                let rel = out
                    .last_mut()
                    .ok_or_else(|| err("`attr` before any `relation`".into()))?;
                let name = parts.next().ok_or_else(|| err("missing attribute name".into()))?;
                let mut role = None;
                let mut domain = None;
                for p in parts {
                    match p.split_once('=') {
                        Some(("role", "o")) => role = Some(Role::FullyObserved),
                        Some(("role", "m")) => role = Some(Role::PartiallyObserved),
                        Some(("domain", d)) => {
                            domain = Some(d.split(',').map(|v| v.trim().to_string()).collect::<Vec<_>>())
                        }
                        _ => return Err(err(format!("unexpected `{p}`"))),
                    }
                }
                let role = role.ok_or_else(|| err("role must be `o` or `m`".into()))?;
                let domain = domain.ok_or_else(|| err("missing domain=".into()))?;
                let mut seen = HashSet::new();
                if domain.is_empty() || domain.iter().any(|v| v.is_empty() || v == NA || !seen.insert(v)) {
                    return Err(err(format!(
                        "domain of `{name}` must be non-empty, duplicate-free and must not contain `na`"
                    )));
                }
                if rel.attributes.iter().any(|a| a.name == name) || name == "tid" {
                    return Err(err(format!("attribute `{name}` declared twice in `{}`", rel.name)));
                }
                rel.attributes.push(AttributeDecl { name: name.to_string(), role, domain });
            }
            Some(other) => return Err(err(format!("unknown directive `{other}`"))),
            None => {}
        }
    }
    Ok(out)
}

pub fn schema_to_text(schemas: &[RelationSchema]) -> String {
    let mut out = String::new();
    for s in schemas {
        out.push_str(&format!("relation {}\n", s.name));
        for a in &s.attributes {
            out.push_str(&format!("attr {} role={} domain={}\n", a.name, a.role.short(), a.domain.join(",")));
        }
    }
    out
}

/// Parses one CSV body (`tid,<attr1>,...`) against its schema.
pub fn parse_relation(
    schema: &RelationSchema,
    csv_text: &str,
    seen_tids: &mut HashSet<String>,
) -> Result<ObservedRelation, ObservedError> {
    let relation = schema.name.clone();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| ObservedError::Csv {
        relation: relation.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    let expected: Vec<&str> =
        std::iter::once("tid").chain(schema.attributes.iter().map(|a| a.name.as_str())).collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(ObservedError::SchemaMismatch {
            relation,
            message: format!("header `{}` does not match `{}`", got.join(","), expected.join(",")),
        });
    }
    let mut tuples = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ObservedError::Csv {
            relation: relation.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let tid = rec[0].to_string();
        if tid.is_empty() {
            return Err(ObservedError::Csv { relation, line, message: "empty tid".into() });
        }
        if !seen_tids.insert(tid.clone()) {
            return Err(ObservedError::DuplicateTid { relation, line, tid });
        }
        let mut cells = Vec::with_capacity(schema.attributes.len());
        for (attr, raw) in schema.attributes.iter().zip(rec.iter().skip(1)) {
            if raw == NA {
                if attr.role == Role::FullyObserved {
                    return Err(ObservedError::NaInObservedColumn {
                        relation,
                        line,
                        tid,
                        attribute: attr.name.clone(),
                    });
                }
                cells.push(Cell::Na);
            } else if attr.domain.iter().any(|v| v == raw) {
                cells.push(Cell::Value(raw.to_string()));
            } else {
                return Err(ObservedError::DomainViolation {
                    relation,
                    line,
                    tid,
                    attribute: attr.name.clone(),
                    value: raw.to_string(),
                });
            }
        }
        tuples.push(ObservedTuple { tid, cells });
    }
    Ok(ObservedRelation { schema: schema.clone(), tuples })
}

/// Loads a database: one CSV text per declared relation, keyed by relation name.
pub fn load_observed(
    schema_text: &str,
    csv_texts: &[(&str, &str)],
) -> Result<ObservedDatabase, ObservedError> {
    let schemas = parse_schema(schema_text)?;
    let by_name: HashMap<&str, &str> = csv_texts.iter().copied().collect();
    for (name, _) in csv_texts {
        if !schemas.iter().any(|s| s.name == *name) {
            return Err(ObservedError::UnknownRelation(name.to_string()));
        }
    }
    let mut tids = HashSet::new();
    let relations = schemas
        .iter()
        .map(|s| {
            let text = by_name
                .get(s.name.as_str())
                .ok_or_else(|| ObservedError::MissingData(s.name.clone()))?;
            parse_relation(s, text, &mut tids)
        })
        .collect::<Result<_, _>>()?;
    Ok(ObservedDatabase { relations })
}

impl ObservedRelation {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["tid".to_string()];
        header.extend(self.schema.attribute_names());
        w.write_record(&header).expect("in-memory write");
        for t in &self.tuples {
            let mut rec = vec![t.tid.as_str()];
            rec.extend(t.cells.iter().map(Cell::as_str));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

impl ObservedDatabase {
    pub fn relation(&self, name: &str) -> Option<&ObservedRelation> {
        self.relations.iter().find(|r| r.schema.name == name)
    }

    pub fn schemas(&self) -> Vec<RelationSchema> {
        self.relations.iter().map(|r| r.schema.clone()).collect()
    }
}

/// An observed relation paired with the graph that governs it.
#[derive(Clone, Debug)]
pub struct BoundRelation {
    pub observed: ObservedRelation,
    pub mg: MissingnessGraph,
}

#[derive(Clone, Debug)]
pub struct BoundDatabase {
    pub relations: Vec<BoundRelation>,
}

/// Pairs each relation with its graph and checks that attributes, roles
/// and domains agree. Graphs are validated here if they are not already.
pub fn bind_mg(db: &ObservedDatabase, mgs: Vec<MissingnessGraph>) -> Result<BoundDatabase, BindError> {
    let single = db.relations.len() == 1 && mgs.len() == 1;
    let mut pool: Vec<Option<MissingnessGraph>> = mgs.into_iter().map(Some).collect();
    let mut relations = Vec::new();
    for rel in &db.relations {
        let name = &rel.schema.name;
        let matches: Vec<usize> = pool
            .iter()
            .enumerate()
            .filter(|(_, m)| {
                m.as_ref().is_some_and(|m| m.relation() == Some(name.as_str()) || (single && m.relation().is_none()))
            })
            .map(|(i, _)| i)
            .collect();
        let idx = match matches.as_slice() {
            [] => return Err(BindError::MissingMg(name.clone())),
            [i] => *i,
            _ => return Err(BindError::DuplicateMg(name.clone())),
        };
        let mut mg = pool[idx].take().unwrap();
        if !mg.is_validated() {
            mg = mg
                .validated()
                .map_err(|source| BindError::InvalidMg { relation: name.clone(), source })?;
        }
        check_attributes(&rel.schema, &mg)?;
        relations.push(BoundRelation { observed: rel.clone(), mg });
    }
    Ok(BoundDatabase { relations })
}

fn check_attributes(schema: &RelationSchema, mg: &MissingnessGraph) -> Result<(), BindError> {
    let mismatch = |attribute: &str, reason: String| BindError::AttributeMgMismatch {
        relation: schema.name.clone(),
        attribute: attribute.to_string(),
        reason,
    };
    for attr in &schema.attributes {
        let var = mg
            .variable(&attr.name)
            .ok_or_else(|| mismatch(&attr.name, "no such variable in the missingness graph".into()))?;
        let want = match attr.role {
            Role::FullyObserved => VariableKind::FullyObserved,
            Role::PartiallyObserved => VariableKind::Underlying,
        };
        if var.kind != want {
            return Err(mismatch(
                &attr.name,
                format!("schema role `{}` but graph kind `{}`", attr.role.short(), var.kind.short()),
            ));
        }
        let a: HashSet<&String> = attr.domain.iter().collect();
        let b: HashSet<&String> = var.domain.iter().collect();
        if a != b {
            return Err(mismatch(
                &attr.name,
                format!(
                    "schema domain {{{}}} differs from graph domain {{{}}}",
                    attr.domain.join(","),
                    var.domain.join(",")
                ),
            ));
        }
    }
    for v in mg.attributes() {
        if !schema.attributes.iter().any(|a| a.name == v.name) {
            return Err(mismatch(&v.name, "graph variable has no attribute in the schema".into()));
        }
    }
    Ok(())
}
