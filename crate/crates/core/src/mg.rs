//! Missingness graphs: Bayesian networks over underlying (`X`), fully
//! observed, indicator (`I_X`) and star (`X*`) variables, with exact
//! inference by enumeration.
//!
//! Every `kind=m` variable `X` implicitly brings an indicator `I_X` with
//! domain `{0,1}` and a star variable `X*` whose domain is `dom(X) ∪ {na}`.
//! The star CPT is never taken from the input; it is derived so that
//! `X* = na` exactly when `I_X = 1` and `X* = X` exactly when `I_X = 0`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::tolerance::PROB_SUM_TOL;

/// The missing-value token. It never belongs to a declared domain.
pub const NA: &str = "na";

/// Default cap on the size of the full assignment space.
pub const DEFAULT_ASSIGNMENT_CAP: u128 = 10_000_000;

pub fn star_name(underlying: &str) -> String {
    format!("{underlying}*")
}

pub fn indicator_name(underlying: &str) -> String {
    format!("I_{underlying}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VariableKind {
    /// `X^m`: the true value of an attribute that may be missing.
    Underlying,
    /// `X^o`: an attribute that is never missing.
    FullyObserved,
    /// `I^X`: 1 when `X` is missing.
    Indicator,
    /// `X^*`: what is recorded, either the value of `X` or `na`.
    Star,
}

impl VariableKind {
    pub fn short(self) -> &'static str {
        match self {
            VariableKind::Underlying => "m",
            VariableKind::FullyObserved => "o",
            VariableKind::Indicator => "indicator",
            VariableKind::Star => "star",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VariableKind,
    pub domain: Vec<String>,
    /// For star and indicator variables, the underlying variable they belong to.
    pub partner: Option<String>,
}

impl Variable {
    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == value)
    }
}

/// A conditional probability table stored densely: one row per parent
/// assignment in mixed-radix order (first parent most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub child: usize,
    pub parents: Vec<usize>,
    pub rows: Vec<Option<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticCode {
    Cycle,
    StarNotSink,
    StarParents,
    MissingCpt,
    MissingRow,
    RowSum,
    NegativeProbability,
    StarCptViolation,
    AssignmentSpaceExceeded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MgError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("value `{value}` is not in the domain of `{variable}`")]
    ValueNotInDomain { variable: String, value: String },
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("domain of `{0}` contains the reserved token `na` or a duplicate value")]
    BadDomain(String),
    #[error("CPT row for `{variable}` given twice ({row})")]
    DuplicateRow { variable: String, row: String },
    #[error("assignment does not assign variable `{0}`")]
    MissingAssignment(String),
    #[error("evidence has probability zero")]
    ZeroEvidence,
    #[error("assignments disagree on `{0}`")]
    OverlappingAssignment(String),
    #[error("missingness graph is not validated")]
    NotValidated,
    #[error("invalid missingness graph: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// A (possibly partial) assignment of value tokens to variable names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment(BTreeMap<String, String>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: impl Into<String>, value: impl Into<String>) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: impl Into<String>, value: impl Into<String>) {
        self.0.insert(var.into(), value.into());
    }

    pub fn get(&self, var: &str) -> Option<&str> {
        self.0.get(var).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Union of two assignments; fails if they give a variable different values.
    pub fn union(&self, other: &Assignment) -> Result<Assignment, MgError> {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            match out.get(k) {
                Some(existing) if existing != v => {
                    return Err(MgError::OverlappingAssignment(k.to_string()))
                }
                _ => out.set(k, v),
            }
        }
        Ok(out)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

/// Child, parent values, distribution.
type PendingRow = (String, Vec<(String, String)>, Vec<(String, f64)>);

/// Incremental construction of a [`MissingnessGraph`]; used by the text
/// parser and by code that generates graphs.
#[derive(Debug, Default)]
pub struct MgBuilder {
    relation: Option<String>,
    vars: Vec<Variable>,
    index: HashMap<String, usize>,
    parents: HashMap<String, Vec<String>>,
    rows: Vec<PendingRow>,
}

impl MgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn relation(&mut self, name: impl Into<String>) -> &mut Self {
        self.relation = Some(name.into());
        self
    }

    fn push_var(&mut self, var: Variable) -> Result<(), MgError> {
        if self.index.contains_key(&var.name) {
            return Err(MgError::DuplicateVariable(var.name));
        }
        self.index.insert(var.name.clone(), self.vars.len());
        self.vars.push(var);
        Ok(())
    }

    /// Declares an attribute variable. `missing = true` declares an
    /// underlying variable together with its indicator and star partners.
    pub fn var<S: AsRef<str>>(
        &mut self,
        name: &str,
        missing: bool,
        domain: &[S],
    ) -> Result<&mut Self, MgError> {
        let domain: Vec<String> = domain.iter().map(|s| s.as_ref().to_string()).collect();
        if domain.is_empty() {
            return Err(MgError::EmptyDomain(name.to_string()));
        }
        let mut seen = std::collections::HashSet::new();
        if domain.iter().any(|v| v == NA || !seen.insert(v.clone())) {
            return Err(MgError::BadDomain(name.to_string()));
        }
        if !missing {
            self.push_var(Variable {
                name: name.to_string(),
                kind: VariableKind::FullyObserved,
                domain,
                partner: None,
            })?;
            return Ok(self);
        }
        let mut star_domain = domain.clone();
        star_domain.push(NA.to_string());
        self.push_var(Variable {
            name: name.to_string(),
            kind: VariableKind::Underlying,
            domain,
            partner: None,
        })?;
        self.push_var(Variable {
            name: indicator_name(name),
            kind: VariableKind::Indicator,
            domain: vec!["0".into(), "1".into()],
            partner: Some(name.to_string()),
        })?;
        self.push_var(Variable {
            name: star_name(name),
            kind: VariableKind::Star,
            domain: star_domain,
            partner: Some(name.to_string()),
        })?;
        Ok(self)
    }

    pub fn parents<S: AsRef<str>>(&mut self, child: &str, parents: &[S]) -> &mut Self {
        self.parents.insert(
            child.to_string(),
            parents.iter().map(|s| s.as_ref().to_string()).collect(),
        );
        self
    }

    /// Adds one CPT row: `condition` assigns every parent, `probs` gives the
    /// probability of each child value (omitted values default to 0).
    pub fn cpt_row<A: AsRef<str>, B: AsRef<str>, C: AsRef<str>>(
        &mut self,
        child: &str,
        condition: &[(A, B)],
        probs: &[(C, f64)],
    ) -> &mut Self {
        self.rows.push((
            child.to_string(),
            condition
                .iter()
                .map(|(a, b)| (a.as_ref().to_string(), b.as_ref().to_string()))
                .collect(),
            probs.iter().map(|(c, p)| (c.as_ref().to_string(), *p)).collect(),
        ));
        self
    }

    pub fn build(&self) -> Result<MissingnessGraph, MgError> {
        let vars = self.vars.clone();
        let index = self.index.clone();
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| MgError::UnknownVariable(name.to_string()))
        };

        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); vars.len()];
        let mut declared_star_parents: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, v) in vars.iter().enumerate() {
            if v.kind == VariableKind::Star {
                let u = lookup(v.partner.as_deref().unwrap())?;
                let ind = lookup(&indicator_name(v.partner.as_deref().unwrap()))?;
                parents[i] = vec![u, ind];
            }
        }
        // Declaration order keeps the output deterministic.
        let mut declared: Vec<(&String, &Vec<String>)> = self.parents.iter().collect();
        declared.sort_by_key(|(child, _)| index.get(*child).copied().unwrap_or(usize::MAX));
        for (child, ps) in declared {
            let c = lookup(child)?;
            let ps: Vec<usize> = ps.iter().map(|p| lookup(p)).collect::<Result<_, _>>()?;
            if vars[c].kind == VariableKind::Star {
                declared_star_parents.push((c, ps));
            } else {
                parents[c] = ps;
            }
        }

        let mut cpts: Vec<Option<Cpt>> = vec![None; vars.len()];
        let mut star_rows: Vec<(usize, Vec<usize>, Vec<f64>)> = Vec::new();
        for (child, cond, probs) in &self.rows {
            let c = lookup(child)?;
            let child_var = &vars[c];
            let mut dist = vec![0.0; child_var.domain.len()];
            for (value, p) in probs {
                let vi = child_var.value_index(value).ok_or_else(|| MgError::ValueNotInDomain {
                    variable: child.clone(),
                    value: value.clone(),
                })?;
                dist[vi] = *p;
            }
            let cond_idx: Vec<(usize, usize)> = cond
                .iter()
                .map(|(p, v)| {
                    let pi = lookup(p)?;
                    let vi = vars[pi].value_index(v).ok_or_else(|| MgError::ValueNotInDomain {
                        variable: p.clone(),
                        value: v.clone(),
                    })?;
                    Ok((pi, vi))
                })
                .collect::<Result<_, MgError>>()?;
            if child_var.kind == VariableKind::Star {
                let mut vals = vec![usize::MAX; 2];
                for (pi, vi) in &cond_idx {
                    if let Some(pos) = parents[c].iter().position(|x| x == pi) {
                        vals[pos] = *vi;
                    } else {
                        return Err(MgError::Syntax {
                            line: 0,
                            message: format!(
                                "star CPT row for `{child}` conditions on non-parent `{}`",
                                vars[*pi].name
                            ),
                        });
                    }
                }
                if vals.contains(&usize::MAX) {
                    return Err(MgError::Syntax {
                        line: 0,
                        message: format!("star CPT row for `{child}` must assign both parents"),
                    });
                }
                star_rows.push((c, vals, dist));
                continue;
            }
            let ps = &parents[c];
            if cond_idx.len() != ps.len() || cond_idx.iter().any(|(pi, _)| !ps.contains(pi)) {
                return Err(MgError::Syntax {
                    line: 0,
                    message: format!(
                        "CPT row for `{child}` must assign exactly its parents ({})",
                        ps.iter().map(|&p| vars[p].name.as_str()).collect::<Vec<_>>().join(",")
                    ),
                });
            }
            let cpt = cpts[c].get_or_insert_with(|| {
                let n_rows = ps.iter().map(|&p| vars[p].domain.len()).product();
                Cpt { child: c, parents: ps.clone(), rows: vec![None; n_rows] }
            });
            let mut row = 0usize;
            for &p in ps {
                let vi = cond_idx.iter().find(|(pi, _)| *pi == p).unwrap().1;
                row = row * vars[p].domain.len() + vi;
            }
            if cpt.rows[row].is_some() {
                let desc = cond
                    .iter()
                    .map(|(a, b)| format!("{}={}", a.as_ref() as &str, b.as_ref() as &str))
                    .collect::<Vec<_>>()
                    .join(",");
                return Err(MgError::DuplicateRow { variable: child.clone(), row: desc });
            }
            cpt.rows[row] = Some(dist);
        }

        Ok(MissingnessGraph {
            relation: self.relation.clone(),
            vars,
            index,
            parents,
            cpts,
            declared_star_parents,
            star_rows,
            topo: Vec::new(),
            assignment_cap: DEFAULT_ASSIGNMENT_CAP,
            validated: false,
        })
    }
}

/// A missingness graph governing one relation.
///
/// Build with [`MgBuilder`] or [`MissingnessGraph::parse`], then call
/// [`MissingnessGraph::validated`] before running inference.
#[derive(Clone, Debug)]
pub struct MissingnessGraph {
    relation: Option<String>,
    vars: Vec<Variable>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Option<Cpt>>,
    declared_star_parents: Vec<(usize, Vec<usize>)>,
    star_rows: Vec<(usize, Vec<usize>, Vec<f64>)>,
    topo: Vec<usize>,
    assignment_cap: u128,
    validated: bool,
}

impl MissingnessGraph {
    pub fn relation(&self) -> Option<&str> {
        self.relation.as_deref()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.index.get(name).map(|&i| &self.vars[i])
    }

    pub fn parents_of(&self, name: &str) -> Option<Vec<&str>> {
        let i = *self.index.get(name)?;
        Some(self.parents[i].iter().map(|&p| self.vars[p].name.as_str()).collect())
    }

    pub fn cpt(&self, name: &str) -> Option<&Cpt> {
        self.cpts[*self.index.get(name)?].as_ref()
    }

    /// Attribute-level variables (`kind=m` and `kind=o`) in declaration order.
    pub fn attributes(&self) -> impl Iterator<Item = &Variable> {
        self.vars
            .iter()
            .filter(|v| matches!(v.kind, VariableKind::Underlying | VariableKind::FullyObserved))
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn with_assignment_cap(mut self, cap: u128) -> Self {
        self.assignment_cap = cap;
        self.validated = false;
        self
    }

    /// Size of the full assignment space (product of all domain sizes).
    pub fn assignment_space(&self) -> u128 {
        self.vars
            .iter()
            .fold(1u128, |acc, v| acc.saturating_mul(v.domain.len() as u128))
    }

    fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.vars.len();
        let mut indeg = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                indeg[c] += 1;
                children[p].push(c);
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Structural and numerical checks. An empty result means the graph is
    /// well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |code, message: String| out.push(Diagnostic { code, message });

        if self.topological_order().is_none() {
            diag(DiagnosticCode::Cycle, "parent/child edges contain a cycle".into());
        }
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                if self.vars[p].kind == VariableKind::Star {
                    diag(
                        DiagnosticCode::StarNotSink,
                        format!(
                            "Star variable is not a sink: `{}` is a parent of `{}`",
                            self.vars[p].name, self.vars[c].name
                        ),
                    );
                }
            }
        }
        for (star, declared) in &self.declared_star_parents {
            if declared != &self.parents[*star] {
                diag(
                    DiagnosticCode::StarParents,
                    format!(
                        "star variable `{}` must have exactly the parents {}",
                        self.vars[*star].name,
                        self.parents[*star]
                            .iter()
                            .map(|&p| self.vars[p].name.as_str())
                            .collect::<Vec<_>>()
                            .join(",")
                    ),
                );
            }
        }
        for (star, vals, dist) in &self.star_rows {
            let expected = self.star_distribution(*star, vals[0], vals[1]);
            if dist.iter().zip(&expected).any(|(a, b)| (a - b).abs() > PROB_SUM_TOL) {
                let u = &self.vars[self.parents[*star][0]];
                diag(
                    DiagnosticCode::StarCptViolation,
                    format!(
                        "CPT row of `{}` given {}={}, {}={} violates the star determinism conditions",
                        self.vars[*star].name,
                        u.name,
                        u.domain[vals[0]],
                        self.vars[self.parents[*star][1]].name,
                        vals[1]
                    ),
                );
            }
        }
        for (i, v) in self.vars.iter().enumerate() {
            if v.kind == VariableKind::Star {
                continue;
            }
            let Some(cpt) = &self.cpts[i] else {
                diag(DiagnosticCode::MissingCpt, format!("no CPT for `{}`", v.name));
                continue;
            };
            for (r, row) in cpt.rows.iter().enumerate() {
                let Some(row) = row else {
                    diag(
                        DiagnosticCode::MissingRow,
                        format!("CPT of `{}` lacks row {}", v.name, self.describe_row(cpt, r)),
                    );
                    continue;
                };
                if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                    diag(
                        DiagnosticCode::NegativeProbability,
                        format!("CPT of `{}` row {} has a negative entry", v.name, self.describe_row(cpt, r)),
                    );
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    diag(
                        DiagnosticCode::RowSum,
                        format!(
                            "row sum ≠ 1 in CPT of `{}` row {} (sum {sum})",
                            v.name,
                            self.describe_row(cpt, r)
                        ),
                    );
                }
            }
        }
        if self.assignment_space() > self.assignment_cap {
            diag(
                DiagnosticCode::AssignmentSpaceExceeded,
                format!(
                    "full assignment space {} exceeds the cap {}",
                    self.assignment_space(),
                    self.assignment_cap
                ),
            );
        }
        out
    }

    fn describe_row(&self, cpt: &Cpt, mut row: usize) -> String {
        let mut parts = Vec::new();
        for &p in cpt.parents.iter().rev() {
            let d = self.vars[p].domain.len();
            parts.push(format!("{}={}", self.vars[p].name, self.vars[p].domain[row % d]));
            row /= d;
        }
        parts.reverse();
        if parts.is_empty() {
            "(prior)".into()
        } else {
            parts.join(",")
        }
    }

    /// Validates and renormalizes CPT rows (deviations up to 1e-9 are
    /// absorbed). Returns the diagnostics if any check fails.
    pub fn validated(mut self) -> Result<Self, MgError> {
        let diags = self.validate();
        if !diags.is_empty() {
            return Err(MgError::Invalid(diags));
        }
        for cpt in self.cpts.iter_mut().flatten() {
            for row in cpt.rows.iter_mut().flatten() {
                let s: f64 = row.iter().sum();
                // Rows already summing to one up to rounding are kept verbatim
                // so that writing and re-reading a graph is lossless.
                if (s - 1.0).abs() > 8.0 * f64::EPSILON {
                    row.iter_mut().for_each(|p| *p /= s);
                }
            }
        }
        self.topo = self.topological_order().expect("acyclic after validation");
        self.validated = true;
        Ok(self)
    }

    fn star_distribution(&self, star: usize, underlying_value: usize, indicator: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.vars[star].domain.len()];
        if indicator == 1 {
            *d.last_mut().unwrap() = 1.0;
        } else {
            d[underlying_value] = 1.0;
        }
        d
    }

    /// P(var = value | parents) at a full assignment of indices.
    fn factor(&self, var: usize, values: &[usize]) -> f64 {
        let x = values[var];
        if self.vars[var].kind == VariableKind::Star {
            let u = values[self.parents[var][0]];
            let ind = values[self.parents[var][1]];
            let na = self.vars[var].domain.len() - 1;
            return match (ind, x == na) {
                (1, true) => 1.0,
                (0, false) if x == u => 1.0,
                _ => 0.0,
            };
        }
        let cpt = self.cpts[var].as_ref().expect("validated graph has every CPT");
        let mut row = 0usize;
        for &p in &cpt.parents {
            row = row * self.vars[p].domain.len() + values[p];
        }
        cpt.rows[row].as_ref().expect("validated graph has every row")[x]
    }

    fn indices(&self, a: &Assignment) -> Result<Vec<Option<usize>>, MgError> {
        let mut out = vec![None; self.vars.len()];
        for (name, value) in a.iter() {
            let i = *self
                .index
                .get(name)
                .ok_or_else(|| MgError::UnknownVariable(name.to_string()))?;
            let vi = self.vars[i].value_index(value).ok_or_else(|| MgError::ValueNotInDomain {
                variable: name.to_string(),
                value: value.to_string(),
            })?;
            out[i] = Some(vi);
        }
        Ok(out)
    }

    fn require_validated(&self) -> Result<(), MgError> {
        if self.validated {
            Ok(())
        } else {
            Err(MgError::NotValidated)
        }
    }

    /// Product of all CPT factors at a full assignment.
    pub fn joint_probability(&self, a: &Assignment) -> Result<f64, MgError> {
        self.require_validated()?;
        let idx = self.indices(a)?;
        let mut values = Vec::with_capacity(idx.len());
        for (i, v) in idx.iter().enumerate() {
            values.push(v.ok_or_else(|| MgError::MissingAssignment(self.vars[i].name.clone()))?);
        }
        Ok(self.topo.iter().map(|&v| self.factor(v, &values)).product())
    }

    /// Sum of the joint over all completions of a partial assignment.
    pub fn marginal(&self, a: &Assignment) -> Result<f64, MgError> {
        self.require_validated()?;
        let idx = self.indices(a)?;
        Ok(self.marginal_indices(&idx))
    }

    /// `marginal(target ∪ evidence) / marginal(evidence)`.
    pub fn conditional(&self, target: &Assignment, evidence: &Assignment) -> Result<f64, MgError> {
        self.require_validated()?;
        let denom = self.marginal(evidence)?;
        if denom <= 0.0 {
            return Err(MgError::ZeroEvidence);
        }
        match target.union(evidence) {
            Ok(joint) => Ok(self.marginal(&joint)? / denom),
            // A target contradicting the evidence has conditional probability zero.
            Err(MgError::OverlappingAssignment(_)) => {
                self.indices(target)?;
                Ok(0.0)
            }
            Err(e) => Err(e),
        }
    }

    /// Exact marginal by depth-first enumeration restricted to the ancestral
    /// closure of the assigned variables; unassigned descendants sum to one.
    pub(crate) fn marginal_indices(&self, assigned: &[Option<usize>]) -> f64 {
        let mut relevant = vec![false; self.vars.len()];
        let mut stack: Vec<usize> = (0..self.vars.len()).filter(|&i| assigned[i].is_some()).collect();
        while let Some(v) = stack.pop() {
            if !relevant[v] {
                relevant[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }
        let order: Vec<usize> = self.topo.iter().copied().filter(|&v| relevant[v]).collect();
        let mut values: Vec<usize> = assigned.iter().map(|v| v.unwrap_or(0)).collect();
        self.sum_from(&order, 0, assigned, &mut values)
    }

    fn sum_from(
        &self,
        order: &[usize],
        depth: usize,
        assigned: &[Option<usize>],
        values: &mut Vec<usize>,
    ) -> f64 {
        let Some(&v) = order.get(depth) else {
            return 1.0;
        };
        if assigned[v].is_some() {
            let f = self.factor(v, values);
            if f == 0.0 {
                return 0.0;
            }
            return f * self.sum_from(order, depth + 1, assigned, values);
        }
        let mut total = 0.0;
        for x in 0..self.vars[v].domain.len() {
            values[v] = x;
            let f = self.factor(v, values);
            if f != 0.0 {
                total += f * self.sum_from(order, depth + 1, assigned, values);
            }
        }
        total
    }

    /// Parses the line-oriented text format.
    pub fn parse(text: &str) -> Result<Self, MgError> {
        let mut b = MgBuilder::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| MgError::Syntax { line: line_no, message };
            let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match head {
                "relation" => {
                    if rest.is_empty() || rest.contains(char::is_whitespace) {
                        return Err(syntax("expected `relation <name>`".into()));
                    }
                    b.relation(rest);
                }
                "var" => {
                    let mut parts = rest.split_whitespace();
                    let name = parts.next().ok_or_else(|| syntax("missing variable name".into()))?;
                    let mut kind = None;
                    let mut domain = None;
                    for p in parts {
                        match p.split_once('=') {
                            Some(("kind", k)) => kind = Some(k),
                            Some(("domain", d)) => {
                                domain = Some(d.split(',').map(str::trim).collect::<Vec<_>>())
                            }
                            _ => return Err(syntax(format!("unexpected `{p}`"))),
                        }
                    }
                    let missing = match kind {
                        Some("m") => true,
                        Some("o") => false,
                        _ => return Err(syntax("kind must be `m` or `o`".into())),
                    };
                    let domain = domain.ok_or_else(|| syntax("missing domain=".into()))?;
                    b.var(name, missing, &domain).map_err(|e| syntax(e.to_string()))?;
                }
                "parents" => {
                    let (child, ps) = rest
                        .split_once('=')
                        .ok_or_else(|| syntax("expected `parents <name> = <p1,...>`".into()))?;
                    let ps: Vec<&str> =
                        ps.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                    b.parents(child.trim(), &ps);
                }
                "cpt" => {
                    let (lhs, dist) = rest
                        .rsplit_once(':')
                        .ok_or_else(|| syntax("expected `cpt <name> [| cond] : v=p,...`".into()))?;
                    let (child, cond) = match lhs.split_once('|') {
                        Some((c, cond)) => (c.trim(), cond.trim()),
                        None => (lhs.trim(), ""),
                    };
                    let cond: Vec<(String, String)> = split_pairs(cond)
                        .map_err(&syntax)?
                        .into_iter()
                        .collect();
                    let probs: Vec<(String, f64)> = split_pairs(dist)
                        .map_err(&syntax)?
                        .into_iter()
                        .map(|(v, p)| parse_prob(&p).map(|p| (v, p)).ok_or_else(|| syntax(format!("bad probability `{p}`"))))
                        .collect::<Result<_, _>>()?;
                    b.cpt_row(child, &cond, &probs);
                }
                other => return Err(syntax(format!("unknown directive `{other}`"))),
            }
        }
        b.build()
    }

    /// Serializes back to the text format accepted by [`MissingnessGraph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(r) = &self.relation {
            out.push_str(&format!("relation {r}\n"));
        }
        for v in self.attributes() {
            out.push_str(&format!(
                "var {} kind={} domain={}\n",
                v.name,
                v.kind.short(),
                v.domain.join(",")
            ));
        }
        for (i, v) in self.vars.iter().enumerate() {
            if v.kind != VariableKind::Star && !self.parents[i].is_empty() {
                let ps: Vec<&str> = self.parents[i].iter().map(|&p| self.vars[p].name.as_str()).collect();
                out.push_str(&format!("parents {} = {}\n", v.name, ps.join(",")));
            }
        }
        for (i, v) in self.vars.iter().enumerate() {
            let Some(cpt) = &self.cpts[i] else { continue };
            for (r, row) in cpt.rows.iter().enumerate() {
                let Some(row) = row else { continue };
                let dist: Vec<String> = v
                    .domain
                    .iter()
                    .zip(row)
                    .map(|(val, p)| format!("{val}={p}"))
                    .collect();
                if cpt.parents.is_empty() {
                    out.push_str(&format!("cpt {} : {}\n", v.name, dist.join(", ")));
                } else {
                    out.push_str(&format!(
                        "cpt {} | {} : {}\n",
                        v.name,
                        self.describe_row(cpt, r),
                        dist.join(", ")
                    ));
                }
            }
        }
        out
    }
}

fn split_pairs(s: &str) -> Result<Vec<(String, String)>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| format!("expected `name=value`, got `{p}`"))
        })
        .collect()
}

/// Accepts decimals and simple fractions such as `1/4`.
fn parse_prob(s: &str) -> Option<f64> {
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().ok()?;
        let b: f64 = b.trim().parse().ok()?;
        (b != 0.0).then(|| a / b)
    } else {
        s.parse().ok()
    }
}
