//! Locating and loading input files.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use mvqa_core::observed::{parse_relation, parse_schema, ObservedRelation};
use mvqa_core::{bind_mg, build_bid, Bid, BidRelation, BoundDatabase, MissingnessGraph, ObservedDatabase, Query};

#[derive(Args, Debug, Clone, Default)]
pub struct InputOpts {
    /// Directory with `schema.txt`, `*.mg` and `<relation>.csv` files.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Missingness graph file; repeat for several relations.
    #[arg(long = "mg")]
    pub mgs: Vec<PathBuf>,
    /// `RELATION=PATH`, or just `PATH` when the schema has one relation.
    #[arg(long = "data")]
    pub data: Vec<String>,
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cli::Io: cannot read {}", path.display()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cli::Io: cannot write {}", path.display()))
}

pub struct Loaded {
    pub observed: ObservedDatabase,
    pub bound: BoundDatabase,
    pub bid: Bid,
}

impl Loaded {
    /// The one relation MCC, class and preferred-answer commands work on.
    pub fn single(&self) -> Result<(&BidRelation, &MissingnessGraph)> {
        match (self.bid.relations.as_slice(), self.bound.relations.as_slice()) {
            ([r], [b]) => Ok((r, &b.mg)),
            _ => Err(anyhow!(
                "cli::MultiRelation: classes and compliance are defined for a single relation, input has {}",
                self.bid.relations.len()
            )),
        }
    }
}

/// `(relation, path)` pairs for the data files.
fn data_files(opts: &InputOpts, relations: &[String]) -> Result<Vec<(String, PathBuf)>> {
    if let Some(dir) = &opts.bundle {
        if opts.data.is_empty() {
            return Ok(relations.iter().map(|r| (r.clone(), dir.join(format!("{r}.csv")))).collect());
        }
    }
    let mut out = Vec::new();
    for d in &opts.data {
        match d.split_once('=') {
            Some((rel, path)) => out.push((rel.to_string(), PathBuf::from(path))),
            None if relations.len() == 1 => out.push((relations[0].clone(), PathBuf::from(d))),
            None => bail!("cli::Usage: `--data {d}` needs a RELATION= prefix when the schema has several relations"),
        }
    }
    Ok(out)
}

fn mg_files(opts: &InputOpts) -> Result<Vec<PathBuf>> {
    if !opts.mgs.is_empty() {
        return Ok(opts.mgs.clone());
    }
    let Some(dir) = &opts.bundle else { bail!("cli::Usage: give --bundle or --mg") };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cli::Io: cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mg"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn schema_path(opts: &InputOpts) -> Result<PathBuf> {
    match (&opts.schema, &opts.bundle) {
        (Some(s), _) => Ok(s.clone()),
        (None, Some(dir)) => Ok(dir.join("schema.txt")),
        (None, None) => bail!("cli::Usage: give --bundle or --schema"),
    }
}

pub fn load_observed_files(opts: &InputOpts) -> Result<ObservedDatabase> {
    let schema_path = schema_path(opts)?;
    let schemas = parse_schema(&read(&schema_path)?).with_context(|| schema_path.display().to_string())?;
    let names: Vec<String> = schemas.iter().map(|s| s.name.clone()).collect();
    let files = data_files(opts, &names)?;
    for (rel, _) in &files {
        if !names.contains(rel) {
            bail!("observed::UnknownRelation: `{rel}` is not declared in {}", schema_path.display());
        }
    }
    let mut seen = HashSet::new();
    let mut relations: Vec<ObservedRelation> = Vec::new();
    for s in &schemas {
        let (_, path) = files
            .iter()
            .find(|(r, _)| *r == s.name)
            .ok_or_else(|| anyhow!("observed::MissingData: no data file for relation `{}`", s.name))?;
        let rel = parse_relation(s, &read(path)?, &mut seen).with_context(|| path.display().to_string())?;
        relations.push(rel);
    }
    Ok(ObservedDatabase { relations })
}

pub fn load_mgs(opts: &InputOpts, max_assignments: u128) -> Result<Vec<MissingnessGraph>> {
    mg_files(opts)?
        .iter()
        .map(|path| {
            MissingnessGraph::parse(&read(path)?)
                .and_then(|mg| mg.with_assignment_cap(max_assignments).validated())
                .with_context(|| path.display().to_string())
        })
        .collect()
}

pub fn load(opts: &InputOpts, max_assignments: u128) -> Result<Loaded> {
    let observed = load_observed_files(opts)?;
    let mgs = load_mgs(opts, max_assignments)?;
    let bound = bind_mg(&observed, mgs).context("binding graphs to relations")?;
    let bid = build_bid(&bound).context("building the probabilistic database")?;
    Ok(Loaded { observed, bound, bid })
}

/// Query text from `--query` or a file; `#` lines are comments.
pub fn load_query(text: Option<&str>, file: Option<&Path>) -> Result<Query> {
    let (source, body) = match (text, file) {
        (Some(t), None) => ("--query".to_string(), t.to_string()),
        (None, Some(p)) => (p.display().to_string(), read(p)?),
        _ => bail!("cli::Usage: give exactly one of --query and --query-file"),
    };
    let body: Vec<&str> = body.lines().filter(|l| !l.trim_start().starts_with('#')).collect();
    Query::parse(&body.join(" ")).with_context(|| source)
}
