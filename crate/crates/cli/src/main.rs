mod errors;
mod input;
mod report;

use std::io::{self, Write};
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use mvqa_core::compliance::{chi_square_p_value, class_distance, induced_distribution, DistanceKind};
use mvqa_core::embedding::{bid_equivalent, embed_bid, tid_to_observed, Tid};
use mvqa_core::flow::{
    count_perfect_matchings, enumerate_mcc, enumerate_mcc_with, matchings_instance, random_cubic_bipartite,
    solve_mcc, verify_optimal, BipartiteGraph, FlowError,
};
use mvqa_core::format;
use mvqa_core::observed::schema_to_text;
use mvqa_core::query::{answers_by_worlds, preferred_answers, AnswerSet, Evaluation};
use mvqa_core::worlds::{
    all_classes, class_probability, class_world_count, classes_by_enumeration, is_admissible, support_of, ClassInfo,
    ClassVector,
};
use mvqa_core::Bid;

use input::{load, load_query, read, write, InputOpts};
use report::{Field, Format, Report};

#[derive(Parser, Debug)]
#[command(name = "mvqa", version, about = "Query answering over relations with missing values")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunConfig {
    #[arg(long, global = true, value_enum, default_value = "tsv")]
    format: Format,
    /// Largest joint assignment space of a missingness graph.
    #[arg(long, global = true, default_value_t = 10_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_assignments: u64,
    /// Largest number of possible worlds to enumerate.
    #[arg(long, global = true, env = "MVQA_MAX_WORLDS", default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_worlds: u64,
    /// Largest number of partial classes kept by the class DP.
    #[arg(long, global = true, default_value_t = 10_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_states: u64,
    /// Largest number of classes an enumeration may emit.
    #[arg(long, global = true, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_emissions: u64,
}

fn parse_distance(s: &str) -> Result<DistanceKind, String> {
    s.parse::<DistanceKind>().map_err(|e| e.to_string())
}

#[derive(Args, Debug, Clone)]
struct DistanceOpt {
    /// kl, eu2, l1, chi2, hellinger or matchings.
    #[arg(long, default_value = "kl", value_parser = parse_distance)]
    distance: DistanceKind,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Semantics {
    /// Most-compliant classes.
    Mcc,
    /// Most probable classes.
    Mpc,
    /// Every class, weighted by its probability.
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and check all inputs; prints nothing on success.
    Validate(InputOpts),
    /// Print the derived block-independent database.
    Bid(InputOpts),
    /// List every class with its probability and world count.
    Classes {
        #[command(flatten)]
        input: InputOpts,
        /// Add a distance column.
        #[arg(long, value_parser = parse_distance)]
        distance: Option<DistanceKind>,
        /// Group enumerated worlds instead of running the DP.
        #[arg(long)]
        brute: bool,
    },
    /// Most probable classes.
    Mpc {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long)]
        brute: bool,
    },
    /// Most-compliant classes.
    Mcc {
        #[command(subcommand)]
        op: MccOp,
    },
    /// Preferred answers to a conjunctive query.
    Query {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        query_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        semantics: Semantics,
        #[command(flatten)]
        distance: DistanceOpt,
    },
    /// Write observed data and a graph whose database reproduces a given one.
    Embed {
        /// Database in the format printed by `mvqa bid`.
        #[arg(long)]
        bid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a tuple-independent database and Boolean query into observed
    /// data, graphs and a rewritten query.
    TidReduce {
        #[arg(long)]
        schema: PathBuf,
        /// `RELATION=PATH`; CSV header `tid,<attrs>,prob`.
        #[arg(long = "data", required = true)]
        data: Vec<String>,
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        query_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the matchings instance of a 3-regular bipartite graph.
    GenMatchings {
        /// `u v` edge list.
        #[arg(long, conflicts_with = "random")]
        graph: Option<PathBuf>,
        /// Vertices per side of a random graph.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum MccOp {
    /// Minimum distance and the lexicographically smallest optimal class.
    Solve {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        distance: DistanceOpt,
        /// Add the chi-square p-value of each class.
        #[arg(long)]
        report_pvalue: bool,
    },
    /// Stream every most-compliant class in lexicographic order.
    Enum {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        distance: DistanceOpt,
        #[arg(long)]
        report_pvalue: bool,
    },
    /// Number of most-compliant classes.
    Count {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        distance: DistanceOpt,
    },
    /// Check that a class is admissible and optimal.
    Verify {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        distance: DistanceOpt,
        /// `[k1,k2,...]` or `k1,k2,...`.
        #[arg(long = "class")]
        class: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut report = Report::new(cli.config.format, stdout.lock());
    let result = run(&cli, &mut report);
    let flushed = report.flush();
    match result.and_then(|()| flushed.map_err(Into::into)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, status) = errors::classify(&e);
            let _ = writeln!(io::stderr(), "error[{code}]: {}", errors::render(&e, &code));
            ExitCode::from(status)
        }
    }
}

fn run<W: Write>(cli: &Cli, out: &mut Report<W>) -> Result<()> {
    let cfg = &cli.config;
    let cap = cfg.max_assignments as u128;
    match &cli.command {
        Command::Validate(input) => {
            load(input, cap)?;
        }
        Command::Bid(input) => out.raw(&load(input, cap)?.bid.to_tsv())?,
        Command::Classes { input, distance, brute } => {
            let loaded = load(input, cap)?;
            let (rel, mg) = loaded.single()?;
            let s = support_of(rel);
            let classes = list_classes(cfg, rel, *brute)?;
            match distance {
                None => {
                    out.table("classes", &["k", "probability", "worlds"])?;
                    for c in classes {
                        out.row(&[Field::Class(c.k), Field::Prob(c.probability), Field::Int(c.world_count)])?;
                    }
                }
                Some(kind) => {
                    let induced = induced_distribution(mg, &rel.attributes, &s)?;
                    out.table("classes", &["k", "probability", "worlds", kind.name()])?;
                    for c in classes {
                        let d = class_distance(*kind, &c.k, s.n(), &induced);
                        out.row(&[Field::Class(c.k), Field::Prob(c.probability), Field::Int(c.world_count), Field::Dist(d)])?;
                    }
                }
            }
        }
        Command::Mpc { input, brute } => {
            let loaded = load(input, cap)?;
            let (rel, _) = loaded.single()?;
            out.table("mpc", &["k", "probability"])?;
            for c in most_probable(&list_classes(cfg, rel, *brute)?) {
                out.row(&[Field::Class(c.k.clone()), Field::Prob(c.probability)])?;
            }
        }
        Command::Mcc { op } => run_mcc(cfg, op, out)?,
        Command::Query { input, query, query_file, semantics, distance } => {
            let loaded = load(input, cap)?;
            let q = load_query(query.as_deref(), query_file.as_deref())?;
            q.check_schema(&loaded.observed.schemas())?;
            if loaded.bid.relations.len() > 1 {
                if *semantics != Semantics::All {
                    bail!("cli::MultiRelation: only --semantics all is available on several relations");
                }
                let merged = answers_by_worlds(&q, &loaded.bid, cfg.max_worlds as u128)?;
                write_merged(out, &merged)?;
                return Ok(());
            }
            let (rel, mg) = loaded.single()?;
            let s = support_of(rel);
            let selected: Vec<(ClassVector, f64)> = match semantics {
                Semantics::All => list_classes(cfg, rel, false)?.into_iter().map(|c| (c.k, c.probability)).collect(),
                Semantics::Mpc => {
                    most_probable(&list_classes(cfg, rel, false)?).into_iter().map(|c| (c.k.clone(), c.probability)).collect()
                }
                Semantics::Mcc => {
                    let induced = induced_distribution(mg, &rel.attributes, &s)?;
                    let (ks, _) = enumerate_mcc(&s, distance.distance, &induced, cfg.max_emissions)?;
                    ks.into_iter()
                        .map(|k| Ok((k.clone(), class_probability(&s, &k, cfg.max_states as u128)?)))
                        .collect::<Result<_>>()?
                }
            };
            let answers = preferred_answers(&q, &selected, &rel.name, &s)?;
            write_answers(out, &answers)?;
        }
        Command::Embed { bid, out: dir } => {
            let parsed = Bid::parse_tsv(&read(bid)?).with_context(|| bid.display().to_string())?;
            let d = parsed.single()?;
            d.check().with_context(|| bid.display().to_string())?;
            let emb = embed_bid(d, cap)?;
            std::fs::create_dir_all(dir).with_context(|| format!("cli::Io: cannot create {}", dir.display()))?;
            let rel = &emb.observed.relations[0];
            write(&dir.join("schema.txt"), &schema_to_text(&emb.observed.schemas()))?;
            write(&dir.join(format!("{}.csv", rel.schema.name)), &rel.to_csv())?;
            write(&dir.join(format!("{}.mg", rel.schema.name)), &emb.mg.to_text())?;
            let mut decode = String::from("token\t");
            decode.push_str(&emb.original_attributes.join("\t"));
            decode.push('\n');
            for (token, row) in &emb.decode {
                decode.push_str(&format!("{token}\t{}\n", row.join("\t")));
            }
            write(&dir.join("decode.tsv"), &decode)?;
            let derived = emb.derived_bid()?;
            let back = emb.decode_relation(derived.single()?);
            out.table("embed", &["relation", "blocks", "support_rows", "round_trip_equivalent"])?;
            out.row(&[
                Field::Text(d.name.clone()),
                Field::Int(d.blocks.len() as u128),
                Field::Int(emb.decode.len() as u128),
                Field::Text(bid_equivalent(d, &back).is_some().to_string()),
            ])?;
        }
        Command::TidReduce { schema, data, query, query_file, out: dir } => {
            let schema_text = read(schema)?;
            let mut files = Vec::new();
            for d in data {
                let (rel, path) =
                    d.split_once('=').ok_or_else(|| anyhow!("cli::Usage: `--data {d}` must be RELATION=PATH"))?;
                files.push((rel.to_string(), read(&PathBuf::from(path))?));
            }
            let texts: Vec<(&str, &str)> = files.iter().map(|(r, t)| (r.as_str(), t.as_str())).collect();
            let tid = Tid::load(&schema_text, &texts).with_context(|| schema.display().to_string())?;
            let q = load_query(query.as_deref(), query_file.as_deref())?;
            let red = tid_to_observed(&tid, &q)?;
            if let Some(dir) = dir {
                std::fs::create_dir_all(dir).with_context(|| format!("cli::Io: cannot create {}", dir.display()))?;
                write(&dir.join("schema.txt"), &schema_to_text(&red.observed.schemas()))?;
                for (rel, mg) in red.observed.relations.iter().zip(&red.mgs) {
                    write(&dir.join(format!("{}.csv", rel.schema.name)), &rel.to_csv())?;
                    write(&dir.join(format!("{}.mg", rel.schema.name)), &mg.to_text())?;
                }
                write(&dir.join("query.dl"), &format!("{}.\n", red.query))?;
            }
            let worlds = 1u128 << tid.relations.iter().map(|r| r.tuples.len()).sum::<usize>().min(127);
            if worlds > cfg.max_worlds as u128 {
                return Err(mvqa_core::WorldError::CapExceeded { count: worlds, cap: cfg.max_worlds as u128 }.into());
            }
            out.table("tid_reduce", &["query", "probability_original", "probability_reduced"])?;
            out.row(&[
                Field::Text(red.query.to_string()),
                Field::Prob(tid.query_probability(&q)?),
                Field::Prob(red.query_probability(cfg.max_worlds as u128)?),
            ])?;
        }
        Command::GenMatchings { graph, random, seed, out: dir } => {
            let g = match (graph, random) {
                (Some(path), None) => BipartiteGraph::parse(&read(path)?)
                    .map_err(|e| anyhow!("flow::GraphSyntax: {}: {e}", path.display()))?,
                (None, Some(side)) => {
                    if *side < 3 {
                        bail!("cli::Usage: --random needs at least 3 vertices per side");
                    }
                    random_cubic_bipartite(*side, &mut rand_chacha::ChaCha8Rng::seed_from_u64(*seed))
                }
                _ => bail!("cli::Usage: give --graph or --random"),
            };
            let (rel, induced) = matchings_instance(&g)?;
            let s = support_of(&rel);
            let (classes, _) = enumerate_mcc(&s, DistanceKind::Matchings, &induced, cfg.max_emissions)?;
            let mut mc_worlds = 0u128;
            for k in &classes {
                mc_worlds += class_world_count(&s, k, cfg.max_states as u128)?;
            }
            if let Some(dir) = dir {
                std::fs::create_dir_all(dir).with_context(|| format!("cli::Io: cannot create {}", dir.display()))?;
                write(&dir.join("graph.txt"), &g.to_text())?;
                write(&dir.join("bid.tsv"), &Bid { relations: vec![rel.clone()] }.to_tsv())?;
            }
            out.table("matchings", &["vertices", "edges", "perfect_matchings", "mc_classes", "mc_worlds"])?;
            out.row(&[
                Field::Int(g.vertices as u128),
                Field::Int(g.edges.len() as u128),
                Field::Int(count_perfect_matchings(&g)? as u128),
                Field::Int(classes.len() as u128),
                Field::Int(mc_worlds),
            ])?;
        }
    }
    Ok(())
}

fn run_mcc<W: Write>(cfg: &RunConfig, op: &MccOp, out: &mut Report<W>) -> Result<()> {
    let (input, kind) = match op {
        MccOp::Solve { input, distance, .. }
        | MccOp::Enum { input, distance, .. }
        | MccOp::Count { input, distance }
        | MccOp::Verify { input, distance, .. } => (input, distance.distance),
    };
    let loaded = load(input, cfg.max_assignments as u128)?;
    let (rel, mg) = loaded.single()?;
    let s = support_of(rel);
    let induced = induced_distribution(mg, &rel.attributes, &s)?;
    let n = s.n();
    let columns = |pvalue: bool| if pvalue { vec!["k", kind.name(), "p_value"] } else { vec!["k", kind.name()] };
    let row = |k: &[u32], pvalue: bool| -> Result<Vec<Field>> {
        let mut r = vec![Field::Class(k.to_vec()), Field::Dist(class_distance(kind, k, n, &induced))];
        if pvalue {
            r.push(Field::Prob(chi_square_p_value(k, n, &induced)?.1));
        }
        Ok(r)
    };
    match op {
        MccOp::Solve { report_pvalue, .. } => {
            let sol = solve_mcc(&s, kind, &induced)?;
            out.table("mcc", &columns(*report_pvalue))?;
            out.row(&row(&sol.k, *report_pvalue)?)?;
        }
        MccOp::Enum { report_pvalue, .. } => {
            out.table("mcc", &columns(*report_pvalue))?;
            let mut emitted = 0u64;
            let mut failure: Option<anyhow::Error> = None;
            enumerate_mcc_with(&s, kind, &induced, |k| {
                emitted += 1;
                let written = if emitted > cfg.max_emissions {
                    Err(FlowError::EnumerationBudgetExceeded { cap: cfg.max_emissions }.into())
                } else {
                    row(k, *report_pvalue).and_then(|r| out.row(&r).map_err(Into::into))
                };
                match written {
                    Ok(()) => ControlFlow::Continue(()),
                    Err(e) => {
                        failure = Some(e);
                        ControlFlow::Break(())
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
        }
        MccOp::Count { .. } => {
            let count = mvqa_core::count_mcc(&s, kind, &induced, cfg.max_emissions)?;
            out.raw(&format!("{count}\n"))?;
        }
        MccOp::Verify { class, .. } => {
            let k = format::parse_class_vector(class)
                .filter(|k| k.len() == s.m())
                .ok_or_else(|| anyhow!("cli::Usage: `{class}` is not a class vector of length {}", s.m()))?;
            let sol = solve_mcc(&s, kind, &induced)?;
            out.table("verify", &["k", "admissible", "optimal", kind.name(), "c_min"])?;
            out.row(&[
                Field::Class(k.clone()),
                Field::Text(is_admissible(&s, &k).to_string()),
                Field::Text(verify_optimal(&s, kind, &induced, &k, sol.c_min).to_string()),
                Field::Dist(class_distance(kind, &k, n, &induced)),
                Field::Dist(sol.c_min),
            ])?;
        }
    }
    Ok(())
}

fn list_classes(cfg: &RunConfig, rel: &mvqa_core::BidRelation, brute: bool) -> Result<Vec<ClassInfo>> {
    let s = support_of(rel);
    Ok(if brute {
        classes_by_enumeration(&s, cfg.max_worlds as u128)?
    } else {
        all_classes(&s, cfg.max_states as u128)?
    })
}

fn most_probable(classes: &[ClassInfo]) -> Vec<&ClassInfo> {
    let best = classes.iter().map(|c| c.probability).fold(f64::NEG_INFINITY, f64::max);
    classes.iter().filter(|c| mvqa_core::tolerance::tie(c.probability, best)).collect()
}

fn evaluation_text(e: &Evaluation) -> String {
    match e {
        Evaluation::Bool(b) => b.to_string(),
        Evaluation::Scalar(x) => mvqa_core::query::format_number(x),
        Evaluation::Bag(rows) => rows.iter().map(|r| r.join(",")).collect::<Vec<_>>().join(";"),
    }
}

fn write_merged<W: Write>(out: &mut Report<W>, merged: &[(mvqa_core::AnswerValue, f64)]) -> Result<()> {
    out.table("answers", &["answer", "probability"])?;
    for (a, p) in merged {
        out.row(&[Field::Text(a.to_string()), Field::Prob(*p)])?;
    }
    let best = merged.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
    if let Some((a, p)) = merged.iter().find(|a| mvqa_core::tolerance::tie(a.1, best)) {
        out.note("most_probable_answer", &[("answer", Field::Text(a.to_string())), ("probability", Field::Prob(*p))])?;
    }
    Ok(())
}

fn write_answers<W: Write>(out: &mut Report<W>, answers: &AnswerSet) -> Result<()> {
    out.table("classes", &["k", "probability", "answer"])?;
    for c in &answers.per_class {
        out.row(&[Field::Class(c.k.clone()), Field::Prob(c.probability), Field::Text(evaluation_text(&c.evaluation))])?;
    }
    write_merged(out, &answers.merged)
}
