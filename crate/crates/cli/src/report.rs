//! Tables written as TSV (with a header line) or as JSON lines.

use std::io::{self, Write};

use clap::ValueEnum;
use mvqa_core::format;
use serde_json::{json, Map, Value};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    #[value(name = "json-lines")]
    JsonLines,
}

pub enum Field {
    Text(String),
    Prob(f64),
    Dist(f64),
    Int(u128),
    Class(Vec<u32>),
}

impl Field {
    fn text(&self) -> String {
        match self {
            Field::Text(s) => s.clone(),
            Field::Prob(x) => format::prob(*x),
            Field::Dist(x) => format::dist(*x),
            Field::Int(n) => n.to_string(),
            Field::Class(k) => format::class_vector(k),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Text(s) => json!(s),
            // Parsing the rounded text keeps both formats in agreement.
            Field::Prob(_) | Field::Dist(_) => self.text().parse::<f64>().map_or(Value::Null, |x| json!(x)),
            Field::Int(n) => json!(*n as u64),
            Field::Class(k) => json!(k),
        }
    }
}

pub struct Report<W: Write> {
    format: Format,
    out: W,
    columns: Vec<&'static str>,
    table: Option<&'static str>,
}

impl<W: Write> Report<W> {
    pub fn new(format: Format, out: W) -> Self {
        Report { format, out, columns: Vec::new(), table: None }
    }

    /// Starts a table; JSON lines carry the table name in a `table` key.
    pub fn table(&mut self, name: &'static str, columns: &[&'static str]) -> io::Result<()> {
        self.columns = columns.to_vec();
        self.table = Some(name);
        match self.format {
            Format::Tsv => writeln!(self.out, "{}", columns.join("\t")),
            Format::JsonLines => Ok(()),
        }
    }

    pub fn row(&mut self, fields: &[Field]) -> io::Result<()> {
        match self.format {
            Format::Tsv => {
                let cells: Vec<String> = fields.iter().map(Field::text).collect();
                writeln!(self.out, "{}", cells.join("\t"))
            }
            Format::JsonLines => {
                let mut m = Map::new();
                if let Some(t) = self.table {
                    m.insert("table".into(), json!(t));
                }
                for (c, f) in self.columns.iter().zip(fields) {
                    m.insert((*c).into(), f.json());
                }
                writeln!(self.out, "{}", Value::Object(m))
            }
        }
    }

    /// A summary line: `# key v1 v2` in TSV, an object in JSON lines.
    pub fn note(&mut self, key: &'static str, fields: &[(&'static str, Field)]) -> io::Result<()> {
        match self.format {
            Format::Tsv => {
                let mut parts = vec![format!("# {key}")];
                parts.extend(fields.iter().map(|(_, f)| f.text()));
                writeln!(self.out, "{}", parts.join(" "))
            }
            Format::JsonLines => {
                let mut m = Map::new();
                m.insert("note".into(), json!(key));
                for (name, f) in fields {
                    m.insert((*name).into(), f.json());
                }
                writeln!(self.out, "{}", Value::Object(m))
            }
        }
    }

    /// Free text, passed through unchanged in both formats.
    pub fn raw(&mut self, text: &str) -> io::Result<()> {
        self.out.write_all(text.as_bytes())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}
