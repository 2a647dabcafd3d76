//! Module-qualified error codes and exit statuses.

use std::error::Error;

use mvqa_core::{
    BidError, ComplianceError, EmbedError, FlowError, MgError, ObservedError, QueryError, WorldError,
};
use mvqa_core::observed::BindError;

const CAP_CODES: [&str; 5] = [
    "worlds::CapExceeded",
    "worlds::StateSpaceExceeded",
    "flow::EnumerationBudgetExceeded",
    "embedding::UnencodableBid",
    "mg::AssignmentSpaceExceeded",
];

/// Wrapper variants that only forward another module's error.
fn wrapped_module(variant: &str) -> Option<&'static str> {
    Some(match variant {
        "Mg" => "mg",
        "Observed" | "Bind" => "observed",
        "Bid" => "bid",
        "Query" => "query",
        "Worlds" => "worlds",
        _ => return None,
    })
}

/// Code from the `Debug` rendering, descending through wrapper variants.
fn code_from_debug(mut module: &'static str, debug: &str) -> String {
    let mut rest = debug;
    loop {
        let end = rest.find(|c: char| !c.is_alphanumeric() && c != '_').unwrap_or(rest.len());
        let variant = &rest[..end];
        match wrapped_module(variant) {
            Some(m) if rest[end..].starts_with('(') => {
                module = m;
                rest = &rest[end + 1..];
            }
            _ if module == "mg" && variant == "Invalid" => {
                // Report the first failed check.
                return match debug.split("code: ").nth(1) {
                    Some(c) => {
                        let end = c.find(|ch: char| !ch.is_alphanumeric()).unwrap_or(c.len());
                        format!("mg::{}", &c[..end])
                    }
                    None => "mg::Invalid".into(),
                };
            }
            _ => return format!("{module}::{variant}"),
        }
    }
}

fn core_code(e: &(dyn Error + 'static)) -> Option<String> {
    macro_rules! try_module {
        ($($t:ty => $m:literal),*) => {
            $(if let Some(x) = e.downcast_ref::<$t>() {
                return Some(code_from_debug($m, &format!("{x:?}")));
            })*
        };
    }
    if let Some(BindError::InvalidMg { source, .. }) = e.downcast_ref::<BindError>() {
        return Some(code_from_debug("mg", &format!("{source:?}")));
    }
    try_module!(
        MgError => "mg", ObservedError => "observed", BindError => "observed", BidError => "bid",
        WorldError => "worlds", ComplianceError => "compliance", FlowError => "flow",
        QueryError => "query", EmbedError => "embedding"
    );
    None
}

/// A `module::Code:` prefix written by the CLI itself.
fn prefixed_code(msg: &str) -> Option<String> {
    let (head, _) = msg.split_once(": ")?;
    let (m, c) = head.split_once("::")?;
    let ok = !m.is_empty()
        && m.chars().all(|ch| ch.is_ascii_lowercase())
        && c.chars().next().is_some_and(|ch| ch.is_ascii_uppercase())
        && c.chars().all(|ch| ch.is_ascii_alphanumeric());
    ok.then(|| head.to_string())
}

/// Most specific code in the chain and the exit status: 2 when a cap was
/// exceeded, 1 otherwise.
pub fn classify(e: &anyhow::Error) -> (String, u8) {
    let chain: Vec<&(dyn Error + 'static)> = e.chain().collect();
    let code = chain
        .iter()
        .rev()
        .find_map(|c| core_code(*c).or_else(|| prefixed_code(&c.to_string())))
        .or_else(|| {
            e.chain().find_map(|c| c.downcast_ref::<std::io::Error>()).map(|_| "cli::Io".to_string())
        })
        .unwrap_or_else(|| "cli::Error".to_string());
    let status = if CAP_CODES.contains(&code.as_str()) { 2 } else { 1 };
    (code, status)
}

pub fn render(e: &anyhow::Error, code: &str) -> String {
    let prefix = format!("{code}: ");
    e.chain().map(|c| c.to_string().replace(&prefix, "")).collect::<Vec<_>>().join(": ")
}
