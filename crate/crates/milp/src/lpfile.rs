//! CPLEX-LP text export.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::SolveError;
use crate::model::{MixedBinaryModel, Relation};

const TERMS_PER_LINE: usize = 8;

/// Maps arbitrary names onto the LP-format identifier alphabet. Collisions
/// and empty names get an index suffix so that names stay unique and stable.
fn sanitize_names<'a>(names: impl Iterator<Item = &'a str>, fallback: &str) -> Vec<String> {
    let mut used = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in names.enumerate() {
        let mut s: String = raw
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "_.()[]{}!\"#$%&',;?@`'|~".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        s.retain(|c| c != '"' && c != '\'');
        let starts_bad = s
            .chars()
            .next()
            .map(|c| c.is_ascii_digit() || c == '.')
            .unwrap_or(true);
        if starts_bad {
            s = format!("{fallback}{i}_{s}");
        }
        let lower = s.to_ascii_lowercase();
        if lower == "e" || lower.starts_with("inf") || lower == "free" || s.len() > 255 {
            s = format!("{fallback}{i}");
        }
        if !used.insert(s.clone()) {
            s = format!("{s}_{i}");
            used.insert(s.clone());
        }
        out.push(s);
    }
    out
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:e}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (String, f64)>) -> usize {
    let mut n = 0;
    for (name, c) in terms {
        if n > 0 && n % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", num(c.abs()));
        n += 1;
    }
    n
}

/// Renders `model` in CPLEX-LP format.
pub fn to_lp_string(model: &MixedBinaryModel) -> Result<String, SolveError> {
    model.validate()?;
    let vars = sanitize_names(model.variables().iter().map(|v| v.name.as_str()), "x");
    let rows = sanitize_names(model.constraints().iter().map(|c| c.name.as_str()), "c");
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let n = write_terms(
        &mut out,
        model
            .costs()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| (vars[i].clone(), c)),
    );
    let k = model.objective_constant();
    if k != 0.0 || n == 0 {
        let sign = if k < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", num(k.abs()));
    }
    out.push_str("\nSubject To\n");
    for (c, name) in model.constraints().iter().zip(&rows) {
        let _ = write!(out, " {name}:");
        let n = write_terms(&mut out, c.terms.iter().map(|&(v, k)| (vars[v.0].clone(), k)));
        if n == 0 {
            // An empty row is written against an arbitrary variable with a zero coefficient.
            if let Some(first) = vars.first() {
                let _ = write!(out, " + 0e0 {first}");
            }
        }
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables().iter().zip(&vars) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", num(v.lower), num(v.upper));
        }
    }
    let binaries: Vec<&String> = model
        .variables()
        .iter()
        .zip(&vars)
        .filter(|(v, _)| v.binary)
        .map(|(_, n)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let line: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(out, " {}", line.join(" "));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

pub fn export_lp_file(model: &MixedBinaryModel, path: impl AsRef<Path>) -> Result<(), SolveError> {
    let text = to_lp_string(model)?;
    fs::write(path, text)?;
    Ok(())
}
