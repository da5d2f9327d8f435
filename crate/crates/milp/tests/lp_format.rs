use std::collections::BTreeMap;

use pdsr_milp::{export_lp_file, to_lp_string, MixedBinaryModel, Relation};
use proptest::prelude::*;

/// What a minimal reader recovers from an LP file.
#[derive(Debug, Default, PartialEq)]
struct Parsed {
    objective: BTreeMap<String, f64>,
    constant: f64,
    rows: Vec<(String, BTreeMap<String, f64>, String, f64)>,
    bounds: BTreeMap<String, (f64, f64)>,
    binaries: Vec<String>,
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "+inf" | "inf" | "+infinity" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

/// Reads `[+|-] coef name ...` sequences; a bare trailing number is a constant.
fn parse_linear(tokens: &[&str]) -> (BTreeMap<String, f64>, f64) {
    let mut terms = BTreeMap::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &t in tokens {
        match t {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => match parse_number(t) {
                Some(v) if coef.is_none() => coef = Some(v),
                _ => {
                    let c = coef.take().unwrap_or(1.0);
                    *terms.entry(t.to_string()).or_insert(0.0) += sign * c;
                    sign = 1.0;
                }
            },
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    (terms, constant)
}

fn parse(text: &str) -> Parsed {
    let mut p = Parsed::default();
    let mut section = "";
    let mut pending: Vec<String> = Vec::new();
    let mut lines: Vec<String> = Vec::new();
    // Continuation lines start with whitespace and have no label.
    for raw in text.lines() {
        let head = raw.trim();
        if ["Minimize", "Subject To", "Bounds", "Binaries", "End"].contains(&head) {
            if !pending.is_empty() {
                lines.push(pending.join(" "));
                pending.clear();
            }
            lines.push(head.to_string());
        } else if raw.starts_with("   ") {
            pending.push(head.to_string());
        } else {
            if !pending.is_empty() {
                lines.push(pending.join(" "));
                pending.clear();
            }
            pending.push(head.to_string());
        }
    }
    if !pending.is_empty() {
        lines.push(pending.join(" "));
    }
    for line in &lines {
        match line.as_str() {
            "Minimize" | "Subject To" | "Bounds" | "Binaries" | "End" => {
                section = match line.as_str() {
                    "Minimize" => "obj",
                    "Subject To" => "rows",
                    "Bounds" => "bounds",
                    "Binaries" => "bin",
                    _ => "end",
                };
                continue;
            }
            _ => {}
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match section {
            "obj" => {
                let (terms, k) = parse_linear(&tokens[1..]);
                p.objective = terms;
                p.constant = k;
            }
            "rows" => {
                let name = tokens[0].trim_end_matches(':').to_string();
                let rel_pos = tokens
                    .iter()
                    .position(|t| ["<=", ">=", "="].contains(t))
                    .unwrap();
                let (terms, _) = parse_linear(&tokens[1..rel_pos]);
                let terms = terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
                let rhs = parse_number(tokens[rel_pos + 1]).unwrap();
                p.rows.push((name, terms, tokens[rel_pos].to_string(), rhs));
            }
            "bounds" => {
                if tokens.len() == 2 && tokens[1] == "free" {
                    p.bounds
                        .insert(tokens[0].into(), (f64::NEG_INFINITY, f64::INFINITY));
                } else {
                    assert_eq!(tokens.len(), 5, "bound line `{line}`");
                    p.bounds.insert(
                        tokens[2].into(),
                        (parse_number(tokens[0]).unwrap(), parse_number(tokens[4]).unwrap()),
                    );
                }
            }
            "bin" => p.binaries.extend(tokens.iter().map(|s| s.to_string())),
            _ => {}
        }
    }
    p
}

fn expected(m: &MixedBinaryModel) -> Parsed {
    let name = |i: usize| m.variables()[i].name.clone();
    Parsed {
        objective: m
            .costs()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| (name(i), c))
            .collect(),
        constant: m.objective_constant(),
        rows: m
            .constraints()
            .iter()
            .map(|c| {
                (
                    c.name.clone(),
                    c.terms.iter().map(|&(v, k)| (name(v.index()), k)).collect(),
                    c.relation.symbol().to_string(),
                    c.rhs,
                )
            })
            .collect(),
        bounds: m
            .variables()
            .iter()
            .map(|v| (v.name.clone(), (v.lower, v.upper)))
            .collect(),
        binaries: m
            .variables()
            .iter()
            .filter(|v| v.binary)
            .map(|v| v.name.clone())
            .collect(),
    }
}

#[test]
fn one_variable_model() {
    let mut m = MixedBinaryModel::new();
    m.add_var("x", 0.0, 5.0, 2.0);
    let text = to_lp_string(&m).unwrap();
    let p = parse(&text);
    assert_eq!(p.objective.len(), 1);
    let bounds_section = text.split("Bounds\n").nth(1).unwrap().split("End").next().unwrap();
    assert_eq!(bounds_section.lines().count(), 1);
}

#[test]
fn constraint_free_model_has_empty_rows_section() {
    let mut m = MixedBinaryModel::new();
    m.add_binary("b", 1.0);
    let text = to_lp_string(&m).unwrap();
    assert!(text.contains("Subject To\nBounds\n"));
    assert!(text.ends_with("End\n"));
    assert_eq!(parse(&text), expected(&m));
}

#[test]
fn file_is_written_and_stable() {
    let mut m = MixedBinaryModel::new();
    let x = m.add_var("flow", -1.0, f64::INFINITY, 1.5);
    let b = m.add_binary("open", 10.0);
    m.add_constraint("cap", [(x, 1.0), (b, -4.0)], Relation::Le, 0.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.lp");
    export_lp_file(&m, &path).unwrap();
    let first = std::fs::read_to_string(&path).unwrap();
    export_lp_file(&m, &path).unwrap();
    assert_eq!(first, std::fs::read_to_string(&path).unwrap());
    assert_eq!(parse(&first), expected(&m));
    assert!(export_lp_file(&m, dir.path().join("missing/m.lp")).is_err());
}

fn arb_model() -> impl Strategy<Value = MixedBinaryModel> {
    let var = (any::<bool>(), -50i32..50, 0i32..20, -1e3f64..1e3);
    let vars = prop::collection::vec(var, 1..12);
    let rows = prop::collection::vec(
        (prop::collection::vec((0usize..12, -1e3f64..1e3), 1..10), 0u8..3, -1e4f64..1e4),
        0..10,
    );
    (vars, rows, -100.0f64..100.0).prop_map(|(vars, rows, constant)| {
        let mut m = MixedBinaryModel::new();
        let mut ids = Vec::new();
        for (i, (binary, lo, width, cost)) in vars.iter().enumerate() {
            ids.push(if *binary {
                m.add_binary(format!("b{i}"), *cost)
            } else {
                let lo = *lo as f64;
                m.add_var(format!("x{i}"), lo, lo + *width as f64, *cost)
            });
        }
        for (r, (terms, rel, rhs)) in rows.iter().enumerate() {
            let rel = [Relation::Le, Relation::Eq, Relation::Ge][*rel as usize];
            let terms: Vec<_> = terms.iter().map(|&(v, c)| (ids[v % ids.len()], c)).collect();
            m.add_constraint(format!("row{r}"), terms, rel, *rhs);
        }
        m.add_objective_constant(constant);
        m
    })
}

proptest! {
    #[test]
    fn coefficients_survive_a_round_trip(m in arb_model()) {
        let text = to_lp_string(&m).unwrap();
        let mut want = expected(&m);
        // Rows whose terms all cancelled are written with a placeholder zero term.
        for row in want.rows.iter_mut() {
            row.1.retain(|_, c| *c != 0.0);
        }
        prop_assert_eq!(parse(&text), want);
    }
}
