//! Scenario sets: multivariate time series with probabilities.
//!
//! Scenarios are read from a long-format CSV (`scenario_id,source,t,value`)
//! and an optional probability CSV (`scenario_id,probability`). The order in
//! which scenario ids first appear fixes the scenario index order, and the
//! order in which sources first appear fixes the source order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σγ = 1` accepted from a probabilities file.
pub const PROBABILITY_FILE_TOL: f64 = 1e-6;
/// Tolerance on `Σγ = 1` held by every validated set.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

/// What a source measures. Inferred from the source name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceRole {
    Wt,
    Pv,
    Load,
    Price,
}

impl SourceRole {
    /// `wt*`/`wind*` → Wt, `pv*`/`solar*` → Pv, `load*` → Load, `price*` → Price.
    pub fn infer(name: &str) -> Option<SourceRole> {
        let lower = name.to_ascii_lowercase();
        if lower.starts_with("wt") || lower.starts_with("wind") {
            Some(SourceRole::Wt)
        } else if lower.starts_with("pv") || lower.starts_with("solar") {
            Some(SourceRole::Pv)
        } else if lower.starts_with("load") {
            Some(SourceRole::Load)
        } else if lower.starts_with("price") {
            Some(SourceRole::Price)
        } else {
            None
        }
    }

    pub fn is_power(self) -> bool {
        !matches!(self, SourceRole::Price)
    }
}

/// One joint realization of every source over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    /// Row-major `(source, t)` values, `sources × horizon` long.
    values: Vec<f64>,
    horizon: usize,
}

impl Scenario {
    pub fn new(id: impl Into<String>, values: Vec<f64>, horizon: usize) -> Self {
        Scenario {
            id: id.into(),
            values,
            horizon,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_sources(&self) -> usize {
        if self.horizon == 0 {
            0
        } else {
            self.values.len() / self.horizon
        }
    }

    pub fn value(&self, source: usize, t: usize) -> f64 {
        self.values[source * self.horizon + t]
    }

    pub fn series(&self, source: usize) -> &[f64] {
        &self.values[source * self.horizon..(source + 1) * self.horizon]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Euclidean distance between the flattened value vectors.
    pub fn distance(&self, other: &Scenario) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// A validated, immutable set of scenarios with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    sources: Vec<String>,
    roles: Vec<SourceRole>,
    horizon: usize,
    scenarios: Vec<Scenario>,
    probabilities: Vec<f64>,
}

impl ScenarioSet {
    /// Validates and assembles a set. Source roles are inferred from names.
    pub fn new(
        sources: Vec<String>,
        scenarios: Vec<Scenario>,
        probabilities: Vec<f64>,
    ) -> Result<Self> {
        let roles = sources
            .iter()
            .map(|s| {
                SourceRole::infer(s).ok_or_else(|| {
                    Error::Validation(format!(
                        "cannot infer role of source `{s}` (expected prefix wt, pv, load or price)"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_roles(sources, roles, scenarios, probabilities)
    }

    pub fn with_roles(
        sources: Vec<String>,
        roles: Vec<SourceRole>,
        scenarios: Vec<Scenario>,
        probabilities: Vec<f64>,
    ) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::Validation("scenario set is empty".into()));
        }
        if roles.len() != sources.len() {
            return Err(Error::Validation("one role per source required".into()));
        }
        if probabilities.len() != scenarios.len() {
            return Err(Error::Validation(format!(
                "{} probabilities for {} scenarios",
                probabilities.len(),
                scenarios.len()
            )));
        }
        let horizon = scenarios[0].horizon;
        if horizon == 0 {
            return Err(Error::Shape("horizon must be at least 1".into()));
        }
        let mut seen = HashMap::new();
        for (idx, sc) in scenarios.iter().enumerate() {
            if sc.horizon != horizon || sc.values.len() != sources.len() * horizon {
                return Err(Error::Shape(format!(
                    "scenario `{}` has shape ({}, {}), expected ({}, {})",
                    sc.id,
                    sc.num_sources(),
                    sc.horizon,
                    sources.len(),
                    horizon
                )));
            }
            if seen.insert(sc.id.clone(), idx).is_some() {
                return Err(Error::Validation(format!("duplicate scenario id `{}`", sc.id)));
            }
            for (u, role) in roles.iter().enumerate() {
                for &v in sc.series(u) {
                    if !v.is_finite() {
                        return Err(Error::Validation(format!(
                            "non-finite value in scenario `{}` source `{}`",
                            sc.id, sources[u]
                        )));
                    }
                    if role.is_power() && v < 0.0 {
                        return Err(Error::Validation(format!(
                            "negative power {v} in scenario `{}` source `{}`",
                            sc.id, sources[u]
                        )));
                    }
                }
            }
        }
        for &p in &probabilities {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::Validation(format!(
                    "scenario probabilities must be positive, got {p}"
                )));
            }
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::Validation(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(ScenarioSet {
            sources,
            roles,
            horizon,
            scenarios,
            probabilities,
        })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn roles(&self) -> &[SourceRole] {
        &self.roles
    }

    pub fn source_index(&self, name: &str) -> Option<usize> {
        self.sources.iter().position(|s| s == name)
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn scenario(&self, i: usize) -> &Scenario {
        &self.scenarios[i]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// A new set made of the selected scenarios with the given weights.
    pub fn subset(&self, indices: &[usize], weights: &[f64]) -> Result<ScenarioSet> {
        let scenarios = indices.iter().map(|&i| self.scenarios[i].clone()).collect();
        ScenarioSet::with_roles(
            self.sources.clone(),
            self.roles.clone(),
            scenarios,
            weights.to_vec(),
        )
    }

    /// A single-scenario set with probability one.
    pub fn singleton(&self, i: usize) -> ScenarioSet {
        ScenarioSet {
            sources: self.sources.clone(),
            roles: self.roles.clone(),
            horizon: self.horizon,
            scenarios: vec![self.scenarios[i].clone()],
            probabilities: vec![1.0],
        }
    }

    /// Same scenarios, different probabilities.
    pub fn reweighted(&self, probabilities: Vec<f64>) -> Result<ScenarioSet> {
        ScenarioSet::with_roles(
            self.sources.clone(),
            self.roles.clone(),
            self.scenarios.clone(),
            probabilities,
        )
    }

    /// Writes the long-format scenario CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scenario_id", "source", "t", "value"])?;
        for sc in &self.scenarios {
            for (u, name) in self.sources.iter().enumerate() {
                for t in 0..self.horizon {
                    w.write_record([
                        sc.id.as_str(),
                        name.as_str(),
                        &t.to_string(),
                        &sc.value(u, t).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_probabilities_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scenario_id", "probability"])?;
        for (sc, p) in self.scenarios.iter().zip(&self.probabilities) {
            w.write_record([sc.id.as_str(), &p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Saves the scenario CSV and the probabilities CSV.
    pub fn save(&self, values_path: &Path, probabilities_path: Option<&Path>) -> Result<()> {
        self.write_csv(File::create(values_path).map_err(|e| Error::io(values_path, e))?)?;
        if let Some(p) = probabilities_path {
            self.write_probabilities_csv(File::create(p).map_err(|e| Error::io(p, e))?)?;
        }
        Ok(())
    }

    /// The exact bytes of [`ScenarioSet::write_csv`].
    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

/// Divides by the sum. Zero entries are rejected since every scenario must
/// carry positive probability.
pub fn normalize_probabilities(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::Validation("no probabilities given".into()));
    }
    if raw.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::Validation(
            "probabilities must be finite and non-negative".into(),
        ));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::Validation("probabilities are all zero".into()));
    }
    if raw.iter().any(|&p| p == 0.0) {
        return Err(Error::Validation(
            "zero probability scenario; filter it out before reduction".into(),
        ));
    }
    Ok(raw.iter().map(|p| p / total).collect())
}

/// Reads a scenario CSV and an optional probabilities CSV.
pub fn load_scenarios(values_path: &Path, probabilities_path: Option<&Path>) -> Result<ScenarioSet> {
    let mut values = String::new();
    File::open(values_path)
        .and_then(|mut f| f.read_to_string(&mut values))
        .map_err(|e| Error::io(values_path, e))?;
    let probs = match probabilities_path {
        Some(p) => {
            let mut s = String::new();
            File::open(p)
                .and_then(|mut f| f.read_to_string(&mut s))
                .map_err(|e| Error::io(p, e))?;
            Some(s)
        }
        None => None,
    };
    parse_scenarios(&values, probs.as_deref())
}

/// In-memory variant of [`load_scenarios`].
pub fn parse_scenarios(values_csv: &str, probabilities_csv: Option<&str>) -> Result<ScenarioSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(values_csv.as_bytes());
    check_header(reader.headers()?, &["scenario_id", "source", "t", "value"], 1)?;

    let mut ids: Vec<String> = Vec::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut sources: Vec<String> = Vec::new();
    let mut source_index: HashMap<String, usize> = HashMap::new();
    // (scenario, source, t) -> (value, line)
    let mut cells: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut max_t = 0usize;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let id = record[0].to_string();
        let source = record[1].to_string();
        if id.is_empty() || source.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty scenario_id or source".into(),
            });
        }
        let t: usize = record[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid time index `{}`", &record[2]),
        })?;
        let value: f64 = record[3].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid value `{}`", &record[3]),
        })?;
        let si = *id_index.entry(id.clone()).or_insert_with(|| {
            ids.push(id.clone());
            ids.len() - 1
        });
        let ui = *source_index.entry(source.clone()).or_insert_with(|| {
            sources.push(source.clone());
            sources.len() - 1
        });
        if cells.insert((si, ui, t), value).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate entry for ({id}, {source}, t={t})"),
            });
        }
        max_t = max_t.max(t);
    }
    if ids.is_empty() {
        return Err(Error::Validation("scenario file has no rows".into()));
    }
    let horizon = max_t + 1;
    let mut scenarios = Vec::with_capacity(ids.len());
    for (si, id) in ids.iter().enumerate() {
        let mut values = Vec::with_capacity(sources.len() * horizon);
        for ui in 0..sources.len() {
            for t in 0..horizon {
                match cells.get(&(si, ui, t)) {
                    Some(&v) => values.push(v),
                    None => {
                        return Err(Error::Shape(format!(
                            "scenario `{id}` is missing source `{}` at t={t}",
                            sources[ui]
                        )))
                    }
                }
            }
        }
        scenarios.push(Scenario::new(id.clone(), values, horizon));
    }

    let probabilities = match probabilities_csv {
        None => vec![1.0 / ids.len() as f64; ids.len()],
        Some(text) => parse_probabilities(text, &id_index)?,
    };
    ScenarioSet::new(sources, scenarios, probabilities)
}

fn parse_probabilities(text: &str, id_index: &HashMap<String, usize>) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    check_header(reader.headers()?, &["scenario_id", "probability"], 1)?;
    let mut probs: Vec<Option<f64>> = vec![None; id_index.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let idx = *id_index.get(&record[0]).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown scenario id `{}`", &record[0]),
        })?;
        let p: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid probability `{}`", &record[1]),
        })?;
        if probs[idx].replace(p).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate probability for `{}`", &record[0]),
            });
        }
    }
    let probs = probs
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| Error::Validation(format!("scenario #{i} has no probability")))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_FILE_TOL {
        return Err(Error::Validation(format!(
            "probabilities sum to {total}, expected 1 within {PROBABILITY_FILE_TOL}"
        )));
    }
    if probs.iter().all(|&p| p == probs[0]) {
        // Equal weights are set to exactly 1/N so Σγ = 1 holds without drift.
        let n = probs.len() as f64;
        return Ok(vec![1.0 / n; probs.len()]);
    }
    normalize_probabilities(&probs)
}

fn check_header(header: &csv::StringRecord, expected: &[&str], line: usize) -> Result<()> {
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line,
            message: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn long_csv(n: usize, sources: &[&str], horizon: usize) -> String {
        let mut s = String::from("scenario_id,source,t,value\n");
        for i in 0..n {
            for (u, src) in sources.iter().enumerate() {
                for t in 0..horizon {
                    s.push_str(&format!("s{i},{src},{t},{}\n", (i + u + t) as f64 * 0.1));
                }
            }
        }
        s
    }

    #[test]
    fn single_scenario_gets_unit_weight() {
        let set = parse_scenarios(&long_csv(1, &["load1"], 2), None).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.probabilities(), &[1.0]);
        assert_eq!(set.horizon(), 2);
    }

    #[test]
    fn uniform_probability_file_sums_to_one_exactly() {
        let probs = "scenario_id,probability\ns0,0.25\ns1,0.25\ns2,0.25\ns3,0.25\n";
        let set = parse_scenarios(&long_csv(4, &["load1", "price"], 3), Some(probs)).unwrap();
        assert_eq!(set.probabilities().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn probabilities_off_by_more_than_tolerance_rejected() {
        let probs = "scenario_id,probability\ns0,0.5\ns1,0.3\ns2,0.3\n";
        let err = parse_scenarios(&long_csv(3, &["load1"], 2), Some(probs)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "scenario_id,source,t,value\ns0,load1,0,1.0\ns0,load1,x,1.0\n";
        match parse_scenarios(text, None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ragged_shape_rejected() {
        let text = "scenario_id,source,t,value\ns0,load1,0,1\ns0,load1,1,1\ns1,load1,0,1\n";
        assert!(matches!(parse_scenarios(text, None).unwrap_err(), Error::Shape(_)));
    }

    #[test]
    fn negative_power_rejected_but_negative_price_allowed() {
        let bad = "scenario_id,source,t,value\ns0,load1,0,-1\n";
        assert!(parse_scenarios(bad, None).is_err());
        let ok = "scenario_id,source,t,value\ns0,price,0,-1\n";
        assert!(parse_scenarios(ok, None).is_ok());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_probabilities(&[1.0, 1.0, 1.0, 1.0]).unwrap(),
            vec![0.25; 4]
        );
        assert_eq!(normalize_probabilities(&[3.0, 1.0]).unwrap(), vec![0.75, 0.25]);
        assert!(normalize_probabilities(&[2.0, 0.0, 2.0]).is_err());
        assert!(normalize_probabilities(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn index_order_follows_first_appearance() {
        let text = "scenario_id,source,t,value\nb,load1,0,1\na,load1,0,2\n";
        let set = parse_scenarios(text, None).unwrap();
        assert_eq!(set.scenario(0).id, "b");
        assert_eq!(set.scenario(1).id, "a");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip_is_bit_identical(
                vals in proptest::collection::vec(0.0f64..1e6, 12),
                raw in proptest::collection::vec(0.01f64..10.0, 3),
            ) {
                let probs = normalize_probabilities(&raw).unwrap();
                let scenarios = (0..3)
                    .map(|i| Scenario::new(format!("s{i}"), vals[i * 4..(i + 1) * 4].to_vec(), 2))
                    .collect();
                let set = ScenarioSet::new(
                    vec!["wt".into(), "load_a".into()],
                    scenarios,
                    probs,
                ).unwrap();
                let mut pbuf = Vec::new();
                set.write_probabilities_csv(&mut pbuf).unwrap();
                let back = parse_scenarios(
                    std::str::from_utf8(&set.csv_bytes()).unwrap(),
                    Some(std::str::from_utf8(&pbuf).unwrap()),
                ).unwrap();
                for (a, b) in set.scenarios().iter().zip(back.scenarios()) {
                    prop_assert_eq!(a.values(), b.values());
                }
                for (a, b) in set.probabilities().iter().zip(back.probabilities()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}
