//! The problem-space matrix `F[i][j] = F(z*_i, ξ_j)` and its on-disk cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scenario::ScenarioSet;
use crate::tsso::{
    evaluate_with_fixed_first_stage, solve_scenario_specific, FirstStageDecision, SolveOptions, TieBreak,
    TssoProblem,
};

pub const MATRIX_FILE: &str = "F.csv";
pub const META_FILE: &str = "F.meta.json";
pub const TIMINGS_FILE: &str = "F.timings.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub problem: String,
    pub fingerprint: String,
    pub gap_tol: f64,
    pub tie_break: TieBreak,
    pub scenario_ids: Vec<String>,
    pub decisions: Vec<FirstStageDecision>,
}

/// Wall-clock seconds spent in each phase. Kept out of [`MatrixMeta`] so that
/// the cache files are reproducible byte for byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTimings {
    pub diagonal_s: f64,
    pub off_diagonal_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpaceMatrix {
    pub f: Vec<Vec<f64>>,
    pub meta: MatrixMeta,
    pub timings: ProjectionTimings,
}

impl ProblemSpaceMatrix {
    /// A matrix given directly, without decisions. Scenario ids are `s0`, `s1`, ...
    pub fn from_rows(f: Vec<Vec<f64>>, gap_tol: f64) -> Result<Self> {
        let n = f.len();
        if f.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("problem-space matrix must be square".into()));
        }
        if f.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Validation("problem-space matrix has non-finite entries".into()));
        }
        Ok(ProblemSpaceMatrix {
            f,
            meta: MatrixMeta {
                problem: "given".into(),
                fingerprint: String::new(),
                gap_tol,
                tie_break: TieBreak::SolverOptimum,
                scenario_ids: (0..n).map(|i| format!("s{i}")).collect(),
                decisions: Vec::new(),
            },
            timings: ProjectionTimings::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.f[i][j]
    }

    pub fn max_abs(&self) -> f64 {
        self.f.iter().flatten().fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    /// Cells where some other decision beats the diagonal on its own
    /// scenario by more than the solver gap: `(i, j)` with
    /// `F[i][i] > F[j][i] + 2·gap_tol·|F[i][i]|`.
    pub fn diagonal_violations(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let tol = 2.0 * self.meta.gap_tol;
        let mut out = Vec::new();
        for i in 0..n {
            let fii = self.f[i][i];
            for j in 0..n {
                if fii > self.f[j][i] + tol * fii.abs() + 1e-9 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Column sums `σ_i = Σ_j F[j][i]`.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| (0..n).map(|j| self.f[j][i]).sum()).collect()
    }
}

/// Stable hash of the problem configuration, scenario data and solve settings.
pub fn fingerprint(problem: &dyn TssoProblem, set: &ScenarioSet, opts: &SolveOptions) -> String {
    let mut h = Sha256::new();
    h.update(problem.kind().as_bytes());
    h.update([0]);
    // serde_json maps are ordered, so this text is canonical.
    h.update(problem.config_json().to_string().as_bytes());
    h.update([0]);
    h.update(set.csv_bytes());
    h.update([0]);
    h.update(opts.gap_tol.to_bits().to_le_bytes());
    h.update([opts.tie_break as u8]);
    hex::encode(h.finalize())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Solves every scenario-specific problem, then evaluates every decision on
/// every other scenario. The result does not depend on `workers`.
pub fn build_problem_space_matrix(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    workers: usize,
    opts: &SolveOptions,
) -> Result<ProblemSpaceMatrix> {
    let n = set.len();
    let pool = pool(workers)?;
    let started = Instant::now();
    let diag: Vec<Result<(FirstStageDecision, f64)>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| solve_scenario_specific(problem, set, i, opts))
            .collect()
    });
    let mut decisions = Vec::with_capacity(n);
    let mut fii = Vec::with_capacity(n);
    for (i, r) in diag.into_iter().enumerate() {
        let (z, v) = r.map_err(|e| cell_error(set, i, i, e))?;
        decisions.push(z);
        fii.push(v);
    }
    let diagonal_s = started.elapsed().as_secs_f64();
    let singles: Vec<ScenarioSet> = (0..n).map(|j| set.singleton(j)).collect();
    let cells: Vec<Result<f64>> = pool.install(|| {
        (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    Ok(fii[i])
                } else {
                    evaluate_with_fixed_first_stage(problem, &decisions[i].values, &singles[j], opts)
                }
            })
            .collect()
    });
    let mut f = vec![vec![0.0; n]; n];
    for (k, r) in cells.into_iter().enumerate() {
        let (i, j) = (k / n, k % n);
        f[i][j] = r.map_err(|e| cell_error(set, i, j, e))?;
    }
    let total_s = started.elapsed().as_secs_f64();
    Ok(ProblemSpaceMatrix {
        f,
        meta: MatrixMeta {
            problem: problem.kind().to_string(),
            fingerprint: fingerprint(problem, set, opts),
            gap_tol: opts.gap_tol,
            tie_break: opts.tie_break,
            scenario_ids: set.scenarios().iter().map(|s| s.id.clone()).collect(),
            decisions,
        },
        timings: ProjectionTimings {
            diagonal_s,
            off_diagonal_s: total_s - diagonal_s,
            total_s,
        },
    })
}

fn cell_error(set: &ScenarioSet, i: usize, j: usize, e: Error) -> Error {
    Error::Infeasible(format!(
        "cell ({i}, {j}) [decision of {} on scenario {}]: {e}",
        set.scenario(i).id,
        set.scenario(j).id
    ))
}

/// Writes `F.csv`, `F.meta.json` and `F.timings.json` into `dir`.
pub fn save_matrix(m: &ProblemSpaceMatrix, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MATRIX_FILE);
    fs::write(&path, matrix_csv(m)?).map_err(|e| Error::io(&path, e))?;
    let path = dir.join(META_FILE);
    let meta = serde_json::to_string_pretty(&m.meta)? + "\n";
    fs::write(&path, meta).map_err(|e| Error::io(&path, e))?;
    let path = dir.join(TIMINGS_FILE);
    let timings = serde_json::to_string_pretty(&m.timings)? + "\n";
    fs::write(&path, timings).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// The `F.csv` text: a header of scenario ids, then one row per decision.
pub fn matrix_csv(m: &ProblemSpaceMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["decision\\scenario".to_string()];
    header.extend(m.meta.scenario_ids.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in m.f.iter().enumerate() {
        let mut rec = vec![m.meta.scenario_ids[i].clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Loads a cache written by [`save_matrix`], refusing it unless its
/// fingerprint equals `expected_fingerprint` (when given).
pub fn load_matrix(dir: &Path, expected_fingerprint: Option<&str>) -> Result<ProblemSpaceMatrix> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: MatrixMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", meta_path.display()),
    })?;
    if let Some(fp) = expected_fingerprint {
        if meta.fingerprint != fp {
            return Err(Error::StaleCache(format!(
                "{} was built for fingerprint {}, expected {fp}",
                dir.display(),
                meta.fingerprint
            )));
        }
    }
    let n = meta.scenario_ids.len();
    if !meta.decisions.is_empty() && meta.decisions.len() != n {
        return Err(Error::Parse {
            line: 0,
            message: format!("{}: {} decisions for {n} scenarios", meta_path.display(), meta.decisions.len()),
        });
    }
    let path = dir.join(MATRIX_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let f = parse_matrix_csv(&text, &meta.scenario_ids)?;
    let timings = fs::read_to_string(dir.join(TIMINGS_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    Ok(ProblemSpaceMatrix { f, meta, timings })
}

fn parse_matrix_csv(text: &str, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let n = ids.len();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::with_capacity(n);
    for (line, rec) in r.records().enumerate() {
        let line = line + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        if line == 1 {
            if rec.iter().skip(1).ne(ids.iter().map(String::as_str)) {
                return Err(Error::Parse {
                    line,
                    message: "header does not match the scenario ids in the metadata".into(),
                });
            }
            continue;
        }
        if rec[0] != ids[line - 2] {
            return Err(Error::Parse {
                line,
                message: format!("row label `{}` should be `{}`", &rec[0], ids[line - 2]),
            });
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|c| {
                c.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("`{c}` is not a finite number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        if rows.len() > n {
            return Err(Error::Parse {
                line,
                message: "more rows than scenarios".into(),
            });
        }
    }
    if rows.len() != n {
        return Err(Error::Parse {
            line: rows.len() + 1,
            message: format!("matrix has {} rows, expected {n} (truncated file?)", rows.len()),
        });
    }
    Ok(rows)
}

/// Cache directory: `PDSR_CACHE_DIR` if set, else `<out>/cache`.
pub fn cache_dir(out: &Path) -> PathBuf {
    match std::env::var_os("PDSR_CACHE_DIR") {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => out.join("cache"),
    }
}

/// Loads the cached matrix for this fingerprint if present and valid,
/// otherwise builds and stores it. The flag is true on a cache hit.
pub fn build_or_load(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    workers: usize,
    opts: &SolveOptions,
    cache: &Path,
) -> Result<(ProblemSpaceMatrix, bool)> {
    let fp = fingerprint(problem, set, opts);
    let dir = cache.join(&fp[..16]);
    match load_matrix(&dir, Some(&fp)) {
        Ok(m) => return Ok((m, true)),
        Err(Error::Io(_)) | Err(Error::File { .. }) => {}
        Err(e) => log::warn!("ignoring unusable cache in {}: {e}", dir.display()),
    }
    let m = build_problem_space_matrix(problem, set, workers, opts)?;
    save_matrix(&m, &dir)?;
    Ok((m, false))
}
