//! Multi-seed runs, per-run CSVs, summaries, charts and the replay audit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, Instance};
use super::stats::{distribution, mean_trace, sublinearity_test, Distribution, Sublinearity};
use super::svg::line_chart;
use crate::aome::{run_aome, AomeConfig};
use crate::aove::{run_aove, run_aove_symmetric, AoveConfig, Role};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::fileio::{read_json, write_atomic, write_json};
use crate::game::EpisodeRecord;
use crate::linear::{run_linear, LinearConfig};
use crate::onemg::{self, OnemgConfig};

/// Serialises rows with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

/// One JSON object per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).map_err(|e| Error::Numerical(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { path: format!("{}:{}", path.display(), i + 1), message: e.to_string() })
        })
        .collect()
}

/// Outcome of one seed.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub csv: String,
    /// Extra CSVs as `(suffix, contents)`.
    pub extra: Vec<(String, String)>,
    pub episodes: Option<Vec<EpisodeRecord>>,
    /// Cumulative regret per episode, or survivors per round for `aome`.
    pub trace: Vec<f64>,
    /// Final cumulative regret, or the exact gap at termination for `aome`.
    pub final_value: Option<f64>,
    pub retained: Option<bool>,
    /// Violations of exact invariants.
    pub hard_failures: usize,
    /// Events the guarantees allow with small probability.
    pub theory_events: usize,
}

fn with_seed<T: Clone>(block: &Option<T>, set: impl Fn(&mut T)) -> Result<T> {
    let mut c = block.clone().ok_or_else(|| Error::Config("missing algorithm block".into()))?;
    set(&mut c);
    Ok(c)
}

fn need<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("missing {what}")))
}

/// Runs one seed of `cfg` on `inst`.
pub fn run_seed(cfg: &ExperimentConfig, inst: &Instance, seed: u64) -> Result<RunOutput> {
    let game = &inst.game;
    match cfg.algorithm {
        Algorithm::Onemg => {
            let c: OnemgConfig = with_seed(&cfg.onemg, |c| c.seed = seed)?;
            let run = onemg::run(game, need(&inst.values, "value family")?, &c, &inst.opponent)?;
            Ok(RunOutput {
                seed,
                csv: to_csv(&run.rows)?,
                extra: Vec::new(),
                trace: run.rows.iter().map(|r| r.cum_regret).collect(),
                final_value: Some(run.cumulative_regret()),
                retained: run.qstar_retained(),
                hard_failures: run.optimism_violations,
                theory_events: run.fallback_events + usize::from(run.qstar_retained() == Some(false)),
                episodes: Some(run.episodes),
            })
        }
        Algorithm::Linear => {
            let c: LinearConfig = with_seed(&cfg.linear, |c| c.seed = seed)?;
            let run = run_linear(game, need(&inst.features, "features")?, &c, &inst.opponent)?;
            Ok(RunOutput {
                seed,
                csv: to_csv(&run.rows)?,
                extra: Vec::new(),
                trace: run.rows.iter().map(|r| r.cum_regret).collect(),
                final_value: Some(run.cumulative_regret()),
                retained: run.theta_always_feasible(),
                hard_failures: run.optimism_violations + usize::from(!run.potential_ok),
                theory_events: usize::from(run.theta_always_feasible() == Some(false)),
                episodes: Some(run.episodes),
            })
        }
        Algorithm::Aome => {
            let c: AomeConfig = with_seed(&cfg.aome, |c| c.seed = seed)?;
            let run = run_aome(game, need(&inst.models, "model family")?, need(&inst.tests, "test functions")?, &c)?;
            let term = run.termination.as_ref();
            let mut extra = Vec::new();
            if let Some(t) = term {
                extra.push(("termination".to_string(), to_csv(std::slice::from_ref(&TerminationRow::from(t)))?));
            }
            Ok(RunOutput {
                seed,
                csv: to_csv(&run.rounds)?,
                extra,
                trace: run.rounds.iter().map(|r| r.survivors as f64).collect(),
                final_value: term.map(|t| t.exact_gap),
                retained: run.mstar_never_eliminated(),
                hard_failures: run.bracket_violations + usize::from(!run.nested),
                theory_events: usize::from(term.is_none_or(|t| !t.certified))
                    + usize::from(run.mstar_never_eliminated() == Some(false)),
                episodes: None,
            })
        }
        Algorithm::Aove => {
            let c: AoveConfig = with_seed(&cfg.aove, |c| c.seed = seed)?;
            let pols = need(&inst.policies, "policy class")?;
            let values = need(&inst.values, "value family")?;
            let (run, extra) = if c.role == Role::Both {
                let sym = run_aove_symmetric(game, pols, values, need(&inst.values_p2, "player-2 value family")?, &c)?;
                let gaps: Vec<GapRow> =
                    sym.combined_gap.iter().enumerate().map(|(k, &g)| GapRow { k: k + 1, duality_gap: g, optimal_term: sym.optimal_term }).collect();
                let extra = vec![("p2".to_string(), to_csv(&sym.p2.rows)?), ("gap".to_string(), to_csv(&gaps)?)];
                (sym.p1, extra)
            } else {
                (run_aove(game, pols, values, &c)?, Vec::new())
            };
            let retention = run.truth_retention();
            Ok(RunOutput {
                seed,
                csv: to_csv(&run.rows)?,
                extra,
                trace: run.rows.iter().map(|r| r.cum_regret).collect(),
                final_value: Some(run.cumulative_regret()),
                retained: retention.map(|f| f == 1.0),
                hard_failures: run.bracket_violations,
                theory_events: run.fallback_events + usize::from(retention.is_some_and(|f| f < 1.0)),
                episodes: None,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TerminationRow {
    round: usize,
    v_hat: f64,
    v_hat_se: f64,
    exact_gap: f64,
    certified: bool,
}

impl From<&crate::aome::Termination> for TerminationRow {
    fn from(t: &crate::aome::Termination) -> Self {
        TerminationRow { round: t.round, v_hat: t.v_hat, v_hat_se: t.v_hat_se, exact_gap: t.exact_gap, certified: t.certified }
    }
}

#[derive(Debug, Clone, Serialize)]
struct GapRow {
    k: usize,
    duality_gap: f64,
    optimal_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_value: Option<f64>,
    pub retained: Option<bool>,
    pub hard_failures: usize,
    pub theory_events: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub algorithm: Algorithm,
    /// What `final_value` measures.
    pub final_metric: String,
    pub seeds: Vec<SeedResult>,
    pub finals: Option<Distribution>,
    /// Fraction of successful runs whose tracked truth was never lost.
    pub retention: Option<f64>,
    /// Ratio test and growth exponent on the mean regret trace.
    pub sublinearity: Option<Sublinearity>,
    pub theory_events: usize,
    pub hard_failures: usize,
    pub errors: usize,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.hard_failures == 0 && self.errors == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
}

pub fn run_file(algo: Algorithm, seed: u64) -> String {
    format!("{}_seed{seed}.csv", algo.name())
}

pub fn episodes_file(algo: Algorithm, seed: u64) -> String {
    format!("{}_seed{seed}_episodes.jsonl", algo.name())
}

fn summarize(algo: Algorithm, outs: &[(u64, Result<RunOutput>)]) -> SweepSummary {
    let seeds: Vec<SeedResult> = outs
        .iter()
        .map(|(seed, r)| match r {
            Ok(o) => SeedResult {
                seed: *seed,
                final_value: o.final_value,
                retained: o.retained,
                hard_failures: o.hard_failures,
                theory_events: o.theory_events,
                error: None,
            },
            Err(e) => SeedResult { seed: *seed, final_value: None, retained: None, hard_failures: 0, theory_events: 0, error: Some(e.to_string()) },
        })
        .collect();
    let finals: Vec<f64> = seeds.iter().filter_map(|s| s.final_value).collect();
    let tracked: Vec<bool> = seeds.iter().filter_map(|s| s.retained).collect();
    let sublinearity = if algo == Algorithm::Aome {
        None
    } else {
        let traces: Vec<Vec<f64>> = outs.iter().filter_map(|(_, r)| r.as_ref().ok().map(|o| o.trace.clone())).collect();
        let mean = mean_trace(&traces);
        if mean.len() >= 10 {
            sublinearity_test(&mean, None).ok()
        } else {
            None
        }
    };
    SweepSummary {
        algorithm: algo,
        final_metric: if algo == Algorithm::Aome { "exact gap at termination" } else { "cumulative regret" }.into(),
        finals: distribution(&finals),
        retention: (!tracked.is_empty()).then(|| tracked.iter().filter(|&&b| b).count() as f64 / tracked.len() as f64),
        sublinearity,
        theory_events: seeds.iter().map(|s| s.theory_events).sum(),
        hard_failures: seeds.iter().map(|s| s.hard_failures).sum(),
        errors: seeds.iter().filter(|s| s.error.is_some()).count(),
        seeds,
    }
}

fn summary_csv(summary: &SweepSummary) -> Result<String> {
    to_csv(&summary.seeds)
}

fn chart(algo: Algorithm, outs: &[(u64, Result<RunOutput>)]) -> String {
    let traces: Vec<Vec<f64>> = outs.iter().filter_map(|(_, r)| r.as_ref().ok().map(|o| o.trace.clone())).collect();
    let mean = mean_trace(&traces);
    let (x, y) = if algo == Algorithm::Aome { ("round", "surviving models") } else { ("episode", "cumulative regret") };
    line_chart(&format!("{} over {} seeds", algo.name(), traces.len()), x, y, &traces, &mean)
}

/// Runs every seed, writes artifacts under `out` and returns the summary.
/// Failed seeds are recorded and the rest continue.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepSummary> {
    cfg.validate()?;
    let inst = Instance::build(cfg)?;
    let algo = cfg.algorithm;
    let results = map_range(cfg.execution, cfg.seeds.len(), |i| {
        let seed = cfg.seeds[i];
        let r = run_seed(cfg, &inst, seed);
        if let Err(e) = &r {
            log::error!("seed {seed}: {e}");
        }
        (seed, r)
    });
    let mut files = Vec::new();
    for (seed, r) in &results {
        let Ok(o) = r else { continue };
        let name = run_file(algo, *seed);
        write_atomic(out.join(&name), o.csv.as_bytes())?;
        files.push(name);
        for (suffix, text) in &o.extra {
            let name = format!("{}_seed{seed}_{suffix}.csv", algo.name());
            write_atomic(out.join(&name), text.as_bytes())?;
            files.push(name);
        }
        if let Some(eps) = &o.episodes {
            let name = episodes_file(algo, *seed);
            write_atomic(out.join(&name), to_jsonl(eps)?.as_bytes())?;
            files.push(name);
        }
    }
    let summary = summarize(algo, &results);
    write_atomic(out.join("summary.csv"), summary_csv(&summary)?.as_bytes())?;
    write_json(out.join("summary.json"), &summary)?;
    write_atomic(out.join("regret.svg"), chart(algo, &results).as_bytes())?;
    write_atomic(out.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    files.extend(["summary.csv", "summary.json", "regret.svg", "config.toml"].map(String::from));
    write_json(out.join("manifest.json"), &Manifest { algorithm: algo, seeds: cfg.seeds.clone(), files })?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub file: String,
    pub matches: bool,
    /// 1-based line of the first difference.
    pub first_difference: Option<usize>,
    pub how: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.matches)
    }
}

fn first_difference(a: &str, b: &str) -> Option<usize> {
    let mut la = a.lines();
    let mut lb = b.lines();
    let mut i = 0;
    loop {
        i += 1;
        match (la.next(), lb.next()) {
            (None, None) => return None,
            (x, y) if x == y => continue,
            _ => return Some(i),
        }
    }
}

/// Recomputes every per-run CSV of a sweep directory and diffs it against
/// the stored file. `onemg` runs are replayed from their episode logs (with
/// the decomposition audit on); the others are deterministic by seed and
/// are rerun.
pub fn audit_dir(dir: &Path) -> Result<AuditReport> {
    let manifest: Manifest = read_json(dir.join("manifest.json"))?;
    let cfg = ExperimentConfig::parse(&std::fs::read_to_string(dir.join("config.toml")).map_err(|e| Error::io(dir, e))?)?;
    let inst = Instance::build(&cfg)?;
    let mut entries = Vec::new();
    for &seed in &manifest.seeds {
        let name = run_file(manifest.algorithm, seed);
        let path: PathBuf = dir.join(&name);
        if !path.exists() {
            continue;
        }
        let stored = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let (fresh, how) = if manifest.algorithm == Algorithm::Onemg {
            let eps: Vec<EpisodeRecord> = parse_jsonl(&dir.join(episodes_file(manifest.algorithm, seed)))?;
            let mut c = with_seed(&cfg.onemg, |c| c.seed = seed)?;
            c.audit = true;
            let run = onemg::replay(&inst.game, need(&inst.values, "value family")?, &c, &inst.opponent, &eps)?;
            let mut rows = run.rows;
            if !cfg.onemg.as_ref().is_some_and(|o| o.audit) {
                rows.iter_mut().for_each(|r| r.audit_min_slack = None);
            }
            (to_csv(&rows)?, "replayed from episode log")
        } else {
            (run_seed(&cfg, &inst, seed)?.csv, "rerun from seed")
        };
        let diff = first_difference(&stored, &fresh);
        entries.push(AuditEntry { file: name, matches: diff.is_none(), first_difference: diff, how });
    }
    Ok(AuditReport { entries })
}

/// Human-readable one-line-per-seed digest of a summary.
pub fn describe(summary: &SweepSummary) -> String {
    let mut s = String::new();
    for r in &summary.seeds {
        let _ = write!(s, "seed {:>4}: ", r.seed);
        match &r.error {
            Some(e) => {
                let _ = writeln!(s, "error: {e}");
            }
            None => {
                let fv = r.final_value.map_or("-".to_string(), |v| format!("{v:.4}"));
                let kept = r.retained.map_or("-", |b| if b { "yes" } else { "no" });
                let _ = writeln!(s, "{} {fv}, truth kept {kept}, hard failures {}, theory events {}", summary.final_metric, r.hard_failures, r.theory_events);
            }
        }
    }
    if let Some(d) = &summary.finals {
        let _ = writeln!(s, "mean {:.4}  median {:.4}  IQR {:.4}", d.mean, d.median, d.iqr);
    }
    if let Some(r) = summary.retention {
        let _ = writeln!(s, "retention {r:.3}");
    }
    if let Some(sl) = &summary.sublinearity {
        let _ = writeln!(s, "ratio {:.3} ({}), alpha {:.3}", sl.ratio, if sl.ratio_pass { "pass" } else { "fail" }, sl.alpha);
    }
    s
}
