use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};

/// Largest measure count the exact search accepts.
pub const DEFAULT_MEASURE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Exact,
    Greedy,
}

impl FromStr for SearchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SearchMode::Exact),
            "greedy" => Ok(SearchMode::Greedy),
            t => Err(Error::Config(format!("mode must be exact or greedy, got `{t}`"))),
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Exact => "exact",
            SearchMode::Greedy => "greedy",
        })
    }
}

/// Quantifier scope of the scale `ε' ≥ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleReading {
    /// One `ε'` for the whole sequence.
    #[default]
    Shared,
    /// Each element may use its own `ε'_i ≥ ε`.
    PerStep,
}

/// `Σ_cell μ(cell) · g(cell)`.
pub fn expectation(measure: &[f64], g: &[f64]) -> f64 {
    measure.iter().zip(g).map(|(m, v)| m * v).sum()
}

/// Whether `nu` is `eps`-independent of `prefix`: some `g` has
/// `√Σ_i (E_{μ_i} g)² ≤ eps` and `|E_ν g| ≥ eps`.
pub fn is_eps_independent(residuals: &[Vec<f64>], nu: &[f64], prefix: &[&[f64]], eps: f64) -> bool {
    residuals.iter().any(|g| {
        let norm2: f64 = prefix.iter().map(|mu| expectation(mu, g).powi(2)).sum();
        norm2 <= eps * eps && expectation(nu, g).abs() >= eps
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EluderResult {
    pub dimension: usize,
    /// Measure indices of a longest sequence found, in order.
    pub witness: Vec<usize>,
    /// Scale the witness was found at (the shared reading only).
    pub scale: Option<f64>,
}

/// Expectations `E[m][g]` of every residual under every measure.
struct Table {
    e: Vec<Vec<f64>>,
}

impl Table {
    fn new(residuals: &[Vec<f64>], measures: &[Vec<f64>]) -> Self {
        Table { e: measures.iter().map(|m| residuals.iter().map(|g| expectation(m, g)).collect()).collect() }
    }

    fn n_measures(&self) -> usize {
        self.e.len()
    }

    /// Whether measure `m` may follow a prefix with squared norms `norms`.
    fn addable(&self, m: usize, norms: &[f64], reading: ScaleReading, eps: f64) -> bool {
        self.e[m].iter().zip(norms).any(|(&v, &n2)| {
            let v = v.abs();
            match reading {
                ScaleReading::Shared => n2 <= eps * eps && v >= eps,
                ScaleReading::PerStep => v >= eps && n2 <= v * v,
            }
        })
    }

    fn extend(&self, norms: &[f64], m: usize) -> Vec<f64> {
        norms.iter().zip(&self.e[m]).map(|(n, v)| n + v * v).collect()
    }
}

/// Candidate scales for the shared reading: every achievable `|E_ρ g| ≥ ε`
/// together with `ε`, ascending. A nonempty set of valid scales is a finite
/// intersection of unions of closed intervals ending at such values, so its
/// largest point is on this grid.
fn scale_grid(table: &Table, eps: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = table.e.iter().flatten().map(|v| v.abs()).filter(|&v| v >= eps).collect();
    grid.push(eps);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Branch and bound for a sequence longer than a known one. `memo[used]`
/// holds an upper bound on how many measures can still follow `used`.
struct Search<'a> {
    table: &'a Table,
    reading: ScaleReading,
    eps: f64,
    memo: HashMap<u64, usize>,
}

impl Search<'_> {
    /// Upper bound on the extension length from `norms`. Under the shared
    /// reading a witness gains at least `eps²` of norm, so a residual can
    /// witness twice only from (numerically) zero norm and once otherwise.
    fn capacity(&self, norms: &[f64]) -> usize {
        match self.reading {
            ScaleReading::Shared => {
                let e2 = self.eps * self.eps;
                norms.iter().filter(|&&n| n <= e2).map(|&n| if n + e2 <= e2 { 2 } else { 1 }).sum()
            }
            ScaleReading::PerStep => usize::MAX,
        }
    }

    /// A path of exactly `need` further measures, if one exists.
    fn reach(&mut self, used: u64, norms: &[f64], need: usize) -> Option<Vec<usize>> {
        if need == 0 {
            return Some(Vec::new());
        }
        if self.memo.get(&used).is_some_and(|&u| u < need) {
            return None;
        }
        let candidates: Vec<usize> = (0..self.table.n_measures())
            .filter(|&m| used & (1 << m) == 0 && self.table.addable(m, norms, self.reading, self.eps))
            .collect();
        let bound = candidates.len().min(self.capacity(norms));
        if bound >= need {
            for m in candidates {
                if let Some(mut path) = self.reach(used | (1 << m), &self.table.extend(norms, m), need - 1) {
                    path.insert(0, m);
                    return Some(path);
                }
            }
        }
        let upper = bound.min(need - 1);
        let entry = self.memo.entry(used).or_insert(upper);
        *entry = (*entry).min(upper);
        None
    }
}

/// Longest sequence at scale `eps` if it beats `floor` measures.
fn exact_at(table: &Table, reading: ScaleReading, eps: f64, floor: usize) -> Option<Vec<usize>> {
    let mut s = Search { table, reading, eps, memo: HashMap::new() };
    let zeros = vec![0.0; table.e.first().map_or(0, Vec::len)];
    let mut best = None;
    let mut need = floor + 1;
    while let Some(path) = s.reach(0, &zeros, need) {
        best = Some(path);
        need += 1;
    }
    best
}

fn greedy_at(table: &Table, reading: ScaleReading, eps: f64) -> Vec<usize> {
    let mut norms = vec![0.0; table.e.first().map_or(0, Vec::len)];
    let mut used = vec![false; table.n_measures()];
    let mut out = Vec::new();
    while let Some(m) = (0..table.n_measures()).find(|&m| !used[m] && table.addable(m, &norms, reading, eps)) {
        used[m] = true;
        norms = table.extend(&norms, m);
        out.push(m);
    }
    out
}

/// Longest sequence of distinct measures, each independent of its prefix
/// at some scale `ε' ≥ eps`. Exact mode refuses more than `cap` measures.
pub fn de_dimension(
    residuals: &[Vec<f64>],
    measures: &[Vec<f64>],
    eps: f64,
    mode: SearchMode,
    reading: ScaleReading,
    cap: usize,
    exec: Execution,
) -> Result<EluderResult> {
    if !(eps > 0.0) {
        return Err(Error::Input(format!("scale must be positive, got {eps}")));
    }
    if mode == SearchMode::Exact && measures.len() > cap.min(64) {
        return Err(Error::SizeCap { size: measures.len(), cap: cap.min(64) });
    }
    let table = Table::new(residuals, measures);
    let scales = match reading {
        ScaleReading::PerStep => vec![eps],
        ScaleReading::Shared => scale_grid(&table, eps),
    };
    let greedy = map_range(exec, scales.len(), |i| greedy_at(&table, reading, scales[i]));
    let mut best = 0;
    for (i, w) in greedy.iter().enumerate() {
        if w.len() > greedy[best].len() {
            best = i;
        }
    }
    let mut witness = greedy[best].clone();
    if mode == SearchMode::Exact {
        // any longer sequence beats every greedy one; keep the first scale
        // reaching the overall maximum
        let floor = witness.len();
        let found = map_range(exec, scales.len(), |i| exact_at(&table, reading, scales[i], floor));
        let mut top = floor;
        for (i, f) in found.into_iter().enumerate() {
            if let Some(path) = f.filter(|p| p.len() > top) {
                top = path.len();
                best = i;
                witness = path;
            }
        }
    }
    let scale = (reading == ScaleReading::Shared).then(|| scales[best]);
    Ok(EluderResult { dimension: witness.len(), witness, scale })
}

/// Replays a witness through [`is_eps_independent`].
pub fn verify_witness(residuals: &[Vec<f64>], measures: &[Vec<f64>], result: &EluderResult, eps: f64) -> bool {
    result.witness.iter().enumerate().all(|(i, &m)| {
        let prefix: Vec<&[f64]> = result.witness[..i].iter().map(|&j| measures[j].as_slice()).collect();
        match result.scale {
            Some(s) => s >= eps && is_eps_independent(residuals, &measures[m], &prefix, s),
            None => residuals.iter().any(|g| {
                let v = expectation(&measures[m], g).abs();
                v >= eps && is_eps_independent(std::slice::from_ref(g), &measures[m], &prefix, v)
            }),
        }
    })
}
