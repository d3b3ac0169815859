use crate::exec::{map_range, Execution};
use crate::game::{argmin_first, QFunction, StochasticPolicy};
use crate::hypothesis::{induced_best_response, restricted_stage_response, FiniteValueFamily, PolicyFamily};
use crate::onemg::ReplayBuffer;
use crate::error::Result;

/// Index of the pair `(π_p, f_i)` in the flattened product, `p`-major.
pub fn pair_index(p: usize, i: usize, n_values: usize) -> usize {
    p * n_values + i
}

/// `f_h(x, π, ν_π^f)` for every `(h, x)`, where `ν_π^f` picks the best row of
/// the class at each state. `H × S`, row-major.
pub fn restricted_values(f: &QFunction, pi: &StochasticPolicy, class: &PolicyFamily) -> Vec<f64> {
    let sh = f.shape();
    let mut out = Vec::with_capacity(sh.horizon * sh.n_states);
    for h in 0..sh.horizon {
        for x in 0..sh.n_states {
            out.push(restricted_stage_response(f, h, x, pi.row(h, x), class.members()).1);
        }
    }
    out
}

/// Restricted values of every pair, indexed by [`pair_index`].
pub fn all_restricted_values(policies: &PolicyFamily, values: &FiniteValueFamily, exec: Execution) -> Vec<Vec<f64>> {
    let n = values.len();
    map_range(exec, policies.len() * n, |j| restricted_values(values.member(j % n), &policies.members()[j / n], policies))
}

fn successor(table: &[f64], n_states: usize, horizon: usize, h: usize) -> Option<&[f64]> {
    (h + 1 < horizon).then(|| &table[(h + 1) * n_states..(h + 2) * n_states])
}

/// `Σ_τ [ξ(x,a,b) − r − ζ_{h+1}(x', π, ν_π^ζ)]²` over level `h`, with the
/// successor read from the restricted values of the pair `(π, ζ)`.
pub fn pair_loss(buffer: &ReplayBuffer, h: usize, xi: &[f64], succ_values: &[f64]) -> f64 {
    let sh = buffer.shape();
    buffer.squared_loss(h, xi, successor(succ_values, sh.n_states, sh.horizon, h))
}

/// Per-level excess of a pair over the best candidate level table.
pub fn pair_excess(buffer: &ReplayBuffer, f: &QFunction, succ_values: &[f64], candidates: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let sh = f.shape();
    (0..sh.horizon)
        .map(|h| {
            let own = pair_loss(buffer, h, f.level(h), succ_values);
            let best = candidates[h].iter().map(|g| pair_loss(buffer, h, g, succ_values)).fold(f64::INFINITY, f64::min);
            own - best.min(own)
        })
        .collect()
}

/// Surviving pair indices after a full recheck of the product; on an empty
/// result the pair with the smallest total excess is kept and flagged.
pub fn update_pairs(
    buffer: &ReplayBuffer,
    policies: &PolicyFamily,
    values: &FiniteValueFamily,
    restricted: &[Vec<f64>],
    candidates: &[Vec<Vec<f64>>],
    beta: f64,
    exec: Execution,
) -> (Vec<usize>, bool) {
    let n = values.len();
    let excess = map_range(exec, policies.len() * n, |j| pair_excess(buffer, values.member(j % n), &restricted[j], candidates));
    let kept: Vec<usize> = (0..excess.len()).filter(|&j| excess[j].iter().all(|&e| e <= beta)).collect();
    if !kept.is_empty() {
        return (kept, false);
    }
    let totals: Vec<f64> = excess.iter().map(|e| e.iter().sum()).collect();
    let (keep, _) = argmin_first(&totals);
    log::warn!("pair set empty after elimination (beta = {beta}); keeping pair {keep}");
    (vec![keep], true)
}

/// `argmax f_1(x_1, π, ν_π^f)` over surviving pairs, lowest `(π, f)` on ties.
/// Returns the pair index and its value.
pub fn select_pair(survivors: &[usize], restricted: &[Vec<f64>], x1: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &j in survivors {
        let v = restricted[j][x1];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best
}

/// Among surviving pairs sharing policy `p`, `argmin g_1(x_1, π_p, ν_{π_p}^g)`.
/// Returns the value-member index, its value and the executed opponent.
pub fn select_pessimistic(
    survivors: &[usize],
    p: usize,
    policies: &PolicyFamily,
    values: &FiniteValueFamily,
    restricted: &[Vec<f64>],
    x1: usize,
) -> Result<Option<(usize, f64, StochasticPolicy)>> {
    let n = values.len();
    let mut best: Option<(usize, f64)> = None;
    for &j in survivors.iter().filter(|&&j| j / n == p) {
        let v = restricted[j][x1];
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((j % n, v));
        }
    }
    match best {
        None => Ok(None),
        Some((g, v)) => {
            let nu = induced_best_response(values.member(g), &policies.members()[p], Some(policies))?;
            Ok(Some((g, v, nu)))
        }
    }
}
