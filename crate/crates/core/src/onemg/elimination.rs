use super::ReplayBuffer;
use crate::exec::{map_range, Execution};
use crate::game::{QFunction, Shape};
use crate::hypothesis::{FiniteValueFamily, SolvedHypothesis};

/// Outcome of one elimination pass over the whole family.
#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    /// Surviving member indices, ascending.
    pub survivors: Vec<usize>,
    /// No member passed and the least-violating one was kept instead.
    pub fallback: bool,
    /// `excess[f][h] = E(f_h, f_{h+1}) − min_g E(g, f_{h+1})`, always ≥ 0.
    pub excess: Vec<Vec<f64>>,
}

/// Distinct level tables at each step, in first-seen member order. These
/// are the candidates `g` of the inner minimum.
pub fn level_candidates(family: &FiniteValueFamily) -> Vec<Vec<Vec<f64>>> {
    let sh = family.shape();
    (0..sh.horizon)
        .map(|h| {
            let mut seen: Vec<Vec<f64>> = Vec::new();
            for m in family.members() {
                let lvl = m.level(h);
                if !seen.iter().any(|s| s.iter().zip(lvl).all(|(a, b)| a.to_bits() == b.to_bits())) {
                    seen.push(lvl.to_vec());
                }
            }
            seen
        })
        .collect()
}

fn successor<'a>(sh: Shape, solved: &'a SolvedHypothesis, h: usize) -> Option<&'a [f64]> {
    (h + 1 < sh.horizon).then(|| &solved.values[(h + 1) * sh.n_states..(h + 2) * sh.n_states])
}

/// Per-level excess loss of `member` over the best level table.
pub fn excess_loss(
    buffer: &ReplayBuffer,
    member: &QFunction,
    solved: &SolvedHypothesis,
    candidates: &[Vec<Vec<f64>>],
) -> Vec<f64> {
    let sh = member.shape();
    (0..sh.horizon)
        .map(|h| {
            let succ = successor(sh, solved, h);
            let own = buffer.squared_loss(h, member.level(h), succ);
            let best = candidates[h].iter().map(|g| buffer.squared_loss(h, g, succ)).fold(f64::INFINITY, f64::min);
            own - best.min(own)
        })
        .collect()
}

/// Keeps the members whose excess loss is at most `beta` at every level.
/// An empty result is replaced by the member with the smallest total
/// excess (lowest index on ties) and flagged.
pub fn update_version_space(
    buffer: &ReplayBuffer,
    family: &FiniteValueFamily,
    solved: &[SolvedHypothesis],
    candidates: &[Vec<Vec<f64>>],
    beta: f64,
    exec: Execution,
) -> Elimination {
    let excess = map_range(exec, family.len(), |i| excess_loss(buffer, family.member(i), &solved[i], candidates));
    let survivors: Vec<usize> = (0..family.len()).filter(|&i| excess[i].iter().all(|&e| e <= beta)).collect();
    if !survivors.is_empty() {
        return Elimination { survivors, fallback: false, excess };
    }
    let totals: Vec<f64> = excess.iter().map(|e| e.iter().sum()).collect();
    let (keep, _) = crate::game::argmin_first(&totals);
    log::warn!("version space empty after elimination (beta = {beta}); keeping member {keep}");
    Elimination { survivors: vec![keep], fallback: true, excess }
}

/// `argmax` of the stage-game value at the initial state over `survivors`,
/// lowest index on ties.
pub fn select_optimistic(survivors: &[usize], solved: &[SolvedHypothesis], x1: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in survivors {
        let v = solved[i].value(0, x1);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}
