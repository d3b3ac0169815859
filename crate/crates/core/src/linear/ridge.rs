use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{EpisodeRecord, Shape};
use crate::hypothesis::LinearFeatures;

/// Solves `Λ w = b` for symmetric positive definite `Λ` by Cholesky.
pub fn ridge_solve(gram: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = gram.clone().cholesky().ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?;
    Ok(chol.solve(target))
}

/// Per-level regularised Gram matrices `Λ_h = I + Σ φφᵀ` and the data
/// needed to rebuild the regression targets `Σ φ · [r + V_{h+1}(x')]` for
/// any successor value function.
#[derive(Debug, Clone)]
pub struct LinearState {
    shape: Shape,
    dim: usize,
    gram: Vec<DMatrix<f64>>,
    reward_acc: Vec<DVector<f64>>,
    /// `next_acc[h][x']` = sum of features of transitions landing in `x'`.
    next_acc: Vec<Vec<DVector<f64>>>,
    /// Realised feature sequence per level, for the potential check.
    history: Vec<Vec<DVector<f64>>>,
}

impl LinearState {
    pub fn new(shape: Shape, dim: usize) -> Self {
        LinearState {
            shape,
            dim,
            gram: vec![DMatrix::identity(dim, dim); shape.horizon],
            reward_acc: vec![DVector::zeros(dim); shape.horizon],
            next_acc: vec![vec![DVector::zeros(dim); shape.n_states]; shape.horizon],
            history: vec![Vec::new(); shape.horizon],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self, h: usize) -> &DMatrix<f64> {
        &self.gram[h]
    }

    pub fn history(&self, h: usize) -> &[DVector<f64>] {
        &self.history[h]
    }

    pub fn push_episode(&mut self, features: &LinearFeatures, ep: &EpisodeRecord) -> Result<()> {
        if ep.steps.len() != self.shape.horizon {
            return Err(Error::Shape(format!("episode has {} steps, horizon is {}", ep.steps.len(), self.shape.horizon)));
        }
        for s in &ep.steps {
            let phi = DVector::from_column_slice(features.phi(s.h, s.x, s.a, s.b));
            self.gram[s.h].ger(1.0, &phi, &phi, 1.0);
            self.reward_acc[s.h].axpy(s.r, &phi, 1.0);
            self.next_acc[s.h][s.x_next] += &phi;
            self.history[s.h].push(phi);
        }
        Ok(())
    }

    /// `Σ φ · [r + V_{h+1}(x')]` with `v_next` over states (`None` at the last level).
    pub fn target(&self, h: usize, v_next: Option<&[f64]>) -> DVector<f64> {
        let mut b = self.reward_acc[h].clone();
        if let Some(v) = v_next {
            for (acc, &vx) in self.next_acc[h].iter().zip(v) {
                b.axpy(vx, acc, 1.0);
            }
        }
        b
    }

    /// Ridge solution `w_h = Λ_h^{-1} Σ φ [r + V_{h+1}(x')]`.
    pub fn ridge_update(&self, h: usize, v_next: Option<&[f64]>) -> Result<DVector<f64>> {
        ridge_solve(&self.gram[h], &self.target(h, v_next))
    }
}

/// `(ln det Λ_n, Σ_t φ_tᵀ Λ_{t−1}^{-1} φ_t, 2 ln det Λ_n)` for `Λ_0 = I`.
pub fn elliptic_potential(seq: &[DVector<f64>], dim: usize) -> Result<(f64, f64, f64)> {
    let mut gram = DMatrix::<f64>::identity(dim, dim);
    let mut mid = 0.0;
    for (t, phi) in seq.iter().enumerate() {
        if phi.len() != dim {
            return Err(Error::Shape(format!("feature {t} has dimension {}, expected {dim}", phi.len())));
        }
        if phi.norm() > 1.0 + 1e-12 {
            return Err(Error::Input(format!("feature {t} has norm {} > 1", phi.norm())));
        }
        mid += phi.dot(&ridge_solve(&gram, phi)?);
        gram.ger(1.0, phi, phi, 1.0);
    }
    let chol = gram.cholesky().ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((logdet, mid, 2.0 * logdet))
}

/// Whether `lhs ≤ mid ≤ rhs` within `1e-9`.
pub fn elliptic_potential_holds(seq: &[DVector<f64>], dim: usize) -> Result<bool> {
    let (l, m, r) = elliptic_potential(seq, dim)?;
    Ok(l <= m + 1e-9 && m <= r + 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Step;
    use rand::Rng;

    #[test]
    fn no_data_and_single_transition() {
        let sh = Shape::new(1, 1, 2, 1);
        let feats = LinearFeatures::one_hot(sh);
        let mut st = LinearState::new(sh, 2);
        assert_eq!(st.ridge_update(0, None).unwrap(), DVector::zeros(2));
        st.push_episode(&feats, &EpisodeRecord { steps: vec![Step { h: 0, x: 0, a: 0, b: 0, r: 0.5, x_next: 0 }] }).unwrap();
        let w = st.ridge_update(0, None).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-15 && w[1] == 0.0);
    }

    #[test]
    fn one_hot_ridge_is_shrunk_mean() {
        let sh = Shape::new(2, 2, 2, 1);
        let feats = LinearFeatures::one_hot(sh);
        let mut st = LinearState::new(sh, feats.dim());
        let mut rng = crate::rng::stream(3, &[0]);
        let mut sums = [0.0; 4];
        let mut counts = [0.0; 4];
        let v_next = [0.3, -0.7];
        for _ in 0..40 {
            let (x, a, r, xn) = (rng.random_range(0..2), rng.random_range(0..2), rng.random_range(-1.0..1.0), rng.random_range(0..2));
            let c = sh.cell(x, a, 0);
            sums[c] += r + v_next[xn];
            counts[c] += 1.0;
            let steps = vec![Step { h: 0, x, a, b: 0, r, x_next: xn }, Step { h: 1, x: 0, a: 0, b: 0, r: 0.0, x_next: 0 }];
            st.push_episode(&feats, &EpisodeRecord { steps }).unwrap();
        }
        let w = st.ridge_update(0, Some(&v_next)).unwrap();
        for c in 0..4 {
            assert!((w[c] - sums[c] / (counts[c] + 1.0)).abs() < 1e-12);
        }
        // dense LU as an independent solve
        let direct = st.gram(0).clone().lu().solve(&st.target(0, Some(&v_next))).unwrap();
        assert!((w - direct).amax() < 1e-10);
    }

    #[test]
    fn potential_examples() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let (l, m, r) = elliptic_potential(&[e1], 2).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12 && (m - 1.0).abs() < 1e-12 && (r - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(elliptic_potential(&[], 3).unwrap(), (0.0, 0.0, 0.0));
        assert!(elliptic_potential(&[DVector::from_vec(vec![1.0, 1.0])], 2).is_err());
        let mut rng = crate::rng::stream(9, &[1]);
        let seq: Vec<DVector<f64>> = (0..100)
            .map(|_| {
                let v = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
                let n = v.norm();
                v / n
            })
            .collect();
        assert!(elliptic_potential_holds(&seq, 4).unwrap());
    }
}
