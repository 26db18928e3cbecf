//! Closed-form score models standing in for a trained score network.
//!
//! Both priors expose exact scores, the Tweedie posterior-mean denoiser and
//! its vector-Jacobian product, so guidance errors can be attributed to the
//! controller alone.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
pub use crate::state::GraphState;

/// Below this marginal scale the Tweedie denoiser is refused.
pub const MIN_MARGINAL_SCALE: f64 = 1e-8;

/// A time-indexed score `grad log p_t(G_t)` together with the quantities the
/// guidance laws derive from it.
pub trait ScoreModel: Send + Sync {
    fn schedule(&self) -> &NoiseSchedule;

    /// `(N, F)` of the states this model accepts.
    fn shape(&self) -> (usize, usize);

    fn score(&self, g: &GraphState, t: usize) -> Result<GraphState>;

    /// Tweedie posterior mean `E[G_0 | G_t] = (G_t + sigma_t^2 * score) / a_t`.
    fn denoise(&self, g: &GraphState, t: usize) -> Result<GraphState> {
        let a = checked_scale(self.schedule(), t)?;
        let var = self.schedule().sigma(t).powi(2);
        let mut out = self.score(g, t)?;
        out.scale(var);
        out.axpy(1.0, g);
        out.scale(1.0 / a);
        Ok(out)
    }

    /// `J^T * cotangent` where `J` is the Jacobian of [`ScoreModel::denoise`] at `(g, t)`.
    fn denoiser_vjp(&self, g: &GraphState, t: usize, cotangent: &GraphState) -> Result<GraphState>;
}

/// Converts a score into the noise-prediction parameterization `eps = -sigma_t * score`.
pub fn eps_from_score(score: &GraphState, sigma: f64) -> GraphState {
    score * (-sigma)
}

fn checked_scale(schedule: &NoiseSchedule, t: usize) -> Result<f64> {
    schedule.check_index(t)?;
    let a = schedule.scale(t);
    if a < MIN_MARGINAL_SCALE {
        return Err(Error::Numerical(format!(
            "marginal scale a_t = {a:e} at index {t} is too small to denoise"
        )));
    }
    Ok(a)
}

fn check_input(shape: (usize, usize), schedule: &NoiseSchedule, g: &GraphState, t: usize) -> Result<()> {
    schedule.check_index(t)?;
    if (g.n_nodes(), g.n_features()) != shape {
        return Err(Error::Shape {
            expected: format!("N={}, F={}", shape.0, shape.1),
            got: format!("N={}, F={}", g.n_nodes(), g.n_features()),
        });
    }
    g.ensure_finite("score-model input")
}

/// Isotropic Gaussian data distribution `N(mean, std^2 I)`. Every marginal is
/// Gaussian, so score, denoiser and Jacobian are all affine/scalar.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    mean: GraphState,
    std: f64,
    schedule: Arc<NoiseSchedule>,
}

impl GaussianPrior {
    pub fn new(mean: GraphState, std: f64, schedule: Arc<NoiseSchedule>) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::Config(format!("Gaussian prior std must be positive, got {std}")));
        }
        mean.ensure_finite("Gaussian prior mean")?;
        Ok(Self { mean, std, schedule })
    }

    pub fn mean(&self) -> &GraphState {
        &self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    /// Marginal variance `a_t^2 s^2 + sigma_t^2`.
    fn marginal_var(&self, t: usize) -> f64 {
        let a = self.schedule.scale(t);
        a * a * self.std * self.std + self.schedule.sigma(t).powi(2)
    }

    /// Slope of the (affine) denoiser, `a_t s^2 / (a_t^2 s^2 + sigma_t^2)`.
    pub fn denoiser_gain(&self, t: usize) -> f64 {
        self.schedule.scale(t) * self.std * self.std / self.marginal_var(t)
    }
}

impl ScoreModel for GaussianPrior {
    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn shape(&self) -> (usize, usize) {
        (self.mean.n_nodes(), self.mean.n_features())
    }

    fn score(&self, g: &GraphState, t: usize) -> Result<GraphState> {
        check_input(self.shape(), &self.schedule, g, t)?;
        let a = self.schedule.scale(t);
        let inv_var = 1.0 / self.marginal_var(t);
        let data = g
            .as_slice()
            .iter()
            .zip(self.mean.as_slice())
            .map(|(x, m)| -(x - a * m) * inv_var)
            .collect();
        GraphState::from_free(g.n_nodes(), g.n_features(), data)
    }

    fn denoiser_vjp(&self, g: &GraphState, t: usize, cotangent: &GraphState) -> Result<GraphState> {
        check_input(self.shape(), &self.schedule, g, t)?;
        checked_scale(&self.schedule, t)?;
        g.check_same_shape(cotangent)?;
        Ok(cotangent * self.denoiser_gain(t))
    }
}

/// Uniform mixture of point masses at reference graphs. Its noisy marginal is
/// the Gaussian mixture `(1/M) sum_i N(a_t G0_i, sigma_t^2 I)`, whose score is
/// available exactly.
#[derive(Debug, Clone)]
pub struct EmpiricalMixturePrior {
    atoms: Vec<GraphState>,
    schedule: Arc<NoiseSchedule>,
}

impl EmpiricalMixturePrior {
    pub fn new(atoms: Vec<GraphState>, schedule: Arc<NoiseSchedule>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::Config("empirical prior needs at least one atom".into()))?;
        for (i, atom) in atoms.iter().enumerate() {
            first
                .check_same_shape(atom)
                .map_err(|e| Error::Config(format!("atom {i} does not share the node count of atom 0: {e}")))?;
            atom.ensure_finite("prior atom")?;
        }
        Ok(Self { atoms, schedule })
    }

    pub fn atoms(&self) -> &[GraphState] {
        &self.atoms
    }

    /// Posterior responsibilities `w_i(g)` of each atom at noise level `t`,
    /// computed with a max-shifted log-sum-exp.
    pub fn responsibilities(&self, g: &GraphState, t: usize) -> Result<Vec<f64>> {
        check_input(self.shape(), &self.schedule, g, t)?;
        Ok(self.responsibilities_unchecked(g, t).0)
    }

    /// Returns the responsibilities and the log-sum-exp of the logits.
    fn responsibilities_unchecked(&self, g: &GraphState, t: usize) -> (Vec<f64>, f64) {
        let a = self.schedule.scale(t);
        let inv_two_var = 1.0 / (2.0 * self.schedule.sigma(t).powi(2));
        let logits: Vec<f64> = self
            .atoms
            .iter()
            .map(|atom| {
                let d2: f64 = g
                    .as_slice()
                    .iter()
                    .zip(atom.as_slice())
                    .map(|(x, c)| (x - a * c) * (x - a * c))
                    .sum();
                -d2 * inv_two_var
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= total;
        }
        (w, max + total.ln())
    }

    /// `sum_i w_i G0_i`
    fn weighted_mean(&self, w: &[f64]) -> GraphState {
        let mut m = self.atoms[0].zeros_like();
        for (wi, atom) in w.iter().zip(&self.atoms) {
            if *wi != 0.0 {
                m.axpy(*wi, atom);
            }
        }
        m
    }

    /// `log p_t(g)` of the Gaussian-mixture marginal.
    pub fn log_density(&self, g: &GraphState, t: usize) -> Result<f64> {
        check_input(self.shape(), &self.schedule, g, t)?;
        let (_, lse) = self.responsibilities_unchecked(g, t);
        let var = self.schedule.sigma(t).powi(2);
        let d = g.dim() as f64;
        Ok(lse - (self.atoms.len() as f64).ln() - 0.5 * d * (2.0 * std::f64::consts::PI * var).ln())
    }
}

impl ScoreModel for EmpiricalMixturePrior {
    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn shape(&self) -> (usize, usize) {
        (self.atoms[0].n_nodes(), self.atoms[0].n_features())
    }

    fn score(&self, g: &GraphState, t: usize) -> Result<GraphState> {
        check_input(self.shape(), &self.schedule, g, t)?;
        let (w, _) = self.responsibilities_unchecked(g, t);
        let a = self.schedule.scale(t);
        let inv_var = 1.0 / self.schedule.sigma(t).powi(2);
        let mut s = self.weighted_mean(&w);
        s.scale(a);
        s.axpy(-1.0, g);
        s.scale(inv_var);
        Ok(s)
    }

    /// For the mixture the Tweedie mean reduces to `sum_i w_i G0_i`; this form
    /// avoids the cancellation in `(g + sigma^2 score) / a` at small sigma.
    fn denoise(&self, g: &GraphState, t: usize) -> Result<GraphState> {
        check_input(self.shape(), &self.schedule, g, t)?;
        checked_scale(&self.schedule, t)?;
        let (w, _) = self.responsibilities_unchecked(g, t);
        Ok(self.weighted_mean(&w))
    }

    /// `J = (a_t / sigma_t^2) * Cov_w(G0)`, applied as
    /// `(a_t / sigma_t^2) * sum_i w_i (G0_i - m) <G0_i - m, c>`.
    fn denoiser_vjp(&self, g: &GraphState, t: usize, cotangent: &GraphState) -> Result<GraphState> {
        check_input(self.shape(), &self.schedule, g, t)?;
        let a = checked_scale(&self.schedule, t)?;
        g.check_same_shape(cotangent)?;
        let (w, _) = self.responsibilities_unchecked(g, t);
        let m = self.weighted_mean(&w);
        let mc = m.dot(cotangent);
        let mut out = g.zeros_like();
        for (wi, atom) in w.iter().zip(&self.atoms) {
            if *wi == 0.0 {
                continue;
            }
            let proj = atom.dot(cotangent) - mc;
            // accumulate w_i * proj * (atom - m)
            let coef = wi * proj;
            for ((o, x), mm) in out.as_mut_slice().iter_mut().zip(atom.as_slice()).zip(m.as_slice()) {
                *o += coef * (x - mm);
            }
        }
        out.scale(a / self.schedule.sigma(t).powi(2));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal_state};

    fn schedule() -> Arc<NoiseSchedule> {
        Arc::new(NoiseSchedule::new(100, 1e-3, 0.05).unwrap())
    }

    /// First index whose marginal scale is closest to 0.6 (sigma ~= 0.8).
    fn t_near_06(s: &NoiseSchedule) -> usize {
        (0..s.steps())
            .min_by(|&i, &j| (s.scale(i) - 0.6).abs().partial_cmp(&(s.scale(j) - 0.6).abs()).unwrap())
            .unwrap()
    }

    #[test]
    fn unit_gaussian_score_is_minus_identity() {
        let s = schedule();
        let prior = GaussianPrior::new(GraphState::zeros(4, 1), 1.0, s.clone()).unwrap();
        let mut rng = seeded(3);
        let g = standard_normal_state(4, 1, &mut rng);
        let t = t_near_06(&s);
        let score = prior.score(&g, t).unwrap();
        for (a, b) in score.as_slice().iter().zip(g.as_slice()) {
            assert!((a + b).abs() < 1e-12);
        }
        // denoise = a_t g and vjp = a_t c for the unit Gaussian
        let d = prior.denoise(&g, t).unwrap();
        let c = standard_normal_state(4, 1, &mut rng);
        let v = prior.denoiser_vjp(&g, t, &c).unwrap();
        let a = s.scale(t);
        for i in 0..g.dim() {
            assert!((d.as_slice()[i] - a * g.as_slice()[i]).abs() < 1e-12);
            assert!((v.as_slice()[i] - a * c.as_slice()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_atom_mixture_is_a_gaussian_and_a_constant_denoiser() {
        let s = schedule();
        let mut rng = seeded(5);
        let atom = standard_normal_state(5, 2, &mut rng);
        let prior = EmpiricalMixturePrior::new(vec![atom.clone()], s.clone()).unwrap();
        for t in [0, 17, 60, 99] {
            let g = standard_normal_state(5, 2, &mut rng);
            let score = prior.score(&g, t).unwrap();
            let (a, var) = (s.scale(t), s.sigma(t).powi(2));
            for i in 0..g.dim() {
                let want = (a * atom.as_slice()[i] - g.as_slice()[i]) / var;
                assert!((score.as_slice()[i] - want).abs() < 1e-9 * want.abs().max(1.0));
            }
            assert_eq!(prior.denoise(&g, t).unwrap(), atom);
            let c = standard_normal_state(5, 2, &mut rng);
            assert!(prior
                .denoiser_vjp(&g, t, &c)
                .unwrap()
                .as_slice()
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn responsibilities_are_a_distribution_even_at_tiny_sigma() {
        let s = schedule();
        let mut rng = seeded(9);
        let atoms: Vec<_> = (0..6).map(|_| standard_normal_state(6, 0, &mut rng)).collect();
        let prior = EmpiricalMixturePrior::new(atoms, s).unwrap();
        let g = &standard_normal_state(6, 0, &mut rng) * 30.0;
        for t in [0, 50, 99] {
            let w = prior.responsibilities(&g, t).unwrap();
            assert!(w.iter().all(|&x| x >= 0.0 && x.is_finite()));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_input_and_terminal_denoise() {
        let s = Arc::new(NoiseSchedule::new(3000, 0.5, 0.99).unwrap());
        let prior = GaussianPrior::new(GraphState::zeros(2, 0), 1.0, s.clone()).unwrap();
        let mut bad = GraphState::zeros(2, 0);
        bad.set_adj(0, 1, f64::NAN);
        assert!(matches!(prior.score(&bad, 0), Err(Error::Numerical(_))));
        assert!(s.scale(2999) < MIN_MARGINAL_SCALE);
        let g = GraphState::zeros(2, 0);
        assert!(matches!(prior.denoise(&g, 2999), Err(Error::Numerical(_))));
        assert!(matches!(prior.score(&g, 3000), Err(Error::Usage(_))));
    }

    #[test]
    fn mixture_rejects_empty_and_ragged_atoms() {
        let s = schedule();
        assert!(EmpiricalMixturePrior::new(vec![], s.clone()).is_err());
        assert!(EmpiricalMixturePrior::new(vec![GraphState::zeros(3, 0), GraphState::zeros(4, 0)], s).is_err());
    }
}
