//! Monte-Carlo checks of the sampler against priors with known answers.

use std::sync::Arc;

use graphsteer::checks::{run_suite, OracleSuite};
use graphsteer::guidance::{ControllerConfig, ControllerKind};
use graphsteer::rng::{seeded, standard_normal_state};
use graphsteer::sampler::{batch_sample, SamplerConfig};
use graphsteer::{EmpiricalMixturePrior, GaussianPrior, GraphState, NoiseSchedule};

fn schedule() -> Arc<NoiseSchedule> {
    Arc::new(NoiseSchedule::new(200, 5e-4, 0.1).unwrap())
}

fn unguided(seed: u64) -> SamplerConfig {
    SamplerConfig::new(ControllerConfig::default(), seed)
}

fn pooled(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var, v.len())
}

#[test]
fn unit_gaussian_terminal_distribution() {
    let prior = GaussianPrior::new(GraphState::zeros(6, 1), 1.0, schedule()).unwrap();
    let mut cfg = unguided(0);
    cfg.final_denoise = false;
    let finals = batch_sample(&prior, None, &cfg, 512, 100).unwrap().finals();
    // Coordinates of one chain are independent, so all of them pool.
    let (mean, var, n) = pooled(finals.iter().flat_map(|g| g.as_slice().to_vec()));
    let se = (var / n as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean {mean} vs 3 SE {}", 3.0 * se);
    assert!((var - 1.0).abs() <= 0.1, "variance {var}");
}

#[test]
fn shifted_gaussian_terminal_distribution() {
    let m = standard_normal_state(4, 2, &mut seeded(3));
    let prior = GaussianPrior::new(m.clone(), 0.5, schedule()).unwrap();
    let mut cfg = unguided(0);
    cfg.final_denoise = false;
    let finals = batch_sample(&prior, None, &cfg, 512, 200).unwrap().finals();
    let (mean, var, n) = pooled(finals.iter().flat_map(|g| (g - &m).into_vec()));
    let se = (var / n as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean offset {mean} vs 3 SE {}", 3.0 * se);
    assert!((var / 0.25 - 1.0).abs() <= 0.1, "variance {var}");
}

#[test]
fn single_atom_prior_collapses_onto_the_atom() {
    let atom = standard_normal_state(5, 1, &mut seeded(4));
    let prior = EmpiricalMixturePrior::new(vec![atom.clone()], schedule()).unwrap();
    for g in batch_sample(&prior, None, &unguided(0), 32, 0).unwrap().finals() {
        let worst = (&g - &atom).as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 0.05, "max deviation {worst}");
    }
}

#[test]
fn two_atom_prior_splits_evenly() {
    let a = GraphState::zeros(4, 0);
    let b = a.map(|_| 1.0);
    let prior = EmpiricalMixturePrior::new(vec![a.clone(), b.clone()], schedule()).unwrap();
    let finals = batch_sample(&prior, None, &unguided(0), 400, 0).unwrap().finals();
    let near_b = finals.iter().filter(|g| g.dist_sq(&b) < g.dist_sq(&a)).count() as f64;
    let p = near_b / 400.0;
    let se = (0.25f64 / 400.0).sqrt();
    assert!((p - 0.5).abs() <= 3.0 * se, "fraction {p}");
    assert!(finals.iter().all(|g| g.dist_sq(&a).min(g.dist_sq(&b)) < 0.05));
}

#[test]
fn guidance_moves_a_mixture_toward_the_rewarded_atom() {
    let a = GraphState::zeros(4, 0);
    let b = a.map(|_| 1.0);
    let prior = EmpiricalMixturePrior::new(vec![a, b.clone()], schedule()).unwrap();
    let reward = graphsteer::graphs::QuadraticReward::new(b.clone());
    let cfg = SamplerConfig::new(ControllerConfig::new(ControllerKind::Gradient, 0.05), 0);
    let finals = batch_sample(&prior, Some(&reward), &cfg, 200, 0).unwrap().finals();
    let near_b = finals.iter().filter(|g| g.dist_sq(&b) < 0.05).count();
    assert!(near_b > 150, "{near_b} of 200 chains reached the rewarded atom");
}

#[test]
fn oracle_suites_pass() {
    for suite in OracleSuite::ALL {
        for r in run_suite(suite, 17).unwrap() {
            assert!(r.passed, "{r}");
        }
    }
}

#[test]
fn best_of_n_reward_does_not_fall_late_in_the_chain() {
    let atom = standard_normal_state(5, 1, &mut seeded(6));
    let prior = EmpiricalMixturePrior::new(vec![atom.clone()], schedule()).unwrap();
    let reward = graphsteer::graphs::QuadraticReward::new(atom);
    let cfg = SamplerConfig::new(
        ControllerConfig::new(ControllerKind::BestOfN, 0.05).with_candidates(8),
        0,
    );
    let trajectories = batch_sample(&prior, Some(&reward), &cfg, 200, 0)
        .unwrap()
        .into_result()
        .unwrap();
    // Per chain, mean reward over the second half of the last quarter of steps
    // minus the first half; a one-sided test at 5% that the trend is negative.
    let diffs: Vec<f64> = trajectories
        .iter()
        .map(|t| {
            assert_eq!(t.rewards.len(), 199);
            let tail = &t.rewards[t.rewards.len() * 3 / 4..];
            let (early, late) = tail.split_at(tail.len() / 2);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            mean(late) - mean(early)
        })
        .collect();
    let (mean, var, n) = pooled(diffs.into_iter());
    if var == 0.0 {
        // A single atom denoises every candidate to the atom itself, so the
        // recorded reward can be exactly constant.
        assert!(mean >= 0.0);
    } else {
        let z = mean / (var / n as f64).sqrt();
        assert!(z > -1.645, "late-minus-early reward {mean}, z = {z}");
    }
}
