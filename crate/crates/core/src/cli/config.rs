//! Experiment configuration files (TOML, unknown keys rejected).
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graphs::datasets::{generate_dataset, percentile_bound, DatasetFamily, StatKind};
use crate::graphs::fairness::SensitiveAttributes;
use crate::graphs::io::{pad_all, read_graphs};
use crate::graphs::observation::{ObservationMask, ObservationMode};
use crate::graphs::rewards::{ConstraintAux, ConstraintKind, ConstraintSpec, LossVariant};
use crate::guidance::ControllerConfig;
use crate::prior::{EmpiricalMixturePrior, GaussianPrior, ScoreModel};
use crate::rng::seeded;
use crate::sampler::SamplerConfig;
use crate::schedule::NoiseSchedule;
use crate::state::GraphState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_chains")]
    pub n_chains: usize,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Also run unguided chains with the same seeds and report the MMD
    /// difference against them.
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub prior: PriorConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub sampler: SamplerOptions,
    pub constraint: ConstraintConfig,
}

fn default_chains() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            beta_min: 5e-4,
            beta_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    /// `N(mean * 1, std^2 I)` on `n_nodes` nodes with `n_features` features.
    Gaussian {
        n_nodes: usize,
        #[serde(default)]
        n_features: usize,
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        std: f64,
    },
    /// Mixture of point masses at the graphs of a dataset file or of a
    /// generated dataset (exactly one of the two).
    Empirical {
        #[serde(default)]
        dataset: Option<PathBuf>,
        #[serde(default)]
        generator: Option<GeneratorConfig>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub family: DatasetFamily,
    pub count: usize,
    #[serde(default)]
    pub n_features: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerOptions {
    pub add_ancestral_noise: bool,
    pub final_denoise: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            add_ancestral_noise: true,
            final_denoise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub kind: ConstraintKind,
    /// Explicit bound for count and fairness constraints.
    #[serde(default)]
    pub bound: Option<f64>,
    /// Bound taken as this percentile of the prior dataset's statistic.
    #[serde(default)]
    pub percentile: Option<f64>,
    #[serde(default)]
    pub loss: LossVariant,
    /// Fairness: explicit 0/1 attributes, or drawn from `sensitive_seed`.
    #[serde(default)]
    pub sensitive: Option<Vec<u8>>,
    #[serde(default)]
    pub sensitive_seed: Option<u64>,
    #[serde(default)]
    pub observation: Option<ObservationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    /// Dataset file whose first graph is partially observed. Without it a
    /// held-out graph is drawn from the prior's generator.
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[serde(default = "half")]
    pub fraction: f64,
    #[serde(default)]
    pub mode: ObservationMode,
    #[serde(default)]
    pub seed: u64,
}

fn half() -> f64 {
    0.5
}

/// A parsed config together with its source text and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub path: PathBuf,
}

/// Hex SHA-256 of the config text.
pub fn config_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        let loaded = Self {
            config,
            text,
            path: path.to_path_buf(),
        };
        loaded.check_files()?;
        Ok(loaded)
    }

    pub fn digest(&self) -> String {
        config_digest(&self.text)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    fn check_files(&self) -> Result<()> {
        let mut files = Vec::new();
        if let PriorConfig::Empirical { dataset: Some(d), .. } = &self.config.prior {
            files.push(d);
        }
        if let Some(ObservationConfig { graph: Some(g), .. }) = &self.config.constraint.observation {
            files.push(g);
        }
        for f in files {
            let p = self.resolve(f);
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist"),
                ));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        let s = &self.config.schedule;
        NoiseSchedule::new(s.steps, s.beta_min, s.beta_max)
    }

    pub fn sampler_config(&self, seed: u64) -> Result<SamplerConfig> {
        self.config.controller.validate()?;
        Ok(SamplerConfig {
            controller: self.config.controller.clone(),
            add_ancestral_noise: self.config.sampler.add_ancestral_noise,
            record_trajectory: false,
            final_denoise: self.config.sampler.final_denoise,
            seed,
        })
    }

    /// Builds the prior, the constraint and everything derived from the
    /// dataset.
    pub fn build(&self) -> Result<Experiment> {
        let schedule = Arc::new(self.schedule()?);
        let (model, dataset, communities, generator): (Box<dyn ScoreModel>, _, _, _) = match &self.config.prior {
            PriorConfig::Gaussian {
                n_nodes,
                n_features,
                mean,
                std,
            } => {
                let m = GraphState::zeros(*n_nodes, *n_features).map(|_| *mean);
                (Box::new(GaussianPrior::new(m, *std, schedule)?), None, None, None)
            }
            PriorConfig::Empirical { dataset, generator } => {
                let (graphs, communities, family) = match (dataset, generator) {
                    (Some(path), None) => {
                        let records = read_graphs(&self.resolve(path))?;
                        if records.is_empty() {
                            return Err(Error::Config(format!("dataset {} has no graphs", path.display())));
                        }
                        let graphs: Vec<GraphState> = records.into_iter().map(|(g, _)| g).collect();
                        (pad_all(&graphs)?, None, None)
                    }
                    (None, Some(gen)) => {
                        let graphs = generate_dataset(&gen.family, gen.n_features, gen.count, &mut seeded(gen.seed))?;
                        (graphs, gen.family.block_labels(), Some(gen.clone()))
                    }
                    _ => {
                        return Err(Error::Config(
                            "an empirical prior needs exactly one of `dataset` or `generator`".into(),
                        ))
                    }
                };
                let model = EmpiricalMixturePrior::new(graphs.clone(), schedule)?;
                (
                    Box::new(model) as Box<dyn ScoreModel>,
                    Some(graphs),
                    communities,
                    family,
                )
            }
        };
        let constraint = self.constraint(model.shape().0, dataset.as_deref(), generator.as_ref())?;
        Ok(Experiment {
            model,
            dataset,
            communities,
            constraint,
        })
    }

    fn constraint(
        &self,
        n: usize,
        dataset: Option<&[GraphState]>,
        generator: Option<&GeneratorConfig>,
    ) -> Result<ConstraintSpec> {
        let c = &self.config.constraint;
        let bound = match (c.bound, c.percentile) {
            (Some(b), None) => b,
            (None, Some(p)) => {
                let stat = match c.kind {
                    ConstraintKind::EdgeCount => StatKind::EdgeCount,
                    ConstraintKind::TriangleCount => StatKind::TriangleCount,
                    ConstraintKind::MaxDegree => StatKind::MaxDegree,
                    other => return Err(Error::Config(format!("`percentile` does not apply to {other:?}"))),
                };
                let data = dataset.ok_or_else(|| Error::Config("`percentile` needs an empirical prior".into()))?;
                percentile_bound(data, stat, p)?
            }
            (None, None) => match c.kind {
                ConstraintKind::EdgeCount | ConstraintKind::TriangleCount | ConstraintKind::MaxDegree => {
                    return Err(Error::Config("count constraints need `bound` or `percentile`".into()))
                }
                _ => 0.0,
            },
            (Some(_), Some(_)) => return Err(Error::Config("give only one of `bound` and `percentile`".into())),
        };
        let aux = match c.kind {
            ConstraintKind::Fairness => {
                let z = match (&c.sensitive, c.sensitive_seed) {
                    (Some(z), None) => SensitiveAttributes::new(z.clone())?,
                    (None, Some(seed)) => SensitiveAttributes::random(n, &mut seeded(seed))?,
                    _ => {
                        return Err(Error::Config(
                            "fairness needs exactly one of `sensitive` or `sensitive_seed`".into(),
                        ))
                    }
                };
                z.check_defined(n)?;
                ConstraintAux::Fairness(z)
            }
            ConstraintKind::LinkObservation => {
                let o = c
                    .observation
                    .as_ref()
                    .ok_or_else(|| Error::Config("link constraints need an `observation` table".into()))?;
                let mut rng = seeded(o.seed);
                let truth = match (&o.graph, generator) {
                    (Some(path), _) => {
                        let records = read_graphs(&self.resolve(path))?;
                        let (g, _) = records
                            .into_iter()
                            .next()
                            .ok_or_else(|| Error::Config(format!("{} has no graphs", path.display())))?;
                        g
                    }
                    (None, Some(gen)) => gen.family.sample(gen.n_features, &mut rng),
                    (None, None) => {
                        return Err(Error::Config(
                            "an observation needs `graph` unless the prior is generated".into(),
                        ))
                    }
                };
                if truth.n_nodes() != n {
                    return Err(Error::Shape {
                        expected: format!("{n} nodes in the observed graph"),
                        got: truth.n_nodes().to_string(),
                    });
                }
                let obs = match o.mode {
                    ObservationMode::AllEntries => ObservationMask::sample_entries(&truth, o.fraction, &mut rng)?,
                    ObservationMode::EdgesOnly => ObservationMask::sample_edges(&truth, o.fraction, &mut rng)?,
                };
                ConstraintAux::Link { obs, mode: o.mode }
            }
            _ => ConstraintAux::None,
        };
        let spec = ConstraintSpec {
            kind: c.kind,
            bound,
            loss: c.loss,
            aux,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Everything a command needs, built from a config.
pub struct Experiment {
    pub model: Box<dyn ScoreModel>,
    /// Atoms of an empirical prior.
    pub dataset: Option<Vec<GraphState>>,
    /// Planted communities of a generated SBM dataset.
    pub communities: Option<SensitiveAttributes>,
    pub constraint: ConstraintSpec,
}

impl Experiment {
    pub fn sensitive(&self) -> Option<&SensitiveAttributes> {
        match &self.constraint.aux {
            ConstraintAux::Fairness(z) => Some(z),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    const GENERATED: &str = r#"
seed = 3
n_chains = 2

[prior]
kind = "empirical"
generator = { family = { family = "sbm2", n_per_block = 3, p_in = 0.8, p_out = 0.1 }, count = 10 }

[controller]
kind = "best_of_n"
k = 0.05

[constraint]
kind = "edge_count"
percentile = 10
loss = "quantized_hinge"
"#;

    #[test]
    fn parses_and_builds_a_generated_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let loaded = LoadedConfig::load(&write(dir.path(), "c.toml", GENERATED)).unwrap();
        assert_eq!(loaded.config.schedule, ScheduleConfig::default());
        let exp = loaded.build().unwrap();
        assert_eq!(exp.model.shape(), (6, 0));
        assert_eq!(exp.dataset.as_ref().unwrap().len(), 10);
        assert!(exp.communities.is_some());
        assert_eq!(loaded.digest(), config_digest(GENERATED));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bad = GENERATED.replace("k = 0.05", "k = 0.05\nmu = 3");
        let err = LoadedConfig::load(&write(dir.path(), "c.toml", &bad)).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn missing_dataset_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
[prior]
kind = "empirical"
dataset = "nowhere.jsonl"

[constraint]
kind = "force_star"
"#;
        let err = LoadedConfig::load(&write(dir.path(), "c.toml", text)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("nowhere.jsonl"));
    }

    #[test]
    fn fairness_and_link_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let fair = GENERATED.replace(
            "kind = \"edge_count\"\npercentile = 10",
            "kind = \"fairness\"\nsensitive_seed = 4",
        );
        let exp = LoadedConfig::load(&write(dir.path(), "f.toml", &fair))
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(exp.sensitive().unwrap().len(), 6);

        let link = GENERATED.replace(
            "kind = \"edge_count\"\npercentile = 10\nloss = \"quantized_hinge\"",
            "kind = \"link_observation\"\nobservation = { mode = \"edges_only\", seed = 2 }",
        );
        let exp = LoadedConfig::load(&write(dir.path(), "l.toml", &link))
            .unwrap()
            .build()
            .unwrap();
        assert!(matches!(
            exp.constraint.aux,
            ConstraintAux::Link {
                mode: ObservationMode::EdgesOnly,
                ..
            }
        ));

        let none = GENERATED.replace("percentile = 10\n", "");
        assert!(LoadedConfig::load(&write(dir.path(), "n.toml", &none))
            .unwrap()
            .build()
            .is_err());
    }
}
