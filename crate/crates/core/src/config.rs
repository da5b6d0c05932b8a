//! Run configuration read from TOML, with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{GeneratorSpec, GrowthTarget, SplitSpec, SplitTimes};
use crate::descriptor::DescriptorConfig;
use crate::error::{Error, Result};
use crate::features::default_l2_grid;
use crate::nn::{Init, TrainConfig};
use crate::pipeline::ModelKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Synthetic source. Exactly one of `generator` and `edges` is set.
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    /// Edge-list file (`src dst timestamp` per line), relative to the
    /// config file.
    #[serde(default)]
    pub edges: Option<PathBuf>,
    #[serde(default)]
    pub instances: InstanceConfig,
    pub split: SplitConfig,
    #[serde(default)]
    pub descriptor: DescriptorConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub model: ModelConfig,
    /// Also write a graymap per descriptor.
    #[serde(default)]
    pub heatmaps: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub k_hop: usize,
    pub target: GrowthTarget,
    /// Probability of dropping each zero-growth instance.
    pub downsample_zero: f64,
    /// External label file (`origin_id,graph_time,growth_time,raw_growth`)
    /// used instead of computed labels, relative to the config file.
    pub labels: Option<PathBuf>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self { k_hop: 1, target: GrowthTarget::DegreeOfEgo, downsample_zero: 0.0, labels: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    pub train: SplitTimes,
    pub val: SplitTimes,
    pub test: SplitTimes,
}

fn default_fractions() -> [f64; 3] {
    [0.8, 0.05, 0.15]
}

impl SplitConfig {
    pub fn to_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec { fractions: self.fractions, seed, train: self.train, val: self.val, test: self.test }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub init: Init,
    /// Models trained and reported by `compare`.
    pub compare: Vec<ModelKind>,
    /// Penalties tried by the ridge models.
    pub l2_grid: Vec<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { init: Init::Scaled, compare: ModelKind::ALL.to_vec(), l2_grid: default_l2_grid() }
    }
}

/// Flag values that replace config entries.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paper_init: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, resolves relative file references against its
    /// directory and applies `overrides`.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.edges);
        rebase(&mut cfg.instances.labels);
        rebase(&mut cfg.out);
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.out = Some(out.clone());
        }
        if overrides.paper_init {
            self.model.init = Init::UnitGaussian;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must be at most {}", i64::MAX)));
        }
        match (&self.generator, &self.edges) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::Config("set exactly one of `generator` and `edges`".into())),
        }
        self.split.to_spec(0).validate().map_err(|e| Error::Config(e.to_string()))?;
        self.descriptor.validate().map_err(|e| Error::Config(e.to_string()))?;
        let mut train = self.train.clone();
        train.seed = 0;
        train.validate()?;
        if !(0.0..=1.0).contains(&self.instances.downsample_zero) {
            return Err(Error::Config("instances.downsample_zero must lie in [0, 1]".into()));
        }
        if self.model.compare.is_empty() {
            return Err(Error::Config("model.compare lists no models".into()));
        }
        if self.model.l2_grid.is_empty() || self.model.l2_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("model.l2_grid needs finite non-negative values".into()));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory: pass --out or set `out`".into()))
    }

    /// The part of the config that determines the benchmark files.
    pub fn benchmark_key(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            seed: u64,
            generator: &'a Option<GeneratorSpec>,
            edges: &'a Option<PathBuf>,
            instances: &'a InstanceConfig,
            split: &'a SplitConfig,
        }
        toml::to_string(&Key {
            seed: self.seed,
            generator: &self.generator,
            edges: &self.edges,
            instances: &self.instances,
            split: &self.split,
        })
        .expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
seed = 5
[generator]
kind = "preferential-attachment"
n_nodes = 100
edges_per_node = 2
[split]
train = { graph_time = 40, growth_time = 80 }
val = { graph_time = 41, growth_time = 81 }
test = { graph_time = 42, growth_time = 82 }
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.descriptor, DescriptorConfig::default());
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.split.fractions, [0.8, 0.05, 0.15]);
        assert_eq!(cfg.instances.k_hop, 1);
        assert_eq!(cfg.model.compare.len(), 5);
    }

    #[test]
    fn unknown_keys_rejected() {
        for extra in ["bogus = 1\n", "[train]\nlearning_rat = 0.1\n", "[descriptor]\nbins = 3\n", "[train]\nseed = 3\n"] {
            let text = format!("{extra}{BASIC}");
            let text = if extra.starts_with('[') { format!("{BASIC}{extra}") } else { text };
            assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))), "{extra}");
        }
        let bad_gen = BASIC.replace("edges_per_node = 2", "edges_per_node = 2\nextra = 1");
        assert!(RunConfig::from_toml(&bad_gen).is_err());
    }

    #[test]
    fn bad_values_rejected() {
        assert!(RunConfig::from_toml(&BASIC.replace("graph_time = 42", "graph_time = 30")).is_err());
        assert!(RunConfig::from_toml(&format!("{BASIC}[train]\nlearning_rate = -1.0\n")).is_err());
        let both = format!("edges = \"x.tsv\"\n{BASIC}");
        assert!(RunConfig::from_toml(&both).is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::from_toml(BASIC).unwrap();
        cfg.apply(&Overrides { seed: Some(9), out: Some("o".into()), paper_init: true });
        assert_eq!((cfg.seed, cfg.model.init), (9, Init::UnitGaussian));
        assert_eq!(cfg.out_dir().unwrap(), Path::new("o"));
    }
}
