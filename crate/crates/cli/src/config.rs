//! Experiment configuration: built-in defaults, overlaid by a TOML file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use heatcast_core::{SimConfig, SiteMeta};
use heatcast_dl::{ModelKind, TrainConfig};
use heatcast_eval::{Protocol, WeightProfile};
use heatcast_graybox::Priors;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Graybox,
    LstmMlp,
    LstmBnn,
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::Graybox => "graybox",
            ModelChoice::LstmMlp => "lstm-mlp",
            ModelChoice::LstmBnn => "lstm-bnn",
        }
    }

    pub fn neural(self) -> Option<ModelKind> {
        match self {
            ModelChoice::Graybox => None,
            ModelChoice::LstmMlp => Some(ModelKind::LstmMlp),
            ModelChoice::LstmBnn => Some(ModelKind::LstmBnn),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub csv: PathBuf,
    pub site: PathBuf,
}

impl DatasetRef {
    /// File stem of the CSV, used to name per-building artifacts.
    pub fn name(&self) -> String {
        self.csv.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub buildings: usize,
    pub hours: usize,
    pub site: SiteMeta,
    /// Building `i` is simulated with seed `seed + i`; the seed here is ignored.
    pub sim: SimConfig,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            buildings: 1,
            hours: 24 * 273,
            site: SiteMeta::new(60.2, 24.9, 2).expect("valid default site"),
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrayboxSection {
    pub priors: Priors,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for GrayboxSection {
    fn default() -> Self {
        Self { priors: Priors::default(), max_iters: 200, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lstm_mlp: TrainConfig,
    pub lstm_bnn: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            lstm_mlp: TrainConfig::for_kind(ModelKind::LstmMlp),
            lstm_bnn: TrainConfig::for_kind(ModelKind::LstmBnn),
        }
    }
}

impl TrainSection {
    pub fn get(&self, kind: ModelKind) -> &TrainConfig {
        match kind {
            ModelKind::LstmMlp => &self.lstm_mlp,
            ModelKind::LstmBnn => &self.lstm_bnn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub models: Vec<ModelChoice>,
    pub protocol: Protocol,
    pub ks: Vec<usize>,
    pub profiles: Vec<WeightProfile>,
    pub uq_bins: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            models: vec![ModelChoice::Graybox, ModelChoice::LstmMlp, ModelChoice::LstmBnn],
            protocol: Protocol::default(),
            ks: vec![1, 6, 48],
            profiles: WeightProfile::standard().to_vec(),
            uq_bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub priors: Vec<f64>,
    /// Training seeds; empty means the experiment seed.
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { priors: vec![1e-2, 1e-3, 1e-4], seeds: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Drives simulation, weight initialization and every sampling stream.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Buildings to train and evaluate on; the `simulate` outputs when empty.
    pub datasets: Vec<DatasetRef>,
    pub simulate: SimulateSection,
    pub graybox: GrayboxSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("heatcast-out"),
            datasets: Vec::new(),
            simulate: SimulateSection::default(),
            graybox: GrayboxSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Recursively overlay `top` onto `base`; tables merge, everything else is replaced.
fn overlay(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => overlay(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Defaults overlaid by the file, if any. Relative dataset paths are
    /// taken relative to the file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut merged =
            toml::Table::try_from(Self::default()).map_err(|e| CliError::Config(format!("default config: {e}")))?;
        overlay(&mut merged, file);
        let mut cfg: Self = merged.try_into().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            d.csv = base.join(&d.csv);
            d.site = base.join(&d.site);
        }
        Ok(cfg)
    }

    /// Propagate the experiment seed and check cross-field invariants.
    pub fn resolve(mut self) -> Result<Self> {
        self.train.lstm_mlp.seed = self.seed;
        self.train.lstm_bnn.seed = self.seed;
        self.simulate.sim.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.eval.protocol.validate()?;
        for t in [&self.train.lstm_mlp, &self.train.lstm_bnn] {
            t.validate()?;
        }
        for p in &self.eval.profiles {
            p.validate()?;
        }
        let h = self.eval.protocol.horizon;
        if self.eval.ks.is_empty() || self.eval.ks.iter().any(|&k| k == 0 || k > h) {
            return bad(format!("every K must lie in 1..={h}"));
        }
        if self.eval.models.is_empty() || self.eval.uq_bins < 2 {
            return bad("eval needs at least one model and two uq_bins".into());
        }
        if self.graybox.max_iters == 0 || !(self.graybox.tol >= 0.0) {
            return bad("graybox max_iters must be positive and tol non-negative".into());
        }
        if self.sweep.priors.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("sweep priors must be positive".into());
        }
        if self.simulate.buildings == 0 || self.simulate.hours == 0 {
            return bad("simulate needs at least one building and one hour".into());
        }
        Ok(())
    }

    /// Configured datasets, or every building found in the `simulate` output.
    pub fn dataset_refs(&self) -> Vec<DatasetRef> {
        if !self.datasets.is_empty() {
            return self.datasets.clone();
        }
        let dir = self.output_dir.join("simulate");
        let building = |i: usize| DatasetRef {
            csv: dir.join(format!("building_{i}.csv")),
            site: dir.join(format!("building_{i}.site.json")),
        };
        let found: Vec<usize> = (0..).take_while(|&i| building(i).csv.is_file()).collect();
        if found.is_empty() {
            // Nothing simulated yet; loading reports the missing file.
            return vec![building(0)];
        }
        found.into_iter().map(building).collect()
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        if self.sweep.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.sweep.seeds.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overlays_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(
            &path,
            "seed = 3\n[train.lstm_bnn]\nlearning_rate = 0.01\n[[datasets]]\ncsv = \"a.csv\"\nsite = \"a.json\"\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(Some(&path)).unwrap().resolve().unwrap();
        assert_eq!(cfg.train.lstm_bnn.epochs, 800);
        assert_eq!(cfg.train.lstm_bnn.learning_rate, 0.01);
        assert_eq!(cfg.train.lstm_bnn.seed, 3);
        assert_eq!(cfg.datasets[0].csv, dir.path().join("a.csv"));
        assert_eq!(cfg.eval.ks, vec![1, 6, 48]);
    }

    #[test]
    fn unknown_keys_and_bad_horizons_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "sed = 3\n").unwrap();
        assert!(matches!(ExperimentConfig::load(Some(&path)), Err(CliError::Config(_))));
        std::fs::write(&path, "[eval]\nks = [1, 60]\n").unwrap();
        let cfg = ExperimentConfig::load(Some(&path)).unwrap();
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn profiles_parse() {
        let text =
            "[eval]\nprofiles = [{ kind = \"linear\" }, { kind = \"sigmoid\", midpoint = 6.0, steepness = 2.0 }]\n";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, text).unwrap();
        let cfg = ExperimentConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.eval.profiles[1], WeightProfile::Sigmoid { midpoint: 6.0, steepness: 2.0 });
    }
}
