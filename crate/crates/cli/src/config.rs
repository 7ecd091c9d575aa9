use std::path::{Path, PathBuf};

use anyhow::Context;
use revfm_core::eval::{MfConfig, SyntheticConfig, DEFAULT_K};
use revfm_core::ingest::DEFAULT_RATIOS;
use revfm_core::model::ModelMode;
use revfm_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// Environment variable naming the default data path.
pub const DATA_ENV: &str = "REVFM_DATA_DIR";
pub const DEFAULT_OUT: &str = "out";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Contents of the TOML config file. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Optional word-vector table (`word v1 .. ve` per line) for `train`.
    pub embeddings: Option<PathBuf>,
    /// Training hyperparameters; `train.seed` is the run seed.
    pub train: TrainConfig,
    pub ingest: IngestSection,
    pub evaluate: EvaluateSection,
    pub sweep: SweepSection,
    pub gradcheck: GradcheckSection,
    pub synth: SynthSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection { ratios: DEFAULT_RATIOS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub k: usize,
    pub ablation: bool,
    /// Matrix factorization baseline; its seed is replaced by the run seed.
    pub mf: MfConfig,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            k: DEFAULT_K,
            ablation: false,
            mf: MfConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Feature sizes; each run sets both `filters` and `latent_dim` to f.
    pub f_values: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { f_values: vec![5, 10, 20] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub eps: f64,
    pub coords_per_tensor: usize,
    pub lambda: f64,
    /// Largest acceptable relative error.
    pub tolerance: f64,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        GradcheckSection {
            eps: 1e-5,
            coords_per_tensor: 32,
            lambda: 1e-3,
            tolerance: 1e-3,
        }
    }
}

/// Synthetic corpus shape; the seed is the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_devices: usize,
    pub n_services: usize,
    pub rank: usize,
    pub noise: f64,
    pub density: f64,
    pub signal_std: f64,
    pub mean: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        SynthSection {
            n_devices: d.n_devices,
            n_services: d.n_services,
            rank: d.rank,
            noise: d.noise,
            density: d.density,
            signal_std: d.signal_std,
            mean: d.mean,
        }
    }
}

impl FileConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Values given on the command line; `None` leaves the config value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub k: Option<usize>,
    pub mode: Option<ModelMode>,
    pub epochs: Option<usize>,
    pub embeddings: Option<PathBuf>,
    pub ablation: bool,
    pub f_values: Option<Vec<usize>>,
}

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub checkpoint: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub k: usize,
    pub train: TrainConfig,
    pub ratios: [f64; 3],
    pub ablation: bool,
    pub mf: MfConfig,
    pub f_values: Vec<usize>,
    pub gradcheck: GradcheckSection,
    pub synth: SyntheticConfig,
}

impl RunConfig {
    /// Flag beats config file, config file beats `env_data` (only used for
    /// the data path), which beats the built-in default.
    pub fn resolve(file: FileConfig, flags: &Overrides, env_data: Option<PathBuf>) -> anyhow::Result<Self> {
        let mut train = file.train;
        if let Some(seed) = flags.seed {
            train.seed = seed;
        }
        if let Some(mode) = flags.mode {
            train.mode = mode;
        }
        if let Some(epochs) = flags.epochs {
            train.epochs = epochs;
        }
        train.validate()?;
        let seed = train.seed;
        let out = flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let checkpoint = flags
            .checkpoint
            .clone()
            .or(file.checkpoint)
            .unwrap_or_else(|| out.join(CHECKPOINT_FILE));
        let k = flags.k.unwrap_or(file.evaluate.k);
        anyhow::ensure!(k >= 1, "k must be at least 1");
        let f_values = flags.f_values.clone().unwrap_or(file.sweep.f_values);
        anyhow::ensure!(f_values.iter().all(|&f| f >= 1), "sweep f values must be at least 1");
        let s = file.synth;
        Ok(RunConfig {
            seed,
            data: flags.data.clone().or(file.data).or(env_data),
            out,
            checkpoint,
            embeddings: flags.embeddings.clone().or(file.embeddings),
            k,
            train,
            ratios: file.ingest.ratios,
            ablation: flags.ablation || file.evaluate.ablation,
            mf: MfConfig { seed, ..file.evaluate.mf },
            f_values,
            gradcheck: file.gradcheck,
            synth: SyntheticConfig {
                n_devices: s.n_devices,
                n_services: s.n_services,
                rank: s.rank,
                noise: s.noise,
                seed,
                density: s.density,
                signal_std: s.signal_std,
                mean: s.mean,
            },
        })
    }

    pub fn data_path(&self) -> anyhow::Result<&Path> {
        self.data
            .as_deref()
            .with_context(|| format!("no data path: pass --data, set `data` in the config or {DATA_ENV}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::resolve(FileConfig::from_toml("").unwrap(), &Overrides::default(), None).unwrap();
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.k, DEFAULT_K);
        assert_eq!(cfg.checkpoint, Path::new(DEFAULT_OUT).join(CHECKPOINT_FILE));
        assert_eq!(cfg.f_values, vec![5, 10, 20]);
        assert!(cfg.data.is_none());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(FileConfig::from_toml("[train]\nlearning_rat = 0.1\n").is_err());
        assert!(FileConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn run_seed_reaches_every_generator() {
        let flags = Overrides { seed: Some(9), ..Default::default() };
        let cfg = RunConfig::resolve(FileConfig::default(), &flags, None).unwrap();
        assert_eq!((cfg.seed, cfg.train.seed, cfg.mf.seed, cfg.synth.seed), (9, 9, 9, 9));
    }

    #[test]
    fn invalid_train_section_rejected() {
        let file = FileConfig::from_toml("[train]\nbatch_size = 0\n").unwrap();
        assert!(RunConfig::resolve(file, &Overrides::default(), None).is_err());
    }
}
