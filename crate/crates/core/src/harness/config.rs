use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::dataset::{load_images, split, synth_dataset};
use super::metrics::PsnrPeak;
use crate::baseline::{Codec, CombinedCodec, ExternalCodec, ToyDctCodec};
use crate::error::{Error, Result};
use crate::frontend::CsiMode;
use crate::jscc::{channel_uses, Image, ModelConfig, SnrSpec, TrainConfig};

/// Top-level experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: CsiMode,
    #[serde(default = "default_profile")]
    pub profile: String,
    /// Antenna count the model is built for.
    pub m: usize,
    pub bandwidth_ratio: f64,
    pub image_h: Option<usize>,
    pub image_w: Option<usize>,
    /// Evaluation SNR grid in dB.
    pub snr_db: Vec<f64>,
    #[serde(default = "default_sigma_e2")]
    pub sigma_e2: Vec<f64>,
    /// Antenna counts to evaluate; defaults to `[m]`.
    #[serde(default)]
    pub m_eval: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_draws")]
    pub n_channel_draws: usize,
    #[serde(default)]
    pub psnr_peak: PsnrPeak,
    #[serde(default = "default_checkpoint")]
    pub checkpoint: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub model_id: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synthetic,
    Directory,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    /// The held-out tenth of the dataset.
    #[default]
    Validation,
    /// Every image, for a dedicated test directory.
    All,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default)]
    pub source: DataSource,
    /// Number of synthetic images.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub path: Option<PathBuf>,
    /// Separate directory of evaluation images; overrides `eval_split`.
    pub eval_path: Option<PathBuf>,
    #[serde(default)]
    pub eval_split: EvalSplit,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            n: default_n(),
            seed: 0,
            path: None,
            eval_path: None,
            eval_split: EvalSplit::Validation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub eval_every: usize,
    pub patience: usize,
    pub min_delta_db: f64,
    pub val_draws: usize,
    pub seed: u64,
    /// Fixed training SNR; ignored when `snr_range` is set.
    pub snr_db: f64,
    pub snr_range: Option<[f64; 2]>,
    pub sigma_e2: f64,
    pub adaptive_m: bool,
    pub history: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            steps: t.steps,
            batch_size: t.batch_size,
            lr: t.lr,
            eval_every: t.eval_every,
            patience: t.patience,
            min_delta_db: t.min_delta_db,
            val_draws: t.val_draws,
            seed: t.seed,
            snr_db: 10.0,
            snr_range: None,
            sigma_e2: 0.0,
            adaptive_m: false,
            history: None,
        }
    }
}

/// Overrides on top of the named profile.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: Option<usize>,
    pub n_heads: Option<usize>,
    pub depth: Option<usize>,
    pub p: Option<usize>,
    pub sentinel: Option<f64>,
    #[serde(default)]
    pub csit_estimation_error: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecKind {
    #[default]
    Toy,
    External,
    /// Toy and external points together.
    Combined,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default)]
    pub codec: CodecKind,
    pub encode: Option<String>,
    pub decode: Option<String>,
    #[serde(default)]
    pub qualities: Vec<String>,
    #[serde(default = "default_decoded_ext")]
    pub decoded_ext: String,
    #[serde(default = "default_baseline_output")]
    pub output: PathBuf,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            codec: CodecKind::Toy,
            encode: None,
            decode: None,
            qualities: Vec::new(),
            decoded_ext: default_decoded_ext(),
            output: default_baseline_output(),
        }
    }
}

fn default_profile() -> String {
    "tiny".into()
}
fn default_sigma_e2() -> Vec<f64> {
    vec![0.0]
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_draws() -> usize {
    10
}
fn default_checkpoint() -> PathBuf {
    "model.ckpt".into()
}
fn default_output() -> PathBuf {
    "results.csv".into()
}
fn default_n() -> usize {
    256
}
fn default_decoded_ext() -> String {
    "png".into()
}
fn default_baseline_output() -> PathBuf {
    "baseline.csv".into()
}

/// Images used for training, validation and sweeps.
#[derive(Clone, Debug)]
pub struct Datasets {
    pub train: Vec<Image>,
    pub val: Vec<Image>,
    pub eval: Vec<Image>,
}

impl ExperimentConfig {
    /// Parses and validates; every error is [`Error::Config`].
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, dir)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.resolve(&self.experiment.checkpoint)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.experiment.output)
    }

    pub fn model_id(&self) -> String {
        self.experiment.model_id.clone().unwrap_or_else(|| {
            self.experiment
                .checkpoint
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into())
        })
    }

    /// Antenna counts evaluated by a sweep.
    pub fn m_eval(&self) -> Vec<usize> {
        if self.experiment.m_eval.is_empty() {
            vec![self.experiment.m]
        } else {
            self.experiment.m_eval.clone()
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let e = &self.experiment;
        let mut c = ModelConfig::profile(&e.profile, e.mode)?;
        c.m_max = e.m;
        c.image_h = e.image_h.unwrap_or(c.image_h);
        c.image_w = e.image_w.unwrap_or(c.image_w);
        let m = &self.model;
        c.d = m.d.unwrap_or(c.d);
        c.n_heads = m.n_heads.unwrap_or(c.n_heads);
        c.depth = m.depth.unwrap_or(c.depth);
        c.p = m.p.unwrap_or(c.p);
        c.sentinel = m.sentinel.unwrap_or(c.sentinel);
        c.csit_estimation_error = m.csit_estimation_error;
        let t = &self.train;
        c.snr_train = match t.snr_range {
            Some([lo, hi]) => SnrSpec::Uniform { lo, hi },
            None => SnrSpec::Fixed(t.snr_db),
        };
        c.adaptive_m = t.adaptive_m;
        c.sigma_e2_train = t.sigma_e2;
        c.k = channel_uses(e.bandwidth_ratio, c.image_h, c.image_w)?;
        c.validate()?;
        Ok(c)
    }

    pub fn train_config(&self, seed: Option<u64>) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            steps: t.steps,
            batch_size: t.batch_size,
            lr: t.lr,
            eval_every: t.eval_every,
            patience: t.patience,
            min_delta_db: t.min_delta_db,
            val_draws: t.val_draws,
            seed: seed.unwrap_or(t.seed),
        }
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        let cfg = self.model_config()?;
        let e = &self.experiment;
        if e.snr_db.is_empty() || e.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return err(format!("snr_db must be a non-empty list of numbers, got {:?}", e.snr_db));
        }
        for &s in &e.sigma_e2 {
            if !(s >= 0.0) || !s.is_finite() {
                return err(format!("sigma_e2 {s} must be finite and >= 0"));
            }
            cfg.check_estimation_error(s)?;
        }
        if e.sigma_e2.is_empty() || e.seeds.is_empty() {
            return err("sigma_e2 and seeds must be non-empty".into());
        }
        for m in self.m_eval() {
            if m < cfg.m_min() || m > cfg.m_max {
                return err(format!(
                    "m_eval {m} outside the supported {}..={}",
                    cfg.m_min(),
                    cfg.m_max
                ));
            }
        }
        if e.n_channel_draws == 0 {
            return err("n_channel_draws must be positive".into());
        }
        let t = &self.train;
        if t.batch_size == 0 || !(t.lr >= 0.0) {
            return err("batch_size must be positive and lr >= 0".into());
        }
        if self.model_id().contains(['\n', '\r']) {
            return err("model_id must be a single line".into());
        }
        let d = &self.dataset;
        match d.source {
            DataSource::Synthetic if d.n == 0 => return err("dataset.n must be positive".into()),
            DataSource::Directory if d.path.is_none() => {
                return err("dataset.source = \"directory\" needs dataset.path".into())
            }
            _ => {}
        }
        let b = &self.baseline;
        if b.codec != CodecKind::Toy && (b.encode.is_none() || b.decode.is_none() || b.qualities.is_empty()) {
            return err("external codec needs encode, decode and qualities".into());
        }
        Ok(())
    }

    /// Loads or generates the images at the model resolution.
    pub fn load_datasets(&self) -> Result<Datasets> {
        let cfg = self.model_config()?;
        let (h, w) = (cfg.image_h, cfg.image_w);
        let d = &self.dataset;
        let all = match d.source {
            DataSource::Synthetic => synth_dataset(d.n, h, w, d.seed),
            DataSource::Directory => {
                let p = d.path.as_ref().expect("validated");
                load_images(&self.resolve(p), h, w)?
            }
        };
        let (train, val) = split(all.clone());
        let eval = match (&d.eval_path, d.eval_split) {
            (Some(p), _) => load_images(&self.resolve(p), h, w)?,
            (None, EvalSplit::All) => all,
            (None, EvalSplit::Validation) => val.clone(),
        };
        if eval.is_empty() {
            return Err(Error::Dataset("evaluation set is empty".into()));
        }
        Ok(Datasets { train, val, eval })
    }

    pub fn codec(&self) -> Box<dyn Codec> {
        let b = &self.baseline;
        let external = || ExternalCodec {
            encode: b.encode.clone().unwrap_or_default(),
            decode: b.decode.clone().unwrap_or_default(),
            qualities: b.qualities.clone(),
            decoded_ext: b.decoded_ext.clone(),
        };
        match b.codec {
            CodecKind::Toy => Box::new(ToyDctCodec::default()),
            CodecKind::External => Box::new(external()),
            CodecKind::Combined => Box::new(CombinedCodec(vec![Box::new(ToyDctCodec::default()), Box::new(external())])),
        }
    }
}
