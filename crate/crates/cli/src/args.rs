//! Flag definitions and config resolution.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use coherent_core::fusion::{ModelConfig, Pooling, TrainConfig};
use coherent_core::prompt::{PromptVariant, DEFAULT_CHAR_BUDGET};
use coherent_core::Variant;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(
    name = "coherent",
    version,
    about = "Coherence graphs, fusion-transformer training and LLM prompt generation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the sentence/entity/relation graph of every document.
    BuildGraph(BuildGraphArgs),
    /// Render one prompt file per document and variant, plus an index.
    EmitPrompts(EmitPromptsArgs),
    /// Train a fusion model and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled corpus.
    Eval(EvalArgs),
    /// k-fold cross-validation over one or more ablation variants.
    Cv(CvArgs),
    /// Train on one domain tag, evaluate on the others against a TextOnly baseline.
    Xdomain(XdomainArgs),
    /// Write a synthetic labeled corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct BuildGraphArgs {
    /// Input corpus (JSON lines).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output graph dump (JSON lines, first line is the provenance record).
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmitPromptsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
    /// Comma-separated prompt variants: TextOnly, TextEnty, TextRel, Full, FullWithExplanation.
    #[arg(long, value_delimiter = ',', default_value = "Full")]
    pub variants: Vec<PromptVariant>,
    /// Maximum prompt length in characters; trailing triples are dropped to fit.
    #[arg(long, default_value_t = DEFAULT_CHAR_BUDGET)]
    pub char_budget: usize,
}

/// Model hyper-parameters. Unset flags fall back to the config file, then to
/// the preset (full-size unless --toy).
#[derive(Debug, Args, Clone, Default, Serialize)]
pub struct ModelArgs {
    /// JSON file with optional "model" and "train" objects.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the toy preset (d_model 32, 2 heads, 1 layer, d_ffn 64).
    #[arg(long)]
    pub toy: bool,
    /// Ablation variant: TextOnly, TextEnty, TextRel or Full [default: Full].
    #[arg(long)]
    pub variant: Option<Variant>,
    /// [default: 256]
    #[arg(long)]
    pub d_model: Option<usize>,
    /// [default: 8]
    #[arg(long)]
    pub heads: Option<usize>,
    /// [default: 2]
    #[arg(long)]
    pub layers: Option<usize>,
    /// [default: 4 x d_model]
    #[arg(long)]
    pub d_ffn: Option<usize>,
    /// [default: 0.1]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Clip bound for relative distances [default: 128].
    #[arg(long)]
    pub max_relative_distance: Option<usize>,
    /// mean-sentences or first-sentence [default: mean-sentences].
    #[arg(long)]
    pub pooling: Option<Pooling>,
    /// Do not scale attention scores by 1/sqrt(d_head).
    #[arg(long)]
    pub no_scale: bool,
    /// Apply a ReLU after the relative position projection.
    #[arg(long)]
    pub pe_relu: bool,
    /// Share the u and v bias vectors across heads.
    #[arg(long)]
    pub share_uv: bool,
}

#[derive(Debug, Args, Clone, Default, Serialize)]
pub struct TrainFlags {
    /// [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 20]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 0.01]
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Seeds parameter init, shuffling and dropout [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch metrics log [default: <out>.metrics.jsonl].
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Report path (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Any model flag given here must agree with the checkpoint.
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 0)]
    pub fold_seed: u64,
    /// Plain shuffled folds instead of label-stratified ones.
    #[arg(long)]
    pub plain_folds: bool,
    /// Comma-separated variants to compare [default: all four, or --variant].
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<Variant>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct XdomainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub train_tag: String,
    /// Comma-separated test tags [default: every other tag in the corpus].
    #[arg(long, value_delimiter = ',')]
    pub test_tags: Vec<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub n_docs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Domain tag; also selects the filler and cue vocabulary.
    #[arg(long, default_value = "synth")]
    pub domain: String,
    /// Probability that a filler token is a label cue word.
    #[arg(long, default_value_t = 0.03)]
    pub text_signal: f64,
    #[arg(long, default_value_t = 4)]
    pub min_sentences: usize,
    #[arg(long, default_value_t = 7)]
    pub max_sentences: usize,
}

/// Overlays `patch` onto `base` key by key, rejecting keys `base` lacks.
fn overlay(base: &mut Value, patch: &Value, section: &str) -> Result<()> {
    let (Some(base), Some(patch)) = (base.as_object_mut(), patch.as_object()) else {
        bail!("config section {section:?} must be a JSON object");
    };
    for (k, v) in patch {
        match base.get_mut(k) {
            Some(slot) => *slot = v.clone(),
            None => bail!("unknown key {k:?} in config section {section:?}"),
        }
    }
    Ok(())
}

fn read_config_file(path: &PathBuf) -> Result<(Option<Value>, Option<Value>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let Some(obj) = value.as_object() else {
        bail!("config {} must be a JSON object", path.display());
    };
    for k in obj.keys() {
        if k != "model" && k != "train" {
            bail!("unknown section {k:?} in config {}", path.display());
        }
    }
    Ok((obj.get("model").cloned(), obj.get("train").cloned()))
}

impl ModelArgs {
    /// Whether anything beyond defaults was requested.
    pub fn is_set(&self) -> bool {
        self.config.is_some()
            || self.toy
            || self.variant.is_some()
            || self.d_model.is_some()
            || self.heads.is_some()
            || self.layers.is_some()
            || self.d_ffn.is_some()
            || self.dropout.is_some()
            || self.max_relative_distance.is_some()
            || self.pooling.is_some()
            || self.no_scale
            || self.pe_relu
            || self.share_uv
    }

    /// Applies file and flags on top of `base`.
    pub fn apply(&self, base: ModelConfig, seed: Option<u64>) -> Result<ModelConfig> {
        let mut base = if self.toy { ModelConfig::toy(32, 2, 1) } else { base };
        let ffn_ratio = base.d_ffn as f64 / base.d_model as f64;
        if let Some(path) = &self.config {
            if let (Some(model), _) = read_config_file(path)? {
                let mut v = serde_json::to_value(&base)?;
                overlay(&mut v, &model, "model")?;
                base = serde_json::from_value(v)?;
            }
        }
        let mut c = base;
        if let Some(d) = self.d_model {
            c.d_model = d;
            if self.d_ffn.is_none() {
                c.d_ffn = (ffn_ratio * d as f64).round() as usize;
            }
        }
        macro_rules! set {
            ($field:ident, $flag:expr) => {
                if let Some(v) = $flag {
                    c.$field = v;
                }
            };
        }
        set!(variant, self.variant);
        set!(n_heads, self.heads);
        set!(n_layers, self.layers);
        set!(d_ffn, self.d_ffn);
        set!(dropout_rate, self.dropout);
        set!(max_relative_distance, self.max_relative_distance);
        set!(pooling, self.pooling);
        set!(seed, seed);
        if self.no_scale {
            c.scale_scores = false;
        }
        if self.pe_relu {
            c.pe_relu = true;
        }
        if self.share_uv {
            c.share_uv = true;
        }
        c.validate()?;
        Ok(c)
    }
}

impl TrainFlags {
    pub fn apply(&self, config_file: Option<&PathBuf>) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        if let Some(path) = config_file {
            if let (_, Some(train)) = read_config_file(path)? {
                let mut v = serde_json::to_value(&c)?;
                overlay(&mut v, &train, "train")?;
                c = serde_json::from_value(v)?;
            }
        }
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.weight_decay {
            c.weight_decay = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Resolves both configs; the training seed also seeds parameter init.
pub fn resolve(model: &ModelArgs, train: &TrainFlags) -> Result<(ModelConfig, TrainConfig)> {
    let t = train.apply(model.config.as_ref())?;
    let m = model.apply(ModelConfig::default(), Some(t.seed))?;
    Ok((m, t))
}
