use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use costly::a2c::A2CConfig;
use costly::mcts::MctsConfig;

/// Terminal-reward weight of majority-class samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delta {
    /// Imbalance ratio of the training split for binary tasks, 1 otherwise.
    Auto,
    Value(f64),
}

impl FromStr for Delta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Delta::Auto);
        }
        s.parse::<f64>().map(Delta::Value).map_err(|_| format!("expected 'auto' or a number, got '{s}'"))
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::Auto => f.write_str("auto"),
            Delta::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Delta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Delta::Auto => s.serialize_str("auto"),
            Delta::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Delta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Delta::Value(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Where feature costs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CostSource {
    /// The `#costs` row of the dataset file, or 1 per feature without one.
    Dataset,
    /// Uniform on `cost_range`, drawn from the cost sub-stream.
    Random,
    /// Comma- or newline-separated costs in feature order.
    File(PathBuf),
}

impl FromStr for CostSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "dataset" => CostSource::Dataset,
            "random" => CostSource::Random,
            "" => return Err("empty cost source".into()),
            path => CostSource::File(PathBuf::from(path)),
        })
    }
}

impl fmt::Display for CostSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostSource::Dataset => f.write_str("dataset"),
            CostSource::Random => f.write_str("random"),
            CostSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl Serialize for CostSource {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CostSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub label_column: String,
    pub costs: CostSource,
    pub cost_range: [f64; 2],
    pub lambda: f64,
    pub delta: Delta,
    /// Class name treated as the minority; the rarer training class if unset.
    pub minority_class: Option<String>,
    /// Drop minority rows until they make up this proportion (binary only).
    pub minority_ratio: Option<f64>,
    pub gamma: f64,
    /// Acquisition horizon; the number of features if unset.
    pub t_max: Option<usize>,
    pub split: [f64; 3],
    pub seed: u64,
    pub output: PathBuf,
    pub skip_mcts: bool,
    pub a2c: A2CConfig,
    pub mcts: MctsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            label_column: "label".into(),
            costs: CostSource::Dataset,
            cost_range: [0.1, 1.0],
            lambda: 0.01,
            delta: Delta::Auto,
            minority_class: None,
            minority_ratio: None,
            gamma: 1.0,
            t_max: None,
            split: [0.6, 0.2, 0.2],
            seed: 1,
            output: PathBuf::from("runs/latest"),
            skip_mcts: false,
            a2c: A2CConfig::default(),
            mcts: MctsConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML file over the defaults. Relative paths inside it are
    /// taken relative to the file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = cfg.dataset.as_mut() {
            rebase(d);
        }
        if let CostSource::File(p) = &mut cfg.costs {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset.as_deref().context("no dataset given (--dataset or `dataset` in the config file)")
    }

    pub fn validate(&self) -> Result<()> {
        let path = self.dataset_path()?;
        if !path.is_file() {
            bail!("dataset {} does not exist", path.display());
        }
        if let CostSource::File(p) = &self.costs {
            if !p.is_file() {
                bail!("cost file {} does not exist", p.display());
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!("lambda must be >= 0");
        }
        if let Delta::Value(d) = self.delta {
            if !(0.0..=1.0).contains(&d) {
                bail!("delta must lie in [0, 1]");
            }
        }
        if let Some(r) = self.minority_ratio {
            if !(r > 0.0 && r < 0.5) {
                bail!("minority ratio must lie in (0, 0.5)");
            }
        }
        self.a2c.validate()?;
        self.mcts.validate()?;
        Ok(())
    }
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| "expected three fractions TRAIN,VAL,TEST".to_string())
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| "expected LO,HI".to_string())
}

/// Run settings accepted on the command line. Every flag overrides the
/// config file, which overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV dataset with a header row
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// `dataset`, `random`, or a path to a cost file
    #[arg(long)]
    pub costs: Option<CostSource>,
    /// Range of random costs, LO,HI
    #[arg(long, value_parser = parse_range)]
    pub cost_range: Option<[f64; 2]>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Majority-class reward weight, a number or `auto`
    #[arg(long)]
    pub delta: Option<Delta>,
    #[arg(long)]
    pub minority_class: Option<String>,
    /// Unbalance the dataset to this minority proportion before splitting
    #[arg(long)]
    pub minority_ratio: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Split fractions TRAIN,VAL,TEST
    #[arg(long, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Stop after actor-critic training
    #[arg(long)]
    pub skip_mcts: bool,

    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub entropy_weight: Option<f64>,
    #[arg(long)]
    pub value_loss_weight: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,

    #[arg(long)]
    pub simulations: Option<usize>,
    #[arg(long)]
    pub c_puct: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub samples_per_iteration: Option<usize>,
    #[arg(long)]
    pub mcts_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub mcts_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v; })*
            };
        }
        set! {
            label_column => label_column,
            costs => costs,
            cost_range => cost_range,
            lambda => lambda,
            delta => delta,
            gamma => gamma,
            split => split,
            seed => seed,
            output => output,
            epochs => a2c.epochs,
            lr => a2c.lr,
            entropy_weight => a2c.entropy_weight,
            value_loss_weight => a2c.value_loss_weight,
            hidden => a2c.hidden,
            eval_every => a2c.eval_every,
            simulations => mcts.simulations,
            c_puct => mcts.c_puct,
            iterations => mcts.iterations,
            mcts_lr => mcts.lr,
            batch_size => mcts.batch_size,
            mcts_epochs => mcts.epochs_per_iteration,
            patience => mcts.patience,
        }
        if self.dataset.is_some() {
            cfg.dataset = self.dataset.clone();
        }
        if self.minority_class.is_some() {
            cfg.minority_class = self.minority_class.clone();
        }
        if self.minority_ratio.is_some() {
            cfg.minority_ratio = self.minority_ratio;
        }
        if self.t_max.is_some() {
            cfg.t_max = self.t_max;
        }
        if self.samples_per_iteration.is_some() {
            cfg.mcts.samples_per_iteration = self.samples_per_iteration;
        }
        cfg.skip_mcts |= self.skip_mcts;
        // one global seed drives every component
        cfg.a2c.seed = cfg.seed;
        cfg.mcts.seed = cfg.seed;
        Ok(cfg)
    }
}
