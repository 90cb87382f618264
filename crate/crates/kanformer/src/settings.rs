//! Layered run configuration: built-in defaults, then a TOML file with
//! `[model]`, `[moe]`, `[train]` and `[data]` sections, then `--section.key`
//! flags. Every key remembers which layer set it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kanformer_core::config::{ExpertMix, HeadKind, InputKind, KanConfig, ModelConfig, MoeConfig, NormMode, RouterKind};
use kanformer_core::data::{feynman_registry, feynman_spec, CifarVariant};
use kanformer_core::optim::AdamWConfig;
use sha2::{Digest, Sha256};
use toml::Value;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Str,
    Ints,
    Floats,
}

pub struct KeyDef {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

macro_rules! keys {
    ($($key:literal $kind:ident $default:literal $help:literal;)*) => {
        pub const KEYS: &[KeyDef] = &[$(KeyDef { key: $key, kind: Kind::$kind, default: $default, help: $help }),*];
    };
}

keys! {
    "model.dim" Int "64" "token width D (64 for function tasks, 128 for images unless set)";
    "model.layers" Int "12" "number of encoder blocks";
    "model.heads" Int "8" "attention heads (4 when dim/heads < 8 unless set)";
    "model.patch_size" Int "4" "image patch side in pixels";
    "model.p_max" Float "0.1" "stochastic-depth probability of the last block";
    "model.dropout" Float "0.1" "dropout on the MoE sublayer output";
    "model.mlp_hidden" Int "0" "MLP expert hidden width, 0 for 4*dim";
    "model.ln_eps" Float "1e-5" "layer-norm epsilon";
    "model.grid_size" Int "8" "FasterKAN grid points";
    "model.grid_min" Float "-2.0" "first FasterKAN grid point";
    "model.grid_max" Float "2.0" "last FasterKAN grid point";
    "model.denominator" Float "0.0" "switch denominator, 0 for the grid spacing";
    "model.trainable_denominator" Bool "false" "learn the switch denominator";
    "moe.num_experts" Int "8" "experts per MoE layer (even: half MLP, half FasterKAN)";
    "moe.slots" Int "1" "slots per expert for soft routing";
    "moe.router" Str "topk" "soft | topk";
    "moe.top_k" Int "2" "experts evaluated per token with topk routing";
    "moe.norm_mode" Str "paper" "soft dispatch normalisation: paper | standard";
    "moe.renormalize_topk" Bool "false" "rescale kept top-k weights to sum to 1";
    "moe.experts" Str "mixed" "expert pool: mixed | mlp | kan";
    "train.task" Str "feynman:I.12.1" "feynman:<id> | cifar10 | cifar100";
    "train.lr" Float "5e-5" "learning rate";
    "train.batch_size" Int "0" "batch size, 0 for 4 (feynman) or 128 (cifar)";
    "train.max_epochs" Int "200" "epoch limit";
    "train.patience" Int "10" "epochs without improvement before stopping";
    "train.seed" Int "0" "seed for initialisation, data and shuffling";
    "train.weight_decay" Float "0.01" "decoupled weight decay";
    "train.beta1" Float "0.9" "Adam first-moment decay";
    "train.beta2" Float "0.999" "Adam second-moment decay";
    "train.eps" Float "1e-8" "Adam epsilon";
    "data.train_size" Int "4000" "training samples (Feynman: generated; CIFAR: cap, 0 for all)";
    "data.test_size" Int "1000" "test samples (Feynman: generated; CIFAR: cap, 0 for all)";
    "data.cifar_dir" Str "" "directory with the CIFAR binary batches";
    "data.classes" Ints "[]" "CIFAR class subset, relabelled in listed order; empty for all";
    "data.standardize" Bool "true" "per-channel standardisation of CIFAR pixels";
    "data.mean" Floats "[]" "per-channel means, empty for the dataset constants";
    "data.std" Floats "[]" "per-channel deviations, empty for the dataset constants";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Default,
    File,
    Flag,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Default => "default",
            Provenance::File => "file",
            Provenance::Flag => "flag",
        })
    }
}

fn key_index(key: &str) -> Result<usize> {
    KEYS.iter()
        .position(|k| k.key == key)
        .ok_or_else(|| Error::config(key, "unknown configuration key"))
}

fn parse_raw(def: &KeyDef, raw: &str) -> Result<Value> {
    let bad = |what: &str| Error::config(def.key, format!("expected {what}, got {raw:?}"));
    let list = |raw: &str| -> Vec<String> {
        let inner = raw.trim().trim_start_matches('[').trim_end_matches(']');
        inner.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    };
    Ok(match def.kind {
        Kind::Int => Value::Integer(raw.trim().parse().map_err(|_| bad("an integer"))?),
        Kind::Float => Value::Float(raw.trim().parse().map_err(|_| bad("a number"))?),
        Kind::Bool => Value::Boolean(raw.trim().parse().map_err(|_| bad("true or false"))?),
        Kind::Str => Value::String(raw.to_string()),
        Kind::Ints => Value::Array(
            list(raw)
                .iter()
                .map(|s| s.parse().map(Value::Integer).map_err(|_| bad("a list of integers")))
                .collect::<Result<_>>()?,
        ),
        Kind::Floats => Value::Array(
            list(raw)
                .iter()
                .map(|s| s.parse().map(Value::Float).map_err(|_| bad("a list of numbers")))
                .collect::<Result<_>>()?,
        ),
    })
}

/// Coerce a TOML value to the key's kind (integers are accepted where
/// numbers are expected).
fn coerce(def: &KeyDef, v: Value) -> Result<Value> {
    let bad = || Error::config(def.key, format!("expected {:?}, got {v}", def.kind));
    let num = |v: &Value| match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    };
    Ok(match (def.kind, &v) {
        (Kind::Int, Value::Integer(_)) | (Kind::Bool, Value::Boolean(_)) | (Kind::Str, Value::String(_)) => v,
        (Kind::Float, _) => Value::Float(num(&v).ok_or_else(bad)?),
        (Kind::Ints, Value::Array(a)) if a.iter().all(|x| x.is_integer()) => v,
        (Kind::Floats, Value::Array(a)) => Value::Array(
            a.iter()
                .map(|x| num(x).map(Value::Float).ok_or_else(bad))
                .collect::<Result<_>>()?,
        ),
        _ => return Err(bad()),
    })
}

/// The fully defaulted key-value tree.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedConfig {
    values: Vec<(Value, Provenance)>,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        ResolvedConfig {
            values: KEYS
                .iter()
                .map(|k| (parse_raw(k, k.default).expect("built-in default parses"), Provenance::Default))
                .collect(),
        }
    }
}

impl ResolvedConfig {
    /// Defaults for benchmark harnesses: a 4-block encoder.
    pub fn bench_defaults() -> Self {
        let mut c = Self::default();
        c.values[key_index("model.layers").unwrap()].0 = Value::Integer(4);
        c
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        self.apply_toml(&text)
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e| Error::config("--config", format!("invalid TOML: {e}")))?;
        for (section, body) in table {
            let Value::Table(body) = body else {
                return Err(Error::config(&section, "expected a [section] table"));
            };
            for (name, v) in body {
                let key = format!("{section}.{name}");
                let i = key_index(&key)?;
                self.values[i] = (coerce(&KEYS[i], v)?, Provenance::File);
            }
        }
        Ok(())
    }

    pub fn set_flag(&mut self, key: &str, raw: &str) -> Result<()> {
        let i = key_index(key)?;
        self.values[i] = (parse_raw(&KEYS[i], raw)?, Provenance::Flag);
        Ok(())
    }

    /// Set a key programmatically; recorded as a flag.
    pub fn set(&mut self, key: &str, v: impl Into<Value>) -> Result<()> {
        let i = key_index(key)?;
        self.values[i] = (coerce(&KEYS[i], v.into())?, Provenance::Flag);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<&Value> {
        Ok(&self.values[key_index(key)?].0)
    }

    pub fn provenance(&self, key: &str) -> Result<Provenance> {
        Ok(self.values[key_index(key)?].1)
    }

    /// Keys whose values differ between two configurations.
    pub fn diff(&self, other: &ResolvedConfig) -> Vec<&'static str> {
        KEYS.iter()
            .zip(self.values.iter().zip(&other.values))
            .filter(|(_, (a, b))| a.0 != b.0)
            .map(|(k, _)| k.key)
            .collect()
    }

    fn int(&self, key: &str) -> Result<i64> {
        Ok(self.get(key)?.as_integer().expect("kind checked"))
    }

    fn uint(&self, key: &'static str) -> Result<usize> {
        let v = self.int(key)?;
        usize::try_from(v).map_err(|_| Error::config(key, format!("must be non-negative, got {v}")))
    }

    fn float(&self, key: &str) -> Result<f64> {
        Ok(self.get(key)?.as_float().expect("kind checked"))
    }

    fn boolean(&self, key: &str) -> Result<bool> {
        Ok(self.get(key)?.as_bool().expect("kind checked"))
    }

    fn string(&self, key: &str) -> Result<&str> {
        Ok(self.get(key)?.as_str().expect("kind checked"))
    }

    fn floats(&self, key: &str) -> Result<Vec<f64>> {
        Ok(self.get(key)?.as_array().expect("kind checked").iter().map(|v| v.as_float().unwrap()).collect())
    }

    /// Fill task-dependent defaults for keys nobody set.
    pub fn finalize(&mut self) -> Result<()> {
        let task: Task = self.string("train.task")?.parse()?;
        let image = !matches!(task, Task::Feynman(_));
        let mut default = |key: &str, v: Value| {
            let i = key_index(key).unwrap();
            if self.values[i].1 == Provenance::Default {
                self.values[i].0 = v;
            }
        };
        default("train.batch_size", Value::Integer(if image { 128 } else { 4 }));
        default("model.dim", Value::Integer(if image { 128 } else { 64 }));
        if image {
            default("data.train_size", Value::Integer(0));
            default("data.test_size", Value::Integer(0));
        }
        if let Task::Cifar(variant) = task {
            let (dir, mean, std) = cifar_defaults(variant);
            default("data.cifar_dir", Value::String(dir.into()));
            default("data.mean", Value::Array(mean.iter().map(|&v| Value::Float(v as f64)).collect()));
            default("data.std", Value::Array(std.iter().map(|&v| Value::Float(v as f64)).collect()));
        }
        let dim = self.int("model.dim")?;
        let i = key_index("model.heads")?;
        if self.values[i].1 == Provenance::Default {
            let heads = self.int("model.heads")?;
            if heads > 0 && dim / heads < 8 {
                self.values[i].0 = Value::Integer(4);
            }
        }
        Ok(())
    }

    /// `[section]` blocks in key order; each line carries its provenance as
    /// a trailing comment.
    pub fn to_toml(&self) -> String {
        self.render(true)
    }

    /// Values only; the text the fingerprint is computed over.
    pub fn to_toml_values(&self) -> String {
        self.render(false)
    }

    fn render(&self, provenance: bool) -> String {
        let mut out = String::new();
        let mut section = "";
        for (def, (v, p)) in KEYS.iter().zip(&self.values) {
            let (sec, name) = def.key.split_once('.').unwrap();
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{sec}]\n"));
                section = sec;
            }
            let v = match v {
                Value::Float(f) => format_float(*f),
                other => other.to_string(),
            };
            if provenance {
                out.push_str(&format!("{name} = {v} # {p}\n"));
            } else {
                out.push_str(&format!("{name} = {v}\n"));
            }
        }
        out
    }

    /// SHA-256 of the resolved values (provenance excluded), hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.render(false).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build(&self) -> Result<RunConfig> {
        let mut c = self.clone();
        c.finalize()?;
        c.build_finalized()
    }

    fn build_finalized(&self) -> Result<RunConfig> {
        let task: Task = self.string("train.task")?.parse()?;
        if let Some(classes) = self.get("data.classes")?.as_array() {
            let mut seen: Vec<&Value> = Vec::new();
            for c in classes {
                if seen.contains(&c) {
                    return Err(Error::config("data.classes", format!("class {c} listed twice")));
                }
                seen.push(c);
            }
            if classes.len() == 1 {
                return Err(Error::config("data.classes", "a subset needs at least 2 classes"));
            }
        }
        let (input, head) = match &task {
            Task::Feynman(id) => (InputKind::Scalars { arity: feynman_spec(id)?.arity() }, HeadKind::Scalar),
            Task::Cifar(v) => {
                let classes = self.get("data.classes")?.as_array().unwrap();
                let count = if classes.is_empty() { v.classes() } else { classes.len() };
                (
                    InputKind::Image {
                        height: 32,
                        width: 32,
                        channels: 3,
                    },
                    HeadKind::Classes { count },
                )
            }
        };
        let hidden = self.uint("model.mlp_hidden")?;
        let den = self.float("model.denominator")?;
        let model = ModelConfig {
            dim: self.uint("model.dim")?,
            layers: self.uint("model.layers")?,
            heads: self.uint("model.heads")?,
            patch_size: self.uint("model.patch_size")?,
            p_max: self.float("model.p_max")?,
            dropout: self.float("model.dropout")?,
            mlp_hidden: (hidden > 0).then_some(hidden),
            ln_eps: self.float("model.ln_eps")?,
            kan: KanConfig {
                grid_size: self.uint("model.grid_size")?,
                grid_min: self.float("model.grid_min")?,
                grid_max: self.float("model.grid_max")?,
                denominator: (den != 0.0).then_some(den),
                trainable_denominator: self.boolean("model.trainable_denominator")?,
            },
            moe: MoeConfig {
                num_experts: self.uint("moe.num_experts")?,
                slots: self.uint("moe.slots")?,
                router: parse_enum("moe.router", self.string("moe.router")?, &[("soft", RouterKind::Soft), ("topk", RouterKind::Topk)])?,
                top_k: self.uint("moe.top_k")?,
                norm_mode: parse_enum(
                    "moe.norm_mode",
                    self.string("moe.norm_mode")?,
                    &[("paper", NormMode::Paper), ("standard", NormMode::Standard)],
                )?,
                renormalize_topk: self.boolean("moe.renormalize_topk")?,
                experts: parse_enum(
                    "moe.experts",
                    self.string("moe.experts")?,
                    &[("mixed", ExpertMix::Mixed), ("mlp", ExpertMix::Mlp), ("kan", ExpertMix::Kan)],
                )?,
            },
            input,
            head,
        };
        model.validate().map_err(Error::from)?;

        let train = TrainConfig {
            lr: self.float("train.lr")?,
            batch_size: self.uint("train.batch_size")?,
            max_epochs: self.uint("train.max_epochs")?,
            patience: self.uint("train.patience")?,
            seed: self.int("train.seed")? as u64,
            optim: AdamWConfig {
                lr: self.float("train.lr")?,
                beta1: self.float("train.beta1")?,
                beta2: self.float("train.beta2")?,
                eps: self.float("train.eps")?,
                weight_decay: self.float("train.weight_decay")?,
            },
        };
        train.validate()?;

        let channel3 = |key: &'static str| -> Result<[f32; 3]> {
            let v = self.floats(key)?;
            match v.len() {
                3 => Ok([v[0] as f32, v[1] as f32, v[2] as f32]),
                0 => Ok([0.0, 0.0, 0.0]),
                n => Err(Error::config(key, format!("expected 3 channel values, got {n}"))),
            }
        };
        let classes: Vec<usize> = self
            .get("data.classes")?
            .as_array()
            .unwrap()
            .iter()
            .map(|v| usize::try_from(v.as_integer().unwrap()).map_err(|_| Error::config("data.classes", "negative class id")))
            .collect::<Result<_>>()?;
        if let Task::Cifar(v) = task {
            if let Some(&c) = classes.iter().find(|&&c| c >= v.classes()) {
                return Err(Error::config("data.classes", format!("class {c} outside 0..{}", v.classes())));
            }
        }
        let data = DataConfig {
            train_size: self.uint("data.train_size")?,
            test_size: self.uint("data.test_size")?,
            cifar_dir: PathBuf::from(self.string("data.cifar_dir")?),
            classes,
            standardize: self.boolean("data.standardize")?,
            mean: channel3("data.mean")?,
            std: channel3("data.std")?,
        };
        if matches!(task, Task::Feynman(_)) && (data.train_size == 0 || data.test_size == 0) {
            return Err(Error::config("data.train_size", "Feynman tasks need positive train and test sizes"));
        }
        if data.standardize && matches!(task, Task::Cifar(_)) && data.std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::config("data.std", "channel deviations must be positive"));
        }
        Ok(RunConfig {
            task,
            model,
            train,
            data,
            resolved: self.clone(),
        })
    }
}

fn format_float(f: f64) -> String {
    let s = format!("{f:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn parse_enum<T: Copy>(key: &'static str, s: &str, options: &[(&str, T)]) -> Result<T> {
    options.iter().find(|(n, _)| *n == s).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Error::config(key, format!("unknown value {s:?}; expected one of {}", names.join(", ")))
    })
}

fn cifar_defaults(v: CifarVariant) -> (&'static str, [f32; 3], [f32; 3]) {
    match v {
        CifarVariant::Cifar10 => (
            "data/cifar-10-batches-bin",
            kanformer_core::data::CIFAR10_MEAN,
            kanformer_core::data::CIFAR10_STD,
        ),
        CifarVariant::Cifar100 => ("data/cifar-100-binary", [0.5071, 0.4865, 0.4409], [0.2673, 0.2564, 0.2762]),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Task {
    Feynman(String),
    Cifar(CifarVariant),
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let task = match s {
            "cifar10" => Task::Cifar(CifarVariant::Cifar10),
            "cifar100" => Task::Cifar(CifarVariant::Cifar100),
            _ => match s.strip_prefix("feynman:") {
                Some(id) if feynman_spec(id).is_ok() => Task::Feynman(id.to_string()),
                _ => {
                    return Err(Error::config(
                        "train.task",
                        format!("unknown task {s:?}; valid tasks: {}", valid_tasks().join(", ")),
                    ))
                }
            },
        };
        Ok(task)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Feynman(id) => write!(f, "feynman:{id}"),
            Task::Cifar(CifarVariant::Cifar10) => f.write_str("cifar10"),
            Task::Cifar(CifarVariant::Cifar100) => f.write_str("cifar100"),
        }
    }
}

pub fn valid_tasks() -> Vec<String> {
    let mut v: Vec<String> = feynman_registry().iter().map(|s| format!("feynman:{}", s.id)).collect();
    v.push("cifar10".into());
    v.push("cifar100".into());
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub optim: AdamWConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::config("train.lr", "must be a non-negative number"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("train.max_epochs", "must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::config("train.patience", "must be at least 1"));
        }
        for (key, b) in [("train.beta1", self.optim.beta1), ("train.beta2", self.optim.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(key, "must lie in [0, 1)"));
            }
        }
        if !(self.optim.eps > 0.0) {
            return Err(Error::config("train.eps", "must be positive"));
        }
        if !(self.optim.weight_decay >= 0.0) {
            return Err(Error::config("train.weight_decay", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub train_size: usize,
    pub test_size: usize,
    pub cifar_dir: PathBuf,
    pub classes: Vec<usize>,
    pub standardize: bool,
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

/// Typed, validated view of a [`ResolvedConfig`].
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub task: Task,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    /// The finalized tree this was built from.
    pub resolved: ResolvedConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_resolve_in_order() {
        let mut c = ResolvedConfig::default();
        c.apply_toml("[model]\ndim = 32\nlayers = 3\n[train]\nlr = 1\n").unwrap();
        c.set_flag("model.dim", "48").unwrap();
        assert_eq!(c.get("model.dim").unwrap().as_integer(), Some(48));
        assert_eq!(c.provenance("model.dim").unwrap(), Provenance::Flag);
        assert_eq!(c.provenance("model.layers").unwrap(), Provenance::File);
        assert_eq!(c.provenance("moe.top_k").unwrap(), Provenance::Default);
        assert_eq!(c.get("train.lr").unwrap().as_float(), Some(1.0));
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut c = ResolvedConfig::default();
        assert!(c.apply_toml("[model]\nwidth = 3\n").is_err());
        assert!(c.set_flag("moe.bogus", "1").is_err());
        let err = c.set_flag("model.dim", "wide").unwrap_err();
        assert!(err.to_string().contains("model.dim"));
    }

    #[test]
    fn odd_expert_count_names_the_key() {
        let mut c = ResolvedConfig::default();
        c.set_flag("moe.num_experts", "7").unwrap();
        let err = c.build().unwrap_err();
        assert!(err.to_string().contains("moe.num_experts"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn task_defaults() {
        let mut c = ResolvedConfig::default();
        c.set_flag("train.task", "cifar10").unwrap();
        let r = c.build().unwrap();
        assert_eq!(r.train.batch_size, 128);
        assert_eq!(r.model.dim, 128);
        assert_eq!(r.model.head, HeadKind::Classes { count: 10 });
        let r = ResolvedConfig::default().build().unwrap();
        assert_eq!((r.train.batch_size, r.model.dim, r.model.heads), (4, 64, 8));

        let mut c = ResolvedConfig::default();
        c.set_flag("model.dim", "16").unwrap();
        assert_eq!(c.build().unwrap().model.heads, 4);
    }

    #[test]
    fn unknown_task_lists_valid_ones() {
        let mut c = ResolvedConfig::default();
        c.set_flag("train.task", "mnist").unwrap();
        let msg = c.build().unwrap_err().to_string();
        assert!(msg.contains("feynman:I.6.20a") && msg.contains("cifar100"), "{msg}");
    }

    #[test]
    fn rendered_tree_reparses_to_the_same_fingerprint() {
        let mut c = ResolvedConfig::bench_defaults();
        c.set_flag("data.classes", "0,1").unwrap();
        c.set_flag("train.lr", "0.001").unwrap();
        let mut back = ResolvedConfig::default();
        back.apply_toml(&c.to_toml()).unwrap();
        assert_eq!(back.fingerprint(), c.fingerprint());
        assert!(back.diff(&c).is_empty());
    }
}
