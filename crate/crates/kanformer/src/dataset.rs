//! Turning a [`RunConfig`] into in-memory train/test sets.

use std::fs;
use std::path::{Path, PathBuf};

use kanformer_core::data::{decode_cifar, feynman_generate, feynman_spec, make_split, standardize, CifarVariant, LabeledImage};
use kanformer_core::Rng;

use crate::error::{Error, Result};
use crate::settings::{RunConfig, Task};

/// Seed streams derived from `train.seed`.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const DROPOUT: u64 = 4;
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Regression(Vec<f32>),
    Classes { labels: Vec<usize>, count: usize },
}

/// Samples stored back to back; `sample_shape` excludes the batch axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f32>,
    pub sample_shape: Vec<usize>,
    pub targets: Targets,
}

impl Dataset {
    pub fn len(&self) -> usize {
        match &self.targets {
            Targets::Regression(t) => t.len(),
            Targets::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let n = self.sample_len();
        &self.inputs[i * n..(i + 1) * n]
    }

    /// Inputs for `indices` with a leading batch axis.
    pub fn gather_inputs(&self, indices: &[usize]) -> (Vec<usize>, Vec<f32>) {
        let mut data = Vec::with_capacity(indices.len() * self.sample_len());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.sample_shape);
        (shape, data)
    }

    fn select(&self, indices: &[usize]) -> Dataset {
        let (_, inputs) = self.gather_inputs(indices);
        let targets = match &self.targets {
            Targets::Regression(t) => Targets::Regression(indices.iter().map(|&i| t[i]).collect()),
            Targets::Classes { labels, count } => Targets::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                count: *count,
            },
        };
        Dataset {
            inputs,
            sample_shape: self.sample_shape.clone(),
            targets,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskData {
    pub train: Dataset,
    pub test: Dataset,
    /// Human-readable description of where the samples came from.
    pub source: String,
    /// Feynman variable names, empty for images.
    pub variables: Vec<String>,
}

pub fn load(run: &RunConfig) -> Result<TaskData> {
    match &run.task {
        Task::Feynman(id) => load_feynman(id, run),
        Task::Cifar(variant) => load_cifar(*variant, run),
    }
}

fn load_feynman(id: &str, run: &RunConfig) -> Result<TaskData> {
    let spec = feynman_spec(id)?;
    let (n_train, n_test) = (run.data.train_size, run.data.test_size);
    let n = n_train + n_test;
    let data_seed = Rng::derive(run.train.seed, stream::DATA).next_u64();
    let data = feynman_generate(&spec, n, data_seed)?;
    let all = Dataset {
        inputs: data.inputs.data().iter().map(|&v| v as f32).collect(),
        sample_shape: vec![spec.arity()],
        targets: Targets::Regression(data.targets.data().iter().map(|&v| v as f32).collect()),
    };
    let split_seed = Rng::derive(run.train.seed, stream::SPLIT).next_u64();
    let order: Vec<usize> = (0..n).collect();
    let split = make_split(&order, n_test as f64 / n as f64, split_seed)?;
    Ok(TaskData {
        train: all.select(&split.train),
        test: all.select(&split.test),
        source: format!("feynman:{id} n={n} data_seed={data_seed} split_seed={split_seed}"),
        variables: spec.variables().map(str::to_string).collect(),
    })
}

/// Record files for a variant, training files first.
pub fn cifar_files(variant: CifarVariant) -> (Vec<&'static str>, &'static str) {
    match variant {
        CifarVariant::Cifar10 => (
            vec!["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"],
            "test_batch.bin",
        ),
        CifarVariant::Cifar100 => (vec!["train.bin"], "test.bin"),
    }
}

pub fn read_cifar_file(path: &Path, variant: CifarVariant) -> Result<Vec<LabeledImage>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cifar(&bytes, variant).map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))
}

fn load_cifar(variant: CifarVariant, run: &RunConfig) -> Result<TaskData> {
    let dir = &run.data.cifar_dir;
    let (train_files, test_file) = cifar_files(variant);
    let present: Vec<PathBuf> = train_files.iter().map(|f| dir.join(f)).filter(|p| p.is_file()).collect();
    if present.is_empty() || !dir.join(test_file).is_file() {
        return Err(Error::config(
            "data.cifar_dir",
            format!(
                "{} must contain {} and {test_file}",
                dir.display(),
                train_files.join(" / ")
            ),
        ));
    }
    let mut train = Vec::new();
    for p in &present {
        train.extend(read_cifar_file(p, variant)?);
    }
    let test = read_cifar_file(&dir.join(test_file), variant)?;
    let classes = &run.data.classes;
    let count = if classes.is_empty() { variant.classes() } else { classes.len() };
    let build = |images: Vec<LabeledImage>, cap: usize| -> Dataset {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for img in images {
            let label = if classes.is_empty() {
                Some(img.label)
            } else {
                classes.iter().position(|&c| c == img.label)
            };
            let Some(label) = label else { continue };
            if cap > 0 && labels.len() == cap {
                break;
            }
            let mut px = img.pixels.into_data();
            if run.data.standardize {
                standardize(&mut px, run.data.mean, run.data.std);
            }
            inputs.extend(px);
            labels.push(label);
        }
        Dataset {
            inputs,
            sample_shape: vec![32, 32, 3],
            targets: Targets::Classes { labels, count },
        }
    };
    let train = build(train, run.data.train_size);
    let test = build(test, run.data.test_size);
    if train.is_empty() || test.is_empty() {
        return Err(Error::config("data.classes", "no images left after class selection"));
    }
    Ok(TaskData {
        train,
        test,
        source: format!("{} dir={}", run.task, dir.display()),
        variables: Vec::new(),
    })
}

/// One row per sample: variables, then the target.
pub fn export_csv(data: &Dataset, variables: &[String], path: &Path) -> Result<()> {
    let Targets::Regression(targets) = &data.targets else {
        return Err(Error::Runtime("CSV export is only available for regression tasks".into()));
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))?;
    let to_err = |e: csv::Error| Error::Runtime(format!("{}: {e}", path.display()));
    let mut header: Vec<&str> = variables.iter().map(String::as_str).collect();
    header.push("target");
    w.write_record(&header).map_err(to_err)?;
    for (i, t) in targets.iter().enumerate() {
        let row = data.sample(i).iter().chain(std::iter::once(t)).map(|v| format!("{v:?}"));
        w.write_record(row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
