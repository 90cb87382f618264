mod common;

use kanformer::dataset::{load, Targets};
use kanformer::settings::ResolvedConfig;
use kanformer_core::data::{CifarVariant, CIFAR10_MEAN, CIFAR10_STD};

#[test]
fn feynman_sets_have_the_configured_sizes_and_are_disjoint() {
    let mut c = ResolvedConfig::default();
    c.set_flag("train.task", "feynman:I.8.4").unwrap();
    c.set_flag("data.train_size", "90").unwrap();
    c.set_flag("data.test_size", "10").unwrap();
    let run = c.build().unwrap();
    let d = load(&run).unwrap();
    assert_eq!((d.train.len(), d.test.len()), (90, 10));
    assert_eq!(d.train.sample_shape, vec![4]);
    for i in 0..d.test.len() {
        assert!((0..d.train.len()).all(|j| d.train.sample(j) != d.test.sample(i)));
    }
    assert_eq!(load(&run).unwrap(), d);
    c.set_flag("train.seed", "1").unwrap();
    assert_ne!(load(&c.build().unwrap()).unwrap().train, d.train);
}

#[test]
fn cifar_directory_with_class_subset_and_caps() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = common::write_cifar_fixture(tmp.path(), CifarVariant::Cifar10, 20, 30);
    let mut c = ResolvedConfig::default();
    c.set_flag("train.task", "cifar10").unwrap();
    c.set_flag("data.cifar_dir", dir.to_str().unwrap()).unwrap();
    c.set_flag("data.classes", "[3, 1]").unwrap();
    c.set_flag("data.train_size", "7").unwrap();
    let run = c.build().unwrap();
    assert_eq!(run.data.mean, CIFAR10_MEAN);
    assert_eq!(run.data.std, CIFAR10_STD);
    let d = load(&run).unwrap();
    assert_eq!(d.train.len(), 7);
    assert_eq!(d.test.len(), 6);
    let Targets::Classes { labels, count } = &d.train.targets else { panic!() };
    assert_eq!(*count, 2);
    // Fixture labels cycle 0..10, so the first kept images are classes 1, 3, 1, 3, ...
    assert_eq!(labels[..4], [1, 0, 1, 0]);

    let mut raw = c.clone();
    raw.set_flag("data.standardize", "false").unwrap();
    let r = load(&raw.build().unwrap()).unwrap();
    let v = r.train.sample(0)[0];
    let s = d.train.sample(0)[0];
    assert!((s - (v - CIFAR10_MEAN[0]) / CIFAR10_STD[0]).abs() < 1e-6);
    assert!(r.train.inputs.iter().all(|&p| (0.0..=1.0).contains(&p)));
}

#[test]
fn missing_cifar_files_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ResolvedConfig::default();
    c.set_flag("train.task", "cifar100").unwrap();
    c.set_flag("data.cifar_dir", tmp.path().to_str().unwrap()).unwrap();
    let err = load(&c.build().unwrap()).unwrap_err();
    assert!(err.to_string().contains("train.bin"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn csv_export_round_trips() {
    let mut c = ResolvedConfig::default();
    c.set_flag("train.task", "feynman:I.6.20").unwrap();
    c.set_flag("data.train_size", "5").unwrap();
    c.set_flag("data.test_size", "2").unwrap();
    let d = load(&c.build().unwrap()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("t.csv");
    kanformer::dataset::export_csv(&d.train, &d.variables, &path).unwrap();
    let mut r = csv::Reader::from_path(&path).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["theta", "sigma", "target"]);
    let Targets::Regression(t) = &d.train.targets else { panic!() };
    for (i, rec) in r.records().enumerate() {
        let vals: Vec<f32> = rec.unwrap().iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals[..2], *d.train.sample(i));
        assert_eq!(vals[2], t[i]);
    }
}
