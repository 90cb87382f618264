mod common;

use std::fs;

use kanformer::bench::{ablation_cells, bench_ablation, bench_feynman, emit_both, Axis, Better, Column, Table, TableFormat, Value};
use kanformer::settings::{ResolvedConfig, Task};
use kanformer_core::data::{feynman_registry, CifarVariant};

fn tiny(c: &mut ResolvedConfig) {
    for (k, v) in [
        ("model.dim", "16"),
        ("model.layers", "1"),
        ("model.heads", "2"),
        ("model.patch_size", "8"),
        ("model.grid_size", "4"),
        ("train.max_epochs", "1"),
        ("train.batch_size", "8"),
        ("data.train_size", "24"),
        ("data.test_size", "16"),
    ] {
        c.set_flag(k, v).unwrap();
    }
}

fn sample_table() -> Table {
    Table {
        columns: vec![
            Column { name: "Top-k".into(), better: None },
            Column { name: "CIFAR-10 (Acc1)".into(), better: Some(Better::Higher) },
            Column { name: "RMSE".into(), better: Some(Better::Lower) },
        ],
        rows: vec![
            vec![Value::Text("1".into()), Value::Metric { mean: 0.5, sd: None }, Value::Metric { mean: 0.25, sd: None }],
            vec![Value::Text("2".into()), Value::Metric { mean: 0.75, sd: Some(0.125) }, Value::Metric { mean: 0.5, sd: None }],
        ],
        configs: vec![vec!["aa".into()], vec!["bb".into(), "cc".into()]],
    }
}

#[test]
fn smallest_table_has_header_and_one_line() {
    let t = Table {
        columns: vec![
            Column { name: "Feynman Eq.".into(), better: None },
            Column { name: "RMSE".into(), better: Some(Better::Lower) },
        ],
        rows: vec![vec![Value::Text("I.12.1".into()), Value::Metric { mean: 0.0125, sd: None }]],
        configs: vec![vec!["f".into()]],
    };
    let csv = t.render(TableFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().next().unwrap(), "Feynman Eq.,RMSE,Config,Best");
    let md = t.render(TableFormat::Markdown).unwrap();
    assert_eq!(md.lines().filter(|l| !l.starts_with("|---")).count(), 2);
    assert!(md.contains("**1.250e-2**"));
}

#[test]
fn empty_schema_is_rejected() {
    let t = Table { columns: vec![], rows: vec![], configs: vec![] };
    assert!(t.render(TableFormat::Markdown).is_err());
}

#[test]
fn markdown_and_csv_carry_the_same_values() {
    let t = sample_table();
    let md = t.render(TableFormat::Markdown).unwrap();
    let md_rows: Vec<Vec<String>> = md
        .lines()
        .filter(|l| !l.starts_with("|---"))
        .map(|l| {
            l.trim_matches('|')
                .split('|')
                .map(|c| c.trim().trim_matches('*').to_string())
                .collect()
        })
        .collect();
    let csv_text = t.render(TableFormat::Csv).unwrap();
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    let csv_rows: Vec<Vec<String>> = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    assert_eq!(md_rows[0], header[..header.len() - 1]);
    for (m, c) in md_rows[1..].iter().zip(&csv_rows) {
        assert_eq!(m[..], c[..c.len() - 1]);
    }
    assert_eq!(csv_rows[0].last().unwrap(), "RMSE");
    assert_eq!(csv_rows[1].last().unwrap(), "CIFAR-10 (Acc1)");
    assert!(md.contains("**0.7500±0.1250**"));
}

#[test]
fn ablation_cells_differ_in_exactly_the_swept_key() {
    let base = ResolvedConfig::bench_defaults();
    let cells = ablation_cells(Axis::Experts, &[4, 6, 8, 10], &[Task::Cifar(CifarVariant::Cifar10)], &base).unwrap();
    assert_eq!(cells.len(), 4);
    for w in cells.windows(2) {
        assert_eq!(w[0].2.diff(&w[1].2), vec!["moe.num_experts"]);
    }
    let cells = ablation_cells(Axis::Topk, &[1, 2, 3], &[Task::Cifar(CifarVariant::Cifar10)], &base).unwrap();
    for w in cells.windows(2) {
        assert_eq!(w[0].2.diff(&w[1].2), vec!["moe.top_k"]);
    }
}

#[test]
fn invalid_axis_values_fail_before_any_run() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ResolvedConfig::bench_defaults();
    let c10 = [Task::Cifar(CifarVariant::Cifar10)];
    let err = bench_ablation(Axis::Topk, &[1, 0], &c10, &base, &[0], tmp.path()).unwrap_err();
    assert!(err.to_string().contains("moe.top_k"), "{err}");
    let err = bench_ablation(Axis::Experts, &[4, 7], &c10, &base, &[0], tmp.path()).unwrap_err();
    assert!(err.to_string().contains("moe.num_experts"), "{err}");
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn unknown_equations_are_listed_before_training() {
    let tmp = tempfile::tempdir().unwrap();
    let eqs = vec!["I.12.1".to_string(), "II.1.1".to_string(), "X".to_string()];
    let err = bench_feynman(&eqs, &ResolvedConfig::bench_defaults(), &[0], tmp.path()).unwrap_err();
    assert!(err.to_string().contains("II.1.1, X"), "{err}");
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn empty_equation_list_gives_an_empty_table() {
    let tmp = tempfile::tempdir().unwrap();
    let t = bench_feynman(&[], &ResolvedConfig::bench_defaults(), &[0], tmp.path()).unwrap();
    assert!(t.rows.is_empty());
    assert_eq!(t.render(TableFormat::Csv).unwrap().lines().count(), 1);
}

#[test]
fn registry_holds_thirty_equations_in_order() {
    let ids: Vec<&str> = feynman_registry().iter().map(|s| s.id).collect();
    assert_eq!(ids.len(), 30);
    assert_eq!(ids.first(), Some(&"I.6.20a"));
    assert_eq!(ids.last(), Some(&"I.30.3"));
}

#[test]
fn feynman_bench_rows_follow_registry_order_and_are_reproducible() {
    let mut base = ResolvedConfig::bench_defaults();
    tiny(&mut base);
    let eqs = vec!["I.25.13".to_string(), "I.12.1".to_string()];
    let render = || {
        let tmp = tempfile::tempdir().unwrap();
        let t = bench_feynman(&eqs, &base, &[0], tmp.path()).unwrap();
        let (md, csv) = emit_both(&t, tmp.path(), "feynman").unwrap();
        assert!(md.starts_with(tmp.path().join("tables")));
        (t, fs::read(md).unwrap(), fs::read(csv).unwrap())
    };
    let (t, md1, csv1) = render();
    let (_, md2, csv2) = render();
    assert_eq!(t.rows[0][0], Value::Text("I.12.1".into()));
    assert_eq!(t.rows[1][0], Value::Text("I.25.13".into()));
    assert_eq!((md1, csv1), (md2, csv2));
}

#[test]
fn ablation_table_schema_and_seed_averaging() {
    let tmp = tempfile::tempdir().unwrap();
    let c10 = common::write_cifar_fixture(&tmp.path().join("c10"), CifarVariant::Cifar10, 8, 16);
    let c100 = common::write_cifar_fixture(&tmp.path().join("c100"), CifarVariant::Cifar100, 40, 16);
    let mut base = ResolvedConfig::bench_defaults();
    tiny(&mut base);
    base.set_flag("data.cifar_dir", c10.to_str().unwrap()).unwrap();
    let out = tmp.path().join("out");
    let t = bench_ablation(Axis::Topk, &[1, 2], &[Task::Cifar(CifarVariant::Cifar10)], &base, &[0, 1], &out).unwrap();
    let names: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["Top-k", "CIFAR-10 (Acc1)", "CIFAR-10 (Acc5)"]);
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows.iter().all(|r| matches!(r[1], Value::Metric { sd: Some(_), .. })));
    assert_eq!(t.configs[0].len(), 2);
    assert_eq!(fs::read_to_string(out.join("results.jsonl")).unwrap().lines().count(), 4);

    base.set_flag("data.cifar_dir", c100.to_str().unwrap()).unwrap();
    let t = bench_ablation(Axis::Experts, &[2], &[Task::Cifar(CifarVariant::Cifar100)], &base, &[0], &tmp.path().join("o2")).unwrap();
    let names: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["Expert", "CIFAR-100 (Acc1)", "CIFAR-100 (Acc5)"]);
}
