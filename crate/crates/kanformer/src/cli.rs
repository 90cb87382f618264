//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use kanformer_core::gradcheck::{run_suite, SUITE_TARGETS};
use kanformer_core::metrics::RmseTracker;

use crate::bench::{bench_ablation, bench_feynman, emit_both, Axis};
use crate::error::{Error, Result};
use crate::settings::{ResolvedConfig, Task, KEYS};
use crate::{checkpoint, dataset, train};

fn key_args(cmd: Command, sections: &[&str]) -> Command {
    let mut cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("TOML file with [model], [moe], [train] and [data] sections"),
    );
    for k in KEYS.iter().filter(|k| sections.iter().any(|s| k.key.starts_with(s))) {
        cmd = cmd.arg(
            Arg::new(k.key)
                .long(k.key)
                .value_name("VALUE")
                .help(format!("{} [default: {}]", k.help, k.default)),
        );
    }
    cmd
}

fn out_args(cmd: Command) -> Command {
    cmd.arg(
        Arg::new("out")
            .long("out")
            .value_name("DIR")
            .required(true)
            .help("output directory"),
    )
    .arg(
        Arg::new("force")
            .long("force")
            .action(ArgAction::SetTrue)
            .help("write into a non-empty output directory"),
    )
}

fn seeds_arg(cmd: Command) -> Command {
    cmd.arg(
        Arg::new("seeds")
            .long("seeds")
            .value_name("N")
            .value_parser(clap::value_parser!(u64))
            .help("run each cell with N consecutive seeds starting at train.seed and report mean±sd"),
    )
}

pub fn command() -> Command {
    let all = ["model.", "moe.", "train.", "data."];
    let train = key_args(
        Command::new("train")
            .about("Train one model and write metrics, the resolved config and the best checkpoint")
            .arg(Arg::new("task").long("task").value_name("TASK").help("shorthand for --train.task"))
            .arg(
                Arg::new("export-csv")
                    .long("export-csv")
                    .action(ArgAction::SetTrue)
                    .help("also write the generated Feynman samples as train.csv and test.csv"),
            ),
        &all,
    );
    let eval = key_args(
        Command::new("eval")
            .about("Evaluate a checkpoint on its task's test set")
            .arg(
                Arg::new("checkpoint")
                    .long("checkpoint")
                    .value_name("DIR")
                    .required(true)
                    .help("checkpoint directory (manifest + params.bin)"),
            ),
        &["data."],
    );
    let gradcheck = Command::new("gradcheck")
        .about("Finite-difference check of every differentiable component in f64")
        .arg(
            Arg::new("tol")
                .long("tol")
                .value_parser(clap::value_parser!(f64))
                .default_value("1e-4")
                .help("maximum relative error"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .value_parser(clap::value_parser!(u64))
                .default_value("0")
                .help("seed for parameters and inputs"),
        );
    let feynman = seeds_arg(out_args(key_args(
        Command::new("feynman").about("Lowest test RMSE per Feynman equation").arg(
            Arg::new("equations")
                .long("equations")
                .value_name("IDS")
                .help("comma-separated equation ids [default: all]"),
        ),
        &all,
    )));
    let bench = Command::new("bench")
        .about("Benchmark tables")
        .subcommand_required(true)
        .subcommand(feynman);
    let ablate = seeds_arg(out_args(key_args(
        Command::new("ablate")
            .about("Sweep the expert count or top-k on CIFAR")
            .arg(
                Arg::new("axis")
                    .long("axis")
                    .required(true)
                    .value_parser(["experts", "topk"])
                    .help("swept key: experts (moe.num_experts) or topk (moe.top_k)"),
            )
            .arg(
                Arg::new("values")
                    .long("values")
                    .required(true)
                    .value_name("LIST")
                    .help("comma-separated values"),
            )
            .arg(
                Arg::new("datasets")
                    .long("datasets")
                    .value_name("LIST")
                    .default_value("cifar10")
                    .help("comma-separated: cifar10, cifar100"),
            ),
        &all,
    )));
    Command::new("kanformer")
        .about("MLP-KAN mixture-of-experts transformer")
        .subcommand_required(true)
        .subcommand(out_args(train))
        .subcommand(eval)
        .subcommand(gradcheck)
        .subcommand(bench)
        .subcommand(ablate)
}

fn resolve(m: &ArgMatches, mut config: ResolvedConfig) -> Result<ResolvedConfig> {
    if let Some(path) = m.get_one::<String>("config") {
        config.apply_file(Path::new(path))?;
    }
    for k in KEYS {
        if let Ok(Some(v)) = m.try_get_one::<String>(k.key) {
            config.set_flag(k.key, v)?;
        }
    }
    Ok(config)
}

fn prepare_out(m: &ArgMatches) -> Result<PathBuf> {
    let out = PathBuf::from(m.get_one::<String>("out").unwrap());
    let non_empty = fs::read_dir(&out).map(|mut d| d.next().is_some()).unwrap_or(false);
    if out.exists() && !out.is_dir() {
        return Err(Error::config("--out", format!("{} is not a directory", out.display())));
    }
    if non_empty && !m.get_flag("force") {
        return Err(Error::config("--out", format!("{} is not empty; pass --force to write into it", out.display())));
    }
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

fn seeds(m: &ArgMatches, config: &ResolvedConfig) -> Result<Vec<u64>> {
    let base = config.get("train.seed")?.as_integer().unwrap() as u64;
    let n = m.get_one::<u64>("seeds").copied().unwrap_or(1);
    if n == 0 {
        return Err(Error::config("--seeds", "must be at least 1"));
    }
    Ok((0..n).map(|i| base + i).collect())
}

fn list(m: &ArgMatches, name: &str) -> Vec<String> {
    m.get_one::<String>(name)
        .map(|s| s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect())
        .unwrap_or_default()
}

fn cmd_train(m: &ArgMatches) -> Result<()> {
    let mut config = resolve(m, ResolvedConfig::default())?;
    if let Some(task) = m.get_one::<String>("task") {
        config.set_flag("train.task", task)?;
    }
    let run = config.build()?;
    let out = prepare_out(m)?;
    let data = dataset::load(&run)?;
    if m.get_flag("export-csv") {
        dataset::export_csv(&data.train, &data.variables, &out.join("train.csv"))?;
        dataset::export_csv(&data.test, &data.variables, &out.join("test.csv"))?;
    }
    let outcome = train::run_training(&run, &data, &out)?;
    println!(
        "best epoch {} of {}: {}",
        outcome.best_epoch,
        outcome.history.len(),
        serde_json::to_string(&outcome.best).unwrap()
    );
    Ok(())
}

fn cmd_eval(m: &ArgMatches) -> Result<()> {
    let dir = PathBuf::from(m.get_one::<String>("checkpoint").unwrap());
    let loaded = checkpoint::load(&dir)?;
    let mut config = loaded.run.resolved.clone();
    config = resolve(m, config)?;
    let run = config.build()?;
    let data = dataset::load(&run)?;
    let metrics = train::evaluate(&loaded.encoder, &loaded.store, &data.test, &mut RmseTracker::default())?;
    println!("{}", serde_json::to_string(&metrics).unwrap());
    Ok(())
}

fn cmd_gradcheck(m: &ArgMatches) -> Result<bool> {
    let tol = *m.get_one::<f64>("tol").unwrap();
    let seed = *m.get_one::<u64>("seed").unwrap();
    let entries = run_suite(seed, tol)?;
    let width = SUITE_TARGETS.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut ok = true;
    for e in &entries {
        let status = if e.report.pass { "ok" } else { "FAIL" };
        ok &= e.report.pass;
        let worst = e.report.worst.as_ref().map(|(n, i)| format!(" worst {n}[{i}]")).unwrap_or_default();
        let failure = e.report.failure.as_deref().map(|f| format!(" ({f})")).unwrap_or_default();
        println!("{:width$}  {:.3e}  {status}{worst}{failure}", e.target, e.report.max_rel_err);
    }
    if !ok {
        let failed: Vec<&str> = entries.iter().filter(|e| !e.report.pass).map(|e| e.target.as_str()).collect();
        eprintln!("gradcheck failed at tol {tol:e}: {}", failed.join(", "));
    }
    Ok(ok)
}

fn cmd_bench_feynman(m: &ArgMatches) -> Result<()> {
    let config = resolve(m, ResolvedConfig::bench_defaults())?;
    let mut equations = list(m, "equations");
    if m.get_one::<String>("equations").is_none() {
        equations = kanformer_core::data::feynman_registry().iter().map(|s| s.id.to_string()).collect();
    }
    let seeds = seeds(m, &config)?;
    let out = prepare_out(m)?;
    let table = bench_feynman(&equations, &config, &seeds, &out)?;
    let (md, _) = emit_both(&table, &out, "feynman")?;
    print!("{}", fs::read_to_string(&md).map_err(|e| Error::io(&md, e))?);
    Ok(())
}

fn cmd_ablate(m: &ArgMatches) -> Result<()> {
    let config = resolve(m, ResolvedConfig::bench_defaults())?;
    let axis: Axis = m.get_one::<String>("axis").unwrap().parse()?;
    let values = list(m, "values")
        .iter()
        .map(|v| v.parse::<usize>().map_err(|_| Error::config("--values", format!("{v:?} is not a non-negative integer"))))
        .collect::<Result<Vec<_>>>()?;
    let datasets = list(m, "datasets")
        .iter()
        .map(|d| match d.as_str() {
            "cifar10" | "cifar100" => d.parse::<Task>(),
            _ => Err(Error::config("--datasets", format!("unknown dataset {d:?}; expected cifar10 or cifar100"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let seeds = seeds(m, &config)?;
    crate::bench::ablation_cells(axis, &values, &datasets, &config)?;
    let out = prepare_out(m)?;
    let table = bench_ablation(axis, &values, &datasets, &config, &seeds, &out)?;
    let (md, _) = emit_both(&table, &out, &format!("ablate-{}", axis.name()))?;
    print!("{}", fs::read_to_string(&md).map_err(|e| Error::io(&md, e))?);
    Ok(())
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match m.subcommand() {
        Some(("train", s)) => cmd_train(s).map(|_| true),
        Some(("eval", s)) => cmd_eval(s).map(|_| true),
        Some(("gradcheck", s)) => cmd_gradcheck(s).map_err(Error::from),
        Some(("bench", s)) => match s.subcommand() {
            Some(("feynman", f)) => cmd_bench_feynman(f).map(|_| true),
            _ => unreachable!("subcommand required"),
        },
        Some(("ablate", s)) => cmd_ablate(s).map(|_| true),
        _ => unreachable!("subcommand required"),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
