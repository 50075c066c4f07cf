use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dp_tradeoff::analysis::{
    aggregate, emit_plot_data, find_inflection, recommend_for_acl, recommend_for_eps, Inflection, Metric, MetricCurve,
};
use dp_tradeoff::data::write_dataset_csv;
use dp_tradeoff::harness::{load_config, load_family, read_results, run_sweep, write_results, ExperimentConfig, Method, Profile};

const DEFAULT_ACL_BOUNDS: [f64; 6] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3];
const DEFAULT_EPS_BOUNDS: [f64; 6] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];

#[derive(Parser)]
#[command(name = "dp-tradeoff", version, about = "Accuracy/privacy trade-off sweeps for DP classifiers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config layered over the profile defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// desk (2k/2k) or paper (10k/10k)
    #[arg(long, global = true, default_value = "desk")]
    profile: String,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dataset family as CSV files
    GenData,
    /// Run the full method x epsilon x repetition grid
    Sweep,
    /// Print one curve with its inflection point and write plot data
    Analyze {
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, default_value = "acl")]
        metric: String,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Best method under ACL or epsilon bounds
    Recommend {
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        acl_bound: Vec<f64>,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        eps_bound: Vec<f64>,
        #[arg(long)]
        dataset: Option<String>,
    },
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let profile: Profile = self.profile.parse()?;
        let mut cfg = load_config(self.config.as_deref(), profile)?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn results(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_or("results").join("results.csv"))
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    match &cli.command {
        Command::GenData => gen_data(c),
        Command::Sweep => sweep(c),
        Command::Analyze {
            results,
            metric,
            method,
            dataset,
        } => analyze(c, &c.results(results), metric, method.as_deref(), dataset.as_deref()),
        Command::Recommend {
            results,
            acl_bound,
            eps_bound,
            dataset,
        } => recommend(&c.results(results), acl_bound, eps_bound, dataset.as_deref()),
    }
}

fn gen_data(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let out = c.out_or("data");
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for (name, ds) in load_family(&cfg)? {
        let path = out.join(format!("{name}.csv"));
        write_dataset_csv(&ds, &path)?;
        println!("{}\t{} rows\t{} classes", path.display(), ds.n_rows(), ds.n_classes());
    }
    Ok(())
}

fn sweep(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let out = c.out_or("results");
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("results.csv");
    log::info!(
        "{} methods x {} epsilons x {} reps on {} thread(s)",
        cfg.methods.len(),
        cfg.epsilon_grid.len(),
        cfg.n_repetitions,
        c.jobs
    );
    match run_sweep(&cfg, c.jobs) {
        Ok(records) => {
            write_results(&records, &path)?;
            println!("{} records written to {}", records.len(), path.display());
            Ok(())
        }
        Err(e) => {
            write_results(&e.partial, &path)?;
            eprintln!("{} partial records written to {}", e.partial.len(), path.display());
            Err(e.into())
        }
    }
}

fn load_curves(results: &Path, dataset: Option<&str>) -> Result<(String, Vec<MetricCurve>)> {
    let records = read_results(results).with_context(|| format!("reading {}", results.display()))?;
    let curves = aggregate(&records)?;
    let names: BTreeSet<&str> = curves.iter().map(|c| c.dataset.as_str()).collect();
    let name = match dataset {
        Some(d) if names.contains(d) => d.to_string(),
        Some(d) => bail!("dataset {d:?} not in results (have {names:?})"),
        None if names.len() == 1 => names.into_iter().next().unwrap().to_string(),
        None => bail!("results hold several datasets, pick one with --dataset: {names:?}"),
    };
    let curves = curves.into_iter().filter(|c| c.dataset == name).collect();
    Ok((name, curves))
}

fn analyze(c: &Common, results: &Path, metric: &str, method: Option<&str>, dataset: Option<&str>) -> Result<()> {
    let metric: Metric = metric.parse()?;
    let method: Option<Method> = method.map(str::parse).transpose()?;
    let (name, curves) = load_curves(results, dataset)?;
    for curve in curves
        .iter()
        .filter(|cv| cv.metric == metric && method.is_none_or(|m| cv.method == m))
    {
        println!("# {name} {} {}", curve.method, curve.metric);
        println!("epsilon\tmean\tstd\tn");
        for p in &curve.points {
            println!("{}\t{:.6}\t{:.6}\t{}", p.epsilon, p.mean, p.std, p.n);
        }
        match find_inflection(curve) {
            Ok(Inflection::At(e)) => println!("inflection\t{e:.4}"),
            Ok(Inflection::Flat) => println!("inflection\tnone (flat curve)"),
            Err(e) => println!("inflection\tunavailable: {e}"),
        }
        println!();
    }
    if let Some(out) = &c.out {
        let files = emit_plot_data(&curves, out)?;
        log::info!("{} plot files written to {}", files.len(), out.display());
    }
    Ok(())
}

fn recommend(results: &Path, acl: &[f64], eps: &[f64], dataset: Option<&str>) -> Result<()> {
    let (name, curves) = load_curves(results, dataset)?;
    let (acl, eps) = if acl.is_empty() && eps.is_empty() {
        (DEFAULT_ACL_BOUNDS.to_vec(), DEFAULT_EPS_BOUNDS.to_vec())
    } else {
        (acl.to_vec(), eps.to_vec())
    };
    if !acl.is_empty() {
        println!("# {name}: smallest epsilon reaching each ACL bound");
        println!("acl_bound\tmethod\tepsilon");
        for b in acl {
            match recommend_for_acl(&curves, b)? {
                Some(r) => println!("{b}\t{}\t{:.4}", r.method, r.value),
                None => println!("{b}\tinfeasible\t-"),
            }
        }
    }
    if !eps.is_empty() {
        println!("# {name}: smallest ACL at each epsilon bound");
        println!("eps_bound\tmethod\tacl");
        for b in eps {
            let r = recommend_for_eps(&curves, b)?;
            println!("{b}\t{}\t{:.4}", r.method, r.value);
        }
    }
    Ok(())
}
