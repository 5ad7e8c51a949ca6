use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mrdg::error::{Error, Result};
use mrdg::experiment::{
    cell_ratio, error_study, parse_levels, run_experiment, run_single, write_leaf_counts, ExperimentConfig,
};
use mrdg::models::ModelKind;
use mrdg::mra::ThresholdMode;

#[derive(Parser)]
#[command(
    name = "mrdg",
    version,
    about = "Adaptive multiresolution DG runs for conservation laws with a random parameter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run at the last level; writes grid, solution, moments and metadata.
    Run(Common),
    /// L1 errors and convergence orders against a uniform-threshold reference.
    Eoc(Common),
    /// Total cell counts of uniform and weighted thresholding at the last level.
    Ratio(Common),
}

#[derive(Args)]
struct Common {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// normal, uniform, beta25, beta220 or e.g. beta(2,5).
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    /// e.g. `3,4` or `2-5`.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    ref_levels: Option<u8>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    c_heuristic: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::defaults(ModelKind::Burgers),
        };
        if let Some(m) = &self.model {
            let model: ModelKind = m.parse()?;
            if model != cfg.model {
                let keep = cfg.clone();
                cfg = ExperimentConfig::defaults(model);
                cfg.levels = keep.levels;
                cfg.ref_level = keep.ref_level;
                cfg.out_dir = keep.out_dir;
            }
        }
        if let Some(d) = &self.dist {
            cfg.distribution = Some(d.parse()?);
        }
        if let Some(m) = &self.mode {
            cfg.mode = m.parse()?;
        }
        if let Some(l) = &self.levels {
            cfg.levels = parse_levels(l)?;
        }
        if let Some(v) = self.ref_levels {
            cfg.ref_level = v;
        }
        if let Some(v) = self.cfl {
            cfg.cfl = v;
        }
        if let Some(v) = self.c_heuristic {
            cfg.c_heuristic = v;
        }
        if let Some(v) = self.tfinal {
            cfg.t_final = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(path: PathBuf, body: impl FnOnce(&mut fs::File) -> std::io::Result<()>) -> Result<PathBuf> {
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    body(&mut f).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn execute(cli: Cli) -> Result<()> {
    let (Command::Run(common) | Command::Eoc(common) | Command::Ratio(common)) = &cli.command;
    let cfg = common.resolve()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))?;
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    match cli.command {
        Command::Run(_) => {
            let a = run_experiment(&cfg)?;
            println!(
                "{} L={} steps={} n_total={} leaves={} wall={:.2}s",
                cfg.model,
                a.run.grid.max_level,
                a.run.stats.steps,
                a.run.stats.n_total,
                a.run.field().len(),
                a.run.stats.wall_time.as_secs_f64()
            );
            for f in &a.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Eoc(_) => {
            let (report, _) = error_study(&cfg, None)?;
            print!("{report}");
            let path = write_file(cfg.out_dir.join("errors.csv"), |f| report.write_csv(f))?;
            write_file(cfg.out_dir.join("manifest.txt"), |f| {
                writeln!(f, "# artifacts\nerrors.csv\n# config")?;
                write!(f, "{}", cfg.resolved())
            })?;
            println!("wrote {}", path.display());
        }
        Command::Ratio(_) => {
            let level = *cfg.levels.last().expect("validated");
            let dist = cfg
                .distribution
                .ok_or_else(|| Error::Config("cell ratio needs a single distribution (--dist)".into()))?;
            let uni = run_single(&cfg, level, ThresholdMode::Uniform, None)?;
            let wei = run_single(&cfg, level, ThresholdMode::Weighted, Some(dist))?;
            let ratio = cell_ratio(&uni.stats, &wei.stats);
            println!("L={level} n_total uniform={} weighted={} ratio={ratio:.4}", uni.stats.n_total, wei.stats.n_total);
            write_file(cfg.out_dir.join("leaf_counts_uniform.csv"), |f| write_leaf_counts(&uni.state, f))?;
            write_file(cfg.out_dir.join("leaf_counts_weighted.csv"), |f| write_leaf_counts(&wei.state, f))?;
            write_file(cfg.out_dir.join("ratio.txt"), |f| {
                writeln!(f, "level = {level}")?;
                writeln!(f, "n_total_uniform = {}", uni.stats.n_total)?;
                writeln!(f, "n_total_weighted = {}", wei.stats.n_total)?;
                writeln!(f, "ratio = {ratio}")
            })?;
            write_file(cfg.out_dir.join("manifest.txt"), |f| {
                writeln!(f, "# artifacts\nleaf_counts_uniform.csv\nleaf_counts_weighted.csv\nratio.txt\n# config")?;
                write!(f, "{}", cfg.resolved())
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
