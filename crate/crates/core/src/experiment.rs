//! Experiment driver: configuration, single runs with their artifacts, error
//! studies against a uniform-threshold reference and compression statistics.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::field::LeafField;
use crate::grid::{write_leaf_csv, GridConfig};
use crate::models::{ConservationLaw, ModelKind, Problem, Quantity};
use crate::mra::{ThresholdMode, ThresholdPolicy};
use crate::solver::{RunStats, Solver, SolverOptions, SolverState};
use crate::stochastic::{compute_moments_of, Distribution, MomentField};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Density for weighted thresholding and moments. `None` means the model
    /// default: all four standard densities for Burgers, `B(2,5)` for Euler.
    pub distribution: Option<Distribution>,
    pub mode: ThresholdMode,
    /// Maximum levels of the runs; a single run uses the last one.
    pub levels: Vec<u8>,
    pub ref_level: u8,
    pub order: usize,
    pub n0_x: u32,
    pub n0_xi: u32,
    pub cfl: f64,
    pub c_heuristic: f64,
    pub beta: f64,
    pub t_final: f64,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub seed: u64,
    /// Resolution of the sampled `field.csv`.
    pub plot_nx: usize,
    pub plot_nxi: usize,
}

impl ExperimentConfig {
    pub fn defaults(model: ModelKind) -> Self {
        let (n0_xi, t_final, distribution) = match model {
            ModelKind::Burgers => (16, 0.35, None),
            ModelKind::Euler => (8, 0.2, Some(Distribution::beta(2.0, 5.0))),
        };
        ExperimentConfig {
            model,
            distribution,
            mode: ThresholdMode::Uniform,
            levels: vec![3, 4],
            ref_level: 7,
            order: 3,
            n0_x: 8,
            n0_xi,
            cfl: 0.1,
            c_heuristic: 0.1,
            beta: 1.0,
            t_final,
            out_dir: PathBuf::from("out"),
            threads: None,
            seed: 0,
            plot_nx: 128,
            plot_nxi: 128,
        }
    }

    /// Parses a flat `key = value` file; keys absent from the file keep the
    /// defaults of the model named there (Burgers when absent).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let model = match &file.model {
            Some(m) => m.parse()?,
            None => ModelKind::Burgers,
        };
        let mut cfg = Self::defaults(model);
        file.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.levels.is_empty() {
            return bad("at least one level is required".into());
        }
        if self.levels.windows(2).any(|w| w[1] != w[0] + 1) {
            return bad(format!("levels must be consecutive and increasing, got {:?}", self.levels));
        }
        if self.levels.iter().any(|&l| l > 12) || self.ref_level > 12 {
            return bad("levels above 12 are not supported".into());
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("CFL number must lie in (0,1], got {}", self.cfl));
        }
        if !(self.c_heuristic > 0.0) || !(self.beta > 0.0) {
            return bad("threshold constant and exponent must be positive".into());
        }
        if !(self.t_final >= 0.0) {
            return bad(format!("final time must be non-negative, got {}", self.t_final));
        }
        if self.n0_x == 0 || self.n0_xi == 0 {
            return bad("coarse grid must have at least one cell per direction".into());
        }
        if self.order == 0 || self.order > crate::basis::MAX_ORDER {
            return bad(format!("polynomial order {} out of range", self.order));
        }
        if self.plot_nx == 0 || self.plot_nxi == 0 {
            return bad("plot raster must be non-empty".into());
        }
        if let Some(d) = &self.distribution {
            d.validate()?;
        }
        Ok(())
    }

    pub fn grid(&self, level: u8) -> Result<GridConfig> {
        let p = self.problem();
        GridConfig::new(p.x_interval, p.xi_interval, self.n0_x, self.n0_xi, level)
    }

    pub fn problem(&self) -> Problem {
        self.model.problem()
    }

    /// Densities whose moments are reported.
    pub fn moment_distributions(&self) -> Vec<Distribution> {
        match self.distribution {
            Some(d) => vec![d],
            None => Distribution::standard_set().to_vec(),
        }
    }

    pub fn policy(
        &self,
        grid: &GridConfig,
        mode: ThresholdMode,
        dist: Option<Distribution>,
    ) -> Result<ThresholdPolicy> {
        let dist = match mode {
            ThresholdMode::Uniform => None,
            ThresholdMode::Weighted => {
                Some(dist.ok_or_else(|| Error::Config("weighted thresholding needs a distribution".into()))?)
            }
        };
        ThresholdPolicy::heuristic(grid, mode, self.c_heuristic, self.beta, dist)
    }

    pub fn solver(&self, level: u8, mode: ThresholdMode, dist: Option<Distribution>) -> Result<Solver> {
        let grid = self.grid(level)?;
        let policy = self.policy(&grid, mode, dist)?;
        let options = SolverOptions { cfl: self.cfl, ..SolverOptions::default() };
        Solver::new(grid, self.order, self.problem(), policy, options)
    }

    /// Resolved configuration as `key = value` lines.
    pub fn resolved(&self) -> String {
        let dist = self.distribution.map_or("default".to_string(), |d| d.to_string());
        let levels: Vec<String> = self.levels.iter().map(|l| l.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("model", self.model.to_string());
        kv("dist", dist);
        kv("mode", self.mode.to_string());
        kv("levels", levels.join(","));
        kv("ref_level", self.ref_level.to_string());
        kv("order", self.order.to_string());
        kv("n0_x", self.n0_x.to_string());
        kv("n0_xi", self.n0_xi.to_string());
        kv("cfl", self.cfl.to_string());
        kv("c_heuristic", self.c_heuristic.to_string());
        kv("beta", self.beta.to_string());
        kv("tfinal", self.t_final.to_string());
        kv("out", self.out_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("plot_nx", self.plot_nx.to_string());
        kv("plot_nxi", self.plot_nxi.to_string());
        s
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: Option<String>,
    dist: Option<String>,
    mode: Option<String>,
    levels: Option<LevelList>,
    ref_level: Option<u8>,
    order: Option<usize>,
    n0_x: Option<u32>,
    n0_xi: Option<u32>,
    cfl: Option<f64>,
    c_heuristic: Option<f64>,
    beta: Option<f64>,
    tfinal: Option<f64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    seed: Option<u64>,
    plot_nx: Option<usize>,
    plot_nxi: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LevelList {
    One(u8),
    Many(Vec<u8>),
    Text(String),
}

impl ConfigFile {
    fn apply(self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(d) = self.dist {
            cfg.distribution = Some(d.parse()?);
        }
        if let Some(m) = self.mode {
            cfg.mode = m.parse()?;
        }
        if let Some(l) = self.levels {
            cfg.levels = match l {
                LevelList::One(l) => vec![l],
                LevelList::Many(v) => v,
                LevelList::Text(s) => parse_levels(&s)?,
            };
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(ref_level => ref_level, order => order, n0_x => n0_x, n0_xi => n0_xi, cfl => cfl,
            c_heuristic => c_heuristic, beta => beta, tfinal => t_final, out => out_dir, seed => seed,
            plot_nx => plot_nx, plot_nxi => plot_nxi);
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        Ok(())
    }
}

/// `"3,4"`, `"3-5"` or `"4"`.
pub fn parse_levels(s: &str) -> Result<Vec<u8>> {
    let err = || Error::Config(format!("cannot parse levels '{s}'"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('-') {
        let a: u8 = a.trim().parse().map_err(|_| err())?;
        let b: u8 = b.trim().parse().map_err(|_| err())?;
        if b < a {
            return Err(err());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| err())).collect()
}

/// A finished solver run together with the grid it ran on.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub grid: GridConfig,
    pub law: ConservationLaw,
    pub mode: ThresholdMode,
    pub distribution: Option<Distribution>,
    pub state: SolverState,
    pub stats: RunStats,
}

impl RunOutput {
    pub fn field(&self) -> &LeafField {
        &self.state.field
    }
}

pub fn run_single(
    cfg: &ExperimentConfig,
    level: u8,
    mode: ThresholdMode,
    dist: Option<Distribution>,
) -> Result<RunOutput> {
    let solver = cfg.solver(level, mode, dist)?;
    let (state, stats) = solver.run(cfg.t_final)?;
    Ok(RunOutput { grid: solver.config().clone(), law: solver.problem().law, mode, distribution: dist, state, stats })
}

/// Every quantity whose moments are reported for the model.
pub fn quantities(cfg: &ExperimentConfig) -> Vec<Quantity> {
    cfg.problem().law.quantities()
}

pub fn moments(run: &RunOutput, dist: &Distribution, q: Quantity, x: &[f64]) -> Result<MomentField> {
    let law = run.law;
    compute_moments_of(&run.grid, run.field(), dist, x, &move |u: &[f64]| q.eval(&law, u))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub run: RunOutput,
}

/// Runs at the last configured level and writes grid, solution, sampled
/// field, moments, leaf counts, metadata and a manifest to the output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let level = *cfg.levels.last().expect("validated");
    let dist = match cfg.mode {
        ThresholdMode::Weighted => cfg.distribution,
        ThresholdMode::Uniform => None,
    };
    let run = run_single(cfg, level, cfg.mode, dist)?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let files = write_artifacts(cfg, &run, &dir)?;
    Ok(Artifacts { dir, files, run })
}

pub fn write_artifacts(cfg: &ExperimentConfig, run: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let law = cfg.problem().law;

    let path = dir.join("grid.csv");
    let mut w = create(&path)?;
    write_leaf_csv(&run.grid, run.field().leaves(), &mut w).map_err(io_at(&path))?;
    w.flush().map_err(io_at(&path))?;
    files.push(path);

    let path = dir.join("solution.csv");
    let mut w = create(&path)?;
    write_solution_csv(run.field(), &mut w).map_err(io_at(&path))?;
    w.flush().map_err(io_at(&path))?;
    files.push(path);

    let path = dir.join("field.csv");
    let mut w = create(&path)?;
    write_field_csv(&run.grid, run.field(), cfg.plot_nx, cfg.plot_nxi, &mut w).map_err(io_at(&path))?;
    w.flush().map_err(io_at(&path))?;
    files.push(path);

    let x = run.grid.finest_x_centers();
    for d in cfg.moment_distributions() {
        for q in law.quantities() {
            let m = moments(run, &d, q, &x)?;
            let path = dir.join(format!("moments_{}_{}.csv", d.label(), q.name(&law)));
            let mut w = create(&path)?;
            m.write_csv(&mut w).map_err(io_at(&path))?;
            w.flush().map_err(io_at(&path))?;
            files.push(path);
        }
    }

    let path = dir.join("leaf_counts.csv");
    let mut w = create(&path)?;
    write_leaf_counts(&run.state, &mut w).map_err(io_at(&path))?;
    w.flush().map_err(io_at(&path))?;
    files.push(path);

    let path = dir.join("metadata.txt");
    let mut w = create(&path)?;
    let policy = cfg.policy(&run.grid, run.mode, run.distribution)?;
    let meta = [
        ("model", cfg.model.to_string()),
        ("mode", run.mode.to_string()),
        ("distribution", run.distribution.map_or("none".into(), |d| d.to_string())),
        ("level", run.grid.max_level.to_string()),
        ("eps_max", policy.eps_max.to_string()),
        ("t_final", run.state.t.to_string()),
        ("steps", run.stats.steps.to_string()),
        ("n_total", run.stats.n_total.to_string()),
        ("final_leaves", run.field().len().to_string()),
        ("wall_time_s", format!("{:.3}", run.stats.wall_time.as_secs_f64())),
    ];
    for (k, v) in meta {
        writeln!(w, "{k} = {v}").map_err(io_at(&path))?;
    }
    w.flush().map_err(io_at(&path))?;
    files.push(path);

    let path = dir.join("manifest.txt");
    let mut w = create(&path)?;
    writeln!(w, "# artifacts").map_err(io_at(&path))?;
    for f in &files {
        writeln!(w, "{}", f.file_name().expect("file").to_string_lossy()).map_err(io_at(&path))?;
    }
    writeln!(w, "# config").map_err(io_at(&path))?;
    write!(w, "{}", cfg.resolved()).map_err(io_at(&path))?;
    w.flush().map_err(io_at(&path))?;
    files.push(path);
    Ok(files)
}

/// `level,ix,ixi,component,i1,i2,coefficient`.
pub fn write_solution_csv<W: Write>(field: &LeafField, mut w: W) -> std::io::Result<()> {
    writeln!(w, "level,ix,ixi,component,i1,i2,coefficient")?;
    let p = field.order();
    for (i, c) in field.leaves().iter().enumerate() {
        let b = field.block(i);
        for k in 0..field.ncomp() {
            for i1 in 0..p {
                for i2 in 0..p {
                    writeln!(w, "{},{},{},{k},{i1},{i2},{}", c.level, c.ix, c.ixi, b[k * p * p + i1 * p + i2])?;
                }
            }
        }
    }
    Ok(())
}

/// `x,xi,component,value` at the centres of an `nx × nxi` raster.
pub fn write_field_csv<W: Write>(
    grid: &GridConfig,
    field: &LeafField,
    nx: usize,
    nxi: usize,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "x,xi,component,value")?;
    let vals = field.sample_raster(grid, nx, nxi);
    let (a, b) = grid.x_interval;
    let (c, d) = grid.xi_interval;
    let ncomp = field.ncomp();
    for i in 0..nx {
        let x = a + (i as f64 + 0.5) * (b - a) / nx as f64;
        for j in 0..nxi {
            let xi = c + (j as f64 + 0.5) * (d - c) / nxi as f64;
            for k in 0..ncomp {
                writeln!(w, "{x},{xi},{k},{}", vals[(i * nxi + j) * ncomp + k])?;
            }
        }
    }
    Ok(())
}

/// `step,t,leaves`.
pub fn write_leaf_counts<W: Write>(state: &SolverState, mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,t,leaves")?;
    for (s, t, n) in &state.leaf_counts {
        writeln!(w, "{s},{t},{n}")?;
    }
    Ok(())
}

fn check_same_domain(a: &GridConfig, b: &GridConfig) -> Result<()> {
    if a.x_interval != b.x_interval || a.xi_interval != b.xi_interval {
        return Err(Error::DomainMismatch(format!(
            "{:?} x {:?} against {:?} x {:?}",
            a.x_interval, a.xi_interval, b.x_interval, b.xi_interval
        )));
    }
    Ok(())
}

/// `∫_Ω |u_k − u_ref,k|` by midpoint sampling on the reference's finest raster.
pub fn solution_l1_error(run: &RunOutput, reference: &RunOutput, comp: usize) -> Result<f64> {
    check_same_domain(&run.grid, &reference.grid)?;
    let r = &reference.grid;
    let nx = r.nx(r.max_level) as usize;
    let nxi = r.nxi(r.max_level) as usize;
    let cell = r.domain_area() / (nx * nxi) as f64;
    let ncomp = run.field().ncomp();
    let (a, b) = r.x_interval;
    let (c, d) = r.xi_interval;
    let sum: f64 = (0..nx)
        .into_par_iter()
        .map(|i| {
            let x = a + (i as f64 + 0.5) * (b - a) / nx as f64;
            let mut u = vec![0.0; ncomp];
            let mut v = vec![0.0; ncomp];
            let mut s = 0.0;
            for j in 0..nxi {
                let xi = c + (j as f64 + 0.5) * (d - c) / nxi as f64;
                run.field().evaluate_into(&run.grid, x, xi, &mut u);
                reference.field().evaluate_into(r, x, xi, &mut v);
                s += (u[comp] - v[comp]).abs();
            }
            s
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(sum * cell)
}

/// L¹(Ω₁) errors of expectation and variance of `q`, both sampled at the
/// centres of the reference's finest `x`-columns.
pub fn moment_l1_errors(
    run: &RunOutput,
    reference: &RunOutput,
    dist: &Distribution,
    q: Quantity,
) -> Result<(f64, f64)> {
    check_same_domain(&run.grid, &reference.grid)?;
    let x = reference.grid.finest_x_centers();
    let h = reference.grid.h_x(reference.grid.max_level);
    let m = moments(run, dist, q, &x)?;
    let r = moments(reference, dist, q, &x)?;
    Ok(moment_field_l1(&m, &r, h))
}

/// `(Σ|E−E_ref|·h, Σ|Var−Var_ref|·h)` for moments sampled at the same points.
pub fn moment_field_l1(m: &MomentField, r: &MomentField, h: f64) -> (f64, f64) {
    let e = m.mean.iter().zip(&r.mean).map(|(a, b)| (a - b).abs()).sum::<f64>() * h;
    let v = m.variance.iter().zip(&r.variance).map(|(a, b)| (a - b).abs()).sum::<f64>() * h;
    (e, v)
}

/// `log₂(e_{L−1}/e_L)` between consecutive entries; `None` where undefined.
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for w in errors.windows(2) {
        out.push((w[0] > 0.0 && w[1] > 0.0).then(|| (w[0] / w[1]).log2()));
    }
    out.truncate(errors.len());
    out
}

/// `N_total` of the uniform run over `N_total` of the weighted run.
pub fn cell_ratio(uniform: &RunStats, weighted: &RunStats) -> f64 {
    uniform.n_total as f64 / weighted.n_total as f64
}

/// Errors of one run (row) in every reported column.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub mode: ThresholdMode,
    pub distribution: String,
    pub level: u8,
    pub n_total: u64,
    pub errors: Vec<f64>,
    pub eoc: Vec<Option<f64>>,
}

/// Error table with rows `mode × distribution × L` and columns
/// `sol`/`exp`/`var` per quantity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub columns: Vec<String>,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// Error of `column` in the row for `(mode, dist, level)`.
    pub fn get(&self, mode: ThresholdMode, dist: &str, level: u8, column: &str) -> Option<(f64, Option<f64>)> {
        let j = self.columns.iter().position(|c| c == column)?;
        self.rows
            .iter()
            .find(|r| r.mode == mode && r.distribution == dist && r.level == level)
            .map(|r| (r.errors[j], r.eoc[j]))
    }

    /// Fills the EOC columns from consecutive levels of equal mode and density.
    pub fn compute_eoc(&mut self) {
        let n = self.rows.len();
        for i in 0..n {
            let prev = (0..n).find(|&k| {
                self.rows[k].mode == self.rows[i].mode
                    && self.rows[k].distribution == self.rows[i].distribution
                    && self.rows[k].level + 1 == self.rows[i].level
            });
            let eocs = match prev {
                Some(k) => {
                    self.rows[i].errors.iter().zip(&self.rows[k].errors).map(|(&e, &ep)| eoc(&[ep, e])[1]).collect()
                }
                None => vec![None; self.columns.len()],
            };
            self.rows[i].eoc = eocs;
        }
    }

    /// CSV with header `mode,distribution,L,n_total,<col>,<col>_eoc,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "mode,distribution,L,n_total")?;
        for c in &self.columns {
            write!(w, ",{c},{c}_eoc")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(w, "{},{},{},{}", r.mode, r.distribution, r.level, r.n_total)?;
            for (e, o) in r.errors.iter().zip(&r.eoc) {
                write!(w, ",{e},{}", o.map_or("-".to_string(), |v| v.to_string()))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<9}{:<12}{:>3}", "mode", "dist", "L")?;
        for c in &self.columns {
            write!(f, " {c:>12} {:>6}", "EOC")?;
        }
        writeln!(f)?;
        for r in &self.rows {
            write!(f, "{:<9}{:<12}{:>3}", r.mode.to_string(), r.distribution, r.level)?;
            for (e, o) in r.errors.iter().zip(&r.eoc) {
                let o = o.map_or("-".to_string(), |v| format!("{v:.4}"));
                write!(f, " {e:>12.4e} {o:>6}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Column names: `sol_<component>` then `exp_<q>`, `var_<q>` per quantity.
pub fn report_columns(cfg: &ExperimentConfig) -> Vec<String> {
    let law = cfg.problem().law;
    let mut cols: Vec<String> =
        (0..law.ncomp()).map(|k| format!("sol_{}", Quantity::Component(k).name(&law))).collect();
    for q in law.quantities() {
        cols.push(format!("exp_{}", q.name(&law)));
        cols.push(format!("var_{}", q.name(&law)));
    }
    cols
}

/// One row: solution errors per component and moment errors per quantity.
pub fn error_row(
    cfg: &ExperimentConfig,
    run: &RunOutput,
    reference: &RunOutput,
    dist: &Distribution,
) -> Result<ErrorRow> {
    let law = cfg.problem().law;
    let mut errors = Vec::new();
    for k in 0..law.ncomp() {
        errors.push(solution_l1_error(run, reference, k)?);
    }
    for q in law.quantities() {
        let (e, v) = moment_l1_errors(run, reference, dist, q)?;
        errors.push(e);
        errors.push(v);
    }
    let n = errors.len();
    Ok(ErrorRow {
        mode: run.mode,
        distribution: dist.label(),
        level: run.grid.max_level,
        n_total: run.stats.n_total,
        errors,
        eoc: vec![None; n],
    })
}

/// Reference run (uniform thresholding at `ref_level`) and the configured
/// runs at every level; uniform runs report all moment densities.
pub fn error_study(cfg: &ExperimentConfig, reference: Option<&RunOutput>) -> Result<(ErrorReport, Option<RunOutput>)> {
    cfg.validate()?;
    if cfg.levels.iter().any(|&l| l >= cfg.ref_level) {
        return Err(Error::Config(format!(
            "reference level {} must exceed every run level {:?}",
            cfg.ref_level, cfg.levels
        )));
    }
    let owned = match reference {
        Some(_) => None,
        None => Some(run_single(cfg, cfg.ref_level, ThresholdMode::Uniform, None)?),
    };
    let reference = reference.or(owned.as_ref()).expect("reference present");
    let mut report = ErrorReport { columns: report_columns(cfg), rows: Vec::new() };
    for &level in &cfg.levels {
        match cfg.mode {
            ThresholdMode::Uniform => {
                let run = run_single(cfg, level, ThresholdMode::Uniform, None)?;
                for d in cfg.moment_distributions() {
                    report.rows.push(error_row(cfg, &run, reference, &d)?);
                }
            }
            ThresholdMode::Weighted => {
                for d in cfg.moment_distributions() {
                    let run = run_single(cfg, level, ThresholdMode::Weighted, Some(d))?;
                    report.rows.push(error_row(cfg, &run, reference, &d)?);
                }
            }
        }
    }
    report.compute_eoc();
    Ok((report, owned))
}
