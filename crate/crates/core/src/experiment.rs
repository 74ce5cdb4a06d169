//! Config-driven experiment pipeline and its CSV artifacts.
//!
//! Every real is written with 17 significant digits (`{:.16e}`), which is
//! enough for `str::parse::<f64>` to recover the exact value. Files are
//! written from a single thread after the parallel work has been reduced, so
//! identical configurations produce byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::config::{ExperimentConfig, Purpose};
use crate::ensemble::{run_ensemble_with, EnsembleConfig, EnsembleStats, NoiseSpec, SolverKind};
use crate::error::{HeliosError, Result};
use crate::fbm::{FbmSampler, HurstIndex, TimeGrid};
use crate::forward::{DiffusionProblem, FdScheme, FieldHistory, MildSolver};
use crate::inverse::{decay_probe, reconstruct, DecayProbe, KernelMethod, KernelTable, Reconstruction};
use crate::spectral::{RadialGrid, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    Ensemble,
    Reconstruct,
    ProbeDecay,
    SweepH,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::Forward, Command::Ensemble, Command::Reconstruct, Command::ProbeDecay, Command::SweepH];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Ensemble => "ensemble",
            Command::Reconstruct => "reconstruct",
            Command::ProbeDecay => "probe-decay",
            Command::SweepH => "sweep-h",
        }
    }

    fn purpose(self) -> Purpose {
        match self {
            Command::Forward | Command::ProbeDecay => Purpose::SinglePath,
            _ => Purpose::Ensemble,
        }
    }
}

impl std::str::FromStr for Command {
    type Err = HeliosError;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| HeliosError::Config(format!("unknown command '{s}'")))
    }
}

/// A validated configuration with its grids and problem instantiated.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub rgrid: RadialGrid,
    pub tgrid: TimeGrid,
    pub problem: DiffusionProblem,
    /// Advisory messages from validation and from the runs so far.
    pub warnings: Vec<String>,
    samplers: BTreeMap<u64, FbmSampler>,
}

/// Everything produced by one reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructionRun {
    pub hurst: HurstIndex,
    pub seed: u64,
    pub stats: EnsembleStats,
    pub kernels: KernelTable,
    pub recon: Reconstruction,
    pub f_true: Vec<f64>,
    pub g_squared_true: Vec<f64>,
}

impl ReconstructionRun {
    pub fn f_error(&self) -> f64 {
        self.recon.errors.map_or(f64::NAN, |e| e.f)
    }

    pub fn g_squared_error(&self) -> f64 {
        self.recon.errors.map_or(f64::NAN, |e| e.g_squared)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub hurst: f64,
    pub seed: u64,
    pub f_error: f64,
    pub g_squared_error: f64,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, command: Command) -> Result<Self> {
        let warnings = config.validate(command.purpose())?;
        let rgrid = RadialGrid::new(config.r0, config.radial_points)?;
        let tgrid = TimeGrid::new(config.t_final, config.time_steps)?;
        let mut problem =
            DiffusionProblem::from_specs(&config.a, &config.f, &config.g, &config.h, config.r0, config.t_final)?;
        problem.assume_h_positive = config.assume_h_positive;
        problem.check(&tgrid)?;
        Ok(Self { config, rgrid, tgrid, problem, warnings, samplers: BTreeMap::new() })
    }

    /// fBm factorization for `hurst`, built once and reused.
    pub fn sampler(&mut self, hurst: HurstIndex) -> Result<&FbmSampler> {
        let key = hurst.value().to_bits();
        if !self.samplers.contains_key(&key) {
            let s = FbmSampler::new(self.tgrid, hurst)?;
            if s.jitter() > 0.0 {
                self.warnings.push(format!("fBm covariance for H = {} needed jitter {:e}", hurst.value(), s.jitter()));
            }
            self.samplers.insert(key, s);
        }
        Ok(&self.samplers[&key])
    }

    /// One path (index 0 of the configured seed) solved on the full space-time grid.
    pub fn forward(&mut self) -> Result<FieldHistory> {
        let hurst = self.config.hurst_index()?;
        let seed = self.config.seed;
        let path = self.sampler(hurst)?.sample_path(seed, 0);
        match self.config.solver {
            SolverKind::FiniteDifference => FdScheme::new(&self.problem, &self.rgrid, &self.tgrid)?.solve(&path),
            SolverKind::Mild => {
                let basis = SpectralBasis::new(self.rgrid, self.config.truncation)?;
                let traj = MildSolver::new(&self.problem, &basis, &self.tgrid)?.trajectory(&path)?;
                let mut values = Array2::zeros((self.tgrid.steps() + 1, self.rgrid.len()));
                for (k, coeffs) in traj.coeffs.rows().into_iter().enumerate() {
                    let c = crate::spectral::ModalCoefficients::new(coeffs.to_vec(), self.rgrid.radius())?;
                    let mut row = basis.synthesize(&c);
                    // the boundary value is zero analytically; pin it against roundoff
                    *row.last_mut().expect("grid has nodes") = 0.0;
                    values.row_mut(k).assign(&ndarray::ArrayView1::from(&row));
                }
                Ok(FieldHistory { rgrid: self.rgrid, tgrid: self.tgrid, values })
            }
        }
    }

    pub fn ensemble(&mut self, hurst: HurstIndex, seed: u64) -> Result<EnsembleStats> {
        let cfg = EnsembleConfig {
            paths: self.config.paths,
            truncation: self.config.truncation,
            solver: self.config.solver,
            hurst,
            noise: NoiseSpec::new(self.config.epsilon, seed)?,
            seed,
        };
        let (problem, rgrid) = (self.problem.clone(), self.rgrid);
        let sampler = self.sampler(hurst)?;
        run_ensemble_with(&problem, &rgrid, sampler, &cfg)
    }

    pub fn kernels(&mut self, hurst: HurstIndex) -> Result<KernelTable> {
        let table =
            KernelTable::build(&self.problem, &self.tgrid, hurst, self.config.truncation, &self.config.kernel_config())?;
        self.warnings.extend(table.warnings.iter().cloned());
        Ok(table)
    }

    pub fn reconstruct(&mut self) -> Result<ReconstructionRun> {
        let hurst = self.config.hurst_index()?;
        let kernels = self.kernels(hurst)?;
        self.reconstruct_with(hurst, self.config.seed, kernels)
    }

    fn reconstruct_with(&mut self, hurst: HurstIndex, seed: u64, kernels: KernelTable) -> Result<ReconstructionRun> {
        let stats = self.ensemble(hurst, seed)?;
        let basis = SpectralBasis::new(self.rgrid, self.config.truncation)?;
        let f_true = self.rgrid.sample(|r| self.config.f.eval(r));
        let g_squared_true = self.rgrid.sample(|r| self.config.g.eval(r).powi(2));
        let recon = reconstruct(&stats, &kernels, &basis)?.with_truth(&f_true, &g_squared_true, &self.rgrid)?;
        if !recon.skipped.is_empty() {
            self.warnings.push(format!("{} kernel entries fell below the division floor", recon.skipped.len()));
        }
        Ok(ReconstructionRun { hurst, seed, stats, kernels, recon, f_true, g_squared_true })
    }

    pub fn probe_decay(&mut self) -> Result<DecayProbe> {
        let probe = decay_probe(
            self.config.decay_n_min,
            self.config.decay_n_max,
            self.config.hurst_index()?,
            &self.problem,
            &self.tgrid,
            &self.config.kernel_config(),
        )?;
        self.warnings.extend(probe.warnings.iter().cloned());
        Ok(probe)
    }

    /// Reconstruction errors for every `H` in the list and every sweep seed.
    /// Kernels depend on `H` only and are shared across seeds.
    pub fn sweep_h(&mut self) -> Result<Vec<SweepRow>> {
        let mut rows = Vec::new();
        for &h in &self.config.hurst_list.clone() {
            let hurst = HurstIndex::new(h)?;
            let kernels = self.kernels(hurst)?;
            for s in 0..self.config.sweep_seeds as u64 {
                let seed = self.config.seed.wrapping_add(s);
                let run = self.reconstruct_with(hurst, seed, kernels.clone())?;
                rows.push(SweepRow { hurst: h, seed, f_error: run.f_error(), g_squared_error: run.g_squared_error() });
            }
            // one factorization at a time keeps memory flat over long lists
            self.samplers.clear();
        }
        Ok(rows)
    }
}

/// Files written by a command.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Runs `command` and writes its CSV files into `out_dir` (created if missing).
pub fn run(command: Command, config: ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let mut exp = Experiment::new(config, command)?;
    fs::create_dir_all(out_dir)?;
    let path = |name: &str| out_dir.join(name);
    let mut files = Vec::new();
    match command {
        Command::Forward => {
            let field = exp.forward()?;
            write_field(&path("field.csv"), &field)?;
            files.push(path("field.csv"));
        }
        Command::Ensemble => {
            let hurst = exp.config.hurst_index()?;
            let stats = exp.ensemble(hurst, exp.config.seed)?;
            write_stats(&path("stats.csv"), &stats)?;
            write_cov(&path("cov.csv"), &stats.cov)?;
            files.extend([path("stats.csv"), path("cov.csv")]);
        }
        Command::Reconstruct => {
            let run = exp.reconstruct()?;
            let r = exp.rgrid.nodes();
            write_profile(&path("f_recon.csv"), &r, &run.recon.f_values, &run.f_true)?;
            write_profile(&path("g2_recon.csv"), &r, &run.recon.g_squared_values, &run.g_squared_true)?;
            write_summary(&path("summary.csv"), &reconstruction_summary(&exp.config, &run))?;
            files.extend([path("f_recon.csv"), path("g2_recon.csv"), path("summary.csv")]);
        }
        Command::ProbeDecay => {
            let probe = exp.probe_decay()?;
            write_decay(&path("decay.csv"), &probe)?;
            let summary = vec![
                ("H".to_string(), Value::Real(exp.config.hurst)),
                ("n_min".to_string(), Value::Int(exp.config.decay_n_min as u64)),
                ("n_max".to_string(), Value::Int(exp.config.decay_n_max as u64)),
                ("source_slope".to_string(), Value::Real(probe.source_slope)),
                ("noise_slope".to_string(), Value::Real(probe.noise_slope)),
            ];
            write_summary(&path("summary.csv"), &summary)?;
            files.extend([path("decay.csv"), path("summary.csv")]);
        }
        Command::SweepH => {
            let rows = exp.sweep_h()?;
            write_sweep(&path("sweep.csv"), &rows)?;
            files.push(path("sweep.csv"));
        }
    }
    Ok(RunReport { files, warnings: exp.warnings })
}

/// A summary cell: counts stay integral, everything else uses the real format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(u64),
    Real(f64),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => f.write_str(&fmt_real(*v)),
        }
    }
}

pub fn reconstruction_summary(config: &ExperimentConfig, run: &ReconstructionRun) -> Vec<(String, Value)> {
    let method = |m: KernelMethod| Value::Int(u64::from(m == KernelMethod::MonteCarlo));
    let max_se = run.kernels.noise_std_error.iter().copied().fold(0.0, f64::max);
    vec![
        ("H".into(), Value::Real(run.hurst.value())),
        ("seed".into(), Value::Int(run.seed)),
        ("P".into(), Value::Int(run.stats.path_count as u64)),
        ("N1".into(), Value::Int(run.recon.truncation as u64)),
        ("epsilon".into(), Value::Real(config.epsilon)),
        ("mean_delta".into(), Value::Real(run.stats.mean_delta)),
        ("f_rel_error".into(), Value::Real(run.f_error())),
        ("g2_rel_error".into(), Value::Real(run.g_squared_error())),
        ("skipped_kernels".into(), Value::Int(run.recon.skipped.len() as u64)),
        ("noise_kernel_monte_carlo".into(), method(run.kernels.noise_method)),
        ("noise_kernel_max_std_error".into(), Value::Real(max_se)),
        ("kernel_warnings".into(), Value::Int(run.kernels.warnings.len() as u64)),
    ]
}

/// 17 significant digits; parsing the text recovers the exact value.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// `t,r,u` for every node of the space-time grid, time-major.
pub fn write_field(path: &Path, field: &FieldHistory) -> Result<()> {
    let t = field.tgrid.nodes();
    let r = field.rgrid.nodes();
    let mut s = String::with_capacity(t.len() * r.len() * 72);
    s.push_str("t,r,u\n");
    for (k, tk) in t.iter().enumerate() {
        for (i, ri) in r.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", fmt_real(*tk), fmt_real(*ri), fmt_real(field.values[(k, i)]));
        }
    }
    write_text(path, &s)
}

pub fn write_stats(path: &Path, stats: &EnsembleStats) -> Result<()> {
    let mut s = String::from("n,mean,var\n");
    for (i, (m, v)) in stats.mean.iter().zip(stats.variance()).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, fmt_real(*m), fmt_real(v));
    }
    write_text(path, &s)
}

pub fn write_cov(path: &Path, cov: &Array2<f64>) -> Result<()> {
    let mut s = String::from("m,n,value\n");
    for ((i, j), v) in cov.indexed_iter() {
        let _ = writeln!(s, "{},{},{}", i + 1, j + 1, fmt_real(*v));
    }
    write_text(path, &s)
}

/// `r,recon,truth`.
pub fn write_profile(path: &Path, r: &[f64], recon: &[f64], truth: &[f64]) -> Result<()> {
    let mut s = String::from("r,recon,truth\n");
    for ((ri, a), b) in r.iter().zip(recon).zip(truth) {
        let _ = writeln!(s, "{},{},{}", fmt_real(*ri), fmt_real(*a), fmt_real(*b));
    }
    write_text(path, &s)
}

pub fn write_summary(path: &Path, rows: &[(String, Value)]) -> Result<()> {
    let mut s = String::from("quantity,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    write_text(path, &s)
}

/// `n,lambda,I,E`.
pub fn write_decay(path: &Path, probe: &DecayProbe) -> Result<()> {
    let mut s = String::from("n,lambda,I,E\n");
    for row in &probe.rows {
        let _ = writeln!(s, "{},{},{},{}", row.n, fmt_real(row.lambda), fmt_real(row.source), fmt_real(row.noise));
    }
    write_text(path, &s)
}

/// `H,seed,f_error,g2_error`.
pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut s = String::from("H,seed,f_error,g2_error\n");
    for row in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_real(row.hurst),
            row.seed,
            fmt_real(row.f_error),
            fmt_real(row.g_squared_error)
        );
    }
    write_text(path, &s)
}

/// A parsed CSV file: header names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Reads a numeric CSV written by this module. Non-numeric cells (the
/// `quantity` column of a summary) are rejected; use [`read_summary`] there.
pub fn read_csv(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| HeliosError::Data(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| HeliosError::Data(format!("{}:{}: {e}", path.display(), i + 2)))?;
        if row.len() != header.len() {
            return Err(HeliosError::Data(format!("{}:{}: wrong column count", path.display(), i + 2)));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Reads a `quantity,value` file into a map.
pub fn read_summary(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| HeliosError::Data(format!("{}:{}: expected two columns", path.display(), i + 1)))?;
        let v = v.parse::<f64>().map_err(|e| HeliosError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}
