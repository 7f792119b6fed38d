//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};
use sgap_core::completion::{
    snr, solve_als, solve_nuclear_norm, AlsOptions, LowRankModel, ObservedData, SolveOptions, SolveReport,
};
use sgap_core::dense::DenseMatrix;
use sgap_core::designs::{bin_offgrid, coil_point_cloud, staggered_layout, uniform_random_selection};
use sgap_core::experiments::{
    sg_snr_spearman, DensitySweepConfig, JitterSweepConfig, RelocationConfig, Sweep, SweepRecord,
};
use sgap_core::mask::src_rec_mask_from_layouts;
use sgap_core::scalar::Scalar;
use sgap_core::spectral::{connected_components, top_two_singular_values};
use sgap_core::{GridAxis, GridSpec, MatricizationMap, RngSeed, SamplingMask, SpectralOptions};

use crate::config::{load_kv, sweep_from_kv, KeyValues, PointSource, SweepKind, SweepSpec};
use crate::error::{Error, Result};
use crate::formats::{read_mask, read_matrix, read_points, write_mask, write_matrix, write_text, Matrix};
use crate::report::{conventions, json_text, records_csv, records_json, sweep_meta};
use crate::runner::run_parallel;

#[derive(Debug, Parser)]
#[command(name = "sgap", version, about = "Spectral-gap evaluation of seismic sampling masks")]
pub struct Cli {
    /// Base seed of every random draw [default: 1, or the sweep config's].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Drop all-zero rows and columns before the spectral computation.
    #[arg(long, global = true)]
    pub trim_empty: bool,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// First two singular values and SG ratio of a mask file.
    Sg { mask: PathBuf },
    /// Write a sampling mask from a design.
    Generate(GenerateArgs),
    /// Complete a matrix from the entries under a mask.
    Solve(SolveArgs),
    /// Run a relocation, jitter or density sweep.
    Sweep {
        kind: SweepKind,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// Staggered periodic receivers, the same layout for every shot.
    Periodic,
    Jitter,
    Relocation,
    Uniform,
    Identity,
    Full,
    /// Point cloud binned onto a grid.
    Binned,
}

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    pub design: Design,
    /// Sources per axis.
    #[arg(long, default_value_t = 4)]
    pub n_src: usize,
    /// Receivers per axis.
    #[arg(long, default_value_t = 64)]
    pub n_rec: usize,
    #[arg(long, default_value_t = 6)]
    pub keep_every: usize,
    #[arg(long, default_value_t = 0)]
    pub offset: usize,
    /// Relocated fraction.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Missing fraction of a jittered layout.
    #[arg(long, default_value_t = 0.9)]
    pub missing: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Matrix rows for uniform, identity and full.
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    /// Matrix columns; defaults to `--rows`.
    #[arg(long)]
    pub cols: Option<usize>,
    /// Observed fraction of a uniform mask.
    #[arg(long, default_value_t = 0.4)]
    pub density: f64,
    /// Point file for `binned`; a synthetic coil cloud when absent.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Grid spacing `XxY` or `S` for `binned`.
    #[arg(long, default_value = "100")]
    pub spacing: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Svt,
    Als,
}

#[derive(Debug, clap::Args)]
pub struct SolveArgs {
    /// Observation mask.
    #[arg(long)]
    pub mask: PathBuf,
    /// Full data matrix to subsample; also the reference for the SNR unless
    /// `--truth` is given.
    #[arg(long, conflicts_with = "synthetic_rank")]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub truth: Option<PathBuf>,
    /// Rank of a synthetic incoherent model drawn from `--seed`.
    #[arg(long)]
    pub synthetic_rank: Option<usize>,
    #[arg(long, value_enum, default_value_t = SolverChoice::Svt)]
    pub solver: SolverChoice,
    /// Target rank of the ALS solver; defaults to the synthetic rank.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Residual budget on the observed entries.
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
}

impl Cli {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }
}

/// Run the parsed command, writing human or JSON output to `stdout`.
pub fn run(cli: &Cli, argv: &[String], stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Sg { mask } => cmd_sg(cli, mask, stdout),
        Command::Generate(args) => cmd_generate(cli, args, argv, stdout),
        Command::Solve(args) => cmd_solve(cli, args, argv, stdout),
        Command::Sweep { kind, config } => cmd_sweep(cli, *kind, config.as_deref(), argv, stdout),
    }
}

fn emit(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn sidecar_path(out: &Path) -> PathBuf {
    with_suffix(out, ".meta.json")
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_sg(cli: &Cli, path: &Path, stdout: &mut dyn Write) -> Result<()> {
    let mask = read_mask(path)?;
    let opts = SpectralOptions {
        trim_empty: cli.trim_empty,
        ..SpectralOptions::default()
    };
    let s = top_two_singular_values(&mask, &opts)?;
    let c = connected_components(&mask);
    let (n, m) = mask.shape();
    let regular = mask.is_regular();
    if cli.json {
        let v = json!({
            "sigma1": s.sigma1,
            "sigma2": s.sigma2,
            "sg_ratio": s.sg_ratio,
            "components": c.components,
            "isolated_rows": c.isolated_rows,
            "isolated_cols": c.isolated_cols,
            "regular": regular,
            "rows": n,
            "cols": m,
            "entries": mask.len(),
            "trim_empty": cli.trim_empty,
        });
        return emit(stdout, &json_text(&v));
    }
    emit(
        stdout,
        &format!(
            "sigma1={:.6} sigma2={:.6} sg_ratio={:.6}\ncomponents={} isolated_rows={} isolated_cols={} regular={} shape={n}x{m}\n",
            s.sigma1, s.sigma2, s.sg_ratio, c.components, c.isolated_rows, c.isolated_cols, regular
        ),
    )
}

fn parse_spacing(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("invalid spacing `{s}`, expected `XxY` or a number"));
    match s.split_once('x') {
        Some((a, b)) => Ok((
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        )),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            Ok((v, v))
        }
    }
}

fn generate_mask(cli: &Cli, a: &GenerateArgs) -> Result<SamplingMask> {
    let seed = RngSeed::new(cli.seed(), 0);
    let rows = a.rows;
    let cols = a.cols.unwrap_or(rows);
    Ok(match a.design {
        Design::Periodic => {
            let map = MatricizationMap::square(a.n_src, a.n_rec)?;
            let layout = staggered_layout(a.n_rec, a.n_rec, a.keep_every, a.offset)?;
            src_rec_mask_from_layouts(&map, &vec![layout; map.n_shots()])?
        }
        Design::Relocation => {
            let cfg = RelocationConfig {
                n_src: a.n_src,
                n_rec: a.n_rec,
                keep_every: a.keep_every,
                ..RelocationConfig::default()
            };
            if !(0.0..=1.0).contains(&a.p) {
                return Err(Error::Config(format!("p = {} outside [0, 1]", a.p)));
            }
            cfg.mask(a.p, &seed)?
        }
        Design::Jitter => {
            let cfg = JitterSweepConfig {
                n_src: a.n_src,
                n_rec: a.n_rec,
                ..JitterSweepConfig::default()
            };
            cfg.mask(a.missing, a.rho, &seed)?
        }
        Design::Uniform => {
            if !(0.0..=1.0).contains(&a.density) {
                return Err(Error::Config(format!("density {} outside [0, 1]", a.density)));
            }
            let total = rows * cols;
            let count = (a.density * total as f64).round() as usize;
            let coords: Vec<(usize, usize)> = uniform_random_selection(total, count, &seed)?
                .into_iter()
                .map(|k| (k / cols, k % cols))
                .collect();
            SamplingMask::from_coords(rows, cols, &coords)?.0
        }
        Design::Identity => SamplingMask::identity(rows)?,
        Design::Full => SamplingMask::full(rows, cols)?,
        Design::Binned => {
            let points = match &a.points {
                Some(p) => read_points(p)?,
                None => coil_point_cloud(&Default::default(), &seed)?,
            };
            let (sx, sy) = parse_spacing(&a.spacing)?;
            let grid = DensitySweepConfig::new(points.clone(), vec![(sx, sy)]).grid(sx, sy)?;
            bin_offgrid(&points, &grid)?.to_mask(&grid)?
        }
    })
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs, argv: &[String], stdout: &mut dyn Write) -> Result<()> {
    let mask = generate_mask(cli, args)?;
    let (n, m) = mask.shape();
    let frac = mask.sampling_percentage();
    let gaps = mask.gap_stats()?;
    if let Some(out) = &cli.out {
        write_mask(out, &mask)?;
        let meta = json!({
            "command": "generate",
            "design": format!("{:?}", args.design).to_lowercase(),
            "seed": cli.seed(),
            "argv": argv,
            "conventions": conventions(cli.trim_empty),
        });
        write_text(&sidecar_path(out), &json_text(&meta))?;
    }
    if cli.json {
        let v = json!({
            "rows": n,
            "cols": m,
            "entries": mask.len(),
            "sampling_pct": frac,
            "missing_pct": 1.0 - frac,
            "max_gap": gaps.max_gap,
            "mean_gap": gaps.mean_gap,
        });
        return emit(stdout, &json_text(&v));
    }
    let mut text = format!(
        "shape={n}x{m} entries={} sampling_pct={:.6} missing_pct={:.6} max_gap={} mean_gap={:.6}\n",
        mask.len(),
        100.0 * frac,
        100.0 * (1.0 - frac),
        gaps.max_gap,
        gaps.mean_gap
    );
    if cli.out.is_none() {
        text.push_str(&crate::formats::format_mask(&mask));
    }
    emit(stdout, &text)
}

fn svt_options(a: &SolveArgs, seed: u64) -> SolveOptions {
    let d = SolveOptions::default();
    SolveOptions {
        delta: a.delta.unwrap_or(d.delta),
        tol: a.tol.unwrap_or(d.tol),
        max_iter: a.max_iter.unwrap_or(d.max_iter),
        seed,
        ..d
    }
}

fn solve_one<S: Scalar>(data: &ObservedData<S>, a: &SolveArgs, seed: u64) -> Result<SolveReport<S>> {
    Ok(match a.solver {
        SolverChoice::Svt => solve_nuclear_norm(data, &svt_options(a, seed))?,
        SolverChoice::Als => {
            let rank = a
                .rank
                .or(a.synthetic_rank)
                .ok_or_else(|| Error::Config("the ALS solver needs --rank".into()))?;
            let d = AlsOptions::new(rank);
            solve_als(
                data,
                &AlsOptions {
                    tol: a.tol.unwrap_or(d.tol),
                    max_iter: a.max_iter.unwrap_or(d.max_iter),
                    seed,
                    ..d
                },
            )?
        }
    })
}

struct Solved {
    snr_db: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    stop_reason: &'static str,
    rank: usize,
    estimate: Matrix,
}

fn solve_dense<S: Scalar>(
    mask: SamplingMask,
    observed: &DenseMatrix<S>,
    truth: &DenseMatrix<S>,
    a: &SolveArgs,
    seed: u64,
    wrap: fn(DenseMatrix<S>) -> Matrix,
) -> Result<Solved> {
    if observed.shape() != mask.shape() {
        return Err(sgap_core::Error::ShapeMismatch {
            left: observed.shape(),
            right: mask.shape(),
        }
        .into());
    }
    let values = mask.entries().iter().map(|&(i, j)| observed[(i, j)]).collect();
    let data = ObservedData::new(mask, values, a.eta)?;
    let rep = solve_one(&data, a, seed)?;
    Ok(Solved {
        snr_db: snr(&rep.estimate, truth)?,
        residual: rep.residual,
        iterations: rep.iterations,
        converged: rep.converged,
        stop_reason: rep.stop_reason.as_str(),
        rank: rep.rank,
        estimate: wrap(rep.estimate),
    })
}

fn cmd_solve(cli: &Cli, a: &SolveArgs, argv: &[String], stdout: &mut dyn Write) -> Result<()> {
    let mask = read_mask(&a.mask)?;
    let (n, m) = mask.shape();
    let solved = match (&a.data, a.synthetic_rank) {
        (Some(path), _) => {
            let observed = read_matrix(path)?;
            let truth = match &a.truth {
                Some(t) => read_matrix(t)?,
                None => observed.clone(),
            };
            match (observed, truth) {
                (Matrix::Real(o), Matrix::Real(t)) => solve_dense(mask, &o, &t, a, cli.seed(), Matrix::Real)?,
                (o, t) => {
                    let c = |x: Matrix| match x {
                        Matrix::Real(r) => r.to_scalar::<Complex64>(),
                        Matrix::Complex(z) => z,
                    };
                    solve_dense(mask, &c(o), &c(t), a, cli.seed(), Matrix::Complex)?
                }
            }
        }
        (None, Some(rank)) => {
            let model = LowRankModel::<f64>::generate_incoherent(n, m, rank, &RngSeed::new(cli.seed(), 0))?;
            let truth = model.to_dense();
            solve_dense(mask, &truth, &truth, a, cli.seed(), Matrix::Real)?
        }
        (None, None) => return Err(Error::Config("solve needs --data or --synthetic-rank".into())),
    };
    if let Some(out) = &cli.out {
        write_matrix(out, &solved.estimate)?;
        let meta = json!({
            "command": "solve",
            "seed": cli.seed(),
            "argv": argv,
            "conventions": conventions(cli.trim_empty),
        });
        write_text(&sidecar_path(out), &json_text(&meta))?;
    }
    if cli.json {
        let v = json!({
            "snr_db": solved.snr_db,
            "residual": solved.residual,
            "iterations": solved.iterations,
            "converged": solved.converged,
            "stop_reason": solved.stop_reason,
            "rank": solved.rank,
        });
        return emit(stdout, &json_text(&v));
    }
    emit(
        stdout,
        &format!(
            "snr_db={:.6} residual={:.6e} iterations={} converged={} stop_reason={} rank={}\n",
            solved.snr_db, solved.residual, solved.iterations, solved.converged, solved.stop_reason, solved.rank
        ),
    )
}

/// Records, optional pooled records, SG/SNR correlation and geometry.
type SweepOutput = (Vec<SweepRecord>, Option<Vec<SweepRecord>>, Option<f64>, Value);

fn execute<S: Sweep>(
    sweep: &S,
    seed: u64,
    threads: usize,
) -> Result<(Vec<SweepRecord>, Vec<Vec<sgap_core::experiments::TrialOutcome>>)> {
    let outcomes = run_parallel(sweep, seed, threads)?;
    Ok((sweep.aggregate(&outcomes), outcomes))
}

fn square_geometry(n_src: usize, n_rec: usize) -> Value {
    let n = n_src * n_rec;
    json!({"n_src_per_axis": n_src, "n_rec_per_axis": n_rec, "matrix_shape": [n, n]})
}

fn grid_shape(grid: &GridSpec) -> [usize; 2] {
    let GridSpec {
        x: GridAxis { count: nx, .. },
        y: GridAxis { count: ny, .. },
    } = *grid;
    [nx, ny]
}

fn run_sweep(spec: &SweepSpec, seed: u64, threads: usize) -> Result<SweepOutput> {
    Ok(match spec {
        SweepSpec::Relocation(cfg) => {
            cfg.validate()?;
            let (records, outcomes) = execute(cfg, seed, threads)?;
            let rho = sg_snr_spearman(&records).ok();
            (
                records,
                Some(cfg.pooled(&outcomes)),
                rho,
                square_geometry(cfg.n_src, cfg.n_rec),
            )
        }
        SweepSpec::Jitter(cfg) => {
            cfg.validate()?;
            let (records, _) = execute(cfg, seed, threads)?;
            (records, None, None, square_geometry(cfg.n_src, cfg.n_rec))
        }
        SweepSpec::Density { config, source } => {
            let points = match source {
                PointSource::File(p) => read_points(p)?,
                PointSource::Coil(c) => coil_point_cloud(c, &RngSeed::new(seed, 0))?,
            };
            let cfg = DensitySweepConfig {
                points,
                ..config.clone()
            };
            cfg.validate()?;
            let grids = cfg
                .spacings
                .iter()
                .map(|&(sx, sy)| Ok(json!({"spacing": [sx, sy], "shape": grid_shape(&cfg.grid(sx, sy)?)})))
                .collect::<Result<Vec<_>>>()?;
            let (records, _) = execute(&cfg, seed, threads)?;
            let rho = if cfg.solve {
                sg_snr_spearman(&records).ok()
            } else {
                None
            };
            (records, None, rho, json!({"points": cfg.points.len(), "grids": grids}))
        }
    })
}

fn cmd_sweep(cli: &Cli, kind: SweepKind, config: Option<&Path>, argv: &[String], stdout: &mut dyn Write) -> Result<()> {
    let (kv, base) = match config {
        Some(path) => (load_kv(path)?, path.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (KeyValues::default(), PathBuf::from(".")),
    };
    let run = sweep_from_kv(kind, kv, &base, cli.seed, cli.trim_empty)?;
    let (records, pooled, spearman, geometry) = run_sweep(&run.spec, run.seed, cli.threads)?;
    let trim = run.effective.get("trim_empty").is_some_and(|v| v == "true");
    let csv = records_csv(&records);
    if let Some(out) = &cli.out {
        write_text(out, &csv)?;
        write_text(&with_suffix(out, ".json"), &json_text(&records_json(&records)))?;
        if let Some(p) = &pooled {
            write_text(&with_suffix(out, ".pooled.csv"), &records_csv(p))?;
        }
        let meta = sweep_meta(kind.as_str(), run.seed, geometry, &run.effective, trim, spearman, argv);
        write_text(&sidecar_path(out), &json_text(&meta))?;
    }
    if cli.json {
        let mut v = json!({"kind": kind.as_str(), "seed": run.seed, "records": records_json(&records)});
        if let Some(rho) = spearman {
            v["spearman_sg_snr"] = json!(rho);
        }
        return emit(stdout, &json_text(&v));
    }
    let mut text = if cli.out.is_some() { String::new() } else { csv };
    if let Some(rho) = spearman {
        text.push_str(&format!("spearman_sg_snr={rho:.6}\n"));
    }
    emit(stdout, &text)
}
