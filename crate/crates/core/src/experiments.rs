//! Relocation, jitter, and grid-density sweeps.
//!
//! A sweep is a grid of parameter values times a number of trials. Each
//! `(parameter, trial)` cell is a pure function of the config, the base seed
//! and the trial index, so cells can run in any order or in parallel;
//! [`Sweep::aggregate`] reduces them in `(parameter, trial)` order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::completion::{snr, solve_nuclear_norm, LowRankModel, ObservedData, SolveOptions};
use crate::designs::{bin_offgrid, jittered_selection_with, relocate_random_with, staggered_layout, JitterConfig};
use crate::error::{Error, Result};
use crate::mask::{src_rec_mask_from_layouts, GridAxis, GridSpec, MatricizationMap, SamplingMask};
use crate::seed::RngSeed;
use crate::spectral::{top_two_singular_values, SpectralOptions};
use crate::stats::{mean, spearman, std_dev};

/// Swept parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    /// Grid spacings `(x, y)` in meters.
    Pair(f64, f64),
}

/// One aggregated row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub param_name: String,
    pub param_value: ParamValue,
    pub trials: usize,
    pub mean_sg_ratio: f64,
    pub std_sg_ratio: f64,
    /// Over converged solves only; `None` for SG-only sweeps or when every
    /// solve was excluded.
    pub mean_snr_db: Option<f64>,
    pub std_snr_db: Option<f64>,
    pub mean_max_gap: f64,
    /// Observed fraction in `[0, 1]`, averaged over trials.
    pub sampling_pct: f64,
    /// Trials whose solve did not converge.
    pub excluded_trials: usize,
    /// False when the cell produced no usable mask (e.g. binning left it empty).
    pub valid: bool,
}

/// Result of one `(parameter, trial)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub sg_ratio: f64,
    pub snr_db: Option<f64>,
    /// False when a solve ran and failed to converge or diverged.
    pub converged: bool,
    pub max_gap: usize,
    pub sampling_pct: f64,
    pub valid: bool,
}

impl TrialOutcome {
    fn invalid() -> Self {
        Self {
            sg_ratio: f64::NAN,
            snr_db: None,
            converged: false,
            max_gap: 0,
            sampling_pct: 0.0,
            valid: false,
        }
    }
}

/// Aggregate the trials of one parameter value.
pub fn aggregate_trials(param_name: &str, param_value: ParamValue, outcomes: &[TrialOutcome]) -> SweepRecord {
    let valid: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.valid).collect();
    let sg: Vec<f64> = valid.iter().map(|o| o.sg_ratio).collect();
    let solved: Vec<&&TrialOutcome> = valid.iter().filter(|o| o.snr_db.is_some() || !o.converged).collect();
    let snrs: Vec<f64> = solved.iter().filter(|o| o.converged).filter_map(|o| o.snr_db).collect();
    let gaps: Vec<f64> = valid.iter().map(|o| o.max_gap as f64).collect();
    let pcts: Vec<f64> = valid.iter().map(|o| o.sampling_pct).collect();
    SweepRecord {
        param_name: param_name.into(),
        param_value,
        trials: outcomes.len(),
        mean_sg_ratio: mean(&sg).unwrap_or(f64::NAN),
        std_sg_ratio: std_dev(&sg).unwrap_or(f64::NAN),
        mean_snr_db: mean(&snrs),
        std_snr_db: std_dev(&snrs),
        mean_max_gap: mean(&gaps).unwrap_or(f64::NAN),
        sampling_pct: mean(&pcts).unwrap_or(f64::NAN),
        excluded_trials: solved.len() - snrs.len(),
        valid: !valid.is_empty(),
    }
}

/// A grid of `(parameter, trial)` cells with a deterministic reduction.
pub trait Sweep: Sync {
    fn n_params(&self) -> usize;
    fn trials(&self) -> usize;
    fn run_cell(&self, param: usize, trial: usize, base_seed: u64) -> Result<TrialOutcome>;
    /// `outcomes[param][trial]`.
    fn aggregate(&self, outcomes: &[Vec<TrialOutcome>]) -> Vec<SweepRecord>;
}

/// Run every cell in order on the current thread.
pub fn run_sequential<S: Sweep + ?Sized>(sweep: &S, base_seed: u64) -> Result<Vec<Vec<TrialOutcome>>> {
    (0..sweep.n_params())
        .map(|p| (0..sweep.trials()).map(|t| sweep.run_cell(p, t, base_seed)).collect())
        .collect()
}

/// Sort by mean SG ratio, largest first; invalid records go last. Stable.
fn sort_by_sg_desc(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| match (a.mean_sg_ratio.is_nan(), b.mean_sg_ratio.is_nan()) {
        (false, false) => b.mean_sg_ratio.total_cmp(&a.mean_sg_ratio),
        (x, y) => x.cmp(&y),
    });
}

/// Spearman correlation of mean SG ratio against mean SNR over records that
/// have both.
pub fn sg_snr_spearman(records: &[SweepRecord]) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.valid)
        .filter_map(|r| r.mean_snr_db.map(|s| (r.mean_sg_ratio, s)))
        .unzip();
    spearman(&xs, &ys)
}

fn solve_outcome(
    mask: SamplingMask,
    sg_ratio: f64,
    rank: usize,
    solver: &SolveOptions,
    seed: &RngSeed,
) -> Result<TrialOutcome> {
    let (n, m) = mask.shape();
    let max_gap = mask.gap_stats()?.max_gap;
    let sampling_pct = mask.sampling_percentage();
    let model = LowRankModel::<f64>::generate_incoherent(n, m, rank, seed)?;
    let data = ObservedData::sample_model(mask, &model)?;
    let (snr_db, converged) = match solve_nuclear_norm(&data, solver) {
        Ok(rep) => (Some(snr(&rep.estimate, &model.to_dense())?), rep.converged),
        Err(Error::Divergence { .. }) => (None, false),
        Err(e) => return Err(e),
    };
    Ok(TrialOutcome {
        sg_ratio,
        snr_db,
        converged,
        max_gap,
        sampling_pct,
        valid: true,
    })
}

fn sg_only_outcome(mask: &SamplingMask, spectral: &SpectralOptions) -> Result<TrialOutcome> {
    let s = top_two_singular_values(mask, spectral)?;
    Ok(TrialOutcome {
        sg_ratio: s.sg_ratio,
        snr_db: None,
        converged: true,
        max_gap: mask.gap_stats()?.max_gap,
        sampling_pct: mask.sampling_percentage(),
        valid: true,
    })
}

/// Relocation sweep: a staggered periodic receiver layout per shot with a
/// fraction `p` of its receivers moved to random unoccupied positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RelocationConfig {
    /// Sources per axis.
    pub n_src: usize,
    /// Receivers per axis.
    pub n_rec: usize,
    /// Keep one receiver in `keep_every` in the periodic baseline.
    pub keep_every: usize,
    pub rank: usize,
    pub p_grid: Vec<f64>,
    pub trials: usize,
    pub spectral: SpectralOptions,
    pub solver: SolveOptions,
}

impl Default for RelocationConfig {
    fn default() -> Self {
        Self {
            n_src: 4,
            n_rec: 64,
            keep_every: 6,
            rank: 5,
            p_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
            trials: 20,
            spectral: SpectralOptions::default(),
            solver: SolveOptions {
                tau_floor_rel: 1e-2,
                inner_tol: 0.1,
                tol: 1e-4,
                max_iter: 3000,
                ..SolveOptions::default()
            },
        }
    }
}

impl RelocationConfig {
    pub fn validate(&self) -> Result<()> {
        MatricizationMap::square(self.n_src, self.n_rec)?;
        if self.trials == 0 || self.p_grid.is_empty() {
            return Err(Error::InvalidParameter(
                "relocation sweep needs trials >= 1 and a non-empty p grid".into(),
            ));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("p = {p} outside [0, 1]")));
        }
        let n = self.n_src * self.n_rec;
        if self.rank == 0 || self.rank > n {
            return Err(Error::RankOutOfRange {
                rank: self.rank,
                rows: n,
                cols: n,
            });
        }
        staggered_layout(self.n_rec, self.n_rec, self.keep_every, 0).map(|_| ())
    }

    /// Mask of one trial at relocation fraction `p`. Each shot relocates its
    /// own copy of the baseline with its own stream.
    pub fn mask(&self, p: f64, seed: &RngSeed) -> Result<SamplingMask> {
        let map = MatricizationMap::square(self.n_src, self.n_rec)?;
        let base = staggered_layout(self.n_rec, self.n_rec, self.keep_every, 0)?;
        let universe = map.n_receivers();
        let layouts = (0..map.n_shots())
            .map(|shot| {
                let mut rng = seed.child(shot as u64).rng_for("relocate");
                relocate_random_with(&base, universe, p, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        src_rec_mask_from_layouts(&map, &layouts)
    }

    /// Per-trial points sorted by SG ratio, largest first, as `p_trial` rows.
    pub fn pooled(&self, outcomes: &[Vec<TrialOutcome>]) -> Vec<SweepRecord> {
        let mut out: Vec<SweepRecord> = outcomes
            .iter()
            .enumerate()
            .flat_map(|(k, trials)| {
                let p = self.p_grid[k];
                trials
                    .iter()
                    .map(move |o| aggregate_trials("p_trial", ParamValue::Scalar(p), core::slice::from_ref(o)))
            })
            .collect();
        sort_by_sg_desc(&mut out);
        out
    }
}

impl Sweep for RelocationConfig {
    fn n_params(&self) -> usize {
        self.p_grid.len()
    }

    fn trials(&self) -> usize {
        self.trials
    }

    fn run_cell(&self, param: usize, trial: usize, base_seed: u64) -> Result<TrialOutcome> {
        let seed = RngSeed::new(base_seed, trial as u64);
        let mask = self.mask(self.p_grid[param], &seed)?;
        let sg = top_two_singular_values(&mask, &self.spectral)?.sg_ratio;
        // The model depends on the trial only, so every p sees the same data.
        solve_outcome(mask, sg, self.rank, &self.solver, &seed)
    }

    fn aggregate(&self, outcomes: &[Vec<TrialOutcome>]) -> Vec<SweepRecord> {
        let mut records: Vec<SweepRecord> = outcomes
            .iter()
            .zip(&self.p_grid)
            .map(|(o, &p)| aggregate_trials("p", ParamValue::Scalar(p), o))
            .collect();
        sort_by_sg_desc(&mut records);
        records
    }
}

/// Jitter sweep: SG ratio only, over jitter parameters and missing fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterSweepConfig {
    pub n_src: usize,
    pub n_rec: usize,
    pub rho_grid: Vec<f64>,
    /// Fractions of missing receivers; the interval length is
    /// `round(1 / (1 - missing))`.
    pub missing: Vec<f64>,
    pub trials: usize,
    pub restrict_alternate_only: bool,
    /// Receiver count need not divide by the interval length.
    pub allow_partial_tail: bool,
    pub spectral: SpectralOptions,
}

impl Default for JitterSweepConfig {
    fn default() -> Self {
        Self {
            n_src: 32,
            n_rec: 32,
            rho_grid: alloc::vec![0.2, 0.4, 0.6, 0.8, 1.0],
            missing: alloc::vec![0.8, 0.9, 0.95],
            trials: 50,
            restrict_alternate_only: true,
            allow_partial_tail: true,
            spectral: SpectralOptions::default(),
        }
    }
}

impl JitterSweepConfig {
    pub fn validate(&self) -> Result<()> {
        MatricizationMap::square(self.n_src, self.n_rec)?;
        if self.trials == 0 || self.rho_grid.is_empty() || self.missing.is_empty() {
            return Err(Error::InvalidParameter(
                "jitter sweep needs trials >= 1 and non-empty grids".into(),
            ));
        }
        for &missing in &self.missing {
            for &rho in &self.rho_grid {
                self.jitter(missing, rho)?.validate()?;
            }
        }
        Ok(())
    }

    pub fn interval_len(missing: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&missing) {
            return Err(Error::InvalidParameter(format!(
                "missing fraction {missing} outside [0, 1)"
            )));
        }
        Ok(libm::round(1.0 / (1.0 - missing)) as usize)
    }

    fn jitter(&self, missing: f64, rho: f64) -> Result<JitterConfig> {
        Ok(JitterConfig {
            n_points: self.n_rec * self.n_rec,
            interval_len: Self::interval_len(missing)?,
            rho,
            restrict_alternate_only: self.restrict_alternate_only,
            allow_partial_tail: self.allow_partial_tail,
        })
    }

    /// `(missing, rho)` of parameter index `k`, missing-major.
    pub fn param(&self, k: usize) -> (f64, f64) {
        (
            self.missing[k / self.rho_grid.len()],
            self.rho_grid[k % self.rho_grid.len()],
        )
    }

    /// Independent jittered layout over the flattened receiver grid per shot.
    pub fn mask(&self, missing: f64, rho: f64, seed: &RngSeed) -> Result<SamplingMask> {
        let map = MatricizationMap::square(self.n_src, self.n_rec)?;
        let cfg = self.jitter(missing, rho)?;
        let layouts = (0..map.n_shots())
            .map(|shot| jittered_selection_with(&cfg, &mut seed.child(shot as u64).rng_for("jitter")))
            .collect::<Result<Vec<_>>>()?;
        src_rec_mask_from_layouts(&map, &layouts)
    }
}

impl Sweep for JitterSweepConfig {
    fn n_params(&self) -> usize {
        self.missing.len() * self.rho_grid.len()
    }

    fn trials(&self) -> usize {
        self.trials
    }

    fn run_cell(&self, param: usize, trial: usize, base_seed: u64) -> Result<TrialOutcome> {
        let (missing, rho) = self.param(param);
        let mask = self.mask(missing, rho, &RngSeed::new(base_seed, trial as u64))?;
        sg_only_outcome(&mask, &self.spectral)
    }

    fn aggregate(&self, outcomes: &[Vec<TrialOutcome>]) -> Vec<SweepRecord> {
        outcomes
            .iter()
            .enumerate()
            .map(|(k, o)| {
                let (missing, rho) = self.param(k);
                aggregate_trials(&format!("rho[missing={missing:.2}]"), ParamValue::Scalar(rho), o)
            })
            .collect()
    }
}

/// Density sweep: bin a fixed point cloud onto grids of different spacing.
///
/// Points are `(x, y)` traces of a 2D src-rec plane; `x` indexes mask rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySweepConfig {
    pub points: Vec<(f64, f64)>,
    /// `(spacing_x, spacing_y)` in meters.
    pub spacings: Vec<(f64, f64)>,
    /// Also complete a synthetic rank-`rank` model on each binned mask.
    pub solve: bool,
    pub rank: usize,
    pub trials: usize,
    pub spectral: SpectralOptions,
    pub solver: SolveOptions,
}

impl DensitySweepConfig {
    pub fn new(points: Vec<(f64, f64)>, spacings: Vec<(f64, f64)>) -> Self {
        Self {
            points,
            spacings,
            solve: false,
            rank: 5,
            trials: 1,
            spectral: SpectralOptions::default(),
            solver: SolveOptions {
                tau_floor_rel: 1e-2,
                inner_tol: 0.1,
                tol: 1e-4,
                max_iter: 3000,
                ..SolveOptions::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidParameter(
                "density sweep needs a non-empty point cloud".into(),
            ));
        }
        if self.spacings.is_empty() || self.trials == 0 {
            return Err(Error::InvalidParameter(
                "density sweep needs spacings and trials >= 1".into(),
            ));
        }
        for &(sx, sy) in &self.spacings {
            self.grid(sx, sy)?;
        }
        Ok(())
    }

    /// Grid over the bounding box of the cloud.
    pub fn grid(&self, spacing_x: f64, spacing_y: f64) -> Result<GridSpec> {
        let finite = self.points.iter().all(|&(x, y)| x.is_finite() && y.is_finite());
        if self.points.is_empty() || !finite {
            return Err(Error::InvalidParameter(
                "point cloud must be non-empty and finite".into(),
            ));
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        Ok(GridSpec {
            x: GridAxis::covering(x0, x1, spacing_x)?,
            y: GridAxis::covering(y0, y1, spacing_y)?,
        })
    }

    pub fn mask(&self, spacing_x: f64, spacing_y: f64) -> Result<SamplingMask> {
        let grid = self.grid(spacing_x, spacing_y)?;
        bin_offgrid(&self.points, &grid)?.to_mask(&grid)
    }
}

impl Sweep for DensitySweepConfig {
    fn n_params(&self) -> usize {
        self.spacings.len()
    }

    fn trials(&self) -> usize {
        self.trials
    }

    fn run_cell(&self, param: usize, trial: usize, base_seed: u64) -> Result<TrialOutcome> {
        let (sx, sy) = self.spacings[param];
        let mask = self.mask(sx, sy)?;
        if mask.is_empty() {
            return Ok(TrialOutcome::invalid());
        }
        if !self.solve {
            return sg_only_outcome(&mask, &self.spectral);
        }
        let sg = top_two_singular_values(&mask, &self.spectral)?.sg_ratio;
        let (n, m) = mask.shape();
        if self.rank > n.min(m) {
            return Ok(TrialOutcome::invalid());
        }
        solve_outcome(
            mask,
            sg,
            self.rank,
            &self.solver,
            &RngSeed::new(base_seed, trial as u64),
        )
    }

    /// Records ranked by SG ratio, best (smallest) first.
    fn aggregate(&self, outcomes: &[Vec<TrialOutcome>]) -> Vec<SweepRecord> {
        let mut records: Vec<SweepRecord> = outcomes
            .iter()
            .zip(&self.spacings)
            .map(|(o, &(sx, sy))| aggregate_trials("spacing", ParamValue::Pair(sx, sy), o))
            .collect();
        sort_by_sg_desc(&mut records);
        records.reverse();
        // Reversal moved invalid records first; put them back last.
        records.sort_by_key(|r| !r.valid);
        records
    }
}
