//! Sampling design generators.
//!
//! Index sets are returned sorted without duplicates. Every generator is a
//! deterministic function of its inputs and seed.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::{GridSpec, SamplingMask};
use crate::seed::RngSeed;

/// Guards `floor`/`ceil` of products like `0.6 * 5` against rounding up or
/// down across an integer.
const ROUND_SLACK: f64 = 1e-9;

/// `{offset, offset + k, ...}` below `n_points`.
pub fn periodic_selection(n_points: usize, keep_every: usize, offset: usize) -> Result<Vec<usize>> {
    if keep_every < 1 || keep_every > n_points {
        return Err(Error::InvalidParameter(alloc::format!(
            "keep_every must be in 1..={n_points}, got {keep_every}"
        )));
    }
    if offset >= keep_every {
        return Err(Error::InvalidParameter(alloc::format!(
            "offset {offset} must be below keep_every {keep_every}"
        )));
    }
    Ok((offset..n_points).step_by(keep_every).collect())
}

/// Staggered periodic layout on an `n_rec_x x n_rec_y` receiver grid: keep
/// `(rx, ry)` iff `(rx + ry) mod k == offset`.
///
/// Returns linear receiver indices `rx * n_rec_y + ry`. Used as the same
/// layout for every shot, the src-rec mask splits into `k` equal disconnected
/// blocks and its SG ratio is exactly 1.
pub fn staggered_layout(n_rec_x: usize, n_rec_y: usize, keep_every: usize, offset: usize) -> Result<Vec<usize>> {
    if n_rec_x == 0 || n_rec_y == 0 {
        return Err(Error::DegenerateAxis("receiver grid"));
    }
    if keep_every < 1 || offset >= keep_every {
        return Err(Error::InvalidParameter(alloc::format!(
            "staggered layout needs 0 <= offset < keep_every, got {offset} and {keep_every}"
        )));
    }
    let mut out = Vec::new();
    for rx in 0..n_rec_x {
        for ry in 0..n_rec_y {
            if (rx + ry) % keep_every == offset {
                out.push(rx * n_rec_y + ry);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateAxis("receiver grid"));
    }
    Ok(out)
}

fn check_selection(selection: &[usize], universe_size: usize) -> Result<Vec<usize>> {
    let mut sel = selection.to_vec();
    sel.sort_unstable();
    sel.dedup();
    if let Some(&index) = sel.last().filter(|&&i| i >= universe_size) {
        return Err(Error::IndexOutOfRange {
            axis: "selection",
            index,
            len: universe_size,
        });
    }
    Ok(sel)
}

/// Move `floor(p * |selection|)` selected indices to unselected positions,
/// both chosen uniformly without replacement. Size is preserved.
pub fn relocate_random(selection: &[usize], universe_size: usize, p: f64, seed: &RngSeed) -> Result<Vec<usize>> {
    relocate_random_with(selection, universe_size, p, &mut seed.rng_for("relocate"))
}

/// [`relocate_random`] drawing from a caller-provided generator.
pub fn relocate_random_with<R: Rng + ?Sized>(
    selection: &[usize],
    universe_size: usize,
    p: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(alloc::format!("p must be in [0, 1], got {p}")));
    }
    let sel = check_selection(selection, universe_size)?;
    let count = libm::floor(p * sel.len() as f64 + ROUND_SLACK) as usize;
    if count == 0 {
        return Ok(sel);
    }
    let unselected: Vec<usize> = {
        let mut out = Vec::with_capacity(universe_size - sel.len());
        let mut it = sel.iter().peekable();
        for i in 0..universe_size {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    };
    if unselected.len() < count {
        return Err(Error::NotEnoughSlots {
            needed: count,
            available: unselected.len(),
        });
    }
    let mut removed = alloc::vec![false; sel.len()];
    for k in index::sample(rng, sel.len(), count) {
        removed[k] = true;
    }
    let mut out: Vec<usize> = sel.iter().zip(&removed).filter(|(_, &r)| !r).map(|(&i, _)| i).collect();
    out.extend(
        index::sample(rng, unselected.len(), count)
            .into_iter()
            .map(|k| unselected[k]),
    );
    out.sort_unstable();
    Ok(out)
}

/// Jittered subsampling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterConfig {
    pub n_points: usize,
    /// Interval length L; one sample per interval.
    pub interval_len: usize,
    /// Jitter parameter in (0, 1]; restricted intervals draw from their first
    /// `ceil(rho * L)` slots.
    pub rho: f64,
    /// Restrict only odd-ordinal intervals (1, 3, 5, ...); otherwise every one.
    pub restrict_alternate_only: bool,
    /// Accept `n_points` not divisible by L; the short tail interval then
    /// draws one sample like the others.
    pub allow_partial_tail: bool,
}

impl JitterConfig {
    pub fn new(n_points: usize, interval_len: usize, rho: f64) -> Self {
        Self {
            n_points,
            interval_len,
            rho,
            restrict_alternate_only: true,
            allow_partial_tail: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::DegenerateAxis("n_points"));
        }
        if self.interval_len == 0 || self.interval_len > self.n_points {
            return Err(Error::InvalidParameter(alloc::format!(
                "interval_len must be in 1..={}, got {}",
                self.n_points,
                self.interval_len
            )));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "rho must be in (0, 1], got {}",
                self.rho
            )));
        }
        if !self.allow_partial_tail && self.n_points % self.interval_len != 0 {
            return Err(Error::IndivisibleInterval {
                n: self.n_points,
                interval: self.interval_len,
            });
        }
        Ok(())
    }

    /// Number of intervals, hence of selected indices.
    pub fn intervals(&self) -> usize {
        self.n_points.div_ceil(self.interval_len)
    }

    /// Slots available in a restricted interval of length `len`.
    pub fn restricted_slots(&self, len: usize) -> usize {
        (libm::ceil(self.rho * len as f64 - ROUND_SLACK) as usize).clamp(1, len)
    }
}

pub fn jittered_selection(config: &JitterConfig, seed: &RngSeed) -> Result<Vec<usize>> {
    jittered_selection_with(config, &mut seed.rng_for("jitter"))
}

/// [`jittered_selection`] drawing from a caller-provided generator.
pub fn jittered_selection_with<R: Rng + ?Sized>(config: &JitterConfig, rng: &mut R) -> Result<Vec<usize>> {
    config.validate()?;
    let l = config.interval_len;
    let out = (0..config.intervals())
        .map(|t| {
            let start = t * l;
            let len = l.min(config.n_points - start);
            let restricted = !config.restrict_alternate_only || t % 2 == 1;
            let slots = if restricted { config.restricted_slots(len) } else { len };
            start + rng.random_range(0..slots)
        })
        .collect();
    Ok(out)
}

pub fn uniform_random_selection(universe_size: usize, count: usize, seed: &RngSeed) -> Result<Vec<usize>> {
    uniform_random_selection_with(universe_size, count, &mut seed.rng_for("uniform"))
}

pub fn uniform_random_selection_with<R: Rng + ?Sized>(
    universe_size: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count > universe_size {
        return Err(Error::NotEnoughSlots {
            needed: count,
            available: universe_size,
        });
    }
    let mut out = index::sample(rng, universe_size, count).into_vec();
    out.sort_unstable();
    Ok(out)
}

/// Grid nodes hit by a binned point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Binned {
    /// `(ix, iy)` node indices, sorted, unique.
    pub nodes: Vec<(usize, usize)>,
    /// Points that landed on an already occupied node.
    pub duplicates: usize,
    /// Points farther than half a spacing outside the grid.
    pub dropped: usize,
}

impl Binned {
    /// Mask with rows indexed by the x axis and columns by the y axis.
    pub fn to_mask(&self, grid: &GridSpec) -> Result<SamplingMask> {
        Ok(SamplingMask::from_coords(grid.x.count, grid.y.count, &self.nodes)?.0)
    }
}

/// Nearest node on one axis; ties go to the lower index. `None` when more
/// than half a spacing outside.
fn nearest_node(coord: f64, origin: f64, spacing: f64, count: usize) -> Option<usize> {
    let t = (coord - origin) / spacing;
    if t < -0.5 || t > count as f64 - 0.5 {
        return None;
    }
    let k = libm::ceil(t - 0.5);
    Some((k.max(0.0) as usize).min(count - 1))
}

/// Assign each point to its nearest grid node.
pub fn bin_offgrid(points: &[(f64, f64)], grid: &GridSpec) -> Result<Binned> {
    if grid.x.count == 0 || grid.y.count == 0 {
        return Err(Error::EmptyGrid);
    }
    let mut nodes = Vec::with_capacity(points.len());
    let mut dropped = 0;
    for &(x, y) in points {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidParameter("non-finite point coordinate".into()));
        }
        match (
            nearest_node(x, grid.x.origin, grid.x.spacing, grid.x.count),
            nearest_node(y, grid.y.origin, grid.y.spacing, grid.y.count),
        ) {
            (Some(i), Some(j)) => nodes.push((i, j)),
            _ => dropped += 1,
        }
    }
    let kept = nodes.len();
    nodes.sort_unstable();
    nodes.dedup();
    Ok(Binned {
        duplicates: kept - nodes.len(),
        nodes,
        dropped,
    })
}

/// Synthetic coil-like acquisition: shots along circles of fixed radius
/// placed uniformly inside a square survey area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilConfig {
    pub circles: usize,
    /// Circle radius in meters.
    pub radius: f64,
    /// Arc length between consecutive points in meters.
    pub point_spacing: f64,
    /// Side of the square area in meters, origin at 0.
    pub extent: f64,
}

impl Default for CoilConfig {
    fn default() -> Self {
        Self {
            circles: 40,
            radius: 900.0,
            point_spacing: 60.0,
            extent: 10_000.0,
        }
    }
}

pub fn coil_point_cloud(config: &CoilConfig, seed: &RngSeed) -> Result<Vec<(f64, f64)>> {
    let CoilConfig {
        circles,
        radius,
        point_spacing,
        extent,
    } = *config;
    if circles == 0 || !(radius > 0.0) || !(point_spacing > 0.0) || !(extent > 2.0 * radius) {
        return Err(Error::InvalidParameter(
            "coil cloud needs circles >= 1, positive radius and spacing, extent > 2 * radius".into(),
        ));
    }
    let mut rng = seed.rng_for("coil");
    let per_circle = (libm::floor(2.0 * PI * radius / point_spacing) as usize).max(3);
    let mut points = Vec::with_capacity(circles * per_circle);
    for _ in 0..circles {
        let cx = rng.random_range(radius..extent - radius);
        let cy = rng.random_range(radius..extent - radius);
        let phase = rng.random_range(0.0..2.0 * PI);
        for k in 0..per_circle {
            let th = phase + 2.0 * PI * k as f64 / per_circle as f64;
            points.push((cx + radius * libm::cos(th), cy + radius * libm::sin(th)));
        }
    }
    Ok(points)
}
