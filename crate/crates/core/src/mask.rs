//! Sampling masks, the src-rec matricization, and sampling statistics.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Binary `rows x cols` matrix of observed entries.
///
/// Entries are zero-based `(row, col)` pairs kept sorted row-major without
/// duplicates, so equal entry sets compare equal. Masks are immutable;
/// generators build new ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SamplingMask {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize)>,
}

impl SamplingMask {
    /// Canonical mask from arbitrary coordinates.
    ///
    /// Returns the mask and the number of duplicate coordinates collapsed.
    pub fn from_coords(rows: usize, cols: usize, coords: &[(usize, usize)]) -> Result<(Self, usize)> {
        check_dims(rows, cols)?;
        if let Some(&(row, col)) = coords.iter().find(|&&(i, j)| i >= rows || j >= cols) {
            return Err(Error::CoordinateOutOfRange { row, col, rows, cols });
        }
        let mut entries = coords.to_vec();
        entries.sort_unstable();
        entries.dedup();
        let duplicates = coords.len() - entries.len();
        Ok((Self { rows, cols, entries }, duplicates))
    }

    /// Entries must already be in range; they are sorted and deduplicated.
    pub(crate) fn from_entries_unchecked(rows: usize, cols: usize, mut entries: Vec<(usize, usize)>) -> Self {
        entries.sort_unstable();
        entries.dedup();
        debug_assert!(entries.iter().all(|&(i, j)| i < rows && j < cols));
        Self { rows, cols, entries }
    }

    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        check_dims(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            entries: Vec::new(),
        })
    }

    /// Every entry observed.
    pub fn full(rows: usize, cols: usize) -> Result<Self> {
        check_dims(rows, cols)?;
        let entries = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect();
        Ok(Self { rows, cols, entries })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_dims(n, n)?;
        Ok(Self {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| (i, i)).collect(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Observed entries, row-major sorted.
    #[inline]
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.entries.binary_search(&(row, col)).is_ok()
    }

    /// Fraction of observed entries, `|entries| / (rows * cols)`.
    pub fn sampling_percentage(&self) -> f64 {
        self.entries.len() as f64 / (self.rows as f64 * self.cols as f64)
    }

    pub fn transpose(&self) -> Self {
        let entries = self.entries.iter().map(|&(i, j)| (j, i)).collect();
        Self::from_entries_unchecked(self.cols, self.rows, entries)
    }

    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.rows];
        for &(i, _) in &self.entries {
            counts[i] += 1;
        }
        counts
    }

    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cols];
        for &(_, j) in &self.entries {
            counts[j] += 1;
        }
        counts
    }

    /// Every row holds the same number of samples, and so does every column.
    ///
    /// This is the condition under which the all-ones vectors are the top
    /// singular vectors of the mask.
    pub fn is_regular(&self) -> bool {
        let all_equal = |v: &[usize]| v.windows(2).all(|w| w[0] == w[1]);
        !self.is_empty() && all_equal(&self.row_counts()) && all_equal(&self.col_counts())
    }

    /// Drop all-zero rows and columns.
    ///
    /// Returns the compacted mask and the original indices of the kept rows
    /// and columns. An empty mask has nothing left to keep.
    pub fn trim_empty(&self) -> Result<TrimmedMask> {
        if self.is_empty() {
            return Err(Error::EmptyMask);
        }
        let keep = |counts: Vec<usize>| -> (Vec<usize>, Vec<usize>) {
            let kept: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
            let mut remap = vec![usize::MAX; counts.len()];
            for (new, &old) in kept.iter().enumerate() {
                remap[old] = new;
            }
            (kept, remap)
        };
        let (kept_rows, row_map) = keep(self.row_counts());
        let (kept_cols, col_map) = keep(self.col_counts());
        let entries = self.entries.iter().map(|&(i, j)| (row_map[i], col_map[j])).collect();
        Ok(TrimmedMask {
            mask: Self::from_entries_unchecked(kept_rows.len(), kept_cols.len(), entries),
            kept_rows,
            kept_cols,
        })
    }

    /// Relabel rows and columns: entry `(i, j)` moves to `(row_perm[i], col_perm[j])`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Result<Self> {
        if row_perm.len() != self.rows {
            return Err(Error::LengthMismatch {
                left: row_perm.len(),
                right: self.rows,
            });
        }
        if col_perm.len() != self.cols {
            return Err(Error::LengthMismatch {
                left: col_perm.len(),
                right: self.cols,
            });
        }
        let coords: Vec<_> = self.entries.iter().map(|&(i, j)| (row_perm[i], col_perm[j])).collect();
        let (mask, dups) = Self::from_coords(self.rows, self.cols, &coords)?;
        if dups != 0 {
            return Err(Error::InvalidParameter("permutation is not a bijection".into()));
        }
        Ok(mask)
    }

    pub fn to_dense<S: Scalar>(&self) -> DenseMatrix<S> {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, j) in &self.entries {
            d[(i, j)] = S::one();
        }
        d
    }

    /// `y = M x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j) in &self.entries {
            y[i] += x[j];
        }
    }

    /// `x = M^T y`
    pub fn apply_transpose(&self, y: &[f64], x: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        x.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j) in &self.entries {
            x[j] += y[i];
        }
    }

    /// Statistics of interior runs of unobserved entries along rows and columns.
    pub fn gap_stats(&self) -> Result<GapStats> {
        if self.is_empty() {
            return Err(Error::EmptyMask);
        }
        let mut rows = RunStats::default();
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j) in &self.entries {
            if let Some((pi, pj)) = prev {
                if pi == i {
                    rows.push(j - pj - 1);
                }
            }
            prev = Some((i, j));
        }
        let mut cols = RunStats::default();
        let transposed = self.transpose();
        let mut prev: Option<(usize, usize)> = None;
        for &(j, i) in transposed.entries() {
            if let Some((pj, pi)) = prev {
                if pj == j {
                    cols.push(i - pi - 1);
                }
            }
            prev = Some((j, i));
        }
        let runs = rows.runs + cols.runs;
        let mean = if runs == 0 {
            0.0
        } else {
            (rows.total + cols.total) as f64 / runs as f64
        };
        Ok(GapStats {
            rows,
            cols,
            max_gap: rows.max.max(cols.max),
            mean_gap: mean,
        })
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::ZeroDimension { rows, cols });
    }
    Ok(())
}

/// Result of [`SamplingMask::trim_empty`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedMask {
    pub mask: SamplingMask,
    pub kept_rows: Vec<usize>,
    pub kept_cols: Vec<usize>,
}

/// Run-length summary over one direction. Only runs bounded by observed
/// entries on both sides count; a run of length zero (adjacent samples) is
/// not a gap.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    pub max: usize,
    pub runs: usize,
    pub total: usize,
}

impl RunStats {
    fn push(&mut self, len: usize) {
        if len == 0 {
            return;
        }
        self.max = self.max.max(len);
        self.runs += 1;
        self.total += len;
    }

    pub fn mean(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.total as f64 / self.runs as f64
        }
    }
}

/// Gap statistics of a mask: per direction, plus the combined maximum and
/// the mean over every run in either direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats {
    pub rows: RunStats,
    pub cols: RunStats,
    pub max_gap: usize,
    pub mean_gap: f64,
}

/// Interior gaps between consecutive indices of a sorted 1D selection.
pub fn selection_gaps(sorted: &[usize]) -> RunStats {
    let mut stats = RunStats::default();
    for w in sorted.windows(2) {
        stats.push(w[1] - w[0] - 1);
    }
    stats
}

/// Bijection between 4D (source_x, receiver_x, source_y, receiver_y) indices
/// and the (row, col) of the src-rec matrix.
///
/// Sources are the outer dimension: `row = sx * n_rec_x + rx`,
/// `col = sy * n_rec_y + ry`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatricizationMap {
    pub n_src_x: usize,
    pub n_rec_x: usize,
    pub n_src_y: usize,
    pub n_rec_y: usize,
}

impl MatricizationMap {
    pub fn new(n_src_x: usize, n_rec_x: usize, n_src_y: usize, n_rec_y: usize) -> Result<Self> {
        for (name, v) in [
            ("n_src_x", n_src_x),
            ("n_rec_x", n_rec_x),
            ("n_src_y", n_src_y),
            ("n_rec_y", n_rec_y),
        ] {
            if v == 0 {
                return Err(Error::DegenerateAxis(name));
            }
        }
        Ok(Self {
            n_src_x,
            n_rec_x,
            n_src_y,
            n_rec_y,
        })
    }

    /// Same source and receiver counts on both axes.
    pub fn square(n_src: usize, n_rec: usize) -> Result<Self> {
        Self::new(n_src, n_rec, n_src, n_rec)
    }

    pub fn rows(&self) -> usize {
        self.n_src_x * self.n_rec_x
    }

    pub fn cols(&self) -> usize {
        self.n_src_y * self.n_rec_y
    }

    pub fn to_row_col(&self, sx: usize, rx: usize, sy: usize, ry: usize) -> (usize, usize) {
        debug_assert!(sx < self.n_src_x && rx < self.n_rec_x && sy < self.n_src_y && ry < self.n_rec_y);
        (sx * self.n_rec_x + rx, sy * self.n_rec_y + ry)
    }

    pub fn from_row_col(&self, row: usize, col: usize) -> (usize, usize, usize, usize) {
        debug_assert!(row < self.rows() && col < self.cols());
        (
            row / self.n_rec_x,
            row % self.n_rec_x,
            col / self.n_rec_y,
            col % self.n_rec_y,
        )
    }

    /// Receivers on the 2D receiver grid.
    pub fn n_receivers(&self) -> usize {
        self.n_rec_x * self.n_rec_y
    }

    /// Source positions (pairs) on the 2D source grid.
    pub fn n_shots(&self) -> usize {
        self.n_src_x * self.n_src_y
    }

    /// Linear receiver index `rx * n_rec_y + ry`.
    pub fn receiver_index(&self, rx: usize, ry: usize) -> usize {
        rx * self.n_rec_y + ry
    }

    /// Linear shot index `sx * n_src_y + sy`.
    pub fn shot_index(&self, sx: usize, sy: usize) -> usize {
        sx * self.n_src_y + sy
    }
}

fn kept_set(name: &'static str, set: &[usize], len: usize) -> Result<Vec<usize>> {
    if let Some(&index) = set.iter().find(|&&i| i >= len) {
        return Err(Error::IndexOutOfRange { axis: name, index, len });
    }
    let mut v = set.to_vec();
    v.sort_unstable();
    v.dedup();
    if v.is_empty() {
        return Err(Error::DegenerateAxis(name));
    }
    Ok(v)
}

/// Mask of the src-rec matrix keeping `(sx, rx, sy, ry)` iff all four indices
/// are kept on their axes.
///
/// The result is an outer product of a row indicator and a column indicator,
/// hence rank one.
pub fn src_rec_mask(
    map: &MatricizationMap,
    kept_src_x: &[usize],
    kept_rec_x: &[usize],
    kept_src_y: &[usize],
    kept_rec_y: &[usize],
) -> Result<SamplingMask> {
    let sx = kept_set("src_x", kept_src_x, map.n_src_x)?;
    let rx = kept_set("rec_x", kept_rec_x, map.n_rec_x)?;
    let sy = kept_set("src_y", kept_src_y, map.n_src_y)?;
    let ry = kept_set("rec_y", kept_rec_y, map.n_rec_y)?;

    let rows: Vec<usize> = sx
        .iter()
        .flat_map(|&s| rx.iter().map(move |&r| s * map.n_rec_x + r))
        .collect();
    let cols: Vec<usize> = sy
        .iter()
        .flat_map(|&s| ry.iter().map(move |&r| s * map.n_rec_y + r))
        .collect();
    let mut entries = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in &cols {
            entries.push((i, j));
        }
    }
    let mask = SamplingMask {
        rows: map.rows(),
        cols: map.cols(),
        entries,
    };
    debug_assert_eq!(mask.len(), sx.len() * rx.len() * sy.len() * ry.len());
    debug_assert!(mask.entries.windows(2).all(|w| w[0] < w[1]));
    Ok(mask)
}

/// Mask of the src-rec matrix from per-shot receiver layouts.
///
/// `layouts[sx * n_src_y + sy]` lists the linear receiver indices
/// (`rx * n_rec_y + ry`) that recorded shot `(sx, sy)`. A single layout
/// shared by every shot is passed as a one-element slice.
pub fn src_rec_mask_from_layouts(map: &MatricizationMap, layouts: &[Vec<usize>]) -> Result<SamplingMask> {
    let shots = map.n_shots();
    if layouts.len() != shots && layouts.len() != 1 {
        return Err(Error::LengthMismatch {
            left: layouts.len(),
            right: shots,
        });
    }
    let n_rec = map.n_receivers();
    let mut entries = Vec::with_capacity(layouts.iter().map(Vec::len).sum::<usize>() * (shots / layouts.len()));
    for sx in 0..map.n_src_x {
        for sy in 0..map.n_src_y {
            let layout = if layouts.len() == 1 {
                &layouts[0]
            } else {
                &layouts[map.shot_index(sx, sy)]
            };
            for &r in layout {
                if r >= n_rec {
                    return Err(Error::IndexOutOfRange {
                        axis: "receiver",
                        index: r,
                        len: n_rec,
                    });
                }
                let (rx, ry) = (r / map.n_rec_y, r % map.n_rec_y);
                entries.push(map.to_row_col(sx, rx, sy, ry));
            }
        }
    }
    Ok(SamplingMask::from_entries_unchecked(map.rows(), map.cols(), entries))
}

/// One regular axis of a reconstruction grid, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub origin: f64,
    pub spacing: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(origin: f64, spacing: f64, count: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() || !origin.is_finite() {
            return Err(Error::InvalidParameter(
                "grid spacing must be positive and finite".into(),
            ));
        }
        if count == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { origin, spacing, count })
    }

    /// Axis covering `[start, end]` with nodes at `start + k * spacing`.
    pub fn covering(start: f64, end: f64, spacing: f64) -> Result<Self> {
        if !(end >= start) {
            return Err(Error::InvalidParameter("axis end before start".into()));
        }
        let count = libm::floor((end - start) / spacing + 1e-9) as usize + 1;
        Self::new(start, spacing, count)
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.spacing
    }
}

/// Regular 2D grid; `x` indexes mask rows and `y` mask columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x: GridAxis,
    pub y: GridAxis,
}
