//! Segment-run vectors and matrices, and the shifted-grid preconditioner
//! whose ℓ₁ norm approximates the transport cost of a demand vector.
//!
//! Rows are numbered from 1. A row of the preconditioner is a pair
//! (cell, shift) at some grid level; column `v` holds the value `d` on every
//! row whose shifted cell contains the point of `v`. Because the shifts that
//! keep a point inside a fixed cell are consecutive, each column is a short
//! list of runs.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::metric::Embedding;
use crate::scalar::{kahan_sum, KahanSum, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrecondError {
    #[error("coordinate range {range} exceeds the supported maximum {max}")]
    CoordinateOutOfRange { range: u64, max: u64 },
    #[error("embedding has no points or no dimensions")]
    EmptyEmbedding,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: u64, found: u64 },
    #[error("invalid segment list: {0}")]
    InvalidSegments(String),
}

/// Largest supported coordinate range after translation.
pub const MAX_COORDINATE_RANGE: u64 = 1 << 40;

/// Constant run `value` on rows `start..=end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Segment<F> {
    pub start: u64,
    pub end: u64,
    pub value: F,
}

impl<F: Real> Segment<F> {
    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }
}

/// Vector of dimension `dim` stored as disjoint runs sorted by start; rows
/// outside every run are zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressedVector<F> {
    dim: u64,
    segments: Vec<Segment<F>>,
}

impl<F: Real> CompressedVector<F> {
    pub fn zeros(dim: u64) -> Self {
        Self {
            dim,
            segments: Vec::new(),
        }
    }

    /// Validates that runs are in range, sorted and disjoint.
    pub fn new(dim: u64, segments: Vec<Segment<F>>) -> Result<Self, PrecondError> {
        let mut prev_end = 0u64;
        for s in &segments {
            if s.start < 1 || s.end < s.start || s.end > dim {
                return Err(PrecondError::InvalidSegments(format!(
                    "run [{}, {}] outside [1, {dim}]",
                    s.start, s.end
                )));
            }
            if s.start <= prev_end {
                return Err(PrecondError::InvalidSegments(format!(
                    "run starting at {} overlaps or is out of order",
                    s.start
                )));
            }
            prev_end = s.end;
        }
        Ok(Self { dim, segments })
    }

    pub fn dim(&self) -> u64 {
        self.dim
    }

    pub fn segments(&self) -> &[Segment<F>] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Expands to a dense vector; only sensible for small `dim`.
    pub fn to_dense(&self) -> Vec<F> {
        let mut out = vec![F::zero(); self.dim as usize];
        for s in &self.segments {
            for t in s.start..=s.end {
                out[(t - 1) as usize] = s.value;
            }
        }
        out
    }

    pub fn norm1(&self) -> F {
        cv_norm1(self)
    }
}

/// `Σ (b - a + 1)|c|` over the runs.
pub fn cv_norm1<F: Real>(x: &CompressedVector<F>) -> F {
    kahan_sum(
        x.segments
            .iter()
            .map(|s| F::of(s.len() as f64) * s.value.abs()),
    )
}

/// Sign of every stored run, with `sgn(0) = +1`; rows outside runs stay 0.
pub fn cv_sign<F: Real>(x: &CompressedVector<F>) -> CompressedVector<F> {
    CompressedVector {
        dim: x.dim,
        segments: x
            .segments
            .iter()
            .map(|s| Segment {
                value: if s.value >= F::zero() { F::one() } else { -F::one() },
                ..*s
            })
            .collect(),
    }
}

/// Multiplies every run by `t`; scaling by zero yields the empty list.
pub fn cv_scale<F: Real>(x: &CompressedVector<F>, t: F) -> CompressedVector<F> {
    if t == F::zero() {
        return CompressedVector::zeros(x.dim);
    }
    CompressedVector {
        dim: x.dim,
        segments: x
            .segments
            .iter()
            .map(|s| Segment {
                value: s.value * t,
                ..*s
            })
            .collect(),
    }
}

/// Grid bookkeeping of a preconditioner built from an embedding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GridInfo {
    /// Embedding dimension `d`.
    pub dim: usize,
    /// Coordinate bound `Δ`, a power of two.
    pub delta: u64,
    /// Number of levels `L = 1 + log2 Δ`.
    pub levels: usize,
    /// Non-empty cells per level.
    pub cells_per_level: Vec<usize>,
}

/// Matrix whose columns are compressed vectors of a common dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressedMatrix<F> {
    rows: u64,
    col_offsets: Vec<usize>,
    segments: Vec<Segment<F>>,
    grid: Option<GridInfo>,
}

impl<F: Real> CompressedMatrix<F> {
    /// Assembles a matrix from per-column runs.
    pub fn from_columns(rows: u64, columns: Vec<Vec<Segment<F>>>) -> Result<Self, PrecondError> {
        let mut col_offsets = Vec::with_capacity(columns.len() + 1);
        col_offsets.push(0);
        let mut segments = Vec::new();
        for col in columns {
            let col = CompressedVector::new(rows, col)?;
            segments.extend(col.segments);
            col_offsets.push(segments.len());
        }
        Ok(Self {
            rows,
            col_offsets,
            segments,
            grid: None,
        })
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.col_offsets.len() - 1
    }

    pub fn column(&self, i: usize) -> &[Segment<F>] {
        &self.segments[self.col_offsets[i]..self.col_offsets[i + 1]]
    }

    pub fn nnz_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn max_column_segments(&self) -> usize {
        (0..self.cols())
            .map(|i| self.column(i).len())
            .max()
            .unwrap_or(0)
    }

    pub fn grid(&self) -> Option<&GridInfo> {
        self.grid.as_ref()
    }

    pub fn to_dense(&self) -> Vec<Vec<F>> {
        (0..self.cols())
            .map(|i| {
                CompressedVector {
                    dim: self.rows,
                    segments: self.column(i).to_vec(),
                }
                .to_dense()
            })
            .collect()
    }
}

/// Builds the shifted-grid preconditioner of an embedding.
///
/// Coordinates are translated per dimension so the smallest is 1, and `Δ`
/// is the next power of two at or above the largest. Level `l` partitions
/// `[2Δ]^d` into cubes of side `2^l` with corners `≡ 1 (mod 2^l)`; the point
/// of `v` shifted by `τ·1` for `τ ∈ [1, 2^l]` visits at most `d + 1` cubes,
/// each over a contiguous range of shifts. Within a level, non-empty cubes
/// are numbered in lexicographic order of their corners, and cube `k`
/// (1-based) owns rows `(k - 1)·2^l + 1 ..= k·2^l` after the rows of all
/// lower levels.
pub fn build_preconditioner<F: Real>(emb: &Embedding) -> Result<CompressedMatrix<F>, PrecondError> {
    let (n, d) = (emb.n, emb.d);
    if n == 0 || d == 0 {
        return Err(PrecondError::EmptyEmbedding);
    }
    let mut mins = vec![u64::MAX; d];
    for v in 0..n {
        for (j, &x) in emb.row(v).iter().enumerate() {
            mins[j] = mins[j].min(x);
        }
    }
    let pts: Vec<u64> = (0..n)
        .flat_map(|v| {
            let mins = &mins;
            emb.row(v).iter().enumerate().map(move |(j, &x)| x - mins[j] + 1)
        })
        .collect();
    let max = pts.iter().copied().max().unwrap_or(1);
    if max > MAX_COORDINATE_RANGE {
        return Err(PrecondError::CoordinateOutOfRange {
            range: max,
            max: MAX_COORDINATE_RANGE,
        });
    }
    let delta = max.next_power_of_two();
    let levels = delta.trailing_zeros() as usize + 1;
    let value = F::of(d as f64);

    let mut columns: Vec<Vec<Segment<F>>> = vec![Vec::new(); n];
    let mut cells_per_level = Vec::with_capacity(levels);
    let mut row_base: u64 = 0;
    for l in 0..levels {
        let side = 1u64 << l;
        // (vertex, τ1, τ2) per visited cube, with the cube corners in `keys`
        let per_vertex: Vec<(Vec<(usize, u64, u64)>, Vec<u32>)> = (0..n)
            .into_par_iter()
            .map(|v| shifted_cells(&pts[v * d..(v + 1) * d], v, l))
            .collect();
        let mut visits = Vec::new();
        let mut keys: Vec<u32> = Vec::new();
        for (vis, k) in per_vertex {
            visits.extend(vis);
            keys.extend(k);
        }
        let key = |i: usize| &keys[i * d..(i + 1) * d];
        let mut order: Vec<usize> = (0..visits.len()).collect();
        order.par_sort_unstable_by(|&a, &b| key(a).cmp(key(b)).then(a.cmp(&b)));
        let mut cell_of = vec![0u64; visits.len()];
        let mut cells = 0u64;
        for (pos, &i) in order.iter().enumerate() {
            if pos == 0 || key(order[pos - 1]) != key(i) {
                cells += 1;
            }
            cell_of[i] = cells;
        }
        for (i, &(v, t1, t2)) in visits.iter().enumerate() {
            let a = row_base + (cell_of[i] - 1) * side;
            columns[v].push(Segment {
                start: a + t1,
                end: a + t2,
                value,
            });
        }
        cells_per_level.push(cells as usize);
        row_base = cells
            .checked_mul(side)
            .and_then(|x| x.checked_add(row_base))
            .filter(|&r| r < u64::MAX / 4)
            .ok_or(PrecondError::CoordinateOutOfRange {
                range: max,
                max: MAX_COORDINATE_RANGE,
            })?;
    }
    for col in &mut columns {
        col.sort_unstable_by_key(|s| s.start);
    }
    let mut p = CompressedMatrix::from_columns(row_base, columns)?;
    p.grid = Some(GridInfo {
        dim: d,
        delta,
        levels,
        cells_per_level,
    });
    Ok(p)
}

/// Cubes of side `2^l` visited by `x + τ·1`, `τ = 1..=2^l`, with their shift
/// ranges; corners are returned as cube indices, `d` per visit.
fn shifted_cells(x: &[u64], v: usize, l: usize) -> (Vec<(usize, u64, u64)>, Vec<u32>) {
    let side = 1u64 << l;
    // position p lies in cube (p - 1) >> l; at τ = 1 the position is x + 1
    let base: Vec<u64> = x.iter().map(|&xj| xj >> l).collect();
    let mut cross: Vec<(u64, usize)> = x
        .iter()
        .enumerate()
        .filter_map(|(j, &xj)| {
            let tau = ((base[j] + 1) << l) - xj + 1;
            (tau <= side).then_some((tau, j))
        })
        .collect();
    cross.sort_unstable();
    let mut visits = Vec::with_capacity(cross.len() + 1);
    let mut keys = Vec::with_capacity((cross.len() + 1) * x.len());
    let mut corner: Vec<u32> = base.iter().map(|&c| c as u32).collect();
    // crossing shifts lie in [2, side], so every range below is non-empty
    let mut start = 1u64;
    let mut i = 0;
    loop {
        let stop = cross.get(i).map_or(side + 1, |c| c.0);
        visits.push((v, start, stop - 1));
        keys.extend_from_slice(&corner);
        if stop > side {
            break;
        }
        while i < cross.len() && cross[i].0 == stop {
            corner[cross[i].1] += 1;
            i += 1;
        }
        start = stop;
    }
    (visits, keys)
}

/// `P·g` for sparse `g = [(column, value)]` by sorting run boundary events
/// and sweeping a compensated prefix sum. Rows where the sum is exactly zero
/// are left out.
pub fn matrix_vec<F: Real>(p: &CompressedMatrix<F>, g: &[(usize, F)]) -> CompressedVector<F> {
    let mut events: Vec<(u64, F)> = Vec::new();
    for &(i, gi) in g {
        if gi == F::zero() {
            continue;
        }
        for s in p.column(i) {
            events.push((s.start, s.value * gi));
            events.push((s.end + 1, -(s.value * gi)));
        }
    }
    events.sort_by_key(|e| e.0);
    let mut segments = Vec::new();
    let mut acc = KahanSum::new();
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0;
        while i < events.len() && events[i].0 == pos {
            acc.add(events[i].1);
            i += 1;
        }
        if i < events.len() {
            let value = acc.value();
            if value != F::zero() {
                segments.push(Segment {
                    start: pos,
                    end: events[i].0 - 1,
                    value,
                });
            }
        }
    }
    CompressedVector {
        dim: p.rows,
        segments,
    }
}

/// Dense-input convenience wrapper for [`matrix_vec`].
pub fn matrix_vec_dense<F: Real>(p: &CompressedMatrix<F>, g: &[F]) -> CompressedVector<F> {
    let sparse: Vec<(usize, F)> = g
        .iter()
        .enumerate()
        .filter(|(_, &x)| x != F::zero())
        .map(|(i, &x)| (i, x))
        .collect();
    matrix_vec(p, &sparse)
}

/// `Pᵀy` by completing `y` to a cover of all rows, taking prefix sums over
/// the cover and locating each column run by binary search.
pub fn vector_mat<F: Real>(
    y: &CompressedVector<F>,
    p: &CompressedMatrix<F>,
) -> Result<Vec<F>, PrecondError> {
    if y.dim != p.rows {
        return Err(PrecondError::DimensionMismatch {
            expected: p.rows,
            found: y.dim,
        });
    }
    let mut cover: Vec<Segment<F>> = Vec::with_capacity(2 * y.segments.len() + 1);
    let mut next = 1u64;
    for s in &y.segments {
        if s.start > next {
            cover.push(Segment {
                start: next,
                end: s.start - 1,
                value: F::zero(),
            });
        }
        cover.push(*s);
        next = s.end + 1;
    }
    if next <= p.rows {
        cover.push(Segment {
            start: next,
            end: p.rows,
            value: F::zero(),
        });
    }
    // prefix[j] = sum of y over cover[..j]
    let mut prefix = Vec::with_capacity(cover.len() + 1);
    let mut acc = KahanSum::new();
    prefix.push(F::zero());
    for s in &cover {
        acc.add(F::of(s.len() as f64) * s.value);
        prefix.push(acc.value());
    }
    let locate = |t: u64| cover.partition_point(|s| s.start <= t) - 1;
    let range_sum = |a: u64, b: u64| -> F {
        let (ja, jb) = (locate(a), locate(b));
        if ja == jb {
            return F::of((b - a + 1) as f64) * cover[ja].value;
        }
        let head = F::of((cover[ja].end - a + 1) as f64) * cover[ja].value;
        let tail = F::of((b - cover[jb].start + 1) as f64) * cover[jb].value;
        head + (prefix[jb] - prefix[ja + 1]) + tail
    };
    Ok((0..p.cols())
        .into_par_iter()
        .with_min_len(64)
        .map(|i| kahan_sum(p.column(i).iter().map(|s| s.value * range_sum(s.start, s.end))))
        .collect())
}

/// Repeated products with a fixed matrix.
///
/// All run boundaries of the matrix split the rows into elementary
/// intervals on which every product `P·g` is constant, so after one sort
/// both `P·g` and `Pᵀy` (for `y` constant on those intervals) are linear
/// sweeps. Results coincide with [`matrix_vec`] and [`vector_mat`].
#[derive(Clone, Debug)]
pub struct SweepPlan<F> {
    /// Interval lengths.
    lens: Vec<F>,
    starts: Vec<u64>,
    col_offsets: Vec<usize>,
    /// `(first interval, one past last interval, value)` per run.
    runs: Vec<(u32, u32, F)>,
    rows: u64,
}

impl<F: Real> SweepPlan<F> {
    pub fn new(p: &CompressedMatrix<F>) -> Self {
        let mut cuts: Vec<u64> = p
            .segments
            .iter()
            .flat_map(|s| [s.start, s.end + 1])
            .collect();
        cuts.par_sort_unstable();
        cuts.dedup();
        let index = |x: u64| cuts.binary_search(&x).expect("cut present") as u32;
        let runs = p
            .segments
            .iter()
            .map(|s| (index(s.start), index(s.end + 1), s.value))
            .collect();
        let lens = cuts
            .windows(2)
            .map(|w| F::of((w[1] - w[0]) as f64))
            .collect();
        let starts = cuts.iter().take(cuts.len().saturating_sub(1)).copied().collect();
        Self {
            lens,
            starts,
            col_offsets: p.col_offsets.clone(),
            runs,
            rows: p.rows,
        }
    }

    pub fn intervals(&self) -> usize {
        self.lens.len()
    }

    /// `P·g` as one value per elementary interval.
    pub fn apply(&self, g: &[F]) -> Vec<F> {
        let mut out = Vec::new();
        self.apply_into(g, &mut out);
        out
    }

    /// [`Self::apply`] into a reusable buffer. Sums are left to right, so
    /// results are reproducible but not compensated.
    pub fn apply_into(&self, g: &[F], out: &mut Vec<F>) {
        let k = self.lens.len();
        out.clear();
        out.resize(k + 1, F::zero());
        for (i, &gi) in g.iter().enumerate() {
            if gi == F::zero() {
                continue;
            }
            for &(a, b, c) in &self.runs[self.col_offsets[i]..self.col_offsets[i + 1]] {
                out[a as usize] = out[a as usize] + c * gi;
                out[b as usize] = out[b as usize] - c * gi;
            }
        }
        out.truncate(k);
        let mut acc = F::zero();
        for x in out.iter_mut() {
            acc = acc + *x;
            *x = acc;
        }
    }

    /// ℓ₁ norm of an interval-valued vector.
    pub fn norm1(&self, vals: &[F]) -> F {
        self.lens
            .iter()
            .zip(vals)
            .fold(F::zero(), |acc, (&l, &v)| acc + l * v.abs())
    }

    /// `Pᵀy` for `y` given per elementary interval.
    pub fn transpose_apply(&self, y: &[F]) -> Vec<F> {
        let mut prefix = Vec::new();
        let mut out = Vec::new();
        self.transpose_apply_into(y, &mut prefix, &mut out);
        out
    }

    /// [`Self::transpose_apply`] with reusable scratch and output buffers.
    pub fn transpose_apply_into(&self, y: &[F], prefix: &mut Vec<F>, out: &mut Vec<F>) {
        prefix.clear();
        prefix.reserve(y.len() + 1);
        prefix.push(F::zero());
        let mut acc = F::zero();
        for (&l, &v) in self.lens.iter().zip(y) {
            acc = acc + l * v;
            prefix.push(acc);
        }
        out.clear();
        out.extend((0..self.col_offsets.len() - 1).map(|i| {
            self.runs[self.col_offsets[i]..self.col_offsets[i + 1]]
                .iter()
                .fold(F::zero(), |acc, &(a, b, c)| {
                    acc + c * (prefix[b as usize] - prefix[a as usize])
                })
        }));
    }

    /// Re-encodes interval values as a compressed vector, dropping zeros.
    pub fn to_compressed(&self, vals: &[F]) -> CompressedVector<F> {
        let segments = vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != F::zero())
            .map(|(k, &value)| Segment {
                start: self.starts[k],
                end: self.starts[k] + self.lens[k].to_u64().expect("integral length") - 1,
                value,
            })
            .collect();
        CompressedVector {
            dim: self.rows,
            segments,
        }
    }
}
