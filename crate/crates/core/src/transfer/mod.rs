//! Transfer operators of LSV maps acting on densities.
//!
//! Three discretizations are provided:
//!
//! * [`pf_apply`] pushes a [`CellFunction`] forward exactly, by integrating it
//!   over the two branch preimages of every target cell.
//! * [`UlamOperator`] stores the same map as a sparse cell-to-cell matrix,
//!   which is cheaper when one exponent is applied many times.
//! * [`pf_apply_fn`] and [`push_fn_exact`] act on pointwise functions and
//!   return the exact cell averages of the result (up to quadrature).

mod bump;
mod cone;
mod memory;

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{LsvMap, ParameterSchedule};
use crate::mesh::{gauss8, CellFunction, Density, Mesh};

pub use bump::{bump_chi, BumpFunction, BumpProfile};
pub use cone::{cone_check, density_bounds_check, BoundsReport, ConeParams, ConeReport, DEFAULT_CONE_A};
pub use memory::{cone_step_surrogate, loss_of_memory_distance, memory_decay_slope, LossOfMemory};

/// Pointwise `P f(x) = f(y_L) / T'(y_L) + f(y_R) / 2`.
pub fn pf_pointwise<F: Fn(f64) -> f64 + ?Sized>(map: &LsvMap, f: &F, x: f64) -> f64 {
    let yl = map.left_inverse(x);
    let yr = map.right_inverse(x);
    f(yl) / map.derivative(yl) + 0.5 * f(yr)
}

/// Branch preimages of every mesh boundary.
#[derive(Clone, Debug)]
pub struct PreimageTable {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl PreimageTable {
    pub fn new(map: &LsvMap, mesh: &Mesh) -> Self {
        let b = mesh.bounds();
        let mut left: Vec<f64> = b.iter().map(|&y| map.left_inverse(y)).collect();
        // keep the sequence monotone despite solver roundoff
        for k in 1..left.len() {
            if left[k] < left[k - 1] {
                left[k] = left[k - 1];
            }
        }
        let right = b.iter().map(|&y| map.right_inverse(y)).collect();
        PreimageTable { left, right }
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    fn push(&self, f: &CellFunction) -> CellFunction {
        let mesh = f.mesh();
        let ml = f.partition_masses(&self.left);
        let mr = f.partition_masses(&self.right);
        let values = (0..mesh.len())
            .map(|j| (ml[j] + mr[j]) / mesh.width(j))
            .collect();
        CellFunction::new(mesh.clone(), values).expect("lengths agree")
    }
}

/// `P_alpha f` for a piecewise-constant `f`, projected onto the mesh of `f`.
pub fn pf_apply(alpha: f64, f: &CellFunction) -> Result<CellFunction> {
    let map = LsvMap::new(alpha)?;
    Ok(PreimageTable::new(&map, f.mesh()).push(f))
}

/// Cell averages of `P_alpha f` for a pointwise `f`.
pub fn pf_apply_fn<F>(alpha: f64, f: &F, mesh: &Arc<Mesh>) -> Result<CellFunction>
where
    F: Fn(f64) -> f64 + Sync + ?Sized,
{
    let map = LsvMap::new(alpha)?;
    let table = PreimageTable::new(&map, mesh);
    let values = (0..mesh.len())
        .into_par_iter()
        .map(|j| {
            let mass = gauss8(f, table.left[j], table.left[j + 1])
                + gauss8(f, table.right[j], table.right[j + 1]);
            mass / mesh.width(j)
        })
        .collect();
    CellFunction::new(mesh.clone(), values)
}

/// Cell averages of `P_n ... P_1 f` for a pointwise `f`, integrating `f`
/// over all `2^n` preimages of each cell. Cost grows like `2^n`.
pub fn push_fn_exact<F>(schedule: &ParameterSchedule, f: &F, n: usize, mesh: &Arc<Mesh>) -> Result<CellFunction>
where
    F: Fn(f64) -> f64 + Sync + ?Sized,
{
    if n > 24 {
        return Err(Error::InvalidArgument(format!(
            "exact push of {n} steps would need 2^{n} intervals per cell"
        )));
    }
    let maps = schedule.maps(n)?;
    // pulled-back partition points with the target cell of the interval to their right
    let mut points: Vec<f64> = mesh.bounds().to_vec();
    let mut labels: Vec<usize> = (0..mesh.len()).collect();
    for map in maps.iter().rev() {
        let mut next_points = Vec::with_capacity(2 * points.len());
        let mut next_labels = Vec::with_capacity(2 * labels.len());
        next_points.extend(points.iter().map(|&y| map.left_inverse(y)));
        next_labels.extend_from_slice(&labels);
        // the left branch ends at 1/2 where the right branch starts
        next_points.pop();
        next_points.extend(points.iter().map(|&y| map.right_inverse(y)));
        next_labels.extend_from_slice(&labels);
        points = next_points;
        labels = next_labels;
    }
    let pieces: Vec<(usize, f64)> = (0..labels.len())
        .into_par_iter()
        .map(|k| (labels[k], gauss8(f, points[k], points[k + 1])))
        .collect();
    let mut mass = vec![0.0; mesh.len()];
    for (j, m) in pieces {
        mass[j] += m;
    }
    let values = mass
        .iter()
        .enumerate()
        .map(|(j, m)| m / mesh.width(j))
        .collect();
    CellFunction::new(mesh.clone(), values)
}

/// Sparse Ulam discretization of `P_alpha` on a mesh.
///
/// Row `i` holds the fraction of cell `i` mapped into each cell `j`. The
/// transpose, scaled by source widths, is kept for parallel application over
/// target cells.
#[derive(Debug)]
pub struct UlamOperator {
    alpha: f64,
    mesh: Arc<Mesh>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    overlaps: Vec<f64>,
}

/// Builds the Ulam matrix of `T_alpha` on `mesh`.
pub fn ulam_matrix(alpha: f64, mesh: &Arc<Mesh>) -> Result<UlamOperator> {
    let map = LsvMap::new(alpha)?;
    for (index, width) in mesh.widths().into_iter().enumerate() {
        if !(width > 0.0) {
            return Err(Error::DegenerateCell { index, width });
        }
    }
    let table = PreimageTable::new(&map, mesh);
    let b = mesh.bounds();
    let m = mesh.len();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(4 * m);
    for pre in [table.left(), table.right()] {
        // two-pointer sweep over source cells and preimage intervals
        let (mut i, mut j) = (mesh.locate(pre[0]), 0usize);
        while i < m && j < m {
            let lo = b[i].max(pre[j]);
            let hi = b[i + 1].min(pre[j + 1]);
            if hi > lo {
                triplets.push((i, j, hi - lo));
            }
            if b[i + 1] <= pre[j + 1] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    triplets.sort_by_key(|a| (a.0, a.1));
    triplets.dedup_by(|next, prev| {
        if next.0 == prev.0 && next.1 == prev.1 {
            prev.2 += next.2;
            true
        } else {
            false
        }
    });

    let mut row_ptr = vec![0usize; m + 1];
    for &(i, _, _) in &triplets {
        row_ptr[i + 1] += 1;
    }
    for i in 0..m {
        row_ptr[i + 1] += row_ptr[i];
    }
    let cols = triplets.iter().map(|t| t.1).collect();
    let weights = triplets.iter().map(|t| t.2 / mesh.width(t.0)).collect();

    let mut by_col = triplets.clone();
    by_col.sort_by_key(|a| (a.1, a.0));
    let mut col_ptr = vec![0usize; m + 1];
    for &(_, j, _) in &by_col {
        col_ptr[j + 1] += 1;
    }
    for j in 0..m {
        col_ptr[j + 1] += col_ptr[j];
    }
    let rows = by_col.iter().map(|t| t.0).collect();
    let overlaps = by_col.iter().map(|t| t.2).collect();

    Ok(UlamOperator {
        alpha,
        mesh: mesh.clone(),
        row_ptr,
        cols,
        weights,
        col_ptr,
        rows,
        overlaps,
    })
}

impl UlamOperator {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Nonzero entries `(j, weight)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.mesh.len())
            .map(|i| self.row(i).map(|(_, w)| w).sum())
            .collect()
    }

    pub fn apply(&self, f: &CellFunction) -> Result<CellFunction> {
        if !(Arc::ptr_eq(&self.mesh, f.mesh()) || self.mesh.key() == f.mesh().key()) {
            return Err(Error::MeshMismatch);
        }
        let v = f.values();
        let values = (0..self.mesh.len())
            .into_par_iter()
            .map(|j| {
                let r = self.col_ptr[j]..self.col_ptr[j + 1];
                let mass: f64 = self.rows[r.clone()]
                    .iter()
                    .zip(&self.overlaps[r])
                    .map(|(&i, &len)| v[i] * len)
                    .sum();
                mass / self.mesh.width(j)
            })
            .collect();
        CellFunction::new(self.mesh.clone(), values)
    }

    /// Fixed density of the matrix by power iteration from the uniform density.
    pub fn stationary_density(&self, max_iter: usize, tol: f64) -> Result<Density> {
        let mut f = CellFunction::constant(self.mesh.clone(), 1.0);
        for _ in 0..max_iter {
            let next = self.apply(&f)?;
            let change = next.sub(&f)?.l1_norm();
            f = next;
            if change < tol {
                break;
            }
        }
        Density::from_pushforward(f)
    }

    /// Flattened `(row_ptr, cols, weights)` for persistence.
    pub fn to_raw(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        (self.row_ptr.clone(), self.cols.clone(), self.weights.clone())
    }

    /// Rebuilds an operator from [`UlamOperator::to_raw`] output.
    pub fn from_raw(alpha: f64, mesh: &Arc<Mesh>, row_ptr: Vec<usize>, cols: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let m = mesh.len();
        let valid = row_ptr.len() == m + 1
            && row_ptr[0] == 0
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && row_ptr[m] == cols.len()
            && cols.len() == weights.len()
            && cols.iter().all(|&j| j < m);
        if !valid {
            return Err(Error::CacheCorruption("inconsistent sparse matrix".into()));
        }
        let mut by_col: Vec<(usize, usize, f64)> = Vec::with_capacity(cols.len());
        for i in 0..m {
            for k in row_ptr[i]..row_ptr[i + 1] {
                by_col.push((i, cols[k], weights[k] * mesh.width(i)));
            }
        }
        by_col.sort_by_key(|a| (a.1, a.0));
        let mut col_ptr = vec![0usize; m + 1];
        for &(_, j, _) in &by_col {
            col_ptr[j + 1] += 1;
        }
        for j in 0..m {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(UlamOperator {
            alpha,
            mesh: mesh.clone(),
            row_ptr,
            cols,
            weights,
            col_ptr,
            rows: by_col.iter().map(|t| t.0).collect(),
            overlaps: by_col.iter().map(|t| t.2).collect(),
        })
    }
}

/// How [`Pusher`] applies each transfer operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PushMethod {
    /// Preimage tables rebuilt every step.
    Exact,
    /// Cached sparse matrices, one per distinct exponent.
    Ulam,
    /// Ulam for constant and periodic schedules, exact otherwise.
    #[default]
    Auto,
}

impl PushMethod {
    /// Whether pushes along `schedule` go through Ulam matrices.
    pub fn uses_ulam(self, schedule: &ParameterSchedule) -> bool {
        match self {
            PushMethod::Exact => false,
            PushMethod::Ulam => true,
            PushMethod::Auto => !matches!(
                schedule.mode(),
                crate::maps::ScheduleMode::IidUniform { .. } | crate::maps::ScheduleMode::ExplicitList { .. }
            ),
        }
    }
}

/// Shared store of Ulam matrices keyed by the bits of the exponent.
#[derive(Debug, Default)]
pub struct UlamCache {
    matrices: HashMap<u64, Arc<UlamOperator>>,
}

impl UlamCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&mut self, alpha: f64, mesh: &Arc<Mesh>) -> Result<Arc<UlamOperator>> {
        if let Some(op) = self.matrices.get(&alpha.to_bits()) {
            if op.mesh.key() == mesh.key() {
                return Ok(op.clone());
            }
        }
        let op = Arc::new(ulam_matrix(alpha, mesh)?);
        self.matrices.insert(alpha.to_bits(), op.clone());
        Ok(op)
    }

    pub fn insert(&mut self, op: UlamOperator) {
        self.matrices.insert(op.alpha.to_bits(), Arc::new(op));
    }

    pub fn operators(&self) -> impl Iterator<Item = &Arc<UlamOperator>> {
        self.matrices.values()
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

/// Step-by-step application of `P_1, P_2, ...` to a signed cell function.
pub struct Pusher<'a> {
    schedule: &'a ParameterSchedule,
    use_ulam: bool,
    cache: UlamCache,
    step: usize,
    current: CellFunction,
}

impl<'a> Pusher<'a> {
    pub fn new(schedule: &'a ParameterSchedule, f0: CellFunction, method: PushMethod) -> Self {
        Pusher {
            schedule,
            use_ulam: method.uses_ulam(schedule),
            cache: UlamCache::new(),
            step: 0,
            current: f0,
        }
    }

    /// Reuses matrices built elsewhere.
    pub fn with_cache(mut self, cache: UlamCache) -> Self {
        self.cache = cache;
        self
    }

    /// Treats the initial function as given at time `step`, so the next
    /// operator applied is `P_{step+1}`.
    pub fn starting_at(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    pub fn into_cache(self) -> UlamCache {
        self.cache
    }

    /// Number of operators applied so far.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn current(&self) -> &CellFunction {
        &self.current
    }

    /// Applies the next operator and returns the new function.
    pub fn advance(&mut self) -> Result<&CellFunction> {
        let alpha = self.schedule.alpha(self.step)?;
        let next = if self.use_ulam {
            let op = self.cache.get_or_build(alpha, self.current.mesh())?;
            op.apply(&self.current)?
        } else {
            pf_apply(alpha, &self.current)?
        };
        self.current = next;
        self.step += 1;
        Ok(&self.current)
    }

    /// Swaps in a corrected function at the current step.
    pub fn replace(&mut self, f: CellFunction) {
        self.current = f;
    }

    /// Multiplies the current function by `c`; the operators are linear.
    pub fn rescale(&mut self, c: f64) {
        self.current = self.current.scaled(c);
    }
}

/// `(Pi_0 f0, Pi_1 f0, ..., Pi_n f0)`.
pub fn push_density(schedule: &ParameterSchedule, f0: &Density, n: usize, method: PushMethod) -> Result<Vec<Density>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(f0.clone());
    let mut pusher = Pusher::new(schedule, f0.as_cells().clone(), method);
    for _ in 0..n {
        let f = pusher.advance()?.clone();
        out.push(Density::from_pushforward(f)?);
    }
    Ok(out)
}

/// Writes `left,width,value` rows for each cell.
pub fn write_density_csv<W: Write>(f: &CellFunction, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["left", "width", "value"])?;
    let mesh = f.mesh();
    for (k, v) in f.values().iter().enumerate() {
        w.write_record([
            format!("{:e}", mesh.left(k)),
            format!("{:e}", mesh.width(k)),
            format!("{:e}", v),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;
    use approx::assert_relative_eq;

    fn graded() -> Arc<Mesh> {
        MeshSpec::default().build().unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let f = CellFunction::constant(graded(), 0.0);
        let g = pf_apply(0.1, &f).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mass_is_conserved() {
        let mesh = graded();
        let f = CellFunction::constant(mesh.clone(), 1.0);
        for &a in &[0.01, 0.1, 1.0 / 7.0] {
            let g = pf_apply(a, &f).unwrap();
            assert!((g.integral() - 1.0).abs() <= 1e-12, "{}", g.integral());
        }
    }

    #[test]
    fn ulam_rows_are_stochastic() {
        let mesh = graded();
        let op = ulam_matrix(1.0 / 7.0, &mesh).unwrap();
        for (i, s) in op.row_sums().into_iter().enumerate() {
            assert!((s - 1.0).abs() <= 1e-10, "row {i}: {s}");
        }
        for i in 0..mesh.len() {
            assert!(op.row(i).all(|(_, w)| (0.0..=1.0 + 1e-15).contains(&w)));
        }
    }

    #[test]
    fn right_branch_cell_has_single_entry() {
        let mesh = Mesh::uniform(8).unwrap();
        let op = ulam_matrix(0.1, &mesh).unwrap();
        // [1/2, 5/8) maps onto [0, 2/8), two cells
        let row: Vec<_> = op.row(4).collect();
        assert_eq!(row.len(), 2);
        let fine = Mesh::from_bounds(vec![0.0, 0.25, 0.5, 0.75, 0.875, 1.0]).unwrap();
        let op = ulam_matrix(0.1, &fine).unwrap();
        let row: Vec<_> = op.row(3).collect();
        assert_eq!(row, vec![(2, 1.0)]);
    }

    #[test]
    fn ulam_agrees_with_preimage_push() {
        let mesh = graded();
        let f = CellFunction::from_fn(mesh.clone(), &|x: f64| 1.0 + (3.0 * x).sin());
        let a = pf_apply(0.1, &f).unwrap();
        let b = ulam_matrix(0.1, &mesh).unwrap().apply(&f).unwrap();
        assert!(a.sub(&b).unwrap().l1_norm() < 1e-13);
    }

    #[test]
    fn mesh_mismatch_is_reported() {
        let op = ulam_matrix(0.1, &Mesh::uniform(16).unwrap()).unwrap();
        let f = CellFunction::constant(Mesh::uniform(32).unwrap(), 1.0);
        assert!(matches!(op.apply(&f), Err(Error::MeshMismatch)));
    }

    #[test]
    fn raw_round_trip() {
        let mesh = Mesh::uniform(64).unwrap();
        let op = ulam_matrix(0.1, &mesh).unwrap();
        let (r, c, w) = op.to_raw();
        let back = UlamOperator::from_raw(0.1, &mesh, r, c, w).unwrap();
        let f = CellFunction::from_fn(mesh.clone(), &|x: f64| x * x);
        assert!(op.apply(&f).unwrap().sub(&back.apply(&f).unwrap()).unwrap().l1_norm() < 1e-15);
    }

    #[test]
    fn pointwise_and_cell_pushes_agree_for_constants() {
        let mesh = graded();
        let f = pf_apply_fn(0.1, &|_| 1.0, &mesh).unwrap();
        let g = pf_apply(0.1, &CellFunction::constant(mesh, 1.0)).unwrap();
        assert!(f.sub(&g).unwrap().l1_norm() < 1e-12);
        let map = LsvMap::new(0.1).unwrap();
        assert_relative_eq!(pf_pointwise(&map, &|_| 1.0, 0.75), 0.5 + 1.0 / map.derivative(map.left_inverse(0.75)));
    }

    #[test]
    fn exact_push_matches_single_step() {
        let mesh = Mesh::uniform(64).unwrap();
        let s = ParameterSchedule::constant(0.1).unwrap();
        let f = |x: f64| (2.0 * x).cos() + 1.5;
        let one = push_fn_exact(&s, &f, 1, &mesh).unwrap();
        let direct = pf_apply_fn(0.1, &f, &mesh).unwrap();
        assert!(one.sub(&direct).unwrap().l1_norm() < 1e-14);
        let zero = push_fn_exact(&s, &f, 0, &mesh).unwrap();
        assert!(zero.sub(&CellFunction::from_fn(mesh, &f)).unwrap().l1_norm() < 1e-14);
    }

    #[test]
    fn push_density_starts_with_input() {
        let mesh = graded();
        let s = ParameterSchedule::constant(0.1).unwrap();
        let ladder = push_density(&s, &Density::uniform(mesh), 3, PushMethod::Auto).unwrap();
        assert_eq!(ladder.len(), 4);
        assert!(ladder[0].values().iter().all(|&v| v == 1.0));
        for d in &ladder {
            assert!((d.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_csv_has_one_row_per_cell() {
        let mesh = Mesh::uniform(4).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&CellFunction::constant(mesh, 1.0), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("left,width,value\n"));
    }
}
