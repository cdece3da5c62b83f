//! Cell meshes on `[0, 1]` and piecewise-constant functions on them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const GAUSS8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GAUSS8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// 8-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss8<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GAUSS8_NODES.iter().zip(GAUSS8_WEIGHTS.iter()) {
        acc += w * (f(c - h * x) + f(c + h * x));
    }
    acc * h
}

/// Cell spacing of a mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grading", rename_all = "kebab-case")]
pub enum Grading {
    Uniform,
    /// Uniform cells of width `1/cells` away from 0, then cells shrinking
    /// geometrically by `ratio` toward 0 until they would drop below
    /// `min_width`.
    Geometric { ratio: f64, min_width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub cells: usize,
    #[serde(flatten)]
    pub grading: Grading,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            cells: 1024,
            grading: Grading::Geometric {
                ratio: 0.97,
                min_width: 1e-8,
            },
        }
    }
}

impl MeshSpec {
    pub fn uniform(cells: usize) -> Self {
        MeshSpec {
            cells,
            grading: Grading::Uniform,
        }
    }

    pub fn build(&self) -> Result<Arc<Mesh>> {
        match self.grading {
            Grading::Uniform => Mesh::uniform(self.cells),
            Grading::Geometric { ratio, min_width } => Mesh::graded(self.cells, ratio, min_width),
        }
    }
}

/// Strictly increasing cell boundaries `0 = b_0 < ... < b_M = 1`.
#[derive(Debug, PartialEq)]
pub struct Mesh {
    bounds: Vec<f64>,
    key: String,
}

impl Mesh {
    pub fn from_bounds(bounds: Vec<f64>) -> Result<Arc<Mesh>> {
        if bounds.len() < 2 || bounds[0] != 0.0 || *bounds.last().unwrap() != 1.0 {
            return Err(Error::Mesh("bounds must start at 0 and end at 1".into()));
        }
        for (index, w) in bounds.windows(2).enumerate() {
            let width = w[1] - w[0];
            if !(width > 0.0) {
                return Err(Error::DegenerateCell { index, width });
            }
        }
        let mut hasher = Sha256::new();
        for b in &bounds {
            hasher.update(b.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        let key = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(Arc::new(Mesh { bounds, key }))
    }

    pub fn uniform(cells: usize) -> Result<Arc<Mesh>> {
        if cells == 0 {
            return Err(Error::Mesh("mesh needs at least one cell".into()));
        }
        let bounds = (0..=cells).map(|k| k as f64 / cells as f64).collect();
        Mesh::from_bounds(bounds)
    }

    pub fn graded(cells: usize, ratio: f64, min_width: f64) -> Result<Arc<Mesh>> {
        if cells < 2 {
            return Err(Error::Mesh("graded mesh needs at least two cells".into()));
        }
        if !(ratio > 0.0 && ratio < 1.0) || !(min_width > 0.0) {
            return Err(Error::Mesh(format!(
                "invalid grading ratio {ratio} / min width {min_width}"
            )));
        }
        let h = 1.0 / cells as f64;
        let shrink = 1.0 - ratio;
        // geometric cells start once they are no wider than h
        let k_switch = ((1.0 / shrink).floor() as usize).clamp(1, cells);
        let mut desc: Vec<f64> = (k_switch..=cells).rev().map(|k| k as f64 * h).collect();
        let mut b = k_switch as f64 * h;
        while shrink * ratio * b >= min_width {
            b *= ratio;
            desc.push(b);
        }
        desc.push(0.0);
        desc.reverse();
        Mesh::from_bounds(desc)
    }

    #[inline]
    /// Splits every cell at its midpoint.
    pub fn bisected(&self) -> Result<Arc<Mesh>> {
        let mut bounds = Vec::with_capacity(2 * self.bounds.len() - 1);
        for w in self.bounds.windows(2) {
            bounds.extend([w[0], 0.5 * (w[0] + w[1])]);
        }
        bounds.push(1.0);
        Mesh::from_bounds(bounds)
    }

    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    #[inline]
    pub fn width(&self, k: usize) -> f64 {
        self.bounds[k + 1] - self.bounds[k]
    }

    #[inline]
    pub fn left(&self, k: usize) -> f64 {
        self.bounds[k]
    }

    #[inline]
    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.bounds[k] + self.bounds[k + 1])
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bounds.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Hex digest of the boundaries.
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Index of the cell containing `x`; `x = 1` maps to the last cell.
    pub fn locate(&self, x: f64) -> usize {
        let k = self.bounds.partition_point(|&b| b <= x);
        k.clamp(1, self.len()) - 1
    }

    /// Composite midpoint rule with four sub-points per cell.
    pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(&self, f: &F) -> f64 {
        const SUB: usize = 4;
        let mut acc = 0.0;
        for w in self.bounds.windows(2) {
            let h = (w[1] - w[0]) / SUB as f64;
            let mut cell = 0.0;
            for s in 0..SUB {
                cell += f(w[0] + (s as f64 + 0.5) * h);
            }
            acc += cell * h;
        }
        acc
    }
}

/// A signed piecewise-constant function given by its cell averages.
#[derive(Clone, Debug)]
pub struct CellFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl CellFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch);
        }
        Ok(CellFunction { mesh, values })
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let values = vec![c; mesh.len()];
        CellFunction { mesh, values }
    }

    /// Cell averages of `f`, by Gauss-Legendre on each cell.
    pub fn from_fn<F: Fn(f64) -> f64 + ?Sized>(mesh: Arc<Mesh>, f: &F) -> Self {
        let values = (0..mesh.len())
            .map(|k| gauss8(f, mesh.left(k), mesh.left(k + 1)) / mesh.width(k))
            .collect();
        CellFunction { mesh, values }
    }

    #[inline]
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_mesh(&self, other: &CellFunction) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.key() == other.mesh.key()
    }

    /// Cell average at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.mesh.locate(x)]
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v * self.mesh.width(k))
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v.abs() * self.mesh.width(k))
            .sum()
    }

    /// `int f g dm` for a function `g` given through its integrals over cells.
    pub fn pair_with_cell_integrals(&self, cell_integrals: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(cell_integrals)
            .map(|(v, g)| v * g)
            .sum()
    }

    pub fn sub(&self, other: &CellFunction) -> Result<CellFunction> {
        if !self.same_mesh(other) {
            return Err(Error::MeshMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CellFunction {
            mesh: self.mesh.clone(),
            values,
        })
    }

    pub fn scaled(&self, c: f64) -> CellFunction {
        CellFunction {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `int_a^b f dm` for `0 <= a <= b <= 1`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut k = self.mesh.locate(a);
        self.mass_from(&mut k, a, b)
    }

    /// Masses between consecutive entries of the nondecreasing sequence `pts`.
    pub fn partition_masses(&self, pts: &[f64]) -> Vec<f64> {
        if pts.len() < 2 {
            return Vec::new();
        }
        let mut k = self.mesh.locate(pts[0]);
        pts.windows(2)
            .map(|w| self.mass_from(&mut k, w[0], w[1]))
            .collect()
    }

    // `k` must be the cell containing `a`; on return it holds the cell containing `b`.
    #[inline]
    fn mass_from(&self, k: &mut usize, a: f64, b: f64) -> f64 {
        let bounds = self.mesh.bounds();
        let last = self.values.len() - 1;
        let mut x = a;
        let mut mass = 0.0;
        while *k < last && bounds[*k + 1] <= b {
            mass += self.values[*k] * (bounds[*k + 1] - x);
            x = bounds[*k + 1];
            *k += 1;
        }
        mass + self.values[*k] * (b - x).max(0.0)
    }
}

/// A nonnegative [`CellFunction`] with its total mass cached.
#[derive(Clone, Debug)]
pub struct Density {
    f: CellFunction,
    total_mass: f64,
}

impl Density {
    pub fn new(f: CellFunction) -> Result<Self> {
        if let Some((k, v)) = f.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::Domain(format!("density negative ({v}) in cell {k}")));
        }
        let total_mass = f.integral();
        Ok(Density { f, total_mass })
    }

    /// Like [`Density::new`], but clears negative roundoff no larger than
    /// `1e-12` times the largest value.
    pub fn from_pushforward(mut f: CellFunction) -> Result<Self> {
        let scale = f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for v in f.values.iter_mut() {
            if *v < 0.0 && *v >= -1e-12 * scale {
                *v = 0.0;
            }
        }
        Density::new(f)
    }

    pub fn uniform(mesh: Arc<Mesh>) -> Self {
        Density {
            f: CellFunction::constant(mesh, 1.0),
            total_mass: 1.0,
        }
    }

    pub fn from_fn<F: Fn(f64) -> f64 + ?Sized>(mesh: Arc<Mesh>, f: &F) -> Result<Self> {
        Density::new(CellFunction::from_fn(mesh, f))
    }

    #[inline]
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    #[inline]
    pub fn as_cells(&self) -> &CellFunction {
        &self.f
    }

    pub fn into_cells(self) -> CellFunction {
        self.f
    }

    #[inline]
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.f.mesh()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        self.f.values()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.f.eval(x)
    }

    /// Rescaled copy with unit mass.
    pub fn normalized(&self) -> Density {
        let f = self.f.scaled(1.0 / self.total_mass);
        let total_mass = f.integral();
        Density { f, total_mass }
    }

    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.f.interval_mass(a, b)
    }
}
