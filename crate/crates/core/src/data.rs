//! Boundary data φ on ∂Q: an initial datum on {0}×Ω̄ and, for bounded
//! domains, a lateral datum on (0,∞)×∂Ω.

use std::fmt::Debug;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::quadform::SpdForm;

const FD_STEP: f64 = 1e-6;

/// Data prescribed on the parabolic boundary.
///
/// Implementations must be pure; they are evaluated concurrently.
pub trait BoundaryData: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// u₀(y) for y ∈ Ω̄.
    fn initial(&self, y: &[f64]) -> f64;

    fn initial_gradient(&self, y: &[f64], out: &mut [f64]) {
        let mut z = y.to_vec();
        for i in 0..y.len() {
            let h = FD_STEP * (1.0 + y[i].abs());
            z[i] = y[i] + h;
            let up = self.initial(&z);
            z[i] = y[i] - h;
            let down = self.initial(&z);
            z[i] = y[i];
            out[i] = (up - down) / (2.0 * h);
        }
    }

    fn has_lateral(&self) -> bool;

    /// φ(t,x) for t ≥ 0 and x ∈ ∂Ω. Only called when [`has_lateral`](Self::has_lateral) is true.
    fn lateral(&self, t: f64, x: &[f64]) -> f64;

    /// Writes ∇ₓφ into `out` and returns ∂ₜφ.
    fn lateral_gradient(&self, t: f64, x: &[f64], out: &mut [f64]) -> f64 {
        let mut z = x.to_vec();
        for i in 0..x.len() {
            let h = FD_STEP * (1.0 + x[i].abs());
            z[i] = x[i] + h;
            let up = self.lateral(t, &z);
            z[i] = x[i] - h;
            let down = self.lateral(t, &z);
            z[i] = x[i];
            out[i] = (up - down) / (2.0 * h);
        }
        let h = FD_STEP * (1.0 + t.abs());
        let lo = (t - h).max(0.0);
        (self.lateral(t + h, x) - self.lateral(lo, x)) / (t + h - lo)
    }

    /// Space-time Lipschitz constant `l` of the solution on the region of interest.
    fn lipschitz_bound(&self) -> f64;

    /// A lower bound for u₀, when known in closed form.
    fn lower_bound(&self) -> Option<f64> {
        None
    }

    /// A lower bound for the lateral datum, when known. Lets the search skip
    /// boundary pieces that are too far away to matter.
    fn lateral_lower_bound(&self) -> Option<f64> {
        None
    }
}

/// `u₀(y) = min_i [cᵢ + σ|y − wᵢ|²]`, together with its exact Hopf-Lax evolution
/// `u(t,x) = min_i [cᵢ + ½ (x−wᵢ)·(tA + I/(2σ))⁻¹(x−wᵢ)]`, which also serves as
/// the lateral datum. Restricting a whole-space solution makes the lateral
/// datum compatible by construction.
#[derive(Debug, Clone)]
pub struct QuadraticWells {
    n: usize,
    centers: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    sharpness: f64,
    /// Eigenvectors of A, column-major as columns of `basis`.
    basis: Vec<f64>,
    eigen: Vec<f64>,
    lateral: bool,
    lipschitz: f64,
}

impl QuadraticWells {
    /// `extent` is the diameter of the region on which the Lipschitz bound must hold.
    pub fn new(
        form: &SpdForm,
        centers: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        sharpness: f64,
        extent: f64,
        lateral: bool,
    ) -> Result<Self> {
        let n = form.dim();
        if centers.is_empty() {
            return Err(Error::InvalidInput("at least one well is required".into()));
        }
        check_dim(centers.len(), offsets.len())?;
        for c in &centers {
            check_dim(n, c.len())?;
        }
        if !(sharpness > 0.0) || !sharpness.is_finite() {
            return Err(Error::InvalidInput(format!("sharpness must be > 0, got {sharpness}")));
        }
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, form.matrix()));
        let mut basis = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                basis[k * n + i] = eig.eigenvectors[(i, k)];
            }
        }
        let eigen: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let a_max = eigen.iter().copied().fold(0.0, f64::max);
        // |∇u| ≤ 2σ·extent since (tA + I/2σ)⁻¹ ≤ 2σ; |u_t| = H(∇u).
        let g = 2.0 * sharpness * extent;
        let lipschitz = (g * g + (0.5 * a_max * g * g).powi(2)).sqrt();
        Ok(Self {
            n,
            centers,
            offsets,
            sharpness,
            basis,
            eigen,
            lateral,
            lipschitz,
        })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    /// Closed-form solution value at (t, x).
    pub fn solution(&self, t: f64, x: &[f64]) -> f64 {
        self.best_well(t, x).1
    }

    fn well_value(&self, i: usize, t: f64, x: &[f64]) -> f64 {
        let n = self.n;
        let c = 0.5 / self.sharpness;
        let mut acc = 0.0;
        for k in 0..n {
            let e = &self.basis[k * n..(k + 1) * n];
            let z: f64 = (0..n).map(|j| e[j] * (x[j] - self.centers[i][j])).sum();
            acc += z * z / (t * self.eigen[k] + c);
        }
        self.offsets[i] + 0.5 * acc
    }

    fn best_well(&self, t: f64, x: &[f64]) -> (usize, f64) {
        (0..self.centers.len())
            .map(|i| (i, self.well_value(i, t, x)))
            .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc })
    }

    /// Spatial gradient and time derivative of the active well at (t, x).
    pub fn solution_gradient(&self, t: f64, x: &[f64], out: &mut [f64]) -> f64 {
        let (i, _) = self.best_well(t, x);
        let n = self.n;
        let c = 0.5 / self.sharpness;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut dt = 0.0;
        for k in 0..n {
            let e = &self.basis[k * n..(k + 1) * n];
            let z: f64 = (0..n).map(|j| e[j] * (x[j] - self.centers[i][j])).sum();
            let d = t * self.eigen[k] + c;
            for j in 0..n {
                out[j] += e[j] * z / d;
            }
            dt -= 0.5 * self.eigen[k] * z * z / (d * d);
        }
        dt
    }
}

impl BoundaryData for QuadraticWells {
    fn dim(&self) -> usize {
        self.n
    }

    fn initial(&self, y: &[f64]) -> f64 {
        self.solution(0.0, y)
    }

    fn initial_gradient(&self, y: &[f64], out: &mut [f64]) {
        self.solution_gradient(0.0, y, out);
    }

    fn has_lateral(&self) -> bool {
        self.lateral
    }

    fn lateral(&self, t: f64, x: &[f64]) -> f64 {
        self.solution(t, x)
    }

    fn lateral_gradient(&self, t: f64, x: &[f64], out: &mut [f64]) -> f64 {
        self.solution_gradient(t, x, out)
    }

    fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(self.offsets.iter().copied().fold(f64::INFINITY, f64::min))
    }

    fn lateral_lower_bound(&self) -> Option<f64> {
        self.lower_bound()
    }
}

/// `u₀(y) = c·y + b`; evolves to `c·x + b − tH(c)`.
#[derive(Debug, Clone)]
pub struct Affine {
    slope: Vec<f64>,
    offset: f64,
    energy: f64,
    lateral: bool,
}

impl Affine {
    pub fn new(form: &SpdForm, slope: Vec<f64>, offset: f64, lateral: bool) -> Result<Self> {
        let energy = form.hamiltonian(&slope)?;
        Ok(Self {
            slope,
            offset,
            energy,
            lateral,
        })
    }

    pub fn constant(n: usize, value: f64, lateral: bool) -> Self {
        Self {
            slope: vec![0.0; n],
            offset: value,
            energy: 0.0,
            lateral,
        }
    }

    pub fn solution(&self, t: f64, x: &[f64]) -> f64 {
        dot(&self.slope, x) + self.offset - t * self.energy
    }
}

impl BoundaryData for Affine {
    fn dim(&self) -> usize {
        self.slope.len()
    }

    fn initial(&self, y: &[f64]) -> f64 {
        self.solution(0.0, y)
    }

    fn initial_gradient(&self, _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.slope);
    }

    fn has_lateral(&self) -> bool {
        self.lateral
    }

    fn lateral(&self, t: f64, x: &[f64]) -> f64 {
        self.solution(t, x)
    }

    fn lateral_gradient(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> f64 {
        out.copy_from_slice(&self.slope);
        -self.energy
    }

    fn lipschitz_bound(&self) -> f64 {
        (dot(&self.slope, &self.slope) + self.energy * self.energy).sqrt()
    }

    fn lower_bound(&self) -> Option<f64> {
        self.slope.iter().all(|c| *c == 0.0).then_some(self.offset)
    }
}

/// Values on a tensor-product grid, interpolated multilinearly and clamped outside.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TensorGrid {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidInput("grid needs at least one axis".into()));
        }
        for (k, ax) in axes.iter().enumerate() {
            if ax.len() < 2 {
                return Err(Error::InvalidInput(format!("grid axis {k} needs ≥ 2 nodes")));
            }
            if ax.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!("grid axis {k} is not increasing")));
            }
        }
        let size: usize = axes.iter().map(Vec::len).product();
        check_dim(size, values.len())?;
        Ok(Self { axes, values })
    }

    /// Parses `coord_1,…,coord_d,value` rows. A non-numeric first line is a header.
    pub fn parse_csv(text: &str, coords: usize) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match fields {
                Ok(v) => {
                    if v.len() != coords + 1 {
                        return Err(Error::InvalidInput(format!(
                            "line {}: expected {} columns, found {}",
                            lineno + 1,
                            coords + 1,
                            v.len()
                        )));
                    }
                    rows.push(v);
                }
                Err(_) if rows.is_empty() => continue,
                Err(e) => {
                    return Err(Error::InvalidInput(format!("line {}: {e}", lineno + 1)));
                }
            }
        }
        let mut axes: Vec<Vec<f64>> = (0..coords)
            .map(|k| {
                let mut ax: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                ax.sort_by(f64::total_cmp);
                ax.dedup();
                ax
            })
            .collect();
        axes.iter_mut().for_each(|a| a.shrink_to_fit());
        let size: usize = axes.iter().map(Vec::len).product();
        if size != rows.len() {
            return Err(Error::InvalidInput(format!(
                "grid rows ({}) do not form a full tensor grid ({size} nodes)",
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; size];
        for r in &rows {
            let mut idx = 0;
            for (k, ax) in axes.iter().enumerate() {
                let i = ax.binary_search_by(|v| v.total_cmp(&r[k])).expect("axis node");
                idx = idx * ax.len() + i;
            }
            values[idx] = r[coords];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("duplicate grid nodes".into()));
        }
        Self::new(axes, values)
    }

    pub fn read_csv(path: &Path, coords: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::parse_csv(&text, coords)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let d = self.axes.len();
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for (ax, v) in self.axes.iter().zip(z) {
            let v = v.clamp(ax[0], ax[ax.len() - 1]);
            let i = match ax.binary_search_by(|a| a.total_cmp(&v)) {
                Ok(i) => i.min(ax.len() - 2),
                Err(i) => (i.max(1) - 1).min(ax.len() - 2),
            };
            base.push(i);
            frac.push((v - ax[i]) / (ax[i + 1] - ax[i]));
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx = idx * self.axes[k].len() + base[k] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    /// Largest per-axis difference quotient, times √d.
    pub fn lipschitz(&self) -> f64 {
        let d = self.axes.len();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.axes[k + 1].len();
        }
        let mut best: f64 = 0.0;
        for idx in 0..self.values.len() {
            let mut rem = idx;
            for k in 0..d {
                let i = (rem / strides[k]) % self.axes[k].len();
                if i + 1 < self.axes[k].len() {
                    let dv = (self.values[idx + strides[k]] - self.values[idx]).abs();
                    best = best.max(dv / (self.axes[k][i + 1] - self.axes[k][i]));
                }
                rem %= strides[k];
            }
        }
        best * (d as f64).sqrt()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Data read from sampled grids: u₀ on an n-dimensional grid, φ on an (n+1)-dimensional
/// grid over (t, x).
#[derive(Debug, Clone)]
pub struct GridData {
    initial: TensorGrid,
    lateral: Option<TensorGrid>,
    lipschitz: f64,
}

impl GridData {
    pub fn new(initial: TensorGrid, lateral: Option<TensorGrid>) -> Result<Self> {
        if let Some(l) = &lateral {
            check_dim(initial.dim() + 1, l.dim())?;
        }
        let lipschitz = initial
            .lipschitz()
            .max(lateral.as_ref().map_or(0.0, TensorGrid::lipschitz));
        Ok(Self {
            initial,
            lateral,
            lipschitz,
        })
    }
}

impl BoundaryData for GridData {
    fn dim(&self) -> usize {
        self.initial.dim()
    }

    fn initial(&self, y: &[f64]) -> f64 {
        self.initial.eval(y)
    }

    fn has_lateral(&self) -> bool {
        self.lateral.is_some()
    }

    fn lateral(&self, t: f64, x: &[f64]) -> f64 {
        let grid = self.lateral.as_ref().expect("lateral grid");
        let mut z = Vec::with_capacity(x.len() + 1);
        z.push(t);
        z.extend_from_slice(x);
        grid.eval(&z)
    }

    fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(self.initial.min_value())
    }

    fn lateral_lower_bound(&self) -> Option<f64> {
        self.lateral.as_ref().map(TensorGrid::min_value)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
