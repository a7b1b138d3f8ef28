//! Reference measures, probability densities and observables on a discretized
//! phase space.
//!
//! A [`QuadratureMeasure`] is a finite set of nodes with positive weights; every
//! integral against the reference measure becomes a weighted sum. A
//! [`Density`] stores the Radon–Nikodym derivative `f` of a probability
//! measure against that reference, so `Σ f(xᵢ)·wᵢ = 1`.
//!
//! The entropy convention is `S(ρ) = −∫ f log f dν₀` with `0·log 0 = 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::interp::periodic_bicubic;

/// Allowed deviation of a density's mass from one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Nodes and positive weights approximating a reference measure on `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureMeasure {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl QuadratureMeasure {
    /// Builds a measure from `dim`-dimensional nodes stored contiguously.
    pub fn from_flat(dim: usize, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("measure dimension must be positive".into()));
        }
        check_len(weights.len() * dim, nodes.len())?;
        if weights.is_empty() {
            return Err(Error::Input("measure has no nodes".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Input(format!("weight {w} is not positive")));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("node coordinate is not finite".into()));
        }
        let total_mass = weights.iter().sum();
        Ok(Self {
            dim,
            nodes,
            weights,
            total_mass,
        })
    }

    pub fn new(dim: usize, nodes: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_len(weights.len(), nodes.len())?;
        let mut flat = Vec::with_capacity(nodes.len() * dim);
        for n in &nodes {
            check_len(dim, n.len())?;
            flat.extend_from_slice(n);
        }
        Self::from_flat(dim, flat, weights)
    }

    /// One-dimensional midpoint rule with `n` cells on `[lo, hi]`.
    pub fn midpoint(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(hi > lo) {
            return Err(Error::Input(format!("bad midpoint rule [{lo}, {hi}] x {n}")));
        }
        let h = (hi - lo) / n as f64;
        let nodes = (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect();
        Self::from_flat(1, nodes, vec![h; n])
    }

    /// Tensor product `self × other`; nodes of `other` vary fastest.
    pub fn tensor_product(&self, other: &QuadratureMeasure) -> QuadratureMeasure {
        let dim = self.dim + other.dim;
        let mut nodes = Vec::with_capacity(self.len() * other.len() * dim);
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                nodes.extend_from_slice(self.node(i));
                nodes.extend_from_slice(other.node(j));
                weights.push(self.weights[i] * other.weights[j]);
            }
        }
        let total_mass = weights.iter().sum();
        QuadratureMeasure {
            dim,
            nodes,
            weights,
            total_mass,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Pointwise evaluation of `f` at every node.
    pub fn observable<F: Fn(&[f64]) -> f64>(&self, label: &str, f: F) -> Result<Observable> {
        Observable::new(label, self.nodes().map(f).collect())
    }

    /// The coordinate function `x ↦ x[axis]`.
    pub fn coordinate(&self, axis: usize) -> Result<Observable> {
        if axis >= self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: axis + 1,
            });
        }
        self.observable(&format!("x{axis}"), |x| x[axis])
    }

    pub fn to_document(&self) -> MeasureDocument {
        MeasureDocument {
            dim: self.dim,
            nodes: self.nodes().map(<[f64]>::to_vec).collect(),
            weights: self.weights.clone(),
            values: None,
        }
    }
}

/// A probability density `f = dρ/dν₀` sampled at the nodes of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    measure: Arc<QuadratureMeasure>,
    values: Vec<f64>,
}

impl Density {
    /// Validates nonnegativity and unit mass.
    pub fn new(measure: Arc<QuadratureMeasure>, values: Vec<f64>) -> Result<Self> {
        check_len(measure.len(), values.len())?;
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Input(format!("density value {v} is negative or not finite")));
        }
        let mass = weighted_sum(&values, measure.weights());
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization { mass });
        }
        Ok(Self { measure, values })
    }

    /// The constant density `1 / total_mass`.
    pub fn uniform(measure: Arc<QuadratureMeasure>) -> Self {
        let v = 1.0 / measure.total_mass();
        let values = vec![v; measure.len()];
        Self { measure, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measure(&self) -> &Arc<QuadratureMeasure> {
        &self.measure
    }

    pub fn mass(&self) -> f64 {
        weighted_sum(&self.values, self.measure.weights())
    }

    pub fn to_document(&self) -> MeasureDocument {
        let mut doc = self.measure.to_document();
        doc.values = Some(self.values.clone());
        doc
    }
}

/// Pointwise values of a real function on the nodes of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub label: String,
    values: Vec<f64>,
}

impl Observable {
    pub fn new(label: &str, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("observable {label} has non-finite values")));
        }
        Ok(Self {
            label: label.to_string(),
            values,
        })
    }

    pub fn constant(label: &str, c: f64, len: usize) -> Result<Self> {
        Self::new(label, vec![c; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &Observable, b: f64) -> Result<Observable> {
        check_len(self.len(), other.len())?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Observable::new(&format!("{a}*{}+{b}*{}", self.label, other.label), values)
    }
}

/// Serialized form of a measure, optionally carrying density values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDocument {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl MeasureDocument {
    pub fn to_measure(&self) -> Result<QuadratureMeasure> {
        QuadratureMeasure::new(self.dim, self.nodes.clone(), self.weights.clone())
    }

    pub fn to_density(&self) -> Result<Density> {
        let values = self
            .values
            .clone()
            .ok_or_else(|| Error::Input("document has no density values".into()))?;
        Density::new(Arc::new(self.to_measure()?), values)
    }
}

fn weighted_sum(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// `Σ g(xᵢ)·wᵢ`
pub fn integrate(m: &QuadratureMeasure, g: &Observable) -> Result<f64> {
    check_len(m.len(), g.len())?;
    Ok(weighted_sum(g.values(), m.weights()))
}

/// `⟨F⟩_ρ = Σ F(xᵢ)·f(xᵢ)·wᵢ`
pub fn expectation(rho: &Density, observable: &Observable) -> Result<f64> {
    check_len(rho.values.len(), observable.len())?;
    Ok(rho
        .values
        .iter()
        .zip(observable.values())
        .zip(rho.measure.weights())
        .map(|((f, x), w)| f * x * w)
        .sum())
}

/// `−Σ f log f · w`, skipping nodes where `f = 0`.
pub fn relative_entropy(rho: &Density) -> f64 {
    entropy_of_values(&rho.values, rho.measure.weights())
}

pub(crate) fn entropy_of_values(values: &[f64], weights: &[f64]) -> f64 {
    -values
        .iter()
        .zip(weights)
        .filter(|(f, _)| **f > 0.0)
        .map(|(f, w)| f * f.ln() * w)
        .sum::<f64>()
}

/// Rescales nonnegative values to unit mass.
pub fn normalize(values: &[f64], m: &Arc<QuadratureMeasure>) -> Result<Density> {
    check_len(m.len(), values.len())?;
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Input(format!("value {v} is negative or not finite")));
    }
    let mass = weighted_sum(values, m.weights());
    if mass <= 0.0 {
        return Err(Error::EmptyDensity);
    }
    let values = values.iter().map(|v| v / mass).collect();
    Density::new(Arc::clone(m), values)
}

/// Uniform cell-centred axis on `[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 4 || !(max > min) {
            return Err(Error::Grid(format!("axis [{min}, {max}) with {n} cells")));
        }
        Ok(Self { min, max, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.spacing()
    }

    fn fractional_index(&self, x: f64) -> f64 {
        (x - self.min) / self.spacing() - 0.5
    }
}

/// Two-dimensional periodic midpoint grid; node index is `iy * nx + ix`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub x: Axis,
    pub y: Axis,
}

impl Grid2 {
    pub fn new(x: Axis, y: Axis) -> Self {
        Self { x, y }
    }

    pub fn measure(&self) -> QuadratureMeasure {
        let w = self.x.spacing() * self.y.spacing();
        let mut nodes = Vec::with_capacity(2 * self.x.n * self.y.n);
        for iy in 0..self.y.n {
            for ix in 0..self.x.n {
                nodes.push(self.x.center(ix));
                nodes.push(self.y.center(iy));
            }
        }
        QuadratureMeasure::from_flat(2, nodes, vec![w; self.x.n * self.y.n])
            .expect("grid measure is well formed")
    }
}

/// `x ↦ A·x + shift` on the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap2 {
    pub matrix: [[f64; 2]; 2],
    pub shift: [f64; 2],
}

impl AffineMap2 {
    pub fn identity() -> Self {
        Self {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            shift: [0.0, 0.0],
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            shift: [dx, dy],
            ..Self::identity()
        }
    }

    /// `(x, y) ↦ (x + k·y, y)`
    pub fn shear(k: f64) -> Self {
        Self {
            matrix: [[1.0, k], [0.0, 1.0]],
            shift: [0.0, 0.0],
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    fn inverse_apply(&self, y: [f64; 2]) -> [f64; 2] {
        let m = self.matrix;
        let det = self.determinant();
        let u = y[0] - self.shift[0];
        let v = y[1] - self.shift[1];
        [
            (m[1][1] * u - m[0][1] * v) / det,
            (-m[1][0] * u + m[0][0] * v) / det,
        ]
    }
}

/// Entropy of `rho` before and after pushing it forward by a measure
/// preserving affine map. The pushed-forward density `f ∘ Φ⁻¹` is re-binned
/// onto the same periodic grid by bicubic interpolation.
pub fn shear_invariance_check(
    grid: &Grid2,
    rho: &Density,
    map: &AffineMap2,
) -> Result<(f64, f64)> {
    let det = map.determinant();
    if (det - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "map has Jacobian determinant {det}, expected 1"
        )));
    }
    check_len(grid.x.n * grid.y.n, rho.values.len())?;
    let before = relative_entropy(rho);

    let (nx, ny) = (grid.x.n, grid.y.n);
    let mut pushed = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let src = map.inverse_apply([grid.x.center(ix), grid.y.center(iy)]);
            let fx = grid.x.fractional_index(src[0]);
            let fy = grid.y.fractional_index(src[1]);
            // interpolation undershoot in the tails
            pushed.push(periodic_bicubic(&rho.values, nx, ny, fx, fy).max(0.0));
        }
    }
    let measure = rho.measure();
    let mass = weighted_sum(&pushed, measure.weights());
    let after_density = if (mass - 1.0).abs() <= 1e-13 {
        Density::new(Arc::clone(measure), pushed)?
    } else {
        normalize(&pushed, measure)?
    };
    Ok((before, relative_entropy(&after_density)))
}
