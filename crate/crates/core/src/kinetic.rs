//! Collisionless (free-transport) evolution of a density on a 1+1
//! dimensional phase space, periodic in position.
//!
//! Values are stored row-major: row `j` holds the momentum node `p_j`,
//! column `i` the position node `q_i`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::interp::shift_periodic_row;

/// Densities at or below this value are left out of logarithms.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Mass tolerance accepted by [`KineticState::new`].
pub const MASS_TOLERANCE: f64 = 1e-10;

/// Mass deviations up to this size are left alone after a step.
const RENORMALIZE_ABOVE: f64 = 1e-14;

const MAGIC: &[u8; 8] = b"KTPS0001";

/// Uniform grid: periodic in `q` on `[q_min, q_max)`, endpoints included in
/// `p` on `[p_min, p_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub nq: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl PhaseGrid {
    pub fn new(q_min: f64, q_max: f64, nq: usize, p_min: f64, p_max: f64, np: usize) -> Result<Self> {
        if nq < 8 || np < 8 {
            return Err(Error::Grid(format!("{np}x{nq} grid, need at least 8 nodes per axis")));
        }
        if !(q_max > q_min) || !(p_max > p_min) || !(q_max - q_min).is_finite() || !(p_max - p_min).is_finite() {
            return Err(Error::Input(format!(
                "empty or infinite ranges q ∈ [{q_min}, {q_max}], p ∈ [{p_min}, {p_max}]"
            )));
        }
        Ok(Self {
            q_min,
            q_max,
            nq,
            p_min,
            p_max,
            np,
        })
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.nq as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn period(&self) -> f64 {
        self.q_max - self.q_min
    }

    pub fn cell_volume(&self) -> f64 {
        self.dq() * self.dp()
    }

    pub fn q(&self, i: usize) -> f64 {
        self.q_min + self.dq() * i as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        if j == self.np - 1 {
            self.p_max
        } else {
            self.p_min + self.dp() * j as f64
        }
    }

    pub fn len(&self) -> usize {
        self.nq * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Evaluates `f(q, p)` at every node, row-major.
    pub fn tabulate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.np {
            let p = self.p(j);
            for i in 0..self.nq {
                out.push(f(self.q(i), p));
            }
        }
        out
    }
}

/// A function on the grid nodes (Hamiltonian or observable).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub label: String,
    values: Vec<f64>,
}

/// The Hamiltonian generating the flow.
pub type HamiltonianField = GridField;

impl GridField {
    pub fn new(label: &str, grid: &PhaseGrid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("field '{label}' has non-finite values")));
        }
        Ok(Self {
            label: label.to_string(),
            values,
        })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(label: &str, grid: &PhaseGrid, f: F) -> Result<Self> {
        Self::new(label, grid, grid.tabulate(f))
    }

    /// Kinetic energy `p²/2m`.
    pub fn kinetic(grid: &PhaseGrid, m: f64) -> Self {
        Self {
            label: "H".into(),
            values: grid.tabulate(|_, p| 0.5 * p * p / m),
        }
    }

    pub fn momentum(grid: &PhaseGrid) -> Self {
        Self {
            label: "P".into(),
            values: grid.tabulate(|_, p| p),
        }
    }

    pub fn momentum_squared(grid: &PhaseGrid) -> Self {
        Self {
            label: "P2".into(),
            values: grid.tabulate(|_, p| p * p),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A density on a [`PhaseGrid`] at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    grid: PhaseGrid,
    f: Vec<f64>,
    pub t: f64,
    /// Factor applied to restore unit mass in the step that produced this
    /// state (1 when no correction was needed).
    pub renormalization: f64,
}

impl KineticState {
    /// Wraps values that are nonnegative and of unit mass.
    pub fn new(grid: PhaseGrid, f: Vec<f64>, t: f64) -> Result<Self> {
        check_len(grid.len(), f.len())?;
        if let Some(v) = f.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Input(format!("density value {v} is negative or not finite")));
        }
        let state = Self {
            grid,
            f,
            t,
            renormalization: 1.0,
        };
        let mass = state.mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Normalization { mass });
        }
        Ok(state)
    }

    /// Tabulates `f0(q, p)` and scales it to unit mass.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: PhaseGrid, t: f64, f0: F) -> Result<Self> {
        let mut f = grid.tabulate(f0);
        if let Some(v) = f.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Input(format!("density value {v} is negative or not finite")));
        }
        let mass = invariant_sum(f.clone()) * grid.cell_volume();
        if !(mass > 0.0) {
            return Err(Error::EmptyDensity);
        }
        f.iter_mut().for_each(|v| *v /= mass);
        Self::new(grid, f, t)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.f[j * self.grid.nq..(j + 1) * self.grid.nq]
    }

    /// `Σ f·ΔqΔp`
    pub fn mass(&self) -> f64 {
        invariant_sum(self.f.clone()) * self.grid.cell_volume()
    }

    /// `−Σ f log f·ΔqΔp`, skipping cells at or below [`ENTROPY_FLOOR`].
    pub fn entropy(&self) -> f64 {
        let terms = self
            .f
            .iter()
            .filter(|v| **v > ENTROPY_FLOOR)
            .map(|v| v * v.ln())
            .collect();
        -invariant_sum(terms) * self.grid.cell_volume()
    }

    /// `⟨F⟩ = Σ F f·ΔqΔp`.
    pub fn expectation(&self, field: &GridField) -> Result<f64> {
        check_len(self.f.len(), field.values.len())?;
        let terms = self.f.iter().zip(&field.values).map(|(f, x)| f * x).collect();
        Ok(invariant_sum(terms) * self.grid.cell_volume())
    }

    /// Momentum marginal: `Σ_q f(q, p_j)·Δq` for each row.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        (0..self.grid.np)
            .map(|j| invariant_sum(self.row(j).to_vec()) * self.grid.dq())
            .collect()
    }

    /// Moments `⟨P⟩`, `⟨P²⟩` from the momentum marginal, so that any
    /// permutation within rows leaves them bit-identical.
    pub fn momentum_moments(&self) -> (f64, f64) {
        let marginal = self.momentum_marginal();
        let dp = self.grid.dp();
        let p1 = (0..self.grid.np).map(|j| self.grid.p(j) * marginal[j]).collect();
        let p2 = (0..self.grid.np).map(|j| self.grid.p(j).powi(2) * marginal[j]).collect();
        (invariant_sum(p1) * dp, invariant_sum(p2) * dp)
    }

    pub fn summary(&self) -> TrajectoryRow {
        let (mean_p, mean_p2) = self.momentum_moments();
        TrajectoryRow {
            t: self.t,
            mass: self.mass(),
            entropy: self.entropy(),
            mean_p,
            mean_p2,
        }
    }

    /// Writes the binary snapshot: `KTPS0001`, row count and column count as
    /// little-endian `u32`, then the values as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.grid.np as u32).to_le_bytes())?;
        w.write_all(&(self.grid.nq as u32).to_le_bytes())?;
        for v in &self.f {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Reads a binary snapshot, returning `(rows, cols, values)`.
pub fn read_binary<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..8] != MAGIC {
        return Err(Error::Input("not a KTPS0001 snapshot".into()));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes")) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    check_len(rows * cols * 8, bytes.len())?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((rows, cols, values))
}

/// Sum that depends only on the multiset of terms: sorted, then
/// compensated.
fn invariant_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Translates every row by `p·dt` and restores nonnegativity and unit mass.
fn advect(state: &KineticState, dt: f64) -> Result<KineticState> {
    if !dt.is_finite() {
        return Err(Error::Input(format!("time step {dt} is not finite")));
    }
    let grid = state.grid;
    let nq = grid.nq;
    let mut out = vec![0.0; grid.len()];
    for (j, row) in out.chunks_mut(nq).enumerate() {
        let shift = grid.p(j) * dt / grid.dq();
        shift_periodic_row(state.row(j), shift, row);
    }
    let mut clipped = false;
    for v in out.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            clipped = true;
        }
    }
    let mass = invariant_sum(out.clone()) * grid.cell_volume();
    if !(mass > 0.0) {
        return Err(Error::EmptyDensity);
    }
    let mut factor = 1.0;
    if (mass - 1.0).abs() > RENORMALIZE_ABOVE {
        factor = 1.0 / mass;
        out.iter_mut().for_each(|v| *v *= factor);
        log::debug!("renormalized by {factor} (clipped: {clipped})");
    }
    Ok(KineticState {
        grid,
        f: out,
        t: state.t + dt,
        renormalization: factor,
    })
}

/// The free-transport solution `f(t, q, p) = f₀(q − tp, p)` evaluated by
/// cubic interpolation along each row; an exact permutation when every
/// `t·p_j` is a whole number of cells.
pub fn free_transport_exact(f0: &KineticState, t: f64) -> Result<KineticState> {
    advect(f0, t)
}

/// One semi-Lagrangian step of `∂f/∂t + p ∂f/∂q = 0`.
pub fn free_transport_step(state: &KineticState, dt: f64) -> Result<KineticState> {
    advect(state, dt)
}

/// `n` steps of size `dt`, returning every state including the first.
pub fn free_transport_run(f0: &KineticState, dt: f64, steps: usize) -> Result<Vec<KineticState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(f0.clone());
    for _ in 0..steps {
        let next = free_transport_step(out.last().expect("nonempty"), dt)?;
        out.push(next);
    }
    Ok(out)
}

fn d_dq(values: &[f64], grid: &PhaseGrid) -> Vec<f64> {
    let nq = grid.nq;
    let h = 12.0 * grid.dq();
    let mut out = vec![0.0; values.len()];
    for (row_in, row_out) in values.chunks(nq).zip(out.chunks_mut(nq)) {
        for i in 0..nq {
            let at = |k: isize| row_in[(i as isize + k).rem_euclid(nq as isize) as usize];
            row_out[i] = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / h;
        }
    }
    out
}

fn d_dp(values: &[f64], grid: &PhaseGrid) -> Vec<f64> {
    let (nq, np) = (grid.nq, grid.np);
    let h = 12.0 * grid.dp();
    let mut out = vec![0.0; values.len()];
    for i in 0..nq {
        let u = |j: usize| values[j * nq + i];
        for j in 0..np {
            let d = match j {
                0 => -25.0 * u(0) + 48.0 * u(1) - 36.0 * u(2) + 16.0 * u(3) - 3.0 * u(4),
                1 => -3.0 * u(0) - 10.0 * u(1) + 18.0 * u(2) - 6.0 * u(3) + u(4),
                _ if j == np - 2 => {
                    3.0 * u(np - 1) + 10.0 * u(np - 2) - 18.0 * u(np - 3) + 6.0 * u(np - 4) - u(np - 5)
                }
                _ if j == np - 1 => {
                    25.0 * u(np - 1) - 48.0 * u(np - 2) + 36.0 * u(np - 3) - 16.0 * u(np - 4) + 3.0 * u(np - 5)
                }
                _ => -u(j + 2) + 8.0 * u(j + 1) - 8.0 * u(j - 1) + u(j - 2),
            };
            out[j * nq + i] = d / h;
        }
    }
    out
}

/// `{f, H} = ∂f/∂q·∂H/∂p − ∂f/∂p·∂H/∂q` with fourth-order differences
/// (periodic in `q`, one-sided at the `p` edges).
pub fn poisson_bracket(f: &[f64], h: &HamiltonianField, grid: &PhaseGrid) -> Result<Vec<f64>> {
    check_len(grid.len(), f.len())?;
    check_len(grid.len(), h.values.len())?;
    let (fq, fp) = (d_dq(f, grid), d_dp(f, grid));
    let (hq, hp) = (d_dq(&h.values, grid), d_dp(&h.values, grid));
    Ok((0..f.len()).map(|k| fq[k] * hp[k] - fp[k] * hq[k]).collect())
}

/// `Σ (log f + 1)·{f, H}·ΔqΔp`, skipping cells at or below
/// [`ENTROPY_FLOOR`]. Under `∂f/∂t = −{f, H}` this is `dS/dt`.
pub fn entropy_production(state: &KineticState, h: &HamiltonianField) -> Result<f64> {
    let bracket = poisson_bracket(&state.f, h, &state.grid)?;
    let terms = state
        .f
        .iter()
        .zip(&bracket)
        .filter(|(f, _)| **f > ENTROPY_FLOOR)
        .map(|(f, b)| (f.ln() + 1.0) * b)
        .collect();
    Ok(invariant_sum(terms) * state.grid.cell_volume())
}

/// One line of a trajectory table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub mass: f64,
    pub entropy: f64,
    #[serde(rename = "meanP")]
    pub mean_p: f64,
    #[serde(rename = "meanP2")]
    pub mean_p2: f64,
}

impl TrajectoryRow {
    pub const CSV_HEADER: &'static str = "t,mass,entropy,meanP,meanP2";

    pub fn csv_fields(&self) -> [f64; 5] {
        [self.t, self.mass, self.entropy, self.mean_p, self.mean_p2]
    }
}

/// Per-snapshot diagnostics along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub mass: f64,
    pub entropy: f64,
    pub means: Vec<f64>,
}

/// Largest deviation of each diagnostic from its initial value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub labels: Vec<String>,
    pub snapshots: Vec<Snapshot>,
    pub mass_drift: f64,
    pub entropy_drift: f64,
    pub mean_drifts: Vec<f64>,
}

pub fn conservation_report(trajectory: &[KineticState], observables: &[GridField]) -> Result<ConservationReport> {
    if trajectory.is_empty() {
        return Err(Error::Input("empty trajectory".into()));
    }
    let snapshots = trajectory
        .iter()
        .map(|s| {
            Ok(Snapshot {
                t: s.t,
                mass: s.mass(),
                entropy: s.entropy(),
                means: observables.iter().map(|o| s.expectation(o)).collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let s0 = &snapshots[0];
    let drift = |get: &dyn Fn(&Snapshot) -> f64| {
        snapshots.iter().fold(0.0f64, |m, s| m.max((get(s) - get(s0)).abs()))
    };
    let mass_drift = drift(&|s| s.mass);
    let entropy_drift = drift(&|s| s.entropy);
    let mean_drifts = (0..observables.len()).map(|k| drift(&|s| s.means[k])).collect();
    Ok(ConservationReport {
        labels: observables.iter().map(|o| o.label.clone()).collect(),
        snapshots: snapshots.clone(),
        mass_drift,
        entropy_drift,
        mean_drifts,
    })
}
