//! Ideal-gas and van der Waals thermodynamics in closed form.
//!
//! Units are dimensionless with `k_B = 1`. For the ideal gas the conjugate
//! multipliers of energy and volume are `λ₁ = −1/T` and `λ₂ = −P/T`. For the
//! van der Waals gas `Ṽ = V + Nb` is the container volume and `V` the free
//! volume.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::maxent::ObservableSystem;
use crate::measure::{Observable, QuadratureMeasure};
use crate::roots::newton_bracketed;

/// Particle count and model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParameters {
    #[serde(rename = "N")]
    pub n: u32,
    pub m: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for GasParameters {
    fn default() -> Self {
        Self {
            n: 1,
            m: 1.0,
            c: 1.0,
            a: 0.0,
            b: 0.0,
        }
    }
}

impl GasParameters {
    pub fn new(n: u32, m: f64, c: f64, a: f64, b: f64) -> Result<Self> {
        let g = Self { n, m, c, a, b };
        g.validate()?;
        Ok(g)
    }

    pub fn ideal(n: u32) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn van_der_waals(n: u32, a: f64, b: f64) -> Self {
        Self {
            n,
            a,
            b,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Input("particle count N must be at least 1".into()));
        }
        if !(self.m > 0.0 && self.m.is_finite()) || !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Input(format!("m = {}, C = {} must be positive", self.m, self.c)));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) || !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::Input(format!("a = {}, b = {} must be nonnegative", self.a, self.b)));
        }
        Ok(())
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Excluded volume `bN`.
    pub fn excluded_volume(&self) -> f64 {
        self.b * self.nf()
    }

    fn ln_factorial(&self) -> f64 {
        ln_gamma(self.nf() + 1.0)
    }
}

/// One point `(U, V, T, P, S)` of the equilibrium manifold together with the
/// Gibbs free energy `Υ = U + PV − TS`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "Upsilon")]
    pub gibbs_free_energy: f64,
}

impl EquilibriumPoint {
    pub const CSV_HEADER: &'static str = "U,V,T,P,S,Upsilon";

    pub fn new(u: f64, v: f64, t: f64, p: f64, s: f64) -> Self {
        Self {
            u,
            v,
            t,
            p,
            s,
            gibbs_free_energy: u + p * v - t * s,
        }
    }

    pub fn csv_fields(&self) -> [f64; 6] {
        [self.u, self.v, self.t, self.p, self.s, self.gibbs_free_energy]
    }
}

/// Monic cubic `Ṽ³ + αṼ² + βṼ + γ` and its discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub discriminant: f64,
}

impl CubicCoefficients {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        let discriminant = 18.0 * alpha * beta * gamma - 4.0 * alpha.powi(3) * gamma
            + alpha * alpha * beta * beta
            - 4.0 * beta.powi(3)
            - 27.0 * gamma * gamma;
        Self {
            alpha,
            beta,
            gamma,
            discriminant,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        ((x + self.alpha) * x + self.beta) * x + self.gamma
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (3.0 * x + 2.0 * self.alpha) * x + self.beta
    }

    /// Discriminant divided by the sixth power of the root scale, so that a
    /// value near zero means "near a repeated root" independent of units.
    pub fn scaled_discriminant(&self) -> f64 {
        let scale = self
            .alpha
            .abs()
            .max(self.beta.abs().sqrt())
            .max(self.gamma.abs().cbrt());
        if scale == 0.0 {
            0.0
        } else {
            self.discriminant / scale.powi(6)
        }
    }
}

fn require_negative(name: &str, x: f64) -> Result<()> {
    if x < 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::DivergentIntegral(format!(
            "{name} = {x}; the partition integral converges only for {name} < 0"
        )))
    }
}

/// `U = −3N/(2λ₁)`
pub fn ideal_energy_from_lambda(lambda1: f64, g: &GasParameters) -> Result<f64> {
    require_negative("lambda1", lambda1)?;
    Ok(-3.0 * g.nf() / (2.0 * lambda1))
}

/// `V = −(N+1)/λ₂`
pub fn ideal_volume_from_lambda(lambda2: f64, g: &GasParameters) -> Result<f64> {
    require_negative("lambda2", lambda2)?;
    Ok(-(g.nf() + 1.0) / lambda2)
}

/// `w = (3N/2)·log(−2πm/λ₁) + (N+1)·log(−1/(λ₂C)) + log N! + N log 2π`
pub fn ideal_log_partition(lambda1: f64, lambda2: f64, g: &GasParameters) -> Result<f64> {
    require_negative("lambda1", lambda1)?;
    require_negative("lambda2", lambda2)?;
    let n = g.nf();
    Ok(1.5 * n * (-2.0 * std::f64::consts::PI * g.m / lambda1).ln()
        + (n + 1.0) * (-1.0 / (lambda2 * g.c)).ln()
        + g.ln_factorial()
        + n * (2.0 * std::f64::consts::PI).ln())
}

/// Legendre dual of [`ideal_log_partition`], `S = w − λ₁U − λ₂V`:
/// `S(U,V) = (3N/2)·(1 + log(4πmU/3N)) + (N+1)·(1 + log(V/(C(N+1)))) + log N! + N log 2π`
pub fn ideal_entropy(u: f64, v: f64, g: &GasParameters) -> Result<f64> {
    if !(u > 0.0) || !(v > 0.0) {
        return Err(Error::Domain(format!("U = {u} and V = {v} must be positive")));
    }
    let n = g.nf();
    Ok(1.5 * n * (1.0 + (4.0 * std::f64::consts::PI * g.m * u / (3.0 * n)).ln())
        + (n + 1.0) * (1.0 + (v / (g.c * (n + 1.0))).ln())
        + g.ln_factorial()
        + n * (2.0 * std::f64::consts::PI).ln())
}

/// Ideal-gas equilibrium at `(T, P)`: `U = (3/2)NT`, `V = (N+1)T/P`.
pub fn ideal_state(t: f64, p: f64, g: &GasParameters) -> Result<EquilibriumPoint> {
    if !(t > 0.0) || !(p > 0.0) {
        return Err(Error::Domain(format!("T = {t} and P = {p} must be positive")));
    }
    let n = g.nf();
    let u = 1.5 * n * t;
    let v = (n + 1.0) * t / p;
    let s = ideal_entropy(u, v, g)?;
    Ok(EquilibriumPoint::new(u, v, t, p, s))
}

/// `P = −aN²/Ṽ² + NT/(Ṽ − bN)`
pub fn vdw_pressure(veff: f64, t: f64, g: &GasParameters) -> Result<f64> {
    let bn = g.excluded_volume();
    if !(veff > bn) {
        return Err(Error::Domain(format!("Ṽ = {veff} must exceed bN = {bn}")));
    }
    let n = g.nf();
    Ok(-g.a * n * n / (veff * veff) + n * t / (veff - bn))
}

/// `∂P/∂Ṽ = 2aN²/Ṽ³ − NT/(Ṽ − bN)²`
pub fn vdw_pressure_slope(veff: f64, t: f64, g: &GasParameters) -> f64 {
    let n = g.nf();
    let d = veff - g.excluded_volume();
    2.0 * g.a * n * n / veff.powi(3) - n * t / (d * d)
}

/// `∂²P/∂Ṽ² = −6aN²/Ṽ⁴ + 2NT/(Ṽ − bN)³`
pub fn vdw_pressure_curvature(veff: f64, t: f64, g: &GasParameters) -> f64 {
    let n = g.nf();
    let d = veff - g.excluded_volume();
    -6.0 * g.a * n * n / veff.powi(4) + 2.0 * n * t / d.powi(3)
}

/// `U = (3/2)NT − aN²/Ṽ`, the mean of the kinetic energy minus the mean-field
/// attraction `aN²/(Ch)`.
pub fn vdw_energy(veff: f64, t: f64, g: &GasParameters) -> Result<f64> {
    if !(veff > 0.0) {
        return Err(Error::Domain(format!("Ṽ = {veff} must be positive")));
    }
    let n = g.nf();
    Ok(1.5 * n * t - g.a * n * n / veff)
}

/// Entropy consistent with [`vdw_pressure`] and [`vdw_energy`] through
/// `dS = dU/T + (P/T)dV`:
/// `S = (3N/2)·log(2πmT) + N·log((Ṽ − bN)/(CN)) + log N! + N log 2π`.
pub fn vdw_entropy(veff: f64, t: f64, g: &GasParameters) -> Result<f64> {
    let bn = g.excluded_volume();
    if !(veff > bn) || !(t > 0.0) {
        return Err(Error::Domain(format!("need Ṽ = {veff} > bN = {bn} and T = {t} > 0")));
    }
    let n = g.nf();
    Ok(1.5 * n * (2.0 * std::f64::consts::PI * g.m * t).ln()
        + n * ((veff - bn) / (g.c * n)).ln()
        + g.ln_factorial()
        + n * (2.0 * std::f64::consts::PI).ln())
}

/// The van der Waals equilibrium point at temperature `T` and container
/// volume `Ṽ`; its `V` field is the free volume `Ṽ − bN`.
pub fn vdw_state(veff: f64, t: f64, g: &GasParameters) -> Result<EquilibriumPoint> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("T = {t} must be positive")));
    }
    let p = vdw_pressure(veff, t, g)?;
    let u = vdw_energy(veff, t, g)?;
    let s = vdw_entropy(veff, t, g)?;
    Ok(EquilibriumPoint::new(u, veff - g.excluded_volume(), t, p, s))
}

/// Isotherm–isobar cubic: `α = −(bN + NT/P)`, `β = aN²/P`, `γ = −abN³/P`.
pub fn vdw_cubic(t: f64, p: f64, g: &GasParameters) -> Result<CubicCoefficients> {
    if !(t > 0.0) || !(p > 0.0) {
        return Err(Error::Domain(format!("T = {t} and P = {p} must be positive")));
    }
    let n = g.nf();
    Ok(CubicCoefficients::new(
        -(g.b * n + n * t / p),
        g.a * n * n / p,
        -g.a * g.b * n.powi(3) / p,
    ))
}

/// Relative separation below which two roots count as one tangency root.
const TANGENCY: f64 = 1e-7;

/// Real roots `Ṽ > bN` of the isotherm–isobar cubic, ascending.
///
/// The cubic's stationary points split the line into monotone pieces; each
/// piece with a sign change is solved by bracketed Newton. Roots closer than
/// `1e-7` relative are merged and reported once (tangency).
pub fn vdw_volume_roots(t: f64, p: f64, g: &GasParameters) -> Result<Vec<f64>> {
    let cubic = vdw_cubic(t, p, g)?;
    let bn = g.excluded_volume();
    let roots = cubic_real_roots(&cubic);
    let kept: Vec<f64> = roots.into_iter().filter(|r| *r > bn).collect();
    if kept.is_empty() {
        log::warn!("no volume root above bN = {bn} at T = {t}, P = {p}");
    }
    Ok(kept)
}

/// Real roots of a monic cubic by monotone bracketing.
pub fn cubic_real_roots(c: &CubicCoefficients) -> Vec<f64> {
    let f = |x: f64| (c.eval(x), c.derivative(x));
    let scale = 1.0 + c.alpha.abs().max(c.beta.abs().sqrt()).max(c.gamma.abs().cbrt());
    // Cauchy bound on root magnitude
    let bound = 1.0 + c.alpha.abs().max(c.beta.abs()).max(c.gamma.abs());
    let xtol = 1e-15 * scale;

    // stationary points of the cubic: 3x² + 2αx + β = 0
    let qa = 3.0;
    let qb = 2.0 * c.alpha;
    let qc = c.beta;
    let disc = qb * qb - 4.0 * qa * qc;
    let mut breaks = Vec::new();
    if disc > 0.0 {
        let q = -0.5 * (qb + qb.signum() * disc.sqrt());
        let (mut s1, mut s2) = if q != 0.0 { (q / qa, qc / q) } else { (0.0, 0.0) };
        if s1 > s2 {
            std::mem::swap(&mut s1, &mut s2);
        }
        breaks.push(s1);
        breaks.push(s2);
    }

    let mut edges = vec![-bound];
    edges.extend(breaks.iter().copied());
    edges.push(bound);
    let mut roots: Vec<f64> = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (c.eval(lo), c.eval(hi));
        if flo == 0.0 {
            roots.push(lo);
        } else if flo.signum() != fhi.signum() && fhi != 0.0 {
            if let Ok(r) = newton_bracketed(f, lo, hi, xtol) {
                roots.push(r);
            }
        } else if fhi == 0.0 && hi == bound {
            roots.push(hi);
        }
    }
    roots.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last() {
            Some(&last) if (r - last).abs() <= TANGENCY * r.abs().max(last.abs()).max(1e-300) => {
                let m = merged.len() - 1;
                merged[m] = 0.5 * (last + r);
            }
            _ => merged.push(r),
        }
    }
    // a stationary point that touches zero is a double root with no sign change
    for s in breaks {
        if c.eval(s).abs() <= 1e-14 * scale.powi(3)
            && !merged.iter().any(|r| (r - s).abs() <= TANGENCY * s.abs().max(1e-300))
        {
            merged.push(s);
        }
    }
    merged.sort_by(f64::total_cmp);
    merged
}

/// Critical point `(T_c, P_c, Ṽ_c) = (8a/27b, a/27b², 3bN)`, checked against
/// the stationarity conditions `∂P/∂Ṽ = ∂²P/∂Ṽ² = 0`.
pub fn vdw_critical_point(g: &GasParameters) -> Result<(f64, f64, f64)> {
    if !(g.a > 0.0) || !(g.b > 0.0) {
        return Err(Error::NoCriticalPoint(format!(
            "requires a > 0 and b > 0 (a = {}, b = {})",
            g.a, g.b
        )));
    }
    let vc = 3.0 * g.b * g.nf();
    let tc = 8.0 * g.a / (27.0 * g.b);
    let pc = g.a / (27.0 * g.b * g.b);
    // both derivatives are differences of O(P_c/Ṽ_c) terms
    let slope_scale = pc / vc;
    let d1 = vdw_pressure_slope(vc, tc, g) / slope_scale;
    let d2 = vdw_pressure_curvature(vc, tc, g) / (slope_scale / vc);
    if d1.abs() > 1e-10 || d2.abs() > 1e-10 {
        return Err(Error::NotConverged(format!(
            "critical point check failed: scaled dP/dV = {d1:e}, d2P/dV2 = {d2:e}"
        )));
    }
    Ok((tc, pc, vc))
}

/// Conjugate multipliers of `(X, Y) = (V + Nb, U + aN²/(V + Nb))`:
/// `λ_X = λ_V + aN²·λ_U/(V + Nb)²`, `λ_Y = λ_U`.
pub fn vdw_multiplier_transform(
    lambda_u: f64,
    lambda_v: f64,
    v: f64,
    g: &GasParameters,
) -> Result<(f64, f64)> {
    let x = v + g.excluded_volume();
    if !(x > 0.0) {
        return Err(Error::Domain(format!("V + Nb = {x} must be positive")));
    }
    let n = g.nf();
    Ok((lambda_v + g.a * n * n * lambda_u / (x * x), lambda_u))
}

/// Largest first-law residual `|ΔS − ΔU/T − (P/T)ΔV|` over a rectangular
/// patch of equilibrium points, with `Δ` the central difference per grid step
/// along each parameter direction.
///
/// Directions with at least five samples use the fourth-order five-point
/// stencil on points two steps from the border; shorter directions use the
/// three-point stencil.
pub fn contact_residual(patch: &[Vec<EquilibriumPoint>]) -> Result<f64> {
    let rows = patch.len();
    let cols = patch.first().map_or(0, Vec::len);
    if rows < 3 || cols < 3 {
        return Err(Error::Grid(format!("patch is {rows}x{cols}, need at least 3x3")));
    }
    if patch.iter().any(|r| r.len() != cols) {
        return Err(Error::Grid("patch rows have unequal lengths".into()));
    }
    let margin = |len: usize| if len >= 5 { 2 } else { 1 };
    let (mr, mc) = (margin(rows), margin(cols));

    let diff = |get: &dyn Fn(isize) -> f64, five: bool| -> f64 {
        if five {
            (-get(2) + 8.0 * get(1) - 8.0 * get(-1) + get(-2)) / 12.0
        } else {
            0.5 * (get(1) - get(-1))
        }
    };
    let residual = |pt: &EquilibriumPoint, ds: f64, du: f64, dv: f64| {
        (ds - du / pt.t - pt.p / pt.t * dv).abs()
    };

    let mut worst: f64 = 0.0;
    for i in mr..rows - mr {
        for j in mc..cols - mc {
            let pt = &patch[i][j];
            let along_row = |f: fn(&EquilibriumPoint) -> f64| {
                diff(&|k| f(&patch[i][(j as isize + k) as usize]), cols >= 5)
            };
            let along_col = |f: fn(&EquilibriumPoint) -> f64| {
                diff(&|k| f(&patch[(i as isize + k) as usize][j]), rows >= 5)
            };
            let r1 = residual(pt, along_row(|p| p.s), along_row(|p| p.u), along_row(|p| p.v));
            let r2 = residual(pt, along_col(|p| p.s), along_col(|p| p.u), along_col(|p| p.v));
            worst = worst.max(r1).max(r2);
        }
    }
    Ok(worst)
}

/// Multiplier applied to the reduced phase-space reference measure so that
/// its partition function carries the same additive constant
/// (`log N! + N log 2π`) as [`ideal_log_partition`]. The pushforward of
/// Lebesgue measure alone gives `log N! + N log π`; the factor `2^N` changes
/// `w` and `S` by `N log 2` and no moment.
pub fn reference_scale(g: &GasParameters) -> f64 {
    2f64.powi(g.n as i32)
}

/// Reduced quadrature for the kinetic energy `E = |P|²/2m` on `ℝ^{3N}`.
///
/// The pushforward of momentum Lebesgue measure has density
/// `(2πm)^{3N/2} E^{3N/2−1} / Γ(3N/2)`. Nodes are midpoints in `s = E^{1/4}`
/// on `[0, E_max^{1/4}]`; the substituted integrand vanishes to high order
/// at the origin, so the midpoint rule converges very fast.
/// `lambda1` sets the cutoff `E_max = (3N + 60)/|λ₁|`.
pub fn kinetic_energy_quadrature(
    g: &GasParameters,
    lambda1: f64,
    nodes: usize,
) -> Result<QuadratureMeasure> {
    require_negative("lambda1", lambda1)?;
    let n = g.nf();
    let k = 1.5 * n;
    let e_max = (3.0 * n + 60.0) / lambda1.abs();
    let log_const = k * (2.0 * std::f64::consts::PI * g.m).ln() - ln_gamma(k);
    // E^{k-1} dE = 4 s^{4k-1} ds
    radial_quadrature(e_max, nodes, log_const, 4.0 * k - 1.0)
}

/// Reduced quadrature for the piston height `h` with weight `(πh)^N`
/// (the positions of `N` particles in a cylinder of unit cross-section
/// radius). Midpoints in `u = h^{1/4}`; cutoff `h_max = (N + 60)/(|λ₂|C)`.
pub fn height_quadrature(g: &GasParameters, lambda2: f64, nodes: usize) -> Result<QuadratureMeasure> {
    require_negative("lambda2", lambda2)?;
    let n = g.nf();
    let h_max = (n + 60.0) / (lambda2.abs() * g.c);
    // h^N dh = 4 u^{4N+3} du
    radial_quadrature(h_max, nodes, n * std::f64::consts::PI.ln(), 4.0 * n + 3.0)
}

/// Midpoint rule in `s = x^{1/4}` on `[0, x_max]` for the weight
/// `exp(log_const)·4·s^power ds`, with nodes reported in `x`.
fn radial_quadrature(x_max: f64, nodes: usize, log_const: f64, power: f64) -> Result<QuadratureMeasure> {
    if nodes == 0 {
        return Err(Error::Grid("quadrature needs at least one node".into()));
    }
    let ds = x_max.powf(0.25) / nodes as f64;
    let log_const = log_const + 4f64.ln() + ds.ln();
    let mut x = Vec::with_capacity(nodes);
    let mut w = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let s = (i as f64 + 0.5) * ds;
        x.push(s.powi(4));
        w.push((log_const + power * s.ln()).exp());
    }
    QuadratureMeasure::from_flat(1, x, w)
}

/// The two-observable ideal-gas system {kinetic energy, volume `Ch`} on the
/// tensor product of the reduced energy and height quadratures, scaled by
/// [`reference_scale`]. `hint` gives multipliers near which the quadrature
/// should be accurate.
pub fn ideal_reduced_system(
    g: &GasParameters,
    hint: (f64, f64),
    energy_nodes: usize,
    height_nodes: usize,
) -> Result<ObservableSystem> {
    g.validate()?;
    let e = kinetic_energy_quadrature(g, hint.0, energy_nodes)?;
    let h = height_quadrature(g, hint.1, height_nodes)?;
    let product = e.tensor_product(&h);
    let scale = reference_scale(g);
    let nodes: Vec<f64> = product.nodes().flatten().copied().collect();
    let weights = product.weights().iter().map(|w| w * scale).collect();
    let measure = Arc::new(QuadratureMeasure::from_flat(2, nodes, weights)?);
    let energy = measure.observable("kinetic_energy", |x| x[0])?;
    let c = g.c;
    let volume: Observable = measure.observable("volume", |x| c * x[1])?;
    ObservableSystem::new(measure, vec![energy, volume])
}
