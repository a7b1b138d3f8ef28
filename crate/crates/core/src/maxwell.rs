//! Van der Waals isotherms below the critical temperature: spinodal,
//! equal-area (Maxwell) pressure, the graph-selector potential `f_T(P)` and
//! the Maxwell adjustment of the isotherm.
//!
//! All volumes here are container volumes `Ṽ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gasmodels::{vdw_critical_point, vdw_pressure, vdw_pressure_curvature, vdw_pressure_slope, GasParameters};
use crate::quad;
use crate::roots::{bisect, newton_bracketed};

/// Temperatures this close to `T_c` (relative) count as critical.
pub const NEAR_CRITICAL: f64 = 1e-9;

/// Samples `(Ṽ, P)` of one isotherm, `Ṽ` strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Isotherm {
    t: f64,
    params: GasParameters,
    samples: Vec<(f64, f64)>,
}

impl Isotherm {
    pub const CSV_HEADER: &'static str = "Veff,P";

    /// Builds an isotherm from explicit samples; volumes must be strictly
    /// increasing and above `bN`.
    pub fn new(t: f64, params: GasParameters, samples: Vec<(f64, f64)>) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("T = {t} must be positive")));
        }
        let bn = params.excluded_volume();
        if let Some(&(v, _)) = samples.iter().find(|(v, _)| !(*v > bn)) {
            return Err(Error::Domain(format!("Ṽ = {v} must exceed bN = {bn}")));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Input("isotherm volumes must be strictly increasing".into()));
        }
        Ok(Self { t, params, samples })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn params(&self) -> &GasParameters {
        &self.params
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `count` evenly spaced volumes on `[v_lo, v_hi]` with their pressures.
pub fn sample_isotherm(t: f64, g: &GasParameters, v_lo: f64, v_hi: f64, count: usize) -> Result<Isotherm> {
    let bn = g.excluded_volume();
    if !(v_lo > bn) || !(v_hi > v_lo) || !v_hi.is_finite() {
        return Err(Error::Domain(format!(
            "need bN = {bn} < v_lo = {v_lo} < v_hi = {v_hi}"
        )));
    }
    if count < 2 {
        return Err(Error::Grid(format!("count = {count}, need at least 2")));
    }
    let step = (v_hi - v_lo) / (count - 1) as f64;
    let samples = (0..count)
        .map(|i| {
            let v = if i == count - 1 { v_hi } else { v_lo + step * i as f64 };
            Ok((v, vdw_pressure(v, t, g)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Isotherm::new(t, *g, samples)
}

/// `T` at which `Ṽ` is a stationary point of the isotherm:
/// `T = 2aN(Ṽ − bN)²/Ṽ³`. Rises on `(bN, 3bN)` to `T_c` and falls after.
fn spinodal_temperature(v: f64, g: &GasParameters) -> f64 {
    let d = v - g.excluded_volume();
    2.0 * g.a * g.n as f64 * d * d / v.powi(3)
}

/// The two volumes where `∂P/∂Ṽ = 0`, or `None` above the critical
/// temperature. At `T = T_c` both equal `3bN`.
pub fn spinodal(t: f64, g: &GasParameters) -> Option<(f64, f64)> {
    let (tc, _, vc) = vdw_critical_point(g).ok()?;
    if !(t > 0.0) || t > tc {
        return None;
    }
    if t == tc {
        return Some((vc, vc));
    }
    let bn = g.excluded_volume();
    let f = |v: f64| spinodal_temperature(v, g) - t;
    let lo = bisect(f, bn, vc, 1e-15 * vc).ok()?;
    let mut far = 2.0 * vc;
    while f(far) > 0.0 {
        far *= 2.0;
    }
    let hi = bisect(f, vc, far, 1e-15 * far).ok()?;
    Some((lo, hi))
}

/// Critical point located numerically as the coalescence of the two
/// spinodal volumes: the maximum of the spinodal temperature, found where
/// the curvature `∂²P/∂Ṽ²` on the spinodal changes sign.
pub fn critical_point_from_spinodal(g: &GasParameters) -> Result<(f64, f64, f64)> {
    if !(g.a > 0.0) || !(g.b > 0.0) {
        return Err(Error::NoCriticalPoint(format!("a = {}, b = {}", g.a, g.b)));
    }
    let bn = g.excluded_volume();
    let curvature = |v: f64| vdw_pressure_curvature(v, spinodal_temperature(v, g), g);
    let mut hi = 2.0 * bn;
    while curvature(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = bn * (1.0 + 1e-6);
    while curvature(lo) < 0.0 {
        lo = bn + 0.5 * (lo - bn);
    }
    let vc = bisect(curvature, lo, hi, 1e-16 * hi)?;
    let tc = spinodal_temperature(vc, g);
    let pc = vdw_pressure(vc, tc, g)?;
    Ok((tc, pc, vc))
}

/// Split of an isotherm into the stable liquid branch (`Ṽ < v_spinodal_lo`),
/// the unstable middle branch and the stable vapour branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchDecomposition {
    pub v_spinodal_lo: f64,
    pub v_spinodal_hi: f64,
    pub branch_min: Vec<(f64, f64)>,
    pub branch_mid: Vec<(f64, f64)>,
    pub branch_max: Vec<(f64, f64)>,
}

/// Splits the samples at the spinodal volumes; `None` above `T_c`.
pub fn decompose(iso: &Isotherm) -> Option<BranchDecomposition> {
    let (lo, hi) = spinodal(iso.t, &iso.params)?;
    let pick = |keep: &dyn Fn(f64) -> bool| -> Vec<(f64, f64)> {
        iso.samples.iter().copied().filter(|(v, _)| keep(*v)).collect()
    };
    Some(BranchDecomposition {
        v_spinodal_lo: lo,
        v_spinodal_hi: hi,
        branch_min: pick(&|v| v < lo),
        branch_mid: pick(&|v| v >= lo && v <= hi),
        branch_max: pick(&|v| v > hi),
    })
}

/// Coexistence data at one temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellResult {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "P_mx")]
    pub p_mx: f64,
    #[serde(rename = "V_liquid")]
    pub v_liquid: f64,
    #[serde(rename = "V_vapor")]
    pub v_vapor: f64,
    #[serde(rename = "residual")]
    pub equal_area_residual: f64,
    /// Set when `T` is within [`NEAR_CRITICAL`] of `T_c` and the values are
    /// a best estimate from a collapsed bracket.
    #[serde(skip)]
    pub near_critical: bool,
}

impl MaxwellResult {
    /// `|P_mx|·(V_vapor − V_liquid)`, the natural size of the equal-area
    /// residual.
    pub fn scale(&self) -> f64 {
        self.p_mx.abs() * (self.v_vapor - self.v_liquid)
    }
}

/// Volume on a branch where the pressure falls monotonically from
/// `+∞`/`P(lo)` to `P(hi)`/`0`. `hi = None` means the branch is unbounded.
fn invert_branch(p: f64, t: f64, g: &GasParameters, lo: f64, hi: Option<f64>) -> Result<f64> {
    let bn = g.excluded_volume();
    let f = |v: f64| -> Result<f64> { Ok(vdw_pressure(v, t, g)? - p) };
    let mut a = lo;
    if a <= bn {
        // pressure diverges at the excluded volume; move the bracket in
        let top = hi.unwrap_or(2.0 * bn.max(1.0));
        let mut gap = 0.5 * (top - bn);
        a = bn + gap;
        while f(a)? < 0.0 {
            gap *= 0.5;
            if gap <= f64::EPSILON * bn {
                return Err(Error::Domain(format!("pressure {p} out of reach on the branch")));
            }
            a = bn + gap;
        }
    }
    let b = match hi {
        Some(h) => h,
        None => {
            let mut h = 2.0 * a.max(1.0);
            while f(h)? > 0.0 {
                h *= 2.0;
                if !h.is_finite() {
                    return Err(Error::Domain(format!("pressure {p} out of reach on the branch")));
                }
            }
            h
        }
    };
    let fa = f(a)?;
    let fb = f(b)?;
    if fa < 0.0 || fb > 0.0 {
        return Err(Error::Domain(format!(
            "pressure {p} outside the branch range [{}, {}]",
            fb + p,
            fa + p
        )));
    }
    newton_bracketed(
        |v| {
            let v = v.max(bn * (1.0 + f64::EPSILON) + f64::MIN_POSITIVE);
            (vdw_pressure(v, t, g).map_or(f64::INFINITY, |x| x - p), vdw_pressure_slope(v, t, g))
        },
        a,
        b,
        4.0 * f64::EPSILON * b,
    )
}

/// Outer roots `V₁ < V₃` of `P(Ṽ) = p` for a pressure between the spinodal
/// pressures.
fn outer_roots(p: f64, t: f64, g: &GasParameters, spin: (f64, f64)) -> Result<(f64, f64)> {
    Ok((
        invert_branch(p, t, g, g.excluded_volume(), Some(spin.0))?,
        invert_branch(p, t, g, spin.1, None)?,
    ))
}

/// `A(p) = ∫_{V₁}^{V₃} (P(Ṽ) − p) dṼ` by adaptive Gauss–Kronrod.
pub fn equal_area_defect(p: f64, t: f64, g: &GasParameters) -> Result<f64> {
    let spin = spinodal(t, g).ok_or_else(|| no_coexistence(t, g))?;
    let (v1, v3) = outer_roots(p, t, g, spin)?;
    area_between(p, t, g, v1, v3)
}

fn area_between(p: f64, t: f64, g: &GasParameters, v1: f64, v3: f64) -> Result<f64> {
    let scale = p.abs() * (v3 - v1);
    let (a, _) = quad::integrate(
        |v| vdw_pressure(v, t, g).map_or(f64::NAN, |x| x - p),
        v1,
        v3,
        1e-14 * scale,
        1e-13,
    )?;
    Ok(a)
}

fn no_coexistence(t: f64, g: &GasParameters) -> Error {
    match vdw_critical_point(g) {
        Ok((tc, _, _)) => Error::NoCoexistence(format!("T = {t} is not below T_c = {tc}")),
        Err(e) => e,
    }
}

/// Maxwell pressure at `T < T_c`: the `P*` for which the isotherm cuts off
/// equal areas above and below the line `P = P*`, found by bisection on
/// `A(P*)`, which decreases strictly across the spinodal bracket.
pub fn maxwell_pressure(t: f64, g: &GasParameters) -> Result<MaxwellResult> {
    let (tc, _, _) = vdw_critical_point(g)?;
    if !(t > 0.0) || t >= tc {
        return Err(no_coexistence(t, g));
    }
    let spin = spinodal(t, g).ok_or_else(|| no_coexistence(t, g))?;
    let p_lo = vdw_pressure(spin.0, t, g)?.max(0.0);
    let p_hi = vdw_pressure(spin.1, t, g)?;

    if tc - t <= NEAR_CRITICAL * tc || !(p_hi > p_lo) {
        log::warn!("T = {t} is within {NEAR_CRITICAL:e} of T_c; coexistence values are estimates");
        let p = 0.5 * (p_lo + p_hi);
        return Ok(MaxwellResult {
            t,
            p_mx: p,
            v_liquid: spin.0,
            v_vapor: spin.1,
            equal_area_residual: area_between(p, t, g, spin.0, spin.1).unwrap_or(0.0),
            near_critical: true,
        });
    }

    // the defect is +∞-free on the open bracket; stay a hair inside it
    let inset = 1e-14 * p_hi;
    let p_mx = bisect(
        |p| equal_area_defect(p, t, g).unwrap_or(f64::NAN),
        p_lo + inset,
        p_hi - inset,
        1e-15 * p_hi,
    )?;
    let (v_liquid, v_vapor) = outer_roots(p_mx, t, g, spin)?;
    let residual = area_between(p_mx, t, g, v_liquid, v_vapor)?;
    log::debug!("T = {t}: P_mx = {p_mx}, residual = {residual:e}");
    Ok(MaxwellResult {
        t,
        p_mx,
        v_liquid,
        v_vapor,
        equal_area_residual: residual,
        near_critical: false,
    })
}

/// `∫_{Ṽa}^{Ṽb} Ṽ dP` along the isotherm, via `[ṼP] − ∫P dṼ` with the
/// antiderivative `aN²/Ṽ + NT·log(Ṽ − bN)` of the pressure.
fn volume_work(va: f64, vb: f64, t: f64, g: &GasParameters) -> Result<f64> {
    let n = g.n as f64;
    let bn = g.excluded_volume();
    let pa = vdw_pressure(va, t, g)?;
    let pb = vdw_pressure(vb, t, g)?;
    let pressure_integral = g.a * n * n * (1.0 / vb - 1.0 / va) + n * t * ((vb - bn) / (va - bn)).ln();
    Ok(vb * pb - va * pa - pressure_integral)
}

/// Which smooth piece of the selector a pressure falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Liquid,
    Vapour,
    Cliff,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Liquid => "liquid",
            Branch::Vapour => "vapour",
            Branch::Cliff => "cliff",
        }
    }
}

/// The Gibbs-type potential `f_T(P)` selected from the multivalued
/// isotherm: `df_T/dP = Ṽ` on the liquid branch above `P_mx` and on the
/// vapour branch below it.
///
/// The potential is pinned to zero at a finite pressure `P_ref` on the
/// liquid branch.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSelector {
    pub t: f64,
    pub p_ref: f64,
    /// `None` at or above the critical temperature.
    pub coexistence: Option<MaxwellResult>,
    /// `V_vapor − V_liquid`, zero without coexistence.
    pub jump: f64,
    params: GasParameters,
    v_ref: f64,
    /// `f_T(P_mx)` reached along the liquid and the vapour branch.
    f_mx_liquid: f64,
    f_mx_vapour: f64,
    spin: Option<(f64, f64)>,
}

/// Builds the selector at temperature `T` anchored at `P_ref`.
pub fn graph_selector(t: f64, g: &GasParameters, p_ref: f64) -> Result<GraphSelector> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("T = {t} must be positive")));
    }
    let (tc, _, _) = vdw_critical_point(g)?;
    if t >= tc {
        if !(p_ref > 0.0 && p_ref.is_finite()) {
            return Err(Error::Anchor(format!("P_ref = {p_ref} must be positive")));
        }
        let v_ref = invert_branch(p_ref, t, g, g.excluded_volume(), None)?;
        return Ok(GraphSelector {
            t,
            p_ref,
            coexistence: None,
            jump: 0.0,
            params: *g,
            v_ref,
            f_mx_liquid: 0.0,
            f_mx_vapour: 0.0,
            spin: None,
        });
    }
    let mr = maxwell_pressure(t, g)?;
    if !(p_ref > mr.p_mx && p_ref.is_finite()) {
        return Err(Error::Anchor(format!(
            "P_ref = {p_ref} must exceed the Maxwell pressure {}",
            mr.p_mx
        )));
    }
    let spin = spinodal(t, g);
    let v_ref = invert_branch(p_ref, t, g, g.excluded_volume(), Some(mr.v_liquid))?;
    let f_mx_liquid = -volume_work(mr.v_liquid, v_ref, t, g)?;
    // continue through the unstable loop to the vapour end of the cliff
    let f_mx_vapour = f_mx_liquid + volume_work(mr.v_liquid, mr.v_vapor, t, g)?;
    Ok(GraphSelector {
        t,
        p_ref,
        coexistence: Some(mr),
        jump: mr.v_vapor - mr.v_liquid,
        params: *g,
        v_ref,
        f_mx_liquid,
        f_mx_vapour,
        spin,
    })
}

impl GraphSelector {
    pub fn params(&self) -> &GasParameters {
        &self.params
    }

    pub fn p_mx(&self) -> Option<f64> {
        self.coexistence.map(|m| m.p_mx)
    }

    /// `|f_T(P_mx⁺) − f_T(P_mx⁻)|`; equals the equal-area defect at `P_mx`.
    pub fn continuity_gap(&self) -> f64 {
        (self.f_mx_liquid - self.f_mx_vapour).abs()
    }

    /// Branch selected at pressure `p` (the cliff only at exactly `P_mx`).
    pub fn branch(&self, p: f64) -> Branch {
        match self.p_mx() {
            None => Branch::Liquid,
            Some(pm) if p > pm => Branch::Liquid,
            Some(pm) if p < pm => Branch::Vapour,
            Some(_) => Branch::Cliff,
        }
    }

    /// `α(P) = df_T/dP`, the selected volume. At `P_mx` this returns the
    /// liquid volume.
    pub fn alpha(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("P = {p} must be positive")));
        }
        let g = &self.params;
        match (self.coexistence, self.branch(p)) {
            (None, _) => invert_branch(p, self.t, g, g.excluded_volume(), None),
            (Some(m), Branch::Liquid | Branch::Cliff) => {
                if p == m.p_mx {
                    return Ok(m.v_liquid);
                }
                invert_branch(p, self.t, g, g.excluded_volume(), Some(m.v_liquid))
            }
            (Some(m), Branch::Vapour) => {
                let lo = self.spin.map_or(m.v_vapor, |s| s.1).max(m.v_vapor);
                invert_branch(p, self.t, g, lo, None)
            }
        }
    }

    /// `f_T(P)`.
    pub fn potential(&self, p: f64) -> Result<f64> {
        let v = self.alpha(p)?;
        let g = &self.params;
        match (self.coexistence, self.branch(p)) {
            (None, _) => Ok(-volume_work(v, self.v_ref, self.t, g)?),
            (Some(_), Branch::Liquid | Branch::Cliff) => Ok(-volume_work(v, self.v_ref, self.t, g)?),
            (Some(m), Branch::Vapour) => Ok(self.f_mx_vapour - volume_work(v, m.v_vapor, self.t, g)?),
        }
    }

    /// The largest volume the selector reaches on `[p_lo, ∞)`, a Lipschitz
    /// constant of `f_T` there.
    pub fn lipschitz_bound(&self, p_lo: f64) -> Result<f64> {
        self.alpha(p_lo)
    }

    /// Rows `(P, f_T, df_T/dP, branch)` on `count` evenly spaced pressures
    /// in `[p_lo, p_hi]`, plus two cliff rows at `P_mx` (liquid and vapour
    /// volume) when it lies in range. Sorted by pressure.
    pub fn table(&self, p_lo: f64, p_hi: f64, count: usize) -> Result<Vec<SelectorRow>> {
        if !(p_lo > 0.0) || !(p_hi > p_lo) || count < 2 {
            return Err(Error::Domain(format!(
                "need 0 < p_lo = {p_lo} < p_hi = {p_hi} and count = {count} ≥ 2"
            )));
        }
        let step = (p_hi - p_lo) / (count - 1) as f64;
        let mut rows = Vec::with_capacity(count + 2);
        for i in 0..count {
            let p = if i == count - 1 { p_hi } else { p_lo + step * i as f64 };
            if Some(p) == self.p_mx() {
                continue;
            }
            rows.push(SelectorRow {
                p,
                f: self.potential(p)?,
                dfdp: self.alpha(p)?,
                branch: self.branch(p),
            });
        }
        if let Some(m) = self.coexistence.filter(|m| m.p_mx >= p_lo && m.p_mx <= p_hi) {
            rows.push(SelectorRow {
                p: m.p_mx,
                f: self.f_mx_liquid,
                dfdp: m.v_liquid,
                branch: Branch::Cliff,
            });
            rows.push(SelectorRow {
                p: m.p_mx,
                f: self.f_mx_vapour,
                dfdp: m.v_vapor,
                branch: Branch::Cliff,
            });
        }
        rows.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.dfdp.total_cmp(&b.dfdp)));
        Ok(rows)
    }
}

/// One row of a selector table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorRow {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "fT")]
    pub f: f64,
    #[serde(rename = "dfTdP")]
    pub dfdp: f64,
    pub branch: Branch,
}

impl SelectorRow {
    pub const CSV_HEADER: &'static str = "P,fT,dfTdP,branch";
}

/// The horizontal segment `P = P_mx` between the coexisting volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliffSegment {
    #[serde(rename = "P_mx")]
    pub p_mx: f64,
    #[serde(rename = "V_liquid")]
    pub v_liquid: f64,
    #[serde(rename = "V_vapor")]
    pub v_vapor: f64,
}

/// Replaces the part of the isotherm between the coexisting volumes by the
/// horizontal segment at `P_mx`, inserting both segment ends as samples.
/// Without coexistence data the isotherm is returned unchanged.
pub fn maxwell_adjustment(iso: &Isotherm, mr: Option<&MaxwellResult>) -> Result<(Isotherm, Option<CliffSegment>)> {
    let Some(mr) = mr else {
        return Ok((iso.clone(), None));
    };
    let scale = iso.t.abs().max(mr.t.abs());
    if (mr.t - iso.t).abs() > 1e-12 * scale {
        return Err(Error::Consistency(format!(
            "Maxwell data at T = {} applied to isotherm at T = {}",
            mr.t, iso.t
        )));
    }
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(iso.len() + 2);
    for &(v, p) in &iso.samples {
        if v < mr.v_liquid || v > mr.v_vapor {
            samples.push((v, p));
        } else if v > mr.v_liquid && v < mr.v_vapor {
            samples.push((v, mr.p_mx));
        }
    }
    samples.push((mr.v_liquid, mr.p_mx));
    samples.push((mr.v_vapor, mr.p_mx));
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| a.0 == b.0);
    let adjusted = Isotherm::new(iso.t, iso.params, samples)?;
    Ok((
        adjusted,
        Some(CliffSegment {
            p_mx: mr.p_mx,
            v_liquid: mr.v_liquid,
            v_vapor: mr.v_vapor,
        }),
    ))
}

/// `Υ` along the sampled isotherm from `dΥ = Ṽ dP` (trapezoid rule), zero
/// at the first sample. Returns `(P, Υ)` in sample order.
pub fn gibbs_on_isotherm(iso: &Isotherm) -> Result<Vec<(f64, f64)>> {
    if iso.len() < 64 {
        return Err(Error::Grid(format!("{} samples, need at least 64", iso.len())));
    }
    let mut out = Vec::with_capacity(iso.len());
    let mut upsilon = 0.0;
    out.push((iso.samples[0].1, 0.0));
    for w in iso.samples.windows(2) {
        let ((v0, p0), (v1, p1)) = (w[0], w[1]);
        upsilon += 0.5 * (v0 + v1) * (p1 - p0);
        out.push((p1, upsilon));
    }
    Ok(out)
}

/// Pressure where the two stable branches of `Υ(P)` cross, from the
/// sampled isotherm alone. The branches are the leading run of falling
/// pressure and the trailing run after the pressure rises again.
pub fn gibbs_crossing(iso: &Isotherm) -> Result<f64> {
    let curve = gibbs_on_isotherm(iso)?;
    let s = &iso.samples;
    let rise = (1..s.len()).find(|&i| s[i].1 > s[i - 1].1);
    let Some(rise) = rise else {
        return Err(Error::NoCoexistence("isotherm has no unstable part".into()));
    };
    let liquid_end = rise - 1;
    let fall = (rise..s.len()).find(|&i| s[i].1 < s[i - 1].1);
    let Some(fall) = fall else {
        return Err(Error::NoCoexistence("isotherm ends before the vapour branch".into()));
    };
    // ascending in pressure for lookup
    let mut liquid: Vec<(f64, f64)> = curve[..=liquid_end].to_vec();
    liquid.reverse();
    let mut vapour: Vec<(f64, f64)> = curve[fall - 1..].to_vec();
    vapour.reverse();
    if vapour.len() < 2 || liquid.len() < 2 {
        return Err(Error::Grid("stable branches are too short".into()));
    }
    let lo = liquid[0].0.max(vapour[0].0);
    let hi = liquid[liquid.len() - 1].0.min(vapour[vapour.len() - 1].0);
    if !(hi > lo) {
        return Err(Error::NoCoexistence("stable branches do not overlap in pressure".into()));
    }
    let diff = |p: f64| lerp(&liquid, p) - lerp(&vapour, p);
    bisect(diff, lo, hi, 1e-15 * hi)
}

/// Piecewise-linear interpolation on points sorted by abscissa.
fn lerp(points: &[(f64, f64)], x: f64) -> f64 {
    let i = points.partition_point(|(px, _)| *px < x).clamp(1, points.len() - 1);
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}
