//! Constrained entropy maximization over a quadrature measure.
//!
//! For observables `F₁…Fₙ` the entropy maximizer with prescribed moments is
//! the Gibbs density `f_λ = exp(Σ λᵢFᵢ − w(λ))` where
//! `w(λ) = log ∫ exp(Σ λᵢFᵢ) dν₀` is the log-partition function. Its gradient
//! is the moment vector and its Hessian the moment covariance, so inverting
//! observations `μ ↦ λ` is the minimization of the strictly convex dual
//! `w(λ) − λ·μ`, solved here by damped Newton iteration.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::measure::{Density, Observable, QuadratureMeasure};

/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 50;
/// Covariance condition number above which the system is called degenerate.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Quadrature sums run sequentially in node order when set.
    pub deterministic: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            deterministic: true,
        }
    }
}

/// Observables `F₁…Fₙ` sharing one reference measure.
#[derive(Debug, Clone)]
pub struct ObservableSystem {
    measure: Arc<QuadratureMeasure>,
    observables: Vec<Observable>,
    log_weights: Vec<f64>,
}

impl ObservableSystem {
    pub fn new(measure: Arc<QuadratureMeasure>, observables: Vec<Observable>) -> Result<Self> {
        if observables.is_empty() {
            return Err(Error::Input("observable system is empty".into()));
        }
        for o in &observables {
            check_len(measure.len(), o.len())?;
        }
        let log_weights = measure.weights().iter().map(|w| w.ln()).collect();
        Ok(Self {
            measure,
            observables,
            log_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn measure(&self) -> &Arc<QuadratureMeasure> {
        &self.measure
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        check_len(self.len(), lambda.len())?;
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::Input("multiplier is not finite".into()));
        }
        Ok(())
    }

    /// Log-partition value and node probabilities `pⱼ = f(xⱼ)·wⱼ`.
    fn gibbs(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_lambda(lambda)?;
        let mut exponents = self.log_weights.clone();
        for (l, obs) in lambda.iter().zip(&self.observables) {
            if *l != 0.0 {
                for (e, x) in exponents.iter_mut().zip(obs.values()) {
                    *e += l * x;
                }
            }
        }
        let shift = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for e in exponents.iter_mut() {
            *e = (*e - shift).exp();
            sum += *e;
        }
        for e in exponents.iter_mut() {
            *e /= sum;
        }
        Ok((shift + sum.ln(), exponents))
    }

    fn moments_from(&self, probs: &[f64]) -> Vec<f64> {
        self.observables
            .iter()
            .map(|o| o.values().iter().zip(probs).map(|(x, p)| x * p).sum())
            .collect()
    }

    fn covariance_from(&self, probs: &[f64], means: &[f64]) -> DMatrix<f64> {
        let n = self.len();
        let centered: Vec<Vec<f64>> = self
            .observables
            .iter()
            .zip(means)
            .map(|(o, m)| o.values().iter().map(|x| x - m).collect())
            .collect();
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..=i {
                let c: f64 = centered[i]
                    .iter()
                    .zip(&centered[k])
                    .zip(probs)
                    .map(|((a, b), p)| a * b * p)
                    .sum();
                cov[(i, k)] = c;
                cov[(k, i)] = c;
            }
        }
        cov
    }
}

/// Fitted multipliers and the thermodynamic quantities derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntSolution {
    pub lambda: Vec<f64>,
    #[serde(rename = "w")]
    pub log_partition: f64,
    pub moments: Vec<f64>,
    pub entropy: f64,
    pub covariance: Vec<Vec<f64>>,
    #[serde(skip)]
    pub iterations: usize,
}

/// `w(λ) = log Σⱼ exp(Σᵢ λᵢFᵢ(xⱼ))·wⱼ`, evaluated with a max shift.
pub fn log_partition(lambda: &[f64], sys: &ObservableSystem) -> Result<f64> {
    Ok(sys.gibbs(lambda)?.0)
}

/// The Gibbs density `exp(Σ λᵢFᵢ − w)`.
pub fn gibbs_density(lambda: &[f64], sys: &ObservableSystem) -> Result<Density> {
    let (_, probs) = sys.gibbs(lambda)?;
    let values = probs
        .iter()
        .zip(sys.measure.weights())
        .map(|(p, w)| p / w)
        .collect();
    Density::new(Arc::clone(&sys.measure), values)
}

/// `qᵢ(λ) = ⟨Fᵢ⟩` under the Gibbs density, i.e. `∂w/∂λᵢ`.
pub fn moments(lambda: &[f64], sys: &ObservableSystem) -> Result<Vec<f64>> {
    let (_, probs) = sys.gibbs(lambda)?;
    Ok(sys.moments_from(&probs))
}

/// Moment covariance `⟨FᵢFⱼ⟩ − ⟨Fᵢ⟩⟨Fⱼ⟩`, the Hessian of `w`.
pub fn covariance(lambda: &[f64], sys: &ObservableSystem) -> Result<DMatrix<f64>> {
    let (_, probs) = sys.gibbs(lambda)?;
    let q = sys.moments_from(&probs);
    Ok(sys.covariance_from(&probs, &q))
}

/// `S = w − Σ λᵢqᵢ`
pub fn entropy_at(lambda: &[f64], sys: &ObservableSystem) -> Result<f64> {
    let (w, probs) = sys.gibbs(lambda)?;
    let q = sys.moments_from(&probs);
    Ok(w - dot(lambda, &q))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn condition_number(cov: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(cov.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

struct Eval {
    w: f64,
    q: Vec<f64>,
    cov: DMatrix<f64>,
}

fn evaluate(lambda: &[f64], sys: &ObservableSystem) -> Result<Eval> {
    let (w, probs) = sys.gibbs(lambda)?;
    let q = sys.moments_from(&probs);
    let cov = sys.covariance_from(&probs, &q);
    Ok(Eval { w, q, cov })
}

/// Finds the multipliers whose Gibbs density reproduces `target`.
///
/// Damped Newton on `w(λ) − λ·μ` starting from `λ = 0`, with Armijo
/// backtracking by halving. A target on or outside the hull of the
/// observable values sends `λ` to infinity; that shows up as growing steps
/// and a collapsing covariance and is reported as
/// [`Error::InfeasibleTarget`].
pub fn fit_multipliers(
    target: &[f64],
    sys: &ObservableSystem,
    opts: &SolverOptions,
) -> Result<MaxEntSolution> {
    check_len(sys.len(), target.len())?;
    if target.iter().any(|t| !t.is_finite()) {
        return Err(Error::Input("target is not finite".into()));
    }
    for (i, (obs, t)) in sys.observables.iter().zip(target).enumerate() {
        let (lo, hi) = obs
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        if !(*t > lo && *t < hi) {
            return Err(Error::InfeasibleTarget(format!(
                "target[{i}] = {t} outside ({lo}, {hi})"
            )));
        }
    }

    let n = sys.len();
    let mut lambda = vec![0.0; n];
    let mut cur = evaluate(&lambda, sys)?;
    let cond = condition_number(&cur.cov);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::DegenerateSystem(format!(
            "covariance condition number {cond:e} at λ = 0"
        )));
    }

    let mut step_norms: Vec<f64> = Vec::new();
    let mut converged_at = None;
    for iter in 0..opts.max_iter {
        let grad: Vec<f64> = cur.q.iter().zip(target).map(|(q, t)| q - t).collect();
        let gnorm = inf_norm(&grad);
        if gnorm <= opts.tol {
            converged_at = Some(iter);
            break;
        }
        let g = DVector::from_column_slice(&grad);
        let Some(chol) = cur.cov.clone().cholesky() else {
            return Err(Error::InfeasibleTarget(format!(
                "covariance collapsed at iteration {iter} (|grad| = {gnorm:e})"
            )));
        };
        let dir = -chol.solve(&g);
        let slope = g.dot(&dir);
        let obj = cur.w - dot(&lambda, target);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = lambda.iter().zip(dir.iter()).map(|(l, d)| l + t * d).collect();
            let next = evaluate(&trial, sys)?;
            let trial_obj = next.w - dot(&trial, target);
            // near the optimum the objective change drowns in rounding, so a
            // clear drop in the moment residual also counts as progress
            let trial_gnorm = inf_norm(&next.q.iter().zip(target).map(|(q, t)| q - t).collect::<Vec<_>>());
            if trial_obj <= obj + ARMIJO * t * slope || trial_gnorm <= 0.5 * gnorm {
                accepted = Some((trial, next));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, next)) = accepted else {
            // no decrease representable: accept if already close enough
            log::debug!("line search stalled at iteration {iter}, |grad| = {gnorm:e}");
            break;
        };
        step_norms.push(t * dir.amax());
        lambda = trial;
        cur = next;
    }

    let mut iterations = converged_at.unwrap_or(opts.max_iter);
    let grad_norm = |e: &Eval| inf_norm(&e.q.iter().zip(target).map(|(q, t)| q - t).collect::<Vec<_>>());
    if converged_at.is_none() && grad_norm(&cur) > opts.tol {
        let growing = step_norms.len() >= 2
            && step_norms.last().copied().unwrap_or(0.0) > step_norms[0].max(1.0);
        let lambda_big = inf_norm(&lambda) > 1e6;
        if growing || lambda_big {
            return Err(Error::InfeasibleTarget(format!(
                "Newton steps diverge (|λ| = {:e})",
                inf_norm(&lambda)
            )));
        }
        return Err(Error::NotConverged(format!(
            "|moments − target| = {:e} after {} iterations",
            grad_norm(&cur),
            opts.max_iter
        )));
    }

    // Polish with full Newton steps while they keep reducing the residual.
    for _ in 0..3 {
        let grad: Vec<f64> = cur.q.iter().zip(target).map(|(q, t)| q - t).collect();
        let Some(chol) = cur.cov.clone().cholesky() else { break };
        let dir = -chol.solve(&DVector::from_column_slice(&grad));
        let trial: Vec<f64> = lambda.iter().zip(dir.iter()).map(|(l, d)| l + d).collect();
        let next = evaluate(&trial, sys)?;
        if grad_norm(&next) < inf_norm(&grad) {
            lambda = trial;
            cur = next;
            iterations += 1;
        } else {
            break;
        }
    }

    let entropy = cur.w - dot(&lambda, &cur.q);
    let covariance = (0..n)
        .map(|i| (0..n).map(|k| cur.cov[(i, k)]).collect())
        .collect();
    Ok(MaxEntSolution {
        lambda,
        log_partition: cur.w,
        moments: cur.q,
        entropy,
        covariance,
        iterations,
    })
}
