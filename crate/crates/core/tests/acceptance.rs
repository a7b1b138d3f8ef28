//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermoscope::gasmodels::*;
use thermoscope::kinetic::*;
use thermoscope::maxent::*;
use thermoscope::maxwell::*;
use thermoscope::measure::{relative_entropy, Density, Observable, QuadratureMeasure};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn criterion_1() -> Check {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let lambdas = [(-1.0, -1.0), (-0.35, -2.2), (-3.1, -0.6)];
    for n in [1u32, 2, 5] {
        let g = GasParameters::new(n, 0.9, 1.7, 0.0, 0.0).map_err(|e| e.to_string())?;
        for &(l1, l2) in &lambdas {
            let start = Instant::now();
            let target = [
                ideal_energy_from_lambda(l1, &g).unwrap(),
                ideal_volume_from_lambda(l2, &g).unwrap(),
            ];
            // quadrature range from a rough guess, a factor 2 off
            let sys = ideal_reduced_system(&g, (0.5 * l1, 0.5 * l2), 200, 200).map_err(|e| e.to_string())?;
            let sol = fit_multipliers(&target, &sys, &SolverOptions::default()).map_err(|e| e.to_string())?;
            slowest = slowest.max(start.elapsed());
            let (f1, f2) = (sol.lambda[0], sol.lambda[1]);
            let errs = [
                rel(ideal_energy_from_lambda(f1, &g).unwrap(), sol.moments[0]),
                rel(ideal_volume_from_lambda(f2, &g).unwrap(), sol.moments[1]),
                rel(ideal_log_partition(f1, f2, &g).unwrap(), sol.log_partition),
                rel(f1, l1),
                rel(f2, l2),
            ];
            let e = errs.iter().copied().fold(0.0, f64::max);
            ensure(e <= 1e-6, || format!("N={n}, λ=({l1},{l2}): relative error {e:e}"))?;
            worst = worst.max(e);
        }
    }
    ensure(slowest < Duration::from_secs(1), || format!("slowest fit took {slowest:?}"))?;
    Ok(format!("max relative error {worst:.2e}, slowest fit {slowest:.2?}"))
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_pv: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200u32);
        let t = 10f64.powf(rng.random_range(-3.0..3.0));
        let p = 10f64.powf(rng.random_range(-3.0..3.0));
        let pt = ideal_state(t, p, &GasParameters::ideal(n)).map_err(|e| e.to_string())?;
        ensure(pt.u == 1.5 * n as f64 * t, || format!("U = {} ≠ 1.5·{n}·{t}", pt.u))?;
        let expected = (n as f64 + 1.0) * t;
        let ulps = (pt.p * pt.v - expected).abs() / (f64::EPSILON * expected);
        ensure(ulps <= 2.0, || format!("PV off by {ulps} ulp at N={n}, T={t}, P={p}"))?;
        worst_pv = worst_pv.max(ulps);
    }
    Ok(format!("U exact in all 1000 draws; PV = (N+1)T to within {worst_pv:.1} ulp"))
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_dual: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50u32);
        let g = GasParameters::new(n, rng.random_range(0.1..10.0), rng.random_range(0.1..10.0), 0.0, 0.0).unwrap();
        let u = 10f64.powf(rng.random_range(-2.0..3.0));
        let v = 10f64.powf(rng.random_range(-2.0..3.0));
        let nf = n as f64;
        let (l1, l2) = (-1.5 * nf / u, -(nf + 1.0) / v);
        let s = ideal_entropy(u, v, &g).unwrap();
        let dual = ideal_log_partition(l1, l2, &g).unwrap() - l1 * u - l2 * v;
        let d = (s - dual).abs();
        ensure(d <= 1e-10, || format!("duality gap {d:e} at N={n}, U={u}, V={v}"))?;
        worst_dual = worst_dual.max(d);

        let (hu, hv) = (1e-5 * u, 1e-5 * v);
        let ds_du = (ideal_entropy(u + hu, v, &g).unwrap() - ideal_entropy(u - hu, v, &g).unwrap()) / (2.0 * hu);
        let ds_dv = (ideal_entropy(u, v + hv, &g).unwrap() - ideal_entropy(u, v - hv, &g).unwrap()) / (2.0 * hv);
        let e = rel(ds_du, 1.5 * nf / u).max(rel(ds_dv, (nf + 1.0) / v));
        ensure(e <= 1e-6, || format!("FD gradient error {e:e} at N={n}, U={u}, V={v}"))?;
        worst_grad = worst_grad.max(e);
    }
    Ok(format!("max duality gap {worst_dual:.2e}, max FD gradient error {worst_grad:.2e}"))
}

fn criterion_4() -> Check {
    let mut worst: f64 = 0.0;
    let mut worst_disc: f64 = 0.0;
    for (n, a, b) in [(1, 1.0, 1.0), (3, 2.5, 0.3), (10, 0.7, 4.0)] {
        let g = GasParameters::van_der_waals(n, a, b);
        let (tc, pc, vc) = critical_point_from_spinodal(&g).map_err(|e| e.to_string())?;
        let nf = n as f64;
        let e = rel(vc, 3.0 * b * nf)
            .max(rel(tc, 8.0 * a / (27.0 * b)))
            .max(rel(pc, a / (27.0 * b * b)));
        ensure(e <= 1e-8, || format!("N={n}, a={a}, b={b}: relative error {e:e}"))?;
        worst = worst.max(e);
        let (tc0, pc0, _) = vdw_critical_point(&g).unwrap();
        let d = vdw_cubic(tc0, pc0, &g).unwrap().scaled_discriminant().abs();
        ensure(d <= 1e-8, || format!("scaled discriminant {d:e} at the critical point"))?;
        worst_disc = worst_disc.max(d);
    }
    Ok(format!("max relative error {worst:.2e}, scaled discriminant {worst_disc:.2e}"))
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = GasParameters::van_der_waals(2, 1.3, 0.4);
    let (tc, pc, _) = vdw_critical_point(&g).unwrap();
    let (mut three, mut one) = (0, 0);
    for _ in 0..1000 {
        let t = rng.random_range(0.5 * tc..1.5 * tc);
        let p = rng.random_range(0.01 * pc..2.0 * pc);
        let cubic = vdw_cubic(t, p, &g).unwrap();
        let roots = vdw_volume_roots(t, p, &g).unwrap();
        let expected = if cubic.discriminant > 0.0 { 3 } else { 1 };
        ensure(roots.len() == expected, || {
            format!("T={t}, P={p}: D={:e} but {} roots {roots:?}", cubic.discriminant, roots.len())
        })?;
        if expected == 3 {
            three += 1;
        } else {
            one += 1;
        }
    }
    Ok(format!("1000/1000 agree ({three} with three roots, {one} with one)"))
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let g = GasParameters::van_der_waals(1, 1.0, 1.0);
    let (tc, pc, _) = vdw_critical_point(&g).unwrap();
    let mut report = Vec::new();
    for f in [0.5, 0.7, 0.9] {
        let t = f * tc;
        let m = maxwell_pressure(t, &g).map_err(|e| e.to_string())?;
        let scale = m.scale();
        let residual = m.equal_area_residual.abs() / scale;
        ensure(residual <= 1e-9, || format!("T={f}Tc: residual/scale {residual:e}"))?;

        let iso = sample_isotherm(t, &g, 1.05, 1.5 * m.v_vapor, 20000).map_err(|e| e.to_string())?;
        let crossing = gibbs_crossing(&iso).map_err(|e| e.to_string())?;
        let cross_err = (crossing - m.p_mx).abs() / pc;
        ensure(cross_err <= 1e-4, || format!("T={f}Tc: Gibbs crossing off by {cross_err:e}·P_c"))?;

        let sel = graph_selector(t, &g, 2.0 * pc).map_err(|e| e.to_string())?;
        let gap = sel.continuity_gap() / scale;
        ensure(gap <= 1e-8, || format!("T={f}Tc: continuity gap {gap:e}·scale"))?;

        let h = 1e-6 * m.p_mx;
        let f0 = sel.potential(m.p_mx).unwrap();
        let right = (-3.0 * f0 + 4.0 * sel.potential(m.p_mx + h).unwrap() - sel.potential(m.p_mx + 2.0 * h).unwrap())
            / (2.0 * h);
        let left = (3.0 * f0 - 4.0 * sel.potential(m.p_mx - h).unwrap() + sel.potential(m.p_mx - 2.0 * h).unwrap())
            / (2.0 * h);
        let jump_err = ((left - right) - (m.v_vapor - m.v_liquid)).abs();
        ensure(jump_err <= 1e-5, || format!("T={f}Tc: derivative jump off by {jump_err:e}"))?;
        report.push(format!("{f}Tc: res {residual:.1e}, cross {cross_err:.1e}, gap {gap:.1e}, jump {jump_err:.1e}"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("{} ({elapsed:.2?})", report.join("; ")))
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = GasParameters::van_der_waals(1, 1.0, 1.0);
    let (tc, pc, _) = vdw_critical_point(&g).unwrap();
    let t = 0.7 * tc;
    let p_ref = 2.0 * pc;
    let sel = graph_selector(t, &g, p_ref).map_err(|e| e.to_string())?;
    let p_mx = sel.p_mx().unwrap();
    let bn = g.excluded_volume();
    // f_T matches Υ + bN·P up to the constant fixed by f_T(P_ref) = 0
    let gibbs = |v: f64| -> f64 {
        let pt = vdw_state(v, t, &g).unwrap();
        pt.gibbs_free_energy + bn * pt.p
    };
    let v_ref = sel.alpha(p_ref).unwrap();
    let offset = -gibbs(v_ref);
    let (mut worst_p, mut worst_f): (f64, f64) = (0.0, 0.0);
    let mut tested = 0;
    while tested < 200 {
        let p = rng.random_range(0.1 * p_mx..p_ref);
        let h = 1e-5 * p;
        if (p - p_mx).abs() <= 4.0 * h {
            continue;
        }
        tested += 1;
        let v = (sel.potential(p + h).unwrap() - sel.potential(p - h).unwrap()) / (2.0 * h);
        let f = sel.potential(p).unwrap();
        let ep = rel(vdw_pressure(v, t, &g).unwrap(), p);
        let ef = (f - (gibbs(v) + offset)).abs() / f.abs().max(1.0);
        ensure(ep <= 1e-6 && ef <= 1e-6, || format!("P={p}: pressure error {ep:e}, potential error {ef:e}"))?;
        worst_p = worst_p.max(ep);
        worst_f = worst_f.max(ef);
    }
    Ok(format!("200 points, max pressure error {worst_p:.2e}, max potential error {worst_f:.2e}"))
}

fn random_system(rng: &mut ChaCha8Rng) -> (ObservableSystem, Vec<f64>) {
    let states = rng.random_range(8..=64usize);
    let k = rng.random_range(1..=4usize);
    let nodes: Vec<Vec<f64>> = (0..states).map(|i| vec![i as f64]).collect();
    let weights: Vec<f64> = (0..states).map(|_| rng.random_range(0.1..2.0)).collect();
    let measure = Arc::new(QuadratureMeasure::new(1, nodes, weights).unwrap());
    let observables: Vec<Observable> = (0..k)
        .map(|i| Observable::new(&format!("F{i}"), (0..states).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let lambda: Vec<f64> = (0..k).map(|_| rng.random_range(-1.5..1.5)).collect();
    (ObservableSystem::new(measure, observables).unwrap(), lambda)
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_fit, mut worst_grad, mut worst_hess): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut perturbations = 0;
    for sys_id in 0..100 {
        let (sys, lambda) = random_system(&mut rng);
        let k = lambda.len();
        let target = moments(&lambda, &sys).unwrap();
        let sol = fit_multipliers(&target, &sys, &SolverOptions::default()).map_err(|e| format!("system {sys_id}: {e}"))?;
        let fit_err = sol
            .lambda
            .iter()
            .zip(&lambda)
            .map(|(a, b)| (a - b).abs())
            .chain(sol.moments.iter().zip(&target).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        ensure(fit_err <= 1e-8, || format!("system {sys_id}: round-trip error {fit_err:e}"))?;
        worst_fit = worst_fit.max(fit_err);

        let h = 1e-5;
        let cov = covariance(&lambda, &sys).unwrap();
        for i in 0..k {
            let mut up = lambda.clone();
            let mut dn = lambda.clone();
            up[i] += h;
            dn[i] -= h;
            let dw = (log_partition(&up, &sys).unwrap() - log_partition(&dn, &sys).unwrap()) / (2.0 * h);
            let eg = (dw - target[i]).abs();
            let (qu, qd) = (moments(&up, &sys).unwrap(), moments(&dn, &sys).unwrap());
            for j in 0..k {
                let eh = ((qu[j] - qd[j]) / (2.0 * h) - cov[(j, i)]).abs();
                worst_hess = worst_hess.max(eh);
            }
            worst_grad = worst_grad.max(eg);
        }
        ensure(worst_grad <= 1e-5 && worst_hess <= 1e-5, || {
            format!("system {sys_id}: gradient error {worst_grad:e}, Hessian error {worst_hess:e}")
        })?;

        // entropy cannot increase along directions that keep mass and moments
        let gibbs = gibbs_density(&lambda, &sys).unwrap();
        let s0 = relative_entropy(&gibbs);
        let m = sys.measure();
        let w = m.weights();
        let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum::<f64>();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let constraints = std::iter::once(vec![1.0; m.len()]).chain(sys.observables().iter().map(|o| o.values().to_vec()));
        for mut v in constraints {
            for b in &basis {
                let c = inner(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let norm = inner(&v, &v).sqrt();
            if norm > 1e-12 {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
            }
        }
        for _ in 0..100 {
            let mut d: Vec<f64> = (0..m.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            for b in &basis {
                let c = inner(&d, b);
                d.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let f = gibbs.values();
            let room = f
                .iter()
                .zip(&d)
                .filter(|(_, d)| **d < 0.0)
                .map(|(f, d)| f / -d)
                .fold(f64::INFINITY, f64::min);
            let eps = rng.random_range(0.01..0.9) * room.min(1.0);
            let values: Vec<f64> = f.iter().zip(&d).map(|(f, d)| (f + eps * d).max(0.0)).collect();
            let perturbed = Density::new(Arc::clone(m), values).map_err(|e| e.to_string())?;
            let s = relative_entropy(&perturbed);
            ensure(s <= s0 + 1e-12, || format!("system {sys_id}: perturbed entropy {s} > {s0}"))?;
            perturbations += 1;
        }
    }
    Ok(format!(
        "100 systems: round trip {worst_fit:.1e}, ∇w {worst_grad:.1e}, ∇²w {worst_hess:.1e}; {perturbations} perturbations never raised entropy"
    ))
}

fn gaussian(n: usize) -> KineticState {
    let grid = PhaseGrid::new(-std::f64::consts::PI, std::f64::consts::PI, n, -6.0, 6.0, n).unwrap();
    KineticState::from_fn(grid, 0.0, |q, p| (-q * q / 0.5 - p * p / 2.0).exp()).unwrap()
}

fn criterion_9() -> Check {
    let start = Instant::now();
    // integer shifts: row j moves by (j − 32) cells per step
    let grid = PhaseGrid::new(0.0, 1.0, 64, -32.0, 32.0, 65).unwrap();
    let s0 = KineticState::from_fn(grid, 0.0, |q, p| {
        (1.1 + (2.0 * std::f64::consts::PI * q).cos()) * (-p * p / 60.0).exp()
    })
    .map_err(|e| e.to_string())?;
    let traj = free_transport_run(&s0, 1.0 / 64.0, 20).map_err(|e| e.to_string())?;
    let obs = [GridField::momentum(&grid), GridField::momentum_squared(&grid)];
    let exact = conservation_report(&traj, &obs).map_err(|e| e.to_string())?;
    ensure(
        exact.mass_drift == 0.0 && exact.entropy_drift == 0.0 && exact.mean_drifts.iter().all(|d| *d == 0.0),
        || format!("integer-shift drifts {exact:?}"),
    )?;

    let drift = |n: usize| -> Result<f64, String> {
        let s = gaussian(n);
        let traj = free_transport_run(&s, 0.01, 100).map_err(|e| e.to_string())?;
        let rep = conservation_report(&traj, &[]).map_err(|e| e.to_string())?;
        Ok(rep.entropy_drift)
    };
    let (coarse, fine) = (drift(256)?, drift(512)?);
    ensure(coarse <= 1e-3, || format!("256² entropy drift {coarse:e}"))?;
    ensure(fine <= 0.5 * coarse, || format!("refinement did not halve the drift: {coarse:e} → {fine:e}"))?;

    let g = PhaseGrid::new(-std::f64::consts::PI, std::f64::consts::PI, 64, -5.0, 5.0, 64).unwrap();
    let h = GridField::kinetic(&g, 1.0);
    let mut worst: f64 = 0.0;
    for lambda in [-0.25, -1.0, -3.0] {
        let gibbs = KineticState::from_fn(g, 0.0, |_, p| (lambda * 0.5 * p * p).exp()).unwrap();
        worst = worst.max(entropy_production(&gibbs, &h).unwrap().abs());
    }
    ensure(worst <= 1e-8, || format!("Gibbs entropy production {worst:e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "integer shift exact; entropy drift 256² {coarse:.2e} → 512² {fine:.2e}; Gibbs production {worst:.1e} ({elapsed:.2?})"
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_thermoscope"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let path = |name: &str| d.join(name).to_string_lossy().into_owned();
    std::fs::write(
        d.join("fit.json"),
        r#"{"measure": {"dim": 1, "nodes": [[0], [1], [2], [3]], "weights": [1, 1, 1, 1]},
            "observables": [{"label": "x", "values": [0, 1, 2, 3]}],
            "target": [1.2]}"#,
    )
    .map_err(|e| e.to_string())?;
    let fit_out = path("fit.out.json");
    let (fit_in, ideal, maxwell, iso, sel, traj, dump) = (
        path("fit.json"),
        path("ideal.json"),
        path("maxwell.json"),
        path("iso.csv"),
        path("sel.csv"),
        path("traj.csv"),
        path("f.bin"),
    );
    let runs: Vec<Vec<&str>> = vec![
        vec!["maxent", "--input", &fit_in, "--output", &fit_out, "--deterministic"],
        vec!["ideal", "--N", "3", "--T", "1.7", "--P", "0.4", "--output", &ideal, "--deterministic"],
        vec!["vdw-maxwell", "--a", "1", "--b", "1", "--T", "0.2", "--output", &maxwell, "--deterministic"],
        vec!["vdw-isotherm", "--a", "1", "--b", "1", "--T", "0.25", "--adjust", "true", "--output", &iso, "--deterministic"],
        vec!["vdw-selector", "--a", "1", "--b", "1", "--T", "0.25", "--output", &sel, "--deterministic"],
        vec!["transport", "--nq", "32", "--np", "32", "--steps", "10", "--dump", &dump, "--output", &traj, "--deterministic"],
    ];
    let files = |run: &[&str]| -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for w in run.windows(2) {
            if w[0] == "--output" {
                out.push(w[1].to_string());
                if w[1].ends_with(".csv") {
                    out.push(format!("{}.meta.json", w[1]));
                }
            }
            if w[0] == "--dump" {
                out.push(w[1].to_string());
            }
        }
        out
    };
    let mut compared = 0;
    for run in &runs {
        run_cli(run)?;
        let first: Vec<Vec<u8>> = files(run).iter().map(|f| std::fs::read(f).unwrap_or_default()).collect();
        run_cli(run)?;
        for (f, bytes) in files(run).iter().zip(&first) {
            ensure(!bytes.is_empty(), || format!("{f} is empty"))?;
            let again = std::fs::read(f).map_err(|e| e.to_string())?;
            ensure(&again == bytes, || format!("{} differs between runs", Path::new(f).display()))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} output files byte-identical across reruns of 6 subcommands"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("ideal-gas closed forms from generic maxent", criterion_1),
        ("ideal gas law", criterion_2),
        ("entropy duality and gradients", criterion_3),
        ("van der Waals critical point", criterion_4),
        ("root count vs discriminant", criterion_5),
        ("Maxwell construction", criterion_6),
        ("graph-selector property", criterion_7),
        ("maxent properties", criterion_8),
        ("kinetic conservation", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
