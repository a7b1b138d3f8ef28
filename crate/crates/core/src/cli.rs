//! The `thermoscope` command-line front end.
//!
//! Every subcommand reads a flat parameter map: `key = value` lines from
//! `--config`, overridden by command-line flags. Results go to `--output`
//! (or standard output) as CSV or JSON; JSON embeds the merged parameters,
//! CSV files get a `<path>.meta.json` sidecar with the same information.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::gasmodels::{ideal_state, vdw_critical_point, EquilibriumPoint, GasParameters};
use crate::kinetic::{
    conservation_report, entropy_production, free_transport_run, GridField, KineticState, PhaseGrid, TrajectoryRow,
};
use crate::maxent::{fit_multipliers, ObservableSystem, SolverOptions};
use crate::maxwell::{graph_selector, maxwell_adjustment, maxwell_pressure, sample_isotherm, Isotherm, SelectorRow};
use crate::measure::{Observable, QuadratureMeasure};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "thermoscope", version, about = "Maximum-entropy thermodynamics toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit Gibbs multipliers to target moments on a quadrature measure
    Maxent {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        /// JSON file with `measure`, `observables` and `target`
        #[arg(long)]
        input: Option<String>,
    },
    /// Ideal-gas equilibrium point at (T, P)
    Ideal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gas: GasFlags,
        #[command(flatten)]
        temp: TempFlags,
        #[arg(long = "P")]
        p: Option<String>,
    },
    /// Sample a van der Waals isotherm, optionally Maxwell-adjusted
    VdwIsotherm {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gas: GasFlags,
        #[command(flatten)]
        temp: TempFlags,
        #[arg(long)]
        v_lo: Option<String>,
        #[arg(long)]
        v_hi: Option<String>,
        #[arg(long)]
        count: Option<String>,
        /// Replace the coexistence region by the Maxwell segment
        #[arg(long)]
        adjust: Option<String>,
    },
    /// Maxwell equal-area pressure and coexisting volumes
    VdwMaxwell {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gas: GasFlags,
        #[command(flatten)]
        temp: TempFlags,
    },
    /// Tabulate the graph-selector potential f_T(P)
    VdwSelector {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gas: GasFlags,
        #[command(flatten)]
        temp: TempFlags,
        #[arg(long)]
        p_ref: Option<String>,
        #[arg(long)]
        p_lo: Option<String>,
        #[arg(long)]
        p_hi: Option<String>,
        #[arg(long)]
        count: Option<String>,
    },
    /// Free-transport run from a Gaussian initial density
    Transport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        transport: TransportFlags,
    },
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// Flat `key = value` parameter file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (standard output when absent)
    #[arg(long)]
    output: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Request bit-reproducible output
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Debug, Default)]
pub struct GasFlags {
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long = "C")]
    c: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct TempFlags {
    #[arg(long = "T")]
    t: Option<String>,
    /// Comma-separated temperatures, one output file each
    #[arg(long)]
    temps: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct SolverFlags {
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct TransportFlags {
    #[arg(long)]
    nq: Option<String>,
    #[arg(long)]
    np: Option<String>,
    #[arg(long)]
    q_min: Option<String>,
    #[arg(long)]
    q_max: Option<String>,
    #[arg(long)]
    p_min: Option<String>,
    #[arg(long)]
    p_max: Option<String>,
    #[arg(long)]
    q0: Option<String>,
    #[arg(long)]
    p0: Option<String>,
    #[arg(long)]
    sigma_q: Option<String>,
    #[arg(long)]
    sigma_p: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    m: Option<String>,
    /// Binary snapshot of the final density
    #[arg(long)]
    dump: Option<String>,
}

/// Failure of a CLI run: bad usage (exit 2) or a failed computation
/// (exit 1).
#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

const GAS_KEYS: &[&str] = &["gas.N", "gas.m", "gas.C", "gas.a", "gas.b"];
const COMMON_KEYS: &[&str] = &["output", "format", "deterministic"];

fn canonical_key(key: &str) -> &str {
    match key {
        "N" => "gas.N",
        "m" => "gas.m",
        "C" => "gas.C",
        "a" => "gas.a",
        "b" => "gas.b",
        "tol" => "maxent.tol",
        "max_iter" => "maxent.max_iter",
        "maxent.deterministic" => "deterministic",
        other => other,
    }
}

fn allowed_keys(command: &str) -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = COMMON_KEYS.to_vec();
    let specific: &[&'static str] = match command {
        "maxent" => &["input", "maxent.tol", "maxent.max_iter"],
        "ideal" => &["T", "temps", "P"],
        "vdw-isotherm" => &["T", "temps", "v_lo", "v_hi", "count", "adjust"],
        "vdw-maxwell" => &["T", "temps"],
        "vdw-selector" => &["T", "temps", "p_ref", "p_lo", "p_hi", "count"],
        "transport" => &[
            "nq", "np", "q_min", "q_max", "p_min", "p_max", "q0", "p0", "sigma_q", "sigma_p", "dt", "steps", "gas.m",
            "dump",
        ],
        _ => &[],
    };
    keys.extend_from_slice(specific);
    if command.starts_with("ideal") || command.starts_with("vdw") {
        keys.extend_from_slice(GAS_KEYS);
    }
    keys
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected 'key = value'", lineno + 1));
        };
        let v = v.trim();
        let v = v
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .unwrap_or(v);
        out.push((k.trim().to_string(), v.to_string()));
    }
    Ok(out)
}

/// Merged parameters for one run.
#[derive(Debug, Clone)]
struct Params {
    command: &'static str,
    map: BTreeMap<String, String>,
}

impl Params {
    fn build(command: &'static str, config: Option<&Path>, flags: Vec<(&str, Option<String>)>) -> Outcome<Self> {
        let allowed = allowed_keys(command);
        let mut map = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(Error::from)?;
            for (k, v) in parse_config(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))? {
                let key = canonical_key(&k);
                if !allowed.contains(&key) {
                    return Err(Failure::Usage(format!("unknown key '{k}' for {command}")));
                }
                map.insert(key.to_string(), v);
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(canonical_key(k).to_string(), v);
            }
        }
        Ok(Self { command, map })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Outcome<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("invalid value '{v}' for '{key}'"))),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Outcome<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Outcome<T> {
        self.parse(key)?
            .ok_or_else(|| Failure::Usage(format!("missing required parameter '--{}'", key.trim_start_matches("gas."))))
    }

    fn flag(&self, key: &str) -> Outcome<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some("true" | "1" | "yes" | "") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(Failure::Usage(format!("invalid value '{v}' for '{key}'"))),
        }
    }

    fn gas(&self) -> Outcome<GasParameters> {
        let d = GasParameters::default();
        let g = GasParameters {
            n: self.get("gas.N", d.n)?,
            m: self.get("gas.m", d.m)?,
            c: self.get("gas.C", d.c)?,
            a: self.get("gas.a", d.a)?,
            b: self.get("gas.b", d.b)?,
        };
        g.validate()?;
        Ok(g)
    }

    fn format(&self, default: Format) -> Outcome<Format> {
        match self.raw("format") {
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            Some(other) => Err(Failure::Usage(format!("unknown format '{other}' (csv or json)"))),
            None => Ok(match self.raw("output") {
                Some(p) if p.ends_with(".csv") => Format::Csv,
                Some(p) if p.ends_with(".json") => Format::Json,
                _ => default,
            }),
        }
    }

    fn metadata(&self) -> Value {
        json!({
            "command": self.command,
            "config": self.map,
            "version": VERSION,
        })
    }

    /// The temperatures of a run: `T` or the `temps` list, not both.
    fn temperatures(&self) -> Outcome<Vec<Option<String>>> {
        match (self.raw("T"), self.raw("temps")) {
            (Some(_), Some(_)) => Err(Failure::Usage("give either --T or --temps, not both".into())),
            (_, Some(list)) => {
                if self.raw("output").is_none() {
                    return Err(Failure::Usage("--temps needs --output".into()));
                }
                let temps: Vec<Option<String>> = list
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(|s| Some(s.to_string()))
                    .collect();
                if temps.is_empty() {
                    return Err(Failure::Usage("--temps is empty".into()));
                }
                Ok(temps)
            }
            _ => Ok(vec![None]),
        }
    }

    /// Copy for one temperature of a sweep, with the output path tagged.
    fn for_temperature(&self, t: &str) -> Self {
        let mut p = self.clone();
        p.map.remove("temps");
        p.map.insert("T".into(), t.to_string());
        if let Some(out) = self.raw("output") {
            p.map.insert("output".into(), tagged_path(out, t));
        }
        p
    }
}

/// `out.csv` + `0.2` → `out.T0.2.csv`
fn tagged_path(path: &str, t: &str) -> String {
    let p = Path::new(path);
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match p.extension() {
        Some(ext) => format!("{stem}.T{t}.{}", ext.to_string_lossy()),
        None => format!("{stem}.T{t}"),
    };
    p.with_file_name(name).to_string_lossy().into_owned()
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Formats a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_line(fields: &[f64]) -> String {
    fields.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(",")
}

/// `Veff,P` rows.
pub fn emit_isotherm_csv(samples: &[(f64, f64)]) -> String {
    let mut s = String::from(Isotherm::CSV_HEADER);
    s.push('\n');
    for (v, p) in samples {
        s.push_str(&csv_line(&[*v, *p]));
        s.push('\n');
    }
    s
}

/// `P,fT,dfTdP,branch` rows.
pub fn emit_selector_csv(rows: &[SelectorRow]) -> String {
    let mut s = String::from(SelectorRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&csv_line(&[r.p, r.f, r.dfdp]));
        s.push(',');
        s.push_str(r.branch.as_str());
        s.push('\n');
    }
    s
}

/// `t,mass,entropy,meanP,meanP2` rows.
pub fn emit_trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = String::from(TrajectoryRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&csv_line(&r.csv_fields()));
        s.push('\n');
    }
    s
}

fn emit_points_csv(points: &[EquilibriumPoint]) -> String {
    let mut s = String::from(EquilibriumPoint::CSV_HEADER);
    s.push('\n');
    for p in points {
        s.push_str(&csv_line(&p.csv_fields()));
        s.push('\n');
    }
    s
}

fn to_json(value: &Value) -> Outcome<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

/// One rendered result: the CSV body or the JSON `result` value.
enum Rendered {
    Csv(String),
    Json(Value),
}

fn deliver(params: &Params, rendered: Rendered) -> Outcome<()> {
    let out = params.raw("output").map(PathBuf::from);
    let (body, sidecar) = match rendered {
        Rendered::Csv(csv) => (csv, Some(to_json(&params.metadata())?)),
        Rendered::Json(result) => {
            let mut doc = params.metadata();
            doc["result"] = result;
            (to_json(&doc)?, None)
        }
    };
    match out {
        Some(path) => {
            write_atomic(&path, body.as_bytes()).map_err(Error::from)?;
            if let Some(meta) = sidecar {
                let mut meta_path = path.into_os_string();
                meta_path.push(".meta.json");
                write_atomic(Path::new(&meta_path), meta.as_bytes()).map_err(Error::from)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes()).map_err(Error::from)?;
        }
    }
    Ok(())
}

/// Runs one computation per temperature (in parallel for sweeps).
fn per_temperature(params: &Params, job: fn(&Params) -> Outcome<Rendered>) -> Outcome<()> {
    let temps = params.temperatures()?;
    if temps.len() == 1 && temps[0].is_none() {
        let rendered = job(params)?;
        return deliver(params, rendered);
    }
    let runs: Vec<Params> = temps.iter().flatten().map(|t| params.for_temperature(t)).collect();
    let results: Vec<Outcome<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|p| scope.spawn(move || job(p).and_then(|r| deliver(p, r))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Failure::Usage("worker panicked".into()))))
            .collect()
    });
    results.into_iter().collect()
}

fn run_ideal(params: &Params) -> Outcome<Rendered> {
    let g = params.gas()?;
    let t: f64 = params.require("T")?;
    let p: f64 = params.require("P")?;
    let point = ideal_state(t, p, &g)?;
    Ok(match params.format(Format::Json)? {
        Format::Csv => Rendered::Csv(emit_points_csv(&[point])),
        Format::Json => Rendered::Json(serde_json::to_value(point).map_err(Error::from)?),
    })
}

fn run_isotherm(params: &Params) -> Outcome<Rendered> {
    let g = params.gas()?;
    let t: f64 = params.require("T")?;
    let bn = g.excluded_volume();
    let base = if bn > 0.0 { bn } else { g.n as f64 };
    let v_lo = params.get("v_lo", if bn > 0.0 { 1.2 * bn } else { 0.1 * base })?;
    let v_hi = params.get("v_hi", 30.0 * base)?;
    let count = params.get("count", 400usize)?;
    let iso = sample_isotherm(t, &g, v_lo, v_hi, count)?;
    let (iso, cliff) = if params.flag("adjust")? {
        let mr = match maxwell_pressure(t, &g) {
            Ok(m) => Some(m),
            Err(Error::NoCoexistence(_)) => None,
            Err(e) => return Err(e.into()),
        };
        maxwell_adjustment(&iso, mr.as_ref())?
    } else {
        (iso, None)
    };
    Ok(match params.format(Format::Csv)? {
        Format::Csv => Rendered::Csv(emit_isotherm_csv(iso.samples())),
        Format::Json => Rendered::Json(json!({
            "T": t,
            "cliff": cliff,
            "samples": iso.samples().iter().map(|(v, p)| json!({"Veff": v, "P": p})).collect::<Vec<_>>(),
        })),
    })
}

fn run_maxwell(params: &Params) -> Outcome<Rendered> {
    let g = params.gas()?;
    let t: f64 = params.require("T")?;
    let mr = maxwell_pressure(t, &g)?;
    if mr.near_critical {
        log::warn!("T = {t} is near critical; reporting a best estimate");
    }
    Ok(match params.format(Format::Json)? {
        Format::Csv => Rendered::Csv(format!(
            "T,P_mx,V_liquid,V_vapor,residual\n{}\n",
            csv_line(&[mr.t, mr.p_mx, mr.v_liquid, mr.v_vapor, mr.equal_area_residual])
        )),
        Format::Json => Rendered::Json(serde_json::to_value(mr).map_err(Error::from)?),
    })
}

fn run_selector(params: &Params) -> Outcome<Rendered> {
    let g = params.gas()?;
    let t: f64 = params.require("T")?;
    let (_, pc, _) = vdw_critical_point(&g)?;
    let p_ref = params.get("p_ref", 2.0 * pc)?;
    let sel = graph_selector(t, &g, p_ref)?;
    let p_lo = params.get("p_lo", sel.p_mx().map_or(0.05 * pc, |p| 0.2 * p))?;
    let p_hi = params.get("p_hi", 1.5 * pc)?;
    let count = params.get("count", 200usize)?;
    let rows = sel.table(p_lo, p_hi, count)?;
    Ok(match params.format(Format::Csv)? {
        Format::Csv => Rendered::Csv(emit_selector_csv(&rows)),
        Format::Json => Rendered::Json(json!({
            "T": t,
            "P_ref": p_ref,
            "anchor": "f_T(P_ref) = 0; the potential is defined up to an additive constant",
            "coexistence": sel.coexistence,
            "jump": sel.jump,
            "continuity_gap": sel.continuity_gap(),
            "rows": rows,
        })),
    })
}

fn run_transport(params: &Params) -> Outcome<Rendered> {
    let pi = std::f64::consts::PI;
    let grid = PhaseGrid::new(
        params.get("q_min", -pi)?,
        params.get("q_max", pi)?,
        params.get("nq", 128usize)?,
        params.get("p_min", -6.0)?,
        params.get("p_max", 6.0)?,
        params.get("np", 128usize)?,
    )?;
    let (q0, p0) = (params.get("q0", 0.0)?, params.get("p0", 0.0)?);
    let (sq, sp) = (params.get("sigma_q", 0.5)?, params.get("sigma_p", 1.0)?);
    if !(sq > 0.0) || !(sp > 0.0) {
        return Err(Error::Input("sigma_q and sigma_p must be positive".into()).into());
    }
    let dt = params.get("dt", 0.01)?;
    let steps = params.get("steps", 100usize)?;
    let m = params.get("gas.m", 1.0)?;
    let f0 = KineticState::from_fn(grid, 0.0, |q, p| {
        (-0.5 * ((q - q0) / sq).powi(2) - 0.5 * ((p - p0) / sp).powi(2)).exp()
    })?;
    let trajectory = free_transport_run(&f0, dt, steps)?;
    if let Some(path) = params.raw("dump") {
        let mut buf = Vec::new();
        trajectory.last().expect("nonempty").write_binary(&mut buf)?;
        write_atomic(Path::new(path), &buf).map_err(Error::from)?;
    }
    let rows: Vec<TrajectoryRow> = trajectory.iter().map(KineticState::summary).collect();
    Ok(match params.format(Format::Csv)? {
        Format::Csv => Rendered::Csv(emit_trajectory_csv(&rows)),
        Format::Json => {
            let h = GridField::kinetic(&grid, m);
            let obs = [GridField::momentum(&grid), GridField::momentum_squared(&grid)];
            let report = conservation_report(&trajectory, &obs)?;
            let production = trajectory
                .iter()
                .map(|s| entropy_production(s, &h))
                .collect::<Result<Vec<_>, _>>()?;
            Rendered::Json(json!({
                "rows": rows,
                "entropy_production": production,
                "renormalization": trajectory.iter().map(|s| s.renormalization).collect::<Vec<_>>(),
                "mass_drift": report.mass_drift,
                "entropy_drift": report.entropy_drift,
                "mean_drifts": report.labels.iter().zip(&report.mean_drifts).map(|(l, d)| (l.clone(), *d)).collect::<BTreeMap<_, _>>(),
            }))
        }
    })
}

/// Input document of `maxent`.
#[derive(Debug, Deserialize)]
struct MaxentInput {
    measure: crate::measure::MeasureDocument,
    observables: Vec<ObservableInput>,
    target: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct ObservableInput {
    label: String,
    values: Vec<f64>,
}

fn run_maxent(params: &Params) -> Outcome<Rendered> {
    let path: String = params.require("input")?;
    let text = std::fs::read_to_string(&path).map_err(Error::from)?;
    let input: MaxentInput = serde_json::from_str(&text).map_err(Error::from)?;
    let measure: Arc<QuadratureMeasure> = Arc::new(input.measure.to_measure()?);
    let observables = input
        .observables
        .iter()
        .map(|o| Observable::new(&o.label, o.values.clone()))
        .collect::<crate::Result<Vec<_>>>()?;
    let labels: Vec<String> = input.observables.iter().map(|o| o.label.clone()).collect();
    let sys = ObservableSystem::new(measure, observables)?;
    let d = SolverOptions::default();
    let opts = SolverOptions {
        tol: params.get("maxent.tol", d.tol)?,
        max_iter: params.get("maxent.max_iter", d.max_iter)?,
        deterministic: params.flag("deterministic")? || d.deterministic,
    };
    let sol = fit_multipliers(&input.target, &sys, &opts)?;
    Ok(match params.format(Format::Json)? {
        Format::Csv => {
            let mut s = String::from("label,lambda,target,moment\n");
            for (i, label) in labels.iter().enumerate() {
                s.push_str(label);
                s.push(',');
                s.push_str(&csv_line(&[sol.lambda[i], input.target[i], sol.moments[i]]));
                s.push('\n');
            }
            Rendered::Csv(s)
        }
        Format::Json => Rendered::Json(serde_json::to_value(&sol).map_err(Error::from)?),
    })
}

fn dispatch(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Maxent { common, solver, input } => {
            let params = Params::build(
                "maxent",
                common.config.as_deref(),
                vec![
                    ("output", common.output),
                    ("format", common.format),
                    ("deterministic", common.deterministic.then(|| "true".into())),
                    ("input", input),
                    ("tol", solver.tol),
                    ("max_iter", solver.max_iter),
                ],
            )?;
            let rendered = run_maxent(&params)?;
            deliver(&params, rendered)
        }
        Command::Ideal { common, gas, temp, p } => {
            let mut flags = common_flags(common.output, common.format, common.deterministic);
            flags.extend(gas_flags(gas));
            flags.extend([("T", temp.t), ("temps", temp.temps), ("P", p)]);
            let params = Params::build("ideal", common.config.as_deref(), flags)?;
            per_temperature(&params, run_ideal)
        }
        Command::VdwIsotherm {
            common,
            gas,
            temp,
            v_lo,
            v_hi,
            count,
            adjust,
        } => {
            let mut flags = common_flags(common.output, common.format, common.deterministic);
            flags.extend(gas_flags(gas));
            flags.extend([
                ("T", temp.t),
                ("temps", temp.temps),
                ("v_lo", v_lo),
                ("v_hi", v_hi),
                ("count", count),
                ("adjust", adjust),
            ]);
            let params = Params::build("vdw-isotherm", common.config.as_deref(), flags)?;
            per_temperature(&params, run_isotherm)
        }
        Command::VdwMaxwell { common, gas, temp } => {
            let mut flags = common_flags(common.output, common.format, common.deterministic);
            flags.extend(gas_flags(gas));
            flags.extend([("T", temp.t), ("temps", temp.temps)]);
            let params = Params::build("vdw-maxwell", common.config.as_deref(), flags)?;
            per_temperature(&params, run_maxwell)
        }
        Command::VdwSelector {
            common,
            gas,
            temp,
            p_ref,
            p_lo,
            p_hi,
            count,
        } => {
            let mut flags = common_flags(common.output, common.format, common.deterministic);
            flags.extend(gas_flags(gas));
            flags.extend([
                ("T", temp.t),
                ("temps", temp.temps),
                ("p_ref", p_ref),
                ("p_lo", p_lo),
                ("p_hi", p_hi),
                ("count", count),
            ]);
            let params = Params::build("vdw-selector", common.config.as_deref(), flags)?;
            per_temperature(&params, run_selector)
        }
        Command::Transport { common, transport: tf } => {
            let mut flags = common_flags(common.output, common.format, common.deterministic);
            flags.extend([
                ("nq", tf.nq),
                ("np", tf.np),
                ("q_min", tf.q_min),
                ("q_max", tf.q_max),
                ("p_min", tf.p_min),
                ("p_max", tf.p_max),
                ("q0", tf.q0),
                ("p0", tf.p0),
                ("sigma_q", tf.sigma_q),
                ("sigma_p", tf.sigma_p),
                ("dt", tf.dt),
                ("steps", tf.steps),
                ("m", tf.m),
                ("dump", tf.dump),
            ]);
            let params = Params::build("transport", common.config.as_deref(), flags)?;
            let rendered = run_transport(&params)?;
            deliver(&params, rendered)
        }
    }
}

fn common_flags(output: Option<String>, format: Option<String>, deterministic: bool) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("output", output),
        ("format", format),
        ("deterministic", deterministic.then(|| "true".into())),
    ]
}

fn gas_flags(g: GasFlags) -> Vec<(&'static str, Option<String>)> {
    vec![("N", g.n), ("m", g.m), ("C", g.c), ("a", g.a), ("b", g.b)]
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("THERMOSCOPE_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 2 on usage errors, 1 when the computation fails.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let name = match &cli.command {
        Command::Maxent { .. } => "maxent",
        Command::Ideal { .. } => "ideal",
        Command::VdwIsotherm { .. } => "vdw-isotherm",
        Command::VdwMaxwell { .. } => "vdw-maxwell",
        Command::VdwSelector { .. } => "vdw-selector",
        Command::Transport { .. } => "transport",
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: usage: {msg}");
            let mut cmd = Cli::command();
            if let Some(sub) = cmd.find_subcommand_mut(name) {
                let mut sub = sub.clone().bin_name(format!("thermoscope {name}"));
                eprintln!("{}", sub.render_usage());
            }
            2
        }
        Err(Failure::Run(e)) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {detail}", e.kind());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let parsed = parse_config("# comment\n\ngas.N = 2\nT=3 \n name = \"x y\"\n").unwrap();
        assert_eq!(
            parsed,
            vec![
                ("gas.N".to_string(), "2".to_string()),
                ("T".to_string(), "3".to_string()),
                ("name".to_string(), "x y".to_string()),
            ]
        );
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn tagged_paths() {
        assert_eq!(tagged_path("out/iso.csv", "0.2"), "out/iso.T0.2.csv");
        assert_eq!(tagged_path("iso", "1"), "iso.T1");
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(9.0), "9.0000000000000000e0");
    }

    #[test]
    fn empty_tables_are_header_only() {
        assert_eq!(emit_isotherm_csv(&[]), "Veff,P\n");
        assert_eq!(emit_selector_csv(&[]), "P,fT,dfTdP,branch\n");
        assert_eq!(emit_trajectory_csv(&[]), "t,mass,entropy,meanP,meanP2\n");
    }

    #[test]
    fn aliases_map_to_canonical_keys() {
        assert_eq!(canonical_key("N"), "gas.N");
        assert_eq!(canonical_key("tol"), "maxent.tol");
        assert_eq!(canonical_key("T"), "T");
    }
}
