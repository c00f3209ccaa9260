use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use smoothset::dimension::default_window;
use smoothset::generate::{undecided_mass, RNG_NAME};
use smoothset::io::{load_grid, save_grid};
use smoothset::scaffold::{estimate_eset, CRule};
use smoothset::transform::*;
use smoothset::{
    box_count, build_generations, estimate_modulus, fixture, generate_martingale_set, scaffold_box_dim,
    CountMode, MartingaleSchedule, MassGrid, PairMode, Scaffold, ScheduleParams,
};

use crate::args::*;

/// Why a run stopped early.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, bad config or unreadable input; exit 2.
    Invalid(String),
    /// A bound was violated; exit 3.
    Check(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(m) => write!(f, "error: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<smoothset::Error> for Failure {
    fn from(e: smoothset::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

pub type Outcome = Result<Report, Failure>;

/// Files written by a command and whether every check held.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub failed_checks: Vec<String>,
}

impl Report {
    fn into_outcome(self) -> Outcome {
        match self.failed_checks.first() {
            Some(first) => Err(Failure::Check(format!("{} failed, first: {first}", self.failed_checks.len()))),
            None => Ok(self),
        }
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load(input: &Option<PathBuf>) -> Result<MassGrid, Failure> {
    let path = input.as_ref().ok_or_else(|| Failure::Invalid("missing --in".into()))?;
    load_grid(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes to `out`, or to standard output when there is none.
fn emit(out: &Option<PathBuf>, report: &mut Report, body: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => {
            fs::write(p, body)?;
            report.files.push(p.clone());
        }
        None => io::stdout().write_all(body)?,
    }
    Ok(())
}

fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Failure::Invalid(e.to_string()))
}

pub fn gen(a: &GenArgs) -> Outcome {
    let out = a.out.as_ref().ok_or_else(|| Failure::Invalid("missing --out".into()))?;
    let (grid, schedule) = match a.fixture {
        Some(f) => (fixture(f, a.n, a.levels)?, None),
        None => {
            let mut s = MartingaleSchedule::new(a.levels, a.seed);
            if let Some(rule) = &a.rule {
                s = s.with_rule(rule.clone());
            }
            (generate_martingale_set(&s, a.n)?, Some(s))
        }
    };
    save_grid(&grid, out)?;
    let meta = sidecar(out, ".json");
    write_json(
        &meta,
        &json!({
            "dim": grid.dim(),
            "level": grid.level(),
            "schedule": schedule,
            "fixture": a.fixture,
            "seed": a.seed,
            "rng": RNG_NAME,
            "undecidedMass": undecided_mass(&grid),
        }),
    )?;
    Ok(Report { files: vec![out.clone(), meta], failed_checks: Vec::new() })
}

fn pair_mode(mode: &str, stride: Option<u32>, angle: f64, samples: usize) -> Result<PairMode, Failure> {
    match mode {
        "dyadic" => Ok(PairMode::Dyadic),
        "lattice" => Ok(PairMode::Lattice { stride }),
        "rotated" => Ok(PairMode::Rotated { angle, stride, samples }),
        other => Err(Failure::Invalid(format!("unknown mode {other:?}"))),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ModulusRow {
    mode: String,
    j: u32,
    t: f64,
    omega: f64,
    pair_count: u64,
}

pub fn modulus(a: &ModulusArgs) -> Outcome {
    let grid = load(&a.input)?;
    let scales = a.scales.as_ref().map_or_else(|| (1..=grid.level()).collect(), |s| s.0.clone());
    let mode = pair_mode(&a.mode, a.stride, a.angle, a.samples)?;
    let profile = estimate_modulus(&grid, &scales, mode)?;
    let name = profile.mode.name();
    let rows: Vec<ModulusRow> = profile
        .samples
        .iter()
        .map(|s| ModulusRow { mode: name.clone(), j: s.level, t: s.t, omega: s.omega, pair_count: s.pair_count })
        .collect();
    let mut report = Report::default();
    emit(&a.out, &mut report, &csv_bytes(&rows)?)?;
    if let Some(out) = &a.out {
        let witnesses: Vec<_> = profile.samples.iter().map(|s| json!({"j": s.level, "witness": s.witness})).collect();
        let path = sidecar(out, ".witness.json");
        write_json(&path, &json!({"mode": profile.mode, "witnesses": witnesses}))?;
        report.files.push(path);
    }
    Ok(report)
}

fn full_profile(grid: &MassGrid, mode: PairMode) -> Result<smoothset::ModulusProfile, Failure> {
    let scales: Vec<u32> = (1..=grid.level()).collect();
    Ok(estimate_modulus(grid, &scales, mode)?)
}

pub fn scaffold(a: &ScaffoldArgs) -> Outcome {
    let grid = load(&a.input)?;
    let mode = match a.mode.as_str() {
        "dyadic" | "lattice" => pair_mode(&a.mode, a.stride, 0.0, 0)?,
        other => return Err(Failure::Invalid(format!("unknown mode {other:?}"))),
    };
    let profile = full_profile(&grid, mode)?;
    let rule = CRule { base: a.cbase.unwrap_or(2.0 * grid.dim() as f64), slope: a.cslope };
    let params = match a.k0 {
        Some(k0) => ScheduleParams::with_k0(a.alpha, &profile, grid.level(), rule, a.maxgen, k0)?,
        None => ScheduleParams::from_profile(a.alpha, &profile, grid.level(), rule, a.maxgen)?,
    };
    let s = build_generations(&grid, &params, a.maxgen)?;
    let mut report = Report::default();
    emit(&a.out, &mut report, format!("{}\n", s.to_json()).as_bytes())?;
    for c in &s.checks {
        if c.violations() > 0 {
            report.failed_checks.push(format!("generation {}: {} violations", c.generation, c.violations()));
        }
    }
    if s.truncated {
        eprintln!("note: stopped at the grid resolution after {} generations", s.generations.len() - 1);
    }
    report.into_outcome()
}

pub fn eset(a: &EsetArgs) -> Outcome {
    let grid = load(&a.input)?;
    let e = estimate_eset(&grid, a.alpha, a.tau, a.settle)?;
    let mut report = Report::default();
    emit(&a.out, &mut report, format!("{}\n", serde_json::to_string_pretty(&e)?).as_bytes())?;
    Ok(report)
}

#[derive(Serialize)]
struct CheckRow {
    check: &'static str,
    scale: u32,
    measured: f64,
    bound: Option<f64>,
    stderr: Option<f64>,
    pass: Option<bool>,
}

impl CheckRow {
    fn new(check: &'static str, scale: u32, measured: f64) -> Self {
        CheckRow { check, scale, measured, bound: None, stderr: None, pass: None }
    }

    fn bound(mut self, bound: f64, pass: bool) -> Self {
        self.bound = Some(bound);
        self.pass = Some(pass);
        self
    }

    fn stderr(mut self, stderr: f64) -> Self {
        self.stderr = Some(stderr);
        self
    }
}

pub fn transform(a: &TransformArgs) -> Outcome {
    let grid = load(&a.input)?;
    let k = grid.level();
    let scales = match &a.scales {
        Some(s) => s.0.clone(),
        None => (3..=7.min(k.saturating_sub(1))).collect(),
    };
    let profile = || -> Result<_, Failure> { Ok(estimate_modulus(&grid, &scales, PairMode::Lattice { stride: a.stride })?) };
    let opts = QuadratureOptions::default().with_samples(a.samples).with_seed(a.seed);
    let mut rows = Vec::new();
    let mut trend_note = None;
    match a.check.as_str() {
        "dilation" => {
            for r in verify_dilation_bound(&grid, a.lambda, a.axis, &scales, &profile()?)? {
                rows.push(CheckRow::new("dilation", r.level, r.measured).bound(r.bound, r.measured <= r.bound));
                rows.push(
                    CheckRow::new("dilation.envelope", r.level, r.measured)
                        .bound(r.envelope_bound, r.measured <= r.envelope_bound),
                );
            }
        }
        "lemma3a" => {
            for r in lemma3a_check(&grid, &scales, &profile()?)? {
                rows.push(CheckRow::new("lemma3a", r.level, r.measured).bound(r.bound, r.pass));
                rows.push(CheckRow::new("lemma3a.shift", r.level, r.shift_measured).bound(r.shift_bound, r.shift_pass));
            }
        }
        "lemma3b" => {
            for r in lemma3b_check(&grid, a.t, &scales, &profile()?)? {
                rows.push(CheckRow::new("lemma3b", r.level, r.measured).bound(r.bound, r.pass));
            }
        }
        "rotation" => {
            let report = verify_rotation_bound(&grid, a.angle, &scales, &profile()?, &opts)?;
            for r in report.rows {
                rows.push(CheckRow::new("rotation", r.level, r.gap).stderr(r.stderr));
                rows.push(
                    CheckRow::new("rotation.translation", r.level, r.translation_gap)
                        .bound(r.translation_bound, r.translation_pass),
                );
            }
        }
        "image" => {
            let map = a.map.clone().unwrap_or(MapSpec::shear(0.1, 1.0));
            let report = theorem3_checks(&grid, &map, &scales, &opts)?;
            for r in &report.rows {
                rows.push(CheckRow::new("image.volume", r.level, r.volume_gap).stderr(r.volume_stderr));
                rows.push(CheckRow::new("image.mass", r.level, r.mass_gap).stderr(r.mass_stderr));
                rows.push(CheckRow::new("image.tangent", r.level, r.tangent_residual).stderr(r.tangent_stderr));
            }
            eprintln!(
                "trends: volume {:?}, mass {:?}, tangent {:?}",
                report.volume_trend(),
                report.mass_trend(),
                report.tangent_trend()
            );
            if !report.trends_hold() {
                trend_note = Some("an image series neither vanishes nor decays".to_string());
            }
        }
        other => return Err(Failure::Invalid(format!("unknown check {other:?}"))),
    }
    let mut report = Report::default();
    emit(&a.out, &mut report, &csv_bytes(&rows)?)?;
    report.failed_checks = rows
        .iter()
        .filter(|r| r.pass == Some(false))
        .map(|r| format!("{} at scale {}", r.check, r.scale))
        .chain(trend_note)
        .collect();
    report.into_outcome()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CountRow {
    j: u32,
    count: u64,
    log_count: f64,
}

pub fn boxdim(a: &BoxdimArgs) -> Outcome {
    let (fit, lemma1) = match &a.scaffold {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
            let s: Scaffold = serde_json::from_str(&text)?;
            let d = scaffold_box_dim(&s)?;
            (d.fit, d.lemma1)
        }
        None => {
            let grid = load(&a.input)?;
            let mode = match a.mode.as_str() {
                "band" => CountMode::DensityBand,
                "support" => CountMode::Support,
                other => return Err(Failure::Invalid(format!("unknown mode {other:?}"))),
            };
            let scales = a.scales.as_ref().map_or_else(|| default_window(grid.level()), |s| s.0.clone());
            (box_count(&grid, a.band, &scales, mode)?, None)
        }
    };
    let rows: Vec<CountRow> = fit.rows().into_iter().map(|(j, count, log_count)| CountRow { j, count, log_count }).collect();
    let mut report = Report::default();
    emit(&a.out, &mut report, &csv_bytes(&rows)?)?;
    match &a.out {
        Some(out) => {
            let path = sidecar(out, ".json");
            write_json(&path, &json!({"fit": fit, "lemma1Bound": lemma1}))?;
            report.files.push(path);
        }
        None => eprintln!("slope {:.4}, r^2 {:.4}", fit.slope, fit.rsq),
    }
    Ok(report)
}

#[derive(Serialize)]
struct Step {
    name: &'static str,
    seconds: f64,
    status: String,
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Runs every subcommand on one generated set and writes a manifest.
pub fn report(a: &ReportArgs) -> Outcome {
    let dir = a.out.as_ref().ok_or_else(|| Failure::Invalid("missing --out".into()))?;
    fs::create_dir_all(dir)?;
    let grid = dir.join("set.mgr");
    let input = Some(grid.clone());
    let k = a.levels;
    let mut steps: Vec<Step> = Vec::new();
    let mut files: Vec<PathBuf> = Vec::new();
    let mut failed: Vec<String> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| -> Result<(), Failure> {
        let start = Instant::now();
        let result = f();
        let status = match result {
            Ok(r) => {
                files.extend(r.files);
                "ok".to_string()
            }
            Err(Failure::Check(m)) => {
                failed.push(format!("{name}: {m}"));
                format!("check failed: {m}")
            }
            Err(Failure::Invalid(m)) if name == "gen" => return Err(Failure::Invalid(m)),
            Err(Failure::Invalid(m)) => format!("skipped: {m}"),
        };
        steps.push(Step { name, seconds: start.elapsed().as_secs_f64(), status });
        Ok(())
    };
    run("gen", &|| gen(&GenArgs { n: a.n, levels: k, seed: a.seed, rule: None, fixture: None, out: Some(grid.clone()) }))?;
    run("modulus", &|| {
        modulus(&ModulusArgs {
            input: input.clone(),
            scales: None,
            mode: "lattice".into(),
            stride: None,
            angle: 0.0,
            samples: a.samples,
            out: Some(dir.join("modulus.csv")),
        })
    })?;
    run("scaffold", &|| {
        scaffold(&ScaffoldArgs {
            input: input.clone(),
            alpha: a.alpha,
            maxgen: a.maxgen,
            cbase: None,
            cslope: 1.0,
            k0: None,
            mode: "dyadic".into(),
            stride: None,
            out: Some(dir.join("scaffold.json")),
        })
    })?;
    run("eset", &|| {
        eset(&EsetArgs { input: input.clone(), alpha: a.alpha, tau: 0.05, settle: 0, out: Some(dir.join("eset.json")) })
    })?;
    run("boxdim", &|| {
        boxdim(&BoxdimArgs {
            input: input.clone(),
            scaffold: None,
            band: (0.25, 0.75),
            mode: "band".into(),
            scales: None,
            out: Some(dir.join("boxdim.csv")),
        })
    })?;
    if a.n == 2 {
        for (name, check) in [("dilation", "dilation"), ("lemma3a", "lemma3a"), ("image", "image")] {
            run(name, &|| {
                transform(&TransformArgs {
                    input: input.clone(),
                    check: check.into(),
                    scales: None,
                    stride: None,
                    lambda: 2.0,
                    axis: 0,
                    t: 1.25,
                    angle: std::f64::consts::FRAC_PI_6,
                    map: None,
                    samples: a.samples,
                    seed: a.seed,
                    out: Some(dir.join(format!("{name}.csv"))),
                })
            })?;
        }
    }
    let entries = files
        .iter()
        .map(|p| {
            Ok(FileEntry {
                path: p.strip_prefix(dir).unwrap_or(p).display().to_string(),
                bytes: fs::metadata(p)?.len(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let manifest = dir.join("manifest.json");
    write_json(
        &manifest,
        &json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": a,
            "seeds": {"set": a.seed, "quadrature": a.seed},
            "workers": rayon::current_num_threads(),
            "steps": steps,
            "files": entries,
        }),
    )?;
    files.push(manifest);
    Report { files, failed_checks: failed }.into_outcome()
}
