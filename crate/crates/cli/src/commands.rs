use std::path::PathBuf;
use std::sync::Mutex;

use anyhow::{Context, Result};
use choquard::checks::{gradient_check, kernel_self_test};
use choquard::constructions::{
    decay_diagnostic, degeneracy_deltas, degeneracy_sweep, gap_grid, strict_gap_curve,
    DegeneracySweep, StrictGapCurve,
};
use choquard::solve::{groundstate_init, level_runs, solve_groundstate, LevelRuns, SolveError};
use choquard::{Params, Problem, Regime};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{self, Artifact, OutputEntry};

/// One pass/fail statement of a command, with the number it rests on.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub value: f64,
}

fn check(name: &str, value: f64, holds: bool) -> Check {
    Check {
        name: name.into(),
        holds,
        value,
    }
}

/// Writes artifacts as they are produced and remembers their digests.
pub struct Sink {
    dir: PathBuf,
    entries: Mutex<Vec<OutputEntry>>,
}

impl Sink {
    pub fn new(dir: PathBuf) -> Self {
        Sink {
            dir,
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn put(&self, artifact: Artifact) -> Result<()> {
        output::write(&self.dir, &artifact)?;
        self.entries
            .lock()
            .expect("sink poisoned")
            .push(OutputEntry {
                file: artifact.name,
                sha256: output::sha256_hex(&artifact.bytes),
            });
        Ok(())
    }

    pub fn into_entries(self) -> Vec<OutputEntry> {
        let mut e = self.entries.into_inner().expect("sink poisoned");
        e.sort_by(|a, b| a.file.cmp(&b.file));
        e
    }
}

fn problem(config: &RunConfig, params: Params) -> Result<Problem> {
    Ok(Problem::new(params, config.grid()?, config.kernel.into())?)
}

fn solved<T>(r: Result<T, SolveError>) -> Result<T> {
    r.map_err(anyhow::Error::from)
}

pub fn levels(config: &RunConfig, sink: &Sink) -> Result<bool> {
    let pr = problem(config, config.params)?;
    let runs = solved(level_runs(&pr, &config.solver))?;
    let report = runs.report(&pr, &config.solver);
    sink.put(Artifact::json("levels.json", &report)?)?;
    put_runs(config, sink, &runs, "")?;
    Ok(report.passed())
}

fn put_runs(config: &RunConfig, sink: &Sink, runs: &LevelRuns, prefix: &str) -> Result<()> {
    for (name, r) in [
        ("c_0", &runs.groundstate),
        ("c_odd", &runs.odd),
        ("c_nod", &runs.nodal),
    ] {
        sink.put(Artifact::text(
            format!("{prefix}history_{name}.csv"),
            r.history_csv(),
        ))?;
        if config.dump_fields {
            for a in Artifact::field(
                &format!("{prefix}fields/{name}"),
                &r.minimizer,
                &config.params,
            )? {
                sink.put(a)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GapReport<'a> {
    curve: &'a StrictGapCurve,
    checks: Vec<Check>,
}

/// Checks on the three largest separations of a strict-gap curve.
pub fn gap_checks(curve: &StrictGapCurve, params: &Params) -> Vec<Check> {
    let mut rows = curve.rows.clone();
    rows.sort_by(|a, b| a.r.total_cmp(&b.r));
    let tail = &rows[rows.len().saturating_sub(3)..];
    let target = params.alpha - params.dim as f64;
    let min_gap = tail.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    let monotone = tail.len() == 3 && tail.windows(2).all(|w| w[1].gap < w[0].gap);
    let exponent = curve.exponent.unwrap_or(f64::NAN);
    let t_last = tail.last().map_or(f64::NAN, |r| r.t_r);
    vec![
        check(
            "gap > 0 at the three largest R",
            min_gap,
            tail.len() == 3 && min_gap > 0.0,
        ),
        check("gap decreasing at the three largest R", min_gap, monotone),
        check(
            "fitted exponent within 15% of alpha - N",
            exponent,
            (exponent - target).abs() <= 0.15 * target.abs(),
        ),
        check(
            "t_R within 5% of 1 at the largest R",
            t_last,
            (t_last - 1.0).abs() <= 0.05,
        ),
    ]
}

pub fn strict_gap(config: &RunConfig, sink: &Sink) -> Result<bool> {
    let pr = problem(config, config.params)?;
    let g = *pr.grid();
    let gs = solved(solve_groundstate(
        &pr,
        &config.solver,
        groundstate_init(g, config.seed),
    ))?;
    let r_max = config.r_list.iter().copied().fold(0.0, f64::max);
    let big = gap_grid(&g, r_max)?;
    eprintln!(
        "strict-gap: c_0 = {:.10}, embedding into {} nodes per axis",
        gs.level,
        big.n()
    );
    let wide = Problem::new(config.params, big, config.kernel.into())?;
    let curve = strict_gap_curve(&wide, &gs.minimizer, &config.r_list)?;
    let checks = gap_checks(&curve, &config.params);
    let mut csv = curve.to_csv();
    match curve.exponent {
        Some(e) => csv += &format!("# fitted exponent: {e:e}\n"),
        None => csv += "# fitted exponent: none\n",
    }
    for (r, why) in &curve.skipped {
        csv += &format!("# skipped R = {r:e}: {why}\n");
    }
    sink.put(Artifact::text("strict_gap.csv", csv))?;
    sink.put(Artifact::json(
        "strict_gap.json",
        &GapReport {
            curve: &curve,
            checks: checks.clone(),
        },
    )?)?;
    let decay = decay_diagnostic(&pr, &gs.minimizer)?;
    sink.put(Artifact::text("decay.csv", decay.to_csv()))?;
    sink.put(Artifact::text("history_c_0.csv", gs.history_csv()))?;
    Ok(checks.iter().all(|c| c.holds))
}

#[derive(Serialize)]
struct SweepPoint {
    p: f64,
    regime: Option<Regime>,
    c_0: Option<f64>,
    c_odd: Option<f64>,
    c_nod: Option<f64>,
    collapsed: Option<bool>,
    /// `None` where no verdict is asserted.
    passed: Option<bool>,
    error: Option<String>,
}

fn sweep_point(config: &RunConfig, p: f64) -> SweepPoint {
    let params = Params { p, ..config.params };
    let run = problem(config, params).and_then(|pr| {
        let runs = solved(level_runs(&pr, &config.solver))?;
        Ok(runs.report(&pr, &config.solver))
    });
    match run {
        Ok(rep) => SweepPoint {
            p,
            regime: Some(rep.regime),
            c_0: Some(rep.c_0.level),
            c_odd: Some(rep.c_odd.level),
            c_nod: Some(rep.c_nod.level),
            collapsed: Some(rep.c_nod.flags.sign_collapsed),
            passed: (!rep.verdicts.is_empty()).then(|| rep.passed()),
            error: None,
        },
        Err(e) => SweepPoint {
            p,
            regime: Some(params.regime()),
            c_0: None,
            c_odd: None,
            c_nod: None,
            collapsed: None,
            passed: Some(false),
            error: Some(format!("{e:#}")),
        },
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep_p(config: &RunConfig, sink: &Sink, pool: &rayon::ThreadPool) -> Result<bool> {
    let points: Vec<SweepPoint> = pool.install(|| {
        config
            .p_list
            .par_iter()
            .map(|&p| {
                let point = sweep_point(config, p);
                eprintln!("sweep-p: p = {p} done");
                sink.put(Artifact::json(format!("sweep/p_{p}.json"), &point)?)?;
                Ok(point)
            })
            .collect::<Result<_>>()
    })?;
    let mut csv = String::from("p,c_0,c_odd,c_nod,collapsed,verdict,error\n");
    for pt in &points {
        let verdict = match pt.passed {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "none",
        };
        csv += &format!(
            "{},{},{},{},{},{verdict},{}\n",
            pt.p,
            opt(pt.c_0.map(|v| format!("{v:e}"))),
            opt(pt.c_odd.map(|v| format!("{v:e}"))),
            opt(pt.c_nod.map(|v| format!("{v:e}"))),
            opt(pt.collapsed),
            opt(pt
                .error
                .as_ref()
                .map(|e| format!("\"{}\"", e.replace('"', "'")))),
        );
    }
    sink.put(Artifact::text("sweep_p.csv", csv))?;
    Ok(points.iter().all(|p| p.passed != Some(false)))
}

#[derive(Serialize)]
struct DegeneracyReport<'a> {
    grid: choquard::Grid,
    sweep: &'a DegeneracySweep,
    checks: Vec<Check>,
}

/// Checks on a degeneracy sweep: the minimum action sits within 1% of
/// `c_0` and not below it, the narrowest width reaches the limiting
/// multiplier within 5%, and the `H^1` distance to the groundstate shrinks.
pub fn degeneracy_checks(sweep: &DegeneracySweep, grad_tol: f64) -> Vec<Check> {
    let c0 = sweep.c_0;
    let min = sweep.min_action().unwrap_or(f64::NAN);
    let last = sweep.rows.last();
    let lim = last.map_or(f64::NAN, |r| (r.s_minus / sweep.limit.1 - 1.0).abs());
    let dist = sweep.rows.windows(2).all(|w| w[1].distance < w[0].distance);
    vec![
        check(
            "min action within 1% of c_0",
            (min - c0) / c0,
            min <= 1.01 * c0,
        ),
        check(
            "min action >= c_0 (1 - grad_tol)",
            (min - c0) / c0,
            min >= c0 * (1.0 - grad_tol),
        ),
        check("narrowest width within 5% of the limit", lim, lim <= 0.05),
        check(
            "H1 distance decreasing",
            last.map_or(f64::NAN, |r| r.distance),
            dist && sweep.rows.len() >= 2,
        ),
    ]
}

pub fn degeneracy(config: &RunConfig, sink: &Sink) -> Result<bool> {
    let pr = problem(config, config.params)?;
    let g = *pr.grid();
    let mut gs = solved(solve_groundstate(
        &pr,
        &config.solver,
        groundstate_init(g, config.seed),
    ))?;
    let mut pr = pr;
    if config.refine > 1 {
        let fine = choquard::Grid::new(g.dim(), g.n() * config.refine, g.extent())?;
        pr = Problem::new(config.params, fine, config.kernel.into())?;
        let u = gs.minimizer.refine(config.refine)?;
        gs = solved(solve_groundstate(&pr, &config.solver, u))?;
    }
    eprintln!(
        "degeneracy: c_0 = {:.10} on {} nodes per axis",
        gs.level,
        pr.grid().n()
    );
    let deltas = degeneracy_deltas(pr.grid());
    let sweep =
        degeneracy_sweep(&pr, &gs.minimizer, gs.level, &deltas).context("degeneracy sweep")?;
    let checks = degeneracy_checks(&sweep, config.solver.grad_tol);
    sink.put(Artifact::text("degeneracy.csv", sweep.to_csv()))?;
    sink.put(Artifact::json(
        "degeneracy.json",
        &DegeneracyReport {
            grid: *pr.grid(),
            sweep: &sweep,
            checks: checks.clone(),
        },
    )?)?;
    Ok(checks.iter().all(|c| c.holds))
}

#[derive(Serialize)]
struct SelfTestReport {
    result: choquard::checks::KernelSelfTest,
    passed: bool,
}

pub fn kernel_selftest(config: &RunConfig, sink: &Sink) -> Result<bool> {
    let result = kernel_self_test(config.seed)?;
    let passed = result.passed();
    sink.put(Artifact::json(
        "kernel_selftest.json",
        &SelfTestReport { result, passed },
    )?)?;
    Ok(passed)
}

#[derive(Serialize)]
struct GradReport {
    result: choquard::checks::GradientCheck,
    checks: Vec<Check>,
}

pub fn gradcheck(config: &RunConfig, sink: &Sink) -> Result<bool> {
    let pr = problem(config, config.params)?;
    let result = gradient_check(&pr, config.seed, config.gradcheck_fields)?;
    let (lo, hi) = result.slope_range();
    let checks = vec![
        check(
            "relative error <= 1e-6",
            result.worst_error,
            result.worst_error <= 1e-6,
        ),
        check("slope >= 1.8", lo, lo >= 1.8),
        check("slope <= 2.2", hi, hi <= 2.2),
    ];
    let passed = checks.iter().all(|c| c.holds);
    sink.put(Artifact::json(
        "gradcheck.json",
        &GradReport { result, checks },
    )?)?;
    Ok(passed)
}
