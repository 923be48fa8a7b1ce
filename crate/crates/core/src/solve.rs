//! Constrained descent for the three critical levels.
//!
//! Every solver iterates `u <- P(u - tau d)` where `d = u - (1 - Δ)^{-1} R(u)`
//! is the `H^1` gradient of the action and `P` is the projection onto the
//! constraint set: the Nehari manifold for `c_0`, its odd part for `c_odd`,
//! and the nodal set (independent sign-part scalings) for `c_nod`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions;
use crate::error::Error;
use crate::functional::{descent, ChoquardBrackets, Descent, Evaluated, Problem};
use crate::grid::{self, antisymmetrize, recenter_shift, Anchor, Field, Grid};
use crate::manifold::NodalProjection;
use crate::params::{Params, Regime};
use crate::riesz::KernelMode;

/// Sign-part balance `min(q+, q-) / max(q+, q-)` below which a nodal run
/// counts as collapsed onto a one-signed field.
pub const COLLAPSE_THRESHOLD: f64 = 1e-8;

const ARMIJO: f64 = 1e-4;
const ACTION_SLACK: f64 = 1e-13;
const MAX_HALVINGS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Constant step, every step accepted.
    Fixed,
    /// Armijo halving from `initial_step` at every iteration.
    Backtracking,
    /// Barzilai–Borwein step in the `H^1` metric with Armijo halving.
    Bb,
    /// Limited-memory BFGS direction in the `H^1` metric with Armijo halving.
    Lbfgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Stop once `||d||_{H^1} <= grad_tol ||u||_{H^1}`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub step_rule: StepRule,
    /// Re-anchor the field on the central node every this many iterations; 0 disables.
    pub recenter_every: usize,
    pub seed: u64,
    /// Largest admissible boundary-strip energy fraction.
    pub tail_guard: f64,
    pub initial_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            grad_tol: 1e-7,
            max_iter: 5000,
            step_rule: StepRule::Lbfgs,
            recenter_every: 50,
            seed: 0,
            tail_guard: 1e-6,
            initial_step: 0.5,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.grad_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParams(
                "grad_tol must be positive and max_iter at least 1".into(),
            ));
        }
        if !(self.initial_step > 0.0) || !(self.tail_guard > 0.0) {
            return Err(Error::InvalidParams(
                "initial_step and tail_guard must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub action: f64,
    pub residual: f64,
    /// Distance between the centroids of `u+^2` and `u-^2` (nodal runs).
    pub separation: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveFlags {
    pub converged: bool,
    pub sign_collapsed: bool,
    pub tail_guard_tripped: bool,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub minimizer: Field,
    pub level: f64,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<HistoryEntry>,
    pub flags: SolveFlags,
    /// Sign-part brackets of the minimizer (nodal runs).
    pub brackets: Option<ChoquardBrackets>,
    /// Last fiber projection (nodal runs).
    pub projection: Option<NodalProjection>,
}

impl SolveResult {
    pub fn balance(&self) -> Option<f64> {
        self.brackets.map(|b| b.balance())
    }

    /// `iteration,action,residual` rows with a header line.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,action,residual\n");
        for (i, h) in self.history.iter().enumerate() {
            out.push_str(&format!("{i},{:.17e},{:.17e}\n", h.action, h.residual));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("no convergence after {} iterations (residual {:.3e})", .0.iterations, .0.residual)]
    NotConverged(Box<SolveResult>),
    #[error("tail guard tripped after {} iterations", .0.iterations)]
    TailGuard(Box<SolveResult>),
}

impl SolveError {
    /// The partial result carried by run-time failures.
    pub fn partial(&self) -> Option<&SolveResult> {
        match self {
            SolveError::Core(_) => None,
            SolveError::NotConverged(r) | SolveError::TailGuard(r) => Some(r),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Constraint {
    Nehari,
    Odd,
    Nodal,
}

struct State {
    ev: Evaluated,
    desc: Descent,
    action: f64,
    residual: f64,
    brackets: Option<ChoquardBrackets>,
    projection: Option<NodalProjection>,
}

struct Driver<'a> {
    problem: &'a Problem,
    opts: SolveOptions,
    constraint: Constraint,
    weights: Vec<f64>,
}

impl Driver<'_> {
    fn project(&self, u: Field) -> Result<State, Error> {
        let p = self.problem.p();
        let (ev, brackets, projection) = match self.constraint {
            Constraint::Nehari => (self.problem.nehari_evaluated(u)?, None, None),
            Constraint::Odd => (
                self.problem.nehari_evaluated(antisymmetrize(&u))?,
                None,
                None,
            ),
            Constraint::Nodal => {
                let (ev, proj, b) = self.problem.nodal_evaluated(&u)?;
                let (sp, sm) = proj.point.scalings(p);
                (ev, Some(b.scaled(p, sp, sm)), Some(proj))
            }
        };
        let desc = descent(&ev);
        let action = ev.action(p);
        let residual = (desc.norm_sq.max(0.0) / ev.q).sqrt();
        Ok(State {
            ev,
            desc,
            action,
            residual,
            brackets,
            projection,
        })
    }

    fn entry(&self, s: &State) -> HistoryEntry {
        HistoryEntry {
            action: s.action,
            residual: s.residual,
            separation: (self.constraint == Constraint::Nodal).then(|| sign_separation(&s.ev.u)),
        }
    }

    fn anchor(&self) -> (Anchor, bool) {
        match self.constraint {
            Constraint::Nehari => (Anchor::MaxAbs, false),
            Constraint::Odd => (Anchor::MaxPositive, true),
            Constraint::Nodal => (Anchor::MaxPositive, false),
        }
    }

    fn pairing(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        grid::h1_pairing(self.problem.grid(), &self.weights, a, b)
    }

    fn collapsed(&self, s: &State) -> bool {
        s.brackets.is_some_and(|b| b.balance() < COLLAPSE_THRESHOLD)
    }

    fn finish(
        &self,
        s: State,
        iterations: usize,
        history: Vec<HistoryEntry>,
        flags: SolveFlags,
    ) -> SolveResult {
        SolveResult {
            level: s.action,
            residual: s.residual,
            iterations,
            history,
            flags,
            brackets: s.brackets,
            projection: s.projection,
            minimizer: s.ev.u,
        }
    }

    fn run(&self, init: Field) -> Result<SolveResult, SolveError> {
        self.opts.validate()?;
        let tail = init.tail_mass();
        if tail > self.opts.tail_guard {
            return Err(Error::TailGuard {
                tail,
                guard: self.opts.tail_guard,
            }
            .into());
        }
        let mut state = self.project(init)?;
        let mut history = vec![self.entry(&state)];
        let mut flags = SolveFlags::default();
        let mut memory = Memory::new(self.opts.step_rule);
        let mut iter = 0;
        loop {
            if self.collapsed(&state) {
                // the nodal infimum is approached by shrinking one sign part
                flags.sign_collapsed = true;
                return Ok(self.finish(state, iter, history, flags));
            }
            if state.residual <= self.opts.grad_tol {
                flags.converged = true;
                return Ok(self.finish(state, iter, history, flags));
            }
            if iter == self.opts.max_iter {
                return Err(SolveError::NotConverged(Box::new(
                    self.finish(state, iter, history, flags),
                )));
            }
            iter += 1;

            let mut next = None;
            for attempt in 0..2 {
                if attempt == 1 {
                    if memory.is_empty() {
                        break;
                    }
                    // stale curvature information; retry as a plain gradient step
                    memory.clear();
                }
                let (direction, slope, tau) = self.direction(&state, &memory);
                if let Some(found) = self.line_search(&state, &direction, slope, tau) {
                    next = Some(found);
                    break;
                }
            }
            let Some(next) = next else {
                return Err(SolveError::NotConverged(Box::new(
                    self.finish(state, iter, history, flags),
                )));
            };
            memory.update(self, &state, &next);
            state = next;

            if self.opts.recenter_every > 0 && iter % self.opts.recenter_every == 0 {
                let (anchor, freeze) = self.anchor();
                let shift = recenter_shift(&state.ev.u, anchor, freeze)?;
                if shift.iter().any(|&s| s != 0) {
                    state = self.project(state.ev.u.shift(&shift))?;
                    memory.clear();
                }
                let tail = state.ev.u.tail_mass();
                if tail > self.opts.tail_guard {
                    flags.tail_guard_tripped = true;
                    history.push(self.entry(&state));
                    return Err(SolveError::TailGuard(Box::new(
                        self.finish(state, iter, history, flags),
                    )));
                }
            }
            history.push(self.entry(&state));
        }
    }

    /// Search direction, its slope `<direction, d>_{H^1}` and the first trial step.
    fn direction(&self, state: &State, memory: &Memory) -> (Field, f64, f64) {
        let d = &state.desc;
        let gradient_step = |tau: f64| (d.direction.scaled(-1.0), -d.norm_sq, tau);
        match (self.opts.step_rule, memory) {
            (StepRule::Bb, Memory::Bb(Some(tau))) => gradient_step(*tau),
            (StepRule::Lbfgs, Memory::Lbfgs(pairs)) if !pairs.is_empty() => {
                let dir_hat = lbfgs_direction(self, pairs, &d.d_hat);
                let slope = self.pairing(&dir_hat, &d.d_hat);
                if !(slope < 0.0) {
                    return gradient_step(self.opts.initial_step);
                }
                let g = self.problem.grid();
                let mut z = dir_hat;
                crate::fft::plan(g.dim(), g.n()).inverse(&mut z);
                (
                    Field::from_raw(*g, z.iter().map(|c| c.re).collect()),
                    slope,
                    1.0,
                )
            }
            _ => gradient_step(self.opts.initial_step),
        }
    }

    /// Armijo halving along `direction`; the fixed rule accepts its first trial.
    fn line_search(&self, state: &State, direction: &Field, slope: f64, tau: f64) -> Option<State> {
        let mut tau = tau;
        for _ in 0..MAX_HALVINGS {
            let trial = state.ev.u.axpy(tau, direction).ok()?;
            if let Ok(next) = self.project(trial) {
                let bound = state.action + ARMIJO * tau * slope + ACTION_SLACK * state.action.abs();
                if self.opts.step_rule == StepRule::Fixed || next.action <= bound {
                    return Some(next);
                }
            }
            if self.opts.step_rule == StepRule::Fixed {
                return None;
            }
            tau *= 0.5;
        }
        None
    }
}

const LBFGS_PAIRS: usize = 8;

struct CurvaturePair {
    s: Vec<Complex64>,
    y: Vec<Complex64>,
    sy: f64,
    yy: f64,
}

/// Curvature information carried between iterations.
enum Memory {
    None,
    /// Next Barzilai–Borwein step, once one is available.
    Bb(Option<f64>),
    Lbfgs(VecDeque<CurvaturePair>),
}

impl Memory {
    fn new(rule: StepRule) -> Self {
        match rule {
            StepRule::Bb => Memory::Bb(None),
            StepRule::Lbfgs => Memory::Lbfgs(VecDeque::new()),
            _ => Memory::None,
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Memory::None => true,
            Memory::Bb(t) => t.is_none(),
            Memory::Lbfgs(p) => p.is_empty(),
        }
    }

    fn clear(&mut self) {
        match self {
            Memory::None => {}
            Memory::Bb(t) => *t = None,
            Memory::Lbfgs(p) => p.clear(),
        }
    }

    fn update(&mut self, driver: &Driver, old: &State, new: &State) {
        if matches!(self, Memory::None) {
            return;
        }
        let s: Vec<Complex64> = new
            .desc
            .u_hat
            .iter()
            .zip(&old.desc.u_hat)
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<Complex64> = new
            .desc
            .d_hat
            .iter()
            .zip(&old.desc.d_hat)
            .map(|(a, b)| a - b)
            .collect();
        let ss = driver.pairing(&s, &s);
        let sy = driver.pairing(&s, &y);
        let usable = sy > 1e-12 * ss && ss > 0.0;
        match self {
            Memory::Bb(t) => *t = usable.then(|| (ss / sy).clamp(1e-4, 1e4)),
            Memory::Lbfgs(pairs) => {
                if usable {
                    let yy = driver.pairing(&y, &y);
                    if pairs.len() == LBFGS_PAIRS {
                        pairs.pop_front();
                    }
                    pairs.push_back(CurvaturePair { s, y, sy, yy });
                }
            }
            Memory::None => {}
        }
    }
}

/// Two-loop recursion in the `H^1` inner product: `-H d`.
fn lbfgs_direction(
    driver: &Driver,
    pairs: &VecDeque<CurvaturePair>,
    d_hat: &[Complex64],
) -> Vec<Complex64> {
    let mut q = d_hat.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for pair in pairs.iter().rev() {
        let a = driver.pairing(&pair.s, &q) / pair.sy;
        for (qk, yk) in q.iter_mut().zip(&pair.y) {
            *qk -= yk * a;
        }
        alphas.push(a);
    }
    let last = pairs.back().expect("nonempty memory");
    let gamma = last.sy / last.yy;
    for qk in q.iter_mut() {
        *qk *= gamma;
    }
    for (pair, a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = driver.pairing(&pair.y, &q) / pair.sy;
        for (qk, sk) in q.iter_mut().zip(&pair.s) {
            *qk += sk * (a - b);
        }
    }
    for qk in q.iter_mut() {
        *qk = -*qk;
    }
    q
}

fn drive(
    problem: &Problem,
    opts: &SolveOptions,
    constraint: Constraint,
    init: Field,
) -> Result<SolveResult, SolveError> {
    init.check_same_grid(&Field::zeros(*problem.grid()))?;
    let driver = Driver {
        problem,
        opts: *opts,
        constraint,
        weights: grid::h1_weights(problem.grid()),
    };
    driver.run(init)
}

/// Minimize the action on the Nehari manifold: the level `c_0`.
pub fn solve_groundstate(
    problem: &Problem,
    opts: &SolveOptions,
    init: Field,
) -> Result<SolveResult, SolveError> {
    if init.is_zero() {
        return Err(Error::ZeroField.into());
    }
    drive(problem, opts, Constraint::Nehari, init)
}

/// Minimize over fields odd in the last coordinate: the level `c_odd`.
pub fn solve_odd(
    problem: &Problem,
    opts: &SolveOptions,
    init: Field,
) -> Result<SolveResult, SolveError> {
    let init = antisymmetrize(&init);
    if init.is_zero() {
        return Err(Error::Degenerate("the odd part of the initial field vanishes".into()).into());
    }
    drive(problem, opts, Constraint::Odd, init)
}

/// Minimize over the nodal set: the level `c_nod`. For `p < 2` the expected
/// outcome is a successful stop with `sign_collapsed`.
pub fn solve_nodal(
    problem: &Problem,
    opts: &SolveOptions,
    init: Field,
) -> Result<SolveResult, SolveError> {
    let (plus, minus) = grid::split_signs(&init);
    if plus.is_zero() || minus.is_zero() {
        return Err(Error::Degenerate("the initial field must change sign".into()).into());
    }
    drive(problem, opts, Constraint::Nodal, init)
}

fn gaussian(grid: Grid, center: &[f64], width: f64) -> Field {
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
        (-r2 / (2.0 * width * width)).exp()
    })
}

/// Centered Gaussian of width `L/10` with seed-dependent small perturbations.
pub fn groundstate_init(grid: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.extent();
    let width = l / 10.0 * rng.random_range(0.9..1.1);
    let center: Vec<f64> = (0..grid.dim())
        .map(|_| rng.random_range(-0.02..0.02) * l)
        .collect();
    gaussian(grid, &center, width)
}

/// `g(x - a) - g(x + a)` with `a = (0, .., L/8)` and `g` a Gaussian of width `L/20`.
pub fn odd_init(grid: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.extent();
    let width = l / 20.0 * rng.random_range(0.9..1.1);
    let mut center: Vec<f64> = (0..grid.dim())
        .map(|_| rng.random_range(-0.02..0.02) * l)
        .collect();
    center[grid.dim() - 1] = l / 8.0;
    antisymmetrize(&gaussian(grid, &center, width).scaled(2.0))
}

/// Dipole on the last axis near `x_N = ±L/8` whose two lobes differ in width,
/// amplitude and axial offset, so that oddness is not imposed. For `p < 2`
/// the negative lobe starts weaker.
pub fn nodal_init(grid: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.extent();
    let dim = grid.dim();
    let mut lobe = |sign: f64| {
        // lobes stay on one lattice axis: a tilted dipole relaxes its
        // orientation only through the weak lattice anisotropy
        let mut c = vec![0.0; dim];
        c[dim - 1] = sign * l / 8.0 * rng.random_range(0.9..1.1);
        let w = l / 20.0 * rng.random_range(0.9..1.1);
        let a = rng.random_range(0.9..1.1);
        (c, w, a)
    };
    let (cp, wp, ap) = lobe(1.0);
    let (cm, wm, am) = lobe(-1.0);
    gaussian(grid, &cp, wp)
        .scaled(ap)
        .axpy(-am, &gaussian(grid, &cm, wm))
        .expect("same grid")
}

/// Periodic distance between the centroids of `u+^2` and `u-^2`.
pub fn sign_separation(u: &Field) -> f64 {
    let g = u.grid();
    let l = g.extent();
    let centroid = |positive: bool| -> Vec<f64> {
        let mut acc = vec![Complex64::default(); g.dim()];
        for (flat, &v) in u.values().iter().enumerate() {
            if (v > 0.0) != positive || v == 0.0 {
                continue;
            }
            let x = g.point(flat);
            for (axis, a) in acc.iter_mut().enumerate() {
                *a += Complex64::from_polar(v * v, 2.0 * PI * x[axis] / l);
            }
        }
        acc.iter().map(|a| a.arg() * l / (2.0 * PI)).collect()
    };
    let (cp, cm) = (centroid(true), centroid(false));
    cp.iter()
        .zip(&cm)
        .map(|(a, b)| {
            let d = (a - b).rem_euclid(l);
            let d = d.min(l - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Smallest relative `L^2` norm of the even part of `u` about a plane
/// normal to `axis`: zero for a field odd about some plane.
pub fn odd_defect(u: &Field, axis: usize) -> f64 {
    mirror_defect(u, axis, 1.0)
}

/// As [`odd_defect`] for the odd part: zero for a field symmetric about some
/// plane normal to `axis`.
pub fn even_defect(u: &Field, axis: usize) -> f64 {
    mirror_defect(u, axis, -1.0)
}

/// Planes through nodes and mid-nodes first, then a golden-section search
/// over sub-node positions with Fourier translation.
fn mirror_defect(u: &Field, axis: usize, sign: f64) -> f64 {
    let g = *u.grid();
    let n = g.n();
    let norm: f64 = u.values().iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return 0.0;
    }
    // u(-x): node j goes to n - j on `axis`
    let mirrored = Field::new(
        g,
        (0..g.len())
            .map(|flat| {
                let mut idx = g.multi_index(flat);
                idx[axis] = (n - idx[axis]) % n;
                u.values()[g.flat_index(&idx)]
            })
            .collect(),
    )
    .expect("node count preserved");
    let defect = |r: &Field| {
        let sum: f64 = u
            .values()
            .iter()
            .zip(r.values())
            .map(|(a, b)| (a + sign * b).powi(2))
            .sum();
        (0.25 * sum / norm).sqrt()
    };
    let mut shift = [0isize; 3];
    let (best, coarse) = (0..n)
        .map(|m| {
            shift[axis] = m as isize;
            (m, defect(&mirrored.shift(&shift)))
        })
        .fold(
            (0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    let h = g.spacing();
    let at = |t: f64| {
        let mut d = vec![0.0; g.dim()];
        d[axis] = t * h;
        defect(&mirrored.translate(&d))
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (best as f64 - 1.0, best as f64 + 1.0);
    let (mut x1, mut x2) = (hi - ratio * (hi - lo), lo + ratio * (hi - lo));
    let (mut f1, mut f2) = (at(x1), at(x2));
    for _ in 0..40 {
        if f1 < f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - ratio * (hi - lo);
            f1 = at(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + ratio * (hi - lo);
            f2 = at(x2);
        }
    }
    f1.min(f2).min(coarse)
}

/// One inequality of the level chain with its slack in units of `grad_tol c_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: f64,
    pub residual: f64,
    pub iterations: usize,
    pub flags: SolveFlags,
    pub balance: Option<f64>,
    /// [`odd_defect`] along the last axis.
    pub odd_defect: f64,
    /// [`even_defect`] along the first axis.
    pub transverse_defect: f64,
}

impl From<&SolveResult> for LevelSummary {
    fn from(r: &SolveResult) -> Self {
        LevelSummary {
            level: r.level,
            residual: r.residual,
            iterations: r.iterations,
            flags: r.flags,
            balance: r.balance(),
            odd_defect: odd_defect(&r.minimizer, r.minimizer.grid().dim() - 1),
            transverse_defect: even_defect(&r.minimizer, 0),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelReport {
    pub params: Params,
    pub grid: Grid,
    pub kernel: KernelMode,
    pub options: SolveOptions,
    pub regime: Regime,
    pub c_0: LevelSummary,
    pub c_odd: LevelSummary,
    pub c_nod: LevelSummary,
    pub verdicts: Vec<Verdict>,
}

impl LevelReport {
    /// Whether every verdict expected in this regime holds.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// Verdicts for the levels `(c_0, c_odd, c_nod)`.
pub fn verdicts(
    params: &Params,
    grad_tol: f64,
    c0: f64,
    c_odd: f64,
    nodal: &SolveResult,
) -> Vec<Verdict> {
    let c_nod = nodal.level;
    let unit = grad_tol * c0;
    let v = |name: &str, margin: f64, holds: bool| Verdict {
        name: name.into(),
        holds,
        margin,
    };
    match params.regime() {
        Regime::Superlinear => {
            let bound = 2f64.powf(params.nodal_bound_exponent()) * c0;
            let m_low = (c_nod - c0) / unit;
            let m_mid = (c_odd - c_nod) / unit;
            let m_top = (2.0 * c0 - c_odd) / unit;
            let m_bound = (c_nod - bound) / unit;
            vec![
                v(
                    "c_0 < c_nod",
                    m_low,
                    m_low > 0.0 && !nodal.flags.sign_collapsed,
                ),
                // equality is admissible; allow the solver tolerance
                v("c_nod <= c_odd", m_mid, m_mid >= -2.0),
                v("c_odd < 2 c_0", m_top, m_top > 0.0),
                v("c_nod >= 2^((p-2)/(p-1)) c_0", m_bound, m_bound >= 0.0),
            ]
        }
        Regime::Sublinear => {
            let dev = (c_nod - c0).abs() / c0;
            vec![
                v(
                    "|c_nod - c_0| <= 0.01 c_0",
                    (0.01 - dev) / grad_tol,
                    dev <= 0.01,
                ),
                v("nodal descent collapses", 0.0, nodal.flags.sign_collapsed),
            ]
        }
        Regime::Boundary => Vec::new(),
    }
}

/// The minimizers behind a [`LevelReport`].
#[derive(Clone, Debug)]
pub struct LevelRuns {
    pub groundstate: SolveResult,
    pub odd: SolveResult,
    pub nodal: SolveResult,
}

impl LevelRuns {
    pub fn report(&self, problem: &Problem, opts: &SolveOptions) -> LevelReport {
        let params = *problem.params();
        LevelReport {
            params,
            grid: *problem.grid(),
            kernel: problem.kernel().mode(),
            options: *opts,
            regime: params.regime(),
            verdicts: verdicts(
                &params,
                opts.grad_tol,
                self.groundstate.level,
                self.odd.level,
                &self.nodal,
            ),
            c_0: (&self.groundstate).into(),
            c_odd: (&self.odd).into(),
            c_nod: (&self.nodal).into(),
        }
    }
}

/// The three levels from canonical initial fields.
///
/// For `p < 2` the nodal run starts from the notched groundstate at the
/// narrowest resolved width, the configuration whose nodal level approaches
/// `c_0`; otherwise the three solves run concurrently.
pub fn level_runs(problem: &Problem, opts: &SolveOptions) -> Result<LevelRuns, SolveError> {
    let g = *problem.grid();
    let seed = opts.seed;
    let sublinear = problem.params().regime() == Regime::Sublinear;
    let (r0, r_odd, r_nod) = std::thread::scope(|s| {
        let h_odd = s.spawn(|| solve_odd(problem, opts, odd_init(g, seed)));
        let h_nod =
            (!sublinear).then(|| s.spawn(|| solve_nodal(problem, opts, nodal_init(g, seed))));
        let r0 = solve_groundstate(problem, opts, groundstate_init(g, seed));
        let r_nod = match (h_nod, &r0) {
            (Some(h), _) => h.join().expect("nodal worker panicked"),
            (None, Ok(r0)) => degenerate_nodal_init(problem, &r0.minimizer)
                .map_err(SolveError::from)
                .and_then(|init| solve_nodal(problem, opts, init)),
            (None, Err(_)) => Err(Error::Degenerate("no groundstate to notch".into()).into()),
        };
        (r0, h_odd.join().expect("odd worker panicked"), r_nod)
    });
    Ok(LevelRuns {
        groundstate: r0?,
        odd: r_odd?,
        nodal: r_nod?,
    })
}

/// [`level_runs`] summarized with verdicts.
pub fn level_report(problem: &Problem, opts: &SolveOptions) -> Result<LevelReport, SolveError> {
    Ok(level_runs(problem, opts)?.report(problem, opts))
}

/// Nodal projection of the notched groundstate at the narrowest width of
/// [`constructions::degeneracy_deltas`].
pub fn degenerate_nodal_init(problem: &Problem, u0: &Field) -> Result<Field, Error> {
    let g = *problem.grid();
    let delta = constructions::degeneracy_deltas(&g)
        .last()
        .copied()
        .unwrap_or(4.0 * g.spacing());
    let dp = constructions::DegeneracyFamilyParams {
        delta,
        a: constructions::degeneracy_anchor(u0)?,
        u0: u0.clone(),
    };
    Ok(constructions::degeneracy_family(problem, &dp)?.field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p: f64) -> Problem {
        let g = Grid::new(2, 128, 24.0).unwrap();
        Problem::new(
            Params::choquard(2, 1.0, p).unwrap(),
            g,
            KernelMode::TruncatedKernel,
        )
        .unwrap()
    }

    fn opts() -> SolveOptions {
        SolveOptions {
            grad_tol: 1e-8,
            max_iter: 2000,
            ..SolveOptions::default()
        }
    }

    #[test]
    fn option_validation() {
        assert!(SolveOptions::default().validate().is_ok());
        let bad = SolveOptions {
            grad_tol: 0.0,
            ..SolveOptions::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolveOptions {
            max_iter: 0,
            ..SolveOptions::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn groundstate_is_a_positive_critical_point() {
        let pr = small(2.5);
        let r = solve_groundstate(&pr, &opts(), groundstate_init(*pr.grid(), 1)).unwrap();
        assert!(r.flags.converged);
        assert!(r.level > 0.0);
        let u = &r.minimizer;
        let floor = 1e-9 * u.max_abs();
        assert!(u.values().iter().all(|&v| v > -floor) || u.values().iter().all(|&v| v < floor));
        let g = pr.action_gradient(u).unwrap();
        let q = grid::h1_norm_sq(u);
        assert!(g.l2_inner(u).unwrap().abs() <= 1e-8 * q);
        for w in r.history.windows(2) {
            assert!(w[1].action <= w[0].action + 1e-12 * w[0].action.abs());
        }
    }

    #[test]
    fn restarts_agree() {
        let pr = small(2.5);
        let o = opts();
        let a = solve_groundstate(&pr, &o, groundstate_init(*pr.grid(), 2)).unwrap();
        let b = solve_groundstate(&pr, &o, groundstate_init(*pr.grid(), 3)).unwrap();
        assert!((a.level - b.level).abs() <= 2.0 * o.grad_tol * a.level);
    }

    #[test]
    fn step_rules_reach_the_same_level() {
        let pr = small(2.5);
        let init = groundstate_init(*pr.grid(), 4);
        let bb = solve_groundstate(&pr, &opts(), init.clone()).unwrap();
        let bt = SolveOptions {
            step_rule: StepRule::Backtracking,
            initial_step: 1.0,
            grad_tol: 1e-6,
            ..opts()
        };
        let r = solve_groundstate(&pr, &bt, init).unwrap();
        assert!((r.level - bb.level).abs() < 1e-9 * bb.level);
    }

    #[test]
    fn odd_minimizer_is_exactly_odd() {
        let pr = small(2.5);
        let r = solve_odd(&pr, &opts(), odd_init(*pr.grid(), 5)).unwrap();
        let u = &r.minimizer;
        let g = u.grid();
        for i in 0..g.len() {
            assert_eq!(u.values()[i], -u.values()[g.reflect_last(i)]);
        }
    }

    #[test]
    fn mirror_defects_find_off_node_planes() {
        let g = Grid::new(2, 64, 16.0).unwrap();
        let c = 0.37 * g.spacing();
        let even = Field::from_fn(g, |x| (-(x[0] - c).powi(2) - x[1] * x[1]).exp());
        let odd = Field::from_fn(g, |x| {
            (x[0] - c) * (-(x[0] - c).powi(2) - x[1] * x[1]).exp()
        });
        assert!(even_defect(&even, 0) < 1e-6);
        assert!(odd_defect(&odd, 0) < 1e-6);
        assert!(odd_defect(&even, 0) > 0.5);
        assert!(even_defect(&odd, 0) > 0.5);
    }

    #[test]
    fn nodal_run_rejects_one_signed_init() {
        let pr = small(2.5);
        let init = groundstate_init(*pr.grid(), 0);
        assert!(matches!(
            solve_nodal(&pr, &opts(), init),
            Err(SolveError::Core(Error::Degenerate(_)))
        ));
    }

    #[test]
    fn budget_exhaustion_returns_partial_result() {
        let pr = small(2.5);
        let o = SolveOptions {
            max_iter: 3,
            ..opts()
        };
        let err = solve_groundstate(&pr, &o, groundstate_init(*pr.grid(), 0)).unwrap_err();
        let partial = err.partial().unwrap();
        assert_eq!(partial.iterations, 3);
        assert_eq!(partial.history.len(), 4);
        assert!(!partial.flags.converged);
    }

    #[test]
    fn tail_guard_rejects_wide_init() {
        let pr = small(2.5);
        let wide = gaussian(*pr.grid(), &[0.0, 0.0], 8.0);
        assert!(matches!(
            solve_groundstate(&pr, &opts(), wide),
            Err(SolveError::Core(Error::TailGuard { .. }))
        ));
    }

    #[test]
    fn separation_is_periodic_distance() {
        let g = Grid::new(2, 64, 20.0).unwrap();
        let u = gaussian(g, &[0.0, 6.0], 0.5)
            .sub(&gaussian(g, &[0.0, -6.0], 0.5))
            .unwrap();
        // 12 apart inside the box, 8 apart across the boundary
        assert!((sign_separation(&u) - 8.0).abs() < 1e-6);
        let v = gaussian(g, &[3.0, 0.0], 0.5)
            .sub(&gaussian(g, &[-2.0, 0.0], 0.5))
            .unwrap();
        assert!((sign_separation(&v) - 5.0).abs() < 1e-6);
    }

    #[test]
    fn history_csv_has_one_row_per_entry() {
        let pr = small(2.5);
        let o = SolveOptions {
            max_iter: 5,
            ..opts()
        };
        let partial = *match solve_groundstate(&pr, &o, groundstate_init(*pr.grid(), 0)) {
            Err(SolveError::NotConverged(r)) => r,
            other => panic!("{other:?}"),
        };
        let csv = partial.history_csv();
        assert_eq!(csv.lines().count(), partial.history.len() + 1);
        assert!(csv.starts_with("iteration,action,residual"));
    }
}
