//! Nehari constraint algebra.
//!
//! Scaling a field onto the Nehari manifold is a closed form. Scaling the two
//! sign parts independently onto the nodal set is the interior critical point
//! of the fiber map
//!
//! ```text
//! F(t+, t-) = A(t+^(1/p) u+ + t-^(1/p) u-)
//!           = t+^(2/p) q+ / 2 + (t+ t-)^(1/p) q_x + t-^(2/p) q- / 2
//!             - (t+^2 d++ + 2 t+ t- d+- + t-^2 d--) / (2p),
//! ```
//!
//! found by Newton's method on its gradient in the coordinates `log s` with
//! `s = t^(1/p)` the physical scalings. For `p > 2` the map is concave and the
//! critical point is its unique maximum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{ChoquardBrackets, Evaluated, Problem};
use crate::grid::Field;

/// Coordinates `(t+, t-)` on the fiber of a sign-changing field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    pub t_plus: f64,
    pub t_minus: f64,
}

impl FiberPoint {
    pub fn new(t_plus: f64, t_minus: f64) -> Result<Self> {
        let ok = |t: f64| t.is_finite() && t > 0.0;
        if ok(t_plus) && ok(t_minus) {
            Ok(FiberPoint { t_plus, t_minus })
        } else {
            Err(Error::Degenerate(format!(
                "fiber point ({t_plus}, {t_minus}) is not positive"
            )))
        }
    }

    pub fn from_scalings(p: f64, s_plus: f64, s_minus: f64) -> Result<Self> {
        Self::new(s_plus.powf(p), s_minus.powf(p))
    }

    /// Physical multipliers `s = t^(1/p)` of the two sign parts.
    pub fn scalings(&self, p: f64) -> (f64, f64) {
        (self.t_plus.powf(1.0 / p), self.t_minus.powf(1.0 / p))
    }
}

/// Multiplier `t` with `t u` on the Nehari manifold: `t^(2p-2) = q / D`.
pub fn nehari_scale(p: f64, q: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Degenerate(format!(
            "nonlinear bracket {d:e} is not positive"
        )));
    }
    if !(q > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok((q / d).powf(1.0 / (2.0 * p - 2.0)))
}

/// Action of the Nehari multiple of a field with bracket values `(q, D)`:
/// `(1/2 - 1/(2p)) q^(p/(p-1)) / D^(1/(p-1))`.
pub fn nehari_level(p: f64, q: f64, d: f64) -> f64 {
    (0.5 - 0.5 / p) * q.powf(p / (p - 1.0)) / d.powf(1.0 / (p - 1.0))
}

pub fn fiber_value(p: f64, b: &ChoquardBrackets, fp: FiberPoint) -> f64 {
    let (tp, tm) = (fp.t_plus, fp.t_minus);
    let e = 1.0 / p;
    0.5 * tp.powf(2.0 * e) * b.q_plus
        + (tp * tm).powf(e) * b.q_cross
        + 0.5 * tm.powf(2.0 * e) * b.q_minus
        - (tp * tp * b.d_pp + 2.0 * tp * tm * b.d_pm + tm * tm * b.d_mm) / (2.0 * p)
}

/// Hessian of [`fiber_value`] in the `t` coordinates.
pub fn fiber_hessian(p: f64, b: &ChoquardBrackets, fp: FiberPoint) -> [[f64; 2]; 2] {
    let (tp, tm) = (fp.t_plus, fp.t_minus);
    let e = 1.0 / p;
    let diag = |t: f64, other: f64, q: f64, d: f64| {
        e * (2.0 * e - 1.0) * t.powf(2.0 * e - 2.0) * q
            + e * (e - 1.0) * t.powf(e - 2.0) * other.powf(e) * b.q_cross
            - d / p
    };
    let off = e * e * (tp * tm).powf(e - 1.0) * b.q_cross - b.d_pm / p;
    [
        [diag(tp, tm, b.q_plus, b.d_pp), off],
        [off, diag(tm, tp, b.q_minus, b.d_mm)],
    ]
}

/// `<A'(w), w+>` and `<A'(w), w->` for `w = s+ u+ + s- u-`, each relative to
/// the magnitude of its terms.
pub fn stationarity_residuals(
    p: f64,
    b: &ChoquardBrackets,
    s_plus: f64,
    s_minus: f64,
) -> (f64, f64) {
    let terms = LogTerms::at(p, b, s_plus.ln(), s_minus.ln());
    let (rp, rm) = terms.residuals();
    let (sp, sm) = terms.scales();
    (rp / sp, rm / sm)
}

/// Outcome of a nodal projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalProjection {
    pub point: FiberPoint,
    /// Largest relative stationarity residual at `point`.
    pub residual: f64,
    pub iterations: usize,
    /// The grid search had to supply the starting point.
    pub used_fallback: bool,
    /// `p <= 2`: the critical point need not be a unique maximum.
    pub uniqueness_risk: bool,
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;

/// Terms of the fiber gradient at log-scalings `(y+, y-)`.
struct LogTerms {
    p: f64,
    a: f64,
    b: f64,
    c: f64,
    pp: f64,
    mm: f64,
    x: f64,
}

impl LogTerms {
    fn at(p: f64, br: &ChoquardBrackets, yp: f64, ym: f64) -> Self {
        LogTerms {
            p,
            a: (2.0 * yp).exp() * br.q_plus,
            b: (2.0 * ym).exp() * br.q_minus,
            c: (yp + ym).exp() * br.q_cross,
            pp: (2.0 * p * yp).exp() * br.d_pp,
            mm: (2.0 * p * ym).exp() * br.d_mm,
            x: (p * (yp + ym)).exp() * br.d_pm,
        }
    }

    fn residuals(&self) -> (f64, f64) {
        (
            self.a + self.c - self.pp - self.x,
            self.b + self.c - self.mm - self.x,
        )
    }

    fn scales(&self) -> (f64, f64) {
        (
            self.a + self.c.abs() + self.pp + self.x,
            self.b + self.c.abs() + self.mm + self.x,
        )
    }

    fn relative(&self) -> f64 {
        let (rp, rm) = self.residuals();
        let (sp, sm) = self.scales();
        (rp / sp).abs().max((rm / sm).abs())
    }

    fn jacobian(&self) -> [[f64; 2]; 2] {
        let p = self.p;
        let off = self.c - p * self.x;
        [
            [2.0 * self.a + self.c - 2.0 * p * self.pp - p * self.x, off],
            [off, 2.0 * self.b + self.c - 2.0 * p * self.mm - p * self.x],
        ]
    }
}

fn newton(p: f64, b: &ChoquardBrackets, start: (f64, f64)) -> Option<((f64, f64), f64, usize)> {
    let (mut yp, mut ym) = start;
    let mut terms = LogTerms::at(p, b, yp, ym);
    let mut merit = terms.relative();
    for iter in 0..NEWTON_MAX_ITER {
        if !merit.is_finite() {
            return None;
        }
        if merit <= NEWTON_TOL {
            return Some(((yp, ym), merit, iter));
        }
        let (rp, rm) = terms.residuals();
        let j = terms.jacobian();
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let mut dp = -(j[1][1] * rp - j[0][1] * rm) / det;
        let mut dm = -(-j[1][0] * rp + j[0][0] * rm) / det;
        let big = dp.abs().max(dm.abs());
        if big > 2.0 {
            dp *= 2.0 / big;
            dm *= 2.0 / big;
        }
        // the line search measures residuals against the current scales, along
        // which the Newton step is always a descent direction
        let (sp, sm) = terms.scales();
        let frozen = |t: &LogTerms| {
            let (rp, rm) = t.residuals();
            (rp / sp).abs().max((rm / sm).abs())
        };
        let mut lambda = 1.0;
        loop {
            let trial = LogTerms::at(p, b, yp + lambda * dp, ym + lambda * dm);
            if frozen(&trial) < frozen(&terms) && trial.relative().is_finite() {
                yp += lambda * dp;
                ym += lambda * dm;
                merit = trial.relative();
                terms = trial;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                // stalled at rounding level
                return (merit <= 1e-10).then_some(((yp, ym), merit, iter));
            }
        }
    }
    (merit <= 1e-10).then_some(((yp, ym), merit, NEWTON_MAX_ITER))
}

/// Exhaustive search over a log grid for the smallest relative residual.
fn grid_start(p: f64, b: &ChoquardBrackets, center: (f64, f64)) -> (f64, f64) {
    let steps = 200;
    let span = 12.0;
    let mut best = (center, f64::INFINITY);
    for i in 0..=steps {
        let yp = center.0 - span + 2.0 * span * i as f64 / steps as f64;
        for j in 0..=steps {
            let ym = center.1 - span + 2.0 * span * j as f64 / steps as f64;
            let m = LogTerms::at(p, b, yp, ym).relative();
            if m < best.1 {
                best = ((yp, ym), m);
            }
        }
    }
    best.0
}

/// Sign change of `f` near `guess`, stepping outwards by unit log-scalings
/// and then bisecting. `f` must be positive on the left of the root.
fn bracket_root(f: impl Fn(f64) -> f64, guess: f64) -> Option<f64> {
    let mut hi = guess;
    while f(hi) > 0.0 {
        hi += 1.0;
        if hi > guess + 200.0 {
            return None;
        }
    }
    let mut lo = hi - 1.0;
    while !(f(lo) > 0.0) {
        lo -= 1.0;
        if lo < guess - 200.0 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Block coordinate ascent on the fiber: each sweep solves one stationarity
/// equation exactly in its own log-scaling. Converges for `p > 2`, where the
/// fiber is strictly concave, but slowly when the parts interact strongly.
fn coordinate_start(p: f64, b: &ChoquardBrackets, start: (f64, f64)) -> (f64, f64) {
    let mut y = start;
    for _ in 0..2000 {
        let prev = y;
        let plus = |v: f64| LogTerms::at(p, b, v, y.1).residuals().0 * (-2.0 * v).exp();
        let Some(yp) = bracket_root(plus, y.0) else { break };
        y.0 = yp;
        let minus = |v: f64| LogTerms::at(p, b, y.0, v).residuals().1 * (-2.0 * v).exp();
        let Some(ym) = bracket_root(minus, y.1) else { break };
        y.1 = ym;
        if (y.0 - prev.0).abs().max((y.1 - prev.1).abs()) < 1e-12 {
            break;
        }
    }
    y
}

/// Fiber point of `N_nod` on the fiber of a field with brackets `b`, searched
/// from the field itself, then from its Nehari multiple, then from the best
/// point of a log grid, refined by coordinate ascent if needed.
pub fn nodal_project(p: f64, b: &ChoquardBrackets) -> Result<NodalProjection> {
    nodal_project_near(p, b, None)
}

/// As [`nodal_project`], trying the scalings `guess = (s+, s-)` before the
/// identity. Selects the branch through a known point when the fiber carries
/// several critical points.
pub fn nodal_project_near(
    p: f64,
    b: &ChoquardBrackets,
    guess: Option<(f64, f64)>,
) -> Result<NodalProjection> {
    if !(b.q_plus > 0.0 && b.q_minus > 0.0) {
        return Err(Error::Degenerate("a sign part is missing".into()));
    }
    let d = b.nonlocal();
    let s0 = nehari_scale(p, b.norm_sq(), d)?.ln();
    let finish = |(yp, ym): (f64, f64), residual: f64, iterations: usize, used_fallback: bool| {
        Ok(NodalProjection {
            point: FiberPoint::new((p * yp).exp(), (p * ym).exp())?,
            residual,
            iterations,
            used_fallback,
            uniqueness_risk: p <= 2.0,
        })
    };
    // the identity first: fields next to the nodal set stay on the branch
    // they came from when the critical point is not unique
    let seeded = guess
        .filter(|g| g.0 > 0.0 && g.1 > 0.0)
        .map(|g| (g.0.ln(), g.1.ln()));
    for start in seeded.into_iter().chain([(0.0, 0.0), (s0, s0)]) {
        if let Some((y, r, it)) = newton(p, b, start) {
            return finish(y, r, it, false);
        }
    }
    let start = grid_start(p, b, (s0, s0));
    let polished = newton(p, b, start).or_else(|| newton(p, b, coordinate_start(p, b, start)));
    match polished {
        Some((y, r, it)) => finish(y, r, it, true),
        None => Err(Error::Projection(format!(
            "no critical point found near scalings ({:.3e}, {:.3e})",
            start.0.exp(),
            start.1.exp()
        ))),
    }
}

/// Per-part maximum of `t -> A(t^(1/p) w)` for a one-signed part with
/// brackets `(q, d)`, i.e. the Nehari level of that part.
pub fn part_level(p: f64, q: f64, d: f64) -> f64 {
    nehari_level(p, q, d)
}

impl Problem {
    pub fn nehari_project(&self, u: &Field) -> Result<Field> {
        Ok(self.nehari_evaluated(u.clone())?.u)
    }

    pub(crate) fn nehari_evaluated(&self, u: Field) -> Result<Evaluated> {
        let ev = self.evaluate(u)?;
        let t = nehari_scale(self.p(), ev.q, ev.d)?;
        Ok(ev.scaled(self.p(), t))
    }

    /// `s+ u+ + s- u-` on the nodal set, with the fiber point used.
    pub fn nodal_project(&self, u: &Field) -> Result<(Field, NodalProjection)> {
        let (ev, proj, _) = self.nodal_evaluated(u)?;
        Ok((ev.u, proj))
    }

    pub(crate) fn nodal_evaluated(
        &self,
        u: &Field,
    ) -> Result<(Evaluated, NodalProjection, ChoquardBrackets)> {
        let parts = self.signed_parts(u)?;
        let proj = nodal_project(self.p(), &parts.brackets)?;
        let (sp, sm) = proj.point.scalings(self.p());
        let ev = self.recombine(&parts, sp, sm)?;
        Ok((ev, proj, parts.brackets))
    }

    /// `xi_± = int (I_alpha * |u|^p) |u_±|^p / <u, u_±>_{H^1} - 1`, or `-1`
    /// when the part vanishes.
    pub fn xi_map(&self, u: &Field) -> Result<(f64, f64)> {
        let b = self.brackets(u)?;
        let side = |q: f64, d_self: f64| {
            if q == 0.0 {
                -1.0
            } else {
                (d_self + b.d_pm) / (q + b.q_cross) - 1.0
            }
        };
        Ok((side(b.q_plus, b.d_pp), side(b.q_minus, b.d_mm)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::tests::bumps;
    use crate::grid::{antisymmetrize, Grid};
    use crate::params::Params;
    use crate::riesz::KernelMode;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn problem(p: f64) -> Problem {
        let g = Grid::new(2, 64, 20.0).unwrap();
        Problem::new(
            Params::choquard(2, 1.0, p).unwrap(),
            g,
            KernelMode::TruncatedKernel,
        )
        .unwrap()
    }

    #[test]
    fn nehari_scale_closed_form() {
        assert_eq!(nehari_scale(2.5, 3.0, 3.0).unwrap(), 1.0);
        assert!(nehari_scale(2.5, 1.0, 0.0).is_err());
        // t(λu) λ = t(u): q ∝ λ², D ∝ λ^(2p)
        let (p, q, d, lam) = (2.5f64, 2.0, 0.7, 3.0f64);
        let t1 = nehari_scale(p, q, d).unwrap();
        let t2 = nehari_scale(p, lam * lam * q, lam.powf(2.0 * p) * d).unwrap();
        assert!(rel(t2 * lam, t1) < 1e-14);
    }

    #[test]
    fn nehari_scale_agrees_with_bisection() {
        // root of φ(t) = t² q - t^(2p) D on (0, ∞)
        for (p, q, d) in [(2.5, 3.0, 0.4), (1.8, 0.2, 5.0), (3.0, 10.0, 10.0)] {
            let phi = |t: f64| t * t * q - t.powf(2.0 * p) * d;
            let (mut lo, mut hi) = (1e-6f64, 1e6f64);
            for _ in 0..400 {
                let mid = (lo * hi).sqrt();
                if phi(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = nehari_scale(p, q, d).unwrap();
            assert!(rel(t, lo) < 1e-10, "{t} {lo}");
        }
    }

    #[test]
    fn nehari_level_constant() {
        // the Nehari multiple has action (1/2 - 1/(2p)) q^(p/(p-1)) / D^(1/(p-1));
        // the factor (1/2 - 1/p) does not reproduce the direct evaluation
        let (p, q, d) = (2.5f64, 3.0, 0.4);
        let t = nehari_scale(p, q, d).unwrap();
        let direct = 0.5 * t * t * q - t.powf(2.0 * p) * d / (2.0 * p);
        assert!(rel(nehari_level(p, q, d), direct) < 1e-13);
        let other = (0.5 - 1.0 / p) * q.powf(p / (p - 1.0)) / d.powf(1.0 / (p - 1.0));
        assert!(rel(other, direct) > 0.1);
    }

    #[test]
    fn projected_action_is_nehari_multiple_of_norm() {
        let pr = problem(2.5);
        let u = bumps(*pr.grid(), 1, 3);
        let v = pr.nehari_project(&u).unwrap();
        let q = crate::grid::h1_norm_sq(&v);
        let a = pr.action(&v).unwrap();
        assert!(rel(a, (0.5 - 1.0 / 5.0) * q) < 1e-10);
        // <A'(v), v> = 0
        let g = pr.action_gradient(&v).unwrap();
        assert!(g.l2_inner(&v).unwrap().abs() < 1e-10 * q);
    }

    #[test]
    fn fiber_value_limits_and_identity() {
        let pr = problem(2.5);
        let u = bumps(*pr.grid(), 2, 4);
        let (w, _) = pr.nodal_project(&u).unwrap();
        let b = pr.brackets(&w).unwrap();
        let small = FiberPoint::new(1e-30, 1e-30).unwrap();
        assert!(fiber_value(2.5, &b, small).abs() < 1e-20);
        let at_one = fiber_value(2.5, &b, FiberPoint::new(1.0, 1.0).unwrap());
        assert!(rel(at_one, pr.action(&w).unwrap()) < 1e-12);
    }

    #[test]
    fn projection_of_nodal_point_is_identity() {
        let pr = problem(2.5);
        let u = bumps(*pr.grid(), 3, 4);
        let (w, first) = pr.nodal_project(&u).unwrap();
        assert!(first.residual <= 1e-10);
        let b = pr.brackets(&w).unwrap();
        let again = nodal_project(2.5, &b).unwrap();
        assert!((again.point.t_plus - 1.0).abs() < 1e-8);
        assert!((again.point.t_minus - 1.0).abs() < 1e-8);
        let (xp, xm) = pr.xi_map(&w).unwrap();
        assert!(xp.abs() < 1e-8 && xm.abs() < 1e-8);
    }

    #[test]
    fn odd_fields_project_symmetrically() {
        let pr = problem(2.5);
        let u = antisymmetrize(&bumps(*pr.grid(), 4, 4));
        let b = pr.brackets(&u).unwrap();
        let proj = nodal_project(2.5, &b).unwrap();
        assert!(rel(proj.point.t_plus, proj.point.t_minus) < 1e-10);
    }

    #[test]
    fn projection_rejects_one_signed_input() {
        let pr = problem(2.5);
        let u = bumps(*pr.grid(), 5, 3).map(f64::abs);
        let b = pr.brackets(&u).unwrap();
        assert!(matches!(nodal_project(2.5, &b), Err(Error::Degenerate(_))));
        let (xp, xm) = pr.xi_map(&u).unwrap();
        assert_eq!(xm, -1.0);
        assert!(xp > -1.0);
    }

    #[test]
    fn xi_swaps_under_negation() {
        let pr = problem(2.5);
        let u = bumps(*pr.grid(), 6, 4);
        let (a, b) = pr.xi_map(&u).unwrap();
        let (c, d) = pr.xi_map(&u.scaled(-1.0)).unwrap();
        assert!((a - d).abs() < 1e-12 * a.abs().max(1.0));
        assert!((b - c).abs() < 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn projection_is_scale_invariant() {
        let pr = problem(2.5);
        let u = bumps(*pr.grid(), 7, 4);
        let (w1, _) = pr.nodal_project(&u).unwrap();
        let (w2, _) = pr.nodal_project(&u.scaled(3.7)).unwrap();
        assert!(w1.sub(&w2).unwrap().max_abs() < 1e-10 * w1.max_abs());
    }

    #[test]
    fn sublinear_projection_flags_uniqueness_risk() {
        let pr = problem(1.8);
        let u = bumps(*pr.grid(), 8, 4);
        let (w, proj) = pr.nodal_project(&u).unwrap();
        assert!(proj.uniqueness_risk);
        let (xp, xm) = pr.xi_map(&w).unwrap();
        assert!(xp.abs() < 1e-8 && xm.abs() < 1e-8);
    }

    fn brute_force_max(p: f64, b: &ChoquardBrackets, center: (f64, f64)) -> (f64, f64) {
        let mut c = (center.0.ln(), center.1.ln());
        let mut span = 4.0;
        for _ in 0..2 {
            let mut best = (c, f64::NEG_INFINITY);
            for i in 0..=400 {
                for j in 0..=400 {
                    let y = (
                        c.0 - span + span * i as f64 / 200.0,
                        c.1 - span + span * j as f64 / 200.0,
                    );
                    let v = fiber_value(p, b, FiberPoint::new(y.0.exp(), y.1.exp()).unwrap());
                    if v > best.1 {
                        best = (y, v);
                    }
                }
            }
            c = best.0;
            span /= 100.0;
        }
        (c.0.exp(), c.1.exp())
    }

    #[test]
    fn newton_matches_brute_force_maximum() {
        let pr = problem(2.5);
        for seed in 10..13 {
            let u = bumps(*pr.grid(), seed, 5);
            let b = pr.brackets(&u).unwrap();
            let proj = nodal_project(2.5, &b).unwrap();
            let (tp, tm) = brute_force_max(2.5, &b, (proj.point.t_plus, proj.point.t_minus));
            assert!(
                rel(proj.point.t_plus, tp) < 1e-3,
                "{} {tp}",
                proj.point.t_plus
            );
            assert!(
                rel(proj.point.t_minus, tm) < 1e-3,
                "{} {tm}",
                proj.point.t_minus
            );
            let h = fiber_hessian(2.5, &b, proj.point);
            assert!(h[0][0] < 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0);
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let pr = problem(2.5);
        let b = pr.brackets(&bumps(*pr.grid(), 14, 4)).unwrap();
        let at = |a: f64, c: f64| fiber_value(2.5, &b, FiberPoint::new(a, c).unwrap());
        let (tp, tm, e) = (0.8, 1.3, 1e-4);
        let h = fiber_hessian(2.5, &b, FiberPoint::new(tp, tm).unwrap());
        let fpp = (at(tp + e, tm) - 2.0 * at(tp, tm) + at(tp - e, tm)) / (e * e);
        let fpm = (at(tp + e, tm + e) - at(tp + e, tm - e) - at(tp - e, tm + e)
            + at(tp - e, tm - e))
            / (4.0 * e * e);
        assert!((h[0][0] - fpp).abs() < 1e-5 * fpp.abs().max(1.0));
        assert!((h[0][1] - fpm).abs() < 1e-5 * fpm.abs().max(1.0));
    }

    #[test]
    fn split_levels_bound_nodal_level() {
        // A_max(u+)^k + A_max(u-)^k <= A(w)^k, k = (p-1)/(p-2), on the nodal set
        let p = 2.5;
        let pr = problem(p);
        let k = (p - 1.0) / (p - 2.0);
        for seed in 20..24 {
            let u = bumps(*pr.grid(), seed, 5)
                .add(&antisymmetrize(&bumps(*pr.grid(), seed + 50, 2)))
                .unwrap();
            let (w, _) = pr.nodal_project(&u).unwrap();
            let b = pr.brackets(&w).unwrap();
            let lhs =
                part_level(p, b.q_plus, b.d_pp).powf(k) + part_level(p, b.q_minus, b.d_mm).powf(k);
            let rhs = pr.action(&w).unwrap().powf(k);
            assert!(lhs <= rhs * (1.0 + 1e-10), "{lhs} {rhs}");
        }
    }
}
