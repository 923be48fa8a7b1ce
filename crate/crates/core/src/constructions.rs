//! Explicit test-function families built from a computed groundstate: the
//! glued odd pair, the notched groundstate of the `p < 2` regime, two-point
//! rearrangement and the far-field profile of the Riesz potential.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::functional::{ChoquardBrackets, Problem};
use crate::grid::{self, recenter, Anchor, Field, Grid};
use crate::manifold::{
    nehari_level, nehari_scale, nodal_project_near, FiberPoint, NodalProjection,
};
use crate::riesz::unit_ball_volume;

/// Radial C² cutoff: 1 up to `inner`, 0 from `outer`, quintic in between.
pub fn cutoff(r: f64, inner: f64, outer: f64) -> f64 {
    if r <= inner {
        1.0
    } else if r >= outer {
        0.0
    } else {
        let t = (r - inner) / (outer - inner);
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// `(1 - r^2)^2` on the unit ball, zero outside.
pub fn quartic_bump(r: f64) -> f64 {
    if r < 1.0 {
        let s = 1.0 - r * r;
        s * s
    } else {
        0.0
    }
}

fn distance(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn peak(u: &Field) -> Result<[f64; 3]> {
    let (flat, _) = u
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::ZeroField)?;
    Ok(u.grid().point(flat))
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedFamilyParams {
    pub r: f64,
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
}

impl GluedFamilyParams {
    pub fn new(r: f64) -> Self {
        GluedFamilyParams {
            r,
            cutoff_inner: 1.0,
            cutoff_outer: 2.0,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.r > 0.0 && 0.0 < self.cutoff_inner && self.cutoff_inner < self.cutoff_outer) {
            return Err(Error::Geometry(format!(
                "need R > 0 and 0 < inner < outer, got R = {}, inner = {}, outer = {}",
                self.r, self.cutoff_inner, self.cutoff_outer
            )));
        }
        let reach = 2.0 * self.r + self.cutoff_outer * self.r;
        if reach > 0.5 * grid.extent() {
            return Err(Error::Geometry(format!(
                "bumps at +-{} with support radius {} leave the box of side {}",
                2.0 * self.r,
                self.cutoff_outer * self.r,
                grid.extent()
            )));
        }
        Ok(())
    }
}

/// `u_R(x) = (η_R v)(x', x_N - 2R) - (η_R v)(x', -x_N - 2R)` for a positive
/// `v`, taken about its maximum. Exactly odd in the last coordinate.
pub fn glued_odd_function(v: &Field, gp: &GluedFamilyParams) -> Result<Field> {
    let g = *v.grid();
    gp.validate(&g)?;
    let v = recenter(v, Anchor::MaxAbs, false)?;
    let mut shift = vec![0.0; g.dim()];
    shift[g.dim() - 1] = 2.0 * gp.r;
    let moved = v.translate(&shift);
    let (inner, outer) = (gp.cutoff_inner * gp.r, gp.cutoff_outer * gp.r);
    let eta = Field::from_fn(g, |x| cutoff(distance(&x[..g.dim()], &shift), inner, outer));
    let upper = Field::new(
        g,
        moved
            .values()
            .iter()
            .zip(eta.values())
            .map(|(a, b)| a * b)
            .collect(),
    )?;
    upper.sub(&upper.reflect_last())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub r: f64,
    pub t_r: f64,
    pub action: f64,
    /// `2 c_0 - A(t_R u_R)`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictGapCurve {
    pub c_0: f64,
    pub rows: Vec<GapRow>,
    /// Separations rejected by the geometry check, with the reason.
    pub skipped: Vec<(f64, String)>,
    /// Log-log slope of the gap against `R` over the three largest `R`.
    pub exponent: Option<f64>,
}

impl StrictGapCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,t_r,action,gap\n");
        for row in &self.rows {
            out += &format!("{:e},{:e},{:e},{:e}\n", row.r, row.t_r, row.action, row.gap);
        }
        out
    }
}

/// Smallest box with the spacing of `grid` that holds the glued pair at
/// separation parameter `r_max`.
pub fn gap_grid(grid: &Grid, r_max: f64) -> Result<Grid> {
    let h = grid.spacing();
    let mut n = grid.n();
    while (n as f64) * h < 8.0 * r_max {
        n *= 2;
    }
    Grid::new(grid.dim(), n, n as f64 * h)
}

/// Nehari multiples of the glued pair for each separation. `problem` must
/// live on a grid large enough for the largest `R` (see [`gap_grid`]); `v`
/// may live on any grid with the same spacing and is embedded.
pub fn strict_gap_curve(problem: &Problem, v: &Field, rs: &[f64]) -> Result<StrictGapCurve> {
    let p = problem.p();
    let v = v.embed(*problem.grid())?;
    let c_0 = nehari_level(p, grid::h1_norm_sq(&v), problem.nonlocal_energy(&v)?);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &r in rs {
        let u = match glued_odd_function(&v, &GluedFamilyParams::new(r)) {
            Ok(u) => u,
            Err(Error::Geometry(why)) => {
                skipped.push((r, why));
                continue;
            }
            Err(e) => return Err(e),
        };
        let (q, d) = (grid::h1_norm_sq(&u), problem.nonlocal_energy(&u)?);
        let action = nehari_level(p, q, d);
        rows.push(GapRow {
            r,
            t_r: nehari_scale(p, q, d)?,
            action,
            gap: 2.0 * c_0 - action,
        });
    }
    let mut tail: Vec<&GapRow> = rows.iter().collect();
    tail.sort_by(|a, b| a.r.total_cmp(&b.r));
    let tail = &tail[tail.len().saturating_sub(3)..];
    let exponent = (tail.len() == 3 && tail.iter().all(|row| row.gap > 0.0))
        .then(|| log_log_slope(&tail.iter().map(|row| (row.r, row.gap)).collect::<Vec<_>>()));
    Ok(StrictGapCurve {
        c_0,
        rows,
        skipped,
        exponent,
    })
}

#[derive(Clone, Debug)]
pub struct DegeneracyFamilyParams {
    pub delta: f64,
    /// Centre of the negative bump; must be a grid node.
    pub a: Vec<f64>,
    /// Positive groundstate.
    pub u0: Field,
}

impl DegeneracyFamilyParams {
    pub fn validate(&self, p: f64) -> Result<()> {
        if p >= 2.0 {
            return Err(Error::InvalidParams(format!(
                "degeneracy family needs p < 2, got {p}"
            )));
        }
        let g = self.u0.grid();
        if self.a.len() != g.dim() {
            return Err(Error::Geometry(
                "anchor dimension differs from the grid".into(),
            ));
        }
        if !(self.delta >= g.spacing()) {
            return Err(Error::Geometry(format!(
                "delta = {} is below the spacing {}",
                self.delta,
                g.spacing()
            )));
        }
        let half = 0.5 * g.extent();
        for &x in &self.a {
            let j = (x + half) / g.spacing();
            if (j - j.round()).abs() > 1e-9 {
                return Err(Error::Geometry(format!(
                    "anchor coordinate {x} is not a node"
                )));
            }
            if x.abs() + 2.0 * self.delta > half {
                return Err(Error::Geometry(format!(
                    "bump of radius {} at {x} leaves the box",
                    2.0 * self.delta
                )));
            }
        }
        Ok(())
    }

    /// `u0` cut out around `a` and notched by `delta^(2/(2-p)) φ((x-a)/delta)`.
    ///
    /// The groundstate is multiplied by a C² cutoff vanishing on `B(a, delta)`
    /// so the two sign parts have disjoint supports on the grid.
    pub fn field(&self, p: f64) -> Result<Field> {
        self.validate(p)?;
        let g = *self.u0.grid();
        let amp = self.delta.powf(2.0 / (2.0 - p));
        let dim = g.dim();
        let shape = Field::from_fn(g, |x| distance(&x[..dim], &self.a) / self.delta);
        Field::new(
            g,
            self.u0
                .values()
                .iter()
                .zip(shape.values())
                .map(|(&u, &r)| u * (1.0 - cutoff(r, 1.0, 2.0)) - amp * quartic_bump(r))
                .collect(),
        )
    }
}

/// Default bump centre: the node `L/4` from the maximum of `u0` along the
/// first axis.
pub fn degeneracy_anchor(u0: &Field) -> Result<Vec<f64>> {
    let g = u0.grid();
    let mut a = peak(u0)?[..g.dim()].to_vec();
    a[0] += 0.25 * g.extent();
    if a[0] >= 0.5 * g.extent() {
        a[0] -= g.extent();
    }
    Ok(a)
}

/// Limit of the sign-part scalings of the projected family as `delta -> 0`:
/// `(1, ((I_alpha * |u0|^p)(a) ∫φ^p / ∫|∇φ|^2)^(1/(2-p)))`.
pub fn degeneracy_limit(problem: &Problem, u0: &Field, a: &[f64]) -> Result<(f64, f64)> {
    let g = *u0.grid();
    let p = problem.p();
    let n = g.dim() as f64;
    let half = 0.5 * g.extent();
    let idx: Vec<usize> = a
        .iter()
        .map(|x| ((x + half) / g.spacing()).round() as usize)
        .collect();
    let potential = problem.potential(u0)?;
    let at_a = potential.values()[g.flat_index(&idx)];
    // radial integrals of the quartic bump through Beta functions
    let sphere = n * unit_ball_volume(g.dim());
    let phi_p = 0.5 * sphere * beta(0.5 * n, 2.0 * p + 1.0);
    let grad_sq = 8.0 * sphere * beta(0.5 * n + 1.0, 3.0);
    Ok((1.0, (at_a * phi_p / grad_sq).powf(1.0 / (2.0 - p))))
}

#[derive(Clone, Debug)]
pub struct DegeneracyPoint {
    pub field: Field,
    pub point: FiberPoint,
    pub action: f64,
    pub projection: NodalProjection,
}

/// Critical point of the fiber map of the notched groundstate, on the branch
/// through the `delta -> 0` limit of the scalings.
///
/// The sign parts have disjoint supports, so their `H^1` pairing vanishes in
/// the continuum; the spectral pairing leaves a residue that is linear in
/// `s-` and would dominate the `s-^p` balance as the notch amplitude shrinks.
/// The stationarity system is therefore solved without it. Each bracket gets
/// its own convolution, since the notch sits many orders of magnitude below
/// the groundstate. The reported action is that of the recombined field.
pub fn degeneracy_family(
    problem: &Problem,
    dp: &DegeneracyFamilyParams,
) -> Result<DegeneracyPoint> {
    let p = problem.p();
    let u = dp.field(p)?;
    let guess = degeneracy_limit(problem, &dp.u0, &dp.a)?;
    let (plus, minus) = grid::split_signs(&u);
    let power = |f: &Field| f.map(|v| v.abs().powf(p));
    let v_plus = problem.potential(&plus)?;
    let b = ChoquardBrackets {
        q_plus: grid::h1_norm_sq(&plus),
        q_minus: grid::h1_norm_sq(&minus),
        q_cross: 0.0,
        d_pp: v_plus.l2_inner(&power(&plus))?,
        d_mm: problem.nonlocal_energy(&minus)?,
        d_pm: v_plus.l2_inner(&power(&minus))?,
    };
    let projection = nodal_project_near(p, &b, Some(guess))?;
    let (s_plus, s_minus) = projection.point.scalings(p);
    let field = plus.scaled(s_plus).axpy(s_minus, &minus)?;
    Ok(DegeneracyPoint {
        action: problem.action(&field)?,
        point: projection.point,
        field,
        projection,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyRow {
    pub delta: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub action: f64,
    /// `H^1` distance between the projected field and `u0`.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracySweep {
    pub c_0: f64,
    pub limit: (f64, f64),
    pub rows: Vec<DegeneracyRow>,
    /// Widths whose projection failed, with the reason.
    pub failed: Vec<(f64, String)>,
}

impl DegeneracySweep {
    pub fn min_action(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.action).min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,s_plus,s_minus,action,distance\n");
        for r in &self.rows {
            out += &format!(
                "{:e},{:e},{:e},{:e},{:e}\n",
                r.delta, r.s_plus, r.s_minus, r.action, r.distance
            );
        }
        out
    }
}

/// Widths `L/16, L/32, ...` down to the last one not below `4h`.
pub fn degeneracy_deltas(grid: &Grid) -> Vec<f64> {
    let floor = 4.0 * grid.spacing() * (1.0 - 1e-12);
    std::iter::successors(Some(grid.extent() / 16.0), |d| Some(d / 2.0))
        .take_while(|&d| d >= floor)
        .collect()
}

/// The family over `deltas` for the groundstate `u0` at level `c_0`.
pub fn degeneracy_sweep(
    problem: &Problem,
    u0: &Field,
    c_0: f64,
    deltas: &[f64],
) -> Result<DegeneracySweep> {
    let a = degeneracy_anchor(u0)?;
    let limit = degeneracy_limit(problem, u0, &a)?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for &delta in deltas {
        let dp = DegeneracyFamilyParams {
            delta,
            a: a.clone(),
            u0: u0.clone(),
        };
        match degeneracy_family(problem, &dp) {
            Ok(pt) => {
                let (s_plus, s_minus) = pt.point.scalings(problem.p());
                rows.push(DegeneracyRow {
                    delta,
                    s_plus,
                    s_minus,
                    action: pt.action,
                    distance: grid::h1_norm_sq(&pt.field.sub(u0)?).sqrt(),
                });
            }
            Err(e @ (Error::Projection(_) | Error::Degenerate(_))) => {
                failed.push((delta, e.to_string()))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(DegeneracySweep {
        c_0,
        limit,
        rows,
        failed,
    })
}

/// Axis-aligned hyperplane `x[axis] = position` through grid nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub axis: usize,
    pub position: f64,
}

/// Two-point rearrangement: on each pair of nodes mirrored in `h`, the larger
/// sample moves to the side `x[axis] > position`.
///
/// Mirroring is periodic, so the plane `position + L/2` is fixed as well and
/// "above" means within half a box above `position`.
pub fn polarize(u: &Field, h: Hyperplane) -> Result<Field> {
    let g = *u.grid();
    if h.axis >= g.dim() {
        return Err(Error::Geometry(format!(
            "axis {} on a {}-d grid",
            h.axis,
            g.dim()
        )));
    }
    let j = (h.position + 0.5 * g.extent()) / g.spacing();
    if (j - j.round()).abs() > 1e-9 || !h.position.is_finite() {
        return Err(Error::Geometry(format!(
            "hyperplane at {} misses the nodes",
            h.position
        )));
    }
    let n = g.n();
    let m = (j.round() as isize).rem_euclid(n as isize) as usize;
    let mut out = u.values().to_vec();
    for flat in 0..g.len() {
        let mut idx = g.multi_index(flat);
        let k = (idx[h.axis] + n - m) % n;
        if k == 0 || 2 * k >= n {
            continue;
        }
        idx[h.axis] = (m + n - k) % n;
        let mirror = g.flat_index(&idx);
        let (a, b) = (u.values()[flat], u.values()[mirror]);
        out[flat] = a.max(b);
        out[mirror] = a.min(b);
    }
    Field::new(g, out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub radius: f64,
    /// Mean of `(I_alpha * |v|^p)(x) / I_alpha(x)` over the annulus.
    pub ratio: f64,
    /// Mean of `ln |v|` over the annulus.
    pub log_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    /// `∫|v|^p`, the far-field limit of the ratio.
    pub mass: f64,
    pub rows: Vec<DecayRow>,
    /// Largest relative deviation of the ratio from `mass` on `[L/4, 3L/8]`.
    pub deviation: f64,
    /// Slope of `ln |v|` against the radius on `[L/8, 3L/8]`, for `p >= 2`.
    pub tail_slope: Option<f64>,
}

impl DecayTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,ratio,log_abs\n");
        for r in &self.rows {
            out += &format!("{:e},{:e},{:e}\n", r.radius, r.ratio, r.log_abs);
        }
        out
    }
}

/// Ratio of the potential of `|v|^p` to the Riesz kernel on annuli of width
/// `2h` about the maximum of `|v|`.
pub fn decay_diagnostic(problem: &Problem, v: &Field) -> Result<DecayTable> {
    let g = *v.grid();
    let dim = g.dim();
    let p = problem.p();
    let kernel = problem.kernel();
    let (alpha, a_alpha) = (kernel.alpha(), kernel.a_alpha());
    let abs = v.map(f64::abs);
    let centre = peak(&abs)?;
    let potential = problem.potential(v)?;
    let mass = v.map(|x| x.abs().powf(p)).integral();
    let width = 2.0 * g.spacing();
    let bins = (0.5 * g.extent() / width) as usize;
    let mut acc = vec![(0.0, 0.0, 0usize); bins];
    for flat in 0..g.len() {
        let r = distance(&g.point(flat)[..dim], &centre[..dim]);
        let bin = (r / width) as usize;
        if bin == 0 || bin >= bins {
            continue;
        }
        let riesz = a_alpha * r.powf(alpha - dim as f64);
        let a = &mut acc[bin];
        a.0 += potential.values()[flat] / riesz;
        a.1 += abs.values()[flat].max(f64::MIN_POSITIVE).ln();
        a.2 += 1;
    }
    let rows: Vec<DecayRow> = acc
        .iter()
        .enumerate()
        .filter(|(_, a)| a.2 > 0)
        .map(|(bin, a)| DecayRow {
            radius: (bin as f64 + 0.5) * width,
            ratio: a.0 / a.2 as f64,
            log_abs: a.1 / a.2 as f64,
        })
        .collect();
    let l = g.extent();
    let deviation = rows
        .iter()
        .filter(|r| r.radius >= 0.25 * l && r.radius <= 0.375 * l)
        .map(|r| (r.ratio / mass - 1.0).abs())
        .fold(0.0, f64::max);
    let tail_slope = (p >= 2.0).then(|| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.radius >= 0.125 * l && r.radius <= 0.375 * l)
            .map(|r| (r.radius, r.log_abs))
            .collect();
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |s, q| (s.0 + q.0, s.1 + q.1));
        let (sxx, sxy) = pts
            .iter()
            .fold((0.0, 0.0), |s, q| (s.0 + q.0 * q.0, s.1 + q.0 * q.1));
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    });
    Ok(DecayTable {
        mass,
        rows,
        deviation,
        tail_slope,
    })
}
