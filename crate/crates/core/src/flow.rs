//! Time stepping of the lens graph `u_t = u_xx/(1 + u_x²)` on `[a(t), b(t)]`
//! with `u = 0`, `u_x = ±√3` at the moving contacts.
//!
//! The state lives on the fixed grid `ξ = (x − a)/(b − a) ∈ [0, 1]`, where
//! the equation picks up the advection term `u_x ((1 − ξ) ȧ + ξ ḃ)`. The
//! contacts move with `ȧ = −u_xx(a)/(4√3)` and `ḃ = u_xx(b)/(4√3)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{self, Diagnostics, GridProfile, SQRT3};

/// Width fraction at which a run counts as extinct.
pub const EXTINCTION_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    /// Frozen diffusion coefficient, tridiagonal solve, contact speeds taken implicitly.
    SemiImplicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Number of grid intervals.
    pub n: usize,
    /// `dt = cfl · Δx² · min(1 + u_x²)`.
    pub cfl: f64,
    pub scheme: Scheme,
    pub t_end: Option<f64>,
    /// Stop once the area drops below this fraction of the initial area.
    pub area_floor: f64,
    /// Steps between stored snapshots.
    pub snapshot_stride: usize,
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            n: 256,
            cfl: 0.4,
            scheme: Scheme::Explicit,
            t_end: None,
            area_floor: 0.0,
            snapshot_stride: 500,
            max_steps: 50_000_000,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 32 {
            return Err(Error::InvalidInput(format!("n = {} is below 32", self.n)));
        }
        let cfl_max = match self.scheme {
            Scheme::Explicit => 0.5,
            Scheme::SemiImplicit => 100.0,
        };
        if !(self.cfl > 0.0 && self.cfl <= cfl_max) {
            return Err(Error::InvalidInput(format!(
                "cfl = {} outside (0, {cfl_max}] for the {:?} scheme",
                self.cfl, self.scheme
            )));
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0) {
                return Err(domain("t_end", t, "(0, ∞)"));
            }
        }
        if !(0.0..1.0).contains(&self.area_floor) {
            return Err(domain("area_floor", self.area_floor, "[0, 1)"));
        }
        if self.snapshot_stride == 0 || self.max_steps == 0 {
            return Err(Error::InvalidInput("snapshot_stride and max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Allowed distance of the measured contact slope from `±√3`: `1e−6` plus a
/// grid term, since the estimate itself is only third-order accurate.
pub fn contact_slope_tolerance(dx: f64) -> f64 {
    1e-6 + 50.0 * dx * dx
}

/// Mutable flow state on the uniform `ξ` grid.
#[derive(Debug, Clone)]
struct State {
    t: f64,
    a: f64,
    b: f64,
    w: Vec<f64>,
}

impl State {
    fn from_profile(p: &GridProfile) -> Result<Self> {
        p.validate()?;
        if !p.is_uniform(1e-9) {
            return Err(Error::InvalidGrid("flow needs a uniform grid".into()));
        }
        if p.n() < 32 {
            return Err(Error::InvalidGrid(format!("flow needs n >= 32, got {}", p.n())));
        }
        Ok(State {
            t: p.time,
            a: p.a,
            b: p.b,
            w: p.us().collect(),
        })
    }

    fn to_profile(&self) -> Result<GridProfile> {
        let n = self.n();
        let l = self.b - self.a;
        let nodes = self
            .w
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let x = if i == n { self.b } else { self.a + l * i as f64 / n as f64 };
                [x, w]
            })
            .collect();
        GridProfile::new(self.t, nodes)
    }

    fn n(&self) -> usize {
        self.w.len() - 1
    }

    fn dx(&self) -> f64 {
        (self.b - self.a) / self.n() as f64
    }

    /// One-sided `u_xx` at both contacts from `u = 0`, `u_x = ±√3` and two interior values.
    fn contact_curvatures(&self) -> (f64, f64) {
        let n = self.n();
        let dx = self.dx();
        let w = &self.w;
        let ca = (8.0 * w[1] - w[2] - 6.0 * SQRT3 * dx) / (2.0 * dx * dx);
        let cb = (8.0 * w[n - 1] - w[n - 2] - 6.0 * SQRT3 * dx) / (2.0 * dx * dx);
        (ca, cb)
    }

    fn speeds(&self) -> (f64, f64) {
        let (ca, cb) = self.contact_curvatures();
        (-ca / (4.0 * SQRT3), cb / (4.0 * SQRT3))
    }

    /// Contact slopes from four-point one-sided differences.
    fn contact_slopes(&self) -> (f64, f64) {
        let n = self.n();
        let dx = self.dx();
        let w = &self.w;
        let left = (18.0 * w[1] - 9.0 * w[2] + 2.0 * w[3]) / (6.0 * dx);
        let right = -(18.0 * w[n - 1] - 9.0 * w[n - 2] + 2.0 * w[n - 3]) / (6.0 * dx);
        (left, right)
    }

    fn check_contacts(&self) -> Result<()> {
        let tol = contact_slope_tolerance(self.dx());
        let (l, r) = self.contact_slopes();
        if (l - SQRT3).abs() > tol {
            return Err(Error::ContactSlope {
                side: "left",
                drift: l - SQRT3,
            });
        }
        if (r + SQRT3).abs() > tol {
            return Err(Error::ContactSlope {
                side: "right",
                drift: r + SQRT3,
            });
        }
        Ok(())
    }

    /// Largest stable explicit step scaled by `cfl`.
    fn stable_dt(&self, cfl: f64) -> f64 {
        let dx = self.dx();
        let min_coef = self
            .w
            .windows(2)
            .map(|p| {
                let s = (p[1] - p[0]) / dx;
                1.0 + s * s
            })
            .fold(f64::INFINITY, f64::min);
        cfl * dx * dx * min_coef
    }

    fn explicit_step(&mut self, dt: f64) {
        let n = self.n();
        let dx = self.dx();
        let (da, db) = self.speeds();
        let w = &self.w;
        let mut next = vec![0.0; n + 1];
        for i in 1..n {
            let xi = i as f64 / n as f64;
            let wx = (w[i + 1] - w[i - 1]) / (2.0 * dx);
            let wxx = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (dx * dx);
            next[i] = w[i] + dt * (wxx / (1.0 + wx * wx) + wx * ((1.0 - xi) * da + xi * db));
        }
        self.w = next;
        self.a += dt * da;
        self.b += dt * db;
        self.t += dt;
    }

    fn semi_implicit_step(&mut self, dt: f64) -> Result<()> {
        let n = self.n();
        let m = n - 1;
        let dx = self.dx();
        let w = &self.w;

        // M = I − dt D δ²/dx² on the interior, D frozen at the old slopes
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut ga = vec![0.0; m];
        let mut gb = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            let xi = i as f64 / n as f64;
            let wx = (w[i + 1] - w[i - 1]) / (2.0 * dx);
            let r = dt / (dx * dx) / (1.0 + wx * wx);
            lower[k] = -r;
            diag[k] = 1.0 + 2.0 * r;
            upper[k] = -r;
            ga[k] = wx * (1.0 - xi);
            gb[k] = wx * xi;
        }
        // ȧ = ra·w + sa and ḃ = rb·w + sb, linear in the new interior values
        let s3 = SQRT3 * dx * dx;
        let (ra1, ra2, sa) = (-1.0 / s3, 1.0 / (8.0 * s3), 3.0 / (4.0 * dx));
        let (rb1, rb2, sb) = (1.0 / s3, -1.0 / (8.0 * s3), -3.0 / (4.0 * dx));
        let ra_dot = |v: &[f64]| ra1 * v[0] + ra2 * v[1];
        let rb_dot = |v: &[f64]| rb1 * v[m - 1] + rb2 * v[m - 2];

        let rhs: Vec<f64> = (0..m).map(|k| w[k + 1] + dt * (ga[k] * sa + gb[k] * sb)).collect();
        let y = thomas(&lower, &diag, &upper, &rhs)?;
        let za = thomas(&lower, &diag, &upper, &ga)?;
        let zb = thomas(&lower, &diag, &upper, &gb)?;
        // Woodbury: w = y + dt Z (I − dt V Z)⁻¹ V y
        let k11 = 1.0 - dt * ra_dot(&za);
        let k12 = -dt * ra_dot(&zb);
        let k21 = -dt * rb_dot(&za);
        let k22 = 1.0 - dt * rb_dot(&zb);
        let det = k11 * k22 - k12 * k21;
        if !(det.abs() > 1e-300) || !det.is_finite() {
            return Err(Error::Instability {
                time: self.t,
                reason: "singular contact coupling".into(),
            });
        }
        let (vy1, vy2) = (ra_dot(&y), rb_dot(&y));
        let c1 = (k22 * vy1 - k12 * vy2) / det;
        let c2 = (-k21 * vy1 + k11 * vy2) / det;
        let mut next = vec![0.0; n + 1];
        for k in 0..m {
            next[k + 1] = y[k] + dt * (za[k] * c1 + zb[k] * c2);
        }
        let da = ra_dot(&next[1..n]) + sa;
        let db = rb_dot(&next[1..n]) + sb;
        self.w = next;
        self.a += dt * da;
        self.b += dt * db;
        self.t += dt;
        Ok(())
    }

    fn check_health(&self, width0: f64) -> Result<()> {
        let width = self.b - self.a;
        if !self.w.iter().all(|v| v.is_finite()) || !width.is_finite() {
            return Err(Error::Instability {
                time: self.t,
                reason: "non-finite values".into(),
            });
        }
        if width <= EXTINCTION_WIDTH * width0 {
            return Err(Error::Extinction { time: self.t, width });
        }
        let n = self.n();
        if let Some(i) = (1..n).find(|&i| !(self.w[i] > 0.0)) {
            return Err(Error::Instability {
                time: self.t,
                reason: format!("u[{i}] = {} is no longer positive", self.w[i]),
            });
        }
        Ok(())
    }
}

/// Thomas algorithm for a tridiagonal system (`lower[0]`, `upper[m−1]` unused).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Instability {
            time: f64::NAN,
            reason: "zero pivot".into(),
        });
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for k in 1..m {
        beta = diag[k] - lower[k] * c[k - 1];
        if beta == 0.0 {
            return Err(Error::Instability {
                time: f64::NAN,
                reason: "zero pivot".into(),
            });
        }
        c[k] = upper[k] / beta;
        d[k] = (rhs[k] - lower[k] * d[k - 1]) / beta;
    }
    for k in (0..m - 1).rev() {
        d[k] -= c[k] * d[k + 1];
    }
    Ok(d)
}

/// Contact speeds `(ȧ, ḃ)` of a uniform profile.
pub fn boundary_speed(profile: &GridProfile) -> Result<(f64, f64)> {
    let s = State::from_profile(profile)?;
    s.check_contacts()?;
    Ok(s.speeds())
}

/// Largest stable explicit time step for `profile`, times `cfl`.
pub fn stable_time_step(profile: &GridProfile, cfl: f64) -> Result<f64> {
    Ok(State::from_profile(profile)?.stable_dt(cfl))
}

/// Advances a uniform profile by one step of size `dt`.
pub fn step(profile: &GridProfile, dt: f64, scheme: Scheme) -> Result<GridProfile> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(domain("dt", dt, "(0, ∞)"));
    }
    let mut s = State::from_profile(profile)?;
    let width0 = s.b - s.a;
    match scheme {
        Scheme::Explicit => s.explicit_step(dt),
        Scheme::SemiImplicit => s.semi_implicit_step(dt)?,
    }
    s.check_health(width0)?;
    s.to_profile()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EndTime,
    AreaFloor,
    Extinction,
    MaxSteps,
}

/// Extrapolated extinction time and point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionEstimate {
    pub t_hat: f64,
    pub x0_hat: [f64; 2],
    /// Least-squares area slope over the fitted snapshots.
    pub area_slope: f64,
    /// Root-mean-square residual of the area fit.
    pub area_residual: f64,
    pub snapshots_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub snapshots: Vec<GridProfile>,
    pub diagnostics: Vec<Diagnostics>,
    pub extinction_estimate: Option<ExtinctionEstimate>,
    pub steps: usize,
    pub stop: StopReason,
}

impl FlowTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Least-squares slope of the area over all snapshots.
    pub fn area_slope(&self) -> Result<f64> {
        if self.diagnostics.len() < 3 {
            return Err(Error::Insufficient("fewer than three snapshots".into()));
        }
        let (slope, _, _) = linear_fit(self.diagnostics.iter().map(|d| (d.time, d.area)));
        Ok(slope)
    }

    /// Largest of `sup|u_x|` over all snapshots (chord slopes and contact slopes).
    pub fn max_slope(&self) -> f64 {
        self.snapshots.iter().map(|s| s.max_abs_slope()).fold(0.0, f64::max)
    }
}

/// Least-squares line `y = slope·x + intercept`, with the RMS residual.
pub fn linear_fit(points: impl Iterator<Item = (f64, f64)>) -> (f64, f64, f64) {
    let pts: Vec<(f64, f64)> = points.collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Fits area and contact midpoint over the last snapshots and extrapolates
/// to zero area.
pub fn estimate_extinction(diagnostics: &[Diagnostics]) -> Result<ExtinctionEstimate> {
    const FIT: usize = 10;
    if diagnostics.len() < FIT {
        return Err(Error::Insufficient(format!(
            "{} snapshots, need at least {FIT}",
            diagnostics.len()
        )));
    }
    if diagnostics.windows(2).any(|w| !(w[1].area < w[0].area)) {
        return Err(Error::Insufficient("area is not decreasing".into()));
    }
    let tail = &diagnostics[diagnostics.len() - FIT..];
    let (slope, intercept, rms) = linear_fit(tail.iter().map(|d| (d.time, d.area)));
    let t_hat = -intercept / slope;
    let (ms, mi, _) = linear_fit(tail.iter().map(|d| (d.time, 0.5 * (d.a + d.b))));
    Ok(ExtinctionEstimate {
        t_hat,
        x0_hat: [ms * t_hat + mi, 0.0],
        area_slope: slope,
        area_residual: rms,
        snapshots_used: FIT,
    })
}

/// Runs the flow until a stop rule fires, storing every
/// `snapshot_stride`-th state and the final one.
pub fn evolve(initial: &GridProfile, config: &FlowConfig) -> Result<FlowTrajectory> {
    config.validate()?;
    if initial.n() != config.n {
        return Err(Error::InvalidInput(format!(
            "initial profile has {} intervals, config asks for {}",
            initial.n(),
            config.n
        )));
    }
    let mut s = State::from_profile(initial)?;
    s.check_contacts()?;
    let width0 = s.b - s.a;
    let area0 = geometry::enclosed_area(initial)?;
    let mut states = vec![s.clone()];
    let mut steps = 0;
    let stop = loop {
        if steps >= config.max_steps {
            break StopReason::MaxSteps;
        }
        let mut dt = s.stable_dt(config.cfl);
        if let Some(t_end) = config.t_end {
            if s.t + dt >= t_end {
                dt = t_end - s.t;
            }
        }
        let before = s.clone();
        match config.scheme {
            Scheme::Explicit => s.explicit_step(dt),
            Scheme::SemiImplicit => s.semi_implicit_step(dt)?,
        }
        steps += 1;
        match s.check_health(width0) {
            Ok(()) => {}
            Err(Error::Extinction { .. }) => {
                // keep the last state that still resolves the lens
                s = before;
                break StopReason::Extinction;
            }
            Err(e) => return Err(e),
        }
        if config.t_end.is_some_and(|t| s.t >= t) {
            break StopReason::EndTime;
        }
        if steps % config.snapshot_stride == 0 {
            states.push(s.clone());
        }
        if config.area_floor > 0.0 && area_of(&s) < config.area_floor * area0 {
            break StopReason::AreaFloor;
        }
    };
    if states.last().map(|l| l.t) != Some(s.t) {
        states.push(s);
    }
    let snapshots = states.iter().map(State::to_profile).collect::<Result<Vec<_>>>()?;
    let diagnostics = snapshots
        .par_iter()
        .map(geometry::diagnostics)
        .collect::<Result<Vec<_>>>()?;
    let extinction_estimate = if stop == StopReason::Extinction || stop == StopReason::AreaFloor {
        estimate_extinction(&diagnostics).ok()
    } else {
        None
    };
    Ok(FlowTrajectory {
        snapshots,
        diagnostics,
        extinction_estimate,
        steps,
        stop,
    })
}

fn area_of(s: &State) -> f64 {
    2.0 * s.dx() * s.w.iter().sum::<f64>()
}

/// Exact translating solution `log cos x − t`.
pub fn grim_reaper_reference(x: f64, t: f64) -> Result<f64> {
    if !(x.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(domain("x", x, "(−π/2, π/2)"));
    }
    Ok(x.cos().ln() - t)
}

/// One explicit step of `u_t = u_xx/(1 + u_x²)` on a fixed uniform grid with
/// Dirichlet values `left`, `right` imposed at the new time.
pub fn step_fixed_boundary(u: &[f64], dx: f64, dt: f64, left: f64, right: f64) -> Result<Vec<f64>> {
    let n = u.len();
    if n < 3 {
        return Err(Error::InvalidGrid(format!("{n} nodes")));
    }
    let mut next = vec![0.0; n];
    next[0] = left;
    next[n - 1] = right;
    for i in 1..n - 1 {
        let ux = (u[i + 1] - u[i - 1]) / (2.0 * dx);
        let uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
        next[i] = u[i] + dt * uxx / (1.0 + ux * ux);
    }
    Ok(next)
}

/// Runs the fixed-boundary stepper from the grim reaper at `t = 0` on
/// `[−half_width, half_width]` to `t_end` and returns the max nodal error.
pub fn grim_reaper_error(half_width: f64, n: usize, cfl: f64, t_end: f64) -> Result<f64> {
    let dx = 2.0 * half_width / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| -half_width + dx * i as f64).collect();
    let mut u = xs
        .iter()
        .map(|&x| grim_reaper_reference(x, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let steps = (t_end / (cfl * dx * dx)).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut t = 0.0;
    for k in 1..=steps {
        t = if k == steps { t_end } else { t + dt };
        let edge = grim_reaper_reference(half_width, t)?;
        u = step_fixed_boundary(&u, dx, dt, edge, edge)?;
    }
    Ok(xs
        .iter()
        .zip(&u)
        .map(|(&x, &v)| (v - grim_reaper_reference(x, t_end).unwrap()).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_initial_lens, InitialLens};
    use std::f64::consts::PI;

    fn arc(n: usize) -> GridProfile {
        build_initial_lens(&InitialLens::CircularArc { width: 2.0, center: 0.0 }, n).unwrap()
    }

    #[test]
    fn circular_arc_contact_speed_is_one() {
        let err = |n| {
            let (da, db) = boundary_speed(&arc(n)).unwrap();
            assert!((da + db).abs() < 1e-12);
            (da - 1.0).abs()
        };
        let (e1, e2) = (err(256), err(512));
        assert!(e2 < 1e-3 && (e1 / e2).log2() > 1.9, "{e1} {e2}");
    }

    #[test]
    fn wedge_limit_has_no_speed() {
        // tent with exact 60° sides: straight, so u_xx vanishes at the contacts
        let p = GridProfile::from_fn(-1.0, 1.0, 64, 0.0, |x| SQRT3 * (1.0 - x.abs())).unwrap();
        let (da, db) = boundary_speed(&p).unwrap();
        assert!(da.abs() < 1e-9 && db.abs() < 1e-9);
    }

    #[test]
    fn wrong_contact_angle_is_rejected() {
        let p = GridProfile::from_fn(-1.0, 1.0, 64, 0.0, |x| 1.0 - x * x).unwrap();
        assert!(matches!(boundary_speed(&p), Err(Error::ContactSlope { .. })));
    }

    #[test]
    fn grim_reaper_reference_values() {
        assert_eq!(grim_reaper_reference(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(grim_reaper_reference(0.0, 1.0).unwrap(), -1.0);
        assert!(grim_reaper_reference(1.6, 0.0).is_err());
        let (x, t, d) = (0.3f64, 0.7, 1e-3);
        let ut = (grim_reaper_reference(x, t + d).unwrap() - grim_reaper_reference(x, t - d).unwrap()) / (2.0 * d);
        let ux = -x.tan();
        let uxx = -1.0 / (x.cos() * x.cos());
        assert!((ut - uxx / (1.0 + ux * ux)).abs() < 1e-9);
    }

    #[test]
    fn grim_reaper_converges_at_second_order() {
        let e1 = grim_reaper_error(1.0, 20, 0.4, 0.05).unwrap();
        let e2 = grim_reaper_error(1.0, 40, 0.4, 0.05).unwrap();
        assert!((e1 / e2).log2() >= 1.9, "{e1} {e2}");
    }

    #[test]
    fn explicit_and_semi_implicit_agree_on_one_step() {
        // both are first order in time, so one-step differences are O(dt²)
        let p = arc(64);
        let diff = |dt: f64| {
            let e = step(&p, dt, Scheme::Explicit).unwrap();
            let s = step(&p, dt, Scheme::SemiImplicit).unwrap();
            e.nodes
                .iter()
                .zip(&s.nodes)
                .map(|(p, q)| (p[1] - q[1]).abs())
                .fold((e.a - s.a).abs(), f64::max)
        };
        let dt = stable_time_step(&p, 0.4).unwrap();
        let (d1, d2) = (diff(dt), diff(dt / 4.0));
        assert!((d1 / d2).log(4.0) > 1.8, "{d1} {d2}");
    }

    #[test]
    fn self_similar_step_follows_homothety() {
        // at t = −s²/2 the exact solution is the shrinker scaled by √(−2t)
        let lens = crate::shooting::find_symmetric_lens(1e-12).unwrap();
        let s0 = 1.0;
        let err = |n: usize| {
            let p = build_initial_lens(&InitialLens::ScaledSelfSimilar { scale: s0, center: 0.0 }, n).unwrap();
            let dt = stable_time_step(&p, 0.4).unwrap();
            let q = step(&p, dt, Scheme::Explicit).unwrap();
            let s1 = (-2.0 * q.time).sqrt();
            q.nodes
                .iter()
                .map(|&[x, u]| (u - s1 * lens.profile.value_at((x / s1).abs())).abs())
                .fold(0.0, f64::max)
                / dt
        };
        // the one-step error per unit time shrinks with the grid
        let (e1, e2) = (err(64), err(128));
        assert!(e2 < 0.5 * e1, "{e1} {e2}");
        assert!(e2 < 0.05);
    }

    #[test]
    fn short_run_keeps_invariants() {
        let cfg = FlowConfig {
            n: 64,
            t_end: Some(0.2),
            snapshot_stride: 100,
            ..FlowConfig::default()
        };
        let traj = evolve(&arc(64), &cfg).unwrap();
        assert_eq!(traj.stop, StopReason::EndTime);
        let d = &traj.diagnostics;
        assert!(d.windows(2).all(|w| w[1].time > w[0].time && w[1].area < w[0].area));
        assert!(d.windows(2).all(|w| w[1].a >= w[0].a && w[1].b <= w[0].b));
        assert!(traj.max_slope() <= SQRT3 + 1e-6);
        let slope = traj.area_slope().unwrap();
        assert!((slope / (-4.0 * PI / 3.0) - 1.0).abs() < 0.01, "{slope}");
        // symmetric data keeps the midpoint
        assert!(d.iter().all(|x| (x.a + x.b).abs() < 1e-10));
    }

    #[test]
    fn semi_implicit_run_keeps_area_law() {
        let cfg = FlowConfig {
            n: 64,
            cfl: 4.0,
            scheme: Scheme::SemiImplicit,
            t_end: Some(0.3),
            snapshot_stride: 20,
            ..FlowConfig::default()
        };
        let traj = evolve(&arc(64), &cfg).unwrap();
        let slope = traj.area_slope().unwrap();
        assert!((slope / (-4.0 * PI / 3.0) - 1.0).abs() < 0.01, "{slope}");
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig { n: 16, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig { cfl: 0.6, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig {
            cfl: 0.6,
            scheme: Scheme::SemiImplicit,
            ..FlowConfig::default()
        }
        .validate()
        .is_ok());
        assert!(evolve(&arc(64), &FlowConfig::default()).is_err());
    }

    #[test]
    fn thomas_solves_tridiagonal() {
        let lower = [0.0, 1.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [1.0, 1.0, 1.0, 0.0];
        let x = [1.0, -2.0, 3.0, 0.5];
        let rhs: Vec<f64> = (0..4)
            .map(|k| {
                diag[k] * x[k]
                    + if k > 0 { lower[k] * x[k - 1] } else { 0.0 }
                    + if k < 3 { upper[k] * x[k + 1] } else { 0.0 }
            })
            .collect();
        let got = thomas(&lower, &diag, &upper, &rhs).unwrap();
        for k in 0..4 {
            assert!((got[k] - x[k]).abs() < 1e-14);
        }
    }
}
