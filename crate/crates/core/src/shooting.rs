//! Symmetric self-similar profiles `u'' = (1 + u'²)(x u' − u)`, `u(0) = h`,
//! `u'(0) = 0`, shot from the apex towards the x¹-axis.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::SQRT3;
use crate::roots::bisect_bracket;

pub const DEFAULT_DX: f64 = 1e-4;
/// Slopes steeper than this are treated as a blowup of the integration.
pub const SLOPE_CAP: f64 = 50.0;
/// Profiles with `h < 1` meet the axis before this abscissa.
pub const X_LIMIT: f64 = std::f64::consts::SQRT_2;
/// Relative slope tolerance for classifying a contact as a 60° hit.
pub const HIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotOutcome {
    /// Reached `u = 0` with slope `−√3`.
    Hit,
    /// Reached `u = 0` with a slope shallower than `−√3`.
    Undershoot,
    /// Slope reached `−√3` while still above the axis.
    Overshoot,
    /// Integration stopped for a non-finite value, the slope cap, or ran past √2.
    Blowup,
}

/// Profile on `[0, contact_x]`.
///
/// For an overshoot the integration stops where `u' = −√3`, and `contact_x`,
/// `contact_slope` describe that point instead of an axis crossing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub h: f64,
    pub dx: f64,
    /// `(x, u, u')` at every step, the terminal event included.
    pub samples: Vec<[f64; 3]>,
    pub contact_x: f64,
    pub contact_slope: f64,
    /// `E^u` at the apex, `h e^{−h²/2}`.
    pub energy: f64,
    pub outcome: ShotOutcome,
}

impl SelfSimilarProfile {
    /// Largest `|E^u − E^u(0)|` over the samples.
    pub fn max_energy_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (energy_u(s[0], s[1], s[2]) - self.energy).abs())
            .fold(0.0, f64::max)
    }

    /// Height at `x ∈ [0, contact_x]` by cubic Hermite interpolation of the samples.
    pub fn value_at(&self, x: f64) -> f64 {
        let s = &self.samples;
        if x <= s[0][0] {
            return s[0][1];
        }
        let last = s.len() - 1;
        if x >= s[last][0] {
            return s[last][1];
        }
        let i = s.partition_point(|p| p[0] <= x).max(1) - 1;
        let (p, q) = (s[i], s[i + 1]);
        let h = q[0] - p[0];
        let t = (x - p[0]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p[1]
            + (t3 - 2.0 * t2 + t) * h * p[2]
            + (-2.0 * t3 + 3.0 * t2) * q[1]
            + (t3 - t2) * h * q[2]
    }

    /// `u''` at each sample from the differential equation.
    pub fn second_derivatives(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| rhs(s[0], [s[1], s[2]])[1])
    }

    /// Curvature `⟨X, ν⟩ = (u − x u')/√(1 + u'²)` at each sample.
    pub fn support_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| (s[1] - s[0] * s[2]) / (1.0 + s[2] * s[2]).sqrt())
    }
}

/// `E^u = ⟨X, ν⟩ e^{−|X|²/2}` for the graph point `(x, u)` with slope `u'`.
pub fn energy_u(x: f64, u: f64, u_prime: f64) -> f64 {
    (u - x * u_prime) / (1.0 + u_prime * u_prime).sqrt() * (-(x * x + u * u) / 2.0).exp()
}

#[inline]
fn rhs(x: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], (1.0 + y[1] * y[1]) * (x * y[1] - y[0])]
}

fn rk4(x: f64, y: [f64; 2], dx: f64) -> [f64; 2] {
    let k1 = rhs(x, y);
    let k2 = rhs(x + 0.5 * dx, [y[0] + 0.5 * dx * k1[0], y[1] + 0.5 * dx * k1[1]]);
    let k3 = rhs(x + 0.5 * dx, [y[0] + 0.5 * dx * k2[0], y[1] + 0.5 * dx * k2[1]]);
    let k4 = rhs(x + dx, [y[0] + dx * k3[0], y[1] + dx * k3[1]]);
    [
        y[0] + dx / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dx / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Finds the sub-step `θ·dx` where `g` first drops to zero, given `g(y) > 0 ≥ g(rk4(y, dx))`.
fn locate_event(x: f64, y: [f64; 2], dx: f64, g: impl Fn([f64; 2]) -> f64) -> (f64, [f64; 2]) {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(rk4(x, y, mid * dx)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // report the state on the far side so the event condition holds exactly
    (x + hi * dx, rk4(x, y, hi * dx))
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(domain("h", h, "(0, 1]"))
    }
}

fn check_dx(dx: f64) -> Result<()> {
    if dx > 0.0 && dx <= 1e-2 {
        Ok(())
    } else {
        Err(domain("dx", dx, "(0, 1e-2]"))
    }
}

/// Shoots from the apex with fixed-step RK4 until the profile meets the
/// axis, its slope reaches `−√3` above the axis, or the integration fails.
pub fn integrate_profile(h: f64, dx: f64) -> Result<SelfSimilarProfile> {
    check_h(h)?;
    check_dx(dx)?;
    let mut x = 0.0;
    let mut y = [h, 0.0];
    let mut samples = vec![[x, y[0], y[1]]];
    let outcome = loop {
        let next = rk4(x, y, dx);
        if !next[0].is_finite() || !next[1].is_finite() || next[1].abs() > SLOPE_CAP {
            if dx < f64::EPSILON * x.max(1.0) {
                return Err(Error::StepUnderflow { x });
            }
            break ShotOutcome::Blowup;
        }
        let crosses_axis = next[0] <= 0.0;
        let too_steep = next[1] <= -SQRT3;
        if crosses_axis || too_steep {
            let (xa, ya) = locate_event(x, y, dx, |s| s[0]);
            let (xs, ys) = locate_event(x, y, dx, |s| s[1] + SQRT3);
            let hit = crosses_axis && (ya[1] + SQRT3).abs() <= HIT_TOL * SQRT3;
            // otherwise whichever event comes first within the step decides
            let (xe, ye, outcome) = if hit {
                (xa, ya, ShotOutcome::Hit)
            } else if too_steep && (!crosses_axis || xs < xa) {
                (xs, ys, ShotOutcome::Overshoot)
            } else {
                (xa, ya, ShotOutcome::Undershoot)
            };
            x = xe;
            y = ye;
            if outcome == ShotOutcome::Undershoot || outcome == ShotOutcome::Hit {
                y[0] = 0.0;
            }
            samples.push([x, y[0], y[1]]);
            break outcome;
        }
        x += dx;
        y = next;
        samples.push([x, y[0], y[1]]);
        if x > X_LIMIT {
            break ShotOutcome::Blowup;
        }
    };
    Ok(SelfSimilarProfile {
        h,
        dx,
        samples,
        contact_x: x,
        contact_slope: y[1],
        energy: h * (-0.5 * h * h).exp(),
        outcome,
    })
}

/// Height at which the solution's slope first reaches `−√3`, continuing
/// below the axis if necessary. Negative for undershoots, positive for
/// overshoots, zero exactly at the symmetric lens.
pub fn height_at_sixty_degrees(h: f64, dx: f64) -> Result<f64> {
    check_h(h)?;
    check_dx(dx)?;
    let mut x = 0.0;
    let mut y = [h, 0.0];
    while x < 4.0 {
        let next = rk4(x, y, dx);
        if !next[1].is_finite() {
            break;
        }
        if next[1] <= -SQRT3 {
            let (_, ye) = locate_event(x, y, dx, |s| s[1] + SQRT3);
            return Ok(ye[0]);
        }
        x += dx;
        y = next;
    }
    Err(Error::Instability {
        time: x,
        reason: format!("slope never reached -√3 for h = {h}"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricLens {
    /// Apex height `H`.
    pub height: f64,
    /// Contact abscissa `b`.
    pub contact_x: f64,
    pub profile: SelfSimilarProfile,
}

/// Bisection for the apex height whose profile meets the axis at 60°.
pub fn find_symmetric_lens(tol: f64) -> Result<SymmetricLens> {
    find_symmetric_lens_with(tol, DEFAULT_DX)
}

pub fn find_symmetric_lens_with(tol: f64, dx: f64) -> Result<SymmetricLens> {
    if !(tol >= 1e-12) {
        return Err(domain("tol", tol, "[1e-12, ∞)"));
    }
    let f = |h: f64| height_at_sixty_degrees(h, dx).unwrap_or(f64::NAN);
    let mut bracket = (0.55, 0.99);
    let classify = |h: f64| integrate_profile(h, dx).map(|p| p.outcome);
    // widen once if the default bracket is misclassified
    if classify(bracket.0)? != ShotOutcome::Undershoot || classify(bracket.1)? != ShotOutcome::Overshoot {
        bracket = (0.05, 0.999);
        if classify(bracket.0)? != ShotOutcome::Undershoot || classify(bracket.1)? != ShotOutcome::Overshoot {
            return Err(Error::NoBracket {
                what: "symmetric lens height".into(),
                lo: bracket.0,
                hi: bracket.1,
            });
        }
    }
    let (lo, hi) = bisect_bracket(f, bracket.0, bracket.1, 1e-2 * tol, "symmetric lens height")?;
    let height = 0.5 * (lo + hi);
    let profile = integrate_profile(height, dx)?;
    let residual = (profile.contact_slope + SQRT3).abs();
    if profile.outcome == ShotOutcome::Overshoot || residual > tol {
        return Err(Error::Insufficient(format!(
            "contact slope residual {residual:e} exceeds {tol:e} at h = {height}"
        )));
    }
    Ok(SymmetricLens {
        height,
        contact_x: profile.contact_x,
        profile: SelfSimilarProfile {
            outcome: ShotOutcome::Hit,
            ..profile
        },
    })
}

/// The two polynomial barriers for symmetric profiles with apex height `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierBounds {
    pub h: f64,
    /// Positive root of `h − ½hx² − hx⁴/24`, equal to `√(−6 + 2√15)` for every `h`.
    pub first_root: f64,
    /// Positive root of the degree-ten barrier.
    pub refined_root: f64,
}

impl BarrierBounds {
    /// `h − ½hx² − hx⁴/24`, which every profile stays strictly below for `x > 0`.
    pub fn first(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.h * (1.0 - 0.5 * x2 - x2 * x2 / 24.0)
    }

    /// The barrier obtained by feeding `u_x² ≥ h²(x + x³/6)²` back into the equation.
    pub fn refined(&self, x: f64) -> f64 {
        let h = self.h;
        let h2 = h * h;
        let x2 = x * x;
        let x4 = x2 * x2;
        let x6 = x4 * x2;
        let x8 = x4 * x4;
        let x10 = x8 * x2;
        h - h * (0.5 * x2
            + (0.5 + h2) * x4 / 12.0
            + h2 * x6 / 36.0
            + h2 * x8 / 288.0
            + h2 * x10 / 6480.0)
    }
}

pub fn barrier_b1() -> f64 {
    (-6.0 + 2.0 * 15f64.sqrt()).sqrt()
}

pub fn barrier_bounds(h: f64) -> Result<BarrierBounds> {
    check_h(h)?;
    let mut b = BarrierBounds {
        h,
        first_root: barrier_b1(),
        refined_root: f64::NAN,
    };
    let (lo, hi) = bisect_bracket(|x| -b.refined(x), 0.0, 2.0, 1e-15, "refined barrier root")?;
    b.refined_root = 0.5 * (lo + hi);
    Ok(b)
}
