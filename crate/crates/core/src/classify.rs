//! Numeric certificates for the uniqueness of the symmetric lens, and the
//! fish-shaped shrinker: its total-curvature equation and its geometry.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyLevel, DEFAULT_TOL, ETA_MAX};
use crate::error::{domain, Error, Result};
use crate::geometry::{self, dot, norm, normalize, sub, Junction, NetworkSnapshot, Point, Ray, SQRT3};
use crate::roots::{bisect_bracket, sign_changes};
use crate::shooting;

/// The explicit constants of the uniqueness argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertConstants {
    pub h_max: f64,
    pub b_u: f64,
    pub b_l: f64,
    #[serde(rename = "H1")]
    pub h1: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    /// `sin(π/3)`; only ever changed to probe that the checks can fail.
    pub sin_sixty: f64,
}

impl Default for CertConstants {
    fn default() -> Self {
        CertConstants {
            h_max: 0.5869,
            b_u: 0.7645,
            b_l: 1.2568,
            h1: 0.5587,
            b1: shooting::barrier_b1(),
            sin_sixty: SQRT3 / 2.0,
        }
    }
}

/// One certified claim with its tested range and margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub claim: String,
    pub range: String,
    /// Headline margin; positive when the claim holds.
    pub margin: f64,
    pub sub_margins: Vec<(String, f64)>,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, claim: &str, range: String, margin: f64, sub_margins: Vec<(String, f64)>) -> Self {
        let passed = margin > 0.0 && sub_margins.iter().all(|(_, m)| *m > 0.0);
        Check {
            name: name.into(),
            claim: claim.into(),
            range,
            margin,
            sub_margins,
            passed,
            detail: String::new(),
        }
    }

    fn failed(name: &str, claim: &str, err: &Error) -> Self {
        Check {
            name: name.into(),
            claim: claim.into(),
            range: String::new(),
            margin: f64::NAN,
            sub_margins: Vec::new(),
            passed: false,
            detail: err.to_string(),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub checks: Vec<Check>,
    pub constants_used: CertConstants,
    pub passed: bool,
}

impl CertificationReport {
    fn new(checks: Vec<Check>, constants_used: CertConstants) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        CertificationReport {
            checks,
            constants_used,
            passed,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Smallest admissible angle of the apex ray, `π − π/√2`.
pub fn beta_min() -> f64 {
    PI - PI / 2f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadArea {
    pub beta: f64,
    pub value: f64,
    /// Central difference `dA_□/dβ`.
    pub derivative: f64,
}

fn quad_formula(beta: f64, c: &CertConstants) -> f64 {
    let alpha = 2.0 * PI / 3.0 - beta;
    let lever = c.h_max - c.b_u * beta.cos();
    c.b_u * c.b_u / 4.0 * (2.0 * beta).sin() + lever * c.b_u * beta.sin() - lever * lever * alpha.tan() / 2.0
}

/// Area of the circumscribed quadrilateral with sides `h_max` and `b_u`.
pub fn quadrilateral_area(beta: f64) -> Result<QuadArea> {
    quadrilateral_area_with(beta, &CertConstants::default())
}

pub fn quadrilateral_area_with(beta: f64, c: &CertConstants) -> Result<QuadArea> {
    if !(beta > beta_min() && beta < PI) {
        return Err(domain("beta", beta, "(π − π/√2, π)"));
    }
    let h = 1e-6;
    Ok(QuadArea {
        beta,
        value: quad_formula(beta, c),
        derivative: (quad_formula(beta + h, c) - quad_formula(beta - h, c)) / (2.0 * h),
    })
}

/// Area between a self-similar arc and the rays at angles 0 and β: `β/2 − π/12`.
pub fn sector_area(beta: f64) -> f64 {
    beta / 2.0 - PI / 12.0
}

fn energy_bound_check(c: &CertConstants) -> Check {
    let g = |b: f64| c.sin_sixty * b * (-b * b / 2.0).exp();
    let upper = c.h_max * (-c.h_max * c.h_max / 2.0).exp();
    let lower_u = g(c.b_u);
    let lower_l = g(c.b_l);
    // the contact side is smallest at an end of [b_u, b_l]; confirm on a grid
    let grid_min = (0..=2000)
        .map(|i| g(c.b_u + (c.b_l - c.b_u) * i as f64 / 2000.0))
        .fold(f64::INFINITY, f64::min);
    Check::new(
        "energy_window",
        "h_max e^{-h_max^2/2} < sin(pi/3) b e^{-b^2/2} for b in [b_u, b_l]",
        format!("b in [{}, {}]", c.b_u, c.b_l),
        lower_u - upper,
        vec![
            ("b_l_side".into(), lower_l - upper),
            ("grid_min_over_window".into(), grid_min - upper),
            ("upper_le_0.49405".into(), 0.49405 - upper),
            ("b_u_side_ge_0.49430".into(), lower_u - 0.49430),
            ("b_l_side_ge_0.49408".into(), lower_l - 0.49408),
        ],
    )
}

fn barrier_check(c: &CertConstants) -> Result<Check> {
    let e = |x: f64| x * (-x * x / 2.0).exp();
    let energy_gap = c.sin_sixty * e(c.b1) - e(c.h1);
    // every shot with 0 < h ≤ H1 reaches the axis less steeply than 60°
    let hs: Vec<f64> = (1..=48).map(|i| c.h1 * i as f64 / 48.0).collect();
    let slope_margin = hs
        .par_iter()
        .map(|&h| {
            let p = shooting::integrate_profile(h, shooting::DEFAULT_DX)?;
            Ok(match p.outcome {
                shooting::ShotOutcome::Undershoot => p.contact_slope + SQRT3,
                _ => -1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    // the refined barrier root falls with h, so H1 is the worst case on [H1, h_max]
    let roots = [c.h1, 0.5 * (c.h1 + c.h_max), c.h_max]
        .iter()
        .map(|&h| shooting::barrier_bounds(h).map(|b| b.refined_root))
        .collect::<Result<Vec<_>>>()?;
    let worst_root = roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Check::new(
        "barrier_exclusion",
        "H1 e^{-H1^2/2} < sin(pi/3) B1 e^{-B1^2/2}; refined barrier root < b_l on [H1, h_max]",
        format!("h in (0, {}]", c.h_max),
        energy_gap,
        vec![
            ("shot_contact_slope_above_-sqrt3".into(), slope_margin),
            ("refined_root_below_b_l".into(), c.b_l - worst_root),
        ],
    )
    .with_detail(format!("refined root at H1 = {:.6}", roots[0])))
}

/// Upper end of the quadrilateral range: the apex ray leans towards the
/// contact side, `β ≤ π/2`, the mirror case being identical.
pub const BETA_MAX_CERTIFIED: f64 = FRAC_PI_2;

fn quadrilateral_check(c: &CertConstants) -> Result<Check> {
    let lo = beta_min();
    let n = 2000;
    let betas: Vec<f64> = (0..=n)
        .map(|i| lo + (BETA_MAX_CERTIFIED - lo) * i as f64 / n as f64)
        .map(|b| if b <= lo { lo + 1e-9 } else { b })
        .collect();
    let quads = betas
        .iter()
        .map(|&b| quadrilateral_area_with(b, c))
        .collect::<Result<Vec<_>>>()?;
    let max_diff = quads
        .iter()
        .map(|q| q.value - sector_area(q.beta))
        .fold(f64::NEG_INFINITY, f64::max);
    let max_slope = quads.iter().map(|q| q.derivative).fold(f64::NEG_INFINITY, f64::max);
    let at_lo = quads[0].value - sector_area(quads[0].beta);
    Ok(Check::new(
        "quadrilateral",
        "A_quad - A < 0 with dA_quad/dbeta < 1/2",
        format!("beta in ({lo:.6}, {BETA_MAX_CERTIFIED:.6}]"),
        -max_diff,
        vec![
            ("slope_below_half".into(), 0.5 - max_slope),
            ("left_end_negative".into(), -at_lo),
            ("max_at_left_end".into(), at_lo - max_diff + 1e-15),
        ],
    ))
}

fn psi_root_check(tol: f64) -> Result<Check> {
    let scan = energy::scan_psi_root(10_000, ETA_MAX, tol)?;
    let e0 = energy::eta0_value();
    let below = FRAC_PI_3 - energy::psi(e0, tol)?;
    let above = energy::psi(ETA_MAX, tol)? - FRAC_PI_3;
    let root_margin = scan
        .eta_star
        .map(|r| (r - e0).min(ETA_MAX - r))
        .unwrap_or(-1.0);
    Ok(Check::new(
        "psi_root_unique",
        "Psi(eta) = pi/3 exactly once on (1, 1.9], at eta* in (eta0, 1.9)",
        format!("{} points on (1, {ETA_MAX}]", scan.points),
        root_margin,
        vec![
            ("single_sign_change".into(), if scan.sign_changes == 1 { 1.0 } else { -1.0 }),
            ("pi/3_minus_psi_eta0".into(), below),
            ("psi_1.9_minus_pi/3".into(), above),
        ],
    )
    .with_detail(format!(
        "sign changes = {}, eta* = {}",
        scan.sign_changes,
        scan.eta_star.map_or("none".into(), |e| e.to_string())
    )))
}

fn sigma_check(tol: f64) -> Result<Check> {
    let (at, max) = energy::sigma_max(1000, ETA_MAX, tol)?;
    Ok(Check::new(
        "sigma_bound",
        "Sigma(eta) < 2 pi/3 on [eta0, 1.9]",
        format!("1000 points on [{:.6}, {ETA_MAX}]", energy::eta0_value()),
        2.0 * PI / 3.0 - max,
        vec![],
    )
    .with_detail(format!("max Sigma = {max:.9} at eta = {at:.6}")))
}

fn large_eta_check(c: &CertConstants) -> Check {
    // (4η²/3 − 1) h² − 2 log η has derivative 8ηh²/3 − 2/η > 0 beyond 1.9
    let gap = |eta: f64| (4.0 * eta * eta / 3.0 - 1.0) * c.h_max * c.h_max - 2.0 * eta.ln();
    let derivative_floor = 8.0 * ETA_MAX * c.h_max * c.h_max / 3.0 - 2.0 / ETA_MAX;
    let grid_min = (0..=1000)
        .map(|i| gap(ETA_MAX + 8.0 * i as f64 / 1000.0))
        .fold(f64::INFINITY, f64::min);
    Check::new(
        "large_eta_excluded",
        "2 log eta < (4 eta^2/3 - 1) h_max^2 for eta >= 1.9",
        "eta >= 1.9".into(),
        gap(ETA_MAX),
        vec![
            ("gap_increasing".into(), derivative_floor),
            ("grid_min_on_[1.9,9.9]".into(), grid_min),
        ],
    )
}

fn run_check(name: &str, claim: &str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::failed(name, claim, &e))
}

/// Runs the six checks that together rule out a second lens.
pub fn certify_lens_uniqueness() -> CertificationReport {
    certify_lens_uniqueness_with(&CertConstants::default())
}

pub fn certify_lens_uniqueness_with(c: &CertConstants) -> CertificationReport {
    let tol = DEFAULT_TOL;
    let jobs: Vec<Box<dyn Fn() -> Check + Send + Sync>> = vec![
        Box::new(|| energy_bound_check(c)),
        Box::new(|| run_check("barrier_exclusion", "barrier", || barrier_check(c))),
        Box::new(|| run_check("quadrilateral", "quadrilateral", || quadrilateral_check(c))),
        Box::new(|| run_check("psi_root_unique", "psi root", || psi_root_check(tol))),
        Box::new(|| run_check("sigma_bound", "sigma", || sigma_check(tol))),
        Box::new(|| large_eta_check(c)),
    ];
    let checks = jobs.par_iter().map(|job| job()).collect();
    CertificationReport::new(checks, *c)
}

/// `Ψ(η₀) > π/6`, which forces `K > 4π/3` for any fish without mirror symmetry.
pub fn certify_asymmetric_fish_nonexistence() -> Check {
    run_check("asymmetric_fish_excluded", "Psi(eta0) > pi/6", || {
        let psi0 = energy::psi(energy::eta0_value(), DEFAULT_TOL)?;
        let theta_far = energy::theta(1e12, DEFAULT_TOL)?;
        Ok(Check::new(
            "asymmetric_fish_excluded",
            "K = 2 Sigma + 2 Theta > 2 Psi(eta0) + pi > pi/3 + pi = 4 pi/3",
            "eta >= eta0".into(),
            psi0 - PI / 6.0,
            vec![
                ("k_bound_minus_4pi/3".into(), 2.0 * psi0 + PI - 4.0 * PI / 3.0),
                ("theta_above_pi/2_at_rho_1e12".into(), theta_far - FRAC_PI_2),
            ],
        )
        .with_detail(format!("Psi(eta0) = {psi0:.9}")))
    })
}

/// Branch of `η` on which the loop's junction is realised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaBranch {
    /// `η̄ ≤ η₀`: the first crossing of the 60° line after the minimum.
    Bar,
    /// `η̃ ≥ η₀`.
    Tilde,
}

/// Largest `r_min` whose level still reaches the 60° lines.
pub fn r_min_threshold() -> f64 {
    let e0 = energy::eta0_value();
    (2.0 / energy::coefficient_c(e0).unwrap_or(f64::NAN)).sqrt()
}

/// `K(r_min) = 2Θ(ρ) + 4Ψ(η̄)`, the total curvature of the loop.
pub fn fish_total_curvature(r_min: f64) -> Result<f64> {
    fish_total_curvature_branch(r_min, EtaBranch::Bar)
}

pub fn fish_total_curvature_branch(r_min: f64, branch: EtaBranch) -> Result<f64> {
    if !(r_min > 0.0 && r_min < 1.0) {
        return Err(domain("r_min", r_min, "(0, 1)"));
    }
    match branch {
        EtaBranch::Bar => fish_total_curvature_log(-r_min.ln()),
        EtaBranch::Tilde => {
            let lvl = EnergyLevel::from_s_minus(r_min)?;
            let eta = lvl.eta.ok_or_else(|| no_triple_point(r_min))?;
            Ok(2.0 * energy::theta(lvl.rho, DEFAULT_TOL)? + 4.0 * energy::psi(eta, DEFAULT_TOL)?)
        }
    }
}

/// `K` as a function of `ℓ = −log r_min`, reaching levels far below the
/// smallest representable `r_min`.
pub fn fish_total_curvature_log(neg_log_r_min: f64) -> Result<f64> {
    let ell = neg_log_r_min;
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(domain("-log r_min", ell, "(0, ∞)"));
    }
    if (-ell).exp() >= r_min_threshold() {
        return Err(no_triple_point((-ell).exp()));
    }
    Ok(2.0 * energy::theta_from_level(ell, DEFAULT_TOL)? + 4.0 * energy::psi_eta_bar_for_level(ell, DEFAULT_TOL)?)
}

fn no_triple_point(r_min: f64) -> Error {
    Error::InvalidInput(format!(
        "the level through r_min = {r_min} does not reach the 60° lines"
    ))
}

/// Self-similar network that can be built from a single parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkKind {
    /// Symmetric lens with apex height `height`.
    Lens { height: f64 },
    /// Fish whose short arc comes closest to the origin at distance `r_min`.
    Fish { r_min: f64 },
}

/// Arc sampled as `(x, y, φ)` with unit speed.
pub type ArcSamples = Vec<[f64; 3]>;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedNetwork {
    pub snapshot: NetworkSnapshot,
    /// Mismatch at the junction reached last (zero by construction for the lens).
    pub closure_residual: f64,
    /// Total turning of the tangent along the curved arcs.
    pub total_turning: f64,
    /// Largest deviation of `E^S = |X|² − 2 log⟨X, ν⟩` from its value at the start.
    pub max_energy_drift: f64,
    /// `(minima, maxima)` of `|X|` on the two arcs.
    pub upper_extrema: (usize, usize),
    pub lower_extrema: (usize, usize),
    pub arcs: [ArcSamples; 2],
}

pub const ARC_DS: f64 = 1e-4;
pub const CONSTRUCTION_TOL: f64 = 1e-6;

/// Arc-length form of `κ = ⟨X, ν⟩`: `x' = cos φ`, `y' = sin φ`, `φ' = x sin φ − y cos φ`.
#[inline]
fn arc_rhs(s: [f64; 3]) -> [f64; 3] {
    let (sn, cs) = s[2].sin_cos();
    [cs, sn, s[0] * sn - s[1] * cs]
}

fn arc_rk4(s: [f64; 3], h: f64) -> [f64; 3] {
    let add = |a: [f64; 3], k: [f64; 3], f: f64| [a[0] + f * k[0], a[1] + f * k[1], a[2] + f * k[2]];
    let k1 = arc_rhs(s);
    let k2 = arc_rhs(add(s, k1, 0.5 * h));
    let k3 = arc_rhs(add(s, k2, 0.5 * h));
    let k4 = arc_rhs(add(s, k3, h));
    [
        s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

/// `⟨T, X/|X|⟩`, the rate of change of `|X|`.
fn radial_speed(s: &[f64; 3]) -> f64 {
    (s[0] * s[2].cos() + s[1] * s[2].sin()) / s[0].hypot(s[1])
}

/// Integrates from `start` until `g` drops to zero once `armed` accepts the
/// number of `|X|` extrema passed so far.
fn shoot_arc(
    start: [f64; 3],
    max_len: f64,
    armed: impl Fn(usize) -> bool,
    g: impl Fn(&[f64; 3]) -> f64,
) -> Result<ArcSamples> {
    let mut s = start;
    let mut out = vec![s];
    let mut extrema = 0;
    let mut last_speed = radial_speed(&s);
    let mut len = 0.0;
    while len < max_len {
        let next = arc_rk4(s, ARC_DS);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Instability {
                time: len,
                reason: "non-finite arc state".into(),
            });
        }
        if armed(extrema) && g(&s) > 0.0 && g(&next) <= 0.0 {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(&arc_rk4(s, mid * ARC_DS)) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(arc_rk4(s, hi * ARC_DS));
            return Ok(out);
        }
        let speed = radial_speed(&next);
        if speed != 0.0 && last_speed != 0.0 && speed.signum() != last_speed.signum() {
            extrema += 1;
        }
        if speed != 0.0 {
            last_speed = speed;
        }
        s = next;
        out.push(s);
        len += ARC_DS;
    }
    Err(Error::Insufficient(format!("arc did not reach its end within length {max_len}")))
}

/// Every `SNAPSHOT_STRIDE`-th sample, plus the end point, goes into the snapshot polylines.
pub const SNAPSHOT_STRIDE: usize = 10;

fn points(arc: &[[f64; 3]]) -> Vec<Point> {
    let last = arc.len() - 1;
    arc.iter()
        .enumerate()
        .filter(|(i, _)| i % SNAPSHOT_STRIDE == 0 || *i == last)
        .map(|(_, s)| [s[0], s[1]])
        .collect()
}

fn tangent(s: &[f64; 3]) -> Point {
    [s[2].cos(), s[2].sin()]
}

/// `E^S = |X|² − 2 log⟨X, ν⟩` with `ν = (sin φ, −cos φ)`.
fn support_energy(s: &[f64; 3]) -> f64 {
    let support = s[0] * s[2].sin() - s[1] * s[2].cos();
    s[0] * s[0] + s[1] * s[1] - 2.0 * support.ln()
}

fn energy_drift(arc: &[[f64; 3]], reference: f64) -> f64 {
    arc.iter()
        .map(|s| (support_energy(s) - reference).abs())
        .fold(0.0, f64::max)
}

/// Interior strict local minima and maxima of `|X|` along a polyline.
pub fn count_radial_extrema(pts: &[Point]) -> (usize, usize) {
    let r: Vec<f64> = pts.iter().map(|&p| norm(p)).collect();
    let diffs: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).filter(|d| *d != 0.0).collect();
    let mut mins = 0;
    let mut maxs = 0;
    for w in diffs.windows(2) {
        if w[0] < 0.0 && w[1] > 0.0 {
            mins += 1;
        } else if w[0] > 0.0 && w[1] < 0.0 {
            maxs += 1;
        }
    }
    (mins, maxs)
}

fn mirror_y(p: Point) -> Point {
    [p[0], -p[1]]
}

/// Integrates the arc-length system for a lens or a fish and assembles the network.
pub fn construct_self_similar_network(kind: NetworkKind) -> Result<ConstructedNetwork> {
    match kind {
        NetworkKind::Lens { height } => construct_lens(height),
        NetworkKind::Fish { r_min } => construct_fish(r_min),
    }
}

fn construct_lens(height: f64) -> Result<ConstructedNetwork> {
    if !(height > 0.0 && height < 1.0) {
        return Err(domain("height", height, "(0, 1)"));
    }
    let start = [0.0, height, 0.0];
    let half = shoot_arc(start, 4.0, |_| true, |s| s[1])?;
    let end = *half.last().unwrap();
    let contact = [end[0], 0.0];
    let turning = 2.0 * (end[2] - start[2]).abs();
    let drift = energy_drift(&half, support_energy(&start));

    // upper arc from (−b, 0) to (b, 0)
    let right = points(&half);
    let mut upper: Vec<Point> = right.iter().rev().map(|p| [-p[0], p[1]]).collect();
    upper.pop();
    upper.extend(right);
    let last = upper.len() - 1;
    upper[0][1] = 0.0;
    upper[last][1] = 0.0;
    let lower: Vec<Point> = upper.iter().map(|&p| mirror_y(p)).collect();

    let t_end = tangent(&end);
    let away_right = [-t_end[0], -t_end[1]];
    let away_left = [t_end[0], -t_end[1]];
    let snapshot = NetworkSnapshot {
        upper_arc: upper,
        lower_arc: lower,
        left_ray: Ray {
            origin: [-contact[0], 0.0],
            direction: [-1.0, 0.0],
        },
        right_ray: Ray {
            origin: contact,
            direction: [1.0, 0.0],
        },
        junctions: [
            Junction {
                point: [-contact[0], 0.0],
                tangents: [away_left, mirror_y(away_left), [-1.0, 0.0]],
            },
            Junction {
                point: contact,
                tangents: [away_right, mirror_y(away_right), [1.0, 0.0]],
            },
        ],
        symmetric: true,
    };
    let residual = snapshot.max_junction_residual();
    if residual > CONSTRUCTION_TOL {
        return Err(Error::Closure {
            residual,
            tol: CONSTRUCTION_TOL,
        });
    }
    let extrema = count_radial_extrema(&snapshot.upper_arc);
    Ok(ConstructedNetwork {
        closure_residual: residual,
        total_turning: turning,
        max_energy_drift: drift,
        upper_extrema: extrema,
        lower_extrema: extrema,
        arcs: [half.clone(), half],
        snapshot,
    })
}

fn construct_fish(r_min: f64) -> Result<ConstructedNetwork> {
    if !(r_min > 0.0 && r_min < r_min_threshold()) {
        return Err(no_triple_point(r_min));
    }
    let start = [r_min, 0.0, FRAC_PI_2];
    let reference = support_energy(&start);
    // short arc: from the minimum on the positive x¹-axis to the first
    // point where the tangent leans 60° away from the radial direction
    let short_half = shoot_arc(start, 10.0, |_| true, |s| 0.5 - radial_speed(s))?;
    let j1_state = *short_half.last().unwrap();
    let j1 = [j1_state[0], j1_state[1]];
    let radial1 = normalize(j1);
    let t1 = tangent(&j1_state);

    // long arc leaves j1 along the third 120° direction and ends at the
    // same kind of point after passing a minimum, a maximum and a minimum
    let long_dir = sub(t1, radial1);
    let long_start = [j1[0], j1[1], long_dir[1].atan2(long_dir[0])];
    let long = shoot_arc(long_start, 60.0, |n| n >= 3, |s| 0.5 - radial_speed(s))?;
    let j2_state = *long.last().unwrap();
    let j2 = [j2_state[0], j2_state[1]];
    let closure = geometry::dist(j2, mirror_y(j1));

    // short arc through the minimum, from mirror(j1) up to j1
    let short_pts = points(&short_half);
    let mut short: Vec<Point> = short_pts.iter().rev().map(|&p| mirror_y(p)).collect();
    short.pop();
    short.extend(short_pts);
    let long_pts = points(&long);

    let t2 = tangent(&j2_state);
    let junctions = [
        Junction {
            point: j1,
            tangents: [[-t1[0], -t1[1]], normalize(long_dir), radial1],
        },
        Junction {
            point: j2,
            tangents: [[-t1[0], t1[1]], [-t2[0], -t2[1]], normalize(j2)],
        },
    ];
    let raw = NetworkSnapshot {
        upper_arc: short,
        lower_arc: long_pts,
        left_ray: Ray {
            origin: j2,
            direction: normalize(j2),
        },
        right_ray: Ray {
            origin: j1,
            direction: radial1,
        },
        junctions,
        symmetric: true,
    };
    // recover the symmetry axis from the two junctions and rotate it onto x¹
    let axis = geometry::add(j1, j2);
    let snapshot = raw.transformed([0.0, 0.0], 1.0, -axis[1].atan2(axis[0]));

    let turning = (j1_state[2] - start[2]).abs() * 2.0 + (j2_state[2] - long_start[2]).abs();
    let drift = energy_drift(&short_half, reference).max(energy_drift(&long, reference));
    let residual = closure.max(snapshot.max_junction_residual());
    if residual > CONSTRUCTION_TOL {
        return Err(Error::Closure {
            residual,
            tol: CONSTRUCTION_TOL,
        });
    }
    Ok(ConstructedNetwork {
        closure_residual: residual,
        total_turning: turning,
        max_energy_drift: drift,
        upper_extrema: count_radial_extrema(&snapshot.upper_arc),
        lower_extrema: count_radial_extrema(&snapshot.lower_arc),
        arcs: [short_half, long],
        snapshot,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FishSolution {
    pub r_min: f64,
    pub energy_level: EnergyLevel,
    #[serde(rename = "K")]
    pub k: f64,
    pub geometry: NetworkSnapshot,
    /// Angle between the two half-lines.
    pub ray_angle: f64,
    pub closure_residual: f64,
    pub junction_angle_error: f64,
    /// Loop turning measured from the reconstructed tangent angles.
    pub measured_turning: f64,
    pub max_energy_drift: f64,
    /// `(minima, maxima)` of `|X|` on the short and on the long arc.
    pub short_arc_extrema: (usize, usize),
    pub long_arc_extrema: (usize, usize),
}

/// Solves `K(r_min) = 4π/3` on the `η̄` branch and builds the network.
pub fn find_fish(tol: f64) -> Result<FishSolution> {
    if !(tol >= 1e-10) {
        return Err(domain("tol", tol, "[1e-10, ∞)"));
    }
    let target = 4.0 * PI / 3.0;
    let f = |r: f64| fish_total_curvature(r).map(|k| k - target).unwrap_or(f64::NAN);
    let hi = 0.95 * r_min_threshold();
    let (lo, hi) = bisect_bracket(f, 0.05, hi, 1e-15, "K(r_min) - 4pi/3")?;
    let r_min = 0.5 * (lo + hi);
    let k = fish_total_curvature(r_min)?;
    if (k - target).abs() >= tol {
        return Err(Error::Insufficient(format!("|K - 4pi/3| = {:e}", (k - target).abs())));
    }
    let net = construct_fish(r_min)?;
    let rays = [net.snapshot.left_ray.direction, net.snapshot.right_ray.direction];
    let ray_angle = dot(rays[0], rays[1]).clamp(-1.0, 1.0).acos();
    Ok(FishSolution {
        r_min,
        energy_level: EnergyLevel::from_s_minus(r_min)?,
        k,
        ray_angle,
        closure_residual: net.closure_residual,
        junction_angle_error: net.snapshot.max_junction_angle_error(),
        measured_turning: net.total_turning,
        max_energy_drift: net.max_energy_drift,
        short_arc_extrema: net.upper_extrema,
        long_arc_extrema: net.lower_extrema,
        geometry: net.snapshot,
    })
}

/// `K` sampled along the `η̄` branch, for monotonicity and crossing checks.
pub fn scan_fish_curvature(points: usize) -> Result<Vec<(f64, f64)>> {
    let top = r_min_threshold();
    (1..=points)
        .into_par_iter()
        .map(|i| {
            let r = top * i as f64 / (points + 1) as f64;
            fish_total_curvature(r).map(|k| (r, k))
        })
        .collect()
}

/// Number of times the sampled `K` crosses `4π/3`.
pub fn fish_crossings(scan: &[(f64, f64)]) -> usize {
    let vals: Vec<f64> = scan.iter().map(|&(_, k)| k - 4.0 * PI / 3.0).collect();
    sign_changes(&vals)
}
