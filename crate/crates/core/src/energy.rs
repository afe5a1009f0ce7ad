//! Energy levels of the support-function equation `S_θθ + S = 1/S` and the
//! turning integrals built on them.
//!
//! Along a shrinker the support function `S = ⟨X, ν⟩` keeps
//! `E^S = S_θ² + S² − 2 log S` constant. Scaling `S = S₋ x` by the minimum
//! `S₋` of a level turns the turning angle from the minimum to the point
//! where the curve crosses a 60° line into
//! `Ψ(η) = ∫₁^η dx / √(1 − x² + C(η) log x)`.

use std::f64::consts::{FRAC_PI_3, PI};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::SQRT3;
use crate::quadrature::integrate;
use crate::roots::{bisect, bisect_bracket, sign_changes};

pub const DEFAULT_TOL: f64 = 1e-12;
/// Upper end of the η range in the uniqueness analysis.
pub const ETA_MAX: f64 = 1.9;

fn check_eta(eta: f64) -> Result<()> {
    if eta > 1.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(domain("eta", eta, "(1, ∞)"))
    }
}

/// `ln(1 + y)/y`, continuous at `y = 0`.
#[inline]
fn log1p_ratio(y: f64) -> f64 {
    if y.abs() < 1e-300 {
        1.0
    } else {
        y.ln_1p() / y
    }
}

/// `C(η) = (4η² − 3)/(3 log η)`.
pub fn coefficient_c(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(c_eps(eta - 1.0))
}

/// `C` as a function of `ε = η − 1`, accurate for tiny `ε`.
fn c_eps(eps: f64) -> f64 {
    (1.0 + 8.0 * eps + 4.0 * eps * eps) / (3.0 * eps.ln_1p())
}

/// `A(η) = (8η² log η − 4η² + 3)/(6η log² η)`; `C' = 2A`.
pub fn a_of_eta(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let l = eta.ln();
    let e2 = eta * eta;
    Ok((8.0 * e2 * l - 4.0 * e2 + 3.0) / (6.0 * eta * l * l))
}

/// `B(η) = 6η² log³η · A'(η)`, which tends to 2 as `η → 1`.
pub fn b_of_eta(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let l = eta.ln();
    let e2 = eta * eta;
    Ok(8.0 * e2 * l * l - 12.0 * e2 * l - 3.0 * l + 8.0 * e2 - 6.0)
}

/// Bracket `(lo, hi)` around the unique zero `η₀` of `A`, of width at most `tol`.
pub fn eta0(tol: f64) -> Result<(f64, f64)> {
    if !(tol >= 1e-14) {
        return Err(domain("tol", tol, "[1e-14, ∞)"));
    }
    bisect_bracket(|e| a_of_eta(e).unwrap_or(f64::NAN), 1.1, 2.0, tol, "A(eta)")
}

/// `η₀` to full precision, computed once.
pub fn eta0_value() -> f64 {
    static ETA0: OnceLock<f64> = OnceLock::new();
    *ETA0.get_or_init(|| {
        let (lo, hi) = eta0(1e-14).expect("A changes sign on [1.1, 2]");
        0.5 * (lo + hi)
    })
}

/// `1 − x² + C log x` at `x = 1 + s²`, divided by `s²`.
#[inline]
fn reduced_denominator(s: f64, c: f64) -> f64 {
    let y = s * s;
    -2.0 - y + c * log1p_ratio(y)
}

/// `Ψ(η)`, with `x = 1 + s²` removing the inverse square root at `x = 1`.
pub fn psi(eta: f64, tol: f64) -> Result<f64> {
    check_eta(eta)?;
    psi_eps(eta - 1.0, tol)
}

fn psi_eps(eps: f64, tol: f64) -> Result<f64> {
    let c = c_eps(eps);
    psi_with_c(eps, c, tol)
}

/// `∫₁^{1+ε} dx/√(1 − x² + c log x)` for an arbitrary coefficient `c`.
fn psi_with_c(eps: f64, c: f64, tol: f64) -> Result<f64> {
    if eps <= 0.0 {
        return Ok(0.0);
    }
    let q = integrate(
        |s| 2.0 / reduced_denominator(s, c).sqrt(),
        0.0,
        eps.sqrt(),
        tol,
        0.0,
    )?;
    if !q.value.is_finite() {
        return Err(Error::Quadrature {
            tol,
            estimate: f64::INFINITY,
        });
    }
    Ok(q.value)
}

/// `dΨ/dη = √3/η − A(η) ∫₁^η log x / d(x)^{3/2} dx` with `d = 1 − x² + C log x`.
pub fn dpsi(eta: f64, tol: f64) -> Result<f64> {
    check_eta(eta)?;
    let eps = eta - 1.0;
    let c = c_eps(eps);
    let q = integrate(
        |s| {
            let q = reduced_denominator(s, c);
            2.0 * log1p_ratio(s * s) / (q * q.sqrt())
        },
        0.0,
        eps.sqrt(),
        tol,
        0.0,
    )?;
    Ok(SQRT3 / eta - a_of_eta(eta)? * q.value)
}

/// Piecewise bound `Ψ(η) ≤ Σᵢ √((xᵢ₊₁ − 1)/d(xᵢ₊₁)) · 2(√((i+1)δ) − √(iδ))`
/// with `δ = (η − 1)/pieces`, valid because `(x − 1)/d(x)` increases in `x`.
pub fn psi_upper_bound_riemann(eta: f64, pieces: usize) -> Result<f64> {
    check_eta(eta)?;
    if pieces == 0 {
        return Err(Error::InvalidInput("pieces must be at least 1".into()));
    }
    let eps = eta - 1.0;
    let c = c_eps(eps);
    let delta = eps / pieces as f64;
    Ok((0..pieces)
        .map(|i| {
            let right = (i + 1) as f64 * delta;
            let sup = (1.0 / reduced_denominator(right.sqrt(), c)).sqrt();
            sup * 2.0 * (right.sqrt() - (i as f64 * delta).sqrt())
        })
        .sum())
}

/// The partner `η̄ ∈ (1, η₀]` with `C(η̄) = C(η̃)`.
pub fn eta_bar(eta_tilde: f64) -> Result<f64> {
    let e0 = eta0_value();
    if !(eta_tilde >= e0) || !eta_tilde.is_finite() {
        return Err(domain("eta_tilde", eta_tilde, "[eta0, ∞)"));
    }
    if eta_tilde == e0 {
        return Ok(e0);
    }
    Ok(1.0 + eps_below_eta0(c_eps(eta_tilde - 1.0).ln())?)
}

/// Solves `log C(1 + ε) = log_c` for `ε ∈ (0, η₀ − 1]`, bisecting in `log ε`.
fn eps_below_eta0(log_c: f64) -> Result<f64> {
    let e0 = eta0_value() - 1.0;
    let f = |v: f64| c_eps(v.exp()).ln() - log_c;
    if f(e0.ln()) > 0.0 {
        // the level sits below the minimum of C; η̄ = η₀ up to rounding
        return Ok(e0);
    }
    // C(1 + ε) ≈ 1/(3ε) for small ε
    let mut lo = (-log_c - 3f64.ln() - 2.0).min(e0.ln() - 1.0);
    while f(lo) <= 0.0 {
        lo -= 10.0;
        if lo < -745.0 {
            return Err(Error::NoBracket {
                what: "eta_bar".into(),
                lo: 0.0,
                hi: e0,
            });
        }
    }
    let v = bisect(f, lo, e0.ln(), 1e-15, "eta_bar")?;
    Ok(v.exp())
}

/// Solves `C(η) = c` on `[η₀, ∞)`.
fn eta_above_eta0(c: f64) -> Result<f64> {
    let e0 = eta0_value();
    let mut hi = 2.0 * e0;
    while c_eps(hi - 1.0) < c {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoBracket {
                what: "eta above eta0".into(),
                lo: e0,
                hi,
            });
        }
    }
    bisect(|e| c_eps(e - 1.0) - c, e0, hi, 1e-15 * hi, "eta above eta0")
}

/// `Σ(η̃) = Ψ(η̃) + Ψ(η̄(η̃))`.
pub fn sigma(eta_tilde: f64, tol: f64) -> Result<f64> {
    let bar = eta_bar(eta_tilde)?;
    Ok(psi(eta_tilde, tol)? + psi(bar, tol)?)
}

/// The two solutions of `2 log η = (4η²/3 − 1) h²`, i.e. `C(η) = 2/h²`, on
/// either side of `η₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaRoots {
    pub below_eta0: Option<f64>,
    pub above_eta0: Option<f64>,
}

pub fn eta_from_h(h: f64) -> Result<EtaRoots> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(domain("h", h, "(0, 1]"));
    }
    let target = 2.0 / (h * h);
    let e0 = eta0_value();
    if target < c_eps(e0 - 1.0) {
        return Ok(EtaRoots {
            below_eta0: None,
            above_eta0: None,
        });
    }
    Ok(EtaRoots {
        below_eta0: Some(1.0 + eps_below_eta0(target.ln())?),
        above_eta0: Some(eta_above_eta0(target)?),
    })
}

/// Inputs of `Θ` for a level with minimum `S₋ = e^{−ℓ}`.
#[derive(Debug, Clone, Copy)]
struct ThetaLevel {
    ell: f64,
    s_plus: f64,
}

/// `S₊` for the level through `S₋ = e^{−ℓ}`, from `2w + w² − 2 log(1 + w) = E − 1`.
fn s_plus_from_ell(ell: f64) -> Result<f64> {
    let excess = 2.0 * ell + (-2.0 * ell).exp_m1();
    let phi = |w: f64| 2.0 * w + w * w - 2.0 * w.ln_1p() - excess;
    let hi = 2.0 + (2.0 * excess).sqrt();
    let w = bisect(phi, 0.0, hi, 1e-16 * hi, "S_plus")?;
    Ok(1.0 + w)
}

/// `Θ(ρ) = ∫_{S₋}^{S₊} dS / √(E − S² + 2 log S)` on the level with `S₊ = ρ S₋`.
pub fn theta(rho: f64, tol: f64) -> Result<f64> {
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(domain("rho", rho, "(1, ∞)"));
    }
    let delta = rho - 1.0;
    let ratio = 2.0 * delta.ln_1p() / (delta * (rho + 1.0));
    let ell = -0.5 * ratio.ln();
    theta_level(
        ThetaLevel {
            ell,
            s_plus: rho * (-ell).exp(),
        },
        tol,
    )
}

/// `Θ` on the level whose minimum is `S₋ = e^{−ℓ}`; usable far beyond the
/// range where `S₋` itself is representable.
pub fn theta_from_level(neg_log_s_minus: f64, tol: f64) -> Result<f64> {
    let ell = neg_log_s_minus;
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(domain("-log S_minus", ell, "(0, ∞)"));
    }
    theta_level(
        ThetaLevel {
            ell,
            s_plus: s_plus_from_ell(ell)?,
        },
        tol,
    )
}

fn theta_level(level: ThetaLevel, tol: f64) -> Result<f64> {
    let ThetaLevel { ell, s_plus } = level;
    let e2l = (-2.0 * ell).exp();

    // S = S₋ e^{t²}: the integrand becomes 2S/√g with g smooth and positive
    let lower_sub = |t: f64| {
        let y = t * t;
        let growth = if y < 1e-300 {
            2.0 * e2l
        } else if 2.0 * y < 1.0 {
            e2l * (2.0 * y).exp_m1() / y
        } else {
            ((2.0 * (y - ell)).exp() - e2l) / y
        };
        let g = 2.0 - growth;
        2.0 * (y - ell).exp() / g.sqrt()
    };
    let mut lower = 0.0;
    if ell <= 1.0 {
        lower += integrate(lower_sub, 0.0, ell.sqrt(), tol, 0.0)?.value;
    } else {
        lower += integrate(lower_sub, 0.0, 1.0, tol, 0.0)?.value;
        // away from S₋ the integrand is bounded, so integrate in S directly
        let start = (1.0 - ell).exp();
        let direct = |s: f64| {
            let g = 2.0 * (s.ln() + ell) - (s * s - e2l);
            1.0 / g.sqrt()
        };
        lower += integrate(direct, start, 1.0, tol, 0.0)?.value;
    }

    // S = S₊ − t²
    let upper_sub = |t: f64| {
        let y = t * t;
        let g = 2.0 * s_plus - y - 2.0 * log1p_ratio(-y / s_plus) / s_plus;
        2.0 / g.sqrt()
    };
    let upper = integrate(upper_sub, 0.0, (s_plus - 1.0).max(0.0).sqrt(), tol, 0.0)?.value;
    let total = lower + upper;
    if !total.is_finite() {
        return Err(Error::Quadrature {
            tol,
            estimate: f64::INFINITY,
        });
    }
    Ok(total)
}

/// A level set of `E^S` described by its minimum `S₋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    #[serde(rename = "E")]
    pub energy: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    /// Crossings with the 60° lines `S = ±√3 S_θ`, when the level reaches them.
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub eta: Option<f64>,
    pub eta_bar: Option<f64>,
    pub rho: f64,
}

impl EnergyLevel {
    pub fn from_s_minus(s_minus: f64) -> Result<Self> {
        if !(s_minus > 0.0 && s_minus < 1.0) {
            return Err(domain("S_minus", s_minus, "(0, 1)"));
        }
        let ell = -s_minus.ln();
        let s_plus = s_plus_from_ell(ell)?;
        let roots = eta_roots_for_level(ell)?;
        Ok(EnergyLevel {
            energy: s_minus * s_minus + 2.0 * ell,
            s_minus,
            s_plus,
            s1: roots.below_eta0.map(|e| e * s_minus),
            s2: roots.above_eta0.map(|e| e * s_minus),
            eta: roots.above_eta0,
            eta_bar: roots.below_eta0,
            rho: s_plus / s_minus,
        })
    }

    /// `E^S(S, S_θ)`.
    pub fn energy_at(s: f64, s_theta: f64) -> f64 {
        s_theta * s_theta + s * s - 2.0 * s.ln()
    }
}

/// `η` roots of `C(η) = 2/S₋²` for `S₋ = e^{−ℓ}`.
fn eta_roots_for_level(ell: f64) -> Result<EtaRoots> {
    let log_target = 2f64.ln() + 2.0 * ell;
    let e0 = eta0_value();
    if log_target < c_eps(e0 - 1.0).ln() {
        return Ok(EtaRoots {
            below_eta0: None,
            above_eta0: None,
        });
    }
    Ok(EtaRoots {
        below_eta0: Some(1.0 + eps_below_eta0(log_target)?),
        above_eta0: if log_target < 700.0 {
            Some(eta_above_eta0(log_target.exp())?)
        } else {
            None
        },
    })
}

/// `Ψ(η̄)` on the level with `S₋ = e^{−ℓ}`, written in `ε̄ = η̄ − 1` so that
/// levels with `η̄` indistinguishable from 1 in double precision still work.
/// Returns zero once `ε̄` underflows.
pub(crate) fn psi_eta_bar_for_level(ell: f64, tol: f64) -> Result<f64> {
    let log_target = 2f64.ln() + 2.0 * ell;
    if log_target > 1400.0 {
        // Ψ(1 + ε) ≤ 2√3 ε and ε ≈ e^{−2ℓ}/6 is below the smallest double
        return Ok(0.0);
    }
    let eps = eps_below_eta0(log_target)?;
    psi_with_c(eps, log_target.exp(), tol)
}

/// One numeric grid check: the claim, the tested range and the worst margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub name: String,
    pub claim: String,
    pub range: (f64, f64),
    pub points: usize,
    pub margin: f64,
    pub passed: bool,
}

impl GridCheck {
    fn new(name: &str, claim: &str, range: (f64, f64), points: usize, margin: f64) -> Self {
        GridCheck {
            name: name.into(),
            claim: claim.into(),
            range,
            points,
            margin,
            passed: margin > 0.0 && margin.is_finite(),
        }
    }
}

/// `points` equispaced values on `(lo, hi]`.
pub fn open_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|i| lo + (hi - lo) * i as f64 / points as f64)
        .collect()
}

/// Smallest consecutive increase (negative if the sequence ever decreases).
fn min_increase(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Result of scanning `Ψ − π/3` for sign changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiRootScan {
    pub points: usize,
    pub sign_changes: usize,
    /// Refined root when exactly one sign change was seen.
    pub eta_star: Option<f64>,
}

/// Samples `Ψ(η) − π/3` on `points` equispaced values of `(1, eta_max]`.
pub fn scan_psi_root(points: usize, eta_max: f64, tol: f64) -> Result<PsiRootScan> {
    let grid = open_grid(1.0, eta_max, points);
    let values = grid
        .par_iter()
        .map(|&e| psi(e, tol).map(|p| p - FRAC_PI_3))
        .collect::<Result<Vec<_>>>()?;
    let changes = sign_changes(&values);
    let eta_star = if changes == 1 {
        let k = values.iter().position(|&v| v > 0.0).unwrap();
        let lo = if k == 0 { 1.0 + 1e-12 } else { grid[k - 1] };
        Some(bisect(
            |e| psi(e, tol).map(|p| p - FRAC_PI_3).unwrap_or(f64::NAN),
            lo,
            grid[k],
            1e-14,
            "psi - pi/3",
        )?)
    } else {
        None
    };
    Ok(PsiRootScan {
        points,
        sign_changes: changes,
        eta_star,
    })
}

/// `η*` with `Ψ(η*) = π/3`, bracketed on `(η₀, 1.9)`.
pub fn eta_star(tol: f64) -> Result<f64> {
    bisect(
        |e| psi(e, tol).map(|p| p - FRAC_PI_3).unwrap_or(f64::NAN),
        eta0_value(),
        ETA_MAX,
        1e-14,
        "psi - pi/3",
    )
}

/// Maximum of `Σ` over `points` equispaced values of `[η₀, eta_max]`.
pub fn sigma_max(points: usize, eta_max: f64, tol: f64) -> Result<(f64, f64)> {
    let e0 = eta0_value();
    let grid: Vec<f64> = (0..points)
        .map(|i| e0 + (eta_max - e0) * i as f64 / (points - 1).max(1) as f64)
        .collect();
    let values = grid
        .par_iter()
        .map(|&e| sigma(e, tol).map(|s| (e, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(values
        .into_iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, v| if v.1 > best.1 { v } else { best }))
}

/// The auxiliary inequalities behind the uniqueness of the lens, each
/// checked on a grid.
pub fn certify_energy_inequalities(tol: f64) -> Result<Vec<GridCheck>> {
    let e0 = eta0_value();
    let mut checks = Vec::new();

    let grid = open_grid(1.0, 5.0, 1000);
    let b_min = grid
        .iter()
        .map(|&e| b_of_eta(e))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    checks.push(GridCheck::new("B_positive", "B(eta) > 0", (1.0, 5.0), 1000, b_min));

    // log x / d(x) is largest at x = η, where it equals 3 log η / η²
    let grid = open_grid(1.0, ETA_MAX, 400);
    let margin = grid
        .par_iter()
        .map(|&eta| {
            let c = c_eps(eta - 1.0);
            let at_end = 3.0 * eta.ln() / (eta * eta);
            let inner = (1..200)
                .map(|k| {
                    let x = 1.0 + (eta - 1.0) * k as f64 / 200.0;
                    x.ln() / (1.0 - x * x + c * x.ln())
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (at_end - inner) / at_end
        })
        .reduce(|| f64::INFINITY, f64::min);
    checks.push(GridCheck::new(
        "log_over_d_max_at_eta",
        "max of log x/d(x) on [1, eta] is 3 log eta/eta^2 at x = eta",
        (1.0, ETA_MAX),
        400,
        margin,
    ));

    let grid = open_grid(e0, ETA_MAX, 1000);
    let vals = grid
        .iter()
        .map(|&e| Ok(SQRT3 * e / (3.0 * a_of_eta(e)? * e.ln())))
        .collect::<Result<Vec<_>>>()?;
    let rev: Vec<f64> = vals.iter().rev().copied().collect();
    checks.push(GridCheck::new(
        "sqrt3_eta_over_3A_log_decreasing",
        "sqrt(3) eta/(3 A(eta) log eta) decreasing",
        (e0, ETA_MAX),
        1000,
        min_increase(&rev),
    ));

    let grid = open_grid(1.0, 2.5, 1000);
    let vals: Vec<f64> = grid
        .iter()
        .map(|&e| (1.0 + (4.0 * e0 * e0 - 3.0) / (4.0 * e * e - 3.0)) * e.ln())
        .collect();
    checks.push(GridCheck::new(
        "weighted_log_increasing",
        "[1 + (4 eta0^2 - 3)/(4 eta^2 - 3)] log eta increasing",
        (1.0, 2.5),
        1000,
        min_increase(&vals),
    ));

    let grid = open_grid(1.0, e0, 400);
    let vals = grid
        .par_iter()
        .map(|&e| psi(e, tol))
        .collect::<Result<Vec<_>>>()?;
    checks.push(GridCheck::new(
        "psi_increasing_below_eta0",
        "Psi increasing on (1, eta0]",
        (1.0, e0),
        400,
        min_increase(&vals),
    ));

    let mut worst = f64::INFINITY;
    for eta in [1.5, 1.7] {
        let h = 1e-5;
        let fd = (psi(eta + h, tol)? - psi(eta - h, tol)?) / (2.0 * h);
        worst = worst.min(1e-5 - (fd - dpsi(eta, tol)?).abs());
    }
    checks.push(GridCheck::new(
        "dpsi_formula",
        "finite-difference dPsi/deta matches the closed form within 1e-5",
        (1.5, 1.7),
        2,
        worst,
    ));

    Ok(checks)
}

/// Summary values reported by the command line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub eta0_bracket: (f64, f64),
    pub psi_eta0: f64,
    pub eta_star: f64,
    pub sigma_max: f64,
    /// `Θ` just above 1 and at 10³, next to the limits `π/√2` and `π/2`.
    pub theta_limits: ThetaLimits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaLimits {
    pub theta_near_one: f64,
    pub pi_over_sqrt2: f64,
    pub theta_1e3: f64,
    pub pi_over_2: f64,
}

pub fn energy_report(tol: f64) -> Result<EnergyReport> {
    let bracket = eta0(1e-12)?;
    Ok(EnergyReport {
        eta0_bracket: bracket,
        psi_eta0: psi(eta0_value(), tol)?,
        eta_star: eta_star(tol)?,
        sigma_max: sigma_max(1000, ETA_MAX, tol)?.1,
        theta_limits: ThetaLimits {
            theta_near_one: theta(1.0 + 1e-4, tol)?,
            pi_over_sqrt2: PI / 2f64.sqrt(),
            theta_1e3: theta(1e3, tol)?,
            pi_over_2: PI / 2.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Midpoint rule in the variable `x = 1 + s²`, independent of the adaptive code.
    fn psi_midpoint(eta: f64, m: usize) -> f64 {
        let c = coefficient_c(eta).unwrap();
        let top = (eta - 1.0).sqrt();
        let h = top / m as f64;
        (0..m)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                let x = 1.0 + s * s;
                let d = 1.0 - x * x + c * x.ln();
                2.0 * s / d.sqrt() * h
            })
            .sum()
    }

    #[test]
    fn c_blows_up_at_one_and_is_minimal_at_eta0() {
        assert!(coefficient_c(1.0001).unwrap() > 1e3);
        assert!(coefficient_c(1.0).is_err());
        let e0 = eta0_value();
        let grid_min = (1..=20000)
            .map(|i| 1.2 + 0.3 * i as f64 / 20000.0)
            .map(|e| coefficient_c(e).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((coefficient_c(e0).unwrap() - grid_min).abs() < 1e-8);
    }

    #[test]
    fn eta0_bracket_and_signs() {
        let (lo, hi) = eta0(1e-12).unwrap();
        assert!(lo > 1.3365 && hi < 1.33652);
        assert!(a_of_eta(1.3365).unwrap() < 0.0);
        assert!(a_of_eta(1.33652).unwrap() > 0.0);
        assert!(a_of_eta(lo - 1e-12).unwrap() < 0.0);
        assert!(a_of_eta(hi + 1e-12).unwrap() > 0.0);
    }

    #[test]
    fn b_limit_and_positivity() {
        assert!((b_of_eta(1.0 + 1e-8).unwrap() - 2.0).abs() < 1e-6);
        assert!(open_grid(1.0, 5.0, 1000).iter().all(|&e| b_of_eta(e).unwrap() > 0.0));
    }

    #[test]
    fn c_prime_is_twice_a() {
        for eta in [1.1, 1.4, 2.3] {
            let h = 1e-6;
            let fd = (coefficient_c(eta + h).unwrap() - coefficient_c(eta - h).unwrap()) / (2.0 * h);
            assert!((fd - 2.0 * a_of_eta(eta).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn psi_agrees_with_midpoint_oracle() {
        for eta in [1.05, 1.3, 1.6878, 1.9] {
            let q = psi(eta, 1e-13).unwrap();
            let m = psi_midpoint(eta, 20000);
            assert!((q - m).abs() < 1e-8, "{eta}: {q} vs {m}");
        }
    }

    #[test]
    fn psi_at_eta0_is_in_the_stated_window() {
        let p = psi(eta0_value(), DEFAULT_TOL).unwrap();
        assert!(p > 0.72 && p <= 0.785);
        assert!(psi(1.33652, DEFAULT_TOL).unwrap() <= 0.785);
    }

    #[test]
    fn riemann_bound_is_an_upper_bound_and_tightens() {
        assert!(psi_upper_bound_riemann(1.33652, 3).unwrap() <= 0.785);
        for eta in [1.2, 1.33652, 1.6] {
            let exact = psi(eta, DEFAULT_TOL).unwrap();
            let mut last = f64::INFINITY;
            for pieces in [1, 3, 10, 30] {
                let b = psi_upper_bound_riemann(eta, pieces).unwrap();
                assert!(b >= exact - 1e-12);
                assert!(b <= last);
                last = b;
            }
        }
    }

    #[test]
    fn dpsi_matches_finite_differences() {
        for eta in [1.5, 1.7] {
            let h = 1e-5;
            let fd = (psi(eta + h, 1e-13).unwrap() - psi(eta - h, 1e-13).unwrap()) / (2.0 * h);
            assert!((fd - dpsi(eta, 1e-13).unwrap()).abs() < 1e-5);
        }
    }

    #[test]
    fn eta_bar_properties() {
        let e0 = eta0_value();
        assert!((eta_bar(e0).unwrap() - e0).abs() < 1e-12);
        assert!(eta_bar(1.9).unwrap() < eta_bar(1.5).unwrap());
        for eta in [1.5, 1.7, 1.9] {
            let bar = eta_bar(eta).unwrap();
            let (c1, c2) = (coefficient_c(bar).unwrap(), coefficient_c(eta).unwrap());
            assert!((c1 - c2).abs() < 1e-10 * c2, "{c1} {c2}");
        }
        assert!(eta_bar(1.2).is_err());
    }

    #[test]
    fn sigma_bounds() {
        let e0 = eta0_value();
        let s0 = sigma(e0, DEFAULT_TOL).unwrap();
        assert!(s0 > 1.44 && s0 <= 1.57);
        for eta in open_grid(e0, ETA_MAX, 40) {
            let bar = eta_bar(eta).unwrap();
            let s = sigma(eta, DEFAULT_TOL).unwrap();
            assert!(s < 2.0 * PI / 3.0);
            let bound = 2.0 * 0.785 - SQRT3 * (1.3365f64 * 1.3365).ln() + SQRT3 * (eta * bar).ln();
            assert!(s <= bound + 1e-12, "{eta}: {s} > {bound}");
        }
    }

    #[test]
    fn theta_limits_and_monotonicity() {
        let near_one = theta(1.0 + 1e-4, DEFAULT_TOL).unwrap();
        assert!((near_one - PI / 2f64.sqrt()).abs() < 1e-3);
        let vals: Vec<f64> = [1.1, 2.0, 5.0, 20.0]
            .iter()
            .map(|&r| theta(r, DEFAULT_TOL).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        // approaches π/2 from above, slowly
        let far = theta(1e12, DEFAULT_TOL).unwrap();
        assert!(far > PI / 2.0 && far < theta(1e3, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn theta_routes_agree() {
        for rho in [1.5, 3.0, 1e3] {
            let delta: f64 = rho - 1.0;
            let ell = -0.5 * (2.0 * delta.ln_1p() / (delta * (rho + 1.0))).ln();
            let a = theta(rho, DEFAULT_TOL).unwrap();
            let b = theta_from_level(ell, DEFAULT_TOL).unwrap();
            assert!((a - b).abs() < 1e-9, "{rho}: {a} {b}");
        }
    }

    #[test]
    fn theta_matches_direct_quadrature() {
        // brute midpoint rule in S with a fine graded grid near both ends
        let rho: f64 = 2.0;
        let sm = (2.0 * rho.ln() / (rho * rho - 1.0)).sqrt();
        let sp = rho * sm;
        let e = sm * sm - 2.0 * sm.ln();
        let m = 200000;
        // S = S₋ + (S₊ − S₋)(1 − cos πu)/2 clusters nodes at both ends
        let total: f64 = (0..m)
            .map(|i| {
                let u = (i as f64 + 0.5) / m as f64;
                let s = sm + (sp - sm) * (1.0 - (PI * u).cos()) / 2.0;
                let ds = (sp - sm) * PI * (PI * u).sin() / 2.0 / m as f64;
                ds / (e - s * s + 2.0 * s.ln()).sqrt()
            })
            .sum();
        assert!((total - theta(rho, DEFAULT_TOL).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn eta_from_h_branches() {
        let roots = eta_from_h(0.6116376895827598).unwrap();
        let e0 = eta0_value();
        assert!(roots.below_eta0.unwrap() < e0 && roots.above_eta0.unwrap() > e0);
        assert_eq!(
            eta_from_h(1.0).unwrap(),
            EtaRoots {
                below_eta0: None,
                above_eta0: None
            }
        );
        let h = 0.5869f64;
        let eta = 1.9f64;
        assert!(2.0 * eta.ln() < (4.0 * eta * eta / 3.0 - 1.0) * h * h);
    }

    #[test]
    fn energy_level_identities() {
        let lvl = EnergyLevel::from_s_minus(0.3).unwrap();
        assert!(lvl.s_minus < 1.0 && lvl.s_plus > 1.0);
        assert!(lvl.energy >= 1.0);
        let f = |s: f64| 4.0 * s * s / 3.0 - 2.0 * s.ln();
        assert!((f(lvl.s1.unwrap()) - lvl.energy).abs() < 1e-12);
        assert!((f(lvl.s2.unwrap()) - lvl.energy).abs() < 1e-12);
        let (eb, et) = (lvl.eta_bar.unwrap(), lvl.eta.unwrap());
        assert!((coefficient_c(eb).unwrap() - coefficient_c(et).unwrap()).abs() < 1e-10);
        assert!((lvl.s_plus * lvl.s_plus - 2.0 * lvl.s_plus.ln() - lvl.energy).abs() < 1e-12);
        // above the threshold the level misses the 60° lines
        assert!(EnergyLevel::from_s_minus(0.7).unwrap().eta.is_none());
    }

    #[test]
    fn lemma_grid_checks_pass() {
        for c in certify_energy_inequalities(DEFAULT_TOL).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn psi_eta_bar_level_route_matches_direct() {
        for sm in [0.1f64, 0.4, 0.6] {
            let lvl = EnergyLevel::from_s_minus(sm).unwrap();
            let direct = psi(lvl.eta_bar.unwrap(), DEFAULT_TOL).unwrap();
            let via = psi_eta_bar_for_level(-sm.ln(), DEFAULT_TOL).unwrap();
            assert!((direct - via).abs() < 1e-9, "{direct} {via}");
        }
    }
}
