//! Parabolic rescalings `λ(M_{T + τ/λ²} − x₀)` of a flow near extinction,
//! their distance to the shrinking lens, and Gaussian density.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::flow::{self, ExtinctionEstimate, FlowTrajectory};
use crate::geometry::{self, build_initial_lens, dot, norm, sub, GridProfile, InitialLens, NetworkSnapshot, Point};

/// Grid used for the reference shrinker.
pub const REFERENCE_N: usize = 4096;

/// One rescaled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledFrame {
    pub lambda: f64,
    /// Unrescaled time `T̂ + τ/λ²`.
    pub time: f64,
    /// Graph of the upper arc in rescaled coordinates.
    pub profile: GridProfile,
    pub network: NetworkSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledSequence {
    pub tau: f64,
    pub estimate: ExtinctionEstimate,
    pub frames: Vec<RescaledFrame>,
}

pub fn extinction_point_estimate(trajectory: &FlowTrajectory) -> Result<ExtinctionEstimate> {
    flow::estimate_extinction(&trajectory.diagnostics)
}

/// Profile at time `t`, linear in time between the bracketing snapshots.
///
/// Snapshots share the `ξ` grid, so nodes are paired index by index.
pub fn profile_at(trajectory: &FlowTrajectory, t: f64) -> Result<GridProfile> {
    let snaps = &trajectory.snapshots;
    let first = snaps.first().ok_or_else(|| Error::Insufficient("empty trajectory".into()))?;
    let last = snaps.last().unwrap();
    if !(t >= first.time && t <= last.time) {
        return Err(Error::InvalidInput(format!(
            "t = {t} outside the stored range [{}, {}]",
            first.time, last.time
        )));
    }
    let k = snaps.partition_point(|s| s.time <= t).clamp(1, snaps.len() - 1);
    let (p, q) = (&snaps[k - 1], &snaps[k]);
    if p.n() != q.n() {
        return Err(Error::InvalidGrid("snapshots on different grids".into()));
    }
    let theta = if q.time > p.time { (t - p.time) / (q.time - p.time) } else { 0.0 };
    let nodes = p
        .nodes
        .iter()
        .zip(&q.nodes)
        .map(|(u, v)| [u[0] + theta * (v[0] - u[0]), u[1] + theta * (v[1] - u[1])])
        .collect();
    GridProfile::new(t, nodes)
}

/// Graph profile mapped by `x ↦ λ(x − x₀)`, with time `τ`.
pub fn rescale_profile(p: &GridProfile, x0: Point, lambda: f64, tau: f64) -> Result<GridProfile> {
    let nodes = p
        .nodes
        .iter()
        .map(|&[x, u]| [lambda * (x - x0[0]), lambda * (u - x0[1])])
        .collect();
    GridProfile::new(tau, nodes)
}

/// Rescales the trajectory about the estimated extinction point at each `λ`.
pub fn rescale(
    trajectory: &FlowTrajectory,
    estimate: &ExtinctionEstimate,
    lambdas: &[f64],
    tau: f64,
) -> Result<RescaledSequence> {
    if !(tau < 0.0) {
        return Err(domain("tau", tau, "(−∞, 0)"));
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("no λ values".into()));
    }
    if let Some(&l) = lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(domain("lambda", l, "(0, ∞)"));
    }
    let frames = lambdas
        .iter()
        .map(|&lambda| {
            let time = estimate.t_hat + tau / (lambda * lambda);
            let raw = profile_at(trajectory, time)?;
            let profile = rescale_profile(&raw, estimate.x0_hat, lambda, tau)?;
            let network = profile.to_network();
            Ok(RescaledFrame {
                lambda,
                time,
                profile,
                network,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RescaledSequence {
        tau,
        estimate: *estimate,
        frames,
    })
}

/// The self-similar lens at time `τ`, centred at the origin.
pub fn reference_lens(tau: f64) -> Result<GridProfile> {
    if !(tau < 0.0) {
        return Err(domain("tau", tau, "(−∞, 0)"));
    }
    build_initial_lens(
        &InitialLens::ScaledSelfSimilar {
            scale: (-2.0 * tau).sqrt(),
            center: 0.0,
        },
        REFERENCE_N,
    )
}

/// Hausdorff distance between the bounded arcs of two networks.
pub fn arc_hausdorff(a: &NetworkSnapshot, b: &NetworkSnapshot) -> Result<f64> {
    geometry::hausdorff_distance_multi(&[&a.upper_arc, &a.lower_arc], &[&b.upper_arc, &b.lower_arc])
}

/// Root-mean-square of `κ + ⟨x, ν⟩/(2τ)` over the upper arc, with `ν` the
/// outward normal. It vanishes on a shrinker at time `τ`.
pub fn shrinker_residual_rms(profile: &GridProfile, tau: f64) -> Result<f64> {
    let pts = &profile.nodes;
    let kappa = geometry::curvature(profile)?;
    let n = pts.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let d = sub(pts[hi], pts[lo]);
        let t = geometry::scale(d, 1.0 / norm(d));
        let nu = [-t[1], t[0]];
        let r = kappa[i] + dot(pts[i], nu) / (2.0 * tau);
        sum += r * r;
    }
    Ok((sum / n as f64).sqrt())
}

/// Gaussian density `∫ (4πs)^{−1/2} exp(−|x − x₀|²/4s)` of a network.
///
/// Arcs use the trapezoid rule, rays the closed form
/// `½ exp(−d²/4s) erfc(c/2√s)` with `d` the distance from `x₀` to the ray's
/// line and `c` the signed offset of its origin along the direction.
pub fn gaussian_density(network: &NetworkSnapshot, x0: Point, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(domain("s", s, "(0, ∞)"));
    }
    let kernel = |p: Point| {
        let d = sub(p, x0);
        (-dot(d, d) / (4.0 * s)).exp() / (4.0 * PI * s).sqrt()
    };
    let mut total = 0.0;
    for arc in [&network.upper_arc, &network.lower_arc] {
        total += arc
            .windows(2)
            .map(|w| 0.5 * geometry::dist(w[0], w[1]) * (kernel(w[0]) + kernel(w[1])))
            .sum::<f64>();
    }
    for ray in [&network.left_ray, &network.right_ray] {
        let dir = geometry::normalize(ray.direction);
        let q = sub(ray.origin, x0);
        let c = dot(q, dir);
        let perp2 = (dot(q, q) - c * c).max(0.0);
        total += 0.5 * (-perp2 / (4.0 * s)).exp() * libm::erfc(c / (2.0 * s.sqrt()));
    }
    Ok(total)
}

/// Density of every snapshot at the estimated extinction point, `s = T̂ − t`.
pub fn density_history(trajectory: &FlowTrajectory, estimate: &ExtinctionEstimate) -> Result<Vec<(f64, f64)>> {
    trajectory
        .snapshots
        .par_iter()
        .filter(|p| p.time < estimate.t_hat)
        .map(|p| Ok((p.time, gaussian_density(&p.to_network(), estimate.x0_hat, estimate.t_hat - p.time)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub lambda: f64,
    pub hausdorff: f64,
    pub density_gap_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub tau: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Hausdorff distance strictly decreases with `λ`.
    pub hausdorff_decreasing: bool,
    /// Largest increase of the density along the flow.
    pub density_max_increase: f64,
    pub estimate: ExtinctionEstimate,
}

pub fn convergence_report(sequence: &RescaledSequence, trajectory: &FlowTrajectory) -> Result<ConvergenceReport> {
    let reference = reference_lens(sequence.tau)?.to_network();
    let rows = sequence
        .frames
        .par_iter()
        .map(|f| {
            Ok(ConvergenceRow {
                lambda: f.lambda,
                hausdorff: arc_hausdorff(&f.network, &reference)?,
                density_gap_rms: shrinker_residual_rms(&f.profile, sequence.tau)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let hausdorff_decreasing = sorted.windows(2).all(|w| w[1].hausdorff < w[0].hausdorff);
    let history = density_history(trajectory, &sequence.estimate)?;
    let density_max_increase = history
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConvergenceReport {
        tau: sequence.tau,
        rows,
        hausdorff_decreasing,
        density_max_increase,
        estimate: sequence.estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Junction, Ray};

    fn line(origin: Point, direction: Point) -> NetworkSnapshot {
        // two opposite rays from the same point form a straight line
        let j = Junction {
            point: origin,
            tangents: [direction, [-direction[0], -direction[1]], direction],
        };
        NetworkSnapshot {
            upper_arc: vec![origin, origin],
            lower_arc: vec![origin, origin],
            left_ray: Ray {
                origin,
                direction: [-direction[0], -direction[1]],
            },
            right_ray: Ray { origin, direction },
            junctions: [j, j],
            symmetric: true,
        }
    }

    #[test]
    fn line_has_unit_density() {
        for (o, s) in [([0.0, 0.0], 1.0), ([3.0, 0.5], 0.1), ([-2.0, -1.0], 7.0)] {
            let d = gaussian_density(&line(o, [1.0, 0.0]), [0.3, 0.0], s).unwrap();
            let perp = o[1] * o[1];
            assert!((d - (-perp / (4.0 * s)).exp()).abs() < 1e-13, "{d}");
        }
    }

    #[test]
    fn ray_density_matches_quadrature() {
        let net = line([0.4, 0.2], [0.6, 0.8]);
        let s = 0.3;
        let k = |r: f64| {
            let p = [0.4 + 0.6 * r, 0.2 + 0.8 * r];
            (-(p[0] * p[0] + p[1] * p[1]) / (4.0 * s)).exp() / (4.0 * PI * s).sqrt()
        };
        let q = crate::quadrature::integrate(k, 0.0, 30.0, 1e-14, 1e-13).unwrap().value;
        let half = 0.5 * gaussian_density(&net, [0.0, 0.0], s).unwrap();
        let q_back = crate::quadrature::integrate(
            |r: f64| k(-r),
            0.0,
            30.0,
            1e-14,
            1e-13,
        )
        .unwrap()
        .value;
        assert!((2.0 * half - (q + q_back)).abs() < 1e-10);
    }

    #[test]
    fn circle_arc_density() {
        // unit circle split into two arcs, rays pushed far away
        let n = 4000;
        let arc = |sign: f64| -> Vec<Point> {
            (0..=n)
                .map(|i| {
                    let th = PI * i as f64 / n as f64;
                    [-th.cos(), sign * th.sin()]
                })
                .collect()
        };
        let mut net = line([1e3, 1e3], [1.0, 0.0]);
        net.upper_arc = arc(1.0);
        net.lower_arc = arc(-1.0);
        let s = 0.5;
        let d = gaussian_density(&net, [0.0, 0.0], s).unwrap();
        let exact = 2.0 * PI * (-1.0 / (4.0 * s)).exp() / (4.0 * PI * s).sqrt();
        assert!((d - exact).abs() < 1e-6, "{d} {exact}");
    }

    #[test]
    fn reference_lens_is_a_shrinker() {
        let p = reference_lens(-0.5).unwrap();
        let r = shrinker_residual_rms(&p, -0.5).unwrap();
        assert!(r < 1e-3, "{r}");
        let q = reference_lens(-2.0).unwrap();
        assert!(shrinker_residual_rms(&q, -2.0).unwrap() < 1e-3);
        assert!(shrinker_residual_rms(&q, -0.5).unwrap() > 0.1);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(reference_lens(0.0).is_err());
        let p = reference_lens(-0.5).unwrap();
        assert!(gaussian_density(&p.to_network(), [0.0, 0.0], 0.0).is_err());
    }
}
