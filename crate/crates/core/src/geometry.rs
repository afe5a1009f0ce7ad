//! Discrete curves and the measurements shared by every other module.
//!
//! A lens is stored as the graph of `u` over `[a, b]` (the upper arc); the
//! lower arc is its mirror image in the x¹-axis and the two half-lines run
//! from `(a, 0)` and `(b, 0)` to infinity along the axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

pub(crate) const SQRT3: f64 = 1.732_050_807_568_877_2;

#[inline]
pub fn sub(p: Point, q: Point) -> Point {
    [p[0] - q[0], p[1] - q[1]]
}

#[inline]
pub fn add(p: Point, q: Point) -> Point {
    [p[0] + q[0], p[1] + q[1]]
}

#[inline]
pub fn scale(p: Point, s: f64) -> Point {
    [p[0] * s, p[1] * s]
}

#[inline]
pub fn dot(p: Point, q: Point) -> f64 {
    p[0] * q[0] + p[1] * q[1]
}

#[inline]
pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

#[inline]
pub fn dist(p: Point, q: Point) -> f64 {
    norm(sub(p, q))
}

pub fn normalize(p: Point) -> Point {
    let n = norm(p);
    [p[0] / n, p[1] / n]
}

pub fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Upper arc of a lens, sampled as the graph of `u` over `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridProfile {
    pub time: f64,
    pub a: f64,
    pub b: f64,
    /// Samples `(x_i, u_i)` with `x_0 = a` and `x_n = b`.
    pub nodes: Vec<Point>,
    /// The lower arc is the mirror image of the upper arc.
    pub symmetric: bool,
}

impl GridProfile {
    /// Builds and validates a profile; the contact values are snapped to zero.
    pub fn new(time: f64, mut nodes: Vec<Point>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid(format!("{} nodes", nodes.len())));
        }
        let last = nodes.len() - 1;
        let scale = nodes
            .iter()
            .fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()))
            .max(f64::MIN_POSITIVE);
        for end in [0, last] {
            if nodes[end][1].abs() > 1e-12 * scale {
                return Err(Error::InvalidGrid(format!(
                    "contact value u[{end}] = {} is not zero",
                    nodes[end][1]
                )));
            }
            nodes[end][1] = 0.0;
        }
        let profile = GridProfile {
            time,
            a: nodes[0][0],
            b: nodes[last][0],
            nodes,
            symmetric: true,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Samples `u` on `n` uniform intervals of `[a, b]`.
    pub fn from_fn(a: f64, b: f64, n: usize, time: f64, u: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(a < b) {
            return Err(Error::InvalidGrid(format!("[{a}, {b}] with n = {n}")));
        }
        let h = (b - a) / n as f64;
        let nodes = (0..=n)
            .map(|i| {
                let x = if i == n { b } else { a + h * i as f64 };
                let y = if i == 0 || i == n { 0.0 } else { u(x) };
                [x, y]
            })
            .collect();
        GridProfile::new(time, nodes)
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|p| p[0])
    }

    pub fn us(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|p| p[1])
    }

    fn spacing_floor(&self) -> f64 {
        64.0 * f64::EPSILON * self.a.abs().max(self.b.abs()).max(self.width())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n < 2 {
            return Err(Error::InvalidGrid("fewer than two nodes".into()));
        }
        if !(self.a < self.b) {
            return Err(Error::InvalidGrid(format!("a = {} is not below b = {}", self.a, self.b)));
        }
        if self.nodes[0][0] != self.a || self.nodes[n - 1][0] != self.b {
            return Err(Error::InvalidGrid("end nodes do not sit at a and b".into()));
        }
        if self.nodes[0][1] != 0.0 || self.nodes[n - 1][1] != 0.0 {
            return Err(Error::InvalidGrid("contact values must vanish".into()));
        }
        let floor = self.spacing_floor();
        for (i, w) in self.nodes.windows(2).enumerate() {
            if !(w[1][0] - w[0][0] > floor) {
                return Err(Error::InvalidGrid(format!(
                    "spacing x[{}] - x[{}] = {:e} below floor {:e}",
                    i + 1,
                    i,
                    w[1][0] - w[0][0],
                    floor
                )));
            }
        }
        for (i, p) in self.nodes.iter().enumerate().take(n - 1).skip(1) {
            if !(p[1] > 0.0) || !p[1].is_finite() {
                return Err(Error::InvalidGrid(format!("u[{i}] = {} is not positive", p[1])));
            }
        }
        Ok(())
    }

    /// True when the nodes are equispaced in `x` to relative accuracy `tol`.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let h = self.width() / self.n() as f64;
        self.nodes
            .iter()
            .enumerate()
            .all(|(i, p)| (p[0] - (self.a + h * i as f64)).abs() <= tol * self.width())
    }

    /// Upper arc from `(a, 0)` to `(b, 0)`.
    pub fn upper_arc(&self) -> Vec<Point> {
        self.nodes.clone()
    }

    /// Lower arc from `(a, 0)` to `(b, 0)`.
    pub fn lower_arc(&self) -> Vec<Point> {
        self.nodes.iter().map(|p| [p[0], -p[1]]).collect()
    }

    /// Boundary of the enclosed region as a closed polygon (last vertex not repeated):
    /// upper arc left to right, then the lower arc back.
    pub fn closed_loop(&self) -> Vec<Point> {
        let mut pts = self.nodes.clone();
        pts.extend(self.nodes[1..self.nodes.len() - 1].iter().rev().map(|p| [p[0], -p[1]]));
        pts
    }

    /// Full network: both arcs and the half-lines along the x¹-axis.
    pub fn to_network(&self) -> NetworkSnapshot {
        let upper = self.upper_arc();
        let lower = self.lower_arc();
        let t_left = arc_end_tangent(&upper, false);
        let t_right = arc_end_tangent(&upper, true);
        let mirror = |t: Point| [t[0], -t[1]];
        NetworkSnapshot {
            junctions: [
                Junction {
                    point: [self.a, 0.0],
                    tangents: [t_left, mirror(t_left), [-1.0, 0.0]],
                },
                Junction {
                    point: [self.b, 0.0],
                    tangents: [t_right, mirror(t_right), [1.0, 0.0]],
                },
            ],
            upper_arc: upper,
            lower_arc: lower,
            left_ray: Ray {
                origin: [self.a, 0.0],
                direction: [-1.0, 0.0],
            },
            right_ray: Ray {
                origin: [self.b, 0.0],
                direction: [1.0, 0.0],
            },
            symmetric: true,
        }
    }

    /// Maximum chord slope magnitude, with the contact slopes ±√3 included.
    pub fn max_abs_slope(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| ((w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).abs())
            .fold(SQRT3, f64::max)
    }
}

/// Half-line `origin + r * direction`, `r ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Point,
    pub direction: Point,
}

/// Triple point with the three unit tangents pointing away from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub point: Point,
    pub tangents: [Point; 3],
}

impl Junction {
    /// Length of the sum of the three unit tangents (zero at exact 120° angles).
    pub fn balance_residual(&self) -> f64 {
        let s = self.tangents.iter().fold([0.0, 0.0], |acc, &t| add(acc, t));
        norm(s)
    }

    /// Largest deviation of a pairwise tangent angle from 2π/3.
    pub fn angle_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in i + 1..3 {
                let c = dot(normalize(self.tangents[i]), normalize(self.tangents[j])).clamp(-1.0, 1.0);
                worst = worst.max((c.acos() - 2.0 * PI / 3.0).abs());
            }
        }
        worst
    }
}

/// Explicit planar geometry of a network with two arcs and two half-lines.
///
/// For a lens the arcs are the upper and lower arcs; for the fish they are
/// the short and the long arc of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSnapshot {
    pub upper_arc: Vec<Point>,
    pub lower_arc: Vec<Point>,
    pub left_ray: Ray,
    pub right_ray: Ray,
    pub junctions: [Junction; 2],
    pub symmetric: bool,
}

impl NetworkSnapshot {
    /// Applies a similarity `p ↦ s·R(p − c)`; tangent and ray directions only rotate.
    pub fn transformed(&self, center: Point, scale_by: f64, angle: f64) -> NetworkSnapshot {
        let map = |p: Point| rotate(scale(sub(p, center), scale_by), angle);
        let turn = |d: Point| rotate(d, angle);
        NetworkSnapshot {
            upper_arc: self.upper_arc.iter().map(|&p| map(p)).collect(),
            lower_arc: self.lower_arc.iter().map(|&p| map(p)).collect(),
            left_ray: Ray {
                origin: map(self.left_ray.origin),
                direction: turn(self.left_ray.direction),
            },
            right_ray: Ray {
                origin: map(self.right_ray.origin),
                direction: turn(self.right_ray.direction),
            },
            junctions: self.junctions.map(|j| Junction {
                point: map(j.point),
                tangents: j.tangents.map(turn),
            }),
            symmetric: self.symmetric,
        }
    }

    /// Both arcs concatenated into one vertex list (upper then lower).
    pub fn arc_points(&self) -> Vec<Point> {
        let mut pts = self.upper_arc.clone();
        pts.extend_from_slice(&self.lower_arc);
        pts
    }

    /// `(min, max)` corners of the box containing the arcs and junctions.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let mut it = self
            .upper_arc
            .iter()
            .chain(&self.lower_arc)
            .chain(self.junctions.iter().map(|j| &j.point));
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        }))
    }

    pub fn max_junction_angle_error(&self) -> f64 {
        self.junctions.iter().map(Junction::angle_error).fold(0.0, f64::max)
    }

    pub fn max_junction_residual(&self) -> f64 {
        self.junctions.iter().map(Junction::balance_residual).fold(0.0, f64::max)
    }

    /// Hausdorff distance between the network's arcs and their reflection in the x¹-axis.
    pub fn mirror_defect(&self) -> Result<f64> {
        let flip = |arc: &[Point]| arc.iter().map(|p| [p[0], -p[1]]).collect::<Vec<_>>();
        let (up, low) = (flip(&self.upper_arc), flip(&self.lower_arc));
        hausdorff_distance_multi(&[&self.upper_arc, &self.lower_arc], &[&up, &low])
    }
}

/// Scalar measurements of one flow state.
///
/// Field order is the column order of the diagnostics CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub time: f64,
    pub area: f64,
    pub length: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub ratio_min: f64,
    pub a: f64,
    pub b: f64,
}

pub fn diagnostics(profile: &GridProfile) -> Result<Diagnostics> {
    let kappa = curvature(profile)?;
    let (kappa_min, kappa_max) = kappa
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| (lo.min(k), hi.max(k)));
    Ok(Diagnostics {
        time: profile.time,
        area: enclosed_area(profile)?,
        length: network_length(profile)?,
        kappa_min,
        kappa_max,
        ratio_min: distance_ratio_min(profile)?.ratio,
        a: profile.a,
        b: profile.b,
    })
}

/// Finite-difference weights for derivatives `0..=m` at `z` (Fornberg's recursion).
/// `w[j][k]` multiplies `f(nodes[j])` in the `k`-th derivative.
pub(crate) fn fd_weights(z: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives of a polyline with respect to chord length:
/// three-point stencils inside, four-point one-sided stencils at both ends.
fn parametric_derivatives(pts: &[Point]) -> Vec<(Point, Point)> {
    let n = pts.len();
    let mut s = Vec::with_capacity(n);
    s.push(0.0);
    for w in pts.windows(2) {
        let last = *s.last().unwrap();
        s.push(last + dist(w[0], w[1]));
    }
    (0..n)
        .map(|i| {
            let range = if i == 0 {
                0..4.min(n)
            } else if i == n - 1 {
                n.saturating_sub(4)..n
            } else {
                i - 1..i + 2
            };
            let w = fd_weights(s[i], &s[range.clone()], 2);
            let mut d1 = [0.0; 2];
            let mut d2 = [0.0; 2];
            for (k, j) in range.enumerate() {
                for c in 0..2 {
                    d1[c] += w[k][1] * pts[j][c];
                    d2[c] += w[k][2] * pts[j][c];
                }
            }
            (d1, d2)
        })
        .collect()
}

fn arc_end_tangent(pts: &[Point], at_end: bool) -> Point {
    if pts.len() < 4 {
        let (p, q) = if at_end {
            (pts[pts.len() - 1], pts[pts.len() - 2])
        } else {
            (pts[0], pts[1])
        };
        return normalize(sub(q, p));
    }
    let d = parametric_derivatives(if at_end { &pts[pts.len() - 4..] } else { &pts[..4] });
    if at_end {
        normalize(scale(d[3].0, -1.0))
    } else {
        normalize(d[0].0)
    }
}

/// Signed curvature along a polyline traversed left to right, positive when
/// the curve bends towards decreasing second coordinate (a convex cap).
pub fn polyline_curvature(pts: &[Point]) -> Vec<f64> {
    parametric_derivatives(pts)
        .into_iter()
        .map(|(d1, d2)| {
            let speed = norm(d1);
            -(d1[0] * d2[1] - d1[1] * d2[0]) / (speed * speed * speed)
        })
        .collect()
}

/// Curvature `κ = −u_xx / (1 + u_x²)^{3/2}` at every node of the upper arc.
///
/// Derivatives are taken parametrically in chord length so that profiles
/// which are steep near the contacts are still resolved; for a uniform graph
/// grid this is the usual second-order stencil.
pub fn curvature(profile: &GridProfile) -> Result<Vec<f64>> {
    profile.validate()?;
    if profile.n() < 4 {
        return Err(Error::InvalidGrid(format!("curvature needs n >= 4, got {}", profile.n())));
    }
    Ok(polyline_curvature(&profile.nodes))
}

/// Enclosed area `2∫_a^b u dx` by the trapezoid rule.
pub fn enclosed_area(profile: &GridProfile) -> Result<f64> {
    profile.validate()?;
    let half: f64 = profile
        .nodes
        .windows(2)
        .map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1]))
        .sum();
    Ok(2.0 * half)
}

/// Length of the two curved arcs, `2∫_a^b √(1 + u_x²) dx`.
pub fn network_length(profile: &GridProfile) -> Result<f64> {
    profile.validate()?;
    Ok(2.0 * polyline_length(&profile.nodes))
}

pub fn polyline_length(pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| dist(w[0], w[1])).sum()
}

/// Minimiser of extrinsic over modified intrinsic distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioMin {
    pub ratio: f64,
    pub p: Point,
    pub q: Point,
}

const RATIO_MAX_PER_ARC: usize = 512;

/// `min d_ex / ψ` over vertex pairs of a closed polygon, with
/// `ψ = (L/π)·sin(π d_in / L)` and `d_in` the shorter boundary path.
pub fn distance_ratio_min_closed(pts: &[Point]) -> Result<RatioMin> {
    let n = pts.len();
    if n < 4 {
        return Err(Error::InvalidGrid(format!("closed polygon with {n} vertices")));
    }
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for i in 0..n {
        let last = cum[i];
        cum.push(last + dist(pts[i], pts[(i + 1) % n]));
    }
    let total = cum[n];
    let mut best = RatioMin {
        ratio: f64::INFINITY,
        p: pts[0],
        q: pts[1],
    };
    for i in 0..n {
        for j in i + 1..n {
            let along = cum[j] - cum[i];
            let d_in = along.min(total - along);
            let psi = total / PI * (PI * d_in / total).sin();
            let r = dist(pts[i], pts[j]) / psi;
            if r < best.ratio {
                best = RatioMin {
                    ratio: r,
                    p: pts[i],
                    q: pts[j],
                };
            }
        }
    }
    Ok(best)
}

/// Distance ratio on the reduced network (both arcs, half-lines removed).
/// Profiles finer than 512 intervals per arc are subsampled.
pub fn distance_ratio_min(profile: &GridProfile) -> Result<RatioMin> {
    profile.validate()?;
    let n = profile.n();
    if n < 8 {
        return Err(Error::InvalidGrid(format!(
            "distance ratio needs at least 8 intervals per arc, got {n}"
        )));
    }
    if n <= RATIO_MAX_PER_ARC {
        return distance_ratio_min_closed(&profile.closed_loop());
    }
    let m = RATIO_MAX_PER_ARC;
    let nodes: Vec<Point> = (0..=m)
        .map(|k| profile.nodes[(k * n + m / 2) / m])
        .collect();
    let coarse = GridProfile {
        nodes,
        ..profile.clone()
    };
    distance_ratio_min_closed(&coarse.closed_loop())
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, add(a, scale(ab, t)))
}

fn directed_hausdorff(from: &[Point], to: &[Point]) -> f64 {
    from.iter()
        .map(|&p| {
            if to.len() == 1 {
                dist(p, to[0])
            } else {
                to.windows(2)
                    .map(|w| point_segment_distance(p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
            }
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each to the segments of the other.
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("hausdorff distance of an empty polyline".into()));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// Hausdorff distance between two unions of polylines.
pub fn hausdorff_distance_multi(a: &[&[Point]], b: &[&[Point]]) -> Result<f64> {
    if a.iter().all(|p| p.is_empty()) || b.iter().all(|p| p.is_empty()) {
        return Err(Error::InvalidInput("hausdorff distance of an empty polyline".into()));
    }
    let directed = |from: &[&[Point]], to: &[&[Point]]| {
        from.iter()
            .flat_map(|line| line.iter())
            .map(|&p| {
                to.iter()
                    .filter(|l| !l.is_empty())
                    .map(|l| directed_hausdorff(&[p], l))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// Circular arc over the chord `[center − half_width, center + half_width]`
/// meeting the axis at 60°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularArc {
    pub center: f64,
    pub half_width: f64,
}

impl CircularArc {
    pub fn radius(&self) -> f64 {
        2.0 * self.half_width / SQRT3
    }

    /// Height of the circle's centre below the axis.
    pub fn depth(&self) -> f64 {
        0.5 * self.radius()
    }

    pub fn value(&self, x: f64) -> f64 {
        let r = self.radius();
        let d = x - self.center;
        ((r - d) * (r + d)).max(0.0).sqrt() - self.depth()
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.slope_at_offset(x - self.center)
    }

    /// Slope at horizontal offset `d` from the centre of the chord.
    pub fn slope_at_offset(&self, d: f64) -> f64 {
        let r = self.radius();
        -d / ((r - d) * (r + d)).sqrt()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let r = self.radius();
        let d = x - self.center;
        let root = ((r - d) * (r + d)).sqrt();
        -r * r / (root * root * root)
    }

    /// Area between the arc and its chord.
    pub fn segment_area(&self) -> f64 {
        let r = self.radius();
        0.5 * r * r * (2.0 * PI / 3.0 - (2.0 * PI / 3.0).sin())
    }
}

/// Initial data for the flow.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLens {
    /// Circular arcs through `(center ± width/2, 0)`.
    CircularArc { width: f64, center: f64 },
    /// The self-similar lens profile scaled by `scale`.
    ScaledSelfSimilar { scale: f64, center: f64 },
    /// Circular arc plus an asymmetric bump whose value and slope vanish at
    /// both contacts.
    Perturbed {
        width: f64,
        center: f64,
        amplitude: f64,
        require_convex: bool,
    },
}

pub fn build_initial_lens(kind: &InitialLens, n: usize) -> Result<GridProfile> {
    if n < 16 {
        return Err(Error::InvalidGrid(format!("initial lens needs n >= 16, got {n}")));
    }
    match *kind {
        InitialLens::CircularArc { width, center } => {
            check_width(width)?;
            let arc = CircularArc {
                center,
                half_width: 0.5 * width,
            };
            GridProfile::from_fn(center - 0.5 * width, center + 0.5 * width, n, 0.0, |x| arc.value(x))
        }
        InitialLens::ScaledSelfSimilar { scale: s, center } => {
            check_width(s)?;
            let lens = crate::shooting::find_symmetric_lens(1e-12)?;
            let b = lens.profile.contact_x;
            // Time −s²/2 puts this profile on the exact homothety λ(t) = √(−2t).
            GridProfile::from_fn(center - s * b, center + s * b, n, -0.5 * s * s, |x| {
                s * lens.profile.value_at(((x - center) / s).abs())
            })
        }
        InitialLens::Perturbed {
            width,
            center,
            amplitude,
            require_convex,
        } => {
            check_width(width)?;
            let c = 0.5 * width;
            let arc = CircularArc { center, half_width: c };
            let bump = AsymmetricBump::new(center, c);
            let (a, b) = (center - c, center + c);
            let h = width / n as f64;
            for i in 0..=n {
                let x = if i == n { b } else { a + h * i as f64 };
                let slope = arc.slope(x) + amplitude * bump.d1(x);
                if slope.abs() > SQRT3 * (1.0 + 1e-12) {
                    return Err(Error::InvalidInput(format!(
                        "perturbation amplitude {amplitude} gives |u_x| = {} > √3 at x = {x}",
                        slope.abs()
                    )));
                }
                if require_convex && arc.second_derivative(x) + amplitude * bump.d2(x) >= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "perturbation amplitude {amplitude} breaks convexity at x = {x}"
                    )));
                }
            }
            GridProfile::from_fn(a, b, n, 0.0, |x| arc.value(x) + amplitude * bump.value(x))
        }
    }
}

fn check_width(w: f64) -> Result<()> {
    if w > 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(crate::error::domain("width", w, "(0, ∞)"))
    }
}

/// `p(x) = q(x)²·(x − m)/c⁴` with `q = (x − a)(b − x)`, normalised so that
/// `|p| ≤ c` on the chord; `p` and `p'` vanish at both ends.
#[derive(Debug, Clone, Copy)]
struct AsymmetricBump {
    m: f64,
    c: f64,
}

impl AsymmetricBump {
    fn new(m: f64, c: f64) -> Self {
        AsymmetricBump { m, c }
    }

    fn parts(&self, x: f64) -> (f64, f64, f64, f64) {
        let (a, b) = (self.m - self.c, self.m + self.c);
        let q = (x - a) * (b - x);
        let dq = a + b - 2.0 * x;
        let r = (x - self.m) / self.c.powi(4);
        let dr = 1.0 / self.c.powi(4);
        (q, dq, r, dr)
    }

    fn value(&self, x: f64) -> f64 {
        let (q, _, r, _) = self.parts(x);
        q * q * r
    }

    fn d1(&self, x: f64) -> f64 {
        let (q, dq, r, dr) = self.parts(x);
        2.0 * q * dq * r + q * q * dr
    }

    fn d2(&self, x: f64) -> f64 {
        let (q, dq, r, dr) = self.parts(x);
        2.0 * dq * dq * r - 4.0 * q * r + 4.0 * q * dq * dr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn semicircle(n: usize) -> GridProfile {
        let nodes = (0..=n)
            .map(|i| {
                let th = PI * (1.0 - i as f64 / n as f64);
                [th.cos(), if i == 0 || i == n { 0.0 } else { th.sin() }]
            })
            .collect::<Vec<_>>();
        let mut nodes = nodes;
        nodes[0][0] = -1.0;
        nodes[n][0] = 1.0;
        GridProfile::new(0.0, nodes).unwrap()
    }

    #[test]
    fn semicircle_curvature_is_one() {
        let k = curvature(&semicircle(400)).unwrap();
        for &ki in &k[1..k.len() - 1] {
            assert!((ki - 1.0).abs() < 1e-3, "{ki}");
        }
        // the one-sided stencils hold up at the contacts too
        assert!((k[0] - 1.0).abs() < 1e-3 && (k[400] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn tent_has_zero_curvature_on_each_side() {
        // u linear on each half: straight chords, curvature zero away from the apex
        let p = GridProfile::from_fn(-1.0, 1.0, 40, 0.0, |x| 1.0 - x.abs()).unwrap();
        let k = curvature(&p).unwrap();
        for (i, &ki) in k.iter().enumerate() {
            if (i as i64 - 20).abs() > 2 {
                assert!(ki.abs() < 1e-9, "node {i}: {ki}");
            }
        }
    }

    #[test]
    fn curvature_of_radius_r_circle_is_second_order() {
        let r = 2.5;
        let arc = CircularArc {
            center: 0.3,
            half_width: r * SQRT3 / 2.0,
        };
        let err = |n: usize| {
            let p = GridProfile::from_fn(0.3 - arc.half_width, 0.3 + arc.half_width, n, 0.0, |x| {
                arc.value(x)
            })
            .unwrap();
            curvature(&p)
                .unwrap()
                .iter()
                .map(|k| (k - 1.0 / r).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 1e-3);
        assert!((e1 / e2).log2() > 1.8, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn semicircle_area_and_length() {
        let p = semicircle(400);
        assert!((enclosed_area(&p).unwrap() - PI).abs() < 1e-4);
        assert!((network_length(&p).unwrap() - 2.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn flat_chord_length_is_twice_width() {
        let nodes = vec![[0.0, 0.0], [0.5, 0.0], [1.5, 0.0]];
        // u = 0 in the interior is not a valid lens; measure the polyline directly
        assert_eq!(2.0 * polyline_length(&nodes), 3.0);
        assert!(GridProfile::new(0.0, nodes).is_err());
    }

    #[test]
    fn circular_lens_area_matches_segment_formula() {
        let arc = CircularArc {
            center: 0.0,
            half_width: 1.0,
        };
        // radius 2/√3, centre (0, −1/√3)
        assert!((arc.radius() - 2.0 / SQRT3).abs() < 1e-15);
        assert!((arc.depth() - 1.0 / SQRT3).abs() < 1e-15);
        let exact = 2.0 * arc.segment_area();
        assert!((exact - (8.0 * PI / 9.0 - 2.0 / SQRT3)).abs() < 1e-14);
        let p = build_initial_lens(&InitialLens::CircularArc { width: 2.0, center: 0.0 }, 1024).unwrap();
        assert!((enclosed_area(&p).unwrap() - exact).abs() < 1e-5);
    }

    #[test]
    fn area_and_length_converge_at_second_order() {
        let lens = |n| build_initial_lens(&InitialLens::CircularArc { width: 2.0, center: 0.0 }, n).unwrap();
        let arc = CircularArc {
            center: 0.0,
            half_width: 1.0,
        };
        let exact_area = 2.0 * arc.segment_area();
        let exact_len = 2.0 * arc.radius() * 2.0 * PI / 3.0;
        let ea = |n| (enclosed_area(&lens(n)).unwrap() - exact_area).abs();
        let el = |n| (network_length(&lens(n)).unwrap() - exact_len).abs();
        assert!((ea(64) / ea(128)).log2() > 1.9);
        assert!((el(64) / el(128)).log2() > 1.9);
    }

    #[test]
    fn circular_arc_contact_slope_is_exact() {
        for (w, c) in [(2.0, 0.0), (0.37, -4.2), (13.0, 1.5)] {
            let arc = CircularArc {
                center: c,
                half_width: 0.5 * w,
            };
            assert!((arc.slope_at_offset(-0.5 * w) - SQRT3).abs() <= 4.0 * f64::EPSILON);
            assert!((arc.slope_at_offset(0.5 * w) + SQRT3).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn circle_distance_ratio_is_one() {
        let r = distance_ratio_min(&semicircle(200)).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-3, "{}", r.ratio);
    }

    #[test]
    fn ratio_near_junction_tends_to_sqrt3_over_2() {
        // pairs that collapse onto the left junction see two nearly straight arcs at 120°
        let p = build_initial_lens(&InitialLens::CircularArc { width: 2.0, center: 0.0 }, 8192).unwrap();
        let pts = p.closed_loop();
        let n = pts.len();
        let loop_len = polyline_length(&pts) + dist(pts[n - 1], pts[0]);
        // pair: k nodes above and k nodes below the left junction
        let ratio = |k: usize| {
            let pa = pts[k];
            let pb = pts[n - k];
            let d_in = 2.0 * polyline_length(&pts[..=k]);
            let psi = loop_len / PI * (PI * d_in / loop_len).sin();
            dist(pa, pb) / psi
        };
        let target = SQRT3 / 2.0;
        let errs: Vec<f64> = [64, 16, 4, 1].iter().map(|&k| (ratio(k) - target).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[3] < 1e-3, "{errs:?}");
    }

    #[test]
    fn ratio_refuses_tiny_grids() {
        let p = GridProfile::from_fn(-1.0, 1.0, 6, 0.0, |x| 1.0 - x * x).unwrap();
        assert!(distance_ratio_min(&p).is_err());
    }

    #[test]
    fn hausdorff_basics() {
        let a = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let b = vec![[0.0, 0.3], [2.0, 0.3]];
        assert!((hausdorff_distance(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        assert!(hausdorff_distance(&a, &[]).is_err());
    }

    #[test]
    fn hausdorff_fine_vs_coarse_circle_within_sagitta() {
        let sample = |m: usize| {
            (0..=m)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / m as f64;
                    [th.cos(), th.sin()]
                })
                .collect::<Vec<_>>()
        };
        let coarse = sample(24);
        let fine = sample(24 * 32);
        let sagitta = 1.0 - (PI / 24.0).cos();
        let h = hausdorff_distance(&fine, &coarse).unwrap();
        assert!(h <= sagitta + 1e-12);
        assert!(h > 0.9 * sagitta);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(GridProfile::new(0.0, vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(GridProfile::new(0.0, vec![[0.0, 0.0], [0.5, -1.0], [1.0, 0.0]]).is_err());
        assert!(GridProfile::new(0.0, vec![[0.0, 0.1], [0.5, 1.0], [1.0, 0.0]]).is_err());
        let p = GridProfile::from_fn(0.0, 1.0, 4, 0.0, |x| x * (1.0 - x)).unwrap();
        assert!(matches!(curvature(&p), Ok(_)));
        let q = GridProfile::from_fn(0.0, 1.0, 3, 0.0, |x| x * (1.0 - x)).unwrap();
        assert!(curvature(&q).is_err());
    }

    #[test]
    fn network_from_profile_has_balanced_junctions() {
        let p = build_initial_lens(&InitialLens::CircularArc { width: 2.0, center: 0.0 }, 256).unwrap();
        let net = p.to_network();
        assert!(net.max_junction_angle_error() < 1e-5);
        assert_eq!(net.mirror_defect().unwrap(), 0.0);
    }

    #[test]
    fn perturbed_lens_keeps_contact_slopes_and_rejects_large_bumps() {
        let ok = build_initial_lens(
            &InitialLens::Perturbed {
                width: 2.0,
                center: 0.0,
                amplitude: 0.05,
                require_convex: true,
            },
            128,
        )
        .unwrap();
        assert!(ok.nodes[40][1] != ok.nodes[88][1]);
        let bad = build_initial_lens(
            &InitialLens::Perturbed {
                width: 2.0,
                center: 0.0,
                amplitude: 2.0,
                require_convex: true,
            },
            128,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn fd_weights_reproduce_polynomials() {
        let nodes = [0.0, 0.3, 0.7, 1.6];
        let w = fd_weights(0.0, &nodes, 2);
        let f = |x: f64| 2.0 - x + 3.0 * x * x - 0.5 * x * x * x;
        let d2: f64 = nodes.iter().zip(&w).map(|(&x, wk)| wk[2] * f(x)).sum();
        let d1: f64 = nodes.iter().zip(&w).map(|(&x, wk)| wk[1] * f(x)).sum();
        assert!((d2 - 6.0).abs() < 1e-10);
        assert!((d1 + 1.0).abs() < 1e-10);
    }
}
