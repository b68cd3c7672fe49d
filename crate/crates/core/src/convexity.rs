//! Numerical checks of convexity of the distance function in nonpositive
//! curvature, plus a sampling test for covers of `ℝⁿ` by closed half-spaces.
//!
//! Every randomized sweep draws trial `i` from its own ChaCha stream, so the
//! outcome does not depend on the execution mode or on how trials are split
//! across threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{GeodesicSegment, ModelPoint, ModelSpace};
use crate::par::{map_indexed, Execution};

/// Second-difference step.
pub const STEP: f64 = 1e-3;
/// Second differences below `-TOL_CONV` are violations.
pub const TOL_CONV: f64 = 1e-9;
/// Quadruples whose collinearity residual is below this count as collinear.
pub const COLLINEAR_TOL: f64 = 1e-8;
/// Relative singular-value threshold for the rank of stacked normals.
pub const RANK_TOL: f64 = 1e-10;

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// A random point at distance below `spread` from the origin, uniform in angle.
fn random_point(space: &ModelSpace, rng: &mut ChaCha8Rng, spread: f64) -> ModelPoint {
    let n = space.dimension();
    let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let r = rng.random_range(0.0..spread);
    let origin = space.origin();
    let mut v = vec![0.0; space.ambient_dim()];
    let off = space.ambient_dim() - n;
    for (k, d) in dir.iter().enumerate() {
        v[off + k] = d / norm * r;
    }
    space.exp_unchecked(&origin, &v)
}

/// Largest distance from any point to the geodesic through the farthest pair.
pub fn collinearity_residual(space: &ModelSpace, points: &[ModelPoint]) -> f64 {
    let mut far = (0, 0, -1.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = space.dist(&points[i], &points[j]);
            if d > far.2 {
                far = (i, j, d);
            }
        }
    }
    if far.2 <= 0.0 {
        return 0.0;
    }
    let (a, b) = (&points[far.0], &points[far.1]);
    points
        .iter()
        .map(|x| space.distance_to_geodesic(a, b, x))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MidpointCheck {
    /// Distance between the two midpoints.
    pub lhs: f64,
    /// Average of the endpoint distances.
    pub rhs: f64,
    pub strict: bool,
}

/// Compares `d(mid(p1,q1), mid(p2,q2))` with `(d(p1,p2) + d(q1,q2))/2`.
pub fn midpoint_check(
    space: &ModelSpace,
    p1: &ModelPoint,
    q1: &ModelPoint,
    p2: &ModelPoint,
    q2: &ModelPoint,
) -> Result<MidpointCheck> {
    let m1 = space.interpolate(p1, q1, 0.5)?;
    let m2 = space.interpolate(p2, q2, 0.5)?;
    let lhs = space.dist(&m1, &m2);
    let rhs = 0.5 * (space.dist(p1, p2) + space.dist(q1, q2));
    Ok(MidpointCheck {
        lhs,
        rhs,
        strict: rhs - lhs > 1e-12,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub d_qr: f64,
    pub d_star: f64,
}

/// Distance between `q = p1 + s(p2 − p1)` and `r = p1 + t(p3 − p1)` (geodesic
/// interpolation, `s, t ∈ [0, 1]`) next to the distance between the matching
/// points of the comparison triangle in curvature `comparison_curvature`.
pub fn comparison_check(
    space: &ModelSpace,
    triple: [&ModelPoint; 3],
    s: f64,
    t: f64,
    comparison_curvature: f64,
) -> Result<ComparisonCheck> {
    let [p1, p2, p3] = triple;
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return domain(format!("interpolation parameters must lie in [0, 1], got {s}, {t}"));
    }
    let q = space.interpolate(p1, p2, s)?;
    let r = space.interpolate(p1, p3, t)?;
    let d12 = space.dist(p1, p2);
    let d13 = space.dist(p1, p3);
    let d23 = space.dist(p2, p3);
    let tri = ModelSpace::comparison_triangle(d12, d13, d23, comparison_curvature)?;
    let qs = tri.comparison_point(0, s * d12)?;
    let rs = tri.comparison_point(1, t * d13)?;
    Ok(ComparisonCheck {
        d_qr: space.dist(&q, &r),
        d_star: tri.space.dist(&qs, &rs),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    StrictlyConvex,
    ConvexConstantOnLine,
    Violation,
}

/// Second differences of a function along a geodesic parameter `t ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// `(t, f(t+h) − 2f(t) + f(t−h))`.
    pub samples: Vec<(f64, f64)>,
    pub min_margin: f64,
    /// The configuration lies on one maximal geodesic, where the function is
    /// affine along the exceptional direction.
    pub exceptional_direction_detected: bool,
    pub classification: Classification,
    /// `max − min` of the sampled function values.
    pub spread: f64,
    pub tol_conv: f64,
}

impl ConvexityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,second_difference\n");
        for (t, sd) in &self.samples {
            out.push_str(&format!("{t},{sd}\n"));
        }
        out
    }

    fn from_profile(f: impl Fn(f64) -> f64, n_samples: usize, collinear: bool, tol: f64) -> Self {
        let n = n_samples.max(1);
        let ts: Vec<f64> = if n == 1 {
            vec![0.5]
        } else {
            (0..n)
                .map(|i| STEP + (1.0 - 2.0 * STEP) * i as f64 / (n - 1) as f64)
                .collect()
        };
        let samples: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| (t, f(t + STEP) - 2.0 * f(t) + f(t - STEP)))
            .collect();
        let min_margin = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let values: Vec<f64> = (0..=n.max(2)).map(|i| f(i as f64 / n.max(2) as f64)).collect();
        let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        let classification = if min_margin < -tol {
            Classification::Violation
        } else if min_margin > tol {
            Classification::StrictlyConvex
        } else {
            Classification::ConvexConstantOnLine
        };
        Self {
            samples,
            min_margin,
            exceptional_direction_detected: collinear,
            classification,
            spread,
            tol_conv: tol,
        }
    }
}

/// Profile of `t ↦ d(γ1(t), γ2(t))` for geodesics in a common model space.
/// Also returns whether the endpoint sets of the two segments are disjoint.
pub fn product_convexity_profile(
    g1: &GeodesicSegment,
    g2: &GeodesicSegment,
    n_samples: usize,
) -> Result<(ConvexityReport, bool)> {
    let space = g1.space();
    if g2.space() != space {
        return domain("segments live in different model spaces");
    }
    let ends = [&g1.start, &g1.end, &g2.start, &g2.end];
    let separated = [ends[0], ends[1]]
        .iter()
        .all(|a| [ends[2], ends[3]].iter().all(|b| space.dist(a, b) > 0.0));
    let pts: Vec<ModelPoint> = ends.iter().map(|p| (*p).clone()).collect();
    let collinear = collinearity_residual(&space, &pts) < COLLINEAR_TOL;
    let report = ConvexityReport::from_profile(|t| space.dist(&g1.at(t), &g2.at(t)), n_samples, collinear, TOL_CONV);
    Ok((report, separated))
}

/// Profile of `t ↦ d(p, γ(t))`.
pub fn pointed_convexity_profile(
    p: &ModelPoint,
    g: &GeodesicSegment,
    n_samples: usize,
) -> Result<ConvexityReport> {
    let space = g.space();
    space.validate(p)?;
    let collinear = g.length > 0.0
        && collinearity_residual(&space, &[p.clone(), g.start.clone(), g.end.clone()]) < COLLINEAR_TOL;
    Ok(ConvexityReport::from_profile(|t| space.dist(p, &g.at(t)), n_samples, collinear, TOL_CONV))
}

/// Closed half-spaces `{x : side_i ⟨n_i, x⟩ ≥ 0}` bounded by hyperplanes
/// through the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSystem {
    pub dimension: usize,
    pub normals: Vec<Vec<f64>>,
    pub sides: Vec<i8>,
}

impl HalfspaceSystem {
    /// Normalizes the normals; sides are `+1` or `-1`.
    pub fn new(dimension: usize, normals: Vec<Vec<f64>>, sides: Vec<i8>) -> Result<Self> {
        if dimension < 2 {
            return domain("half-space systems need dimension at least 2");
        }
        if normals.is_empty() || normals.len() != sides.len() {
            return domain("need at least one hyperplane and one side per hyperplane");
        }
        if sides.iter().any(|s| *s != 1 && *s != -1) {
            return domain("sides must be +1 or -1");
        }
        let mut unit = Vec::with_capacity(normals.len());
        for v in normals {
            if v.len() != dimension {
                return domain(format!("normal {v:?} does not have {dimension} components"));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return domain("normals must be nonzero and finite");
            }
            unit.push(v.iter().map(|x| x / norm).collect());
        }
        Ok(Self {
            dimension,
            normals: unit,
            sides,
        })
    }

    /// Dimension of the intersection of the hyperplanes.
    pub fn intersection_dim(&self) -> usize {
        let k = self.normals.len();
        let m = DMatrix::from_fn(k, self.dimension, |i, j| self.normals[i][j]);
        let sv = m.singular_values();
        let top = sv.max();
        let rank = sv.iter().filter(|s| **s > RANK_TOL * top.max(1.0)).count();
        self.dimension - rank
    }

    fn covered(&self, x: &[f64]) -> bool {
        self.normals
            .iter()
            .zip(&self.sides)
            .any(|(n, s)| *s as f64 * n.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() >= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck {
    pub dimension: usize,
    pub hyperplanes: usize,
    /// No uncovered direction among the samples.
    pub covers: bool,
    pub dim_intersection: usize,
    /// `n − k + 1`; vacuous when it is below 1 or `k > n`.
    pub bound: i64,
    pub vacuous: bool,
    /// An uncovered unit vector, when one was found.
    pub witness: Option<Vec<f64>>,
    pub samples_used: usize,
}

impl CoverCheck {
    /// `covers ⇒ dim_intersection ≥ n − k + 1`.
    pub fn consistent(&self) -> bool {
        !self.covers || self.dim_intersection as i64 >= self.bound
    }
}

/// Samples up to `n_samples` uniform directions and stops at the first one
/// that no half-space contains.
pub fn halfspace_cover_check(sys: &HalfspaceSystem, n_samples: usize, seed: u64) -> CoverCheck {
    let n = sys.dimension;
    let k = sys.normals.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut witness = None;
    let mut used = 0;
    for _ in 0..n_samples {
        used += 1;
        for xi in x.iter_mut() {
            *xi = StandardNormal.sample(&mut rng);
        }
        if !sys.covered(&x) {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            witness = Some(x.iter().map(|v| v / norm).collect());
            break;
        }
    }
    CoverCheck {
        dimension: n,
        hyperplanes: k,
        covers: witness.is_none(),
        dim_intersection: sys.intersection_dim(),
        bound: n as i64 - k as i64 + 1,
        vacuous: k > n,
        witness,
        samples_used: used,
    }
}

/// Random system in dimension `n` with `k` distinct hyperplanes. With
/// `covering` set (and `k ≥ 3`) the signed normals are positively dependent,
/// so the closed half-spaces cover `ℝⁿ`. Two distinct hyperplanes never
/// cover, so `covering` is ignored for `k < 3`.
pub fn random_halfspace_system(n: usize, k: usize, covering: bool, rng: &mut ChaCha8Rng) -> HalfspaceSystem {
    loop {
        let mut signed: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect())
            .collect();
        if covering && k >= 3 {
            let mut last = vec![0.0; n];
            for v in &signed[..k - 1] {
                let c: f64 = rng.random_range(0.2..1.0);
                for (l, x) in last.iter_mut().zip(v) {
                    *l -= c * x;
                }
            }
            signed[k - 1] = last;
        }
        let sides: Vec<i8> = (0..k).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let normals: Vec<Vec<f64>> = signed
            .iter()
            .zip(&sides)
            .map(|(v, s)| v.iter().map(|x| x * *s as f64).collect())
            .collect();
        let Ok(sys) = HalfspaceSystem::new(n, normals, sides) else {
            continue;
        };
        // distinct hyperplanes: no two normals parallel
        let distinct = (0..k).all(|i| {
            (i + 1..k).all(|j| {
                let c: f64 = sys.normals[i].iter().zip(&sys.normals[j]).map(|(a, b)| a * b).sum();
                c.abs() < 1.0 - 1e-9
            })
        });
        if distinct {
            return sys;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSweep {
    pub systems: usize,
    pub covering: usize,
    /// Systems that cover with too small an intersection.
    pub counterexamples: usize,
    /// Systems with `dim < n − k + 1` for which no witness was sampled.
    pub missed_witnesses: usize,
}

/// Runs [`halfspace_cover_check`] on `trials` random systems with
/// `2 ≤ n ≤ max_dim` and `1 ≤ k ≤ n`. Even-numbered trials with `n ≥ 3` are
/// built to cover.
pub fn halfspace_checks(trials: usize, max_dim: usize, n_samples: usize, seed: u64, exec: Execution) -> Vec<CoverCheck> {
    map_indexed(exec, trials, |i| {
        let mut rng = trial_rng(seed, i as u64);
        let n = rng.random_range(2..=max_dim.max(2));
        let covering = i % 2 == 0 && n >= 3;
        let k = rng.random_range(if covering { 3 } else { 1 }..=n);
        let sys = random_halfspace_system(n, k, covering, &mut rng);
        halfspace_cover_check(&sys, n_samples, rng.random())
    })
}

impl HalfspaceSweep {
    pub fn from_checks(checks: &[CoverCheck]) -> Self {
        let mut out = HalfspaceSweep {
            systems: checks.len(),
            ..HalfspaceSweep::default()
        };
        for c in checks {
            out.covering += c.covers as usize;
            out.counterexamples += !c.consistent() as usize;
            if c.covers && (c.dim_intersection as i64) < c.bound {
                out.missed_witnesses += 1;
            }
        }
        out
    }
}

pub fn halfspace_sweep(trials: usize, max_dim: usize, n_samples: usize, seed: u64, exec: Execution) -> HalfspaceSweep {
    HalfspaceSweep::from_checks(&halfspace_checks(trials, max_dim, n_samples, seed, exec))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MidpointSweep {
    pub trials: usize,
    pub non_collinear: usize,
    /// Non-collinear quadruples where the midpoint inequality was not strict.
    pub violations: usize,
    /// Violations of the interior-parameter convexity inequality.
    pub interior_violations: usize,
    /// Smallest `rhs − lhs` over non-collinear quadruples.
    pub min_gap: f64,
}

/// Random quadruples within distance `spread` of the origin. The interior
/// convexity inequality is allowed a slack of `tol`.
pub fn midpoint_sweep(space: &ModelSpace, trials: usize, spread: f64, tol: f64, seed: u64, exec: Execution) -> MidpointSweep {
    let rows = map_indexed(exec, trials, |i| {
        let mut rng = trial_rng(seed, i as u64);
        let pts: Vec<ModelPoint> = (0..4).map(|_| random_point(space, &mut rng, spread)).collect();
        let (p1, q1, p2, q2) = (&pts[0], &pts[1], &pts[2], &pts[3]);
        let interior_bad = (1..10).any(|j| {
            let t = j as f64 / 10.0;
            let a = space.interpolate_unchecked(q1, p1, t);
            let b = space.interpolate_unchecked(q2, p2, t);
            space.dist(&a, &b) > t * space.dist(p1, p2) + (1.0 - t) * space.dist(q1, q2) + tol
        });
        let collinear = collinearity_residual(space, &pts) < COLLINEAR_TOL;
        let m = midpoint_check(space, p1, q1, p2, q2).expect("sampled points are valid");
        (collinear, m, interior_bad)
    });
    let mut out = MidpointSweep {
        trials,
        non_collinear: 0,
        violations: 0,
        interior_violations: 0,
        min_gap: f64::INFINITY,
    };
    for (collinear, m, interior_bad) in rows {
        out.interior_violations += interior_bad as usize;
        if collinear {
            continue;
        }
        out.non_collinear += 1;
        out.violations += !m.strict as usize;
        out.min_gap = out.min_gap.min(m.rhs - m.lhs);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSweep {
    pub trials: usize,
    pub comparison_curvature: f64,
    /// Cases with `d(q,r) > d*(q*,r*) + tol`.
    pub violations: usize,
    /// Largest `d(q,r) − d*(q*,r*)`.
    pub max_excess: f64,
    /// Largest `|d(q,r) − d*(q*,r*)|`.
    pub max_abs_gap: f64,
}

pub fn comparison_sweep(
    space: &ModelSpace,
    comparison_curvature: f64,
    trials: usize,
    spread: f64,
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Result<ComparisonSweep> {
    let rows = map_indexed(exec, trials, |i| {
        let mut rng = trial_rng(seed, i as u64);
        let pts: Vec<ModelPoint> = (0..3).map(|_| random_point(space, &mut rng, spread)).collect();
        let s = rng.random_range(0.0..=1.0);
        let t = rng.random_range(0.0..=1.0);
        comparison_check(space, [&pts[0], &pts[1], &pts[2]], s, t, comparison_curvature)
    });
    let mut out = ComparisonSweep {
        trials,
        comparison_curvature,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
        max_abs_gap: 0.0,
    };
    for r in rows {
        let c = r?;
        let excess = c.d_qr - c.d_star;
        out.violations += (excess > tol) as usize;
        out.max_excess = out.max_excess.max(excess);
        out.max_abs_gap = out.max_abs_gap.max(excess.abs());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSweep {
    pub trials: usize,
    /// Product profiles `t ↦ d(γ1(t), γ2(t))` with a negative second difference.
    pub product_violations: usize,
    pub product_strict: usize,
    /// Pointed profiles `t ↦ d(p, γ(t))` with a negative second difference.
    pub pointed_violations: usize,
    /// Pointed profiles whose spread is at most `tol`.
    pub pointed_constant: usize,
    pub min_pointed_spread: f64,
}

/// Random geodesic pairs with separated endpoints, and random point and
/// geodesic pairs. Every fourth pointed trial uses a geodesic through `p`.
pub fn profile_sweep(
    space: &ModelSpace,
    trials: usize,
    spread: f64,
    n_samples: usize,
    tol: f64,
    seed: u64,
    exec: Execution,
) -> ProfileSweep {
    let rows = map_indexed(exec, trials, |i| {
        let mut rng = trial_rng(seed, i as u64);
        let mut pick = || random_point(space, &mut rng, spread);
        let (a, b, c, d, p) = (pick(), pick(), pick(), pick(), pick());
        let g1 = space.segment_unchecked(&a, &b);
        let g2 = space.segment_unchecked(&c, &d);
        let collinear = collinearity_residual(space, &[a.clone(), b.clone(), c.clone(), d.clone()]) < COLLINEAR_TOL;
        let product = ConvexityReport::from_profile(|t| space.dist(&g1.at(t), &g2.at(t)), n_samples, collinear, tol);
        let g = if i % 4 == 0 {
            // extend past `p` on both sides
            let back = space.interpolate_unchecked(&a, &p, 2.0);
            space.segment_unchecked(&a, &back)
        } else {
            g1.clone()
        };
        let pointed = ConvexityReport::from_profile(|t| space.dist(&p, &g.at(t)), n_samples, false, tol);
        (product.classification, pointed.classification, pointed.spread)
    });
    let mut out = ProfileSweep {
        trials,
        product_violations: 0,
        product_strict: 0,
        pointed_violations: 0,
        pointed_constant: 0,
        min_pointed_spread: f64::INFINITY,
    };
    for (prod, pointed, spread) in rows {
        out.product_violations += (prod == Classification::Violation) as usize;
        out.product_strict += (prod == Classification::StrictlyConvex) as usize;
        out.pointed_violations += (pointed == Classification::Violation) as usize;
        out.pointed_constant += (spread <= tol) as usize;
        out.min_pointed_spread = out.min_pointed_spread.min(spread);
    }
    out
}
