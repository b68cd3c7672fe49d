//! Distances, minimizing segments and local maxima on a quotient `M̃/Γ`.
//!
//! The distance between two points of the quotient is the minimum of
//! `d̃(p̃₁, g·p̃₂)` over the deck group. Only finitely many `g` can come close
//! to the minimum, and the search below finds all of them by scanning a ball
//! of group elements sorted by how far they move the base point.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::deck::{Isometry, QuotientSpace};
use crate::error::{domain, GeoError, Result};
use crate::model::{GeodesicSegment, ModelPoint, ModelSpace};
use crate::par::{map_indexed, Execution};

/// Segments whose initial directions are closer than this are the same.
pub const DIR_TOL: f64 = 1e-6;

/// Default tie tolerance for a given distance.
pub fn default_min_tol(distance: f64) -> f64 {
    1e-7 * (1.0 + distance)
}

/// A lift `g·p̃₂` of the second point together with its distance to `p̃₁`.
#[derive(Clone, Debug)]
pub struct Lift {
    pub element: Isometry,
    pub point: ModelPoint,
    pub distance: f64,
}

/// Scans the deck ball for lifts of `r2` near `r1`, both already reduced.
/// Returns the minimum and every `(index, distance)` within `slack` of it.
fn scan_reduced(
    space: &QuotientSpace,
    r1: &ModelPoint,
    r2: &ModelPoint,
    slack: f64,
) -> Result<(f64, Vec<(usize, f64)>, std::sync::Arc<Vec<crate::deck::DeckElement>>)> {
    let model = space.model();
    let reach = model.dist(space.base(), r1) + model.dist(space.base(), r2);
    let mut radius = 2.0 * space.domain_radius();
    let mut buf = vec![0.0; r2.coords.len()];
    loop {
        let ball = space.deck_ball_covering(radius)?;
        let mut best = f64::INFINITY;
        let mut hits: Vec<(usize, f64)> = Vec::new();
        for (i, e) in ball.iter().enumerate() {
            if e.displacement > radius.min(best + slack + reach) {
                break;
            }
            e.element.apply_into(&r2.coords, &mut buf);
            let d = model.dist_coords(&r1.coords, &buf);
            if d <= best + slack {
                hits.push((i, d));
                best = best.min(d);
            }
        }
        // every lift within `slack` of the minimum moves the base point by at
        // most `best + slack + reach`, so it lies in the scanned ball
        if best + slack + reach < radius {
            hits.retain(|(_, d)| *d <= best + slack);
            return Ok((best, hits, ball));
        }
        radius *= 2.0;
    }
}

/// Distance on the quotient between the images of `p1` and `p2`.
pub fn quotient_distance(space: &QuotientSpace, p1: &ModelPoint, p2: &ModelPoint) -> Result<f64> {
    let model = space.model();
    model.validate(p1)?;
    model.validate(p2)?;
    let (r1, _) = space.reduce(p1);
    let (r2, _) = space.reduce(p2);
    Ok(scan_reduced(space, &r1, &r2, 0.0)?.0)
}

/// Every lift `g·p2` with `d̃(p1, g·p2) ≤ min + slack`, sorted by distance and
/// then by coordinates. Lifts are expressed relative to the given
/// representatives, not the reduced ones.
pub fn lifts_within(space: &QuotientSpace, p1: &ModelPoint, p2: &ModelPoint, slack: f64) -> Result<Vec<Lift>> {
    let model = space.model();
    model.validate(p1)?;
    model.validate(p2)?;
    if !(slack >= 0.0) {
        return domain(format!("slack must be nonnegative, got {slack}"));
    }
    let (r1, h1) = space.reduce(p1);
    let (r2, h2) = space.reduce(p2);
    let (_, hits, ball) = scan_reduced(space, &r1, &r2, slack)?;
    let back = h1.inverse();
    let mut lifts: Vec<Lift> = hits
        .into_iter()
        .map(|(i, _)| {
            let element = back.compose(&ball[i].element).compose(&h2);
            let point = element.apply_unchecked(model, p2);
            Lift {
                distance: model.dist(p1, &point),
                point,
                element,
            }
        })
        .collect();
    lifts.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| lex_cmp(&a.point.coords, &b.point.coords))
    });
    Ok(lifts)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// The minimizing geodesic segments from `p1` to `p2` on the quotient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentBundle {
    pub p1: ModelPoint,
    pub p2: ModelPoint,
    pub distance: f64,
    pub segments: Vec<GeodesicSegment>,
    pub order: usize,
    pub min_tol: f64,
    pub dir_tol: f64,
    /// Some lift lies just outside the tie band, within ten times `min_tol`.
    pub near_tie: bool,
}

/// Collects one segment per lift within `min_tol` of the minimum and merges
/// segments leaving `p1` in the same direction.
pub fn segment_bundle(
    space: &QuotientSpace,
    p1: &ModelPoint,
    p2: &ModelPoint,
    min_tol: Option<f64>,
) -> Result<SegmentBundle> {
    let distance = quotient_distance(space, p1, p2)?;
    let min_tol = min_tol.unwrap_or_else(|| default_min_tol(distance));
    if !(min_tol > 0.0) {
        return domain(format!("min_tol must be positive, got {min_tol}"));
    }
    let model = space.model();
    let lifts = lifts_within(space, p1, p2, 10.0 * min_tol)?;
    let near_tie = lifts
        .iter()
        .any(|l| l.distance > distance + min_tol && l.distance <= distance + 10.0 * min_tol);
    let mut segments: Vec<GeodesicSegment> = Vec::new();
    for lift in lifts.iter().filter(|l| l.distance <= distance + min_tol) {
        let seg = model.segment_unchecked(p1, &lift.point);
        let duplicate = segments
            .iter()
            .any(|s| model.angle_between(&s.initial_direction, &seg.initial_direction) < DIR_TOL);
        if !duplicate {
            segments.push(seg);
        }
    }
    Ok(SegmentBundle {
        p1: p1.clone(),
        p2: p2.clone(),
        distance,
        order: segments.len(),
        segments,
        min_tol,
        dir_tol: DIR_TOL,
        near_tie,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxKind {
    PairMax,
    PointedMax,
}

/// Result of probing a claimed maximum in sampled directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeCertificate {
    pub radius: f64,
    pub n_dirs: usize,
    /// `min over directions of F(x) − F(x + r·v)`; positive means every probe
    /// decreased the objective.
    pub margin: f64,
}

/// A local maximum of the distance function (both points free) or of the
/// distance from a fixed first point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxPair {
    pub p1: ModelPoint,
    pub p2: ModelPoint,
    pub value: f64,
    pub kind: MaxKind,
    pub certificate: Option<ProbeCertificate>,
    pub seed_index: usize,
    pub iterations: usize,
    pub final_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Defaults to a tenth of the domain radius.
    pub initial_step: Option<f64>,
    pub shrink: f64,
    pub min_step: f64,
    pub max_iterations: usize,
    /// Sufficient increase is `coefficient · step²`.
    pub sufficient_increase: f64,
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            initial_step: None,
            shrink: 0.5,
            min_step: 1e-8,
            max_iterations: 200_000,
            sufficient_increase: 1e-4,
            execution: Execution::Parallel,
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<()> {
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return domain("initial step must be positive");
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return domain("shrink factor must lie in (0, 1)");
        }
        if !(self.min_step > 0.0) || self.max_iterations == 0 {
            return domain("min_step and max_iterations must be positive");
        }
        Ok(())
    }
}

/// The lifts that can realize the minimum anywhere within product distance
/// `delta` of the anchor pair `(y1, y2)`.
///
/// If `F(y) = F0` then at any `x` with `d(x1,y1) + d(x2,y2) ≤ delta`,
/// `F(x) ≤ F0 + delta` while every lift beyond `F0 + 2·delta` at `y` stays
/// above `F0 + delta` at `x`. Dropping those lifts leaves `F` unchanged.
struct Envelope {
    maps: Vec<Isometry>,
    inverses: Vec<Isometry>,
    y1: ModelPoint,
    y2: ModelPoint,
    delta: f64,
}

impl Envelope {
    fn build(space: &QuotientSpace, y1: &ModelPoint, y2: &ModelPoint, delta: f64) -> Result<Self> {
        let lifts = lifts_within(space, y1, y2, 2.0 * delta)?;
        let maps: Vec<Isometry> = lifts.into_iter().map(|l| l.element).collect();
        let inverses = maps.iter().map(Isometry::inverse).collect();
        Ok(Self {
            maps,
            inverses,
            y1: y1.clone(),
            y2: y2.clone(),
            delta,
        })
    }

    fn drift(&self, model: &ModelSpace, x1: &ModelPoint, x2: &ModelPoint) -> f64 {
        model.dist(&self.y1, x1) + model.dist(&self.y2, x2)
    }

    fn distances(&self, model: &ModelSpace, x1: &ModelPoint, x2: &ModelPoint, buf: &mut [f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|g| {
                g.apply_into(&x2.coords, buf);
                model.dist_coords(&x1.coords, buf)
            })
            .collect()
    }

    fn eval(&self, model: &ModelSpace, x1: &ModelPoint, x2: &ModelPoint, buf: &mut [f64]) -> f64 {
        let mut best = f64::INFINITY;
        for g in &self.maps {
            g.apply_into(&x2.coords, buf);
            best = best.min(model.dist_coords(&x1.coords, buf));
        }
        best
    }
}

/// Minimum-norm point of the convex hull of `vs`, found by trying supports
/// of increasing size and accepting the first one that satisfies the
/// optimality condition `v·x ≥ |x|²` for every `v`.
pub(crate) fn min_norm_point(vs: &[Vec<f64>]) -> Vec<f64> {
    let m = vs.len();
    let k = vs[0].len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let optimal = |x: &[f64]| {
        let xx = dot(x, x);
        vs.iter().all(|v| dot(v, x) >= xx - 1e-12)
    };
    for size in 1..=m.min(k + 1) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            if let Some(x) = affine_min_norm(vs, &idx) {
                if optimal(&x) {
                    return x;
                }
            }
            // next combination in lexicographic order
            let mut i = size;
            while i > 0 && idx[i - 1] == m - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    vs.iter()
        .min_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
        .cloned()
        .unwrap_or_default()
}

/// Minimum-norm point of the affine hull of the selected vectors when its
/// barycentric weights are nonnegative. Solves the KKT system
/// `[G 1; 1ᵀ 0] [λ; μ] = [0; 1]` by Gaussian elimination with partial pivoting.
fn affine_min_norm(vs: &[Vec<f64>], idx: &[usize]) -> Option<Vec<f64>> {
    let s = idx.len();
    let w = s + 2;
    let mut a = vec![0.0; (s + 1) * w];
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            a[r * w + c] = vs[i].iter().zip(&vs[j]).map(|(x, y)| x * y).sum::<f64>();
        }
        a[r * w + s] = 1.0;
        a[s * w + r] = 1.0;
    }
    a[s * w + s + 1] = 1.0;
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for col in 0..=s {
        let pivot = (col..=s).max_by(|&x, &y| a[x * w + col].abs().total_cmp(&a[y * w + col].abs()))?;
        if a[pivot * w + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for c in 0..w {
                a.swap(pivot * w + c, col * w + c);
            }
        }
        for r in col + 1..=s {
            let f = a[r * w + col] / a[col * w + col];
            if f != 0.0 {
                for c in col..w {
                    a[r * w + c] -= f * a[col * w + c];
                }
            }
        }
    }
    let mut sol = vec![0.0; s + 1];
    for r in (0..=s).rev() {
        let mut acc = a[r * w + s + 1];
        for c in r + 1..=s {
            acc -= a[r * w + c] * sol[c];
        }
        sol[r] = acc / a[r * w + r];
    }
    if sol.iter().any(|x| !x.is_finite()) || sol[..s].iter().any(|l| *l < -1e-12) {
        return None;
    }
    let mut x = vec![0.0; vs[0].len()];
    for (a, &i) in idx.iter().enumerate() {
        for (xk, vk) in x.iter_mut().zip(&vs[i]) {
            *xk += sol[a] * vk;
        }
    }
    Some(x)
}

/// A point of the search space in product-frame coordinates: `2n` numbers
/// when both points move, `n` when only the second one does.
struct Frames {
    f1: Vec<Vec<f64>>,
    f2: Vec<Vec<f64>>,
}

impl Frames {
    fn at(model: &ModelSpace, x1: &ModelPoint, x2: &ModelPoint) -> Self {
        Self {
            f1: model.tangent_frame(x1),
            f2: model.tangent_frame(x2),
        }
    }

    fn combine(frame: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; frame[0].len()];
        for (e, c) in frame.iter().zip(coeffs) {
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi += c * ei;
            }
        }
        v
    }

    /// Moves `(x1, x2)` by `step · dir`.
    fn shift(
        &self,
        model: &ModelSpace,
        x1: &ModelPoint,
        x2: &ModelPoint,
        dir: &[f64],
        step: f64,
        pair: bool,
    ) -> (ModelPoint, ModelPoint) {
        let n = model.dimension();
        let scaled: Vec<f64> = dir.iter().map(|c| c * step).collect();
        if pair {
            let v1 = Self::combine(&self.f1, &scaled[..n]);
            let v2 = Self::combine(&self.f2, &scaled[n..]);
            (model.exp_unchecked(x1, &v1), model.exp_unchecked(x2, &v2))
        } else {
            let v2 = Self::combine(&self.f2, &scaled);
            (x1.clone(), model.exp_unchecked(x2, &v2))
        }
    }

    fn coords(model: &ModelSpace, frame: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        frame.iter().map(|e| model.inner(e, v)).collect()
    }
}

struct Outcome {
    x1: ModelPoint,
    x2: ModelPoint,
    iterations: usize,
    step: f64,
}

/// Steepest-ascent direction of `min_g f_g` over the lifts within `eps` of
/// the current value, or `None` when the active gradients trap the origin.
fn ascent_direction(
    model: &ModelSpace,
    env: &Envelope,
    frames: &Frames,
    x1: &ModelPoint,
    x2: &ModelPoint,
    eps: f64,
    pair: bool,
) -> Option<Vec<f64>> {
    let mut buf = vec![0.0; x2.coords.len()];
    let dists = env.distances(model, x1, x2, &mut buf);
    let value = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(value > 0.0) {
        return None;
    }
    let mut active: Vec<(f64, usize)> = dists
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= value + eps)
        .map(|(i, d)| (*d, i))
        .collect();
    active.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    active.truncate(12);
    let grads: Vec<Vec<f64>> = active
        .iter()
        .map(|&(d, i)| {
            let target = env.maps[i].apply_unchecked(model, x2);
            let g2 = Frames::coords(model, &frames.f2, &model.log_map_unchecked(x2, &env.inverses[i].apply_unchecked(model, x1)));
            let mut g: Vec<f64> = Vec::with_capacity(2 * g2.len());
            if pair {
                g.extend(Frames::coords(model, &frames.f1, &model.log_map_unchecked(x1, &target)));
            }
            g.extend(g2);
            g.iter().map(|c| -c / d).collect()
        })
        .collect();
    let x = min_norm_point(&grads);
    let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    (norm > 1e-12).then(|| x.iter().map(|c| c / norm).collect())
}

fn pattern_search(
    space: &QuotientSpace,
    start1: &ModelPoint,
    start2: &ModelPoint,
    pair: bool,
    opts: &SearchOptions,
) -> Result<Outcome> {
    let model = *space.model();
    let n = model.dimension();
    let m = if pair { 2 * n } else { n };
    let mut step = opts.initial_step.unwrap_or(0.1 * space.domain_radius());
    let mut x1 = start1.clone();
    let mut x2 = start2.clone();
    let mut buf = vec![0.0; x2.coords.len()];
    let mut env = Envelope::build(space, &x1, &x2, 4.0 * step)?;
    let mut value = env.eval(&model, &x1, &x2, &mut buf);
    let mut iterations = 0;

    let mut frames = Frames::at(&model, &x1, &x2);
    while step >= opts.min_step {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(GeoError::NonConvergence {
                iterations: opts.max_iterations,
                step,
                best_value: value,
                best_p1: x1.coords.clone(),
                best_p2: x2.coords.clone(),
            });
        }
        if env.drift(&model, &x1, &x2) + step > env.delta {
            // re-anchor at a reduced representative; F is deck invariant
            if pair {
                x1 = space.reduce(&x1).0;
            }
            x2 = space.reduce(&x2).0;
            env = Envelope::build(space, &x1, &x2, 4.0 * step)?;
            value = env.eval(&model, &x1, &x2, &mut buf);
            frames = Frames::at(&model, &x1, &x2);
        }
        let eps = 2.0 * std::f64::consts::SQRT_2 * step;
        let mut polls: Vec<Vec<f64>> = Vec::with_capacity(2 * m + 1);
        if let Some(d) = ascent_direction(&model, &env, &frames, &x1, &x2, eps, pair) {
            polls.push(d);
        }
        for i in 0..m {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; m];
                d[i] = sign;
                polls.push(d);
            }
        }
        let threshold = value + opts.sufficient_increase * step * step;
        let mut best: Option<(f64, ModelPoint, ModelPoint)> = None;
        for d in &polls {
            let (y1, y2) = frames.shift(&model, &x1, &x2, d, step, pair);
            let f = env.eval(&model, &y1, &y2, &mut buf);
            if f > threshold && best.as_ref().is_none_or(|b| f > b.0) {
                best = Some((f, y1, y2));
            }
        }
        match best {
            Some((f, y1, y2)) => {
                value = f;
                x1 = y1;
                x2 = y2;
                frames = Frames::at(&model, &x1, &x2);
            }
            None => step *= opts.shrink,
        }
    }
    Ok(Outcome {
        x1,
        x2,
        iterations,
        step,
    })
}

fn multi_start(
    space: &QuotientSpace,
    seeds: &[(ModelPoint, ModelPoint)],
    pair: bool,
    opts: &SearchOptions,
) -> Result<MaxPair> {
    opts.validate()?;
    if seeds.is_empty() {
        return domain("at least one seed is required");
    }
    let model = space.model();
    for (a, b) in seeds {
        model.validate(a)?;
        model.validate(b)?;
    }
    // warm the shared deck cache once instead of racing to fill it
    space.deck_ball_covering(4.0 * space.domain_radius())?;
    let runs = map_indexed(opts.execution, seeds.len(), |i| {
        let (a, b) = &seeds[i];
        let out = pattern_search(space, a, b, pair, opts)?;
        let value = quotient_distance(space, &out.x1, &out.x2)?;
        Ok::<_, GeoError>((value, out))
    });
    let mut best: Option<(f64, usize, Outcome)> = None;
    let mut first_err: Option<GeoError> = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok((v, out)) => {
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, i, out));
                }
            }
            Err(e @ GeoError::Budget { .. }) => return Err(e),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((value, seed_index, out)) => Ok(MaxPair {
            p1: out.x1,
            p2: out.x2,
            value,
            kind: if pair { MaxKind::PairMax } else { MaxKind::PointedMax },
            certificate: None,
            seed_index,
            iterations: out.iterations,
            final_step: out.step,
        }),
        None => Err(first_err.expect("no seeds ran")),
    }
}

/// Multi-start pattern search for a local maximum of `(p1, p2) ↦ d(p1, p2)`.
pub fn find_max_pair(
    space: &QuotientSpace,
    seeds: &[(ModelPoint, ModelPoint)],
    opts: &SearchOptions,
) -> Result<MaxPair> {
    multi_start(space, seeds, true, opts)
}

/// Multi-start pattern search for a local maximum of `p ↦ d(p1, p)`.
pub fn find_farthest_point(
    space: &QuotientSpace,
    p1: &ModelPoint,
    seeds: &[ModelPoint],
    opts: &SearchOptions,
) -> Result<MaxPair> {
    let pairs: Vec<(ModelPoint, ModelPoint)> = seeds.iter().map(|s| (p1.clone(), s.clone())).collect();
    multi_start(space, &pairs, false, opts)
}

/// Deterministic pseudo-random points spread over the fundamental domain.
pub fn seed_points(space: &QuotientSpace, count: usize, seed: u64) -> Vec<ModelPoint> {
    let model = space.model();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.dimension();
    (0..count)
        .map(|_| {
            if let Some(basis) = space.lattice_basis() {
                let mut c = vec![0.0; n];
                for b in &basis {
                    let u: f64 = rand::Rng::random_range(&mut rng, -0.5..0.5);
                    for (ci, bi) in c.iter_mut().zip(b) {
                        *ci += u * bi;
                    }
                }
                ModelPoint::new(c)
            } else {
                let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                let r = space.domain_radius() * rand::Rng::random_range(&mut rng, 0.0f64..1.0).sqrt();
                let mut v = vec![0.0];
                v.extend(dir.iter().map(|x| x / norm * r));
                space.reduce(&model.exp_unchecked(&model.origin(), &v)).0
            }
        })
        .collect()
}

/// Seed pairs for [`find_max_pair`].
pub fn seed_pairs(space: &QuotientSpace, count: usize, seed: u64) -> Vec<(ModelPoint, ModelPoint)> {
    let pts = seed_points(space, 2 * count, seed);
    pts.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()
}

fn probe_dim(space: &QuotientSpace, pair: &MaxPair) -> usize {
    let n = space.model().dimension();
    match pair.kind {
        MaxKind::PairMax => 2 * n,
        MaxKind::PointedMax => n,
    }
}

/// Probes `pair` at `radius` in `n_dirs` Gaussian directions of the product
/// tangent space, drawn from a seeded stream, using the full quotient
/// distance at each probe.
pub fn strict_max_probe(
    space: &QuotientSpace,
    pair: &MaxPair,
    radius: f64,
    n_dirs: usize,
    seed: u64,
) -> Result<ProbeCertificate> {
    let m = probe_dim(space, pair);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..n_dirs)
        .map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    strict_max_probe_along(space, pair, radius, &dirs)
}

/// Like [`strict_max_probe`] with caller-chosen directions in frame
/// coordinates (`2n` entries for a pair maximum, `n` for a pointed one).
pub fn strict_max_probe_along(
    space: &QuotientSpace,
    pair: &MaxPair,
    radius: f64,
    dirs: &[Vec<f64>],
) -> Result<ProbeCertificate> {
    if !(radius >= 0.0) {
        return domain(format!("probe radius must be nonnegative, got {radius}"));
    }
    let model = *space.model();
    model.validate(&pair.p1)?;
    model.validate(&pair.p2)?;
    let m = probe_dim(space, pair);
    if dirs.iter().any(|d| d.len() != m) {
        return domain(format!("probe directions must have {m} components"));
    }
    let cert = |margin| ProbeCertificate {
        radius,
        n_dirs: dirs.len(),
        margin,
    };
    if radius == 0.0 || dirs.is_empty() {
        return Ok(cert(0.0));
    }
    let base = quotient_distance(space, &pair.p1, &pair.p2)?;
    let frames = Frames::at(&model, &pair.p1, &pair.p2);
    let is_pair = pair.kind == MaxKind::PairMax;
    let drops = map_indexed(Execution::Parallel, dirs.len(), |i| {
        let d = &dirs[i];
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let unit: Vec<f64> = d.iter().map(|x| x / norm).collect();
        let (y1, y2) = frames.shift(&model, &pair.p1, &pair.p2, &unit, radius, is_pair);
        Ok(base - quotient_distance(space, &y1, &y2)?)
    });
    let mut margin = f64::INFINITY;
    for d in drops {
        margin = margin.min(d?);
    }
    Ok(cert(margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deck::{octagon_group, octagon_group_with_curvature};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn square() -> QuotientSpace {
        QuotientSpace::lattice(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn pt(c: &[f64]) -> ModelPoint {
        ModelPoint::new(c.to_vec())
    }

    /// Brute-force torus distance over a wide integer box.
    fn brute_torus(basis: &[Vec<f64>], a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
        let mut ds = Vec::new();
        for i in -12..=12 {
            for j in -12..=12 {
                let x = b[0] + i as f64 * basis[0][0] + j as f64 * basis[1][0] - a[0];
                let y = b[1] + i as f64 * basis[0][1] + j as f64 * basis[1][1] - a[1];
                ds.push((x * x + y * y).sqrt());
            }
        }
        ds.sort_by(f64::total_cmp);
        (ds[0], ds)
    }

    #[test]
    fn square_torus_examples() {
        let t = square();
        assert_abs_diff_eq!(quotient_distance(&t, &pt(&[0.0, 0.0]), &pt(&[0.5, 0.0])).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            quotient_distance(&t, &pt(&[0.0, 0.0]), &pt(&[0.5, 0.5])).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(quotient_distance(&t, &pt(&[0.3, 0.1]), &pt(&[0.3, 0.1])).unwrap(), 0.0);

        let b = segment_bundle(&t, &pt(&[0.0, 0.0]), &pt(&[0.5, 0.5]), None).unwrap();
        assert_eq!(b.order, 4);
        let b = segment_bundle(&t, &pt(&[0.0, 0.0]), &pt(&[0.5, 0.0]), None).unwrap();
        assert_eq!(b.order, 2);
        let b = segment_bundle(&t, &pt(&[0.0, 0.0]), &pt(&[0.2, 0.1]), None).unwrap();
        assert_eq!(b.order, 1);
        assert!(!b.near_tie);
    }

    #[test]
    fn torus_distance_matches_brute_force() {
        let basis = vec![vec![1.0, 0.0], vec![0.35, 1.05]];
        let t = QuotientSpace::lattice(&basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let a = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let b = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let got = quotient_distance(&t, &pt(&a), &pt(&b)).unwrap();
            let (want, all) = brute_torus(&basis, &a, &b);
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            let tol = default_min_tol(want);
            let order = all.iter().filter(|d| **d <= want + tol).count();
            assert_eq!(segment_bundle(&t, &pt(&a), &pt(&b), None).unwrap().order, order);
        }
    }

    #[test]
    fn lifts_bound_the_distance_and_respect_deck_invariance() {
        let g = octagon_group();
        let model = *g.model();
        let pts = seed_points(&g, 40, 9);
        for w in pts.windows(2) {
            let d = quotient_distance(&g, &w[0], &w[1]).unwrap();
            for o in g.orbit(&w[1], &w[0], d + 2.0, Execution::Sequential).unwrap() {
                assert!(d <= model.dist(&w[0], &o.point) + 1e-12);
                let moved = quotient_distance(&g, &w[0], &o.point).unwrap();
                assert_abs_diff_eq!(moved, d, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hyperbolic_metric_axioms() {
        let g = octagon_group();
        let pts = seed_points(&g, 300, 1);
        for t in pts.chunks(3) {
            let ab = quotient_distance(&g, &t[0], &t[1]).unwrap();
            let ba = quotient_distance(&g, &t[1], &t[0]).unwrap();
            let bc = quotient_distance(&g, &t[1], &t[2]).unwrap();
            let ac = quotient_distance(&g, &t[0], &t[2]).unwrap();
            assert_abs_diff_eq!(ab, ba, epsilon = 1e-9);
            assert!(ac <= ab + bc + 1e-9);
        }
    }

    #[test]
    fn nearby_points_have_order_one() {
        let g = octagon_group();
        let model = *g.model();
        let p = model.polar(0.7, 0.2);
        let q = model.exp_unchecked(&p, &model.project_tangent(&p, &[0.0, 0.1, 0.2]));
        assert!(model.dist(&p, &q) < g.injectivity_floor() / 2.0);
        let b = segment_bundle(&g, &p, &q, None).unwrap();
        assert_eq!(b.order, 1);
        assert_abs_diff_eq!(b.distance, model.dist(&p, &q), epsilon = 1e-12);
    }

    #[test]
    fn center_to_vertex_has_eight_segments() {
        let g = octagon_group();
        let model = *g.model();
        let rho = g.domain_radius();
        let vertex = model.polar(rho, PI_8);
        let b = segment_bundle(&g, g.base(), &vertex, None).unwrap();
        assert_eq!(b.order, 8);
        assert_abs_diff_eq!(b.distance, rho, epsilon = 1e-9);
        for s in &b.segments {
            assert_abs_diff_eq!(s.length, b.distance, epsilon = b.min_tol);
        }
    }

    const PI_8: f64 = std::f64::consts::PI / 8.0;

    #[test]
    fn order_survives_curvature_rescaling() {
        let g1 = octagon_group();
        let g4 = octagon_group_with_curvature(-4.0).unwrap();
        let pts = seed_points(&g1, 20, 4);
        let mut extra: Vec<ModelPoint> = vec![g1.model().polar(g1.domain_radius(), PI_8)];
        extra.push(g1.model().polar((1.0 + 2f64.sqrt()).acosh(), 0.0));
        for w in pts.chunks(2).map(|c| (c[0].clone(), c[1].clone())).chain(extra.into_iter().map(|p| (g1.base().clone(), p))) {
            let half = |p: &ModelPoint| ModelPoint::new(p.coords.iter().map(|x| x * 0.5).collect());
            let b1 = segment_bundle(&g1, &w.0, &w.1, None).unwrap();
            let b4 = segment_bundle(&g4, &half(&w.0), &half(&w.1), None).unwrap();
            assert_eq!(b1.order, b4.order);
            assert_abs_diff_eq!(b4.distance, b1.distance / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn lifts_are_convex_along_geodesics() {
        let g = octagon_group();
        let model = *g.model();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = seed_points(&g, 30, 3);
        for w in pts.chunks(2) {
            for lift in lifts_within(&g, &w[0], &w[1], 1.0).unwrap() {
                let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let v = model.project_tangent(&w[0], &v);
                let h = 1e-3;
                let at = |t: f64| model.dist(&model.exp_unchecked(&w[0], &v.iter().map(|c| c * t).collect::<Vec<_>>()), &lift.point);
                for k in -5..5 {
                    let t = k as f64 * 0.1;
                    let second = at(t + h) - 2.0 * at(t) + at(t - h);
                    assert!(second >= -1e-9, "second difference {second}");
                }
            }
        }
    }

    #[test]
    fn min_norm_point_examples() {
        let x = min_norm_point(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_abs_diff_eq!(x[..], [0.5, 0.5][..], epsilon = 1e-12);
        let x = min_norm_point(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]);
        assert_abs_diff_eq!(x[..], [0.0, 0.0][..], epsilon = 1e-12);
        let x = min_norm_point(&[vec![2.0, 1.0], vec![2.0, -1.0], vec![3.0, 0.0]]);
        assert_abs_diff_eq!(x[..], [2.0, 0.0][..], epsilon = 1e-12);
    }

    #[test]
    fn min_norm_point_beats_random_hull_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let m = rng.random_range(1..7);
            let vs: Vec<Vec<f64>> = (0..m).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let x = min_norm_point(&vs);
            let nx: f64 = x.iter().map(|c| c * c).sum();
            for _ in 0..200 {
                let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                let mut y = vec![0.0; 4];
                for (wi, v) in w.iter().zip(&vs) {
                    for (yk, vk) in y.iter_mut().zip(v) {
                        *yk += wi / s * vk;
                    }
                }
                assert!(nx <= y.iter().map(|c| c * c).sum::<f64>() + 1e-12);
            }
        }
    }

    #[test]
    fn square_torus_pair_max() {
        let t = square();
        let opts = SearchOptions::default();
        let m = find_max_pair(&t, &[(pt(&[0.1, 0.1]), pt(&[0.4, 0.6]))], &opts).unwrap();
        // the search resolves the maximizer to the final step size
        assert_abs_diff_eq!(m.value, 0.5f64.sqrt(), epsilon = 1e-7);
        let diff: Vec<f64> = m.p2.coords.iter().zip(&m.p1.coords).map(|(a, b)| a - b - 0.5).collect();
        assert!(diff.iter().all(|d| (d - d.round()).abs() < 1e-7), "{diff:?}");
        assert!(m.final_step < opts.min_step);
    }

    #[test]
    fn square_torus_farthest_point_and_fixed_point() {
        let t = square();
        let opts = SearchOptions::default();
        let seeds = seed_points(&t, 4, 0);
        let m = find_farthest_point(&t, &pt(&[0.0, 0.0]), &seeds, &opts).unwrap();
        assert_abs_diff_eq!(m.value, 0.5f64.sqrt(), epsilon = 1e-7);
        for c in &m.p2.coords {
            assert!((c.abs() - 0.5).abs() < 1e-7);
        }
        let fixed = find_farthest_point(&t, &pt(&[0.0, 0.0]), &[pt(&[0.5, 0.5])], &opts).unwrap();
        assert_eq!(fixed.p2, pt(&[0.5, 0.5]));
        let fixed = find_max_pair(&t, &[(pt(&[0.0, 0.0]), pt(&[0.5, 0.5]))], &opts).unwrap();
        assert_eq!(fixed.p1, pt(&[0.0, 0.0]));
        assert_eq!(fixed.p2, pt(&[0.5, 0.5]));
    }

    #[test]
    fn torus_diagonal_probe_is_flat() {
        let t = square();
        let m = find_max_pair(&t, &[(pt(&[0.0, 0.0]), pt(&[0.5, 0.5]))], &SearchOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dirs: Vec<Vec<f64>> = (0..32)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                vec![a.cos(), a.sin(), a.cos(), a.sin()]
            })
            .collect();
        let c = strict_max_probe_along(&t, &m, 1e-3, &dirs).unwrap();
        assert!(c.margin.abs() < 1e-12);
        assert_eq!(strict_max_probe(&t, &m, 0.0, 16, 0).unwrap().margin, 0.0);
    }

    #[test]
    fn search_rejects_bad_input() {
        let t = square();
        assert!(find_max_pair(&t, &[], &SearchOptions::default()).is_err());
        let opts = SearchOptions {
            shrink: 1.5,
            ..SearchOptions::default()
        };
        assert!(find_max_pair(&t, &seed_pairs(&t, 1, 0), &opts).is_err());
        let opts = SearchOptions {
            max_iterations: 3,
            ..SearchOptions::default()
        };
        match find_max_pair(&t, &seed_pairs(&t, 1, 0), &opts) {
            Err(GeoError::NonConvergence { best_p1, .. }) => assert_eq!(best_p1.len(), 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn bundle_serializes() {
        let b = segment_bundle(&square(), &pt(&[0.0, 0.0]), &pt(&[0.5, 0.5]), None).unwrap();
        let v: serde_json::Value = serde_json::to_value(&b).unwrap();
        assert_eq!(v["order"], 4);
        assert_eq!(v["segments"].as_array().unwrap().len(), 4);
        assert!(v["segments"][0]["initial_direction"].is_array());
        assert_eq!(v["near_tie"], false);
    }
}
