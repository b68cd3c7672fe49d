//! Simply connected constant-curvature models: Euclidean space and the
//! hyperboloid model of hyperbolic space with curvature `χ < 0`.
//!
//! Hyperbolic points live on the upper sheet of `⟨x, x⟩ = 1/χ` where
//! `⟨x, y⟩ = -x₀y₀ + Σ xᵢyᵢ`. Writing `R = 1/√(-χ)`, the sheet is `R` times
//! the unit hyperboloid and distances scale by `R`. Every operation that
//! produces a point re-projects it by recomputing the time coordinate from the
//! spatial ones, which keeps long chains of isometries on the sheet.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Below this argument offset `acosh(1 + u)` switches to its series.
const ACOSH_SERIES_CUTOFF: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Euclidean,
    Hyperbolic,
}

/// A simply connected model space of constant curvature `χ ≤ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    geometry: Geometry,
    dimension: usize,
    curvature: f64,
}

/// A point of a model space, stored in ambient coordinates (`n` for
/// Euclidean space, `n + 1` hyperboloid coordinates for hyperbolic space).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelPoint {
    pub coords: Vec<f64>,
}

impl ModelPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Vec<f64>> for ModelPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// A minimizing geodesic parametrized proportionally to arc length on `[0, 1]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicSegment {
    pub start: ModelPoint,
    pub end: ModelPoint,
    pub length: f64,
    /// Unit tangent at `start`; the zero vector for a constant segment.
    pub initial_direction: Vec<f64>,
    #[serde(skip)]
    space: Option<ModelSpace>,
}

impl GeodesicSegment {
    /// The point at parameter `t`. Values outside `[0, 1]` follow the
    /// extension of the same geodesic.
    pub fn at(&self, t: f64) -> ModelPoint {
        let space = self.space.expect("segment built by a model space");
        if self.length == 0.0 {
            return self.start.clone();
        }
        let v: Vec<f64> = self
            .initial_direction
            .iter()
            .map(|x| x * t * self.length)
            .collect();
        space.exp_unchecked(&self.start, &v)
    }

    /// Velocity at parameter `t` as an ambient vector (length = segment length).
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let space = self.space.expect("segment built by a model space");
        if self.length == 0.0 {
            return vec![0.0; self.start.coords.len()];
        }
        if t == 0.0 {
            return scale(&self.initial_direction, self.length);
        }
        let here = self.at(t);
        let back = self.at(0.0);
        // direction at `here` pointing away from the start
        let towards_start = space.log_map_unchecked(&here, &back);
        let norm = space.tangent_norm(&towards_start);
        if t > 0.0 {
            scale(&towards_start, -self.length / norm)
        } else {
            scale(&towards_start, self.length / norm)
        }
    }

    pub fn space(&self) -> ModelSpace {
        self.space.expect("segment built by a model space")
    }
}

/// A geodesic triangle in the 2-dimensional model of curvature `χ` whose side
/// lengths reproduce a given triple of distances.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonTriangle {
    pub space: ModelSpace,
    /// `[d(v0, v1), d(v0, v2), d(v1, v2)]`.
    pub side_lengths: [f64; 3],
    pub vertices: [ModelPoint; 3],
    /// Set when the triangle collapses onto a single geodesic.
    pub degenerate: bool,
}

impl ComparisonTriangle {
    /// The point on side `side` (0: v0→v1, 1: v0→v2, 2: v1→v2) at arc length
    /// `s` from the side's first vertex.
    pub fn comparison_point(&self, side: usize, s: f64) -> Result<ModelPoint> {
        let (a, b) = match side {
            0 => (0, 1),
            1 => (0, 2),
            2 => (1, 2),
            _ => return domain(format!("side index {side} is not 0, 1 or 2")),
        };
        let len = self.side_lengths[side];
        let slack = 1e-12 * (1.0 + len);
        if !(s >= -slack && s <= len + slack) {
            return domain(format!("arc parameter {s} outside [0, {len}]"));
        }
        if len == 0.0 {
            return Ok(self.vertices[a].clone());
        }
        let t = (s / len).clamp(0.0, 1.0);
        self.space
            .interpolate(&self.vertices[a], &self.vertices[b], t)
    }
}

impl ModelSpace {
    pub fn euclidean(dimension: usize) -> Result<Self> {
        if dimension < 2 {
            return domain(format!("dimension {dimension} < 2"));
        }
        Ok(Self {
            geometry: Geometry::Euclidean,
            dimension,
            curvature: 0.0,
        })
    }

    pub fn hyperbolic(dimension: usize, curvature: f64) -> Result<Self> {
        if dimension < 2 {
            return domain(format!("dimension {dimension} < 2"));
        }
        if !(curvature < 0.0 && curvature.is_finite()) {
            return domain(format!("hyperbolic curvature must be negative, got {curvature}"));
        }
        Ok(Self {
            geometry: Geometry::Hyperbolic,
            dimension,
            curvature,
        })
    }

    /// The 2-dimensional model of curvature `χ ≤ 0`.
    pub fn plane(curvature: f64) -> Result<Self> {
        if curvature == 0.0 {
            Self::euclidean(2)
        } else {
            Self::hyperbolic(2, curvature)
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.geometry == Geometry::Hyperbolic
    }

    /// Curvature radius `1/√(-χ)`; 1 for Euclidean space.
    pub fn radius(&self) -> f64 {
        match self.geometry {
            Geometry::Euclidean => 1.0,
            Geometry::Hyperbolic => 1.0 / (-self.curvature).sqrt(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.geometry {
            Geometry::Euclidean => self.dimension,
            Geometry::Hyperbolic => self.dimension + 1,
        }
    }

    pub fn origin(&self) -> ModelPoint {
        let mut c = vec![0.0; self.ambient_dim()];
        if self.is_hyperbolic() {
            c[0] = self.radius();
        }
        ModelPoint::new(c)
    }

    /// Ambient bilinear form: the dot product, or the Minkowski form.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.geometry {
            Geometry::Euclidean => dot(u, v),
            Geometry::Hyperbolic => minkowski(u, v),
        }
    }

    /// Norm of a tangent vector.
    pub fn tangent_norm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Checks shape and, for hyperbolic points, the sheet normalization.
    pub fn validate(&self, p: &ModelPoint) -> Result<()> {
        if p.coords.len() != self.ambient_dim() {
            return domain(format!(
                "point has {} coordinates, expected {}",
                p.coords.len(),
                self.ambient_dim()
            ));
        }
        if p.coords.iter().any(|x| !x.is_finite()) {
            return domain("point has non-finite coordinates");
        }
        if self.is_hyperbolic() {
            let r2 = self.radius().powi(2);
            let scale = dot(&p.coords, &p.coords).max(r2);
            let residual = minkowski(&p.coords, &p.coords) + r2;
            if p.coords[0] <= 0.0 || residual.abs() > 1e-9 * scale {
                return domain(format!(
                    "point is not on the upper sheet of the curvature {} hyperboloid \
                     (residual {residual:e})",
                    self.curvature
                ));
            }
        }
        Ok(())
    }

    /// Validates and re-projects a point given in ambient coordinates.
    pub fn point(&self, coords: Vec<f64>) -> Result<ModelPoint> {
        let p = ModelPoint::new(coords);
        self.validate(&p)?;
        Ok(self.project(p))
    }

    /// Lifts spatial coordinates onto the sheet (identity for Euclidean space).
    pub fn from_spatial(&self, spatial: &[f64]) -> Result<ModelPoint> {
        if spatial.len() != self.dimension {
            return domain(format!(
                "expected {} spatial coordinates, got {}",
                self.dimension,
                spatial.len()
            ));
        }
        match self.geometry {
            Geometry::Euclidean => Ok(ModelPoint::new(spatial.to_vec())),
            Geometry::Hyperbolic => {
                let mut c = Vec::with_capacity(self.dimension + 1);
                c.push(0.0);
                c.extend_from_slice(spatial);
                Ok(self.project(ModelPoint::new(c)))
            }
        }
    }

    /// The point at distance `dist` from the origin along the unit direction
    /// `(cos θ, sin θ)` of the first two spatial axes.
    pub fn polar(&self, dist: f64, angle: f64) -> ModelPoint {
        let mut c = vec![0.0; self.ambient_dim()];
        match self.geometry {
            Geometry::Euclidean => {
                c[0] = dist * angle.cos();
                c[1] = dist * angle.sin();
            }
            Geometry::Hyperbolic => {
                let r = self.radius();
                let sh = r * (dist / r).sinh();
                c[0] = r * (dist / r).cosh();
                c[1] = sh * angle.cos();
                c[2] = sh * angle.sin();
            }
        }
        self.project(ModelPoint::new(c))
    }

    /// Re-projection onto the hyperboloid sheet.
    pub fn project(&self, mut p: ModelPoint) -> ModelPoint {
        if self.is_hyperbolic() {
            let s: f64 = p.coords[1..].iter().map(|x| x * x).sum();
            p.coords[0] = (self.radius().powi(2) + s).sqrt();
        }
        p
    }

    pub fn distance(&self, p: &ModelPoint, q: &ModelPoint) -> Result<f64> {
        self.validate(p)?;
        self.validate(q)?;
        Ok(self.dist(p, q))
    }

    /// Distance without input validation; the hot path of every search.
    #[inline]
    pub fn dist(&self, p: &ModelPoint, q: &ModelPoint) -> f64 {
        self.dist_coords(&p.coords, &q.coords)
    }

    #[inline]
    pub(crate) fn dist_coords(&self, p: &[f64], q: &[f64]) -> f64 {
        match self.geometry {
            Geometry::Euclidean => p
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Geometry::Hyperbolic => {
                let r = self.radius();
                r * acosh_1p(chord_sq(p, q) / (2.0 * r * r))
            }
        }
    }

    pub fn interpolate(&self, p: &ModelPoint, q: &ModelPoint, t: f64) -> Result<ModelPoint> {
        if !(0.0..=1.0).contains(&t) {
            return domain(format!("interpolation parameter {t} outside [0, 1]"));
        }
        self.validate(p)?;
        self.validate(q)?;
        Ok(self.interpolate_unchecked(p, q, t))
    }

    pub fn interpolate_unchecked(&self, p: &ModelPoint, q: &ModelPoint, t: f64) -> ModelPoint {
        if t == 0.0 {
            return p.clone();
        }
        if t == 1.0 {
            return q.clone();
        }
        match self.geometry {
            Geometry::Euclidean => ModelPoint::new(
                p.coords
                    .iter()
                    .zip(&q.coords)
                    .map(|(a, b)| a + t * (b - a))
                    .collect(),
            ),
            Geometry::Hyperbolic => {
                let theta = self.dist(p, q) / self.radius();
                let (wp, wq) = if theta < 1e-12 {
                    (1.0 - t, t)
                } else {
                    let s = theta.sinh();
                    (((1.0 - t) * theta).sinh() / s, (t * theta).sinh() / s)
                };
                self.project(ModelPoint::new(
                    p.coords
                        .iter()
                        .zip(&q.coords)
                        .map(|(a, b)| wp * a + wq * b)
                        .collect(),
                ))
            }
        }
    }

    pub fn segment(&self, p: &ModelPoint, q: &ModelPoint) -> Result<GeodesicSegment> {
        self.validate(p)?;
        self.validate(q)?;
        Ok(self.segment_unchecked(p, q))
    }

    pub fn segment_unchecked(&self, p: &ModelPoint, q: &ModelPoint) -> GeodesicSegment {
        let v = self.log_map_unchecked(p, q);
        let length = self.tangent_norm(&v);
        let initial_direction = if length > 0.0 {
            scale(&v, 1.0 / length)
        } else {
            vec![0.0; v.len()]
        };
        GeodesicSegment {
            start: p.clone(),
            end: q.clone(),
            length,
            initial_direction,
            space: Some(*self),
        }
    }

    /// A segment starting at `p` with the given initial velocity.
    pub fn segment_from_velocity(&self, p: &ModelPoint, v: &[f64]) -> Result<GeodesicSegment> {
        let end = self.exp_map(p, v)?;
        let length = self.tangent_norm(v);
        let initial_direction = if length > 0.0 {
            scale(v, 1.0 / length)
        } else {
            vec![0.0; v.len()]
        };
        Ok(GeodesicSegment {
            start: p.clone(),
            end,
            length,
            initial_direction,
            space: Some(*self),
        })
    }

    /// Tangent vector at `p` pointing to `q` with norm `d(p, q)`.
    pub fn log_map(&self, p: &ModelPoint, q: &ModelPoint) -> Result<Vec<f64>> {
        self.validate(p)?;
        self.validate(q)?;
        Ok(self.log_map_unchecked(p, q))
    }

    pub fn log_map_unchecked(&self, p: &ModelPoint, q: &ModelPoint) -> Vec<f64> {
        let diff: Vec<f64> = q.coords.iter().zip(&p.coords).map(|(a, b)| a - b).collect();
        match self.geometry {
            Geometry::Euclidean => diff,
            Geometry::Hyperbolic => {
                let r2 = self.radius().powi(2);
                let m = minkowski(&diff, &diff).max(0.0);
                // q + (⟨p,q⟩/R²) p written around q - p to avoid cancellation
                let c = -m / (2.0 * r2);
                let u: Vec<f64> = diff.iter().zip(&p.coords).map(|(d, x)| d + c * x).collect();
                let un = minkowski(&u, &u).max(0.0).sqrt();
                if un == 0.0 {
                    return vec![0.0; u.len()];
                }
                let d = self.dist(p, q);
                scale(&u, d / un)
            }
        }
    }

    /// Checks that `v` is tangent at `p` (Minkowski-orthogonal in the
    /// hyperbolic case).
    pub fn check_tangent(&self, p: &ModelPoint, v: &[f64]) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return domain(format!(
                "tangent vector has {} coordinates, expected {}",
                v.len(),
                self.ambient_dim()
            ));
        }
        if self.is_hyperbolic() {
            let scale_p = dot(&p.coords, &p.coords).sqrt();
            let scale_v = dot(v, v).sqrt();
            let off = minkowski(&p.coords, v);
            if off.abs() > 1e-9 * (1.0 + scale_p * scale_v) {
                return domain(format!("vector is not tangent at p (⟨p, v⟩ = {off:e})"));
            }
        }
        Ok(())
    }

    pub fn exp_map(&self, p: &ModelPoint, v: &[f64]) -> Result<ModelPoint> {
        self.validate(p)?;
        self.check_tangent(p, v)?;
        Ok(self.exp_unchecked(p, v))
    }

    pub fn exp_unchecked(&self, p: &ModelPoint, v: &[f64]) -> ModelPoint {
        match self.geometry {
            Geometry::Euclidean => {
                ModelPoint::new(p.coords.iter().zip(v).map(|(a, b)| a + b).collect())
            }
            Geometry::Hyperbolic => {
                let s = self.tangent_norm(v);
                if s == 0.0 {
                    return p.clone();
                }
                let r = self.radius();
                let ch = (s / r).cosh();
                let sh = r * (s / r).sinh() / s;
                self.project(ModelPoint::new(
                    p.coords.iter().zip(v).map(|(a, b)| ch * a + sh * b).collect(),
                ))
            }
        }
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `p`.
    pub fn project_tangent(&self, p: &ModelPoint, v: &[f64]) -> Vec<f64> {
        match self.geometry {
            Geometry::Euclidean => v.to_vec(),
            Geometry::Hyperbolic => {
                let c = minkowski(v, &p.coords) / self.radius().powi(2);
                v.iter().zip(&p.coords).map(|(a, x)| a + c * x).collect()
            }
        }
    }

    /// An orthonormal basis of the tangent space at `p`.
    pub fn tangent_frame(&self, p: &ModelPoint) -> Vec<Vec<f64>> {
        let amb = self.ambient_dim();
        let offset = amb - self.dimension;
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(self.dimension);
        for k in 0..self.dimension {
            let mut e = vec![0.0; amb];
            e[offset + k] = 1.0;
            let mut w = self.project_tangent(p, &e);
            for f in &frame {
                let c = self.inner(&w, f);
                for (wi, fi) in w.iter_mut().zip(f) {
                    *wi -= c * fi;
                }
            }
            let n = self.tangent_norm(&w);
            frame.push(scale(&w, 1.0 / n));
        }
        frame
    }

    /// Angle between two nonzero tangent vectors at a common point.
    pub fn angle_between(&self, u: &[f64], v: &[f64]) -> f64 {
        let nu = self.tangent_norm(u);
        let nv = self.tangent_norm(v);
        if nu == 0.0 || nv == 0.0 {
            return 0.0;
        }
        let a: Vec<f64> = u.iter().map(|x| x / nu).collect();
        let b: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        2.0 * self.tangent_norm(&diff).atan2(self.tangent_norm(&sum))
    }

    /// Distance from `x` to the maximal geodesic through `a` and `b`; the
    /// distance to `a` when the two coincide.
    pub fn distance_to_geodesic(&self, a: &ModelPoint, b: &ModelPoint, x: &ModelPoint) -> f64 {
        let u = self.log_map_unchecked(a, b);
        let un = self.tangent_norm(&u);
        if un == 0.0 {
            return self.dist(a, x);
        }
        let w = self.log_map_unchecked(a, x);
        let wn = self.tangent_norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        let along = self.inner(&w, &u) / un;
        let perp: Vec<f64> = w.iter().zip(&u).map(|(wi, ui)| wi - along * ui / un).collect();
        let pn = self.tangent_norm(&perp);
        match self.geometry {
            Geometry::Euclidean => pn,
            Geometry::Hyperbolic => {
                // right triangle: sinh(leg) = sinh(hypotenuse) · sin(angle)
                let r = self.radius();
                r * ((wn / r).sinh() * pn / wn).asinh()
            }
        }
    }

    /// Comparison triangle in the plane of curvature `curvature` for the
    /// side lengths `d(p1,p2)`, `d(p1,p3)`, `d(p2,p3)`.
    pub fn comparison_triangle(
        d12: f64,
        d13: f64,
        d23: f64,
        curvature: f64,
    ) -> Result<ComparisonTriangle> {
        let space = ModelSpace::plane(curvature)?;
        let sides = [d12, d13, d23];
        if sides.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return domain(format!("side lengths must be finite and nonnegative: {sides:?}"));
        }
        let total: f64 = sides.iter().sum();
        let longest = sides.iter().cloned().fold(0.0, f64::max);
        let excess = 2.0 * longest - total;
        if excess > 1e-12 * (1.0 + total) {
            return domain(format!("side lengths {sides:?} violate the triangle inequality"));
        }
        let degenerate = excess >= -1e-12 * (1.0 + total) || sides.iter().any(|s| *s == 0.0);

        // half-angle form of the law of cosines at v0, stable near 0 and π
        let r = space.radius();
        let h = |x: f64| match space.geometry {
            Geometry::Euclidean => x,
            Geometry::Hyperbolic => (x / r).sinh(),
        };
        let s = total / 2.0;
        let sin_part = (h(s - d12) * h(s - d13)).max(0.0).sqrt();
        let cos_part = (h(s) * h(s - d23)).max(0.0).sqrt();
        let angle = if sin_part == 0.0 && cos_part == 0.0 {
            0.0
        } else {
            2.0 * sin_part.atan2(cos_part)
        };

        let vertices = [
            space.origin(),
            space.polar(d12, 0.0),
            space.polar(d13, angle),
        ];
        Ok(ComparisonTriangle {
            space,
            side_lengths: sides,
            vertices,
            degenerate,
        })
    }
}

/// `acosh(1 + u)` for `u ≥ 0`, with the series `√(2u)(1 - u/12)` near zero.
pub fn acosh_1p(u: f64) -> f64 {
    let u = u.max(0.0);
    if u < ACOSH_SERIES_CUTOFF {
        (2.0 * u).sqrt() * (1.0 - u / 12.0)
    } else {
        (u + (u * (u + 2.0)).sqrt()).ln_1p()
    }
}

/// Minkowski square of `p - q`, clamped at zero.
#[inline]
fn chord_sq(p: &[f64], q: &[f64]) -> f64 {
    let d0 = p[0] - q[0];
    let mut s = -d0 * d0;
    for (a, b) in p[1..].iter().zip(&q[1..]) {
        s += (a - b) * (a - b);
    }
    s.max(0.0)
}

#[inline]
pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn minkowski(u: &[f64], v: &[f64]) -> f64 {
    -u[0] * v[0] + u[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>()
}

pub(crate) fn scale(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|x| x * c).collect()
}
