//! Deck transformation groups and orbit enumeration.
//!
//! A quotient `M = M̃/Γ` is described by its model space `M̃` and a finite
//! generating set of `Γ`: lattice translations for flat tori, or
//! Minkowski-orthogonal matrices for hyperbolic surfaces. Orbit enumeration
//! returns every translate `g·x` inside a metric ball. Because `Γ` is discrete
//! the answer is finite, and every quotient-distance computation in the crate
//! reduces to a minimum over such a finite list.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, GeoError, Result};
use crate::model::{ModelPoint, ModelSpace};
use crate::par::{map_indexed, Execution};

/// Orbit points closer than this are treated as the same group element.
pub const SEP_TOL: f64 = 1e-6;
/// Distances closer than this are ties in [`fiber_gap`].
pub const TIE_TOL: f64 = 1e-9;
/// Default cap on the number of distinct elements an enumeration may visit.
pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Transform {
    Translation(Vec<f64>),
    Matrix(DMatrix<f64>),
}

/// A deck transformation together with a word in the generators that
/// produces it. Letters are `±(i + 1)` for generator `i` or its inverse; the
/// word is read as a product, so the rightmost letter acts first.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    pub transform: Transform,
    pub word: Vec<i32>,
}

impl Isometry {
    pub fn identity(space: &ModelSpace) -> Self {
        let transform = if space.is_hyperbolic() {
            Transform::Matrix(DMatrix::identity(space.ambient_dim(), space.ambient_dim()))
        } else {
            Transform::Translation(vec![0.0; space.dimension()])
        };
        Self {
            transform,
            word: Vec::new(),
        }
    }

    pub fn translation(v: Vec<f64>) -> Self {
        Self {
            transform: Transform::Translation(v),
            word: Vec::new(),
        }
    }

    /// Wraps a matrix after checking `MᵀJM = J` and that the upper sheet is
    /// preserved.
    pub fn matrix(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n < 3 || m.ncols() != n {
            return domain(format!("isometry matrix must be square of size ≥ 3, got {}×{}", n, m.ncols()));
        }
        let j = minkowski_form(n);
        let err = (m.transpose() * &j * &m - &j).abs().max();
        let scale = m.abs().max().powi(2).max(1.0);
        if err > 1e-9 * scale {
            return domain(format!("matrix does not preserve the Minkowski form (error {err:e})"));
        }
        if m[(0, 0)] <= 0.0 {
            return domain("matrix swaps the sheets of the hyperboloid");
        }
        Ok(Self {
            transform: Transform::Matrix(m),
            word: Vec::new(),
        })
    }

    pub fn with_word(mut self, word: Vec<i32>) -> Self {
        self.word = word;
        self
    }

    pub fn is_translation(&self) -> bool {
        matches!(self.transform, Transform::Translation(_))
    }

    /// Applies the isometry after checking dimensions and the point.
    pub fn apply(&self, space: &ModelSpace, p: &ModelPoint) -> Result<ModelPoint> {
        space.validate(p)?;
        match (&self.transform, space.is_hyperbolic()) {
            (Transform::Translation(v), false) if v.len() == p.coords.len() => {}
            (Transform::Matrix(m), true) if m.nrows() == p.coords.len() => {
                let j = minkowski_form(m.nrows());
                let err = (m.transpose() * &j * m - &j).abs().max();
                if err > 1e-9 * m.abs().max().powi(2).max(1.0) {
                    return domain(format!("matrix does not preserve the Minkowski form (error {err:e})"));
                }
            }
            _ => return domain("isometry does not act on this model space"),
        }
        Ok(self.apply_unchecked(space, p))
    }

    /// Applies the raw map to ambient coordinates without re-projection.
    #[inline]
    pub(crate) fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        match &self.transform {
            Transform::Translation(v) => {
                for ((o, a), b) in out.iter_mut().zip(p).zip(v) {
                    *o = a + b;
                }
            }
            Transform::Matrix(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (k, x) in p.iter().enumerate() {
                        s += m[(i, k)] * x;
                    }
                    *o = s;
                }
            }
        }
    }

    #[inline]
    pub fn apply_unchecked(&self, space: &ModelSpace, p: &ModelPoint) -> ModelPoint {
        match &self.transform {
            Transform::Translation(v) => {
                ModelPoint::new(p.coords.iter().zip(v).map(|(a, b)| a + b).collect())
            }
            Transform::Matrix(m) => {
                let n = m.nrows();
                let mut out = vec![0.0; n];
                for (i, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (k, x) in p.coords.iter().enumerate() {
                        s += m[(i, k)] * x;
                    }
                    *o = s;
                }
                space.project(ModelPoint::new(out))
            }
        }
    }

    /// The composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Isometry) -> Isometry {
        let transform = match (&self.transform, &other.transform) {
            (Transform::Translation(a), Transform::Translation(b)) => {
                Transform::Translation(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (Transform::Matrix(a), Transform::Matrix(b)) => Transform::Matrix(a * b),
            _ => panic!("cannot compose a translation with a matrix isometry"),
        };
        let mut word = self.word.clone();
        for &letter in &other.word {
            if word.last() == Some(&-letter) {
                word.pop();
            } else {
                word.push(letter);
            }
        }
        Isometry { transform, word }
    }

    pub fn inverse(&self) -> Isometry {
        let transform = match &self.transform {
            Transform::Translation(v) => Transform::Translation(v.iter().map(|x| -x).collect()),
            Transform::Matrix(m) => {
                let j = minkowski_form(m.nrows());
                Transform::Matrix(&j * m.transpose() * &j)
            }
        };
        Isometry {
            transform,
            word: self.word.iter().rev().map(|l| -l).collect(),
        }
    }

    /// Frobenius distance between the underlying maps.
    pub fn frobenius_distance(&self, other: &Isometry) -> f64 {
        match (&self.transform, &other.transform) {
            (Transform::Translation(a), Transform::Translation(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt(),
            (Transform::Matrix(a), Transform::Matrix(b)) => (a - b).norm(),
            _ => f64::INFINITY,
        }
    }

    /// Displacement `d(p, g·p)`.
    pub fn displacement(&self, space: &ModelSpace, p: &ModelPoint) -> f64 {
        space.dist(p, &self.apply_unchecked(space, p))
    }

    /// Translation length `inf_x d(x, g·x)`: the vector norm, or
    /// `acosh((tr − 1)/2)` for hyperbolic elements of `SO⁺(2,1)`.
    pub fn translation_length(&self, space: &ModelSpace) -> Option<f64> {
        match &self.transform {
            Transform::Translation(v) => Some(v.iter().map(|x| x * x).sum::<f64>().sqrt()),
            Transform::Matrix(m) if m.nrows() == 3 => {
                let c = (m.trace() - 1.0) / 2.0;
                (c >= 1.0).then(|| space.radius() * c.acosh())
            }
            Transform::Matrix(_) => None,
        }
    }
}

fn minkowski_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n, n);
    j[(0, 0)] = -1.0;
    j
}

/// An orbit point `g·x` together with `g` and its distance to a center.
#[derive(Clone, Debug)]
pub struct OrbitPoint {
    pub point: ModelPoint,
    pub element: Isometry,
    pub dist_to_center: f64,
}

/// A group element with its displacement of the base point.
#[derive(Clone, Debug)]
pub struct DeckElement {
    pub element: Isometry,
    pub displacement: f64,
}

#[derive(Debug)]
struct DeckBall {
    radius: f64,
    elements: Arc<Vec<DeckElement>>,
}

#[derive(Clone, Debug)]
enum Group {
    Lattice { basis: DMatrix<f64> },
    Fuchsian,
}

/// A compact quotient `M̃/Γ` of a model space by a discrete deck group.
#[derive(Clone, Debug)]
pub struct QuotientSpace {
    model: ModelSpace,
    generators: Vec<Isometry>,
    injectivity_floor: f64,
    base: ModelPoint,
    domain_radius: f64,
    node_budget: usize,
    sep_tol: f64,
    group: Group,
    cache: Arc<Mutex<Option<DeckBall>>>,
}

impl QuotientSpace {
    /// Flat torus `ℝⁿ/Λ` with `Λ` spanned by `basis` (one vector per entry).
    pub fn lattice(basis: &[Vec<f64>]) -> Result<Self> {
        let n = basis.len();
        let model = ModelSpace::euclidean(n)?;
        if basis.iter().any(|b| b.len() != n) {
            return domain("lattice basis must be n vectors of length n");
        }
        let m = basis_matrix(basis);
        check_nonsingular(&m)?;
        let generators = basis
            .iter()
            .enumerate()
            .map(|(i, b)| Isometry::translation(b.clone()).with_word(vec![i as i32 + 1]))
            .collect();
        // half the longest diagonal of the fundamental parallelepiped
        let mut domain_radius: f64 = 0.0;
        for mask in 0..(1u32 << n) {
            let mut v = vec![0.0; n];
            for (i, b) in basis.iter().enumerate() {
                let sign = if mask & (1 << i) != 0 { 0.5 } else { -0.5 };
                for (vk, bk) in v.iter_mut().zip(b) {
                    *vk += sign * bk;
                }
            }
            domain_radius = domain_radius.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
        let shortest = basis
            .iter()
            .map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        let origin = vec![0.0; n];
        let floor = lattice_orbit(&m, &origin, shortest)?
            .iter()
            .map(|o| o.dist_to_center)
            .filter(|d| *d > SEP_TOL)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            model,
            generators,
            injectivity_floor: floor,
            base: model.origin(),
            domain_radius,
            node_budget: DEFAULT_NODE_BUDGET,
            sep_tol: SEP_TOL,
            group: Group::Lattice { basis: m },
            cache: Arc::default(),
        })
    }

    /// Hyperbolic quotient by the group generated by `generators`. The
    /// `domain_radius` bounds the distance from the base point (the model
    /// origin) to any point of the Dirichlet domain; without it the largest
    /// generator displacement is used.
    pub fn fuchsian(
        model: ModelSpace,
        generators: Vec<Isometry>,
        domain_radius: Option<f64>,
    ) -> Result<Self> {
        if !model.is_hyperbolic() {
            return domain("a Fuchsian quotient needs a hyperbolic model space");
        }
        if generators.is_empty() {
            return domain("at least one generator is required");
        }
        let base = model.origin();
        let mut gens = Vec::with_capacity(generators.len());
        for (i, g) in generators.into_iter().enumerate() {
            let Transform::Matrix(m) = &g.transform else {
                return domain("Fuchsian generators must be matrices");
            };
            if m.nrows() != model.ambient_dim() {
                return domain("generator size does not match the model dimension");
            }
            let checked = Isometry::matrix(m.clone())?;
            gens.push(checked.with_word(vec![i as i32 + 1]));
        }
        let max_disp = gens
            .iter()
            .map(|g| g.displacement(&model, &base))
            .fold(0.0, f64::max);
        if max_disp < SEP_TOL {
            return domain("generators do not move the base point");
        }
        let mut space = Self {
            model,
            generators: gens,
            injectivity_floor: 0.0,
            base,
            domain_radius: domain_radius.unwrap_or(max_disp),
            node_budget: DEFAULT_NODE_BUDGET,
            sep_tol: SEP_TOL,
            group: Group::Fuchsian,
            cache: Arc::default(),
        };
        let min_disp = space
            .generators
            .iter()
            .map(|g| g.displacement(&model, &space.base))
            .fold(f64::INFINITY, f64::min);
        space.injectivity_floor = space
            .deck_ball(min_disp + 1e-9)?
            .iter()
            .map(|e| e.displacement)
            .filter(|d| *d > SEP_TOL)
            .fold(f64::INFINITY, f64::min);
        Ok(space)
    }

    pub fn with_node_budget(mut self, budget: usize) -> Self {
        self.node_budget = budget;
        self.cache = Arc::default();
        self
    }

    /// Orbit points closer than `tol` are identified during enumeration.
    pub fn with_sep_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < self.injectivity_floor.min(1.0)) {
            return domain(format!("sep_tol must lie in (0, min(1, injectivity floor)), got {tol}"));
        }
        self.sep_tol = tol;
        self.cache = Arc::default();
        Ok(self)
    }

    pub fn sep_tol(&self) -> f64 {
        self.sep_tol
    }

    pub fn model(&self) -> &ModelSpace {
        &self.model
    }

    pub fn generators(&self) -> &[Isometry] {
        &self.generators
    }

    pub fn base(&self) -> &ModelPoint {
        &self.base
    }

    /// Lower bound on `d(b, g·b)` over non-identity elements.
    pub fn injectivity_floor(&self) -> f64 {
        self.injectivity_floor
    }

    /// Upper bound on the distance from the base point to its Dirichlet
    /// domain boundary; also the circumradius used by search defaults.
    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn node_budget(&self) -> usize {
        self.node_budget
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.group, Group::Lattice { .. })
    }

    /// Basis vectors of a lattice quotient.
    pub fn lattice_basis(&self) -> Option<Vec<Vec<f64>>> {
        match &self.group {
            Group::Lattice { basis } => Some(
                (0..basis.ncols())
                    .map(|j| basis.column(j).iter().cloned().collect())
                    .collect(),
            ),
            Group::Fuchsian => None,
        }
    }

    /// Generators together with their inverses, in letter order `+1, -1, +2, ...`.
    pub fn symmetric_generators(&self) -> Vec<Isometry> {
        self.generators
            .iter()
            .flat_map(|g| [g.clone(), g.inverse()])
            .collect()
    }

    fn max_generator_displacement(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| g.displacement(&self.model, &self.base))
            .fold(0.0, f64::max)
    }

    /// All elements with `d(b, g·b) ≤ radius`, sorted by displacement then
    /// lexicographically by orbit point. Results are cached and grown on
    /// demand.
    pub fn deck_ball(&self, radius: f64) -> Result<Vec<DeckElement>> {
        let all = self.deck_ball_covering(radius)?;
        let keep = all.partition_point(|e| e.displacement <= radius);
        Ok(all[..keep].to_vec())
    }

    /// The cached displacement-sorted element list, enumerated at least up
    /// to `radius` (possibly further).
    pub(crate) fn deck_ball_covering(&self, radius: f64) -> Result<Arc<Vec<DeckElement>>> {
        let target = {
            let guard = self.cache.lock().expect("deck cache poisoned");
            match guard.as_ref() {
                Some(ball) if ball.radius >= radius => return Ok(ball.elements.clone()),
                // grow geometrically so repeated small requests do not re-enumerate
                Some(ball) => radius.max(ball.radius * 1.25),
                None => radius,
            }
        };
        let orbit = self.orbit(&self.base, &self.base, target, Execution::Parallel)?;
        let elements: Vec<DeckElement> = orbit
            .into_iter()
            .map(|o| DeckElement {
                element: o.element,
                displacement: o.dist_to_center,
            })
            .collect();
        let elements = Arc::new(elements);
        let mut guard = self.cache.lock().expect("deck cache poisoned");
        if guard.as_ref().is_none_or(|b| b.radius < target) {
            *guard = Some(DeckBall {
                radius: target,
                elements: elements.clone(),
            });
        }
        Ok(elements)
    }

    /// Orbit of `x` intersected with the closed ball `B(center, radius)`.
    pub fn orbit(
        &self,
        x: &ModelPoint,
        center: &ModelPoint,
        radius: f64,
        exec: Execution,
    ) -> Result<Vec<OrbitPoint>> {
        if !(radius >= 0.0) {
            return domain(format!("radius must be nonnegative, got {radius}"));
        }
        self.model.validate(x)?;
        self.model.validate(center)?;
        match &self.group {
            Group::Lattice { basis } => {
                let shifted: Vec<f64> = center.coords.iter().zip(&x.coords).map(|(c, p)| c - p).collect();
                let pts = lattice_orbit(basis, &shifted, radius)?;
                Ok(pts
                    .into_iter()
                    .map(|o| {
                        let point = o.element.apply_unchecked(&self.model, x);
                        OrbitPoint {
                            dist_to_center: self.model.dist(center, &point),
                            point,
                            element: o.element,
                        }
                    })
                    .collect())
            }
            Group::Fuchsian => self.word_bfs(x, center, radius, exec),
        }
    }

    /// Breadth-first search over words, abandoning a word once its orbit
    /// point is farther than `max(radius, d(center, x)) + margin` from the
    /// center. With `margin` at least the Dirichlet-domain circumradius, every
    /// tile met by a geodesic from the center to a target orbit point stays
    /// inside that threshold, so the search is exhaustive.
    fn word_bfs(
        &self,
        x: &ModelPoint,
        center: &ModelPoint,
        radius: f64,
        exec: Execution,
    ) -> Result<Vec<OrbitPoint>> {
        let space = &self.model;
        let letters = self.symmetric_generators();
        let margin = self.max_generator_displacement().max(self.domain_radius)
            + space.dist(&self.base, x);
        let threshold = radius.max(space.dist(center, x)) + margin;

        let identity = Isometry::identity(space);
        let mut seen = PointIndex::new(space.dimension());
        let mut all: Vec<OrbitPoint> = Vec::new();
        let start = OrbitPoint {
            point: x.clone(),
            element: identity,
            dist_to_center: space.dist(center, x),
        };
        seen.insert(&start.point, 0);
        all.push(start);
        let mut frontier: Vec<usize> = vec![0];

        while !frontier.is_empty() {
            let expanded: Vec<Vec<OrbitPoint>> = map_indexed(exec, frontier.len(), |fi| {
                let parent = &all[frontier[fi]];
                letters
                    .iter()
                    .filter(|l| parent.element.word.last() != Some(&-l.word[0]))
                    .map(|l| {
                        let element = parent.element.compose(l);
                        let point = element.apply_unchecked(space, x);
                        OrbitPoint {
                            dist_to_center: space.dist(center, &point),
                            point,
                            element,
                        }
                    })
                    .filter(|o| o.dist_to_center <= threshold)
                    .collect()
            });
            let mut next = Vec::new();
            for child in expanded.into_iter().flatten() {
                if let Some(i) = seen.find(space, &child.point, &all, self.sep_tol) {
                    // a torsion-free group moves every point, so equal orbit
                    // points must come from equal elements
                    let scale = match &child.element.transform {
                        Transform::Matrix(m) => m.norm().max(1.0),
                        Transform::Translation(_) => 1.0,
                    };
                    if all[i].element.frobenius_distance(&child.element) > 1e-6 * scale {
                        return domain("distinct group elements fix an orbit point; the group is not torsion-free");
                    }
                    continue;
                }
                let idx = all.len();
                seen.insert(&child.point, idx);
                all.push(child);
                next.push(idx);
                if all.len() > self.node_budget {
                    return Err(GeoError::Budget {
                        budget: self.node_budget,
                        radius,
                    });
                }
            }
            frontier = next;
        }

        let mut out: Vec<OrbitPoint> = all
            .into_iter()
            .filter(|o| o.dist_to_center <= radius)
            .collect();
        sort_orbit(&mut out);
        Ok(out)
    }

    /// Moves `p` toward the base point by greedy generator steps. Returns the
    /// reduced lift and the element `h` with `reduced = h·p`.
    pub fn reduce(&self, p: &ModelPoint) -> (ModelPoint, Isometry) {
        let space = &self.model;
        let mut h = Isometry::identity(space);
        let mut cur = p.clone();
        if let Group::Lattice { basis } = &self.group {
            if let Some(inv) = basis.clone().try_inverse() {
                let v = nalgebra::DVector::from_column_slice(&cur.coords);
                let k = (inv * v).map(|c| -c.round());
                let shift: Vec<f64> = (basis * &k).iter().cloned().collect();
                let t = Isometry::translation(shift)
                    .with_word(lattice_word(&k.iter().map(|c| *c as i64).collect::<Vec<_>>()));
                let moved = t.apply_unchecked(space, &cur);
                // only shift when it strictly helps, so in-domain points stay put
                if space.dist(&self.base, &moved) < space.dist(&self.base, &cur) - 1e-12 {
                    cur = moved;
                    h = t.compose(&h);
                }
            }
        }
        let letters = self.symmetric_generators();
        let mut d = space.dist(&self.base, &cur);
        loop {
            let mut best: Option<(f64, usize)> = None;
            for (i, l) in letters.iter().enumerate() {
                let dd = space.dist(&self.base, &l.apply_unchecked(space, &cur));
                if dd < d - 1e-12 && best.is_none_or(|(b, _)| dd < b) {
                    best = Some((dd, i));
                }
            }
            match best {
                Some((dd, i)) => {
                    cur = letters[i].apply_unchecked(space, &cur);
                    h = letters[i].compose(&h);
                    d = dd;
                }
                None => break,
            }
        }
        (cur, h)
    }

    /// Serializable description of the quotient.
    pub fn to_doc(&self) -> QuotientSpaceDoc {
        let generators = self
            .generators
            .iter()
            .map(|g| match &g.transform {
                Transform::Translation(v) => GeneratorDoc::Vector(v.clone()),
                Transform::Matrix(m) => GeneratorDoc::Matrix(
                    (0..m.nrows())
                        .map(|i| m.row(i).iter().cloned().collect())
                        .collect(),
                ),
            })
            .collect();
        QuotientSpaceDoc {
            kind: if self.is_lattice() {
                QuotientKind::Lattice
            } else {
                QuotientKind::Fuchsian
            },
            dimension: self.model.dimension(),
            curvature: self.model.curvature(),
            generators,
            domain_radius: Some(self.domain_radius),
        }
    }

    pub fn from_doc(doc: &QuotientSpaceDoc) -> Result<Self> {
        match doc.kind {
            QuotientKind::Lattice => {
                if doc.curvature != 0.0 {
                    return domain("a lattice quotient has curvature 0");
                }
                let basis = doc
                    .generators
                    .iter()
                    .map(|g| match g {
                        GeneratorDoc::Vector(v) => Ok(v.clone()),
                        GeneratorDoc::Matrix(_) => domain("lattice generators must be vectors"),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if basis.len() != doc.dimension {
                    return domain("lattice needs exactly `dimension` generators");
                }
                Self::lattice(&basis)
            }
            QuotientKind::Fuchsian => {
                let model = ModelSpace::hyperbolic(doc.dimension, doc.curvature)?;
                let gens = doc
                    .generators
                    .iter()
                    .map(|g| match g {
                        GeneratorDoc::Matrix(rows) => {
                            let n = rows.len();
                            if rows.iter().any(|r| r.len() != n) {
                                return domain("generator matrix is not square");
                            }
                            Isometry::matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
                        }
                        GeneratorDoc::Vector(_) => domain("Fuchsian generators must be matrices"),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::fuchsian(model, gens, doc.domain_radius)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotientKind {
    Lattice,
    Fuchsian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorDoc {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// JSON form of a [`QuotientSpace`]. Matrices are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientSpaceDoc {
    pub kind: QuotientKind,
    pub dimension: usize,
    pub curvature: f64,
    pub generators: Vec<GeneratorDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_radius: Option<f64>,
}

/// Spatial hash on ambient coordinates used to deduplicate orbit points.
/// Distinct orbit points are far apart, so unit cells hold few entries.
struct PointIndex {
    cells: HashMap<Vec<i64>, Vec<usize>>,
    dim: usize,
}

impl PointIndex {
    fn new(dim: usize) -> Self {
        Self {
            cells: HashMap::new(),
            dim,
        }
    }

    fn key(&self, p: &ModelPoint) -> Vec<i64> {
        let off = p.coords.len() - self.dim;
        p.coords[off..].iter().map(|x| x.floor() as i64).collect()
    }

    fn insert(&mut self, p: &ModelPoint, idx: usize) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(idx);
    }

    fn find(&self, space: &ModelSpace, p: &ModelPoint, all: &[OrbitPoint], tol: f64) -> Option<usize> {
        let k = self.key(p);
        let mut offset = vec![-1i64; self.dim];
        loop {
            let cell: Vec<i64> = k.iter().zip(&offset).map(|(a, b)| a + b).collect();
            if let Some(list) = self.cells.get(&cell) {
                for &i in list {
                    if space.dist(&all[i].point, p) < tol {
                        return Some(i);
                    }
                }
            }
            let mut carry = true;
            for o in offset.iter_mut() {
                if !carry {
                    break;
                }
                *o += 1;
                if *o > 1 {
                    *o = -1;
                } else {
                    carry = false;
                }
            }
            if carry {
                return None;
            }
        }
    }
}

fn sort_orbit(points: &mut [OrbitPoint]) {
    points.sort_by(|a, b| {
        a.dist_to_center
            .total_cmp(&b.dist_to_center)
            .then_with(|| lex_cmp(&a.point.coords, &b.point.coords))
    });
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.total_cmp(y);
        if o.is_ne() {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

fn basis_matrix(basis: &[Vec<f64>]) -> DMatrix<f64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| basis[j][i])
}

fn check_nonsingular(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-12 * smax.max(1e-300)) {
        return domain(format!("lattice basis is singular (σ_min = {smin:e})"));
    }
    Ok((smin, smax))
}

fn lattice_word(k: &[i64]) -> Vec<i32> {
    let mut w = Vec::new();
    for (i, &c) in k.iter().enumerate() {
        let letter = if c >= 0 { i as i32 + 1 } else { -(i as i32 + 1) };
        w.extend(std::iter::repeat_n(letter, c.unsigned_abs() as usize));
    }
    w
}

/// Lattice points `B·k` (columns of `basis` are the basis vectors) within
/// `radius` of `center`, sorted by distance then coordinates. The integer
/// search box comes from `|k − B⁻¹c|∞ ≤ radius/σ_min(B)`.
pub fn lattice_orbit(basis: &DMatrix<f64>, center: &[f64], radius: f64) -> Result<Vec<OrbitPoint>> {
    let n = basis.nrows();
    if basis.ncols() != n || center.len() != n {
        return domain("basis must be n×n and the center must have n coordinates");
    }
    if !(radius >= 0.0) {
        return domain(format!("radius must be nonnegative, got {radius}"));
    }
    let (smin, _) = check_nonsingular(basis)?;
    let inv = basis.clone().try_inverse().ok_or_else(|| GeoError::Domain("singular basis".into()))?;
    let kc = &inv * nalgebra::DVector::from_column_slice(center);
    let reach = radius / smin;
    let lo: Vec<i64> = kc.iter().map(|c| (c - reach).ceil() as i64).collect();
    let hi: Vec<i64> = kc.iter().map(|c| (c + reach).floor() as i64).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return Ok(Vec::new());
    }
    let cutoff = radius * (1.0 + 1e-12) + 1e-15;
    let space = ModelSpace::euclidean(n)?;
    let centre = ModelPoint::new(center.to_vec());
    let mut out = Vec::new();
    let mut k = lo.clone();
    loop {
        let v: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| basis[(i, j)] * k[j] as f64).sum())
            .collect();
        let point = ModelPoint::new(v.clone());
        let d = space.dist(&centre, &point);
        if d <= cutoff {
            out.push(OrbitPoint {
                point,
                element: Isometry::translation(v).with_word(lattice_word(&k)),
                dist_to_center: d,
            });
        }
        let mut i = 0;
        loop {
            if i == n {
                sort_orbit(&mut out);
                return Ok(out);
            }
            k[i] += 1;
            if k[i] > hi[i] {
                k[i] = lo[i];
                i += 1;
            } else {
                break;
            }
        }
    }
}

/// Orbit of the space's base point inside `B(center, radius)`.
pub fn fuchsian_orbit(space: &QuotientSpace, center: &ModelPoint, radius: f64) -> Result<Vec<OrbitPoint>> {
    space.orbit(space.base(), center, radius, Execution::Parallel)
}

/// Gap between the `k`-th smallest orbit distance and the next one: the
/// constructive `ε₀` separating the `k` nearest lifts from the rest. Returns 0
/// when the `(k+1)`-th distance ties the `k`-th within [`TIE_TOL`] or when the
/// enumerated orbit has no `(k+1)`-th point.
pub fn fiber_gap(orbit: &[OrbitPoint], k: usize) -> Result<f64> {
    if k == 0 {
        return domain("k must be at least 1");
    }
    if orbit.len() < k {
        return domain(format!("orbit has {} points, fewer than k = {k}", orbit.len()));
    }
    let mut d: Vec<f64> = orbit.iter().map(|o| o.dist_to_center).collect();
    d.sort_by(f64::total_cmp);
    match d.get(k) {
        Some(next) if next - d[k - 1] > TIE_TOL => Ok(next - d[k - 1]),
        _ => Ok(0.0),
    }
}

fn rotation(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c])
}

fn boost(length: f64) -> DMatrix<f64> {
    let (ch, sh) = (length.cosh(), length.sinh());
    DMatrix::from_row_slice(3, 3, &[ch, sh, 0.0, sh, ch, 0.0, 0.0, 0.0, 1.0])
}

/// Side-pairing map of the regular octagon taking side `from` onto side `to`
/// so that the octagon lands across side `to`. Side `i` has its midpoint in
/// direction `iπ/4` at distance `apothem`.
fn side_pairing(from: usize, to: usize, apothem: f64) -> DMatrix<f64> {
    let theta = |i: usize| i as f64 * PI / 4.0;
    rotation(theta(to)) * boost(2.0 * apothem) * rotation(PI - theta(from))
}

/// Genus-2 surface group of the regular octagon with interior angles `π/4`,
/// on the hyperboloid of curvature −1.
pub fn octagon_group() -> QuotientSpace {
    octagon_group_with_curvature(-1.0).expect("curvature −1 is valid")
}

/// The same group acting on the hyperboloid of curvature `χ < 0`; the
/// matrices do not change, lengths scale by `1/√(-χ)`.
///
/// The octagon's geometry follows from its right triangle (center, side
/// midpoint, vertex) with angles `π/8` at the center and `π/8` at the vertex:
/// `cosh(apothem) = cot(π/8)` and `cosh(circumradius) = cot²(π/8)`. Sides are
/// labelled `a b a⁻¹ b⁻¹ c d c⁻¹ d⁻¹` counterclockwise from angle 0, and each
/// generator carries its side onto the paired one.
pub fn octagon_group_with_curvature(curvature: f64) -> Result<QuotientSpace> {
    let model = ModelSpace::hyperbolic(2, curvature)?;
    let cot = 1.0 / (PI / 8.0).tan();
    let apothem = cot.acosh();
    let circumradius = (cot * cot).acosh();
    let pairs = [(2, 0), (1, 3), (6, 4), (5, 7)];
    let gens = pairs
        .iter()
        .map(|&(from, to)| Isometry::matrix(side_pairing(from, to, apothem)))
        .collect::<Result<Vec<_>>>()?;
    QuotientSpace::fuchsian(model, gens, Some(circumradius * model.radius()))
}

/// Evaluates a word (letters `±(i+1)`) in the generators of `space`.
pub fn evaluate_word(space: &QuotientSpace, word: &[i32]) -> Result<Isometry> {
    let mut acc = Isometry::identity(space.model());
    for &letter in word {
        let idx = letter.unsigned_abs() as usize;
        if letter == 0 || idx > space.generators().len() {
            return domain(format!("letter {letter} does not name a generator"));
        }
        let g = &space.generators()[idx - 1];
        let g = if letter > 0 { g.clone() } else { g.inverse() };
        acc = acc.compose(&g);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z2() -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    /// Every point of the integer box `[-m, m]^n`, filtered to the ball.
    fn brute_lattice(basis: &DMatrix<f64>, center: &[f64], radius: f64, m: i64) -> Vec<Vec<f64>> {
        let n = basis.nrows();
        let mut out = Vec::new();
        let total = (2 * m + 1).pow(n as u32);
        for idx in 0..total {
            let mut rem = idx;
            let k: Vec<f64> = (0..n)
                .map(|_| {
                    let c = rem % (2 * m + 1) - m;
                    rem /= 2 * m + 1;
                    c as f64
                })
                .collect();
            let v: Vec<f64> = (0..n).map(|i| (0..n).map(|j| basis[(i, j)] * k[j]).sum()).collect();
            let d: f64 = v.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if d <= radius * (1.0 + 1e-12) + 1e-15 {
                out.push(v);
            }
        }
        out.sort_by(|a, b| lex_cmp(a, b));
        out
    }

    #[test]
    fn identity_and_translation() {
        let e = ModelSpace::euclidean(2).unwrap();
        let p = ModelPoint::new(vec![0.25, 0.5]);
        assert_eq!(Isometry::identity(&e).apply(&e, &p).unwrap(), p);
        let t = Isometry::translation(vec![1.0, 0.0]);
        assert_eq!(t.apply(&e, &p).unwrap().coords, vec![1.25, 0.5]);
        let h = ModelSpace::hyperbolic(2, -1.0).unwrap();
        assert!(t.apply(&h, &h.origin()).is_err());
    }

    #[test]
    fn rejects_non_minkowski_matrix() {
        let mut m = DMatrix::identity(3, 3);
        m[(1, 2)] = 0.3;
        assert!(Isometry::matrix(m.clone()).is_err());
        let bad = Isometry {
            transform: Transform::Matrix(m),
            word: vec![],
        };
        let h = ModelSpace::hyperbolic(2, -1.0).unwrap();
        assert!(bad.apply(&h, &h.origin()).is_err());
        assert!(Isometry::matrix(-DMatrix::<f64>::identity(3, 3)).is_err());
    }

    #[test]
    fn lattice_orbit_examples() {
        let o = lattice_orbit(&z2(), &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(o.len(), 1);
        assert!(o[0].element.word.is_empty());

        let o = lattice_orbit(&z2(), &[0.0, 0.0], 1.5).unwrap();
        assert_eq!(o.len(), 9);
        let brute = brute_lattice(&z2(), &[0.0, 0.0], 1.5, 2);
        let mut got: Vec<Vec<f64>> = o.iter().map(|p| p.point.coords.clone()).collect();
        got.sort_by(|a, b| lex_cmp(a, b));
        assert_eq!(got, brute);
        assert_eq!(o.iter().filter(|p| (p.dist_to_center - 1.0).abs() < 1e-15).count(), 4);
        assert_eq!(
            o.iter()
                .filter(|p| (p.dist_to_center - 2f64.sqrt()).abs() < 1e-15)
                .count(),
            4
        );

        let o = lattice_orbit(&z2(), &[0.5, 0.5], 0.8).unwrap();
        assert_eq!(o.len(), 4);
        for p in &o {
            assert_abs_diff_eq!(p.dist_to_center, 0.5f64.sqrt(), epsilon = 1e-15);
        }
        // sorted lexicographically within the tie
        assert_eq!(o[0].point.coords, vec![0.0, 0.0]);
        assert_eq!(o[3].point.coords, vec![1.0, 1.0]);
    }

    #[test]
    fn lattice_orbit_rejects_singular_basis() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(lattice_orbit(&m, &[0.0, 0.0], 1.0).is_err());
        assert!(QuotientSpace::lattice(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
    }

    #[test]
    fn lattice_orbit_matches_double_radius_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(2..=3);
            let basis = loop {
                let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.5..1.5));
                if b.determinant().abs() > 0.2 {
                    break b;
                }
            };
            let center: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let radius = rng.random_range(0.0..2.5);
            let sv = basis.clone().singular_values();
            // a box twice as large as the certified one
            let kc = basis.clone().try_inverse().unwrap() * nalgebra::DVector::from_column_slice(&center);
            let m = (kc.amax() + 2.0 * radius / sv.min()).ceil() as i64 + 1;
            let brute = brute_lattice(&basis, &center, radius, m);
            let mut got: Vec<Vec<f64>> = lattice_orbit(&basis, &center, radius)
                .unwrap()
                .iter()
                .map(|p| p.point.coords.clone())
                .collect();
            got.sort_by(|a, b| lex_cmp(a, b));
            assert_eq!(got.len(), brute.len());
            for (a, b) in got.iter().zip(&brute) {
                assert_abs_diff_eq!(a[..], b[..], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fiber_gap_examples() {
        let o = lattice_orbit(&z2(), &[0.0, 0.0], 2.0).unwrap();
        assert_abs_diff_eq!(fiber_gap(&o, 1).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fiber_gap(&o, 5).unwrap(), 2f64.sqrt() - 1.0, epsilon = 1e-15);
        assert_eq!(fiber_gap(&o, 2).unwrap(), 0.0);
        assert!(fiber_gap(&o, 0).is_err());
        assert!(fiber_gap(&o[..3], 4).is_err());
        let tied = lattice_orbit(&z2(), &[0.5, 0.5], 0.8).unwrap();
        assert_eq!(fiber_gap(&tied, 2).unwrap(), 0.0);
    }

    #[test]
    fn octagon_relator_and_translation_lengths() {
        let g = octagon_group();
        let rel = evaluate_word(&g, &[1, 2, -1, -2, 3, 4, -3, -4]).unwrap();
        let Transform::Matrix(m) = &rel.transform else { unreachable!() };
        assert!((m - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-8);

        let j = minkowski_form(3);
        let model = *g.model();
        let lengths: Vec<f64> = g
            .generators()
            .iter()
            .map(|gen| {
                let Transform::Matrix(m) = &gen.transform else { unreachable!() };
                assert!((m.transpose() * &j * m - &j).abs().max() < 1e-10);
                gen.translation_length(&model).unwrap()
            })
            .collect();
        for a in &lengths {
            for b in &lengths {
                assert!((a - b).abs() < 1e-9);
            }
        }
        // every generator moves the center to its reflection across a side
        let apothem = (1.0 / (PI / 8.0).tan()).acosh();
        for gen in g.generators() {
            assert_abs_diff_eq!(gen.displacement(&model, g.base()), 2.0 * apothem, epsilon = 1e-10);
        }
        assert!(g.injectivity_floor() <= 2.0 * apothem + 1e-9);
    }

    #[test]
    fn generators_are_isometries() {
        let g = octagon_group();
        let model = *g.model();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for gen in g.symmetric_generators() {
            for _ in 0..1000 {
                let x = model.polar(rng.random_range(0.0..3.0), rng.random_range(0.0..6.3));
                let y = model.polar(rng.random_range(0.0..3.0), rng.random_range(0.0..6.3));
                let d0 = model.dist(&x, &y);
                let d1 = model.dist(&gen.apply_unchecked(&model, &x), &gen.apply_unchecked(&model, &y));
                assert!((d0 - d1).abs() < 1e-10);
            }
        }
    }

    /// All reduced words up to `max_len`, deduplicated by orbit point and
    /// filtered to the ball; no pruning.
    fn word_ball(space: &QuotientSpace, center: &ModelPoint, radius: f64, max_len: usize) -> Vec<ModelPoint> {
        let model = *space.model();
        let letters = space.symmetric_generators();
        let mut layer = vec![Isometry::identity(&model)];
        let mut pts: Vec<ModelPoint> = vec![space.base().clone()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &layer {
                for l in &letters {
                    if w.word.last() == Some(&-l.word[0]) {
                        continue;
                    }
                    let c = w.compose(l);
                    pts.push(c.apply_unchecked(&model, space.base()));
                    next.push(c);
                }
            }
            layer = next;
        }
        let mut kept: Vec<ModelPoint> = Vec::new();
        for p in pts.into_iter().filter(|p| model.dist(center, p) <= radius) {
            if !kept.iter().any(|q| model.dist(q, &p) < SEP_TOL) {
                kept.push(p);
            }
        }
        kept
    }

    #[test]
    fn small_radius_orbits() {
        let g = octagon_group();
        let model = *g.model();
        let o = fuchsian_orbit(&g, g.base(), 0.0).unwrap();
        assert_eq!(o.len(), 1);
        assert!(o[0].element.word.is_empty());

        let floor = g.injectivity_floor();
        let o = fuchsian_orbit(&g, g.base(), floor + 1e-6).unwrap();
        let brute = word_ball(&g, g.base(), floor + 1e-6, 2);
        assert_eq!(o.len(), brute.len());
        assert_eq!(o.len(), 9);
        for p in &o[1..] {
            assert_abs_diff_eq!(p.dist_to_center, floor, epsilon = 1e-9);
            assert!(brute.iter().any(|q| model.dist(q, &p.point) < SEP_TOL));
        }
    }

    #[test]
    fn pruned_orbit_equals_word_ball() {
        let g = octagon_group();
        let model = *g.model();
        let center = model.polar(0.8, 0.4);
        let radius = 4.5;
        let pruned = fuchsian_orbit(&g, &center, radius).unwrap();
        let brute = word_ball(&g, &center, radius, 6);
        assert_eq!(pruned.len(), brute.len());
        for p in &pruned {
            assert!(brute.iter().any(|q| model.dist(q, &p.point) < SEP_TOL));
        }
        for w in pruned.windows(2) {
            assert!(w[0].dist_to_center <= w[1].dist_to_center);
            assert!(model.dist(&w[0].point, &w[1].point) >= SEP_TOL);
        }
        for p in &pruned {
            assert_abs_diff_eq!(model.dist(&center, &p.point), p.dist_to_center, epsilon = 1e-10);
            if !p.element.word.is_empty() {
                assert!(p.element.displacement(&model, g.base()) >= g.injectivity_floor() - 1e-9);
                // the stored word reproduces the matrix
                let w = evaluate_word(&g, &p.element.word).unwrap();
                assert!(w.frobenius_distance(&p.element) < 1e-8);
            }
        }
    }

    #[test]
    fn orbit_is_deterministic_across_modes() {
        let g = octagon_group();
        let c = g.model().polar(0.3, 2.0);
        let a = g.orbit(g.base(), &c, 5.0, Execution::Sequential).unwrap();
        let b = g.orbit(g.base(), &c, 5.0, Execution::Parallel).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.point, y.point);
            assert_eq!(x.element.word, y.element.word);
        }
    }

    #[test]
    fn node_budget_is_enforced() {
        let g = octagon_group().with_node_budget(50);
        match fuchsian_orbit(&g, g.base(), 6.0) {
            Err(GeoError::Budget { budget, .. }) => assert_eq!(budget, 50),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn reduce_lands_in_domain() {
        let g = octagon_group();
        let model = *g.model();
        let far = model.polar(7.0, 1.234);
        let (r, h) = g.reduce(&far);
        assert!(model.dist(g.base(), &r) <= g.domain_radius() + 1e-9);
        assert!(model.dist(&h.apply_unchecked(&model, &far), &r) < 1e-8);

        let t = QuotientSpace::lattice(&[vec![1.0, 0.0], vec![0.35, 1.05]]).unwrap();
        let p = ModelPoint::new(vec![13.2, -7.9]);
        let (r, h) = t.reduce(&p);
        assert!(t.model().dist(t.base(), &r) <= t.domain_radius());
        assert!(t.model().dist(&h.apply_unchecked(t.model(), &p), &r) < 1e-12);
    }

    #[test]
    fn elliptic_elements_are_rejected() {
        let model = ModelSpace::hyperbolic(2, -1.0).unwrap();
        let gens = vec![Isometry::matrix(boost(1.0)).unwrap(), Isometry::matrix(rotation(PI)).unwrap()];
        let g = QuotientSpace::fuchsian(model, gens, Some(2.0));
        assert!(matches!(g, Err(GeoError::Domain(_))));
    }

    #[test]
    fn sep_tol_is_validated() {
        let g = octagon_group();
        assert!(g.clone().with_sep_tol(0.0).is_err());
        assert!(g.clone().with_sep_tol(5.0).is_err());
        let g = g.with_sep_tol(1e-4).unwrap();
        assert_eq!(g.sep_tol(), 1e-4);
        assert_eq!(fuchsian_orbit(&g, g.base(), 3.5).unwrap().len(), fuchsian_orbit(&octagon_group(), g.base(), 3.5).unwrap().len());
    }

    #[test]
    fn doc_round_trip() {
        for space in [
            octagon_group(),
            QuotientSpace::lattice(&[vec![1.0, 0.0], vec![0.5, 0.75f64.sqrt()]]).unwrap(),
        ] {
            let json = serde_json::to_string(&space.to_doc()).unwrap();
            let doc: QuotientSpaceDoc = serde_json::from_str(&json).unwrap();
            let back = QuotientSpace::from_doc(&doc).unwrap();
            assert_eq!(back.to_doc(), space.to_doc());
        }
        let doc: QuotientSpaceDoc = serde_json::from_str(
            r#"{"kind":"lattice","dimension":2,"curvature":0,"generators":[[1,0],[0,1]]}"#,
        )
        .unwrap();
        let sq = QuotientSpace::from_doc(&doc).unwrap();
        assert_abs_diff_eq!(sq.injectivity_floor(), 1.0, epsilon = 1e-15);
    }
}
