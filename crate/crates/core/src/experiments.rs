//! Experiment drivers behind the `geolab` binary.
//!
//! Each run turns one [`ExperimentConfig`] into an [`ExperimentReport`]: a list
//! of named claims with pass/fail, the measured values behind them, and the
//! tolerances in force. Reports are deterministic for a fixed config apart
//! from `duration_secs`.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::convexity::{
    comparison_sweep, halfspace_checks, midpoint_check, midpoint_sweep, pointed_convexity_profile,
    product_convexity_profile, profile_sweep, HalfspaceSweep,
};
use crate::deck::{fiber_gap, octagon_group_with_curvature, QuotientSpace, DEFAULT_NODE_BUDGET, SEP_TOL};
use crate::error::{domain, GeoError, Result};
use crate::model::{ModelPoint, ModelSpace};
use crate::par::Execution;
use crate::quotient::{
    find_farthest_point, find_max_pair, seed_pairs, seed_points, segment_bundle, strict_max_probe, MaxPair,
    SearchOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Torus,
    Hyperbolic,
    Convexity,
    Halfspace,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Torus => "torus",
            Experiment::Hyperbolic => "hyperbolic",
            Experiment::Convexity => "convexity",
            Experiment::Halfspace => "halfspace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceConfig {
    /// The genus-2 surface glued from the regular octagon.
    Octagon,
    /// A flat torus; one basis vector per entry.
    Lattice(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCounts {
    /// Grid points per axis for the torus farthest-point sweep.
    pub grid: usize,
    /// Multi-start seeds per grid point in the torus sweep.
    pub grid_seeds: usize,
    pub probe_dirs: usize,
    pub midpoint_trials: usize,
    pub comparison_trials: usize,
    pub profile_trials: usize,
    /// Second-difference samples per convexity profile.
    pub profile_samples: usize,
    pub halfspace_systems: usize,
    pub halfspace_samples: usize,
    pub max_dim: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            grid: 100,
            grid_seeds: 2,
            probe_dirs: 64,
            midpoint_trials: 100_000,
            comparison_trials: 10_000,
            profile_trials: 1_000,
            profile_samples: 50,
            halfspace_systems: 1_000,
            halfspace_samples: 1_000_000,
            max_dim: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Tie band for counting minimizing segments.
    pub min_tol: f64,
    pub sep_tol: f64,
    pub tol_conv: f64,
    pub probe_radius: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            min_tol: 1e-7,
            sep_tol: SEP_TOL,
            tol_conv: 1e-9,
            probe_radius: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub space: SpaceConfig,
    /// Curvature of the hyperbolic model; ignored for lattices.
    pub curvature: f64,
    /// Multi-start seeds for the hyperbolic searches.
    pub seeds: usize,
    /// Base seed of every random stream.
    pub rng_seed: u64,
    /// Fixed first point (ambient coordinates) for the pointed search.
    pub p1: Option<Vec<f64>>,
    pub samples: SampleCounts,
    pub tolerances: Tolerances,
    pub search: SearchOptions,
    pub node_budget: usize,
    pub execution: Execution,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Torus,
            space: SpaceConfig::Lattice(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            curvature: -1.0,
            seeds: 8,
            rng_seed: 0,
            p1: None,
            samples: SampleCounts::default(),
            tolerances: Tolerances::default(),
            search: SearchOptions::default(),
            node_budget: DEFAULT_NODE_BUDGET,
            execution: Execution::Parallel,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| GeoError::Domain(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("min_tol", t.min_tol),
            ("sep_tol", t.sep_tol),
            ("tol_conv", t.tol_conv),
            ("probe_radius", t.probe_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("tolerance {name} must be positive, got {v}"));
            }
        }
        let s = &self.samples;
        for (name, v) in [
            ("grid", s.grid),
            ("grid_seeds", s.grid_seeds),
            ("probe_dirs", s.probe_dirs),
            ("midpoint_trials", s.midpoint_trials),
            ("comparison_trials", s.comparison_trials),
            ("profile_trials", s.profile_trials),
            ("profile_samples", s.profile_samples),
            ("halfspace_systems", s.halfspace_systems),
            ("halfspace_samples", s.halfspace_samples),
        ] {
            if v < 1 {
                return domain(format!("sample count {name} must be at least 1"));
            }
        }
        if self.seeds < 1 {
            return domain("seeds must be at least 1");
        }
        if s.max_dim < 2 {
            return domain("max_dim must be at least 2");
        }
        if self.node_budget < 1 {
            return domain("node_budget must be at least 1");
        }
        Ok(())
    }

    fn search_options(&self) -> SearchOptions {
        SearchOptions {
            execution: self.execution,
            ..self.search.clone()
        }
    }
}

/// One asserted claim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimRow {
    pub id: String,
    /// The statement the claim tests, by descriptive name.
    pub anchor: String,
    pub passed: bool,
    pub expected: String,
    pub measured: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub passed: bool,
    pub claims: Vec<ClaimRow>,
    pub measurements: Value,
    pub tolerances: Tolerances,
    pub config: ExperimentConfig,
    /// Wall-clock time; the only field that varies between identical runs.
    pub duration_secs: f64,
    /// Optional flat sample dump, written separately as CSV.
    #[serde(skip)]
    pub csv: Option<String>,
}

impl ExperimentReport {
    pub fn claim(&self, id: &str) -> Option<&ClaimRow> {
        self.claims.iter().find(|c| c.id == id)
    }
}

struct Builder {
    claims: Vec<ClaimRow>,
    measurements: serde_json::Map<String, Value>,
}

impl Builder {
    fn new() -> Self {
        Self {
            claims: Vec::new(),
            measurements: serde_json::Map::new(),
        }
    }

    fn claim(&mut self, id: &str, anchor: &str, passed: bool, expected: impl Into<String>, measured: Value) {
        self.claims.push(ClaimRow {
            id: id.into(),
            anchor: anchor.into(),
            passed,
            expected: expected.into(),
            measured,
        });
    }

    fn measure(&mut self, key: &str, v: Value) {
        self.measurements.insert(key.into(), v);
    }

    fn finish(self, cfg: &ExperimentConfig, start: Instant, csv: Option<String>) -> ExperimentReport {
        ExperimentReport {
            experiment: cfg.experiment,
            passed: !self.claims.is_empty() && self.claims.iter().all(|c| c.passed),
            claims: self.claims,
            measurements: Value::Object(self.measurements),
            tolerances: cfg.tolerances.clone(),
            config: cfg.clone(),
            duration_secs: start.elapsed().as_secs_f64(),
            csv,
        }
    }
}

/// Builds the quotient described by the config.
pub fn build_space(cfg: &ExperimentConfig) -> Result<QuotientSpace> {
    let space = match &cfg.space {
        SpaceConfig::Octagon => octagon_group_with_curvature(cfg.curvature)?,
        SpaceConfig::Lattice(basis) => QuotientSpace::lattice(basis)?,
    };
    space.with_node_budget(cfg.node_budget).with_sep_tol(cfg.tolerances.sep_tol)
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Torus => run_torus(cfg),
        Experiment::Hyperbolic => run_hyperbolic(cfg),
        Experiment::Convexity => run_convexity(cfg),
        Experiment::Halfspace => run_halfspace(cfg),
    }
}

/// Lagrange–Gauss reduction of a planar basis.
pub fn gauss_reduce(b1: &[f64], b2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (mut u, mut v) = (b1.to_vec(), b2.to_vec());
    if dot(&u, &u) > dot(&v, &v) {
        std::mem::swap(&mut u, &mut v);
    }
    loop {
        let mu = (dot(&u, &v) / dot(&u, &u)).round();
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi -= mu * ui;
        }
        if dot(&v, &v) >= dot(&u, &u) {
            return (u, v);
        }
        std::mem::swap(&mut u, &mut v);
    }
}

/// Whether the lattice has an orthogonal basis (planar lattices only).
pub fn is_rectangular(basis: &[Vec<f64>]) -> bool {
    if basis.len() != 2 {
        return false;
    }
    let (u, v) = gauss_reduce(&basis[0], &basis[1]);
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot.abs() <= 1e-12 * nu * nv
}

fn grid_points(basis: &[Vec<f64>], per_axis: usize) -> Vec<ModelPoint> {
    let n = basis.len();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut c = vec![0.0; n];
            for b in basis {
                let k = idx % per_axis;
                idx /= per_axis;
                let u = k as f64 / per_axis as f64;
                for (ci, bi) in c.iter_mut().zip(b) {
                    *ci += u * bi;
                }
            }
            ModelPoint::new(c)
        })
        .collect()
}

pub fn run_torus(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let SpaceConfig::Lattice(basis) = &cfg.space else {
        return domain("the torus experiment needs a lattice space");
    };
    let space = build_space(cfg)?;
    let n = space.model().dimension();
    let min_tol = cfg.tolerances.min_tol;
    let seeds = seed_points(&space, cfg.samples.grid_seeds, cfg.rng_seed);
    let inner = SearchOptions {
        execution: Execution::Sequential,
        ..cfg.search.clone()
    };
    let grid = grid_points(basis, cfg.samples.grid);
    let rows = crate::par::map_indexed(cfg.execution, grid.len(), |i| {
        let m = find_farthest_point(&space, &grid[i], &seeds, &inner)?;
        let b = segment_bundle(&space, &m.p1, &m.p2, Some(min_tol))?;
        Ok::<_, GeoError>((m, b.order, b.near_tie))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let orders: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let max_order = orders.iter().copied().max().unwrap_or(0);
    let min_order = orders.iter().copied().min().unwrap_or(0);
    let values: Vec<f64> = rows.iter().map(|r| r.0.value).collect();
    let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let near_ties = rows.iter().filter(|r| r.2).count();

    let origin = ModelPoint::new(vec![0.0; n]);
    let hole = find_farthest_point(&space, &origin, &seeds, &inner)?;
    let hole_bundle = segment_bundle(&space, &origin, &hole.p2, Some(min_tol))?;

    let rectangular = is_rectangular(basis);
    let mut b = Builder::new();
    b.claim(
        "pointed-max-order-n+1",
        "farthest points on a compact flat manifold carry at least n+1 minimizing segments",
        min_order > n,
        format!("every sampled farthest point has order >= {}", n + 1),
        json!({ "min_order": min_order, "samples": orders.len() }),
    );
    if n == 2 {
        let expected = if rectangular { 4 } else { 3 };
        let id = if rectangular {
            "rectangular-torus-order-4"
        } else {
            "flat-torus-order-3"
        };
        let anchor = if rectangular {
            "a lattice with an orthogonal basis has four minimizing segments to its deep hole"
        } else {
            "for a lattice without an orthogonal basis the maximal cut-locus order is 3"
        };
        b.claim(
            id,
            anchor,
            max_order == expected,
            format!("max sampled order == {expected}"),
            json!({ "max_order": max_order }),
        );
    }
    let hole_expected = if n == 2 && rectangular { 4 } else { n + 1 };
    b.claim(
        "deep-hole-order",
        "the n+1 lower bound at a farthest point is attained at a lattice deep hole",
        if n == 2 { hole_bundle.order == hole_expected } else { hole_bundle.order >= hole_expected },
        if n == 2 { format!("order == {hole_expected}") } else { format!("order >= {hole_expected}") },
        json!({ "point": hole.p2.coords, "order": hole_bundle.order }),
    );
    b.measure("grid_points", json!(orders.len()));
    b.measure("max_order", json!(max_order));
    b.measure("min_order", json!(min_order));
    b.measure("farthest_value_min", json!(vmin));
    b.measure("farthest_value_max", json!(vmax));
    b.measure("near_tie_count", json!(near_ties));
    b.measure("rectangular", json!(rectangular));
    b.measure(
        "deep_hole",
        json!({ "point": hole.p2.coords, "value": hole.value, "order": hole_bundle.order, "near_tie": hole_bundle.near_tie }),
    );

    let mut csv = String::from("p1,p2,value,order\n");
    for (i, (m, order, _)) in rows.iter().enumerate() {
        csv.push_str(&format!(
            "\"{}\",\"{}\",{},{}\n",
            coords_str(&grid[i].coords),
            coords_str(&m.p2.coords),
            m.value,
            order
        ));
    }
    Ok(b.finish(cfg, start, Some(csv)))
}

fn coords_str(c: &[f64]) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn max_pair_json(m: &MaxPair) -> Value {
    json!({
        "p1": m.p1.coords,
        "p2": m.p2.coords,
        "value": m.value,
        "iterations": m.iterations,
        "final_step": m.final_step,
        "seed_index": m.seed_index,
    })
}

/// The default first point of the pointed search: a generic point near the
/// base point.
pub fn default_pointed_origin(space: &QuotientSpace) -> ModelPoint {
    let model = space.model();
    model.polar(0.3 * model.radius(), 0.5)
}

/// Minimum-separation gap after the `order` nearest lifts of `p2` around `p1`.
fn max_fiber_gap(space: &QuotientSpace, m: &MaxPair, order: usize) -> Result<f64> {
    let orbit = space.orbit(&m.p2, &m.p1, m.value + 1.0, Execution::Sequential)?;
    fiber_gap(&orbit, order.max(1))
}

pub fn run_hyperbolic(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let space = build_space(cfg)?;
    if space.is_lattice() {
        return domain("the hyperbolic experiment needs the octagon surface");
    }
    let n = space.model().dimension();
    let tol = &cfg.tolerances;
    let opts = cfg.search_options();
    let mut b = Builder::new();

    let pair_seeds = seed_pairs(&space, cfg.seeds, cfg.rng_seed);
    match find_max_pair(&space, &pair_seeds, &opts) {
        Ok(mut m) => {
            let bundle = segment_bundle(&space, &m.p1, &m.p2, Some(tol.min_tol))?;
            let probe = strict_max_probe(&space, &m, tol.probe_radius, cfg.samples.probe_dirs, cfg.rng_seed)?;
            let gap = max_fiber_gap(&space, &m, bundle.order)?;
            m.certificate = Some(probe.clone());
            b.claim(
                "pair-max-order-2n+1",
                "a local maximum of the distance function is joined by at least 2n+1 minimizing segments",
                bundle.order > 2 * n,
                format!("order >= {}", 2 * n + 1),
                json!({ "order": bundle.order, "near_tie": bundle.near_tie }),
            );
            b.claim(
                "pair-max-stagnation",
                "pattern search stagnates at the final step size",
                m.final_step < opts.min_step,
                format!("final step < {:e}", opts.min_step),
                json!({ "final_step": m.final_step, "iterations": m.iterations }),
            );
            b.claim(
                "pair-max-strict",
                "the maximum is strict in the product topology",
                probe.margin > 0.0 && tol.probe_radius < gap / 4.0,
                "probe margin > 0 with radius < fiber gap / 4",
                json!({ "margin": probe.margin, "radius": probe.radius, "directions": probe.n_dirs, "fiber_gap": gap }),
            );
            b.measure("pair_max", max_pair_json(&m));
            b.measure("pair_bundle", serde_json::to_value(&bundle).expect("bundle serializes"));
        }
        Err(e) => {
            b.claim(
                "pair-max-order-2n+1",
                "a local maximum of the distance function is joined by at least 2n+1 minimizing segments",
                false,
                format!("order >= {}", 2 * n + 1),
                json!({ "error": e.to_string() }),
            );
        }
    }

    let p1 = match &cfg.p1 {
        Some(c) => space.model().point(c.clone())?,
        None => default_pointed_origin(&space),
    };
    let point_seeds = seed_points(&space, cfg.seeds, cfg.rng_seed.wrapping_add(1));
    match find_farthest_point(&space, &p1, &point_seeds, &opts) {
        Ok(mut m) => {
            let bundle = segment_bundle(&space, &m.p1, &m.p2, Some(tol.min_tol))?;
            let probe = strict_max_probe(&space, &m, tol.probe_radius, cfg.samples.probe_dirs, cfg.rng_seed)?;
            m.certificate = Some(probe.clone());
            b.claim(
                "pointed-max-order-n+1",
                "a local maximum of the distance from a fixed point is joined to it by at least n+1 minimizing segments",
                bundle.order > n,
                format!("order >= {}", n + 1),
                json!({ "order": bundle.order, "near_tie": bundle.near_tie }),
            );
            b.claim(
                "pointed-max-strict",
                "the pointed maximum is strict",
                probe.margin > 0.0,
                "probe margin > 0",
                json!({ "margin": probe.margin, "radius": probe.radius, "directions": probe.n_dirs }),
            );
            b.measure("pointed_max", max_pair_json(&m));
            b.measure("pointed_bundle", serde_json::to_value(&bundle).expect("bundle serializes"));
        }
        Err(e) => {
            b.claim(
                "pointed-max-order-n+1",
                "a local maximum of the distance from a fixed point is joined to it by at least n+1 minimizing segments",
                false,
                format!("order >= {}", n + 1),
                json!({ "error": e.to_string() }),
            );
        }
    }
    b.measure("injectivity_floor", json!(space.injectivity_floor()));
    b.measure("domain_radius", json!(space.domain_radius()));
    Ok(b.finish(cfg, start, None))
}

pub fn run_convexity(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let h = ModelSpace::plane(cfg.curvature)?;
    let tol = cfg.tolerances.tol_conv;
    let s = &cfg.samples;
    let spread = 3.0 * h.radius();
    let mut b = Builder::new();

    let mid = midpoint_sweep(&h, s.midpoint_trials, spread, tol, cfg.rng_seed, cfg.execution);
    b.claim(
        "midpoint-strict",
        "the midpoint inequality is strict off a common geodesic",
        mid.violations == 0,
        "0 violations",
        serde_json::to_value(&mid).expect("serializes"),
    );
    b.claim(
        "interior-convexity",
        "distance between geodesics is convex at interior parameters",
        mid.interior_violations == 0,
        "0 violations",
        json!({ "violations": mid.interior_violations }),
    );

    let fixture: Vec<ModelPoint> = [-1.2, 0.3, -0.4, 1.6].iter().map(|t| h.polar(*t * h.radius(), 0.9)).collect();
    let eq = midpoint_check(&h, &fixture[0], &fixture[1], &fixture[2], &fixture[3])?;
    b.claim(
        "midpoint-equality-on-geodesic",
        "the midpoint inequality is an equality on a common geodesic",
        (eq.lhs - eq.rhs).abs() <= 1e-10,
        "|lhs - rhs| <= 1e-10",
        serde_json::to_value(eq).expect("serializes"),
    );

    let flat = comparison_sweep(&h, 0.0, s.comparison_trials, spread, tol, cfg.rng_seed.wrapping_add(1), cfg.execution)?;
    b.claim(
        "comparison-inequality",
        "geodesic chords are no longer than in a flat comparison triangle",
        flat.violations == 0,
        format!("d(q,r) <= d*(q*,r*) + {tol:e} in every trial"),
        serde_json::to_value(&flat).expect("serializes"),
    );
    let same = comparison_sweep(
        &h,
        cfg.curvature,
        s.comparison_trials.min(1_000),
        spread,
        tol,
        cfg.rng_seed.wrapping_add(2),
        cfg.execution,
    )?;
    b.claim(
        "comparison-equality",
        "comparison in the model's own curvature is an equality",
        same.max_abs_gap <= tol,
        format!("max |d - d*| <= {tol:e}"),
        serde_json::to_value(&same).expect("serializes"),
    );

    let prof = profile_sweep(&h, s.profile_trials, spread, s.profile_samples, tol, cfg.rng_seed.wrapping_add(3), cfg.execution);
    b.claim(
        "product-distance-convex",
        "distance on a product of disjoint convex sets is convex",
        prof.product_violations == 0,
        "0 negative second differences",
        serde_json::to_value(&prof).expect("serializes"),
    );
    b.claim(
        "pointed-distance-nonconstant",
        "distance from a point is convex and never constant along a geodesic",
        prof.pointed_violations == 0 && prof.pointed_constant == 0,
        "0 violations and 0 constant profiles",
        json!({ "violations": prof.pointed_violations, "constant": prof.pointed_constant, "min_spread": prof.min_pointed_spread }),
    );

    let g1 = h.segment(&h.polar(-2.0 * h.radius(), 0.3), &h.polar(-h.radius(), 0.3))?;
    let g2 = h.segment(&h.polar(0.5 * h.radius(), 0.3), &h.polar(1.5 * h.radius(), 0.3))?;
    let (line, _) = product_convexity_profile(&g1, &g2, s.profile_samples)?;
    b.claim(
        "product-exceptional-line",
        "along one common geodesic the product distance is affine",
        line.exceptional_direction_detected && line.min_margin.abs() <= tol,
        "exceptional direction detected with second differences within tolerance",
        json!({ "classification": line.classification, "min_margin": line.min_margin }),
    );
    let generic = pointed_convexity_profile(&h.origin(), &h.segment(&h.polar(h.radius(), 0.0), &h.polar(h.radius(), 1.2))?, s.profile_samples)?;
    b.measure("generic_pointed_profile", serde_json::to_value(&generic).expect("serializes"));

    let mut csv = String::from("profile,t,second_difference\n");
    for (name, report) in [("exceptional_line", &line), ("generic_pointed", &generic)] {
        for (t, sd) in &report.samples {
            csv.push_str(&format!("{name},{t},{sd}\n"));
        }
    }
    Ok(b.finish(cfg, start, Some(csv)))
}

pub fn run_halfspace(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let s = &cfg.samples;
    let checks = halfspace_checks(s.halfspace_systems, s.max_dim, s.halfspace_samples, cfg.rng_seed, cfg.execution);
    let sweep = HalfspaceSweep::from_checks(&checks);
    let mut b = Builder::new();
    b.claim(
        "halfspace-cover-dimension",
        "closed half-spaces of k hyperplanes covering R^n force an intersection of dimension at least n-k+1",
        sweep.counterexamples == 0,
        "0 counterexamples",
        serde_json::to_value(&sweep).expect("serializes"),
    );
    b.measure("sweep", serde_json::to_value(&sweep).expect("serializes"));
    let mut csv = String::from("system,n,k,covers,dim_intersection,bound,samples_used\n");
    for (i, c) in checks.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{}\n",
            c.dimension, c.hyperplanes, c.covers, c.dim_intersection, c.bound, c.samples_used
        ));
    }
    Ok(b.finish(cfg, start, Some(csv)))
}
