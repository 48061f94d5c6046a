//! Dynamics on the extinction set of a focal block and their limit sets.

use crate::dynsys::{self, FocalDecomposition, ModelSpec, TimeKind};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::{dist2, norm2, Matrix};
use crate::sampling::halton_box;

/// Points of the reduced system closer than this are the same equilibrium.
pub const DEDUP_DISTANCE: f64 = 1e-6;
pub const DEFAULT_EQUILIBRIUM_TOL: f64 = 1e-8;
pub const DEFAULT_CYCLE_TOL: f64 = 1e-6;
pub const MAX_CYCLE_PERIOD: usize = 64;
/// Number of trailing tail points that must agree for an equilibrium.
const EQUILIBRIUM_WINDOW: usize = 50;
const MAX_NEWTON_ITERATIONS: usize = 100;
const MAX_BOX_SAMPLES: usize = 8;

/// The system `x -> F(x, 0)` obtained by pinning the focal block to zero.
#[derive(Debug, Clone)]
pub struct BoundarySubsystem {
    parent: ModelSpec,
    decomposition: FocalDecomposition,
    reduced: ModelSpec,
}

impl BoundarySubsystem {
    pub fn parent(&self) -> &ModelSpec {
        &self.parent
    }

    pub fn decomposition(&self) -> &FocalDecomposition {
        &self.decomposition
    }

    pub fn reduced(&self) -> &ModelSpec {
        &self.reduced
    }

    pub fn dim(&self) -> usize {
        self.decomposition.p()
    }

    pub fn kind(&self) -> TimeKind {
        self.parent.kind()
    }

    /// The full state `(x, 0)`.
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        self.decomposition.embed(x, &vec![0.0; self.decomposition.q()])
    }

    /// `F(x,0) - x` for maps, `F(x,0)` for flows.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let fx = self.reduced.eval(x);
        match self.kind() {
            TimeKind::Discrete => fx.iter().zip(x).map(|(f, x)| f - x).collect(),
            TimeKind::Continuous => fx,
        }
    }

    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Builds the subsystem on `{ y = 0 }` after checking the decomposition
/// against the model on sampled points.
pub fn restrict_to_extinction_set(
    model: &ModelSpec,
    decomposition: &FocalDecomposition,
) -> Result<BoundarySubsystem> {
    dynsys::check_consistency(model, decomposition, 256, 10.0, 0)?;
    let dec = decomposition.clone();
    let names = decomposition
        .complement()
        .iter()
        .map(|&i| model.component_names()[i].clone())
        .collect();
    let q = decomposition.q();
    let reduced = ModelSpec::new(
        format!("{}|{}=0", model.name(), decomposition.describe(model)),
        model.kind(),
        names,
        model.params().to_vec(),
        move |x: &[f64], out: &mut [f64]| {
            let z = dec.embed(x, &vec![0.0; q]);
            out.copy_from_slice(&dec.complement_map(&z));
        },
    );
    Ok(BoundarySubsystem {
        parent: model.clone(),
        decomposition: decomposition.clone(),
        reduced,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Coordinates in the complement block.
    pub point: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSearch {
    pub equilibria: Vec<Equilibrium>,
    /// Seeds whose Newton iteration failed, with the reason.
    pub failures: Vec<(Vec<f64>, String)>,
}

fn jacobian(sub: &BoundarySubsystem, x: &[f64], g: &[f64]) -> Matrix {
    let p = x.len();
    let mut j = Matrix::zeros(p, p);
    for col in 0..p {
        let h = 1e-7 * (1.0 + x[col].abs());
        let mut xp = x.to_vec();
        xp[col] += h;
        let gp = sub.residual(&xp);
        if x[col] >= h {
            let mut xm = x.to_vec();
            xm[col] -= h;
            let gm = sub.residual(&xm);
            for row in 0..p {
                j[(row, col)] = (gp[row] - gm[row]) / (2.0 * h);
            }
        } else {
            for row in 0..p {
                j[(row, col)] = (gp[row] - g[row]) / h;
            }
        }
    }
    j
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton iteration on the boundary residual, projected onto the
/// orthant.
pub fn newton(sub: &BoundarySubsystem, seed: &[f64], tol: f64) -> std::result::Result<Equilibrium, String> {
    let mut x = seed.to_vec();
    let mut g = sub.residual(&x);
    let mut r = max_abs(&g);
    let limit = 1e3 * (1.0 + norm2(seed)) + 1e3;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if !r.is_finite() {
            return Err("residual became non-finite".into());
        }
        if r <= tol {
            // one more polishing step if it helps
            if let Some(dx) = jacobian(sub, &x, &g).solve(&g.iter().map(|v| -v).collect::<Vec<_>>()) {
                let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| (a + d).max(0.0)).collect();
                let rc = sub.residual_norm(&cand);
                if rc < r {
                    return Ok(Equilibrium { point: cand, residual: rc });
                }
            }
            return Ok(Equilibrium { point: x, residual: r });
        }
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let dx = jacobian(sub, &x, &g)
            .solve(&neg_g)
            .ok_or_else(|| "singular Jacobian".to_string())?;
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-4 {
            let cand: Vec<f64> = x
                .iter()
                .zip(&dx)
                .map(|(a, d)| (a + lambda * d).max(0.0))
                .collect();
            let gc = sub.residual(&cand);
            let rc = max_abs(&gc);
            if rc.is_finite() && rc < r {
                accepted = Some((cand, gc, rc));
                break;
            }
            lambda *= 0.5;
        }
        let (cand, gc, rc) = match accepted {
            Some(a) => a,
            None => {
                let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| (a + d).max(0.0)).collect();
                let gc = sub.residual(&cand);
                let rc = max_abs(&gc);
                (cand, gc, rc)
            }
        };
        if norm2(&cand) > limit {
            return Err("iterate diverged".into());
        }
        x = cand;
        g = gc;
        r = rc;
    }
    if r <= tol {
        Ok(Equilibrium { point: x, residual: r })
    } else {
        Err(format!("no convergence after {MAX_NEWTON_ITERATIONS} iterations (residual {r:e})"))
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn push_unique(list: &mut Vec<Equilibrium>, eq: Equilibrium) {
    if let Some(existing) = list
        .iter_mut()
        .find(|e| dist2(&e.point, &eq.point) < DEDUP_DISTANCE)
    {
        if eq.residual < existing.residual {
            *existing = eq;
        }
    } else {
        list.push(eq);
    }
}

/// Newton from the lower corner of `[lower, upper]` and from `n_starts`
/// Halton points inside it; distinct roots with residual at most `tol`.
pub fn find_equilibria(
    sub: &BoundarySubsystem,
    lower: &[f64],
    upper: &[f64],
    n_starts: usize,
    tol: f64,
) -> Result<EquilibriumSearch> {
    if sub.dim() == 0 {
        return Ok(EquilibriumSearch {
            equilibria: vec![Equilibrium { point: Vec::new(), residual: 0.0 }],
            failures: Vec::new(),
        });
    }
    if lower.len() != sub.dim() || upper.len() != sub.dim() {
        return Err(Error::InvalidInput("search box has wrong dimension".into()));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(*l >= 0.0 && l <= u)) {
        return Err(Error::InvalidInput("search box must lie in the orthant with lower <= upper".into()));
    }
    let mut seeds = vec![lower.to_vec()];
    seeds.extend(halton_box(lower, upper, n_starts, 0));
    let mut found = Vec::new();
    let mut failures = Vec::new();
    for seed in seeds {
        match newton(sub, &seed, tol) {
            Ok(eq) => push_unique(&mut found, eq),
            Err(reason) => failures.push((seed, reason)),
        }
    }
    found.sort_by(|a, b| lexicographic(&a.point, &b.point));
    Ok(EquilibriumSearch { equilibria: found, failures })
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttractorItem {
    Equilibrium {
        point: Vec<f64>,
        residual: f64,
    },
    CompactBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        /// Points on the attractor, used to seed Lyapunov estimates.
        samples: Vec<Vec<f64>>,
    },
    PeriodicOrbit {
        points: Vec<Vec<f64>>,
        period: usize,
    },
}

impl AttractorItem {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AttractorItem::Equilibrium { .. } => "equilibrium",
            AttractorItem::CompactBox { .. } => "compact_box",
            AttractorItem::PeriodicOrbit { .. } => "periodic_orbit",
        }
    }

    /// Every point stored in the item.
    pub fn points(&self) -> Vec<&[f64]> {
        match self {
            AttractorItem::Equilibrium { point, .. } => vec![point.as_slice()],
            AttractorItem::CompactBox { lower, upper, .. } => vec![lower.as_slice(), upper.as_slice()],
            AttractorItem::PeriodicOrbit { points, .. } => points.iter().map(Vec::as_slice).collect(),
        }
    }

    /// Whether `x` lies within `tol` of the item.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            AttractorItem::Equilibrium { point, .. } => dist2(point, x) <= tol,
            AttractorItem::PeriodicOrbit { points, .. } => points.iter().any(|p| dist2(p, x) <= tol),
            AttractorItem::CompactBox { lower, upper, .. } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
        }
    }
}

fn spread_scale(points: &[Vec<f64>]) -> f64 {
    1.0 + points.iter().map(|p| norm2(p)).fold(0.0, f64::max)
}

/// Classifies the tail of an orbit: an equilibrium if the last 50 points agree
/// to `tol`, the shortest cycle of period at most 64 that the whole tail
/// follows to `tol`, otherwise the bounding box of the tail. Distances are
/// scaled by `1 + |x|`.
pub fn classify_tail(tail: &[Vec<f64>], tol: f64) -> AttractorItem {
    assert!(!tail.is_empty(), "cannot classify an empty tail");
    let scale = spread_scale(tail);
    let last = &tail[tail.len().saturating_sub(EQUILIBRIUM_WINDOW)..];
    let mut spread: f64 = 0.0;
    for (i, a) in last.iter().enumerate() {
        for b in &last[i + 1..] {
            spread = spread.max(dist2(a, b));
        }
    }
    if spread <= tol * scale {
        return AttractorItem::Equilibrium {
            point: tail[tail.len() - 1].clone(),
            residual: spread,
        };
    }
    for period in 2..=MAX_CYCLE_PERIOD.min(tail.len().saturating_sub(1)) {
        // require the cycle to repeat at least twice within the tail
        if tail.len() < 2 * period {
            break;
        }
        let matches = (0..tail.len() - period).all(|i| dist2(&tail[i], &tail[i + period]) <= tol * scale);
        if matches {
            return AttractorItem::PeriodicOrbit {
                points: tail[tail.len() - period..].to_vec(),
                period,
            };
        }
    }
    let dim = tail[0].len();
    let mut lower = vec![f64::INFINITY; dim];
    let mut upper = vec![f64::NEG_INFINITY; dim];
    for p in tail {
        for d in 0..dim {
            lower[d] = lower[d].min(p[d]);
            upper[d] = upper[d].max(p[d]);
        }
    }
    AttractorItem::CompactBox {
        lower,
        upper,
        samples: vec![tail[tail.len() - 1].clone()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaOptions {
    /// Time discarded before the tail is recorded.
    pub burn_in: f64,
    /// Length of the recorded tail.
    pub window: f64,
    /// Record every `stride` steps.
    pub stride: usize,
    pub dt: f64,
    pub cycle_tol: f64,
    pub equilibrium_tol: f64,
    /// Any state with norm above this aborts with `UnboundedBoundaryDynamics`.
    pub bound: f64,
    pub execution: Execution,
}

impl OmegaOptions {
    pub fn discrete() -> Self {
        Self {
            burn_in: 1e4,
            window: 1e3,
            stride: 1,
            dt: 1.0,
            cycle_tol: DEFAULT_CYCLE_TOL,
            equilibrium_tol: DEFAULT_EQUILIBRIUM_TOL,
            bound: 1e6,
            execution: Execution::default(),
        }
    }

    pub fn continuous(dt: f64) -> Self {
        Self {
            burn_in: 300.0,
            window: 50.0,
            stride: ((0.1 / dt).round() as usize).max(1),
            dt,
            ..Self::discrete()
        }
    }

    pub fn for_kind(kind: TimeKind, dt: f64) -> Self {
        match kind {
            TimeKind::Discrete => Self::discrete(),
            TimeKind::Continuous => Self::continuous(dt),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaLimitEstimate {
    pub members: Vec<AttractorItem>,
    pub seeds_used: usize,
    pub horizon: f64,
}

impl OmegaLimitEstimate {
    pub fn equilibria(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.members.iter().filter_map(|m| match m {
            AttractorItem::Equilibrium { point, .. } => Some(point),
            _ => None,
        })
    }

    /// Smallest box containing every member, optionally ignoring equilibria.
    pub fn enclosing_box(&self, include_equilibria: bool) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut bounds: Option<(Vec<f64>, Vec<f64>)> = None;
        for m in &self.members {
            if !include_equilibria && matches!(m, AttractorItem::Equilibrium { .. }) {
                continue;
            }
            for p in m.points() {
                let (lo, hi) = bounds.get_or_insert_with(|| (p.to_vec(), p.to_vec()));
                for d in 0..p.len() {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
        }
        bounds
    }
}

/// Runs `seed` through the reduced dynamics and returns the recorded tail.
pub fn boundary_tail(sub: &BoundarySubsystem, seed: &[f64], opts: &OmegaOptions) -> Result<Vec<Vec<f64>>> {
    let model = sub.reduced();
    let burn = dynsys::steps_for(model.kind(), opts.burn_in, opts.dt);
    let window = dynsys::steps_for(model.kind(), opts.window, opts.dt);
    let stride = opts.stride.max(1);
    let mut x = seed.to_vec();
    let mut tail = Vec::with_capacity(window / stride + 1);
    for k in 0..burn + window {
        x = dynsys::advance(model, None, &x, opts.dt)?;
        let norm = norm2(&x);
        if !(norm <= opts.bound) {
            return Err(Error::UnboundedBoundaryDynamics { norm, bound: opts.bound });
        }
        if k >= burn && (k - burn + 1) % stride == 0 {
            tail.push(x.clone());
        }
    }
    if tail.is_empty() {
        tail.push(x);
    }
    Ok(tail)
}

fn canonical_cycle(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let start = (0..points.len())
        .min_by(|&a, &b| lexicographic(&points[a], &points[b]))
        .unwrap_or(0);
    points[start..].iter().chain(&points[..start]).cloned().collect()
}

/// Estimates `Ω` of the boundary dynamics from finitely many seeds.
pub fn estimate_omega_limit(
    sub: &BoundarySubsystem,
    seeds: &[Vec<f64>],
    opts: &OmegaOptions,
) -> Result<OmegaLimitEstimate> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("at least one seed is required".into()));
    }
    let horizon = opts.burn_in + opts.window;
    if sub.dim() == 0 {
        return Ok(OmegaLimitEstimate {
            members: vec![AttractorItem::Equilibrium { point: Vec::new(), residual: 0.0 }],
            seeds_used: seeds.len(),
            horizon,
        });
    }
    let tails: Vec<Result<Vec<Vec<f64>>>> = opts.execution.map(seeds, |s| boundary_tail(sub, s, opts));

    let mut equilibria: Vec<Equilibrium> = Vec::new();
    let mut orbits: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut boxed: Option<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> = None;
    let mut absorb_box = |tail: &[Vec<f64>]| {
        if let AttractorItem::CompactBox { lower, upper, samples } = classify_tail_as_box(tail) {
            match boxed.as_mut() {
                None => boxed = Some((lower, upper, samples)),
                Some((lo, hi, s)) => {
                    for d in 0..lo.len() {
                        lo[d] = lo[d].min(lower[d]);
                        hi[d] = hi[d].max(upper[d]);
                    }
                    if s.len() < MAX_BOX_SAMPLES {
                        s.extend(samples);
                    }
                }
            }
        }
    };
    for tail in tails {
        let tail = tail?;
        match classify_tail(&tail, opts.cycle_tol) {
            AttractorItem::Equilibrium { point, .. } => {
                let scale = 1.0 + norm2(&point);
                match newton(sub, &point, opts.equilibrium_tol) {
                    Ok(eq) if dist2(&eq.point, &point) <= 1e-4 * scale => push_unique(&mut equilibria, eq),
                    _ => absorb_box(&tail),
                }
            }
            AttractorItem::PeriodicOrbit { points, .. } => {
                let cycle = canonical_cycle(&points);
                let scale = spread_scale(&cycle);
                let seen = orbits.iter().any(|o| {
                    o.len() == cycle.len() && dist2(&o[0], &cycle[0]) <= 10.0 * opts.cycle_tol * scale
                });
                if !seen {
                    orbits.push(cycle);
                }
            }
            AttractorItem::CompactBox { .. } => absorb_box(&tail),
        }
    }
    equilibria.sort_by(|a, b| lexicographic(&a.point, &b.point));
    orbits.sort_by(|a, b| lexicographic(&a[0], &b[0]));
    let mut members: Vec<AttractorItem> = equilibria
        .into_iter()
        .map(|e| AttractorItem::Equilibrium { point: e.point, residual: e.residual })
        .collect();
    members.extend(orbits.into_iter().map(|points| AttractorItem::PeriodicOrbit {
        period: points.len(),
        points,
    }));
    if let Some((lower, upper, samples)) = boxed {
        members.push(AttractorItem::CompactBox { lower, upper, samples });
    }
    Ok(OmegaLimitEstimate {
        members,
        seeds_used: seeds.len(),
        horizon,
    })
}

fn classify_tail_as_box(tail: &[Vec<f64>]) -> AttractorItem {
    let dim = tail[0].len();
    let mut lower = vec![f64::INFINITY; dim];
    let mut upper = vec![f64::NEG_INFINITY; dim];
    for p in tail {
        for d in 0..dim {
            lower[d] = lower[d].min(p[d]);
            upper[d] = upper[d].max(p[d]);
        }
    }
    AttractorItem::CompactBox {
        lower,
        upper,
        samples: vec![tail[tail.len() - 1].clone()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ricker_pair(r: f64) -> (ModelSpec, FocalDecomposition) {
        let m = ModelSpec::new(
            "ricker-pair",
            TimeKind::Discrete,
            vec!["x".into(), "y".into()],
            vec![],
            move |z, o| {
                o[0] = z[0] * (r * (1.0 - z[0]) - z[1]).exp();
                o[1] = z[1] * (z[0] - 0.5).exp();
            },
        )
        .with_per_capita(move |z, o| {
            o[0] = (r * (1.0 - z[0]) - z[1]).exp();
            o[1] = (z[0] - 0.5).exp();
        });
        let d = m.kolmogorov_decomposition(&[1]).unwrap();
        (m, d)
    }

    #[test]
    fn constant_tail_is_equilibrium() {
        let tail = vec![vec![2.0, 3.0]; 120];
        assert!(matches!(classify_tail(&tail, 1e-6), AttractorItem::Equilibrium { .. }));
    }

    #[test]
    fn alternating_tail_is_two_cycle() {
        let tail: Vec<Vec<f64>> = (0..120).map(|i| vec![if i % 2 == 0 { 1.0 } else { 4.0 }]).collect();
        match classify_tail(&tail, 1e-6) {
            AttractorItem::PeriodicOrbit { period, points } => {
                assert_eq!(period, 2);
                assert_eq!(points.len(), 2);
            }
            other => panic!("expected a cycle, got {other:?}"),
        }
    }

    #[test]
    fn three_cycle_is_minimal_period() {
        let tail: Vec<Vec<f64>> = (0..300).map(|i| vec![(i % 3) as f64]).collect();
        match classify_tail(&tail, 1e-6) {
            AttractorItem::PeriodicOrbit { period, .. } => assert_eq!(period, 3),
            other => panic!("expected a cycle, got {other:?}"),
        }
    }

    #[test]
    fn restricted_map_pins_focal_block() {
        let (m, d) = ricker_pair(1.5);
        let sub = restrict_to_extinction_set(&m, &d).unwrap();
        assert_eq!(sub.dim(), 1);
        let x = [0.7];
        let parent = m.eval(&sub.embed(&x));
        assert!((parent[0] - sub.reduced().eval(&x)[0]).abs() <= 1e-14);
    }

    #[test]
    fn ricker_equilibria_are_zero_and_one() {
        let (m, d) = ricker_pair(1.5);
        let sub = restrict_to_extinction_set(&m, &d).unwrap();
        let found = find_equilibria(&sub, &[0.0], &[3.0], 16, 1e-10).unwrap();
        let pts: Vec<f64> = found.equilibria.iter().map(|e| e.point[0]).collect();
        assert_eq!(pts.len(), 2, "{pts:?}");
        assert!(pts[0].abs() < 1e-10 && (pts[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unbounded_boundary_is_reported() {
        let m = ModelSpec::new("grow", TimeKind::Discrete, vec!["x".into(), "y".into()], vec![], |z, o| {
            o[0] = 2.0 * z[0];
            o[1] = z[1];
        })
        .with_per_capita(|_, o| {
            o[0] = 2.0;
            o[1] = 1.0;
        });
        let d = m.kolmogorov_decomposition(&[1]).unwrap();
        let sub = restrict_to_extinction_set(&m, &d).unwrap();
        let r = estimate_omega_limit(&sub, &[vec![1.0]], &OmegaOptions::discrete());
        assert!(matches!(r, Err(Error::UnboundedBoundaryDynamics { .. })));
    }
}
