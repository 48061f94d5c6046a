//! Maps and vector fields on the nonnegative orthant, and the semiflow they
//! generate.
//!
//! A [`ModelSpec`] carries the right-hand side `F(z)`. A
//! [`FocalDecomposition`] splits the state into a complement block `x` and a
//! focal block `y` whose update is linear in `y`: `y(t+1) = A(z) y` for maps,
//! `y' = A(z) y` for flows. Whenever a decomposition is passed to the
//! stepping functions the focal block is evaluated as `A(z) y`, so a focal
//! block that starts at exactly zero stays exactly zero.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{norm2, Matrix};

/// Undershoot below zero that is treated as round-off on a map step.
pub const DISCRETE_CLAMP_TOL: f64 = 1e-9;
/// Relative undershoot tolerated on a flow step before it is rejected.
pub const CONTINUOUS_REJECT_TOL: f64 = 1e-6;
pub const DEFAULT_DT: f64 = 1e-3;

pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type CocycleFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    Discrete,
    Continuous,
}

#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    kind: TimeKind,
    component_names: Vec<String>,
    params: Vec<(String, f64)>,
    rhs: VectorFn,
    per_capita: Option<VectorFn>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("component_names", &self.component_names)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    pub fn new<F>(
        name: impl Into<String>,
        kind: TimeKind,
        component_names: Vec<String>,
        params: Vec<(String, f64)>,
        rhs: F,
    ) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            kind,
            component_names,
            params,
            rhs: Arc::new(rhs),
            per_capita: None,
        }
    }

    /// Attaches per-capita factors `g` with `F_i(z) = z_i g_i(z)`, which makes
    /// [`ModelSpec::kolmogorov_decomposition`] available for any focal set.
    pub fn with_per_capita<F>(mut self, factors: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.per_capita = Some(Arc::new(factors));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> TimeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.component_names.len()
    }

    pub fn component_names(&self) -> &[String] {
        &self.component_names
    }

    pub fn index_of(&self, component: &str) -> Option<usize> {
        self.component_names.iter().position(|c| c == component)
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        (self.rhs)(z, &mut out);
        out
    }

    pub fn per_capita(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.per_capita.as_ref().map(|g| {
            let mut out = vec![0.0; self.dim()];
            g(z, &mut out);
            out
        })
    }

    /// Diagonal cocycle built from the per-capita factors of the focal
    /// components; the complement map is the projection of the right-hand side.
    pub fn kolmogorov_decomposition(&self, focal: &[usize]) -> Result<FocalDecomposition> {
        let factors = self.per_capita.clone().ok_or_else(|| {
            Error::InconsistentDecomposition(format!(
                "model `{}` has no per-capita factors",
                self.name
            ))
        })?;
        let n = self.dim();
        let focal_idx = focal.to_vec();
        let complement: Vec<usize> = (0..n).filter(|i| !focal.contains(i)).collect();
        let cocycle_idx = focal_idx.clone();
        let diagonal = factors.clone();
        let cocycle = move |z: &[f64]| {
            let mut g = vec![0.0; z.len()];
            factors(z, &mut g);
            let diag: Vec<f64> = cocycle_idx.iter().map(|&i| g[i]).collect();
            Matrix::from_diagonal(&diag)
        };
        let rhs = self.rhs.clone();
        let comp_idx = complement.clone();
        let complement_map = move |z: &[f64], out: &mut [f64]| {
            let mut full = vec![0.0; z.len()];
            rhs(z, &mut full);
            for (o, &i) in out.iter_mut().zip(&comp_idx) {
                *o = full[i];
            }
        };
        let mut dec = FocalDecomposition::new(n, focal_idx, cocycle, complement_map)?;
        dec.diagonal = Some(diagonal);
        Ok(dec)
    }

    /// Resolves component names to indices.
    pub fn indices_of(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|name| {
                self.index_of(name).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "model `{}` has no component `{name}` (components: {})",
                        self.name,
                        self.component_names.join(", ")
                    ))
                })
            })
            .collect()
    }
}

#[derive(Clone)]
pub struct FocalDecomposition {
    focal: Vec<usize>,
    complement: Vec<usize>,
    cocycle: CocycleFn,
    complement_map: VectorFn,
    diagonal: Option<VectorFn>,
}

impl fmt::Debug for FocalDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FocalDecomposition")
            .field("focal", &self.focal)
            .field("complement", &self.complement)
            .finish_non_exhaustive()
    }
}

impl FocalDecomposition {
    /// `cocycle` returns the `q x q` matrix `A(z)`; `complement_map` writes the
    /// `p` complement components of `F(z)`.
    pub fn new<A, C>(n: usize, focal: Vec<usize>, cocycle: A, complement_map: C) -> Result<Self>
    where
        A: Fn(&[f64]) -> Matrix + Send + Sync + 'static,
        C: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if focal.is_empty() {
            return Err(Error::InconsistentDecomposition("focal block is empty".into()));
        }
        let mut seen = vec![false; n];
        for &i in &focal {
            if i >= n {
                return Err(Error::InconsistentDecomposition(format!(
                    "focal index {i} out of range for dimension {n}"
                )));
            }
            if seen[i] {
                return Err(Error::InconsistentDecomposition(format!(
                    "focal index {i} repeated"
                )));
            }
            seen[i] = true;
        }
        let complement = (0..n).filter(|&i| !seen[i]).collect();
        Ok(Self {
            focal,
            complement,
            cocycle: Arc::new(cocycle),
            complement_map: Arc::new(complement_map),
            diagonal: None,
        })
    }

    pub fn focal(&self) -> &[usize] {
        &self.focal
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn q(&self) -> usize {
        self.focal.len()
    }

    pub fn p(&self) -> usize {
        self.complement.len()
    }

    pub fn n(&self) -> usize {
        self.focal.len() + self.complement.len()
    }

    pub fn cocycle(&self, z: &[f64]) -> Matrix {
        (self.cocycle)(z)
    }

    pub fn complement_map(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        (self.complement_map)(z, &mut out);
        out
    }

    pub fn focal_part(&self, z: &[f64]) -> Vec<f64> {
        self.focal.iter().map(|&i| z[i]).collect()
    }

    pub fn complement_part(&self, z: &[f64]) -> Vec<f64> {
        self.complement.iter().map(|&i| z[i]).collect()
    }

    /// Reassembles a full state from its blocks.
    pub fn embed(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n()];
        for (&i, &v) in self.complement.iter().zip(x) {
            z[i] = v;
        }
        for (&i, &v) in self.focal.iter().zip(y) {
            z[i] = v;
        }
        z
    }

    /// `A(z) y`.
    pub fn focal_update(&self, z: &[f64]) -> Vec<f64> {
        let y = self.focal_part(z);
        if y.iter().all(|&v| v == 0.0) {
            return vec![0.0; y.len()];
        }
        self.cocycle(z).mul_vec(&y)
    }

    pub fn describe(&self, model: &ModelSpec) -> String {
        let names = model.component_names();
        self.focal
            .iter()
            .map(|&i| names[i].as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// Worst deviations found by [`check_consistency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub focal_residual: f64,
    pub complement_residual: f64,
    pub min_boundary_entry: f64,
}

/// Samples `samples` pseudo-random points of `[0, bound]^n` and checks that the
/// focal block of `F` equals `A(z) y`, that the complement map matches `F`, and
/// that `A(x, 0)` is entrywise nonnegative. Tolerance is `1e-12 (1 + |y|)`
/// relative to the focal scale.
pub fn check_consistency(
    model: &ModelSpec,
    decomposition: &FocalDecomposition,
    samples: usize,
    bound: f64,
    seed: u64,
) -> Result<ConsistencyReport> {
    if decomposition.n() != model.dim() {
        return Err(Error::InconsistentDecomposition(format!(
            "decomposition covers {} components, model has {}",
            decomposition.n(),
            model.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ConsistencyReport {
        focal_residual: 0.0,
        complement_residual: 0.0,
        min_boundary_entry: f64::INFINITY,
    };
    for _ in 0..samples {
        let z: Vec<f64> = (0..model.dim()).map(|_| rng.random::<f64>() * bound).collect();
        let full = model.eval(&z);
        let y = decomposition.focal_part(&z);
        let ay = decomposition.cocycle(&z).mul_vec(&y);
        let scale = 1.0 + norm2(&y);
        for (k, &i) in decomposition.focal().iter().enumerate() {
            let scaled = (full[i] - ay[k]).abs() / scale;
            report.focal_residual = report.focal_residual.max(scaled);
        }
        let comp = decomposition.complement_map(&z);
        for (k, &i) in decomposition.complement().iter().enumerate() {
            let scaled = (full[i] - comp[k]).abs() / (1.0 + full[i].abs());
            report.complement_residual = report.complement_residual.max(scaled);
        }
        let x = decomposition.complement_part(&z);
        let boundary = decomposition.embed(&x, &vec![0.0; decomposition.q()]);
        let a0 = decomposition.cocycle(&boundary);
        for i in 0..a0.rows() {
            for j in 0..a0.cols() {
                if model.kind() == TimeKind::Continuous && i == j {
                    continue;
                }
                report.min_boundary_entry = report.min_boundary_entry.min(a0[(i, j)]);
            }
        }
    }
    if !(report.focal_residual <= 1e-12) {
        return Err(Error::InconsistentDecomposition(format!(
            "focal block differs from A(z)y by {:e}",
            report.focal_residual
        )));
    }
    if !(report.complement_residual <= 1e-12) {
        return Err(Error::InconsistentDecomposition(format!(
            "complement map differs from F by {:e}",
            report.complement_residual
        )));
    }
    // For flows only off-diagonal entries are checked; the diagonal is a
    // per-capita growth rate and may take either sign.
    if report.min_boundary_entry < 0.0 {
        return Err(Error::InconsistentDecomposition(format!(
            "A(x,0) has a negative entry {:e}",
            report.min_boundary_entry
        )));
    }
    Ok(report)
}

fn check_finite(z: &[f64]) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState(z.to_vec()))
    }
}

/// Vector field (or next state) with the focal block replaced by `A(z) y`.
fn evaluate(model: &ModelSpec, decomposition: Option<&FocalDecomposition>, z: &[f64]) -> Vec<f64> {
    let mut out = model.eval(z);
    if let Some(dec) = decomposition {
        if let Some(factors) = &dec.diagonal {
            if dec.focal.iter().all(|&i| z[i] == 0.0) {
                for &i in &dec.focal {
                    out[i] = 0.0;
                }
            } else {
                let mut g = [0.0; 8];
                let mut heap;
                let g: &mut [f64] = if z.len() <= g.len() {
                    &mut g[..z.len()]
                } else {
                    heap = vec![0.0; z.len()];
                    &mut heap
                };
                factors(z, g);
                for &i in &dec.focal {
                    out[i] = g[i] * z[i];
                }
            }
            return out;
        }
        let ay = dec.focal_update(z);
        for (&i, v) in dec.focal().iter().zip(ay) {
            out[i] = v;
        }
    }
    out
}

/// One application of the map `z -> F(z)`.
pub fn step_discrete(
    model: &ModelSpec,
    decomposition: Option<&FocalDecomposition>,
    z: &[f64],
) -> Result<Vec<f64>> {
    if model.kind() != TimeKind::Discrete {
        return Err(Error::InvalidInput(format!(
            "model `{}` is continuous; use integrate_step",
            model.name()
        )));
    }
    let mut next = evaluate(model, decomposition, z);
    check_finite(&next)?;
    for (index, v) in next.iter_mut().enumerate() {
        if *v < -DISCRETE_CLAMP_TOL {
            return Err(Error::NegativeState { index, value: *v });
        }
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
    Ok(next)
}

/// The vector field with the focal block evaluated as `A(z) y`.
pub fn vector_field(
    model: &ModelSpec,
    decomposition: Option<&FocalDecomposition>,
    z: &[f64],
) -> Vec<f64> {
    evaluate(model, decomposition, z)
}

/// One classical fourth-order Runge–Kutta step of size `dt`.
pub fn integrate_step(
    model: &ModelSpec,
    decomposition: Option<&FocalDecomposition>,
    z: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    rk4(model, decomposition, z, dt, false).map(|(next, _)| next)
}

/// [`integrate_step`] that also returns the four points at which the vector
/// field was evaluated, so that a variational equation can be advanced on
/// exactly the same grid.
pub(crate) fn integrate_step_with_stages(
    model: &ModelSpec,
    decomposition: Option<&FocalDecomposition>,
    z: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, [Vec<f64>; 4])> {
    rk4(model, decomposition, z, dt, true).map(|(next, stages)| (next, stages.unwrap_or_default()))
}

fn rk4(
    model: &ModelSpec,
    decomposition: Option<&FocalDecomposition>,
    z: &[f64],
    dt: f64,
    keep_stages: bool,
) -> Result<(Vec<f64>, Option<[Vec<f64>; 4]>)> {
    if model.kind() != TimeKind::Continuous {
        return Err(Error::InvalidInput(format!(
            "model `{}` is a map; use step_discrete",
            model.name()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let f = |s: &[f64]| evaluate(model, decomposition, s);
    let shifted = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, k)| b + h * k).collect()
    };
    let k1 = f(z);
    let z2 = shifted(z, &k1, 0.5 * dt);
    let k2 = f(&z2);
    let z3 = shifted(z, &k2, 0.5 * dt);
    let k3 = f(&z3);
    let z4 = shifted(z, &k3, dt);
    let k4 = f(&z4);
    let mut next: Vec<f64> = (0..z.len())
        .map(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    check_finite(&next)?;
    let floor = -CONTINUOUS_REJECT_TOL * (1.0 + norm2(z));
    for (index, v) in next.iter_mut().enumerate() {
        if *v < floor {
            return Err(Error::StepRejected { index, value: *v });
        }
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
    let stages = keep_stages.then(|| [z.to_vec(), z2, z3, z4]);
    Ok((next, stages))
}

/// One step of whichever kind the model is; `dt` is ignored for maps.
pub fn advance(
    model: &ModelSpec,
    decomposition: Option<&FocalDecomposition>,
    z: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    match model.kind() {
        TimeKind::Discrete => step_discrete(model, decomposition, z),
        TimeKind::Continuous => integrate_step(model, decomposition, z, dt),
    }
}

/// Number of steps that cover `duration`: an integer count for maps, full
/// `dt` steps (tolerating round-off) for flows.
pub fn steps_for(kind: TimeKind, duration: f64, dt: f64) -> usize {
    match kind {
        TimeKind::Discrete => duration.ceil().max(0.0) as usize,
        TimeKind::Continuous => (duration / dt - 1e-9).ceil().max(0.0) as usize,
    }
}

/// `Φ(t, z0)`. For maps `t` must be a whole number of steps. For flows the
/// integration uses full steps of `dt` plus one final partial step.
pub fn semiflow(
    model: &ModelSpec,
    decomposition: Option<&FocalDecomposition>,
    z0: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be nonnegative, got {t}")));
    }
    let mut z = z0.to_vec();
    match model.kind() {
        TimeKind::Discrete => {
            if t.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "discrete time must be an integer, got {t}"
                )));
            }
            for _ in 0..t as u64 {
                z = step_discrete(model, decomposition, &z)?;
            }
        }
        TimeKind::Continuous => {
            let full = (t / dt + 1e-9).floor() as u64;
            for _ in 0..full {
                z = integrate_step(model, decomposition, &z, dt)?;
            }
            let rest = t - full as f64 * dt;
            if rest > 1e-12 * dt {
                z = integrate_step(model, decomposition, &z, rest)?;
            }
        }
    }
    Ok(z)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Times {
    Steps(Vec<u64>),
    Real(Vec<f64>),
}

impl Times {
    pub fn len(&self) -> usize {
        match self {
            Times::Steps(t) => t.len(),
            Times::Real(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            Times::Steps(t) => t[i] as f64,
            Times::Real(t) => t[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: String,
    pub times: Times,
    pub states: Vec<Vec<f64>>,
    /// Recording interval in steps.
    pub stride: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        let n = self.states.len();
        (n > 0).then(|| (self.times.get(n - 1), self.states[n - 1].as_slice()))
    }
}

/// Runs from `z0` for `horizon` time units, recording every `stride` steps.
/// The first entry is `(0, z0)` and the last lies at or past `horizon`.
pub fn simulate(
    model: &ModelSpec,
    decomposition: Option<&FocalDecomposition>,
    z0: &[f64],
    horizon: f64,
    stride: usize,
    dt: f64,
) -> Result<Trajectory> {
    if z0.len() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "initial state has {} components, model has {}",
            z0.len(),
            model.dim()
        )));
    }
    if let Some((index, &value)) = z0.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeState { index, value });
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be nonnegative, got {horizon}")));
    }
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be at least one step".into()));
    }
    let total = steps_for(model.kind(), horizon, dt);
    let last = total.div_ceil(stride) * stride;
    let mut steps = vec![0u64];
    let mut states = vec![z0.to_vec()];
    let mut z = z0.to_vec();
    for k in 1..=last {
        z = advance(model, decomposition, &z, dt)?;
        if k % stride == 0 {
            steps.push(k as u64);
            states.push(z.clone());
        }
    }
    let times = match model.kind() {
        TimeKind::Discrete => Times::Steps(steps),
        TimeKind::Continuous => Times::Real(steps.iter().map(|&k| k as f64 * dt).collect()),
    };
    Ok(Trajectory {
        model: model.name().to_string(),
        times,
        states,
        stride,
    })
}
