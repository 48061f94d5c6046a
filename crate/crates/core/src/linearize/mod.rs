//! Linearised focal dynamics along an orbit.
//!
//! For a decomposition `y -> A(z) y` the fundamental solution `P(t, z)` is the
//! ordered product `A(z(t-1)) ... A(z(0))` for maps, or the solution of
//! `P' = A(Φ(t, z)) P` with `P(0) = I` for flows. Products are carried as
//! `exp(log_norm) * normalized` so long horizons neither overflow nor
//! underflow.

mod spectral;

pub use spectral::{
    eigenvalues, operator_norm, spectral_abscissa, spectral_radius, Eigenvalue, MAX_QR_SWEEPS,
};

use crate::dynsys::{self, FocalDecomposition, ModelSpec, TimeKind};
use crate::error::{Error, Result};
use crate::matrix::{dist2, norm2, Matrix};

/// Renormalisation interval (in steps) for the continuous variational equation.
pub const DEFAULT_RENORM_EVERY: usize = 100;
/// Shortest horizon accepted by [`lyapunov_exponent`], in steps or time units.
pub const MIN_LYAPUNOV_HORIZON: f64 = 1e3;
const CHECKPOINTS_PER_DECADE: f64 = 10.0;

/// `A(z)`, with non-finite entries reported as an error.
pub fn cocycle_matrix(decomposition: &FocalDecomposition, z: &[f64]) -> Result<Matrix> {
    let a = decomposition.cocycle(z);
    if a.rows() != decomposition.q() || a.cols() != decomposition.q() {
        return Err(Error::InconsistentDecomposition(format!(
            "cocycle returned a {}x{} matrix for a focal block of size {}",
            a.rows(),
            a.cols(),
            decomposition.q()
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFiniteMatrix(z.to_vec()));
    }
    Ok(a)
}

/// A renormalised fundamental solution `P(t, z) = exp(log_norm) * normalized`.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleProduct {
    pub log_norm: f64,
    pub normalized: Matrix,
    /// Elapsed time (steps for maps).
    pub elapsed: f64,
    pub base_point: Vec<f64>,
    /// State reached at `elapsed`, `Φ(elapsed, base_point)`.
    pub end_point: Vec<f64>,
}

impl CocycleProduct {
    /// The plain product. Only meaningful while `exp(log_norm)` is representable.
    pub fn reconstruct(&self) -> Matrix {
        self.normalized.scale(self.log_norm.exp())
    }

    /// `ln |P(t, z) eta|`.
    pub fn log_growth(&self, eta: &[f64]) -> f64 {
        self.log_norm + norm2(&self.normalized.mul_vec(eta)).ln()
    }

    /// `ln ||P(t, z)||`.
    pub fn log_operator_norm(&self) -> f64 {
        self.log_norm + operator_norm(&self.normalized).ln()
    }
}

/// Advances the state and its fundamental solution together.
struct Propagator<'a> {
    model: &'a ModelSpec,
    decomposition: &'a FocalDecomposition,
    renorm_every: usize,
    z: Vec<f64>,
    p: Matrix,
    log_norm: f64,
    elapsed: f64,
    steps: u64,
    since_renorm: usize,
}

impl<'a> Propagator<'a> {
    fn new(
        model: &'a ModelSpec,
        decomposition: &'a FocalDecomposition,
        z0: &[f64],
        renorm_every: usize,
    ) -> Result<Self> {
        if z0.len() != model.dim() || decomposition.n() != model.dim() {
            return Err(Error::InvalidInput(format!(
                "state of length {} does not match model dimension {}",
                z0.len(),
                model.dim()
            )));
        }
        Ok(Self {
            model,
            decomposition,
            renorm_every: renorm_every.max(1),
            z: z0.to_vec(),
            p: Matrix::identity(decomposition.q()),
            log_norm: 0.0,
            elapsed: 0.0,
            steps: 0,
            since_renorm: 0,
        })
    }

    fn renormalize(&mut self) -> Result<()> {
        let s = operator_norm(&self.p);
        if s == 0.0 {
            return Err(Error::DegenerateProduct { steps: self.steps });
        }
        if !s.is_finite() {
            return Err(Error::NonFiniteMatrix(self.z.clone()));
        }
        self.log_norm += s.ln();
        self.p = self.p.scale(1.0 / s);
        self.since_renorm = 0;
        Ok(())
    }

    fn step(&mut self, h: f64) -> Result<()> {
        match self.model.kind() {
            TimeKind::Discrete => {
                let a = cocycle_matrix(self.decomposition, &self.z)?;
                self.p = &a * &self.p;
                self.z = dynsys::step_discrete(self.model, Some(self.decomposition), &self.z)?;
                self.elapsed += 1.0;
                self.steps += 1;
                self.renormalize()
            }
            TimeKind::Continuous => {
                let (next, stages) = dynsys::integrate_step_with_stages(
                    self.model,
                    Some(self.decomposition),
                    &self.z,
                    h,
                )?;
                let a: Vec<Matrix> = stages
                    .iter()
                    .map(|s| cocycle_matrix(self.decomposition, s))
                    .collect::<Result<_>>()?;
                let k1 = &a[0] * &self.p;
                let k2 = &a[1] * &self.p.axpy(0.5 * h, &k1);
                let k3 = &a[2] * &self.p.axpy(0.5 * h, &k2);
                let k4 = &a[3] * &self.p.axpy(h, &k3);
                let incr = k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4);
                self.p = self.p.axpy(h / 6.0, &incr);
                self.z = next;
                self.elapsed += h;
                self.steps += 1;
                self.since_renorm += 1;
                if self.since_renorm >= self.renorm_every {
                    self.renormalize()?;
                }
                Ok(())
            }
        }
    }

    fn finish(mut self, base_point: Vec<f64>) -> Result<CocycleProduct> {
        if self.steps > 0 && self.since_renorm > 0 {
            self.renormalize()?;
        }
        Ok(CocycleProduct {
            log_norm: self.log_norm,
            normalized: self.p,
            elapsed: self.elapsed,
            base_point,
            end_point: self.z,
        })
    }

    fn running_log_growth(&self, eta: Option<&[f64]>) -> f64 {
        let scale = match eta {
            Some(eta) => norm2(&self.p.mul_vec(eta)),
            None => operator_norm(&self.p),
        };
        self.log_norm + scale.ln()
    }
}

/// `P(t, z0)`. For maps `t` is a whole number of steps; for flows the
/// variational equation is integrated with RK4 on the state's `dt` grid,
/// renormalising every [`DEFAULT_RENORM_EVERY`] steps.
pub fn fundamental_solution(
    model: &ModelSpec,
    decomposition: &FocalDecomposition,
    z0: &[f64],
    t: f64,
    dt: f64,
) -> Result<CocycleProduct> {
    fundamental_solution_with(model, decomposition, z0, t, dt, DEFAULT_RENORM_EVERY)
}

pub fn fundamental_solution_with(
    model: &ModelSpec,
    decomposition: &FocalDecomposition,
    z0: &[f64],
    t: f64,
    dt: f64,
    renorm_every: usize,
) -> Result<CocycleProduct> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be nonnegative, got {t}")));
    }
    let mut prop = Propagator::new(model, decomposition, z0, renorm_every)?;
    match model.kind() {
        TimeKind::Discrete => {
            if t.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "discrete time must be an integer, got {t}"
                )));
            }
            for _ in 0..t as u64 {
                prop.step(1.0)?;
            }
        }
        TimeKind::Continuous => {
            let full = (t / dt + 1e-9).floor() as u64;
            for _ in 0..full {
                prop.step(dt)?;
            }
            let rest = t - full as f64 * dt;
            if rest > 1e-12 * dt {
                prop.step(rest)?;
            }
        }
    }
    prop.finish(z0.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    /// The most expanding direction of the product.
    Dominant,
    /// A fixed unit vector `eta`.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub time: f64,
    pub log_growth: f64,
    pub running_average: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    /// `(1/T) ln |P(T, z) eta|` at the final horizon.
    pub value: f64,
    /// Largest running average over the last decade of checkpoints; the
    /// finite-horizon stand-in for the limsup.
    pub limsup: f64,
    pub horizon: f64,
    pub direction: Direction,
    pub diagnostics: Vec<Checkpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    pub dt: f64,
    pub renorm_every: usize,
    /// Time spent relaxing the start point before the product begins.
    pub burn_in: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            dt: dynsys::DEFAULT_DT,
            renorm_every: DEFAULT_RENORM_EVERY,
            burn_in: 0.0,
        }
    }
}

/// Step indices spaced ten per decade, always ending with `total`.
pub fn log_checkpoints(total: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut j = 0.0f64;
    loop {
        let k = 10f64.powf(j / CHECKPOINTS_PER_DECADE).round() as u64;
        if k >= total {
            break;
        }
        if out.last() != Some(&k) {
            out.push(k);
        }
        j += 1.0;
    }
    if total > 0 {
        out.push(total);
    }
    out
}

/// Finite-horizon Lyapunov exponent of the focal cocycle along the orbit of `z0`.
pub fn lyapunov_exponent(
    model: &ModelSpec,
    decomposition: &FocalDecomposition,
    z0: &[f64],
    horizon: f64,
    direction: Option<&[f64]>,
    options: &LyapunovOptions,
) -> Result<LyapunovEstimate> {
    if !(horizon >= MIN_LYAPUNOV_HORIZON) {
        return Err(Error::InvalidInput(format!(
            "Lyapunov horizon {horizon} is below the minimum {MIN_LYAPUNOV_HORIZON}"
        )));
    }
    let eta: Option<Vec<f64>> = match direction {
        Some(d) => {
            if d.len() != decomposition.q() {
                return Err(Error::InvalidInput(format!(
                    "direction has {} entries, focal block has {}",
                    d.len(),
                    decomposition.q()
                )));
            }
            let len = norm2(d);
            if !(len > 0.0) {
                return Err(Error::InvalidInput("direction must be nonzero".into()));
            }
            Some(d.iter().map(|v| v / len).collect())
        }
        None => None,
    };
    let start = if options.burn_in > 0.0 {
        dynsys::semiflow(model, Some(decomposition), z0, burn_in_time(model, options), options.dt)?
    } else {
        z0.to_vec()
    };
    let (dt, total) = match model.kind() {
        TimeKind::Discrete => (1.0, horizon.ceil() as u64),
        TimeKind::Continuous => (options.dt, dynsys::steps_for(model.kind(), horizon, options.dt) as u64),
    };
    let checkpoints = log_checkpoints(total);
    let mut prop = Propagator::new(model, decomposition, &start, options.renorm_every)?;
    let mut diagnostics = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for k in 1..=total {
        prop.step(dt)?;
        if checkpoints.get(next) == Some(&k) {
            let growth = prop.running_log_growth(eta.as_deref());
            diagnostics.push(Checkpoint {
                time: prop.elapsed,
                log_growth: growth,
                running_average: growth / prop.elapsed,
            });
            next += 1;
        }
    }
    let final_time = prop.elapsed;
    let value = diagnostics
        .last()
        .map(|c| c.running_average)
        .unwrap_or(f64::NAN);
    let limsup = diagnostics
        .iter()
        .filter(|c| c.time >= final_time / 10.0)
        .map(|c| c.running_average)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovEstimate {
        value,
        limsup,
        horizon: final_time,
        direction: eta.map_or(Direction::Dominant, Direction::Fixed),
        diagnostics,
    })
}

fn burn_in_time(model: &ModelSpec, options: &LyapunovOptions) -> f64 {
    match model.kind() {
        TimeKind::Discrete => options.burn_in.ceil(),
        TimeKind::Continuous => options.burn_in,
    }
}

/// Spectral radius of the cocycle product over a periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitRadius {
    /// Radius of `A(z_{k-1}) ... A(z_0)` (for flows, of `P(1, z*)`).
    pub raw: f64,
    /// `raw^(1/k)`, the per-step growth factor.
    pub per_step: f64,
    pub period: usize,
    pub cycle_residual: f64,
}

/// Repeller test at a boundary periodic orbit. `orbit` holds
/// full states with the focal block zero, in time order. For flows only
/// equilibria (`period = 1`) are accepted and the radius is that of the
/// time-one fundamental solution `exp(A(z*))`.
pub fn spectral_radius_at_orbit(
    model: &ModelSpec,
    decomposition: &FocalDecomposition,
    orbit: &[Vec<f64>],
    tol: f64,
) -> Result<OrbitRadius> {
    if orbit.is_empty() {
        return Err(Error::InvalidInput("orbit has no points".into()));
    }
    for z in orbit {
        if z.len() != model.dim() {
            return Err(Error::InvalidInput("orbit point has wrong dimension".into()));
        }
        if decomposition.focal_part(z).iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidInput(
                "orbit points must lie on the extinction set (focal block zero)".into(),
            ));
        }
    }
    let k = orbit.len();
    match model.kind() {
        TimeKind::Discrete => {
            let mut residual: f64 = 0.0;
            for (i, z) in orbit.iter().enumerate() {
                let image = dynsys::step_discrete(model, Some(decomposition), z)?;
                let target = &orbit[(i + 1) % k];
                residual = residual.max(dist2(&image, target) / (1.0 + norm2(target)));
            }
            if !(residual <= tol) {
                return Err(Error::NotPeriodic { residual });
            }
            let mut product = Matrix::identity(decomposition.q());
            for z in orbit {
                product = &cocycle_matrix(decomposition, z)? * &product;
            }
            let raw = spectral_radius(&product)?;
            Ok(OrbitRadius {
                raw,
                per_step: raw.powf(1.0 / k as f64),
                period: k,
                cycle_residual: residual,
            })
        }
        TimeKind::Continuous => {
            if k != 1 {
                return Err(Error::InvalidInput(
                    "flows support the spectral-radius route only at equilibria".into(),
                ));
            }
            let residual = norm2(&dynsys::vector_field(model, Some(decomposition), &orbit[0]));
            if !(residual <= tol) {
                return Err(Error::NotPeriodic { residual });
            }
            let raw = spectral_abscissa(&cocycle_matrix(decomposition, &orbit[0])?)?.exp();
            Ok(OrbitRadius {
                raw,
                per_step: raw,
                period: 1,
                cycle_residual: residual,
            })
        }
    }
}
