//! Persistence certification: boundary repeller evidence combined with an
//! empirical liminf over a grid of interior initial conditions.

use crate::boundary::{
    estimate_omega_limit, find_equilibria, restrict_to_extinction_set, AttractorItem, OmegaLimitEstimate,
    OmegaOptions, BoundarySubsystem,
};
use crate::dynsys::{self, FocalDecomposition, ModelSpec, TimeKind, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linearize::{lyapunov_exponent, spectral_radius_at_orbit, LyapunovOptions, MIN_LYAPUNOV_HORIZON};
use crate::matrix::dist2;
use crate::models::{self, AnalyticCondition};
use crate::sampling::{halton_box, lin_space, log_space, tensor_grid};

pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-4;
pub const DEFAULT_EXTINCTION_TOL: f64 = 1e-10;
/// Window-doubling ratio accepted as stable.
pub const STABILITY_RATIO: f64 = 0.9;
pub const MAX_SWEEP_CELLS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersistenceKind {
    SumAbs,
    MinComponent,
    SingleComponent(usize),
}

/// `rho(z)`, a functional that vanishes on the extinction set of `over`.
/// For `MinComponent` that set is where any listed component vanishes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistenceFunction {
    pub kind: PersistenceKind,
    pub over: Vec<usize>,
}

impl PersistenceFunction {
    pub fn sum_abs(over: &[usize]) -> Self {
        Self {
            kind: PersistenceKind::SumAbs,
            over: over.to_vec(),
        }
    }

    pub fn min_component(over: &[usize]) -> Self {
        Self {
            kind: PersistenceKind::MinComponent,
            over: over.to_vec(),
        }
    }

    pub fn single(index: usize) -> Self {
        Self {
            kind: PersistenceKind::SingleComponent(index),
            over: vec![index],
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match self.kind {
            PersistenceKind::SumAbs => self.over.iter().map(|&i| z[i].abs()).sum(),
            PersistenceKind::MinComponent => self.over.iter().map(|&i| z[i].abs()).fold(f64::INFINITY, f64::min),
            PersistenceKind::SingleComponent(i) => z[i].abs(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PersistenceKind::SumAbs => "sum_abs",
            PersistenceKind::MinComponent => "min_component",
            PersistenceKind::SingleComponent(_) => "single_component",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvidenceMethod {
    SpectralRadius,
    LyapunovExponent,
}

impl EvidenceMethod {
    pub fn name(self) -> &'static str {
        match self {
            EvidenceMethod::SpectralRadius => "spectral_radius",
            EvidenceMethod::LyapunovExponent => "lyapunov_exponent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepellerEvidence {
    /// The attractor in full-state coordinates.
    pub attractor: AttractorItem,
    pub method: EvidenceMethod,
    pub value: f64,
    pub threshold: f64,
    pub passes: bool,
    /// Lyapunov exponent at a fixed point of a map, for comparison with
    /// `ln value`.
    pub cross_check: Option<f64>,
    pub diagnostics: String,
}

impl RepellerEvidence {
    fn new(attractor: AttractorItem, method: EvidenceMethod, value: f64, diagnostics: String) -> Self {
        let threshold = match method {
            EvidenceMethod::SpectralRadius => 1.0,
            EvidenceMethod::LyapunovExponent => 0.0,
        };
        Self {
            attractor,
            method,
            value,
            threshold,
            passes: value > threshold,
            cross_check: None,
            diagnostics,
        }
    }

    fn failed(attractor: AttractorItem, method: EvidenceMethod, err: &Error) -> Self {
        let mut e = Self::new(attractor, method, f64::NAN, err.to_string());
        e.passes = false;
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedPersistent,
    EvidenceIncomplete,
    ExtinctionDetected,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::CertifiedPersistent => "CertifiedPersistent",
            Verdict::EvidenceIncomplete => "EvidenceIncomplete",
            Verdict::ExtinctionDetected => "ExtinctionDetected",
        }
    }

    /// Ordering used to combine several blocks: extinction is worst.
    pub fn severity(self) -> u8 {
        match self {
            Verdict::CertifiedPersistent => 0,
            Verdict::EvidenceIncomplete => 1,
            Verdict::ExtinctionDetected => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcOutcome {
    pub initial: Vec<f64>,
    /// Minimum of `rho` over the window.
    pub min_rho: f64,
    /// Minimum of `rho` over the doubled window.
    pub min_rho_doubled: f64,
    /// `rho` stayed below the extinction tolerance for the whole window.
    pub extinct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiminfResult {
    pub epsilon_hat: f64,
    pub epsilon_hat_doubled: f64,
    pub worst_ic: usize,
    pub per_ic: Vec<IcOutcome>,
}

impl LiminfResult {
    /// The doubled-window estimate is within [`STABILITY_RATIO`] of the
    /// single-window one.
    pub fn window_stable(&self) -> bool {
        self.epsilon_hat > 0.0 && self.epsilon_hat_doubled >= STABILITY_RATIO * self.epsilon_hat
    }

    pub fn extinction_witness(&self) -> Option<&IcOutcome> {
        self.per_ic.iter().find(|o| o.extinct)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiminfOptions {
    pub dt: f64,
    pub extinction_tol: f64,
    pub execution: Execution,
    /// Also simulate a second window to measure stability.
    pub double_window: bool,
}

impl Default for LiminfOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            extinction_tol: DEFAULT_EXTINCTION_TOL,
            execution: Execution::default(),
            double_window: true,
        }
    }
}

fn liminf_one(
    model: &ModelSpec,
    dec: &FocalDecomposition,
    rho: &PersistenceFunction,
    z0: &[f64],
    burn_in: f64,
    window: f64,
    opts: &LiminfOptions,
) -> Result<IcOutcome> {
    let kind = model.kind();
    let burn = dynsys::steps_for(kind, burn_in, opts.dt);
    let w = dynsys::steps_for(kind, window, opts.dt).max(1);
    let total_window = if opts.double_window { 2 * w } else { w };
    let mut z = z0.to_vec();
    for _ in 0..burn {
        z = dynsys::advance(model, Some(dec), &z, opts.dt)?;
    }
    let mut min_rho = f64::INFINITY;
    let mut max_rho: f64 = 0.0;
    let mut min_doubled = f64::INFINITY;
    for k in 0..total_window {
        z = dynsys::advance(model, Some(dec), &z, opts.dt)?;
        let r = rho.eval(&z);
        if k < w {
            min_rho = min_rho.min(r);
            max_rho = max_rho.max(r);
        }
        min_doubled = min_doubled.min(r);
    }
    Ok(IcOutcome {
        initial: z0.to_vec(),
        min_rho,
        min_rho_doubled: min_doubled,
        extinct: max_rho < opts.extinction_tol,
    })
}

/// Simulates each initial condition for `burn_in` and then records the
/// minimum of `rho` over the following `window`; `epsilon_hat` is the
/// smallest of these minima.
pub fn empirical_liminf(
    model: &ModelSpec,
    dec: &FocalDecomposition,
    rho: &PersistenceFunction,
    ic_grid: &[Vec<f64>],
    burn_in: f64,
    window: f64,
    opts: &LiminfOptions,
) -> Result<LiminfResult> {
    if ic_grid.is_empty() {
        return Err(Error::InvalidInput("initial-condition grid is empty".into()));
    }
    if !(burn_in >= 0.0 && burn_in.is_finite()) || !(window > 0.0 && window.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "burn_in must be nonnegative and window positive (got {burn_in}, {window})"
        )));
    }
    for z in ic_grid {
        if z.len() != model.dim() {
            return Err(Error::InvalidInput("initial condition has wrong dimension".into()));
        }
        if !(rho.eval(z) > 0.0) {
            return Err(Error::InvalidInput(format!(
                "initial condition {z:?} lies on the extinction set"
            )));
        }
    }
    let outcomes: Vec<Result<IcOutcome>> = opts
        .execution
        .map(ic_grid, |z| liminf_one(model, dec, rho, z, burn_in, window, opts));
    let per_ic: Vec<IcOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let mut worst_ic = 0;
    for (i, o) in per_ic.iter().enumerate() {
        if o.min_rho < per_ic[worst_ic].min_rho {
            worst_ic = i;
        }
    }
    let epsilon_hat_doubled = per_ic.iter().map(|o| o.min_rho_doubled).fold(f64::INFINITY, f64::min);
    Ok(LiminfResult {
        epsilon_hat: per_ic[worst_ic].min_rho,
        epsilon_hat_doubled,
        worst_ic,
        per_ic,
    })
}

/// Log-uniform tensor grid over `[lower, upper]^dim`.
pub fn log_ic_grid(dim: usize, lower: f64, upper: f64, points_per_axis: usize) -> Result<Vec<Vec<f64>>> {
    if !(lower > 0.0) {
        return Err(Error::InvalidInput(format!(
            "initial-condition grid must stay off the extinction set (lower = {lower})"
        )));
    }
    if !(upper > lower) || points_per_axis == 0 {
        return Err(Error::InvalidInput("initial-condition grid needs upper > lower and at least one point".into()));
    }
    let axis = log_space(lower, upper, points_per_axis);
    Ok(tensor_grid(&vec![axis; dim]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    pub burn_in: f64,
    pub window: f64,
    pub lyapunov_horizon: f64,
    pub dt: f64,
    pub ic_points_per_axis: usize,
    pub ic_lower: f64,
    /// Upper corner of the initial-condition box and of the boundary seed box.
    pub state_bound: f64,
    /// Explicit initial conditions replacing the log grid.
    pub initial_conditions: Option<Vec<Vec<f64>>>,
    pub equilibrium_tol: f64,
    pub cycle_tol: f64,
    pub epsilon_floor: f64,
    pub extinction_tol: f64,
    pub omega_seeds: usize,
    pub omega_burn_in: f64,
    pub omega_window: f64,
    /// Norm above which boundary dynamics count as unbounded.
    pub divergence_bound: f64,
    /// Components already known to persist; boundary attractors on which any
    /// of them vanishes are not tested.
    pub assume_persistent: Vec<usize>,
    pub seed: u64,
    pub execution: Execution,
}

impl CertifyConfig {
    pub fn discrete() -> Self {
        Self {
            burn_in: 1e4,
            window: 1e4,
            lyapunov_horizon: 1e4,
            dt: 1.0,
            ic_points_per_axis: 5,
            ic_lower: 1e-3,
            state_bound: 10.0,
            initial_conditions: None,
            equilibrium_tol: 1e-10,
            cycle_tol: 1e-6,
            epsilon_floor: DEFAULT_EPSILON_FLOOR,
            extinction_tol: DEFAULT_EXTINCTION_TOL,
            omega_seeds: 32,
            omega_burn_in: 1e4,
            omega_window: 1e3,
            divergence_bound: 1e6,
            assume_persistent: Vec::new(),
            seed: 0,
            execution: Execution::default(),
        }
    }

    pub fn continuous() -> Self {
        Self {
            burn_in: 100.0,
            window: 50.0,
            lyapunov_horizon: MIN_LYAPUNOV_HORIZON,
            dt: DEFAULT_DT,
            omega_burn_in: 300.0,
            omega_window: 50.0,
            ..Self::discrete()
        }
    }

    pub fn for_kind(kind: TimeKind) -> Self {
        match kind {
            TimeKind::Discrete => Self::discrete(),
            TimeKind::Continuous => Self::continuous(),
        }
    }

    fn omega_options(&self, kind: TimeKind) -> OmegaOptions {
        let mut o = OmegaOptions::for_kind(kind, self.dt);
        o.burn_in = self.omega_burn_in;
        o.window = self.omega_window;
        o.cycle_tol = self.cycle_tol;
        o.equilibrium_tol = self.equilibrium_tol;
        o.bound = self.divergence_bound;
        o.execution = self.execution;
        o
    }

    fn liminf_options(&self) -> LiminfOptions {
        LiminfOptions {
            dt: self.dt,
            extinction_tol: self.extinction_tol,
            execution: self.execution,
            double_window: true,
        }
    }

    pub fn ic_grid(&self, model: &ModelSpec) -> Result<Vec<Vec<f64>>> {
        match &self.initial_conditions {
            Some(ics) => Ok(ics.clone()),
            None => log_ic_grid(model.dim(), self.ic_lower, self.state_bound, self.ic_points_per_axis),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSummary {
    pub ic_grid_size: usize,
    pub burn_in: f64,
    pub window: f64,
    pub epsilon_hat: f64,
    pub epsilon_hat_doubled: f64,
    pub window_stable: bool,
    pub worst_ic: Vec<f64>,
    pub extinction_witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceCertificate {
    pub model: String,
    pub focal: Vec<usize>,
    pub focal_names: Vec<String>,
    pub rho: PersistenceFunction,
    pub params: Vec<(String, f64)>,
    pub analytic_conditions: Vec<AnalyticCondition>,
    pub assume_persistent: Vec<usize>,
    pub omega_seeds: usize,
    /// Boundary attractors skipped because an assumed-persistent component
    /// vanishes on them.
    pub excluded: Vec<AttractorItem>,
    pub evidence: Vec<RepellerEvidence>,
    pub boundary_error: Option<String>,
    pub empirical: Option<EmpiricalSummary>,
    pub empirical_error: Option<String>,
    pub verdict: Verdict,
}

impl PersistenceCertificate {
    pub fn evidence_passes(&self) -> bool {
        self.boundary_error.is_none() && self.evidence.iter().all(|e| e.passes)
    }
}

fn embed_item(sub: &BoundarySubsystem, item: &AttractorItem) -> AttractorItem {
    match item {
        AttractorItem::Equilibrium { point, residual } => AttractorItem::Equilibrium {
            point: sub.embed(point),
            residual: *residual,
        },
        AttractorItem::PeriodicOrbit { points, period } => AttractorItem::PeriodicOrbit {
            points: points.iter().map(|p| sub.embed(p)).collect(),
            period: *period,
        },
        AttractorItem::CompactBox { lower, upper, samples } => AttractorItem::CompactBox {
            lower: sub.embed(lower),
            upper: sub.embed(upper),
            samples: samples.iter().map(|p| sub.embed(p)).collect(),
        },
    }
}

/// An attractor lies where an assumed-persistent component vanishes.
fn excluded_by(item: &AttractorItem, assumed: &[usize]) -> bool {
    const ZERO: f64 = 1e-12;
    let vanishes = |z: &[f64]| assumed.iter().any(|&i| z[i].abs() <= ZERO);
    match item {
        AttractorItem::Equilibrium { point, .. } => vanishes(point),
        AttractorItem::PeriodicOrbit { points, .. } => points.iter().all(|p| vanishes(p)),
        AttractorItem::CompactBox { upper, .. } => vanishes(upper),
    }
}

/// The boundary attractors: limit sets of seeded boundary orbits together
/// with every equilibrium found by Newton in the seed box.
pub fn boundary_attractors(
    sub: &BoundarySubsystem,
    config: &CertifyConfig,
) -> Result<OmegaLimitEstimate> {
    let p = sub.dim();
    let lower = vec![config.ic_lower; p];
    let upper = vec![config.state_bound; p];
    let seeds = if p == 0 {
        vec![Vec::new()]
    } else {
        halton_box(&lower, &upper, config.omega_seeds.max(1), config.seed)
    };
    let mut estimate = estimate_omega_limit(sub, &seeds, &config.omega_options(sub.kind()))?;
    if p > 0 {
        let found = find_equilibria(sub, &vec![0.0; p], &upper, 16, config.equilibrium_tol)?;
        let mut extra = Vec::new();
        for eq in found.equilibria {
            let known = estimate.members.iter_mut().find_map(|m| match m {
                AttractorItem::Equilibrium { point, residual } if dist2(point, &eq.point) < 1e-6 => {
                    Some((point, residual))
                }
                _ => None,
            });
            if let Some((point, residual)) = known {
                // Keep whichever copy is the better-converged root.
                if eq.residual < *residual {
                    *point = eq.point;
                    *residual = eq.residual;
                }
            } else {
                extra.push(AttractorItem::Equilibrium {
                    point: eq.point,
                    residual: eq.residual,
                });
            }
        }
        let split = estimate
            .members
            .iter()
            .position(|m| !matches!(m, AttractorItem::Equilibrium { .. }))
            .unwrap_or(estimate.members.len());
        let mut eqs: Vec<AttractorItem> = estimate.members.drain(..split).chain(extra).collect();
        eqs.sort_by(|a, b| {
            let (AttractorItem::Equilibrium { point: pa, .. }, AttractorItem::Equilibrium { point: pb, .. }) = (a, b)
            else {
                unreachable!()
            };
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        eqs.append(&mut estimate.members);
        estimate.members = eqs;
    }
    Ok(estimate)
}

/// Repeller evidence for one attractor given in full-state coordinates.
pub fn repeller_evidence(
    model: &ModelSpec,
    dec: &FocalDecomposition,
    item: &AttractorItem,
    config: &CertifyConfig,
) -> RepellerEvidence {
    let tol = config.cycle_tol.max(config.equilibrium_tol);
    match item {
        AttractorItem::Equilibrium { point, .. } => {
            match spectral_radius_at_orbit(model, dec, std::slice::from_ref(point), tol) {
                Ok(r) => {
                    let mut e = RepellerEvidence::new(
                        item.clone(),
                        EvidenceMethod::SpectralRadius,
                        r.per_step,
                        format!("fixed point, residual {:e}", r.cycle_residual),
                    );
                    if model.kind() == TimeKind::Discrete {
                        let opts = LyapunovOptions {
                            dt: config.dt,
                            ..LyapunovOptions::default()
                        };
                        e.cross_check = lyapunov_exponent(model, dec, point, MIN_LYAPUNOV_HORIZON, None, &opts)
                            .ok()
                            .map(|l| l.value);
                    }
                    e
                }
                Err(err) => RepellerEvidence::failed(item.clone(), EvidenceMethod::SpectralRadius, &err),
            }
        }
        AttractorItem::PeriodicOrbit { points, period } => match spectral_radius_at_orbit(model, dec, points, tol) {
            Ok(r) => RepellerEvidence::new(
                item.clone(),
                EvidenceMethod::SpectralRadius,
                r.per_step,
                format!("period {period}, product radius {:e}, residual {:e}", r.raw, r.cycle_residual),
            ),
            Err(err) => RepellerEvidence::failed(item.clone(), EvidenceMethod::SpectralRadius, &err),
        },
        AttractorItem::CompactBox { samples, .. } => {
            let opts = LyapunovOptions {
                dt: config.dt,
                ..LyapunovOptions::default()
            };
            let mut worst = f64::INFINITY;
            for s in samples {
                match lyapunov_exponent(model, dec, s, config.lyapunov_horizon, None, &opts) {
                    Ok(l) => worst = worst.min(l.limsup),
                    Err(err) => return RepellerEvidence::failed(item.clone(), EvidenceMethod::LyapunovExponent, &err),
                }
            }
            RepellerEvidence::new(
                item.clone(),
                EvidenceMethod::LyapunovExponent,
                worst,
                format!("smallest limsup over {} samples, horizon {}", samples.len(), config.lyapunov_horizon),
            )
        }
    }
}

/// Runs the whole pipeline for one focal block.
pub fn certify(
    model: &ModelSpec,
    dec: &FocalDecomposition,
    rho: &PersistenceFunction,
    config: &CertifyConfig,
) -> Result<PersistenceCertificate> {
    if rho.over.iter().any(|i| !dec.focal().contains(i)) {
        return Err(Error::InvalidInput("persistence function must use focal components only".into()));
    }
    if config.assume_persistent.iter().any(|i| dec.focal().contains(i) || *i >= model.dim()) {
        return Err(Error::InvalidInput(
            "assumed-persistent components must lie outside the focal block".into(),
        ));
    }
    let grid = config.ic_grid(model)?;
    for z in &grid {
        if z.len() != model.dim() || !(rho.eval(z) > 0.0) {
            return Err(Error::InvalidInput(format!(
                "initial condition {z:?} is not an interior point for the focal block"
            )));
        }
    }
    let sub = restrict_to_extinction_set(model, dec)?;

    let mut evidence = Vec::new();
    let mut excluded = Vec::new();
    let mut boundary_error = None;
    match boundary_attractors(&sub, config) {
        Ok(estimate) => {
            let items: Vec<AttractorItem> = estimate.members.iter().map(|m| embed_item(&sub, m)).collect();
            let (skip, test): (Vec<_>, Vec<_>) =
                items.into_iter().partition(|m| excluded_by(m, &config.assume_persistent));
            excluded = skip;
            evidence = config.execution.map(&test, |m| repeller_evidence(model, dec, m, config));
        }
        Err(err) => boundary_error = Some(err.to_string()),
    }

    let (empirical, empirical_error) = match empirical_liminf(
        model,
        dec,
        rho,
        &grid,
        config.burn_in,
        config.window,
        &config.liminf_options(),
    ) {
        Ok(l) => (
            Some(EmpiricalSummary {
                ic_grid_size: grid.len(),
                burn_in: config.burn_in,
                window: config.window,
                epsilon_hat: l.epsilon_hat,
                epsilon_hat_doubled: l.epsilon_hat_doubled,
                window_stable: l.window_stable(),
                worst_ic: l.per_ic[l.worst_ic].initial.clone(),
                extinction_witness: l.extinction_witness().map(|o| o.initial.clone()),
            }),
            None,
        ),
        Err(err) => (None, Some(err.to_string())),
    };

    let evidence_ok = boundary_error.is_none() && evidence.iter().all(|e: &RepellerEvidence| e.passes);
    let verdict = match &empirical {
        Some(s) if evidence_ok && s.epsilon_hat > config.epsilon_floor => Verdict::CertifiedPersistent,
        Some(s) if s.extinction_witness.is_some() => Verdict::ExtinctionDetected,
        _ => Verdict::EvidenceIncomplete,
    };
    Ok(PersistenceCertificate {
        model: model.name().to_string(),
        focal: dec.focal().to_vec(),
        focal_names: dec.focal().iter().map(|&i| model.component_names()[i].clone()).collect(),
        rho: rho.clone(),
        params: model.params().to_vec(),
        analytic_conditions: Vec::new(),
        assume_persistent: config.assume_persistent.clone(),
        omega_seeds: config.omega_seeds,
        excluded,
        evidence,
        boundary_error,
        empirical,
        empirical_error,
        verdict,
    })
}

/// Certifies focal blocks in order. Each block assumes the persistence of
/// the blocks certified before it, on top of `config.assume_persistent`.
pub fn certify_sequence(
    model: &ModelSpec,
    blocks: &[FocalDecomposition],
    config: &CertifyConfig,
) -> Result<Vec<PersistenceCertificate>> {
    certify_sequence_with(model, blocks, config, |d| PersistenceFunction::sum_abs(d.focal()))
}

/// [`certify_sequence`] with a caller-chosen persistence function per block.
pub fn certify_sequence_with<F>(
    model: &ModelSpec,
    blocks: &[FocalDecomposition],
    config: &CertifyConfig,
    rho_for: F,
) -> Result<Vec<PersistenceCertificate>>
where
    F: Fn(&FocalDecomposition) -> PersistenceFunction,
{
    let mut assumed = config.assume_persistent.clone();
    let mut out = Vec::with_capacity(blocks.len());
    for dec in blocks {
        let cfg = CertifyConfig {
            assume_persistent: assumed.iter().copied().filter(|i| !dec.focal().contains(i)).collect(),
            ..config.clone()
        };
        let cert = certify(model, dec, &rho_for(dec), &cfg)?;
        if cert.verdict == Verdict::CertifiedPersistent {
            for &i in dec.focal() {
                if !assumed.contains(&i) {
                    assumed.push(i);
                }
            }
        }
        out.push(cert);
    }
    Ok(out)
}

/// The worst verdict in a list; `CertifiedPersistent` for an empty list.
pub fn combined_verdict(certs: &[PersistenceCertificate]) -> Verdict {
    certs
        .iter()
        .map(|c| c.verdict)
        .max_by_key(|v| v.severity())
        .unwrap_or(Verdict::CertifiedPersistent)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub focal: String,
    pub epsilon_hat: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub values: Vec<f64>,
    pub conditions: Vec<AnalyticCondition>,
    pub blocks: Vec<BlockResult>,
    pub verdict: Verdict,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub model: String,
    pub axes: Vec<String>,
    pub condition_names: Vec<String>,
    pub focal_blocks: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Parameter values of every cell, first axis slowest. An axis with zero
/// steps yields no cells.
pub fn sweep_cells(axes: &[SweepAxis]) -> Result<Vec<Vec<f64>>> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::InvalidInput("a sweep varies one or two parameters".into()));
    }
    let mut cells = 1usize;
    for a in axes {
        if !(a.min.is_finite() && a.max.is_finite()) {
            return Err(Error::InvalidInput(format!("range of `{}` is not finite", a.name)));
        }
        cells = cells.saturating_mul(a.steps);
    }
    if cells > MAX_SWEEP_CELLS {
        return Err(Error::InvalidInput(format!(
            "sweep has {cells} cells, more than {MAX_SWEEP_CELLS}"
        )));
    }
    if cells == 0 {
        return Ok(Vec::new());
    }
    let lines: Vec<Vec<f64>> = axes.iter().map(|a| lin_space(a.min, a.max, a.steps)).collect();
    Ok(tensor_grid(&lines))
}

/// Parses a focal block written as component names joined by `+`.
pub fn focal_indices(model: &ModelSpec, block: &str) -> Result<Vec<usize>> {
    let names: Vec<String> = block.split('+').map(|s| s.trim().to_string()).collect();
    model.indices_of(&names)
}

/// Evaluates one sweep cell. Failures become an `EvidenceIncomplete` row.
pub fn sweep_cell(
    family: &str,
    base: &[(String, f64)],
    axes: &[SweepAxis],
    index: usize,
    values: &[f64],
    focal_blocks: &[String],
    config: &CertifyConfig,
) -> SweepRow {
    let mut overrides = base.to_vec();
    for (a, v) in axes.iter().zip(values) {
        overrides.retain(|(n, _)| n != &a.name);
        overrides.push((a.name.clone(), *v));
    }
    let run = || -> Result<(Vec<AnalyticCondition>, Vec<BlockResult>)> {
        let built = models::build_model(family, &overrides)?;
        let decs = focal_blocks
            .iter()
            .map(|b| built.spec.kolmogorov_decomposition(&focal_indices(&built.spec, b)?))
            .collect::<Result<Vec<_>>>()?;
        let certs = certify_sequence(&built.spec, &decs, config)?;
        let blocks = focal_blocks
            .iter()
            .zip(&certs)
            .map(|(b, c)| BlockResult {
                focal: b.clone(),
                epsilon_hat: c.empirical.as_ref().map_or(f64::NAN, |e| e.epsilon_hat),
                verdict: c.verdict,
            })
            .collect();
        Ok((built.conditions, blocks))
    };
    match run() {
        Ok((conditions, blocks)) => {
            let verdict = blocks
                .iter()
                .map(|b| b.verdict)
                .max_by_key(|v| v.severity())
                .unwrap_or(Verdict::EvidenceIncomplete);
            SweepRow {
                index,
                values: values.to_vec(),
                conditions,
                blocks,
                verdict,
                error: None,
            }
        }
        Err(err) => SweepRow {
            index,
            values: values.to_vec(),
            conditions: Vec::new(),
            blocks: focal_blocks
                .iter()
                .map(|b| BlockResult {
                    focal: b.clone(),
                    epsilon_hat: f64::NAN,
                    verdict: Verdict::EvidenceIncomplete,
                })
                .collect(),
            verdict: Verdict::EvidenceIncomplete,
            error: Some(err.to_string()),
        },
    }
}

/// Certifies every cell of a one- or two-parameter grid.
pub fn parameter_sweep(
    family: &str,
    base: &[(String, f64)],
    axes: &[SweepAxis],
    focal_blocks: &[String],
    config: &CertifyConfig,
) -> Result<SweepTable> {
    let info = models::lookup(family)?;
    for a in axes {
        if !info.params.iter().any(|(n, _)| *n == a.name) {
            return Err(Error::UnknownParameter {
                model: family.into(),
                name: a.name.clone(),
            });
        }
    }
    if focal_blocks.is_empty() {
        return Err(Error::InvalidInput("a sweep needs at least one focal block".into()));
    }
    let cells = sweep_cells(axes)?;
    let rows = config.execution.map_range(cells.len(), |i| {
        sweep_cell(family, base, axes, i, &cells[i], focal_blocks, config)
    });
    Ok(SweepTable {
        model: family.into(),
        axes: axes.iter().map(|a| a.name.clone()).collect(),
        condition_names: info.conditions.iter().map(|s| s.to_string()).collect(),
        focal_blocks: focal_blocks.to_vec(),
        rows,
    })
}
