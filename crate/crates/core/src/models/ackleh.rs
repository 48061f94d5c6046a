//! Two-season predator–prey map composed into one annual step.

use std::fmt;
use std::sync::Arc;

use crate::dynsys::{FocalDecomposition, ModelSpec, TimeKind};
use crate::error::{Error, Result};

pub type Kernel = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Prey fecundity `b(n)`: positive and nonincreasing.
#[derive(Clone)]
pub enum Fecundity {
    /// `b_max / (1 + omega n)`.
    BevertonHolt { b_max: f64, omega: f64 },
    Custom(Kernel),
}

impl Fecundity {
    pub fn eval(&self, n: f64) -> f64 {
        match self {
            Fecundity::BevertonHolt { b_max, omega } => b_max / (1.0 + omega * n),
            Fecundity::Custom(f) => f(n),
        }
    }

    /// Solves `b(n) = level` for `n > 0`.
    pub fn inverse(&self, level: f64) -> Option<f64> {
        match self {
            Fecundity::BevertonHolt { b_max, omega } => {
                (*b_max > level && level > 0.0).then(|| (b_max / level - 1.0) / omega)
            }
            Fecundity::Custom(f) => {
                if !(f(0.0) > level) {
                    return None;
                }
                let mut hi = 1.0;
                while f(hi) >= level {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return None;
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) >= level {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= f64::EPSILON * hi {
                        break;
                    }
                }
                Some(0.5 * (lo + hi))
            }
        }
    }
}

impl fmt::Debug for Fecundity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fecundity::BevertonHolt { b_max, omega } => f
                .debug_struct("BevertonHolt")
                .field("b_max", b_max)
                .field("omega", omega)
                .finish(),
            Fecundity::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Probability `f(p)` that a predator captures prey, with `f(p) p < 1`.
#[derive(Clone)]
pub enum Predation {
    /// `f0 / (1 + f0 p)`.
    Saturating { f0: f64 },
    Custom(Kernel),
}

impl Predation {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Predation::Saturating { f0 } => f0 / (1.0 + f0 * p),
            Predation::Custom(f) => f(p),
        }
    }
}

impl fmt::Debug for Predation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predation::Saturating { f0 } => f.debug_struct("Saturating").field("f0", f0).finish(),
            Predation::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcklehParams {
    pub s_n: f64,
    pub s_p: f64,
    pub kappa: f64,
    pub fecundity: Fecundity,
    pub predation: Predation,
}

impl Default for AcklehParams {
    fn default() -> Self {
        Self {
            s_n: 0.5,
            s_p: 0.5,
            kappa: 6.0,
            fecundity: Fecundity::BevertonHolt { b_max: 2.0, omega: 1.0 },
            predation: Predation::Saturating { f0: 0.5 },
        }
    }
}

fn out_of_range(name: &str, value: f64, reason: &str) -> Error {
    Error::ParamOutOfRange {
        name: name.into(),
        value,
        reason: reason.into(),
    }
}

/// Points at which custom kernels are spot-checked.
fn kernel_probe_points() -> impl Iterator<Item = f64> {
    (0..=60).map(|k| if k == 0 { 0.0 } else { 10f64.powf(-3.0 + 0.1 * k as f64) })
}

impl AcklehParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s_n", self.s_n), ("s_p", self.s_p)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(out_of_range(name, v, "must lie in (0, 1)"));
            }
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(out_of_range("kappa", self.kappa, "must be positive"));
        }
        match &self.fecundity {
            Fecundity::BevertonHolt { b_max, omega } => {
                if !(*b_max > 0.0 && b_max.is_finite()) {
                    return Err(out_of_range("b_max", *b_max, "must be positive"));
                }
                if !(*omega > 0.0 && omega.is_finite()) {
                    return Err(out_of_range("omega", *omega, "must be positive"));
                }
            }
            Fecundity::Custom(f) => {
                let mut prev = f64::INFINITY;
                for n in kernel_probe_points() {
                    let v = f(n);
                    if !(v > 0.0 && v <= prev) {
                        return Err(out_of_range("fecundity", v, "must be positive and nonincreasing"));
                    }
                    prev = v;
                }
            }
        }
        match &self.predation {
            Predation::Saturating { f0 } => {
                if !(*f0 > 0.0 && *f0 < 1.0) {
                    return Err(out_of_range("f0", *f0, "must lie in (0, 1)"));
                }
            }
            Predation::Custom(f) => {
                for p in kernel_probe_points() {
                    let v = f(p);
                    if !(v > 0.0 && v < 1.0 && v * p < 1.0) {
                        return Err(out_of_range("predation", v, "needs 0 < f(p) < 1 and f(p) p < 1"));
                    }
                }
            }
        }
        Ok(())
    }

    /// `A(n) = s_n^2 + s_n b(n)`.
    pub fn a(&self, n: f64) -> f64 {
        self.s_n * self.s_n + self.s_n * self.fecundity.eval(n)
    }

    /// `B(p) = 1 - f(p) p`.
    pub fn b(&self, p: f64) -> f64 {
        1.0 - self.predation.eval(p) * p
    }

    /// Predators after the first season.
    pub fn x(&self, n: f64, p: f64) -> f64 {
        self.s_p * p + self.kappa * (self.s_n + self.fecundity.eval(n)) * n * self.predation.eval(p) * p
    }

    pub fn to_named(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("s_n", self.s_n), ("s_p", self.s_p), ("kappa", self.kappa)];
        if let Fecundity::BevertonHolt { b_max, omega } = self.fecundity {
            out.push(("b_max", b_max));
            out.push(("omega", omega));
        }
        if let Predation::Saturating { f0 } = self.predation {
            out.push(("f0", f0));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AcklehModel {
    pub spec: ModelSpec,
    /// Focal block `n`.
    pub prey: FocalDecomposition,
    /// Focal block `p`.
    pub predator: FocalDecomposition,
}

pub fn ackleh_composite(params: &AcklehParams) -> Result<AcklehModel> {
    params.validate()?;
    let rhs_params = params.clone();
    let pc = params.clone();
    let spec = ModelSpec::new(
        "ackleh-composite",
        TimeKind::Discrete,
        vec!["n".into(), "p".into()],
        params.to_named().into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        move |z, out| {
            let q = &rhs_params;
            let (n, p) = (z[0], z[1]);
            let a = q.a(n);
            let b = q.b(p);
            let x = q.x(n, p);
            let fx = q.predation.eval(x);
            out[0] = a * b * (1.0 - fx * x) * n;
            out[1] = q.s_p * x + q.kappa * n * a * b * fx * x;
        },
    )
    .with_per_capita(move |z, out| {
        let (n, p) = (z[0], z[1]);
        let a = pc.a(n);
        let b = pc.b(p);
        let x = pc.x(n, p);
        let fx = pc.predation.eval(x);
        out[0] = a * b * (1.0 - fx * x);
        let first = pc.s_p + pc.kappa / pc.s_n * a * n * pc.predation.eval(p);
        out[1] = (pc.s_p + pc.kappa * a * n * b * fx) * first;
    });
    let prey = spec.kolmogorov_decomposition(&[0])?;
    let predator = spec.kolmogorov_decomposition(&[1])?;
    Ok(AcklehModel { spec, prey, predator })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcklehGrowthRates {
    pub r0: f64,
    pub ri: f64,
    pub n_bar: f64,
}

/// `r0 = s_n^2 + s_n b(0)`, `n̄ = b^{-1}((1 - s_n^2)/s_n)` and
/// `ri = s_p + kappa n̄ f(0)`.
pub fn ackleh_growth_rates(params: &AcklehParams) -> Result<AcklehGrowthRates> {
    params.validate()?;
    let r0 = params.s_n * params.s_n + params.s_n * params.fecundity.eval(0.0);
    let level = (1.0 - params.s_n * params.s_n) / params.s_n;
    let n_bar = params
        .fecundity
        .inverse(level)
        .ok_or(Error::NoInteriorPreyEquilibrium { level })?;
    let ri = params.s_p + params.kappa * n_bar * params.predation.eval(0.0);
    Ok(AcklehGrowthRates { r0, ri, n_bar })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_fixed() {
        let m = ackleh_composite(&AcklehParams::default()).unwrap();
        assert_eq!(m.spec.eval(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn predator_free_line_is_invariant() {
        let p = AcklehParams::default();
        for n in [0.0, 0.2, 3.0] {
            assert_eq!(p.x(n, 0.0), 0.0);
        }
        let m = ackleh_composite(&p).unwrap();
        assert_eq!(m.spec.eval(&[0.7, 0.0])[1], 0.0);
    }

    #[test]
    fn prey_cocycle_at_origin_is_r0() {
        let p = AcklehParams::default();
        let m = ackleh_composite(&p).unwrap();
        let r = ackleh_growth_rates(&p).unwrap();
        assert_eq!(m.prey.cocycle(&[0.0, 0.0])[(0, 0)], r.r0);
    }

    #[test]
    fn growth_rates_by_hand() {
        let p = AcklehParams::default();
        let r = ackleh_growth_rates(&p).unwrap();
        assert!((r.r0 - 1.25).abs() < 1e-15);
        assert!((r.n_bar - 1.0 / 3.0).abs() < 1e-15);
        let boundary = AcklehParams { kappa: 3.0, ..p };
        assert!((ackleh_growth_rates(&boundary).unwrap().ri - 1.0).abs() < 1e-15);
    }

    #[test]
    fn predator_cocycle_at_prey_equilibrium() {
        // at (n̄, 0) the composite multiplier has one factor per season
        let p = AcklehParams::default();
        let m = ackleh_composite(&p).unwrap();
        let r = ackleh_growth_rates(&p).unwrap();
        let f0 = p.predation.eval(0.0);
        let want = (p.s_p + p.kappa * r.n_bar * f0) * (p.s_p + p.kappa * r.n_bar * f0 / p.s_n);
        let got = m.predator.cocycle(&[r.n_bar, 0.0])[(0, 0)];
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
    }

    #[test]
    fn custom_kernel_uses_bisection() {
        let p = AcklehParams {
            fecundity: Fecundity::Custom(Arc::new(|n| 2.0 / (1.0 + n))),
            ..AcklehParams::default()
        };
        let r = ackleh_growth_rates(&p).unwrap();
        assert!((r.n_bar - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_inverse_is_reported() {
        let p = AcklehParams {
            fecundity: Fecundity::BevertonHolt { b_max: 1.0, omega: 1.0 },
            ..AcklehParams::default()
        };
        assert!(matches!(ackleh_growth_rates(&p), Err(Error::NoInteriorPreyEquilibrium { .. })));
    }

    #[test]
    fn out_of_range_survival_is_rejected() {
        let p = AcklehParams { s_n: 1.0, ..AcklehParams::default() };
        assert!(matches!(ackleh_composite(&p), Err(Error::ParamOutOfRange { .. })));
    }
}
