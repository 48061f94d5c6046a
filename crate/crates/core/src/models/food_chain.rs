//! One prey and two competing predators with Holling type II uptake.

use crate::boundary::{find_equilibria, restrict_to_extinction_set};
use crate::dynsys::{FocalDecomposition, ModelSpec, TimeKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoodChainParams {
    pub alpha: f64,
    pub beta: f64,
    pub h1: f64,
    pub h2: f64,
    pub e1: f64,
    pub e2: f64,
    pub u: f64,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for FoodChainParams {
    fn default() -> Self {
        Self {
            alpha: 1.2,
            beta: 1.0,
            h1: 0.8,
            h2: 1.0,
            e1: 2.0,
            e2: 1.8,
            u: 0.2,
            w: 0.25,
            c1: 0.1,
            c2: 0.15,
        }
    }
}

impl FoodChainParams {
    pub fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("h1", self.h1),
            ("h2", self.h2),
            ("e1", self.e1),
            ("e2", self.e2),
            ("u", self.u),
            ("w", self.w),
            ("c1", self.c1),
            ("c2", self.c2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ParamOutOfRange {
                    name: name.into(),
                    value: v,
                    reason: "must be positive".into(),
                });
            }
        }
        Ok(())
    }

    /// Per-capita rate of the prey.
    pub fn l(&self, x: f64, y: f64, z: f64) -> f64 {
        1.0 - x - self.alpha * y / (1.0 + self.h1 * self.alpha * x) - self.beta * z / (1.0 + self.h2 * self.beta * x)
    }

    /// Per-capita rate of the first predator.
    pub fn m1(&self, x: f64, y: f64, z: f64) -> f64 {
        let s = 1.0 + self.h1 * self.alpha * x;
        -self.u + self.e1 * self.alpha * x / s - self.e1 * self.alpha * y / s - self.c1 * z
    }

    /// Per-capita rate of the second predator.
    pub fn m2(&self, x: f64, y: f64, z: f64) -> f64 {
        let s = 1.0 + self.h2 * self.beta * x;
        -self.w + self.e2 * self.beta * x / s - self.e2 * self.beta * z / s - self.c2 * y
    }
}

#[derive(Debug, Clone)]
pub struct FoodChainModel {
    pub spec: ModelSpec,
    pub prey: FocalDecomposition,
    pub first_predator: FocalDecomposition,
    pub second_predator: FocalDecomposition,
}

pub fn food_chain(params: &FoodChainParams) -> Result<FoodChainModel> {
    params.validate()?;
    let p = *params;
    let spec = ModelSpec::new(
        "food-chain-2pred",
        TimeKind::Continuous,
        vec!["x".into(), "y".into(), "z".into()],
        p.named().iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        move |s, out| {
            let (x, y, z) = (s[0], s[1], s[2]);
            let s1 = 1.0 + p.h1 * p.alpha * x;
            let s2 = 1.0 + p.h2 * p.beta * x;
            out[0] = x * (1.0 - x) - p.alpha * x * y / s1 - p.beta * x * z / s2;
            out[1] = -p.u * y + p.e1 * p.alpha * x * y / s1 - p.e1 * p.alpha * y * y / s1 - p.c1 * y * z;
            out[2] = -p.w * z + p.e2 * p.beta * x * z / s2 - p.e2 * p.beta * z * z / s2 - p.c2 * y * z;
        },
    )
    .with_per_capita(move |s, out| {
        out[0] = p.l(s[0], s[1], s[2]);
        out[1] = p.m1(s[0], s[1], s[2]);
        out[2] = p.m2(s[0], s[1], s[2]);
    });
    Ok(FoodChainModel {
        prey: spec.kolmogorov_decomposition(&[0])?,
        first_predator: spec.kolmogorov_decomposition(&[1])?,
        second_predator: spec.kolmogorov_decomposition(&[2])?,
        spec,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEquilibria {
    /// `(x̂, ẑ)` with `y = 0`.
    pub hat: (f64, f64),
    pub hat_residual: f64,
    /// `(x̃, ỹ)` with `z = 0`.
    pub tilde: (f64, f64),
    pub tilde_residual: f64,
}

const EQUILIBRIUM_TOL: f64 = 1e-12;

fn planar_equilibrium(
    model: &FoodChainModel,
    dec: &FocalDecomposition,
    predator_max: f64,
    label: &str,
) -> Result<((f64, f64), f64)> {
    let sub = restrict_to_extinction_set(&model.spec, dec)?;
    let found = find_equilibria(&sub, &[0.0, 0.0], &[1.0, predator_max], 24, EQUILIBRIUM_TOL)?;
    found
        .equilibria
        .iter()
        .find(|e| e.point[0] > 1e-9 && e.point[0] < 1.0 && e.point[1] > 1e-9)
        .map(|e| ((e.point[0], e.point[1]), e.residual))
        .ok_or_else(|| Error::NoBoundaryEquilibrium(format!("no positive equilibrium with {label} = 0")))
}

/// The coexistence equilibria of the two planar subsystems.
pub fn food_chain_boundary_equilibria(params: &FoodChainParams) -> Result<BoundaryEquilibria> {
    let p = params;
    let model = food_chain(p)?;
    // the predator nullcline must cross the prey axis inside (0, 1)
    if p.w >= p.e2 * p.beta / (1.0 + p.h2 * p.beta) {
        return Err(Error::NoBoundaryEquilibrium(format!(
            "w = {} leaves no positive z when y = 0",
            p.w
        )));
    }
    if p.u >= p.e1 * p.alpha / (1.0 + p.h1 * p.alpha) {
        return Err(Error::NoBoundaryEquilibrium(format!(
            "u = {} leaves no positive y when z = 0",
            p.u
        )));
    }
    let (hat, hat_residual) = planar_equilibrium(&model, &model.first_predator, (1.0 + p.h2 * p.beta) / p.beta, "y")?;
    let (tilde, tilde_residual) =
        planar_equilibrium(&model, &model.second_predator, (1.0 + p.h1 * p.alpha) / p.alpha, "z")?;
    Ok(BoundaryEquilibria {
        hat,
        hat_residual,
        tilde,
        tilde_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvasionConditions {
    pub equilibria: BoundaryEquilibria,
    /// `e1 > (u + c1 ẑ)(1 + h1 alpha x̂)/(alpha x̂)`.
    pub cond_y: bool,
    pub margin_y: f64,
    /// Growth rate of `y` at `(x̂, 0, ẑ)`.
    pub lambda_y: f64,
    /// `e2 > (w + c2 ỹ)(1 + h2 beta x̃)/(beta x̃)`.
    pub cond_z: bool,
    pub margin_z: f64,
    /// Growth rate of `z` at `(x̃, ỹ, 0)`.
    pub lambda_z: f64,
}

pub fn food_chain_invasion_conditions(params: &FoodChainParams) -> Result<InvasionConditions> {
    let p = params;
    let eq = food_chain_boundary_equilibria(p)?;
    let (xh, zh) = eq.hat;
    let (xt, yt) = eq.tilde;
    let margin_y = p.e1 - (p.u + p.c1 * zh) * (1.0 + p.h1 * p.alpha * xh) / (p.alpha * xh);
    let margin_z = p.e2 - (p.w + p.c2 * yt) * (1.0 + p.h2 * p.beta * xt) / (p.beta * xt);
    Ok(InvasionConditions {
        equilibria: eq,
        cond_y: margin_y > 0.0,
        margin_y,
        lambda_y: p.m1(xh, 0.0, zh),
        cond_z: margin_z > 0.0,
        margin_z,
        lambda_z: p.m2(xt, yt, 0.0),
    })
}
