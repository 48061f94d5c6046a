//! Ricker-type predator–prey map.

use crate::dynsys::{FocalDecomposition, ModelSpec, TimeKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinParams {
    pub r: f64,
    pub k: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for DinParams {
    fn default() -> Self {
        Self {
            r: 1.5,
            k: 10.0,
            beta: 0.2,
            gamma: 1.0,
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 0.5,
        }
    }
}

impl DinParams {
    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("r", self.r),
            ("K", self.k),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
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

    /// Prey on the predator-free line: `x e^{r(1 - x/K)}`.
    pub fn f1(&self, x: f64) -> f64 {
        x * (self.r * (1.0 - x / self.k)).exp()
    }

    /// Predator on the prey-free line: `y e^{1 - d - a y / c}`.
    pub fn f2(&self, y: f64) -> f64 {
        y * (1.0 - self.d - self.a * y / self.c).exp()
    }
}

#[derive(Debug, Clone)]
pub struct DinModel {
    pub spec: ModelSpec,
    /// Focal block `x`.
    pub prey: FocalDecomposition,
    /// Focal block `y`.
    pub predator: FocalDecomposition,
}

pub fn din_model(params: &DinParams) -> Result<DinModel> {
    params.validate()?;
    let p = *params;
    let spec = ModelSpec::new(
        "din-predprey",
        TimeKind::Discrete,
        vec!["x".into(), "y".into()],
        p.named().iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        move |z, out| {
            let (x, y) = (z[0], z[1]);
            out[0] = x * (p.r * (1.0 - x / p.k) - p.beta * y / (x + p.gamma)).exp();
            out[1] = y * (1.0 - p.d - p.a * y / (p.b * x + p.c)).exp();
        },
    )
    .with_per_capita(move |z, out| {
        let (x, y) = (z[0], z[1]);
        out[0] = (p.r - p.r * x / p.k - p.beta * y / (x + p.gamma)).exp();
        out[1] = (1.0 - p.d - p.a * y / (p.b * x + p.c)).exp();
    });
    let prey = spec.kolmogorov_decomposition(&[0])?;
    let predator = spec.kolmogorov_decomposition(&[1])?;
    Ok(DinModel { spec, prey, predator })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinThresholds {
    /// `r gamma a > beta c (1 - d)`.
    pub prey_condition: bool,
    pub prey_margin: f64,
    /// `d < 1`.
    pub predator_condition: bool,
    pub predator_margin: f64,
    /// `[f1(f1(K/r)), f1(K/r)]`.
    pub prey_bracket: (f64, f64),
    /// `[f2(f2(c/a)), f2(c/a)]`.
    pub predator_bracket: (f64, f64),
}

pub fn din_thresholds(params: &DinParams) -> DinThresholds {
    let p = params;
    let prey_margin = p.r * p.gamma * p.a - p.beta * p.c * (1.0 - p.d);
    let predator_margin = 1.0 - p.d;
    let top1 = p.f1(p.k / p.r);
    let top2 = p.f2(p.c / p.a);
    DinThresholds {
        prey_condition: prey_margin > 0.0,
        prey_margin,
        predator_condition: predator_margin > 0.0,
        predator_margin,
        prey_bracket: (p.f1(top1), top1),
        predator_bracket: (p.f2(top2), top2),
    }
}
