//! The built-in population models, their analytic thresholds, and a registry
//! that builds them from named parameter values.

pub mod ackleh;
pub mod din;
pub mod food_chain;

pub use ackleh::{
    ackleh_composite, ackleh_growth_rates, AcklehGrowthRates, AcklehModel, AcklehParams, Fecundity, Kernel,
    Predation,
};
pub use din::{din_model, din_thresholds, DinModel, DinParams, DinThresholds};
pub use food_chain::{
    food_chain, food_chain_boundary_equilibria, food_chain_invasion_conditions, BoundaryEquilibria,
    FoodChainModel, FoodChainParams, InvasionConditions,
};

use crate::dynsys::{ModelSpec, TimeKind};
use crate::error::{Error, Result};

pub const ACKLEH: &str = "ackleh-composite";
pub const DIN: &str = "din-predprey";
pub const FOOD_CHAIN: &str = "food-chain-2pred";

/// Static description of a registered model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInfo {
    pub name: &'static str,
    pub kind: TimeKind,
    pub components: Vec<&'static str>,
    pub params: Vec<(&'static str, f64)>,
    pub conditions: Vec<&'static str>,
    /// Upper corner of the default initial-condition box.
    pub state_bound: f64,
    pub summary: &'static str,
}

/// A named inequality evaluated at concrete parameters. `margin` is the
/// left side minus the right side; it is NaN when the quantities it needs do
/// not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticCondition {
    pub name: String,
    pub holds: bool,
    pub margin: f64,
}

impl AnalyticCondition {
    fn new(name: &str, margin: f64) -> Self {
        Self {
            name: name.into(),
            holds: margin > 0.0,
            margin,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub spec: ModelSpec,
    pub conditions: Vec<AnalyticCondition>,
}

pub fn registry() -> Vec<ModelInfo> {
    let ackleh = AcklehParams::default();
    vec![
        ModelInfo {
            name: ACKLEH,
            kind: TimeKind::Discrete,
            components: vec!["n", "p"],
            params: ackleh.to_named(),
            conditions: vec!["r0>1", "ri>1"],
            state_bound: 5.0,
            summary: "seasonal prey n and predator p composed over one year",
        },
        ModelInfo {
            name: DIN,
            kind: TimeKind::Discrete,
            components: vec!["x", "y"],
            params: DinParams::default().named().to_vec(),
            conditions: vec!["d<1", "r*gamma*a>beta*c*(1-d)"],
            state_bound: 20.0,
            summary: "Ricker prey x with predator y",
        },
        ModelInfo {
            name: FOOD_CHAIN,
            kind: TimeKind::Continuous,
            components: vec!["x", "y", "z"],
            params: FoodChainParams::default().named().to_vec(),
            conditions: vec![
                "e1>(u+c1*zh)(1+h1*alpha*xh)/(alpha*xh)",
                "e2>(w+c2*yt)(1+h2*beta*xt)/(beta*xt)",
            ],
            state_bound: 2.0,
            summary: "logistic prey x shared by competing predators y and z",
        },
    ]
}

pub fn lookup(name: &str) -> Result<ModelInfo> {
    let all = registry();
    let valid = all.iter().map(|m| m.name).collect::<Vec<_>>().join(", ");
    all.into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::UnknownModel {
            name: name.into(),
            valid,
        })
}

/// Default parameter values of `name` with `overrides` applied.
pub fn resolve_params(name: &str, overrides: &[(String, f64)]) -> Result<Vec<(&'static str, f64)>> {
    let info = lookup(name)?;
    let mut values = info.params;
    for (key, value) in overrides {
        match values.iter_mut().find(|(n, _)| n == key) {
            Some(slot) => slot.1 = *value,
            None => {
                return Err(Error::UnknownParameter {
                    model: name.into(),
                    name: key.clone(),
                })
            }
        }
    }
    Ok(values)
}

fn get(values: &[(&'static str, f64)], key: &str) -> f64 {
    values.iter().find(|(n, _)| *n == key).map(|(_, v)| *v).expect("registered parameter")
}

fn ackleh_params(v: &[(&'static str, f64)]) -> AcklehParams {
    AcklehParams {
        s_n: get(v, "s_n"),
        s_p: get(v, "s_p"),
        kappa: get(v, "kappa"),
        fecundity: Fecundity::BevertonHolt {
            b_max: get(v, "b_max"),
            omega: get(v, "omega"),
        },
        predation: Predation::Saturating { f0: get(v, "f0") },
    }
}

fn din_params(v: &[(&'static str, f64)]) -> DinParams {
    DinParams {
        r: get(v, "r"),
        k: get(v, "K"),
        beta: get(v, "beta"),
        gamma: get(v, "gamma"),
        a: get(v, "a"),
        b: get(v, "b"),
        c: get(v, "c"),
        d: get(v, "d"),
    }
}

fn food_chain_params(v: &[(&'static str, f64)]) -> FoodChainParams {
    FoodChainParams {
        alpha: get(v, "alpha"),
        beta: get(v, "beta"),
        h1: get(v, "h1"),
        h2: get(v, "h2"),
        e1: get(v, "e1"),
        e2: get(v, "e2"),
        u: get(v, "u"),
        w: get(v, "w"),
        c1: get(v, "c1"),
        c2: get(v, "c2"),
    }
}

/// Builds a registered model and evaluates its analytic conditions.
pub fn build_model(name: &str, overrides: &[(String, f64)]) -> Result<BuiltModel> {
    let values = resolve_params(name, overrides)?;
    match name {
        ACKLEH => {
            let p = ackleh_params(&values);
            let model = ackleh_composite(&p)?;
            let (r0, ri) = match ackleh_growth_rates(&p) {
                Ok(g) => (g.r0, g.ri),
                Err(_) => (p.a(0.0), f64::NAN),
            };
            Ok(BuiltModel {
                spec: model.spec,
                conditions: vec![AnalyticCondition::new("r0>1", r0 - 1.0), AnalyticCondition::new("ri>1", ri - 1.0)],
            })
        }
        DIN => {
            let p = din_params(&values);
            let model = din_model(&p)?;
            let t = din_thresholds(&p);
            Ok(BuiltModel {
                spec: model.spec,
                conditions: vec![
                    AnalyticCondition::new("d<1", t.predator_margin),
                    AnalyticCondition::new("r*gamma*a>beta*c*(1-d)", t.prey_margin),
                ],
            })
        }
        FOOD_CHAIN => {
            let p = food_chain_params(&values);
            let model = food_chain(&p)?;
            let (my, mz) = match food_chain_invasion_conditions(&p) {
                Ok(c) => (c.margin_y, c.margin_z),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let names = &lookup(FOOD_CHAIN)?.conditions;
            Ok(BuiltModel {
                spec: model.spec,
                conditions: vec![AnalyticCondition::new(names[0], my), AnalyticCondition::new(names[1], mz)],
            })
        }
        _ => unreachable!("lookup accepted an unregistered model"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_models_are_registered() {
        let names: Vec<_> = registry().iter().map(|m| m.name).collect();
        assert_eq!(names, vec![ACKLEH, DIN, FOOD_CHAIN]);
        assert_eq!(lookup(ACKLEH).unwrap().conditions, vec!["r0>1", "ri>1"]);
    }

    #[test]
    fn unknown_model_names_valid_choices() {
        match lookup("lotka") {
            Err(Error::UnknownModel { valid, .. }) => assert!(valid.contains(DIN)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_reach_the_model() {
        let m = build_model(DIN, &[("d".into(), 1.2)]).unwrap();
        assert_eq!(m.spec.param("d"), Some(1.2));
        assert!(!m.conditions[0].holds);
        assert!(matches!(
            build_model(DIN, &[("zeta".into(), 1.0)]),
            Err(Error::UnknownParameter { .. })
        ));
    }

    #[test]
    fn default_conditions_hold() {
        for info in registry() {
            let m = build_model(info.name, &[]).unwrap();
            assert!(m.conditions.iter().all(|c| c.holds), "{}: {:?}", info.name, m.conditions);
        }
    }
}
