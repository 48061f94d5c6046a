use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use persistlab::boundary::AttractorItem;
use persistlab::models::{self, ackleh_composite, din_model, din_thresholds, food_chain, AcklehParams, DinParams, FoodChainParams};
use persistlab::persist::{
    certify, certify_sequence, combined_verdict, empirical_liminf, log_ic_grid, parameter_sweep, CertifyConfig,
    EvidenceMethod, LiminfOptions, PersistenceFunction, SweepAxis, Verdict,
};
use persistlab::Execution;

fn quick_discrete() -> CertifyConfig {
    CertifyConfig {
        burn_in: 3000.0,
        window: 2000.0,
        ic_points_per_axis: 3,
        omega_seeds: 12,
        omega_burn_in: 3000.0,
        omega_window: 500.0,
        ..CertifyConfig::discrete()
    }
}

#[test]
fn din_default_is_persistent_in_both_species() {
    let m = din_model(&DinParams::default()).unwrap();
    let certs = certify_sequence(&m.spec, &[m.prey.clone(), m.predator.clone()], &quick_discrete()).unwrap();
    for c in &certs {
        assert_eq!(c.verdict, Verdict::CertifiedPersistent, "{c:#?}");
        assert!(c.empirical.as_ref().unwrap().window_stable);
    }
    // prey block: origin and (0, y*) both repel
    let values: Vec<f64> = certs[0].evidence.iter().map(|e| e.value).collect();
    assert!(values.iter().any(|v| (v - 1.5f64.exp()).abs() < 1e-9));
    assert!(values.iter().any(|v| (v - 1.4f64.exp()).abs() < 1e-9));
}

#[test]
fn din_high_mortality_kills_the_predator() {
    let m = din_model(&DinParams { d: 1.2, ..DinParams::default() }).unwrap();
    let cert = certify(&m.spec, &m.predator, &PersistenceFunction::single(1), &quick_discrete()).unwrap();
    assert_eq!(cert.verdict, Verdict::ExtinctionDetected);
    let emp = cert.empirical.unwrap();
    assert!(emp.epsilon_hat < 1e-10);
    assert!(emp.extinction_witness.is_some());
    // y+ <= y e^{1-d}: after burn-in the predator is below e^{-0.2 t} y0
    let bound = 10.0 * (-0.2f64 * 3000.0).exp();
    assert!(emp.epsilon_hat <= bound);
}

#[test]
fn din_prey_collapses_under_heavy_predation() {
    let p = DinParams { r: 0.05, beta: 2.0, ..DinParams::default() };
    assert!(!din_thresholds(&p).prey_condition);
    let m = din_model(&p).unwrap();
    let grid = log_ic_grid(2, 1e-2, 5.0, 3).unwrap();
    let l = empirical_liminf(&m.spec, &m.prey, &PersistenceFunction::single(0), &grid, 3000.0, 1000.0, &LiminfOptions::default())
        .unwrap();
    assert!(l.epsilon_hat < 1e-10);
    assert!(l.extinction_witness().is_some());
}

#[test]
fn din_random_parameters_agree_with_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut persistent = 0;
    let mut extinct = 0;
    while persistent < 10 || extinct < 10 {
        let mut p = DinParams {
            r: rng.random_range(0.5..1.9),
            k: rng.random_range(2.0..12.0),
            beta: rng.random_range(0.05..1.0),
            gamma: rng.random_range(0.5..2.0),
            a: rng.random_range(0.5..2.0),
            b: rng.random_range(0.5..2.0),
            c: rng.random_range(0.5..2.0),
            d: rng.random_range(0.1..0.8),
        };
        let m;
        if persistent < 10 {
            let t = din_thresholds(&p);
            if !(t.prey_margin > 0.2) {
                continue;
            }
            m = din_model(&p).unwrap();
            let certs = certify_sequence(&m.spec, &[m.prey.clone(), m.predator.clone()], &quick_discrete()).unwrap();
            assert_eq!(combined_verdict(&certs), Verdict::CertifiedPersistent, "{p:?}");
            persistent += 1;
        } else {
            p.d = rng.random_range(1.1..1.5);
            m = din_model(&p).unwrap();
            let cert = certify(&m.spec, &m.predator, &PersistenceFunction::single(1), &quick_discrete()).unwrap();
            assert_eq!(cert.verdict, Verdict::ExtinctionDetected, "{p:?}");
            extinct += 1;
        }
    }
}

#[test]
fn ackleh_predator_certificate_skips_prey_free_states() {
    let m = ackleh_composite(&AcklehParams::default()).unwrap();
    let cfg = CertifyConfig { state_bound: 5.0, ..quick_discrete() };
    let certs = certify_sequence(&m.spec, &[m.prey.clone(), m.predator.clone()], &cfg).unwrap();
    assert_eq!(combined_verdict(&certs), Verdict::CertifiedPersistent);
    let predator = &certs[1];
    assert_eq!(predator.assume_persistent, vec![0]);
    assert!(predator
        .excluded
        .iter()
        .any(|e| matches!(e, AttractorItem::Equilibrium { point, .. } if point == &vec![0.0, 0.0])));
    assert!(predator.evidence.iter().all(|e| e.method == EvidenceMethod::SpectralRadius));
    // without the hierarchy the origin, where p shrinks by s_p^2, blocks the certificate
    let alone = certify(&m.spec, &m.predator, &PersistenceFunction::single(1), &cfg).unwrap();
    assert_ne!(alone.verdict, Verdict::CertifiedPersistent);
    assert!(alone.evidence.iter().any(|e| !e.passes && (e.value - 0.25).abs() < 1e-12));
}

/// Predator multiplier at the prey equilibrium of the composite map,
/// `(s_p + kappa n̄ f(0)) (s_p + kappa n̄ f(0) / s_n)`, for the default kernels.
fn predator_multiplier(kappa: f64) -> f64 {
    let (s_n, s_p, n_bar, f0) = (0.5, 0.5, 1.0 / 3.0, 0.5);
    (s_p + kappa * n_bar * f0) * (s_p + kappa * n_bar * f0 / s_n)
}

#[test]
fn ackleh_kappa_sweep_flips_where_predator_multiplier_crosses_one() {
    let axes = [SweepAxis { name: "kappa".into(), min: 1.0, max: 4.0, steps: 13 }];
    let cfg = CertifyConfig { state_bound: 5.0, ..quick_discrete() };
    let table = parameter_sweep(models::ACKLEH, &[], &axes, &["n".into(), "p".into()], &cfg).unwrap();
    for row in &table.rows {
        let kappa = row.values[0];
        let m = predator_multiplier(kappa);
        let predator = row.blocks[1].verdict;
        if m > 1.05 {
            assert_eq!(predator, Verdict::CertifiedPersistent, "kappa {kappa}");
        } else if m < 0.95 {
            assert_eq!(predator, Verdict::ExtinctionDetected, "kappa {kappa}");
        }
    }
    let flip = table
        .rows
        .windows(2)
        .find(|w| w[0].blocks[1].verdict != w[1].blocks[1].verdict)
        .map(|w| (w[0].values[0], w[1].values[0]))
        .unwrap();
    assert!(predator_multiplier(flip.0) < 1.0 + 0.1 && predator_multiplier(flip.1) > 1.0 - 0.1, "{flip:?}");
}

#[test]
fn food_chain_blocks_certify_in_order() {
    let m = food_chain(&FoodChainParams::default()).unwrap();
    let cfg = CertifyConfig {
        burn_in: 40.0,
        window: 20.0,
        ic_points_per_axis: 2,
        ic_lower: 0.05,
        state_bound: 1.0,
        omega_seeds: 6,
        omega_burn_in: 80.0,
        omega_window: 20.0,
        ..CertifyConfig::continuous()
    };
    let blocks = [m.prey.clone(), m.first_predator.clone(), m.second_predator.clone()];
    let certs = certify_sequence(&m.spec, &blocks, &cfg).unwrap();
    for c in &certs {
        assert_eq!(c.verdict, Verdict::CertifiedPersistent, "{c:#?}");
    }
    // the prey block sees only the origin, where its rate is 1
    let prey = &certs[0];
    assert_eq!(prey.evidence.len(), 1);
    assert!((prey.evidence[0].value - 1f64.exp()).abs() < 1e-9);
}

#[test]
fn execution_modes_give_identical_certificates() {
    let m = din_model(&DinParams::default()).unwrap();
    let rho = PersistenceFunction::single(1);
    let seq = certify(&m.spec, &m.predator, &rho, &CertifyConfig { execution: Execution::Sequential, ..quick_discrete() })
        .unwrap();
    let par = certify(&m.spec, &m.predator, &rho, &CertifyConfig { execution: Execution::Parallel, ..quick_discrete() })
        .unwrap();
    assert_eq!(seq, par);
}
