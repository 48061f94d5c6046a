use persistlab::boundary::{
    classify_tail, estimate_omega_limit, find_equilibria, restrict_to_extinction_set, AttractorItem, OmegaOptions,
};
use persistlab::dynsys::{self, simulate, step_discrete, Times};
use persistlab::linearize::{
    cocycle_matrix, fundamental_solution, lyapunov_exponent, spectral_radius, spectral_radius_at_orbit,
    LyapunovOptions,
};
use persistlab::models::{
    ackleh_composite, ackleh_growth_rates, din_model, din_thresholds, food_chain, food_chain_boundary_equilibria,
    food_chain_invasion_conditions, AcklehParams, DinParams, FoodChainParams, Predation,
};
use persistlab::sampling::halton_box;
use persistlab::{Error, Matrix};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn din_map_with_no_predator() {
    let m = din_model(&DinParams::default()).unwrap();
    let z = step_discrete(&m.spec, None, &[1.0, 0.0]).unwrap();
    assert!(close(z[0], 1.35f64.exp(), 1e-15));
    assert_eq!(z[1], 0.0);
    assert_eq!(step_discrete(&m.spec, None, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn ackleh_prey_free_line_decays_by_survival_squared() {
    let p = AcklehParams::default();
    let m = ackleh_composite(&p).unwrap();
    let z = step_discrete(&m.spec, Some(&m.predator), &[0.0, 0.8]).unwrap();
    assert_eq!(z[0], 0.0);
    assert!(close(z[1], p.s_p * p.s_p * 0.8, 1e-15));
}

#[test]
fn din_carrying_capacity_is_fixed() {
    let m = din_model(&DinParams::default()).unwrap();
    let z = dynsys::semiflow(&m.spec, Some(&m.predator), &[10.0, 0.0], 500.0, 1.0).unwrap();
    assert!(close(z[0], 10.0, 1e-14));
    assert_eq!(z[1], 0.0);
}

#[test]
fn din_prey_only_settles_at_capacity() {
    let m = din_model(&DinParams::default()).unwrap();
    let traj = simulate(&m.spec, None, &[0.3, 0.0], 2000.0, 1, 1.0).unwrap();
    for s in &traj.states[1900..] {
        assert!((s[0] - 10.0).abs() < 1e-6);
    }
}

#[test]
fn prey_free_ackleh_orbit_keeps_prey_at_zero() {
    let m = ackleh_composite(&AcklehParams::default()).unwrap();
    let traj = simulate(&m.spec, Some(&m.prey), &[0.0, 2.0], 200.0, 3, 1.0).unwrap();
    assert!(traj.states.iter().all(|s| s[0] == 0.0));
    let Times::Steps(t) = &traj.times else { panic!("map time should be integer") };
    assert_eq!(t[1], 3);
}

#[test]
fn zero_horizon_is_single_entry() {
    let m = food_chain(&FoodChainParams::default()).unwrap();
    let traj = simulate(&m.spec, None, &[0.2, 0.1, 0.1], 0.0, 1, 1e-3).unwrap();
    assert_eq!(traj.len(), 1);
}

#[test]
fn food_chain_origin_and_logistic_line() {
    let m = food_chain(&FoodChainParams::default()).unwrap();
    let z = dynsys::semiflow(&m.spec, None, &[0.0; 3], 3.0, 0.01).unwrap();
    assert_eq!(z, vec![0.0; 3]);
    let x0: f64 = 0.5;
    let z = dynsys::semiflow(&m.spec, Some(&m.first_predator), &[x0, 0.0, 0.0], 1.0, 0.01).unwrap();
    let exact = x0 / (x0 + (1.0 - x0) * (-1.0f64).exp());
    assert!((z[0] - exact).abs() < 1e-8);
    assert_eq!(&z[1..], &[0.0, 0.0]);
    let z = dynsys::semiflow(&m.spec, None, &[3.0, 0.0, 0.0], 20.0, 0.01).unwrap();
    assert!((z[0] - 1.0).abs() < 1e-6);
}

#[test]
fn din_reduced_maps_are_one_dimensional_rickers() {
    let p = DinParams::default();
    let m = din_model(&p).unwrap();
    let prey_free = restrict_to_extinction_set(&m.spec, &m.prey).unwrap();
    let y = 0.7;
    let want = y * (1.0 - p.d - p.a * y / p.c).exp();
    assert!(close(prey_free.reduced().eval(&[y])[0], want, 1e-14));
    let predator_free = restrict_to_extinction_set(&m.spec, &m.predator).unwrap();
    let x = 4.0;
    assert!(close(predator_free.reduced().eval(&[x])[0], p.f1(x), 1e-14));
}

#[test]
fn food_chain_prey_free_plane() {
    let p = FoodChainParams::default();
    let m = food_chain(&p).unwrap();
    let sub = restrict_to_extinction_set(&m.spec, &m.prey).unwrap();
    let (y, z) = (0.4, 0.3);
    let f = sub.reduced().eval(&[y, z]);
    assert!(close(f[0], -y * (p.u + p.e1 * p.alpha * y + p.c1 * z), 1e-14));
    assert!(close(f[1], -z * (p.w + p.e2 * p.beta * z + p.c2 * y), 1e-14));
}

#[test]
fn din_boundary_equilibria() {
    let p = DinParams::default();
    let m = din_model(&p).unwrap();
    let sub = restrict_to_extinction_set(&m.spec, &m.predator).unwrap();
    let found = find_equilibria(&sub, &[0.0], &[30.0], 16, 1e-10).unwrap();
    let pts: Vec<f64> = found.equilibria.iter().map(|e| e.point[0]).collect();
    assert_eq!(pts.len(), 2);
    assert!(pts[0].abs() < 1e-12 && close(pts[1], p.k, 1e-12));
    let sub = restrict_to_extinction_set(&m.spec, &m.prey).unwrap();
    let found = find_equilibria(&sub, &[0.0], &[30.0], 16, 1e-10).unwrap();
    let pts: Vec<f64> = found.equilibria.iter().map(|e| e.point[0]).collect();
    assert_eq!(pts.len(), 2);
    assert!(close(pts[1], (1.0 - p.d) * p.c / p.a, 1e-12));
}

fn omega_of(sub: &persistlab::boundary::BoundarySubsystem, upper: f64, opts: &OmegaOptions) -> Vec<AttractorItem> {
    let seeds = halton_box(&vec![1e-3; sub.dim()], &vec![upper; sub.dim()], 32, 7);
    estimate_omega_limit(sub, &seeds, opts).unwrap().members
}

#[test]
fn ackleh_boundary_limit_sets() {
    let p = AcklehParams::default();
    let m = ackleh_composite(&p).unwrap();
    let rates = ackleh_growth_rates(&p).unwrap();
    let opts = OmegaOptions::discrete();
    let prey_free = omega_of(&restrict_to_extinction_set(&m.spec, &m.prey).unwrap(), 5.0, &opts);
    assert_eq!(prey_free.len(), 1);
    assert!(matches!(&prey_free[0], AttractorItem::Equilibrium { point, .. } if point[0] == 0.0));
    let predator_free = omega_of(&restrict_to_extinction_set(&m.spec, &m.predator).unwrap(), 5.0, &opts);
    assert_eq!(predator_free.len(), 1);
    let AttractorItem::Equilibrium { point, .. } = &predator_free[0] else { panic!("{predator_free:?}") };
    assert!(close(point[0], rates.n_bar, 1e-9));
}

/// Forward orbit of the Ricker line, iterated directly.
fn ricker_orbit(r: f64, k: f64, x0: f64, steps: usize) -> Vec<f64> {
    let mut x = x0;
    (0..steps)
        .map(|_| {
            x *= (r * (1.0 - x / k)).exp();
            x
        })
        .collect()
}

#[test]
fn din_interval_attractor_lies_in_bracket() {
    let p = DinParams { r: 2.3, ..DinParams::default() };
    let m = din_model(&p).unwrap();
    let sub = restrict_to_extinction_set(&m.spec, &m.predator).unwrap();
    let opts = OmegaOptions { burn_in: 1e5, window: 2e3, ..OmegaOptions::discrete() };
    let members = omega_of(&sub, 30.0, &opts);
    let lo = p.f1(p.f1(p.k / p.r)) - 1e-6;
    let hi = p.f1(p.k / p.r) + 1e-6;
    let positive: Vec<&AttractorItem> = members
        .iter()
        .filter(|m| m.points().iter().all(|x| x[0] > 1e-9))
        .collect();
    assert!(!positive.is_empty());
    for item in positive {
        for x in item.points() {
            assert!(x[0] >= lo && x[0] <= hi, "{x:?} outside [{lo}, {hi}]");
        }
        if let AttractorItem::CompactBox { lower, upper, .. } = item {
            assert!(lower[0] >= lo && upper[0] <= hi);
        }
    }
    // independent check on a directly iterated orbit
    for x in &ricker_orbit(p.r, p.k, 0.37, 100_000)[1000..] {
        assert!(*x >= lo && *x <= hi);
    }
}

#[test]
fn chaotic_ricker_tail_is_a_box() {
    let tail: Vec<Vec<f64>> = ricker_orbit(2.8, 1.0, 0.3, 12_000)[10_000..]
        .iter()
        .map(|&x| vec![x])
        .collect();
    assert!(matches!(classify_tail(&tail, 1e-6), AttractorItem::CompactBox { .. }));
}

/// Root of a scalar function on `[lo, hi]` by bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn food_chain_equilibria_match_bisection() {
    let p = FoodChainParams::default();
    // y = 0: z from the prey nullcline, x from the z nullcline
    let z_of = |x: f64| (1.0 - x) * (1.0 + p.h2 * p.beta * x) / p.beta;
    let g = |x: f64| -p.w + p.e2 * p.beta * (x - z_of(x)) / (1.0 + p.h2 * p.beta * x);
    let xh = bisect(g, 1e-9, 1.0);
    let zh = z_of(xh);
    let y_of = |x: f64| (1.0 - x) * (1.0 + p.h1 * p.alpha * x) / p.alpha;
    let g = |x: f64| -p.u + p.e1 * p.alpha * (x - y_of(x)) / (1.0 + p.h1 * p.alpha * x);
    let xt = bisect(g, 1e-9, 1.0);
    let yt = y_of(xt);
    let eq = food_chain_boundary_equilibria(&p).unwrap();
    assert!((eq.hat.0 - xh).abs() < 1e-9 && (eq.hat.1 - zh).abs() < 1e-9);
    assert!((eq.tilde.0 - xt).abs() < 1e-9 && (eq.tilde.1 - yt).abs() < 1e-9);
    assert!(eq.hat_residual <= 1e-10 && eq.tilde_residual <= 1e-10);
    assert!((xh - 0.72021).abs() < 1e-5 && (zh - 0.48129).abs() < 1e-5);
    assert!((xt - 0.62926).abs() < 1e-5 && (yt - 0.49558).abs() < 1e-5);
}

#[test]
fn food_chain_invasion_bound_gives_zero_rate() {
    let p = FoodChainParams::default();
    let eq = food_chain_boundary_equilibria(&p).unwrap();
    let (xh, zh) = eq.hat;
    let bound = (p.u + p.c1 * zh) * (1.0 + p.h1 * p.alpha * xh) / (p.alpha * xh);
    // e1 only enters the y equation, so the y = 0 equilibrium is unchanged
    let at_bound = FoodChainParams { e1: bound, ..p };
    let inv = food_chain_invasion_conditions(&at_bound).unwrap();
    assert!(inv.lambda_y.abs() < 1e-12);
    assert!(inv.margin_y.abs() < 1e-12);
}

#[test]
fn food_chain_without_second_predator_equilibrium() {
    let p = FoodChainParams { w: 0.95, ..FoodChainParams::default() };
    assert!(matches!(food_chain_boundary_equilibria(&p), Err(Error::NoBoundaryEquilibrium(_))));
}

#[test]
fn din_threshold_values() {
    let p = DinParams::default();
    let t = din_thresholds(&p);
    assert!(t.prey_condition && close(t.prey_margin, 1.5 - 0.1, 1e-15));
    assert!(t.predator_condition);
    let top = (-0.5f64).exp();
    assert!(close(t.predator_bracket.1, top, 1e-15));
    assert!(close(t.predator_bracket.0, top * (0.5 - top).exp(), 1e-15));
    assert!(!din_thresholds(&DinParams { d: 1.0, ..p }).predator_condition);
}

#[test]
fn ackleh_growth_rates_by_hand() {
    let p = AcklehParams::default();
    let g = ackleh_growth_rates(&p).unwrap();
    assert!(close(g.r0, 1.25, 1e-15));
    assert!(close(g.n_bar, 1.0 / 3.0, 1e-14));
    assert!(close(g.ri, 1.5, 1e-14));
    let boundary_case = AcklehParams { kappa: 3.0, predation: Predation::Saturating { f0: 0.5 }, ..p };
    assert!(close(ackleh_growth_rates(&boundary_case).unwrap().ri, 1.0, 1e-14));
}

#[test]
fn cocycles_at_the_origin() {
    let p = DinParams::default();
    let m = din_model(&p).unwrap();
    assert_eq!(cocycle_matrix(&m.prey, &[0.0, 0.0]).unwrap()[(0, 0)], p.r.exp());
    let a = ackleh_composite(&AcklehParams::default()).unwrap();
    assert!(close(cocycle_matrix(&a.prey, &[0.0, 0.0]).unwrap()[(0, 0)], 1.25, 1e-15));
    let f = food_chain(&FoodChainParams::default()).unwrap();
    assert_eq!(cocycle_matrix(&f.prey, &[0.0; 3]).unwrap()[(0, 0)], 1.0);
}

#[test]
fn din_product_at_origin_telescopes() {
    let p = DinParams::default();
    let m = din_model(&p).unwrap();
    let prod = fundamental_solution(&m.spec, &m.prey, &[0.0, 0.0], 40.0, 1.0).unwrap();
    assert!(close(prod.log_norm + prod.normalized[(0, 0)].ln(), p.r * 40.0, 1e-14));
    let id = fundamental_solution(&m.spec, &m.prey, &[0.3, 0.2], 0.0, 1.0).unwrap();
    assert_eq!(id.log_norm, 0.0);
    assert_eq!(id.reconstruct(), Matrix::identity(1));
}

#[test]
fn din_exponents() {
    let p = DinParams::default();
    let m = din_model(&p).unwrap();
    let opts = LyapunovOptions::default();
    let at_origin = lyapunov_exponent(&m.spec, &m.prey, &[0.0, 0.0], 1e3, None, &opts).unwrap();
    assert!((at_origin.value - p.r).abs() <= 1e-12);
    let y_star = (1.0 - p.d) * p.c / p.a;
    let on_line = lyapunov_exponent(&m.spec, &m.prey, &[0.0, 0.3], 1e5, None, &opts).unwrap();
    let want = p.r - p.beta * y_star / p.gamma;
    assert!((on_line.value - want).abs() < 1e-3, "{} vs {want}", on_line.value);
}

#[test]
fn din_predator_radius_at_capacity() {
    let p = DinParams::default();
    let m = din_model(&p).unwrap();
    let r = spectral_radius_at_orbit(&m.spec, &m.predator, &[vec![p.k, 0.0]], 1e-12).unwrap();
    assert!((r.per_step.ln() - (1.0 - p.d)).abs() < 1e-10);
}

#[test]
fn swap_matrix_radius() {
    let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(spectral_radius(&Matrix::scalar(2.0)).unwrap(), 2.0);
    assert_eq!(spectral_radius(&Matrix::identity(2)).unwrap(), 1.0);
}

#[test]
fn food_chain_origin_exponent() {
    let m = food_chain(&FoodChainParams::default()).unwrap();
    let est = lyapunov_exponent(&m.spec, &m.prey, &[0.0; 3], 1e3, None, &LyapunovOptions::default()).unwrap();
    assert!((est.value - 1.0).abs() < 1e-6);
}
