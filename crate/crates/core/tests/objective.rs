mod common;

use common::*;
use eit_afem::cem::{CemSolution, LinearSolver};
use eit_afem::experiments::generate_currents;
use eit_afem::mesh::{build_initial_mesh, ElectrodeLayout, Rectangle};
use eit_afem::objective::*;
use eit_afem::optimizer::Problem;
use eit_afem::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(eps: f64, alpha: f64) -> RegularizationParams {
    RegularizationParams::new(eps, alpha, 1.0, 2.0).unwrap()
}

#[test]
fn well_derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let h = 1e-5;
    for _ in 0..20 {
        let s: f64 = rng.random_range(-1.0..4.0);
        let (c0, c1) = (rng.random_range(0.1..1.5), rng.random_range(1.6..5.0));
        let fd = (double_well(s + h, c0, c1) - double_well(s - h, c0, c1)) / (2.0 * h);
        let d = double_well_derivative(s, c0, c1);
        assert!((fd - d).abs() <= 1e-8 * d.abs().max(1.0), "{s} {fd} {d}");
    }
}

#[test]
fn c_w_is_integral_of_root_well() {
    let p = RegularizationParams::new(1e-2, 1.0, 1.0, 6.0).unwrap();
    let oracle: f64 = gauss_legendre(20)
        .iter()
        .map(|&(t, w)| w * 5.0 * p.double_well(1.0 + 5.0 * t).sqrt())
        .sum();
    assert!((p.c_w() - oracle).abs() < 1e-12 * oracle);
    assert!((p.alpha() - oracle).abs() < 1e-12 * oracle);
}

#[test]
fn midpoint_value_on_square() {
    let m = paper_mesh();
    let s = ConductivityField::constant(m.num_vertices(), 1.5);
    let f = mm_functional(&m, &s, &params(1e-2, 2e-2));
    assert!((f - 25.0).abs() < 1e-10);
    let low = ConductivityField::constant(m.num_vertices(), 1.0);
    assert_eq!(mm_functional(&m, &low, &params(1e-2, 2e-2)), 0.0);
}

#[test]
fn mm_functional_matches_quadrature_oracle() {
    let m = build_initial_mesh(Rectangle::symmetric_square(), ElectrodeLayout::empty(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let s = random_field(&mut rng, m.num_vertices(), 0.5, 2.5);
        let p = params(rng.random_range(0.01..0.5), 1.0);
        let mut grad = 0.0;
        let mut well = 0.0;
        for t in 0..m.num_elements() {
            let tr = tri(&m, t);
            let v = local(&m, t, &s);
            let g = tr.gradient(v);
            grad += tr.area * (g[0] * g[0] + g[1] * g[1]);
            well += duffy_integrate(tr.p, 8, |x| double_well(tr.eval(v, x), 1.0, 2.0));
        }
        let oracle = p.epsilon * grad + well / p.epsilon;
        let f = mm_functional(&m, &ConductivityField::from_values(s), &p);
        assert!((f - oracle).abs() < 1e-12 * oracle);
    }
}

#[test]
fn functional_vanishes_only_at_the_wells() {
    let m = small_mesh(8);
    let p = params(0.1, 1.0);
    let n = m.num_vertices();
    assert_eq!(mm_functional(&m, &ConductivityField::constant(n, 1.0), &p), 0.0);
    assert_eq!(mm_functional(&m, &ConductivityField::constant(n, 2.0), &p), 0.0);
    let mut mixed = vec![1.0; n];
    mixed[n / 2] = 2.0;
    assert!(mm_functional(&m, &ConductivityField::from_values(mixed), &p) > 0.0);
    assert!(mm_functional(&m, &ConductivityField::constant(n, 1.0 + 1e-6), &p) > 0.0);
}

fn setup(seed: u64) -> (eit_afem::mesh::Mesh, Vec<eit_afem::cem::CurrentPattern>, Vec<Vec<f64>>) {
    let m = paper_mesh();
    let currents = generate_currents(16, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..3).map(|_| random_sum_zero(&mut rng, 16)).collect();
    (m, currents, data)
}

#[test]
fn objective_parts_and_degeneracies() {
    let (m, currents, _) = setup(12);
    let n = m.num_vertices();
    let problem_data = |sigma: &ConductivityField| {
        let prob = Problem {
            mesh: &m,
            currents: &currents,
            data: &[],
            params: params(1e-2, 2e-2),
            solver: LinearSolver::Direct,
        };
        let sys = eit_afem::cem::CemSystem::assemble(&m, sigma, prob.solver).unwrap();
        currents.iter().map(|c| sys.solve_forward(c).unwrap()).collect::<Vec<CemSolution>>()
    };
    let s = ConductivityField::constant(n, 1.0);
    let states = problem_data(&s);
    let exact: Vec<Vec<f64>> = states.iter().map(|u| u.voltages.clone()).collect();
    let v = objective(&m, &s, &states, &exact, &params(1e-2, 2e-2)).unwrap();
    assert_eq!(v.total, 0.0);
    let s2 = ConductivityField::constant(n, 1.3);
    let states2 = problem_data(&s2);
    let pure = objective(&m, &s2, &states2, &exact, &params(1e-2, 0.0)).unwrap();
    assert_eq!(pure.penalty, 0.0);
    assert!(pure.fidelity > 0.0);
    let full = objective(&m, &s2, &states2, &exact, &params(1e-2, 2e-2)).unwrap();
    assert_eq!(full.fidelity, pure.fidelity);
    assert!((full.penalty - 0.01 * mm_functional(&m, &s2, &params(1e-2, 2e-2))).abs() < 1e-14);
    assert!(matches!(
        objective(&m, &s2, &states2, &exact[..2], &params(1e-2, 2e-2)),
        Err(Error::Config(_))
    ));
}

#[test]
fn gradient_matches_finite_differences() {
    let (m, currents, data) = setup(13);
    let p = params(5e-2, 2e-2);
    let prob = Problem {
        mesh: &m,
        currents: &currents,
        data: &data,
        params: p,
        solver: LinearSolver::Direct,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let sigma = ConductivityField::from_values(random_field(&mut rng, m.num_vertices(), 1.2, 1.8));
    let eval = prob.evaluate(&sigma).unwrap();
    let adj = prob.adjoints(&eval).unwrap();
    let g = gateaux_gradient(&m, &sigma, &eval.states, &adj, &p).unwrap();
    let t = 1e-5;
    for _ in 0..5 {
        let mu = random_field(&mut rng, m.num_vertices(), -0.2, 0.2);
        let shift = |s: f64| {
            let v: Vec<f64> = sigma.values().iter().zip(&mu).map(|(a, b)| a + s * b).collect();
            prob.evaluate(&ConductivityField::from_values(v)).unwrap().objective.total
        };
        let fd = (shift(t) - shift(-t)) / (2.0 * t);
        let an = dot(&g, &mu);
        assert!((fd - an).abs() < 1e-4 * an.abs(), "{fd} {an}");
    }
}

#[test]
fn gradient_trivial_cases_and_staleness() {
    let m = small_mesh(8);
    let n = m.num_vertices();
    let s = ConductivityField::constant(n, 1.0);
    let zero = CemSolution {
        nodal: vec![0.0; n],
        voltages: vec![0.0; 4],
        fingerprint: s.fingerprint(),
        report: eit_afem::cem::SolveReport { iterations: 0, relative_residual: 0.0 },
    };
    let g = gateaux_gradient(&m, &s, &[zero.clone()], &[zero.clone()], &params(0.1, 1.0)).unwrap();
    assert!(g.iter().all(|&x| x == 0.0));
    let other = ConductivityField::constant(n, 1.5);
    assert!(matches!(
        gateaux_gradient(&m, &other, &[zero.clone()], &[zero.clone()], &params(0.1, 1.0)),
        Err(Error::Stale)
    ));
    // the penalty part is linear in α̃
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let r = ConductivityField::from_values(random_field(&mut rng, n, 1.0, 2.0));
    let z = CemSolution {
        fingerprint: r.fingerprint(),
        ..zero
    };
    let g1 = gateaux_gradient(&m, &r, &[z.clone()], &[z.clone()], &params(0.1, 1.0)).unwrap();
    let g3 = gateaux_gradient(&m, &r, &[z.clone()], &[z], &params(0.1, 3.0)).unwrap();
    for (a, b) in g1.iter().zip(&g3) {
        assert!((3.0 * a - b).abs() < 1e-12 * b.abs().max(1e-12));
    }
}

#[test]
fn projection_basics() {
    let p = project_box(&[0.0, 1.5, 3.0], 1.0, 2.0);
    assert_eq!(p.values(), &[1.0, 1.5, 2.0]);
    let again = project_box(p.values(), 1.0, 2.0);
    assert_eq!(again, p);
    assert!(p.is_feasible(1.0, 2.0));
}

proptest! {
    #[test]
    fn projection_is_nonexpansive(a in prop::collection::vec(-5.0f64..5.0, 1..40), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|x| x + rng.random_range(-2.0..2.0)).collect();
        let (pa, pb) = (project_box(&a, 0.5, 1.5), project_box(&b, 0.5, 1.5));
        prop_assert!(max_diff(pa.values(), pb.values()) <= max_diff(&a, &b));
        prop_assert!(pa.is_feasible(0.5, 1.5));
    }

    #[test]
    fn functional_nonnegative(seed in any::<u64>(), lo in -1.0f64..3.0, width in 0.0f64..3.0) {
        let m = small_mesh(8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ConductivityField::from_values(random_field(&mut rng, m.num_vertices(), lo, lo + width + 1e-9));
        prop_assert!(mm_functional(&m, &s, &params(0.05, 1.0)) >= 0.0);
    }
}
