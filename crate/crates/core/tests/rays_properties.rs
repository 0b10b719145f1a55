use std::f64::consts::PI;

use proptest::prelude::*;
use raywave::coefficients::{grid_speed_pair, CoefficientField};
use raywave::mesh::{builtin_maps, MeshMap};
use raywave::rays::*;

fn g1(b: Branch) -> RaySystem1D {
    RaySystem1D::constant(MeshMap::tan_center(), b)
}

fn g2(b: Branch) -> RaySystem1D {
    RaySystem1D::constant(MeshMap::sin_boundary(), b)
}

#[test]
fn hamiltonian_is_conserved_through_reflections() {
    for map in builtin_maps() {
        for coeffs in [CoefficientField::constant(), CoefficientField::oscillatory(2.0, 1).unwrap()] {
            for branch in [Branch::Plus, Branch::Minus] {
                let sys = RaySystem1D::new(DispersionLaw::discrete(), map.clone(), coeffs.clone(), branch);
                for &(x0, xi0) in &[(0.0, PI / 4.0), (0.3, 2.0), (-0.5, 5.5)] {
                    let path = integrate_ray(&sys, x0, xi0, 10.0, 1e-3).unwrap();
                    assert!(sys.hamiltonian_value([x0, xi0], path.tau0).abs() < 1e-14);
                    let r = max_hamiltonian_residual(&sys, &path);
                    assert!(r <= 1e-8, "{} {branch:?} ({x0}, {xi0}): {r}", map.name());
                    for w in path.samples.windows(2) {
                        assert!(w[1].t > w[0].t);
                    }
                    for refl in &path.reflections {
                        assert!((refl.xi_after - (2.0 * PI - refl.xi_before)).abs() < 1e-14);
                    }
                    assert!(path.samples.iter().all(|s| s.x.abs() <= 1.0));
                }
            }
        }
    }
}

#[test]
fn reflection_leaves_hamiltonian_unchanged() {
    let sys = g1(Branch::Plus);
    let tau = sys.tau0(0.4, 1.1);
    let a = sys.hamiltonian_value([0.4, 1.1], tau);
    let b = sys.hamiltonian_value([0.4, 2.0 * PI - 1.1], tau);
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn internal_reflection_on_the_tan_grid() {
    let sys = g1(Branch::Plus);
    let mut previous = f64::INFINITY;
    for k in [7.0, 10.0, 13.0] {
        let path = integrate_ray(&sys, 0.0, k * PI / 15.0, 5.0, 1e-3).unwrap();
        assert!(path.reflections.is_empty());
        let amp = path.max_abs_position();
        assert!(amp < 1.0 && amp <= previous);
        previous = amp;
    }
}

#[test]
fn saddle_trapping_on_the_sin_grid() {
    for branch in [Branch::Plus, Branch::Minus] {
        let right = integrate_ray(&g2(branch), 0.5, PI, 5.0, 1e-3).unwrap();
        assert!(right.samples.iter().all(|s| (0.0..=1.0).contains(&s.x)));
        let left = integrate_ray(&g2(branch), -0.5, PI, 5.0, 1e-3).unwrap();
        assert!(left.samples.iter().all(|s| (-1.0..=0.0).contains(&s.x)));
    }
}

#[test]
fn stationary_rays_at_equilibria() {
    let systems = [g1(Branch::Plus), g2(Branch::Minus), RaySystem1D::constant(MeshMap::identity(), Branch::Plus)];
    for sys in &systems {
        let path = integrate_ray(sys, 0.0, PI, 10.0, 1e-3).unwrap();
        assert!(path.reflections.is_empty());
        for s in &path.samples {
            assert!(s.x.abs() <= 1e-10 && (s.xi - PI).abs() <= 1e-10);
        }
    }
}

#[test]
fn reference_and_physical_forms_agree() {
    for map in [MeshMap::tan_center(), MeshMap::sin_boundary()] {
        let phys = RaySystem1D::constant(map.clone(), Branch::Plus);
        let refr = phys.clone().with_form(RayForm::Reference);
        for &(x0, xi0) in &[(0.1, 2.5), (-0.2, 3.6), (0.4, 2.9)] {
            let a = integrate_ray(&phys, x0, xi0, 5.0, 1e-3).unwrap();
            let b = integrate_ray(&refr, map.ginv(x0), xi0, 5.0, 1e-3).unwrap();
            assert_eq!(a.reflections.len(), b.reflections.len());
            for (p, q) in a.samples.iter().zip(&b.samples) {
                assert!((p.x - map.g(q.x)).abs() < 1e-6, "{} t={}", map.name(), p.t);
            }
        }
    }
}

#[test]
fn variable_coefficient_equilibria_alternate() {
    let sys = RaySystem1D::new(DispersionLaw::discrete(), MeshMap::tan_center(), CoefficientField::oscillatory(1.0, 1).unwrap(), Branch::Plus);
    let report = find_equilibria(&sys, 401, 201).unwrap();
    let interior: Vec<&Equilibrium> = report.equilibria.iter().filter(|e| e.x.abs() < 1.0 - 1e-9).collect();
    assert!(interior.len() >= 3, "{:?}", report.equilibria);
    for e in &interior {
        assert!((e.xi - PI).abs() < 1e-10);
        let f = sys.rhs([e.x, e.xi]);
        assert!(f[0].hypot(f[1]) <= 1e-10);
        assert_ne!(e.kind, EquilibriumKind::Other);
    }
    for w in interior.windows(2) {
        assert_ne!(w[0].kind, w[1].kind, "{:?}", interior);
    }
    let centre = interior.iter().find(|e| e.x.abs() < 1e-9).unwrap();
    assert_eq!(centre.kind, EquilibriumKind::Center);
}

#[test]
fn curvature_identity_and_monotonicity() {
    let mut prev_speed = [0.0; 5];
    let mut prev_curv = [0.0; 5];
    let xs = [-0.8, -0.3, 0.1, 0.2, 0.65];
    for a in [0.5, 1.0, 2.0, 4.0, 7.0] {
        let sys = RaySystem1D::new(DispersionLaw::discrete(), MeshMap::identity(), CoefficientField::oscillatory(a, 1).unwrap(), Branch::Plus);
        for (i, &x) in xs.iter().enumerate() {
            let xi = 0.9;
            let acc = path_acceleration(&sys, [x, xi]);
            assert!((acc + a * PI / 2.0 * (2.0 * PI * x).sin()).abs() < 1e-12);
            let speed = variable_coefficient_rhs(a, 1.0, [x, xi])[0].abs();
            assert!(speed >= prev_speed[i]);
            assert!(acc.abs() > prev_curv[i]);
            prev_speed[i] = speed;
            prev_curv[i] = acc.abs();
        }
    }
}

#[test]
fn center_orbits_close_and_saddle_orbits_stay_on_one_side() {
    let sys = g1(Branch::Plus);
    let seeds: Vec<(f64, f64)> = [0.02, 0.05, 0.1, 0.2].iter().map(|&x| (x, PI)).collect();
    let portrait = phase_portrait(&sys, &seeds, &PortraitOptions { horizon: 12.0, ..Default::default() }).unwrap();
    for orbit in &portrait.orbits {
        let fr = first_return_1d(&sys, orbit).unwrap();
        assert!(fr.distance <= 1e-3, "{fr:?}");
    }
    assert_eq!(portrait.equilibria.equilibria.len(), 1);

    let sys = g2(Branch::Plus);
    let seeds = [(0.5, PI), (-0.5, PI)];
    let portrait = phase_portrait(&sys, &seeds, &PortraitOptions { horizon: 5.0, ..Default::default() }).unwrap();
    assert!(portrait.orbits[0].samples.iter().all(|s| s.x > 0.0));
    assert!(portrait.orbits[1].samples.iter().all(|s| s.x < 0.0));
    assert_eq!(portrait.equilibria.equilibria[0].kind, EquilibriumKind::Saddle);

    let still = phase_portrait(&g1(Branch::Plus), &[(0.0, PI)], &PortraitOptions::default()).unwrap();
    assert!(still.orbits[0].samples.iter().all(|s| s.x == 0.0 && s.xi == PI));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mirrored_frequency_gives_mirrored_path(x0 in -0.9f64..0.9, xi0 in 0.0f64..(2.0 * PI), which in 0usize..3) {
        let map = builtin_maps()[which].clone();
        let plus = RaySystem1D::constant(map.clone(), Branch::Plus);
        let minus = RaySystem1D::constant(map, Branch::Minus);
        let a = integrate_ray(&plus, x0, xi0, 3.0, 1e-3).unwrap();
        let b = integrate_ray(&minus, x0, 2.0 * PI - xi0, 3.0, 1e-3).unwrap();
        for (p, q) in a.samples.iter().zip(&b.samples) {
            prop_assert!((p.x - q.x).abs() <= 1e-8);
        }
    }

    #[test]
    fn speed_law_holds_pointwise(x in -1.0f64..1.0, xi in 0.0f64..(2.0 * PI), which in 0usize..3, amp in 0.1f64..4.0) {
        let map = builtin_maps()[which].clone();
        let field = CoefficientField::oscillatory(amp, 2).unwrap();
        let sys = RaySystem1D::new(DispersionLaw::discrete(), map.clone(), field.clone(), Branch::Minus);
        let (a, _) = grid_speed_pair(&field, &map, x);
        prop_assert!((sys.rhs([x, xi])[0].abs() - a * (xi / 2.0).cos().abs()).abs() <= 1e-10);
    }

    #[test]
    fn hamiltonian_residual_small_on_random_rays(x0 in -1.0f64..1.0, xi0 in 0.0f64..(2.0 * PI), which in 0usize..3) {
        let sys = RaySystem1D::constant(builtin_maps()[which].clone(), Branch::Plus);
        let path = integrate_ray(&sys, x0, xi0, 4.0, 1e-3).unwrap();
        prop_assert!(max_hamiltonian_residual(&sys, &path) <= 1e-8);
    }
}
