use std::f64::consts::PI;

use proptest::prelude::*;
use raywave::coefficients::CoefficientField;
use raywave::mesh::{builtin_maps, mapped_grid, MeshMap};
use raywave::solver1d::{
    centroid, dalembert_reference, gaussian_packet, leapfrog_integrate, LeapfrogOptions, PacketSpec, Scheme1D, WaveState1D,
};
use raywave::C64;

fn coefficient_presets() -> Vec<CoefficientField> {
    vec![
        CoefficientField::constant(),
        CoefficientField::oscillatory(1.0, 1).unwrap(),
        CoefficientField::oscillatory(7.0, 1).unwrap(),
        CoefficientField::oscillatory(2.0, 5).unwrap(),
    ]
}

#[test]
fn energy_is_conserved_for_every_map_and_coefficient() {
    for map in builtin_maps() {
        for coeffs in coefficient_presets() {
            let grid = mapped_grid(120, &map).unwrap();
            let scheme = Scheme1D::new(grid.clone(), coeffs);
            for xi0 in [PI / 4.0, PI, 7.0 * PI / 4.0] {
                let (u0, u1) = gaussian_packet(&grid, &PacketSpec::new(0.1, xi0)).unwrap();
                let tr = leapfrog_integrate(&scheme, &u0, &u1, &LeapfrogOptions::new(2.0, 0.1)).unwrap();
                assert!(tr.max_energy_drift() <= 1e-3, "{} xi0={xi0}: {}", map.name(), tr.max_energy_drift());
                assert!(tr.energies.iter().all(|&(_, e)| e > 0.0));
            }
        }
    }
}

#[test]
fn dirichlet_boundary_stays_zero() {
    let grid = mapped_grid(80, &MeshMap::sin_boundary()).unwrap();
    let scheme = Scheme1D::new(grid.clone(), CoefficientField::oscillatory(2.0, 1).unwrap());
    let (u0, u1) = gaussian_packet(&grid, &PacketSpec::new(-0.8, 0.5)).unwrap();
    let (steps, dt) = LeapfrogOptions::new(3.0, 0.1).steps(grid.h()).unwrap();
    let mut st = WaveState1D::start(scheme, &u0, &u1, dt).unwrap();
    for _ in 1..steps {
        st.advance().unwrap();
        let u = st.current();
        assert_eq!(u[0], C64::new(0.0, 0.0));
        assert_eq!(u[u.len() - 1], C64::new(0.0, 0.0));
    }
}

fn standing_mode_error(map: &MeshMap, n: usize) -> f64 {
    let grid = mapped_grid(n, map).unwrap();
    let scheme = Scheme1D::new(grid.clone(), CoefficientField::constant());
    let mode: Vec<C64> = grid.nodes().iter().map(|&x| C64::new((PI * (x + 1.0) / 2.0).sin(), 0.0)).collect();
    let zero = vec![C64::new(0.0, 0.0); mode.len()];
    let tr = leapfrog_integrate(&scheme, &mode, &zero, &LeapfrogOptions::new(1.0, 0.1)).unwrap();
    let c = (PI / 2.0).cos();
    let u = tr.final_state.current();
    (0..u.len()).map(|j| grid.dual()[j] * (u[j] - mode[j] * c).norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn convergence_orders() {
    for (map, min_order) in [(MeshMap::identity(), 1.8), (MeshMap::tan_center(), 0.9)] {
        let e: Vec<f64> = [50, 100, 200].iter().map(|&n| standing_mode_error(&map, n)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= min_order, "{}: order {order}", map.name());
        }
    }
}

#[test]
fn dalembert_agreement_before_the_cone_hits_the_wall() {
    let n = 400;
    let grid = mapped_grid(n, &MeshMap::identity()).unwrap();
    let h = grid.h();
    let spec = PacketSpec::new(0.25, PI / 32.0);
    let gamma = spec.gamma_for(h);
    let k = spec.xi0 / h;
    let (u0, u1) = gaussian_packet(&grid, &spec).unwrap();
    let g = move |x: f64| (-0.5 * gamma * (x - 0.25).powi(2)).exp() * C64::from_polar(1.0, k * x);
    let dg = move |x: f64| g(x) * C64::new(-gamma * (x - 0.25), k);
    let scheme = Scheme1D::new(grid.clone(), CoefficientField::constant());
    let (steps, dt) = LeapfrogOptions::new(0.5, 0.1).steps(h).unwrap();
    let mut st = WaveState1D::start(scheme, &u0, &u1, dt).unwrap();
    let mut worst = 0.0_f64;
    for step in 2..=steps {
        st.advance().unwrap();
        if step % 200 == 0 || step == steps {
            for (j, &x) in grid.nodes().iter().enumerate() {
                if let Ok(v) = dalembert_reference(g, dg, x, st.time()) {
                    worst = worst.max((v - st.current()[j]).norm());
                }
            }
        }
    }
    assert!(worst <= 5e-2, "{worst}");
}

#[test]
fn non_propagating_packets_stay_put() {
    for map in builtin_maps() {
        let grid = mapped_grid(200, &map).unwrap();
        let scheme = Scheme1D::new(grid.clone(), CoefficientField::constant());
        let (u0, u1) = gaussian_packet(&grid, &PacketSpec::new(0.0, PI)).unwrap();
        let tr = leapfrog_integrate(&scheme, &u0, &u1, &LeapfrogOptions::new(5.0, 0.1)).unwrap();
        let c0 = tr.centroids[0].unwrap();
        let worst = tr.centroids.iter().map(|c| (c.unwrap() - c0).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.05, "{}: {worst}", map.name());
    }
}

#[test]
fn packet_centroid_near_centre() {
    let grid = mapped_grid(300, &MeshMap::tan_center()).unwrap();
    let (u0, _) = gaussian_packet(&grid, &PacketSpec::new(0.25, 0.0)).unwrap();
    let m: Vec<f64> = u0.iter().map(|z| z.norm()).collect();
    let c = centroid(&m, &grid).unwrap();
    let h = grid.cells().iter().cloned().fold(0.0, f64::max);
    assert!((c - 0.25).abs() <= h, "{c}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn leapfrog_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, x1 in -0.6f64..0.6, x2 in -0.6f64..0.6, xi in 0.0f64..6.2) {
        let grid = mapped_grid(60, &MeshMap::tan_center()).unwrap();
        let scheme = Scheme1D::new(grid.clone(), CoefficientField::oscillatory(1.0, 2).unwrap());
        let (p0, p1) = gaussian_packet(&grid, &PacketSpec::new(x1, xi)).unwrap();
        let (q0, q1) = gaussian_packet(&grid, &PacketSpec::new(x2, 0.3)).unwrap();
        let mix = |p: &[C64], q: &[C64]| p.iter().zip(q).map(|(p, q)| p * a + q * b).collect::<Vec<_>>();
        let opts = LeapfrogOptions::new(0.5, 0.1).with_stride(1000);
        let up = leapfrog_integrate(&scheme, &p0, &p1, &opts).unwrap();
        let uq = leapfrog_integrate(&scheme, &q0, &q1, &opts).unwrap();
        let um = leapfrog_integrate(&scheme, &mix(&p0, &q0), &mix(&p1, &q1), &opts).unwrap();
        let lin = mix(up.final_state.current(), uq.final_state.current());
        for (x, y) in lin.iter().zip(um.final_state.current()) {
            prop_assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn energy_is_nonnegative_and_drifts_little(x0 in -0.7f64..0.7, xi in 0.0f64..6.2, amp in 0.5f64..5.0) {
        let grid = mapped_grid(60, &MeshMap::sin_boundary()).unwrap();
        let scheme = Scheme1D::new(grid.clone(), CoefficientField::oscillatory(amp, 1).unwrap());
        let (u0, u1) = gaussian_packet(&grid, &PacketSpec::new(x0, xi)).unwrap();
        let tr = leapfrog_integrate(&scheme, &u0, &u1, &LeapfrogOptions::new(1.0, 0.1)).unwrap();
        prop_assert!(tr.energies.iter().all(|&(_, e)| e >= 0.0));
        prop_assert!(tr.max_energy_drift() <= 1e-3);
    }
}
