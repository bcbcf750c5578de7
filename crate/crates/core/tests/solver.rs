use lshj_core::oracles::{linf_error, radial_mcm_profile};
use lshj_core::*;

fn square_grid(side: usize, width: usize, mask: impl Fn(&[f64]) -> bool) -> PointCloud {
    let stencil = Stencil::grid_wide(2, width, false).unwrap();
    let plain = build_grid_cloud(&[side, side], &stencil, BoundarySpec::None).unwrap();
    let m: Vec<bool> = (0..plain.len()).map(|i| mask(plain.point(i))).collect();
    build_grid_cloud(&[side, side], &stencil, BoundarySpec::Mask(m)).unwrap()
}

fn on_edge(y: &[f64]) -> bool {
    y.iter().any(|&c| c < 1e-12 || c > 1.0 - 1e-12)
}

fn edge_distance(y: &[f64]) -> f64 {
    y[0].min(1.0 - y[0]).min(y[1]).min(1.0 - y[1])
}

#[test]
fn eikonal_on_a_grid_recovers_distance_to_the_edge() {
    for side in [17usize, 33] {
        // Nodes within stencil reach of the edge are Dirichlet nodes; feed them the exact value.
        let cloud = square_grid(side, 7, on_edge);
        let spec = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Constant(1.0)).unwrap();
        let exact = ScalarField::from_fn(&cloud, edge_distance).unwrap();
        let z = ScalarField::zeros(cloud.len());
        let r = solve(&spec, &cloud, &exact, &z, 1e-6, 1000).unwrap();
        assert_ne!(r.stop_reason, StopReason::MaxSweeps);
        // Axis-aligned stencil directions make the distance to straight edges exact.
        let e = linf_error(&r.final_field, &exact).unwrap();
        assert!(e < 1e-9, "side {side}: {e}");
    }
}

#[test]
fn eikonal_scales_with_the_right_hand_side() {
    let cloud = square_grid(17, 5, on_edge);
    let z = ScalarField::zeros(cloud.len());
    assert!(cloud.interior_count() > 0);
    let one = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Constant(1.0)).unwrap();
    let two = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Constant(2.0)).unwrap();
    let a = solve(&one, &cloud, &z, &z, 1e-8, 1000).unwrap();
    let b = solve(&two, &cloud, &z, &z, 1e-8, 1000).unwrap();
    for (x, y) in a.final_field.iter().zip(b.final_field.iter()) {
        assert!((2.0 * x - y).abs() < 1e-9);
    }
}

#[test]
fn mean_curvature_on_a_disk_matches_the_radial_profile() {
    let r0 = 0.4;
    let profile = radial_mcm_profile(r0, 1.0, 1.0).unwrap();
    let mut errs = Vec::new();
    for side in [33usize, 65] {
        let outside = |y: &[f64]| (y[0] - 0.5).hypot(y[1] - 0.5) >= r0;
        let cloud = square_grid(side, 7, outside);
        let spec = SchemeSpec::new(Hamiltonian::Mc2d, Rhs::Constant(1.0)).unwrap();
        let z = ScalarField::zeros(cloud.len());
        let r = solve(&spec, &cloud, &z, &z, 1e-4, 5000).unwrap();
        let exact: Vec<f64> = (0..cloud.len())
            .map(|i| {
                let y = cloud.point(i);
                profile.eval((y[0] - 0.5).hypot(y[1] - 0.5))
            })
            .collect();
        errs.push(linf_error(&r.final_field, &exact).unwrap());
    }
    let peak = profile.closed_form(0.0);
    assert!(errs[1] < 0.1 * peak, "{errs:?}");
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn coarse_to_fine_reproduces_constants_and_linears() {
    let stencil = Stencil::grid_wide(2, 3, false).unwrap();
    let coarse = build_grid_cloud(&[9, 9], &stencil, BoundarySpec::None).unwrap();
    let fine = build_grid_cloud(&[17, 17], &stencil, BoundarySpec::unit_cube_band(2, Some(0.01))).unwrap();
    let dirichlet = ScalarField::constant(fine.len(), -1.0);

    let c = ScalarField::constant(coarse.len(), 0.25);
    let out = coarse_to_fine(&coarse, &fine, &c, &dirichlet).unwrap();
    for i in 0..fine.len() {
        let want = if fine.is_boundary(i) { -1.0 } else { 0.25 };
        assert!((out[i] - want).abs() < 1e-12);
    }

    let lin = |y: &[f64]| 0.3 + 2.0 * y[0] - 0.7 * y[1];
    let l = ScalarField::from_fn(&coarse, lin).unwrap();
    let out = coarse_to_fine(&coarse, &fine, &l, &dirichlet).unwrap();
    for i in (0..fine.len()).filter(|&i| !fine.is_boundary(i)) {
        assert!((out[i] - lin(fine.point(i))).abs() < 1e-12);
    }
}

#[test]
fn coarse_solution_speeds_up_the_fine_tukey_solve() {
    let model = DensityModel::preset("circle", 2).unwrap();
    let spec = SchemeSpec::new(Hamiltonian::Tukey, Rhs::Density(model)).unwrap();
    let coarse = build_grid_cloud(&[32, 32], &Stencil::interp_ring(16).unwrap(), BoundarySpec::None).unwrap();
    let fine = build_grid_cloud(&[64, 64], &Stencil::interp_ring(32).unwrap(), BoundarySpec::None).unwrap();
    let zc = ScalarField::zeros(coarse.len());
    let zf = ScalarField::zeros(fine.len());
    let rc = solve(&spec, &coarse, &zc, &zc, 3e-3, 1000).unwrap();
    let init = coarse_to_fine(&coarse, &fine, &rc.final_field, &zf).unwrap();
    let cold = solve(&spec, &fine, &zf, &zf, 3e-3, 1000).unwrap();
    let warm = solve(&spec, &fine, &zf, &init, 3e-3, 1000).unwrap();
    assert!(warm.converged && cold.converged);
    assert!(warm.iterations < cold.iterations, "warm {} cold {}", warm.iterations, cold.iterations);
}

#[test]
fn report_tracks_every_sweep() {
    let cloud = square_grid(9, 3, on_edge);
    let spec = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Constant(1.0)).unwrap();
    let z = ScalarField::zeros(cloud.len());
    let r = solve(&spec, &cloud, &z, &z, 1e-12, 3).unwrap();
    assert_eq!(r.residual_history.len(), r.iterations + 1);
    assert!(r.iterations <= 3);
    for i in (0..cloud.len()).filter(|&i| cloud.is_boundary(i)) {
        assert_eq!(r.final_field[i], 0.0);
    }
    // Interior nodes move off zero on the first sweep.
    assert!((0..cloud.len()).any(|i| !cloud.is_boundary(i) && r.final_field[i] > 0.0));
}
