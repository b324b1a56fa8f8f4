use proptest::prelude::*;
use slr_core::krylov::{gmres, pcg, IdentityPreconditioner, KrylovOptions};
use slr_core::slr::{build_slr, Partitioner, SlrOptions, ThetaPolicy};
use slr_core::sparse::{gen_laplacian_2d, gen_laplacian_3d};
use slr_core::GridShape;

fn ones_rhs(a: &slr_core::SymSparseMatrix) -> Vec<f64> {
    a.matvec(&vec![1.0; a.n()]).unwrap()
}

#[test]
fn slr_beats_no_preconditioner() {
    let a = gen_laplacian_2d(48, 48, 0.0).unwrap();
    let b = ones_rhs(&a);
    let opts = KrylovOptions::default();
    let (_, plain) = pcg(&a, &b, &IdentityPreconditioner, &opts).unwrap();
    let pre = build_slr(&a, &SlrOptions { p: 8, k: 8, ..SlrOptions::default() }).unwrap();
    let (x, rep) = pcg(&a, &b, &pre, &opts).unwrap();
    assert!(rep.converged);
    assert!(rep.iterations * 2 < plain.iterations, "{} vs {}", rep.iterations, plain.iterations);
    assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-5));
}

#[test]
fn shifted_3d_problem_converges_with_gmres() {
    let a = gen_laplacian_3d(12, 12, 12, 0.3).unwrap();
    let b = ones_rhs(&a);
    let opts = SlrOptions {
        p: 8,
        k: 8,
        partitioner: Partitioner::Geometric(GridShape::new_3d(12, 12, 12)),
        ..SlrOptions::default()
    };
    let pre = build_slr(&a, &opts).unwrap();
    let (_, rep) = gmres(&a, &b, &pre, &KrylovOptions::default()).unwrap();
    assert!(rep.converged);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // With theta = lambda_s the preconditioned Schur complement has its
    // spectrum in [(1 - lambda_{k+1}) / (1 - lambda_s), 1].
    #[test]
    fn preconditioned_schur_spectrum_is_bracketed(nx in 6usize..16, ny in 6usize..16, k in 0usize..6) {
        let a = gen_laplacian_2d(nx, ny, 0.0).unwrap();
        let g = GridShape::new_2d(nx, ny);
        let pre = build_slr(&a, &SlrOptions {
            p: 2,
            k,
            theta: ThetaPolicy::LambdaS,
            droptol_b: 0.0,
            droptol_c: 0.0,
            lanczos_steps: Some(usize::MAX),
            lanczos_tol: 0.0,
            partitioner: Partitioner::Geometric(g),
            ..SlrOptions::default()
        }).unwrap();
        let dd = slr_core::partition::build_dd(
            &a, &slr_core::partition::geometric_bisection_grid(g, 2).unwrap()).unwrap();
        let ds = slr_core::analysis::dense_schur(&dd).unwrap();
        prop_assume!(k < ds.size());
        let eigs = ds.preconditioned_eigs(|v| pre.apply_schur_inverse(v)).unwrap();
        let lam = ds.h_eigen().values;
        let low = (1.0 - lam[k]) / (1.0 - lam[lam.len() - 1]);
        prop_assert!(eigs[0] > low - 1e-8, "smallest {} below {}", eigs[0], low);
        prop_assert!(eigs[eigs.len() - 1] < 1.0 + 1e-8, "largest {}", eigs[eigs.len() - 1]);
    }
}
