use approx::assert_relative_eq;
use linbayes::fem::{assemble_mass, assemble_prior_stiffness, Mesh, MSpace, ThetaSpec};
use linbayes::forward::{apply_f_star, ForwardModel, LinearMapModel};
use linbayes::lowrank::truncation_error_bound;
use linbayes::prior::PriorModel;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn box_mesh() -> impl Strategy<Value = Mesh> {
    prop_oneof![
        (1usize..30, -2.0f64..0.0, 0.5f64..3.0)
            .prop_map(|(n, lo, len)| Mesh::uniform(&[n], &[lo], &[lo + len]).unwrap()),
        (1usize..8, 1usize..8, 0.5f64..2.0, 0.5f64..2.0)
            .prop_map(|(nx, ny, lx, ly)| Mesh::uniform(&[nx, ny], &[0.0, -1.0], &[lx, ly - 1.0]).unwrap()),
    ]
}

fn vector(n: usize, seed: u64) -> DVector<f64> {
    DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * (seed as f64 * 0.618 + 0.3)).sin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mass_integrates_constants(mesh in box_mesh()) {
        let mass = assemble_mass(&mesh);
        let total: f64 = mass.row_sums().sum();
        assert_relative_eq!(total, mesh.domain_measure(), max_relative = 1e-12);
        for i in 0..mesh.num_nodes() {
            for (j, v) in mass.row(i) {
                assert_relative_eq!(v, mass.get(j, i), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_reduces_to_mass_on_constants(
        mesh in box_mesh(),
        alpha in 0.1f64..5.0,
        beta in 0.001f64..1.0,
    ) {
        let k = assemble_prior_stiffness(&mesh, alpha, &ThetaSpec::Isotropic { beta }).unwrap();
        let mass = assemble_mass(&mesh);
        let ones = DVector::from_element(mesh.num_nodes(), 1.0);
        let lhs = k.mul_vec(&ones);
        let rhs = mass.mul_vec(&ones) * alpha;
        prop_assert!((lhs - &rhs).amax() <= 1e-12 * rhs.amax());
    }

    #[test]
    fn basis_is_a_partition_of_unity(
        mesh in box_mesh(),
        t in proptest::collection::vec(0.0f64..=1.0, 2),
    ) {
        let x: Vec<f64> = (0..mesh.dim())
            .map(|d| mesh.lower()[d] + t[d] * (mesh.upper()[d] - mesh.lower()[d]))
            .collect();
        let phi = mesh.eval_basis(&x).unwrap();
        let sum: f64 = phi.values.iter().sum();
        assert_relative_eq!(sum, 1.0, max_relative = 1e-12);
        prop_assert!(phi.values.iter().all(|&v| v >= -1e-14));
        let linear = DVector::from_fn(mesh.num_nodes(), |i, _| mesh.node(i).iter().sum::<f64>());
        let exact: f64 = x.iter().sum();
        prop_assert!((mesh.interpolate(&linear, &x).unwrap() - exact).abs() < 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn prior_covariance_is_positive_and_m_symmetric(
        mesh in box_mesh(),
        alpha in 0.2f64..3.0,
        beta in 0.01f64..0.5,
        seed in 0u64..1000,
    ) {
        let n = mesh.num_nodes();
        let prior = PriorModel::new(&mesh, alpha, ThetaSpec::Isotropic { beta }, DVector::zeros(n)).unwrap();
        let ms = prior.mspace();
        let (u, v) = (vector(n, seed), vector(n, seed + 7));
        let gu = prior.apply_gamma_prior(&u).unwrap();
        let gv = prior.apply_gamma_prior(&v).unwrap();
        let a = ms.inner(&gu, &v).unwrap();
        let b = ms.inner(&u, &gv).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * ms.norm(&gu).unwrap() * ms.norm(&v).unwrap());
        prop_assert!(ms.inner(&gu, &u).unwrap() > 0.0);
    }

    #[test]
    fn linear_adjoint_identity(
        mesh in box_mesh(),
        q in 1usize..6,
        seed in 0u64..1000,
    ) {
        let n = mesh.num_nodes();
        let ms = MSpace::from_mesh(&mesh).unwrap();
        let g = DMatrix::from_fn(q, n, |i, j| ((i * n + j) as f64 * 0.37 + seed as f64).cos());
        let model = LinearMapModel::new(g, 0.1).unwrap();
        let lin = model.linearize(&DVector::zeros(n)).unwrap();
        let dm = vector(n, seed);
        let dy = vector(q, seed + 3);
        let fdm = model.jacobian_apply(&lin, &dm).unwrap();
        let adj = apply_f_star(&model, &lin, &ms, &dy).unwrap();
        let lhs = fdm.dot(&dy);
        let rhs = ms.inner(&dm, &adj).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * fdm.norm() * dy.norm() + 1e-14);
    }

    #[test]
    fn truncation_bound_is_bounded_and_monotone(
        lambdas in proptest::collection::vec(0.0f64..1e4, 0..20),
    ) {
        let full = truncation_error_bound(&lambdas);
        prop_assert!(full >= 0.0);
        prop_assert!(full <= lambdas.len() as f64);
        for k in 0..lambdas.len() {
            prop_assert!(truncation_error_bound(&lambdas[..k]) <= full);
        }
    }
}
