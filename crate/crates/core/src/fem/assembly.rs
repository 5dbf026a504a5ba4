//! Mass and stiffness assembly with 2-point Gauss quadrature per axis.

use super::mesh::Mesh;
use super::sparse::SparseSymMatrix;
use super::theta::ThetaSpec;
use crate::error::{Error, Result};

const GAUSS_POINTS: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9, // (1 − 1/√3)/2
    0.5 + 0.288_675_134_594_812_9,
];
const GAUSS_WEIGHT: f64 = 0.5;

/// A quadrature point on one element: physical position, weight (including
/// the Jacobian), basis values and physical basis gradients.
struct QuadPoint {
    x: Vec<f64>,
    weight: f64,
    values: Vec<f64>,
    grads: Vec<Vec<f64>>,
}

fn element_quadrature(mesh: &Mesh, elem: usize) -> Vec<QuadPoint> {
    let h = mesh.spacing();
    let origin = mesh.node(mesh.elements()[elem][0]).to_vec();
    match mesh.dim() {
        1 => GAUSS_POINTS
            .iter()
            .map(|&s| QuadPoint {
                x: vec![origin[0] + s * h[0]],
                weight: GAUSS_WEIGHT * h[0],
                values: vec![1.0 - s, s],
                grads: vec![vec![-1.0 / h[0]], vec![1.0 / h[0]]],
            })
            .collect(),
        _ => {
            let mut pts = Vec::with_capacity(4);
            for &t in &GAUSS_POINTS {
                for &s in &GAUSS_POINTS {
                    let (hx, hy) = (h[0], h[1]);
                    pts.push(QuadPoint {
                        x: vec![origin[0] + s * hx, origin[1] + t * hy],
                        weight: GAUSS_WEIGHT * GAUSS_WEIGHT * hx * hy,
                        values: vec![(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t],
                        grads: vec![
                            vec![-(1.0 - t) / hx, -(1.0 - s) / hy],
                            vec![(1.0 - t) / hx, -s / hy],
                            vec![t / hx, s / hy],
                            vec![-t / hx, (1.0 - s) / hy],
                        ],
                    });
                }
            }
            pts
        }
    }
}

/// `M_ij = ∫ φ_i φ_j dx`
pub fn assemble_mass(mesh: &Mesh) -> SparseSymMatrix {
    let mut triplets = Vec::new();
    for (e, nodes) in mesh.elements().iter().enumerate() {
        for qp in element_quadrature(mesh, e) {
            for (a, &i) in nodes.iter().enumerate() {
                for (b, &j) in nodes.iter().enumerate() {
                    triplets.push((i, j, qp.weight * qp.values[a] * qp.values[b]));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.num_nodes(), &triplets)
        .expect("element connectivity references valid nodes")
}

/// `S_ij = ∫ (Θ∇φ_i)·∇φ_j dx`, with `Θ` evaluated at each quadrature point
/// relative to the domain centre.
pub fn assemble_stiffness(mesh: &Mesh, theta: &ThetaSpec) -> Result<SparseSymMatrix> {
    theta.validate()?;
    let center = mesh.center();
    let mut triplets = Vec::new();
    for (e, nodes) in mesh.elements().iter().enumerate() {
        for qp in element_quadrature(mesh, e) {
            let offset: Vec<f64> = qp.x.iter().zip(&center).map(|(a, c)| a - c).collect();
            let tensor = theta.eval(&offset)?;
            for (a, &i) in nodes.iter().enumerate() {
                for (b, &j) in nodes.iter().enumerate() {
                    let mut val = 0.0;
                    for p in 0..mesh.dim() {
                        for q in 0..mesh.dim() {
                            val += tensor[(p, q)] * qp.grads[a][q] * qp.grads[b][p];
                        }
                    }
                    triplets.push((i, j, qp.weight * val));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.num_nodes(), &triplets)
}

/// Stiffness of the prior precision operator with homogeneous Neumann
/// boundary conditions: `K_ij = α∫ (Θ∇φ_i)·∇φ_j + φ_i φ_j dx`.
pub fn assemble_prior_stiffness(mesh: &Mesh, alpha: f64, theta: &ThetaSpec) -> Result<SparseSymMatrix> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "prior scale alpha must be positive, got {alpha}"
        )));
    }
    let stiff = assemble_stiffness(mesh, theta)?;
    let mass = assemble_mass(mesh);
    stiff.linear_combination(alpha, &mass, alpha)
}
