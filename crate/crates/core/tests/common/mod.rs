#![allow(dead_code)]

use linbayes::fem::{Mesh, ThetaSpec};
use linbayes::forward::{LinearMapModel, ObservationSetup, SourceSpec, WaveConfig, WaveModel};
use linbayes::prior::PriorModel;
use linbayes::rng::{seeded, standard_normal_vector};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn random_vectors(seed: u64, n: usize, count: usize) -> Vec<DVector<f64>> {
    let mut rng = seeded(seed);
    (0..count).map(|_| standard_normal_vector(&mut rng, n)).collect()
}

/// Dense matrix of a linear map given by its action.
pub fn dense_of<F>(n: usize, apply: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        out.set_column(j, &apply(&e));
    }
    out
}

/// Tensor-product hat functions on a uniform box mesh, written out
/// independently of the library with a 3-point Gauss rule per axis.
pub struct BruteForceFem {
    pub mass: DMatrix<f64>,
    pub grad: DMatrix<f64>,
}

impl BruteForceFem {
    pub fn new(counts: &[usize], lower: &[f64], upper: &[f64]) -> Self {
        let dim = counts.len();
        let h: Vec<f64> = (0..dim).map(|d| (upper[d] - lower[d]) / counts[d] as f64).collect();
        let nodes_per: Vec<usize> = counts.iter().map(|c| c + 1).collect();
        let n: usize = nodes_per.iter().product();
        let gauss = [
            (0.5 - 0.5 * (0.6f64).sqrt(), 5.0 / 18.0),
            (0.5, 8.0 / 18.0),
            (0.5 + 0.5 * (0.6f64).sqrt(), 5.0 / 18.0),
        ];
        let index = |multi: &[usize]| -> usize {
            let mut idx = 0;
            let mut stride = 1;
            for d in 0..dim {
                idx += multi[d] * stride;
                stride *= nodes_per[d];
            }
            idx
        };
        let mut mass = DMatrix::zeros(n, n);
        let mut grad = DMatrix::zeros(n, n);
        let n_el: usize = counts.iter().product();
        let corners = 1usize << dim;
        let qpts = 3usize.pow(dim as u32);
        for el in 0..n_el {
            let mut e_multi = vec![0; dim];
            let mut rem = el;
            for d in 0..dim {
                e_multi[d] = rem % counts[d];
                rem /= counts[d];
            }
            for q in 0..qpts {
                let mut qr = q;
                let mut xi = vec![0.0; dim];
                let mut w = 1.0;
                for d in 0..dim {
                    let (p, wt) = gauss[qr % 3];
                    qr /= 3;
                    xi[d] = p;
                    w *= wt * h[d];
                }
                let mut vals = vec![0.0; corners];
                let mut grads = vec![vec![0.0; dim]; corners];
                let mut ids = vec![0; corners];
                for c in 0..corners {
                    let mut multi = e_multi.clone();
                    let mut val = 1.0;
                    for d in 0..dim {
                        let bit = (c >> d) & 1;
                        multi[d] += bit;
                        val *= if bit == 1 { xi[d] } else { 1.0 - xi[d] };
                    }
                    for g in 0..dim {
                        let mut dv = 1.0;
                        for d in 0..dim {
                            let bit = (c >> d) & 1;
                            dv *= if d == g {
                                if bit == 1 {
                                    1.0 / h[d]
                                } else {
                                    -1.0 / h[d]
                                }
                            } else if bit == 1 {
                                xi[d]
                            } else {
                                1.0 - xi[d]
                            };
                        }
                        grads[c][g] = dv;
                    }
                    vals[c] = val;
                    ids[c] = index(&multi);
                }
                for a in 0..corners {
                    for b in 0..corners {
                        mass[(ids[a], ids[b])] += w * vals[a] * vals[b];
                        let gg: f64 = (0..dim).map(|d| grads[a][d] * grads[b][d]).sum();
                        grad[(ids[a], ids[b])] += w * gg;
                    }
                }
            }
        }
        Self { mass, grad }
    }

    /// `α(β·∇∇ + mass)` for an isotropic tensor.
    pub fn prior_stiffness(&self, alpha: f64, beta: f64) -> DMatrix<f64> {
        (&self.grad * beta + &self.mass) * alpha
    }
}

/// Dense matrices of a prior and a linear forward model.
pub struct DenseProblem {
    pub m: DMatrix<f64>,
    pub m_inv: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub k_inv: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub sigma: f64,
}

impl DenseProblem {
    pub fn new(prior: &PriorModel, model: &LinearMapModel) -> Self {
        let m = prior.mspace().mass().to_dense();
        let k = prior.stiffness().to_dense();
        Self {
            m_inv: m.clone().try_inverse().unwrap(),
            k_inv: k.clone().try_inverse().unwrap(),
            m,
            k,
            g: model.matrix().clone(),
            sigma: linbayes::forward::ForwardModel::noise_sigma(model),
        }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// `K⁻¹MK⁻¹M`
    pub fn gamma_prior(&self) -> DMatrix<f64> {
        &self.k_inv * &self.m * &self.k_inv * &self.m
    }

    pub fn gamma_prior_sqrt(&self) -> DMatrix<f64> {
        &self.k_inv * &self.m
    }

    pub fn gamma_prior_inv(&self) -> DMatrix<f64> {
        &self.m_inv * &self.k * &self.m_inv * &self.k
    }

    /// `M⁻¹GᵀG/σ²`
    pub fn h_misfit(&self) -> DMatrix<f64> {
        &self.m_inv * self.g.transpose() * &self.g / self.sigma.powi(2)
    }

    pub fn gamma_post(&self) -> DMatrix<f64> {
        (self.h_misfit() + self.gamma_prior_inv()).try_inverse().unwrap()
    }

    pub fn h_tilde(&self) -> DMatrix<f64> {
        let s = self.gamma_prior_sqrt();
        &s * self.h_misfit() * &s
    }

    /// Eigenvalues of `H̃x = λx` with `M`-orthonormal eigenvectors, sorted
    /// descending, from the symmetric form `M^{-1/2}(MH̃)M^{-1/2}`.
    pub fn h_tilde_eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let me = SymmetricEigen::new(self.m.clone());
        let inv_sqrt = &me.eigenvectors
            * DMatrix::from_diagonal(&me.eigenvalues.map(|x| 1.0 / x.sqrt()))
            * me.eigenvectors.transpose();
        let mh = &self.m * self.h_tilde();
        let sym = &inv_sqrt * (&mh + mh.transpose()) * 0.5 * &inv_sqrt;
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut vecs = DMatrix::zeros(self.n(), self.n());
        for (c, &i) in order.iter().enumerate() {
            vecs.set_column(c, &(&inv_sqrt * eig.eigenvectors.column(i)));
        }
        (order.iter().map(|&i| eig.eigenvalues[i]).collect(), vecs)
    }

    /// Operator norm of `B` on `ℝⁿ_M` for an M-self-adjoint `B`.
    pub fn m_operator_norm(&self, b: &DMatrix<f64>) -> f64 {
        let me = SymmetricEigen::new(self.m.clone());
        let sqrt = &me.eigenvectors
            * DMatrix::from_diagonal(&me.eigenvalues.map(f64::sqrt))
            * me.eigenvectors.transpose();
        let inv_sqrt = &me.eigenvectors
            * DMatrix::from_diagonal(&me.eigenvalues.map(|x| 1.0 / x.sqrt()))
            * me.eigenvectors.transpose();
        let sym = &sqrt * b * &inv_sqrt;
        let sym = (&sym + sym.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.amax()
    }
}

/// 2D prior plus Gaussian-kernel observations.
pub fn linear_problem(per_side: usize, q: usize, dense: bool) -> (PriorModel, LinearMapModel) {
    let mesh = Mesh::uniform(&[per_side, per_side], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let n = mesh.num_nodes();
    let mut prior = PriorModel::new(
        &mesh,
        0.5,
        ThetaSpec::Isotropic { beta: 0.05 },
        DVector::from_fn(n, |i, _| 0.2 * mesh.node(i)[0]),
    )
    .unwrap();
    if dense {
        prior = prior.with_dense_solves().unwrap();
    }
    let centers: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            let t = (i as f64 + 0.5) / q as f64;
            vec![0.15 + 0.7 * t, 0.5 + 0.3 * (6.0 * t).sin()]
        })
        .collect();
    let model = LinearMapModel::gaussian_kernels(&mesh, prior.mspace(), &centers, 0.12, 0.02).unwrap();
    (prior, model)
}

/// 1D prior plus Gaussian-kernel observations.
pub fn linear_problem_1d(n_el: usize, q: usize) -> (PriorModel, LinearMapModel) {
    let mesh = Mesh::uniform(&[n_el], &[0.0], &[1.0]).unwrap();
    let prior = PriorModel::new(
        &mesh,
        0.3,
        ThetaSpec::Isotropic { beta: 0.02 },
        DVector::from_element(n_el + 1, 1.0),
    )
    .unwrap();
    let centers: Vec<Vec<f64>> = (0..q).map(|i| vec![(i as f64 + 0.5) / q as f64]).collect();
    let model = LinearMapModel::gaussian_kernels(&mesh, prior.mspace(), &centers, 0.05, 0.01).unwrap();
    (prior, model)
}

pub fn wave_setup(final_time: f64, receivers: Vec<f64>) -> (WaveConfig, ObservationSetup) {
    let config = WaveConfig {
        rho: None,
        final_time,
        dt: 0.002,
        cfl: 0.5,
        source: SourceSpec {
            location: 0.3,
            width: 0.03,
            time_center: 0.15,
            time_std: 0.04,
            amplitude: 10.0,
        },
    };
    let setup = ObservationSetup {
        receivers,
        sample_times: ObservationSetup::uniform_times(0.01, final_time),
        fourier_modes: None,
        noise_sigma: 0.002,
    };
    (config, setup)
}

pub fn wave_model(n_el: usize, final_time: f64, receivers: Vec<f64>) -> WaveModel {
    let mesh = Mesh::uniform(&[n_el], &[0.0], &[1.0]).unwrap();
    let (config, setup) = wave_setup(final_time, receivers);
    WaveModel::new(&mesh, config, setup).unwrap()
}

/// Smooth wavespeed around 1 with a bump at 0.6.
pub fn bumped_wavespeed(mesh: &Mesh, amplitude: f64) -> DVector<f64> {
    DVector::from_fn(mesh.num_nodes(), |i, _| {
        let x = mesh.node(i)[0];
        1.0 + amplitude * (-0.5 * ((x - 0.6) / 0.08f64).powi(2)).exp()
    })
}

pub fn wave_prior(mesh: &Mesh, alpha: f64, beta: f64) -> PriorModel {
    PriorModel::new(
        mesh,
        alpha,
        ThetaSpec::Isotropic { beta },
        DVector::from_element(mesh.num_nodes(), 1.0),
    )
    .unwrap()
}
