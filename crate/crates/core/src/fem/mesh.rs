//! Uniform tensor-product meshes on intervals and rectangles with
//! (bi)linear Lagrange elements.
//!
//! Nodes are numbered lexicographically with the x index running fastest,
//! so node `(i, j)` of a 2D mesh has index `j * (nx + 1) + i`. Quad
//! connectivity is counter-clockwise starting at the lower-left corner.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    counts: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    node_coords: Vec<Vec<f64>>,
    elements: Vec<Vec<usize>>,
}

/// Basis functions that are nonzero at a point, paired with their values.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

impl BasisEval {
    /// Scatters the evaluation into a dense nodal vector of length `n`.
    pub fn to_dense(&self, n: usize) -> nalgebra::DVector<f64> {
        let mut out = nalgebra::DVector::zeros(n);
        for (&node, &val) in self.nodes.iter().zip(&self.values) {
            out[node] += val;
        }
        out
    }

    /// `Φ(x)ᵀ v`
    pub fn dot(&self, v: &nalgebra::DVector<f64>) -> f64 {
        self.nodes.iter().zip(&self.values).map(|(&j, &w)| w * v[j]).sum()
    }
}

impl Mesh {
    /// Builds a uniform mesh with `counts[d]` elements along axis `d` of the
    /// box `[lower, upper]`.
    pub fn uniform(counts: &[usize], lower: &[f64], upper: &[f64]) -> Result<Self> {
        let dim = counts.len();
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "mesh dimension must be 1 or 2, got {dim}"
            )));
        }
        if lower.len() != dim || upper.len() != dim {
            return Err(Error::InvalidArgument(
                "box bounds must match the mesh dimension".into(),
            ));
        }
        if let Some(axis) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(format!(
                "element count along axis {axis} must be at least 1"
            )));
        }
        for d in 0..dim {
            if !(lower[d].is_finite() && upper[d].is_finite() && upper[d] > lower[d]) {
                return Err(Error::InvalidArgument(format!(
                    "degenerate or inverted box along axis {d}: [{}, {}]",
                    lower[d], upper[d]
                )));
            }
        }

        let coord = |d: usize, i: usize| {
            // exact endpoints so that boundary detection is robust
            if i == counts[d] {
                upper[d]
            } else {
                lower[d] + (upper[d] - lower[d]) * i as f64 / counts[d] as f64
            }
        };

        let (node_coords, elements) = if dim == 1 {
            let nx = counts[0];
            let nodes = (0..=nx).map(|i| vec![coord(0, i)]).collect();
            let elems = (0..nx).map(|e| vec![e, e + 1]).collect();
            (nodes, elems)
        } else {
            let (nx, ny) = (counts[0], counts[1]);
            let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes.push(vec![coord(0, i), coord(1, j)]);
                }
            }
            let stride = nx + 1;
            let mut elems = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let ll = j * stride + i;
                    elems.push(vec![ll, ll + 1, ll + 1 + stride, ll + stride]);
                }
            }
            (nodes, elems)
        };

        Ok(Self {
            dim,
            counts: counts.to_vec(),
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            node_coords,
            elements,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn num_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.node_coords[i]
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.node_coords
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    /// Element widths along each axis.
    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|d| (self.upper[d] - self.lower[d]) / self.counts[d] as f64)
            .collect()
    }

    /// Lebesgue measure of the domain box.
    pub fn domain_measure(&self) -> f64 {
        (0..self.dim).map(|d| self.upper[d] - self.lower[d]).product()
    }

    pub fn element_measure(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|d| 0.5 * (self.lower[d] + self.upper[d]))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && (0..self.dim).all(|d| {
                let tol = 1e-12 * (self.upper[d] - self.lower[d]);
                x[d] >= self.lower[d] - tol && x[d] <= self.upper[d] + tol
            })
    }

    /// Whether node `i` lies on the boundary of the box.
    pub fn is_boundary_node(&self, i: usize) -> bool {
        let stride = self.counts[0] + 1;
        let ix = i % stride;
        if ix == 0 || ix == self.counts[0] {
            return true;
        }
        if self.dim == 2 {
            let iy = i / stride;
            return iy == 0 || iy == self.counts[1];
        }
        false
    }

    /// Locates the element containing `x` and its reference coordinates in
    /// `[0, 1]^dim`.
    fn locate(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        let h = self.spacing();
        let mut idx = Vec::with_capacity(self.dim);
        let mut local = Vec::with_capacity(self.dim);
        for d in 0..self.dim {
            let s = ((x[d] - self.lower[d]) / h[d]).clamp(0.0, self.counts[d] as f64);
            let cell = (s.floor() as usize).min(self.counts[d] - 1);
            idx.push(cell);
            local.push((s - cell as f64).clamp(0.0, 1.0));
        }
        let elem = if self.dim == 1 {
            idx[0]
        } else {
            idx[1] * self.counts[0] + idx[0]
        };
        Ok((elem, local))
    }

    /// Evaluates all basis functions at `x`, returning only the nonzero
    /// ones (the vector `Φ(x)` in sparse form).
    pub fn eval_basis(&self, x: &[f64]) -> Result<BasisEval> {
        let (elem, local) = self.locate(x)?;
        let nodes = self.elements[elem].clone();
        let values = if self.dim == 1 {
            let s = local[0];
            vec![1.0 - s, s]
        } else {
            let (s, t) = (local[0], local[1]);
            vec![
                (1.0 - s) * (1.0 - t),
                s * (1.0 - t),
                s * t,
                (1.0 - s) * t,
            ]
        };
        Ok(BasisEval { nodes, values })
    }

    /// Linear interpolant of nodal values at `x`.
    pub fn interpolate(&self, values: &nalgebra::DVector<f64>, x: &[f64]) -> Result<f64> {
        crate::error::check_dim(self.num_nodes(), values.len())?;
        Ok(self.eval_basis(x)?.dot(values))
    }

    /// Index of the node closest to `x` (Euclidean distance).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let dist2 = |p: &[f64]| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        (0..self.num_nodes())
            .min_by(|&a, &b| dist2(self.node(a)).total_cmp(&dist2(self.node(b))))
            .unwrap_or(0)
    }
}
