//! Uniform square meshes of the unit square and Q1 functions on them.
//!
//! Nodes are numbered row-major with `x` varying fastest: node `(i, j)` sits
//! at `(i/n, j/n)` and has id `j·(n+1) + i`. Element `(i, j)` lists its
//! corners counter-clockwise from the lower-left one.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    n: usize,
    boundary: Vec<bool>,
    /// interior position of each node, `usize::MAX` on the boundary
    interior_slot: Vec<usize>,
    interior: Vec<usize>,
}

impl Mesh2D {
    /// Mesh with `n` cells per side.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::MeshTooSmall(n));
        }
        let side = n + 1;
        let mut boundary = Vec::with_capacity(side * side);
        let mut interior_slot = Vec::with_capacity(side * side);
        let mut interior = Vec::with_capacity((n - 1) * (n - 1));
        for j in 0..side {
            for i in 0..side {
                let on_edge = i == 0 || j == 0 || i == n || j == n;
                boundary.push(on_edge);
                if on_edge {
                    interior_slot.push(usize::MAX);
                } else {
                    interior_slot.push(interior.len());
                    interior.push(j * side + i);
                }
            }
        }
        Ok(Self {
            n,
            boundary,
            interior_slot,
            interior,
        })
    }

    /// Cells per side.
    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    /// Mesh spacing `1/n`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.n * self.n
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn node_id(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let side = self.n + 1;
        let h = self.spacing();
        ((node % side) as f64 * h, (node / side) as f64 * h)
    }

    /// Corner node ids of element `e`, counter-clockwise from lower-left.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = (e % self.n, e / self.n);
        [
            self.node_id(i, j),
            self.node_id(i + 1, j),
            self.node_id(i + 1, j + 1),
            self.node_id(i, j + 1),
        ]
    }

    /// Lower-left corner of element `e`.
    pub fn element_origin(&self, e: usize) -> (f64, f64) {
        let h = self.spacing();
        ((e % self.n) as f64 * h, (e / self.n) as f64 * h)
    }

    pub fn element_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    /// Node ids of the free (interior) nodes, in increasing order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    /// Position of `node` among the interior unknowns.
    pub fn interior_slot(&self, node: usize) -> Option<usize> {
        let s = self.interior_slot[node];
        (s != usize::MAX).then_some(s)
    }

    /// Containing cell and local coordinates in `[0,1]²`. Points on a shared
    /// edge go to the lower-index cell, except at `x = 1` / `y = 1`.
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, f64, f64)> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutsideDomain { x, y });
        }
        let n = self.n as f64;
        let ci = ((x * n).floor() as usize).min(self.n - 1);
        let cj = ((y * n).floor() as usize).min(self.n - 1);
        let xi = x * n - ci as f64;
        let eta = y * n - cj as f64;
        Ok((cj * self.n + ci, xi, eta))
    }
}

/// Builds a mesh with `n` cells per side.
pub fn build_mesh(n: usize) -> Result<Mesh2D> {
    Mesh2D::new(n)
}

/// A coarse mesh and a fine mesh whose Q1 space contains the coarse one.
#[derive(Debug, Clone, PartialEq)]
pub struct Nesting {
    pub coarse: Mesh2D,
    pub fine: Mesh2D,
    ratio: usize,
}

impl Nesting {
    pub fn new(coarse_n: usize, fine_n: usize) -> Result<Self> {
        if coarse_n == 0 || !fine_n.is_multiple_of(coarse_n) || fine_n / coarse_n < 2 {
            return Err(Error::NotNested {
                coarse: coarse_n,
                fine: fine_n,
            });
        }
        Ok(Self {
            coarse: Mesh2D::new(coarse_n)?,
            fine: Mesh2D::new(fine_n)?,
            ratio: fine_n / coarse_n,
        })
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    /// Fine-mesh nodal values of a coarse Q1 function.
    pub fn prolongate(&self, coarse: &FeFunction) -> Result<FeFunction> {
        coarse.check_mesh(&self.coarse)?;
        let values = (0..self.fine.num_nodes())
            .map(|node| {
                let (x, y) = self.fine.node_coords(node);
                evaluate_fe(&self.coarse, coarse, x, y)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeFunction {
            cells: self.fine.cells_per_side(),
            values,
        })
    }
}

pub fn make_nesting(coarse_n: usize, fine_n: usize) -> Result<Nesting> {
    Nesting::new(coarse_n, fine_n)
}

pub fn prolongate(nest: &Nesting, coarse: &FeFunction) -> Result<FeFunction> {
    nest.prolongate(coarse)
}

/// Nodal coefficients of a Q1 function over the full node set of one mesh.
///
/// Solutions produced by the time steppers always have zero boundary entries;
/// [`FeFunction::from_nodal`] accepts arbitrary data for evaluation and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    cells: usize,
    values: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(mesh: &Mesh2D) -> Self {
        Self {
            cells: mesh.cells_per_side(),
            values: vec![0.0; mesh.num_nodes()],
        }
    }

    pub fn from_nodal(mesh: &Mesh2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_nodes(),
                found: values.len(),
            });
        }
        Ok(Self {
            cells: mesh.cells_per_side(),
            values,
        })
    }

    /// Scatters interior unknowns into a full nodal vector with zero boundary.
    pub fn from_interior(mesh: &Mesh2D, interior: &[f64]) -> Result<Self> {
        if interior.len() != mesh.num_interior() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_interior(),
                found: interior.len(),
            });
        }
        let mut values = vec![0.0; mesh.num_nodes()];
        for (&node, &v) in mesh.interior_nodes().iter().zip(interior) {
            values[node] = v;
        }
        Ok(Self {
            cells: mesh.cells_per_side(),
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn sample(mesh: &Mesh2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..mesh.num_nodes())
            .map(|node| {
                let (x, y) = mesh.node_coords(node);
                f(x, y)
            })
            .collect();
        Self {
            cells: mesh.cells_per_side(),
            values,
        }
    }

    /// Nodal interpolant of `f` with the boundary entries pinned to zero.
    pub fn interpolate(mesh: &Mesh2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::sample(mesh, f);
        for (v, &b) in out.values.iter_mut().zip(mesh.boundary_mask()) {
            if b {
                *v = 0.0;
            }
        }
        out
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    pub fn interior_values(&self, mesh: &Mesh2D) -> Vec<f64> {
        mesh.interior_nodes()
            .iter()
            .map(|&n| self.values[n])
            .collect()
    }

    pub fn has_zero_boundary(&self, mesh: &Mesh2D) -> bool {
        self.values
            .iter()
            .zip(mesh.boundary_mask())
            .all(|(&v, &b)| !b || v == 0.0)
    }

    pub fn check_mesh(&self, mesh: &Mesh2D) -> Result<()> {
        if self.cells != mesh.cells_per_side() || self.values.len() != mesh.num_nodes() {
            return Err(Error::MeshMismatch {
                expected: mesh.cells_per_side(),
                found: self.cells,
            });
        }
        Ok(())
    }
}

/// Bilinear shape functions on the reference square, corner order matching
/// [`Mesh2D::element_nodes`].
#[inline]
pub fn shape_values(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

/// Gradients of [`shape_values`] with respect to `(ξ, η)`.
#[inline]
pub fn shape_gradients(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ]
}

/// Value of a Q1 function at `(x, y)`.
pub fn evaluate_fe(mesh: &Mesh2D, f: &FeFunction, x: f64, y: f64) -> Result<f64> {
    f.check_mesh(mesh)?;
    let (e, xi, eta) = mesh.locate(x, y)?;
    let nodes = mesh.element_nodes(e);
    let phi = shape_values(xi, eta);
    Ok(nodes.iter().zip(phi).map(|(&n, p)| f.values[n] * p).sum())
}
