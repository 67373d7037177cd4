//! Piecewise-linear finite element matrices on a triangular mesh.

use super::mesh::Mesh;
use super::sparse::CscMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpdeOperator {
    /// Lumped (diagonal) mass matrix entries.
    pub mass: Vec<f64>,
    pub stiffness: CscMatrix,
}

impl SpdeOperator {
    pub fn assemble(mesh: &Mesh) -> Result<Self> {
        let n = mesh.node_count();
        let mut mass = vec![0.0; n];
        let mut t = Vec::with_capacity(9 * mesh.triangles.len());
        for (k, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.triangle_area(k);
            if area <= 0.0 {
                return Err(Error::Mesh(format!("degenerate triangle {k}")));
            }
            let p = tri.map(|i| mesh.nodes[i]);
            // Edge opposite vertex i.
            let e: [(f64, f64); 3] = std::array::from_fn(|i| {
                let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                (b.east - a.east, b.north - a.north)
            });
            for i in 0..3 {
                mass[tri[i]] += area / 3.0;
                for j in 0..3 {
                    let g = (e[i].0 * e[j].0 + e[i].1 * e[j].1) / (4.0 * area);
                    t.push((tri[i], tri[j], g));
                }
            }
        }
        if let Some(i) = mass.iter().position(|&c| c <= 0.0) {
            return Err(Error::Mesh(format!("node {i} belongs to no triangle")));
        }
        Ok(Self {
            mass,
            stiffness: CscMatrix::from_triplets(n, n, &t),
        })
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn mass_matrix(&self) -> CscMatrix {
        CscMatrix::diagonal(&self.mass)
    }

    /// `G C⁻¹ G`.
    pub fn g_cinv_g(&self) -> CscMatrix {
        let inv: Vec<f64> = self.mass.iter().map(|c| 1.0 / c).collect();
        self.stiffness
            .matmul(&CscMatrix::diagonal(&inv))
            .matmul(&self.stiffness)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stgp::projection::PlanarPoint;

    #[test]
    fn stiffness_symmetric_with_zero_row_sums() {
        let m = Mesh::regular(PlanarPoint::new(0.0, 0.0), 5, 4, 2.0);
        let op = SpdeOperator::assemble(&m).unwrap();
        assert!(op.stiffness.is_symmetric(1e-12));
        let ones = vec![1.0; op.n()];
        assert!(op.stiffness.mul_vec(&ones).iter().all(|r| r.abs() < 1e-9));
        assert!(op.mass.iter().all(|&c| c > 0.0));
        let total: f64 = op.mass.iter().sum();
        assert!((total - 10.0 * 8.0).abs() < 1e-9);
    }

    #[test]
    fn stiffness_reproduces_dirichlet_energy_of_linear_field() {
        // For u = x the energy u'Gu equals the domain area.
        let m = Mesh::regular(PlanarPoint::new(0.0, 0.0), 3, 3, 1.5);
        let op = SpdeOperator::assemble(&m).unwrap();
        let u: Vec<f64> = m.nodes.iter().map(|p| p.east).collect();
        assert!((op.stiffness.quad_form(&u) - 4.5 * 4.5).abs() < 1e-9);
    }
}
