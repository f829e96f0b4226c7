use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::maps::MapDescriptor;

/// How the unit interval is cut into cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mesh {
    /// Uniform cells for Lebesgue-preserving maps, graded cells otherwise.
    #[default]
    Auto,
    Uniform,
    /// Half the cells uniform, half on the ladder of left-branch preimages
    /// of `1/2` accumulating at the neutral fixed point.
    Graded,
}

/// Sorted cell edges `0 = e_0 < e_1 < ... < e_N = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    edges: Vec<f64>,
    uniform: bool,
}

impl Partition {
    pub fn uniform(cells: usize) -> Self {
        let edges = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        Self {
            edges,
            uniform: true,
        }
    }

    /// Uniform cells merged with the preimage ladder `z_0 = 1/2`,
    /// `z_{k+1} = f_L^{-1}(z_k)`. The ladder cells are mapped exactly onto
    /// each other, which resolves the slow escape from the fixed point.
    pub fn graded(desc: &MapDescriptor, cells: usize) -> Result<Self> {
        let base = desc.base_map();
        if base.gamma() == 0.0 {
            return Ok(Self::uniform(cells));
        }
        let uniform_cells = cells / 2;
        let mut edges: Vec<f64> = (0..=uniform_cells)
            .map(|i| i as f64 / uniform_cells as f64)
            .collect();
        let mut z = 0.5;
        let mut added = 0;
        while added < cells - uniform_cells {
            z = base.base_preimage(z, 0);
            if z <= 0.0 {
                return domain("preimage ladder reached 0 before filling the mesh");
            }
            edges.push(z);
            added += 1;
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-300);
        Ok(Self {
            edges,
            uniform: false,
        })
    }

    pub fn for_map(desc: &MapDescriptor, cells: usize, mesh: Mesh) -> Result<Self> {
        if cells < 2 {
            return domain(format!("grid needs at least 2 cells, got {cells}"));
        }
        match mesh {
            Mesh::Uniform => Ok(Self::uniform(cells)),
            Mesh::Graded => Self::graded(desc, cells),
            Mesh::Auto if desc.preserves_lebesgue() => Ok(Self::uniform(cells)),
            Mesh::Auto => Self::graded(desc, cells),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    #[inline]
    pub fn left(&self, i: usize) -> f64 {
        self.edges[i]
    }

    #[inline]
    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// Index of the cell containing `x`, clamped into range.
    #[inline]
    pub fn locate(&self, x: f64) -> usize {
        let n = self.len();
        if self.uniform {
            return ((x * n as f64) as usize).min(n - 1);
        }
        self.edges
            .partition_point(|&e| e <= x)
            .saturating_sub(1)
            .min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_locate() {
        let p = Partition::uniform(4);
        assert_eq!(p.locate(0.0), 0);
        assert_eq!(p.locate(0.25), 1);
        assert_eq!(p.locate(0.999), 3);
        assert_eq!(p.width(2), 0.25);
    }

    #[test]
    fn graded_ladder_shape() {
        let desc = MapDescriptor::lsv(0.25).unwrap();
        let p = Partition::graded(&desc, 1024).unwrap();
        assert!(p.len() > 1000 && p.len() <= 1024);
        assert!(p.left(1) < 1e-8, "{}", p.left(1));
        for i in 0..p.len() {
            assert!(p.width(i) > 0.0);
            let x = p.left(i) + 0.3 * p.width(i);
            assert_eq!(p.locate(x), i);
        }
    }

    #[test]
    fn gamma_zero_graded_is_uniform() {
        let p = Partition::graded(&MapDescriptor::lsv(0.0).unwrap(), 64).unwrap();
        assert!(p.is_uniform());
        assert!(Partition::for_map(&MapDescriptor::doubling(), 1, Mesh::Auto).is_err());
    }
}
