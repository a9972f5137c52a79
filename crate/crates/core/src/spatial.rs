//! Uniform piecewise linear elements on `(0, 1)` split at one interface node.
//!
//! Node `k` sits at `x = k h`. Nodes `0` and `num_elements` are Dirichlet
//! boundary nodes and carry no unknowns. Subdomain 1 owns elements left of
//! the interface node, subdomain 2 those to the right; both subdomains keep
//! the interface node among their free nodes.

use faer::sparse::Triplet;

use crate::error::{Error, Result};
use crate::linalg::{from_triplets, Sparse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Whole,
    Sub1,
    Sub2,
}

impl Region {
    pub fn subdomain(i: usize) -> Self {
        match i {
            1 => Region::Sub1,
            2 => Region::Sub2,
            _ => panic!("subdomain index must be 1 or 2, got {i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Boundary,
    Interior1,
    Interior2,
    Interface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    num_elements: usize,
    interface_node: usize,
}

/// Spatial matrices over the free nodes of a region, rows indexed by the test
/// function.
#[derive(Debug, Clone)]
pub struct SpatialMatrices {
    pub region: Region,
    /// Global node ids of the free nodes, ascending.
    pub nodes: Vec<usize>,
    /// `∫ φ_l' φ_k'`.
    pub stiffness: Sparse,
    /// `∫ φ_l φ_k`.
    pub mass: Sparse,
}

impl SpatialMesh {
    pub fn new(num_elements: usize, interface_pos: f64) -> Result<Self> {
        if num_elements < 2 || !num_elements.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "num_elements must be even and at least 2, got {num_elements}"
            )));
        }
        if !(interface_pos > 0.0 && interface_pos < 1.0) {
            return Err(Error::InvalidParameter(format!("interface position must lie in (0, 1), got {interface_pos}")));
        }
        let scaled = interface_pos * num_elements as f64;
        let node = scaled.round();
        if (scaled - node).abs() > 1e-9 * num_elements as f64 {
            return Err(Error::InterfaceNotOnGrid(interface_pos));
        }
        Ok(Self { num_elements, interface_node: node as usize })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn h(&self) -> f64 {
        1.0 / self.num_elements as f64
    }

    pub fn interface_node(&self) -> usize {
        self.interface_node
    }

    pub fn interface_pos(&self) -> f64 {
        self.interface_node as f64 * self.h()
    }

    pub fn node_x(&self, k: usize) -> f64 {
        k as f64 * self.h()
    }

    pub fn classify(&self, k: usize) -> NodeClass {
        let m = self.interface_node;
        if k == 0 || k >= self.num_elements {
            NodeClass::Boundary
        } else if k < m {
            NodeClass::Interior1
        } else if k > m {
            NodeClass::Interior2
        } else {
            NodeClass::Interface
        }
    }

    /// Free nodes of a region, ascending.
    pub fn free_nodes(&self, region: Region) -> Vec<usize> {
        let m = self.interface_node;
        let ne = self.num_elements;
        match region {
            Region::Whole => (1..ne).collect(),
            Region::Sub1 => (1..=m).collect(),
            Region::Sub2 => (m..ne).collect(),
        }
    }

    /// Elements of a region; element `e` spans nodes `e` and `e + 1`.
    pub fn elements(&self, region: Region) -> std::ops::Range<usize> {
        let m = self.interface_node;
        match region {
            Region::Whole => 0..self.num_elements,
            Region::Sub1 => 0..m,
            Region::Sub2 => m..self.num_elements,
        }
    }

    /// Position of the interface node within `free_nodes(region)`.
    pub fn interface_local(&self, region: Region) -> usize {
        match region {
            Region::Whole | Region::Sub1 => self.interface_node - 1,
            Region::Sub2 => 0,
        }
    }

    /// Map from global node id to local free index (`None` for nodes outside
    /// the region or on the boundary).
    pub fn local_map(&self, region: Region) -> Vec<Option<usize>> {
        let mut map = vec![None; self.num_elements + 1];
        for (i, k) in self.free_nodes(region).into_iter().enumerate() {
            map[k] = Some(i);
        }
        map
    }

    /// Left endpoint and length of a region.
    pub fn extent(&self, region: Region) -> (f64, f64) {
        let g = self.interface_pos();
        match region {
            Region::Whole => (0.0, 1.0),
            Region::Sub1 => (0.0, g),
            Region::Sub2 => (g, 1.0 - g),
        }
    }

    /// Sharp Poincaré constant `(L/π)²` of the largest of the three intervals.
    pub fn poincare_constant(&self) -> f64 {
        let l = [Region::Whole, Region::Sub1, Region::Sub2].iter().map(|&r| self.extent(r).1).fold(0.0_f64, f64::max);
        (l / std::f64::consts::PI).powi(2)
    }

    pub fn assemble(&self, region: Region) -> SpatialMatrices {
        let h = self.h();
        let map = self.local_map(region);
        let nodes = self.free_nodes(region);
        let n = nodes.len();
        let mut ks = Vec::new();
        let mut ms = Vec::new();
        let ke = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
        let me = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        for e in self.elements(region) {
            let loc = [map[e], map[e + 1]];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (loc[a], loc[b]) {
                        ks.push(Triplet::new(i, j, ke[a][b]));
                        ms.push(Triplet::new(i, j, me[a][b]));
                    }
                }
            }
        }
        SpatialMatrices { region, nodes, stiffness: from_triplets(n, n, &ks), mass: from_triplets(n, n, &ms) }
    }

    /// Coefficient-weighted matrices `(∫ a φ_l' φ_k', ∫ b φ_l' φ_k, ∫ c φ_l φ_k)`
    /// with three-point Gauss–Legendre per element; rows index the test node.
    pub fn assemble_weighted(
        &self,
        region: Region,
        a: &dyn Fn(f64) -> f64,
        b: &dyn Fn(f64) -> f64,
        c: &dyn Fn(f64) -> f64,
    ) -> (Sparse, Sparse, Sparse) {
        let h = self.h();
        let map = self.local_map(region);
        let n = self.free_nodes(region).len();
        let (gx, gw) = gauss3();
        let mut ka = Vec::new();
        let mut kb = Vec::new();
        let mut kc = Vec::new();
        for e in self.elements(region) {
            let loc = [map[e], map[e + 1]];
            let x0 = self.node_x(e);
            let mut ea = [[0.0; 2]; 2];
            let mut eb = [[0.0; 2]; 2];
            let mut ec = [[0.0; 2]; 2];
            for q in 0..3 {
                let s = gx[q];
                let x = x0 + s * h;
                let w = gw[q] * h;
                let phi = [1.0 - s, s];
                let dphi = [-1.0 / h, 1.0 / h];
                let (av, bv, cv) = (a(x), b(x), c(x));
                for i in 0..2 {
                    for j in 0..2 {
                        ea[i][j] += w * av * dphi[j] * dphi[i];
                        eb[i][j] += w * bv * dphi[j] * phi[i];
                        ec[i][j] += w * cv * phi[j] * phi[i];
                    }
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    if let (Some(r), Some(col)) = (loc[i], loc[j]) {
                        ka.push(Triplet::new(r, col, ea[i][j]));
                        kb.push(Triplet::new(r, col, eb[i][j]));
                        kc.push(Triplet::new(r, col, ec[i][j]));
                    }
                }
            }
        }
        (from_triplets(n, n, &ka), from_triplets(n, n, &kb), from_triplets(n, n, &kc))
    }
}

/// Three-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss3() -> ([f64; 3], [f64; 3]) {
    let r = (0.6_f64).sqrt() / 2.0;
    ([0.5 - r, 0.5, 0.5 + r], [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
}
