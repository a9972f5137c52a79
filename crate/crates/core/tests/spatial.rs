use faer::Mat;
use proptest::prelude::*;
use spacetime_dd::linalg::{dense_cholesky, submatrix};
use spacetime_dd::spatial::NodeClass;
use spacetime_dd::{Error, Region, SpatialMesh};

#[test]
fn benchmark_mesh_has_interface_at_middle_node() {
    let m = SpatialMesh::new(512, 0.5).unwrap();
    assert_eq!(m.h(), 1.0 / 512.0);
    assert_eq!(m.interface_node(), 256);
    assert_eq!(m.classify(256), NodeClass::Interface);
    let free = m.free_nodes(Region::Whole);
    assert_eq!(free.iter().filter(|&&k| m.classify(k) == NodeClass::Interface).count(), 1);
}

#[test]
fn smallest_mesh_has_only_interface_dof() {
    let m = SpatialMesh::new(2, 0.5).unwrap();
    assert_eq!(m.free_nodes(Region::Whole), vec![1]);
    assert_eq!(m.classify(1), NodeClass::Interface);
    assert_eq!(m.free_nodes(Region::Sub1), vec![1]);
    assert_eq!(m.free_nodes(Region::Sub2), vec![1]);
    assert_eq!(m.classify(0), NodeClass::Boundary);
    assert_eq!(m.classify(2), NodeClass::Boundary);
}

#[test]
fn interface_off_grid_is_rejected() {
    assert!(matches!(SpatialMesh::new(4, 0.3), Err(Error::InterfaceNotOnGrid(_))));
    assert!(matches!(SpatialMesh::new(3, 0.5), Err(Error::InvalidParameter(_))));
    assert!(matches!(SpatialMesh::new(4, 1.0), Err(Error::InvalidParameter(_))));
    assert!(SpatialMesh::new(8, 0.25).is_ok());
}

#[test]
fn interior_entries_are_standard() {
    let m = SpatialMesh::new(16, 0.5).unwrap();
    let h = m.h();
    let s = m.assemble(Region::Whole);
    let k = s.stiffness.to_dense();
    let mm = s.mass.to_dense();
    assert!((k[(5, 5)] - 2.0 / h).abs() < 1e-12);
    assert!((k[(5, 6)] + 1.0 / h).abs() < 1e-12);
    assert!((mm[(5, 5)] - 4.0 * h / 6.0).abs() < 1e-15);
    assert!((mm[(5, 6)] - h / 6.0).abs() < 1e-15);
}

#[test]
fn subdomain_stiffness_by_hand() {
    let m = SpatialMesh::new(4, 0.5).unwrap();
    let s = m.assemble(Region::Sub1);
    assert_eq!(s.nodes, vec![1, 2]);
    let k = s.stiffness.to_dense();
    // Node 1 couples to both of its elements; the interface node only sees
    // the element inside subdomain 1.
    let h = 0.25;
    let expected = [[2.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((k[(i, j)] - expected[i][j]).abs() < 1e-12);
        }
    }
    let whole = m.assemble(Region::Whole).stiffness.to_dense();
    let s2 = m.assemble(Region::Sub2).stiffness.to_dense();
    let iface = m.interface_local(Region::Whole);
    assert!((k[(1, 1)] + s2[(0, 0)] - whole[(iface, iface)]).abs() < 1e-12);
}

#[test]
fn weighted_assembly_reduces_to_standard_matrices() {
    let m = SpatialMesh::new(8, 0.5).unwrap();
    let one = |_: f64| 1.0;
    let zero = |_: f64| 0.0;
    let (ka, kb, kc) = m.assemble_weighted(Region::Sub2, &one, &zero, &one);
    let s = m.assemble(Region::Sub2);
    assert!((ka.to_dense() - s.stiffness.to_dense()).norm_max() < 1e-12);
    assert!((kc.to_dense() - s.mass.to_dense()).norm_max() < 1e-15);
    assert_eq!(kb.to_dense().norm_max(), 0.0);
    // Constant advection integrates φ'_l φ_k: antisymmetric between interior
    // neighbours with the value 1/2.
    let (_, kb, _) = m.assemble_weighted(Region::Whole, &zero, &one, &zero);
    let b = kb.to_dense();
    assert!((b[(3, 4)] - 0.5).abs() < 1e-14);
    assert!((b[(4, 3)] + 0.5).abs() < 1e-14);
    assert!(b[(3, 3)].abs() < 1e-14);
}

#[test]
fn poincare_constant_of_unit_interval() {
    let m = SpatialMesh::new(8, 0.5).unwrap();
    assert!((m.poincare_constant() - 1.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn dof_partition_is_exact(half in 1usize..40, frac in 0.0f64..1.0) {
        let ne = 2 * half;
        let node = 1 + ((ne - 1) as f64 * frac) as usize;
        let node = node.min(ne - 1);
        let m = SpatialMesh::new(ne, node as f64 / ne as f64).unwrap();
        let whole = m.free_nodes(Region::Whole);
        let s1 = m.free_nodes(Region::Sub1);
        let s2 = m.free_nodes(Region::Sub2);
        let i1: Vec<_> = s1.iter().copied().filter(|&k| m.classify(k) == NodeClass::Interior1).collect();
        let i2: Vec<_> = s2.iter().copied().filter(|&k| m.classify(k) == NodeClass::Interior2).collect();
        prop_assert_eq!(i1.len() + i2.len() + 1, whole.len());
        prop_assert!(i1.iter().all(|k| !i2.contains(k)));
        prop_assert_eq!(s1[m.interface_local(Region::Sub1)], node);
        prop_assert_eq!(s2[m.interface_local(Region::Sub2)], node);
        prop_assert_eq!(whole[m.interface_local(Region::Whole)], node);
        prop_assert!(!whole.contains(&0) && !whole.contains(&ne));
    }

    #[test]
    fn matrices_are_spd_and_mass_dominant(half in 1usize..30) {
        let m = SpatialMesh::new(2 * half, 0.5).unwrap();
        for r in [Region::Whole, Region::Sub1, Region::Sub2] {
            let s = m.assemble(r);
            let k = s.stiffness.to_dense();
            let mm = s.mass.to_dense();
            prop_assert_eq!((&k - k.transpose()).norm_max(), 0.0);
            prop_assert_eq!((&mm - mm.transpose()).norm_max(), 0.0);
            prop_assert!(dense_cholesky(k.as_ref()).is_ok());
            for i in 0..mm.nrows() {
                let off: f64 = (0..mm.ncols()).filter(|&j| j != i).map(|j| mm[(i, j)].abs()).sum();
                prop_assert!(mm[(i, i)] > off);
            }
        }
    }

    #[test]
    fn interior_rows_of_extended_stiffness_sum_to_zero(half in 2usize..30) {
        // Assemble on all nodes including the boundary ones, then check rows
        // of nodes whose support lies inside the region.
        let ne = 2 * half;
        let h = 1.0 / ne as f64;
        let mut k = Mat::<f64>::zeros(ne + 1, ne + 1);
        for e in 0..ne {
            k[(e, e)] += 1.0 / h;
            k[(e + 1, e + 1)] += 1.0 / h;
            k[(e, e + 1)] -= 1.0 / h;
            k[(e + 1, e)] -= 1.0 / h;
        }
        let m = SpatialMesh::new(ne, 0.5).unwrap();
        let whole = m.assemble(Region::Whole).stiffness.to_dense();
        for i in 1..ne {
            let row: f64 = (0..=ne).map(|j| k[(i, j)]).sum();
            prop_assert!(row.abs() < 1e-9);
            for j in 1..ne {
                prop_assert_eq!(whole[(i - 1, j - 1)], k[(i, j)]);
            }
        }
    }

    #[test]
    fn interface_extension_then_restriction_is_identity(half in 1usize..30, v in -10.0f64..10.0) {
        let m = SpatialMesh::new(2 * half, 0.5).unwrap();
        for r in [Region::Sub1, Region::Sub2, Region::Whole] {
            let n = m.free_nodes(r).len();
            let g = m.interface_local(r);
            let mut ext = vec![0.0; n];
            ext[g] = v;
            prop_assert_eq!(ext[g], v);
            prop_assert_eq!(ext.iter().filter(|&&x| x != 0.0).count(), usize::from(v != 0.0));
        }
    }
}

#[test]
fn subdomain_blocks_are_restrictions_of_whole() {
    let m = SpatialMesh::new(10, 0.5).unwrap();
    let whole = m.assemble(Region::Whole);
    let s1 = m.assemble(Region::Sub1);
    let first: Vec<usize> = (0..s1.nodes.len() - 1).collect();
    let a = submatrix(&whole.stiffness, &first, &first).to_dense();
    let b = submatrix(&s1.stiffness, &first, &first).to_dense();
    assert!((a - b).norm_max() < 1e-12);
}
