use nalgebra::DVector;
use proptest::prelude::*;
use tangential_hodge::LeafEmbedding;
use tangential_hodge::potential::Factor;
use tangential_hodge::spectral::{
    dense_eigenpairs, kernel_dimension, lowest_eigenvalues, shift_invert_lowest, symmetric_dense, KrylovOptions,
};
use tangential_hodge::{DeformationContext, KernelPolicy, LeafGrid, LeafPotential, LinearMap, TrigPotential};

/// Graph Laplacian of `blocks` disjoint cycles with edge weights `w`; its
/// kernel has dimension `blocks`.
fn cycles(blocks: usize, len: usize, w: &[f64]) -> LinearMap {
    let n = blocks * len;
    let mut t = Vec::new();
    for b in 0..blocks {
        for i in 0..len {
            let (a, c) = (b * len + i, b * len + (i + 1) % len);
            let x = w[(a * 7 + 3) % w.len()];
            t.extend([(a, a, x), (c, c, x), (a, c, -x), (c, a, -x)]);
        }
    }
    let m = DVector::from_element(n, 1.0);
    LinearMap::from_triplets(&t, m.clone(), m).unwrap()
}

fn permuted(op: &LinearMap, perm: &[usize]) -> LinearMap {
    let dense = op.to_dense();
    let n = perm.len();
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = dense[(perm[i], perm[j])];
            if v != 0.0 {
                t.push((i, j, v));
            }
        }
    }
    let m = DVector::from_element(n, 1.0);
    LinearMap::from_triplets(&t, m.clone(), m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_dimension_counts_components(blocks in 1usize..5, len in 3usize..9, w in prop::collection::vec(0.5f64..2.0, 5)) {
        let r = kernel_dimension(&cycles(blocks, len, &w), &KernelPolicy::default()).unwrap();
        prop_assert!(!r.ambiguous);
        prop_assert_eq!(r.kernel_dim, blocks);
    }

    #[test]
    fn kernel_dimension_is_scale_invariant(blocks in 1usize..4, len in 3usize..8, w in prop::collection::vec(0.5f64..2.0, 5), c in -6.0f64..6.0) {
        let op = cycles(blocks, len, &w);
        let policy = KernelPolicy::default();
        let a = kernel_dimension(&op, &policy).unwrap();
        let b = kernel_dimension(&op.scaled(10f64.powf(c)), &policy).unwrap();
        prop_assert_eq!(a.kernel_dim, b.kernel_dim);
        prop_assert!(!a.ambiguous && !b.ambiguous);
        prop_assert!(a.gap_ratio >= policy.gap_ratio && b.gap_ratio >= policy.gap_ratio);
    }

    #[test]
    fn kernel_dimension_is_permutation_invariant(blocks in 1usize..4, len in 3usize..8, w in prop::collection::vec(0.5f64..2.0, 5), shift in 1usize..50) {
        let op = cycles(blocks, len, &w);
        let n = blocks * len;
        let perm: Vec<usize> = (0..n).map(|i| (i * (2 * shift + 1) + shift) % n).collect();
        let mut sorted = perm.clone();
        sorted.sort();
        prop_assume!(sorted == (0..n).collect::<Vec<_>>());
        let policy = KernelPolicy::default();
        prop_assert_eq!(
            kernel_dimension(&op, &policy).unwrap().kernel_dim,
            kernel_dimension(&permuted(&op, &perm), &policy).unwrap().kernel_dim
        );
    }

    #[test]
    fn eigenvalues_sum_to_trace(n in 3usize..30, eps in 0.0f64..3.0) {
        let g = LeafGrid::circle(n).unwrap();
        let f = TrigPotential::periodic(1, 1, &[(1.0, &[Factor::Sin(1), Factor::Cos(0)])]).unwrap();
        let emb = LeafEmbedding::Product { transverse: vec![0.0] };
        let ctx = DeformationContext::new(&g, LeafPotential { potential: &f, embedding: &emb }, eps).unwrap();
        let lap = ctx.witten_laplacian(0).unwrap();
        let sym = symmetric_dense(&lap).unwrap();
        let trace = sym.trace();
        let sum: f64 = dense_eigenpairs(sym).values.iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-11 * trace.abs());
    }
}

#[test]
fn krylov_agrees_with_dense() {
    let g = LeafGrid::torus(20, 20).unwrap();
    let f = TrigPotential::periodic(2, 1, &[(0.7, &[Factor::Cos(1), Factor::Sin(1), Factor::Cos(0)])]).unwrap();
    let emb = LeafEmbedding::Product { transverse: vec![0.0] };
    let ctx = DeformationContext::new(&g, LeafPotential { potential: &f, embedding: &emb }, 1.5).unwrap();
    let lap = ctx.witten_laplacian(1).unwrap();
    let dense = lowest_eigenvalues(&lap, 8, &KernelPolicy::default()).unwrap();
    let krylov = shift_invert_lowest(&lap, 8, &KrylovOptions::default()).unwrap();
    let scale = lap.inf_norm();
    for (a, b) in dense.iter().zip(&krylov.values) {
        assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
    }
}
