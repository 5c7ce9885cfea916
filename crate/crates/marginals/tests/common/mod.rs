//! Shared helpers for the integration suites.

#![allow(dead_code)]

use marginals::assignment::AxisAssignment;
use marginals::graph::ChainGraph;
use marginals::oracle::exact::SquareFixture;
use marginals::tensor::Factor;
use marginals::grid::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All nonempty vertex subsets of the assignment hypercube as graphs.
pub fn all_vertex_subsets(dim: usize) -> impl Iterator<Item = ChainGraph> {
    let total = 1u32 << dim;
    (1u32..(1u32 << total)).map(move |mask| {
        let vertices = (0..total)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| AxisAssignment::new(dim, b).unwrap());
        ChainGraph::new(dim, vertices).unwrap()
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn apply_symmetry(bits: u32, dim: usize, perm: &[usize], flips: u32) -> u32 {
    let mut out = 0u32;
    for i in 0..dim {
        if bits >> perm[i] & 1 == 1 {
            out |= 1 << i;
        }
    }
    out ^ flips
}

/// Vertex-set canonical form under axis permutations and per-axis
/// conjugation swaps.
fn canonical_mask(mask: u32, dim: usize, perms: &[Vec<usize>]) -> u32 {
    let total = 1u32 << dim;
    let mut best = u32::MAX;
    for perm in perms {
        for flips in 0..total {
            let mut image = 0u32;
            for b in 0..total {
                if mask >> b & 1 == 1 {
                    image |= 1 << apply_symmetry(b, dim, perm, flips);
                }
            }
            best = best.min(image);
        }
    }
    best
}

/// Connected proper vertex sets with `dim` axes, one representative per
/// symmetry class, canonical order.
pub fn connected_proper_trees_up_to_symmetry(dim: usize) -> Vec<ChainGraph> {
    let total = 1u32 << dim;
    let perms = permutations(dim);
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << total) {
        if mask.count_ones() as usize > dim + 1 {
            continue;
        }
        let vertices: Vec<AxisAssignment> = (0..total)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| AxisAssignment::new(dim, b).unwrap())
            .collect();
        let g = ChainGraph::new(dim, vertices).unwrap();
        if !(g.is_proper() && g.is_connected()) {
            continue;
        }
        if canonical_mask(mask, dim, &perms) == mask {
            out.push(g);
        }
    }
    out
}

/// A factor over the full phase space with entries uniform in [lo, hi].
pub fn random_bounded_factor(grid: &GridSpec, lo: f64, hi: f64, seed: u64) -> Factor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = grid.phase_vars();
    let shape = grid.phase_shape();
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.gen_range(lo..=hi)).collect();
    Factor::new(vars, shape, data).unwrap()
}

/// The persisted square-search result.
pub fn square_fixture() -> SquareFixture {
    serde_json::from_str(include_str!("../fixtures/square_counterexample.json"))
        .expect("valid fixture")
}
