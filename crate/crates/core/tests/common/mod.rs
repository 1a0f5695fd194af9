//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use orgevo_core::tree::{Node, OrganizationTree};
use orgevo_core::{encode, Genome, Level};

/// Contracts every edge from a node to its only child when that child is
/// itself internal, then re-levels the forest.
pub fn splice_chains(tree: &OrganizationTree) -> OrganizationTree {
    fn splice(mut node: Node) -> Node {
        while node.children.len() == 1 && !node.children[0].is_leaf() {
            let only = node.children.pop().unwrap();
            node.children = only.children;
        }
        node.children = node.children.into_iter().map(splice).collect();
        if node.level > 1 {
            node.role = if node.is_leaf() {
                orgevo_core::Role::Database
            } else {
                orgevo_core::Role::Aggregator
            };
        }
        node
    }
    let roots: Vec<Node> = tree.roots.iter().cloned().map(splice).collect();
    OrganizationTree::try_from(roots).expect("splicing keeps a well-formed forest")
}

/// Tree-side simplification: decode, splice, encode.
pub fn simplify_via_tree(g: &Genome) -> Genome {
    encode(&splice_chains(&orgevo_core::decode(g)), g.max_depth()).unwrap()
}

/// Every genome with the given shape, by plain counting in base `M`.
pub fn all_genomes(leaf_count: usize, max_depth: Level) -> Vec<Genome> {
    let len = leaf_count - 1;
    let total = (max_depth as usize).pow(len as u32);
    (0..total)
        .map(|mut code| {
            let mut digits = vec![0u32; len];
            for slot in digits.iter_mut().rev() {
                *slot = (code % max_depth as usize) as u32 + 1;
                code /= max_depth as usize;
            }
            Genome::validate(&digits, max_depth).unwrap()
        })
        .collect()
}

/// Every internal node has at least two children (lone mediators excepted).
pub fn no_single_child_nodes(tree: &OrganizationTree) -> bool {
    let mut ok = true;
    tree.for_each_node(|n| {
        if n.children.len() == 1 {
            ok = false;
        }
    });
    ok
}

/// Exact two-sided Wilcoxon p-value by walking all sign vectors.
pub fn wilcoxon_brute_force(x: &[f64], y: &[f64]) -> f64 {
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return 1.0;
    }
    let n = diffs.len();
    // average ranks by counting, O(n^2)
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = mags
        .iter()
        .map(|m| {
            let below = mags.iter().filter(|o| *o < m).count() as f64;
            let equal = mags.iter().filter(|o| *o == m).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let pos: f64 = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| ranks[i]).sum();
    let observed = pos.min(total - pos);
    let mut hits = 0u64;
    for mask in 0u64..(1u64 << n) {
        let s: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s <= observed + 1e-9 {
            hits += 1;
        }
    }
    (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
}
