use std::collections::BTreeSet;

use super::*;
use crate::citest::{CiSource, DSepSource, ORACLE_DEP};
use crate::graphlib::{skeleton_of, Dag};

/// Scripted source: dependence looked up from a table keyed by the pair and
/// conditioning set, with a default.
struct Scripted {
    table: std::collections::BTreeMap<((usize, usize), Vec<usize>), f64>,
    default: f64,
}

impl Scripted {
    fn new(default: f64) -> Self {
        Scripted {
            table: Default::default(),
            default,
        }
    }

    fn put(&mut self, i: usize, j: usize, cond: &[usize], dep: f64) {
        let mut cond = cond.to_vec();
        cond.sort_unstable();
        self.table.insert(((i.min(j), i.max(j)), cond), dep);
    }
}

impl CiSource for Scripted {
    fn dep(&self, i: usize, j: usize, cond: &[usize]) -> f64 {
        let mut cond = cond.to_vec();
        cond.sort_unstable();
        self.table
            .get(&((i.min(j), i.max(j)), cond))
            .copied()
            .unwrap_or(self.default)
    }

    fn p_value(&self, i: usize, j: usize, cond: &[usize]) -> f64 {
        if self.dep(i, j, cond) > 0.0 {
            0.0
        } else {
            1.0
        }
    }
}

#[test]
fn embed_of_empty_set_is_zero() {
    let basis = EmbeddingBasis::new(EMBED_M, 42);
    let v = embed(&[], &basis);
    assert_eq!(v.len(), 20);
    assert!(v.iter().all(|&x| x == 0.0));
}

#[test]
fn embed_of_singleton_is_exact() {
    let basis = EmbeddingBasis::new(EMBED_M, 42);
    let c = 1.25;
    let v = embed(&[c], &basis);
    for j in 0..basis.m {
        assert_eq!(v[j], (basis.w[j] * c + basis.b[j]).cos());
    }
    assert_eq!(&v[basis.m..], &[c, c, c, 0.0, 1.0]);
}

#[test]
fn embed_is_permutation_invariant() {
    let basis = EmbeddingBasis::new(EMBED_M, 7);
    let scores = [0.3, 1.7, 0.3, 2.2, 0.9];
    let mut perm = scores;
    perm.reverse();
    let a = embed(&scores, &basis);
    let b = embed(&perm, &basis);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn embed_statistics_tail() {
    let basis = EmbeddingBasis::new(EMBED_M, 1);
    let scores = [0.6, 0.3, 0.7, 0.4, 0.6, 0.1];
    let v = embed(&scores, &basis);
    let tail = &v[basis.m..];
    assert_eq!(tail[0], 0.7);
    assert_eq!(tail[1], 0.1);
    assert!((tail[2] - 0.45).abs() < 1e-12);
    // Population standard deviation of the six values.
    assert!((tail[3] - 0.206_155_281_280_883_03).abs() < 1e-12);
    assert_eq!(tail[4], 6.0);
}

#[test]
fn basis_is_reproducible() {
    assert_eq!(EmbeddingBasis::new(15, 9), EmbeddingBasis::new(15, 9));
    assert_ne!(EmbeddingBasis::new(15, 9), EmbeddingBasis::new(15, 10));
}

/// Graph from the worked skeleton example: the pair has four further
/// neighbors each, all shared.
#[test]
fn skeleton_structural_block() {
    // Nodes 0, 1 adjacent; both also adjacent to 2, 3, 4, 5.
    let mut g = crate::graphlib::Pdag::new(6);
    g.add_undirected(0, 1);
    for q in 2..6 {
        g.add_undirected(0, q);
        g.add_undirected(1, q);
    }
    let mut conf = ConfMap::new();
    conf.set(0, 1, 0.8);
    // Two of node 0's other confidences below 0.8, two above.
    conf.set(0, 2, 0.5);
    conf.set(0, 3, 0.6);
    conf.set(0, 4, 0.9);
    conf.set(0, 5, 0.95);
    // Three of node 1's below, one above.
    conf.set(1, 2, 0.3);
    conf.set(1, 3, 0.4);
    conf.set(1, 4, 0.5);
    conf.set(1, 5, 0.9);

    let basis = EmbeddingBasis::new(EMBED_M, 3);
    let cfg = FeatureConfig::default();
    let source = Scripted::new(1.0);
    let f = skeleton_features(&source, &g, &conf, (0, 1), 2, &basis, &cfg);
    let tail = &f.vector[2 * (basis.m + EMBED_STATS)..];
    assert_eq!(tail, &[0.5, 0.75, 0.8, 4.0, 4.0, 1.0]);
}

#[test]
fn skeleton_order_sets_follow_the_adjacency_sides() {
    // Path 0 - 1 - 2: at order 1 the conditioning sets for (0, 1) are the
    // always-included empty set and {2}.
    let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]);
    let g = skeleton_of(&dag);
    let mut source = Scripted::new(0.0);
    source.put(0, 1, &[], 5.0);
    source.put(0, 1, &[2], 1.0);
    let basis = EmbeddingBasis::new(EMBED_M, 4);
    let cfg = FeatureConfig::default();
    let f = skeleton_features(&source, &g, &ConfMap::new(), (0, 1), 1, &basis, &cfg);
    // k-order stats over {5.0, 1.0}.
    let k_tail = &f.vector[basis.m..basis.m + EMBED_STATS];
    assert_eq!(k_tail, &[5.0, 1.0, 3.0, 2.0, 2.0]);
    // Residual stats: 5.0 - min(1.0) = 4.0, one element.
    let r_tail = &f.vector[2 * basis.m + EMBED_STATS..2 * (basis.m + EMBED_STATS)];
    assert_eq!(r_tail, &[4.0, 4.0, 4.0, 0.0, 1.0]);
}

#[test]
fn isolated_pair_sees_only_the_marginal_test() {
    let mut g = crate::graphlib::Pdag::new(4);
    g.add_undirected(0, 1);
    let basis = EmbeddingBasis::new(EMBED_M, 5);
    let cfg = FeatureConfig::default();
    let source = Scripted::new(2.0);
    let f = skeleton_features(&source, &g, &ConfMap::new(), (0, 1), 1, &basis, &cfg);
    // The k-order set holds the single marginal score.
    let k_tail = &f.vector[basis.m..basis.m + EMBED_STATS];
    assert_eq!(k_tail, &[2.0, 2.0, 2.0, 0.0, 1.0]);
    // No extension exists, so the residual set is empty and embeds to zeros.
    let r_block = &f.vector[basis.m + EMBED_STATS..2 * (basis.m + EMBED_STATS)];
    assert!(r_block.iter().all(|&x| x == 0.0));
    // Degrees and density are zero; competitiveness denominators floored.
    assert_eq!(
        &f.vector[2 * (basis.m + EMBED_STATS)..],
        &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    );
}

#[test]
fn subset_cap_kicks_in_deterministically() {
    let items: Vec<usize> = (0..20).collect();
    let a = capped_subsets(&items, 3, 64, 99);
    let b = capped_subsets(&items, 3, 64, 99);
    assert_eq!(a.len(), 64);
    assert_eq!(a, b);
    for s in &a {
        assert_eq!(s.len(), 3);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
    let full = capped_subsets(&items[..6], 2, 64, 99);
    assert_eq!(full.len(), 15);
}

fn fig_skeleton() -> crate::graphlib::Pdag {
    // Triple (0, 2, 1) with PC_a = {3, 4}, PC_b = {3, 5, 6}, PC_c = {5, 9}.
    let mut g = crate::graphlib::Pdag::new(10);
    g.add_undirected(0, 2);
    g.add_undirected(1, 2);
    g.add_undirected(0, 3);
    g.add_undirected(0, 4);
    g.add_undirected(1, 3);
    g.add_undirected(1, 5);
    g.add_undirected(1, 6);
    g.add_undirected(2, 5);
    g.add_undirected(2, 9);
    g
}

#[test]
fn orientation_overlap_and_scaling_blocks() {
    let g = fig_skeleton();
    let sepsets: Vec<BTreeSet<usize>> = vec![
        BTreeSet::from([2]),
        BTreeSet::from([4]),
        BTreeSet::from([2, 9]),
    ];
    let source = Scripted::new(0.5);
    let cfg = FeatureConfig::default();
    let triple = UnshieldedTriple::new(0, 2, 1);
    let f = orientation_features(&source, &g, &sepsets, triple, &cfg);
    assert_eq!(f.vector.len(), ORIENTATION_FEATURE_LEN);
    let overlap = &f.vector[24..31];
    assert_eq!(overlap, &[0.5, 0.0, 0.5, 0.5, 0.0, 0.5, 1.0]);
    let scaling = &f.vector[31..36];
    assert_eq!(scaling[..4], [2.0, 3.0, 2.0, 3.0]);
    assert!((scaling[4] - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn overlap_coefficient_identities() {
    let a: BTreeSet<usize> = [1, 2, 3].into_iter().collect();
    let b: BTreeSet<usize> = [4, 5].into_iter().collect();
    assert_eq!(overlap_coefficient(&a, &a), 1.0);
    assert_eq!(overlap_coefficient(&a, &b), 0.0);
    assert_eq!(overlap_coefficient(&a, &BTreeSet::new()), 0.0);
}

#[test]
fn vicinity_cells_expose_collider_signature() {
    // True collider 0 -> 2 <- 1 with the oracle: marginally independent,
    // dependent given the collider.
    let dag = Dag::from_edges(3, &[(0, 2), (1, 2)]);
    let skeleton = skeleton_of(&dag);
    let source = DSepSource::new(dag);
    let sepsets = find_sepsets(&source, &skeleton, (0, 1), 0.01, 4);
    assert_eq!(sepsets, vec![BTreeSet::new()]);
    let cfg = FeatureConfig::default();
    let f = orientation_features(
        &source,
        &skeleton,
        &sepsets,
        UnshieldedTriple::new(0, 2, 1),
        &cfg,
    );
    // Group 1 (a ~ b), slot 1 is the empty condition, slot 3 conditions on c.
    assert_eq!(f.vector[0], 0.0);
    assert_eq!(f.vector[2], ORACLE_DEP);
    assert!(f.vector[0] < f.vector[2]);
    // OLP({c}, union of sepsets) is zero for a collider.
    assert_eq!(f.vector[30], 0.0);
}

#[test]
fn sepsets_of_collider_exclude_the_collider() {
    let dag = Dag::from_edges(3, &[(0, 2), (1, 2)]);
    let skeleton = skeleton_of(&dag);
    let source = DSepSource::new(dag);
    let sepsets = find_sepsets(&source, &skeleton, (0, 1), 0.01, 4);
    assert!(sepsets.contains(&BTreeSet::new()));
    assert!(sepsets.iter().all(|s| !s.contains(&2)));
}

#[test]
fn sepsets_of_chain_contain_the_middle() {
    let dag = Dag::from_edges(3, &[(0, 2), (2, 1)]);
    let skeleton = skeleton_of(&dag);
    let source = DSepSource::new(dag);
    let sepsets = find_sepsets(&source, &skeleton, (0, 1), 0.01, 4);
    assert!(!sepsets.is_empty());
    assert!(sepsets.iter().all(|s| s.contains(&2)));
}

#[test]
fn sepsets_match_brute_force_search_space() {
    use crate::graphlib::d_separated;
    let mut rng = <crate::rng::Rng as rand_chacha::rand_core::SeedableRng>::seed_from_u64(31);
    for _ in 0..40 {
        let mut dag = Dag::new(5);
        for i in 0..5 {
            for j in (i + 1)..5 {
                if rand::Rng::gen_bool(&mut rng, 0.4) {
                    dag.add_edge(i, j);
                }
            }
        }
        let skeleton = skeleton_of(&dag);
        let source = DSepSource::new(dag.clone());
        for a in 0..5 {
            for b in (a + 1)..5 {
                if skeleton.adjacent(a, b) {
                    continue;
                }
                let got = find_sepsets(&source, &skeleton, (a, b), 0.01, 4);
                // Brute force over the same vicinity-restricted space.
                let mut want: Vec<BTreeSet<usize>> = Vec::new();
                let sides = side_sets(&skeleton, a, b);
                for size in 0..=4usize {
                    let mut cands: BTreeSet<Vec<usize>> = BTreeSet::new();
                    for side in [&sides.0, &sides.1] {
                        for s in lexicographic_subsets(side, size) {
                            cands.insert(s);
                        }
                    }
                    for s in cands {
                        let set: BTreeSet<usize> = s.into_iter().collect();
                        if d_separated(&dag, a, b, &set) {
                            want.push(set);
                        }
                    }
                }
                assert_eq!(got, want, "pair ({a},{b}) in {:?}", dag.edges());
            }
        }
    }
}

#[test]
fn feature_vectors_are_deterministic() {
    let g = fig_skeleton();
    let source = Scripted::new(0.7);
    let basis = EmbeddingBasis::new(EMBED_M, 11);
    let cfg = FeatureConfig::default();
    let mut conf = ConfMap::new();
    conf.set(0, 2, 0.4);
    let f1 = skeleton_features(&source, &g, &conf, (0, 2), 2, &basis, &cfg);
    let f2 = skeleton_features(&source, &g, &conf, (0, 2), 2, &basis, &cfg);
    assert_eq!(f1.vector, f2.vector);

    let sepsets = vec![BTreeSet::from([3])];
    let t = UnshieldedTriple::new(0, 2, 1);
    let o1 = orientation_features(&source, &g, &sepsets, t, &cfg);
    let o2 = orientation_features(&source, &g, &sepsets, t, &cfg);
    assert_eq!(o1.vector, o2.vector);
}

#[test]
fn empty_sepset_list_is_flagged_not_nan() {
    let g = fig_skeleton();
    let source = Scripted::new(0.9);
    let cfg = FeatureConfig::default();
    let f = orientation_features(&source, &g, &[], UnshieldedTriple::new(0, 2, 1), &cfg);
    assert!(f.vector.iter().all(|v| v.is_finite()));
    // Scaling block: zero sepsets found, zero mean size.
    assert_eq!(f.vector[34], 0.0);
    assert_eq!(f.vector[35], 0.0);
    // Overlaps against the empty union are zero.
    assert_eq!(f.vector[30], 0.0);
}
