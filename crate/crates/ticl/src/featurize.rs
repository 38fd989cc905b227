//! Fixed-length feature vectors for edge candidates and unshielded triples:
//! kernel mean embeddings of variable-length conditional-dependence score
//! sets, plus local structural descriptors.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::citest::CiSource;
use crate::graphlib::{Pdag, UnshieldedTriple};
use crate::rng::{derive_seed, Rng};

/// Kernel bandwidth for the cosine features, in z-score units. The
/// frequencies must be slow relative to the score range (which saturates
/// near 26), otherwise the embedding oscillates and does not transfer
/// between sample sizes.
pub const EMBED_BANDWIDTH: f64 = 8.0;

/// Random cosine-feature basis for embedding score sets. Frequencies are
/// normal with standard deviation `1 / EMBED_BANDWIDTH`, phases uniform on
/// `[0, 2*pi)`; the basis is fixed at training time and persisted with the
/// model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBasis {
    pub m: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub rng_seed: u64,
}

impl EmbeddingBasis {
    pub fn new(m: usize, rng_seed: u64) -> Self {
        let mut rng = Rng::seed_from_u64(rng_seed);
        let normal = rand_distr::Normal::new(0.0, 1.0 / EMBED_BANDWIDTH).expect("valid scale");
        let w: Vec<f64> = (0..m)
            .map(|_| rand_distr::Distribution::sample(&normal, &mut rng))
            .collect();
        let b: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        EmbeddingBasis { m, w, b, rng_seed }
    }
}

/// Default embedding dimension.
pub const EMBED_M: usize = 15;

/// Entries appended after the cosine block: max, min, mean, standard
/// deviation, set size.
pub const EMBED_STATS: usize = 5;

/// Skeleton vectors: two embedded score sets plus six structural scalars.
pub fn skeleton_feature_len(m: usize) -> usize {
    2 * (m + EMBED_STATS) + 6
}

/// Orientation vectors: 24 vicinity cells, 7 overlaps, 5 scaling entries.
pub const ORIENTATION_FEATURE_LEN: usize = 36;

/// Embeds a score set: `m` mean-cosine features followed by the five summary
/// statistics. The empty set maps to all zeros.
pub fn embed(scores: &[f64], basis: &EmbeddingBasis) -> Vec<f64> {
    let mut out = vec![0.0f64; basis.m + EMBED_STATS];
    if scores.is_empty() {
        return out;
    }
    // The input is a set: canonicalize the summation order so the embedding
    // is bit-exact under permutation.
    let mut scores = scores.to_vec();
    scores.sort_unstable_by(f64::total_cmp);
    let scores = &scores[..];
    let n = scores.len() as f64;
    for (j, (&w, &b)) in basis.w.iter().zip(&basis.b).enumerate() {
        out[j] = scores.iter().map(|&z| (w * z + b).cos()).sum::<f64>() / n;
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|&z| (z - mean) * (z - mean)).sum::<f64>() / n;
    out[basis.m] = max;
    out[basis.m + 1] = min;
    out[basis.m + 2] = mean;
    out[basis.m + 3] = var.sqrt();
    out[basis.m + 4] = n;
    out
}

/// Tuning knobs for the conditioning-set enumerations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Maximum subsets enumerated per adjacency side at a given order.
    pub subset_cap: usize,
    /// Maximum separating sets aggregated into condition slots.
    pub sepset_cap: usize,
    /// Significance level for separating-set discovery.
    pub alpha: f64,
    /// Largest separating-set size searched.
    pub max_sepset_size: usize,
    /// Largest conditioning-set size used in vicinity cells.
    pub cond_cap: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            subset_cap: 64,
            sepset_cap: 16,
            alpha: 0.01,
            max_sepset_size: 4,
            cond_cap: 8,
        }
    }
}

/// Previous-order edge confidences, keyed by the unordered pair.
#[derive(Debug, Clone, Default)]
pub struct ConfMap {
    map: std::collections::BTreeMap<(usize, usize), f64>,
}

impl ConfMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.map.insert((i.min(j), i.max(j)), value);
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.map
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonFeature {
    pub pair: (usize, usize),
    pub order: usize,
    pub vector: Vec<f64>,
    pub label: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct OrientationFeature {
    pub triple: UnshieldedTriple,
    pub vector: Vec<f64>,
    pub label: Option<bool>,
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

fn lexicographic_subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    if k > sorted.len() {
        return out;
    }
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| sorted[i]).collect());
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] != pos + sorted.len() - k {
                break;
            }
        }
        idx[pos] += 1;
        for p in (pos + 1)..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

/// All `k`-subsets of `items`, or `cap` of them sampled uniformly without
/// replacement when the full count is larger. Sampling is a pure function of
/// `sample_key`, keeping feature vectors reproducible.
fn capped_subsets(items: &[usize], k: usize, cap: usize, sample_key: u64) -> Vec<Vec<usize>> {
    if binomial(items.len(), k) <= cap as u64 {
        return lexicographic_subsets(items, k);
    }
    let mut rng = Rng::seed_from_u64(sample_key);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut pool: Vec<usize> = items.to_vec();
    pool.sort_unstable();
    let mut tries = 0;
    while seen.len() < cap && tries < cap * 20 {
        pool.shuffle(&mut rng);
        let mut pick: Vec<usize> = pool[..k].to_vec();
        pick.sort_unstable();
        seen.insert(pick);
        tries += 1;
    }
    seen.into_iter().collect()
}

/// The capped `k`-subset enumeration used for conditioning sets, exposed so
/// that training-time pruning can probe exactly the featurized search space.
pub fn candidate_condition_sets(
    side: &[usize],
    k: usize,
    cap: usize,
    sample_key: u64,
) -> Vec<Vec<usize>> {
    capped_subsets(side, k, cap, sample_key)
}

fn side_sets(g: &Pdag, i: usize, j: usize) -> (Vec<usize>, Vec<usize>) {
    let side_i: Vec<usize> = g.neighbors(i).into_iter().filter(|&q| q != j).collect();
    let side_j: Vec<usize> = g.neighbors(j).into_iter().filter(|&q| q != i).collect();
    (side_i, side_j)
}

/// Conditioning sets at order `k`: the empty set plus all size-`k` sets
/// drawn from either adjacency side, deduped. Keeping the marginal test in
/// every order's space is what lets the cascade subsume the order-zero
/// independence checks of the classic constraint-based sweep.
fn order_k_sets(g: &Pdag, i: usize, j: usize, k: usize, cap: usize, seed: u64) -> Vec<Vec<usize>> {
    let (side_i, side_j) = side_sets(g, i, j);
    let key = derive_seed(
        seed,
        "subset-cap",
        ((i as u64) << 24) | ((j as u64) << 8) | k as u64,
    );
    let mut sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    sets.insert(Vec::new());
    for s in capped_subsets(&side_i, k, cap, key) {
        sets.insert(s);
    }
    for s in capped_subsets(&side_j, k, cap, key.wrapping_add(1)) {
        sets.insert(s);
    }
    sets.into_iter().collect()
}

/// Skeleton feature vector for an adjacent candidate pair at order `k`.
///
/// Layout: embedded k-order dependence set, embedded residual-dependence set,
/// competitiveness triple, the two degrees, neighborhood overlap density.
pub fn skeleton_features(
    source: &dyn CiSource,
    g_prev: &Pdag,
    conf_prev: &ConfMap,
    pair: (usize, usize),
    k: usize,
    basis: &EmbeddingBasis,
    cfg: &FeatureConfig,
) -> SkeletonFeature {
    let (i, j) = pair;
    assert!(k >= 1, "orders are 1-based");
    debug_assert!(g_prev.adjacent(i, j));

    let k_sets = order_k_sets(g_prev, i, j, k, cfg.subset_cap, basis.rng_seed);
    let k_scores: Vec<f64> = k_sets.iter().map(|s| source.dep(i, j, s)).collect();

    // Residual: how much each (k-1)-order dependence drops under the best
    // single-variable extension.
    let lower_sets = order_k_sets(g_prev, i, j, k - 1, cfg.subset_cap, basis.rng_seed ^ 0x5eed);
    let (side_i, side_j) = side_sets(g_prev, i, j);
    let mut residuals = Vec::with_capacity(lower_sets.len());
    for s1 in &lower_sets {
        let extensions: BTreeSet<usize> = side_i
            .iter()
            .chain(side_j.iter())
            .copied()
            .filter(|q| !s1.contains(q))
            .collect();
        if extensions.is_empty() {
            continue;
        }
        let base = source.dep(i, j, s1);
        let best_drop = extensions
            .iter()
            .map(|&q| {
                let mut ext = s1.clone();
                ext.push(q);
                ext.sort_unstable();
                source.dep(i, j, &ext)
            })
            .fold(f64::INFINITY, f64::min);
        residuals.push(base - best_drop);
    }

    let mut vector = embed(&k_scores, basis);
    vector.extend(embed(&residuals, basis));

    let conf_ij = conf_prev.get(i, j);
    let comp = |node: usize, side: &[usize]| -> f64 {
        let beaten = side
            .iter()
            .filter(|&&q| conf_ij > conf_prev.get(node, q))
            .count();
        beaten as f64 / side.len().max(1) as f64
    };
    vector.push(comp(i, &side_i));
    vector.push(comp(j, &side_j));
    vector.push(conf_ij);
    vector.push(side_i.len() as f64);
    vector.push(side_j.len() as f64);

    let common = side_i.iter().filter(|q| side_j.contains(q)).count();
    let denom = side_i.len().min(side_j.len()).max(1);
    vector.push(common as f64 / denom as f64);

    debug_assert_eq!(vector.len(), skeleton_feature_len(basis.m));
    debug_assert!(vector.iter().all(|v| v.is_finite()));
    SkeletonFeature {
        pair,
        order: k,
        vector,
        label: None,
    }
}

/// Overlap coefficient `|A ∩ B| / min(|A|, |B|)`, zero when either set is
/// empty.
pub fn overlap_coefficient(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let denom = a.len().min(b.len());
    if denom == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / denom as f64
}

/// Orientation feature vector for an unshielded triple `a - c - b`.
///
/// Layout: 24 vicinity dependence cells (four variable groups by six
/// condition slots, group-major), 7 overlap coefficients, 5 scaling entries.
/// Set-valued variable slots average over members; separating-set condition
/// slots average over the sets. An empty sepset list falls back to the empty
/// condition, which the scaling block flags with a zero count.
pub fn orientation_features(
    source: &dyn CiSource,
    skeleton: &Pdag,
    sepsets: &[BTreeSet<usize>],
    triple: UnshieldedTriple,
    cfg: &FeatureConfig,
) -> OrientationFeature {
    let (a, c, b) = (triple.a, triple.c, triple.b);
    let pc_a: Vec<usize> = skeleton
        .neighbors(a)
        .into_iter()
        .filter(|&q| q != c)
        .collect();
    let pc_b: Vec<usize> = skeleton
        .neighbors(b)
        .into_iter()
        .filter(|&q| q != c)
        .collect();
    let pc_c: Vec<usize> = skeleton
        .neighbors(c)
        .into_iter()
        .filter(|&q| q != a && q != b)
        .collect();
    let empty = BTreeSet::new();
    let ss_list: Vec<BTreeSet<usize>> = if sepsets.is_empty() {
        vec![empty.clone()]
    } else {
        sepsets.iter().take(cfg.sepset_cap).cloned().collect()
    };

    let mut groups: [Vec<(usize, usize)>; 4] = [
        vec![(a, b)],
        pc_b.iter().map(|&q| (a, q)).collect(),
        pc_a.iter().map(|&p| (p, b)).collect(),
        pc_a
            .iter()
            .flat_map(|&p| pc_b.iter().map(move |&q| (p, q)))
            .filter(|&(p, q)| p != q)
            .collect(),
    ];
    for g in groups.iter_mut() {
        g.sort_unstable();
        g.dedup();
    }

    let pc_c_cond: BTreeSet<usize> = pc_c.iter().copied().take(cfg.cond_cap).collect();
    let dep_of = |x: usize, y: usize, cond: &BTreeSet<usize>| -> f64 {
        let trimmed: Vec<usize> = cond
            .iter()
            .copied()
            .filter(|&v| v != x && v != y)
            .take(cfg.cond_cap)
            .collect();
        source.dep(x, y, &trimmed)
    };

    let with_c = |s: &BTreeSet<usize>| {
        let mut e = s.clone();
        e.insert(c);
        e
    };
    let with_pc_c = |s: &BTreeSet<usize>| {
        let mut e = pc_c_cond.clone();
        e.extend(s.iter().copied());
        e
    };

    let mut vector = Vec::with_capacity(ORIENTATION_FEATURE_LEN);
    for group in &groups {
        let slots: [Vec<BTreeSet<usize>>; 6] = [
            vec![empty.clone()],
            ss_list.clone(),
            vec![BTreeSet::from([c])],
            ss_list.iter().map(with_c).collect(),
            vec![pc_c_cond.clone()],
            ss_list.iter().map(with_pc_c).collect(),
        ];
        for conds in &slots {
            if group.is_empty() {
                vector.push(0.0);
                continue;
            }
            let mut total = 0.0;
            let mut count = 0usize;
            for &(x, y) in group {
                for cond in conds {
                    total += dep_of(x, y, cond);
                    count += 1;
                }
            }
            vector.push(total / count as f64);
        }
    }

    let set_a: BTreeSet<usize> = pc_a.iter().copied().collect();
    let set_b: BTreeSet<usize> = pc_b.iter().copied().collect();
    let set_c: BTreeSet<usize> = pc_c.iter().copied().collect();
    let ss_union: BTreeSet<usize> = sepsets.iter().flat_map(|s| s.iter().copied()).collect();
    let c_set = BTreeSet::from([c]);
    vector.push(overlap_coefficient(&set_a, &set_b));
    vector.push(overlap_coefficient(&set_a, &set_c));
    vector.push(overlap_coefficient(&set_a, &ss_union));
    vector.push(overlap_coefficient(&set_b, &set_c));
    vector.push(overlap_coefficient(&set_b, &ss_union));
    vector.push(overlap_coefficient(&set_c, &ss_union));
    vector.push(overlap_coefficient(&c_set, &ss_union));

    vector.push(pc_a.len() as f64);
    vector.push(pc_b.len() as f64);
    vector.push(pc_c.len() as f64);
    vector.push(sepsets.len() as f64);
    let mean_size = if sepsets.is_empty() {
        0.0
    } else {
        sepsets.iter().map(|s| s.len() as f64).sum::<f64>() / sepsets.len() as f64
    };
    vector.push(mean_size);

    debug_assert_eq!(vector.len(), ORIENTATION_FEATURE_LEN);
    debug_assert!(vector.iter().all(|v| v.is_finite()));
    OrientationFeature {
        triple,
        vector,
        label: None,
    }
}

/// Bound on candidate subsets examined per side and size during separating
/// set discovery; a deterministic lexicographic prefix is kept beyond it.
const SEPSET_ENUM_BOUND: usize = 256;

/// Separating sets of a non-adjacent pair within the vicinity-restricted
/// search space: subsets of either side's neighborhood whose independence
/// test p-value exceeds `alpha`. Ordered by ascending size, then
/// lexicographically. May be empty.
pub fn find_sepsets(
    source: &dyn CiSource,
    skeleton: &Pdag,
    pair: (usize, usize),
    alpha: f64,
    max_size: usize,
) -> Vec<BTreeSet<usize>> {
    let (a, b) = pair;
    debug_assert!(!skeleton.adjacent(a, b));
    let (side_a, side_b) = side_sets(skeleton, a, b);
    let mut out: Vec<BTreeSet<usize>> = Vec::new();
    for size in 0..=max_size {
        let mut candidates: BTreeSet<Vec<usize>> = BTreeSet::new();
        for side in [&side_a, &side_b] {
            let mut added = 0usize;
            for s in lexicographic_subsets(side, size) {
                if candidates.insert(s) {
                    added += 1;
                    if added >= SEPSET_ENUM_BOUND {
                        break;
                    }
                }
            }
        }
        for s in candidates {
            if source.p_value(a, b, &s) > alpha {
                out.push(s.into_iter().collect());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
