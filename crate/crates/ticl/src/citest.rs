//! Conditional dependence scoring for categorical columns: stratified G²
//! statistics, chi-square p-values, and the inverse-complementary-error
//! rescaling of p-values used as the dependence measure in featurization.

use std::collections::BTreeSet;
use std::collections::HashMap;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::bayesnet::DataTable;
use crate::graphlib::{DSeparationOracle, Dag};

/// p-values below this floor are clamped before the z transform, which caps z
/// near 26.2.
pub const P_FLOOR: f64 = 1e-300;

/// Dependence value reported by the oracle source for dependent pairs.
pub const ORACLE_DEP: f64 = 15.0;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// How p-values map to the z scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ZScale {
    /// `z = erfc^{-1}(p)`.
    #[default]
    Erfc,
    /// Two-sided standard-normal reading, `z = sqrt(2) * erfc^{-1}(p)`.
    NormalTwoSided,
}

/// Result of one conditional independence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceScore {
    pub g2: f64,
    pub dof: u64,
    pub p_value: f64,
    pub z: f64,
}

/// Scaled complementary error function `exp(z^2) * erfc(z)` for `z >= 2`,
/// by the standard continued fraction.
fn erfcx_cf(z: f64) -> f64 {
    let mut f = 0.0;
    for m in (1..=100u32).rev() {
        f = (m as f64 / 2.0) / (z + f);
    }
    1.0 / ((z + f) * SQRT_PI)
}

/// `ln erfc(z)` without underflow for large `z`.
fn ln_erfc(z: f64) -> f64 {
    if z < 2.0 {
        statrs::function::erf::erfc(z).ln()
    } else {
        -z * z + erfcx_cf(z).ln()
    }
}

/// Inverse complementary error function of a p-value, accurate to better than
/// 1e-10 relative over the clamped domain. p at or below the floor saturates.
pub fn z_of_p(p: f64) -> f64 {
    let p = if p.is_nan() { P_FLOOR } else { p.clamp(P_FLOOR, 1.0) };
    if p >= 1.0 {
        return 0.0;
    }
    // Near p = 1 the root is tiny; erfc(z) = 1 - 2 z / sqrt(pi) + O(z^3).
    if 1.0 - p < 1e-12 {
        return (1.0 - p) * SQRT_PI / 2.0;
    }
    let target = p.ln();
    let (mut lo, mut hi) = (0.0f64, 27.5f64);
    for _ in 0..110 {
        let mid = 0.5 * (lo + hi);
        if ln_erfc(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// z value for a p-value under the configured scale.
pub fn z_of_p_scaled(p: f64, scale: ZScale) -> f64 {
    match scale {
        ZScale::Erfc => z_of_p(p),
        ZScale::NormalTwoSided => std::f64::consts::SQRT_2 * z_of_p(p),
    }
}

/// Chi-square upper tail probability.
fn chi2_sf(x: f64, dof: u64) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(dof as f64 / 2.0, x / 2.0)
}

/// Stratified G² test of `i` against `j` given the columns in `cond`.
///
/// Expected counts come from within-stratum independence. Strata with no rows
/// are skipped and the nominal degrees of freedom are reduced accordingly;
/// `0 * ln(0/E)` contributes zero.
pub fn g2_test(data: &DataTable, i: usize, j: usize, cond: &[usize]) -> DependenceScore {
    assert!(i != j && !cond.contains(&i) && !cond.contains(&j));
    // Symmetric by construction: always count with the lower column first.
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    let ci = data.cards[i];
    let cj = data.cards[j];
    if ci < 2 || cj < 2 {
        return DependenceScore {
            g2: 0.0,
            dof: 0,
            p_value: 1.0,
            z: 0.0,
        };
    }
    let mut cond: Vec<usize> = cond.to_vec();
    cond.sort_unstable();

    // One contingency block of ci*cj counts per occupied stratum.
    let mut strata: HashMap<u64, Vec<u32>> = HashMap::new();
    for r in 0..data.n_rows() {
        let mut key = 0u64;
        for &c in &cond {
            key = key * data.cards[c] as u64 + data.value(r, c) as u64;
        }
        let cell = data.value(r, i) * cj + data.value(r, j);
        let block = strata.entry(key).or_insert_with(|| vec![0u32; ci * cj]);
        block[cell] += 1;
    }

    let mut g2 = 0.0f64;
    let mut keys: Vec<u64> = strata.keys().copied().collect();
    keys.sort_unstable();
    for key in &keys {
        let block = &strata[key];
        let n_s: f64 = block.iter().map(|&c| c as f64).sum();
        if n_s == 0.0 {
            continue;
        }
        let mut row_tot = vec![0.0f64; ci];
        let mut col_tot = vec![0.0f64; cj];
        for a in 0..ci {
            for b in 0..cj {
                let o = block[a * cj + b] as f64;
                row_tot[a] += o;
                col_tot[b] += o;
            }
        }
        for a in 0..ci {
            if row_tot[a] == 0.0 {
                continue;
            }
            for b in 0..cj {
                let o = block[a * cj + b] as f64;
                if o == 0.0 || col_tot[b] == 0.0 {
                    continue;
                }
                g2 += o * (o * n_s / (row_tot[a] * col_tot[b])).ln();
            }
        }
    }
    g2 *= 2.0;
    if g2 < 0.0 {
        g2 = 0.0;
    }

    let occupied = keys.len() as u64;
    let dof = ((ci as u64 - 1) * (cj as u64 - 1) * occupied).max(1);
    let p = chi2_sf(g2, dof);
    DependenceScore {
        g2,
        dof,
        p_value: p,
        z: z_of_p(p),
    }
}

/// Debug dump of the stratified contingency table as CSV rows
/// `stratum,i_value,j_value,count`.
pub fn contingency_csv(data: &DataTable, i: usize, j: usize, cond: &[usize]) -> String {
    let mut cond: Vec<usize> = cond.to_vec();
    cond.sort_unstable();
    let mut counts: HashMap<(u64, usize, usize), u64> = HashMap::new();
    for r in 0..data.n_rows() {
        let mut key = 0u64;
        for &c in &cond {
            key = key * data.cards[c] as u64 + data.value(r, c) as u64;
        }
        *counts.entry((key, data.value(r, i), data.value(r, j))).or_insert(0) += 1;
    }
    let mut items: Vec<_> = counts.into_iter().collect();
    items.sort_unstable();
    let mut s = String::from("stratum,i_value,j_value,count\n");
    for ((k, a, b), c) in items {
        s.push_str(&format!("{k},{a},{b},{c}\n"));
    }
    s
}

/// A conditional-dependence provider. Implementations must be deterministic;
/// the cache, when present, only affects speed.
pub trait CiSource: Sync {
    /// Rescaled dependence of `i` and `j` given `cond` (0 means independent).
    fn dep(&self, i: usize, j: usize, cond: &[usize]) -> f64;
    /// p-value of the corresponding independence test.
    fn p_value(&self, i: usize, j: usize, cond: &[usize]) -> f64;
    /// Unsaturated dependence strength for ranking edges against each other.
    /// Unlike the z scale this must not plateau, or rank comparisons among
    /// strong edges collapse into ties.
    fn strength(&self, i: usize, j: usize, cond: &[usize]) -> f64 {
        self.dep(i, j, cond)
    }
}

pub type CacheKey = (u32, u32, Vec<u16>);

/// Data-backed source: G² with a sharded per-run cache keyed by
/// `(i, j, cond)`.
pub struct G2Source<'a> {
    data: &'a DataTable,
    scale: ZScale,
    cache: DashMap<CacheKey, (f64, f64, f64)>,
}

impl<'a> G2Source<'a> {
    pub fn new(data: &'a DataTable) -> Self {
        G2Source {
            data,
            scale: ZScale::Erfc,
            cache: DashMap::new(),
        }
    }

    pub fn with_scale(data: &'a DataTable, scale: ZScale) -> Self {
        G2Source {
            data,
            scale,
            cache: DashMap::new(),
        }
    }

    /// Seeds the cache from previously exported entries.
    pub fn preload(&self, entries: Vec<(CacheKey, (f64, f64, f64))>) {
        for (k, v) in entries {
            self.cache.insert(k, v);
        }
    }

    /// Exports the cache, sorted by key for stable output.
    pub fn entries(&self) -> Vec<(CacheKey, (f64, f64, f64))> {
        let mut out: Vec<(CacheKey, (f64, f64, f64))> = self
            .cache
            .iter()
            .map(|kv| (kv.key().clone(), *kv.value()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    fn entry(&self, i: usize, j: usize, cond: &[usize]) -> (f64, f64, f64) {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let mut key_cond: Vec<u16> = cond.iter().map(|&c| c as u16).collect();
        key_cond.sort_unstable();
        let key = (a as u32, b as u32, key_cond);
        if let Some(hit) = self.cache.get(&key) {
            return *hit;
        }
        let score = g2_test(self.data, a, b, cond);
        let z = match self.scale {
            ZScale::Erfc => score.z,
            ZScale::NormalTwoSided => std::f64::consts::SQRT_2 * score.z,
        };
        let value = (z, score.p_value, score.g2);
        self.cache.insert(key, value);
        value
    }
}

impl CiSource for G2Source<'_> {
    fn dep(&self, i: usize, j: usize, cond: &[usize]) -> f64 {
        self.entry(i, j, cond).0
    }

    fn p_value(&self, i: usize, j: usize, cond: &[usize]) -> f64 {
        self.entry(i, j, cond).1
    }

    fn strength(&self, i: usize, j: usize, cond: &[usize]) -> f64 {
        self.entry(i, j, cond).2.ln_1p()
    }
}

/// Convenience wrapper: the `{X_i ~ X_j | S}` scalar consumed by featurization.
pub fn dep(data: &DataTable, i: usize, j: usize, cond: &[usize]) -> f64 {
    g2_test(data, i, j, cond).z
}

/// Perfect conditional-independence oracle over a known DAG, with query
/// memoization.
pub struct DSepSource {
    oracle: DSeparationOracle,
    cache: DashMap<CacheKey, bool>,
}

impl DSepSource {
    pub fn new(dag: Dag) -> Self {
        DSepSource {
            oracle: DSeparationOracle::new(dag),
            cache: DashMap::new(),
        }
    }

    fn separated(&self, i: usize, j: usize, cond: &[usize]) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let mut key_cond: Vec<u16> = cond.iter().map(|&c| c as u16).collect();
        key_cond.sort_unstable();
        let key = (a as u32, b as u32, key_cond);
        if let Some(hit) = self.cache.get(&key) {
            return *hit;
        }
        let z: BTreeSet<usize> = cond.iter().copied().collect();
        let value = self.oracle.query(a, b, &z);
        self.cache.insert(key, value);
        value
    }
}

impl CiSource for DSepSource {
    fn dep(&self, i: usize, j: usize, cond: &[usize]) -> f64 {
        if self.separated(i, j, cond) {
            0.0
        } else {
            ORACLE_DEP
        }
    }

    fn p_value(&self, i: usize, j: usize, cond: &[usize]) -> f64 {
        if self.separated(i, j, cond) {
            1.0
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use rand::Rng as _;
    use rand_chacha::rand_core::SeedableRng;

    fn two_col_table(rows: &[(usize, usize)]) -> DataTable {
        let mut t = DataTable::new(vec!["x".into(), "y".into()], vec![2, 2]);
        for &(a, b) in rows {
            t.push_row(&[a, b]);
        }
        t
    }

    /// Bisection oracle for the inverse of erfc, independent of `z_of_p`'s
    /// continued-fraction path.
    fn erfc_inv_bisect(p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 7.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if statrs::function::erf::erfc(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn z_of_one_is_zero() {
        assert_eq!(z_of_p(1.0), 0.0);
    }

    #[test]
    fn z_of_p_matches_bisection_oracle() {
        // erfc^{-1}(0.01) computed by the oracle is close to 1.82139.
        let oracle = erfc_inv_bisect(0.01);
        assert!((oracle - 1.82139).abs() < 1e-4);
        assert!((z_of_p(0.01) - oracle).abs() < 1e-9 * oracle);

        for &p in &[0.9, 0.5, 0.1, 1e-3, 1e-6, 1e-9] {
            let oracle = erfc_inv_bisect(p);
            assert!(
                (z_of_p(p) - oracle).abs() <= 1e-10 * oracle.max(1e-3),
                "p={p}: got {}, oracle {oracle}",
                z_of_p(p)
            );
        }
    }

    #[test]
    fn z_of_p_round_trips_through_erfc() {
        let p = statrs::function::erf::erfc(2.0);
        assert!((p - 0.004678).abs() < 1e-6);
        assert!((z_of_p(p) - 2.0).abs() < 1e-10);

        // Large-z branch: ln_erfc self-consistency.
        for &z in &[3.0, 5.0, 10.0, 20.0, 26.0] {
            let p = ln_erfc(z).exp();
            assert!((z_of_p(p) - z).abs() < 1e-9 * z, "z={z} got {}", z_of_p(p));
        }
    }

    #[test]
    fn z_caps_at_the_floor() {
        let z = z_of_p(0.0);
        assert!(z > 26.0 && z < 26.5, "z={z}");
        assert_eq!(z, z_of_p(P_FLOOR / 10.0));
        assert_eq!(z, z_of_p(f64::MIN_POSITIVE));
    }

    #[test]
    fn z_is_monotone_in_p() {
        let mut rng = Rng::seed_from_u64(5);
        for _ in 0..500 {
            let a: f64 = rng.gen_range(-300.0..0.0f64);
            let b: f64 = rng.gen_range(-300.0..0.0f64);
            let (p1, p2) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
            if p1 < p2 {
                assert!(z_of_p(p1) > z_of_p(p2), "p1={p1} p2={p2}");
            }
        }
    }

    #[test]
    fn normal_two_sided_scale_is_sqrt2_rescale() {
        let p = 0.01;
        assert!((z_of_p_scaled(p, ZScale::NormalTwoSided) - 2f64.sqrt() * z_of_p(p)).abs() < 1e-12);
    }

    #[test]
    fn g2_hand_computed_table() {
        // Counts [[30, 10], [10, 30]]; all margins 40, n = 80, E = 20
        // everywhere. Oracle: 2 * (60 ln 1.5 + 20 ln 0.5).
        let mut rows = Vec::new();
        rows.extend(std::iter::repeat((0, 0)).take(30));
        rows.extend(std::iter::repeat((0, 1)).take(10));
        rows.extend(std::iter::repeat((1, 0)).take(10));
        rows.extend(std::iter::repeat((1, 1)).take(30));
        let t = two_col_table(&rows);
        let score = g2_test(&t, 0, 1, &[]);
        let oracle = 2.0
            * (30.0 * (30.0f64 / 20.0).ln() * 2.0 + 10.0 * (10.0f64 / 20.0).ln() * 2.0);
        assert!((oracle - 20.929_925_8).abs() < 1e-6);
        assert!((score.g2 - oracle).abs() < 1e-9);
        assert_eq!(score.dof, 1);
    }

    #[test]
    fn perfect_copy_is_detected() {
        let mut rng = Rng::seed_from_u64(7);
        let rows: Vec<(usize, usize)> = (0..1000)
            .map(|_| {
                let v = rng.gen_range(0..2usize);
                (v, v)
            })
            .collect();
        let t = two_col_table(&rows);
        let score = g2_test(&t, 0, 1, &[]);
        assert!(score.p_value < 1e-6);
        assert!(score.z > 3.0);
    }

    #[test]
    fn independent_pair_rarely_rejects() {
        let mut rejections = 0;
        for seed in 0..100 {
            let mut rng = Rng::seed_from_u64(1000 + seed);
            let rows: Vec<(usize, usize)> = (0..10_000)
                .map(|_| (rng.gen_range(0..2usize), rng.gen_range(0..2usize)))
                .collect();
            let t = two_col_table(&rows);
            if g2_test(&t, 0, 1, &[]).p_value <= 0.01 {
                rejections += 1;
            }
        }
        assert!(rejections <= 2, "rejected {rejections} of 100 null runs");
    }

    #[test]
    fn dep_and_g2_are_symmetric_and_deterministic() {
        let mut rng = Rng::seed_from_u64(9);
        let mut t = DataTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![3, 2, 2],
        );
        for _ in 0..500 {
            t.push_row(&[
                rng.gen_range(0..3usize),
                rng.gen_range(0..2usize),
                rng.gen_range(0..2usize),
            ]);
        }
        let s1 = g2_test(&t, 0, 1, &[2]);
        let s2 = g2_test(&t, 1, 0, &[2]);
        assert_eq!(s1.g2.to_bits(), s2.g2.to_bits());
        assert_eq!(s1.z.to_bits(), s2.z.to_bits());
        let s3 = g2_test(&t, 0, 1, &[2]);
        assert_eq!(s1.p_value.to_bits(), s3.p_value.to_bits());
        assert_eq!(dep(&t, 0, 1, &[2]), s1.z);
    }

    #[test]
    fn copy_scores_above_independent_pair() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = Rng::seed_from_u64(seed);
            let rows_dep: Vec<(usize, usize)> = (0..500)
                .map(|_| {
                    let v = rng.gen_range(0..2usize);
                    (v, v)
                })
                .collect();
            let rows_ind: Vec<(usize, usize)> = (0..500)
                .map(|_| (rng.gen_range(0..2usize), rng.gen_range(0..2usize)))
                .collect();
            let d = dep(&two_col_table(&rows_dep), 0, 1, &[]);
            let i = dep(&two_col_table(&rows_ind), 0, 1, &[]);
            if d > i {
                hits += 1;
            }
        }
        assert!(hits >= 99, "dependence ordering held in {hits} of 100 runs");
    }

    #[test]
    fn cardinality_one_column_gives_p_one() {
        let mut t = DataTable::new(vec!["x".into(), "y".into()], vec![1, 2]);
        t.push_row(&[0, 1]);
        t.push_row(&[0, 0]);
        let score = g2_test(&t, 0, 1, &[]);
        assert_eq!(score.dof, 0);
        assert_eq!(score.p_value, 1.0);
        assert_eq!(score.z, 0.0);
    }

    #[test]
    fn empty_strata_reduce_dof() {
        // Conditioning column takes only value 0 in the data even though its
        // cardinality is 3, so two strata are empty.
        let mut t = DataTable::new(vec!["x".into(), "y".into(), "s".into()], vec![2, 2, 3]);
        for _ in 0..10 {
            t.push_row(&[0, 0, 0]);
            t.push_row(&[1, 1, 0]);
            t.push_row(&[0, 1, 0]);
            t.push_row(&[1, 0, 0]);
        }
        let score = g2_test(&t, 0, 1, &[2]);
        assert_eq!(score.dof, 1);
    }

    #[test]
    fn dsep_source_answers_like_the_dag() {
        let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]);
        let src = DSepSource::new(dag);
        assert_eq!(src.dep(0, 2, &[1]), 0.0);
        assert_eq!(src.p_value(0, 2, &[1]), 1.0);
        assert_eq!(src.dep(0, 2, &[]), ORACLE_DEP);
        assert_eq!(src.p_value(0, 2, &[]), 0.0);
    }

    #[test]
    fn g2_source_caches_consistently() {
        let mut rng = Rng::seed_from_u64(3);
        let mut t = DataTable::new(vec!["a".into(), "b".into()], vec![2, 2]);
        for _ in 0..200 {
            t.push_row(&[rng.gen_range(0..2usize), rng.gen_range(0..2usize)]);
        }
        let src = G2Source::new(&t);
        let a = src.dep(0, 1, &[]);
        let b = src.dep(1, 0, &[]);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(src.p_value(0, 1, &[]), g2_test(&t, 0, 1, &[]).p_value);
    }
}
