//! Pooling of multi-regime data into a single augmented table with binary
//! environment indicator columns, plus the structural edge constraints the
//! augmented graph space must respect.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::{DataTable, InterventionFamily};
use crate::graphlib::Dag;

/// Name of the indicator column for interventional regime `k` (1-based).
pub fn env_column_name(k: usize) -> String {
    format!("__env_{k}")
}

#[derive(Debug, Error)]
pub enum JciError {
    #[error("regime count mismatch: {datasets} datasets for {regimes} regimes")]
    RegimeCount { datasets: usize, regimes: usize },
    #[error("dataset {0} schema differs from dataset 0")]
    SchemaMismatch(usize),
    #[error("intervention target {target} outside the {nodes}-node system")]
    TargetOutOfRange { target: usize, nodes: usize },
}

/// Node-role constants for an augmented graph: `system_count` system nodes
/// followed by `env_count` environment nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JciConstraints {
    pub system_count: usize,
    pub env_count: usize,
}

impl JciConstraints {
    pub fn new(system_count: usize, env_count: usize) -> Self {
        JciConstraints {
            system_count,
            env_count,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.system_count + self.env_count
    }

    pub fn is_env(&self, node: usize) -> bool {
        node >= self.system_count
    }
}

/// Environment nodes accept no incoming edges: system-to-environment and
/// environment-to-environment edges are illegal.
pub fn edge_is_legal(c: &JciConstraints, from: usize, to: usize) -> bool {
    debug_assert!(from < c.n_nodes() && to < c.n_nodes());
    from != to && !c.is_env(to)
}

/// The augmented dataset: system columns, then one binary indicator column
/// per interventional regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDataset {
    pub table: DataTable,
    pub system_count: usize,
    pub k: usize,
}

impl AugmentedDataset {
    pub fn constraints(&self) -> JciConstraints {
        JciConstraints::new(self.system_count, self.k)
    }

    pub fn n_rows(&self) -> usize {
        self.table.n_rows()
    }

    /// Splits back into the per-regime tables, in regime order.
    pub fn split(&self) -> Vec<DataTable> {
        let d = self.system_count;
        let columns: Vec<String> = self.table.columns[..d].to_vec();
        let cards: Vec<usize> = self.table.cards[..d].to_vec();
        let mut out: Vec<DataTable> = (0..=self.k)
            .map(|_| DataTable::new(columns.clone(), cards.clone()))
            .collect();
        for r in 0..self.table.n_rows() {
            let regime = (1..=self.k)
                .find(|&k| self.table.value(r, d + k - 1) == 1)
                .unwrap_or(0);
            let row: Vec<usize> = (0..d).map(|c| self.table.value(r, c)).collect();
            out[regime].push_row(&row);
        }
        out
    }
}

/// Stacks the per-regime tables by rows and appends one indicator column per
/// interventional regime. Dataset `k` must correspond to `fam.regimes[k]`.
pub fn pool(datasets: &[DataTable], fam: &InterventionFamily) -> Result<AugmentedDataset, JciError> {
    if datasets.len() != fam.regimes.len() {
        return Err(JciError::RegimeCount {
            datasets: datasets.len(),
            regimes: fam.regimes.len(),
        });
    }
    let first = &datasets[0];
    for (i, t) in datasets.iter().enumerate().skip(1) {
        if t.columns != first.columns || t.cards != first.cards {
            return Err(JciError::SchemaMismatch(i));
        }
    }
    let k = fam.k();
    let d = first.n_cols();
    let mut columns = first.columns.clone();
    let mut cards = first.cards.clone();
    for ki in 1..=k {
        columns.push(env_column_name(ki));
        cards.push(2);
    }
    let mut table = DataTable::new(columns, cards);
    let mut regime_ids = Vec::new();
    let mut row = vec![0usize; d + k];
    for (regime, t) in datasets.iter().enumerate() {
        for r in 0..t.n_rows() {
            for c in 0..d {
                row[c] = t.value(r, c);
            }
            for ki in 1..=k {
                row[d + ki - 1] = usize::from(ki == regime);
            }
            table.push_row(&row);
            regime_ids.push(regime as u32);
        }
    }
    table.regime_id = Some(regime_ids);
    Ok(AugmentedDataset {
        table,
        system_count: d,
        k,
    })
}

/// Adds one environment node per interventional regime, with edges to exactly
/// that regime's targets. System edges are copied unchanged.
pub fn augment_graph(dag: &Dag, fam: &InterventionFamily) -> Result<Dag, JciError> {
    let d = dag.n();
    let k = fam.k();
    let mut out = Dag::new(d + k);
    for (a, b) in dag.edges() {
        out.add_edge(a, b);
    }
    for (ki, regime) in fam.regimes.iter().enumerate().skip(1) {
        for &t in &regime.targets {
            if t >= d {
                return Err(JciError::TargetOutOfRange { target: t, nodes: d });
            }
            out.add_edge(d + ki - 1, t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::{InterventionKind, InterventionSpec};

    fn fam_with_targets(targets: &[&[usize]]) -> InterventionFamily {
        let mut regimes = vec![InterventionSpec::observational()];
        for t in targets {
            regimes.push(InterventionSpec {
                targets: t.iter().copied().collect(),
                kind: InterventionKind::soft_default(),
            });
        }
        InterventionFamily { regimes }
    }

    fn toy_table(rows: &[[usize; 2]]) -> DataTable {
        let mut t = DataTable::new(vec!["a".into(), "b".into()], vec![2, 2]);
        for r in rows {
            t.push_row(r);
        }
        t
    }

    #[test]
    fn pool_observational_only_adds_nothing() {
        let t = toy_table(&[[0, 1], [1, 0]]);
        let aug = pool(&[t.clone()], &InterventionFamily::observational_only()).unwrap();
        assert_eq!(aug.k, 0);
        assert_eq!(aug.table.n_cols(), 2);
        assert_eq!(aug.table.n_rows(), 2);
        for r in 0..2 {
            assert_eq!(aug.table.row(r), t.row(r));
        }
    }

    #[test]
    fn pool_two_regimes_sets_indicator_block() {
        let obs = toy_table(&[[0, 0], [0, 1], [1, 1]]);
        let int = toy_table(&[[1, 0], [1, 1], [0, 0]]);
        let fam = fam_with_targets(&[&[0]]);
        let aug = pool(&[obs, int], &fam).unwrap();
        assert_eq!(aug.table.n_rows(), 6);
        assert_eq!(aug.table.columns[2], "__env_1");
        let env: Vec<usize> = (0..6).map(|r| aug.table.value(r, 2)).collect();
        assert_eq!(env, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn pool_then_split_round_trips() {
        let obs = toy_table(&[[0, 0], [1, 1]]);
        let int1 = toy_table(&[[1, 0]]);
        let int2 = toy_table(&[[0, 1], [1, 0], [0, 0]]);
        let fam = fam_with_targets(&[&[0], &[1]]);
        let datasets = vec![obs, int1, int2];
        let aug = pool(&datasets, &fam).unwrap();
        let back = aug.split();
        assert_eq!(back.len(), 3);
        for (orig, got) in datasets.iter().zip(&back) {
            assert_eq!(orig.n_rows(), got.n_rows());
            for r in 0..orig.n_rows() {
                assert_eq!(orig.row(r), got.row(r));
            }
        }
    }

    #[test]
    fn pool_env_frequency_is_exact() {
        let obs = toy_table(&[[0, 0], [1, 1], [0, 1]]);
        let int = toy_table(&[[1, 0]]);
        let fam = fam_with_targets(&[&[1]]);
        let aug = pool(&[obs, int], &fam).unwrap();
        let ones: usize = (0..aug.n_rows()).map(|r| aug.table.value(r, 2)).sum();
        assert_eq!(ones, 1);
        assert_eq!(aug.n_rows(), 4);
    }

    #[test]
    fn pool_rejects_schema_and_count_mismatches() {
        let t = toy_table(&[[0, 0]]);
        let other = DataTable::new(vec!["x".into(), "b".into()], vec![2, 2]);
        let fam = fam_with_targets(&[&[0]]);
        assert!(matches!(
            pool(&[t.clone()], &fam),
            Err(JciError::RegimeCount { .. })
        ));
        assert!(matches!(
            pool(&[t, other], &fam),
            Err(JciError::SchemaMismatch(1))
        ));
    }

    #[test]
    fn augment_graph_attaches_env_nodes_to_targets() {
        let dag = Dag::from_edges(3, &[(0, 1)]);
        let fam = fam_with_targets(&[&[1], &[2, 0]]);
        let aug = augment_graph(&dag, &fam).unwrap();
        assert_eq!(aug.n(), 5);
        assert!(aug.has_edge(0, 1));
        assert!(aug.has_edge(3, 1));
        assert!(aug.has_edge(4, 2) && aug.has_edge(4, 0));
        assert_eq!(aug.edge_count(), 4);

        let c = JciConstraints::new(3, 2);
        for (a, b) in aug.edges() {
            assert!(edge_is_legal(&c, a, b));
        }
    }

    #[test]
    fn augment_graph_observational_is_identity() {
        let dag = Dag::from_edges(2, &[(0, 1)]);
        let aug = augment_graph(&dag, &InterventionFamily::observational_only()).unwrap();
        assert_eq!(aug, dag);
    }

    #[test]
    fn augment_graph_rejects_bad_target() {
        let dag = Dag::new(2);
        let fam = fam_with_targets(&[&[5]]);
        assert!(matches!(
            augment_graph(&dag, &fam),
            Err(JciError::TargetOutOfRange { target: 5, .. })
        ));
    }

    #[test]
    fn legality_matrix() {
        let c = JciConstraints::new(2, 2);
        assert!(edge_is_legal(&c, 0, 1)); // sys -> sys
        assert!(edge_is_legal(&c, 2, 0)); // env -> sys
        assert!(!edge_is_legal(&c, 0, 2)); // sys -> env
        assert!(!edge_is_legal(&c, 2, 3)); // env -> env
        assert!(!edge_is_legal(&c, 1, 1));
    }
}
