//! Discrete Bayesian networks: parsing, parameterization, interventions, and
//! ancestral sampling.

use std::collections::BTreeSet;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphlib::Dag;
use crate::rng::Rng;

mod bif;
pub use bif::{parse_bif, BifError};

/// Default concentration range for intervention rows, `alpha ~ U[low, high]`.
pub const DIRICHLET_ALPHA_RANGE: (f64, f64) = (0.2, 1.0);

/// Probability floor applied inside log-likelihood sums.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network is cyclic")]
    Cyclic,
    #[error("cpt row {row} of node {node} sums to {sum}, outside tolerance")]
    RowNotNormalized { node: usize, row: usize, sum: f64 },
    #[error("cpt of node {node} has {got} rows, expected {want}")]
    RowCount { node: usize, got: usize, want: usize },
    #[error("unknown target index {0}")]
    UnknownTarget(usize),
    #[error("data table does not match network schema: {0}")]
    SchemaMismatch(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// One conditional probability table. Row `r` holds the distribution of the
/// node given the parent configuration with mixed-radix index `r`, where
/// parents are in ascending node order and the last parent varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn single_row(dist: Vec<f64>) -> Self {
        Cpt { rows: vec![dist] }
    }
}

/// Mixed-radix index of a parent configuration.
///
/// `parents` must be ascending; `value_of` maps a node to its observed value.
pub fn config_index(
    parents: &BTreeSet<usize>,
    cards: &[usize],
    mut value_of: impl FnMut(usize) -> usize,
) -> usize {
    let mut idx = 0;
    for &p in parents {
        idx = idx * cards[p] + value_of(p);
    }
    idx
}

/// Number of parent configurations.
pub fn config_count(parents: &BTreeSet<usize>, cards: &[usize]) -> usize {
    parents.iter().map(|&p| cards[p]).product()
}

/// A discrete Bayesian network: DAG plus one CPT per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBayesNet {
    pub nodes: Vec<String>,
    pub cards: Vec<usize>,
    pub dag: Dag,
    pub cpts: Vec<Cpt>,
}

impl DiscreteBayesNet {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !self.dag.is_acyclic() {
            return Err(NetError::Cyclic);
        }
        for (i, cpt) in self.cpts.iter().enumerate() {
            let want = config_count(self.dag.parents_of(i), &self.cards);
            if cpt.rows.len() != want {
                return Err(NetError::RowCount {
                    node: i,
                    got: cpt.rows.len(),
                    want,
                });
            }
            for (r, row) in cpt.rows.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
                    return Err(NetError::RowNotNormalized {
                        node: i,
                        row: r,
                        sum,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let net: DiscreteBayesNet =
            serde_json::from_str(text).map_err(|e| NetError::SchemaMismatch(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    /// Canonical BIF text; `parse_bif` of the output reproduces the network.
    pub fn to_bif(&self) -> String {
        bif::serialize(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InterventionKind {
    Hard,
    Soft { alpha_low: f64, alpha_high: f64 },
}

impl InterventionKind {
    pub fn soft_default() -> Self {
        InterventionKind::Soft {
            alpha_low: DIRICHLET_ALPHA_RANGE.0,
            alpha_high: DIRICHLET_ALPHA_RANGE.1,
        }
    }

    fn alpha_range(&self) -> (f64, f64) {
        match *self {
            InterventionKind::Hard => DIRICHLET_ALPHA_RANGE,
            InterventionKind::Soft {
                alpha_low,
                alpha_high,
            } => (alpha_low, alpha_high),
        }
    }

    pub fn is_hard(&self) -> bool {
        matches!(self, InterventionKind::Hard)
    }
}

/// Targets and mechanism of one experimental regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub targets: BTreeSet<usize>,
    pub kind: InterventionKind,
}

impl InterventionSpec {
    pub fn observational() -> Self {
        InterventionSpec {
            targets: BTreeSet::new(),
            kind: InterventionKind::Hard,
        }
    }
}

/// Ordered regimes; index 0 is reserved for the observational regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionFamily {
    pub regimes: Vec<InterventionSpec>,
}

impl InterventionFamily {
    pub fn observational_only() -> Self {
        InterventionFamily {
            regimes: vec![InterventionSpec::observational()],
        }
    }

    /// Number of non-observational regimes.
    pub fn k(&self) -> usize {
        self.regimes.len() - 1
    }

    pub fn validate(&self) -> Result<(), NetError> {
        assert!(
            !self.regimes.is_empty() && self.regimes[0].targets.is_empty(),
            "regime 0 must be observational"
        );
        Ok(())
    }
}

/// Row-major table of category codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    pub columns: Vec<String>,
    pub cards: Vec<usize>,
    values: Vec<u8>,
    n_rows: usize,
    pub regime_id: Option<Vec<u32>>,
}

impl DataTable {
    pub fn new(columns: Vec<String>, cards: Vec<usize>) -> Self {
        assert_eq!(columns.len(), cards.len());
        assert!(cards.iter().all(|&c| c >= 1 && c <= u8::MAX as usize + 1));
        DataTable {
            columns,
            cards,
            values: Vec::new(),
            n_rows: 0,
            regime_id: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> usize {
        self.values[row * self.columns.len() + col] as usize
    }

    pub fn push_row(&mut self, row: &[usize]) {
        assert_eq!(row.len(), self.columns.len());
        for (c, &v) in row.iter().enumerate() {
            debug_assert!(v < self.cards[c], "value {v} out of range for column {c}");
            self.values.push(v as u8);
        }
        self.n_rows += 1;
    }

    pub fn row(&self, r: usize) -> Vec<usize> {
        (0..self.n_cols()).map(|c| self.value(r, c)).collect()
    }

    /// CSV with a header row; category codes as integers. When regime ids are
    /// present a trailing `__regime` column is written.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let mut header: Vec<String> = self.columns.clone();
        if self.regime_id.is_some() {
            header.push("__regime".into());
        }
        s.push_str(&header.join(","));
        s.push('\n');
        for r in 0..self.n_rows {
            let mut cells: Vec<String> =
                (0..self.n_cols()).map(|c| self.value(r, c).to_string()).collect();
            if let Some(reg) = &self.regime_id {
                cells.push(reg[r].to_string());
            }
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Reads a CSV produced by [`DataTable::to_csv`]. Cardinalities are taken
    /// from `cards` when given, otherwise inferred as `max + 1` per column.
    pub fn from_csv(text: &str, cards: Option<Vec<usize>>) -> Result<Self, NetError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| NetError::Csv("empty file".into()))?;
        let mut columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let has_regime = columns.last().map(String::as_str) == Some("__regime");
        if has_regime {
            columns.pop();
        }
        let ncols = columns.len();
        let mut raw: Vec<Vec<usize>> = Vec::new();
        let mut regimes: Vec<u32> = Vec::new();
        for (li, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let want = ncols + usize::from(has_regime);
            if cells.len() != want {
                return Err(NetError::Csv(format!(
                    "row {}: expected {} cells, found {}",
                    li + 2,
                    want,
                    cells.len()
                )));
            }
            let mut row = Vec::with_capacity(ncols);
            for cell in &cells[..ncols] {
                row.push(
                    cell.parse::<usize>()
                        .map_err(|_| NetError::Csv(format!("bad cell {cell:?} in row {}", li + 2)))?,
                );
            }
            if has_regime {
                regimes.push(
                    cells[ncols]
                        .parse::<u32>()
                        .map_err(|_| NetError::Csv(format!("bad regime in row {}", li + 2)))?,
                );
            }
            raw.push(row);
        }
        let cards = match cards {
            Some(c) => {
                if c.len() != ncols {
                    return Err(NetError::Csv("cardinality count mismatch".into()));
                }
                c
            }
            None => (0..ncols)
                .map(|c| raw.iter().map(|r| r[c]).max().unwrap_or(0) + 1)
                .collect(),
        };
        for row in &raw {
            for (c, &v) in row.iter().enumerate() {
                if v >= cards[c] {
                    return Err(NetError::Csv(format!(
                        "value {v} out of range for column {}",
                        columns[c]
                    )));
                }
            }
        }
        let mut table = DataTable::new(columns, cards);
        for row in &raw {
            table.push_row(row);
        }
        if has_regime {
            table.regime_id = Some(regimes);
        }
        Ok(table)
    }
}

fn dirichlet_row(alpha: f64, card: usize, rng: &mut Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive alpha");
    for _ in 0..100 {
        let draws: Vec<f64> = (0..card).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 1e-300 {
            return draws.into_iter().map(|d| d / sum).collect();
        }
    }
    vec![1.0 / card as f64; card]
}

/// Applies one intervention regime, leaving non-targets untouched.
///
/// Hard interventions orphan each target and replace its table by one fresh
/// marginal; soft interventions keep the parent sets but redraw every row.
pub fn apply_intervention(
    net: &DiscreteBayesNet,
    spec: &InterventionSpec,
    rng: &mut Rng,
) -> Result<DiscreteBayesNet, NetError> {
    for &t in &spec.targets {
        if t >= net.n() {
            return Err(NetError::UnknownTarget(t));
        }
    }
    let mut out = net.clone();
    let (low, high) = spec.kind.alpha_range();
    for &t in &spec.targets {
        let alpha = rng.gen_range(low..=high);
        match spec.kind {
            InterventionKind::Hard => {
                let parents: Vec<usize> = out.dag.parents_of(t).iter().copied().collect();
                for p in parents {
                    out.dag.remove_edge(p, t);
                }
                out.cpts[t] = Cpt::single_row(dirichlet_row(alpha, out.cards[t], rng));
            }
            InterventionKind::Soft { .. } => {
                let n_rows = out.cpts[t].rows.len();
                out.cpts[t].rows = (0..n_rows)
                    .map(|_| dirichlet_row(alpha, out.cards[t], rng))
                    .collect();
            }
        }
    }
    Ok(out)
}

/// Ancestral sampling in topological order.
pub fn forward_sample(net: &DiscreteBayesNet, n: usize, rng: &mut Rng) -> DataTable {
    assert!(n >= 1);
    let order = net.dag.topo_order().expect("network is acyclic");
    let mut table = DataTable::new(net.nodes.clone(), net.cards.clone());
    let mut row = vec![0usize; net.n()];
    for _ in 0..n {
        for &v in &order {
            let idx = config_index(net.dag.parents_of(v), &net.cards, |p| row[p]);
            let dist = &net.cpts[v].rows[idx];
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = dist.len() - 1;
            for (val, &p) in dist.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = val;
                    break;
                }
            }
            row[v] = chosen;
        }
        table.push_row(&row);
    }
    table
}

/// Smoothed maximum-likelihood CPTs for `dag` on `data`.
///
/// Each row is `(count + pseudocount) / (total + pseudocount * card)`; rows
/// with no observations and no smoothing fall back to uniform.
pub fn mle_cpts(dag: &Dag, data: &DataTable, pseudocount: f64) -> Vec<Cpt> {
    let cards = &data.cards;
    let mut cpts = Vec::with_capacity(dag.n());
    for v in 0..dag.n() {
        let parents = dag.parents_of(v);
        let n_cfg = config_count(parents, cards);
        let card = cards[v];
        let mut counts = vec![0.0f64; n_cfg * card];
        for r in 0..data.n_rows() {
            let idx = config_index(parents, cards, |p| data.value(r, p));
            counts[idx * card + data.value(r, v)] += 1.0;
        }
        let mut rows = Vec::with_capacity(n_cfg);
        for cfg in 0..n_cfg {
            let slice = &counts[cfg * card..(cfg + 1) * card];
            let total: f64 = slice.iter().sum();
            let denom = total + pseudocount * card as f64;
            if denom <= 0.0 {
                rows.push(vec![1.0 / card as f64; card]);
            } else {
                rows.push(slice.iter().map(|&c| (c + pseudocount) / denom).collect());
            }
        }
        cpts.push(Cpt { rows });
    }
    cpts
}

/// Total log-likelihood of `data` under `net`, flooring each factor at
/// [`PROB_FLOOR`].
pub fn log_likelihood(net: &DiscreteBayesNet, data: &DataTable) -> f64 {
    log_likelihood_parts(&net.dag, &net.cpts, data)
}

/// Log-likelihood for a (dag, cpts) pair sharing `data`'s schema.
pub fn log_likelihood_parts(dag: &Dag, cpts: &[Cpt], data: &DataTable) -> f64 {
    let cards = &data.cards;
    let mut total = 0.0;
    for v in 0..dag.n() {
        let parents = dag.parents_of(v);
        for r in 0..data.n_rows() {
            let idx = config_index(parents, cards, |p| data.value(r, p));
            let p = cpts[v].rows[idx][data.value(r, v)];
            total += p.max(PROB_FLOOR).ln();
        }
    }
    total
}
