//! Self-augmentation engine: structure MCMC over the legal augmented-graph
//! space, CPT re-estimation with parameter reuse, proxy seeding, parallel
//! chains, and emission of graph/data training pairs.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayesnet::{
    config_count, config_index, forward_sample, mle_cpts, Cpt, DataTable, DiscreteBayesNet,
};
use crate::graphlib::Dag;
use crate::jci::{edge_is_legal, AugmentedDataset, JciConstraints};
use crate::rng::{stage_rng, Rng};

mod dirichlet;
pub use dirichlet::{digamma_inverse, dirichlet_log_likelihood, fit_dirichlet, DirichletFit};

/// Graph score used as the (log) posterior surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ScoreKind {
    /// Smoothed log-likelihood with a BIC complexity penalty.
    #[default]
    Bic,
    /// Raw smoothed log-likelihood.
    LogLik,
}

/// How candidates are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AcceptanceRule {
    /// Full Metropolis-Hastings: `min(1, q_ratio * exp(delta_score))`.
    #[default]
    FullMh,
    /// Ablation variant: `min(1, score_cand / score_prev)` on raw scores.
    ScoreRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SeedMode {
    /// Hill-climbing proxy start.
    #[default]
    Proxy,
    /// Random legal DAG start.
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_pairs: usize,
    pub samples_per_pair: usize,
    /// Steps discarded before the first emission, per chain.
    pub burn_in: usize,
    /// Steps between emissions.
    pub thin: usize,
    pub n_chains: usize,
    pub score: ScoreKind,
    pub seed_mode: SeedMode,
    pub dirichlet_beta: f64,
    pub max_indegree: usize,
    pub acceptance: AcceptanceRule,
}

impl McmcConfig {
    /// Defaults scaled to the node count of the augmented graph.
    pub fn default_for(n_nodes: usize) -> Self {
        McmcConfig {
            n_pairs: 400,
            samples_per_pair: 10_000,
            burn_in: 500 * n_nodes,
            thin: 50,
            n_chains: 4,
            score: ScoreKind::Bic,
            seed_mode: SeedMode::Proxy,
            dirichlet_beta: 0.25,
            max_indegree: 6,
            acceptance: AcceptanceRule::FullMh,
        }
    }

    pub fn validate(&self) {
        assert!(self.samples_per_pair > 0 && self.thin > 0 && self.n_chains > 0);
        assert!(self.dirichlet_beta > 0.0);
    }
}

/// One emitted training instance: an augmented graph and data forward-sampled
/// from its fitted tables.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub graph: Dag,
    pub data: DataTable,
    pub chain: usize,
    pub step: u64,
}

/// Chain position: graph, fitted tables, cached score, step counter.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub graph: Dag,
    pub cpts: Vec<Arc<Cpt>>,
    pub score: f64,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
    /// No legal move existed.
    Stay,
}

/// Decomposable per-family score with a per-scorer cache. The score of a
/// graph is the sum over nodes of the Laplace-smoothed multinomial
/// log-likelihood of the node given its parents, with an optional BIC
/// penalty.
pub struct Scorer<'a> {
    data: &'a DataTable,
    kind: ScoreKind,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> Scorer<'a> {
    pub fn new(data: &'a DataTable, kind: ScoreKind) -> Self {
        Scorer {
            data,
            kind,
            cache: HashMap::new(),
        }
    }

    pub fn family_score(
        &mut self,
        node: usize,
        parents: &std::collections::BTreeSet<usize>,
    ) -> f64 {
        let key = (node, parents.iter().copied().collect::<Vec<_>>());
        if let Some(&hit) = self.cache.get(&key) {
            return hit;
        }
        let cards = &self.data.cards;
        let card = cards[node];
        let n_cfg = config_count(parents, cards);
        let mut counts = vec![0u32; n_cfg * card];
        for r in 0..self.data.n_rows() {
            let idx = config_index(parents, cards, |p| self.data.value(r, p));
            counts[idx * card + self.data.value(r, node)] += 1;
        }
        let mut ll = 0.0f64;
        for cfg in 0..n_cfg {
            let slice = &counts[cfg * card..(cfg + 1) * card];
            let total: u32 = slice.iter().sum();
            if total == 0 {
                continue;
            }
            let denom = total as f64 + card as f64;
            for &c in slice {
                if c > 0 {
                    ll += c as f64 * ((c as f64 + 1.0) / denom).ln();
                }
            }
        }
        let score = match self.kind {
            ScoreKind::LogLik => ll,
            ScoreKind::Bic => {
                let free = (card - 1) * n_cfg;
                ll - 0.5 * (self.data.n_rows() as f64).ln() * free as f64
            }
        };
        self.cache.insert(key, score);
        score
    }

    pub fn graph_score(&mut self, graph: &Dag) -> f64 {
        (0..graph.n())
            .map(|v| {
                let parents = graph.parents_of(v).clone();
                self.family_score(v, &parents)
            })
            .sum()
    }
}

fn reversal_keeps_acyclic(graph: &Dag, from: usize, to: usize) -> bool {
    // After removing from -> to, adding to -> from closes a cycle exactly
    // when another path from `from` to `to` remains.
    let mut g = graph.clone();
    g.remove_edge(from, to);
    !g.creates_cycle(to, from)
}

/// All legal single-edge moves from `graph`.
pub fn legal_moves(graph: &Dag, c: &JciConstraints, max_indegree: usize) -> Vec<Move> {
    let n = graph.n();
    debug_assert_eq!(n, c.n_nodes());
    let mut moves = Vec::new();
    // Reachability matrix for O(1) cycle checks on additions.
    let mut reach = vec![false; n * n];
    for v in 0..n {
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            for child in graph.children_of(x) {
                if !reach[v * n + child] {
                    reach[v * n + child] = true;
                    stack.push(child);
                }
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            if graph.has_edge(a, b) {
                moves.push(Move::Delete(a, b));
                if edge_is_legal(c, b, a)
                    && graph.in_degree(a) < max_indegree
                    && reversal_keeps_acyclic(graph, a, b)
                {
                    moves.push(Move::Reverse(a, b));
                }
            } else if !graph.has_edge(b, a)
                && edge_is_legal(c, a, b)
                && graph.in_degree(b) < max_indegree
                && !reach[b * n + a]
            {
                moves.push(Move::Add(a, b));
            }
        }
    }
    moves
}

pub fn apply_move(graph: &Dag, mv: Move) -> Dag {
    let mut g = graph.clone();
    match mv {
        Move::Add(a, b) => g.add_edge(a, b),
        Move::Delete(a, b) => g.remove_edge(a, b),
        Move::Reverse(a, b) => {
            g.remove_edge(a, b);
            g.add_edge(b, a);
        }
        Move::Stay => {}
    }
    g
}

/// Uniform proposal over the legal single-move neighborhood.
///
/// Returns the candidate graph, the move, and the Hastings ratio
/// `|N(current)| / |N(candidate)|`.
pub fn propose(
    state: &ChainState,
    c: &JciConstraints,
    max_indegree: usize,
    rng: &mut Rng,
) -> (Dag, Move, f64) {
    let moves = legal_moves(&state.graph, c, max_indegree);
    if moves.is_empty() {
        return (state.graph.clone(), Move::Stay, 1.0);
    }
    let mv = moves[rng.gen_range(0..moves.len())];
    let candidate = apply_move(&state.graph, mv);
    let n_cand = legal_moves(&candidate, c, max_indegree).len().max(1);
    let q_ratio = moves.len() as f64 / n_cand as f64;
    (candidate, mv, q_ratio)
}

/// Laplace-smoothed empirical conditional of `node` given `parents`.
fn empirical_conditional(
    data: &DataTable,
    node: usize,
    parents: &std::collections::BTreeSet<usize>,
) -> Vec<Vec<f64>> {
    let cards = &data.cards;
    let card = cards[node];
    let n_cfg = config_count(parents, cards);
    let mut counts = vec![0.0f64; n_cfg * card];
    for r in 0..data.n_rows() {
        let idx = config_index(parents, cards, |p| data.value(r, p));
        counts[idx * card + data.value(r, node)] += 1.0;
    }
    (0..n_cfg)
        .map(|cfg| {
            let slice = &counts[cfg * card..(cfg + 1) * card];
            let total: f64 = slice.iter().sum();
            let denom = total + card as f64;
            slice.iter().map(|&c| (c + 1.0) / denom).collect()
        })
        .collect()
}

/// Marginalizes `lost` out of a CPT, weighting by the empirical distribution
/// of the lost parent given the remaining parents, then renormalizing.
fn marginalize_cpt(
    old_cpt: &Cpt,
    old_parents: &std::collections::BTreeSet<usize>,
    lost: usize,
    data: &DataTable,
) -> Cpt {
    let cards = &data.cards;
    let mut new_parents = old_parents.clone();
    new_parents.remove(&lost);
    let weights = empirical_conditional(data, lost, &new_parents);
    let n_cfg = config_count(&new_parents, cards);
    let new_list: Vec<usize> = new_parents.iter().copied().collect();
    let card = old_cpt.rows[0].len();
    let mut rows = Vec::with_capacity(n_cfg);
    for cfg in 0..n_cfg {
        let mut vals: HashMap<usize, usize> = HashMap::new();
        let mut rem = cfg;
        for &p in new_list.iter().rev() {
            vals.insert(p, rem % cards[p]);
            rem /= cards[p];
        }
        let mut row = vec![0.0f64; card];
        for y in 0..cards[lost] {
            vals.insert(lost, y);
            let old_idx = config_index(old_parents, cards, |p| vals[&p]);
            let w = weights[cfg][y];
            for (x, acc) in row.iter_mut().enumerate() {
                *acc += w * old_cpt.rows[old_idx][x];
            }
        }
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for p in row.iter_mut() {
                *p /= sum;
            }
        } else {
            row = vec![1.0 / card as f64; card];
        }
        rows.push(row);
    }
    Cpt { rows }
}

const BOOTSTRAP_RESAMPLES: usize = 20;
const FIT_MAX_ITER: usize = 1000;

/// The fitted concentration for one parent configuration, or the smoothed
/// empirical row used when the fit has no finite maximizer.
#[derive(Debug, Clone)]
enum ConfigFit {
    Alpha(Vec<f64>),
    Fallback(Vec<f64>),
}

/// Fits Dirichlet concentrations for nodes that gained a parent, memoizing
/// the per-family fits: chains revisit the same families constantly and the
/// fit target is a function of the family alone. Row draws stay fresh.
pub struct CptRefitter {
    cache: HashMap<(usize, Vec<usize>), Vec<ConfigFit>>,
}

impl CptRefitter {
    pub fn new() -> Self {
        CptRefitter {
            cache: HashMap::new(),
        }
    }

    fn fits_for(
        &mut self,
        node: usize,
        new_parents: &std::collections::BTreeSet<usize>,
        data: &DataTable,
        rng: &mut Rng,
    ) -> &[ConfigFit] {
        let key = (node, new_parents.iter().copied().collect::<Vec<_>>());
        self.cache.entry(key).or_insert_with(|| {
            let cards = &data.cards;
            let card = cards[node];
            let n_cfg = config_count(new_parents, cards);
            let mut strata: Vec<Vec<usize>> = vec![Vec::new(); n_cfg];
            for r in 0..data.n_rows() {
                let idx = config_index(new_parents, cards, |p| data.value(r, p));
                strata[idx].push(data.value(r, node));
            }
            strata
                .iter()
                .map(|stratum| {
                    let mut log_p_bar = vec![0.0f64; card];
                    for _ in 0..BOOTSTRAP_RESAMPLES {
                        let mut counts = vec![0.0f64; card];
                        for _ in 0..stratum.len() {
                            counts[stratum[rng.gen_range(0..stratum.len())]] += 1.0;
                        }
                        let total: f64 = counts.iter().sum();
                        let denom = total + card as f64;
                        for (k, lp) in log_p_bar.iter_mut().enumerate() {
                            *lp += ((counts[k] + 1.0) / denom).ln();
                        }
                    }
                    for lp in log_p_bar.iter_mut() {
                        *lp /= BOOTSTRAP_RESAMPLES as f64;
                    }
                    match fit_dirichlet(&log_p_bar, FIT_MAX_ITER) {
                        DirichletFit::Converged { alpha, .. } => ConfigFit::Alpha(alpha),
                        DirichletFit::Diverged => {
                            log::debug!(
                                "dirichlet fit diverged for node {node}; using smoothed mle row"
                            );
                            let mut counts = vec![1.0f64; card];
                            for &v in stratum {
                                counts[v] += 1.0;
                            }
                            let total: f64 = counts.iter().sum();
                            ConfigFit::Fallback(counts.into_iter().map(|c| c / total).collect())
                        }
                    }
                })
                .collect()
        })
    }

    fn refit_gained_cpt(
        &mut self,
        node: usize,
        new_parents: &std::collections::BTreeSet<usize>,
        data: &DataTable,
        beta: f64,
        rng: &mut Rng,
    ) -> Cpt {
        // Two passes so the cache borrow ends before sampling.
        let fits: Vec<ConfigFit> = self.fits_for(node, new_parents, data, rng).to_vec();
        let rows = fits
            .into_iter()
            .map(|fit| match fit {
                ConfigFit::Alpha(alpha) => {
                    let scaled: Vec<f64> = alpha.iter().map(|a| (beta * a).max(1e-6)).collect();
                    loop {
                        let draws: Vec<f64> = scaled
                            .iter()
                            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
                            .collect();
                        let sum: f64 = draws.iter().sum();
                        if sum > 1e-300 {
                            break draws.into_iter().map(|d| d / sum).collect();
                        }
                    }
                }
                ConfigFit::Fallback(row) => row,
            })
            .collect();
        Cpt { rows }
    }

    /// Re-estimates the CPT set for `candidate`, reusing the previous tables
    /// for untouched nodes. Nodes that lost a parent are marginalized; nodes
    /// that gained one get a Dirichlet-sampled refit.
    pub fn reestimate_cpts(
        &mut self,
        prev: &ChainState,
        candidate: &Dag,
        aug: &AugmentedDataset,
        beta: f64,
        rng: &mut Rng,
    ) -> Vec<Arc<Cpt>> {
        let data = &aug.table;
        let mut out = Vec::with_capacity(candidate.n());
        for v in 0..candidate.n() {
            let old_pa = prev.graph.parents_of(v);
            let new_pa = candidate.parents_of(v);
            if old_pa == new_pa {
                out.push(Arc::clone(&prev.cpts[v]));
                continue;
            }
            let lost: Vec<usize> = old_pa.difference(new_pa).copied().collect();
            let gained: Vec<usize> = new_pa.difference(old_pa).copied().collect();
            debug_assert!(lost.len() + gained.len() == 1, "single-move contract");
            if gained.is_empty() {
                out.push(Arc::new(marginalize_cpt(&prev.cpts[v], old_pa, lost[0], data)));
            } else {
                out.push(Arc::new(self.refit_gained_cpt(v, new_pa, data, beta, rng)));
            }
        }
        out
    }
}

impl Default for CptRefitter {
    fn default() -> Self {
        Self::new()
    }
}

/// One-shot re-estimation without a persistent fit cache.
pub fn reestimate_cpts(
    prev: &ChainState,
    candidate: &Dag,
    aug: &AugmentedDataset,
    beta: f64,
    rng: &mut Rng,
) -> Vec<Arc<Cpt>> {
    CptRefitter::new().reestimate_cpts(prev, candidate, aug, beta, rng)
}

/// One Metropolis-Hastings step: propose, re-estimate, score, accept.
pub fn mh_step(
    state: &ChainState,
    aug: &AugmentedDataset,
    c: &JciConstraints,
    cfg: &McmcConfig,
    scorer: &mut Scorer,
    refitter: &mut CptRefitter,
    rng: &mut Rng,
) -> ChainState {
    let (candidate, mv, q_ratio) = propose(state, c, cfg.max_indegree, rng);
    if mv == Move::Stay {
        let mut next = state.clone();
        next.step += 1;
        return next;
    }
    let cand_cpts = refitter.reestimate_cpts(state, &candidate, aug, cfg.dirichlet_beta, rng);
    let cand_score = scorer.graph_score(&candidate);
    let accept_prob = match cfg.acceptance {
        AcceptanceRule::FullMh => (q_ratio * (cand_score - state.score).exp()).min(1.0),
        AcceptanceRule::ScoreRatio => (cand_score / state.score).min(1.0),
    };
    let accepted = accept_prob >= 1.0 || rng.gen::<f64>() < accept_prob;
    let mut next = if accepted {
        debug_assert!(candidate.is_acyclic());
        debug_assert!(candidate
            .edges()
            .into_iter()
            .all(|(a, b)| edge_is_legal(c, a, b)));
        ChainState {
            graph: candidate,
            cpts: cand_cpts,
            score: cand_score,
            step: state.step,
        }
    } else {
        state.clone()
    };
    next.step += 1;
    next
}

/// Greedy hill climbing on the decomposable score with single-edge moves,
/// restricted to the legal edge space. The sweep order is drawn from `rng`,
/// so the result is reproducible given the same stream.
pub fn proxy_seed(
    aug: &AugmentedDataset,
    c: &JciConstraints,
    max_indegree: usize,
    rng: &mut Rng,
) -> Dag {
    let mut scorer = Scorer::new(&aug.table, ScoreKind::Bic);
    let mut graph = Dag::new(c.n_nodes());
    loop {
        let mut moves = legal_moves(&graph, c, max_indegree);
        moves.shuffle(rng);
        let mut best: Option<(f64, Move)> = None;
        for mv in moves {
            let cand = apply_move(&graph, mv);
            let mut delta = 0.0;
            for v in 0..graph.n() {
                if graph.parents_of(v) != cand.parents_of(v) {
                    let old = graph.parents_of(v).clone();
                    let new = cand.parents_of(v).clone();
                    delta += scorer.family_score(v, &new) - scorer.family_score(v, &old);
                }
            }
            if delta > 1e-9 && best.is_none_or(|(b, _)| delta > b) {
                best = Some((delta, mv));
            }
        }
        match best {
            Some((_, mv)) => graph = apply_move(&graph, mv),
            None => break,
        }
    }
    graph
}

/// A random DAG in the legal space, used as an alternative chain seed.
pub fn random_legal_dag(c: &JciConstraints, max_indegree: usize, rng: &mut Rng) -> Dag {
    let d = c.system_count;
    let n = c.n_nodes();
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let p_sys = (2.0 / (d.max(2) as f64 - 1.0)).min(0.5);
    let mut dag = Dag::new(n);
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.gen_bool(p_sys) && dag.in_degree(order[j]) < max_indegree {
                dag.add_edge(order[i], order[j]);
            }
        }
    }
    let p_env = (1.5 / d.max(2) as f64).min(0.5);
    for env in d..n {
        for t in 0..d {
            if rng.gen_bool(p_env) && dag.in_degree(t) < max_indegree {
                dag.add_edge(env, t);
            }
        }
    }
    dag
}

/// Everything a self-augmentation run produces: the pairs plus per-chain
/// score traces for convergence diagnostics.
pub struct SelfAugmentation {
    pub pairs: Vec<TrainingPair>,
    pub score_traces: Vec<Vec<f64>>,
}

fn init_chain(
    aug: &AugmentedDataset,
    c: &JciConstraints,
    cfg: &McmcConfig,
    scorer: &mut Scorer,
    rng: &mut Rng,
) -> ChainState {
    let graph = match cfg.seed_mode {
        SeedMode::Proxy => proxy_seed(aug, c, cfg.max_indegree, rng),
        SeedMode::Random => random_legal_dag(c, cfg.max_indegree, rng),
    };
    let cpts = mle_cpts(&graph, &aug.table, 1.0)
        .into_iter()
        .map(Arc::new)
        .collect();
    let score = scorer.graph_score(&graph);
    ChainState {
        graph,
        cpts,
        score,
        step: 0,
    }
}

fn net_from_state(aug: &AugmentedDataset, state: &ChainState) -> DiscreteBayesNet {
    DiscreteBayesNet {
        nodes: aug.table.columns.clone(),
        cards: aug.table.cards.clone(),
        dag: state.graph.clone(),
        cpts: state.cpts.iter().map(|c| (**c).clone()).collect(),
    }
}

/// Runs `cfg.n_chains` independent chains and collects `cfg.n_pairs` training
/// pairs. Each chain is a deterministic function of `(seed, chain index)`, so
/// output does not depend on thread scheduling.
pub fn run_self_augmentation(
    aug: &AugmentedDataset,
    c: &JciConstraints,
    cfg: &McmcConfig,
    seed: u64,
) -> SelfAugmentation {
    cfg.validate();
    let quotas: Vec<usize> = (0..cfg.n_chains)
        .map(|i| cfg.n_pairs / cfg.n_chains + usize::from(i < cfg.n_pairs % cfg.n_chains))
        .collect();
    let results: Vec<(Vec<TrainingPair>, Vec<f64>)> = quotas
        .par_iter()
        .enumerate()
        .map(|(chain_id, &quota)| {
            let mut rng = stage_rng(seed, "ismcmc-chain", chain_id as u64);
            let mut scorer = Scorer::new(&aug.table, cfg.score);
            let mut refitter = CptRefitter::new();
            let mut state = init_chain(aug, c, cfg, &mut scorer, &mut rng);
            let mut pairs = Vec::with_capacity(quota);
            let mut trace = Vec::new();
            let total_steps = cfg.burn_in + cfg.thin * quota;
            for step in 0..total_steps {
                state = mh_step(&state, aug, c, cfg, &mut scorer, &mut refitter, &mut rng);
                if step % 25 == 0 {
                    trace.push(state.score);
                }
                let past_burn_in = step + 1 > cfg.burn_in;
                if past_burn_in && (step + 1 - cfg.burn_in) % cfg.thin == 0 && pairs.len() < quota {
                    let net = net_from_state(aug, &state);
                    let data = forward_sample(&net, cfg.samples_per_pair, &mut rng);
                    pairs.push(TrainingPair {
                        graph: state.graph.clone(),
                        data,
                        chain: chain_id,
                        step: state.step,
                    });
                }
            }
            (pairs, trace)
        })
        .collect();
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    let mut score_traces = Vec::with_capacity(cfg.n_chains);
    for (p, t) in results {
        pairs.extend(p);
        score_traces.push(t);
    }
    SelfAugmentation {
        pairs,
        score_traces,
    }
}

/// Baseline data strategy: random legal graphs with random tables, not
/// fitted to any data. Used for training-data-quality comparisons.
pub fn purely_random_pairs(
    aug: &AugmentedDataset,
    c: &JciConstraints,
    cfg: &McmcConfig,
    seed: u64,
) -> Vec<TrainingPair> {
    let mut rng = stage_rng(seed, "purely-random-pairs", 0);
    let cards = &aug.table.cards;
    (0..cfg.n_pairs)
        .map(|i| {
            let graph = random_legal_dag(c, cfg.max_indegree, &mut rng);
            let cpts: Vec<Cpt> = (0..graph.n())
                .map(|v| {
                    let n_cfg = config_count(graph.parents_of(v), cards);
                    let rows = (0..n_cfg)
                        .map(|_| {
                            let raw: Vec<f64> = (0..cards[v])
                                .map(|_| Gamma::new(1.0, 1.0).unwrap().sample(&mut rng))
                                .collect();
                            let sum: f64 = raw.iter().sum::<f64>().max(1e-300);
                            raw.into_iter().map(|x| x / sum).collect()
                        })
                        .collect();
                    Cpt { rows }
                })
                .collect();
            let net = DiscreteBayesNet {
                nodes: aug.table.columns.clone(),
                cards: cards.clone(),
                dag: graph.clone(),
                cpts,
            };
            let data = forward_sample(&net, cfg.samples_per_pair, &mut rng);
            TrainingPair {
                graph,
                data,
                chain: 0,
                step: i as u64,
            }
        })
        .collect()
}
