//! Two-phase supervised causal learner: a cascade of per-order skeleton
//! classifiers, an orientation classifier over unshielded triples, forced
//! environment-edge orientations, Meek closure, and intervention-target
//! extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::InterventionFamily;
use crate::citest::{CiSource, G2Source};
use crate::featurize::{
    find_sepsets, orientation_features, skeleton_features, ConfMap, EmbeddingBasis,
    FeatureConfig, OrientationFeature, SkeletonFeature, EMBED_M, EMBED_STATS,
};
use crate::graphlib::{
    d_separated, meek_closure, skeleton_of, v_structures_of, Pdag, UnshieldedTriple,
};
use crate::ismcmc::TrainingPair;
use crate::jci::{AugmentedDataset, JciConstraints};

mod gbdt;
pub use gbdt::{GbdtModel, GbdtParams};

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("bundle format version {got} unsupported (expected {want})")]
    Version { got: u32, want: u32 },
}

/// A binary classifier with deterministic probabilities and bit-exact
/// persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassifierKind {
    Gbdt(GbdtModel),
    /// Degenerate-label fallback: always predicts the stored rate.
    Constant(f64),
    /// Rule classifier keeping an edge when no enumerated conditioning set
    /// drove its dependence to zero. Reads the embedded-set statistics.
    StaticSkeleton {
        min_index: usize,
        count_index: usize,
        eps: f64,
    },
    /// Rule classifier reading the overlap of the collider candidate with
    /// the separating-set union; predicts "behaves like a separator".
    StaticOrientation { olp_index: usize },
}

impl ClassifierKind {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            ClassifierKind::Gbdt(m) => m.predict_proba(x),
            ClassifierKind::Constant(p) => *p,
            ClassifierKind::StaticSkeleton {
                min_index,
                count_index,
                eps,
            } => {
                if x[*count_index] == 0.0 || x[*min_index] > *eps {
                    1.0
                } else {
                    0.0
                }
            }
            ClassifierKind::StaticOrientation { olp_index } => {
                if x[*olp_index] > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Fits the default tree ensemble, falling back to a constant on
    /// one-class data.
    pub fn fit(rows: &[Vec<f64>], labels: &[bool], params: &GbdtParams) -> ClassifierKind {
        let pos = labels.iter().filter(|&&y| y).count();
        if rows.is_empty() || pos == 0 || pos == labels.len() {
            let rate = if rows.is_empty() {
                0.5
            } else {
                pos as f64 / labels.len() as f64
            };
            log::warn!(
                "degenerate training labels ({pos}/{} positive); using constant classifier",
                labels.len()
            );
            return ClassifierKind::Constant(rate);
        }
        ClassifierKind::Gbdt(GbdtModel::fit(rows, labels, params))
    }
}

/// Learner configuration; thresholds and caps live here and are persisted
/// with the model bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SclConfig {
    pub k_max: usize,
    pub skeleton_threshold: f64,
    pub orientation_threshold: f64,
    pub feature: FeatureConfig,
    pub embed_m: usize,
    pub basis_seed: u64,
    pub gbdt: GbdtParams,
    /// Prune with ground-truth separation during cascade training instead of
    /// replaying model predictions.
    pub teacher_forcing: bool,
    /// Pruning threshold used when replaying the cascade on training pairs.
    /// Deliberately permissive so borderline negatives survive into the
    /// higher orders' training sets the way they do on test data.
    pub replay_threshold: f64,
    /// Never prune known environment-target edges during discovery.
    pub hard_include_known: bool,
}

impl Default for SclConfig {
    fn default() -> Self {
        SclConfig {
            k_max: 4,
            skeleton_threshold: 0.6,
            orientation_threshold: 0.1,
            feature: FeatureConfig::default(),
            embed_m: EMBED_M,
            basis_seed: 0xb0a5,
            gbdt: GbdtParams::default(),
            teacher_forcing: false,
            replay_threshold: 0.2,
            hard_include_known: false,
        }
    }
}

/// The trained model: one skeleton classifier per order, one orientation
/// classifier, the embedding basis, and configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TiclModel {
    pub skeleton_models: Vec<ClassifierKind>,
    pub orientation_model: ClassifierKind,
    pub basis: EmbeddingBasis,
    pub config: SclConfig,
}

/// Discovery output over the augmented node set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryResult {
    pub graph: Pdag,
    pub targets: BTreeMap<usize, BTreeSet<usize>>,
    pub system_view: Pdag,
}

/// The complete legal skeleton: all pairs adjacent except environment pairs.
pub fn legal_complete_skeleton(c: &JciConstraints) -> Pdag {
    let n = c.n_nodes();
    let mut g = Pdag::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if c.is_env(i) && c.is_env(j) {
                continue;
            }
            g.add_undirected(i, j);
        }
    }
    g
}

/// Order-zero confidences: marginal dependence strengths normalized by
/// their maximum over the working graph's edges. Strength rather than the
/// z scale keeps the ranking tie-free when many edges saturate the z cap.
fn initial_conf(source: &dyn CiSource, g: &Pdag) -> ConfMap {
    let mut conf = ConfMap::new();
    let edges = g.undirected_edges();
    let scores: Vec<f64> = edges.iter().map(|&(i, j)| source.strength(i, j, &[])).collect();
    let max = scores.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    for (&(i, j), &z) in edges.iter().zip(&scores) {
        conf.set(i, j, z / max);
    }
    conf
}

/// Ground-truth pruning for cascade training: true when some conditioning
/// set from the featurization search space separates the pair in the true
/// graph.
fn teacher_prunes(
    pair_graph: &crate::graphlib::Dag,
    working: &Pdag,
    i: usize,
    j: usize,
    k: usize,
    cfg: &FeatureConfig,
    basis_seed: u64,
) -> bool {
    let nbd_i: Vec<usize> = working.neighbors(i).into_iter().filter(|&q| q != j).collect();
    let nbd_j: Vec<usize> = working.neighbors(j).into_iter().filter(|&q| q != i).collect();
    if d_separated(pair_graph, i, j, &BTreeSet::new()) {
        return true;
    }
    let probe = |side: &[usize], salt: u64| -> bool {
        let sets =
            crate::featurize::candidate_condition_sets(side, k, cfg.subset_cap, basis_seed ^ salt);
        sets.iter().any(|s| {
            let z: BTreeSet<usize> = s.iter().copied().collect();
            d_separated(pair_graph, i, j, &z)
        })
    };
    probe(&nbd_i, 0x7e) || probe(&nbd_j, 0x7f)
}

struct CascadeReplay<'a> {
    source: G2Source<'a>,
    working: Pdag,
    conf: ConfMap,
}

/// Trains the two-phase model on graph/data training pairs.
///
/// The skeleton cascade replays each pair from the complete legal skeleton.
/// Features at order `k` use the order `k - 1` survivors; labels come from
/// the pair's true graph. Between orders the working graphs are pruned by
/// ground-truth separation (or by the freshly fitted classifier when teacher
/// forcing is off). The orientation classifier is then fitted on the final
/// skeletons' unshielded triples.
pub fn train(pairs: &[TrainingPair], c: &JciConstraints, cfg: &SclConfig) -> TiclModel {
    assert!(!pairs.is_empty(), "training requires at least one pair");
    let basis = EmbeddingBasis::new(cfg.embed_m, cfg.basis_seed);
    let fcfg = &cfg.feature;

    let mut replays: Vec<CascadeReplay> = pairs
        .par_iter()
        .map(|pair| {
            let source = G2Source::new(&pair.data);
            let working = legal_complete_skeleton(c);
            let conf = initial_conf(&source, &working);
            CascadeReplay {
                source,
                working,
                conf,
            }
        })
        .collect();

    let mut skeleton_models = Vec::with_capacity(cfg.k_max);
    for k in 1..=cfg.k_max {
        // Features and labels across pairs, in deterministic order.
        let per_pair: Vec<Vec<SkeletonFeature>> = replays
            .par_iter()
            .enumerate()
            .map(|(p, replay)| {
                replay
                    .working
                    .undirected_edges()
                    .into_iter()
                    .map(|(i, j)| {
                        let mut f = skeleton_features(
                            &replay.source,
                            &replay.working,
                            &replay.conf,
                            (i, j),
                            k,
                            &basis,
                            fcfg,
                        );
                        f.label = Some(pairs[p].graph.adjacent(i, j));
                        f
                    })
                    .collect()
            })
            .collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for feats in &per_pair {
            for f in feats {
                rows.push(f.vector.clone());
                labels.push(f.label.unwrap());
            }
        }
        let model = ClassifierKind::fit(&rows, &labels, &cfg.gbdt);

        // Cascade replay prunes with out-of-fold models so the training
        // survivors at the next order look like discovery-time survivors;
        // an in-sample pruner would remove every memorized negative and
        // starve the higher orders of them.
        let fold_models: Vec<ClassifierKind> = if cfg.teacher_forcing {
            Vec::new()
        } else {
            (0..2)
                .map(|fold| {
                    let mut fr = Vec::new();
                    let mut fl = Vec::new();
                    for (p, feats) in per_pair.iter().enumerate() {
                        if p % 2 != fold {
                            for f in feats {
                                fr.push(f.vector.clone());
                                fl.push(f.label.unwrap());
                            }
                        }
                    }
                    ClassifierKind::fit(&fr, &fl, &cfg.gbdt)
                })
                .collect()
        };

        // Confidence update and pruning for the next order.
        replays = replays
            .into_par_iter()
            .zip(per_pair.into_par_iter())
            .enumerate()
            .map(|(p, (mut replay, feats))| {
                let pruner = if cfg.teacher_forcing {
                    None
                } else {
                    Some(&fold_models[p % 2])
                };
                for f in &feats {
                    let prob = pruner.unwrap_or(&model).predict_proba(&f.vector);
                    replay.conf.set(f.pair.0, f.pair.1, prob);
                }
                for f in &feats {
                    let (i, j) = f.pair;
                    let prune = if cfg.teacher_forcing {
                        teacher_prunes(
                            &pairs[p].graph,
                            &replay.working,
                            i,
                            j,
                            k,
                            fcfg,
                            basis.rng_seed,
                        )
                    } else {
                        replay.conf.get(i, j) < cfg.replay_threshold
                    };
                    if prune {
                        replay.working.remove_edge(i, j);
                    }
                }
                replay
            })
            .collect();
        skeleton_models.push(model);
    }

    // Orientation phase over the final skeletons.
    let per_pair: Vec<Vec<OrientationFeature>> = replays
        .par_iter()
        .enumerate()
        .map(|(p, replay)| {
            let truth_vs = v_structures_of(&pairs[p].graph);
            replay
                .working
                .unshielded_triples()
                .into_iter()
                .map(|t| {
                    let sepsets = find_sepsets(
                        &replay.source,
                        &replay.working,
                        (t.a, t.b),
                        fcfg.alpha,
                        fcfg.max_sepset_size,
                    );
                    let mut f =
                        orientation_features(&replay.source, &replay.working, &sepsets, t, fcfg);
                    f.label = Some(truth_vs.contains(&t));
                    f
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for feats in &per_pair {
        for f in feats {
            rows.push(f.vector.clone());
            // The classifier predicts separator-like behavior, which is the
            // complement of being a v-structure.
            labels.push(!f.label.unwrap());
        }
    }
    let orientation_model = ClassifierKind::fit(&rows, &labels, &cfg.gbdt);

    TiclModel {
        skeleton_models,
        orientation_model,
        basis,
        config: cfg.clone(),
    }
}

/// Rule-based model reproducing the constraint-based pipeline: an edge
/// survives while no conditioning set kills its dependence, and a triple is a
/// v-structure when the collider candidate overlaps no separating set.
/// Intended for use with an exact conditional-independence oracle.
pub fn static_pc_classifiers(cfg: &SclConfig) -> TiclModel {
    let basis = EmbeddingBasis::new(cfg.embed_m, cfg.basis_seed);
    let m = cfg.embed_m;
    let skeleton_models = (0..cfg.k_max)
        .map(|_| ClassifierKind::StaticSkeleton {
            min_index: m + 1,
            count_index: m + EMBED_STATS - 1,
            eps: 1e-9,
        })
        .collect();
    TiclModel {
        skeleton_models,
        orientation_model: ClassifierKind::StaticOrientation { olp_index: 30 },
        basis,
        config: cfg.clone(),
    }
}

/// Known intervention targets, as forced environment edges.
fn known_env_edges(c: &JciConstraints, fam: &InterventionFamily) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (k, regime) in fam.regimes.iter().enumerate().skip(1) {
        let env = c.system_count + k - 1;
        for &t in &regime.targets {
            out.insert((env, t));
        }
    }
    out
}

/// Runs discovery against an arbitrary dependence source. The data-backed
/// entry point is [`discover`].
pub fn discover_with_source(
    model: &TiclModel,
    source: &dyn CiSource,
    c: &JciConstraints,
    known: Option<&InterventionFamily>,
) -> DiscoveryResult {
    let cfg = &model.config;
    let fcfg = &cfg.feature;
    let forced: BTreeSet<(usize, usize)> = known
        .map(|fam| known_env_edges(c, fam))
        .unwrap_or_default();

    let mut working = legal_complete_skeleton(c);
    let mut conf = initial_conf(source, &working);
    let mut sepsets: BTreeMap<(usize, usize), Vec<BTreeSet<usize>>> = BTreeMap::new();

    for k in 1..=cfg.k_max {
        let edges = working.undirected_edges();
        let feats: Vec<SkeletonFeature> = edges
            .par_iter()
            .map(|&(i, j)| {
                skeleton_features(source, &working, &conf, (i, j), k, &model.basis, fcfg)
            })
            .collect();
        let mut removed = Vec::new();
        for f in &feats {
            let (i, j) = f.pair;
            let prob = model.skeleton_models[k - 1].predict_proba(&f.vector);
            conf.set(i, j, prob);
            let keep_forced = cfg.hard_include_known && forced.contains(&(i.min(j), i.max(j)))
                || cfg.hard_include_known && forced.contains(&(i.max(j), i.min(j)));
            if prob < cfg.skeleton_threshold && !keep_forced {
                removed.push((i, j));
            }
        }
        for &(i, j) in &removed {
            working.remove_edge(i, j);
        }
        // Separating sets are recorded against the pruned graph.
        let found: Vec<((usize, usize), Vec<BTreeSet<usize>>)> = removed
            .par_iter()
            .map(|&(i, j)| {
                (
                    (i, j),
                    find_sepsets(source, &working, (i, j), fcfg.alpha, fcfg.max_sepset_size),
                )
            })
            .collect();
        sepsets.extend(found);
    }

    // Phase 2: orient v-structures by classifier.
    let mut graph = working.clone();
    let triples = working.unshielded_triples();
    let empty: Vec<BTreeSet<usize>> = Vec::new();
    let scored: Vec<(UnshieldedTriple, f64)> = triples
        .par_iter()
        .map(|&t| {
            let ss = sepsets.get(&(t.a, t.b)).unwrap_or(&empty);
            let f = orientation_features(source, &working, ss, t, fcfg);
            (t, model.orientation_model.predict_proba(&f.vector))
        })
        .collect();
    for (t, p_separator) in scored {
        if p_separator >= cfg.orientation_threshold {
            continue;
        }
        if c.is_env(t.c) {
            log::debug!(
                "skipping collider orientation into environment node {}",
                t.c
            );
            continue;
        }
        for arm in [t.a, t.b] {
            if graph.has_undirected(arm, t.c) {
                graph.add_directed(arm, t.c);
                if !graph.directed_part_is_acyclic() {
                    log::debug!("dropping cycle-inducing orientation {arm} -> {}", t.c);
                    graph.remove_edge(arm, t.c);
                    graph.add_undirected(arm, t.c);
                }
            } else if graph.has_directed(t.c, arm) {
                log::debug!(
                    "orientation conflict on ({arm}, {}) dropped; earlier direction kept",
                    t.c
                );
            }
        }
    }

    // Phase 3: forced environment orientations take precedence.
    for env in c.system_count..c.n_nodes() {
        for t in graph.undirected_neighbors(env) {
            graph.add_directed(env, t);
        }
    }

    // Phase 4: propagate.
    let graph = meek_closure(&graph).expect("directed part stays acyclic");

    // Phase 5: read intervention targets off the environment nodes.
    let targets = detect_targets_in(&graph, c);
    let system_view = graph.restrict(c.system_count);
    DiscoveryResult {
        graph,
        targets,
        system_view,
    }
}

/// Two-phase discovery on an augmented dataset.
pub fn discover(
    model: &TiclModel,
    aug: &AugmentedDataset,
    known: Option<&InterventionFamily>,
) -> DiscoveryResult {
    let source = G2Source::new(&aug.table);
    discover_with_source(model, &source, &aug.constraints(), known)
}

fn detect_targets_in(graph: &Pdag, c: &JciConstraints) -> BTreeMap<usize, BTreeSet<usize>> {
    let mut out = BTreeMap::new();
    for k in 1..=c.env_count {
        let env = c.system_count + k - 1;
        let targets: BTreeSet<usize> = graph
            .children(env)
            .into_iter()
            .filter(|&t| t < c.system_count)
            .collect();
        out.insert(k, targets);
    }
    out
}

/// Predicted intervention targets per regime: the environment nodes' system
/// children.
pub fn detect_targets(result: &DiscoveryResult) -> BTreeMap<usize, BTreeSet<usize>> {
    result.targets.clone()
}

/// Ground-truth labels for a training pair, as pure graph queries.
pub fn skeleton_label(pair: &TrainingPair, i: usize, j: usize) -> bool {
    skeleton_of(&pair.graph).adjacent(i, j)
}

pub fn orientation_label(pair: &TrainingPair, t: UnshieldedTriple) -> bool {
    v_structures_of(&pair.graph).contains(&t)
}

impl TiclModel {
    /// Writes the bundle: config, embedding basis, per-order skeleton
    /// classifiers, orientation classifier.
    pub fn save_bundle(&self, dir: &Path) -> Result<(), ModelError> {
        std::fs::create_dir_all(dir)?;
        #[derive(Serialize)]
        struct Meta<'a> {
            format_version: u32,
            config: &'a SclConfig,
        }
        std::fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(&Meta {
                format_version: MODEL_FORMAT_VERSION,
                config: &self.config,
            })
            .map_err(|e| ModelError::Format(e.to_string()))?,
        )?;
        std::fs::write(
            dir.join("basis.json"),
            serde_json::to_string(&self.basis).map_err(|e| ModelError::Format(e.to_string()))?,
        )?;
        for (k, m) in self.skeleton_models.iter().enumerate() {
            std::fs::write(
                dir.join(format!("skeleton_k{}.json", k + 1)),
                serde_json::to_string(m).map_err(|e| ModelError::Format(e.to_string()))?,
            )?;
        }
        std::fs::write(
            dir.join("orientation.json"),
            serde_json::to_string(&self.orientation_model)
                .map_err(|e| ModelError::Format(e.to_string()))?,
        )?;
        Ok(())
    }

    pub fn load_bundle(dir: &Path) -> Result<TiclModel, ModelError> {
        #[derive(Deserialize)]
        struct Meta {
            format_version: u32,
            config: SclConfig,
        }
        let meta: Meta = serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)
            .map_err(|e| ModelError::Format(e.to_string()))?;
        if meta.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Version {
                got: meta.format_version,
                want: MODEL_FORMAT_VERSION,
            });
        }
        let basis: EmbeddingBasis =
            serde_json::from_str(&std::fs::read_to_string(dir.join("basis.json"))?)
                .map_err(|e| ModelError::Format(e.to_string()))?;
        let mut skeleton_models = Vec::with_capacity(meta.config.k_max);
        for k in 1..=meta.config.k_max {
            let m: ClassifierKind = serde_json::from_str(&std::fs::read_to_string(
                dir.join(format!("skeleton_k{k}.json")),
            )?)
            .map_err(|e| ModelError::Format(e.to_string()))?;
            skeleton_models.push(m);
        }
        let orientation_model: ClassifierKind =
            serde_json::from_str(&std::fs::read_to_string(dir.join("orientation.json"))?)
                .map_err(|e| ModelError::Format(e.to_string()))?;
        Ok(TiclModel {
            skeleton_models,
            orientation_model,
            basis,
            config: meta.config,
        })
    }
}
