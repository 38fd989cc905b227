//! File layouts for experiment bundles and training-pair archives.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::bayesnet::{DataTable, DiscreteBayesNet, InterventionFamily};
use crate::graphlib::Pdag;
use crate::ismcmc::TrainingPair;

/// A simulated experiment: the generating network, the regime family, one
/// table per regime, and the ground-truth augmented graph.
pub struct DatasetBundle {
    pub net: DiscreteBayesNet,
    pub fam: InterventionFamily,
    pub datasets: Vec<DataTable>,
    pub truth_icpdag: Pdag,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    seed: u64,
    columns: Vec<String>,
    cards: Vec<usize>,
    family: InterventionFamily,
}

pub fn save_bundle_files(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("network.json"), bundle.net.to_json())?;
    let manifest = BundleManifest {
        seed: bundle.seed,
        columns: bundle.net.nodes.clone(),
        cards: bundle.net.cards.clone(),
        family: bundle.fam.clone(),
    };
    std::fs::write(
        dir.join("regimes.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    for (k, table) in bundle.datasets.iter().enumerate() {
        let name = if k == 0 {
            "obs.csv".to_string()
        } else {
            format!("int_{k}.csv")
        };
        std::fs::write(dir.join(name), table.to_csv())?;
    }
    // Ground truth: the system DAG as a fully directed graph, and the
    // augmented identifiable structure.
    let mut truth = Pdag::new(bundle.net.n());
    for (a, b) in bundle.net.dag.edges() {
        truth.add_directed(a, b);
    }
    std::fs::write(dir.join("truth_graph.txt"), truth.to_edge_list())?;
    std::fs::write(
        dir.join("truth_icpdag.txt"),
        bundle.truth_icpdag.to_edge_list(),
    )?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<DatasetBundle> {
    let manifest: BundleManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("regimes.json"))?)
            .context("reading regimes.json")?;
    let net = DiscreteBayesNet::from_json(&std::fs::read_to_string(dir.join("network.json"))?)?;
    let mut datasets = Vec::with_capacity(manifest.family.regimes.len());
    for k in 0..manifest.family.regimes.len() {
        let name = if k == 0 {
            "obs.csv".to_string()
        } else {
            format!("int_{k}.csv")
        };
        let text = std::fs::read_to_string(dir.join(&name)).with_context(|| name.clone())?;
        datasets.push(DataTable::from_csv(&text, Some(manifest.cards.clone()))?);
    }
    let truth_icpdag = Pdag::from_edge_list(&std::fs::read_to_string(dir.join("truth_icpdag.txt"))?)?;
    Ok(DatasetBundle {
        net,
        fam: manifest.family,
        datasets,
        truth_icpdag,
        seed: manifest.seed,
    })
}

/// Reads the regime family out of a bundle manifest.
pub fn load_family(path: &Path) -> Result<InterventionFamily> {
    let manifest: BundleManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(manifest.family)
}

#[derive(Serialize, Deserialize)]
struct PairsMeta {
    count: usize,
    system_count: usize,
    env_count: usize,
}

#[derive(Serialize, Deserialize)]
struct PairMeta {
    chain: usize,
    step: u64,
}

pub fn save_pairs(pairs: &[TrainingPair], traces: &[Vec<f64>], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let env_count = pairs
        .first()
        .map(|p| {
            p.data
                .columns
                .iter()
                .filter(|c| c.starts_with("__env_"))
                .count()
        })
        .unwrap_or(0);
    let system_count = pairs.first().map(|p| p.data.n_cols() - env_count).unwrap_or(0);
    let meta = PairsMeta {
        count: pairs.len(),
        system_count,
        env_count,
    };
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    for (i, pair) in pairs.iter().enumerate() {
        let pdir = dir.join(format!("pair_{i:05}"));
        std::fs::create_dir_all(&pdir)?;
        let mut g = Pdag::new(pair.graph.n());
        for (a, b) in pair.graph.edges() {
            g.add_directed(a, b);
        }
        std::fs::write(pdir.join("graph.txt"), g.to_edge_list())?;
        std::fs::write(pdir.join("data.csv"), pair.data.to_csv())?;
        std::fs::write(
            pdir.join("meta.json"),
            serde_json::to_string(&PairMeta {
                chain: pair.chain,
                step: pair.step,
            })?,
        )?;
    }
    if !traces.is_empty() {
        let tdir = dir.join("chains");
        std::fs::create_dir_all(&tdir)?;
        for (i, trace) in traces.iter().enumerate() {
            let mut csv = String::from("step,score\n");
            for (s, v) in trace.iter().enumerate() {
                csv.push_str(&format!("{},{v}\n", s * 25));
            }
            std::fs::write(tdir.join(format!("trace_{i}.csv")), csv)?;
        }
    }
    Ok(())
}

pub fn load_pairs(dir: &Path) -> Result<(Vec<TrainingPair>, usize, usize)> {
    let meta: PairsMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
    let mut pairs = Vec::with_capacity(meta.count);
    for i in 0..meta.count {
        let pdir = dir.join(format!("pair_{i:05}"));
        let g = Pdag::from_edge_list(&std::fs::read_to_string(pdir.join("graph.txt"))?)?;
        let mut graph = crate::graphlib::Dag::new(g.n());
        for (a, b) in g.directed_edges() {
            graph.add_edge(a, b);
        }
        let data = DataTable::from_csv(&std::fs::read_to_string(pdir.join("data.csv"))?, None)?;
        let pair_meta: PairMeta =
            serde_json::from_str(&std::fs::read_to_string(pdir.join("meta.json"))?)?;
        pairs.push(TrainingPair {
            graph,
            data,
            chain: pair_meta.chain,
            step: pair_meta.step,
        });
    }
    Ok((pairs, meta.system_count, meta.env_count))
}
