use ticl::bayesnet::DataTable;
use ticl::citest::{CiSource, G2Source};
use ticl::featurize::{skeleton_features, ConfMap};
use ticl::graphlib::Pdag;
use ticl::jci::{AugmentedDataset, JciConstraints};
use ticl::scl::{legal_complete_skeleton, TiclModel};

fn main() {
    let run = std::env::args().nth(1).expect("run dir");
    let model = TiclModel::load_bundle(&std::path::Path::new(&run).join("model")).unwrap();
    let text = std::fs::read_to_string(format!("{run}/augmented.csv")).unwrap();
    let table = DataTable::from_csv(&text, None).unwrap();
    let k_env = table.columns.iter().filter(|c| c.starts_with("__env_")).count();
    let d = table.n_cols() - k_env;
    let aug = AugmentedDataset { table, system_count: d, k: k_env };
    let c = JciConstraints::new(d, k_env);
    // Truth skeleton from the bundle: system graph plus env target edges.
    let truth_icpdag = Pdag::from_edge_list(
        &std::fs::read_to_string(format!("{run}/bundle/truth_icpdag.txt")).unwrap(),
    ).unwrap();
    let source = G2Source::new(&aug.table);
    let mut working = legal_complete_skeleton(&c);
    let mut conf = ConfMap::new();
    {
        let edges = working.undirected_edges();
        let scores: Vec<f64> = edges.iter().map(|&(i, j)| source.strength(i, j, &[])).collect();
        let max = scores.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
        for (&(i, j), &z) in edges.iter().zip(&scores) { conf.set(i, j, z / max); }
    }
    for k in 1..=model.config.k_max {
        let edges = working.undirected_edges();
        let mut removed = Vec::new();
        let mut lost = 0; let mut kept_false = 0;
        println!("--- order {k}: {} survivors", edges.len());
        for &(i, j) in &edges {
            let f = skeleton_features(&source, &working, &conf, (i, j), k, &model.basis, &model.config.feature);
            let prob = model.skeleton_models[k-1].predict_proba(&f.vector);
            conf.set(i, j, prob);
            let is_true = truth_icpdag.adjacent(i, j);
            let m = model.basis.m;
            if prob < model.config.skeleton_threshold {
                removed.push((i, j));
                if is_true { lost += 1; println!("  LOST true {i}-{j}: prob {prob:.3} min {:.2}", f.vector[m+1]); }
            } else if !is_true {
                kept_false += 1;
                if kept_false <= 8 { println!("  false {i}-{j}: prob {prob:.3} min {:.2}", f.vector[m+1]); }
            }
        }
        println!("  (lost {lost}, kept false {kept_false})");
        for &(i, j) in &removed { working.remove_edge(i, j); }
    }
}
