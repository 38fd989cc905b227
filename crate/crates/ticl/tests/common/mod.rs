//! Shared helpers for the acceptance suite: exhaustive DAG enumeration, an
//! independent constraint-based reference pipeline, and a reference rule
//! closure. These deliberately avoid the library's own CPDAG construction so
//! the two sides of each comparison stay independent.

use std::collections::{BTreeMap, BTreeSet};

use ticl::graphlib::{d_separated, Dag, Pdag};

/// All DAGs on `n` labelled nodes.
pub fn all_dags(n: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    for code in 0..3usize.pow(pairs.len() as u32) {
        let mut dag = Dag::new(n);
        let mut c = code;
        for &(a, b) in &pairs {
            match c % 3 {
                0 => {}
                1 => dag.add_edge(a, b),
                _ => dag.add_edge(b, a),
            }
            c /= 3;
        }
        if dag.is_acyclic() {
            out.push(dag);
        }
    }
    out
}

/// Collider triples `a -> c <- b` with non-adjacent arms, computed directly
/// from parent sets.
pub fn colliders(dag: &Dag) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for c in 0..dag.n() {
        let ps: Vec<usize> = dag.parents_of(c).iter().copied().collect();
        for (ia, &a) in ps.iter().enumerate() {
            for &b in ps.iter().skip(ia + 1) {
                if !dag.adjacent(a, b) {
                    out.insert((a.min(b), c, a.max(b)));
                }
            }
        }
    }
    out
}

/// Reference orientation-propagation closure, independent of the library's.
pub fn reference_meek(g: &mut Pdag) {
    let n = g.n();
    loop {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if a == b || !g.has_undirected(a, b) {
                    continue;
                }
                // R1: x -> a - b with x, b non-adjacent.
                let r1 = (0..n).any(|x| g.has_directed(x, a) && x != b && !g.adjacent(x, b));
                // R2: a -> x -> b and a - b.
                let r2 = (0..n).any(|x| g.has_directed(a, x) && g.has_directed(x, b));
                // R3: a - c1 -> b, a - c2 -> b, c1 and c2 non-adjacent.
                let mids: Vec<usize> = (0..n)
                    .filter(|&x| g.has_undirected(a, x) && g.has_directed(x, b))
                    .collect();
                let r3 = mids
                    .iter()
                    .enumerate()
                    .any(|(i1, &c1)| mids.iter().skip(i1 + 1).any(|&c2| !g.adjacent(c1, c2)));
                if r1 || r2 || r3 {
                    g.add_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Plain constraint-based reference with a perfect separation oracle:
/// level-wise edge removal with stable snapshots, collider orientation from
/// the recorded separating sets, then rule closure.
pub fn reference_pc(truth: &Dag) -> Pdag {
    let n = truth.n();
    let mut working = Pdag::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            working.add_undirected(i, j);
        }
    }
    let mut sepsets: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    let mut level = 0usize;
    loop {
        let snapshot = working.clone();
        let mut any_candidate = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || !snapshot.adjacent(i, j) || !working.adjacent(i, j) {
                    continue;
                }
                let side: Vec<usize> = snapshot
                    .neighbors(i)
                    .into_iter()
                    .filter(|&q| q != j)
                    .collect();
                if side.len() < level {
                    continue;
                }
                any_candidate = true;
                for subset in subsets_of(&side, level) {
                    let z: BTreeSet<usize> = subset.into_iter().collect();
                    if d_separated(truth, i, j, &z) {
                        working.remove_edge(i, j);
                        sepsets.insert((i.min(j), i.max(j)), z);
                        break;
                    }
                }
            }
        }
        if !any_candidate {
            break;
        }
        level += 1;
    }
    // Collider orientation from the separating sets.
    let mut oriented = working.clone();
    for c in 0..n {
        let nbrs = working.neighbors(c);
        for (ia, &a) in nbrs.iter().enumerate() {
            for &b in nbrs.iter().skip(ia + 1) {
                if working.adjacent(a, b) {
                    continue;
                }
                if let Some(s) = sepsets.get(&(a.min(b), a.max(b))) {
                    if !s.contains(&c) {
                        oriented.add_directed(a, c);
                        oriented.add_directed(b, c);
                    }
                }
            }
        }
    }
    reference_meek(&mut oriented);
    oriented
}

pub fn subsets_of(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k > items.len() {
        return Vec::new();
    }
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] != pos + items.len() - k {
                break;
            }
        }
        idx[pos] += 1;
        for p in (pos + 1)..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

pub fn network_path(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(format!(
        "{}/../../networks/{name}.bif",
        env!("CARGO_MANIFEST_DIR")
    ))
}

/// Median of a small unsorted sample.
pub fn median<T: PartialOrd + Copy>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

pub fn report_line(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
