//! d-separation queries on DAGs via the reachability scheme of Koller and
//! Friedman (Algorithm 3.1).

use std::collections::BTreeSet;

use super::Dag;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Up,
    Down,
}

/// Reusable separation oracle holding the precomputed child lists.
pub struct DSeparationOracle {
    dag: Dag,
    children: Vec<Vec<usize>>,
}

impl DSeparationOracle {
    pub fn new(dag: Dag) -> Self {
        let children = (0..dag.n()).map(|v| dag.children_of(v)).collect();
        DSeparationOracle { dag, children }
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// True when `x` and `y` are d-separated given `z`.
    pub fn query(&self, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
        let dag = &self.dag;
        assert!(x != y && !z.contains(&x) && !z.contains(&y));
        let n = dag.n();

        // Ancestors of the conditioning set, including the set itself.
        let mut anc_z = z.clone();
        let mut stack: Vec<usize> = z.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for &p in dag.parents_of(v) {
                if anc_z.insert(p) {
                    stack.push(p);
                }
            }
        }

        let mut visited = vec![[false; 2]; n];
        let mut frontier = vec![(x, Dir::Up)];
        while let Some((v, dir)) = frontier.pop() {
            let slot = if dir == Dir::Up { 0 } else { 1 };
            if visited[v][slot] {
                continue;
            }
            visited[v][slot] = true;
            if v == y {
                return false;
            }
            match dir {
                Dir::Up => {
                    if !z.contains(&v) {
                        for &p in dag.parents_of(v) {
                            frontier.push((p, Dir::Up));
                        }
                        for &c in &self.children[v] {
                            frontier.push((c, Dir::Down));
                        }
                    }
                }
                Dir::Down => {
                    if !z.contains(&v) {
                        for &c in &self.children[v] {
                            frontier.push((c, Dir::Down));
                        }
                    }
                    if anc_z.contains(&v) {
                        for &p in dag.parents_of(v) {
                            frontier.push((p, Dir::Up));
                        }
                    }
                }
            }
        }
        true
    }
}

/// True when `x` and `y` are d-separated given `z` in `dag`.
pub fn d_separated(dag: &Dag, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
    DSeparationOracle::new(dag.clone()).query(x, y, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphlib::Dag;

    fn set(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn chain_blocks_on_middle() {
        let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]);
        assert!(!d_separated(&dag, 0, 2, &set(&[])));
        assert!(d_separated(&dag, 0, 2, &set(&[1])));
    }

    #[test]
    fn collider_opens_on_conditioning() {
        let dag = Dag::from_edges(3, &[(0, 2), (1, 2)]);
        assert!(d_separated(&dag, 0, 1, &set(&[])));
        assert!(!d_separated(&dag, 0, 1, &set(&[2])));
    }

    #[test]
    fn collider_descendant_opens() {
        let dag = Dag::from_edges(4, &[(0, 2), (1, 2), (2, 3)]);
        assert!(d_separated(&dag, 0, 1, &set(&[])));
        assert!(!d_separated(&dag, 0, 1, &set(&[3])));
    }

    #[test]
    fn fork_blocks_on_root() {
        let dag = Dag::from_edges(3, &[(2, 0), (2, 1)]);
        assert!(!d_separated(&dag, 0, 1, &set(&[])));
        assert!(d_separated(&dag, 0, 1, &set(&[2])));
    }

    /// Exhaustive check against a brute-force path enumeration on small DAGs.
    #[test]
    fn matches_brute_force_on_small_dags() {
        fn brute_force(dag: &Dag, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
            // Enumerate all simple undirected paths and test activeness.
            fn active(dag: &Dag, path: &[usize], z: &BTreeSet<usize>) -> bool {
                for w in 1..path.len() - 1 {
                    let (a, v, b) = (path[w - 1], path[w], path[w + 1]);
                    let collider = dag.has_edge(a, v) && dag.has_edge(b, v);
                    if collider {
                        let opens = z.contains(&v)
                            || dag.descendants_of(v).iter().any(|d| z.contains(d));
                        if !opens {
                            return false;
                        }
                    } else if z.contains(&v) {
                        return false;
                    }
                }
                true
            }
            fn extend(
                dag: &Dag,
                path: &mut Vec<usize>,
                y: usize,
                z: &BTreeSet<usize>,
            ) -> bool {
                let last = *path.last().unwrap();
                if last == y {
                    return active(dag, path, z);
                }
                for next in 0..dag.n() {
                    if !path.contains(&next) && dag.adjacent(last, next) {
                        path.push(next);
                        if extend(dag, path, y, z) {
                            path.pop();
                            return true;
                        }
                        path.pop();
                    }
                }
                false
            }
            !extend(dag, &mut vec![x], y, z)
        }

        // All DAGs on 4 nodes whose edges respect the identity order, which is
        // enough coverage since d-separation is label-invariant.
        let pairs: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| ((i + 1)..4).map(move |j| (i, j)))
            .collect();
        for mask in 0u32..(1 << pairs.len()) {
            let mut dag = Dag::new(4);
            for (bit, &(a, b)) in pairs.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    dag.add_edge(a, b);
                }
            }
            for x in 0..4 {
                for y in (x + 1)..4 {
                    for zmask in 0u32..16 {
                        if zmask & (1 << x) != 0 || zmask & (1 << y) != 0 {
                            continue;
                        }
                        let z: BTreeSet<usize> =
                            (0..4).filter(|&v| zmask & (1 << v) != 0).collect();
                        assert_eq!(
                            d_separated(&dag, x, y, &z),
                            brute_force(&dag, x, y, &z),
                            "mask={mask} x={x} y={y} z={z:?}"
                        );
                    }
                }
            }
        }
    }
}
