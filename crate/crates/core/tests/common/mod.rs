#![allow(dead_code)]

use corrgather::{ModelSpec, Topology};
use petgraph::algo::min_spanning_tree;
use petgraph::data::Element;
use petgraph::graph::UnGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn collinear3() -> Topology {
    Topology::from_records([(0, 0.0, 0.0), (1, 1.0, 0.0), (2, 2.0, 0.0)]).unwrap()
}

pub fn random_topology(rng: &mut impl Rng, count: usize, extent: f64) -> Topology {
    let recs: Vec<(usize, f64, f64)> = (0..count)
        .map(|i| (i, rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)))
        .collect();
    Topology::from_records(recs).unwrap()
}

pub fn topology_csv(t: &Topology) -> String {
    let mut s = String::from("id,x,y\n");
    for (i, (x, y)) in t.positions().iter().enumerate() {
        s.push_str(&format!("{i},{x},{y}\n"));
    }
    s
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Kruskal MST weight of the complete graph weighted by pairwise budgets.
pub fn mst_weight(model: &ModelSpec, t: &Topology) -> u64 {
    let mut g = UnGraph::<(), u64>::new_undirected();
    let nodes: Vec<_> = (0..t.len()).map(|_| g.add_node(())).collect();
    for i in 0..t.len() {
        for j in (i + 1)..t.len() {
            let w = model.pairwise_bits(t.distance(i, j).unwrap()).unwrap().0 as u64;
            g.add_edge(nodes[i], nodes[j], w);
        }
    }
    min_spanning_tree(&g)
        .filter_map(|e| match e {
            Element::Edge { weight, .. } => Some(weight),
            _ => None,
        })
        .sum()
}

/// All permutations of `0..n`, lexicographic.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for v in 0..n {
            if !prefix.contains(&v) {
                prefix.push(v);
                rec(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, &mut out);
    out
}
