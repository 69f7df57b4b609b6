//! Reference implementations used to check the library: brute force,
//! dense or numerically independent, and deliberately simple.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use gems_core::graph::{Edge, Node, NodeId, ObjectLabel, RelationLabel, SceneGraph};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random graph with up to `max_nodes` nodes and scattered, non-contiguous
/// ids. Each ordered pair carries an edge with probability `edge_prob`.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    max_nodes: usize,
    num_labels: u32,
    num_relations: u32,
    edge_prob: f64,
) -> SceneGraph {
    let n = rng.gen_range(1..=max_nodes);
    let mut ids: Vec<u32> = (0..n as u32).map(|i| i * 3 + rng.gen_range(0..3)).collect();
    ids.shuffle(rng);
    let nodes: Vec<Node> =
        ids.iter().map(|&id| Node { id: NodeId(id), label: ObjectLabel(rng.gen_range(0..num_labels)) }).collect();
    let mut edges = Vec::new();
    for a in &ids {
        for b in &ids {
            if a != b && rng.gen_bool(edge_prob) {
                edges.push(Edge {
                    src: NodeId(*a),
                    dst: NodeId(*b),
                    label: RelationLabel(rng.gen_range(0..num_relations)),
                });
            }
        }
    }
    SceneGraph::new(nodes, edges).unwrap()
}

/// Random node-induced subgraph with some of its edges dropped.
pub fn random_subgraph<R: Rng>(rng: &mut R, g: &SceneGraph) -> SceneGraph {
    let keep: Vec<NodeId> = g.nodes().iter().filter(|_| rng.gen_bool(0.7)).map(|n| n.id).collect();
    let keep = if keep.is_empty() { vec![g.nodes()[0].id] } else { keep };
    let sub = g.induced(&keep);
    let edges = sub.edges().iter().copied().filter(|_| rng.gen_bool(0.8)).collect();
    SceneGraph::new(sub.nodes().to_vec(), edges).unwrap()
}

fn edge_map(g: &SceneGraph) -> BTreeMap<(usize, usize), u32> {
    g.edges().iter().map(|e| ((g.position(e.src).unwrap(), g.position(e.dst).unwrap()), e.label.0)).collect()
}

/// Whether `small` embeds in `big` (labels preserved, every edge of `small`
/// present with its label), by enumerating every injective node map.
pub fn brute_force_embeds(small: &SceneGraph, big: &SceneGraph) -> bool {
    let n = small.num_nodes();
    if n > big.num_nodes() {
        return false;
    }
    let se = edge_map(small);
    let be = edge_map(big);
    let mut map = Vec::with_capacity(n);
    let mut used = vec![false; big.num_nodes()];
    fn rec(
        i: usize,
        map: &mut Vec<usize>,
        used: &mut [bool],
        small: &SceneGraph,
        big: &SceneGraph,
        se: &BTreeMap<(usize, usize), u32>,
        be: &BTreeMap<(usize, usize), u32>,
    ) -> bool {
        if i == small.num_nodes() {
            let labels_ok = (0..i).all(|p| small.nodes()[p].label == big.nodes()[map[p]].label);
            return labels_ok && se.iter().all(|(&(a, b), l)| be.get(&(map[a], map[b])) == Some(l));
        }
        for t in 0..big.num_nodes() {
            if !used[t] {
                used[t] = true;
                map.push(t);
                if rec(i + 1, map, used, small, big, se, be) {
                    return true;
                }
                map.pop();
                used[t] = false;
            }
        }
        false
    }
    rec(0, &mut map, &mut used, small, big, &se, &be)
}

/// Weak components via union-find, as sets of ids.
pub fn union_find_components(g: &SceneGraph) -> Vec<BTreeSet<NodeId>> {
    let n = g.num_nodes();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for e in g.edges() {
        let a = find(&mut parent, g.position(e.src).unwrap());
        let b = find(&mut parent, g.position(e.dst).unwrap());
        parent[a] = b;
    }
    let mut groups: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().insert(g.nodes()[i].id);
    }
    let mut out: Vec<BTreeSet<NodeId>> = groups.into_values().collect();
    out.sort();
    out
}

/// All-pairs undirected hop distances (Floyd-Warshall); `usize::MAX` when
/// unreachable. Indexed by node position.
pub fn hop_distances(g: &SceneGraph) -> Vec<Vec<usize>> {
    let n = g.num_nodes();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in g.edges() {
        let (a, b) = (g.position(e.src).unwrap(), g.position(e.dst).unwrap());
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][m] + d[m][j] < d[i][j] {
                    d[i][j] = d[i][m] + d[m][j];
                }
            }
        }
    }
    d.into_iter().map(|r| r.into_iter().map(|x| if x >= inf { usize::MAX } else { x }).collect()).collect()
}

/// Sort every node's total degree and scan for the first value whose rank
/// reaches the percentile.
pub fn sort_and_scan_percentile_k(graphs: &[SceneGraph], p: f64) -> usize {
    let mut degrees: Vec<usize> = Vec::new();
    for g in graphs {
        for n in g.nodes() {
            let d = g.edges().iter().filter(|e| e.src == n.id || e.dst == n.id).count();
            degrees.push(d);
        }
    }
    degrees.sort_unstable();
    let total = degrees.len() as f64;
    for (i, &d) in degrees.iter().enumerate() {
        let last_of_value = i + 1 == degrees.len() || degrees[i + 1] != d;
        if last_of_value && (i + 1) as f64 >= p * total - 1e-9 {
            return d;
        }
    }
    *degrees.last().unwrap_or(&0)
}

/// Dense power iteration of the damped transition matrix, dangling mass
/// spread uniformly, run to a fixed point.
pub fn dense_pagerank(g: &SceneGraph, damping: f64) -> Vec<f64> {
    let n = g.num_nodes();
    let mut m = vec![vec![0.0; n]; n];
    let mut out = vec![0usize; n];
    for e in g.edges() {
        out[g.position(e.src).unwrap()] += 1;
    }
    for e in g.edges() {
        let (a, b) = (g.position(e.src).unwrap(), g.position(e.dst).unwrap());
        m[b][a] += 1.0 / out[a] as f64;
    }
    for a in 0..n {
        if out[a] == 0 {
            for row in m.iter_mut() {
                row[a] = 1.0 / n as f64;
            }
        }
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..n)
            .map(|i| (1.0 - damping) / n as f64 + damping * (0..n).map(|j| m[i][j] * x[j]).sum::<f64>())
            .collect();
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}

/// Every connected node set of size `1..=max_nodes`, by checking all
/// bitmasks. Sets hold node positions.
pub fn brute_force_connected_sets(g: &SceneGraph, max_nodes: usize) -> Vec<BTreeSet<usize>> {
    let n = g.num_nodes();
    assert!(n < 20);
    let em = edge_map(g);
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let set: BTreeSet<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        if set.len() > max_nodes {
            continue;
        }
        let start = *set.iter().next().unwrap();
        let mut reached = BTreeSet::from([start]);
        loop {
            let before = reached.len();
            for &(a, b) in em.keys() {
                if set.contains(&a) && set.contains(&b) && (reached.contains(&a) || reached.contains(&b)) {
                    reached.insert(a);
                    reached.insert(b);
                }
            }
            if reached.len() == before {
                break;
            }
        }
        if reached == set {
            out.push(set);
        }
    }
    out
}

/// Nelder-Mead simplex minimiser with standard coefficients and restarts.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, iterations: usize) -> Vec<f64> {
    let n = x0.len();
    let mut best = x0.to_vec();
    for restart in 0..4 {
        let scale = step / (1 << (2 * restart)) as f64;
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut v = best.clone();
            v[i] += scale;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        for _ in 0..iterations {
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            values = idx.iter().map(|&i| values[i]).collect();
            if (values[n] - values[0]).abs() < 1e-300 {
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
            let along =
                |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
            let xr = along(-1.0);
            let fr = f(&xr);
            if fr < values[0] {
                let xe = along(-2.0);
                let fe = f(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = along(-0.5);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = f(&xc);
                    (xc, fc)
                };
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        simplex[i] = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                        values[i] = f(&simplex[i]);
                    }
                }
            }
        }
        let i = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        best = simplex[i].clone();
    }
    best
}

fn softmax_with_zero(z: &[f64]) -> Vec<f64> {
    let mut logits = vec![0.0];
    logits.extend_from_slice(z);
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `argmin_q KL(q || p) - E_q[sim]` over the simplex, by direct numerical
/// search over softmax coordinates.
pub fn numeric_q(p: &[f64], sim: &[f64]) -> Vec<f64> {
    let objective = |z: &[f64]| {
        let q = softmax_with_zero(z);
        q.iter()
            .zip(p)
            .zip(sim)
            .map(|((&qi, &pi), &si)| if qi > 0.0 { qi * (qi / pi).ln() - qi * si } else { 0.0 })
            .sum::<f64>()
    };
    let z = nelder_mead(objective, &vec![0.0; p.len() - 1], 1.0, 20_000);
    softmax_with_zero(&z)
}

/// Double-double number `hi + lo`.
#[derive(Clone, Copy, Debug)]
pub struct Dd(pub f64, pub f64);

impl Dd {
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }
    fn norm(self) -> Dd {
        let s = self.0 + self.1;
        Dd(s, self.1 - (s - self.0))
    }
    pub fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.0, o.0);
        Dd(s.0, s.1 + self.1 + o.1).norm()
    }
    pub fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
    pub fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let err = self.0.mul_add(o.0, -p);
        Dd(p, err + self.0 * o.1 + self.1 * o.0).norm()
    }
    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.add(o.mul(Dd(q1, 0.0)).neg());
        let q2 = r.0 / o.0;
        Dd(q1, 0.0).add(Dd(q2, 0.0))
    }
    pub fn powi(self, mut n: u64) -> Dd {
        let mut base = self;
        let mut acc = Dd(1.0, 0.0);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            n >>= 1;
        }
        acc
    }
}

/// `(1 - beta) / (1 - beta^n)` in double-double arithmetic.
pub fn class_balance_weight_dd(n: u64, beta: f64) -> f64 {
    let b = Dd(beta, 0.0);
    let one = Dd(1.0, 0.0);
    let num = one.add(b.neg());
    let den = one.add(b.powi(n).neg());
    let r = num.div(den);
    r.0 + r.1
}

/// Largest relative error between `analytic` and central differences of
/// `loss` over every coordinate of `x`, with `|a - n| / max(|a|, |n|, floor)`.
pub fn max_fd_relative_error(
    x: &mut [f64],
    analytic: &[f64],
    step: f64,
    floor: f64,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> (f64, usize) {
    let mut worst = (0.0f64, 0usize);
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let up = loss(x);
        x[i] = orig - step;
        let down = loss(x);
        x[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    worst
}

/// Checks a node ordering of `g`: each weak component occupies one
/// contiguous block, and hop distance from the block's first node never
/// decreases along the block.
pub fn check_cluster_bfs_order(g: &SceneGraph, order: &[NodeId]) -> Result<(), String> {
    let mut sorted = order.to_vec();
    sorted.sort();
    if sorted != g.nodes().iter().map(|n| n.id).collect::<Vec<_>>() {
        return Err("order is not a permutation of the nodes".into());
    }
    let comps = union_find_components(g);
    let comp_of = |id: NodeId| comps.iter().position(|c| c.contains(&id)).unwrap();
    let dist = hop_distances(g);
    let mut finished = BTreeSet::new();
    let mut i = 0;
    while i < order.len() {
        let c = comp_of(order[i]);
        if !finished.insert(c) {
            return Err(format!("component {c} is split"));
        }
        let start = g.position(order[i]).unwrap();
        let mut last = 0;
        let mut j = i;
        while j < order.len() && comp_of(order[j]) == c {
            let d = dist[start][g.position(order[j]).unwrap()];
            if d < last {
                return Err(format!("hop distance drops at position {j}"));
            }
            last = d;
            j += 1;
        }
        if j - i != comps[c].len() {
            return Err(format!("component {c} is not contiguous"));
        }
        i = j;
    }
    Ok(())
}

/// Whether position `i -> order[i]` maps `rebuilt` onto `g` exactly:
/// labels agree and the edge sets correspond one to one.
pub fn is_isomorphism(rebuilt: &SceneGraph, g: &SceneGraph, order: &[NodeId]) -> bool {
    if rebuilt.num_nodes() != g.num_nodes() || rebuilt.num_edges() != g.num_edges() {
        return false;
    }
    let labels_ok = rebuilt.nodes().iter().all(|n| g.label_of(order[n.id.0 as usize]) == Some(n.label));
    labels_ok
        && rebuilt
            .edges()
            .iter()
            .all(|e| g.edge_label(order[e.src.0 as usize], order[e.dst.0 as usize]) == Some(e.label))
}
