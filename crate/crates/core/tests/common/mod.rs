//! Shared test support: independent brute-force transport oracles and
//! seeded random generators. The oracles never call the solver under test;
//! they enumerate the vertices of the transportation polytope directly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wcone::fields::{FiberMeasure, MeasureField};
use wcone::measures::{make_measure, DiscreteMeasure};

/// Minimal cost over all vertices of the transportation polytope, by
/// exhaustive enumeration of the spanning trees of the dense bipartite
/// graph. Every basic feasible solution lives on such a tree, and the LP
/// optimum is attained at one of them.
pub fn vertex_enumeration_min_cost(
    a: &[f64],
    b: &[f64],
    cost: &dyn Fn(usize, usize) -> f64,
) -> f64 {
    let m = a.len();
    let n = b.len();
    let arcs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let needed = m + n - 1;
    struct Dfs<'c> {
        arcs: Vec<(usize, usize)>,
        needed: usize,
        m: usize,
        n: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        cost: &'c dyn Fn(usize, usize) -> f64,
        // Union-find without path compression, so links can be undone on
        // backtracking.
        parent: Vec<usize>,
        chosen: Vec<(usize, usize)>,
        best: f64,
    }
    impl Dfs<'_> {
        fn root(&self, mut x: usize) -> usize {
            while self.parent[x] != x {
                x = self.parent[x];
            }
            x
        }
        fn run(&mut self, pos: usize) {
            if self.chosen.len() == self.needed {
                if let Some(c) = tree_cost(self.m, self.n, &self.chosen, &self.a, &self.b, self.cost)
                {
                    if c < self.best {
                        self.best = c;
                    }
                }
                return;
            }
            if self.arcs.len() - pos < self.needed - self.chosen.len() {
                return;
            }
            let (i, j) = self.arcs[pos];
            let (ri, rj) = (self.root(i), self.root(self.m + j));
            if ri != rj {
                self.parent[ri] = rj;
                self.chosen.push((i, j));
                self.run(pos + 1);
                self.chosen.pop();
                self.parent[ri] = ri;
            }
            self.run(pos + 1);
        }
    }
    let mut dfs = Dfs {
        arcs,
        needed,
        m,
        n,
        a: a.to_vec(),
        b: b.to_vec(),
        cost,
        parent: (0..m + n).collect(),
        chosen: Vec::with_capacity(needed),
        best: f64::INFINITY,
    };
    dfs.run(0);
    dfs.best
}

/// Unique flows of a spanning tree, by leaf peeling; `None` when some flow
/// is negative (infeasible vertex).
fn tree_cost(
    m: usize,
    n: usize,
    edges: &[(usize, usize)],
    a: &[f64],
    b: &[f64],
    cost: &dyn Fn(usize, usize) -> f64,
) -> Option<f64> {
    let nodes = m + n;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    for (e, &(i, j)) in edges.iter().enumerate() {
        adj[i].push((e, m + j));
        adj[m + j].push((e, i));
    }
    let mut degree: Vec<usize> = adj.iter().map(|v| v.len()).collect();
    let mut rem: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let mut used = vec![false; edges.len()];
    let mut flows = vec![0.0; edges.len()];
    let mut stack: Vec<usize> = (0..nodes).filter(|&u| degree[u] == 1).collect();
    let mut processed = 0;
    while let Some(u) = stack.pop() {
        if degree[u] != 1 {
            continue;
        }
        let &(e, other) = adj[u].iter().find(|&&(e, _)| !used[e])?;
        used[e] = true;
        flows[e] = rem[u];
        rem[other] -= rem[u];
        rem[u] = 0.0;
        degree[u] -= 1;
        degree[other] -= 1;
        processed += 1;
        if degree[other] == 1 {
            stack.push(other);
        }
    }
    if processed != edges.len() {
        return None;
    }
    let mut total = 0.0;
    for (e, &(i, j)) in edges.iter().enumerate() {
        if flows[e] < -1e-9 {
            return None;
        }
        total += flows[e].max(0.0) * cost(i, j);
    }
    Some(total)
}

/// Minimal cost over permutation couplings of two uniform measures of equal
/// size (the vertices of the scaled Birkhoff polytope).
pub fn permutation_min_cost(n: usize, cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    fn heap(
        k: usize,
        perm: &mut Vec<usize>,
        n: usize,
        cost: &dyn Fn(usize, usize) -> f64,
        best: &mut f64,
    ) {
        if k == 1 {
            let c: f64 = (0..n).map(|i| cost(i, perm[i])).sum::<f64>() / n as f64;
            if c < *best {
                *best = c;
            }
            return;
        }
        for i in 0..k {
            heap(k - 1, perm, n, cost, best);
            if k % 2 == 0 {
                perm.swap(i, k - 1);
            } else {
                perm.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut perm, n, cost, &mut best);
    best
}

/// Max correlation over fiber couplings by vertex enumeration.
pub fn vertex_enumeration_max_corr(a: &FiberMeasure, b: &FiberMeasure) -> f64 {
    let corr = |j: usize, l: usize| wcone::numeric::dot(&a.velocities[j], &b.velocities[l]);
    -vertex_enumeration_min_cost(&a.probs, &b.probs, &|j, l| -corr(j, l))
}

pub fn rand_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn rand_measure(rng: &mut ChaCha8Rng, d: usize, n: usize, scale: f64) -> DiscreteMeasure {
    loop {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| rand_point(rng, d, scale)).collect();
        let wts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        if let Ok(mu) = make_measure(pts, wts) {
            if mu.len() == n {
                return mu;
            }
        }
    }
}

pub fn rand_fiber(rng: &mut ChaCha8Rng, d: usize, max_atoms: usize, scale: f64) -> FiberMeasure {
    let k = rng.gen_range(1..=max_atoms);
    loop {
        let vs: Vec<Vec<f64>> = (0..k).map(|_| rand_point(rng, d, scale)).collect();
        let ps: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        if let Ok(f) = FiberMeasure::new(vs, ps) {
            if f.velocities.len() == k {
                return f;
            }
        }
    }
}

pub fn rand_field(
    rng: &mut ChaCha8Rng,
    base: &DiscreteMeasure,
    max_atoms: usize,
    scale: f64,
) -> MeasureField {
    let fibers = (0..base.len())
        .map(|_| rand_fiber(rng, base.dim, max_atoms, scale))
        .collect();
    MeasureField::new(base.clone(), fibers).expect("random field")
}

/// Random field whose fibers are exactly centred: symmetric `±w` pairs with
/// equal halves.
pub fn rand_centred_field(
    rng: &mut ChaCha8Rng,
    base: &DiscreteMeasure,
    pairs: usize,
    scale: f64,
) -> MeasureField {
    let fibers = (0..base.len())
        .map(|_| {
            let k = rng.gen_range(1..=pairs);
            let mut vs = Vec::with_capacity(2 * k);
            let mut ps = Vec::with_capacity(2 * k);
            for _ in 0..k {
                let w = rand_point(rng, base.dim, scale);
                let q = rng.gen_range(0.1..1.0) / k as f64;
                vs.push(w.iter().map(|c| -c).collect());
                vs.push(w);
                ps.push(q);
                ps.push(q);
            }
            FiberMeasure::new(vs, ps).expect("symmetric fiber")
        })
        .collect();
    MeasureField::new(base.clone(), fibers).expect("centred field")
}
