//! Exact transportation simplex (MODI / u-v method on a spanning-tree basis).

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Largest number of atoms per side.
pub const MAX_ATOMS: usize = 512;

/// Pivot tolerance relative to the largest cost magnitude.
const PIVOT_TOL: f64 = 1e-12;

/// An optimal transport plan for `min ∑ c_ij π_ij`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub value: f64,
    /// Row-major `supply.len() × demand.len()`.
    pub flow: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    n1: usize,
    n2: usize,
    /// Basic cells `(i, j)`.
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Tree {
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n1 + self.n2];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push(k);
            adj[self.n1 + j].push(k);
        }
        adj
    }

    fn other(&self, k: usize, node: usize) -> usize {
        let (i, j) = self.cells[k];
        if node == i {
            self.n1 + j
        } else {
            i
        }
    }

    fn potentials(&self, cost: &[f64], adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; self.n1 + self.n2];
        let mut queue = VecDeque::new();
        pot[0] = 0.0;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &k in &adj[node] {
                let nb = self.other(k, node);
                if pot[nb].is_nan() {
                    let (i, j) = self.cells[k];
                    let c = cost[i * self.n2 + j];
                    pot[nb] = c - pot[node];
                    queue.push_back(nb);
                }
            }
        }
        let v = pot.split_off(self.n1);
        (pot, v)
    }

    /// Basic cells on the tree path from `from` to `to`, in order.
    fn path(&self, adj: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
        let mut via = vec![usize::MAX; self.n1 + self.n2];
        let mut seen = vec![false; self.n1 + self.n2];
        let mut queue = VecDeque::new();
        seen[from] = true;
        queue.push_back(from);
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &k in &adj[node] {
                let nb = self.other(k, node);
                if !seen[nb] {
                    seen[nb] = true;
                    via[nb] = k;
                    queue.push_back(nb);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = to;
        while node != from {
            let k = via[node];
            out.push(k);
            node = self.other(k, node);
        }
        out.reverse();
        out
    }
}

fn check_inputs(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<()> {
    let (n1, n2) = (supply.len(), demand.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidMeasure("empty marginal".into()));
    }
    if n1 > MAX_ATOMS || n2 > MAX_ATOMS {
        return Err(Error::InvalidMeasure(format!(
            "transport is limited to {MAX_ATOMS} atoms per side, got {n1} x {n2}"
        )));
    }
    if cost.len() != n1 * n2 {
        return Err(Error::Dimension(format!(
            "cost matrix has {} entries, expected {}",
            cost.len(),
            n1 * n2
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("costs must be finite".into()));
    }
    if supply.iter().chain(demand).any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidMeasure("marginals must be nonnegative".into()));
    }
    Ok(())
}

/// North-west corner basis, with degenerate zero cells so the basis is a
/// spanning tree of `n1 + n2 - 1` cells.
fn northwest(supply: &[f64], demand: &[f64]) -> Tree {
    let (n1, n2) = (supply.len(), demand.len());
    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut cells = Vec::with_capacity(n1 + n2 - 1);
    let mut flow = Vec::with_capacity(n1 + n2 - 1);
    loop {
        let last = i == n1 - 1 && j == n2 - 1;
        let x = if last { ra[i].max(0.0) } else { ra[i].min(rb[j]) };
        cells.push((i, j));
        flow.push(x);
        if last {
            break;
        }
        if i == n1 - 1 {
            ra[i] -= x;
            j += 1;
        } else if j == n2 - 1 || ra[i] < rb[j] {
            rb[j] -= x;
            ra[i] = 0.0;
            i += 1;
        } else {
            ra[i] -= x;
            rb[j] = 0.0;
            j += 1;
        }
    }
    Tree { n1, n2, cells, flow }
}

/// Solves `min ∑ c_ij π_ij` over couplings of `supply` and `demand`.
/// The demand is rescaled to the supply's total mass.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Solution> {
    check_inputs(supply, demand, cost)?;
    let (n1, n2) = (supply.len(), demand.len());
    let (sa, sb): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    let demand: Vec<f64> = demand.iter().map(|b| b * sa / sb).collect();
    let mut tree = northwest(supply, &demand);
    let cmax = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let tol = PIVOT_TOL * (1.0 + cmax);
    let cap = 200 * (n1 + n2) * (n1 + n2) + 1000;
    let mut in_basis = vec![false; n1 * n2];
    for &(i, j) in &tree.cells {
        in_basis[i * n2 + j] = true;
    }
    let mut pivots = 0;
    let mut stall = 0usize;
    loop {
        let adj = tree.adjacency();
        let (u, v) = tree.potentials(cost, &adj);
        let bland = stall > n1 + n2;
        let mut enter = None;
        let mut best = -tol;
        'scan: for i in 0..n1 {
            for j in 0..n2 {
                if in_basis[i * n2 + j] {
                    continue;
                }
                let d = cost[i * n2 + j] - u[i] - v[j];
                if bland {
                    if d < -tol {
                        enter = Some((i, j));
                        break 'scan;
                    }
                } else if d < best {
                    best = d;
                    enter = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = enter else { break };
        pivots += 1;
        if pivots > cap {
            return Err(Error::Solver(format!("transportation simplex exceeded {cap} pivots")));
        }
        // cycle: entering cell (+), then the tree path from column ej to row ei
        let path = tree.path(&adj, n1 + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = tree.flow[k];
                let better = f < theta
                    || (f == theta && leave != usize::MAX && {
                        let (a, b) = (tree.cells[k], tree.cells[leave]);
                        a < b
                    });
                if better {
                    theta = f;
                    leave = k;
                }
            }
        }
        if theta > 0.0 {
            stall = 0;
        } else {
            stall += 1;
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                tree.flow[k] -= theta;
            } else {
                tree.flow[k] += theta;
            }
        }
        let (li, lj) = tree.cells[leave];
        in_basis[li * n2 + lj] = false;
        in_basis[ei * n2 + ej] = true;
        tree.cells[leave] = (ei, ej);
        tree.flow[leave] = theta;
    }
    let mut flow = vec![0.0; n1 * n2];
    for (&(i, j), &f) in tree.cells.iter().zip(&tree.flow) {
        flow[i * n2 + j] = f.max(0.0);
    }
    let value = flow.iter().zip(cost).map(|(f, c)| f * c).sum();
    Ok(Solution { value, flow, pivots })
}

/// Flows of the basis `cells` (must be a spanning tree), by leaf
/// elimination. `None` if the cells do not form a spanning tree.
fn tree_flows(n1: usize, n2: usize, cells: &[(usize, usize)], supply: &[f64], demand: &[f64]) -> Option<Vec<f64>> {
    let mut rem: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut deg = vec![0usize; n1 + n2];
    for &(i, j) in cells {
        deg[i] += 1;
        deg[n1 + j] += 1;
    }
    let mut flow = vec![f64::NAN; cells.len()];
    let mut done = vec![false; cells.len()];
    for _ in 0..cells.len() {
        let (k, node) = cells.iter().enumerate().find_map(|(k, &(i, j))| {
            if done[k] {
                None
            } else if deg[i] == 1 {
                Some((k, i))
            } else if deg[n1 + j] == 1 {
                Some((k, n1 + j))
            } else {
                None
            }
        })?;
        let (i, j) = cells[k];
        let other = if node == i { n1 + j } else { i };
        flow[k] = rem[node];
        rem[other] -= rem[node];
        rem[node] = 0.0;
        deg[i] -= 1;
        deg[n1 + j] -= 1;
        done[k] = true;
    }
    if deg.iter().any(|&d| d != 0) {
        return None;
    }
    Some(flow)
}

/// Brute-force oracle: the minimum over every vertex of the transportation
/// polytope, enumerating all spanning-tree bases. Only for tiny instances.
pub fn enumerate_vertices(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<f64> {
    check_inputs(supply, demand, cost)?;
    let (n1, n2) = (supply.len(), demand.len());
    if n1 * n2 > 20 {
        return Err(Error::InvalidParameter(
            "vertex enumeration is limited to 20 cells".into(),
        ));
    }
    let k = n1 + n2 - 1;
    let all: Vec<(usize, usize)> = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let scale = supply.iter().chain(demand).fold(0.0f64, |m, w| m.max(*w));
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let cells: Vec<(usize, usize)> = pick.iter().map(|&p| all[p]).collect();
        if let Some(flow) = tree_flows(n1, n2, &cells, supply, demand) {
            if flow.iter().all(|&f| f >= -1e-12 * scale) {
                let v: f64 = cells
                    .iter()
                    .zip(&flow)
                    .map(|(&(i, j), f)| f.max(0.0) * cost[i * n2 + j])
                    .sum();
                best = best.min(v);
            }
        }
        // next combination
        let m = all.len();
        let mut t = k;
        while t > 0 && pick[t - 1] == m - k + t - 1 {
            t -= 1;
        }
        if t == 0 {
            break;
        }
        pick[t - 1] += 1;
        for s in t..k {
            pick[s] = pick[s - 1] + 1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_is_optimal() {
        let a = [0.5, 0.5];
        let cost = [0.0, 1.0, 1.0, 0.0];
        let s = solve(&a, &a, &cost).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.flow, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn anti_diagonal() {
        let a = [0.25, 0.75];
        let b = [0.75, 0.25];
        let cost = [1.0, 0.0, 0.0, 1.0];
        let s = solve(&a, &b, &cost).unwrap();
        assert_eq!(s.value, 0.0);
        assert!((s.flow[1] - 0.25).abs() < 1e-15 && (s.flow[2] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n1 = rng.gen_range(1..=4);
            let n2 = rng.gen_range(1..=4);
            let mut a: Vec<f64> = (0..n1).map(|_| rng.gen_range(0.05..1.0)).collect();
            let mut b: Vec<f64> = (0..n2).map(|_| rng.gen_range(0.05..1.0)).collect();
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let cost: Vec<f64> = (0..n1 * n2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = solve(&a, &b, &cost).unwrap();
            let o = enumerate_vertices(&a, &b, &cost).unwrap();
            assert!((s.value - o).abs() < 1e-12, "{} vs {}", s.value, o);
        }
    }

    #[test]
    fn degenerate_marginals() {
        // equal partial sums force zero-flow basic cells
        let a = [0.25, 0.25, 0.25, 0.25];
        let cost: Vec<f64> = (0..16).map(|k| ((k / 4) as f64 - (k % 4) as f64).powi(2)).collect();
        let rev: Vec<f64> = (0..16).map(|k| -(((k / 4) * (3 - k % 4)) as f64)).collect();
        assert_eq!(solve(&a, &a, &cost).unwrap().value, 0.0);
        let s = solve(&a, &a, &rev).unwrap();
        assert!((s.value - enumerate_vertices(&a, &a, &rev).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn larger_instance_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let a = vec![1.0 / n as f64; n];
        let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s = solve(&a, &a, &cost).unwrap();
        for (row, ai) in s.flow.chunks(n).zip(&a) {
            let r: f64 = row.iter().sum();
            assert!((r - ai).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_oversize() {
        let a = vec![1.0 / 513.0; 513];
        let cost = vec![0.0; 513];
        assert!(solve(&a, &[1.0], &cost).is_err());
    }
}
