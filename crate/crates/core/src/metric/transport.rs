//! Primal network simplex for the bounded-Lipschitz transport problem.
//!
//! `d_bL(c)` for a signed measure `c` equals the minimum cost of moving the
//! positive part onto the negative part on the metric `min(d, 2)`, where a
//! ground node at distance 1 from every atom absorbs or supplies any mass
//! imbalance. The network has sources (atoms with `c > 0`), sinks
//! (`c < 0`), the ground node, arcs source→sink (omitted when `d >= 2`, since
//! the detour through ground costs the same), source→ground and ground→sink.
//!
//! The spanning tree starts as the ground star, which is feasible and
//! strongly feasible because every source has positive supply. Pricing scans
//! arcs in blocks and takes the most negative reduced cost of a block; the
//! leaving arc is the last blocking arc met when traversing the cycle from
//! its apex, which keeps the tree strongly feasible and prevents cycling.
//! Pair arcs are generated on the fly from coordinates, so memory is linear
//! in the number of atoms.

use crate::error::{Error, Result};

/// Ground distance cap.
pub const CAP: f64 = 2.0;

const RC_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Edge {
    from: usize,
    to: usize,
    flow: f64,
    cost: f64,
}

/// Optimal potentials and cost of one transport instance.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Minimum transport cost.
    pub cost: f64,
    /// Node potentials: sources, then sinks, then ground (always 0).
    pub potentials: Vec<f64>,
    /// `(from, to, flow)` for every tree arc with positive flow, in node
    /// numbering.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

struct Network<'a> {
    stride: usize,
    src: &'a [f64],
    snk: &'a [f64],
    p: usize,
    q: usize,
}

impl Network<'_> {
    fn ground(&self) -> usize {
        self.p + self.q
    }

    fn nodes(&self) -> usize {
        self.p + self.q + 1
    }

    fn arcs(&self) -> usize {
        self.p * self.q + self.p + self.q
    }

    /// Scans one pricing row, keeping the most negative reduced cost in
    /// `best` as `(from, to, rc, cost)`. Returns the number of arcs seen.
    fn price_row(
        &self,
        r: usize,
        pi: &[f64],
        best: &mut Option<(usize, usize, f64, f64)>,
    ) -> usize {
        let g = self.ground();
        let mut offer = |u: usize, v: usize, rc: f64, c: f64| {
            if rc < -RC_EPS * (1.0 + c) && best.map_or(true, |b| rc < b.2) {
                *best = Some((u, v, rc, c));
            }
        };
        if r == self.p {
            for b in 0..self.q {
                let v = self.p + b;
                offer(g, v, 1.0 + pi[v], 1.0);
            }
            return self.q;
        }
        let pa = pi[r];
        offer(r, g, 1.0 - pa, 1.0);
        let s = self.stride;
        let x = &self.src[r * s..(r + 1) * s];
        for b in 0..self.q {
            // rc = d - diff is negative only if diff > d
            let diff = pa - pi[self.p + b];
            if diff <= 0.0 {
                continue;
            }
            let lim = (diff * diff).min(CAP * CAP);
            let y = &self.snk[b * s..(b + 1) * s];
            let mut d2 = 0.0;
            for (u, w) in x.iter().zip(y) {
                d2 += (u - w) * (u - w);
            }
            if d2 < lim {
                let d = d2.sqrt();
                offer(r, self.p + b, d - diff, d);
            }
        }
        self.q + 1
    }
}

struct Tree {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    parent_edge: Vec<usize>,
    depth: Vec<u32>,
    pi: Vec<f64>,
    root: usize,
}

impl Tree {
    fn rebuild(&mut self) {
        let root = self.root;
        self.parent[root] = usize::MAX;
        self.parent_edge[root] = usize::MAX;
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        self.hang(root);
    }

    /// Recomputes parent, depth and potential below `top`, whose own entries
    /// are already correct.
    fn hang(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            for k in 0..self.adj[v].len() {
                let e = self.adj[v][k];
                if e == self.parent_edge[v] {
                    continue;
                }
                let ed = self.edges[e];
                let w = if ed.from == v { ed.to } else { ed.from };
                self.set_parent(w, v, e);
                stack.push(w);
            }
        }
    }

    fn set_parent(&mut self, w: usize, v: usize, e: usize) {
        let ed = self.edges[e];
        self.parent[w] = v;
        self.parent_edge[w] = e;
        self.depth[w] = self.depth[v] + 1;
        // tree arcs have zero reduced cost: pi_from - pi_to = cost
        self.pi[w] = if ed.from == v {
            self.pi[v] - ed.cost
        } else {
            self.pi[v] + ed.cost
        };
    }
}

/// Solves the transport problem between `src` atoms with supplies
/// `supply > 0` and `snk` atoms with demands `demand > 0` (coordinates flat
/// with the given stride).
pub fn solve_transport(
    stride: usize,
    src: &[f64],
    supply: &[f64],
    snk: &[f64],
    demand: &[f64],
) -> Result<TransportSolution> {
    let net = Network {
        stride,
        src,
        snk,
        p: supply.len(),
        q: demand.len(),
    };
    debug_assert!(supply.iter().all(|&s| s > 0.0) && demand.iter().all(|&d| d > 0.0));
    let g = net.ground();
    let nv = net.nodes();

    let mut edges = Vec::with_capacity(nv - 1);
    let mut adj = vec![Vec::new(); nv];
    for a in 0..net.p {
        edges.push(Edge {
            from: a,
            to: g,
            flow: supply[a],
            cost: 1.0,
        });
    }
    for b in 0..net.q {
        edges.push(Edge {
            from: g,
            to: net.p + b,
            flow: demand[b],
            cost: 1.0,
        });
    }
    for (e, ed) in edges.iter().enumerate() {
        adj[ed.from].push(e);
        adj[ed.to].push(e);
    }
    let mut tree = Tree {
        edges,
        adj,
        parent: vec![0; nv],
        parent_edge: vec![0; nv],
        depth: vec![0; nv],
        pi: vec![0.0; nv],
        root: g,
    };
    tree.rebuild();

    let m = net.arcs();
    let block = ((m as f64).sqrt().ceil() as usize).max(64);
    let max_pivots = 200 * nv + 10_000;
    let rows = net.p + 1;
    let mut row = 0usize;
    let mut pivots = 0usize;

    loop {
        // block pricing over rows: source a's arcs, then the ground row
        let mut best: Option<(usize, usize, f64, f64)> = None;
        let mut in_block = 0;
        for _ in 0..rows {
            let r = row;
            row = if row + 1 == rows { 0 } else { row + 1 };
            in_block += net.price_row(r, &tree.pi, &mut best);
            if best.is_some() && in_block >= block {
                break;
            }
        }
        let Some((i, j, _, cost)) = best else {
            break;
        };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::SolverStall { pivots });
        }
        pivot(&mut tree, i, j, cost)?;
    }

    let mut total = 0.0;
    let mut flows = Vec::new();
    for e in &tree.edges {
        total += e.flow * e.cost;
        if e.flow > 0.0 {
            flows.push((e.from, e.to, e.flow));
        }
    }
    Ok(TransportSolution {
        cost: total,
        potentials: tree.pi,
        flows,
        pivots,
    })
}

fn pivot(tree: &mut Tree, i: usize, j: usize, cost: f64) -> Result<()> {
    // paths from i and j up to the apex, as (edge, forward-in-cycle)
    let mut side_i = Vec::new();
    let mut side_j = Vec::new();
    let (mut a, mut b) = (i, j);
    while a != b {
        if tree.depth[a] >= tree.depth[b] {
            let e = tree.parent_edge[a];
            // traversed parent -> a
            side_i.push((e, tree.edges[e].to == a));
            a = tree.parent[a];
        } else {
            let e = tree.parent_edge[b];
            // traversed b -> parent
            side_j.push((e, tree.edges[e].from == b));
            b = tree.parent[b];
        }
    }

    // cycle order from the apex: side_i reversed, entering arc, side_j
    let mut theta = f64::INFINITY;
    for &(e, fwd) in side_i.iter().chain(&side_j) {
        if !fwd {
            theta = theta.min(tree.edges[e].flow);
        }
    }
    if !theta.is_finite() {
        return Err(Error::Unbounded);
    }
    let on_j = side_j
        .iter()
        .rev()
        .find(|&&(e, fwd)| !fwd && tree.edges[e].flow <= theta);
    // the subtree cut off by the leaving arc contains the entering endpoint
    // on the same side
    let (leaving, cut_side) = match on_j {
        Some(&(e, _)) => (e, j),
        None => (
            side_i
                .iter()
                .find(|&&(e, fwd)| !fwd && tree.edges[e].flow <= theta)
                .map(|&(e, _)| e)
                .expect("a blocking arc exists"),
            i,
        ),
    };

    for &(e, fwd) in side_i.iter().chain(&side_j) {
        let f = &mut tree.edges[e].flow;
        if fwd {
            *f += theta;
        } else {
            *f = (*f - theta).max(0.0);
        }
    }

    let old = tree.edges[leaving];
    for v in [old.from, old.to] {
        let pos = tree.adj[v]
            .iter()
            .position(|&x| x == leaving)
            .expect("adjacent");
        tree.adj[v].swap_remove(pos);
    }
    tree.edges[leaving] = Edge {
        from: i,
        to: j,
        flow: theta,
        cost,
    };
    tree.adj[i].push(leaving);
    tree.adj[j].push(leaving);
    let other = if cut_side == i { j } else { i };
    tree.set_parent(cut_side, other, leaving);
    tree.hang(cut_side);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_moves_directly() {
        let s = solve_transport(1, &[0.0], &[1.0], &[0.5], &[1.0]).unwrap();
        assert!((s.cost - 0.5).abs() < 1e-15);
    }

    #[test]
    fn far_pair_goes_through_ground() {
        let s = solve_transport(1, &[0.0], &[1.0], &[3.0], &[1.0]).unwrap();
        assert!((s.cost - 2.0).abs() < 1e-15);
        assert_eq!(s.pivots, 0);
    }

    #[test]
    fn imbalance_is_absorbed_by_ground() {
        let s = solve_transport(1, &[0.0], &[3.0], &[0.25], &[1.0]).unwrap();
        assert!((s.cost - (0.25 + 2.0)).abs() < 1e-14);
        let s = solve_transport(1, &[], &[], &[0.0], &[2.0]).unwrap();
        assert!((s.cost - 2.0).abs() < 1e-15);
    }

    #[test]
    fn crossing_assignment_is_uncrossed() {
        // sources at 0 and 1, sinks at 1.1 and 0.1
        let s = solve_transport(1, &[0.0, 1.0], &[1.0, 1.0], &[1.1, 0.1], &[1.0, 1.0]).unwrap();
        assert!((s.cost - 0.2).abs() < 1e-14);
    }

    #[test]
    fn tree_potentials_are_dual_feasible() {
        let src = [0.0, 0.3, 0.9, 1.7];
        let snk = [0.2, 1.0, 2.5];
        let s = solve_transport(1, &src, &[0.4, 0.1, 0.7, 0.2], &snk, &[0.3, 0.5, 0.2]).unwrap();
        let pi = &s.potentials;
        for (a, x) in src.iter().enumerate() {
            assert!(pi[a] - pi[7] <= 1.0 + 1e-12);
            for (b, y) in snk.iter().enumerate() {
                let d = (x - y).abs().min(2.0);
                assert!(pi[a] - pi[4 + b] <= d + 1e-12);
            }
        }
        for b in 0..3 {
            assert!(pi[7] - pi[4 + b] <= 1.0 + 1e-12);
        }
    }
}
