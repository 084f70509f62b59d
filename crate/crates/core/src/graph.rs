//! Existence and uniqueness of the NPMLE.
//!
//! Vertex `i` has an edge to vertex `j` when `x_j` lies in the closed window
//! `[u_i, v_i]`. The NPMLE exists and is unique exactly when this digraph is
//! strongly connected.
//!
//! Sorting the lifetimes turns every out-neighbourhood into a contiguous range
//! of sorted positions, so the SCC search below never materialises the (up to
//! quadratic) edge list. It is Tarjan's algorithm with two range structures:
//! a "next unvisited position" union-find for tree edges and a segment tree
//! holding the discovery index of every vertex still on the Tarjan stack.
//! Total cost is `O(n log n)`.
//!
//! A vertex set is strongly connected in an induced subgraph only if it lies
//! inside a single SCC of the full graph, so the largest SCC is the largest
//! subsample on which the NPMLE exists and is unique.

use serde::Serialize;

use crate::data::Sample;
use crate::error::Result;

/// The observation digraph in range form.
#[derive(Debug, Clone)]
pub struct ObservationDigraph {
    /// sorted position -> original index
    order: Vec<usize>,
    /// original index -> sorted position
    position: Vec<usize>,
    /// per original vertex, the half-open range of sorted positions it points to
    ranges: Vec<(usize, usize)>,
}

impl ObservationDigraph {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        let (lo, hi) = self.ranges[from];
        let p = self.position[to];
        lo <= p && p < hi
    }

    /// Original indices `j` with `u_from <= x_j <= v_from`, in lifetime order.
    pub fn out_neighbors(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        let (lo, hi) = self.ranges[from];
        self.order[lo..hi].iter().copied()
    }

    /// `S~_j`: number of lifetimes inside window `j` (itself included).
    pub fn out_degree(&self, j: usize) -> usize {
        let (lo, hi) = self.ranges[j];
        hi - lo
    }

    /// `S_j` for every vertex: number of windows containing `x_j`.
    pub fn in_degrees(&self) -> Vec<usize> {
        let n = self.n();
        let mut diff = vec![0isize; n + 1];
        for &(lo, hi) in &self.ranges {
            diff[lo] += 1;
            diff[hi] -= 1;
        }
        let mut by_pos = vec![0usize; n];
        let mut acc = 0isize;
        for p in 0..n {
            acc += diff[p];
            by_pos[p] = acc as usize;
        }
        (0..n).map(|j| by_pos[self.position[j]]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.ranges.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Strongly connected components as sorted lists of original indices.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let by_pos = scc_by_position(&self.ranges_by_position());
        by_pos
            .into_iter()
            .map(|comp| {
                let mut c: Vec<usize> = comp.into_iter().map(|p| self.order[p]).collect();
                c.sort_unstable();
                c
            })
            .collect()
    }

    fn ranges_by_position(&self) -> Vec<(usize, usize)> {
        self.order.iter().map(|&i| self.ranges[i]).collect()
    }
}

/// Builds the observation digraph of `sample`.
pub fn build_graph(sample: &Sample) -> ObservationDigraph {
    let obs = sample.observations();
    let n = obs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| obs[a].x.total_cmp(&obs[b].x).then(a.cmp(&b)));
    let mut position = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        position[i] = p;
    }
    let xs: Vec<f64> = order.iter().map(|&i| obs[i].x).collect();
    let ranges = obs
        .iter()
        .map(|o| (xs.partition_point(|&x| x < o.u), xs.partition_point(|&x| x <= o.v)))
        .collect();
    ObservationDigraph { order, position, ranges }
}

/// Outcome of the existence check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExistenceReport {
    pub n: usize,
    pub exists_unique: bool,
    pub scc_count: usize,
    /// Largest component (ties: the one holding the smallest index).
    pub largest_scc: Vec<usize>,
    /// Indices `j` with `S_j = 1` or `S~_j = 1`.
    pub necessary_violations: Vec<usize>,
}

pub fn check_existence(sample: &Sample) -> ExistenceReport {
    let graph = build_graph(sample);
    report_for(&graph)
}

fn report_for(graph: &ObservationDigraph) -> ExistenceReport {
    let n = graph.n();
    let comps = graph.strongly_connected_components();
    let in_deg = graph.in_degrees();
    let necessary_violations = (0..n)
        .filter(|&j| n > 1 && (in_deg[j] == 1 || graph.out_degree(j) == 1))
        .collect();
    let largest_scc = pick_largest(&comps).clone();
    ExistenceReport {
        n,
        exists_unique: comps.len() == 1,
        scc_count: comps.len(),
        largest_scc,
        necessary_violations,
    }
}

fn pick_largest(comps: &[Vec<usize>]) -> &Vec<usize> {
    // components are sorted, so c[0] is the smallest original index
    comps
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
        .expect("a non-empty sample has at least one component")
}

/// Restricts `sample` to its largest strongly connected component.
///
/// Returns the subsample (original order preserved) and the removed indices.
pub fn largest_valid_subsample(sample: &Sample) -> Result<(Sample, Vec<usize>)> {
    let graph = build_graph(sample);
    let comps = graph.strongly_connected_components();
    if comps.len() == 1 {
        return Ok((sample.clone(), Vec::new()));
    }
    let keep = pick_largest(&comps);
    let mut keep_mask = vec![false; sample.len()];
    for &i in keep {
        keep_mask[i] = true;
    }
    let removed = (0..sample.len()).filter(|&i| !keep_mask[i]).collect();
    Ok((sample.subset(keep)?, removed))
}

/// Smallest unvisited position `>= k`, with path halving.
struct NextUnvisited {
    parent: Vec<usize>,
}

impl NextUnvisited {
    fn new(n: usize) -> Self {
        Self { parent: (0..=n).collect() }
    }

    fn find(&mut self, mut k: usize) -> usize {
        while self.parent[k] != k {
            self.parent[k] = self.parent[self.parent[k]];
            k = self.parent[k];
        }
        k
    }

    fn mark(&mut self, k: usize) {
        self.parent[k] = k + 1;
    }
}

struct MinTree {
    size: usize,
    data: Vec<usize>,
}

impl MinTree {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two().max(1);
        Self { size, data: vec![usize::MAX; 2 * size] }
    }

    fn set(&mut self, pos: usize, value: usize) {
        let mut i = pos + self.size;
        self.data[i] = value;
        while i > 1 {
            i /= 2;
            self.data[i] = self.data[2 * i].min(self.data[2 * i + 1]);
        }
    }

    /// Minimum over `[lo, hi)`.
    fn min(&self, lo: usize, hi: usize) -> usize {
        let (mut l, mut r) = (lo + self.size, hi + self.size);
        let mut best = usize::MAX;
        while l < r {
            if l & 1 == 1 {
                best = best.min(self.data[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                best = best.min(self.data[r]);
            }
            l /= 2;
            r /= 2;
        }
        best
    }
}

/// Tarjan over sorted positions where vertex `p` points to `ranges[p]`.
fn scc_by_position(ranges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let n = ranges.len();
    const UNSEEN: usize = usize::MAX;
    let mut disc = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut unvisited = NextUnvisited::new(n);
    let mut on_stack = MinTree::new(n);
    let mut stack: Vec<usize> = Vec::new();
    let mut calls: Vec<usize> = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;

    let mut visit = |p: usize,
                     disc: &mut [usize],
                     low: &mut [usize],
                     unvisited: &mut NextUnvisited,
                     on_stack: &mut MinTree,
                     stack: &mut Vec<usize>| {
        disc[p] = counter;
        low[p] = counter;
        on_stack.set(p, counter);
        unvisited.mark(p);
        stack.push(p);
        counter += 1;
    };

    for root in 0..n {
        if disc[root] != UNSEEN {
            continue;
        }
        visit(root, &mut disc, &mut low, &mut unvisited, &mut on_stack, &mut stack);
        calls.push(root);
        while let Some(&v) = calls.last() {
            let (lo, hi) = ranges[v];
            let w = unvisited.find(lo);
            if w < hi {
                visit(w, &mut disc, &mut low, &mut unvisited, &mut on_stack, &mut stack);
                calls.push(w);
                continue;
            }
            // every neighbour is visited now; on-stack ones that are not
            // descendants of v still sit below v on the stack
            low[v] = low[v].min(on_stack.min(lo, hi));
            calls.pop();
            if low[v] == disc[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("v is on the stack");
                    on_stack.set(w, usize::MAX);
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
            if let Some(&parent) = calls.last() {
                low[parent] = low[parent].min(low[v]);
            }
        }
    }
    comps
}
