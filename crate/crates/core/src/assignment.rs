//! Exact square assignment: minimum-sum (Hungarian, O(n^3)) and bottleneck (threshold search
//! over sorted costs with Hopcroft-Karp feasibility).

use std::collections::VecDeque;

/// Row-major square cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Minimum-sum assignment. Returns `(total cost, column assigned to each row)`.
pub fn min_sum_assignment(cost: &CostMatrix) -> (f64, Vec<usize>) {
    let n = cost.n;
    if n == 0 {
        return (0.0, Vec::new());
    }
    // potentials and matching are 1-based; index 0 is the virtual column
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &cost.data[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost.get(i, col_of[i])).sum();
    (total, col_of)
}

/// Whether a perfect matching exists using only edges with `cost <= threshold`.
fn perfect_matching_within(cost: &CostMatrix, threshold: f64) -> bool {
    let n = cost.n;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| cost.get(i, j) <= threshold).collect())
        .collect();
    if adj.iter().any(Vec::is_empty) {
        return false;
    }
    hopcroft_karp(&adj, n) == n
}

const FREE: usize = usize::MAX;

fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> usize {
    let n_left = adj.len();
    let mut match_l = vec![FREE; n_left];
    let mut match_r = vec![FREE; n_right];
    let mut dist = vec![0usize; n_left];
    let mut matched = 0;
    loop {
        // layered BFS from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                let m = match_r[w];
                if m == FREE {
                    found = true;
                } else if dist[m] == usize::MAX {
                    dist[m] = dist[u] + 1;
                    queue.push_back(m);
                }
            }
        }
        if !found {
            return matched;
        }
        let mut next = vec![0usize; n_left];
        for u in 0..n_left {
            if match_l[u] == FREE
                && augment(u, adj, &mut match_l, &mut match_r, &mut dist, &mut next)
            {
                matched += 1;
            }
        }
    }
}

/// Iterative DFS along the BFS layers.
fn augment(
    root: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    let mut stack = vec![root];
    while let Some(&u) = stack.last() {
        if next[u] == adj[u].len() {
            dist[u] = usize::MAX;
            stack.pop();
            continue;
        }
        let w = adj[u][next[u]];
        next[u] += 1;
        let m = match_r[w];
        if m == FREE {
            // flip the path recorded on the stack
            let mut w = w;
            while let Some(u) = stack.pop() {
                let prev = match_l[u];
                match_l[u] = w;
                match_r[w] = u;
                w = prev;
            }
            return true;
        }
        if dist[m] == dist[u] + 1 {
            stack.push(m);
        }
    }
    false
}

/// Smallest `t` such that some permutation uses only costs `<= t`.
pub fn bottleneck_assignment(cost: &CostMatrix) -> f64 {
    if cost.n == 0 {
        return 0.0;
    }
    let mut values = cost.data.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    // every row needs at least its cheapest edge, so start the search there
    let floor = (0..cost.n)
        .map(|i| {
            (0..cost.n)
                .map(|j| cost.get(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lo = values.partition_point(|&c| c < floor);
    let mut hi = values.len() - 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if perfect_matching_within(cost, values[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    values[lo]
}
