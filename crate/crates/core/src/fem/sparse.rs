//! Compressed sparse symmetric matrices and a sparse Cholesky factorization
//! with nested-dissection ordering.

use crate::error::{Error, Result};

/// Symmetric matrix in compressed sparse row form. Both triangles are
/// stored; column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// input order so the result does not depend on thread scheduling.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().cloned().zip(self.values[r].iter().cloned())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    /// `x^T A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let mut r = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.values[p] * y[self.col_idx[p]];
            }
            s += xi * r;
        }
        s
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SparseSym, b: f64) -> SparseSym {
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        SparseSym::from_triplets(self.n, t)
    }

    pub fn scaled(&self, c: f64) -> SparseSym {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
            .collect()
    }
}

const DISSECTION_LEAF: usize = 64;

/// Fill-reducing elimination order by recursive BFS level-set bisection.
/// Returns `perm` with `perm[k]` the original index eliminated `k`-th.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut region = vec![0usize; n];
    let mut perm = Vec::with_capacity(n);
    let mut next_region = 1usize;
    // work items: Dissect(region nodes) or Emit(separator); emitted in post-order
    enum Work {
        Dissect(usize, Vec<usize>),
        Emit(Vec<usize>),
    }
    let mut work = vec![Work::Dissect(0, (0..n).collect())];
    let mut level = vec![usize::MAX; n];
    while let Some(item) = work.pop() {
        match item {
            Work::Emit(nodes) => perm.extend(nodes),
            Work::Dissect(id, nodes) => {
                if nodes.len() <= DISSECTION_LEAF {
                    perm.extend(bfs_order(adj, &region, id, &nodes, &mut level));
                    continue;
                }
                // split off connected components first
                let comps = components(adj, &region, id, &nodes, &mut level);
                if comps.len() > 1 {
                    for c in comps.into_iter().rev() {
                        let r = next_region;
                        next_region += 1;
                        for &v in &c {
                            region[v] = r;
                        }
                        work.push(Work::Dissect(r, c));
                    }
                    continue;
                }
                let start = pseudo_peripheral(adj, &region, id, nodes[0], &mut level);
                let levels = level_sets(adj, &region, id, start, &mut level);
                if levels.len() < 3 {
                    perm.extend(bfs_order(adj, &region, id, &nodes, &mut level));
                    continue;
                }
                let mid = levels.len() / 2;
                let (ra, rb) = (next_region, next_region + 1);
                next_region += 2;
                let mut a = Vec::new();
                let mut b = Vec::new();
                for (l, set) in levels.iter().enumerate() {
                    if l < mid {
                        a.extend(set.iter().cloned());
                    } else if l > mid {
                        b.extend(set.iter().cloned());
                    }
                }
                for &v in &a {
                    region[v] = ra;
                }
                for &v in &b {
                    region[v] = rb;
                }
                let sep = levels[mid].clone();
                for &v in &sep {
                    region[v] = usize::MAX;
                }
                work.push(Work::Emit(sep));
                work.push(Work::Dissect(rb, b));
                work.push(Work::Dissect(ra, a));
            }
        }
    }
    perm
}

fn level_sets(adj: &[Vec<usize>], region: &[usize], id: usize, start: usize, level: &mut [usize]) -> Vec<Vec<usize>> {
    let mut sets = vec![vec![start]];
    let mut visited = vec![start];
    level[start] = 0;
    loop {
        let mut next = Vec::new();
        for &v in sets.last().expect("nonempty") {
            for &w in &adj[v] {
                if region[w] == id && level[w] == usize::MAX {
                    level[w] = sets.len();
                    next.push(w);
                    visited.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        sets.push(next);
    }
    for v in visited {
        level[v] = usize::MAX;
    }
    sets
}

fn pseudo_peripheral(adj: &[Vec<usize>], region: &[usize], id: usize, seed: usize, level: &mut [usize]) -> usize {
    let mut start = seed;
    let mut depth = 0;
    for _ in 0..8 {
        let sets = level_sets(adj, region, id, start, level);
        if sets.len() <= depth {
            break;
        }
        depth = sets.len();
        let last = sets.last().expect("nonempty");
        let deg = |v: usize| adj[v].iter().filter(|&&w| region[w] == id).count();
        start = *last.iter().min_by_key(|&&v| deg(v)).expect("nonempty");
    }
    start
}

fn components(adj: &[Vec<usize>], region: &[usize], id: usize, nodes: &[usize], level: &mut [usize]) -> Vec<Vec<usize>> {
    let mut seen = 0;
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut marked = Vec::new();
    for &s in nodes {
        if level[s] != usize::MAX {
            continue;
        }
        let mut comp = vec![s];
        level[s] = 0;
        marked.push(s);
        let mut head = 0;
        while head < comp.len() {
            let v = comp[head];
            head += 1;
            for &w in &adj[v] {
                if region[w] == id && level[w] == usize::MAX {
                    level[w] = 0;
                    marked.push(w);
                    comp.push(w);
                }
            }
        }
        seen += comp.len();
        comps.push(comp);
        if seen == nodes.len() {
            break;
        }
    }
    for v in marked {
        level[v] = usize::MAX;
    }
    comps
}

fn bfs_order(adj: &[Vec<usize>], region: &[usize], id: usize, nodes: &[usize], level: &mut [usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(nodes.len());
    for c in components(adj, region, id, nodes, level) {
        out.extend(c);
    }
    out
}

/// `L L^T = P A P^T` with `L` stored by columns.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.n;
        let perm = nested_dissection(&a.adjacency());
        let mut pinv = vec![0usize; n];
        for (k, &i) in perm.iter().enumerate() {
            pinv[i] = k;
        }
        // upper triangle of P A P^T by columns
        let mut cnt = vec![0usize; n + 1];
        for i in 0..n {
            for (j, _) in a.row(i) {
                let (r, c) = (pinv[i], pinv[j]);
                if r <= c {
                    cnt[c + 1] += 1;
                }
            }
        }
        for c in 0..n {
            cnt[c + 1] += cnt[c];
        }
        let cp = cnt.clone();
        let mut next = cnt;
        let mut ci = vec![0usize; cp[n]];
        let mut cx = vec![0.0; cp[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (r, c) = (pinv[i], pinv[j]);
                if r <= c {
                    ci[next[c]] = r;
                    cx[next[c]] = v;
                    next[c] += 1;
                }
            }
        }

        let parent = etree(n, &cp, &ci);
        let mut mark = vec![usize::MAX; n];
        let mut stack = vec![0usize; n];
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut mark, &mut stack);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let mut fill = col_ptr.clone();
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut x = vec![0.0; n];
        mark.iter_mut().for_each(|m| *m = usize::MAX);
        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut mark, &mut stack);
            x[k] = 0.0;
            for p in cp[k]..cp[k + 1] {
                x[ci[p]] = cx[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..fill[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = fill[i];
                fill[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if d.is_nan() || d <= 0.0 {
                return Err(Error::Factorization(format!(
                    "matrix not positive definite at pivot {k} ({d:.3e})"
                )));
            }
            let p = fill[k];
            fill[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }
        Ok(Self {
            n,
            perm,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for j in 0..n {
            let p0 = self.col_ptr[j];
            y[j] /= self.values[p0];
            let yj = y[j];
            for p in p0 + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let p0 = self.col_ptr[j];
            let mut s = y[j];
            for p in p0 + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.values[p0];
        }
        let mut x = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }
}

/// Elimination tree of an upper-triangular pattern stored by columns.
fn etree(n: usize, cp: &[usize], ci: &[usize]) -> Vec<usize> {
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for &r in &ci[cp[k]..cp[k + 1]] {
            let mut i = r;
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L`, written to `stack[top..]` in
/// topological order.
fn ereach(k: usize, cp: &[usize], ci: &[usize], parent: &[usize], mark: &mut [usize], stack: &mut [usize]) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    for &r in &ci[cp[k]..cp[k + 1]] {
        if r >= k {
            continue;
        }
        let mut len = 0;
        let mut i = r;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}
