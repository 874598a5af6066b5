//! Edmonds–Karp maximum flow on a dense residual matrix.

use std::collections::VecDeque;

use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Maximum flow from `source` to `sink`. Returns the value and the flow on
/// every edge (`capacity - residual`, clipped at zero).
pub fn max_flow<S: Scalar>(capacity: &Matrix<S>, source: usize, sink: usize) -> (S, Matrix<S>) {
    let n = capacity.rows();
    let mut residual = capacity.clone();
    let mut total = S::zero();
    let positive = |v: &S| v.definitely_gt(&S::zero());
    loop {
        let mut parent = vec![usize::MAX; n];
        parent[source] = source;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for v in 0..n {
                if parent[v] == usize::MAX && positive(&residual[(u, v)]) {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            break;
        }
        let mut bottleneck: Option<S> = None;
        let mut v = sink;
        while v != source {
            let u = parent[v];
            let r = residual[(u, v)].clone();
            bottleneck = Some(match bottleneck {
                None => r,
                Some(b) => b.min_of(r),
            });
            v = u;
        }
        let b = bottleneck.expect("path has at least one edge");
        let mut v = sink;
        while v != source {
            let u = parent[v];
            residual[(u, v)] -= &b;
            residual[(v, u)] += &b;
            v = u;
        }
        total += b;
    }
    let flow = Matrix::from_fn(n, n, |u, v| {
        let f = capacity[(u, v)].clone() - &residual[(u, v)];
        if f > S::zero() {
            f
        } else {
            S::zero()
        }
    });
    (total, flow)
}

/// Maximum transport from supplies `left` to demands `right` along the
/// edges where `related(i, j)` holds. Returns the value and the transport
/// plan (`left.len() × right.len()`).
pub fn bipartite_max_flow<S: Scalar>(
    left: &[S],
    right: &[S],
    related: impl Fn(usize, usize) -> bool,
) -> (S, Matrix<S>) {
    let (n, m) = (left.len(), right.len());
    let nodes = n + m + 2;
    let sink = nodes - 1;
    let mut cap = Matrix::filled(nodes, nodes, S::zero());
    for (i, w) in left.iter().enumerate() {
        cap[(0, 1 + i)] = w.clone();
    }
    for (j, w) in right.iter().enumerate() {
        cap[(1 + n + j, sink)] = w.clone();
    }
    for i in 0..n {
        for j in 0..m {
            if related(i, j) {
                // total mass is one, so a unit capacity never binds
                cap[(1 + i, 1 + n + j)] = S::one();
            }
        }
    }
    let (value, flow) = max_flow(&cap, 0, sink);
    let plan = Matrix::from_fn(n, m, |i, j| flow[(1 + i, 1 + n + j)].clone());
    (value, plan)
}
