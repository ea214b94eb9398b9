//! Static kd-tree for exact Euclidean range queries.
//!
//! Distances are compared squared, with the same accumulation order as
//! [`sq_dist`], so a query returns exactly the points a brute-force scan
//! would accept. Box pruning uses a lower bound that is monotone under
//! rounding and never discards a qualifying point.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::scalar::{sq_dist, Scalar};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct KdNode<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    start: usize,
    end: usize,
    /// Child node indices; `None` for leaves.
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KdTree<T> {
    points: Matrix<T>,
    order: Vec<usize>,
    nodes: Vec<KdNode<T>>,
}

impl<T: Scalar> KdTree<T> {
    pub fn build(points: &Matrix<T>) -> Self {
        let mut tree = Self {
            points: points.clone(),
            order: (0..points.rows()).collect(),
            nodes: Vec::new(),
        };
        if points.rows() > 0 {
            tree.build_node(0, points.rows());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let dim = self.points.cols();
        let mut lo = vec![T::infinity(); dim];
        let mut hi = vec![T::neg_infinity(); dim];
        for &i in &self.order[start..end] {
            for (j, &v) in self.points.row(i).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(KdNode {
            lo: lo.clone(),
            hi: hi.clone(),
            start,
            end,
            children: None,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).expect("finite"))
            .unwrap_or(0);
        if hi[axis] == lo[axis] {
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[(a, axis)].partial_cmp(&points[(b, axis)]).expect("finite")
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    fn box_lower_bound(node: &KdNode<T>, q: &[T]) -> T {
        let mut acc = T::zero();
        for ((&x, &lo), &hi) in q.iter().zip(&node.lo).zip(&node.hi) {
            let d = if x < lo {
                x - lo
            } else if x > hi {
                x - hi
            } else {
                T::zero()
            };
            acc += d * d;
        }
        acc
    }

    /// Calls `f(index, squared_distance)` for every point within `radius`
    /// (inclusive) of `q`, in no particular order.
    pub fn for_each_within(&self, q: &[T], radius: T, mut f: impl FnMut(usize, T)) {
        if self.nodes.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if Self::box_lower_bound(node, q) > r2 {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        let d = sq_dist(q, self.points.row(i));
                        if d <= r2 {
                            f(i, d);
                        }
                    }
                }
            }
        }
    }

    /// Indices within `radius` of `q`, ascending.
    pub fn within(&self, q: &[T], radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn count_within(&self, q: &[T], radius: T) -> usize {
        let mut n = 0;
        self.for_each_within(q, radius, |_, _| n += 1);
        n
    }
}
