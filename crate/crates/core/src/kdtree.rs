//! Static kd-tree for exact nearest-neighbor and radius queries.
//!
//! Ties in nearest-neighbor distance resolve to the lowest point index, so
//! results match an exhaustive scan that keeps the first minimum.

const LEAF_SIZE: usize = 12;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { dim: u8, value: f64, left: u32, right: u32 },
}

#[derive(Clone, Debug)]
pub struct KdTree<const D: usize> {
    points: Vec<[f64; D]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// Result of a nearest-neighbor query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub index: usize,
    pub distance_sq: f64,
}

#[inline]
fn dist_sq<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for k in 0..D {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

impl<const D: usize> KdTree<D> {
    pub fn new(points: Vec<[f64; D]>) -> Self {
        let n = points.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        if n > 0 {
            Self::build(&points, &mut order, 0, n, &mut nodes);
        }
        Self {
            points,
            order,
            nodes,
        }
    }

    fn build(
        points: &[[f64; D]],
        order: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> u32 {
        let id = nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let slice = &mut order[start..end];
        let mut lo = [f64::INFINITY; D];
        let mut hi = [f64::NEG_INFINITY; D];
        for &i in slice.iter() {
            let p = &points[i as usize];
            for k in 0..D {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let dim = (0..D)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if !(hi[dim] > lo[dim]) {
            // All points coincide.
            nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][dim].total_cmp(&points[b as usize][dim])
        });
        let value = points[slice[mid] as usize][dim];
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = Self::build(points, order, start, start + mid, nodes);
        let right = Self::build(points, order, start + mid, end, nodes);
        nodes[id as usize] = Node::Split {
            dim: dim as u8,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64; D] {
        &self.points[index]
    }

    /// Exact nearest neighbor; `None` on an empty tree.
    pub fn nearest(&self, query: &[f64; D]) -> Option<Nearest> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Nearest {
            index: usize::MAX,
            distance_sq: f64::INFINITY,
        };
        self.nearest_rec(0, query, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: u32, q: &[f64; D], best: &mut Nearest) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d = dist_sq(&self.points[i as usize], q);
                    let i = i as usize;
                    if d < best.distance_sq || (d == best.distance_sq && i < best.index) {
                        *best = Nearest {
                            index: i,
                            distance_sq: d,
                        };
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let delta = q[dim as usize] - value;
                let (near, far) = if delta < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_rec(near, q, best);
                // `<=` keeps equal-distance candidates with lower indices reachable.
                if delta * delta <= best.distance_sq {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// Indices of all points within `radius` (inclusive), in ascending order.
    pub fn within(&self, query: &[f64; D], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(query, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Visits every point within `radius` with its squared distance, in tree order.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, query: &[f64; D], radius: f64, mut f: F) {
        if self.points.is_empty() {
            return;
        }
        let r2 = radius * radius;
        self.within_rec(0, query, r2, &mut f);
    }

    fn within_rec<F: FnMut(usize, f64)>(&self, node: u32, q: &[f64; D], r2: f64, f: &mut F) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d = dist_sq(&self.points[i as usize], q);
                    if d <= r2 {
                        f(i as usize, d);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let delta = q[dim as usize] - value;
                if delta <= 0.0 || delta * delta <= r2 {
                    self.within_rec(left, q, r2, f);
                }
                if delta >= 0.0 || delta * delta <= r2 {
                    self.within_rec(right, q, r2, f);
                }
            }
        }
    }
}
