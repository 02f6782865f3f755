use crate::sphere::{Coords, MAX_AMBIENT};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: usize, len: usize },
    Inner { left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct Node {
    lo: Coords,
    hi: Coords,
    kind: NodeKind,
}

/// Axis-aligned box hierarchy over per-item boxes in the ambient space.
#[derive(Clone, Debug)]
pub(crate) struct BoxTree {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

fn box_distance(lo: &Coords, hi: &Coords, x: &Coords) -> f64 {
    let mut sum = 0.0;
    for k in 0..MAX_AMBIENT {
        let gap = (lo[k] - x[k]).max(x[k] - hi[k]).max(0.0);
        sum += gap * gap;
    }
    sum.sqrt()
}

impl BoxTree {
    pub(crate) fn new(boxes: &[(Coords, Coords)]) -> Self {
        let mut tree = Self {
            nodes: Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1),
            order: (0..boxes.len()).collect(),
        };
        if !boxes.is_empty() {
            tree.build(boxes, 0, boxes.len());
        }
        tree
    }

    fn build(&mut self, boxes: &[(Coords, Coords)], start: usize, end: usize) -> usize {
        let mut lo = Coords::repeat(f64::INFINITY);
        let mut hi = Coords::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&boxes[i].0);
            hi = hi.sup(&boxes[i].1);
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf {
                start,
                len: end - start,
            },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let centre = |i: usize| (boxes[i].0 + boxes[i].1) * 0.5;
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centre(a)[axis].total_cmp(&centre(b)[axis]).then(a.cmp(&b))
        });
        let left = self.build(boxes, start, mid);
        let right = self.build(boxes, mid, end);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    /// Visits every item whose box lies within `radius()` of `x`, where the
    /// radius may shrink as items are visited. Nearer boxes are visited first.
    pub(crate) fn search(
        &self,
        x: &Coords,
        mut radius: impl FnMut() -> f64,
        mut visit: impl FnMut(usize),
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![(0usize, box_distance(&self.nodes[0].lo, &self.nodes[0].hi, x))];
        while let Some((id, dist)) = stack.pop() {
            if dist > radius() {
                continue;
            }
            match self.nodes[id].kind {
                NodeKind::Leaf { start, len } => {
                    for &item in &self.order[start..start + len] {
                        visit(item);
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = box_distance(&self.nodes[left].lo, &self.nodes[left].hi, x);
                    let dr = box_distance(&self.nodes[right].lo, &self.nodes[right].hi, x);
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
    }
}
