//! An incrementally built subtree of the Cayley tree.
//!
//! Every node is a reduced word, stored as a trie rooted at the identity.
//! Nodes carry skew-binary jump pointers, so level ancestors and lowest
//! common ancestors cost `O(log depth)`. Distances and Gromov products
//! between stored points therefore never touch the letters themselves,
//! which is what makes long trajectories with many pivot queries cheap.

use crate::scalar::Half;
use crate::word::{Letter, ReducedWord};

/// Index of a node in a [`PathTree`].
pub type NodeId = u32;

const NONE: NodeId = NodeId::MAX;

#[derive(Clone, Debug)]
pub struct PathTree {
    degree: usize,
    parent: Vec<NodeId>,
    letter: Vec<Letter>,
    depth: Vec<u32>,
    jump: Vec<NodeId>,
    children: Vec<NodeId>,
}

impl PathTree {
    /// An empty tree for the free group of the given rank, holding only the root `o`.
    pub fn new(rank: usize) -> Self {
        let degree = 2 * rank;
        PathTree {
            degree,
            parent: vec![0],
            letter: vec![Letter::from_code(0)],
            depth: vec![0],
            jump: vec![0],
            children: vec![NONE; degree],
        }
    }

    pub const ROOT: NodeId = 0;

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn depth(&self, v: NodeId) -> usize {
        self.depth[v as usize] as usize
    }

    pub fn parent(&self, v: NodeId) -> NodeId {
        self.parent[v as usize]
    }

    /// The node reached from `v` by right-multiplying with one letter.
    pub fn step(&mut self, v: NodeId, l: Letter) -> NodeId {
        let vi = v as usize;
        if v != Self::ROOT && self.letter[vi] == l.inverse() {
            return self.parent[vi];
        }
        let slot = vi * self.degree + l.code();
        let existing = self.children[slot];
        if existing != NONE {
            return existing;
        }
        let id = self.parent.len() as NodeId;
        let p = v;
        let jp = self.jump[p as usize];
        let jjp = self.jump[jp as usize];
        let (dp, djp, djjp) = (self.depth[vi], self.depth[jp as usize], self.depth[jjp as usize]);
        let jump = if v != Self::ROOT && dp - djp == djp - djjp { jjp } else { p };
        self.parent.push(p);
        self.letter.push(l);
        self.depth.push(dp + 1);
        self.jump.push(jump);
        self.children.extend(std::iter::repeat(NONE).take(self.degree));
        self.children[slot] = id;
        id
    }

    /// The node `v · letters`.
    pub fn walk(&mut self, mut v: NodeId, letters: &[Letter]) -> NodeId {
        for &l in letters {
            v = self.step(v, l);
        }
        v
    }

    /// The node for `w`, creating it if needed.
    pub fn insert(&mut self, w: &ReducedWord) -> NodeId {
        self.walk(Self::ROOT, w.letters())
    }

    /// Ancestor of `v` at the given depth (which must not exceed `depth(v)`).
    pub fn level_ancestor(&self, mut v: NodeId, depth: usize) -> NodeId {
        debug_assert!(depth <= self.depth(v));
        let d = depth as u32;
        while self.depth[v as usize] > d {
            let j = self.jump[v as usize];
            v = if self.depth[j as usize] >= d { j } else { self.parent[v as usize] };
        }
        v
    }

    pub fn lca(&self, u: NodeId, v: NodeId) -> NodeId {
        let (du, dv) = (self.depth(u), self.depth(v));
        let (mut u, mut v) = if du > dv {
            (self.level_ancestor(u, dv), v)
        } else {
            (u, self.level_ancestor(v, du))
        };
        while u != v {
            let (ju, jv) = (self.jump[u as usize], self.jump[v as usize]);
            if ju != jv {
                u = ju;
                v = jv;
            } else {
                u = self.parent[u as usize];
                v = self.parent[v as usize];
            }
        }
        u
    }

    pub fn distance(&self, u: NodeId, v: NodeId) -> i64 {
        let w = self.lca(u, v);
        (self.depth(u) + self.depth(v) - 2 * self.depth(w)) as i64
    }

    /// The node at distance `dist` from `u` on the geodesic `[u, v]`
    /// (`dist` must not exceed `d(u, v)`). Every such node already exists.
    pub fn along(&self, u: NodeId, v: NodeId, dist: usize) -> NodeId {
        let top = self.lca(u, v);
        let up = self.depth(u) - self.depth(top);
        if dist <= up {
            self.level_ancestor(u, self.depth(u) - dist)
        } else {
            self.level_ancestor(v, self.depth(top) + dist - up)
        }
    }

    /// Twice the Gromov product `(y, z)_x`.
    pub fn gromov2(&self, y: NodeId, z: NodeId, x: NodeId) -> i64 {
        self.distance(x, y) + self.distance(x, z) - self.distance(y, z)
    }

    pub fn gromov(&self, y: NodeId, z: NodeId, x: NodeId) -> Half {
        Half::from_doubled(self.gromov2(y, z, x))
    }

    /// The reduced word spelled from the root to `v`.
    pub fn word(&self, v: NodeId) -> ReducedWord {
        let mut letters = Vec::with_capacity(self.depth(v));
        let mut u = v;
        while u != Self::ROOT {
            letters.push(self.letter[u as usize]);
            u = self.parent[u as usize];
        }
        letters.reverse();
        ReducedWord::from_reduced(letters).expect("trie paths are reduced")
    }

    /// The first `max` letters of the reduced word `from⁻¹ · to`.
    pub fn relative_prefix(&self, from: NodeId, to: NodeId, max: usize) -> Vec<Letter> {
        let top = self.lca(from, to);
        let total = self.depth(from) + self.depth(to) - 2 * self.depth(top);
        let mut out = Vec::with_capacity(max.min(total));
        let mut u = from;
        while u != top && out.len() < max {
            out.push(self.letter[u as usize].inverse());
            u = self.parent[u as usize];
        }
        let remaining = max - out.len();
        let down = (self.depth(to) - self.depth(top)).min(remaining);
        if down > 0 {
            let mut v = self.level_ancestor(to, self.depth(top) + down);
            let start = out.len();
            while v != top {
                out.push(self.letter[v as usize]);
                v = self.parent[v as usize];
            }
            out[start..].reverse();
        }
        out
    }
}
