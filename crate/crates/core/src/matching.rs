//! Maximum bipartite matching (Hopcroft–Karp).

use std::collections::VecDeque;

const FREE: usize = usize::MAX;

/// Bipartite graph with `left` nodes on one side and `right` on the other,
/// stored as adjacency lists from left to right.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    right: usize,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize) -> Self {
        BipartiteGraph {
            right,
            adj: vec![Vec::new(); left],
        }
    }

    pub fn add_edge(&mut self, l: usize, r: usize) {
        debug_assert!(r < self.right);
        self.adj[l].push(r);
    }

    pub fn left_len(&self) -> usize {
        self.adj.len()
    }

    pub fn right_len(&self) -> usize {
        self.right
    }

    /// Size of a maximum matching together with the partner of each left node.
    pub fn maximum_matching(&self) -> (usize, Vec<Option<usize>>) {
        let n = self.adj.len();
        let mut match_left = vec![FREE; n];
        let mut match_right = vec![FREE; self.right];
        let mut dist = vec![0usize; n];
        let mut size = 0;

        while self.bfs(&match_left, &match_right, &mut dist) {
            let mut next = vec![0usize; n];
            for l in 0..n {
                if match_left[l] == FREE
                    && self.dfs(l, &mut match_left, &mut match_right, &mut dist, &mut next)
                {
                    size += 1;
                }
            }
        }
        let partners = match_left
            .into_iter()
            .map(|r| (r != FREE).then_some(r))
            .collect();
        (size, partners)
    }

    pub fn has_perfect_matching(&self) -> bool {
        self.adj.len() == self.right && self.maximum_matching().0 == self.right
    }

    fn bfs(&self, match_left: &[usize], match_right: &[usize], dist: &mut [usize]) -> bool {
        let mut queue = VecDeque::new();
        for (l, &m) in match_left.iter().enumerate() {
            if m == FREE {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = usize::MAX;
            }
        }
        let mut reachable_free = false;
        while let Some(l) = queue.pop_front() {
            for &r in &self.adj[l] {
                let owner = match_right[r];
                if owner == FREE {
                    reachable_free = true;
                } else if dist[owner] == usize::MAX {
                    dist[owner] = dist[l] + 1;
                    queue.push_back(owner);
                }
            }
        }
        reachable_free
    }

    fn dfs(
        &self,
        l: usize,
        match_left: &mut [usize],
        match_right: &mut [usize],
        dist: &mut [usize],
        next: &mut [usize],
    ) -> bool {
        while next[l] < self.adj[l].len() {
            let r = self.adj[l][next[l]];
            next[l] += 1;
            let owner = match_right[r];
            let advance = owner == FREE
                || (dist[owner] == dist[l] + 1
                    && self.dfs(owner, match_left, match_right, dist, next));
            if advance {
                match_left[l] = r;
                match_right[r] = l;
                return true;
            }
        }
        dist[l] = usize::MAX;
        false
    }
}
