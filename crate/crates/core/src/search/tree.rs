//! Arena-backed search tree over workflow prefixes, with the composite
//! score, quantile coloring and UCB child selection.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Black,
}

/// How many children a node may hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChildCap {
    /// At most `M` children.
    Fixed(usize),
    /// Every available action may become a child.
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub parent: Option<NodeId>,
    /// Action appended to the parent's prefix; `None` for the root.
    pub action: Option<usize>,
    pub depth: usize,
    /// Visit count N.
    pub visits: u64,
    /// Accumulated reward Q.
    pub reward: f64,
    pub children: Vec<NodeId>,
    pub color: Color,
    /// Killed by an execution failure inside its prefix.
    pub failed: bool,
    /// At maximum depth or ended by the stop action.
    pub complete: bool,
    /// No further iteration can usefully enter this subtree.
    pub dead: bool,
    /// Rollouts simulated at this node and the reward they produced.
    pub own_rollouts: u64,
    pub own_reward: f64,
}

impl Node {
    fn new(parent: Option<NodeId>, action: Option<usize>, depth: usize, complete: bool) -> Self {
        Self {
            parent,
            action,
            depth,
            visits: 0,
            reward: 0.0,
            children: Vec::new(),
            color: Color::Black,
            failed: false,
            complete,
            dead: false,
            own_rollouts: 0,
            own_reward: 0.0,
        }
    }

    /// Member of the terminal set: never expanded, never colored Red.
    pub fn is_terminal(&self) -> bool {
        self.failed || self.complete
    }

    pub fn mean_reward(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.reward / self.visits as f64
        }
    }
}

/// Composite potential: quality `Q/N`, times depth `(d+1)/(l_max+1)`, times
/// width `|C|/M`. Unvisited nodes score 0.
pub fn score(reward: f64, visits: u64, depth: usize, width: usize, l_max: usize, max_children: usize) -> f64 {
    if visits == 0 {
        return 0.0;
    }
    (reward / visits as f64) * ((depth + 1) as f64 / (l_max + 1) as f64) * (width as f64 / max_children as f64)
}

/// Nearest-rank `beta`-quantile: the value at 1-based rank `ceil(beta * n)`
/// of the ascending sort, or the minimum when that rank is 0.
pub fn nearest_rank_quantile(values: &[f64], beta: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (beta * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// UCT value of a visited child.
pub fn ucb_value(reward: f64, visits: u64, parent_visits: u64, kappa: f64) -> f64 {
    let ln_parent = (parent_visits.max(1) as f64).ln();
    reward / visits as f64 + kappa * (ln_parent / visits as f64).sqrt()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("node {0:?} has no live children to descend into")]
    NoChildren(NodeId),
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<Node>,
    l_max: usize,
    actions: usize,
    stop: Option<usize>,
    cap: ChildCap,
}

impl SearchTree {
    /// `actions` counts every appendable action, including the stop action
    /// when `stop` is set.
    pub fn new(actions: usize, stop: Option<usize>, l_max: usize, cap: ChildCap) -> Self {
        Self {
            nodes: vec![Node::new(None, None, 0, false)],
            l_max,
            actions,
            stop,
            cap,
        }
    }

    pub const ROOT: NodeId = NodeId(0);

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn cap(&self) -> ChildCap {
        self.cap
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn is_stop(&self, action: usize) -> bool {
        self.stop == Some(action)
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Primitive indices along the path to `id`, without the stop action.
    pub fn prefix(&self, id: NodeId) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.node(id).depth);
        let mut cur = Some(id);
        while let Some(c) = cur {
            let n = self.node(c);
            if let Some(a) = n.action {
                if !self.is_stop(a) {
                    out.push(a);
                }
            }
            cur = n.parent;
        }
        out.reverse();
        out
    }

    /// Root-to-node path, inclusive.
    pub fn path(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut cur = self.node(id).parent;
        while let Some(c) = cur {
            out.push(c);
            cur = self.node(c).parent;
        }
        out.reverse();
        out
    }

    pub fn add_child(&mut self, parent: NodeId, action: usize) -> NodeId {
        debug_assert!(self
            .node(parent)
            .children
            .iter()
            .all(|&c| self.node(c).action != Some(action)));
        let depth = self.node(parent).depth + 1;
        let complete = depth >= self.l_max || self.is_stop(action);
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node::new(Some(parent), Some(action), depth, complete));
        self.nodes[parent.0].children.push(id);
        id
    }

    /// Actions not yet used by `id`'s children. The stop action is never
    /// offered at the root.
    pub fn untried(&self, id: NodeId) -> Vec<usize> {
        let n = self.node(id);
        let used: Vec<usize> = n.children.iter().filter_map(|&c| self.node(c).action).collect();
        (0..self.actions)
            .filter(|a| !used.contains(a))
            .filter(|&a| !(n.depth == 0 && self.is_stop(a)))
            .collect()
    }

    pub fn can_expand(&self, id: NodeId) -> bool {
        let n = self.node(id);
        if n.is_terminal() || n.depth >= self.l_max {
            return false;
        }
        if let ChildCap::Fixed(m) = self.cap {
            if n.children.len() >= m {
                return false;
            }
        }
        !self.untried(id).is_empty()
    }

    /// Appends a child for an untried action drawn uniformly.
    pub fn expand_random<R: Rng + ?Sized>(&mut self, id: NodeId, rng: &mut R) -> Option<NodeId> {
        if !self.can_expand(id) {
            return None;
        }
        let untried = self.untried(id);
        let &action = untried.choose(rng)?;
        Some(self.add_child(id, action))
    }

    pub fn score_of(&self, id: NodeId, max_children: usize) -> f64 {
        let n = self.node(id);
        score(n.reward, n.visits, n.depth, n.children.len(), self.l_max, max_children)
    }

    /// Recolors every node. Non-terminal nodes scoring at least the
    /// `beta`-quantile of the non-terminal scores turn Red; everything else
    /// is Black. Returns the threshold, or `None` when every node is
    /// terminal.
    pub fn recolor(&mut self, beta: f64, max_children: usize) -> Option<f64> {
        let scores: Vec<f64> = (0..self.nodes.len())
            .map(|i| self.score_of(NodeId(i), max_children))
            .collect();
        let active: Vec<f64> = self
            .nodes
            .iter()
            .zip(&scores)
            .filter(|(n, _)| !n.is_terminal())
            .map(|(_, &s)| s)
            .collect();
        let theta = nearest_rank_quantile(&active, beta);
        for (n, &s) in self.nodes.iter_mut().zip(&scores) {
            n.color = match theta {
                Some(t) if !n.is_terminal() && s >= t => Color::Red,
                _ => Color::Black,
            };
        }
        theta
    }

    pub fn clear_colors(&mut self) {
        for n in &mut self.nodes {
            n.color = Color::Black;
        }
    }

    /// Red nodes over non-terminal nodes, 0 when there are none.
    pub fn red_fraction(&self) -> f64 {
        let active = self.nodes.iter().filter(|n| !n.is_terminal()).count();
        if active == 0 {
            return 0.0;
        }
        let red = self.nodes.iter().filter(|n| n.color == Color::Red).count();
        red as f64 / active as f64
    }

    /// UCB choice among `parent`'s live children. Unvisited children come
    /// first; ties go to the smaller action index.
    pub fn ucb_select(&self, parent: NodeId, kappa: f64) -> Result<NodeId, TreeError> {
        let p = self.node(parent);
        let mut best: Option<(bool, f64, usize, NodeId)> = None;
        for &c in &p.children {
            let child = self.node(c);
            if child.dead {
                continue;
            }
            let action = child.action.unwrap_or(usize::MAX);
            let (fresh, value) = if child.visits == 0 {
                (true, f64::INFINITY)
            } else {
                (false, ucb_value(child.reward, child.visits, p.visits, kappa))
            };
            let replace = match best {
                None => true,
                Some((bf, bv, ba, _)) => {
                    (fresh && !bf) || (fresh == bf && (value > bv || (value == bv && action < ba)))
                }
            };
            if replace {
                best = Some((fresh, value, action, c));
            }
        }
        best.map(|(_, _, _, id)| id).ok_or(TreeError::NoChildren(parent))
    }

    pub fn backup(&mut self, path: &[NodeId], reward: f64) {
        for &id in path {
            let n = self.node_mut(id);
            n.visits += 1;
            n.reward += reward;
        }
        if let Some(&leaf) = path.last() {
            let n = self.node_mut(leaf);
            n.own_rollouts += 1;
            n.own_reward += reward;
        }
    }

    /// Marks `id` failed and propagates deadness toward the root.
    pub fn mark_failed(&mut self, id: NodeId) {
        self.node_mut(id).failed = true;
        self.mark_dead(id);
    }

    /// Marks `id` unreachable; ancestors follow once they can neither
    /// expand nor descend.
    pub fn mark_dead(&mut self, id: NodeId) {
        self.node_mut(id).dead = true;
        let mut cur = self.node(id).parent;
        while let Some(c) = cur {
            if self.node(c).dead || self.can_expand(c) {
                break;
            }
            if self.node(c).children.iter().any(|&k| !self.node(k).dead) {
                break;
            }
            self.node_mut(c).dead = true;
            cur = self.node(c).parent;
        }
    }

    /// Checks visit/reward bookkeeping, the child cap and sibling
    /// uniqueness.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (id, n) in self.nodes() {
            let child_visits: u64 = n.children.iter().map(|&c| self.node(c).visits).sum();
            if n.visits != child_visits + n.own_rollouts {
                return Err(format!(
                    "{id:?}: N={} but children {} + own {}",
                    n.visits, child_visits, n.own_rollouts
                ));
            }
            let child_reward: f64 = n.children.iter().map(|&c| self.node(c).reward).sum();
            let expected = child_reward + n.own_reward;
            if (n.reward - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(format!("{id:?}: Q={} but backed-up sum {}", n.reward, expected));
            }
            if n.reward > n.visits as f64 + 1e-9 || n.reward < 0.0 {
                return Err(format!("{id:?}: Q={} outside [0, N={}]", n.reward, n.visits));
            }
            if let ChildCap::Fixed(m) = self.cap {
                if n.children.len() > m {
                    return Err(format!("{id:?}: {} children exceed cap {m}", n.children.len()));
                }
            }
            let mut actions: Vec<usize> = n.children.iter().filter_map(|&c| self.node(c).action).collect();
            actions.sort_unstable();
            if actions.windows(2).any(|w| w[0] == w[1]) {
                return Err(format!("{id:?}: duplicate child action"));
            }
            if n.depth > self.l_max {
                return Err(format!("{id:?}: depth {} beyond l_max", n.depth));
            }
            for &c in &n.children {
                if self.node(c).depth != n.depth + 1 || self.node(c).parent != Some(id) {
                    return Err(format!("{c:?}: not a one-step extension of {id:?}"));
                }
            }
        }
        Ok(())
    }
}
