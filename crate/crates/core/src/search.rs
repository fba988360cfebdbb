//! Best-first tree search: plain A* and Iterative Diving Search (IDS).
//!
//! Both work on any [`SearchSpace`]. The space is a tree, so no visited set
//! is kept.
//!
//! IDS keeps a bounded min-priority queue of parked nodes. Expanding a node
//! continues immediately with its cheapest child, which is never enqueued;
//! the other children are offered to the queue, and when it is full the
//! worst entry (among the queue and the offered node) is dropped. Reaching a
//! goal updates the incumbent and consumes one trial; reaching a goal or a
//! childless node restarts from the best parked node. The search ends when
//! the trials are used up, the queue runs dry, or the expansion budget is
//! spent.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A tree explored by [`astar`] and [`ids`].
pub trait SearchSpace {
    type Node;

    /// Children of `node`, cheapest first. Empty for leaves.
    fn expand(&mut self, node: &Self::Node) -> Vec<Self::Node>;

    /// Priority `g + h`.
    fn f(&self, node: &Self::Node) -> f64;

    fn is_goal(&self, node: &Self::Node) -> bool;

    fn depth(&self, node: &Self::Node) -> usize;

    /// Cost used to rank goals; defaults to `f`.
    fn goal_cost(&self, node: &Self::Node) -> f64 {
        self.f(node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Astar,
    #[default]
    Ids,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    /// Maximum number of parked nodes for IDS.
    pub queue_capacity: usize,
    /// Number of goals IDS collects before stopping.
    pub trials: usize,
    /// Maximum number of node expansions.
    pub node_budget: usize,
    /// Maximum number of stored nodes for A*; exceeding it is reported as
    /// running out of memory.
    pub max_nodes: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Ids,
            queue_capacity: 10_000,
            trials: 10,
            node_budget: 10_000_000,
            max_nodes: 2_000_000,
        }
    }
}

impl SearchConfig {
    pub fn unbounded_ids() -> Self {
        Self {
            strategy: Strategy::Ids,
            queue_capacity: usize::MAX,
            trials: usize::MAX,
            node_budget: usize::MAX,
            max_nodes: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.queue_capacity == 0 || self.trials == 0 || self.node_budget == 0 || self.max_nodes == 0 {
            return Err("search limits must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// A* popped a goal, or IDS used up its trials.
    Completed,
    /// No node left to expand.
    Exhausted,
    /// The expansion budget ran out.
    Budget,
    /// A* stored more than `max_nodes` nodes.
    MemoryLimit,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<N> {
    pub best_goal: Option<N>,
    pub goals_found: usize,
    pub nodes_expanded: usize,
    pub peak_queue_size: usize,
    pub termination: Termination,
}

/// Queue key: cheaper first, then deeper, then older.
#[derive(Debug, Clone, Copy)]
struct Key {
    f: f64,
    depth: usize,
    seq: u64,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f
            .total_cmp(&other.f)
            .then(other.depth.cmp(&self.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Min-priority queue holding at most `capacity` nodes.
struct BoundedQueue<N> {
    entries: BTreeMap<Key, N>,
    capacity: usize,
    seq: u64,
    peak: usize,
}

impl<N> BoundedQueue<N> {
    fn new(capacity: usize) -> Self {
        Self {
            entries: BTreeMap::new(),
            capacity,
            seq: 0,
            peak: 0,
        }
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    /// Inserts `node`; when full, whichever of the newcomer and the current
    /// worst entry ranks last is dropped.
    fn offer(&mut self, f: f64, depth: usize, node: N) {
        let key = Key { f, depth, seq: self.seq };
        self.seq += 1;
        if self.entries.len() >= self.capacity {
            let worst = *self.entries.last_key_value().expect("capacity >= 1").0;
            if key >= worst {
                return;
            }
            self.entries.pop_last();
        }
        self.entries.insert(key, node);
        self.peak = self.peak.max(self.entries.len());
    }

    fn pop_min(&mut self) -> Option<N> {
        self.entries.pop_first().map(|(_, n)| n)
    }
}

/// Standard A*: returns the first goal taken from the open list.
pub fn astar<S: SearchSpace>(space: &mut S, root: S::Node, config: &SearchConfig) -> SearchOutcome<S::Node> {
    let mut open = BoundedQueue::new(usize::MAX);
    let (f, d) = (space.f(&root), space.depth(&root));
    open.offer(f, d, root);
    let mut expanded = 0;
    let termination = loop {
        let Some(node) = open.pop_min() else {
            break Termination::Exhausted;
        };
        if space.is_goal(&node) {
            return SearchOutcome {
                best_goal: Some(node),
                goals_found: 1,
                nodes_expanded: expanded,
                peak_queue_size: open.peak,
                termination: Termination::Completed,
            };
        }
        if expanded >= config.node_budget {
            break Termination::Budget;
        }
        expanded += 1;
        for child in space.expand(&node) {
            let (f, d) = (space.f(&child), space.depth(&child));
            open.offer(f, d, child);
        }
        if open.len() > config.max_nodes {
            break Termination::MemoryLimit;
        }
    };
    SearchOutcome {
        best_goal: None,
        goals_found: 0,
        nodes_expanded: expanded,
        peak_queue_size: open.peak,
        termination,
    }
}

/// Iterative Diving Search.
pub fn ids<S: SearchSpace>(space: &mut S, root: S::Node, config: &SearchConfig) -> SearchOutcome<S::Node> {
    let mut queue = BoundedQueue::new(config.queue_capacity);
    let mut best: Option<(f64, S::Node)> = None;
    let mut trials = config.trials;
    let mut goals = 0;
    let mut expanded = 0;
    let mut current = Some(root);
    let termination = loop {
        let node = match current.take() {
            Some(n) => n,
            None => match queue.pop_min() {
                Some(n) => n,
                None => break Termination::Exhausted,
            },
        };
        if space.is_goal(&node) {
            goals += 1;
            let cost = space.goal_cost(&node);
            if best.as_ref().map_or(true, |(b, _)| cost < *b) {
                best = Some((cost, node));
            }
            trials -= 1;
            if trials == 0 {
                break Termination::Completed;
            }
            continue;
        }
        if expanded >= config.node_budget {
            break Termination::Budget;
        }
        expanded += 1;
        let mut children = space.expand(&node).into_iter();
        // Dive into the cheapest child; park the rest.
        current = children.next();
        for child in children {
            let (f, d) = (space.f(&child), space.depth(&child));
            queue.offer(f, d, child);
        }
    };
    SearchOutcome {
        best_goal: best.map(|(_, n)| n),
        goals_found: goals,
        nodes_expanded: expanded,
        peak_queue_size: queue.peak,
        termination,
    }
}

/// Dispatches on `config.strategy`.
pub fn run<S: SearchSpace>(space: &mut S, root: S::Node, config: &SearchConfig) -> SearchOutcome<S::Node> {
    match config.strategy {
        Strategy::Astar => astar(space, root, config),
        Strategy::Ids => ids(space, root, config),
    }
}
