//! Placement of moving atoms as a tree search.
//!
//! Between two CZ layers the atoms that leave the entanglement zone
//! (returners) are unloaded first, then the atoms of the next layer are
//! loaded. Every atom that moves is a *mover*; a node of the search tree
//! fixes the target trap of the first `depth` movers. Returners are placed
//! before enterers because the enterers' pickups depend on where the
//! returners land.
//!
//! The cost `g` of a node is the estimated time of the steps formed by
//! grouping the placed moves greedily (first fit, strict compatibility)
//! within their phase. The heuristic bounds the extra time the unplaced
//! movers must add and adds a look-ahead penalty for next-layer partners
//! that end up far apart horizontally.

use std::collections::{BTreeSet, HashSet};
use std::ops::Range;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{Architecture, PairSlot, Position, TrapId, ZoneKind};
use crate::circuit::Layer;
use crate::routing::{Lines, Move, RoutingMode};
use crate::search::{self, SearchConfig, SearchOutcome, SearchSpace, Termination};
use crate::timing::MotionParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    /// Inflation of the distance bound.
    pub delta: f64,
    /// Depth-dependent discount of the distance bound.
    pub beta: f64,
    /// Weight of the look-ahead penalty.
    pub alpha: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            delta: 0.01,
            beta: 0.0,
            alpha: 0.4,
        }
    }
}

impl HeuristicParams {
    pub const ZERO: Self = Self {
        delta: 0.0,
        beta: 0.0,
        alpha: 0.0,
    };

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("delta", self.delta), ("beta", self.beta), ("alpha", self.alpha)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementConfig {
    pub params: HeuristicParams,
    /// Children per expansion for movers with a free choice of trap.
    pub max_candidates: usize,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            params: HeuristicParams::default(),
            max_candidates: 8,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("layer has {pairs} CZ pairs but the entanglement zone takes at most {capacity}")]
    Capacity { pairs: usize, capacity: usize },
    #[error("architecture has no entanglement zone")]
    NoEntanglementZone,
    #[error("not enough free storage traps for {0} atoms")]
    StorageFull(usize),
    #[error("qubit {0} is not placed on a valid trap")]
    BadState(usize),
    #[error("search ended without a complete placement ({0:?})")]
    NoSolution(Termination),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Entanglement zone to storage.
    Unload,
    /// Storage to entanglement zone.
    Load,
}

impl Phase {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    At(Position),
    /// Starts where the given earlier mover was put.
    After(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Target {
    /// Trap indices of free storage traps, nearest first.
    Storage(Vec<u32>),
    /// First atom of a pair: any free trap pair.
    FreePair { partner: usize },
    /// Other slot of the pair chosen by the given earlier mover.
    PartnerOf(usize),
    Fixed(u32),
}

#[derive(Debug, Clone, PartialEq)]
enum Anchor {
    At(f64),
    After(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mover {
    pub qubit: usize,
    pub phase: Phase,
    origin: Origin,
    target: Target,
    /// Horizontal position of the next-layer partner, if known by the time
    /// this mover is placed.
    next_partner: Option<Anchor>,
}

/// What is known about one transition between layers.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    /// Current trap of every qubit.
    pub sites: &'a [TrapId],
    /// Atoms that stay at their entanglement trap.
    pub stays: &'a BTreeSet<usize>,
    /// Layer whose atoms currently sit in the entanglement zone.
    pub prev: Option<&'a Layer>,
    /// Layer to load; `None` unloads everything.
    pub layer: Option<&'a Layer>,
    /// Layer after `layer`, used by the look-ahead.
    pub next: Option<&'a Layer>,
}

/// Movers of one transition with their candidate traps.
#[derive(Debug, Clone)]
pub struct PlacementTask {
    pub movers: Vec<Mover>,
    /// Fully free entanglement pairs as (row, col).
    free_pairs: Vec<(usize, usize)>,
    ent: usize,
    phases: [Range<usize>; 2],
    /// Per phase: pickup offset of the source zone.
    offsets: [f64; 2],
    /// Per mover: largest lower bound on the move distance among this and
    /// the later movers of its phase.
    suffix_max: Vec<f64>,
}

/// Result of a placement search.
#[derive(Debug, Clone)]
pub struct Placement {
    /// Moves in mover order, split by phase.
    pub unload: Vec<Move>,
    pub load: Vec<Move>,
    /// Final trap of every mover, in mover order.
    pub targets: Vec<(usize, TrapId)>,
    pub cost: f64,
    pub nodes_expanded: usize,
    pub peak_queue_size: usize,
    pub goals_found: usize,
}

impl PlacementTask {
    pub fn build(arch: &Architecture, t: &Transition, config: &PlacementConfig) -> Result<Self, PlacementError> {
        let ent = arch.entanglement_zone().ok_or(PlacementError::NoEntanglementZone)?;
        let storage = arch.storage_zone();
        let k = config.max_candidates.max(1);
        let n = t.sites.len();
        let kind = |q: usize| arch.zone_kind(t.sites[q]);
        for (q, &s) in t.sites.iter().enumerate() {
            if arch.trap_position(s).is_err() {
                return Err(PlacementError::BadState(q));
            }
        }
        if let Some(layer) = t.layer {
            let capacity = arch.pair_capacity();
            if layer.cz_pairs.len() > capacity {
                return Err(PlacementError::Capacity {
                    pairs: layer.cz_pairs.len(),
                    capacity,
                });
            }
        }

        let mut occupied = vec![false; arch.num_traps()];
        for &s in t.sites {
            occupied[arch.trap_index(s)] = true;
        }

        // Returners, by previous pair then qubit.
        let pair_of = |l: Option<&Layer>, q: usize| l.and_then(|l| l.pair_index(q)).unwrap_or(usize::MAX);
        let mut returners: Vec<usize> = (0..n)
            .filter(|&q| kind(q) == ZoneKind::Entanglement && !t.stays.contains(&q))
            .collect();
        returners.sort_by_key(|&q| (pair_of(t.prev, q), q));

        let free_storage: Vec<u32> = arch
            .zone_traps(storage)
            .map(|s| arch.trap_index(s))
            .filter(|&i| !occupied[i])
            .map(|i| i as u32)
            .collect();
        if free_storage.len() < returners.len() {
            return Err(PlacementError::StorageFull(returners.len()));
        }

        let mut movers = Vec::new();
        let mut mover_of = vec![usize::MAX; n];
        for &q in &returners {
            let src = arch.pos(t.sites[q]);
            let mut cands = free_storage.clone();
            let keep = (returners.len() + k).min(cands.len());
            let dist = |i: &u32| arch.pos(arch.trap_from_index(*i as usize)).distance(&src);
            let cmp = |a: &u32, b: &u32| dist(a).total_cmp(&dist(b)).then(a.cmp(b));
            if keep < cands.len() {
                cands.select_nth_unstable_by(keep, cmp);
                cands.truncate(keep);
            }
            cands.sort_by(cmp);
            mover_of[q] = movers.len();
            movers.push(Mover {
                qubit: q,
                phase: Phase::Unload,
                origin: Origin::At(src),
                target: Target::Storage(cands),
                next_partner: None,
            });
        }
        let unload_end = movers.len();

        // Enterers, by pair then qubit.
        let in_ent_after: Vec<bool> = (0..n).map(|q| t.stays.contains(&q)).collect();
        let origin = |q: usize, mover_of: &[usize]| {
            if mover_of[q] != usize::MAX {
                Origin::After(mover_of[q])
            } else {
                Origin::At(arch.pos(t.sites[q]))
            }
        };
        if let Some(layer) = t.layer {
            for &(a, b) in &layer.cz_pairs {
                let partner_slot = |q: usize| {
                    let site = arch.pair_partner(t.sites[q]).expect("staying atom is in the entanglement zone");
                    arch.trap_index(site) as u32
                };
                match (in_ent_after[a], in_ent_after[b]) {
                    (true, true) => {}
                    (true, false) | (false, true) => {
                        let (stay, mover) = if in_ent_after[a] { (a, b) } else { (b, a) };
                        let o = origin(mover, &mover_of);
                        mover_of[mover] = movers.len();
                        movers.push(Mover {
                            qubit: mover,
                            phase: Phase::Load,
                            origin: o,
                            target: Target::Fixed(partner_slot(stay)),
                            next_partner: None,
                        });
                    }
                    (false, false) => {
                        let first = movers.len();
                        let (oa, ob) = (origin(a, &mover_of), origin(b, &mover_of));
                        movers.push(Mover {
                            qubit: a,
                            phase: Phase::Load,
                            origin: oa,
                            target: Target::FreePair { partner: first + 1 },
                            next_partner: None,
                        });
                        movers.push(Mover {
                            qubit: b,
                            phase: Phase::Load,
                            origin: ob,
                            target: Target::PartnerOf(first),
                            next_partner: None,
                        });
                        mover_of[a] = first;
                        mover_of[b] = first + 1;
                    }
                }
            }
        }

        // Look-ahead anchors: the final mover of each qubit sees its next
        // partner if that partner does not move or was placed before.
        if let Some(next) = t.next {
            for &(a, b) in &next.cz_pairs {
                for (q, p) in [(a, b), (b, a)] {
                    let (mq, mp) = (mover_of[q], mover_of[p]);
                    if mq == usize::MAX {
                        continue;
                    }
                    let anchor = if mp == usize::MAX {
                        Some(Anchor::At(arch.pos(t.sites[p]).x))
                    } else if mp < mq {
                        Some(Anchor::After(mp))
                    } else {
                        None
                    };
                    movers[mq].next_partner = anchor;
                }
            }
        }

        let ez = arch.zone(ent);
        let free_pairs: Vec<(usize, usize)> = (0..ez.rows)
            .flat_map(|r| (0..ez.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| {
                [PairSlot::Left, PairSlot::Right]
                    .iter()
                    .all(|&s| !in_use(arch, &occupied, t, TrapId::paired(ent, r, c, s)))
            })
            .collect();

        // Distance lower bounds.
        let sz = arch.zone(storage);
        let (ey0, ey1) = (ez.origin_y, ez.extent().1);
        let (sy0, sy1) = (sz.origin_y, sz.extent().1);
        let zone_gap = (sy0 - ey1).max(ey0 - sy1).max(0.0);
        let free_slots: Vec<Position> = free_pairs
            .iter()
            .flat_map(|&(r, c)| {
                [PairSlot::Left, PairSlot::Right].map(|s| arch.pos(TrapId::paired(ent, r, c, s)))
            })
            .collect();
        let min_dist: Vec<f64> = movers
            .iter()
            .map(|m| match (&m.origin, &m.target) {
                (Origin::At(p), Target::Storage(c)) => c
                    .first()
                    .map_or(0.0, |&i| arch.pos(arch.trap_from_index(i as usize)).distance(p)),
                (Origin::At(p), Target::Fixed(i)) => arch.pos(arch.trap_from_index(*i as usize)).distance(p),
                (Origin::At(p), _) => free_slots.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min),
                (Origin::After(_), _) => zone_gap,
            })
            .map(|d| if d.is_finite() { d } else { 0.0 })
            .collect();
        let phases = [0..unload_end, unload_end..movers.len()];
        let mut suffix_max = vec![0.0; movers.len()];
        for range in &phases {
            let mut acc: f64 = 0.0;
            for i in range.clone().rev() {
                acc = acc.max(min_dist[i]);
                suffix_max[i] = acc;
            }
        }
        Ok(Self {
            movers,
            free_pairs,
            ent,
            phases,
            offsets: [ez.pickup_offset(), sz.pickup_offset()],
            suffix_max,
        })
    }

    pub fn len(&self) -> usize {
        self.movers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.movers.is_empty()
    }
}

/// Whether a trap is taken by an atom that will still be there when the
/// load phase runs (atoms that stay in the entanglement zone).
fn in_use(arch: &Architecture, occupied: &[bool], t: &Transition, trap: TrapId) -> bool {
    let i = arch.trap_index(trap);
    occupied[i] && t.stays.iter().any(|&q| t.sites[q] == trap)
}

/// A provisional rearrangement step.
#[derive(Debug, Clone)]
struct Group {
    lines: Lines,
    max_dist: f64,
    cost: f64,
}

/// Immutable search node; children share their ancestors.
#[derive(Debug, Clone)]
pub struct Node(Rc<NodeData>);

#[derive(Debug)]
struct NodeData {
    parent: Option<Node>,
    depth: usize,
    /// Trap index of mover `depth - 1`.
    site: u32,
    g: f64,
    h: f64,
    lookahead: f64,
    groups: [Rc<Vec<Rc<Group>>>; 2],
}

impl Node {
    /// Approximate bytes held by one node: the node itself, its reference
    /// counts and one new provisional group.
    pub fn size_estimate() -> usize {
        std::mem::size_of::<NodeData>() + 2 * std::mem::size_of::<usize>() + std::mem::size_of::<Group>()
    }

    pub fn depth(&self) -> usize {
        self.0.depth
    }

    pub fn g(&self) -> f64 {
        self.0.g
    }

    pub fn h(&self) -> f64 {
        self.0.h
    }

    pub fn f(&self) -> f64 {
        self.0.g + self.0.h
    }

    /// Number of provisional groups per phase.
    pub fn group_counts(&self) -> [usize; 2] {
        [self.0.groups[0].len(), self.0.groups[1].len()]
    }

    /// Trap indices of the placed movers, in mover order.
    pub fn sites(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.0.depth);
        let mut cur = Some(self);
        while let Some(n) = cur {
            if n.0.depth > 0 {
                out.push(n.0.site);
            }
            cur = n.0.parent.as_ref();
        }
        out.reverse();
        out
    }
}

/// The search tree of one placement task.
pub struct PlacementSpace<'a> {
    arch: &'a Architecture,
    task: &'a PlacementTask,
    config: PlacementConfig,
    motion: MotionParams,
}

impl<'a> PlacementSpace<'a> {
    pub fn new(arch: &'a Architecture, task: &'a PlacementTask, config: PlacementConfig) -> Self {
        Self {
            arch,
            task,
            config,
            motion: arch.motion,
        }
    }

    pub fn root(&self) -> Node {
        let groups = [Rc::new(Vec::new()), Rc::new(Vec::new())];
        let h = self.heuristic(0, &groups, 0.0);
        Node(Rc::new(NodeData {
            parent: None,
            depth: 0,
            site: 0,
            g: 0.0,
            h,
            lookahead: 0.0,
            groups,
        }))
    }

    fn position(&self, site: u32) -> Position {
        self.arch.pos(self.arch.trap_from_index(site as usize))
    }

    fn src(&self, mover: usize, assigned: &[u32]) -> Position {
        match self.task.movers[mover].origin {
            Origin::At(p) => p,
            Origin::After(j) => self.position(assigned[j]),
        }
    }

    fn group_cost(&self, lines: &Lines, max_dist: f64, phase: usize) -> f64 {
        let (rows, cols) = lines.batches();
        let m = &self.motion;
        m.transfer_time * (rows + cols) as f64
            + (rows.saturating_sub(1)) as f64 * m.travel(self.task.offsets[phase])
            + m.travel(max_dist)
    }

    /// Admissible part of the heuristic for phase `p` plus weighting.
    fn heuristic(&self, depth: usize, groups: &[Rc<Vec<Rc<Group>>>; 2], lookahead: f64) -> f64 {
        let task = self.task;
        let m = &self.motion;
        let mut base = 0.0;
        for (p, range) in task.phases.iter().enumerate() {
            let first = range.start.max(depth);
            if first >= range.end {
                continue;
            }
            let bound = m.travel(task.suffix_max[first]);
            if groups[p].is_empty() {
                base += 2.0 * m.transfer_time + bound;
            } else {
                let longest = groups[p].iter().map(|g| m.travel(g.max_dist)).fold(0.0, f64::max);
                base += (bound - longest).max(0.0);
            }
        }
        let hp = &self.config.params;
        let n = task.len().max(1) as f64;
        let discount = (1.0 - hp.beta * depth as f64 / n).max(0.0);
        (1.0 + hp.delta) * base * discount + hp.alpha * lookahead
    }

    fn child(&self, node: &Node, site: u32, src: Position, assigned: &[u32]) -> Node {
        let i = node.0.depth;
        let mover = &self.task.movers[i];
        let p = mover.phase.index();
        let dst = self.position(site);
        let mv = Move::new(mover.qubit, src, dst);
        let d = mv.distance();
        let mut phase_groups: Vec<Rc<Group>> = (*node.0.groups[p]).clone();
        let mut g = node.0.g;
        match phase_groups.iter().position(|gr| gr.lines.admits(&mv, RoutingMode::Strict)) {
            Some(k) => {
                let old = &phase_groups[k];
                let mut lines = old.lines.clone();
                lines.insert(&mv);
                let max_dist = old.max_dist.max(d);
                let cost = self.group_cost(&lines, max_dist, p);
                g += cost - old.cost;
                phase_groups[k] = Rc::new(Group { lines, max_dist, cost });
            }
            None => {
                let mut lines = Lines::default();
                lines.insert(&mv);
                let cost = self.group_cost(&lines, d, p);
                g += cost;
                phase_groups.push(Rc::new(Group {
                    lines,
                    max_dist: d,
                    cost,
                }));
            }
        }
        let mut groups = node.0.groups.clone();
        groups[p] = Rc::new(phase_groups);
        let mut lookahead = node.0.lookahead;
        if let Some(anchor) = &mover.next_partner {
            let x = match *anchor {
                Anchor::At(x) => x,
                Anchor::After(j) => self.position(assigned[j]).x,
            };
            lookahead += self.motion.travel((dst.x - x).abs());
        }
        let h = self.heuristic(i + 1, &groups, lookahead);
        Node(Rc::new(NodeData {
            parent: Some(node.clone()),
            depth: i + 1,
            site,
            g,
            h,
            lookahead,
            groups,
        }))
    }

    fn candidates(&self, i: usize, src: Position, assigned: &[u32]) -> Vec<u32> {
        let k = self.config.max_candidates.max(1);
        let claimed: HashSet<u32> = assigned.iter().copied().collect();
        let arch = self.arch;
        match &self.task.movers[i].target {
            Target::Storage(list) => list.iter().copied().filter(|s| !claimed.contains(s)).take(k).collect(),
            Target::Fixed(s) => vec![*s],
            Target::PartnerOf(j) => {
                let t = arch.trap_from_index(assigned[*j] as usize);
                vec![arch.trap_index(arch.pair_partner(t).expect("pair slot")) as u32]
            }
            Target::FreePair { partner } => {
                let partner_src = self.src(*partner, assigned);
                let slot = if src.x <= partner_src.x {
                    PairSlot::Left
                } else {
                    PairSlot::Right
                };
                let ent = self.task.ent;
                let mut opts: Vec<(f64, usize, usize, u32)> = self
                    .task
                    .free_pairs
                    .iter()
                    .filter_map(|&(r, c)| {
                        let l = arch.trap_index(TrapId::paired(ent, r, c, PairSlot::Left)) as u32;
                        if claimed.contains(&l) || claimed.contains(&(l + 1)) {
                            return None;
                        }
                        let s = if slot == PairSlot::Left { l } else { l + 1 };
                        Some((self.position(s).distance(&src), r, c, s))
                    })
                    .collect();
                opts.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
                opts.into_iter().take(k).map(|o| o.3).collect()
            }
        }
    }

    /// Moves of a complete or partial placement, split by phase.
    pub fn moves(&self, sites: &[u32]) -> [Vec<Move>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, &s) in sites.iter().enumerate() {
            let m = &self.task.movers[i];
            out[m.phase.index()].push(Move::new(m.qubit, self.src(i, sites), self.position(s)));
        }
        out
    }
}

impl SearchSpace for PlacementSpace<'_> {
    type Node = Node;

    fn expand(&mut self, node: &Node) -> Vec<Node> {
        let i = node.0.depth;
        if i >= self.task.len() {
            return Vec::new();
        }
        let assigned = node.sites();
        let src = self.src(i, &assigned);
        let mut children: Vec<(Node, TrapId)> = self
            .candidates(i, src, &assigned)
            .into_iter()
            .map(|s| (self.child(node, s, src, &assigned), self.arch.trap_from_index(s as usize)))
            .collect();
        children.sort_by(|(a, ta), (b, tb)| a.f().total_cmp(&b.f()).then((ta.row, ta.col).cmp(&(tb.row, tb.col))));
        children.into_iter().map(|(n, _)| n).collect()
    }

    fn f(&self, node: &Node) -> f64 {
        node.f()
    }

    fn is_goal(&self, node: &Node) -> bool {
        node.0.depth == self.task.len()
    }

    fn depth(&self, node: &Node) -> usize {
        node.0.depth
    }
}

/// Runs the configured search on `task`.
pub fn place(
    arch: &Architecture,
    task: &PlacementTask,
    config: &PlacementConfig,
    search_config: &SearchConfig,
) -> Result<Placement, PlacementError> {
    let mut space = PlacementSpace::new(arch, task, *config);
    let root = space.root();
    let outcome: SearchOutcome<Node> = search::run(&mut space, root, search_config);
    let goal = outcome
        .best_goal
        .ok_or(PlacementError::NoSolution(outcome.termination))?;
    let sites = goal.sites();
    let [unload, load] = space.moves(&sites);
    let targets = task
        .movers
        .iter()
        .zip(&sites)
        .map(|(m, &s)| (m.qubit, arch.trap_from_index(s as usize)))
        .collect();
    Ok(Placement {
        unload,
        load,
        targets,
        cost: goal.g(),
        nodes_expanded: outcome.nodes_expanded,
        peak_queue_size: outcome.peak_queue_size,
        goals_found: outcome.goals_found,
    })
}
