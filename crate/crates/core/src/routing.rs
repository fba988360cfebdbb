//! Grouping of atom moves into AOD rearrangement steps.
//!
//! A step picks atoms up row by row, moves every active row and column to
//! its target in one transit, and drops the atoms column by column. Before
//! each further row is activated the rows already held are shifted
//! vertically so they leave the trap lattice; the shift may also lift them
//! above the new row, which is how relaxed routing reorders rows. Columns are
//! reordered during the drop: columns that cannot reach their target in the
//! transit without crossing are parked next to it and shifted over once the
//! columns in the way have been released.
//!
//! Strict steps keep both the row and the column order. Relaxed steps only
//! require that rows and columns neither split nor merge.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::arch::{coord_key, Architecture, Position, EPS};
use crate::timing::MotionParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub qubit: usize,
    pub src: Position,
    pub dst: Position,
}

impl Move {
    pub fn new(qubit: usize, src: Position, dst: Position) -> Self {
        Self { qubit, src, dst }
    }

    pub fn distance(&self) -> f64 {
        self.src.distance(&self.dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingMode {
    Strict,
    Relaxed,
}

/// Routing discipline requested by the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingPolicy {
    Strict,
    Relaxed,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// One AOD action of a realized step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AodOp {
    /// Activate the row at `row` together with the columns at `cols`.
    Pickup { row: f64, cols: Vec<f64> },
    /// Translate every active row (`Y`) or column (`X`).
    Shift { axis: Axis, delta: f64 },
    /// Transit: each held atom goes from its current to its target position.
    Move { map: Vec<(Position, Position)> },
    /// Deactivate the column at `col`, releasing its atoms.
    Drop { col: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub ops: Vec<AodOp>,
}

impl StepPlan {
    /// Deltas of all shift operations.
    pub fn shifts(&self) -> impl Iterator<Item = f64> + '_ {
        self.ops.iter().filter_map(|op| match op {
            AodOp::Shift { delta, .. } => Some(*delta),
            _ => None,
        })
    }
}

/// One pickup, transit and drop cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementStep {
    pub moves: Vec<Move>,
    pub mode: RoutingMode,
    /// Indices into `moves`, one batch per source row in pickup order.
    pub pickup_batches: Vec<Vec<usize>>,
    /// Indices into `moves`, one batch per destination column in drop order.
    pub drop_batches: Vec<Vec<usize>>,
    pub plan: StepPlan,
}

impl RearrangementStep {
    pub fn max_distance(&self) -> f64 {
        self.moves.iter().map(Move::distance).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutingResult {
    pub steps: Vec<RearrangementStep>,
    /// Microseconds.
    pub total_time: f64,
}

impl RoutingResult {
    fn new(steps: Vec<RearrangementStep>, motion: &MotionParams) -> Self {
        let total_time = motion.total_time(&steps);
        Self { steps, total_time }
    }

    pub fn num_moves(&self) -> usize {
        self.steps.iter().map(|s| s.moves.len()).sum()
    }
}

/// Geometry shared by all steps of one rearrangement phase.
#[derive(Debug, Clone, Default)]
pub struct RoutingContext {
    /// Vertical clearance between held rows and the next row to pick up.
    pub pickup_offset: f64,
    /// Minimal distance between two active rows or columns.
    pub min_separation: f64,
    occupied: HashSet<(i64, i64)>,
}

impl RoutingContext {
    /// A context without bystander atoms.
    pub fn new(pickup_offset: f64, min_separation: f64) -> Self {
        Self {
            pickup_offset,
            min_separation,
            occupied: HashSet::new(),
        }
    }

    /// Context for moves leaving `zone`.
    pub fn for_zone(arch: &Architecture, zone: usize) -> Self {
        Self::new(arch.zone(zone).pickup_offset(), arch.aod_min_separation)
    }

    /// Marks trap positions as possibly occupied during the phase.
    pub fn with_occupied(mut self, positions: impl IntoIterator<Item = Position>) -> Self {
        self.occupied.extend(positions.into_iter().map(|p| p.key()));
        self
    }

    fn is_occupied(&self, x: f64, y: f64) -> bool {
        !self.occupied.is_empty() && self.occupied.contains(&(coord_key(x), coord_key(y)))
    }
}

/// Source-to-destination map of AOD lines (rows by y, columns by x).
#[derive(Debug, Clone, Default)]
struct LineMap {
    fwd: BTreeMap<i64, i64>,
    inv: BTreeMap<i64, i64>,
}

impl LineMap {
    fn admits(&self, s: i64, d: i64, ordered: bool) -> bool {
        if let Some(&e) = self.fwd.get(&s) {
            return e == d;
        }
        if self.inv.contains_key(&d) {
            return false;
        }
        if ordered {
            if let Some((_, &pd)) = self.fwd.range(..s).next_back() {
                if pd >= d {
                    return false;
                }
            }
            if let Some((_, &nd)) = self.fwd.range(s + 1..).next() {
                if nd <= d {
                    return false;
                }
            }
        }
        true
    }

    fn insert(&mut self, s: i64, d: i64) {
        self.fwd.insert(s, d);
        self.inv.insert(d, s);
    }

    fn is_ordered(&self) -> bool {
        self.fwd.values().zip(self.fwd.values().skip(1)).all(|(a, b)| a < b)
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Lines {
    rows: LineMap,
    cols: LineMap,
}

impl Lines {
    pub(crate) fn admits(&self, m: &Move, mode: RoutingMode) -> bool {
        let ordered = mode == RoutingMode::Strict;
        let (sk, dk) = (m.src.key(), m.dst.key());
        self.rows.admits(sk.1, dk.1, ordered) && self.cols.admits(sk.0, dk.0, ordered)
    }

    pub(crate) fn insert(&mut self, m: &Move) {
        let (sk, dk) = (m.src.key(), m.dst.key());
        self.rows.insert(sk.1, dk.1);
        self.cols.insert(sk.0, dk.0);
    }

    fn of(moves: &[Move]) -> Option<Self> {
        let mut lines = Lines::default();
        for m in moves {
            if !lines.admits(m, RoutingMode::Relaxed) {
                return None;
            }
            lines.insert(m);
        }
        Some(lines)
    }

    /// Number of distinct source rows and destination columns.
    pub(crate) fn batches(&self) -> (usize, usize) {
        (self.rows.fwd.len(), self.cols.inv.len())
    }

    fn mode(&self) -> RoutingMode {
        if self.rows.is_ordered() && self.cols.is_ordered() {
            RoutingMode::Strict
        } else {
            RoutingMode::Relaxed
        }
    }
}

struct Realization {
    plan: StepPlan,
    pickup_batches: Vec<Vec<usize>>,
    drop_batches: Vec<Vec<usize>>,
}

struct Line {
    src: f64,
    dst: f64,
    members: Vec<usize>,
}

/// Groups move indices by a line coordinate, keyed by the `key` coordinate.
fn lines_by(
    moves: &[Move],
    key: impl Fn(&Move) -> i64,
    src: impl Fn(&Move) -> f64,
    dst: impl Fn(&Move) -> f64,
) -> Vec<Line> {
    let mut map: BTreeMap<i64, Line> = BTreeMap::new();
    for (i, m) in moves.iter().enumerate() {
        map.entry(key(m))
            .or_insert_with(|| Line {
                src: src(m),
                dst: dst(m),
                members: Vec::new(),
            })
            .members
            .push(i);
    }
    map.into_values().collect()
}

/// Target positions for columns in AOD order so that as many as possible
/// land on their destination; the others are parked as close as the
/// ordering allows.
fn place_columns(dst: &[f64], sep: f64) -> Vec<f64> {
    let n = dst.len();
    // Longest chain of columns that can all sit on their destinations.
    let mut len = vec![1usize; n];
    let mut prev = vec![usize::MAX; n];
    for j in 0..n {
        for i in 0..j {
            if dst[j] - dst[i] >= (j - i) as f64 * sep - EPS && len[i] + 1 > len[j] {
                len[j] = len[i] + 1;
                prev[j] = i;
            }
        }
    }
    let mut end = 0;
    for j in 1..n {
        if len[j] > len[end] {
            end = j;
        }
    }
    let mut anchor = vec![false; n];
    let mut j = end;
    loop {
        anchor[j] = true;
        if prev[j] == usize::MAX {
            break;
        }
        j = prev[j];
    }
    let mut pos = vec![0.0; n];
    let mut next_anchor = n;
    let mut upper = vec![f64::INFINITY; n];
    for i in (0..n).rev() {
        if anchor[i] {
            next_anchor = i;
        } else if next_anchor < n {
            upper[i] = dst[next_anchor] - (next_anchor - i) as f64 * sep;
        }
    }
    let mut last = f64::NEG_INFINITY;
    for i in 0..n {
        pos[i] = if anchor[i] {
            dst[i]
        } else {
            (last + sep).max(dst[i].min(upper[i]))
        };
        last = pos[i];
    }
    pos
}

/// Builds the AOD schedule for one group of moves whose line maps are
/// well-defined and injective. Returns `None` if a pickup would create a
/// ghost spot or target lines would violate the minimal separation.
fn realize(moves: &[Move], ctx: &RoutingContext) -> Option<Realization> {
    let off = ctx.pickup_offset;
    let sep = ctx.min_separation;
    // Rows in pickup order: ascending destination.
    let rows = lines_by(moves, |m| m.dst.key().1, |m| m.src.y, |m| m.dst.y);
    // Columns in AOD order: ascending source.
    let cols = lines_by(moves, |m| m.src.key().0, |m| m.src.x, |m| m.dst.x);
    for w in rows.windows(2) {
        if w[1].dst - w[0].dst < sep - EPS {
            return None;
        }
    }

    let mut batch_of: HashMap<(i64, i64), usize> = HashMap::new();
    for (k, row) in rows.iter().enumerate() {
        for &i in &row.members {
            batch_of.insert(moves[i].src.key(), k);
        }
    }
    let mut ops = Vec::new();
    let mut held_rows: Vec<f64> = Vec::with_capacity(rows.len());
    let mut active_cols: BTreeMap<i64, f64> = BTreeMap::new();
    let mut pickup_batches = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        if let Some(&bottom) = held_rows.last() {
            let delta = (-off).min(row.src - off - bottom);
            for y in held_rows.iter_mut() {
                *y += delta;
            }
            ops.push(AodOp::Shift { axis: Axis::Y, delta });
        }
        held_rows.push(row.src);
        let mut xs: Vec<f64> = row.members.iter().map(|&i| moves[i].src.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < EPS);
        for &x in &xs {
            active_cols.insert(coord_key(x), x);
        }
        for &y in &held_rows {
            for &x in active_cols.values() {
                if ctx.is_occupied(x, y) {
                    match batch_of.get(&(coord_key(x), coord_key(y))) {
                        Some(&b) if b <= k => {}
                        _ => return None,
                    }
                }
            }
        }
        ops.push(AodOp::Pickup { row: row.src, cols: xs });
        pickup_batches.push(row.members.clone());
    }

    let col_dst: Vec<f64> = cols.iter().map(|c| c.dst).collect();
    let col_target = place_columns(&col_dst, sep);
    let mut row_of = vec![0; moves.len()];
    let mut col_of = vec![0; moves.len()];
    for (k, row) in rows.iter().enumerate() {
        for &i in &row.members {
            row_of[i] = k;
        }
    }
    for (c, col) in cols.iter().enumerate() {
        for &i in &col.members {
            col_of[i] = c;
        }
    }
    let map = (0..moves.len())
        .map(|i| {
            let (r, c) = (row_of[i], col_of[i]);
            (
                Position::new(cols[c].src, held_rows[r]),
                Position::new(col_target[c], rows[r].dst),
            )
        })
        .collect();
    ops.push(AodOp::Move { map });

    let mut cur = col_target;
    let mut remaining: Vec<usize> = (0..cols.len()).collect();
    let mut drop_batches = Vec::with_capacity(cols.len());
    loop {
        let (mut aligned, rest): (Vec<usize>, Vec<usize>) =
            remaining.iter().partition(|&&c| (cur[c] - cols[c].dst).abs() < EPS);
        aligned.sort_by(|a, b| cur[*a].total_cmp(&cur[*b]));
        for c in aligned {
            ops.push(AodOp::Drop { col: cur[c] });
            drop_batches.push(cols[c].members.clone());
        }
        remaining = rest;
        if remaining.is_empty() {
            break;
        }
        // Shift that aligns the most remaining columns, shortest first.
        let mut votes: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
        for &c in &remaining {
            let d = cols[c].dst - cur[c];
            votes.entry(coord_key(d)).or_insert((0, d)).0 += 1;
        }
        let (_, &(_, delta)) = votes
            .iter()
            .max_by(|a, b| {
                let (ca, da) = *a.1;
                let (cb, db) = *b.1;
                ca.cmp(&cb)
                    .then(db.abs().total_cmp(&da.abs()))
                    .then(b.0.cmp(a.0))
            })
            .expect("remaining columns");
        for &c in &remaining {
            cur[c] += delta;
        }
        ops.push(AodOp::Shift { axis: Axis::X, delta });
    }

    Some(Realization {
        plan: StepPlan { ops },
        pickup_batches,
        drop_batches,
    })
}

/// Whether `m` can join `group` under `mode`.
pub fn compatible(group: &[Move], m: &Move, mode: RoutingMode, ctx: &RoutingContext) -> bool {
    let Some(lines) = lines_for(group, mode) else {
        return false;
    };
    if !lines.admits(m, mode) {
        return false;
    }
    let mut all = group.to_vec();
    all.push(*m);
    realize(&all, ctx).is_some()
}

fn lines_for(group: &[Move], mode: RoutingMode) -> Option<Lines> {
    let lines = Lines::of(group)?;
    if mode == RoutingMode::Strict && lines.mode() != RoutingMode::Strict {
        return None;
    }
    Some(lines)
}

/// Turns a compatible group into a step.
pub fn make_step(moves: Vec<Move>, ctx: &RoutingContext) -> Option<RearrangementStep> {
    let mode = Lines::of(&moves)?.mode();
    let r = realize(&moves, ctx)?;
    Some(RearrangementStep {
        moves,
        mode,
        pickup_batches: r.pickup_batches,
        drop_batches: r.drop_batches,
        plan: r.plan,
    })
}

fn first_fit(moves: &[Move], mode: RoutingMode, ctx: &RoutingContext) -> Vec<RearrangementStep> {
    let mut groups: Vec<(Vec<Move>, Lines)> = Vec::new();
    for m in moves {
        let slot = groups.iter().position(|(g, lines)| {
            if !lines.admits(m, mode) {
                return false;
            }
            let mut all = g.clone();
            all.push(*m);
            realize(&all, ctx).is_some()
        });
        match slot {
            Some(i) => {
                groups[i].0.push(*m);
                groups[i].1.insert(m);
            }
            None => {
                let mut lines = Lines::default();
                lines.insert(m);
                groups.push((vec![*m], lines));
            }
        }
    }
    groups
        .into_iter()
        .map(|(g, _)| make_step(g, ctx).expect("group realized during admission"))
        .collect()
}

fn ordered(moves: &[Move], order_hint: Option<&[usize]>) -> Vec<Move> {
    match order_hint {
        Some(order) => order.iter().map(|&i| moves[i]).collect(),
        None => moves.to_vec(),
    }
}

/// Greedy first-fit grouping in `order_hint` order (input order if absent).
///
/// Relaxed grouping also tries the strict grouping and keeps it when it needs
/// fewer steps, so relaxed never uses more steps than strict.
pub fn group_moves(
    moves: &[Move],
    mode: RoutingMode,
    order_hint: Option<&[usize]>,
    ctx: &RoutingContext,
    motion: &MotionParams,
) -> RoutingResult {
    let moves = ordered(moves, order_hint);
    let strict = RoutingResult::new(first_fit(&moves, RoutingMode::Strict, ctx), motion);
    match mode {
        RoutingMode::Strict => strict,
        RoutingMode::Relaxed => {
            let relaxed = RoutingResult::new(first_fit(&moves, RoutingMode::Relaxed, ctx), motion);
            let fewer = strict.steps.len() < relaxed.steps.len();
            let tie_cheaper = strict.steps.len() == relaxed.steps.len() && strict.total_time < relaxed.total_time;
            if fewer || tie_cheaper {
                strict
            } else {
                relaxed
            }
        }
    }
}

/// Computes the strict and the relaxed grouping and returns the one with the
/// smaller estimated time, preferring strict on ties.
pub fn choose_mode(
    moves: &[Move],
    order_hint: Option<&[usize]>,
    ctx: &RoutingContext,
    motion: &MotionParams,
) -> RoutingResult {
    let strict = group_moves(moves, RoutingMode::Strict, order_hint, ctx, motion);
    let relaxed = group_moves(moves, RoutingMode::Relaxed, order_hint, ctx, motion);
    if relaxed.total_time < strict.total_time {
        relaxed
    } else {
        strict
    }
}

pub fn route(
    moves: &[Move],
    policy: RoutingPolicy,
    order_hint: Option<&[usize]>,
    ctx: &RoutingContext,
    motion: &MotionParams,
) -> RoutingResult {
    match policy {
        RoutingPolicy::Strict => group_moves(moves, RoutingMode::Strict, order_hint, ctx, motion),
        RoutingPolicy::Relaxed => group_moves(moves, RoutingMode::Relaxed, order_hint, ctx, motion),
        RoutingPolicy::Auto => choose_mode(moves, order_hint, ctx, motion),
    }
}

/// Small hand-built routing instances.
pub mod instances {
    use super::*;

    /// Four pairs in two entanglement rows fed from four storage rows; half
    /// of the atoms need both their rows and columns reordered.
    ///
    /// Strict routing needs five steps, relaxed routing two.
    pub fn reorder_instance() -> (Vec<Move>, RoutingContext) {
        let p = Position::new;
        let moves = vec![
            Move::new(0, p(8.0, 92.0), p(0.0, 0.0)),
            Move::new(1, p(20.0, 104.0), p(2.0, 0.0)),
            Move::new(2, p(12.0, 92.0), p(12.0, 0.0)),
            Move::new(3, p(16.0, 104.0), p(14.0, 0.0)),
            Move::new(4, p(12.0, 96.0), p(12.0, 10.0)),
            Move::new(5, p(16.0, 100.0), p(14.0, 10.0)),
            Move::new(6, p(8.0, 96.0), p(0.0, 10.0)),
            Move::new(7, p(20.0, 100.0), p(2.0, 10.0)),
        ];
        let ctx = RoutingContext::new(2.0, 1.0).with_occupied(moves.iter().flat_map(|m| [m.src, m.dst]));
        (moves, ctx)
    }

    /// Two pairs in one entanglement row; the four atoms wait in one storage
    /// row `d` below it. Atom 3 starts left of all others but belongs right
    /// of atom 2.
    ///
    /// Strict routing needs two steps, relaxed routing one step with a long
    /// column shift.
    pub fn tradeoff_instance(d: f64) -> (Vec<Move>, RoutingContext) {
        let p = Position::new;
        let moves = vec![
            Move::new(0, p(4.0, d), p(0.0, 0.0)),
            Move::new(1, p(8.0, d), p(2.0, 0.0)),
            Move::new(2, p(12.0, d), p(12.0, 0.0)),
            Move::new(3, p(0.0, d), p(14.0, 0.0)),
        ];
        let ctx = RoutingContext::new(2.0, 1.0).with_occupied(moves.iter().flat_map(|m| [m.src, m.dst]));
        (moves, ctx)
    }
}
