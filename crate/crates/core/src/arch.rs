//! Zoned trap geometry.
//!
//! Coordinates: x grows to the right, y grows downward. Storage zones sit
//! below the entanglement zone. An entanglement zone is a grid of trap
//! *pairs*; the right trap of a pair sits `pair_offset` to the right of the
//! left one.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timing::{MotionParams, TimingError};

const DEFAULT_SPEC: &str = include_str!("default_arch.toml");

/// Slack used when comparing coordinates.
pub const EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ArchError {
    #[error("architecture document: {0}")]
    Schema(String),
    #[error("zone {zone}: {reason}")]
    InvalidZone { zone: usize, reason: String },
    #[error("zones {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("zones {a} and {b} are {gap} um apart, minimum is {min} um")]
    ZoneSeparation { a: usize, b: usize, gap: f64, min: f64 },
    #[error("zone {0} extends beyond the {1} x {2} um bounding box")]
    OutOfBounds(usize, f64, f64),
    #[error("pair offset {offset} um exceeds the interaction radius {radius} um")]
    InteractionRadius { offset: f64, radius: f64 },
    #[error("architecture needs a storage zone")]
    MissingZone,
    #[error("trap {0} does not exist")]
    NoSuchTrap(TrapId),
    #[error("trap {0} is not in an entanglement zone")]
    NotPaired(TrapId),
    #[error(transparent)]
    Motion(#[from] TimingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn approx_eq(&self, other: &Position) -> bool {
        (self.x - other.x).abs() < EPS && (self.y - other.y).abs() < EPS
    }

    /// Integer key in nanometers, used for hashing coordinates.
    pub fn key(&self) -> (i64, i64) {
        (coord_key(self.x), coord_key(self.y))
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3},{:.3})", self.x, self.y)
    }
}

pub fn coord_key(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneKind {
    Storage,
    Entanglement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Zone {
    pub kind: ZoneKind,
    pub origin_x: f64,
    pub origin_y: f64,
    pub rows: usize,
    pub cols: usize,
    pub row_pitch: f64,
    pub col_pitch: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_offset: Option<f64>,
}

impl Zone {
    pub fn origin(&self) -> Position {
        Position::new(self.origin_x, self.origin_y)
    }

    pub fn pair_offset(&self) -> f64 {
        self.pair_offset.unwrap_or(0.0)
    }

    pub fn slots(&self) -> usize {
        match self.kind {
            ZoneKind::Storage => 1,
            ZoneKind::Entanglement => 2,
        }
    }

    pub fn num_traps(&self) -> usize {
        self.rows * self.cols * self.slots()
    }

    /// Right and bottom edges of the trap extent.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.origin_x + (self.cols - 1) as f64 * self.col_pitch + self.pair_offset(),
            self.origin_y + (self.rows - 1) as f64 * self.row_pitch,
        )
    }

    /// Smallest distance between two traps of this zone.
    pub fn min_spacing(&self) -> f64 {
        let mut s = self.row_pitch.min(self.col_pitch);
        if self.kind == ZoneKind::Entanglement {
            s = s.min(self.pair_offset()).min(self.col_pitch - self.pair_offset());
        }
        s
    }

    /// Offset applied to activated AOD rows between staged pickups in this
    /// zone: half the smallest trap spacing, so shifted rows sit between traps.
    pub fn pickup_offset(&self) -> f64 {
        self.min_spacing() / 2.0
    }

    fn validate(&self, index: usize) -> Result<(), ArchError> {
        let bad = |reason: &str| ArchError::InvalidZone {
            zone: index,
            reason: reason.to_string(),
        };
        if self.rows == 0 || self.cols == 0 {
            return Err(bad("rows and cols must be at least 1"));
        }
        let finite = [self.origin_x, self.origin_y, self.row_pitch, self.col_pitch];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite coordinate"));
        }
        if self.row_pitch <= 0.0 || self.col_pitch <= 0.0 {
            return Err(bad("pitches must be positive"));
        }
        match self.kind {
            ZoneKind::Storage => {
                if self.pair_offset.is_some_and(|o| o != 0.0) {
                    return Err(bad("storage zones have no pair offset"));
                }
            }
            ZoneKind::Entanglement => {
                let offset = self.pair_offset.ok_or_else(|| bad("missing pair_offset"))?;
                if !(offset > 0.0 && offset < self.col_pitch) {
                    return Err(bad("pair_offset must be positive and below col_pitch"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairSlot {
    Left,
    Right,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrapId {
    pub zone: usize,
    pub row: usize,
    pub col: usize,
    pub slot: PairSlot,
}

impl TrapId {
    pub const fn storage(zone: usize, row: usize, col: usize) -> Self {
        Self { zone, row, col, slot: PairSlot::None }
    }

    pub const fn paired(zone: usize, row: usize, col: usize, slot: PairSlot) -> Self {
        Self { zone, row, col, slot }
    }
}

impl fmt::Display for TrapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z{}[{},{}]", self.zone, self.row, self.col)?;
        match self.slot {
            PairSlot::Left => write!(f, "L"),
            PairSlot::Right => write!(f, "R"),
            PairSlot::None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArchDocument {
    name: String,
    zones: Vec<Zone>,
    interaction_radius: f64,
    min_zone_separation: f64,
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
    #[serde(default)]
    min_pair_distance: Option<f64>,
    #[serde(default)]
    aod_min_separation: Option<f64>,
    #[serde(default)]
    motion: Option<MotionParams>,
}

/// A validated, immutable architecture.
#[derive(Debug, Clone)]
pub struct Architecture {
    pub name: String,
    zones: Vec<Zone>,
    pub interaction_radius: f64,
    pub min_zone_separation: f64,
    pub min_pair_distance: f64,
    /// Minimal distance between two activated AOD rows or columns.
    pub aod_min_separation: f64,
    pub width: f64,
    pub height: f64,
    pub motion: MotionParams,
    zone_base: Vec<usize>,
    storage: usize,
    entanglement: Option<usize>,
}

impl Architecture {
    /// The bundled 400 x 400 um two-zone layout.
    pub fn default_spec() -> &'static str {
        DEFAULT_SPEC
    }

    pub fn load_default() -> Self {
        Self::from_toml(DEFAULT_SPEC).expect("bundled architecture is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, ArchError> {
        let doc: ArchDocument = toml::from_str(text).map_err(|e| ArchError::Schema(e.to_string()))?;
        Self::from_document(doc)
    }

    /// Builds an architecture from zones with the default limits.
    pub fn from_zones(name: &str, zones: Vec<Zone>) -> Result<Self, ArchError> {
        Self::from_document(ArchDocument {
            name: name.to_string(),
            zones,
            interaction_radius: 2.5,
            min_zone_separation: 21.0,
            width: None,
            height: None,
            min_pair_distance: None,
            aod_min_separation: None,
            motion: None,
        })
    }

    fn from_document(doc: ArchDocument) -> Result<Self, ArchError> {
        for (i, z) in doc.zones.iter().enumerate() {
            z.validate(i)?;
        }
        let storage = doc
            .zones
            .iter()
            .position(|z| z.kind == ZoneKind::Storage)
            .ok_or(ArchError::MissingZone)?;
        let entanglement = doc.zones.iter().position(|z| z.kind == ZoneKind::Entanglement);
        for v in [doc.interaction_radius, doc.min_zone_separation] {
            if !v.is_finite() || v < 0.0 {
                return Err(ArchError::Schema("limits must be finite and non-negative".into()));
            }
        }
        let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
        for (i, z) in doc.zones.iter().enumerate() {
            if z.origin_x < -EPS || z.origin_y < -EPS {
                return Err(ArchError::OutOfBounds(i, 0.0, 0.0));
            }
            let (rx, by) = z.extent();
            max_x = max_x.max(rx);
            max_y = max_y.max(by);
        }
        let width = doc.width.unwrap_or(max_x);
        let height = doc.height.unwrap_or(max_y);
        for (i, z) in doc.zones.iter().enumerate() {
            let (rx, by) = z.extent();
            if rx > width + EPS || by > height + EPS {
                return Err(ArchError::OutOfBounds(i, width, height));
            }
        }
        for a in 0..doc.zones.len() {
            for b in a + 1..doc.zones.len() {
                let (za, zb) = (&doc.zones[a], &doc.zones[b]);
                let (ax1, ay1) = za.extent();
                let (bx1, by1) = zb.extent();
                let x_overlap = za.origin_x <= bx1 + EPS && zb.origin_x <= ax1 + EPS;
                let y_gap = (zb.origin_y - ay1).max(za.origin_y - by1);
                if x_overlap && y_gap < EPS {
                    return Err(ArchError::Overlap(a, b));
                }
                if za.kind != zb.kind && y_gap < doc.min_zone_separation - EPS {
                    return Err(ArchError::ZoneSeparation {
                        a,
                        b,
                        gap: y_gap,
                        min: doc.min_zone_separation,
                    });
                }
            }
        }
        let min_pair_distance = doc.min_pair_distance.unwrap_or(10.0);
        for (i, z) in doc.zones.iter().enumerate() {
            if z.kind != ZoneKind::Entanglement {
                continue;
            }
            if z.pair_offset() > doc.interaction_radius + EPS {
                return Err(ArchError::InteractionRadius {
                    offset: z.pair_offset(),
                    radius: doc.interaction_radius,
                });
            }
            let gap_x = z.col_pitch - z.pair_offset();
            let gap_y = if z.rows > 1 { z.row_pitch } else { f64::INFINITY };
            let gap_x = if z.cols > 1 { gap_x } else { f64::INFINITY };
            if gap_x.min(gap_y) < min_pair_distance - EPS {
                return Err(ArchError::InvalidZone {
                    zone: i,
                    reason: format!("adjacent pairs closer than {min_pair_distance} um"),
                });
            }
            if min_pair_distance <= doc.interaction_radius {
                return Err(ArchError::InvalidZone {
                    zone: i,
                    reason: "adjacent pairs would interact".into(),
                });
            }
        }
        let aod_min_separation = doc.aod_min_separation.unwrap_or(1.0);
        let min_offset = doc
            .zones
            .iter()
            .map(Zone::pickup_offset)
            .fold(f64::INFINITY, f64::min);
        if !(aod_min_separation > 0.0 && aod_min_separation <= min_offset + EPS) {
            return Err(ArchError::Schema(format!(
                "aod_min_separation must be positive and at most {min_offset} um"
            )));
        }
        let motion = doc.motion.unwrap_or_default();
        motion.validate()?;

        let mut zone_base = Vec::with_capacity(doc.zones.len() + 1);
        let mut acc = 0;
        for z in &doc.zones {
            zone_base.push(acc);
            acc += z.num_traps();
        }
        zone_base.push(acc);

        Ok(Self {
            name: doc.name,
            zones: doc.zones,
            interaction_radius: doc.interaction_radius,
            min_zone_separation: doc.min_zone_separation,
            min_pair_distance,
            aod_min_separation,
            width,
            height,
            motion,
            zone_base,
            storage,
            entanglement,
        })
    }

    pub fn with_motion(mut self, motion: MotionParams) -> Result<Self, ArchError> {
        motion.validate()?;
        self.motion = motion;
        Ok(self)
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zone(&self, index: usize) -> &Zone {
        &self.zones[index]
    }

    /// First storage zone.
    pub fn storage_zone(&self) -> usize {
        self.storage
    }

    /// First entanglement zone; the only one targeted by routing.
    pub fn entanglement_zone(&self) -> Option<usize> {
        self.entanglement
    }

    pub fn num_traps(&self) -> usize {
        *self.zone_base.last().unwrap()
    }

    /// Maximum number of CZ pairs per layer: 90 % of the entanglement pairs.
    pub fn pair_capacity(&self) -> usize {
        self.entanglement.map_or(0, |e| {
            let z = &self.zones[e];
            (z.rows * z.cols) * 9 / 10
        })
    }

    fn check(&self, t: TrapId) -> Result<&Zone, ArchError> {
        let z = self.zones.get(t.zone).ok_or(ArchError::NoSuchTrap(t))?;
        let slot_ok = match z.kind {
            ZoneKind::Storage => t.slot == PairSlot::None,
            ZoneKind::Entanglement => t.slot != PairSlot::None,
        };
        if t.row >= z.rows || t.col >= z.cols || !slot_ok {
            return Err(ArchError::NoSuchTrap(t));
        }
        Ok(z)
    }

    pub fn trap_position(&self, t: TrapId) -> Result<Position, ArchError> {
        let z = self.check(t)?;
        let mut x = z.origin_x + t.col as f64 * z.col_pitch;
        if t.slot == PairSlot::Right {
            x += z.pair_offset();
        }
        Ok(Position::new(x, z.origin_y + t.row as f64 * z.row_pitch))
    }

    /// Position of a trap known to be valid.
    pub(crate) fn pos(&self, t: TrapId) -> Position {
        self.trap_position(t).expect("valid trap id")
    }

    pub fn pair_partner(&self, t: TrapId) -> Result<TrapId, ArchError> {
        let z = self.check(t)?;
        if z.kind != ZoneKind::Entanglement {
            return Err(ArchError::NotPaired(t));
        }
        let slot = match t.slot {
            PairSlot::Left => PairSlot::Right,
            _ => PairSlot::Left,
        };
        Ok(TrapId { slot, ..t })
    }

    /// The trap located at `p`, if any.
    pub fn trap_at(&self, p: Position) -> Option<TrapId> {
        for (zi, z) in self.zones.iter().enumerate() {
            let fr = (p.y - z.origin_y) / z.row_pitch;
            let row = fr.round();
            if (fr - row).abs() * z.row_pitch > EPS || row < 0.0 || row as usize >= z.rows {
                continue;
            }
            let slots: &[(PairSlot, f64)] = match z.kind {
                ZoneKind::Storage => &[(PairSlot::None, 0.0)],
                ZoneKind::Entanglement => &[(PairSlot::Left, 0.0), (PairSlot::Right, 1.0)],
            };
            for &(slot, k) in slots {
                let fc = (p.x - z.origin_x - k * z.pair_offset()) / z.col_pitch;
                let col = fc.round();
                if (fc - col).abs() * z.col_pitch <= EPS && col >= 0.0 && (col as usize) < z.cols {
                    return Some(TrapId {
                        zone: zi,
                        row: row as usize,
                        col: col as usize,
                        slot,
                    });
                }
            }
        }
        None
    }

    /// Dense index over all traps of all zones.
    pub fn trap_index(&self, t: TrapId) -> usize {
        let z = &self.zones[t.zone];
        let cell = t.row * z.cols + t.col;
        let local = match t.slot {
            PairSlot::None => cell,
            PairSlot::Left => 2 * cell,
            PairSlot::Right => 2 * cell + 1,
        };
        self.zone_base[t.zone] + local
    }

    pub fn trap_from_index(&self, index: usize) -> TrapId {
        let zone = self.zone_base.partition_point(|&b| b <= index) - 1;
        let z = &self.zones[zone];
        let local = index - self.zone_base[zone];
        let (cell, slot) = match z.kind {
            ZoneKind::Storage => (local, PairSlot::None),
            ZoneKind::Entanglement => (
                local / 2,
                if local % 2 == 0 { PairSlot::Left } else { PairSlot::Right },
            ),
        };
        TrapId {
            zone,
            row: cell / z.cols,
            col: cell % z.cols,
            slot,
        }
    }

    pub fn zone_traps(&self, zone: usize) -> impl Iterator<Item = TrapId> + '_ {
        (self.zone_base[zone]..self.zone_base[zone + 1]).map(|i| self.trap_from_index(i))
    }

    pub fn zone_kind(&self, t: TrapId) -> ZoneKind {
        self.zones[t.zone].kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn storage(rows: usize, cols: usize, pitch: f64) -> Zone {
        Zone {
            kind: ZoneKind::Storage,
            origin_x: 0.0,
            origin_y: 30.0,
            rows,
            cols,
            row_pitch: pitch,
            col_pitch: pitch,
            pair_offset: None,
        }
    }

    fn entanglement(offset: f64, col_pitch: f64) -> Zone {
        Zone {
            kind: ZoneKind::Entanglement,
            origin_x: 0.0,
            origin_y: 0.0,
            rows: 1,
            cols: 2,
            row_pitch: 10.0,
            col_pitch,
            pair_offset: Some(offset),
        }
    }

    #[test]
    fn default_geometry() {
        let a = Architecture::load_default();
        let e = a.zone(a.entanglement_zone().unwrap());
        let s = a.zone(a.storage_zone());
        assert_eq!((s.rows, s.cols, s.col_pitch), (73, 101, 4.0));
        assert_eq!((e.rows, e.cols, e.pair_offset()), (10, 34, 2.0));
        assert_eq!(e.col_pitch - e.pair_offset(), 10.0);
        assert_eq!(s.origin_y - e.extent().1, 21.0);
        assert_eq!(a.pair_capacity(), 306);
        assert!(a.width <= 400.0 && a.height <= 400.0);
    }

    #[test]
    fn single_storage_zone() {
        let arch = Architecture::from_zones("tiny", vec![storage(2, 2, 4.0)]).unwrap();
        assert_eq!(arch.num_traps(), 4);
        assert_eq!(arch.entanglement_zone(), None);
        assert_eq!(arch.pair_capacity(), 0);
        let no_storage = Architecture::from_zones("e", vec![entanglement(2.0, 12.0)]);
        assert!(matches!(no_storage, Err(ArchError::MissingZone)));
    }

    #[test]
    fn pair_offset_must_be_below_pitch() {
        let r = Architecture::from_zones("bad", vec![entanglement(12.0, 12.0), storage(2, 2, 4.0)]);
        assert!(matches!(r, Err(ArchError::InvalidZone { .. })));
    }

    #[test]
    fn overlapping_zones_rejected() {
        let mut s = storage(4, 4, 4.0);
        s.origin_y = 0.0;
        let r = Architecture::from_zones("bad", vec![entanglement(2.0, 12.0), s]);
        assert!(matches!(r, Err(ArchError::Overlap(0, 1))));
    }

    #[test]
    fn zone_gap_enforced() {
        let mut s = storage(2, 2, 4.0);
        s.origin_y = 15.0;
        let r = Architecture::from_zones("bad", vec![entanglement(2.0, 12.0), s]);
        assert!(matches!(r, Err(ArchError::ZoneSeparation { .. })));
    }

    #[test]
    fn schema_errors_surface() {
        assert!(matches!(
            Architecture::from_toml("name = 3"),
            Err(ArchError::Schema(_))
        ));
    }

    #[test]
    fn trap_positions() {
        let mut s = storage(2, 2, 4.0);
        s.origin_y = 40.0;
        let arch = Architecture::from_zones("t", vec![entanglement(2.0, 12.0), s]).unwrap();
        let st = arch.storage_zone();
        assert_eq!(arch.trap_position(TrapId::storage(st, 0, 0)).unwrap(), Position::new(0.0, 40.0));
        assert_eq!(arch.trap_position(TrapId::storage(st, 0, 1)).unwrap(), Position::new(4.0, 40.0));
        let ent = arch.entanglement_zone().unwrap();
        let right = TrapId::paired(ent, 0, 0, PairSlot::Right);
        assert_eq!(arch.trap_position(right).unwrap(), Position::new(2.0, 0.0));
        assert!(arch.trap_position(TrapId::storage(st, 2, 0)).is_err());
        assert!(arch.trap_position(TrapId::storage(ent, 0, 0)).is_err());
    }

    #[test]
    fn partners() {
        let arch = Architecture::load_default();
        let e = arch.entanglement_zone().unwrap();
        let t = TrapId::paired(e, 3, 5, PairSlot::Left);
        assert_eq!(arch.pair_partner(t).unwrap(), TrapId::paired(e, 3, 5, PairSlot::Right));
        let s = TrapId::storage(arch.storage_zone(), 0, 0);
        assert!(matches!(arch.pair_partner(s), Err(ArchError::NotPaired(_))));
    }

    #[test]
    fn every_trap_roundtrips_through_index_and_position() {
        let arch = Architecture::load_default();
        let mut seen = std::collections::HashSet::new();
        for i in 0..arch.num_traps() {
            let t = arch.trap_from_index(i);
            assert_eq!(arch.trap_index(t), i);
            let p = arch.trap_position(t).unwrap();
            assert!(p.x >= 0.0 && p.x <= arch.width && p.y >= 0.0 && p.y <= arch.height);
            assert_eq!(arch.trap_at(p), Some(t));
            assert!(seen.insert(p.key()), "duplicate position {p}");
        }
    }

    #[test]
    fn pair_distances() {
        let arch = Architecture::load_default();
        let e = arch.entanglement_zone().unwrap();
        let z = arch.zone(e);
        let mut traps: Vec<_> = arch.zone_traps(e).collect();
        for t in &traps {
            let d = arch.pos(*t).distance(&arch.pos(arch.pair_partner(*t).unwrap()));
            assert!((d - z.pair_offset()).abs() < EPS && d <= arch.interaction_radius);
        }
        traps.truncate(4 * 34 * 2);
        for a in &traps {
            for b in &traps {
                if (a.row, a.col) != (b.row, b.col) {
                    assert!(arch.pos(*a).distance(&arch.pos(*b)) >= arch.min_pair_distance - EPS);
                }
            }
        }
    }
}
