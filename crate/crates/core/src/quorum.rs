//! Grid quorum construction and channel-hopping schedules.
//!
//! The `N` licensed channels are laid out row-major on an `n x n` grid with
//! `n = ceil(sqrt(N))`. Slot index `s` (1-based) hosts channel `s`; slots
//! beyond `N` are padding and never carry a channel. A user's quorum is the
//! union of its chosen full rows and full columns, and any two such unions
//! overlap in at least two slots when `n >= 2`.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based identifier of a licensed channel.
pub type ChannelId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuorumError {
    #[error("number of channels must be at least 1")]
    NoChannels,
    #[error("{what} count {count} outside 1..={n}")]
    CountOutOfRange {
        what: &'static str,
        count: usize,
        n: usize,
    },
    #[error("{what} index {index} outside 1..={n}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        n: usize,
    },
    #[error("selection must contain at least one row and one column")]
    EmptySelection,
    #[error("adaptive thresholds must satisfy 0 < low ({low}) < high ({high})")]
    InvalidThresholds { low: f64, high: f64 },
}

/// The shared `n x n` grid and its slot-to-channel map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridQuorum {
    n: usize,
    num_channels: usize,
}

impl GridQuorum {
    pub fn new(num_channels: usize) -> Result<Self, QuorumError> {
        build_grid(num_channels)
    }

    /// Grid side length.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    /// Slots per cycle (`n^2`).
    pub fn cycle_len(&self) -> usize {
        self.n * self.n
    }

    /// Channel hosted by a 1-based slot index, `None` for padding slots.
    pub fn channel_at(&self, slot: usize) -> Option<ChannelId> {
        (slot >= 1 && slot <= self.num_channels).then_some(slot)
    }

    pub fn is_padding(&self, slot: usize) -> bool {
        slot > self.num_channels && slot <= self.cycle_len()
    }

    /// 1-based (row, column) of a 1-based slot index.
    pub fn coords(&self, slot: usize) -> (usize, usize) {
        debug_assert!(slot >= 1 && slot <= self.cycle_len());
        ((slot - 1) / self.n + 1, (slot - 1) % self.n + 1)
    }

    pub fn slot_of(&self, row: usize, col: usize) -> usize {
        (row - 1) * self.n + col
    }
}

/// Builds the shared grid for `num_channels` channels.
pub fn build_grid(num_channels: usize) -> Result<GridQuorum, QuorumError> {
    if num_channels == 0 {
        return Err(QuorumError::NoChannels);
    }
    let mut n = (num_channels as f64).sqrt() as usize;
    while n * n < num_channels {
        n += 1;
    }
    while n > 1 && (n - 1) * (n - 1) >= num_channels {
        n -= 1;
    }
    Ok(GridQuorum { n, num_channels })
}

/// A user's chosen rows and columns (1-based, sorted, distinct).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QuorumSelection {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl QuorumSelection {
    /// Builds a selection from explicit row and column indices.
    pub fn from_parts(
        grid: &GridQuorum,
        rows: impl IntoIterator<Item = usize>,
        cols: impl IntoIterator<Item = usize>,
    ) -> Result<Self, QuorumError> {
        let n = grid.n();
        let rows: BTreeSet<usize> = rows.into_iter().collect();
        let cols: BTreeSet<usize> = cols.into_iter().collect();
        if rows.is_empty() || cols.is_empty() {
            return Err(QuorumError::EmptySelection);
        }
        for (what, set) in [("row", &rows), ("column", &cols)] {
            if let Some(&index) = set.iter().find(|&&i| i == 0 || i > n) {
                return Err(QuorumError::IndexOutOfRange { what, index, n });
            }
        }
        Ok(Self {
            n,
            rows: rows.into_iter().collect(),
            cols: cols.into_iter().collect(),
        })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// `(rows, cols)` cardinalities.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    /// Whether the 1-based slot lies on a chosen row or column.
    #[inline]
    pub fn contains(&self, slot: usize) -> bool {
        if slot == 0 || slot > self.n * self.n {
            return false;
        }
        let row = (slot - 1) / self.n + 1;
        let col = (slot - 1) % self.n + 1;
        self.rows.contains(&row) || self.cols.contains(&col)
    }

    /// Whether a chosen row or column passes through grid cell `(row, col)`.
    #[inline]
    pub fn covers(&self, row: usize, col: usize) -> bool {
        self.rows.contains(&row) || self.cols.contains(&col)
    }

    /// The quorum: every slot on a chosen row or column, padding included.
    pub fn slots(&self) -> BTreeSet<usize> {
        (1..=self.n * self.n)
            .filter(|&s| self.contains(s))
            .collect()
    }
}

impl fmt::Display for QuorumSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rows {:?} cols {:?}", self.rows, self.cols)
    }
}

/// Draws `rows` distinct rows and `cols` distinct columns uniformly without
/// replacement.
pub fn select<R: Rng + ?Sized>(
    grid: &GridQuorum,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<QuorumSelection, QuorumError> {
    let mut sel = QuorumSelection {
        n: grid.n(),
        rows: Vec::with_capacity(rows),
        cols: Vec::with_capacity(cols),
    };
    select_into(grid, rows, cols, rng, &mut sel)?;
    Ok(sel)
}

/// [`select`] reusing the buffers of an existing selection.
pub fn select_into<R: Rng + ?Sized>(
    grid: &GridQuorum,
    rows: usize,
    cols: usize,
    rng: &mut R,
    sel: &mut QuorumSelection,
) -> Result<(), QuorumError> {
    let n = grid.n();
    for (what, count) in [("row", rows), ("column", cols)] {
        if count == 0 || count > n {
            return Err(QuorumError::CountOutOfRange { what, count, n });
        }
    }
    sel.n = n;
    sample_distinct(n, rows, rng, &mut sel.rows);
    sample_distinct(n, cols, rng, &mut sel.cols);
    Ok(())
}

// Floyd's algorithm: a uniformly random `k`-subset of 1..=n, sorted.
fn sample_distinct<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    for j in (n - k + 1)..=n {
        let t = rng.random_range(1..=j);
        out.push(if out.contains(&t) { j } else { t });
    }
    out.sort_unstable();
}

/// Slots shared by two selections over the same grid.
pub fn intersection(a: &QuorumSelection, b: &QuorumSelection) -> BTreeSet<usize> {
    debug_assert_eq!(a.n, b.n, "selections from different grids");
    a.slots().intersection(&b.slots()).copied().collect()
}

/// What a user's control transceiver does in one slot of the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HopAction {
    Awake(ChannelId),
    Sleep,
}

impl HopAction {
    pub fn is_awake(self) -> bool {
        matches!(self, HopAction::Awake(_))
    }
}

/// Per-slot schedule for one cycle; entry `i` is slot index `i + 1`.
pub fn hop_sequence(grid: &GridQuorum, sel: &QuorumSelection) -> Vec<HopAction> {
    (1..=grid.cycle_len())
        .map(|s| match grid.channel_at(s) {
            Some(ch) if sel.contains(s) => HopAction::Awake(ch),
            _ => HopAction::Sleep,
        })
        .collect()
}

/// Thresholds on offered load separating the three traffic regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveThresholds {
    pub low: f64,
    pub high: f64,
}

impl AdaptiveThresholds {
    pub fn new(low: f64, high: f64) -> Result<Self, QuorumError> {
        if !(low > 0.0 && low < high && high.is_finite()) {
            return Err(QuorumError::InvalidThresholds { low, high });
        }
        Ok(Self { low, high })
    }
}

impl Default for AdaptiveThresholds {
    fn default() -> Self {
        Self {
            low: 0.5,
            high: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SelectionScheme {
    OneByOne,
    TwoByOne,
    TwoByTwo,
    Adaptive(AdaptiveThresholds),
}

impl SelectionScheme {
    pub fn label(&self) -> &'static str {
        match self {
            SelectionScheme::OneByOne => "1x1",
            SelectionScheme::TwoByOne => "2x1",
            SelectionScheme::TwoByTwo => "2x2",
            SelectionScheme::Adaptive(_) => "adaptive",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, SelectionScheme::Adaptive(_))
    }
}

impl fmt::Display for SelectionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Traffic region reported by the load classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrafficRegion {
    Low,
    Moderate,
    High,
}

/// Rows and columns a scheme selects in the given region. Fixed schemes
/// ignore the region.
pub fn scheme_to_rc(scheme: &SelectionScheme, region: TrafficRegion) -> (usize, usize) {
    match scheme {
        SelectionScheme::OneByOne => (1, 1),
        SelectionScheme::TwoByOne => (2, 1),
        SelectionScheme::TwoByTwo => (2, 2),
        SelectionScheme::Adaptive(_) => match region {
            TrafficRegion::Low => (2, 2),
            TrafficRegion::Moderate => (2, 1),
            TrafficRegion::High => (1, 1),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn grid_sizes() {
        let g = build_grid(16).unwrap();
        assert_eq!(g.n(), 4);
        assert!((1..=16).all(|s| g.channel_at(s) == Some(s)));

        let g = build_grid(1).unwrap();
        assert_eq!((g.n(), g.channel_at(1)), (1, Some(1)));

        let g = build_grid(10).unwrap();
        assert_eq!(g.n(), 4);
        assert!((1..=10).all(|s| g.channel_at(s) == Some(s)));
        assert!((11..=16).all(|s| g.channel_at(s).is_none() && g.is_padding(s)));

        assert_eq!(build_grid(0), Err(QuorumError::NoChannels));
        for (n_ch, n) in [(2, 2), (4, 2), (5, 3), (9, 3), (17, 5), (25, 5), (26, 6)] {
            assert_eq!(build_grid(n_ch).unwrap().n(), n, "N={n_ch}");
        }
    }

    #[test]
    fn selection_slots() {
        let g = build_grid(16).unwrap();
        let s = QuorumSelection::from_parts(&g, [1], [2]).unwrap();
        assert_eq!(s.slots(), set(&[1, 2, 3, 4, 6, 10, 14]));

        let s = QuorumSelection::from_parts(&g, [1, 2], [1]).unwrap();
        assert_eq!(s.slots(), set(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 13]));
        assert_eq!(s.slots().len(), 3 * 4 - 2);

        let g1 = build_grid(1).unwrap();
        let s = QuorumSelection::from_parts(&g1, [1], [1]).unwrap();
        assert_eq!(s.slots(), set(&[1]));
    }

    #[test]
    fn select_rejects_bad_counts() {
        let g = build_grid(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            select(&g, 0, 1, &mut rng),
            Err(QuorumError::CountOutOfRange { what: "row", .. })
        ));
        assert!(matches!(
            select(&g, 1, 5, &mut rng),
            Err(QuorumError::CountOutOfRange { what: "column", .. })
        ));
        assert!(QuorumSelection::from_parts(&g, [5], [1]).is_err());
        assert_eq!(
            QuorumSelection::from_parts(&g, [], [1]),
            Err(QuorumError::EmptySelection)
        );
    }

    #[test]
    fn select_is_deterministic_and_distinct() {
        let g = build_grid(36).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| select(&g, 2, 2, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        let a = draw(7);
        assert_eq!(a, draw(7));
        assert_ne!(a, draw(8));
        for s in &a {
            assert_eq!(s.shape(), (2, 2));
            assert!(s.rows()[0] < s.rows()[1] && s.cols()[0] < s.cols()[1]);
        }
    }

    #[test]
    fn select_is_uniform_over_subsets() {
        let g = build_grid(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = std::collections::BTreeMap::new();
        let draws = 60_000;
        for _ in 0..draws {
            let s = select(&g, 2, 1, &mut rng).unwrap();
            *counts.entry(s.rows().to_vec()).or_insert(0usize) += 1;
        }
        // C(4,2) = 6 row pairs, 10000 expected each
        assert_eq!(counts.len(), 6);
        assert!(
            counts
                .values()
                .all(|&c| (c as f64 - 10_000.0).abs() < 500.0),
            "{counts:?}"
        );
    }

    #[test]
    fn intersection_examples() {
        let g = build_grid(16).unwrap();
        let a = QuorumSelection::from_parts(&g, [1], [2]).unwrap();
        let b = QuorumSelection::from_parts(&g, [2], [3]).unwrap();
        assert_eq!(intersection(&a, &b), set(&[3, 6]));
        assert_eq!(intersection(&a, &a), a.slots());

        let g2 = build_grid(4).unwrap();
        let a = QuorumSelection::from_parts(&g2, [1], [1]).unwrap();
        let b = QuorumSelection::from_parts(&g2, [2], [2]).unwrap();
        assert_eq!(intersection(&a, &b), set(&[2, 3]));
    }

    #[test]
    fn hop_sequences() {
        let g = build_grid(16).unwrap();
        let sel = QuorumSelection::from_parts(&g, [1], [2]).unwrap();
        let hops = hop_sequence(&g, &sel);
        assert_eq!(hops.len(), 16);
        let awake: Vec<(usize, ChannelId)> = hops
            .iter()
            .enumerate()
            .filter_map(|(i, h)| match h {
                HopAction::Awake(c) => Some((i + 1, *c)),
                HopAction::Sleep => None,
            })
            .collect();
        assert_eq!(
            awake,
            [1, 2, 3, 4, 6, 10, 14]
                .iter()
                .map(|&s| (s, s))
                .collect::<Vec<_>>()
        );

        let g10 = build_grid(10).unwrap();
        let sel = QuorumSelection::from_parts(&g10, [1], [2]).unwrap();
        assert!(sel.contains(14));
        let hops = hop_sequence(&g10, &sel);
        assert_eq!(hops[13], HopAction::Sleep);
        assert_eq!(hops.iter().filter(|h| h.is_awake()).count(), 6);

        let g1 = build_grid(1).unwrap();
        let sel = QuorumSelection::from_parts(&g1, [1], [1]).unwrap();
        assert_eq!(hop_sequence(&g1, &sel), vec![HopAction::Awake(1)]);
    }

    #[test]
    fn region_mapping() {
        let ad = SelectionScheme::Adaptive(AdaptiveThresholds::default());
        assert_eq!(scheme_to_rc(&ad, TrafficRegion::Low), (2, 2));
        assert_eq!(scheme_to_rc(&ad, TrafficRegion::Moderate), (2, 1));
        assert_eq!(scheme_to_rc(&ad, TrafficRegion::High), (1, 1));
        for region in [
            TrafficRegion::Low,
            TrafficRegion::Moderate,
            TrafficRegion::High,
        ] {
            assert_eq!(scheme_to_rc(&SelectionScheme::OneByOne, region), (1, 1));
            assert_eq!(scheme_to_rc(&SelectionScheme::TwoByOne, region), (2, 1));
            assert_eq!(scheme_to_rc(&SelectionScheme::TwoByTwo, region), (2, 2));
        }
    }

    #[test]
    fn thresholds_validated() {
        assert!(AdaptiveThresholds::new(0.5, 1.5).is_ok());
        assert!(AdaptiveThresholds::new(1.5, 0.5).is_err());
        assert!(AdaptiveThresholds::new(0.0, 0.5).is_err());
        assert!(AdaptiveThresholds::new(0.5, 0.5).is_err());
    }
}
