//! Cell-state representation shared by every code.

use std::fmt;

use thiserror::Error;

/// Largest supported number of charge levels per cell.
pub const MAX_LEVELS: u32 = 1 << 16;

/// Largest supported number of cells in one code instance.
pub const MAX_CELLS_LOG2: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeKind {
    SelfRandomized,
    LoadBalancing,
}

impl CodeKind {
    pub fn name(self) -> &'static str {
        match self {
            CodeKind::SelfRandomized => "self-randomized",
            CodeKind::LoadBalancing => "load-balancing",
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("alphabet size l = {0} is not supported (only l = 2)")]
    UnsupportedAlphabet(u32),
    #[error("q = {0} is out of range (need 2 <= q <= {MAX_LEVELS})")]
    LevelsOutOfRange(u32),
    #[error("code would need 2^{0} cells (at most 2^{MAX_CELLS_LOG2} supported)")]
    TooManyCells(u32),
}

/// Static configuration of one `n`-cell code instance.
///
/// `n` is derived from the kind: `l^k` for the self-randomized code and
/// `l^(k+1)` for the load-balancing code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeParams {
    kind: CodeKind,
    k: u32,
    l: u32,
    q: u32,
    n: usize,
}

impl CodeParams {
    pub fn new(kind: CodeKind, k: u32, l: u32, q: u32) -> Result<Self, ParamsError> {
        if k == 0 {
            return Err(ParamsError::ZeroK);
        }
        if l != 2 {
            return Err(ParamsError::UnsupportedAlphabet(l));
        }
        if !(2..=MAX_LEVELS).contains(&q) {
            return Err(ParamsError::LevelsOutOfRange(q));
        }
        let log2_n = match kind {
            CodeKind::SelfRandomized => k,
            CodeKind::LoadBalancing => k + 1,
        };
        if log2_n > MAX_CELLS_LOG2 {
            return Err(ParamsError::TooManyCells(log2_n));
        }
        Ok(Self {
            kind,
            k,
            l,
            q,
            n: 1usize << log2_n,
        })
    }

    pub fn self_randomized(k: u32, q: u32) -> Result<Self, ParamsError> {
        Self::new(CodeKind::SelfRandomized, k, 2, q)
    }

    pub fn load_balancing(k: u32, q: u32) -> Result<Self, ParamsError> {
        Self::new(CodeKind::LoadBalancing, k, 2, q)
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct values a rewrite can store, `l^k`.
    pub fn alphabet_size(&self) -> u64 {
        (self.l as u64).pow(self.k)
    }

    /// Total level increments available between two erasures, `n(q-1)`.
    pub fn capacity(&self) -> u64 {
        self.n as u64 * (self.q as u64 - 1)
    }

    pub fn zero_state(&self) -> CellState {
        CellState::new(self.n, self.q)
    }
}

/// Result of asking a code (or a cell) to absorb one write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteOutcome {
    /// The level of this cell was raised by one.
    Written(usize),
    /// The stored value already equals the requested one; nothing changed.
    NoOp,
    /// The selected cell is already at `q - 1`; the block must be erased.
    EraseRequired,
}

/// Charge levels of `n` cells, each in `0..q`.
///
/// The l1 norm and the index-weighted sum are maintained incrementally so
/// that decoding is O(1); both are pure functions of `levels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellState {
    levels: Vec<u16>,
    q: u32,
    total: u64,
    weighted: u128,
}

impl CellState {
    /// All-zero state of `n` cells with `q` levels.
    pub fn new(n: usize, q: u32) -> Self {
        assert!(n >= 1, "a cell state needs at least one cell");
        assert!((2..=MAX_LEVELS).contains(&q), "q out of range: {q}");
        Self {
            levels: vec![0; n],
            q,
            total: 0,
            weighted: 0,
        }
    }

    /// Builds a state directly from levels. Panics if any level is `>= q`.
    pub fn from_levels(levels: &[u32], q: u32) -> Self {
        let mut state = Self::new(levels.len(), q);
        for (i, &lvl) in levels.iter().enumerate() {
            assert!(lvl < q, "level {lvl} at cell {i} is not below q = {q}");
            state.levels[i] = lvl as u16;
            state.total += lvl as u64;
            state.weighted += i as u128 * lvl as u128;
        }
        state
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn level(&self, idx: usize) -> u32 {
        self.levels[idx] as u32
    }

    pub fn levels(&self) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.levels.iter().map(|&l| l as u32)
    }

    pub fn max_level(&self) -> u32 {
        self.levels().max().unwrap_or(0)
    }

    /// Sum of all levels; the number of incrementing writes since the last erase.
    pub fn l1_norm(&self) -> u64 {
        self.total
    }

    /// `(sum_i i * level[i]) mod modulus`.
    pub fn weighted_sum(&self, modulus: u64) -> u64 {
        assert!(modulus >= 1, "modulus must be positive");
        (self.weighted % modulus as u128) as u64
    }

    /// Raises cell `idx` by one level, or reports that it is already full.
    ///
    /// Panics if `idx` is out of range.
    pub fn increment(&mut self, idx: usize) -> WriteOutcome {
        let lvl = self.levels[idx];
        if lvl as u32 + 1 >= self.q {
            return WriteOutcome::EraseRequired;
        }
        self.levels[idx] = lvl + 1;
        self.total += 1;
        self.weighted += idx as u128;
        WriteOutcome::Written(idx)
    }

    /// Resets every cell to level zero.
    pub fn erase(&mut self) {
        self.levels.fill(0);
        self.total = 0;
        self.weighted = 0;
    }
}

pub fn l1_norm(state: &CellState) -> u64 {
    state.l1_norm()
}

pub fn weighted_sum(state: &CellState, modulus: u64) -> u64 {
    state.weighted_sum(modulus)
}

pub fn cell_increment(state: &mut CellState, idx: usize) -> WriteOutcome {
    state.increment(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn l1_norm_examples() {
        assert_eq!(l1_norm(&CellState::from_levels(&[0, 0, 0, 0], 4)), 0);
        assert_eq!(l1_norm(&CellState::from_levels(&[1, 2, 0], 4)), 3);
        assert_eq!(l1_norm(&CellState::from_levels(&[1, 1], 4)), 2);
    }

    #[test]
    fn weighted_sum_examples() {
        assert_eq!(
            weighted_sum(&CellState::from_levels(&[2, 0, 0, 0], 4), 4),
            0
        );
        assert_eq!(
            weighted_sum(&CellState::from_levels(&[0, 1, 0, 1], 4), 4),
            0
        );
        assert_eq!(
            weighted_sum(&CellState::from_levels(&[0, 0, 1, 0], 4), 4),
            2
        );
    }

    #[test]
    fn increment_examples() {
        let mut s = CellState::from_levels(&[0, 0, 0], 4);
        assert_eq!(cell_increment(&mut s, 1), WriteOutcome::Written(1));
        assert_eq!(s, CellState::from_levels(&[0, 1, 0], 4));

        let mut s = CellState::from_levels(&[3, 0], 4);
        let before = s.clone();
        assert_eq!(cell_increment(&mut s, 0), WriteOutcome::EraseRequired);
        assert_eq!(s, before);

        let mut s = CellState::from_levels(&[1, 1], 2);
        assert_eq!(cell_increment(&mut s, 1), WriteOutcome::EraseRequired);
    }

    #[test]
    #[should_panic]
    fn increment_out_of_range_panics() {
        let mut s = CellState::new(3, 4);
        s.increment(3);
    }

    #[test]
    fn erase_resets() {
        let mut s = CellState::from_levels(&[1, 2, 3], 4);
        s.erase();
        assert_eq!(s, CellState::new(3, 4));
    }

    #[test]
    fn params_validation() {
        assert_eq!(CodeParams::self_randomized(3, 16).unwrap().n(), 8);
        assert_eq!(CodeParams::load_balancing(3, 16).unwrap().n(), 16);
        assert_eq!(CodeParams::self_randomized(0, 4), Err(ParamsError::ZeroK));
        assert_eq!(
            CodeParams::new(CodeKind::SelfRandomized, 2, 3, 4),
            Err(ParamsError::UnsupportedAlphabet(3))
        );
        assert_eq!(
            CodeParams::self_randomized(2, 1),
            Err(ParamsError::LevelsOutOfRange(1))
        );
        assert_eq!(
            CodeParams::load_balancing(24, 4),
            Err(ParamsError::TooManyCells(25))
        );
        assert!(CodeParams::self_randomized(2, MAX_LEVELS).is_ok());
    }

    proptest! {
        #[test]
        fn increments_track_norm_and_weighted_sum(
            n in 1usize..12,
            q in 2u32..6,
            writes in proptest::collection::vec(0usize..12, 0..80),
            modulus in 1u64..40,
        ) {
            let mut s = CellState::new(n, q);
            for w in writes {
                let idx = w % n;
                let norm = s.l1_norm();
                let ws = s.weighted_sum(modulus);
                match s.increment(idx) {
                    WriteOutcome::Written(i) => {
                        prop_assert_eq!(i, idx);
                        prop_assert_eq!(s.l1_norm(), norm + 1);
                        prop_assert_eq!(s.weighted_sum(modulus), (ws + i as u64) % modulus);
                    }
                    WriteOutcome::EraseRequired => {
                        prop_assert_eq!(s.level(idx), q - 1);
                        prop_assert_eq!(s.l1_norm(), norm);
                    }
                    WriteOutcome::NoOp => unreachable!(),
                }
                prop_assert!(s.levels().all(|l| l < q));
            }
            let rebuilt = CellState::from_levels(&s.levels().collect::<Vec<_>>(), q);
            prop_assert_eq!(rebuilt, s);
        }
    }
}
