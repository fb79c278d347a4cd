//! Dense occupancy sets used by the bijection checks.

/// Fixed-domain bit set over `0..domain`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseBitSet {
    domain: usize,
    words: Vec<u64>,
}

impl DenseBitSet {
    pub fn new(domain: usize) -> Self {
        Self {
            domain,
            words: vec![0u64; domain.div_ceil(64)],
        }
    }

    #[inline]
    pub fn contains(&self, bit: usize) -> bool {
        debug_assert!(bit < self.domain);
        self.words[bit / 64] & (1u64 << (bit % 64)) != 0
    }

    /// Inserts `bit`; returns `true` if it was not present before.
    #[inline]
    pub fn insert(&mut self, bit: usize) -> bool {
        debug_assert!(bit < self.domain);
        let word = &mut self.words[bit / 64];
        let mask = 1u64 << (bit % 64);
        let fresh = *word & mask == 0;
        *word |= mask;
        fresh
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }
}

/// Occupancy set with O(1) reset, for tight sweep loops that run millions of
/// bijection checks over the same domain. A slot is occupied iff its stamp
/// equals the current generation.
#[derive(Debug, Clone)]
pub struct StampSet {
    stamps: Vec<u32>,
    generation: u32,
}

impl StampSet {
    pub fn new(domain: usize) -> Self {
        Self {
            stamps: vec![0; domain],
            generation: 1,
        }
    }

    #[inline]
    pub fn reset(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            // Stamp wrap-around: old stamps could alias generation 0.
            self.stamps.fill(0);
            self.generation = 1;
        }
    }

    /// Inserts `slot`; returns `true` if it was not present since the last reset.
    #[inline]
    pub fn insert(&mut self, slot: usize) -> bool {
        let s = &mut self.stamps[slot];
        let fresh = *s != self.generation;
        *s = self.generation;
        fresh
    }

    #[inline]
    pub fn contains(&self, slot: usize) -> bool {
        self.stamps[slot] == self.generation
    }
}
