//! Deterministic pairwise summation.
//!
//! Values are merged like a binary counter: two partial sums of equal level
//! combine immediately, and leftovers combine right to left at the end. The
//! tree shape depends only on the number of terms, so a sum is reproducible
//! bit for bit regardless of thread count. Duplicating every term in place
//! doubles each leaf pair exactly, which makes the result exactly twice the
//! original sum.

const MAX_LEVELS: usize = 64;

#[derive(Debug, Clone)]
pub struct PairwiseSum {
    partial: [f64; MAX_LEVELS],
    level: [u32; MAX_LEVELS],
    depth: usize,
}

impl Default for PairwiseSum {
    fn default() -> Self {
        Self::new()
    }
}

impl PairwiseSum {
    pub fn new() -> Self {
        PairwiseSum {
            partial: [0.0; MAX_LEVELS],
            level: [0; MAX_LEVELS],
            depth: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        self.push(value, 0);
    }

    /// Same result as adding the eight values one by one. Only valid while
    /// the number of terms added so far is a multiple of eight.
    #[inline]
    pub fn add_block(&mut self, v: &[f64; 8]) {
        debug_assert!(self.depth == 0 || self.level[self.depth - 1] >= 3);
        let sum = ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]));
        self.push(sum, 3);
    }

    #[inline]
    fn push(&mut self, value: f64, level: u32) {
        let mut value = value;
        let mut level = level;
        while self.depth > 0 && self.level[self.depth - 1] == level {
            self.depth -= 1;
            value += self.partial[self.depth];
            level += 1;
        }
        self.partial[self.depth] = value;
        self.level[self.depth] = level;
        self.depth += 1;
    }

    pub fn finish(&self) -> f64 {
        let mut acc = match self.depth {
            0 => return 0.0,
            d => self.partial[d - 1],
        };
        for i in (0..self.depth - 1).rev() {
            acc += self.partial[i];
        }
        acc
    }
}

pub fn pairwise_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = PairwiseSum::new();
    for v in values {
        sum.add(v);
    }
    sum.finish()
}
