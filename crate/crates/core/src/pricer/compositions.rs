//! Dense ranking of weak compositions.
//!
//! The outcome counts of a node are a weak composition of the step index
//! `k` into `p` parts. Compositions are listed in lexicographic order and
//! ranked with the closed form
//! `rank(a) = sum_i [C(rem_i, q_i + 1) - C(rem_i - a_i, q_i + 1)]`, where
//! `rem_i` is what is left before part `i`, `q_i = p - 1 - i` and
//! `C(m, q)` counts compositions of `m` into `q` parts.

/// Table of `C(m, q)` = number of weak compositions of `m` into `q` parts.
#[derive(Debug, Clone)]
pub(crate) struct CompositionCounts {
    parts: usize,
    // counts[m * (parts + 1) + q]
    counts: Vec<u64>,
}

impl CompositionCounts {
    pub fn new(max_total: usize, parts: usize) -> Self {
        let width = parts + 1;
        let mut counts = vec![0u64; (max_total + 1) * width];
        for m in 0..=max_total {
            counts[m * width] = u64::from(m == 0);
            for q in 1..=parts {
                // C(m, q) = sum_{v <= m} C(m - v, q - 1) = C(m, q - 1) + C(m - 1, q)
                let above = if m > 0 { counts[(m - 1) * width + q] } else { 0 };
                counts[m * width + q] = counts[m * width + q - 1].saturating_add(above);
            }
        }
        Self { parts, counts }
    }

    #[inline]
    pub fn get(&self, m: usize, q: usize) -> u64 {
        self.counts[m * (self.parts + 1) + q]
    }

    /// Rank of `comp` among compositions of its sum into `parts` parts.
    #[inline]
    pub fn rank(&self, comp: &[u32]) -> usize {
        debug_assert_eq!(comp.len(), self.parts);
        let mut rem: usize = comp.iter().map(|&a| a as usize).sum();
        let mut rank = 0u64;
        for (i, &a) in comp[..self.parts - 1].iter().enumerate() {
            let q = self.parts - 1 - i;
            let a = a as usize;
            rank += self.get(rem, q + 1) - self.get(rem - a, q + 1);
            rem -= a;
        }
        rank as usize
    }
}

/// All compositions of `total` into `parts` parts, in rank order.
#[derive(Debug, Clone)]
pub(crate) struct Compositions {
    parts: usize,
    flat: Vec<u32>,
}

impl Compositions {
    pub fn new(total: usize, parts: usize) -> Self {
        let mut flat = Vec::new();
        let mut current = vec![0u32; parts];
        fill(&mut flat, &mut current, 0, total as u32);
        Self { parts, flat }
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.parts
    }

    #[inline]
    pub fn get(&self, idx: usize) -> &[u32] {
        &self.flat[idx * self.parts..(idx + 1) * self.parts]
    }

    /// `succ[idx * parts + w]` is the rank, one layer up, of composition
    /// `idx` with part `w` incremented.
    pub fn successors(&self, counts: &CompositionCounts) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.flat.len() * self.parts);
        let mut bumped = vec![0u32; self.parts];
        for idx in 0..self.len() {
            let comp = self.get(idx);
            for w in 0..self.parts {
                bumped.copy_from_slice(comp);
                bumped[w] += 1;
                out.push(counts.rank(&bumped));
            }
        }
        out
    }
}

fn fill(out: &mut Vec<u32>, current: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for a in 0..=remaining {
        current[pos] = a;
        fill(out, current, pos + 1, remaining - a);
    }
}
