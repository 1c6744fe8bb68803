//! Dense h-by-h bit matrices packed into a single machine word, plus the
//! constant-time row/column surgery used on chunk adjacency matrices.
//!
//! Layout: entry (k, l) lives at bit (h*h - 1) - (k*h + l), counting from the
//! least significant bit. Reading the word from its most significant used bit
//! down to bit 0 yields the matrix in row-major order, so a right shift moves
//! entries to later row-major positions. Bits at positions >= h*h are always
//! zero.

/// One matrix held in a word. Entry (k, l) sits at bit (h*h-1) - (k*h + l).
pub type MatrixWord = u64;

/// Precomputed shift masks for one matrix side length `h`.
///
/// `mu` selects the even rows; `nu[k]` selects columns `k..h` in every row
/// (`nu[h]` is zero). All operations assume their operands keep the padding
/// bits above `h*h` clear and preserve that property.
#[derive(Debug, Clone)]
pub struct MaskSet {
    h: u32,
    mu: u64,
    nu: Vec<u64>,
}

/// All-ones mask of the low `n` bits, for `n <= 64`.
fn ones(n: u32) -> u64 {
    if n >= 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}

impl MaskSet {
    /// Build the masks for side length `h`. Requires `h` even, `2 <= h`, and
    /// `h*h <= w <= 64`.
    pub fn new(h: u32, w: u32) -> MaskSet {
        assert!(h >= 2 && h % 2 == 0, "h must be even and at least 2");
        assert!(w <= 64 && h * h <= w, "h*h must fit in the word");
        let mut mu = 0u64;
        for r in (0..h).step_by(2) {
            mu |= Self::row_bits(h, r);
        }
        let mut nu = Vec::with_capacity(h as usize + 1);
        for k in 0..h {
            let nu_k_even = (mu >> k) & mu;
            nu.push(nu_k_even | (nu_k_even >> h));
        }
        nu.push(0);
        MaskSet { h, mu, nu }
    }

    fn row_bits(h: u32, r: u32) -> u64 {
        ones(h) << (h * h - (r + 1) * h)
    }

    /// Side length this mask set serves.
    pub fn h(&self) -> u32 {
        self.h
    }

    /// The even-rows mask.
    pub fn mu(&self) -> u64 {
        self.mu
    }

    /// Mask of columns `k..h` over all rows (`nu(h)` is zero).
    pub fn nu(&self, k: u32) -> u64 {
        self.nu[k as usize]
    }

    /// Mask covering rows `a..b`.
    pub fn rows_mask(&self, a: u32, b: u32) -> u64 {
        assert!(a <= b && b <= self.h);
        if a == b {
            return 0;
        }
        let h = self.h;
        ones((b - a) * h) << (h * h - b * h)
    }

    /// Mask covering columns `a..b` in every row.
    pub fn cols_mask(&self, a: u32, b: u32) -> u64 {
        assert!(a <= b && b <= self.h);
        self.nu[a as usize] & !self.nu[b as usize]
    }

    fn bit_pos(&self, k: u32, l: u32) -> u32 {
        assert!(k < self.h && l < self.h, "matrix index out of range");
        self.h * self.h - 1 - (k * self.h + l)
    }

    /// Read entry (k, l).
    pub fn get_bit(&self, a: MatrixWord, k: u32, l: u32) -> bool {
        (a >> self.bit_pos(k, l)) & 1 != 0
    }

    /// Set entry (k, l) to one.
    pub fn set_bit(&self, a: MatrixWord, k: u32, l: u32) -> MatrixWord {
        a | (1u64 << self.bit_pos(k, l))
    }

    /// Clear entry (k, l).
    pub fn clear_bit(&self, a: MatrixWord, k: u32, l: u32) -> MatrixWord {
        a & !(1u64 << self.bit_pos(k, l))
    }

    /// Insert an all-zero row at index `k`; rows `k..h-1` move one down and
    /// the last row is discarded.
    pub fn insert_zero_row(&self, a: MatrixWord, k: u32) -> MatrixWord {
        assert!(k < self.h, "row index out of range");
        let low = self.rows_mask(k, self.h);
        (a & !low) | ((a & low) >> self.h)
    }

    /// Insert an all-zero column at index `k`; columns `k..h-1` move one right
    /// and the last column is discarded.
    pub fn insert_zero_col(&self, a: MatrixWord, k: u32) -> MatrixWord {
        assert!(k < self.h, "column index out of range");
        let kept = a & (self.nu[k as usize + 1] << 1);
        (a & !self.nu[k as usize]) | (kept >> 1)
    }

    /// Replace row `k` with the OR of rows `k` and `k+1`, then move rows
    /// `k+2..h` one up; the last row becomes zero.
    pub fn merge_rows(&self, a: MatrixWord, k: u32) -> MatrixWord {
        assert!(k + 1 < self.h, "row pair out of range");
        let before = a & self.rows_mask(0, k);
        let row_k = a & self.rows_mask(k, k + 1);
        let after = (a & self.rows_mask(k + 1, self.h)) << self.h;
        before | row_k | after
    }

    /// Replace column `k` with the OR of columns `k` and `k+1`, then move
    /// columns `k+2..h` one left; the last column becomes zero.
    pub fn merge_cols(&self, a: MatrixWord, k: u32) -> MatrixWord {
        assert!(k + 1 < self.h, "column pair out of range");
        let before = a & self.cols_mask(0, k);
        let col_k = a & self.cols_mask(k, k + 1);
        let after = (a & self.nu[k as usize + 1]) << 1;
        before | col_k | after
    }

    /// Copy rows `a..b` of `src` over rows `target..target+(b-a)` of `dst`.
    pub fn copy_row_interval(
        &self,
        src: MatrixWord,
        dst: MatrixWord,
        a: u32,
        b: u32,
        target: u32,
    ) -> MatrixWord {
        assert!(a <= b && b <= self.h, "row interval out of range");
        assert!(target + (b - a) <= self.h, "copy target overflow");
        if a == b {
            return dst;
        }
        let picked = src & self.rows_mask(a, b);
        let moved = if target >= a {
            picked >> ((target - a) * self.h)
        } else {
            picked << ((a - target) * self.h)
        };
        (dst & !self.rows_mask(target, target + (b - a))) | moved
    }

    /// Copy columns `a..b` of `src` over columns `target..target+(b-a)` of
    /// `dst`.
    pub fn copy_col_interval(
        &self,
        src: MatrixWord,
        dst: MatrixWord,
        a: u32,
        b: u32,
        target: u32,
    ) -> MatrixWord {
        assert!(a <= b && b <= self.h, "column interval out of range");
        assert!(target + (b - a) <= self.h, "copy target overflow");
        if a == b {
            return dst;
        }
        let picked = src & self.cols_mask(a, b);
        let moved = if target >= a {
            picked >> (target - a)
        } else {
            picked << (a - target)
        };
        (dst & !self.cols_mask(target, target + (b - a))) | moved
    }

    /// Extract the block rows `r0..r1` x cols `c0..c1` of `src`, reposition
    /// its top-left corner at (`tr`, `tc`), and OR it into `dst`.
    pub fn or_block(
        &self,
        src: MatrixWord,
        dst: MatrixWord,
        r0: u32,
        r1: u32,
        c0: u32,
        c1: u32,
        tr: u32,
        tc: u32,
    ) -> MatrixWord {
        assert!(tr + (r1 - r0) <= self.h && tc + (c1 - c0) <= self.h);
        if r0 == r1 || c0 == c1 {
            return dst;
        }
        let picked = src & self.rows_mask(r0, r1) & self.cols_mask(c0, c1);
        // Moving by (dr, dc) changes a bit position by -(dr*h + dc).
        let from = r0 * self.h + c0;
        let to = tr * self.h + tc;
        let moved = if to >= from {
            picked >> (to - from)
        } else {
            picked << (from - to)
        };
        dst | moved
    }

    /// Position of the first one in row-major order, or None if `a` is zero.
    pub fn find_one(&self, a: MatrixWord) -> Option<(u32, u32)> {
        if a == 0 {
            return None;
        }
        let p = 63 - a.leading_zeros();
        let idx = self.h * self.h - 1 - p;
        Some((idx / self.h, idx % self.h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::RefMatrix;

    /// Parse rows written MSB-first, e.g. ["1010", "0110", ...].
    fn word(ms: &MaskSet, rows: &[&str]) -> u64 {
        let mut a = 0u64;
        for (k, row) in rows.iter().enumerate() {
            for (l, c) in row.chars().enumerate() {
                if c == '1' {
                    a = ms.set_bit(a, k as u32, l as u32);
                }
            }
        }
        a
    }

    #[test]
    fn masks_match_published_values() {
        let ms = MaskSet::new(4, 64);
        assert_eq!(ms.mu(), 0b1111_0000_1111_0000);
        assert_eq!(ms.nu(1), 0b0111_0111_0111_0111);
        assert_eq!(ms.nu(0), 0b1111_1111_1111_1111);
        assert_eq!(ms.nu(4), 0);
    }

    #[test]
    fn insert_zero_row_shifts_tail_down() {
        let ms = MaskSet::new(4, 64);
        let a = word(&ms, &["1010", "0110", "0001", "0000"]);
        let got = ms.insert_zero_row(a, 1);
        assert_eq!(got, word(&ms, &["1010", "0000", "0110", "0001"]));
        let all = word(&ms, &["1111", "1111", "1111", "1111"]);
        assert_eq!(
            ms.insert_zero_row(all, 0),
            word(&ms, &["0000", "1111", "1111", "1111"])
        );
    }

    #[test]
    fn insert_zero_col_shifts_tail_right() {
        let ms = MaskSet::new(4, 64);
        let a = word(&ms, &["1111", "0000", "1010", "0001"]);
        assert_eq!(
            ms.insert_zero_col(a, 2),
            word(&ms, &["1101", "0000", "1001", "0000"])
        );
        let id = word(&ms, &["1000", "0100", "0010", "0001"]);
        assert_eq!(
            ms.insert_zero_col(id, 0),
            word(&ms, &["0100", "0010", "0001", "0000"])
        );
    }

    #[test]
    fn merge_rows_ors_then_scoots() {
        let ms = MaskSet::new(4, 64);
        let a = word(&ms, &["0011", "0101", "1000", "0001"]);
        assert_eq!(
            ms.merge_rows(a, 0),
            word(&ms, &["0111", "1000", "0001", "0000"])
        );
    }

    #[test]
    fn copy_intervals_match_examples() {
        let ms = MaskSet::new(4, 64);
        let src = word(&ms, &["1100", "0011", "0000", "0000"]);
        assert_eq!(
            ms.copy_row_interval(src, 0, 0, 2, 2),
            word(&ms, &["0000", "0000", "1100", "0011"])
        );
        let col0 = word(&ms, &["1000", "1000", "1000", "1000"]);
        assert_eq!(
            ms.copy_col_interval(col0, 0, 0, 1, 3),
            word(&ms, &["0001", "0001", "0001", "0001"])
        );
    }

    #[test]
    fn find_one_prefers_row_major_order() {
        let ms = MaskSet::new(4, 64);
        let mut a = 0;
        a = ms.set_bit(a, 2, 0);
        a = ms.set_bit(a, 1, 3);
        assert_eq!(ms.find_one(a), Some((1, 3)));
        assert_eq!(ms.find_one(0), None);
    }

    #[test]
    fn bit_ops_round_trip() {
        for h in [2u32, 4, 6, 8] {
            let ms = MaskSet::new(h, 64);
            let mut a = 0u64;
            for k in 0..h {
                for l in 0..h {
                    a = ms.set_bit(a, k, l);
                    assert!(ms.get_bit(a, k, l));
                }
            }
            assert_eq!(a, ones(h * h));
            for k in 0..h {
                for l in 0..h {
                    a = ms.clear_bit(a, k, l);
                    assert!(!ms.get_bit(a, k, l));
                }
            }
            assert_eq!(a, 0);
        }
    }

    fn to_ref(ms: &MaskSet, a: u64) -> RefMatrix {
        let h = ms.h();
        let mut m = RefMatrix::zero(h as usize);
        for k in 0..h {
            for l in 0..h {
                if ms.get_bit(a, k, l) {
                    m.set(k as usize, l as usize, true);
                }
            }
        }
        m
    }

    fn from_ref(ms: &MaskSet, m: &RefMatrix) -> u64 {
        let mut a = 0u64;
        for k in 0..ms.h() {
            for l in 0..ms.h() {
                if m.get(k as usize, l as usize) {
                    a = ms.set_bit(a, k, l);
                }
            }
        }
        a
    }

    #[test]
    fn differential_against_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for h in [2u32, 4, 6, 8] {
            let ms = MaskSet::new(h, 64);
            for _ in 0..500 {
                let a = rng.gen::<u64>() & ones(h * h);
                let r = to_ref(&ms, a);
                let k = rng.gen_range(0..h);
                assert_eq!(
                    ms.insert_zero_row(a, k),
                    from_ref(&ms, &r.insert_zero_row(k as usize)),
                    "insert_zero_row h={h} k={k}"
                );
                assert_eq!(
                    ms.insert_zero_col(a, k),
                    from_ref(&ms, &r.insert_zero_col(k as usize)),
                    "insert_zero_col h={h} k={k}"
                );
                if k + 1 < h {
                    assert_eq!(
                        ms.merge_rows(a, k),
                        from_ref(&ms, &r.merge_rows(k as usize)),
                        "merge_rows h={h} k={k}"
                    );
                    assert_eq!(
                        ms.merge_cols(a, k),
                        from_ref(&ms, &r.merge_cols(k as usize)),
                        "merge_cols h={h} k={k}"
                    );
                }
                assert_eq!(
                    ms.find_one(a),
                    r.find_one().map(|(k, l)| (k as u32, l as u32)),
                    "find_one h={h}"
                );
                let b = rng.gen::<u64>() & ones(h * h);
                let rb = to_ref(&ms, b);
                let x = rng.gen_range(0..=h);
                let y = rng.gen_range(x..=h);
                let t = rng.gen_range(0..=h - (y - x));
                assert_eq!(
                    ms.copy_row_interval(a, b, x, y, t),
                    from_ref(
                        &ms,
                        &rb.copy_row_interval(&r, x as usize, y as usize, t as usize)
                    ),
                    "copy_row_interval h={h} {x}..{y}->{t}"
                );
                assert_eq!(
                    ms.copy_col_interval(a, b, x, y, t),
                    from_ref(
                        &ms,
                        &rb.copy_col_interval(&r, x as usize, y as usize, t as usize)
                    ),
                    "copy_col_interval h={h} {x}..{y}->{t}"
                );
            }
        }
    }
}
