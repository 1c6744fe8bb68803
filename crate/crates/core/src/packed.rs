//! Sparse h-by-h bit matrices stored as sorted lists of coordinate fields
//! packed several to a machine word.
//!
//! Each present entry (k, l) is coded as one field `(k+1) * 2^b + (l+1)` of
//! `f = 1 + 2b` bits, where `b` is the bit width of a 1-based index. The top
//! bit of every field (the control bit) is kept clear in stored words; it
//! serves as carry space for word-parallel comparisons. Fields sit at bit
//! offsets `slot * f` in ascending value order, unused high slots are zero,
//! and words across the list are sorted so the whole list enumerates entries
//! in row-major order. Every word carries at least `cap/2` (rounded up)
//! fields unless it is the only word.

/// Field geometry for one side length `h`.
#[derive(Debug, Clone)]
pub struct FieldCoding {
    h: u32,
    /// Bits per 1-based index.
    b: u32,
    /// Bits per field: one control bit plus two indices.
    f: u32,
    /// Fields per 64-bit word.
    cap: u32,
    /// Minimum fields per stored word (last-word/single-word rules aside).
    min_fill: u32,
    /// Slot count of the in-word sorting container (power of two).
    sort_slots: u32,
    /// `1` at bit `slot*f` for every stored slot.
    rep1: u64,
    /// Control bit of every stored slot.
    ctrl: u64,
    /// Low `b` bits of every stored slot.
    col_rep: u64,
    /// Compare-exchange rounds for the sorting container: (distance, mask of
    /// participating low slots as full-field u128 masks).
    rounds: Vec<(u32, u128)>,
    /// Top (control) bit of every sort-container slot (u128).
    ctrl_wide: u128,
}

/// Sparse matrix: sorted field list. Rows and columns are 0-based at the API
/// boundary and 1-based inside fields.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackedMatrix {
    words: Vec<u64>,
    count: usize,
}

impl FieldCoding {
    /// Geometry for side `h` with 64-bit words. Requires `2 <= h <= 64` and
    /// `h` even (odd side lengths would collide with the all-ones padding
    /// value).
    pub fn new(h: u32) -> FieldCoding {
        assert!((2..=64).contains(&h) && h % 2 == 0, "bad side length");
        let b = 32 - h.leading_zeros();
        let f = 1 + 2 * b;
        let cap = 64 / f;
        assert!(cap >= 2);
        let sort_slots = cap.next_power_of_two();
        assert!(sort_slots * f <= 128);
        let mut rep1 = 0u64;
        for i in 0..cap {
            rep1 |= 1u64 << (i * f);
        }
        let mut rep1_wide = 0u128;
        for i in 0..sort_slots {
            rep1_wide |= 1u128 << (i * f);
        }
        let ctrl = rep1 << (f - 1);
        let ctrl_wide = rep1_wide << (f - 1);
        let col_rep = rep1.wrapping_mul((1u64 << b) - 1);
        let rounds = Self::merge_sort_rounds(sort_slots, f);
        FieldCoding {
            h,
            b,
            f,
            cap,
            min_fill: cap.div_ceil(2),
            sort_slots,
            rep1,
            ctrl,
            col_rep,
            rounds,
            ctrl_wide,
        }
    }

    /// Batcher odd-even mergesort comparator rounds for `n` slots; each round
    /// holds same-distance disjoint pairs, so one masked compare-exchange
    /// handles the whole round.
    fn merge_sort_rounds(n: u32, f: u32) -> Vec<(u32, u128)> {
        let field: u128 = (1u128 << f) - 1;
        let mut rounds = Vec::new();
        let mut p = 1;
        while p < n {
            let mut k = p;
            while k >= 1 {
                let mut mask = 0u128;
                let mut j = k % p;
                while j + k < n {
                    for i in 0..k.min(n - j - k) {
                        let lo = i + j;
                        if (lo / (2 * p)) == ((lo + k) / (2 * p)) {
                            mask |= field << (lo * f);
                        }
                    }
                    j += 2 * k;
                }
                if mask != 0 {
                    rounds.push((k, mask));
                }
                k /= 2;
            }
            p *= 2;
        }
        rounds
    }

    /// Side length.
    pub fn h(&self) -> u32 {
        self.h
    }

    /// Fields per word.
    pub fn cap(&self) -> u32 {
        self.cap
    }

    /// Minimum fill of a non-solitary word.
    pub fn min_fill(&self) -> u32 {
        self.min_fill
    }

    /// Bits per field.
    pub fn field_bits(&self) -> u32 {
        self.f
    }

    /// Encode a 0-based entry.
    fn enc(&self, k: u32, l: u32) -> u64 {
        debug_assert!(k < self.h && l < self.h);
        (((k + 1) as u64) << self.b) | (l + 1) as u64
    }

    /// Decode a field to a 0-based entry.
    fn dec(&self, v: u64) -> (u32, u32) {
        let col = (v & ((1 << self.b) - 1)) as u32;
        let row = (v >> self.b) as u32;
        (row - 1, col - 1)
    }

    /// Smallest field value with 1-based row `r` (column part zero); useful
    /// as an exclusive/inclusive row boundary in searches.
    fn row_floor(&self, r: u32) -> u64 {
        (r as u64) << self.b
    }

    fn word_len(&self, w: u64) -> u32 {
        if w == 0 {
            0
        } else {
            (63 - w.leading_zeros()) / self.f + 1
        }
    }

    fn slot_get(&self, w: u64, slot: u32) -> u64 {
        (w >> (slot * self.f)) & ((1 << self.f) - 1)
    }

    fn used_payload(&self, len: u32) -> u64 {
        if len == 0 {
            0
        } else if len * self.f >= 64 {
            !0
        } else {
            (1u64 << (len * self.f)) - 1
        }
    }

    /// Control-bit marks for slots whose field is >= v, restricted to the low
    /// `len` slots. Works by adding `2^(f-1) - v` to every payload at once and
    /// collecting the carries in the control bits.
    fn marks_ge(&self, w: u64, len: u32, v: u64) -> u64 {
        debug_assert!(v >= 1 && v < (1 << (self.f - 1)));
        let add = self.rep1.wrapping_mul((1u64 << (self.f - 1)) - v);
        w.wrapping_add(add) & self.ctrl & self.used_payload(len)
    }

    /// Control-bit marks for slots whose field is > v, same restriction.
    fn marks_gt(&self, w: u64, len: u32, v: u64) -> u64 {
        if v + 1 >= (1 << (self.f - 1)) {
            return 0;
        }
        self.marks_ge(w, len, v + 1)
    }

    /// Slot of the first field >= v, or `len` if none.
    fn first_slot_ge(&self, w: u64, len: u32, v: u64) -> u32 {
        let m = self.marks_ge(w, len, v);
        if m == 0 {
            len
        } else {
            m.trailing_zeros() / self.f
        }
    }

    /// Insert `v` at `slot`, shifting higher fields up. `len < cap` required.
    fn word_insert(&self, w: u64, len: u32, slot: u32, v: u64) -> u64 {
        debug_assert!(len < self.cap && slot <= len);
        let wide = w as u128;
        let low = wide & ((1u128 << (slot * self.f)) - 1);
        let high = (wide >> (slot * self.f)) << ((slot + 1) * self.f);
        (low | high | ((v as u128) << (slot * self.f))) as u64
    }

    /// Remove the field at `slot`, shifting higher fields down.
    fn word_remove(&self, w: u64, slot: u32) -> u64 {
        let low = w & ((1u64 << (slot * self.f)) - 1);
        let high = (w >> ((slot + 1) * self.f)) << (slot * self.f);
        low | high
    }

    /// Per-slot unsigned `a >= b` over the sort container, as control-bit
    /// marks smeared over whole fields.
    fn wide_ge_fields(&self, a: u128, b: u128) -> u128 {
        let h = self.ctrl_wide;
        let d = (a | h).wrapping_sub(b & !h);
        let at = a & h;
        let bt = b & h;
        let ge = (at & !bt) | (!(at ^ bt) & d) & h;
        let ge = ge & h;
        (ge >> (self.f - 1)).wrapping_mul((1u128 << self.f) - 1)
    }

    /// One batched compare-exchange: for every low slot selected by `mask`,
    /// order the pair (slot, slot + d) ascending.
    fn compare_exchange(&self, buf: u128, d: u32, mask: u128) -> u128 {
        let shift = d * self.f;
        let a = buf & mask;
        let b = (buf >> shift) & mask;
        let swap = self.wide_ge_fields(a, b) & mask;
        let lo = (a & !swap) | (b & swap);
        let hi = (b & !swap) | (a & swap);
        let touched = mask | (mask << shift);
        (buf & !touched) | lo | (hi << shift)
    }

    /// Sort the low `len` fields of a container ascending; empty slots become
    /// all-ones padding during the network and are cleared afterwards.
    fn sort_container(&self, buf: u128, len: u32) -> u128 {
        let pad = ((1u128 << (self.sort_slots * self.f)) - 1)
            & !((1u128 << (len * self.f)).wrapping_sub(1));
        let mut m = buf | pad;
        for &(d, mask) in &self.rounds {
            m = self.compare_exchange(m, d, mask);
        }
        m & ((1u128 << (len * self.f)).wrapping_sub(1))
    }

    /// Reverse the low `len` fields of a word into a container.
    fn reverse_fields(&self, w: u64, len: u32) -> u128 {
        let mut out = 0u128;
        for i in 0..len {
            out |= (self.slot_get(w, i) as u128) << ((len - 1 - i) * self.f);
        }
        out
    }

    /// Merge two sorted words into (lo, hi) with all fields of both, lo
    /// holding the smaller half. Batcher halver followed by a bitonic
    /// clean-up of each half.
    fn merge_words(&self, a: u64, la: u32, b: u64, lb: u32) -> (u64, u32, u64, u32) {
        let total = la + lb;
        if total <= self.cap {
            // Everything fits in one word; align b behind a and sort.
            let buf = (a as u128) | ((b as u128) << (la * self.f));
            let lo = self.sort_container(buf, total) as u64;
            return (lo, total, 0, 0);
        }
        let pad_a = {
            let used = ((1u128 << (self.cap * self.f)) - 1)
                & !((1u128 << (la * self.f)).wrapping_sub(1));
            (a as u128) | used
        };
        let rev_b = {
            let r = self.reverse_fields(b, lb);
            // Padding for b must sit *before* its fields after reversal, so
            // the concatenation stays ascending-then-descending.
            let pad = (1u128 << ((self.cap - lb) * self.f)) - 1;
            (r << ((self.cap - lb) * self.f)) | pad
        };
        let swap = self.wide_ge_fields(pad_a, rev_b);
        let lo_half = (pad_a & !swap) | (rev_b & swap);
        let hi_half = (rev_b & !swap) | (pad_a & swap);
        let lo = self.sort_container(lo_half, self.cap) as u64;
        let hi = self.sort_container(hi_half, self.cap) as u64;
        // Strip all-ones padding that survived into the high word.
        let hi_len = total - self.cap;
        let hi = hi & self.used_payload(hi_len);
        (lo, self.cap, hi, hi_len)
    }
}

/// Accumulates fields (or whole field groups) and emits full words; used to
/// repack streams without per-field loops on the fast paths.
struct FieldBuf {
    buf: u128,
    len: u32,
}

impl FieldBuf {
    fn new() -> FieldBuf {
        FieldBuf { buf: 0, len: 0 }
    }

    fn push_word(&mut self, c: &FieldCoding, w: u64, len: u32, out: &mut Vec<u64>) {
        debug_assert!(self.len < c.cap);
        self.buf |= (w as u128) << (self.len * c.f);
        self.len += len;
        while self.len >= c.cap {
            out.push((self.buf & ((1u128 << (c.cap * c.f)) - 1)) as u64);
            self.buf >>= c.cap * c.f;
            self.len -= c.cap;
        }
    }

    fn finish(self, c: &FieldCoding, out: &mut Vec<u64>) {
        if self.len > 0 {
            out.push(self.buf as u64);
        }
        let _ = c;
    }
}

impl PackedMatrix {
    /// Empty matrix.
    pub fn new() -> PackedMatrix {
        PackedMatrix::default()
    }

    /// Number of present entries.
    pub fn count(&self) -> usize {
        self.count
    }

    /// True if no entry is present.
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Number of storage words.
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// First word index whose last field is >= v, with the slot of the first
    /// field >= v inside it; (len, 0) past the end.
    fn locate_ge(&self, c: &FieldCoding, v: u64) -> (usize, u32) {
        let mut lo = 0usize;
        let mut hi = self.words.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            let w = self.words[mid];
            let len = c.word_len(w);
            let last = c.slot_get(w, len - 1);
            if last >= v {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if lo == self.words.len() {
            (lo, 0)
        } else {
            let w = self.words[lo];
            (lo, c.first_slot_ge(w, c.word_len(w), v))
        }
    }

    /// True if entry (k, l) is present.
    pub fn contains(&self, c: &FieldCoding, k: u32, l: u32, ops: &mut u64) -> bool {
        let v = c.enc(k, l);
        *ops += (self.words.len().max(1).ilog2() as u64).max(1);
        let (wi, _) = self.locate_ge(c, v);
        if wi == self.words.len() {
            return false;
        }
        let w = self.words[wi];
        let len = c.word_len(w);
        let ge = c.marks_ge(w, len, v);
        let gt = c.marks_gt(w, len, v);
        ge & !gt != 0
    }

    /// Insert entry (k, l); false if already present.
    pub fn insert(&mut self, c: &FieldCoding, k: u32, l: u32, ops: &mut u64) -> bool {
        let v = c.enc(k, l);
        *ops += 2;
        if self.words.is_empty() {
            self.words.push(v);
            self.count = 1;
            return true;
        }
        let (mut wi, _) = self.locate_ge(c, v);
        if wi == self.words.len() {
            wi -= 1;
        }
        let w = self.words[wi];
        let len = c.word_len(w);
        let ge = c.marks_ge(w, len, v);
        let gt = c.marks_gt(w, len, v);
        if ge & !gt != 0 {
            return false;
        }
        let slot = if ge == 0 { len } else { ge.trailing_zeros() / c.f };
        if len < c.cap {
            self.words[wi] = c.word_insert(w, len, slot, v);
        } else {
            // Full word: grow into a container, then split it in half.
            let wide = {
                let low = (w as u128) & ((1u128 << (slot * c.f)) - 1);
                let high = ((w as u128) >> (slot * c.f)) << ((slot + 1) * c.f);
                low | high | ((v as u128) << (slot * c.f))
            };
            let left_len = (c.cap + 1).div_ceil(2);
            let left = (wide & ((1u128 << (left_len * c.f)) - 1)) as u64;
            let right = (wide >> (left_len * c.f)) as u64;
            self.words[wi] = left;
            self.words.insert(wi + 1, right);
        }
        self.count += 1;
        true
    }

    /// Remove entry (k, l); false if absent.
    pub fn remove(&mut self, c: &FieldCoding, k: u32, l: u32, ops: &mut u64) -> bool {
        let v = c.enc(k, l);
        *ops += 2;
        let (wi, _) = self.locate_ge(c, v);
        if wi == self.words.len() {
            return false;
        }
        let w = self.words[wi];
        let len = c.word_len(w);
        let ge = c.marks_ge(w, len, v);
        let gt = c.marks_gt(w, len, v);
        let hit = ge & !gt;
        if hit == 0 {
            return false;
        }
        let slot = hit.trailing_zeros() / c.f;
        self.words[wi] = c.word_remove(w, slot);
        self.count -= 1;
        self.fix_fill(c, wi, ops);
        true
    }

    /// Restore the fill invariant around word `wi` after it may have shrunk.
    fn fix_fill(&mut self, c: &FieldCoding, wi: usize, ops: &mut u64) {
        if wi >= self.words.len() {
            return;
        }
        let len = c.word_len(self.words[wi]);
        if len == 0 {
            self.words.remove(wi);
            return;
        }
        if len >= c.min_fill || self.words.len() == 1 {
            return;
        }
        *ops += 2;
        let ni = if wi > 0 { wi - 1 } else { wi + 1 };
        let nw = self.words[ni];
        let nlen = c.word_len(nw);
        let (lo_i, a, la, b, lb) = if ni < wi {
            (ni, nw, nlen, self.words[wi], len)
        } else {
            (wi, self.words[wi], len, nw, nlen)
        };
        let combined = (a as u128) | ((b as u128) << (la * c.f));
        let total = la + lb;
        if total <= c.cap {
            // Merge into one word.
            self.words[lo_i] = combined as u64;
            self.words.remove(lo_i + 1);
        } else {
            // Split evenly; both halves reach the minimum fill.
            let left = total.div_ceil(2);
            self.words[lo_i] = (combined & ((1u128 << (left * c.f)) - 1)) as u64;
            self.words[lo_i + 1] = (combined >> (left * c.f)) as u64;
        }
    }

    /// First entry in row-major order.
    pub fn find_first(&self, c: &FieldCoding, ops: &mut u64) -> Option<(u32, u32)> {
        *ops += 1;
        let w = *self.words.first()?;
        Some(c.dec(c.slot_get(w, 0)))
    }

    /// First entry whose row lies in one of `row_ranges` (0-based, half-open)
    /// and whose column lies in `cols` (0-based, half-open). Scans only the
    /// words overlapping the row ranges.
    pub fn find_first_in(
        &self,
        c: &FieldCoding,
        row_ranges: &[(u32, u32)],
        cols: (u32, u32),
        ops: &mut u64,
    ) -> Option<(u32, u32)> {
        for &(r0, r1) in row_ranges {
            if r0 >= r1 {
                continue;
            }
            let v_lo = c.row_floor(r0 + 1);
            let v_hi = c.row_floor(r1 + 1);
            let (mut wi, mut slot) = self.locate_ge(c, v_lo);
            'range: while wi < self.words.len() {
                *ops += 1;
                let w = self.words[wi];
                let len = c.word_len(w);
                while slot < len {
                    let v = c.slot_get(w, slot);
                    if v >= v_hi {
                        break 'range;
                    }
                    let (k, l) = c.dec(v);
                    if l >= cols.0 && l < cols.1 {
                        return Some((k, l));
                    }
                    slot += 1;
                }
                wi += 1;
                slot = 0;
            }
        }
        None
    }

    /// All entries in row-major order.
    pub fn entries<'a>(&'a self, c: &'a FieldCoding) -> impl Iterator<Item = (u32, u32)> + 'a {
        self.words.iter().flat_map(move |&w| {
            let len = c.word_len(w);
            (0..len).map(move |i| c.dec(c.slot_get(w, i)))
        })
    }

    /// Build from entries already sorted in row-major order, distributing
    /// fields evenly over the minimum number of words.
    pub fn from_sorted_entries(c: &FieldCoding, entries: &[(u32, u32)]) -> PackedMatrix {
        let fields: Vec<u64> = entries.iter().map(|&(k, l)| c.enc(k, l)).collect();
        PackedMatrix {
            words: Self::distribute(c, &fields),
            count: fields.len(),
        }
    }

    /// Pack `fields` (sorted) into words of as-even-as-possible length; every
    /// word gets at least `min_fill` fields when there are two or more words.
    fn distribute(c: &FieldCoding, fields: &[u64]) -> Vec<u64> {
        let t = fields.len();
        if t == 0 {
            return Vec::new();
        }
        let nwords = t.div_ceil(c.cap as usize);
        let base = t / nwords;
        let extra = t % nwords;
        let mut out = Vec::with_capacity(nwords);
        let mut it = fields.iter();
        for i in 0..nwords {
            let take = base + usize::from(i < extra);
            let mut w = 0u64;
            for (slot, &v) in it.by_ref().take(take).enumerate() {
                w |= v << (slot as u32 * c.f);
            }
            out.push(w);
        }
        out
    }

    /// Replace words `w0..w1` by `fields` (sorted), restoring fill around the
    /// boundary.
    fn splice(&mut self, c: &FieldCoding, w0: usize, w1: usize, fields: &[u64], ops: &mut u64) {
        let removed: usize = self.words[w0..w1]
            .iter()
            .map(|&w| c.word_len(w) as usize)
            .sum();
        let new_words = Self::distribute(c, fields);
        let added = new_words.len();
        *ops += (w1 - w0 + added) as u64;
        self.words.splice(w0..w1, new_words);
        self.count = self.count + fields.len() - removed;
        // At most the first and last new words can be thin.
        if added > 0 {
            let last = w0 + added - 1;
            self.fix_fill(c, last, ops);
            self.fix_fill(c, w0, ops);
        } else if w0 < self.words.len() {
            self.fix_fill(c, w0, ops);
        } else if !self.words.is_empty() {
            let last = self.words.len() - 1;
            self.fix_fill(c, last, ops);
        }
        // A formerly single-word matrix may leave its one thin word just
        // outside the spliced range; repair both flanks.
        let right = w0 + added;
        if right < self.words.len() {
            self.fix_fill(c, right, ops);
        }
        if w0 > 0 && w0 - 1 < self.words.len() {
            self.fix_fill(c, w0 - 1, ops);
        }
    }

    /// Remove all entries with row in `r0..r1` (0-based).
    pub fn clear_row_range(&mut self, c: &FieldCoding, r0: u32, r1: u32, ops: &mut u64) {
        if r0 >= r1 || self.words.is_empty() {
            return;
        }
        let (wa, sa) = self.locate_ge(c, c.row_floor(r0 + 1));
        let (wb, sb) = self.locate_ge(c, c.row_floor(r1 + 1));
        if (wa, sa) == (wb, sb) {
            return;
        }
        let mut keep: Vec<u64> = Vec::new();
        if wa < self.words.len() {
            for i in 0..sa {
                keep.push(c.slot_get(self.words[wa], i));
            }
        }
        let end = if wb < self.words.len() {
            let w = self.words[wb];
            for i in sb..c.word_len(w) {
                keep.push(c.slot_get(w, i));
            }
            wb + 1
        } else {
            wb
        };
        self.splice(c, wa.min(self.words.len()), end, &keep, ops);
    }

    /// Add `delta` to the row index of every field at or after global
    /// position (wi, slot). Word-parallel masked add; order is preserved.
    fn add_row_delta_from(&mut self, c: &FieldCoding, wi: usize, slot: u32, delta: u64, ops: &mut u64) {
        if wi >= self.words.len() {
            return;
        }
        let add_all = c.rep1.wrapping_mul(delta << c.b);
        for (i, w) in self.words[wi..].iter_mut().enumerate() {
            *ops += 1;
            let len = c.word_len(*w);
            let mask = if i == 0 {
                c.used_payload(len) & !c.used_payload(slot)
            } else {
                c.used_payload(len)
            };
            *w = w.wrapping_add(add_all & mask);
        }
    }

    /// Subtract `delta` from the row index of every field at or after (wi,
    /// slot). Callers guarantee no row underflows.
    fn sub_row_delta_from(&mut self, c: &FieldCoding, wi: usize, slot: u32, delta: u64, ops: &mut u64) {
        if wi >= self.words.len() {
            return;
        }
        let sub = delta << c.b;
        for (i, w) in self.words[wi..].iter_mut().enumerate() {
            *ops += 1;
            let len = c.word_len(*w);
            let lo_slot = if i == 0 { slot } else { 0 };
            let mask = c.used_payload(len) & !c.used_payload(lo_slot);
            *w = w.wrapping_sub(c.rep1.wrapping_mul(sub) & mask);
        }
    }

    /// Insert a zero row at `k` (0-based): rows >= k shift down by one and
    /// the last row is discarded.
    pub fn insert_zero_row(&mut self, c: &FieldCoding, k: u32, ops: &mut u64) {
        // Drop entries of the last row first; they shift off the matrix.
        self.clear_row_range(c, c.h - 1, c.h, ops);
        let (wi, slot) = self.locate_ge(c, c.row_floor(k + 1));
        self.add_row_delta_from(c, wi, slot, 1, ops);
    }

    /// OR row `k+1` into row `k`, then shift rows >= k+2 up by one; the last
    /// row becomes empty.
    pub fn merge_rows(&mut self, c: &FieldCoding, k: u32, ops: &mut u64) {
        if self.words.is_empty() {
            return;
        }
        let (wa, sa) = self.locate_ge(c, c.row_floor(k + 1));
        let (wb, sb) = self.locate_ge(c, c.row_floor(k + 3));
        // Collect rows k and k+1, retargeting row k+1 onto row k, deduped.
        let mut row_a: Vec<u64> = Vec::new();
        let mut row_b: Vec<u64> = Vec::new();
        let boundary = c.row_floor(k + 2);
        let mut wi = wa;
        let mut slot = sa;
        while wi < self.words.len() && (wi, slot) < (wb, sb) {
            let w = self.words[wi];
            let len = c.word_len(w);
            if slot >= len {
                wi += 1;
                slot = 0;
                continue;
            }
            let v = c.slot_get(w, slot);
            if v < boundary {
                row_a.push(v);
            } else {
                row_b.push(v - (1 << c.b));
            }
            slot += 1;
        }
        // Fields kept verbatim: the boundary-word prefix before row k and the
        // boundary-word suffix past row k+1 (shifted later with its fellows).
        let mut fields: Vec<u64> = Vec::new();
        if wa < self.words.len() {
            for i in 0..sa {
                fields.push(c.slot_get(self.words[wa], i));
            }
        }
        let mut ia = 0;
        let mut ib = 0;
        while ia < row_a.len() || ib < row_b.len() {
            let next = match (row_a.get(ia), row_b.get(ib)) {
                (Some(&x), Some(&y)) if x == y => {
                    ia += 1;
                    ib += 1;
                    x
                }
                (Some(&x), Some(&y)) if x < y => {
                    ia += 1;
                    x
                }
                (Some(_), Some(&y)) => {
                    ib += 1;
                    y
                }
                (Some(&x), None) => {
                    ia += 1;
                    x
                }
                (None, Some(&y)) => {
                    ib += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            fields.push(next);
        }
        let end = if wb < self.words.len() {
            let w = self.words[wb];
            for i in sb..c.word_len(w) {
                fields.push(c.slot_get(w, i));
            }
            wb + 1
        } else {
            wb
        };
        self.splice(c, wa.min(self.words.len()), end, &fields, ops);
        // Now shift every remaining row >= k+2 up by one.
        let (wi, slot) = self.locate_ge(c, c.row_floor(k + 3));
        self.sub_row_delta_from(c, wi, slot, 1, ops);
    }

    /// Copy rows `a..b` of `src` over rows `target..target+(b-a)` of `self`.
    pub fn copy_row_interval(
        &mut self,
        c: &FieldCoding,
        src: &PackedMatrix,
        a: u32,
        b: u32,
        target: u32,
        ops: &mut u64,
    ) {
        assert!(a <= b && b <= c.h && target + (b - a) <= c.h);
        if a == b {
            return;
        }
        let (swa, ssa) = src.locate_ge(c, c.row_floor(a + 1));
        let (swb, ssb) = src.locate_ge(c, c.row_floor(b + 1));
        let mut fields: Vec<u64> = Vec::new();
        let mut wi = swa;
        let mut slot = ssa;
        while wi < src.words.len() && (wi, slot) < (swb, ssb) {
            *ops += 1;
            let w = src.words[wi];
            let len = c.word_len(w);
            while slot < len && (wi, slot) < (swb, ssb) {
                let v = src.words[wi];
                let v = c.slot_get(v, slot);
                let shifted = if target >= a {
                    v + (((target - a) as u64) << c.b)
                } else {
                    v - (((a - target) as u64) << c.b)
                };
                fields.push(shifted);
                slot += 1;
            }
            wi += 1;
            slot = 0;
        }
        // Replace the target row range of self with the shifted fields.
        let (twa, tsa) = self.locate_ge(c, c.row_floor(target + 1));
        let (twb, tsb) = self.locate_ge(c, c.row_floor(target + (b - a) + 1));
        let mut keep: Vec<u64> = Vec::new();
        if twa < self.words.len() {
            for i in 0..tsa {
                keep.push(c.slot_get(self.words[twa], i));
            }
        }
        let mut all = keep;
        all.extend_from_slice(&fields);
        let end = if twb < self.words.len() {
            let w = self.words[twb];
            for i in tsb..c.word_len(w) {
                all.push(c.slot_get(w, i));
            }
            twb + 1
        } else {
            twb
        };
        self.splice(c, twa.min(self.words.len()), end, &all, ops);
    }

    /// Transposed copy: swap row/column subfields word-parallel, sort each
    /// word with the in-word network, then merge sorted runs pairwise.
    pub fn transpose(&self, c: &FieldCoding, ops: &mut u64) -> PackedMatrix {
        if self.words.is_empty() {
            return PackedMatrix::new();
        }
        // Swap the two index subfields of every field at once.
        let mut swapped: Vec<(u64, u32)> = Vec::with_capacity(self.words.len());
        for &w in &self.words {
            *ops += 1;
            let len = c.word_len(w);
            let cols = w & c.col_rep;
            let rows = (w >> c.b) & c.col_rep;
            let sw = (cols << c.b) | rows;
            let sorted = c.sort_container(sw as u128, len) as u64;
            swapped.push((sorted, len));
        }
        // Split into maximal sorted runs of whole words.
        let mut runs: Vec<Vec<(u64, u32)>> = Vec::new();
        let mut cur: Vec<(u64, u32)> = Vec::new();
        for (w, len) in swapped {
            if let Some(&(pw, plen)) = cur.last() {
                if c.slot_get(pw, plen - 1) > c.slot_get(w, 0) {
                    runs.push(std::mem::take(&mut cur));
                }
            }
            cur.push((w, len));
        }
        runs.push(cur);
        // Normalize runs to full words so halver outputs stay full.
        let normalize = |run: Vec<(u64, u32)>| -> Vec<(u64, u32)> {
            let mut out_words = Vec::new();
            let mut buf = FieldBuf::new();
            for (w, len) in run {
                buf.push_word(c, w, len, &mut out_words);
            }
            buf.finish(c, &mut out_words);
            out_words
                .into_iter()
                .map(|w| (w, c.word_len(w)))
                .collect()
        };
        let mut runs: Vec<Vec<(u64, u32)>> = runs.into_iter().map(normalize).collect();
        // Pairwise merge rounds until a single run remains.
        while runs.len() > 1 {
            let mut next: Vec<Vec<(u64, u32)>> = Vec::with_capacity(runs.len().div_ceil(2));
            let mut it = runs.into_iter();
            while let Some(x) = it.next() {
                match it.next() {
                    None => next.push(x),
                    Some(y) => next.push(Self::merge_runs(c, x, y, ops)),
                }
            }
            runs = next;
        }
        let words: Vec<u64> = runs.pop().unwrap().into_iter().map(|(w, _)| w).collect();
        let mut out = PackedMatrix {
            words,
            count: self.count,
        };
        // Only the final word can be thin.
        if out.words.len() > 1 {
            let last = out.words.len() - 1;
            out.fix_fill(c, last, ops);
        }
        out
    }

    /// Merge two sorted full-word runs with the halver protocol: the low
    /// output is emitted, the high output becomes the head of the run whose
    /// consumed head had the larger last field. Output flows through an
    /// accumulator so every produced word except the final one is full.
    fn merge_runs(
        c: &FieldCoding,
        x: Vec<(u64, u32)>,
        y: Vec<(u64, u32)>,
        ops: &mut u64,
    ) -> Vec<(u64, u32)> {
        let mut words: Vec<u64> = Vec::with_capacity(x.len() + y.len());
        let mut buf = FieldBuf::new();
        let mut xi = x.into_iter();
        let mut yi = y.into_iter();
        let mut xh: Option<(u64, u32)> = xi.next();
        let mut yh: Option<(u64, u32)> = yi.next();
        loop {
            match (xh, yh) {
                (None, None) => break,
                (Some((w, len)), None) => {
                    buf.push_word(c, w, len, &mut words);
                    xh = xi.next();
                }
                (None, Some((w, len))) => {
                    buf.push_word(c, w, len, &mut words);
                    yh = yi.next();
                }
                (Some((aw, al)), Some((bw, bl))) => {
                    *ops += 2;
                    let (lo, ll, hi, hl) = c.merge_words(aw, al, bw, bl);
                    buf.push_word(c, lo, ll, &mut words);
                    if hl == 0 {
                        xh = xi.next();
                        yh = yi.next();
                        continue;
                    }
                    let a_last = c.slot_get(aw, al - 1);
                    let b_last = c.slot_get(bw, bl - 1);
                    if a_last <= b_last {
                        xh = xi.next();
                        yh = Some((hi, hl));
                    } else {
                        yh = yi.next();
                        xh = Some((hi, hl));
                    }
                }
            }
        }
        buf.finish(c, &mut words);
        words.into_iter().map(|w| (w, c.word_len(w))).collect()
    }

    /// Check structural invariants; returns a description of the first
    /// violation found.
    pub fn check(&self, c: &FieldCoding) -> Result<(), String> {
        let mut prev: Option<u64> = None;
        let mut total = 0usize;
        for (wi, &w) in self.words.iter().enumerate() {
            let len = c.word_len(w);
            if len == 0 {
                return Err(format!("word {wi} empty"));
            }
            if len < c.min_fill && self.words.len() > 1 {
                return Err(format!("word {wi} underfull: {len} < {}", c.min_fill));
            }
            if w & c.ctrl != 0 {
                return Err(format!("word {wi} has control bits set"));
            }
            if len < c.cap && (w >> (len * c.f)) != 0 {
                return Err(format!("word {wi} has junk above its fields"));
            }
            for i in 0..len {
                let v = c.slot_get(w, i);
                let (k, l) = c.dec(v);
                if k >= c.h || l >= c.h {
                    return Err(format!("word {wi} slot {i} out of range"));
                }
                if let Some(p) = prev {
                    if p >= v {
                        return Err(format!("word {wi} slot {i} not ascending"));
                    }
                }
                prev = Some(v);
                total += 1;
            }
        }
        if total != self.count {
            return Err(format!("count {} != stored {}", self.count, total));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeSet;

    fn entries_of(m: &PackedMatrix, c: &FieldCoding) -> Vec<(u32, u32)> {
        m.entries(c).collect()
    }

    #[test]
    fn coding_geometry() {
        let c = FieldCoding::new(64);
        assert_eq!((c.b, c.f, c.cap, c.min_fill), (7, 15, 4, 2));
        let c = FieldCoding::new(8);
        assert_eq!((c.b, c.f, c.cap, c.min_fill), (4, 9, 7, 4));
        let c = FieldCoding::new(4);
        assert_eq!((c.b, c.f, c.cap, c.min_fill), (3, 7, 9, 5));
    }

    #[test]
    fn carry_marks_match_worked_example() {
        // h = 8 gives 4-bit 1-based indices and 9-bit fields. Entries (0, 1)
        // and (2, 4) code as <1,2> = 1*16+2 = 18 and <3,5> = 3*16+5 = 53.
        let c = FieldCoding::new(8);
        assert_eq!(c.enc(0, 1), 18);
        assert_eq!(c.enc(2, 4), 53);
        let w = 18u64 | (53u64 << c.f);
        assert_eq!(c.word_len(w), 2);
        // Searching 53 adds 2^8 - 53 = 203 to every field: 18+203 = 221
        // stays below 256 (no carry), 53+203 = 256 carries into the control
        // bit, so exactly one field is marked.
        assert_eq!((1u64 << (c.f - 1)) - 53, 203);
        let ge = c.marks_ge(w, 2, 53);
        assert_eq!(ge, 1u64 << (c.f + c.f - 1));
        let gt = c.marks_gt(w, 2, 53);
        assert_eq!(gt, 0);
        // A word with a larger second field marks it as strictly greater.
        let w2 = 35u64 | (203u64 << c.f);
        assert_eq!(c.marks_ge(w2, 2, 203), 1u64 << (c.f + c.f - 1));
        assert_eq!(c.marks_gt(w2, 2, 35), 1u64 << (c.f + c.f - 1));
    }

    #[test]
    fn insert_remove_round_trip() {
        let c = FieldCoding::new(8);
        let mut m = PackedMatrix::new();
        let mut ops = 0;
        for k in 0..8 {
            for l in 0..8 {
                assert!(m.insert(&c, k, l, &mut ops));
                assert!(!m.insert(&c, k, l, &mut ops));
            }
        }
        assert_eq!(m.count(), 64);
        m.check(&c).unwrap();
        for k in 0..8 {
            for l in 0..8 {
                assert!(m.contains(&c, k, l, &mut ops));
            }
        }
        for k in (0..8).rev() {
            for l in 0..8 {
                assert!(m.remove(&c, k, l, &mut ops));
                assert!(!m.remove(&c, k, l, &mut ops));
                m.check(&c).unwrap();
            }
        }
        assert!(m.is_empty());
    }

    #[test]
    fn transpose_involution_and_sorting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for h in [4u32, 8, 64] {
            let c = FieldCoding::new(h);
            for _ in 0..200 {
                let mut m = PackedMatrix::new();
                let mut ops = 0;
                let mut set = BTreeSet::new();
                for _ in 0..rng.gen_range(0..3 * h) {
                    let k = rng.gen_range(0..h);
                    let l = rng.gen_range(0..h);
                    m.insert(&c, k, l, &mut ops);
                    set.insert((k, l));
                }
                let t = m.transpose(&c, &mut ops);
                t.check(&c).unwrap();
                let expect: Vec<(u32, u32)> = {
                    let mut v: Vec<_> = set.iter().map(|&(k, l)| (l, k)).collect();
                    v.sort();
                    v
                };
                assert_eq!(entries_of(&t, &c), expect, "h={h}");
                let back = t.transpose(&c, &mut ops);
                assert_eq!(entries_of(&back, &c), entries_of(&m, &c), "h={h}");
            }
        }
    }

    #[test]
    fn row_surgery_matches_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for h in [4u32, 8, 64] {
            let c = FieldCoding::new(h);
            for _ in 0..300 {
                let mut set: BTreeSet<(u32, u32)> = BTreeSet::new();
                let mut m = PackedMatrix::new();
                let mut ops = 0;
                for _ in 0..rng.gen_range(0..2 * h) {
                    let k = rng.gen_range(0..h);
                    let l = rng.gen_range(0..h);
                    if set.insert((k, l)) {
                        m.insert(&c, k, l, &mut ops);
                    }
                }
                match rng.gen_range(0..4) {
                    0 => {
                        let k = rng.gen_range(0..h);
                        m.insert_zero_row(&c, k, &mut ops);
                        set = set
                            .into_iter()
                            .filter(|&(r, _)| r != h - 1)
                            .map(|(r, l)| if r >= k { (r + 1, l) } else { (r, l) })
                            .collect();
                    }
                    1 => {
                        let k = rng.gen_range(0..h.max(2) - 1);
                        m.merge_rows(&c, k, &mut ops);
                        set = set
                            .into_iter()
                            .map(|(r, l)| match r {
                                r if r <= k => (r, l),
                                r if r == k + 1 => (k, l),
                                r => (r - 1, l),
                            })
                            .collect();
                    }
                    2 => {
                        let a = rng.gen_range(0..h);
                        let b = rng.gen_range(a..=h);
                        m.clear_row_range(&c, a, b, &mut ops);
                        set = set
                            .into_iter()
                            .filter(|&(r, _)| r < a || r >= b)
                            .collect();
                    }
                    _ => {
                        let a = rng.gen_range(0..h);
                        let b = rng.gen_range(a..=h);
                        let t = rng.gen_range(0..=h - (b - a));
                        let src = m.clone();
                        m.copy_row_interval(&c, &src, a, b, t, &mut ops);
                        let src_rows: BTreeSet<(u32, u32)> = set
                            .iter()
                            .filter(|&&(r, _)| r >= a && r < b)
                            .map(|&(r, l)| (r - a + t, l))
                            .collect();
                        set = set
                            .into_iter()
                            .filter(|&(r, _)| r < t || r >= t + (b - a))
                            .chain(src_rows)
                            .collect();
                    }
                }
                m.check(&c).unwrap_or_else(|e| panic!("h={h}: {e}"));
                let expect: Vec<(u32, u32)> = set.into_iter().collect();
                assert_eq!(entries_of(&m, &c), expect, "h={h}");
            }
        }
    }

    #[test]
    fn find_first_in_ranges() {
        let c = FieldCoding::new(8);
        let mut m = PackedMatrix::new();
        let mut ops = 0;
        m.insert(&c, 1, 5, &mut ops);
        m.insert(&c, 3, 2, &mut ops);
        m.insert(&c, 6, 7, &mut ops);
        assert_eq!(m.find_first(&c, &mut ops), Some((1, 5)));
        assert_eq!(m.find_first_in(&c, &[(2, 7)], (0, 8), &mut ops), Some((3, 2)));
        assert_eq!(m.find_first_in(&c, &[(2, 7)], (3, 8), &mut ops), Some((6, 7)));
        assert_eq!(m.find_first_in(&c, &[(0, 1), (4, 6)], (0, 8), &mut ops), None);
        assert_eq!(
            m.find_first_in(&c, &[(0, 2), (4, 8)], (4, 8), &mut ops),
            Some((1, 5))
        );
    }

    #[test]
    fn dense_worst_case_words_stay_legal() {
        let c = FieldCoding::new(64);
        let mut m = PackedMatrix::new();
        let mut ops = 0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut live: BTreeSet<(u32, u32)> = BTreeSet::new();
        for _ in 0..6000 {
            let k = rng.gen_range(0..64);
            let l = rng.gen_range(0..64);
            if rng.gen_bool(0.6) {
                assert_eq!(m.insert(&c, k, l, &mut ops), live.insert((k, l)));
            } else {
                assert_eq!(m.remove(&c, k, l, &mut ops), live.remove(&(k, l)));
            }
            m.check(&c).unwrap();
        }
        let expect: Vec<(u32, u32)> = live.into_iter().collect();
        assert_eq!(entries_of(&m, &c), expect);
    }
}
