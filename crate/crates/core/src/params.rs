//! Structure parameters: word size, chunk mass target, superchunk arity,
//! and the superchunk id universe.
//!
//! All sizes are derived from the declared edge capacity `mhat` and the word
//! size `w`. Tests may override `k` and `h` to force small structures.

use crate::error::Error;

/// Which representation chunk-adjacency matrices use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoding {
    /// One h*h bit matrix per word, h*h <= w.
    Dense,
    /// Sorted lists of bit positions packed into words, h = w.
    Packed,
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Encoding::Dense => write!(f, "dense"),
            Encoding::Packed => write!(f, "packed"),
        }
    }
}

/// Tuning knobs resolved at construction time and fixed thereafter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    /// Number of vertices.
    pub n: u32,
    /// Maximum number of live edges at any time.
    pub mhat: usize,
    /// Word size in bits (64 unless overridden for testing).
    pub w: u32,
    /// Superchunk arity: superchunks hold h/2 ..= h-1 chunks.
    pub h: u32,
    /// Chunk mass target: chunk masses stay within k ..= 3k.
    pub k: u32,
    /// Size of the superchunk id universe.
    pub j: u32,
    /// Matrix representation.
    pub encoding: Encoding,
}

/// Optional overrides applied on top of the derived defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub k: Option<u32>,
    pub h: Option<u32>,
    pub word_bits: Option<u32>,
}

/// Smallest integer r with r*r >= x.
fn ceil_sqrt(x: f64) -> u32 {
    if x <= 1.0 {
        return 1;
    }
    let mut r = x.sqrt().floor() as u32;
    while ((r as f64) * (r as f64)) < x {
        r += 1;
    }
    while r > 1 && (((r - 1) as f64) * ((r - 1) as f64)) >= x {
        r -= 1;
    }
    r
}

impl Params {
    /// Derive parameters for `n` vertices and capacity `mhat` under the given
    /// encoding, applying any overrides, and validate the result.
    pub fn new(
        n: u32,
        mhat: usize,
        encoding: Encoding,
        ov: Overrides,
    ) -> Result<Params, Error> {
        if n == 0 {
            return Err(Error::InvalidParams("n must be at least 1".into()));
        }
        if mhat == 0 {
            return Err(Error::InvalidParams("mhat must be at least 1".into()));
        }
        let w = ov.word_bits.unwrap_or(64);
        if !(8..=64).contains(&w) {
            return Err(Error::InvalidParams(format!(
                "word size {w} outside supported range 8..=64"
            )));
        }
        let h = match ov.h {
            Some(h) => h,
            None => match encoding {
                // Largest even h with h*h <= w.
                Encoding::Dense => 2 * (isqrt(w) / 2),
                Encoding::Packed => w,
            },
        };
        let k = match ov.k {
            Some(k) => k,
            None => {
                let kw = match encoding {
                    Encoding::Dense => (mhat as f64) / (w as f64).sqrt(),
                    Encoding::Packed => (mhat as f64) / ((w as f64) * (w as f64).log2()),
                };
                ceil_sqrt(kw).max(2)
            }
        };
        let p = Params {
            n,
            mhat,
            w,
            h,
            k,
            j: 0,
            encoding,
        };
        p.finish()
    }

    fn finish(mut self) -> Result<Params, Error> {
        let Params { w, h, k, .. } = self;
        if h < 4 || h % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "h = {h} must be even and at least 4"
            )));
        }
        if self.encoding == Encoding::Dense && h * h > w {
            return Err(Error::InvalidParams(format!(
                "dense encoding requires h*h <= w, got h = {h}, w = {w}"
            )));
        }
        if h > w {
            return Err(Error::InvalidParams(format!(
                "h = {h} exceeds word size {w}"
            )));
        }
        if k < 2 {
            return Err(Error::InvalidParams(format!("k = {k} must be at least 2")));
        }
        let j = (4 * self.mhat).div_ceil((k as usize) * (h as usize)).max(1);
        if j > u32::MAX as usize {
            return Err(Error::InvalidParams("id universe too large".into()));
        }
        self.j = j as u32;
        Ok(self)
    }

    /// A tour with fewer than this many chunks is short: it forms a single
    /// superchunk with no id.
    pub fn short_threshold(&self) -> u32 {
        self.h / 2
    }

    /// Number of words needed for one id-indexed bit vector.
    pub fn id_words(&self) -> usize {
        (self.j as usize).div_ceil(64)
    }
}

fn isqrt(x: u32) -> u32 {
    let mut r = (x as f64).sqrt() as u32;
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    while r * r > x {
        r -= 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_defaults_at_w64() {
        let p = Params::new(100, 1000, Encoding::Dense, Overrides::default()).unwrap();
        assert_eq!(p.w, 64);
        assert_eq!(p.h, 8);
        // ceil(sqrt(1000 / 8)) = ceil(11.18) = 12
        assert_eq!(p.k, 12);
        // ceil(4000 / 96) = 42
        assert_eq!(p.j, 42);
    }

    #[test]
    fn packed_defaults_at_w64() {
        let p = Params::new(100, 1000, Encoding::Packed, Overrides::default()).unwrap();
        assert_eq!(p.h, 64);
        // ceil(sqrt(1000 / 384)) = ceil(1.61) = 2
        assert_eq!(p.k, 2);
        assert_eq!(p.j, (4usize * 1000).div_ceil(2 * 64) as u32);
    }

    #[test]
    fn forced_small_params() {
        let p = Params::new(
            64,
            256,
            Encoding::Dense,
            Overrides {
                k: Some(4),
                h: Some(4),
                word_bits: None,
            },
        )
        .unwrap();
        assert_eq!(p.k, 4);
        assert_eq!(p.h, 4);
        assert_eq!(p.j, 64);
        assert_eq!(p.short_threshold(), 2);
    }

    #[test]
    fn rejects_odd_or_oversized_h() {
        assert!(Params::new(
            4,
            16,
            Encoding::Dense,
            Overrides {
                h: Some(5),
                ..Default::default()
            }
        )
        .is_err());
        assert!(Params::new(
            4,
            16,
            Encoding::Dense,
            Overrides {
                h: Some(10),
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn rejects_tiny_k() {
        assert!(Params::new(
            4,
            16,
            Encoding::Dense,
            Overrides {
                k: Some(1),
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn word_bits_override_shrinks_h() {
        let p = Params::new(
            16,
            64,
            Encoding::Dense,
            Overrides {
                word_bits: Some(16),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(p.h, 4);
        assert!(p.h * p.h <= 16);
    }
}
