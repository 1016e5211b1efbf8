use std::fmt;

use crate::error::{Error, Result};

/// Largest feature count a [`Coalition`] bitmask can hold.
pub const MAX_FEATURES: usize = 64;

/// Above this size Shapley weights are computed through log-factorials.
const LOG_WEIGHT_THRESHOLD: usize = 20;

/// A subset of feature indices stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    pub fn full(d: usize) -> Self {
        assert!(d <= MAX_FEATURES, "coalitions hold at most {MAX_FEATURES} features");
        if d == MAX_FEATURES {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << d) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().fold(Coalition::EMPTY, |c, i| c.with(i))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_FEATURES && self.0 & (1 << i) != 0
    }

    #[must_use]
    pub fn with(self, i: usize) -> Self {
        Coalition(self.0 | (1 << i))
    }

    #[must_use]
    pub fn without(self, i: usize) -> Self {
        Coalition(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// `[d] \ S`.
    #[must_use]
    pub fn complement(self, d: usize) -> Self {
        Coalition(!self.0 & Coalition::full(d).0)
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// Errors when the coalition names a feature `>= d`.
    pub fn check_within(self, d: usize) -> Result<()> {
        if self.is_subset_of(Coalition::full(d)) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "coalition {self} references a feature outside 0..{d}"
            )))
        }
    }

    /// Bit string in feature order, e.g. `"101"` for `{0, 2}` with `d = 3`.
    pub fn to_bitstring(self, d: usize) -> String {
        (0..d)
            .map(|i| if self.contains(i) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Shapley coefficient `|S|! (d - |S| - 1)! / d!` for a coalition of size `s_size`.
pub fn shapley_weight(s_size: usize, d: usize) -> Result<f64> {
    if d == 0 || s_size >= d {
        return Err(Error::Domain(format!(
            "shapley weight needs 0 <= |S| < d, got |S| = {s_size}, d = {d}"
        )));
    }
    if d > LOG_WEIGHT_THRESHOLD {
        use statrs::function::factorial::ln_factorial;
        let ln = ln_factorial(s_size as u64) + ln_factorial((d - s_size - 1) as u64)
            - ln_factorial(d as u64);
        return Ok(ln.exp());
    }
    // 1 / (d * C(d-1, s)), with the binomial built up exactly in f64.
    let k = s_size.min(d - 1 - s_size);
    let mut binom = 1.0f64;
    for j in 0..k {
        binom = binom * ((d - 1 - j) as f64) / ((j + 1) as f64);
    }
    Ok(1.0 / (d as f64 * binom.round()))
}

/// All Shapley weights for one feature count, indexed by coalition size.
pub fn shapley_weights(d: usize) -> Result<Vec<f64>> {
    (0..d).map(|s| shapley_weight(s, d)).collect()
}
