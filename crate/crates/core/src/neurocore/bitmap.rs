use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-length bit vector over a core's local neurons (bit `i` = local
/// neuron `i`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bitmap {
    len: usize,
    words: Vec<u64>,
}

impl Bitmap {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut b = Self::new(len);
        for i in indices {
            if i as usize >= len {
                return Err(Error::InvalidParameter(format!(
                    "bit {i} outside bitmap of length {len}"
                )));
            }
            b.set(i as usize);
        }
        Ok(b)
    }

    pub fn from_words(len: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            return Err(Error::Artifact(format!(
                "{} words cannot hold a {len}-bit map",
                words.len()
            )));
        }
        let b = Self { len, words };
        if b.words
            .last()
            .is_some_and(|&w| !len.is_multiple_of(64) && w >> (len % 64) != 0)
        {
            return Err(Error::Artifact("bits set past the end of a bitmap".into()));
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn byte_len(&self) -> usize {
        self.len.div_ceil(8)
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Bitwise AND. Panics if the lengths differ.
    pub fn and(&self, other: &Bitmap) -> Bitmap {
        assert_eq!(self.len, other.len, "bitmap length mismatch");
        Bitmap {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    /// Set bits in ascending order.
    pub fn iter_ones(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros();
                rest &= rest - 1;
                Some(wi as u32 * 64 + bit)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn and_of_small_maps() {
        // conn 1011b, act 0111b with bit i = neuron i
        let conn = Bitmap::from_indices(4, [0, 1, 3]).unwrap();
        let act = Bitmap::from_indices(4, [0, 1, 2]).unwrap();
        assert_eq!(conn.and(&act).iter_ones().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn word_validation() {
        assert!(Bitmap::from_words(65, vec![0, 1]).is_ok());
        assert!(Bitmap::from_words(65, vec![0, 2]).is_err());
        assert!(Bitmap::from_words(64, vec![0, 0]).is_err());
        assert!(Bitmap::from_indices(3, [3]).is_err());
    }

    proptest! {
        #[test]
        fn and_matches_set_intersection(
            a in proptest::collection::btree_set(0u32..200, 0..80),
            b in proptest::collection::btree_set(0u32..200, 0..80),
        ) {
            let x = Bitmap::from_indices(200, a.iter().copied()).unwrap();
            let y = Bitmap::from_indices(200, b.iter().copied()).unwrap();
            let got: Vec<u32> = x.and(&y).iter_ones().collect();
            let want: Vec<u32> = a.intersection(&b).copied().collect();
            prop_assert_eq!(got, want);
            prop_assert_eq!(x.count_ones(), a.len());
        }
    }
}
