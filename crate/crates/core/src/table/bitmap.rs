// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! LSB-first packed bit vector used for validity masks and boolean values.

use crate::error::{Error, Result};

/// Packed bits, least significant bit first within each byte.
///
/// Invariant: `bytes.len() == ceil(len / 8)` and every bit at position
/// `>= len` in the final byte is zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Bitmap {
    bytes: Vec<u8>,
    len: usize,
}

#[inline]
pub(crate) fn byte_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

impl Bitmap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(byte_len(bits)),
            len: 0,
        }
    }

    /// A bitmap of `len` set bits.
    pub fn all_set(len: usize) -> Self {
        let mut bytes = vec![0xFFu8; byte_len(len)];
        let rem = len % 8;
        if rem != 0 {
            if let Some(last) = bytes.last_mut() {
                *last = (1u8 << rem) - 1;
            }
        }
        Self { bytes, len }
    }

    pub fn all_unset(len: usize) -> Self {
        Self {
            bytes: vec![0u8; byte_len(len)],
            len,
        }
    }

    /// Wraps packed bytes, rejecting a wrong byte count or dirty trailing bits.
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != byte_len(len) {
            return Err(Error::corrupt(format!(
                "bitmap of {len} bits needs {} bytes, got {}",
                byte_len(len),
                bytes.len()
            )));
        }
        let rem = len % 8;
        if rem != 0 && bytes[bytes.len() - 1] >> rem != 0 {
            return Err(Error::corrupt("bitmap has set bits beyond its length"));
        }
        Ok(Self { bytes, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.bytes[i >> 3] & (1 << (i & 7)) != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u8 << (i & 7);
        if v {
            self.bytes[i >> 3] |= mask;
        } else {
            self.bytes[i >> 3] &= !mask;
        }
    }

    #[inline]
    pub fn push(&mut self, v: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if v {
            self.bytes[self.len >> 3] |= 1 << (self.len & 7);
        }
        self.len += 1;
    }

    pub fn count_set(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn all(&self) -> bool {
        self.count_set() == self.len
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn extend_from(&mut self, other: &Bitmap) {
        for v in other.iter() {
            self.push(v);
        }
    }
}

impl Extend<bool> for Bitmap {
    fn extend<I: IntoIterator<Item = bool>>(&mut self, iter: I) {
        for v in iter {
            self.push(v);
        }
    }
}

impl FromIterator<bool> for Bitmap {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let iter = iter.into_iter();
        let mut b = Bitmap::with_capacity(iter.size_hint().0);
        for v in iter {
            b.push(v);
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lsb_first_packing() {
        let b: Bitmap = [true, false, true].into_iter().collect();
        assert_eq!(b.as_bytes(), &[0b0000_0101]);
        assert_eq!(Bitmap::all_set(3).as_bytes(), &[0x07]);
        assert_eq!(Bitmap::all_set(8).as_bytes(), &[0xFF]);
        assert_eq!(Bitmap::all_set(9).as_bytes(), &[0xFF, 0x01]);
        assert!(Bitmap::all_set(0).as_bytes().is_empty());
    }

    #[test]
    fn rejects_dirty_tail() {
        assert!(Bitmap::from_bytes(vec![0x08], 3).is_err());
        assert!(Bitmap::from_bytes(vec![0x07, 0x00], 3).is_err());
        assert!(Bitmap::from_bytes(vec![0x07], 3).is_ok());
    }

    #[test]
    fn set_and_count() {
        let mut b = Bitmap::all_unset(20);
        b.set(0, true);
        b.set(19, true);
        assert_eq!(b.count_set(), 2);
        b.set(0, false);
        assert!(!b.get(0));
        assert!(b.get(19));
    }
}
