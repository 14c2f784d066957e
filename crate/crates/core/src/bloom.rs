use crate::error::{Error, Result};
use crate::item::ItemKey;

/// Bit-array Bloom filter over hashed item keys, flushable in place.
///
/// Probe positions use double hashing `h1 + i * h2 (mod m)` derived from the
/// 64-bit item hash.
#[derive(Clone, Debug)]
pub struct BloomFilter {
    words: Vec<u64>,
    bits: u64,
    hashes: u32,
    inserted: u64,
}

impl BloomFilter {
    pub fn new(bits: u64, hashes: u32) -> Result<Self> {
        if bits < 8 {
            return Err(Error::invalid(format!(
                "bloom filter needs at least 8 bits, got {bits}"
            )));
        }
        if !(1..=16).contains(&hashes) {
            return Err(Error::invalid(format!(
                "bloom filter hash count must lie in 1..=16, got {hashes}"
            )));
        }
        Ok(BloomFilter {
            words: vec![0; bits.div_ceil(64) as usize],
            bits,
            hashes,
            inserted: 0,
        })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn hashes(&self) -> u32 {
        self.hashes
    }

    /// Keys added since the last flush.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn add(&mut self, item: ItemKey) {
        for bit in self.probes(item) {
            self.words[(bit / 64) as usize] |= 1 << (bit % 64);
        }
        self.inserted += 1;
    }

    pub fn contains(&self, item: ItemKey) -> bool {
        self.probes(item)
            .all(|bit| self.words[(bit / 64) as usize] & (1 << (bit % 64)) != 0)
    }

    pub fn flush(&mut self) {
        self.words.fill(0);
        self.inserted = 0;
    }

    /// Storage charged by memory accounting.
    pub fn memory_bytes(&self) -> u64 {
        self.bits.div_ceil(8)
    }

    fn probes(&self, item: ItemKey) -> impl Iterator<Item = u64> {
        let raw = item.raw();
        let h1 = raw;
        // Second hash from a multiplicative remix; forced odd so that the
        // probe sequence does not collapse when m is a power of two.
        let h2 = (raw ^ (raw >> 29))
            .wrapping_mul(0xbf58_476d_1ce4_e5b9)
            .rotate_left(31)
            | 1;
        let m = self.bits;
        (0..self.hashes as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % m)
    }
}
