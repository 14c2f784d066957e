use std::fmt;

use xxhash_rust::xxh3::xxh3_64;

/// A stream item, identified by the 64-bit hash of its opaque byte key.
///
/// All sketches, oracles and the exact counter operate on these hashed
/// identifiers; the original bytes are never retained.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemKey(u64);

impl ItemKey {
    pub fn from_bytes(bytes: &[u8]) -> Self {
        ItemKey(xxh3_64(bytes))
    }

    /// Wraps an already-hashed identifier.
    pub const fn from_raw(raw: u64) -> Self {
        ItemKey(raw)
    }

    pub const fn raw(self) -> u64 {
        self.0
    }
}

impl From<&str> for ItemKey {
    fn from(s: &str) -> Self {
        ItemKey::from_bytes(s.as_bytes())
    }
}

impl From<&[u8]> for ItemKey {
    fn from(b: &[u8]) -> Self {
        ItemKey::from_bytes(b)
    }
}

impl fmt::Debug for ItemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ItemKey({:016x})", self.0)
    }
}
