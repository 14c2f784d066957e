//! Space-Saving counter summary with constant-time updates.
//!
//! Counters are grouped into buckets of equal count, and the buckets form a
//! doubly linked list ordered by count (the "stream summary" layout). An
//! insert only ever raises one counter by one, so it moves that counter to
//! the neighbouring bucket, and the minimum is always the list head.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::item::ItemKey;

const NIL: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Counter {
    item: ItemKey,
    bucket: u32,
    /// Position of this counter inside `buckets[bucket].members`.
    slot: u32,
}

#[derive(Clone, Debug)]
struct Bucket {
    count: u64,
    members: Vec<u32>,
    prev: u32,
    next: u32,
}

/// A Space-Saving sketch over at most `capacity` counters.
///
/// For every item `x` and `n` inserts since the last flush, `query(x)` lies
/// in `[f_x, f_x + n / capacity]`, and the counters always sum to `n`.
#[derive(Clone, Debug)]
pub struct SpaceSaving {
    capacity: usize,
    counters: Vec<Counter>,
    index: FxHashMap<ItemKey, u32>,
    buckets: Vec<Bucket>,
    free_buckets: Vec<u32>,
    min_bucket: u32,
    inserted: u64,
}

impl SpaceSaving {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("space-saving capacity must be at least 1"));
        }
        if capacity >= NIL as usize {
            return Err(Error::invalid("space-saving capacity too large"));
        }
        Ok(SpaceSaving {
            capacity,
            counters: Vec::with_capacity(capacity),
            index: FxHashMap::with_capacity_and_hasher(capacity, Default::default()),
            buckets: Vec::new(),
            free_buckets: Vec::new(),
            min_bucket: NIL,
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of monitored items.
    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }

    /// Inserts since the last flush.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Smallest counter value, or 0 when nothing is monitored.
    pub fn min_count(&self) -> u64 {
        if self.min_bucket == NIL {
            0
        } else {
            self.buckets[self.min_bucket as usize].count
        }
    }

    /// Records one arrival of `item` and returns its counter value afterwards.
    pub fn insert(&mut self, item: ItemKey) -> u64 {
        self.inserted += 1;
        if let Some(&c) = self.index.get(&item) {
            return self.increment(c);
        }
        if self.counters.len() < self.capacity {
            let c = self.counters.len() as u32;
            self.counters.push(Counter {
                item,
                bucket: NIL,
                slot: 0,
            });
            self.index.insert(item, c);
            let head = self.min_bucket;
            let bucket = if head != NIL && self.buckets[head as usize].count == 1 {
                head
            } else {
                let b = self.alloc_bucket(1);
                self.link_after(NIL, b);
                b
            };
            self.attach(c, bucket);
            return 1;
        }
        // Full: take over a counter from the minimum bucket.
        let min = self.min_bucket as usize;
        let c = *self.buckets[min]
            .members
            .last()
            .expect("buckets in the list are never empty");
        let evicted = std::mem::replace(&mut self.counters[c as usize].item, item);
        self.index.remove(&evicted);
        self.index.insert(item, c);
        self.increment(c)
    }

    /// Upper estimate of `item`'s count since the last flush.
    ///
    /// Unmonitored items report the minimum counter once the sketch is full,
    /// and 0 before that: nothing has been evicted yet, and the minimum of a
    /// partly filled sketch can exceed `n / k`.
    pub fn query(&self, item: ItemKey) -> u64 {
        match self.index.get(&item) {
            Some(&c) => self.buckets[self.counters[c as usize].bucket as usize].count,
            None if self.counters.len() < self.capacity => 0,
            None => self.min_count(),
        }
    }

    pub fn contains(&self, item: ItemKey) -> bool {
        self.index.contains_key(&item)
    }

    /// Drops every counter; the sketch is reusable afterwards.
    pub fn flush(&mut self) {
        self.counters.clear();
        self.index.clear();
        self.free_buckets.clear();
        for (i, b) in self.buckets.iter_mut().enumerate() {
            b.members.clear();
            self.free_buckets.push(i as u32);
        }
        self.min_bucket = NIL;
        self.inserted = 0;
    }

    /// Monitored items and their counts, in no particular order.
    pub fn iter(&self) -> impl Iterator<Item = (ItemKey, u64)> + '_ {
        self.counters
            .iter()
            .map(|c| (c.item, self.buckets[c.bucket as usize].count))
    }

    fn increment(&mut self, c: u32) -> u64 {
        let from = self.counters[c as usize].bucket;
        let count = self.buckets[from as usize].count + 1;
        let next = self.buckets[from as usize].next;
        let to = if next != NIL && self.buckets[next as usize].count == count {
            next
        } else {
            let b = self.alloc_bucket(count);
            self.link_after(from, b);
            b
        };
        self.detach(c);
        self.attach(c, to);
        count
    }

    fn attach(&mut self, c: u32, bucket: u32) {
        let members = &mut self.buckets[bucket as usize].members;
        let counter = &mut self.counters[c as usize];
        counter.bucket = bucket;
        counter.slot = members.len() as u32;
        members.push(c);
    }

    /// Removes `c` from its bucket, releasing the bucket if it empties.
    fn detach(&mut self, c: u32) {
        let Counter { bucket, slot, .. } = self.counters[c as usize];
        let members = &mut self.buckets[bucket as usize].members;
        members.swap_remove(slot as usize);
        if let Some(&moved) = members.get(slot as usize) {
            self.counters[moved as usize].slot = slot;
        }
        if members.is_empty() {
            self.unlink(bucket);
            self.free_buckets.push(bucket);
        }
    }

    fn alloc_bucket(&mut self, count: u64) -> u32 {
        let fresh = Bucket {
            count,
            members: Vec::new(),
            prev: NIL,
            next: NIL,
        };
        match self.free_buckets.pop() {
            Some(b) => {
                let slot = &mut self.buckets[b as usize];
                slot.count = count;
                slot.prev = NIL;
                slot.next = NIL;
                b
            }
            None => {
                self.buckets.push(fresh);
                (self.buckets.len() - 1) as u32
            }
        }
    }

    /// Links `b` after `at`, or at the head when `at` is NIL.
    fn link_after(&mut self, at: u32, b: u32) {
        let next = if at == NIL {
            self.min_bucket
        } else {
            self.buckets[at as usize].next
        };
        self.buckets[b as usize].prev = at;
        self.buckets[b as usize].next = next;
        if next != NIL {
            self.buckets[next as usize].prev = b;
        }
        if at == NIL {
            self.min_bucket = b;
        } else {
            self.buckets[at as usize].next = b;
        }
    }

    fn unlink(&mut self, b: u32) {
        let Bucket { prev, next, .. } = self.buckets[b as usize];
        if prev == NIL {
            self.min_bucket = next;
        } else {
            self.buckets[prev as usize].next = next;
        }
        if next != NIL {
            self.buckets[next as usize].prev = prev;
        }
    }

    #[cfg(test)]
    fn check_structure(&self) {
        let mut seen = 0usize;
        let mut prev = NIL;
        let mut last_count = 0;
        let mut b = self.min_bucket;
        while b != NIL {
            let bucket = &self.buckets[b as usize];
            assert_eq!(bucket.prev, prev);
            assert!(bucket.count > last_count, "bucket counts strictly increase");
            assert!(!bucket.members.is_empty());
            for (slot, &c) in bucket.members.iter().enumerate() {
                assert_eq!(self.counters[c as usize].bucket, b);
                assert_eq!(self.counters[c as usize].slot as usize, slot);
            }
            seen += bucket.members.len();
            last_count = bucket.count;
            prev = b;
            b = bucket.next;
        }
        assert_eq!(seen, self.counters.len());
        assert_eq!(self.index.len(), self.counters.len());
    }
}
