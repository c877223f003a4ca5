//! Deterministic fan-out of independent per-index work.
//!
//! Callers hand over a total count and a closure from index to value; the
//! results come back ordered by index no matter how many workers ran.
//! Determinism therefore rests entirely on the closure seeding any
//! randomness from the index it receives, never from worker identity.

use std::sync::atomic::{AtomicUsize, Ordering};

static MAX_THREADS: AtomicUsize = AtomicUsize::new(1);

/// Caps how many worker threads [`map_indexed`] may use. A cap of 0 is
/// treated as 1; the process default is single-threaded.
pub fn set_max_threads(threads: usize) {
    MAX_THREADS.store(threads.max(1), Ordering::Relaxed);
}

pub fn max_threads() -> usize {
    MAX_THREADS.load(Ordering::Relaxed)
}

/// Evaluates `work(i)` for every `i < count` and returns the results in
/// index order. Runs on the caller's thread until the configured cap
/// allows more; work items are striped over workers by index.
pub fn map_indexed<T, F>(count: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = max_threads().min(count.max(1));
    if threads <= 1 {
        return (0..count).map(&work).collect();
    }

    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let chunk = count.div_ceil(threads);
    std::thread::scope(|scope| {
        for (worker, bands) in slots.chunks_mut(chunk).enumerate() {
            let work = &work;
            scope.spawn(move || {
                let base = worker * chunk;
                for (offset, slot) in bands.iter_mut().enumerate() {
                    *slot = Some(work(base + offset));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("every index was filled by exactly one worker"))
        .collect()
}
