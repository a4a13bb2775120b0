//! Ordered fan-out over a fixed set of worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Apply `f` to every item using at most `workers` threads, returning the
/// results in input order no matter in which order they complete.
pub fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, item)| f(i, item)).collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = f(i, &items[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn output_order_matches_input_order_despite_completion_order() {
        // earlier items sleep longer, so they finish last
        let items: Vec<u64> = (0..16).collect();
        let out = map_ordered(&items, 8, |i, &x| {
            std::thread::sleep(Duration::from_millis(16 - i as u64));
            x * 10
        });
        assert_eq!(out, (0..16).map(|x| x * 10).collect::<Vec<_>>());
    }

    #[test]
    fn empty_input_yields_empty_output() {
        let items: Vec<u8> = vec![];
        let out: Vec<u8> = map_ordered(&items, 4, |_, &x| x);
        assert!(out.is_empty());
    }

    #[test]
    fn single_worker_is_sequential() {
        let items = vec![1, 2, 3];
        let out = map_ordered(&items, 1, |i, &x| x + i);
        assert_eq!(out, vec![1, 3, 5]);
    }
}
