use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shuffled index batches for one epoch. The order depends only on
/// `(seed, epoch)`; the last batch may be short.
pub fn batch_indices(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub fn batches<T>(items: &[T], batch_size: usize, seed: u64, epoch: u64) -> impl Iterator<Item = Vec<&T>> {
    batch_indices(items.len(), batch_size, seed, epoch)
        .into_iter()
        .map(move |b| b.into_iter().map(|i| &items[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let sizes: Vec<_> = batch_indices(10, 4, 0, 0).iter().map(Vec::len).collect();
        assert_eq!(sizes, [4, 4, 2]);
    }

    #[test]
    fn batch_of_one_follows_shuffle() {
        let singles: Vec<usize> = batch_indices(6, 1, 9, 0).into_iter().flatten().collect();
        let whole = batch_indices(6, 6, 9, 0).remove(0);
        assert_eq!(singles, whole);
    }

    #[test]
    fn epochs_reorder_same_multiset() {
        let items: Vec<u32> = (0..50).collect();
        let e0: Vec<u32> = batches(&items, 8, 1, 0).flatten().copied().collect();
        let e1: Vec<u32> = batches(&items, 8, 1, 1).flatten().copied().collect();
        assert_ne!(e0, e1);
        let (mut a, mut b) = (e0.clone(), e1.clone());
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(e0, batches(&items, 8, 1, 0).flatten().copied().collect::<Vec<_>>());
    }
}
