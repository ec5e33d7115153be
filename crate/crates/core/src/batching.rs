use rand::seq::SliceRandom;
use rand::Rng;

/// Shuffled mini-batches of `0..n`. A trailing batch of one is folded into
/// the previous batch so batch statistics are always defined.
pub fn shuffled_batches<R: Rng>(n: usize, batch: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    chunk(order, batch)
}

/// In-order mini-batches with the same remainder rule.
pub fn sequential_batches(n: usize, batch: usize) -> Vec<Vec<usize>> {
    chunk((0..n).collect(), batch)
}

fn chunk(order: Vec<usize>, batch: usize) -> Vec<Vec<usize>> {
    let batch = batch.max(1);
    let mut out: Vec<Vec<usize>> = order.chunks(batch).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

/// Per-step seed for dropout masks, derived from the run seed.
pub fn step_seed(seed: u64, epoch: usize, step: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (step as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn remainder_of_one_is_merged() {
        assert_eq!(sequential_batches(5, 2), vec![vec![0, 1], vec![2, 3, 4]]);
        assert_eq!(sequential_batches(1, 4), vec![vec![0]]);
        assert_eq!(sequential_batches(6, 4), vec![vec![0, 1, 2, 3], vec![4, 5]]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let b = shuffled_batches(129, 64, &mut rng);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![64, 65]);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..129).collect::<Vec<_>>());
    }
}
