use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::Tensor;

/// Glorot-uniform `rows × cols` matrix.
pub fn glorot_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..=limit))
        .collect();
    Tensor::matrix(rows, cols, data).expect("consistent shape")
}

/// Random `n × n` orthogonal matrix (Gram-Schmidt on a Gaussian draw).
pub fn orthogonal<R: Rng>(rng: &mut R, n: usize) -> Tensor {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let mut ok = true;
        for i in 0..n {
            for j in 0..i {
                let (head, tail) = rows.split_at_mut(i);
                let proj: f64 = tail[0].iter().zip(&head[j]).map(|(a, b)| a * b).sum();
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= proj * b;
                }
            }
            let norm = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            rows[i].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            return Tensor::matrix(n, n, rows.concat()).expect("square");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = orthogonal(&mut rng, 6);
        for i in 0..6 {
            for j in 0..6 {
                let d: f64 = q.row_slice(i).iter().zip(q.row_slice(j)).map(|(a, b)| a * b).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((d - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn glorot_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = glorot_uniform(&mut rng, 10, 20, 20, 10);
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= limit));
    }
}
