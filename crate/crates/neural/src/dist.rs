//! Masked categorical distributions and attention weights on plain slices.

use rand::Rng;

use crate::error::NeuralError;

/// Categorical distribution over the unmasked entries of `logits`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCategorical {
    probs: Vec<f64>,
    log_norm: f64,
    logits: Vec<f64>,
}

impl MaskedCategorical {
    pub fn new(logits: &[f64], mask: &[bool]) -> Result<Self, NeuralError> {
        if logits.len() != mask.len() {
            return Err(NeuralError::Shape(format!(
                "{} logits but {} mask entries",
                logits.len(),
                mask.len()
            )));
        }
        let max = logits
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&z, _)| z)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(NeuralError::AllMasked);
        }
        let mut probs: Vec<f64> = logits
            .iter()
            .zip(mask)
            .map(|(&z, &m)| if m { (z - max).exp() } else { 0.0 })
            .collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self {
            probs,
            log_norm: max + total.ln(),
            logits: logits.to_vec(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `-inf` for masked categories.
    pub fn log_prob(&self, i: usize) -> f64 {
        if self.probs[i] == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.logits[i] - self.log_norm
        }
    }

    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| -p * self.log_prob(i))
            .sum()
    }

    /// Most likely category; ties go to the lower index.
    pub fn mode(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bp), (i, &p)| if p > bp { (i, p) } else { (bi, bp) })
            .0
    }

    /// Draws a category by inverting the cumulative distribution with one
    /// uniform draw; returns `(index, log_prob, entropy)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64, f64) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            pick = Some(i);
            acc += p;
            if u < acc {
                break;
            }
        }
        let i = pick.expect("at least one unmasked category");
        (i, self.log_prob(i), self.entropy())
    }
}

/// Softmax of `query · key_k / sqrt(d_h)` over the active keys; inactive
/// keys get exactly 0.
pub fn attention_weights(query: &[f64], keys: &[Vec<f64>], d_h: usize, active: &[bool]) -> Result<Vec<f64>, NeuralError> {
    if keys.len() != active.len() {
        return Err(NeuralError::Shape(format!("{} keys but {} mask entries", keys.len(), active.len())));
    }
    let scale = (d_h as f64).sqrt();
    let scores = keys
        .iter()
        .map(|k| {
            if k.len() != query.len() {
                return Err(NeuralError::Shape(format!("key width {} vs query width {}", k.len(), query.len())));
            }
            Ok(query.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / scale)
        })
        .collect::<Result<Vec<_>, _>>()?;
    masked_softmax(&scores, active)
}

pub fn masked_softmax(scores: &[f64], mask: &[bool]) -> Result<Vec<f64>, NeuralError> {
    Ok(MaskedCategorical::new(scores, mask)?.probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn masked_symmetry_and_certainty() {
        let d = MaskedCategorical::new(&[0.3, 0.3, 0.3], &[true, false, true]).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.0, 0.5]);
        let one = MaskedCategorical::new(&[5.0, -1.0], &[false, true]).unwrap();
        assert_eq!(one.log_prob(1), 0.0);
        assert_eq!(one.entropy(), 0.0);
        assert_eq!(one.sample(&mut ChaCha8Rng::seed_from_u64(1)), (1, 0.0, 0.0));
        assert_eq!(MaskedCategorical::new(&[1.0], &[false]), Err(NeuralError::AllMasked));
    }

    #[test]
    fn attention_examples() {
        let q = vec![1.0, 2.0];
        let k = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(attention_weights(&q, &k, 2, &[true, true]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(attention_weights(&q, &k[..1], 2, &[true]).unwrap(), vec![1.0]);
        let w = attention_weights(&[2f64.ln()], &[vec![1.0], vec![0.0]], 1, &[true, true]).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(attention_weights(&q, &k, 2, &[false, false]), Err(NeuralError::AllMasked));
    }
}
