//! Generalized advantage estimation.

use crate::error::MarlError;

#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<f64>,
    /// `advantages + values`, the critic targets.
    pub returns: Vec<f64>,
}

/// Backward recursion `A_t = δ_t + γλ A_{t+1}` with
/// `δ_t = r_t + γ V_{t+1} - V_t` and `V_T = bootstrap`.
pub fn gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lam: f64) -> Result<Advantages, MarlError> {
    if rewards.len() != values.len() {
        return Err(MarlError::LengthMismatch(rewards.len(), values.len()));
    }
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + gamma * lam * acc;
        advantages[t] = acc;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(Advantages { advantages, returns })
}

/// Shifts and scales to zero mean and unit standard deviation; constant
/// inputs map to zeros.
pub fn normalize(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - mean) / (std + 1e-8)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telescoping_example() {
        let a = gae(&[1.0, 1.0], &[0.0, 0.0], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a.advantages, vec![2.0, 1.0]);
        assert_eq!(a.returns, vec![2.0, 1.0]);
    }

    #[test]
    fn zeros_and_single_step() {
        assert_eq!(gae(&[0.0; 4], &[0.0; 4], 0.0, 0.99, 0.95).unwrap().advantages, vec![0.0; 4]);
        let a = gae(&[0.7], &[0.2], 1.5, 0.9, 0.95).unwrap();
        assert!((a.advantages[0] - (0.7 + 0.9 * 1.5 - 0.2)).abs() < 1e-15);
        assert!(matches!(gae(&[1.0], &[], 0.0, 0.9, 0.9), Err(MarlError::LengthMismatch(1, 0))));
    }

    #[test]
    fn normalize_moments() {
        let z = normalize(&[1.0, 2.0, 3.0, 4.0]);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
        assert!((z.iter().map(|x| x * x).sum::<f64>() / 4.0 - 1.0).abs() < 1e-6);
        assert_eq!(normalize(&[3.0, 3.0]), vec![0.0, 0.0]);
    }
}
