use crate::error::{Error, Result};

fn check_lengths(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::shape(
            format!("{} targets", pred.len()),
            format!("{} targets", target.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::invalid("Huber loss of empty vectors"));
    }
    Ok(())
}

#[inline]
pub(crate) fn rho(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

#[inline]
pub(crate) fn rho_prime(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        r
    } else {
        delta * r.signum()
    }
}

/// Mean elementwise Huber penalty of `pred - target`.
pub fn huber_loss(pred: &[f64], target: &[f64], delta: f64) -> Result<f64> {
    check_lengths(pred, target)?;
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| rho(p - t, delta)).sum();
    Ok(sum / pred.len() as f64)
}

/// Gradient of [`huber_loss`] with respect to `pred`.
pub fn huber_gradient(pred: &[f64], target: &[f64], delta: f64) -> Result<Vec<f64>> {
    check_lengths(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| rho_prime(p - t, delta) / n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_forms() {
        let x = [1.0, -2.0, 3.5];
        assert_eq!(huber_loss(&x, &x, 1.0).unwrap(), 0.0);
        assert_eq!(huber_loss(&[0.5], &[0.0], 1.0).unwrap(), 0.125);
        assert_eq!(huber_loss(&[2.0], &[0.0], 1.0).unwrap(), 1.5);
        assert_eq!(huber_loss(&[-2.0], &[0.0], 1.0).unwrap(), 1.5);
        assert_eq!(huber_gradient(&x, &x, 1.0).unwrap(), vec![0.0; 3]);
        assert_eq!(huber_gradient(&[2.0], &[0.0], 1.0).unwrap(), vec![1.0]);
        assert_eq!(huber_gradient(&[0.0], &[2.0], 1.0).unwrap(), vec![-1.0]);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(huber_loss(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(huber_gradient(&[1.0, 2.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let pred: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let target: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let g = huber_gradient(&pred, &target, 1.0).unwrap();
            let eps = 1e-6;
            for i in 0..pred.len() {
                let r = (pred[i] - target[i]).abs();
                if (r - 1.0).abs() < 1e-4 {
                    continue; // kink
                }
                let mut up = pred.clone();
                let mut dn = pred.clone();
                up[i] += eps;
                dn[i] -= eps;
                let fd = (huber_loss(&up, &target, 1.0).unwrap()
                    - huber_loss(&dn, &target, 1.0).unwrap())
                    / (2.0 * eps);
                let rel = (fd - g[i]).abs() / g[i].abs().max(1e-8);
                assert!(rel < 1e-4, "element {i}: fd {fd} vs {}", g[i]);
            }
        }
    }
}
