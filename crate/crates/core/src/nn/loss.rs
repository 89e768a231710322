use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Mean squared error and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(alloc::format!(
            "mse needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testing::*;
    use crate::rng::seeded;
    use alloc::vec;
    use rand::Rng;

    #[test]
    fn examples() {
        let (l, g) = mse_loss(&[0.3, -0.2], &[0.3, -0.2]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (l, g) = mse_loss(&[0.5], &[1.0]).unwrap();
        assert_eq!(l, 0.25);
        assert_eq!(g, vec![-1.0]);
        assert!(mse_loss(&[1.0], &[]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded(4);
        for _ in 0..20 {
            let p: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, g) = mse_loss(&p, &t).unwrap();
            let num = numeric_input_grad(&p, 1e-5, |x| mse_loss(x, &t).unwrap().0);
            assert!(max_rel_error(&g, &num) < 1e-6);
        }
    }
}
