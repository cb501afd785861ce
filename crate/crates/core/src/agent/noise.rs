//! Autoregressive exploration noise of order p with a single repeated pole.
//!
//! Each action axis follows `X_t = Σ φ_i X_{t-i} + Z_t` where the
//! coefficients come from expanding `(1 - αB)^p`. The innovation scale is
//! chosen so the stationary standard deviation of `X` equals `sigma`.
//! Larger `α` gives smoother, more persistent perturbations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::vecmath::{Vec3, ACTION_DIM};

#[derive(Debug, Clone)]
pub struct ArpNoise {
    order: usize,
    alpha: f64,
    sigma: f64,
    coefficients: Vec<f64>,
    innovation_std: f64,
    /// Most recent sample first.
    history: Vec<[f64; ACTION_DIM]>,
    rng: ChaCha8Rng,
}

/// `φ_i = -C(p, i)·(-α)^i`, i = 1..=p.
pub fn arp_coefficients(order: usize, alpha: f64) -> Vec<f64> {
    let mut binom = 1.0;
    (1..=order)
        .map(|i| {
            binom = binom * (order + 1 - i) as f64 / i as f64;
            -binom * (-alpha).powi(i as i32)
        })
        .collect()
}

/// Variance of the process driven by unit-variance innovations, summed from
/// the impulse response `ψ_k` until it has decayed below rounding.
pub fn unit_innovation_variance(coefficients: &[f64]) -> f64 {
    let p = coefficients.len();
    let mut psi = vec![1.0];
    let mut total = 1.0;
    let mut quiet = 0usize;
    for k in 1..1_000_000usize {
        let mut v = 0.0;
        for (i, phi) in coefficients.iter().enumerate() {
            if k > i {
                v += phi * psi[k - 1 - i];
            }
        }
        psi.push(v);
        total += v * v;
        if v * v <= total * 1e-18 {
            quiet += 1;
            if quiet > p + 1 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    total
}

impl ArpNoise {
    pub fn new(order: usize, alpha: f64, sigma: f64, seed: u64) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("ar_order must be >= 1"));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::config(format!(
                "ar_alpha must lie in [0, 1), got {alpha}"
            )));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!(
                "exploration_sigma must be >= 0, got {sigma}"
            )));
        }
        let coefficients = arp_coefficients(order, alpha);
        let innovation_std = sigma / unit_innovation_variance(&coefficients).sqrt();
        Ok(ArpNoise {
            order,
            alpha,
            sigma,
            coefficients,
            innovation_std,
            history: vec![[0.0; ACTION_DIM]; order],
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn innovation_std(&self) -> f64 {
        self.innovation_std
    }

    /// Clears the history; the random stream continues.
    pub fn reset(&mut self) {
        for h in &mut self.history {
            *h = [0.0; ACTION_DIM];
        }
    }

    pub fn sample(&mut self) -> Vec3 {
        let mut next = [0.0; ACTION_DIM];
        for (d, out) in next.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let mut x = self.innovation_std * z;
            for (phi, past) in self.coefficients.iter().zip(&self.history) {
                x += phi * past[d];
            }
            *out = x;
        }
        self.history.rotate_right(1);
        self.history[0] = next;
        Vec3::from_array(next)
    }
}
