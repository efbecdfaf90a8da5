//! Random instances of the real linear model `y = A x_sol + sigma v`.
//!
//! Every Gaussian entry is drawn from a ChaCha8 stream keyed by the instance
//! seed: column `j` of `A` uses stream `j`, the noise vector uses stream
//! [`NOISE_STREAM`]. Entries therefore depend only on `(seed, entry index)`,
//! never on the order in which columns are generated or on the thread that
//! generates them.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ClupError, Result};

/// ChaCha stream holding the noise vector `v`.
pub const NOISE_STREAM: u64 = u64::MAX;

/// One realization of the linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub a: DMatrix<f64>,
    pub v: DVector<f64>,
    /// Transmitted vector, every entry `+1/sqrt(n)`.
    pub x_sol: DVector<f64>,
    pub y: DVector<f64>,
}

impl ProblemInstance {
    /// Half-width `1/sqrt(n)` of the hypercube.
    pub fn bound(&self) -> f64 {
        box_bound(self.n)
    }

    pub fn snr(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }
}

/// Half-width of the hypercube `[-1/sqrt(n), 1/sqrt(n)]^n`.
pub fn box_bound(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

/// Converts an SNR `1/sigma^2` quoted in dB to the noise scale `sigma`.
pub fn snr_db_to_sigma(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// Output dimension used for a given `(n, alpha)`: `round(alpha * n)`.
pub fn output_dim(n: usize, alpha: f64) -> usize {
    (alpha * n as f64).round() as usize
}

pub fn generate_instance(n: usize, alpha: f64, sigma: f64, seed: u64) -> Result<ProblemInstance> {
    if n == 0 {
        return Err(ClupError::InvalidArgument("n must be positive".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ClupError::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ClupError::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let m = output_dim(n, alpha);
    if m == 0 {
        return Err(ClupError::InvalidArgument(format!(
            "alpha * n = {} rounds to an empty output",
            alpha * n as f64
        )));
    }

    let mut a = DMatrix::<f64>::zeros(m, n);
    for (j, mut col) in a.column_iter_mut().enumerate() {
        let mut rng = stream(seed, j as u64);
        for entry in col.iter_mut() {
            *entry = StandardNormal.sample(&mut rng);
        }
    }
    let mut rng = stream(seed, NOISE_STREAM);
    let v = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));

    let x_sol = DVector::from_element(n, box_bound(n));
    let y = &a * &x_sol + &v * sigma;

    Ok(ProblemInstance {
        n,
        m,
        alpha,
        sigma,
        a,
        v,
        x_sol,
        y,
    })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
