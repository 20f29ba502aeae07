//! Risk-neutral Monte Carlo pricer for a European call.
//!
//! Paths are processed in fixed chunks of [`CHUNK_PATHS`]. Chunk `i` draws
//! from seed stream `i` of the configured seed and the chunk sums are folded
//! in chunk order, so the estimate is bit-identical whether the chunks run on
//! one thread or many.

use super::{BsError, BsInputs};
use crate::seed::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const CHUNK_PATHS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: u64,
    pub seed: u64,
    /// Pair every draw `z` with `-z`; a pair counts as one sample.
    pub antithetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        Moments { n: self.n + o.n, sum: self.sum + o.sum, sum_sq: self.sum_sq + o.sum_sq }
    }
}

struct PathModel {
    spot: f64,
    strike: f64,
    drift: f64,
    diffusion: f64,
    discount: f64,
}

impl PathModel {
    fn new(p: &BsInputs) -> Self {
        Self {
            spot: p.spot,
            strike: p.strike,
            drift: (p.rate - 0.5 * p.vol * p.vol) * p.ttm,
            diffusion: p.vol * p.ttm.sqrt(),
            discount: (-p.rate * p.ttm).exp(),
        }
    }

    #[inline]
    fn discounted_payoff(&self, z: f64) -> f64 {
        let terminal = self.spot * (self.drift + self.diffusion * z).exp();
        self.discount * (terminal - self.strike).max(0.0)
    }
}

fn chunk_count(paths: u64) -> u64 {
    paths.div_ceil(CHUNK_PATHS)
}

fn run_chunk(model: &PathModel, cfg: &McConfig, chunk: u64) -> Moments {
    let start = chunk * CHUNK_PATHS;
    let len = CHUNK_PATHS.min(cfg.paths - start);
    let mut rng = stream_rng(cfg.seed, chunk);
    let mut m = Moments::default();
    for _ in 0..len {
        let z: f64 = rng.sample(StandardNormal);
        let x = if cfg.antithetic {
            0.5 * (model.discounted_payoff(z) + model.discounted_payoff(-z))
        } else {
            model.discounted_payoff(z)
        };
        m.n += 1;
        m.sum += x;
        m.sum_sq += x * x;
    }
    m
}

fn finish(m: Moments) -> McEstimate {
    let n = m.n as f64;
    let mean = m.sum / n;
    let var = ((m.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    McEstimate { price: mean, std_error: (var / n).sqrt() }
}

fn check(p: &BsInputs, cfg: &McConfig) -> Result<(), BsError> {
    p.validate()?;
    if cfg.paths < 2 {
        return Err(BsError::InvalidInput(format!("need at least 2 paths, got {}", cfg.paths)));
    }
    Ok(())
}

/// Single-threaded estimator; reference for [`mc_call_price`].
pub fn mc_call_price_sequential(p: &BsInputs, cfg: &McConfig) -> Result<McEstimate, BsError> {
    check(p, cfg)?;
    let model = PathModel::new(p);
    let total = (0..chunk_count(cfg.paths)).map(|c| run_chunk(&model, cfg, c)).fold(Moments::default(), Moments::merge);
    Ok(finish(total))
}

/// Discounted mean of `max(S_T - K, 0)` over simulated terminal prices and
/// its standard error. Chunks run on the rayon pool when the `parallel`
/// feature is on.
pub fn mc_call_price(p: &BsInputs, cfg: &McConfig) -> Result<McEstimate, BsError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        check(p, cfg)?;
        let model = PathModel::new(p);
        let chunks: Vec<Moments> =
            (0..chunk_count(cfg.paths)).into_par_iter().map(|c| run_chunk(&model, cfg, c)).collect();
        Ok(finish(chunks.into_iter().fold(Moments::default(), Moments::merge)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        mc_call_price_sequential(p, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs::bs_call_price;

    #[test]
    fn zero_vol_every_path_is_intrinsic() {
        let p = BsInputs::new(110.0, 100.0, 0.03, 0.0, 2.0).unwrap();
        let cfg = McConfig { paths: 1000, seed: 1, antithetic: false };
        let est = mc_call_price(&p, &cfg).unwrap();
        let want = (-0.06f64).exp() * (110.0 * 0.06f64.exp() - 100.0).max(0.0);
        assert!((est.price - want).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn same_seed_same_estimate() {
        let p = BsInputs::new(100.0, 105.0, 0.01, 0.25, 0.7).unwrap();
        let cfg = McConfig { paths: 200_000, seed: 42, antithetic: false };
        let a = mc_call_price(&p, &cfg).unwrap();
        let b = mc_call_price(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, mc_call_price_sequential(&p, &cfg).unwrap());
    }

    #[test]
    fn agrees_with_closed_form() {
        let p = BsInputs::new(100.0, 100.0, 0.05, 0.2, 1.0).unwrap();
        for antithetic in [false, true] {
            let cfg = McConfig { paths: 400_000, seed: 9, antithetic };
            let est = mc_call_price(&p, &cfg).unwrap();
            let exact = bs_call_price(&p).unwrap();
            assert!((est.price - exact).abs() < 4.0 * est.std_error, "{est:?} vs {exact}");
        }
    }

    #[test]
    fn rejects_single_path() {
        let p = BsInputs::new(100.0, 100.0, 0.05, 0.2, 1.0).unwrap();
        assert!(mc_call_price(&p, &McConfig { paths: 1, seed: 0, antithetic: false }).is_err());
    }
}
