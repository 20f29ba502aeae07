use super::{bs_call_price, vega, BsError, Contract};

/// Safeguarded Newton-Raphson settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvConfig {
    /// Accepted price residual, in currency units.
    pub tol: f64,
    pub max_iter: usize,
    pub vol_lo: f64,
    pub vol_hi: f64,
}

impl Default for IvConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, vol_lo: 1e-6, vol_hi: 5.0 }
    }
}

const STEP_TOL: f64 = 1e-12;
const BISECTION_LIMIT: usize = 200;

/// Volatility that reproduces `market_price` under the closed form.
///
/// Newton steps use the analytic vega; any step leaving the current bracket
/// (or a vanishing vega) is replaced by bisection. Iteration continues past
/// the price tolerance until the volatility step itself is negligible, so the
/// recovered volatility is accurate even where vega is tiny.
pub fn implied_vol(market_price: f64, contract: &Contract, cfg: &IvConfig) -> Result<f64, BsError> {
    contract.validate()?;
    if !(cfg.tol > 0.0) {
        return Err(BsError::InvalidInput("tolerance must be positive".into()));
    }
    let lower = contract.lower_bound();
    let upper = contract.spot;
    if !(market_price > lower && market_price < upper) {
        return Err(BsError::NoSolution { price: market_price, lower, upper });
    }

    let residual = |vol: f64| -> Result<f64, BsError> { Ok(bs_call_price(&contract.with_vol(vol))? - market_price) };

    let (mut lo, mut hi) = (cfg.vol_lo, cfg.vol_hi);
    let f_lo = residual(lo)?;
    let f_hi = residual(hi)?;
    if f_lo > cfg.tol || f_hi < -cfg.tol {
        // price is admissible but not attained inside the search bracket
        return Err(BsError::NoSolution {
            price: market_price,
            lower: f_lo + market_price,
            upper: f_hi + market_price,
        });
    }

    // Manaster-Koehler start
    let guess = ((contract.spot / contract.strike).ln() + contract.rate * contract.ttm).abs() * 2.0 / contract.ttm;
    let mut vol = guess.sqrt();
    if !(vol > lo && vol < hi) {
        vol = 0.2_f64.clamp(lo, hi);
    }

    let mut f = residual(vol)?;
    for _ in 0..cfg.max_iter {
        if f == 0.0 {
            return Ok(vol);
        }
        if f > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let slope = vega(&contract.with_vol(vol))?;
        let newton = vol - f / slope;
        let next =
            if slope > 0.0 && newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - vol).abs();
        vol = next;
        f = residual(vol)?;
        if f.abs() <= cfg.tol && (step <= STEP_TOL * vol.max(1.0) || hi - lo <= STEP_TOL) {
            return Ok(vol);
        }
    }

    // fallback: plain bisection on whatever bracket Newton left behind
    for _ in 0..BISECTION_LIMIT {
        if f.abs() <= cfg.tol && hi - lo <= STEP_TOL * vol.max(1.0) {
            return Ok(vol);
        }
        if f > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        vol = 0.5 * (lo + hi);
        f = residual(vol)?;
    }
    if f.abs() <= cfg.tol {
        return Ok(vol);
    }
    Err(BsError::NotConverged { iterations: cfg.max_iter + BISECTION_LIMIT, residual: f })
}
