use optlab_core::bs::{
    assemble_bs_from_lognormal, bs_call_price, d1_d2, implied_vol, mc_call_price, vega, BsInputs, Contract, IvConfig,
    McConfig,
};
use serde_json::{json, Value};

use crate::config::BsRun;
use crate::error::{CliError, Result};

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| CliError::Usage(format!("bs needs --{name}")))
}

/// Closed-form price with greeks and an optional Monte Carlo check, or the
/// implied vol of a given price.
pub fn run(cfg: &BsRun) -> Result<Value> {
    let spot = need(cfg.spot, "spot")?;
    let strike = need(cfg.strike, "strike")?;
    let rate = need(cfg.rate, "rate")?;
    let ttm = need(cfg.ttm, "ttm")?;
    match (cfg.vol, cfg.price) {
        (Some(vol), None) => {
            let p = BsInputs::new(spot, strike, rate, vol, ttm)?;
            let (d1, d2) = d1_d2(&p)?;
            let mut out = json!({
                "price": bs_call_price(&p)?,
                "lognormal_assembly": assemble_bs_from_lognormal(&p)?,
                "d1": d1,
                "d2": d2,
                "vega": vega(&p)?,
            });
            if let Some(mc) = cfg.mc {
                let est = mc_call_price(&p, &McConfig { paths: mc.paths, seed: mc.seed, antithetic: mc.antithetic })?;
                out["mc"] =
                    json!({ "paths": mc.paths, "seed": mc.seed, "price": est.price, "std_error": est.std_error });
            }
            Ok(out)
        }
        (None, Some(price)) => {
            if cfg.mc.is_some() {
                return Err(CliError::Usage("Monte Carlo needs --vol, not --price".into()));
            }
            let c = Contract::new(spot, strike, rate, ttm)?;
            Ok(json!({ "implied_vol": implied_vol(price, &c, &IvConfig::default())? }))
        }
        _ => Err(CliError::Usage("bs needs exactly one of --vol or --price".into())),
    }
}
