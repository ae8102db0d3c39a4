//! Flat key=value configuration files for the `fit` command.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are errors,
//! so typos never pass silently. Documented keys:
//!
//! ```text
//! family               legendre | hermite | laguerre | trigonometric
//! p                    smoothness (integer >= 1), default 2
//! n                    synthetic sample size (ignored when `data` given)
//! sigmas               "theoretical" or a comma list of standard deviations
//! k                    coefficient count for theoretical sigmas (optional)
//! mcmc.iterations      total Metropolis steps, default 10000
//! mcmc.burn_in         discarded prefix, default 2000
//! mcmc.proposal_scale  global proposal factor, default 0.3
//! mcmc.adapt           true | false, default true
//! seed                 64-bit RNG seed, default 0
//! data                 path to a single-column observation CSV (optional)
//! grid                 curve grid resolution, default 201
//! out                  output directory (the --out flag wins)
//! ```

use polysieve::basis::BasisFamily;
use polysieve::inference::McmcConfig;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FitConfig {
    pub family: BasisFamily,
    pub p: usize,
    pub n: usize,
    pub sigmas: SigmaSetting,
    pub k: Option<usize>,
    pub mcmc: McmcConfig,
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub grid: usize,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum SigmaSetting {
    Theoretical,
    Explicit(Vec<f64>),
}

const KNOWN_KEYS: &[&str] = &[
    "family",
    "p",
    "n",
    "sigmas",
    "k",
    "mcmc.iterations",
    "mcmc.burn_in",
    "mcmc.proposal_scale",
    "mcmc.adapt",
    "seed",
    "data",
    "grid",
    "out",
];

pub fn parse_fit_config(text: &str) -> Result<FitConfig, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "line {}: expected `key = value`, found `{line}`",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Config(format!(
                "line {}: unknown key `{key}` (known keys: {})",
                lineno + 1,
                KNOWN_KEYS.join(", ")
            )));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!(
                "line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }

    let required = |key: &str| -> Result<String, CliError> {
        map.get(key)
            .cloned()
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    };
    let parse_usize = |key: &str, value: &str| -> Result<usize, CliError> {
        value
            .parse()
            .map_err(|_| CliError::Config(format!("key `{key}`: `{value}` is not a positive integer")))
    };

    let family: BasisFamily = required("family")?
        .parse()
        .map_err(|e| CliError::Config(format!("key `family`: {e}")))?;

    let sigmas = match map.get("sigmas").map(String::as_str) {
        None | Some("theoretical") => SigmaSetting::Theoretical,
        Some(list) => {
            let values: Result<Vec<f64>, _> = list.split(',').map(|s| s.trim().parse()).collect();
            SigmaSetting::Explicit(values.map_err(|_| {
                CliError::Config(format!("key `sigmas`: expected `theoretical` or a comma list, found `{list}`"))
            })?)
        }
    };

    let mut mcmc = McmcConfig::default();
    if let Some(v) = map.get("mcmc.iterations") {
        mcmc.iterations = parse_usize("mcmc.iterations", v)?;
    }
    if let Some(v) = map.get("mcmc.burn_in") {
        mcmc.burn_in = parse_usize("mcmc.burn_in", v)?;
    }
    if let Some(v) = map.get("mcmc.proposal_scale") {
        mcmc.proposal_scale = v.parse().map_err(|_| {
            CliError::Config(format!("key `mcmc.proposal_scale`: `{v}` is not a number"))
        })?;
    }
    if let Some(v) = map.get("mcmc.adapt") {
        mcmc.adapt = match v.as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(CliError::Config(format!(
                    "key `mcmc.adapt`: expected true or false, found `{other}`"
                )))
            }
        };
    }
    let seed = match map.get("seed") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Config(format!("key `seed`: `{v}` is not a u64")))?,
        None => 0,
    };
    mcmc.seed = seed;

    let config = FitConfig {
        family,
        p: match map.get("p") {
            Some(v) => parse_usize("p", v)?,
            None => 2,
        },
        n: match map.get("n") {
            Some(v) => parse_usize("n", v)?,
            None => 1000,
        },
        sigmas,
        k: match map.get("k") {
            Some(v) => Some(parse_usize("k", v)?),
            None => None,
        },
        mcmc,
        seed,
        data: map.get("data").map(PathBuf::from),
        grid: match map.get("grid") {
            Some(v) => parse_usize("grid", v)?,
            None => 201,
        },
        out: map.get("out").map(PathBuf::from),
    };

    if config.p == 0 {
        return Err(CliError::Config("key `p`: must be >= 1".into()));
    }
    if config.grid < 2 {
        return Err(CliError::Config("key `grid`: must be >= 2".into()));
    }
    if config.mcmc.burn_in >= config.mcmc.iterations {
        return Err(CliError::Config(format!(
            "key `mcmc.burn_in`: {} must be below mcmc.iterations {}",
            config.mcmc.burn_in, config.mcmc.iterations
        )));
    }
    if config.mcmc.proposal_scale <= 0.0 {
        return Err(CliError::Config(
            "key `mcmc.proposal_scale`: must be positive".into(),
        ));
    }
    Ok(config)
}
