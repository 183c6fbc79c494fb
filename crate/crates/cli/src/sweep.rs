//! Parallel one-parameter sweeps.

use std::fmt;
use std::str::FromStr;

use piezo_core::beam::{classify_stability, derive_constants, BeamParameters};
use piezo_core::frequency::boundedness_scan;
use piezo_core::timedomain::{decay_rate, simulate, Grid, InitialData, SimConfig, SimMode};
use rayon::prelude::*;

use crate::config::{RunConfig, REQUIRED_KEYS};
use crate::output::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Fitted closed-loop energy decay rate from a Gaussian pulse.
    DecayRate,
    /// Stability class label.
    Class,
    ZetaRatio,
    /// Largest `|G|` sampled on `Re s = 1`, `|Im s| <= 100`.
    SupG,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::DecayRate => "decay_rate",
            Metric::Class => "class",
            Metric::ZetaRatio => "zeta_ratio",
            Metric::SupG => "sup_G",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "decay_rate" => Ok(Metric::DecayRate),
            "class" => Ok(Metric::Class),
            "zeta_ratio" => Ok(Metric::ZetaRatio),
            "sup_G" => Ok(Metric::SupG),
            _ => Err(format!(
                "unknown metric `{s}` (expected decay_rate, class, zeta_ratio or sup_G)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Formatted metric, `NaN` on failure.
    pub metric: String,
    pub error: Option<String>,
}

pub fn evaluate(cfg: &RunConfig, params: &BeamParameters, metric: Metric) -> piezo_core::error::Result<String> {
    let dc = derive_constants(params)?;
    match metric {
        Metric::ZetaRatio => Ok(fmt_f64(dc.ratio())),
        Metric::Class => Ok(classify_stability(&dc, params.length, cfg.qmax, cfg.tol)?
            .class
            .label()
            .to_string()),
        Metric::SupG => Ok(fmt_f64(boundedness_scan(1.0, 100.0, 2001, &dc, params)?.sup)),
        Metric::DecayRate => {
            let l = params.length;
            let grid = Grid::new(l, cfg.cells)?;
            let init = InitialData::Gaussian {
                center: 0.6 * l,
                width: 0.05 * l,
                amplitude: 1.0,
            }
            .build(&grid, &dc)?;
            let t = cfg.final_time;
            let sim = SimConfig::new(SimMode::closed(cfg.gain_for(params)), t)
                .with_cfl(cfg.cfl)
                .with_sample_dt(t / 400.0);
            let traj = simulate(&init, params, &sim)?;
            let (rate, _) = decay_rate(&traj.energies, &traj.times)?;
            Ok(fmt_f64(rate))
        }
    }
}

/// Evaluates `metric` with `param` set to each of `values`. Rows come back in
/// input order; a failing point becomes a `NaN` row carrying the error text.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[f64], metric: Metric) -> Result<Vec<SweepRow>, String> {
    if !REQUIRED_KEYS.contains(&param) {
        return Err(format!(
            "cannot sweep `{param}`; expected one of {}",
            REQUIRED_KEYS.join(", ")
        ));
    }
    Ok(values
        .par_iter()
        .map(|&value| {
            let result = cfg
                .params
                .with(param, value)
                .and_then(|p| evaluate(cfg, &p, metric));
            match result {
                Ok(metric) => SweepRow {
                    value,
                    metric,
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    metric: "NaN".to_string(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
