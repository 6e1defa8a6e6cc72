//! The nine counterfactual methods behind one dispatcher.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classifier::Halfspace;
use crate::error::{Error, Result};
use crate::gmm::{fit_gmm, solve_gmm_map, EmConfig};
use crate::numerics::Matrix;
use crate::scalar::Scalar;
use crate::solvers::{
    solve_affine_diag, solve_affine_psd, solve_gaussian_commutative, solve_gaussian_full, solve_gaussian_scaled,
    solve_group_bilipschitz, solve_group_lipschitz, solve_independent, BiLipschitzOptions, Bounds, SolveReport,
    SolverSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Independent,
    #[serde(rename = "lipschitz")]
    GroupLipschitz,
    #[serde(rename = "bilipschitz")]
    GroupBiLipschitz,
    AffinePsd,
    #[serde(rename = "affine-diag")]
    AffineDiagonal,
    Gaussian,
    GaussianCommutative,
    GaussianScaled,
    Gmm,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Independent,
        Method::GroupLipschitz,
        Method::GroupBiLipschitz,
        Method::AffinePsd,
        Method::AffineDiagonal,
        Method::Gaussian,
        Method::GaussianCommutative,
        Method::GaussianScaled,
        Method::Gmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Independent => "independent",
            Method::GroupLipschitz => "lipschitz",
            Method::GroupBiLipschitz => "bilipschitz",
            Method::AffinePsd => "affine-psd",
            Method::AffineDiagonal => "affine-diag",
            Method::Gaussian => "gaussian",
            Method::GaussianCommutative => "gaussian-commutative",
            Method::GaussianScaled => "gaussian-scaled",
            Method::Gmm => "gmm",
        }
    }

    /// Baselines that only produce images of their fitting points.
    pub fn is_pointwise(self) -> bool {
        matches!(self, Method::Independent | Method::GroupLipschitz | Method::GroupBiLipschitz)
    }

    /// Whether `K`/`k` change the fit at all.
    pub fn uses_bounds(self) -> bool {
        self != Method::Independent
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}'")))
    }
}

/// Everything a fit needs besides the data, the halfspace and the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitConfig<T> {
    pub settings: SolverSettings<T>,
    pub restarts: usize,
    #[serde(with = "secs")]
    pub time_cap: Duration,
    pub gmm_components: usize,
    pub em: EmConfig,
    pub seed: u64,
}

impl<T: Scalar> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            settings: SolverSettings::precise(),
            restarts: 5,
            time_cap: Duration::from_secs(1800),
            gmm_components: 3,
            em: EmConfig::default(),
            seed: 0,
        }
    }
}

impl<T: Scalar> FitConfig<T> {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            em: EmConfig { seed, ..self.em },
            ..self.clone()
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(v.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// Fits `method` to the group `points`.
pub fn fit_method<T: Scalar>(
    method: Method,
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    config: &FitConfig<T>,
) -> Result<SolveReport<T>> {
    let s = &config.settings;
    match method {
        Method::Independent => solve_independent(points, hs),
        Method::GroupLipschitz => solve_group_lipschitz(points, hs, bounds.hi(), s),
        Method::GroupBiLipschitz => {
            let opts = BiLipschitzOptions {
                restarts: config.restarts,
                time_cap: config.time_cap,
                seed: config.seed,
                settings: SolverSettings {
                    time_cap: None,
                    ..SolverSettings::default()
                },
                ..BiLipschitzOptions::default()
            };
            solve_group_bilipschitz(points, hs, bounds, &opts)
        }
        Method::AffinePsd => solve_affine_psd(points, hs, bounds, s),
        Method::AffineDiagonal => solve_affine_diag(points, hs, bounds, s),
        Method::Gaussian => solve_gaussian_full(points, hs, bounds, s),
        Method::GaussianCommutative => solve_gaussian_commutative(points, hs, bounds, s),
        Method::GaussianScaled => solve_gaussian_scaled(points, hs, bounds, s),
        Method::Gmm => {
            let fit = fit_gmm(points, config.gmm_components, &config.em)?;
            solve_gmm_map(&fit.model, hs, points, bounds, s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("wachter".parse::<Method>().is_err());
    }
}
