//! Data descriptors. Every descriptor is fitted on target-class data only and
//! scores queries so that a larger score means more target-like.

mod alp;
mod neighbor_models;
mod svm;
mod weights;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use alp::{alp_truncation, localised_alp, AlpModel};
pub use neighbor_models::{LnndModel, LofModel, LofTrainStats, NndModel};
pub use svm::{gaussian_kernel, kernel_width, SmoOptions, SvmModel};
pub use weights::{linear_weights, owa, WeightVector};

/// Score assigned when a ratio has a positive numerator over a zero
/// denominator: less target-like than any finite score.
pub const ANOMALY_SENTINEL: f64 = f64::MIN;

/// `num / den` with `0/0 = 1` and `x/0 = inf` for `x > 0`.
pub fn zero_rule_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Negates an outlier ratio into a target-likeness score.
pub(crate) fn negated(ratio: f64) -> f64 {
    if ratio.is_finite() {
        -ratio
    } else {
        ANOMALY_SENTINEL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Nnd,
    Lnnd,
    Lof,
    Alp,
    Svm,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 5] = [
        DescriptorKind::Alp,
        DescriptorKind::Lnnd,
        DescriptorKind::Lof,
        DescriptorKind::Nnd,
        DescriptorKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Nnd => "nnd",
            DescriptorKind::Lnnd => "lnnd",
            DescriptorKind::Lof => "lof",
            DescriptorKind::Alp => "alp",
            DescriptorKind::Svm => "svm",
        }
    }

    /// Default hyperparameters for a target set of `n` instances in `d`
    /// dimensions, clamped into the fit preconditions.
    pub fn default_spec(self, n: usize, d: usize) -> DescriptorSpec {
        let ln = (n.max(1) as f64).ln();
        let ceil = |x: f64| (x.ceil() as usize).max(1);
        match self {
            DescriptorKind::Nnd => DescriptorSpec::Nnd { k: 1 },
            DescriptorKind::Lnnd => DescriptorSpec::Lnnd {
                k: ceil(ln).min(n.saturating_sub(1).max(1)),
            },
            DescriptorKind::Lof => DescriptorSpec::Lof {
                k: ceil(2.5 * ln).min(n.saturating_sub(1).max(1)),
            },
            DescriptorKind::Alp => DescriptorSpec::Alp {
                k: ceil(5.5 * ln),
                l: ceil(6.0 * ln),
            },
            DescriptorKind::Svm => {
                // width c = d, i.e. c' = d / (1 + d)
                let d = d.max(1) as f64;
                DescriptorSpec::Svm {
                    nu: 0.2,
                    c_prime: d / (1.0 + d),
                }
            }
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nnd" => Ok(DescriptorKind::Nnd),
            "lnnd" => Ok(DescriptorKind::Lnnd),
            "lof" => Ok(DescriptorKind::Lof),
            "alp" => Ok(DescriptorKind::Alp),
            "svm" => Ok(DescriptorKind::Svm),
            other => Err(Error::InvalidInput(format!("unknown descriptor '{other}'"))),
        }
    }
}

/// A descriptor together with concrete hyperparameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DescriptorSpec {
    Nnd { k: usize },
    Lnnd { k: usize },
    Lof { k: usize },
    Alp { k: usize, l: usize },
    Svm { nu: f64, c_prime: f64 },
}

pub const NU_MIN: f64 = 1e-6;
pub const NU_MAX: f64 = 1.0;
pub const C_PRIME_MIN: f64 = 1e-6;
pub const C_PRIME_MAX: f64 = 1.0 - 1e-6;

impl DescriptorSpec {
    pub fn kind(&self) -> DescriptorKind {
        match self {
            DescriptorSpec::Nnd { .. } => DescriptorKind::Nnd,
            DescriptorSpec::Lnnd { .. } => DescriptorKind::Lnnd,
            DescriptorSpec::Lof { .. } => DescriptorKind::Lof,
            DescriptorSpec::Alp { .. } => DescriptorKind::Alp,
            DescriptorSpec::Svm { .. } => DescriptorKind::Svm,
        }
    }

    /// Hyperparameter values in a fixed order, integers as floats.
    pub fn values(&self) -> Vec<f64> {
        match *self {
            DescriptorSpec::Nnd { k } | DescriptorSpec::Lnnd { k } | DescriptorSpec::Lof { k } => {
                vec![k as f64]
            }
            DescriptorSpec::Alp { k, l } => vec![k as f64, l as f64],
            DescriptorSpec::Svm { nu, c_prime } => vec![nu, c_prime],
        }
    }

    /// Inverse of [`DescriptorSpec::values`].
    pub fn from_values(kind: DescriptorKind, values: &[f64]) -> Result<Self> {
        let expected = if matches!(kind, DescriptorKind::Alp | DescriptorKind::Svm) { 2 } else { 1 };
        if values.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{kind} takes {expected} hyperparameters, got {}",
                values.len()
            )));
        }
        let int = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::InvalidInput(format!("{v} is not a positive integer")))
            }
        };
        Ok(match kind {
            DescriptorKind::Nnd => DescriptorSpec::Nnd { k: int(values[0])? },
            DescriptorKind::Lnnd => DescriptorSpec::Lnnd { k: int(values[0])? },
            DescriptorKind::Lof => DescriptorSpec::Lof { k: int(values[0])? },
            DescriptorKind::Alp => DescriptorSpec::Alp {
                k: int(values[0])?,
                l: int(values[1])?,
            },
            DescriptorKind::Svm => DescriptorSpec::Svm {
                nu: values[0],
                c_prime: values[1],
            },
        })
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            DescriptorSpec::Alp { .. } => &["k", "l"],
            DescriptorSpec::Svm { .. } => &["nu", "c_prime"],
            _ => &["k"],
        }
    }

    fn check_k(k: usize, n: usize, needed_extra: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::Domain {
                name: "k",
                value: 0.0,
                min: 1.0,
                max: f64::INFINITY,
            });
        }
        if n < k + needed_extra {
            return Err(Error::TooFewPoints {
                needed: k + needed_extra,
                available: n,
            });
        }
        Ok(())
    }

    /// Checks that the hyperparameters can be fitted on `n` target instances.
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            DescriptorSpec::Nnd { k } => Self::check_k(k, n, 0),
            DescriptorSpec::Lnnd { k } | DescriptorSpec::Lof { k } => Self::check_k(k, n, 1),
            DescriptorSpec::Alp { k, l } => {
                if k == 0 || l == 0 {
                    return Err(Error::Domain {
                        name: if k == 0 { "k" } else { "l" },
                        value: 0.0,
                        min: 1.0,
                        max: (5 * n) as f64,
                    });
                }
                if n < 2 {
                    return Err(Error::TooFewPoints {
                        needed: 2,
                        available: n,
                    });
                }
                Ok(())
            }
            DescriptorSpec::Svm { nu, c_prime } => {
                if !(NU_MIN..=NU_MAX).contains(&nu) {
                    return Err(Error::Domain {
                        name: "nu",
                        value: nu,
                        min: NU_MIN,
                        max: NU_MAX,
                    });
                }
                if !(C_PRIME_MIN..=C_PRIME_MAX).contains(&c_prime) {
                    return Err(Error::Domain {
                        name: "c_prime",
                        value: c_prime,
                        min: C_PRIME_MIN,
                        max: C_PRIME_MAX,
                    });
                }
                if n == 0 {
                    return Err(Error::TooFewPoints {
                        needed: 1,
                        available: 0,
                    });
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for DescriptorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DescriptorSpec::Nnd { k } => write!(f, "nnd(k={k})"),
            DescriptorSpec::Lnnd { k } => write!(f, "lnnd(k={k})"),
            DescriptorSpec::Lof { k } => write!(f, "lof(k={k})"),
            DescriptorSpec::Alp { k, l } => write!(f, "alp(k={k}, l={l})"),
            DescriptorSpec::Svm { nu, c_prime } => write!(f, "svm(nu={nu}, c'={c_prime})"),
        }
    }
}

/// Trained scoring state of any descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Nnd(NndModel),
    Lnnd(LnndModel),
    Lof(LofModel),
    Alp(AlpModel),
    Svm(SvmModel),
}

impl FittedModel {
    pub fn fit(spec: &DescriptorSpec, target: ArrayView2<'_, f64>) -> Result<Self> {
        spec.validate(target.nrows())?;
        Ok(match *spec {
            DescriptorSpec::Nnd { k } => FittedModel::Nnd(NndModel::fit(target, k)?),
            DescriptorSpec::Lnnd { k } => FittedModel::Lnnd(LnndModel::fit(target, k)?),
            DescriptorSpec::Lof { k } => FittedModel::Lof(LofModel::fit(target, k)?),
            DescriptorSpec::Alp { k, l } => FittedModel::Alp(AlpModel::fit(target, k, l)?),
            DescriptorSpec::Svm { nu, c_prime } => {
                FittedModel::Svm(SvmModel::fit(target, nu, c_prime, &SmoOptions::default())?)
            }
        })
    }

    pub fn kind(&self) -> DescriptorKind {
        match self {
            FittedModel::Nnd(_) => DescriptorKind::Nnd,
            FittedModel::Lnnd(_) => DescriptorKind::Lnnd,
            FittedModel::Lof(_) => DescriptorKind::Lof,
            FittedModel::Alp(_) => DescriptorKind::Alp,
            FittedModel::Svm(_) => DescriptorKind::Svm,
        }
    }

    /// Scores every row of `queries`; larger is more target-like.
    pub fn score(&self, queries: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        match self {
            FittedModel::Nnd(m) => m.score(queries),
            FittedModel::Lnnd(m) => m.score(queries),
            FittedModel::Lof(m) => m.score(queries),
            FittedModel::Alp(m) => m.score(queries),
            FittedModel::Svm(m) => Ok(m.score(queries)),
        }
    }

    pub fn score_one(&self, y: &[f64]) -> Result<f64> {
        let view = ArrayView2::from_shape((1, y.len()), y)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(self.score(view)?[0])
    }
}
