//! Truncation policies shared by the tree and chain engines.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::linalg::{retained_rank, svd_econ, SvdFactors};
use crate::tensor::ComplexTensor;

/// Singular values below this fraction of the leading one are numerical
/// zeros and are always dropped, even in exact mode.
pub const EXACT_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationPolicy {
    Exact,
    /// Drop singular values below `sigma_rel · σ_1`.
    Threshold(f64),
    /// Keep at most this many singular values.
    Cap(usize),
    Both { sigma_rel: f64, d_max: usize },
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        let sigma_ok = |s: f64| (0.0..1.0).contains(&s);
        match *self {
            TruncationPolicy::Exact => Ok(()),
            TruncationPolicy::Threshold(s) if sigma_ok(s) => Ok(()),
            TruncationPolicy::Cap(d) if d >= 1 => Ok(()),
            TruncationPolicy::Both { sigma_rel, d_max } if sigma_ok(sigma_rel) && d_max >= 1 => {
                Ok(())
            }
            other => Err(SimError::invalid(format!("invalid truncation policy {other}"))),
        }
    }

    pub fn relative_threshold(&self) -> f64 {
        match *self {
            TruncationPolicy::Threshold(s) | TruncationPolicy::Both { sigma_rel: s, .. } => {
                s.max(EXACT_CUTOFF)
            }
            _ => EXACT_CUTOFF,
        }
    }

    pub fn max_rank(&self) -> Option<usize> {
        match *self {
            TruncationPolicy::Cap(d) | TruncationPolicy::Both { d_max: d, .. } => Some(d),
            _ => None,
        }
    }
}

impl fmt::Display for TruncationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationPolicy::Exact => write!(f, "exact"),
            TruncationPolicy::Threshold(s) => write!(f, "threshold:{s:e}"),
            TruncationPolicy::Cap(d) => write!(f, "cap:{d}"),
            TruncationPolicy::Both { sigma_rel, d_max } => write!(f, "both:{sigma_rel:e}:{d_max}"),
        }
    }
}

/// Parses `exact`, `threshold:<σ>`, `cap:<D>` or `both:<σ>:<D>`.
impl FromStr for TruncationPolicy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SimError::invalid(format!("cannot parse truncation policy {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let policy = match parts.as_slice() {
            ["exact"] => TruncationPolicy::Exact,
            ["threshold", x] => TruncationPolicy::Threshold(x.parse().map_err(|_| bad())?),
            ["cap", d] => TruncationPolicy::Cap(d.parse().map_err(|_| bad())?),
            ["both", x, d] => TruncationPolicy::Both {
                sigma_rel: x.parse().map_err(|_| bad())?,
                d_max: d.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Factorizes `m`, dropping numerical zeros and then whatever `policy`
/// discards. The flag reports whether the policy removed any singular value
/// above the numerical cutoff.
pub(crate) fn factorize(
    m: &ComplexTensor,
    policy: TruncationPolicy,
    location: impl Into<String>,
) -> Result<(SvdFactors, bool)> {
    let f = svd_econ(m, EXACT_CUTOFF, None).map_err(SimError::at(location))?;
    let k = retained_rank(&f.s, policy.relative_threshold(), policy.max_rank());
    let truncated = k < f.rank();
    Ok((f.truncate(k), truncated))
}
