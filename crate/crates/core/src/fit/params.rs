use serde::{Deserialize, Serialize};

use super::FitError;

/// Physical parameters a dataset depends on. Frequencies are rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    OmegaC,
    Kappa,
    KappaExt,
    OmegaM,
    GammaM,
    G0,
    NCav,
}

impl ParamName {
    pub const ALL: [ParamName; 7] = [
        ParamName::OmegaC,
        ParamName::Kappa,
        ParamName::KappaExt,
        ParamName::OmegaM,
        ParamName::GammaM,
        ParamName::G0,
        ParamName::NCav,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::OmegaC => "omega_c",
            ParamName::Kappa => "kappa",
            ParamName::KappaExt => "kappa_ext",
            ParamName::OmegaM => "omega_m",
            ParamName::GammaM => "gamma_m",
            ParamName::G0 => "g0",
            ParamName::NCav => "n_cav",
        }
    }

    /// Positive-definite parameters, optimized in logarithmic coordinates.
    pub fn is_logarithmic(self) -> bool {
        matches!(
            self,
            ParamName::Kappa | ParamName::GammaM | ParamName::NCav | ParamName::G0
        )
    }

    /// Everything except the photon number is an angular frequency.
    pub fn is_frequency(self) -> bool {
        self != ParamName::NCav
    }
}

impl std::fmt::Display for ParamName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ParamName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown parameter '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingMode {
    Fixed,
    Free,
    /// Tied to the shared group with this id.
    Shared(String),
}

/// How one parameter of one dataset enters the fit.
///
/// For `Shared` bindings the group's own bounds and initial value apply and
/// the dataset-level ones are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBinding {
    pub name: ParamName,
    pub mode: BindingMode,
    pub bounds: (f64, f64),
    pub init: f64,
}

impl ParamBinding {
    pub fn fixed(name: ParamName, value: f64) -> Self {
        Self {
            name,
            mode: BindingMode::Fixed,
            bounds: (value, value),
            init: value,
        }
    }

    pub fn free(name: ParamName, init: f64, lo: f64, hi: f64) -> Self {
        Self {
            name,
            mode: BindingMode::Free,
            bounds: (lo, hi),
            init,
        }
    }

    pub fn shared(name: ParamName, group: impl Into<String>) -> Self {
        Self {
            name,
            mode: BindingMode::Shared(group.into()),
            bounds: (f64::NAN, f64::NAN),
            init: f64::NAN,
        }
    }
}

/// A parameter value shared by several datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedBinding {
    pub id: String,
    pub name: ParamName,
    pub bounds: (f64, f64),
    pub init: f64,
}

/// Map between a bounded physical value and the optimizer coordinate
/// `u ∈ [1, 2]`, linear in the value or in its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Coordinate {
    lo: f64,
    width: f64,
    log: bool,
}

impl Coordinate {
    pub(crate) fn new(name: ParamName, bounds: (f64, f64), init: f64, what: &str) -> Result<Self, FitError> {
        let (lo, hi) = bounds;
        let bad = |reason: &str| FitError::InvalidProblem(format!("{what} ({name}): {reason}"));
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(bad("bounds must be finite"));
        }
        if !(lo < hi) {
            return Err(bad("lower bound must be below upper bound"));
        }
        if !(lo <= init && init <= hi) {
            return Err(bad("initial value outside bounds"));
        }
        let log = name.is_logarithmic();
        if log && !(lo > 0.0) {
            return Err(bad("logarithmic parameter needs a positive lower bound"));
        }
        let (t_lo, t_hi) = if log { (lo.ln(), hi.ln()) } else { (lo, hi) };
        Ok(Self {
            lo: t_lo,
            width: t_hi - t_lo,
            log,
        })
    }

    pub(crate) fn to_internal(self, value: f64) -> f64 {
        let t = if self.log { value.ln() } else { value };
        1.0 + (t - self.lo) / self.width
    }

    pub(crate) fn to_physical(self, u: f64) -> f64 {
        let t = self.lo + (u - 1.0) * self.width;
        if self.log {
            t.exp()
        } else {
            t
        }
    }

    /// `d value / d u` at internal coordinate `u`.
    pub(crate) fn derivative(&self, u: f64) -> f64 {
        if self.log {
            self.width * self.to_physical(u)
        } else {
            self.width
        }
    }
}
