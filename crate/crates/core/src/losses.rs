//! Convex regression losses `L(y, t)` and their right derivatives in `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    LeastSquares,
    AbsoluteDeviation,
    /// Quantile loss `(y−t)(τ − 1{y<t})`.
    Pinball {
        tau: f64,
    },
    /// Quadratic within `delta` of the response, linear beyond.
    Huber {
        delta: f64,
    },
    /// Zero within `eps` of the response, absolute beyond.
    EpsInsensitive {
        eps: f64,
    },
}

/// A loss with a positive multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossDescriptor", into = "LossDescriptor")]
pub struct Loss {
    kind: LossKind,
    scale: f64,
}

impl Loss {
    pub fn new(kind: LossKind, scale: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(scale > 0.0 && scale.is_finite()) {
            return bad(format!("loss scale must be positive, got {scale}"));
        }
        match kind {
            LossKind::Pinball { tau } if !(tau > 0.0 && tau < 1.0) => {
                return bad(format!("pinball level tau must lie in (0, 1), got {tau}"));
            }
            LossKind::Huber { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return bad(format!("Huber delta must be positive, got {delta}"));
            }
            LossKind::EpsInsensitive { eps } if !(eps >= 0.0 && eps.is_finite()) => {
                return bad(format!("insensitivity eps must be nonnegative, got {eps}"));
            }
            _ => {}
        }
        Ok(Self { kind, scale })
    }

    pub fn least_squares() -> Self {
        Self { kind: LossKind::LeastSquares, scale: 1.0 }
    }

    pub fn absolute() -> Self {
        Self { kind: LossKind::AbsoluteDeviation, scale: 1.0 }
    }

    pub fn pinball(tau: f64) -> Result<Self> {
        Self::new(LossKind::Pinball { tau }, 1.0)
    }

    pub fn huber(delta: f64) -> Result<Self> {
        Self::new(LossKind::Huber { delta }, 1.0)
    }

    pub fn eps_insensitive(eps: f64) -> Result<Self> {
        Self::new(LossKind::EpsInsensitive { eps }, 1.0)
    }

    pub fn with_scale(self, scale: f64) -> Result<Self> {
        Self::new(self.kind, scale)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `L(y, t)`.
    pub fn value(&self, y: f64, t: f64) -> f64 {
        let r = y - t;
        let raw = match self.kind {
            LossKind::LeastSquares => r * r,
            LossKind::AbsoluteDeviation => r.abs(),
            LossKind::Pinball { tau } => {
                if r < 0.0 {
                    r * (tau - 1.0)
                } else {
                    r * tau
                }
            }
            LossKind::Huber { delta } => {
                if r.abs() <= delta {
                    0.5 * r * r
                } else {
                    delta * (r.abs() - 0.5 * delta)
                }
            }
            LossKind::EpsInsensitive { eps } => (r.abs() - eps).max(0.0),
        };
        self.scale * raw
    }

    /// Right derivative of `t ↦ L(y, t)`, always an element of the subdifferential.
    pub fn subgradient(&self, y: f64, t: f64) -> f64 {
        let r = t - y;
        let raw = match self.kind {
            LossKind::LeastSquares => 2.0 * r,
            LossKind::AbsoluteDeviation => {
                if r >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            LossKind::Pinball { tau } => {
                if r >= 0.0 {
                    1.0 - tau
                } else {
                    -tau
                }
            }
            LossKind::Huber { delta } => r.clamp(-delta, delta),
            LossKind::EpsInsensitive { eps } => {
                if r >= eps {
                    1.0
                } else if r >= -eps {
                    0.0
                } else {
                    -1.0
                }
            }
        };
        self.scale * raw
    }

    /// Subdifferential `[lo, hi]` of `t ↦ L(y, t)` at `t`.
    pub fn subdifferential(&self, y: f64, t: f64) -> (f64, f64) {
        let r = t - y;
        let (lo, hi) = match self.kind {
            LossKind::AbsoluteDeviation if r == 0.0 => (-1.0, 1.0),
            LossKind::Pinball { tau } if r == 0.0 => (-tau, 1.0 - tau),
            LossKind::EpsInsensitive { eps } if r == eps => (0.0, 1.0),
            LossKind::EpsInsensitive { eps } if r == -eps && eps > 0.0 => (-1.0, 0.0),
            LossKind::EpsInsensitive { eps } if r == -eps => (-1.0, 1.0),
            _ => {
                let g = self.subgradient(y, t) / self.scale;
                (g, g)
            }
        };
        (self.scale * lo, self.scale * hi)
    }

    /// Range `[h_lo, h_hi]` of all subgradients, when bounded (Lipschitz losses).
    pub fn subgradient_range(&self) -> Option<(f64, f64)> {
        let (lo, hi) = match self.kind {
            LossKind::AbsoluteDeviation | LossKind::EpsInsensitive { .. } => (-1.0, 1.0),
            LossKind::Pinball { tau } => (-tau, 1.0 - tau),
            LossKind::Huber { delta } => (-delta, delta),
            LossKind::LeastSquares => return None,
        };
        Some((self.scale * lo, self.scale * hi))
    }

    /// Piecewise-linear losses with a single kink at the response.
    pub fn is_quantile_type(&self) -> bool {
        matches!(self.kind, LossKind::AbsoluteDeviation | LossKind::Pinball { .. })
    }
}

/// `{"kind":"abs"}`, `{"kind":"pinball","tau":0.5}`, `{"kind":"ls"}`,
/// `{"kind":"huber","delta":1.0}`, `{"kind":"eps","eps":0.1}`; optional `"scale"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LossDescriptor {
    Ls {
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    Abs {
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    Pinball {
        tau: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    Huber {
        delta: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    Eps {
        eps: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl TryFrom<LossDescriptor> for Loss {
    type Error = Error;

    fn try_from(d: LossDescriptor) -> Result<Self> {
        let (kind, scale) = match d {
            LossDescriptor::Ls { scale } => (LossKind::LeastSquares, scale),
            LossDescriptor::Abs { scale } => (LossKind::AbsoluteDeviation, scale),
            LossDescriptor::Pinball { tau, scale } => (LossKind::Pinball { tau }, scale),
            LossDescriptor::Huber { delta, scale } => (LossKind::Huber { delta }, scale),
            LossDescriptor::Eps { eps, scale } => (LossKind::EpsInsensitive { eps }, scale),
        };
        Loss::new(kind, scale)
    }
}

impl From<Loss> for LossDescriptor {
    fn from(l: Loss) -> Self {
        let scale = l.scale;
        match l.kind {
            LossKind::LeastSquares => LossDescriptor::Ls { scale },
            LossKind::AbsoluteDeviation => LossDescriptor::Abs { scale },
            LossKind::Pinball { tau } => LossDescriptor::Pinball { tau, scale },
            LossKind::Huber { delta } => LossDescriptor::Huber { delta, scale },
            LossKind::EpsInsensitive { eps } => LossDescriptor::Eps { eps, scale },
        }
    }
}
