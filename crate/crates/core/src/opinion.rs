//! Subjective-logic primitives: multinomial opinions, evidence vectors, and
//! their Dirichlet view.
//!
//! An opinion over a frame of K classes is a belief vector `b`, an
//! uncertainty mass `u` with `Σ b_k + u = 1`, and a base-rate distribution
//! `a`. Evidence `e ≥ 0` maps to an opinion through the Dirichlet bijection
//! `α = e + 1`, `S = Σ α`, `b_k = e_k / S`, `u = K / S`, so zero evidence is
//! the vacuous opinion (`u = 1`) and growing evidence shrinks `u` toward 0
//! without ever reaching it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for simplex checks on constructor inputs.
const SIMPLEX_TOL: f64 = 1e-9;

/// Uniform base-rate distribution over `k` classes.
pub fn uniform_base_rate(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

fn check_simplex(context: &str, values: &[f64], extra: f64) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: context.to_string(),
            });
        }
        if v < 0.0 {
            return Err(Error::Negative {
                context: context.to_string(),
                index: i,
                value: v,
            });
        }
    }
    let sum = values.iter().sum::<f64>() + extra;
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::NotNormalized {
            context: context.to_string(),
            sum,
        });
    }
    Ok(())
}

/// Non-negative evidence counts over a frame of at least two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence(Vec<f64>);

impl Evidence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::FrameTooSmall { got: values.len() });
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "evidence".into(),
                });
            }
            if v < 0.0 {
                return Err(Error::Negative {
                    context: "evidence".into(),
                    index: i,
                    value: v,
                });
            }
        }
        Ok(Evidence(values))
    }

    pub fn zeros(k: usize) -> Result<Self> {
        Evidence::new(vec![0.0; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total evidence mass `Σ e_k`.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Maps evidence to the opinion with the given base rates.
    pub fn to_opinion(&self, base_rate: &[f64]) -> Result<Opinion> {
        let k = self.len();
        if base_rate.len() != k {
            return Err(Error::dim("base rate", k, base_rate.len()));
        }
        check_simplex("base rate", base_rate, 0.0)?;
        let strength = k as f64 + self.total();
        let belief = self.0.iter().map(|e| e / strength).collect();
        Ok(Opinion {
            belief,
            uncertainty: k as f64 / strength,
            base_rate: base_rate.to_vec(),
        })
    }
}

/// Parameters of a Dirichlet distribution, `α_k > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams(Vec<f64>);

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::FrameTooSmall { got: alpha.len() });
        }
        for (i, &a) in alpha.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "alpha",
                    reason: format!("component {i} must be positive and finite, got {a}"),
                });
            }
        }
        Ok(DirichletParams(alpha))
    }

    /// `α = e + 1`.
    pub fn from_evidence(e: &Evidence) -> Self {
        DirichletParams(e.values().iter().map(|v| v + 1.0).collect())
    }

    pub fn alpha(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Dirichlet strength `S = Σ α_k`.
    pub fn strength(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// A multinomial opinion `(b, u, a)` with `Σ b_k + u = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    belief: Vec<f64>,
    uncertainty: f64,
    base_rate: Vec<f64>,
}

impl Opinion {
    /// Validating constructor; see module docs for the invariants.
    pub fn new(belief: Vec<f64>, uncertainty: f64, base_rate: Vec<f64>) -> Result<Self> {
        if belief.len() < 2 {
            return Err(Error::FrameTooSmall { got: belief.len() });
        }
        if base_rate.len() != belief.len() {
            return Err(Error::dim("base rate", belief.len(), base_rate.len()));
        }
        if !uncertainty.is_finite() {
            return Err(Error::NonFinite {
                context: "opinion uncertainty".into(),
            });
        }
        if uncertainty < 0.0 {
            return Err(Error::Negative {
                context: "opinion uncertainty".into(),
                index: 0,
                value: uncertainty,
            });
        }
        check_simplex("opinion belief", &belief, uncertainty)?;
        check_simplex("opinion base rate", &base_rate, 0.0)?;
        Ok(Opinion {
            belief,
            uncertainty,
            base_rate,
        })
    }

    /// The maximally uncertain opinion: `b = 0`, `u = 1`, uniform base rates.
    pub fn vacuous(k: usize) -> Result<Self> {
        Opinion::new(vec![0.0; k], 1.0, uniform_base_rate(k))
    }

    pub fn belief(&self) -> &[f64] {
        &self.belief
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn base_rate(&self) -> &[f64] {
        &self.base_rate
    }

    pub fn len(&self) -> usize {
        self.belief.len()
    }

    pub fn is_empty(&self) -> bool {
        self.belief.is_empty()
    }

    /// Inverse of [`Evidence::to_opinion`]; undefined for dogmatic opinions
    /// (`u = 0`), which correspond to infinite evidence.
    pub fn to_evidence(&self) -> Result<Evidence> {
        if self.uncertainty <= 0.0 {
            return Err(Error::ZeroUncertainty {
                context: "opinion to evidence".into(),
            });
        }
        let strength = self.len() as f64 / self.uncertainty;
        Evidence::new(self.belief.iter().map(|b| b * strength).collect())
    }

    /// Projected probability `p_k = b_k + a_k · u`.
    pub fn expected_probability(&self) -> Vec<f64> {
        self.belief
            .iter()
            .zip(&self.base_rate)
            .map(|(b, a)| b + a * self.uncertainty)
            .collect()
    }

    /// Index of the largest projected probability; first index wins ties.
    pub fn predicted_class(&self) -> usize {
        let p = self.expected_probability();
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        best
    }
}
