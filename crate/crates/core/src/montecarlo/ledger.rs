//! Feasibility inequalities relating the exponent cap to the block and gap
//! exponents.

use serde::{Deserialize, Serialize};

/// Block exponent `beta`, gap exponent `kappa`, horizon slack `xi`, and
/// collar exponent `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exponents {
    pub beta: f64,
    pub kappa: f64,
    pub xi: f64,
    pub eta: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents {
            beta: 0.9,
            kappa: 0.85,
            xi: 0.05,
            eta: 1.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerCheck {
    pub name: &'static str,
    /// The inequality, as written in the literature.
    pub statement: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

fn strict(name: &'static str, statement: &'static str, lhs: f64, rhs: f64) -> LedgerCheck {
    LedgerCheck {
        name,
        statement,
        lhs,
        rhs,
        satisfied: lhs < rhs,
    }
}

fn between(name: &'static str, statement: &'static str, value: f64, lo: f64, hi: f64) -> LedgerCheck {
    LedgerCheck {
        name,
        statement,
        lhs: value,
        rhs: hi,
        satisfied: lo < value && value < hi,
    }
}

/// Evaluates every inequality for the exponent cap `alpha`.
pub fn exponent_ledger(alpha: f64, e: &Exponents) -> Vec<LedgerCheck> {
    let Exponents { beta, kappa, xi, eta } = *e;
    vec![
        between("beta-range", "0<β<1", beta, 0.0, 1.0),
        between("kappa-below-beta", "0<κ<β", kappa, 0.0, beta),
        between("xi-range", "0<ξ<1", xi, 0.0, 1.0),
        strict("eta-positive", "η>0", 0.0, eta),
        strict(
            "decay-beats-collar",
            "(−1/α*+1)κ + 2 + 2η < 0",
            (1.0 - 1.0 / alpha) * kappa + 2.0 + 2.0 * eta,
            0.0,
        ),
        strict("alpha-block", "α* < κ/(2+4β+κ)", alpha, kappa / (2.0 + 4.0 * beta + kappa)),
        strict("alpha-horizon", "α* < β+κ(1+ξ)−1", alpha, beta + kappa * (1.0 + xi) - 1.0),
        strict("horizon-below-beta", "κ(1+ξ)<β", kappa * (1.0 + xi), beta),
    ]
}
