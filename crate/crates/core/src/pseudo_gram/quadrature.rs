//! Composite Gauss–Legendre rules on `[0,1]` and `[0,1]²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `panels` equal subintervals with an `nodes`-point Gauss–Legendre rule on each.
/// Two-dimensional integrals use the tensor product of the same rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RuleDescriptor", into = "RuleDescriptor")]
pub struct QuadratureRule {
    panels: usize,
    nodes: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self { panels: 64, nodes: 8 }
    }
}

impl QuadratureRule {
    pub fn new(panels: usize, nodes: usize) -> Result<Self> {
        if panels == 0 || nodes == 0 {
            return Err(Error::Config(format!(
                "quadrature needs positive panel and node counts, got {panels}x{nodes}"
            )));
        }
        Ok(Self { panels, nodes })
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.panels * self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The same rule with twice as many panels.
    pub fn refined(&self) -> Self {
        Self { panels: 2 * self.panels, nodes: self.nodes }
    }

    /// Nodes and weights on `[0,1]`, ordered by panel then by node.
    pub fn nodes_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let (ref_nodes, ref_weights) = gauss_legendre(self.nodes);
        let h = 1.0 / self.panels as f64;
        let mut xs = Vec::with_capacity(self.len());
        let mut ws = Vec::with_capacity(self.len());
        for p in 0..self.panels {
            let mid = (p as f64 + 0.5) * h;
            for (t, w) in ref_nodes.iter().zip(&ref_weights) {
                xs.push(mid + 0.5 * h * t);
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDescriptor {
    panels: usize,
    nodes: usize,
}

impl TryFrom<RuleDescriptor> for QuadratureRule {
    type Error = Error;

    fn try_from(d: RuleDescriptor) -> Result<Self> {
        Self::new(d.panels, d.nodes)
    }
}

impl From<QuadratureRule> for RuleDescriptor {
    fn from(r: QuadratureRule) -> Self {
        Self { panels: r.panels, nodes: r.nodes }
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1,1]` by Newton iteration
/// on `P_n` from the Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre approximation of `∫₀¹ f`.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, rule: &QuadratureRule) -> Result<f64> {
    let (xs, ws) = rule.nodes_weights();
    let mut total = 0.0;
    for (i, (&x, &w)) in xs.iter().zip(&ws).enumerate() {
        let v = f(x);
        if v.is_nan() {
            return Err(Error::Numeric(format!("integrand is NaN at node {i} (x = {x})")));
        }
        total += w * v;
    }
    Ok(total)
}
