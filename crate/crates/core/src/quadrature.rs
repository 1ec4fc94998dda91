//! Gauss–Legendre rules, adaptive panel integration and deterministic
//! summation.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// n-point rule on [-1, 1]; nodes by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Sum of per-panel |coarse − refined| differences.
    pub error: f64,
}

/// Adaptive composite Gauss–Legendre integration.
///
/// `[a, b]` is first cut into `initial_panels` equal panels; each panel is
/// bisected until the rule on the panel and the rule on its two halves
/// agree to the panel's share of `abs_tol`.
#[derive(Debug, Clone)]
pub struct AdaptiveIntegrator {
    rule: GaussLegendre,
    max_depth: u32,
}

impl AdaptiveIntegrator {
    pub fn new(order: usize) -> Self {
        AdaptiveIntegrator {
            rule: GaussLegendre::new(order),
            max_depth: 40,
        }
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, initial_panels: usize, abs_tol: f64) -> Estimate {
        if a == b {
            return Estimate { value: 0.0, error: 0.0 };
        }
        let panels = initial_panels.max(1);
        let width = (b - a) / panels as f64;
        let mut values = Vec::with_capacity(panels);
        let mut error = 0.0;
        for i in 0..panels {
            let lo = a + width * i as f64;
            let hi = if i + 1 == panels { b } else { lo + width };
            let coarse = self.rule.integrate(lo, hi, f);
            let tol = abs_tol / panels as f64;
            let est = self.refine(f, lo, hi, coarse, tol, 0);
            values.push(est.value);
            error += est.error;
        }
        Estimate {
            value: pairwise_sum(&values),
            error,
        }
    }

    fn refine<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Estimate {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate(a, mid, f);
        let right = self.rule.integrate(mid, b, f);
        let refined = left + right;
        let diff = (refined - whole).abs();
        if diff <= tol || depth >= self.max_depth {
            return Estimate {
                value: refined,
                error: diff,
            };
        }
        let l = self.refine(f, a, mid, left, 0.5 * tol, depth + 1);
        let r = self.refine(f, mid, b, right, 0.5 * tol, depth + 1);
        Estimate {
            value: l.value + r.value,
            error: l.error + r.error,
        }
    }
}

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// slice length, so results are identical however the terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (l, r) = values.split_at(values.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Composite Simpson rule on uniformly spaced samples (odd sample count).
pub fn simpson_uniform(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    assert!(
        n >= 3 && n % 2 == 1,
        "Simpson rule needs an odd number (>= 3) of samples"
    );
    let mut odd = Vec::with_capacity(n / 2);
    let mut even = Vec::with_capacity(n / 2);
    for (i, v) in samples.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd.push(*v);
        } else {
            even.push(*v);
        }
    }
    h / 3.0 * (samples[0] + samples[n - 1] + 4.0 * pairwise_sum(&odd) + 2.0 * pairwise_sum(&even))
}
