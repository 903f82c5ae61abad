//! Fixed composite Gauss–Legendre rule on the unit interval.
//!
//! Beta densities may be unbounded at either endpoint, so panels are graded
//! geometrically toward 0 and 1 and the interior is split uniformly. The rule
//! has 512 nodes in total and is built once.

use std::sync::OnceLock;

const NODES_PER_PANEL: usize = 16;
/// Breakpoints of the graded panels near 0; mirrored near 1.
const GRADED: [f64; 12] = [
    0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2,
];
const INTERIOR_PANELS: usize = 10;

pub const TOTAL_NODES: usize = NODES_PER_PANEL * (2 * (GRADED.len() - 1) + INTERIOR_PANELS);

/// Nodes in (0,1) with their weights.
#[derive(Debug)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

pub fn unit_rule() -> &'static UnitRule {
    static RULE: OnceLock<UnitRule> = OnceLock::new();
    RULE.get_or_init(build_unit_rule)
}

fn build_unit_rule() -> UnitRule {
    let (ref_nodes, ref_weights) = gauss_legendre(NODES_PER_PANEL);

    let lo_edge = GRADED[GRADED.len() - 1];
    let mut breaks: Vec<f64> = GRADED.to_vec();
    let width = (1.0 - 2.0 * lo_edge) / INTERIOR_PANELS as f64;
    for i in 1..INTERIOR_PANELS {
        breaks.push(lo_edge + width * i as f64);
    }
    breaks.extend(GRADED.iter().rev().map(|g| 1.0 - g));

    let mut nodes = Vec::with_capacity(TOTAL_NODES);
    let mut weights = Vec::with_capacity(TOTAL_NODES);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&t, &w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(mid + half * t);
            weights.push(half * w);
        }
    }
    debug_assert_eq!(nodes.len(), TOTAL_NODES);
    UnitRule { nodes, weights }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
