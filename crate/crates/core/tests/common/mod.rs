//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's numerical code; the oracles use
//! their own quadrature, their own partition enumeration and `statrs` for
//! log-gamma.

#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

/// Tanh-sinh quadrature on (0,1), refined level by level until two
/// successive estimates agree. `f` receives `(x, 1 - x)` so integrands can
/// use the complement without cancellation near 1.
pub fn tanh_sinh(f: impl Fn(f64, f64) -> f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let t_max = 4.5;
    let eval = |t: f64| {
        let u = half_pi * t.sinh();
        let x = 1.0 / (1.0 + (-2.0 * u).exp());
        let xc = 1.0 / (1.0 + (2.0 * u).exp());
        let w = half_pi * t.cosh() / (2.0 * u.cosh().powi(2));
        if x <= 0.0 || xc <= 0.0 || w == 0.0 {
            return 0.0;
        }
        w * f(x, xc)
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut t = h;
    while t <= t_max {
        sum += eval(t) + eval(-t);
        t += h;
    }
    let mut prev = sum * h;
    for _ in 0..12 {
        // add the midpoints of the current grid
        let mut t = h / 2.0;
        while t <= t_max {
            sum += eval(t) + eval(-t);
            t += h;
        }
        h /= 2.0;
        let next = sum * h;
        if (next - prev).abs() <= 1e-14 * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

pub fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn ln_beta_pdf(a: f64, b: f64, x: f64, xc: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * xc.ln() - ln_beta_fn(a, b)
}

pub fn hellinger_oracle(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let bc = tanh_sinh(|x, xc| (0.5 * (ln_beta_pdf(a1, b1, x, xc) + ln_beta_pdf(a2, b2, x, xc))).exp());
    (1.0 - bc).max(0.0).sqrt()
}

/// Jensen-Shannon divergence in bits.
pub fn jsd_oracle(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    tanh_sinh(|x, xc| {
        let lp = ln_beta_pdf(a1, b1, x, xc);
        let lq = ln_beta_pdf(a2, b2, x, xc);
        let hi = lp.max(lq);
        let lm = hi + (0.5 * ((lp - hi).exp() + (lq - hi).exp())).ln();
        let term = |l: f64| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() * (l - lm) };
        0.5 * (term(lp) + term(lq)) / std::f64::consts::LN_2
    })
}

/// Bell numbers B(0..=n) from the Bell triangle.
pub fn bell_triangle(n: usize) -> Vec<u64> {
    let mut bells = vec![1u64];
    let mut row = vec![1u64];
    for _ in 1..=n {
        let mut next = vec![*row.last().unwrap()];
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        bells.push(next[0]);
        row = next;
    }
    bells
}

/// All set partitions of `k` items as restricted growth strings.
pub fn growth_strings(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, max: usize, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for b in 0..=max + 1 {
            prefix.push(b);
            rec(prefix, max.max(b), k, out);
            prefix.pop();
        }
    }
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    rec(&mut vec![0], 0, k, &mut out);
    out
}

/// Model-averaged posterior means computed by integrating every block of
/// every partition numerically under a Beta(a, b) prior, with model prior
/// proportional to (number of blocks)^exponent.
pub fn bma_quadrature_oracle(n: &[u64], r: &[u64], a: f64, b: f64, exponent: f64) -> Vec<f64> {
    let k = n.len();
    let block_integrals = |rr: f64, nn: f64| {
        let lik = |x: f64, xc: f64| ((rr + a - 1.0) * x.ln() + (nn - rr + b - 1.0) * xc.ln() - ln_beta_fn(a, b)).exp();
        let z = tanh_sinh(lik);
        let m = tanh_sinh(|x, xc| x * lik(x, xc));
        (z, m / z)
    };
    let mut weights = Vec::new();
    let mut means = Vec::new();
    for labels in growth_strings(k) {
        let blocks = labels.iter().max().unwrap() + 1;
        let mut evidence = (blocks as f64).powf(exponent);
        let mut block_mean = vec![0.0; blocks];
        for (blk, slot) in block_mean.iter_mut().enumerate() {
            let (mut rr, mut nn) = (0.0, 0.0);
            for i in 0..k {
                if labels[i] == blk {
                    rr += r[i] as f64;
                    nn += n[i] as f64;
                }
            }
            let (z, m) = block_integrals(rr, nn);
            evidence *= z;
            *slot = m;
        }
        weights.push(evidence);
        means.push(labels.iter().map(|&l| block_mean[l]).collect::<Vec<_>>());
    }
    let total: f64 = weights.iter().sum();
    (0..k)
        .map(|i| weights.iter().zip(&means).map(|(w, m)| w * m[i]).sum::<f64>() / total)
        .collect()
}

/// Deterministic parameter grid: log-uniform shapes in [0.5, 60].
pub fn beta_pair_grid(count: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        (0.5f64.ln() + u * (120.0f64).ln()).exp()
    };
    (0..count).map(|_| [next(), next(), next(), next()]).collect()
}

/// Posterior means of expit(θ_i) under θ_i ~ N(μ, σ²), μ ~ N(mu0, s0),
/// σ² ~ IG(a, b) with binomial likelihoods, by grid quadrature over
/// (μ, log σ²) and a trapezoid rule over each θ_i given (μ, σ²).
pub fn hierarchical_logit_oracle(n: &[u64], r: &[u64], mu0: f64, s0: f64, a: f64, b: f64) -> Vec<f64> {
    let k = n.len();
    let z: Vec<f64> = (0..161).map(|i| -10.0 + i as f64 * 0.125).collect();
    let zw: Vec<f64> = z.iter().map(|v| (-0.5 * v * v).exp() * 0.125 / (2.0 * std::f64::consts::PI).sqrt()).collect();
    let (mut num, mut den) = (vec![0.0; k], 0.0);
    let mut logs = Vec::new();
    let mut rows = Vec::new();
    for im in 0..=240 {
        let mu = -6.0 + im as f64 * 0.05;
        for il in 0..=440 {
            let l = -14.0 + il as f64 * 0.05;
            let sd = (0.5 * l).exp();
            let mut lw = -0.5 * (mu - mu0).powi(2) / s0 - a * l - b * (-l).exp();
            let mut means = vec![0.0; k];
            for i in 0..k {
                let (mut m, mut e) = (0.0, 0.0);
                for (zz, w) in z.iter().zip(&zw) {
                    let t = mu + sd * zz;
                    let p = 1.0 / (1.0 + (-t).exp());
                    let lik = w * (r[i] as f64 * p.ln() + (n[i] - r[i]) as f64 * (1.0 - p).ln()).exp();
                    m += lik;
                    e += lik * p;
                }
                lw += m.ln();
                means[i] = e / m;
            }
            logs.push(lw);
            rows.push(means);
        }
    }
    let top = logs.iter().cloned().fold(f64::MIN, f64::max);
    for (lw, means) in logs.iter().zip(&rows) {
        let w = (lw - top).exp();
        den += w;
        for i in 0..k {
            num[i] += w * means[i];
        }
    }
    num.iter().map(|v| v / den).collect()
}
