//! Independent oracles: dense-matrix and direct-summation recomputations
//! that share no code with the library beyond reading pmf values.

#![allow(dead_code)]

use be_workbench::TruncatedPmf;

/// Window values renormalized here, not by the library.
pub fn weights(v: &TruncatedPmf) -> Vec<f64> {
    let total: f64 = v.values().iter().sum();
    v.values().iter().map(|p| p / total).collect()
}

/// `E(x)` for `x = 0..N-1`.
pub fn curvature(w: &[f64]) -> Vec<f64> {
    (0..w.len() - 1)
        .map(|x| {
            let prev = if x == 0 { 0.0 } else { w[x - 1] / w[x] };
            w[x] / w[x + 1] - prev
        })
        .collect()
}

pub fn c_inf(w: &[f64]) -> f64 {
    curvature(w).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn mean_of(w: &[f64]) -> f64 {
    w.iter().enumerate().map(|(x, p)| x as f64 * p).sum()
}

/// Dense truncated Q-matrix: up-rate 1 below `N`, down-rate `w(x-1)/w(x)`.
pub fn q_matrix(w: &[f64]) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut q = vec![vec![0.0; n]; n];
    for x in 0..n {
        if x + 1 < n {
            q[x][x + 1] = 1.0;
        }
        if x > 0 {
            q[x][x - 1] = w[x - 1] / w[x];
        }
        q[x][x] = -(0..n).filter(|&y| y != x).map(|y| q[x][y]).sum::<f64>();
    }
    q
}

pub fn apply(q: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
    q.iter()
        .map(|row| row.iter().zip(f).map(|(a, b)| a * b).sum())
        .collect()
}

fn prod(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn gamma1(q: &[Vec<f64>], f: &[f64], g: &[f64]) -> Vec<f64> {
    let lfg = apply(q, &prod(f, g));
    let lf = apply(q, f);
    let lg = apply(q, g);
    (0..f.len())
        .map(|x| 0.5 * (lfg[x] - f[x] * lg[x] - g[x] * lf[x]))
        .collect()
}

pub fn gamma2(q: &[Vec<f64>], f: &[f64], g: &[f64]) -> Vec<f64> {
    let lg1 = apply(q, &gamma1(q, f, g));
    let a = gamma1(q, f, &apply(q, g));
    let b = gamma1(q, g, &apply(q, f));
    (0..f.len()).map(|x| 0.5 * (lg1[x] - a[x] - b[x])).collect()
}

pub fn dot(w: &[f64], h: &[f64]) -> f64 {
    w.iter().zip(h).map(|(a, b)| a * b).sum()
}

pub fn entropy(w: &[f64], f: &[f64]) -> f64 {
    let m = dot(w, f);
    w.iter().zip(f).map(|(w, f)| w * f * f.ln()).sum::<f64>() - m * m.ln()
}

/// `Σ V(x) f(x+1) [log(f(x+1)/f(x)) − 1 + f(x)/f(x+1)]`.
pub fn rhs_new(w: &[f64], f: &[f64]) -> f64 {
    (0..w.len() - 1)
        .map(|x| {
            let r = f[x] / f[x + 1];
            w[x] * f[x + 1] * (-r.ln() - 1.0 + r)
        })
        .sum()
}

pub fn variance(w: &[f64], f: &[f64]) -> f64 {
    let m = dot(w, f);
    w.iter().zip(f).map(|(w, f)| w * (f - m) * (f - m)).sum()
}

pub fn dirichlet(w: &[f64], f: &[f64]) -> f64 {
    (0..w.len() - 1).map(|x| w[x] * (f[x + 1] - f[x]).powi(2)).sum()
}

/// `D(Π_a ‖ Π_b)`.
pub fn poisson_divergence(a: f64, b: f64) -> f64 {
    a * (a / b).ln() - a + b
}

/// `(1 + s) log(1 + s) − s`.
pub fn bennett(s: f64) -> f64 {
    (1.0 + s) * (1.0 + s).ln() - s
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
