//! Expectations against normal laws (Gauss–Hermite, or Gauss–Legendre
//! panels for integrands with kinks) and finite laws.

use serde::Serialize;

use crate::error::{domain, Error, Result};

pub const DEFAULT_ORDER: usize = 64;

/// Probabilists' Gauss–Hermite rule: `sum w_i f(x_i)` approximates
/// `E[f(X)]` for `X ~ N(0, 1)`, exactly for polynomials of degree below
/// `2 * order`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Starting points are the eigenvalues of the symmetric Jacobi matrix of
/// the probabilists' Hermite recurrence (implicit QL); each is then polished
/// by Newton on the orthonormal Hermite-function recurrence, which also
/// yields the weight.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order < 1 {
        return Err(domain("quadrature order must be at least 1"));
    }
    let n = order;
    let mut diag = vec![0.0; n];
    let mut off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).chain(std::iter::once(0.0)).collect();
    tridiagonal_eigenvalues(&mut diag, &mut off)?;
    diag.sort_by(f64::total_cmp);

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // only the nonnegative half; the rule is symmetric
    for i in n / 2..n {
        let (x, w) = polish_root(diag[i], n);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Newton on the orthonormal physicists' Hermite functions at `z = x/sqrt 2`.
/// Returns the probabilists' node and its (unnormalized) weight.
fn polish_root(x: f64, n: usize) -> (f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let nf = n as f64;
    let mut z = x / std::f64::consts::SQRT_2;
    let mut pp = 1.0;
    for _ in 0..20 {
        let (mut p1, mut p2) = (PIM4 * (-0.5 * z * z).exp(), 0.0);
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        }
        pp = (2.0 * nf).sqrt() * p2;
        let step = p1 / pp;
        z -= step;
        if step.abs() <= 1e-16 * z.abs().max(1.0) {
            break;
        }
    }
    (z * std::f64::consts::SQRT_2, 2.0 * (-z * z).exp() / (pp * pp))
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e[0..n-1]` (`e[n-1]` unused), overwriting `d`.
fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(domain("eigenvalue iteration did not converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Gauss–Legendre rule for the uniform law on `[-1, 1]` (weights sum to 1).
/// Roots by Newton on the Legendre recurrence from the Tricomi guesses.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order < 1 {
        return Err(domain("quadrature order must be at least 1"));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule { nodes, weights })
}

/// Composite rule for `E[f(X)]`, `X ~ N(0, 1)`, restricted to
/// `[breaks[0], breaks[last]]`: one Gauss–Legendre panel of `order` nodes
/// between consecutive breakpoints. Exact up to the truncated tails for
/// integrands smooth inside each panel.
pub fn normal_panels(order: usize, breaks: &[f64]) -> Result<QuadratureRule> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[0] < w[1])) || breaks.iter().any(|b| !b.is_finite()) {
        return Err(domain("panel breakpoints must be finite and strictly increasing"));
    }
    let base = gauss_legendre(order)?;
    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut nodes = Vec::with_capacity(order * (breaks.len() - 1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (x, wx) in base.iter() {
            let z = 0.5 * (a + b) + 0.5 * (b - a) * x;
            nodes.push(z);
            weights.push(wx * (b - a) * density(z));
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

/// `E[f(X)]` for `X ~ N(mean, var)`. Any `-inf` evaluation makes the result
/// `-inf`; a NaN evaluation is an error.
pub fn expect_normal(
    mut f: impl FnMut(f64) -> f64,
    mean: f64,
    var: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !(var >= 0.0) {
        return Err(domain(format!("variance must be nonnegative, got {var}")));
    }
    let sd = var.sqrt();
    let mut acc = 0.0;
    let mut neg_inf = false;
    for (x, w) in rule.iter() {
        let at = mean + sd * x;
        let v = f(at);
        if v.is_nan() {
            return Err(Error::NonFiniteIntegrand(at));
        }
        if v == f64::NEG_INFINITY {
            neg_inf = true;
        } else {
            acc += w * v;
        }
    }
    Ok(if neg_inf { f64::NEG_INFINITY } else { acc })
}

/// `sum p_i f(x_i)` over `(p_i, x_i)` atoms, with the same `-inf` rule as
/// [`expect_normal`].
pub fn expect_discrete(mut f: impl FnMut(f64) -> f64, atoms: &[(f64, f64)]) -> Result<f64> {
    check_distribution(atoms)?;
    let mut acc = 0.0;
    let mut neg_inf = false;
    for &(p, x) in atoms {
        let v = f(x);
        if v.is_nan() {
            return Err(Error::NonFiniteIntegrand(x));
        }
        if v == f64::NEG_INFINITY {
            neg_inf = true;
        } else {
            acc += p * v;
        }
    }
    Ok(if neg_inf { f64::NEG_INFINITY } else { acc })
}

fn check_distribution(atoms: &[(f64, f64)]) -> Result<()> {
    if atoms.is_empty() {
        return Err(Error::BadDistribution("no atoms".into()));
    }
    if let Some(&(p, _)) = atoms.iter().find(|(p, _)| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::BadDistribution(format!("invalid probability {p}")));
    }
    let total: f64 = atoms.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::BadDistribution(format!("probabilities sum to {total}")));
    }
    Ok(())
}
