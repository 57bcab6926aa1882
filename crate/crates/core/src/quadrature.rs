//! One-dimensional quadrature rules.
//!
//! * Gauss–Legendre on `[0, 1]` by Newton iteration on `P_n`.
//! * Gauss–Jacobi for Beta(p, q) weights by the Golub–Welsch method.
//! * Tanh–sinh (double-exponential) on `[a, b]` for integrands with endpoint
//!   singularities. Nodes carry their distances to both endpoints, computed
//!   without cancellation, so integrands like `|x - a|^(-1/2)` can be
//!   evaluated accurately arbitrarily close to `a`.

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, Mat};
use crate::special::ln_beta;

/// Three-term recurrence of the monic orthogonal polynomials of the
/// Beta(p, q) law in `x = 2u - 1`: `π_(k+1) = (x - diag[k]) π_k - off[k-1]² π_(k-1)`.
/// Returns `n` diagonal and `n - 1` off-diagonal entries.
pub fn jacobi_recurrence(n: usize, p: f64, q: f64) -> (Vec<f64>, Vec<f64>) {
    // Jacobi weight (1-x)^a (1+x)^b on [-1, 1].
    let a = q - 1.0;
    let b = p - 1.0;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        diag[k] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
    }
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let b2 = if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (s * s * (s + 1.0) * (s - 1.0))
        };
        off[k - 1] = b2.sqrt();
    }
    (diag, off)
}

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Gauss rule for the Beta(p, q) probability measure on `[0, 1]`: returns
/// nodes `u_k` and weights summing to 1, exact for polynomials of degree
/// `2n - 1`.
pub fn gauss_jacobi_beta(n: usize, p: f64, q: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(p > 0.0 && q > 0.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("Beta({p}, {q}) rule with {n} nodes")));
    }
    let (diag, off) = jacobi_recurrence(n, p, q);
    let t = Mat::from_fn(n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    });
    let eig = jacobi_eigen(&t, 1e-15)?;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let v0 = eig.vectors[(0, k)];
        nodes.push(0.5 * (eig.values[k] + 1.0));
        weights.push(v0 * v0);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok((nodes, weights))
}

/// A tanh–sinh node on `[a, b]`.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub x: f64,
    /// `x - a`, computed without cancellation.
    pub from_a: f64,
    /// `b - x`, computed without cancellation.
    pub to_b: f64,
    pub w: f64,
}

const TS_TMAX: f64 = 4.0;

/// Tanh–sinh nodes on `[a, b]` with step `h = 2^-level`.
pub fn tanh_sinh_nodes(a: f64, b: f64, level: u32) -> Vec<Node> {
    let len = b - a;
    let h = 0.5f64.powi(level as i32);
    let kmax = (TS_TMAX / h).ceil() as i64;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut out = Vec::with_capacity(2 * kmax as usize + 1);
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = half_pi * t.sinh();
        let from_a = len / (1.0 + (-2.0 * u).exp());
        let to_b = len / (1.0 + (2.0 * u).exp());
        let cu = u.cosh();
        let w = 0.5 * len * h * half_pi * t.cosh() / (cu * cu);
        if w == 0.0 || !w.is_finite() || from_a <= 0.0 || to_b <= 0.0 {
            continue;
        }
        let x = if from_a < to_b { a + from_a } else { b - to_b };
        out.push(Node { x, from_a, to_b, w });
    }
    out
}

/// Integral estimate with a level-doubling error indicator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Change between the last two levels.
    pub change: f64,
    pub level: u32,
}

/// Adaptive tanh–sinh on `[a, b]`. Stops when two successive levels agree to
/// `tol` (absolute plus relative); errors if `max_level` is reached first.
pub fn tanh_sinh(f: impl Fn(Node) -> f64, a: f64, b: f64, tol: f64, max_level: u32) -> Result<Estimate> {
    if b <= a {
        return Ok(Estimate { value: 0.0, change: 0.0, level: 0 });
    }
    let eval = |lvl| tanh_sinh_nodes(a, b, lvl).into_iter().map(|n| n.w * f(n)).sum::<f64>();
    let mut prev = eval(2);
    let mut level = 3;
    loop {
        let cur = eval(level);
        let change = (cur - prev).abs();
        if change <= tol * (1.0 + cur.abs()) {
            return Ok(Estimate { value: cur, change, level });
        }
        if level >= max_level {
            return Err(Error::QuadratureNonConvergence { change, tol });
        }
        prev = cur;
        level += 1;
    }
}

/// Piecewise tanh–sinh over the sub-intervals of `[a, b]` cut at `breaks`.
pub fn tanh_sinh_pieces(
    f: impl Fn(Node) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
    max_level: u32,
) -> Result<Estimate> {
    let cuts = pieces(a, b, breaks);
    let mut total = Estimate { value: 0.0, change: 0.0, level: 0 };
    for w in cuts.windows(2) {
        let e = tanh_sinh(&f, w[0], w[1], tol, max_level)?;
        total.value += e.value;
        total.change += e.change;
        total.level = total.level.max(e.level);
    }
    Ok(total)
}

/// Sorted, de-duplicated cut points of `[a, b]` including the endpoints.
pub fn pieces(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut cuts = vec![a, b];
    for &c in breaks {
        if c > a && c < b {
            cuts.push(c);
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    cuts
}

/// `E[u^a (1-u)^b]` under Beta(p, q), in closed form.
pub fn beta_moment(p: f64, q: f64, a: f64, b: f64) -> f64 {
    (ln_beta(p + a, q + b) - ln_beta(p, q)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        for k in 0..20 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            assert_relative_eq!(s, 1.0 / (k as f64 + 1.0), max_relative = 1e-14);
        }
        let (x1, w1) = gauss_legendre(1);
        assert_relative_eq!(x1[0], 0.5);
        assert_relative_eq!(w1[0], 1.0);
    }

    #[test]
    fn jacobi_rule_matches_beta_moments() {
        for &(p, q) in &[(1.0, 2.0), (0.5, 0.5), (1.5, 3.0), (2.0, 4.0)] {
            let (x, w) = gauss_jacobi_beta(12, p, q).unwrap();
            for k in 0..24 {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
                assert_relative_eq!(s, beta_moment(p, q, k as f64, 0.0), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let e = tanh_sinh(|n| n.from_a.powf(-0.5) + n.to_b.powf(-0.5), 0.0, 1.0, 1e-13, 9).unwrap();
        assert_relative_eq!(e.value, 4.0, max_relative = 1e-12);
        let e = tanh_sinh(|n| -n.from_a.ln(), 0.0, 1.0, 1e-13, 9).unwrap();
        assert_relative_eq!(e.value, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn pieces_split_and_sum() {
        let e = tanh_sinh_pieces(|n| (n.x - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-13, 9).unwrap();
        assert_relative_eq!(e.value, 0.5 * (0.09 + 0.49), max_relative = 1e-12);
    }
}
