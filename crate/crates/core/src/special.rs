//! Special functions: log-gamma wrappers, Pochhammer products, Beta laws and
//! complete elliptic integrals.
//!
//! Elliptic integrals use the modulus convention
//! `K(t) = ∫_0^{π/2} (1 - t² sin²θ)^{-1/2} dθ`, so `K(t)` here equals
//! `K(m = t²)` in parameter-convention libraries.

use crate::scalar::Real;

pub use statrs::function::gamma::ln_gamma;

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Rising factorial `(x)_n = x (x+1) ... (x+n-1)`.
pub fn pochhammer<T: Real>(x: T, n: u32) -> T {
    let mut r = T::one();
    let mut y = x;
    for _ in 0..n {
        r = r * y;
        y = y + T::one();
    }
    r
}

/// Density of Beta(a, b) on (0, 1).
pub fn beta_pdf(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return beta_pdf_edge(a, b, u);
    }
    ((a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() - ln_beta(a, b)).exp()
}

/// Beta(a, b) density written with an explicit complement `v = 1 - u`, so
/// that points close to 1 are not rounded onto the endpoint.
pub fn beta_pdf_split(a: f64, b: f64, u: f64, v: f64) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return beta_pdf_edge(a, b, if u <= 0.0 { 0.0 } else { 1.0 });
    }
    ((a - 1.0) * u.ln() + (b - 1.0) * v.ln() - ln_beta(a, b)).exp()
}

fn beta_pdf_edge(a: f64, b: f64, u: f64) -> f64 {
    let s = if u <= 0.0 { a } else { b };
    if s < 1.0 {
        f64::INFINITY
    } else if s > 1.0 {
        0.0
    } else {
        (-ln_beta(a, b)).exp()
    }
}

/// CDF of Beta(a, b).
pub fn beta_cdf(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        statrs::function::beta::beta_reg(a, b, u)
    }
}

/// Arithmetic-geometric mean of `a` and `b`, also returning `Σ 2^(n-1) c_n²`
/// for `n ≥ 1`, which is what the `E` integral needs.
fn agm<T: Real>(a0: T, b0: T) -> (T, T) {
    let half = T::of(0.5);
    let tol = T::of(T::roundoff());
    let (mut a, mut b) = (a0, b0);
    let mut pow = T::one(); // 2^(n-1) at n = 1
    let mut acc = T::zero();
    for _ in 0..80 {
        let c = (a - b) * half;
        acc = acc + pow * c * c;
        let an = (a + b) * half;
        let bn = (a * b).sqrt();
        a = an;
        b = bn;
        pow = pow * T::of(2.0);
        if (a - b).abs() <= tol * a {
            break;
        }
    }
    (a, acc)
}

/// `K` from the complementary modulus `k' = √(1 - t²)`.
pub fn elliptic_k_comp<T: Real>(kp: T) -> T {
    if kp <= T::zero() {
        return T::infinity();
    }
    let (m, _) = agm(T::one(), kp);
    T::FRAC_PI_2() / m
}

/// `E` from the complementary modulus.
pub fn elliptic_e_comp<T: Real>(kp: T) -> T {
    if kp <= T::zero() {
        return T::one();
    }
    let t2 = T::one() - kp * kp;
    let (m, acc) = agm(T::one(), kp);
    let k = T::FRAC_PI_2() / m;
    // c_0² / 2 term plus the AGM tail.
    k * (T::one() - t2 * T::of(0.5) - acc)
}

/// Complete elliptic integral of the first kind, modulus `t ∈ [0, 1)`.
pub fn elliptic_k<T: Real>(t: T) -> Option<T> {
    if t < T::zero() || t >= T::one() {
        return None;
    }
    Some(elliptic_k_comp((T::one() - t * t).sqrt()))
}

/// Complete elliptic integral of the second kind, modulus `t ∈ [0, 1]`.
pub fn elliptic_e<T: Real>(t: T) -> Option<T> {
    if t < T::zero() || t > T::one() {
        return None;
    }
    Some(elliptic_e_comp((T::one() - t * t).max(T::zero()).sqrt()))
}
