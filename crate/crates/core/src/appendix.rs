//! Three-site constants for the long-range star model with `m = 1`.
//!
//! `J_n` are the Jacobi polynomials orthogonal under `μ = Beta(γ, 2γ)`, the
//! one-site marginal of the three-site Dirichlet law. They satisfy
//! `E[J_n(x_i) | x_j] = ν_n J_n(x_j)`, and the symmetric/antisymmetric sums
//! `F_n, G_n, H_n` split the three-site problem into two tridiagonal
//! quadratic forms in the coefficients:
//!
//! * family A (from `F_k`, `k ≥ 2`): diagonal `(1+2ν_k) p_k`, off-diagonal
//!   `√((1+2ν_k)(1+2ν_(k+1))) |q_k|`;
//! * family B (from `G_k` and `H_k`, `k ≥ 1`): the same with `1 - ν_k`.
//!
//! With `S` the supremum of both forms, `κ̃_1 = (2 - S) / 3`.
//!
//! `p_k` is `E_μ[(1-u) J_k²] / E_μ[J_k²]` and `-q_k` is the square root of the
//! monic recurrence coefficient `b_(k+1)`, which tends to `1/4`. The form
//! [`QForm::Reduced`] drops the `(n + 2γ)` factor under the root; it does not
//! match the definition and is kept only so that certificates derived from
//! it can be reproduced and compared.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::kappa;
use crate::linalg::tridiagonal_max_eigenvalue;
use crate::quadrature::{gauss_jacobi_beta, jacobi_recurrence};
use crate::special::ln_gamma;

/// Closed form used for `q_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QForm {
    /// Agrees with the definition through the Jacobi coefficients.
    Exact,
    /// Missing the `(n + 2γ)` factor.
    Reduced,
}

/// `ν_n = (-1)^n Π_(k<n) (γ+k)/(2γ+k)`; `ν_0 = 1`.
pub fn nu_n(gamma: f64, n: u32) -> f64 {
    let mut r = 1.0;
    for k in 0..n {
        let k = k as f64;
        r *= (gamma + k) / (2.0 * gamma + k);
    }
    if n % 2 == 1 { -r } else { r }
}

/// `p_n = 1/2 + (3γ²/2 - γ) / ((2n+3γ)(2n+3γ-2))`.
pub fn p_n(gamma: f64, n: u32) -> f64 {
    let s = 2.0 * n as f64 + 3.0 * gamma;
    0.5 + (1.5 * gamma * gamma - gamma) / (s * (s - 2.0))
}

/// `q_n = -(1/(2n+3γ)) √((n+1)(n+γ)(n+2γ)(n+3γ-1) / ((2n+3γ+1)(2n+3γ-1)))`.
pub fn q_n(gamma: f64, n: u32) -> f64 {
    let nf = n as f64;
    let s = 2.0 * nf + 3.0 * gamma;
    let num = (nf + 1.0) * (nf + gamma) * (nf + 2.0 * gamma) * (nf + 3.0 * gamma - 1.0);
    -(num / ((s + 1.0) * (s - 1.0))).sqrt() / s
}

/// `q_n` without the `(n + 2γ)` factor; see [`QForm::Reduced`].
pub fn q_n_reduced(gamma: f64, n: u32) -> f64 {
    let nf = n as f64;
    let s = 2.0 * nf + 3.0 * gamma;
    let num = (nf + 1.0) * (nf + gamma) * (nf + 3.0 * gamma - 1.0);
    -(num / ((s + 1.0) * (s - 1.0))).sqrt() / s
}

pub fn q_form(form: QForm, gamma: f64, n: u32) -> f64 {
    match form {
        QForm::Exact => q_n(gamma, n),
        QForm::Reduced => q_n_reduced(gamma, n),
    }
}

/// Tabulated `ν_n, p_n, q_n` for `n ≤ n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstants {
    pub gamma: f64,
    pub form: QForm,
    pub nu: Vec<f64>,
    pub p: Vec<f64>,
    /// `q[0]` is unused and set to 0.
    pub q: Vec<f64>,
}

impl SpectralConstants {
    pub fn new(gamma: f64, n_max: usize, form: QForm) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        let n = n_max as u32 + 1;
        Ok(SpectralConstants {
            gamma,
            form,
            nu: (0..=n).map(|k| nu_n(gamma, k)).collect(),
            p: (0..=n).map(|k| if k == 0 { f64::NAN } else { p_n(gamma, k) }).collect(),
            q: (0..=n).map(|k| if k == 0 { 0.0 } else { q_form(form, gamma, k) }).collect(),
        })
    }

    pub fn n_max(&self) -> usize {
        self.nu.len() - 2
    }
}

/// Coefficients `J_(n,m)`, `m = 0..=n`, of `J_n(u) = Σ J_(n,m) u^m` from the
/// Gamma-function formula with explicit signs.
pub fn jacobi_coefficients(gamma: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![1.0];
    }
    let nf = n as f64;
    let base = ln_gamma(nf + gamma) - ln_gamma(nf + 1.0) - ln_gamma(nf + 3.0 * gamma - 1.0);
    (0..=n)
        .map(|m| {
            let mf = m as f64;
            let ln_binom = ln_gamma(nf + 1.0) - ln_gamma(mf + 1.0) - ln_gamma(nf - mf + 1.0);
            let mag = (base + ln_binom + ln_gamma(nf + mf + 3.0 * gamma - 1.0) - ln_gamma(mf + gamma)).exp();
            if m % 2 == 1 { -mag } else { mag }
        })
        .collect()
}

/// Jacobi polynomials `J_0..J_(n_max)` for `Beta(γ, 2γ)`.
///
/// Values come from the monic three-term recurrence scaled by `J_(n,n)`.
/// The alternating coefficient sums lose digits quickly, so the
/// coefficients (kept up to [`JacobiBasis::DIRECT_MAX`]) serve only as a
/// cross-check.
#[derive(Clone, Debug)]
pub struct JacobiBasis {
    pub gamma: f64,
    pub n_max: usize,
    pub coeffs: Vec<Vec<f64>>,
    /// Leading coefficients `J_(n,n)`.
    pub lead: Vec<f64>,
    rec_a: Vec<f64>,
    rec_b: Vec<f64>,
}

impl JacobiBasis {
    pub const DIRECT_MAX: usize = 30;

    pub fn new(gamma: f64, n_max: usize) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        let coeffs: Vec<Vec<f64>> = (0..=n_max.min(Self::DIRECT_MAX)).map(|n| jacobi_coefficients(gamma, n)).collect();
        let lead = (0..=n_max)
            .map(|n| {
                if n == 0 {
                    return 1.0;
                }
                let nf = n as f64;
                let mag = (ln_gamma(2.0 * nf + 3.0 * gamma - 1.0)
                    - ln_gamma(nf + 1.0)
                    - ln_gamma(nf + 3.0 * gamma - 1.0))
                .exp();
                if n % 2 == 1 { -mag } else { mag }
            })
            .collect();
        // Recurrence in x = 2u - 1, rescaled to u.
        let (diag, off) = jacobi_recurrence(n_max + 1, gamma, 2.0 * gamma);
        let rec_a = diag.iter().map(|d| 0.5 * (d + 1.0)).collect();
        let rec_b = off.iter().map(|o| 0.25 * o * o).collect();
        Ok(JacobiBasis { gamma, n_max, coeffs, lead, rec_a, rec_b })
    }

    pub fn eval(&self, n: usize, u: f64) -> f64 {
        if n == 0 {
            return 1.0;
        }
        let (mut p0, mut p1) = (1.0, u - self.rec_a[0]);
        for k in 1..n {
            let p2 = (u - self.rec_a[k]) * p1 - self.rec_b[k - 1] * p0;
            p0 = p1;
            p1 = p2;
        }
        self.lead[n] * p1
    }

    /// Horner evaluation from the coefficients, for `n ≤ DIRECT_MAX`.
    pub fn eval_direct(&self, n: usize, u: f64) -> f64 {
        self.coeffs[n].iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// `E_μ[J_n²]` by Gauss–Jacobi quadrature.
    pub fn norm_sq(&self, n: usize) -> Result<f64> {
        let (x, w) = gauss_jacobi_beta(n + 2, self.gamma, 2.0 * self.gamma)?;
        Ok(x.iter().zip(&w).map(|(u, w)| w * self.eval(n, *u).powi(2)).sum())
    }

    /// Largest `|E_μ[J_k J_l]| / (‖J_k‖ ‖J_l‖)` over `k ≠ l ≤ n_max`.
    pub fn orthogonality_defect(&self) -> Result<f64> {
        let (x, w) = gauss_jacobi_beta(self.n_max + 2, self.gamma, 2.0 * self.gamma)?;
        let vals: Vec<Vec<f64>> = (0..=self.n_max).map(|n| x.iter().map(|u| self.eval(n, *u)).collect()).collect();
        let inner = |k: usize, l: usize| -> f64 { (0..x.len()).map(|i| w[i] * vals[k][i] * vals[l][i]).sum() };
        let norms: Vec<f64> = (0..=self.n_max).map(|k| inner(k, k).sqrt()).collect();
        let mut worst: f64 = 0.0;
        for k in 0..=self.n_max {
            for l in 0..k {
                worst = worst.max(inner(k, l).abs() / (norms[k] * norms[l]));
            }
        }
        Ok(worst)
    }
}

/// `p_n` from the coefficients: `1 + J_(n+1,n)/J_(n+1,n+1) - J_(n,n-1)/J_(n,n)`.
pub fn p_from_coefficients(gamma: f64, n: usize) -> f64 {
    let a = jacobi_coefficients(gamma, n + 1);
    let b = jacobi_coefficients(gamma, n);
    1.0 + a[n] / a[n + 1] - b[n - 1] / b[n]
}

/// `p_n = E_μ[(1-u) J_n²] / E_μ[J_n²]` by quadrature.
pub fn p_quadrature(basis: &JacobiBasis, n: usize) -> Result<f64> {
    let (x, w) = gauss_jacobi_beta(n + 2, basis.gamma, 2.0 * basis.gamma)?;
    let num: f64 = x.iter().zip(&w).map(|(u, w)| w * (1.0 - u) * basis.eval(n, *u).powi(2)).sum();
    Ok(num / basis.norm_sq(n)?)
}

/// `q_n = (J_(n,n)/J_(n+1,n+1)) √(E_μ[J_(n+1)²] / E_μ[J_n²])` by quadrature.
pub fn q_quadrature(basis: &JacobiBasis, n: usize) -> Result<f64> {
    Ok(basis.lead[n] / basis.lead[n + 1] * (basis.norm_sq(n + 1)? / basis.norm_sq(n)?).sqrt())
}

/// `ν_n = E[J_n(x_2) J_n(x_1)] / E[J_n(x_1)²]` on the three-site simplex,
/// with `x_2 = (1 - x_1) β`, `β ~ Beta(γ, γ)`, by tensor Gauss rules.
pub fn nu_quadrature(basis: &JacobiBasis, n: usize) -> Result<f64> {
    let g = basis.gamma;
    let (x, wx) = gauss_jacobi_beta(n + 2, g, 2.0 * g)?;
    let (b, wb) = gauss_jacobi_beta(n + 2, g, g)?;
    let mut cross = 0.0;
    let mut diag = 0.0;
    for (x1, w1) in x.iter().zip(&wx) {
        let j1 = basis.eval(n, *x1);
        diag += w1 * j1 * j1;
        for (bb, w2) in b.iter().zip(&wb) {
            cross += w1 * w2 * j1 * basis.eval(n, (1.0 - x1) * bb);
        }
    }
    Ok(cross / diag)
}

/// Largest `|∫ J_n((1-x) β) Beta(γ,γ)(dβ) - ν_n J_n(x)|` over a grid of
/// `x ∈ (0, 1)`, using a 64-node Gauss–Jacobi rule in `β`.
pub fn verify_conditional_eigenrelation(basis: &JacobiBasis, n: usize, grid: usize) -> Result<f64> {
    let g = basis.gamma;
    let (b, wb) = gauss_jacobi_beta(64, g, g)?;
    let nu = nu_n(g, n as u32);
    let mut worst: f64 = 0.0;
    for i in 0..grid {
        let x = (i as f64 + 0.5) / grid as f64;
        let lhs: f64 = b.iter().zip(&wb).map(|(bb, w)| w * basis.eval(n, (1.0 - x) * bb)).sum();
        worst = worst.max((lhs - nu * basis.eval(n, x)).abs());
    }
    Ok(worst)
}

/// `F_n, G_n, H_n` at a point of the three-site simplex.
pub fn triple(basis: &JacobiBasis, n: usize, x: [f64; 3]) -> [f64; 3] {
    let j = [basis.eval(n, x[0]), basis.eval(n, x[1]), basis.eval(n, x[2])];
    [j[0] + j[1] + j[2], j[0] - j[2], j[0] - 2.0 * j[1] + j[2]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleReport {
    /// Largest `|F_1|` over the sample points.
    pub f1_max: f64,
    /// Largest normalized inner product between distinct members of
    /// `{F_k, G_k, H_k}` over `k ≤ n_max`.
    pub cross_defect: f64,
}

/// Checks the triple family under the three-site Dirichlet law with tensor
/// Gauss rules exact for the degrees involved.
pub fn verify_triple_basis(basis: &JacobiBasis) -> Result<TripleReport> {
    let g = basis.gamma;
    let n_max = basis.n_max;
    let (x, wx) = gauss_jacobi_beta(n_max + 2, g, 2.0 * g)?;
    let (b, wb) = gauss_jacobi_beta(n_max + 2, g, g)?;
    let fam = 3 * n_max;
    let mut gram = vec![0.0; fam * fam];
    let mut f1_max: f64 = 0.0;
    let mut v = vec![0.0; fam];
    for (x1, w1) in x.iter().zip(&wx) {
        for (bb, w2) in b.iter().zip(&wb) {
            let pt = [*x1, (1.0 - x1) * bb, (1.0 - x1) * (1.0 - bb)];
            f1_max = f1_max.max(triple(basis, 1, pt)[0].abs());
            for k in 1..=n_max {
                let t = triple(basis, k, pt);
                for f in 0..3 {
                    v[3 * (k - 1) + f] = t[f];
                }
            }
            let w = w1 * w2;
            for i in 0..fam {
                for j in 0..fam {
                    gram[i * fam + j] += w * v[i] * v[j];
                }
            }
        }
    }
    let mut cross: f64 = 0.0;
    for i in 0..fam {
        for j in 0..i {
            // F_1 vanishes identically and has no meaningful normalization.
            if i == 0 || j == 0 {
                continue;
            }
            let d = (gram[i * fam + i] * gram[j * fam + j]).sqrt();
            cross = cross.max(gram[i * fam + j].abs() / d);
        }
    }
    Ok(TripleReport { f1_max, cross_defect: cross })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

impl Family {
    pub fn first(self) -> u32 {
        match self {
            Family::A => 2,
            Family::B => 1,
        }
    }

    fn weight(self, nu: f64) -> f64 {
        match self {
            Family::A => 1.0 + 2.0 * nu,
            Family::B => 1.0 - nu,
        }
    }
}

/// Diagonal and off-diagonal of a family's form for `k ≤ n_max`.
pub fn tridiagonal(family: Family, c: &SpectralConstants, n_max: usize) -> (Vec<f64>, Vec<f64>) {
    let ks: Vec<usize> = (family.first() as usize..=n_max).collect();
    let w = |k: usize| family.weight(c.nu[k]);
    let d = ks.iter().map(|&k| w(k) * c.p[k]).collect();
    let e = ks[..ks.len().saturating_sub(1)].iter().map(|&k| (w(k) * w(k + 1)).sqrt() * c.q[k].abs()).collect();
    (d, e)
}

/// Largest eigenvalue of a family's infinite form, bounded above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalSup {
    pub family: Family,
    pub gamma: f64,
    pub n_max: usize,
    /// Largest eigenvalue of the leading `n_max` block (a lower bound on the
    /// supremum).
    pub truncated: f64,
    /// Upper bound on the Gershgorin row sums of the tail block.
    pub tail_bound: f64,
    /// Upper bound on the supremum of the whole form.
    pub certified_upper: f64,
    /// The tail beyond the scanned range is bounded by its limit rather than
    /// by a proven inequality.
    pub semi_certified: bool,
}

/// Rows beyond `n_max` scanned explicitly before switching to the limit.
pub const TAIL_SCAN: usize = 100_000;
const SLACK: f64 = 1e-12;

/// Largest Gershgorin row sum over rows `from..=to`. Row `from` takes
/// `first_extra` in place of its coupling to the row above (`None` keeps it).
fn tail_rows(family: Family, gamma: f64, form: QForm, from: usize, to: usize, first_extra: Option<f64>) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let mut nu_prev = nu_n(gamma, from as u32 - 1);
    let mut nu_k = nu_n(gamma, from as u32);
    for k in from..=to {
        let nu_next = -nu_k * (gamma + k as f64) / (2.0 * gamma + k as f64);
        let (wp, wk, wn) = (family.weight(nu_prev), family.weight(nu_k), family.weight(nu_next));
        let mut row = wk * p_n(gamma, k as u32) + (wk * wn).sqrt() * q_form(form, gamma, k as u32).abs();
        row += match first_extra {
            Some(x) if k == from => x,
            _ => (wp * wk).sqrt() * q_form(form, gamma, k as u32 - 1).abs(),
        };
        worst = worst.max(row);
        nu_prev = nu_k;
        nu_k = nu_next;
    }
    worst
}

/// Limit of the tail row sums: `1/2 + 2 lim |q_n|`.
pub fn row_sum_limit(form: QForm) -> f64 {
    match form {
        QForm::Exact => 1.0,
        QForm::Reduced => 0.5,
    }
}

/// Upper bound on the supremum of a family's form.
///
/// The coupling entry `e` between the leading block and the tail is split
/// as `t|e|` on the last head diagonal and `|e|/t` on the first tail row,
/// which dominates the coupling for any `t > 0`; `t` is chosen on a grid.
/// The head block is then bounded by Sturm bisection and the tail by its
/// Gershgorin row sums, scanned up to [`TAIL_SCAN`] rows past `n_max` and
/// bounded by their limit beyond.
pub fn tridiagonal_sup(family: Family, gamma: f64, n_max: usize, form: QForm) -> Result<TridiagonalSup> {
    if n_max < 4 {
        return Err(Error::InvalidParameter("n_max must be at least 4".into()));
    }
    let c = SpectralConstants::new(gamma, n_max + 1, form)?;
    let (d, e) = tridiagonal(family, &c, n_max);
    let truncated = tridiagonal_max_eigenvalue(&d, &e, 1e-13).1;
    let w = |k: usize| family.weight(c.nu[k]);
    let coupling = (w(n_max) * w(n_max + 1)).sqrt() * c.q[n_max].abs();
    let limit = row_sum_limit(form);
    let tail_rest = tail_rows(family, gamma, form, n_max + 2, n_max + TAIL_SCAN, None).max(limit);
    let mut best = f64::INFINITY;
    let mut best_tail = f64::NAN;
    for i in -40..=40 {
        let t = 2f64.powf(i as f64 / 4.0);
        let mut dh = d.clone();
        *dh.last_mut().unwrap() += t * coupling;
        let head = tridiagonal_max_eigenvalue(&dh, &e, 1e-13).1;
        let first = tail_rows(family, gamma, form, n_max + 1, n_max + 1, Some(coupling / t));
        let tail = first.max(tail_rest);
        let bound = head.max(tail);
        if bound < best {
            best = bound;
            best_tail = tail;
        }
    }
    Ok(TridiagonalSup {
        family,
        gamma,
        n_max,
        truncated,
        tail_bound: best_tail,
        certified_upper: best + SLACK,
        semi_certified: true,
    })
}

/// `κ̃_1` bracketed by the tridiagonal bound from below and the Galerkin
/// value from above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaBracket {
    pub gamma: f64,
    pub n_max: usize,
    pub degree: usize,
    pub lower: f64,
    pub upper: f64,
    /// `(2 - S_n)/3` with `S_n` the truncated supremum: the exact infimum
    /// over polynomials of degree `≤ n_max`, hence also an upper bound.
    pub truncated_upper: f64,
    pub semi_certified: bool,
}

impl KappaBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

pub fn kappa_tilde_1_bracket(gamma: f64, n_max: usize, degree: usize) -> Result<KappaBracket> {
    kappa_tilde_1_bracket_with(gamma, n_max, degree, QForm::Exact)
}

pub fn kappa_tilde_1_bracket_with(gamma: f64, n_max: usize, degree: usize, form: QForm) -> Result<KappaBracket> {
    let a = tridiagonal_sup(Family::A, gamma, n_max, form)?;
    let b = tridiagonal_sup(Family::B, gamma, n_max, form)?;
    let lower = (2.0 - a.certified_upper.max(b.certified_upper)) / 3.0;
    let truncated_upper = (2.0 - a.truncated.max(b.truncated)) / 3.0;
    let upper = kappa(1.0, gamma, degree)?.1.value;
    if lower > upper + 1e-8 {
        return Err(Error::BracketInversion { lower, upper });
    }
    Ok(KappaBracket {
        gamma,
        n_max,
        degree,
        lower,
        upper,
        truncated_upper,
        semi_certified: a.semi_certified || b.semi_certified,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `γ < 2/3`: the max-formulas.
    Small,
    /// `2/3 ≤ γ ≤ 2`.
    Middle,
    /// `γ > 2`.
    Large,
}

impl Regime {
    pub fn of(gamma: f64) -> Self {
        if gamma < 2.0 / 3.0 - 1e-12 {
            Regime::Small
        } else if gamma <= 2.0 {
            Regime::Middle
        } else {
            Regime::Large
        }
    }
}

/// Multiplicative slack on the weights that would otherwise make the
/// expression exactly 1.
pub const ALPHA_SLACK: f64 = 1e-2;

/// `ε(γ) = 1/(1+3γ)`, inside the admissible `(0, 2/(1+3γ))`.
pub fn epsilon(gamma: f64) -> f64 {
    1.0 / (1.0 + 3.0 * gamma)
}

/// Weights `α_n` (family A, `α_1 = 0`) and `β_n` (family B, `β_0 = 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSequences {
    pub gamma: f64,
    pub regime: Regime,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// First `n` from which `|q_n| (1/(1+2|ν_n|) - 1/2)^(-1) < 1/2` holds
    /// for every later `n` up to the scan cap, if any.
    pub n0: Option<usize>,
}

pub const N0_CAP: usize = 10_000;

pub fn certificate_sequences(c: &SpectralConstants) -> CertificateSequences {
    let g = c.gamma;
    let n_max = c.n_max();
    let regime = Regime::of(g);
    let nu = |k: usize| c.nu[k];
    let p = |k: usize| c.p[k];
    let q = |k: usize| c.q[k].abs();
    let mut alpha = vec![1.0; n_max + 1];
    let mut beta = vec![1.0; n_max + 1];
    alpha[0] = 0.0;
    alpha[1] = 0.0;
    beta[0] = 0.0;
    match regime {
        Regime::Small => {
            let gap_a = |k: usize| 1.0 / (1.0 + 2.0 * nu(k)) - 0.5;
            let gap_b = |k: usize| 1.0 / (1.0 - nu(k)) - 0.5;
            for n in 2..=n_max {
                alpha[n] = if n == 2 {
                    (q(2) / gap_a(2)).max(1.0)
                } else if n % 2 == 0 {
                    (2.0 * q(n) / gap_a(n)).max(1.0)
                } else {
                    1.0 / (2.0 * q(n) / gap_a(n + 1)).max(1.0)
                };
            }
            for n in 1..=n_max {
                beta[n] = if n == 1 {
                    (q(1) / gap_b(1)).max(1.0)
                } else if n % 2 == 1 {
                    (2.0 * q(n) / gap_b(n)).max(1.0)
                } else {
                    1.0 / (2.0 * q(n) / gap_b(n + 1)).max(1.0)
                };
            }
        }
        Regime::Middle | Regime::Large => {
            let gap = |k: usize| 1.0 / (1.0 + 2.0 * nu(k)) - p(k);
            alpha[2] = q(2) / gap(2) * (1.0 + ALPHA_SLACK);
            if regime == Regime::Middle && n_max >= 4 {
                alpha[3] = gap(4) / (2.0 * q(3));
                alpha[4] = 2.0 * q(4) / gap(4) * (1.0 + ALPHA_SLACK);
            }
            beta[1] = q(1) * 3.0 * (3.0 * g + 2.0) / (2.0 - epsilon(g));
        }
    }
    let n0 = {
        let crit = |k: u32| {
            let v = nu_n(g, k).abs();
            q_form(c.form, g, k).abs() / (1.0 / (1.0 + 2.0 * v) - 0.5) < 0.5
        };
        let mut start = None;
        for k in 2..=N0_CAP as u32 {
            match (crit(k), start) {
                (true, None) => start = Some(k as usize),
                (false, Some(_)) => start = None,
                _ => {}
            }
        }
        start
    };
    CertificateSequences { gamma: g, regime, alpha, beta, n0 }
}

/// Row expressions of one proposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropReport {
    pub family: Family,
    pub gamma: f64,
    pub n_max: usize,
    pub form: QForm,
    /// `values[i]` belongs to `n = first + i`.
    pub values: Vec<f64>,
    pub max_value: f64,
    pub argmax: usize,
    /// `n` values with expression `≥ 1`.
    pub offending: Vec<usize>,
    /// `(1+2ν_n)(1/2 + |q_n| + |q_(n-1)|)` (or the family-B analogue) at `n_max`.
    pub tail_at_n_max: f64,
    /// Least-squares `L` in `L + c/√n` fitted to that tail expression over
    /// `[n_max/2, n_max]`.
    pub tail_extrapolated: f64,
    /// Exact limit of the tail expression.
    pub tail_limit: f64,
    pub pass: bool,
}

fn prop_report(family: Family, gamma: f64, n_max: usize, form: QForm) -> Result<PropReport> {
    let c = SpectralConstants::new(gamma, n_max + 1, form)?;
    let s = certificate_sequences(&c);
    let w = |k: usize| family.weight(c.nu[k]);
    let seq = match family {
        Family::A => &s.alpha,
        Family::B => &s.beta,
    };
    let first = family.first() as usize;
    let values: Vec<f64> = (first..=n_max)
        .map(|n| {
            let prev = if n > first { c.q[n - 1].abs() * seq[n - 1] } else { 0.0 };
            w(n) * (c.p[n] + c.q[n].abs() / seq[n] + prev)
        })
        .collect();
    let (argmax, max_value) =
        values.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let offending = values.iter().enumerate().filter(|(_, v)| **v >= 1.0).map(|(i, _)| first + i).collect();
    let tail = |n: usize| w(n) * (0.5 + c.q[n].abs() + c.q[n - 1].abs());
    let lo = (n_max / 2).max(first + 1);
    let pts: Vec<(f64, f64)> = (lo..=n_max).map(|n| (1.0 / (n as f64).sqrt(), tail(n))).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let tail_extrapolated = my - sxy / sxx * mx;
    Ok(PropReport {
        family,
        gamma,
        n_max,
        form,
        max_value,
        argmax: first + argmax,
        offending,
        tail_at_n_max: tail(n_max),
        tail_extrapolated,
        tail_limit: row_sum_limit(form),
        pass: max_value < 1.0,
        values,
    })
}

/// `sup_n (1+2ν_n)(p_n + |q_n|/α_n + |q_(n-1)| α_(n-1)) < 1` over `2 ≤ n ≤ n_max`.
pub fn verify_prop_a(gamma: f64, n_max: usize, form: QForm) -> Result<PropReport> {
    prop_report(Family::A, gamma, n_max, form)
}

/// `sup_n (1-ν_n)(p_n + |q_n|/β_n + |q_(n-1)| β_(n-1)) < 1` over `1 ≤ n ≤ n_max`.
pub fn verify_prop_b(gamma: f64, n_max: usize, form: QForm) -> Result<PropReport> {
    prop_report(Family::B, gamma, n_max, form)
}

/// One pointwise inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: String,
    pub gamma: f64,
    pub n: u32,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs` for `lhs < rhs` claims (and so on), positive when the
    /// claim holds.
    pub margin: f64,
    pub pass: bool,
}

fn check(lemma: &str, gamma: f64, n: u32, lhs: f64, rhs: f64, strict: bool) -> LemmaCheck {
    let margin = rhs - lhs;
    let pass = if strict { margin > 0.0 } else { margin >= -1e-14 * rhs.abs().max(1.0) };
    LemmaCheck { lemma: lemma.into(), gamma, n, lhs, rhs, margin, pass }
}

/// Pointwise checks of the monotonicity and bound properties of `ν_n`,
/// `p_n`, `q_n` over `gammas × (1..=n_max)`, each only in its regime.
/// Monotonicity in `γ` compares neighbouring grid values.
pub fn verify_monotonicity_lemmas(gammas: &[f64], n_max: u32, form: QForm) -> Vec<LemmaCheck> {
    let mut out = Vec::new();
    let two_thirds = 2.0 / 3.0;
    let is = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let q = |g: f64, n: u32| q_form(form, g, n).abs();
    let mut grid = gammas.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &g in &grid {
        for n in 1..=n_max {
            out.push(check("nu-decreasing-in-n", g, n, nu_n(g, n + 1).abs(), nu_n(g, n).abs(), true));
            out.push(check("p-positive", g, n, 0.0, p_n(g, n), true));
            if is(g, two_thirds) {
                let d = (p_n(g, n) - 0.5).abs();
                out.push(check("p-constant-at-two-thirds", g, n, d, 1e-12, false));
            } else if g < two_thirds {
                out.push(check("p-increasing-in-n", g, n, p_n(g, n), p_n(g, n + 1), true));
                out.push(check("p-below-half", g, n, p_n(g, n), 0.5, true));
            } else {
                out.push(check("p-decreasing-in-n", g, n, p_n(g, n + 1), p_n(g, n), true));
            }
            let q_start = if g < two_thirds || (g <= 2.0) {
                Some(2)
            } else if g <= 7.0 / 3.0 {
                Some(3)
            } else {
                None
            };
            if let Some(s) = q_start
                && n >= s
            {
                out.push(check("q-decreasing-in-n", g, n, q(g, n + 1), q(g, n), true));
            }
            if g >= 0.2 - 1e-12 {
                out.push(check("q-sqrt-bound", g, n, q(g, n), 1.0 / (4.0 * (n as f64 + g).sqrt()), false));
            }
            if n >= 2 {
                let f = |k: u32| {
                    let a = 2.0 * nu_n(g, k + 1).abs();
                    let b = 2.0 * nu_n(g, k).abs();
                    (1.0 + a) / (1.0 - a) * (1.0 - b) / (1.0 + b)
                };
                out.push(check("nu-ratio-bound", g, n, f(2), f(n), false));
            }
        }
    }
    for pair in grid.windows(2) {
        let (g0, g1) = (pair[0], pair[1]);
        for n in 1..=n_max {
            // |ν_1| = 1/2 for every γ, so only the weak form holds there.
            out.push(check("nu-decreasing-in-gamma", g1, n, nu_n(g1, n).abs(), nu_n(g0, n).abs(), n >= 2));
            if g0 >= 1.0 / 3.0 - 1e-12 {
                out.push(check("p-increasing-in-gamma", g1, n, p_n(g0, n), p_n(g1, n), true));
            }
            if n >= 3 || (n == 2 && g0 >= 0.1) {
                out.push(check("q-decreasing-in-gamma", g1, n, q(g1, n), q(g0, n), true));
            }
        }
    }
    out
}

/// A closed form against an independent computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantCheck {
    pub quantity: String,
    pub gamma: f64,
    pub n: u32,
    pub closed_form: f64,
    pub reference: f64,
    pub error: f64,
    pub tol: f64,
    pub pass: bool,
}

fn constant_check(quantity: &str, gamma: f64, n: u32, closed_form: f64, reference: f64, tol: f64) -> ConstantCheck {
    let error = (closed_form - reference).abs();
    ConstantCheck { quantity: quantity.into(), gamma, n, closed_form, reference, error, tol, pass: error <= tol }
}

/// `ν_n`, `p_n`, `q_n` against quadrature for `1 ≤ n ≤ n_max`, plus the
/// exact values `ν_1 = -1/2` and `p_n(2/3) = 1/2`.
pub fn cross_validate_constants(gammas: &[f64], n_max: usize, tol: f64) -> Result<Vec<ConstantCheck>> {
    let mut out = Vec::new();
    for &g in gammas {
        let basis = JacobiBasis::new(g, n_max + 1)?;
        for n in 1..=n_max {
            let k = n as u32;
            out.push(constant_check("nu", g, k, nu_n(g, k), nu_quadrature(&basis, n)?, tol));
            out.push(constant_check("p", g, k, p_n(g, k), p_quadrature(&basis, n)?, tol));
            out.push(constant_check("q", g, k, q_n(g, k), q_quadrature(&basis, n)?, tol));
        }
        out.push(constant_check("nu", g, 1, nu_n(g, 1), -0.5, 1e-12));
    }
    for n in 1..=n_max as u32 {
        out.push(constant_check("p", 2.0 / 3.0, n, p_n(2.0 / 3.0, n), 0.5, 1e-12));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketCheck {
    pub bracket: KappaBracket,
    pub above_third: bool,
    pub ordered: bool,
    pub narrow: bool,
    pub pass: bool,
}

/// Width allowed between the certified lower bound and the Galerkin value.
pub const BRACKET_WIDTH: f64 = 5e-3;

pub fn check_bracket(gamma: f64, n_max: usize, degree: usize) -> Result<BracketCheck> {
    let b = kappa_tilde_1_bracket(gamma, n_max, degree)?;
    let above_third = b.lower > 1.0 / 3.0;
    let ordered = b.lower <= b.upper + 1e-8;
    let narrow = b.width() < BRACKET_WIDTH;
    Ok(BracketCheck { bracket: b, above_third, ordered, narrow, pass: above_third && ordered && narrow })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixOptions {
    pub bracket_gammas: Vec<f64>,
    pub prop_gammas: Vec<f64>,
    pub lemma_gammas: Vec<f64>,
    pub constant_gammas: Vec<f64>,
    pub n_max: usize,
    pub lemma_n_max: u32,
    pub degree: usize,
    /// Closed form of `q_n` used by the proposition and lemma checks.
    pub form: QForm,
}

impl Default for AppendixOptions {
    fn default() -> Self {
        AppendixOptions {
            bracket_gammas: vec![0.4, 2.0 / 3.0, 1.0, 1.5, 2.0, 3.0],
            prop_gammas: vec![1.0 / 3.0, 0.4, 2.0 / 3.0, 1.0, 1.5, 2.0, 3.0],
            lemma_gammas: vec![0.2, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0, 2.0, 3.0],
            constant_gammas: vec![0.5, 1.0, 1.5],
            n_max: 200,
            lemma_n_max: 50,
            degree: 8,
            form: QForm::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenrelationCheck {
    pub gamma: f64,
    pub n: usize,
    pub defect: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub options: AppendixOptions,
    pub constants: Vec<ConstantCheck>,
    pub eigenrelation: Vec<EigenrelationCheck>,
    pub triple: Vec<TripleReport>,
    pub brackets: Vec<BracketCheck>,
    pub propositions: Vec<PropReport>,
    pub lemmas: Vec<LemmaCheck>,
}

/// Limit the proposition tails must approach.
pub const PROP_TAIL_TARGET: f64 = 0.5;
pub const PROP_TAIL_TOL: f64 = 1e-2;

impl PropReport {
    /// Below 1 on the whole range and tail within tolerance of 1/2.
    pub fn certifies(&self) -> bool {
        self.pass && (self.tail_extrapolated - PROP_TAIL_TARGET).abs() < PROP_TAIL_TOL
    }
}

impl AppendixReport {
    pub fn constants_pass(&self) -> bool {
        self.constants.iter().all(|c| c.pass)
            && self.eigenrelation.iter().all(|c| c.pass)
            && self.triple.iter().all(|t| t.f1_max < 1e-10 && t.cross_defect < 1e-8)
    }

    pub fn brackets_pass(&self) -> bool {
        self.brackets.iter().all(|b| b.pass)
    }

    pub fn propositions_pass(&self) -> bool {
        self.propositions.iter().all(|p| p.certifies())
    }

    pub fn lemmas_pass(&self) -> bool {
        self.lemmas.iter().all(|l| l.pass)
    }

    pub fn pass(&self) -> bool {
        self.constants_pass() && self.brackets_pass() && self.propositions_pass() && self.lemmas_pass()
    }
}

/// Runs every appendix check.
pub fn appendix_suite(opts: &AppendixOptions) -> Result<AppendixReport> {
    use rayon::prelude::*;
    let constants = cross_validate_constants(&opts.constant_gammas, 10, 1e-8)?;
    let mut eigenrelation = Vec::new();
    let mut triple = Vec::new();
    for &g in &opts.constant_gammas {
        let basis = JacobiBasis::new(g, 8)?;
        for n in 1..=8 {
            let defect = verify_conditional_eigenrelation(&basis, n, 50)?;
            eigenrelation.push(EigenrelationCheck { gamma: g, n, defect, pass: defect < 1e-9 });
        }
        triple.push(verify_triple_basis(&JacobiBasis::new(g, 6)?)?);
    }
    let brackets =
        opts.bracket_gammas.par_iter().map(|&g| check_bracket(g, opts.n_max, opts.degree)).collect::<Result<Vec<_>>>()?;
    let mut propositions = Vec::new();
    for &g in &opts.prop_gammas {
        propositions.push(verify_prop_a(g, opts.n_max, opts.form)?);
        propositions.push(verify_prop_b(g, opts.n_max, opts.form)?);
    }
    let lemmas = verify_monotonicity_lemmas(&opts.lemma_gammas, opts.lemma_n_max, opts.form);
    Ok(AppendixReport { options: opts.clone(), constants, eigenrelation, triple, brackets, propositions, lemmas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms_small_cases() {
        for g in [0.3, 1.0, 2.5] {
            assert_relative_eq!(nu_n(g, 1), -0.5, epsilon = 1e-15);
        }
        assert_relative_eq!(p_n(1.0, 1), 8.0 / 15.0, epsilon = 1e-15);
        for n in 1..20 {
            assert_relative_eq!(p_n(2.0 / 3.0, n), 0.5, epsilon = 1e-15);
        }
        assert_relative_eq!(q_n_reduced(1e-12, 3).powi(2), 2.0 / 105.0, max_relative = 1e-9);
        assert_eq!(jacobi_coefficients(1.0, 0), vec![1.0]);
        let j1 = jacobi_coefficients(1.0, 1);
        assert_relative_eq!(j1[1] / j1[0], -3.0, max_relative = 1e-14);
    }

    #[test]
    fn q_tends_to_a_quarter() {
        assert!((q_n(1.0, 100_000).abs() - 0.25).abs() < 1e-5);
        for g in [0.2, 1.0, 3.0] {
            for n in 1..40 {
                let ratio = q_n(g, n) / q_n_reduced(g, n);
                assert_relative_eq!(ratio, (n as f64 + 2.0 * g).sqrt(), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for g in [0.5, 1.0, 1.5] {
            let basis = JacobiBasis::new(g, 11).unwrap();
            for n in 1..=10 {
                assert_relative_eq!(p_n(g, n as u32), p_quadrature(&basis, n).unwrap(), max_relative = 1e-10);
                assert_relative_eq!(p_n(g, n as u32), p_from_coefficients(g, n), max_relative = 1e-10);
                assert_relative_eq!(q_n(g, n as u32), q_quadrature(&basis, n).unwrap(), max_relative = 1e-10);
                assert_relative_eq!(nu_n(g, n as u32), nu_quadrature(&basis, n).unwrap(), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn jacobi_orthogonality_and_recurrence() {
        for g in [0.5, 1.0, 2.0] {
            let basis = JacobiBasis::new(g, 10).unwrap();
            assert!(basis.orthogonality_defect().unwrap() < 1e-10);
            let far = JacobiBasis::new(g, 40).unwrap();
            for n in 0..=8 {
                for u in [0.05f64, 0.3, 0.77] {
                    // Horner is only accurate relative to the size of the terms.
                    let scale: f64 = far.coeffs[n].iter().enumerate().map(|(m, c)| c.abs() * u.powi(m as i32)).sum();
                    assert!((far.eval(n, u) - far.eval_direct(n, u)).abs() < 1e-13 * scale);
                }
            }
        }
    }

    #[test]
    fn conditional_eigenrelation() {
        for g in [0.5, 1.0] {
            let basis = JacobiBasis::new(g, 8).unwrap();
            assert!(verify_conditional_eigenrelation(&basis, 0, 20).unwrap() < 1e-14);
            for n in 1..=8 {
                assert!(verify_conditional_eigenrelation(&basis, n, 50).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn triple_family() {
        let basis = JacobiBasis::new(1.3, 6).unwrap();
        let r = verify_triple_basis(&basis).unwrap();
        assert!(r.f1_max < 1e-12, "{r:?}");
        assert!(r.cross_defect < 1e-10, "{r:?}");
    }

    #[test]
    fn family_b_first_entry() {
        let c = SpectralConstants::new(1.0, 4, QForm::Exact).unwrap();
        let (d, _) = tridiagonal(Family::B, &c, 1);
        assert_relative_eq!(d[0], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn truncated_sup_is_monotone_and_matches_galerkin() {
        let mut prev = 0.0;
        for n in 4..30 {
            let s = tridiagonal_sup(Family::B, 1.0, n, QForm::Exact).unwrap();
            assert!(s.truncated >= prev - 1e-13);
            assert!(s.certified_upper >= s.truncated);
            prev = s.truncated;
        }
        // The degree-8 polynomial space gives the same infimum both ways.
        let a = tridiagonal_sup(Family::A, 1.0, 8, QForm::Exact).unwrap();
        let b = tridiagonal_sup(Family::B, 1.0, 8, QForm::Exact).unwrap();
        let via_forms = (2.0 - a.truncated.max(b.truncated)) / 3.0;
        let kernel = crate::models::kmp_kernel();
        let lr = crate::galerkin::GapProblem::new(
            crate::models::star_kernel(1.0, kernel.gamma()),
            crate::simulate::Topology::long_range(3).unwrap(),
            1.0 / 3.0,
            8,
        )
        .unwrap();
        let via_galerkin = crate::galerkin::galerkin_gap(&lr, crate::galerkin::Precision::Extended).unwrap().value;
        assert_relative_eq!(via_forms, via_galerkin, max_relative = 1e-12);
    }

    #[test]
    fn reduced_q_form_inverts_the_bracket() {
        let r = kappa_tilde_1_bracket_with(1.0, 50, 6, QForm::Reduced);
        assert!(matches!(r, Err(Error::BracketInversion { .. })), "{r:?}");
        let ok = kappa_tilde_1_bracket_with(1.0, 50, 6, QForm::Exact).unwrap();
        assert!(ok.lower <= ok.upper);
    }

    #[test]
    fn certificate_regimes() {
        let c = SpectralConstants::new(1.0, 20, QForm::Exact).unwrap();
        let s = certificate_sequences(&c);
        assert_eq!(s.regime, Regime::Middle);
        assert_eq!(s.alpha[1], 0.0);
        assert_eq!(s.beta[0], 0.0);
        assert!(s.alpha[2..].iter().all(|a| *a > 0.0));
        assert_eq!(Regime::of(0.5), Regime::Small);
        assert_eq!(Regime::of(3.0), Regime::Large);
    }
}
