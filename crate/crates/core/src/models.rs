//! Exchange kernels: the rate `Λ(a, b) = Λ_s(a+b) Λ_r(a/(a+b))` and the
//! redistribution law `P(β, dα)` of the fraction kept by the first site.
//!
//! Points in `[0, 1]` are passed around as [`Frac`] (value and complement)
//! and, for the `α` variable, together with accurate distances to the
//! diagonal `α = β` and the anti-diagonal `α = 1 - β`. Those are where the
//! stick and GG2 densities are singular, so quadrature nodes next to them
//! need the distances without cancellation.

use rand::{Rng, RngExt};
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{EnergyConfiguration, GammaShape};
use crate::quadrature::{tanh_sinh_nodes, Estimate};
use crate::special::{beta_pdf_split, elliptic_e_comp, elliptic_k_comp};

/// A number in `[0, 1]` together with its complement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frac {
    pub v: f64,
    pub c: f64,
}

impl Frac {
    pub fn new(v: f64) -> Self {
        Frac { v, c: 1.0 - v }
    }

    pub fn split(v: f64, c: f64) -> Self {
        Frac { v, c }
    }

    pub fn flip(self) -> Self {
        Frac { v: self.c, c: self.v }
    }

    pub fn min(self) -> f64 {
        self.v.min(self.c)
    }

    pub fn max(self) -> f64 {
        self.v.max(self.c)
    }
}

/// An `α` evaluation point relative to a fixed `β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaPoint {
    pub a: Frac,
    /// `|α - β|`
    pub diag: f64,
    /// `|α + β - 1|`
    pub anti: f64,
}

impl AlphaPoint {
    /// Naive construction; fine away from the singular lines.
    pub fn at(beta: f64, alpha: f64) -> Self {
        AlphaPoint { a: Frac::new(alpha), diag: (alpha - beta).abs(), anti: (alpha + beta - 1.0).abs() }
    }
}

/// One exchange on the bond `(i, j)`: site `i` keeps the fraction `alpha`
/// of the pair energy. Indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairUpdate {
    pub i: usize,
    pub j: usize,
    pub alpha: f64,
}

/// `x_i ← α s`, `x_j ← (1-α) s` with `s = x_i + x_j` computed once.
pub fn apply_in_place(x: &mut [f64], u: PairUpdate) {
    let s = x[u.i] + x[u.j];
    let xi = u.alpha * s;
    x[u.i] = xi;
    x[u.j] = s - xi;
}

pub fn apply_update(x: &EnergyConfiguration, u: PairUpdate) -> EnergyConfiguration {
    let mut y = x.clone();
    apply_in_place(&mut y.x, u);
    y
}

/// The exchange kernels. Every kernel here is of mechanical form with
/// `Λ_s(s) = s^m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ExchangeKernel {
    /// Rate `(a+b)^m`, `α ~ Beta(γ, γ)`.
    Star { m: f64, gamma: f64 },
    /// Three-dimensional billiard kernel, reversible for `γ = 3/2`.
    Gg3 { m: f64 },
    /// Two-dimensional billiard kernel, reversible for `γ = 1`.
    Gg2 { m: f64 },
    /// Stick process: `P(β, dα) ∝ m |β - α|^(m-1)`, reversible for `γ = 1`.
    Stick { m: f64 },
}

// √(2/π³)
const SQRT_2_OVER_PI3: f64 = 0.253_974_543_736_963_9;

pub fn star_kernel(m: f64, gamma: GammaShape) -> ExchangeKernel {
    ExchangeKernel::Star { m, gamma: gamma.get() }
}

pub fn kmp_kernel() -> ExchangeKernel {
    ExchangeKernel::Star { m: 0.0, gamma: 1.0 }
}

pub fn gg3_kernel() -> ExchangeKernel {
    ExchangeKernel::Gg3 { m: 0.5 }
}

pub fn gg2_kernel() -> ExchangeKernel {
    ExchangeKernel::Gg2 { m: 0.5 }
}

pub fn stick_kernel(m: f64) -> Result<ExchangeKernel> {
    if m > 0.0 && m.is_finite() {
        Ok(ExchangeKernel::Stick { m })
    } else {
        Err(Error::InvalidParameter(format!("stick exponent must be positive, got {m}")))
    }
}

impl ExchangeKernel {
    /// Builds a kernel from its identifier. `m` defaults per model when
    /// absent (`0` for star, `1/2` for the billiard kernels, `1` for stick);
    /// `gamma` is only read by the star model.
    pub fn from_id(id: &str, m: Option<f64>, gamma: Option<f64>) -> Result<Self> {
        let k = match id {
            "star" => {
                let g = GammaShape::new(gamma.unwrap_or(1.0))?;
                star_kernel(m.unwrap_or(0.0), g)
            }
            "kmp" => {
                if m.is_some_and(|m| m != 0.0) || gamma.is_some_and(|g| g != 1.0) {
                    return Err(Error::InvalidParameter("kmp fixes m = 0 and gamma = 1".into()));
                }
                kmp_kernel()
            }
            "gg3" => ExchangeKernel::Gg3 { m: m.unwrap_or(0.5) },
            "gg2" => ExchangeKernel::Gg2 { m: m.unwrap_or(0.5) },
            "stick" => stick_kernel(m.unwrap_or(1.0))?,
            other => return Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        };
        if let ExchangeKernel::Gg3 { m } | ExchangeKernel::Gg2 { m } = k {
            if !(m >= 0.0) {
                return Err(Error::InvalidParameter(format!("rate exponent must be >= 0, got {m}")));
            }
        }
        Ok(k)
    }

    pub fn id(&self) -> &'static str {
        match self {
            ExchangeKernel::Star { m, gamma } if *m == 0.0 && *gamma == 1.0 => "kmp",
            ExchangeKernel::Star { .. } => "star",
            ExchangeKernel::Gg3 { .. } => "gg3",
            ExchangeKernel::Gg2 { .. } => "gg2",
            ExchangeKernel::Stick { .. } => "stick",
        }
    }

    /// Exponent of `Λ_s(s) = s^m`.
    pub fn m(&self) -> f64 {
        match *self {
            ExchangeKernel::Star { m, .. }
            | ExchangeKernel::Gg3 { m }
            | ExchangeKernel::Gg2 { m }
            | ExchangeKernel::Stick { m } => m,
        }
    }

    /// Shape of the reversible product-Gamma law.
    pub fn gamma(&self) -> GammaShape {
        let g = match *self {
            ExchangeKernel::Star { gamma, .. } => gamma,
            ExchangeKernel::Gg3 { .. } => 1.5,
            ExchangeKernel::Gg2 { .. } | ExchangeKernel::Stick { .. } => 1.0,
        };
        GammaShape::new(g).expect("kernel shapes are positive")
    }

    /// Negative rate exponents are allowed for the star model but nothing
    /// proved about them.
    pub fn certified(&self) -> bool {
        self.m() >= 0.0
    }

    pub fn is_star(&self) -> bool {
        matches!(self, ExchangeKernel::Star { .. })
    }

    pub fn lambda_s(&self, s: f64) -> f64 {
        let m = self.m();
        if m == 0.0 { 1.0 } else { s.powf(m) }
    }

    pub fn lambda_r(&self, beta: f64) -> f64 {
        self.lambda_r_frac(Frac::new(beta))
    }

    pub fn lambda_r_frac(&self, b: Frac) -> f64 {
        match *self {
            ExchangeKernel::Star { .. } => 1.0,
            ExchangeKernel::Gg3 { .. } => {
                let hi = b.max();
                (2.0 * std::f64::consts::PI).sqrt() / 6.0 * (0.5 + hi) / hi.sqrt()
            }
            ExchangeKernel::Gg2 { .. } => {
                let (lo, hi) = (b.min(), b.max());
                // Parameter β* = lo/hi, so the modulus is √β* and k'² = 1 - β*.
                let one_minus = (hi - lo) / hi;
                let kp = one_minus.sqrt();
                let e = elliptic_e_comp(kp);
                let k_term = if one_minus > 0.0 { one_minus * elliptic_k_comp(kp) } else { 0.0 };
                (8.0 * hi / std::f64::consts::PI.powi(3)).sqrt() * (2.0 * e - k_term)
            }
            ExchangeKernel::Stick { m } => b.v.powf(m) + b.c.powf(m),
        }
    }

    /// Full rate `Λ(a, b)` for energies `a, b ≥ 0`.
    pub fn rate(&self, a: f64, b: f64) -> f64 {
        let s = a + b;
        if s <= 0.0 {
            return if self.m() == 0.0 && self.is_star() { 1.0 } else { 0.0 };
        }
        if self.is_star() {
            return self.lambda_s(s);
        }
        self.lambda_s(s) * self.lambda_r_frac(Frac::split(a / s, b / s))
    }

    /// `Λ_r(β) · p(β, α)` where `p` is the density of `P(β, dα)`.
    pub fn flux(&self, b: Frac, p: &AlphaPoint) -> f64 {
        match *self {
            ExchangeKernel::Star { gamma, .. } if gamma == 1.0 => 1.0,
            ExchangeKernel::Star { gamma, .. } => beta_pdf_split(gamma, gamma, p.a.v, p.a.c),
            ExchangeKernel::Gg3 { .. } => {
                let r = (p.a.min() / b.min()).sqrt().min(1.0);
                (2.0 * std::f64::consts::PI).sqrt() / 4.0 * r / b.max().sqrt()
            }
            ExchangeKernel::Gg2 { .. } => gg2_density(b, p),
            ExchangeKernel::Stick { m } => {
                if m == 1.0 {
                    1.0
                } else {
                    m * p.diag.powf(m - 1.0)
                }
            }
        }
    }

    /// Density of `P(β, dα)` at `β = a/(a+b)`.
    pub fn alpha_density(&self, a: f64, b: f64, alpha: f64) -> f64 {
        let beta = a / (a + b);
        self.density(beta, alpha)
    }

    /// Density of `P(β, dα)` at `α`.
    pub fn density(&self, beta: f64, alpha: f64) -> f64 {
        let b = Frac::new(beta);
        self.flux(b, &AlphaPoint::at(beta, alpha)) / self.lambda_r_frac(b)
    }

    /// Detailed-balance kernel `q(β, α) = w_γ(β) Λ_r(β) p(β, α)`; symmetric
    /// in its arguments for a reversible kernel.
    pub fn q(&self, b: Frac, p: &AlphaPoint) -> f64 {
        let g = self.gamma().get();
        let w = if g == 1.0 { 1.0 } else { beta_pdf_split(g, g, b.v, b.c) };
        w * self.flux(b, p)
    }

    /// Cut points of the `α` integral where the density has kinks or
    /// singularities.
    pub fn alpha_breaks(beta: f64) -> [f64; 3] {
        [beta, 1.0 - beta, 0.5]
    }

    /// Tanh–sinh nodes for `∫_0^1 dα` at fixed `β`, split at
    /// `{β, 1-β, 1/2}`, with accurate diagonal distances.
    pub fn alpha_nodes(b: Frac, level: u32) -> Vec<(AlphaPoint, f64)> {
        #[derive(Clone, Copy)]
        struct Cut {
            f: Frac,
            diag: bool,
            anti: bool,
        }
        let mut cuts = vec![
            Cut { f: Frac::split(0.0, 1.0), diag: false, anti: false },
            Cut { f: Frac::split(0.5, 0.5), diag: false, anti: false },
            Cut { f: b, diag: true, anti: false },
            Cut { f: b.flip(), diag: false, anti: true },
            Cut { f: Frac::split(1.0, 0.0), diag: false, anti: false },
        ];
        cuts.sort_by(|x, y| x.f.v.partial_cmp(&y.f.v).unwrap());
        let mut merged: Vec<Cut> = Vec::with_capacity(5);
        for c in cuts {
            match merged.last_mut() {
                Some(l) if l.f.v == c.f.v => {
                    l.diag |= c.diag;
                    l.anti |= c.anti;
                }
                _ => merged.push(c),
            }
        }
        let mut out = Vec::new();
        for w in merged.windows(2) {
            let (l, r) = (w[0], w[1]);
            for n in tanh_sinh_nodes(l.f.v, r.f.v, level) {
                let a = if n.from_a <= n.to_b {
                    Frac::split(l.f.v + n.from_a, l.f.c - n.from_a)
                } else {
                    Frac::split(r.f.v - n.to_b, r.f.c + n.to_b)
                };
                let diag = if l.diag {
                    n.from_a
                } else if r.diag {
                    n.to_b
                } else if a.v > b.v {
                    a.v - b.v
                } else {
                    b.v - a.v
                };
                let anti = if l.anti {
                    n.from_a
                } else if r.anti {
                    n.to_b
                } else if a.v > b.c {
                    a.v - b.c
                } else {
                    b.c - a.v
                };
                out.push((AlphaPoint { a, diag, anti }, n.w));
            }
        }
        out
    }

    /// `∫_0^1 f(α) dα` at fixed `β` with level doubling until two levels agree
    /// to `tol`.
    pub fn integrate_alpha(b: Frac, f: impl Fn(&AlphaPoint) -> f64, tol: f64) -> Result<Estimate> {
        let eval = |lvl| Self::alpha_nodes(b, lvl).iter().map(|(p, w)| w * f(p)).sum::<f64>();
        let mut prev = eval(3);
        for level in 4..=10 {
            let cur = eval(level);
            let change = (cur - prev).abs();
            if change <= tol * (1.0 + cur.abs()) {
                return Ok(Estimate { value: cur, change, level });
            }
            prev = cur;
        }
        Err(Error::QuadratureNonConvergence { change: (eval(10) - eval(9)).abs(), tol })
    }

    /// `∫_0^1 p(β, α) dα`, which must be 1.
    pub fn normalization(&self, beta: f64, tol: f64) -> Result<Estimate> {
        let b = Frac::new(beta);
        let lr = self.lambda_r_frac(b);
        Self::integrate_alpha(b, |p| self.flux(b, p) / lr, tol)
    }

    /// Largest `|q(β, α) - q(α, β)|` over the off-diagonal points of an
    /// `n × n` interior grid.
    pub fn detailed_balance_defect(&self, n: usize) -> f64 {
        let pts: Vec<f64> = (0..n).map(|i| (i as f64 + 0.37) / n as f64).collect();
        let mut worst: f64 = 0.0;
        for (i, &b) in pts.iter().enumerate() {
            for (j, &a) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let l = self.q(Frac::new(b), &AlphaPoint::at(b, a));
                let r = self.q(Frac::new(a), &AlphaPoint::at(a, b));
                let scale = 1.0f64.max(l.abs());
                worst = worst.max((l - r).abs() / scale);
            }
        }
        worst
    }

    /// Draws `α` from `P(β, ·)` at `β = a/(a+b)`.
    pub fn sample_alpha<R: Rng + ?Sized>(&self, a: f64, b: f64, rng: &mut R) -> f64 {
        let s = a + b;
        let beta = if s > 0.0 { Frac::split(a / s, b / s) } else { Frac::new(0.5) };
        self.sample_alpha_frac(beta, rng)
    }

    pub fn sample_alpha_frac<R: Rng + ?Sized>(&self, b: Frac, rng: &mut R) -> f64 {
        match *self {
            ExchangeKernel::Star { gamma, .. } => {
                if gamma == 1.0 {
                    rng.random::<f64>()
                } else {
                    Beta::new(gamma, gamma).expect("positive shape").sample(rng)
                }
            }
            ExchangeKernel::Gg3 { .. } => {
                // Envelope: the uniform density bounds min(1, √(α∧/β∧)).
                let lo = b.min();
                loop {
                    let alpha: f64 = rng.random();
                    let accept = ((alpha.min(1.0 - alpha)) / lo).sqrt().min(1.0);
                    if rng.random::<f64>() < accept {
                        return alpha;
                    }
                }
            }
            ExchangeKernel::Gg2 { .. } => sample_gg2(b, rng),
            ExchangeKernel::Stick { m } => {
                let left = b.v.powf(m);
                let right = b.c.powf(m);
                let u: f64 = rng.random();
                let r = rng.random::<f64>().powf(1.0 / m);
                if u * (left + right) < left {
                    b.v - b.v * r
                } else {
                    b.v + b.c * r
                }
            }
        }
    }
}

/// The four-branch GG2 density `P̃(β, α) = Λ_r(β) p(β, α)`.
///
/// In every branch the complementary modulus satisfies
/// `k'² = |α + β - 1| / D` with `D` one of `1-β, 1-α, α, β`.
fn gg2_density(b: Frac, p: &AlphaPoint) -> f64 {
    let (lo, hi) = (b.min(), b.max());
    let alpha = p.a.v;
    let d = if alpha <= lo {
        b.c
    } else if alpha >= hi {
        b.v
    } else if b.v < 0.5 {
        p.a.c
    } else {
        p.a.v
    };
    if p.anti <= 0.0 {
        return f64::INFINITY;
    }
    let kp = (p.anti / d).min(1.0).sqrt();
    SQRT_2_OVER_PI3 / d.sqrt() * elliptic_k_comp(kp)
}

/// Rejection sampler for GG2. Since `AGM(1, k') ≥ √k'`, `K ≤ (π/2) k'^(-1/2)`,
/// and in every branch `D ≥ |α + β - 1|`; so `P̃ ≤ √(2/π³)(π/2)|α+β-1|^(-1/2)`.
fn sample_gg2<R: Rng + ?Sized>(b: Frac, rng: &mut R) -> f64 {
    let pivot = b.flip(); // the singular point α = 1 - β
    let c = SQRT_2_OVER_PI3 * std::f64::consts::FRAC_PI_2;
    let (wl, wr) = (pivot.v.sqrt(), pivot.c.sqrt());
    loop {
        let u2 = rng.random::<f64>();
        let r = u2 * u2;
        let (point, dist) = if rng.random::<f64>() * (wl + wr) < wl {
            let d = pivot.v * r;
            (AlphaPoint { a: Frac::split(pivot.v - d, pivot.c + d), diag: 0.0, anti: d }, d)
        } else {
            let d = pivot.c * r;
            (AlphaPoint { a: Frac::split(pivot.v + d, pivot.c - d), diag: 0.0, anti: d }, d)
        };
        if dist <= 0.0 {
            continue;
        }
        let env = c / dist.sqrt();
        if rng.random::<f64>() * env < gg2_density(b, &point) {
            return point.a.v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn update_examples() {
        let x = EnergyConfiguration { x: vec![1.0, 1.0], mean_energy: 1.0 };
        assert_eq!(apply_update(&x, PairUpdate { i: 0, j: 1, alpha: 0.5 }).x, vec![1.0, 1.0]);
        let x = EnergyConfiguration { x: vec![2.0, 0.5, 1.0], mean_energy: 3.5 / 3.0 };
        assert_eq!(apply_update(&x, PairUpdate { i: 0, j: 2, alpha: 0.0 }).x, vec![0.0, 0.5, 3.0]);
    }

    #[test]
    fn star_rates() {
        let k = star_kernel(1.0, GammaShape::new(2.0).unwrap());
        assert_eq!(k.rate(1.0, 1.0), 2.0);
        let k0 = kmp_kernel();
        assert_eq!(k0.rate(0.3, 7.0), 1.0);
        assert_relative_eq!(k0.density(0.2, 0.5), 1.0);
        assert_eq!(k0.id(), "kmp");
    }

    #[test]
    fn gg3_values() {
        let k = gg3_kernel();
        assert_relative_eq!(k.lambda_r(0.5), std::f64::consts::PI.sqrt() / 3.0, max_relative = 1e-14);
        let e = k.normalization(0.3, 1e-12).unwrap();
        assert_relative_eq!(e.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gg2_flux_integrates_to_lambda_r() {
        let k = gg2_kernel();
        for &beta in &[0.2, 0.5, 0.8, 0.05] {
            let e = k.normalization(beta, 1e-12).unwrap();
            assert_relative_eq!(e.value, 1.0, epsilon = 1e-9);
        }
        // Λ_r(1/2) = 4 / π^{3/2}
        assert_relative_eq!(k.lambda_r(0.5), 4.0 / std::f64::consts::PI.powf(1.5), max_relative = 1e-14);
    }

    #[test]
    fn gg2_lower_bound_on_grid() {
        let k = gg2_kernel();
        let floor = (0.5 / std::f64::consts::PI).sqrt();
        for i in 0..200 {
            for j in 0..200 {
                let b = (i as f64 + 0.5) / 200.0;
                let a = (j as f64 + 0.25) / 200.0;
                let v = k.flux(Frac::new(b), &AlphaPoint::at(b, a));
                assert!(v >= floor * (1.0 - 1e-14), "{v} at ({b}, {a})");
            }
        }
    }

    #[test]
    fn stick_values() {
        let k = stick_kernel(1.0).unwrap();
        assert_eq!(k.lambda_r(0.5), 1.0);
        let k2 = stick_kernel(2.0).unwrap();
        assert_relative_eq!(k2.alpha_density(0.0, 1.0, 1.0), 2.0);
        let kh = stick_kernel(0.5).unwrap();
        let e = kh.normalization(0.3, 1e-13).unwrap();
        assert_relative_eq!(e.value, 1.0, epsilon = 1e-10);
        assert!(stick_kernel(0.0).is_err());
    }

    #[test]
    fn detailed_balance() {
        for k in [
            kmp_kernel(),
            star_kernel(1.0, GammaShape::new(0.5).unwrap()),
            gg3_kernel(),
            gg2_kernel(),
            stick_kernel(2.0).unwrap(),
            stick_kernel(0.5).unwrap(),
        ] {
            assert!(k.detailed_balance_defect(60) < 1e-12, "{k:?}");
        }
    }

    #[test]
    fn ids_round_trip() {
        for id in ["star", "kmp", "gg2", "gg3", "stick"] {
            let k = ExchangeKernel::from_id(id, None, None).unwrap();
            if id != "star" {
                assert_eq!(k.id(), id);
            }
        }
        assert!(ExchangeKernel::from_id("zrp", None, None).is_err());
    }
}
