//! Variational (Galerkin) spectral gaps.
//!
//! Test functions are monomials `w^a` in the first `N-1` coordinates of the
//! sum-1 simplex `w = x / (N·E)`. The Gram matrix is a table of Dirichlet
//! moments. The Dirichlet form is assembled bond by bond after conditioning
//! on `t = w_i + w_j`:
//!
//! * `t ~ Beta(2γ, (N-2)γ)`, so `E[t^(m+p) (1-t)^q]` is a Gamma ratio;
//! * `β = w_i / t ~ Beta(γ, γ)` carries the kernel through the pair form
//!   `F[a, b] = ½ ∫∫ q(β, α) Δh_a Δh_b` with `h_(a1,a2)(β) = β^a1 (1-β)^a2`;
//! * the remaining coordinates are `(1 - t)` times a Dirichlet vector.
//!
//! For the star kernel `F` is a Beta covariance in closed form; other
//! kernels get `F` from two-dimensional tanh–sinh quadrature.
//!
//! The smallest generalized eigenvalue over the test space is an upper
//! bound on the gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::DoubleDouble;
use crate::linalg::{generalized_eigen, jacobi_eigen, Mat};
use crate::measures::{dirichlet_moment_poch, MultiIndex};
use crate::models::{ExchangeKernel, Frac};
use crate::quadrature::{jacobi_recurrence, tanh_sinh_nodes};
use crate::scalar::Real;
use crate::simulate::{Topology, TopologyKind};
use crate::special::{ln_gamma, pochhammer};

/// Monomials of total degree `≤ d` in `N-1` variables, graded by degree and
/// descending-lexicographic within a degree. Every degree `d' ≤ d` basis is
/// a prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialBasis {
    pub sites: usize,
    pub degree: usize,
    pub indices: Vec<MultiIndex>,
}

impl PolynomialBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Size of the degree-`d` prefix.
    pub fn prefix_len(&self, d: usize) -> usize {
        binomial(self.sites - 1 + d, d)
    }

    /// Exponent of coordinate `k` (0-based, `k < N`) in basis element `a`.
    #[inline]
    pub fn exponent(&self, a: usize, k: usize) -> u32 {
        if k + 1 == self.sites { 0 } else { self.indices[a].0[k] }
    }

    /// `w^a` at a point of the sum-1 simplex.
    pub fn eval(&self, a: usize, w: &[f64]) -> f64 {
        self.indices[a].0.iter().zip(w).map(|(&e, &x)| x.powi(e as i32)).product()
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

pub fn build_basis(sites: usize, degree: usize) -> Result<PolynomialBasis> {
    if sites < 2 {
        return Err(Error::InvalidParameter("a basis needs N >= 2".into()));
    }
    let vars = sites - 1;
    let mut indices = Vec::new();
    for deg in 0..=degree {
        let mut level = Vec::new();
        compositions(deg as u32, vars, &mut Vec::with_capacity(vars), &mut level);
        level.sort_by(|a: &Vec<u32>, b| b.cmp(a));
        indices.extend(level.into_iter().map(MultiIndex));
    }
    Ok(PolynomialBasis { sites, degree, indices })
}

fn compositions(total: u32, parts: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        cur.push(total);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for first in 0..=total {
        cur.push(first);
        compositions(total - first, parts - 1, cur, out);
        cur.pop();
    }
}

/// Gram and Dirichlet-form matrices on a basis.
#[derive(Clone, Debug)]
pub struct QuadraticForms<T> {
    pub basis: PolynomialBasis,
    pub gram: Mat<T>,
    pub dirichlet: Mat<T>,
    pub quadrature: Option<QuadDiagnostics>,
}

/// Level-doubling record of a quadrature-built pair form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadDiagnostics {
    pub level: u32,
    /// Largest entry change between the last two levels, relative to the
    /// largest entry.
    pub change: f64,
}

/// A gap computation: kernel, bond structure, mean energy and degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProblem {
    pub kernel: ExchangeKernel,
    pub topology: Topology,
    pub mean_energy: f64,
    pub degree: usize,
}

impl GapProblem {
    pub fn new(kernel: ExchangeKernel, topology: Topology, mean_energy: f64, degree: usize) -> Result<Self> {
        if !(mean_energy > 0.0) {
            return Err(Error::InvalidParameter(format!("mean energy must be positive, got {mean_energy}")));
        }
        if degree < 1 {
            return Err(Error::InvalidParameter("degree must be at least 1".into()));
        }
        Ok(GapProblem { kernel, topology, mean_energy, degree })
    }

    pub fn sites(&self) -> usize {
        self.topology.sites
    }

    /// Total energy `N·E`, which scales the Dirichlet form by `(N·E)^m`.
    pub fn total_energy(&self) -> f64 {
        self.mean_energy * self.sites() as f64
    }
}

/// Default degree by system size.
pub fn default_degree(sites: usize) -> usize {
    match sites {
        0..=4 => 4,
        5..=6 => 3,
        _ => 2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Binomial expansion of `(w_i + w_j)^m` into Dirichlet moments (star
    /// kernel, integer `m ≥ 0` only).
    Expansion,
    /// Conditioning on the pair sum.
    PairFactorized,
    /// Expansion when it applies, otherwise pair-factorized.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub route: Route,
    /// Level-doubling tolerance for quadrature-built pair forms.
    pub quad_tol: f64,
    pub max_level: u32,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { route: Route::Auto, quad_tol: 1e-9, max_level: 7 }
    }
}

fn integer_m(m: f64) -> Option<u32> {
    (m >= 0.0 && m.fract() == 0.0 && m <= 64.0).then_some(m as u32)
}

/// Gram matrix `E[w^(a+b)]` under the sum-1 Dirichlet law.
pub fn gram_matrix<T: Real>(basis: &PolynomialBasis, gamma: f64) -> Mat<T> {
    let n = basis.sites;
    let g = T::of(gamma);
    let len = basis.len();
    let mut out = Mat::zeros(len);
    let mut k = vec![0u32; n];
    for a in 0..len {
        for b in a..len {
            for (l, kl) in k.iter_mut().enumerate() {
                *kl = basis.exponent(a, l) + basis.exponent(b, l);
            }
            let v = dirichlet_moment_poch(g, n, &k);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

/// Pair form indexed by `(a1, a2)` with `a1 + a2 ≤ d`.
#[derive(Clone, Debug)]
pub struct PairTable<T> {
    degree: usize,
    pub matrix: Mat<T>,
    pub diagnostics: Option<QuadDiagnostics>,
}

impl<T: Real> PairTable<T> {
    #[inline]
    pub fn slot(degree: usize, a1: u32, a2: u32) -> usize {
        let s = (a1 + a2) as usize;
        debug_assert!(s <= degree);
        s * (s + 1) / 2 + a2 as usize
    }

    pub fn get(&self, a: (u32, u32), b: (u32, u32)) -> T {
        self.matrix[(Self::slot(self.degree, a.0, a.1), Self::slot(self.degree, b.0, b.1))]
    }

    pub fn exponents(degree: usize) -> Vec<(u32, u32)> {
        let mut v = Vec::new();
        for s in 0..=degree as u32 {
            for a2 in 0..=s {
                v.push((s - a2, a2));
            }
        }
        v
    }

    /// Closed form for the star kernel: `Cov(h_a, h_b)` under Beta(γ, γ).
    pub fn star(gamma: f64, degree: usize) -> Self {
        let g = T::of(gamma);
        let e = Self::exponents(degree);
        let mean = |a1: u32, a2: u32| pochhammer(g, a1) * pochhammer(g, a2) / pochhammer(g + g, a1 + a2);
        let matrix = Mat::from_fn(e.len(), |i, j| {
            let (a, b) = (e[i], e[j]);
            mean(a.0 + b.0, a.1 + b.1) - mean(a.0, a.1) * mean(b.0, b.1)
        });
        PairTable { degree, matrix, diagnostics: None }
    }

    /// Quadrature route for any kernel.
    pub fn quadrature(kernel: &ExchangeKernel, degree: usize, tol: f64, max_level: u32) -> Result<Self> {
        let e = Self::exponents(degree);
        let pf = pair_form(
            kernel,
            e.len(),
            |b, out| {
                for (slot, &(a1, a2)) in e.iter().enumerate() {
                    out[slot] = b.v.powi(a1 as i32) * b.c.powi(a2 as i32);
                }
            },
            tol,
            max_level,
        )?;
        Ok(PairTable {
            degree,
            matrix: pf.matrix.map(T::of),
            diagnostics: Some(QuadDiagnostics { level: pf.level, change: pf.change }),
        })
    }
}

/// `F_kl = ½ ∫∫ q(β, α) (g_k(α) - g_k(β)) (g_l(α) - g_l(β)) dα dβ`.
#[derive(Clone, Debug)]
pub struct PairForm {
    pub matrix: Mat<f64>,
    pub level: u32,
    pub change: f64,
}

fn beta_nodes(level: u32) -> Vec<(Frac, f64)> {
    let mut out = Vec::new();
    for n in tanh_sinh_nodes(0.0, 0.5, level) {
        let b = if n.from_a <= n.to_b {
            Frac::split(n.from_a, 1.0 - n.from_a)
        } else {
            Frac::split(0.5 - n.to_b, 0.5 + n.to_b)
        };
        out.push((b, n.w));
    }
    for n in tanh_sinh_nodes(0.5, 1.0, level) {
        let b = if n.from_a <= n.to_b {
            Frac::split(0.5 + n.from_a, 0.5 - n.from_a)
        } else {
            Frac::split(1.0 - n.to_b, n.to_b)
        };
        out.push((b, n.w));
    }
    out
}

fn pair_form_level(
    kernel: &ExchangeKernel,
    nf: usize,
    eval: &(impl Fn(Frac, &mut [f64]) + Sync),
    level: u32,
) -> Mat<f64> {
    let tri = nf * (nf + 1) / 2;
    let parts: Vec<Vec<f64>> = beta_nodes(level)
        .into_par_iter()
        .map(|(b, wb)| {
            let mut acc = vec![0.0; tri];
            let mut gb = vec![0.0; nf];
            let mut ga = vec![0.0; nf];
            eval(b, &mut gb);
            for (p, wa) in ExchangeKernel::alpha_nodes(b, level) {
                let qw = kernel.q(b, &p) * wa;
                if qw == 0.0 {
                    continue;
                }
                eval(p.a, &mut ga);
                for k in 0..nf {
                    ga[k] -= gb[k];
                }
                let mut s = 0;
                for k in 0..nf {
                    let dk = ga[k] * qw;
                    for l in k..nf {
                        acc[s] += dk * ga[l];
                        s += 1;
                    }
                }
            }
            for v in &mut acc {
                *v *= wb;
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; tri];
    for p in &parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let mut m = Mat::zeros(nf);
    let mut s = 0;
    for k in 0..nf {
        for l in k..nf {
            m[(k, l)] = 0.5 * total[s];
            m[(l, k)] = 0.5 * total[s];
            s += 1;
        }
    }
    m
}

/// Pair form by tanh–sinh with level doubling from level 4; fails if two
/// successive levels do not agree to `tol` (relative to the largest entry)
/// by `max_level`.
pub fn pair_form(
    kernel: &ExchangeKernel,
    nf: usize,
    eval: impl Fn(Frac, &mut [f64]) + Sync,
    tol: f64,
    max_level: u32,
) -> Result<PairForm> {
    let mut prev = pair_form_level(kernel, nf, &eval, 4);
    let mut level = 5;
    loop {
        let cur = pair_form_level(kernel, nf, &eval, level);
        let scale = (0..nf).map(|k| cur[(k, k)].abs()).fold(1e-300, f64::max);
        let mut change: f64 = 0.0;
        for k in 0..nf {
            for l in 0..nf {
                change = change.max((cur[(k, l)] - prev[(k, l)]).abs());
            }
        }
        change /= scale;
        if change <= tol {
            return Ok(PairForm { matrix: cur, level, change });
        }
        if level >= max_level {
            return Err(Error::QuadratureNonConvergence { change, tol });
        }
        prev = cur;
        level += 1;
    }
}

/// `Γ(2γ+m)Γ(Nγ) / (Γ(2γ)Γ(Nγ+m))`, exact in `T` for integer `m`.
fn moment_prefactor<T: Real>(gamma: f64, sites: usize, m: f64) -> T {
    let ng = gamma * sites as f64;
    if let Some(mi) = integer_m(m) {
        let g = T::of(gamma);
        return pochhammer(g + g, mi) / pochhammer(T::of(ng), mi);
    }
    T::of((ln_gamma(2.0 * gamma + m) + ln_gamma(ng) - ln_gamma(2.0 * gamma) - ln_gamma(ng + m)).exp())
}

/// Assembles the Gram and Dirichlet-form matrices.
pub fn assemble<T: Real>(problem: &GapProblem, opts: &AssemblyOptions) -> Result<QuadraticForms<T>> {
    let n = problem.sites();
    let basis = build_basis(n, problem.degree)?;
    let kernel = &problem.kernel;
    let gamma = kernel.gamma().get();
    let gram = gram_matrix::<T>(&basis, gamma);
    let m = kernel.m();
    let route = match opts.route {
        Route::Auto if kernel.is_star() && integer_m(m).is_some() => Route::Expansion,
        Route::Auto => Route::PairFactorized,
        r => r,
    };
    let (dirichlet, quadrature) = match route {
        Route::Expansion => {
            let mi = integer_m(m).filter(|_| kernel.is_star()).ok_or_else(|| {
                Error::InvalidParameter("expansion route needs the star kernel with integer m >= 0".into())
            })?;
            (assemble_expansion::<T>(&basis, &problem.topology, gamma, mi), None)
        }
        _ => {
            let table = if kernel.is_star() {
                PairTable::<T>::star(gamma, problem.degree)
            } else {
                PairTable::<T>::quadrature(kernel, problem.degree, opts.quad_tol, opts.max_level)?
            };
            let diag = table.diagnostics;
            (assemble_pair::<T>(&basis, &problem.topology, gamma, m, &table), diag)
        }
    };
    let scale = T::of(problem.total_energy()).powf(T::of(m));
    let scale = if m == 0.0 { T::one() } else { scale };
    let dirichlet = Mat::from_fn(basis.len(), |a, b| dirichlet[(a, b)] * scale);
    Ok(QuadraticForms { basis, gram, dirichlet, quadrature })
}

/// Pair-factorized Dirichlet form on the sum-1 simplex (without the
/// `(N·E)^m` factor).
pub fn assemble_pair<T: Real>(
    basis: &PolynomialBasis,
    topo: &Topology,
    gamma: f64,
    m: f64,
    table: &PairTable<T>,
) -> Mat<T> {
    let n = basis.sites;
    let len = basis.len();
    let g = T::of(gamma);
    let pre = moment_prefactor::<T>(gamma, n, m);
    let shift2 = T::of(2.0 * gamma + m);
    let shift_n = T::of(n as f64 * gamma + m);
    let weight = T::of(topo.bond_weight());
    let bonds = topo.bonds();
    let rows: Vec<Vec<T>> = (0..len)
        .into_par_iter()
        .map(|a| {
            let mut row = vec![T::zero(); len];
            for b in a..len {
                let mut acc = T::zero();
                for &(i, j) in &bonds {
                    let ai = (basis.exponent(a, i), basis.exponent(a, j));
                    let bi = (basis.exponent(b, i), basis.exponent(b, j));
                    let p = ai.0 + ai.1 + bi.0 + bi.1;
                    let mut rest = T::one();
                    let mut q = 0;
                    for l in 0..n {
                        if l != i && l != j {
                            let k = basis.exponent(a, l) + basis.exponent(b, l);
                            rest = rest * pochhammer(g, k);
                            q += k;
                        }
                    }
                    let mt = pochhammer(shift2, p) * rest / pochhammer(shift_n, p + q);
                    acc = acc + mt * table.get(ai, bi);
                }
                row[b] = acc * pre * weight;
            }
            row
        })
        .collect();
    let mut out = Mat::zeros(len);
    for a in 0..len {
        for b in a..len {
            out[(a, b)] = rows[a][b];
            out[(b, a)] = rows[a][b];
        }
    }
    out
}

fn binom_t<T: Real>(n: u32, k: u32) -> T {
    T::of_usize(binomial(n as usize, k as usize))
}

/// Integer-`m` star Dirichlet form by expanding
/// `E[s^m (φ_a - E_ij φ_a)(φ_b - E_ij φ_b)]` into Dirichlet moments.
pub fn assemble_expansion<T: Real>(basis: &PolynomialBasis, topo: &Topology, gamma: f64, m: u32) -> Mat<T> {
    let n = basis.sites;
    let len = basis.len();
    let g = T::of(gamma);
    let weight = T::of(topo.bond_weight());
    let bonds = topo.bonds();
    let pair_mean = |a1: u32, a2: u32| pochhammer(g, a1) * pochhammer(g, a2) / pochhammer(g + g, a1 + a2);
    let rows: Vec<Vec<T>> = (0..len)
        .into_par_iter()
        .map(|a| {
            let mut row = vec![T::zero(); len];
            let mut k = vec![0u32; n];
            for b in a..len {
                let mut acc = T::zero();
                for &(i, j) in &bonds {
                    for (l, kl) in k.iter_mut().enumerate() {
                        *kl = basis.exponent(a, l) + basis.exponent(b, l);
                    }
                    let (ki, kj) = (k[i], k[j]);
                    // E[(w_i + w_j)^m w^(a+b)]
                    let mut direct = T::zero();
                    for r in 0..=m {
                        k[i] = ki + r;
                        k[j] = kj + m - r;
                        direct = direct + binom_t::<T>(m, r) * dirichlet_moment_poch(g, n, &k);
                    }
                    // E[(w_i + w_j)^m E_ij w^a E_ij w^b]
                    let ca = pair_mean(basis.exponent(a, i), basis.exponent(a, j));
                    let cb = pair_mean(basis.exponent(b, i), basis.exponent(b, j));
                    let total = m + ki + kj;
                    let mut projected = T::zero();
                    for r in 0..=total {
                        k[i] = r;
                        k[j] = total - r;
                        projected = projected + binom_t::<T>(total, r) * dirichlet_moment_poch(g, n, &k);
                    }
                    k[i] = ki;
                    k[j] = kj;
                    acc = acc + direct - ca * cb * projected;
                }
                row[b] = acc * weight;
            }
            row
        })
        .collect();
    let mut out = Mat::zeros(len);
    for a in 0..len {
        for b in a..len {
            out[(a, b)] = rows[a][b];
            out[(b, a)] = rows[a][b];
        }
    }
    out
}

/// Result of a Galerkin solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEstimateVar {
    /// Smallest nonzero Rayleigh quotient over the full basis.
    pub value: f64,
    pub degree: usize,
    /// `history[k]` is the value at degree `k + 1`.
    pub history: Vec<f64>,
    pub gram_condition: f64,
    pub precision: String,
    pub quadrature: Option<QuadDiagnostics>,
    pub basis: PolynomialBasis,
    /// Coefficients of the minimizer on the non-constant basis elements;
    /// the observable is `Σ c_a (w^a - E[w^a])`.
    pub eigenvector: Vec<f64>,
    /// `E[w^a]` for the non-constant basis elements.
    pub means: Vec<f64>,
}

impl GapEstimateVar {
    /// Change between the last two degrees, used as a plateau diagnostic.
    pub fn plateau_change(&self) -> f64 {
        match self.history.len() {
            0 | 1 => f64::INFINITY,
            k => (self.history[k - 2] - self.history[k - 1]).abs(),
        }
    }

    /// Evaluates the centered minimizer at a configuration with total
    /// energy `total`.
    pub fn observable(&self, x: &[f64], total: f64) -> f64 {
        let d = self.basis.degree + 1;
        let vars = self.basis.sites - 1;
        let mut pows = vec![1.0; vars * d];
        for (l, v) in x[..vars].iter().enumerate() {
            let w = v / total;
            for e in 1..d {
                pows[l * d + e] = pows[l * d + e - 1] * w;
            }
        }
        let mut acc = 0.0;
        for a in 1..self.basis.len() {
            let mono: f64 = self.basis.indices[a].0.iter().enumerate().map(|(l, &e)| pows[l * d + e as usize]).product();
            acc += self.eigenvector[a - 1] * (mono - self.means[a - 1]);
        }
        acc
    }
}

/// Largest admissible equilibrated Gram condition number for scalar `T`.
pub fn condition_limit<T: Real>() -> f64 {
    1e12 * (f64::EPSILON / T::roundoff())
}

/// Smallest eigenvalue of the constant-deflated problem on the first `k`
/// basis elements.
fn solve_block<T: Real>(forms: &QuadraticForms<T>, k: usize) -> Result<(f64, Vec<f64>, f64)> {
    let g = &forms.gram;
    let g00 = g[(0, 0)];
    let gd = Mat::from_fn(k - 1, |a, b| g[(a + 1, b + 1)] - g[(0, a + 1)] * g[(0, b + 1)] / g00);
    let ad = Mat::from_fn(k - 1, |a, b| forms.dirichlet[(a + 1, b + 1)]);
    let sol = generalized_eigen(&ad, &gd, condition_limit::<T>())?;
    let v = sol.vector0();
    Ok((sol.values[0].to64(), v, sol.gram_condition))
}

/// Solves `A v = λ G v` on the mean-zero subspace, at every degree up to the
/// basis degree.
pub fn solve_gap<T: Real>(forms: &QuadraticForms<T>) -> Result<GapEstimateVar> {
    let basis = &forms.basis;
    let mut history = Vec::with_capacity(basis.degree);
    let mut last = (f64::NAN, Vec::new(), f64::NAN);
    for d in 1..=basis.degree {
        let k = basis.prefix_len(d);
        last = solve_block(forms, k)?;
        history.push(last.0);
    }
    let means = (1..basis.len()).map(|a| forms.gram[(0, a)].to64()).collect();
    Ok(GapEstimateVar {
        value: last.0,
        degree: basis.degree,
        history,
        gram_condition: last.2,
        precision: std::any::type_name::<T>().rsplit("::").next().unwrap_or("").to_string(),
        quadrature: forms.quadrature,
        basis: basis.clone(),
        eigenvector: last.1,
        means,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    Extended,
    /// `f64`, retried in double-double if the Gram matrix is too
    /// ill-conditioned.
    Auto,
}

/// Assembles and solves in the requested precision.
pub fn galerkin_gap(problem: &GapProblem, precision: Precision) -> Result<GapEstimateVar> {
    galerkin_gap_with(problem, precision, &AssemblyOptions::default())
}

pub fn galerkin_gap_with(problem: &GapProblem, precision: Precision, opts: &AssemblyOptions) -> Result<GapEstimateVar> {
    match precision {
        Precision::F64 => solve_gap(&assemble::<f64>(problem, opts)?),
        Precision::Extended => solve_gap(&assemble::<DoubleDouble>(problem, opts)?),
        Precision::Auto => match galerkin_gap_with(problem, Precision::F64, opts) {
            Err(Error::BasisDegeneracy { .. }) | Err(Error::NotPositiveDefinite { .. }) => {
                galerkin_gap_with(problem, Precision::Extended, opts)
            }
            r => r,
        },
    }
}

/// Two-site constant `C̃ = λ(E, 2) / Λ_s(2E)`: the smallest nonzero value of
/// `½∫∫ q (Δf)² / Var_μ f` over polynomials `f` of degree `≤ degree`,
/// computed in the orthonormal polynomial basis of `μ = Beta(γ, γ)`.
pub fn two_site_constant(kernel: &ExchangeKernel, degree: usize) -> Result<TwoSite> {
    two_site_constant_with(kernel, degree, 1e-9, 8)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSite {
    pub value: f64,
    pub degree: usize,
    /// `history[k]` is the value at degree `k + 1`.
    pub history: Vec<f64>,
    pub quadrature: QuadDiagnostics,
}

pub fn two_site_constant_with(kernel: &ExchangeKernel, degree: usize, tol: f64, max_level: u32) -> Result<TwoSite> {
    if degree < 1 {
        return Err(Error::InvalidParameter("two-site degree must be at least 1".into()));
    }
    let g = kernel.gamma().get();
    let (_, off) = jacobi_recurrence(degree + 1, g, g);
    // Monic Gegenbauer recurrence on x = 2u - 1, then normalize.
    let norms: Vec<f64> = {
        let mut v = vec![1.0];
        for k in 0..degree {
            v.push(v[k] * off[k] * off[k]);
        }
        v.into_iter().map(|s| 1.0 / s.sqrt()).collect()
    };
    let pf = pair_form(
        kernel,
        degree,
        |u, out| {
            let x = u.v - u.c;
            let (mut p0, mut p1) = (1.0, x);
            out[0] = p1 * norms[1];
            for k in 1..degree {
                let p2 = x * p1 - off[k - 1] * off[k - 1] * p0;
                p0 = p1;
                p1 = p2;
                out[k] = p1 * norms[k + 1];
            }
        },
        tol,
        max_level,
    )?;
    let mut history = Vec::with_capacity(degree);
    for d in 1..=degree {
        let e = jacobi_eigen(&pf.matrix.leading(d), 1e-14)?;
        history.push(e.values[0]);
    }
    Ok(TwoSite {
        value: *history.last().unwrap(),
        degree,
        history,
        quadrature: QuadDiagnostics { level: pf.level, change: pf.change },
    })
}

/// `(κ_m, κ̃_m)`: three-site star gaps at total energy 1, nearest-neighbour
/// and long-range.
pub fn kappa(m: f64, gamma: f64, degree: usize) -> Result<(GapEstimateVar, GapEstimateVar)> {
    if degree < 2 {
        return Err(Error::InvalidParameter("kappa needs degree >= 2".into()));
    }
    let kernel = crate::models::star_kernel(m, crate::measures::GammaShape::new(gamma)?);
    let nn = GapProblem::new(kernel, Topology::new(TopologyKind::NearestNeighbor, 3)?, 1.0 / 3.0, degree)?;
    let lr = GapProblem::new(kernel, Topology::new(TopologyKind::LongRange, 3)?, 1.0 / 3.0, degree)?;
    Ok((galerkin_gap(&nn, Precision::Auto)?, galerkin_gap(&lr, Precision::Auto)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GammaShape;
    use crate::models::{kmp_kernel, star_kernel, stick_kernel};
    use approx::assert_relative_eq;

    fn star(m: f64, g: f64) -> ExchangeKernel {
        star_kernel(m, GammaShape::new(g).unwrap())
    }

    fn problem(k: ExchangeKernel, kind: TopologyKind, n: usize, e: f64, d: usize) -> GapProblem {
        GapProblem::new(k, Topology::new(kind, n).unwrap(), e, d).unwrap()
    }

    #[test]
    fn basis_sizes_and_order() {
        assert_eq!(build_basis(2, 1).unwrap().len(), 2);
        assert_eq!(build_basis(3, 2).unwrap().len(), 6);
        assert_eq!(build_basis(4, 3).unwrap().len(), 20);
        let b = build_basis(3, 2).unwrap();
        let v: Vec<Vec<u32>> = b.indices.iter().map(|m| m.0.clone()).collect();
        assert_eq!(v, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(b.prefix_len(1), 3);
    }

    #[test]
    fn two_site_kmp_gap_is_one() {
        let p = problem(kmp_kernel(), TopologyKind::NearestNeighbor, 2, 1.0, 1);
        let f = assemble::<f64>(&p, &AssemblyOptions::default()).unwrap();
        assert_relative_eq!(f.gram[(1, 1)] * 4.0, 4.0 / 3.0, max_relative = 1e-14);
        let g = solve_gap(&f).unwrap();
        assert_relative_eq!(g.value, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let p = problem(star(0.5, 1.5), TopologyKind::LongRange, 4, 1.0, 3);
        let f = assemble::<f64>(&p, &AssemblyOptions::default()).unwrap();
        for b in 0..f.basis.len() {
            assert!(f.dirichlet[(0, b)].abs() < 1e-12);
        }
    }

    #[test]
    fn routes_agree() {
        for &(m, g, kind) in &[
            (0.0, 1.0, TopologyKind::LongRange),
            (1.0, 0.5, TopologyKind::NearestNeighbor),
            (2.0, 1.5, TopologyKind::LongRange),
        ] {
            let p = problem(star(m, g), kind, 4, 1.0, 3);
            let a = assemble::<f64>(&p, &AssemblyOptions { route: Route::Expansion, ..Default::default() }).unwrap();
            let b =
                assemble::<f64>(&p, &AssemblyOptions { route: Route::PairFactorized, ..Default::default() }).unwrap();
            for i in 0..a.basis.len() {
                for j in 0..a.basis.len() {
                    assert!((a.dirichlet[(i, j)] - b.dirichlet[(i, j)]).abs() < 1e-14, "{m} {g}");
                }
            }
        }
    }

    #[test]
    fn quadrature_pair_table_matches_star_closed_form() {
        let k = star(1.0, 1.0);
        let q = PairTable::<f64>::quadrature(&k, 3, 1e-11, 8).unwrap();
        let c = PairTable::<f64>::star(1.0, 3);
        for i in 0..c.matrix.dim() {
            for j in 0..c.matrix.dim() {
                assert!((q.matrix[(i, j)] - c.matrix[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stick_one_equals_star_one() {
        let a = galerkin_gap(&problem(stick_kernel(1.0).unwrap(), TopologyKind::NearestNeighbor, 3, 1.0, 3), Precision::F64)
            .unwrap();
        let b = galerkin_gap(&problem(star(1.0, 1.0), TopologyKind::NearestNeighbor, 3, 1.0, 3), Precision::F64).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-9);
    }

    #[test]
    fn long_range_exact_value() {
        let g = galerkin_gap(&problem(kmp_kernel(), TopologyKind::LongRange, 3, 1.0, 2), Precision::F64).unwrap();
        assert_relative_eq!(g.value, 4.0 / 9.0, max_relative = 1e-10);
        assert!(g.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn extended_precision_agrees() {
        let p = problem(star(1.0, 1.0), TopologyKind::LongRange, 3, 1.0 / 3.0, 4);
        let a = galerkin_gap(&p, Precision::F64).unwrap();
        let b = galerkin_gap(&p, Precision::Extended).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-10);
    }

    #[test]
    fn two_site_star_is_one() {
        for g in [0.5, 1.0, 2.0] {
            let t = two_site_constant(&star(0.0, g), 6).unwrap();
            assert_relative_eq!(t.value, 1.0, max_relative = 1e-8);
        }
    }
}
