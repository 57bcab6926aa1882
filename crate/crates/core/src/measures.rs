//! The conditioned product-Gamma law on the constant-energy simplex and its
//! Dirichlet / Beta building blocks.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{ln_beta, ln_gamma, pochhammer};

/// Shape `γ > 0` of the one-site Gamma(γ, 1) law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaShape(f64);

impl GammaShape {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(GammaShape(gamma))
        } else {
            Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// `N` sites carrying total energy `N·E`, distributed by the product Gamma
/// law conditioned on the sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexLaw {
    pub gamma: GammaShape,
    pub mean_energy: f64,
    pub sites: usize,
}

impl SimplexLaw {
    pub fn new(gamma: f64, mean_energy: f64, sites: usize) -> Result<Self> {
        if !(mean_energy > 0.0 && mean_energy.is_finite()) {
            return Err(Error::InvalidParameter(format!("mean energy must be positive, got {mean_energy}")));
        }
        if sites == 0 {
            return Err(Error::InvalidParameter("need at least one site".into()));
        }
        Ok(SimplexLaw { gamma: GammaShape::new(gamma)?, mean_energy, sites })
    }

    pub fn total_energy(&self) -> f64 {
        self.mean_energy * self.sites as f64
    }
}

/// Energies `x_1..x_N`, all positive, summing to `N·E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfiguration {
    pub x: Vec<f64>,
    pub mean_energy: f64,
}

impl EnergyConfiguration {
    pub fn new(x: Vec<f64>, mean_energy: f64) -> Result<Self> {
        let c = EnergyConfiguration { x, mean_energy };
        c.validate(1e-12)?;
        Ok(c)
    }

    pub fn sites(&self) -> usize {
        self.x.len()
    }

    pub fn total(&self) -> f64 {
        self.x.iter().sum()
    }

    /// Checks positivity and conservation of the total to relative `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if let Some(v) = self.x.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidParameter(format!("non-positive energy {v}")));
        }
        let target = self.mean_energy * self.x.len() as f64;
        let drift = (self.total() - target).abs();
        if drift > tol * target {
            return Err(Error::InvalidParameter(format!("total {} differs from {target}", self.total())));
        }
        Ok(())
    }
}

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    /// Rejects negative entries.
    pub fn new(k: &[i64]) -> Result<Self> {
        k.iter()
            .map(|&v| u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("exponent {v} is negative"))))
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Draws `x = N·E·w` with `w` a normalized vector of independent
/// Gamma(γ, 1) variates.
pub fn sample_configuration<R: Rng + ?Sized>(law: &SimplexLaw, rng: &mut R) -> EnergyConfiguration {
    let n = law.sites;
    let total = law.total_energy();
    if n == 1 {
        return EnergyConfiguration { x: vec![total], mean_energy: law.mean_energy };
    }
    let g = Gamma::new(law.gamma.get(), 1.0).expect("validated shape");
    let mut x: Vec<f64> = (0..n).map(|_| g.sample(rng)).collect();
    let s: f64 = x.iter().sum();
    for v in &mut x {
        *v *= total / s;
    }
    EnergyConfiguration { x, mean_energy: law.mean_energy }
}

/// Draws a sum-1 symmetric Dirichlet(γ,…,γ) vector of length `n`.
pub fn sample_simplex<R: Rng + ?Sized>(gamma: GammaShape, n: usize, rng: &mut R) -> Vec<f64> {
    let law = SimplexLaw { gamma, mean_energy: 1.0 / n as f64, sites: n };
    sample_configuration(&law, rng).x
}

/// `E[Π w_i^{k_i}]` for `w ~ Dirichlet(γ,…,γ)` on `N` coordinates; indices
/// shorter than `N` are padded with zeros.
pub fn dirichlet_moment(gamma: GammaShape, n: usize, k: &MultiIndex) -> Result<f64> {
    if k.len() > n {
        return Err(Error::InvalidParameter(format!("{} exponents for {n} sites", k.len())));
    }
    let g = gamma.get();
    let mut l = ln_gamma(n as f64 * g) - ln_gamma(n as f64 * g + k.degree() as f64);
    for &ki in &k.0 {
        if ki > 0 {
            l += ln_gamma(g + ki as f64) - ln_gamma(g);
        }
    }
    Ok(l.exp())
}

/// Same moment as [`dirichlet_moment`] using Pochhammer products in `T`;
/// exact in the sense of carrying `T`'s full precision.
pub fn dirichlet_moment_poch<T: Real>(gamma: T, n: usize, k: &[u32]) -> T {
    let mut num = T::one();
    let mut deg = 0;
    for &ki in k {
        num = num * pochhammer(gamma, ki);
        deg += ki;
    }
    num / pochhammer(gamma * T::of_usize(n), deg)
}

/// `E[α^a (1-α)^b]` for `α ~ Beta(γ, γ)`.
pub fn pair_alpha_moment(gamma: GammaShape, a: u32, b: u32) -> f64 {
    let g = gamma.get();
    (ln_beta(g + a as f64, g + b as f64) - ln_beta(g, g)).exp()
}

/// `E[w_1^p]` for one coordinate of the sum-1 symmetric Dirichlet law, i.e.
/// the `p`-th moment of Beta(γ, (N-1)γ).
pub fn marginal_moment(gamma: GammaShape, n: usize, p: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("marginal needs N >= 2".into()));
    }
    let mut k = vec![0; n];
    k[0] = p;
    dirichlet_moment(gamma, n, &MultiIndex(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(v: f64) -> GammaShape {
        GammaShape::new(v).unwrap()
    }

    #[test]
    fn one_site_is_a_point() {
        let law = SimplexLaw::new(1.0, 5.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(sample_configuration(&law, &mut rng).x, vec![5.0]);
        }
    }

    #[test]
    fn samples_conserve_energy() {
        let law = SimplexLaw::new(0.5, 2.0, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let c = sample_configuration(&law, &mut rng);
            c.validate(1e-12).unwrap();
        }
    }

    #[test]
    fn second_moment_two_sites() {
        let law = SimplexLaw::new(1.0, 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_configuration(&law, &mut rng).x[0];
            s += x * x;
            s2 += x.powi(4);
        }
        let mean = s / n as f64;
        let sd = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 4.0 / 3.0).abs() < 3.0 * sd, "{mean} vs 4/3, sd {sd}");
    }

    #[test]
    fn dirichlet_moment_values() {
        assert_relative_eq!(dirichlet_moment(g(1.3), 4, &MultiIndex(vec![0; 4])).unwrap(), 1.0, max_relative = 1e-14);
        // ∫ u(1-u) du = 1/6
        let (x, w) = crate::quadrature::gauss_legendre(8);
        let oracle: f64 = x.iter().zip(&w).map(|(u, w)| w * u * (1.0 - u)).sum();
        assert_relative_eq!(dirichlet_moment(g(1.0), 2, &MultiIndex(vec![1, 1])).unwrap(), oracle, max_relative = 1e-13);
        assert_relative_eq!(dirichlet_moment(g(0.5), 3, &MultiIndex(vec![2, 0, 0])).unwrap(), 0.2, max_relative = 1e-13);
        assert!(MultiIndex::new(&[1, -1]).is_err());
    }

    #[test]
    fn dirichlet_moment_large_degree_is_finite() {
        let m = dirichlet_moment(g(0.5), 6, &MultiIndex(vec![200, 150, 0, 3, 0, 0])).unwrap();
        assert!(m.is_finite() && m > 0.0);
    }

    #[test]
    fn pochhammer_route_agrees() {
        let k = [3, 0, 2, 1];
        let a = dirichlet_moment(g(1.5), 4, &MultiIndex(k.to_vec())).unwrap();
        let b = dirichlet_moment_poch(1.5f64, 4, &k);
        assert_relative_eq!(a, b, max_relative = 1e-13);
    }

    #[test]
    fn pair_and_marginal_moments() {
        assert_relative_eq!(pair_alpha_moment(g(2.0), 0, 0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(pair_alpha_moment(g(1.0), 1, 1), 1.0 / 6.0, max_relative = 1e-13);
        assert_relative_eq!(pair_alpha_moment(g(1.0), 2, 0), 1.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(marginal_moment(g(1.0), 3, 1).unwrap(), 1.0 / 3.0, max_relative = 1e-13);
        let gm = 1.5;
        assert_relative_eq!(
            marginal_moment(g(gm), 3, 2).unwrap(),
            gm * (gm + 1.0) / (3.0 * gm * (3.0 * gm + 1.0)),
            max_relative = 1e-13
        );
    }
}
