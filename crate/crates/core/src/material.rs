//! Elasticity tensors and viscoplastic relaxation laws.
//!
//! The constitutive law is the rate form `σ̇ = E ε(u̇) + G(σ, ε(u))`. An
//! [`ElasticTensor`] is the instantaneous response `E`, a [`ViscoplasticLaw`]
//! the inelastic part `G`. Both carry the constants the solvers and the
//! verification suite rely on: the ellipticity constant `m_E`, the max-norm
//! `‖E‖_Q∞` and the Lipschitz constant `L_G`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

use crate::tensor::SymTensor2;

/// Spatial dimension.
pub const DIM: usize = 2;

const MANDEL_INDEX: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
const MANDEL_WEIGHT: [f64; 3] = [1.0, 1.0, std::f64::consts::SQRT_2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("Young's modulus must be positive, got {0}")]
    YoungsModulus(f64),
    #[error("Poisson ratio must lie in (-1, 0.5), got {0}")]
    PoissonRatio(f64),
    #[error("tensor component table lacks the symmetry a_{0} = a_{1}")]
    Asymmetric(String, String),
    #[error("tensor is not elliptic: smallest Mandel eigenvalue {0}")]
    NotElliptic(f64),
    #[error("relaxation rate must be nonnegative, got {0}")]
    Rate(f64),
    #[error("yield stress must be positive, got {0}")]
    YieldStress(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlaneMode {
    #[default]
    PlaneStrain,
    PlaneStress,
}

impl FromStr for PlaneMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plane_strain" | "plane-strain" => Ok(PlaneMode::PlaneStrain),
            "plane_stress" | "plane-stress" => Ok(PlaneMode::PlaneStress),
            _ => Err(format!("expected plane_strain or plane_stress, got '{s}'")),
        }
    }
}

impl fmt::Display for PlaneMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlaneMode::PlaneStrain => "plane_strain",
            PlaneMode::PlaneStress => "plane_stress",
        })
    }
}

/// Components `a_ijkl`, indexed `[i][j][k][l]` with 0-based indices.
pub type ComponentTable = [[[[f64; 2]; 2]; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Representation {
    Isotropic { lambda: f64, mu: f64 },
    Table(ComponentTable),
}

/// A fourth-order elasticity tensor with the major and minor symmetries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticTensor {
    repr: Representation,
    mode: PlaneMode,
    m_e: f64,
    q_inf: f64,
}

impl ElasticTensor {
    /// Isotropic tensor `a_ijkl = λ δ_ij δ_kl + μ (δ_ik δ_jl + δ_il δ_jk)`.
    pub fn from_lame(lambda: f64, mu: f64, mode: PlaneMode) -> Result<Self, MaterialError> {
        let repr = Representation::Isotropic { lambda, mu };
        Self::finish(repr, mode)
    }

    /// General tensor from its component table. The symmetries
    /// `a_ijkl = a_jikl = a_klij` must hold exactly.
    pub fn from_components(table: ComponentTable, mode: PlaneMode) -> Result<Self, MaterialError> {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = table[i][j][k][l];
                        for (p, q, r, s) in [(j, i, k, l), (k, l, i, j)] {
                            if table[p][q][r][s] != v {
                                return Err(MaterialError::Asymmetric(
                                    format!("{}{}{}{}", i + 1, j + 1, k + 1, l + 1),
                                    format!("{}{}{}{}", p + 1, q + 1, r + 1, s + 1),
                                ));
                            }
                        }
                    }
                }
            }
        }
        Self::finish(Representation::Table(table), mode)
    }

    fn finish(repr: Representation, mode: PlaneMode) -> Result<Self, MaterialError> {
        let mut t = ElasticTensor {
            repr,
            mode,
            m_e: 0.0,
            q_inf: 0.0,
        };
        let eig = SymmetricEigen::new(t.mandel_matrix()).eigenvalues;
        let m_e = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if !(m_e > 0.0) {
            return Err(MaterialError::NotElliptic(m_e));
        }
        t.m_e = m_e;
        t.q_inf = t.table().iter().flatten().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()));
        Ok(t)
    }

    pub fn mode(&self) -> PlaneMode {
        self.mode
    }

    /// Lamé pair for isotropic tensors.
    pub fn lame(&self) -> Option<(f64, f64)> {
        match self.repr {
            Representation::Isotropic { lambda, mu } => Some((lambda, mu)),
            Representation::Table(_) => None,
        }
    }

    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match self.repr {
            Representation::Isotropic { lambda, mu } => {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k))
            }
            Representation::Table(t) => t[i][j][k][l],
        }
    }

    pub fn table(&self) -> ComponentTable {
        let mut t = [[[[0.0; 2]; 2]; 2]; 2];
        for (i, ti) in t.iter_mut().enumerate() {
            for (j, tij) in ti.iter_mut().enumerate() {
                for (k, tijk) in tij.iter_mut().enumerate() {
                    for (l, v) in tijk.iter_mut().enumerate() {
                        *v = self.component(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    /// Matrix of the tensor acting on Mandel vectors `(τ11, τ22, √2 τ12)`.
    /// Its spectrum is the spectrum of `E` on symmetric tensors.
    pub fn mandel_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| {
            let (i, j) = MANDEL_INDEX[r];
            let (k, l) = MANDEL_INDEX[c];
            MANDEL_WEIGHT[r] * MANDEL_WEIGHT[c] * self.component(i, j, k, l)
        })
    }

    /// `Eτ`.
    pub fn apply(&self, tau: &SymTensor2) -> SymTensor2 {
        match self.repr {
            Representation::Isotropic { lambda, mu } => {
                let tr = tau.trace();
                SymTensor2::new(
                    2.0 * mu * tau.xx + lambda * tr,
                    2.0 * mu * tau.yy + lambda * tr,
                    2.0 * mu * tau.xy,
                )
            }
            Representation::Table(_) => SymTensor2::from_fn(|i, j| {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += self.component(i, j, k, l) * tau.get(k, l);
                    }
                }
                s
            }),
        }
    }

    /// Sharp constant `m_E` with `Eτ·τ ≥ m_E ‖τ‖²`.
    pub fn ellipticity_constant(&self) -> f64 {
        self.m_e
    }

    /// `‖E‖_Q∞ = max |a_ijkl|`.
    pub fn q_inf_norm(&self) -> f64 {
        self.q_inf
    }

    /// Largest eigenvalue of the Mandel matrix: the sharp constant in
    /// `‖Eτ‖ ≤ c ‖τ‖`, never above `d ‖E‖_Q∞` for the shipped tensors.
    pub fn spectral_norm(&self) -> f64 {
        let eig = SymmetricEigen::new(self.mandel_matrix()).eigenvalues;
        eig.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Isotropic tensor from engineering constants.
///
/// Plane strain uses `λ = Eν / ((1+ν)(1−2ν))`, `μ = E / (2(1+ν))`; plane
/// stress replaces `λ` by `2λμ / (λ + 2μ)`.
pub fn isotropic_tensor(
    youngs_modulus: f64,
    poisson_ratio: f64,
    mode: PlaneMode,
) -> Result<ElasticTensor, MaterialError> {
    if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
        return Err(MaterialError::YoungsModulus(youngs_modulus));
    }
    if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
        return Err(MaterialError::PoissonRatio(poisson_ratio));
    }
    let (e, nu) = (youngs_modulus, poisson_ratio);
    let mu = e / (2.0 * (1.0 + nu));
    let lambda3 = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let lambda = match mode {
        PlaneMode::PlaneStrain => lambda3,
        PlaneMode::PlaneStress => 2.0 * lambda3 * mu / (lambda3 + 2.0 * mu),
    };
    ElasticTensor::from_lame(lambda, mu, mode)
}

/// Piecewise-constant elasticity: one tensor per triangle region.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    default: ElasticTensor,
    regions: BTreeMap<u32, ElasticTensor>,
}

impl MaterialField {
    pub fn homogeneous(tensor: ElasticTensor) -> Self {
        MaterialField {
            default: tensor,
            regions: BTreeMap::new(),
        }
    }

    pub fn with_region(mut self, region: u32, tensor: ElasticTensor) -> Self {
        self.regions.insert(region, tensor);
        self
    }

    pub fn tensor(&self, region: u32) -> &ElasticTensor {
        self.regions.get(&region).unwrap_or(&self.default)
    }

    pub fn default_tensor(&self) -> &ElasticTensor {
        &self.default
    }

    fn all(&self) -> impl Iterator<Item = &ElasticTensor> {
        std::iter::once(&self.default).chain(self.regions.values())
    }

    /// Smallest ellipticity constant over all regions.
    pub fn ellipticity_constant(&self) -> f64 {
        self.all().map(|t| t.m_e).fold(f64::INFINITY, f64::min)
    }

    /// Largest max-norm over all regions.
    pub fn q_inf_norm(&self) -> f64 {
        self.all().map(|t| t.q_inf).fold(0.0, f64::max)
    }

    pub fn spectral_norm(&self) -> f64 {
        self.all().map(|t| t.spectral_norm()).fold(0.0, f64::max)
    }
}

impl From<ElasticTensor> for MaterialField {
    fn from(t: ElasticTensor) -> Self {
        MaterialField::homogeneous(t)
    }
}

/// The inelastic function `G(σ, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ViscoplasticLaw {
    #[default]
    Zero,
    /// `G(σ, ε) = −κ (σ − Eε)`.
    LinearRelaxation { kappa: f64 },
    /// `G(σ, ε) = −κ (σ − Π(σ))` with `Π` the projection of the deviator
    /// onto the ball of radius `yield_stress`.
    TruncatedPerzyna { kappa: f64, yield_stress: f64 },
}

impl ViscoplasticLaw {
    pub fn linear_relaxation(kappa: f64) -> Result<Self, MaterialError> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(MaterialError::Rate(kappa));
        }
        Ok(ViscoplasticLaw::LinearRelaxation { kappa })
    }

    pub fn truncated_perzyna(kappa: f64, yield_stress: f64) -> Result<Self, MaterialError> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(MaterialError::Rate(kappa));
        }
        if !(yield_stress > 0.0) {
            return Err(MaterialError::YieldStress(yield_stress));
        }
        Ok(ViscoplasticLaw::TruncatedPerzyna { kappa, yield_stress })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ViscoplasticLaw::Zero => "zero",
            ViscoplasticLaw::LinearRelaxation { .. } => "linear",
            ViscoplasticLaw::TruncatedPerzyna { .. } => "perzyna",
        }
    }

    /// `G(σ, ε)` at one material point.
    pub fn evaluate(&self, tensor: &ElasticTensor, sigma: &SymTensor2, eps: &SymTensor2) -> SymTensor2 {
        match *self {
            ViscoplasticLaw::Zero => SymTensor2::ZERO,
            ViscoplasticLaw::LinearRelaxation { kappa } => {
                -kappa * (*sigma - tensor.apply(eps))
            }
            ViscoplasticLaw::TruncatedPerzyna { kappa, yield_stress } => {
                let dev = sigma.deviator();
                let n = dev.norm();
                if n <= yield_stress {
                    SymTensor2::ZERO
                } else {
                    // σ − Π(σ) = (1 − σ_y/‖dev σ‖) dev σ
                    -(kappa * (1.0 - yield_stress / n)) * dev
                }
            }
        }
    }

    /// Lipschitz bound `L_G` in `‖ΔG‖ ≤ L_G (‖Δσ‖ + ‖Δε‖)`.
    pub fn lipschitz_constant(&self, tensor: &ElasticTensor) -> f64 {
        match *self {
            ViscoplasticLaw::Zero => 0.0,
            ViscoplasticLaw::LinearRelaxation { kappa } => {
                kappa * 1f64.max(DIM as f64 * tensor.q_inf_norm())
            }
            ViscoplasticLaw::TruncatedPerzyna { kappa, .. } => 2.0 * kappa,
        }
    }
}

/// Free-function form of [`ViscoplasticLaw::evaluate`].
pub fn evaluate_g(
    law: &ViscoplasticLaw,
    tensor: &ElasticTensor,
    sigma: &SymTensor2,
    eps: &SymTensor2,
) -> SymTensor2 {
    law.evaluate(tensor, sigma, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lame(l: f64, m: f64) -> ElasticTensor {
        ElasticTensor::from_lame(l, m, PlaneMode::PlaneStrain).unwrap()
    }

    fn random_tensor(rng: &mut impl Rng) -> SymTensor2 {
        SymTensor2::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
    }

    #[test]
    fn lame_from_engineering_constants() {
        let t = isotropic_tensor(1.0, 0.0, PlaneMode::PlaneStrain).unwrap();
        assert_eq!(t.lame(), Some((0.0, 0.5)));
        let (l, m) = isotropic_tensor(1.0, 0.3, PlaneMode::PlaneStrain)
            .unwrap()
            .lame()
            .unwrap();
        assert!((l - 0.3 / (1.3 * 0.4)).abs() < 1e-15);
        assert!((l - 0.576_923_076_923).abs() < 1e-11);
        assert!((m - 0.384_615_384_615).abs() < 1e-11);
        let (ls, ms) = isotropic_tensor(1.0, 0.3, PlaneMode::PlaneStress)
            .unwrap()
            .lame()
            .unwrap();
        // Plane stress: λ* = Eν/(1−ν²).
        assert!((ls - 0.3 / 0.91).abs() < 1e-14);
        assert_eq!(ms, m);
    }

    #[test]
    fn engineering_constants_out_of_range() {
        assert_eq!(
            isotropic_tensor(1.0, 0.5, PlaneMode::PlaneStrain),
            Err(MaterialError::PoissonRatio(0.5))
        );
        assert!(isotropic_tensor(1.0, -1.0, PlaneMode::PlaneStrain).is_err());
        assert!(isotropic_tensor(0.0, 0.2, PlaneMode::PlaneStrain).is_err());
    }

    #[test]
    fn apply_isotropic_examples() {
        let t = lame(1.0, 1.0);
        assert_eq!(t.apply(&SymTensor2::ZERO), SymTensor2::ZERO);
        assert_eq!(t.apply(&SymTensor2::IDENTITY), SymTensor2::new(4.0, 4.0, 0.0));
        assert_eq!(
            t.apply(&SymTensor2::new(0.0, 0.0, 1.0)),
            SymTensor2::new(0.0, 0.0, 2.0)
        );
    }

    #[test]
    fn table_and_isotropic_paths_agree() {
        let iso = lame(0.7, 1.3);
        let tab = ElasticTensor::from_components(iso.table(), PlaneMode::PlaneStrain).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let tau = random_tensor(&mut rng);
            assert!((iso.apply(&tau) - tab.apply(&tau)).norm() < 1e-14);
        }
        assert_eq!(iso.q_inf_norm(), tab.q_inf_norm());
        assert!((iso.ellipticity_constant() - tab.ellipticity_constant()).abs() < 1e-14);
    }

    /// Oracle: the Mandel matrix of isotropic (λ, μ) is
    /// [[λ+2μ, λ, 0], [λ, λ+2μ, 0], [0, 0, 2μ]] with eigenvalues
    /// 2(λ+μ), 2μ, 2μ.
    #[test]
    fn ellipticity_from_mandel_spectrum() {
        assert!((lame(1.0, 1.0).ellipticity_constant() - 2.0).abs() < 1e-14);
        assert!((lame(0.0, 0.5).ellipticity_constant() - 1.0).abs() < 1e-14);
        assert!((lame(-0.5, 1.0).ellipticity_constant() - 1.0).abs() < 1e-14);
        assert_eq!(lame(1.0, 1.0).q_inf_norm(), 3.0);
        assert!((lame(1.0, 1.0).spectral_norm() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn zero_table_is_not_elliptic() {
        let zero = [[[[0.0; 2]; 2]; 2]; 2];
        assert!(matches!(
            ElasticTensor::from_components(zero, PlaneMode::PlaneStrain),
            Err(MaterialError::NotElliptic(_))
        ));
    }

    #[test]
    fn asymmetric_table_is_rejected() {
        let mut t = lame(1.0, 1.0).table();
        t[0][1][0][0] = 0.3;
        assert!(matches!(
            ElasticTensor::from_components(t, PlaneMode::PlaneStrain),
            Err(MaterialError::Asymmetric(..))
        ));
    }

    #[test]
    fn sampled_ellipticity_and_q_inf_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in [lame(1.0, 1.0), lame(0.0, 0.5), isotropic_tensor(3.0, -0.4, PlaneMode::PlaneStress).unwrap()] {
            let m = t.ellipticity_constant();
            let q = t.q_inf_norm();
            for _ in 0..10_000 {
                let tau = random_tensor(&mut rng);
                let n2 = tau.norm_sq();
                assert!(t.apply(&tau).dot(&tau) >= m * n2 * (1.0 - 1e-12));
                assert!(t.apply(&tau).norm() <= DIM as f64 * q * tau.norm() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn apply_is_linear() {
        let t = isotropic_tensor(2.0, 0.25, PlaneMode::PlaneStrain).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (a, b) = (random_tensor(&mut rng), random_tensor(&mut rng));
            let alpha: f64 = rng.gen_range(-3.0..3.0);
            let lhs = t.apply(&(alpha * a + b));
            let rhs = alpha * t.apply(&a) + t.apply(&b);
            assert!((lhs - rhs).norm() <= 1e-14 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn law_examples() {
        let t = lame(1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (s, e) = (random_tensor(&mut rng), random_tensor(&mut rng));
        assert_eq!(ViscoplasticLaw::Zero.evaluate(&t, &s, &e), SymTensor2::ZERO);
        let lin = ViscoplasticLaw::linear_relaxation(1.0).unwrap();
        assert_eq!(lin.evaluate(&t, &t.apply(&e), &e), SymTensor2::ZERO);
        let perz = ViscoplasticLaw::truncated_perzyna(1.0, 10.0).unwrap();
        assert_eq!(perz.evaluate(&t, &s, &e), SymTensor2::ZERO);
        // Outside the ball the deviator is pulled back to radius σ_y.
        let perz = ViscoplasticLaw::truncated_perzyna(1.0, 0.5).unwrap();
        let sig = SymTensor2::new(2.0, 0.0, 0.0);
        let g = perz.evaluate(&t, &sig, &e);
        assert!(((sig + g).deviator().norm() - 0.5).abs() < 1e-15);
        assert_eq!((sig + g).trace(), sig.trace());
    }

    #[test]
    fn lipschitz_constants() {
        let t = lame(1.0, 1.0);
        assert_eq!(ViscoplasticLaw::Zero.lipschitz_constant(&t), 0.0);
        assert_eq!(ViscoplasticLaw::linear_relaxation(2.0).unwrap().lipschitz_constant(&t), 12.0);
        assert_eq!(
            ViscoplasticLaw::truncated_perzyna(1.0, 0.1).unwrap().lipschitz_constant(&t),
            2.0
        );
    }

    #[test]
    fn sampled_lipschitz_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = isotropic_tensor(1.0, 0.3, PlaneMode::PlaneStrain).unwrap();
        let laws = [
            ViscoplasticLaw::Zero,
            ViscoplasticLaw::linear_relaxation(0.5).unwrap(),
            ViscoplasticLaw::truncated_perzyna(1.5, 0.3).unwrap(),
        ];
        for law in laws {
            let lg = law.lipschitz_constant(&t);
            let mut worst = 0.0f64;
            for _ in 0..10_000 {
                let (s1, s2) = (random_tensor(&mut rng), random_tensor(&mut rng));
                let (e1, e2) = (random_tensor(&mut rng), random_tensor(&mut rng));
                let num = (law.evaluate(&t, &s1, &e1) - law.evaluate(&t, &s2, &e2)).norm();
                let den = (s1 - s2).norm() + (e1 - e2).norm();
                worst = worst.max(num / den);
            }
            assert!(worst <= lg * (1.0 + 1e-12), "{law:?}: {worst} > {lg}");
            assert!(law.evaluate(&t, &SymTensor2::ZERO, &SymTensor2::ZERO).is_finite());
        }
    }
}
