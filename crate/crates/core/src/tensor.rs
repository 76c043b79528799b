//! Symmetric second-order tensors on the plane.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// A symmetric 2×2 tensor stored by its three independent components.
///
/// The inner product is the full contraction `σ·τ = Σ σ_ij τ_ij`, so the
/// off-diagonal component counts twice.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 {
        xx: 0.0,
        yy: 0.0,
        xy: 0.0,
    };

    pub const IDENTITY: SymTensor2 = SymTensor2 {
        xx: 1.0,
        yy: 1.0,
        xy: 0.0,
    };

    pub const fn new(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2 { xx, yy, xy }
    }

    /// Component `(i, j)` with 0-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            (0, 1) | (1, 0) => self.xy,
            _ => panic!("tensor index ({i}, {j}) out of range for d = 2"),
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        SymTensor2 {
            xx: f(0, 0),
            yy: f(1, 1),
            xy: f(0, 1),
        }
    }

    pub fn dot(&self, other: &SymTensor2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Deviatoric part `τ − ½ tr(τ) I`.
    pub fn deviator(&self) -> SymTensor2 {
        let m = 0.5 * self.trace();
        SymTensor2::new(self.xx - m, self.yy - m, self.xy)
    }

    /// Mandel vector `(τ11, τ22, √2 τ12)`; its Euclidean norm equals `‖τ‖`.
    pub fn to_mandel(&self) -> [f64; 3] {
        [self.xx, self.yy, std::f64::consts::SQRT_2 * self.xy]
    }

    pub fn from_mandel(v: [f64; 3]) -> Self {
        SymTensor2::new(v[0], v[1], v[2] / std::f64::consts::SQRT_2)
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.yy.is_finite() && self.xy.is_finite()
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx + rhs.xx, self.yy + rhs.yy, self.xy + rhs.xy)
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, rhs: SymTensor2) {
        self.xx += rhs.xx;
        self.yy += rhs.yy;
        self.xy += rhs.xy;
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx - rhs.xx, self.yy - rhs.yy, self.xy - rhs.xy)
    }
}

impl SubAssign for SymTensor2 {
    fn sub_assign(&mut self, rhs: SymTensor2) {
        self.xx -= rhs.xx;
        self.yy -= rhs.yy;
        self.xy -= rhs.xy;
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        SymTensor2::new(-self.xx, -self.yy, -self.xy)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self * rhs.xx, self * rhs.yy, self * rhs.xy)
    }
}

/// A piecewise-constant tensor field, one value per triangle.
pub type TensorField = Vec<SymTensor2>;
