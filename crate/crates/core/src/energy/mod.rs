//! Energy densities, model parameters and discrete total energies with
//! their exact derivatives.

mod density;
mod discrete;

use thiserror::Error;

pub use density::{
    f_e, g_b0, g_e_matrix, g_e_mixed, g_e_sos, g_e_sos_grad, BulkFn, BulkPartialsFn, BulkSecondFn, BulkSpec,
    ClassicBulk, CustomBulk, ElasticConstants, GradientSample, WellConstants,
};
pub use discrete::{
    corollary_shift_expected, discrete_energy, discrete_gradient, gradient_g, total_csh, total_f, total_g, total_gl,
    EnergyBreakdown, HessianStructure,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("elastic constants must satisfy L1 > 0 and L1+L2+L3 > 0 (got {l1}, {l2}, {l3})")]
    InvalidElastic { l1: f64, l2: f64, l3: f64 },
    #[error("bulk coefficients need b > 0, c > 0 and a < b²/27c (got {a}, {b}, {c})")]
    InvalidBulk { a: f64, b: f64, c: f64 },
    #[error("epsilon must be positive and finite (got {0})")]
    InvalidEpsilon(f64),
    #[error("negative |p|² = {0}")]
    NegativePsq(f64),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

/// Elastic constants, bulk potential and coherence length of the thin-film model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub elastic: ElasticConstants,
    pub bulk: BulkSpec,
    pub eps: f64,
}

impl ModelParams {
    pub fn new(l1: f64, l2: f64, l3: f64, bulk: BulkSpec, eps: f64) -> Result<Self, EnergyError> {
        let elastic = ElasticConstants::new(l1, l2, l3)?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(EnergyError::InvalidEpsilon(eps));
        }
        Ok(ModelParams { elastic, bulk, eps })
    }

    /// Well scalar of the bulk potential.
    pub fn s(&self) -> f64 {
        self.bulk.s()
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, EnergyError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(EnergyError::InvalidEpsilon(eps));
        }
        Ok(ModelParams { eps, ..self.clone() })
    }

    /// Slope of the energy against `ln(1/ε)`: `(2L1+L2+L3) s² π k / 4`.
    pub fn log_slope(&self, k: i32) -> f64 {
        let s = self.s();
        self.elastic.log_prefactor() * s * s * std::f64::consts::PI * k as f64 / 4.0
    }
}

/// A local energy for `N`-component fields: a quadratic elastic density in the
/// gradient plus a scaled potential in the values.
///
/// Gradients are indexed `g[component][direction]`.
pub trait LocalModel<const N: usize>: Sync {
    /// Row-major `2N × 2N` matrix `A` with elastic density `½ gᵀ A g`,
    /// where `g` is flattened as `2·component + direction`.
    fn elastic_matrix(&self) -> Vec<f64>;
    fn elastic(&self, g: &[[f64; 2]; N]) -> f64;
    fn elastic_grad(&self, g: &[[f64; 2]; N]) -> [[f64; 2]; N];
    /// Factor in front of the potential.
    fn bulk_scale(&self) -> f64;
    fn bulk(&self, u: &[f64; N]) -> f64;
    fn bulk_grad(&self, u: &[f64; N]) -> [f64; N];
    fn bulk_hess(&self, u: &[f64; N]) -> [[f64; N]; N];
}

/// Thin-film tensor energy in `(p1, p2, r)`.
#[derive(Debug, Clone)]
pub struct LdgModel {
    pub params: ModelParams,
}

impl LocalModel<3> for LdgModel {
    fn elastic_matrix(&self) -> Vec<f64> {
        g_e_matrix(&self.params.elastic).iter().flatten().copied().collect()
    }

    fn elastic(&self, g: &[[f64; 2]; 3]) -> f64 {
        g_e_sos(&GradientSample::from_components(g), &self.params.elastic)
    }

    fn elastic_grad(&self, g: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
        g_e_sos_grad(&GradientSample::from_components(g), &self.params.elastic).to_components()
    }

    fn bulk_scale(&self) -> f64 {
        1.0 / (self.params.eps * self.params.eps)
    }

    fn bulk(&self, u: &[f64; 3]) -> f64 {
        self.params.bulk.pr_value(u)
    }

    fn bulk_grad(&self, u: &[f64; 3]) -> [f64; 3] {
        self.params.bulk.pr_gradient(u)
    }

    fn bulk_hess(&self, u: &[f64; 3]) -> [[f64; 3]; 3] {
        self.params.bulk.pr_hessian(u)
    }
}

fn identity_matrix(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    a
}

/// Ginzburg–Landau energy `½|∇v|² + (s² - |v|²)² / 4ε²`; `s = 1` is the unit-well case.
#[derive(Debug, Clone, Copy)]
pub struct GlModel {
    pub eps: f64,
    pub well: f64,
}

impl LocalModel<2> for GlModel {
    fn elastic_matrix(&self) -> Vec<f64> {
        identity_matrix(4)
    }

    fn elastic(&self, g: &[[f64; 2]; 2]) -> f64 {
        0.5 * g.iter().flatten().map(|v| v * v).sum::<f64>()
    }

    fn elastic_grad(&self, g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
        *g
    }

    fn bulk_scale(&self) -> f64 {
        1.0 / (self.eps * self.eps)
    }

    fn bulk(&self, u: &[f64; 2]) -> f64 {
        let d = self.well * self.well - u[0] * u[0] - u[1] * u[1];
        0.25 * d * d
    }

    fn bulk_grad(&self, u: &[f64; 2]) -> [f64; 2] {
        let d = self.well * self.well - u[0] * u[0] - u[1] * u[1];
        [-d * u[0], -d * u[1]]
    }

    fn bulk_hess(&self, u: &[f64; 2]) -> [[f64; 2]; 2] {
        let d = self.well * self.well - u[0] * u[0] - u[1] * u[1];
        [[-d + 2.0 * u[0] * u[0], 2.0 * u[0] * u[1]], [2.0 * u[0] * u[1], -d + 2.0 * u[1] * u[1]]]
    }
}

/// Self-dual Chern–Simons–Higgs energy `½|∇p|² + ε⁻² |p|²(1 - |p|²)²`.
#[derive(Debug, Clone, Copy)]
pub struct CshModel {
    pub eps: f64,
}

impl LocalModel<2> for CshModel {
    fn elastic_matrix(&self) -> Vec<f64> {
        identity_matrix(4)
    }

    fn elastic(&self, g: &[[f64; 2]; 2]) -> f64 {
        0.5 * g.iter().flatten().map(|v| v * v).sum::<f64>()
    }

    fn elastic_grad(&self, g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
        *g
    }

    fn bulk_scale(&self) -> f64 {
        1.0 / (self.eps * self.eps)
    }

    fn bulk(&self, u: &[f64; 2]) -> f64 {
        let q = u[0] * u[0] + u[1] * u[1];
        q * (1.0 - q) * (1.0 - q)
    }

    fn bulk_grad(&self, u: &[f64; 2]) -> [f64; 2] {
        let q = u[0] * u[0] + u[1] * u[1];
        let d = (1.0 - q) * (1.0 - 3.0 * q);
        [2.0 * d * u[0], 2.0 * d * u[1]]
    }

    fn bulk_hess(&self, u: &[f64; 2]) -> [[f64; 2]; 2] {
        let q = u[0] * u[0] + u[1] * u[1];
        let d1 = (1.0 - q) * (1.0 - 3.0 * q);
        let d2 = 6.0 * q - 4.0;
        [
            [2.0 * d1 + 4.0 * d2 * u[0] * u[0], 4.0 * d2 * u[0] * u[1]],
            [4.0 * d2 * u[0] * u[1], 2.0 * d1 + 4.0 * d2 * u[1] * u[1]],
        ]
    }
}

/// Dirichlet energy `½|∇h|²` of a scalar.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirichletModel;

impl LocalModel<1> for DirichletModel {
    fn elastic_matrix(&self) -> Vec<f64> {
        identity_matrix(2)
    }

    fn elastic(&self, g: &[[f64; 2]; 1]) -> f64 {
        0.5 * (g[0][0] * g[0][0] + g[0][1] * g[0][1])
    }

    fn elastic_grad(&self, g: &[[f64; 2]; 1]) -> [[f64; 2]; 1] {
        *g
    }

    fn bulk_scale(&self) -> f64 {
        0.0
    }

    fn bulk(&self, _u: &[f64; 1]) -> f64 {
        0.0
    }

    fn bulk_grad(&self, _u: &[f64; 1]) -> [f64; 1] {
        [0.0]
    }

    fn bulk_hess(&self, _u: &[f64; 1]) -> [[f64; 1]; 1] {
        [[0.0]]
    }
}
