use nalgebra::DMatrix;

use super::CoeffTable;
use crate::channel::EstimationStats;
use crate::system::{Dims, Precoder};

/// Flat layout of the stacked vector `(θ, z)`: AP-major θ block of length
/// `N E`, followed by the z block in the same order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub n_aps: usize,
    pub n_entities: usize,
}

impl VarLayout {
    pub fn new(dims: &Dims) -> Self {
        VarLayout {
            n_aps: dims.n_aps,
            n_entities: dims.n_entities(),
        }
    }

    pub fn len(&self) -> usize {
        2 * self.half()
    }

    pub fn is_empty(&self) -> bool {
        self.half() == 0
    }

    pub fn half(&self) -> usize {
        self.n_aps * self.n_entities
    }

    pub fn theta(&self, n: usize, e: usize) -> usize {
        n * self.n_entities + e
    }

    pub fn z(&self, n: usize, e: usize) -> usize {
        self.half() + n * self.n_entities + e
    }

    /// Index range of AP `n`'s θ block.
    pub fn theta_block(&self, n: usize) -> std::ops::Range<usize> {
        n * self.n_entities..(n + 1) * self.n_entities
    }

    pub fn z_block(&self, n: usize) -> std::ops::Range<usize> {
        let r = self.theta_block(n);
        r.start + self.half()..r.end + self.half()
    }
}

/// Continuous decision variables: per-AP powers θ and relaxed
/// associations z, both `N x (U + M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVars {
    pub precoder: Precoder,
    pub theta: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl DecisionVars {
    pub fn zeros(dims: &Dims, precoder: Precoder) -> Self {
        DecisionVars {
            precoder,
            theta: DMatrix::zeros(dims.n_aps, dims.n_entities()),
            z: DMatrix::zeros(dims.n_aps, dims.n_entities()),
        }
    }

    pub fn layout(&self) -> VarLayout {
        VarLayout {
            n_aps: self.theta.nrows(),
            n_entities: self.theta.ncols(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let lay = self.layout();
        let mut v = vec![0.0; lay.len()];
        for n in 0..lay.n_aps {
            for e in 0..lay.n_entities {
                v[lay.theta(n, e)] = self.theta[(n, e)];
                v[lay.z(n, e)] = self.z[(n, e)];
            }
        }
        v
    }

    pub fn from_flat(lay: VarLayout, v: &[f64], precoder: Precoder) -> Self {
        assert_eq!(v.len(), lay.len());
        DecisionVars {
            precoder,
            theta: DMatrix::from_fn(lay.n_aps, lay.n_entities, |n, e| v[lay.theta(n, e)]),
            z: DMatrix::from_fn(lay.n_aps, lay.n_entities, |n, e| v[lay.z(n, e)]),
        }
    }

    /// θ for the given association and power coefficients. `z` is set to the
    /// association.
    pub fn from_power(ap: &AssociationPower, stats: &EstimationStats, precoder: Precoder) -> Self {
        let (rows, cols) = ap.eta.shape();
        let theta = DMatrix::from_fn(rows, cols, |n, e| {
            let eta = ap.eta[(n, e)];
            if eta == 0.0 {
                return 0.0;
            }
            let g = stats.entity_variance(n, e);
            match precoder {
                Precoder::Mr => (eta * g).sqrt(),
                Precoder::Zf => eta.sqrt() / g.sqrt(),
            }
        });
        let z = DMatrix::from_fn(rows, cols, |n, e| if ap.a[(n, e)] { 1.0 } else { 0.0 });
        DecisionVars { precoder, theta, z }
    }

    /// Inverse of [`DecisionVars::from_power`]; entities are associated
    /// where `z >= 0.5`.
    pub fn to_power(&self, stats: &EstimationStats) -> AssociationPower {
        let (rows, cols) = self.theta.shape();
        let eta = DMatrix::from_fn(rows, cols, |n, e| {
            let t = self.theta[(n, e)];
            let g = stats.entity_variance(n, e);
            match self.precoder {
                Precoder::Mr => t * t / g,
                Precoder::Zf => t * t * g,
            }
        });
        let a = DMatrix::from_fn(rows, cols, |n, e| self.z[(n, e)] >= 0.5);
        AssociationPower { a, eta }
    }

    /// `Σ_e θ[n, e]²` per AP.
    pub fn ap_power(&self) -> Vec<f64> {
        (0..self.theta.nrows())
            .map(|n| self.theta.row(n).norm_squared())
            .collect()
    }
}

/// Binary association and power coefficients, `N x (U + M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationPower {
    pub a: DMatrix<bool>,
    pub eta: DMatrix<f64>,
}

impl AssociationPower {
    /// Left-hand side of the per-AP transmit power constraint (at most 1).
    pub fn power_usage(&self, stats: &EstimationStats, precoder: Precoder) -> Vec<f64> {
        let dims = stats.dims();
        let l = dims.antennas as f64;
        let spare = l - dims.n_entities() as f64;
        (0..self.eta.nrows())
            .map(|n| {
                (0..self.eta.ncols())
                    .map(|e| {
                        let eta = if self.a[(n, e)] { self.eta[(n, e)] } else { 0.0 };
                        let g = stats.entity_variance(n, e);
                        match precoder {
                            Precoder::Mr => eta * l * g,
                            Precoder::Zf => eta / (spare * g),
                        }
                    })
                    .sum()
            })
            .collect()
    }
}

/// Every AP serves every entity with equal θ², using the full budget.
pub fn epa_point(coeffs: &CoeffTable) -> DecisionVars {
    let d = coeffs.dims();
    let e = d.n_entities();
    let t = (coeffs.rho / e as f64).sqrt();
    DecisionVars {
        precoder: coeffs.precoder,
        theta: DMatrix::from_element(d.n_aps, e, t),
        z: DMatrix::from_element(d.n_aps, e, 1.0),
    }
}
