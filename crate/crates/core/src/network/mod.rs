//! Network geometry, path loss and correlated shadowing.

mod config;

pub use config::{ConfigFile, SystemConfig, ValidConfig, DEFAULT_NOISE_POWER_W};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::system::Dims;

pub type Point = [f64; 2];

/// AP and user positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub ap_positions: Vec<Point>,
    pub unicast_positions: Vec<Point>,
    pub multicast_positions: Vec<Vec<Point>>,
}

impl Geometry {
    /// All receiving users in layout order (unicast first, then groups).
    pub fn user_positions(&self) -> Vec<Point> {
        let mut out = self.unicast_positions.clone();
        for g in &self.multicast_positions {
            out.extend_from_slice(g);
        }
        out
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Uniform placement of every AP and user in the square.
pub fn place_network<R: Rng + ?Sized>(cfg: &ValidConfig, rng: &mut R) -> Geometry {
    let side = cfg.cfg().area_side;
    let mut point = || [rng.random::<f64>() * side, rng.random::<f64>() * side];
    let dims = cfg.dims();
    let ap_positions = (0..dims.n_aps).map(|_| point()).collect();
    let unicast_positions = (0..dims.n_unicast).map(|_| point()).collect();
    let multicast_positions = dims
        .group_sizes()
        .iter()
        .map(|&k| (0..k).map(|_| point()).collect())
        .collect();
    Geometry {
        ap_positions,
        unicast_positions,
        multicast_positions,
    }
}

/// Path loss in dB at distance `d` meters, floored at 1 m.
pub fn path_loss_db(d: f64) -> f64 {
    -30.5 - 36.7 * d.max(1.0).log10()
}

/// Shadowing variance in dB² (4 dB standard deviation).
pub const SHADOWING_VAR_DB2: f64 = 16.0;
/// Decorrelation distance scale of the shadowing kernel in meters.
pub const DECORRELATION_M: f64 = 9.0;

/// Covariance of the shadowing terms over (AP, user) pairs. Pairs at
/// different APs are uncorrelated, so the full matrix is block diagonal
/// with one `G x G` user kernel repeated per AP.
#[derive(Debug, Clone)]
pub struct ShadowingCovariance {
    n_aps: usize,
    kernel: DMatrix<f64>,
}

impl ShadowingCovariance {
    pub fn new(geom: &Geometry) -> Self {
        let users = geom.user_positions();
        let g = users.len();
        let kernel = DMatrix::from_fn(g, g, |i, j| {
            SHADOWING_VAR_DB2 * 2f64.powf(-distance(users[i], users[j]) / DECORRELATION_M)
        });
        ShadowingCovariance {
            n_aps: geom.ap_positions.len(),
            kernel,
        }
    }

    pub fn n_users(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// `Cov{F[n, g], F[j, h]}`.
    pub fn entry(&self, n: usize, g: usize, j: usize, h: usize) -> f64 {
        if n == j {
            self.kernel[(g, h)]
        } else {
            0.0
        }
    }

    /// Dense `NG x NG` matrix, index `n * G + g`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let g = self.n_users();
        let mut out = DMatrix::zeros(self.n_aps * g, self.n_aps * g);
        for n in 0..self.n_aps {
            out.view_mut((n * g, n * g), (g, g)).copy_from(&self.kernel);
        }
        out
    }

    /// Square-root factor `A` with `A A^T` equal to the kernel after
    /// negative eigenvalues are clipped to zero.
    pub fn factor(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.kernel.clone());
        let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let mut a = eig.eigenvectors;
        for (j, s) in sqrt.iter().enumerate() {
            a.column_mut(j).scale_mut(*s);
        }
        a
    }

    /// The kernel with any negative eigenvalues clipped to zero.
    pub fn clipped_kernel(&self) -> DMatrix<f64> {
        let a = self.factor();
        &a * a.transpose()
    }
}

/// How shadowing is drawn in [`compute_large_scale`].
#[derive(Debug, Clone)]
pub enum Shadowing {
    Correlated,
    /// Path loss only.
    Disabled,
    /// Fixed `N x G` shadowing values in dB.
    Fixed(DMatrix<f64>),
}

/// Linear large-scale gains. Column `i` is receiving user `i` in layout
/// order, row `n` is AP `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleFading {
    dims: Dims,
    gains: DMatrix<f64>,
}

impl LargeScaleFading {
    pub fn from_gains(dims: Dims, gains: DMatrix<f64>) -> Self {
        assert_eq!(gains.nrows(), dims.n_aps);
        assert_eq!(gains.ncols(), dims.n_users());
        LargeScaleFading { dims, gains }
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    /// `N x (U + K_M)` gains.
    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    /// Gain between AP `n` and receiving user `i`.
    pub fn user(&self, n: usize, i: usize) -> f64 {
        self.gains[(n, i)]
    }

    pub fn beta(&self, n: usize, u: usize) -> f64 {
        debug_assert!(u < self.dims.n_unicast);
        self.gains[(n, u)]
    }

    pub fn beta_bar(&self, n: usize, m: usize, k: usize) -> f64 {
        self.gains[(n, self.dims.n_unicast + self.dims.mc_index(m, k))]
    }
}

pub fn compute_large_scale<R: Rng + ?Sized>(
    geom: &Geometry,
    cfg: &ValidConfig,
    shadowing: &Shadowing,
    rng: &mut R,
) -> LargeScaleFading {
    let dims = cfg.dims().clone();
    let users = geom.user_positions();
    let (n_aps, g) = (dims.n_aps, users.len());
    let shadow_db = match shadowing {
        Shadowing::Disabled => DMatrix::zeros(n_aps, g),
        Shadowing::Fixed(f) => f.clone(),
        Shadowing::Correlated => {
            let a = ShadowingCovariance::new(geom).factor();
            let mut f = DMatrix::zeros(n_aps, g);
            for n in 0..n_aps {
                let xi = DVector::from_fn(g, |_, _| rng.sample::<f64, _>(StandardNormal));
                f.row_mut(n).copy_from(&(&a * xi).transpose());
            }
            f
        }
    };
    let gains = DMatrix::from_fn(n_aps, g, |n, i| {
        let pl = path_loss_db(distance(geom.ap_positions[n], users[i]));
        10f64.powf((pl + shadow_db[(n, i)]) / 10.0)
    });
    LargeScaleFading { dims, gains }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small_cfg() -> ValidConfig {
        let mut c = SystemConfig::with_users(6, 4, 2, vec![2, 3]);
        c.rng_seed = 7;
        c.validate(None).unwrap()
    }

    #[test]
    fn placement_in_square_and_deterministic() {
        let cfg = small_cfg();
        let g1 = place_network(&cfg, &mut rng::stream(3, rng::GEOMETRY));
        let g2 = place_network(&cfg, &mut rng::stream(3, rng::GEOMETRY));
        assert_eq!(g1, g2);
        assert_eq!(g1.ap_positions.len(), 6);
        assert_eq!(g1.multicast_positions[1].len(), 3);
        for p in g1.ap_positions.iter().chain(g1.user_positions().iter()) {
            assert!((0.0..=1000.0).contains(&p[0]) && (0.0..=1000.0).contains(&p[1]));
        }
        let g3 = place_network(&cfg, &mut rng::stream(4, rng::GEOMETRY));
        assert_ne!(g1, g3);
    }

    #[test]
    fn paper_scale_ap_count() {
        let cfg = SystemConfig::with_users(60, 12, 7, vec![12; 4]).validate(None).unwrap();
        let g = place_network(&cfg, &mut rng::stream(1, rng::GEOMETRY));
        assert_eq!(g.ap_positions.len(), 60);
    }

    #[test]
    fn path_loss_reference_values() {
        assert!((10f64.powf(path_loss_db(1.0) / 10.0) - 10f64.powf(-3.05)).abs() < 1e-15);
        assert!((10f64.powf(path_loss_db(10.0) / 10.0) - 10f64.powf(-6.72)).abs() < 1e-18);
        assert_eq!(path_loss_db(0.2), path_loss_db(1.0));
    }

    fn two_user_geometry(sep: f64) -> Geometry {
        Geometry {
            ap_positions: vec![[0.0, 0.0], [500.0, 500.0]],
            unicast_positions: vec![[100.0, 100.0], [100.0 + sep, 100.0]],
            multicast_positions: vec![],
        }
    }

    #[test]
    fn covariance_entries() {
        let cov = ShadowingCovariance::new(&two_user_geometry(9.0));
        assert!((cov.entry(0, 0, 0, 0) - 16.0).abs() < 1e-12);
        assert!((cov.entry(1, 0, 1, 1) - 8.0).abs() < 1e-12);
        assert_eq!(cov.entry(0, 0, 1, 0), 0.0);
        assert_eq!(cov.entry(1, 1, 0, 0), 0.0);
        let dense = cov.to_dense();
        assert_eq!(dense.nrows(), 4);
        assert!((dense[(2, 3)] - 8.0).abs() < 1e-12);
        assert_eq!(dense[(0, 2)], 0.0);
    }

    #[test]
    fn clipped_covariance_is_psd() {
        let cfg = small_cfg();
        let geom = place_network(&cfg, &mut rng::stream(11, rng::GEOMETRY));
        let cov = ShadowingCovariance::new(&geom);
        let k = cov.clipped_kernel();
        assert!((&k - k.transpose()).amax() < 1e-12);
        let eig = SymmetricEigen::new(k.clone());
        assert!(eig.eigenvalues.min() > -1e-9 * k.norm());
        assert!((&k - cov.kernel()).amax() < 1e-9);
    }

    #[test]
    fn gains_decrease_with_distance_without_shadowing() {
        let cfg = SystemConfig::with_users(1, 1, 5, vec![]).validate(None).unwrap();
        let geom = Geometry {
            ap_positions: vec![[0.0, 0.0]],
            unicast_positions: (1..=5).map(|i| [i as f64 * 37.0, 3.0]).collect(),
            multicast_positions: vec![],
        };
        let f = compute_large_scale(&geom, &cfg, &Shadowing::Disabled, &mut rng::stream(0, 0));
        for u in 1..5 {
            assert!(f.beta(0, u) < f.beta(0, u - 1));
        }
    }

    #[test]
    fn shadowing_marginal_variance() {
        let cfg = small_cfg();
        let geom = place_network(&cfg, &mut rng::stream(5, rng::GEOMETRY));
        let mut rng = rng::stream(5, rng::SHADOWING);
        let draws = 10_000;
        let (n, i) = (2, 3);
        let pl = path_loss_db(distance(geom.ap_positions[n], geom.user_positions()[i]));
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let f = compute_large_scale(&geom, &cfg, &Shadowing::Correlated, &mut rng);
                10.0 * f.user(n, i).log10() - pl
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!((var - 16.0).abs() < 0.5, "variance {var}");
    }

    #[test]
    fn multicast_accessors_follow_layout() {
        let cfg = small_cfg();
        let geom = place_network(&cfg, &mut rng::stream(2, rng::GEOMETRY));
        let f = compute_large_scale(&geom, &cfg, &Shadowing::Disabled, &mut rng::stream(0, 0));
        let pl = path_loss_db(distance(geom.ap_positions[4], geom.multicast_positions[1][2]));
        assert!((f.beta_bar(4, 1, 2) - 10f64.powf(pl / 10.0)).abs() < 1e-18);
        assert!(f.gains().iter().all(|&b| b > 0.0 && b.is_finite()));
    }
}
