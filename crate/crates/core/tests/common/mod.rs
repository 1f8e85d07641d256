#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replica_portfolio::MomentSet;

/// Generic equality-constrained QP oracle: solves the `(N+2) x (N+2)` KKT
/// system of `min (1/2) w'Qw` subject to `sum w = N` and `sum r w = N R`.
pub fn kkt_oracle(q: &DMatrix<f64>, means: &[f64], r: f64) -> Vec<f64> {
    let n = means.len();
    let mut a = DMatrix::zeros(n + 2, n + 2);
    a.view_mut((0, 0), (n, n)).copy_from(q);
    for i in 0..n {
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        a[(i, n + 1)] = means[i];
        a[(n + 1, i)] = means[i];
    }
    let mut b = DVector::zeros(n + 2);
    b[n] = n as f64;
    b[n + 1] = n as f64 * r;
    let sol = a.lu().solve(&b).expect("KKT system singular");
    sol.rows(0, n).iter().copied().collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A valid moment set with non-degenerate weighted variances, built from
/// randomly chosen `(<v^-1>, R1, V1, <v^-2>, R2, V2)`.
pub fn random_moments<R: Rng>(rng: &mut R) -> MomentSet {
    let m_v1 = 10f64.powf(rng.random_range(-2.0..2.0));
    let m_v2 = 10f64.powf(rng.random_range(-2.0..2.0));
    let r1 = rng.random_range(-3.0..3.0);
    let r2 = rng.random_range(-3.0..3.0);
    let v1 = 10f64.powf(rng.random_range(-3.0..1.0));
    let v2 = 10f64.powf(rng.random_range(-3.0..1.0));
    MomentSet::from_raw(m_v1, m_v1 * r1, m_v1 * (v1 + r1 * r1), m_v2, m_v2 * r2, m_v2 * (v2 + r2 * r2))
        .expect("valid by construction")
}
