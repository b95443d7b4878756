//! Desk-scale stand-ins for the equivariant case study: a vanilla SGD
//! trajectory with its round-trip residual, and a rotation-invariant
//! point-cloud statistic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdTrajectory {
    pub theta0: Vec<f64>,
    pub eta: f64,
    pub steps: usize,
    /// Batch used at step `t` is `batch_order[t % len]`.
    pub batch_order: Vec<usize>,
}

impl SgdTrajectory {
    fn batch(&self, t: usize) -> usize {
        self.batch_order[t % self.batch_order.len()]
    }
}

/// Per-batch loss with an analytic gradient.
pub trait BatchLoss {
    fn grad(&self, batch: usize, theta: &[f64]) -> Vec<f64>;
}

/// `L_b(θ) = ½ (θ − c_b)ᵀ A_b (θ − c_b)` with symmetric `A_b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticLoss {
    pub a: Vec<Vec<Vec<f64>>>,
    pub c: Vec<Vec<f64>>,
}

/// `L_b(θ) = g_b · θ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearLoss {
    pub g: Vec<Vec<f64>>,
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl BatchLoss for QuadraticLoss {
    fn grad(&self, b: usize, theta: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = theta.iter().zip(&self.c[b]).map(|(t, c)| t - c).collect();
        matvec(&self.a[b], &d)
    }
}

impl BatchLoss for LinearLoss {
    fn grad(&self, b: usize, _theta: &[f64]) -> Vec<f64> {
        self.g[b].clone()
    }
}

impl QuadraticLoss {
    /// Three two-dimensional batches with well-conditioned curvature.
    pub fn fixture() -> Self {
        QuadraticLoss {
            a: vec![
                vec![vec![2.0, 0.5], vec![0.5, 1.0]],
                vec![vec![1.5, -0.3], vec![-0.3, 2.5]],
                vec![vec![3.0, 0.0], vec![0.0, 0.8]],
            ],
            c: vec![vec![1.0, -1.0], vec![0.5, 2.0], vec![-1.5, 0.25]],
        }
    }

    /// Largest `‖A_b² (θ − c_b)‖` along the forward trajectory: the
    /// per-step defect coefficient of one forward/inverse pair.
    pub fn defect_bound(&self, traj: &SgdTrajectory) -> f64 {
        let mut theta = traj.theta0.clone();
        let mut worst: f64 = 0.0;
        for t in 0..traj.steps {
            let b = traj.batch(t);
            let g = self.grad(b, &theta);
            worst = worst.max(norm(&matvec(&self.a[b], &g)));
            theta = theta.iter().zip(&g).map(|(x, g)| x - traj.eta * g).collect();
        }
        worst
    }
}

pub fn sgd_forward<L: BatchLoss>(loss: &L, traj: &SgdTrajectory, theta: &[f64]) -> Vec<f64> {
    let mut th = theta.to_vec();
    for t in 0..traj.steps {
        let g = loss.grad(traj.batch(t), &th);
        th.iter_mut().zip(g).for_each(|(x, g)| *x -= traj.eta * g);
    }
    th
}

/// Inverse steps `θ ← θ + η ∇L_b(θ)` over the batch sequence reversed.
pub fn sgd_inverse<L: BatchLoss>(loss: &L, traj: &SgdTrajectory, theta: &[f64]) -> Vec<f64> {
    let mut th = theta.to_vec();
    for t in (0..traj.steps).rev() {
        let g = loss.grad(traj.batch(t), &th);
        th.iter_mut().zip(g).for_each(|(x, g)| *x += traj.eta * g);
    }
    th
}

/// `‖θ_T − θ̃_T‖₂` where `θ̃_T` runs forward, inverse, then forward again.
pub fn sgd_roundtrip_residual<L: BatchLoss>(loss: &L, traj: &SgdTrajectory) -> f64 {
    let theta_t = sgd_forward(loss, traj, &traj.theta0);
    let back = sgd_inverse(loss, traj, &theta_t);
    let again = sgd_forward(loss, traj, &back);
    let diff: Vec<f64> = theta_t.iter().zip(&again).map(|(a, b)| a - b).collect();
    norm(&diff)
}

pub fn default_trajectory(eta: f64) -> SgdTrajectory {
    SgdTrajectory {
        theta0: vec![0.3, -0.7],
        eta,
        steps: 10,
        batch_order: vec![0, 1, 2, 1],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdOrderCheck {
    pub eta: f64,
    pub residual: f64,
    pub residual_half: f64,
    pub ratio: f64,
    pub residual_zero_eta: f64,
    /// `c·η²·T`, with `c` ten times the observed defect bound.
    pub bound: f64,
}

impl SgdOrderCheck {
    pub fn passes(&self) -> bool {
        (3.0..=5.0).contains(&self.ratio) && self.residual_zero_eta == 0.0 && self.residual <= self.bound
    }
}

pub fn sgd_order_check(eta: f64) -> SgdOrderCheck {
    let loss = QuadraticLoss::fixture();
    let traj = default_trajectory(eta);
    let residual = sgd_roundtrip_residual(&loss, &traj);
    let residual_half = sgd_roundtrip_residual(&loss, &default_trajectory(eta / 2.0));
    let residual_zero_eta = sgd_roundtrip_residual(&loss, &default_trajectory(0.0));
    let c = 10.0 * loss.defect_bound(&traj);
    SgdOrderCheck {
        eta,
        residual,
        residual_half,
        ratio: residual / residual_half,
        residual_zero_eta,
        bound: c * eta * eta * traj.steps as f64,
    }
}

// ---------------------------------------------------------------------------
// Point clouds

pub type Point = [f64; 3];

pub fn random_cloud(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

/// Uniform random unit quaternion `(w, x, y, z)` by Shoemake's method.
pub fn random_quaternion<R: Rng>(rng: &mut R) -> [f64; 4] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    [b * (tau * u3).cos(), a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin()]
}

pub fn rotation_matrix(q: [f64; 4]) -> [[f64; 3]; 3] {
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn rotate(cloud: &[Point], r: &[[f64; 3]; 3]) -> Vec<Point> {
    cloud
        .iter()
        .map(|p| {
            let mut out = [0.0; 3];
            for (i, row) in r.iter().enumerate() {
                out[i] = row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
            }
            out
        })
        .collect()
}

/// Sorted pairwise Euclidean distances.
pub fn distance_signature(cloud: &[Point]) -> Vec<f64> {
    let mut d = Vec::with_capacity(cloud.len() * cloud.len().saturating_sub(1) / 2);
    for i in 0..cloud.len() {
        for j in i + 1..cloud.len() {
            let s: f64 = (0..3).map(|k| (cloud[i][k] - cloud[j][k]).powi(2)).sum();
            d.push(s.sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

/// Largest signature deviation over `samples` random rotations.
pub fn rotation_invariance_deviation(cloud: &[Point], samples: usize, seed: u64) -> f64 {
    let base = distance_signature(cloud);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let r = rotation_matrix(random_quaternion(&mut rng));
        let sig = distance_signature(&rotate(cloud, &r));
        for (a, b) in base.iter().zip(&sig) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
