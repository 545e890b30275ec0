//! Levenberg-Marquardt fit of the activation model.
//!
//! Work happens in scaled units (currents over the largest sampled current,
//! rates over the largest sampled rate) so the normal equations stay well
//! conditioned. Seeds come from a grid over (i_leak, t_ref_eff); for each cell
//! q_eff is the linear least-squares solution of `1/f - t = q/(I - i_leak)`.

use super::{ActivationFit, FiCurve};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step changes the cost by less than this fraction.
    pub rel_tolerance: f64,
    pub grid_leak: usize,
    pub grid_tref: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, rel_tolerance: 1e-10, grid_leak: 40, grid_tref: 40 }
    }
}

pub fn fit_activation(curve: &FiCurve) -> Result<ActivationFit> {
    fit_activation_with(curve, &FitOptions::default())
}

/// Parameters in scaled units: (t_ref_eff, q_eff, i_leak).
type P = [f64; 3];

struct Problem {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Problem {
    fn model(p: &P, x: f64) -> f64 {
        let d = x - p[2];
        if d <= 0.0 {
            0.0
        } else {
            1.0 / (p[0] + p[1] / d)
        }
    }

    fn cost(&self, p: &P) -> f64 {
        self.x.iter().zip(&self.y).map(|(&x, &y)| (Self::model(p, x) - y).powi(2)).sum()
    }

    /// JᵀJ and Jᵀr.
    fn normal_equations(&self, p: &P) -> ([[f64; 3]; 3], [f64; 3]) {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&x, &y) in self.x.iter().zip(&self.y) {
            let d = x - p[2];
            let f = Self::model(p, x);
            let r = f - y;
            let j = if d > 0.0 {
                let f2 = f * f;
                [-f2, -f2 / d, -f2 * p[1] / (d * d)]
            } else {
                [0.0; 3]
            };
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        (jtj, jtr)
    }

    fn feasible(p: &P) -> bool {
        p[0] >= 0.0 && p[1] > 0.0 && p[2] >= 0.0 && p.iter().all(|v| v.is_finite())
    }
}

// Index form reads closer to the textbook elimination.
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let m = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn fit_activation_with(curve: &FiCurve, opts: &FitOptions) -> Result<ActivationFit> {
    let positive: Vec<(f64, f64)> = curve.points.iter().copied().filter(|p| p.1 > 0.0).collect();
    if positive.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 samples with positive frequency, got {}", positive.len())));
    }
    let i_scale = curve.points.iter().map(|p| p.0).fold(0.0, f64::max);
    let f_scale = positive.iter().map(|p| p.1).fold(0.0, f64::max);
    let problem = Problem {
        x: curve.points.iter().map(|p| p.0 / i_scale).collect(),
        y: curve.points.iter().map(|p| p.1 / f_scale).collect(),
    };

    let seed = grid_seed(&problem, &positive, i_scale, f_scale, opts)
        .ok_or_else(|| Error::Fit("no feasible starting point on the seed grid".into()))?;
    let mut p = seed;
    let mut cost = problem.cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iterations {
        let (jtj, jtr) = problem.normal_equations(&p);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for (k, row) in a.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(1e-12);
            }
            let step = solve3(a, [-jtr[0], -jtr[1], -jtr[2]]);
            if let Some(step) = step {
                let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
                if Problem::feasible(&trial) {
                    let trial_cost = problem.cost(&trial);
                    if trial_cost < cost {
                        let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                        p = trial;
                        cost = trial_cost;
                        lambda = (lambda / 10.0).max(1e-12);
                        accepted = true;
                        if rel < opts.rel_tolerance {
                            return Ok(unscale(&p, cost, problem.x.len(), i_scale, f_scale));
                        }
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(unscale(&p, cost, problem.x.len(), i_scale, f_scale))
}

fn unscale(p: &P, cost: f64, n: usize, i_scale: f64, f_scale: f64) -> ActivationFit {
    ActivationFit {
        t_ref_eff: p[0] / f_scale,
        q_eff: p[1] * i_scale / f_scale,
        i_leak: p[2] * i_scale,
        residual_rms: (cost / n as f64).sqrt() * f_scale,
    }
}

fn grid_seed(problem: &Problem, positive: &[(f64, f64)], i_scale: f64, f_scale: f64, opts: &FitOptions) -> Option<P> {
    // The onset must sit below the first spiking current and the saturation
    // rate above the fastest sample.
    let first_positive = positive[0].0 / i_scale;
    let t_max = 1.0 / (positive.iter().map(|p| p.1).fold(0.0, f64::max) / f_scale);
    let mut best: Option<(f64, P)> = None;
    for a in 0..opts.grid_leak {
        let leak = first_positive * a as f64 / opts.grid_leak as f64;
        for b in 0..opts.grid_tref {
            let t = 0.95 * t_max * b as f64 / opts.grid_tref as f64;
            let (mut num, mut den) = (0.0, 0.0);
            for (&x, &y) in problem.x.iter().zip(&problem.y) {
                if y > 0.0 && x > leak {
                    let u = 1.0 / (x - leak);
                    num += (1.0 / y - t) * u;
                    den += u * u;
                }
            }
            let q = num / den;
            let p = [t, q, leak];
            if !Problem::feasible(&p) {
                continue;
            }
            let c = problem.cost(&p);
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, p));
            }
        }
    }
    best.map(|(_, p)| p)
}
