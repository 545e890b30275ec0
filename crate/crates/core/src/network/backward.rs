//! Backpropagation through time.
//!
//! Per step and layer `l > 0`:
//!
//! ```text
//! I[t] = i_ref · W · s_prev[t]
//! u[t] = v[t-1] + a · (−(v[t-1] − v_reset) + R · I[t])      a = dt / τ
//! s[t] = H(u[t] − v_th)
//! v[t] = u[t] · (1 − s[t]) + v_reset · s[t]
//! ```
//!
//! `dH/du` is replaced by the logistic surrogate and the reset is a
//! stop-gradient, so `dv/du = 1 − s`. In relaxed mode `s` is the logistic
//! itself and there is no reset, which makes the result the exact gradient.
//! Frozen (refractory) steps pass the membrane gradient straight through.
//! No gradient flows into the input layer.

use super::{log_softmax, surrogate_derivative, ForwardMode, ForwardTrace, SnnNetwork};

/// Weight gradients in the network's internal `in x out` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dwt: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &SnnNetwork) -> Self {
        Self { dwt: net.wt.iter().map(|w| vec![0.0; w.len()]).collect() }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.dwt.iter_mut().zip(&other.dwt) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for x in self.dwt.iter_mut().flatten() {
            *x *= c;
        }
    }

    /// `dL/dW[l][out, in]`.
    pub fn get(&self, net: &SnnNetwork, l: usize, out: usize, input: usize) -> f64 {
        self.dwt[l][input * net.sizes()[l + 1] + out]
    }

    pub fn max_abs(&self) -> f64 {
        self.dwt.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Gradient of [`super::loss`] for one sample, accumulated into `grads`.
/// `beta` sets the surrogate in spiking mode; relaxed traces use their own.
pub fn backward(net: &SnnNetwork, trace: &ForwardTrace, label: usize, beta: f64, grads: &mut Gradients) {
    let sizes = &trace.sizes;
    let n_layers = sizes.len();
    let t_sim = trace.t_sim;
    let p = &net.lif;
    let a = p.dt / p.tau_m;
    let (beta, relaxed) = match trace.mode {
        ForwardMode::Relaxed { beta } => (beta, true),
        ForwardMode::Spiking => (beta, false),
    };

    let (_, probs) = log_softmax(&trace.output_counts, t_sim as f64);
    let top = n_layers - 1;
    let mut d_out = probs;
    d_out[label] -= 1.0;
    for g in &mut d_out {
        *g /= t_sim as f64;
    }

    // Membrane gradient carried from step t+1 into step t, per layer.
    let mut g_v: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    // Spike gradient arriving from the layer above within the current step.
    let mut g_s: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut d_i: Vec<f64> = Vec::with_capacity(sizes.iter().copied().max().unwrap_or(0));

    for t in (0..t_sim).rev() {
        g_s[top].copy_from_slice(&d_out);
        for l in (1..n_layers).rev() {
            let n = sizes[l];
            let n_in = sizes[l - 1];
            let u = trace.pre_at(l, t);
            let s = trace.spikes_at(l, t);
            d_i.clear();
            d_i.resize(n, 0.0);
            for k in 0..n {
                if trace.is_frozen(l, t, k) {
                    // v[t] = v[t-1]; g_v[l][k] carries through unchanged.
                    continue;
                }
                let dv_du = if relaxed { 1.0 } else { 1.0 - s[k] };
                let g_u = g_s[l][k] * surrogate_derivative(u[k], p.v_th, beta) + g_v[l][k] * dv_du;
                d_i[k] = g_u * a * p.r_m;
                g_v[l][k] = g_u * (1.0 - a);
            }
            let prev = trace.spikes_at(l - 1, t);
            let dwt = &mut grads.dwt[l - 1];
            let wt = &net.wt[l - 1];
            let needs_input_grad = l >= 2;
            for i in 0..n_in {
                let si = prev[i];
                if si != 0.0 {
                    let gain = net.i_ref * si;
                    for (g, &d) in dwt[i * n..(i + 1) * n].iter_mut().zip(d_i.iter()) {
                        *g += gain * d;
                    }
                }
                if needs_input_grad {
                    let row = &wt[i * n..(i + 1) * n];
                    let dot: f64 = row.iter().zip(d_i.iter()).map(|(w, d)| w * d).sum();
                    g_s[l - 1][i] = net.i_ref * dot;
                }
            }
        }
    }
}
