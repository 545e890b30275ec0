use super::{sigmoid, SnnNetwork};
use crate::error::{Error, Result};

/// How membrane values turn into spikes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardMode {
    /// Binary spikes (`u >= v_th`) with reset to `v_reset`.
    Spiking,
    /// `s = σ(β(u − v_th))`, no reset. Smooth, so its exact gradient is what
    /// [`super::backward`] computes.
    Relaxed { beta: f64 },
}

/// Everything backward needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub mode: ForwardMode,
    pub t_sim: usize,
    pub sizes: Vec<usize>,
    /// `spikes[l][t * size + k]`.
    pub spikes: Vec<Vec<f64>>,
    /// Membrane value after integration, before threshold and reset.
    pub pre_activation: Vec<Vec<f64>>,
    /// Refractory steps (membrane frozen); empty when `t_ref = 0`.
    pub frozen: Vec<Vec<bool>>,
    pub output_counts: Vec<f64>,
}

impl ForwardTrace {
    pub fn spikes_at(&self, l: usize, t: usize) -> &[f64] {
        let n = self.sizes[l];
        &self.spikes[l][t * n..(t + 1) * n]
    }

    pub fn pre_at(&self, l: usize, t: usize) -> &[f64] {
        let n = self.sizes[l];
        &self.pre_activation[l][t * n..(t + 1) * n]
    }

    pub fn is_frozen(&self, l: usize, t: usize, k: usize) -> bool {
        !self.frozen.is_empty() && self.frozen[l][t * self.sizes[l] + k]
    }
}

/// Runs `t_sim` steps for one sample given its input-layer currents.
pub fn forward(net: &SnnNetwork, input_currents: &[f64], mode: ForwardMode) -> Result<ForwardTrace> {
    let sizes = net.sizes().to_vec();
    if input_currents.len() != sizes[0] {
        return Err(Error::Shape(format!("{} input currents for {} input neurons", input_currents.len(), sizes[0])));
    }
    let p = &net.lif;
    let t_sim = net.t_sim;
    let a = p.dt / p.tau_m;
    let refractory = p.t_ref > 0.0;

    let mut v: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![p.v_reset; n]).collect();
    let mut t_last: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![f64::NEG_INFINITY; n]).collect();
    let mut spikes: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n * t_sim]).collect();
    let mut pre: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n * t_sim]).collect();
    let mut frozen: Vec<Vec<bool>> =
        if refractory { sizes.iter().map(|&n| vec![false; n * t_sim]).collect() } else { Vec::new() };
    let mut current: Vec<f64> = Vec::with_capacity(sizes.iter().copied().max().unwrap_or(0));

    for t in 0..t_sim {
        let time = t as f64 * p.dt;
        for l in 0..sizes.len() {
            let n = sizes[l];
            current.clear();
            if l == 0 {
                current.extend_from_slice(input_currents);
            } else {
                current.resize(n, 0.0);
                let n_in = sizes[l - 1];
                let prev = &spikes[l - 1][t * n_in..(t + 1) * n_in];
                let wt = &net.wt[l - 1];
                for (i, &s) in prev.iter().enumerate() {
                    if s == 0.0 {
                        continue;
                    }
                    let row = &wt[i * n..(i + 1) * n];
                    let gain = s * net.i_ref;
                    for (c, &w) in current.iter_mut().zip(row) {
                        *c += gain * w;
                    }
                }
            }
            let base = t * n;
            for k in 0..n {
                if refractory && time - t_last[l][k] < p.t_ref {
                    frozen[l][base + k] = true;
                    pre[l][base + k] = v[l][k];
                    continue;
                }
                let u = v[l][k] + a * (-(v[l][k] - p.v_reset) + p.r_m * current[k]);
                pre[l][base + k] = u;
                match mode {
                    ForwardMode::Spiking => {
                        if u >= p.v_th {
                            spikes[l][base + k] = 1.0;
                            v[l][k] = p.v_reset;
                            t_last[l][k] = time;
                        } else {
                            v[l][k] = u;
                        }
                    }
                    ForwardMode::Relaxed { beta } => {
                        spikes[l][base + k] = sigmoid(beta * (u - p.v_th));
                        v[l][k] = u;
                    }
                }
            }
        }
    }

    let last = sizes.len() - 1;
    let n_out = sizes[last];
    let mut output_counts = vec![0.0; n_out];
    for t in 0..t_sim {
        for (c, &s) in output_counts.iter_mut().zip(&spikes[last][t * n_out..(t + 1) * n_out]) {
            *c += s;
        }
    }
    Ok(ForwardTrace { mode, t_sim, sizes, spikes, pre_activation: pre, frozen, output_counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{loss, Topology};
    use crate::neuron::{lif_run, LifParams};

    fn chain(w: f64) -> SnnNetwork {
        let mut net = SnnNetwork::zeros(Topology::new(vec![1, 1]).unwrap());
        net.set_weight(0, 0, 0, w);
        net.t_sim = 60;
        net
    }

    #[test]
    fn zero_weights_silence_the_output() {
        let net = SnnNetwork::zeros(Topology::parse("6-4-3").unwrap());
        let tr = forward(&net, &[2.0; 6], ForwardMode::Spiking).unwrap();
        assert!(tr.output_counts.iter().all(|&c| c == 0.0));
        assert!(tr.spikes[0].iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn strong_synapse_relays_every_spike() {
        let net = chain(6.0);
        let tr = forward(&net, &[2.0], ForwardMode::Spiking).unwrap();
        let n_in: f64 = tr.spikes[0].iter().sum();
        assert!(n_in >= 10.0);
        assert_eq!(tr.output_counts[0], n_in);
        assert_eq!(tr.spikes[0], tr.spikes[1]);
    }

    #[test]
    fn input_layer_matches_single_neuron_run() {
        let net = chain(0.0);
        let tr = forward(&net, &[1.7], ForwardMode::Spiking).unwrap();
        let (_, train) = lif_run(&net.lif, &[1.7; 60], 60).unwrap();
        let expected: Vec<f64> = train.spikes.iter().map(|&s| s as u8 as f64).collect();
        assert_eq!(tr.spikes[0], expected);
    }

    #[test]
    fn refractory_is_honoured() {
        let mut net = chain(6.0);
        net.lif = LifParams { t_ref: 3.0, ..net.lif };
        let tr = forward(&net, &[20.0], ForwardMode::Spiking).unwrap();
        let steps: Vec<usize> = (0..60).filter(|&t| tr.spikes[0][t] == 1.0).collect();
        assert!(steps.windows(2).all(|w| w[1] - w[0] >= 3));
        assert!(tr.is_frozen(0, steps[0] + 1, 0));
    }

    #[test]
    fn hidden_permutation_keeps_outputs() {
        let net = SnnNetwork::new(Topology::parse("5-4-3").unwrap(), 11);
        let mut swapped = net.clone();
        for i in 0..5 {
            swapped.set_weight(0, 1, i, net.weight(0, 2, i));
            swapped.set_weight(0, 2, i, net.weight(0, 1, i));
        }
        for o in 0..3 {
            swapped.set_weight(1, o, 1, net.weight(1, o, 2));
            swapped.set_weight(1, o, 2, net.weight(1, o, 1));
        }
        let input = [2.0, 0.3, 1.1, 1.8, 0.0];
        let a = forward(&net, &input, ForwardMode::Spiking).unwrap();
        let b = forward(&swapped, &input, ForwardMode::Spiking).unwrap();
        assert_eq!(a.output_counts, b.output_counts);
    }

    #[test]
    fn spikes_are_binary_and_bounded() {
        let net = SnnNetwork::new(Topology::parse("8-6-4").unwrap(), 2);
        let tr = forward(&net, &[2.0, 1.0, 0.5, 2.0, 1.5, 0.0, 2.0, 1.2], ForwardMode::Spiking).unwrap();
        assert!(tr.spikes.iter().flatten().all(|&s| s == 0.0 || s == 1.0));
        assert!(tr.output_counts.iter().all(|&c| c <= net.t_sim as f64));
    }

    #[test]
    fn shape_mismatch() {
        let net = SnnNetwork::zeros(Topology::parse("3-2").unwrap());
        assert!(matches!(forward(&net, &[1.0; 4], ForwardMode::Spiking), Err(Error::Shape(_))));
    }

    #[test]
    fn loss_values() {
        let net = SnnNetwork::zeros(Topology::parse("3-10").unwrap());
        let mut tr = forward(&net, &[0.0; 3], ForwardMode::Spiking).unwrap();
        assert!((loss(&tr, 4) - 10f64.ln()).abs() < 1e-12);
        tr.output_counts[4] = 20.0;
        let l1 = loss(&tr, 4);
        assert!(l1 < 10f64.ln());
        tr.output_counts[4] = 25.0;
        assert!(loss(&tr, 4) < l1);
    }
}
