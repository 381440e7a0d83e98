//! Network specs, the flat parameter layout, and generic forward passes.
//!
//! Flattening order is fixed: layers in order, each layer's weight matrix
//! (row-major, output-by-input) followed by its bias vector. For DeepONets,
//! all branch layers come first, then all trunk layers, then the scalar
//! output bias. `unflatten(flatten(params))` is the identity by construction
//! and is pinned by tests.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Scalar};
use crate::{Error, Result};

/// Fully connected tanh network: `layer_widths` runs input, hidden..., output.
/// The final affine layer has no activation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>) -> Result<Self> {
        if layer_widths.len() < 3 {
            return Err(Error::Config(
                "MLP needs at least one hidden layer".into(),
            ));
        }
        if layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("all layer widths must be >= 1".into()));
        }
        Ok(Self { layer_widths })
    }

    /// Convenience: `hidden` layers of width `width` between `input` and `output`.
    pub fn uniform(input: usize, hidden: usize, width: usize, output: usize) -> Self {
        let mut widths = Vec::with_capacity(hidden + 2);
        widths.push(input);
        widths.extend(std::iter::repeat(width).take(hidden));
        widths.push(output);
        Self {
            layer_widths: widths,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Byte offset of layer `l`'s weights within the flat parameter vector.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.layer_widths[..l + 1]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum::<usize>()
            - (self.layer_widths[l] * self.layer_widths[l + 1] + self.layer_widths[l + 1])
    }
}

/// DeepONet: output is the latent dot product of branch and trunk outputs
/// plus a trainable scalar bias. Branch and trunk output widths must both
/// equal the latent dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeepOnetSpec {
    pub branch: MlpSpec,
    pub trunk: MlpSpec,
}

impl DeepOnetSpec {
    pub fn new(branch: MlpSpec, trunk: MlpSpec) -> Result<Self> {
        if branch.output_width() != trunk.output_width() {
            return Err(Error::Config(format!(
                "branch output width {} != trunk output width {}",
                branch.output_width(),
                trunk.output_width()
            )));
        }
        Ok(Self { branch, trunk })
    }

    pub fn latent_dim(&self) -> usize {
        self.branch.output_width()
    }

    /// Branch params, then trunk params, then the scalar bias.
    pub fn param_count(&self) -> usize {
        self.branch.param_count() + self.trunk.param_count() + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkSpec {
    Mlp(MlpSpec),
    DeepOnet(DeepOnetSpec),
}

impl NetworkSpec {
    pub fn param_count(&self) -> usize {
        match self {
            NetworkSpec::Mlp(m) => m.param_count(),
            NetworkSpec::DeepOnet(d) => d.param_count(),
        }
    }
}

/// A spec plus its flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: Vec<f64>,
}

impl Network {
    pub fn as_mlp(&self) -> Result<&MlpSpec> {
        match &self.spec {
            NetworkSpec::Mlp(m) => Ok(m),
            _ => Err(Error::Structural("expected an MLP network".into())),
        }
    }

    pub fn as_deeponet(&self) -> Result<&DeepOnetSpec> {
        match &self.spec {
            NetworkSpec::DeepOnet(d) => Ok(d),
            _ => Err(Error::Structural("expected a DeepONet network".into())),
        }
    }

    /// Structured view: per-layer (weights, biases) pairs, DeepONet bias last.
    pub fn unflatten(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut out = Vec::new();
        let mut extract = |spec: &MlpSpec, base: usize| {
            let mut off = base;
            for l in 0..spec.num_layers() {
                let (wi, wo) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
                let w = self.params[off..off + wi * wo].to_vec();
                off += wi * wo;
                let b = self.params[off..off + wo].to_vec();
                off += wo;
                out.push((w, b));
            }
            off
        };
        match &self.spec {
            NetworkSpec::Mlp(m) => {
                extract(m, 0);
            }
            NetworkSpec::DeepOnet(d) => {
                let off = extract(&d.branch, 0);
                let off = {
                    let mut o = off;
                    for l in 0..d.trunk.num_layers() {
                        let (wi, wo) = (d.trunk.layer_widths[l], d.trunk.layer_widths[l + 1]);
                        let w = self.params[o..o + wi * wo].to_vec();
                        o += wi * wo;
                        let b = self.params[o..o + wo].to_vec();
                        o += wo;
                        out.push((w, b));
                    }
                    o
                };
                out.push((vec![self.params[off]], vec![]));
            }
        }
        out
    }

    /// Rebuild the flat vector from the structured view.
    pub fn flatten(layers: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
        let mut flat = Vec::new();
        for (w, b) in layers {
            flat.extend_from_slice(w);
            flat.extend_from_slice(b);
        }
        flat
    }
}

/// Glorot-uniform weights, zero biases, reproducible under `seed`.
/// DeepONet output bias initializes to zero.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(spec.param_count());
    let mut fill_mlp = |m: &MlpSpec, rng: &mut ChaCha8Rng, params: &mut Vec<f64>| {
        for l in 0..m.num_layers() {
            let (fan_in, fan_out) = (m.layer_widths[l], m.layer_widths[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-a..a));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
    };
    match spec {
        NetworkSpec::Mlp(m) => fill_mlp(m, &mut rng, &mut params),
        NetworkSpec::DeepOnet(d) => {
            fill_mlp(&d.branch, &mut rng, &mut params);
            fill_mlp(&d.trunk, &mut rng, &mut params);
            params.push(0.0);
        }
    }
    Network {
        spec: spec.clone(),
        params,
    }
}

/// Generic MLP forward returning the full output vector.
pub fn mlp_forward_vec<S: Scalar>(spec: &MlpSpec, params: &[f64], input: &[S]) -> Result<Vec<S>> {
    if input.len() != spec.input_width() {
        return Err(Error::Structural(format!(
            "input width {} does not match spec width {}",
            input.len(),
            spec.input_width()
        )));
    }
    let mut act: Vec<S> = input.to_vec();
    let mut off = 0usize;
    for l in 0..spec.num_layers() {
        let (wi, wo) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
        let w = &params[off..off + wi * wo];
        off += wi * wo;
        let b = &params[off..off + wo];
        off += wo;
        let mut z: Vec<S> = Vec::with_capacity(wo);
        for i in 0..wo {
            let row = &w[i * wi..(i + 1) * wi];
            let mut acc = S::from_f64(b[i]);
            for (aj, &wij) in act.iter().zip(row) {
                acc = acc + aj.scale(wij);
            }
            z.push(acc);
        }
        if l + 1 < spec.num_layers() {
            for zi in z.iter_mut() {
                *zi = zi.tanh();
            }
        }
        act = z;
    }
    Ok(act)
}

/// Generic MLP forward for scalar-output networks.
pub fn mlp_forward<S: Scalar>(net: &Network, input: &[S]) -> Result<S> {
    let spec = net.as_mlp()?;
    if spec.output_width() != 1 {
        return Err(Error::Structural(format!(
            "scalar forward on MLP with output width {}",
            spec.output_width()
        )));
    }
    Ok(mlp_forward_vec(spec, &net.params, input)?[0])
}

/// DeepONet forward: branch runs in plain reals over the sensor vector
/// (sensor values carry no derivative along the trunk directions), the trunk
/// runs in `S`, and the output is the latent dot product plus the bias.
pub fn deeponet_forward<S: Scalar>(net: &Network, sensors: &[f64], coord: &[S]) -> Result<S> {
    let spec = net.as_deeponet()?;
    if sensors.len() != spec.branch.input_width() {
        return Err(Error::Structural(format!(
            "sensor vector width {} does not match branch input {}",
            sensors.len(),
            spec.branch.input_width()
        )));
    }
    let b = mlp_forward_vec::<f64>(&spec.branch, &net.params, sensors)?;
    let trunk_params = &net.params[spec.branch.param_count()..];
    let t = mlp_forward_vec(&spec.trunk, trunk_params, coord)?;
    let b0 = net.params[spec.param_count() - 1];
    let mut acc = S::from_f64(b0);
    for (ti, &bi) in t.iter().zip(&b) {
        acc = acc + ti.scale(bi);
    }
    Ok(acc)
}

/// DeepONet forward with the sensor vector in `S` and the coordinate fixed:
/// the route used when differentiating with respect to function samples. The
/// trunk's jet triple at the (frozen) coordinate is supplied pre-evaluated.
pub fn deeponet_forward_over_sensors<S: Scalar>(
    net: &Network,
    sensors: &[S],
    trunk_jet: &[Jet2<f64>],
) -> Result<Jet2<S>> {
    let spec = net.as_deeponet()?;
    if trunk_jet.len() != spec.latent_dim() {
        return Err(Error::Structural(format!(
            "trunk latent width {} does not match spec {}",
            trunk_jet.len(),
            spec.latent_dim()
        )));
    }
    let b = mlp_forward_vec(&spec.branch, &net.params, sensors)?;
    let b0 = net.params[spec.param_count() - 1];
    let mut acc = Jet2::<S>::constant(S::from_f64(b0));
    for (bi, tj) in b.iter().zip(trunk_jet) {
        acc = acc
            + Jet2::new(
                bi.scale(tj.value),
                bi.scale(tj.d1),
                bi.scale(tj.d2),
            );
    }
    Ok(acc)
}

/// Jet of an MLP along input direction `dir`: (u, du/dx_dir, d2u/dx_dir2).
pub fn mlp_input_jet(net: &Network, point: &[f64], dir: usize) -> Result<Jet2<f64>> {
    if dir >= point.len() {
        return Err(Error::Structural(format!(
            "direction index {dir} out of range for input dim {}",
            point.len()
        )));
    }
    let input: Vec<Jet2<f64>> = point
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == dir {
                Jet2::seeded(x)
            } else {
                Jet2::constant(x)
            }
        })
        .collect();
    let out = mlp_forward(net, &input)?;
    if !out.value.is_finite() || !out.d1.is_finite() || !out.d2.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite jet output ({}, {}, {}) at direction {dir}",
            out.value, out.d1, out.d2
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::fd;

    #[test]
    fn param_count_matches_formula() {
        let m = MlpSpec::uniform(2, 3, 100, 1);
        assert_eq!(
            m.param_count(),
            2 * 100 + 100 + 100 * 100 + 100 + 100 * 100 + 100 + 100 + 1
        );
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let spec = NetworkSpec::Mlp(MlpSpec::uniform(2, 2, 16, 1));
        let a = init_network(&spec, 7);
        let b = init_network(&spec, 7);
        assert_eq!(a.params, b.params);
        // last bias block plus inner biases are zero
        let m = a.as_mlp().unwrap().clone();
        for l in 0..m.num_layers() {
            let off = m.layer_offset(l) + m.layer_widths[l] * m.layer_widths[l + 1];
            for i in 0..m.layer_widths[l + 1] {
                assert_eq!(a.params[off + i], 0.0);
            }
        }
    }

    #[test]
    fn glorot_variance_within_bounds() {
        // empirical variance of a 100x100 layer within 20% of 2/(fan_in+fan_out)
        let spec = NetworkSpec::Mlp(MlpSpec::uniform(100, 1, 100, 1));
        let expected = 2.0 / 200.0;
        let mut devs = Vec::new();
        for seed in 0..10 {
            let net = init_network(&spec, seed);
            let w = &net.params[..100 * 100];
            let mean: f64 = w.iter().sum::<f64>() / w.len() as f64;
            let var: f64 = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / w.len() as f64;
            devs.push((var - expected).abs() / expected);
        }
        let avg_dev = devs.iter().sum::<f64>() / devs.len() as f64;
        assert!(avg_dev < 0.2, "variance deviation {avg_dev}");
    }

    #[test]
    fn all_zero_params_map_to_zero() {
        let spec = MlpSpec::uniform(2, 2, 8, 1);
        let net = Network {
            spec: NetworkSpec::Mlp(spec.clone()),
            params: vec![0.0; spec.param_count()],
        };
        let y = mlp_forward(&net, &[0.3f64, -0.9]).unwrap();
        assert_eq!(y, 0.0);
    }

    #[test]
    fn one_one_one_net_is_tanh() {
        // widths [1,1,1], W = (1,1), b = 0 -> tanh(x)
        let spec = MlpSpec::new(vec![1, 1, 1]).unwrap();
        let net = Network {
            spec: NetworkSpec::Mlp(spec),
            params: vec![1.0, 0.0, 1.0, 0.0],
        };
        let y = mlp_forward(&net, &[0.5f64]).unwrap();
        assert!((y - 0.46211715726000974).abs() < 1e-15);
    }

    #[test]
    fn jet_value_channel_matches_plain_forward() {
        let spec = NetworkSpec::Mlp(MlpSpec::uniform(2, 2, 8, 1));
        let net = init_network(&spec, 3);
        let x = [0.4f64, -0.2];
        let plain = mlp_forward(&net, &x).unwrap();
        let jet = mlp_input_jet(&net, &x, 0).unwrap();
        assert_eq!(plain, jet.value);
    }

    #[test]
    fn input_jet_matches_five_point_stencils() {
        let spec = NetworkSpec::Mlp(MlpSpec::uniform(2, 3, 10, 1));
        for seed in 0..20 {
            let net = init_network(&spec, seed);
            let x = [0.3, 0.7];
            for dir in 0..2 {
                let jet = mlp_input_jet(&net, &x, dir).unwrap();
                let mut f = |v: f64| {
                    let mut p = x;
                    p[dir] = v;
                    mlp_forward(&net, &p).unwrap()
                };
                let d1 = fd::five_point_d1(&mut f, x[dir], 1e-3);
                let d2 = fd::five_point_d2(&mut f, x[dir], 1e-3);
                assert!(fd::close(jet.d1, d1, 1e-4), "{} vs {d1}", jet.d1);
                assert!(fd::close(jet.d2, d2, 1e-4), "{} vs {d2}", jet.d2);
            }
        }
    }

    #[test]
    fn deeponet_bias_only_output() {
        let branch = MlpSpec::uniform(4, 1, 5, 3);
        let trunk = MlpSpec::uniform(2, 1, 5, 3);
        let spec = DeepOnetSpec::new(branch, trunk).unwrap();
        let mut net = Network {
            spec: NetworkSpec::DeepOnet(spec.clone()),
            params: vec![0.0; spec.param_count()],
        };
        *net.params.last_mut().unwrap() = 1.5;
        let y = deeponet_forward(&net, &[0.1, 0.2, 0.3, 0.4], &[0.5f64, 0.6]).unwrap();
        assert_eq!(y, 1.5);
    }

    #[test]
    fn deeponet_matches_independent_matrix_eval() {
        let branch = MlpSpec::uniform(6, 2, 7, 4);
        let trunk = MlpSpec::uniform(2, 2, 7, 4);
        let spec = DeepOnetSpec::new(branch.clone(), trunk.clone()).unwrap();
        let net = init_network(&NetworkSpec::DeepOnet(spec.clone()), 11);
        let sensors = [0.3, -0.1, 0.8, 0.2, -0.5, 0.9];
        let coord = [0.25f64, 0.75];

        // independent straight-line evaluation from the structured view
        let layers = net.unflatten();
        let eval_mlp = |layers: &[(Vec<f64>, Vec<f64>)], input: &[f64]| {
            let mut act = input.to_vec();
            for (li, (w, b)) in layers.iter().enumerate() {
                let wo = b.len();
                let wi = act.len();
                let mut z = vec![0.0; wo];
                for i in 0..wo {
                    for j in 0..wi {
                        z[i] += w[i * wi + j] * act[j];
                    }
                    z[i] += b[i];
                }
                if li + 1 < layers.len() {
                    for v in z.iter_mut() {
                        *v = v.tanh();
                    }
                }
                act = z;
            }
            act
        };
        let nb = branch.num_layers();
        let nt = trunk.num_layers();
        let bvec = eval_mlp(&layers[..nb], &sensors);
        let tvec = eval_mlp(&layers[nb..nb + nt], &coord);
        let b0 = layers[nb + nt].0[0];
        let expect: f64 = bvec.iter().zip(&tvec).map(|(a, b)| a * b).sum::<f64>() + b0;

        let got = deeponet_forward(&net, &sensors, &coord).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn deeponet_linear_in_branch_outputs() {
        // scaling every branch output by alpha scales (output - b0) by alpha
        let branch = MlpSpec::uniform(3, 1, 4, 2);
        let trunk = MlpSpec::uniform(1, 1, 4, 2);
        let spec = DeepOnetSpec::new(branch, trunk).unwrap();
        let mut net = init_network(&NetworkSpec::DeepOnet(spec.clone()), 5);
        *net.params.last_mut().unwrap() = 0.7;
        let b0 = 0.7;
        let sensors = [0.2, 0.4, -0.3];
        let coord = [0.6f64];
        let base = deeponet_forward(&net, &sensors, &coord).unwrap() - b0;

        // scale the branch output layer weights and biases by alpha
        let alpha = 2.5;
        let nb = spec.branch.num_layers();
        let mut layers = net.unflatten();
        for v in layers[nb - 1].0.iter_mut() {
            *v *= alpha;
        }
        for v in layers[nb - 1].1.iter_mut() {
            *v *= alpha;
        }
        let scaled_net = Network {
            spec: net.spec.clone(),
            params: Network::flatten(&layers),
        };
        let scaled = deeponet_forward(&scaled_net, &sensors, &coord).unwrap() - b0;
        assert!((scaled - alpha * base).abs() < 1e-12);
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        for spec in [
            NetworkSpec::Mlp(MlpSpec::uniform(3, 2, 9, 1)),
            NetworkSpec::DeepOnet(
                DeepOnetSpec::new(MlpSpec::uniform(5, 2, 6, 4), MlpSpec::uniform(2, 3, 6, 4))
                    .unwrap(),
            ),
        ] {
            let net = init_network(&spec, 42);
            let rebuilt = Network::flatten(&net.unflatten());
            assert_eq!(net.params, rebuilt);
        }
    }

    #[test]
    fn width_mismatch_is_structural() {
        let net = init_network(&NetworkSpec::Mlp(MlpSpec::uniform(2, 1, 4, 1)), 0);
        assert!(mlp_forward(&net, &[1.0f64]).is_err());
    }
}
