//! Fully-connected rectifier encoder with a hand-written backward pass.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{l2_normalize, EmbeddingBatch};

/// Magic line opening a text checkpoint.
pub const CHECKPOINT_MAGIC: &str = "dynloc-encoder";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl EncoderConfig {
    pub fn new(input_dim: usize) -> Self {
        EncoderConfig {
            input_dim,
            hidden: vec![64, 64],
            output_dim: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(format!(
                "all encoder widths must be at least 1: {self:?}"
            )));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.input_dim);
        widths.extend(&self.hidden);
        widths.push(self.output_dim);
        widths
    }
}

/// Affine map `x W + b`, with `W` stored as `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// Gradients laid out like [`Encoder::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub layers: Vec<Dense>,
}

/// Activations kept from [`Encoder::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    // Input to each layer; for layers after the first this is post-rectifier.
    inputs: Vec<Array2<f64>>,
}

/// Rectifier after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    layers: Vec<Dense>,
}

impl Encoder {
    /// Uniform weights in `+-sqrt(6 / fan_in)`, zero biases.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Encoder { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        for (idx, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::Shape(format!("layer {idx}: bias length != output width")));
            }
            if idx > 0 && layers[idx - 1].fan_out() != layer.fan_in() {
                return Err(Error::Shape(format!("layer {idx}: input width mismatch")));
            }
        }
        Ok(Encoder { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_width(&self, features: &ArrayView2<'_, f64>) -> Result<()> {
        if features.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "encoder expects {} features, got {}",
                self.input_dim(),
                features.ncols()
            )));
        }
        Ok(())
    }

    fn run(&self, features: ArrayView2<'_, f64>, mut keep: Option<&mut Vec<Array2<f64>>>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = features.to_owned();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut next = h.dot(&layer.weights) + &layer.bias;
            if idx != last {
                next.mapv_inplace(|v| v.max(0.0));
            }
            if let Some(keep) = keep.as_deref_mut() {
                keep.push(h);
            }
            h = next;
        }
        h
    }

    /// Raw encoder outputs for any number of rows.
    pub fn embed(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_width(&features)?;
        Ok(self.run(features, None))
    }

    /// Row-normalized encoder outputs for any number of rows.
    pub fn embed_unit(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(l2_normalize(self.embed(features)?.view()))
    }

    pub fn forward(&self, features: ArrayView2<'_, f64>) -> Result<(EmbeddingBatch, ForwardCache)> {
        self.check_width(&features)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let raw = self.run(features, Some(&mut inputs));
        Ok((EmbeddingBatch::new(raw)?, ForwardCache { inputs }))
    }

    /// Parameter gradients given `dL/d(raw outputs)`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: ArrayView2<'_, f64>) -> Result<EncoderGrads> {
        let rows = cache.inputs[0].nrows();
        if grad_out.dim() != (rows, self.output_dim()) {
            return Err(Error::Shape(format!(
                "output gradient is {:?}, expected ({rows}, {})",
                grad_out.dim(),
                self.output_dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.to_owned();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[idx];
            grads.push(Dense {
                weights: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if idx > 0 {
                let mut upstream = delta.dot(&layer.weights.t());
                // Inputs past the first layer are rectifier outputs; zero
                // means the unit was inactive.
                upstream.zip_mut_with(input, |g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = upstream;
            }
        }
        grads.reverse();
        Ok(EncoderGrads { layers: grads })
    }

    /// Writes the versioned text checkpoint.
    ///
    /// ```text
    /// dynloc-encoder 1
    /// layers <count>
    /// layer <index> <in> <out> <relu|linear>
    /// w <out values>        (repeated <in> times, row-major)
    /// b <out values>
    /// ```
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(out, "layers {}", self.layers.len())?;
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let act = if idx == last { "linear" } else { "relu" };
            writeln!(out, "layer {idx} {} {} {act}", layer.fan_in(), layer.fan_out())?;
            for row in layer.weights.rows() {
                write!(out, "w")?;
                for v in row {
                    write!(out, " {v:?}")?;
                }
                writeln!(out)?;
            }
            write!(out, "b")?;
            for v in &layer.bias {
                write!(out, " {v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(input: R, source: &str) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
        let bad = |line: u64, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let mut next = |what: &str| -> Result<(u64, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(bad(0, format!("unexpected end of file, expected {what}"))),
            }
        };
        let parse_floats = |line: u64, fields: &[&str], want: usize| -> Result<Vec<f64>> {
            if fields.len() != want {
                return Err(bad(line, format!("expected {want} values, got {}", fields.len())));
            }
            fields
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(line, format!("invalid number `{f}`")))
                })
                .collect()
        };

        let (n, header) = next("header")?;
        if header != format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}") {
            return Err(bad(n, format!("unsupported checkpoint header `{header}`")));
        }
        let (n, count_line) = next("layer count")?;
        let count: usize = count_line
            .strip_prefix("layers ")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad(n, "expected `layers <count>`".into()))?;

        let mut layers = Vec::with_capacity(count);
        for idx in 0..count {
            let (n, head) = next("layer header")?;
            let fields: Vec<&str> = head.split_whitespace().collect();
            let dims = match fields.as_slice() {
                ["layer", i, fan_in, fan_out, _act] if i.parse::<usize>().ok() == Some(idx) => {
                    fan_in.parse::<usize>().ok().zip(fan_out.parse::<usize>().ok())
                }
                _ => None,
            };
            let (fan_in, fan_out) = dims.ok_or_else(|| bad(n, format!("malformed header for layer {idx}")))?;
            let mut weights = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_in {
                let (n, row) = next("weight row")?;
                let fields: Vec<&str> = row.split_whitespace().collect();
                if fields.first() != Some(&"w") {
                    return Err(bad(n, "expected weight row".into()));
                }
                weights.extend(parse_floats(n, &fields[1..], fan_out)?);
            }
            let (n, row) = next("bias row")?;
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.first() != Some(&"b") {
                return Err(bad(n, "expected bias row".into()));
            }
            let bias = parse_floats(n, &fields[1..], fan_out)?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((fan_in, fan_out), weights).map_err(|e| Error::Shape(e.to_string()))?,
                bias: Array1::from(bias),
            });
        }
        Encoder::from_layers(layers)
    }
}
