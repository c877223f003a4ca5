use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{check_width, Classifier};
use crate::numkit::{bce_loss, sigmoid, AdamState, DenseMatrix, Scalar, SplitMix64};
use crate::Real;

/// Training knobs for the recurrent detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrentConfig {
    /// Hidden units per direction; the head consumes both directions.
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Fraction of head inputs dropped during training steps only.
    pub dropout_rate: f64,
}

impl Default for RecurrentConfig {
    fn default() -> Self {
        RecurrentConfig {
            hidden_size: 220,
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 32,
            dropout_rate: 0.5,
        }
    }
}

impl RecurrentConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "hidden_size and batch_size must be positive".to_owned(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must lie in [0,1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One gate's parameters in the split form of the concatenated convention:
/// the pre-activation is `h_prev * w_rec + x * w_in + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams<S: Scalar> {
    pub w_rec: DenseMatrix<S>,
    pub w_in: DenseMatrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> GateParams<S> {
    fn init(hidden: usize, features: usize, rng: &mut SplitMix64) -> Self {
        GateParams {
            w_rec: xavier(hidden, hidden, rng),
            w_in: xavier(features, hidden, rng),
            bias: vec![S::zero(); hidden],
        }
    }
}

/// The four standard gates of one scan direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionParams<S: Scalar> {
    pub forget: GateParams<S>,
    pub input: GateParams<S>,
    pub output: GateParams<S>,
    pub candidate: GateParams<S>,
}

impl<S: Scalar> DirectionParams<S> {
    fn init(hidden: usize, features: usize, rng: &mut SplitMix64) -> Self {
        DirectionParams {
            forget: GateParams::init(hidden, features, rng),
            input: GateParams::init(hidden, features, rng),
            output: GateParams::init(hidden, features, rng),
            candidate: GateParams::init(hidden, features, rng),
        }
    }
}

/// Bi-directional single-layer recurrent detector over tabular records.
///
/// A record is one timestep, so each direction performs exactly one cell
/// update from zero initial state. Two consequences are load-bearing:
/// the recurrent half `w_rec` of every gate multiplies a zero hidden
/// state, and the forget gate multiplies a zero cell state, so both carry
/// identically zero gradients. The parameters still exist, are persisted,
/// and are covered by gradient checks as exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiRecurrent<S: Scalar> {
    pub hidden_size: usize,
    pub n_features: usize,
    pub dropout_rate: f64,
    pub forward_dir: DirectionParams<S>,
    pub backward_dir: DirectionParams<S>,
    pub head_weight: Vec<S>,
    pub head_bias: S,
}

/// Activations of one direction for a batch, kept for backpropagation.
struct DirectionActs<S: Scalar> {
    input_gate: DenseMatrix<S>,
    output_gate: DenseMatrix<S>,
    candidate: DenseMatrix<S>,
    tanh_cell: DenseMatrix<S>,
}

/// Loss and gradients of one batch. `tensors` is aligned, name for name,
/// with [`BiRecurrent::tensors`]; `inputs` is the gradient of the mean
/// loss with respect to the input batch.
pub struct BatchGradients<S: Scalar> {
    pub loss: S,
    pub tensors: Vec<(String, Vec<S>)>,
    pub inputs: DenseMatrix<S>,
}

impl<S: Scalar> BiRecurrent<S> {
    pub fn init(n_features: usize, cfg: &RecurrentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if n_features == 0 {
            return Err(Error::Config("model needs at least one feature".to_owned()));
        }
        let hidden = cfg.hidden_size;
        let mut rng = SplitMix64::substream(seed, 0);
        Ok(BiRecurrent {
            hidden_size: hidden,
            n_features,
            dropout_rate: cfg.dropout_rate,
            forward_dir: DirectionParams::init(hidden, n_features, &mut rng),
            backward_dir: DirectionParams::init(hidden, n_features, &mut rng),
            head_weight: xavier::<S>(2 * hidden, 1, &mut rng).data().to_vec(),
            head_bias: S::zero(),
        })
    }

    /// One cell update from zero state. The forget gate's activation is
    /// skipped because it would only scale the zero previous cell.
    fn direction_forward(
        params: &DirectionParams<S>,
        x: &DenseMatrix<S>,
    ) -> Result<(DirectionActs<S>, DenseMatrix<S>)> {
        let input_gate = x
            .affine(&params.input.w_in, &params.input.bias)?
            .map(sigmoid);
        let output_gate = x
            .affine(&params.output.w_in, &params.output.bias)?
            .map(sigmoid);
        let candidate = x
            .affine(&params.candidate.w_in, &params.candidate.bias)?
            .map(|v| v.tanh());
        let cell = input_gate.zip_with(&candidate, |i, g| i * g)?;
        let tanh_cell = cell.map(|v| v.tanh());
        let hidden = output_gate.zip_with(&tanh_cell, |o, t| o * t)?;
        Ok((
            DirectionActs {
                input_gate,
                output_gate,
                candidate,
                tanh_cell,
            },
            hidden,
        ))
    }

    /// Hidden states of both directions concatenated per row.
    fn forward_hidden(
        &self,
        x: &DenseMatrix<S>,
    ) -> Result<(DirectionActs<S>, DirectionActs<S>, DenseMatrix<S>)> {
        let (fwd_acts, fwd_h) = Self::direction_forward(&self.forward_dir, x)?;
        let (bwd_acts, bwd_h) = Self::direction_forward(&self.backward_dir, x)?;
        let b = x.rows();
        let h = self.hidden_size;
        let mut concat = DenseMatrix::zeros(b, 2 * h);
        for r in 0..b {
            concat.row_mut(r)[..h].copy_from_slice(fwd_h.row(r));
            concat.row_mut(r)[h..].copy_from_slice(bwd_h.row(r));
        }
        Ok((fwd_acts, bwd_acts, concat))
    }

    fn head_scores(&self, concat: &DenseMatrix<S>) -> Result<Vec<S>> {
        let w = DenseMatrix::from_vec(2 * self.hidden_size, 1, self.head_weight.clone())?;
        let z = concat.affine(&w, std::slice::from_ref(&self.head_bias))?;
        Ok(z.data().iter().map(|&v| sigmoid(v)).collect())
    }

    /// Mean clamped BCE of the batch under inference-mode forward.
    pub fn loss(&self, x: &DenseMatrix<S>, y: &[u8]) -> Result<S> {
        let probs = self.predict_proba(x)?;
        let targets: Vec<S> = y.iter().map(|&v| S::from_f64_lossy(v as f64)).collect();
        Ok(bce_loss(&probs, &targets)?.0)
    }

    /// Loss and all gradients for one batch. `dropout` carries the rng
    /// driving the head-input mask during training; inference-grade
    /// gradients (attacks, checks) pass `None`.
    pub fn batch_gradients(
        &self,
        x: &DenseMatrix<S>,
        y: &[u8],
        mut dropout: Option<&mut SplitMix64>,
    ) -> Result<BatchGradients<S>> {
        check_width("bi_recurrent", self.n_features, x)?;
        if y.len() != x.rows() {
            return Err(Error::shape(
                "bi_recurrent targets",
                format!("{} rows", x.rows()),
                format!("{} labels", y.len()),
            ));
        }
        let b = x.rows();
        let h = self.hidden_size;

        let (fwd_acts, bwd_acts, concat) = self.forward_hidden(x)?;
        // Inverted dropout: kept cells scale by 1/keep so inference needs
        // no rescaling. The mask is kept for the backward pass.
        let (dropped, mask) = match dropout.as_deref_mut() {
            Some(rng) => {
                let scale = S::from_f64_lossy(1.0 / (1.0 - self.dropout_rate));
                let mut mask = DenseMatrix::zeros(b, 2 * h);
                for v in mask.data_mut() {
                    *v = if rng.next_f64() < self.dropout_rate {
                        S::zero()
                    } else {
                        scale
                    };
                }
                (concat.zip_with(&mask, |c, m| c * m)?, Some(mask))
            }
            None => (concat.clone(), None),
        };

        let probs = self.head_scores(&dropped)?;
        let targets: Vec<S> = y.iter().map(|&v| S::from_f64_lossy(v as f64)).collect();
        let loss = bce_loss(&probs, &targets)?.0;

        // d(mean BCE)/d(head pre-activation), the usual sigmoid shortcut.
        let inv_b = S::from_f64_lossy(1.0 / b as f64);
        let dz = DenseMatrix::from_vec(
            b,
            1,
            probs
                .iter()
                .zip(&targets)
                .map(|(&p, &t)| (p - t) * inv_b)
                .collect(),
        )?;

        let dw_head = dropped.transpose().matmul(&dz)?;
        let db_head = dz.data().iter().fold(S::zero(), |acc, &v| acc + v);
        let w_head_row = DenseMatrix::row_vector(self.head_weight.clone())?;
        let mut d_concat = dz.matmul(&w_head_row)?;
        if let Some(mask) = &mask {
            d_concat = d_concat.zip_with(mask, |g, m| g * m)?;
        }

        let mut d_fwd = DenseMatrix::zeros(b, h);
        let mut d_bwd = DenseMatrix::zeros(b, h);
        for r in 0..b {
            d_fwd.row_mut(r).copy_from_slice(&d_concat.row(r)[..h]);
            d_bwd.row_mut(r).copy_from_slice(&d_concat.row(r)[h..]);
        }

        let x_t = x.transpose();
        let (fwd_grads, fwd_dx) = Self::direction_backward(&self.forward_dir, &fwd_acts, &d_fwd, x, &x_t)?;
        let (bwd_grads, bwd_dx) = Self::direction_backward(&self.backward_dir, &bwd_acts, &d_bwd, x, &x_t)?;
        let inputs = fwd_dx.add(&bwd_dx)?;

        let mut tensors = Vec::with_capacity(26);
        for (dir_name, grads) in [("forward", fwd_grads), ("backward", bwd_grads)] {
            for (gate_name, gate) in grads {
                tensors.push((format!("{dir_name}.{gate_name}.w_rec"), gate.0));
                tensors.push((format!("{dir_name}.{gate_name}.w_in"), gate.1));
                tensors.push((format!("{dir_name}.{gate_name}.bias"), gate.2));
            }
        }
        tensors.push(("head.weight".to_owned(), dw_head.data().to_vec()));
        tensors.push(("head.bias".to_owned(), vec![db_head]));

        Ok(BatchGradients {
            loss,
            tensors,
            inputs,
        })
    }

    /// Per-gate gradients of one direction plus the input gradient.
    /// Returned gate tuples are (w_rec, w_in, bias) flat vectors; w_rec
    /// and the whole forget gate are exact zeros by the single-step
    /// structure.
    #[allow(clippy::type_complexity)]
    fn direction_backward(
        params: &DirectionParams<S>,
        acts: &DirectionActs<S>,
        dh: &DenseMatrix<S>,
        x: &DenseMatrix<S>,
        x_t: &DenseMatrix<S>,
    ) -> Result<(Vec<(&'static str, (Vec<S>, Vec<S>, Vec<S>))>, DenseMatrix<S>)> {
        let one = S::one();
        let d_out = dh.zip_with(&acts.tanh_cell, |g, t| g * t)?;
        let d_cell = dh
            .zip_with(&acts.output_gate, |g, o| g * o)?
            .zip_with(&acts.tanh_cell, |g, t| g * (one - t * t))?;
        let d_input = d_cell.zip_with(&acts.candidate, |g, c| g * c)?;
        let d_candidate = d_cell.zip_with(&acts.input_gate, |g, i| g * i)?;

        let dz_out = d_out.zip_with(&acts.output_gate, |g, o| g * o * (one - o))?;
        let dz_input = d_input.zip_with(&acts.input_gate, |g, i| g * i * (one - i))?;
        let dz_candidate = d_candidate.zip_with(&acts.candidate, |g, c| g * (one - c * c))?;

        let hidden = params.forget.bias.len();
        let zero_gate = (
            vec![S::zero(); hidden * hidden],
            vec![S::zero(); x.cols() * hidden],
            vec![S::zero(); hidden],
        );

        let mut dx = dz_input.matmul(&params.input.w_in.transpose())?;
        dx = dx.add(&dz_out.matmul(&params.output.w_in.transpose())?)?;
        dx = dx.add(&dz_candidate.matmul(&params.candidate.w_in.transpose())?)?;

        let gate_grads = |dz: &DenseMatrix<S>| -> Result<(Vec<S>, Vec<S>, Vec<S>)> {
            Ok((
                vec![S::zero(); hidden * hidden],
                x_t.matmul(dz)?.data().to_vec(),
                dz.column_sums(),
            ))
        };

        Ok((
            vec![
                ("forget", zero_gate),
                ("input", gate_grads(&dz_input)?),
                ("output", gate_grads(&dz_out)?),
                ("candidate", gate_grads(&dz_candidate)?),
            ],
            dx,
        ))
    }

    /// All trainable tensors in the canonical order used by gradients.
    pub fn tensors(&self) -> Vec<(String, &[S])> {
        let mut out: Vec<(String, &[S])> = Vec::with_capacity(26);
        for (dir_name, dir) in [
            ("forward", &self.forward_dir),
            ("backward", &self.backward_dir),
        ] {
            for (gate_name, gate) in [
                ("forget", &dir.forget),
                ("input", &dir.input),
                ("output", &dir.output),
                ("candidate", &dir.candidate),
            ] {
                out.push((format!("{dir_name}.{gate_name}.w_rec"), gate.w_rec.data()));
                out.push((format!("{dir_name}.{gate_name}.w_in"), gate.w_in.data()));
                out.push((format!("{dir_name}.{gate_name}.bias"), &gate.bias));
            }
        }
        out.push(("head.weight".to_owned(), &self.head_weight));
        out.push(("head.bias".to_owned(), std::slice::from_ref(&self.head_bias)));
        out
    }

    /// Mutable view of the same tensors in the same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [S])> {
        let mut out: Vec<(String, &mut [S])> = Vec::with_capacity(26);
        for (dir_name, dir) in [
            ("forward", &mut self.forward_dir),
            ("backward", &mut self.backward_dir),
        ] {
            for (gate_name, gate) in [
                ("forget", &mut dir.forget),
                ("input", &mut dir.input),
                ("output", &mut dir.output),
                ("candidate", &mut dir.candidate),
            ] {
                out.push((
                    format!("{dir_name}.{gate_name}.w_rec"),
                    gate.w_rec.data_mut(),
                ));
                out.push((format!("{dir_name}.{gate_name}.w_in"), gate.w_in.data_mut()));
                out.push((format!("{dir_name}.{gate_name}.bias"), gate.bias.as_mut_slice()));
            }
        }
        out.push(("head.weight".to_owned(), self.head_weight.as_mut_slice()));
        out.push((
            "head.bias".to_owned(),
            std::slice::from_mut(&mut self.head_bias),
        ));
        out
    }
}

impl<S: Scalar> Classifier<S> for BiRecurrent<S> {
    fn family(&self) -> &'static str {
        "bi_recurrent"
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &DenseMatrix<S>) -> Result<Vec<S>> {
        check_width("bi_recurrent", self.n_features, x)?;
        let (_, _, concat) = self.forward_hidden(x)?;
        self.head_scores(&concat)
    }

    fn input_gradient(&self, x: &DenseMatrix<S>, y: &[u8]) -> Result<DenseMatrix<S>> {
        Ok(self.batch_gradients(x, y, None)?.inputs)
    }
}

/// Trains on the dataset's train split with minibatch Adam.
pub fn train_birecurrent(
    dataset: &Dataset,
    cfg: &RecurrentConfig,
    seed: u64,
) -> Result<BiRecurrent<Real>> {
    let (x, y) = dataset.train_xy();
    if y.iter().all(|&v| v == 0) || y.iter().all(|&v| v == 1) {
        return Err(Error::Training(
            "train split contains a single class".to_owned(),
        ));
    }

    let mut model = BiRecurrent::<Real>::init(x.cols(), cfg, seed)?;
    let mut adams: Vec<AdamState<Real>> = model
        .tensors()
        .iter()
        .map(|(_, t)| AdamState::new(t.len(), cfg.learning_rate))
        .collect();
    let mut shuffle_rng = SplitMix64::substream(seed, 1);
    let mut dropout_rng = SplitMix64::substream(seed, 2);

    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(batch);
            let yb: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
            let grads = model.batch_gradients(&xb, &yb, Some(&mut dropout_rng))?;
            for ((name, tensor), (adam, (grad_name, grad))) in model
                .tensors_mut()
                .into_iter()
                .zip(adams.iter_mut().zip(grads.tensors.iter()))
            {
                debug_assert_eq!(&name, grad_name);
                adam.step(tensor, grad)?;
            }
        }
    }
    Ok(model)
}

/// Uniform Xavier init for a `rows x cols` tensor.
fn xavier<S: Scalar>(rows: usize, cols: usize, rng: &mut SplitMix64) -> DenseMatrix<S> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    rng.sample_uniform(rows, cols, S::from_f64_lossy(-bound), S::from_f64_lossy(bound))
}
