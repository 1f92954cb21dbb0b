//! Miniature seeded encoder-decoder.
//!
//! The architecture mirrors a VGG-style speech encoder at toy scale: two
//! convolution blocks (each two 3x3 convolutions followed by a 2x2 max-pool)
//! subsample the `(T x D)` input to `(ceil(T/4) x ceil(D/4))`, a stack of
//! bidirectional LSTM layers produces the encoder states, and a
//! unidirectional LSTM decoder attends over them with additive attention.
//! Weights are drawn uniformly from [-0.1, 0.1] with a seeded generator; no
//! training is implemented, the point is a deterministic stand-in that the
//! engine and metrics can be exercised against.
//!
//! Convolution channel counts and kernel sizes are fixed here (channels
//! 1 -> 2 -> 4, kernels 3x3 with zero padding); pooling over odd extents
//! replicates the last row/column so both axes round up.

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView2};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use super::sstm::{read_tensors, write_tensors, NamedTensor};
use super::{DecoderState, EncoderStates, LayerState, Model, Prediction};
use crate::error::{Error, Result};
use crate::types::{TokenId, Vocabulary};

/// Layer widths of the toy model. Defaults keep every tensor tiny while
/// preserving the structure: conv subsampling x2, bidirectional encoder,
/// additive attention, two-layer decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyDims {
    /// Input feature dimension `D`.
    pub feat_dim: usize,
    /// Channels after the first and second convolution block.
    pub conv_channels: (usize, usize),
    /// Bidirectional encoder layers and per-direction width.
    pub enc_layers: usize,
    pub enc_width: usize,
    /// Unidirectional decoder layers and width.
    pub dec_layers: usize,
    pub dec_width: usize,
    pub attn_dim: usize,
    pub embed_dim: usize,
}

impl Default for ToyDims {
    fn default() -> Self {
        Self {
            feat_dim: 16,
            conv_channels: (2, 4),
            enc_layers: 2,
            enc_width: 16,
            dec_layers: 2,
            dec_width: 16,
            attn_dim: 16,
            embed_dim: 16,
        }
    }
}

impl ToyDims {
    /// Encoder state width `E` (both directions concatenated).
    pub fn enc_out_dim(&self) -> usize {
        2 * self.enc_width
    }

    /// Flattened feature width entering the first encoder layer.
    pub fn conv_out_dim(&self) -> usize {
        self.conv_channels.1 * self.feat_dim.div_ceil(4)
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.feat_dim,
            self.conv_channels.0,
            self.conv_channels.1,
            self.enc_layers,
            self.enc_width,
            self.dec_layers,
            self.dec_width,
            self.attn_dim,
            self.embed_dim,
        ];
        if all.contains(&0) {
            return Err(Error::Argument("toy model dims must all be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Conv2d {
    /// `(out_channels, in_channels, 3, 3)`.
    weight: Array4<f32>,
    bias: Array1<f32>,
}

#[derive(Debug, Clone, PartialEq)]
struct LstmParams {
    /// `(4*width, input_dim)`, gate order i, f, g, o.
    w_ih: Array2<f32>,
    /// `(4*width, width)`.
    w_hh: Array2<f32>,
    bias: Array1<f32>,
}

impl LstmParams {
    fn width(&self) -> usize {
        self.w_hh.ncols()
    }

    /// One LSTM cell update.
    fn step(&self, input: &Array1<f32>, state: &LayerState) -> LayerState {
        let width = self.width();
        let pre = self.w_ih.dot(input) + self.w_hh.dot(&state.hidden) + &self.bias;
        let mut hidden = Array1::zeros(width);
        let mut cell = Array1::zeros(width);
        for u in 0..width {
            let i = sigmoid(pre[u]);
            let f = sigmoid(pre[width + u]);
            let g = pre[2 * width + u].tanh();
            let o = sigmoid(pre[3 * width + u]);
            let c = f * state.cell[u] + i * g;
            cell[u] = c;
            hidden[u] = o * c.tanh();
        }
        LayerState { hidden, cell }
    }

    fn zero_state(&self) -> LayerState {
        LayerState {
            hidden: Array1::zeros(self.width()),
            cell: Array1::zeros(self.width()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BiLstmLayer {
    fwd: LstmParams,
    bwd: LstmParams,
}

#[derive(Debug, Clone, PartialEq)]
struct Attention {
    w_enc: Array2<f32>,
    w_dec: Array2<f32>,
    bias: Array1<f32>,
    v: Array1<f32>,
}

impl Attention {
    /// Normalized additive attention weights of `query` over encoder rows.
    fn weights(&self, enc: &Array2<f32>, query: &Array1<f32>) -> Array1<f32> {
        let dec_part = self.w_dec.dot(query) + &self.bias;
        let mut energies = Array1::zeros(enc.nrows());
        for (i, row) in enc.rows().into_iter().enumerate() {
            let hidden = (self.w_enc.dot(&row) + &dec_part).mapv(f32::tanh);
            energies[i] = self.v.dot(&hidden);
        }
        softmax(&energies)
    }
}

/// The in-process toy model: deterministic forward passes over seeded
/// weights, greedy prediction with lowest-id tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    dims: ToyDims,
    vocab: Vocabulary,
    seed: u64,
    convs: Vec<Conv2d>,
    enc: Vec<BiLstmLayer>,
    attn: Attention,
    embed: Array2<f32>,
    dec: Vec<LstmParams>,
    out_weight: Array2<f32>,
    out_bias: Array1<f32>,
}

/// Build a toy model with reproducible weights drawn uniformly from
/// [-0.1, 0.1]. The same seed, dims, and vocabulary always produce
/// bit-identical weights.
pub fn generate_toy_model(seed: u64, dims: ToyDims, vocab: Vocabulary) -> Result<ToyModel> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| uniform_pm(&mut rng, 0.1)).collect() };

    let (c1, c2) = dims.conv_channels;
    let conv_shapes = [(c1, 1), (c1, c1), (c2, c1), (c2, c2)];
    let mut convs = Vec::new();
    for (out_c, in_c) in conv_shapes {
        let weight =
            Array4::from_shape_vec((out_c, in_c, 3, 3), draw(out_c * in_c * 9)).expect("shape");
        let bias = Array1::from_vec(draw(out_c));
        convs.push(Conv2d { weight, bias });
    }

    let mut enc = Vec::new();
    let mut in_dim = dims.conv_out_dim();
    for _ in 0..dims.enc_layers {
        let mut directions = Vec::new();
        for _ in 0..2 {
            directions.push(lstm_params(&mut draw, in_dim, dims.enc_width));
        }
        let bwd = directions.pop().expect("two directions");
        let fwd = directions.pop().expect("two directions");
        enc.push(BiLstmLayer { fwd, bwd });
        in_dim = dims.enc_out_dim();
    }

    let attn = Attention {
        w_enc: mat(&mut draw, dims.attn_dim, dims.enc_out_dim()),
        w_dec: mat(&mut draw, dims.attn_dim, dims.dec_width),
        bias: Array1::from_vec(draw(dims.attn_dim)),
        v: Array1::from_vec(draw(dims.attn_dim)),
    };

    let embed = mat(&mut draw, vocab.len(), dims.embed_dim);

    let mut dec = Vec::new();
    let mut in_dim = dims.embed_dim + dims.enc_out_dim();
    for _ in 0..dims.dec_layers {
        dec.push(lstm_params(&mut draw, in_dim, dims.dec_width));
        in_dim = dims.dec_width;
    }

    let out_weight = mat(&mut draw, vocab.len(), dims.dec_width + dims.enc_out_dim());
    let out_bias = Array1::from_vec(draw(vocab.len()));

    Ok(ToyModel {
        dims,
        vocab,
        seed,
        convs,
        enc,
        attn,
        embed,
        dec,
        out_weight,
        out_bias,
    })
}

fn lstm_params(
    draw: &mut impl FnMut(usize) -> Vec<f32>,
    in_dim: usize,
    width: usize,
) -> LstmParams {
    LstmParams {
        w_ih: mat(draw, 4 * width, in_dim),
        w_hh: mat(draw, 4 * width, width),
        bias: Array1::from_vec(draw(4 * width)),
    }
}

fn mat(draw: &mut impl FnMut(usize) -> Vec<f32>, rows: usize, cols: usize) -> Array2<f32> {
    Array2::from_shape_vec((rows, cols), draw(rows * cols)).expect("shape")
}

/// Uniform in [-bound, bound] built directly from raw generator words so the
/// stream of values is independent of any sampling-crate internals.
fn uniform_pm(rng: &mut ChaCha8Rng, bound: f32) -> f32 {
    let unit = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
    (2.0 * unit - 1.0) * bound
}

impl ToyModel {
    pub fn dims(&self) -> ToyDims {
        self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Full forward step: new state, scores over the whole vocabulary, and
    /// the attention weights used for the context. The engine goes through
    /// the greedy [`Model::decode_step`] wrapper instead; this surface exists
    /// for diagnostics and tests.
    pub fn decode_scores(
        &self,
        enc: &EncoderStates,
        state: &DecoderState,
        prev_token: TokenId,
    ) -> Result<(DecoderState, Array1<f32>, Array1<f32>)> {
        if prev_token >= self.vocab.len() {
            return Err(Error::Argument(format!(
                "token id {prev_token} out of range for vocabulary of {}",
                self.vocab.len()
            )));
        }
        self.check_state(state)?;
        if enc.hidden.ncols() != self.dims.enc_out_dim() {
            return Err(Error::State(format!(
                "encoder states have width {}, model expects {}",
                enc.hidden.ncols(),
                self.dims.enc_out_dim()
            )));
        }

        let query = &state.layers[self.dims.dec_layers - 1].hidden;
        let weights = self.attn.weights(&enc.hidden, query);
        let context = weights.dot(&enc.hidden);

        let mut input = Array1::zeros(self.dims.embed_dim + self.dims.enc_out_dim());
        input
            .slice_mut(s![..self.dims.embed_dim])
            .assign(&self.embed.row(prev_token));
        input.slice_mut(s![self.dims.embed_dim..]).assign(&context);

        let mut layers = Vec::with_capacity(self.dims.dec_layers);
        let mut carry = input;
        for (params, prev) in self.dec.iter().zip(&state.layers) {
            let next = params.step(&carry, prev);
            carry = next.hidden.clone();
            layers.push(next);
        }

        let mut readout = Array1::zeros(self.dims.dec_width + self.dims.enc_out_dim());
        readout.slice_mut(s![..self.dims.dec_width]).assign(&carry);
        readout
            .slice_mut(s![self.dims.dec_width..])
            .assign(&context);
        let scores = self.out_weight.dot(&readout) + &self.out_bias;

        Ok((DecoderState { layers, context }, scores, weights))
    }

    /// Attention weights of a decoder state over encoder positions.
    pub fn attention_weights(&self, enc: &EncoderStates, state: &DecoderState) -> Array1<f32> {
        let query = &state.layers[self.dims.dec_layers - 1].hidden;
        self.attn.weights(&enc.hidden, query)
    }

    fn check_state(&self, state: &DecoderState) -> Result<()> {
        if state.layers.len() != self.dims.dec_layers {
            return Err(Error::State(format!(
                "state has {} layers, model has {}",
                state.layers.len(),
                self.dims.dec_layers
            )));
        }
        for layer in &state.layers {
            if layer.hidden.len() != self.dims.dec_width || layer.cell.len() != self.dims.dec_width
            {
                return Err(Error::State(format!(
                    "state width {} does not match decoder width {}",
                    layer.hidden.len(),
                    self.dims.dec_width
                )));
            }
        }
        Ok(())
    }

    /// Two convolution-pool blocks, then the bidirectional encoder stack.
    fn run_encoder(&self, prefix: ArrayView2<'_, f32>) -> Array2<f32> {
        let (t, d) = (prefix.nrows(), prefix.ncols());
        let mut maps = Array3::zeros((1, t, d));
        maps.slice_mut(s![0, .., ..]).assign(&prefix);

        for block in 0..2 {
            maps = conv_relu(&self.convs[2 * block], &maps);
            maps = conv_relu(&self.convs[2 * block + 1], &maps);
            maps = max_pool_2x2(&maps);
        }

        let (channels, tp, dp) = maps.dim();
        let mut seq = Array2::zeros((tp, channels * dp));
        for i in 0..tp {
            for ch in 0..channels {
                for j in 0..dp {
                    seq[[i, ch * dp + j]] = maps[[ch, i, j]];
                }
            }
        }

        let mut layer_in = seq;
        for layer in &self.enc {
            layer_in = bilstm(layer, &layer_in);
        }
        layer_in
    }
}

impl Model for ToyModel {
    type Enc = EncoderStates;
    type State = DecoderState;

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn feature_dim(&self) -> usize {
        self.dims.feat_dim
    }

    fn init_decoder_state(&self) -> Result<DecoderState> {
        Ok(DecoderState {
            layers: self.dec.iter().map(LstmParams::zero_state).collect(),
            context: Array1::zeros(self.dims.enc_out_dim()),
        })
    }

    fn encode(&self, prefix: ArrayView2<'_, f32>) -> Result<EncoderStates> {
        if prefix.nrows() == 0 {
            return Err(Error::Argument("cannot encode an empty prefix".into()));
        }
        if prefix.ncols() != self.dims.feat_dim {
            return Err(Error::Config(format!(
                "features have dimension {}, model expects {}",
                prefix.ncols(),
                self.dims.feat_dim
            )));
        }
        let hidden = self.run_encoder(prefix);
        debug_assert_eq!(hidden.nrows(), prefix.nrows().div_ceil(4));
        Ok(EncoderStates {
            hidden,
            source_frames_consumed: prefix.nrows(),
        })
    }

    fn encoding_len(&self, enc: &EncoderStates) -> usize {
        enc.len()
    }

    fn decode_step(
        &self,
        enc: &EncoderStates,
        state: &DecoderState,
        prev_token: TokenId,
    ) -> Result<Prediction<DecoderState>> {
        let (next, scores, _) = self.decode_scores(enc, state, prev_token)?;
        let (token, score) = super::predict(scores.as_slice().expect("contiguous"))
            .expect("vocabulary is non-empty");
        Ok(Prediction {
            state: next,
            token,
            score,
        })
    }
}

/// Save the model weights as an SSTM file. The vocabulary is not part of the
/// container and travels separately.
pub fn save_weights(model: &ToyModel, path: impl AsRef<Path>) -> Result<()> {
    write_tensors(path, &to_tensors(model))
}

/// Load toy model weights from an SSTM file. `dims` and `vocab` must match
/// the file contents; every named tensor must be present with its declared
/// shape.
pub fn load_weights(path: impl AsRef<Path>, dims: ToyDims, vocab: Vocabulary) -> Result<ToyModel> {
    let display = path.as_ref().display().to_string();
    let tensors = read_tensors(&path)?;
    from_tensors(tensors, dims, vocab).map_err(|e| match e {
        Error::Argument(m) => Error::format(&display, m),
        other => other,
    })
}

fn to_tensors(model: &ToyModel) -> Vec<NamedTensor> {
    let mut out = Vec::new();
    let push2 = |out: &mut Vec<NamedTensor>, name: String, a: &Array2<f32>| {
        out.push(NamedTensor {
            name,
            dims: vec![a.nrows(), a.ncols()],
            data: a.iter().copied().collect(),
        });
    };
    let push1 = |out: &mut Vec<NamedTensor>, name: String, a: &Array1<f32>| {
        out.push(NamedTensor {
            name,
            dims: vec![a.len()],
            data: a.to_vec(),
        });
    };

    for (idx, conv) in model.convs.iter().enumerate() {
        let (o, i, kh, kw) = conv.weight.dim();
        out.push(NamedTensor {
            name: format!("conv{idx}.weight"),
            dims: vec![o, i, kh, kw],
            data: conv.weight.iter().copied().collect(),
        });
        push1(&mut out, format!("conv{idx}.bias"), &conv.bias);
    }
    for (l, layer) in model.enc.iter().enumerate() {
        for (dir, params) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
            push2(&mut out, format!("enc.l{l}.{dir}.w_ih"), &params.w_ih);
            push2(&mut out, format!("enc.l{l}.{dir}.w_hh"), &params.w_hh);
            push1(&mut out, format!("enc.l{l}.{dir}.bias"), &params.bias);
        }
    }
    push2(&mut out, "attn.w_enc".into(), &model.attn.w_enc);
    push2(&mut out, "attn.w_dec".into(), &model.attn.w_dec);
    push1(&mut out, "attn.bias".into(), &model.attn.bias);
    push1(&mut out, "attn.v".into(), &model.attn.v);
    push2(&mut out, "dec.embed".into(), &model.embed);
    for (l, params) in model.dec.iter().enumerate() {
        push2(&mut out, format!("dec.l{l}.w_ih"), &params.w_ih);
        push2(&mut out, format!("dec.l{l}.w_hh"), &params.w_hh);
        push1(&mut out, format!("dec.l{l}.bias"), &params.bias);
    }
    push2(&mut out, "out.weight".into(), &model.out_weight);
    push1(&mut out, "out.bias".into(), &model.out_bias);
    out.push(NamedTensor {
        name: "seed".into(),
        dims: vec![1],
        data: vec![model.seed as f32],
    });
    out
}

fn from_tensors(tensors: Vec<NamedTensor>, dims: ToyDims, vocab: Vocabulary) -> Result<ToyModel> {
    dims.validate()?;
    let mut map: std::collections::HashMap<String, NamedTensor> =
        tensors.into_iter().map(|t| (t.name.clone(), t)).collect();
    fn take2(
        map: &mut std::collections::HashMap<String, NamedTensor>,
        name: String,
        rows: usize,
        cols: usize,
    ) -> Result<Array2<f32>> {
        let t = map
            .remove(&name)
            .ok_or_else(|| Error::Argument(format!("missing tensor {name:?}")))?;
        if t.dims != [rows, cols] {
            return Err(Error::Argument(format!(
                "tensor {name:?} has shape {:?}, expected [{rows}, {cols}]",
                t.dims
            )));
        }
        Ok(Array2::from_shape_vec((rows, cols), t.data).expect("validated shape"))
    }
    fn take1(
        map: &mut std::collections::HashMap<String, NamedTensor>,
        name: String,
        len: usize,
    ) -> Result<Array1<f32>> {
        let t = map
            .remove(&name)
            .ok_or_else(|| Error::Argument(format!("missing tensor {name:?}")))?;
        if t.dims != [len] {
            return Err(Error::Argument(format!(
                "tensor {name:?} has shape {:?}, expected [{len}]",
                t.dims
            )));
        }
        Ok(Array1::from_vec(t.data))
    }
    fn take4(
        map: &mut std::collections::HashMap<String, NamedTensor>,
        name: String,
        shape: (usize, usize, usize, usize),
    ) -> Result<Array4<f32>> {
        let t = map
            .remove(&name)
            .ok_or_else(|| Error::Argument(format!("missing tensor {name:?}")))?;
        let want = [shape.0, shape.1, shape.2, shape.3];
        if t.dims != want {
            return Err(Error::Argument(format!(
                "tensor {name:?} has shape {:?}, expected {want:?}",
                t.dims
            )));
        }
        Ok(Array4::from_shape_vec(shape, t.data).expect("validated shape"))
    }

    let (c1, c2) = dims.conv_channels;
    let conv_shapes = [(c1, 1), (c1, c1), (c2, c1), (c2, c2)];
    let mut convs = Vec::new();
    for (idx, (out_c, in_c)) in conv_shapes.into_iter().enumerate() {
        convs.push(Conv2d {
            weight: take4(&mut map, format!("conv{idx}.weight"), (out_c, in_c, 3, 3))?,
            bias: take1(&mut map, format!("conv{idx}.bias"), out_c)?,
        });
    }

    let mut enc = Vec::new();
    let mut in_dim = dims.conv_out_dim();
    for l in 0..dims.enc_layers {
        let mut dirs = Vec::new();
        for dir in ["fwd", "bwd"] {
            dirs.push(LstmParams {
                w_ih: take2(
                    &mut map,
                    format!("enc.l{l}.{dir}.w_ih"),
                    4 * dims.enc_width,
                    in_dim,
                )?,
                w_hh: take2(
                    &mut map,
                    format!("enc.l{l}.{dir}.w_hh"),
                    4 * dims.enc_width,
                    dims.enc_width,
                )?,
                bias: take1(&mut map, format!("enc.l{l}.{dir}.bias"), 4 * dims.enc_width)?,
            });
        }
        let bwd = dirs.pop().expect("two directions");
        let fwd = dirs.pop().expect("two directions");
        enc.push(BiLstmLayer { fwd, bwd });
        in_dim = dims.enc_out_dim();
    }

    let attn = Attention {
        w_enc: take2(
            &mut map,
            "attn.w_enc".into(),
            dims.attn_dim,
            dims.enc_out_dim(),
        )?,
        w_dec: take2(&mut map, "attn.w_dec".into(), dims.attn_dim, dims.dec_width)?,
        bias: take1(&mut map, "attn.bias".into(), dims.attn_dim)?,
        v: take1(&mut map, "attn.v".into(), dims.attn_dim)?,
    };

    let embed = take2(&mut map, "dec.embed".into(), vocab.len(), dims.embed_dim)?;
    let mut dec = Vec::new();
    let mut in_dim = dims.embed_dim + dims.enc_out_dim();
    for l in 0..dims.dec_layers {
        dec.push(LstmParams {
            w_ih: take2(
                &mut map,
                format!("dec.l{l}.w_ih"),
                4 * dims.dec_width,
                in_dim,
            )?,
            w_hh: take2(
                &mut map,
                format!("dec.l{l}.w_hh"),
                4 * dims.dec_width,
                dims.dec_width,
            )?,
            bias: take1(&mut map, format!("dec.l{l}.bias"), 4 * dims.dec_width)?,
        });
        in_dim = dims.dec_width;
    }

    let out_weight = take2(
        &mut map,
        "out.weight".into(),
        vocab.len(),
        dims.dec_width + dims.enc_out_dim(),
    )?;
    let out_bias = take1(&mut map, "out.bias".into(), vocab.len())?;
    let seed = take1(&mut map, "seed".into(), 1)?[0] as u64;

    Ok(ToyModel {
        dims,
        vocab,
        seed,
        convs,
        enc,
        attn,
        embed,
        dec,
        out_weight,
        out_bias,
    })
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(energies: &Array1<f32>) -> Array1<f32> {
    let max = energies.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps = energies.mapv(|e| (e - max).exp());
    let sum = exps.sum();
    exps / sum
}

/// 3x3 convolution with zero padding, followed by ReLU.
fn conv_relu(conv: &Conv2d, input: &Array3<f32>) -> Array3<f32> {
    let (in_c, h, w) = input.dim();
    let out_c = conv.weight.dim().0;
    debug_assert_eq!(conv.weight.dim().1, in_c);
    let mut out = Array3::zeros((out_c, h, w));
    for oc in 0..out_c {
        for i in 0..h {
            for j in 0..w {
                let mut acc = conv.bias[oc];
                for ic in 0..in_c {
                    for di in 0..3 {
                        for dj in 0..3 {
                            let ii = i as isize + di as isize - 1;
                            let jj = j as isize + dj as isize - 1;
                            if ii >= 0 && jj >= 0 && (ii as usize) < h && (jj as usize) < w {
                                acc += conv.weight[[oc, ic, di, dj]]
                                    * input[[ic, ii as usize, jj as usize]];
                            }
                        }
                    }
                }
                out[[oc, i, j]] = acc.max(0.0);
            }
        }
    }
    out
}

/// 2x2 max-pool with stride 2. Windows hanging past the edge take the max of
/// the cells that exist, which is what replicating the last row/column would
/// give; both output extents round up.
fn max_pool_2x2(input: &Array3<f32>) -> Array3<f32> {
    let (channels, h, w) = input.dim();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Array3::zeros((channels, oh, ow));
    for ch in 0..channels {
        for i in 0..oh {
            for j in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for ii in (2 * i)..(2 * i + 2).min(h) {
                    for jj in (2 * j)..(2 * j + 2).min(w) {
                        m = m.max(input[[ch, ii, jj]]);
                    }
                }
                out[[ch, i, j]] = m;
            }
        }
    }
    out
}

fn bilstm(layer: &BiLstmLayer, input: &Array2<f32>) -> Array2<f32> {
    let t = input.nrows();
    let width = layer.fwd.width();
    let mut out = Array2::zeros((t, 2 * width));

    let mut state = layer.fwd.zero_state();
    for i in 0..t {
        state = layer.fwd.step(&input.row(i).to_owned(), &state);
        out.slice_mut(s![i, ..width]).assign(&state.hidden);
    }
    let mut state = layer.bwd.zero_state();
    for i in (0..t).rev() {
        state = layer.bwd.step(&input.row(i).to_owned(), &state);
        out.slice_mut(s![i, width..]).assign(&state.hidden);
    }
    out
}
