//! Single-layer autoencoder with tied weights.
//!
//! The encoder computes `h = σ(W·x + b_enc)` and the decoder
//! `x̂ = σ(Wᵀ·h + b_dec)`; there is no separate decoder matrix. Training
//! minimizes `L = (1 / (N·d)) · Σ ‖x − x̂‖²` over a batch of `N` samples of
//! width `d`, so `rmse = sqrt(L)` over the same set.

use crate::error::{Error, Result};
use crate::numerics::{
    axpy, axpy_block, dot, dot_block, rank_update_block, sigmoid_in_place, with_simd, Matrix,
    RandomStream, Vector, BLOCK,
};

#[derive(Clone, Debug, PartialEq)]
pub struct TiedAutoencoder {
    /// hidden × visible
    weights: Matrix,
    enc_bias: Vector,
    dec_bias: Vector,
}

/// Loss gradient with the same shapes as the autoencoder it was taken from.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub d_weights: Matrix,
    pub d_enc_bias: Vector,
    pub d_dec_bias: Vector,
}

impl TiedAutoencoder {
    pub fn new(weights: Matrix, enc_bias: Vector, dec_bias: Vector) -> Result<Self> {
        if enc_bias.len() != weights.rows() {
            return Err(Error::dim(
                "TiedAutoencoder::new (enc_bias)",
                weights.rows(),
                enc_bias.len(),
            ));
        }
        if dec_bias.len() != weights.cols() {
            return Err(Error::dim(
                "TiedAutoencoder::new (dec_bias)",
                weights.cols(),
                dec_bias.len(),
            ));
        }
        Ok(TiedAutoencoder {
            weights,
            enc_bias,
            dec_bias,
        })
    }

    pub fn zeros(hidden: usize, visible: usize) -> Result<Self> {
        Ok(TiedAutoencoder {
            weights: Matrix::zeros(hidden, visible)?,
            enc_bias: Vector::zeros(hidden),
            dec_bias: Vector::zeros(visible),
        })
    }

    /// Weights from `U(−1/√visible, 1/√visible)`, biases zero.
    pub fn random(hidden: usize, visible: usize, rng: &mut RandomStream) -> Result<Self> {
        let mut ae = TiedAutoencoder::zeros(hidden, visible)?;
        let bound = 1.0 / (visible as f64).sqrt();
        for w in ae.weights.as_mut_slice() {
            *w = rng.uniform_in(-bound, bound);
        }
        Ok(ae)
    }

    pub fn hidden(&self) -> usize {
        self.weights.rows()
    }

    pub fn visible(&self) -> usize {
        self.weights.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weights.shape()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn enc_bias(&self) -> &Vector {
        &self.enc_bias
    }

    pub fn dec_bias(&self) -> &Vector {
        &self.dec_bias
    }

    pub fn into_parts(self) -> (Matrix, Vector, Vector) {
        (self.weights, self.enc_bias, self.dec_bias)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.as_slice().len() + self.enc_bias.len() + self.dec_bias.len()
    }

    /// Weights, encoder bias and decoder bias as flat slices, in that order.
    pub fn param_slices(&self) -> [&[f64]; 3] {
        [self.weights.as_slice(), &self.enc_bias, &self.dec_bias]
    }

    /// Mutable view of the parameters. Shapes cannot change through it.
    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.weights.as_mut_slice(),
            &mut self.enc_bias,
            &mut self.dec_bias,
        ]
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        self.weights.as_mut_slice()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vector> {
        self.check_visible("encode", x.len())?;
        let mut h = Vector::zeros(self.hidden());
        self.encode_into(x, &mut h);
        Ok(h)
    }

    pub fn decode(&self, h: &[f64]) -> Result<Vector> {
        if h.len() != self.hidden() {
            return Err(Error::dim("decode", self.hidden(), h.len()));
        }
        let mut out = Vector::zeros(self.visible());
        self.decode_into(h, &mut out);
        Ok(out)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vector> {
        let h = self.encode(x)?;
        self.decode(&h)
    }

    /// Mean squared reconstruction error per component over `samples`.
    pub fn loss<S: AsRef<[f64]>>(&self, samples: &[S]) -> Result<f64> {
        with_simd(|| self.loss_impl(samples))
    }

    #[inline(always)]
    fn loss_impl<S: AsRef<[f64]>>(&self, samples: &[S]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("rmse"));
        }
        for x in samples {
            self.check_visible("rmse", x.as_ref().len())?;
        }
        let mut ws = Workspace::new(self.hidden(), self.visible());
        let mut total = 0.0;
        let mut accumulate = |xs: &[&[f64]], outs: &[Vec<f64>]| {
            for (x, out) in xs.iter().zip(outs) {
                let mut s = 0.0;
                for (a, b) in x.iter().zip(out) {
                    let e = a - b;
                    s += e * e;
                }
                total += s;
            }
        };
        let mut blocks = samples.chunks_exact(BLOCK);
        for chunk in &mut blocks {
            let xs: [&[f64]; BLOCK] = std::array::from_fn(|k| chunk[k].as_ref());
            self.forward_block(&xs, &mut ws);
            accumulate(&xs, &ws.out);
        }
        for x in blocks.remainder() {
            let xs = [x.as_ref()];
            self.forward_block(&xs, &mut ws);
            accumulate(&xs, &ws.out[..1]);
        }
        Ok(total / (samples.len() * self.visible()) as f64)
    }

    /// Root mean squared reconstruction error, averaged over samples and
    /// components.
    pub fn rmse<S: AsRef<[f64]>>(&self, samples: &[S]) -> Result<f64> {
        self.loss(samples).map(f64::sqrt)
    }

    /// Backpropagated gradient of [`loss`](Self::loss) over `batch`. The
    /// weight gradient is the sum of the encoder-path and decoder-path terms.
    pub fn gradient<S: AsRef<[f64]>>(&self, batch: &[S]) -> Result<Gradients> {
        with_simd(|| self.gradient_impl(batch))
    }

    #[inline(always)]
    fn gradient_impl<S: AsRef<[f64]>>(&self, batch: &[S]) -> Result<Gradients> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("gradient"));
        }
        for x in batch {
            self.check_visible("gradient", x.as_ref().len())?;
        }
        let mut g = Gradients::zeros_like(self);
        let scale = 2.0 / (batch.len() * self.visible()) as f64;
        let mut ws = Workspace::new(self.hidden(), self.visible());
        let mut blocks = batch.chunks_exact(BLOCK);
        for chunk in &mut blocks {
            let xs: [&[f64]; BLOCK] = std::array::from_fn(|k| chunk[k].as_ref());
            self.backward_block(&xs, scale, &mut ws, &mut g);
        }
        for x in blocks.remainder() {
            self.backward_block(&[x.as_ref()], scale, &mut ws, &mut g);
        }
        Ok(g)
    }

    /// Encodes and decodes up to `BLOCK` samples, leaving hidden activations
    /// in `ws.h[..K]` and reconstructions in `ws.out[..K]`.
    #[inline(always)]
    fn forward_block<const K: usize>(&self, xs: &[&[f64]; K], ws: &mut Workspace) {
        for (i, row) in self.weights.row_iter().enumerate() {
            let pre = dot_block(row, xs);
            for k in 0..K {
                ws.h[k][i] = pre[k] + self.enc_bias[i];
            }
        }
        for k in 0..K {
            sigmoid_in_place(&mut ws.h[k]);
            ws.out[k].copy_from_slice(&self.dec_bias);
        }
        {
            let mut outs: [&mut [f64]; K] = {
                let mut it = ws.out.iter_mut();
                std::array::from_fn(|_| {
                    it.next()
                        .expect("workspace holds BLOCK buffers")
                        .as_mut_slice()
                })
            };
            for (i, row) in self.weights.row_iter().enumerate() {
                let alphas: [f64; K] = std::array::from_fn(|k| ws.h[k][i]);
                axpy_block(alphas, row, &mut outs);
            }
        }
        for k in 0..K {
            sigmoid_in_place(&mut ws.out[k]);
        }
    }

    #[inline(always)]
    fn backward_block<const K: usize>(
        &self,
        xs: &[&[f64]; K],
        scale: f64,
        ws: &mut Workspace,
        g: &mut Gradients,
    ) {
        self.forward_block(xs, ws);
        for k in 0..K {
            for ((d, &o), &xi) in ws.delta_out[k].iter_mut().zip(&ws.out[k]).zip(xs[k]) {
                *d = scale * (o - xi) * o * (1.0 - o);
            }
            for (gb, d) in g.d_dec_bias.iter_mut().zip(&ws.delta_out[k]) {
                *gb += d;
            }
        }
        let deltas: [&[f64]; K] = std::array::from_fn(|k| ws.delta_out[k].as_slice());
        for i in 0..self.hidden() {
            let dh = dot_block(self.weights.row(i), &deltas);
            let h_i: [f64; K] = std::array::from_fn(|k| ws.h[k][i]);
            let delta_hidden: [f64; K] = std::array::from_fn(|k| dh[k] * h_i[k] * (1.0 - h_i[k]));
            for d in delta_hidden {
                g.d_enc_bias[i] += d;
            }
            rank_update_block(g.d_weights.row_mut(i), h_i, &deltas, delta_hidden, xs);
        }
    }

    /// One gradient-descent step, returning the updated copy.
    pub fn sgd_step(&self, g: &Gradients, learning_rate: f64) -> Result<Self> {
        let mut next = self.clone();
        next.apply_gradients(g, learning_rate)?;
        Ok(next)
    }

    /// In-place form of [`sgd_step`](Self::sgd_step).
    pub fn apply_gradients(&mut self, g: &Gradients, learning_rate: f64) -> Result<()> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        g.check_shape(self)?;
        axpy(
            -learning_rate,
            g.d_weights.as_slice(),
            self.weights.as_mut_slice(),
        );
        axpy(-learning_rate, &g.d_enc_bias, &mut self.enc_bias);
        axpy(-learning_rate, &g.d_dec_bias, &mut self.dec_bias);
        Ok(())
    }

    /// Fraction of weight-matrix entries with `|w| <= threshold`. Biases are
    /// not counted.
    pub fn sparsity(&self, threshold: f64) -> f64 {
        weight_sparsity(self.weights.as_slice(), threshold)
    }

    #[inline(always)]
    pub(crate) fn encode_into(&self, x: &[f64], h: &mut [f64]) {
        for ((hi, row), b) in h
            .iter_mut()
            .zip(self.weights.row_iter())
            .zip(self.enc_bias.iter())
        {
            *hi = dot(row, x) + b;
        }
        sigmoid_in_place(h);
    }

    #[inline(always)]
    pub(crate) fn decode_into(&self, h: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.dec_bias);
        for (row, &hi) in self.weights.row_iter().zip(h) {
            axpy(hi, row, out);
        }
        sigmoid_in_place(out);
    }

    fn check_visible(&self, op: &'static str, len: usize) -> Result<()> {
        if len != self.visible() {
            return Err(Error::dim(op, self.visible(), len));
        }
        Ok(())
    }
}

/// Scratch buffers for one block of samples.
struct Workspace {
    h: Vec<Vec<f64>>,
    out: Vec<Vec<f64>>,
    delta_out: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(hidden: usize, visible: usize) -> Self {
        Workspace {
            h: vec![vec![0.0; hidden]; BLOCK],
            out: vec![vec![0.0; visible]; BLOCK],
            delta_out: vec![vec![0.0; visible]; BLOCK],
        }
    }
}

pub(crate) fn weight_sparsity(weights: &[f64], threshold: f64) -> f64 {
    let quiet = weights.iter().filter(|w| w.abs() <= threshold).count();
    quiet as f64 / weights.len() as f64
}

impl Gradients {
    pub fn zeros_like(ae: &TiedAutoencoder) -> Self {
        Gradients {
            d_weights: Matrix::zeros(ae.hidden(), ae.visible()).expect("shape already validated"),
            d_enc_bias: Vector::zeros(ae.hidden()),
            d_dec_bias: Vector::zeros(ae.visible()),
        }
    }

    pub fn param_slices(&self) -> [&[f64]; 3] {
        [
            self.d_weights.as_slice(),
            &self.d_enc_bias,
            &self.d_dec_bias,
        ]
    }

    fn check_shape(&self, ae: &TiedAutoencoder) -> Result<()> {
        if self.d_weights.shape() != ae.shape() {
            return Err(Error::dim(
                "sgd_step (weights)",
                ae.parameter_count(),
                self.d_weights.as_slice().len(),
            ));
        }
        if self.d_enc_bias.len() != ae.hidden() {
            return Err(Error::dim(
                "sgd_step (enc_bias)",
                ae.hidden(),
                self.d_enc_bias.len(),
            ));
        }
        if self.d_dec_bias.len() != ae.visible() {
            return Err(Error::dim(
                "sgd_step (dec_bias)",
                ae.visible(),
                self.d_dec_bias.len(),
            ));
        }
        Ok(())
    }
}
