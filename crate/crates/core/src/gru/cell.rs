//! Gated recurrent unit with exact backward pass.
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)          update gate
//! r  = σ(W_r x + U_r h + b_r)          reset gate
//! h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```
//!
//! Input matrices are stored `d_h × d_in` and recurrent ones `d_h × d_h`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, Matrix};

use super::{uniform_init, TensorMut, TensorRef};

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

/// Intermediates of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct CellCache {
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruCell {
    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        GruCell {
            w_z: Matrix::zeros(d_h, d_in),
            w_r: Matrix::zeros(d_h, d_in),
            w_h: Matrix::zeros(d_h, d_in),
            u_z: Matrix::zeros(d_h, d_h),
            u_r: Matrix::zeros(d_h, d_h),
            u_h: Matrix::zeros(d_h, d_h),
            b_z: vec![0.0; d_h],
            b_r: vec![0.0; d_h],
            b_h: vec![0.0; d_h],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng>(d_in: usize, d_h: usize, rng: &mut R) -> Self {
        let mut cell = GruCell::zeros(d_in, d_h);
        for m in [&mut cell.w_z, &mut cell.w_r, &mut cell.w_h] {
            uniform_init(m, d_in, d_h, rng);
        }
        for m in [&mut cell.u_z, &mut cell.u_r, &mut cell.u_h] {
            uniform_init(m, d_h, d_h, rng);
        }
        cell
    }

    pub fn d_in(&self) -> usize {
        self.w_z.cols()
    }

    pub fn d_h(&self) -> usize {
        self.w_z.rows()
    }

    pub fn zeros_like(&self) -> Self {
        GruCell::zeros(self.d_in(), self.d_h())
    }

    pub(crate) fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        for (name, m) in [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
        ] {
            out.push(TensorRef::matrix(format!("{prefix}.{name}"), m));
        }
        for (name, b) in [("b_z", &self.b_z), ("b_r", &self.b_r), ("b_h", &self.b_h)] {
            out.push(TensorRef::vector(format!("{prefix}.{name}"), b));
        }
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<TensorMut<'a>>) {
        for m in [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
        ] {
            out.push(TensorMut::new(m.as_mut_slice()));
        }
        for b in [&mut self.b_z, &mut self.b_r, &mut self.b_h] {
            out.push(TensorMut::new(b));
        }
    }

    /// One recurrence step. Fails if the new state is not finite.
    pub fn forward(&self, x: &[f64], h_prev: &[f64]) -> Result<CellCache> {
        let d_h = self.d_h();
        let mut z = self.b_z.clone();
        self.w_z.mul_vec_acc(x, &mut z);
        self.u_z.mul_vec_acc(h_prev, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut r = self.b_r.clone();
        self.w_r.mul_vec_acc(x, &mut r);
        self.u_r.mul_vec_acc(h_prev, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let mut h_tilde = self.b_h.clone();
        self.w_h.mul_vec_acc(x, &mut h_tilde);
        self.u_h.mul_vec_acc(&rh, &mut h_tilde);
        h_tilde.iter_mut().for_each(|v| *v = v.tanh());

        let h: Vec<f64> = (0..d_h).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * h_tilde[i]).collect();
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GRU hidden state diverged".into()));
        }
        Ok(CellCache {
            h_prev: h_prev.to_vec(),
            z,
            r,
            h_tilde,
            h,
        })
    }

    /// Backpropagates `dh` (gradient w.r.t. the step output) through one step.
    /// Parameter gradients are added to `grads`, the input gradient to `dx`;
    /// returns the gradient w.r.t. the previous state.
    pub fn backward(&self, x: &[f64], cache: &CellCache, dh: &[f64], grads: &mut GruCell, dx: &mut [f64]) -> Vec<f64> {
        let d_h = self.d_h();
        let CellCache {
            h_prev, z, r, h_tilde, ..
        } = cache;

        let mut dh_prev: Vec<f64> = (0..d_h).map(|i| dh[i] * (1.0 - z[i])).collect();
        let da_z: Vec<f64> = (0..d_h)
            .map(|i| dh[i] * (h_tilde[i] - h_prev[i]) * z[i] * (1.0 - z[i]))
            .collect();
        let da_h: Vec<f64> = (0..d_h)
            .map(|i| dh[i] * z[i] * (1.0 - h_tilde[i] * h_tilde[i]))
            .collect();

        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let mut d_rh = vec![0.0; d_h];
        self.u_h.tr_mul_vec_acc(&da_h, &mut d_rh);
        let da_r: Vec<f64> = (0..d_h).map(|i| d_rh[i] * h_prev[i] * r[i] * (1.0 - r[i])).collect();
        for i in 0..d_h {
            dh_prev[i] += d_rh[i] * r[i];
        }

        grads.w_h.add_outer(&da_h, x);
        grads.u_h.add_outer(&da_h, &rh);
        grads.w_z.add_outer(&da_z, x);
        grads.u_z.add_outer(&da_z, h_prev);
        grads.w_r.add_outer(&da_r, x);
        grads.u_r.add_outer(&da_r, h_prev);
        for i in 0..d_h {
            grads.b_h[i] += da_h[i];
            grads.b_z[i] += da_z[i];
            grads.b_r[i] += da_r[i];
        }

        self.w_h.tr_mul_vec_acc(&da_h, dx);
        self.w_z.tr_mul_vec_acc(&da_z, dx);
        self.w_r.tr_mul_vec_acc(&da_r, dx);
        self.u_z.tr_mul_vec_acc(&da_z, &mut dh_prev);
        self.u_r.tr_mul_vec_acc(&da_r, &mut dh_prev);
        dh_prev
    }
}

/// Free-function form of [`GruCell::forward`] returning the new state.
pub fn gru_cell_forward(cell: &GruCell, x: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, CellCache)> {
    let cache = cell.forward(x, h_prev)?;
    Ok((cache.h.clone(), cache))
}
