//! A gated recurrent unit with hand-derived gradients.
//!
//! The cell follows the reset/update formulation, with the reset gate
//! applied to the recurrent term before the candidate activation:
//!
//! ```text
//! z = sigmoid(Wz x + Uz h + bz)          (update gate)
//! r = sigmoid(Wr x + Ur h + br)          (reset gate)
//! c = tanh(Wc x + Uc (r ⊙ h) + bc)       (candidate)
//! h' = (1 − z) ⊙ h + z ⊙ c
//! ```

use ndarray::{Array1, Array2};

use super::math::{add_outer, sigmoid, tanh};

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_update: Array2<f64>,
    pub u_update: Array2<f64>,
    pub b_update: Array1<f64>,
    pub w_reset: Array2<f64>,
    pub u_reset: Array2<f64>,
    pub b_reset: Array1<f64>,
    pub w_cand: Array2<f64>,
    pub u_cand: Array2<f64>,
    pub b_cand: Array1<f64>,
}

impl GruParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruParams {
            w_update: Array2::zeros((hidden, input)),
            u_update: Array2::zeros((hidden, hidden)),
            b_update: Array1::zeros(hidden),
            w_reset: Array2::zeros((hidden, input)),
            u_reset: Array2::zeros((hidden, hidden)),
            b_reset: Array1::zeros(hidden),
            w_cand: Array2::zeros((hidden, input)),
            u_cand: Array2::zeros((hidden, hidden)),
            b_cand: Array1::zeros(hidden),
        }
    }

    /// One step. The returned cache holds everything the backward pass
    /// needs.
    pub fn step(&self, x: &Array1<f64>, h_prev: &Array1<f64>) -> GruCache {
        let update = sigmoid(&(self.w_update.dot(x) + self.u_update.dot(h_prev) + &self.b_update));
        let reset = sigmoid(&(self.w_reset.dot(x) + self.u_reset.dot(h_prev) + &self.b_reset));
        let reset_h = &reset * h_prev;
        let cand = tanh(&(self.w_cand.dot(x) + self.u_cand.dot(&reset_h) + &self.b_cand));
        let h = (1.0 - &update) * h_prev + &update * &cand;
        GruCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            update,
            reset,
            cand,
            h,
        }
    }

    /// Backpropagates `dh` (the loss gradient at this step's output)
    /// through the cell, accumulating parameter gradients into `grads` and
    /// returning the gradients with respect to the input and the previous
    /// state.
    pub fn backward(
        &self,
        cache: &GruCache,
        dh: &Array1<f64>,
        grads: &mut GruParams,
    ) -> (Array1<f64>, Array1<f64>) {
        let GruCache { x, h_prev, update, reset, cand, .. } = cache;

        let d_update = dh * &(cand - h_prev);
        let d_cand = dh * update;
        let mut dh_prev = dh * &(1.0 - update);

        // candidate branch
        let da_cand = &d_cand * &cand.mapv(|c| 1.0 - c * c);
        let reset_h = reset * h_prev;
        add_outer(&mut grads.w_cand, &da_cand, x);
        add_outer(&mut grads.u_cand, &da_cand, &reset_h);
        grads.b_cand += &da_cand;
        let d_reset_h = self.u_cand.t().dot(&da_cand);
        let d_reset = &d_reset_h * h_prev;
        dh_prev += &(&d_reset_h * reset);
        let mut dx = self.w_cand.t().dot(&da_cand);

        // update gate
        let da_update = &d_update * &update.mapv(|z| z * (1.0 - z));
        add_outer(&mut grads.w_update, &da_update, x);
        add_outer(&mut grads.u_update, &da_update, h_prev);
        grads.b_update += &da_update;
        dx += &self.w_update.t().dot(&da_update);
        dh_prev += &self.u_update.t().dot(&da_update);

        // reset gate
        let da_reset = &d_reset * &reset.mapv(|r| r * (1.0 - r));
        add_outer(&mut grads.w_reset, &da_reset, x);
        add_outer(&mut grads.u_reset, &da_reset, h_prev);
        grads.b_reset += &da_reset;
        dx += &self.w_reset.t().dot(&da_reset);
        dh_prev += &self.u_reset.t().dot(&da_reset);

        (dx, dh_prev)
    }
}

/// Intermediate values of one GRU step.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub update: Array1<f64>,
    pub reset: Array1<f64>,
    pub cand: Array1<f64>,
    pub h: Array1<f64>,
}
