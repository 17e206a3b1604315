//! Single-layer LSTM encoder with hand-written backpropagation through time.
//!
//! Gate blocks are stacked row-wise in the order input, forget, output,
//! candidate: rows `[0, H)` of `w`, `u` and `b` belong to the input gate,
//! `[H, 2H)` to the forget gate and so on.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// Input weights, `4H × D`.
    pub w: Array2<f64>,
    /// Recurrent weights, `4H × H`.
    pub u: Array2<f64>,
    /// Biases, `4H`.
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden, input_dim)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    /// Weights uniform in `±1/√H`; forget-gate bias 1, other biases 0.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(input_dim, hidden);
        p.w.mapv_inplace(|_| rng.random_range(-k..k));
        p.u.mapv_inplace(|_| rng.random_range(-k..k));
        p.b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn gate_weights(
        &self,
        gate: Gate,
    ) -> (
        ArrayView2<'_, f64>,
        ArrayView2<'_, f64>,
        ArrayView1<'_, f64>,
    ) {
        let h = self.hidden();
        let r = gate as usize * h..(gate as usize + 1) * h;
        (
            self.w.slice(s![r.clone(), ..]),
            self.u.slice(s![r.clone(), ..]),
            self.b.slice(s![r]),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.w
            .iter()
            .chain(&self.u)
            .chain(&self.b)
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Array1::zeros(hidden),
            c: Array1::zeros(hidden),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies gate nonlinearities to pre-activations `z` (length 4H) in place and
/// advances the cell: `c' = f⊙c + i⊙c̃`, `h' = o⊙tanh(c')`.
fn cell_update(z: &mut [f64], c_prev: &[f64], c: &mut [f64], h: &mut [f64]) {
    let hid = c.len();
    for (j, zj) in z.iter_mut().enumerate() {
        *zj = if j < 3 * hid { sigmoid(*zj) } else { zj.tanh() };
    }
    for j in 0..hid {
        let (i, f, o, g) = (z[j], z[hid + j], z[2 * hid + j], z[3 * hid + j]);
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
    }
}

/// One time step.
pub fn lstm_step(x: ArrayView1<'_, f64>, state: &LstmState, p: &LstmParams) -> Result<LstmState> {
    let hid = p.hidden();
    if x.len() != p.input_dim() {
        return Err(Error::Dimension {
            expected: p.input_dim(),
            found: x.len(),
        });
    }
    if state.h.len() != hid || state.c.len() != hid {
        return Err(Error::Dimension {
            expected: hid,
            found: state.h.len(),
        });
    }
    let mut z = p.w.dot(&x) + p.u.dot(&state.h) + &p.b;
    let mut next = LstmState::zeros(hid);
    cell_update(
        z.as_slice_mut().expect("contiguous"),
        state.c.as_slice().expect("contiguous"),
        next.c.as_slice_mut().expect("contiguous"),
        next.h.as_slice_mut().expect("contiguous"),
    );
    Ok(next)
}

/// Intermediates of a sequence pass needed for the backward pass.
#[derive(Debug, Clone)]
pub struct BranchCache {
    x: Array2<f64>,
    /// Post-activation gates per step, `T × 4H`.
    gates: Array2<f64>,
    /// Cell states, `(T + 1) × H`, row 0 is the zero initial state.
    c: Array2<f64>,
    /// Hidden states, `(T + 1) × H`.
    h: Array2<f64>,
}

impl BranchCache {
    pub fn len(&self) -> usize {
        self.gates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_sequence(seq: &ArrayView2<'_, f64>, p: &LstmParams) -> Result<()> {
    if seq.nrows() > 0 && seq.ncols() != p.input_dim() {
        return Err(Error::Dimension {
            expected: p.input_dim(),
            found: seq.ncols(),
        });
    }
    Ok(())
}

/// Runs the sequence (`T × D`, one row per step) from the zero state and
/// returns the final hidden state; an empty sequence encodes to zeros.
pub fn branch_forward(seq: ArrayView2<'_, f64>, p: &LstmParams) -> Result<Array1<f64>> {
    Ok(branch_forward_cached(seq, p)?.0)
}

pub fn branch_forward_cached(
    seq: ArrayView2<'_, f64>,
    p: &LstmParams,
) -> Result<(Array1<f64>, BranchCache)> {
    check_sequence(&seq, p)?;
    let hid = p.hidden();
    let t_len = seq.nrows();
    // input projections for all steps at once
    let mut gates = if t_len == 0 {
        Array2::zeros((0, 4 * hid))
    } else {
        seq.dot(&p.w.t()) + &p.b
    };
    let mut c = Array2::zeros((t_len + 1, hid));
    let mut h = Array2::zeros((t_len + 1, hid));
    for t in 0..t_len {
        let rec = p.u.dot(&h.row(t));
        let mut z = gates.row_mut(t);
        z += &rec;
        let (c_prev, mut c_next) = c.multi_slice_mut((s![t, ..], s![t + 1, ..]));
        let mut h_next = h.row_mut(t + 1);
        cell_update(
            z.as_slice_mut().expect("contiguous"),
            c_prev.as_slice().expect("contiguous"),
            c_next.as_slice_mut().expect("contiguous"),
            h_next.as_slice_mut().expect("contiguous"),
        );
    }
    let out = h.row(t_len).to_owned();
    Ok((
        out,
        BranchCache {
            x: seq.to_owned(),
            gates,
            c,
            h,
        },
    ))
}

/// Gradients of `w`, `u`, `b` given the gradient of the loss with respect to
/// the final hidden state.
pub fn branch_backward(
    cache: &BranchCache,
    d_out: ArrayView1<'_, f64>,
    p: &LstmParams,
) -> LstmParams {
    let hid = p.hidden();
    let t_len = cache.len();
    let mut grads = LstmParams::zeros(p.input_dim(), hid);
    if t_len == 0 {
        return grads;
    }
    let mut dz = Array2::<f64>::zeros((t_len, 4 * hid));
    let mut dh = d_out.to_owned();
    let mut dc = Array1::<f64>::zeros(hid);
    for t in (0..t_len).rev() {
        let g = cache.gates.row(t);
        let c_t = cache.c.row(t + 1);
        let c_prev = cache.c.row(t);
        let mut dzt = dz.row_mut(t);
        for j in 0..hid {
            let (i, f, o, cand) = (g[j], g[hid + j], g[2 * hid + j], g[3 * hid + j]);
            let tc = c_t[j].tanh();
            let d_o = dh[j] * tc;
            dc[j] += dh[j] * o * (1.0 - tc * tc);
            let d_i = dc[j] * cand;
            let d_g = dc[j] * i;
            let d_f = dc[j] * c_prev[j];
            dzt[j] = d_i * i * (1.0 - i);
            dzt[hid + j] = d_f * f * (1.0 - f);
            dzt[2 * hid + j] = d_o * o * (1.0 - o);
            dzt[3 * hid + j] = d_g * (1.0 - cand * cand);
            dc[j] *= f;
        }
        dh = p.u.t().dot(&dzt);
    }
    grads.w = dz.t().dot(&cache.x);
    grads.u = dz.t().dot(&cache.h.slice(s![..t_len, ..]));
    grads.b = dz.sum_axis(Axis(0));
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_half_gates_and_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let s = lstm_step(array![0.3, -1.0, 2.0].view(), &LstmState::zeros(2), &p).unwrap();
        assert_eq!(s.c, array![0.0, 0.0]);
        assert_eq!(s.h, array![0.0, 0.0]);
    }

    #[test]
    fn hand_evaluated_single_unit() {
        // D = H = 1; weights zero, b_i = 20 (i ≈ 1), b_f = -20 (f ≈ 0),
        // b_o = 0 (o = 0.5), b_c = 1 (c̃ = tanh 1)
        let mut p = LstmParams::zeros(1, 1);
        p.b = array![20.0, -20.0, 0.0, 1.0];
        let prev = LstmState {
            h: array![0.0],
            c: array![0.7],
        };
        let s = lstm_step(array![5.0].view(), &prev, &p).unwrap();
        let i = 1.0 / (1.0 + (-20f64).exp());
        let f = 1.0 / (1.0 + 20f64.exp());
        let c = f * 0.7 + i * 1f64.tanh();
        assert!((s.c[0] - c).abs() < 1e-15);
        assert!((s.h[0] - 0.5 * c.tanh()).abs() < 1e-15);
        assert!((s.c[0] - 1f64.tanh()).abs() < 1e-8);
    }

    #[test]
    fn open_forget_gate_carries_the_cell() {
        let mut p = LstmParams::zeros(2, 1);
        p.b = array![-20.0, 20.0, 0.0, 0.0];
        let prev = LstmState {
            h: array![0.1],
            c: array![0.42],
        };
        let s = lstm_step(array![1.0, 1.0].view(), &prev, &p).unwrap();
        assert!((s.c[0] - 0.42).abs() < 1e-3);
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::zeros(3, 2);
        assert!(lstm_step(array![1.0].view(), &LstmState::zeros(2), &p).is_err());
        assert!(lstm_step(array![1.0, 2.0, 3.0].view(), &LstmState::zeros(5), &p).is_err());
        assert!(branch_forward(Array2::zeros((2, 4)).view(), &p).is_err());
    }

    #[test]
    fn empty_sequence_encodes_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::random(4, 3, &mut rng);
        let (out, cache) = branch_forward_cached(Array2::zeros((0, 4)).view(), &p).unwrap();
        assert_eq!(out, Array1::<f64>::zeros(3));
        let g = branch_backward(&cache, array![1.0, 1.0, 1.0].view(), &p);
        assert!(g.w.iter().chain(&g.u).chain(&g.b).all(|&x| x == 0.0));
    }

    #[test]
    fn sequence_equals_folded_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = LstmParams::random(4, 3, &mut rng);
        let seq = Array2::from_shape_fn((3, 4), |(t, d)| ((t * 4 + d) as f64 * 0.37).sin());
        let mut state = LstmState::zeros(3);
        for row in seq.rows() {
            state = lstm_step(row, &state, &p).unwrap();
        }
        let out = branch_forward(seq.view(), &p).unwrap();
        for (a, b) in out.iter().zip(&state.h) {
            assert!((a - b).abs() < 1e-14);
        }
        let one = branch_forward(seq.slice(s![..1, ..]), &p).unwrap();
        let step = lstm_step(seq.row(0), &LstmState::zeros(3), &p).unwrap();
        for (a, b) in one.iter().zip(&step.h) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn hidden_state_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = LstmParams::random(2, 4, &mut rng);
        p.w.mapv_inplace(|x| x * 50.0);
        let seq = Array2::from_elem((20, 2), 3.0);
        let out = branch_forward(seq.view(), &p).unwrap();
        assert!(out.iter().all(|x| x.abs() < 1.0 && x.is_finite()));
    }

    fn coord(p: &mut LstmParams, which: usize, idx: usize) -> &mut f64 {
        match which {
            0 => &mut p.w.as_slice_mut().unwrap()[idx],
            1 => &mut p.u.as_slice_mut().unwrap()[idx],
            _ => &mut p.b[idx],
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = LstmParams::random(3, 4, &mut rng);
        let seq = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let weights = Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0));
        // loss = weights · h_T
        let loss = |p: &LstmParams| branch_forward(seq.view(), p).unwrap().dot(&weights);
        let (_, cache) = branch_forward_cached(seq.view(), &p).unwrap();
        let g = branch_backward(&cache, weights.view(), &p);
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for (which, idx) in [
            (0usize, 0usize),
            (0, 17),
            (0, 40),
            (1, 3),
            (1, 30),
            (1, 63),
            (2, 1),
            (2, 6),
            (2, 11),
            (2, 15),
        ] {
            let analytic = *coord(&mut g.clone(), which, idx);
            let mut plus = p.clone();
            let mut minus = p.clone();
            *coord(&mut plus, which, idx) += eps;
            *coord(&mut minus, which, idx) -= eps;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-6, "worst relative error {worst}");
    }
}
