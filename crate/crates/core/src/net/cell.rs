use rand::Rng;

use super::sigmoid;
use crate::{Error, Result};

/// Weights of one LSTM scan direction.
///
/// `w` is `(4h) x (p + h)` row-major; its row blocks are ordered
/// `[input; forget; output; candidate]` and its columns are `[x; h_prev]`.
/// `b` holds one bias per gate row.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            w: vec![0.0; 4 * hidden * (input_dim + hidden)],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Glorot-uniform weights, zero biases (forget bias optionally 1).
    pub fn glorot(input_dim: usize, hidden: usize, forget_bias: f64, rng: &mut impl Rng) -> Self {
        let cols = input_dim + hidden;
        let limit = (6.0 / (cols + 4 * hidden) as f64).sqrt();
        let w = (0..4 * hidden * cols)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(forget_bias);
        Self {
            input_dim,
            hidden,
            w,
            b,
        }
    }

    pub fn cols(&self) -> usize {
        self.input_dim + self.hidden
    }

    pub(crate) fn add_scaled(&mut self, other: &LstmParams, scale: f64) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += scale * b;
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += scale * b;
        }
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateActivations {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
}

/// Everything one step's backward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// `[x; h_prev]`
    pub input: Vec<f64>,
    pub gates: GateActivations,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn step(x: &[f64], c_prev: &[f64], h_prev: &[f64], p: &LstmParams) -> StepCache {
    let h = p.hidden;
    let cols = p.cols();
    let mut input = Vec::with_capacity(cols);
    input.extend_from_slice(x);
    input.extend_from_slice(h_prev);

    let mut z = p.b.clone();
    for (zr, row) in z.iter_mut().zip(p.w.chunks_exact(cols)) {
        *zr += row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>();
    }
    let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
    let o: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = z[3 * h..].iter().map(|&v| v.tanh()).collect();

    let c: Vec<f64> = (0..h).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h_out: Vec<f64> = (0..h).map(|j| o[j] * tanh_c[j]).collect();
    StepCache {
        input,
        gates: GateActivations { i, f, o, g },
        c_prev: c_prev.to_vec(),
        tanh_c,
        c,
        h: h_out,
    }
}

/// One LSTM step: gates from `W [x; h_prev] + b`, then
/// `c = f*c_prev + i*g` and `h = o*tanh(c)`.
pub fn cell_step(
    x: &[f64],
    prev: &CellState,
    params: &LstmParams,
) -> Result<(CellState, GateActivations)> {
    if x.len() != params.input_dim || prev.h.len() != params.hidden || prev.c.len() != params.hidden
    {
        return Err(Error::Dimension(format!(
            "cell expects x of {} and state of {}, got {} / {} / {}",
            params.input_dim,
            params.hidden,
            x.len(),
            prev.h.len(),
            prev.c.len()
        )));
    }
    if x.iter()
        .chain(&prev.h)
        .chain(&prev.c)
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("cell input".into()));
    }
    let s = step(x, &prev.c, &prev.h, params);
    Ok((CellState { c: s.c, h: s.h }, s.gates))
}

/// Run a full left-to-right scan from the zero state.
pub(crate) fn scan<'a>(inputs: impl Iterator<Item = &'a [f64]>, p: &LstmParams) -> Vec<StepCache> {
    let mut out: Vec<StepCache> = Vec::new();
    let zeros = vec![0.0; p.hidden];
    for x in inputs {
        let s = match out.last() {
            Some(prev) => step(x, &prev.c, &prev.h, p),
            None => step(x, &zeros, &zeros, p),
        };
        out.push(s);
    }
    out
}

/// Backpropagate through a scan. `dh[k]` is the loss gradient flowing into
/// step `k`'s hidden output from outside the recurrence. Parameter gradients
/// are added into `grads`; returns the gradient for each step's `x`.
pub(crate) fn scan_backward(
    caches: &[StepCache],
    dh: &[Vec<f64>],
    p: &LstmParams,
    grads: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let h = p.hidden;
    let cols = p.cols();
    let mut dx = vec![Vec::new(); caches.len()];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for k in (0..caches.len()).rev() {
        let s = &caches[k];
        let GateActivations { i, f, o, g } = &s.gates;
        for j in 0..h {
            let dh_t = dh[k][j] + dh_next[j];
            let d_o = dh_t * s.tanh_c[j];
            let dc = dc_next[j] + dh_t * o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
            let d_i = dc * g[j];
            let d_g = dc * i[j];
            let d_f = dc * s.c_prev[j];
            dc_next[j] = dc * f[j];
            dz[j] = d_i * i[j] * (1.0 - i[j]);
            dz[h + j] = d_f * f[j] * (1.0 - f[j]);
            dz[2 * h + j] = d_o * o[j] * (1.0 - o[j]);
            dz[3 * h + j] = d_g * (1.0 - g[j] * g[j]);
        }
        let mut d_input = vec![0.0; cols];
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == 0.0 {
                continue;
            }
            grads.b[r] += dzr;
            let row = &p.w[r * cols..(r + 1) * cols];
            let grow = &mut grads.w[r * cols..(r + 1) * cols];
            for c in 0..cols {
                grow[c] += dzr * s.input[c];
                d_input[c] += dzr * row[c];
            }
        }
        dh_next.copy_from_slice(&d_input[p.input_dim..]);
        d_input.truncate(p.input_dim);
        dx[k] = d_input;
    }
    dx
}
