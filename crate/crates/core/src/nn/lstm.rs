use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};
use rand::Rng;

use super::activation::sigmoid_scalar;
use super::param::{HasParams, Param};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct Step<T> {
    t: usize,
    h_prev: Array2<T>,
    c_prev: Array2<T>,
    i: Array2<T>,
    f: Array2<T>,
    g: Array2<T>,
    o: Array2<T>,
    tc: Array2<T>,
}

/// One direction of one LSTM layer.
struct Direction<T: Scalar> {
    wx: Param<T>,
    wh: Param<T>,
    b: Param<T>,
    reverse: bool,
    steps: Vec<Step<T>>,
}

impl<T: Scalar> Direction<T> {
    fn new<R: Rng>(name: &str, inputs: usize, hidden: usize, reverse: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut b = Param::zeros(format!("{name}.b"), 1, 4 * hidden);
        b.value.slice_mut(s![.., hidden..2 * hidden]).fill(T::one());
        Direction {
            wx: Param::uniform(format!("{name}.wx"), inputs, 4 * hidden, bound, rng),
            wh: Param::uniform(format!("{name}.wh"), hidden, 4 * hidden, bound, rng),
            b,
            reverse,
            steps: Vec::new(),
        }
    }

    fn hidden(&self) -> usize {
        self.wh.value.nrows()
    }

    /// Runs the recurrence; returns per-step outputs [B, L, h] and the final state.
    fn forward(&mut self, x: &ArrayView3<'_, T>, mask: &Array2<T>) -> (Array3<T>, Array2<T>) {
        let (batch, len, _) = x.dim();
        let h = self.hidden();
        let mut out = Array3::zeros((batch, len, h));
        let mut h_prev = Array2::zeros((batch, h));
        let mut c_prev = Array2::zeros((batch, h));
        self.steps.clear();
        let order: Vec<usize> = if self.reverse { (0..len).rev().collect() } else { (0..len).collect() };
        for t in order {
            let xt = x.slice(s![.., t, ..]);
            let a = xt.dot(&self.wx.value) + h_prev.dot(&self.wh.value) + &self.b.value;
            let i = a.slice(s![.., 0..h]).mapv(sigmoid_scalar);
            let f = a.slice(s![.., h..2 * h]).mapv(sigmoid_scalar);
            let g = a.slice(s![.., 2 * h..3 * h]).mapv(|v| v.tanh());
            let o = a.slice(s![.., 3 * h..4 * h]).mapv(sigmoid_scalar);
            let c_new = &f * &c_prev + &i * &g;
            let tc = c_new.mapv(|v| v.tanh());
            let h_new = &o * &tc;

            let m = mask.column(t);
            let mut h_next = h_prev.clone();
            let mut c_next = c_prev.clone();
            for b in 0..batch {
                if m[b] > T::zero() {
                    h_next.row_mut(b).assign(&h_new.row(b));
                    c_next.row_mut(b).assign(&c_new.row(b));
                    out.slice_mut(s![b, t, ..]).assign(&h_new.row(b));
                }
            }
            self.steps.push(Step {
                t,
                h_prev: std::mem::replace(&mut h_prev, h_next),
                c_prev: std::mem::replace(&mut c_prev, c_next),
                i,
                f,
                g,
                o,
                tc,
            });
        }
        (out, h_prev)
    }

    /// Backpropagation through time. `d_out` is [B, L, h], `d_final` [B, h].
    fn backward(
        &mut self,
        x: &ArrayView3<'_, T>,
        mask: &Array2<T>,
        d_out: &ArrayView3<'_, T>,
        d_final: &ArrayView2<'_, T>,
        dx: &mut Array3<T>,
    ) {
        let h = self.hidden();
        let batch = d_final.nrows();
        let mut dh = d_final.to_owned();
        let mut dc = Array2::<T>::zeros((batch, h));
        let one = T::one();
        for st in self.steps.iter().rev() {
            let m: Array1<T> = mask.column(st.t).to_owned();
            let m_col = m.view().insert_axis(Axis(1));
            let keep = m_col.mapv(|v| one - v);
            let dh_tot = &dh + &(&d_out.slice(s![.., st.t, ..]) * &m_col);

            let d_o = &dh_tot * &st.tc;
            let mut dcn = dc.clone();
            Zip::from(&mut dcn)
                .and(&dh_tot)
                .and(&st.o)
                .and(&st.tc)
                .for_each(|d, &dht, &o, &tc| *d = *d + dht * o * (one - tc * tc));
            let mut da = Array2::<T>::zeros((batch, 4 * h));
            Zip::from(da.slice_mut(s![.., 0..h]))
                .and(&dcn)
                .and(&st.g)
                .and(&st.i)
                .for_each(|d, &dc, &g, &i| *d = dc * g * i * (one - i));
            Zip::from(da.slice_mut(s![.., h..2 * h]))
                .and(&dcn)
                .and(&st.c_prev)
                .and(&st.f)
                .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (one - f));
            Zip::from(da.slice_mut(s![.., 2 * h..3 * h]))
                .and(&dcn)
                .and(&st.i)
                .and(&st.g)
                .for_each(|d, &dc, &i, &g| *d = dc * i * (one - g * g));
            Zip::from(da.slice_mut(s![.., 3 * h..4 * h]))
                .and(&d_o)
                .and(&st.o)
                .for_each(|d, &dout, &o| *d = dout * o * (one - o));
            da *= &m_col;

            let xt = x.slice(s![.., st.t, ..]);
            self.wx.grad += &xt.t().dot(&da);
            self.wh.grad += &st.h_prev.t().dot(&da);
            self.b.grad += &da.sum_axis(Axis(0)).insert_axis(Axis(0));
            let mut dxt = dx.slice_mut(s![.., st.t, ..]);
            dxt += &da.dot(&self.wx.value.t());

            dh = da.dot(&self.wh.value.t()) + &(&dh_tot * &keep);
            dc = &(&dcn * &st.f) * &m_col + &(&dc * &keep);
        }
    }
}

struct Layer<T: Scalar> {
    fwd: Direction<T>,
    bwd: Direction<T>,
    input: Array3<T>,
}

/// Stacked bidirectional LSTM over [batch, time, features].
///
/// Masked timesteps carry the state through unchanged and emit zeros.
/// The layer output is the per-step concatenation [forward, backward]; the
/// final state is [last forward state, last backward state] of the top layer.
pub struct BiLstm<T: Scalar> {
    layers: Vec<Layer<T>>,
    hidden: usize,
    mask: Array2<T>,
}

impl<T: Scalar> BiLstm<T> {
    pub fn new<R: Rng>(name: &str, inputs: usize, hidden: usize, layers: usize, rng: &mut R) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::invalid("LSTM hidden size must be positive"));
        }
        if layers == 0 {
            return Err(Error::invalid("LSTM needs at least one layer"));
        }
        let layers = (0..layers)
            .map(|l| {
                let d_in = if l == 0 { inputs } else { 2 * hidden };
                Layer {
                    fwd: Direction::new(&format!("{name}.l{l}.fwd"), d_in, hidden, false, rng),
                    bwd: Direction::new(&format!("{name}.l{l}.bwd"), d_in, hidden, true, rng),
                    input: Array3::zeros((0, 0, 0)),
                }
            })
            .collect();
        Ok(BiLstm {
            layers,
            hidden,
            mask: Array2::zeros((0, 0)),
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].fwd.wx.value.nrows()
    }

    /// Returns the top layer's sequence [B, L, 2h] and final state [B, 2h].
    pub fn forward(&mut self, x: ArrayView3<'_, T>, mask: &Array2<bool>) -> Result<(Array3<T>, Array2<T>)> {
        let (b, l, d) = x.dim();
        if d != self.inputs() {
            return Err(Error::shape(&[b, l, d], &[self.inputs()], "lstm input width"));
        }
        if mask.dim() != (b, l) {
            return Err(Error::shape(&[b, l], &[mask.nrows(), mask.ncols()], "lstm mask"));
        }
        self.mask = mask.mapv(|m| if m { T::one() } else { T::zero() });
        let mut input = x.to_owned();
        let mut final_state = Array2::zeros((b, 2 * self.hidden));
        for layer in &mut self.layers {
            let (of, hf) = layer.fwd.forward(&input.view(), &self.mask);
            let (ob, hb) = layer.bwd.forward(&input.view(), &self.mask);
            layer.input = input;
            input = concatenate![Axis(2), of, ob];
            final_state = concatenate![Axis(1), hf, hb];
        }
        Ok((input, final_state))
    }

    /// `d_seq` is the gradient w.r.t. the top sequence output (if used).
    pub fn backward(&mut self, d_seq: Option<ArrayView3<'_, T>>, d_final: ArrayView2<'_, T>) -> Array3<T> {
        let h = self.hidden;
        let (b, l) = self.mask.dim();
        let mut d_out = match d_seq {
            Some(d) => d.to_owned(),
            None => Array3::zeros((b, l, 2 * h)),
        };
        let mut d_fin = d_final.to_owned();
        for layer in self.layers.iter_mut().rev() {
            let x = layer.input.view();
            let mut dx = Array3::zeros(x.raw_dim());
            layer.fwd.backward(
                &x,
                &self.mask,
                &d_out.slice(s![.., .., 0..h]),
                &d_fin.slice(s![.., 0..h]),
                &mut dx,
            );
            layer.bwd.backward(
                &x,
                &self.mask,
                &d_out.slice(s![.., .., h..2 * h]),
                &d_fin.slice(s![.., h..2 * h]),
                &mut dx,
            );
            d_out = dx;
            d_fin = Array2::zeros((b, 2 * h));
        }
        d_out
    }
}

impl<T: Scalar> HasParams<T> for BiLstm<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.fwd.wx, &l.fwd.wh, &l.fwd.b, &l.bwd.wx, &l.bwd.wh, &l.bwd.b])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let (f, b) = (&mut l.fwd, &mut l.bwd);
                [&mut f.wx, &mut f.wh, &mut f.b, &mut b.wx, &mut b.wh, &mut b.b]
            })
            .collect()
    }
}
