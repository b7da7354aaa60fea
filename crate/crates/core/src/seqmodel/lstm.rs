use ndarray::{Array1, Array2, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{add_outer, sigmoid, uniform_matrix};

pub const INIT_SCALE: f64 = 0.05;
pub const FORGET_BIAS: f64 = 1.0;

/// Which cell-to-gate connections a layer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Peephole {
    /// Full square matrices `W_ic`, `W_fc`, `W_oc`.
    #[default]
    Full,
    /// Only the diagonal of each peephole matrix is trainable.
    Diagonal,
    /// No peephole connections.
    Off,
}

impl Peephole {
    pub fn code(self) -> u8 {
        match self {
            Peephole::Full => 0,
            Peephole::Diagonal => 1,
            Peephole::Off => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Peephole::Full),
            1 => Some(Peephole::Diagonal),
            2 => Some(Peephole::Off),
            _ => None,
        }
    }

    fn mask(self, m: &mut Array2<f64>) {
        match self {
            Peephole::Full => {}
            Peephole::Off => m.fill(0.0),
            Peephole::Diagonal => {
                for ((r, c), v) in m.indexed_iter_mut() {
                    if r != c {
                        *v = 0.0;
                    }
                }
            }
        }
    }
}

/// One peephole LSTM layer (one direction).
///
/// ```text
/// i_t = σ(W_is s_t + W_ih h_{t-1} + W_ic c_{t-1} + b_i)
/// f_t = σ(W_fs s_t + W_fh h_{t-1} + W_fc c_{t-1} + b_f)
/// c_t = i_t ⊙ tanh(W_cs s_t + W_ch h_{t-1} + b_c) + f_t ⊙ c_{t-1}
/// o_t = σ(W_os s_t + W_oh h_{t-1} + W_oc c_t + b_o)
/// h_t = o_t ⊙ tanh(c_t)
/// ```
///
/// The output gate looks at the current cell state, the input and forget
/// gates at the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w_is: Array2<f64>,
    pub w_fs: Array2<f64>,
    pub w_cs: Array2<f64>,
    pub w_os: Array2<f64>,
    pub w_ih: Array2<f64>,
    pub w_fh: Array2<f64>,
    pub w_ch: Array2<f64>,
    pub w_oh: Array2<f64>,
    pub w_ic: Array2<f64>,
    pub w_fc: Array2<f64>,
    pub w_oc: Array2<f64>,
    pub b_i: Array1<f64>,
    pub b_f: Array1<f64>,
    pub b_c: Array1<f64>,
    pub b_o: Array1<f64>,
}

/// Activations of one timestep, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub c: Array1<f64>,
    pub tanh_c: Array1<f64>,
    pub h: Array1<f64>,
}

impl LstmLayer {
    pub fn zeros(input: usize, units: usize) -> Self {
        let wi = || Array2::zeros((units, input));
        let wh = || Array2::zeros((units, units));
        LstmLayer {
            w_is: wi(),
            w_fs: wi(),
            w_cs: wi(),
            w_os: wi(),
            w_ih: wh(),
            w_fh: wh(),
            w_ch: wh(),
            w_oh: wh(),
            w_ic: wh(),
            w_fc: wh(),
            w_oc: wh(),
            b_i: Array1::zeros(units),
            b_f: Array1::zeros(units),
            b_c: Array1::zeros(units),
            b_o: Array1::zeros(units),
        }
    }

    /// Uniform `[-0.05, 0.05]` weights, forget-gate bias 1, other biases 0.
    pub fn init<R: Rng>(input: usize, units: usize, peephole: Peephole, rng: &mut R) -> Self {
        let mut u = |r, c| uniform_matrix(rng, r, c, INIT_SCALE);
        let mut layer = LstmLayer {
            w_is: u(units, input),
            w_fs: u(units, input),
            w_cs: u(units, input),
            w_os: u(units, input),
            w_ih: u(units, units),
            w_fh: u(units, units),
            w_ch: u(units, units),
            w_oh: u(units, units),
            w_ic: u(units, units),
            w_fc: u(units, units),
            w_oc: u(units, units),
            b_i: Array1::zeros(units),
            b_f: Array1::from_elem(units, FORGET_BIAS),
            b_c: Array1::zeros(units),
            b_o: Array1::zeros(units),
        };
        layer.mask_peepholes(peephole);
        layer
    }

    pub fn units(&self) -> usize {
        self.b_i.len()
    }

    pub fn input_width(&self) -> usize {
        self.w_is.ncols()
    }

    pub fn mask_peepholes(&mut self, peephole: Peephole) {
        peephole.mask(&mut self.w_ic);
        peephole.mask(&mut self.w_fc);
        peephole.mask(&mut self.w_oc);
    }

    /// Every tensor in declaration order, flattened row-major.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = [
            &self.w_is, &self.w_fs, &self.w_cs, &self.w_os, &self.w_ih, &self.w_fh, &self.w_ch,
            &self.w_oh, &self.w_ic, &self.w_fc, &self.w_oc,
        ]
        .into_iter()
        .map(|m| m.as_slice().expect("standard layout"))
        .collect();
        for b in [&self.b_i, &self.b_f, &self.b_c, &self.b_o] {
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = [
            &mut self.w_is,
            &mut self.w_fs,
            &mut self.w_cs,
            &mut self.w_os,
            &mut self.w_ih,
            &mut self.w_fh,
            &mut self.w_ch,
            &mut self.w_oh,
            &mut self.w_ic,
            &mut self.w_fc,
            &mut self.w_oc,
        ]
        .into_iter()
        .map(|m| m.as_slice_mut().expect("standard layout"))
        .collect();
        for b in [&mut self.b_i, &mut self.b_f, &mut self.b_c, &mut self.b_o] {
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_width(), self.units())
    }

    fn check(&self, x: &Array1<f64>, h: &Array1<f64>, c: &Array1<f64>) -> Result<()> {
        let u = self.units();
        if x.len() != self.input_width() || h.len() != u || c.len() != u {
            return Err(Error::Shape(format!(
                "lstm step with input {} / state {}+{}, layer expects {} / {}",
                x.len(),
                h.len(),
                c.len(),
                self.input_width(),
                u
            )));
        }
        Ok(())
    }

    /// One timestep; returns `(h_t, c_t)`.
    pub fn step(
        &self,
        x: &Array1<f64>,
        h_prev: &Array1<f64>,
        c_prev: &Array1<f64>,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        self.check(x, h_prev, c_prev)?;
        let cache = self.step_cached(x.clone(), h_prev.clone(), c_prev.clone());
        Ok((cache.h, cache.c))
    }

    pub(crate) fn step_cached(
        &self,
        x: Array1<f64>,
        h_prev: Array1<f64>,
        c_prev: Array1<f64>,
    ) -> StepCache {
        let i = (self.w_is.dot(&x) + self.w_ih.dot(&h_prev) + self.w_ic.dot(&c_prev) + &self.b_i)
            .mapv_into(sigmoid);
        let f = (self.w_fs.dot(&x) + self.w_fh.dot(&h_prev) + self.w_fc.dot(&c_prev) + &self.b_f)
            .mapv_into(sigmoid);
        let g = (self.w_cs.dot(&x) + self.w_ch.dot(&h_prev) + &self.b_c).mapv_into(f64::tanh);
        let c = &i * &g + &f * &c_prev;
        let o = (self.w_os.dot(&x) + self.w_oh.dot(&h_prev) + self.w_oc.dot(&c) + &self.b_o)
            .mapv_into(sigmoid);
        let tanh_c = c.mapv(f64::tanh);
        let h = &o * &tanh_c;
        StepCache {
            x,
            h_prev,
            c_prev,
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
        }
    }

    /// Runs the layer over `xs` from zero initial state.
    pub(crate) fn run(&self, xs: impl IntoIterator<Item = Array1<f64>>) -> Vec<StepCache> {
        let u = self.units();
        let mut h = Array1::zeros(u);
        let mut c = Array1::zeros(u);
        let mut out = Vec::new();
        for x in xs {
            let step = self.step_cached(x, h, c);
            h = step.h.clone();
            c = step.c.clone();
            out.push(step);
        }
        out
    }

    /// Backpropagation through time for one direction.
    ///
    /// `dh[t]` is the loss gradient flowing into `h_t` from outside the
    /// recurrence (the layer above or the head). Parameter gradients are added
    /// to `grad`; the returned vector holds `∂L/∂x_t` per step.
    pub(crate) fn backprop(
        &self,
        steps: &[StepCache],
        dh: &[Array1<f64>],
        grad: &mut LstmLayer,
    ) -> Vec<Array1<f64>> {
        let u = self.units();
        let mut dx = vec![Array1::zeros(self.input_width()); steps.len()];
        let mut dh_next: Array1<f64> = Array1::zeros(u);
        let mut dc_next: Array1<f64> = Array1::zeros(u);
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let dh_t = &dh[t] + &dh_next;

            let mut da_o = &dh_t * &s.tanh_c;
            Zip::from(&mut da_o).and(&s.o).for_each(|d, &o| *d *= o * (1.0 - o));

            let mut dc = &dh_t * &s.o;
            Zip::from(&mut dc).and(&s.tanh_c).for_each(|d, &tc| *d *= 1.0 - tc * tc);
            dc += &self.w_oc.t().dot(&da_o);
            dc += &dc_next;

            let mut da_i = &dc * &s.g;
            Zip::from(&mut da_i).and(&s.i).for_each(|d, &i| *d *= i * (1.0 - i));
            let mut da_f = &dc * &s.c_prev;
            Zip::from(&mut da_f).and(&s.f).for_each(|d, &f| *d *= f * (1.0 - f));
            let mut da_g = &dc * &s.i;
            Zip::from(&mut da_g).and(&s.g).for_each(|d, &g| *d *= 1.0 - g * g);

            add_outer(&mut grad.w_is, da_i.view(), s.x.view());
            add_outer(&mut grad.w_fs, da_f.view(), s.x.view());
            add_outer(&mut grad.w_cs, da_g.view(), s.x.view());
            add_outer(&mut grad.w_os, da_o.view(), s.x.view());
            add_outer(&mut grad.w_ih, da_i.view(), s.h_prev.view());
            add_outer(&mut grad.w_fh, da_f.view(), s.h_prev.view());
            add_outer(&mut grad.w_ch, da_g.view(), s.h_prev.view());
            add_outer(&mut grad.w_oh, da_o.view(), s.h_prev.view());
            add_outer(&mut grad.w_ic, da_i.view(), s.c_prev.view());
            add_outer(&mut grad.w_fc, da_f.view(), s.c_prev.view());
            add_outer(&mut grad.w_oc, da_o.view(), s.c.view());
            grad.b_i += &da_i;
            grad.b_f += &da_f;
            grad.b_c += &da_g;
            grad.b_o += &da_o;

            dx[t] = self.w_is.t().dot(&da_i)
                + self.w_fs.t().dot(&da_f)
                + self.w_cs.t().dot(&da_g)
                + self.w_os.t().dot(&da_o);
            dh_next = self.w_ih.t().dot(&da_i)
                + self.w_fh.t().dot(&da_f)
                + self.w_ch.t().dot(&da_g)
                + self.w_oh.t().dot(&da_o);
            dc_next = &dc * &s.f + self.w_ic.t().dot(&da_i) + self.w_fc.t().dot(&da_f);
        }
        dx
    }
}
