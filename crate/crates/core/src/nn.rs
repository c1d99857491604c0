//! Forward-pass context: binds named parameters onto a tape and carries the
//! train/eval mode and dropout randomness for one sample.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::params::{Gradients, ParamStore};
use crate::tensor::{FlopClass, Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub struct Forward<'p> {
    pub tape: Tape,
    params: &'p ParamStore,
    bound: Vec<Option<Var>>,
    mode: Mode,
    rng: Option<ChaCha8Rng>,
}

impl<'p> Forward<'p> {
    pub fn eval(params: &'p ParamStore) -> Self {
        Self {
            tape: Tape::new(),
            params,
            bound: vec![None; params.len()],
            mode: Mode::Eval,
            rng: None,
        }
    }

    /// Train mode; `rng` drives dropout masks.
    pub fn train(params: &'p ParamStore, rng: ChaCha8Rng) -> Self {
        Self {
            mode: Mode::Train,
            rng: Some(rng),
            ..Self::eval(params)
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    /// Tape handle for a named parameter, bound on first use so a parameter
    /// shared by several call sites is a single leaf.
    pub fn param(&mut self, name: &str) -> Result<Var, TensorError> {
        let i = self
            .params
            .position(name)
            .ok_or_else(|| TensorError::Contract(format!("unknown parameter {name}")))?;
        if let Some(v) = self.bound[i] {
            return Ok(v);
        }
        let v = self.tape.leaf(self.params.by_index(i).1.clone());
        self.bound[i] = Some(v);
        Ok(v)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.tape.constant(t)
    }

    /// `x·W (+ b)` with `W` stored as `[in, out]`.
    pub fn linear(
        &mut self,
        class: FlopClass,
        x: Var,
        weight: &str,
        bias: Option<&str>,
    ) -> Result<Var, TensorError> {
        let w = self.param(weight)?;
        let y = self.tape.matmul_as(class, x, w)?;
        match bias {
            Some(b) => {
                let b = self.param(b)?;
                self.tape.add_row(y, b)
            }
            None => Ok(y),
        }
    }

    /// Inverted dropout: in train mode zeroes each element with probability
    /// `p` and scales survivors by `1/(1−p)`; identity otherwise.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var, TensorError> {
        if self.mode == Mode::Eval || p <= 0.0 {
            return Ok(x);
        }
        let rng = self.rng.as_mut().expect("train mode carries an rng");
        let keep = 1.0 / (1.0 - p);
        let shape = self.tape.value(x).shape().to_vec();
        let mask = Tensor::from_fn(&shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep });
        let m = self.tape.constant(mask);
        self.tape.mul(x, m)
    }

    /// Runs backward from `loss` and collects gradients in parameter order.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, TensorError> {
        self.tape.backward(loss)?;
        let grads = self
            .bound
            .iter()
            .map(|b| b.and_then(|v| self.tape.take_grad(v)))
            .collect();
        Ok(Gradients::from_options(grads))
    }
}
