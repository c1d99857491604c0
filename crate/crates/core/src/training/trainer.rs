use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::dataset::Sample;
use super::metrics::ConfusionMatrix;
use super::schedule::lr_at;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::fusion::{multimodal_loss, predict};
use crate::model::{Model, ModelConfig};
use crate::nn::Forward;
use crate::parallel::{self, Execution};
use crate::params::{Gradients, ParamStore};

pub const METRICS_HEADER: &str = "epoch,lr,train_loss,eval_accuracy";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub eval_accuracy: f64,
}

impl EpochMetrics {
    pub const HEADER: &'static str = METRICS_HEADER;

    /// One CSV row; floats use the shortest representation that round-trips.
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.epoch, self.lr, self.train_loss, self.eval_accuracy)
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ParamStore,
    pub adam: AdamState,
    /// Next epoch to run.
    pub epoch: usize,
    /// Drives the per-epoch shuffle.
    pub rng: ChaCha8Rng,
    pub best_accuracy: Option<f64>,
    pub best_epoch: usize,
    pub best_params: Option<ParamStore>,
    pub since_best: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochMetrics>,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<usize>,
}

/// Randomness for the sample at `position` of the shuffled order in
/// `epoch`; independent of thread scheduling.
pub fn sample_rng(seed: u64, epoch: usize, position: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_F42D_4C95_7F2D);
    rng.set_stream(((epoch as u64) << 32) | position as u64);
    rng
}

/// Eval-mode predictions and confusion counts over `samples`.
pub fn evaluate(model: &Model, params: &ParamStore, samples: &[Sample], exec: Execution) -> Result<Evaluation> {
    let classes = model.config().num_classes;
    if samples.is_empty() {
        return Err(Error::Config("cannot evaluate an empty sample set".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.label >= classes) {
        return Err(Error::Config(format!(
            "sample {} has label {} but the model has {classes} classes",
            s.id, s.label
        )));
    }
    let preds: Vec<usize> = parallel::map(exec, samples, |s| {
        let mut fw = Forward::eval(params);
        let out = model.forward(&mut fw, &s.input, false).map_err(|e| e.in_sample(&s.id))?;
        Ok(predict(fw.tape.value(out.fusion.logits).data()))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let confusion = ConfusionMatrix::new(&preds, &labels, classes)?;
    Ok(Evaluation {
        accuracy: super::metrics::accuracy(&preds, &labels)?,
        confusion,
        predictions: preds,
    })
}

pub struct Trainer {
    model: Model,
    cfg: TrainConfig,
}

impl Trainer {
    pub fn new(model_cfg: ModelConfig, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut model_cfg = model_cfg;
        if let Some(p) = cfg.dropout {
            model_cfg.encoder.dropout = p;
        }
        Ok(Self {
            model: Model::new(model_cfg)?,
            cfg,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn init_state(&self) -> Result<TrainState> {
        let params = self.model.init(self.cfg.seed)?;
        Ok(TrainState {
            adam: AdamState::new(&params),
            params,
            epoch: 0,
            rng: ChaCha8Rng::seed_from_u64(self.cfg.seed),
            best_accuracy: None,
            best_epoch: 0,
            best_params: None,
            since_best: 0,
        })
    }

    /// Loss and gradients of one sample in train mode.
    pub fn sample_gradients(&self, params: &ParamStore, sample: &Sample, mut rng: ChaCha8Rng) -> Result<(f64, Gradients)> {
        let augmented;
        let input = if self.cfg.augment.enabled() {
            let mut x = sample.input.clone();
            self.cfg.augment.apply(&mut x, &mut rng);
            augmented = x;
            &augmented
        } else {
            &sample.input
        };
        let mut fw = Forward::train(params, rng);
        let out = self.model.forward(&mut fw, input, false)?;
        let loss = multimodal_loss(
            &mut fw,
            &out.fusion,
            sample.label,
            self.cfg.lambda_audio,
            self.cfg.lambda_video,
        )?;
        let value = fw.tape.value(loss).data()[0];
        Ok((value, fw.backward(loss)?))
    }

    pub fn should_stop(&self, state: &TrainState) -> bool {
        state.epoch >= self.cfg.max_epochs || state.since_best >= self.cfg.patience
    }

    /// Runs one epoch: seeded shuffle, mini-batch Adam steps, then
    /// evaluation on `eval` (or on `train` when `eval` is empty).
    pub fn run_epoch(&self, state: &mut TrainState, train: &[Sample], eval: &[Sample]) -> Result<EpochMetrics> {
        if train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let epoch = state.epoch;
        let lr = lr_at(epoch, &self.cfg);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut state.rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            let jobs: Vec<(usize, usize)> = batch
                .iter()
                .enumerate()
                .map(|(j, &i)| (b * self.cfg.batch_size + j, i))
                .collect();
            let params = &state.params;
            let results = parallel::map(self.cfg.execution, &jobs, |&(pos, i)| {
                let rng = sample_rng(self.cfg.seed, epoch, pos);
                self.sample_gradients(params, &train[i], rng)
                    .map_err(|e| e.in_sample(&train[i].id))
            });
            let mut total = Gradients::from_options(vec![None; state.params.len()]);
            for r in results {
                let (loss, g) = r?;
                loss_sum += loss;
                total.accumulate(&g);
            }
            total.scale(1.0 / batch.len() as f64);
            state.adam.step(&mut state.params, &total, lr)?;
        }
        let eval_set = if eval.is_empty() { train } else { eval };
        let acc = evaluate(&self.model, &state.params, eval_set, self.cfg.execution)?.accuracy;
        if state.best_accuracy.is_none_or(|best| acc > best) {
            state.best_accuracy = Some(acc);
            state.best_epoch = epoch;
            state.best_params = Some(state.params.clone());
            state.since_best = 0;
        } else {
            state.since_best += 1;
        }
        state.epoch += 1;
        Ok(EpochMetrics {
            epoch,
            lr,
            train_loss: loss_sum / train.len() as f64,
            eval_accuracy: acc,
        })
    }

    /// Trains until `max_epochs` or early stopping, calling `on_epoch`
    /// after every epoch with the updated state.
    pub fn train(
        &self,
        state: &mut TrainState,
        train: &[Sample],
        eval: &[Sample],
        mut on_epoch: impl FnMut(&TrainState, &EpochMetrics) -> Result<()>,
    ) -> Result<TrainReport> {
        self.model.check_params(&state.params)?;
        let mut history = Vec::new();
        while !self.should_stop(state) {
            let m = self.run_epoch(state, train, eval)?;
            on_epoch(state, &m)?;
            history.push(m);
        }
        Ok(TrainReport {
            history,
            stopped_early: state.epoch < self.cfg.max_epochs,
        })
    }
}
