use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::SalNet;
use crate::data::{max_normalize, normalize, split_by_source, PatchSample, SamplePair};
use crate::error::{Error, Result};
use crate::nn::{sgd_step, SgdConfig, Tensor};

/// A training example as network-ready tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub source_id: String,
    /// `(1, 3, h, w)`, normalized.
    pub image: Tensor,
    /// `(1, 2, h, w)`; required for the end-to-end stage.
    pub coords: Option<Tensor>,
    /// `(1, 1, h, w)`.
    pub target: Tensor,
}

impl TrainSample {
    /// Whole-image example; the target is scaled to a maximum of one.
    pub fn from_pair(p: &SamplePair, mean: &[f64]) -> Self {
        Self {
            source_id: p.id.clone(),
            image: Tensor::from_raster(&normalize(&p.image, mean)),
            coords: None,
            target: Tensor::from_raster(&max_normalize(&p.saliency)),
        }
    }

    pub fn from_patch(p: &PatchSample) -> Self {
        Self {
            source_id: p.source_id.clone(),
            image: Tensor::from_raster(&p.image),
            coords: Some(p.coords.to_tensor()),
            target: Tensor::from_raster(&p.saliency),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sgd: SgdConfig,
    /// Fraction of source images held out for the test loss.
    pub test_fraction: f64,
    /// Iterations between test-loss evaluations (and log lines).
    pub test_every: usize,
    /// Training aborts once the test loss exceeds this multiple of the best
    /// test loss seen so far.
    pub divergence_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sgd: SgdConfig::default(),
            test_fraction: 0.1,
            test_every: 100,
            divergence_factor: 10.0,
            seed: 0,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Written every `test_every` iterations, plus one line after the last
    /// iteration whose train loss covers the whole training split.
    pub records: Vec<LogRecord>,
    /// Mini-batch loss of every iteration.
    pub train_curve: Vec<f64>,
    /// Whole-split losses before and after training.
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub n_train: usize,
    pub n_test: usize,
}

const LOG_HEADER: &str = "# iteration lr train_loss test_loss";

impl TrainLog {
    pub fn to_text(&self) -> String {
        let mut s = format!("{LOG_HEADER}\n");
        for r in &self.records {
            // `{:e}` prints the shortest representation that parses back
            // to the same value
            writeln!(s, "{} {:e} {:.9e} {:.9e}", r.iteration, r.lr, r.train_loss, r.test_loss).unwrap();
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Vec<LogRecord>> {
        let bad = |n: usize| Error::Config(format!("training log line {}: expected 4 numeric columns", n + 1));
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|(n, l)| {
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() != 4 {
                    return Err(bad(n));
                }
                let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(n));
                Ok(LogRecord {
                    iteration: f[0].parse().map_err(|_| bad(n))?,
                    lr: num(1)?,
                    train_loss: num(2)?,
                    test_loss: num(3)?,
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Stage {
    Base,
    Full,
}

fn batch(samples: &[&TrainSample], stage: Stage) -> Result<(Tensor, Option<Tensor>, Tensor)> {
    let x = Tensor::stack(&samples.iter().map(|s| s.image.clone()).collect::<Vec<_>>())?;
    let t = Tensor::stack(&samples.iter().map(|s| s.target.clone()).collect::<Vec<_>>())?;
    let c = match stage {
        Stage::Base => None,
        Stage::Full => Some(Tensor::stack(
            &samples
                .iter()
                .map(|s| s.coords.clone().ok_or_else(|| Error::InvalidArgument("sample lacks coordinates".into())))
                .collect::<Result<Vec<_>>>()?,
        )?),
    };
    Ok((x, c, t))
}

fn loss_of(net: &SalNet, stage: Stage, x: &Tensor, c: Option<&Tensor>, t: &Tensor) -> Result<f64> {
    match stage {
        Stage::Base => net.base_loss(x, t),
        Stage::Full => net.full_loss(x, c.expect("coordinates checked"), t),
    }
}

/// Mean per-sample loss over `samples`.
fn mean_loss(net: &SalNet, stage: Stage, samples: &[&TrainSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let (x, c, t) = batch(std::slice::from_ref(s), stage)?;
        total += loss_of(net, stage, &x, c.as_ref(), &t)?;
    }
    Ok(total / samples.len() as f64)
}

fn run(net: &mut SalNet, data: &[TrainSample], cfg: &TrainConfig, stage: Stage) -> Result<TrainLog> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.sgd.validate()?;
    if cfg.test_every == 0 {
        return Err(Error::InvalidArgument("test cadence must be positive".into()));
    }
    let refs: Vec<&TrainSample> = data.iter().collect();
    let (train, test) = split_by_source(refs, |s| s.source_id.as_str(), cfg.test_fraction, cfg.seed)?;
    if stage == Stage::Full && data.iter().any(|s| s.coords.is_none()) {
        return Err(Error::InvalidArgument("end-to-end training needs coordinate channels".into()));
    }
    let batch_size = cfg.sgd.batch_size.min(train.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();

    let initial_train_loss = mean_loss(net, stage, &train)?;
    let mut log = TrainLog {
        records: Vec::new(),
        train_curve: Vec::with_capacity(cfg.sgd.iterations),
        initial_train_loss,
        final_train_loss: initial_train_loss,
        n_train: train.len(),
        n_test: test.len(),
    };
    let mut best = f64::INFINITY;
    let mut check = |log: &mut TrainLog, rec: LogRecord| -> Result<()> {
        info!(
            "iter {:>6}  lr {:.3e}  train {:.6e}  test {:.6e}",
            rec.iteration, rec.lr, rec.train_loss, rec.test_loss
        );
        log.records.push(rec);
        if !rec.test_loss.is_finite() || rec.test_loss > cfg.divergence_factor * best {
            return Err(Error::Diverged {
                iteration: rec.iteration,
                test_loss: rec.test_loss,
                best,
            });
        }
        best = best.min(rec.test_loss);
        Ok(())
    };

    for it in 0..cfg.sgd.iterations {
        let mut picked = Vec::with_capacity(batch_size);
        while picked.len() < batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            picked.push(train[order[cursor]]);
            cursor += 1;
        }
        let (x, c, t) = batch(&picked, stage)?;
        let (loss, grads) = match stage {
            Stage::Base => net.base_loss_and_gradients(&x, &t)?,
            Stage::Full => net.full_loss_and_gradients(&x, c.as_ref().expect("coordinates checked"), &t)?,
        };
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: it,
                test_loss: loss,
                best,
            });
        }
        log.train_curve.push(loss);
        if it % cfg.test_every == 0 {
            let rec = LogRecord {
                iteration: it,
                lr: cfg.sgd.learning_rate(it),
                train_loss: loss,
                test_loss: mean_loss(net, stage, &test)?,
            };
            check(&mut log, rec)?;
        }
        let mut params = match stage {
            Stage::Base => net.base_mut().parameters_mut(),
            Stage::Full => net.parameters_mut(),
        };
        sgd_step(&mut params, &grads, &cfg.sgd, it)?;
    }

    let n = cfg.sgd.iterations;
    log.final_train_loss = mean_loss(net, stage, &train)?;
    let rec = LogRecord {
        iteration: n,
        lr: cfg.sgd.learning_rate(n),
        train_loss: log.final_train_loss,
        test_loss: mean_loss(net, stage, &test)?,
    };
    check(&mut log, rec)?;
    Ok(log)
}

/// Trains the base network alone with the loss at its resized output.
pub fn train_stage1(net: &mut SalNet, data: &[TrainSample], cfg: &TrainConfig) -> Result<TrainLog> {
    run(net, data, cfg, Stage::Base)
}

/// Trains the whole network end to end with the loss at the refinement
/// output. Every sample needs coordinate channels.
pub fn train_stage2(net: &mut SalNet, data: &[TrainSample], cfg: &TrainConfig) -> Result<TrainLog> {
    run(net, data, cfg, Stage::Full)
}
