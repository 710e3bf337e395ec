//! Transformer training on majority-token sequences or tiny images.

use std::path::Path;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hypkit::autodiff::Tape;
use hypkit::data::{
    accuracy, batches, gen_sequence_task, gen_tiny_images, ImageData, SequenceData,
};
use hypkit::manifolds::Lorentz;
use hypkit::nn::{loss, Curv, ParamStore, Session};
use hypkit::optim::Optimizer;

use super::common::{argmax_rows, train_step, RunDir};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::models::{EncoderShape, ImageModel, Input, SequenceModel, ToyModel};

/// Largest tolerated membership error of any traced representation.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Training steps between traced on-manifold checks.
pub const CHECK_EVERY: usize = 25;
const EVAL_BATCH: usize = 250;

/// Generated samples with train, validation and test index ranges.
pub enum ToyData {
    Sequence(SequenceData),
    Image(ImageData),
}

impl ToyData {
    pub fn generate(cfg: &RunConfig) -> Result<Self> {
        let n = cfg.usize("train_size") + 2 * cfg.usize("test_size");
        let seed = cfg.u64("seed");
        Ok(match cfg.text("mode") {
            "image" => ToyData::Image(gen_tiny_images(
                cfg.usize("classes"),
                cfg.usize("image_size"),
                n,
                cfg.f64("noise"),
                seed,
            )?),
            _ => ToyData::Sequence(gen_sequence_task(
                cfg.usize("vocab"),
                cfg.usize("seq_len"),
                n,
                seed,
            )?),
        })
    }

    pub fn gather(&self, ids: &[usize]) -> Result<(Input, Vec<usize>)> {
        Ok(match self {
            ToyData::Sequence(d) => {
                let (tokens, labels) = d.gather(ids);
                (Input::Tokens(tokens), labels)
            }
            ToyData::Image(d) => {
                let (images, labels) = d.gather(ids)?;
                (Input::Images(images), labels)
            }
        })
    }

    pub fn classes(&self) -> usize {
        match self {
            ToyData::Sequence(d) => d.vocab,
            ToyData::Image(d) => d.classes,
        }
    }
}

/// Train, validation and test sample ids: consecutive blocks of the generated data.
pub fn split_ids(cfg: &RunConfig) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let (train, test) = (cfg.usize("train_size"), cfg.usize("test_size"));
    (
        (0..train).collect(),
        (train..train + test).collect(),
        (train + test..train + 2 * test).collect(),
    )
}

/// Rebuilds the model of a run from its configuration. Initialization is
/// seeded, so the same configuration yields the same parameter layout and values.
pub fn build_model(cfg: &RunConfig, store: &mut ParamStore) -> Result<(ToyModel, Curv)> {
    let dim = cfg.usize("dim");
    let heads = cfg.usize("heads");
    if heads == 0 || !dim.is_multiple_of(heads) {
        return Err(CliError::Usage(format!(
            "dim {dim} is not divisible by {heads} heads"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.u64("seed") ^ 0x7f7f);
    let curv = store.curvature("curvature", cfg.curvature().curvature()?)?;
    let classes = match cfg.text("mode") {
        "image" => cfg.usize("classes"),
        _ => cfg.usize("vocab"),
    };
    let shape = EncoderShape {
        dim,
        heads,
        layers: cfg.usize("layers"),
        classes,
        dropout: cfg.f64("dropout"),
    };
    let model = match cfg.text("mode") {
        "image" => ToyModel::Image(ImageModel::new(
            store,
            1,
            cfg.usize("image_size"),
            cfg.usize("patch"),
            shape,
            curv,
            &mut rng,
        )?),
        _ => ToyModel::Sequence(SequenceModel::new(
            store,
            cfg.usize("vocab"),
            cfg.usize("seq_len"),
            shape,
            curv,
            &mut rng,
        )?),
    };
    Ok((model, curv))
}

/// Applies a label permutation, if any.
pub fn relabel(labels: Vec<usize>, perm: Option<&[usize]>) -> Vec<usize> {
    match perm {
        Some(p) => labels.into_iter().map(|y| p[y]).collect(),
        None => labels,
    }
}

/// Predicted classes and (possibly permuted) labels for `ids`, evaluated in fixed-size chunks. With more
/// than one thread the chunks are spread over scoped workers and the
/// results are joined in chunk order, so output does not depend on `threads`.
pub fn predict(
    model: &ToyModel,
    store: &ParamStore,
    data: &ToyData,
    ids: &[usize],
    perm: Option<&[usize]>,
    threads: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let chunks: Vec<&[usize]> = ids.chunks(EVAL_BATCH).collect();
    let run_chunk = |chunk: &[usize]| -> Result<(Vec<usize>, Vec<usize>)> {
        let (input, labels) = data.gather(chunk)?;
        let tape = Tape::new();
        let s = Session::eval(&tape, store);
        let logits = model.forward(&s, &input, None)?.value();
        Ok((argmax_rows(&logits), relabel(labels, perm)))
    };
    let results: Vec<Result<(Vec<usize>, Vec<usize>)>> = if threads <= 1 {
        chunks.iter().map(|c| run_chunk(c)).collect()
    } else {
        let per = chunks.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .chunks(per.max(1))
                .map(|group| scope.spawn(|| group.iter().map(|c| run_chunk(c)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        })
    };
    let mut preds = Vec::with_capacity(ids.len());
    let mut labels = Vec::with_capacity(ids.len());
    for r in results {
        let (p, l) = r?;
        preds.extend(p);
        labels.extend(l);
    }
    Ok((preds, labels))
}

pub fn eval_accuracy(
    model: &ToyModel,
    store: &ParamStore,
    data: &ToyData,
    ids: &[usize],
    perm: Option<&[usize]>,
    threads: usize,
) -> Result<f64> {
    let (p, l) = predict(model, store, data, ids, perm, threads)?;
    Ok(accuracy(&p, &l)?)
}

/// Largest membership error over every representation the model produces for `input`.
pub fn trace_membership(
    model: &ToyModel,
    store: &ParamStore,
    curv: Curv,
    input: &Input,
) -> Result<f64> {
    let tape = Tape::new();
    let s = Session::eval(&tape, store);
    let mut trace = Vec::new();
    model.forward(&s, input, Some(&mut trace))?;
    let l = Lorentz::new(store.k(curv))?;
    Ok(trace
        .iter()
        .map(|t| l.membership_error(t))
        .fold(0.0, f64::max))
}

/// One pass over `train` in shuffled minibatches; returns the mean loss and
/// the largest traced membership error.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    model: &ToyModel,
    curv: Curv,
    store: &mut ParamStore,
    opt: &mut Optimizer,
    data: &ToyData,
    train: &[usize],
    perm: Option<&[usize]>,
    batch: usize,
    rng: &mut ChaCha8Rng,
    step_seed: &mut u64,
) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    let order = batches(train.len(), batch, Some(rng));
    for (i, b) in order.iter().enumerate() {
        let ids: Vec<usize> = b.iter().map(|&k| train[k]).collect();
        let (input, labels) = data.gather(&ids)?;
        let labels: Vec<usize> = relabel(labels, perm);
        *step_seed = step_seed.wrapping_add(1);
        total += train_step(store, opt, *step_seed, |s| {
            loss::cross_entropy(model.forward(s, &input, None)?, &labels)
        })?;
        if i % CHECK_EVERY == 0 {
            worst = worst.max(trace_membership(model, store, curv, &input)?);
        }
    }
    Ok((total / order.len() as f64, worst))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyOutcome {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Largest membership error seen in any traced representation.
    pub max_membership: f64,
    pub seconds: f64,
}

impl ToyOutcome {
    pub fn on_manifold(&self) -> bool {
        self.max_membership <= MEMBERSHIP_TOL
    }

    pub fn summary(&self) -> String {
        format!(
            "best epoch {} of {}: val accuracy {:.4}, test accuracy {:.4}; max membership error {:.2e}; {:.1} s",
            self.best_epoch, self.epochs_run, self.val_accuracy, self.test_accuracy, self.max_membership, self.seconds
        )
    }
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<ToyOutcome> {
    let start = std::time::Instant::now();
    let seed = cfg.u64("seed");
    let threads = cfg.usize("threads").max(1);
    let data = ToyData::generate(cfg)?;
    let (train, val, test) = split_ids(cfg);
    let mut store = ParamStore::new();
    let (model, curv) = build_model(cfg, &mut store)?;
    let mut opt = Optimizer::hybrid(&store, cfg.group("euclid"), cfg.group("hyp"))?;
    let mut run = RunDir::create(out, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba7c);
    let mut step_seed = seed.wrapping_mul(0x1_0000_0001);
    let patience = cfg.usize("patience").max(1);
    let mut max_membership: f64 = 0.0;
    let mut best: Option<(f64, f64, usize, ParamStore, Optimizer)> = None;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.usize("epochs") {
        epochs_run = epoch;
        let (loss, worst) = train_epoch(
            &model,
            curv,
            &mut store,
            &mut opt,
            &data,
            &train,
            None,
            cfg.usize("batch_size"),
            &mut rng,
            &mut step_seed,
        )?;
        max_membership = max_membership.max(worst);
        let val_acc = eval_accuracy(&model, &store, &data, &val, None, threads)?;
        let test_acc = eval_accuracy(&model, &store, &data, &test, None, threads)?;
        run.metrics.row(epoch, "train", "loss", loss)?;
        run.metrics
            .row(epoch, "train", "max_membership_error", worst)?;
        run.metrics.row(epoch, "val", "accuracy", val_acc)?;
        run.metrics.row(epoch, "test", "accuracy", test_acc)?;
        info!("epoch {epoch}: loss {loss:.4} val {val_acc:.4} test {test_acc:.4} membership {worst:.1e}");
        if best.as_ref().is_none_or(|b| val_acc > b.0) {
            best = Some((val_acc, test_acc, epoch, store.clone(), opt.clone()));
            if val_acc >= 1.0 {
                info!("validation accuracy is perfect, stopping");
                break;
            }
        } else if epoch - best.as_ref().map_or(0, |b| b.2) >= patience {
            info!("no validation gain for {patience} epochs, stopping");
            break;
        }
    }
    let (val_accuracy, test_accuracy, best_epoch, best_store, best_opt) =
        best.ok_or_else(|| CliError::Usage("epochs must be at least 1".into()))?;
    run.metrics
        .row(best_epoch, "best_test", "accuracy", test_accuracy)?;
    run.save(cfg, &best_store, Some(&best_opt))?;
    Ok(ToyOutcome {
        epochs_run,
        best_epoch,
        val_accuracy,
        test_accuracy,
        max_membership,
        seconds: start.elapsed().as_secs_f64(),
    })
}
