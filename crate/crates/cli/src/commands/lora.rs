//! Low-rank adaptation of a trained transformer-toy model to permuted labels.

use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hypkit::autodiff::Tape;
use hypkit::nn::{Curv, ParamId, ParamStore, Session};
use hypkit::optim::Optimizer;
use hypkit::Tensor;

use super::common::{RunDir, CHECKPOINT_FILE};
use super::toy::{build_model, eval_accuracy, split_ids, train_epoch, ToyData};
use crate::checkpoint::Checkpoint;
use crate::config::{RunConfig, Task};
use crate::error::{CliError, Result};
use crate::models::ToyModel;

#[derive(Clone, Debug, PartialEq)]
pub struct LoraOutcome {
    /// Test accuracy of the restored base model on the original labels.
    pub base_accuracy: f64,
    /// Test logits with freshly attached adapters equal the base logits bit for bit.
    pub zero_init_identical: bool,
    /// Test accuracy on the permuted labels before and after fine-tuning.
    pub shifted_before: f64,
    pub shifted_after: f64,
    pub permutation: Vec<usize>,
    pub adapter_params: usize,
    pub base_params: usize,
}

impl LoraOutcome {
    pub fn summary(&self) -> String {
        format!(
            "base accuracy {:.4}; zero-init adapters identical: {}; permuted labels {:?}: {:.4} -> {:.4} \
             training {} adapter values, {} base values frozen and unchanged",
            self.base_accuracy,
            self.zero_init_identical,
            self.permutation,
            self.shifted_before,
            self.shifted_after,
            self.adapter_params,
            self.base_params
        )
    }
}

/// Seeded permutation of `0..n` without fixed points.
pub fn derangement(n: usize, seed: u64) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(CliError::Usage(format!(
            "cannot permute {n} classes without fixed points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(&mut rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return Ok(p);
        }
    }
}

fn test_logits(
    model: &ToyModel,
    store: &ParamStore,
    data: &ToyData,
    ids: &[usize],
) -> Result<Tensor> {
    let (input, _) = data.gather(ids)?;
    let tape = Tape::new();
    let s = Session::eval(&tape, store);
    Ok(model.forward(&s, &input, None)?.value())
}

/// Restores a transformer-toy run saved in `dir`.
pub fn load_base(dir: &Path) -> Result<(RunConfig, ToyModel, Curv, ParamStore)> {
    let ckpt = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
    let cfg = RunConfig::parse(Task::TransformerToy, &ckpt.config)?;
    let mut store = ParamStore::new();
    let (model, curv) = build_model(&cfg, &mut store)?;
    ckpt.restore(&mut store, None)?;
    Ok((cfg, model, curv, store))
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<LoraOutcome> {
    let dir = cfg.text("checkpoint");
    if dir.is_empty() {
        return Err(CliError::Usage(
            "lora needs checkpoint = <transformer-toy output directory>".into(),
        ));
    }
    let seed = cfg.u64("seed");
    let threads = cfg.usize("threads").max(1);
    let (base_cfg, mut model, curv, mut store) = load_base(Path::new(dir))?;
    let data = ToyData::generate(&base_cfg)?;
    let (train, val, test) = split_ids(&base_cfg);
    let mut run = RunDir::create(out, cfg)?;

    let base_accuracy = eval_accuracy(&model, &store, &data, &test, None, threads)?;
    let base_logits = test_logits(&model, &store, &data, &test)?;
    run.metrics.row(0, "base_test", "accuracy", base_accuracy)?;

    store.freeze_all();
    let base: Vec<(ParamId, Tensor)> = store.iter().map(|(id, p)| (id, p.value.clone())).collect();
    let base_params: usize = base.iter().map(|(_, t)| t.numel()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10a);
    let (rank, alpha) = (cfg.usize("rank"), cfg.f64("alpha"));
    for (i, layer) in model.encoder_mut().attention_projections().enumerate() {
        let name = format!("adapter{i}");
        layer.attach_lora(&mut store, &name, rank, alpha, &mut rng)?;
    }
    let adapter_params: usize = store
        .iter()
        .filter(|(_, p)| !p.frozen)
        .map(|(_, p)| p.value.numel())
        .sum();

    let zero_init_identical =
        test_logits(&model, &store, &data, &test)?.data() == base_logits.data();
    let zero_acc = eval_accuracy(&model, &store, &data, &test, None, threads)?;
    run.metrics.row(0, "zero_init_test", "accuracy", zero_acc)?;
    run.metrics.row(
        0,
        "zero_init_test",
        "logits_identical",
        f64::from(u8::from(zero_init_identical)),
    )?;

    let perm = derangement(data.classes(), seed ^ 0x9e12)?;
    let shifted_before = eval_accuracy(&model, &store, &data, &test, Some(&perm), threads)?;
    run.metrics
        .row(0, "shifted_test", "accuracy", shifted_before)?;

    // frozen base parameters are left out of both groups
    let mut opt = Optimizer::hybrid(&store, cfg.group("euclid"), cfg.group("euclid"))?;
    let mut step_seed = seed.wrapping_mul(0x2_0000_0003);
    let mut shifted_after = shifted_before;
    for epoch in 1..=cfg.usize("epochs") {
        let (loss, _) = train_epoch(
            &model,
            curv,
            &mut store,
            &mut opt,
            &data,
            &train,
            Some(&perm),
            cfg.usize("batch_size"),
            &mut rng,
            &mut step_seed,
        )?;
        let val_acc = eval_accuracy(&model, &store, &data, &val, Some(&perm), threads)?;
        shifted_after = eval_accuracy(&model, &store, &data, &test, Some(&perm), threads)?;
        run.metrics.row(epoch, "train", "loss", loss)?;
        run.metrics.row(epoch, "val", "accuracy", val_acc)?;
        run.metrics.row(epoch, "test", "accuracy", shifted_after)?;
        info!("epoch {epoch}: loss {loss:.4} val {val_acc:.4} test {shifted_after:.4}");
        if val_acc >= 1.0 {
            break;
        }
    }

    for (id, value) in &base {
        let p = store.get(*id);
        if p.value.data() != value.data() {
            return Err(CliError::Checkpoint(format!(
                "frozen parameter {} changed during fine-tuning",
                p.name
            )));
        }
    }
    run.save(cfg, &store, Some(&opt))?;
    Ok(LoraOutcome {
        base_accuracy,
        zero_init_identical,
        shifted_before,
        shifted_after,
        permutation: perm,
        adapter_params,
        base_params,
    })
}
