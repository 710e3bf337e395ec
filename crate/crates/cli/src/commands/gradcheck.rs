//! Central-difference gradient checks of every manifold op and layer.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypkit::autodiff::{gradcheck_many, GradReport, Tape, Var};
use hypkit::manifolds::{sample, Lorentz, Poincare};
use hypkit::nn::coords::{concat, split, truncate};
use hypkit::nn::geometry::{self, ball};
use hypkit::nn::{
    activation, attention, causal_mask, centroid_pool, loss, normalized_adjacency, random_points,
    Activation, BatchNorm, CentroidConv, Curv, LResNet, LayerNorm, LorentzLinear, LorentzMlr,
    MultiHeadAttention, ParamId, ParamStore, PatchEmbed, PoincareLinear, PositionalEmbedding,
    Session, TangentConv, TransformerBlock, WordEmbedding,
};
use hypkit::{Result, Tensor};

pub const SEEDS: u64 = 10;
pub const STEP: f64 = 1e-6;
pub const TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct Row {
    pub op: &'static str,
    pub seed: u64,
    pub report: GradReport,
}

type Case = fn(u64) -> Result<GradReport>;

/// Every checked op in report order.
pub fn cases() -> Vec<(&'static str, Case)> {
    vec![
        ("lorentz.expmap", lorentz_expmap),
        ("lorentz.logmap", lorentz_logmap),
        ("lorentz.expmap0", lorentz_expmap0),
        ("lorentz.logmap0", lorentz_logmap0),
        ("lorentz.dist", lorentz_dist),
        ("lorentz.dist_sq", lorentz_dist_sq),
        ("lorentz.ptransp0", lorentz_ptransp0),
        ("lorentz.lift", lorentz_lift),
        ("lorentz.project", lorentz_project),
        ("lorentz.centroid", lorentz_centroid),
        ("lorentz.residual_ptransp", residual_ptransp),
        ("cone.half_aperture", half_aperture),
        ("cone.exterior_angle", exterior_angle),
        ("poincare.mobius_add", ball_mobius_add),
        ("poincare.expmap", ball_expmap),
        ("poincare.logmap", ball_logmap),
        ("poincare.expmap0_logmap0", ball_origin_maps),
        ("poincare.dist", ball_dist),
        ("layer.lorentz_linear", lorentz_linear),
        ("layer.lorentz_linear_full", lorentz_linear_full),
        ("layer.poincare_linear", poincare_linear),
        ("layer.activation", activations),
        ("layer.layer_norm", layer_norm),
        ("layer.batch_norm", batch_norm),
        ("layer.lresnet", lresnet),
        ("layer.concat_split", concat_split),
        ("layer.truncate", truncate_case),
        ("layer.word_embedding", word_embedding),
        ("layer.positional_embedding", positional_embedding),
        ("layer.patch_embed", patch_embed),
        ("layer.attention", attention_case),
        ("layer.multi_head_attention", multi_head_attention),
        ("layer.lorentz_mlr", lorentz_mlr),
        ("layer.centroid_pool", pool),
        ("layer.tangent_conv", tangent_conv),
        ("layer.centroid_conv", centroid_conv),
        ("layer.transformer_block", transformer_block),
        ("layer.lora_adapter", lora_adapter),
        ("loss.fermi_dirac_bce", fermi_dirac_bce),
        ("loss.cross_entropy", cross_entropy),
        ("loss.contrastive", contrastive),
        ("loss.entailment", entailment),
    ]
}

/// Runs every case at seeds `0..seeds`.
pub fn run(seeds: u64) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (op, case) in cases() {
        for seed in 0..seeds {
            let report = case(seed)?;
            rows.push(Row { op, seed, report });
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut s = String::from("op,seed,max_rel_err,max_abs_err,passed\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:e},{:e},{}\n",
            r.op, r.seed, r.report.max_rel_err, r.report.max_abs_err, r.report.passed
        ));
    }
    s
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1))
}

fn curvature<R: Rng>(rng: &mut R) -> f64 {
    -rng.random_range(0.5..2.0)
}

/// Reduces a tensor-valued output to a scalar with a fixed random probe.
fn probe<'t>(out: Var<'t>, seed: u64) -> Result<Var<'t>> {
    let p = Tensor::randn(&out.shape(), 1.0, &mut rng(seed ^ 0xabcdef));
    out.mul(out.tape().constant(p))?.sum()
}

fn check<F>(inputs: &[Tensor], seed: u64, f: F) -> Result<GradReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    gradcheck_many(|t, v| probe(f(t, v)?, seed), inputs, STEP, TOL)
}

/// Checks a layer with respect to its inputs and the listed parameters.
fn check_layer<F>(
    store: &ParamStore,
    params: &[ParamId],
    inputs: Vec<Tensor>,
    seed: u64,
    f: F,
) -> Result<GradReport>
where
    F: for<'t> Fn(&Session<'t>, &[Var<'t>]) -> Result<Var<'t>>,
{
    check_layer_mode(store, params, inputs, seed, false, f)
}

fn check_layer_mode<F>(
    store: &ParamStore,
    params: &[ParamId],
    inputs: Vec<Tensor>,
    seed: u64,
    training: bool,
    f: F,
) -> Result<GradReport>
where
    F: for<'t> Fn(&Session<'t>, &[Var<'t>]) -> Result<Var<'t>>,
{
    let n_in = inputs.len();
    let mut all = inputs;
    all.extend(params.iter().map(|&p| store.value(p).clone()));
    check(&all, seed, |t, v| {
        let binds: Vec<(ParamId, Var<'_>)> = params
            .iter()
            .copied()
            .zip(v[n_in..].iter().copied())
            .collect();
        let s = Session::bind(t, store, &binds).with_training(training);
        f(&s, &v[..n_in])
    })
}

fn lorentz_pts(seed: u64, count: usize, n: usize) -> Result<(f64, Tensor, Tensor, ChaCha8Rng)> {
    let mut r = rng(seed);
    let k = curvature(&mut r);
    let m = Lorentz::new(k)?;
    let x = sample::lorentz_points(&m, count, n, 2.0, &mut r)?;
    let y = sample::lorentz_points(&m, count, n, 2.0, &mut r)?;
    Ok((k, x, y, r))
}

fn lorentz_expmap(seed: u64) -> Result<GradReport> {
    let (k, x, _, mut r) = lorentz_pts(seed, 3, 4)?;
    let v = sample::lorentz_tangents(&Lorentz::new(k)?, &x, 2.0, &mut r)?;
    check(&[x, v, Tensor::scalar(-k)], seed, |_, v| {
        geometry::expmap(v[0], v[1], v[2])
    })
}

fn lorentz_logmap(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = lorentz_pts(seed, 3, 4)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        geometry::logmap(v[0], v[1], v[2])
    })
}

fn lorentz_expmap0(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let k = curvature(&mut r);
    let u = Tensor::randn(&[3, 4], 1.0, &mut r);
    check(&[u, Tensor::scalar(-k)], seed, |_, v| {
        geometry::expmap0(v[0], v[1])
    })
}

fn lorentz_logmap0(seed: u64) -> Result<GradReport> {
    let (k, x, _, _) = lorentz_pts(seed, 3, 4)?;
    check(&[x, Tensor::scalar(-k)], seed, |_, v| {
        geometry::logmap0(v[0], v[1])
    })
}

fn lorentz_dist(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = lorentz_pts(seed, 3, 4)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        geometry::dist(v[0], v[1], v[2])
    })
}

fn lorentz_dist_sq(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = lorentz_pts(seed, 3, 4)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        geometry::dist_sq(v[0], v[1], v[2])
    })
}

fn lorentz_ptransp0(seed: u64) -> Result<GradReport> {
    let (k, x, _, mut r) = lorentz_pts(seed, 3, 4)?;
    let u = Tensor::randn(&[3, 4], 1.0, &mut r);
    check(&[x, u, Tensor::scalar(-k)], seed, |_, v| {
        geometry::ptransp0(v[0], v[1], v[2])
    })
}

fn lorentz_lift(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let k = curvature(&mut r);
    let u = Tensor::randn(&[3, 4], 1.5, &mut r);
    check(&[u, Tensor::scalar(-k)], seed, |_, v| {
        geometry::lift(v[0], v[1])
    })
}

fn lorentz_project(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = lorentz_pts(seed, 3, 4)?;
    // a positive combination of future time-like vectors is future time-like
    let z = x.scale(0.7).add(&y.scale(1.3))?;
    check(&[z, Tensor::scalar(-k)], seed, |_, v| {
        geometry::project(v[0], v[1])
    })
}

fn lorentz_centroid(seed: u64) -> Result<GradReport> {
    let (k, x, _, mut r) = lorentz_pts(seed, 5, 3)?;
    let w = Tensor::uniform(&[2, 5], 0.1, 1.0, &mut r);
    check(&[x, w, Tensor::scalar(-k)], seed, |_, v| {
        geometry::centroid(v[0], v[1], v[2])
    })
}

fn residual_ptransp(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = lorentz_pts(seed, 3, 4)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        geometry::residual_ptransp(v[0], v[1], v[2])
    })
}

fn half_aperture(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let k = curvature(&mut r);
    let m = Lorentz::new(k)?;
    // far enough out that the aperture is below its clamp
    let u = Tensor::randn(&[3, 3], 1.0, &mut r);
    let norms: Vec<f64> = u
        .rows()
        .map(|row| row.iter().map(|a| a * a).sum::<f64>().sqrt())
        .collect();
    let u = Tensor::from_fn(&[3, 3], |i| {
        u.data()[i] / norms[i / 3] * (1.5 + i as f64 * 0.01)
    });
    let x = m.expmap0(&u)?;
    check(&[x, Tensor::scalar(-k)], seed, |_, v| {
        geometry::half_aperture(v[0], 0.1, v[1])
    })
}

fn exterior_angle(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = lorentz_pts(seed, 3, 4)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        geometry::exterior_angle(v[0], v[1], v[2])
    })
}

fn ball_pts(seed: u64, count: usize, n: usize) -> Result<(f64, Tensor, Tensor, ChaCha8Rng)> {
    let mut r = rng(seed);
    let k = curvature(&mut r);
    let b = Poincare::new(k)?;
    let x = sample::poincare_points(&b, count, n, 2.0, &mut r)?;
    let y = sample::poincare_points(&b, count, n, 2.0, &mut r)?;
    Ok((k, x, y, r))
}

fn ball_mobius_add(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = ball_pts(seed, 3, 4)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        ball::mobius_add(v[0], v[1], v[2])
    })
}

fn ball_expmap(seed: u64) -> Result<GradReport> {
    let (k, x, _, mut r) = ball_pts(seed, 3, 4)?;
    let v = sample::poincare_tangents(&Poincare::new(k)?, &x, 2.0, &mut r);
    check(&[x, v, Tensor::scalar(-k)], seed, |_, v| {
        ball::expmap(v[0], v[1], v[2])
    })
}

fn ball_logmap(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = ball_pts(seed, 3, 4)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        ball::logmap(v[0], v[1], v[2])
    })
}

fn ball_origin_maps(seed: u64) -> Result<GradReport> {
    let (k, x, _, mut r) = ball_pts(seed, 3, 4)?;
    let u = Tensor::randn(&[3, 4], 0.7, &mut r);
    check(&[x, u, Tensor::scalar(-k)], seed, |_, v| {
        let a = ball::logmap0(v[0], v[2])?;
        let b = ball::expmap0(v[1], v[2])?;
        v[0].tape().concat(&[a, b], 1)
    })
}

fn ball_dist(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = ball_pts(seed, 3, 4)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        ball::dist(v[0], v[1], v[2])
    })
}

/// Fixed-curvature layer fixture: store, rng, curvature and 3 input points of dimension `n`.
fn layer_fixture(
    seed: u64,
    shape: &[usize],
) -> Result<(ParamStore, ChaCha8Rng, Curv, Lorentz, Tensor)> {
    let mut r = rng(seed);
    let k = curvature(&mut r);
    let m = Lorentz::new(k)?;
    let x = random_points(&m, shape, 0.6, &mut r)?;
    Ok((ParamStore::new(), r, Curv::Fixed(k), m, x))
}

fn lorentz_linear(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[3, 4])?;
    let out = Curv::Fixed(-1.3);
    let l = LorentzLinear::new(&mut store, "l", 4, 3, c, out, &mut r)?
        .with_activation(Activation::Tanh);
    check_layer(&store, &l.params(), vec![x], seed, |s, v| {
        l.forward(s, v[0])
    })
}

fn lorentz_linear_full(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[3, 4])?;
    let l = LorentzLinear::new_full(&mut store, "l", 4, 5, c, c, &mut r)?
        .with_activation(Activation::Gelu);
    check_layer(&store, &l.params(), vec![x], seed, |s, v| {
        l.forward(s, v[0])
    })
}

fn poincare_linear(seed: u64) -> Result<GradReport> {
    let (k, x, _, mut r) = ball_pts(seed, 3, 4)?;
    let mut store = ParamStore::new();
    let l = PoincareLinear::new(&mut store, "p", 4, 3, Curv::Fixed(k), &mut r)?;
    check_layer(&store, &[l.weight, l.bias], vec![x], seed, |s, v| {
        l.forward(s, v[0])
    })
}

fn activations(seed: u64) -> Result<GradReport> {
    let (_, _, _, m, x) = layer_fixture(seed, &[3, 4])?;
    check(&[x, Tensor::scalar(m.c())], seed, |t, v| {
        let a = activation(v[0], Activation::Gelu, v[1])?;
        let b = activation(v[0], Activation::Tanh, v[1])?;
        t.concat(&[a, b], 1)
    })
}

fn layer_norm(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[3, 5])?;
    let ln = LayerNorm::new(&mut store, "ln", 5, c)?;
    store.set_value(ln.gamma, Tensor::uniform(&[5], 0.5, 1.5, &mut r))?;
    store.set_value(ln.beta, Tensor::randn(&[5], 0.3, &mut r))?;
    check_layer(&store, &ln.params(), vec![x], seed, |s, v| {
        ln.forward(s, v[0])
    })
}

fn batch_norm(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[4, 3])?;
    let bn = BatchNorm::new(&mut store, "bn", 3, c)?;
    store.set_value(bn.gamma, Tensor::uniform(&[3], 0.5, 1.5, &mut r))?;
    check_layer_mode(&store, &bn.params(), vec![x], seed, true, |s, v| {
        bn.forward(s, v[0])
    })
}

fn lresnet(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, m, x) = layer_fixture(seed, &[3, 4])?;
    let y = random_points(&m, &[3, 4], 0.6, &mut r)?;
    let res = LResNet::new(&mut store, "res", c)?;
    store.set_value(res.w_x, Tensor::scalar(r.random_range(-0.5..0.5)))?;
    store.set_value(res.w_y, Tensor::scalar(r.random_range(-0.5..0.5)))?;
    check_layer(&store, &res.params(), vec![x, y], seed, |s, v| {
        res.forward(s, v[0], v[1])
    })
}

fn concat_split(seed: u64) -> Result<GradReport> {
    let (_, mut r, _, m, x) = layer_fixture(seed, &[2, 3])?;
    let y = random_points(&m, &[2, 2], 0.6, &mut r)?;
    check(&[x, y, Tensor::scalar(m.c())], seed, |t, v| {
        let joined = concat(&[v[0], v[1]], v[2])?;
        let parts = split(joined, &[1, 4], v[2])?;
        t.concat(&[joined, parts[0], parts[1]], 1)
    })
}

fn truncate_case(seed: u64) -> Result<GradReport> {
    let (_, _, _, m, x) = layer_fixture(seed, &[3, 5])?;
    check(&[x, Tensor::scalar(m.c())], seed, |_, v| {
        truncate(v[0], 2, v[1])
    })
}

fn word_embedding(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, _) = layer_fixture(seed, &[1, 1])?;
    let e = WordEmbedding::new(&mut store, "e", 5, 3, c, &mut r)?;
    let ids = [4, 0, 4, 2, 1, 3];
    check_layer(&store, &[e.table], vec![], seed, move |s, _| {
        e.forward(s, &ids, 2)
    })
}

fn positional_embedding(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[2, 3, 3])?;
    let p = PositionalEmbedding::new(&mut store, "p", 4, 3, c, &mut r)?;
    let mut params = vec![p.table];
    params.extend(p.gate.params());
    check_layer(&store, &params, vec![x], seed, |s, v| p.forward(s, v[0]))
}

fn patch_embed(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, _) = layer_fixture(seed, &[1, 1])?;
    let pe = PatchEmbed::new(&mut store, "pe", 2, 2, 3, c, &mut r)?;
    let images = Tensor::randn(&[1, 2, 4, 4], 0.5, &mut r);
    check_layer(&store, &pe.proj.params(), vec![images], seed, |s, v| {
        pe.forward(s, v[0])
    })
}

fn attention_case(seed: u64) -> Result<GradReport> {
    let (_, mut r, _, m, q) = layer_fixture(seed, &[1, 3, 4])?;
    let k = random_points(&m, &[1, 3, 4], 0.6, &mut r)?;
    let v = random_points(&m, &[1, 3, 4], 0.6, &mut r)?;
    let mask = causal_mask(3);
    check(&[q, k, v, Tensor::scalar(m.c())], seed, |_, x| {
        attention(x[0], x[1], x[2], Some(&mask), x[3], 1.5)
    })
}

fn multi_head_attention(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[1, 3, 4])?;
    let mha = MultiHeadAttention::new(&mut store, "mha", 4, 2, c, &mut r)?;
    check_layer(&store, &mha.params(), vec![x], seed, |s, v| {
        mha.forward(s, v[0], None)
    })
}

fn lorentz_mlr(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[3, 4])?;
    let head = LorentzMlr::new(&mut store, "mlr", 4, 3, c, &mut r)?;
    store.set_value(head.a, Tensor::randn(&[3], 0.3, &mut r))?;
    check_layer(&store, &head.params(), vec![x], seed, |s, v| {
        head.forward(s, v[0])
    })
}

fn pool(seed: u64) -> Result<GradReport> {
    let (_, _, _, m, x) = layer_fixture(seed, &[2, 3, 4])?;
    check(&[x, Tensor::scalar(m.c())], seed, |_, v| {
        centroid_pool(v[0], v[1])
    })
}

fn ring(n: usize) -> Result<Arc<hypkit::autodiff::SparseMatrix>> {
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).chain([(0, 2)]).collect();
    Ok(Arc::new(normalized_adjacency(n, &edges)?))
}

fn tangent_conv(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[5, 3])?;
    let conv = TangentConv::new(&mut store, "g", 3, 4, c, Curv::Fixed(-0.8), &mut r)?;
    let adj = ring(5)?;
    check_layer(&store, &conv.params(), vec![x], seed, |s, v| {
        conv.forward(s, v[0], &adj)
    })
}

fn centroid_conv(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[5, 3])?;
    let conv = CentroidConv::new(&mut store, "g", 3, 4, c, c, &mut r)?;
    let adj = ring(5)?;
    check_layer(&store, &conv.params(), vec![x], seed, |s, v| {
        conv.forward(s, v[0], &adj)
    })
}

fn transformer_block(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[1, 3, 4])?;
    let block = TransformerBlock::new(&mut store, "b", 4, 2, c, 0.0, &mut r)?;
    let mask = causal_mask(3);
    let params = [
        block.fc1.weight,
        block.attn.q.weight,
        block.res1.w_y,
        block.ln2.gamma,
    ];
    check_layer(&store, &params, vec![x], seed, |s, v| {
        block.forward(s, v[0], Some(&mask))
    })
}

fn lora_adapter(seed: u64) -> Result<GradReport> {
    let (mut store, mut r, c, _, x) = layer_fixture(seed, &[3, 5])?;
    let mut l = LorentzLinear::new(&mut store, "l", 5, 4, c, c, &mut r)?;
    l.attach_lora(&mut store, "l.lora", 2, 4.0, &mut r)?;
    let lora = l.lora.as_ref().expect("attached");
    // move B off zero so both factors carry gradient
    store.set_value(
        lora.b.weight,
        Tensor::randn(store.value(lora.b.weight).shape(), 0.3, &mut r),
    )?;
    let params = [lora.a.weight, lora.b.weight, l.weight];
    check_layer(&store, &params, vec![x], seed, |s, v| l.forward(s, v[0]))
}

fn fermi_dirac_bce(seed: u64) -> Result<GradReport> {
    let (k, x, y, mut r) = lorentz_pts(seed, 4, 3)?;
    let labels = Tensor::from_fn(&[4], |i| (i % 2) as f64);
    let rt = Tensor::from_vec(vec![r.random_range(1.0..3.0), r.random_range(0.5..1.5)]);
    check(&[x, y, Tensor::scalar(-k), rt], seed, |_, v| {
        let d = loss::row_dist_sq(v[0], v[1], v[2])?;
        let logits = loss::fermi_dirac_logits(d, v[3].narrow_last(0, 1)?, v[3].narrow_last(1, 2)?)?;
        loss::bce_with_logits(logits, &labels)
    })
}

fn cross_entropy(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let logits = Tensor::randn(&[4, 3], 2.0, &mut r);
    check(&[logits], seed, |_, v| {
        loss::cross_entropy(v[0], &[0, 2, 1, 2])
    })
}

fn contrastive(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = lorentz_pts(seed, 3, 3)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        loss::contrastive_loss(v[0], v[1], 0.5, v[2])
    })
}

fn entailment(seed: u64) -> Result<GradReport> {
    let (k, x, y, _) = lorentz_pts(seed, 4, 3)?;
    check(&[x, y, Tensor::scalar(-k)], seed, |_, v| {
        loss::entailment_loss(v[0], v[1], 0.1, v[2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_passes_at_two_seeds() {
        let rows = run(2).unwrap();
        let failed: Vec<_> = rows
            .iter()
            .filter(|r| !r.report.passed)
            .map(|r| (r.op, r.seed, r.report.max_rel_err))
            .collect();
        assert!(failed.is_empty(), "{failed:?}");
        assert!(to_csv(&rows).starts_with("op,seed,max_rel_err"));
    }
}
