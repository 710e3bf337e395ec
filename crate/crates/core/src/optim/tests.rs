use super::*;
use crate::autodiff::Tape;
use crate::manifolds::{sample, Curvature};
use crate::nn::geometry::{self, ball};
use crate::nn::Session;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gradients of `sum d(x_i, target_i)^2` for a single manifold parameter.
fn dist_sq_grads(store: &ParamStore, id: ParamId, target: &Tensor) -> (f64, Vec<Option<Tensor>>) {
    let tape = Tape::new();
    let s = Session::new(&tape, store, true, 0);
    let p = store.get(id);
    let c = s
        .c(match p.kind {
            ParamKind::Lorentz(c) | ParamKind::Poincare(c) => c,
            _ => unreachable!(),
        })
        .unwrap();
    let t = s.constant(target.clone());
    let d2 = match p.kind {
        ParamKind::Lorentz(_) => geometry::dist_sq(s.param(id), t, c).unwrap(),
        _ => ball::dist(s.param(id), t, c).unwrap().square().unwrap(),
    };
    let loss = d2.sum().unwrap();
    tape.backward(loss).unwrap();
    (loss.value().item().unwrap(), s.grads())
}

fn lorentz_problem(k: f64, n: usize, seed: u64) -> (ParamStore, ParamId, Tensor, Lorentz) {
    let l = Lorentz::new(k).unwrap();
    let mut r = rng(seed);
    let x = sample::lorentz_points(&l, 1, n, 3.0, &mut r).unwrap();
    let target = sample::lorentz_points(&l, 1, n, 3.0, &mut r).unwrap();
    let mut store = ParamStore::new();
    let id = store
        .add("x", x, ParamKind::Lorentz(Curv::Fixed(k)))
        .unwrap();
    (store, id, target, l)
}

fn run(
    store: &mut ParamStore,
    id: ParamId,
    target: &Tensor,
    cfg: GroupConfig,
    steps: usize,
) -> Optimizer {
    let mut opt = Optimizer::hybrid(store, GroupConfig::sgd(0.1), cfg).unwrap();
    for _ in 0..steps {
        let (_, grads) = dist_sq_grads(store, id, target);
        opt.step(store, &grads).unwrap();
    }
    opt
}

#[test]
fn rsgd_reaches_the_target() {
    let (mut store, id, target, l) = lorentz_problem(-1.0, 8, 1);
    let start = l.dist(store.value(id), &target).unwrap().data()[0];
    assert!(start > 0.5);
    run(&mut store, id, &target, GroupConfig::sgd(0.1), 500);
    let d = l.dist(store.value(id), &target).unwrap().data()[0];
    assert!(d < 1e-4, "distance {d}");
    assert!(l.membership_error(store.value(id)) < 1e-9);
}

#[test]
fn radam_reaches_the_target() {
    let (mut store, id, target, l) = lorentz_problem(-1.0, 8, 2);
    run(&mut store, id, &target, GroupConfig::adam(0.1), 300);
    let d = l.dist(store.value(id), &target).unwrap().data()[0];
    assert!(d < 1e-4, "distance {d}");
    assert!(l.membership_error(store.value(id)) < 1e-9);
}

#[test]
fn poincare_rsgd_and_radam_reach_the_target() {
    for cfg in [GroupConfig::sgd(0.1), GroupConfig::adam(0.1)] {
        let b = Poincare::new(-0.7).unwrap();
        let mut r = rng(3);
        let x = sample::poincare_points(&b, 1, 5, 2.5, &mut r).unwrap();
        let target = sample::poincare_points(&b, 1, 5, 2.5, &mut r).unwrap();
        let mut store = ParamStore::new();
        let id = store
            .add("x", x, ParamKind::Poincare(Curv::Fixed(-0.7)))
            .unwrap();
        run(&mut store, id, &target, cfg, 500);
        let d = b.dist(store.value(id), &target).unwrap().data()[0];
        assert!(d < 1e-4, "{cfg:?}: distance {d}");
    }
}

#[test]
fn riemannian_grad_is_tangent_and_zero_for_zero_input() {
    let l = Lorentz::new(-1.7).unwrap();
    let mut r = rng(4);
    let x = sample::lorentz_points(&l, 6, 4, 3.0, &mut r).unwrap();
    let mut store = ParamStore::new();
    let id = store
        .add("x", x.clone(), ParamKind::Lorentz(Curv::Fixed(-1.7)))
        .unwrap();
    let g = Tensor::randn(&[6, 5], 3.0, &mut r);
    let u = riemannian_grad(&store, id, &g).unwrap();
    for (xr, ur) in x.rows().zip(u.rows()) {
        assert!(minkowski_dot(xr, ur).abs() < 1e-8);
    }
    assert_eq!(
        riemannian_grad(&store, id, &Tensor::zeros(&[6, 5]))
            .unwrap()
            .max_abs(),
        0.0
    );
    let w = store
        .add("w", Tensor::zeros(&[2]), ParamKind::Euclidean)
        .unwrap();
    assert!(riemannian_grad(&store, w, &Tensor::zeros(&[2])).is_err());
}

#[test]
fn poincare_riemannian_grad_divides_by_the_squared_conformal_factor() {
    let b = Poincare::new(-2.0).unwrap();
    let x = Tensor::new(&[1, 2], vec![0.3, -0.2]).unwrap();
    let mut store = ParamStore::new();
    let id = store
        .add("x", x, ParamKind::Poincare(Curv::Fixed(-2.0)))
        .unwrap();
    let g = Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap();
    let lam: f64 = 2.0 / (1.0 - 2.0 * 0.13);
    let u = riemannian_grad(&store, id, &g).unwrap();
    assert!(u.max_abs_diff(&g.scale(1.0 / (lam * lam))).unwrap() < 1e-15);
    assert_eq!(b.c(), 2.0);
}

#[test]
fn single_steps_descend_in_random_trials() {
    // lr grid: the largest lr at which every trial of a calibration batch descends
    let grid = [0.4, 0.2, 0.1, 0.05, 0.01];
    let trial = |lr: f64, seed: u64| {
        let (mut store, id, target, _) = lorentz_problem(-1.0, 4, seed);
        let (before, grads) = dist_sq_grads(&store, id, &target);
        let mut opt =
            Optimizer::hybrid(&store, GroupConfig::sgd(0.1), GroupConfig::sgd(lr)).unwrap();
        opt.step(&mut store, &grads).unwrap();
        dist_sq_grads(&store, id, &target).0 < before
    };
    let lr0 = *grid
        .iter()
        .find(|&&lr| (1000..1020).all(|s| trial(lr, s)))
        .unwrap();
    let wins = (0..100).filter(|&s| trial(lr0, s)).count();
    assert!(wins >= 95, "{wins}/100 at lr {lr0}");
}

#[test]
fn zero_gradient_leaves_parameters_in_place() {
    for cfg in [GroupConfig::sgd(0.1), GroupConfig::adam(0.1)] {
        let (mut store, id, _, _) = lorentz_problem(-1.0, 3, 5);
        let w = store
            .add("w", Tensor::from_vec(vec![1.0, -2.0]), ParamKind::Euclidean)
            .unwrap();
        let before = store.clone();
        let mut opt = Optimizer::hybrid(&store, cfg, cfg).unwrap();
        let grads = vec![Some(Tensor::zeros(&[1, 4])), Some(Tensor::zeros(&[2]))];
        for _ in 0..3 {
            opt.step(&mut store, &grads).unwrap();
        }
        assert_eq!(store.value(id), before.value(id));
        assert_eq!(store.value(w), before.value(w));
    }
}

#[test]
fn groups_use_their_own_learning_rates() {
    let mut store = ParamStore::new();
    let a = store
        .add("a", Tensor::from_vec(vec![1.0, 1.0]), ParamKind::Euclidean)
        .unwrap();
    let b = store
        .add("b", Tensor::from_vec(vec![1.0, 1.0]), ParamKind::Euclidean)
        .unwrap();
    let group = |name: &str, id, lr| ParamGroup {
        name: name.into(),
        kind: GroupKind::Euclidean,
        params: vec![id],
        config: GroupConfig::sgd(lr),
    };
    let mut opt = Optimizer::new(vec![group("a", a, 0.1), group("b", b, 0.01)]).unwrap();
    let g = Tensor::from_vec(vec![1.0, -2.0]);
    opt.step(&mut store, &[Some(g.clone()), Some(g.clone())])
        .unwrap();
    assert_eq!(store.value(a).data(), &[0.9, 1.2]);
    assert_eq!(store.value(b).data(), &[0.99, 1.02]);
    // a parameter without a gradient is untouched
    opt.step(&mut store, &[None, Some(g)]).unwrap();
    assert_eq!(store.value(a).data(), &[0.9, 1.2]);
    assert!(Optimizer::new(vec![group("a", a, 0.1), group("b", a, 0.1)]).is_err());
}

#[test]
fn hybrid_groups_split_by_kind_and_skip_frozen() {
    let mut store = ParamStore::new();
    let curv = store
        .curvature("k", Curvature::learnable(-1.0).unwrap())
        .unwrap();
    let e = store
        .add("e", Tensor::zeros(&[2]), ParamKind::Euclidean)
        .unwrap();
    let f = store
        .add("f", Tensor::zeros(&[2]), ParamKind::Euclidean)
        .unwrap();
    let l = Lorentz::new(-1.0).unwrap();
    let m = store
        .add("m", l.origin(2), ParamKind::Lorentz(curv))
        .unwrap();
    store.set_frozen(f, true);
    let opt = Optimizer::hybrid(&store, GroupConfig::sgd(0.1), GroupConfig::adam(0.01)).unwrap();
    let Curv::Learned(k) = curv else {
        unreachable!()
    };
    assert_eq!(opt.groups[0].params, vec![k, e]);
    assert_eq!(opt.groups[1].params, vec![m]);
}

#[test]
fn transported_momentum_stays_tangent() {
    let l = Lorentz::new(-1.0).unwrap();
    let mut r = rng(6);
    let x = sample::lorentz_points(&l, 4, 3, 2.0, &mut r).unwrap();
    let target = sample::lorentz_points(&l, 4, 3, 2.0, &mut r).unwrap();
    let mut store = ParamStore::new();
    let id = store
        .add("x", x, ParamKind::Lorentz(Curv::Fixed(-1.0)))
        .unwrap();
    let opt = run(&mut store, id, &target, GroupConfig::adam(0.05), 20);
    let st = opt.state(id).unwrap();
    assert_eq!(st.step, 20);
    assert!(st.v.data()[0] >= 0.0);
    for (xr, mr) in store.value(id).rows().zip(st.m.rows()) {
        assert!(minkowski_dot(xr, mr).abs() < 1e-8);
    }
}

#[test]
fn curvature_steps_keep_points_on_the_new_manifold() {
    let mut store = ParamStore::new();
    let curv = store
        .curvature("k", Curvature::learnable(-1.0).unwrap())
        .unwrap();
    let Curv::Learned(k) = curv else {
        unreachable!()
    };
    let l = Lorentz::new(-1.0).unwrap();
    let table = sample::lorentz_points(&l, 10, 4, 4.0, &mut rng(7)).unwrap();
    let t = store.add("table", table, ParamKind::Lorentz(curv)).unwrap();
    let ball = store
        .add(
            "ball",
            Tensor::new(&[1, 2], vec![0.5, 0.3]).unwrap(),
            ParamKind::Poincare(curv),
        )
        .unwrap();
    let mut r = rng(8);
    for _ in 0..10 {
        let g = Tensor::scalar(r.random_range(-3.0..3.0));
        let mut grads = vec![None; store.len()];
        grads[k.index()] = Some(g);
        curvature_step(&mut store, &[k], &grads, 0.1).unwrap();
        let kk = store.k(curv);
        assert!(kk < 0.0);
        assert!(Lorentz::new(kk).unwrap().membership_error(store.value(t)) < 1e-9);
        Poincare::new(kk)
            .unwrap()
            .check_point("test", store.value(ball))
            .unwrap();
    }

    store.set_frozen(k, true);
    let raw = store.value(k).clone();
    let mut grads = vec![None; store.len()];
    grads[k.index()] = Some(Tensor::scalar(1.0));
    curvature_step(&mut store, &[k], &grads, 0.1).unwrap();
    assert_eq!(store.value(k), &raw);
    assert!(curvature_step(&mut store, &[t], &grads, 0.1).is_err());
}

#[test]
fn optimizer_step_on_a_learned_curvature_reprojects_owned_points() {
    let mut store = ParamStore::new();
    let curv = store
        .curvature("k", Curvature::learnable(-1.0).unwrap())
        .unwrap();
    let Curv::Learned(k) = curv else {
        unreachable!()
    };
    let l = Lorentz::new(-1.0).unwrap();
    let x = sample::lorentz_points(&l, 5, 3, 3.0, &mut rng(9)).unwrap();
    let id = store.add("x", x, ParamKind::Lorentz(curv)).unwrap();
    let target = sample::lorentz_points(&l, 5, 3, 3.0, &mut rng(10)).unwrap();
    let mut opt =
        Optimizer::hybrid(&store, GroupConfig::adam(0.05), GroupConfig::sgd(0.05)).unwrap();
    for _ in 0..20 {
        let (_, grads) = dist_sq_grads(&store, id, &target);
        assert!(grads[k.index()].is_some());
        opt.step(&mut store, &grads).unwrap();
        assert!(
            store
                .lorentz(curv)
                .unwrap()
                .membership_error(store.value(id))
                < 1e-9
        );
    }
    assert_ne!(store.k(curv), -1.0);
}

#[test]
fn non_finite_updates_write_nothing() {
    let mut store = ParamStore::new();
    let a = store
        .add("a", Tensor::from_vec(vec![1.0]), ParamKind::Euclidean)
        .unwrap();
    let b = store
        .add("b", Tensor::from_vec(vec![1.0]), ParamKind::Euclidean)
        .unwrap();
    let mut opt = Optimizer::hybrid(&store, GroupConfig::sgd(0.1), GroupConfig::sgd(0.1)).unwrap();
    let grads = [
        Some(Tensor::from_vec(vec![1.0])),
        Some(Tensor::from_vec(vec![f64::INFINITY])),
    ];
    assert!(matches!(
        opt.step(&mut store, &grads),
        Err(Error::NonFinite { .. })
    ));
    assert_eq!(store.value(a).data(), &[1.0]);
    assert_eq!(store.value(b).data(), &[1.0]);
}

#[test]
fn manifold_weight_decay_shrinks_toward_the_origin() {
    let (mut store, id, _, l) = lorentz_problem(-1.0, 3, 11);
    let o = l.origin(3);
    let before = l.dist(store.value(id), &o).unwrap().data()[0];
    let mut opt = Optimizer::hybrid(
        &store,
        GroupConfig::sgd(0.1),
        GroupConfig::sgd(0.1).with_weight_decay(0.1),
    )
    .unwrap();
    opt.step(&mut store, &[Some(Tensor::zeros(&[1, 4]))])
        .unwrap();
    let after = l.dist(store.value(id), &o).unwrap().data()[0];
    assert!((after - 0.9 * before).abs() < 1e-10, "{before} -> {after}");
    assert!(l.membership_error(store.value(id)) < 1e-9);
}

#[test]
fn identical_seeds_give_identical_trajectories() {
    let a = {
        let (mut store, id, target, _) = lorentz_problem(-1.0, 4, 12);
        run(&mut store, id, &target, GroupConfig::adam(0.1), 30);
        store.value(id).clone()
    };
    let (mut store, id, target, _) = lorentz_problem(-1.0, 4, 12);
    run(&mut store, id, &target, GroupConfig::adam(0.1), 30);
    assert_eq!(store.value(id), &a);
}

#[test]
fn invalid_configs_are_rejected() {
    let store = ParamStore::new();
    assert!(Optimizer::hybrid(&store, GroupConfig::sgd(0.0), GroupConfig::sgd(0.1)).is_err());
    assert!(Optimizer::hybrid(
        &store,
        GroupConfig::sgd(0.1),
        GroupConfig::sgd(0.1).with_weight_decay(-1.0)
    )
    .is_err());
    assert_eq!("adam".parse::<Method>().unwrap(), Method::Adam);
    assert!("lbfgs".parse::<Method>().is_err());
}
