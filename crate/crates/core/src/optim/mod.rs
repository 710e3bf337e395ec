//! Riemannian optimizers over a [`ParamStore`].
//!
//! Parameters split into a Euclidean group (weights, biases, raw curvatures)
//! and a manifold group (tables of Lorentz or Poincare points). Each group has
//! its own learning rate, weight decay and update rule.

use crate::error::{Error, Result};
use crate::manifolds::{minkowski_dot, Lorentz, Poincare};
use crate::nn::{Curv, ParamId, ParamKind, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sgd,
    Adam,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Method::Sgd),
            "adam" => Ok(Method::Adam),
            other => Err(Error::invalid(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub method: Method,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl GroupConfig {
    pub fn sgd(lr: f64) -> Self {
        Self {
            lr,
            weight_decay: 0.0,
            method: Method::Sgd,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self {
            method: Method::Adam,
            ..Self::sgd(lr)
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) || self.weight_decay >= 1.0 {
            return Err(Error::invalid(format!(
                "learning rate {} must be positive and weight decay {} in [0, 1)",
                self.lr, self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Euclidean,
    Manifold,
}

#[derive(Clone, Debug)]
pub struct ParamGroup {
    pub name: String,
    pub kind: GroupKind,
    pub params: Vec<ParamId>,
    pub config: GroupConfig,
}

/// Adam moments. For manifold parameters `m` is a tangent vector at the
/// current point and `v` holds one scalar per point (row): the squared
/// Riemannian norm of that point's gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Tensor,
    pub v: Tensor,
}

/// Manifold a parameter lives on, with its current curvature.
enum Geometry {
    Lorentz(Lorentz),
    Poincare(Poincare),
}

impl Geometry {
    fn of(store: &ParamStore, kind: ParamKind) -> Result<Option<Self>> {
        Ok(match kind {
            ParamKind::Lorentz(c) => Some(Geometry::Lorentz(store.lorentz(c)?)),
            ParamKind::Poincare(c) => Some(Geometry::Poincare(store.poincare(c)?)),
            _ => None,
        })
    }

    fn rgrad(&self, x: &Tensor, g: &Tensor) -> Result<Tensor> {
        match self {
            Geometry::Lorentz(l) => l.egrad2rgrad(x, g),
            Geometry::Poincare(b) => b.egrad2rgrad(x, g),
        }
    }

    /// Riemannian squared norm of each row of `u`, a tangent at the rows of `x`.
    fn sq_norms(&self, x: &Tensor, u: &Tensor) -> Vec<f64> {
        match self {
            Geometry::Lorentz(_) => u.rows().map(|r| minkowski_dot(r, r).max(0.0)).collect(),
            Geometry::Poincare(b) => x
                .rows()
                .zip(u.rows())
                .map(|(xr, ur)| {
                    let lam = 2.0 / (1.0 - b.c() * xr.iter().map(|v| v * v).sum::<f64>());
                    lam * lam * ur.iter().map(|v| v * v).sum::<f64>()
                })
                .collect(),
        }
    }

    /// `exp_x(v)` followed by a re-projection that removes rounding drift.
    fn retract(&self, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        if v.max_abs() == 0.0 {
            return Ok(x.clone());
        }
        match self {
            Geometry::Lorentz(l) => l.lift(&Lorentz::space(&l.expmap(x, v)?)?),
            Geometry::Poincare(b) => Ok(b.project(&b.expmap(x, v)?)),
        }
    }

    fn transport(&self, x: &Tensor, y: &Tensor, v: &Tensor) -> Result<Tensor> {
        match self {
            Geometry::Lorentz(l) => l.ptransp(x, y, v),
            Geometry::Poincare(b) => b.ptransp(x, y, v),
        }
    }

    /// Geodesic shrink towards the origin: `exp_o((1 - wd) log_o(x))`.
    fn shrink(&self, x: &Tensor, wd: f64) -> Result<Tensor> {
        match self {
            Geometry::Lorentz(l) => l.expmap0(&l.logmap0(x)?.scale(1.0 - wd)),
            Geometry::Poincare(b) => b.expmap0(&b.logmap0(x)?.scale(1.0 - wd)),
        }
    }
}

/// Riemannian gradient of a manifold parameter; errors on Euclidean kinds.
pub fn riemannian_grad(store: &ParamStore, id: ParamId, grad: &Tensor) -> Result<Tensor> {
    let p = store.get(id);
    let geo = Geometry::of(store, p.kind)?
        .ok_or_else(|| Error::invalid(format!("{} is not a manifold parameter", p.name)))?;
    geo.rgrad(&p.value, grad)
}

/// Moves points owned by a curvature from `old_k` onto the store's current curvature.
///
/// Lorentz points keep their space coordinates and get a new time coordinate;
/// ball points are rescaled by `sqrt(c_old / c_new)`.
pub fn reproject(store: &mut ParamStore, curv: ParamId, old_k: f64) -> Result<()> {
    let new_k = store.k(Curv::Learned(curv));
    let owned: Vec<(ParamId, ParamKind)> = store
        .iter()
        .filter(|(_, p)| matches!(p.kind, ParamKind::Lorentz(Curv::Learned(c)) | ParamKind::Poincare(Curv::Learned(c)) if c == curv))
        .map(|(id, p)| (id, p.kind))
        .collect();
    for (id, kind) in owned {
        let x = store.value(id).clone();
        let y = match kind {
            ParamKind::Lorentz(_) => Lorentz::new(new_k)?.lift(&Lorentz::space(&x)?)?,
            _ => Poincare::new(new_k)?.project(&x.scale((old_k / new_k).sqrt())),
        };
        store.set_value(id, y)?;
    }
    Ok(())
}

/// Plain gradient step on raw curvatures followed by re-projection of every
/// point that lives at those curvatures. Frozen curvatures are skipped.
pub fn curvature_step(
    store: &mut ParamStore,
    curvatures: &[ParamId],
    grads: &[Option<Tensor>],
    lr: f64,
) -> Result<()> {
    for &id in curvatures {
        if store.get(id).kind != ParamKind::Curvature {
            return Err(Error::invalid(format!(
                "{} is not a curvature",
                store.get(id).name
            )));
        }
        if store.get(id).frozen {
            continue;
        }
        let Some(g) = grads.get(id.index()).and_then(|g| g.as_ref()) else {
            continue;
        };
        let old_k = store.k(Curv::Learned(id));
        let raw = store.value(id).sub(&g.scale(lr))?;
        if !raw.all_finite() {
            return Err(Error::NonFinite {
                op: "curvature_step",
            });
        }
        store.set_value(id, raw)?;
        reproject(store, id, old_k)?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    pub groups: Vec<ParamGroup>,
    state: Vec<Option<AdamState>>,
}

impl Optimizer {
    pub fn new(groups: Vec<ParamGroup>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for g in &groups {
            g.config.validate()?;
            for id in &g.params {
                if !seen.insert(*id) {
                    return Err(Error::invalid(format!(
                        "parameter {} is in two groups",
                        id.index()
                    )));
                }
            }
        }
        Ok(Self {
            groups,
            state: Vec::new(),
        })
    }

    /// Two groups: Euclidean parameters and raw curvatures, and manifold points.
    /// Frozen parameters are left out.
    pub fn hybrid(
        store: &ParamStore,
        euclidean: GroupConfig,
        manifold: GroupConfig,
    ) -> Result<Self> {
        let pick = |want: GroupKind| -> Vec<ParamId> {
            store
                .iter()
                .filter(|(_, p)| {
                    !p.frozen && (p.kind.is_manifold() == (want == GroupKind::Manifold))
                })
                .map(|(id, _)| id)
                .collect()
        };
        Self::new(vec![
            ParamGroup {
                name: "euclidean".into(),
                kind: GroupKind::Euclidean,
                params: pick(GroupKind::Euclidean),
                config: euclidean,
            },
            ParamGroup {
                name: "manifold".into(),
                kind: GroupKind::Manifold,
                params: pick(GroupKind::Manifold),
                config: manifold,
            },
        ])
    }

    pub fn state(&self, id: ParamId) -> Option<&AdamState> {
        self.state.get(id.index()).and_then(|s| s.as_ref())
    }

    pub fn states(&self) -> impl Iterator<Item = (ParamId, &AdamState)> {
        self.state
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|s| (ParamId(i), s)))
    }

    pub fn set_state(&mut self, id: ParamId, state: AdamState) {
        if self.state.len() <= id.index() {
            self.state.resize(id.index() + 1, None);
        }
        self.state[id.index()] = Some(state);
    }

    /// Applies one update from `grads` (aligned with the store). Every new
    /// value is computed before any is written, so a non-finite update
    /// leaves the store untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Tensor>]) -> Result<()> {
        let mut updates: Vec<(ParamId, Tensor, Option<AdamState>)> = Vec::new();
        let mut curvature_moves = Vec::new();
        for group in &self.groups {
            for &id in &group.params {
                let p = store.get(id);
                if p.frozen {
                    continue;
                }
                let Some(g) = grads.get(id.index()).and_then(|g| g.as_ref()) else {
                    continue;
                };
                if g.shape() != p.value.shape() {
                    return Err(Error::shape(
                        "optimizer",
                        format!("gradient {:?} for {}", g.shape(), p.name),
                    ));
                }
                let prev = self.state.get(id.index()).and_then(|s| s.clone());
                let (value, state) = match Geometry::of(store, p.kind)? {
                    None => euclidean_update(&group.config, &p.value, g, prev)?,
                    Some(geo) => manifold_update(&group.config, &geo, &p.value, g, prev)?,
                };
                if !value.all_finite() {
                    return Err(Error::NonFinite {
                        op: "optimizer_step",
                    });
                }
                if p.kind == ParamKind::Curvature {
                    curvature_moves.push((id, store.k(Curv::Learned(id))));
                }
                updates.push((id, value, state));
            }
        }
        for (id, value, state) in updates {
            store.set_value(id, value)?;
            if let Some(s) = state {
                self.set_state(id, s);
            }
        }
        for (id, old_k) in curvature_moves {
            reproject(store, id, old_k)?;
        }
        Ok(())
    }
}

fn adam_moments(prev: Option<AdamState>, shape_m: &[usize], shape_v: &[usize]) -> AdamState {
    let mut st = prev.unwrap_or_else(|| AdamState {
        step: 0,
        m: Tensor::zeros(shape_m),
        v: Tensor::zeros(shape_v),
    });
    st.step += 1;
    st
}

fn euclidean_update(
    cfg: &GroupConfig,
    x: &Tensor,
    g: &Tensor,
    prev: Option<AdamState>,
) -> Result<(Tensor, Option<AdamState>)> {
    let g = if cfg.weight_decay > 0.0 {
        g.add(&x.scale(cfg.weight_decay))?
    } else {
        g.clone()
    };
    match cfg.method {
        Method::Sgd => Ok((x.sub(&g.scale(cfg.lr))?, None)),
        Method::Adam => {
            let mut st = adam_moments(prev, x.shape(), x.shape());
            st.m =
                st.m.zip_map(&g, |m, g| cfg.beta1 * m + (1.0 - cfg.beta1) * g)?;
            st.v =
                st.v.zip_map(&g, |v, g| cfg.beta2 * v + (1.0 - cfg.beta2) * g * g)?;
            let bc1 = 1.0 - cfg.beta1.powi(st.step as i32);
            let bc2 = 1.0 - cfg.beta2.powi(st.step as i32);
            let step = st.m.zip_map(&st.v, |m, v| {
                cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps)
            })?;
            Ok((x.sub(&step)?, Some(st)))
        }
    }
}

fn manifold_update(
    cfg: &GroupConfig,
    geo: &Geometry,
    x: &Tensor,
    g: &Tensor,
    prev: Option<AdamState>,
) -> Result<(Tensor, Option<AdamState>)> {
    let x = if cfg.weight_decay > 0.0 {
        geo.shrink(x, cfg.weight_decay)?
    } else {
        x.clone()
    };
    let u = geo.rgrad(&x, g)?;
    match cfg.method {
        Method::Sgd => Ok((geo.retract(&x, &u.scale(-cfg.lr))?, None)),
        Method::Adam => {
            let rows = x.num_rows();
            let mut st = adam_moments(prev, x.shape(), &[rows]);
            st.m =
                st.m.zip_map(&u, |m, u| cfg.beta1 * m + (1.0 - cfg.beta1) * u)?;
            let sq = Tensor::from_vec(geo.sq_norms(&x, &u));
            st.v =
                st.v.zip_map(&sq, |v, s| cfg.beta2 * v + (1.0 - cfg.beta2) * s)?;
            let bc1 = 1.0 - cfg.beta1.powi(st.step as i32);
            let bc2 = 1.0 - cfg.beta2.powi(st.step as i32);
            let width = x.numel() / rows;
            let step = Tensor::from_fn(x.shape(), |i| {
                let denom = (st.v.data()[i / width] / bc2).sqrt() + cfg.eps;
                -cfg.lr * st.m.data()[i] / (bc1 * denom)
            });
            let y = geo.retract(&x, &step)?;
            st.m = geo.transport(&x, &y, &st.m)?;
            Ok((y, Some(st)))
        }
    }
}

#[cfg(test)]
mod tests;
