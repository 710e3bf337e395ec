use std::sync::Arc;

use rand::Rng;

use super::geometry::{self, expmap0, logmap0};
use super::linear::{Activation, LorentzLinear};
use super::params::{Curv, ParamId, ParamStore, Session};
use crate::autodiff::{SparseMatrix, Var};
use crate::error::{Error, Result};

/// `D^{-1/2} (A + I) D^{-1/2}` for an undirected edge list over `n` nodes.
pub fn normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Result<SparseMatrix> {
    let mut degree = vec![1.0_f64; n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::invalid(format!(
                "edge ({u}, {v}) out of range for {n} nodes"
            )));
        }
        if u != v {
            degree[u] += 1.0;
            degree[v] += 1.0;
        }
    }
    let mut triplets = Vec::with_capacity(n + 2 * edges.len());
    for (i, d) in degree.iter().enumerate() {
        triplets.push((i, i, 1.0 / d));
    }
    for &(u, v) in edges.iter().filter(|(u, v)| u != v) {
        let w = 1.0 / (degree[u] * degree[v]).sqrt();
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

fn check_nodes(op: &'static str, x: &Var<'_>, adj: &SparseMatrix) -> Result<()> {
    let shape = x.shape();
    if shape.len() != 2 || shape[0] != adj.rows() || adj.rows() != adj.cols() {
        return Err(Error::shape(
            op,
            format!(
                "{shape:?} features for a {}x{} graph",
                adj.rows(),
                adj.cols()
            ),
        ));
    }
    Ok(())
}

/// Graph convolution that aggregates in the tangent space at the origin.
///
/// Node features are transformed at `curv_in`, mapped to the origin's
/// tangent space, averaged with the adjacency weights, activated and
/// mapped back at `curv_out`.
#[derive(Clone, Debug)]
pub struct TangentConv {
    pub linear: LorentzLinear,
    pub activation: Activation,
    pub curv_in: Curv,
    pub curv_out: Curv,
}

impl TangentConv {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        curv_in: Curv,
        curv_out: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            linear: LorentzLinear::new(
                store,
                &format!("{name}.linear"),
                d_in,
                d_out,
                curv_in,
                curv_in,
                rng,
            )?,
            activation: Activation::Identity,
            curv_in,
            curv_out,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn forward<'t>(
        &self,
        s: &Session<'t>,
        x: Var<'t>,
        adj: &Arc<SparseMatrix>,
    ) -> Result<Var<'t>> {
        check_nodes("gnn_conv_tangent", &x, adj)?;
        let h = self.linear.forward(s, x)?;
        let u = logmap0(h, s.c(self.curv_in)?)?.spmm(adj)?;
        expmap0(self.activation.apply(u)?, s.c(self.curv_out)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.linear.params()
    }
}

/// Graph convolution that aggregates by weighted Lorentzian centroid.
#[derive(Clone, Debug)]
pub struct CentroidConv {
    pub linear: LorentzLinear,
    pub curv: Curv,
}

impl CentroidConv {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        curv_in: Curv,
        curv_out: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            linear: LorentzLinear::new(
                store,
                &format!("{name}.linear"),
                d_in,
                d_out,
                curv_in,
                curv_out,
                rng,
            )?,
            curv: curv_out,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.linear.activation = activation;
        self
    }

    pub fn forward<'t>(
        &self,
        s: &Session<'t>,
        x: Var<'t>,
        adj: &Arc<SparseMatrix>,
    ) -> Result<Var<'t>> {
        check_nodes("gnn_conv_centroid", &x, adj)?;
        let h = self.linear.forward(s, x)?;
        geometry::project(h.spmm(adj)?, s.c(self.curv)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.linear.params()
    }
}
