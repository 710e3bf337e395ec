use super::{to_lorentz, to_poincare, Curvature, Lorentz, Poincare};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    Lorentz,
    Poincare,
}

/// A validated batch of points of one model at one curvature.
#[derive(Clone, Debug)]
pub struct ManifoldPoint {
    model: Model,
    curvature: Curvature,
    coords: Tensor,
}

impl ManifoldPoint {
    pub fn lorentz(coords: Tensor, curvature: Curvature) -> Result<Self> {
        Lorentz::from_curvature(&curvature).check_point("ManifoldPoint", &coords)?;
        Ok(Self {
            model: Model::Lorentz,
            curvature,
            coords,
        })
    }

    pub fn poincare(coords: Tensor, curvature: Curvature) -> Result<Self> {
        Poincare::from_curvature(&curvature).check_point("ManifoldPoint", &coords)?;
        Ok(Self {
            model: Model::Poincare,
            curvature,
            coords,
        })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn coords(&self) -> &Tensor {
        &self.coords
    }

    pub fn into_coords(self) -> Tensor {
        self.coords
    }

    /// Intrinsic manifold dimension `n`.
    pub fn dim(&self) -> usize {
        match self.model {
            Model::Lorentz => self.coords.last_dim() - 1,
            Model::Poincare => self.coords.last_dim(),
        }
    }

    pub fn to_poincare(&self) -> Result<Self> {
        match self.model {
            Model::Poincare => Ok(self.clone()),
            Model::Lorentz => Ok(Self {
                model: Model::Poincare,
                curvature: self.curvature,
                coords: to_poincare(&Lorentz::from_curvature(&self.curvature), &self.coords)?,
            }),
        }
    }

    pub fn to_lorentz(&self) -> Result<Self> {
        match self.model {
            Model::Lorentz => Ok(self.clone()),
            Model::Poincare => Ok(Self {
                model: Model::Lorentz,
                curvature: self.curvature,
                coords: to_lorentz(&Poincare::from_curvature(&self.curvature), &self.coords)?,
            }),
        }
    }

    pub fn dist(&self, other: &ManifoldPoint) -> Result<Tensor> {
        self.same_space(other)?;
        match self.model {
            Model::Lorentz => {
                Lorentz::from_curvature(&self.curvature).dist(&self.coords, &other.coords)
            }
            Model::Poincare => {
                Poincare::from_curvature(&self.curvature).dist(&self.coords, &other.coords)
            }
        }
    }

    pub fn expmap(&self, v: &TangentVector) -> Result<ManifoldPoint> {
        let coords = match self.model {
            Model::Lorentz => {
                Lorentz::from_curvature(&self.curvature).expmap(&self.coords, &v.vec)?
            }
            Model::Poincare => {
                Poincare::from_curvature(&self.curvature).expmap(&self.coords, &v.vec)?
            }
        };
        Ok(Self { coords, ..*self })
    }

    pub fn logmap(&self, other: &ManifoldPoint) -> Result<TangentVector> {
        self.same_space(other)?;
        let vec = match self.model {
            Model::Lorentz => {
                Lorentz::from_curvature(&self.curvature).logmap(&self.coords, &other.coords)?
            }
            Model::Poincare => {
                Poincare::from_curvature(&self.curvature).logmap(&self.coords, &other.coords)?
            }
        };
        Ok(TangentVector {
            base: self.clone(),
            vec,
        })
    }

    fn same_space(&self, other: &ManifoldPoint) -> Result<()> {
        if self.model != other.model || self.curvature.value() != other.curvature.value() {
            return Err(Error::invalid(format!(
                "points live in different spaces: {:?}@{} vs {:?}@{}",
                self.model,
                self.curvature.value(),
                other.model,
                other.curvature.value()
            )));
        }
        Ok(())
    }
}

/// Tolerance on `|<base, v>_L|` for Lorentz tangent vectors.
pub const TANGENT_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct TangentVector {
    base: ManifoldPoint,
    vec: Tensor,
}

impl TangentVector {
    pub fn new(base: ManifoldPoint, vec: Tensor) -> Result<Self> {
        if vec.shape() != base.coords.shape() {
            return Err(Error::shape(
                "TangentVector",
                format!("{:?} vs base {:?}", vec.shape(), base.coords.shape()),
            ));
        }
        if base.model == Model::Lorentz {
            let worst = Lorentz::inner(&base.coords, &vec)?.max_abs();
            if worst > TANGENT_TOL {
                return Err(Error::invalid(format!(
                    "vector is not tangent: |<x,v>_L| = {worst:e}"
                )));
            }
        }
        Ok(Self { base, vec })
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn vec(&self) -> &Tensor {
        &self.vec
    }
}
