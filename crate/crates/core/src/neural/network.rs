//! Fully-connected feature network `d → H₁ → H₂ → (M−1)` with ReLU on the
//! two hidden layers, a linear output layer and a constant feature appended,
//! so the feature vector has length `M`.

use crate::rng::Rng;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    /// Feature dimension `M`, counting the appended constant.
    pub features: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden1 == 0 || self.hidden2 == 0 || self.features == 0 {
            return Err(Error::InvalidArgument(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }

    fn shapes(&self) -> [(usize, usize); 3] {
        [
            (self.hidden1, self.input_dim),
            (self.hidden2, self.hidden1),
            (self.features - 1, self.hidden2),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|(o, i)| o * i + o).sum()
    }
}

/// One affine layer; `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    fn zeros(out: usize, inp: usize) -> Self {
        Self {
            weight: DMatrix::zeros(out, inp),
            bias: DVector::zeros(out),
        }
    }

    /// `W·X + b1ᵀ` for a column batch.
    fn affine(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weight * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    arch: Architecture,
    layers: [Layer; 3],
}

/// Intermediate activations of a batch forward pass, columns are samples.
pub(crate) struct ForwardCache {
    pub z1: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub z2: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    /// `M × N`, last row is the constant feature.
    pub phi: DMatrix<f64>,
}

fn relu(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| v.max(0.0))
}

impl NetworkWeights {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let [s1, s2, s3] = arch.shapes();
        Ok(Self {
            arch,
            layers: [Layer::zeros(s1.0, s1.1), Layer::zeros(s2.0, s2.1), Layer::zeros(s3.0, s3.1)],
        })
    }

    /// Fan-in scaled uniform initialization: every weight and bias of a layer
    /// with fan-in `n` is drawn from `U(−1/√n, 1/√n)`.
    pub fn random(arch: Architecture, rng: &mut Rng) -> Result<Self> {
        let mut w = Self::zeros(arch)?;
        for layer in &mut w.layers {
            let bound = 1.0 / (layer.weight.ncols() as f64).sqrt();
            for v in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(w)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn layers(&self) -> &[Layer; 3] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer; 3] {
        &mut self.layers
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Flattened as `W₁ (row-major), b₁, W₂, b₂, W₃, b₃`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.arch.param_count());
        for l in &self.layers {
            for r in 0..l.weight.nrows() {
                out.extend(l.weight.row(r).iter());
            }
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.param_count(),
                got: flat.len(),
            });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let (rows, cols) = l.weight.shape();
            for r in 0..rows {
                for c in 0..cols {
                    l.weight[(r, c)] = flat[k];
                    k += 1;
                }
            }
            for v in l.bias.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        Ok(())
    }

    pub(crate) fn forward_batch(&self, x: &DMatrix<f64>) -> ForwardCache {
        let [l1, l2, l3] = &self.layers;
        let z1 = l1.affine(x);
        let a1 = relu(&z1);
        let z2 = l2.affine(&a1);
        let a2 = relu(&z2);
        let out = l3.affine(&a2);
        let m = self.arch.features;
        let mut phi = DMatrix::from_element(m, x.ncols(), 1.0);
        phi.rows_mut(0, m - 1).copy_from(&out);
        ForwardCache { z1, a1, z2, a2, phi }
    }

    /// Back-propagates `∂L/∂φ` (rows for the `M−1` learned features) into a
    /// flat gradient laid out like [`NetworkWeights::to_flat`].
    pub(crate) fn backward(&self, x: &DMatrix<f64>, cache: &ForwardCache, d_out: &DMatrix<f64>) -> Vec<f64> {
        let [_, l2, l3] = &self.layers;
        let dw3 = d_out * cache.a2.transpose();
        let db3 = d_out.column_sum();
        let mut dz2 = l3.weight.tr_mul(d_out);
        dz2.zip_apply(&cache.z2, |g, z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
        let dw2 = &dz2 * cache.a1.transpose();
        let db2 = dz2.column_sum();
        let mut dz1 = l2.weight.tr_mul(&dz2);
        dz1.zip_apply(&cache.z1, |g, z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
        let dw1 = &dz1 * x.transpose();
        let db1 = dz1.column_sum();

        let mut out = Vec::with_capacity(self.arch.param_count());
        for (dw, db) in [(dw1, db1), (dw2, db2), (dw3, db3)] {
            for r in 0..dw.nrows() {
                out.extend(dw.row(r).iter());
            }
            out.extend(db.iter());
        }
        out
    }

    pub(crate) fn check_input(&self, len: usize) -> Result<()> {
        if len != self.arch.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim,
                got: len,
            });
        }
        Ok(())
    }
}

/// Column-batch view of a list of normalized inputs (`d × N`).
pub(crate) fn batch_matrix(dim: usize, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(DMatrix::from_fn(dim, xs.len(), |r, c| xs[c][r]))
}

/// `φ(x)`: the network output with the constant feature appended.
pub fn forward_features(w: &NetworkWeights, x: &[f64]) -> Result<Vec<f64>> {
    w.check_input(x.len())?;
    let xm = DMatrix::from_column_slice(x.len(), 1, x);
    Ok(w.forward_batch(&xm).phi.column(0).iter().copied().collect())
}
