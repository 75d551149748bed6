//! Feed-forward network: inputs -> logistic hidden layer -> softmax,
//! trained with mini-batch gradient descent on cross-entropy with
//! classical momentum. Inputs are standardized with parameters stored in
//! the model.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng_from, Dataset, Model};
use crate::error::{Error, Result};
use crate::features::{StandardizationParams, NUM_CATEGORIES};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 16,
            epochs: 500,
        }
    }
}

/// Network weights; `w1` is hidden x input, `w2` is output x hidden, both
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights<F: Real = f64> {
    pub(crate) input_width: usize,
    pub(crate) hidden: usize,
    pub(crate) w1: Vec<F>,
    pub(crate) b1: Vec<F>,
    pub(crate) w2: Vec<F>,
    pub(crate) b2: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<F: Real = f64> {
    pub(crate) config: MlpConfig,
    pub(crate) standardization: StandardizationParams<F>,
    pub(crate) weights: MlpWeights<F>,
}

impl<F: Real> Mlp<F> {
    pub fn input_width(&self) -> usize {
        self.weights.input_width
    }

    pub(crate) fn from_parts(
        config: MlpConfig,
        standardization: StandardizationParams<F>,
        weights: MlpWeights<F>,
    ) -> Self {
        Self {
            config,
            standardization,
            weights,
        }
    }

    pub(crate) fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub(crate) fn standardization(&self) -> &StandardizationParams<F> {
        &self.standardization
    }

    pub(crate) fn weights(&self) -> &MlpWeights<F> {
        &self.weights
    }

    /// Softmax class scores for one raw (unstandardized) feature row.
    pub fn scores(&self, row: &[F]) -> [F; NUM_CATEGORIES] {
        let x = self.standardization.apply_row(row);
        forward(&self.weights, &x).1
    }
}

#[inline]
fn logistic<F: Real>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

fn softmax<F: Real>(z: &mut [F; NUM_CATEGORIES]) {
    let max = z.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

struct Gradients<F: Real> {
    w1: Vec<F>,
    b1: Vec<F>,
    w2: Vec<F>,
    b2: Vec<F>,
}

impl<F: Real> Gradients<F> {
    fn zeros(d: usize, h: usize) -> Self {
        Self {
            w1: vec![F::zero(); h * d],
            b1: vec![F::zero(); h],
            w2: vec![F::zero(); NUM_CATEGORIES * h],
            b2: vec![F::zero(); NUM_CATEGORIES],
        }
    }

    fn clear(&mut self) {
        self.w1.fill(F::zero());
        self.b1.fill(F::zero());
        self.w2.fill(F::zero());
        self.b2.fill(F::zero());
    }
}

fn forward<F: Real>(w: &MlpWeights<F>, x: &[F]) -> (Vec<F>, [F; NUM_CATEGORIES]) {
    let (d, h) = (w.input_width, w.hidden);
    let mut hidden = vec![F::zero(); h];
    for (hh, act) in hidden.iter_mut().enumerate() {
        let mut z = w.b1[hh];
        for (j, &xv) in x.iter().enumerate() {
            z += w.w1[hh * d + j] * xv;
        }
        *act = logistic(z);
    }
    let mut out = [F::zero(); NUM_CATEGORIES];
    for (oo, out_z) in out.iter_mut().enumerate() {
        let mut z = w.b2[oo];
        for (hh, &hv) in hidden.iter().enumerate() {
            z += w.w2[oo * h + hh] * hv;
        }
        *out_z = z;
    }
    softmax(&mut out);
    (hidden, out)
}

/// Cross-entropy of one standardized sample under the current weights.
fn sample_loss<F: Real>(w: &MlpWeights<F>, x: &[F], label: usize) -> F {
    let (_, probs) = forward(w, x);
    -probs[label].max(F::min_positive_value()).ln()
}

/// Adds one sample's cross-entropy gradients into the accumulator.
fn accumulate_sample_gradients<F: Real>(
    w: &MlpWeights<F>,
    x: &[F],
    label: usize,
    g: &mut Gradients<F>,
) {
    let (d, h) = (w.input_width, w.hidden);
    let (hidden, mut out) = forward(w, x);

    // cross-entropy gradient at the softmax input
    out[label] -= F::one();
    for (oo, &dz) in out.iter().enumerate() {
        g.b2[oo] += dz;
        for (hh, &hv) in hidden.iter().enumerate() {
            g.w2[oo * h + hh] += dz * hv;
        }
    }
    for (hh, &hv) in hidden.iter().enumerate() {
        let mut back = F::zero();
        for (oo, &dz) in out.iter().enumerate() {
            back += w.w2[oo * h + hh] * dz;
        }
        let dz = back * hv * (F::one() - hv);
        g.b1[hh] += dz;
        for (j, &xv) in x.iter().enumerate() {
            g.w1[hh * d + j] += dz * xv;
        }
    }
}

/// Trains the network; deterministic in (data, config, seed).
pub fn train_mlp<F: Real>(data: &Dataset<F>, config: &MlpConfig, seed: u64) -> Result<Model<F>> {
    if data.distinct_classes() < 2 {
        return Err(Error::InsufficientData(format!(
            "MLP training needs at least 2 classes, got {}",
            data.distinct_classes()
        )));
    }
    if config.hidden == 0 || config.batch_size == 0 {
        return Err(Error::Validation(
            "hidden units and batch size must be positive".into(),
        ));
    }
    let standardization = StandardizationParams::fit_rows(data.rows())?;
    let x: Vec<Vec<F>> = data
        .rows()
        .iter()
        .map(|r| standardization.apply_row(r))
        .collect();
    let d = data.width();
    let h = config.hidden;

    let mut rng = rng_from(seed);
    // Xavier-uniform initialization
    let mut init = |fan_in: usize, fan_out: usize, len: usize| -> Vec<F> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        (0..len)
            .map(|_| F::from_f64((rng.random::<f64>() * 2.0 - 1.0) * limit))
            .collect()
    };
    let mut weights = MlpWeights {
        input_width: d,
        hidden: h,
        w1: init(d, h, h * d),
        b1: vec![F::zero(); h],
        w2: init(h, NUM_CATEGORIES, NUM_CATEGORIES * h),
        b2: vec![F::zero(); NUM_CATEGORIES],
    };

    let mut velocity = Gradients::<F>::zeros(d, h);
    let mut gradients = Gradients::<F>::zeros(d, h);
    let lr = F::from_f64(config.learning_rate);
    let mu = F::from_f64(config.momentum);

    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            gradients.clear();
            for &i in batch {
                accumulate_sample_gradients(&weights, &x[i], data.label(i), &mut gradients);
            }
            let scale = F::one() / F::from_usize(batch.len());
            let step = |w: &mut [F], v: &mut [F], g: &[F]| {
                for ((wv, vv), &gv) in w.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vv = mu * *vv - lr * gv * scale;
                    *wv += *vv;
                }
            };
            step(&mut weights.w1, &mut velocity.w1, &gradients.w1);
            step(&mut weights.b1, &mut velocity.b1, &gradients.b1);
            step(&mut weights.w2, &mut velocity.w2, &gradients.w2);
            step(&mut weights.b2, &mut velocity.b2, &gradients.b2);
        }
    }

    Ok(Model::Mlp(Mlp {
        config: config.clone(),
        standardization,
        weights,
    }))
}
