//! Full-batch gradient descent for logistic regression with the `ρ` activation,
//! on shares and in plaintext.
//!
//! Each secure iteration runs three phases, each a barrier:
//! 1. `z = trunc(X w)` with one matrix multiplication,
//! 2. `o = ρ(z)` as one batched activation,
//! 3. `Δw = trunc(Σ_d (t_d - o_d) x_d)` with one batched multiplication, then
//!    `w += trunc(η Δw)` with `η` applied as an encoded public constant.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::activation::{activation_bit_mults, activation_requests, batch_activate, rho, rho_fixed, ACTIVATION_RING_MULTS};
use crate::engine::Session;
use crate::error::{Error, Result};
use crate::fixedpoint::{decode, encode, truncate_exact, FixedPointParams};
use crate::randomness::Request;
use crate::ring::Ring;
use crate::scalar::{Real, RingWord};
use crate::sharing::ShareMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingConfig {
    pub eta: f64,
    pub iterations: usize,
    pub params: FixedPointParams,
}

impl TrainingConfig {
    pub fn new(eta: f64, iterations: usize, params: FixedPointParams) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::argument(format!("learning rate {eta} must be finite and non-negative")));
        }
        params.validate()?;
        Ok(TrainingConfig {
            eta,
            iterations,
            params,
        })
    }

    /// The learning rate as the ring constant the protocol multiplies by.
    pub fn eta_encoded<W: RingWord>(&self) -> Result<W> {
        encode::<W, f64>(self.eta, &self.params)
    }
}

/// Training examples with a leading all-ones column; labels in `{0, 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    rows: usize,
    cols: usize,
    x: Vec<F>,
    t: Vec<F>,
}

impl<F: Real> Dataset<F> {
    /// Builds a dataset from feature rows, prepending the dummy feature.
    pub fn new(features: &[Vec<F>], labels: &[F]) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} labels",
                features.len(),
                labels.len()
            )));
        }
        let m = features.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(features.len() * (m + 1));
        for (d, row) in features.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!("row {d} has {} features, expected {m}", row.len())));
            }
            x.push(F::one());
            x.extend_from_slice(row);
        }
        Dataset::from_augmented(features.len(), m + 1, x, labels.to_vec())
    }

    /// Wraps a row-major matrix whose first column is already all ones.
    pub fn from_augmented(rows: usize, cols: usize, x: Vec<F>, t: Vec<F>) -> Result<Self> {
        if x.len() != rows * cols || t.len() != rows || cols == 0 {
            return Err(Error::Dimension(format!(
                "{} values and {} labels for {rows}x{cols}",
                x.len(),
                t.len()
            )));
        }
        if (0..rows).any(|d| x[d * cols] != F::one()) {
            return Err(Error::argument("first column must be the all-ones dummy feature"));
        }
        if t.iter().any(|&v| v != F::zero() && v != F::one()) {
            return Err(Error::argument("labels must be 0 or 1"));
        }
        Ok(Dataset { rows, cols, x, t })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Columns including the dummy feature (`m + 1`).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn x(&self) -> &[F] {
        &self.x
    }

    pub fn t(&self) -> &[F] {
        &self.t
    }

    pub fn row(&self, d: usize) -> &[F] {
        &self.x[d * self.cols..(d + 1) * self.cols]
    }

    /// Encodes features and labels into the ring.
    pub fn encode<W: RingWord>(&self, p: &FixedPointParams) -> Result<(Vec<W>, Vec<W>)> {
        let x = self.x.iter().map(|&v| encode::<W, F>(v, p)).collect::<Result<_>>()?;
        let t = self.t.iter().map(|&v| encode::<W, F>(v, p)).collect::<Result<_>>()?;
        Ok((x, t))
    }
}

/// Linearly separable data with a margin: features uniform in `[-1, 1]`,
/// label from the sign of a random hyperplane, points within `margin` of it dropped.
pub fn synthetic_dataset(rows: usize, features: usize, margin: f64, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..=features).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut xs = Vec::with_capacity(rows);
    let mut ts = Vec::with_capacity(rows);
    while xs.len() < rows {
        let row: Vec<f64> = (0..features).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = w[0] + row.iter().zip(&w[1..]).map(|(x, w)| x * w).sum::<f64>();
        if s.abs() < margin {
            continue;
        }
        // quantize to the default grid so every encoding is exact
        xs.push(row.iter().map(|v| (v * 4096.0).round() / 4096.0).collect());
        ts.push(if s > 0.0 { 1.0 } else { 0.0 });
    }
    Dataset::new(&xs, &ts).expect("consistent shapes")
}

/// Secure training; returns this party's shares of the `cols` weights.
pub fn train_secure<W: RingWord>(
    sess: &mut Session<W>,
    x: &ShareMatrix<W>,
    t: &[W],
    cfg: &TrainingConfig,
) -> Result<Vec<W>> {
    let (rows, cols) = (x.rows, x.cols);
    if t.len() != rows || x.values.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} labels for a {rows}x{cols} share matrix",
            t.len()
        )));
    }
    let p = &cfg.params;
    let a = p.frac_bits;
    let ring = *sess.ring();
    let eta = cfg.eta_encoded::<W>()?;
    let mut w = vec![W::zero(); cols];

    for iter in 0..cfg.iterations {
        let wm = ShareMatrix::column(sess.role(), w.clone());
        let mut z = sess.matmul(x, &wm)?.values;
        sess.truncate(&mut z, a)?;

        let o = batch_activate(sess, &z, p)?;

        let mut diff = Vec::with_capacity(rows * cols);
        for d in 0..rows {
            let e = ring.sub(t[d], o[d]);
            diff.extend(std::iter::repeat_n(e, cols));
        }
        let grad = sess.batch_mul(&diff, &x.values)?;
        let mut dw = vec![W::zero(); cols];
        for d in 0..rows {
            for (acc, &g) in dw.iter_mut().zip(&grad[d * cols..(d + 1) * cols]) {
                *acc = ring.add(*acc, g);
            }
        }
        sess.truncate(&mut dw, a)?;
        let mut step: Vec<W> = dw.iter().map(|&v| ring.mul(eta, v)).collect();
        sess.truncate(&mut step, a)?;
        for (wi, s) in w.iter_mut().zip(step) {
            *wi = ring.add(*wi, s);
        }
        debug!("{} finished iteration {iter}", sess.role().name());
    }
    Ok(w)
}

/// Real-valued full gradient descent with the `ρ` activation.
pub fn train_plain_float<F: Real>(data: &Dataset<F>, eta: F, iterations: usize) -> Vec<F> {
    let mut w = vec![F::zero(); data.cols()];
    for _ in 0..iterations {
        let mut dw = vec![F::zero(); data.cols()];
        for d in 0..data.rows() {
            let x = data.row(d);
            let z = x.iter().zip(&w).map(|(&x, &w)| x * w).sum::<F>();
            let o = rho(z);
            for (acc, &xi) in dw.iter_mut().zip(x) {
                *acc = *acc + eta * (data.t()[d] - o) * xi;
            }
        }
        for (wi, d) in w.iter_mut().zip(dw) {
            *wi = *wi + d;
        }
    }
    w
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedTraining<W> {
    pub weights: Vec<W>,
    /// Activation inputs or weights that left the representable range.
    pub overflows: usize,
}

/// The secure schedule run on plaintext encodings with exact truncation.
pub fn train_plain_fixed<W: RingWord>(
    x: &[W],
    t: &[W],
    rows: usize,
    cols: usize,
    cfg: &TrainingConfig,
) -> Result<FixedTraining<W>> {
    if x.len() != rows * cols || t.len() != rows {
        return Err(Error::Dimension(format!("{} values for {rows}x{cols}", x.len())));
    }
    let p = &cfg.params;
    let a = p.frac_bits;
    let ring: Ring<W> = p.ring()?;
    let eta = cfg.eta_encoded::<W>()?;
    let z_limit = 1i64 << (a + p.int_bits - 1);
    let w_limit = 1i64 << (a + p.int_bits);
    let mut w = vec![W::zero(); cols];
    let mut overflows = 0usize;

    for _ in 0..cfg.iterations {
        let mut dw = vec![W::zero(); cols];
        for d in 0..rows {
            let xr = &x[d * cols..(d + 1) * cols];
            let acc = ring.sum(xr.iter().zip(&w).map(|(&xv, &wv)| ring.mul(xv, wv)));
            let z = truncate_exact(acc, a, &ring);
            if ring.to_signed(z).abs() >= z_limit {
                overflows += 1;
            }
            let e = ring.sub(t[d], rho_fixed(z, p, &ring));
            for (g, &xv) in dw.iter_mut().zip(xr) {
                *g = ring.add(*g, ring.mul(e, xv));
            }
        }
        for (wi, g) in w.iter_mut().zip(dw) {
            let g = truncate_exact(g, a, &ring);
            let step = truncate_exact(ring.mul(eta, g), a, &ring);
            *wi = ring.add(*wi, step);
            if ring.to_signed(*wi).abs() >= w_limit {
                overflows += 1;
            }
        }
    }
    if overflows > 0 {
        warn!("fixed-point training left the representable range {overflows} times");
    }
    Ok(FixedTraining {
        weights: w,
        overflows,
    })
}

/// Per-weight worst-case distance, in units of `2^-a`, between secure
/// weights under local truncation and [`train_plain_fixed`]'s weights.
///
/// Each local truncation lands on the exact floor or one above it; the bound
/// propagates those unit errors through every later inner product, the
/// (1-Lipschitz) activation, the gradient sum and the learning-rate step.
pub fn divergence_envelope<F: Real>(data: &Dataset<F>, cfg: &TrainingConfig) -> Result<Vec<f64>> {
    let p = &cfg.params;
    let scale = (p.frac_bits as f64).exp2();
    let absx: Vec<f64> = data
        .x()
        .iter()
        .map(|&v| Ok(decode::<u64, f64>(encode::<u64, F>(v, p)?, p).abs()))
        .collect::<Result<_>>()?;
    let eta = cfg.eta_encoded::<u64>()? as f64;
    let (rows, cols) = (data.rows(), data.cols());
    let mut ew = vec![0.0f64; cols];
    for _ in 0..cfg.iterations {
        let eo: Vec<f64> = (0..rows)
            .map(|d| {
                let s: f64 = (0..cols).map(|i| ew[i] * absx[d * cols + i]).sum();
                s.ceil() + 1.0
            })
            .collect();
        for (i, e) in ew.iter_mut().enumerate() {
            let s: f64 = (0..rows).map(|d| eo[d] * absx[d * cols + i]).sum();
            let edw = s.ceil() + 1.0;
            *e += (eta * edw / scale).ceil() + 1.0;
        }
    }
    Ok(ew)
}

/// Predicted labels under the threshold `ρ(z) >= 1/2`.
pub fn predict<F: Real>(w: &[F], data: &Dataset<F>) -> Vec<bool> {
    let half = F::from_f64(0.5).expect("0.5 is representable");
    (0..data.rows())
        .map(|d| {
            let z = data.row(d).iter().zip(w).map(|(&x, &w)| x * w).sum::<F>();
            rho(z) >= half
        })
        .collect()
}

/// Fraction of examples whose predicted label matches.
pub fn predict_and_score<F: Real>(w: &[F], data: &Dataset<F>) -> f64 {
    if data.rows() == 0 {
        return 0.0;
    }
    let correct = predict(w, data)
        .iter()
        .zip(data.t())
        .filter(|(&p, &t)| p == (t == F::one()))
        .count();
    correct as f64 / data.rows() as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MultiplicationCounts {
    pub ring: u64,
    pub bits: u64,
}

impl MultiplicationCounts {
    pub fn total(&self) -> u64 {
        self.ring + self.bits
    }
}

/// Secure multiplications of a training run over `rows` examples with `features` features.
pub fn count_multiplications(
    rows: usize,
    features: usize,
    iterations: usize,
    p: &FixedPointParams,
) -> MultiplicationCounts {
    let (d, cols, n) = (rows as u64, features as u64 + 1, iterations as u64);
    MultiplicationCounts {
        ring: n * (2 * d * cols + ACTIVATION_RING_MULTS * d),
        bits: n * d * activation_bit_mults(p),
    }
}

/// Randomness requests of a training run, in consumption order.
pub fn training_requests(rows: usize, cols: usize, iterations: usize, p: &FixedPointParams) -> Vec<Request> {
    let mut one = vec![Request::MatrixTriple {
        rows,
        inner: cols,
        cols: 1,
    }];
    one.extend(activation_requests(rows, p));
    one.push(Request::RingTriples { n: rows * cols });
    let mut out = Vec::with_capacity(one.len() * iterations);
    for _ in 0..iterations {
        out.extend_from_slice(&one);
    }
    out
}

/// Appends spare ring and bit triples amounting to `fraction` of the plan's elementwise products.
pub fn with_slack(mut plan: Vec<Request>, fraction: f64) -> Vec<Request> {
    let mut ring = 0usize;
    let mut bits = 0usize;
    for r in &plan {
        match *r {
            Request::RingTriples { n } | Request::Conversion { n } => ring += n,
            Request::BitTriples { n } => bits += n,
            _ => {}
        }
    }
    let extra = |n: usize| (n as f64 * fraction).ceil() as usize;
    if extra(ring) > 0 {
        plan.push(Request::RingTriples { n: extra(ring) });
    }
    if extra(bits) > 0 {
        plan.push(Request::BitTriples { n: extra(bits) });
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_hand_trace() {
        let data = Dataset::new(&[vec![1.0]], &[1.0]).unwrap();
        assert_eq!(train_plain_float(&data, 1.0, 1), vec![0.5, 0.5]);
    }

    #[test]
    fn zero_rate_and_zero_gradient() {
        let data = synthetic_dataset(10, 3, 0.1, 1);
        assert!(train_plain_float(&data, 0.0, 5).iter().all(|&w| w == 0.0));
        let p = FixedPointParams::default();
        let cfg = TrainingConfig::new(0.0, 5, p).unwrap();
        let (x, t) = data.encode::<u64>(&p).unwrap();
        let r = train_plain_fixed(&x, &t, 10, 4, &cfg).unwrap();
        assert!(r.weights.iter().all(|&w| w == 0));

        // ρ(0) = 1/2 for every example, so labels of 1/2 give no gradient
        let half = Dataset {
            rows: 2,
            cols: 2,
            x: vec![1.0, 0.3, 1.0, -0.7],
            t: vec![0.5, 0.5],
        };
        assert_eq!(train_plain_float(&half, 0.1, 3), vec![0.0, 0.0]);
    }

    #[test]
    fn fixed_one_step_matches_quantized_float() {
        let data = Dataset::new(&[vec![1.0]], &[1.0]).unwrap();
        let p = FixedPointParams::default();
        let cfg = TrainingConfig::new(1.0, 1, p).unwrap();
        let (x, t) = data.encode::<u64>(&p).unwrap();
        let r = train_plain_fixed(&x, &t, 1, 2, &cfg).unwrap();
        let w: Vec<f64> = r.weights.iter().map(|&v| decode::<u64, f64>(v, &p)).collect();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_weights_predict_positive() {
        let data = synthetic_dataset(40, 2, 0.0, 3);
        let pos = data.t().iter().filter(|&&t| t == 1.0).count() as f64 / 40.0;
        assert_eq!(predict_and_score(&[0.0, 0.0, 0.0], &data), pos);
    }

    #[test]
    fn counts_at_paper_scale() {
        let c = count_multiplications(225, 12634, 223, &FixedPointParams::default());
        assert!((1e9..1e10).contains(&(c.total() as f64)), "{}", c.total());
        assert_eq!(count_multiplications(0, 5, 10, &FixedPointParams::default()).total(), 0);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::<f64>::new(&[vec![1.0], vec![1.0, 2.0]], &[0.0, 1.0]).is_err());
        assert!(Dataset::<f64>::new(&[vec![1.0]], &[2.0]).is_err());
        assert!(Dataset::<f64>::from_augmented(1, 2, vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
