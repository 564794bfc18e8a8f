//! Readout-error mitigation by calibration-matrix inversion.
//!
//! Calibration prepares basis states, samples them under the readout part of
//! a noise model and estimates `A[read][true]`. The tensored method assumes
//! independent qubits and needs two preparations; the complete method
//! estimates the full `2^k × 2^k` matrix and is limited to six qubits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::qcirc::{sample, Circuit, CountsMap, NoiseModel, MAX_QUBITS};

pub const MAX_COMPLETE_QUBITS: usize = 6;

/// Condition numbers above this are treated as singular.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMethod {
    #[default]
    Tensored,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Negativity {
    /// Clip negative entries to zero, then renormalize.
    #[default]
    Clip,
    /// Least squares over the probability simplex (projected gradient).
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMatrix {
    pub method: CalibrationMethod,
    /// Calibrated qubits; bit `k` of a key belongs to `qubits[k]`.
    pub qubits: Vec<usize>,
    pub shots_per_state: u64,
    /// Tensored: per-qubit `[[P(0|0), P(1|0)], [P(0|1), P(1|1)]]`, row = true value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_qubit: Vec<[[f64; 2]; 2]>,
    /// Complete: `full[read][true]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<Vec<Vec<f64>>>,
}

impl CalibrationMatrix {
    /// Exact tensored calibration from known confusion rows.
    pub fn from_confusions(qubits: Vec<usize>, rows: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        if qubits.len() != rows.len() {
            return Err(contract("one confusion per qubit"));
        }
        Ok(Self {
            method: CalibrationMethod::Tensored,
            qubits,
            shots_per_state: 0,
            per_qubit: rows,
            full: None,
        })
    }

    pub fn width(&self) -> usize {
        self.qubits.len()
    }

    /// `A · x` for a dense distribution over true outcomes.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        match &self.full {
            Some(full) => dense_matvec(full, x),
            None => apply_axes(x, &self.per_qubit.iter().map(axis_matrix).collect::<Vec<_>>()),
        }
    }

    fn transpose_forward(&self, y: &[f64]) -> Vec<f64> {
        match &self.full {
            Some(full) => {
                let n = y.len();
                (0..n).map(|t| (0..n).map(|r| full[r][t] * y[r]).sum()).collect()
            }
            None => apply_axes(
                y,
                &self
                    .per_qubit
                    .iter()
                    .map(|c| transpose2(axis_matrix(c)))
                    .collect::<Vec<_>>(),
            ),
        }
    }

    /// Ratio of largest to smallest singular value of `A`.
    pub fn condition_number(&self) -> f64 {
        match &self.full {
            Some(full) => condition(&to_dmatrix(full)),
            None => self
                .per_qubit
                .iter()
                .map(|c| {
                    let m = axis_matrix(c);
                    condition(&DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]))
                })
                .product(),
        }
    }

    fn spectral_norm(&self) -> f64 {
        let largest = |m: &DMatrix<f64>| m.singular_values().max();
        match &self.full {
            Some(full) => largest(&to_dmatrix(full)),
            None => self
                .per_qubit
                .iter()
                .map(|c| {
                    let m = axis_matrix(c);
                    largest(&DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]))
                })
                .product(),
        }
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let cond = self.condition_number();
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(Error::SingularCalibration { condition: cond });
        }
        match &self.full {
            Some(full) => {
                let inv = to_dmatrix(full)
                    .try_inverse()
                    .ok_or(Error::SingularCalibration { condition: cond })?;
                Ok((inv * DVector::from_column_slice(b)).iter().copied().collect())
            }
            None => {
                let mut inverses = Vec::with_capacity(self.per_qubit.len());
                for c in &self.per_qubit {
                    let [[a, b2], [c2, d]] = axis_matrix(c);
                    let det = a * d - b2 * c2;
                    inverses.push([[d / det, -b2 / det], [-c2 / det, a / det]]);
                }
                Ok(apply_axes(b, &inverses))
            }
        }
    }
}

/// `M[read][true]` for one qubit from its row-per-true-value confusion.
fn axis_matrix(c: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[c[0][0], c[1][0]], [c[0][1], c[1][1]]]
}

fn transpose2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// Applies a 2×2 matrix along every axis of a dense `2^k` vector.
fn apply_axes(x: &[f64], mats: &[[[f64; 2]; 2]]) -> Vec<f64> {
    let mut v = x.to_vec();
    for (k, m) in mats.iter().enumerate() {
        let bit = 1 << k;
        for i in 0..v.len() {
            if i & bit == 0 {
                let (x0, x1) = (v[i], v[i | bit]);
                v[i] = m[0][0] * x0 + m[0][1] * x1;
                v[i | bit] = m[1][0] * x0 + m[1][1] * x1;
            }
        }
    }
    v
}

fn dense_matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |r, c| m[r][c])
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    let (max, min) = (s.max(), s.min());
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn validate_qubits(qubits: &[usize]) -> Result<usize> {
    if qubits.is_empty() {
        return Err(contract("no qubits to calibrate"));
    }
    if qubits.len() > 20 {
        return Err(Error::TooManyQubits(qubits.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &q in qubits {
        if !seen.insert(q) {
            return Err(Error::DuplicateMeasurement(q));
        }
    }
    let width = qubits.iter().max().map_or(0, |m| m + 1);
    if width > MAX_QUBITS {
        return Err(Error::TooManyQubits(width));
    }
    Ok(width)
}

fn prepared(width: usize, qubits: &[usize], state: u32) -> Result<Circuit> {
    let mut c = Circuit::new(width)?;
    for (k, &q) in qubits.iter().enumerate() {
        if (state >> k) & 1 == 1 {
            c.x(q);
        }
    }
    for &q in qubits {
        c.measure(q)?;
    }
    Ok(c)
}

fn state_seed(seed: u64, state: u32) -> u64 {
    seed ^ (state as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Estimates the calibration under the readout part of `noise` only.
pub fn calibrate(
    noise: &NoiseModel,
    qubits: &[usize],
    shots: u64,
    method: CalibrationMethod,
    seed: u64,
) -> Result<CalibrationMatrix> {
    let width = validate_qubits(qubits)?;
    if shots == 0 {
        return Err(contract("shots must be at least 1"));
    }
    let readout = noise.without_gate_noise();
    let k = qubits.len();
    match method {
        CalibrationMethod::Tensored => {
            let zeros = sample(&prepared(width, qubits, 0)?, shots, Some(&readout), state_seed(seed, 0))?;
            let all = (1u32 << k) - 1;
            let ones = sample(
                &prepared(width, qubits, all)?,
                shots,
                Some(&readout),
                state_seed(seed, all),
            )?;
            let ones_in = |counts: &CountsMap, bit: usize| -> f64 {
                counts
                    .iter()
                    .filter(|(key, _)| (key >> bit) & 1 == 1)
                    .map(|(_, n)| n)
                    .sum::<u64>() as f64
                    / shots as f64
            };
            let per_qubit = (0..k)
                .map(|b| {
                    let p01 = ones_in(&zeros, b);
                    let p11 = ones_in(&ones, b);
                    [[1.0 - p01, p01], [1.0 - p11, p11]]
                })
                .collect();
            Ok(CalibrationMatrix {
                method,
                qubits: qubits.to_vec(),
                shots_per_state: shots,
                per_qubit,
                full: None,
            })
        }
        CalibrationMethod::Complete => {
            if k > MAX_COMPLETE_QUBITS {
                return Err(contract(format!(
                    "complete calibration supports at most {MAX_COMPLETE_QUBITS} qubits, got {k}"
                )));
            }
            let n = 1usize << k;
            let mut full = vec![vec![0.0; n]; n];
            for t in 0..n as u32 {
                let counts = sample(&prepared(width, qubits, t)?, shots, Some(&readout), state_seed(seed, t))?;
                for (r, c) in counts.iter() {
                    full[r as usize][t as usize] = c as f64 / shots as f64;
                }
            }
            Ok(CalibrationMatrix {
                method,
                qubits: qubits.to_vec(),
                shots_per_state: shots,
                per_qubit: Vec::new(),
                full: Some(full),
            })
        }
    }
}

/// Dense probability vector over `2^width` outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub width: usize,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn from_counts(counts: &CountsMap) -> Self {
        let mut probs = vec![0.0; 1 << counts.width()];
        for (k, n) in counts.iter() {
            probs[k as usize] = n as f64 / counts.shots() as f64;
        }
        Self {
            width: counts.width(),
            probs,
        }
    }

    pub fn get(&self, key: u32) -> f64 {
        self.probs.get(key as usize).copied().unwrap_or(0.0)
    }

    pub fn total_variation(&self, other: &[f64]) -> f64 {
        0.5 * self.probs.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Inverts the calibration on the raw frequencies and maps the result back
/// onto the probability simplex.
pub fn mitigate(raw: &CountsMap, cal: &CalibrationMatrix, negativity: Negativity) -> Result<Distribution> {
    if raw.width() != cal.width() {
        return Err(Error::WidthMismatch {
            expected: cal.width(),
            found: raw.width(),
        });
    }
    let b = Distribution::from_counts(raw).probs;
    let probs = mitigate_frequencies(&b, cal, negativity)?;
    Ok(Distribution {
        width: raw.width(),
        probs,
    })
}

/// Same as [`mitigate`] on a dense frequency vector.
pub fn mitigate_frequencies(b: &[f64], cal: &CalibrationMatrix, negativity: Negativity) -> Result<Vec<f64>> {
    if b.len() != 1 << cal.width() {
        return Err(Error::WidthMismatch {
            expected: cal.width(),
            found: b.len().trailing_zeros() as usize,
        });
    }
    let x = cal.solve(b)?;
    let clipped = clip_renormalize(&x);
    Ok(match negativity {
        Negativity::Clip => clipped,
        Negativity::LeastSquares => simplex_least_squares(cal, b, clipped),
    })
}

fn clip_renormalize(x: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / x.len() as f64; x.len()];
    }
    clipped.iter().map(|v| v / total).collect()
}

fn simplex_least_squares(cal: &CalibrationMatrix, b: &[f64], start: Vec<f64>) -> Vec<f64> {
    let lipschitz = cal.spectral_norm().powi(2);
    let step = 1.0 / lipschitz.max(f64::EPSILON);
    let mut x = start;
    for _ in 0..2000 {
        let residual: Vec<f64> = cal.forward(&x).iter().zip(b).map(|(a, b)| a - b).collect();
        let grad = cal.transpose_forward(&residual);
        let moved: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
        let next = project_simplex(&moved);
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < 1e-13 {
            break;
        }
    }
    x
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}`.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcirc::Confusion;

    fn flip_model(p: f64) -> NoiseModel {
        NoiseModel::readout_only(p).unwrap()
    }

    #[test]
    fn identity_readout_calibrates_to_identity() {
        let cal = calibrate(&NoiseModel::ideal(), &[0, 1, 2], 10_000, CalibrationMethod::Tensored, 1).unwrap();
        for c in &cal.per_qubit {
            assert!(c[0][1] < 0.01 && c[1][0] < 0.01);
        }
        let full = calibrate(&NoiseModel::ideal(), &[0, 1], 10_000, CalibrationMethod::Complete, 1).unwrap();
        let m = full.full.unwrap();
        for (r, row) in m.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                assert_eq!(v, if r == t { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn flip_point_one_estimated() {
        let cal = calibrate(&flip_model(0.1), &[0, 3, 5], 10_000, CalibrationMethod::Tensored, 2).unwrap();
        for c in &cal.per_qubit {
            assert!((c[0][0] - 0.9).abs() < 0.02);
            assert!((c[1][1] - 0.9).abs() < 0.02);
        }
    }

    #[test]
    fn tensored_matches_product_of_single_qubit_calibrations() {
        let noise = NoiseModel::ideal()
            .with_qubit_readout(0, Confusion::asymmetric(0.05, 0.15))
            .unwrap()
            .with_qubit_readout(1, Confusion::asymmetric(0.2, 0.02))
            .unwrap();
        let joint = calibrate(&noise, &[0, 1], 20_000, CalibrationMethod::Complete, 3).unwrap();
        let singles: Vec<_> = [0, 1]
            .iter()
            .map(|&q| {
                calibrate(&noise, &[q], 20_000, CalibrationMethod::Tensored, 4)
                    .unwrap()
                    .per_qubit[0]
            })
            .collect();
        let product = CalibrationMatrix::from_confusions(vec![0, 1], singles).unwrap();
        let full = joint.full.unwrap();
        for t in 0..4 {
            let mut e = vec![0.0; 4];
            e[t] = 1.0;
            let col = product.forward(&e);
            for r in 0..4 {
                assert!((full[r][t] - col[r]).abs() < 0.015, "({r}, {t})");
            }
        }
    }

    #[test]
    fn complete_budget_enforced() {
        let q: Vec<usize> = (0..7).collect();
        assert!(calibrate(&NoiseModel::ideal(), &q, 10, CalibrationMethod::Complete, 0).is_err());
        assert!(calibrate(&NoiseModel::ideal(), &[1, 1], 10, CalibrationMethod::Tensored, 0).is_err());
    }

    #[test]
    fn identity_calibration_is_a_no_op() {
        let cal = CalibrationMatrix::from_confusions(vec![0, 1], vec![[[1.0, 0.0], [0.0, 1.0]]; 2]).unwrap();
        let raw = CountsMap::from_keys(2, [0, 1, 1, 3]);
        let out = mitigate(&raw, &cal, Negativity::Clip).unwrap();
        assert_eq!(out.probs, vec![0.25, 0.5, 0.0, 0.25]);
    }

    #[test]
    fn inverts_exact_forward_model() {
        let rows = vec![
            [[0.9, 0.1], [0.2, 0.8]],
            [[0.97, 0.03], [0.06, 0.94]],
            [[0.85, 0.15], [0.1, 0.9]],
        ];
        let cal = CalibrationMatrix::from_confusions(vec![0, 1, 2], rows).unwrap();
        let truth = vec![0.3, 0.0, 0.1, 0.05, 0.0, 0.25, 0.2, 0.1];
        let b = cal.forward(&truth);
        for neg in [Negativity::Clip, Negativity::LeastSquares] {
            let x = mitigate_frequencies(&b, &cal, neg).unwrap();
            for (a, t) in x.iter().zip(&truth) {
                assert!((a - t).abs() < 1e-9);
            }
        }
        // complete method on the same matrix
        let full: Vec<Vec<f64>> = (0..8)
            .map(|r| {
                (0..8)
                    .map(|t| {
                        let mut e = vec![0.0; 8];
                        e[t] = 1.0;
                        cal.forward(&e)[r]
                    })
                    .collect()
            })
            .collect();
        let complete = CalibrationMatrix {
            method: CalibrationMethod::Complete,
            qubits: vec![0, 1, 2],
            shots_per_state: 0,
            per_qubit: Vec::new(),
            full: Some(full),
        };
        let x = mitigate_frequencies(&b, &complete, Negativity::Clip).unwrap();
        for (a, t) in x.iter().zip(&truth) {
            assert!((a - t).abs() < 1e-9);
        }
    }

    #[test]
    fn output_is_a_distribution() {
        let cal = calibrate(&flip_model(0.1), &[0, 1, 2, 3], 2000, CalibrationMethod::Tensored, 5).unwrap();
        let raw = CountsMap::from_keys(4, [0, 0, 0, 15, 3]);
        for neg in [Negativity::Clip, Negativity::LeastSquares] {
            let out = mitigate(&raw, &cal, neg).unwrap();
            assert!(out.probs.iter().all(|&p| p >= 0.0));
            assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_calibration_reports_condition() {
        let cal = CalibrationMatrix::from_confusions(vec![0], vec![[[0.5, 0.5], [0.5, 0.5]]]).unwrap();
        let raw = CountsMap::from_keys(1, [0]);
        match mitigate(&raw, &cal, Negativity::Clip) {
            Err(Error::SingularCalibration { condition }) => assert!(condition > 1e12),
            other => panic!("expected singular error, got {other:?}"),
        }
        let wrong = CountsMap::from_keys(2, [0]);
        assert!(matches!(
            mitigate(&wrong, &cal, Negativity::Clip),
            Err(Error::WidthMismatch { .. })
        ));
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn json_roundtrip() {
        let cal = calibrate(&flip_model(0.05), &[0, 2], 500, CalibrationMethod::Tensored, 6).unwrap();
        let back: CalibrationMatrix = serde_json::from_str(&serde_json::to_string(&cal).unwrap()).unwrap();
        assert_eq!(back, cal);
    }
}
