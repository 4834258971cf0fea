//! Kernel models and scoring: kernel ridge regression, SMO support-vector
//! classification, fixed-fold cross-validation and kernel-target alignment.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pqk::gram_rows;

/// SMO stopping tolerance on the maximal KKT violation.
pub const SMO_TOLERANCE: f64 = 1e-3;

/// Hard cap on SMO pair updates.
pub const SMO_MAX_PASSES: usize = 10_000;

/// Deterministic fold assignment: seeded shuffle, then contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    n: usize,
    k: usize,
    assignment: Vec<u32>,
    seed: u64,
}

impl FoldPlan {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || n < k {
            return Err(Error::invalid_argument(format!(
                "cannot split {n} samples into {k} folds"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let base = n / k;
        let extra = n % k;
        let mut assignment = vec![0u32; n];
        let mut cursor = 0usize;
        for fold in 0..k {
            let size = base + usize::from(fold < extra);
            for &idx in &order[cursor..cursor + size] {
                assignment[idx] = fold as u32;
            }
            cursor += size;
        }
        Ok(FoldPlan {
            n,
            k,
            assignment,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn fold_count(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, index: usize) -> u32 {
        self.assignment[index]
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignment {
            sizes[f as usize] += 1;
        }
        sizes
    }

    /// `(train, held_out)` index lists for one fold, in ascending order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::with_capacity(self.n);
        let mut test = Vec::new();
        for (i, &f) in self.assignment.iter().enumerate() {
            if f as usize == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    Krr { lambda: f64 },
    Svc { c: f64 },
}

impl ModelSpec {
    pub fn is_classifier(&self) -> bool {
        matches!(self, ModelSpec::Svc { .. })
    }
}

/// A fitted kernel model: dual coefficients over the training rows.
///
/// For KRR `dual_coef = alpha` with predictions `K_test_train * alpha`; for
/// SVC `dual_coef[i] = alpha_i * y_i` and the decision function adds `bias`.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub spec: ModelSpec,
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
}

/// Solve `(K + lambda I) alpha = y` by Cholesky factorization.
pub fn krr_fit(k: ArrayView2<'_, f64>, y: &[f64], lambda: f64) -> Result<KernelModel> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::invalid_argument(format!(
            "gram is {}x{} but y has {n} entries",
            k.nrows(),
            k.ncols()
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid_argument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_argument("non-finite target values"));
    }

    let mut a = k.to_owned();
    for i in 0..n {
        a[[i, i]] += lambda;
    }
    let chol = cholesky(&mut a)?;
    let alpha = chol_solve(&chol, y);
    Ok(KernelModel {
        spec: ModelSpec::Krr { lambda },
        dual_coef: alpha,
        bias: 0.0,
        converged: true,
    })
}

pub fn krr_predict(model: &KernelModel, k_test_train: ArrayView2<'_, f64>) -> Vec<f64> {
    k_test_train
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&model.dual_coef).map(|(k, a)| k * a).sum())
        .collect()
}

/// In-place lower Cholesky; returns the factor.
fn cholesky(a: &mut Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::IllConditioned(format!(
                "pivot {d:.3e} at column {j}"
            )));
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / d;
        }
    }
    // Zero the strict upper triangle so the factor is self-contained.
    for i in 0..n {
        for j in i + 1..n {
            a[[i, j]] = 0.0;
        }
    }
    Ok(a.clone())
}

fn chol_solve(l: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    // L z = y
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    // L^T alpha = z
    let mut alpha = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[[k, i]] * alpha[k];
        }
        alpha[i] = s / l[[i, i]];
    }
    alpha
}

/// C-SVC dual solved by sequential minimal optimization with
/// maximal-violating-pair selection.
pub fn svc_fit(k: ArrayView2<'_, f64>, y: &[f64], c: f64) -> Result<KernelModel> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::invalid_argument(format!(
            "gram is {}x{} but y has {n} entries",
            k.nrows(),
            k.ncols()
        )));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid_argument(format!("C must be positive, got {c}")));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid_argument(
            "SVC labels must be exactly +1 or -1",
        ));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == n {
        return Err(Error::DegenerateLabels);
    }

    // Minimize 1/2 a^T Q a - e^T a with Q_ij = y_i y_j K_ij,
    // subject to y^T a = 0 and 0 <= a <= C.
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n]; // (Q alpha)_i - 1 at alpha = 0
    const TAU: f64 = 1e-12;

    let mut converged = false;
    for _pass in 0..SMO_MAX_PASSES {
        // Maximal violating pair.
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        let mut i_sel = usize::MAX;
        let mut j_sel = usize::MAX;
        for t in 0..n {
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            let v = -y[t] * grad[t];
            if in_up && v > g_max {
                g_max = v;
                i_sel = t;
            }
            if in_low && v < g_min {
                g_min = v;
                j_sel = t;
            }
        }
        if g_max - g_min <= SMO_TOLERANCE {
            converged = true;
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let old_ai = alpha[i];
        let old_aj = alpha[j];
        // Curvature along the feasible direction is the same in both label
        // branches: Q_ii + Q_jj +/- 2 Q_ij = K_ii + K_jj - 2 K_ij.
        let quad = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(TAU);

        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_ai;
        let d_j = alpha[j] - old_aj;
        if d_i == 0.0 && d_j == 0.0 {
            converged = true;
            break;
        }
        for t in 0..n {
            grad[t] += y[t] * y[i] * k[[t, i]] * d_i + y[t] * y[j] * k[[t, j]] * d_j;
        }
    }

    // Bias from free support vectors; midpoint of the violation interval
    // when none are free.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..n {
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += y[t] * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        -free_sum / free_count as f64
    } else {
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            let v = -y[t] * grad[t];
            if in_up {
                g_max = g_max.max(v);
            }
            if in_low {
                g_min = g_min.min(v);
            }
        }
        (g_max + g_min) / 2.0
    };

    let dual_coef = alpha.iter().zip(y).map(|(a, yi)| a * yi).collect();
    Ok(KernelModel {
        spec: ModelSpec::Svc { c },
        dual_coef,
        bias,
        converged,
    })
}

pub fn svc_decision(model: &KernelModel, k_test_train: ArrayView2<'_, f64>) -> Vec<f64> {
    k_test_train
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&model.dual_coef)
                .map(|(k, a)| k * a)
                .sum::<f64>()
                + model.bias
        })
        .collect()
}

/// Predicted labels in `{-1, +1}`; a decision value of exactly zero maps
/// to `+1`.
pub fn svc_predict(model: &KernelModel, k_test_train: ArrayView2<'_, f64>) -> Vec<f64> {
    svc_decision(model, k_test_train)
        .into_iter()
        .map(|d| if d >= 0.0 { 1.0 } else { -1.0 })
        .collect()
}

pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::invalid_argument(format!(
            "length mismatch: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedVariance);
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn accuracy(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::invalid_argument(format!(
            "length mismatch: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Sliced gram block from kernel rows of one full feature matrix.
fn gram_block(
    full: &Array2<f64>,
    rows: &[usize],
    cols: &[usize],
) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| full[[rows[i], cols[j]]])
}

/// Mean held-out score over the fold plan.
///
/// The full gram is computed once from `features` and sliced per fold, so
/// the simulator cost stays one evaluation per data point. SVC folds whose
/// training half is single-class are skipped; if every fold is invalid the
/// evaluation fails.
pub fn cross_validate(
    features: ArrayView2<'_, f64>,
    y: &[f64],
    folds: &FoldPlan,
    model: ModelSpec,
    gamma: f64,
) -> Result<f64> {
    if features.nrows() != y.len() || y.len() != folds.len() {
        return Err(Error::invalid_argument(format!(
            "inconsistent sizes: {} feature rows, {} targets, fold plan over {}",
            features.nrows(),
            y.len(),
            folds.len()
        )));
    }
    let full = gram_rows(features, features, gamma)?;
    let mut scores = Vec::with_capacity(folds.fold_count());
    for fold in 0..folds.fold_count() {
        let (train, test) = folds.split(fold);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let k_train = gram_block(&full, &train, &train);
        let k_test = gram_block(&full, &test, &train);
        let score = match model {
            ModelSpec::Krr { lambda } => krr_fit(k_train.view(), &y_train, lambda)
                .map(|m| krr_predict(&m, k_test.view()))
                .and_then(|pred| r2_score(&y_test, &pred)),
            ModelSpec::Svc { c } => svc_fit(k_train.view(), &y_train, c)
                .map(|m| svc_predict(&m, k_test.view()))
                .and_then(|pred| accuracy(&y_test, &pred)),
        };
        match score {
            Ok(s) => scores.push(s),
            Err(Error::DegenerateLabels) => continue,
            Err(Error::UndefinedVariance) => continue,
            Err(e) => return Err(e),
        }
    }
    if scores.is_empty() {
        return Err(Error::ScoringFailed(
            "every cross-validation fold was degenerate".into(),
        ));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Kernel-target alignment
/// `TA(K) = sum_ij K_ij y_i y_j / sqrt(sum_ij K_ij^2 * sum_ij y_i^2 y_j^2)`.
pub fn kernel_target_alignment(k: ArrayView2<'_, f64>, y: &[f64]) -> Result<f64> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n || n == 0 {
        return Err(Error::invalid_argument(format!(
            "kernel is {}x{} but y has {n} entries",
            k.nrows(),
            k.ncols()
        )));
    }
    let mut num = 0.0;
    let mut k_norm2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            num += k[[i, j]] * y[i] * y[j];
            k_norm2 += k[[i, j]] * k[[i, j]];
        }
    }
    let y2: f64 = y.iter().map(|v| v * v).sum();
    let y_norm2 = y2 * y2; // sum_ij y_i^2 y_j^2
    if k_norm2 == 0.0 || y_norm2 == 0.0 {
        return Err(Error::UndefinedAlignment(
            "kernel or target has zero norm".into(),
        ));
    }
    Ok(num / (k_norm2 * y_norm2).sqrt())
}
