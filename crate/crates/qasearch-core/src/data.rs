//! Dataset ingestion, synthetic generators, preprocessing and fold plans.
//!
//! Every dataset carries a fixed train/test split; scalers are fit on the
//! training rows only and then applied to all rows. Test rows are only
//! reachable through an instrumented accessor, which the pipeline uses to
//! audit that selection and tuning never touch them.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::circuit::{self, DataCircuit, ExpandOptions};
use crate::error::{Error, Result};
use crate::learners::FoldPlan;
use crate::pqk::fnv1a64;
use crate::simulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    Classification,
}

/// Scaler parameters, recorded for the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalingDescriptor {
    None,
    /// Per-feature min/max fit on the training rows; maps train to [0, 1].
    MinMax { min: Vec<f64>, max: Vec<f64> },
    /// Per-feature mean/std fit on the training rows.
    Standard { mean: Vec<f64>, std: Vec<f64> },
}

/// A supervised dataset with a fixed split.
///
/// Classification labels are stored as `-1.0` / `+1.0`.
#[derive(Debug)]
pub struct Dataset {
    pub id: String,
    x: Array2<f64>,
    y: Vec<f64>,
    pub task: Task,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    pub scaling: ScalingDescriptor,
    pub generator_seed: Option<u64>,
    test_reads: AtomicUsize,
}

/// Train-only view handed to selection and hyperparameter steps. Owning a
/// copy of the training rows makes test leakage impossible by construction.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub task: Task,
    /// Content-derived cache id: same bytes, same id.
    pub cache_id: String,
}

impl Dataset {
    pub fn new(
        id: impl Into<String>,
        x: Array2<f64>,
        y: Vec<f64>,
        task: Task,
        train_idx: Vec<usize>,
        test_idx: Vec<usize>,
        scaling: ScalingDescriptor,
        generator_seed: Option<u64>,
    ) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::invalid_argument(format!(
                "{} rows but {} targets",
                n,
                y.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in train_idx.iter().chain(&test_idx) {
            if i >= n || seen[i] {
                return Err(Error::invalid_argument(
                    "split indices must be disjoint and in range",
                ));
            }
            seen[i] = true;
        }
        if seen.iter().any(|&b| !b) {
            return Err(Error::invalid_argument(
                "split must cover every row exactly once",
            ));
        }
        if task == Task::Classification && y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::invalid_argument(
                "classification labels must be -1 or +1",
            ));
        }
        Ok(Dataset {
            id: id.into(),
            x,
            y,
            task,
            train_idx,
            test_idx,
            scaling,
            generator_seed,
            test_reads: AtomicUsize::new(0),
        })
    }

    pub fn num_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn train_len(&self) -> usize {
        self.train_idx.len()
    }

    pub fn test_len(&self) -> usize {
        self.test_idx.len()
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train_idx
    }

    pub fn train_view(&self) -> TrainView {
        let x = select_rows(self.x.view(), &self.train_idx);
        let y: Vec<f64> = self.train_idx.iter().map(|&i| self.y[i]).collect();
        let mut bytes = Vec::with_capacity(x.len() * 8);
        for v in x.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let cache_id = format!("{}-{:016x}", self.id, fnv1a64(&bytes));
        TrainView {
            x,
            y,
            task: self.task,
            cache_id,
        }
    }

    /// Test rows and labels. Every call is counted; the pipeline asserts the
    /// count stays zero until the final-evaluation step.
    pub fn test_xy(&self) -> (Array2<f64>, Vec<f64>) {
        self.test_reads.fetch_add(1, Ordering::Relaxed);
        let x = select_rows(self.x.view(), &self.test_idx);
        let y = self.test_idx.iter().map(|&i| self.y[i]).collect();
        (x, y)
    }

    pub fn test_reads(&self) -> usize {
        self.test_reads.load(Ordering::Relaxed)
    }

    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "id": self.id,
            "task": self.task,
            "n": self.len(),
            "d": self.num_features(),
            "train_indices": self.train_idx,
            "test_indices": self.test_idx,
            "scaling": self.scaling,
            "generator_seed": self.generator_seed,
        })
    }
}

fn select_rows(x: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), x.ncols()), |(i, j)| x[[idx[i], j]])
}

/// Parse a CSV with a header row into an unsplit dataset (all rows train).
///
/// Rows containing non-finite values are rejected; the error lists their
/// 1-based line numbers.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_reader(file, target_column, task, &path.as_ref().display().to_string())
}

/// Reader-based variant of [`load_csv`]; the entry point for fuzzing.
pub fn load_csv_reader(
    reader: impl std::io::Read,
    target_column: &str,
    task: Task,
    id: &str,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(0, format!("bad header row: {e}")))?
        .clone();
    let target_pos = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| {
            Error::invalid_argument(format!(
                "target column {target_column:?} not found; have {:?}",
                headers.iter().collect::<Vec<_>>()
            ))
        })?;
    let d = headers.len().saturating_sub(1);
    if d == 0 {
        return Err(Error::invalid_argument(
            "csv needs at least one feature column besides the target",
        ));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut rejected: Vec<u64> = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx as u64 + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::parse(line as usize, format!("csv error: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::parse(
                line as usize,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let mut features = Vec::with_capacity(d);
        let mut target = 0.0;
        let mut finite = true;
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::parse(
                    line as usize,
                    format!(
                        "non-numeric value {field:?} in column {:?} (line {line}, column {})",
                        &headers[col],
                        col + 1
                    ),
                )
            })?;
            if !value.is_finite() {
                finite = false;
            }
            if col == target_pos {
                target = value;
            } else {
                features.push(value);
            }
        }
        if !finite {
            rejected.push(line);
            continue;
        }
        rows.push(features);
        targets.push(target);
    }
    if !rejected.is_empty() {
        return Err(Error::invalid_argument(format!(
            "rows with non-finite values rejected (lines {rejected:?})"
        )));
    }

    let n = rows.len();
    let mut x = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    Dataset::new(
        id,
        x,
        targets,
        task,
        (0..n).collect(),
        Vec::new(),
        ScalingDescriptor::None,
        None,
    )
}

/// Subsample 1,000 rows, min-max scale to [0, 1] on the 700-row training
/// half, and split 700/300.
pub fn prepare_california(raw: &Dataset, seed: u64) -> Result<Dataset> {
    const N_DATA: usize = 1_000;
    const N_TRAIN: usize = 700;
    if raw.len() < N_DATA {
        return Err(Error::invalid_argument(format!(
            "need at least {N_DATA} rows, have {}",
            raw.len()
        )));
    }
    if raw.num_features() != 8 {
        return Err(Error::invalid_argument(format!(
            "expected 8 features, have {}",
            raw.num_features()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.shuffle(&mut rng);
    let chosen = &order[..N_DATA];

    let mut x = select_rows(raw.x.view(), chosen);
    let y: Vec<f64> = chosen.iter().map(|&i| raw.y[i]).collect();
    let train_idx: Vec<usize> = (0..N_TRAIN).collect();
    let test_idx: Vec<usize> = (N_TRAIN..N_DATA).collect();

    let (min, max) = minmax_fit(x.view(), &train_idx);
    minmax_apply(&mut x, &min, &max);

    Dataset::new(
        "california",
        x,
        y,
        Task::Regression,
        train_idx,
        test_idx,
        ScalingDescriptor::MinMax { min, max },
        Some(seed),
    )
}

/// Parameters of the two-curves surrogate generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TwoCurvesParams {
    pub n: usize,
    pub d: usize,
    pub degree: usize,
    /// Offset between the two curves, in units of the raw coordinate scale.
    pub separation: f64,
    pub n_train: usize,
}

impl Default for TwoCurvesParams {
    fn default() -> Self {
        TwoCurvesParams {
            n: 300,
            d: 10,
            degree: 20,
            separation: 0.15,
            n_train: 240,
        }
    }
}

/// Two curves in `d`-dimensional space: shared random polynomial
/// coordinates in `t`, offset by `separation` along a random unit
/// direction. Labels are the curve id; features are standardized on the
/// training half.
pub fn make_two_curves(params: &TwoCurvesParams, seed: u64) -> Result<Dataset> {
    let TwoCurvesParams {
        n,
        d,
        degree,
        separation,
        n_train,
    } = *params;
    if n % 2 != 0 || n == 0 {
        return Err(Error::invalid_argument("n must be even and positive"));
    }
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid_argument("need 0 < n_train < n"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Shared polynomial coefficients, one polynomial per coordinate.
    let coeffs = Array2::from_shape_fn((d, degree + 1), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    // Random unit separation direction.
    let mut dir: Vec<f64> = (0..d)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    dir.iter_mut().for_each(|v| *v /= norm);

    let eval_poly = |j: usize, t: f64| -> f64 {
        // Horner evaluation of coordinate j at parameter t.
        let mut acc = 0.0;
        for k in (0..=degree).rev() {
            acc = acc * t + coeffs[[j, k]];
        }
        acc
    };

    let half = n / 2;
    let mut x = Array2::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    for curve in 0..2 {
        let sign = if curve == 0 { -1.0 } else { 1.0 };
        for i in 0..half {
            let t: f64 = rng.random_range(0.0..=1.0);
            let row = curve * half + i;
            for j in 0..d {
                x[[row, j]] = eval_poly(j, t) + sign * separation / 2.0 * dir[j];
            }
            y.push(sign);
        }
    }

    // Shuffle, then contiguous split.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut xs = select_rows(x.view(), &order);
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let train_idx: Vec<usize> = (0..n_train).collect();
    let test_idx: Vec<usize> = (n_train..n).collect();

    let (mean, std) = standard_fit(xs.view(), &train_idx);
    standard_apply(&mut xs, &mean, &std);

    Dataset::new(
        format!("two-curves-d{d}-deg{degree}"),
        xs,
        ys,
        Task::Classification,
        train_idx,
        test_idx,
        ScalingDescriptor::Standard { mean, std },
        Some(seed),
    )
}

/// Synthetic quantum regression surrogate: labels are the `<Z_0>`
/// expectation of a fixed random 6-layer encoding circuit, standardized on
/// the training half. Features are drawn uniformly from `[-1, 1]^q`.
pub fn make_synthetic_quantum_regression(
    n_train: usize,
    n_test: usize,
    q: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid_argument("need non-empty train and test"));
    }
    let n = n_train + n_test;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, q), |_| rng.random_range(-1.0..=1.0));

    let opts = ExpandOptions::default();
    // Resample the labelling circuit until the train labels genuinely vary.
    let mut labels = Vec::new();
    for _ in 0..64 {
        let labeller = circuit::random_layered(&mut rng, q, 6, 6)?;
        labels.clear();
        for i in 0..n {
            let point: Vec<f64> = x.row(i).to_vec();
            let gates = labeller.expand(&point, &opts)?;
            let mut state = simulator::init_state(q)?;
            state.apply_all(&gates)?;
            labels.push(state.pauli_expectation(simulator::Pauli::Z, 0)?);
        }
        let mean = labels[..n_train].iter().sum::<f64>() / n_train as f64;
        let var = labels[..n_train]
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n_train as f64;
        if var.sqrt() > 1e-3 {
            break;
        }
    }

    let mean = labels[..n_train].iter().sum::<f64>() / n_train as f64;
    let std = (labels[..n_train]
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n_train as f64)
        .sqrt()
        .max(1e-12);
    let y: Vec<f64> = labels.iter().map(|v| (v - mean) / std).collect();

    Dataset::new(
        format!("synthetic-qreg-q{q}"),
        x,
        y,
        Task::Regression,
        (0..n_train).collect(),
        (n_train..n).collect(),
        ScalingDescriptor::None,
        Some(seed),
    )
}

/// Principal-component transform fit on the given rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// `k x d`, rows are components; largest-magnitude entry is positive.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Center on the row mean and project onto the top-`k` right singular
/// vectors.
pub fn pca_fit(x: ArrayView2<'_, f64>, k: usize) -> Result<PcaTransform> {
    let (n, d) = (x.nrows(), x.ncols());
    if k == 0 || k > d {
        return Err(Error::invalid_argument(format!(
            "cannot keep {k} of {d} components"
        )));
    }
    if n < 2 {
        return Err(Error::invalid_argument("need at least two rows"));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| x.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let centered = nalgebra::DMatrix::from_fn(n, d, |i, j| x[[i, j]] - mean[j]);
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::InvalidState("svd did not produce V^T".into()))?;

    // Singular values arrive sorted descending.
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut components = Vec::with_capacity(k);
    let mut evr = Vec::with_capacity(k);
    for c in 0..k {
        let mut row: Vec<f64> = (0..d).map(|j| v_t[(c, j)]).collect();
        // Deterministic sign: largest-magnitude entry positive.
        let lead = row
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if row[lead] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(row);
        let s = svd.singular_values[c];
        evr.push(if total > 0.0 { s * s / total } else { 0.0 });
    }
    Ok(PcaTransform {
        mean,
        components,
        explained_variance_ratio: evr,
    })
}

pub fn pca_apply(t: &PcaTransform, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let k = t.components.len();
    Array2::from_shape_fn((x.nrows(), k), |(i, c)| {
        t.components[c]
            .iter()
            .enumerate()
            .map(|(j, w)| w * (x[[i, j]] - t.mean[j]))
            .sum()
    })
}

/// Fit and apply in one step.
pub fn pca_reduce(x: ArrayView2<'_, f64>, k: usize) -> Result<(Array2<f64>, PcaTransform)> {
    let t = pca_fit(x, k)?;
    let reduced = pca_apply(&t, x);
    Ok((reduced, t))
}

/// Deterministic `k`-fold plan over `n` samples.
pub fn fixed_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    FoldPlan::new(n, k, seed)
}

fn minmax_fit(x: ArrayView2<'_, f64>, train_idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = x.ncols();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for &i in train_idx {
        for j in 0..d {
            min[j] = min[j].min(x[[i, j]]);
            max[j] = max[j].max(x[[i, j]]);
        }
    }
    (min, max)
}

fn minmax_apply(x: &mut Array2<f64>, min: &[f64], max: &[f64]) {
    for mut row in x.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            let span = max[j] - min[j];
            *v = if span > 0.0 { (*v - min[j]) / span } else { 0.0 };
        }
    }
}

fn standard_fit(x: ArrayView2<'_, f64>, train_idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = x.ncols();
    let n = train_idx.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in train_idx {
        for j in 0..d {
            mean[j] += x[[i, j]];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; d];
    for &i in train_idx {
        for j in 0..d {
            let dlt = x[[i, j]] - mean[j];
            std[j] += dlt * dlt;
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    (mean, std)
}

fn standard_apply(x: &mut Array2<f64>, mean: &[f64], std: &[f64]) {
    for mut row in x.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean[j]) / std[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy_csv() -> &'static str {
        "a,b,target\n1.0,2.0,3.0\n4.0,5.0,6.0\n7.0,8.0,9.0\n"
    }

    #[test]
    fn load_csv_toy() {
        let ds = load_csv_reader(toy_csv().as_bytes(), "target", Task::Regression, "toy").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.num_features(), 2);
        let tv = ds.train_view();
        assert_eq!(tv.y, vec![3.0, 6.0, 9.0]);
        assert_eq!(tv.x[[2, 1]], 8.0);
    }

    #[test]
    fn load_csv_missing_target_names_column() {
        let err = load_csv_reader(toy_csv().as_bytes(), "price", Task::Regression, "toy")
            .unwrap_err()
            .to_string();
        assert!(err.contains("price"), "{err}");
    }

    #[test]
    fn load_csv_non_numeric_cell_reports_location() {
        let text = "a,b,target\n1.0,oops,3.0\n";
        let err = load_csv_reader(text.as_bytes(), "target", Task::Regression, "toy")
            .unwrap_err()
            .to_string();
        assert!(err.contains("oops") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn load_csv_rejects_nan_rows_with_line_numbers() {
        let text = "a,b,target\n1.0,2.0,3.0\nNaN,5.0,6.0\n";
        let err = load_csv_reader(text.as_bytes(), "target", Task::Regression, "toy")
            .unwrap_err()
            .to_string();
        assert!(err.contains('3'), "{err}");
    }

    fn synthetic_california_csv(rows: usize) -> String {
        let mut s = String::from("f0,f1,f2,f3,f4,f5,f6,f7,target\n");
        let mut state = 123456789u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) * 10.0
        };
        for _ in 0..rows {
            let vals: Vec<String> = (0..9).map(|_| format!("{:.6}", next())).collect();
            s.push_str(&vals.join(","));
            s.push('\n');
        }
        s
    }

    #[test]
    fn prepare_california_shapes_and_scaling() {
        let csv = synthetic_california_csv(1200);
        let raw = load_csv_reader(csv.as_bytes(), "target", Task::Regression, "california-raw")
            .unwrap();
        let ds = prepare_california(&raw, 11).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.num_features(), 8);
        assert_eq!(ds.train_len(), 700);
        assert_eq!(ds.test_len(), 300);

        let tv = ds.train_view();
        for v in tv.x.iter() {
            assert!((0.0..=1.0).contains(v), "train features min-max scaled");
        }

        // Same seed, same subsample.
        let again = prepare_california(&raw, 11).unwrap();
        assert_eq!(ds.train_view().x, again.train_view().x);
        let different = prepare_california(&raw, 12).unwrap();
        assert_ne!(ds.train_view().x, different.train_view().x);

        // Too few rows.
        let small = load_csv_reader(
            synthetic_california_csv(50).as_bytes(),
            "target",
            Task::Regression,
            "small",
        )
        .unwrap();
        assert!(prepare_california(&small, 1).is_err());
    }

    #[test]
    fn two_curves_shapes_and_standardization() {
        let ds = make_two_curves(&TwoCurvesParams::default(), 5).unwrap();
        assert_eq!(ds.len(), 300);
        assert_eq!(ds.num_features(), 10);
        assert_eq!(ds.train_len(), 240);
        assert_eq!(ds.test_len(), 60);
        let pos = ds.y.iter().filter(|&&v| v > 0.0).count();
        assert_eq!(pos, 150, "balanced labels");

        let tv = ds.train_view();
        for j in 0..10 {
            let col = tv.x.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() <= 1e-9, "train mean {mean}");
            assert!((var - 1.0).abs() <= 1e-9, "train variance {var}");
        }

        let again = make_two_curves(&TwoCurvesParams::default(), 5).unwrap();
        assert_eq!(ds.train_view().x, again.train_view().x);
    }

    /// Plain logistic-regression fit by gradient descent; sanity oracle.
    fn logistic_test_accuracy(ds: &Dataset) -> f64 {
        let tv = ds.train_view();
        let d = tv.x.ncols();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        for _ in 0..500 {
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for (i, row) in tv.x.rows().into_iter().enumerate() {
                let z: f64 = row.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() + b;
                let p = 1.0 / (1.0 + (-z).exp());
                let t = if tv.y[i] > 0.0 { 1.0 } else { 0.0 };
                let g = p - t;
                for (j, x) in row.iter().enumerate() {
                    gw[j] += g * x;
                }
                gb += g;
            }
            let n = tv.x.nrows() as f64;
            for j in 0..d {
                w[j] -= 0.5 * gw[j] / n;
            }
            b -= 0.5 * gb / n;
        }
        let (xt, yt) = ds.test_xy();
        let mut hits = 0;
        for (i, row) in xt.rows().into_iter().enumerate() {
            let z: f64 = row.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() + b;
            let pred = if z >= 0.0 { 1.0 } else { -1.0 };
            if pred == yt[i] {
                hits += 1;
            }
        }
        hits as f64 / yt.len() as f64
    }

    #[test]
    fn two_curves_large_separation_is_linearly_separable() {
        // Coordinate scale sigma is a few units; 10 sigma apart is trivial.
        let params = TwoCurvesParams {
            separation: 40.0,
            ..TwoCurvesParams::default()
        };
        let ds = make_two_curves(&params, 7).unwrap();
        assert_eq!(logistic_test_accuracy(&ds), 1.0);
    }

    #[test]
    fn synthetic_qreg_contract() {
        let ds = make_synthetic_quantum_regression(100, 100, 4, 13).unwrap();
        assert_eq!(ds.train_len(), 100);
        assert_eq!(ds.test_len(), 100);
        assert_eq!(ds.num_features(), 4);
        let tv = ds.train_view();
        for v in tv.x.iter() {
            assert!((-1.0..=1.0).contains(v));
        }
        let mean = tv.y.iter().sum::<f64>() / tv.y.len() as f64;
        assert!(mean.abs() < 1e-9, "standardized labels");

        let again = make_synthetic_quantum_regression(100, 100, 4, 13).unwrap();
        let ty = again.train_view().y;
        assert!(tv.y.iter().zip(&ty).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    /// Jacobi eigendecomposition of a symmetric matrix; test oracle.
    fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
        let n = a.nrows();
        let mut m = a.clone();
        let mut v = Array2::from_shape_fn((n, n), |(i, j)| f64::from(u8::from(i == j)));
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += m[[p, q]] * m[[p, q]];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if m[[p, q]].abs() < 1e-18 {
                        continue;
                    }
                    let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[[k, p]];
                        let mkq = m[[k, q]];
                        m[[k, p]] = c * mkp - s * mkq;
                        m[[k, q]] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[[p, k]];
                        let mqk = m[[q, k]];
                        m[[p, k]] = c * mpk - s * mqk;
                        m[[q, k]] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[[k, p]];
                        let vkq = v[[k, q]];
                        v[[k, p]] = c * vkp - s * vkq;
                        v[[k, q]] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let eig: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
        (eig, v)
    }

    #[test]
    fn pca_matches_covariance_eigendecomposition() {
        let mut state = 987654321u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let x = Array2::from_shape_fn((10, 6), |_| next());
        let k = 3;
        let (proj, t) = pca_reduce(x.view(), k).unwrap();

        // Oracle: eigendecomposition of the covariance matrix.
        let n = x.nrows();
        let mean: Vec<f64> = (0..6).map(|j| x.column(j).sum() / n as f64).collect();
        let mut cov = Array2::zeros((6, 6));
        for i in 0..n {
            for a in 0..6 {
                for b in 0..6 {
                    cov[[a, b]] += (x[[i, a]] - mean[a]) * (x[[i, b]] - mean[b]);
                }
            }
        }
        cov.mapv_inplace(|v| v / (n as f64 - 1.0));
        let (eig, vecs) = jacobi_eigen(&cov);
        let mut order: Vec<usize> = (0..6).collect();
        order.sort_by(|&a, &b| eig[b].partial_cmp(&eig[a]).unwrap());

        for c in 0..k {
            let col = order[c];
            let mut oracle: Vec<f64> = (0..6).map(|j| vecs[[j, col]]).collect();
            let lead = oracle
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if oracle[lead] < 0.0 {
                oracle.iter_mut().for_each(|v| *v = -*v);
            }
            for j in 0..6 {
                assert!(
                    (t.components[c][j] - oracle[j]).abs() < 1e-9,
                    "component {c} entry {j}: {} vs {}",
                    t.components[c][j],
                    oracle[j]
                );
            }
        }

        // Projection consistency.
        let again = pca_apply(&t, x.view());
        assert_eq!(proj, again);
    }

    #[test]
    fn pca_edge_cases() {
        // Orthogonal k-dimensional data: projection is a rotation.
        let x = ndarray::array![
            [1.0, 0.0],
            [-1.0, 0.0],
            [0.0, 2.0],
            [0.0, -2.0],
        ];
        let (proj, t) = pca_reduce(x.view(), 2).unwrap();
        // Reconstruction from k = d components is exact.
        for (i, row) in proj.rows().into_iter().enumerate() {
            for j in 0..2 {
                let recon: f64 = (0..2).map(|c| row[c] * t.components[c][j]).sum::<f64>() + t.mean[j];
                assert!((recon - x[[i, j]]).abs() < 1e-9);
            }
        }

        // Rank-1 data, k = 1: all variance explained.
        let x = ndarray::array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [-1.0, -2.0]];
        let (_, t) = pca_reduce(x.view(), 1).unwrap();
        assert!((t.explained_variance_ratio[0] - 1.0).abs() < 1e-12);

        assert!(pca_reduce(x.view(), 3).is_err());
    }

    #[test]
    fn fixed_folds_examples() {
        let p = fixed_folds(700, 5, 1).unwrap();
        assert_eq!(p.fold_sizes(), vec![140; 5]);
        assert!(fixed_folds(4, 5, 1).is_err());
        assert_eq!(fixed_folds(20, 5, 2).unwrap(), fixed_folds(20, 5, 2).unwrap());
    }

    #[test]
    fn dataset_counts_test_reads() {
        let ds = make_synthetic_quantum_regression(10, 10, 2, 3).unwrap();
        assert_eq!(ds.test_reads(), 0);
        let _ = ds.train_view();
        assert_eq!(ds.test_reads(), 0, "train view does not touch test rows");
        let _ = ds.test_xy();
        assert_eq!(ds.test_reads(), 1);
    }

    #[test]
    fn dataset_split_validation() {
        let x = Array2::zeros((4, 2));
        let y = vec![0.0; 4];
        assert!(Dataset::new(
            "bad",
            x.clone(),
            y.clone(),
            Task::Regression,
            vec![0, 1],
            vec![1, 2, 3],
            ScalingDescriptor::None,
            None,
        )
        .is_err());
        assert!(Dataset::new(
            "bad",
            x,
            y,
            Task::Regression,
            vec![0, 1],
            vec![2],
            ScalingDescriptor::None,
            None,
        )
        .is_err());
    }

    #[test]
    fn load_csv_from_file_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(toy_csv().as_bytes()).unwrap();
        drop(f);
        let ds = load_csv(&path, "target", Task::Regression).unwrap();
        assert_eq!(ds.len(), 3);
    }
}
