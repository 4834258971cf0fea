//! Projected-quantum-kernel features and the Gaussian outer kernel.
//!
//! A circuit maps each data point to the `3q` single-qubit Pauli
//! expectations of its encoded state, ordered `(X_0..X_{q-1}, Y_0.., Z_0..)`.
//! The kernel between two points is `exp(-gamma * ||f - f'||^2)` on those
//! features. Features are cached in memory and optionally on disk, keyed by
//! the canonical circuit string, so kernel re-tuning never re-runs the
//! simulator.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::circuit::{DataCircuit, ExpandOptions};
use crate::error::{Error, Result};
use crate::simulator;

/// Feature-block format version.
pub const CACHE_FORMAT_VERSION: u32 = 1;

const CACHE_MAGIC: &[u8; 4] = b"PQKF";

/// `N x 3q` matrix of single-qubit Pauli expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct PqkFeatureMatrix {
    pub values: Array2<f64>,
    pub num_qubits: usize,
    pub circuit_key: String,
}

impl PqkFeatureMatrix {
    pub fn num_rows(&self) -> usize {
        self.values.nrows()
    }
}

/// Gaussian kernel matrix between two feature sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: Array2<f64>,
    pub gamma: f64,
}

/// Evaluate all `3q` Pauli expectations of `circuit` for every row of `x`.
pub fn compute_features(
    circuit: &dyn DataCircuit,
    x: ArrayView2<'_, f64>,
    opts: &ExpandOptions,
) -> Result<PqkFeatureMatrix> {
    let q = circuit.num_qubits();
    if x.ncols() != q {
        return Err(Error::invalid_argument(format!(
            "data has {} features but circuit encodes {q} qubits",
            x.ncols()
        )));
    }
    let rows: Vec<Vec<f64>> = x
        .rows()
        .into_iter()
        .map(|r| r.to_vec())
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|point| -> Result<Vec<f64>> {
            let gates = circuit.expand(&point, opts)?;
            let mut feats = simulator::run_and_measure(&gates, q)?;
            for v in &mut feats {
                *v = v.clamp(-1.0, 1.0);
            }
            Ok(feats)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Array2::zeros((x.nrows(), 3 * q));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    Ok(PqkFeatureMatrix {
        values,
        num_qubits: q,
        circuit_key: circuit.canonical_string(),
    })
}

/// `K_ij = exp(-gamma * ||F_i - G_j||^2)` on raw feature rows.
pub fn gram_rows(
    f: ArrayView2<'_, f64>,
    g: ArrayView2<'_, f64>,
    gamma: f64,
) -> Result<Array2<f64>> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::invalid_argument(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    if f.ncols() != g.ncols() {
        return Err(Error::invalid_argument(format!(
            "feature dimension mismatch: {} vs {}",
            f.ncols(),
            g.ncols()
        )));
    }
    let mut k = Array2::zeros((f.nrows(), g.nrows()));
    for (i, fi) in f.rows().into_iter().enumerate() {
        for (j, gj) in g.rows().into_iter().enumerate() {
            let d2: f64 = fi
                .iter()
                .zip(gj.iter())
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum();
            k[[i, j]] = (-gamma * d2).exp();
        }
    }
    Ok(k)
}

/// Typed wrapper over [`gram_rows`] for PQK feature matrices.
pub fn gram(f: &PqkFeatureMatrix, g: &PqkFeatureMatrix, gamma: f64) -> Result<GramMatrix> {
    let values = gram_rows(f.values.view(), g.values.view(), gamma)?;
    Ok(GramMatrix { values, gamma })
}

/// Serialize a feature matrix into the cache block format:
/// magic, version, q, cols, rows, circuit-key length, key bytes, then the
/// row-major little-endian f64 payload.
pub fn encode_feature_block(m: &PqkFeatureMatrix) -> Vec<u8> {
    let rows = m.values.nrows() as u64;
    let cols = m.values.ncols() as u32;
    let key = m.circuit_key.as_bytes();
    let mut out = Vec::with_capacity(28 + key.len() + m.values.len() * 8);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.num_qubits as u32).to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&(key.len() as u32).to_le_bytes());
    out.extend_from_slice(key);
    for v in m.values.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::CacheUnavailable(format!("truncated block: {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn take_u32(bytes: &mut &[u8], what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, 4, what)?.try_into().unwrap()))
}

/// Decode a feature block, validating the header and every entry.
pub fn decode_feature_block(mut bytes: &[u8]) -> Result<PqkFeatureMatrix> {
    let magic = take(&mut bytes, 4, "magic")?;
    if magic != CACHE_MAGIC {
        return Err(Error::CacheUnavailable("bad magic".into()));
    }
    let version = take_u32(&mut bytes, "version")?;
    if version != CACHE_FORMAT_VERSION {
        return Err(Error::CacheUnavailable(format!(
            "unsupported format version {version}"
        )));
    }
    let q = take_u32(&mut bytes, "qubits")? as usize;
    let cols = take_u32(&mut bytes, "cols")? as usize;
    let rows = u64::from_le_bytes(take(&mut bytes, 8, "rows")?.try_into().unwrap()) as usize;
    let key_len = take_u32(&mut bytes, "key length")? as usize;
    if q == 0 || q > simulator::MAX_QUBITS || cols != 3 * q {
        return Err(Error::CacheUnavailable(format!(
            "inconsistent header: q={q}, cols={cols}"
        )));
    }
    let payload_len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::CacheUnavailable("payload size overflow".into()))?;
    let key = take(&mut bytes, key_len, "circuit key")?;
    let circuit_key = std::str::from_utf8(key)
        .map_err(|_| Error::CacheUnavailable("circuit key is not utf-8".into()))?
        .to_string();
    let payload = take(&mut bytes, payload_len, "payload")?;
    if !bytes.is_empty() {
        return Err(Error::CacheUnavailable("trailing bytes".into()));
    }
    let mut values = Array2::zeros((rows, cols));
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() || v.abs() > 1.0 + 1e-9 {
            return Err(Error::CacheUnavailable(format!(
                "entry {i} out of range: {v}"
            )));
        }
        values[[i / cols, i % cols]] = v;
    }
    Ok(PqkFeatureMatrix {
        values,
        num_qubits: q,
        circuit_key,
    })
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Default)]
struct CacheStats {
    hits: AtomicU64,
    misses: AtomicU64,
    disk_errors: AtomicU64,
    computed_points: AtomicU64,
}

/// Feature store: bounded in-memory LRU with an optional disk tier.
///
/// Concurrent readers are cheap; a get-or-compute race may duplicate work
/// but never returns partial rows, and disk writes go through a temp file
/// plus atomic rename.
pub struct FeatureCache {
    dir: Option<PathBuf>,
    capacity: usize,
    mem: Mutex<LruMap>,
    stats: CacheStats,
}

struct LruMap {
    entries: HashMap<String, (Arc<PqkFeatureMatrix>, u64)>,
    tick: u64,
}

impl FeatureCache {
    pub fn in_memory(capacity: usize) -> Self {
        FeatureCache {
            dir: None,
            capacity: capacity.max(1),
            mem: Mutex::new(LruMap {
                entries: HashMap::new(),
                tick: 0,
            }),
            stats: CacheStats::default(),
        }
    }

    pub fn with_dir(dir: impl Into<PathBuf>, capacity: usize) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut cache = FeatureCache::in_memory(capacity);
        cache.dir = Some(dir);
        Ok(cache)
    }

    pub fn hits(&self) -> u64 {
        self.stats.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.stats.misses.load(Ordering::Relaxed)
    }

    pub fn disk_errors(&self) -> u64 {
        self.stats.disk_errors.load(Ordering::Relaxed)
    }

    /// Data points this cache actually pushed through the simulator.
    pub fn computed_points(&self) -> u64 {
        self.stats.computed_points.load(Ordering::Relaxed)
    }

    fn block_path(&self, dataset_id: &str, circuit_key: &str) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let hash = fnv1a64(circuit_key.as_bytes());
        let safe_id: String = dataset_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        Some(dir.join(format!("{safe_id}__{hash:016x}.pqkf")))
    }

    fn mem_get(&self, key: &str) -> Option<Arc<PqkFeatureMatrix>> {
        let mut mem = self.mem.lock().unwrap();
        mem.tick += 1;
        let tick = mem.tick;
        mem.entries.get_mut(key).map(|slot| {
            slot.1 = tick;
            Arc::clone(&slot.0)
        })
    }

    fn mem_put(&self, key: String, value: Arc<PqkFeatureMatrix>) {
        let mut mem = self.mem.lock().unwrap();
        mem.tick += 1;
        let tick = mem.tick;
        mem.entries.insert(key, (value, tick));
        while mem.entries.len() > self.capacity {
            let oldest = mem
                .entries
                .iter()
                .min_by_key(|(_, (_, t))| *t)
                .map(|(k, _)| k.clone())
                .expect("non-empty map");
            mem.entries.remove(&oldest);
        }
    }

    fn disk_load(&self, dataset_id: &str, circuit_key: &str, n_rows: usize) -> Option<PqkFeatureMatrix> {
        let path = self.block_path(dataset_id, circuit_key)?;
        let bytes = std::fs::read(&path).ok()?;
        match decode_feature_block(&bytes) {
            // Hash collisions and stale row counts are treated as misses.
            Ok(m) if m.circuit_key == circuit_key && m.num_rows() == n_rows => Some(m),
            Ok(_) => None,
            Err(_) => {
                self.stats.disk_errors.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    fn disk_store(&self, dataset_id: &str, m: &PqkFeatureMatrix) {
        let Some(path) = self.block_path(dataset_id, &m.circuit_key) else {
            return;
        };
        if let Err(_e) = write_atomically(&path, &encode_feature_block(m)) {
            self.stats.disk_errors.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Fetch features for `(circuit, dataset_id)`, computing on miss.
    pub fn get_or_compute(
        &self,
        circuit: &dyn DataCircuit,
        dataset_id: &str,
        x: ArrayView2<'_, f64>,
        opts: &ExpandOptions,
    ) -> Result<Arc<PqkFeatureMatrix>> {
        let circuit_key = circuit.canonical_string();
        let mem_key = format!("{dataset_id}\u{1f}{circuit_key}");
        if let Some(hit) = self.mem_get(&mem_key) {
            self.stats.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        if let Some(block) = self.disk_load(dataset_id, &circuit_key, x.nrows()) {
            self.stats.hits.fetch_add(1, Ordering::Relaxed);
            let arc = Arc::new(block);
            self.mem_put(mem_key, Arc::clone(&arc));
            return Ok(arc);
        }
        self.stats.misses.fetch_add(1, Ordering::Relaxed);
        let computed = Arc::new(compute_features(circuit, x, opts)?);
        self.stats
            .computed_points
            .fetch_add(x.nrows() as u64, Ordering::Relaxed);
        self.disk_store(dataset_id, &computed);
        self.mem_put(mem_key, Arc::clone(&computed));
        Ok(computed)
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".tmp-{}-{:x}",
        std::process::id(),
        fnv1a64(path.as_os_str().as_encoded_bytes())
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{EncodingCircuit, LayerAction};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts() -> ExpandOptions {
        ExpandOptions::default()
    }

    #[test]
    fn empty_circuit_features_are_z_one() {
        let c = EncodingCircuit::new(3).unwrap();
        let x = array![[0.1, 0.2, 0.3], [0.5, 0.5, 0.5]];
        let f = compute_features(&c, x.view(), &opts()).unwrap();
        assert_eq!(f.values.dim(), (2, 9));
        for i in 0..2 {
            for k in 0..3 {
                assert!(f.values[[i, k]].abs() < 1e-12, "X");
                assert!(f.values[[i, 3 + k]].abs() < 1e-12, "Y");
                assert!((f.values[[i, 6 + k]] - 1.0).abs() < 1e-12, "Z");
            }
        }
    }

    #[test]
    fn hadamard_features_are_x_one() {
        let c = EncodingCircuit::from_layers(2, vec![LayerAction::Hadamard]).unwrap();
        let x = array![[0.7, -0.3]];
        let f = compute_features(&c, x.view(), &opts()).unwrap();
        for k in 0..2 {
            assert!((f.values[[0, k]] - 1.0).abs() < 1e-12);
            assert!(f.values[[0, 2 + k]].abs() < 1e-12);
            assert!(f.values[[0, 4 + k]].abs() < 1e-12);
        }
    }

    #[test]
    fn rx_data_matches_dense_oracle() {
        // RX(pi * 0.5)|0> ; oracle route goes through the dense matrix.
        let c = EncodingCircuit::from_layers(1, vec![LayerAction::RxData]).unwrap();
        let x = array![[0.5]];
        let f = compute_features(&c, x.view(), &opts()).unwrap();
        assert!(f.values[[0, 0]].abs() < 1e-12);
        assert!((f.values[[0, 1]] - (-1.0)).abs() < 1e-12);
        assert!(f.values[[0, 2]].abs() < 1e-12);

        let gates = c.expand(&[0.5], &opts()).unwrap();
        let u = simulator::dense_unitary_oracle(&gates, 1).unwrap();
        let state = simulator::dense_apply(&u, &[num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 0.0)]);
        let z = state[0].norm_sqr() - state[1].norm_sqr();
        assert!((z - f.values[[0, 2]]).abs() < 1e-12);
    }

    #[test]
    fn gram_examples() {
        let f = PqkFeatureMatrix {
            values: array![[0.0, 0.0], [1.0, 0.0]],
            num_qubits: 1,
            circuit_key: "t".into(),
        };
        let k = gram(&f, &f, 1.0).unwrap();
        assert!((k.values[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((k.values[[1, 1]] - 1.0).abs() < 1e-15);
        // ||F_0 - F_1||^2 = 1 -> e^{-1}
        assert!((k.values[[0, 1]] - (-1.0f64).exp()).abs() < 1e-15);

        let k = gram(&f, &f, 1e6).unwrap();
        assert!(k.values[[0, 1]] < 1e-300);

        assert!(gram(&f, &f, 0.0).is_err());
        assert!(gram(&f, &f, -1.0).is_err());
    }

    #[test]
    fn gram_invariant_under_joint_column_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use rand::Rng;
        let a = Array2::from_shape_fn((5, 6), |_| rng.random_range(-1.0..1.0));
        let b = Array2::from_shape_fn((4, 6), |_| rng.random_range(-1.0..1.0));
        let perm = [3, 0, 5, 1, 4, 2];
        let ap = Array2::from_shape_fn((5, 6), |(i, j)| a[[i, perm[j]]]);
        let bp = Array2::from_shape_fn((4, 6), |(i, j)| b[[i, perm[j]]]);
        let k1 = gram_rows(a.view(), b.view(), 0.7).unwrap();
        let k2 = gram_rows(ap.view(), bp.view(), 0.7).unwrap();
        assert!(k1.iter().zip(k2.iter()).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn feature_block_round_trip() {
        let c = EncodingCircuit::from_layers(2, vec![LayerAction::RyData]).unwrap();
        let x = array![[0.25, 0.75], [0.1, 0.9], [-0.4, 0.2]];
        let f = compute_features(&c, x.view(), &opts()).unwrap();
        let bytes = encode_feature_block(&f);
        let back = decode_feature_block(&bytes).unwrap();
        assert_eq!(back, f);

        assert!(decode_feature_block(b"garbage").is_err());
        assert!(decode_feature_block(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_feature_block(&bad).is_err());
    }

    #[test]
    fn cache_hit_and_miss_counters() {
        let cache = FeatureCache::in_memory(16);
        let c = EncodingCircuit::from_layers(2, vec![LayerAction::RxData]).unwrap();
        let other = EncodingCircuit::from_layers(2, vec![LayerAction::RyData]).unwrap();
        let x = array![[0.3, 0.9], [0.1, 0.4]];

        let f1 = cache.get_or_compute(&c, "ds", x.view(), &opts()).unwrap();
        assert_eq!(cache.misses(), 1);
        assert_eq!(cache.computed_points(), 2, "one simulator call per point");

        // Same key: hit, no new simulation even when gamma changes downstream.
        let f2 = cache.get_or_compute(&c, "ds", x.view(), &opts()).unwrap();
        assert_eq!(cache.hits(), 1);
        assert_eq!(cache.computed_points(), 2);
        assert_eq!(f1.values, f2.values);
        let _ = gram(&f1, &f2, 0.5).unwrap();
        let _ = gram(&f1, &f2, 2.0).unwrap();
        assert_eq!(cache.computed_points(), 2);

        let _ = cache.get_or_compute(&other, "ds", x.view(), &opts()).unwrap();
        assert_eq!(cache.misses(), 2);
        assert_eq!(cache.computed_points(), 4);
    }

    #[test]
    fn disk_cache_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let c = EncodingCircuit::from_layers(3, vec![LayerAction::RzData, LayerAction::Cx]).unwrap();
        let x = array![[0.2, 0.4, 0.6], [0.9, 0.8, 0.7]];

        let written = {
            let cache = FeatureCache::with_dir(dir.path(), 4).unwrap();
            cache.get_or_compute(&c, "ds", x.view(), &opts()).unwrap()
        };

        // Fresh instance, same directory: served from disk, zero simulation.
        let cache = FeatureCache::with_dir(dir.path(), 4).unwrap();
        let loaded = cache.get_or_compute(&c, "ds", x.view(), &opts()).unwrap();
        assert_eq!(cache.computed_points(), 0);
        assert_eq!(cache.hits(), 1);
        assert_eq!(loaded.values, written.values);
        assert!(loaded
            .values
            .iter()
            .zip(written.values.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corrupted_disk_block_falls_back_to_compute() {
        let dir = tempfile::tempdir().unwrap();
        let c = EncodingCircuit::from_layers(1, vec![LayerAction::RxData]).unwrap();
        let x = array![[0.5]];
        {
            let cache = FeatureCache::with_dir(dir.path(), 4).unwrap();
            cache.get_or_compute(&c, "ds", x.view(), &opts()).unwrap();
        }
        // Clobber every block in the directory.
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            std::fs::write(entry.unwrap().path(), b"corrupt").unwrap();
        }
        let cache = FeatureCache::with_dir(dir.path(), 4).unwrap();
        let f = cache.get_or_compute(&c, "ds", x.view(), &opts()).unwrap();
        assert_eq!(cache.misses(), 1);
        assert_eq!(cache.disk_errors(), 1);
        assert!((f.values[[0, 1]] - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn lru_evicts_oldest_entry() {
        let cache = FeatureCache::in_memory(2);
        let x = array![[0.5]];
        let c1 = EncodingCircuit::from_layers(1, vec![LayerAction::RxData]).unwrap();
        let c2 = EncodingCircuit::from_layers(1, vec![LayerAction::RyData]).unwrap();
        let c3 = EncodingCircuit::from_layers(1, vec![LayerAction::RzData]).unwrap();
        cache.get_or_compute(&c1, "ds", x.view(), &opts()).unwrap();
        cache.get_or_compute(&c2, "ds", x.view(), &opts()).unwrap();
        cache.get_or_compute(&c1, "ds", x.view(), &opts()).unwrap(); // refresh c1
        cache.get_or_compute(&c3, "ds", x.view(), &opts()).unwrap(); // evicts c2
        assert_eq!(cache.hits(), 1);
        cache.get_or_compute(&c1, "ds", x.view(), &opts()).unwrap();
        assert_eq!(cache.hits(), 2);
        cache.get_or_compute(&c2, "ds", x.view(), &opts()).unwrap();
        assert_eq!(cache.misses(), 4, "c2 was evicted");
    }
}
