//! Dense complex statevector simulation.
//!
//! Amplitudes are indexed so that qubit `k` is bit `k` of the basis index:
//! amplitude `i` belongs to the basis state with qubit `k` in state
//! `(i >> k) & 1`. Gates are applied in place with stride arithmetic; the
//! full-matrix route in [`dense_unitary_oracle`] exists only as a
//! brute-force test oracle.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the in-place path accepts.
pub const MAX_QUBITS: usize = 16;

/// Largest register the dense test oracle accepts.
pub const MAX_ORACLE_QUBITS: usize = 6;

/// Bound on the imaginary residue of a Pauli expectation value.
pub const EXPECTATION_IMAG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
}

/// Gate kinds available to the simulator (the Table-1 gate set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    X,
    Y,
    Z,
    H,
    RX,
    RY,
    RZ,
    CX,
    CY,
    CZ,
    CRX,
    CRY,
    CRZ,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::CRX | GateKind::CRY | GateKind::CRZ
        )
    }

    pub fn is_controlled(self) -> bool {
        matches!(
            self,
            GateKind::CX | GateKind::CY | GateKind::CZ | GateKind::CRX | GateKind::CRY | GateKind::CRZ
        )
    }
}

/// One concrete gate application.
///
/// `control` is present iff the kind is controlled; `angle` is meaningful
/// only for rotation kinds. Rotations follow `R_a(theta) = exp(-i theta P_a / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub angle: f64,
    pub target: usize,
    pub control: Option<usize>,
}

impl GateOp {
    pub fn single(kind: GateKind, target: usize) -> Self {
        debug_assert!(!kind.is_controlled() && !kind.is_rotation());
        GateOp {
            kind,
            angle: 0.0,
            target,
            control: None,
        }
    }

    pub fn rotation(kind: GateKind, angle: f64, target: usize) -> Self {
        debug_assert!(kind.is_rotation() && !kind.is_controlled());
        GateOp {
            kind,
            angle,
            target,
            control: None,
        }
    }

    pub fn controlled(kind: GateKind, control: usize, target: usize) -> Self {
        debug_assert!(kind.is_controlled() && !kind.is_rotation());
        GateOp {
            kind,
            angle: 0.0,
            target,
            control: Some(control),
        }
    }

    pub fn controlled_rotation(kind: GateKind, angle: f64, control: usize, target: usize) -> Self {
        debug_assert!(kind.is_controlled() && kind.is_rotation());
        GateOp {
            kind,
            angle,
            target,
            control: Some(control),
        }
    }

    /// The 2x2 matrix acting on the target qubit, row-major.
    pub fn target_matrix(&self) -> [Complex64; 4] {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match self.kind {
            GateKind::X | GateKind::CX => [z, one, one, z],
            GateKind::Y | GateKind::CY => [
                z,
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                z,
            ],
            GateKind::Z | GateKind::CZ => [one, z, z, -one],
            GateKind::H => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [s, s, s, -s]
            }
            GateKind::RX | GateKind::CRX => {
                let (c, s) = half_angle(self.angle);
                [
                    Complex64::new(c, 0.0),
                    Complex64::new(0.0, -s),
                    Complex64::new(0.0, -s),
                    Complex64::new(c, 0.0),
                ]
            }
            GateKind::RY | GateKind::CRY => {
                let (c, s) = half_angle(self.angle);
                [
                    Complex64::new(c, 0.0),
                    Complex64::new(-s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(c, 0.0),
                ]
            }
            GateKind::RZ | GateKind::CRZ => {
                let (c, s) = half_angle(self.angle);
                [
                    Complex64::new(c, -s),
                    z,
                    z,
                    Complex64::new(c, s),
                ]
            }
        }
    }
}

fn half_angle(theta: f64) -> (f64, f64) {
    let h = theta / 2.0;
    (h.cos(), h.sin())
}

/// Pure state of a `q`-qubit register: `2^q` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_qubit(&self, k: usize, what: &str) -> Result<()> {
        if k >= self.num_qubits {
            return Err(Error::invalid_argument(format!(
                "{what} qubit {k} out of range for {}-qubit register",
                self.num_qubits
            )));
        }
        Ok(())
    }

    /// Apply a gate in place.
    pub fn apply_gate(&mut self, gate: &GateOp) -> Result<()> {
        self.check_qubit(gate.target, "target")?;
        match (gate.kind.is_controlled(), gate.control) {
            (true, Some(c)) => {
                self.check_qubit(c, "control")?;
                if c == gate.target {
                    return Err(Error::invalid_argument(
                        "control and target must differ".to_string(),
                    ));
                }
            }
            (true, None) => {
                return Err(Error::invalid_argument(format!(
                    "{:?} requires a control qubit",
                    gate.kind
                )))
            }
            (false, Some(_)) => {
                return Err(Error::invalid_argument(format!(
                    "{:?} takes no control qubit",
                    gate.kind
                )))
            }
            (false, None) => {}
        }

        let m = gate.target_matrix();
        let t_mask = 1usize << gate.target;
        match gate.control {
            None => {
                let dim = self.amplitudes.len();
                let mut base = 0usize;
                while base < dim {
                    for low in 0..t_mask {
                        let i0 = base + low;
                        let i1 = i0 | t_mask;
                        let a0 = self.amplitudes[i0];
                        let a1 = self.amplitudes[i1];
                        self.amplitudes[i0] = m[0] * a0 + m[1] * a1;
                        self.amplitudes[i1] = m[2] * a0 + m[3] * a1;
                    }
                    base += t_mask << 1;
                }
            }
            Some(c) => {
                let c_mask = 1usize << c;
                let dim = self.amplitudes.len();
                let mut base = 0usize;
                while base < dim {
                    for low in 0..t_mask {
                        let i0 = base + low;
                        if i0 & c_mask == 0 {
                            continue;
                        }
                        let i1 = i0 | t_mask;
                        let a0 = self.amplitudes[i0];
                        let a1 = self.amplitudes[i1];
                        self.amplitudes[i0] = m[0] * a0 + m[1] * a1;
                        self.amplitudes[i1] = m[2] * a0 + m[3] * a1;
                    }
                    base += t_mask << 1;
                }
            }
        }
        Ok(())
    }

    pub fn apply_all(&mut self, gates: &[GateOp]) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// Expectation value of a single-qubit Pauli observable on qubit `k`.
    ///
    /// The complex accumulator's imaginary residue is asserted below
    /// [`EXPECTATION_IMAG_TOL`] and then dropped.
    pub fn pauli_expectation(&self, pauli: Pauli, k: usize) -> Result<f64> {
        self.check_qubit(k, "observable")?;
        let mask = 1usize << k;
        let mut acc = Complex64::new(0.0, 0.0);
        match pauli {
            Pauli::Z => {
                for (i, a) in self.amplitudes.iter().enumerate() {
                    let sign = if i & mask == 0 { 1.0 } else { -1.0 };
                    acc.re += sign * a.norm_sqr();
                }
            }
            Pauli::X => {
                // <X_k> = sum over pairs conj(a0) a1 + conj(a1) a0
                let dim = self.amplitudes.len();
                let mut base = 0usize;
                while base < dim {
                    for low in 0..mask {
                        let i0 = base + low;
                        let i1 = i0 | mask;
                        let a0 = self.amplitudes[i0];
                        let a1 = self.amplitudes[i1];
                        acc += a0.conj() * a1 + a1.conj() * a0;
                    }
                    base += mask << 1;
                }
            }
            Pauli::Y => {
                // Y|0> = i|1>, Y|1> = -i|0>
                let i_unit = Complex64::new(0.0, 1.0);
                let dim = self.amplitudes.len();
                let mut base = 0usize;
                while base < dim {
                    for low in 0..mask {
                        let i0 = base + low;
                        let i1 = i0 | mask;
                        let a0 = self.amplitudes[i0];
                        let a1 = self.amplitudes[i1];
                        acc += a0.conj() * (-i_unit * a1) + a1.conj() * (i_unit * a0);
                    }
                    base += mask << 1;
                }
            }
        }
        if acc.im.abs() >= EXPECTATION_IMAG_TOL {
            return Err(Error::InvalidState(format!(
                "pauli expectation has imaginary residue {:.3e}",
                acc.im
            )));
        }
        Ok(acc.re)
    }
}

/// Prepare `|0...0>` on `q` qubits.
pub fn init_state(q: usize) -> Result<StateVector> {
    if q == 0 || q > MAX_QUBITS {
        return Err(Error::invalid_argument(format!(
            "qubit count {q} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1usize << q];
    amplitudes[0] = Complex64::new(1.0, 0.0);
    Ok(StateVector {
        amplitudes,
        num_qubits: q,
    })
}

/// Run a gate sequence on `|0...0>` and return all `3q` single-qubit Pauli
/// expectations ordered `(X_0..X_{q-1}, Y_0.., Z_0..)`.
pub fn run_and_measure(gates: &[GateOp], q: usize) -> Result<Vec<f64>> {
    let mut state = init_state(q)?;
    state.apply_all(gates)?;
    let mut out = Vec::with_capacity(3 * q);
    for pauli in Pauli::ALL {
        for k in 0..q {
            out.push(state.pauli_expectation(pauli, k)?);
        }
    }
    Ok(out)
}

/// Explicit `2^q x 2^q` circuit unitary; brute-force oracle for tests.
pub fn dense_unitary_oracle(gates: &[GateOp], q: usize) -> Result<Vec<Vec<Complex64>>> {
    if q == 0 || q > MAX_ORACLE_QUBITS {
        return Err(Error::invalid_argument(format!(
            "dense oracle refuses q={q}; supported range 1..={MAX_ORACLE_QUBITS}"
        )));
    }
    let dim = 1usize << q;
    let mut total = identity(dim);
    for gate in gates {
        let g = dense_gate_matrix(gate, q)?;
        total = mat_mul(&g, &total);
    }
    Ok(total)
}

fn identity(dim: usize) -> Vec<Vec<Complex64>> {
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

fn mat_mul(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let dim = a.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i][k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..dim {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn dense_gate_matrix(gate: &GateOp, q: usize) -> Result<Vec<Vec<Complex64>>> {
    if gate.target >= q || gate.control.is_some_and(|c| c >= q) {
        return Err(Error::invalid_argument(format!(
            "gate {:?} out of range for q={q}",
            gate.kind
        )));
    }
    let dim = 1usize << q;
    let u = gate.target_matrix();
    let t_mask = 1usize << gate.target;
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            // All non-target bits must agree.
            if (i & !t_mask) != (j & !t_mask) {
                continue;
            }
            let ti = usize::from(i & t_mask != 0);
            let tj = usize::from(j & t_mask != 0);
            let apply = match gate.control {
                None => true,
                Some(c) => i & (1 << c) != 0,
            };
            m[i][j] = if apply {
                u[2 * ti + tj]
            } else if ti == tj {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    Ok(m)
}

/// Apply a dense matrix to a state; oracle helper.
pub fn dense_apply(matrix: &[Vec<Complex64>], state: &[Complex64]) -> Vec<Complex64> {
    matrix
        .iter()
        .map(|row| row.iter().zip(state).map(|(m, a)| m * a).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-12;

    fn assert_close(a: Complex64, b: Complex64, tol: f64) {
        assert!(
            (a - b).norm() <= tol,
            "expected {b}, got {a} (|diff| = {})",
            (a - b).norm()
        );
    }

    #[test]
    fn init_state_examples() {
        let s = init_state(1).unwrap();
        assert_eq!(s.amplitudes().len(), 2);
        assert_close(s.amplitudes()[0], Complex64::new(1.0, 0.0), EPS);
        assert_close(s.amplitudes()[1], Complex64::new(0.0, 0.0), EPS);

        let s = init_state(2).unwrap();
        assert_eq!(s.amplitudes().len(), 4);
        assert_close(s.amplitudes()[0], Complex64::new(1.0, 0.0), EPS);

        assert!(init_state(0).is_err());
        assert!(init_state(MAX_QUBITS + 1).is_err());
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = init_state(1).unwrap();
        s.apply_gate(&GateOp::single(GateKind::H, 0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(s.amplitudes()[0], Complex64::new(r, 0.0), EPS);
        assert_close(s.amplitudes()[1], Complex64::new(r, 0.0), EPS);
    }

    #[test]
    fn cnot_truth_table() {
        // |10> here means qubit 0 set; index 1 in the little-endian layout.
        let mut s = init_state(2).unwrap();
        s.apply_gate(&GateOp::single(GateKind::X, 0)).unwrap();
        s.apply_gate(&GateOp::controlled(GateKind::CX, 0, 1)).unwrap();
        assert_close(s.amplitudes()[3], Complex64::new(1.0, 0.0), EPS);
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rz_phase_matches_dense_two_by_two_oracle() {
        // Oracle: exp(-i theta Z / 2) = diag(e^{-i theta/2}, e^{i theta/2}).
        let theta = std::f64::consts::FRAC_PI_2;
        let mut s = init_state(1).unwrap();
        s.apply_gate(&GateOp::rotation(GateKind::RZ, theta, 0)).unwrap();
        let expected = Complex64::from_polar(1.0, -theta / 2.0);
        assert_close(s.amplitudes()[0], expected, EPS);
        assert_close(s.amplitudes()[1], Complex64::new(0.0, 0.0), EPS);
    }

    #[test]
    fn pauli_expectation_examples() {
        let s = init_state(1).unwrap();
        assert!((s.pauli_expectation(Pauli::Z, 0).unwrap() - 1.0).abs() < EPS);
        assert!(s.pauli_expectation(Pauli::Y, 0).unwrap().abs() < EPS);

        let mut plus = init_state(1).unwrap();
        plus.apply_gate(&GateOp::single(GateKind::H, 0)).unwrap();
        assert!((plus.pauli_expectation(Pauli::X, 0).unwrap() - 1.0).abs() < EPS);

        assert!(s.pauli_expectation(Pauli::Z, 1).is_err());
    }

    #[test]
    fn gate_argument_validation() {
        let mut s = init_state(2).unwrap();
        assert!(s.apply_gate(&GateOp::single(GateKind::X, 2)).is_err());
        assert!(s
            .apply_gate(&GateOp {
                kind: GateKind::CX,
                angle: 0.0,
                target: 1,
                control: Some(1),
            })
            .is_err());
        assert!(s
            .apply_gate(&GateOp {
                kind: GateKind::CX,
                angle: 0.0,
                target: 1,
                control: None,
            })
            .is_err());
        assert!(s
            .apply_gate(&GateOp {
                kind: GateKind::X,
                angle: 0.0,
                target: 1,
                control: Some(0),
            })
            .is_err());
    }

    #[test]
    fn dense_oracle_examples() {
        let h = dense_unitary_oracle(&[GateOp::single(GateKind::H, 0)], 1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(h[0][0], Complex64::new(r, 0.0), EPS);
        assert_close(h[1][1], Complex64::new(-r, 0.0), EPS);

        let id = dense_unitary_oracle(&[], 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(id[i][j], Complex64::new(want, 0.0), EPS);
            }
        }

        let cx = GateOp::controlled(GateKind::CX, 0, 1);
        let twice = dense_unitary_oracle(&[cx, cx], 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(twice[i][j], Complex64::new(want, 0.0), EPS);
            }
        }

        assert!(dense_unitary_oracle(&[], 7).is_err());
    }

    pub(crate) fn random_gate(rng: &mut impl Rng, q: usize) -> GateOp {
        use GateKind::*;
        let kinds = [X, Y, Z, H, RX, RY, RZ, CX, CY, CZ, CRX, CRY, CRZ];
        loop {
            let kind = kinds[rng.random_range(0..kinds.len())];
            if kind.is_controlled() && q < 2 {
                continue;
            }
            let target = rng.random_range(0..q);
            let angle = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let gate = if kind.is_controlled() {
                let control = loop {
                    let c = rng.random_range(0..q);
                    if c != target {
                        break c;
                    }
                };
                GateOp {
                    kind,
                    angle: if kind.is_rotation() { angle } else { 0.0 },
                    target,
                    control: Some(control),
                }
            } else {
                GateOp {
                    kind,
                    angle: if kind.is_rotation() { angle } else { 0.0 },
                    target,
                    control: None,
                }
            };
            return gate;
        }
    }

    #[test]
    fn random_circuits_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let q = rng.random_range(1..=3);
            let n_gates = rng.random_range(0..=30);
            let gates: Vec<GateOp> = (0..n_gates).map(|_| random_gate(&mut rng, q)).collect();

            let mut state = init_state(q).unwrap();
            state.apply_all(&gates).unwrap();

            let u = dense_unitary_oracle(&gates, q).unwrap();
            let mut zero = vec![Complex64::new(0.0, 0.0); 1 << q];
            zero[0] = Complex64::new(1.0, 0.0);
            let expected = dense_apply(&u, &zero);

            for (a, e) in state.amplitudes().iter().zip(&expected) {
                assert_close(*a, *e, 1e-12);
            }
        }
    }

    #[test]
    fn norm_preserved_after_many_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = init_state(4).unwrap();
        for _ in 0..100 {
            let gate = random_gate(&mut rng, 4);
            state.apply_gate(&gate).unwrap();
        }
        assert!((state.norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn bloch_vector_length_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let q = rng.random_range(1..=3);
            let mut state = init_state(q).unwrap();
            for _ in 0..15 {
                let gate = random_gate(&mut rng, q);
                state.apply_gate(&gate).unwrap();
            }
            for k in 0..q {
                let x = state.pauli_expectation(Pauli::X, k).unwrap();
                let y = state.pauli_expectation(Pauli::Y, k).unwrap();
                let z = state.pauli_expectation(Pauli::Z, k).unwrap();
                for v in [x, y, z] {
                    assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
                }
                assert!(x * x + y * y + z * z <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn control_in_zero_leaves_target_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            // Build a state where qubit 0 stays |0>: only touch qubits 1..q.
            let q = 3;
            let mut state = init_state(q).unwrap();
            for _ in 0..10 {
                let gate = loop {
                    let g = random_gate(&mut rng, q);
                    if g.target != 0 && g.control != Some(0) {
                        break g;
                    }
                };
                state.apply_gate(&gate).unwrap();
            }
            let before = state.clone();
            state
                .apply_gate(&GateOp::controlled(GateKind::CX, 0, rng.random_range(1..q)))
                .unwrap();
            for (a, b) in state.amplitudes().iter().zip(before.amplitudes()) {
                assert_close(*a, *b, 1e-12);
            }
        }
    }
}
