//! Layered encoding circuits over the 43-action gate table, plus the
//! fully flexible gate-by-gate variant used by the unstructured baselines.
//!
//! A layer applies one gate type to every qubit (single-qubit actions) or
//! to every nearest-neighbour pair `(i, i+1)` in a linear chain (two-qubit
//! actions). Data rotations encode feature `k` on qubit `k`, either as
//! `pi * x_k` or `atan(x_k)`; fixed rotations use `pi / n` with
//! `n in {1, 2, 3, 4, 8}`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::simulator::{GateKind, GateOp};

/// Size of the action table.
pub const ACTION_COUNT: usize = 43;

/// Default depth cap for layered circuits.
pub const DEFAULT_MAX_DEPTH: usize = 10;

/// Hard parse-level bound, independent of the configured depth cap.
pub const PARSE_MAX_LAYERS: usize = 64;

/// Denominators available to the fixed-angle rotations.
pub const FIXED_DENOMS: [u8; 5] = [1, 2, 3, 4, 8];

/// Options honoured when expanding layered circuits to gate sequences.
#[derive(Debug, Clone, Copy)]
pub struct ExpandOptions {
    /// Table 1 prints the controlled-X fixed rotation as `CRx(n*pi/8)` while
    /// CRy/CRz use `pi/n`. `true` reproduces the table verbatim; `false`
    /// treats the CRx entry as the likely typo and uses `pi/n` throughout.
    pub crx_angle_verbatim: bool,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            crx_angle_verbatim: true,
        }
    }
}

/// One row of the action table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerAction {
    PauliX,
    PauliY,
    PauliZ,
    Hadamard,
    Cx,
    Cy,
    Cz,
    RxData,
    RyData,
    RzData,
    RxAtan,
    RyAtan,
    RzAtan,
    RxFixed(u8),
    RyFixed(u8),
    RzFixed(u8),
    CrxFixed(u8),
    CryFixed(u8),
    CrzFixed(u8),
}

impl LayerAction {
    /// Stable id in `[0, 42]`; the bijection backing serialization and the
    /// agent's one-hot observation slots.
    pub fn id(self) -> u8 {
        use LayerAction::*;
        match self {
            PauliX => 0,
            PauliY => 1,
            PauliZ => 2,
            Hadamard => 3,
            Cx => 4,
            Cy => 5,
            Cz => 6,
            RxData => 7,
            RyData => 8,
            RzData => 9,
            RxAtan => 10,
            RyAtan => 11,
            RzAtan => 12,
            RxFixed(n) => 13 + denom_index(n),
            RyFixed(n) => 18 + denom_index(n),
            RzFixed(n) => 23 + denom_index(n),
            CrxFixed(n) => 28 + denom_index(n),
            CryFixed(n) => 33 + denom_index(n),
            CrzFixed(n) => 38 + denom_index(n),
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        use LayerAction::*;
        let action = match id {
            0 => PauliX,
            1 => PauliY,
            2 => PauliZ,
            3 => Hadamard,
            4 => Cx,
            5 => Cy,
            6 => Cz,
            7 => RxData,
            8 => RyData,
            9 => RzData,
            10 => RxAtan,
            11 => RyAtan,
            12 => RzAtan,
            13..=17 => RxFixed(FIXED_DENOMS[(id - 13) as usize]),
            18..=22 => RyFixed(FIXED_DENOMS[(id - 18) as usize]),
            23..=27 => RzFixed(FIXED_DENOMS[(id - 23) as usize]),
            28..=32 => CrxFixed(FIXED_DENOMS[(id - 28) as usize]),
            33..=37 => CryFixed(FIXED_DENOMS[(id - 33) as usize]),
            38..=42 => CrzFixed(FIXED_DENOMS[(id - 38) as usize]),
            _ => {
                return Err(Error::invalid_argument(format!(
                    "unknown action id {id}; valid range 0..{ACTION_COUNT}"
                )))
            }
        };
        Ok(action)
    }

    pub fn all() -> impl Iterator<Item = LayerAction> {
        (0..ACTION_COUNT as u8).map(|id| LayerAction::from_id(id).expect("id in range"))
    }

    pub fn is_two_qubit(self) -> bool {
        use LayerAction::*;
        matches!(self, Cx | Cy | Cz | CrxFixed(_) | CryFixed(_) | CrzFixed(_))
    }

    pub fn is_data_encoding(self) -> bool {
        use LayerAction::*;
        matches!(self, RxData | RyData | RzData | RxAtan | RyAtan | RzAtan)
    }

    /// Number of gates this layer contributes on `q` qubits.
    pub fn gates_on(self, q: usize) -> usize {
        if self.is_two_qubit() {
            q.saturating_sub(1)
        } else {
            q
        }
    }

    fn emit(self, q: usize, x: &[f64], opts: &ExpandOptions, out: &mut Vec<GateOp>) {
        use LayerAction::*;
        match self {
            PauliX | PauliY | PauliZ | Hadamard => {
                let kind = match self {
                    PauliX => GateKind::X,
                    PauliY => GateKind::Y,
                    PauliZ => GateKind::Z,
                    _ => GateKind::H,
                };
                out.extend((0..q).map(|k| GateOp::single(kind, k)));
            }
            Cx | Cy | Cz => {
                let kind = match self {
                    Cx => GateKind::CX,
                    Cy => GateKind::CY,
                    _ => GateKind::CZ,
                };
                out.extend((0..q.saturating_sub(1)).map(|i| GateOp::controlled(kind, i, i + 1)));
            }
            RxData | RyData | RzData => {
                let kind = rotation_kind(self);
                out.extend((0..q).map(|k| GateOp::rotation(kind, PI * x[k], k)));
            }
            RxAtan | RyAtan | RzAtan => {
                let kind = rotation_kind(self);
                out.extend((0..q).map(|k| GateOp::rotation(kind, x[k].atan(), k)));
            }
            RxFixed(n) | RyFixed(n) | RzFixed(n) => {
                let kind = rotation_kind(self);
                let angle = PI / f64::from(n);
                out.extend((0..q).map(|k| GateOp::rotation(kind, angle, k)));
            }
            CrxFixed(n) => {
                let angle = if opts.crx_angle_verbatim {
                    f64::from(n) * PI / 8.0
                } else {
                    PI / f64::from(n)
                };
                out.extend(
                    (0..q.saturating_sub(1))
                        .map(|i| GateOp::controlled_rotation(GateKind::CRX, angle, i, i + 1)),
                );
            }
            CryFixed(n) | CrzFixed(n) => {
                let kind = if matches!(self, CryFixed(_)) {
                    GateKind::CRY
                } else {
                    GateKind::CRZ
                };
                let angle = PI / f64::from(n);
                out.extend(
                    (0..q.saturating_sub(1))
                        .map(|i| GateOp::controlled_rotation(kind, angle, i, i + 1)),
                );
            }
        }
    }
}

fn rotation_kind(action: LayerAction) -> GateKind {
    use LayerAction::*;
    match action {
        RxData | RxAtan | RxFixed(_) => GateKind::RX,
        RyData | RyAtan | RyFixed(_) => GateKind::RY,
        RzData | RzAtan | RzFixed(_) => GateKind::RZ,
        _ => unreachable!("not a rotation layer"),
    }
}

fn denom_index(n: u8) -> u8 {
    FIXED_DENOMS
        .iter()
        .position(|&d| d == n)
        .expect("denominator in {1,2,3,4,8}") as u8
}

/// A circuit that can encode a data point into a gate sequence.
pub trait DataCircuit: Send + Sync {
    fn num_qubits(&self) -> usize;
    fn expand(&self, x: &[f64], opts: &ExpandOptions) -> Result<Vec<GateOp>>;
    fn has_data_encoding(&self) -> bool;
    /// Stable text form; doubles as the feature-cache key.
    fn canonical_string(&self) -> String;
    /// Data-independent gate count (tie-break metric for selection).
    fn gate_count(&self) -> usize;
}

/// Layered encoding circuit: an ordered list of layer actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodingCircuit {
    num_qubits: usize,
    layers: Vec<LayerAction>,
}

impl EncodingCircuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > crate::simulator::MAX_QUBITS {
            return Err(Error::invalid_argument(format!(
                "qubit count {num_qubits} outside supported range"
            )));
        }
        Ok(EncodingCircuit {
            num_qubits,
            layers: Vec::new(),
        })
    }

    pub fn from_layers(num_qubits: usize, layers: Vec<LayerAction>) -> Result<Self> {
        let mut c = EncodingCircuit::new(num_qubits)?;
        c.layers = layers;
        Ok(c)
    }

    pub fn layers(&self) -> &[LayerAction] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Return a new circuit with `action` appended; errors at the depth cap.
    pub fn append_action(&self, action: LayerAction, max_depth: usize) -> Result<Self> {
        if self.layers.len() >= max_depth {
            return Err(Error::DepthExceeded { max_depth });
        }
        let mut next = self.clone();
        next.layers.push(action);
        Ok(next)
    }

    pub fn serialize(&self) -> String {
        let mut s = format!("{}:", self.num_qubits);
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", layer.id());
        }
        s
    }

    pub fn deserialize(text: &str) -> Result<Self> {
        let colon = text
            .find(':')
            .ok_or_else(|| Error::parse(text.len(), "missing ':' separator"))?;
        let q: usize = text[..colon]
            .parse()
            .map_err(|_| Error::parse(0, format!("invalid qubit count {:?}", &text[..colon])))?;
        let mut circuit = EncodingCircuit::new(q).map_err(|e| Error::parse(0, e.to_string()))?;
        let body = &text[colon + 1..];
        if body.is_empty() {
            return Ok(circuit);
        }
        let mut pos = colon + 1;
        for part in body.split(',') {
            if circuit.layers.len() >= PARSE_MAX_LAYERS {
                return Err(Error::parse(pos, "too many layers"));
            }
            let id: u8 = part
                .parse()
                .map_err(|_| Error::parse(pos, format!("invalid action id {part:?}")))?;
            let action =
                LayerAction::from_id(id).map_err(|_| Error::parse(pos, format!("unknown id {id}")))?;
            circuit.layers.push(action);
            pos += part.len() + 1;
        }
        Ok(circuit)
    }

    /// One-hot layer history, `max_depth * 43` wide; unused slots stay zero.
    pub fn encode_observation(&self, max_depth: usize) -> Vec<f64> {
        let mut obs = vec![0.0; max_depth * ACTION_COUNT];
        for (t, layer) in self.layers.iter().take(max_depth).enumerate() {
            obs[t * ACTION_COUNT + layer.id() as usize] = 1.0;
        }
        obs
    }
}

impl DataCircuit for EncodingCircuit {
    fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    fn expand(&self, x: &[f64], opts: &ExpandOptions) -> Result<Vec<GateOp>> {
        if x.len() != self.num_qubits {
            return Err(Error::invalid_argument(format!(
                "feature vector length {} does not match {} qubits",
                x.len(),
                self.num_qubits
            )));
        }
        let mut out = Vec::with_capacity(self.gate_count());
        for layer in &self.layers {
            layer.emit(self.num_qubits, x, opts, &mut out);
        }
        Ok(out)
    }

    fn has_data_encoding(&self) -> bool {
        self.layers.iter().any(|l| l.is_data_encoding())
    }

    fn canonical_string(&self) -> String {
        self.serialize()
    }

    fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.gates_on(self.num_qubits)).sum()
    }
}

/// Uniform random layered circuit with guaranteed data encoding.
pub fn random_layered(
    rng: &mut impl Rng,
    num_qubits: usize,
    min_layers: usize,
    max_layers: usize,
) -> Result<EncodingCircuit> {
    if min_layers == 0 || min_layers > max_layers {
        return Err(Error::invalid_argument(format!(
            "bad layer bounds [{min_layers}, {max_layers}]"
        )));
    }
    loop {
        let depth = rng.random_range(min_layers..=max_layers);
        let layers: Vec<LayerAction> = (0..depth)
            .map(|_| {
                LayerAction::from_id(rng.random_range(0..ACTION_COUNT as u8)).expect("id in range")
            })
            .collect();
        let circuit = EncodingCircuit::from_layers(num_qubits, layers)?;
        if circuit.has_data_encoding() {
            return Ok(circuit);
        }
    }
}

/// Angle source for one flexible gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlexAngle {
    /// Non-rotation gate.
    None,
    /// `pi * x_j`
    LinearFeature(usize),
    /// `atan(x_j)`
    AtanFeature(usize),
    /// Fixed literal angle in radians.
    Literal(f64),
}

/// One gate of a flexible (non-layered) circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexGate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: FlexAngle,
}

impl FlexGate {
    fn feature(&self) -> Option<usize> {
        match self.angle {
            FlexAngle::LinearFeature(j) | FlexAngle::AtanFeature(j) => Some(j),
            _ => None,
        }
    }

    fn to_gate_op(self, x: &[f64]) -> GateOp {
        let angle = match self.angle {
            FlexAngle::None => 0.0,
            FlexAngle::LinearFeature(j) => PI * x[j],
            FlexAngle::AtanFeature(j) => x[j].atan(),
            FlexAngle::Literal(a) => a,
        };
        GateOp {
            kind: self.kind,
            angle,
            target: self.target,
            control: self.control,
        }
    }
}

/// Circuit with gates placed at arbitrary positions, no layer structure.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexibleCircuit {
    num_qubits: usize,
    gates: Vec<FlexGate>,
}

impl FlexibleCircuit {
    pub fn new(num_qubits: usize, gates: Vec<FlexGate>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > crate::simulator::MAX_QUBITS {
            return Err(Error::invalid_argument(format!(
                "qubit count {num_qubits} outside supported range"
            )));
        }
        for g in &gates {
            validate_flex_gate(g, num_qubits)?;
        }
        Ok(FlexibleCircuit { num_qubits, gates })
    }

    pub fn gates(&self) -> &[FlexGate] {
        &self.gates
    }

    pub fn serialize(&self) -> String {
        let mut s = format!("F{}:", self.num_qubits);
        for (i, g) in self.gates.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            let name = gate_kind_name(g.kind);
            match g.control {
                Some(c) => {
                    let _ = write!(s, "{name}({c},{})", g.target);
                }
                None => {
                    let _ = write!(s, "{name}({})", g.target);
                }
            }
            match g.angle {
                FlexAngle::None => {}
                FlexAngle::LinearFeature(j) => {
                    let _ = write!(s, "=f{j}");
                }
                FlexAngle::AtanFeature(j) => {
                    let _ = write!(s, "=a{j}");
                }
                FlexAngle::Literal(a) => {
                    let _ = write!(s, "={a}");
                }
            }
        }
        s
    }

    pub fn deserialize(text: &str) -> Result<Self> {
        let rest = text
            .strip_prefix('F')
            .ok_or_else(|| Error::parse(0, "flexible circuit must start with 'F'"))?;
        let colon = rest
            .find(':')
            .ok_or_else(|| Error::parse(text.len(), "missing ':' separator"))?;
        let q: usize = rest[..colon]
            .parse()
            .map_err(|_| Error::parse(1, format!("invalid qubit count {:?}", &rest[..colon])))?;
        let body = &rest[colon + 1..];
        let mut gates = Vec::new();
        if body.is_empty() {
            return FlexibleCircuit::new(q, gates);
        }
        let mut pos = colon + 2;
        for part in body.split(';') {
            if gates.len() >= PARSE_MAX_LAYERS * crate::simulator::MAX_QUBITS {
                return Err(Error::parse(pos, "too many gates"));
            }
            gates.push(parse_flex_gate(part, pos)?);
            pos += part.len() + 1;
        }
        FlexibleCircuit::new(q, gates)
    }
}

fn validate_flex_gate(g: &FlexGate, q: usize) -> Result<()> {
    if g.target >= q {
        return Err(Error::invalid_argument(format!(
            "target {} out of range for q={q}",
            g.target
        )));
    }
    if let Some(c) = g.control {
        if c >= q || c == g.target {
            return Err(Error::invalid_argument(format!(
                "bad control {c} for target {}",
                g.target
            )));
        }
    }
    if g.kind.is_controlled() != g.control.is_some() {
        return Err(Error::invalid_argument(format!(
            "{:?} control mismatch",
            g.kind
        )));
    }
    let has_angle = !matches!(g.angle, FlexAngle::None);
    if g.kind.is_rotation() != has_angle {
        return Err(Error::invalid_argument(format!(
            "{:?} angle mismatch",
            g.kind
        )));
    }
    if let FlexAngle::Literal(a) = g.angle {
        if !a.is_finite() {
            return Err(Error::invalid_argument("non-finite literal angle"));
        }
    }
    Ok(())
}

fn gate_kind_name(kind: GateKind) -> &'static str {
    match kind {
        GateKind::X => "x",
        GateKind::Y => "y",
        GateKind::Z => "z",
        GateKind::H => "h",
        GateKind::RX => "rx",
        GateKind::RY => "ry",
        GateKind::RZ => "rz",
        GateKind::CX => "cx",
        GateKind::CY => "cy",
        GateKind::CZ => "cz",
        GateKind::CRX => "crx",
        GateKind::CRY => "cry",
        GateKind::CRZ => "crz",
    }
}

fn gate_kind_from_name(name: &str) -> Option<GateKind> {
    Some(match name {
        "x" => GateKind::X,
        "y" => GateKind::Y,
        "z" => GateKind::Z,
        "h" => GateKind::H,
        "rx" => GateKind::RX,
        "ry" => GateKind::RY,
        "rz" => GateKind::RZ,
        "cx" => GateKind::CX,
        "cy" => GateKind::CY,
        "cz" => GateKind::CZ,
        "crx" => GateKind::CRX,
        "cry" => GateKind::CRY,
        "crz" => GateKind::CRZ,
        _ => return None,
    })
}

fn parse_flex_gate(part: &str, pos: usize) -> Result<FlexGate> {
    let open = part
        .find('(')
        .ok_or_else(|| Error::parse(pos, format!("missing '(' in gate {part:?}")))?;
    let close = part
        .find(')')
        .ok_or_else(|| Error::parse(pos, format!("missing ')' in gate {part:?}")))?;
    if close < open {
        return Err(Error::parse(pos, format!("malformed gate {part:?}")));
    }
    let kind = gate_kind_from_name(&part[..open])
        .ok_or_else(|| Error::parse(pos, format!("unknown gate {:?}", &part[..open])))?;
    let args = &part[open + 1..close];
    let (control, target) = match args.split_once(',') {
        Some((c, t)) => {
            let c: usize = c
                .parse()
                .map_err(|_| Error::parse(pos, format!("bad control {c:?}")))?;
            let t: usize = t
                .parse()
                .map_err(|_| Error::parse(pos, format!("bad target {t:?}")))?;
            (Some(c), t)
        }
        None => {
            let t: usize = args
                .parse()
                .map_err(|_| Error::parse(pos, format!("bad target {args:?}")))?;
            (None, t)
        }
    };
    let suffix = &part[close + 1..];
    let angle = if suffix.is_empty() {
        FlexAngle::None
    } else {
        let spec = suffix
            .strip_prefix('=')
            .ok_or_else(|| Error::parse(pos, format!("expected '=' before angle in {part:?}")))?;
        if let Some(j) = spec.strip_prefix('f') {
            FlexAngle::LinearFeature(
                j.parse()
                    .map_err(|_| Error::parse(pos, format!("bad feature index {j:?}")))?,
            )
        } else if let Some(j) = spec.strip_prefix('a') {
            FlexAngle::AtanFeature(
                j.parse()
                    .map_err(|_| Error::parse(pos, format!("bad feature index {j:?}")))?,
            )
        } else {
            let a: f64 = spec
                .parse()
                .map_err(|_| Error::parse(pos, format!("bad angle {spec:?}")))?;
            if !a.is_finite() {
                return Err(Error::parse(pos, "non-finite angle"));
            }
            FlexAngle::Literal(a)
        }
    };
    Ok(FlexGate {
        kind,
        target,
        control,
        angle,
    })
}

impl DataCircuit for FlexibleCircuit {
    fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    fn expand(&self, x: &[f64], _opts: &ExpandOptions) -> Result<Vec<GateOp>> {
        if x.len() != self.num_qubits {
            return Err(Error::invalid_argument(format!(
                "feature vector length {} does not match {} qubits",
                x.len(),
                self.num_qubits
            )));
        }
        for g in &self.gates {
            if let Some(j) = g.feature() {
                if j >= x.len() {
                    return Err(Error::invalid_argument(format!(
                        "feature index {j} out of range"
                    )));
                }
            }
        }
        Ok(self.gates.iter().map(|g| g.to_gate_op(x)).collect())
    }

    fn has_data_encoding(&self) -> bool {
        self.gates.iter().any(|g| g.feature().is_some())
    }

    fn canonical_string(&self) -> String {
        self.serialize()
    }

    fn gate_count(&self) -> usize {
        self.gates.len()
    }
}

/// Parse either circuit form from its canonical string.
pub fn parse_any(text: &str) -> Result<Box<dyn DataCircuit>> {
    if text.starts_with('F') {
        Ok(Box::new(FlexibleCircuit::deserialize(text)?))
    } else {
        Ok(Box::new(EncodingCircuit::deserialize(text)?))
    }
}

/// Random flexible circuit: uniform gate placement, literal angles uniform
/// in `[0, 2*pi]`, every feature encoded at least once.
pub fn random_flexible(
    rng: &mut impl Rng,
    num_qubits: usize,
    num_features: usize,
    gate_budget: usize,
) -> Result<FlexibleCircuit> {
    if gate_budget < num_features {
        return Err(Error::invalid_argument(format!(
            "gate budget {gate_budget} below feature count {num_features}"
        )));
    }
    if num_features == 0 {
        return Err(Error::invalid_argument("need at least one feature"));
    }
    let n_gates = rng.random_range(num_features..=gate_budget);
    let mut gates: Vec<FlexGate> = (0..n_gates)
        .map(|_| random_flex_gate(rng, num_qubits, num_features))
        .collect();

    // Coverage repair: convert duplicate or non-data slots until every
    // feature appears at least once.
    loop {
        let mut counts = vec![0usize; num_features];
        for g in &gates {
            if let Some(j) = g.feature() {
                counts[j] += 1;
            }
        }
        let Some(missing) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let convertible: Vec<usize> = gates
            .iter()
            .enumerate()
            .filter(|(_, g)| match g.feature() {
                None => true,
                Some(j) => counts[j] > 1,
            })
            .map(|(i, _)| i)
            .collect();
        let slot = convertible[rng.random_range(0..convertible.len())];
        gates[slot] = random_data_rotation(rng, num_qubits, missing);
    }

    FlexibleCircuit::new(num_qubits, gates)
}

fn random_flex_gate(rng: &mut impl Rng, q: usize, d: usize) -> FlexGate {
    // 0..4 plain single-qubit, 4..7 data rotations, 7..10 literal rotations,
    // 10..13 controlled Paulis, 13..16 controlled literal rotations.
    let family = if q >= 2 {
        rng.random_range(0..16)
    } else {
        rng.random_range(0..10)
    };
    let target = rng.random_range(0..q);
    match family {
        0..=3 => {
            let kind = [GateKind::X, GateKind::Y, GateKind::Z, GateKind::H][family];
            FlexGate {
                kind,
                target,
                control: None,
                angle: FlexAngle::None,
            }
        }
        4..=6 => random_data_rotation_on(rng, target, d, family - 4),
        7..=9 => {
            let kind = [GateKind::RX, GateKind::RY, GateKind::RZ][family - 7];
            FlexGate {
                kind,
                target,
                control: None,
                angle: FlexAngle::Literal(rng.random_range(0.0..=2.0 * PI)),
            }
        }
        10..=12 => {
            let kind = [GateKind::CX, GateKind::CY, GateKind::CZ][family - 10];
            let control = random_other(rng, q, target);
            FlexGate {
                kind,
                target,
                control: Some(control),
                angle: FlexAngle::None,
            }
        }
        _ => {
            let kind = [GateKind::CRX, GateKind::CRY, GateKind::CRZ][family - 13];
            let control = random_other(rng, q, target);
            FlexGate {
                kind,
                target,
                control: Some(control),
                angle: FlexAngle::Literal(rng.random_range(0.0..=2.0 * PI)),
            }
        }
    }
}

fn random_other(rng: &mut impl Rng, q: usize, not: usize) -> usize {
    loop {
        let c = rng.random_range(0..q);
        if c != not {
            return c;
        }
    }
}

fn random_data_rotation(rng: &mut impl Rng, q: usize, feature: usize) -> FlexGate {
    let target = rng.random_range(0..q);
    let axis = rng.random_range(0..3);
    let mut g = random_data_rotation_on(rng, target, feature + 1, axis);
    g.angle = match g.angle {
        FlexAngle::LinearFeature(_) => FlexAngle::LinearFeature(feature),
        FlexAngle::AtanFeature(_) => FlexAngle::AtanFeature(feature),
        other => other,
    };
    g
}

fn random_data_rotation_on(rng: &mut impl Rng, target: usize, d: usize, axis: usize) -> FlexGate {
    let kind = [GateKind::RX, GateKind::RY, GateKind::RZ][axis];
    let feature = rng.random_range(0..d);
    let angle = if rng.random_bool(0.5) {
        FlexAngle::LinearFeature(feature)
    } else {
        FlexAngle::AtanFeature(feature)
    };
    FlexGate {
        kind,
        target,
        control: None,
        angle,
    }
}
