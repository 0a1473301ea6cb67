//! Statevector simulation of the composite ansatz: SU2 encoding layers, HVA
//! layers built from Pauli-string rotations, linear CNOT entanglers, and
//! reduction to the system register.
//!
//! Conventions: `RY(t) = exp(-i t Y/2)`, `RZ(t) = exp(-i t Z/2)`,
//! `RX(t) = exp(-i t X/2)` and `PauliRotation(t, P) = exp(-i t P)`. The system
//! register occupies qubits `0..n_system` (most significant bits), ancillas
//! follow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianFamily, Pauli, PauliMasks, PauliString, PauliSum};
use crate::linalg::{gram_rows, ComplexMatrix, DensityMatrix, StateVector, C64};

pub const ANSATZ_SCHEMA_VERSION: &str = "1.0";

/// Where a gate angle comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum AngleSource {
    /// A single trainable slot.
    Trainable { slot: usize },
    /// `sum_k (w[k] * h[k] + b[k])` with weights and biases read from trainable slots.
    EncodedLinear { weights: Vec<usize>, biases: Vec<usize> },
    /// Supplied from outside the circuit (a network output).
    External { slot: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum GateKind {
    Rx { target: usize },
    Ry { target: usize },
    Rz { target: usize },
    Cnot { control: usize, target: usize },
    PauliRotation { letters: Vec<Pauli> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<AngleSource>,
}

impl GateOp {
    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cnot { control, target }, angle: None }
    }

    fn rotation(kind: GateKind, angle: AngleSource) -> Self {
        Self { kind, angle: Some(angle) }
    }

    pub fn is_parametric(&self) -> bool {
        !matches!(self.kind, GateKind::Cnot { .. })
    }
}

/// Which store a freshly built fragment draws its angles from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMode {
    Trainable,
    External,
}

/// Gate program with symbolic angle sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_system: usize,
    pub n_ancilla: usize,
    pub param_dim: usize,
    pub gates: Vec<GateOp>,
    pub n_trainable: usize,
    pub n_external: usize,
}

/// Flat parameter store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Serialize, Deserialize)]
struct AnsatzDocument {
    schema_version: String,
    ansatz: AnsatzSpec,
}

impl AnsatzSpec {
    pub fn empty(n_system: usize, n_ancilla: usize, param_dim: usize) -> Self {
        Self { n_system, n_ancilla, param_dim, gates: Vec::new(), n_trainable: 0, n_external: 0 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_system + self.n_ancilla
    }

    /// Trainable slots that multiply a Hamiltonian parameter, in gate order.
    pub fn encoding_weight_slots(&self) -> Vec<usize> {
        self.gates
            .iter()
            .filter_map(|g| match &g.angle {
                Some(AngleSource::EncodedLinear { weights, .. }) => Some(weights.iter().copied()),
                _ => None,
            })
            .flatten()
            .collect()
    }

    /// Appends `fragment`, renumbering its slots after the ones already in use.
    pub fn append(&mut self, fragment: AnsatzSpec) -> Result<()> {
        if fragment.n_qubits() != self.n_qubits() {
            return Err(Error::SlotMismatch(format!(
                "fragment spans {} qubits, ansatz spans {}",
                fragment.n_qubits(),
                self.n_qubits()
            )));
        }
        if fragment.param_dim != 0 && fragment.param_dim != self.param_dim {
            return Err(Error::SlotMismatch(format!(
                "fragment encodes {} parameters, ansatz {}",
                fragment.param_dim, self.param_dim
            )));
        }
        let (dt, de) = (self.n_trainable, self.n_external);
        for mut g in fragment.gates {
            g.angle = g.angle.map(|a| match a {
                AngleSource::Trainable { slot } => AngleSource::Trainable { slot: slot + dt },
                AngleSource::External { slot } => AngleSource::External { slot: slot + de },
                AngleSource::EncodedLinear { weights, biases } => AngleSource::EncodedLinear {
                    weights: weights.into_iter().map(|s| s + dt).collect(),
                    biases: biases.into_iter().map(|s| s + dt).collect(),
                },
            });
            self.gates.push(g);
        }
        self.n_trainable += fragment.n_trainable;
        self.n_external += fragment.n_external;
        Ok(())
    }

    /// Checks targets, slot bounds and that every slot is referenced.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits();
        let mut used_t = vec![false; self.n_trainable];
        let mut used_e = vec![false; self.n_external];
        for (i, g) in self.gates.iter().enumerate() {
            match &g.kind {
                GateKind::Rx { target } | GateKind::Ry { target } | GateKind::Rz { target } => {
                    if *target >= n {
                        return Err(Error::BadTarget(format!("gate {i}: target {target} >= {n}")));
                    }
                }
                GateKind::Cnot { control, target } => {
                    if *control >= n || *target >= n || control == target {
                        return Err(Error::BadTarget(format!("gate {i}: cnot({control}, {target})")));
                    }
                }
                GateKind::PauliRotation { letters } => {
                    if letters.len() != n {
                        return Err(Error::BadTarget(format!("gate {i}: {} letters for {n} qubits", letters.len())));
                    }
                }
            }
            if g.is_parametric() != g.angle.is_some() {
                return Err(Error::SlotMismatch(format!("gate {i}: angle presence does not match gate kind")));
            }
            let mark = |slot: usize, used: &mut Vec<bool>, what: &str| -> Result<()> {
                match used.get_mut(slot) {
                    Some(u) => {
                        *u = true;
                        Ok(())
                    }
                    None => Err(Error::SlotMismatch(format!("gate {i}: {what} slot {slot} out of range"))),
                }
            };
            match &g.angle {
                Some(AngleSource::Trainable { slot }) => mark(*slot, &mut used_t, "trainable")?,
                Some(AngleSource::External { slot }) => mark(*slot, &mut used_e, "external")?,
                Some(AngleSource::EncodedLinear { weights, biases }) => {
                    if weights.len() != self.param_dim || biases.len() != self.param_dim {
                        return Err(Error::SlotMismatch(format!(
                            "gate {i}: encoding expects {} weights and biases",
                            self.param_dim
                        )));
                    }
                    for &s in weights.iter().chain(biases) {
                        mark(s, &mut used_t, "encoding")?;
                    }
                }
                None => {}
            }
        }
        if let Some(s) = used_t.iter().position(|u| !u) {
            return Err(Error::SlotMismatch(format!("trainable slot {s} is never referenced")));
        }
        if let Some(s) = used_e.iter().position(|u| !u) {
            return Err(Error::SlotMismatch(format!("external slot {s} is never referenced")));
        }
        Ok(())
    }

    /// Per-gate angles (0 for CNOT).
    pub fn resolve_angles(&self, trainables: &[f64], externals: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        if trainables.len() != self.n_trainable {
            return Err(Error::SlotMismatch(format!(
                "{} trainables supplied, {} expected",
                trainables.len(),
                self.n_trainable
            )));
        }
        if externals.len() != self.n_external {
            return Err(Error::SlotMismatch(format!(
                "{} externals supplied, {} expected",
                externals.len(),
                self.n_external
            )));
        }
        if h.len() != self.param_dim {
            return Err(Error::SlotMismatch(format!("{} Hamiltonian parameters, {} expected", h.len(), self.param_dim)));
        }
        Ok(self
            .gates
            .iter()
            .map(|g| match &g.angle {
                None => 0.0,
                Some(AngleSource::Trainable { slot }) => trainables[*slot],
                Some(AngleSource::External { slot }) => externals[*slot],
                Some(AngleSource::EncodedLinear { weights, biases }) => weights
                    .iter()
                    .zip(biases)
                    .zip(h)
                    .map(|((&w, &b), &hk)| trainables[w] * hk + trainables[b])
                    .sum(),
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = AnsatzDocument { schema_version: ANSATZ_SCHEMA_VERSION.into(), ansatz: self.clone() };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AnsatzDocument = serde_json::from_str(text)?;
        check_schema_major(&doc.schema_version, ANSATZ_SCHEMA_VERSION)?;
        doc.ansatz.validate()?;
        Ok(doc.ansatz)
    }
}

/// Rejects documents whose major version differs from `supported`.
pub fn check_schema_major(found: &str, supported: &str) -> Result<()> {
    let major = |v: &str| v.split('.').next().unwrap_or("").to_string();
    if major(found) != major(supported) {
        return Err(Error::Parse(format!("unsupported schema_version {found} (supported {supported})")));
    }
    Ok(())
}

fn cnot_chain(n_tot: usize) -> impl Iterator<Item = GateOp> {
    (0..n_tot.saturating_sub(1)).map(|i| GateOp::cnot(i, i + 1))
}

/// `layers` of (RZ, RY on every wire, then a CNOT chain) with angles linear in
/// the Hamiltonian parameters. Uses `4 * n_tot * layers * param_dim` slots.
pub fn build_su2_encoding(n_tot: usize, layers: usize, param_dim: usize) -> AnsatzSpec {
    let mut spec = AnsatzSpec::empty(n_tot, 0, param_dim);
    let mut next = 0usize;
    let mut take = |k: usize| -> Vec<usize> {
        let v: Vec<usize> = (next..next + k).collect();
        next += k;
        v
    };
    for _ in 0..layers {
        for q in 0..n_tot {
            for kind in [GateKind::Rz { target: q }, GateKind::Ry { target: q }] {
                let weights = take(param_dim);
                let biases = take(param_dim);
                spec.gates.push(GateOp::rotation(kind, AngleSource::EncodedLinear { weights, biases }));
            }
        }
        spec.gates.extend(cnot_chain(n_tot));
    }
    spec.n_trainable = next;
    spec
}

/// SU2 layers whose angles are plain slots of the given store.
pub fn build_su2_layers(n_tot: usize, layers: usize, mode: SlotMode) -> AnsatzSpec {
    let mut spec = AnsatzSpec::empty(n_tot, 0, 0);
    let mut next = 0usize;
    for _ in 0..layers {
        for q in 0..n_tot {
            for kind in [GateKind::Rz { target: q }, GateKind::Ry { target: q }] {
                spec.gates.push(GateOp::rotation(kind, slot_source(mode, next)));
                next += 1;
            }
        }
        spec.gates.extend(cnot_chain(n_tot));
    }
    match mode {
        SlotMode::Trainable => spec.n_trainable = next,
        SlotMode::External => spec.n_external = next,
    }
    spec
}

fn slot_source(mode: SlotMode, slot: usize) -> AngleSource {
    match mode {
        SlotMode::Trainable => AngleSource::Trainable { slot },
        SlotMode::External => AngleSource::External { slot },
    }
}

/// Extends a system-register pattern over `n_tot` wires: nearest-neighbour
/// couplings go on every adjacent pair, single-site fields on every wire, and
/// any longer string is repeated once per whole system-sized block.
pub fn tile_pattern(pattern: &PauliSum, n_tot: usize) -> Vec<Vec<Pauli>> {
    let n_sys = pattern.n_qubits();
    let mut couplings: Vec<(Pauli, Pauli)> = Vec::new();
    let mut fields: Vec<Pauli> = Vec::new();
    let mut long: Vec<&PauliString> = Vec::new();
    for t in pattern.terms() {
        let sup = t.support();
        match sup.as_slice() {
            [q] => {
                let p = t.letters[*q];
                if !fields.contains(&p) {
                    fields.push(p);
                }
            }
            [a, b] if b - a == 1 => {
                let pair = (t.letters[*a], t.letters[*b]);
                if !couplings.contains(&pair) {
                    couplings.push(pair);
                }
            }
            [] => {}
            _ => long.push(t),
        }
    }
    let mut out = Vec::new();
    for &(a, b) in &couplings {
        for i in 0..n_tot.saturating_sub(1) {
            let mut letters = vec![Pauli::I; n_tot];
            letters[i] = a;
            letters[i + 1] = b;
            out.push(letters);
        }
    }
    for t in long {
        let mut offset = 0;
        while n_sys > 0 && offset + n_sys <= n_tot {
            let mut letters = vec![Pauli::I; n_tot];
            letters[offset..offset + n_sys].copy_from_slice(&t.letters);
            out.push(letters);
            offset += n_sys;
        }
    }
    for &p in &fields {
        for q in 0..n_tot {
            let mut letters = vec![Pauli::I; n_tot];
            letters[q] = p;
            out.push(letters);
        }
    }
    out
}

/// One HVA layer: a Pauli rotation per tiled term with its own angle slot,
/// followed by a CNOT chain.
pub fn build_hva_layer(pattern: &PauliSum, n_tot: usize, mode: SlotMode) -> AnsatzSpec {
    let mut spec = AnsatzSpec::empty(n_tot, 0, 0);
    let tiled = tile_pattern(pattern, n_tot);
    let count = tiled.len();
    for (slot, letters) in tiled.into_iter().enumerate() {
        spec.gates.push(GateOp::rotation(GateKind::PauliRotation { letters }, slot_source(mode, slot)));
    }
    spec.gates.extend(cnot_chain(n_tot));
    match mode {
        SlotMode::Trainable => spec.n_trainable = count,
        SlotMode::External => spec.n_external = count,
    }
    spec
}

/// Encoding (`enc_layers` SU2 with linear encoding) followed by `hva_layers`
/// trainable HVA layers, on `n_system + n_ancilla` wires.
pub fn meta_vqt_ansatz(
    family: &HamiltonianFamily,
    n_ancilla: usize,
    enc_layers: usize,
    hva_layers: usize,
) -> Result<AnsatzSpec> {
    let n_sys = family.n_qubits;
    let n_tot = n_sys + n_ancilla;
    let p = family.param_dim();
    let mut spec = AnsatzSpec::empty(n_sys, n_ancilla, p);
    spec.append(build_su2_encoding(n_tot, enc_layers, p))?;
    let pattern = family.pattern();
    for _ in 0..hva_layers {
        spec.append(build_hva_layer(&pattern, n_tot, SlotMode::Trainable))?;
    }
    spec.validate()?;
    Ok(spec)
}

/// Processing circuit whose every angle is supplied externally: `su2_layers`
/// SU2 layers then `hva_layers` HVA layers.
pub fn nn_meta_vqt_ansatz(
    family: &HamiltonianFamily,
    n_ancilla: usize,
    su2_layers: usize,
    hva_layers: usize,
) -> Result<AnsatzSpec> {
    let n_sys = family.n_qubits;
    let n_tot = n_sys + n_ancilla;
    let mut spec = AnsatzSpec::empty(n_sys, n_ancilla, family.param_dim());
    spec.append(build_su2_layers(n_tot, su2_layers, SlotMode::External))?;
    let pattern = family.pattern();
    for _ in 0..hva_layers {
        spec.append(build_hva_layer(&pattern, n_tot, SlotMode::External))?;
    }
    spec.validate()?;
    Ok(spec)
}

#[inline]
fn bit_of(n: usize, q: usize) -> usize {
    1usize << (n - 1 - q)
}

fn apply_single(amps: &mut [C64], bit: usize, m: [[C64; 2]; 2]) {
    let dim = amps.len();
    let mut base = 0;
    while base < dim {
        for i in base..base + bit {
            let a = amps[i];
            let b = amps[i | bit];
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[i | bit] = m[1][0] * a + m[1][1] * b;
        }
        base += bit << 1;
    }
}

/// `psi <- (cos t - i sin t P) psi`
fn apply_pauli_rotation(amps: &mut [C64], masks: &PauliMasks, theta: f64) {
    let (s, c) = theta.sin_cos();
    let mis = C64::new(0.0, -s);
    if masks.x == 0 {
        for (b, a) in amps.iter_mut().enumerate() {
            *a *= c + mis * masks.phase(b);
        }
        return;
    }
    for b in 0..amps.len() {
        let partner = b ^ masks.x;
        if partner < b {
            continue;
        }
        let a0 = amps[b];
        let a1 = amps[partner];
        // (P psi)[b] = phase(partner) * psi[partner]
        amps[b] = a0 * c + mis * masks.phase(partner) * a1;
        amps[partner] = a1 * c + mis * masks.phase(b) * a0;
    }
}

/// `psi <- P psi`
fn apply_pauli(amps: &mut [C64], masks: &PauliMasks) {
    if masks.x == 0 {
        for (b, a) in amps.iter_mut().enumerate() {
            *a *= masks.phase(b);
        }
        return;
    }
    for b in 0..amps.len() {
        let partner = b ^ masks.x;
        if partner < b {
            continue;
        }
        let a0 = amps[b];
        let a1 = amps[partner];
        amps[b] = masks.phase(partner) * a1;
        amps[partner] = masks.phase(b) * a0;
    }
}

fn pauli_masks(letters: &[Pauli]) -> PauliMasks {
    PauliString::new(1.0, letters.to_vec()).masks()
}

fn rotation_matrix(kind: &GateKind, theta: f64) -> [[C64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    let z = C64::new(0.0, 0.0);
    match kind {
        GateKind::Rx { .. } => [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]],
        GateKind::Ry { .. } => [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]],
        GateKind::Rz { .. } => [[C64::new(c, -s), z], [z, C64::new(c, s)]],
        _ => unreachable!("not a single-qubit rotation"),
    }
}

fn apply_kind(amps: &mut [C64], n: usize, kind: &GateKind, theta: f64) {
    match kind {
        GateKind::Rx { target } | GateKind::Ry { target } | GateKind::Rz { target } => {
            apply_single(amps, bit_of(n, *target), rotation_matrix(kind, theta))
        }
        GateKind::Cnot { control, target } => {
            let cb = bit_of(n, *control);
            let tb = bit_of(n, *target);
            for i in 0..amps.len() {
                if i & cb != 0 && i & tb == 0 {
                    amps.swap(i, i | tb);
                }
            }
        }
        GateKind::PauliRotation { letters } => apply_pauli_rotation(amps, &pauli_masks(letters), theta),
    }
}

/// Applies one gate at the given angle (ignored for CNOT).
pub fn apply_gate(state: &mut StateVector, gate: &GateOp, angle: f64) -> Result<()> {
    let n = state.n_qubits();
    let ok = match &gate.kind {
        GateKind::Rx { target } | GateKind::Ry { target } | GateKind::Rz { target } => *target < n,
        GateKind::Cnot { control, target } => *control < n && *target < n && control != target,
        GateKind::PauliRotation { letters } => letters.len() == n,
    };
    if !ok {
        return Err(Error::BadTarget(format!("{:?} on {n} qubits", gate.kind)));
    }
    apply_kind(state.amplitudes_mut(), n, &gate.kind, angle);
    Ok(())
}

/// Runs the gate list from `|0...0>` with pre-resolved per-gate angles.
pub fn simulate_angles(spec: &AnsatzSpec, angles: &[f64]) -> Result<StateVector> {
    if angles.len() != spec.gates.len() {
        return Err(Error::SlotMismatch(format!("{} angles for {} gates", angles.len(), spec.gates.len())));
    }
    let n = spec.n_qubits();
    let mut psi = StateVector::zero_state(n);
    let amps = psi.amplitudes_mut();
    for (g, &t) in spec.gates.iter().zip(angles) {
        apply_kind(amps, n, &g.kind, t);
    }
    Ok(psi)
}

pub fn simulate(spec: &AnsatzSpec, trainables: &[f64], externals: &[f64], h: &[f64]) -> Result<StateVector> {
    let angles = spec.resolve_angles(trainables, externals, h)?;
    simulate_angles(spec, &angles)
}

/// Reduced state of the first `n_system` qubits.
pub fn reduced_state(psi: &StateVector, n_system: usize) -> Result<DensityMatrix> {
    let n = psi.n_qubits();
    if n_system == 0 || n_system > n {
        return Err(Error::BadSplit { n_system, n_qubits: n });
    }
    let ds = 1usize << n_system;
    let da = 1usize << (n - n_system);
    let mut out = ComplexMatrix::zeros(ds, ds);
    gram_rows(psi.amplitudes(), ds, da, &mut out);
    Ok(DensityMatrix::new_unchecked(out))
}

/// Gradient of `<psi|O|psi>` with respect to every gate angle, `O` held fixed,
/// by one reverse sweep. `psi` must be the final state for `angles` and
/// `o_psi` must equal `O psi`.
pub fn adjoint_angle_gradient(
    spec: &AnsatzSpec,
    angles: &[f64],
    psi: &StateVector,
    o_psi: Vec<C64>,
) -> Result<Vec<f64>> {
    if angles.len() != spec.gates.len() || o_psi.len() != psi.dim() {
        return Err(Error::SlotMismatch("adjoint sweep inputs do not match the ansatz".into()));
    }
    let n = spec.n_qubits();
    let mut phi = psi.amplitudes().to_vec();
    let mut lambda = o_psi;
    let mut scratch = vec![C64::new(0.0, 0.0); phi.len()];
    let mut grad = vec![0.0; angles.len()];
    for (k, g) in spec.gates.iter().enumerate().rev() {
        if g.is_parametric() {
            scratch.copy_from_slice(&phi);
            let (masks, half) = match &g.kind {
                GateKind::Rx { target } => (pauli_masks(&single_letters(n, *target, Pauli::X)), 0.5),
                GateKind::Ry { target } => (pauli_masks(&single_letters(n, *target, Pauli::Y)), 0.5),
                GateKind::Rz { target } => (pauli_masks(&single_letters(n, *target, Pauli::Z)), 0.5),
                GateKind::PauliRotation { letters } => (pauli_masks(letters), 1.0),
                GateKind::Cnot { .. } => unreachable!(),
            };
            apply_pauli(&mut scratch, &masks);
            let overlap: C64 = lambda.iter().zip(&scratch).map(|(l, s)| l.conj() * s).sum();
            grad[k] = 2.0 * half * overlap.im;
        }
        apply_kind(&mut phi, n, &g.kind, -angles[k]);
        apply_kind(&mut lambda, n, &g.kind, -angles[k]);
    }
    Ok(grad)
}

fn single_letters(n: usize, q: usize, p: Pauli) -> Vec<Pauli> {
    let mut v = vec![Pauli::I; n];
    v[q] = p;
    v
}

/// Chains per-gate angle gradients into trainable-slot and external-slot
/// gradients: `(d/d trainables, d/d externals)`.
pub fn angle_grad_to_slots(spec: &AnsatzSpec, angle_grad: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut gt = vec![0.0; spec.n_trainable];
    let mut ge = vec![0.0; spec.n_external];
    for (g, &d) in spec.gates.iter().zip(angle_grad) {
        match &g.angle {
            Some(AngleSource::Trainable { slot }) => gt[*slot] += d,
            Some(AngleSource::External { slot }) => ge[*slot] += d,
            Some(AngleSource::EncodedLinear { weights, biases }) => {
                for ((&w, &b), &hk) in weights.iter().zip(biases).zip(h) {
                    gt[w] += d * hk;
                    gt[b] += d;
                }
            }
            None => {}
        }
    }
    (gt, ge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_kitaev_ring, build_tfim};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn ry_pi_flips() {
        let mut s = StateVector::zero_state(1);
        apply_gate(&mut s, &GateOp::rotation(GateKind::Ry { target: 0 }, AngleSource::Trainable { slot: 0 }), PI)
            .unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cnot_on_10() {
        let mut s = StateVector::basis_state(2, 0b10).unwrap();
        apply_gate(&mut s, &GateOp::cnot(0, 1), 0.0).unwrap();
        assert_eq!(s, StateVector::basis_state(2, 0b11).unwrap());
        assert!(apply_gate(&mut s, &GateOp::cnot(0, 2), 0.0).is_err());
        assert!(apply_gate(&mut s, &GateOp::cnot(1, 1), 0.0).is_err());
    }

    #[test]
    fn xx_rotation_series() {
        let mut s = StateVector::zero_state(2);
        let g = GateOp::rotation(
            GateKind::PauliRotation { letters: vec![Pauli::X, Pauli::X] },
            AngleSource::Trainable { slot: 0 },
        );
        apply_gate(&mut s, &g, PI / 4.0).unwrap();
        let a = s.amplitudes();
        assert!(close(a[0], C64::new(FRAC_1_SQRT_2, 0.0)));
        assert!(close(a[3], C64::new(0.0, -FRAC_1_SQRT_2)));
        assert!(a[1].norm() < 1e-15 && a[2].norm() < 1e-15);
    }

    #[test]
    fn rz_matches_pauli_rotation_half_angle() {
        let psi0 = StateVector::from_amplitudes(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.9)]).unwrap();
        let mut a = psi0.clone();
        let mut b = psi0;
        apply_gate(&mut a, &GateOp::rotation(GateKind::Rz { target: 0 }, AngleSource::Trainable { slot: 0 }), 0.8)
            .unwrap();
        let pr = GateOp::rotation(
            GateKind::PauliRotation { letters: vec![Pauli::Z] },
            AngleSource::Trainable { slot: 0 },
        );
        apply_gate(&mut b, &pr, 0.4).unwrap();
        assert!(a.inner(&b).norm() > 1.0 - 1e-12);
    }

    #[test]
    fn su2_encoding_slot_counts() {
        assert_eq!(build_su2_encoding(4, 2, 1).n_trainable, 32);
        assert_eq!(build_su2_encoding(8, 4, 1).n_trainable, 128);
        assert_eq!(build_su2_encoding(4, 4, 2).n_trainable, 4 * 4 * 4 * 2);
        // half of the encoding slots are weights
        let spec = build_su2_encoding(4, 2, 2);
        let w = spec.encoding_weight_slots();
        assert_eq!(w.len(), 32);
        assert!(w.iter().all(|&s| s < spec.n_trainable));
    }

    #[test]
    fn zero_weight_encoding_is_h_independent() {
        let fam = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let spec = meta_vqt_ansatz(&fam, 2, 2, 1).unwrap();
        let mut params: Vec<f64> = (0..spec.n_trainable).map(|i| (i as f64 * 0.37).sin()).collect();
        for g in &spec.gates {
            if let Some(AngleSource::EncodedLinear { weights, .. }) = &g.angle {
                for &w in weights {
                    params[w] = 0.0;
                }
            }
        }
        let a = simulate(&spec, &params, &[], &[-1.5]).unwrap();
        let b = simulate(&spec, &params, &[], &[0.9]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hva_tiling_tfim() {
        let pattern = build_tfim(2, 1.0, 1.0).unwrap();
        let frag = build_hva_layer(&pattern, 4, SlotMode::Trainable);
        let names: Vec<String> = frag
            .gates
            .iter()
            .filter_map(|g| match &g.kind {
                GateKind::PauliRotation { letters } => Some(letters.iter().map(|p| p.as_char()).collect()),
                _ => None,
            })
            .collect();
        assert_eq!(names, vec!["XXII", "IXXI", "IIXX", "ZIII", "IZII", "IIZI", "IIIZ"]);
        assert_eq!(frag.n_trainable, 7);
        assert_eq!(frag.gates.len(), 7 + 3);
    }

    #[test]
    fn hva_tiling_kitaev() {
        let pattern = build_kitaev_ring(3, 1.0, 1.0).unwrap();
        let tiled = tile_pattern(&pattern, 6);
        let strings: Vec<String> = tiled.iter().map(|l| l.iter().map(|p| p.as_char()).collect()).collect();
        assert!(strings.contains(&"YZYIII".to_string()));
        assert!(strings.contains(&"IIIYZY".to_string()));
        assert_eq!(strings.len(), 5 + 2 + 6);
    }

    #[test]
    fn empty_pattern_is_cnot_chain() {
        let frag = build_hva_layer(&PauliSum::empty(2), 4, SlotMode::Trainable);
        assert_eq!(frag.n_trainable, 0);
        assert!(frag.gates.iter().all(|g| matches!(g.kind, GateKind::Cnot { .. })));
        assert_eq!(frag.gates.len(), 3);
    }

    #[test]
    fn meta_spec_slot_count_by_hand() {
        let fam = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let spec = meta_vqt_ansatz(&fam, 2, 2, 2).unwrap();
        // 32 encoding slots + 2 layers x (3 XX + 4 Z)
        assert_eq!(spec.n_trainable, 4 * 4 * 2 + 7 * 2);
        assert_eq!(spec.n_external, 0);
    }

    #[test]
    fn trivial_simulations() {
        let spec = AnsatzSpec::empty(2, 2, 1);
        let s = simulate(&spec, &[], &[], &[0.3]).unwrap();
        assert_eq!(s, StateVector::zero_state(4));
        let fam = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let spec = meta_vqt_ansatz(&fam, 2, 0, 2).unwrap();
        let s = simulate(&spec, &vec![0.0; spec.n_trainable], &[], &[1.0]).unwrap();
        assert!(close(s.amplitudes()[0], C64::new(1.0, 0.0)));
        assert!(matches!(simulate(&spec, &[0.0], &[], &[1.0]), Err(Error::SlotMismatch(_))));
        assert!(matches!(simulate(&spec, &vec![0.0; spec.n_trainable], &[], &[]), Err(Error::SlotMismatch(_))));
    }

    #[test]
    fn bell_circuit_reduces_to_maximally_mixed() {
        let mut spec = AnsatzSpec::empty(1, 1, 0);
        spec.gates.push(GateOp::rotation(GateKind::Ry { target: 0 }, AngleSource::Trainable { slot: 0 }));
        spec.gates.push(GateOp::cnot(0, 1));
        spec.n_trainable = 1;
        spec.validate().unwrap();
        let psi = simulate(&spec, &[PI / 2.0], &[], &[]).unwrap();
        let rho = reduced_state(&psi, 1).unwrap();
        assert!(rho.matrix().max_abs_diff(DensityMatrix::maximally_mixed(1).matrix()) < 1e-14);
        assert!(matches!(reduced_state(&psi, 0), Err(Error::BadSplit { .. })));
        assert!(matches!(reduced_state(&psi, 3), Err(Error::BadSplit { .. })));
    }

    #[test]
    fn reduced_state_agrees_with_partial_trace() {
        let fam = HamiltonianFamily::tfim(2, 1.0).unwrap();
        let spec = meta_vqt_ansatz(&fam, 2, 1, 1).unwrap();
        let params: Vec<f64> = (0..spec.n_trainable).map(|i| (i as f64).cos()).collect();
        let psi = simulate(&spec, &params, &[], &[0.4]).unwrap();
        let a = reduced_state(&psi, 2).unwrap();
        let b = crate::linalg::partial_trace(&psi, &[0, 1]).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-14);
    }

    #[test]
    fn validation_catches_bad_slots() {
        let mut spec = build_su2_layers(2, 1, SlotMode::Trainable);
        spec.n_trainable += 1;
        assert!(matches!(spec.validate(), Err(Error::SlotMismatch(_))));
        let mut spec = build_su2_layers(2, 1, SlotMode::Trainable);
        spec.gates.push(GateOp::cnot(0, 5));
        assert!(matches!(spec.validate(), Err(Error::BadTarget(_))));
    }

    #[test]
    fn json_round_trip() {
        let fam = HamiltonianFamily::kitaev_ring(3, 1.0).unwrap();
        let spec = meta_vqt_ansatz(&fam, 3, 1, 1).unwrap();
        let text = spec.to_json().unwrap();
        assert!(text.contains("\"schema_version\": \"1.0\""));
        assert_eq!(AnsatzSpec::from_json(&text).unwrap(), spec);
        let bumped = text.replace("\"1.0\"", "\"2.0\"");
        assert!(AnsatzSpec::from_json(&bumped).is_err());
    }
}
