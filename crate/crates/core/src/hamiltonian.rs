//! Pauli-string Hamiltonians: builders for the model families, dense
//! realization, expectation values and commuting-block partitioning.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix, C64};

/// Largest register realized densely.
pub const DENSE_LIMIT: usize = 10;
/// Terms with smaller magnitude are dropped on canonicalization.
pub const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Bit masks describing the action `P|b> = phase(b) |b ^ x>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliMasks {
    pub x: usize,
    pub z: usize,
    pub n_y: u32,
}

impl PauliMasks {
    /// Phase picked up by basis state `b` under the string.
    #[inline]
    pub fn phase(&self, b: usize) -> C64 {
        let sign = if (b & self.z).count_ones() & 1 == 0 { 1.0 } else { -1.0 };
        match self.n_y % 4 {
            0 => C64::new(sign, 0.0),
            1 => C64::new(0.0, sign),
            2 => C64::new(-sign, 0.0),
            _ => C64::new(0.0, -sign),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub coefficient: f64,
    pub letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(coefficient: f64, letters: Vec<Pauli>) -> Self {
        Self { coefficient, letters }
    }

    /// Parses letters such as `"XZI"`.
    pub fn from_letters(coefficient: f64, letters: &str) -> Result<Self> {
        let letters = letters
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { coefficient, letters })
    }

    /// Single non-identity letter at `qubit` on an `n`-qubit register.
    pub fn single(coefficient: f64, n: usize, qubit: usize, p: Pauli) -> Self {
        let mut letters = vec![Pauli::I; n];
        letters[qubit] = p;
        Self { coefficient, letters }
    }

    pub fn pair(coefficient: f64, n: usize, a: (usize, Pauli), b: (usize, Pauli)) -> Self {
        let mut letters = vec![Pauli::I; n];
        letters[a.0] = a.1;
        letters[b.0] = b.1;
        Self { coefficient, letters }
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn support(&self) -> Vec<usize> {
        self.letters.iter().enumerate().filter(|(_, &p)| p != Pauli::I).map(|(i, _)| i).collect()
    }

    pub fn letter_string(&self) -> String {
        self.letters.iter().map(|p| p.as_char()).collect()
    }

    /// Two strings commute iff they anticommute on an even number of positions.
    pub fn commutes_with(&self, other: &Self) -> bool {
        let clashes = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        clashes % 2 == 0
    }

    pub fn masks(&self) -> PauliMasks {
        let n = self.letters.len();
        let mut m = PauliMasks { x: 0, z: 0, n_y: 0 };
        for (q, &p) in self.letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => m.x |= bit,
                Pauli::Z => m.z |= bit,
                Pauli::Y => {
                    m.x |= bit;
                    m.z |= bit;
                    m.n_y += 1;
                }
            }
        }
        m
    }
}

/// Canonical real-weighted sum of Pauli strings: letter arrays are unique and
/// negligible coefficients are dropped. Term order follows first occurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliString>,
}

impl PauliSum {
    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = PauliString>) -> Result<Self> {
        let mut merged: Vec<PauliString> = Vec::new();
        for t in terms {
            if t.letters.len() != n_qubits {
                return Err(Error::LengthMismatch { expected: n_qubits, found: t.letters.len() });
            }
            if !t.coefficient.is_finite() {
                return Err(Error::ConfigInvalid(format!("non-finite coefficient on {}", t.letter_string())));
            }
            match merged.iter_mut().find(|m| m.letters == t.letters) {
                Some(m) => m.coefficient += t.coefficient,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.coefficient.abs() >= DROP_TOL);
        Ok(Self { n_qubits, terms: merged })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.n_qubits, self.terms.iter().map(|t| PauliString::new(t.coefficient * s, t.letters.clone())))
    }

    /// Parses the line format produced by `Display`: `<coef> <letters>` per line.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut n = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(c), Some(l), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("line {}: expected `<coef> <letters>`", lineno + 1)));
            };
            let coef: f64 = c.parse().map_err(|_| Error::Parse(format!("line {}: bad coefficient {c:?}", lineno + 1)))?;
            let term = PauliString::from_letters(coef, l)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            match n {
                None => n = Some(term.n_qubits()),
                Some(n) if n != term.n_qubits() => {
                    return Err(Error::Parse(format!("line {}: expected {n} letters", lineno + 1)))
                }
                _ => {}
            }
            terms.push(term);
        }
        let n = n.ok_or_else(|| Error::Parse("no terms".into()))?;
        Self::new(n, terms)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{:?} {}", t.coefficient, t.letter_string())?;
        }
        Ok(())
    }
}

impl FromStr for PauliSum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_text(s)
    }
}

pub fn build_tfim(n: usize, coupling: f64, field: f64) -> Result<PauliSum> {
    if n < 2 {
        return Err(Error::InvalidSize { size: n, reason: "TFIM needs at least 2 sites" });
    }
    let couplings = (0..n - 1).map(|i| PauliString::pair(-coupling, n, (i, Pauli::X), (i + 1, Pauli::X)));
    let fields = (0..n).map(|i| PauliString::single(-field, n, i, Pauli::Z));
    PauliSum::new(n, couplings.chain(fields))
}

/// Kitaev ring: open XX chain, the boundary string `Y Z...Z Y`, and Z fields.
pub fn build_kitaev_ring(l: usize, coupling: f64, field: f64) -> Result<PauliSum> {
    if l < 3 {
        return Err(Error::InvalidSize { size: l, reason: "Kitaev ring needs at least 3 sites" });
    }
    let mut terms: Vec<PauliString> =
        (0..l - 1).map(|i| PauliString::pair(-coupling, l, (i, Pauli::X), (i + 1, Pauli::X))).collect();
    let mut string = vec![Pauli::Z; l];
    string[0] = Pauli::Y;
    string[l - 1] = Pauli::Y;
    terms.push(PauliString::new(-coupling, string));
    terms.extend((0..l).map(|i| PauliString::single(-field, l, i, Pauli::Z)));
    PauliSum::new(l, terms)
}

fn heisenberg_coupling_terms(coupling: f64) -> Vec<PauliString> {
    [Pauli::X, Pauli::Y, Pauli::Z].iter().map(|&p| PauliString::pair(-coupling, 2, (0, p), (1, p))).collect()
}

fn heisenberg_field_terms(field: f64) -> Vec<PauliString> {
    (0..2)
        .flat_map(|q| [Pauli::X, Pauli::Y, Pauli::Z].map(|p| PauliString::single(-field, 2, q, p)))
        .collect()
}

/// Two-qubit Heisenberg coupling with X, Y and Z fields on both sites.
pub fn build_heisenberg_fields(coupling: f64, field: f64) -> PauliSum {
    PauliSum::new(2, heisenberg_coupling_terms(coupling).into_iter().chain(heisenberg_field_terms(field)))
        .expect("fixed two-qubit layout")
}

/// `sum_i coeffs[i] * basis[i]` where each basis element is a Pauli pattern.
pub fn build_qbm_hamiltonian(coeffs: &[f64], basis: &[PauliSum]) -> Result<PauliSum> {
    if coeffs.len() != basis.len() {
        return Err(Error::LengthMismatch { expected: basis.len(), found: coeffs.len() });
    }
    let n = basis.first().map(PauliSum::n_qubits).unwrap_or(0);
    let mut terms = Vec::new();
    for (c, pattern) in coeffs.iter().zip(basis) {
        if pattern.n_qubits() != n {
            return Err(Error::LengthMismatch { expected: n, found: pattern.n_qubits() });
        }
        terms.extend(pattern.terms().iter().map(|t| PauliString::new(c * t.coefficient, t.letters.clone())));
    }
    PauliSum::new(n, terms)
}

/// The two-parameter Hamiltonians used to probe robustness against the number
/// of commuting blocks; row 6 is the full Heisenberg-with-fields model.
pub fn complexity_row(row: usize) -> Result<(PauliSum, PauliSum)> {
    use Pauli::*;
    let couplings: &[Pauli] = match row {
        1..=4 => &[X],
        5 => &[X, Y],
        6 => &[X, Y, Z],
        _ => return Err(Error::ConfigInvalid(format!("complexity row {row} not in 1..=6"))),
    };
    let fields: &[Pauli] = match row {
        1 => &[],
        2 => &[X],
        3 => &[X, Z],
        _ => &[X, Z, Y],
    };
    let j = PauliSum::new(2, couplings.iter().map(|&p| PauliString::pair(-1.0, 2, (0, p), (1, p))))?;
    let h = PauliSum::new(
        2,
        (0..2).flat_map(|q| fields.iter().map(move |&p| PauliString::single(-1.0, 2, q, p))),
    )?;
    Ok((j, h))
}

pub fn to_dense(hs: &PauliSum) -> Result<ComplexMatrix> {
    let n = hs.n_qubits;
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n_qubits: n, limit: DENSE_LIMIT });
    }
    let dim = 1usize << n;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for t in &hs.terms {
        let masks = t.masks();
        for col in 0..dim {
            let row = col ^ masks.x;
            let v = m.get(row, col) + masks.phase(col) * t.coefficient;
            m.set(row, col, v);
        }
    }
    Ok(m)
}

/// `Tr[P rho]` for a single Pauli string.
fn pauli_trace(masks: &PauliMasks, rho: &ComplexMatrix) -> C64 {
    let dim = rho.rows();
    (0..dim).map(|c| masks.phase(c) * rho.get(c, c ^ masks.x)).sum()
}

/// `Tr[H rho]`
pub fn expectation(hs: &PauliSum, rho: &DensityMatrix) -> Result<f64> {
    let dim = 1usize << hs.n_qubits;
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
    }
    let total: C64 = hs.terms.iter().map(|t| pauli_trace(&t.masks(), rho.matrix()) * t.coefficient).sum();
    Ok(total.re)
}

/// Greedy partition into groups of mutually commuting terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    /// Term indices (into `PauliSum::terms`) of each block.
    pub blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    pub fn count(&self) -> usize {
        self.blocks.len()
    }
}

/// First-fit grouping over the terms taken in ascending Pauli weight (stable
/// with respect to construction order). General commutation, not qubit-wise.
pub fn commuting_blocks(hs: &PauliSum) -> BlockPartition {
    let mut order: Vec<usize> = (0..hs.terms.len()).collect();
    order.sort_by_key(|&i| hs.terms[i].weight());
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let t = &hs.terms[i];
        match blocks.iter_mut().find(|b| b.iter().all(|&j| hs.terms[j].commutes_with(t))) {
            Some(b) => b.push(i),
            None => blocks.push(vec![i]),
        }
    }
    BlockPartition { blocks }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// Parameter: transverse field `h`.
    Tfim,
    /// Parameter: transverse field `h`.
    KitaevRing,
    /// Parameters: `(J, h)`.
    HeisenbergFields,
    /// Parameters: one coefficient per basis pattern.
    GenericQbm { basis: Vec<PauliSum> },
}

/// A parameterized Hamiltonian `H(h)` with `param_dim` real parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianFamily {
    pub kind: FamilyKind,
    pub n_qubits: usize,
    /// Fixed coupling `J` for the single-parameter families.
    pub coupling: f64,
}

impl HamiltonianFamily {
    pub fn tfim(n: usize, coupling: f64) -> Result<Self> {
        build_tfim(n, coupling, 0.0)?;
        Ok(Self { kind: FamilyKind::Tfim, n_qubits: n, coupling })
    }

    pub fn kitaev_ring(l: usize, coupling: f64) -> Result<Self> {
        build_kitaev_ring(l, coupling, 0.0)?;
        Ok(Self { kind: FamilyKind::KitaevRing, n_qubits: l, coupling })
    }

    pub fn heisenberg_fields() -> Self {
        Self { kind: FamilyKind::HeisenbergFields, n_qubits: 2, coupling: 1.0 }
    }

    pub fn generic(basis: Vec<PauliSum>) -> Result<Self> {
        let n = basis.first().map(PauliSum::n_qubits).ok_or_else(|| Error::ConfigInvalid("empty QBM basis".into()))?;
        if basis.iter().any(|b| b.n_qubits() != n) {
            return Err(Error::ConfigInvalid("QBM basis patterns differ in width".into()));
        }
        Ok(Self { kind: FamilyKind::GenericQbm { basis }, n_qubits: n, coupling: 1.0 })
    }

    /// Row `1..=6` of the commuting-block study as a `(J, h)` family.
    pub fn complexity(row: usize) -> Result<Self> {
        let (j, h) = complexity_row(row)?;
        Self::generic(vec![j, h])
    }

    pub fn param_dim(&self) -> usize {
        match &self.kind {
            FamilyKind::Tfim | FamilyKind::KitaevRing => 1,
            FamilyKind::HeisenbergFields => 2,
            FamilyKind::GenericQbm { basis } => basis.len(),
        }
    }

    pub fn build(&self, params: &[f64]) -> Result<PauliSum> {
        if params.len() != self.param_dim() {
            return Err(Error::LengthMismatch { expected: self.param_dim(), found: params.len() });
        }
        match &self.kind {
            FamilyKind::Tfim => build_tfim(self.n_qubits, self.coupling, params[0]),
            FamilyKind::KitaevRing => build_kitaev_ring(self.n_qubits, self.coupling, params[0]),
            FamilyKind::HeisenbergFields => Ok(build_heisenberg_fields(params[0], params[1])),
            FamilyKind::GenericQbm { basis } => build_qbm_hamiltonian(params, basis),
        }
    }

    /// Term layout with unit couplings and fields, used to shape HVA layers.
    pub fn pattern(&self) -> PauliSum {
        let unit = |t: &PauliString| PauliString::new(1.0, t.letters.clone());
        let raw = match &self.kind {
            FamilyKind::Tfim => build_tfim(self.n_qubits, 1.0, 1.0).expect("validated size"),
            FamilyKind::KitaevRing => build_kitaev_ring(self.n_qubits, 1.0, 1.0).expect("validated size"),
            FamilyKind::HeisenbergFields => build_heisenberg_fields(1.0, 1.0),
            FamilyKind::GenericQbm { basis } => {
                let terms: Vec<PauliString> = basis.iter().flat_map(|b| b.terms().iter().map(unit)).collect();
                // letter-unique union; coefficients are irrelevant for the layout
                let mut uniq: Vec<PauliString> = Vec::new();
                for t in terms {
                    if !uniq.iter().any(|u| u.letters == t.letters) {
                        uniq.push(t);
                    }
                }
                return PauliSum::new(self.n_qubits, uniq).expect("uniform width");
            }
        };
        PauliSum::new(self.n_qubits, raw.terms().iter().map(unit)).expect("uniform width")
    }

    pub fn label(&self) -> String {
        match &self.kind {
            FamilyKind::Tfim => format!("tfim-n{}", self.n_qubits),
            FamilyKind::KitaevRing => format!("kitaev-l{}", self.n_qubits),
            FamilyKind::HeisenbergFields => "heisenberg-fields".into(),
            FamilyKind::GenericQbm { basis } => format!("generic-{}x{}", self.n_qubits, basis.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eig;

    fn letters(hs: &PauliSum) -> Vec<(f64, String)> {
        hs.terms().iter().map(|t| (t.coefficient, t.letter_string())).collect()
    }

    #[test]
    fn tfim_terms() {
        let h = build_tfim(2, 1.0, 0.0).unwrap();
        assert_eq!(letters(&h), vec![(-1.0, "XX".to_string())]);
        let h = build_tfim(3, 1.0, 1.0).unwrap();
        assert_eq!(h.len(), 5);
        assert_eq!(h.terms().iter().filter(|t| t.weight() == 2).count(), 2);
        assert!(matches!(build_tfim(1, 1.0, 1.0), Err(Error::InvalidSize { .. })));
    }

    #[test]
    fn tfim_two_site_spectrum() {
        let m = to_dense(&build_tfim(2, 1.0, 0.0).unwrap()).unwrap();
        let s = hermitian_eig(&m).unwrap();
        for (l, e) in s.eigenvalues.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((l - e).abs() < 1e-12);
        }
    }

    #[test]
    fn kitaev_terms() {
        let h = build_kitaev_ring(3, 1.0, 0.0).unwrap();
        assert_eq!(
            letters(&h),
            vec![(-1.0, "XXI".into()), (-1.0, "IXX".into()), (-1.0, "YZY".into())]
        );
        let h = build_kitaev_ring(4, 1.0, 0.5).unwrap();
        assert!(h.terms().iter().any(|t| t.letter_string() == "YZZY"));
        assert_eq!(h.len(), 3 + 1 + 4);
        assert!(build_kitaev_ring(2, 1.0, 0.0).is_err());
    }

    #[test]
    fn heisenberg_terms_and_ground_energy() {
        let h = build_heisenberg_fields(1.0, 0.0);
        assert_eq!(letters(&h), vec![(-1.0, "XX".into()), (-1.0, "YY".into()), (-1.0, "ZZ".into())]);
        let h = build_heisenberg_fields(0.0, 1.0);
        assert_eq!(h.len(), 6);
        assert!(h.terms().iter().all(|t| t.coefficient == -1.0 && t.weight() == 1));
        // brute force: -1 - 2 sqrt(3)
        let s = hermitian_eig(&to_dense(&build_heisenberg_fields(1.0, 1.0)).unwrap()).unwrap();
        assert!((s.eigenvalues[0] - (-1.0 - 2.0 * 3f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn qbm_builder() {
        let z = PauliSum::new(2, [PauliString::from_letters(1.0, "ZI").unwrap()]).unwrap();
        let h = build_qbm_hamiltonian(&[1.0], std::slice::from_ref(&z)).unwrap();
        assert_eq!(letters(&h), vec![(1.0, "ZI".into())]);
        assert!(matches!(build_qbm_hamiltonian(&[1.0, 2.0], std::slice::from_ref(&z)), Err(Error::LengthMismatch { .. })));
        let zero = build_qbm_hamiltonian(&[0.0], &[z]).unwrap();
        assert!(zero.is_empty());
        assert!(to_dense(&zero).unwrap().norm() == 0.0);

        let fam = HamiltonianFamily::complexity(6).unwrap();
        for (j, h) in [(1.0, 1.0), (-0.3, 1.7), (2.0, -0.5)] {
            let a = to_dense(&fam.build(&[j, h]).unwrap()).unwrap();
            let b = to_dense(&build_heisenberg_fields(j, h)).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-14);
        }
    }

    #[test]
    fn dense_examples() {
        let z = PauliSum::new(1, [PauliString::from_letters(1.0, "Z").unwrap()]).unwrap();
        assert!(to_dense(&z).unwrap().max_abs_diff(&ComplexMatrix::from_diag(&[1.0, -1.0])) == 0.0);
        let xx = PauliSum::new(2, [PauliString::from_letters(1.0, "XX").unwrap()]).unwrap();
        let anti = ComplexMatrix::from_real(
            4,
            4,
            &[0., 0., 0., 1., 0., 0., 1., 0., 0., 1., 0., 0., 1., 0., 0., 0.],
        )
        .unwrap();
        assert_eq!(to_dense(&xx).unwrap(), anti);
        let tr = to_dense(&build_tfim(2, 1.0, 1.0).unwrap()).unwrap().trace();
        assert!(tr.norm() < 1e-14);
        let big = build_tfim(11, 1.0, 1.0).unwrap();
        assert!(matches!(to_dense(&big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn y_phase_convention() {
        let y = PauliSum::new(1, [PauliString::from_letters(1.0, "Y").unwrap()]).unwrap();
        let m = to_dense(&y).unwrap();
        assert_eq!(m.get(0, 1), C64::new(0.0, -1.0));
        assert_eq!(m.get(1, 0), C64::new(0.0, 1.0));
    }

    #[test]
    fn expectation_examples() {
        let z = PauliSum::new(1, [PauliString::from_letters(1.0, "Z").unwrap()]).unwrap();
        let zero = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(expectation(&z, &zero).unwrap(), 1.0);
        assert_eq!(expectation(&z, &DensityMatrix::maximally_mixed(1)).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = crate::linalg::StateVector::from_amplitudes(vec![
            C64::new(h, 0.),
            C64::new(0., 0.),
            C64::new(0., 0.),
            C64::new(h, 0.),
        ])
        .unwrap();
        let e = expectation(&build_tfim(2, 1.0, 0.0).unwrap(), &bell.to_density()).unwrap();
        assert!((e + 1.0).abs() < 1e-12);
        assert!(matches!(
            expectation(&z, &DensityMatrix::maximally_mixed(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn complexity_block_counts() {
        let counts: Vec<usize> = (1..=6)
            .map(|r| {
                let (j, h) = complexity_row(r).unwrap();
                let full = build_qbm_hamiltonian(&[1.0, 1.0], &[j, h]).unwrap();
                commuting_blocks(&full).count()
            })
            .collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 3, 3]);
        assert_eq!(commuting_blocks(&build_heisenberg_fields(1.0, 1.0)).count(), 3);
    }

    #[test]
    fn blocks_are_commuting() {
        let h = build_kitaev_ring(4, 1.0, 0.7).unwrap();
        let part = commuting_blocks(&h);
        let mut seen: Vec<usize> = part.blocks.concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..h.len()).collect::<Vec<_>>());
        for b in &part.blocks {
            for &i in b {
                for &j in b {
                    assert!(h.terms()[i].commutes_with(&h.terms()[j]));
                }
            }
        }
    }

    #[test]
    fn canonical_merge() {
        let split = PauliSum::new(
            2,
            [
                PauliString::from_letters(-0.25, "XX").unwrap(),
                PauliString::from_letters(0.5, "ZI").unwrap(),
                PauliString::from_letters(-0.75, "XX").unwrap(),
                PauliString::from_letters(-0.5, "ZI").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(letters(&split), vec![(-1.0, "XX".into())]);
    }

    #[test]
    fn text_round_trip() {
        let h = build_kitaev_ring(3, 1.0, 0.3).unwrap();
        let text = h.to_string();
        assert!(text.starts_with("-1.0 XXI\n"));
        let back: PauliSum = text.parse().unwrap();
        assert_eq!(back, h);
        assert!(PauliSum::parse_text("1.0 XQ").is_err());
        assert!(PauliSum::parse_text("1.0 XX\n2.0 X").is_err());
    }

    #[test]
    fn family_build_and_pattern() {
        let f = HamiltonianFamily::tfim(3, 1.0).unwrap();
        assert_eq!(f.param_dim(), 1);
        assert!(f.build(&[1.0, 2.0]).is_err());
        let p = f.pattern();
        assert_eq!(p.len(), 5);
        assert!(p.terms().iter().all(|t| t.coefficient == 1.0));
        assert_eq!(HamiltonianFamily::heisenberg_fields().param_dim(), 2);
        assert_eq!(HamiltonianFamily::complexity(1).unwrap().param_dim(), 2);
    }
}
