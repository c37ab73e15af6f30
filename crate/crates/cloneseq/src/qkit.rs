//! Multi-qubit state-space core: bit-vector index algebra, Pauli error
//! operators, generalized Bell states, mutually unbiased bases and the
//! enumeration of protocol input ensembles.
//!
//! Conventions used everywhere in this crate: qubit 0 is the leftmost
//! tensor factor, basis-state indices are big-endian in qubit order, and
//! state equality is always up to a global phase.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::{Error, Result};

pub const NORM_TOL: f64 = 1e-12;
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// An N-component vector over {0,1}, stored as a big-endian bit mask so it
/// doubles as the integer index of the corresponding basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitVector {
    bits: usize,
    len: usize,
}

impl BitVector {
    pub fn zero(len: usize) -> Self {
        BitVector { bits: 0, len }
    }

    /// Builds from an integer index; bit for qubit `i` sits at position `len - 1 - i`.
    pub fn from_index(bits: usize, len: usize) -> Result<Self> {
        if len == 0 || len > usize::BITS as usize - 2 {
            return Err(Error::InvalidInput(format!("bad bit-vector length {len}")));
        }
        if bits >> len != 0 {
            return Err(Error::InvalidInput(format!(
                "index {bits} does not fit in {len} bits"
            )));
        }
        Ok(BitVector { bits, len })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut v = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::InvalidInput(format!("bit value {b} not in {{0,1}}")));
            }
            v = (v << 1) | b as usize;
        }
        Self::from_index(v, bits.len())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self) -> usize {
        self.bits
    }

    /// Bit of qubit `i` (zero-based, leftmost tensor factor first).
    pub fn get(&self, i: usize) -> u8 {
        ((self.bits >> (self.len - 1 - i)) & 1) as u8
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Componentwise XOR (addition modulo 2).
    pub fn xor(&self, other: &BitVector) -> BitVector {
        debug_assert_eq!(self.len, other.len);
        BitVector {
            bits: self.bits ^ other.bits,
            len: self.len,
        }
    }

    /// Parity of the bitwise scalar product.
    pub fn dot_parity(&self, other: &BitVector) -> u8 {
        debug_assert_eq!(self.len, other.len);
        ((self.bits & other.bits).count_ones() & 1) as u8
    }
}

/// Label (m, n) of the Pauli error operator U = X^{m_i} Z^{n_i} on each qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliLabel {
    pub m: BitVector,
    pub n: BitVector,
}

impl PauliLabel {
    pub fn new(m: BitVector, n: BitVector) -> Result<Self> {
        if m.len() != n.len() {
            return Err(Error::DimensionMismatch(format!(
                "bit-flip length {} != phase-flip length {}",
                m.len(),
                n.len()
            )));
        }
        Ok(PauliLabel { m, n })
    }

    pub fn identity(len: usize) -> Self {
        PauliLabel {
            m: BitVector::zero(len),
            n: BitVector::zero(len),
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Protocol {
    Bb84,
    SixState,
}

impl Protocol {
    pub fn bases(&self) -> &'static [Basis] {
        match self {
            Protocol::Bb84 => &[Basis::Z, Basis::X],
            Protocol::SixState => &[Basis::Z, Basis::X, Basis::Y],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::SixState => "six-state",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BasisMode {
    /// A fresh basis is drawn for every qubit of the sequence.
    Independent,
    /// One basis covers the entire N-qubit sequence.
    Correlated,
}

impl BasisMode {
    pub fn name(&self) -> &'static str {
        match self {
            BasisMode::Independent => "independent",
            BasisMode::Correlated => "correlated",
        }
    }
}

/// Normalized complex state vector on 2^N dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "state dimension {} is not a power of two",
                amps.len()
            )));
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "squared norm {norm_sq} deviates from 1 by more than {NORM_TOL}"
            )));
        }
        Ok(PureState { amps })
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let dim = 1usize << n_qubits;
        assert!(index < dim);
        let mut amps = vec![Complex64::ZERO; dim];
        amps[index] = Complex64::ONE;
        PureState { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn overlap(&self, other: &PureState) -> Complex64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |<self|other>|, the phase-insensitive equality measure.
    pub fn overlap_mag(&self, other: &PureState) -> f64 {
        self.overlap(other).norm()
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        PureState { amps }
    }
}

/// Applies U_{m,n} = tensor of X^{m_i} Z^{n_i} (convention X^1 Z^1 = -i sigma_y).
///
/// On a basis state: U |k> = (-1)^{k.n} |k xor m>.
pub fn apply_pauli(label: &PauliLabel, state: &PureState) -> Result<PureState> {
    if label.len() != state.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "label on {} qubits applied to state on {}",
            label.len(),
            state.n_qubits()
        )));
    }
    let len = label.len();
    let mut out = vec![Complex64::ZERO; state.dim()];
    for (k, amp) in state.amps.iter().enumerate() {
        let kv = BitVector::from_index(k, len).expect("index in range");
        let sign = if kv.dot_parity(&label.n) == 1 { -1.0 } else { 1.0 };
        out[k ^ label.m.index()] += amp * sign;
    }
    Ok(PureState { amps: out })
}

/// Generalized Bell state |B_{m,n}> = 2^{-N/2} sum_k (-1)^{k.n} |k>|k xor m>
/// on a doubled 2N-qubit space.
pub fn bell_state(label: &PauliLabel) -> PureState {
    let len = label.len();
    let dim = 1usize << len;
    let norm = 1.0 / (dim as f64).sqrt();
    let mut amps = vec![Complex64::ZERO; dim * dim];
    for k in 0..dim {
        let kv = BitVector::from_index(k, len).expect("index in range");
        let sign = if kv.dot_parity(&label.n) == 1 { -norm } else { norm };
        amps[k * dim + (k ^ label.m.index())] = Complex64::new(sign, 0.0);
    }
    PureState { amps }
}

/// The two orthonormal single-qubit eigenstates of the given basis.
pub fn mub_eigenstates(basis: Basis) -> [PureState; 2] {
    [single_qubit_eigenstate(basis, 0), single_qubit_eigenstate(basis, 1)]
}

/// Eigenstate `bit` of a single-qubit basis: Z -> |0>,|1>; X -> (|0>±|1>)/sqrt2;
/// Y -> (|0>±i|1>)/sqrt2.
pub fn single_qubit_eigenstate(basis: Basis, bit: u8) -> PureState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match (basis, bit) {
        (Basis::Z, 0) => vec![Complex64::ONE, Complex64::ZERO],
        (Basis::Z, _) => vec![Complex64::ZERO, Complex64::ONE],
        (Basis::X, 0) => vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
        (Basis::X, _) => vec![Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
        (Basis::Y, 0) => vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)],
        (Basis::Y, _) => vec![Complex64::new(s, 0.0), Complex64::new(0.0, -s)],
    };
    PureState { amps }
}

/// Whether the error (m_i, n_i) leaves an eigenstate of `basis` fixed up to
/// phase: Z needs m=0, X needs n=0, Y needs m=n.
pub fn delta_pass(basis: Basis, m_bit: u8, n_bit: u8) -> bool {
    match basis {
        Basis::Z => m_bit == 0,
        Basis::X => n_bit == 0,
        Basis::Y => m_bit == n_bit,
    }
}

/// One product input state together with its per-qubit basis labels and
/// eigenstate bits.
#[derive(Debug, Clone)]
pub struct EnsembleEntry {
    pub state: PureState,
    pub qubits: Vec<(Basis, u8)>,
}

impl EnsembleEntry {
    fn build(qubits: Vec<(Basis, u8)>) -> Self {
        let mut state = single_qubit_eigenstate(qubits[0].0, qubits[0].1);
        for &(b, bit) in &qubits[1..] {
            state = state.tensor(&single_qubit_eigenstate(b, bit));
        }
        EnsembleEntry { state, qubits }
    }
}

/// The finite set of product states Eve must clone for a given protocol,
/// sequence length and basis-correlation mode.
#[derive(Debug, Clone)]
pub struct InputEnsemble {
    pub protocol: Protocol,
    pub n: usize,
    pub mode: BasisMode,
    pub entries: Vec<EnsembleEntry>,
}

/// Enumerates the input ensemble: Independent mode takes all per-qubit basis
/// assignments ((2 * #bases)^N states), Correlated mode one basis for the
/// whole sequence (#bases * 2^N states).
pub fn enumerate_ensemble(protocol: Protocol, n: usize, mode: BasisMode) -> Result<InputEnsemble> {
    if n == 0 {
        return Err(Error::InvalidInput("sequence length must be >= 1".into()));
    }
    let bases = protocol.bases();
    let mut assignments: Vec<Vec<Basis>> = Vec::new();
    match mode {
        BasisMode::Correlated => {
            for &b in bases {
                assignments.push(vec![b; n]);
            }
        }
        BasisMode::Independent => {
            let mut stack = vec![Vec::new()];
            for _ in 0..n {
                let mut next = Vec::new();
                for partial in &stack {
                    for &b in bases {
                        let mut ext = partial.clone();
                        ext.push(b);
                        next.push(ext);
                    }
                }
                stack = next;
            }
            assignments = stack;
        }
    }
    let mut entries = Vec::new();
    for assignment in &assignments {
        for bits in 0..(1usize << n) {
            let qubits: Vec<(Basis, u8)> = assignment
                .iter()
                .enumerate()
                .map(|(i, &b)| (b, ((bits >> (n - 1 - i)) & 1) as u8))
                .collect();
            entries.push(EnsembleEntry::build(qubits));
        }
    }
    Ok(InputEnsemble {
        protocol,
        n,
        mode,
        entries,
    })
}

/// Positive unit-trace Hermitian matrix on a 2^N-dimensional space.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: Vec<Complex64>,
    dim: usize,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity before accepting.
    pub fn new(entries: Vec<Complex64>, dim: usize) -> Result<Self> {
        if entries.len() != dim * dim || !dim.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "expected {dim}x{dim} matrix on a power-of-two dimension"
            )));
        }
        for r in 0..dim {
            for c in 0..dim {
                let d = (entries[r * dim + c] - entries[c * dim + r].conj()).norm();
                if d > HERMITICITY_TOL {
                    return Err(Error::InvalidInput(format!(
                        "not Hermitian: |rho[{r},{c}] - conj(rho[{c},{r}])| = {d:e}"
                    )));
                }
            }
        }
        let trace: Complex64 = (0..dim).map(|i| entries[i * dim + i]).sum();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!("trace {trace} != 1")));
        }
        let mat = DMatrix::from_fn(dim, dim, |r, c| entries[r * dim + c]);
        let eig = mat.symmetric_eigenvalues();
        if let Some(min) = eig.iter().cloned().reduce(f64::min) {
            if min < -POSITIVITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "negative eigenvalue {min:e}"
                )));
            }
        }
        Ok(DensityMatrix { entries, dim })
    }

    pub fn from_pure(state: &PureState) -> Self {
        let dim = state.dim();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(state.amps[r] * state.amps[c].conj());
            }
        }
        DensityMatrix { entries, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.dim + c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// <psi|rho|psi>.
    pub fn expectation(&self, state: &PureState) -> f64 {
        debug_assert_eq!(self.dim, state.dim());
        let mut acc = Complex64::ZERO;
        for r in 0..self.dim {
            for c in 0..self.dim {
                acc += state.amps[r].conj() * self.get(r, c) * state.amps[c];
            }
        }
        acc.re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mat = DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c));
        mat.symmetric_eigenvalues()
            .iter()
            .cloned()
            .reduce(f64::min)
            .unwrap_or(0.0)
    }

    /// Traces out every qubit not listed in `keep` (indices ascending).
    pub fn partial_trace_keep(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.n_qubits();
        if keep.is_empty() || keep.iter().any(|&q| q >= n) || keep.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidInput(format!(
                "keep set {keep:?} invalid for {n} qubits"
            )));
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let kd = 1usize << keep.len();
        let td = 1usize << traced.len();
        // Scatter the bits of a sub-index back into the full big-endian index.
        let place = |sub: usize, qubits: &[usize]| -> usize {
            let mut full = 0usize;
            for (pos, &q) in qubits.iter().enumerate() {
                let bit = (sub >> (qubits.len() - 1 - pos)) & 1;
                full |= bit << (n - 1 - q);
            }
            full
        };
        let mut out = vec![Complex64::ZERO; kd * kd];
        for r in 0..kd {
            for c in 0..kd {
                let mut acc = Complex64::ZERO;
                for t in 0..td {
                    let fr = place(r, keep) | place(t, &traced);
                    let fc = place(c, keep) | place(t, &traced);
                    acc += self.get(fr, fc);
                }
                out[r * kd + c] = acc;
            }
        }
        Ok(DensityMatrix {
            entries: out,
            dim: kd,
        })
    }
}

/// Reduced density matrix of a single kept qubit.
pub fn partial_trace(rho: &DensityMatrix, keep: usize) -> Result<DensityMatrix> {
    if rho.n_qubits() < 2 {
        return Err(Error::InvalidInput(
            "partial trace needs at least two qubits".into(),
        ));
    }
    if keep >= rho.n_qubits() {
        return Err(Error::InvalidInput(format!(
            "qubit index {keep} out of range for {} qubits",
            rho.n_qubits()
        )));
    }
    rho.partial_trace_keep(&[keep])
}

/// Reduced density matrix of a pure state on the kept qubit subset.
pub fn reduced_density(state: &PureState, keep: &[usize]) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(state).partial_trace_keep(keep)
}
