//! The Pauli-cloning machine: amplitude matrices, Fourier duality,
//! joint output states, clone density matrices and fidelity accounting.
//!
//! A cloner on N-qubit sequences is characterized by a 2^N x 2^N amplitude
//! table a_{m,n}; Eve's clone is the Pauli channel with weights |a|^2 and
//! Bob's the channel with weights |b|^2, where b is the sign-kernel Fourier
//! dual of a.

use num_complex::Complex64;

use crate::qkit::{
    apply_pauli, bell_state, delta_pass, BitVector, DensityMatrix, EnsembleEntry, InputEnsemble,
    PauliLabel, PureState,
};
use crate::{Error, Result};

pub const AMPLITUDE_NORM_TOL: f64 = 1e-10;
/// Default tolerance for the equal-fidelity constraint check.
pub const EQUAL_FIDELITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloneSide {
    Eve,
    Bob,
}

/// Which error patterns count toward the disturbance of qubit i.
///
/// `Spared` is the definition consistent with F^i = F_full + D^i: qubit i
/// passes its basis delta while at least one other qubit fails. `Printed`
/// follows the swapped delta indices as typeset in the source formulas
/// (qubit i fails while every other qubit passes); it is kept for
/// comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisturbanceConvention {
    #[default]
    Spared,
    Printed,
}

/// The 2^N x 2^N table a_{m,n} characterizing a cloner; rows are bit-flip
/// patterns m, columns phase-flip patterns n.
#[derive(Debug, Clone)]
pub struct AmplitudeMatrix {
    entries: Vec<Complex64>,
    n_qubits: usize,
}

impl AmplitudeMatrix {
    pub fn new(entries: Vec<Complex64>, n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {dim}x{dim} amplitude table, got {} entries",
                entries.len()
            )));
        }
        let norm_sq: f64 = entries.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > AMPLITUDE_NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "amplitude weights sum to {norm_sq}, not 1"
            )));
        }
        Ok(AmplitudeMatrix { entries, n_qubits })
    }

    pub fn from_real(entries: &[f64], n_qubits: usize) -> Result<Self> {
        Self::new(
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            n_qubits,
        )
    }

    /// a_{0,0} = 1: the trivial cloner that hands Eve the input unchanged.
    pub fn identity_only(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut entries = vec![Complex64::ZERO; dim * dim];
        entries[0] = Complex64::ONE;
        AmplitudeMatrix { entries, n_qubits }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[m * self.dim() + n]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Channel weights |a_{m,n}|^2, flattened as m * 2^N + n.
    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|a| a.norm_sqr()).collect()
    }

    fn label(&self, m: usize, n: usize) -> PauliLabel {
        PauliLabel::new(
            BitVector::from_index(m, self.n_qubits).expect("in range"),
            BitVector::from_index(n, self.n_qubits).expect("in range"),
        )
        .expect("equal lengths")
    }
}

/// N-fold tensor power of a 2x2 base table: a_{m,n} = prod_i base[m_i][n_i].
pub fn tensor_power(base: [[f64; 2]; 2], n_qubits: usize) -> Result<AmplitudeMatrix> {
    let dim = 1usize << n_qubits;
    let mut entries = Vec::with_capacity(dim * dim);
    for m in 0..dim {
        for n in 0..dim {
            let mut v = 1.0;
            for i in 0..n_qubits {
                let mb = (m >> (n_qubits - 1 - i)) & 1;
                let nb = (n >> (n_qubits - 1 - i)) & 1;
                v *= base[mb][nb];
            }
            entries.push(Complex64::new(v, 0.0));
        }
    }
    AmplitudeMatrix::new(entries, n_qubits)
}

/// b_{m,n} = 2^{-N} sum_{x,y} (-1)^{n.x - m.y} a_{x,y}; an involution.
pub fn fourier_dual(a: &AmplitudeMatrix) -> AmplitudeMatrix {
    let dim = a.dim();
    let scale = 1.0 / dim as f64;
    let mut entries = vec![Complex64::ZERO; dim * dim];
    for m in 0..dim {
        for n in 0..dim {
            let mut acc = Complex64::ZERO;
            for x in 0..dim {
                for y in 0..dim {
                    let parity = ((n & x).count_ones() + (m & y).count_ones()) & 1;
                    let v = a.get(x, y);
                    acc += if parity == 1 { -v } else { v };
                }
            }
            entries[m * dim + n] = acc * scale;
        }
    }
    AmplitudeMatrix {
        entries,
        n_qubits: a.n_qubits,
    }
}

/// Joint output state sum_{m,n} a_{m,n} U_{m,n}|psi>_E |B_{m,n}>_{B,C}
/// on three 2^N-dimensional systems ordered E, B, C.
pub fn joint_output_state(a: &AmplitudeMatrix, psi: &PureState) -> Result<PureState> {
    build_joint(a, psi, CloneSide::Eve)
}

/// The same physical state built from the dual expansion
/// sum b_{m,n} U_{m,n}|psi>_B |B_{m,n}>_{E,C}; equal to `joint_output_state`
/// componentwise.
pub fn joint_output_state_dual(a: &AmplitudeMatrix, psi: &PureState) -> Result<PureState> {
    build_joint(&fourier_dual(a), psi, CloneSide::Bob)
}

fn build_joint(coeff: &AmplitudeMatrix, psi: &PureState, carrier: CloneSide) -> Result<PureState> {
    if psi.dim() != coeff.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} != cloner dimension {}",
            psi.dim(),
            coeff.dim()
        )));
    }
    let dim = coeff.dim();
    let mut amps = vec![Complex64::ZERO; dim * dim * dim];
    for m in 0..dim {
        for n in 0..dim {
            let w = coeff.get(m, n);
            if w.norm_sqr() == 0.0 {
                continue;
            }
            let shifted = apply_pauli(&coeff.label(m, n), psi)?;
            let bell = bell_state(&coeff.label(m, n));
            for (s, &sa) in shifted.amplitudes().iter().enumerate() {
                if sa.norm_sqr() == 0.0 {
                    continue;
                }
                for (kk, &ba) in bell.amplitudes().iter().enumerate() {
                    if ba.norm_sqr() == 0.0 {
                        continue;
                    }
                    let (first, second) = (kk / dim, kk % dim);
                    // E-form: carrier state in E, Bell pair on (B, C).
                    // B-form: carrier state in B, Bell pair on (E, C).
                    let idx = match carrier {
                        CloneSide::Eve => (s * dim + first) * dim + second,
                        CloneSide::Bob => (first * dim + s) * dim + second,
                    };
                    amps[idx] += w * sa * ba;
                }
            }
        }
    }
    PureState::new(amps)
}

/// Pauli-channel output sum_w w_{m,n} U|psi><psi|U^dag with w = |a|^2 for
/// Eve's clone and |b|^2 for Bob's.
pub fn clone_density(a: &AmplitudeMatrix, psi: &PureState, side: CloneSide) -> Result<DensityMatrix> {
    if psi.dim() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} != cloner dimension {}",
            psi.dim(),
            a.dim()
        )));
    }
    let weights = side_weights(a, side);
    let dim = a.dim();
    let mut entries = vec![Complex64::ZERO; dim * dim];
    for m in 0..dim {
        for n in 0..dim {
            let w = weights[m * dim + n];
            if w == 0.0 {
                continue;
            }
            let shifted = apply_pauli(&a.label(m, n), psi)?;
            for r in 0..dim {
                for c in 0..dim {
                    entries[r * dim + c] +=
                        w * shifted.amplitudes()[r] * shifted.amplitudes()[c].conj();
                }
            }
        }
    }
    DensityMatrix::new(entries, dim)
}

fn side_weights(a: &AmplitudeMatrix, side: CloneSide) -> Vec<f64> {
    match side {
        CloneSide::Eve => a.weights(),
        CloneSide::Bob => fourier_dual(a).weights(),
    }
}

/// Full-dimension fidelity sum_w w_{m,n} |<psi|U_{m,n}|psi>|^2.
pub fn fidelity_full(a: &AmplitudeMatrix, psi: &PureState, side: CloneSide) -> Result<f64> {
    if psi.dim() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} != cloner dimension {}",
            psi.dim(),
            a.dim()
        )));
    }
    let weights = side_weights(a, side);
    let dim = a.dim();
    let mut acc = 0.0;
    for m in 0..dim {
        for n in 0..dim {
            let w = weights[m * dim + n];
            if w == 0.0 {
                continue;
            }
            let shifted = apply_pauli(&a.label(m, n), psi)?;
            acc += w * psi.overlap(&shifted).norm_sqr();
        }
    }
    Ok(acc)
}

fn entry_delta(entry: &EnsembleEntry, i: usize, m: usize, n: usize, len: usize) -> bool {
    let (basis, _) = entry.qubits[i];
    let mb = ((m >> (len - 1 - i)) & 1) as u8;
    let nb = ((n >> (len - 1 - i)) & 1) as u8;
    delta_pass(basis, mb, nb)
}

/// Single-qubit fidelity of qubit `i` for one ensemble entry: the weight of
/// error patterns whose basis-conditional delta passes on that qubit
/// (m_i = 0 for Z, n_i = 0 for X, m_i = n_i for Y).
pub fn qubit_fidelity(
    a: &AmplitudeMatrix,
    entry: &EnsembleEntry,
    i: usize,
    side: CloneSide,
) -> Result<f64> {
    let len = a.n_qubits();
    if entry.qubits.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "ensemble entry on {} qubits, cloner on {len}",
            entry.qubits.len()
        )));
    }
    if i >= len {
        return Err(Error::InvalidInput(format!("qubit index {i} out of range")));
    }
    let weights = side_weights(a, side);
    let dim = a.dim();
    let mut acc = 0.0;
    for m in 0..dim {
        for n in 0..dim {
            if entry_delta(entry, i, m, n, len) {
                acc += weights[m * dim + n];
            }
        }
    }
    Ok(acc)
}

/// Per-entry fidelity decomposition: F^i = F_full + D^i and the average
/// over qubit positions.
#[derive(Debug, Clone)]
pub struct FidelityReport {
    pub full_fidelity: f64,
    pub per_qubit_fidelity: Vec<f64>,
    pub per_qubit_disturbance: Vec<f64>,
    pub average_fidelity: f64,
}

/// Aggregate over all ensemble entries.
#[derive(Debug, Clone)]
pub struct EnsembleFidelityReport {
    pub reports: Vec<FidelityReport>,
    pub mean_average_fidelity: f64,
    /// Largest spread of single-qubit fidelities across all entries and
    /// qubit positions.
    pub single_qubit_spread: f64,
}

impl EnsembleFidelityReport {
    /// The equal-fidelity constraint of the optimization: every entry and
    /// qubit position sees the same single-qubit fidelity.
    pub fn equal_within(&self, tol: f64) -> bool {
        self.single_qubit_spread <= tol
    }
}

pub fn fidelity_report(
    a: &AmplitudeMatrix,
    ensemble: &InputEnsemble,
    side: CloneSide,
) -> Result<EnsembleFidelityReport> {
    fidelity_report_with(a, ensemble, side, DisturbanceConvention::Spared)
}

pub fn fidelity_report_with(
    a: &AmplitudeMatrix,
    ensemble: &InputEnsemble,
    side: CloneSide,
    convention: DisturbanceConvention,
) -> Result<EnsembleFidelityReport> {
    let len = a.n_qubits();
    if ensemble.n != len {
        return Err(Error::DimensionMismatch(format!(
            "ensemble for {} qubits, cloner for {len}",
            ensemble.n
        )));
    }
    let weights = side_weights(a, side);
    let dim = a.dim();
    let mut reports = Vec::with_capacity(ensemble.entries.len());
    let mut fid_min = f64::INFINITY;
    let mut fid_max = f64::NEG_INFINITY;
    let mut mean_avg = 0.0;
    for entry in &ensemble.entries {
        let mut full = 0.0;
        let mut per_qubit = vec![0.0; len];
        let mut disturbance = vec![0.0; len];
        for m in 0..dim {
            for n in 0..dim {
                let w = weights[m * dim + n];
                if w == 0.0 {
                    continue;
                }
                let pass: Vec<bool> = (0..len).map(|i| entry_delta(entry, i, m, n, len)).collect();
                if pass.iter().all(|&p| p) {
                    full += w;
                }
                for i in 0..len {
                    if pass[i] {
                        per_qubit[i] += w;
                    }
                    let hit = match convention {
                        DisturbanceConvention::Spared => {
                            pass[i] && pass.iter().enumerate().any(|(j, &p)| j != i && !p)
                        }
                        DisturbanceConvention::Printed => {
                            !pass[i] && pass.iter().enumerate().all(|(j, &p)| j == i || p)
                        }
                    };
                    if hit {
                        disturbance[i] += w;
                    }
                }
            }
        }
        let average = full + disturbance.iter().sum::<f64>() / len as f64;
        for &f in &per_qubit {
            fid_min = fid_min.min(f);
            fid_max = fid_max.max(f);
        }
        mean_avg += average;
        reports.push(FidelityReport {
            full_fidelity: full,
            per_qubit_fidelity: per_qubit,
            per_qubit_disturbance: disturbance,
            average_fidelity: average,
        });
    }
    mean_avg /= reports.len() as f64;
    Ok(EnsembleFidelityReport {
        reports,
        mean_average_fidelity: mean_avg,
        single_qubit_spread: fid_max - fid_min,
    })
}

/// Optimal BB84 cloner for Bob's fidelity `f_b`: the N-fold tensor power of
/// [[v, x], [x, y]] with v = 1/2 + sqrt(F(1-F)), x = F - 1/2,
/// y = 1/2 - sqrt(F(1-F)). Bob's single-qubit fidelity is exactly `f_b`;
/// Eve's is 1/2 + sqrt(F(1-F)).
pub fn bb84_product_ansatz(f_b: f64, n_qubits: usize) -> Result<AmplitudeMatrix> {
    if !(0.5..=1.0).contains(&f_b) {
        return Err(Error::Domain(format!(
            "BB84 ansatz needs 1/2 <= F_B <= 1, got {f_b}"
        )));
    }
    let s = (f_b * (1.0 - f_b)).sqrt();
    let base = [[0.5 + s, f_b - 0.5], [f_b - 0.5, 0.5 - s]];
    tensor_power(base, n_qubits)
}

/// Optimal six-state cloner for Bob's fidelity `f_b`. Bob's channel weights
/// come from the universal table [[v, x], [x, x]] with v = sqrt((3F-1)/2),
/// x = sqrt((1-F)/2); the returned Eve amplitude matrix is its Fourier
/// dual, so Bob's single-qubit fidelity is exactly `f_b` and Eve's follows
/// the six-state trade-off curve.
pub fn sixstate_product_ansatz(f_b: f64, n_qubits: usize) -> Result<AmplitudeMatrix> {
    if !((1.0 / 3.0)..=1.0).contains(&f_b) {
        return Err(Error::Domain(format!(
            "six-state ansatz needs 1/3 <= F_B <= 1, got {f_b}"
        )));
    }
    let v = ((3.0 * f_b - 1.0) / 2.0).sqrt();
    let x = ((1.0 - f_b) / 2.0).sqrt();
    let bob = tensor_power([[v, x], [x, x]], n_qubits)?;
    Ok(fourier_dual(&bob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkit::{
        enumerate_ensemble, reduced_density, single_qubit_eigenstate, Basis, BasisMode, Protocol,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloner(rng: &mut ChaCha8Rng, n: usize) -> AmplitudeMatrix {
        let dim = 1usize << n;
        let mut entries: Vec<Complex64> = (0..dim * dim)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let norm: f64 = entries.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for e in &mut entries {
            *e /= norm;
        }
        AmplitudeMatrix::new(entries, n).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> PureState {
        let dim = 1usize << n;
        let mut amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        PureState::new(amps).unwrap()
    }

    #[test]
    fn fourier_dual_of_identity_only() {
        let a = AmplitudeMatrix::identity_only(1);
        let b = fourier_dual(&a);
        for m in 0..2 {
            for n in 0..2 {
                assert!((b.get(m, n).re - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fourier_dual_symmetric_2x2_closed_form() {
        let (v, x, y) = (0.8f64, 0.4, 0.2);
        let norm = (v * v + 2.0 * x * x + y * y).sqrt();
        let (v, x, y) = (v / norm, x / norm, y / norm);
        let a = tensor_power([[v, x], [x, y]], 1).unwrap();
        let b = fourier_dual(&a);
        assert!((b.get(0, 0).re - (v + 2.0 * x + y) / 2.0).abs() < 1e-14);
        assert!((b.get(0, 1).re - (v - y) / 2.0).abs() < 1e-14);
        assert!((b.get(1, 0).re - (v - y) / 2.0).abs() < 1e-14);
        assert!((b.get(1, 1).re - (v - 2.0 * x + y) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn fourier_dual_is_involution_and_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            for n in 1..=2usize {
                let a = random_cloner(&mut rng, n);
                let b = fourier_dual(&a);
                let nb: f64 = b.weights().iter().sum();
                assert!((nb - 1.0).abs() < 1e-12);
                let back = fourier_dual(&b);
                for (u, w) in a.entries().iter().zip(back.entries()) {
                    assert!((u - w).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn joint_state_identity_only_factorizes() {
        let a = AmplitudeMatrix::identity_only(1);
        let psi = single_qubit_eigenstate(Basis::X, 0);
        let joint = joint_output_state(&a, &psi).unwrap();
        let expect = psi.tensor(&bell_state(&PauliLabel::identity(1)));
        assert!((joint.overlap_mag(&expect) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_state_dual_expansion_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=2usize {
            for _ in 0..20 {
                let a = random_cloner(&mut rng, n);
                let psi = random_state(&mut rng, n);
                let e_form = joint_output_state(&a, &psi).unwrap();
                let b_form = joint_output_state_dual(&a, &psi).unwrap();
                for (u, w) in e_form.amplitudes().iter().zip(b_form.amplitudes()) {
                    assert!((u - w).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn reduced_joint_state_matches_clone_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=2usize {
            let a = random_cloner(&mut rng, n);
            let psi = random_state(&mut rng, n);
            let joint = joint_output_state(&a, &psi).unwrap();
            let eve_qubits: Vec<usize> = (0..n).collect();
            let bob_qubits: Vec<usize> = (n..2 * n).collect();
            let rho_e = reduced_density(&joint, &eve_qubits).unwrap();
            let rho_b = reduced_density(&joint, &bob_qubits).unwrap();
            let de = clone_density(&a, &psi, CloneSide::Eve).unwrap();
            let db = clone_density(&a, &psi, CloneSide::Bob).unwrap();
            let dim = 1usize << n;
            for r in 0..dim {
                for c in 0..dim {
                    assert!((rho_e.get(r, c) - de.get(r, c)).norm() < 1e-10);
                    assert!((rho_b.get(r, c) - db.get(r, c)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn clone_density_identity_only() {
        let a = AmplitudeMatrix::identity_only(1);
        let psi = single_qubit_eigenstate(Basis::Y, 0);
        let rho_e = clone_density(&a, &psi, CloneSide::Eve).unwrap();
        assert!((rho_e.expectation(&psi) - 1.0).abs() < 1e-13);
        let rho_b = clone_density(&a, &psi, CloneSide::Bob).unwrap();
        assert!((rho_b.get(0, 0).re - 0.5).abs() < 1e-13);
        assert!(rho_b.get(0, 1).norm() < 1e-13);
    }

    #[test]
    fn clone_density_symmetric_2x2_diagonal() {
        // |psi> = |0>, a = [[v,x],[x,y]] gives <0|rho_E|0> = v^2 + x^2.
        let f_b = 0.87;
        let a = bb84_product_ansatz(f_b, 1).unwrap();
        let psi = PureState::basis_state(1, 0);
        let rho = clone_density(&a, &psi, CloneSide::Eve).unwrap();
        let (v, x) = (a.get(0, 0).re, a.get(0, 1).re);
        assert!((rho.get(0, 0).re - (v * v + x * x)).abs() < 1e-13);
    }

    #[test]
    fn fidelity_full_examples() {
        let psi = PureState::basis_state(1, 0);
        assert!(
            (fidelity_full(&AmplitudeMatrix::identity_only(1), &psi, CloneSide::Eve).unwrap()
                - 1.0)
                .abs()
                < 1e-14
        );
        // uniform weights: fully depolarizing channel
        let uniform = AmplitudeMatrix::from_real(&[0.5; 4], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let any = random_state(&mut rng, 1);
            let f = fidelity_full(&uniform, &any, CloneSide::Eve).unwrap();
            assert!((f - 0.5).abs() < 1e-12);
        }
        // weights (p_I, p_X, p_Z, p_Y) = (0.7, 0.1, 0.15, 0.05) on |0>:
        // Z-basis picks up delta_{m,0} -> 0.7 + 0.15
        let w = [0.7f64, 0.15, 0.1, 0.05]; // layout (m,n): I, Z, X, Y
        let amps: Vec<f64> = w.iter().map(|p| p.sqrt()).collect();
        let a = AmplitudeMatrix::from_real(&amps, 1).unwrap();
        let f = fidelity_full(&a, &psi, CloneSide::Eve).unwrap();
        assert!((f - 0.85).abs() < 1e-13);
    }

    #[test]
    fn fidelity_full_matches_density_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = 1 + (rng.gen::<u32>() % 2) as usize;
            let a = random_cloner(&mut rng, n);
            let psi = random_state(&mut rng, n);
            for side in [CloneSide::Eve, CloneSide::Bob] {
                let f = fidelity_full(&a, &psi, side).unwrap();
                let rho = clone_density(&a, &psi, side).unwrap();
                assert!((f - rho.expectation(&psi)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qubit_fidelity_delta_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = random_cloner(&mut rng, 2);
        let w = a.weights();
        let dim = 4;
        let ens = enumerate_ensemble(Protocol::SixState, 2, BasisMode::Correlated).unwrap();
        let zz = ens
            .entries
            .iter()
            .find(|e| e.qubits.iter().all(|&(b, _)| b == Basis::Z))
            .unwrap();
        let expect: f64 = (0..dim)
            .flat_map(|m| (0..dim).map(move |n| (m, n)))
            .filter(|&(m, _)| m >> 1 == 0) // m_1 = 0 (first qubit is the high bit)
            .map(|(m, n)| w[m * dim + n])
            .sum();
        assert!((qubit_fidelity(&a, zz, 0, CloneSide::Eve).unwrap() - expect).abs() < 1e-13);

        let xx = ens
            .entries
            .iter()
            .find(|e| e.qubits.iter().all(|&(b, _)| b == Basis::X))
            .unwrap();
        let expect: f64 = (0..dim)
            .flat_map(|m| (0..dim).map(move |n| (m, n)))
            .filter(|&(_, n)| n & 1 == 0) // n_2 = 0 (second qubit is the low bit)
            .map(|(m, n)| w[m * dim + n])
            .sum();
        assert!((qubit_fidelity(&a, xx, 1, CloneSide::Eve).unwrap() - expect).abs() < 1e-13);

        // Y x Y with uniform weights: half of all (m_i, n_i) pairs pass
        let uniform = AmplitudeMatrix::from_real(&[0.25; 16], 2).unwrap();
        let yy = ens
            .entries
            .iter()
            .find(|e| e.qubits.iter().all(|&(b, _)| b == Basis::Y))
            .unwrap();
        assert!((qubit_fidelity(&uniform, yy, 0, CloneSide::Eve).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn qubit_fidelity_matches_general_overlap_route() {
        // the delta shortcut must agree with sum_w |<phi_i|X^m Z^n|phi_i>|^2
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = random_cloner(&mut rng, 2);
        let w = a.weights();
        let ens = enumerate_ensemble(Protocol::SixState, 2, BasisMode::Independent).unwrap();
        for entry in &ens.entries {
            for i in 0..2 {
                let (basis, bit) = entry.qubits[i];
                let phi = single_qubit_eigenstate(basis, bit);
                let mut expect = 0.0;
                for m in 0..4usize {
                    for n in 0..4usize {
                        let mb = ((m >> (1 - i)) & 1) as u8;
                        let nb = ((n >> (1 - i)) & 1) as u8;
                        let lab = PauliLabel::new(
                            BitVector::from_bits(&[mb]).unwrap(),
                            BitVector::from_bits(&[nb]).unwrap(),
                        )
                        .unwrap();
                        let moved = apply_pauli(&lab, &phi).unwrap();
                        expect += w[m * 4 + n] * phi.overlap(&moved).norm_sqr();
                    }
                }
                let got = qubit_fidelity(&a, entry, i, CloneSide::Eve).unwrap();
                assert!((got - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fidelity_report_identity_only() {
        let a = AmplitudeMatrix::identity_only(2);
        let ens = enumerate_ensemble(Protocol::Bb84, 2, BasisMode::Independent).unwrap();
        let rep = fidelity_report(&a, &ens, CloneSide::Eve).unwrap();
        for r in &rep.reports {
            assert!((r.full_fidelity - 1.0).abs() < 1e-14);
            assert!((r.average_fidelity - 1.0).abs() < 1e-14);
            for &d in &r.per_qubit_disturbance {
                assert!(d.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fidelity_report_concentrated_weight() {
        // all weight on (m,n) = ((1,0),(0,0)): qubit 1 always flipped,
        // qubit 2 untouched
        let mut entries = vec![0.0; 16];
        entries[(0b10 * 4) + 0b00] = 1.0;
        let a = AmplitudeMatrix::from_real(&entries, 2).unwrap();
        let ens = enumerate_ensemble(Protocol::Bb84, 2, BasisMode::Correlated).unwrap();
        let zz = ens
            .entries
            .iter()
            .position(|e| e.qubits.iter().all(|&(b, _)| b == Basis::Z))
            .unwrap();
        let rep = fidelity_report(&a, &ens, CloneSide::Eve).unwrap();
        let r = &rep.reports[zz];
        assert!(r.full_fidelity.abs() < 1e-14);
        assert!(r.per_qubit_fidelity[0].abs() < 1e-14);
        assert!((r.per_qubit_fidelity[1] - 1.0).abs() < 1e-14);
        assert!((r.average_fidelity - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fidelity_identity_holds_for_every_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for &(protocol, mode) in &[
            (Protocol::Bb84, BasisMode::Independent),
            (Protocol::Bb84, BasisMode::Correlated),
            (Protocol::SixState, BasisMode::Independent),
            (Protocol::SixState, BasisMode::Correlated),
        ] {
            let ens = enumerate_ensemble(protocol, 2, mode).unwrap();
            let a = random_cloner(&mut rng, 2);
            for side in [CloneSide::Eve, CloneSide::Bob] {
                let rep = fidelity_report(&a, &ens, side).unwrap();
                for r in &rep.reports {
                    for i in 0..2 {
                        let lhs = r.per_qubit_fidelity[i];
                        let rhs = r.full_fidelity + r.per_qubit_disturbance[i];
                        assert!((lhs - rhs).abs() < 1e-12);
                    }
                    let mean_d =
                        r.per_qubit_disturbance.iter().sum::<f64>() / r.per_qubit_disturbance.len() as f64;
                    assert!((r.average_fidelity - (r.full_fidelity + mean_d)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn printed_disturbance_convention_differs() {
        // conventions coincide for symmetric tensor-product cloners, so
        // probe with an asymmetric random one
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = random_cloner(&mut rng, 2);
        let ens = enumerate_ensemble(Protocol::Bb84, 2, BasisMode::Correlated).unwrap();
        let spared = fidelity_report_with(&a, &ens, CloneSide::Eve, DisturbanceConvention::Spared)
            .unwrap();
        let printed =
            fidelity_report_with(&a, &ens, CloneSide::Eve, DisturbanceConvention::Printed)
                .unwrap();
        // identity F^i = F_full + D^i holds for Spared but not for Printed
        let rs = &spared.reports[0];
        let rp = &printed.reports[0];
        assert!((rs.per_qubit_fidelity[0] - (rs.full_fidelity + rs.per_qubit_disturbance[0]))
            .abs()
            < 1e-12);
        assert!((rp.per_qubit_fidelity[0] - (rp.full_fidelity + rp.per_qubit_disturbance[0]))
            .abs()
            > 1e-6);
    }

    #[test]
    fn bb84_ansatz_boundary_and_symmetric_point() {
        // F_B = 1/2: identity-only, Eve takes everything
        let a = bb84_product_ansatz(0.5, 1).unwrap();
        assert!((a.get(0, 0).re - 1.0).abs() < 1e-14);
        assert!(a.get(0, 1).norm() < 1e-14);
        // normalization holds on a grid
        for k in 0..=20 {
            let f = 0.5 + 0.5 * k as f64 / 20.0;
            for n in 1..=3 {
                let a = bb84_product_ansatz(f, n).unwrap();
                let total: f64 = a.weights().iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
        // symmetric point: Eve's report equals F_B
        let fstar = 0.5 + 1.0 / 8f64.sqrt();
        let a = bb84_product_ansatz(fstar, 2).unwrap();
        let ens = enumerate_ensemble(Protocol::Bb84, 2, BasisMode::Independent).unwrap();
        let rep = fidelity_report(&a, &ens, CloneSide::Eve).unwrap();
        assert!((rep.mean_average_fidelity - fstar).abs() < 1e-12);
        // out of domain rejected
        assert!(bb84_product_ansatz(0.3, 1).is_err());
        assert!(bb84_product_ansatz(1.1, 1).is_err());
    }

    #[test]
    fn bb84_ansatz_bob_achieves_target() {
        for &f_b in &[0.6, 0.75, 0.9, 1.0] {
            for n in 1..=3 {
                let a = bb84_product_ansatz(f_b, n).unwrap();
                let ens = enumerate_ensemble(Protocol::Bb84, n, BasisMode::Independent).unwrap();
                let rep = fidelity_report(&a, &ens, CloneSide::Bob).unwrap();
                assert!(
                    (rep.mean_average_fidelity - f_b).abs() < 1e-12,
                    "n={n} f_b={f_b}: {}",
                    rep.mean_average_fidelity
                );
                assert!(rep.equal_within(EQUAL_FIDELITY_TOL));
            }
        }
    }

    #[test]
    fn bb84_report_same_for_both_modes() {
        for k in 0..=10 {
            let f_b = 0.5 + 0.5 * k as f64 / 10.0;
            let a = bb84_product_ansatz(f_b, 2).unwrap();
            let ind = enumerate_ensemble(Protocol::Bb84, 2, BasisMode::Independent).unwrap();
            let cor = enumerate_ensemble(Protocol::Bb84, 2, BasisMode::Correlated).unwrap();
            for side in [CloneSide::Eve, CloneSide::Bob] {
                let ri = fidelity_report(&a, &ind, side).unwrap();
                let rc = fidelity_report(&a, &cor, side).unwrap();
                assert!((ri.mean_average_fidelity - rc.mean_average_fidelity).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sixstate_ansatz_boundaries() {
        // F_B = 1: Bob's weights are identity-only, Eve fully depolarized
        let a = sixstate_product_ansatz(1.0, 1).unwrap();
        let b = fourier_dual(&a);
        assert!((b.get(0, 0).re - 1.0).abs() < 1e-12);
        let ens = enumerate_ensemble(Protocol::SixState, 1, BasisMode::Independent).unwrap();
        let rep = fidelity_report(&a, &ens, CloneSide::Eve).unwrap();
        assert!((rep.mean_average_fidelity - 0.5).abs() < 1e-12);
        // F_B = 1/3: v = 0, x = 1/sqrt(3) in Bob's table
        let a = sixstate_product_ansatz(1.0 / 3.0, 1).unwrap();
        let b = fourier_dual(&a);
        assert!(b.get(0, 0).norm() < 1e-12);
        assert!((b.get(0, 1).re - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!(sixstate_product_ansatz(0.2, 1).is_err());
    }

    #[test]
    fn sixstate_ansatz_bob_achieves_target_and_eve_follows_curve() {
        let f6 = |f: f64| 1.0 - f / 2.0 + 0.25 * (6.0 * f - 2.0).sqrt() * (2.0 - 2.0 * f).sqrt();
        for &f_b in &[0.5, 0.75, 0.8436, 0.9] {
            for n in 1..=2 {
                let a = sixstate_product_ansatz(f_b, n).unwrap();
                let ens = enumerate_ensemble(Protocol::SixState, n, BasisMode::Independent).unwrap();
                let rb = fidelity_report(&a, &ens, CloneSide::Bob).unwrap();
                let re = fidelity_report(&a, &ens, CloneSide::Eve).unwrap();
                assert!((rb.mean_average_fidelity - f_b).abs() < 1e-12);
                assert!((re.mean_average_fidelity - f6(f_b)).abs() < 1e-12);
                assert!(rb.equal_within(EQUAL_FIDELITY_TOL) && re.equal_within(EQUAL_FIDELITY_TOL));
            }
        }
        // symmetric point of the six-state curve: F_E = F_B at 5/6
        let a = sixstate_product_ansatz(5.0 / 6.0, 2).unwrap();
        let ens = enumerate_ensemble(Protocol::SixState, 2, BasisMode::Independent).unwrap();
        let re = fidelity_report(&a, &ens, CloneSide::Eve).unwrap();
        assert!((re.mean_average_fidelity - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn sixstate_all_36_entries_equal_fidelity() {
        let a = sixstate_product_ansatz(0.88, 2).unwrap();
        let ens = enumerate_ensemble(Protocol::SixState, 2, BasisMode::Independent).unwrap();
        assert_eq!(ens.entries.len(), 36);
        let rep = fidelity_report(&a, &ens, CloneSide::Eve).unwrap();
        assert!(rep.equal_within(1e-10));
    }
}
