//! Monte-Carlo simulation of the cloning attack on a running protocol.
//!
//! Each round Alice draws a basis assignment (per qubit or per sequence,
//! depending on the mode) and random bits; the cloner applies an error
//! pattern drawn from Bob's weights |b_{m,n}|^2 on his clone and,
//! independently, from Eve's weights |a_{m,n}|^2 on hers. A measured bit
//! is correct exactly when the pattern's basis delta passes on that
//! position, so empirical fractions estimate the analytic single-qubit
//! fidelities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cloner::{
    bb84_product_ansatz, fidelity_report, fourier_dual, sixstate_product_ansatz, AmplitudeMatrix,
    CloneSide,
};
use crate::qkit::{delta_pass, enumerate_ensemble, Basis, BasisMode, Protocol};
use crate::{Error, Result};

/// How the simulated cloner is specified.
#[derive(Debug, Clone)]
pub enum ClonerSpec {
    /// The optimal attack for the configured protocol at Bob fidelity `f_b`.
    ClosedForm { f_b: f64 },
    /// An explicit amplitude table.
    Explicit(AmplitudeMatrix),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub protocol: Protocol,
    pub n: usize,
    pub mode: BasisMode,
    pub cloner: ClonerSpec,
    pub rounds: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SideStats {
    pub empirical_fidelity: f64,
    pub analytic_fidelity: f64,
    /// Standard error of the per-round mean, estimated from the sample.
    pub std_error: f64,
    /// (empirical - analytic) / std_error; 0 when the standard error
    /// degenerates (e.g. a deterministic cloner).
    pub z_score: f64,
    pub correct_bits: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub protocol: Protocol,
    pub mode: BasisMode,
    pub n: usize,
    pub rounds: u64,
    pub seed: u64,
    pub bob: SideStats,
    pub eve: SideStats,
    /// Empirical per-position Bob fidelities, for symmetry checks.
    pub bob_by_position: Vec<f64>,
}

/// Draw an index from the cumulative distribution `cdf` (last entry ~ 1).
fn sample(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn side_stats(
    correct: u64,
    analytic: f64,
    round_sum: f64,
    round_sq_sum: f64,
    rounds: u64,
) -> SideStats {
    let r = rounds as f64;
    let mean = round_sum / r;
    let var = ((round_sq_sum - round_sum * round_sum / r) / (r - 1.0)).max(0.0);
    let std_error = (var / r).sqrt();
    let z_score = if std_error > 0.0 {
        (mean - analytic) / std_error
    } else {
        0.0
    };
    SideStats {
        empirical_fidelity: mean,
        analytic_fidelity: analytic,
        std_error,
        z_score,
        correct_bits: correct,
    }
}

pub fn run(config: &SimConfig) -> Result<SimReport> {
    if config.rounds < 2 {
        return Err(Error::InvalidInput("need at least two rounds".into()));
    }
    let a = match &config.cloner {
        ClonerSpec::ClosedForm { f_b } => match config.protocol {
            Protocol::Bb84 => bb84_product_ansatz(*f_b, config.n)?,
            Protocol::SixState => sixstate_product_ansatz(*f_b, config.n)?,
        },
        ClonerSpec::Explicit(a) => {
            if a.n_qubits() != config.n {
                return Err(Error::DimensionMismatch(format!(
                    "cloner on {} qubits, simulation configured for {}",
                    a.n_qubits(),
                    config.n
                )));
            }
            a.clone()
        }
    };
    let ensemble = enumerate_ensemble(config.protocol, config.n, config.mode)?;
    let rep_e = fidelity_report(&a, &ensemble, CloneSide::Eve)?;
    let rep_b = fidelity_report(&a, &ensemble, CloneSide::Bob)?;

    let dim = a.dim();
    let eve_cdf = cumulative(&a.weights());
    let bob_cdf = cumulative(&fourier_dual(&a).weights());
    let bases = config.protocol.bases();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n;
    let mut bob_correct = 0u64;
    let mut eve_correct = 0u64;
    let mut bob_pos = vec![0u64; n];
    let (mut bs, mut bs2, mut es, mut es2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut basis_seq: Vec<Basis> = vec![bases[0]; n];
    for _ in 0..config.rounds {
        match config.mode {
            BasisMode::Correlated => {
                let b = bases[rng.gen_range(0..bases.len())];
                basis_seq.fill(b);
            }
            BasisMode::Independent => {
                for b in basis_seq.iter_mut() {
                    *b = bases[rng.gen_range(0..bases.len())];
                }
            }
        }
        let be = sample(&eve_cdf, &mut rng);
        let bb = sample(&bob_cdf, &mut rng);
        let (me, ne) = (be / dim, be % dim);
        let (mb, nb) = (bb / dim, bb % dim);
        let mut round_b = 0u64;
        let mut round_e = 0u64;
        for (i, &basis) in basis_seq.iter().enumerate() {
            let shift = n - 1 - i;
            if delta_pass(basis, ((mb >> shift) & 1) as u8, ((nb >> shift) & 1) as u8) {
                round_b += 1;
                bob_pos[i] += 1;
            }
            if delta_pass(basis, ((me >> shift) & 1) as u8, ((ne >> shift) & 1) as u8) {
                round_e += 1;
            }
        }
        bob_correct += round_b;
        eve_correct += round_e;
        let fb = round_b as f64 / n as f64;
        let fe = round_e as f64 / n as f64;
        bs += fb;
        bs2 += fb * fb;
        es += fe;
        es2 += fe * fe;
    }
    Ok(SimReport {
        protocol: config.protocol,
        mode: config.mode,
        n,
        rounds: config.rounds,
        seed: config.seed,
        bob: side_stats(
            bob_correct,
            rep_b.mean_average_fidelity,
            bs,
            bs2,
            config.rounds,
        ),
        eve: side_stats(
            eve_correct,
            rep_e.mean_average_fidelity,
            es,
            es2,
            config.rounds,
        ),
        bob_by_position: bob_pos
            .iter()
            .map(|&c| c as f64 / config.rounds as f64)
            .collect(),
    })
}

/// Largest |z| over both sides: the headline agreement statistic.
pub fn max_abs_z(report: &SimReport) -> f64 {
    report.bob.z_score.abs().max(report.eve.z_score.abs())
}
