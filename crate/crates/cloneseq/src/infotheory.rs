//! Mutual informations, the Csiszar-Korner rate bound, and security
//! thresholds for BB84 and six-state key distribution under the optimal
//! cloning attack.

use serde::Serialize;

use crate::cloner::{bb84_product_ansatz, sixstate_product_ansatz};
use crate::qkit::Protocol;
use crate::{Error, Result};

/// Binary entropy in bits; h2(0) = h2(1) = 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("entropy argument {p} not in [0,1]")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Alice-Bob mutual information over the sifted binary channel with
/// fidelity `f_b`: 1 - h2(F_B).
pub fn info_ab(f_b: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(f_b)?)
}

/// Eve's fidelity on the optimal BB84 cloner as a function of Bob's:
/// F_E = 1/2 + sqrt(F_B (1 - F_B)).
pub fn bb84_optimal_fe(f_b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f_b) {
        return Err(Error::Domain(format!("fidelity {f_b} not in [0,1]")));
    }
    Ok(0.5 + (f_b * (1.0 - f_b)).sqrt())
}

/// Eve's fidelity on the optimal six-state cloner:
/// F_E = 1 - F_B/2 + (1/2) sqrt((3 F_B - 1)(1 - F_B)). An involution on
/// [1/3, 1] with fixed point 5/6.
pub fn sixstate_optimal_fe(f_b: f64) -> Result<f64> {
    if !((1.0 / 3.0)..=1.0).contains(&f_b) {
        return Err(Error::Domain(format!("fidelity {f_b} not in [1/3,1]")));
    }
    Ok(1.0 - f_b / 2.0 + 0.5 * ((3.0 * f_b - 1.0) * (1.0 - f_b)).sqrt())
}

/// Alice-Eve information under BB84: Eve's sifted channel is binary
/// symmetric with her own fidelity, so I_AE = 1 - h2(F_E).
pub fn info_ae_bb84(f_e: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(f_e)?)
}

/// Alice-Eve information under the six-state protocol, where Eve's channel
/// is not symmetric:
/// I_AE = 1 + (F_B + F_E - 1) log2((F_B + F_E - 1)/F_B)
///          + (1 - F_E) log2((1 - F_E)/F_B).
pub fn info_ae_six(f_b: f64, f_e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f_b) || !(0.0..=1.0).contains(&f_e) {
        return Err(Error::Domain(format!(
            "fidelities ({f_b}, {f_e}) not in [0,1]"
        )));
    }
    if f_b + f_e < 1.0 || f_b == 0.0 {
        return Err(Error::Domain(format!(
            "six-state information needs F_B + F_E >= 1 and F_B > 0, got ({f_b}, {f_e})"
        )));
    }
    let xlog = |x: f64| if x <= 0.0 { 0.0 } else { x * (x / f_b).log2() };
    Ok(1.0 + xlog(f_b + f_e - 1.0) + xlog(1.0 - f_e))
}

/// One-way Csiszar-Korner secret-key rate lower bound:
/// R >= max(I_AB - I_AE, I_AB - I_BE). For the symmetric attacks here
/// I_BE = I_AE, so the bound reduces to I_AB - I_AE.
pub fn ck_rate(i_ab: f64, i_ae: f64, i_be: f64) -> f64 {
    (i_ab - i_ae).max(i_ab - i_be)
}

#[derive(Debug, Clone, Serialize)]
pub struct InfoCurvePoint {
    pub f_b: f64,
    pub f_e: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    pub rate_lower_bound: f64,
}

/// Evaluate the trade-off curve at Bob fidelity `f_b` under the optimal
/// attack for `protocol`.
pub fn curve_point(protocol: Protocol, f_b: f64) -> Result<InfoCurvePoint> {
    let (f_e, i_ae) = match protocol {
        Protocol::Bb84 => {
            let f_e = bb84_optimal_fe(f_b)?;
            (f_e, info_ae_bb84(f_e)?)
        }
        Protocol::SixState => {
            let f_e = sixstate_optimal_fe(f_b)?;
            (f_e, info_ae_six(f_b, f_e)?)
        }
    };
    let i_ab = info_ab(f_b)?;
    Ok(InfoCurvePoint {
        f_b,
        f_e,
        i_ab,
        i_ae,
        rate_lower_bound: ck_rate(i_ab, i_ae, i_ae),
    })
}

/// Find a root of `f` in `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must
/// bracket a sign change.
pub fn bisect<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let mut lo = lo;
    let mut hi = hi;
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Infeasible(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The security threshold: Bob's fidelity where the rate bound vanishes
/// (I_AB = I_AE under the optimal attack). For BB84 this is the symmetric
/// point 1/2 + 1/sqrt(8) ~ 0.8536; for six-state ~ 0.8436.
pub fn threshold(protocol: Protocol, tol: f64) -> Result<f64> {
    let rate = |f: f64| curve_point(protocol, f).map(|p| p.rate_lower_bound);
    match protocol {
        Protocol::Bb84 => bisect(rate, 0.500001, 0.999999, tol),
        Protocol::SixState => bisect(rate, 0.7, 0.999, tol),
    }
}

/// Check that the closed-form trade-off curves match the ansatz cloners'
/// fidelity reports at a given F_B. Returns the largest discrepancy.
pub fn curve_vs_ansatz_gap(protocol: Protocol, f_b: f64, n: usize) -> Result<f64> {
    use crate::cloner::{fidelity_report, CloneSide};
    use crate::qkit::{enumerate_ensemble, BasisMode};
    let a = match protocol {
        Protocol::Bb84 => bb84_product_ansatz(f_b, n)?,
        Protocol::SixState => sixstate_product_ansatz(f_b, n)?,
    };
    let ens = enumerate_ensemble(protocol, n, BasisMode::Independent)?;
    let point = curve_point(protocol, f_b)?;
    let rb = fidelity_report(&a, &ens, CloneSide::Bob)?;
    let re = fidelity_report(&a, &ens, CloneSide::Eve)?;
    let gap_b = (rb.mean_average_fidelity - f_b).abs();
    let gap_e = (re.mean_average_fidelity - point.f_e).abs();
    Ok(gap_b.max(gap_e))
}
