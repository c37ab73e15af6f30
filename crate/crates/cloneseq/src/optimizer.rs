//! Constrained optimization of cloner weights and stationarity checks.
//!
//! The optimizer maximizes Eve's mean single-qubit fidelity over cloner
//! amplitude tables, subject to Bob's mean fidelity hitting a target and
//! all single-qubit fidelities (every basis sequence, every position, both
//! clones) being equal. The solver is L-BFGS with analytic gradients on a
//! smooth unconstrained parameterization, wrapped in quadratic-penalty
//! continuation and random restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloner::AmplitudeMatrix;
use crate::infotheory::{bb84_optimal_fe, sixstate_optimal_fe};
use crate::qkit::{delta_pass, enumerate_ensemble, Basis, BasisMode, Protocol};
use crate::{Error, Result};

pub const MAX_GENERAL_QUBITS: usize = 3;
pub const MAX_TENSOR_QUBITS: usize = 8;
const PENALTY_SCHEDULE: [f64; 5] = [1e2, 1e4, 1e6, 1e8, 1e10];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    /// Free nonnegative weight on every error pattern: 4^N parameters.
    GeneralReal,
    /// N-fold tensor power of a symmetric 2x2 base table: 3 parameters.
    TensorPower,
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub protocol: Protocol,
    pub n: usize,
    pub mode: BasisMode,
    pub target_f_b: f64,
    pub parameterization: Parameterization,
    pub constraint_tol: f64,
    pub objective_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl OptimizationProblem {
    pub fn new(protocol: Protocol, n: usize, mode: BasisMode, target_f_b: f64) -> Self {
        OptimizationProblem {
            protocol,
            n,
            mode,
            target_f_b,
            parameterization: Parameterization::GeneralReal,
            constraint_tol: 1e-8,
            objective_tol: 1e-12,
            restarts: 32,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub a: AmplitudeMatrix,
    pub f_e: f64,
    pub f_b_achieved: f64,
    /// (|mean F_B - target|, spread of Eve fidelities, spread of Bob
    /// fidelities) at the returned point.
    pub constraint_residuals: [f64; 3],
    pub converged: bool,
    pub restarts_used: usize,
}

/// Distinct delta-mask rows: one 4^N-long 0/1 vector per distinct
/// (basis, qubit position) constraint, flattened as m * 2^N + n.
///
/// Deduplicating matters: a row depends only on one qubit's basis and
/// position, so the mixed-basis sequences of the independent mode add no
/// rows beyond the correlated mode's. After deduplication the two modes
/// pose literally the same optimization problem.
fn delta_masks(protocol: Protocol, n: usize, mode: BasisMode) -> Result<Vec<Vec<f64>>> {
    let ens = enumerate_ensemble(protocol, n, mode)?;
    let dim = 1usize << n;
    let mut seen: std::collections::BTreeSet<(usize, Basis)> = std::collections::BTreeSet::new();
    for entry in &ens.entries {
        for (i, &(b, _)) in entry.qubits.iter().enumerate() {
            seen.insert((i, b));
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, basis) in seen {
        let mut row = vec![0.0; dim * dim];
        for m in 0..dim {
            for nn in 0..dim {
                let mb = ((m >> (n - 1 - i)) & 1) as u8;
                let nb = ((nn >> (n - 1 - i)) & 1) as u8;
                if delta_pass(basis, mb, nb) {
                    row[m * dim + nn] = 1.0;
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Apply the sign-kernel dual transform in place on a 2^N x 2^N table
/// flattened as m * 2^N + n: out_{m,n} = 2^{-N} sum_{x,y} (-1)^{n.x + m.y}
/// in_{x,y}. Separable into two Walsh-Hadamard passes, O(D^2 log D).
fn sign_dual_apply(v: &[f64], n: usize) -> Vec<f64> {
    let dim = 1usize << n;
    // pass over the column index y with kernel (-1)^{m.y}: Hadamard along
    // rows, then reinterpret; pass over x with kernel (-1)^{n.x}.
    let mut c = vec![0.0; dim * dim]; // c[x][m]
    for x in 0..dim {
        let mut row: Vec<f64> = v[x * dim..(x + 1) * dim].to_vec();
        walsh(&mut row);
        c[x * dim..(x + 1) * dim].copy_from_slice(&row);
    }
    let mut out = vec![0.0; dim * dim];
    let scale = 1.0 / dim as f64;
    for m in 0..dim {
        let mut col: Vec<f64> = (0..dim).map(|x| c[x * dim + m]).collect();
        walsh(&mut col);
        for nn in 0..dim {
            out[m * dim + nn] = col[nn] * scale;
        }
    }
    out
}

/// In-place unnormalized Walsh-Hadamard transform.
fn walsh(v: &mut [f64]) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        let mut i = 0;
        while i < len {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
            i += 2 * h;
        }
        h *= 2;
    }
}

struct Objective<'m> {
    masks: &'m [Vec<f64>],
    n: usize,
    target: f64,
    mu: f64,
}

impl Objective<'_> {
    /// Penalized objective and gradient in the amplitude vector `a`
    /// (unit 2-norm is assumed by the caller's chain rule, not here).
    fn eval_a(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let k = self.masks.len();
        let p: Vec<f64> = a.iter().map(|x| x * x).collect();
        let b = sign_dual_apply(a, self.n);
        let q: Vec<f64> = b.iter().map(|x| x * x).collect();
        let fe: Vec<f64> = self.masks.iter().map(|row| dot(row, &p)).collect();
        let fb: Vec<f64> = self.masks.iter().map(|row| dot(row, &q)).collect();
        let mfe = fe.iter().sum::<f64>() / k as f64;
        let mfb = fb.iter().sum::<f64>() / k as f64;
        let mut obj = -mfe + self.mu * (mfb - self.target).powi(2);
        for &f in &fe {
            obj += self.mu * (f - mfe).powi(2);
        }
        for &f in &fb {
            obj += self.mu * (f - mfb).powi(2);
        }
        // dO/dfe_k and dO/dfb_k, then back through the masks
        let mut gp = vec![0.0; p.len()];
        let mut gq = vec![0.0; q.len()];
        for (row, &f) in self.masks.iter().zip(&fe) {
            let ck = -1.0 / k as f64 + 2.0 * self.mu * (f - mfe);
            axpy(ck, row, &mut gp);
        }
        for (row, &f) in self.masks.iter().zip(&fb) {
            let dk = 2.0 * self.mu * (mfb - self.target) / k as f64 + 2.0 * self.mu * (f - mfb);
            axpy(dk, row, &mut gq);
        }
        // dO/da = 2 a . gp + 2 F (b . gq)   (F symmetric, self-inverse)
        let bq: Vec<f64> = b.iter().zip(&gq).map(|(x, y)| x * y).collect();
        let fbq = sign_dual_apply(&bq, self.n);
        let ga: Vec<f64> = a
            .iter()
            .zip(gp.iter().zip(&fbq))
            .map(|(ai, (gpi, fi))| 2.0 * ai * gpi + 2.0 * fi)
            .collect();
        (obj, ga)
    }

    /// Objective in the free parameters t via a = t^2 / ||t^2||.
    fn eval_t(&self, t: &[f64]) -> (f64, Vec<f64>) {
        let u: Vec<f64> = t.iter().map(|x| x * x).collect();
        let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a: Vec<f64> = u.iter().map(|x| x / r).collect();
        let (obj, ga) = self.eval_a(&a);
        let adotg = dot(&a, &ga);
        let gt: Vec<f64> = t
            .iter()
            .zip(a.iter().zip(&ga))
            .map(|(ti, (ai, gi))| 2.0 * ti * (gi - adotg * ai) / r)
            .collect();
        (obj, gt)
    }

    /// Objective in a symmetric 2x2 base [alpha, beta, gamma] tensored to
    /// N qubits; gradient by central differences (3 parameters only).
    fn eval_base(&self, base: &[f64; 3]) -> (f64, Vec<f64>) {
        let value = |p: &[f64; 3]| self.eval_a(&tensor_amps(p, self.n)).0;
        let obj = value(base);
        let h = 1e-6;
        let mut g = vec![0.0; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let mut hi = *base;
            let mut lo = *base;
            hi[i] += h;
            lo[i] -= h;
            *gi = (value(&hi) - value(&lo)) / (2.0 * h);
        }
        (obj, g)
    }
}

fn tensor_amps(base: &[f64; 3], n: usize) -> Vec<f64> {
    let dim = 1usize << n;
    let table = [[base[0], base[1]], [base[1], base[2]]];
    let mut w = vec![0.0; dim * dim];
    for (m, wr) in w.chunks_mut(dim).enumerate() {
        for (nn, slot) in wr.iter_mut().enumerate() {
            let mut v = 1.0;
            for i in 0..n {
                v *= table[(m >> (n - 1 - i)) & 1][(nn >> (n - 1 - i)) & 1];
            }
            *slot = v;
        }
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut w {
        *x /= norm;
    }
    w
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Minimize `f` from `x0` by L-BFGS with Armijo backtracking. Returns the
/// final point and value.
fn lbfgs<F: Fn(&[f64]) -> (f64, Vec<f64>)>(
    f: F,
    x0: Vec<f64>,
    max_iter: usize,
    ftol: f64,
    gtol: f64,
) -> (Vec<f64>, f64) {
    const MEMORY: usize = 8;
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    for _ in 0..max_iter {
        let gnorm = g.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if gnorm < gtol {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|&v| -v).collect();
        let mut alphas = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let alpha = rho_hist[i] * dot(&s_hist[i], &d);
            axpy(-alpha, &y_hist[i], &mut d);
            alphas[i] = alpha;
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            for v in &mut d {
                *v *= gamma;
            }
        }
        for i in 0..s_hist.len() {
            let beta = rho_hist[i] * dot(&y_hist[i], &d);
            axpy(alphas[i] - beta, &s_hist[i], &mut d);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d = g.iter().map(|&v| -v).collect();
            slope = -dot(&g, &g);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        // backtracking line search
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&xt);
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else { break };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        let improvement = fx - ft;
        x = xt;
        fx = ft;
        g = gt;
        if improvement < ftol * (1.0 + fx.abs()) {
            break;
        }
    }
    (x, fx)
}

fn amps_from_params(param: Parameterization, t: &[f64], n: usize) -> Vec<f64> {
    match param {
        Parameterization::GeneralReal => {
            let u: Vec<f64> = t.iter().map(|x| x * x).collect();
            let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            u.iter().map(|x| x / r).collect()
        }
        Parameterization::TensorPower => tensor_amps(&[t[0], t[1], t[2]], n),
    }
}

/// Residuals (|mean F_B - target|, spread F_E, spread F_B) of an amplitude
/// vector against the masks.
fn residuals(masks: &[Vec<f64>], a: &[f64], n: usize, target: f64) -> ([f64; 3], f64, f64) {
    let p: Vec<f64> = a.iter().map(|x| x * x).collect();
    let q: Vec<f64> = sign_dual_apply(a, n).iter().map(|x| x * x).collect();
    let fe: Vec<f64> = masks.iter().map(|row| dot(row, &p)).collect();
    let fb: Vec<f64> = masks.iter().map(|row| dot(row, &q)).collect();
    let mfe = fe.iter().sum::<f64>() / fe.len() as f64;
    let mfb = fb.iter().sum::<f64>() / fb.len() as f64;
    let spread = |v: &[f64]| {
        v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
            - v.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    };
    ([(mfb - target).abs(), spread(&fe), spread(&fb)], mfe, mfb)
}

pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    match problem.parameterization {
        Parameterization::GeneralReal if problem.n > MAX_GENERAL_QUBITS => {
            return Err(Error::InvalidInput(format!(
                "general parameterization supports at most {MAX_GENERAL_QUBITS} qubits, got {}",
                problem.n
            )));
        }
        Parameterization::TensorPower if problem.n > MAX_TENSOR_QUBITS => {
            return Err(Error::InvalidInput(format!(
                "tensor-power parameterization supports at most {MAX_TENSOR_QUBITS} qubits, got {}",
                problem.n
            )));
        }
        _ => {}
    }
    if problem.restarts == 0 {
        return Err(Error::InvalidInput("need at least one restart".into()));
    }
    let feasible_range = match problem.protocol {
        Protocol::Bb84 => 0.5..=1.0,
        Protocol::SixState => (1.0 / 3.0)..=1.0,
    };
    if !feasible_range.contains(&problem.target_f_b) {
        return Err(Error::Infeasible(format!(
            "target F_B = {} outside the attainable range {:?}",
            problem.target_f_b, feasible_range
        )));
    }
    let masks = delta_masks(problem.protocol, problem.n, problem.mode)?;
    let dim = 1usize << problem.n;
    let n_params = match problem.parameterization {
        Parameterization::GeneralReal => dim * dim,
        Parameterization::TensorPower => 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut best: Option<(Vec<f64>, f64, f64, [f64; 3])> = None;
    let mut restarts_used = 0;
    for _ in 0..problem.restarts {
        restarts_used += 1;
        let mut t: Vec<f64> = (0..n_params).map(|_| rng.gen::<f64>() + 0.05).collect();
        for mu in PENALTY_SCHEDULE {
            let obj = Objective {
                masks: &masks,
                n: problem.n,
                target: problem.target_f_b,
                mu,
            };
            let stage = match problem.parameterization {
                Parameterization::GeneralReal => {
                    lbfgs(|t| obj.eval_t(t), t, 2000, 1e-16, 1e-13)
                }
                Parameterization::TensorPower => lbfgs(
                    |t| obj.eval_base(&[t[0], t[1], t[2]]),
                    t,
                    2000,
                    1e-16,
                    1e-11,
                ),
            };
            t = stage.0;
        }
        let a = amps_from_params(problem.parameterization, &t, problem.n);
        let (res, mfe, mfb) = residuals(&masks, &a, problem.n, problem.target_f_b);
        let feasible = res.iter().all(|&r| r < problem.constraint_tol);
        if feasible {
            let better = match &best {
                Some((_, fe, _, _)) => mfe > fe + problem.objective_tol,
                None => true,
            };
            if better {
                best = Some((a, mfe, mfb, res));
            }
        }
    }
    let Some((a, f_e, f_b_achieved, constraint_residuals)) = best else {
        return Err(Error::SolverFailure(format!(
            "no feasible optimum found in {} restarts",
            problem.restarts
        )));
    };
    Ok(OptimizationResult {
        a: AmplitudeMatrix::from_real(&a, problem.n)?,
        f_e,
        f_b_achieved,
        constraint_residuals,
        converged: true,
        restarts_used,
    })
}

/// One grid point of the tensor-optimality verification: the numeric
/// optimum in both basis modes against the closed-form trade-off curve.
#[derive(Debug, Clone)]
pub struct OptimalityPoint {
    pub f_b: f64,
    pub closed_form_f_e: f64,
    pub independent_f_e: f64,
    pub correlated_f_e: f64,
}

impl OptimalityPoint {
    pub fn gap_to_closed_form(&self) -> f64 {
        (self.independent_f_e - self.closed_form_f_e)
            .abs()
            .max((self.correlated_f_e - self.closed_form_f_e).abs())
    }

    pub fn mode_gap(&self) -> f64 {
        (self.independent_f_e - self.correlated_f_e).abs()
    }
}

#[derive(Debug, Clone)]
pub struct OptimalityReport {
    pub protocol: Protocol,
    pub n: usize,
    pub points: Vec<OptimalityPoint>,
}

impl OptimalityReport {
    pub fn max_gap_to_closed_form(&self) -> f64 {
        self.points
            .iter()
            .map(OptimalityPoint::gap_to_closed_form)
            .fold(0.0, f64::max)
    }

    pub fn max_mode_gap(&self) -> f64 {
        self.points
            .iter()
            .map(OptimalityPoint::mode_gap)
            .fold(0.0, f64::max)
    }
}

/// Optimize over all 4^N weights at each F_B in `grid` and compare against
/// the closed-form curve, in both basis modes.
pub fn verify_tensor_optimality(
    protocol: Protocol,
    n: usize,
    grid: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<OptimalityReport> {
    let mut points = Vec::with_capacity(grid.len());
    for &f_b in grid {
        let closed = match protocol {
            Protocol::Bb84 => bb84_optimal_fe(f_b)?,
            Protocol::SixState => sixstate_optimal_fe(f_b)?,
        };
        let mut by_mode = [0.0; 2];
        for (slot, mode) in by_mode
            .iter_mut()
            .zip([BasisMode::Independent, BasisMode::Correlated])
        {
            let mut problem = OptimizationProblem::new(protocol, n, mode, f_b);
            problem.restarts = restarts;
            problem.seed = seed;
            *slot = optimize(&problem)?.f_e;
        }
        points.push(OptimalityPoint {
            f_b,
            closed_form_f_e: closed,
            independent_f_e: by_mode[0],
            correlated_f_e: by_mode[1],
        });
    }
    Ok(OptimalityReport {
        protocol,
        n,
        points,
    })
}

// ---------------------------------------------------------------------------
// Lagrangian stationarity
// ---------------------------------------------------------------------------

/// S(p0, p1) = (1/N) sum_k C(N,k) (N-k) p0^{N-k} p1^k and its partials;
/// the per-qubit pass weight averaged over a sequence with pass
/// probability p0 and fail probability p1 per factor.
fn binomial_sum(p0: f64, p1: f64, n: usize) -> (f64, f64, f64) {
    let mut s = 0.0;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    let mut binom = 1.0f64;
    for k in 0..=n {
        let c = binom * (n - k) as f64 / n as f64;
        let pw0 = p0.powi((n - k) as i32);
        let pw1 = p1.powi(k as i32);
        s += c * pw0 * pw1;
        if n - k > 0 {
            d0 += c * (n - k) as f64 * p0.powi((n - k - 1) as i32) * pw1;
        }
        if k > 0 {
            d1 += c * pw0 * k as f64 * p1.powi((k - 1) as i32);
        }
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    (s, d0, d1)
}

/// Value and (v, x, y)-gradient of the per-qubit fidelity built from pass
/// weight `p0` and fail weight `p1`, given their own gradients.
fn chain(
    n: usize,
    p0: f64,
    g0: [f64; 3],
    p1: f64,
    g1: [f64; 3],
) -> (f64, [f64; 3]) {
    let (s, d0, d1) = binomial_sum(p0, p1, n);
    let mut g = [0.0; 3];
    for i in 0..3 {
        g[i] = d0 * g0[i] + d1 * g1[i];
    }
    (s, g)
}

fn add_scaled(dst: &mut [f64; 3], src: [f64; 3], w: f64) {
    for i in 0..3 {
        dst[i] += w * src[i];
    }
}

/// Gradients of Eve's fidelity, Bob's fidelity, and the normalization in
/// the three tensor-power variables (v, x, y).
fn lagrangian_gradients(
    protocol: Protocol,
    n: usize,
    v: f64,
    x: f64,
    y: f64,
) -> ([f64; 3], [f64; 3], [f64; 3]) {
    // Z (and X, by symmetry of the table) factor weights
    let zx_e = (
        v * v + x * x,
        [2.0 * v, 2.0 * x, 0.0],
        x * x + y * y,
        [0.0, 2.0 * x, 2.0 * y],
    );
    let zx_b = {
        let q0 = 0.5 + v * x + x * y;
        let g0 = [x, v + y, x];
        (q0, g0, 1.0 - q0, [-g0[0], -g0[1], -g0[2]])
    };
    match protocol {
        Protocol::Bb84 => {
            let (_, ge) = chain(n, zx_e.0, zx_e.1, zx_e.2, zx_e.3);
            let (_, gb) = chain(n, zx_b.0, zx_b.1, zx_b.2, zx_b.3);
            let norm = v * v + 2.0 * x * x + y * y;
            let s = n as f64 * norm.powi(n as i32 - 1);
            let gn = [2.0 * v * s, 4.0 * x * s, 2.0 * y * s];
            (ge, gb, gn)
        }
        Protocol::SixState => {
            // Y factor: pass weight v^2 + y^2, fail 2 x^2 on Eve's side;
            // Bob's Y pass weight 1/2 + vy + x^2.
            let y_e = (
                v * v + y * y,
                [2.0 * v, 0.0, 2.0 * y],
                2.0 * x * x,
                [0.0, 4.0 * x, 0.0],
            );
            let y_b = {
                let q0 = 0.5 + v * y + x * x;
                let g0 = [y, 2.0 * x, v];
                (q0, g0, 1.0 - q0, [-g0[0], -g0[1], -g0[2]])
            };
            let mut ge = [0.0; 3];
            let mut gb = [0.0; 3];
            let (_, g) = chain(n, zx_e.0, zx_e.1, zx_e.2, zx_e.3);
            add_scaled(&mut ge, g, 2.0 / 3.0);
            let (_, g) = chain(n, y_e.0, y_e.1, y_e.2, y_e.3);
            add_scaled(&mut ge, g, 1.0 / 3.0);
            let (_, g) = chain(n, zx_b.0, zx_b.1, zx_b.2, zx_b.3);
            add_scaled(&mut gb, g, 2.0 / 3.0);
            let (_, g) = chain(n, y_b.0, y_b.1, y_b.2, y_b.3);
            add_scaled(&mut gb, g, 1.0 / 3.0);
            let norm = v * v + 2.0 * x * x + y * y;
            let s = n as f64 * norm.powi(n as i32 - 1);
            let gn = [2.0 * v * s, 4.0 * x * s, 2.0 * y * s];
            (ge, gb, gn)
        }
    }
}

/// First-order stationarity defect of the constrained problem at the
/// tensor-power point (v, x, y): the norm of grad F_E projected out of the
/// span of the constraint gradients (Bob's fidelity and normalization),
/// via a least-squares fit of the two multipliers.
pub fn lagrangian_residual_at(
    protocol: Protocol,
    n: usize,
    v: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one qubit".into()));
    }
    let (ge, gb, gn) = lagrangian_gradients(protocol, n, v, x, y);
    // normal equations for min_lambda || ge + lambda1 gb + lambda2 gn ||
    let a11 = dot(&gb, &gb);
    let a12 = dot(&gb, &gn);
    let a22 = dot(&gn, &gn);
    let r1 = -dot(&gb, &ge);
    let r2 = -dot(&gn, &ge);
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-300 {
        return Err(Error::SolverFailure(
            "degenerate constraint gradients".into(),
        ));
    }
    let l1 = (r1 * a22 - r2 * a12) / det;
    let l2 = (a11 * r2 - a12 * r1) / det;
    let mut norm_sq = 0.0;
    for i in 0..3 {
        let ri = ge[i] + l1 * gb[i] + l2 * gn[i];
        norm_sq += ri * ri;
    }
    Ok(norm_sq.sqrt())
}

/// The (v, x, y) tensor-power point of the optimal attack at Bob fidelity
/// `f_b`: the printed BB84 table, or, for six-state, Eve's dual table,
/// which is the universal table at her own fidelity.
pub fn ansatz_point(protocol: Protocol, f_b: f64) -> Result<(f64, f64, f64)> {
    match protocol {
        Protocol::Bb84 => {
            if !(0.5..=1.0).contains(&f_b) {
                return Err(Error::Domain(format!("F_B = {f_b} not in [1/2, 1]")));
            }
            let s = (f_b * (1.0 - f_b)).sqrt();
            Ok((0.5 + s, f_b - 0.5, 0.5 - s))
        }
        Protocol::SixState => {
            let g = sixstate_optimal_fe(f_b)?;
            let v = ((3.0 * g - 1.0) / 2.0).sqrt();
            let x = ((1.0 - g) / 2.0).sqrt();
            Ok((v, x, x))
        }
    }
}

/// Stationarity defect of the optimal attack itself at Bob fidelity `f_b`.
pub fn lagrangian_residual(protocol: Protocol, n: usize, f_b: f64) -> Result<f64> {
    let (v, x, y) = ansatz_point(protocol, f_b)?;
    lagrangian_residual_at(protocol, n, v, x, y)
}
