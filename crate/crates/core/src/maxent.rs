//! Maximum-entropy reservoir states for commuting conserved observables.
//!
//! Given averages `v_k` of observables `V_k`, the MaxEnt state is
//! `rho = exp(-μ - Σ λ_k V_k)` with `μ = ln Tr exp(-Σ λ_k V_k)`, and its entropy is
//! `S = μ + Σ λ_k <V_k>`. The multipliers minimize the convex dual
//! `ψ(λ) = ln Tr exp(-Σ λ_k V_k) + Σ λ_k v_k`.
//!
//! Only mutually commuting observables are supported. They are diagonalized in a common
//! eigenbasis, which turns the dual into a classical log-sum-exp whose Hessian is the
//! covariance matrix of the observables under `rho`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dist::compensated_sum;
use crate::LN_2;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Default target residual for [`solve_maxent`].
pub const DEFAULT_TOL: f64 = 1e-10;
/// Newton iteration cap.
pub const MAX_ITERATIONS: usize = 200;

const HERMITIAN_TOL: f64 = 1e-12;
const COMMUTATOR_TOL: f64 = 1e-10;
/// Eigenvalues closer than this (relative to the spectral scale) share a cluster during
/// joint diagonalization.
const CLUSTER_TOL: f64 = 1e-9;
/// Multipliers beyond this magnitude are taken as evidence that the dual is unbounded.
const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxEntError {
    #[error("observable {index} ({label}) is not Hermitian (max deviation {deviation:e})")]
    NonHermitianInput {
        index: usize,
        label: String,
        deviation: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("observables {0} and {1} do not commute")]
    NonCommuting(usize, usize),
    #[error("infeasible targets: {0}")]
    InfeasibleTargets(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("tolerance must be > 0 (got {0})")]
    InvalidTolerance(f64),
    #[error("path needs at least two points")]
    EmptyPath,
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("bits must be > 0 (got {0})")]
    InvalidBits(f64),
}

/// A Hermitian observable with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    label: String,
    matrix: CMatrix,
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl Observable {
    pub fn new(label: impl Into<String>, matrix: CMatrix) -> Result<Self, MaxEntError> {
        let label = label.into();
        if matrix.nrows() != matrix.ncols() {
            return Err(MaxEntError::DimensionMismatch(format!(
                "{label} is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() < 2 {
            return Err(MaxEntError::DimensionMismatch(format!(
                "{label} has dimension {}, expected >= 2",
                matrix.nrows()
            )));
        }
        let deviation = hermitian_deviation(&matrix);
        if !(deviation <= HERMITIAN_TOL) {
            return Err(MaxEntError::NonHermitianInput {
                index: 0,
                label,
                deviation,
            });
        }
        Ok(Self { label, matrix })
    }

    /// Real diagonal observable.
    pub fn diagonal(label: impl Into<String>, diag: &[f64]) -> Result<Self, MaxEntError> {
        let m = CMatrix::from_diagonal(&DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&x| C64::new(x, 0.0)),
        ));
        Self::new(label, m)
    }

    /// `J_z` of a single spin-1/2 (eigenvalues ±1/2, ħ = 1).
    pub fn spin_half_jz() -> Self {
        Self::diagonal("J_z", &[0.5, -0.5]).expect("valid")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `Re Tr(rho V)`.
    pub fn expectation(&self, rho: &CMatrix) -> f64 {
        trace_product(rho, &self.matrix)
    }
}

/// `Re Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    compensated_sum((0..n).flat_map(|i| (0..n).map(move |j| (a[(i, j)] * b[(j, i)]).re)))
}

/// Row-major `[[ [re, im], ... ], ...]`.
fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, MaxEntError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(MaxEntError::DimensionMismatch("matrix rows are ragged or not square".into()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Serialize, Deserialize)]
struct ObservableJson {
    label: String,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl Serialize for Observable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ObservableJson {
            label: self.label.clone(),
            matrix: matrix_to_rows(&self.matrix),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Observable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = ObservableJson::deserialize(d)?;
        let m = rows_to_matrix(&raw.matrix).map_err(serde::de::Error::custom)?;
        Observable::new(raw.label, m).map_err(serde::de::Error::custom)
    }
}

/// Observables and the averages the MaxEnt state must reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxEntProblem {
    observables: Vec<Observable>,
    targets: Vec<f64>,
}

#[derive(Deserialize)]
struct RawProblem {
    observables: Vec<Observable>,
    targets: Vec<f64>,
}

impl<'de> Deserialize<'de> for MaxEntProblem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawProblem::deserialize(d)?;
        MaxEntProblem::new(raw.observables, raw.targets).map_err(serde::de::Error::custom)
    }
}

fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    (a * b - b * a).norm()
}

impl MaxEntProblem {
    /// Checks dimensions, lengths and pairwise commutation. Target feasibility is
    /// checked by [`solve_maxent`].
    pub fn new(observables: Vec<Observable>, targets: Vec<f64>) -> Result<Self, MaxEntError> {
        if observables.is_empty() {
            return Err(MaxEntError::DimensionMismatch("no observables".into()));
        }
        if observables.len() != targets.len() {
            return Err(MaxEntError::LengthMismatch(observables.len(), targets.len()));
        }
        let d = observables[0].dim();
        for (i, o) in observables.iter().enumerate() {
            if o.dim() != d {
                return Err(MaxEntError::DimensionMismatch(format!(
                    "observable {i} ({}) has dimension {}, expected {d}",
                    o.label,
                    o.dim()
                )));
            }
        }
        for i in 0..observables.len() {
            for j in i + 1..observables.len() {
                let (a, b) = (&observables[i].matrix, &observables[j].matrix);
                let scale = (a.norm() * b.norm()).max(1.0);
                if commutator_norm(a, b) > COMMUTATOR_TOL * scale {
                    return Err(MaxEntError::NonCommuting(i, j));
                }
            }
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(MaxEntError::InfeasibleTargets(format!("target {i} is not finite")));
        }
        Ok(Self {
            observables,
            targets,
        })
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn dim(&self) -> usize {
        self.observables[0].dim()
    }
}

/// Common eigenbasis of commuting Hermitian matrices.
///
/// Returns the unitary whose columns are joint eigenvectors and, for each column, the
/// eigenvalue tuple `[<u|V_k|u>]_k`.
pub fn joint_diagonalize(observables: &[&CMatrix]) -> (CMatrix, Vec<Vec<f64>>) {
    let d = observables[0].nrows();
    let mut basis = CMatrix::identity(d, d);
    let mut clusters: Vec<Vec<usize>> = vec![(0..d).collect()];
    for v in observables {
        let scale = v.norm().max(1.0);
        let mut next_clusters = Vec::new();
        for cluster in clusters {
            if cluster.len() == 1 {
                next_clusters.push(cluster);
                continue;
            }
            let sub_basis = CMatrix::from_fn(d, cluster.len(), |i, j| basis[(i, cluster[j])]);
            let restricted = sub_basis.adjoint() * *v * &sub_basis;
            let restricted = (&restricted + restricted.adjoint()) * C64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(restricted);
            let mut order: Vec<usize> = (0..cluster.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let rotated = &sub_basis * &eig.eigenvectors;
            for (slot, &k) in order.iter().enumerate() {
                basis.set_column(cluster[slot], &rotated.column(k));
            }
            let mut group = vec![cluster[0]];
            for s in 1..order.len() {
                let gap = eig.eigenvalues[order[s]] - eig.eigenvalues[order[s - 1]];
                if gap > CLUSTER_TOL * scale {
                    next_clusters.push(std::mem::take(&mut group));
                }
                group.push(cluster[s]);
            }
            next_clusters.push(group);
        }
        clusters = next_clusters;
    }
    let spectrum = (0..d)
        .map(|i| {
            let u = basis.column(i);
            observables
                .iter()
                .map(|v| (u.adjoint() * *v * u)[(0, 0)].re)
                .collect()
        })
        .collect();
    (basis, spectrum)
}

/// Solved MaxEnt state.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntState {
    pub multipliers: Vec<f64>,
    pub log_partition: f64,
    pub rho: CMatrix,
    pub entropy_nats: f64,
    /// `Tr(rho V_k)` for each observable.
    pub expectations: Vec<f64>,
    /// Newton iterations used.
    pub iterations: usize,
    /// Largest `|<V_k> - v_k|` at the solution.
    pub residual: f64,
}

#[derive(Serialize)]
struct StateJson<'a> {
    multipliers: &'a [f64],
    log_partition: f64,
    entropy_nats: f64,
    expectations: &'a [f64],
    residual: f64,
    iterations: usize,
    rho: Vec<Vec<[f64; 2]>>,
}

impl Serialize for MaxEntState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StateJson {
            multipliers: &self.multipliers,
            log_partition: self.log_partition,
            entropy_nats: self.entropy_nats,
            expectations: &self.expectations,
            residual: self.residual,
            iterations: self.iterations,
            rho: matrix_to_rows(&self.rho),
        }
        .serialize(s)
    }
}

/// Classical dual on the joint spectrum: rows of `spectrum` are eigenvalue tuples.
struct Dual<'a> {
    spectrum: &'a [Vec<f64>],
    targets: &'a [f64],
}

struct DualEval {
    value: f64,
    log_partition: f64,
    probs: Vec<f64>,
    means: Vec<f64>,
}

impl Dual<'_> {
    fn exponents(&self, lambda: &[f64]) -> Vec<f64> {
        self.spectrum
            .iter()
            .map(|a| -a.iter().zip(lambda).map(|(x, l)| x * l).sum::<f64>())
            .collect()
    }

    fn eval(&self, lambda: &[f64]) -> DualEval {
        let x = self.exponents(lambda);
        let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_partition = m + compensated_sum(x.iter().map(|&xi| (xi - m).exp())).ln();
        let probs: Vec<f64> = x.iter().map(|&xi| (xi - log_partition).exp()).collect();
        let k = self.targets.len();
        let means: Vec<f64> = (0..k)
            .map(|j| compensated_sum(self.spectrum.iter().zip(&probs).map(|(a, p)| p * a[j])))
            .collect();
        let value = log_partition + lambda.iter().zip(self.targets).map(|(l, v)| l * v).sum::<f64>();
        DualEval {
            value,
            log_partition,
            probs,
            means,
        }
    }

    fn covariance(&self, e: &DualEval) -> DMatrix<f64> {
        let k = self.targets.len();
        DMatrix::from_fn(k, k, |i, j| {
            compensated_sum(
                self.spectrum
                    .iter()
                    .zip(&e.probs)
                    .map(|(a, p)| p * (a[i] - e.means[i]) * (a[j] - e.means[j])),
            )
        })
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semidefinite matrix.
fn psd_pseudo_inverse(h: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(h.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cut = top * 1e-13;
    let n = h.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cut && ev > 0.0 {
            let u = eig.eigenvectors.column(k);
            out += (u * u.transpose()) / ev;
        }
    }
    out
}

/// Dual value `ψ(λ)` for `problem` at `lambda`.
pub fn dual_value(problem: &MaxEntProblem, lambda: &[f64]) -> f64 {
    let mats: Vec<&CMatrix> = problem.observables.iter().map(|o| &o.matrix).collect();
    let (_, spectrum) = joint_diagonalize(&mats);
    Dual {
        spectrum: &spectrum,
        targets: &problem.targets,
    }
    .eval(lambda)
    .value
}

/// Solves for the MaxEnt state reproducing the problem's targets to within `tol`.
pub fn solve_maxent(problem: &MaxEntProblem, tol: f64) -> Result<MaxEntState, MaxEntError> {
    if !(tol > 0.0) {
        return Err(MaxEntError::InvalidTolerance(tol));
    }
    let mats: Vec<&CMatrix> = problem.observables.iter().map(|o| &o.matrix).collect();
    let (basis, spectrum) = joint_diagonalize(&mats);
    let k = problem.targets.len();

    for (j, &v) in problem.targets.iter().enumerate() {
        let lo = spectrum.iter().map(|a| a[j]).fold(f64::INFINITY, f64::min);
        let hi = spectrum.iter().map(|a| a[j]).fold(f64::NEG_INFINITY, f64::max);
        let margin = 1e-12 * (hi - lo).abs().max(1.0);
        if !(v > lo + margin && v < hi - margin) {
            return Err(MaxEntError::InfeasibleTargets(format!(
                "target {v} for {} is not strictly inside its spectrum [{lo}, {hi}]",
                problem.observables[j].label
            )));
        }
    }

    let dual = Dual {
        spectrum: &spectrum,
        targets: &problem.targets,
    };
    let mut lambda = vec![0.0; k];
    let mut eval = dual.eval(&lambda);
    let grad = |e: &DualEval| -> Vec<f64> {
        problem.targets.iter().zip(&e.means).map(|(v, m)| v - m).collect()
    };
    let mut g = grad(&eval);
    let mut iterations = 0;
    let mut converged = max_abs(&g) <= tol;
    let mut polish = 0;
    while iterations < MAX_ITERATIONS {
        if converged {
            // A couple of extra Newton steps take the residual to rounding level.
            if polish >= 2 {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        let h = dual.covariance(&eval);
        let hinv = psd_pseudo_inverse(&h);
        let gv = DVector::from_column_slice(&g);
        let newton = -(&hinv * &gv);
        let in_range = &h * &hinv * &gv;
        let null_part = (&gv - in_range).norm();
        let mut expand = false;
        let direction: Vec<f64> = if newton.iter().all(|x| x.is_finite())
            && newton.dot(&gv) < 0.0
            && null_part <= 0.5 * gv.norm()
        {
            newton.iter().copied().collect()
        } else {
            // No usable curvature along the gradient; the dual is flat or unbounded there.
            expand = true;
            g.iter().map(|x| -x).collect()
        };
        let slope: f64 = g.iter().zip(&direction).map(|(a, b)| a * b).sum();
        let trial = |t: f64| -> (Vec<f64>, DualEval) {
            let l: Vec<f64> = lambda.iter().zip(&direction).map(|(a, d)| a + t * d).collect();
            let e = dual.eval(&l);
            (l, e)
        };
        // Close to the optimum the decrease in ψ drops below its rounding error, so a
        // step that shrinks the residual is accepted as well.
        let g_now = max_abs(&g);
        let armijo = |t: f64, e: &DualEval| {
            e.value <= eval.value + 1e-4 * t * slope
                || (!expand
                    && (e.value - eval.value).abs() <= 1e-14 * (1.0 + eval.value.abs())
                    && max_abs(&grad(e)) < g_now)
        };
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let (l, e) = trial(t);
            if e.value.is_finite() && armijo(t, &e) {
                accepted = Some((l, e));
                break;
            }
            t *= 0.5;
        }
        if expand {
            if accepted.is_some() {
                while t < 1e12 {
                    let (l, e) = trial(2.0 * t);
                    if e.value.is_finite() && armijo(2.0 * t, &e) {
                        t *= 2.0;
                        accepted = Some((l, e));
                    } else {
                        break;
                    }
                }
            }
        }
        let Some((l, e)) = accepted else {
            if converged {
                break;
            }
            if max_abs(&lambda) > 1e3 {
                return Err(MaxEntError::InfeasibleTargets(
                    "targets are not jointly attainable (dual is unbounded)".into(),
                ));
            }
            return Err(MaxEntError::NoConvergence {
                iterations,
                residual: max_abs(&g),
            });
        };
        let g_new = grad(&e);
        if converged && max_abs(&g_new) >= max_abs(&g) {
            break;
        }
        lambda = l;
        eval = e;
        g = g_new;
        if max_abs(&lambda) > DIVERGENCE_LIMIT {
            return Err(MaxEntError::InfeasibleTargets(
                "targets are not jointly attainable (multipliers diverge)".into(),
            ));
        }
        converged = converged || max_abs(&g) <= tol;
    }
    let residual = max_abs(&g);
    if residual > tol {
        return Err(MaxEntError::NoConvergence {
            iterations,
            residual,
        });
    }

    let d = basis.nrows();
    let mut rho = CMatrix::zeros(d, d);
    for (i, &p) in eval.probs.iter().enumerate() {
        let u = basis.column(i);
        rho += (u * u.adjoint()) * C64::new(p, 0.0);
    }
    let expectations: Vec<f64> = problem.observables.iter().map(|o| o.expectation(&rho)).collect();
    let entropy_nats = eval.log_partition
        + compensated_sum(lambda.iter().zip(&eval.means).map(|(l, m)| l * m));
    Ok(MaxEntState {
        multipliers: lambda,
        log_partition: eval.log_partition,
        rho,
        entropy_nats,
        expectations,
        iterations,
        residual,
    })
}

/// Entropy of a solved state, `μ + Σ λ_k <V_k>`.
pub fn shannon_entropy(state: &MaxEntState) -> f64 {
    state.log_partition
        + compensated_sum(
            state
                .multipliers
                .iter()
                .zip(&state.expectations)
                .map(|(l, v)| l * v),
        )
}

/// `-Tr(rho ln rho)` from a fresh eigendecomposition of `rho`.
pub fn von_neumann_entropy(rho: &CMatrix) -> f64 {
    let h = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    compensated_sum(
        eig.eigenvalues
            .iter()
            .filter(|&&p| p > 1e-300)
            .map(|&p| -p * p.ln()),
    )
}

/// One point of a path: the observables and the state at that instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub observables: Vec<CMatrix>,
    pub rho: CMatrix,
}

/// Internal-energy-like change of one observable split into work and heat.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct HeatRecord {
    pub du: f64,
    pub dw: f64,
    pub dq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatDecomposition {
    /// `steps[s][k]`: record of observable `k` for step `s -> s+1`.
    pub steps: Vec<Vec<HeatRecord>>,
    /// Sums over the path, per observable.
    pub totals: Vec<HeatRecord>,
}

/// Splits `d<V_k>` along a path into `dW_k = <δV_k>` (in the prior state) and
/// `dQ_k = dU_k - dW_k`.
pub fn heat_decomposition(path: &[PathPoint]) -> Result<HeatDecomposition, MaxEntError> {
    if path.len() < 2 {
        return Err(MaxEntError::EmptyPath);
    }
    let k = path[0].observables.len();
    let d = path[0].rho.nrows();
    for (i, p) in path.iter().enumerate() {
        if p.observables.len() != k {
            return Err(MaxEntError::LengthMismatch(k, p.observables.len()));
        }
        if p.rho.shape() != (d, d) || p.observables.iter().any(|v| v.shape() != (d, d)) {
            return Err(MaxEntError::DimensionMismatch(format!(
                "path point {i} does not have dimension {d}"
            )));
        }
    }
    let mut steps = Vec::with_capacity(path.len() - 1);
    let mut sums = vec![(Vec::new(), Vec::new()); k];
    for w in path.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let row: Vec<HeatRecord> = (0..k)
            .map(|j| {
                let du = trace_product(&b.rho, &b.observables[j]) - trace_product(&a.rho, &a.observables[j]);
                let dv = &b.observables[j] - &a.observables[j];
                let dw = trace_product(&a.rho, &dv);
                HeatRecord { du, dw, dq: du - dw }
            })
            .collect();
        for (j, r) in row.iter().enumerate() {
            sums[j].0.push(r.du);
            sums[j].1.push(r.dw);
        }
        steps.push(row);
    }
    let totals = sums
        .into_iter()
        .map(|(du, dw)| {
            let du = compensated_sum(du);
            let dw = compensated_sum(dw);
            HeatRecord { du, dw, dq: du - dw }
        })
        .collect();
    Ok(HeatDecomposition { steps, totals })
}

/// `Σ_k λ_k ΔQ_k - bits ln 2`; non-negative when the erasure respects the generalized
/// bound.
pub fn erasure_cost_margin(multipliers: &[f64], heats: &[f64], bits: f64) -> Result<f64, MaxEntError> {
    if multipliers.len() != heats.len() {
        return Err(MaxEntError::LengthMismatch(multipliers.len(), heats.len()));
    }
    if !(bits > 0.0) {
        return Err(MaxEntError::InvalidBits(bits));
    }
    Ok(compensated_sum(multipliers.iter().zip(heats).map(|(l, q)| l * q)) - bits * LN_2)
}
