use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::basis::SectorBasis;
use super::state::{SectorKey, SectorState};
use super::{BathSpec, CentralSpinError, Memory};
use crate::maxent::C64;

/// Sectors up to this dimension are diagonalized exactly; larger ones use Lanczos.
pub const DENSE_SECTOR_LIMIT: usize = 2048;
/// Largest sector the evolver will allocate.
pub const MAX_SECTOR_DIM: usize = 1 << 22;

const KRYLOV_TOL: f64 = 1e-10;
const KRYLOV_DIM: usize = 40;
/// Eigenvalues closer than this are treated as one level in spectral expansions.
const LEVEL_TOL: f64 = 1e-12;

/// Couplings within one excitation sector `D`: `(↓, D-1)` rows first, then `(↑, D)`.
struct SectorHamiltonian {
    down_dim: usize,
    up_dim: usize,
    /// `(down index, up index, g_k)` for every nonzero matrix element.
    edges: Vec<(usize, usize, f64)>,
}

impl SectorHamiltonian {
    fn build(bath: &BathSpec, basis: &SectorBasis, excitation: usize) -> Self {
        let n = bath.n_spins();
        let down_dim = if excitation >= 1 { basis.dim(excitation - 1) } else { 0 };
        let up_dim = basis.dim(excitation);
        let mut edges = Vec::new();
        if down_dim > 0 && up_dim > 0 {
            for (i, c) in basis.configs(excitation - 1).into_iter().enumerate() {
                for (k, &g) in bath.couplings().iter().enumerate().take(n) {
                    if c & (1 << k) == 0 {
                        edges.push((i, basis.rank(c | (1 << k)), g));
                    }
                }
            }
        }
        Self {
            down_dim,
            up_dim,
            edges,
        }
    }

    fn dim(&self) -> usize {
        self.down_dim + self.up_dim
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        let d = self.down_dim;
        for &(i, j, g) in &self.edges {
            out[i] += x[d + j] * g;
            out[d + j] += x[i] * g;
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for &(i, j, g) in &self.edges {
            h[(i, self.down_dim + j)] = g;
            h[(self.down_dim + j, i)] = g;
        }
        h
    }

    /// Upper bound on the spectral radius (largest absolute row sum).
    fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0; self.dim()];
        for &(i, j, g) in &self.edges {
            rows[i] += g;
            rows[self.down_dim + j] += g;
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

enum Propagator {
    Dense {
        energies: DVector<f64>,
        vectors: DMatrix<f64>,
    },
    Krylov,
}

struct SectorSolver {
    ham: SectorHamiltonian,
    prop: Propagator,
}

impl SectorSolver {
    fn evolve(&self, psi: &mut [C64], t: f64) {
        if self.ham.edges.is_empty() || t == 0.0 {
            return;
        }
        match &self.prop {
            Propagator::Dense { energies, vectors } => {
                let n = psi.len();
                let mut coeff = vec![C64::new(0.0, 0.0); n];
                for (j, c) in coeff.iter_mut().enumerate() {
                    let col = vectors.column(j);
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..n {
                        acc += psi[i] * col[i];
                    }
                    *c = acc * C64::from_polar(1.0, -energies[j] * t);
                }
                for (i, p) in psi.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, c) in coeff.iter().enumerate() {
                        acc += *c * vectors[(i, j)];
                    }
                    *p = acc;
                }
            }
            Propagator::Krylov => krylov_evolve(&self.ham, psi, t),
        }
    }
}

/// `exp(-iHt) psi` by restarted Lanczos with adaptive substeps.
fn krylov_evolve(ham: &SectorHamiltonian, psi: &mut [C64], t: f64) {
    let n = psi.len();
    let norm_h = ham.norm_bound().max(1e-300);
    let mut remaining = t;
    let mut h = t.min(20.0 / norm_h);
    let mut w = vec![C64::new(0.0, 0.0); n];
    while remaining > 0.0 {
        let beta0 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if beta0 == 0.0 {
            return;
        }
        let m_max = KRYLOV_DIM.min(n);
        let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|z| z / beta0).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        let mut invariant = false;
        for j in 0..m_max {
            ham.apply(&basis[j], &mut w);
            let a: f64 = basis[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
            alpha.push(a);
            // Full reorthogonalization keeps the small basis orthonormal.
            for v in &basis {
                let c: C64 = v.iter().zip(&w).map(|(v, x)| v.conj() * x).sum();
                for (x, vi) in w.iter_mut().zip(v) {
                    *x -= c * vi;
                }
            }
            let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            beta.push(b);
            if b <= 1e-13 * norm_h {
                invariant = true;
                break;
            }
            if j + 1 < m_max {
                basis.push(w.iter().map(|z| z / b).collect());
            }
        }
        let m = alpha.len();
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            tri[(i, i)] = alpha[i];
            if i + 1 < m {
                tri[(i, i + 1)] = beta[i];
                tri[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let small = |step: f64| -> Vec<C64> {
            (0..m)
                .map(|r| {
                    (0..m)
                        .map(|k| {
                            let v = &eig.eigenvectors;
                            C64::from_polar(v[(r, k)] * v[(0, k)], -eig.eigenvalues[k] * step)
                        })
                        .sum()
                })
                .collect()
        };
        let mut step = h.min(remaining);
        let mut y = small(step);
        if !invariant {
            loop {
                let err = beta0 * beta[m - 1] * y[m - 1].norm();
                if err <= KRYLOV_TOL * step / t || step < 1e-12 * t {
                    break;
                }
                step *= 0.5;
                y = small(step);
            }
        }
        for x in psi.iter_mut() {
            *x = C64::new(0.0, 0.0);
        }
        for (v, c) in basis.iter().zip(&y) {
            let c = c * beta0;
            for (x, vi) in psi.iter_mut().zip(v) {
                *x += c * vi;
            }
        }
        remaining -= step;
        if remaining < 1e-15 * t {
            remaining = 0.0;
        }
        h = (step * 1.5).min(remaining.max(0.0));
        if invariant {
            h = remaining;
        }
    }
}

/// Exchange-Hamiltonian propagator for one bath, with per-sector solvers built lazily.
pub struct HyperfineEvolver {
    bath: BathSpec,
    basis: SectorBasis,
    solvers: Vec<OnceLock<Result<SectorSolver, CentralSpinError>>>,
}

impl std::fmt::Debug for HyperfineEvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HyperfineEvolver")
            .field("bath", &self.bath)
            .finish_non_exhaustive()
    }
}

impl HyperfineEvolver {
    pub fn new(bath: &BathSpec) -> Self {
        let n = bath.n_spins();
        Self {
            bath: bath.clone(),
            basis: SectorBasis::new(n),
            solvers: (0..=n + 1).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn bath(&self) -> &BathSpec {
        &self.bath
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    fn solver(&self, excitation: usize) -> Result<&SectorSolver, CentralSpinError> {
        self.solvers[excitation]
            .get_or_init(|| {
                let ham = SectorHamiltonian::build(&self.bath, &self.basis, excitation);
                let dim = ham.dim();
                if dim > MAX_SECTOR_DIM {
                    return Err(CentralSpinError::DimensionOverflow(dim));
                }
                let prop = if dim <= DENSE_SECTOR_LIMIT {
                    let eig = SymmetricEigen::new(ham.dense());
                    // The solver's eigenvectors are orthonormal only to a few ulps; a QR pass
                    // keeps repeated short steps from drifting in norm.
                    Propagator::Dense {
                        energies: eig.eigenvalues,
                        vectors: eig.eigenvectors.qr().q(),
                    }
                } else {
                    Propagator::Krylov
                };
                Ok(SectorSolver { ham, prop })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Whether sector `excitation` is propagated by exact diagonalization.
    pub fn is_dense(&self, excitation: usize) -> Result<bool, CentralSpinError> {
        Ok(matches!(self.solver(excitation)?.prop, Propagator::Dense { .. }))
    }

    fn excitations(state: &SectorState) -> Vec<usize> {
        let mut d: Vec<usize> = state.sectors().map(|(k, _)| k.excitation()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    fn gather(&self, state: &SectorState, excitation: usize, solver: &SectorSolver) -> Vec<C64> {
        let mut psi = vec![C64::new(0.0, 0.0); solver.ham.dim()];
        if excitation >= 1 {
            if let Some(v) = state.sector(SectorKey::new(Memory::Down, excitation - 1)) {
                psi[..solver.ham.down_dim].copy_from_slice(v.as_slice());
            }
        }
        if let Some(v) = state.sector(SectorKey::new(Memory::Up, excitation)) {
            psi[solver.ham.down_dim..].copy_from_slice(v.as_slice());
        }
        psi
    }

    /// `exp(-iHt)` applied to `state`.
    pub fn evolve(&self, state: &SectorState, t: f64) -> Result<SectorState, CentralSpinError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CentralSpinError::InvalidTime(t));
        }
        if state.n_spins() != self.bath.n_spins() {
            return Err(CentralSpinError::LengthMismatch {
                expected: self.bath.n_spins(),
                got: state.n_spins(),
            });
        }
        if t == 0.0 {
            return Ok(state.clone());
        }
        let mut out = SectorState::zero(state.n_spins());
        for d in Self::excitations(state) {
            let solver = self.solver(d)?;
            let mut psi = self.gather(state, d, solver);
            solver.evolve(&mut psi, t);
            let (down, up) = psi.split_at(solver.ham.down_dim);
            if !down.is_empty() {
                out.set_sector(SectorKey::new(Memory::Down, d - 1), DVector::from_column_slice(down))?;
            }
            if !up.is_empty() {
                out.set_sector(SectorKey::new(Memory::Up, d), DVector::from_column_slice(up))?;
            }
        }
        Ok(out)
    }

    /// Spectral expansion of the `↓` part of `state` under evolution, or `None` when a
    /// needed sector is too large for exact diagonalization.
    pub fn down_trace(&self, state: &SectorState) -> Result<Option<DownTrace>, CentralSpinError> {
        let mut levels: Vec<(f64, Vec<C64>)> = Vec::new();
        let mut blocks = Vec::new();
        for d in Self::excitations(state) {
            let solver = self.solver(d)?;
            let Propagator::Dense { energies, vectors } = &solver.prop else {
                return Ok(None);
            };
            let down_dim = solver.ham.down_dim;
            if down_dim == 0 {
                continue;
            }
            let psi = self.gather(state, d, solver);
            let n = psi.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
            let start = levels.len();
            let mut current: Option<(f64, Vec<C64>)> = None;
            for j in order {
                let col = vectors.column(j);
                let c: C64 = (0..n).map(|i| psi[i] * col[i]).sum();
                if c.norm() == 0.0 {
                    continue;
                }
                let e = energies[j];
                let same = current.as_ref().is_some_and(|(e0, _)| (e - e0).abs() <= LEVEL_TOL);
                if !same {
                    if let Some(l) = current.take() {
                        levels.push(l);
                    }
                    current = Some((e, vec![C64::new(0.0, 0.0); down_dim]));
                }
                let (_, w) = current.as_mut().expect("set above");
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi += c * col[i];
                }
            }
            if let Some(l) = current.take() {
                levels.push(l);
            }
            blocks.push(start..levels.len());
        }
        Ok(Some(DownTrace { levels, blocks }))
    }
}

/// `↓` population of a fixed state as a function of evolution time.
#[derive(Debug, Clone)]
pub struct DownTrace {
    levels: Vec<(f64, Vec<C64>)>,
    blocks: Vec<std::ops::Range<usize>>,
}

impl DownTrace {
    pub fn down_population(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for r in &self.blocks {
            let dim = self.levels[r.start].1.len();
            let mut acc = vec![C64::new(0.0, 0.0); dim];
            for (e, w) in &self.levels[r.clone()] {
                let ph = C64::from_polar(1.0, -e * t);
                for (a, x) in acc.iter_mut().zip(w) {
                    *a += ph * x;
                }
            }
            total += acc.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        total
    }
}

/// `exp(-iHt)` applied to `state` for the exchange coupling of `bath`.
pub fn evolve_hyperfine(
    state: &SectorState,
    bath: &BathSpec,
    t: f64,
) -> Result<SectorState, CentralSpinError> {
    HyperfineEvolver::new(bath).evolve(state, t)
}

/// Half period of the flop between `|↓⟩` with the bright `n`-magnon bath state and the
/// `↑` sector, `π / (2 g sqrt((n+1)(N-n)))`, for uniform couplings.
pub fn half_flop_time(bath: &BathSpec, n: usize) -> Result<f64, CentralSpinError> {
    let big_n = bath.n_spins();
    if n >= big_n {
        return Err(CentralSpinError::InvalidMagnons(n, big_n));
    }
    let g = bath
        .uniform_coupling()
        .ok_or(CentralSpinError::NonUniformCouplings)?;
    Ok(std::f64::consts::PI / (2.0 * g * (((n + 1) * (big_n - n)) as f64).sqrt()))
}

/// Bath state `(Σ_k g_k σ⁻_k)^n |0⟩`, normalized.
pub(crate) fn bright_state(bath: &BathSpec, n: usize) -> DVector<C64> {
    let basis = SectorBasis::new(bath.n_spins());
    let mut v = DVector::from_element(1, C64::new(1.0, 0.0));
    for m in 0..n {
        let mut next = DVector::zeros(basis.dim(m + 1));
        for (i, c) in basis.configs(m).into_iter().enumerate() {
            for (k, &g) in bath.couplings().iter().enumerate() {
                if c & (1 << k) == 0 {
                    next[basis.rank(c | (1 << k))] += v[i] * g;
                }
            }
        }
        v = next;
    }
    v.normalize()
}

/// Numerical flop time for arbitrary couplings: the time in `(0, t_max]` on a grid of
/// `points` at which `|↓⟩` with the bright `n`-magnon bath state has moved the most
/// population into `↑`. Returns `(t, transferred population)`.
pub fn scan_transfer_time(
    bath: &BathSpec,
    n: usize,
    t_max: f64,
    points: usize,
) -> Result<(f64, f64), CentralSpinError> {
    if n >= bath.n_spins() {
        return Err(CentralSpinError::InvalidMagnons(n, bath.n_spins()));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CentralSpinError::InvalidTime(t_max));
    }
    let state = SectorState::with_bath(bath.n_spins(), Memory::Down, n, bright_state(bath, n))?;
    let ev = HyperfineEvolver::new(bath);
    let mut best = (0.0, 0.0);
    let points = points.max(1);
    for i in 1..=points {
        let t = t_max * i as f64 / points as f64;
        let up = ev.evolve(&state, t)?.memory_population(Memory::Up);
        if up > best.1 {
            best = (t, up);
        }
    }
    Ok(best)
}
