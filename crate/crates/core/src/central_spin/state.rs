use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::basis::SectorBasis;
use super::{CentralSpinError, Memory};
use crate::dist::{compensated_sum, shannon_entropy};
use crate::maxent::C64;

/// Branch eigenvalues below this are discarded when a bath state is re-decomposed.
const EIGEN_DROP: f64 = 1e-15;

/// Sector label, ordered by magnon number first and memory second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SectorKey {
    pub magnons: usize,
    pub memory: Memory,
}

impl SectorKey {
    pub fn new(memory: Memory, magnons: usize) -> Self {
        Self { magnons, memory }
    }

    /// Total `J_z` label `[m = ↓] + n`, conserved by the exchange Hamiltonian.
    pub fn excitation(&self) -> usize {
        self.magnons + usize::from(self.memory == Memory::Down)
    }
}

/// Pure state of memory and bath, stored sector by sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    n_spins: usize,
    sectors: BTreeMap<SectorKey, DVector<C64>>,
}

impl SectorState {
    /// Empty (zero) state.
    pub fn zero(n_spins: usize) -> Self {
        Self {
            n_spins,
            sectors: BTreeMap::new(),
        }
    }

    /// Product state `|memory⟩ ⊗ |config⟩` where set bits of `config` are flipped bath spins.
    pub fn product(n_spins: usize, memory: Memory, config: u32) -> Result<Self, CentralSpinError> {
        if n_spins < 32 && config >> n_spins != 0 {
            return Err(CentralSpinError::InvalidState(format!(
                "configuration {config:#b} has bits beyond {n_spins} spins"
            )));
        }
        let basis = SectorBasis::new(n_spins);
        let n = config.count_ones() as usize;
        let mut v = DVector::zeros(basis.dim(n));
        v[basis.rank(config)] = C64::new(1.0, 0.0);
        let mut s = Self::zero(n_spins);
        s.sectors.insert(SectorKey::new(memory, n), v);
        Ok(s)
    }

    /// Memory state `memory` with the bath in the given `magnons`-sector amplitudes.
    pub fn with_bath(
        n_spins: usize,
        memory: Memory,
        magnons: usize,
        amplitudes: DVector<C64>,
    ) -> Result<Self, CentralSpinError> {
        let mut s = Self::zero(n_spins);
        s.set_sector(SectorKey::new(memory, magnons), amplitudes)?;
        Ok(s)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn sectors(&self) -> impl Iterator<Item = (&SectorKey, &DVector<C64>)> {
        self.sectors.iter()
    }

    pub fn sector(&self, key: SectorKey) -> Option<&DVector<C64>> {
        self.sectors.get(&key)
    }

    pub(crate) fn sectors_mut(&mut self) -> impl Iterator<Item = (&SectorKey, &mut DVector<C64>)> {
        self.sectors.iter_mut()
    }

    /// Inserts or replaces a sector after checking its dimension.
    pub fn set_sector(&mut self, key: SectorKey, amplitudes: DVector<C64>) -> Result<(), CentralSpinError> {
        if key.magnons > self.n_spins {
            return Err(CentralSpinError::InvalidMagnons(key.magnons, self.n_spins));
        }
        let expected = super::binomial(self.n_spins, key.magnons);
        if amplitudes.len() != expected {
            return Err(CentralSpinError::LengthMismatch {
                expected,
                got: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(CentralSpinError::InvalidState("non-finite amplitude".into()));
        }
        self.sectors.insert(key, amplitudes);
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        compensated_sum(self.sectors.values().map(|v| v.norm_squared()))
    }

    /// Probability of the given sector.
    pub fn sector_population(&self, key: SectorKey) -> f64 {
        self.sectors.get(&key).map_or(0.0, |v| v.norm_squared())
    }

    /// Probability of the memory being in `memory`.
    pub fn memory_population(&self, memory: Memory) -> f64 {
        compensated_sum(
            self.sectors
                .iter()
                .filter(|(k, _)| k.memory == memory)
                .map(|(_, v)| v.norm_squared()),
        )
    }

    /// `⟨J_z⟩` of memory plus bath in units of ħ.
    pub fn total_jz(&self) -> f64 {
        let half_n = self.n_spins as f64 / 2.0;
        compensated_sum(
            self.sectors
                .iter()
                .map(|(k, v)| v.norm_squared() * (k.memory.jz() + half_n - k.magnons as f64)),
        )
    }

    /// Mean number of flipped bath spins.
    pub fn mean_magnons(&self) -> f64 {
        compensated_sum(
            self.sectors
                .iter()
                .map(|(k, v)| v.norm_squared() * k.magnons as f64),
        )
    }

    /// Rescales to unit norm. Fails on the zero state.
    pub fn normalized(mut self) -> Result<Self, CentralSpinError> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) {
            return Err(CentralSpinError::InvalidState("zero state".into()));
        }
        for v in self.sectors.values_mut() {
            *v /= C64::new(n, 0.0);
        }
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SectorState) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, v) in &self.sectors {
            if let Some(w) = other.sectors.get(k) {
                acc += v.dotc(w);
            }
        }
        acc
    }
}

/// One pure component of a mixed state.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub state: SectorState,
    /// Memory value assigned when the memory was last re-randomized.
    pub origin: Option<Memory>,
}

/// Classical mixture of pure branches.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchEnsemble {
    n_spins: usize,
    branches: Vec<Branch>,
}

impl BranchEnsemble {
    pub fn new(n_spins: usize, branches: Vec<Branch>) -> Result<Self, CentralSpinError> {
        for b in &branches {
            if b.state.n_spins != n_spins {
                return Err(CentralSpinError::InvalidState(format!(
                    "branch has {} spins, expected {n_spins}",
                    b.state.n_spins
                )));
            }
            if !(b.weight >= 0.0 && b.weight.is_finite()) {
                return Err(CentralSpinError::InvalidState(format!("branch weight {}", b.weight)));
            }
        }
        Ok(Self { n_spins, branches })
    }

    pub fn pure(state: SectorState) -> Self {
        Self {
            n_spins: state.n_spins,
            branches: vec![Branch {
                weight: 1.0,
                state,
                origin: None,
            }],
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub(crate) fn branches_mut(&mut self) -> &mut [Branch] {
        &mut self.branches
    }

    /// `Σ_b w_b ‖ψ_b‖²`.
    pub fn total_probability(&self) -> f64 {
        compensated_sum(self.branches.iter().map(|b| b.weight * b.state.norm_sqr()))
    }

    pub fn memory_population(&self, memory: Memory) -> f64 {
        compensated_sum(
            self.branches
                .iter()
                .map(|b| b.weight * b.state.memory_population(memory)),
        )
    }

    /// `↓` population contributed by branches whose memory was `origin` at re-randomization.
    pub fn down_population_from(&self, origin: Memory) -> f64 {
        compensated_sum(
            self.branches
                .iter()
                .filter(|b| b.origin == Some(origin))
                .map(|b| b.weight * b.state.memory_population(Memory::Down)),
        )
    }

    pub fn total_jz(&self) -> f64 {
        compensated_sum(self.branches.iter().map(|b| b.weight * b.state.total_jz()))
    }

    pub fn mean_magnons(&self) -> f64 {
        compensated_sum(self.branches.iter().map(|b| b.weight * b.state.mean_magnons()))
    }

    /// Entropy of the memory's reduced state. Memory `↑` and `↓` components of a branch
    /// sit in different magnon sectors of the bath, so the reduced state is diagonal.
    pub fn memory_entropy(&self) -> f64 {
        shannon_entropy([
            self.memory_population(Memory::Up),
            self.memory_population(Memory::Down),
        ])
    }

    /// Eigen-decomposition of the bath's reduced state, block by block in magnon number.
    /// Returns `(magnons, eigenvalue, eigenvector)` with eigenvalues above `1e-15`.
    pub fn bath_eigenstates(&self) -> Vec<(usize, f64, DVector<C64>)> {
        let mut blocks: BTreeMap<usize, Vec<DVector<C64>>> = BTreeMap::new();
        for b in &self.branches {
            let s = C64::new(b.weight.sqrt(), 0.0);
            for (k, v) in b.state.sectors() {
                if v.norm_squared() > 0.0 {
                    blocks.entry(k.magnons).or_default().push(v * s);
                }
            }
        }
        let mut out = Vec::new();
        for (n, cols) in blocks {
            let dim = cols[0].len();
            let x = DMatrix::from_columns(&cols);
            if cols.len() <= dim {
                // Gram route: eigenvectors of X X† are X u / sqrt(μ) for X†X u = μ u.
                let gram = x.adjoint() * &x;
                let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
                let eig = SymmetricEigen::new(gram);
                let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
                idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
                for i in idx {
                    let mu = eig.eigenvalues[i];
                    if mu > EIGEN_DROP {
                        let v = &x * eig.eigenvectors.column(i) / C64::new(mu.sqrt(), 0.0);
                        let v = v.normalize();
                        out.push((n, mu, v));
                    }
                }
            } else {
                let rho = &x * x.adjoint();
                let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
                let eig = SymmetricEigen::new(rho);
                let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
                idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
                for i in idx {
                    let mu = eig.eigenvalues[i];
                    if mu > EIGEN_DROP {
                        out.push((n, mu, eig.eigenvectors.column(i).into_owned()));
                    }
                }
            }
        }
        out
    }

    /// Von Neumann entropy of the bath's reduced state.
    pub fn bath_entropy(&self) -> f64 {
        shannon_entropy(self.bath_eigenstates().into_iter().map(|(_, mu, _)| mu))
    }

    /// Replaces the memory by a fresh maximally mixed bit, keeping the bath's reduced
    /// state. Each bath eigenstate becomes two branches, `↑` and `↓`, with half its weight.
    pub fn rerandomize_memory(&self) -> BranchEnsemble {
        let mut branches = Vec::new();
        for (n, mu, v) in self.bath_eigenstates() {
            for memory in [Memory::Up, Memory::Down] {
                let state = SectorState::with_bath(self.n_spins, memory, n, v.clone())
                    .expect("eigenvector lives in the right sector");
                branches.push(Branch {
                    weight: mu / 2.0,
                    state,
                    origin: Some(memory),
                });
            }
        }
        BranchEnsemble {
            n_spins: self.n_spins,
            branches,
        }
    }
}
