//! Configurations of `n` flipped bath spins, stored as bitmasks in increasing order.
//!
//! Bit `k` set means bath spin `k` points down (carries a magnon). For a fixed number of
//! set bits, increasing integer order coincides with colexicographic order, so the index
//! of a configuration is its rank in the combinatorial number system.

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Table of binomials `C(i, j)` for `i <= n`, used for ranking.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    n_spins: usize,
    table: Vec<Vec<usize>>,
}

impl SectorBasis {
    pub fn new(n_spins: usize) -> Self {
        let table = (0..=n_spins)
            .map(|i| (0..=n_spins + 1).map(|j| binomial(i, j)).collect())
            .collect();
        Self { n_spins, table }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Number of configurations with `magnons` flipped spins.
    pub fn dim(&self, magnons: usize) -> usize {
        if magnons > self.n_spins {
            0
        } else {
            self.table[self.n_spins][magnons]
        }
    }

    /// All configurations with `magnons` set bits, in increasing order.
    pub fn configs(&self, magnons: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.dim(magnons));
        if magnons > self.n_spins {
            return out;
        }
        if magnons == 0 {
            out.push(0);
            return out;
        }
        let limit: u64 = 1u64 << self.n_spins;
        let mut c: u64 = (1u64 << magnons) - 1;
        while c < limit {
            out.push(c as u32);
            // Gosper's hack: next integer with the same popcount.
            let u = c & c.wrapping_neg();
            let v = c + u;
            c = v + (((v ^ c) / u) >> 2);
        }
        out
    }

    /// Position of `config` among configurations with the same number of set bits.
    pub fn rank(&self, config: u32) -> usize {
        let mut r = 0;
        let mut seen = 0;
        let mut bits = config;
        while bits != 0 {
            let pos = bits.trailing_zeros() as usize;
            seen += 1;
            r += self.table[pos][seen];
            bits &= bits - 1;
        }
        r
    }
}
