//! Holographic reduced representations over `d × d` matrices.
//!
//! Each symbol owns a random vector `a ~ N(0, 1/d)` (per-entry standard
//! deviation `1/√d`, so `aᵀa ≈ 1`). The encode operator is
//! `Φ(a) = C_a Π`, with `C_a` the circulant matrix whose first column is `a`
//! and `Π` one permutation shared by every symbol of the space. Its
//! approximate inverse is `Φ⁻¹(a) = Πᵀ C_aᵀ`, which is also `Φ(a)ᵀ`.
//!
//! Index symbols (`"0"`, `"1"`, …) live in the same namespace as grammar
//! symbols; [`index_symbol`] renders them.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spectral::{pack_pair, pair_count, write_pair, Cursor, Domain, Permutation, Spectral};

/// Sigmoid steepness used when none is configured.
pub const DEFAULT_BETA: f64 = 40.0;

/// Name of the symbol standing for span boundary `k`.
pub fn index_symbol(k: usize) -> String {
    k.to_string()
}

/// A symbol's random vector together with its spectrum.
#[derive(Debug)]
pub struct Symbol {
    values: Vec<f64>,
    spectrum: Vec<Complex64>,
}

impl Symbol {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }
}

/// One factor of a product of encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor<'a> {
    /// `Φ(s)`
    Encode(&'a str),
    /// `Φ⁻¹(s)`
    Decode(&'a str),
}

/// The distributed universe: dimension, seed, permutation, symbol vectors
/// and sigmoid steepness.
///
/// Symbol vectors are drawn lazily behind a lock, so a space can be shared
/// between threads as soon as it is built.
pub struct HrrSpace {
    dim: usize,
    seed: u64,
    beta: f64,
    permutation: Permutation,
    spectral: Spectral,
    symbols: RwLock<HashMap<String, Arc<Symbol>>>,
}

impl std::fmt::Debug for HrrSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HrrSpace")
            .field("dim", &self.dim)
            .field("seed", &self.seed)
            .field("beta", &self.beta)
            .finish_non_exhaustive()
    }
}

const PERMUTATION_TAG: &str = "#permutation";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed for `name` under master seed `seed`.
pub(crate) fn derive_seed(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(name.as_bytes())))
}

impl HrrSpace {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut forward: Vec<usize> = (0..dim).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, PERMUTATION_TAG));
        forward.shuffle(&mut rng);
        Ok(Self {
            dim,
            seed,
            beta: DEFAULT_BETA,
            permutation: Permutation::new(forward),
            spectral: Spectral::new(dim),
            symbols: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {beta}"
            )));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn permutation(&self) -> &Permutation {
        &self.permutation
    }

    pub(crate) fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// The random vector of `name`, drawn on first use.
    pub fn vector_of(&self, name: &str) -> Arc<Symbol> {
        if let Some(s) = self
            .symbols
            .read()
            .expect("symbol cache poisoned")
            .get(name)
        {
            return Arc::clone(s);
        }
        let symbol = Arc::new(self.draw(name));
        let mut cache = self.symbols.write().expect("symbol cache poisoned");
        Arc::clone(cache.entry(name.to_owned()).or_insert(symbol))
    }

    /// Draws every listed symbol up front.
    pub fn prefetch<'a>(&self, names: impl IntoIterator<Item = &'a str>) {
        for n in names {
            self.vector_of(n);
        }
    }

    fn draw(&self, name: &str) -> Symbol {
        let normal = Normal::new(0.0, 1.0 / (self.dim as f64).sqrt()).expect("finite std");
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, name));
        let values: Vec<f64> = (0..self.dim).map(|_| normal.sample(&mut rng)).collect();
        let spectrum = self.spectral.spectrum_of(&values);
        Symbol { values, spectrum }
    }

    /// Dense `Π`.
    pub fn permutation_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim);
        for (r, &c) in self.permutation.forward().iter().enumerate() {
            m[(r, c)] = 1.0;
        }
        m
    }

    /// Dense circulant `C_a` (first column `a`).
    pub fn circulant(&self, name: &str) -> Matrix {
        let a = self.vector_of(name);
        let d = self.dim;
        Matrix::from_fn(d, |r, c| a.values[(r + d - c) % d])
    }

    /// Dense `Φ(s) = C_s Π`.
    pub fn encode(&self, name: &str) -> Matrix {
        let a = self.vector_of(name);
        let d = self.dim;
        let inv = self.permutation.inverse();
        Matrix::from_fn(d, |r, c| a.values[(r + d - inv[c]) % d])
    }

    /// Dense `Φ⁻¹(s) = Πᵀ C_sᵀ`.
    pub fn decode_op(&self, name: &str) -> Matrix {
        let a = self.vector_of(name);
        let d = self.dim;
        let inv = self.permutation.inverse();
        Matrix::from_fn(d, |r, c| a.values[(c + d - inv[r]) % d])
    }

    /// Dense product of a chain of factors.
    pub fn dense_product(&self, factors: &[Factor<'_>]) -> Matrix {
        factors
            .iter()
            .map(|f| match *f {
                Factor::Encode(s) => self.encode(s),
                Factor::Decode(s) => self.decode_op(s),
            })
            .reduce(|acc, m| acc.matmul(&m))
            .unwrap_or_else(|| Matrix::identity(self.dim))
    }

    /// `(F₁ ⋯ F_k) · m` without materialising any factor, in
    /// `O(k d² log d)`.
    pub fn apply(&self, factors: &[Factor<'_>], m: &Matrix) -> Matrix {
        assert_eq!(m.dim(), self.dim, "matrix does not live in this space");
        let d = self.dim;
        let symbols: Vec<(bool, Arc<Symbol>)> = factors
            .iter()
            .map(|f| match *f {
                Factor::Encode(s) => (true, self.vector_of(s)),
                Factor::Decode(s) => (false, self.vector_of(s)),
            })
            .collect();
        let mut out = Matrix::zeros(d);
        let src = m.as_slice();
        out.as_mut_slice()
            .par_chunks_mut(2 * d)
            .enumerate()
            .for_each_init(
                || self.spectral.workspace(),
                |ws, (p, chunk)| {
                    pack_pair(src, d, p, &mut ws.buf);
                    let mut cur = Cursor::new(&self.spectral, ws, Domain::Space);
                    for (enc, sym) in symbols.iter().rev() {
                        if *enc {
                            cur.encode(&self.permutation, sym.spectrum());
                        } else {
                            cur.decode(&self.permutation, sym.spectrum());
                        }
                    }
                    cur.in_space();
                    write_pair(cur.values(), d, chunk);
                },
            );
        debug_assert_eq!(pair_count(d), out.as_slice().chunks(2 * d).count());
        out
    }

    /// `m · (F₁ ⋯ F_k)`, through `(F_kᵀ ⋯ F₁ᵀ mᵀ)ᵀ` and `Φ(s)ᵀ = Φ⁻¹(s)`.
    pub fn apply_right(&self, m: &Matrix, factors: &[Factor<'_>]) -> Matrix {
        let transposed: Vec<Factor<'_>> = factors
            .iter()
            .rev()
            .map(|f| match *f {
                Factor::Encode(s) => Factor::Decode(s),
                Factor::Decode(s) => Factor::Encode(s),
            })
            .collect();
        self.apply(&transposed, &m.transpose()).transpose()
    }

    /// `σ(x) = 1 / (1 + e^{−(x − 0.5)·β})`
    #[inline]
    pub fn sigmoid(&self, x: f64) -> f64 {
        sigmoid(x, self.beta)
    }

    /// Elementwise [`HrrSpace::sigmoid`].
    pub fn sigmoid_mat(&self, m: &Matrix) -> Matrix {
        let beta = self.beta;
        m.map(|x| sigmoid(x, beta))
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (-(x - 0.5) * beta).exp())
}

/// Mean of the diagonal. Reads as an occurrence count: `Φ⁻¹(a)(k·Φ(a))`
/// scores about `k`.
pub fn identity_score(m: &Matrix) -> f64 {
    let d = m.dim();
    if d == 0 {
        return 0.0;
    }
    (0..d).map(|k| m[(k, k)]).sum::<f64>() / d as f64
}
