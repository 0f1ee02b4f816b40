//! FFT plumbing for structured circulant/permutation products.
//!
//! Real columns are processed two at a time, packed as the real and
//! imaginary parts of one complex vector. All operators used here are
//! real-linear, so the packing commutes with them.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// A fixed permutation `Π` with `(Π x)[r] = x[forward[r]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    /// Panics if `forward` is not a bijection on `0..len`.
    pub fn new(forward: Vec<usize>) -> Self {
        let mut inverse = vec![usize::MAX; forward.len()];
        for (r, &s) in forward.iter().enumerate() {
            assert!(
                s < forward.len() && inverse[s] == usize::MAX,
                "not a permutation"
            );
            inverse[s] = r;
        }
        Self { forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Source index for each output row.
    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// `dst = Π src`.
    #[inline]
    pub fn apply<T: Copy>(&self, src: &[T], dst: &mut [T]) {
        for (d, &s) in dst.iter_mut().zip(&self.forward) {
            *d = src[s];
        }
    }

    /// `dst = Πᵀ src`.
    #[inline]
    pub fn apply_transpose<T: Copy>(&self, src: &[T], dst: &mut [T]) {
        for (d, &s) in dst.iter_mut().zip(&self.inverse) {
            *d = src[s];
        }
    }
}

/// Forward/inverse FFT plans of one size. The inverse is normalised.
#[derive(Clone)]
pub(crate) struct Spectral {
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl Spectral {
    pub fn new(dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(dim);
        let inv = planner.plan_fft_inverse(dim);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            dim,
            fwd,
            inv,
            scratch_len,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, scratch);
    }

    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse_unscaled(buf, scratch);
        let s = 1.0 / self.dim as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    /// Inverse transform without the `1/d` factor.
    pub fn inverse_unscaled(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, scratch);
    }

    /// Spectrum of a real vector.
    pub fn spectrum_of(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        self.forward(&mut buf, &mut scratch);
        buf
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            buf: vec![Complex64::default(); self.dim],
            tmp: vec![Complex64::default(); self.dim],
            scratch: vec![Complex64::default(); self.scratch_len],
        }
    }
}

/// Per-thread scratch buffers for [`Cursor`].
pub(crate) struct Workspace {
    pub buf: Vec<Complex64>,
    pub tmp: Vec<Complex64>,
    pub scratch: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Domain {
    Space,
    Frequency,
}

/// Applies a sequence of circulant and permutation factors to the vector
/// held in `ws.buf`, transforming between domains only when needed.
///
/// The `1/d` of each inverse transform is carried as a pending factor and
/// folded into the next circulant product. Whatever is still pending is
/// applied when the cursor is dropped, unless claimed with
/// [`Cursor::take_scale`].
pub(crate) struct Cursor<'a> {
    spectral: &'a Spectral,
    ws: &'a mut Workspace,
    domain: Domain,
    scale: f64,
}

impl Drop for Cursor<'_> {
    fn drop(&mut self) {
        if self.scale != 1.0 {
            let s = self.scale;
            for v in self.ws.buf.iter_mut() {
                *v *= s;
            }
        }
    }
}

impl<'a> Cursor<'a> {
    pub fn new(spectral: &'a Spectral, ws: &'a mut Workspace, domain: Domain) -> Self {
        Self {
            spectral,
            ws,
            domain,
            scale: 1.0,
        }
    }

    /// Returns the pending factor and leaves `ws.buf` unscaled by it.
    pub fn take_scale(&mut self) -> f64 {
        std::mem::replace(&mut self.scale, 1.0)
    }

    pub fn in_frequency(&mut self) -> &mut Self {
        if self.domain == Domain::Space {
            self.spectral
                .forward(&mut self.ws.buf, &mut self.ws.scratch);
            self.domain = Domain::Frequency;
        }
        self
    }

    pub fn in_space(&mut self) -> &mut Self {
        if self.domain == Domain::Frequency {
            self.spectral
                .inverse_unscaled(&mut self.ws.buf, &mut self.ws.scratch);
            self.scale /= self.spectral.dim as f64;
            self.domain = Domain::Space;
        }
        self
    }

    /// `x ← Π x`
    pub fn perm(&mut self, p: &Permutation) -> &mut Self {
        self.in_space();
        p.apply(&self.ws.buf, &mut self.ws.tmp);
        std::mem::swap(&mut self.ws.buf, &mut self.ws.tmp);
        self
    }

    /// `x ← Πᵀ x`
    pub fn perm_t(&mut self, p: &Permutation) -> &mut Self {
        self.in_space();
        p.apply_transpose(&self.ws.buf, &mut self.ws.tmp);
        std::mem::swap(&mut self.ws.buf, &mut self.ws.tmp);
        self
    }

    /// `x ← C_a x`, given the spectrum of `a`.
    pub fn circ(&mut self, spectrum: &[Complex64]) -> &mut Self {
        self.in_frequency();
        let k = self.take_scale();
        if k == 1.0 {
            for (v, s) in self.ws.buf.iter_mut().zip(spectrum) {
                *v *= s;
            }
        } else {
            for (v, s) in self.ws.buf.iter_mut().zip(spectrum) {
                *v *= s * k;
            }
        }
        self
    }

    /// `x ← C_aᵀ x`, given the spectrum of `a`.
    pub fn circ_t(&mut self, spectrum: &[Complex64]) -> &mut Self {
        self.in_frequency();
        let k = self.take_scale();
        for (v, s) in self.ws.buf.iter_mut().zip(spectrum) {
            *v *= s.conj() * k;
        }
        self
    }

    /// `x ← Φ(a) x = C_a Π x`
    pub fn encode(&mut self, p: &Permutation, spectrum: &[Complex64]) -> &mut Self {
        self.perm(p).circ(spectrum)
    }

    /// `x ← Φ⁻¹(a) x = Πᵀ C_aᵀ x`
    pub fn decode(&mut self, p: &Permutation, spectrum: &[Complex64]) -> &mut Self {
        self.circ_t(spectrum).perm_t(p)
    }

    /// Current values, with any pending factor applied first.
    pub fn values(&mut self) -> &[Complex64] {
        let k = self.take_scale();
        if k != 1.0 {
            for v in self.ws.buf.iter_mut() {
                *v *= k;
            }
        }
        &self.ws.buf
    }
}

/// Number of packed column pairs for a `dim`-column matrix.
#[inline]
pub(crate) fn pair_count(dim: usize) -> usize {
    dim.div_ceil(2)
}

/// Packs columns `2p` and `2p + 1` of a column-major matrix.
pub(crate) fn pack_pair(data: &[f64], dim: usize, p: usize, out: &mut [Complex64]) {
    let c0 = 2 * p;
    let re = &data[c0 * dim..(c0 + 1) * dim];
    if c0 + 1 < dim {
        let im = &data[(c0 + 1) * dim..(c0 + 2) * dim];
        for ((o, &r), &i) in out.iter_mut().zip(re).zip(im) {
            *o = Complex64::new(r, i);
        }
    } else {
        for (o, &r) in out.iter_mut().zip(re) {
            *o = Complex64::new(r, 0.0);
        }
    }
}

/// Writes a packed pair into a chunk holding one or two columns of a
/// column-major matrix.
pub(crate) fn write_pair(src: &[Complex64], dim: usize, chunk: &mut [f64]) {
    let (re, im) = chunk.split_at_mut(dim);
    for (o, v) in re.iter_mut().zip(src) {
        *o = v.re;
    }
    for (o, v) in im.iter_mut().zip(src) {
        *o = v.im;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circulant(a: &[f64]) -> Vec<Vec<f64>> {
        let d = a.len();
        (0..d)
            .map(|r| (0..d).map(|c| a[(r + d - c) % d]).collect())
            .collect()
    }

    fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn circ_matches_explicit_circulant() {
        let d = 12;
        let a: Vec<f64> = (0..d).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect();
        let x: Vec<f64> = (0..d).map(|k| (k as f64 * 0.37).cos()).collect();
        let y: Vec<f64> = (0..d).map(|k| (k as f64 * 0.11).sin()).collect();
        let sp = Spectral::new(d);
        let spec = sp.spectrum_of(&a);
        let cm = circulant(&a);
        let cmt: Vec<Vec<f64>> = (0..d).map(|r| (0..d).map(|c| cm[c][r]).collect()).collect();

        let mut ws = sp.workspace();
        for (k, v) in ws.buf.iter_mut().enumerate() {
            *v = Complex64::new(x[k], y[k]);
        }
        let mut cur = Cursor::new(&sp, &mut ws, Domain::Space);
        cur.circ(&spec).in_space();
        let (ex, ey) = (matvec(&cm, &x), matvec(&cm, &y));
        for k in 0..d {
            assert!((cur.values()[k].re - ex[k]).abs() < 1e-12);
            assert!((cur.values()[k].im - ey[k]).abs() < 1e-12);
        }

        let mut ws = sp.workspace();
        for (k, v) in ws.buf.iter_mut().enumerate() {
            *v = Complex64::new(x[k], 0.0);
        }
        let mut cur = Cursor::new(&sp, &mut ws, Domain::Space);
        cur.circ_t(&spec).in_space();
        let et = matvec(&cmt, &x);
        for (v, e) in cur.values().iter().zip(&et) {
            assert!((v.re - e).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_round_trips() {
        let p = Permutation::new(vec![2, 0, 3, 1]);
        let x = [10, 11, 12, 13];
        let mut y = [0; 4];
        let mut z = [0; 4];
        p.apply(&x, &mut y);
        assert_eq!(y, [12, 10, 13, 11]);
        p.apply_transpose(&y, &mut z);
        assert_eq!(z, x);
    }

    #[test]
    #[should_panic(expected = "not a permutation")]
    fn rejects_non_bijection() {
        Permutation::new(vec![0, 0, 1]);
    }
}
