//! The FFT engine.
//!
//! The chart is stored as spectra of packed column pairs: `q = F(Π P_left)`
//! and `r̂ = F(P_right)`. Keeping `Π P_left` rather than `P_left` saves one
//! gather, because every product that reads `P_left` starts with a
//! circulant applied to `Π P_left`.
//!
//! In the binary pass only the diagonal of the detection matrix survives
//! the mask, and since `Φ(B) Φ⁻¹(C) = C_B C_Cᵀ` the rule operator `B_A` is
//! a single circulant. The diagonal is `Σ_m Y[k,m] Z[m,k]` with
//! `Y = Φ⁻¹(j) Φ(i) P_left` and `Z = B_A P_right`, both one inverse
//! transform per column pair away from the stored spectra. Updates multiply
//! the diagonal gate into cached column spectra of the insertion operators.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::{Detection, DistChart, RuleOperators};
use crate::grammar::RuleKind;
use crate::grammar::Sentence;
use crate::hrr::{index_symbol, sigmoid, HrrSpace, Symbol};
use crate::matrix::Matrix;
use crate::spectral::{pack_pair, write_pair, Cursor, Domain, Spectral, Workspace};

/// Column pairs of `Z` reduced per task.
const DIAG_PAIRS: usize = 4;

pub(super) struct SpectralChart {
    d: usize,
    n: usize,
    q: Vec<Complex64>,
    r: Vec<Complex64>,
}

fn index_symbols(space: &HrrSpace, n: usize) -> Vec<Arc<Symbol>> {
    (0..=n).map(|k| space.vector_of(&index_symbol(k))).collect()
}

/// Column `c` of `C_aᵀ`, whose entry `m` is `a[(c − m) mod d]`.
fn circulant_t_column<'a>(a: &[f64], c: usize, out: impl Iterator<Item = &'a mut f64>) {
    let (head, tail) = a.split_at(c + 1);
    for (o, &v) in out.zip(head.iter().rev().chain(tail.iter().rev())) {
        *o = v;
    }
}

/// Column `m` of `C_a`, whose entry `r` is `a[(r − m) mod d]`.
fn circulant_column<'a>(a: &[f64], m: usize, out: impl Iterator<Item = &'a mut f64>) {
    let (head, tail) = a.split_at(a.len() - m);
    for (o, &v) in out.zip(tail.iter().chain(head)) {
        *o = v;
    }
}

/// Columns `c0` and `c0 + 1` of `C_aᵀ`, packed.
fn circulant_t_columns(a: &[f64], c0: usize, buf: &mut [Complex64]) {
    circulant_t_column(a, c0, buf.iter_mut().map(|v| &mut v.re));
    if c0 + 1 < a.len() {
        circulant_t_column(a, c0 + 1, buf.iter_mut().map(|v| &mut v.im));
    } else {
        buf.iter_mut().for_each(|v| v.im = 0.0);
    }
}

/// Columns `m0` and `m1` of `C_a`, packed. `m1 = None` leaves the
/// imaginary part empty.
fn circulant_columns(a: &[f64], m0: usize, m1: Option<usize>, buf: &mut [Complex64]) {
    circulant_column(a, m0, buf.iter_mut().map(|v| &mut v.re));
    match m1 {
        Some(m) => circulant_column(a, m, buf.iter_mut().map(|v| &mut v.im)),
        None => buf.iter_mut().for_each(|v| v.im = 0.0),
    }
}

fn add_into(dst: &mut [Complex64], src: &[Complex64]) {
    for (o, v) in dst.iter_mut().zip(src) {
        *o += v;
    }
}

/// `dst += spec ⊙ (packed spectrum h with its columns scaled by s0, s1)`.
///
/// With `Z = F(x + i y)`, the packed spectrum of `s0·x + i·s1·y` is
/// `(s0+s1)/2 · Z[f] + (s0−s1)/2 · conj(Z[−f])`.
fn add_scaled_product(
    dst: &mut [Complex64],
    spec: &[Complex64],
    conj_spec: bool,
    h: &[Complex64],
    s0: f64,
    s1: f64,
) {
    let plus = 0.5 * (s0 + s1);
    let minus = 0.5 * (s0 - s1);
    let term = |f: usize, mirror: Complex64| {
        let scaled = h[f] * plus + mirror.conj() * minus;
        let m = if conj_spec { spec[f].conj() } else { spec[f] };
        m * scaled
    };
    dst[0] += term(0, h[0]);
    // h[d − f] for f = 1..d, walked backwards.
    for ((f, o), &mirror) in dst.iter_mut().enumerate().skip(1).zip(h[1..].iter().rev()) {
        *o += term(f, mirror);
    }
}

impl SpectralChart {
    fn pairs(&self) -> usize {
        self.d.div_ceil(2)
    }

    /// Chart holding the input triples only.
    pub fn from_sentence(space: &HrrSpace, w: &Sentence) -> Self {
        let d = space.dim();
        let n = w.len();
        let idx = index_symbols(space, n);
        let tokens: Vec<Arc<Symbol>> = w.tokens().iter().map(|t| space.vector_of(t)).collect();
        let perm = space.permutation();
        let spectral = space.spectral();
        let mut q = vec![Complex64::default(); d.div_ceil(2) * d];
        q.par_chunks_mut(d).enumerate().for_each_init(
            || spectral.workspace(),
            |ws, (p, qp)| {
                for (pos, tok) in tokens.iter().enumerate() {
                    // Π Φ⁻¹(i−1) Φ⁻¹(i) Φ⁻¹(a) = C_{i−1}ᵀ Πᵀ C_iᵀ Πᵀ C_aᵀ
                    circulant_t_columns(tok.values(), 2 * p, &mut ws.buf);
                    Cursor::new(spectral, ws, Domain::Space)
                        .perm_t(perm)
                        .circ_t(idx[pos + 1].spectrum())
                        .perm_t(perm)
                        .circ_t(idx[pos].spectrum())
                        .in_frequency();
                    add_into(qp, &ws.buf);
                }
            },
        );
        Self {
            d,
            n,
            q,
            r: vec![Complex64::default(); d.div_ceil(2) * d],
        }
    }

    pub fn from_dist_chart(space: &HrrSpace, chart: &DistChart) -> Self {
        let d = space.dim();
        let perm = space.permutation();
        let spectral = space.spectral();
        let mut q = vec![Complex64::default(); d.div_ceil(2) * d];
        let mut r = q.clone();
        let (pl, pr) = (chart.p_left().as_slice(), chart.p_right().as_slice());
        q.par_chunks_mut(d)
            .zip(r.par_chunks_mut(d))
            .enumerate()
            .for_each_init(
                || spectral.workspace(),
                |ws, (p, (qp, rp))| {
                    pack_pair(pl, d, p, &mut ws.buf);
                    Cursor::new(spectral, ws, Domain::Space)
                        .perm(perm)
                        .in_frequency();
                    qp.copy_from_slice(&ws.buf);
                    pack_pair(pr, d, p, &mut ws.buf);
                    spectral.forward(&mut ws.buf, &mut ws.scratch);
                    rp.copy_from_slice(&ws.buf);
                },
            );
        Self {
            d,
            n: chart.n(),
            q,
            r,
        }
    }

    pub fn into_dist_chart(self, space: &HrrSpace) -> DistChart {
        let d = self.d;
        let perm = space.permutation();
        let spectral = space.spectral();
        let mut pl = vec![0.0; d * d];
        let mut pr = vec![0.0; d * d];
        pl.par_chunks_mut(2 * d)
            .zip(pr.par_chunks_mut(2 * d))
            .zip(self.q.par_chunks(d).zip(self.r.par_chunks(d)))
            .for_each_init(
                || spectral.workspace(),
                |ws, ((cl, cr), (qp, rp))| {
                    ws.buf.copy_from_slice(qp);
                    Cursor::new(spectral, ws, Domain::Frequency).perm_t(perm);
                    write_pair(&ws.buf, d, cl);
                    ws.buf.copy_from_slice(rp);
                    spectral.inverse(&mut ws.buf, &mut ws.scratch);
                    write_pair(&ws.buf, d, cr);
                },
            );
        DistChart::new(
            Matrix::from_col_major(d, pl),
            Matrix::from_col_major(d, pr),
            self.n,
        )
    }

    /// Column-local: every column pair runs the whole pass on its own.
    pub fn unary_pass(&mut self, space: &HrrSpace, ops: &RuleOperators) -> Vec<Detection> {
        if ops.unary().is_empty() {
            return Vec::new();
        }
        let d = self.d;
        let n = self.n;
        let beta = space.beta();
        let idx = index_symbols(space, n);
        let rules: Vec<(Arc<Symbol>, &[Complex64])> = ops
            .unary()
            .iter()
            .map(|(a, op)| (space.vector_of(a), op.spectrum.as_slice()))
            .collect();
        let perm = space.permutation();
        let spectral = space.spectral();
        // Diagonal entries of each gate, per column pair and step.
        let steps = n * rules.len();
        let mut diag = vec![0.0; self.pairs() * steps];
        self.q
            .par_chunks_mut(d)
            .zip(self.r.par_chunks_mut(d))
            .zip(diag.par_chunks_mut(steps.max(1)))
            .enumerate()
            .for_each_init(
                || (spectral.workspace(), vec![Complex64::default(); d]),
                |(ws, gate), (p, ((qp, rp), dp))| {
                    let single = 2 * p + 1 == d;
                    let mut step = 0;
                    for i in 1..=n {
                        let (si, sp) = (idx[i].spectrum(), idx[i - 1].spectrum());
                        for (a, u) in &rules {
                            // U_A Φ(i) Φ(i−1) P_left = C_u Π C_i Π C_{i−1} (Π P_left)
                            ws.buf.copy_from_slice(qp);
                            let k = Cursor::new(spectral, ws, Domain::Frequency)
                                .circ(sp)
                                .perm(perm)
                                .circ(si)
                                .perm(perm)
                                .circ(u)
                                .in_space()
                                .take_scale();
                            for (g, m) in gate.iter_mut().zip(&ws.buf) {
                                let im = if single { 0.0 } else { sigmoid(m.im * k, beta) };
                                *g = Complex64::new(sigmoid(m.re * k, beta), im);
                            }
                            dp[step] =
                                gate[2 * p].re + if single { 0.0 } else { gate[2 * p + 1].im };
                            step += 1;
                            // Π Φ⁻¹(i−1) Φ⁻¹(i) Φ⁻¹(A) = C_{i−1}ᵀ Πᵀ C_iᵀ Πᵀ C_Aᵀ
                            ws.buf.copy_from_slice(gate);
                            Cursor::new(spectral, ws, Domain::Space)
                                .circ_t(a.spectrum())
                                .perm_t(perm)
                                .circ_t(si)
                                .perm_t(perm)
                                .circ_t(sp);
                            add_into(qp, &ws.buf);
                            // Φ(A) Φ(i−1) Φ(i) = C_A Π C_{i−1} Π C_i Π
                            ws.buf.copy_from_slice(gate);
                            Cursor::new(spectral, ws, Domain::Space)
                                .perm(perm)
                                .circ(si)
                                .perm(perm)
                                .circ(sp)
                                .perm(perm)
                                .circ(a.spectrum())
                                .in_frequency();
                            add_into(rp, &ws.buf);
                        }
                    }
                },
            );
        let mut trace = Vec::with_capacity(steps);
        for i in 1..=n {
            for (k, (a, _)) in ops.unary().iter().enumerate() {
                let step = (i - 1) * rules.len() + k;
                let total: f64 = diag.chunks(steps).map(|c| c[step]).sum();
                trace.push(Detection::new(
                    RuleKind::Unary,
                    i - 1,
                    i,
                    a,
                    total / d as f64,
                ));
            }
        }
        trace
    }

    pub fn binary_pass(&mut self, space: &HrrSpace, ops: &RuleOperators) -> Vec<Detection> {
        let n = self.n;
        let mut trace = Vec::new();
        if ops.binary().is_empty() || n < 2 {
            return trace;
        }
        let d = self.d;
        let beta = space.beta();
        let idx = index_symbols(space, n);
        let rules: Vec<(Arc<Symbol>, &[Complex64])> = ops
            .binary()
            .iter()
            .map(|(a, op)| (space.vector_of(a), op.spectrum.as_slice()))
            .collect();
        let perm = space.permutation();
        let spectral = space.spectral();
        let mut y = vec![0.0; d * d];
        let mut gate = vec![0.0; d];
        let mut h_left: Vec<Vec<Complex64>> =
            vec![vec![Complex64::default(); self.pairs() * d]; rules.len()];
        let mut h_right = vec![Complex64::default(); self.pairs() * d];

        for j in 2..=n {
            let sj = &idx[j];
            for ((a, _), h) in rules.iter().zip(h_left.iter_mut()) {
                fill_left_insertion(spectral, perm, a, sj, h);
            }
            for i in (0..=j - 2).rev() {
                let si = &idx[i];
                fill_right_insertion(spectral, perm, si, sj, &mut h_right);
                for (((name, _), (a, b_spec)), h_l) in ops.binary().iter().zip(&rules).zip(&h_left)
                {
                    // Y = Φ⁻¹(j) Φ(i) P_left = Πᵀ C_jᵀ C_i (Π P_left), column-major.
                    y.par_chunks_mut(2 * d)
                        .zip(self.q.par_chunks(d))
                        .for_each_init(
                            || spectral.workspace(),
                            |ws, (cy, qp)| {
                                ws.buf.copy_from_slice(qp);
                                Cursor::new(spectral, ws, Domain::Frequency)
                                    .circ(si.spectrum())
                                    .circ_t(sj.spectrum())
                                    .perm_t(perm);
                                write_pair(&ws.buf, d, cy);
                            },
                        );
                    // Z = B_A P_right, a few columns at a time, reduced
                    // against the matching rows of Y.
                    let y = &y;
                    gate.par_chunks_mut(2 * DIAG_PAIRS)
                        .zip(self.r.par_chunks(DIAG_PAIRS * d))
                        .enumerate()
                        .for_each_init(
                            || (spectral.workspace(), vec![0.0; 2 * DIAG_PAIRS * d]),
                            |(ws, z), (g, (acc, rg))| {
                                let k0 = g * 2 * DIAG_PAIRS;
                                for (t, rp) in rg.chunks(d).enumerate() {
                                    ws.buf.copy_from_slice(rp);
                                    Cursor::new(spectral, ws, Domain::Frequency)
                                        .circ(b_spec)
                                        .in_space();
                                    write_pair(&ws.buf, d, &mut z[2 * t * d..(2 * t + 2) * d]);
                                }
                                acc.fill(0.0);
                                for m in 0..d {
                                    let row = &y[m * d + k0..m * d + k0 + acc.len()];
                                    for (t, (o, &yv)) in acc.iter_mut().zip(row).enumerate() {
                                        *o += yv * z[t * d + m];
                                    }
                                }
                                for o in acc.iter_mut() {
                                    *o = sigmoid(*o, beta);
                                }
                            },
                        );
                    trace.push(Detection::new(
                        RuleKind::Binary,
                        i,
                        j,
                        name,
                        gate.iter().sum::<f64>() / d as f64,
                    ));
                    let (ispec, aspec) = (si.spectrum(), a.spectrum());
                    let gate = &gate;
                    self.q
                        .par_chunks_mut(d)
                        .zip(self.r.par_chunks_mut(d))
                        .zip(h_l.par_chunks(d).zip(h_right.par_chunks(d)))
                        .enumerate()
                        .for_each(|(p, ((qp, rp), (hl, hr)))| {
                            let s0 = gate[2 * p];
                            let s1 = gate.get(2 * p + 1).copied().unwrap_or(0.0);
                            add_scaled_product(qp, ispec, true, hl, s0, s1);
                            add_scaled_product(rp, aspec, false, hr, s0, s1);
                        });
                }
            }
        }
        trace
    }
}

/// Column spectra of `Πᵀ C_jᵀ Πᵀ C_Aᵀ`, so that
/// `F(Π Φ⁻¹(i) Φ⁻¹(j) Φ⁻¹(A) D) = conj(î) ⊙ (h · D)`.
fn fill_left_insertion(
    spectral: &Spectral,
    perm: &crate::spectral::Permutation,
    a: &Symbol,
    sj: &Symbol,
    out: &mut [Complex64],
) {
    let d = spectral.dim();
    out.par_chunks_mut(d).enumerate().for_each_init(
        || spectral.workspace(),
        |ws: &mut Workspace, (p, hp)| {
            circulant_t_columns(a.values(), 2 * p, &mut ws.buf);
            Cursor::new(spectral, ws, Domain::Space)
                .perm_t(perm)
                .circ_t(sj.spectrum())
                .perm_t(perm)
                .in_frequency();
            hp.copy_from_slice(&ws.buf);
        },
    );
}

/// Column spectra of `Π C_i Π C_j Π`, so that
/// `F(Φ(A) Φ(i) Φ(j) D) = Â ⊙ (h · D)`.
fn fill_right_insertion(
    spectral: &Spectral,
    perm: &crate::spectral::Permutation,
    si: &Symbol,
    sj: &Symbol,
    out: &mut [Complex64],
) {
    let d = spectral.dim();
    let inv = perm.inverse();
    out.par_chunks_mut(d).enumerate().for_each_init(
        || spectral.workspace(),
        |ws: &mut Workspace, (p, hp)| {
            // Π e_c = e_{inv[c]}, and C_j e_m is column m of C_j.
            let c0 = 2 * p;
            let m1 = (c0 + 1 < d).then(|| inv[c0 + 1]);
            circulant_columns(sj.values(), inv[c0], m1, &mut ws.buf);
            Cursor::new(spectral, ws, Domain::Space)
                .perm(perm)
                .circ(si.spectrum())
                .perm(perm)
                .in_frequency();
            hp.copy_from_slice(&ws.buf);
        },
    );
}

/// Raw decoder scores `(Φ(A) Φ(j) Φ(i) p₀)[0]` for every `A` in `symbols`,
/// where `p₀` is column 0 of `P_left`.
pub(super) fn decode_span(
    space: &HrrSpace,
    p0: &[f64],
    si: &str,
    sj: &str,
    symbols: &[String],
) -> Vec<f64> {
    let d = space.dim();
    let spectral = space.spectral();
    let perm = space.permutation();
    let mut ws = spectral.workspace();
    for (v, &x) in ws.buf.iter_mut().zip(p0) {
        *v = Complex64::new(x, 0.0);
    }
    let (vi, vj) = (space.vector_of(si), space.vector_of(sj));
    Cursor::new(spectral, &mut ws, Domain::Space)
        .perm(perm)
        .circ(vi.spectrum())
        .perm(perm)
        .circ(vj.spectrum())
        .perm(perm);
    // Row 0 of C_A is a[(−m) mod d].
    symbols
        .iter()
        .map(|s| {
            let a = space.vector_of(s);
            (0..d).map(|m| a.values()[(d - m) % d] * ws.buf[m].re).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_scaling_matches_separate_columns() {
        let d = 9;
        let sp = Spectral::new(d);
        let x: Vec<f64> = (0..d).map(|k| k as f64 - 3.0).collect();
        let y: Vec<f64> = (0..d).map(|k| (k * k) as f64 * 0.1).collect();
        let mut packed: Vec<Complex64> = x
            .iter()
            .zip(&y)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        let mut scratch = sp.workspace().scratch;
        sp.forward(&mut packed, &mut scratch);
        let ones = vec![Complex64::new(1.0, 0.0); d];
        let mut out = vec![Complex64::default(); d];
        add_scaled_product(&mut out, &ones, false, &packed, 2.0, -0.5);
        sp.inverse(&mut out, &mut scratch);
        for k in 0..d {
            assert!((out[k].re - 2.0 * x[k]).abs() < 1e-12);
            assert!((out[k].im + 0.5 * y[k]).abs() < 1e-12);
        }
    }
}
