//! The literal engine: every operator is a dense matrix and every product
//! a GEMM.

use std::collections::HashMap;

use super::{Detection, DistChart, RuleOperators};
use crate::grammar::RuleKind;
use crate::grammar::Sentence;
use crate::hrr::{identity_score, index_symbol, HrrSpace};
use crate::matrix::Matrix;

/// Memoised dense `Φ(s)` and `Φ⁻¹(s)`.
struct Operators<'a> {
    space: &'a HrrSpace,
    encode: HashMap<String, Matrix>,
    decode: HashMap<String, Matrix>,
}

impl<'a> Operators<'a> {
    fn new(space: &'a HrrSpace) -> Self {
        Self {
            space,
            encode: HashMap::new(),
            decode: HashMap::new(),
        }
    }

    fn enc(&mut self, s: &str) -> &Matrix {
        let space = self.space;
        self.encode
            .entry(s.to_owned())
            .or_insert_with(|| space.encode(s))
    }

    fn dec(&mut self, s: &str) -> &Matrix {
        let space = self.space;
        self.decode
            .entry(s.to_owned())
            .or_insert_with(|| space.decode_op(s))
    }

    /// `Φ⁻¹(x) Φ⁻¹(y) Φ⁻¹(z)`
    fn left_triple(&mut self, x: &str, y: &str, z: &str) -> Matrix {
        let xy = self.dec(x).clone().matmul(self.dec(y));
        xy.matmul(self.dec(z))
    }

    /// `Φ(x) Φ(y) Φ(z)`
    fn right_triple(&mut self, x: &str, y: &str, z: &str) -> Matrix {
        let xy = self.enc(x).clone().matmul(self.enc(y));
        xy.matmul(self.enc(z))
    }
}

pub(super) fn init_pleft(space: &HrrSpace, w: &Sentence) -> Matrix {
    let mut ops = Operators::new(space);
    let mut p = Matrix::zeros(space.dim());
    for (pos, token) in w.tokens().iter().enumerate() {
        p += &ops.left_triple(&index_symbol(pos), &index_symbol(pos + 1), token);
    }
    p
}

pub(super) fn unary_pass(
    space: &HrrSpace,
    n: usize,
    rules: &RuleOperators,
    chart: &mut DistChart,
) -> Vec<Detection> {
    let mut trace = Vec::new();
    let mut ops = Operators::new(space);
    let u: Vec<(String, Matrix)> = rules
        .unary()
        .iter()
        .map(|(a, op)| (a.clone(), op.matrix(space)))
        .collect();
    for i in 1..=n {
        let (si, sp) = (index_symbol(i), index_symbol(i - 1));
        for (a, u_a) in &u {
            let prefix = ops.enc(&si).clone().matmul(ops.enc(&sp));
            let p_a = space.sigmoid_mat(&u_a.matmul(&prefix).matmul(&chart.p_left));
            trace.push(Detection::new(
                RuleKind::Unary,
                i - 1,
                i,
                a,
                identity_score(&p_a),
            ));
            chart.p_left += &ops.left_triple(&sp, &si, a).matmul(&p_a);
            chart.p_right += &ops.right_triple(a, &sp, &si).matmul(&p_a);
        }
    }
    trace
}

pub(super) fn binary_pass(
    space: &HrrSpace,
    rules: &RuleOperators,
    chart: &mut DistChart,
) -> Vec<Detection> {
    let mut trace = Vec::new();
    let mut ops = Operators::new(space);
    let b: Vec<(String, Matrix)> = rules
        .binary()
        .iter()
        .map(|(a, op)| (a.clone(), op.matrix(space)))
        .collect();
    let n = chart.n;
    for j in 2..=n {
        for i in (0..=j - 2).rev() {
            let (si, sj) = (index_symbol(i), index_symbol(j));
            for (a, b_a) in &b {
                let prefix = ops.dec(&sj).clone().matmul(ops.enc(&si));
                let m = prefix
                    .matmul(&chart.p_left)
                    .matmul(b_a)
                    .matmul(&chart.p_right);
                let p_a = space.sigmoid_mat(&m).mask_diagonal();
                trace.push(Detection::new(
                    RuleKind::Binary,
                    i,
                    j,
                    a,
                    identity_score(&p_a),
                ));
                chart.p_left += &ops.left_triple(&si, &sj, a).matmul(&p_a);
                chart.p_right += &ops.right_triple(a, &si, &sj).matmul(&p_a);
            }
        }
    }
    trace
}
