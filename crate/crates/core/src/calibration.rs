//! Sampled tolerances for the encoding algebra.
//!
//! `ε₁` bounds the normalised Frobenius residuals `‖Φ(a)Φ⁻¹(a) − I‖_F/√d`
//! and `‖Φ(a)Φ⁻¹(b)‖_F/√d`; `δ` bounds `|identity_score(Φ⁻¹(a)·kΦ(a)) − k|`
//! for `k ≤ 3`. Both are 99th percentiles over independent draws.
//!
//! The residuals have closed forms in the Fourier domain. `Φ(a)Φ⁻¹(a)`
//! equals `C_a C_aᵀ`, a circulant with eigenvalues `|â_f|²`, and
//! `Φ⁻¹(a)Φ(a)` is the same circulant conjugated by `Π`, so
//!
//! ```text
//! ‖Φ(a)Φ⁻¹(a) − I‖²_F / d = Σ_f (|â_f|² − 1)² / d
//! ‖Φ(a)Φ⁻¹(b)‖²_F / d     = Σ_f |â_f|² |b̂_f|² / d
//! identity_score(Φ⁻¹(a)·kΦ(a)) = k ‖a‖²
//! ```

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::hrr::derive_seed;

/// Trials per dimension used for the checked-in table.
pub const DEFAULT_TRIALS: usize = 1000;

/// Master seed of the checked-in table.
pub const DEFAULT_SEED: u64 = 20_170_101;

/// Dimensions covered by the checked-in table.
pub const DEFAULT_DIMS: [usize; 9] = [100, 256, 500, 1000, 2000, 3000, 4000, 5000, 6000];

const BUNDLED: &str = include_str!("../data/calibration.csv");

const HEADER: &str = "dim,epsilon1,delta,trials,seed";

/// Tolerances for one dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationRecord {
    pub dim: usize,
    pub epsilon1: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Residuals of one draw of two independent symbols.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    /// `‖Φ(a)Φ⁻¹(a) − I‖_F / √d`, equal to the `Φ⁻¹(a)Φ(a)` residual.
    pub self_residual: f64,
    /// `‖Φ(a)Φ⁻¹(b)‖_F / √d`
    pub cross_residual: f64,
    /// `‖a‖²`
    pub norm_sq: f64,
}

/// Draws `a, b ~ N(0, 1/d)` from `rng_seed` and measures their residuals.
pub fn sample_residuals(dim: usize, rng_seed: u64) -> Residuals {
    let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("finite std");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let a: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(dim);
    let spectrum = |v: &[f64]| {
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft.process(&mut buf);
        buf
    };
    let (sa, sb) = (spectrum(&a), spectrum(&b));
    let d = dim as f64;
    let self_sq: f64 = sa.iter().map(|z| (z.norm_sqr() - 1.0).powi(2)).sum::<f64>() / d;
    let cross_sq: f64 = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| x.norm_sqr() * y.norm_sqr())
        .sum::<f64>()
        / d;
    Residuals {
        self_residual: self_sq.sqrt(),
        cross_residual: cross_sq.sqrt(),
        norm_sq: a.iter().map(|x| x * x).sum(),
    }
}

/// Nearest-rank percentile, `q ∈ (0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Runs `trials` independent draws at `dim` and takes 99th percentiles.
pub fn calibrate(dim: usize, trials: usize, seed: u64) -> Result<CalibrationRecord> {
    if dim == 0 || trials == 0 {
        return Err(Error::InvalidArgument(
            "calibration needs a positive dimension and trial count".into(),
        ));
    }
    let samples: Vec<Residuals> = (0..trials)
        .map(|t| sample_residuals(dim, derive_seed(seed, &format!("calibration/{dim}/{t}"))))
        .collect();
    let eps: Vec<f64> = samples
        .iter()
        .map(|r| r.self_residual.max(r.cross_residual))
        .collect();
    let del: Vec<f64> = samples
        .iter()
        .map(|r| 3.0 * (r.norm_sq - 1.0).abs())
        .collect();
    Ok(CalibrationRecord {
        dim,
        epsilon1: percentile(&eps, 0.99),
        delta: percentile(&del, 0.99),
        trials,
        seed,
    })
}

/// A calibration table, one record per dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Calibration {
    records: Vec<CalibrationRecord>,
}

impl Calibration {
    pub fn new(mut records: Vec<CalibrationRecord>) -> Self {
        records.sort_by_key(|r| r.dim);
        Self { records }
    }

    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled calibration table is well formed")
    }

    pub fn records(&self) -> &[CalibrationRecord] {
        &self.records
    }

    pub fn for_dim(&self, dim: usize) -> Option<&CalibrationRecord> {
        self.records.iter().find(|r| r.dim == dim)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| format_error(1, &e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>().join(",") != HEADER {
            return Err(format_error(1, &format!("expected header `{HEADER}`")));
        }
        let mut records = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| format_error(line, &e.to_string()))?;
            let field = |i: usize| {
                rec.get(i)
                    .ok_or_else(|| format_error(line, "missing field"))
            };
            let num = |i: usize| -> Result<f64> {
                field(i)?
                    .parse()
                    .map_err(|_| format_error(line, &format!("bad number in column {}", i + 1)))
            };
            let int = |i: usize| -> Result<u64> {
                field(i)?
                    .parse()
                    .map_err(|_| format_error(line, &format!("bad integer in column {}", i + 1)))
            };
            records.push(CalibrationRecord {
                dim: int(0)? as usize,
                epsilon1: num(1)?,
                delta: num(2)?,
                trials: int(3)? as usize,
                seed: int(4)?,
            });
        }
        Ok(Self::new(records))
    }

    pub fn render(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{}",
                r.dim, r.epsilon1, r.delta, r.trials, r.seed
            );
        }
        out
    }
}

fn format_error(line: usize, message: &str) -> Error {
    Error::Format {
        line,
        message: message.to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hrr::{identity_score, Factor, HrrSpace};

    #[test]
    fn closed_forms_match_dense_products() {
        let d = 48;
        let space = HrrSpace::new(d, 17).unwrap();
        let (a, b) = (space.vector_of("a"), space.vector_of("b"));
        // Rebuild the residuals directly from the dense matrices.
        let sd = (d as f64).sqrt();
        let ab = space.dense_product(&[Factor::Encode("a"), Factor::Decode("b")]);
        let aa = space.dense_product(&[Factor::Encode("a"), Factor::Decode("a")]);
        let aa_rev = space.dense_product(&[Factor::Decode("a"), Factor::Encode("a")]);
        let dense_self = aa.distance_to_identity() / sd;
        assert!((aa_rev.distance_to_identity() / sd - dense_self).abs() < 1e-12);

        let fft = FftPlanner::<f64>::new().plan_fft_forward(d);
        let spec = |v: &[f64]| {
            let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fft.process(&mut buf);
            buf
        };
        let (sa, sb) = (spec(a.values()), spec(b.values()));
        let self_cf =
            (sa.iter().map(|z| (z.norm_sqr() - 1.0).powi(2)).sum::<f64>() / d as f64).sqrt();
        let cross_cf = (sa
            .iter()
            .zip(&sb)
            .map(|(x, y)| x.norm_sqr() * y.norm_sqr())
            .sum::<f64>()
            / d as f64)
            .sqrt();
        assert!((self_cf - dense_self).abs() < 1e-12);
        assert!((cross_cf - ab.frobenius_norm() / sd).abs() < 1e-12);

        let norm_sq: f64 = a.values().iter().map(|x| x * x).sum();
        for k in 1..=3 {
            let scaled = space.encode("a").scale(k as f64);
            let score = identity_score(&space.decode_op("a").matmul(&scaled));
            assert!((score - k as f64 * norm_sq).abs() < 1e-12);
        }
    }

    #[test]
    fn percentile_uses_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v, 1.0), 100.0);
        assert_eq!(percentile(&[3.0], 0.5), 3.0);
    }

    #[test]
    fn calibration_is_deterministic() {
        let x = calibrate(64, 50, 1).unwrap();
        assert_eq!(x, calibrate(64, 50, 1).unwrap());
        assert_ne!(x, calibrate(64, 50, 2).unwrap());
        assert!(calibrate(0, 5, 1).is_err());
    }

    #[test]
    fn table_round_trips() {
        let t = Calibration::new(vec![
            CalibrationRecord {
                dim: 500,
                epsilon1: 1.25,
                delta: 0.5,
                trials: 10,
                seed: 3,
            },
            CalibrationRecord {
                dim: 100,
                epsilon1: 1.5,
                delta: 0.75,
                trials: 10,
                seed: 3,
            },
        ]);
        let back = Calibration::parse(&t.render()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.records()[0].dim, 100);
        assert!(Calibration::parse("dim,eps\n1,2\n").is_err());
        assert!(Calibration::parse(&format!("{HEADER}\n10,x,1,1,1\n")).is_err());
    }

    #[test]
    fn bundled_table_covers_the_default_dimensions() {
        let t = Calibration::bundled();
        for d in DEFAULT_DIMS {
            let r = t.for_dim(d).unwrap_or_else(|| panic!("missing d={d}"));
            assert_eq!(r.trials, DEFAULT_TRIALS);
            assert_eq!(r.seed, DEFAULT_SEED);
        }
    }
}
