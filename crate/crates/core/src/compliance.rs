//! Convex-separable distances between a class's empirical distribution and
//! the distribution the missingness graph induces on the support.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mg::{Assignment, MgError, MissingnessGraph};
use crate::worlds::Support;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistanceKind {
    Kl,
    /// Squared Euclidean; its square root has the same minimizers.
    SquaredEuclidean,
    /// Twice the total variation distance.
    L1,
    ChiSquareStat,
    Hellinger,
    /// `0` for `k ≤ 1`, `k − 1` otherwise; ignores `n` and `p`.
    Matchings,
}

impl DistanceKind {
    pub const STATISTICAL: [DistanceKind; 5] = [
        DistanceKind::Kl,
        DistanceKind::SquaredEuclidean,
        DistanceKind::L1,
        DistanceKind::ChiSquareStat,
        DistanceKind::Hellinger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Kl => "kl",
            DistanceKind::SquaredEuclidean => "eu2",
            DistanceKind::L1 => "l1",
            DistanceKind::ChiSquareStat => "chi2",
            DistanceKind::Hellinger => "hellinger",
            DistanceKind::Matchings => "matchings",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = ComplianceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [DistanceKind::Matchings]
            .into_iter()
            .chain(DistanceKind::STATISTICAL)
            .find(|k| k.name() == s)
            .ok_or_else(|| ComplianceError::UnknownDistance(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplianceError {
    #[error("unknown distance `{0}` (expected kl, eu2, l1, chi2, hellinger or matchings)")]
    UnknownDistance(String),
    #[error("chi-square test needs at least two support rows, found {0}")]
    TooFewRows(usize),
    #[error("support row {0} has probability 0 under the missingness graph")]
    ZeroInduced(usize),
    #[error(transparent)]
    Mg(#[from] MgError),
}

/// `p_j` for each support row: the marginal of the row's attribute values.
pub fn induced_distribution(
    mg: &MissingnessGraph,
    attributes: &[String],
    support: &Support,
) -> Result<Vec<f64>, ComplianceError> {
    support
        .rows
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let a: Assignment = attributes.iter().cloned().zip(row.iter().cloned()).collect();
            let p = mg.marginal(&a)?;
            if p > 0.0 {
                Ok(p)
            } else {
                Err(ComplianceError::ZeroInduced(j))
            }
        })
        .collect()
}

pub fn per_tuple_term(kind: DistanceKind, k: u32, n: usize, p: f64) -> f64 {
    let e = k as f64 / n as f64;
    match kind {
        DistanceKind::Kl => {
            if k == 0 {
                0.0
            } else {
                e * (e / p).ln()
            }
        }
        DistanceKind::SquaredEuclidean => (e - p).powi(2),
        DistanceKind::L1 => (e - p).abs(),
        DistanceKind::ChiSquareStat => (e - p).powi(2) / p,
        DistanceKind::Hellinger => (e.sqrt() - p.sqrt()).powi(2),
        DistanceKind::Matchings => k.saturating_sub(1) as f64,
    }
}

/// `d_j(q) − d_j(q−1)` for `q ≥ 1`.
pub fn marginal_cost(kind: DistanceKind, q: u32, n: usize, p: f64) -> f64 {
    per_tuple_term(kind, q, n, p) - per_tuple_term(kind, q - 1, n, p)
}

pub fn class_distance(kind: DistanceKind, k: &[u32], n: usize, induced: &[f64]) -> f64 {
    k.iter().zip(induced).map(|(&kj, &p)| per_tuple_term(kind, kj, n, p)).sum()
}

/// The same distances written over distributions rather than counts.
/// `n` is only consulted by [`DistanceKind::Matchings`].
pub fn distribution_distance(kind: DistanceKind, empirical: &[f64], induced: &[f64], n: usize) -> f64 {
    let pairs = empirical.iter().zip(induced);
    match kind {
        DistanceKind::Kl => pairs.filter(|(e, _)| **e > 0.0).map(|(e, p)| e * (e.ln() - p.ln())).sum(),
        DistanceKind::SquaredEuclidean => pairs.map(|(e, p)| (e - p) * (e - p)).sum(),
        DistanceKind::L1 => pairs.map(|(e, p)| (e - p).abs()).sum(),
        DistanceKind::ChiSquareStat => pairs.map(|(e, p)| (e - p) * (e - p) / p).sum(),
        DistanceKind::Hellinger => pairs.map(|(e, p)| e + p - 2.0 * (e * p).sqrt()).sum(),
        DistanceKind::Matchings => empirical.iter().map(|e| ((e * n as f64).round() - 1.0).max(0.0)).sum(),
    }
}

/// Statistic and survival probability of the chi-square law with `m − 1`
/// degrees of freedom.
pub fn chi_square_p_value(k: &[u32], n: usize, induced: &[f64]) -> Result<(f64, f64), ComplianceError> {
    if k.len() < 2 {
        return Err(ComplianceError::TooFewRows(k.len()));
    }
    let stat = class_distance(DistanceKind::ChiSquareStat, k, n, induced);
    Ok((stat, chi_square_sf(stat, (k.len() - 1) as f64)))
}

pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, x / 2.0)
}

/// Lanczos approximation (g = 7, 9 terms).
fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // Series for P(a, x).
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        // Modified Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}
