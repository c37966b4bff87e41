//! Linear models used by the conformity measures and the DCV estimator.
//!
//! All models carry an intercept as coefficient 0; objects passed in never
//! include the constant column.
//!
//! Models serialize to a plain-text format: a header line naming the kind
//! and feature count, then one coefficient per line.
//!
//! ```text
//! ols <m>
//! logit <m> <ridge>
//! softmax <m> <labels>      (labels × (m+1) lines, label-major)
//! ```

mod logit;
mod ols;
mod softmax;

pub use logit::{
    binomial_loglik, fit_logit, fit_logit_with, loglik_gradient, mean_cond_logodds, LabeledBinarySet, LogitModel,
    LogitOptions, PROB_CLAMP,
};
pub use ols::{fit_ols, OlsModel};
pub use softmax::{fit_softmax, SoftmaxModel};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `b0 + Σ b_j x_j`.
pub(crate) fn linear(coefs: &[f64], x: &[f64]) -> Result<f64> {
    if coefs.len() != x.len() + 1 {
        return Err(Error::Dimension {
            expected: coefs.len() - 1,
            got: x.len(),
        });
    }
    Ok(coefs[0] + coefs[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
}

/// Accumulates the upper triangle of `w · x̃ x̃ᵀ` into a packed `p×p` buffer.
pub(crate) fn add_outer(acc: &mut [f64], x: &[f64], w: f64) {
    let p = x.len() + 1;
    let at = |i: usize| if i == 0 { 1.0 } else { x[i - 1] };
    for i in 0..p {
        let wi = w * at(i);
        for j in i..p {
            acc[i * p + j] += wi * at(j);
        }
    }
}

/// Solves the symmetric positive definite system `a · s = b`, where `a` is
/// given by its upper triangle in row-major order. Returns `None` when the
/// Cholesky factorization fails.
pub(crate) fn solve_spd(a_upper: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let p = b.len();
    let a = DMatrix::from_fn(
        p,
        p,
        |i, j| {
            if i <= j {
                a_upper[i * p + j]
            } else {
                a_upper[j * p + i]
            }
        },
    );
    let chol = a.cholesky()?;
    Some(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}

/// Smallest-to-largest ratio of the squared Cholesky diagonal, a cheap
/// lower bound proxy for the reciprocal condition number.
pub(crate) fn cholesky_conditioning(a_upper: &[f64], p: usize) -> Option<f64> {
    let a = DMatrix::from_fn(
        p,
        p,
        |i, j| {
            if i <= j {
                a_upper[i * p + j]
            } else {
                a_upper[j * p + i]
            }
        },
    );
    let chol = a.cholesky()?;
    let l = chol.l();
    let d: Vec<f64> = (0..p).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(if max > 0.0 { min / max } else { 0.0 })
}

pub(crate) fn write_coefs(out: &mut String, header: &str, coefs: &[f64]) {
    out.push_str(header);
    out.push('\n');
    for c in coefs {
        out.push_str(&c.to_string());
        out.push('\n');
    }
}

pub(crate) fn next_line<'a, I: Iterator<Item = &'a str>>(lines: &mut I, what: &str) -> Result<&'a str> {
    lines
        .next()
        .map(str::trim)
        .ok_or_else(|| Error::Format(format!("unexpected end of input reading {what}")))
}

pub(crate) fn read_coefs<'a, I: Iterator<Item = &'a str>>(lines: &mut I, count: usize) -> Result<Vec<f64>> {
    (0..count)
        .map(|_| {
            let l = next_line(lines, "coefficient")?;
            l.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad coefficient '{l}'")))
        })
        .collect()
}

/// Splits a header line into its kind and numeric fields.
pub(crate) fn parse_header<'a>(line: &'a str, kind: &str, fields: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.first() != Some(&kind) || parts.len() != fields + 1 {
        return Err(Error::Format(format!("expected '{kind}' header, found '{line}'")));
    }
    Ok(parts[1..].to_vec())
}

pub(crate) fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Format(format!("bad count '{s}'")))
}
