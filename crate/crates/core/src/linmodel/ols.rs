use super::{
    add_outer, cholesky_conditioning, linear, next_line, parse_header, parse_usize, read_coefs, solve_spd, write_coefs,
};
use crate::error::{Error, Result};
use crate::par;

/// Squared-Cholesky-diagonal ratio below which the Gram matrix is treated as
/// numerically singular.
const SINGULAR_RATIO: f64 = 1e-13;

/// Least-squares linear model; coefficient 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsModel {
    coefficients: Vec<f64>,
}

impl OlsModel {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument("OLS model needs an intercept".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        linear(&self.coefficients, x)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write_coefs(&mut s, &format!("ols {}", self.n_features()), &self.coefficients);
        s
    }

    pub fn read_text<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Self> {
        let h = parse_header(next_line(lines, "ols header")?, "ols", 1)?;
        let m = parse_usize(h[0])?;
        Self::new(read_coefs(lines, m + 1)?)
    }
}

/// Fits by the normal equations. When the Gram matrix is numerically
/// singular (Cholesky fails, or its squared-diagonal ratio drops below
/// 1e−13) a ridge of 1e−10 × the largest Gram diagonal is added to the
/// non-intercept diagonal, growing tenfold until the factorization succeeds.
pub fn fit_ols<R: AsRef<[f64]> + Sync>(x: &[R], y: &[f64]) -> Result<OlsModel> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    let m = x.first().map(|r| r.as_ref().len()).unwrap_or(0);
    let p = m + 1;
    if x.len() < p {
        return Err(Error::Underdetermined {
            rows: x.len(),
            params: p,
        });
    }
    if let Some(bad) = x.iter().find(|r| r.as_ref().len() != m) {
        return Err(Error::Dimension {
            expected: m,
            got: bad.as_ref().len(),
        });
    }
    let acc = par::chunked_sum(x.len(), p * p + p, |i, acc| {
        let row = x[i].as_ref();
        add_outer(&mut acc[..p * p], row, 1.0);
        acc[p * p] += y[i];
        for (j, v) in row.iter().enumerate() {
            acc[p * p + 1 + j] += v * y[i];
        }
    });
    let (gram, rhs) = acc.split_at(p * p);

    let well_conditioned = cholesky_conditioning(gram, p).is_some_and(|r| r >= SINGULAR_RATIO);
    if well_conditioned {
        if let Some(beta) = solve_spd(gram, rhs) {
            return OlsModel::new(beta);
        }
    }
    let max_diag = (0..p).map(|i| gram[i * p + i]).fold(0.0, f64::max).max(1.0);
    let mut lambda = 1e-10 * max_diag;
    for _ in 0..12 {
        let mut g = gram.to_vec();
        for i in 1..p {
            g[i * p + i] += lambda;
        }
        if let Some(beta) = solve_spd(&g, rhs) {
            return OlsModel::new(beta);
        }
        lambda *= 10.0;
    }
    Err(Error::InvalidArgument(
        "OLS normal equations could not be solved".into(),
    ))
}
