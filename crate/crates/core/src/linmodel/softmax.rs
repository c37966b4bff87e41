use super::{linear, next_line, parse_header, parse_usize, read_coefs, write_coefs};
use crate::error::{Error, Result};
use crate::par;

const MAX_ITER: usize = 5000;
/// Convergence threshold on the max-norm of the per-example mean gradient.
const TOL: f64 = 1e-8;

/// Multinomial logistic scores `f(x, y) = β_y · (1, x)`. The last label's
/// vector is pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    coefficients: Vec<Vec<f64>>,
    converged: bool,
}

impl SoftmaxModel {
    pub fn new(coefficients: Vec<Vec<f64>>) -> Result<Self> {
        let p = coefficients.first().map_or(0, Vec::len);
        if coefficients.len() < 2 || p == 0 || coefficients.iter().any(|c| c.len() != p) {
            return Err(Error::InvalidArgument(
                "softmax needs at least two equally sized coefficient vectors".into(),
            ));
        }
        Ok(Self {
            coefficients,
            converged: true,
        })
    }

    pub fn n_labels(&self) -> usize {
        self.coefficients.len()
    }

    pub fn n_features(&self) -> usize {
        self.coefficients[0].len() - 1
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn score(&self, x: &[f64], label: usize) -> Result<f64> {
        let b = self.coefficients.get(label).ok_or(Error::LabelOutOfSpace {
            label,
            size: self.n_labels(),
        })?;
        linear(b, x)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.coefficients.iter().map(|b| linear(b, x)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let flat: Vec<f64> = self.coefficients.concat();
        write_coefs(
            &mut s,
            &format!("softmax {} {}", self.n_features(), self.n_labels()),
            &flat,
        );
        s
    }

    pub fn read_text<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Self> {
        let h = parse_header(next_line(lines, "softmax header")?, "softmax", 2)?;
        let m = parse_usize(h[0])?;
        let k = parse_usize(h[1])?;
        let flat = read_coefs(lines, k * (m + 1))?;
        Self::new(flat.chunks(m + 1).map(<[f64]>::to_vec).collect())
    }
}

/// Penalized mean log-likelihood and its gradient over the free
/// parameters (all labels but the last, label-major).
fn evaluate<R: AsRef<[f64]> + Sync>(
    x: &[R],
    labels: &[usize],
    k: usize,
    ridge: f64,
    theta: &[f64],
    with_grad: bool,
) -> (f64, Vec<f64>) {
    let n = x.len();
    let p = theta.len() / (k - 1);
    let width = 1 + if with_grad { theta.len() } else { 0 };
    let acc = par::chunked_sum(n, width, |i, acc| {
        let row = x[i].as_ref();
        let mut eta: Vec<f64> = (0..k - 1)
            .map(|c| linear(&theta[c * p..(c + 1) * p], row).unwrap_or(f64::NAN))
            .collect();
        eta.push(0.0);
        let mx = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + eta.iter().map(|e| (e - mx).exp()).sum::<f64>().ln();
        acc[0] += eta[labels[i]] - lse;
        if with_grad {
            for c in 0..k - 1 {
                let r = if labels[i] == c { 1.0 } else { 0.0 } - (eta[c] - lse).exp();
                let g = &mut acc[1 + c * p..1 + (c + 1) * p];
                g[0] += r;
                for (a, v) in g[1..].iter_mut().zip(row) {
                    *a += r * v;
                }
            }
        }
    });
    let nf = n as f64;
    let mut f = acc[0] / nf;
    let mut grad: Vec<f64> = acc[1..].iter().map(|g| g / nf).collect();
    for c in 0..k - 1 {
        for j in 1..p {
            let b = theta[c * p + j];
            f -= 0.5 * ridge * b * b / nf;
            if with_grad {
                grad[c * p + j] -= ridge * b / nf;
            }
        }
    }
    (f, grad)
}

/// Ridge-penalized multinomial logistic regression by gradient ascent with
/// Barzilai–Borwein step proposals and Armijo backtracking.
pub fn fit_softmax<R: AsRef<[f64]> + Sync>(
    x: &[R],
    labels: &[usize],
    n_labels: usize,
    ridge: f64,
) -> Result<SoftmaxModel> {
    if x.len() != labels.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: labels.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("fit_softmax on an empty set".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_labels) {
        return Err(Error::LabelOutOfSpace {
            label: bad,
            size: n_labels,
        });
    }
    let mut present = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::InvalidArgument(
            "fit_softmax needs at least two distinct labels".into(),
        ));
    }
    let m = x[0].as_ref().len();
    let p = m + 1;
    let k = n_labels;
    let mut theta = vec![0.0; (k - 1) * p];
    let (mut f, mut g) = evaluate(x, labels, k, ridge, &theta, true);
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if g.iter().fold(0.0f64, |a, v| a.max(v.abs())) < TOL {
            converged = true;
            break;
        }
        let mut t = step;
        let (trial, ft) = loop {
            let trial: Vec<f64> = theta.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            let (ft, _) = evaluate(x, labels, k, ridge, &trial, false);
            if ft >= f + 1e-4 * t * gnorm2 || t < 1e-14 {
                break (trial, ft);
            }
            t *= 0.5;
        };
        if ft < f {
            break;
        }
        let (_, gt) = evaluate(x, labels, k, ridge, &trial, true);
        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(gt.iter().zip(&g)).map(|(si, (a, b))| si * (a - b)).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        // Ascent on a concave objective: s·Δg < 0.
        step = if sy < 0.0 { (ss / -sy).clamp(1e-8, 1e8) } else { t * 2.0 };
        theta = trial;
        f = ft;
        g = gt;
    }
    let mut coefficients: Vec<Vec<f64>> = theta.chunks(p).map(<[f64]>::to_vec).collect();
    coefficients.push(vec![0.0; p]);
    Ok(SoftmaxModel {
        coefficients,
        converged,
    })
}
