use super::{add_outer, linear, next_line, parse_header, parse_usize, read_coefs, solve_spd, write_coefs};
use crate::error::{Error, Result};
use crate::par;

/// Fitted probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

/// Objects paired with binary outcomes.
#[derive(Debug, Clone)]
pub struct LabeledBinarySet<'a> {
    objects: Vec<&'a [f64]>,
    outcomes: Vec<bool>,
}

impl<'a> LabeledBinarySet<'a> {
    pub fn new(objects: Vec<&'a [f64]>, outcomes: Vec<bool>) -> Result<Self> {
        if objects.len() != outcomes.len() {
            return Err(Error::Dimension {
                expected: objects.len(),
                got: outcomes.len(),
            });
        }
        if let Some(first) = objects.first() {
            let m = first.len();
            if let Some(bad) = objects.iter().find(|o| o.len() != m) {
                return Err(Error::Dimension {
                    expected: m,
                    got: bad.len(),
                });
            }
        }
        Ok(Self { objects, outcomes })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn objects(&self) -> &[&'a [f64]] {
        &self.objects
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn n_features(&self) -> usize {
        self.objects.first().map_or(0, |o| o.len())
    }

    /// Same objects with replaced outcomes.
    pub fn with_outcomes(&self, outcomes: Vec<bool>) -> Result<Self> {
        Self::new(self.objects.clone(), outcomes)
    }

    /// The examples at `indices`.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            objects: indices.iter().map(|&i| self.objects[i]).collect(),
            outcomes: indices.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `log P(C = c | η)` for the logistic link.
fn log_prob(eta: f64, c: bool) -> f64 {
    if c {
        -softplus(-eta)
    } else {
        -softplus(eta)
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn check_dims(data: &LabeledBinarySet, coefs: &[f64]) -> Result<()> {
    if !data.is_empty() && coefs.len() != data.n_features() + 1 {
        return Err(Error::Dimension {
            expected: data.n_features() + 1,
            got: coefs.len(),
        });
    }
    Ok(())
}

/// `Σ log P(C = c | x; β)` over the set.
pub fn binomial_loglik(data: &LabeledBinarySet, coefs: &[f64]) -> Result<f64> {
    check_dims(data, coefs)?;
    let s = par::chunked_sum(data.len(), 1, |i, acc| {
        let eta = linear(coefs, data.objects[i]).unwrap_or(f64::NAN);
        acc[0] += log_prob(eta, data.outcomes[i]);
    });
    Ok(s[0])
}

/// Gradient of [`binomial_loglik`] with respect to the coefficients.
pub fn loglik_gradient(data: &LabeledBinarySet, coefs: &[f64]) -> Result<Vec<f64>> {
    check_dims(data, coefs)?;
    let p = coefs.len();
    Ok(par::chunked_sum(data.len(), p, |i, acc| {
        let x = data.objects[i];
        let eta = linear(coefs, x).unwrap_or(f64::NAN);
        let r = if data.outcomes[i] { 1.0 } else { 0.0 } - sigmoid(eta);
        acc[0] += r;
        for (a, v) in acc[1..].iter_mut().zip(x) {
            *a += r * v;
        }
    }))
}

/// Mean over the set of `log(P(C=c|x;β) / (1 − P(C=c|x;β)))`.
pub fn mean_cond_logodds(data: &LabeledBinarySet, coefs: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("mean_cond_logodds on an empty set".into()));
    }
    check_dims(data, coefs)?;
    let s = par::chunked_sum(data.len(), 1, |i, acc| {
        let eta = linear(coefs, data.objects[i]).unwrap_or(f64::NAN);
        acc[0] += if data.outcomes[i] { eta } else { -eta };
    });
    Ok(s[0] / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitOptions {
    /// Penalty `ridge · ‖β_non-intercept‖² / 2`.
    pub ridge: f64,
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the penalized gradient.
    pub tol: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// Binary logistic regression; coefficient 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitModel {
    coefficients: Vec<f64>,
    ridge: f64,
    converged: bool,
    iterations: usize,
}

impl LogitModel {
    pub fn new(coefficients: Vec<f64>, ridge: f64) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "logit coefficients must be non-empty and finite".into(),
            ));
        }
        if ridge.is_nan() || ridge < 0.0 {
            return Err(Error::InvalidArgument("ridge must be non-negative".into()));
        }
        Ok(Self {
            coefficients,
            ridge,
            converged: true,
            iterations: 0,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        linear(&self.coefficients, x)
    }

    /// Logistic probability of outcome 1, clamped to `[1e−12, 1 − 1e−12]`.
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64> {
        let p = sigmoid(self.linear_predictor(x)?);
        Ok(p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write_coefs(
            &mut s,
            &format!("logit {} {}", self.n_features(), self.ridge),
            &self.coefficients,
        );
        s
    }

    pub fn read_text<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Self> {
        let h = parse_header(next_line(lines, "logit header")?, "logit", 2)?;
        let m = parse_usize(h[0])?;
        let ridge: f64 = h[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad ridge '{}'", h[1])))?;
        Self::new(read_coefs(lines, m + 1)?, ridge)
    }
}

pub fn fit_logit(data: &LabeledBinarySet, ridge: f64) -> Result<LogitModel> {
    fit_logit_with(
        data,
        &LogitOptions {
            ridge,
            ..Default::default()
        },
    )
}

/// Newton iterations with step halving on the ridge-penalized binomial
/// log-likelihood. When the iteration cap is hit the best iterate is
/// returned with `converged() == false`.
///
/// If every outcome is identical the maximum is at infinity: with
/// `ridge == 0` this is a [`Error::Separation`]; with `ridge > 0` the slopes
/// are zero and the intercept saturates at the probability clamp.
pub fn fit_logit_with(data: &LabeledBinarySet, opts: &LogitOptions) -> Result<LogitModel> {
    if data.is_empty() {
        return Err(Error::EmptyInput("fit_logit on an empty set".into()));
    }
    if opts.ridge.is_nan() || opts.ridge < 0.0 {
        return Err(Error::InvalidArgument("ridge must be non-negative".into()));
    }
    let n = data.len();
    let p = data.n_features() + 1;
    let ones = data.outcomes.iter().filter(|&&c| c).count();
    if ones == 0 || ones == n {
        if opts.ridge == 0.0 {
            return Err(Error::Separation);
        }
        let sat = ((1.0 - PROB_CLAMP) / PROB_CLAMP).ln();
        let mut coefs = vec![0.0; p];
        coefs[0] = if ones == n { sat } else { -sat };
        return LogitModel::new(coefs, opts.ridge);
    }

    let objective = |beta: &[f64]| -> f64 {
        let ll = par::chunked_sum(n, 1, |i, acc| {
            let eta = linear(beta, data.objects[i]).unwrap_or(f64::NAN);
            acc[0] += log_prob(eta, data.outcomes[i]);
        })[0];
        ll - 0.5 * opts.ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
    };

    let mut beta = vec![0.0; p];
    let mut f = objective(&beta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..=opts.max_iter {
        // Hessian (upper, packed) followed by the gradient.
        let acc = par::chunked_sum(n, p * p + p, |i, acc| {
            let x = data.objects[i];
            let eta = linear(&beta, x).unwrap_or(f64::NAN);
            let mu = sigmoid(eta);
            add_outer(&mut acc[..p * p], x, mu * (1.0 - mu));
            let r = if data.outcomes[i] { 1.0 } else { 0.0 } - mu;
            acc[p * p] += r;
            for (a, v) in acc[p * p + 1..].iter_mut().zip(x) {
                *a += r * v;
            }
        });
        let (hess, grad) = acc.split_at(p * p);
        let mut hess = hess.to_vec();
        let mut grad = grad.to_vec();
        for j in 1..p {
            grad[j] -= opts.ridge * beta[j];
            hess[j * p + j] += opts.ridge;
        }
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        iterations = it;
        if gmax < opts.tol {
            converged = true;
            break;
        }
        if it == opts.max_iter {
            break;
        }
        let step = solve_spd(&hess, &grad).or_else(|| {
            let jitter = 1e-10 * (0..p).map(|i| hess[i * p + i]).fold(1.0, f64::max);
            let mut h = hess.clone();
            for i in 0..p {
                h[i * p + i] += jitter;
            }
            solve_spd(&h, &grad)
        });
        let Some(step) = step else { break };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let ft = objective(&trial);
            if ft >= f {
                beta = trial;
                f = ft;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            // No ascent along the Newton direction: at the optimum up to
            // round-off.
            converged = gmax < opts.tol.sqrt();
            break;
        }
    }
    Ok(LogitModel {
        coefficients: beta,
        ridge: opts.ridge,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set<'a>(objects: &'a [Vec<f64>], c: &[u8]) -> LabeledBinarySet<'a> {
        LabeledBinarySet::new(
            objects.iter().map(Vec::as_slice).collect(),
            c.iter().map(|&v| v == 1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn intercept_only_mle_is_log_odds() {
        let objs = vec![vec![]; 4];
        let m = fit_logit(&set(&objs, &[1, 1, 1, 0]), 0.0).unwrap();
        assert!(m.converged());
        assert!((m.coefficients()[0] - 3f64.ln()).abs() < 1e-9);
        assert!((m.predict_prob(&[]).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn balanced_uninformative_feature_gives_zero() {
        let objs: Vec<Vec<f64>> = [-1.0, 1.0, -1.0, 1.0].iter().map(|&v| vec![v]).collect();
        let m = fit_logit(&set(&objs, &[1, 1, 0, 0]), 0.0).unwrap();
        assert!(m.coefficients().iter().all(|b| b.abs() < 1e-6));
    }

    #[test]
    fn separable_with_ridge_matches_grid_search() {
        let objs: Vec<Vec<f64>> = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0].iter().map(|&v| vec![v]).collect();
        let c = [0, 0, 0, 1, 1, 1];
        let data = set(&objs, &c);
        let ridge = 1e-4;
        let m = fit_logit(&data, ridge).unwrap();
        assert!(m.coefficients().iter().all(|b| b.is_finite()));
        // Oracle: coarse-to-fine grid search of the penalized likelihood.
        let pen = |b0: f64, b1: f64| binomial_loglik(&data, &[b0, b1]).unwrap() - 0.5 * ridge * b1 * b1;
        let (mut c0, mut c1, mut w0, mut w1) = (0.0, 20.0, 10.0, 40.0);
        for _ in 0..30 {
            let mut best = (f64::NEG_INFINITY, c0, c1);
            for i in 0..=40 {
                for j in 0..=40 {
                    let b0 = c0 - w0 + 2.0 * w0 * i as f64 / 40.0;
                    let b1 = c1 - w1 + 2.0 * w1 * j as f64 / 40.0;
                    let v = pen(b0, b1);
                    if v > best.0 {
                        best = (v, b0, b1);
                    }
                }
            }
            c0 = best.1;
            c1 = best.2;
            w0 *= 0.3;
            w1 *= 0.3;
        }
        let oracle = LogitModel::new(vec![c0, c1], ridge).unwrap();
        for x in &objs {
            let d = m.predict_prob(x).unwrap() - oracle.predict_prob(x).unwrap();
            assert!(d.abs() < 1e-3, "{d}");
        }
    }

    #[test]
    fn constant_outcomes() {
        let objs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let data = set(&objs, &[1, 1, 1, 1, 1]);
        assert!(matches!(fit_logit(&data, 0.0), Err(Error::Separation)));
        let m = fit_logit(&data, 1e-6).unwrap();
        assert!((m.predict_prob(&[3.0]).unwrap() - (1.0 - PROB_CLAMP)).abs() < 1e-15);
    }

    #[test]
    fn prediction_clamp_and_zero() {
        assert_eq!(
            LogitModel::new(vec![0.0, 0.0], 0.0)
                .unwrap()
                .predict_prob(&[5.0])
                .unwrap(),
            0.5
        );
        let m = LogitModel::new(vec![40.0], 0.0).unwrap();
        assert_eq!(m.predict_prob(&[]).unwrap(), 1.0 - 1e-12);
        assert!(LogitModel::new(vec![0.0, 1.0], 0.0).unwrap().predict_prob(&[]).is_err());
    }

    #[test]
    fn loglik_and_logodds_definitions() {
        let objs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.3, 1.0 - i as f64]).collect();
        let data = set(&objs, &[1, 0, 1, 1, 0, 0]);
        assert!((binomial_loglik(&data, &[0.0; 3]).unwrap() - 6.0 * 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(mean_cond_logodds(&data, &[0.0; 3]).unwrap(), 0.0);

        let one = vec![vec![]];
        let d1 = set(&one, &[1]);
        let b = [3f64.ln()];
        assert!((binomial_loglik(&d1, &b).unwrap() - 0.75f64.ln()).abs() < 1e-12);
        assert!((mean_cond_logodds(&d1, &b).unwrap() - 3f64.ln()).abs() < 1e-12);

        // Term-by-term oracle.
        let beta = [0.3, -0.7, 0.2];
        let direct: f64 = objs
            .iter()
            .zip(data.outcomes())
            .map(|(x, &c)| {
                let eta = beta[0] + beta[1] * x[0] + beta[2] * x[1];
                let p = 1.0 / (1.0 + (-eta).exp());
                if c {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum();
        assert!((binomial_loglik(&data, &beta).unwrap() - direct).abs() < 1e-12);

        let flipped = data
            .with_outcomes(data.outcomes().iter().map(|c| !c).collect())
            .unwrap();
        let a = mean_cond_logodds(&data, &beta).unwrap();
        assert!((mean_cond_logodds(&flipped, &beta).unwrap() + a).abs() < 1e-15);
    }

    #[test]
    fn empty_inputs() {
        let data = LabeledBinarySet::new(vec![], vec![]).unwrap();
        assert!(matches!(fit_logit(&data, 1.0), Err(Error::EmptyInput(_))));
        assert!(mean_cond_logodds(&data, &[0.0]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = LogitModel::new(vec![0.25, -1.5e-7], 1e-6).unwrap();
        assert_eq!(LogitModel::read_text(&mut m.to_text().lines()).unwrap(), m);
    }
}
