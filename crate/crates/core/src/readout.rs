//! Linear readout `Y ≈ X·W + b` fitted by ridge regression, the estimator
//! contract used by closed-loop prediction, and evaluation metrics.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Anything that can be trained on feature rows and then map new feature
/// rows to target rows.
pub trait Estimator {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()>;
    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    pub lambda: f64,
    pub fit_intercept: bool,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            fit_intercept: true,
        }
    }
}

/// Trained readout: `weights` is `F × D`, `intercept` has length `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    weights: DMatrix<f64>,
    intercept: DVector<f64>,
    lambda: f64,
}

impl ReadoutModel {
    pub fn new(weights: DMatrix<f64>, intercept: DVector<f64>, lambda: f64) -> Result<Self> {
        if weights.ncols() != intercept.len() {
            return Err(Error::Dimension(format!(
                "weights have {} outputs, intercept has {}",
                weights.ncols(),
                intercept.len()
            )));
        }
        Ok(Self {
            weights,
            intercept,
            lambda,
        })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.weights.ncols()
    }

    /// `X·W + 1·bᵀ`.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        let mut y = x * &self.weights;
        for mut row in y.row_iter_mut() {
            row += self.intercept.transpose();
        }
        Ok(y)
    }

    /// Plain-text dump; floats use the shortest exact representation, so
    /// [`ReadoutModel::load`] reproduces the model bit for bit.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "readout-model 1");
        let _ = writeln!(out, "features {}", self.n_features());
        let _ = writeln!(out, "targets {}", self.n_targets());
        let _ = writeln!(out, "lambda {:?}", self.lambda);
        let _ = writeln!(out, "weights");
        for row in self.weights.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        let line: Vec<String> = self.intercept.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "intercept");
        let _ = writeln!(out, "{}", line.join(" "));
        out
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("model dump ends before {what}")))
        };
        if next("header")? != "readout-model 1" {
            return Err(Error::Parse("not a readout model dump".into()));
        }
        let f: usize = keyed(next("features")?, "features")?;
        let d: usize = keyed(next("targets")?, "targets")?;
        let lambda: f64 = keyed(next("lambda")?, "lambda")?;
        if next("weights")? != "weights" {
            return Err(Error::Parse("expected `weights`".into()));
        }
        let mut weights = DMatrix::zeros(f, d);
        for r in 0..f {
            let vals = floats(next("weight row")?)?;
            if vals.len() != d {
                return Err(Error::Parse(format!("weight row {r} has {} values", vals.len())));
            }
            for (c, v) in vals.into_iter().enumerate() {
                weights[(r, c)] = v;
            }
        }
        if next("intercept")? != "intercept" {
            return Err(Error::Parse("expected `intercept`".into()));
        }
        let b = floats(next("intercept values")?)?;
        if b.len() != d {
            return Err(Error::Parse(format!("intercept has {} values", b.len())));
        }
        Self::new(weights, DVector::from_vec(b), lambda)
    }
}

fn keyed<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    line.strip_prefix(key)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("expected `{key} <value>`, got `{line}`")))
}

fn floats(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
        .collect()
}

/// Minimizes `‖Y − XW − 1bᵀ‖²_F + λ‖W‖²_F` with an unpenalized intercept.
///
/// `λ > 0` solves the regularized normal equations on centered data by
/// Cholesky. `λ = 0` returns the minimum-norm least-squares solution via
/// SVD, so rank-deficient inputs are accepted.
pub fn fit_ridge(x: &DMatrix<f64>, y: &DMatrix<f64>, config: RidgeConfig) -> Result<ReadoutModel> {
    let (t, f) = x.shape();
    if t == 0 || f == 0 {
        return Err(Error::Validation("readout needs at least one sample and feature".into()));
    }
    if y.nrows() != t || y.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "{t} feature rows but {} target rows",
            y.nrows()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Validation("readout data contains non-finite values".into()));
    }
    if !config.lambda.is_finite() || config.lambda < 0.0 {
        return Err(Error::Validation(format!("ridge lambda {} must be >= 0", config.lambda)));
    }

    let (xc, yc, x_mean, y_mean) = if config.fit_intercept {
        let x_mean = x.row_mean();
        let y_mean = y.row_mean();
        let mut xc = x.clone();
        let mut yc = y.clone();
        for mut row in xc.row_iter_mut() {
            row -= &x_mean;
        }
        for mut row in yc.row_iter_mut() {
            row -= &y_mean;
        }
        (xc, yc, x_mean, y_mean)
    } else {
        (
            x.clone(),
            y.clone(),
            nalgebra::RowDVector::zeros(f),
            nalgebra::RowDVector::zeros(y.ncols()),
        )
    };

    let weights = if config.lambda > 0.0 {
        let mut gram = xc.transpose() * &xc;
        for i in 0..f {
            gram[(i, i)] += config.lambda;
        }
        let rhs = xc.transpose() * &yc;
        match gram.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => min_norm_solve(&gram, &rhs)?,
        }
    } else {
        min_norm_solve(&xc, &yc)?
    };

    let intercept = (y_mean - x_mean * &weights).transpose();
    ReadoutModel::new(weights, intercept, config.lambda)
}

fn min_norm_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    svd.solve(b, eps)
        .map_err(|e| Error::Validation(format!("least-squares solve failed: {e}")))
}

/// Ridge regression behind the [`Estimator`] contract.
#[derive(Debug, Clone, Default)]
pub struct Ridge {
    pub config: RidgeConfig,
    model: Option<ReadoutModel>,
}

impl Ridge {
    pub fn new(config: RidgeConfig) -> Self {
        Self {
            config,
            model: None,
        }
    }

    pub fn model(&self) -> Option<&ReadoutModel> {
        self.model.as_ref()
    }
}

impl Estimator for Ridge {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
        self.model = Some(fit_ridge(x, y, self.config)?);
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Validation("estimator used before fit".into()))?
            .predict(x)
    }
}

impl Estimator for ReadoutModel {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
        *self = fit_ridge(
            x,
            y,
            RidgeConfig {
                lambda: self.lambda,
                fit_intercept: true,
            },
        )?;
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ReadoutModel::predict(self, x)
    }
}

/// Mean over samples of the squared error.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::Dimension(format!(
            "mse of sequences with lengths {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Fraction of positions where the decoded symbols agree.
pub fn accuracy<S: PartialEq>(y: &[S], y_hat: &[S]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::Dimension(format!(
            "accuracy of sequences with lengths {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    let hits = y.iter().zip(y_hat).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn exact_line() {
        let m = fit_ridge(&col(&[0.0, 1.0]), &col(&[0.0, 2.0]), RidgeConfig { lambda: 0.0, fit_intercept: true })
            .unwrap();
        assert!((m.weights()[(0, 0)] - 2.0).abs() < 1e-12);
        assert!(m.intercept()[0].abs() < 1e-12);
        let p = m.predict(&col(&[0.5])).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn huge_lambda_shrinks_to_means() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = DMatrix::from_row_slice(3, 1, &[3.0, 1.0, 5.0]);
        let m = fit_ridge(&x, &y, RidgeConfig { lambda: 1e12, fit_intercept: true }).unwrap();
        assert!(m.weights().norm() < 1e-9);
        assert!((m.intercept()[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn rank_deficient_min_norm() {
        // duplicated column: min-norm splits the weight evenly
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        let y = col(&[0.0, 2.0, 4.0]);
        let m = fit_ridge(&x, &y, RidgeConfig { lambda: 0.0, fit_intercept: true }).unwrap();
        assert!((m.weights()[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((m.weights()[(1, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn no_intercept_option() {
        let m = fit_ridge(&col(&[1.0, 2.0]), &col(&[3.0, 5.0]), RidgeConfig { lambda: 0.0, fit_intercept: false })
            .unwrap();
        assert_eq!(m.intercept()[0], 0.0);
        assert!((m.weights()[(0, 0)] - 13.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = RidgeConfig::default();
        assert!(matches!(
            fit_ridge(&col(&[f64::NAN]), &col(&[1.0]), cfg),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            fit_ridge(&col(&[1.0, 2.0]), &col(&[1.0]), cfg),
            Err(Error::Dimension(_))
        ));
        let m = fit_ridge(&col(&[1.0, 2.0]), &col(&[1.0, 2.0]), cfg).unwrap();
        assert!(matches!(
            m.predict(&DMatrix::zeros(1, 2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn zero_weights_predict_intercept() {
        let m = ReadoutModel::new(DMatrix::zeros(3, 2), DVector::from_vec(vec![0.25, -1.0]), 0.0).unwrap();
        let p = m.predict(&DMatrix::from_element(4, 3, 7.0)).unwrap();
        for r in 0..4 {
            assert_eq!(p[(r, 0)], 0.25);
            assert_eq!(p[(r, 1)], -1.0);
        }
    }

    #[test]
    fn estimator_contract() {
        let mut r = Ridge::new(RidgeConfig { lambda: 0.0, fit_intercept: true });
        assert!(r.predict(&col(&[1.0])).is_err());
        r.fit(&col(&[0.0, 1.0, 2.0]), &col(&[1.0, 3.0, 5.0])).unwrap();
        let p = r.predict(&col(&[0.0, 1.0, 2.0])).unwrap();
        for (a, b) in p.iter().zip([1.0, 3.0, 5.0]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn dump_load_bit_exact() {
        let x = DMatrix::from_fn(6, 3, |r, c| ((r * 7 + c * 3) % 5) as f64 / 3.0 + 0.1 * c as f64);
        let y = DMatrix::from_fn(6, 2, |r, c| (r as f64).sin() + c as f64 / 7.0);
        let m = fit_ridge(&x, &y, RidgeConfig { lambda: 1e-3, fit_intercept: true }).unwrap();
        let back = ReadoutModel::load(&m.dump()).unwrap();
        assert_eq!(back, m);
        assert!(ReadoutModel::load("nonsense").is_err());
    }

    #[test]
    fn metric_examples() {
        assert_eq!(mse(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1], &[0, 1]).unwrap(), 1.0);
        assert_eq!(mse(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap(), 0.75);
        assert!(mse(&[0.0], &[]).is_err());
    }
}
