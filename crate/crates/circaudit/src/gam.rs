//! Penalized-spline GAM engine.
//!
//! Fits Gaussian-identity models by a direct penalized least-squares solve and
//! binomial-logit models by penalized IRLS. Reports deviance, the fraction of
//! deviance explained D^2 = 1 - deviance/null_deviance, and effective degrees
//! of freedom as the trace of the influence matrix
//! A = X (X'WX + sum_k lambda_k S_k)^-1 X'W.
//!
//! Identifiability: every spline block is column-centered over the training
//! rows (sum-to-zero feature shapes) and one basis column is dropped to remove
//! the constant direction that centering plus the penalty null space would
//! otherwise leave free. The intercept is an explicit unpenalized column.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{CircError, Result};
use crate::linalg::Cholesky;
use crate::spline::{place_knots, SplineBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Identity link; deviance is the residual sum of squares (the sigma^2
    /// scaling cancels in D^2).
    Gaussian,
    /// Logit link; standard binomial deviance.
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockKind {
    Spline { knots: usize },
    Linear,
}

#[derive(Debug, Clone)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: BlockKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Smoothing {
    /// One lambda applied to every spline block.
    Fixed(f64),
    /// One lambda per feature (linear entries ignored).
    PerFeature(Vec<f64>),
    /// Generalized cross-validation, coordinate-wise golden-section search.
    Gcv,
}

impl Smoothing {
    /// Stable textual form used in report provenance and CLI flags.
    pub fn label(&self) -> String {
        match self {
            Smoothing::Gcv => "gcv".to_string(),
            Smoothing::Fixed(v) => format!("fixed:{v}"),
            Smoothing::PerFeature(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                format!("per-feature:{}", parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub features: Vec<FeatureSpec>,
    pub family: Family,
    pub smoothing: Smoothing,
}

impl ModelSpec {
    /// Spline blocks for continuous columns, a single linear coefficient for
    /// binary ones.
    pub fn auto(data: &Dataset, features: &[String], family: Family, knots: usize, smoothing: Smoothing) -> Result<ModelSpec> {
        let mut specs = Vec::with_capacity(features.len());
        for name in features {
            let col = data.column(name)?;
            let kind = match col.kind {
                ColumnKind::Binary => BlockKind::Linear,
                ColumnKind::Continuous => BlockKind::Spline { knots },
            };
            specs.push(FeatureSpec { name: name.clone(), kind });
        }
        Ok(ModelSpec { features: specs, family, smoothing })
    }
}

const IRLS_MAX_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-8;
const MU_CLAMP: f64 = 1e-12;
const MIN_WEIGHT: f64 = 1e-10;
const RUG_CAP: usize = 256;

#[derive(Debug, Clone)]
enum TermShape {
    Spline {
        block: SplineBlock,
        col_means: Vec<f64>,
        drop: usize,
    },
    Linear {
        mean: f64,
    },
}

#[derive(Debug, Clone)]
struct TermMeta {
    name: String,
    cols: std::ops::Range<usize>,
    /// Penalty in the design parametrization (dropped row/col for splines).
    penalty: Option<Array2<f64>>,
    shape: TermShape,
    obs_range: (f64, f64),
    rug: Vec<f64>,
    reduced_knots: bool,
}

/// Assembled design for one dataset/target pair. Subset fits reuse the full
/// design columns (and, for Gaussian fits, the cached cross-products), so a
/// powerset search costs one pass over the data.
pub struct Design {
    pub family: Family,
    pub n: usize,
    y: Array1<f64>,
    x: Array2<f64>,
    terms: Vec<TermMeta>,
    null_deviance: f64,
    // Gaussian caches
    xtx: Option<Array2<f64>>,
    xty: Option<Array1<f64>>,
    yty: f64,
}

pub fn build_design(spec: &ModelSpec, data: &Dataset, target: &str) -> Result<Design> {
    let n = data.n_rows();
    if n < 10 {
        return Err(CircError::TooFewRows { need: 10, found: n });
    }
    let y_col = data.column(target)?;
    let y = Array1::from_vec(y_col.values.clone());
    if spec.family == Family::Binomial {
        if let Some(&bad) = y_col.values.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(CircError::NonBinaryTarget(bad));
        }
    }

    // total column count
    let mut q = 1; // intercept
    let mut planned: Vec<(usize, Option<SplineBlock>)> = Vec::new();
    for f in &spec.features {
        let col = data.column(&f.name)?;
        match f.kind {
            BlockKind::Linear => {
                planned.push((1, None));
                q += 1;
            }
            BlockKind::Spline { knots } => {
                let kv = place_knots(&f.name, &col.values, knots)?;
                let block = SplineBlock::new(kv);
                let ncols = block.n_basis - 1; // one column dropped
                planned.push((ncols, Some(block)));
                q += ncols;
            }
        }
    }

    let mut x = Array2::<f64>::zeros((n, q));
    x.column_mut(0).fill(1.0);
    let mut terms = Vec::with_capacity(spec.features.len());
    let mut col0 = 1usize;
    for (f, (ncols, block)) in spec.features.iter().zip(planned) {
        let values = &data.column(&f.name)?.values;
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rug = rug_sample(values);
        match block {
            None => {
                let mean = values.iter().sum::<f64>() / n as f64;
                for (row, &v) in values.iter().enumerate() {
                    x[[row, col0]] = v - mean;
                }
                terms.push(TermMeta {
                    name: f.name.clone(),
                    cols: col0..col0 + 1,
                    penalty: None,
                    shape: TermShape::Linear { mean },
                    obs_range: (lo, hi),
                    rug,
                    reduced_knots: false,
                });
                col0 += 1;
            }
            Some(block) => {
                let nb = block.n_basis;
                let drop = nb / 2;
                // raw basis columns, means, then center and drop
                let mut raw = Array2::<f64>::zeros((n, nb));
                for (row, &v) in values.iter().enumerate() {
                    let (start, vals) = block.eval_sparse(v);
                    for (j, &bv) in vals.iter().enumerate() {
                        raw[[row, start + j]] = bv;
                    }
                }
                let mut col_means = vec![0.0; nb];
                for j in 0..nb {
                    col_means[j] = raw.column(j).sum() / n as f64;
                }
                let mut dst = col0;
                for j in 0..nb {
                    if j == drop {
                        continue;
                    }
                    for row in 0..n {
                        x[[row, dst]] = raw[[row, j]] - col_means[j];
                    }
                    dst += 1;
                }
                // penalty with the dropped row/column removed
                let mut pen = Array2::<f64>::zeros((ncols, ncols));
                let keep: Vec<usize> = (0..nb).filter(|&j| j != drop).collect();
                for (a, &i) in keep.iter().enumerate() {
                    for (b, &j) in keep.iter().enumerate() {
                        pen[[a, b]] = block.penalty[[i, j]];
                    }
                }
                let reduced = block.knots.reduced;
                terms.push(TermMeta {
                    name: f.name.clone(),
                    cols: col0..col0 + ncols,
                    penalty: Some(pen),
                    shape: TermShape::Spline { block, col_means, drop },
                    obs_range: (lo, hi),
                    rug,
                    reduced_knots: reduced,
                });
                col0 += ncols;
            }
        }
    }

    let null_deviance = null_deviance(spec.family, &y);
    let (xtx, xty, yty);
    let y_dot = y.dot(&y);
    if spec.family == Family::Gaussian {
        xtx = Some(x.t().dot(&x));
        xty = Some(x.t().dot(&y));
    } else {
        xtx = None;
        xty = None;
    }
    yty = y_dot;

    Ok(Design {
        family: spec.family,
        n,
        y,
        x,
        terms,
        null_deviance,
        xtx,
        xty,
        yty,
    })
}

fn rug_sample(values: &[f64]) -> Vec<f64> {
    if values.len() <= RUG_CAP {
        return values.to_vec();
    }
    let stride = values.len() / RUG_CAP;
    values.iter().step_by(stride).take(RUG_CAP).cloned().collect()
}

fn null_deviance(family: Family, y: &Array1<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    match family {
        Family::Gaussian => y.iter().map(|v| (v - mean).powi(2)).sum(),
        Family::Binomial => {
            let mu = mean.clamp(MU_CLAMP, 1.0 - MU_CLAMP);
            y.iter()
                .map(|&yv| {
                    if yv == 1.0 {
                        -2.0 * mu.ln()
                    } else {
                        -2.0 * (1.0 - mu).ln()
                    }
                })
                .sum()
        }
    }
}

/// Binomial deviance 2*sum[y log(y/mu) + (1-y) log((1-y)/(1-mu))] with the
/// 0*log 0 = 0 convention; mu clamped away from {0,1}.
pub fn binomial_deviance(y: &[f64], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yv, &m)| {
            let m = m.clamp(MU_CLAMP, 1.0 - MU_CLAMP);
            if yv == 1.0 {
                -2.0 * m.ln()
            } else if yv == 0.0 {
                -2.0 * (1.0 - m).ln()
            } else {
                2.0 * (yv * (yv / m).ln() + (1.0 - yv) * ((1.0 - yv) / (1.0 - m)).ln())
            }
        })
        .sum()
}

pub fn gaussian_deviance(y: &[f64], mu: &[f64]) -> f64 {
    y.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum()
}

#[derive(Debug, Clone)]
pub struct FittedTerm {
    pub name: String,
    /// Coefficients in the design parametrization.
    pub coefs: Vec<f64>,
    pub lambda: f64,
    pub edf: f64,
    shape: TermShape,
    obs_range: (f64, f64),
    rug: Vec<f64>,
    pub reduced_knots: bool,
}

#[derive(Debug, Clone)]
pub struct FittedGam {
    pub family: Family,
    pub intercept: f64,
    pub terms: Vec<FittedTerm>,
    pub deviance: f64,
    pub null_deviance: f64,
    pub d_squared: f64,
    pub edf: f64,
    pub converged: bool,
    pub quasi_separated: bool,
    pub iterations: usize,
    /// Standard deviation of the link-scale fitted values on training data.
    pub link_scale_sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureShape {
    pub feature_name: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub rug: Vec<f64>,
}

impl Design {
    pub fn feature_names(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn null_deviance(&self) -> f64 {
        self.null_deviance
    }

    fn subset_indices(&self, features: &[&str]) -> Result<Vec<usize>> {
        features
            .iter()
            .map(|f| {
                self.terms
                    .iter()
                    .position(|t| t.name == *f)
                    .ok_or_else(|| CircError::UnknownFeature(f.to_string()))
            })
            .collect()
    }

    /// Columns of the design belonging to the intercept plus the given terms.
    fn subset_cols(&self, term_idx: &[usize]) -> Vec<usize> {
        let mut cols = vec![0usize];
        for &t in term_idx {
            cols.extend(self.terms[t].cols.clone());
        }
        cols
    }

    /// Fits the model on a subset of features (all features via `fit`).
    pub fn fit_subset(&self, features: &[&str], smoothing: &Smoothing) -> Result<FittedGam> {
        let term_idx = self.subset_indices(features)?;
        if self.null_deviance <= 0.0 {
            return Err(CircError::ZeroTargetVariance("target".into()));
        }
        let lambdas = self.resolve_lambdas(&term_idx, smoothing)?;
        self.fit_with_lambdas(&term_idx, &lambdas)
    }

    pub fn fit(&self, smoothing: &Smoothing) -> Result<FittedGam> {
        let names: Vec<&str> = self.feature_names().to_vec();
        self.fit_subset(&names, smoothing)
    }

    fn resolve_lambdas(&self, term_idx: &[usize], smoothing: &Smoothing) -> Result<Vec<f64>> {
        match smoothing {
            Smoothing::Fixed(l) => Ok(vec![*l; term_idx.len()]),
            Smoothing::PerFeature(ls) => {
                if ls.len() != term_idx.len() {
                    return Err(CircError::InvalidArgument(format!(
                        "{} lambdas for {} features",
                        ls.len(),
                        term_idx.len()
                    )));
                }
                Ok(ls.clone())
            }
            Smoothing::Gcv => self.select_lambdas(term_idx),
        }
    }

    /// GCV(lambda) = N * deviance / (N - edf)^2, minimized by golden-section
    /// search on log10 lambda in [-8, 8], coordinate-wise over the spline
    /// features in spec order, two sweeps. For binomial fits the score is
    /// evaluated on the weighted working problem of a pilot IRLS fit.
    pub fn select_lambdas(&self, term_idx: &[usize]) -> Result<Vec<f64>> {
        let mut lambdas = vec![1.0; term_idx.len()];
        let spline_positions: Vec<usize> = term_idx
            .iter()
            .enumerate()
            .filter(|(_, &t)| self.terms[*&t].penalty.is_some())
            .map(|(i, _)| i)
            .collect();
        if spline_positions.is_empty() {
            return Ok(vec![0.0; term_idx.len()]);
        }
        let prob = self.working_problem(term_idx, &lambdas)?;
        for _sweep in 0..2 {
            for &pos in &spline_positions {
                let objective = |log_l: f64| {
                    let mut trial = lambdas.clone();
                    trial[pos] = 10f64.powf(log_l);
                    match self.penalized_solve(&prob, term_idx, &trial) {
                        Ok(sol) => {
                            let denom = prob.n as f64 - sol.edf;
                            if denom <= 0.0 || !sol.deviance.is_finite() {
                                f64::INFINITY
                            } else {
                                prob.n as f64 * sol.deviance / (denom * denom)
                            }
                        }
                        Err(_) => f64::INFINITY,
                    }
                };
                let best = golden_section(objective, -8.0, 8.0, 32);
                lambdas[pos] = 10f64.powf(best);
            }
        }
        // linear terms report lambda 0
        for (i, &t) in term_idx.iter().enumerate() {
            if self.terms[t].penalty.is_none() {
                lambdas[i] = 0.0;
            }
        }
        Ok(lambdas)
    }

    /// Weighted-least-squares view of the fit: exact for Gaussian, the
    /// converged working problem of a pilot IRLS fit for binomial.
    fn working_problem(&self, term_idx: &[usize], lambdas: &[f64]) -> Result<WorkingProblem> {
        match self.family {
            Family::Gaussian => {
                let cols = self.subset_cols(term_idx);
                Ok(WorkingProblem {
                    xtwx: submatrix(self.xtx.as_ref().unwrap(), &cols),
                    xtwz: subvector(self.xty.as_ref().unwrap(), &cols),
                    ztwz: self.yty,
                    n: self.n,
                })
            }
            Family::Binomial => {
                let cols = self.subset_cols(term_idx);
                let xs = self.copy_cols(&cols);
                let pilot = self.irls(&xs, term_idx, lambdas)?;
                Ok(pilot.problem)
            }
        }
    }

    fn copy_cols(&self, cols: &[usize]) -> Array2<f64> {
        let mut xs = Array2::<f64>::zeros((self.n, cols.len()));
        for (j, &c) in cols.iter().enumerate() {
            xs.column_mut(j).assign(&self.x.column(c));
        }
        xs
    }

    /// Block-diagonal penalty for a subset, in subset column numbering.
    fn subset_penalty(&self, term_idx: &[usize], lambdas: &[f64], q: usize) -> Array2<f64> {
        let mut s = Array2::<f64>::zeros((q, q));
        let mut off = 1usize;
        for (i, &t) in term_idx.iter().enumerate() {
            let w = self.terms[t].cols.len();
            if let Some(pen) = &self.terms[t].penalty {
                let l = lambdas[i];
                if l != 0.0 {
                    let mut blockv = s.slice_mut(s![off..off + w, off..off + w]);
                    blockv.scaled_add(l, pen);
                }
            }
            off += w;
        }
        s
    }

    fn penalized_solve(
        &self,
        prob: &WorkingProblem,
        term_idx: &[usize],
        lambdas: &[f64],
    ) -> Result<Solution> {
        let q = prob.xtwx.nrows();
        let mut a = prob.xtwx.clone();
        let s = self.subset_penalty(term_idx, lambdas, q);
        a += &s;
        let chol = Cholesky::new(&a)?;
        let beta = chol.solve(&prob.xtwz);
        let edf_diag = chol.diag_solve(&prob.xtwx);
        let edf = edf_diag.sum();
        // working deviance ||z - Xb||_W^2 expanded through the caches
        let deviance =
            (prob.ztwz - 2.0 * beta.dot(&prob.xtwz) + beta.dot(&prob.xtwx.dot(&beta))).max(0.0);
        Ok(Solution {
            beta,
            edf,
            edf_diag,
            deviance,
        })
    }

    fn fit_with_lambdas(&self, term_idx: &[usize], lambdas: &[f64]) -> Result<FittedGam> {
        match self.family {
            Family::Gaussian => {
                let cols = self.subset_cols(term_idx);
                let prob = WorkingProblem {
                    xtwx: submatrix(self.xtx.as_ref().unwrap(), &cols),
                    xtwz: subvector(self.xty.as_ref().unwrap(), &cols),
                    ztwz: self.yty,
                    n: self.n,
                };
                let sol = self.penalized_solve(&prob, term_idx, lambdas)?;
                Ok(self.assemble(term_idx, lambdas, &sol, sol.deviance, true, false, 1))
            }
            Family::Binomial => {
                let cols = self.subset_cols(term_idx);
                let xs = self.copy_cols(&cols);
                let out = self.irls(&xs, term_idx, lambdas)?;
                let sol = self.penalized_solve(&out.problem, term_idx, lambdas)?;
                // coefficients from the converged working problem equal the
                // IRLS iterate; deviance/EDF evaluated at that point
                Ok(self.assemble(
                    term_idx,
                    lambdas,
                    &Solution {
                        beta: out.beta,
                        edf: sol.edf,
                        edf_diag: sol.edf_diag,
                        deviance: out.deviance,
                    },
                    out.deviance,
                    out.converged,
                    out.quasi_separated,
                    out.iterations,
                ))
            }
        }
    }

    fn irls(&self, xs: &Array2<f64>, term_idx: &[usize], lambdas: &[f64]) -> Result<IrlsOutcome> {
        let n = self.n;
        let q = xs.ncols();
        let y = &self.y;
        let mut mu: Array1<f64> = y.mapv(|v| (v + 0.5) / 2.0);
        let mut eta: Array1<f64> = mu.mapv(|m| (m / (1.0 - m)).ln());
        let mut beta = Array1::<f64>::zeros(q);
        let mut dev_prev = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;
        let mut last_problem = None;
        for iter in 1..=IRLS_MAX_ITER {
            iterations = iter;
            // working weights and response
            let mut w = Array1::<f64>::zeros(n);
            let mut z = Array1::<f64>::zeros(n);
            for i in 0..n {
                let m = mu[i].clamp(MU_CLAMP, 1.0 - MU_CLAMP);
                let wi = (m * (1.0 - m)).max(MIN_WEIGHT);
                w[i] = wi;
                z[i] = eta[i] + (y[i] - m) / wi;
            }
            let mut xw = xs.clone();
            for i in 0..n {
                let sw = w[i].sqrt();
                for j in 0..q {
                    xw[[i, j]] *= sw;
                }
            }
            let xtwx = xw.t().dot(&xw);
            let wz: Array1<f64> = (0..n).map(|i| w[i] * z[i]).collect();
            let xtwz = xs.t().dot(&wz);
            let ztwz = (0..n).map(|i| w[i] * z[i] * z[i]).sum();
            let s = self.subset_penalty(term_idx, lambdas, q);
            let mut a = xtwx.clone();
            a += &s;
            let chol = Cholesky::new(&a)?;
            beta = chol.solve(&xtwz);
            eta = xs.dot(&beta).mapv(|e| e.clamp(-36.0, 36.0));
            mu = eta.mapv(|e| 1.0 / (1.0 + (-e).exp()));
            let dev = binomial_deviance(y.as_slice().unwrap(), mu.as_slice().unwrap());
            last_problem = Some(WorkingProblem {
                xtwx,
                xtwz,
                ztwz,
                n,
            });
            if (dev_prev - dev).abs() / (dev.abs() + 0.1) < IRLS_TOL {
                converged = true;
                dev_prev = dev;
                break;
            }
            dev_prev = dev;
        }
        let quasi_separated = eta.iter().any(|e| e.abs() >= 20.0);
        Ok(IrlsOutcome {
            beta,
            deviance: dev_prev,
            converged,
            quasi_separated,
            iterations,
            problem: last_problem.unwrap(),
        })
    }

    fn assemble(
        &self,
        term_idx: &[usize],
        lambdas: &[f64],
        sol: &Solution,
        deviance: f64,
        converged: bool,
        quasi_separated: bool,
        iterations: usize,
    ) -> FittedGam {
        let mut terms = Vec::with_capacity(term_idx.len());
        let mut off = 1usize;
        for (i, &t) in term_idx.iter().enumerate() {
            let meta = &self.terms[t];
            let w = meta.cols.len();
            let coefs: Vec<f64> = (off..off + w).map(|j| sol.beta[j]).collect();
            let edf: f64 = (off..off + w).map(|j| sol.edf_diag[j]).sum();
            terms.push(FittedTerm {
                name: meta.name.clone(),
                coefs,
                lambda: lambdas[i],
                edf,
                shape: meta.shape.clone(),
                obs_range: meta.obs_range,
                rug: meta.rug.clone(),
                reduced_knots: meta.reduced_knots,
            });
            off += w;
        }
        // link-scale fitted values for the nullification scale
        let cols = self.subset_cols(term_idx);
        let mut eta = Array1::<f64>::from_elem(self.n, sol.beta[0]);
        for (j, &c) in cols.iter().enumerate().skip(1) {
            let b = sol.beta[j];
            if b != 0.0 {
                for i in 0..self.n {
                    eta[i] += b * self.x[[i, c]];
                }
            }
        }
        let mean_eta = eta.sum() / self.n as f64;
        let var_eta = eta.iter().map(|e| (e - mean_eta).powi(2)).sum::<f64>() / self.n as f64;
        let d_squared = (1.0 - deviance / self.null_deviance).clamp(0.0, 1.0);
        FittedGam {
            family: self.family,
            intercept: sol.beta[0],
            terms,
            deviance,
            null_deviance: self.null_deviance,
            d_squared,
            edf: sol.edf,
            converged,
            quasi_separated,
            iterations,
            link_scale_sd: var_eta.sqrt(),
        }
    }
}

struct WorkingProblem {
    xtwx: Array2<f64>,
    xtwz: Array1<f64>,
    ztwz: f64,
    n: usize,
}

struct Solution {
    beta: Array1<f64>,
    edf: f64,
    edf_diag: Array1<f64>,
    deviance: f64,
}

struct IrlsOutcome {
    beta: Array1<f64>,
    deviance: f64,
    converged: bool,
    quasi_separated: bool,
    iterations: usize,
    problem: WorkingProblem,
}

fn submatrix(a: &Array2<f64>, cols: &[usize]) -> Array2<f64> {
    let q = cols.len();
    let mut out = Array2::<f64>::zeros((q, q));
    for (i, &ci) in cols.iter().enumerate() {
        for (j, &cj) in cols.iter().enumerate() {
            out[[i, j]] = a[[ci, cj]];
        }
    }
    out
}

fn subvector(a: &Array1<f64>, cols: &[usize]) -> Array1<f64> {
    cols.iter().map(|&c| a[c]).collect()
}

/// Golden-section minimization on [a, b]; non-finite values act as +inf.
fn golden_section<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, iters: usize) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let safe = |v: f64| if v.is_finite() { v } else { f64::INFINITY };
    let mut fc = safe(f(c));
    let mut fd = safe(f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = safe(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = safe(f(d));
        }
    }
    (a + b) / 2.0
}

/// Convenience entry point: assemble the design and fit all spec features.
pub fn fit(spec: &ModelSpec, data: &Dataset, target: &str) -> Result<FittedGam> {
    let design = build_design(spec, data, target)?;
    design.fit(&spec.smoothing)
}

impl FittedGam {
    fn term(&self, feature: &str) -> Result<&FittedTerm> {
        self.terms
            .iter()
            .find(|t| t.name == feature)
            .ok_or_else(|| CircError::UnknownFeature(feature.to_string()))
    }

    /// Centered contribution f_k(x) of one feature at a point.
    pub fn shape_at(&self, feature: &str, x: f64) -> Result<f64> {
        let term = self.term(feature)?;
        Ok(eval_term(term, x))
    }

    pub fn feature_shape(&self, feature: &str, grid_size: usize) -> Result<FeatureShape> {
        let term = self.term(feature)?;
        let (lo, hi) = term.obs_range;
        let m = grid_size.max(2);
        let grid: Vec<f64> = (0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .collect();
        let values = grid.iter().map(|&x| eval_term(term, x)).collect();
        Ok(FeatureShape {
            feature_name: feature.to_string(),
            grid,
            values,
            rug: term.rug.clone(),
        })
    }

    /// Link-scale prediction sum f_k(x_k) + intercept for new rows.
    pub fn predict_link(&self, data: &Dataset) -> Result<Vec<f64>> {
        let n = data.n_rows();
        let mut eta = vec![self.intercept; n];
        for term in &self.terms {
            let col = data.column(&term.name)?;
            for (i, &v) in col.values.iter().enumerate() {
                eta[i] += eval_term(term, v);
            }
        }
        Ok(eta)
    }

    pub fn predict_mean(&self, data: &Dataset) -> Result<Vec<f64>> {
        let eta = self.predict_link(data)?;
        Ok(match self.family {
            Family::Gaussian => eta,
            Family::Binomial => eta.iter().map(|e| 1.0 / (1.0 + (-e).exp())).collect(),
        })
    }

    /// Deviance of this model's predictions against a (possibly new) dataset.
    pub fn deviance_on(&self, data: &Dataset, target: &str) -> Result<f64> {
        let mu = self.predict_mean(data)?;
        let y = &data.column(target)?.values;
        Ok(match self.family {
            Family::Gaussian => gaussian_deviance(y, &mu),
            Family::Binomial => binomial_deviance(y, &mu),
        })
    }
}

fn eval_term(term: &FittedTerm, x: f64) -> f64 {
    match &term.shape {
        TermShape::Linear { mean } => term.coefs[0] * (x - mean),
        TermShape::Spline {
            block,
            col_means,
            drop,
        } => {
            let basis = block.eval_basis(x);
            let mut v = 0.0;
            let mut ci = 0usize;
            for (j, &b) in basis.iter().enumerate() {
                if j == *drop {
                    continue;
                }
                v += term.coefs[ci] * (b - col_means[j]);
                ci += 1;
            }
            v
        }
    }
}
