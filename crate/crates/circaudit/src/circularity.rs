//! Circularity test: exhaustive subset search ranked by deviance explained
//! with an EDF tie-break, followed by a nullification check of the features
//! outside the selected set.
//!
//! A feature set is reported *circular* when a model on it alone replicates
//! the target (D^2 >= delta_close) and every remaining feature's shape in the
//! full model collapses to the zero line (sup-norm <= eps_null * the standard
//! deviation of the selected model's link-scale fitted values).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CircError, Result};
use crate::gam::{build_design, Design, Family, FittedGam, ModelSpec, Smoothing};

pub const REPORT_VERSION: &str = "1.0";
const SHAPE_GRID: usize = 512;
const TIE_TOL: f64 = 1e-4;
const EDF_TIE_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub family: Family,
    pub smoothing: Smoothing,
    pub knots: usize,
    /// Minimum D^2 for a set to count as replicating the target.
    pub delta_close: f64,
    /// Relative sup-norm below which a shape counts as nullified.
    pub eps_null: f64,
    /// Keep only the top-m features by |Pearson r| before enumeration.
    pub preselect: Option<usize>,
    /// Restrict candidate subsets to these features (the full model and the
    /// nullification check still use every feature). None = all features.
    pub candidate_features: Option<Vec<String>>,
    /// Exhaustive-search cap; more features than this is an error.
    pub cap: usize,
    /// Ranked models retained in the report.
    pub top_k: usize,
    /// Recorded for provenance; the test itself is deterministic.
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> AuditConfig {
        AuditConfig {
            family: Family::Gaussian,
            smoothing: Smoothing::Gcv,
            knots: 30,
            delta_close: 0.99,
            eps_null: 0.05,
            preselect: None,
            candidate_features: None,
            cap: 16,
            top_k: 10,
            seed: 0,
        }
    }
}

/// The serializable half of [`AuditConfig`], embedded in every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub family: Family,
    pub lambda: String,
    pub knots: usize,
    pub delta_close: f64,
    pub eps_null: f64,
    pub preselect: Option<usize>,
    pub candidate_features: Option<Vec<String>>,
    pub cap: usize,
    pub top_k: usize,
}

impl AuditConfig {
    fn report_config(&self) -> ReportConfig {
        ReportConfig {
            family: self.family,
            lambda: self.smoothing.label(),
            knots: self.knots,
            delta_close: self.delta_close,
            eps_null: self.eps_null,
            preselect: self.preselect,
            candidate_features: self.candidate_features.clone(),
            cap: self.cap,
            top_k: self.top_k,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta_close > 0.0 && self.delta_close <= 1.0) {
            return Err(CircError::InvalidArgument(
                "delta_close must lie in (0, 1]".into(),
            ));
        }
        if self.eps_null <= 0.0 {
            return Err(CircError::InvalidArgument("eps_null must be > 0".into()));
        }
        if self.knots < 4 {
            return Err(CircError::InvalidArgument("knots must be >= 4".into()));
        }
        Ok(())
    }
}

/// One candidate feature subset with its fit summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Feature names in dataset column order.
    pub features: Vec<String>,
    pub d_squared: f64,
    pub edf: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullificationVerdict {
    pub feature: String,
    /// max |f_k| over a 512-point grid of the full model's shape.
    pub sup_norm: f64,
    /// Standard deviation of the selected model's link-scale fitted values.
    pub scale: f64,
    pub nullified: bool,
    /// False when the full model did not converge.
    pub reliable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Circular,
    PartiallyCircular,
    NotCircular,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Circular => "circular",
            Outcome::PartiallyCircular => "partially-circular",
            Outcome::NotCircular => "not-circular",
            Outcome::Inconclusive => "inconclusive",
        }
    }

    /// Process exit code contract: scripts gate on these.
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::NotCircular => 0,
            Outcome::Circular => 10,
            Outcome::PartiallyCircular => 11,
            Outcome::Inconclusive => 1,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircularityReport {
    pub version: String,
    pub config: ReportConfig,
    pub target: String,
    pub n_rows: usize,
    pub dataset_fingerprint: String,
    pub seed: u64,
    pub candidates_evaluated: usize,
    /// Top-k subsets by D^2 (ties by size, then name order).
    pub ranked_models: Vec<CandidateSet>,
    /// c*: minimal-EDF member of the D^2 tie class at the top.
    pub selected: CandidateSet,
    /// One verdict per feature outside c*.
    pub verdicts: Vec<NullificationVerdict>,
    pub outcome: Outcome,
}

/// Report plus the fitted models the report was derived from, for rendering.
pub struct AuditResult {
    pub report: CircularityReport,
    /// Model over all candidate features.
    pub full_fit: FittedGam,
    /// Model over c* only.
    pub selected_fit: FittedGam,
    /// Model over the features outside c*; `None` when c* is everything.
    pub complement_fit: Option<FittedGam>,
}

/// All non-empty subsets of `features`, in bitmask order (bit i = feature i).
pub fn enumerate_candidates(features: &[String], cap: usize) -> Result<Vec<Vec<String>>> {
    if features.is_empty() {
        return Err(CircError::EmptyInput("candidate feature list"));
    }
    if features.len() > cap {
        return Err(CircError::TooManyCandidates(features.len(), cap));
    }
    let p = features.len();
    let mut out = Vec::with_capacity((1usize << p) - 1);
    for mask in 1usize..(1 << p) {
        let subset: Vec<String> = (0..p)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| features[i].clone())
            .collect();
        out.push(subset);
    }
    Ok(out)
}

/// Top-m features by |Pearson correlation| with the target; ties keep column
/// order. Zero-variance columns correlate as 0.
pub fn preselect_by_correlation(data: &Dataset, target: &str, m: usize) -> Result<Vec<String>> {
    let names = data.feature_names(target);
    if !data.has_column(target) {
        return Err(CircError::UnknownColumn(target.to_string()));
    }
    if m > names.len() {
        return Err(CircError::InvalidArgument(format!(
            "preselect m = {m} exceeds the {} available features",
            names.len()
        )));
    }
    let y = &data.column(target)?.values;
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(names.len());
    for (idx, name) in names.iter().enumerate() {
        let x = &data.column(name)?.values;
        scored.push((idx, pearson(x, y).abs()));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(scored[..m].iter().map(|&(i, _)| names[i].clone()).collect())
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Fits every candidate subset, ranks by D^2 descending (ties by subset size,
/// then name order), and returns (ranked list, index of c* in it). c* is the
/// minimal-EDF subset among those within `TIE_TOL` of the best D^2.
pub fn search(
    design: &Design,
    candidates: &[Vec<String>],
    smoothing: &Smoothing,
) -> Result<(Vec<CandidateSet>, usize)> {
    if candidates.is_empty() {
        return Err(CircError::EmptyInput("candidate subsets"));
    }
    let fits: Vec<Result<CandidateSet>> = candidates
        .par_iter()
        .map(|subset| {
            let refs: Vec<&str> = subset.iter().map(String::as_str).collect();
            let fit = design.fit_subset(&refs, smoothing)?;
            Ok(CandidateSet {
                features: subset.clone(),
                d_squared: fit.d_squared,
                edf: fit.edf,
                converged: fit.converged,
            })
        })
        .collect();
    let mut ranked = Vec::with_capacity(fits.len());
    for f in fits {
        ranked.push(f?);
    }
    ranked.sort_by(|a, b| {
        b.d_squared
            .partial_cmp(&a.d_squared)
            .unwrap()
            .then(a.features.len().cmp(&b.features.len()))
            .then(a.features.cmp(&b.features))
    });
    let best_d2 = ranked[0].d_squared;
    let tie_end = ranked
        .iter()
        .position(|c| best_d2 - c.d_squared > TIE_TOL)
        .unwrap_or(ranked.len());
    let min_edf = ranked[..tie_end]
        .iter()
        .map(|c| c.edf)
        .fold(f64::INFINITY, f64::min);
    // smallest EDF wins; EDF gaps below the tolerance (GCV jitter between
    // models that express the same fit) resolve to the smaller and then
    // lexicographically earlier subset
    let sel = (0..tie_end)
        .filter(|&i| ranked[i].edf <= min_edf + EDF_TIE_TOL)
        .min_by(|&i, &j| {
            let (a, b) = (&ranked[i], &ranked[j]);
            a.features
                .len()
                .cmp(&b.features.len())
                .then(a.features.cmp(&b.features))
        })
        .unwrap();
    Ok((ranked, sel))
}

/// Verdicts for every feature of `full` outside `selected_features`, measured
/// in the full model against the selected model's link-scale spread.
pub fn nullification_check(
    full: &FittedGam,
    selected_features: &[String],
    scale: f64,
    eps_null: f64,
) -> Result<Vec<NullificationVerdict>> {
    let mut verdicts = Vec::new();
    for term in &full.terms {
        if selected_features.iter().any(|f| f == &term.name) {
            continue;
        }
        let shape = full.feature_shape(&term.name, SHAPE_GRID)?;
        let sup = shape.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        verdicts.push(NullificationVerdict {
            feature: term.name.clone(),
            sup_norm: sup,
            scale,
            nullified: sup <= eps_null * scale,
            reliable: full.converged,
        });
    }
    Ok(verdicts)
}

/// The two-step circularity test, returning the report together with the
/// fitted models it is based on.
pub fn run_audit(data: &Dataset, target: &str, config: &AuditConfig) -> Result<AuditResult> {
    config.validate()?;
    let mut features = data.feature_names(target);
    if !data.has_column(target) {
        return Err(CircError::UnknownColumn(target.to_string()));
    }
    if let Some(m) = config.preselect {
        if m < features.len() {
            let keep = preselect_by_correlation(data, target, m)?;
            // back to column order for stable reporting
            features.retain(|f| keep.contains(f));
        }
    }
    let pool: Vec<String> = match &config.candidate_features {
        Some(wanted) => {
            for name in wanted {
                if !features.contains(name) {
                    return Err(CircError::UnknownFeature(name.clone()));
                }
            }
            // column order for stable enumeration
            features
                .iter()
                .filter(|f| wanted.contains(f))
                .cloned()
                .collect()
        }
        None => features.clone(),
    };
    let candidates = enumerate_candidates(&pool, config.cap)?;
    let spec = ModelSpec::auto(
        data,
        &features,
        config.family,
        config.knots,
        config.smoothing.clone(),
    )?;
    let design = build_design(&spec, data, target)?;
    let (mut ranked, sel_idx) = search(&design, &candidates, &config.smoothing)?;
    let best_converged = ranked[0].converged;
    let selected = ranked[sel_idx].clone();

    let sel_refs: Vec<&str> = selected.features.iter().map(String::as_str).collect();
    let selected_fit = design.fit_subset(&sel_refs, &config.smoothing)?;
    let full_fit = design.fit(&config.smoothing)?;
    let complement: Vec<&str> = features
        .iter()
        .filter(|f| !selected.features.contains(f))
        .map(String::as_str)
        .collect();
    let complement_fit = if complement.is_empty() {
        None
    } else {
        Some(design.fit_subset(&complement, &config.smoothing)?)
    };

    let verdicts = nullification_check(
        &full_fit,
        &selected.features,
        selected_fit.link_scale_sd,
        config.eps_null,
    )?;
    let outcome = if !best_converged {
        Outcome::Inconclusive
    } else if selected.d_squared >= config.delta_close {
        if verdicts.iter().all(|v| v.nullified) {
            Outcome::Circular
        } else {
            Outcome::PartiallyCircular
        }
    } else {
        Outcome::NotCircular
    };

    let candidates_evaluated = ranked.len();
    ranked.truncate(config.top_k);
    let report = CircularityReport {
        version: REPORT_VERSION.to_string(),
        config: config.report_config(),
        target: target.to_string(),
        n_rows: data.n_rows(),
        dataset_fingerprint: data.fingerprint(),
        seed: config.seed,
        candidates_evaluated,
        ranked_models: ranked,
        selected,
        verdicts,
        outcome,
    };
    Ok(AuditResult {
        report,
        full_fit,
        selected_fit,
        complement_fit,
    })
}

/// The two-step circularity test (report only).
pub fn run_test(data: &Dataset, target: &str, config: &AuditConfig) -> Result<CircularityReport> {
    run_audit(data, target, config).map(|r| r.report)
}
