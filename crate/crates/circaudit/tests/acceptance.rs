//! Acceptance gate: end-to-end checks of the detection pipeline against
//! pinned tolerances. Each test prints one PASS line; a failed assertion is
//! the corresponding FAIL. Numeric engine checks are validated against
//! independent oracles implemented inside this file (Gauss elimination,
//! Newton iteration, the textbook Cox-de Boor recursion, derivative
//! recurrences with midpoint quadrature, and finite differences).

use std::time::Instant;

use circaudit::circularity::{
    nullification_check, run_test, AuditConfig, Outcome,
};
use circaudit::data::Dataset;
use circaudit::gam::{
    build_design, fit, BlockKind, Family, FeatureSpec, ModelSpec, Smoothing,
};
use circaudit::mlp::{
    accuracy, distill_audit, f1, threshold, train, Activation, Loss, NetSpec, TeacherNet,
    TrainConfig,
};
use circaudit::spline::{place_knots, SplineBlock, ORDER};
use circaudit::synth::{
    ablate, binary_target, gen_icu, gen_patent, kidney_table, liver_sofa, liver_table, GenConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const D2_EXACT_TOL: f64 = 1e-6;
const SECONDS_PER_SEED: f64 = 120.0;
const NULLIFICATION_REL: f64 = 0.05;
const SHAPE_STEP_TOL: f64 = 0.1;
const NORMAL_EQ_TOL: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-6;
const MLP_GRAD_REL_TOL: f64 = 1e-4;
const BASIS_TOL: f64 = 1e-10;
const PENALTY_QUAD_TOL: f64 = 1e-6;

fn patent_audit_config() -> AuditConfig {
    AuditConfig {
        family: Family::Gaussian,
        knots: 10,
        ..AuditConfig::default()
    }
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------------------
// 1. circular detection on the patent rule, 20 seeds
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_patent_detection() {
    let citations = strs(&["inventor", "examiner", "family"]);
    for seed in 1..=20u64 {
        let started = Instant::now();
        let data = gen_patent(&GenConfig::new(100_000, seed)).unwrap();
        let report = run_test(&data, "relevance", &patent_audit_config()).unwrap();
        assert_eq!(
            report.selected.features, citations,
            "seed {seed}: wrong c*"
        );
        assert!(
            report.selected.d_squared >= 1.0 - D2_EXACT_TOL,
            "seed {seed}: D^2 = {}",
            report.selected.d_squared
        );
        assert_eq!(report.outcome, Outcome::Circular, "seed {seed}");
        // minimal EDF within the D^2 tie class at the top
        let best = report.ranked_models[0].d_squared;
        for m in &report.ranked_models {
            if best - m.d_squared <= 1e-4 {
                assert!(
                    m.edf >= report.selected.edf - 1e-3,
                    "seed {seed}: tie member {:?} has smaller EDF",
                    m.features
                );
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        assert!(
            elapsed <= SECONDS_PER_SEED,
            "seed {seed} took {elapsed:.1}s"
        );
    }
    println!("[PASS] criterion 1: patent c* = {{inventor, examiner, family}}, D^2 = 1, minimal EDF, 20/20 seeds");
}

// ---------------------------------------------------------------------------
// 2. nullification in the full patent model; citation-free D^2 window
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_patent_nullification_and_score_window() {
    for seed in 1..=5u64 {
        let data = gen_patent(&GenConfig::new(100_000, seed)).unwrap();
        let spec = ModelSpec::auto(
            &data,
            &data.feature_names("relevance"),
            Family::Gaussian,
            10,
            Smoothing::Gcv,
        )
        .unwrap();
        let design = build_design(&spec, &data, "relevance").unwrap();
        let full = design.fit(&Smoothing::Gcv).unwrap();
        for score in ["tf_idf", "neural"] {
            let shape = full.feature_shape(score, 512).unwrap();
            let sup = shape.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(
                sup <= NULLIFICATION_REL * full.link_scale_sd,
                "seed {seed}: {score} not nullified (sup {sup:.4}, scale {:.4})",
                full.link_scale_sd
            );
        }
        let free = design
            .fit_subset(&["tf_idf", "neural"], &Smoothing::Gcv)
            .unwrap();
        assert!(
            (0.5..=0.7).contains(&free.d_squared),
            "seed {seed}: citation-free D^2 = {:.4} outside [0.5, 0.7]",
            free.d_squared
        );
    }
    println!("[PASS] criterion 2: tf_idf/neural nullified in full model; citation-free D^2 in [0.5, 0.7], 5 seeds");
}

// ---------------------------------------------------------------------------
// 3. liver rule: bili-only replication, step-shape recovery, nullification
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_liver_step_recovery() {
    let liver = liver_table(&gen_icu(&GenConfig::new(40_000, 1)).unwrap()).unwrap();

    // dense basis for the step-shape comparison
    let spec_dense = ModelSpec::auto(
        &liver,
        &strs(&["bili"]),
        Family::Gaussian,
        150,
        Smoothing::Gcv,
    )
    .unwrap();
    let bili_fit = fit(&spec_dense, &liver, "liver_sofa").unwrap();
    assert!(
        bili_fit.d_squared >= 0.99,
        "bili-only D^2 = {:.4}",
        bili_fit.d_squared
    );
    let shape = bili_fit.feature_shape("bili", 512).unwrap();
    let thresholds = [1.2, 1.9, 5.9, 11.9];
    for (x, v) in shape.grid.iter().zip(&shape.values) {
        if thresholds.iter().any(|t| (x - t).abs() < 0.1) {
            continue;
        }
        let truth = liver_sofa(*x).unwrap() as f64;
        let fitted = bili_fit.intercept + v;
        assert!(
            (fitted - truth).abs() <= SHAPE_STEP_TOL,
            "shape error {:.4} at bili = {x:.3}",
            (fitted - truth).abs()
        );
    }

    // full model (moderate basis) for the nullification step
    let spec_full = ModelSpec::auto(
        &liver,
        &liver.feature_names("liver_sofa"),
        Family::Gaussian,
        60,
        Smoothing::Gcv,
    )
    .unwrap();
    let design = build_design(&spec_full, &liver, "liver_sofa").unwrap();
    let full = design.fit(&Smoothing::Gcv).unwrap();
    let selected = design.fit_subset(&["bili"], &Smoothing::Gcv).unwrap();
    let verdicts = nullification_check(
        &full,
        &strs(&["bili"]),
        selected.link_scale_sd,
        NULLIFICATION_REL,
    )
    .unwrap();
    assert_eq!(verdicts.len(), 4);
    for v in &verdicts {
        assert!(
            v.nullified,
            "{} not nullified (sup {:.4}, scale {:.4})",
            v.feature, v.sup_norm, v.scale
        );
    }
    println!("[PASS] criterion 3: bili-only D^2 >= 0.99, step shape within 0.1 off-threshold, surrogates nullified");
}

// ---------------------------------------------------------------------------
// 4. kidney rule: two defining features, circular verdict
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_kidney_two_feature_rule() {
    let kidney = kidney_table(&gen_icu(&GenConfig::new(40_000, 1)).unwrap()).unwrap();
    let cfg = AuditConfig {
        family: Family::Gaussian,
        knots: 30,
        delta_close: 0.9,
        ..AuditConfig::default()
    };
    let report = run_test(&kidney, "kidney_sofa", &cfg).unwrap();
    assert_eq!(report.selected.features, strs(&["crea", "urine24"]));
    assert!(
        report.selected.d_squared >= 0.90,
        "pair D^2 = {:.4}",
        report.selected.d_squared
    );
    assert_eq!(report.outcome, Outcome::Circular);
    assert_eq!(report.verdicts.len(), 4);
    for v in &report.verdicts {
        assert!(
            v.nullified,
            "{} not nullified (sup {:.4} vs scale {:.4})",
            v.feature, v.sup_norm, v.scale
        );
    }
    println!("[PASS] criterion 4: kidney c* = {{crea, urine24}}, D^2 >= 0.90, bun/artph/temp/lactate nullified");
}

// ---------------------------------------------------------------------------
// 5. distillation audit: with-citations teacher vs control, plus ablation
// ---------------------------------------------------------------------------

fn binary_patent_dataset(n: usize, seed: u64) -> Dataset {
    // noisier scores than the default: the teachers must lean on the
    // citation indicators, mirroring the regime the claims are about
    let mut cfg = GenConfig::new(n, seed);
    cfg.score_noise = 2.0;
    let data = gen_patent(&cfg).unwrap();
    let target = binary_target(&data).unwrap();
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    for name in ["neural", "tf_idf", "inventor", "examiner", "family"] {
        cols.push((name.to_string(), data.column(name).unwrap().values.clone()));
    }
    cols.push(("relevant".to_string(), target));
    Dataset::from_columns(cols).unwrap()
}

/// Audit of the student GAM asking specifically whether the teacher is
/// circular in the citation features; the full model and nullification still
/// cover all five features.
fn citation_audit_config() -> AuditConfig {
    AuditConfig {
        family: Family::Binomial,
        knots: 10,
        candidate_features: Some(strs(&["inventor", "examiner", "family"])),
        ..AuditConfig::default()
    }
}

fn teacher_on(
    data: &Dataset,
    features: &[&str],
    epochs: usize,
    seed: u64,
) -> (TeacherNet, Dataset) {
    let (train_set, test_set) = data.split(0.75, seed).unwrap();
    let mut cfg = TrainConfig::new(Loss::Logistic, seed);
    cfg.epochs = epochs;
    let net = train(
        &NetSpec::default_ramp(Activation::Tanh),
        &train_set,
        "relevant",
        &strs(features),
        &cfg,
    )
    .unwrap();
    (net, test_set)
}

fn test_truth(test_set: &Dataset) -> Vec<u32> {
    test_set
        .column("relevant")
        .unwrap()
        .values
        .iter()
        .map(|&v| v as u32)
        .collect()
}

#[test]
fn criterion_05_distillation_audit() {
    let data = binary_patent_dataset(40_000, 1);
    let all5 = ["neural", "tf_idf", "inventor", "examiner", "family"];

    // teacher with citation access replicates the rule
    let (teacher, test_set) = teacher_on(&data, &all5, 5, 1);
    let truth = test_truth(&test_set);
    let pred = threshold(&teacher.predict(&test_set).unwrap(), &[0.5]);
    let f1_with = f1(&pred, &truth).unwrap();
    assert!(f1_with >= 0.999, "teacher F1 = {f1_with:.5}");

    let result = distill_audit(
        &teacher,
        &test_set,
        &strs(&all5),
        &[0.5],
        &citation_audit_config(),
    )
    .unwrap();
    assert_eq!(result.report.outcome, Outcome::Circular);
    assert_eq!(
        result.report.selected.features,
        strs(&["inventor", "examiner", "family"])
    );

    // zeroing the citations collapses the teacher
    let ablated = ablate(&test_set, &["inventor", "examiner", "family"]).unwrap();
    let pred_abl = threshold(&teacher.predict(&ablated).unwrap(), &[0.5]);
    let f1_abl = f1(&pred_abl, &truth).unwrap();
    assert!(f1_abl <= 0.05, "ablated F1 = {f1_abl:.5}");
    let _ = accuracy(&pred_abl, &truth).unwrap();

    // control teacher without citation access is never flagged circular
    for seed in 1..=10u64 {
        let (control, test_set) = teacher_on(&data, &["neural", "tf_idf"], 5, seed);
        let res = distill_audit(
            &control,
            &test_set,
            &strs(&all5),
            &[0.5],
            &citation_audit_config(),
        )
        .unwrap();
        assert_ne!(
            res.report.outcome,
            Outcome::Circular,
            "control seed {seed} flagged circular (D^2 = {:.5})",
            res.report.selected.d_squared
        );
    }
    println!("[PASS] criterion 5: teacher F1 >= 0.999, distillation flags circularity, ablated F1 <= 0.05, control never circular 10/10");
}

// ---------------------------------------------------------------------------
// 6. partial circularity with an inventor-only teacher
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_partial_circularity() {
    let data = binary_patent_dataset(40_000, 1);
    let all5 = ["neural", "tf_idf", "inventor", "examiner", "family"];
    let citations = strs(&["inventor", "examiner", "family"]);
    for seed in 1..=3u64 {
        let (teacher, test_set) = teacher_on(&data, &["neural", "tf_idf", "inventor"], 5, seed);
        let res = distill_audit(
            &teacher,
            &test_set,
            &strs(&all5),
            &[0.5],
            &citation_audit_config(),
        )
        .unwrap();
        assert!(
            matches!(
                res.report.outcome,
                Outcome::PartiallyCircular | Outcome::NotCircular
            ),
            "seed {seed}: outcome {:?}",
            res.report.outcome
        );
        assert!(
            !(res.report.outcome == Outcome::Circular
                && res.report.selected.features == citations),
            "seed {seed}: circular with the full citation set"
        );
        // inventor, tf_idf, and neural shapes must all stay active in the
        // full student model
        let scale = res.full_fit.link_scale_sd;
        for feature in ["inventor", "tf_idf", "neural"] {
            let shape = res.full_fit.feature_shape(feature, 512).unwrap();
            let sup = shape.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(
                sup > NULLIFICATION_REL * scale,
                "seed {seed}: {feature} unexpectedly nullified (sup {sup:.4}, scale {scale:.4})"
            );
        }
    }
    println!("[PASS] criterion 6: inventor-only teacher yields partial/non-circular student with active inventor + score shapes, 3 seeds");
}

// ---------------------------------------------------------------------------
// 7. engine oracles
// ---------------------------------------------------------------------------

/// Gauss elimination with partial pivoting; independent of the engine solver.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-14, "singular oracle system");
        for row in col + 1..n {
            let f = a[row][col] / p;
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Textbook Cox-de Boor recursion (closed on the right end).
fn cdb(t: &[f64], i: usize, k: usize, x: f64, x_max: f64) -> f64 {
    if k == 1 {
        let closed_end = x >= x_max && t[i] < t[i + 1] && t[i + 1] >= x_max;
        return if (t[i] <= x && x < t[i + 1]) || closed_end {
            1.0
        } else {
            0.0
        };
    }
    let mut v = 0.0;
    if t[i + k - 1] > t[i] {
        v += (x - t[i]) / (t[i + k - 1] - t[i]) * cdb(t, i, k - 1, x, x_max);
    }
    if t[i + k] > t[i + 1] {
        v += (t[i + k] - x) / (t[i + k] - t[i + 1]) * cdb(t, i + 1, k - 1, x, x_max);
    }
    v
}

/// Second derivative of a cubic B-spline via the derivative recurrence applied
/// to the order-2 recursion basis.
fn cdb_deriv2(t: &[f64], i: usize, x: f64, x_max: f64) -> f64 {
    let b2 = |j: usize| cdb(t, j, 2, x, x_max);
    let d = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    // B''_{i,4} = 6 [ B_{i,2}/((t_{i+3}-t_i)(t_{i+2}-t_i))
    //   - B_{i+1,2} (1/(t_{i+3}-t_i) + 1/(t_{i+4}-t_{i+1})) / (t_{i+3}-t_{i+1})
    //   + B_{i+2,2}/((t_{i+4}-t_{i+1})(t_{i+4}-t_{i+2})) ]
    let term1 = d(d(b2(i), t[i + 2] - t[i]), t[i + 3] - t[i]);
    let mid = d(1.0, t[i + 3] - t[i]) + d(1.0, t[i + 4] - t[i + 1]);
    let term2 = d(b2(i + 1) * mid, t[i + 3] - t[i + 1]);
    let term3 = d(d(b2(i + 2), t[i + 4] - t[i + 2]), t[i + 4] - t[i + 1]);
    6.0 * (term1 - term2 + term3)
}

#[test]
fn criterion_07_engine_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);

    // (a) penalized Gaussian spline fit vs dense normal equations
    {
        let n = 40;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|v| (2.0 * v).sin() + 0.1 * rng.gen::<f64>())
            .collect();
        let data =
            Dataset::from_columns(vec![("x".into(), xs.clone()), ("y".into(), ys.clone())])
                .unwrap();
        let lambda = 3.7;
        let spec = ModelSpec {
            features: vec![FeatureSpec {
                name: "x".into(),
                kind: BlockKind::Spline { knots: 8 },
            }],
            family: Family::Gaussian,
            smoothing: Smoothing::Fixed(lambda),
        };
        let engine = fit(&spec, &data, "y").unwrap();
        let mu_engine = engine.predict_mean(&data).unwrap();

        // reconstruct the design: intercept + centered basis with the middle
        // column dropped, penalty with the same row/column removed
        let block = SplineBlock::new(place_knots("x", &xs, 8).unwrap());
        let nb = block.n_basis;
        let drop = nb / 2;
        let keep: Vec<usize> = (0..nb).filter(|&j| j != drop).collect();
        let q = keep.len() + 1;
        let mut design = vec![vec![0.0; q]; n];
        let mut means = vec![0.0; nb];
        let raw: Vec<Vec<f64>> = xs.iter().map(|&x| block.eval_basis(x)).collect();
        for j in 0..nb {
            means[j] = raw.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        }
        for (row, r) in raw.iter().enumerate() {
            design[row][0] = 1.0;
            for (c, &j) in keep.iter().enumerate() {
                design[row][c + 1] = r[j] - means[j];
            }
        }
        let mut a = vec![vec![0.0; q]; q];
        let mut b = vec![0.0; q];
        for i in 0..q {
            for j in 0..q {
                a[i][j] = (0..n).map(|r| design[r][i] * design[r][j]).sum();
            }
            b[i] = (0..n).map(|r| design[r][i] * ys[r]).sum();
        }
        for (ci, &i) in keep.iter().enumerate() {
            for (cj, &j) in keep.iter().enumerate() {
                a[ci + 1][cj + 1] += lambda * block.penalty[[i, j]];
            }
        }
        let beta = gauss_solve(a, b);
        for (row, &m) in mu_engine.iter().enumerate() {
            let oracle: f64 = (0..q).map(|j| design[row][j] * beta[j]).sum();
            assert!(
                (m - oracle).abs() <= NORMAL_EQ_TOL,
                "penalized fit row {row}: {m} vs {oracle}"
            );
        }
    }

    // (b) unpenalized linear fit vs OLS
    {
        let n = 50;
        let x1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| 2.0 + 3.0 * a - b + 0.05 * rng.gen::<f64>())
            .collect();
        let data = Dataset::from_columns(vec![
            ("x1".into(), x1.clone()),
            ("x2".into(), x2.clone()),
            ("y".into(), y.clone()),
        ])
        .unwrap();
        let spec = ModelSpec {
            features: vec![
                FeatureSpec {
                    name: "x1".into(),
                    kind: BlockKind::Linear,
                },
                FeatureSpec {
                    name: "x2".into(),
                    kind: BlockKind::Linear,
                },
            ],
            family: Family::Gaussian,
            smoothing: Smoothing::Fixed(0.0),
        };
        let engine = fit(&spec, &data, "y").unwrap();
        let mu_engine = engine.predict_mean(&data).unwrap();
        assert!((engine.edf - 3.0).abs() < 1e-8, "OLS edf = {}", engine.edf);

        let design: Vec<Vec<f64>> = (0..n).map(|r| vec![1.0, x1[r], x2[r]]).collect();
        let mut a = vec![vec![0.0; 3]; 3];
        let mut b = vec![0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = (0..n).map(|r| design[r][i] * design[r][j]).sum();
            }
            b[i] = (0..n).map(|r| design[r][i] * y[r]).sum();
        }
        let beta = gauss_solve(a, b);
        for (row, &m) in mu_engine.iter().enumerate() {
            let oracle: f64 = (0..3).map(|j| design[row][j] * beta[j]).sum();
            assert!((m - oracle).abs() <= NORMAL_EQ_TOL, "OLS row {row}");
        }
    }

    // (c) binomial P-IRLS vs independent Newton logistic regression
    {
        let n = 300;
        let x1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| {
                let p = 1.0 / (1.0 + (-(0.5 + 1.5 * a - 2.0 * b)).exp());
                f64::from(rng.gen::<f64>() < p)
            })
            .collect();
        let data = Dataset::from_columns(vec![
            ("x1".into(), x1.clone()),
            ("x2".into(), x2.clone()),
            ("y".into(), y.clone()),
        ])
        .unwrap();
        let spec = ModelSpec {
            features: vec![
                FeatureSpec {
                    name: "x1".into(),
                    kind: BlockKind::Linear,
                },
                FeatureSpec {
                    name: "x2".into(),
                    kind: BlockKind::Linear,
                },
            ],
            family: Family::Binomial,
            smoothing: Smoothing::Fixed(0.0),
        };
        let engine = fit(&spec, &data, "y").unwrap();
        let mu_engine = engine.predict_mean(&data).unwrap();

        let design: Vec<Vec<f64>> = (0..n).map(|r| vec![1.0, x1[r], x2[r]]).collect();
        let mut beta = vec![0.0; 3];
        for _ in 0..60 {
            let mut grad = vec![0.0; 3];
            let mut hess = vec![vec![0.0; 3]; 3];
            for r in 0..n {
                let eta: f64 = (0..3).map(|j| design[r][j] * beta[j]).sum();
                let p = 1.0 / (1.0 + (-eta).exp());
                for i in 0..3 {
                    grad[i] += design[r][i] * (y[r] - p);
                    for j in 0..3 {
                        hess[i][j] += design[r][i] * design[r][j] * p * (1.0 - p);
                    }
                }
            }
            let step = gauss_solve(hess, grad);
            let sup = step.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for i in 0..3 {
                beta[i] += step[i];
            }
            if sup < 1e-12 {
                break;
            }
        }
        for (row, &m) in mu_engine.iter().enumerate() {
            let eta: f64 = (0..3).map(|j| design[row][j] * beta[j]).sum();
            let oracle = 1.0 / (1.0 + (-eta).exp());
            assert!(
                (m - oracle).abs() <= NEWTON_TOL,
                "logistic row {row}: {m} vs {oracle}"
            );
        }
    }

    // (d) MLP gradient vs central finite differences, through the public
    // train/predict surface: one full-batch SGD step encodes the gradient
    {
        let n = 10;
        let a: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(p, q)| f64::from(p + q > 0.0)).collect();
        let data = Dataset::from_columns(vec![
            ("a".into(), a),
            ("b".into(), b),
            ("y".into(), y.clone()),
        ])
        .unwrap();
        let spec = NetSpec {
            hidden: vec![3],
            activation: Activation::Tanh,
        };
        let feats = strs(&["a", "b"]);
        let lr = 1e-3;
        let mut cfg = TrainConfig::new(Loss::Logistic, 5);
        cfg.batch_size = n;
        cfg.learning_rate = lr;
        cfg.epochs = 0;
        let net0 = train(&spec, &data, "y", &feats, &cfg).unwrap();
        cfg.epochs = 1;
        let net1 = train(&spec, &data, "y", &feats, &cfg).unwrap();

        let flat = |doc: &serde_json::Value| -> Vec<f64> {
            let mut out = Vec::new();
            for key in ["weights", "biases"] {
                for layer in doc[key].as_array().unwrap() {
                    for v in layer.as_array().unwrap() {
                        out.push(v.as_f64().unwrap());
                    }
                }
            }
            out
        };
        let doc0: serde_json::Value = serde_json::from_str(&net0.to_json()).unwrap();
        let doc1: serde_json::Value = serde_json::from_str(&net1.to_json()).unwrap();
        let w0 = flat(&doc0);
        let w1 = flat(&doc1);
        // w1 = w0 - lr * grad (single full-batch step, no dropout)
        let analytic: Vec<f64> = w0.iter().zip(&w1).map(|(p, q)| (p - q) / lr).collect();

        let set_params = |doc: &serde_json::Value, params: &[f64]| -> TeacherNet {
            let mut doc = doc.clone();
            let mut it = params.iter();
            for key in ["weights", "biases"] {
                for layer in doc[key].as_array_mut().unwrap() {
                    for v in layer.as_array_mut().unwrap() {
                        *v = serde_json::json!(it.next().unwrap());
                    }
                }
            }
            TeacherNet::from_json(&doc.to_string()).unwrap()
        };
        let loss_of = |params: &[f64]| -> f64 {
            let net = set_params(&doc0, params);
            let p = net.predict(&data).unwrap();
            let mut total = 0.0;
            for (pi, yi) in p.iter().zip(&y) {
                let pc = pi.clamp(1e-12, 1.0 - 1e-12);
                total += -(yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln());
            }
            total / n as f64
        };
        let h = 1e-5;
        let mut params = w0.clone();
        for (i, &g) in analytic.iter().enumerate() {
            let orig = params[i];
            params[i] = orig + h;
            let up = loss_of(&params);
            params[i] = orig - h;
            let down = loss_of(&params);
            params[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = g.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (g - numeric).abs() / scale <= MLP_GRAD_REL_TOL,
                "mlp param {i}: {g} vs {numeric}"
            );
        }
    }

    // (e) B-spline basis vs the recursive Cox-de Boor oracle
    {
        let xs: Vec<f64> = (0..200).map(|_| rng.gen::<f64>() * 3.0 - 1.0).collect();
        let block = SplineBlock::new(place_knots("x", &xs, 9).unwrap());
        let t = block.knots.full_knots();
        let (lo, hi) = block.knots.boundary;
        for step in 0..=400 {
            let x = lo + (hi - lo) * step as f64 / 400.0;
            let fast = block.eval_basis(x);
            let mut sum = 0.0;
            for (i, &f) in fast.iter().enumerate() {
                let oracle = cdb(&t, i, ORDER, x, hi);
                assert!(
                    (f - oracle).abs() <= BASIS_TOL,
                    "basis {i} at x = {x}: {f} vs {oracle}"
                );
                sum += f;
            }
            assert!((sum - 1.0).abs() <= BASIS_TOL, "partition of unity at {x}");
        }
    }

    // (f) penalty matrix vs midpoint quadrature of the independent second
    // derivative recurrence
    {
        let kv = place_knots("x", &(0..300).map(|i| i as f64 / 299.0).collect::<Vec<_>>(), 4)
            .unwrap();
        let block = SplineBlock::new(kv);
        let t = block.knots.full_knots();
        let (lo, hi) = block.knots.boundary;
        let nb = block.n_basis;
        let grid = 200_000usize;
        let h = (hi - lo) / grid as f64;
        let mut quad = vec![vec![0.0; nb]; nb];
        for step in 0..grid {
            let x = lo + (step as f64 + 0.5) * h;
            let d2: Vec<f64> = (0..nb).map(|i| cdb_deriv2(&t, i, x, hi)).collect();
            for i in 0..nb {
                for j in 0..nb {
                    quad[i][j] += h * d2[i] * d2[j];
                }
            }
        }
        for i in 0..nb {
            for j in 0..nb {
                let scale = block.penalty[[i, j]].abs().max(1.0);
                assert!(
                    (block.penalty[[i, j]] - quad[i][j]).abs() / scale <= PENALTY_QUAD_TOL,
                    "penalty ({i},{j}): {} vs {}",
                    block.penalty[[i, j]],
                    quad[i][j]
                );
            }
        }
    }

    println!("[PASS] criterion 7: normal-equation, OLS, Newton-logistic, MLP finite-difference, Cox-de Boor, and quadrature oracles agree");
}

// ---------------------------------------------------------------------------
// 8. tie-break semantics with a duplicated defining column
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_edf_tie_break() {
    use rand_distr::{Distribution, Normal};
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>() * 4.0).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| 1.5 * v - 2.0 + noise.sample(&mut rng))
        .collect();
    let data = Dataset::from_columns(vec![
        ("a".into(), x.clone()),
        ("a_copy".into(), x),
        ("y".into(), y),
    ])
    .unwrap();
    let cfg = AuditConfig {
        knots: 8,
        ..AuditConfig::default()
    };
    let r1 = run_test(&data, "y", &cfg).unwrap();
    let r2 = run_test(&data, "y", &cfg).unwrap();
    // both singletons reach the identical D^2; the duplicate pair cannot beat
    // them on EDF beyond tolerance, so the earlier singleton wins
    assert_eq!(r1.selected.features, strs(&["a"]));
    assert!(r1.selected.d_squared >= 0.999);
    let pair = r1
        .ranked_models
        .iter()
        .find(|m| m.features == strs(&["a", "a_copy"]))
        .unwrap();
    assert!(pair.edf > r1.selected.edf - 1e-3);
    assert_eq!(
        serde_json::to_string(&r1).unwrap(),
        serde_json::to_string(&r2).unwrap(),
        "selection not deterministic"
    );
    println!("[PASS] criterion 8: duplicated defining column resolves to the earlier singleton deterministically");
}

// ---------------------------------------------------------------------------
// 9. specificity: no false circular verdicts
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_specificity() {
    // pure-noise targets
    for seed in 1..=10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 20_000;
        let mut cols: Vec<(String, Vec<f64>)> = (0..5)
            .map(|j| {
                (
                    format!("f{j}"),
                    (0..n).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>(),
                )
            })
            .collect();
        cols.push((
            "y".into(),
            (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
        ));
        let data = Dataset::from_columns(cols).unwrap();
        let cfg = AuditConfig {
            knots: 10,
            ..AuditConfig::default()
        };
        let report = run_test(&data, "y", &cfg).unwrap();
        assert_eq!(
            report.outcome,
            Outcome::NotCircular,
            "noise seed {seed}: D^2 = {:.4}",
            report.selected.d_squared
        );
    }
    // defining column removed: surrogates alone must not trip the gate
    for seed in 1..=10u64 {
        let liver = liver_table(&gen_icu(&GenConfig::new(20_000, seed)).unwrap()).unwrap();
        let no_bili = liver
            .select(&["asat", "quinr", "alat", "hzv", "liver_sofa"])
            .unwrap();
        let cfg = AuditConfig {
            knots: 20,
            ..AuditConfig::default()
        };
        let report = run_test(&no_bili, "liver_sofa", &cfg).unwrap();
        assert_eq!(
            report.outcome,
            Outcome::NotCircular,
            "no-bili seed {seed}: D^2 = {:.4}",
            report.selected.d_squared
        );
        assert!(report.selected.d_squared < 0.99);
    }
    println!("[PASS] criterion 9: 20/20 seeds not-circular on noise targets and surrogate-only tables");
}

// ---------------------------------------------------------------------------
// 10. CLI determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_cli_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_circaudit");
    let base = std::env::temp_dir().join("circaudit_accept_c10");
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();

    let run = |args: &[&str]| {
        let status = Command::new(bin)
            .args(args)
            .status()
            .expect("spawn circaudit");
        status.code().expect("exit code")
    };

    let gen_dir = base.join("gen");
    assert_eq!(
        run(&[
            "generate",
            "--rule",
            "patent",
            "--n",
            "20000",
            "--seed",
            "5",
            "--out-dir",
            gen_dir.to_str().unwrap(),
        ]),
        0
    );
    let data = gen_dir.join("data.csv");
    let mut codes = Vec::new();
    for dir in ["a1", "a2"] {
        let out = base.join(dir);
        codes.push(run(&[
            "audit",
            "--data",
            data.to_str().unwrap(),
            "--target",
            "relevance",
            "--knots",
            "10",
            "--out-dir",
            out.to_str().unwrap(),
        ]));
    }
    assert_eq!(codes, vec![10, 10], "patent audit must exit circular");
    for name in [
        "report.json",
        "ranking.csv",
        "shapes_with.svg",
        "shapes_without.svg",
        "manifest.json",
    ] {
        let a = std::fs::read(base.join("a1").join(name)).unwrap();
        let b = std::fs::read(base.join("a2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    println!("[PASS] criterion 10: repeated CLI runs are byte-identical (report.json, ranking.csv, SVGs)");
}
