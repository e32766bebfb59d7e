//! Cubic B-spline bases and second-derivative roughness penalties.
//!
//! One `SplineBlock` per continuous feature: an order-4 (cubic) B-spline basis
//! on quantile-placed interior knots, clamped at the observed range, together
//! with the penalty matrix S with entries ∫ B_i''(x) B_j''(x) dx.

use ndarray::Array2;

use crate::error::{CircError, Result};

pub const ORDER: usize = 4; // cubic

#[derive(Debug, Clone)]
pub struct KnotVector {
    pub feature_name: String,
    pub interior_knots: Vec<f64>,
    pub boundary: (f64, f64),
    /// Set when fewer knots than requested could be placed (ties/few distinct values).
    pub reduced: bool,
}

impl KnotVector {
    /// Full clamped knot sequence: boundary knots repeated ORDER times.
    pub fn full_knots(&self) -> Vec<f64> {
        let (lo, hi) = self.boundary;
        let mut t = vec![lo; ORDER];
        t.extend(&self.interior_knots);
        t.extend(vec![hi; ORDER]);
        t
    }

    pub fn n_basis(&self) -> usize {
        self.interior_knots.len() + ORDER
    }
}

#[derive(Debug, Clone)]
pub struct SplineBlock {
    pub knots: KnotVector,
    pub n_basis: usize,
    pub penalty: Array2<f64>,
    full: Vec<f64>,
}

/// Interior knots at empirical quantiles of the distinct values.
///
/// `k` is the requested interior-knot count. When the column has fewer
/// distinct values than `k + 2`, the knot set is reduced and flagged; a
/// constant column is an error.
pub fn place_knots(feature_name: &str, values: &[f64], k: usize) -> Result<KnotVector> {
    if values.is_empty() {
        return Err(CircError::EmptyInput("knot placement on empty column"));
    }
    if k < 2 {
        return Err(CircError::InvalidArgument(format!(
            "knot count must be >= 2, got {k}"
        )));
    }
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(CircError::ConstantColumn(feature_name.to_string()));
    }
    let mut reduced = false;
    let mut k = k;
    if distinct.len() < k {
        k = distinct.len();
        reduced = true;
    }
    let lo = distinct[0];
    let hi = *distinct.last().unwrap();

    // quantiles by linear interpolation over the sorted distinct values
    let m = distinct.len();
    let mut interior = Vec::with_capacity(k);
    for i in 1..=k {
        let p = i as f64 / (k + 1) as f64;
        let pos = p * (m - 1) as f64;
        let j = pos.floor() as usize;
        let frac = pos - j as f64;
        let q = if j + 1 < m {
            distinct[j] * (1.0 - frac) + distinct[j + 1] * frac
        } else {
            distinct[j]
        };
        if q > lo && q < hi {
            interior.push(q);
        }
    }
    interior.dedup();
    if interior.len() < k {
        reduced = true;
    }
    Ok(KnotVector {
        feature_name: feature_name.to_string(),
        interior_knots: interior,
        boundary: (lo, hi),
        reduced,
    })
}

impl SplineBlock {
    pub fn new(knots: KnotVector) -> SplineBlock {
        let full = knots.full_knots();
        let n_basis = knots.n_basis();
        let penalty = penalty_matrix(&knots);
        SplineBlock {
            knots,
            n_basis,
            penalty,
            full,
        }
    }

    fn clamp(&self, x: f64) -> f64 {
        let (lo, hi) = self.knots.boundary;
        x.clamp(lo, hi)
    }

    /// All `n_basis` basis values at `x` (clamped to the boundary range).
    pub fn eval_basis(&self, x: f64) -> Vec<f64> {
        let x = self.clamp(x);
        let (span, local) = self.eval_local(x);
        let mut out = vec![0.0; self.n_basis];
        for (j, &v) in local.iter().enumerate() {
            out[span + 1 - ORDER + j] = v;
        }
        out
    }

    /// The ORDER nonzero basis values at `x` plus the index of the first one.
    /// This is the hot path for design-matrix assembly.
    pub fn eval_sparse(&self, x: f64) -> (usize, [f64; ORDER]) {
        let x = self.clamp(x);
        let (span, local) = self.eval_local(x);
        (span + 1 - ORDER, local)
    }

    fn eval_local(&self, x: f64) -> (usize, [f64; ORDER]) {
        let t = &self.full;
        let span = find_span(t, self.n_basis, x);
        let p = ORDER - 1;
        let mut left = [0.0; ORDER];
        let mut right = [0.0; ORDER];
        let mut vals = [0.0; ORDER];
        vals[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { vals[r] / denom } else { 0.0 };
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        (span, vals)
    }

    /// Second derivatives of all basis functions at `x` (within one span;
    /// values are the right-limits at knots).
    pub fn eval_deriv2(&self, x: f64) -> Vec<f64> {
        let x = self.clamp(x);
        deriv2_all(&self.full, self.n_basis, x)
    }
}

/// Largest span index i with t[i] <= x < t[i+1], restricted to the non-empty
/// spans of a clamped knot vector; x at the right boundary maps to the last span.
fn find_span(t: &[f64], n_basis: usize, x: f64) -> usize {
    let p = ORDER - 1;
    if x >= t[n_basis] {
        let mut i = n_basis - 1;
        while t[i] == t[i + 1] {
            i -= 1;
        }
        return i;
    }
    let mut lo = p;
    let mut hi = n_basis;
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if x < t[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Full vector of order-k basis values, iterative Cox–de Boor over all indices.
/// Cold path: penalty assembly and second derivatives only.
fn all_basis_order(t: &[f64], order: usize, n_top: usize, x: f64) -> Vec<f64> {
    let _ = n_top;
    // order-1 indicators; right-closed on the final non-empty span
    let m = t.len();
    let n1 = m - 1;
    let mut b = vec![0.0; n1];
    let top_span = {
        let mut i = m - 2; // last non-empty span start
        while i > 0 && t[i] == t[i + 1] {
            i -= 1;
        }
        i
    };
    for (i, bi) in b.iter_mut().enumerate() {
        let inside = t[i] <= x && x < t[i + 1];
        let at_end = x >= t[m - 1] && i == top_span;
        if inside || at_end {
            *bi = 1.0;
        }
    }
    let mut cur = b;
    for k in 2..=order {
        let nk = m - k;
        let mut next = vec![0.0; nk];
        for i in 0..nk {
            let d1 = t[i + k - 1] - t[i];
            let d2 = t[i + k] - t[i + 1];
            let a = if d1 > 0.0 { (x - t[i]) / d1 * cur[i] } else { 0.0 };
            let c = if d2 > 0.0 {
                (t[i + k] - x) / d2 * cur[i + 1]
            } else {
                0.0
            };
            next[i] = a + c;
        }
        cur = next;
    }
    cur
}

/// Second derivatives of the order-4 basis via the derivative recurrence
/// applied twice to order-2 values.
fn deriv2_all(t: &[f64], n_basis: usize, x: f64) -> Vec<f64> {
    let b2 = all_basis_order(t, 2, n_basis, x);
    // first derivative of order-3 functions
    let n3 = t.len() - 3;
    let mut d3 = vec![0.0; n3];
    for i in 0..n3 {
        let d1 = t[i + 2] - t[i];
        let d2 = t[i + 3] - t[i + 1];
        let a = if d1 > 0.0 { b2[i] / d1 } else { 0.0 };
        let b = if d2 > 0.0 { b2[i + 1] / d2 } else { 0.0 };
        d3[i] = 2.0 * (a - b);
    }
    let mut out = vec![0.0; n_basis];
    for i in 0..n_basis {
        let d1 = t[i + 3] - t[i];
        let d2 = t[i + 4] - t[i + 1];
        let a = if d1 > 0.0 { d3[i] / d1 } else { 0.0 };
        let b = if d2 > 0.0 { d3[i + 1] / d2 } else { 0.0 };
        out[i] = 3.0 * (a - b);
    }
    out
}

/// Exact roughness penalty S[i][j] = ∫ B_i'' B_j'' over the boundary range.
///
/// For cubic splines B'' is piecewise linear, so the product is quadratic per
/// span and 2-point Gauss–Legendre integrates it exactly. Gauss nodes stay
/// strictly inside each span, which sidesteps the B'' discontinuities at knots.
pub fn penalty_matrix(knots: &KnotVector) -> Array2<f64> {
    let t = knots.full_knots();
    let n = knots.n_basis();
    let mut s = Array2::<f64>::zeros((n, n));
    let mut breaks = vec![knots.boundary.0];
    breaks.extend(&knots.interior_knots);
    breaks.push(knots.boundary.1);
    breaks.dedup();
    let g = 1.0 / 3.0_f64.sqrt(); // Gauss-Legendre 2-point node on [-1,1]
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let half = (b - a) / 2.0;
        let mid = (a + b) / 2.0;
        for &node in &[mid - half * g, mid + half * g] {
            let d2 = deriv2_all(&t, n, node);
            for i in 0..n {
                if d2[i] == 0.0 {
                    continue;
                }
                for j in i..n {
                    let v = half * d2[i] * d2[j];
                    s[[i, j]] += v;
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            s[[i, j]] = s[[j, i]];
        }
    }
    s
}

/// Greville abscissae; coefficient vector beta_i = a + b*greville_i represents
/// the affine function a + b*x exactly.
pub fn greville(knots: &KnotVector) -> Vec<f64> {
    let t = knots.full_knots();
    (0..knots.n_basis())
        .map(|i| (t[i + 1] + t[i + 2] + t[i + 3]) / 3.0)
        .collect()
}
