//! Per-column importance scores and kept/dropped selection.
//!
//! The variance-aware score for input column j is
//! `gamma_j = |W[:,j]| * |X[j,:]| * Var(X[j,:])`; dropping the variance
//! factor recovers the WANDA-sp score. Selection keeps the top-k columns,
//! or whole contiguous groups when a group size is set.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    VarianceAware,
    WandaSp,
}

impl fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreVariant::VarianceAware => "variance_aware",
            ScoreVariant::WandaSp => "wanda_sp",
        })
    }
}

impl FromStr for ScoreVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "variance_aware" => Ok(ScoreVariant::VarianceAware),
            "wanda_sp" => Ok(ScoreVariant::WandaSp),
            other => Err(format!(
                "unknown score variant `{other}` (expected variance_aware or wanda_sp)"
            )),
        }
    }
}

/// Which variance estimator feeds the variance-aware score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Divide by N. Keeps the score exactly zero for constant rows.
    Population,
    /// Divide by N-1.
    Sample,
}

impl fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceMode::Population => "population",
            VarianceMode::Sample => "sample",
        })
    }
}

impl FromStr for VarianceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "population" => Ok(VarianceMode::Population),
            "sample" => Ok(VarianceMode::Sample),
            other => Err(format!(
                "unknown variance mode `{other}` (expected population or sample)"
            )),
        }
    }
}

/// Nonnegative importance score per input column.
#[derive(Debug, Clone)]
pub struct ScoreVector<S> {
    gamma: Vec<S>,
    variant: ScoreVariant,
}

impl<S: Scalar> ScoreVector<S> {
    pub fn gamma(&self) -> &[S] {
        &self.gamma
    }

    pub fn variant(&self) -> ScoreVariant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Builds a score vector directly; entries must be nonnegative.
    pub fn from_raw(gamma: Vec<S>, variant: ScoreVariant) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::invalid("gamma", "empty score vector"));
        }
        if gamma.iter().any(|g| !g.is_finite() || *g < S::zero()) {
            return Err(Error::invalid("gamma", "scores must be nonnegative"));
        }
        Ok(ScoreVector { gamma, variant })
    }
}

/// Kept/dropped partition of the input columns of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    kept: Vec<usize>,
    dropped: Vec<usize>,
    ratio: f64,
    d_in: usize,
}

impl PruneMask {
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    /// Rebuilds the mask from a kept-index list (e.g. read from a model
    /// manifest), validating the partition.
    pub fn from_kept(kept: Vec<usize>, d_in: usize, ratio: f64) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::invalid("kept", "kept set must not be empty"));
        }
        let mut seen = vec![false; d_in];
        for &k in &kept {
            if k >= d_in {
                return Err(Error::invalid("kept", format!("index {k} >= d_in {d_in}")));
            }
            if seen[k] {
                return Err(Error::invalid("kept", format!("duplicate index {k}")));
            }
            seen[k] = true;
        }
        let mut sorted = kept;
        sorted.sort_unstable();
        let dropped: Vec<usize> = (0..d_in).filter(|i| !seen[*i]).collect();
        Ok(PruneMask {
            kept: sorted,
            dropped,
            ratio,
            d_in,
        })
    }
}

/// Number of columns (or groups) to drop for width `n` at ratio `rho`.
///
/// Ceiling of `n * rho`, guarded so that products within 1e-9 of an integer
/// are not bumped up by floating-point fuzz.
pub(crate) fn drop_count(n: usize, rho: f64) -> usize {
    let raw = n as f64 * rho;
    let nearest = raw.round();
    if (raw - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

/// Scores every input column of `w` against activations `x` using the
/// population variance.
pub fn score_columns<S: Scalar>(
    w: &Matrix<S>,
    x: &Matrix<S>,
    variant: ScoreVariant,
) -> Result<ScoreVector<S>> {
    score_columns_with(w, x, variant, VarianceMode::Population)
}

/// `score_columns` with an explicit variance estimator.
pub fn score_columns_with<S: Scalar>(
    w: &Matrix<S>,
    x: &Matrix<S>,
    variant: ScoreVariant,
    var_mode: VarianceMode,
) -> Result<ScoreVector<S>> {
    if w.cols() != x.rows() {
        return Err(Error::shape(
            "score_columns",
            format!("weight has {} columns but x has {} rows", w.cols(), x.rows()),
        ));
    }
    let w_col_norms = w.col_norms();
    let x_row_norms = x.row_norms();
    let gamma = match variant {
        ScoreVariant::WandaSp => w_col_norms
            .iter()
            .zip(x_row_norms.iter())
            .map(|(&wn, &xn)| wn * xn)
            .collect(),
        ScoreVariant::VarianceAware => {
            let variances = match var_mode {
                VarianceMode::Population => x.row_variances(),
                VarianceMode::Sample => x.row_variances_sample(),
            };
            w_col_norms
                .iter()
                .zip(x_row_norms.iter())
                .zip(variances.iter())
                .map(|((&wn, &xn), &v)| wn * xn * v)
                .collect()
        }
    };
    ScoreVector::from_raw(gamma, variant)
}

/// Selects the kept/dropped partition for pruning ratio `rho`.
///
/// Ungrouped: drops the `ceil(d_in * rho)` lowest-scoring columns, keeping
/// the lower index on ties. With `groups = Some(g)`, the columns form
/// `d_in / g` contiguous blocks scored by the sum of their members, and the
/// `ceil(G * rho)` lowest-scoring blocks are dropped whole.
pub fn select_mask<S: Scalar>(
    scores: &ScoreVector<S>,
    rho: f64,
    groups: Option<usize>,
) -> Result<PruneMask> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} not in [0, 1)")));
    }
    let d_in = scores.len();
    let gamma = scores.gamma();

    let dropped: Vec<usize> = match groups {
        None => {
            let n_drop = drop_count(d_in, rho);
            // Sort by descending score, ascending index; keep the head.
            let mut order: Vec<usize> = (0..d_in).collect();
            order.sort_by(|&a, &b| {
                gamma[b]
                    .partial_cmp(&gamma[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut dropped: Vec<usize> = order[d_in - n_drop..].to_vec();
            dropped.sort_unstable();
            dropped
        }
        Some(g) => {
            if g == 0 || !d_in.is_multiple_of(g) {
                return Err(Error::invalid(
                    "groups",
                    format!("group size {g} does not evenly divide width {d_in}"),
                ));
            }
            let n_groups = d_in / g;
            let group_scores: Vec<S> = (0..n_groups)
                .map(|gi| gamma[gi * g..(gi + 1) * g].iter().copied().sum())
                .collect();
            let n_drop_groups = drop_count(n_groups, rho);
            // Ascending score, dropping the higher group index on ties so
            // lower indices are kept first, mirroring the column rule.
            let mut order: Vec<usize> = (0..n_groups).collect();
            order.sort_by(|&a, &b| {
                group_scores[a]
                    .partial_cmp(&group_scores[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            });
            let mut dropped = Vec::with_capacity(n_drop_groups * g);
            for &gi in order.iter().take(n_drop_groups) {
                dropped.extend(gi * g..(gi + 1) * g);
            }
            dropped.sort_unstable();
            dropped
        }
    };

    let mut is_dropped = vec![false; d_in];
    for &d in &dropped {
        is_dropped[d] = true;
    }
    let kept: Vec<usize> = (0..d_in).filter(|i| !is_dropped[*i]).collect();
    Ok(PruneMask {
        kept,
        dropped,
        ratio: rho,
        d_in,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(gamma: &[f64]) -> ScoreVector<f64> {
        ScoreVector::from_raw(gamma.to_vec(), ScoreVariant::WandaSp).unwrap()
    }

    #[test]
    fn drop_count_formula() {
        assert_eq!(drop_count(10, 0.3), 3);
        assert_eq!(drop_count(10, 0.0), 0);
        assert_eq!(drop_count(7, 0.1), 1);
        assert_eq!(drop_count(4, 0.5), 2);
        assert_eq!(drop_count(3, 0.33), 1);
        assert_eq!(drop_count(4, 0.9), 4);
    }

    #[test]
    fn constant_row_zeroes_variance_aware_score() {
        let w = Matrix::from_rows(&[&[3.0, 1.0], &[4.0, 1.0]]).unwrap();
        let x = Matrix::from_rows(&[&[7.0, 7.0, 7.0], &[1.0, 2.0, 3.0]]).unwrap();
        let s = score_columns(&w, &x, ScoreVariant::VarianceAware).unwrap();
        assert_eq!(s.gamma()[0], 0.0);
        assert!(s.gamma()[1] > 0.0);
        let w2 = score_columns(&w, &x, ScoreVariant::WandaSp).unwrap();
        assert!(w2.gamma()[0] > 0.0);
    }

    #[test]
    fn zero_weight_column_scores_zero_in_both_variants() {
        let w = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 2.0]]).unwrap();
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 5.0]]).unwrap();
        for variant in [ScoreVariant::VarianceAware, ScoreVariant::WandaSp] {
            let s = score_columns(&w, &x, variant).unwrap();
            assert_eq!(s.gamma()[0], 0.0);
        }
    }

    #[test]
    fn hand_evaluated_example() {
        // w = I2, x rows [1,-1] and [2,-2]:
        //   wanda:          [sqrt(2), 2*sqrt(2)]
        //   variance-aware: [sqrt(2)*1, 2*sqrt(2)*4]
        let w = Matrix::<f64>::identity(2);
        let x = Matrix::from_rows(&[&[1.0, -1.0], &[2.0, -2.0]]).unwrap();
        let wanda = score_columns(&w, &x, ScoreVariant::WandaSp).unwrap();
        let root2 = 2.0f64.sqrt();
        assert!((wanda.gamma()[0] - root2).abs() < 1e-14);
        assert!((wanda.gamma()[1] - 2.0 * root2).abs() < 1e-14);
        let va = score_columns(&w, &x, ScoreVariant::VarianceAware).unwrap();
        assert!((va.gamma()[0] - root2).abs() < 1e-14);
        assert!((va.gamma()[1] - 8.0 * root2).abs() < 1e-13);
    }

    #[test]
    fn score_shape_mismatch() {
        let w = Matrix::<f64>::zeros(2, 3);
        let x = Matrix::<f64>::zeros(2, 4);
        assert!(score_columns(&w, &x, ScoreVariant::WandaSp).is_err());
    }

    #[test]
    fn mask_sizes_follow_ceiling_rule() {
        let s = scores(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        let m = select_mask(&s, 0.3, None).unwrap();
        assert_eq!(m.dropped().len(), 3);
        assert_eq!(m.kept().len(), 7);
        assert_eq!(m.dropped(), &[0, 1, 2]);
    }

    #[test]
    fn rho_zero_keeps_everything() {
        let s = scores(&[5.0, 1.0, 3.0]);
        let m = select_mask(&s, 0.0, None).unwrap();
        assert_eq!(m.kept(), &[0, 1, 2]);
        assert!(m.dropped().is_empty());
    }

    #[test]
    fn top_k_selection() {
        let s = scores(&[5.0, 1.0, 1.0, 9.0]);
        let m = select_mask(&s, 0.5, None).unwrap();
        assert_eq!(m.kept(), &[0, 3]);
        assert_eq!(m.dropped(), &[1, 2]);
    }

    #[test]
    fn ties_keep_lower_index() {
        let s = scores(&[2.0, 2.0, 2.0, 2.0]);
        let m = select_mask(&s, 0.25, None).unwrap();
        assert_eq!(m.dropped(), &[3]);
        assert_eq!(m.kept(), &[0, 1, 2]);
    }

    #[test]
    fn invalid_rho_rejected() {
        let s = scores(&[1.0, 2.0]);
        assert!(select_mask(&s, 1.0, None).is_err());
        assert!(select_mask(&s, -0.1, None).is_err());
    }

    #[test]
    fn grouped_selection_drops_whole_groups() {
        // Groups of 2: sums are [3, 30, 4, 7]; rho=0.5 drops the 2 lowest.
        let s = scores(&[1.0, 2.0, 10.0, 20.0, 1.0, 3.0, 3.0, 4.0]);
        let m = select_mask(&s, 0.5, Some(2)).unwrap();
        assert_eq!(m.dropped(), &[0, 1, 4, 5]);
        assert_eq!(m.kept(), &[2, 3, 6, 7]);
    }

    #[test]
    fn grouped_tie_break_drops_higher_group() {
        let s = scores(&[1.0, 1.0, 1.0, 1.0]);
        let m = select_mask(&s, 0.25, Some(2)).unwrap();
        // Two groups with equal sums; the higher-indexed group goes.
        assert_eq!(m.dropped(), &[2, 3]);
    }

    #[test]
    fn malformed_groups_rejected() {
        let s = scores(&[1.0, 2.0, 3.0]);
        assert!(select_mask(&s, 0.5, Some(2)).is_err());
        assert!(select_mask(&s, 0.5, Some(0)).is_err());
    }

    #[test]
    fn scale_equivariance_of_selection() {
        let s = scores(&[0.3, 9.0, 2.0, 5.5, 0.1]);
        let scaled = scores(&[0.3 * 7.25, 9.0 * 7.25, 2.0 * 7.25, 5.5 * 7.25, 0.1 * 7.25]);
        let a = select_mask(&s, 0.4, None).unwrap();
        let b = select_mask(&scaled, 0.4, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn from_kept_validates_partition() {
        let m = PruneMask::from_kept(vec![2, 0], 4, 0.5).unwrap();
        assert_eq!(m.kept(), &[0, 2]);
        assert_eq!(m.dropped(), &[1, 3]);
        assert!(PruneMask::from_kept(vec![], 4, 0.5).is_err());
        assert!(PruneMask::from_kept(vec![4], 4, 0.5).is_err());
        assert!(PruneMask::from_kept(vec![1, 1], 4, 0.5).is_err());
    }

    #[test]
    fn negative_scores_rejected() {
        assert!(ScoreVector::from_raw(vec![1.0, -0.5], ScoreVariant::WandaSp).is_err());
    }
}
