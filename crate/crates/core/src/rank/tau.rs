use super::RankError;
use crate::data::GroupedSeries;

/// A tau statistic together with the numerator and denominator it was
/// formed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauResult {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
}

impl TauResult {
    fn from_parts(numerator: f64, denominator: f64) -> Result<Self, RankError> {
        if !(denominator > 0.0) {
            return Err(RankError::Undefined("tau denominator is zero"));
        }
        Ok(Self {
            value: numerator / denominator,
            numerator,
            denominator,
        })
    }
}

/// Hyperbolic rank weight `1 / (1 + r)`.
#[inline]
pub fn hyperbolic(rank: f64) -> f64 {
    1.0 / (1.0 + rank)
}

/// Per-element rank weights: 0-based ranks by decreasing value, so the
/// largest element gets `v(0) = 1`. Tied elements share the mean of `v`
/// over the positions they occupy.
pub fn rank_weights(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mean = (start..end).map(|r| hyperbolic(r as f64)).sum::<f64>() / (end - start) as f64;
        for &i in &order[start..end] {
            out[i] = mean;
        }
        start = end;
    }
    out
}

/// Average ranks (1-based, ascending) with ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

#[inline]
fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), RankError> {
    if x.len() != y.len() {
        return Err(RankError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(RankError::TooShort(x.len()));
    }
    Ok(())
}

/// Pearson's product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, RankError> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(RankError::Undefined("zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, RankError> {
    check_pair(x, y)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

/// Numerator and denominator of the pair sum with the given per-pair
/// weight. Pairs are visited in `i < j` order. Duplicate observations
/// (tied in both x and y) are skipped; pairs tied in one coordinate only
/// count in the denominator.
fn pair_sums(x: &[f64], y: &[f64], weight: impl Fn(usize, usize) -> f64) -> (f64, f64) {
    let n = x.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if x[i] == x[j] && y[i] == y[j] {
                continue;
            }
            let w = weight(i, j);
            num += w * sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
            den += w;
        }
    }
    (num, den)
}

/// Kendall's tau over the `n(n-1)/2` pairs; pairs tied in one coordinate
/// contribute zero to the numerator but stay in the denominator.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<TauResult, RankError> {
    check_pair(x, y)?;
    let (num, den) = pair_sums(x, y, |_, _| 1.0);
    TauResult::from_parts(num, den)
}

fn weighted_sums(x: &[f64], y: &[f64]) -> (f64, f64) {
    let wx = rank_weights(x);
    let wy = rank_weights(y);
    pair_sums(x, y, |i, j| wx[i] + wx[j] + wy[i] + wy[j])
}

/// Weighted Kendall's tau with additive hyperbolic rank weights
/// `w(i,j) = v(rx_i) + v(rx_j) + v(ry_i) + v(ry_j)`.
pub fn weighted_tau(x: &[f64], y: &[f64]) -> Result<TauResult, RankError> {
    check_pair(x, y)?;
    let (num, den) = weighted_sums(x, y);
    TauResult::from_parts(num, den)
}

/// Pair-sum tau with an arbitrary pair weight `weight(i, j)`, `i < j`.
pub fn weighted_tau_with(
    x: &[f64],
    y: &[f64],
    weight: impl Fn(usize, usize) -> f64,
) -> Result<TauResult, RankError> {
    check_pair(x, y)?;
    let (num, den) = pair_sums(x, y, weight);
    TauResult::from_parts(num, den)
}

fn check_groups(g: &GroupedSeries) -> Result<(), RankError> {
    if g.is_empty() {
        return Err(RankError::NoGroups);
    }
    for group in &g.groups {
        if group.x.len() != group.y.len() {
            return Err(RankError::LengthMismatch(group.x.len(), group.y.len()));
        }
        if group.len() < 2 {
            return Err(RankError::UndersizedGroup {
                dataset: group.dataset.clone(),
                len: group.len(),
            });
        }
    }
    Ok(())
}

/// Ratio of the summed per-group weighted-tau numerators to the summed
/// denominators. Ranks are computed within each group, and only pairs
/// inside a group are compared.
pub fn aggregated_weighted_tau(g: &GroupedSeries) -> Result<TauResult, RankError> {
    check_groups(g)?;
    let (mut num, mut den) = (0.0, 0.0);
    for group in &g.groups {
        let (n, d) = weighted_sums(&group.x, &group.y);
        num += n;
        den += d;
    }
    TauResult::from_parts(num, den)
}

/// Unweighted mean of the per-group weighted taus.
pub fn averaged_weighted_tau(g: &GroupedSeries) -> Result<f64, RankError> {
    check_groups(g)?;
    let mut total = 0.0;
    for group in &g.groups {
        total += weighted_tau(&group.x, &group.y)?.value;
    }
    Ok(total / g.len() as f64)
}
