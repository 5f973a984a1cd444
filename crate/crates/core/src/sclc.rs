//! Piecewise power-law fitting of I-V sweeps.
//!
//! Each region is a straight line in `(log10 V, log10 I)`; its slope is the
//! conduction exponent `m` in `I ~ V^m`. Slopes near one indicate ohmic
//! conduction, near two trap-free space-charge-limited conduction, and
//! steeper slopes the trap-filled limit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Hrs,
    Lrs,
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HRS" => Ok(Branch::Hrs),
            "LRS" => Ok(Branch::Lrs),
            other => Err(Error::InvalidValue(format!("unknown branch `{other}`"))),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Hrs => "HRS",
            Branch::Lrs => "LRS",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvTrace<T> {
    points: Vec<(T, T)>,
    branch: Branch,
}

impl<T: Scalar> IvTrace<T> {
    pub fn new(points: Vec<(T, T)>, branch: Branch) -> Result<Self> {
        for &(v, i) in &points {
            if !(v > T::zero() && i > T::zero()) {
                return Err(Error::Domain(format!(
                    "log-log fitting needs positive voltage and current, got ({v}, {i})"
                )));
            }
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidValue("voltages must be strictly increasing".into()));
        }
        Ok(Self { points, branch })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn scale_current(&self, c: T) -> Result<Self> {
        Self::new(self.points.iter().map(|&(v, i)| (v, i * c)).collect(), self.branch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conduction {
    Ohmic,
    Sclc,
    Tfl,
    /// Sub-ohmic slope, outside the recognized regimes.
    Unclassified,
}

impl fmt::Display for Conduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Conduction::Ohmic => "ohmic",
            Conduction::Sclc => "sclc",
            Conduction::Tfl => "tfl",
            Conduction::Unclassified => "unclassified",
        })
    }
}

/// Slope thresholds separating the regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub ohmic_min: f64,
    pub ohmic_max: f64,
    pub sclc_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ohmic_min: 0.8,
            ohmic_max: 1.2,
            sclc_max: 2.2,
        }
    }
}

pub fn classify_slope(m: f64, t: &Thresholds) -> Conduction {
    if m < t.ohmic_min {
        Conduction::Unclassified
    } else if m <= t.ohmic_max {
        Conduction::Ohmic
    } else if m <= t.sclc_max {
        Conduction::Sclc
    } else {
        Conduction::Tfl
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFit<T> {
    pub v_range: (T, T),
    /// Index range `[start, end)` into the trace.
    pub points: (usize, usize),
    pub slope: T,
    /// Intercept in log10 amperes.
    pub intercept: T,
    pub r_squared: T,
    pub classification: Conduction,
}

pub fn classify<T: Scalar>(region: &RegionFit<T>, t: &Thresholds) -> Conduction {
    classify_slope(region.slope.to_f64_lossy(), t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Breakpoints<T> {
    /// Split before the first point whose voltage reaches each breakpoint.
    Explicit(Vec<T>),
    /// Search measured voltages for up to `max` breakpoints.
    Auto { max: usize },
}

pub const MIN_SEGMENT_POINTS: usize = 3;

/// Prefix sums for O(1) least-squares fits of any contiguous range.
struct Sums<T> {
    x: Vec<T>,
    y: Vec<T>,
    xx: Vec<T>,
    xy: Vec<T>,
    yy: Vec<T>,
}

struct Line<T> {
    slope: T,
    intercept: T,
    ssr: T,
    sst: T,
    sxx: T,
}

impl<T: Scalar> Sums<T> {
    fn new(xs: &[T], ys: &[T]) -> Self {
        let mut s = Sums {
            x: vec![T::zero()],
            y: vec![T::zero()],
            xx: vec![T::zero()],
            xy: vec![T::zero()],
            yy: vec![T::zero()],
        };
        for (&x, &y) in xs.iter().zip(ys) {
            let k = s.x.len() - 1;
            s.x.push(s.x[k] + x);
            s.y.push(s.y[k] + y);
            s.xx.push(s.xx[k] + x * x);
            s.xy.push(s.xy[k] + x * y);
            s.yy.push(s.yy[k] + y * y);
        }
        s
    }

    fn fit(&self, a: usize, b: usize) -> Line<T> {
        let n = T::from_usize(b - a).unwrap();
        let sx = self.x[b] - self.x[a];
        let sy = self.y[b] - self.y[a];
        let sxx = self.xx[b] - self.xx[a] - sx * sx / n;
        let sxy = self.xy[b] - self.xy[a] - sx * sy / n;
        let syy = self.yy[b] - self.yy[a] - sy * sy / n;
        let slope = sxy / sxx;
        let intercept = (sy - slope * sx) / n;
        let ssr = (syy - slope * sxy).max(T::zero());
        Line {
            slope,
            intercept,
            ssr,
            sst: syy.max(T::zero()),
            sxx,
        }
    }
}

/// Exact two-pass fit used for reported figures.
fn fit_exact<T: Scalar>(xs: &[T], ys: &[T]) -> Line<T> {
    let n = T::from_usize(xs.len()).unwrap();
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: T = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Line {
        slope,
        intercept,
        ssr,
        sst: syy,
        sxx,
    }
}

/// Residual variance floor for model selection (log10 units squared).
const VARIANCE_FLOOR: f64 = 1e-10;

/// Bayesian information criterion for a segmentation with total residual `ssr`.
fn bic(ssr: f64, n: usize, segments: usize) -> f64 {
    let params = 3 * segments - 1;
    let n = n as f64;
    n * (ssr / n).max(VARIANCE_FLOOR).ln() + params as f64 * n.ln()
}

fn log_xy<T: Scalar>(trace: &IvTrace<T>) -> (Vec<T>, Vec<T>) {
    trace.points.iter().map(|&(v, i)| (v.log10(), i.log10())).unzip()
}

/// Total squared residual in log-log space for the given split indices.
pub fn segmentation_residual<T: Scalar>(trace: &IvTrace<T>, splits: &[usize]) -> T {
    let (xs, ys) = log_xy(trace);
    bounds(splits, xs.len())
        .map(|(a, b)| fit_exact(&xs[a..b], &ys[a..b]).ssr)
        .sum()
}

fn bounds(splits: &[usize], n: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    std::iter::once(0)
        .chain(splits.iter().copied())
        .zip(splits.iter().copied().chain(std::iter::once(n)))
}

/// Chooses split indices by minimizing BIC over 0..=max_breaks breakpoints on
/// the measured voltage grid.
fn auto_splits<T: Scalar>(xs: &[T], ys: &[T], max_breaks: usize) -> Vec<usize> {
    let n = xs.len();
    let sums = Sums::new(xs, ys);
    // A regime needs a tenth of the sweep before it can stand on its own.
    let m = MIN_SEGMENT_POINTS.max(n / 10);
    let ssr = |a: usize, b: usize| sums.fit(a, b).ssr.to_f64_lossy();
    let mut best = (bic(ssr(0, n), n, 1), vec![]);
    if max_breaks >= 1 {
        for s in m..=n.saturating_sub(m) {
            let score = bic(ssr(0, s) + ssr(s, n), n, 2);
            if score < best.0 {
                best = (score, vec![s]);
            }
        }
    }
    if max_breaks >= 2 {
        for s1 in m..=n.saturating_sub(2 * m) {
            let head = ssr(0, s1);
            for s2 in s1 + m..=n - m {
                let score = bic(head + ssr(s1, s2) + ssr(s2, n), n, 3);
                if score < best.0 {
                    best = (score, vec![s1, s2]);
                }
            }
        }
    }
    merge_flat(&sums, best.1, n)
}

/// Slopes closer than this many combined standard errors are one regime. Set
/// well above 3 because the split was picked to maximize the difference.
const MERGE_Z: f64 = 5.0;

/// BIC does not account for the search over split positions, so noise can buy
/// a spurious split inside one regime. Drop splits whose neighbouring slopes
/// are statistically indistinguishable, weakest first.
fn merge_flat<T: Scalar>(sums: &Sums<T>, mut splits: Vec<usize>, n: usize) -> Vec<usize> {
    let slope_se = |a: usize, b: usize| {
        let line = sums.fit(a, b);
        let dof = (b - a).saturating_sub(2).max(1) as f64;
        let var = line.ssr.to_f64_lossy() / dof / line.sxx.to_f64_lossy();
        (line.slope.to_f64_lossy(), var.max(0.0))
    };
    loop {
        let segs: Vec<(usize, usize)> = bounds(&splits, n).collect();
        let weakest = segs
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (m1, v1) = slope_se(w[0].0, w[0].1);
                let (m2, v2) = slope_se(w[1].0, w[1].1);
                let se = (v1 + v2).sqrt().max(1e-12);
                (i, (m1 - m2).abs() / se)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match weakest {
            Some((i, z)) if z < MERGE_Z => {
                splits.remove(i);
            }
            _ => return splits,
        }
    }
}

pub fn fit_segments<T: Scalar>(
    trace: &IvTrace<T>,
    breakpoints: &Breakpoints<T>,
    thresholds: &Thresholds,
) -> Result<Vec<RegionFit<T>>> {
    let n = trace.points.len();
    let (xs, ys) = log_xy(trace);
    let splits: Vec<usize> = match breakpoints {
        Breakpoints::Explicit(volts) => {
            let mut s: Vec<usize> = volts
                .iter()
                .map(|&bv| trace.points.iter().position(|&(v, _)| v >= bv).unwrap_or(n))
                .collect();
            s.sort_unstable();
            s.dedup();
            s.retain(|&i| i > 0 && i < n);
            s
        }
        Breakpoints::Auto { max } => {
            if n < MIN_SEGMENT_POINTS {
                return Err(Error::EmptyInput(format!(
                    "need at least {MIN_SEGMENT_POINTS} points, got {n}"
                )));
            }
            auto_splits(&xs, &ys, (*max).min(2))
        }
    };
    bounds(&splits, n)
        .map(|(a, b)| {
            if b - a < MIN_SEGMENT_POINTS {
                return Err(Error::EmptyInput(format!(
                    "segment {:?}..{:?} has {} points, need {MIN_SEGMENT_POINTS}",
                    trace.points.get(a).map(|p| p.0),
                    trace.points.get(b - 1).map(|p| p.0),
                    b - a
                )));
            }
            let line = fit_exact(&xs[a..b], &ys[a..b]);
            let r2 = if line.sst > T::zero() {
                crate::scalar::clamp(T::one() - line.ssr / line.sst, T::zero(), T::one())
            } else {
                T::one()
            };
            Ok(RegionFit {
                v_range: (trace.points[a].0, trace.points[b - 1].0),
                points: (a, b),
                slope: line.slope,
                intercept: line.intercept,
                r_squared: r2,
                classification: classify_slope(line.slope.to_f64_lossy(), thresholds),
            })
        })
        .collect()
}

/// Parses `voltage,current,branch` rows (header optional) into per-branch traces,
/// in order of first appearance.
pub fn parse_iv_csv<T: Scalar>(text: &str) -> Result<Vec<IvTrace<T>>> {
    let mut groups: Vec<(Branch, Vec<(T, T)>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::InvalidValue(format!("line {}: expected 3 columns", lineno + 1)));
        }
        let (Ok(v), Ok(i)) = (cols[0].parse::<f64>(), cols[1].parse::<f64>()) else {
            if lineno == 0 {
                continue;
            }
            return Err(Error::InvalidValue(format!("line {}: non-numeric value", lineno + 1)));
        };
        let branch: Branch = cols[2].parse()?;
        let point = (T::lit(v), T::lit(i));
        match groups.iter_mut().find(|(b, _)| *b == branch) {
            Some((_, pts)) => pts.push(point),
            None => groups.push((branch, vec![point])),
        }
    }
    groups.into_iter().map(|(b, pts)| IvTrace::new(pts, b)).collect()
}

pub fn write_fits_csv<T: Scalar, W: std::io::Write>(
    fits: &[(Branch, Vec<RegionFit<T>>)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "branch,region,v_start,v_end,slope,intercept_log10_a,r_squared,classification")?;
    for (branch, regions) in fits {
        for (k, r) in regions.iter().enumerate() {
            writeln!(
                out,
                "{branch},{},{},{},{},{},{},{}",
                k + 1,
                r.v_range.0,
                r.v_range.1,
                r.slope,
                r.intercept,
                r.r_squared,
                r.classification
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .collect()
    }

    fn power_law(prefactor: f64, m: f64) -> IvTrace<f64> {
        let pts = grid(40, 0.05, 3.0).into_iter().map(|v| (v, prefactor * v.powf(m))).collect();
        IvTrace::new(pts, Branch::Hrs).unwrap()
    }

    #[test]
    fn exact_power_laws_give_one_region() {
        for (pre, m) in [(1e-6, 1.0), (1e-7, 2.0)] {
            let fits = fit_segments(&power_law(pre, m), &Breakpoints::Auto { max: 2 }, &Thresholds::default()).unwrap();
            assert_eq!(fits.len(), 1);
            assert!((fits[0].slope - m).abs() < 0.01);
            assert!((fits[0].r_squared - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn classification_thresholds() {
        let t = Thresholds::default();
        assert_eq!(classify_slope(1.0, &t), Conduction::Ohmic);
        assert_eq!(classify_slope(2.0, &t), Conduction::Sclc);
        assert_eq!(classify_slope(3.7, &t), Conduction::Tfl);
        assert_eq!(classify_slope(0.5, &t), Conduction::Unclassified);
        assert_eq!(classify_slope(1.2, &t), Conduction::Ohmic);
        assert_eq!(classify_slope(2.2, &t), Conduction::Sclc);
    }

    #[test]
    fn explicit_breakpoints_and_errors() {
        let pts: Vec<(f64, f64)> = grid(30, 0.1, 2.0)
            .into_iter()
            .map(|v| (v, if v < 0.5 { 1e-6 * v } else { 1e-6 * 0.5 * (v / 0.5).powf(2.5) }))
            .collect();
        let trace = IvTrace::new(pts, Branch::Lrs).unwrap();
        let fits = fit_segments(&trace, &Breakpoints::Explicit(vec![0.5]), &Thresholds::default()).unwrap();
        assert_eq!(fits.len(), 2);
        assert!((fits[0].slope - 1.0).abs() < 1e-9);
        assert!((fits[1].slope - 2.5).abs() < 1e-9);
        assert_eq!(fits[1].classification, Conduction::Tfl);
        assert!(fit_segments(&trace, &Breakpoints::Explicit(vec![0.105]), &Thresholds::default()).is_err());

        assert!(matches!(IvTrace::new(vec![(0.0, 1.0)], Branch::Hrs), Err(Error::Domain(_))));
        assert!(matches!(IvTrace::new(vec![(1.0, -1.0)], Branch::Hrs), Err(Error::Domain(_))));
        let short = IvTrace::new(vec![(1.0, 1.0), (2.0, 2.0)], Branch::Hrs).unwrap();
        assert!(fit_segments(&short, &Breakpoints::Auto { max: 2 }, &Thresholds::default()).is_err());
    }

    #[test]
    fn noisy_piecewise_recovers_slopes_and_break() {
        let v = grid(60, 0.05, 3.0);
        let mut rng = rng_from_seed(11);
        let pts: Vec<(f64, f64)> = v
            .iter()
            .map(|&x| {
                let i = if x < 0.5 { 1e-6 * x } else { 1e-6 * 0.5 * (x / 0.5).powf(2.5) };
                (x, i * f64::noise_factor(0.02, &mut rng))
            })
            .collect();
        let trace = IvTrace::new(pts, Branch::Hrs).unwrap();
        let fits = fit_segments(&trace, &Breakpoints::Auto { max: 2 }, &Thresholds::default()).unwrap();
        assert_eq!(fits.len(), 2, "{fits:?}");
        assert!((fits[0].slope - 1.0).abs() < 0.05);
        assert!((fits[1].slope - 2.5).abs() < 0.05);
        let truth = v.iter().position(|&x| x >= 0.5).unwrap();
        assert!(fits[1].points.0.abs_diff(truth) <= 1);
    }

    #[test]
    fn csv_parsing_groups_branches() {
        let text = "voltage,current,branch\n0.1,1e-9,HRS\n0.2,2e-9,HRS\n0.1,1e-6,LRS\n0.3,3e-9,hrs\n";
        let traces = parse_iv_csv::<f64>(text).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].branch(), Branch::Hrs);
        assert_eq!(traces[0].points().len(), 3);
        assert!(parse_iv_csv::<f64>("0.1,1e-9,XRS\n").is_err());
        assert!(parse_iv_csv::<f64>("0.2,1e-9,HRS\n0.1,1e-9,HRS\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn noisy_single_regime_is_not_split(seed in any::<u64>(), m in 0.9f64..3.5) {
            let mut rng = rng_from_seed(seed);
            let pts: Vec<(f64, f64)> = grid(60, 0.05, 3.0)
                .into_iter()
                .map(|v| (v, 1e-7 * v.powf(m) * f64::noise_factor(0.02, &mut rng)))
                .collect();
            let trace = IvTrace::new(pts, Branch::Hrs).unwrap();
            let fits = fit_segments(&trace, &Breakpoints::Auto { max: 2 }, &Thresholds::default()).unwrap();
            prop_assert_eq!(fits.len(), 1);
            prop_assert!((fits[0].slope - m).abs() < 0.03);
        }

        #[test]
        fn current_scaling_only_moves_intercepts(seed in any::<u64>(), c in 1e-3f64..1e3) {
            let mut rng = rng_from_seed(seed);
            let pts: Vec<(f64, f64)> = grid(30, 0.05, 3.0)
                .into_iter()
                .map(|v| (v, 1e-7 * v.powf(1.0 + v) * f64::noise_factor(0.05, &mut rng)))
                .collect();
            let trace = IvTrace::new(pts, Branch::Hrs).unwrap();
            let scaled = trace.scale_current(c).unwrap();
            let t = Thresholds::default();
            let a = fit_segments(&trace, &Breakpoints::Auto { max: 2 }, &t).unwrap();
            let b = fit_segments(&scaled, &Breakpoints::Auto { max: 2 }, &t).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.points, y.points);
                prop_assert!((x.slope - y.slope).abs() < 1e-9);
                prop_assert_eq!(x.classification, y.classification);
                prop_assert!((y.intercept - x.intercept - c.log10()).abs() < 1e-9);
            }
        }

        #[test]
        fn auto_residual_never_exceeds_single_fit(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let pts: Vec<(f64, f64)> = grid(25, 0.05, 3.0)
                .into_iter()
                .map(|v| (v, 1e-7 * v.powf(1.5) * f64::noise_factor(0.1, &mut rng)))
                .collect();
            let trace = IvTrace::new(pts, Branch::Hrs).unwrap();
            let fits = fit_segments(&trace, &Breakpoints::Auto { max: 2 }, &Thresholds::default()).unwrap();
            let splits: Vec<usize> = fits.iter().skip(1).map(|f| f.points.0).collect();
            prop_assert!(segmentation_residual(&trace, &splits) <= segmentation_residual(&trace, &[]) + 1e-12);
        }
    }
}
