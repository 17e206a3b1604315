//! Fuzzy decision stage.
//!
//! A single crisp input in `[0, 1]` (the network's authenticity score, high
//! meaning "real") is fuzzified against a Fake and a Real membership function.
//! Each firing strength clips the matching output set over the output domain
//! (`IF score is Fake THEN output is Fake`, same for Real), the clipped sets are
//! combined with `max`, and the region's centroid is the crisp output. The
//! final label compares that centroid with a threshold.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Points in the defuzzification grid over `[0, 1]`.
pub const GRID_POINTS: usize = 1001;
pub const HISTOGRAM_BINS: usize = 50;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Piecewise-linear membership function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFunction {
    name: String,
    points: Vec<(f64, f64)>,
}

impl MembershipFunction {
    /// Breakpoints must start at x = 0, end at x = 1, be strictly ascending
    /// in x, and have every degree in `[0, 1]`.
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        let name = name.into();
        let bad = |why: String| {
            Err(Error::Config(format!(
                "membership function `{name}`: {why}"
            )))
        };
        if points.len() < 2 {
            return bad("needs at least two breakpoints".into());
        }
        if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
            return bad("breakpoints must span exactly [0, 1]".into());
        }
        for w in points.windows(2) {
            if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
                return bad(format!(
                    "x values must be strictly ascending ({} then {})",
                    w[0].0, w[1].0
                ));
            }
        }
        if let Some(&(x, mu)) = points.iter().find(|(_, mu)| !(0.0..=1.0).contains(mu)) {
            return bad(format!("degree {mu} at x = {x} outside [0, 1]"));
        }
        Ok(Self { name, points })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Degree of membership by linear interpolation; `x` is clamped to `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let p = &self.points;
        // first breakpoint with x_i >= x
        let i = p.partition_point(|&(xi, _)| xi < x);
        if i == 0 {
            return p[0].1;
        }
        let (x0, y0) = p[i - 1];
        let (x1, y1) = p[i];
        if x == x1 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySetPair {
    pub fake: MembershipFunction,
    pub real: MembershipFunction,
}

impl FuzzySetPair {
    /// Checks that every point of `[0, 1]` belongs to at least one set.
    pub fn new(fake: MembershipFunction, real: MembershipFunction) -> Result<Self> {
        let pair = Self { fake, real };
        if let Some(x) = pair.coverage_gap() {
            return Err(Error::Config(format!("fuzzy sets leave x = {x} uncovered")));
        }
        Ok(pair)
    }

    /// Pair without the coverage check, for probing degenerate set shapes.
    pub fn new_unchecked(fake: MembershipFunction, real: MembershipFunction) -> Self {
        Self { fake, real }
    }

    /// A point where both memberships vanish, if any. Both functions are
    /// linear between the union of their breakpoints, so checking the
    /// breakpoints is exact.
    pub fn coverage_gap(&self) -> Option<f64> {
        let mut xs: Vec<f64> = self
            .fake
            .points
            .iter()
            .chain(&self.real.points)
            .map(|p| p.0)
            .collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.into_iter()
            .find(|&x| self.fake.eval(x) <= 0.0 && self.real.eval(x) <= 0.0)
    }

    /// Mirror-symmetric trapezoids about 0.5: Fake is full below 0.35 and
    /// ramps to zero at 0.65, Real is the reflection.
    pub fn default_sets() -> Self {
        let fake = MembershipFunction::new(
            "fake",
            vec![(0.0, 1.0), (0.35, 1.0), (0.65, 0.0), (1.0, 0.0)],
        )
        .expect("valid default");
        let real = MembershipFunction::new(
            "real",
            vec![(0.0, 0.0), (0.35, 0.0), (0.65, 1.0), (1.0, 1.0)],
        )
        .expect("valid default");
        Self { fake, real }
    }
}

impl Default for FuzzySetPair {
    fn default() -> Self {
        Self::default_sets()
    }
}

fn check_unit(what: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{what} {v} outside [0, 1]")))
    }
}

/// Membership degrees `(μ_fake, μ_real)` of a score.
pub fn fuzzify(score: f64, sets: &FuzzySetPair) -> Result<(f64, f64)> {
    check_unit("score", score)?;
    Ok((sets.fake.eval(score), sets.real.eval(score)))
}

pub fn aggregate(mu_fake: f64, mu_real: f64) -> f64 {
    mu_fake.max(mu_real)
}

/// Centroid of the clipped-and-combined output region, integrated with the
/// trapezoid rule on a 1001-point grid. An all-zero region returns `score`.
pub fn defuzzify(score: f64, sets: &FuzzySetPair) -> Result<f64> {
    let (mu_fake, mu_real) = fuzzify(score, sets)?;
    Ok(centroid(mu_fake, mu_real, sets).unwrap_or(score))
}

fn centroid(mu_fake: f64, mu_real: f64, sets: &FuzzySetPair) -> Option<f64> {
    let last = (GRID_POINTS - 1) as f64;
    let (mut area, mut moment) = (0.0, 0.0);
    for k in 0..GRID_POINTS {
        let y = k as f64 / last;
        let w = if k == 0 || k == GRID_POINTS - 1 {
            0.5
        } else {
            1.0
        };
        let mu = aggregate(
            sets.fake.eval(y).min(mu_fake),
            sets.real.eval(y).min(mu_real),
        );
        area += w * mu;
        moment += w * y * mu;
    }
    (area > 0.0).then(|| (moment / area).clamp(0.0, 1.0))
}

/// `crisp >= threshold` is Real. Confidence is the distance from the
/// threshold scaled so that either end of `[0, 1]` gives 1.
pub fn decide(crisp: f64, threshold: f64) -> (Label, f64) {
    let label = if crisp >= threshold {
        Label::Og
    } else {
        Label::Cg
    };
    let span = threshold.max(1.0 - threshold);
    let confidence = if span > 0.0 {
        (crisp - threshold).abs() / span
    } else {
        0.0
    };
    (label, confidence)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyDecision {
    pub score_in: f64,
    pub mu_fake: f64,
    pub mu_real: f64,
    pub aggregate: f64,
    pub crisp: f64,
    pub label: Label,
    pub confidence: f64,
    pub threshold: f64,
}

pub fn classify(score: f64, sets: &FuzzySetPair, threshold: f64) -> Result<FuzzyDecision> {
    let (mu_fake, mu_real) = fuzzify(score, sets)?;
    let crisp = centroid(mu_fake, mu_real, sets).unwrap_or(score);
    let (label, confidence) = decide(crisp, threshold);
    Ok(FuzzyDecision {
        score_in: score,
        mu_fake,
        mu_real,
        aggregate: aggregate(mu_fake, mu_real),
        crisp,
        label,
        confidence,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchOutput {
    pub decisions: Vec<FuzzyDecision>,
    /// Counts of crisp values in 50 equal bins over `[0, 1]`; empty for an
    /// empty batch.
    pub histogram: Vec<u64>,
}

pub fn classify_batch(scores: &[f64], sets: &FuzzySetPair, threshold: f64) -> Result<BatchOutput> {
    let decisions = scores
        .iter()
        .map(|&s| classify(s, sets, threshold))
        .collect::<Result<Vec<_>>>()?;
    let mut histogram = Vec::new();
    if !decisions.is_empty() {
        histogram = vec![0u64; HISTOGRAM_BINS];
        for d in &decisions {
            let bin = ((d.crisp * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            histogram[bin] += 1;
        }
    }
    Ok(BatchOutput {
        decisions,
        histogram,
    })
}

/// Membership sets plus threshold, as stored in the JSON config file.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyConfig {
    pub sets: FuzzySetPair,
    pub threshold: f64,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            sets: FuzzySetPair::default_sets(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSets {
    fake: Vec<[f64; 2]>,
    real: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    sets: RawSets,
    #[serde(default = "default_threshold")]
    threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl FuzzyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let to_points = |v: Vec<[f64; 2]>| v.into_iter().map(|[x, m]| (x, m)).collect();
        let sets = FuzzySetPair::new(
            MembershipFunction::new("fake", to_points(raw.sets.fake))?,
            MembershipFunction::new("real", to_points(raw.sets.real))?,
        )?;
        check_unit("threshold", raw.threshold).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            sets,
            threshold: raw.threshold,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let pts = |f: &MembershipFunction| f.points.iter().map(|&(x, m)| [x, m]).collect();
        let raw = RawConfig {
            sets: RawSets {
                fake: pts(&self.sets.fake),
                real: pts(&self.sets.real),
            },
            threshold: self.threshold,
        };
        serde_json::to_string_pretty(&raw).expect("serializable")
    }

    pub fn classify(&self, score: f64) -> Result<FuzzyDecision> {
        classify(score, &self.sets, self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Centroid x of a simple polygon by the shoelace formula.
    fn polygon_centroid_x(v: &[(f64, f64)]) -> f64 {
        let (mut a, mut cx) = (0.0, 0.0);
        for i in 0..v.len() {
            let (x0, y0) = v[i];
            let (x1, y1) = v[(i + 1) % v.len()];
            let cross = x0 * y1 - x1 * y0;
            a += cross;
            cx += (x0 + x1) * cross;
        }
        cx / (3.0 * a)
    }

    /// Midpoint-rule centroid on a fine grid, independent of the 1001-point grid.
    fn fine_centroid(mu_fake: f64, mu_real: f64, sets: &FuzzySetPair) -> f64 {
        let n = 400_000;
        let (mut area, mut moment) = (0.0, 0.0);
        for k in 0..n {
            let y = (k as f64 + 0.5) / n as f64;
            let mu = sets
                .fake
                .eval(y)
                .min(mu_fake)
                .max(sets.real.eval(y).min(mu_real));
            area += mu;
            moment += y * mu;
        }
        moment / area
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        assert!(MembershipFunction::new("a", vec![(0.0, 1.0)]).is_err());
        assert!(MembershipFunction::new("a", vec![(0.1, 1.0), (1.0, 0.0)]).is_err());
        assert!(
            MembershipFunction::new("a", vec![(0.0, 1.0), (0.5, 1.0), (0.5, 0.0), (1.0, 0.0)])
                .is_err()
        );
        assert!(MembershipFunction::new("a", vec![(0.0, 1.5), (1.0, 0.0)]).is_err());
        let gap_fake =
            MembershipFunction::new("f", vec![(0.0, 1.0), (0.4, 0.0), (1.0, 0.0)]).unwrap();
        let gap_real =
            MembershipFunction::new("r", vec![(0.0, 0.0), (0.6, 0.0), (1.0, 1.0)]).unwrap();
        assert!(FuzzySetPair::new(gap_fake, gap_real).is_err());
    }

    #[test]
    fn interpolation() {
        let s = FuzzySetPair::default_sets();
        assert_eq!(s.fake.eval(0.2), 1.0);
        assert!((s.fake.eval(0.5) - 0.5).abs() < 1e-12);
        assert!((s.real.eval(0.575) - 0.75).abs() < 1e-12);
        assert_eq!(s.real.eval(2.0), 1.0);
    }

    #[test]
    fn fuzzify_examples() {
        let s = FuzzySetPair::default_sets();
        let (f, r) = fuzzify(0.5, &s).unwrap();
        assert!((f - r).abs() < 1e-12);
        assert_eq!(fuzzify(0.0, &s).unwrap(), (1.0, 0.0));
        assert_eq!(fuzzify(1.0, &s).unwrap(), (0.0, 1.0));
        assert!(fuzzify(1.2, &s).is_err());
        assert!(fuzzify(f64::NAN, &s).is_err());
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(0.2, 0.8), 0.8);
        assert_eq!(aggregate(0.5, 0.5), 0.5);
        assert_eq!(aggregate(0.0, 0.0), 0.0);
    }

    #[test]
    fn balanced_memberships_defuzzify_to_half() {
        let s = FuzzySetPair::default_sets();
        assert!((defuzzify(0.5, &s).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_real_membership_matches_polygon_centroid() {
        let s = FuzzySetPair::default_sets();
        let exact = polygon_centroid_x(&[(0.35, 0.0), (1.0, 0.0), (1.0, 1.0), (0.65, 1.0)]);
        let crisp = defuzzify(1.0, &s).unwrap();
        assert!((crisp - exact).abs() < 1e-5, "{crisp} vs {exact}");
        // mirror image for the fake side
        assert!((defuzzify(0.0, &s).unwrap() - (1.0 - exact)).abs() < 1e-5);
    }

    #[test]
    fn grid_centroid_matches_fine_quadrature() {
        let s = FuzzySetPair::default_sets();
        for score in [0.05, 0.3, 0.41, 0.5, 0.62, 0.77, 0.97] {
            let (f, r) = fuzzify(score, &s).unwrap();
            let crisp = defuzzify(score, &s).unwrap();
            let oracle = fine_centroid(f, r, &s);
            assert!(
                (crisp - oracle).abs() < 1e-5,
                "score {score}: {crisp} vs {oracle}"
            );
        }
    }

    #[test]
    fn empty_region_passes_score_through() {
        let zero = MembershipFunction::new("z", vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let s = FuzzySetPair::new_unchecked(zero.clone(), zero);
        assert_eq!(defuzzify(0.37, &s).unwrap(), 0.37);
    }

    #[test]
    fn decide_examples() {
        let (l, c) = decide(0.9, 0.5);
        assert_eq!(l, Label::Og);
        assert!((c - 0.8).abs() < 1e-12);
        assert_eq!(decide(0.5, 0.5).0, Label::Og);
        assert_eq!(decide(0.1, 0.5).0, Label::Cg);
    }

    #[test]
    fn batch_examples() {
        let s = FuzzySetPair::default_sets();
        let empty = classify_batch(&[], &s, 0.5).unwrap();
        assert!(empty.decisions.is_empty() && empty.histogram.is_empty());
        let ones = classify_batch(&[1.0; 5], &s, 0.5).unwrap();
        assert!(ones.decisions.iter().all(|d| d.label == Label::Og));
        let mixed = [0.1, 0.5, 0.93, 0.0, 0.66];
        let batch = classify_batch(&mixed, &s, 0.5).unwrap();
        for (d, &x) in batch.decisions.iter().zip(&mixed) {
            assert_eq!(d, &classify(x, &s, 0.5).unwrap());
        }
        assert_eq!(batch.histogram.len(), HISTOGRAM_BINS);
        assert_eq!(batch.histogram.iter().sum::<u64>(), 5);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = FuzzyConfig::default();
        let back = FuzzyConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let text = r#"{"sets": {"fake": [[0,1],[0.5,0],[1,0]], "real": [[0,0],[0.5,1],[1,1]]}, "threshold": 0.4}"#;
        let c = FuzzyConfig::from_json(text).unwrap();
        assert_eq!(c.threshold, 0.4);
        let bad = r#"{"sets": {"fake": [[0,1],[1,0]], "real": [[0,0],[1,1]]}, "threshold": 1.4}"#;
        assert!(FuzzyConfig::from_json(bad).is_err());
    }

    #[test]
    fn endpoints_agree_with_plain_threshold() {
        let s = FuzzySetPair::default_sets();
        for (x, want) in [(0.0, Label::Cg), (1.0, Label::Og)] {
            assert_eq!(decide(defuzzify(x, &s).unwrap(), 0.5).0, want);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn crisp_is_bounded_and_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let s = FuzzySetPair::default_sets();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (cl, ch) = (defuzzify(lo, &s).unwrap(), defuzzify(hi, &s).unwrap());
            prop_assert!((0.0..=1.0).contains(&cl) && (0.0..=1.0).contains(&ch));
            prop_assert!(cl <= ch + 1e-12);
            if decide(cl, 0.5).0 == Label::Og {
                prop_assert_eq!(decide(ch, 0.5).0, Label::Og);
            }
        }

        #[test]
        fn crisp_is_symmetric(s in 0.0f64..=1.0) {
            let sets = FuzzySetPair::default_sets();
            let a = defuzzify(s, &sets).unwrap();
            let b = defuzzify(1.0 - s, &sets).unwrap();
            prop_assert!((b - (1.0 - a)).abs() < 1e-9);
        }

        #[test]
        fn decision_fields_are_consistent(s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
            let d = classify(s, &FuzzySetPair::default_sets(), t).unwrap();
            prop_assert!((0.0..=1.0).contains(&d.mu_fake) && (0.0..=1.0).contains(&d.mu_real));
            prop_assert_eq!(d.aggregate, d.mu_fake.max(d.mu_real));
            prop_assert!((0.0..=1.0).contains(&d.confidence));
        }
    }
}
