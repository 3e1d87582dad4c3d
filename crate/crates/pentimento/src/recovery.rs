//! Trend analysis of measured delta series: kernel smoothing and the two
//! bit-recovery classifiers.
//!
//! The burn-window classifier reads a full conditioning trace and keys on
//! the sign of the overall drift. The recovery-window classifier only sees
//! the short post-acquisition window and keys on how fast a route relaxes
//! relative to the rest of the population; it never sees ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{BurnVector, RouteSeries};

/// A measured series stripped of ground truth: all a classifier may see.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesInput {
    pub route_id: u32,
    pub length_ps: f64,
    pub points: Vec<(f64, f64)>,
}

impl From<&RouteSeries> for SeriesInput {
    fn from(s: &RouteSeries) -> Self {
        SeriesInput {
            route_id: s.route_id,
            length_ps: s.length_ps,
            points: s.points.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitVerdict {
    pub route_id: u32,
    pub predicted_bit: bool,
    /// Normalized trend magnitude, clamped to [0, 1].
    pub confidence: f64,
}

/// Default smoothing bandwidth for 200-hour windows.
pub const BURN_BANDWIDTH_HOURS: f64 = 10.0;
/// Default smoothing bandwidth for 25-hour recovery windows.
pub const RECOVERY_BANDWIDTH_HOURS: f64 = 4.0;

/// Local-linear kernel regression with a Gaussian kernel, evaluated at the
/// input grid points.
pub fn kernel_smooth(points: &[(f64, f64)], bandwidth: f64) -> Result<Vec<(f64, f64)>> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "kernel smoothing needs at least 2 points, got {}",
            points.len()
        )));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Contract(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let smoothed = points
        .iter()
        .map(|&(x0, _)| {
            let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &(x, y) in points {
                let d = x - x0;
                let w = (-d * d * inv2h2).exp();
                s0 += w;
                s1 += w * d;
                s2 += w * d * d;
                t0 += w * y;
                t1 += w * d * y;
            }
            let denom = s0 * s2 - s1 * s1;
            // Degenerate local design (all weight on one x): fall back to
            // the weighted mean.
            let v = if denom.abs() > 1e-12 * s0 * s2.max(1e-300) {
                (s2 * t0 - s1 * t1) / denom
            } else {
                t0 / s0
            };
            (x0, v)
        })
        .collect();
    Ok(smoothed)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Classify burn-window series: the smoothed end-to-start difference is
/// positive for a burned 1 (falling delay degrades) and negative for a
/// burned 0. Confidence is the difference magnitude normalized by the
/// median magnitude within the same length class.
pub fn classify_tm1(series: &[SeriesInput]) -> Result<Vec<BitVerdict>> {
    for s in series {
        if s.points.len() < 10 {
            return Err(Error::InsufficientData(format!(
                "route {}: burn-window classification needs >= 10 points, got {}",
                s.route_id,
                s.points.len()
            )));
        }
    }
    let diffs: Result<Vec<f64>> = series
        .iter()
        .map(|s| {
            let sm = kernel_smooth(&s.points, BURN_BANDWIDTH_HOURS)?;
            Ok(sm.last().unwrap().1 - sm.first().unwrap().1)
        })
        .collect();
    let diffs = diffs?;

    Ok(series
        .iter()
        .zip(&diffs)
        .map(|(s, &diff)| {
            let mut class: Vec<f64> = series
                .iter()
                .zip(&diffs)
                .filter(|(o, _)| o.length_ps == s.length_ps)
                .map(|(_, d)| d.abs())
                .collect();
            let scale = median(&mut class);
            let (bit, confidence) = if diff == 0.0 || scale == 0.0 {
                // Degenerate flat series: tie broken toward 0.
                (false, 0.0)
            } else {
                (diff > 0.0, (diff.abs() / scale).clamp(0.0, 1.0))
            };
            BitVerdict {
                route_id: s.route_id,
                predicted_bit: bit,
                confidence,
            }
        })
        .collect())
}

/// Classify recovery-window series. A route that held 1 relaxes quickly
/// once conditioned to 0, so its delta trends down hard; a route that held
/// 0 keeps degrading only at the slow 200-hour tail rate. Trends are
/// normalized by nominal length (drift amplitude scales with length) so the
/// whole population shares one threshold: half the median absolute
/// normalized trend.
pub fn classify_tm2(series: &[SeriesInput]) -> Result<Vec<BitVerdict>> {
    if series.is_empty() {
        return Err(Error::InsufficientData("no series to classify".into()));
    }
    for s in series {
        if s.points.len() < 5 || s.points.len() > 30 {
            return Err(Error::InsufficientData(format!(
                "route {}: recovery-window classification needs 5..=30 points, got {}",
                s.route_id,
                s.points.len()
            )));
        }
    }
    let trends: Result<Vec<f64>> = series
        .iter()
        .map(|s| {
            let sm = kernel_smooth(&s.points, RECOVERY_BANDWIDTH_HOURS)?;
            let raw = sm.last().unwrap().1 - sm.first().unwrap().1;
            Ok(raw * 1000.0 / s.length_ps)
        })
        .collect();
    let trends = trends?;
    let mut mags: Vec<f64> = trends.iter().map(|t| t.abs()).collect();
    let scale = median(&mut mags);
    let threshold = scale / 2.0;

    Ok(series
        .iter()
        .zip(&trends)
        .map(|(s, &u)| {
            let (bit, confidence) = if scale == 0.0 {
                // Zero-trend population: any decrease at all stands out.
                (u < 0.0, if u < 0.0 { 1.0 } else { 0.0 })
            } else {
                (u < -threshold, (u.abs() / (2.0 * scale)).clamp(0.0, 1.0))
            };
            BitVerdict {
                route_id: s.route_id,
                predicted_bit: bit,
                confidence,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub length_ps: f64,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub overall_accuracy: f64,
    pub per_class: Vec<ClassAccuracy>,
    /// confusion[truth][predicted] counts, indices 0/1 by bit value.
    pub confusion: [[usize; 2]; 2],
}

/// Score verdicts against ground truth. `lengths_ps` is aligned with
/// `verdicts` and `truth` by index.
pub fn score(verdicts: &[BitVerdict], lengths_ps: &[f64], truth: &BurnVector) -> Result<ScoreReport> {
    if verdicts.len() != truth.len() || verdicts.len() != lengths_ps.len() {
        return Err(Error::Contract(format!(
            "score inputs misaligned: {} verdicts, {} lengths, {} truth bits",
            verdicts.len(),
            lengths_ps.len(),
            truth.len()
        )));
    }
    let mut confusion = [[0usize; 2]; 2];
    for (v, &t) in verdicts.iter().zip(&truth.0) {
        confusion[t as usize][v.predicted_bit as usize] += 1;
    }
    let correct = confusion[0][0] + confusion[1][1];
    let total = verdicts.len();

    let mut classes: Vec<f64> = lengths_ps.to_vec();
    classes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    classes.dedup();
    let per_class = classes
        .into_iter()
        .map(|length| {
            let idx: Vec<usize> = (0..total).filter(|&i| lengths_ps[i] == length).collect();
            let ok = idx
                .iter()
                .filter(|&&i| verdicts[i].predicted_bit == truth.0[i])
                .count();
            ClassAccuracy {
                length_ps: length,
                correct: ok,
                total: idx.len(),
                accuracy: ok as f64 / idx.len() as f64,
            }
        })
        .collect();

    Ok(ScoreReport {
        overall_accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        per_class,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    fn input(id: u32, length: f64, ys: &[f64]) -> SeriesInput {
        SeriesInput {
            route_id: id,
            length_ps: length,
            points: grid(ys.len()).into_iter().zip(ys.iter().copied()).collect(),
        }
    }

    #[test]
    fn smoothing_reproduces_constants() {
        let pts: Vec<(f64, f64)> = grid(50).into_iter().map(|x| (x, 3.25)).collect();
        let sm = kernel_smooth(&pts, 5.0).unwrap();
        for (x, v) in sm {
            assert!((v - 3.25).abs() < 1e-9, "x={x} v={v}");
        }
    }

    #[test]
    fn smoothing_reproduces_lines() {
        let pts: Vec<(f64, f64)> = grid(80).into_iter().map(|x| (x, 2.0 * x - 7.0)).collect();
        let sm = kernel_smooth(&pts, 6.0).unwrap();
        for (x, v) in sm {
            let want = 2.0 * x - 7.0;
            assert!(
                (v - want).abs() <= 1e-9 * want.abs().max(1.0),
                "x={x} v={v} want={want}"
            );
        }
    }

    #[test]
    fn smoothing_rejects_bad_inputs() {
        assert!(kernel_smooth(&[(0.0, 1.0)], 5.0).is_err());
        assert!(kernel_smooth(&[(0.0, 1.0), (1.0, 2.0)], 0.0).is_err());
        assert!(kernel_smooth(&[(0.0, 1.0), (1.0, 2.0)], -1.0).is_err());
    }

    /// Monte-Carlo against the known clean signal: a small sinusoid in
    /// Gaussian noise must come back with RMSE well below the noise floor.
    #[test]
    fn smoothing_denoises_sinusoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let period = 60.0;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = grid(200)
                .into_iter()
                .map(|x| {
                    let clean = 0.1 * (2.0 * std::f64::consts::PI * x / period).sin();
                    (x, clean + noise.sample(&mut rng))
                })
                .collect();
            let sm = kernel_smooth(&pts, period / 6.0).unwrap();
            let mse: f64 = sm
                .iter()
                .map(|&(x, v)| {
                    let clean = 0.1 * (2.0 * std::f64::consts::PI * x / period).sin();
                    (v - clean) * (v - clean)
                })
                .sum::<f64>()
                / sm.len() as f64;
            worst = worst.max(mse.sqrt());
        }
        assert!(worst < 0.05, "worst RMSE {worst}");
    }

    #[test]
    fn tm1_sign_convention() {
        let up = input(0, 1000.0, &(0..20).map(|i| i as f64 * 0.1).collect::<Vec<_>>());
        let down = input(1, 1000.0, &(0..20).map(|i| -(i as f64) * 0.1).collect::<Vec<_>>());
        let v = classify_tm1(&[up, down]).unwrap();
        assert!(v[0].predicted_bit);
        assert!(!v[1].predicted_bit);
        assert!(v.iter().all(|b| (0.0..=1.0).contains(&b.confidence)));
    }

    #[test]
    fn tm1_requires_ten_points() {
        let short = input(0, 1000.0, &[0.0; 9]);
        assert!(matches!(
            classify_tm1(&[short]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn tm1_flat_series_is_zero_confidence() {
        let flat = input(0, 1000.0, &[0.0; 20]);
        let v = classify_tm1(&[flat]).unwrap();
        assert!(!v[0].predicted_bit);
        assert_eq!(v[0].confidence, 0.0);
    }

    #[test]
    fn tm1_shift_invariant_and_negation_flips() {
        let ys: Vec<f64> = (0..30).map(|i| (i as f64 * 0.07).sqrt()).collect();
        let base = input(0, 1000.0, &ys);
        let shifted = input(
            0,
            1000.0,
            &ys.iter().map(|y| y + 123.0).collect::<Vec<_>>(),
        );
        let negated = input(0, 1000.0, &ys.iter().map(|y| -y).collect::<Vec<_>>());
        let vb = classify_tm1(std::slice::from_ref(&base)).unwrap();
        let vs = classify_tm1(std::slice::from_ref(&shifted)).unwrap();
        let vn = classify_tm1(std::slice::from_ref(&negated)).unwrap();
        assert_eq!(vb[0].predicted_bit, vs[0].predicted_bit);
        assert!((vb[0].confidence - vs[0].confidence).abs() < 1e-9);
        assert_ne!(vb[0].predicted_bit, vn[0].predicted_bit);
    }

    #[test]
    fn tm2_flags_pronounced_decay_against_flat_population() {
        let mut series = Vec::new();
        // One route diving, the rest flat with a whisper of variation.
        series.push(input(
            0,
            1000.0,
            &(0..25).map(|i| -(i as f64) * 0.04).collect::<Vec<_>>(),
        ));
        for id in 1..8 {
            series.push(input(id, 1000.0, &[0.0; 25]));
        }
        let v = classify_tm2(&series).unwrap();
        assert!(v[0].predicted_bit);
        assert!(v[1..].iter().all(|b| !b.predicted_bit));
    }

    #[test]
    fn tm2_window_bounds() {
        let short = input(0, 1000.0, &[0.0; 4]);
        assert!(matches!(
            classify_tm2(&[short]),
            Err(Error::InsufficientData(_))
        ));
        let long = input(0, 1000.0, &[0.0; 31]);
        assert!(matches!(
            classify_tm2(&[long]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(classify_tm2(&[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn tm2_all_flat_population_predicts_zero() {
        let series: Vec<SeriesInput> = (0..6).map(|id| input(id, 1000.0, &[0.0; 25])).collect();
        let v = classify_tm2(&series).unwrap();
        assert!(v.iter().all(|b| !b.predicted_bit && b.confidence == 0.0));
    }

    #[test]
    fn score_all_correct_and_all_flipped() {
        let truth = BurnVector(vec![true, false, true, false]);
        let lengths = [1000.0, 1000.0, 2000.0, 2000.0];
        let right: Vec<BitVerdict> = truth
            .0
            .iter()
            .enumerate()
            .map(|(i, &b)| BitVerdict {
                route_id: i as u32,
                predicted_bit: b,
                confidence: 1.0,
            })
            .collect();
        let report = score(&right, &lengths, &truth).unwrap();
        assert_eq!(report.overall_accuracy, 1.0);
        let wrong: Vec<BitVerdict> = right
            .iter()
            .map(|v| BitVerdict {
                predicted_bit: !v.predicted_bit,
                ..v.clone()
            })
            .collect();
        let report = score(&wrong, &lengths, &truth).unwrap();
        assert_eq!(report.overall_accuracy, 0.0);
        assert_eq!(report.confusion[1][0], 2);
        assert_eq!(report.confusion[0][1], 2);
    }

    /// Half correct on a hand-built 64-route population; per-class counts
    /// checked against a manual tally.
    #[test]
    fn score_half_correct_matches_hand_count() {
        let truth = BurnVector(vec![true; 64]);
        let lengths: Vec<f64> = (0..64)
            .map(|i| [1000.0, 2000.0, 5000.0, 10000.0][i / 16])
            .collect();
        // First 8 of each 16-route class correct, the rest flipped.
        let verdicts: Vec<BitVerdict> = (0..64)
            .map(|i| BitVerdict {
                route_id: i as u32,
                predicted_bit: (i % 16) < 8,
                confidence: 0.5,
            })
            .collect();
        let report = score(&verdicts, &lengths, &truth).unwrap();
        assert_eq!(report.overall_accuracy, 0.5);
        assert_eq!(report.per_class.len(), 4);
        for c in &report.per_class {
            assert_eq!(c.total, 16);
            assert_eq!(c.correct, 8);
            assert_eq!(c.accuracy, 0.5);
        }
        assert_eq!(report.confusion[1][1], 32);
        assert_eq!(report.confusion[1][0], 32);
    }

    #[test]
    fn score_rejects_misaligned_inputs() {
        let truth = BurnVector(vec![true]);
        assert!(score(&[], &[], &truth).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// Affine transforms of the value axis commute with smoothing.
        #[test]
        fn smoothing_commutes_with_affine(
            ys in proptest::collection::vec(-10.0f64..10.0, 10..40),
            a in -3.0f64..3.0,
            b in -50.0f64..50.0,
            bw in 0.5f64..20.0,
        ) {
            let pts: Vec<(f64, f64)> =
                grid(ys.len()).into_iter().zip(ys.iter().copied()).collect();
            let transformed: Vec<(f64, f64)> =
                pts.iter().map(|&(x, y)| (x, a * y + b)).collect();
            let sm = kernel_smooth(&pts, bw).unwrap();
            let smt = kernel_smooth(&transformed, bw).unwrap();
            for (&(_, v), &(_, vt)) in sm.iter().zip(&smt) {
                let want = a * v + b;
                prop_assert!((vt - want).abs() < 1e-6 * want.abs().max(1.0));
            }
        }

        /// Adding a constant to every sample never changes a burn-window
        /// verdict.
        #[test]
        fn tm1_constant_shift_never_changes_verdict(
            ys in proptest::collection::vec(-5.0f64..5.0, 10..40),
            shift in -100.0f64..100.0,
        ) {
            let base = input(0, 1000.0, &ys);
            let shifted = input(
                0,
                1000.0,
                &ys.iter().map(|y| y + shift).collect::<Vec<_>>(),
            );
            let vb = classify_tm1(std::slice::from_ref(&base)).unwrap();
            let vs = classify_tm1(std::slice::from_ref(&shifted)).unwrap();
            prop_assert_eq!(vb[0].predicted_bit, vs[0].predicted_bit);
            prop_assert!((vb[0].confidence - vs[0].confidence).abs() < 1e-7);
        }

        /// Overall accuracy is invariant under a common permutation of the
        /// verdict/length/truth triples.
        #[test]
        fn score_permutation_invariant(
            bits in proptest::collection::vec(any::<bool>(), 4..40),
            seed in any::<u64>(),
        ) {
            let n = bits.len();
            let truth = BurnVector(bits.clone());
            let lengths: Vec<f64> = (0..n).map(|i| ((i % 3) + 1) as f64 * 1000.0).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let verdicts: Vec<BitVerdict> = (0..n)
                .map(|i| BitVerdict {
                    route_id: i as u32,
                    predicted_bit: rng.gen(),
                    confidence: 0.5,
                })
                .collect();
            let base = score(&verdicts, &lengths, &truth).unwrap();

            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let pv: Vec<BitVerdict> = order.iter().map(|&i| verdicts[i].clone()).collect();
            let pl: Vec<f64> = order.iter().map(|&i| lengths[i]).collect();
            let pt = BurnVector(order.iter().map(|&i| bits[i]).collect());
            let perm = score(&pv, &pl, &pt).unwrap();
            prop_assert!((base.overall_accuracy - perm.overall_accuracy).abs() < 1e-12);
            prop_assert_eq!(base.confusion, perm.confusion);
        }
    }
}
