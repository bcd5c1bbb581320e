//! Piecewise-linear value curves over the SLR axis.
//!
//! A curve is flat at full value up to its initial deadline, falls through a
//! sequence of non-increasing interior points and reaches zero at the final
//! deadline. Both deadlines are stored in the point list as anchors, so
//! interpolation and integration never special-case the boundaries.

use serde::{Deserialize, Serialize};

use crate::error::CurveError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct ValueCurve {
    /// Anchors included: first is `(d_initial, 1.0)`, last is `(d_final, 0.0)`.
    points: Vec<(f64, f64)>,
}

/// On-disk form: interior points only.
#[derive(Serialize, Deserialize)]
struct CurveRepr {
    d_initial: f64,
    d_final: f64,
    points: Vec<[f64; 2]>,
}

impl TryFrom<CurveRepr> for ValueCurve {
    type Error = CurveError;

    fn try_from(r: CurveRepr) -> Result<Self, Self::Error> {
        ValueCurve::new(r.d_initial, r.d_final, r.points.into_iter().map(|[s, f]| (s, f)).collect())
    }
}

impl From<ValueCurve> for CurveRepr {
    fn from(c: ValueCurve) -> Self {
        CurveRepr {
            d_initial: c.d_initial(),
            d_final: c.d_final(),
            points: c.interior().iter().map(|&(s, f)| [s, f]).collect(),
        }
    }
}

impl ValueCurve {
    /// Builds a curve from its deadlines and interior `(slr, factor)` points.
    pub fn new(d_initial: f64, d_final: f64, interior: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        if !(d_initial.is_finite() && d_initial > 1.0) {
            return Err(CurveError::InitialDeadline(d_initial));
        }
        if !(d_final.is_finite() && d_final > d_initial) {
            return Err(CurveError::FinalDeadline { d_initial, d_final });
        }
        let mut prev_slr = d_initial;
        let mut prev_factor = 1.0;
        for (index, &(slr, factor)) in interior.iter().enumerate() {
            if !(slr > d_initial && slr < d_final) {
                return Err(CurveError::PointOutOfRange { index, slr, d_initial, d_final });
            }
            if slr <= prev_slr {
                return Err(CurveError::NotIncreasing { index, slr });
            }
            if !(0.0..=1.0).contains(&factor) {
                return Err(CurveError::FactorRange { index, factor });
            }
            if factor > prev_factor {
                return Err(CurveError::FactorIncreases { index, factor });
            }
            prev_slr = slr;
            prev_factor = factor;
        }
        let mut points = Vec::with_capacity(interior.len() + 2);
        points.push((d_initial, 1.0));
        points.extend(interior);
        points.push((d_final, 0.0));
        Ok(ValueCurve { points })
    }

    pub fn d_initial(&self) -> f64 {
        self.points[0].0
    }

    pub fn d_final(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// All points, anchors included.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn interior(&self) -> &[(f64, f64)] {
        &self.points[1..self.points.len() - 1]
    }

    /// Fraction of full value earned at `slr`, for `d_initial < slr < d_final`.
    ///
    /// Brackets `slr` between the last point at or below it and the next one.
    /// Outside the open interval the result saturates to 1 or 0.
    pub fn factor(&self, slr: f64) -> f64 {
        let count = self.points.partition_point(|&(t, _)| t <= slr);
        if count == 0 {
            return 1.0;
        }
        let low = count - 1;
        if low + 1 >= self.points.len() {
            return 0.0;
        }
        let (t_low, v_low) = self.points[low];
        let (t_high, v_high) = self.points[low + 1];
        let f = v_low + (slr - t_low) / (t_high - t_low) * (v_high - v_low);
        f.clamp(0.0, 1.0)
    }

    /// Value earned by a job worth `vmax` finishing at `slr`.
    ///
    /// Panics if `slr < 1`: no job can finish faster than its critical path.
    pub fn value(&self, vmax: f64, slr: f64) -> f64 {
        assert!(slr >= 1.0, "value curve evaluated at slr {slr} < 1");
        if slr <= self.d_initial() {
            vmax
        } else if slr >= self.d_final() {
            0.0
        } else {
            vmax * self.factor(slr)
        }
    }

    /// Area under the `vmax`-scaled curve from `max(from_slr, 1)` to the final
    /// deadline. Exact: each linear segment is integrated as a trapezoid.
    pub fn remaining_area(&self, vmax: f64, from_slr: f64) -> f64 {
        let from = from_slr.max(1.0);
        let d_final = self.d_final();
        if from >= d_final {
            return 0.0;
        }
        let mut area = 0.0;
        let d_initial = self.d_initial();
        if from < d_initial {
            area += d_initial - from;
        }
        for w in self.points.windows(2) {
            let (t0, f0) = w[0];
            let (t1, f1) = w[1];
            if t1 <= from {
                continue;
            }
            let (lo, f_lo) = if from > t0 {
                (from, f0 + (from - t0) / (t1 - t0) * (f1 - f0))
            } else {
                (t0, f0)
            };
            area += 0.5 * (t1 - lo) * (f_lo + f1);
        }
        vmax * area
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn anchors() -> ValueCurve {
        ValueCurve::new(2.0, 6.0, vec![]).unwrap()
    }

    fn three_point() -> ValueCurve {
        ValueCurve::new(2.0, 6.0, vec![(4.0, 0.5)]).unwrap()
    }

    #[test]
    fn value_examples() {
        let c = anchors();
        assert_eq!(c.value(100.0, 1.5), 100.0);
        assert_eq!(c.value(100.0, 7.0), 0.0);
        assert!((c.value(100.0, 4.0) - 50.0).abs() < 1e-12);
        assert_eq!(c.value(100.0, 6.0), 0.0);
        assert_eq!(c.value(100.0, 2.0), 100.0);
    }

    #[test]
    #[should_panic(expected = "< 1")]
    fn value_below_one_is_a_contract_violation() {
        anchors().value(100.0, 0.99);
    }

    #[test]
    fn factor_examples() {
        let c = three_point();
        assert!((c.factor(3.0) - 0.75).abs() < 1e-12);
        assert!((c.factor(4.0) - 0.5).abs() < 1e-12);
        assert!((anchors().factor(5.0) - 0.25).abs() < 1e-12);
        assert!((anchors().factor(5.0) * 100.0 - anchors().value(100.0, 5.0)).abs() < 1e-12);
    }

    #[test]
    fn remaining_area_examples() {
        let c = anchors();
        assert_eq!(c.remaining_area(100.0, 6.5), 0.0);
        assert!((c.remaining_area(100.0, 4.0) - 50.0).abs() < 1e-9);
        assert!((c.remaining_area(100.0, 1.0) - 300.0).abs() < 1e-9);
        assert!((c.remaining_area(100.0, 0.5) - 300.0).abs() < 1e-9);
    }

    #[test]
    fn construction_rejects_bad_curves() {
        assert!(matches!(ValueCurve::new(1.0, 6.0, vec![]), Err(CurveError::InitialDeadline(_))));
        assert!(matches!(ValueCurve::new(3.0, 3.0, vec![]), Err(CurveError::FinalDeadline { .. })));
        assert!(matches!(
            ValueCurve::new(2.0, 6.0, vec![(6.0, 0.1)]),
            Err(CurveError::PointOutOfRange { .. })
        ));
        assert!(matches!(
            ValueCurve::new(2.0, 6.0, vec![(3.0, 0.5), (3.0, 0.4)]),
            Err(CurveError::NotIncreasing { .. })
        ));
        assert!(matches!(
            ValueCurve::new(2.0, 6.0, vec![(3.0, 0.5), (4.0, 0.6)]),
            Err(CurveError::FactorIncreases { .. })
        ));
        assert!(matches!(
            ValueCurve::new(2.0, 6.0, vec![(3.0, 1.5)]),
            Err(CurveError::FactorRange { .. })
        ));
        // flat segments are allowed
        assert!(ValueCurve::new(2.0, 6.0, vec![(3.0, 0.5), (4.0, 0.5)]).is_ok());
    }

    #[test]
    fn json_form_carries_interior_points_only() {
        let c = three_point();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"d_initial":2.0,"d_final":6.0,"points":[[4.0,0.5]]}"#);
        let back: ValueCurve = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ValueCurve>(r#"{"d_initial":2.0,"d_final":1.5,"points":[]}"#)
            .is_err());
    }

    pub(crate) fn arb_curve() -> impl Strategy<Value = ValueCurve> {
        (1.01f64..5.0, 0.5f64..6.0, prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..10))
            .prop_map(|(d_i, span, raw)| {
                let d_f = d_i + span;
                let mut slrs: Vec<f64> =
                    raw.iter().map(|(u, _)| d_i + (0.001 + 0.998 * u) * span).collect();
                slrs.sort_by(f64::total_cmp);
                slrs.dedup();
                let mut fs: Vec<f64> = raw.iter().map(|(_, f)| *f).take(slrs.len()).collect();
                fs.sort_by(|a, b| b.total_cmp(a));
                ValueCurve::new(d_i, d_f, slrs.into_iter().zip(fs).collect()).unwrap()
            })
    }

    proptest! {
        #[test]
        fn value_is_non_increasing(c in arb_curve(), a in 1.0f64..20.0, b in 1.0f64..20.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.value(10.0, lo) >= c.value(10.0, hi) - 1e-12);
        }

        #[test]
        fn remaining_area_is_non_increasing_and_bounded(c in arb_curve(), a in 1.0f64..20.0, b in 1.0f64..20.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.remaining_area(7.0, lo) >= c.remaining_area(7.0, hi) - 1e-9);
            prop_assert!(c.remaining_area(7.0, 1.0) <= (c.d_final() - 1.0) * 7.0 + 1e-9);
        }

        #[test]
        fn area_derivative_is_minus_value(c in arb_curve(), u in 0.0f64..1.0) {
            let s = 1.0 + u * (c.d_final() - 1.0);
            let h = 1e-6;
            // stay clear of kinks where the one-sided derivatives differ
            let near_kink = c.points().iter().any(|&(t, _)| (t - s).abs() < 4.0 * h);
            prop_assume!(!near_kink && s - h >= 1.0);
            let fd = (c.remaining_area(1.0, s + h) - c.remaining_area(1.0, s - h)) / (2.0 * h);
            let v = c.value(1.0, s);
            prop_assert!((fd + v).abs() <= 1e-4 * v.abs().max(1e-2), "fd {} value {}", fd, v);
        }
    }
}
