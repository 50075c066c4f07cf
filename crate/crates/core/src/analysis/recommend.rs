use super::curves::{Metric, MetricCurve};
use crate::error::{Error, Result};
use crate::harness::Method;

/// Best method under a constraint. `value` is the ε reached for an ACL
/// bound, or the ACL reached for an ε bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Recommendation {
    pub method: Method,
    pub value: f64,
}

fn acl_curves(curves: &[MetricCurve]) -> Result<Vec<&MetricCurve>> {
    let acl: Vec<&MetricCurve> = curves
        .iter()
        .filter(|c| c.metric == Metric::Acl && !c.points.is_empty())
        .collect();
    let Some(first) = acl.first() else {
        return Err(Error::InvalidArgument("no ACL curves to recommend from".into()));
    };
    if acl.iter().any(|c| c.dataset != first.dataset) {
        return Err(Error::InvalidArgument(
            "recommendations compare methods on a single dataset".into(),
        ));
    }
    Ok(acl)
}

/// Smallest ε at which the curve's mean ACL first drops to `bound`,
/// interpolated linearly in log ε between grid points.
fn crossing(curve: &MetricCurve, bound: f64) -> Option<f64> {
    let pts = &curve.points;
    let i = pts.iter().position(|p| p.mean <= bound)?;
    if i == 0 {
        return Some(pts[0].epsilon);
    }
    let (a, b) = (&pts[i - 1], &pts[i]);
    let t = (a.mean - bound) / (a.mean - b.mean);
    let (la, lb) = (a.epsilon.log10(), b.epsilon.log10());
    Some(10f64.powf(la + t * (lb - la)))
}

/// The method reaching `acl_bound` at the smallest ε, or `None` when no
/// method gets there within the grid.
pub fn recommend_for_acl(curves: &[MetricCurve], acl_bound: f64) -> Result<Option<Recommendation>> {
    if !acl_bound.is_finite() {
        return Err(Error::InvalidArgument(format!("ACL bound must be finite, got {acl_bound}")));
    }
    let mut best: Option<Recommendation> = None;
    for c in acl_curves(curves)? {
        if let Some(eps) = crossing(c, acl_bound) {
            if best.is_none_or(|b| eps < b.value) {
                best = Some(Recommendation { method: c.method, value: eps });
            }
        }
    }
    Ok(best)
}

/// Mean of the curve at `epsilon`, linear in log ε between grid points.
/// Outside the grid the nearest endpoint is used, with a warning.
pub fn interpolate(curve: &MetricCurve, epsilon: f64) -> Result<f64> {
    let pts = &curve.points;
    let (Some(first), Some(last)) = (pts.first(), pts.last()) else {
        return Err(Error::InvalidArgument("empty curve".into()));
    };
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if epsilon <= first.epsilon || epsilon >= last.epsilon {
        let end = if epsilon <= first.epsilon { first } else { last };
        if epsilon != end.epsilon {
            log::warn!(
                "epsilon {epsilon} is outside the grid [{}, {}] of {} {}; using the endpoint",
                first.epsilon,
                last.epsilon,
                curve.method,
                curve.metric
            );
        }
        return Ok(end.mean);
    }
    let i = pts.partition_point(|p| p.epsilon <= epsilon);
    let (a, b) = (&pts[i - 1], &pts[i]);
    if a.epsilon == epsilon {
        return Ok(a.mean);
    }
    let t = (epsilon.log10() - a.epsilon.log10()) / (b.epsilon.log10() - a.epsilon.log10());
    Ok(a.mean + t * (b.mean - a.mean))
}

/// The method with the lowest interpolated ACL at `eps_bound`.
pub fn recommend_for_eps(curves: &[MetricCurve], eps_bound: f64) -> Result<Recommendation> {
    let mut best: Option<Recommendation> = None;
    for c in acl_curves(curves)? {
        let acl = interpolate(c, eps_bound)?;
        if best.is_none_or(|b| acl < b.value) {
            best = Some(Recommendation { method: c.method, value: acl });
        }
    }
    Ok(best.expect("acl_curves is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::CurvePoint;
    use proptest::prelude::*;

    fn curve(method: Method, points: &[(f64, f64)]) -> MetricCurve {
        MetricCurve {
            dataset: "d".into(),
            method,
            metric: Metric::Acl,
            points: points
                .iter()
                .map(|&(epsilon, mean)| CurvePoint { epsilon, mean, std: 0.0, n: 5 })
                .collect(),
        }
    }

    #[test]
    fn earliest_crossing_wins() {
        let a = curve(Method::S1Gnb, &[(1.0, 0.9), (5.0, 0.05), (10.0, 0.0)]);
        let b = curve(Method::S3Gnb, &[(1.0, 0.9), (5.0, 0.5), (8.0, 0.05), (10.0, 0.0)]);
        let r = recommend_for_acl(&[b, a], 0.05).unwrap().unwrap();
        assert_eq!(r.method, Method::S1Gnb);
        assert!((r.value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_interpolates_in_log_epsilon() {
        let c = curve(Method::S1Gnb, &[(1.0, 0.6), (100.0, 0.2)]);
        let r = recommend_for_acl(&[c], 0.4).unwrap().unwrap();
        assert!((r.value - 10.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_bound() {
        let c = curve(Method::S1Gnb, &[(1.0, 0.9), (10.0, 0.5)]);
        assert_eq!(recommend_for_acl(&[c], 0.1).unwrap(), None);
    }

    #[test]
    fn eps_bound_exact_and_clamped() {
        let a = curve(Method::S1Gnb, &[(1.0, 0.5), (10.0, 0.3)]);
        let b = curve(Method::S3Gnb, &[(1.0, 0.4), (10.0, 0.35)]);
        let r = recommend_for_eps(&[a.clone(), b.clone()], 10.0).unwrap();
        assert_eq!(r, Recommendation { method: Method::S1Gnb, value: 0.3 });
        let r = recommend_for_eps(&[a.clone(), b], 0.01).unwrap();
        assert_eq!(r, Recommendation { method: Method::S3Gnb, value: 0.4 });
        assert!((interpolate(&a, 10f64.sqrt()).unwrap() - 0.4).abs() < 1e-12);
    }

    fn decreasing_curve() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..0.3, 5).prop_map(|steps| {
            let mut m = 1.0;
            steps
                .into_iter()
                .map(|s| {
                    m -= s;
                    m
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn looser_bound_never_raises_epsilon(
            ma in decreasing_curve(),
            mb in decreasing_curve(),
            b1 in -0.5f64..1.0,
            slack in 0.0f64..0.5,
        ) {
            let grid = [0.01, 0.1, 1.0, 10.0, 100.0];
            let mk = |m: Method, v: &[f64]| curve(m, &grid.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>());
            let curves = [mk(Method::S1Gnb, &ma), mk(Method::S3Gnb, &mb)];
            let tight = recommend_for_acl(&curves, b1).unwrap();
            let loose = recommend_for_acl(&curves, b1 + slack).unwrap();
            if let Some(t) = tight {
                let l = loose.expect("a looser bound stays feasible");
                prop_assert!(l.value <= t.value * (1.0 + 1e-12));
            }
        }
    }
}
