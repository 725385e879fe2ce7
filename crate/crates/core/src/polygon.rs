//! Newton polygons of polynomials over `F_q((t))`.
//!
//! A polynomial `sum_d c_d x^d` contributes a point `(d, val c_d)` for every
//! nonzero coefficient; the lower convex hull of those points splits the
//! roots by valuation. A hull segment of slope `s` and horizontal width `w`
//! accounts for exactly `w` roots of valuation `-s`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolygonError {
    #[error("no points: every coefficient is zero")]
    EmptyInput,
    #[error("degree {0} appears more than once")]
    DuplicateDegree(usize),
}

/// One side of the hull, from `(start, v)` to `(start + width, v + slope*width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub width: usize,
    pub slope: Ratio<i128>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewtonPolygon {
    points: Vec<(usize, i128)>,
    segments: Vec<Segment>,
    source_degree: usize,
}

/// Result of the simplicity check, naming any side wider than 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplicityReport {
    pub simple: bool,
    pub offending: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub slope: [i128; 2],
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolygonJson {
    pub points: Vec<[i128; 2]>,
    pub segments: Vec<SegmentJson>,
    pub simple: bool,
}

/// Cross product of `b - a` and `c - a`; nonpositive means `b` is not
/// strictly below the chord from `a` to `c`.
fn cross(a: (usize, i128), b: (usize, i128), c: (usize, i128)) -> i128 {
    let (ax, ay) = (a.0 as i128, a.1 as i128);
    let (bx, by) = (b.0 as i128, b.1 as i128);
    let (cx, cy) = (c.0 as i128, c.1 as i128);
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

/// Lower convex hull by monotone chain. Points may come in any order; each
/// degree may appear once. Collinear interior points are dropped, so a side
/// through several points is reported once with its full width.
pub fn lower_hull(points: &[(usize, i128)]) -> Result<NewtonPolygon, PolygonError> {
    if points.is_empty() {
        return Err(PolygonError::EmptyInput);
    }
    let mut pts = points.to_vec();
    pts.sort_unstable();
    if let Some(w) = pts.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(PolygonError::DuplicateDegree(w[0].0));
    }
    let mut hull: Vec<(usize, i128)> = Vec::with_capacity(pts.len());
    for &pt in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0 {
            hull.pop();
        }
        hull.push(pt);
    }
    let segments = hull
        .windows(2)
        .map(|w| {
            let width = w[1].0 - w[0].0;
            Segment {
                start: w[0].0,
                width,
                slope: Ratio::new(w[1].1 - w[0].1, width as i128),
            }
        })
        .collect();
    Ok(NewtonPolygon {
        source_degree: pts.last().map_or(0, |p| p.0),
        points: pts,
        segments,
    })
}

impl NewtonPolygon {
    /// Polygon of a polynomial given by coefficient valuations, `None`
    /// marking a zero coefficient.
    pub fn from_valuations(vals: &[Option<i128>]) -> Result<Self, PolygonError> {
        let pts: Vec<(usize, i128)> = vals
            .iter()
            .enumerate()
            .filter_map(|(d, v)| v.map(|v| (d, v)))
            .collect();
        lower_hull(&pts)
    }

    pub fn points(&self) -> &[(usize, i128)] {
        &self.points
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn source_degree(&self) -> usize {
        self.source_degree
    }

    /// Slopes strictly increase along a lower hull.
    pub fn slopes_increasing(&self) -> bool {
        self.segments.windows(2).all(|w| w[0].slope < w[1].slope)
    }

    pub fn to_json(&self) -> PolygonJson {
        PolygonJson {
            points: self.points.iter().map(|&(d, v)| [d as i128, v]).collect(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentJson {
                    slope: [*s.slope.numer(), *s.slope.denom()],
                    width: s.width,
                })
                .collect(),
            simple: simplicity_verdict(self).simple,
        }
    }
}

/// True iff every side has width 1, i.e. all nonzero roots are simple and
/// have pairwise distinct valuations.
pub fn simplicity_verdict(np: &NewtonPolygon) -> SimplicityReport {
    let offending: Vec<Segment> = np.segments.iter().filter(|s| s.width != 1).cloned().collect();
    SimplicityReport {
        simple: offending.is_empty(),
        offending,
    }
}

/// `(valuation, count)` for each side: `count` roots of valuation `-slope`.
pub fn root_valuations(np: &NewtonPolygon) -> Vec<(Ratio<i128>, usize)> {
    np.segments.iter().map(|s| (-s.slope, s.width)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i128, d: i128) -> Ratio<i128> {
        Ratio::new(n, d)
    }

    fn sides(np: &NewtonPolygon) -> Vec<(Ratio<i128>, usize)> {
        np.segments().iter().map(|s| (s.slope, s.width)).collect()
    }

    #[test]
    fn zeta_shaped_hull() {
        let np = lower_hull(&[(0, 0), (1, 1), (2, 6)]).unwrap();
        assert_eq!(sides(&np), vec![(r(1, 1), 1), (r(5, 1), 1)]);
        assert!(simplicity_verdict(&np).simple);
        assert_eq!(root_valuations(&np), vec![(r(-1, 1), 1), (r(-5, 1), 1)]);
    }

    #[test]
    fn zero_first_slope() {
        let np = lower_hull(&[(0, 0), (1, 0)]).unwrap();
        assert_eq!(sides(&np), vec![(r(0, 1), 1)]);
        assert_eq!(root_valuations(&np), vec![(r(0, 1), 1)]);
    }

    #[test]
    fn collinear_points_merge() {
        let np = lower_hull(&[(0, 0), (1, 2), (2, 2)]).unwrap();
        assert_eq!(sides(&np), vec![(r(1, 1), 2)]);
        let report = simplicity_verdict(&np);
        assert!(!report.simple);
        assert_eq!(report.offending.len(), 1);

        let straight = lower_hull(&[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(sides(&straight), vec![(r(1, 1), 2)]);
    }

    #[test]
    fn linear_sign_convention() {
        // 1 + t x has the root -1/t of valuation -1
        let np = NewtonPolygon::from_valuations(&[Some(0), Some(1)]).unwrap();
        assert_eq!(root_valuations(&np), vec![(r(-1, 1), 1)]);
    }

    #[test]
    fn constant_polynomial_is_vacuously_simple() {
        let np = lower_hull(&[(0, 0)]).unwrap();
        assert!(np.segments().is_empty());
        assert!(simplicity_verdict(&np).simple);
        assert!(root_valuations(&np).is_empty());
    }

    #[test]
    fn fractional_slopes_and_gaps() {
        let np = NewtonPolygon::from_valuations(&[Some(0), None, Some(1), Some(5)]).unwrap();
        assert_eq!(sides(&np), vec![(r(1, 2), 2), (r(4, 1), 1)]);
        assert_eq!(np.points().len(), 3);
        assert_eq!(np.source_degree(), 3);
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(lower_hull(&[]), Err(PolygonError::EmptyInput));
        assert_eq!(
            NewtonPolygon::from_valuations(&[None, None]),
            Err(PolygonError::EmptyInput)
        );
        assert_eq!(lower_hull(&[(1, 0), (1, 2)]), Err(PolygonError::DuplicateDegree(1)));
    }

    #[test]
    fn json_shape() {
        let np = lower_hull(&[(0, 0), (2, 1)]).unwrap();
        let json = serde_json::to_value(np.to_json()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "points": [[0, 0], [2, 1]],
                "segments": [{"slope": [1, 2], "width": 2}],
                "simple": false
            })
        );
    }

    fn point_set() -> impl Strategy<Value = Vec<(usize, i128)>> {
        prop::collection::btree_map(0usize..12, -20i128..40, 1..10)
            .prop_map(|m| m.into_iter().collect())
    }

    /// Value of the hull at abscissa `x`, as a rational.
    fn hull_at(np: &NewtonPolygon, x: usize) -> Option<Ratio<i128>> {
        // the lowest degree is always a hull vertex
        let first = np.points().first()?;
        let mut y = Ratio::from_integer(first.1);
        let mut at = first.0;
        if x == at {
            return Some(y);
        }
        for s in np.segments() {
            if x <= s.start + s.width {
                return Some(y + s.slope * Ratio::from_integer((x - at) as i128));
            }
            y += s.slope * Ratio::from_integer(s.width as i128);
            at = s.start + s.width;
        }
        None
    }

    proptest! {
        #[test]
        fn hull_is_convex_and_below_points(pts in point_set()) {
            let np = lower_hull(&pts).unwrap();
            prop_assert!(np.slopes_increasing());
            let width: usize = np.segments().iter().map(|s| s.width).sum();
            prop_assert_eq!(width, pts.last().unwrap().0 - pts[0].0);
            for &(x, v) in &pts {
                let h = hull_at(&np, x).unwrap();
                prop_assert!(h <= Ratio::from_integer(v));
            }
        }

        #[test]
        fn points_above_the_hull_change_nothing(pts in point_set(), lift in 1i128..30) {
            let np = lower_hull(&pts).unwrap();
            let lo = pts[0].0;
            let hi = pts.last().unwrap().0;
            let taken: Vec<usize> = pts.iter().map(|p| p.0).collect();
            if let Some(x) = (lo..=hi).find(|x| !taken.contains(x)) {
                let h = hull_at(&np, x).unwrap();
                let above = h.floor().to_integer() + lift;
                let mut more = pts.clone();
                more.push((x, above));
                let np2 = lower_hull(&more).unwrap();
                prop_assert_eq!(np.segments(), np2.segments());
            }
        }
    }
}
