//! Linear-transform view of the Laplace mechanism on the `[sum, count]`
//! vector of data normalized to `[0, 1]`.
//!
//! Adding a record `x` changes `[sum, count]` by `+(x, 1)` and removing one
//! by `-(x, 1)`, so the sensitivity space is the pair of segments
//! `±(x, 1), x ∈ [0, 1]`. A Laplace mechanism applied after an invertible map
//! `T` uses the L1 ball of radius `r = max ‖T (x, 1)‖₁`; pulled back through
//! `T⁻¹` that ball is the parallelogram `T⁻¹ {‖y‖₁ ≤ r}`.

use crate::error::{param, Result};
use crate::mechanisms::{
    clip_unchecked, noisy_ratio, rescale_unit, AggregateKind, AggregateVector, BoundedDataset, MeanEstimate,
    Mechanism, NoisePair, PrivacyBudget,
};
use crate::numeric::compensated_sum;

/// Invertible 2×2 matrix acting on column vectors `(sum, count)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform2x2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Transform2x2 {
    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Result<Self> {
        let t = Self { a11, a12, a21, a22 };
        let det = t.det();
        if !(det.is_finite() && det != 0.0) {
            return param(format!("transform [[{a11}, {a12}], [{a21}, {a22}]] is singular"));
        }
        Ok(t)
    }

    pub const IDENTITY: Self = Self { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0 };

    /// `[[1, -1/2], [0, 1/2]]`: the midpoint shift of the `shifted` mechanism.
    pub const SHIFTED: Self = Self { a11: 1.0, a12: -0.5, a21: 0.0, a22: 0.5 };

    /// `[[1, 0], [-1, 1]]`: maps `(sum, count)` to `(s1, s2)`.
    pub const TRANSFORMED: Self = Self { a11: 1.0, a12: 0.0, a21: -1.0, a22: 1.0 };

    /// The transform whose L1 ball the given mechanism uses.
    pub fn for_mechanism(m: Mechanism) -> Self {
        match m {
            Mechanism::Independent => Self::IDENTITY,
            Mechanism::Shifted => Self::SHIFTED,
            Mechanism::Transformed => Self::TRANSFORMED,
        }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [self.a11 * p[0] + self.a12 * p[1], self.a21 * p[0] + self.a22 * p[1]]
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !(det.is_finite() && det != 0.0) {
            return param("cannot invert a singular transform");
        }
        Ok(Self { a11: self.a22 / det, a12: -self.a12 / det, a21: -self.a21 / det, a22: self.a11 / det })
    }
}

/// The family `±(x, 1)` for `x ∈ [x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivitySegment {
    x_lo: f64,
    x_hi: f64,
}

impl SensitivitySegment {
    pub fn new(x_lo: f64, x_hi: f64) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite() && x_lo <= x_hi) {
            return param(format!("segment [{x_lo}, {x_hi}] is invalid"));
        }
        Ok(Self { x_lo, x_hi })
    }

    /// Normalized data: `x ∈ [0, 1]`.
    pub fn unit() -> Self {
        Self { x_lo: 0.0, x_hi: 1.0 }
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    /// Endpoints plus every interior `x` where a coordinate of `T (x, 1)`
    /// changes sign. `‖T (x, 1)‖₁` is linear between consecutive points.
    pub fn critical_points(&self, t: &Transform2x2) -> Vec<f64> {
        let mut xs = vec![self.x_lo, self.x_hi];
        for (slope, offset) in [(t.a11, t.a12), (t.a21, t.a22)] {
            if slope != 0.0 {
                let root = -offset / slope;
                if root > self.x_lo && root < self.x_hi {
                    xs.push(root);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        xs
    }
}

fn l1(p: [f64; 2]) -> f64 {
    p[0].abs() + p[1].abs()
}

/// `max over x in seg of ‖T (x, 1)‖₁`, evaluated exactly at the endpoints
/// and kinks.
pub fn l1_sensitivity_under(t: &Transform2x2, seg: &SensitivitySegment) -> Result<f64> {
    Transform2x2::new(t.a11, t.a12, t.a21, t.a22)?;
    Ok(seg
        .critical_points(t)
        .into_iter()
        .map(|x| l1(t.apply([x, 1.0])))
        .fold(0.0, f64::max))
}

/// Scale-free size of the ball a transform needs: `r / sqrt(|det T|)`.
///
/// The pulled-back ball has area `2 r² / |det T|`, and any ball covering the
/// unit sensitivity space contains its convex hull, a parallelogram of area
/// 2, so this is at least 1.
pub fn normalized_sensitivity(t: &Transform2x2, seg: &SensitivitySegment) -> Result<f64> {
    Ok(l1_sensitivity_under(t, seg)? / t.det().abs().sqrt())
}

/// A closed convex polygon, vertices in counterclockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPolygon {
    vertices: Vec<[f64; 2]>,
}

impl BallPolygon {
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let (p, q) = (v[i], v[(i + 1) % n]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
            / 2.0
    }

    /// Point-in-polygon with boundary points counted inside (up to a
    /// relative tolerance of `1e-12`).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let v = &self.vertices;
        let n = v.len();
        (0..n).all(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            let scale = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()) * (1.0 + p[0].abs().max(p[1].abs()));
            cross >= -1e-12 * scale
        })
    }

    pub fn is_centrally_symmetric(&self, tol: f64) -> bool {
        self.vertices.iter().all(|v| {
            self.vertices
                .iter()
                .any(|w| (v[0] + w[0]).abs() <= tol && (v[1] + w[1]).abs() <= tol)
        })
    }
}

/// `T⁻¹` applied to the L1 ball of the given radius: vertices
/// `T⁻¹ (r, 0), T⁻¹ (0, r), T⁻¹ (-r, 0), T⁻¹ (0, -r)`, reversed if `T` flips
/// orientation.
pub fn ball_polygon(t: &Transform2x2, radius: f64) -> Result<BallPolygon> {
    if !(radius.is_finite() && radius > 0.0) {
        return param(format!("ball radius must be positive, got {radius}"));
    }
    let inv = t.inverse()?;
    let mut vertices: Vec<[f64; 2]> = [[radius, 0.0], [0.0, radius], [-radius, 0.0], [0.0, -radius]]
        .into_iter()
        .map(|p| inv.apply(p))
        .collect();
    if inv.det() < 0.0 {
        vertices[1..].reverse();
    }
    Ok(BallPolygon { vertices })
}

/// Whether every `±(x, 1)` with `x` in the segment lies in the polygon. By
/// convexity the segment endpoints suffice.
pub fn covers_sensitivity(poly: &BallPolygon, seg: &SensitivitySegment) -> bool {
    [seg.x_lo, seg.x_hi]
        .into_iter()
        .all(|x| poly.contains([x, 1.0]) && poly.contains([-x, -1.0]))
}

/// Maps every value through `x -> (x - l)/(u - l)`; the result is bounded by
/// `[0, 1]`.
pub fn normalize_dataset(d: &BoundedDataset) -> BoundedDataset {
    let (lo, w) = (d.lower(), d.width());
    let values = d.values().iter().map(|x| ((x - lo) / w).clamp(0.0, 1.0)).collect();
    BoundedDataset::new(values, 0.0, 1.0).expect("normalized values lie in [0, 1]")
}

/// Transform, add noise in the transformed coordinates, transform back,
/// then clip the ratio to `[0, 1]` and rescale to `[l, u]`.
///
/// The noise is taken as given; a caller sampling it should use Laplace
/// scale `r / eps` per coordinate with `r = l1_sensitivity_under(t, unit)`.
pub fn transform_procedure_estimate(
    d: &BoundedDataset,
    _eps: PrivacyBudget,
    t: &Transform2x2,
    noise: NoisePair,
) -> Result<MeanEstimate> {
    let inv = t.inverse()?;
    if d.is_empty() {
        return Err(crate::Error::Domain("cannot estimate the mean of an empty dataset".into()));
    }
    let norm = normalize_dataset(d);
    let n = norm.len() as f64;
    let s = compensated_sum(norm.values().iter().copied()).clamp(0.0, n);
    let v = t.apply([s, n]);
    let noisy = [v[0] + noise.za, v[1] + noise.zb];
    let [s_hat, n_hat] = inv.apply(noisy);
    let c = clip_unchecked(noisy_ratio(s_hat, n_hat), 0.0, 1.0);
    Ok(MeanEstimate {
        value: rescale_unit(c, d.lower(), d.upper()),
        mechanism: mechanism_for(t),
        noisy_aggregates: AggregateVector { first: s_hat, second: n_hat, kind: AggregateKind::SumCount },
    })
}

fn mechanism_for(t: &Transform2x2) -> Mechanism {
    if *t == Transform2x2::TRANSFORMED {
        Mechanism::Transformed
    } else if *t == Transform2x2::SHIFTED {
        Mechanism::Shifted
    } else {
        Mechanism::Independent
    }
}

/// Noise for the `shifted` mechanism that reproduces the transform
/// procedure under [`Transform2x2::SHIFTED`] with transformed-space noise
/// `(z_a, z_b)`: shifted-sum noise `w z_a`, count noise `2 z_b`.
///
/// `T⁻¹ = [[1, 1], [0, 2]]` sends `(z_a, z_b)` to `(z_a + z_b, 2 z_b)` on
/// the normalized `(sum, count)`; the shifted sum `sum - count/2` therefore
/// receives `z_a`, which is `w z_a` in data units.
pub fn shifted_coupling(noise: NoisePair, width: f64) -> NoisePair {
    NoisePair { za: width * noise.za, zb: 2.0 * noise.zb }
}
