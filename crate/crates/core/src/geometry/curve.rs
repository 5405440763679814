use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples closer to the axis than this are treated as lying on it.
pub const AXIS_TOL: f64 = 1e-10;

/// Largest |dz/dr| accepted on the first segment leaving the axis.
pub const AXIS_SLOPE_TOL: f64 = 0.2;

/// How the profile closes up when revolved about the z-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    /// z = u(r) with r strictly increasing.
    GraphOverRadius,
    /// Both ends on the axis, or a periodic loop off the axis.
    ClosedLoop,
    /// Starts on the axis, leaves every compact set.
    AxisToInfinity,
    /// Both ends leave every compact set (necks, catenoid-like profiles).
    InfinityToInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nappes {
    Single,
    DoubleSymmetric,
}

/// Cone with link slope `aperture`: z = aperture * r (and its mirror image when
/// double-symmetric).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub aperture: f64,
    pub nappes: Nappes,
}

impl Cone {
    pub fn new(aperture: f64, nappes: Nappes) -> Result<Self> {
        if !aperture.is_finite() {
            return Err(Error::Domain(format!("cone aperture {aperture} is not finite")));
        }
        Ok(Self { aperture, nappes })
    }
}

/// Generating curve of a hypersurface of revolution in R^{n+1}, sampled in the
/// (r, z) half-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    n: usize,
    points: Vec<[f64; 2]>,
    arclength_monotone: bool,
    kind: CurveKind,
}

impl ProfileCurve {
    pub fn new(n: usize, points: Vec<[f64; 2]>, kind: CurveKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::MalformedCurve("rotational dimension must be at least 1".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::MalformedCurve(format!("non-finite sample {i}")));
            }
            if p[0] < -AXIS_TOL {
                return Err(Error::MalformedCurve(format!("negative radius {} at sample {i}", p[0])));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::MalformedCurve(format!("samples {i} and {} coincide", i + 1)));
            }
            if kind == CurveKind::GraphOverRadius && w[1][0] <= w[0][0] {
                return Err(Error::MalformedCurve(format!(
                    "radius not strictly increasing at sample {}",
                    i + 1
                )));
            }
        }
        let len = points.len();
        if len >= 2 {
            for (a, b) in [(0, 1), (len - 1, len - 2)] {
                if points[a][0] <= AXIS_TOL {
                    let dr = (points[b][0] - points[a][0]).abs();
                    let dz = (points[b][1] - points[a][1]).abs();
                    if dz > AXIS_SLOPE_TOL * dr {
                        return Err(Error::MalformedCurve(format!(
                            "curve meets the axis at sample {a} without a horizontal tangent"
                        )));
                    }
                }
            }
        }
        Ok(Self { n, points, arclength_monotone: true, kind })
    }

    /// Graph z = u(r) over the given radii.
    pub fn graph(n: usize, r: &[f64], z: &[f64]) -> Result<Self> {
        if r.len() != z.len() {
            return Err(Error::MalformedCurve("radius and height lengths differ".into()));
        }
        let points = r.iter().zip(z).map(|(&a, &b)| [a, b]).collect();
        Self::new(n, points, CurveKind::GraphOverRadius)
    }

    /// The hyperplane z = 0 sampled on [0, r_max] with `m` segments.
    pub fn hyperplane(n: usize, r_max: f64, m: usize) -> Result<Self> {
        let r: Vec<f64> = (0..=m).map(|i| r_max * i as f64 / m as f64).collect();
        let z = vec![0.0; r.len()];
        Self::graph(n, &r, &z)
    }

    /// Round sphere of radius `rho` centred at the origin, traversed from the
    /// north pole to the south pole with `m` segments.
    pub fn sphere(n: usize, rho: f64, m: usize) -> Result<Self> {
        Self::sphere_at(n, 0.0, rho, m)
    }

    /// Round sphere of radius `rho` centred at (0, z0).
    pub fn sphere_at(n: usize, z0: f64, rho: f64, m: usize) -> Result<Self> {
        let points = (0..=m)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / m as f64;
                let r = if i == 0 || i == m { 0.0 } else { rho * a.sin() };
                [r, z0 + rho * a.cos()]
            })
            .collect();
        Self::new(n, points, CurveKind::ClosedLoop)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn arclength_monotone(&self) -> bool {
        self.arclength_monotone
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn r(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    pub fn z(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[1]).collect()
    }

    /// Cumulative chord length from the first sample.
    pub fn chord_param(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            if i > 0 {
                let q = self.points[i - 1];
                acc += (p[0] - q[0]).hypot(p[1] - q[1]);
            }
            s.push(acc);
        }
        s
    }

    pub fn starts_on_axis(&self) -> bool {
        self.points.first().is_some_and(|p| p[0] <= AXIS_TOL)
    }

    pub fn ends_on_axis(&self) -> bool {
        self.points.last().is_some_and(|p| p[0] <= AXIS_TOL)
    }

    /// True for closed loops that do not touch the axis (tori of revolution).
    pub fn is_periodic(&self) -> bool {
        self.kind == CurveKind::ClosedLoop && !self.starts_on_axis()
    }

    /// Largest |x| over the samples.
    pub fn max_radius(&self) -> f64 {
        self.points.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
    }

    /// Same kind and dimension, new samples.
    pub fn with_points(&self, points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(self.n, points, self.kind)
    }

    /// Mirror image under z -> -z, order preserved.
    pub fn reflected(&self) -> Self {
        Self {
            n: self.n,
            points: self.points.iter().map(|p| [p[0], -p[1]]).collect(),
            arclength_monotone: self.arclength_monotone,
            kind: self.kind,
        }
    }
}

/// Area of the unit sphere S^{k} in R^{k+1}.
pub fn unit_sphere_area(k: usize) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_area(k - 2),
    }
}
