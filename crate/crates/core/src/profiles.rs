//! Initial conditions: the smooth sine benchmark and the singular wave fronts.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::model::State;
use crate::error::{Error, Result};
use crate::grid::{FieldPair, GridSpec, ScalarField};

/// `u1 = 0.5((2 + π²) + sin(π x))`, `u2 = 0`.
pub fn sine_profile(grid: &GridSpec) -> State {
    let c = 0.5 * (2.0 + PI * PI);
    let u = FieldPair {
        c1: ScalarField::from_fn(*grid, |x, _| c + 0.5 * (PI * x).sin()),
        c2: ScalarField::zeros(*grid),
    };
    State::from_velocity(u, 0.0).expect("sine profile is finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontKind {
    Plate,
    Parallel,
    Star,
}

impl FromStr for FrontKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plate" => Ok(FrontKind::Plate),
            "parallel" => Ok(FrontKind::Parallel),
            "star" => Ok(FrontKind::Star),
            _ => Err(Error::Config(format!("unknown wave front {s:?}"))),
        }
    }
}

impl fmt::Display for FrontKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrontKind::Plate => "plate",
            FrontKind::Parallel => "parallel",
            FrontKind::Star => "star",
        })
    }
}

/// Shape of the speed across the front as a function of distance `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossSection {
    /// `exp(-d/σ)`
    #[default]
    Exponential,
    /// `exp(-d²/σ²)`
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    /// Straight segment from `a` to `b`; the normal points to the right of `a → b`.
    Segment { a: [f64; 2], b: [f64; 2] },
    /// Circular arc covering angles `start .. start + sweep` (radians,
    /// counter-clockwise) around `center`; the normal points away from `center`.
    Arc {
        center: [f64; 2],
        radius: f64,
        start: f64,
        sweep: f64,
    },
}

/// Nearest-point data of a curve relative to a query point.
struct Proximity {
    /// Distance to the curve's carrier line or circle.
    normal_distance: f64,
    /// Arclength by which the foot point lies beyond the curve's ends (0 inside).
    overshoot: f64,
    normal: [f64; 2],
}

impl Curve {
    fn proximity(&self, p: [f64; 2]) -> Proximity {
        match *self {
            Curve::Segment { a, b } => {
                let t = [b[0] - a[0], b[1] - a[1]];
                let len = t[0].hypot(t[1]);
                let t = [t[0] / len, t[1] / len];
                let n = [t[1], -t[0]];
                let r = [p[0] - a[0], p[1] - a[1]];
                let s = r[0] * t[0] + r[1] * t[1];
                Proximity {
                    normal_distance: (r[0] * n[0] + r[1] * n[1]).abs(),
                    overshoot: (-s).max(s - len).max(0.0),
                    normal: n,
                }
            }
            Curve::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let r = [p[0] - center[0], p[1] - center[1]];
                let dist = r[0].hypot(r[1]);
                let normal = if dist > 0.0 {
                    [r[0] / dist, r[1] / dist]
                } else {
                    [0.0, 0.0]
                };
                let rel = (r[1].atan2(r[0]) - start).rem_euclid(2.0 * PI);
                let outside = if rel <= sweep {
                    0.0
                } else {
                    (rel - sweep).min(2.0 * PI - rel)
                };
                Proximity {
                    normal_distance: (dist - radius).abs(),
                    overshoot: outside * radius,
                    normal,
                }
            }
        }
    }

    /// Axis-aligned bounding box `[xmin, xmax, ymin, ymax]` of the curve.
    fn bounds(&self) -> [f64; 4] {
        match *self {
            Curve::Segment { a, b } => [a[0].min(b[0]), a[0].max(b[0]), a[1].min(b[1]), a[1].max(b[1])],
            Curve::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let mut bx = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
                let n = 256;
                for i in 0..=n {
                    let th = start + sweep * i as f64 / n as f64;
                    let (x, y) = (center[0] + radius * th.cos(), center[1] + radius * th.sin());
                    bx = [bx[0].min(x), bx[1].max(x), bx[2].min(y), bx[3].max(y)];
                }
                bx
            }
        }
    }
}

/// One front: a curve carrying velocity `amplitude · profile(d)` along its normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Front {
    pub curve: Curve,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFrontSpec {
    pub kind: FrontKind,
    pub sigma: f64,
    pub amplitude: f64,
    pub cross_section: CrossSection,
    pub fronts: Vec<Front>,
}

/// Default cross-section width.
pub const DEFAULT_SIGMA: f64 = 0.05;

/// Geometry knobs for the three standard layouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontGeometry {
    /// x position of the plate.
    pub plate_x: f64,
    /// Half length of the plate and parallel segments.
    pub half_length: f64,
    /// x positions of the strong (left) and weak (right) parallel fronts.
    pub parallel_x: [f64; 2],
    pub star_arms: usize,
    pub star_ring_radius: f64,
    pub star_arc_radius: f64,
    /// Angular extent of each star arc, degrees.
    pub star_span_deg: f64,
}

impl Default for FrontGeometry {
    fn default() -> Self {
        Self {
            plate_x: -0.3,
            half_length: 0.4,
            parallel_x: [-0.5, -0.1],
            star_arms: 3,
            star_ring_radius: 0.35,
            star_arc_radius: 0.25,
            star_span_deg: 120.0,
        }
    }
}

impl WaveFrontSpec {
    pub fn new(kind: FrontKind, sigma: f64) -> Self {
        Self::with_geometry(kind, sigma, 1.0, &FrontGeometry::default())
    }

    pub fn with_geometry(kind: FrontKind, sigma: f64, amplitude: f64, geo: &FrontGeometry) -> Self {
        let vertical = |x: f64, amp: f64| Front {
            curve: Curve::Segment {
                a: [x, -geo.half_length],
                b: [x, geo.half_length],
            },
            amplitude: amp,
        };
        let fronts = match kind {
            FrontKind::Plate => vec![vertical(geo.plate_x, amplitude)],
            FrontKind::Parallel => vec![
                vertical(geo.parallel_x[0], 2.0 * amplitude),
                vertical(geo.parallel_x[1], amplitude),
            ],
            FrontKind::Star => {
                let span = geo.star_span_deg.to_radians();
                (0..geo.star_arms)
                    .map(|i| {
                        let phi = PI / 2.0 + 2.0 * PI * i as f64 / geo.star_arms as f64;
                        let center = [geo.star_ring_radius * phi.cos(), geo.star_ring_radius * phi.sin()];
                        // The arc bulges along the clockwise tangent of the ring.
                        let facing = phi - PI / 2.0;
                        Front {
                            curve: Curve::Arc {
                                center,
                                radius: geo.star_arc_radius,
                                start: facing - span / 2.0,
                                sweep: span,
                            },
                            amplitude,
                        }
                    })
                    .collect()
            }
        };
        Self {
            kind,
            sigma,
            amplitude,
            cross_section: CrossSection::default(),
            fronts,
        }
    }

    /// Support radius of the normal cutoff.
    pub fn cutoff_radius(&self) -> f64 {
        4.0 * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if self.fronts.is_empty() {
            return Err(Error::invalid("wave front profile has no fronts"));
        }
        let reach = self.cutoff_radius().max(self.sigma);
        for f in &self.fronts {
            if let Curve::Arc { radius, sweep, .. } = f.curve {
                if !(radius > 0.0 && sweep > 0.0 && sweep < 2.0 * PI) {
                    return Err(Error::invalid("arc needs positive radius and a sweep in (0, 2π)"));
                }
            }
            let [x0, x1, y0, y1] = f.curve.bounds();
            if x0 - reach <= -1.0 || x1 + reach >= 1.0 || y0 - reach <= -1.0 || y1 + reach >= 1.0 {
                return Err(Error::invalid(format!(
                    "{} front lies within the cutoff radius {} of the domain boundary",
                    self.kind, reach
                )));
            }
        }
        Ok(())
    }

    /// Velocity at a point.
    pub fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        let rc = self.cutoff_radius();
        let mut v = [0.0, 0.0];
        for f in &self.fronts {
            let prox = f.curve.proximity(p);
            let d = prox.normal_distance;
            if d >= rc || prox.overshoot >= self.sigma {
                continue;
            }
            let across = match self.cross_section {
                CrossSection::Exponential => (-d / self.sigma).exp(),
                CrossSection::Gaussian => (-(d * d) / (self.sigma * self.sigma)).exp(),
            };
            let speed = f.amplitude * across * bump(d / rc) * bump(prox.overshoot / self.sigma);
            v[0] += speed * prox.normal[0];
            v[1] += speed * prox.normal[1];
        }
        v
    }
}

/// `exp(1 - 1/(1 - r²))` on `|r| < 1`, zero outside; equals 1 at the origin.
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// Samples a wave-front profile on `grid`.
pub fn wavefront_profile(spec: &WaveFrontSpec, grid: &GridSpec) -> Result<State> {
    spec.validate()?;
    let mut c1 = Vec::with_capacity(grid.len());
    let mut c2 = Vec::with_capacity(grid.len());
    for j in 0..grid.ny() {
        for k in 0..grid.nx() {
            let v = spec.velocity([grid.x(k), grid.y(j)]);
            c1.push(v[0]);
            c2.push(v[1]);
        }
    }
    let u = FieldPair {
        c1: ScalarField::from_values(*grid, c1)?,
        c2: ScalarField::from_values(*grid, c2)?,
    };
    let ring = boundary_ring_max(&u);
    if ring != 0.0 {
        return Err(Error::invalid(format!(
            "{} profile is nonzero ({ring:e}) on the outer two grid cells",
            spec.kind
        )));
    }
    State::from_velocity(u, 0.0)
}

/// Largest `|U|` component on the outermost two rings of grid points.
pub fn boundary_ring_max(u: &FieldPair) -> f64 {
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let on_ring = |k: usize, j: usize| k < 2 || j < 2 || k + 2 >= nx || j + 2 >= ny;
    let mut m: f64 = 0.0;
    for j in 0..ny {
        for k in 0..nx {
            if on_ring(k, j) {
                m = m
                    .max(u.c1.at(k as isize, j as isize).abs())
                    .max(u.c2.at(k as isize, j as isize).abs());
            }
        }
    }
    m
}
