//! Manifolds presented by parameter charts over open axis-aligned boxes, and
//! maps defined chart-by-chart on them.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::perturb::{check_image_in_domain, compose};
use crate::diff::{Dual, SmoothMap};
use crate::error::{Error, Result};
use crate::linalg::{dist, singular_values};

#[derive(Debug, Clone)]
pub struct Chart {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub map: SmoothMap,
}

impl Chart {
    pub fn contains(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| x > a && x < b)
    }

    /// Grid step along each axis for `density` cell-centered samples.
    pub fn steps(&self, density: usize) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) / density as f64)
            .collect()
    }

    /// Cell-centered tensor grid with `density` points per axis.
    pub fn grid(&self, density: usize) -> Vec<Vec<f64>> {
        let steps = self.steps(density);
        let n = self.lo.len();
        let total = density.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                (0..n)
                    .map(|axis| {
                        let k = idx % density;
                        idx /= density;
                        self.lo[axis] + (k as f64 + 0.5) * steps[axis]
                    })
                    .collect()
            })
            .collect()
    }
}

/// A point of `N` given in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: usize,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle { m: usize },
    Sphere2 { m: usize },
    NodalCubic { m: usize },
    Spiral { m: usize },
    /// The open cube `(-radius, radius)^m` with the identity chart.
    Box { m: usize, radius: f64 },
}

impl ManifoldKind {
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ManifoldKind::Sphere2 { .. } => 2,
            ManifoldKind::Box { m, .. } => *m,
            _ => 1,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            ManifoldKind::Circle { m }
            | ManifoldKind::Sphere2 { m }
            | ManifoldKind::NodalCubic { m }
            | ManifoldKind::Spiral { m }
            | ManifoldKind::Box { m, .. } => m,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChartedManifold {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub charts: Vec<Chart>,
    pub declared_immersion: bool,
    pub declared_injective: bool,
    pub compact: bool,
    pub sample_density: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifoldCheck {
    pub min_singular_value: f64,
    pub min_image_gap: f64,
}

fn pad(mut v: Vec<Dual>, m: usize) -> Vec<Dual> {
    v.resize(m, Dual::constant(0.0));
    v
}

/// Catalog of representative manifolds with their embeddings into `R^m`.
pub fn chart_atlas(kind: &ManifoldKind) -> Result<ChartedManifold> {
    let m = kind.ambient_dim();
    match kind {
        ManifoldKind::Circle { .. } => {
            if m < 2 {
                return Err(Error::BadDimension(format!("circle needs m >= 2, got {m}")));
            }
            let map = SmoothMap::new("circle", 1, m, move |t: &[Dual]| {
                pad(vec![t[0].cos(), t[0].sin()], m)
            })?;
            Ok(ChartedManifold {
                name: "circle".into(),
                n: 1,
                m,
                charts: vec![
                    Chart { lo: vec![-PI / 2.0 - 0.3], hi: vec![PI / 2.0 + 0.3], map: map.clone() },
                    Chart { lo: vec![PI / 2.0 - 0.3], hi: vec![1.5 * PI + 0.3], map },
                ],
                declared_immersion: true,
                declared_injective: true,
                compact: true,
                sample_density: 64,
            })
        }
        ManifoldKind::Sphere2 { .. } => {
            if m < 3 {
                return Err(Error::BadDimension(format!("sphere2 needs m >= 3, got {m}")));
            }
            // stereographic projections from the north and south poles
            let chart = |sign: f64, label: &str| {
                SmoothMap::new(label, 2, m, move |u: &[Dual]| {
                    let r2 = u[0].square() + u[1].square();
                    let denom = (&r2 + 1.0).recip();
                    let z = (&r2 - 1.0) * sign;
                    pad(vec![&u[0] * &denom * 2.0, &u[1] * &denom * 2.0, z * &denom], m)
                })
            };
            let b = 1.2;
            Ok(ChartedManifold {
                name: "sphere2".into(),
                n: 2,
                m,
                charts: vec![
                    Chart { lo: vec![-b, -b], hi: vec![b, b], map: chart(1.0, "sphere2/north")? },
                    Chart { lo: vec![-b, -b], hi: vec![b, b], map: chart(-1.0, "sphere2/south")? },
                ],
                declared_immersion: true,
                declared_injective: true,
                compact: true,
                sample_density: 24,
            })
        }
        ManifoldKind::NodalCubic { .. } => {
            if m < 2 {
                return Err(Error::BadDimension(format!("nodal cubic needs m >= 2, got {m}")));
            }
            let map = SmoothMap::new("nodal_cubic", 1, m, move |t: &[Dual]| {
                let t2 = t[0].square();
                pad(vec![&t2 - 1.0, &t[0] * &(&t2 - 1.0)], m)
            })?;
            Ok(ChartedManifold {
                name: "nodal_cubic".into(),
                n: 1,
                m,
                charts: vec![Chart { lo: vec![-2.0], hi: vec![2.0], map }],
                declared_immersion: true,
                declared_injective: false,
                compact: false,
                sample_density: 200,
            })
        }
        ManifoldKind::Spiral { .. } => {
            if m < 2 {
                return Err(Error::BadDimension(format!("spiral needs m >= 2, got {m}")));
            }
            // r(t) = 0.3 + 0.15 t is increasing, so the curve is an injective immersion
            let map = SmoothMap::new("spiral", 1, m, move |t: &[Dual]| {
                let r = &t[0] * 0.15 + 0.3;
                pad(vec![&r * &t[0].cos(), &r * &t[0].sin()], m)
            })?;
            Ok(ChartedManifold {
                name: "spiral".into(),
                n: 1,
                m,
                charts: vec![Chart { lo: vec![0.0], hi: vec![4.0 * PI], map }],
                declared_immersion: true,
                declared_injective: true,
                compact: false,
                sample_density: 400,
            })
        }
        ManifoldKind::Box { radius, .. } => {
            if m == 0 || !(*radius > 0.0 && radius.is_finite()) {
                return Err(Error::BadDimension(format!("box needs m >= 1 and radius > 0, got ({m}, {radius})")));
            }
            euclidean_box(vec![-radius; m], vec![*radius; m], if m == 1 { 200 } else { 24 })
        }
    }
}

/// Graph `t -> (t, h(t))` of a user map `h: R -> R^{m-1}` over `(lo, hi)`.
pub fn graph_curve(h: SmoothMap, lo: f64, hi: f64) -> Result<ChartedManifold> {
    if h.domain_dim() != 1 {
        return Err(Error::BadDimension("graph curves need h: R -> R^k".into()));
    }
    let m = h.codomain_dim() + 1;
    let inner = h.clone();
    let map = SmoothMap::new(format!("graph({})", h.label()), 1, m, move |t: &[Dual]| {
        let mut out = vec![t[0].clone()];
        out.extend(inner.eval_dual(t));
        out
    })?;
    Ok(ChartedManifold {
        name: format!("graph({})", h.label()),
        n: 1,
        m,
        charts: vec![Chart { lo: vec![lo], hi: vec![hi], map }],
        declared_immersion: true,
        declared_injective: true,
        compact: false,
        sample_density: 200,
    })
}

/// The open box itself with the identity chart; used to study local models.
pub fn euclidean_box(lo: Vec<f64>, hi: Vec<f64>, density: usize) -> Result<ChartedManifold> {
    let n = lo.len();
    let map = crate::diff::identity(n)?;
    Ok(ChartedManifold {
        name: format!("box({n})"),
        n,
        m: n,
        charts: vec![Chart { lo, hi, map }],
        declared_immersion: true,
        declared_injective: true,
        compact: false,
        sample_density: density,
    })
}

impl ChartedManifold {
    pub fn with_density(mut self, density: usize) -> Self {
        self.sample_density = density;
        self
    }

    pub fn samples(&self) -> Vec<ChartPoint> {
        self.samples_at(self.sample_density)
    }

    pub fn samples_at(&self, density: usize) -> Vec<ChartPoint> {
        self.charts
            .iter()
            .enumerate()
            .flat_map(|(c, chart)| {
                chart
                    .grid(density)
                    .into_iter()
                    .map(move |t| ChartPoint { chart: c, t })
            })
            .collect()
    }

    /// Largest grid step over all charts and axes.
    pub fn grid_step(&self, density: usize) -> f64 {
        self.charts
            .iter()
            .flat_map(|c| c.steps(density))
            .fold(0.0, f64::max)
    }

    pub fn embed(&self, p: &ChartPoint) -> Result<Vec<f64>> {
        self.charts[p.chart].map.evaluate(&p.t)
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        self.charts.get(p.chart).is_some_and(|c| c.contains(&p.t))
    }

    /// Whether two chart points name the same point of `N` up to `radius`.
    ///
    /// Within a chart, parameters are compared; across charts, images are, which
    /// is exact for injective multi-chart atlases (every catalog atlas with more
    /// than one chart is injective).
    pub fn same_point(&self, a: &ChartPoint, b: &ChartPoint, radius: f64) -> bool {
        self.separation(a, b) < radius
    }

    pub fn separation(&self, a: &ChartPoint, b: &ChartPoint) -> f64 {
        if a.chart == b.chart {
            dist(&a.t, &b.t)
        } else {
            match (self.embed(a), self.embed(b)) {
                (Ok(x), Ok(y)) => dist(&x, &y),
                _ => f64::INFINITY,
            }
        }
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ChartPoint {
        let chart = rng.random_range(0..self.charts.len());
        let c = &self.charts[chart];
        let t = c
            .lo
            .iter()
            .zip(&c.hi)
            .map(|(a, b)| {
                let w = b - a;
                // stay a little inside the open box
                a + w * (0.02 + 0.96 * rng.random::<f64>())
            })
            .collect();
        ChartPoint { chart, t }
    }

    /// Grid-resolution check of the declared immersion and injectivity flags.
    pub fn validate(&self) -> Result<ManifoldCheck> {
        let samples = self.samples();
        let mut min_sv = f64::INFINITY;
        let mut max_sv: f64 = 0.0;
        let mut images = Vec::with_capacity(samples.len());
        for p in &samples {
            let (y, jac) = self.charts[p.chart].map.value_and_jacobian(&p.t)?;
            let s = singular_values(&jac);
            min_sv = min_sv.min(s[self.n - 1]);
            max_sv = max_sv.max(s[0]);
            images.push(y);
        }
        if self.declared_immersion && !(min_sv > 1e-8) {
            return Err(Error::InvalidSpec(format!(
                "{} declared an immersion but min singular value is {min_sv:e}",
                self.name
            )));
        }
        let step = self.grid_step(self.sample_density);
        let mut gap = f64::INFINITY;
        for i in 0..samples.len() {
            for j in (i + 1)..samples.len() {
                let (a, b) = (&samples[i], &samples[j]);
                let d = dist(&images[i], &images[j]);
                let neighbours = if a.chart == b.chart {
                    a.t.iter().zip(&b.t).all(|(x, y)| (x - y).abs() <= step * 1.01)
                } else {
                    d <= max_sv * step * (self.n as f64).sqrt()
                };
                if !neighbours {
                    gap = gap.min(d);
                }
            }
        }
        if self.declared_injective && !(gap > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "{} declared injective but two samples share an image",
                self.name
            )));
        }
        Ok(ManifoldCheck {
            min_singular_value: min_sv,
            min_image_gap: gap,
        })
    }
}

/// A map `g: N -> R^l` given by one smooth map per chart of `N`.
#[derive(Debug, Clone)]
pub struct ChartedMap {
    pub manifold: Arc<ChartedManifold>,
    pub pieces: Vec<SmoothMap>,
}

impl ChartedMap {
    /// `g = f`, the embedding itself.
    pub fn from_manifold(manifold: Arc<ChartedManifold>) -> Self {
        let pieces = manifold.charts.iter().map(|c| c.map.clone()).collect();
        ChartedMap { manifold, pieces }
    }

    /// `g = F ∘ f`, with the chart images checked against the domain of `F` on
    /// the sample grid.
    pub fn compose(f: &SmoothMap, manifold: Arc<ChartedManifold>) -> Result<Self> {
        let mut pieces = Vec::with_capacity(manifold.charts.len());
        for chart in &manifold.charts {
            let grid = chart.grid(manifold.sample_density);
            check_image_in_domain(f, &chart.map, grid.iter().map(Vec::as_slice))?;
            pieces.push(compose(f, &chart.map)?);
        }
        Ok(ChartedMap { manifold, pieces })
    }

    /// A single map on an open box, treated as a one-chart manifold.
    pub fn on_box(map: SmoothMap, lo: Vec<f64>, hi: Vec<f64>, density: usize) -> Result<Self> {
        if lo.len() != map.domain_dim() || hi.len() != map.domain_dim() {
            return Err(Error::DimensionMismatch {
                context: "box",
                expected: map.domain_dim(),
                found: lo.len(),
            });
        }
        let manifold = Arc::new(euclidean_box(lo, hi, density)?);
        Ok(ChartedMap { manifold, pieces: vec![map] })
    }

    pub fn n(&self) -> usize {
        self.manifold.n
    }

    pub fn l(&self) -> usize {
        self.pieces[0].codomain_dim()
    }

    pub fn piece(&self, p: &ChartPoint) -> &SmoothMap {
        &self.pieces[p.chart]
    }

    pub fn evaluate(&self, p: &ChartPoint) -> Result<Vec<f64>> {
        self.pieces[p.chart].evaluate(&p.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn circle_samples_lie_on_circle() {
        let c = chart_atlas(&ManifoldKind::Circle { m: 2 }).unwrap();
        for p in c.samples() {
            let y = c.embed(&p).unwrap();
            assert!((y[0] * y[0] + y[1] * y[1] - 1.0).abs() < 1e-14);
        }
        c.validate().unwrap();
    }

    #[test]
    fn sphere_charts_are_immersions_and_cover() {
        let s = chart_atlas(&ManifoldKind::Sphere2 { m: 3 }).unwrap();
        let check = s.validate().unwrap();
        assert!(check.min_singular_value > 0.1);
        assert!(check.min_image_gap > 0.0);
        for p in s.samples() {
            let y = s.embed(&p).unwrap();
            assert!((y.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-14);
        }
        // both poles and the equator are interior to some chart
        let north = ChartPoint { chart: 1, t: vec![0.0, 0.0] };
        let south = ChartPoint { chart: 0, t: vec![0.0, 0.0] };
        assert!((s.embed(&north).unwrap()[2] - 1.0).abs() < 1e-15);
        assert!((s.embed(&south).unwrap()[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn nodal_cubic_double_point() {
        let c = chart_atlas(&ManifoldKind::NodalCubic { m: 2 }).unwrap();
        let a = c.embed(&ChartPoint { chart: 0, t: vec![-1.0] }).unwrap();
        let b = c.embed(&ChartPoint { chart: 0, t: vec![1.0] }).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
        assert_eq!(b, vec![0.0, 0.0]);
        assert!(!c.declared_injective);
    }

    #[test]
    fn embedding_into_higher_dimension_pads_zeros() {
        let c = chart_atlas(&ManifoldKind::Circle { m: 4 }).unwrap();
        let y = c.embed(&ChartPoint { chart: 0, t: vec![0.0] }).unwrap();
        assert_eq!(y, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(chart_atlas(&ManifoldKind::Sphere2 { m: 2 }).is_err());
    }

    #[test]
    fn same_point_across_charts() {
        let c = chart_atlas(&ManifoldKind::Circle { m: 2 }).unwrap();
        let a = ChartPoint { chart: 0, t: vec![PI / 2.0] };
        let b = ChartPoint { chart: 1, t: vec![PI / 2.0] };
        assert!(c.same_point(&a, &b, 1e-9));
        let d = ChartPoint { chart: 0, t: vec![0.0] };
        assert!(!c.same_point(&a, &d, 1e-9));
    }

    #[test]
    fn random_points_inside_boxes() {
        let s = chart_atlas(&ManifoldKind::Sphere2 { m: 3 }).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(s.contains(&s.random_point(&mut rng)));
        }
    }

    #[test]
    fn spiral_is_injective_at_grid_resolution() {
        let s = chart_atlas(&ManifoldKind::Spiral { m: 2 }).unwrap();
        let check = s.validate().unwrap();
        assert!(check.min_image_gap > 0.0);
        assert!(check.min_singular_value >= 0.3 - 1e-12);
    }
}
