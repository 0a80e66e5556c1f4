//! Phase space and the map catalog.
//!
//! The phase space is the flat torus `T^d = R^d / Z^d` with `d ∈ {2, 3}`.
//! Tangent spaces are identified with `R^d` by translation, so charts need no
//! exponential map. Distances use the max over coordinates of the circle
//! distance.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{DomlabError, Result};

pub const MAX_DIM: usize = 3;

/// Largest perturbation size admitted by the catalog.
pub const MAX_PERTURBATION: f64 = 0.1;

/// A point of the torus stored by its canonical representative in `[0,1)^d`.
#[derive(Clone, Copy, PartialEq)]
pub struct TorusPoint {
    coords: [f64; MAX_DIM],
    dim: usize,
}

fn canonical(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Circle displacement `x - y` folded into `[-1/2, 1/2)`.
pub fn circle_offset(x: f64, y: f64) -> f64 {
    let d = x - y;
    d - (d + 0.5).floor()
}

impl TorusPoint {
    /// Builds the canonical representative of `coords` (any real values).
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "torus dimension must be 1..=3"
        );
        let mut c = [0.0; MAX_DIM];
        for (dst, &src) in c.iter_mut().zip(coords) {
            *dst = canonical(src);
        }
        TorusPoint {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn origin(dim: usize) -> Self {
        TorusPoint::new(&vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }

    /// Max-coordinate circle distance.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| circle_offset(*a, *b).abs())
            .fold(0.0, f64::max)
    }

    /// Shortest displacement `v` with `self + v = other`.
    pub fn displacement_to(&self, other: &TorusPoint) -> Vec<f64> {
        other
            .coords()
            .iter()
            .zip(self.coords())
            .map(|(b, a)| circle_offset(*b, *a))
            .collect()
    }

    pub fn translate(&self, v: &[f64]) -> TorusPoint {
        let shifted: Vec<f64> = self.coords().iter().zip(v).map(|(a, b)| a + b).collect();
        TorusPoint::new(&shifted)
    }

    /// Lexicographic order on the bit patterns, used to merge atoms.
    pub fn total_cmp(&self, other: &TorusPoint) -> std::cmp::Ordering {
        for (a, b) in self.coords().iter().zip(other.coords()) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim.cmp(&other.dim)
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TorusPoint{:?}", self.coords())
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

/// `df(x)` as a dense `d × d` matrix.
#[derive(Clone, Debug)]
pub struct JacobianMatrix {
    pub entries: DMatrix<f64>,
    pub base_point: TorusPoint,
}

impl JacobianMatrix {
    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }
}

/// The catalog of torus diffeomorphisms.
///
/// * `Identity`: the identity on `T^2` or `T^3`.
/// * `Cat`: `(x, y) ↦ (2x + y, x + y)`.
/// * `PerturbedCat`: the cat map after the area-preserving shear
///   `(x, y) ↦ (x + ε sin(2πy)/(2π), y)`, `|ε| ≤ 0.1`.
/// * `CatCircle`: on `T^3`, the cat map on `(x, y)` and the fibre map
///   `z ↦ z + κ sin(2πx)/(2π)`; the fibre direction is neutral.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Diffeo {
    Identity { dim: usize },
    Cat,
    PerturbedCat { eps: f64 },
    CatCircle { kappa: f64 },
}

/// Name, parameter record and dimension of a catalog map.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiffeoSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub dimension: usize,
}

pub const CATALOG: &[&str] = &["identity", "cat", "perturbed_cat", "cat_circle"];

fn shear(eps: f64, y: f64) -> f64 {
    eps * (2.0 * PI * y).sin() / (2.0 * PI)
}

impl Diffeo {
    /// Resolve a catalog name and parameter record.
    pub fn from_spec(name: &str, params: &BTreeMap<String, f64>) -> Result<Diffeo> {
        let allowed: &[&str] = match name {
            "identity" => &["dim"],
            "cat" => &[],
            "perturbed_cat" => &["eps"],
            "cat_circle" => &["kappa"],
            other => {
                return Err(DomlabError::Config(format!(
                    "unknown map '{other}' (catalog: {})",
                    CATALOG.join(", ")
                )))
            }
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(DomlabError::Config(format!(
                "map '{name}' has no parameter '{bad}'"
            )));
        }
        let map = match name {
            "identity" => {
                let dim = params.get("dim").copied().unwrap_or(2.0);
                if dim != 2.0 && dim != 3.0 {
                    return Err(DomlabError::Config(format!(
                        "identity dimension must be 2 or 3, got {dim}"
                    )));
                }
                Diffeo::Identity { dim: dim as usize }
            }
            "cat" => Diffeo::Cat,
            "perturbed_cat" => {
                let eps = params.get("eps").copied().unwrap_or(0.05);
                if !(eps.abs() <= MAX_PERTURBATION) {
                    return Err(DomlabError::Config(format!(
                        "perturbation eps = {eps} outside [-{MAX_PERTURBATION}, {MAX_PERTURBATION}]"
                    )));
                }
                Diffeo::PerturbedCat { eps }
            }
            _ => {
                let kappa = params.get("kappa").copied().unwrap_or(0.0);
                if !(kappa.abs() <= MAX_PERTURBATION) {
                    return Err(DomlabError::Config(format!(
                        "coupling kappa = {kappa} outside [-{MAX_PERTURBATION}, {MAX_PERTURBATION}]"
                    )));
                }
                Diffeo::CatCircle { kappa }
            }
        };
        Ok(map)
    }

    pub fn spec(&self) -> DiffeoSpec {
        let (name, params): (&str, Vec<(&str, f64)>) = match self {
            Diffeo::Identity { dim } => ("identity", vec![("dim", *dim as f64)]),
            Diffeo::Cat => ("cat", vec![]),
            Diffeo::PerturbedCat { eps } => ("perturbed_cat", vec![("eps", *eps)]),
            Diffeo::CatCircle { kappa } => ("cat_circle", vec![("kappa", *kappa)]),
        };
        DiffeoSpec {
            name: name.to_string(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            dimension: self.dim(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Diffeo::Identity { dim } => *dim,
            Diffeo::Cat | Diffeo::PerturbedCat { .. } => 2,
            Diffeo::CatCircle { .. } => 3,
        }
    }

    /// True when the Jacobian does not depend on the point.
    pub fn is_linear(&self) -> bool {
        match self {
            Diffeo::Identity { .. } | Diffeo::Cat => true,
            Diffeo::PerturbedCat { eps } => *eps == 0.0,
            Diffeo::CatCircle { kappa } => *kappa == 0.0,
        }
    }

    /// True when the map preserves Lebesgue measure. Every catalog map does.
    pub fn preserves_volume(&self) -> bool {
        true
    }

    fn check_dim(&self, x: &[f64]) {
        assert_eq!(x.len(), self.dim(), "point dimension does not match the map");
    }

    /// The lift `R^d → R^d` (no reduction mod 1).
    pub fn lift(&self, x: &[f64]) -> [f64; MAX_DIM] {
        self.check_dim(x);
        let mut out = [0.0; MAX_DIM];
        match self {
            Diffeo::Identity { dim } => out[..*dim].copy_from_slice(x),
            Diffeo::Cat => {
                out[0] = 2.0 * x[0] + x[1];
                out[1] = x[0] + x[1];
            }
            Diffeo::PerturbedCat { eps } => {
                let u = x[0] + shear(*eps, x[1]);
                out[0] = 2.0 * u + x[1];
                out[1] = u + x[1];
            }
            Diffeo::CatCircle { kappa } => {
                out[0] = 2.0 * x[0] + x[1];
                out[1] = x[0] + x[1];
                out[2] = x[2] + shear(*kappa, x[0]);
            }
        }
        out
    }

    /// The lift of the inverse map.
    pub fn lift_inverse(&self, x: &[f64]) -> [f64; MAX_DIM] {
        self.check_dim(x);
        let mut out = [0.0; MAX_DIM];
        match self {
            Diffeo::Identity { dim } => out[..*dim].copy_from_slice(x),
            Diffeo::Cat => {
                out[0] = x[0] - x[1];
                out[1] = -x[0] + 2.0 * x[1];
            }
            Diffeo::PerturbedCat { eps } => {
                let u = x[0] - x[1];
                let v = -x[0] + 2.0 * x[1];
                out[0] = u - shear(*eps, v);
                out[1] = v;
            }
            Diffeo::CatCircle { kappa } => {
                let u = x[0] - x[1];
                out[0] = u;
                out[1] = -x[0] + 2.0 * x[1];
                out[2] = x[2] - shear(*kappa, u);
            }
        }
        out
    }

    /// `f(x)`.
    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        let y = self.lift(x.coords());
        TorusPoint::new(&y[..self.dim()])
    }

    /// `f⁻¹(x)` in closed form.
    pub fn apply_inverse(&self, x: &TorusPoint) -> TorusPoint {
        let y = self.lift_inverse(x.coords());
        TorusPoint::new(&y[..self.dim()])
    }

    /// `f^n(x)`; `n = 0` returns `x`.
    pub fn iterate(&self, x: &TorusPoint, n: usize) -> TorusPoint {
        (0..n).fold(*x, |p, _| self.apply(&p))
    }

    /// Orbit segment `x, f(x), …, f^{n-1}(x)`.
    pub fn orbit(&self, x: &TorusPoint, n: usize) -> Vec<TorusPoint> {
        let mut out = Vec::with_capacity(n);
        let mut p = *x;
        for _ in 0..n {
            out.push(p);
            p = self.apply(&p);
        }
        out
    }

    /// Analytic Jacobian of the lift at `x`.
    pub fn jacobian_at(&self, x: &[f64]) -> DMatrix<f64> {
        self.check_dim(x);
        match self {
            Diffeo::Identity { dim } => DMatrix::identity(*dim, *dim),
            Diffeo::Cat => DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]),
            Diffeo::PerturbedCat { eps } => {
                let c = eps * (2.0 * PI * x[1]).cos();
                DMatrix::from_row_slice(2, 2, &[2.0, 2.0 * c + 1.0, 1.0, c + 1.0])
            }
            Diffeo::CatCircle { kappa } => {
                let c = kappa * (2.0 * PI * x[0]).cos();
                DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 1.0, 0.0, c, 0.0, 1.0])
            }
        }
    }

    pub fn jacobian(&self, x: &TorusPoint) -> JacobianMatrix {
        JacobianMatrix {
            entries: self.jacobian_at(x.coords()),
            base_point: *x,
        }
    }

    /// `df⁻¹(y) = df(f⁻¹(y))⁻¹`.
    pub fn inverse_jacobian(&self, y: &TorusPoint) -> DMatrix<f64> {
        let x = self.apply_inverse(y);
        self.jacobian_at(x.coords())
            .try_inverse()
            .expect("catalog Jacobians are invertible")
    }

    /// `df^n(x)` as a product of Jacobians along the orbit.
    pub fn jacobian_power(&self, x: &TorusPoint, n: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::identity(d, d);
        let mut p = *x;
        for _ in 0..n {
            m = self.jacobian_at(p.coords()) * m;
            p = self.apply(&p);
        }
        m
    }

    /// Local representative of `f` around `x`:
    /// `v ↦ lift(x + v) − lift(x)`, a displacement at `f(x)`.
    pub fn local_map(&self, x: &TorusPoint, v: &[f64]) -> Vec<f64> {
        let base = self.lift(x.coords());
        let moved: Vec<f64> = x.coords().iter().zip(v).map(|(a, b)| a + b).collect();
        let image = self.lift(&moved);
        (0..self.dim()).map(|i| image[i] - base[i]).collect()
    }
}

/// Inverts `map` at `target` by Newton's method on the lift, starting from
/// the inverse of the linear part. Used for maps without a closed-form
/// inverse and as an independent check of [`Diffeo::apply_inverse`].
pub fn newton_inverse(map: &Diffeo, target: &TorusPoint) -> Result<TorusPoint> {
    const MAX_STEPS: usize = 100;
    let d = map.dim();
    let linear = match map {
        Diffeo::PerturbedCat { .. } => Diffeo::Cat,
        Diffeo::CatCircle { .. } => Diffeo::CatCircle { kappa: 0.0 },
        other => other.clone(),
    };
    let mut x: Vec<f64> = linear.lift_inverse(target.coords())[..d].to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_STEPS {
        let y = map.lift(&x);
        let r: Vec<f64> = (0..d)
            .map(|i| circle_offset(y[i], target.coords()[i]))
            .collect();
        residual = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if residual < 1e-15 {
            return Ok(TorusPoint::new(&x));
        }
        let j = map.jacobian_at(&x);
        let step = j
            .lu()
            .solve(&nalgebra::DVector::from_vec(r))
            .ok_or_else(|| DomlabError::Numerical("singular Jacobian in newton_inverse".into()))?;
        for i in 0..d {
            x[i] -= step[i];
        }
    }
    if residual < 1e-13 {
        return Ok(TorusPoint::new(&x));
    }
    Err(DomlabError::NewtonDiverged {
        iterations: MAX_STEPS,
        residual,
    })
}

/// Central finite-difference Jacobian of the lift.
pub fn finite_difference_jacobian(map: &Diffeo, x: &[f64], h: f64) -> DMatrix<f64> {
    let d = map.dim();
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let fp = map.lift(&xp);
        let fm = map.lift(&xm);
        for i in 0..d {
            m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn cat_map_forward_and_inverse_examples() {
        let cat = Diffeo::Cat;
        let y = cat.apply(&TorusPoint::new(&[0.5, 0.5]));
        assert_eq!(y.coords(), &[0.5, 0.0]);
        let x = cat.apply_inverse(&y);
        assert_eq!(x.coords(), &[0.5, 0.5]);
        assert_eq!(cat.jacobian_at(&[0.3, 0.9]), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
        assert_eq!(cat.jacobian(&TorusPoint::new(&[0.1, 0.2])).determinant(), 1.0);
    }

    #[test]
    fn identity_is_identity() {
        let id = Diffeo::Identity { dim: 3 };
        let p = TorusPoint::new(&[0.1, 0.7, 0.99]);
        assert_eq!(id.apply(&p), p);
        assert_eq!(id.apply_inverse(&p), p);
        assert_eq!(id.jacobian_at(p.coords()), DMatrix::identity(3, 3));
    }

    #[test]
    fn canonical_representatives() {
        let p = TorusPoint::new(&[-1e-18, 1.0, 2.25]);
        assert!(p.coords().iter().all(|c| (0.0..1.0).contains(c)));
        assert_eq!(p.coords()[2], 0.25);
        assert!(TorusPoint::new(&[0.99, 0.0]).distance(&TorusPoint::new(&[0.01, 0.0])) < 0.0200001);
    }

    #[test]
    fn unknown_map_is_a_config_error() {
        let err = Diffeo::from_spec("baker", &BTreeMap::new()).unwrap_err();
        assert!(err.is_config());
        assert!(Diffeo::from_spec("perturbed_cat", &params(&[("eps", 0.5)])).is_err());
        assert!(Diffeo::from_spec("cat", &params(&[("eps", 0.05)])).is_err());
        assert_eq!(
            Diffeo::from_spec("perturbed_cat", &params(&[("eps", 0.05)])).unwrap(),
            Diffeo::PerturbedCat { eps: 0.05 }
        );
    }

    #[test]
    fn perturbed_cat_matches_finite_differences_at_quarter_point() {
        let map = Diffeo::PerturbedCat { eps: 0.05 };
        let exact = map.jacobian_at(&[0.25, 0.25]);
        let fd = finite_difference_jacobian(&map, &[0.25, 0.25], 1e-6);
        assert!((exact - fd).amax() < 1e-5);
    }

    #[test]
    fn newton_inverse_agrees_with_closed_form() {
        for map in [Diffeo::PerturbedCat { eps: 0.08 }, Diffeo::CatCircle { kappa: 0.1 }] {
            let p = TorusPoint::new(&[0.31, 0.77, 0.12][..map.dim()]);
            let a = map.apply_inverse(&p);
            let b = newton_inverse(&map, &p).unwrap();
            assert!(a.distance(&b) < 1e-13, "{map:?}");
        }
    }

    #[test]
    fn chain_rule_for_second_iterate() {
        let map = Diffeo::PerturbedCat { eps: 0.1 };
        let x = TorusPoint::new(&[0.123, 0.456]);
        let j2 = map.jacobian_power(&x, 2);
        let fx = map.apply(&x);
        let expected = map.jacobian_at(fx.coords()) * map.jacobian_at(x.coords());
        assert!((j2 - expected).amax() < 1e-12);
    }
}
