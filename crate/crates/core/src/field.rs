//! The magnetic intensity `K : S² → ℝ`, restricted from a polynomial in the
//! ambient coordinates `(p1, p2, p3)`.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::melnikov::{self, CapQuadrature};
use crate::sphere::{fibonacci_sphere, Rotation3, TangentVec, UnitVec3};

pub const MAX_DEGREE: u32 = 8;

/// One term `coef · p1^a p2^b p3^c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub exps: [u32; 3],
    pub coef: f64,
}

/// Named fields accepted by the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `K = p3`
    LinearZ,
    /// `K = 1`
    ConstantOne,
    /// `K = p1 p2`
    XyProduct,
}

impl Preset {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear_z" => Some(Self::LinearZ),
            "constant_one" => Some(Self::ConstantOne),
            "xy_product" => Some(Self::XyProduct),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LinearZ => "linear_z",
            Self::ConstantOne => "constant_one",
            Self::XyProduct => "xy_product",
        }
    }
}

/// A polynomial field on the sphere. Terms with equal exponents are merged,
/// zero coefficients dropped, and terms kept in lexicographic exponent order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    terms: Vec<Monomial>,
    description: String,
}

impl FieldSpec {
    /// Builds a polynomial field; rejects degree above 8 and fields whose
    /// coefficients all vanish (use [`FieldSpec::zero`] for that).
    pub fn polynomial(terms: &[Monomial]) -> Result<Self> {
        for t in terms {
            let deg: u32 = t.exps.iter().sum();
            if deg > MAX_DEGREE {
                return Err(Error::InvalidArgument(format!("monomial {:?} has degree {deg} > {MAX_DEGREE}", t.exps)));
            }
            if !t.coef.is_finite() {
                return Err(Error::InvalidArgument(format!("monomial {:?} has non-finite coefficient", t.exps)));
            }
        }
        let field = Self::from_map(merge(terms.iter().copied()), String::new());
        if field.terms.is_empty() {
            return Err(Error::InvalidArgument("polynomial field has no nonzero coefficient".into()));
        }
        let description = field.describe();
        Ok(Self { description, ..field })
    }

    pub fn preset(preset: Preset) -> Self {
        let exps = match preset {
            Preset::LinearZ => [0, 0, 1],
            Preset::ConstantOne => [0, 0, 0],
            Preset::XyProduct => [1, 1, 0],
        };
        Self { terms: vec![Monomial { exps, coef: 1.0 }], description: preset.name().to_string() }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new(), description: "zero".into() }
    }

    pub fn constant(value: f64) -> Self {
        if value == 0.0 {
            return Self::zero();
        }
        Self::from_map(merge([Monomial { exps: [0, 0, 0], coef: value }]), String::new()).with_generated_description()
    }

    fn from_map(map: BTreeMap<[u32; 3], f64>, description: String) -> Self {
        let terms = map.into_iter().filter(|(_, c)| *c != 0.0).map(|(exps, coef)| Monomial { exps, coef }).collect();
        Self { terms, description }
    }

    fn with_generated_description(mut self) -> Self {
        self.description = self.describe();
        self
    }

    fn describe(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|t| {
                let mut s = format!("{}", t.coef);
                for (name, e) in ["p1", "p2", "p3"].iter().zip(t.exps) {
                    match e {
                        0 => {}
                        1 => s.push_str(&format!("*{name}")),
                        _ => s.push_str(&format!("*{name}^{e}")),
                    }
                }
                s
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exps.iter().sum()).max().unwrap_or(0)
    }

    /// Value of the ambient polynomial at `p` (any point of ℝ³).
    pub fn eval_ambient(&self, p: &Vector3<f64>) -> f64 {
        self.terms.iter().map(|t| t.coef * pow(p.x, t.exps[0]) * pow(p.y, t.exps[1]) * pow(p.z, t.exps[2])).sum()
    }

    pub fn eval(&self, p: &UnitVec3) -> f64 {
        self.eval_ambient(p)
    }

    /// Gradient of the ambient polynomial.
    pub fn ambient_gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let mut g = Vector3::zeros();
        for t in &self.terms {
            let [a, b, c] = t.exps;
            let (x, y, z) = (p.x, p.y, p.z);
            if a > 0 {
                g.x += t.coef * a as f64 * pow(x, a - 1) * pow(y, b) * pow(z, c);
            }
            if b > 0 {
                g.y += t.coef * b as f64 * pow(x, a) * pow(y, b - 1) * pow(z, c);
            }
            if c > 0 {
                g.z += t.coef * c as f64 * pow(x, a) * pow(y, b) * pow(z, c - 1);
            }
        }
        g
    }

    /// Surface gradient: the ambient gradient projected onto `T_p S²`.
    pub fn eval_gradient(&self, p: &UnitVec3) -> TangentVec {
        TangentVec::project(*p, self.ambient_gradient(p))
    }

    /// `∫_{S²} K dσ`, summing the cap quadrature over both hemispheres.
    pub fn sphere_integral(&self) -> f64 {
        let quad = CapQuadrature::default_for(self);
        melnikov::melnikov_value_with(&UnitVec3::e3(), self, &quad)
            + melnikov::melnikov_value_with(&UnitVec3::e3().antipode(), self, &quad)
    }

    /// Largest `|K|` over a 2000-point lattice; the reference magnitude for
    /// relative thresholds.
    pub fn scale(&self) -> f64 {
        fibonacci_sphere(2000).iter().map(|p| self.eval(p).abs()).fold(0.0, f64::max)
    }

    /// `Some(integral)` when the field violates the zero-flux constraint by
    /// more than `1e-6 · max|K|`.
    pub fn gauss_law_violation(&self) -> Option<f64> {
        let total = self.sphere_integral();
        (total.abs() > 1e-6 * self.scale()).then_some(total)
    }

    /// The field `K ∘ Rᵗ`, so that `rotated(R).eval(R p) = eval(p)`.
    pub fn rotated(&self, r: &Rotation3) -> Self {
        // (Rᵗ q)_i = Σ_j R_ji q_j
        let m = r.matrix();
        let linear: [BTreeMap<[u32; 3], f64>; 3] = std::array::from_fn(|i| {
            let mut form = BTreeMap::new();
            for j in 0..3 {
                let mut e = [0u32; 3];
                e[j] = 1;
                form.insert(e, m[(j, i)]);
            }
            form
        });
        let mut acc: BTreeMap<[u32; 3], f64> = BTreeMap::new();
        for t in &self.terms {
            let mut prod = BTreeMap::from([([0u32, 0, 0], t.coef)]);
            for (i, form) in linear.iter().enumerate() {
                for _ in 0..t.exps[i] {
                    prod = poly_mul(&prod, form);
                }
            }
            for (e, c) in prod {
                *acc.entry(e).or_insert(0.0) += c;
            }
        }
        let tiny = 1e-15 * self.terms.iter().map(|t| t.coef.abs()).fold(0.0, f64::max);
        let acc = acc.into_iter().filter(|(_, c)| c.abs() > tiny).collect();
        Self::from_map(acc, format!("rotated({})", self.description))
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|t| Monomial { exps: t.exps, coef: t.coef * factor }).collect(),
            description: format!("{factor}*({})", self.description),
        }
    }

    /// `self + other`.
    pub fn sum(&self, other: &FieldSpec) -> Self {
        Self::from_map(merge(self.terms.iter().chain(other.terms.iter()).copied()), String::new())
            .with_generated_description()
    }
}

fn merge(terms: impl IntoIterator<Item = Monomial>) -> BTreeMap<[u32; 3], f64> {
    let mut map = BTreeMap::new();
    for t in terms {
        *map.entry(t.exps).or_insert(0.0) += t.coef;
    }
    map
}

fn poly_mul(a: &BTreeMap<[u32; 3], f64>, b: &BTreeMap<[u32; 3], f64>) -> BTreeMap<[u32; 3], f64> {
    let mut out = BTreeMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
            *out.entry(e).or_insert(0.0) += ca * cb;
        }
    }
    out
}

#[inline]
fn pow(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::fibonacci_sphere;
    use std::f64::consts::PI;

    fn mono(exps: [u32; 3], coef: f64) -> Monomial {
        Monomial { exps, coef }
    }

    #[test]
    fn eval_examples() {
        let k = FieldSpec::preset(Preset::LinearZ);
        assert_eq!(k.eval(&UnitVec3::e3()), 1.0);
        let eq = UnitVec3::from_xyz(0.6, 0.8, 0.0).unwrap();
        assert_eq!(k.eval(&eq), 0.0);
        let one = FieldSpec::preset(Preset::ConstantOne);
        for p in fibonacci_sphere(10) {
            assert_eq!(one.eval(&p), 1.0);
        }
    }

    #[test]
    fn gradient_examples() {
        let k = FieldSpec::preset(Preset::LinearZ);
        assert_eq!(k.eval_gradient(&UnitVec3::e3()).dir, Vector3::zeros());
        let g = k.eval_gradient(&UnitVec3::e1());
        assert!((g.dir - Vector3::z()).norm() < 1e-15);
        let one = FieldSpec::preset(Preset::ConstantOne);
        assert_eq!(one.eval_gradient(&UnitVec3::e2()).dir, Vector3::zeros());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = FieldSpec::polynomial(&[
            mono([1, 2, 0], 0.7),
            mono([0, 0, 3], -1.3),
            mono([2, 1, 3], 0.4),
            mono([0, 0, 0], 0.2),
        ])
        .unwrap();
        let h = 1e-5;
        for p in fibonacci_sphere(40) {
            let g = k.eval_gradient(&p);
            let f = crate::sphere::frame_to(&p);
            for axis in [f.column(1), f.column(2)] {
                let fd = (k.eval(&p.exp(&(*axis * h))) - k.eval(&p.exp(&(*axis * -h)))) / (2.0 * h);
                assert!((fd - g.dir.dot(&axis)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sphere_integral_examples() {
        let one = FieldSpec::preset(Preset::ConstantOne);
        assert!((one.sphere_integral() - 4.0 * PI).abs() < 1e-8);
        let z = FieldSpec::preset(Preset::LinearZ);
        assert!(z.sphere_integral().abs() < 1e-10);
        let z2 = FieldSpec::polynomial(&[mono([0, 0, 2], 1.0)]).unwrap();
        assert!((z2.sphere_integral() - 4.0 * PI / 3.0).abs() < 1e-8);
    }

    #[test]
    fn odd_monomials_have_zero_flux() {
        for a in 0..=4u32 {
            for b in 0..=4u32 {
                for c in 0..=4u32 {
                    if a + b + c > MAX_DEGREE || (a + b + c) % 2 == 0 {
                        continue;
                    }
                    let k = FieldSpec::polynomial(&[mono([a, b, c], 1.0)]).unwrap();
                    assert!(k.sphere_integral().abs() <= 1e-10, "{a}{b}{c}");
                }
            }
        }
    }

    #[test]
    fn rotation_covariance() {
        let k = FieldSpec::polynomial(&[
            mono([1, 1, 0], 1.0),
            mono([0, 0, 3], 0.5),
            mono([4, 0, 2], -0.25),
            mono([0, 0, 0], 0.1),
        ])
        .unwrap();
        let axis = UnitVec3::from_xyz(0.3, -0.4, 0.8).unwrap();
        let r = Rotation3::from_axis_angle(&axis, 1.234);
        let kr = k.rotated(&r);
        for p in fibonacci_sphere(100) {
            assert!((kr.eval(&r.apply(&p)) - k.eval(&p)).abs() <= 1e-12);
        }
    }

    #[test]
    fn validation() {
        assert!(FieldSpec::polynomial(&[mono([5, 4, 0], 1.0)]).is_err());
        assert!(FieldSpec::polynomial(&[mono([1, 0, 0], 0.0)]).is_err());
        assert!(FieldSpec::polynomial(&[]).is_err());
        assert!(FieldSpec::zero().is_zero());
        let merged = FieldSpec::polynomial(&[mono([1, 0, 0], 1.0), mono([1, 0, 0], 2.0)]).unwrap();
        assert_eq!(merged.terms().len(), 1);
        assert_eq!(merged.terms()[0].coef, 3.0);
    }

    #[test]
    fn gauss_law_flag() {
        assert!(FieldSpec::preset(Preset::LinearZ).gauss_law_violation().is_none());
        let v = FieldSpec::preset(Preset::ConstantOne).gauss_law_violation().unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-8);
    }
}
