//! Polynomials with {-1, 0, 1} coefficients on the unit circle, the Möbius
//! maps linking channel output series to input polynomials, and the rotation
//! product used to lower-bound polynomial maxima on short arcs.

use num_complex::Complex;

use crate::channels::{BitString, ChannelSpec, Stage};
use crate::error::{param, Error, Result};
use crate::scalar::Scalar;

/// A sequence over {-1, 0, 1}, read as the polynomial `sum a_k z^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedSeq(Vec<i8>);

impl SignedSeq {
    pub fn new(coeffs: Vec<i8>) -> Result<Self> {
        if coeffs.is_empty() {
            return param("signed sequence must be nonempty");
        }
        if let Some(k) = coeffs.iter().position(|c| !(-1..=1).contains(c)) {
            return param(format!("coefficient {k} is {} (expected -1, 0 or 1)", coeffs[k]));
        }
        Ok(SignedSeq(coeffs))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0; n])
    }

    pub fn coeffs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_nonzero(&self) -> bool {
        self.0.iter().any(|&c| c != 0)
    }

    /// Index of the first nonzero coefficient.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.0.iter().position(|&c| c != 0)
    }

    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.0.iter().map(|&c| T::of(c as f64)).collect()
    }

    pub fn eval<T: Scalar>(&self, z: Complex<T>) -> Result<Complex<T>> {
        check_finite(z)?;
        Ok(horner_signed(&self.0, z))
    }
}

/// `x - y` entrywise.
pub fn diff_seq(x: &BitString, y: &BitString) -> Result<SignedSeq> {
    if x.len() != y.len() {
        return param(format!("length mismatch: {} vs {}", x.len(), y.len()));
    }
    Ok(SignedSeq(
        x.bits().iter().zip(y.bits()).map(|(&a, &b)| a as i8 - b as i8).collect(),
    ))
}

pub(crate) fn check_finite<T: Scalar>(z: Complex<T>) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        param(format!("non-finite complex argument ({:?}, {:?})", z.re, z.im))
    }
}

/// Horner evaluation without argument validation.
#[inline]
pub(crate) fn horner<T: Scalar>(coeffs: &[T], z: Complex<T>) -> Complex<T> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * z + c)
}

#[inline]
pub(crate) fn horner_signed<T: Scalar>(coeffs: &[i8], z: Complex<T>) -> Complex<T> {
    let (one, zero) = (T::one(), T::zero());
    coeffs.iter().rev().fold(Complex::new(zero, zero), |acc, &c| {
        let acc = acc * z;
        match c {
            1 => Complex::new(acc.re + one, acc.im),
            -1 => Complex::new(acc.re - one, acc.im),
            _ => acc,
        }
    })
}

/// `sum_k coeffs[k] z^k` by backward recurrence.
pub fn eval_poly<T: Scalar>(coeffs: &[T], z: Complex<T>) -> Result<Complex<T>> {
    if coeffs.is_empty() {
        return param("coefficient sequence must be nonempty");
    }
    check_finite(z)?;
    Ok(horner(coeffs, z))
}

/// The arc `{e^{i theta} : |theta| <= pi / L}` sampled on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSpec {
    l: f64,
    sample_count: usize,
}

impl ArcSpec {
    pub fn new(l: f64, sample_count: usize) -> Result<Self> {
        if !(l.is_finite() && l >= 1.0) {
            return param(format!("arc parameter L = {l} must be a finite real >= 1"));
        }
        if sample_count < 2 {
            return param("arc needs at least 2 sample points");
        }
        Ok(ArcSpec { l, sample_count })
    }

    /// Grid with `max(4096, 64 n L)` points for a length-`n` sequence.
    pub fn default_for(n: usize, l: f64) -> Result<Self> {
        let count = ((64.0 * n as f64 * l).ceil() as usize).max(4096);
        Self::new(l, count)
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Angle (equivalently arc length) between neighbouring grid points.
    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.l * (self.sample_count - 1) as f64)
    }

    pub fn angles<T: Scalar>(&self) -> Vec<T> {
        let half = T::PI() / T::of(self.l);
        let last = T::of_usize(self.sample_count - 1);
        // theta_i = (pi/L) (2i - (N-1)) / (N-1): exactly symmetric, exactly 0 at the centre.
        (0..self.sample_count)
            .map(|i| half * (T::of_usize(2 * i) - last) / last)
            .collect()
    }
}

pub fn arc_points<T: Scalar>(spec: &ArcSpec) -> Vec<Complex<T>> {
    spec.angles::<T>()
        .into_iter()
        .map(|t| Complex::new(t.cos(), t.sin()))
        .collect()
}

/// Grid maximiser of `|A|` on the arc. The first maximiser wins ties.
pub fn arc_max<T: Scalar>(a: &SignedSeq, spec: &ArcSpec) -> Result<(Complex<T>, T)> {
    if !a.is_nonzero() {
        return param("arc maximum of the zero polynomial is not bounded below");
    }
    let mut best = (Complex::new(T::zero(), T::zero()), T::neg_infinity());
    for z in arc_points::<T>(spec) {
        let v = horner_signed(a.coeffs(), z).norm();
        if v > best.1 {
            best = (z, v);
        }
    }
    Ok(best)
}

/// `w = (z - q) / p`, the series variable for which the deletion identity has argument `z`.
pub fn deletion_moebius<T: Scalar>(z: Complex<T>, q: f64) -> Complex<T> {
    let qs = T::of(q);
    (z - qs) / (T::one() - qs)
}

/// `z = p w + q`, the inverse of [`deletion_moebius`].
pub fn deletion_forward<T: Scalar>(w: Complex<T>, q: f64) -> Complex<T> {
    let qs = T::of(q);
    w * (T::one() - qs) + qs
}

fn near_zero<T: Scalar>(d: Complex<T>, scale: T) -> bool {
    d.norm() <= T::epsilon() * scale
}

/// `w = zeta / (alpha + beta zeta)`, inverting `zeta = alpha w / (1 - beta w)`.
pub fn insertion_moebius<T: Scalar>(zeta: Complex<T>, beta: f64) -> Result<Complex<T>> {
    let b = T::of(beta);
    let a = T::one() - b;
    let den = zeta * b + a;
    if near_zero(den, a + b * zeta.norm()) {
        return Err(Error::Domain(format!(
            "pole of the insertion map at zeta = -alpha/beta (beta = {beta})"
        )));
    }
    Ok(zeta / den)
}

/// `zeta = alpha w / (1 - beta w)`.
pub fn insertion_forward<T: Scalar>(w: Complex<T>, beta: f64) -> Result<Complex<T>> {
    let b = T::of(beta);
    let a = T::one() - b;
    let den = -(w * b) + T::one();
    if near_zero(den, T::one() + b * w.norm()) {
        return Err(Error::Domain(format!("pole of the insertion map at w = 1/beta (beta = {beta})")));
    }
    Ok(w * a / den)
}

/// Sends the series variable `w` of the composed channel's output to the
/// argument of the input polynomial.
///
/// The last stage's map is applied first: each stage turns the series
/// variable of its output into that of its input (`w -> p w + q` for
/// deletion, `w -> alpha w / (1 - beta w)` for insertion, identity for
/// substitution). Each map sends the unit circle to a circle internally
/// tangent at 1, and so does the composition.
pub fn composed_map<T: Scalar>(w: Complex<T>, spec: &ChannelSpec) -> Result<Complex<T>> {
    check_finite(w)?;
    let mut v = w;
    for stage in spec.stage_order().iter().rev() {
        v = match stage {
            Stage::Deletion => deletion_forward(v, spec.q()),
            Stage::Insertion => insertion_forward(v, spec.beta())?,
            Stage::Substitution => v,
        };
    }
    Ok(v)
}

/// Inverse of [`composed_map`]: sends a point `z` on the input polynomial's
/// arc to the series variable at which the output means must be summed.
pub fn composed_inverse<T: Scalar>(z: Complex<T>, spec: &ChannelSpec) -> Result<Complex<T>> {
    check_finite(z)?;
    let mut v = z;
    for stage in spec.stage_order() {
        v = match stage {
            Stage::Deletion => deletion_moebius(v, spec.q()),
            Stage::Insertion => insertion_moebius(v, spec.beta())?,
            Stage::Substitution => v,
        };
    }
    Ok(v)
}

/// `F(z) = prod_{j<L} A(z e^{2 pi i j / L})`.
pub fn product_of_rotations<T: Scalar>(a: &SignedSeq, l: usize, z: Complex<T>) -> Result<Complex<T>> {
    if l == 0 {
        return param("rotation count L must be at least 1");
    }
    check_finite(z)?;
    let step = T::TAU() / T::of_usize(l);
    Ok((0..l).fold(Complex::new(T::one(), T::zero()), |acc, j| {
        let rot = Complex::from_polar(T::one(), step * T::of_usize(j));
        acc * horner_signed(a.coeffs(), z * rot)
    }))
}

/// Outcome of checking `max_{arc} |A| >= n^{-L}` on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakBoundReport {
    pub n: usize,
    pub l: usize,
    pub max_on_arc: f64,
    pub bound: f64,
    /// Grid undershoot allowance `n^2 * spacing`.
    pub tolerance: f64,
    pub consistent: bool,
}

impl WeakBoundReport {
    pub const CSV_HEADER: &'static str = "n,L,max,bound,consistent";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{:e},{}",
            self.n, self.l, self.max_on_arc, self.bound, self.consistent
        )
    }
}

pub fn verify_weak_bound(a: &SignedSeq, l: usize, grid: &ArcSpec) -> Result<WeakBoundReport> {
    if l == 0 {
        return param("arc parameter L must be at least 1");
    }
    if (grid.l() - l as f64).abs() > 0.0 {
        return param(format!("grid built for L = {} but L = {l} requested", grid.l()));
    }
    let (_, max) = arc_max::<f64>(a, grid)?;
    let n = a.len();
    let bound = (n as f64).powi(-(l as i32));
    let tolerance = (n * n) as f64 * grid.spacing();
    Ok(WeakBoundReport {
        n,
        l,
        max_on_arc: max,
        bound,
        tolerance,
        consistent: max >= bound - tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn seq(v: &[i8]) -> SignedSeq {
        SignedSeq::new(v.to_vec()).unwrap()
    }

    #[test]
    fn constant_and_monomial() {
        let z = C::new(0.3, -1.7);
        assert_eq!(eval_poly(&[1.0], z).unwrap(), C::new(1.0, 0.0));
        let mut mono = vec![0.0; 9];
        mono[8] = 1.0;
        let u = C::from_polar(1.0, 0.77);
        assert!((eval_poly(&mono, u).unwrap().norm() - 1.0).abs() < 1e-14);
        assert!(eval_poly::<f64>(&[], z).is_err());
        assert!(eval_poly(&[1.0], C::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn one_minus_z_on_arc_endpoint() {
        for l in [1.0, 2.0, 4.0, 7.5] {
            let z = C::from_polar(1.0, PI / l);
            let v = eval_poly(&[1.0, -1.0], z).unwrap().norm();
            assert!((v - 2.0 * (PI / (2.0 * l)).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn f32_instantiation() {
        let z = Complex::<f32>::new(0.5, 0.5);
        let v = eval_poly(&[1.0f32, 2.0, 3.0], z).unwrap();
        // 1 + 2z + 3z^2 with z^2 = 0.5i
        assert!((v - Complex::new(2.0f32, 2.5)).norm() < 1e-6);
    }

    #[test]
    fn diff_seq_cases() {
        let d = |a: &str, b: &str| diff_seq(&a.parse().unwrap(), &b.parse().unwrap()).unwrap();
        assert!(!d("0110", "0110").is_nonzero());
        assert_eq!(d("10", "01").coeffs(), &[1, -1]);
        assert_eq!(d("110", "011").coeffs(), &[1, 0, -1]);
        assert!(diff_seq(&"10".parse().unwrap(), &"1".parse().unwrap()).is_err());
    }

    #[test]
    fn arc_grid() {
        let two = arc_points::<f64>(&ArcSpec::new(3.0, 2).unwrap());
        assert_eq!(two.len(), 2);
        assert!((two[0].arg() + PI / 3.0).abs() < 1e-15);
        assert!((two[1].arg() - PI / 3.0).abs() < 1e-15);

        let spec = ArcSpec::new(2.0, 5).unwrap();
        let angles = spec.angles::<f64>();
        let want = [-PI / 2.0, -PI / 4.0, 0.0, PI / 4.0, PI / 2.0];
        for (a, b) in angles.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let pts = arc_points::<f64>(&spec);
        assert_eq!(pts[2], C::new(1.0, 0.0));
        for p in &pts {
            assert!((p.norm() - 1.0).abs() <= 2.0 * f64::EPSILON);
        }
        assert!(ArcSpec::new(0.5, 10).is_err());
        assert!(ArcSpec::new(2.0, 1).is_err());
        assert_eq!(ArcSpec::default_for(6, 4.0).unwrap().sample_count(), 4096);
        assert_eq!(ArcSpec::default_for(100, 4.0).unwrap().sample_count(), 25600);
    }

    #[test]
    fn arc_max_cases() {
        let spec = ArcSpec::new(3.0, 101).unwrap();
        let (z, v) = arc_max::<f64>(&seq(&[1]), &spec).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(z, arc_points::<f64>(&spec)[0]);

        let spec = ArcSpec::new(4.0, 4096).unwrap();
        let (z, v) = arc_max::<f64>(&seq(&[1, -1]), &spec).unwrap();
        assert!((v - 2.0 * (PI / 8.0).sin()).abs() < 1e-14);
        assert!((z.arg().abs() - PI / 4.0).abs() < 1e-14);
        assert!(arc_max::<f64>(&seq(&[0, 0]), &spec).is_err());
    }

    #[test]
    fn moebius_fixed_points() {
        let one = C::new(1.0, 0.0);
        assert!((deletion_moebius(one, 0.3) - one).norm() < 1e-15);
        assert!(deletion_moebius(C::new(0.3, 0.0), 0.3).norm() < 1e-15);
        assert!((insertion_moebius(one, 0.4).unwrap() - one).norm() < 1e-15);
        assert_eq!(insertion_moebius(C::new(0.0, 0.0), 0.4).unwrap(), C::new(0.0, 0.0));
        // pole at -alpha/beta
        assert!(matches!(
            insertion_moebius(C::new(-1.0, 0.0), 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn deletion_modulus_closed_form() {
        for q in [0.1, 0.5, 0.9] {
            for k in 0..50 {
                let theta = -PI + k as f64 * 0.13;
                let w = deletion_moebius(C::from_polar(1.0, theta), q);
                let p = 1.0 - q;
                let want = (1.0 + q * q - 2.0 * q * theta.cos()) / (p * p);
                assert!((w.norm_sqr() - want).abs() < 1e-12 * want);
            }
        }
    }

    #[test]
    fn composition_reduces_to_single_stage() {
        let spec = ChannelSpec::deletion(0.35).unwrap();
        let z = C::from_polar(1.0, 0.4);
        assert_eq!(composed_inverse(z, &spec).unwrap(), deletion_moebius(z, 0.35));
        let w = C::new(0.2, 0.7);
        assert_eq!(composed_map(w, &spec).unwrap(), deletion_forward(w, 0.35));
        let full = ChannelSpec::full(0.3, 0.1, 0.4).unwrap();
        let back = composed_inverse(composed_map(w, &full).unwrap(), &full).unwrap();
        assert!((back - w).norm() < 1e-14);
    }

    #[test]
    fn rotation_product() {
        let z = C::new(0.3, 0.4);
        let a = seq(&[1, 0, -1, 1]);
        assert_eq!(product_of_rotations(&a, 1, z).unwrap(), a.eval(z).unwrap());
        let mono = seq(&[0, 0, 0, 1]);
        for l in 1..6 {
            let u = C::from_polar(1.0, 0.123 * l as f64);
            assert!((product_of_rotations(&mono, l, u).unwrap().norm() - 1.0).abs() < 1e-14);
            assert_eq!(product_of_rotations(&a, l, C::new(0.0, 0.0)).unwrap(), C::new(1.0, 0.0));
        }
        assert!(product_of_rotations(&a, 0, z).is_err());
    }

    #[test]
    fn weak_bound_trivial_and_alternating() {
        let grid = ArcSpec::new(3.0, 4096).unwrap();
        let r = verify_weak_bound(&seq(&[1]), 3, &grid).unwrap();
        assert_eq!((r.max_on_arc, r.bound, r.consistent), (1.0, 1.0, true));

        let alt = seq(&[1, -1, 1, -1, 1, -1]);
        let r = verify_weak_bound(&alt, 3, &grid).unwrap();
        let dense = (0..=100_000)
            .map(|i| {
                let t = -PI / 3.0 + 2.0 * PI / 3.0 * i as f64 / 100_000.0;
                alt.eval(C::from_polar(1.0, t)).unwrap().norm()
            })
            .fold(0.0, f64::max);
        assert!(r.consistent);
        assert!((r.bound - 6f64.powi(-3)).abs() < 1e-18);
        assert!(r.max_on_arc <= dense + 1e-12 && r.max_on_arc >= dense - r.tolerance);
        assert_eq!(r.csv_row().split(',').count(), 5);
        assert!(verify_weak_bound(&seq(&[0]), 3, &grid).is_err());
        assert!(verify_weak_bound(&alt, 2, &grid).is_err());
    }
}
