//! Real polynomial roots: a closed-form cubic solver and interval root
//! isolation for the low-degree polynomials produced by trajectory
//! constraints.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest degree representable by [`Poly`].
pub const MAX_DEGREE: usize = 10;

/// Real roots of `a3 t³ + a2 t² + a1 t + a0`, sorted ascending.
///
/// Falls back to the quadratic and linear formulas when leading coefficients
/// vanish. Closed-form roots are polished with Newton steps.
pub fn solve_cubic<T: Real>(a3: T, a2: T, a1: T, a0: T) -> Result<Vec<T>> {
    let coeffs = [a0, a1, a2, a3];
    if coeffs.iter().all(|c| c.is_zero()) {
        return Err(Error::AllCoefficientsZero);
    }
    let mut roots =
        if !a3.is_zero() { cubic_closed_form(a2 / a3, a1 / a3, a0 / a3) } else { solve_quadratic(a2, a1, a0) };
    for r in roots.iter_mut() {
        *r = newton_polish(&coeffs, *r);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    roots.dedup_by(|a, b| (*a - *b).abs() <= T::lit(1e-12) * T::one().max(a.abs()));
    Ok(roots)
}

/// Real roots of `a t² + b t + c` (degenerating to linear), sorted ascending.
pub fn solve_quadratic<T: Real>(a: T, b: T, c: T) -> Vec<T> {
    if a.is_zero() {
        if b.is_zero() {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - T::lit(4.0) * a * c;
    if disc < T::zero() {
        return Vec::new();
    }
    if disc.is_zero() {
        return vec![-b / (T::two() * a)];
    }
    let s = disc.sqrt();
    // Avoid cancellation between -b and the square root.
    let q = -T::half() * (b + b.signum() * s);
    let (r1, r2) = if q.is_zero() { (s / (T::two() * a), -s / (T::two() * a)) } else { (q / a, c / q) };
    if r1 < r2 {
        vec![r1, r2]
    } else {
        vec![r2, r1]
    }
}

/// Roots of the monic cubic `t³ + b t² + c t + d`.
fn cubic_closed_form<T: Real>(b: T, c: T, d: T) -> Vec<T> {
    let three = T::lit(3.0);
    let shift = b / three;
    // Depressed cubic y³ + p y + q with t = y - b/3.
    let p = c - b * b / three;
    let q = T::two() * b * b * b / T::lit(27.0) - b * c / three + d;
    let half_q = q * T::half();
    let third_p = p / three;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if p.is_zero() && q.is_zero() {
        return vec![-shift];
    }
    if disc > T::zero() {
        let s = disc.sqrt();
        let u = (-half_q - half_q.signum() * s).cbrt();
        let y = if u.is_zero() { T::zero() } else { u - third_p / u };
        vec![y - shift]
    } else {
        let m = T::two() * (-third_p).sqrt();
        let arg = (three * q / (T::two() * p) * (-three / p).sqrt()).max(-T::one()).min(T::one());
        let theta = arg.acos() / three;
        let step = T::two() * T::PI() / three;
        (0..3).map(|k| m * (theta - step * T::from_usize(k).unwrap_or_else(T::zero)).cos() - shift).collect()
    }
}

fn newton_polish<T: Real>(coeffs: &[T; 4], mut t: T) -> T {
    let eval = |t: T| {
        let v = ((coeffs[3] * t + coeffs[2]) * t + coeffs[1]) * t + coeffs[0];
        let dv = (T::lit(3.0) * coeffs[3] * t + T::two() * coeffs[2]) * t + coeffs[1];
        (v, dv)
    };
    let (mut v, _) = eval(t);
    for _ in 0..4 {
        let (_, dv) = eval(t);
        if dv.is_zero() || !dv.is_finite() {
            break;
        }
        let next = t - v / dv;
        let (nv, _) = eval(next);
        if !(nv.abs() < v.abs()) {
            break;
        }
        t = next;
        v = nv;
    }
    t
}

/// Polynomial with ascending coefficients, degree at most [`MAX_DEGREE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poly<T> {
    coeffs: [T; MAX_DEGREE + 1],
    len: usize,
}

impl<T: Real> Poly<T> {
    /// Builds from ascending coefficients `c[0] + c[1] t + ...`.
    pub fn new(c: &[T]) -> Self {
        assert!(c.len() <= MAX_DEGREE + 1, "degree exceeds {MAX_DEGREE}");
        let mut coeffs = [T::zero(); MAX_DEGREE + 1];
        coeffs[..c.len()].copy_from_slice(c);
        let mut p = Self { coeffs, len: c.len() };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.len > 0 && self.coeffs[self.len - 1].is_zero() {
            self.len -= 1;
        }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs[..self.len]
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.len.checked_sub(1)
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        self.coeffs[..self.len].iter().rev().fold(T::zero(), |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Self {
        let mut coeffs = [T::zero(); MAX_DEGREE + 1];
        for k in 1..self.len {
            coeffs[k - 1] = self.coeffs[k] * T::from_usize(k).unwrap_or_else(T::zero);
        }
        let mut p = Self { coeffs, len: self.len.saturating_sub(1) };
        p.trim();
        p
    }

    pub fn add(&self, o: &Self) -> Self {
        let len = self.len.max(o.len);
        let mut coeffs = [T::zero(); MAX_DEGREE + 1];
        for (k, c) in coeffs.iter_mut().enumerate().take(len) {
            *c = self.coeffs[k] + o.coeffs[k];
        }
        let mut p = Self { coeffs, len };
        p.trim();
        p
    }

    pub fn scale(&self, s: T) -> Self {
        let mut p = *self;
        for c in p.coeffs[..p.len].iter_mut() {
            *c = *c * s;
        }
        p.trim();
        p
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.len == 0 || o.len == 0 {
            return Self::new(&[]);
        }
        let len = self.len + o.len - 1;
        assert!(len <= MAX_DEGREE + 1, "product degree exceeds {MAX_DEGREE}");
        let mut coeffs = [T::zero(); MAX_DEGREE + 1];
        for i in 0..self.len {
            for j in 0..o.len {
                coeffs[i + j] = coeffs[i + j] + self.coeffs[i] * o.coeffs[j];
            }
        }
        let mut p = Self { coeffs, len };
        p.trim();
        p
    }

    /// Real roots inside `[lo, hi]`, ascending, each refined to `tol`.
    ///
    /// Roots are isolated recursively from the critical points of the
    /// derivative; tangential zeros are reported only when the polynomial
    /// evaluates to exactly zero at a critical point.
    pub fn roots_in(&self, lo: T, hi: T, tol: T) -> Vec<T> {
        let mut out = Vec::new();
        if !(lo <= hi) {
            return out;
        }
        match self.degree() {
            None | Some(0) => {}
            Some(1) => {
                let r = -self.coeffs[0] / self.coeffs[1];
                if r >= lo && r <= hi {
                    out.push(r);
                }
            }
            Some(2) => {
                out.extend(
                    solve_quadratic(self.coeffs[2], self.coeffs[1], self.coeffs[0])
                        .into_iter()
                        .filter(|r| *r >= lo && *r <= hi),
                );
            }
            Some(_) => {
                let mut knots = Vec::with_capacity(MAX_DEGREE + 2);
                knots.push(lo);
                knots.extend(self.derivative().roots_in(lo, hi, tol).into_iter().filter(|&r| r > lo && r < hi));
                knots.push(hi);
                for w in knots.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (fa, fb) = (self.eval(a), self.eval(b));
                    if fa.is_zero() {
                        out.push(a);
                    } else if !fb.is_zero() && (fa < T::zero()) != (fb < T::zero()) {
                        out.push(self.bisect(a, b, fa, tol).0);
                    }
                }
                if self.eval(hi).is_zero() {
                    out.push(hi);
                }
                out.dedup_by(|a, b| (*a - *b).abs() <= tol);
            }
        }
        out
    }

    /// Bisects a bracket with a sign change; returns `(lo, hi)` with
    /// `hi - lo <= tol` and the sign of `f(lo)` equal to that of `fa`.
    fn bisect(&self, mut a: T, mut b: T, fa: T, tol: T) -> (T, T) {
        let neg_a = fa < T::zero();
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            let m = (a + b) * T::half();
            if m <= a || m >= b {
                break;
            }
            if (self.eval(m) < T::zero()) == neg_a {
                a = m;
            } else {
                b = m;
            }
        }
        (a, b)
    }

    /// First time in `(start, end]` at which the polynomial becomes negative,
    /// given that it is non-negative at `start` (up to `-slack`).
    ///
    /// Returns the last bracketing time at which the value is still
    /// non-negative, within `tol` of the crossing, or `None` if the value
    /// stays non-negative on the whole interval.
    pub fn first_negative_crossing(&self, start: T, end: T, tol: T, slack: T) -> Option<T> {
        if !(start < end) {
            return None;
        }
        let f0 = self.eval(start);
        if f0 < -slack {
            return Some(start);
        }
        let mut knots = Vec::with_capacity(MAX_DEGREE + 2);
        knots.push(start);
        let crit_tol = tol.min((end - start) * T::lit(1e-9));
        knots.extend(self.derivative().roots_in(start, end, crit_tol).into_iter().filter(|&r| r > start && r < end));
        knots.push(end);
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let fb = self.eval(b);
            if fb < T::zero() {
                let fa = self.eval(a);
                if fa < T::zero() {
                    // Only reachable on the first piece when the start value
                    // sits inside the slack band.
                    return Some(a);
                }
                return Some(self.bisect(a, b, fa, tol).0);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn assert_roots(got: Vec<f64>, want: &[f64]) {
        assert_eq!(got.len(), want.len(), "got {got:?}, want {want:?}");
        for (g, w) in got.iter().zip(want) {
            assert_abs_diff_eq!(*g, *w, epsilon = 1e-12);
        }
    }

    #[test]
    fn cubic_examples() {
        assert_roots(solve_cubic(1.0, 0.0, -1.0, 0.0).unwrap(), &[-1.0, 0.0, 1.0]);
        assert_roots(solve_cubic(0.0, 1.0, -3.0, 2.0).unwrap(), &[1.0, 2.0]);
        assert_roots(solve_cubic(2.0, -4.0, -22.0, 24.0).unwrap(), &[-3.0, 1.0, 4.0]);
    }

    #[test]
    fn cubic_degenerate_cases() {
        assert_eq!(solve_cubic(0.0, 0.0, 0.0, 0.0), Err(Error::AllCoefficientsZero));
        assert!(solve_cubic(0.0, 0.0, 0.0, 3.0).unwrap().is_empty());
        assert_roots(solve_cubic(0.0, 0.0, 2.0, -1.0).unwrap(), &[0.5]);
        assert!(solve_cubic(0.0, 1.0, 0.0, 1.0).unwrap().is_empty());
        assert_roots(solve_cubic(1.0, -3.0, 3.0, -1.0).unwrap(), &[1.0]);
        assert_roots(solve_cubic(1.0, 0.0, 1.0, 0.0).unwrap(), &[0.0]);
    }

    #[test]
    fn cubic_in_f32() {
        let r = solve_cubic(1.0f32, 0.0, -1.0, 0.0).unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[2] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn poly_roots_in_interval() {
        // (t-0.5)(t-1)(t-2)(t-3)(t+1)
        let p = [-0.5, 1.0].iter().chain([-1.0, 1.0].iter()).copied().collect::<Vec<_>>();
        let mut poly = Poly::new(&p[..2]).mul(&Poly::new(&p[2..]));
        for r in [2.0, 3.0, -1.0] {
            poly = poly.mul(&Poly::new(&[-r, 1.0]));
        }
        let roots = poly.roots_in(0.0, 2.5, 1e-12);
        assert_eq!(roots.len(), 3);
        for (g, w) in roots.iter().zip([0.5, 1.0, 2.0]) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-9);
        }
    }

    #[test]
    fn first_crossing_of_parabola() {
        // 1 - (t-2)^2 >= 0 on [1, 3]
        let p = Poly::<f64>::new(&[-3.0, 4.0, -1.0]);
        let t = p.first_negative_crossing(1.5, 10.0, 1e-9, 0.0).unwrap();
        assert!((t - 3.0).abs() < 1e-8 && p.eval(t) >= 0.0);
        assert_eq!(p.first_negative_crossing(1.5, 2.9, 1e-9, 0.0), None);
        // tangent touch does not count as a crossing
        let q = Poly::new(&[4.0, -4.0, 1.0]);
        assert_eq!(q.first_negative_crossing(0.0, 5.0, 1e-9, 0.0), None);
    }

    /// Sign changes of the cubic on a dense grid spanning the Cauchy bound.
    fn grid_sign_changes(c: [f64; 4]) -> usize {
        let (lead, rest) = if c[3] != 0.0 { (c[3], &c[..3]) } else { (c[2], &c[..2]) };
        let bound = 1.0 + rest.iter().map(|x| (x / lead).abs()).fold(0.0, f64::max);
        let n = 10_000;
        let f = |t: f64| ((c[3] * t + c[2]) * t + c[1]) * t + c[0];
        let mut prev = f(-bound);
        let mut changes = 0;
        for k in 1..=n {
            let t = -bound + 2.0 * bound * k as f64 / n as f64;
            let v = f(t);
            if (v < 0.0) != (prev < 0.0) {
                changes += 1;
            }
            prev = v;
        }
        changes
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn cubic_roots_are_roots(a3 in -10.0..10.0f64, a2 in -10.0..10.0f64, a1 in -10.0..10.0f64, a0 in -10.0..10.0f64) {
            prop_assume!(a3.abs() > 1e-3);
            let roots = solve_cubic(a3, a2, a1, a0).unwrap();
            prop_assert!(!roots.is_empty() && roots.len() <= 3);
            let coeffs = [a0, a1, a2, a3];
            for &t in &roots {
                let scale = coeffs.iter().enumerate()
                    .map(|(k, c)| c.abs() * t.abs().max(1.0).powi(k as i32))
                    .fold(1.0, f64::max);
                let v = ((a3 * t + a2) * t + a1) * t + a0;
                prop_assert!(v.abs() <= 1e-7 * scale, "residual {v} at {t}");
            }
            let changes = grid_sign_changes(coeffs);
            let bound = 1.0 + [a0, a1, a2].iter().map(|x| (x / a3).abs()).fold(0.0, f64::max);
            let cell = 2.0 * bound / 10_000.0;
            let clustered = roots.windows(2).any(|w| w[1] - w[0] < 2.0 * cell);
            if clustered {
                prop_assert!(changes <= roots.len() && changes % 2 == roots.len() % 2);
            } else {
                prop_assert_eq!(changes, roots.len());
            }
        }
    }
}
