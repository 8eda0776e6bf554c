//! Dense solves for the small systems the analyzer produces, plus a
//! double-double accumulator used for extra-precise iterative refinement.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        Self::new(s, e)
    }

    pub fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }

    pub fn mul_f64(self, x: f64) -> Self {
        let p = self.hi * x;
        let e = self.hi.mul_add(x, -p);
        Self::new(p, e + self.lo * x)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Solves `a x = b` by LU with partial pivoting.
pub(crate) fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or(Error::Singular("zero pivot"))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("non-finite solution"))
    }
}

/// Relative values and gain in double-double precision.
pub(crate) struct PoissonRaw {
    pub h: Vec<DoubleDouble>,
    pub g: DoubleDouble,
}

/// Solves `g = rho_i + sum_{j != i} q_ij (h_j - h_i)` with `h_ref = 0`.
///
/// Residuals are formed from the off-diagonal rates and the differences
/// `h_j - h_i`, so the rounded diagonal never enters the refined answer.
pub(crate) fn solve_poisson_refined(
    rates: &[Vec<f64>],
    rho: &[f64],
    reference: usize,
) -> Result<PoissonRaw> {
    let n = rates.len();
    let dim = n + 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        let mut exit = 0.0;
        for j in 0..n {
            if j != i && rates[i][j] != 0.0 {
                a[(i, j)] = -rates[i][j];
                exit += rates[i][j];
            }
        }
        a[(i, i)] = exit;
        a[(i, n)] = 1.0;
    }
    a[(n, reference)] = 1.0;
    let lu = a.lu();

    let mut h = vec![DoubleDouble::default(); n];
    let mut g = DoubleDouble::default();
    let scale = rho.iter().fold(0.0f64, |m, r| m.max(r.abs())).max(f64::MIN_POSITIVE);

    for iteration in 0..12 {
        let mut r = DVector::<f64>::zeros(dim);
        for i in 0..n {
            let mut acc = DoubleDouble::from_f64(rho[i]).sub(g);
            for j in 0..n {
                let q = rates[i][j];
                if j != i && q != 0.0 {
                    acc = acc.add(h[j].sub(h[i]).mul_f64(q));
                }
            }
            r[i] = acc.to_f64();
        }
        r[n] = -h[reference].to_f64();

        let delta = lu.solve(&r).ok_or(Error::Singular("zero pivot"))?;
        if !delta.iter().all(|d| d.is_finite()) {
            return Err(Error::Singular("non-finite solution"));
        }
        for i in 0..n {
            h[i] = h[i].add(DoubleDouble::from_f64(delta[i]));
        }
        g = g.add(DoubleDouble::from_f64(delta[n]));

        let step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let size = h
            .iter()
            .map(|v| v.hi.abs())
            .fold(g.hi.abs(), f64::max)
            .max(scale);
        if iteration > 0 && step <= 1e-30 * size {
            break;
        }
    }
    Ok(PoissonRaw { h, g })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_keeps_low_order_bits() {
        let one = DoubleDouble::from_f64(1.0);
        let tiny = DoubleDouble::from_f64(1e-20);
        let s = one.add(tiny);
        assert_eq!(s.hi, 1.0);
        assert!((s.lo - 1e-20).abs() < 1e-35);
        assert!((s.sub(one).to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn dense_solve_small_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![3.0, 5.0]);
        let x = solve_dense(&a, &b).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(solve_dense(&a, &b).is_err());
    }
}
