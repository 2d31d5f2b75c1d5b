use nalgebra::DMatrix;

// Padé(13) coefficients and the 1-norm threshold below which the rational
// approximant has backward error under unit roundoff (Higham 2005).
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
pub(crate) const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential of a general real square matrix by scaling and
/// squaring with a degree-13 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a * 0.5f64.powi(squarings);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let mut out = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..terms {
            term = &term * a / k as f64;
            out += &term;
        }
        out
    }

    #[test]
    fn diagonal_exponential() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, -2.0, 7.5]));
        let e = expm(&a);
        for (i, x) in [0.3f64, -2.0, 7.5].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() < 1e-13 * x.exp());
        }
    }

    #[test]
    fn matches_taylor_below_threshold() {
        let a = DMatrix::from_row_slice(3, 3, &[0.1, 0.5, -0.2, 0.3, -0.4, 0.8, 0.0, 0.2, 0.25]);
        let e = expm(&a);
        let t = taylor(&a, 40);
        assert!((e - t).norm() < 1e-14);
    }

    #[test]
    fn rotation_generator() {
        let th = 10.0;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - th.cos()).abs() < 1e-12);
        assert!((e[(1, 0)] - th.sin()).abs() < 1e-12);
    }

    #[test]
    fn group_property_under_squaring() {
        let a = DMatrix::from_row_slice(2, 2, &[1.2, 3.0, -0.7, 0.4]) * 4.0;
        let half = expm(&(&a * 0.5));
        let full = expm(&a);
        let rel = (&half * &half - &full).norm() / full.norm();
        assert!(rel < 1e-12, "{rel}");
    }
}
