//! Similarity features between the two branch encodings.
//!
//! A zero vector has no direction: its cosine with anything is taken as 0,
//! so distance is 1 and similarity 0.5, with zero gradient.

use ndarray::{Array1, ArrayView1, ArrayViewMut1};

fn norms(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> (f64, f64) {
    (a.dot(&a).sqrt(), b.dot(&b).sqrt())
}

pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let (na, nb) = norms(a, b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(&b) / (na * nb)).clamp(-1.0, 1.0)
}

/// `1 − cos(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    1.0 - cosine(a, b)
}

/// `1 - cosine_distance(a, b) / 2`, in `[0, 1]`.
pub fn similarity(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    1.0 - cosine_distance(a, b) / 2.0
}

/// Width of the feature vector for encodings of width `hidden`.
pub fn feature_dim(hidden: usize) -> usize {
    2 * hidden + 2
}

/// `[a⊙b, |a−b|, cosine_distance, similarity]`.
pub fn features(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let h = a.len();
    let mut f = Array1::zeros(feature_dim(h));
    for j in 0..h {
        f[j] = a[j] * b[j];
        f[h + j] = (a[j] - b[j]).abs();
    }
    let cos = cosine(a, b);
    f[2 * h] = 1.0 - cos;
    f[2 * h + 1] = 1.0 - f[2 * h] / 2.0;
    f
}

/// Accumulates into `da`, `db` the gradients of the features given `df`.
pub fn features_backward(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    df: ArrayView1<'_, f64>,
    mut da: ArrayViewMut1<'_, f64>,
    mut db: ArrayViewMut1<'_, f64>,
) {
    let h = a.len();
    for j in 0..h {
        da[j] += df[j] * b[j];
        db[j] += df[j] * a[j];
        let diff = a[j] - b[j];
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        da[j] += df[h + j] * sign;
        db[j] -= df[h + j] * sign;
    }
    let (na, nb) = norms(a, b);
    if na == 0.0 || nb == 0.0 {
        return;
    }
    let cos = a.dot(&b) / (na * nb);
    if cos.abs() >= 1.0 {
        return;
    }
    let d_cos = -df[2 * h] + 0.5 * df[2 * h + 1];
    let inv = 1.0 / (na * nb);
    da.scaled_add(d_cos * inv, &b);
    da.scaled_add(-d_cos * cos / (na * na), &a);
    db.scaled_add(d_cos * inv, &a);
    db.scaled_add(-d_cos * cos / (nb * nb), &b);
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s};
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        let a = array![1.0, 0.0];
        let b = array![0.0, 1.0];
        assert_eq!(cosine_distance(a.view(), a.view()), 0.0);
        assert_eq!(similarity(a.view(), a.view()), 1.0);
        assert_eq!(cosine_distance(a.view(), b.view()), 1.0);
        assert_eq!(similarity(a.view(), b.view()), 0.5);
        let neg = array![-1.0, 0.0];
        assert_eq!(cosine_distance(a.view(), neg.view()), 2.0);
        assert_eq!(similarity(a.view(), neg.view()), 0.0);
    }

    #[test]
    fn zero_vector_convention() {
        let z = array![0.0, 0.0, 0.0];
        let v = array![1.0, 2.0, 3.0];
        assert_eq!(cosine_distance(z.view(), v.view()), 1.0);
        assert_eq!(similarity(z.view(), z.view()), 0.5);
        let f = features(z.view(), v.view());
        assert_eq!(f.to_vec(), vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 1.0, 0.5]);
    }

    #[test]
    fn feature_layout() {
        let a = array![1.0, -2.0];
        let b = array![3.0, 0.5];
        let f = features(a.view(), b.view());
        assert_eq!(f.len(), 6);
        assert_eq!(f.slice(s![..4]).to_vec(), vec![3.0, -1.0, 2.0, 2.5]);
        let cos = (3.0 - 1.0) / (5f64.sqrt() * 9.25f64.sqrt());
        assert!((f[4] - (1.0 - cos)).abs() < 1e-15);
        assert!((f[5] - (1.0 + cos) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let a = array![0.3, -0.7, 0.2];
        let b = array![-0.4, 0.5, 0.9];
        let df = array![0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8];
        let mut da = Array1::zeros(3);
        let mut db = Array1::zeros(3);
        features_backward(a.view(), b.view(), df.view(), da.view_mut(), db.view_mut());
        let loss = |a: &Array1<f64>, b: &Array1<f64>| features(a.view(), b.view()).dot(&df);
        let eps = 1e-6;
        for j in 0..3 {
            let mut ap = a.clone();
            ap[j] += eps;
            let mut am = a.clone();
            am[j] -= eps;
            let na = (loss(&ap, &b) - loss(&am, &b)) / (2.0 * eps);
            assert!((na - da[j]).abs() < 1e-8, "a[{j}]: {na} vs {}", da[j]);
            let mut bp = b.clone();
            bp[j] += eps;
            let mut bm = b.clone();
            bm[j] -= eps;
            let nb = (loss(&a, &bp) - loss(&a, &bm)) / (2.0 * eps);
            assert!((nb - db[j]).abs() < 1e-8, "b[{j}]: {nb} vs {}", db[j]);
        }
    }

    proptest! {
        #[test]
        fn scale_invariant_and_bounded(
            a in prop::collection::vec(-10.0f64..10.0, 4),
            b in prop::collection::vec(-10.0f64..10.0, 4),
            k in 0.01f64..100.0,
        ) {
            let a = Array1::from(a);
            let b = Array1::from(b);
            let d = cosine_distance(a.view(), b.view());
            let s = similarity(a.view(), b.view());
            prop_assert!((0.0..=2.0).contains(&d));
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, 1.0 - d / 2.0);
            let ka = &a * k;
            prop_assert!((cosine_distance(ka.view(), b.view()) - d).abs() < 1e-9);
            prop_assert!((similarity(ka.view(), b.view()) - s).abs() < 1e-9);
        }
    }
}
