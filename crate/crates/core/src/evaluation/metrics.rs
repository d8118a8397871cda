use nalgebra::DVector;

/// Root-mean-square error; both vectors must have the same length.
pub fn rmse(y: &DVector<f64>, yhat: &DVector<f64>) -> f64 {
    assert_eq!(y.len(), yhat.len(), "rmse needs equal lengths");
    if y.is_empty() {
        return 0.0;
    }
    let ss: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    (ss / y.len() as f64).sqrt()
}

/// F1 score of `prob > threshold` against binary labels; 0 when precision and recall are both 0.
pub fn f1(y: &DVector<f64>, prob: &DVector<f64>, threshold: f64) -> f64 {
    assert_eq!(y.len(), prob.len(), "f1 needs equal lengths");
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (t, p) in y.iter().zip(prob.iter()) {
        let pos = *p > threshold;
        match (*t == 1.0, pos) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    if tp == 0 || denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Linearly interpolated quantile of an unsorted sample.
pub(crate) fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = p * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}
