//! One-dimensional golden-section search.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a unimodal `f` on `[a, b]` until the bracket is narrower than
/// `tol`. Returns the best evaluated point and its value.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section search over integers in `[lo, hi]`, minimizing `f`.
/// Every evaluated point is memoized; the best one is returned.
pub fn golden_section_min_int(mut f: impl FnMut(usize) -> f64, lo: usize, hi: usize) -> (usize, f64) {
    use std::collections::BTreeMap;
    let mut seen: BTreeMap<usize, f64> = BTreeMap::new();
    let mut eval = |x: usize, seen: &mut BTreeMap<usize, f64>| -> f64 {
        *seen.entry(x).or_insert_with(|| {
            let v = f(x);
            if v.is_finite() { v } else { f64::INFINITY }
        })
    };
    if lo >= hi {
        let v = eval(lo, &mut seen);
        return (lo, v);
    }
    let (mut a, mut b) = (lo as f64, hi as f64);
    let round = |x: f64| x.round() as usize;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(round(x1), &mut seen);
    let mut f2 = eval(round(x2), &mut seen);
    while b - a > 1.0 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(round(x1), &mut seen);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(round(x2), &mut seen);
        }
    }
    // endpoints of the final bracket
    eval(round(a), &mut seen);
    eval(round(b), &mut seen);
    seen.into_iter()
        .fold((lo, f64::INFINITY), |best, (x, v)| if v < best.1 { (x, v) } else { best })
}
