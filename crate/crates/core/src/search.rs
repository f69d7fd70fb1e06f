//! Scalar search helpers shared by the random-access analysis and the optimizer.

/// Inverse golden ratio, `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximisation of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `rel_tol * max(|lo|, |hi|)` (or
/// `f64::MIN_POSITIVE` for a bracket around zero). Returns the best point seen
/// and its value, so a non-unimodal `f` still yields a valid lower bound.
pub fn golden_max<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut best = (a, f(a));
    let consider = |x: f64, fx: f64, best: &mut (f64, f64)| {
        if fx > best.1 || (fx == best.1 && x < best.0) {
            *best = (x, fx);
        }
    };
    let fb = f(b);
    consider(b, fb, &mut best);

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);

    let tol = |a: f64, b: f64| (rel_tol * a.abs().max(b.abs())).max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    while b - a > tol(a, b) && iterations < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            consider(d, fd, &mut best);
        }
        iterations += 1;
    }
    best
}

/// Bisection on a bracket where `pred(lo)` is false and `pred(hi)` is true.
/// Returns the final `hi`, the leftmost point known to satisfy `pred`.
pub fn bisect_boundary<P>(mut pred: P, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64
where
    P: FnMut(f64) -> bool,
{
    let mut iterations = 0;
    while hi - lo > (rel_tol * hi.abs()).max(f64::MIN_POSITIVE) && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    hi
}

/// `n` points spaced geometrically from `lo` to `hi` inclusive (`lo > 0`).
pub fn geomspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let ratio = (hi / lo).ln();
    let last = n.saturating_sub(1).max(1) as f64;
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            lo * (ratio * i as f64 / last).exp()
        }
    })
}
