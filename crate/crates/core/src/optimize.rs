//! Derivative-free one-dimensional search.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
///
/// Stops once the bracket is narrower than `tol` and returns the best point
/// seen, including the two endpoints.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let f_lo = f(lo);
    let f_hi = f(hi);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut guard = 0;
    while (hi - lo).abs() > tol && guard < 400 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
        guard += 1;
    }
    let mid = 0.5 * (lo + hi);
    let f_mid = f(mid);
    let mut best = (mid, f_mid);
    for cand in [(c, fc), (d, fd), (a.min(b), f_lo), (a.max(b), f_hi)] {
        if cand.1 < best.1 {
            best = cand;
        }
    }
    best
}

/// Golden-section maximisation; see [`golden_section_min`].
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_section_min(|x| -f(x), a, b, tol);
    (x, -v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let (x, v) = golden_section_min(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_minimum_is_returned() {
        let (x, _) = golden_section_min(|x| x, 0.5, 3.0, 1e-10);
        assert!((x - 0.5).abs() < 1e-9);
        let (x, v) = golden_section_max(|x| -(x - 2.0).abs(), 0.0, 10.0, 1e-10);
        assert!((x - 2.0).abs() < 1e-8 && v.abs() < 1e-8);
    }
}
