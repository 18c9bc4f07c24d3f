//! Coordinates on the circle T = [0, 1).

/// Reduce x to [0, 1).
#[inline]
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Circle distance between two points, in [0, 1/2]. Bitwise symmetric in x and y.
#[inline]
pub fn dist(x: f64, y: f64) -> f64 {
    let (d, e) = (wrap(x - y), wrap(y - x));
    d.min(e)
}

/// Split the lifted arc [a, b) with 0 ≤ b - a ≤ 1 into at most two pieces inside [0, 1].
pub fn split_arc(a: f64, b: f64) -> ([(f64, f64); 2], usize) {
    debug_assert!(b >= a);
    if b - a >= 1.0 {
        return ([(0.0, 1.0), (0.0, 0.0)], 1);
    }
    let s = wrap(a);
    let e = s + (b - a);
    if e <= 1.0 {
        ([(s, e), (0.0, 0.0)], 1)
    } else {
        ([(s, 1.0), (0.0, e - 1.0)], 2)
    }
}
