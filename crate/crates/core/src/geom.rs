//! Small fixed-size vector helpers. Positions are `[f64; 3]` in metres.

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Unit vector from `from` toward `to`, or `None` when the points coincide.
pub fn unit_toward(from: Vec3, to: Vec3) -> Option<Vec3> {
    let d = sub(to, from);
    let n = norm(d);
    (n > 1e-9).then(|| scale(d, 1.0 / n))
}

pub fn is_finite(a: Vec3) -> bool {
    a.iter().all(|x| x.is_finite())
}
