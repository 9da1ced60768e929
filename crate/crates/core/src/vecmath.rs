//! Small dense-vector helpers shared across the crate.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], t: f64) -> Vec<f64> {
    a.iter().map(|x| t * x).collect()
}

/// `a + t * b`, the update step of every iteration in the crate.
pub fn axpy(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn is_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Scales `a` to unit norm; the zero vector stays zero.
pub fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    if n == 0.0 {
        a.to_vec()
    } else {
        scale(a, 1.0 / n)
    }
}

/// Projects `a` onto the closed Euclidean ball of radius `r` at the origin.
pub fn clip_to_ball(a: &[f64], r: f64) -> Vec<f64> {
    let n = norm(a);
    if n <= r {
        a.to_vec()
    } else {
        scale(a, r / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(axpy(&[1.0, 1.0], 2.0, &[1.0, -1.0]), vec![3.0, -1.0]);
        assert_eq!(dist(&[1.0, 0.0], &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn clip_keeps_interior_points() {
        assert_eq!(clip_to_ball(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
        let clipped = clip_to_ball(&[3.0, 4.0], 1.0);
        assert!((norm(&clipped) - 1.0).abs() < 1e-15);
    }
}
