use std::f64::consts::PI;

use rand::Rng;

use crate::env::{uniform_free_point, MazeMap};
use crate::geometry::Point;
use crate::lower::ValueBackend;

/// Rejection budget for informed sampling before falling back to the free space.
pub const ELLIPSE_REJECTIONS: usize = 1000;

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: u32) -> f64 {
    // Gamma(d/2 + 1) for integer or half-integer arguments
    let half = d / 2;
    let gamma = if d.is_multiple_of(2) {
        (1..=half).map(f64::from).product::<f64>()
    } else {
        (0..=half).map(|k| f64::from(k) + 0.5).product::<f64>() * PI.sqrt()
    };
    PI.powf(f64::from(d) / 2.0) / gamma
}

/// Smallest rewiring constant that keeps asymptotic optimality.
pub fn gamma_lower_bound(d: u32, mu_free: f64) -> f64 {
    assert!(d >= 1 && mu_free > 0.0);
    let d_f = f64::from(d);
    (2.0 * (1.0 + 1.0 / d_f)).powf(1.0 / d_f) * (mu_free / unit_ball_volume(d)).powf(1.0 / d_f)
}

/// `gamma * (ln n / n)^(1/d)`; `None` for `n < 2`.
pub fn rewiring_radius(n: f64, d: u32, gamma: f64) -> Option<f64> {
    if !(n >= 2.0) {
        return None;
    }
    Some(gamma * (n.ln() / n).powf(1.0 / f64::from(d)))
}

/// Uniform sample from the free part of the ellipse with foci `s_o`, `s_g`
/// and transverse diameter `r_best`. Falls back to the whole free space when
/// `r_best` is infinite or the rejection budget runs out.
pub fn informed_sample<R: Rng + ?Sized>(s_o: Point, s_g: Point, r_best: f64, map: &MazeMap, rng: &mut R) -> Point {
    if !r_best.is_finite() {
        return uniform_free_point(map, rng);
    }
    let r_min = s_o.dist(s_g);
    let r_best = r_best.max(r_min);
    let a = r_best / 2.0;
    let b = (r_best * r_best - r_min * r_min).max(0.0).sqrt() / 2.0;
    let centre = s_o.lerp(s_g, 0.5);
    let (cos, sin) = if r_min > 0.0 {
        ((s_g.x - s_o.x) / r_min, (s_g.y - s_o.y) / r_min)
    } else {
        (1.0, 0.0)
    };
    for _ in 0..ELLIPSE_REJECTIONS {
        let rad = rng.gen::<f64>().sqrt();
        let th = rng.gen_range(0.0..2.0 * PI);
        let (u, v) = (a * rad * th.cos(), b * rad * th.sin());
        let p = Point::new(centre.x + cos * u - sin * v, centre.y + sin * u + cos * v);
        if map.bounds().contains(p) && map.is_free(p) {
            return p;
        }
    }
    uniform_free_point(map, rng)
}

/// Point on the segment from `from` toward `to` with backend distance at
/// most `cap`, found by bisection. Returns `to` when it is already within
/// `cap`, `None` when no point measurably beyond `from` qualifies.
pub fn steer(from: Point, to: Point, cap: f64, backend: &dyn ValueBackend) -> Option<Point> {
    assert!(cap > 0.0, "steer cap must be positive");
    let map = backend.map();
    let ok = |p: Point| map.is_free(p) && backend.distance(from, p).is_ok_and(|d| d <= cap);
    if ok(to) {
        return Some(to);
    }
    let len = from.dist(to);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while (hi - lo) * len > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if ok(from.lerp(to, mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * len > 1e-2).then(|| from.lerp(to, lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MazeMap;
    use crate::geometry::Rect;
    use crate::lower::OracleBackend;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_bound_examples() {
        assert!((gamma_lower_bound(2, PI) - 3f64.sqrt()).abs() < 1e-12);
        assert!((gamma_lower_bound(2, 4.0 * PI) - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((gamma_lower_bound(1, 2.0) - 4.0).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn rewiring_radius_examples() {
        let e2 = std::f64::consts::E.powi(2);
        assert!((rewiring_radius(e2, 2, 2.0).unwrap() - 1.0405).abs() < 1e-4);
        assert!((rewiring_radius(2.0, 2, 1.0).unwrap() - 0.5887).abs() < 1e-4);
        assert!(rewiring_radius(1.0, 2, 1.0).is_none());
        let rs: Vec<f64> = (3..200).map(|n| rewiring_radius(n as f64, 2, 3.0).unwrap()).collect();
        assert!(rs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn ellipse_samples_respect_the_focal_sum() {
        let map = MazeMap::four_rooms();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (Point::new(10.0, 10.0), Point::new(30.0, 20.0));
        let r_best = 30.0;
        for _ in 0..2000 {
            let p = informed_sample(a, b, r_best, &map, &mut rng);
            assert!(p.dist(a) + p.dist(b) <= r_best + 1e-9);
            assert!(map.is_free(p));
        }
        // degenerate ellipse collapses onto the focal segment
        for _ in 0..200 {
            let p = informed_sample(a, b, a.dist(b), &map, &mut rng);
            assert!(p.dist(a) + p.dist(b) - a.dist(b) < 1e-9);
        }
    }

    #[test]
    fn steer_cases() {
        let map = MazeMap::builder("w", Rect::new(0.0, 0.0, 40.0, 20.0))
            .wall(Rect::new(20.0, 0.0, 22.0, 15.0))
            .build()
            .unwrap();
        let b = OracleBackend::build(&map, 1.0, 15.0).unwrap();
        let s = Point::new(2.5, 5.5);
        let near = Point::new(6.5, 5.5);
        assert_eq!(steer(s, near, 8.0, &b), Some(near));
        let far = Point::new(18.5, 5.5);
        let p = steer(s, far, 8.0, &b).unwrap();
        assert!((p.x - 10.5).abs() <= 1.0 && (p.y - 5.5).abs() < 1e-9);
        assert!(b.distance(s, p).unwrap() <= 8.0);
        let behind = Point::new(30.5, 5.5);
        let p = steer(Point::new(15.5, 5.5), behind, 6.0, &b).unwrap();
        assert!(p.x < 20.0);
        assert!(b.distance(Point::new(15.5, 5.5), p).unwrap() <= 6.0);
    }
}
