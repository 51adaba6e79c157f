#![allow(dead_code)]

use glovekit::geometry::Point2;

/// Enumerates all 2^n sign patterns of the non-zero magnitudes. Returns the exact upper-tail
/// probability of the observed W plus the null mean and variance of W.
pub fn enumerate_signed_ranks(d: &[f64]) -> (f64, f64, f64) {
    let d: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    let mut mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank_of = |m: f64| {
        let below = mags.iter().filter(|x| **x < m).count() as f64;
        let same = mags.iter().filter(|x| **x == m).count() as f64;
        below + (same + 1.0) / 2.0
    };
    let ranks: Vec<f64> = d.iter().map(|v| rank_of(v.abs())).collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = 1u64 << n;
    let (mut ge, mut s1, mut s2) = (0u64, 0.0, 0.0);
    for mask in 0..total {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w >= observed - 1e-9 {
            ge += 1;
        }
        s1 += w;
        s2 += w * w;
    }
    let mean = s1 / total as f64;
    (ge as f64 / total as f64, mean, s2 / total as f64 - mean * mean)
}

/// Sampling collision oracle: walks each linkage segment in 0.1 mm steps and looks for a
/// sign change of the side function of a finger segment whose crossing lies inside it.
pub fn sampled_collision(poly: &[Point2<f64>], finger: &[Point2<f64>; 4]) -> bool {
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        let n = ((len / 0.1).ceil() as usize).max(1);
        let at = |k: usize| {
            let t = k as f64 / n as f64;
            (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
        };
        for f in finger.windows(2) {
            let (c, d) = (f[0], f[1]);
            let (dx, dy) = (d.x - c.x, d.y - c.y);
            let side = |p: (f64, f64)| dx * (p.1 - c.y) - dy * (p.0 - c.x);
            let mut prev = at(0);
            for k in 1..=n {
                let cur = at(k);
                let (s0, s1) = (side(prev), side(cur));
                if (s0 < 0.0 && s1 > 0.0) || (s0 > 0.0 && s1 < 0.0) {
                    let t = s0 / (s0 - s1);
                    let x = (prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1));
                    let u = ((x.0 - c.x) * dx + (x.1 - c.y) * dy) / (dx * dx + dy * dy);
                    if u > 0.0 && u < 1.0 {
                        return true;
                    }
                }
                prev = cur;
            }
        }
    }
    false
}
