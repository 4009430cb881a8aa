//! Grid search with repeated zooming around the incumbent.

/// Minimizes `f` on `[lo, hi]` with `points` per sweep. The first sweep
/// keeps its best few local minima and each is refined by shrinking the
/// window around it `rounds - 1` times, so near-tied basins are not lost.
pub fn minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize, rounds: usize) -> (f64, f64) {
    let h0 = (hi - lo) / (points - 1) as f64;
    let vals: Vec<f64> = (0..points).map(|k| f(lo + h0 * k as f64)).collect();
    let mut starts: Vec<usize> = (0..points)
        .filter(|&k| (k == 0 || vals[k] <= vals[k - 1]) && (k + 1 == points || vals[k] <= vals[k + 1]))
        .collect();
    starts.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    starts.truncate(8);
    let mut best = (lo, vals[0]);
    for &k in &starts {
        let mut cur = (lo + h0 * k as f64, vals[k]);
        let mut h = h0;
        for _ in 1..rounds.max(1) {
            let a = (cur.0 - 2.0 * h).max(lo);
            let b = (cur.0 + 2.0 * h).min(hi);
            h = (b - a) / (points - 1) as f64;
            for j in 0..points {
                let x = a + h * j as f64;
                let v = f(x);
                if v < cur.1 {
                    cur = (x, v);
                }
            }
        }
        if cur.1 < best.1 {
            best = cur;
        }
    }
    best
}

pub fn maximize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize, rounds: usize) -> (f64, f64) {
    let (x, v) = minimize_1d(|x| -f(x), lo, hi, points, rounds);
    (x, -v)
}

/// Two-dimensional version of [`minimize_1d`] on a box.
pub fn minimize_2d(
    f: impl Fn(f64, f64) -> f64,
    xr: (f64, f64),
    yr: (f64, f64),
    points: usize,
    rounds: usize,
) -> ((f64, f64), f64) {
    let (mut ax, mut bx) = xr;
    let (mut ay, mut by) = yr;
    let mut best = ((ax, ay), f(ax, ay));
    for _ in 0..rounds.max(1) {
        let hx = (bx - ax) / (points - 1) as f64;
        let hy = (by - ay) / (points - 1) as f64;
        for i in 0..points {
            let x = ax + hx * i as f64;
            for j in 0..points {
                let y = ay + hy * j as f64;
                let v = f(x, y);
                if v < best.1 {
                    best = ((x, y), v);
                }
            }
        }
        ax = (best.0 .0 - 2.0 * hx).max(xr.0);
        bx = (best.0 .0 + 2.0 * hx).min(xr.1);
        ay = (best.0 .1 - 2.0 * hy).max(yr.0);
        by = (best.0 .1 + 2.0 * hy).min(yr.1);
    }
    best
}
