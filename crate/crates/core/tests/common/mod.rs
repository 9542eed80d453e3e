use minilp::{ComparisonOp, OptimizationDirection, Problem};
use winding_lab::Point;

/// Solves `max sum_k f_k (mu_k - nu_k)` over values `f` on the joint support
/// plus the origin, with `f(origin) = 0` and `|f_p - f_q| <= |p - q|`.
/// Lipschitz functions on a finite set extend to the plane, so this is `d1`.
pub fn lipschitz_dual(mu: &[(Point, f64)], nu: &[(Point, f64)]) -> f64 {
    let mut pts: Vec<Point> = vec![Point::ORIGIN];
    let mut coef: Vec<f64> = vec![0.0];
    for &(p, w) in mu {
        pts.push(p);
        coef.push(w);
    }
    for &(p, w) in nu {
        pts.push(p);
        coef.push(-w);
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let bound = 1e3;
    let vars: Vec<_> = coef
        .iter()
        .enumerate()
        .map(|(k, &c)| if k == 0 { lp.add_var(0.0, (0.0, 0.0)) } else { lp.add_var(c, (-bound, bound)) })
        .collect();
    for a in 0..pts.len() {
        for b in 0..pts.len() {
            if a != b {
                lp.add_constraint(&[(vars[a], 1.0), (vars[b], -1.0)], ComparisonOp::Le, pts[a].dist(pts[b]));
            }
        }
    }
    lp.solve().unwrap().objective()
}
