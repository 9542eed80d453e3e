//! The distance `d1(mu, nu) = sup { int f d(mu - nu) : f 1-Lipschitz, f(0) = 0 }`
//! between finite measures of possibly different mass.
//!
//! The mass difference is placed at the origin on the lighter side, which
//! turns the problem into balanced transport with Euclidean cost. Small
//! instances are solved exactly by a primal network simplex; large ones by
//! log-domain Sinkhorn iterations with a reported duality gap.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{BBox, Point};
use crate::measure::MeasureAtoms;
use crate::sum::KahanSum;

/// Largest per-side atom count solved exactly.
pub const EXACT_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Exact,
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub distance: f64,
    /// `(source, target, mass)` over the balanced atom lists; the origin atom,
    /// when present, is the last entry of its side.
    pub plan: Vec<(usize, usize, f64)>,
    /// Mass added at the origin to the first and to the second measure.
    pub balanced_at_origin: (f64, f64),
    pub solver: Solver,
    /// Entropic regularization, zero for the exact solver.
    pub eps: f64,
    /// Primal minus dual objective, an upper bound on the error of `distance`.
    pub gap: f64,
}

impl TransportResult {
    /// `{distance, balanced_at_origin, solver, eps, gap}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "distance": self.distance,
            "balanced_at_origin": [self.balanced_at_origin.0, self.balanced_at_origin.1],
            "solver": self.solver,
            "eps": self.eps,
            "gap": self.gap,
        })
    }
}

fn balanced(mu: &MeasureAtoms, nu: &MeasureAtoms) -> Result<(Vec<(Point, f64)>, Vec<(Point, f64)>, (f64, f64))> {
    for (name, m) in [("first", mu), ("second", nu)] {
        if let Some((i, _)) = m.atoms().iter().enumerate().find(|(_, a)| !(a.1 >= 0.0) || !a.1.is_finite()) {
            return invalid(format!("{name} measure has invalid weight at atom {i}"));
        }
    }
    let (a, b) = (mu.total_mass(), nu.total_mass());
    let mut xs = mu.atoms().to_vec();
    let mut ys = nu.atoms().to_vec();
    let add = ((b - a).max(0.0), (a - b).max(0.0));
    if add.0 > 0.0 {
        xs.push((Point::ORIGIN, add.0));
    }
    if add.1 > 0.0 {
        ys.push((Point::ORIGIN, add.1));
    }
    Ok((xs, ys, add))
}

/// `d1` between two atom clouds.
pub fn d1(mu: &MeasureAtoms, nu: &MeasureAtoms) -> Result<TransportResult> {
    let (xs, ys, add) = balanced(mu, nu)?;
    if xs.len().max(ys.len()) <= EXACT_LIMIT {
        let (distance, plan) = network_simplex(&xs, &ys)?;
        Ok(TransportResult { distance, plan, balanced_at_origin: add, solver: Solver::Exact, eps: 0.0, gap: 0.0 })
    } else {
        let scale = cost_scale(&xs, &ys);
        let eps = 1e-3 * scale.max(f64::MIN_POSITIVE);
        let s = sinkhorn(&xs, &ys, eps, 2000, 1e-9)?;
        Ok(TransportResult {
            distance: s.primal,
            plan: s.plan,
            balanced_at_origin: add,
            solver: Solver::Regularized,
            eps,
            gap: (s.primal - s.dual).max(0.0),
        })
    }
}

/// `d1` forcing the regularized solver.
pub fn d1_regularized(mu: &MeasureAtoms, nu: &MeasureAtoms, eps: f64, max_iter: usize) -> Result<TransportResult> {
    if !(eps > 0.0) {
        return invalid("eps must be positive");
    }
    let (xs, ys, add) = balanced(mu, nu)?;
    let s = sinkhorn(&xs, &ys, eps, max_iter, 1e-10)?;
    Ok(TransportResult {
        distance: s.primal,
        plan: s.plan,
        balanced_at_origin: add,
        solver: Solver::Regularized,
        eps,
        gap: (s.primal - s.dual).max(0.0),
    })
}

fn cost_scale(xs: &[(Point, f64)], ys: &[(Point, f64)]) -> f64 {
    let mut b = BBox::empty();
    for (p, _) in xs.iter().chain(ys) {
        b.include(*p);
    }
    b.diameter()
}

// Network simplex on the complete bipartite graph sources -> sinks plus an
// artificial root joined to every node. Tree arcs are stored per non-root node
// as the arc to its parent.

const ROOT_ARC: usize = usize::MAX;
const COST_CACHE_LIMIT: usize = 1 << 23;

struct Simplex<'a> {
    xs: &'a [(Point, f64)],
    ys: &'a [(Point, f64)],
    m: usize,
    n: usize,
    art_cost: f64,
    parent: Vec<usize>,
    /// Arc joining the node to its parent: `i * n + j` for a real arc,
    /// `ROOT_ARC` for the artificial arc.
    pred_arc: Vec<usize>,
    /// Whether the parent arc points from the node to its parent.
    pred_up: Vec<bool>,
    pred_flow: Vec<f64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    /// Dense cost matrix, empty when too large to cache.
    costs: Vec<f64>,
}

impl<'a> Simplex<'a> {
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        if self.costs.is_empty() {
            self.xs[i].0.dist(self.ys[j].0)
        } else {
            self.costs[i * self.n + j]
        }
    }

    fn arc_cost(&self, node: usize) -> f64 {
        let arc = self.pred_arc[node];
        if arc == ROOT_ARC {
            self.art_cost
        } else {
            self.cost(arc / self.n, arc % self.n)
        }
    }

    fn new(xs: &'a [(Point, f64)], ys: &'a [(Point, f64)]) -> Self {
        let (m, n) = (xs.len(), ys.len());
        let root = m + n;
        let costs: Vec<f64> = if m * n <= COST_CACHE_LIMIT {
            xs.iter().flat_map(|(p, _)| ys.iter().map(move |(q, _)| p.dist(*q))).collect()
        } else {
            Vec::new()
        };
        let mut max_cost: f64 = costs.iter().copied().fold(0.0, f64::max);
        if costs.is_empty() {
            for (p, _) in xs {
                for (q, _) in ys {
                    max_cost = max_cost.max(p.dist(*q));
                }
            }
        }
        let art_cost = (max_cost + 1.0) * (m + n) as f64;
        let mut s = Simplex {
            xs,
            ys,
            m,
            n,
            art_cost,
            parent: vec![root; m + n + 1],
            pred_arc: vec![ROOT_ARC; m + n + 1],
            pred_up: vec![true; m + n + 1],
            pred_flow: vec![0.0; m + n + 1],
            depth: vec![1; m + n + 1],
            pi: vec![0.0; m + n + 1],
            children: vec![Vec::new(); m + n + 1],
            costs,
        };
        s.depth[root] = 0;
        // sources send to the root, the root feeds sinks
        for i in 0..m {
            s.pred_up[i] = true;
            s.pred_flow[i] = xs[i].1;
            s.pi[i] = -art_cost;
        }
        for j in 0..n {
            s.pred_up[m + j] = false;
            s.pred_flow[m + j] = ys[j].1;
            s.pi[m + j] = art_cost;
        }
        s.children[root] = (0..m + n).collect();
        s
    }

    /// Reduced cost of the real arc `i -> j`.
    #[inline]
    fn reduced(&self, i: usize, j: usize) -> f64 {
        self.cost(i, j) + self.pi[i] - self.pi[self.m + j]
    }

    fn solve(&mut self) -> Result<()> {
        let total = self.m * self.n;
        let block = ((total as f64).sqrt().ceil() as usize).max(10).min(total);
        let tol = 1e-12 * (self.art_cost / (self.m + self.n) as f64);
        let (mut i, mut j) = (0usize, 0usize);
        let max_pivots = 50 * total + 1000;
        for _ in 0..max_pivots {
            // block pricing
            let mut best = None;
            let mut best_rc = -tol;
            let mut scanned = 0;
            while scanned < total {
                let rc = self.reduced(i, j);
                if rc < best_rc {
                    best_rc = rc;
                    best = Some((i, j));
                }
                scanned += 1;
                j += 1;
                if j == self.n {
                    j = 0;
                    i += 1;
                    if i == self.m {
                        i = 0;
                    }
                }
                if scanned % block == 0 && best.is_some() {
                    break;
                }
            }
            match best {
                None => return Ok(()),
                Some((bi, bj)) => self.pivot(bi, bj),
            }
        }
        Err(Error::Numeric("network simplex exceeded its pivot budget".into()))
    }

    fn pivot(&mut self, i: usize, j: usize) {
        let u = i;
        let v = self.m + j;
        // join node
        let (mut a, mut b) = (u, v);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        let join = a;

        // Cycle orientation follows u -> v. Walking up from u the tree arcs are
        // traversed against the orientation, walking up from v along it.
        let mut delta = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None;
        let mut w = u;
        while w != join {
            // from parent(w) down to w: forward iff arc points parent -> w
            if self.pred_up[w] && self.pred_flow[w] < delta {
                delta = self.pred_flow[w];
                leave = Some((w, true));
            }
            w = self.parent[w];
        }
        let mut w = v;
        while w != join {
            // from w up to parent(w): forward iff arc points w -> parent
            if !self.pred_up[w] && self.pred_flow[w] <= delta {
                delta = self.pred_flow[w];
                leave = Some((w, false));
            }
            w = self.parent[w];
        }
        let (leaving, on_u_side) = leave.expect("uncapacitated cycle with negative cost");

        // update flows
        if delta > 0.0 {
            let mut w = u;
            while w != join {
                self.pred_flow[w] += if self.pred_up[w] { -delta } else { delta };
                w = self.parent[w];
            }
            let mut w = v;
            while w != join {
                self.pred_flow[w] += if self.pred_up[w] { delta } else { -delta };
                w = self.parent[w];
            }
        }

        // re-hang the detached subtree from the entering arc
        let (new_child, new_parent, child_up) = if on_u_side { (u, v, true) } else { (v, u, false) };
        let old_parent_of_leaving = self.parent[leaving];
        self.detach(leaving, old_parent_of_leaving);

        // reverse the path new_child -> ... -> leaving
        let mut path = vec![new_child];
        while *path.last().unwrap() != leaving {
            let p = self.parent[*path.last().unwrap()];
            path.push(p);
        }
        for k in (1..path.len()).rev() {
            let (c, p) = (path[k - 1], path[k]);
            // arc between c and its parent p becomes the arc between p and its new parent c
            self.detach(c, p);
            self.pred_arc[p] = self.pred_arc[c];
            self.pred_up[p] = !self.pred_up[c];
            self.pred_flow[p] = self.pred_flow[c];
            self.parent[p] = c;
            self.children[c].push(p);
        }
        self.pred_arc[new_child] = i * self.n + j;
        self.pred_up[new_child] = child_up;
        self.pred_flow[new_child] = delta;
        self.parent[new_child] = new_parent;
        self.children[new_parent].push(new_child);

        // depths and potentials on the re-hung subtree
        let c = self.arc_cost(new_child);
        let target = if child_up { self.pi[new_parent] - c } else { self.pi[new_parent] + c };
        let shift = target - self.pi[new_child];
        let base_depth = self.depth[new_parent] + 1;
        let mut stack = vec![new_child];
        while let Some(x) = stack.pop() {
            self.pi[x] += shift;
            self.depth[x] = if x == new_child { base_depth } else { self.depth[self.parent[x]] + 1 };
            stack.extend(self.children[x].iter().copied());
        }
    }

    fn detach(&mut self, child: usize, parent: usize) {
        let list = &mut self.children[parent];
        if let Some(k) = list.iter().position(|&c| c == child) {
            list.swap_remove(k);
        }
    }

    fn result(&self) -> Result<(f64, Vec<(usize, usize, f64)>)> {
        let total_mass: f64 = self.xs.iter().map(|a| a.1).sum();
        let mut plan = Vec::new();
        let mut cost = KahanSum::new();
        for node in 0..self.m + self.n {
            let arc = self.pred_arc[node];
            let f = self.pred_flow[node];
            if arc == ROOT_ARC {
                if f > 1e-9 * total_mass.max(1.0) {
                    return Err(Error::Numeric(format!("artificial arc carries {f}: unbalanced problem")));
                }
                continue;
            }
            if f > 0.0 {
                let (i, j) = (arc / self.n, arc % self.n);
                plan.push((i, j, f));
                cost.add(f * self.cost(i, j));
            }
        }
        plan.sort_by_key(|&(i, j, _)| (i, j));
        Ok((cost.value(), plan))
    }
}

fn network_simplex(xs: &[(Point, f64)], ys: &[(Point, f64)]) -> Result<(f64, Vec<(usize, usize, f64)>)> {
    // zero-weight atoms carry no flow
    let xi: Vec<usize> = (0..xs.len()).filter(|&i| xs[i].1 > 0.0).collect();
    let yi: Vec<usize> = (0..ys.len()).filter(|&j| ys[j].1 > 0.0).collect();
    if xi.is_empty() || yi.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let xs2: Vec<_> = xi.iter().map(|&i| xs[i]).collect();
    let mut ys2: Vec<_> = yi.iter().map(|&j| ys[j]).collect();
    // absorb rounding so that both sides carry the same total
    let sx: f64 = crate::sum::compensated_sum(xs2.iter().map(|a| a.1));
    let sy: f64 = crate::sum::compensated_sum(ys2.iter().map(|a| a.1));
    let heaviest = (0..ys2.len()).max_by(|&a, &b| ys2[a].1.total_cmp(&ys2[b].1)).unwrap();
    ys2[heaviest].1 += sx - sy;
    let mut s = Simplex::new(&xs2, &ys2);
    s.solve()?;
    let (cost, plan) = s.result()?;
    Ok((cost, plan.into_iter().map(|(i, j, f)| (xi[i], yi[j], f)).collect()))
}

struct SinkhornOutput {
    primal: f64,
    dual: f64,
    plan: Vec<(usize, usize, f64)>,
}

fn logsumexp(vals: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = vals.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sinkhorn(xs: &[(Point, f64)], ys: &[(Point, f64)], eps: f64, max_iter: usize, tol: f64) -> Result<SinkhornOutput> {
    use rayon::prelude::*;
    let xs: Vec<_> = xs.iter().copied().filter(|a| a.1 > 0.0).collect();
    let ys: Vec<_> = ys.iter().copied().filter(|a| a.1 > 0.0).collect();
    if xs.is_empty() || ys.is_empty() {
        return Ok(SinkhornOutput { primal: 0.0, dual: 0.0, plan: Vec::new() });
    }
    let total: f64 = xs.iter().map(|a| a.1).sum();
    let la: Vec<f64> = xs.iter().map(|a| (a.1 / total).ln()).collect();
    let lb: Vec<f64> = ys.iter().map(|a| (a.1 / total).ln()).collect();
    let mut f = vec![0.0; xs.len()];
    let mut g = vec![0.0; ys.len()];
    let c = |i: usize, j: usize| xs[i].0.dist(ys[j].0);
    for _ in 0..max_iter {
        f = (0..xs.len())
            .into_par_iter()
            .map(|i| -eps * logsumexp((0..ys.len()).map(|j| (g[j] - c(i, j)) / eps + lb[j])))
            .collect();
        g = (0..ys.len())
            .into_par_iter()
            .map(|j| -eps * logsumexp((0..xs.len()).map(|i| (f[i] - c(i, j)) / eps + la[i])))
            .collect();
        // row marginal violation after the column update
        let err: f64 = (0..xs.len())
            .map(|i| {
                let r = logsumexp((0..ys.len()).map(|j| (f[i] + g[j] - c(i, j)) / eps + la[i] + lb[j])).exp();
                (r - (la[i]).exp()).abs()
            })
            .sum();
        if err < tol {
            break;
        }
    }
    // round to a feasible plan
    let mut p: Vec<Vec<f64>> = (0..xs.len())
        .map(|i| (0..ys.len()).map(|j| ((f[i] + g[j] - c(i, j)) / eps + la[i] + lb[j]).exp()).collect())
        .collect();
    for (i, row) in p.iter_mut().enumerate() {
        let s: f64 = row.iter().sum();
        let a = la[i].exp();
        if s > a {
            row.iter_mut().for_each(|x| *x *= a / s);
        }
    }
    for j in 0..ys.len() {
        let s: f64 = p.iter().map(|r| r[j]).sum();
        let b = lb[j].exp();
        if s > b {
            p.iter_mut().for_each(|r| r[j] *= b / s);
        }
    }
    let row_def: Vec<f64> = (0..xs.len()).map(|i| la[i].exp() - p[i].iter().sum::<f64>()).collect();
    let col_def: Vec<f64> = (0..ys.len()).map(|j| lb[j].exp() - p.iter().map(|r| r[j]).sum::<f64>()).collect();
    let def: f64 = row_def.iter().sum();
    if def > 0.0 {
        for i in 0..xs.len() {
            for j in 0..ys.len() {
                p[i][j] += row_def[i].max(0.0) * col_def[j].max(0.0) / def;
            }
        }
    }
    let mut primal = KahanSum::new();
    let mut plan = Vec::new();
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            if p[i][j] > 0.0 {
                primal.add(p[i][j] * c(i, j));
                plan.push((i, j, p[i][j] * total));
            }
        }
    }
    // feasible dual by c-transform of f
    let gt: Vec<f64> = (0..ys.len()).map(|j| (0..xs.len()).map(|i| c(i, j) - f[i]).fold(f64::INFINITY, f64::min)).collect();
    let dual: f64 = (0..xs.len()).map(|i| la[i].exp() * f[i]).sum::<f64>() + (0..ys.len()).map(|j| lb[j].exp() * gt[j]).sum::<f64>();
    Ok(SinkhornOutput { primal: primal.value() * total, dual: dual * total, plan })
}

/// Clusters atoms into at most `k` representatives by binning on the finest
/// dyadic grid over the bounding square with at most `k` nonempty bins.
/// Each representative sits at its bin's mass centroid. Returns the bin side.
pub fn downsample(mu: &MeasureAtoms, k: usize) -> Result<(MeasureAtoms, f64)> {
    if k == 0 {
        return invalid("downsample needs k >= 1");
    }
    if mu.len() <= k {
        return Ok((mu.clone(), 0.0));
    }
    let bb = mu.bbox();
    let side = bb.width().max(bb.height()).max(f64::MIN_POSITIVE);
    let count = |level: u32| -> usize {
        let cell = side / f64::from(1u32 << level);
        let mut keys: Vec<(i64, i64)> = mu.atoms().iter().map(|(p, _)| bin_key(*p, &bb, cell, 1 << level)).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    };
    let mut level = 0u32;
    while level < 30 && count(level + 1) <= k {
        level += 1;
    }
    let cell = side / f64::from(1u32 << level);
    let mut bins: std::collections::BTreeMap<(i64, i64), (KahanSum, KahanSum, KahanSum)> = Default::default();
    for (p, w) in mu.atoms() {
        let e = bins.entry(bin_key(*p, &bb, cell, 1 << level)).or_default();
        e.0.add(*w);
        e.1.add(*w * p.x);
        e.2.add(*w * p.y);
    }
    let atoms = bins
        .into_iter()
        .map(|(key, (w, wx, wy))| {
            let w = w.value();
            let p = if w > 0.0 {
                Point::new(wx.value() / w, wy.value() / w)
            } else {
                Point::new(bb.min.x + (key.0 as f64 + 0.5) * cell, bb.min.y + (key.1 as f64 + 0.5) * cell)
            };
            (p, w)
        })
        .collect();
    Ok((MeasureAtoms::from_atoms_unchecked(atoms), cell))
}

fn bin_key(p: Point, bb: &BBox, cell: f64, bins: i64) -> (i64, i64) {
    let k = |v: f64, lo: f64| (((v - lo) / cell).floor() as i64).clamp(0, bins - 1);
    (k(p.x, bb.min.x), k(p.y, bb.min.y))
}
