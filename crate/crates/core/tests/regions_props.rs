use proptest::prelude::*;
use winding_lab::geom::{BBox, Point};
use winding_lab::paths::{simulate_bm, ClosedCurve};
use winding_lab::regions::{joint_area, level_set_area, level_set_areas, CellState, LevelMode, RegionEstimate, ResolutionPolicy};
use winding_lab::winding::{winding_field, GridSpec, WindingField};

fn brownian(seed: u64, steps: usize) -> ClosedCurve {
    simulate_bm(steps, seed, Point::ORIGIN).unwrap().close()
}

/// Inside lattice cells (floor level) of an estimate, as integer keys.
fn inside_lattice(est: &RegionEstimate, h: f64) -> std::collections::HashSet<(i64, i64)> {
    let mut out = std::collections::HashSet::new();
    for c in est.cells.iter().filter(|c| c.state == CellState::Inside) {
        let side = (c.size / h).round() as i64;
        let i0 = ((c.center.x - 0.5 * c.size) / h).round() as i64;
        let j0 = ((c.center.y - 0.5 * c.size) / h).round() as i64;
        for i in 0..side {
            for j in 0..side {
                out.insert((i0 + i, j0 + j));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monotone_nested_and_decomposed(seed in 0u64..10_000) {
        let c = brownian(seed, 1024);
        let pol = ResolutionPolicy::relative(2f64.powi(-9)).pinned(c.bbox().diameter());
        let h = pol.cell_size(0.0);
        let ests: Vec<_> = (1..=4).map(|n| level_set_area(&c, n, LevelMode::AtLeast, &pol).unwrap()).collect();
        for n in 0..3 {
            prop_assert!(ests[n + 1].inside_count <= ests[n].inside_count);
            let outer = inside_lattice(&ests[n], h);
            prop_assert!(inside_lattice(&ests[n + 1], h).is_subset(&outer));
            let exactly = level_set_area(&c, n as i32 + 1, LevelMode::Exactly, &pol).unwrap();
            prop_assert_eq!(ests[n].inside_count - ests[n + 1].inside_count, exactly.inside_count);
        }
        let abs = level_set_area(&c, 1, LevelMode::AbsAtLeast, &pol).unwrap();
        prop_assert!(abs.inside_count >= ests[0].inside_count);
    }

    #[test]
    fn joint_monotone_in_each_level(seed in 0u64..10_000) {
        let cx = brownian(2 * seed, 512);
        let cy = brownian(2 * seed + 1, 512);
        let d = cx.bbox().diameter().max(cy.bbox().diameter());
        let pol = ResolutionPolicy::relative(2f64.powi(-9)).pinned(d);
        let a11 = joint_area(&cx, &cy, 1, 1, &pol).unwrap();
        let a21 = joint_area(&cx, &cy, 2, 1, &pol).unwrap();
        let a12 = joint_area(&cx, &cy, 1, 2, &pol).unwrap();
        prop_assert!(a21.inside_count <= a11.inside_count);
        prop_assert!(a12.inside_count <= a11.inside_count);
        let ax = level_set_area(&cx, 1, LevelMode::AtLeast, &pol).unwrap();
        prop_assert!(a11.inside_count <= ax.inside_count);
    }
}

/// Grid whose cell centres are the quadtree lattice centres for `pol`.
fn lattice_grid(bb: &BBox, h: f64) -> GridSpec {
    let nx = ((bb.max.x - bb.min.x) / h).ceil() as usize + 1;
    let ny = ((bb.max.y - bb.min.y) / h).ceil() as usize + 1;
    GridSpec::new(bb.min.x, bb.min.y, h, h, nx, ny).unwrap()
}

fn count_where(fields: &[&WindingField], n: i32) -> u64 {
    (0..fields[0].values.len())
        .filter(|&i| fields.iter().all(|f| !f.degenerate_mask[i] && f.values[i] >= n))
        .count() as u64
}

#[test]
fn single_path_counts_equal_lattice_oracle() {
    let c = brownian(21, 1 << 16);
    let bb = c.bbox();
    let h = bb.diameter() / 2048.0;
    let pol = ResolutionPolicy { anchor: bb.min, ..ResolutionPolicy::absolute(h) };
    let f = winding_field(&c, &lattice_grid(&bb, h));
    for n in [1, 2, 6] {
        let est = level_set_area(&c, n, LevelMode::AtLeast, &pol).unwrap();
        assert_eq!(est.masked_count, 0);
        assert_eq!(est.inside_count, count_where(&[&f], n), "n = {n}");
    }
}

#[test]
fn joint_counts_equal_lattice_oracle() {
    let cx = brownian(31, 1 << 14);
    let cy = brownian(32, 1 << 14);
    let bb = cx.bbox().intersection(&cy.bbox());
    let h = cx.bbox().union(&cy.bbox()).diameter() / 2048.0;
    let pol = ResolutionPolicy { anchor: bb.min, ..ResolutionPolicy::absolute(h) };
    let grid = lattice_grid(&bb, h);
    let (fx, fy) = (winding_field(&cx, &grid), winding_field(&cy, &grid));
    for n in [1, 2, 4] {
        let est = joint_area(&cx, &cy, n, n, &pol).unwrap();
        assert_eq!(est.inside_count, count_where(&[&fx, &fy], n), "n = {n}");
    }
}

#[test]
fn default_resolution_within_five_percent_of_fine_grid() {
    let c = brownian(21, 1 << 16);
    let bb = c.bbox();
    let k = 2048;
    let (dx, dy) = ((bb.max.x - bb.min.x) / k as f64, (bb.max.y - bb.min.y) / k as f64);
    let grid = GridSpec::new(bb.min.x, bb.min.y, dx, dy, k, k).unwrap();
    let f = winding_field(&c, &grid);
    for n in [1, 2] {
        let oracle = count_where(&[&f], n) as f64 * dx * dy;
        let est = level_set_area(&c, n, LevelMode::AtLeast, &ResolutionPolicy::default()).unwrap();
        assert!((est.area - oracle).abs() / oracle < 0.05, "n = {n}: {} vs {oracle}", est.area);
    }
}

#[test]
fn multi_level_areas_are_monotone() {
    let c = brownian(5, 1 << 12);
    let e = level_set_areas(&c, &[1, 2, 3, 4], LevelMode::AtLeast, &ResolutionPolicy::default()).unwrap();
    assert!(e.windows(2).all(|w| w[1].area <= w[0].area));
}
