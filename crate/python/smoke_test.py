"""Smoke test for the winding_lab_py extension.

Build and install first:
    cd crates/python && maturin build --release --out dist && pip install dist/*.whl
"""

import json
import math

import winding_lab_py as wl


def main():
    square = wl.ClosedCurve([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert square.winding_number((0.5, 0.5)) == 1
    assert square.winding_number((2.0, 0.5)) == 0
    field = square.winding_field(-0.5, -0.5, 0.5, 0.5, 4, 4)
    assert len(field) == 16 and sum(w for w in field if w) == 4

    area = square.level_set_area(1, resolution=1 / 256)
    assert abs(area["area"] - 1.0) < 1e-2, area

    path = wl.PlanarPath.simulate(1024, seed=7)
    again = wl.PlanarPath.simulate(1024, seed=7)
    assert path.vertices() == again.vertices()
    assert path.steps == 1024 and len(path) == 1025
    curve = path.close()
    pieces = path.pieces(4)
    assert len(pieces) == 4

    other = wl.PlanarPath.simulate(1024, seed=8)
    lt = wl.local_time(path, other, 64.0)
    assert lt["value"] >= 0.0

    d = wl.d1([(1.0, 0.0, 1.0)], [(0.0, 0.0, 1.0)])
    assert abs(d["distance"] - 1.0) < 1e-12, d

    assert abs(wl.func_big_l((0.0, 0.0)) - math.log(2) / (4 * math.pi**3)) < 1e-12
    assert wl.prob_g(3, (0.5, 0.0)) > 0.0
    assert wl.coeff_c(2) > 0.0
    assert wl.heat_kernel(1.0, (0.0, 0.0), (0.0, 0.0)) == 1 / (2 * math.pi)

    doc = json.loads(wl.run_experiment("simulate", "steps = 64\nsamples = 2"))
    assert set(doc) == {"config", "rows", "runtime_s"}

    try:
        wl.run_experiment("theorem1", "colour = blue")
    except ValueError:
        pass
    else:
        raise AssertionError("bad config accepted")

    print("smoke test ok:", curve.winding_number((10.0, 10.0)), f"local time {lt['value']:.4f}")


if __name__ == "__main__":
    main()
