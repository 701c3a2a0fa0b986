#!/usr/bin/env python3
"""Smoke test for the spinctrl_py extension module.

Builds the cdylib with cargo (release), copies it next to this script
under the importable name, and exercises the main entry points.

Run from anywhere: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_and_import():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "spinctrl-py"],
        cwd=REPO,
        check=True,
    )
    built = REPO / "target" / "release" / "libspinctrl_py.so"
    if not built.exists():  # macOS
        built = REPO / "target" / "release" / "libspinctrl_py.dylib"
    dest = Path(__file__).resolve().parent / "spinctrl_py.so"
    shutil.copyfile(built, dest)
    sys.path.insert(0, str(dest.parent))
    import spinctrl_py

    return spinctrl_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) < tol, f"{a} != {b} (tol {tol})"


def main():
    sp = build_and_import()
    pi = math.pi

    # regime boundary and the time-optimal selective pulse
    approx(sp.delta0(pi, 1.0), math.sqrt(3.0), 1e-12)
    omega_s, t_s, field = sp.design_selective(pi, 1.0, 1.0)
    approx(t_s, math.sqrt(3.0) * pi, 1e-12)
    approx(omega_s, 1.0 / math.sqrt(3.0), 1e-12)
    approx(field.total_duration(), t_s, 1e-12)

    # propagation: resonant X_pi, identity at the designed offset
    u0 = field.propagate(0.0)
    approx(u0[0][0], 1.0, 1e-10)
    approx(u0[1][1], -1.0, 1e-10)
    u1 = field.propagate(1.0)
    approx(u1[0][0] + u1[1][1] + u1[2][2], 3.0, 1e-9)
    approx(field.fidelity(1.0, 0.0), 0.0, 1e-12)

    # robust designs reproduce the closed-form times
    r53 = sp.design_robust_two_switch(5, 3, pi)
    approx(r53.total_time, 7.0 * pi / 3.0, 1e-12)
    assert abs(r53.curvature_at_zero) < 1e-4
    r21 = sp.design_robust_one_switch(2, 1, pi)
    a, d1 = r21.field.segments[0]
    approx(d1, 3.0 * pi / 2.0, 1e-12)
    assert any(abs(d - math.sqrt(15.0)) < 1e-6 for d in r21.identity_offsets)

    # JSON round trip
    field2 = sp.ControlField.from_json(field.to_json())
    assert field2.segments == field.segments

    # profile is CSV-free here: just samples
    prof = field.profile(pi, [0.0, 0.5, 1.0])
    approx(prof[0][1], 0.0, 1e-12)
    approx(prof[2][1], 8.0, 1e-9)  # identity vs X_pi is antipodal

    # PMP utilities
    tb = sp.next_bang_duration(1.0, 1.5)
    assert 0.0 < tb < 2.0 * pi / 1.5
    crossings = sp.singular_crossing_times(1.0, 1.5, 3)
    assert len(crossings) == 3
    assert min(abs(c - tb) for c in crossings) > 1e-6

    # locally robust pair and the heuristic bound
    report, delta2 = sp.design_locally_robust_pair(pi, 0.5)
    assert delta2 > 0.5
    approx(report.field.fidelity(delta2, 0.0), 0.0, 1e-12)
    approx(sp.heuristic_time_bound(pi, math.sqrt(3.0), 2.0 * math.sqrt(3.0)), 2.0 * pi, 1e-12)

    # a short GRAPE run on the selective problem, on the valley curve
    targets = [(0.0, pi), (1.0, 0.0)]
    gfield, cost, iters = sp.grape_optimize(
        targets, t_s, segments=32, restarts=3, max_iters=400, seed=1
    )
    assert cost < 1e-3, f"GRAPE cost {cost}"
    approx(sp.ensemble_cost(gfield, targets), cost, 1e-12)

    print("smoke test passed")


if __name__ == "__main__":
    main()
