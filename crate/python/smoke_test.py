"""Smoke test for the cylwalk_py extension.

Build the extension first:

    cargo build -p cylwalk-py

then run this script; it locates the cdylib under target/ and loads it.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path


def load_module():
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libcylwalk_py.so", "libcylwalk_py.dylib", "cylwalk_py.dll")
    ]
    lib = next((c for c in candidates if c.exists()), None)
    if lib is None:
        sys.exit("build the extension first: cargo build -p cylwalk-py")
    staging = Path(tempfile.mkdtemp(prefix="cylwalk_py_"))
    shutil.copy(lib, staging / "cylwalk_py.so")
    sys.path.insert(0, str(staging))
    import cylwalk_py

    return cylwalk_py


def main():
    m = load_module()

    r, h = m.vertical_scales(10)
    assert (r, h) == (10, 73), (r, h)
    p, q = m.p_q_n(10)
    assert abs(p + q - 1.0) < 1e-15 and abs(p - (h + r) / (2 * h)) < 1e-15

    rep = m.key_identity(2, 4, [[0, 0, 0], [1, 0, 1], [2, 3, -2]])
    assert rep["max_residual"] < 1e-9 and rep["sum_residual"] < 1e-9, rep

    tv4, law = m.return_law(2, 4)
    assert abs(sum(law) - 1.0) < 1e-12 and tv4 < 1e-6
    tv6, _ = m.return_law(2, 6)
    assert tv6 < tv4

    assert m.psi(0, 0.2, 10) < 1e-9
    assert m.psi(0, 0.8, 10) > 0.1
    ld = m.ld_check(0, 0.5, 12, 10)
    assert ld["lhs"] < ld["bound"] or ld["tight"], ld

    closed = m.zeta_laplace_closed(1.0, 1.0)
    assert abs(closed - 0.8931) < 5e-4, closed
    zs = m.zeta_samples(1.0, 500, 200, seed=7)
    assert len(zs) == 200 and all(z >= 0 for z in zs)
    assert zs == m.zeta_samples(1.0, 500, 200, seed=7)  # seeded determinism

    dt = m.disconnection_time(2, 4, seed=5)
    assert dt["t_n"] > 0 and dt["trace_size"] > 0, dt

    vc = m.vacant_check(1, 0, 1.0, 3000, seed=11)
    assert abs(vc["zscore"]) <= 4.0, vc
    assert 0.0 < vc["target"] < 1.0

    params = m.DominationParams(2, 12, 0.1, 0.6, 0.5)
    assert params.k == 0 and params.h_n == 98
    dom = params.domination_experiment(reps=20, seed=3)
    assert dom["degenerate_k"] and dom["frac_ok"] == 1.0, dom

    crit = m.run_criterion(12, seed=42)
    assert crit["status"] == "Pass", crit

    print("smoke test: all assertions passed")
    print(f"  p_10 = {p:.6f}, tv(N=4) = {tv4:.3e}, zeta closed form = {closed:.6f}")
    print(f"  vacant z = {vc['zscore']:.2f}, disconnection T_4 = {dt['t_n']}")


if __name__ == "__main__":
    main()
