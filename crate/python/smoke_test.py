"""Smoke test for the Python bindings.

Build first:
    cargo build --release -p planar-invariants-py --features extension-module
then run `python3 python/smoke_test.py` (or point PLANAR_INVARIANTS_LIB at the
built shared library).
"""

import cmath
import importlib.util
import json
import math
import os
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [os.environ.get("PLANAR_INVARIANTS_LIB")] + [
        str(ROOT / "target" / profile / name)
        for profile in ("release", "debug")
        for name in ("libplanar_invariants_py.so", "libplanar_invariants_py.dylib", "planar_invariants_py.dll")
    ]
    for path in filter(None, candidates):
        if os.path.exists(path):
            spec = importlib.util.spec_from_file_location("planar_invariants_py", path)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("shared library not found; build crates/python with --features extension-module")


def main():
    pi = load_module()

    disk = pi.Solver(json.dumps({"kind": "disk"}), 128)
    z, a = complex(0.3, -0.2), complex(-0.1, 0.4)
    exact = 1 / (2 * math.pi * (1 - z * a.conjugate()))
    assert abs(disk.szego(z, a) - exact) < 1e-12 * abs(exact)
    assert abs(disk.caratheodory(z) - 1 / (1 - abs(z) ** 2)) < 1e-12
    mobius = (z - a) / (1 - a.conjugate() * z)
    assert abs(disk.ahlfors(z, a) - mobius) < 1e-12

    ellipse = pi.Solver(json.dumps({"kind": "ellipse", "a": 1.3, "b": 1.0}), 256)
    f = ellipse.ahlfors(complex(0.5, 0.2), 0j)
    assert abs(f) < 1
    boundary = cmath.rect(1.0, 0.7)
    assert not ellipse.contains(complex(1.3, 0.5))
    try:
        ellipse.caratheodory(complex(2.0, 0.0))
    except ValueError:
        pass
    else:
        raise AssertionError("exterior point accepted")
    assert ellipse.is_degraded(complex(1.3 * boundary.real, boundary.imag) * (1 - 1e-6))

    out = pi.run_experiment(json.dumps({
        "experiment": {
            "kind": "kernel_check",
            "nodes_per_curve": 128,
            "a": [0.3, -0.2],
            "points": {"kind": "square", "n": 7, "half_width": 0.6},
        }
    }))
    assert out["columns"][:3] == ["x", "y", "relative_error"]
    assert len(out["rows"]) == 49
    assert out["metadata"]["max_relative_error"] < 1e-8

    try:
        pi.run_experiment('{"experiment": {"kind": "nope"}}')
    except ValueError:
        pass
    else:
        raise AssertionError("bad configuration accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
