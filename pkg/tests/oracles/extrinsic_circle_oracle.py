"""Independent oracle for extrinsic circles of S^2 x R.

Run as a script to regenerate tests/fixtures/extrinsic_circle.json.  The
residual of a curve is computed here from scratch with a sixth-order central
stencil: the curvature vector K is the tangential part of gamma'', and the
curve is an extrinsic circle when the part of the covariant derivative of K
normal to gamma' vanishes.

Three regimes of the helix family gamma(t) = ((r cos wt, r sin wt, z0), v t)
are scanned.  With z0 = 0 it is a geodesic, with v = 0 a circle in a slice;
both lie in totally geodesic surfaces.  With z0 != 0 and v != 0 the residual
stays bounded away from zero, so no full extrinsic circle lives in this
family.  The Frenet construction of the library is then checked with the
same residual.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

H = 2e-3
_W = np.array([-1, 9, -45, 0, 45, -9, 1]) / 60.0


def d1(fn, t, h=H):
    return sum(w * fn(t + (k - 3) * h) for k, w in enumerate(_W) if w) / h


def sphere_projector(p):
    c = p[:3]
    P = np.eye(4)
    P[:3, :3] -= np.outer(c, c) / float(c @ c)
    return P


def residual(curve, t):
    T = d1(curve, t)
    K = lambda s: sphere_projector(curve(s)) @ d1(lambda u: d1(curve, u), s)
    DK = sphere_projector(curve(t)) @ d1(K, t)
    tn = T / np.linalg.norm(T)
    normal = DK - (DK @ tn) * tn
    return float(np.linalg.norm(normal)), float(np.linalg.norm(K(t))), abs(float(np.linalg.norm(T)) - 1)


def helix(z0, v):
    r = math.sqrt(1 - z0 * z0)
    w = math.sqrt(1 - v * v) / r
    return lambda t: np.array([r * math.cos(w * t), r * math.sin(w * t), z0, v * t])


def worst_over(curve, ts=np.linspace(-0.6, 0.6, 5)):
    return max(residual(curve, float(t))[0] for t in ts)


def compute() -> dict:
    zs = [round(0.1 * i, 1) for i in range(1, 10)]
    vs = [round(0.1 * i, 1) for i in range(1, 10)]
    full = {(z, v): worst_over(helix(z, v)) for z in zs for v in vs}
    (zmin, vmin), rmin = min(full.items(), key=lambda kv: kv[1])
    geodesic = max(worst_over(helix(0.0, v)) for v in vs)
    slice_circle = max(worst_over(helix(z, 0.0)) for z in zs)

    from prodform.gallery import build, circle_fullness
    inst = build("full_circle")
    ts = np.linspace(-0.8, 0.8, 9)
    res = [residual(inst.circle, float(t)) for t in ts]
    fullness = circle_fullness(inst)
    return {
        "helix": {"z0_grid": zs, "v_grid": vs, "min_residual": rmin, "argmin": [zmin, vmin],
                  "geodesic_max_residual": geodesic, "slice_circle_max_residual": slice_circle},
        "frenet": {"kappa": inst.params["kappa"], "amplitude": inst.params["amplitude"],
                   "max_normal_derivative": max(r[0] for r in res),
                   "curvature": float(np.mean([r[1] for r in res])),
                   "max_speed_defect": max(r[2] for r in res),
                   "height_range": fullness["height_range"], "planarity": fullness["planarity"]},
    }


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "fixtures" / "extrinsic_circle.json"
    out.write_text(json.dumps(compute(), indent=2, sort_keys=True) + "\n")
    print(out.read_text())
