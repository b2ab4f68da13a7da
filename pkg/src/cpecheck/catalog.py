"""Named test cases and the JSON case-manifest interface.

A manifest fully determines a run:

    {"manifold": {"kind": "sphere", "dim": 3, "radius": 1.0},
     "potential": {"kind": "height", "axis": 4, "amplitude": 1.0},
     "quadrature_order": 32, "samples": 200, "seed": 0}

kinds: "sphere", "product" (with "factors": [manifold, manifold]),
"conformal-sphere" (adds "eps"), "box". Potentials: "height" (ambient
coordinate restriction; "factor" selects the product factor it lives on)
or "zero".
"""

from __future__ import annotations

import copy
import functools

from . import cpe, geometry as geo
from .errors import ManifestError

MANIFESTS: dict[str, dict] = {
    "sphere2": {
        "manifold": {"kind": "sphere", "dim": 2, "radius": 1.0},
        "potential": {"kind": "height", "axis": 3, "amplitude": 1.0},
        "quadrature_order": 32, "samples": 200, "seed": 0,
    },
    "sphere3": {
        "manifold": {"kind": "sphere", "dim": 3, "radius": 1.0},
        "potential": {"kind": "height", "axis": 4, "amplitude": 1.0},
        "quadrature_order": 32, "samples": 200, "seed": 0,
    },
    "sphere3-r2": {
        "manifold": {"kind": "sphere", "dim": 3, "radius": 2.0},
        "potential": {"kind": "height", "axis": 4, "amplitude": 1.0},
        "quadrature_order": 32, "samples": 200, "seed": 0,
    },
    "sphere4": {
        "manifold": {"kind": "sphere", "dim": 4, "radius": 1.0},
        "potential": {"kind": "height", "axis": 5, "amplitude": 1.0},
        "quadrature_order": 32, "samples": 200, "seed": 0,
    },
    "product-s2xs2": {
        "manifold": {"kind": "product", "factors": [
            {"kind": "sphere", "dim": 2, "radius": 1.0},
            {"kind": "sphere", "dim": 2, "radius": 1.0},
        ]},
        "potential": {"kind": "height", "axis": 1, "amplitude": 1.0, "factor": 0},
        "quadrature_order": 32, "samples": 200, "seed": 0,
    },
    "product-trace-only": {
        "manifold": {"kind": "product", "factors": [
            {"kind": "sphere", "dim": 2, "radius": 1.0},
            {"kind": "sphere", "dim": 2, "radius": 0.7071067811865476},
        ]},
        "potential": {"kind": "height", "axis": 1, "amplitude": 1.0, "factor": 0},
        "quadrature_order": 32, "samples": 200, "seed": 0,
    },
    "perturbed-sphere3": {
        "manifold": {"kind": "conformal-sphere", "dim": 3, "radius": 1.0, "eps": 0.1},
        "potential": {"kind": "height", "axis": 4, "amplitude": 1.0},
        "quadrature_order": 32, "samples": 200, "seed": 0,
    },
}

# closed manifolds participating in integral sweeps, in listing order
CLOSED_CASES = (
    "sphere2", "sphere3", "sphere3-r2", "sphere4",
    "product-s2xs2", "product-trace-only", "perturbed-sphere3",
)


def case_names() -> tuple[str, ...]:
    return tuple(MANIFESTS)


def _fail(path: str, msg: str):
    raise ManifestError(f"manifest.{path}: {msg}")


def _need(d: dict, key: str, path: str):
    if key not in d:
        _fail(f"{path}.{key}", "missing required field")
    return d[key]


def _validate_manifold(d: dict, path: str = "manifold") -> None:
    if not isinstance(d, dict):
        _fail(path, "must be an object")
    kind = _need(d, "kind", path)
    if kind in ("sphere", "conformal-sphere"):
        dim = _need(d, "dim", path)
        if not isinstance(dim, int) or not 2 <= dim <= 4:
            _fail(f"{path}.dim", "must be an integer in [2, 4]")
        r = _need(d, "radius", path)
        if not isinstance(r, (int, float)) or r <= 0:
            _fail(f"{path}.radius", "must be > 0")
        if kind == "conformal-sphere":
            eps = _need(d, "eps", path)
            if not isinstance(eps, (int, float)) or abs(eps) >= 0.5:
                _fail(f"{path}.eps", "must be a real with |eps| < 0.5")
    elif kind == "product":
        factors = _need(d, "factors", path)
        if not isinstance(factors, list) or len(factors) != 2:
            _fail(f"{path}.factors", "must be a list of two manifolds")
        for i, f in enumerate(factors):
            _validate_manifold(f, f"{path}.factors[{i}]")
    elif kind == "box":
        dim = _need(d, "dim", path)
        if not isinstance(dim, int) or not 2 <= dim <= 4:
            _fail(f"{path}.dim", "must be an integer in [2, 4]")
    else:
        _fail(f"{path}.kind", f"unknown kind {kind!r}")


def validate_manifest(d: dict) -> None:
    if not isinstance(d, dict):
        raise ManifestError("manifest: must be a JSON object")
    _validate_manifold(_need(d, "manifold", ""))
    pot = _need(d, "potential", "")
    kind = _need(pot, "kind", "potential")
    if kind not in ("height", "zero"):
        _fail("potential.kind", f"unknown kind {kind!r}")
    if kind == "height":
        axis = _need(pot, "axis", "potential")
        if not isinstance(axis, int) or axis < 1:
            _fail("potential.axis", "must be a positive integer")
        amp = _need(pot, "amplitude", "potential")
        if not isinstance(amp, (int, float)):
            _fail("potential.amplitude", "must be a real number")
    for key, lo, hi in (("quadrature_order", 4, 128), ("samples", 1, 10**8),
                        ("seed", 0, 2**32)):
        if key in d:
            v = d[key]
            if not isinstance(v, int) or not lo <= v <= hi:
                _fail(key, f"must be an integer in [{lo}, {hi}]")


def build_manifold(d: dict) -> geo.ChartedManifold:
    kind = d["kind"]
    if kind == "sphere":
        return geo.sphere(d["dim"], float(d["radius"]))
    if kind == "conformal-sphere":
        return geo.conformal_sphere(d["dim"], float(d["radius"]), float(d["eps"]))
    if kind == "product":
        return geo.product(build_manifold(d["factors"][0]),
                           build_manifold(d["factors"][1]))
    if kind == "box":
        return geo.flat_box(d["dim"])
    raise ManifestError(f"manifest.manifold.kind: unknown kind {kind!r}")


def build_potential(pd: dict, md: dict, m: geo.ChartedManifold):
    if pd["kind"] == "zero":
        return geo.ZeroField(m.dim)
    axis = pd["axis"]
    amplitude = float(pd["amplitude"])
    if md["kind"] == "product":
        factor = pd.get("factor", 0)
        dims = [f["dim"] for f in md["factors"]]
        if not 0 <= factor < len(dims):
            _fail("potential.factor", f"must index a factor (0..{len(dims) - 1})")
        offset = sum(dims[:factor])
        sphere_dim = dims[factor]
        if axis > sphere_dim + 1:
            _fail("potential.axis", f"factor {factor} admits axes 1..{sphere_dim + 1}")
        return geo.height_function(m, axis=axis, amplitude=amplitude,
                                   coord_offset=offset, field_dim=m.dim,
                                   sphere_dim=sphere_dim)
    if md["kind"] == "box":
        _fail("potential.kind", "height potentials need a sphere-like manifold")
    if axis > m.dim + 1:
        _fail("potential.axis", f"must be in 1..{m.dim + 1}")
    return geo.height_function(m, axis=axis, amplitude=amplitude)


def triple_from_manifest(manifest: dict, name: str = "manifest") -> cpe.CPETriple:
    validate_manifest(manifest)
    m = build_manifold(manifest["manifold"])
    f = build_potential(manifest["potential"], manifest["manifold"], m)
    return cpe.make_triple(m, f, name=name, seed=int(manifest.get("seed", 0)))


@functools.lru_cache(maxsize=None)
def get_triple(name: str) -> cpe.CPETriple:
    if name not in MANIFESTS:
        raise ManifestError(f"unknown case {name!r}; known: {', '.join(MANIFESTS)}")
    return triple_from_manifest(MANIFESTS[name], name=name)


def get_manifest(name: str) -> dict:
    if name not in MANIFESTS:
        raise ManifestError(f"unknown case {name!r}; known: {', '.join(MANIFESTS)}")
    return copy.deepcopy(MANIFESTS[name])
