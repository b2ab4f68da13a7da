"""Analytic charted manifolds with exact metric derivatives, plus quadrature.

Catalog metrics are diagonal in their chart coordinates and every diagonal
entry is a product of single-coordinate factors (r^2, sin^2, conformal
exp(2 eps cos)), so all partial derivatives up to third order come from
closed forms, never finite differences. Scalar fields follow the same
pattern with partials to fourth order.

Coordinate conventions: spheres use hyperspherical angles
(theta_1 .. theta_{n-1} in (0, pi), theta_n in (0, 2 pi)) with

    g = r^2 diag(1, sin^2 t1, sin^2 t1 sin^2 t2, ...).

Polar sets have measure zero and both quadrature nodes and sample points
stay interior, so a single chart suffices for integration; the Chart
abstraction still carries a partition-of-unity weight so a multi-chart
entry can be added.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, EvaluationError, GeometryError

DEFAULT_CHUNK = 8192
SPECTRUM_DEPTH = 60  # eigenvalue catalog entries per factor


# ---------------------------------------------------------------------------
# single-coordinate factors with closed-form derivatives


class ConstFactor:
    def __init__(self, value: float):
        self.value = float(value)

    def d(self, order: int, t: np.ndarray) -> np.ndarray:
        if order == 0:
            return np.full_like(t, self.value)
        return np.zeros_like(t)


class SinSqFactor:
    """sin^2 t and its derivatives (sin 2t, 2 cos 2t, -4 sin 2t, -8 cos 2t)."""

    def d(self, order: int, t: np.ndarray) -> np.ndarray:
        if order == 0:
            return np.sin(t) ** 2
        if order == 1:
            return np.sin(2.0 * t)
        if order == 2:
            return 2.0 * np.cos(2.0 * t)
        if order == 3:
            return -4.0 * np.sin(2.0 * t)
        if order == 4:
            return -8.0 * np.cos(2.0 * t)
        raise CapabilityError(f"sin^2 factor has derivatives to order 4, got {order}")


class ExpCosFactor:
    """exp(2 eps cos t); derivatives via Faa di Bruno on u = 2 eps cos t."""

    def __init__(self, eps: float):
        self.eps = float(eps)

    def d(self, order: int, t: np.ndarray) -> np.ndarray:
        e = self.eps
        u1 = -2.0 * e * np.sin(t)
        u2 = -2.0 * e * np.cos(t)
        u3 = 2.0 * e * np.sin(t)
        w = np.exp(2.0 * e * np.cos(t))
        if order == 0:
            return w
        if order == 1:
            return u1 * w
        if order == 2:
            return (u2 + u1**2) * w
        if order == 3:
            return (u3 + 3.0 * u1 * u2 + u1**3) * w
        raise CapabilityError(f"conformal factor has derivatives to order 3, got {order}")


class SinFactor:
    def d(self, order: int, t: np.ndarray) -> np.ndarray:
        return np.sin(t + order * np.pi / 2.0)


class CosFactor:
    def d(self, order: int, t: np.ndarray) -> np.ndarray:
        return np.cos(t + order * np.pi / 2.0)


class PowFactor:
    def __init__(self, exponent: int):
        self.exponent = int(exponent)

    def d(self, order: int, t: np.ndarray) -> np.ndarray:
        e = self.exponent
        if order > e:
            return np.zeros_like(t)
        coef = math.perm(e, order)
        return coef * t ** (e - order)


# ---------------------------------------------------------------------------
# charts and manifolds


def _product_derivative(const: float, factors, x: np.ndarray,
                        dirs: tuple[int, ...]) -> np.ndarray:
    """Mixed partial of const * prod factors(coord) for a direction multiset.

    Factors sharing a coordinate are combined with the Leibniz rule; factors
    on distinct coordinates just multiply.
    """
    counts: dict[int, int] = {}
    for d in dirs:
        counts[d] = counts.get(d, 0) + 1
    groups: dict[int, list] = {}
    for c, f in factors:
        groups.setdefault(c, []).append(f)
    if any(c not in groups for c in counts):
        return np.zeros(x.shape[0])
    out = np.full(x.shape[0], const)
    for c, fs in groups.items():
        k = counts.get(c, 0)
        t = x[:, c]
        if len(fs) == 1:
            out = out * fs[0].d(k, t)
            continue
        acc = [fs[0].d(i, t) for i in range(k + 1)]
        for f in fs[1:]:
            nxt = [f.d(i, t) for i in range(k + 1)]
            acc = [
                sum(math.comb(j, i) * acc[i] * nxt[j - i] for i in range(j + 1))
                for j in range(k + 1)
            ]
        out = out * acc[k]
    return out


@dataclass(frozen=True)
class DiagEntry:
    """One diagonal metric entry: const * prod of factors(coord)."""

    const: float
    factors: tuple  # of (coord index, factor object)

    def derivative(self, x: np.ndarray, dirs: tuple[int, ...]) -> np.ndarray:
        return _product_derivative(self.const, self.factors, x, dirs)


@dataclass(frozen=True)
class MetricJet:
    g: np.ndarray          # (N, n, n)
    d1: np.ndarray | None  # (N, n, n, n)       d1[p,k,i,j] = dk g_ij
    d2: np.ndarray | None  # (N, n, n, n, n)    d2[p,k,l,i,j]
    d3: np.ndarray | None  # (N, n, n, n, n, n) d3[p,k,l,m,i,j]


@dataclass(frozen=True)
class Chart:
    name: str
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    entries: tuple  # of DiagEntry, length dim

    def weight(self, x: np.ndarray) -> np.ndarray:
        """Partition-of-unity weight; the catalog uses single-chart atlases."""
        return np.ones(x.shape[0])

    def metric_jet(self, x: np.ndarray, order: int = 3) -> MetricJet:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = self.dim
        npts = x.shape[0]
        g = np.zeros((npts, n, n))
        for j, e in enumerate(self.entries):
            g[:, j, j] = e.derivative(x, ())
        if order == 0:
            return MetricJet(g, None, None, None)
        d1 = np.zeros((npts, n, n, n))
        for j, e in enumerate(self.entries):
            for k in range(n):
                d1[:, k, j, j] = e.derivative(x, (k,))
        if order == 1:
            return MetricJet(g, d1, None, None)
        d2 = np.zeros((npts, n, n, n, n))
        for j, e in enumerate(self.entries):
            for k, l in itertools.combinations_with_replacement(range(n), 2):
                val = e.derivative(x, (k, l))
                d2[:, k, l, j, j] = val
                d2[:, l, k, j, j] = val
        if order == 2:
            return MetricJet(g, d1, d2, None)
        d3 = np.zeros((npts, n, n, n, n, n))
        for j, e in enumerate(self.entries):
            for dirs in itertools.combinations_with_replacement(range(n), 3):
                val = e.derivative(x, dirs)
                for p in set(itertools.permutations(dirs)):
                    d3[:, p[0], p[1], p[2], j, j] = val
        return MetricJet(g, d1, d2, d3)


@dataclass(frozen=True)
class ChartedManifold:
    name: str
    dim: int
    charts: tuple
    closed: bool
    parallel_ricci: bool
    analytic_spectrum: tuple | None = None  # of (eigenvalue, multiplicity)
    analytic_volume: float | None = None
    radius: float | None = None  # set for sphere charts (embedding helpers)

    def metric_jet(self, x, order: int = 3, chart: int = 0) -> MetricJet:
        return self.charts[chart].metric_jet(x, order)

    def chart_box(self, chart: int = 0):
        c = self.charts[chart]
        return c.lo, c.hi


# ---------------------------------------------------------------------------
# catalog constructors


def _harmonic_multiplicity(n: int, k: int) -> int:
    if k == 0:
        return 1
    return math.comb(n + k, n) - math.comb(n + k - 2, n)


def _sphere_volume(n: int, r: float) -> float:
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0) * r**n


def sphere(n: int, r: float) -> ChartedManifold:
    """Round n-sphere of radius r in hyperspherical angles, 2 <= n <= 4."""
    if not 2 <= n <= 4:
        raise ValueError(f"sphere catalog covers 2 <= n <= 4, got {n}")
    if r <= 0:
        raise ValueError("radius must be positive")
    entries = []
    for j in range(n):
        factors = tuple((m, SinSqFactor()) for m in range(j))
        entries.append(DiagEntry(const=r * r, factors=factors))
    lo = np.zeros(n)
    hi = np.array([math.pi] * (n - 1) + [2.0 * math.pi])
    chart = Chart(name="hyperspherical", dim=n, lo=lo, hi=hi, entries=tuple(entries))
    spec = tuple(
        (k * (k + n - 1.0) / (r * r), _harmonic_multiplicity(n, k))
        for k in range(SPECTRUM_DEPTH)
    )
    return ChartedManifold(
        name=f"sphere{n}(r={r:g})",
        dim=n,
        charts=(chart,),
        closed=True,
        parallel_ricci=True,
        analytic_spectrum=spec,
        analytic_volume=_sphere_volume(n, r),
        radius=r,
    )


def _merge_spectrum(pairs, cutoff):
    pairs = sorted(p for p in pairs if p[0] <= cutoff)
    merged: list[list] = []
    for lam, mult in pairs:
        if merged and abs(lam - merged[-1][0]) <= 1e-12 * (1.0 + abs(lam)):
            merged[-1][1] += mult
        else:
            merged.append([lam, mult])
    return tuple((lam, m) for lam, m in merged)


def product(m1: ChartedManifold, m2: ChartedManifold) -> ChartedManifold:
    """Riemannian product; block-diagonal metric on concatenated coordinates."""
    if len(m1.charts) != 1 or len(m2.charts) != 1:
        raise ValueError("product supports single-chart factors")
    c1, c2 = m1.charts[0], m2.charts[0]
    shift = m1.dim
    entries = list(c1.entries)
    for e in c2.entries:
        entries.append(
            DiagEntry(const=e.const, factors=tuple((c + shift, f) for c, f in e.factors))
        )
    chart = Chart(
        name="product",
        dim=m1.dim + m2.dim,
        lo=np.concatenate([c1.lo, c2.lo]),
        hi=np.concatenate([c1.hi, c2.hi]),
        entries=tuple(entries),
    )
    spec = None
    if m1.analytic_spectrum and m2.analytic_spectrum:
        cutoff = min(m1.analytic_spectrum[-1][0], m2.analytic_spectrum[-1][0])
        sums = (
            (l1 + l2, mu1 * mu2)
            for l1, mu1 in m1.analytic_spectrum
            for l2, mu2 in m2.analytic_spectrum
        )
        spec = _merge_spectrum(sums, cutoff)
    vol = None
    if m1.analytic_volume and m2.analytic_volume:
        vol = m1.analytic_volume * m2.analytic_volume
    return ChartedManifold(
        name=f"{m1.name} x {m2.name}",
        dim=m1.dim + m2.dim,
        charts=(chart,),
        closed=m1.closed and m2.closed,
        parallel_ricci=m1.parallel_ricci and m2.parallel_ricci,
        analytic_spectrum=spec,
        analytic_volume=vol,
    )


def conformal_sphere(n: int, r: float, eps: float) -> ChartedManifold:
    """Sphere metric scaled by exp(2 eps cos theta_1).

    Non-constant scalar curvature and non-parallel Ricci: the stress case
    for derivative machinery. Still a smooth closed manifold (the factor is
    the restriction of a smooth ambient function).
    """
    base = sphere(n, r)
    c = base.charts[0]
    entries = tuple(
        DiagEntry(const=e.const, factors=((0, ExpCosFactor(eps)),) + e.factors)
        for e in c.entries
    )
    chart = Chart(name="conformal", dim=n, lo=c.lo, hi=c.hi, entries=entries)
    return ChartedManifold(
        name=f"conformal-sphere{n}(eps={eps:g})",
        dim=n,
        charts=(chart,),
        closed=True,
        parallel_ricci=False,
        analytic_spectrum=None,
        analytic_volume=None,
        radius=r,
    )


def flat_box(n: int) -> ChartedManifold:
    """Euclidean box [0,1]^n; not closed, used for flat-space sanity checks."""
    entries = tuple(DiagEntry(const=1.0, factors=()) for _ in range(n))
    chart = Chart(name="box", dim=n, lo=np.zeros(n), hi=np.ones(n), entries=entries)
    return ChartedManifold(
        name=f"box{n}",
        dim=n,
        charts=(chart,),
        closed=False,
        parallel_ricci=True,
        analytic_spectrum=None,
        analytic_volume=1.0,
    )


# ---------------------------------------------------------------------------
# scalar fields


@dataclass(frozen=True)
class ScalarJet:
    f: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray | None = None


def _fill_symmetric(npts: int, n: int, order: int, compute) -> np.ndarray:
    out = np.zeros((npts,) + (n,) * order)
    for dirs in itertools.combinations_with_replacement(range(n), order):
        val = compute(dirs)
        for p in set(itertools.permutations(dirs)):
            out[(slice(None),) + p] = val
    return out


class SeparableField:
    """Product of single-coordinate factors times an amplitude.

    Mixed partials factor into per-coordinate derivatives, so the jet is
    exact to order 4.
    """

    def __init__(self, dim: int, amplitude: float, factors):
        self.dim = dim
        self.amplitude = float(amplitude)
        self.factors = tuple(factors)  # (coord, factor)

    def _derivative(self, x: np.ndarray, dirs: tuple[int, ...]) -> np.ndarray:
        return _product_derivative(self.amplitude, self.factors, x, dirs)

    def jet(self, x: np.ndarray, order: int = 3, chart: int = 0) -> ScalarJet:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        npts, n = x.shape[0], self.dim
        f = self._derivative(x, ())
        d1 = np.stack([self._derivative(x, (k,)) for k in range(n)], axis=1)
        d2 = _fill_symmetric(npts, n, 2, lambda dirs: self._derivative(x, dirs))
        d3 = _fill_symmetric(npts, n, 3, lambda dirs: self._derivative(x, dirs))
        d4 = None
        if order >= 4:
            d4 = _fill_symmetric(npts, n, 4, lambda dirs: self._derivative(x, dirs))
        return ScalarJet(f, d1, d2, d3, d4)


class PolynomialField:
    """Sum of monomials in chart coordinates; exact partials to order 4."""

    def __init__(self, dim: int, terms):
        self.dim = dim
        self.terms = tuple((float(c), tuple(e)) for c, e in terms)

    def _derivative(self, x: np.ndarray, dirs: tuple[int, ...]) -> np.ndarray:
        counts: dict[int, int] = {}
        for d in dirs:
            counts[d] = counts.get(d, 0) + 1
        out = np.zeros(x.shape[0])
        for coef, expo in self.terms:
            term = np.full(x.shape[0], coef)
            for c in range(self.dim):
                term = term * PowFactor(expo[c]).d(counts.get(c, 0), x[:, c])
            out += term
        return out

    def jet(self, x: np.ndarray, order: int = 3, chart: int = 0) -> ScalarJet:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        npts, n = x.shape[0], self.dim
        f = self._derivative(x, ())
        d1 = np.stack([self._derivative(x, (k,)) for k in range(n)], axis=1)
        d2 = _fill_symmetric(npts, n, 2, lambda dirs: self._derivative(x, dirs))
        d3 = _fill_symmetric(npts, n, 3, lambda dirs: self._derivative(x, dirs))
        d4 = None
        if order >= 4:
            d4 = _fill_symmetric(npts, n, 4, lambda dirs: self._derivative(x, dirs))
        return ScalarJet(f, d1, d2, d3, d4)


class ZeroField:
    def __init__(self, dim: int):
        self.dim = dim

    def jet(self, x: np.ndarray, order: int = 3, chart: int = 0) -> ScalarJet:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        npts, n = x.shape[0], self.dim
        zero = lambda k: np.zeros((npts,) + (n,) * k)  # noqa: E731
        d4 = zero(4) if order >= 4 else None
        return ScalarJet(zero(0), zero(1), zero(2), zero(3), d4)


class ConstantField:
    def __init__(self, dim: int, value: float):
        self.dim = dim
        self.value = float(value)

    def jet(self, x: np.ndarray, order: int = 3, chart: int = 0) -> ScalarJet:
        z = ZeroField(self.dim).jet(x, order, chart)
        return ScalarJet(z.f + self.value, z.d1, z.d2, z.d3, z.d4)


class SquaredField:
    """Square of a base field, jets assembled by the Leibniz rule."""

    def __init__(self, base):
        self.base = base
        self.dim = base.dim

    def jet(self, x: np.ndarray, order: int = 3, chart: int = 0) -> ScalarJet:
        b = self.base.jet(x, order=max(order, 3) if order < 4 else 4, chart=chart)
        f, g1, g2, g3 = b.f, b.d1, b.d2, b.d3
        sq = f**2
        d1 = 2.0 * f[:, None] * g1
        d2 = 2.0 * (np.einsum("pi,pj->pij", g1, g1) + f[:, None, None] * g2)
        d3 = 2.0 * (
            f[:, None, None, None] * g3
            + np.einsum("pij,pk->pijk", g2, g1)
            + np.einsum("pik,pj->pijk", g2, g1)
            + np.einsum("pjk,pi->pijk", g2, g1)
        )
        d4 = None
        if order >= 4:
            if b.d4 is None:
                raise CapabilityError("base field lacks fourth derivatives")
            g4 = b.d4
            d4 = 2.0 * (
                f[:, None, None, None, None] * g4
                + np.einsum("pi,pjkl->pijkl", g1, g3)
                + np.einsum("pj,pikl->pijkl", g1, g3)
                + np.einsum("pk,pijl->pijkl", g1, g3)
                + np.einsum("pl,pijk->pijkl", g1, g3)
                + np.einsum("pij,pkl->pijkl", g2, g2)
                + np.einsum("pik,pjl->pijkl", g2, g2)
                + np.einsum("pil,pjk->pijkl", g2, g2)
            )
        return ScalarJet(sq, d1, d2, d3, d4)


def height_function(m: ChartedManifold, axis: int, amplitude: float,
                    coord_offset: int = 0, field_dim: int | None = None,
                    sphere_dim: int | None = None):
    """Restriction of the ambient coordinate x_axis / r to a catalog sphere.

    axis is 1-based in ambient R^{n+1}. coord_offset places the factor
    block inside a product chart; field_dim is the chart dimension when it
    differs from the sphere's.
    """
    n = sphere_dim if sphere_dim is not None else m.dim
    dim = field_dim if field_dim is not None else m.dim
    if not 1 <= axis <= n + 1:
        raise ValueError(f"axis must be in 1..{n + 1}, got {axis}")
    factors = []
    last = n if axis == n + 1 else axis - 1
    for c in range(last):
        factors.append((coord_offset + c, SinFactor()))
    if axis <= n:
        factors.append((coord_offset + axis - 1, CosFactor()))
    return SeparableField(dim=dim, amplitude=amplitude, factors=factors)


# ---------------------------------------------------------------------------
# sphere embedding helpers (ambient tangent fields, cross-checks)


def sphere_ambient(x: np.ndarray, n: int, r: float) -> np.ndarray:
    """Ambient coordinates of hyperspherical points, shape (N, n+1)."""
    x = np.atleast_2d(x)
    out = np.empty((x.shape[0], n + 1))
    run = np.full(x.shape[0], r, dtype=float)
    for a in range(n):
        out[:, a] = run * np.cos(x[:, a])
        run = run * np.sin(x[:, a])
    out[:, n] = run
    return out


def sphere_ambient_jacobian(x: np.ndarray, n: int, r: float) -> np.ndarray:
    """d(ambient)/d(angles), shape (N, n+1, n)."""
    x = np.atleast_2d(x)
    npts = x.shape[0]
    jac = np.zeros((npts, n + 1, n))
    for a in range(n + 1):
        # ambient coord a = r * prod_{m<min(a,n)} sin(t_m) * (cos(t_a) if a < n)
        for k in range(n):
            term = np.full(npts, r, dtype=float)
            involved = False
            for m in range(min(a, n)):
                term = term * (np.cos(x[:, m]) if m == k else np.sin(x[:, m]))
                involved = involved or m == k
            if a < n:
                term = term * (-np.sin(x[:, a]) if a == k else np.cos(x[:, a]))
                involved = involved or a == k
            jac[:, a, k] = term if involved else 0.0
    return jac


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    manifold_name: str
    order: int
    chart_axes: tuple  # per chart: tuple of (nodes, weights) per axis

    def n_nodes(self, chart: int = 0) -> int:
        return int(np.prod([len(nodes) for nodes, _ in self.chart_axes[chart]]))

    def iter_chunks(self, chart: int = 0, chunk: int = DEFAULT_CHUNK):
        """Yield (points, weights) blocks in a fixed deterministic order."""
        axes = self.chart_axes[chart]
        shape = tuple(len(nodes) for nodes, _ in axes)
        total = int(np.prod(shape))
        for start in range(0, total, chunk):
            idx = np.arange(start, min(start + chunk, total))
            multi = np.unravel_index(idx, shape)
            pts = np.stack([axes[d][0][multi[d]] for d in range(len(axes))], axis=1)
            w = np.ones(len(idx))
            for d in range(len(axes)):
                w = w * axes[d][1][multi[d]]
            yield pts, w


def build_rule(m: ChartedManifold, order: int) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule mapped into each chart box.

    Gauss nodes are interior to (lo, hi), so coordinate singularities at the
    box faces are never evaluated.
    """
    if not 4 <= order <= 128:
        raise ValueError(f"order must be in [4, 128], got {order}")
    t, w = np.polynomial.legendre.leggauss(order)
    charts = []
    for c in m.charts:
        axes = []
        for d in range(c.dim):
            lo, hi = c.lo[d], c.hi[d]
            axes.append(((lo + (t + 1.0) * 0.5 * (hi - lo)), w * 0.5 * (hi - lo)))
        charts.append(tuple(axes))
    return QuadratureRule(manifold_name=m.name, order=order, chart_axes=tuple(charts))


def integrate(m: ChartedManifold, integrand, rule: QuadratureRule,
              chunk: int = DEFAULT_CHUNK) -> float:
    """Integrate a scalar evaluator against the Riemannian volume form.

    integrand(chart_index, points) -> values. Accumulation runs in a fixed
    chunk order, so results are deterministic for a given rule.
    """
    total = 0.0
    for ci, chart in enumerate(m.charts):
        for pts, w in rule.iter_chunks(ci, chunk):
            g = chart.metric_jet(pts, order=0).g
            det = np.linalg.det(g)
            if np.any(det <= 0.0):
                raise GeometryError(f"metric not positive definite on {m.name}")
            vals = np.asarray(integrand(ci, pts), dtype=float)
            if not np.all(np.isfinite(vals)):
                bad = int(np.argmin(np.isfinite(vals)))
                raise EvaluationError(
                    f"non-finite integrand at chart {ci} node {pts[bad].tolist()}"
                )
            total += float(np.sum(vals * w * np.sqrt(det) * chart.weight(pts)))
    return total


def volume(m: ChartedManifold, rule: QuadratureRule) -> float:
    return integrate(m, lambda ci, x: np.ones(x.shape[0]), rule)


# ---------------------------------------------------------------------------
# deterministic interior sample points


def _kronecker_alpha(dim: int) -> np.ndarray:
    # root of x^(d+1) = x + 1 (generalized golden ratio)
    phi = 1.3
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    return np.array([phi ** -(j + 1) for j in range(dim)])


def sample_points(m: ChartedManifold, count: int, seed: int = 0,
                  chart: int = 0, margin: float = 0.05) -> np.ndarray:
    """Low-discrepancy interior points (Kronecker sequence, seeded origin)."""
    c = m.charts[chart]
    alpha = _kronecker_alpha(c.dim)
    i = np.arange(1, count + 1)[:, None]
    origin = 0.5 + 0.61803398874989485 * (seed * alpha + alpha**2)
    u = np.mod(origin + i * alpha, 1.0)
    return c.lo + (margin + (1.0 - 2.0 * margin) * u) * (c.hi - c.lo)
