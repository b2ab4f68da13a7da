"""CPE triples and their residual tensors.

A triple couples a catalog manifold with a potential function and a
constant scalar curvature. The full system is

    Hess f = (1 + f) Ro - R / (n (n-1)) f g          (full residual E)
    lap f  = -R / (n-1) f                            (trace residual)

with Ro the traceless Ricci tensor. Triples are classified by measured
residuals: exact solutions, trace-only solutions (an eigenfunction of the
Laplacian on a non-Einstein background), or non-solutions kept as
diagnostic test beds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .curvature import Bundle, evaluate_bundle
from .errors import CapabilityError, GeometryError, PreconditionError
from .tensors import SymTensor2

CLASSIFY_SAMPLES = 200
EXACT_TOL = 1e-8
TRACE_TOL = 1e-8
NON_SOLUTION_FLOOR = 1e-4
CONSTANT_R_TOL = 1e-9


class Exactness(str, enum.Enum):
    EXACT = "exact_cpe"
    TRACE_ONLY = "trace_only"
    NON_SOLUTION = "non_solution"


@dataclass(frozen=True)
class CPETriple:
    name: str
    manifold: geo.ChartedManifold
    potential: object
    scalar_curvature: float
    exactness: Exactness
    constant_scalar: bool
    max_cpe_residual: float
    max_trace_residual: float

    @property
    def dim(self) -> int:
        return self.manifold.dim


@dataclass(frozen=True)
class ResidualSummary:
    max_pointwise: float
    l2_integral: float


@dataclass(frozen=True)
class HypothesisCheck:
    id: str
    applicable: bool
    satisfied: bool
    value: float
    summary: ResidualSummary
    exactness: str


@dataclass(frozen=True)
class BesseReport:
    value: float
    nearest_eigenvalue: float
    gap: float
    in_spectrum: bool


# ---------------------------------------------------------------------------
# batched residual kernels


def cpe_residual_batch(b: Bundle, r_const: float | None = None) -> np.ndarray:
    """E = Hess f - (1+f) Ro + R/(n(n-1)) f g in frame components."""
    n = b.n
    r = b.rscal if r_const is None else r_const
    coef = (r * b.f / (n * (n - 1.0)))[:, None, None]
    return b.hess - (1.0 + b.f)[:, None, None] * b.ro + coef * np.eye(n)


def trace_residual_batch(b: Bundle, r_const: float | None = None) -> np.ndarray:
    n = b.n
    r = b.rscal if r_const is None else r_const
    return b.lap + r / (n - 1.0) * b.f


def static_operator_batch(b: Bundle) -> np.ndarray:
    """Adjoint-linearization operator: -(lap f) g + Hess f - f Ric."""
    n = b.n
    return (
        -b.lap[:, None, None] * np.eye(n)
        + b.hess
        - b.f[:, None, None] * b.ric
    )


def third_derivative_residual_batch(b: Bundle, r_const: float) -> np.ndarray:
    """f_ij,k - (1+f) Ro_ij,k - (Ro_ij - R/(n(n-1)) delta_ij) f_k."""
    n = b.n
    coef = r_const / (n * (n - 1.0))
    sub = b.ro - coef * np.eye(n)
    return (
        b.f3
        - (1.0 + b.f)[:, None, None, None] * b.covd_ro
        - np.einsum("pij,pk->pijk", sub, b.df)
    )


# ---------------------------------------------------------------------------
# triple construction / classification


def make_triple(manifold: geo.ChartedManifold, potential, name: str,
                seed: int = 0) -> CPETriple:
    """Measure residuals at fixed interior samples and classify the pair."""
    x = geo.sample_points(manifold, CLASSIFY_SAMPLES, seed=seed)
    b = evaluate_bundle(manifold, x, potential=potential, need_riemann=False,
                        need_dric=False, f_order=2)
    r_mean = float(np.mean(b.rscal))
    r_dev = float(np.max(np.abs(b.rscal - r_mean)))
    constant = r_dev <= CONSTANT_R_TOL * (1.0 + abs(r_mean))
    r_const = r_mean if constant else None
    e = cpe_residual_batch(b, r_const)
    tr = trace_residual_batch(b, r_const)
    max_e = float(np.max(np.abs(e)))
    max_tr = float(np.max(np.abs(tr)))
    if max_e <= EXACT_TOL:
        kind = Exactness.EXACT
    elif max_tr <= TRACE_TOL and max_e > NON_SOLUTION_FLOOR:
        kind = Exactness.TRACE_ONLY
    else:
        kind = Exactness.NON_SOLUTION
    if not constant and kind is not Exactness.NON_SOLUTION:
        raise GeometryError(
            f"{name}: non-constant scalar curvature cannot satisfy the system"
        )
    return CPETriple(
        name=name, manifold=manifold, potential=potential,
        scalar_curvature=r_mean, exactness=kind, constant_scalar=constant,
        max_cpe_residual=max_e, max_trace_residual=max_tr,
    )


def triple_bundle(t: CPETriple, x, *, f_order: int = 3, need_riemann: bool = True,
                  need_dric: bool = True) -> Bundle:
    return evaluate_bundle(t.manifold, x, potential=t.potential,
                           need_riemann=need_riemann, need_dric=need_dric,
                           f_order=f_order)


def _point_bundle(t: CPETriple, x) -> Bundle:
    return evaluate_bundle(t.manifold, np.atleast_2d(x), potential=t.potential,
                           need_riemann=False, need_dric=False, f_order=2)


def static_operator(t: CPETriple, x) -> SymTensor2:
    b = _point_bundle(t, x)
    return SymTensor2(static_operator_batch(b)[0])


def static_residual(t: CPETriple, x) -> SymTensor2:
    """Operator value minus the traceless Ricci target."""
    b = _point_bundle(t, x)
    return SymTensor2((static_operator_batch(b) - b.ro)[0])


def cpe_residual(t: CPETriple, x) -> SymTensor2:
    b = _point_bundle(t, x)
    r_const = t.scalar_curvature if t.constant_scalar else None
    return SymTensor2(cpe_residual_batch(b, r_const)[0])


def trace_residual(t: CPETriple, x) -> float:
    b = _point_bundle(t, x)
    r_const = t.scalar_curvature if t.constant_scalar else None
    return float(trace_residual_batch(b, r_const)[0])


def cpe_third_derivative_residual(t: CPETriple, x) -> np.ndarray:
    if t.exactness is not Exactness.EXACT:
        raise PreconditionError(
            f"third-derivative substitution holds only on exact solutions "
            f"({t.name} is {t.exactness.value})"
        )
    b = evaluate_bundle(t.manifold, np.atleast_2d(x), potential=t.potential,
                        need_riemann=False, need_dric=True, f_order=3)
    return third_derivative_residual_batch(b, t.scalar_curvature)[0]


# ---------------------------------------------------------------------------
# spectral condition


def besse_spectral_check(m: geo.ChartedManifold, r: float, n: int,
                         tol: float = 1e-9) -> BesseReport:
    """Is R/(n-1) a catalog Laplacian eigenvalue?"""
    if m.analytic_spectrum is None:
        raise CapabilityError(f"{m.name} has no analytic spectrum")
    value = r / (n - 1.0)
    lams = np.array([lam for lam, _ in m.analytic_spectrum])
    idx = int(np.argmin(np.abs(lams - value)))
    gap = float(abs(lams[idx] - value))
    return BesseReport(
        value=value,
        nearest_eigenvalue=float(lams[idx]),
        gap=gap,
        in_spectrum=gap <= tol * (1.0 + abs(value)),
    )


# ---------------------------------------------------------------------------
# theorem hypothesis predicates


WEIGHTED_GRADIENT_KS = (0, 1, 2, 3, 4)


def hypothesis_checks(t: CPETriple, order: int = 32, samples: int = CLASSIFY_SAMPLES,
                      seed: int = 0) -> dict[str, HypothesisCheck]:
    """Evaluate each rigidity-theorem hypothesis on the triple.

    Integral predicates use quadrature at the given order; pointwise ones
    scan the fixed interior samples. A satisfied hypothesis on a non-exact
    triple is not a counterexample to anything, so reports carry the
    exactness tag.
    """
    m = t.manifold
    if t.exactness is Exactness.NON_SOLUTION and not t.constant_scalar:
        r_const = None
    else:
        r_const = t.scalar_curvature
    rule = geo.build_rule(m, order)
    ints = {k: 0.0 for k in WEIGHTED_GRADIENT_KS}
    abs_ints = {k: 0.0 for k in WEIGHTED_GRADIENT_KS}
    for pts, w in rule.iter_chunks():
        b = evaluate_bundle(m, pts, potential=t.potential, need_riemann=False,
                            need_dric=False, f_order=1)
        ro_ff = np.einsum("pij,pi,pj->p", b.ro, b.df, b.df)
        wt = w * b.sqrt_det * m.charts[0].weight(pts)
        for k in WEIGHTED_GRADIENT_KS:
            vals = (1.0 + b.f) ** (2 * k) * ro_ff
            ints[k] += float(np.sum(wt * vals))
            abs_ints[k] += float(np.sum(wt * np.abs(vals)))

    x = geo.sample_points(m, samples, seed=seed)
    b = evaluate_bundle(m, x, potential=t.potential, need_riemann=False,
                        need_dric=False, f_order=1)
    ro_sq = np.einsum("pij,pij->p", b.ro, b.ro)
    ro_cube = np.einsum("pij,pjk,pki->p", b.ro, b.ro, b.ro)
    r = b.rscal if r_const is None else np.full_like(b.rscal, r_const)

    out: dict[str, HypothesisCheck] = {}
    tag = t.exactness.value

    for k in WEIGHTED_GRADIENT_KS:
        tol = 1e-9 * (1.0 + abs_ints[k])
        val = ints[k]
        out[f"weighted_gradient_sign:k{k}"] = HypothesisCheck(
            id=f"weighted_gradient_sign:k{k}", applicable=True,
            satisfied=val >= -tol, value=val,
            summary=ResidualSummary(max_pointwise=max(0.0, -val),
                                    l2_integral=max(0.0, -val)),
            exactness=tag,
        )

    mean_sq = float(np.mean(ro_sq))
    spread = float(np.max(ro_sq) - np.min(ro_sq))
    out["constant_ric_norm"] = HypothesisCheck(
        id="constant_ric_norm", applicable=True,
        satisfied=spread <= 1e-8 * (1.0 + mean_sq), value=spread,
        summary=ResidualSummary(max_pointwise=spread, l2_integral=float(np.var(ro_sq))),
        exactness=tag,
    )

    three_d = m.dim == 3
    scale3 = float(np.max(1.0 + np.abs(r) * ro_sq + np.abs(ro_cube)))

    q_lower = ro_cube + (r / 12.0) * ro_sq
    val = float(np.min(q_lower)) if three_d else float("nan")
    out["cubic_trace_lower"] = HypothesisCheck(
        id="cubic_trace_lower", applicable=three_d,
        satisfied=bool(three_d and val >= -1e-9 * scale3), value=val,
        summary=ResidualSummary(max_pointwise=max(0.0, -val) if three_d else 0.0,
                                l2_integral=0.0),
        exactness=tag,
    )

    cap = ro_sq - r**2 / 24.0
    val = float(np.max(cap)) if three_d else float("nan")
    out["ric_norm_cap"] = HypothesisCheck(
        id="ric_norm_cap", applicable=three_d,
        satisfied=bool(three_d and val <= 1e-9 * scale3), value=val,
        summary=ResidualSummary(max_pointwise=max(0.0, val) if three_d else 0.0,
                                l2_integral=0.0),
        exactness=tag,
    )

    if three_d:
        lower_violation = float(np.max(np.maximum(
            -(5.0 * r / 24.0) * ro_sq - ro_cube, 0.0)))
        upper_violation = float(np.max(np.maximum(ro_cube, 0.0)))
        worst = max(lower_violation, upper_violation)
    else:
        worst = float("nan")
    out["cubic_trace_window"] = HypothesisCheck(
        id="cubic_trace_window", applicable=three_d,
        satisfied=bool(three_d and worst <= 1e-9 * scale3), value=worst,
        summary=ResidualSummary(max_pointwise=worst if three_d else 0.0,
                                l2_integral=0.0),
        exactness=tag,
    )
    return out
