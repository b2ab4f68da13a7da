"""Integral identities as executable checks.

Each identity couples a named integrand (split into terms, reported
left-to-right) with a vector field whose divergence generates it on exact
CPE data. Two numbers come out of every check:

  * total: quadrature of the integrand terms; vanishes on exact triples.
  * divergence_check: quadrature of div V computed with no CPE assumption
    (covariant Leibniz expansion, or central differences of the coordinate
    flux when curvature second derivatives would be needed). This must
    vanish on every closed manifold, exact or not.

Verdicts: pass when the triple is exact and both numbers sit inside
tolerance, not-applicable (with full diagnostics) on trace-only and
non-solution data, fail when a number escapes its tolerance.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import catalog, cpe, geometry as geo
from .curvature import Bundle, evaluate_bundle
from .errors import ManifestError, PreconditionError

TOTAL_RTOL = 1e-6       # quadrature totals, scale-relative
DIV_RTOL = 1e-6         # divergence-theorem residual, scale-relative
POINTWISE_TOL = 1e-8    # claimed-vs-computed divergence at samples
FD_STEP = 1e-6

IDENTITY_IDS = (
    "prop21:0", "prop21:1", "prop21:2", "prop21:3", "prop21:4",
    "prop22", "prop23", "prop31", "prop32", "id314", "id315", "id316",
)

IDENTITY_LABELS = {
    "prop21": "divergence of (1+f)^k Ro grad-f flux, any n >= 3",
    "prop22": "divergence of f Ro grad-f flux, any n >= 3",
    "prop23": "linear combination prop21:1 - prop22, any n >= 3",
    "prop31": "cubic curvature flux (Ro . Rbar . grad f), n = 3",
    "prop32": "Bochner-type balance with |grad Ro|^2 term, n = 3",
    "id314": "degree-3 traceless-Ricci flux identity, n = 3",
    "id315": "degree-4 traceless-Ricci flux identity, n = 3",
    "id316": "degree-5 traceless-Ricci flux identity, n = 3",
}


@dataclass(frozen=True)
class IdentityCase:
    id: str
    base: str
    k: int | None
    dim3_only: bool


def parse_identity(case_id: str) -> IdentityCase:
    base, _, arg = case_id.partition(":")
    if base == "prop21":
        if arg == "":
            raise ManifestError("prop21 needs an exponent, e.g. prop21:0")
        k = int(arg)
        if k < 0:
            raise PreconditionError("prop21 exponent must be a nonnegative integer")
        return IdentityCase(id=f"prop21:{k}", base="prop21", k=k, dim3_only=False)
    if base in ("prop22", "prop23"):
        return IdentityCase(id=base, base=base, k=None, dim3_only=False)
    if base in ("prop31", "prop32", "id314", "id315", "id316"):
        return IdentityCase(id=base, base=base, k=None, dim3_only=True)
    raise ManifestError(f"unknown identity id {case_id!r}")


@dataclass
class IdentityReport:
    case: str
    terms: dict
    total: float
    divergence_check: float
    cpe_residual_l2: float
    verdict: str
    volume: float
    tolerances: dict
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# pointwise building blocks


def _ro_power_chain(b: Bundle, top: int):
    """[I, Ro, Ro^2, ..., Ro^top] as batched matrices."""
    mats = [np.broadcast_to(np.eye(b.n), b.ro.shape), b.ro]
    for _ in range(top - 1):
        mats.append(mats[-1] @ b.ro)
    return mats


def _invariants(b: Bundle):
    ro_sq = np.einsum("pij,pij->p", b.ro, b.ro)
    ro_cube = np.einsum("pij,pjk,pki->p", b.ro, b.ro, b.ro)
    grad_sq = np.einsum("pi,pi->p", b.df, b.df)
    rof = np.einsum("pij,pj->pi", b.ro, b.df)
    return ro_sq, ro_cube, grad_sq, rof


def identity_terms(case: IdentityCase, b: Bundle) -> dict:
    """Named integrand terms, paper order left-to-right."""
    ro_sq, ro_cube, grad_sq, rof = _invariants(b)
    one_f = 1.0 + b.f
    r = b.rscal
    if case.base == "prop21":
        k = case.k
        lead = k * one_f ** (k - 1) if k > 0 else np.zeros_like(one_f)
        return {
            "gradient_form": lead * np.einsum("pi,pi->p", rof, b.df),
            "ric_norm": one_f ** (k + 1) * ro_sq,
        }
    if case.base == "prop22":
        return {
            "gradient_form": np.einsum("pi,pi->p", rof, b.df),
            "ric_norm": b.f * one_f * ro_sq,
        }
    if case.base == "prop23":
        return {"ric_norm": one_f * ro_sq}
    if case.base == "prop31":
        return {
            "ric_gradsq": 1.5 * ro_sq * grad_sq,
            "cross": -2.0 * np.einsum("pi,pi->p", rof, rof),
            "scalar_ric": (r / 12.0) * one_f**2 * ro_sq,
            "cubic": one_f**2 * ro_cube,
        }
    if case.base == "prop32":
        dro_sq = np.einsum("pijk,pijk->p", b.covd_ro, b.covd_ro)
        return {
            "ric_gradsq": 3.5 * ro_sq * grad_sq,
            "dric_sq": one_f**2 * dro_sq,
            "scalar_ric": (5.0 * r / 4.0) * one_f**2 * ro_sq,
            "cubic": 6.0 * one_f**2 * ro_cube,
            "cross": -6.0 * np.einsum("pi,pi->p", rof, rof),
        }
    powers = _ro_power_chain(b, 5)
    quad = lambda m: np.einsum("pij,pi,pj->p", powers[m], b.df, b.df)  # noqa: E731
    if case.base == "id314":
        return {
            "ric_sq_flux": 2.5 * ro_sq * quad(1),
            "flux3": -5.0 * quad(3),
            "cubic_gradsq": (5.0 / 3.0) * ro_cube * grad_sq,
        }
    if case.base == "id315":
        return {
            "ric_sq_flux": 4.0 * ro_sq * quad(2),
            "flux4": -8.0 * quad(4),
            "cubic_flux": (8.0 / 3.0) * ro_cube * quad(1),
        }
    if case.base == "id316":
        return {
            "ric_sq_flux": 5.5 * ro_sq * quad(3),
            "flux5": -11.0 * quad(5),
            "cubic_flux": (11.0 / 3.0) * ro_cube * quad(2),
        }
    raise ManifestError(f"no integrand for {case.id}")


# ---------------------------------------------------------------------------
# vector fields


def field_ids_for(t: cpe.CPETriple) -> tuple[str, ...]:
    ids = ["grad", "zk:0", "zk:1", "zk:2", "zk:3", "zk:4", "fz", "p31", "p32"]
    if t.dim == 3:
        ids += ["x314", "y315", "z316"]
    if t.dim == 2 and t.manifold.radius is not None:
        ids += ["killing", "ambient_poly"]
    return tuple(ids)


FIELD_FOR_IDENTITY = {
    "prop21": lambda k: f"zk:{k}",
    "prop22": lambda k: "fz",
    "prop23": lambda k: "zk:0",   # difference field (1+f) Ro grad f - f Ro grad f
    "prop31": lambda k: "p31",
    "prop32": lambda k: "p32",
    "id314": lambda k: "x314",
    "id315": lambda k: "y315",
    "id316": lambda k: "z316",
}

_AMBIENT_POLY = ((1.0, (0, 2, 0)), (-0.7, (1, 0, 1)), (0.4, (0, 0, 3)),
                 (0.9, (1, 0, 0)))  # coefficients, exponents in ambient (x, y, z)


def _ambient_poly_vector(amb: np.ndarray) -> np.ndarray:
    """A fixed polynomial map R^3 -> R^3 evaluated on ambient points."""
    x, y, z = amb[:, 0], amb[:, 1], amb[:, 2]
    return np.stack([y**2 + 0.9 * x, x * z - 0.3, 0.4 * z**3 + x * y], axis=1)


def field_value(field_id: str, b: Bundle, t: cpe.CPETriple) -> np.ndarray:
    """Frame components of the named field at the bundle's points."""
    rof = np.einsum("pij,pj->pi", b.ro, b.df)
    one_f = 1.0 + b.f
    if field_id == "grad":
        return b.df
    if field_id.startswith("zk:"):
        k = int(field_id.split(":")[1])
        return one_f[:, None] ** k * rof
    if field_id == "fz":
        return b.f[:, None] * rof
    if field_id == "p31":
        rbar = one_f[:, None, None] * b.ro
        return np.einsum("pij,pjk,pk->pi", b.ro, rbar, b.df, optimize=True)
    if field_id == "p32":
        rbar_d = np.einsum("pk,pij->pijk", b.df, b.ro) + one_f[:, None, None, None] * b.covd_ro
        rbar = one_f[:, None, None] * b.ro
        return np.einsum("pij,pijk->pk", rbar, rbar_d, optimize=True)
    if field_id in ("x314", "y315", "z316"):
        m = {"x314": 3, "y315": 4, "z316": 5}[field_id]
        powers = _ro_power_chain(b, m)
        return one_f[:, None] * np.einsum("pil,pl->pi", powers[m], b.df)
    if field_id == "killing":
        # rotation about the polar axis: coordinate components (0, 1)
        vcoord = np.zeros_like(b.x)
        vcoord[:, 1] = 1.0
        return np.einsum("pi,pij,pja->pa", vcoord, b.g, b.frame, optimize=True)
    if field_id == "ambient_poly":
        r = t.manifold.radius
        amb = geo.sphere_ambient(b.x, 2, r)
        v = _ambient_poly_vector(amb)
        unit = amb / r
        v = v - np.einsum("pa,pa->p", v, unit)[:, None] * unit
        jac = geo.sphere_ambient_jacobian(b.x, 2, r)
        vcov = np.einsum("pa,pai->pi", v, jac)
        return np.einsum("pi,pia->pa", vcov, b.frame)
    raise ManifestError(f"unknown field id {field_id!r}")


def field_divergence(field_id: str, b: Bundle, t: cpe.CPETriple) -> np.ndarray | None:
    """Covariant divergence via the Leibniz rule; None means use the FD route."""
    rof = np.einsum("pij,pj->pi", b.ro, b.df)
    one_f = 1.0 + b.f
    div_ro = np.einsum("pijj->pi", b.covd_ro) if b.covd_ro is not None else None
    if field_id == "grad":
        return b.lap
    if field_id.startswith("zk:"):
        k = int(field_id.split(":")[1])
        lead = k * one_f ** (k - 1) if k > 0 else 0.0
        return (
            lead * np.einsum("pi,pi->p", rof, b.df)
            + one_f**k * (
                np.einsum("pi,pi->p", div_ro, b.df)
                + np.einsum("pij,pij->p", b.ro, b.hess)
            )
        )
    if field_id == "fz":
        return (
            np.einsum("pi,pi->p", rof, b.df)
            + b.f * (
                np.einsum("pi,pi->p", div_ro, b.df)
                + np.einsum("pij,pij->p", b.ro, b.hess)
            )
        )
    if field_id == "p31":
        rbar = one_f[:, None, None] * b.ro
        rbar_df = np.einsum("pjk,pk->pj", rbar, b.df)
        return (
            np.einsum("pj,pj->p", div_ro, rbar_df)
            + np.einsum("pi,pi->p", rof, rof)
            + one_f * np.einsum("pij,pjki,pk->p", b.ro, b.covd_ro, b.df, optimize=True)
            + np.einsum("pij,pjk,pki->p", b.ro, rbar, b.hess, optimize=True)
        )
    if field_id == "p32":
        if not t.manifold.parallel_ricci:
            return None  # needs second curvature derivatives; FD route
        ro_sq = np.einsum("pij,pij->p", b.ro, b.ro)
        return ro_sq * (np.einsum("pi,pi->p", b.df, b.df) + one_f * b.lap)
    if field_id in ("x314", "y315", "z316"):
        m = {"x314": 3, "y315": 4, "z316": 5}[field_id]
        powers = _ro_power_chain(b, m)
        quad = np.einsum("pi,pij,pj->p", b.df, powers[m], b.df)
        div_pow = np.zeros_like(b.f)
        for s in range(m):
            div_pow += np.einsum(
                "pia,pabi,pbl,pl->p", powers[s], b.covd_ro, powers[m - 1 - s], b.df,
                optimize=True,
            )
        trace_h = np.einsum("pij,pji->p", powers[m], b.hess)
        return quad + one_f * (div_pow + trace_h)
    if field_id == "killing":
        # coordinate components are constant and sqrt(det g) has no
        # polar-angle dependence, so the coordinate divergence is zero
        return np.zeros_like(b.f)
    if field_id == "ambient_poly":
        return None
    raise ManifestError(f"unknown field id {field_id!r}")


def claimed_divergence(base: str, k: int | None, b: Bundle) -> np.ndarray | None:
    """The divergence value the identity derivation asserts on exact data."""
    ro_sq, _, _, rof = _invariants(b)
    one_f = 1.0 + b.f
    if base == "prop21":
        lead = k * one_f ** (k - 1) if k > 0 else 0.0
        return lead * np.einsum("pi,pi->p", rof, b.df) + one_f ** (k + 1) * ro_sq
    if base == "prop22":
        return np.einsum("pi,pi->p", rof, b.df) + b.f * one_f * ro_sq
    if base == "prop23":
        return one_f * ro_sq
    return None


# ---------------------------------------------------------------------------
# accumulation engine


def _field_needs_dric(field_id: str) -> bool:
    return field_id == "p32"


def _bundle_for(t: cpe.CPETriple, x, *, need_dric: bool, f_order: int) -> Bundle:
    return evaluate_bundle(t.manifold, x, potential=t.potential,
                           need_riemann=False, need_dric=need_dric,
                           f_order=f_order)


def _fd_divergence(t: cpe.CPETriple, field_id: str, x: np.ndarray,
                   h: float = FD_STEP) -> np.ndarray:
    """(1/sqrt g) d_i (sqrt g V^i) by central differences of the flux."""
    need_dric = _field_needs_dric(field_id)

    def flux(pts):
        b = _bundle_for(t, pts, need_dric=need_dric, f_order=1)
        v = field_value(field_id, b, t)
        vcoord = np.einsum("pa,pia->pi", v, b.frame)
        return b.sqrt_det[:, None] * vcoord

    base = _bundle_for(t, x, need_dric=False, f_order=0)
    acc = np.zeros(x.shape[0])
    for i in range(t.dim):
        xp, xm = x.copy(), x.copy()
        xp[:, i] += h
        xm[:, i] -= h
        acc += (flux(xp)[:, i] - flux(xm)[:, i]) / (2.0 * h)
    return acc / base.sqrt_det


@dataclass
class CaseMeasurements:
    case: str
    order: int
    exactness: str
    volume: float
    cpe_residual_l2: float
    curvature_scale: float
    term_integrals: dict       # identity id -> {term: value}
    term_abs_integrals: dict   # identity id -> sum of integral of |term|
    div_integrals: dict        # field id -> value
    field_max: dict            # field id -> max |V| over nodes


def applicable_identities(t: cpe.CPETriple) -> tuple[str, ...]:
    if t.dim < 3:
        return ()
    if t.dim == 3:
        return IDENTITY_IDS
    return tuple(i for i in IDENTITY_IDS if not parse_identity(i).dim3_only)


def accumulate_case(t: cpe.CPETriple, rule: geo.QuadratureRule,
                    identity_ids, field_ids,
                    chunk: int = geo.DEFAULT_CHUNK) -> CaseMeasurements:
    """One deterministic pass over the rule collecting every requested number."""
    cases = [parse_identity(i) for i in identity_ids]
    term_int: dict = {c.id: None for c in cases}
    term_abs: dict = {c.id: 0.0 for c in cases}
    div_int = {f: 0.0 for f in field_ids}
    fmax = {f: 0.0 for f in field_ids}
    fd_fields = []
    vol = 0.0
    e_l2 = 0.0
    curv = 0.0
    m = t.manifold
    r_const = t.scalar_curvature if t.constant_scalar else None
    for pts, w in rule.iter_chunks(0, chunk):
        b = _bundle_for(t, pts, need_dric=True, f_order=2)
        wt = w * b.sqrt_det * m.charts[0].weight(pts)
        vol += float(np.sum(wt))
        e = cpe.cpe_residual_batch(b, r_const)
        e_l2 += float(np.sum(wt * np.einsum("pij,pij->p", e, e)))
        curv = max(curv, float(np.max(np.sqrt(np.einsum("pij,pij->p", b.ric, b.ric)))))
        for c in cases:
            terms = identity_terms(c, b)
            if term_int[c.id] is None:
                term_int[c.id] = {k: 0.0 for k in terms}
            for name, vals in terms.items():
                term_int[c.id][name] += float(np.sum(wt * vals))
                term_abs[c.id] += float(np.sum(wt * np.abs(vals)))
        for fid in field_ids:
            v = field_value(fid, b, t)
            fmax[fid] = max(fmax[fid], float(np.max(np.linalg.norm(v, axis=1))))
            div = field_divergence(fid, b, t)
            if div is None:
                if fid not in fd_fields:
                    fd_fields.append(fid)
                div = _fd_divergence(t, fid, pts)
            div_int[fid] += float(np.sum(wt * div))
    return CaseMeasurements(
        case=t.name, order=rule.order, exactness=t.exactness.value,
        volume=vol, cpe_residual_l2=float(np.sqrt(max(e_l2, 0.0))),
        curvature_scale=1.0 + curv,
        term_integrals={k: (v or {}) for k, v in term_int.items()},
        term_abs_integrals=term_abs, div_integrals=div_int, field_max=fmax,
    )


def _report_from_measurements(case: IdentityCase, t: cpe.CPETriple,
                              meas: CaseMeasurements,
                              pointwise_gap: float | None) -> IdentityReport:
    terms = meas.term_integrals[case.id]
    total = float(sum(terms.values()))
    abs_scale = meas.term_abs_integrals[case.id]
    fid = FIELD_FOR_IDENTITY[case.base](case.k)
    div_val = meas.div_integrals[fid]
    tol_total = TOTAL_RTOL * (1.0 + abs_scale)
    tol_div = DIV_RTOL * meas.volume * meas.field_max[fid] * meas.curvature_scale + 1e-12
    diagnostics = {
        "exactness": meas.exactness,
        "field": fid,
        "field_max": meas.field_max[fid],
        "term_abs_integral": abs_scale,
    }
    if pointwise_gap is not None:
        diagnostics["claimed_divergence_gap"] = pointwise_gap
    if abs(div_val) > tol_div:
        verdict = "fail"
    elif t.exactness is cpe.Exactness.EXACT:
        verdict = "pass" if abs(total) <= tol_total else "fail"
    else:
        verdict = "not-applicable"
    return IdentityReport(
        case=case.id, terms=terms, total=total, divergence_check=div_val,
        cpe_residual_l2=meas.cpe_residual_l2, verdict=verdict,
        volume=meas.volume,
        tolerances={"total": tol_total, "divergence": tol_div},
        diagnostics=diagnostics,
    )


def _na_report(case: IdentityCase, t: cpe.CPETriple, reason: str) -> IdentityReport:
    return IdentityReport(
        case=case.id, terms={}, total=float("nan"),
        divergence_check=float("nan"), cpe_residual_l2=float("nan"),
        verdict="not-applicable", volume=float("nan"),
        tolerances={}, diagnostics={"reason": reason, "exactness": t.exactness.value},
    )


def claimed_divergence_gap(case: IdentityCase, t: cpe.CPETriple,
                           samples: int = 200, seed: int = 0) -> float | None:
    """Max |claimed - computed| divergence at interior samples (exact data)."""
    if case.base not in ("prop21", "prop22", "prop23"):
        return None
    x = geo.sample_points(t.manifold, samples, seed=seed)
    b = _bundle_for(t, x, need_dric=True, f_order=2)
    claimed = claimed_divergence(case.base, case.k, b)
    fid = FIELD_FOR_IDENTITY[case.base](case.k)
    actual = field_divergence(fid, b, t)
    return float(np.max(np.abs(claimed - actual)))


def check_identity(case_id: str, t: cpe.CPETriple,
                   rule: geo.QuadratureRule) -> IdentityReport:
    """Run one identity on one triple with the given quadrature rule."""
    case = parse_identity(case_id)
    if t.dim < 3:
        return _na_report(case, t, f"needs n >= 3, case has n = {t.dim}")
    if case.dim3_only and t.dim != 3:
        return _na_report(case, t, f"defined for n = 3 only, case has n = {t.dim}")
    fid = FIELD_FOR_IDENTITY[case.base](case.k)
    meas = accumulate_case(t, rule, [case.id], [fid])
    gap = claimed_divergence_gap(case, t) if t.exactness is cpe.Exactness.EXACT else None
    return _report_from_measurements(case, t, meas, gap)


def divergence_theorem_check(t: cpe.CPETriple, field_id: str,
                             rule: geo.QuadratureRule) -> float:
    """Integral of div V over the closed manifold; should vanish."""
    meas = accumulate_case(t, rule, [], [field_id])
    return meas.div_integrals[field_id]


# ---------------------------------------------------------------------------
# cached full-case measurement (shared by CLI, pipeline, acceptance suite)


@functools.lru_cache(maxsize=32)
def measure_catalog_case(case_name: str, order: int) -> CaseMeasurements:
    t = catalog.get_triple(case_name)
    rule = geo.build_rule(t.manifold, order)
    return accumulate_case(t, rule, applicable_identities(t), field_ids_for(t))


def identity_reports(case_name: str, order: int,
                     ids=None) -> dict[str, IdentityReport]:
    t = catalog.get_triple(case_name)
    wanted = list(ids) if ids is not None else list(IDENTITY_IDS)
    applicable = set(applicable_identities(t))
    out = {}
    meas = measure_catalog_case(case_name, order) if applicable else None
    for cid in wanted:
        case = parse_identity(cid)
        if case.id not in applicable:
            reason = ("needs n >= 3" if t.dim < 3 else "defined for n = 3 only")
            out[case.id] = _na_report(case, t, f"{reason}, case has n = {t.dim}")
            continue
        gap = (claimed_divergence_gap(case, t)
               if t.exactness is cpe.Exactness.EXACT else None)
        out[case.id] = _report_from_measurements(case, t, meas, gap)
    return out


# ---------------------------------------------------------------------------
# theorem audit pipeline


def theorem_pipeline(t: cpe.CPETriple, order: int = 32, samples: int = 200,
                     seed: int = 0) -> dict:
    """Chain hypothesis predicates with the identity reports they feed.

    For each rigidity statement this emits whether the hypothesis holds,
    what the matching integral identity forces, and whether the traceless
    Ricci norm is numerically zero; on non-exact triples the audit is
    diagnostic only.
    """
    if t.name in catalog.MANIFESTS:
        meas = measure_catalog_case(t.name, order)
    else:
        rule = geo.build_rule(t.manifold, order)
        meas = accumulate_case(t, rule, applicable_identities(t), field_ids_for(t))
    hyp = cpe.hypothesis_checks(t, order=order, samples=samples, seed=seed)
    x = geo.sample_points(t.manifold, samples, seed=seed)
    b = _bundle_for(t, x, need_dric=False, f_order=1)
    ro_sq = np.einsum("pij,pij->p", b.ro, b.ro)
    ro_cube = np.einsum("pij,pjk,pki->p", b.ro, b.ro, b.ro)
    rof = np.einsum("pij,pj->pi", b.ro, b.df)
    grad_sq = np.einsum("pi,pi->p", b.df, b.df)
    ro_norm_max = float(np.sqrt(np.max(ro_sq)))
    exact = t.exactness is cpe.Exactness.EXACT
    audits: dict[str, dict] = {}

    def base_entry(hyp_id: str, applicable: bool) -> dict:
        h = hyp[hyp_id]
        return {
            "hypothesis": hyp_id,
            "applicable": bool(applicable and exact),
            "hypothesis_satisfied": h.satisfied if h.applicable else None,
            "exactness": t.exactness.value,
            "ric_norm_max": ro_norm_max,
        }

    has_ids = bool(meas.term_integrals)
    for k in (0, 1):
        odd = 2 * k + 1
        entry = base_entry(f"weighted_gradient_sign:k{k}", t.dim >= 3)
        if has_ids:
            rep_terms = meas.term_integrals[f"prop21:{odd}"]
            h_val = hyp[f"weighted_gradient_sign:k{k}"].value
            combo_gap = abs(rep_terms["gradient_form"] - odd * h_val)
            entry.update({
                "odd_exponent": odd,
                "combination_gap": combo_gap,
                "forced_nonneg_integral": rep_terms["ric_norm"],
                "consistent": bool(
                    not entry["applicable"]
                    or not entry["hypothesis_satisfied"]
                    or (rep_terms["ric_norm"] <= 1e-6 * (1 + meas.volume)
                        and ro_norm_max <= 1e-6)
                ),
            })
        audits[f"weighted_gradient_sign:k{k}"] = entry

    entry = base_entry("constant_ric_norm", t.dim >= 3)
    if has_ids:
        total23 = sum(meas.term_integrals["prop23"].values())
        entry.update({
            "identity_total": total23,
            "consistent": bool(
                not entry["applicable"]
                or not entry["hypothesis_satisfied"]
                or ro_norm_max <= 1e-6
            ),
        })
    audits["constant_ric_norm"] = entry

    three_d = t.dim == 3
    entry = base_entry("cubic_trace_lower", three_d)
    if three_d:
        pointwise_margin = float(np.min(
            1.5 * ro_sq * grad_sq - 2.0 * np.einsum("pi,pi->p", rof, rof)))
        entry.update({
            "identity_total": sum(meas.term_integrals["prop31"].values()),
            "pointwise_bound_min": pointwise_margin,
            "consistent": bool(
                pointwise_margin >= -1e-9 * float(np.max(1.0 + ro_sq * grad_sq))
                and (not entry["applicable"] or not entry["hypothesis_satisfied"]
                     or ro_norm_max <= 1e-6)
            ),
        })
    audits["cubic_trace_lower"] = entry

    entry = base_entry("ric_norm_cap", three_d)
    if three_d:
        # cube-sum bound on actual curvature spectra: tr Ro^3 >= -|Ro|^3 / sqrt 6
        lemma_margin = float(np.min(ro_cube + ro_sq**1.5 / np.sqrt(6.0)))
        entry.update({
            "cube_bound_min": lemma_margin,
            "consistent": bool(
                lemma_margin >= -1e-9 * float(np.max(1.0 + ro_sq**1.5))
                and (not entry["applicable"] or not entry["hypothesis_satisfied"]
                     or ro_norm_max <= 1e-6)
            ),
        })
    audits["ric_norm_cap"] = entry

    entry = base_entry("cubic_trace_window", three_d)
    if three_d:
        entry.update({
            "identity_total": sum(meas.term_integrals["prop32"].values()),
            "consistent": bool(
                not entry["applicable"] or not entry["hypothesis_satisfied"]
                or ro_norm_max <= 1e-6
            ),
        })
    audits["cubic_trace_window"] = entry
    return {
        "case": t.name,
        "exactness": t.exactness.value,
        "order": order,
        "audits": audits,
    }
