"""Pointwise curvature and covariant derivatives from exact chart data.

Everything is evaluated in batches over points and expressed in an
orthonormal frame obtained by diagonalizing the metric at each point
(ascending eigenvalues, first significant component of each frame vector
made positive), so all raised/lowered index distinctions disappear
downstream.

Index conventions, fixed once and pinned by tests:

  * Christoffel  Gamma^a_ij = (1/2) g^{ab} (di g_jb + dj g_ib - db g_ij)
  * R4[m,i,j,k] is the fully lowered curvature in frame components,
    normalized so that the commutator rule for third derivatives of a
    scalar reads  f_ijk - f_ikj = sum_m f_m R4[m,i,j,k],
    with f_ijk = nabla_k nabla_j nabla_i f (derivative index last).
    On the unit round sphere R4[i,j,i,j] = +1 for i != j.
  * Ricci  Ric_ij = sum_m R4[m,i,m,j]; unit sphere gives (n-1) delta_ij.
  * Comma notation arrays keep the derivative index last:
    covd_ric[i,j,k] = Ric_ij,k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, GeometryError

# Interior sample points must clear this floor; quadrature nodes only need
# strict positivity (hyperspherical corner nodes creep toward the poles as
# the order grows, while their weighted contributions vanish even faster).
MIN_SAMPLE_EIGENVALUE = 1e-8


@dataclass
class Bundle:
    """Frame-component curvature data for a batch of points."""

    x: np.ndarray
    n: int
    g: np.ndarray
    sqrt_det: np.ndarray
    frame: np.ndarray             # B[p, i, a]: column a = frame vector e_a
    ric: np.ndarray               # (N, n, n)
    rscal: np.ndarray             # (N,)
    ro: np.ndarray                # traceless Ricci (N, n, n)
    riem4: np.ndarray | None      # (N, n, n, n, n) paper-order R4[m,i,j,k]
    weyl: np.ndarray | None
    covd_ric: np.ndarray | None   # (N, n, n, n) Ric_ij,k
    covd_ro: np.ndarray | None
    drscal: np.ndarray | None     # (N, n) frame gradient of R
    f: np.ndarray | None = None
    df: np.ndarray | None = None
    hess: np.ndarray | None = None
    f3: np.ndarray | None = None  # (N, n, n, n) f_ij,k
    lap: np.ndarray | None = None
    coord: dict | None = None     # coordinate intermediates when kept


def _orthonormal_frame(g: np.ndarray):
    evals, evecs = np.linalg.eigh(g)
    if not np.all(np.isfinite(evals)) or np.min(evals) <= 0.0:
        raise GeometryError(
            f"metric not positive definite (min eigenvalue {np.min(evals):.3e})"
        )
    absv = np.abs(evecs)
    thresh = 1e-8 * np.max(absv, axis=1, keepdims=True)
    first = np.argmax(absv > thresh, axis=1)
    lead = np.take_along_axis(evecs, first[:, None, :], axis=1)[:, 0, :]
    evecs = evecs * np.where(lead < 0.0, -1.0, 1.0)[:, None, :]
    frame = evecs / np.sqrt(evals)[:, None, :]
    sqrt_det = np.sqrt(np.prod(evals, axis=1))
    return frame, sqrt_det


def _f1(t, b):
    return np.einsum("pi,pia->pa", t, b)


def _f2(t, b):
    return np.einsum("pij,pia,pjb->pab", t, b, b, optimize=True)


def _f3t(t, b):
    return np.einsum("pijk,pia,pjb,pkc->pabc", t, b, b, b, optimize=True)


def _f4t(t, b):
    return np.einsum("pijkl,pia,pjb,pkc,pld->pabcd", t, b, b, b, b, optimize=True)


def evaluate_bundle(m, x, potential=None, chart: int = 0, *,
                    need_riemann: bool = True, need_dric: bool = True,
                    need_weyl: bool = True, f_order: int = 3,
                    keep_coord: bool = False) -> Bundle:
    """Compute frame curvature data (and potential jets) at a batch of points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = m.dim
    jet = m.metric_jet(x, order=3 if need_dric else 2, chart=chart)
    g, dg, d2g, d3g = jet.g, jet.d1, jet.d2, jet.d3

    frame, sqrt_det = _orthonormal_frame(g)
    ginv = np.einsum("pia,pja->pij", frame, frame)  # B B^T = g^{-1}
    eye = np.eye(n)

    c0 = (
        np.einsum("pijb->pbij", dg)
        + np.einsum("pjib->pbij", dg)
        - dg
    )
    gamma = 0.5 * np.einsum("pab,pbij->paij", ginv, c0, optimize=True)

    dginv = -np.einsum("pac,pdce,peb->pdab", ginv, dg, ginv, optimize=True)
    dc = (
        np.einsum("pdijb->pdbij", d2g)
        + np.einsum("pdjib->pdbij", d2g)
        - d2g
    )
    dgamma = 0.5 * (
        np.einsum("pdab,pbij->pdaij", dginv, c0, optimize=True)
        + np.einsum("pab,pdbij->pdaij", ginv, dc, optimize=True)
    )

    # Ricci straight from Christoffel data; the rank-5 curvature array is
    # only materialized when the full tensor is requested.
    tr_gamma = np.einsum("paam->pm", gamma)
    ric_coord = (
        np.einsum("paajk->pjk", dgamma)
        - np.einsum("pjaak->pjk", dgamma)
        + np.einsum("pm,pmjk->pjk", tr_gamma, gamma, optimize=True)
        - np.einsum("pajm,pmak->pjk", gamma, gamma, optimize=True)
    )
    ric_coord = 0.5 * (ric_coord + np.einsum("pjk->pkj", ric_coord))
    rscal = np.einsum("pjk,pjk->p", ginv, ric_coord)

    ric = _f2(ric_coord, frame)
    ro = ric - (rscal / n)[:, None, None] * eye

    riem4 = None
    weyl = None
    if need_riemann:
        riem_up = (
            np.einsum("piljk->plkij", dgamma)
            - np.einsum("pjlik->plkij", dgamma)
            + np.einsum("plim,pmjk->plkij", gamma, gamma, optimize=True)
            - np.einsum("pljm,pmik->plkij", gamma, gamma, optimize=True)
        )
        a_low = np.einsum("plc,pckij->plkij", g, riem_up, optimize=True)
        a_f = _f4t(a_low, frame)
        riem4 = np.einsum("pkjim->pmijk", a_f)
        if need_weyl and n >= 3:
            ro_block = (
                np.einsum("pik,jl->pijkl", ro, eye)
                + np.einsum("pjl,ik->pijkl", ro, eye)
                - np.einsum("pjk,il->pijkl", ro, eye)
                - np.einsum("pil,jk->pijkl", ro, eye)
            )
            e4 = np.einsum("ik,jl->ijkl", eye, eye) - np.einsum("jk,il->ijkl", eye, eye)
            weyl = (
                riem4
                - ro_block / (n - 2.0)
                - (rscal / (n * (n - 1.0)))[:, None, None, None, None] * e4
            )

    covd_ric = covd_ro = drscal = None
    d2gamma = None
    if need_dric:
        d2ginv = -(
            np.einsum("pcae,pdef,pfb->pcdab", dginv, dg, ginv, optimize=True)
            + np.einsum("pae,pcdef,pfb->pcdab", ginv, d2g, ginv, optimize=True)
            + np.einsum("pae,pdef,pcfb->pcdab", ginv, dg, dginv, optimize=True)
        )
        d2c = (
            np.einsum("pcdijb->pcdbij", d3g)
            + np.einsum("pcdjib->pcdbij", d3g)
            - d3g
        )
        if keep_coord:
            d2gamma = 0.5 * (
                np.einsum("pcdab,pbij->pcdaij", d2ginv, c0, optimize=True)
                + np.einsum("pdab,pcbij->pcdaij", dginv, dc, optimize=True)
                + np.einsum("pcab,pdbij->pcdaij", dginv, dc, optimize=True)
                + np.einsum("pab,pcdbij->pcdaij", ginv, d2c, optimize=True)
            )
        # the two second-derivative blocks of the Ricci formula, contracted
        # straight out of the building blocks (no rank-6 array)
        block_a = 0.5 * (
            np.einsum("pdaab,pbjk->pdjk", d2ginv, c0, optimize=True)
            + np.einsum("paab,pdbjk->pdjk", dginv, dc, optimize=True)
            + np.einsum("pdab,pabjk->pdjk", dginv, dc, optimize=True)
            + np.einsum("pab,pdabjk->pdjk", ginv, d2c, optimize=True)
        )
        block_b = 0.5 * (
            np.einsum("pdjab,pbak->pdjk", d2ginv, c0, optimize=True)
            + np.einsum("pjab,pdbak->pdjk", dginv, dc, optimize=True)
            + np.einsum("pdab,pjbak->pdjk", dginv, dc, optimize=True)
            + np.einsum("pab,pdjbak->pdjk", ginv, d2c, optimize=True)
        )
        dtr_gamma = np.einsum("pdaam->pdm", dgamma)
        dric_coord = (
            block_a
            - block_b
            + np.einsum("pdm,pmjk->pdjk", dtr_gamma, gamma, optimize=True)
            + np.einsum("pm,pdmjk->pdjk", tr_gamma, dgamma, optimize=True)
            - np.einsum("pdajm,pmak->pdjk", dgamma, gamma, optimize=True)
            - np.einsum("pajm,pdmak->pdjk", gamma, dgamma, optimize=True)
        )
        dric_coord = 0.5 * (dric_coord + np.einsum("pdjk->pdkj", dric_coord))
        covd_ric_coord = (
            np.einsum("pkij->pijk", dric_coord)
            - np.einsum("paki,paj->pijk", gamma, ric_coord, optimize=True)
            - np.einsum("pakj,pia->pijk", gamma, ric_coord, optimize=True)
        )
        dr = np.einsum("pkab,pab->pk", dginv, ric_coord) + np.einsum(
            "pab,pkab->pk", ginv, dric_coord
        )
        covd_ric = _f3t(covd_ric_coord, frame)
        drscal = _f1(dr, frame)
        covd_ro = covd_ric - np.einsum("pk,ij->pijk", drscal / n, eye)

    out = Bundle(
        x=x, n=n, g=g, sqrt_det=sqrt_det, frame=frame,
        ric=ric, rscal=rscal, ro=ro, riem4=riem4, weyl=weyl,
        covd_ric=covd_ric, covd_ro=covd_ro, drscal=drscal,
    )

    fj = None
    if potential is not None and f_order >= 0:
        fj = potential.jet(x, order=max(f_order, 1), chart=chart)
        out.f = fj.f
        out.df = _f1(fj.d1, frame)
        if f_order >= 2:
            h_coord = fj.d2 - np.einsum("pmij,pm->pij", gamma, fj.d1)
            out.hess = _f2(h_coord, frame)
            out.lap = np.einsum("paa->p", out.hess)
            if f_order >= 3:
                dh = (
                    fj.d3
                    - np.einsum("pkaij,pa->pkij", dgamma, fj.d1, optimize=True)
                    - np.einsum("paij,pka->pkij", gamma, fj.d2, optimize=True)
                )
                t3_coord = (
                    np.einsum("pkij->pijk", dh)
                    - np.einsum("paki,paj->pijk", gamma, h_coord, optimize=True)
                    - np.einsum("pakj,pia->pijk", gamma, h_coord, optimize=True)
                )
                out.f3 = _f3t(t3_coord, frame)

    if keep_coord:
        out.coord = {
            "gamma": gamma, "dgamma": dgamma, "d2gamma": d2gamma,
            "ginv": ginv, "fjet": fj,
        }
    return out


# ---------------------------------------------------------------------------
# pointwise views (spec-facing, single point)


@dataclass(frozen=True)
class CurvaturePointData:
    christoffel: np.ndarray       # coordinate Gamma^a_ij
    riemann: np.ndarray           # frame R4[m,i,j,k]
    ricci: np.ndarray
    scalar: float
    weyl: np.ndarray | None
    traceless_ricci: np.ndarray
    frame: np.ndarray


@dataclass(frozen=True)
class CovariantJet:
    f: float
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray             # f_ij,k


def curvature_at(m, x, chart: int = 0) -> CurvaturePointData:
    b = evaluate_bundle(m, np.atleast_2d(x), chart=chart, need_dric=False,
                        keep_coord=True)
    return CurvaturePointData(
        christoffel=b.coord["gamma"][0],
        riemann=b.riem4[0],
        ricci=b.ric[0],
        scalar=float(b.rscal[0]),
        weyl=None if b.weyl is None else b.weyl[0],
        traceless_ricci=b.ro[0],
        frame=b.frame[0],
    )


def covariant_jet(m, f, x, chart: int = 0) -> CovariantJet:
    b = evaluate_bundle(m, np.atleast_2d(x), potential=f, chart=chart,
                        need_riemann=False, need_dric=False, f_order=3)
    if b.f3 is None:
        raise CapabilityError("field does not provide third partials")
    return CovariantJet(f=float(b.f[0]), grad=b.df[0], hess=b.hess[0], third=b.f3[0])


# ---------------------------------------------------------------------------
# identity residuals (batched; pointwise wrappers take atleast_2d inputs)


def ricci_identity_residual(m, f, x, chart: int = 0) -> np.ndarray:
    """f_ijk - f_ikj - sum_m f_m R4[m,i,j,k]; pins the sign convention."""
    b = evaluate_bundle(m, np.atleast_2d(x), potential=f, chart=chart,
                        need_dric=False, f_order=3)
    return commutator_residual(b)


def commutator_residual(b: Bundle) -> np.ndarray:
    if b.f3 is None or b.riem4 is None:
        raise CapabilityError("bundle lacks third potential derivatives or curvature")
    return (
        b.f3
        - np.einsum("pikj->pijk", b.f3)
        - np.einsum("pm,pmijk->pijk", b.df, b.riem4)
    )


def contracted_bianchi_residual(m, x, chart: int = 0):
    """(div Ric - dR/2, div Ro - (n-2)/(2n) dR) in frame components."""
    b = evaluate_bundle(m, np.atleast_2d(x), chart=chart, need_riemann=False)
    return bianchi_residuals(b)


def bianchi_residuals(b: Bundle):
    full = np.einsum("pijj->pi", b.covd_ric) - 0.5 * b.drscal
    n = b.n
    traceless = np.einsum("pijj->pi", b.covd_ro) - ((n - 2.0) / (2.0 * n)) * b.drscal
    return full, traceless


def weyl_decomposition_residual(m, x, chart: int = 0) -> np.ndarray:
    """Riemann minus the Weyl + Ricci-block + scalar-block reassembly."""
    b = evaluate_bundle(m, np.atleast_2d(x), chart=chart, need_dric=False)
    return weyl_residual(b)


def weyl_residual(b: Bundle) -> np.ndarray:
    n = b.n
    if n < 3:
        raise CapabilityError("decomposition defined for n >= 3")
    eye = np.eye(n)
    ro_block = (
        np.einsum("pik,jl->pijkl", b.ro, eye)
        + np.einsum("pjl,ik->pijkl", b.ro, eye)
        - np.einsum("pjk,il->pijkl", b.ro, eye)
        - np.einsum("pil,jk->pijkl", b.ro, eye)
    )
    e4 = np.einsum("ik,jl->ijkl", eye, eye) - np.einsum("jk,il->ijkl", eye, eye)
    rhs = (
        b.weyl
        + ro_block / (n - 2.0)
        + (b.rscal / (n * (n - 1.0)))[:, None, None, None, None] * e4
    )
    return b.riem4 - rhs


def ricci_determined_curvature_residual(m, x, chart: int = 0) -> np.ndarray:
    """3d-only: Riemann minus its reconstruction from Ricci alone."""
    if m.dim != 3:
        raise CapabilityError("Ricci determines the curvature tensor only for n = 3")
    b = evaluate_bundle(m, np.atleast_2d(x), chart=chart, need_dric=False,
                        need_weyl=False)
    eye = np.eye(3)
    rhs = (
        np.einsum("pik,jl->pijkl", b.ric, eye)
        + np.einsum("pjl,ik->pijkl", b.ric, eye)
        - np.einsum("pjk,il->pijkl", b.ric, eye)
        - np.einsum("pil,jk->pijkl", b.ric, eye)
        - 0.5 * b.rscal[:, None, None, None, None]
        * (np.einsum("ik,jl->ijkl", eye, eye) - np.einsum("jk,il->ijkl", eye, eye))
    )
    return b.riem4 - rhs


def second_ricci_residual(m, f, x, chart: int = 0) -> np.ndarray:
    """Commutator rule for fourth derivatives:
    f_ijkl - f_ijlk - sum_m (f_mj R4[m,i,k,l] + f_mi R4[m,j,k,l]).

    Needs fourth field partials; raises CapabilityError when absent.
    """
    x = np.atleast_2d(x)
    b = evaluate_bundle(m, x, potential=f, chart=chart, f_order=4, keep_coord=True)
    fj = b.coord["fjet"]
    if fj.d4 is None:
        raise CapabilityError("field does not provide fourth partials")
    gamma, dgamma, d2gamma = b.coord["gamma"], b.coord["dgamma"], b.coord["d2gamma"]
    if d2gamma is None:
        raise CapabilityError("second Christoffel derivatives unavailable")
    h = fj.d2 - np.einsum("pmij,pm->pij", gamma, fj.d1)
    dh = (
        fj.d3
        - np.einsum("pkaij,pa->pkij", dgamma, fj.d1, optimize=True)
        - np.einsum("paij,pka->pkij", gamma, fj.d2, optimize=True)
    )
    t3 = (
        np.einsum("pkij->pijk", dh)
        - np.einsum("paki,paj->pijk", gamma, h, optimize=True)
        - np.einsum("pakj,pia->pijk", gamma, h, optimize=True)
    )
    d2h = (
        fj.d4
        - np.einsum("plkaij,pa->plkij", d2gamma, fj.d1, optimize=True)
        - np.einsum("pkaij,pla->plkij", dgamma, fj.d2, optimize=True)
        - np.einsum("plaij,pka->plkij", dgamma, fj.d2, optimize=True)
        - np.einsum("paij,plka->plkij", gamma, fj.d3, optimize=True)
    )
    dt3 = (
        np.einsum("plkij->plijk", d2h)
        - np.einsum("plaki,paj->plijk", dgamma, h, optimize=True)
        - np.einsum("paki,plaj->plijk", gamma, dh, optimize=True)
        - np.einsum("plakj,pia->plijk", dgamma, h, optimize=True)
        - np.einsum("pakj,plia->plijk", gamma, dh, optimize=True)
    )
    t4 = (
        np.einsum("plijk->pijkl", dt3)
        - np.einsum("pali,pajk->pijkl", gamma, t3, optimize=True)
        - np.einsum("palj,piak->pijkl", gamma, t3, optimize=True)
        - np.einsum("palk,pija->pijkl", gamma, t3, optimize=True)
    )
    f4 = _f4t(t4, b.frame)
    return (
        f4
        - np.einsum("pijlk->pijkl", f4)
        - np.einsum("pmj,pmikl->pijkl", b.hess, b.riem4)
        - np.einsum("pmi,pmjkl->pijkl", b.hess, b.riem4)
    )


def gradient_divergence(m, f, x, chart: int = 0) -> np.ndarray:
    """div(grad f) = Laplacian, from the covariant Hessian trace."""
    b = evaluate_bundle(m, np.atleast_2d(x), potential=f, chart=chart,
                        need_riemann=False, need_dric=False, f_order=2)
    return b.lap
