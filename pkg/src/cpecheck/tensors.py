"""Symmetric-tensor algebra at a point.

Plain dense linear algebra on small (n <= 8) real symmetric matrices:
traceless projection, trace powers, spectra via cyclic Jacobi rotations,
the zero-sum cubic bound with its extremal configurations, the
dimension-three trace-power identities, and the two contraction bounds
used by the three-dimensional analysis.

All functions are pure; nothing here holds state, so concurrent use is
safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError

MAX_TRACE_POWER = 8
MAX_JACOBI_SWEEPS = 100


class JacobiConvergenceError(RuntimeError):
    """Sweep cap reached before the off-diagonal mass vanished."""


@dataclass(frozen=True)
class SymTensor2:
    """Dense symmetric rank-2 tensor; storage is exactly symmetric."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ValueError(f"need a square n>=2 matrix, got shape {a.shape}")
        # symmetrize exactly so entries[i,j] == entries[j,i] holds bit-for-bit
        a = 0.5 * (a + a.T)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.entries

    def trace(self) -> float:
        return float(np.trace(self.entries))

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.entries))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted ascending."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) < 0):
            raise ValueError("spectrum must be sorted ascending")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Verdict:
    """Outcome of an inequality check.

    margin is left side minus right side in the normalization stated by
    the operation that produced it; equality_case marks margins at the
    boundary configuration.
    """

    holds: bool
    margin: float
    equality_case: bool


def sym(entries) -> SymTensor2:
    return SymTensor2(np.asarray(entries, dtype=float))


def traceless_part(s: SymTensor2) -> SymTensor2:
    """Project onto the trace-free subspace: S - (tr S / n) Id."""
    n = s.dim
    return SymTensor2(s.entries - (s.trace() / n) * np.eye(n))


def trace_power(s: SymTensor2, p: int) -> float:
    """tr(S^p) by repeated multiplication, 1 <= p <= 8."""
    if not 1 <= p <= MAX_TRACE_POWER:
        raise ValueError(f"power must be in [1, {MAX_TRACE_POWER}], got {p}")
    m = s.entries
    acc = m
    for _ in range(p - 1):
        acc = acc @ m
    return float(np.trace(acc))


def _jacobi(a: np.ndarray, max_sweeps: int = MAX_JACOBI_SWEEPS):
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Robust and dependency-free at the sizes used here (n <= 8). Returns
    ascending eigenvalues and the orthogonal matrix of column eigenvectors.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    else:
        raise JacobiConvergenceError(
            f"no convergence after {max_sweeps} sweeps (off-diagonal {off:.3e})"
        )
    order = np.argsort(np.diag(a), kind="stable")
    return np.diag(a)[order], v[:, order]


def eigensystem(s: SymTensor2) -> tuple[Spectrum, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns."""
    w, v = _jacobi(s.entries)
    return Spectrum(w), v


def eigenvalues(s: SymTensor2) -> Spectrum:
    return eigensystem(s)[0]


def cube_sum_bound_constant(n: int) -> float:
    """Sharp constant c(n) in |sum a_i^3| <= c(n) (sum a_i^2)^(3/2) on zero-sum vectors."""
    if n < 3:
        raise ValueError(f"constant defined for n >= 3, got {n}")
    return (n - 2) / np.sqrt(n * (n - 1.0))


def _cluster_equality(a_sorted: np.ndarray, rtol: float) -> bool:
    """True when n-1 of the sorted entries agree to rtol (relative to the max entry)."""
    scale = float(np.max(np.abs(a_sorted)))
    if scale == 0.0:
        return True
    tol = rtol * scale
    low = float(a_sorted[-2] - a_sorted[0])
    high = float(a_sorted[-1] - a_sorted[1])
    return low <= tol or high <= tol


def cube_sum_check(a, *, margin_tol: float = 1e-9, cluster_rtol: float = 1e-8) -> Verdict:
    """Check the zero-sum cubic bound on one vector.

    margin = c(n) (sum a^2)^(3/2) - |sum a^3|; equality configurations have
    n-1 pairwise-equal entries.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size < 3:
        raise ValueError("need a 1d vector with n >= 3 entries")
    sum_abs = float(np.sum(np.abs(a)))
    if abs(float(np.sum(a))) > 1e-9 * max(sum_abs, 1e-300):
        raise PreconditionError("entries must sum to zero (caller pre-projects)")
    n = a.size
    s2 = float(np.sum(a**2))
    s3 = float(np.sum(a**3))
    margin = cube_sum_bound_constant(n) * s2**1.5 - abs(s3)
    equality = _cluster_equality(np.sort(a), cluster_rtol)
    return Verdict(holds=margin >= -margin_tol, margin=margin, equality_case=equality)


def cube_sum_extremal(n: int, sign: int = -1, scale: float = 1.0) -> np.ndarray:
    """Zero-sum vector with n-1 equal entries attaining the cubic bound.

    sign -1 gives the minimizing configuration (one large negative entry),
    sign +1 the mirrored maximizer. The result has Euclidean norm `scale`
    and is sorted ascending.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    if scale <= 0:
        raise ValueError("scale must be positive")
    base = np.full(n, 1.0)
    base[0] = -(n - 1.0)
    base *= sign * -1.0  # sign=-1 keeps the big entry negative
    base *= scale / np.linalg.norm(base)
    return np.sort(base)


def traceless3_trace_identities(t: SymTensor2) -> tuple[float, float, float]:
    """Residuals of the 3x3 traceless trace-power reductions.

    For traceless 3x3 symmetric T:
        tr T^4 = (1/2) |T|^4
        tr T^5 = (5/6) |T|^2 tr T^3
        tr T^6 = (1/4) |T|^6 + (1/3) (tr T^3)^2
    Returns (r4, r5, r6), each the left side minus the right side.
    """
    if t.dim != 3:
        raise ValueError("identities are specific to 3x3 tensors")
    nrm = t.norm()
    if abs(t.trace()) > 1e-10 * (1.0 + nrm):
        raise PreconditionError("tensor must be traceless")
    m = t.entries
    m2 = m @ m
    m3 = m2 @ m
    p2 = float(np.trace(m2))
    p3 = float(np.trace(m3))
    p4 = float(np.trace(m2 @ m2))
    p5 = float(np.trace(m3 @ m2))
    p6 = float(np.trace(m3 @ m3))
    r4 = p4 - 0.5 * p2**2
    r5 = p5 - (5.0 / 6.0) * p2 * p3
    r6 = p6 - 0.25 * p2**3 - (p3**2) / 3.0
    return (r4, r5, r6)


def contraction_bound(t: SymTensor2, v) -> Verdict:
    """Margin of (3/2)|T|^2 |v|^2 - 2 <T^2 v, v> for traceless 3x3 T.

    Nonnegative for every direction v; equality needs T = 0 or a degenerate
    spectrum aligned with v.
    """
    v = np.asarray(v, dtype=float)
    if t.dim != 3 or v.shape != (3,):
        raise ValueError("need a 3x3 tensor and a 3-vector")
    if abs(t.trace()) > 1e-10 * (1.0 + t.norm()):
        raise PreconditionError("tensor must be traceless")
    t2 = float(np.sum(t.entries**2))
    vv = float(v @ v)
    tv = t.entries @ v
    margin = 1.5 * t2 * vv - 2.0 * float(tv @ tv)
    tol = 1e-9 * (1.0 + t2 * vv)
    return Verdict(holds=margin >= -tol, margin=margin, equality_case=abs(margin) <= tol)


def contraction_margin_raw(t: SymTensor2, v) -> float:
    """(7/2)|T|^2 |v|^2 - 6 <T^2 v, v>, with no eigenframe reduction.

    This bilinear form is NOT nonnegative for arbitrary v even under
    tr T^3 <= 0 (diag(-2,1,1) against e1 gives -3); the certified bound is
    the eigenframe margin in contraction_bound_signed.
    """
    v = np.asarray(v, dtype=float)
    t2 = float(np.sum(t.entries**2))
    tv = t.entries @ v
    return 3.5 * t2 * float(v @ v) - 6.0 * float(tv @ tv)


def contraction_bound_signed(t: SymTensor2, v) -> Verdict:
    """Eigenframe margin [(a1-a2)^2 - 3 a1 a2] |v|^2 under tr T^3 <= 0.

    a1 <= a2 <= a3 are the eigenvalues of the traceless 3x3 tensor T; the
    sign condition forces a1 a2 <= 0, so the margin is nonnegative.
    """
    v = np.asarray(v, dtype=float)
    if t.dim != 3 or v.shape != (3,):
        raise ValueError("need a 3x3 tensor and a 3-vector")
    nrm = t.norm()
    if abs(t.trace()) > 1e-10 * (1.0 + nrm):
        raise PreconditionError("tensor must be traceless")
    if trace_power(t, 3) > 1e-10 * (1.0 + nrm**3):
        raise PreconditionError("requires tr T^3 <= 0")
    a = eigenvalues(t).values
    vv = float(v @ v)
    margin = ((a[0] - a[1]) ** 2 - 3.0 * a[0] * a[1]) * vv
    tol = 1e-9 * (1.0 + float(np.sum(t.entries**2)) * vv)
    return Verdict(holds=margin >= -tol, margin=margin, equality_case=abs(margin) <= tol)


# ---------------------------------------------------------------------------
# vectorized sampling helpers for the Monte Carlo sweeps


def sample_zero_sum(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Standard normal rows with the mean subtracted (uniform on the constraint plane)."""
    a = rng.standard_normal((count, dim))
    return a - a.mean(axis=1, keepdims=True)


def cubic_bound_margins(a: np.ndarray) -> np.ndarray:
    """Vectorized margin of the cubic bound over zero-sum rows."""
    n = a.shape[1]
    s2 = np.sum(a**2, axis=1)
    s3 = np.sum(a**3, axis=1)
    return cube_sum_bound_constant(n) * s2**1.5 - np.abs(s3)


def cluster_equality_mask(a: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Rows whose sorted entries have n-1 equal values to rtol."""
    s = np.sort(a, axis=1)
    scale = np.max(np.abs(s), axis=1)
    tol = rtol * np.maximum(scale, 1e-300)
    low = s[:, -2] - s[:, 0]
    high = s[:, -1] - s[:, 1]
    return (low <= tol) | (high <= tol) | (scale == 0.0)


def sample_traceless(rng: np.random.Generator, count: int, dim: int = 3) -> np.ndarray:
    """Random symmetric traceless matrices, entries O(1)."""
    a = rng.standard_normal((count, dim, dim))
    a = 0.5 * (a + np.swapaxes(a, 1, 2))
    tr = np.trace(a, axis1=1, axis2=2) / dim
    a -= tr[:, None, None] * np.eye(dim)
    return a


def trace_identity_residuals(t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (r4, r5, r6) over a batch of traceless 3x3 matrices."""
    t2 = t @ t
    t3 = t2 @ t
    p2 = np.trace(t2, axis1=1, axis2=2)
    p3 = np.trace(t3, axis1=1, axis2=2)
    p4 = np.trace(t2 @ t2, axis1=1, axis2=2)
    p5 = np.trace(t3 @ t2, axis1=1, axis2=2)
    p6 = np.trace(t3 @ t3, axis1=1, axis2=2)
    r4 = p4 - 0.5 * p2**2
    r5 = p5 - (5.0 / 6.0) * p2 * p3
    r6 = p6 - 0.25 * p2**3 - p3**2 / 3.0
    return r4, r5, r6


def contraction_margins(t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized margin of the (3/2, 2) contraction bound over (T, v) pairs."""
    t2 = np.sum(t**2, axis=(1, 2))
    vv = np.sum(v**2, axis=1)
    tv = np.einsum("bij,bj->bi", t, v)
    return 1.5 * t2 * vv - 2.0 * np.sum(tv**2, axis=1)


def signed_triple_margins(rng: np.random.Generator, count: int) -> np.ndarray:
    """Eigenframe margins (a1-a2)^2 - 3 a1 a2 over `count` zero-sum sorted
    triples constrained to 3 a1 a2 a3 <= 0."""
    out = np.empty(0)
    while out.size < count:
        batch = np.sort(sample_zero_sum(rng, max(count, 4096), 3), axis=1)
        keep = 3.0 * batch[:, 0] * batch[:, 1] * batch[:, 2] <= 0.0
        batch = batch[keep]
        m = (batch[:, 0] - batch[:, 1]) ** 2 - 3.0 * batch[:, 0] * batch[:, 1]
        out = np.concatenate([out, m])
    return out[:count]


def random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-ish orthogonal matrix (QR of a Gaussian with sign fix)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))
