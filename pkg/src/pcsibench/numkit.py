"""Small dense numerical kernel: Jacobi SVD, LDL^T solves and distribution tails.

Everything here works on plain ``numpy`` arrays and Python floats. The
routines favour predictable, fixed-order arithmetic over speed; the
matrices involved (MCA residuals, ridge normal equations) are small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DefinitenessError, DomainError, SampleSizeError

__all__ = [
    "SvdResult",
    "svd",
    "solve_spd",
    "chi2_survival",
    "pearson_p_value",
    "regularized_gamma_q",
    "regularized_beta",
]

SVD_MAX_SWEEPS = 100
SVD_TOL = 1e-12
_CF_EPS = 1e-15
_CF_MAX_ITER = 2000
_TINY = 1e-300


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def svd(a) -> SvdResult:
    """Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.

    Returns ``u`` (m x k), ``s`` (k,) sorted descending and ``vt`` (k x n)
    with ``k = min(m, n)``. Columns of ``u`` belonging to zero singular
    values are completed to an orthonormal set.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or min(a.shape) < 1:
        raise DomainError(f"svd needs a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("svd input contains non-finite entries")
    m, n = a.shape
    if m < n:
        res = svd(a.T)
        return SvdResult(u=res.vt.T, s=res.s, vt=res.u.T)

    w = a.copy()
    v = np.eye(n)
    # columns below this squared norm are numerically zero and never rotated
    floor = np.finfo(float).eps ** 2 * float(np.sum(a * a))
    for _ in range(SVD_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp = w[:, p]
                wq = w[:, q]
                alpha = float(wp @ wp)
                beta = float(wq @ wq)
                gamma = float(wp @ wq)
                if alpha <= floor or beta <= floor:
                    continue
                if abs(gamma) <= SVD_TOL * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * wp - s * wq
                new_q = s * wp + c * wq
                w[:, p] = new_p
                w[:, q] = new_q
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            break
    else:
        raise ConvergenceError(
            f"Jacobi SVD did not converge within {SVD_MAX_SWEEPS} sweeps for a {m}x{n} matrix"
        )

    sing = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-sing, kind="stable")
    sing = sing[order]
    w = w[:, order]
    v = v[:, order]

    cutoff = max(m, n) * np.finfo(float).eps * (sing[0] if sing.size else 0.0)
    u = np.zeros((m, n))
    good = sing > cutoff
    u[:, good] = w[:, good] / sing[good]
    sing = np.where(good, sing, 0.0)
    if not np.all(good):
        u = _complete_orthonormal(u, good)
    return SvdResult(u=u, s=sing, vt=v.T)


def _complete_orthonormal(u: np.ndarray, filled: np.ndarray) -> np.ndarray:
    """Fill the columns of ``u`` not flagged in ``filled`` with orthonormal vectors."""
    m = u.shape[0]
    basis = [u[:, j] for j in np.flatnonzero(filled)]
    out = u.copy()
    candidate = 0
    for j in np.flatnonzero(~filled):
        while True:
            e = np.zeros(m)
            e[candidate % m] = 1.0
            candidate += 1
            for b in basis:
                e -= (b @ e) * b
            for b in basis:
                e -= (b @ e) * b
            norm = math.sqrt(float(e @ e))
            if norm > 1e-8:
                e /= norm
                break
        basis.append(e)
        out[:, j] = e
    return out


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` via LDL^T.

    Sums run left to right in plain Python so results are reproducible; a
    diagonal system reduces to ``b[i] / a[i, i]`` exactly.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n or b.shape != (n,):
        raise DomainError(f"solve_spd shape mismatch: a {a.shape}, b {b.shape}")
    scale = float(np.max(np.abs(a))) if n else 0.0
    if n and float(np.max(np.abs(a - a.T))) > 1e-9 * max(scale, 1.0):
        raise DomainError("solve_spd requires a symmetric matrix")

    A = a.tolist()
    L = [[0.0] * n for _ in range(n)]
    d = [0.0] * n
    max_diag = max((A[i][i] for i in range(n)), default=0.0)
    for j in range(n):
        acc = A[j][j]
        Lj = L[j]
        for k in range(j):
            acc -= Lj[k] * Lj[k] * d[k]
        if not acc > 1e-13 * max_diag or not math.isfinite(acc):
            raise DefinitenessError(f"non-positive pivot {acc:.3e} at index {j}")
        d[j] = acc
        Lj[j] = 1.0
        for i in range(j + 1, n):
            Li = L[i]
            acc = A[i][j]
            for k in range(j):
                acc -= Li[k] * Lj[k] * d[k]
            Li[j] = acc / d[j]

    y = b.tolist()
    for i in range(n):
        acc = y[i]
        Li = L[i]
        for k in range(i):
            acc -= Li[k] * y[k]
        y[i] = acc
    z = [y[i] / d[i] for i in range(n)]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        acc = z[i]
        for k in range(i + 1, n):
            acc -= L[k][i] * x[k]
        x[i] = acc
    return np.array(x)


def _gamma_series(a: float, x: float) -> float:
    # lower regularized P(a, x), valid for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_CF_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _CF_EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceError(f"incomplete gamma series failed for a={a}, x={x}")


def _gamma_cf(a: float, x: float) -> float:
    # upper regularized Q(a, x) by modified Lentz, valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ConvergenceError(f"incomplete gamma continued fraction failed for a={a}, x={x}")


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma function Q(a, x)."""
    if a <= 0 or x < 0:
        raise DomainError(f"regularized_gamma_q needs a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_series(a, x)))
    return min(1.0, max(0.0, _gamma_cf(a, x)))


def _beta_cf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ConvergenceError(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def regularized_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"regularized_beta needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def chi2_survival(x: float, df: int) -> float:
    """P(X >= x) for a chi-square variable with ``df`` degrees of freedom."""
    if df < 1 or x < 0 or math.isnan(x):
        raise DomainError(f"chi2_survival needs x >= 0 and df >= 1, got x={x}, df={df}")
    if math.isinf(x):
        return 0.0
    return regularized_gamma_q(df / 2.0, x / 2.0)


def pearson_p_value(r: float, n: int) -> float:
    """Two-sided p-value of a Pearson correlation ``r`` over ``n`` samples."""
    if n < 3:
        raise SampleSizeError(f"pearson_p_value needs n >= 3, got {n}")
    if math.isnan(r) or abs(r) > 1.0 + 1e-12:
        raise DomainError(f"correlation must lie in [-1, 1], got {r}")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t2 = r * r * df / (1.0 - r * r)
    # two-sided Student-t tail: I_{df/(df+t^2)}(df/2, 1/2); for small t use the
    # complement so 1 - x is never formed by cancellation
    if t2 < df:
        p = 1.0 - regularized_beta(t2 / (df + t2), 0.5, df / 2.0)
    else:
        p = regularized_beta(df / (df + t2), df / 2.0, 0.5)
    return min(1.0, max(0.0, p))
