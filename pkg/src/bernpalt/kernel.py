"""Beta averaging kernel: density, exact raw moments, and weighted integration.

The kernel with index k of degree n and exponent rho > 0 is the Beta(k*rho+1,
(n-k)*rho+1) probability density on [0, 1].  Integrating a function against it
replaces the point sample f(k/n) used by sampling-type operators with a local
average, which is what every operator in this package is built from.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from math import lgamma, log

import numpy as np

__all__ = [
    "KernelParams",
    "QuadratureConfig",
    "NonConvergence",
    "kernel_density",
    "kernel_raw_moment",
    "integrate_against_kernel",
]

# Fixed Gauss-Legendre rules: the 15-point rule carries the value, the 7-point
# rule on the same panel supplies the error estimate.
_X15, _W15 = np.polynomial.legendre.leggauss(15)
_X7, _W7 = np.polynomial.legendre.leggauss(7)


@dataclass(frozen=True)
class KernelParams:
    """Beta kernel indices: degree n, index k in [0, n], exponent rho > 0."""

    n: int
    k: int
    rho: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"k must be in [0, {self.n}], got {self.k}")
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 4096

    def __post_init__(self):
        if self.rel_tol < 1e-14:
            raise ValueError("rel_tol must be >= 1e-14")
        if self.abs_tol < 1e-15:
            raise ValueError("abs_tol must be >= 1e-15")
        if not 1 <= self.max_subdivisions <= 2**20:
            raise ValueError("max_subdivisions must be in [1, 2**20]")


class NonConvergence(RuntimeError):
    """Adaptive integration ran out of subdivisions.

    Carries the best estimate and the achieved error bound so callers can
    decide whether the partial result is still usable.
    """

    def __init__(self, best_estimate: float, error_bound: float, subdivisions: int):
        self.best_estimate = best_estimate
        self.error_bound = error_bound
        self.subdivisions = subdivisions
        super().__init__(
            f"quadrature did not converge after {subdivisions} subdivisions: "
            f"estimate={best_estimate!r}, error bound={error_bound:.3e}"
        )


def _log_beta(a: float, b: float) -> float:
    return lgamma(a + 1.0) + lgamma(b + 1.0) - lgamma(a + b + 2.0)


def kernel_density(p: KernelParams, t):
    """Density t^(k rho) (1-t)^((n-k) rho) / B(k rho + 1, (n-k) rho + 1).

    Accepts a scalar or array t in [0, 1]; endpoint limits are honoured
    (finite nonzero only when the corresponding exponent vanishes).
    """
    a = p.k * p.rho
    b = (p.n - p.k) * p.rho
    log_norm = _log_beta(a, b)
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0.0) | (t_arr > 1.0)):
        raise ValueError("t must lie in [0, 1]")
    interior = (t_arr > 0.0) & (t_arr < 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(
            interior,
            a * np.log(np.where(interior, t_arr, 0.5))
            + b * np.log1p(-np.where(interior, t_arr, 0.5))
            - log_norm,
            -np.inf,
        )
    out = np.exp(logs)
    # Endpoints: t=0 contributes only when a == 0, t=1 only when b == 0.
    if a == 0:
        out = np.where(t_arr == 0.0, np.exp(-log_norm), out)
    if b == 0:
        out = np.where(t_arr == 1.0, np.exp(-log_norm), out)
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


def kernel_raw_moment(p: KernelParams, m: int) -> float:
    """Exact m-th raw moment: prod_{j=0}^{m-1} (k rho + 1 + j)/(n rho + 2 + j)."""
    if m < 0:
        raise ValueError("moment order must be >= 0")
    out = 1.0
    a = p.k * p.rho
    nr = p.n * p.rho
    for j in range(m):
        out *= (a + 1.0 + j) / (nr + 2.0 + j)
    return out


def _panel(f, log_norm, a_exp, b_exp, lo, hi):
    """One (value, error) pair on [lo, hi] using G15 with a G7 check."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t15 = mid + half * _X15
    t7 = mid + half * _X7
    w15 = np.exp(a_exp * np.log(t15) + b_exp * np.log1p(-t15) - log_norm)
    w7 = np.exp(a_exp * np.log(t7) + b_exp * np.log1p(-t7) - log_norm)
    v15 = half * float(np.dot(_W15, w15 * f(t15)))
    v7 = half * float(np.dot(_W7, w7 * f(t7)))
    return v15, abs(v15 - v7)


def integrate_against_kernel(p: KernelParams, f, cfg: QuadratureConfig | None = None) -> float:
    """Integral of f against the kernel density over [0, 1].

    When ``f`` carries polynomial coefficients (see registry.Polynomial or a
    registry entry wrapping one) the value is assembled from exact raw
    moments and no quadrature runs.  Otherwise the integral is computed by
    globally adaptive bisection of Gauss-Legendre panels, starting from a
    split at the kernel mode k/n so that sharply peaked densities are
    resolved early.

    Raises NonConvergence when the subdivision budget is exhausted before the
    requested tolerance is met.
    """
    if cfg is None:
        cfg = QuadratureConfig()
    coeffs = getattr(f, "coeffs", None)
    if coeffs is None:
        poly = getattr(f, "poly", None)
        coeffs = getattr(poly, "coeffs", None)
    if coeffs is not None:
        return sum(
            c * kernel_raw_moment(p, m) for m, c in enumerate(coeffs) if c != 0.0
        )

    func = getattr(f, "eval", f)
    a_exp = p.k * p.rho
    b_exp = (p.n - p.k) * p.rho
    log_norm = _log_beta(a_exp, b_exp)

    mode = p.k / p.n
    cuts = [0.0, mode, 1.0] if 0.0 < mode < 1.0 else [0.0, 1.0]

    # Heap of (-error, insertion counter, lo, hi, value, error); the counter
    # breaks ties deterministically.
    heap = []
    counter = 0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, err = _panel(func, log_norm, a_exp, b_exp, lo, hi)
        heapq.heappush(heap, (-err, counter, lo, hi, val, err))
        counter += 1

    while True:
        total = sum(item[4] for item in heap)
        total_err = sum(item[5] for item in heap)
        if total_err <= max(cfg.abs_tol, cfg.rel_tol * abs(total)):
            break
        if counter >= cfg.max_subdivisions:
            raise NonConvergence(total, total_err, counter)
        _, _, lo, hi, _, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        for a, b in ((lo, mid), (mid, hi)):
            val, err = _panel(func, log_norm, a_exp, b_exp, a, b)
            heapq.heappush(heap, (-err, counter, a, b, val, err))
            counter += 1

    # Sum in interval order so the result does not depend on heap history.
    return sum(item[4] for item in sorted(heap, key=lambda it: it[2]))
