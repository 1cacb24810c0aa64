"""Independent reference computations used across the test suite.

Everything here is deliberately dumb and self-contained: central finite
differences, panel-based Gauss-Legendre quadrature (with geometric grading
toward integrable endpoint singularities), Monte Carlo helpers, and a
branch-enumeration oracle for expectations under sequentially dependent
gates.  None of it reuses the differentiable code paths under test.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def central_difference(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Gradient of scalar f at x by central differences, one entry at a time."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def assert_close_grads(analytic: np.ndarray, numeric: np.ndarray,
                       tol: float = 1e-4, context: str = "") -> None:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    err = np.max(np.abs(analytic - numeric) / scale)
    assert err < tol, (f"gradient mismatch {context}: max relative error "
                       f"{err:.3e} (tol {tol:.1e})")


@lru_cache(maxsize=8)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_mass(f, lo: float, hi: float, panels: int = 64,
               order: int = 32) -> float:
    """Integral of a smooth f over [lo, hi] by composite Gauss-Legendre."""
    nodes, weights = _leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    xs = (mids[:, None] + half[:, None] * nodes[None, :]).ravel()
    ws = (half[:, None] * weights[None, :]).ravel()
    return float(np.sum(ws * f(xs)))


def graded_unit_mass(f, tiny: float = 1e-30, per_decade: int = 20,
                     order: int = 84) -> float:
    """Integral of f over (0, 1) with integrable endpoint singularities.

    Panels are geometrically graded from ``tiny`` toward 0.5 on both sides,
    so k^(a-1)-type blowups are resolved; roughly 10^5 evaluation points at
    the defaults.  Mass within ``tiny`` of 0 and within ~1e-16 of 1 (the
    tightest representable gap) is dropped.
    """

    def geometric(start):
        ratio = 10.0 ** (1.0 / per_decade)
        edges = [start]
        while edges[-1] * ratio < 0.5:
            edges.append(edges[-1] * ratio)
        edges.append(0.5)
        return np.asarray(edges)

    left = geometric(tiny)
    right = np.sort(1.0 - geometric(max(tiny, 1e-16)))[1:]
    all_edges = np.concatenate([left, right])
    nodes, weights = _leggauss(order)
    mids = 0.5 * (all_edges[:-1] + all_edges[1:])
    half = 0.5 * (all_edges[1:] - all_edges[:-1])
    xs = (mids[:, None] + half[:, None] * nodes[None, :]).ravel()
    ws = (half[:, None] * weights[None, :]).ravel()
    return float(np.sum(ws * f(xs)))


def binomial_se(p: float, n: int) -> float:
    return float(np.sqrt(max(p * (1.0 - p), 1e-12) / n))


def mean_se(samples: np.ndarray) -> float:
    return float(np.std(samples, ddof=1) / np.sqrt(samples.size))


def clamped_affine_uniform_mean(l: float, r: float,
                                points: int = 200001) -> float:
    """E[min(1, max(0, l + (r-l) U))] for U uniform on (0,1), by quadrature."""
    u = (np.arange(points) + 0.5) / points
    return float(np.mean(np.clip(l + (r - l) * u, 0.0, 1.0)))


def nested_expected_l0(shape_fn, n: int, bounds, gl_order: int = 48) -> float:
    """Brute-force E[sum_i (1 - P(Z_i = 0 | z_<i))] under dependent gates.

    The prefix distribution is enumerated exactly: atoms for the point
    masses at 0 and 1, Gauss-Legendre nodes (weighted by the continuous
    density) for the interior branch.  ``shape_fn(prefix) -> (a, b)`` is the
    frozen conditional shape map; the closed-form masses it induces are
    validated elsewhere against quadrature and Monte Carlo.
    """
    from hardkuma import distribution as dist

    k_lo = -bounds.l / bounds.width
    k_hi = (1.0 - bounds.l) / bounds.width
    nodes, weights = _leggauss(gl_order)
    ks = 0.5 * (k_lo + k_hi) + 0.5 * (k_hi - k_lo) * nodes
    ws = 0.5 * (k_hi - k_lo) * weights

    total = 0.0
    atoms: list[tuple[float, tuple]] = [(1.0, ())]
    for i in range(n):
        grown: list[tuple[float, tuple]] = []
        for weight, prefix in atoms:
            a, b = shape_fn(list(prefix))
            params = dist.KumaParams(a, b)
            p0 = dist.prob_zero(params, bounds)
            p1 = dist.prob_one(params, bounds)
            total += weight * (1.0 - p0)
            if i == n - 1:
                continue
            grown.append((weight * p0, prefix + (0.0,)))
            grown.append((weight * p1, prefix + (1.0,)))
            dens = dist.kuma_pdf(ks, params)
            hs = bounds.l + bounds.width * ks
            for kw, dv, h in zip(ws, dens, hs):
                grown.append((weight * kw * dv, prefix + (float(h),)))
        atoms = grown
    return total
