"""Gaussian kernels and the tail quadrature shared by the filtering and
compensator layers.

The central object is the family of integrals

    S_i(s, x; u) = int_u^inf  sqrt(r/(r-s)) * exp(E_i(r)) * f(r) dr,
    E_i(r)       = z_i^2/(2r) - (z_i - x)^2 / (2(r-s)),

one per pinning level z_i, where f is the density of the random bridge
length.  Every conditional quantity of the model (posterior weights,
survival probabilities, drift, intensity of absorption) is a ratio of such
integrals, optionally with an extra weight in the integrand.  The Gaussian
prefactor p(s, x) common to numerator and denominator is factored out
analytically, so the integrals stay within floating-point range and ratios
are exact.

Numerical policy: the integrand carries an integrable (r-s)^(-1/2)
singularity at the left endpoint; substituting v = sqrt(r - s) removes it
exactly (the Jacobian 2v cancels the 1/v).  The infinite endpoint is
truncated where the remaining mass of the length law drops below
``truncation_mass``.  Panels are graded geometrically in v and integrated
with Gauss-Legendre rules; the panel count doubles until two successive
refinements agree to ``rel_tol``.  Exponents are rescaled by their maximum
before exponentiation, so intermediate values never overflow.

All functions here are pure; they can be called from any number of workers
with no shared mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureConfig",
    "QuadratureError",
    "DEFAULT_QUADRATURE",
    "gaussian_density",
    "log_gaussian_density",
    "bridge_marginal_density",
    "tail_integrals",
    "mix_weight",
    "log_mix_weight",
]

_LOG_2PI = math.log(2.0 * math.pi)


class QuadratureError(RuntimeError):
    """Adaptive refinement failed to reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and truncation policy for the improper tail integrals.

    ``truncation_mass`` is the mass of the length law allowed beyond the
    truncation point when the support is unbounded.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-13
    truncation_mass: float = 1e-10
    max_subdivisions: int = 6
    gauss_points: int = 10
    base_panels: int = 30
    adaptive: bool = True

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("tolerances must be strictly positive")
        if not (0.0 < self.truncation_mass < 1e-6):
            raise ValueError("truncation_mass must lie in (0, 1e-6)")
        if self.max_subdivisions < 1 or self.gauss_points < 2 or self.base_panels < 4:
            raise ValueError("refinement parameters out of range")


DEFAULT_QUADRATURE = QuadratureConfig()

#: Generous single-pass rule for filling interpolation tables, where one
#: vectorized evaluation per time node beats adaptive re-evaluation and the
#: interpolation error dominates anyway; tables are validated against the
#: adaptive rule afterwards.
GRID_QUADRATURE = QuadratureConfig(base_panels=90, gauss_points=12, adaptive=False)


# ---------------------------------------------------------------------------
# Closed-form densities
# ---------------------------------------------------------------------------


def gaussian_density(t, x, y=0.0):
    """Gaussian density with variance ``t`` and mean ``y``, evaluated at ``x``.

    Raises ``ValueError`` for nonpositive variance.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("variance must be strictly positive")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    out = np.exp(-0.5 * d * d / t) / np.sqrt(2.0 * np.pi * t)
    return out if out.ndim else float(out)


def log_gaussian_density(t, x, y=0.0):
    """Logarithm of :func:`gaussian_density`; safe for extreme arguments."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("variance must be strictly positive")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    out = -0.5 * (d * d / t + np.log(t) + _LOG_2PI)
    return out if out.ndim else float(out)


def bridge_marginal_density(t, r, z, x):
    """Marginal density at ``x`` of a bridge of length ``r`` pinned at ``z``,
    observed at time ``t``.

    The value is the Gaussian density with mean ``t z / r`` and variance
    ``t (r - t) / r``; it also equals ``p(r-t, z-x) p(t, x) / p(r, z)``
    (tested, not computed twice here).
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(t <= 0.0) or np.any(t >= r):
        raise ValueError("need 0 < t < r")
    var = t * (r - t) / r
    out = gaussian_density(var, np.asarray(x, dtype=float), t * np.asarray(z, dtype=float) / r)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Tail quadrature
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def _panel_rule(edges, n_gauss):
    """Gauss-Legendre nodes/weights on the panels delimited by ``edges``."""
    base_x, base_w = _leggauss(n_gauss)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = lo + half * (base_x[None, :] + 1.0)
    weights = half * base_w[None, :]
    return nodes.ravel(), weights.ravel()


def _tail_edges(law, s, lower, n_panels):
    """Geometrically graded panel edges in v = sqrt(r - s).

    Returns ``None`` when the integration range is empty (lower at or past
    the truncation point).
    """
    upper = law.support_sup
    if not math.isfinite(upper):
        raise AssertionError("caller must truncate an unbounded support")
    if lower >= upper:
        return None
    v_hi = math.sqrt(upper - s)
    v_lo = math.sqrt(max(lower - s, 0.0))
    if v_lo >= v_hi:
        return None
    # Graded ladder resolves boundary layers at any scale >= ~1e-9 * v_hi.
    v_floor = v_hi * 1e-9
    edges = np.concatenate(([0.0], np.geomspace(v_floor, v_hi, n_panels)))
    # Density kinks of the length law become panel edges.
    extra = [math.sqrt(b - s) for b in getattr(law, "breakpoints", ()) if lower < b < upper]
    if v_lo > 0.0:
        extra.append(v_lo)
    if extra:
        edges = np.union1d(edges, np.asarray(extra))
    edges = edges[(edges >= v_lo) & (edges <= v_hi)]
    if edges.size == 0 or edges[0] > v_lo:
        edges = np.concatenate(([v_lo], edges))
    if edges[-1] < v_hi:
        edges = np.concatenate((edges, [v_hi]))
    return edges


class _TruncatedLaw:
    """View of a length law with the unbounded tail cut at fixed mass."""

    __slots__ = ("_law", "support_sup", "breakpoints")

    def __init__(self, law, truncation_mass):
        self._law = law
        if math.isfinite(law.support_sup):
            self.support_sup = law.support_sup
        else:
            self.support_sup = law.quantile(1.0 - truncation_mass)
        self.breakpoints = getattr(law, "breakpoints", ())

    def pdf(self, r):
        return self._law.pdf(r)


def _evaluate(law, s, x, v, w, points, want_drift, extra):
    """Scaled integrals on a fixed node set.

    Returns ``(mass, drift, scale)`` where the true per-pin integrals are
    ``mass[i] * exp(scale)`` (and likewise for ``drift``), elementwise over
    the trailing x-axis.
    """
    r = s + v * v
    f = law.pdf(r)
    base = 2.0 * np.sqrt(r) * f * w  # Jacobian 2v cancels the 1/v
    n_pins = len(points)
    x_col = x[:, None]
    expo = np.empty((n_pins, x.size, v.size))
    v2 = v * v
    # Nodes outside the support must not set the exponent scale: the
    # integrand vanishes there however large the exponent.
    dead = f == 0.0
    for i, z in enumerate(points):
        c = z - x_col
        expo[i] = np.where(dead, -np.inf, z * z / (2.0 * r) - c * c / (2.0 * v2))
    scale = expo.max(axis=(0, 2))
    scale = np.where(np.isfinite(scale), scale, 0.0)
    mass = np.empty((n_pins, x.size))
    drift = np.empty((n_pins, x.size)) if want_drift else None
    with np.errstate(under="ignore"):
        for i, z in enumerate(points):
            g = np.exp(expo[i] - scale[:, None]) * base
            if extra is not None:
                g = g * extra(r, z)
            mass[i] = g.sum(axis=1)
            if want_drift:
                c = z - x_col
                with np.errstate(divide="ignore", invalid="ignore"):
                    fac = np.where(v2 > 0.0, c / v2, 0.0)
                drift[i] = (g * fac).sum(axis=1)
    return mass, drift, scale


def tail_integrals(model, s, x, *, lower=None, want_drift=False, extra=None,
                   cfg=DEFAULT_QUADRATURE):
    """Per-pin tail integrals ``S_i`` (and optionally the drift-weighted
    variant) for a bridge observed at ``(s, x)``.

    Parameters
    ----------
    model : ModelSpec
        Length law and pinning law.
    s : float
        Observation time, ``0 < s <`` the support supremum of the length law.
    x : float or 1-d array
        Observed value(s); the integrals are evaluated for every entry.
    lower : float, optional
        Lower integration limit (defaults to ``s``); used for survival-type
        integrals over ``(u, inf)``.
    want_drift : bool
        Also compute the integrals weighted by ``(z_i - x)/(r - s)``.
    extra : callable, optional
        Extra integrand factor ``extra(r, z_i)``; must accept an array of
        ``r`` values and broadcast.

    Returns
    -------
    mass, drift, scale : ndarray
        ``mass[i, j] * exp(scale[j])`` is the value of ``S_i`` at ``x[j]``;
        ``drift`` is ``None`` unless requested.  Empty ranges return zero
        mass with zero scale.
    """
    law = model.length
    points = model.pinning.points
    if s <= 0.0:
        raise ValueError("observation time must be strictly positive")
    if s >= law.support_sup:
        raise ValueError("model exhausted: observation time at or past the "
                         "support supremum of the length law")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    trunc = _TruncatedLaw(law, cfg.truncation_mass)
    lo = s if lower is None else max(lower, s)

    n_panels = cfg.base_panels
    prev = None
    for _ in range(cfg.max_subdivisions + 1):
        edges = _tail_edges(trunc, s, lo, n_panels)
        if edges is None:
            zero = np.zeros((len(points), x.size))
            return zero, (np.zeros_like(zero) if want_drift else None), np.zeros(x.size)
        v, w = _panel_rule(edges, cfg.gauss_points)
        mass, drift, scale = _evaluate(trunc, s, x, v, w, points, want_drift, extra)
        if not cfg.adaptive:
            return mass, drift, scale
        total = model.pinning.probs @ mass
        if prev is not None:
            p_total, p_scale = prev
            with np.errstate(under="ignore"):
                rescaled = p_total * np.exp(p_scale - scale)
            err = np.abs(total - rescaled)
            tol = cfg.rel_tol * np.abs(total) + cfg.abs_tol
            if np.all(err <= tol):
                return mass, drift, scale
        prev = (total, scale)
        n_panels *= 2
    raise QuadratureError(
        f"tail quadrature did not converge (s={s}, lower={lo}, "
        f"x in [{x.min():.3g}, {x.max():.3g}], panels={n_panels})")


# ---------------------------------------------------------------------------
# Mixture weight
# ---------------------------------------------------------------------------


def log_mix_weight(s, x, model, cfg=DEFAULT_QUADRATURE):
    """Log of :func:`mix_weight`; preferred inside ratios."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    mass, _, scale = tail_integrals(model, s, x_arr, cfg=cfg)
    total = model.pinning.probs @ mass
    if np.any(total <= 0.0):
        raise QuadratureError(f"mixture weight underflowed at s={s}")
    out = np.log(total) + scale + log_gaussian_density(s, x_arr)
    return out if np.ndim(x) else out.item()


def mix_weight(s, x, model, cfg=DEFAULT_QUADRATURE):
    """Mixture tail weight: the density-weighted mass of bridge lengths
    beyond ``s`` compatible with the observation ``x``.

    This is the common normalizer of every conditional formula of the
    model; it is strictly positive for ``0 < s <`` the support supremum.
    """
    return np.exp(log_mix_weight(s, x, model, cfg=cfg))
