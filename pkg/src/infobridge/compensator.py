"""Compensators of absorption built from local time at the pin levels.

The indicator of absorption, compensated, is a martingale; the compensator
is a Stieltjes integral of a per-pin intensity kernel against the local
time of the path at that pin level, stopped at absorption.  The kernel at
time ``s`` for pin ``k`` is

    lambda_k(s) = p_k * (f(s) / p(s, z_k))
                  / sum_i p_i int_s^inf (f(r) / p(r, z_i)) p(r - s, z_i - z_k) dr,

with ``f`` the length density and ``p(t, x)`` the centered Gaussian density
of variance ``t``.  Numerator and denominator separately overflow for small
``s``; the ratio is evaluated with the common exponential factor removed
analytically (see :mod:`.kernels`), so the computation is stable wherever
the value itself is representable.

The pin-value-weighted variant (compensating the pin value times the
absorption indicator) carries the path value inside the integrand; since
local time only grows where the path sits at the level, the path value may
equivalently be replaced by the level itself (exposed as a switch, default
off, to make the discretization error of the literal form measurable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import kernels
from .kernels import DEFAULT_QUADRATURE, GRID_QUADRATURE, QuadratureError

__all__ = [
    "CompensatorCurve",
    "IntensityKernel",
    "intensity_kernel",
    "compensator_K",
    "compensator_frak",
    "meyer_approx_Ah",
    "martingale_N",
    "martingale_M",
    "save_curve_csv",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(eq=False)
class CompensatorCurve:
    """Compensator evaluated on the path grid; nondecreasing for the plain
    kind, constant after absorption."""

    times: np.ndarray
    values: np.ndarray
    kind: str  # "plain" | "weighted"


def intensity_row(model, s, cfg=DEFAULT_QUADRATURE):
    """Kernel values for all pins at one time, by direct quadrature."""
    law = model.length
    if not (0.0 < s < law.support_sup):
        raise ValueError("s must lie strictly inside the support of the length law")
    f = float(law.pdf(s))
    pts = model.pinning.points
    if f == 0.0:
        return np.zeros(len(pts))
    mass, _, scale = kernels.tail_integrals(model, s, pts, cfg=cfg)
    den = model.pinning.probs @ mass
    if np.any(den <= 0.0):
        bad = int(np.nonzero(den <= 0.0)[0][0])
        raise QuadratureError(f"intensity denominator underflowed at s={s}, pin index {bad}")
    expo = pts * pts / (2.0 * s) - scale  # >= 0 and O(grid spacing): stable
    return model.pinning.probs * f * _SQRT_2PI * math.sqrt(s) * np.exp(expo) / den


def intensity_kernel(model, k, s, cfg=DEFAULT_QUADRATURE):
    """Absorption intensity kernel for pin index ``k`` at time ``s``."""
    if not 0 <= k < len(model.pinning):
        raise ValueError("pin index out of range")
    return float(intensity_row(model, s, cfg=cfg)[k])


class IntensityKernel:
    """Per-pin kernel tabulated in time with monotone cubic interpolation.

    The grid is geometric from ``max(1e-4, dt)`` and, when the length law
    has bounded support, a second geometric ladder approaches the support
    edge where the kernel blows up like ``(sup - s)^(-1/2)``; on bounded
    supports the tabulated quantity is the kernel times ``sqrt(sup - s)``,
    which stays bounded.  Queries clamp to the tabulated range.

    ``corrupt_factor`` deliberately scales the kernel (diagnostic switch
    used to prove the statistical tests can detect a biased kernel).
    """

    def __init__(self, model, dt, horizon, n_nodes=320, cfg=GRID_QUADRATURE,
                 corrupt_factor=1.0):
        self.model = model
        self.corrupt_factor = float(corrupt_factor)
        sup = model.length.support_sup
        s_min = max(1e-4, dt)
        self._edge = None
        if math.isfinite(sup):
            s_hi = sup - 0.25 * dt
            base = np.geomspace(s_min, s_hi, n_nodes)
            approach = sup - np.geomspace(0.25 * dt, (sup - s_min) * 0.5, n_nodes // 4)
            grid = np.union1d(base, approach)
            self._edge = sup
        else:
            s_hi = max(horizon, 2 * s_min)
            grid = np.geomspace(s_min, s_hi, n_nodes)
        for b in model.length.breakpoints:
            if s_min < b < s_hi:
                near = b * (1.0 + np.concatenate((-np.geomspace(1e-9, 0.2, 10),
                                                  np.geomspace(1e-9, 0.2, 10))))
                grid = np.union1d(grid, near[(near > s_min) & (near < s_hi)])
        self.s_grid = grid
        rows = np.empty((len(model.pinning), grid.size))
        for j, s in enumerate(grid):
            rows[:, j] = intensity_row(model, float(s), cfg=cfg)
        if self._edge is not None:
            rows = rows * np.sqrt(self._edge - grid)[None, :]
        self._splines = [PchipInterpolator(grid, rows[k], extrapolate=False)
                         for k in range(rows.shape[0])]

    def __call__(self, s, k=None):
        """Kernel at times ``s`` (clamped to the grid) for pin ``k`` or,
        when ``k`` is None, for all pins (leading axis)."""
        s = np.asarray(s, dtype=float)
        sc = np.clip(s, self.s_grid[0], self.s_grid[-1])
        ks = range(len(self._splines)) if k is None else [k]
        out = np.array([self._splines[i](sc) for i in ks])
        if self._edge is not None:
            out = out / np.sqrt(self._edge - sc)
        out = np.maximum(out, 0.0) * self.corrupt_factor
        return out if k is None else out[0]

    def max_rel_error(self, seed=0, n_probe=60, edge_margin=0.02):
        """Tabulation error against direct quadrature at random interior
        times (the divergent edge is excluded up to ``edge_margin``)."""
        rng = np.random.default_rng(seed)
        lo = self.s_grid[0]
        hi = self.s_grid[-1]
        if self._edge is not None:
            hi = self._edge * (1.0 - edge_margin)
        s = np.exp(rng.uniform(math.log(lo), math.log(hi), n_probe))
        worst = 0.0
        for si in s:
            direct = intensity_row(self.model, float(si)) * self.corrupt_factor
            approx = self(float(si))
            scale = np.maximum(np.abs(direct), 1e-12 + 0.0 * direct)
            worst = max(worst, float(np.max(np.abs(approx - direct) / scale)))
        return worst


def _check_local_times(model, local_times):
    pts = model.pinning.points
    if len(local_times) != len(pts):
        raise ValueError("one local-time curve per pin level is required")
    for curve, z in zip(local_times, pts):
        if abs(curve.level - z) > 1e-12:
            raise ValueError(f"local-time curve at level {curve.level} does not "
                             f"match pin level {z}")


def _stieltjes_rows(kernel_mid, d_locals, weights=None):
    """Cumulative midpoint Stieltjes sums, one row per path.

    ``kernel_mid[k]`` holds kernel values at step midpoints, ``d_locals[k]``
    the local-time increments at pin ``k``; ``weights`` optionally
    multiplies the integrand per step (path values for the weighted kind).
    """
    n_paths, n_steps = d_locals[0].shape
    inc = np.zeros((n_paths, n_steps))
    for k in range(len(d_locals)):
        term = d_locals[k] * kernel_mid[k][None, :]
        if weights is not None:
            term = term * weights[k]
        inc += term
    out = np.zeros((n_paths, n_steps + 1))
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def _curve_increments(local_times):
    return [np.diff(c.values)[None, :] for c in local_times]


def compensator_K(model, path, local_times, kernel):
    """Compensator of the absorption indicator along one path.

    ``local_times`` must supply one curve per pin level; the Stieltjes sum
    evaluates the kernel at step midpoints against the local-time
    increments and is flat after absorption.  Steps with zero increment
    never evaluate the kernel (it is ill-conditioned where irrelevant).
    """
    _check_local_times(model, local_times)
    mids = path.times[:-1] + 0.5 * path.dt
    d_locals = _curve_increments(local_times)
    kernel_mid = _masked_kernel(kernel, mids, d_locals)
    values = _stieltjes_rows(kernel_mid, d_locals)[0]
    return CompensatorCurve(times=path.times, values=values, kind="plain")


def compensator_frak(model, path, local_times, kernel, use_pin_level=False):
    """Compensator of (pin value times the absorption indicator).

    The integrand carries the path value at the step's left endpoint; with
    ``use_pin_level`` it carries the pin level instead (equal in the limit,
    since local time grows only on the level set).
    """
    _check_local_times(model, local_times)
    mids = path.times[:-1] + 0.5 * path.dt
    d_locals = _curve_increments(local_times)
    kernel_mid = _masked_kernel(kernel, mids, d_locals)
    if use_pin_level:
        weights = [np.full((1, len(mids)), z) for z in model.pinning.points]
    else:
        weights = [path.values[None, :-1]] * len(model.pinning)
    values = _stieltjes_rows(kernel_mid, d_locals, weights)[0]
    return CompensatorCurve(times=path.times, values=values, kind="weighted")


def _masked_kernel(kernel, mids, d_locals):
    """Evaluate the kernel only where some path has a local-time increment."""
    active = np.zeros(len(mids), dtype=bool)
    for d in d_locals:
        active |= (d != 0.0).any(axis=0)
    out = [np.zeros(len(mids)) for _ in d_locals]
    if active.any():
        vals = kernel(mids[active])
        vals = np.atleast_2d(vals)
        for k in range(len(d_locals)):
            out[k][active] = vals[k]
    return out


def meyer_approx_Ah(model, path, h, band_fn=None, cfg=GRID_QUADRATURE):
    """Resolvent-style approximation of the compensator at scale ``h``:
    the running time average of the conditional probability that absorption
    falls within ``(s, s + h)``, divided by ``h``.

    ``band_fn(s, x)`` may supply the conditional band probability (e.g. a
    :class:`~infobridge.filtering.BandProbabilityCache`); by default it is
    computed by direct quadrature per step, which is slow on long paths.
    The integrand is zero after absorption; the initial step uses the
    unconditional band mass.
    """
    from . import filtering

    if h <= 0.0:
        raise ValueError("h must be positive")
    n_steps = len(path.values) - 1
    t = path.dt * np.arange(n_steps)
    alive = t < min(path.tau, path.absorbed_index * path.dt)
    band = np.zeros(n_steps)
    band[0] = float(model.length.cdf(h))
    idx = np.nonzero(alive)[0]
    idx = idx[idx >= 1]
    if idx.size:
        if band_fn is None:
            sup = model.support_sup
            band[idx] = [1.0 - filtering.survival_probability(
                model, float(t[j]), float(path.values[j]), min(float(t[j]) + h, sup), cfg=cfg)
                for j in idx]
        else:
            band[idx] = band_fn(t[idx], path.values[idx])
    out = np.zeros(n_steps + 1)
    np.cumsum(band * path.dt / h, out=out[1:])
    return CompensatorCurve(times=path.times, values=out, kind="plain")


def save_curve_csv(curve, fp):
    """Write ``t, K`` rows for one compensator curve."""
    data = np.column_stack([curve.times, curve.values])
    np.savetxt(fp, data, delimiter=",", header="t,K", comments="", fmt="%.12g")


def martingale_N(path, K_curve, lam):
    """Exponential martingale of the plain compensator:
    ``(1 + lam * indicator) * exp(-lam * K)``; bounded by ``1 + lam``."""
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    k = np.arange(len(path.values))
    indicator = (k >= path.absorbed_index).astype(float)
    return (1.0 + lam * indicator) * np.exp(-lam * K_curve.values)


def martingale_M(path, frak_curve, lam):
    """Exponential local martingale of the weighted compensator:
    ``(1 + lam * value * indicator) * exp(-lam * weighted_K)``; after
    absorption the path value is exactly the pin."""
    k = np.arange(len(path.values))
    indicator = (k >= path.absorbed_index).astype(float)
    return (1.0 + lam * path.values * indicator) * np.exp(-lam * frak_curve.values)
