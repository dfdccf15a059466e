"""Conditional laws of the pinned bridge given its own past.

Before absorption the pair (length, pin) has, given the observation ``x``
at time ``t``, a density-weighted mixture law: the weight of lengths in
``dr`` at pin ``z_i`` is proportional to the prior pin weight times the
bridge marginal at ``x`` times the length density at ``r``.  Everything in
this module is a ratio of the tail integrals from :mod:`.kernels`:
posterior pin weights, conditional survival, the one-step transition law
(atoms on the pin levels plus a continuous part), and the conditional mean
displacement rate (drift) whose cumulative removal turns the observed path
into a stopped Brownian motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import DEFAULT_QUADRATURE, GRID_QUADRATURE

__all__ = [
    "PosteriorState",
    "TransitionLaw",
    "posterior",
    "pin_posterior",
    "survival_probability",
    "transition_law",
    "drift",
    "DriftCache",
    "BandProbabilityCache",
    "innovation_path",
]


def _as_row(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def _pin_index(model, x):
    """Index of the pin equal to ``x``, or -1.  Absorbed states sit exactly
    on a pin by construction of the sampler."""
    hits = np.nonzero(model.pinning.points == x)[0]
    return int(hits[0]) if hits.size else -1


# ---------------------------------------------------------------------------
# Posterior of (length, pin)
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class PosteriorState:
    """Conditional law of (length, pin) given the path up to ``t``.

    Not absorbed: ``pin_probs[i]`` carries the conditional weight of pin i,
    ``survival(u)`` the conditional probability that the length exceeds
    ``u >= t``, and ``expectation(g)`` integrates a user function ``g(r, z)``
    against the mixture by quadrature.  Absorbed: the law is the point mass
    ``point_mass``.
    """

    t: float
    observed_x: float
    absorbed: bool
    pin_probs: np.ndarray
    point_mass: tuple | None
    _model: object = field(repr=False)
    _cfg: object = field(repr=False)

    def survival(self, u):
        if self.absorbed:
            return 1.0 if u < self.point_mass[0] else 0.0
        return survival_probability(self._model, self.t, self.observed_x, u, cfg=self._cfg)

    def expectation(self, g):
        """Conditional mean of ``g(length, pin)``; ``g`` must broadcast over
        an array of lengths for a scalar pin."""
        if self.absorbed:
            tau, z = self.point_mass
            return float(np.asarray(g(np.asarray([tau]), z)).ravel()[0])
        model, cfg = self._model, self._cfg
        num_mass, _, num_scale = kernels.tail_integrals(
            model, self.t, self.observed_x, extra=lambda r, z: g(r, z), cfg=cfg)
        den_mass, _, den_scale = kernels.tail_integrals(
            model, self.t, self.observed_x, cfg=cfg)
        num = model.pinning.probs @ num_mass
        den = model.pinning.probs @ den_mass
        return float((num[0] / den[0]) * np.exp(num_scale[0] - den_scale[0]))


def posterior(model, t, x, absorbed=False, tau=None, cfg=DEFAULT_QUADRATURE):
    """Posterior of (length, pin) at time ``t`` given observation ``x``.

    When ``absorbed`` the observation must sit on a pin level and ``tau``
    (default ``t``) records the absorption time; the posterior is then the
    point mass at (tau, x).
    """
    if t <= 0.0:
        raise ValueError("t must be strictly positive")
    if absorbed:
        k = _pin_index(model, x)
        if k < 0:
            raise ValueError(f"absorbed state x={x} is not a pin level")
        probs = np.zeros(len(model.pinning))
        probs[k] = 1.0
        return PosteriorState(t=t, observed_x=float(x), absorbed=True,
                              pin_probs=probs, point_mass=(t if tau is None else float(tau), float(x)),
                              _model=model, _cfg=cfg)
    probs = pin_posterior(model, t, x, cfg=cfg)
    return PosteriorState(t=t, observed_x=float(x), absorbed=False,
                          pin_probs=np.atleast_1d(probs), point_mass=None,
                          _model=model, _cfg=cfg)


def pin_posterior(model, t, x, cfg=DEFAULT_QUADRATURE):
    """Conditional pin weights at ``(t, x)``; vectorized over ``x`` (rows of
    the returned array are pins)."""
    x_arr = _as_row(x)
    mass, _, _ = kernels.tail_integrals(model, t, x_arr, cfg=cfg)
    weighted = model.pinning.probs[:, None] * mass
    out = weighted / weighted.sum(axis=0, keepdims=True)
    return out[:, 0] if np.ndim(x) == 0 else out


def survival_probability(model, t, x, u, cfg=DEFAULT_QUADRATURE):
    """P(length > u | path up to t, not yet absorbed); vectorized over ``x``."""
    if u < t:
        raise ValueError("need u >= t")
    x_arr = _as_row(x)
    if u >= model.support_sup:
        out = np.zeros(x_arr.size)
        return out if np.ndim(x) else 0.0
    den_mass, _, den_scale = kernels.tail_integrals(model, t, x_arr, cfg=cfg)
    if u == t:
        out = np.ones(x_arr.size)
        return out if np.ndim(x) else 1.0
    num_mass, _, num_scale = kernels.tail_integrals(model, t, x_arr, lower=u, cfg=cfg)
    num = model.pinning.probs @ num_mass
    den = model.pinning.probs @ den_mass
    with np.errstate(under="ignore"):
        out = np.clip(num / den * np.exp(num_scale - den_scale), 0.0, 1.0)
    return out if np.ndim(x) else float(out[0])


# ---------------------------------------------------------------------------
# Transition law
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TransitionLaw:
    """One-step transition law from ``(t, x)`` to time ``u``.

    The law lives against the reference measure mixing unit atoms at the
    pin levels with Lebesgue measure: ``atoms[i]`` is the probability of
    sitting on pin i at ``u`` (absorption occurred), ``continuous_density``
    the density of the not-yet-absorbed part (zero on the pin levels by
    convention).
    """

    t: float
    u: float
    x: float
    atoms: np.ndarray
    _model: object = field(repr=False)
    _cfg: object = field(repr=False)
    _log_den: float = field(repr=False)

    def continuous_density(self, y):
        y_arr = _as_row(y)
        if not math.isfinite(self._log_den):
            out = np.zeros(y_arr.size)
            return out if np.ndim(y) else 0.0
        model, cfg = self._model, self._cfg
        if self.u >= model.support_sup:
            surv = np.zeros(y_arr.size)
        else:
            mass_u, _, scale_u = kernels.tail_integrals(model, self.u, y_arr, cfg=cfg)
            log_gauss = kernels.log_gaussian_density(self.u - self.t, y_arr, self.x)
            with np.errstate(under="ignore"):
                surv = (model.pinning.probs @ mass_u) * np.exp(scale_u + log_gauss - self._log_den)
        on_pin = np.isin(y_arr, model.pinning.points)
        out = np.where(on_pin, 0.0, surv)
        return out if np.ndim(y) else float(out[0])

    def total_mass(self, n_grid=4001, pad=6.0):
        """Numerical normalization check: atom masses plus the integral of
        the continuous part.  The grid is offset so that no node lands
        exactly on a pin level, where the density is zero by convention."""
        pts = self._model.pinning.points
        spread = pad * math.sqrt(self.u) + float(np.max(np.abs(pts))) + abs(self.x)
        y = np.linspace(-spread, spread, n_grid) + spread * 1.9e-7
        dens = self.continuous_density(y)
        return float(self.atoms.sum() + np.trapezoid(dens, y))


def transition_law(model, t, x, u, cfg=DEFAULT_QUADRATURE):
    """Transition law of the observed process between times ``t < u``."""
    if not (0.0 < t < u):
        raise ValueError("need 0 < t < u")
    k = _pin_index(model, x)
    atoms = np.zeros(len(model.pinning))
    if k >= 0:
        # Absorbed states are traps.
        atoms[k] = 1.0
        return TransitionLaw(t=t, u=u, x=float(x), atoms=atoms,
                             _model=model, _cfg=cfg, _log_den=-math.inf)
    den_mass, _, den_scale = kernels.tail_integrals(model, t, x, cfg=cfg)
    den = float(model.pinning.probs @ den_mass[:, 0])
    log_den = math.log(den) + float(den_scale[0])
    if u >= model.support_sup:
        tail_mass = np.zeros(len(model.pinning))
    else:
        num_mass, _, num_scale = kernels.tail_integrals(model, t, x, lower=u, cfg=cfg)
        with np.errstate(under="ignore"):
            tail_mass = num_mass[:, 0] * np.exp(num_scale[0] - den_scale[0])
    band = np.clip(den_mass[:, 0] - tail_mass, 0.0, None)
    atoms = model.pinning.probs * band / den
    return TransitionLaw(t=t, u=u, x=float(x), atoms=atoms,
                         _model=model, _cfg=cfg, _log_den=log_den)


# ---------------------------------------------------------------------------
# Drift and innovation
# ---------------------------------------------------------------------------


def drift(model, s, x, cfg=DEFAULT_QUADRATURE):
    """Conditional mean displacement rate at ``(s, x)``: the mixture average
    of the bridge pull ``(z_i - x)/(r - s)``.  Vectorized over ``x``."""
    if not (0.0 < s < model.support_sup):
        raise ValueError("s must lie strictly inside the support of the length law")
    x_arr = _as_row(x)
    mass, dri, _ = kernels.tail_integrals(model, s, x_arr, want_drift=True, cfg=cfg)
    num = model.pinning.probs @ dri
    den = model.pinning.probs @ mass
    out = num / den
    return out if np.ndim(x) else float(out[0])


class _Bilinear:
    """Interpolation on a (log-time, space) grid with clamped queries.

    Bilinear by default (manual and fast, and safe next to the sign jumps
    at the pin levels); cubic available for smooth tables where fourth-order
    local error pays for itself.
    """

    def __init__(self, s_grid, x_grid, table, method="linear"):
        self._ls = np.log(s_grid)
        self._x = x_grid
        self._table = table
        self._cubic = None
        if method == "cubic":
            from scipy.interpolate import RegularGridInterpolator
            self._cubic = RegularGridInterpolator((self._ls, x_grid), table,
                                                  method="cubic")

    def __call__(self, s, x):
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float)
        ls = np.log(np.clip(s, np.exp(self._ls[0]), np.exp(self._ls[-1])))
        xc = np.clip(x, self._x[0], self._x[-1])
        if self._cubic is not None:
            shape = np.broadcast_shapes(ls.shape, xc.shape)
            pts = np.column_stack([np.broadcast_to(ls, shape).ravel(),
                                   np.broadcast_to(xc, shape).ravel()])
            return self._cubic(pts).reshape(shape)
        i = np.clip(np.searchsorted(self._ls, ls) - 1, 0, len(self._ls) - 2)
        j = np.clip(np.searchsorted(self._x, xc) - 1, 0, len(self._x) - 2)
        ws = (ls - self._ls[i]) / (self._ls[i + 1] - self._ls[i])
        wx = (xc - self._x[j]) / (self._x[j + 1] - self._x[j])
        t = self._table
        out = ((1 - ws) * (1 - wx) * t[i, j] + ws * (1 - wx) * t[i + 1, j]
               + (1 - ws) * wx * t[i, j + 1] + ws * wx * t[i + 1, j + 1])
        return out


def _space_grid(model, s_lo, s_max, n_base):
    """Space nodes for the late-time table: a linear base plus geometric
    refinement around each pin (conditional quantities kink or jump across
    a pin level) and sqrt(time)-scale refinement around the origin."""
    pts = model.pinning.points
    spread = 3.5 * math.sqrt(s_max) + float(np.max(np.abs(pts))) + 1.0
    grid = np.linspace(-spread, spread, n_base)
    offsets = np.geomspace(1e-9, 0.6, 28)
    around = np.concatenate([np.concatenate((c - offsets, [c], c + offsets))
                             for c in [*pts, 0.0]])
    fine = np.geomspace(0.25 * math.sqrt(s_lo), spread, 72)
    around = np.concatenate((around, fine, -fine))
    grid = np.union1d(grid, around)
    return grid[(grid >= -spread) & (grid <= spread)]


_ETA_MAX = 8.0


def _eta_grid(model, n_base):
    """Scaled-coordinate nodes eta = x / sqrt(s) for the small-time table,
    refined around zero where a pin at the origin puts a drift sign jump."""
    base = np.linspace(-_ETA_MAX, _ETA_MAX, n_base)
    if np.any(model.pinning.points == 0.0):
        fine = np.geomspace(1e-9, 1.0, 24)
        base = np.union1d(base, np.concatenate((-fine, [0.0], fine)))
    return base


class _HybridTable:
    """Two-regime tabulation of a conditional quantity q(s, x).

    Small times use the self-similar coordinate eta = x / sqrt(s), where
    the spatial structure has a fixed scale; later times use plain space
    coordinates with refinement at the pin levels.  The switch time is
    chosen so that no nonzero pin enters the scaled window, keeping its
    jump out of the unrefined small-time table.  Interpolation is bilinear
    in (log s, coordinate); queries clamp to the tabulated ranges.
    """

    def __init__(self, model, row_fn, s_min, s_max, n_s=160, n_eta=321, n_x=361,
                 method="linear"):
        hi = min(s_max, model.support_sup * (1.0 - 1e-9))
        nonzero = np.abs(model.pinning.points[model.pinning.points != 0.0])
        cap = np.min(nonzero) ** 2 / (_ETA_MAX + 3.0) ** 2 if nonzero.size else math.inf
        self.s_switch = min(0.1, cap, hi)
        self._small = None
        self._large = None
        if s_min < self.s_switch:
            s_nodes = np.geomspace(s_min, self.s_switch, max(n_s // 2, 40))
            etas = _eta_grid(model, n_eta)
            table = np.empty((s_nodes.size, etas.size))
            for a, s in enumerate(s_nodes):
                table[a] = row_fn(s, etas * math.sqrt(s))
            self._small = _Bilinear(s_nodes, etas, table, method=method)
        if hi > self.s_switch or self._small is None:
            lo = min(self.s_switch, hi * 0.5) if self._small is not None else s_min
            s_nodes = np.geomspace(lo, hi, n_s)
            xs = _space_grid(model, lo, s_max, n_x)
            table = np.empty((s_nodes.size, xs.size))
            for a, s in enumerate(s_nodes):
                table[a] = row_fn(s, xs)
            self._large = _Bilinear(s_nodes, xs, table, method=method)

    def __call__(self, s, x):
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float)
        if self._large is None:
            return self._small(s, np.clip(x / np.sqrt(s), -_ETA_MAX, _ETA_MAX))
        if self._small is None:
            return self._large(s, x)
        small = s < self.s_switch
        out = np.where(
            small,
            self._small(np.minimum(s, self.s_switch),
                        np.clip(x / np.sqrt(np.maximum(s, 1e-300)), -_ETA_MAX, _ETA_MAX)),
            self._large(np.maximum(s, self.s_switch), x))
        return out


class DriftCache:
    """Drift tabulated on a (time, space) grid for fast pathwise use.

    Per-step quadrature would dominate the runtime of innovation and
    compensator sweeps by two orders of magnitude; the table is filled once
    (one vectorized quadrature row per time node) and interpolated
    bilinearly in (log time, space).  ``max_rel_error`` measures the
    interpolation against direct quadrature at random probe points.
    """

    def __init__(self, model, s_min, s_max, n_s=160, n_eta=321, n_x=361,
                 cfg=GRID_QUADRATURE):
        if not (0.0 < s_min < s_max <= model.support_sup):
            raise ValueError("need 0 < s_min < s_max within the length support")
        self.model = model
        self.cfg = cfg
        self.s_min = s_min
        self.s_max = min(s_max, model.support_sup * (1.0 - 1e-9))
        self._table = _HybridTable(model, lambda s, xs: drift(model, s, xs, cfg=cfg),
                                   s_min, s_max, n_s=n_s, n_eta=n_eta, n_x=n_x)

    def __call__(self, s, x):
        return self._table(s, x)

    def _probes(self, seed, n_probe):
        """Random states weighted toward where paths actually live: the
        diffusive sqrt(time) envelope early, the pin neighborhoods later."""
        rng = np.random.default_rng(seed)
        s = np.exp(rng.uniform(math.log(self.s_min), math.log(self.s_max), n_probe))
        pts = self.model.pinning.points
        lo = min(-1.0, pts.min() - 1.0)
        hi = max(1.0, pts.max() + 1.0)
        envelope = 6.0 * np.sqrt(s)
        diffusive = np.sqrt(s) * rng.uniform(-4.0, 4.0, n_probe)
        settled = np.clip(rng.uniform(lo, hi, n_probe), -envelope, envelope)
        x = np.where(rng.uniform(size=n_probe) < 0.6, diffusive, settled)
        return s, x

    def max_rel_error(self, seed=0, n_probe=200, floor_quantile=0.5):
        """Interpolation error at random reachable states, relative with an
        absolute floor at the median drift magnitude (the drift crosses
        zero, where a pure relative error is ill-defined)."""
        s, x = self._probes(seed, n_probe)
        direct = np.array([drift(self.model, si, xi) for si, xi in zip(s, x)])
        approx = self(s, x)
        scale = np.quantile(np.abs(direct), floor_quantile)
        return float(np.max(np.abs(approx - direct) / np.maximum(np.abs(direct), scale)))


class BandProbabilityCache:
    """Tabulated conditional probability that absorption happens within
    ``(s, s + h)`` given the observation at ``s``; same layout as
    :class:`DriftCache`."""

    def __init__(self, model, h, s_min, s_max, n_s=220, n_eta=481, n_x=481,
                 cfg=GRID_QUADRATURE):
        self.model = model
        self.h = float(h)
        self.cfg = cfg
        self.s_min = s_min
        self.s_max = min(s_max, model.support_sup * (1.0 - 1e-9))

        def row(s, xs):
            return 1.0 - survival_probability(model, s, xs,
                                              min(s + h, model.support_sup), cfg=cfg)

        self._table = _HybridTable(model, row, s_min, s_max,
                                   n_s=n_s, n_eta=n_eta, n_x=n_x, method="cubic")

    def __call__(self, s, x):
        return np.clip(self._table(s, x), 0.0, 1.0)

    def max_rel_error(self, seed=0, n_probe=100):
        """Against direct quadrature at reachable states, relative to the
        band mass itself."""
        rng = np.random.default_rng(seed)
        s = np.exp(rng.uniform(math.log(self.s_min), math.log(self.s_max), n_probe))
        pts = self.model.pinning.points
        settled = np.clip(rng.uniform(pts.min() - 1.0, pts.max() + 1.0, n_probe),
                          -6.0 * np.sqrt(s), 6.0 * np.sqrt(s))
        x = np.where(rng.uniform(size=n_probe) < 0.6,
                     np.sqrt(s) * rng.uniform(-4.0, 4.0, n_probe), settled)
        direct = np.array([
            1.0 - survival_probability(self.model, si, xi,
                                       min(si + self.h, self.model.support_sup))
            for si, xi in zip(s, x)])
        return float(np.max(np.abs(self(s, x) - direct) / np.maximum(direct, 1e-3)))


def innovation_path(model, path, drift_fn=None, cfg=GRID_QUADRATURE):
    """Remove the cumulative drift from a path: the result is a Brownian
    motion stopped at the absorption time.

    Left-point Riemann sum; drift terms stop one step before the grid
    absorption index (the landing step is pinned exactly, not diffused), so
    the output is constant after absorption.
    """
    if drift_fn is None:
        drift_fn = DriftCache(model, s_min=path.dt, s_max=max(path.horizon, 2 * path.dt), cfg=cfg)
    values = path.values
    n_steps = len(values) - 1
    last = min(path.absorbed_index - 1, n_steps)  # steps carrying drift
    t = path.dt * np.arange(n_steps)
    mu = np.zeros(n_steps)
    if last > 0:
        s_eval = np.maximum(t[:last], path.dt)  # clamp the s=0 start
        mu[:last] = drift_fn(s_eval, values[:last])
    cum = np.concatenate(([0.0], np.cumsum(mu * path.dt)))
    return values - cum
