"""Command-line entry point: config-driven simulation, filtering curves,
compensator curves, and the full verification suite.

All randomness derives from the configured seed, so repeated runs with the
same inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import compensator as comp
from . import filtering, localtime, paths, verify
from .kernels import DEFAULT_QUADRATURE, QuadratureConfig
from .laws import ModelSpec

DEFAULT_MODEL = {
    "tau": {"family": "exponential", "rate": 1.0},
    "pinning": {"points": [0.0], "probs": [1.0]},
}


@dataclass
class RunConfig:
    model: dict
    dt: float = 1e-3
    horizon: float = 2.0
    n_paths: int = 1000
    seed: int = 0
    bandwidth_c: float = 2.0
    quadrature: dict | None = None
    out: str = "out"

    def __post_init__(self):
        if self.dt <= 0.0 or self.horizon <= 0.0 or self.n_paths < 1:
            raise ValueError("dt, horizon and n_paths must be positive")
        if self.dt >= self.horizon:
            raise ValueError("dt must be smaller than the horizon")
        self.quadrature_config()  # validate tolerances at load

    @classmethod
    def load(cls, path=None, **overrides):
        data = {}
        if path is not None:
            with open(path) as fh:
                data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        data.setdefault("model", DEFAULT_MODEL)
        return cls(**data)

    def model_spec(self):
        return ModelSpec.from_dict(self.model)

    def quadrature_config(self):
        return QuadratureConfig(**self.quadrature) if self.quadrature else DEFAULT_QUADRATURE


def _ensure_out(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def cmd_simulate(cfg, n_csv=3):
    model = cfg.model_spec()
    out = _ensure_out(cfg)
    ens = paths.simulate_ensemble(model, cfg.dt, cfg.horizon, cfg.n_paths, cfg.seed,
                                  chunk=2048)
    paths.save_ensemble(ens, os.path.join(out, "ensemble.bin"))
    for i in range(min(n_csv, len(ens))):
        paths.save_path_csv(ens.path(i), os.path.join(out, f"path_{i:04d}.csv"))
    absorbed = ens.taus <= cfg.horizon
    freq = {float(z): float(np.mean(ens.zs == z)) for z in model.pinning.points}
    print(f"paths: {len(ens)}  dt: {cfg.dt}  horizon: {cfg.horizon}")
    print(f"mean length: {ens.taus.mean():.6g}  absorbed in horizon: {absorbed.mean():.4f}")
    print("pin frequencies: " + ", ".join(f"{z:g}: {f:.4f}" for z, f in freq.items()))
    return 0


def cmd_posterior(cfg, t, x, n_u=200):
    model = cfg.model_spec()
    quad = cfg.quadrature_config()
    out = _ensure_out(cfg)
    sup = model.support_sup
    u_hi = sup if math.isfinite(sup) else model.length.quantile(0.999)
    u = np.linspace(t, u_hi, n_u)
    surv = np.array([filtering.survival_probability(model, t, x, float(ui), cfg=quad)
                     for ui in u])
    data = np.column_stack([u, surv])
    surv_path = os.path.join(out, "survival.csv")
    np.savetxt(surv_path, data, delimiter=",", header="u,probability", comments="", fmt="%.12g")
    pins = filtering.pin_posterior(model, t, x, cfg=quad)
    pin_path = os.path.join(out, "pin_posterior.csv")
    np.savetxt(pin_path, np.column_stack([model.pinning.points, pins]),
               delimiter=",", header="z,probability", comments="", fmt="%.12g")
    print(f"wrote {surv_path} and {pin_path}")
    return 0


def cmd_compensator(cfg, probe_times=None):
    model = cfg.model_spec()
    out = _ensure_out(cfg)
    kernel = comp.IntensityKernel(model, cfg.dt, cfg.horizon)
    eps = cfg.bandwidth_c * math.sqrt(cfg.dt)
    probes = probe_times or [cfg.horizon * k / 4 for k in (1, 2, 3, 4)]
    idx = [int(round(t / cfg.dt)) for t in probes]
    rows = []
    first_curve = None
    for ens in paths.iter_ensemble_chunks(model, cfg.dt, cfg.horizon, cfg.n_paths,
                                          cfg.seed, chunk=1024):
        for p in ens:
            lts = [localtime.occupation_local_time(p, z, eps) for z in model.pinning.points]
            curve = comp.compensator_K(model, p, lts, kernel)
            rows.append(curve.values[idx])
            if first_curve is None:
                first_curve = curve
    rows = np.asarray(rows)
    comp.save_curve_csv(first_curve, os.path.join(out, "compensator_path0.csv"))
    summary = verify.EnsembleSummary.from_values(rows, probes)
    with open(os.path.join(out, "compensator_summary.json"), "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"mean K at {probes}: {np.round(summary.means, 6).tolist()}")
    return 0


def cmd_verify(cfg, corrupt_kernel=1.0, fast=False):
    out = _ensure_out(cfg)
    scale = {}
    if fast:
        scale = {"n_compensator": 600, "n_terminal": 300, "n_bridge": 2000,
                 "n_brownian": 500, "n_quadratic": 100, "n_tower": 600,
                 "dt_fine": 1e-3}
    reports = verify.run_verification_suite(master_seed=cfg.seed or 20260810,
                                            corrupt_factor=corrupt_kernel,
                                            progress=lambda r: print(r.line()),
                                            **scale)
    verify.reports_to_json(reports, os.path.join(out, "reports.json"))
    n_fail = sum(not r.passed for r in reports)
    print(f"{len(reports) - n_fail}/{len(reports)} checks passed")
    return 1 if n_fail else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="infobridge",
        description="Pinned bridges with random length: simulation, filtering, "
                    "local time and compensator checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--horizon", type=float)
        p.add_argument("--paths", type=int, dest="n_paths")
        p.add_argument("--out")

    p_sim = sub.add_parser("simulate", help="simulate an ensemble and export it")
    add_common(p_sim)

    p_post = sub.add_parser("posterior", help="survival and pin posterior curves")
    add_common(p_post)
    p_post.add_argument("--t", type=float, required=True)
    p_post.add_argument("--x", type=float, required=True)

    p_comp = sub.add_parser("compensator", help="compensator curves and summary")
    add_common(p_comp)

    p_ver = sub.add_parser("verify", help="run the verification suite")
    add_common(p_ver)
    p_ver.add_argument("--corrupt-kernel", type=float, default=1.0,
                       help="scale the intensity kernel (diagnostic)")
    p_ver.add_argument("--fast", action="store_true",
                       help="reduced path counts (smoke test, not acceptance scale)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "dt", "horizon", "n_paths", "out")
                 if getattr(args, k, None) is not None}
    try:
        cfg = RunConfig.load(args.config, **overrides)
    except (ValueError, TypeError, KeyError) as exc:
        print(f"config rejected: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "posterior":
            if args.t <= 0.0:
                print("config rejected: t must be positive", file=sys.stderr)
                return 2
            return cmd_posterior(cfg, args.t, args.x)
        if args.command == "compensator":
            return cmd_compensator(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, corrupt_kernel=args.corrupt_kernel, fast=args.fast)
    except OSError as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return 3
    return 2


if __name__ == "__main__":
    sys.exit(main())
