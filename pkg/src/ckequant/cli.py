"""Batch experiment runner.

`ckequant <subcommand> --config path [--set key=value ...] [--out dir]`

Every run writes `<subcommand>_<hash>.csv` and `<subcommand>_<hash>.json`
plus a `manifest.json` echoing the exact config (the hash is over the
canonical config JSON, so identical configs collide on purpose). All files
are written atomically; reruns with the same config and seed are
byte-identical. Random starts use numpy's seeded PCG64 generator.

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 not converged.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile

import numpy as np

from . import continuum as ct
from . import functionals as fn
from . import solver
from .config import ExperimentConfig
from .errors import CkeError, SpecInvalid
from .geometry import build_grid
from .obstructions import LatticeActionSpec, obstruction_report

SUBCOMMANDS = ("balance", "flow", "bergman", "spectrum", "cflow", "obstruction",
               "almost")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def apply_overrides(d: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise SpecInvalid(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise SpecInvalid(f"--set path {key!r} crosses a non-object")
        node[parts[-1]] = val
    return d


def load_config(path: str | None, overrides: list[str]) -> ExperimentConfig:
    if path:
        with open(path) as fh:
            d = json.load(fh)
    else:
        d = {"testbed": {"n": 1, "degrees": [1, 1], "k": 4}}
    return ExperimentConfig.from_dict(apply_overrides(d, overrides))


def _action_from_config(cfg: ExperimentConfig, raw: dict) -> LatticeActionSpec:
    act = raw.get("action", {})
    weights = act.get("weights")
    if weights is None:
        weights = [0] * cfg.testbed.n + [1]
    shifts = act.get("lift_shifts", [0] * cfg.testbed.nfactors)
    return LatticeActionSpec(tuple(int(w) for w in weights),
                             tuple(int(c) for c in shifts))


# ---------------------------------------------------------------------------
# Subcommand bodies: each returns (csv_header, csv_rows, json_payload)
# ---------------------------------------------------------------------------

def _start_state(cfg: ExperimentConfig):
    grid = build_grid(cfg.testbed, cfg.grid.resolution, cfg.grid.tol_quad)
    ref = solver.reference_state(cfg.testbed, grid)
    rng = np.random.default_rng(cfg.seed)
    if cfg.perturb > 1.0:
        return solver.perturbed_start(ref, rng, cfg.perturb), ref
    return ref, ref


def run_balance(cfg: ExperimentConfig, raw: dict):
    start, _ = _start_state(cfg)
    tol = cfg.solver.tol(cfg.testbed.n)
    final, trace = solver.iterate_to_balance(
        start, cfg.solver.max_iter, tol,
        recenter_on_drift=cfg.solver.torus_recenter,
        drift_factor=cfg.solver.drift_factor)
    reported = final
    if cfg.solver.torus_recenter and final.grid.mode == "torus_invariant":
        reported = solver.normalize(reported, "torus_recenter")
    if cfg.solver.scale_fix:
        reported = solver.normalize(reported, "scale_fix")
    payload = {
        "iterations": len(trace.rows) - 1,
        "residual": final.residual,
        "fixed_point_gap": _fixed_point_gap(final),
        "functionals": fn.functional_report(final).__dict__,
        "grams": [g.to_json_dict() for g in reported.grams],
    }
    return trace.header(), trace.table(), payload


def _fixed_point_gap(state) -> dict:
    """Empirical constant in dist(T(H), H) <= C sqrt(residual)."""
    from . import hermitian as hm
    d = float(np.sqrt(sum(hm.dist(g, t, state.spec.k) ** 2
                          for g, t in zip(state.grams, state.t_images))))
    res = max(state.residual, 1e-300)
    return {"dist_to_image": d, "residual": state.residual,
            "ratio_c": d / np.sqrt(res)}


def run_flow(cfg: ExperimentConfig, raw: dict):
    start, _ = _start_state(cfg)
    k = cfg.testbed.k
    h = cfg.solver.step_h if cfg.solver.step_h else 1.0 / (2 * k)
    tol = cfg.solver.tol(cfg.testbed.n)
    final, trace = solver.balancing_flow(start, h, cfg.flow_t_end, tol_res=tol)
    ding = trace.column("ding_q")
    res = trace.column("residual")
    ts = trace.column("t")
    rate = [(ding[j + 1] - ding[j]) / (ts[j + 1] - ts[j]) / res[j]
            for j in range(min(6, len(ding) - 1))]
    payload = {
        "steps": len(trace.rows) - 1,
        "residual": final.residual,
        "descent_rate_over_residual": rate,
        "functionals": fn.functional_report(final).__dict__,
    }
    return trace.header(), trace.table(), payload


def _bergman_tables(cfg: ExperimentConfig):
    from math import factorial
    spec = cfg.testbed
    rgrid = ct.radial_grid(cfg.radial_nodes)
    gauge = ct.zero_gauge(spec)
    rows = []
    for k in cfg.k_list:
        dev = ct.bergman_deviation(spec, int(k), rgrid, gauge)
        row = [int(k)]
        for i, d in enumerate(dev):
            dk = spec.at_level(int(k)).section_dim(i)
            b0 = spec.degrees[i] ** spec.n / factorial(spec.n)
            lead = np.abs((1.0 + d) * dk / (b0 * float(k) ** spec.n) - 1.0)
            row.append(float(np.max(lead)))
        for d in dev:
            row.append(float(np.max(np.abs(d))))
        rows.append(row)
    nf = spec.nfactors
    header = (["k"] + [f"dev_leading_{i + 1}" for i in range(nf)]
              + [f"dev_balanced_{i + 1}" for i in range(nf)])
    return header, rows


def run_bergman(cfg: ExperimentConfig, raw: dict):
    header, rows = _bergman_tables(cfg)
    ks = [r[0] for r in rows]
    nf = cfg.testbed.nfactors
    sup_lead = [max(r[1:1 + nf]) for r in rows]
    payload = {
        "k_list": ks,
        "slope_leading": ct.fit_loglog_slope(ks, sup_lead),
        "max_balanced_deviation": max(max(r[1 + nf:]) for r in rows),
    }
    return header, rows, payload


def run_spectrum(cfg: ExperimentConfig, raw: dict):
    rgrid = ct.radial_grid(cfg.radial_nodes)
    op = ct.p_operator_at_cke(rgrid, cfg.testbed)
    vals = ct.p_spectrum(op)
    rows = [[i, float(v)] for i, v in enumerate(vals)]
    kernel = int(np.sum(np.abs(vals) < 1e-6))
    payload = {
        "asymmetry": op.asymmetry(),
        "max_eigenvalue": float(vals[-1]),
        "numerical_kernel_dim": kernel,
        "spectral_gap": float(vals[-1 - kernel]) if kernel < len(vals) else None,
    }
    return ["eig_index", "eigenvalue"], rows, payload


def run_cflow(cfg: ExperimentConfig, raw: dict):
    spec = cfg.testbed
    if spec.n != 1:
        raise SpecInvalid("the continuum flow runs on P^1 data only")
    rgrid = ct.radial_grid(cfg.radial_nodes)
    op = ct.p_operator_at_cke(rgrid, spec)
    eps = float(raw.get("cflow_epsilon", 0.05))
    u = rgrid.u
    shapes = [np.sin(2 * np.pi * u), 4 * u * (1 - u) * np.cos(np.pi * u),
              (2 * u - 1) ** 3 - 0.3 * (2 * u - 1)]
    seed_fields = [eps * shapes[j % len(shapes)] for j in range(spec.nfactors)]
    pert = ct.project_out_kernel(op, seed_fields) if eps else seed_fields
    dt = raw.get("cflow_dt")
    phis, rows = ct.inverse_ma_flow(rgrid, spec, pert, cfg.flow_t_end, dt=dt)
    payload = {
        "sup_phi_initial": max(float(np.max(np.abs(p))) for p in pert),
        "sup_phi_final": max(float(np.max(np.abs(p))) for p in phis),
        "ding_initial": rows[0][2],
        "ding_final": rows[-1][2],
    }
    return ["t", "sup_phi", "ding", "mass_err"], [list(r) for r in rows], payload


def run_obstruction(cfg: ExperimentConfig, raw: dict):
    grid = build_grid(cfg.testbed, cfg.grid.resolution, cfg.grid.tol_quad)
    action = _action_from_config(cfg, raw)
    report = obstruction_report(cfg.testbed, action, grid)
    rows = [[i, rep["chow"], rep["a"][0], rep["e"][0]]
            for i, rep in enumerate(report["factors"])]
    return ["factor", "chow", "a0", "e0"], rows, report


def run_almost(cfg: ExperimentConfig, raw: dict):
    spec = cfg.testbed
    if spec.n != 1:
        raise SpecInvalid("the almost-balanced pipeline runs on P^1 data only")
    rgrid = ct.radial_grid(cfg.radial_nodes)
    ks = [int(k) for k in cfg.k_list]
    result = ct.almost_balanced_run(spec, ks, rgrid)
    rows = []
    for k in sorted(result["uncorrected"]):
        rows.append([k, max(result["uncorrected"][k]), max(result["corrected"][k])])
    payload = {
        "k_list": sorted(result["uncorrected"]),
        "slope_uncorrected": ct.fit_loglog_slope(
            [r[0] for r in rows], [r[1] for r in rows]),
        "slope_corrected": ct.fit_loglog_slope(
            [r[0] for r in rows], [r[2] for r in rows]),
        "poisson_constants": [float(c) for c in result["constants"]],
    }
    return ["k", "sup_dev_uncorrected", "sup_dev_corrected"], rows, payload


RUNNERS = {
    "balance": run_balance,
    "flow": run_flow,
    "bergman": run_bergman,
    "spectrum": run_spectrum,
    "cflow": run_cflow,
    "obstruction": run_obstruction,
    "almost": run_almost,
}


def run(subcommand: str, cfg: ExperimentConfig, raw: dict, out_dir: str) -> dict:
    header, rows, payload = RUNNERS[subcommand](cfg, raw)
    tag = config_hash(cfg)
    base = os.path.join(out_dir, f"{subcommand}_{tag}")
    write_csv(base + ".csv", header, rows)
    _atomic_write(base + ".json", json.dumps(payload, indent=2, sort_keys=True,
                                             default=str) + "\n")
    manifest = {"subcommand": subcommand, "config": cfg.to_dict(), "hash": tag}
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"csv": base + ".csv", "json": base + ".json", "hash": tag}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ckequant",
        description="balanced-metric experiments on projective testbeds")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="path to the experiment config JSON")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config leaf")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        raw = {}
        if args.config:
            with open(args.config) as fh:
                raw = apply_overrides(json.load(fh), args.overrides)
        else:
            raw = apply_overrides({}, args.overrides)
        out_dir = args.out or cfg.outputs
        files = run(args.subcommand, cfg, raw, out_dir)
        print(json.dumps({"status": "ok", **files}))
        return 0
    except CkeError as exc:
        err = {"status": "error", "error": exc.code, "message": str(exc)}
        print(json.dumps(err))
        return exc.exit_status
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"status": "error", "error": "SPEC_INVALID",
                          "message": str(exc)}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
