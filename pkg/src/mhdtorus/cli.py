"""Command-line front end.

Subcommands::

    run           integrate one configuration and write diagnostics.csv,
                  snapshots/ and summary.json
    verify-ops    closed-form operator checks
    verify-lemmas seeded inequality ensembles, one CSV per inequality
    cross-check   integrate the same data in both formulations and compare
    decay-study   sweep the initial amplitude and tabulate decay fits

Exit codes: 0 success, 1 failed check, 2 configuration error, 3 positivity
breach, 4 non-finite state.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DiagnosticsRecord,
    NonPositiveSeries,
    check_energy_inequality,
    conserved_quantities,
    diagnose,
    fit_decay,
)
from .config import ConfigError, RunConfig, initial_state, load_config, preset_names
from .inequalities import LEMMAS, lemma_ensemble
from .model import PerturbationState, PrimitiveState
from .oracles import spectral_oracle_checks
from .timestepper import RunOutcome, Status, integrate

log = logging.getLogger("mhdtorus")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_POSITIVITY = 3
EXIT_NON_FINITE = 4

STATUS_EXIT = {
    Status.COMPLETED: EXIT_OK,
    Status.POSITIVITY_BREACH: EXIT_POSITIVITY,
    Status.NON_FINITE: EXIT_NON_FINITE,
}

CROSS_CHECK_TOLERANCE = 1e-8
LEMMA_STABILITY_FACTOR = 2.0
SNAPSHOT_FIELDS = ("rho", "u1", "u2", "vartheta", "m")


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, Status):
        return x.value
    return x


def write_snapshot(directory: Path, index: int, state) -> list[Path]:
    """One file per field: a text header line, then little-endian float64 values."""
    prim = state.to_primitive() if isinstance(state, PerturbationState) else state
    directory.mkdir(parents=True, exist_ok=True)
    n = prim.rho.shape[0]
    paths = []
    for name, values in zip(SNAPSHOT_FIELDS, prim.stacked()):
        path = directory / f"snap_{index:04d}_{name}.bin"
        header = f"n={n} field={name} t={_fmt(float(prim.time))}\n".encode("ascii")
        path.write_bytes(header + np.ascontiguousarray(values, dtype="<f8").tobytes())
        paths.append(path)
    return paths


def read_snapshot(path: Path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    line, _, body = raw.partition(b"\n")
    meta = dict(item.split("=", 1) for item in line.decode("ascii").split())
    n = int(meta["n"])
    return meta, np.frombuffer(body, dtype="<f8").reshape(n, n)


# ----------------------------------------------------------------------
# run


def _start_state(cfg: RunConfig):
    s = initial_state(cfg)
    return s.to_perturbation() if cfg.formulation == "perturbation" else s


def _transport_gap(state, mode: str) -> float | None:
    if mode == "independent":
        return None
    pert = state.to_perturbation() if isinstance(state, PrimitiveState) else state
    g = pert.grid
    if mode == "density-perturbation":
        return g.sobolev_norm(pert.m - pert.a, 3)
    prim = state if isinstance(state, PrimitiveState) else state.to_primitive()
    return g.sobolev_norm(prim.m - prim.rho, 3)


def _fit_window(cfg: RunConfig, t_end: float) -> tuple[float, float]:
    lo, hi = cfg.analysis.fit_window
    hi = min(hi, t_end)
    if lo >= hi:
        lo = 0.0
    return lo, hi


def _safe_fit(times, values, window):
    try:
        return asdict(fit_decay(times, values, window))
    except (NonPositiveSeries, ValueError) as err:
        return {"error": str(err)}


def simulate(cfg: RunConfig, out_dir: Path | None = None, snapshots: bool = True):
    """Integrate ``cfg``; returns ``(outcome, records, summary)``.

    With ``out_dir`` the diagnostics CSV, snapshots and summary are written.
    """
    state = _start_state(cfg)
    p = cfg.params
    records: list[DiagnosticsRecord] = []
    gaps: list[float] = []
    snap_every = cfg.output.snapshot_interval
    snap_dir = None if out_dir is None or not snapshots else out_dir / "snapshots"
    next_snap = [0.0, 0]

    def observer(t, s):
        rec = diagnose(s, p)
        records.append(rec)
        gap = _transport_gap(s, cfg.initial.magnetic)
        if gap is not None:
            gaps.append(gap)
        if snap_dir is not None and t >= next_snap[0] - 1e-9:
            write_snapshot(snap_dir, next_snap[1], s)
            next_snap[0] += snap_every
            next_snap[1] += 1

    outcome = integrate(state, p, cfg.integrator, observer)
    if snap_dir is not None and not outcome.completed:
        write_snapshot(snap_dir, next_snap[1], outcome.state)
    summary = build_summary(cfg, state, outcome, records, gaps)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(out_dir / "diagnostics.csv", DiagnosticsRecord.columns(), [r.values() for r in records])
        write_json(out_dir / "summary.json", summary)
    return outcome, records, summary


def build_summary(cfg: RunConfig, state0, outcome: RunOutcome, records, gaps) -> dict:
    prim0 = state0.to_primitive() if isinstance(state0, PerturbationState) else state0
    cq0 = conserved_quantities(prim0, cfg.params)
    base = {
        "version": __version__,
        "status": outcome.status.value,
        "message": outcome.message,
        "final_time": outcome.time,
        "dt": outcome.dt,
        "steps": outcome.steps,
        "samples": len(records),
        "e0": cq0.energy,
        "mass": cq0.mass,
        "momentum": list(cq0.momentum),
        "config": cfg.to_dict(),
    }
    if not records:
        return base
    first, last = records[0], records[-1]
    t = np.array([r.time for r in records])
    col = {name: np.array([getattr(r, name) for r in records]) for name in DiagnosticsRecord.columns()}
    window = _fit_window(cfg, float(t[-1]))
    fits = {
        "u_h3_squared": _safe_fit(t, col["h3_u"] ** 2, window),
        "theta_h3_squared": _safe_fit(t, col["h3_theta"] ** 2, window),
        "E": _safe_fit(t, col["E"], window),
    }
    energy_check = asdict(check_energy_inequality(records)) if len(records) >= 3 else None
    amp = np.hypot(col["h3_a"], col["h3_m"])
    summary = {
        **base,
        "E0": first.E,
        "initial_h3": float(
            np.sqrt(first.h3_a**2 + first.h3_u**2 + first.h3_theta**2 + first.h3_m**2)
        ),
        "final_norms": {k: getattr(last, k) for k in ("h3_a", "h3_u", "h3_theta", "h3_m", "h3_sigma", "h3_G", "E", "D")},
        "decay_fits": fits,
        "fitted_rate": fits["E"].get("rate"),
        "drift": {
            "mass_relative": float(np.abs(col["mass"] - first.mass).max() / abs(first.mass)),
            "energy_relative": float(np.abs(col["total_energy"] - first.total_energy).max() / abs(first.total_energy)),
            "momentum_absolute": float(np.hypot(col["momentum_1"], col["momentum_2"]).max()),
            "magnetic_mass_absolute": float(np.abs(col["magnetic_mass"] - first.magnetic_mass).max()),
        },
        "sup_h3_a_m": float(amp.max()),
        "u_h3_ratio_final_initial": float(last.h3_u / first.h3_u) if first.h3_u > 0 else None,
        "m_h3_range": [float(col["h3_m"].min()), float(col["h3_m"].max())],
        "max_residual_G": float(np.nanmax(col["residual_G"])),
        "max_residual_sigma": float(np.nanmax(col["residual_sigma"])),
        "energy_inequality": energy_check,
        "transport_discrepancy": float(max(gaps)) if gaps else None,
    }
    return summary


# ----------------------------------------------------------------------
# subcommands


def cmd_run(cfg: RunConfig, out: Path) -> int:
    outcome, records, summary = simulate(cfg, out)
    print(f"status: {summary['status']}  t={summary['final_time']:.6g}  steps={summary['steps']}  dt={summary['dt']:.6g}")
    if not records:
        print(f"error: {outcome.message}", file=sys.stderr)
        return STATUS_EXIT[outcome.status]
    drift = summary["drift"]
    print(f"E(0)={summary['E0']:.6e}  fitted E rate={summary['fitted_rate']}")
    print(
        "drift: mass {mass_relative:.3e}  energy {energy_relative:.3e}  momentum {momentum_absolute:.3e}"
        "  magnetic mass {magnetic_mass_absolute:.3e}".format(**drift)
    )
    if summary["transport_discrepancy"] is not None:
        print(f"transport discrepancy (H3): {summary['transport_discrepancy']:.3e}")
    print(f"wrote {out}")
    if not outcome.completed:
        print(f"error: {outcome.message}", file=sys.stderr)
    return STATUS_EXIT[outcome.status]


def cmd_verify_ops(cfg: RunConfig, out: Path | None) -> int:
    checks = spectral_oracle_checks(32)
    failed = 0
    for c in checks:
        flag = "PASS" if c.passed else "FAIL"
        failed += not c.passed
        print(f"{flag}  {c.name:40s} error={c.error:.3e} tol={c.tolerance:.0e}")
    print(f"{len(checks) - failed}/{len(checks)} operator checks passed")
    if out is not None:
        write_csv(out / "verify_ops.csv", ["check", "error", "tolerance", "passed"],
                  [[c.name, c.error, c.tolerance, int(c.passed)] for c in checks])
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def lemma_table(cfg: RunConfig):
    """Per-lemma ensembles on every configured resolution."""
    res = sorted(cfg.lemmas.resolutions)
    table = {}
    for lemma in LEMMAS:
        table[lemma] = {
            n: lemma_ensemble(lemma, n, cfg.lemmas.samples, seed=cfg.lemmas.seed, n_max=res[-1]) for n in res
        }
    return table


def cmd_verify_lemmas(cfg: RunConfig, out: Path) -> int:
    table = lemma_table(cfg)
    res = sorted(cfg.lemmas.resolutions)
    failed = 0
    summary_rows = []
    for lemma, by_n in table.items():
        rows = []
        for n, rep in by_n.items():
            rows += [[i, n, r] for i, r in enumerate(rep.ratios)]
        write_csv(out / "lemmas" / f"{lemma}.csv", ["sample", "n", "ratio"], rows)
        maxima = [by_n[n].max_ratio for n in res]
        finite = all(np.all(np.isfinite(by_n[n].ratios)) for n in res)
        spread = max(maxima) / min(maxima) if min(maxima) > 0 else math.inf
        ok = finite and spread <= LEMMA_STABILITY_FACTOR
        failed += not ok
        for n in res:
            rep = by_n[n]
            summary_rows.append([lemma, n, rep.samples, rep.max_ratio, rep.mean_ratio, int(finite), spread, int(ok)])
        print(
            f"{'PASS' if ok else 'FAIL'}  {lemma:18s} "
            + "  ".join(f"n={n}: max={by_n[n].max_ratio:.4g}" for n in res)
            + f"  spread={spread:.3f}"
        )
    write_csv(out / "lemmas_summary.csv",
              ["lemma", "n", "samples", "max_ratio", "mean_ratio", "finite", "max_spread", "passed"], summary_rows)
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def formulation_runs(cfg: RunConfig) -> dict[str, RunOutcome]:
    """Integrate the initial data of ``cfg`` in both formulations."""
    prim0 = initial_state(cfg)
    return {
        name: integrate(state, cfg.params, cfg.integrator)
        for name, state in (("primitive", prim0), ("perturbation", prim0.to_perturbation()))
    }


def compare_runs(cfg: RunConfig, runs: dict[str, RunOutcome]) -> dict:
    bad = [o for o in runs.values() if not o.completed]
    result = {"status": bad[0].status.value if bad else Status.COMPLETED.value, "t_end": cfg.integrator.t_end}
    if bad:
        result["message"] = bad[0].message
        return result
    a = runs["primitive"].state.to_perturbation()
    b = runs["perturbation"].state
    g = a.grid
    diff = g.sobolev_norm(a.stacked() - b.stacked(), 3)
    result.update(
        discrepancy_h3=diff,
        relative=diff / g.sobolev_norm(b.stacked(), 3),
        tolerance=CROSS_CHECK_TOLERANCE,
        passed=bool(diff <= CROSS_CHECK_TOLERANCE),
        dt=runs["primitive"].dt,
        scheme=cfg.integrator.scheme,
    )
    return result


def cross_check(cfg: RunConfig) -> dict:
    """H^3 distance at ``t_end`` between the two formulations' trajectories."""
    return compare_runs(cfg, formulation_runs(cfg))


def cmd_cross_check(cfg: RunConfig, out: Path) -> int:
    result = cross_check(cfg)
    write_json(out / "cross_check.json", result)
    if result["status"] != Status.COMPLETED.value:
        print(f"error: {result['message']}", file=sys.stderr)
        return STATUS_EXIT[Status(result["status"])]
    flag = "PASS" if result["passed"] else "FAIL"
    print(f"{flag}  H3 discrepancy at t={result['t_end']:g}: {result['discrepancy_h3']:.3e}"
          f" (relative {result['relative']:.3e}, tolerance {CROSS_CHECK_TOLERANCE:.0e})")
    return EXIT_OK if result["passed"] else EXIT_CHECK_FAILED


def cmd_decay_study(cfg: RunConfig, out: Path) -> int:
    header = ["amplitude", "status", "rate_u", "r2_u", "rate_theta", "r2_theta", "rate_E", "r2_E",
              "sup_h3_a_m_over_amplitude", "m_h3_min_ratio", "m_h3_max_ratio"]
    rows = []
    for eps in sorted(cfg.study.amplitudes):
        member = replace(cfg, initial=replace(cfg.initial, amplitude=float(eps)))
        _, records, summary = simulate(member, out / f"eps_{eps:.3g}", snapshots=False)
        fits = summary["decay_fits"]
        m0 = records[0].h3_m
        rows.append([
            float(eps),
            summary["status"],
            *(float(fits[k].get(f, math.nan)) for k in ("u_h3_squared", "theta_h3_squared", "E") for f in ("rate", "r_squared")),
            summary["sup_h3_a_m"] / eps,
            summary["m_h3_range"][0] / m0 if m0 > 0 else math.nan,
            summary["m_h3_range"][1] / m0 if m0 > 0 else math.nan,
        ])
        print(f"eps={eps:.3g}: status {summary['status']}, E rate {fits['E'].get('rate')}, r2 {fits['E'].get('r_squared')}")
    write_csv(out / "decay_study.csv", header, rows)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "verify-ops": cmd_verify_ops,
    "verify-lemmas": cmd_verify_lemmas,
    "cross-check": cmd_cross_check,
    "decay-study": cmd_decay_study,
}

DEFAULT_PRESETS = {
    "run": "small-random",
    "verify-ops": None,
    "verify-lemmas": None,
    "cross-check": "cross-check",
    "decay-study": "decay-study",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhdtorus", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="YAML configuration file")
        sp.add_argument("--preset", choices=preset_names(), help="named preset (the config file overrides it)")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed for random initial data and ensembles")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and args.seed < 0:
        print("config error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    preset = args.preset if args.preset is not None else (None if args.config else DEFAULT_PRESETS[args.command])
    try:
        cfg = load_config(args.config, preset, args.seed)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(cfg.output.dir)
    if args.command == "verify-ops" and args.out is None:
        out = None
    return COMMANDS[args.command](cfg, out)


__all__ = ["main", "simulate", "cross_check", "formulation_runs", "compare_runs", "lemma_table", "read_snapshot", "write_snapshot"]
