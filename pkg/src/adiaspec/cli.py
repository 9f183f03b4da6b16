"""Command-line front end: config ingestion, sweeps, result persistence.

Outputs are deterministic down to the byte for a fixed config and seed:
floats are serialized with repr, JSON keys are sorted, rows are emitted
in sorted (E, then descending epsilon) order, and every file embeds the
resolved config and the seed.  Parallel dispatch (--threads) only changes
wall time, never file contents.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import actions as actions_mod
from . import cocycle as cocycle_mod
from . import geometry as geometry_mod
from . import hill
from .errors import (
    AdiaspecError,
    ConfigError,
    InvalidInputError,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ASSUMPTION = 3
EXIT_NUMERIC = 4


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs, already parsed and validated."""

    potential_v: hill.PeriodicPotential
    potential_w: geometry_mod.AnalyticPotential
    n: int
    m: int
    energy: float | None  # None means "maximize the window margin"
    energy_grid: tuple[float, float, int] | None
    ceiling: float
    epsilons: tuple[float, ...]
    periods: float
    z: float
    z_samples: int
    iterations: int
    renorm_stride: int
    seed: int
    tol_edge: float
    tol_quad: float
    tol_ode: float
    out_dir: str
    formats: tuple[str, ...]
    model: dict
    stokes: dict
    resolved: dict  # plain-data mirror embedded in every output


def load_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    def need(section: str, key: str) -> str:
        if not cp.has_option(section, key):
            raise ConfigError(f"missing key {section}.{key}")
        return cp.get(section, key)

    def opt(section: str, key: str, fallback: str) -> str:
        return cp.get(section, key, fallback=fallback)

    v = _parse_potential_v(cp, need)
    w_terms = _parse_terms(need("potential_w", "terms"), "potential_w.terms")
    strip = _positive(opt("potential_w", "strip_half_width", "0.5"),
                      "potential_w.strip_half_width")
    try:
        w = geometry_mod.AnalyticPotential(w_terms, strip)
    except InvalidInputError as exc:
        raise ConfigError(f"potential_w: {exc}") from exc

    n = _int_at_least(need("window", "n"), 1, "window.n")
    m = _int_at_least(need("window", "m"), 0, "window.m")
    e_raw = opt("window", "energy", "auto").strip()
    energy = None if e_raw.lower() == "auto" else float(e_raw)
    grid_raw = opt("window", "energy_grid", "").split()
    energy_grid = None
    if grid_raw:
        if len(grid_raw) != 3:
            raise ConfigError("window.energy_grid needs: min max count")
        energy_grid = (float(grid_raw[0]), float(grid_raw[1]),
                       _int_at_least(grid_raw[2], 1, "window.energy_grid count"))

    ceiling = _positive(need("grid", "ceiling"), "grid.ceiling")

    eps = tuple(float(t) for t in opt("cocycle", "epsilons", "0.2 0.1 0.05").split())
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("cocycle.epsilons must be positive numbers")
    periods = _positive(opt("cocycle", "periods", "200"), "cocycle.periods")
    z = float(opt("cocycle", "z", "0.0"))
    z_samples = _int_at_least(opt("cocycle", "z_samples", "8"), 1,
                              "cocycle.z_samples")
    iterations = _int_at_least(opt("cocycle", "N", "20000"), 1, "cocycle.N")
    stride = _int_at_least(opt("cocycle", "renorm_stride", "8"), 1,
                           "cocycle.renorm_stride")
    seed = int(opt("cocycle", "seed", "0"))

    tol_edge = _positive(opt("tolerances", "edge", "1e-10"), "tolerances.edge")
    tol_quad = _positive(opt("tolerances", "quadrature", "1e-10"),
                         "tolerances.quadrature")
    tol_ode = _positive(opt("tolerances", "ode", "1e-8"), "tolerances.ode")

    out_dir = opt("output", "directory", "out")
    formats = tuple(opt("output", "formats", "csv json").split())
    for f in formats:
        if f not in ("csv", "json"):
            raise ConfigError(f"unknown output format {f!r}")

    model = {k: v2 for k, v2 in cp.items("model")} if cp.has_section("model") else {}
    stokes = {k: v2 for k, v2 in cp.items("stokes")} if cp.has_section("stokes") else {}

    resolved = {
        "potential_v": {"kind": v.kind,
                        "coefficients": [list(t) for t in v.coefficients],
                        "segments": [list(t) for t in v.segments]},
        "potential_w": {"terms": [list(t) for t in w.coefficients],
                        "strip_half_width": w.strip_half_width},
        "window": {"n": n, "m": m,
                   "energy": energy,
                   "energy_grid": list(energy_grid) if energy_grid else None},
        "grid": {"ceiling": ceiling},
        "cocycle": {"epsilons": list(eps), "periods": periods, "z": z,
                    "z_samples": z_samples, "N": iterations,
                    "renorm_stride": stride, "seed": seed},
        "tolerances": {"edge": tol_edge, "quadrature": tol_quad, "ode": tol_ode},
        "output": {"directory": out_dir, "formats": list(formats)},
        "model": dict(sorted(model.items())),
        "stokes": dict(sorted(stokes.items())),
    }
    return RunConfig(
        potential_v=v, potential_w=w, n=n, m=m, energy=energy,
        energy_grid=energy_grid, ceiling=ceiling, epsilons=eps,
        periods=periods, z=z, z_samples=z_samples, iterations=iterations,
        renorm_stride=stride, seed=seed, tol_edge=tol_edge,
        tol_quad=tol_quad, tol_ode=tol_ode, out_dir=out_dir,
        formats=formats, model=model, stokes=stokes, resolved=resolved,
    )


def _parse_potential_v(cp, need) -> hill.PeriodicPotential:
    kind = need("potential_v", "kind").strip()
    if kind == "trig":
        terms = _parse_terms(need("potential_v", "terms"), "potential_v.terms")
        return hill.PeriodicPotential.trig(terms)
    if kind == "piecewise":
        segs = []
        for line in need("potential_v", "segments").splitlines():
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ConfigError(
                    "potential_v.segments lines need: breakpoint value"
                )
            segs.append((float(parts[0]), float(parts[1])))
        return hill.PeriodicPotential.piecewise(segs)
    if kind == "zero":
        return hill.PeriodicPotential.zero()
    raise ConfigError(f"potential_v.kind must be trig|piecewise|zero, got {kind!r}")


def _parse_terms(text: str, where: str):
    terms = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise ConfigError(f"{where} lines need: frequency cos_amp sin_amp")
        terms.append((int(parts[0]), float(parts[1]), float(parts[2])))
    if not terms:
        raise ConfigError(f"{where} is empty")
    return terms


def _positive(text: str, where: str) -> float:
    val = float(text)
    if not val > 0:
        raise ConfigError(f"{where} must be positive")
    return val


def _int_at_least(text: str, least: int, where: str) -> int:
    val = int(text)
    if val < least:
        raise ConfigError(f"{where} must be >= {least}")
    return val


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _config_stamp(cfg: RunConfig, seed: int) -> str:
    blob = json.dumps(cfg.resolved, sort_keys=True, separators=(",", ":"))
    return f"# config: {blob}\n# seed: {seed}\n"


def _write_csv(path: str, cfg: RunConfig, seed: int, header: list[str],
               rows: list[list]) -> None:
    lines = [_config_stamp(cfg, seed)]
    lines.append(",".join(header) + "\n")
    for row in rows:
        lines.append(",".join(_fmt(c) for c in row) + "\n")
    with open(path, "w", newline="") as fh:
        fh.write("".join(lines))


def _write_json(path: str, cfg: RunConfig, seed: int, payload: dict) -> None:
    doc = {"config": cfg.resolved, "seed": seed, "result": payload}
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _band_structure(cfg: RunConfig) -> hill.BandStructure:
    return hill.band_edges(cfg.potential_v, cfg.ceiling, tol=cfg.tol_edge)


def _energy_candidates(cfg: RunConfig, bands) -> list[float]:
    if cfg.energy is not None:
        return [cfg.energy]
    if cfg.energy_grid is not None:
        lo, hi, count = cfg.energy_grid
        if count == 1:
            return [lo]
        step = (hi - lo) / (count - 1)
        return [lo + i * step for i in range(count)]
    try:
        return [geometry_mod.best_window_energy(cfg.potential_w, bands,
                                                cfg.n, cfg.m)]
    except InvalidInputError:
        # an infeasible automatic search is an assumption failure, not a
        # malformed config; let the caller report it
        return []


def _best_energy(cfg: RunConfig, bands) -> float | None:
    """Admissible energy with the largest window margin, None if there is none."""
    best, best_margin = None, -math.inf
    for E in _energy_candidates(cfg, bands):
        rep = geometry_mod.analyze_window(cfg.potential_w, bands, E, cfg.n, cfg.m)
        if rep.all_ok and rep.margin > best_margin:
            best, best_margin = E, rep.margin
    return best


# ---------------------------------------------------------------------------
# subcommands


def cmd_bands(cfg: RunConfig, seed: int) -> int:
    bands = _band_structure(cfg)
    rows = []
    for j, e in enumerate(bands.edges, start=1):
        gap_flag = ""
        if j % 2 == 0:
            k = j // 2
            if k <= len(bands.gap_open):
                gap_flag = "open" if bands.is_gap_open(k) else "closed"
        rows.append([j, e, gap_flag])
    path = os.path.join(cfg.out_dir, "bands.csv")
    _write_csv(path, cfg, seed, ["edge_index", "energy", "gap_after"], rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_geometry(cfg: RunConfig, seed: int, energy: float | None = None) -> int:
    bands = _band_structure(cfg)
    E = energy if energy is not None else _best_energy(cfg, bands)
    if E is None:
        # report the first candidate's failed flags; analysis, not failure
        candidates = _energy_candidates(cfg, bands)
        if not candidates:
            print("window conditions unsatisfied on the whole energy grid",
                  file=sys.stderr)
            return EXIT_ASSUMPTION
        E = candidates[0]
    report = geometry_mod.analyze_window(cfg.potential_w, bands, E, cfg.n, cfg.m)
    payload: dict = {"window_report": report.to_dict()}
    written = []
    if report.all_ok:
        geom = geometry_mod.branch_points(cfg.potential_w, bands, report,
                                          V=cfg.potential_v)
        payload["geometry"] = geom.to_dict()
        if "csv" in cfg.formats:
            for label in geom.band_labels:
                branch = geometry_mod.real_branch(geom, label)
                name = str(label).replace("+", "p").replace("-", "m")
                path = os.path.join(cfg.out_dir, f"branch_{name}.csv")
                rows = [[k, zv] for k, zv in branch.table()]
                _write_csv(path, cfg, seed, ["kappa", "zeta"], rows)
                written.append(path)
    out = os.path.join(cfg.out_dir, "geometry.json")
    _write_json(out, cfg, seed, payload)
    written.append(out)
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_actions(cfg: RunConfig, seed: int) -> int:
    bands = _band_structure(cfg)
    admissible = []
    for E in _energy_candidates(cfg, bands):
        rep = geometry_mod.analyze_window(cfg.potential_w, bands, E, cfg.n, cfg.m)
        if rep.all_ok:
            admissible.append((E, rep))
    if not admissible:
        print("no admissible energy in the grid", file=sys.stderr)
        return EXIT_ASSUMPTION
    rows = []
    for E, rep in sorted(admissible):
        geom = geometry_mod.branch_points(cfg.potential_w, bands, rep,
                                          V=cfg.potential_v)
        aset = actions_mod.compute_actions(cfg.potential_v, cfg.potential_w,
                                           bands, geom, tol=cfg.tol_quad)
        asym = actions_mod.lyapunov_asymptotic(aset, cfg.epsilons[0])
        logT_cols = {eps: actions_mod.total_T(aset, eps)[1]
                     for eps in cfg.epsilons}
        for label, s_val, _err in aset.entries:
            row = [E, str(label), s_val]
            for eps in cfg.epsilons:
                row.append(actions_mod.tunneling_coefficient(s_val, eps).value)
            for eps in cfg.epsilons:
                row.append(logT_cols[eps])
            row.append(asym.theta_asym)
            rows.append(row)
    header = ["E", "gap_label", "S"]
    header += [f"t_eps_{_fmt(e)}" for e in cfg.epsilons]
    header += [f"logT_eps_{_fmt(e)}" for e in cfg.epsilons]
    header += ["theta_asym"]
    path = os.path.join(cfg.out_dir, "actions.csv")
    _write_csv(path, cfg, seed, header, rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_stokes(cfg: RunConfig, seed: int) -> int:
    bands = _band_structure(cfg)
    E = _best_energy(cfg, bands)
    if E is None:
        print("no admissible energy for the line tracer", file=sys.stderr)
        return EXIT_ASSUMPTION
    family = cfg.stokes.get("family", "kappa")
    direction = int(cfg.stokes.get("direction", "1"))
    max_length = float(cfg.stokes.get("max_length", "1.0"))
    starts: list[complex] = []
    for line in cfg.stokes.get("starts", "").splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise ConfigError("stokes.starts lines need: re_zeta im_zeta")
        starts.append(complex(float(parts[0]), float(parts[1])))
    if not starts:
        # default: just below each branch point on the left half-period
        rep = geometry_mod.analyze_window(cfg.potential_w, bands, E, cfg.n, cfg.m)
        geom = geometry_mod.branch_points(cfg.potential_w, bands, rep,
                                          V=cfg.potential_v)
        starts = [complex(zv, -0.02) for j, s, zv in geom.branch_zetas
                  if s == "-"]
    rows = []
    traces = []
    for idx, start in enumerate(starts):
        line = geometry_mod.trace_stokes_line(
            cfg.potential_v, cfg.potential_w, bands, E, start,
            family=family, direction=direction, max_length=max_length,
        )
        traces.append({
            "trace": idx,
            "start": [start.real, start.imag],
            "reason": line.reason,
            "length": line.length,
            "level_drift": line.level_drift(),
        })
        for i, (p, k) in enumerate(zip(line.points, line.kappa)):
            rows.append([idx, i, p.real, p.imag, k.real, k.imag])
    path = os.path.join(cfg.out_dir, "stokes.csv")
    _write_csv(path, cfg, seed, ["trace", "node", "re_zeta", "im_zeta",
                                 "re_kappa", "im_kappa"], rows)
    out = os.path.join(cfg.out_dir, "stokes.json")
    _write_json(out, cfg, seed, {"energy": E, "family": family,
                                 "direction": direction, "traces": traces})
    print(f"wrote {path}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_cocycle(cfg: RunConfig, seed: int) -> int:
    if not cfg.model:
        raise ConfigError("missing [model] section for the cocycle command")
    kind = cfg.model.get("kind", "model")
    h = cocycle_mod.frequency_from_epsilon(cfg.epsilons[0])
    if kind == "model":
        coeffs = [complex(cfg.model.get(k, "0")) for k in ("a0", "a1", "b0", "b1")]
        family = cocycle_mod.model_matrix(*coeffs)
        params = {k: [c.real, c.imag] for k, c in zip(("a0", "a1", "b0", "b1"),
                                                      coeffs)}
    elif kind == "herman":
        lam = complex(cfg.model.get("lam", "2"))
        n0 = int(cfg.model.get("n0", "1"))
        alpha = complex(cfg.model.get("alpha", "0.5"))
        beta = complex(cfg.model.get("beta", "0"))
        m_amp = float(cfg.model.get("m_amp", "0"))
        family = cocycle_mod.herman_family(lam, n0, alpha, beta, m_amp,
                                           cfg.epsilons[0], seed=seed)
        params = {"lam": [lam.real, lam.imag], "n0": n0,
                  "alpha": [alpha.real, alpha.imag],
                  "beta": [beta.real, beta.imag], "m_amp": m_amp}
    else:
        raise ConfigError(f"model.kind must be model|herman, got {kind!r}")
    spec = cocycle_mod.CocycleSpec(
        family=family, h=h, z0=cfg.z, N=cfg.iterations,
        renorm_stride=cfg.renorm_stride,
        z_samples=cocycle_mod.default_z_samples(cfg.z_samples),
    )
    est = cocycle_mod.cocycle_lyapunov(spec)
    include_blocks = cfg.model.get("store_blocks", "no") == "yes"
    payload = {
        "kind": kind,
        "parameters": params,
        "h": h,
        "theta": est.value,
        "Theta": cocycle_mod.theta_to_Theta(est.value, cfg.epsilons[0]),
        "standard_error": est.standard_error,
        "N": est.N_used,
        "z_samples": list(est.z_samples),
    }
    if include_blocks:
        payload["block_log_norms"] = [float(v) for v in est.per_block]
    out = os.path.join(cfg.out_dir, "cocycle.json")
    _write_json(out, cfg, seed, payload)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, seed: int, threads: int = 1) -> int:
    bands = _band_structure(cfg)
    E = _best_energy(cfg, bands)
    if E is None:
        print("window conditions unsatisfied on the whole energy grid",
              file=sys.stderr)
        return EXIT_ASSUMPTION
    rep = geometry_mod.analyze_window(cfg.potential_w, bands, E, cfg.n, cfg.m)
    geom = geometry_mod.branch_points(cfg.potential_w, bands, rep,
                                      V=cfg.potential_v)
    aset = actions_mod.compute_actions(cfg.potential_v, cfg.potential_w,
                                       bands, geom, tol=cfg.tol_quad)
    theta_asym = actions_mod.lyapunov_asymptotic(aset, cfg.epsilons[0]).theta_asym
    eps_order = sorted(cfg.epsilons, reverse=True)

    def run_cell(eps: float):
        L = cfg.periods * 2.0 * math.pi / eps
        est = cocycle_mod.direct_lyapunov(cfg.potential_v, cfg.potential_w,
                                          eps, E, z=cfg.z, L=L,
                                          tol=cfg.tol_ode)
        return est.value, est.standard_error

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_cell, eps_order))
    else:
        results = [run_cell(eps) for eps in eps_order]

    rows = []
    rel_errors = []
    positives = []
    for eps, (theta_num, se) in zip(eps_order, results):
        rel = abs(theta_num - theta_asym) / abs(theta_asym)
        rel_errors.append(rel)
        positives.append(theta_num > 0)
        rows.append([E, eps, theta_asym, theta_num, rel, se])
    if len(rel_errors) >= 2:
        trend_ok = all(b <= a * (1 + 1e-12)
                       for a, b in zip(rel_errors, rel_errors[1:]))
        trend = "non-increasing" if trend_ok else "increasing"
    else:
        trend_ok = True
        trend = "insufficient points"
    final_ok = rel_errors[-1] <= 0.20
    verdict = "PASS" if (all(positives) and trend_ok and final_ok) else "FAIL"
    path = os.path.join(cfg.out_dir, "verify.csv")
    _write_csv(path, cfg, seed,
               ["E", "epsilon", "theta_asym", "theta_num", "rel_error",
                "standard_error"], rows)
    payload = {
        "energy": E,
        "theta_asym": theta_asym,
        "actions": aset.to_dict(),
        "cells": [
            {"epsilon": eps, "theta_num": tn, "rel_error": re_,
             "standard_error": se}
            for eps, (tn, se), re_ in zip(eps_order, results, rel_errors)
        ],
        "trend": trend,
        "all_positive": all(positives),
        "final_rel_error": rel_errors[-1],
        "verdict": verdict,
    }
    out = os.path.join(cfg.out_dir, "verify.json")
    _write_json(out, cfg, seed, payload)
    print(f"wrote {path}")
    print(f"wrote {out}")
    print(verdict)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiaspec",
        description="Spectral geometry and Lyapunov exponents of "
                    "adiabatically modulated periodic operators",
    )
    parser.add_argument("command",
                        choices=["bands", "geometry", "actions", "stokes",
                                 "cocycle", "verify"])
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None,
                        help="seed override (recorded in outputs)")
    parser.add_argument("--format", choices=["csv", "json"], default=None,
                        help="restrict output formats")
    parser.add_argument("--energy", type=float, default=None,
                        help="energy override for the geometry command")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg = _replace_out(cfg, args.out)
        if args.format is not None:
            cfg = _replace_formats(cfg, (args.format,))
        seed = args.seed if args.seed is not None else cfg.seed
        os.makedirs(cfg.out_dir, exist_ok=True)
        if args.command == "bands":
            return cmd_bands(cfg, seed)
        if args.command == "geometry":
            return cmd_geometry(cfg, seed, energy=args.energy)
        if args.command == "actions":
            return cmd_actions(cfg, seed)
        if args.command == "stokes":
            return cmd_stokes(cfg, seed)
        if args.command == "cocycle":
            return cmd_cocycle(cfg, seed)
        if args.command == "verify":
            return cmd_verify(cfg, seed, threads=max(1, args.threads))
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AdiaspecError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _replace_out(cfg: RunConfig, out_dir: str) -> RunConfig:
    resolved = dict(cfg.resolved)
    resolved["output"] = dict(resolved["output"], directory=out_dir)
    return _dataclass_replace(cfg, out_dir=out_dir, resolved=resolved)


def _replace_formats(cfg: RunConfig, formats: tuple[str, ...]) -> RunConfig:
    resolved = dict(cfg.resolved)
    resolved["output"] = dict(resolved["output"], formats=list(formats))
    return _dataclass_replace(cfg, formats=formats, resolved=resolved)


def _dataclass_replace(cfg: RunConfig, **changes) -> RunConfig:
    from dataclasses import replace

    return replace(cfg, **changes)


if __name__ == "__main__":
    sys.exit(main())
