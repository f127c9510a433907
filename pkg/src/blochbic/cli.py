"""Command-line driver: figure-level experiments with reproducible output.

Every subcommand reads a JSON config (or a bundled preset), writes CSV data
files with 12-significant-digit scientific formatting in a fixed row order,
and drops a ``manifest.json`` beside them with the exact config, its hash,
library versions, and timings — enough to re-run any output byte-for-byte.

Subcommands
-----------
potential   potential values on an (x, z) grid
bands       asymptotic band edges (K, nu, E)
eigens      reaction-region spectra, L sweep, classification, wavefunctions
smatrix     reflection/transmission amplitudes over an energy grid
bic-scan    bound-state determinant scans, roots, and the E(K) line
poles       quasibound poles and lifetime-scaling fits versus asymmetry
validate    oracle battery; nonzero exit if any check fails

Exit codes: 0 success, 1 usage/config problems, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bloch import BlochChannel, RegionConfig, band_structure, enumerate_modes
from .continuum import bic_line, det_hbd, find_poles, lifetime_scaling, scan_bics
from .errors import DomainError, EigensolverError, SingularMatrixError, TrackingError
from .potential import LatticeConfig, potential_value
from .reaction import classify_states, solve_channel, wavefunction_grid
from .scattering import reflection_coefficients, s_matrix
from .validation import validate_all

USAGE_EXIT = 1
NUMERICAL_EXIT = 2


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex):
        return f"{x.real:.11e}{x.imag:+.11e}j"
    return f"{float(x):.11e}"


def write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


@dataclasses.dataclass
class RunConfig:
    """Everything a run needs; serializes losslessly to/from JSON."""

    lattice: LatticeConfig = dataclasses.field(default_factory=LatticeConfig)
    region: RegionConfig = dataclasses.field(default_factory=RegionConfig)
    channels: list = dataclasses.field(default_factory=lambda: [0])
    momentum: float | None = None  # overrides channel index when set
    mode_cutoff: int = 2
    energy_grid: dict = dataclasses.field(
        default_factory=lambda: {"start": 0.1, "stop": 4.8, "points": 200}
    )
    energy_window: list = dataclasses.field(default_factory=lambda: [0.0, 0.5 * math.pi**2])
    L_sweep: dict = dataclasses.field(
        default_factory=lambda: {"start": 2.5, "stop": 5.0, "step": 0.25}
    )
    beta_values: list = dataclasses.field(default_factory=lambda: [0.005, 0.01, 0.02, 0.04, 0.08])
    pole_region: dict = dataclasses.field(
        default_factory=lambda: {"re_min": 0.05, "re_max": 4.88, "im_min": -0.5, "im_max": -1e-7}
    )
    state_filter: str | list = "all"
    amplitude: list = dataclasses.field(default_factory=lambda: ["B", "B", 0, 0])
    track_energies: list = dataclasses.field(default_factory=lambda: [0.656436, 4.69882])
    grid: dict = dataclasses.field(default_factory=lambda: {"nx": 100, "nz": 60, "cells": 5})
    momenta: dict = dataclasses.field(
        default_factory=lambda: {"start": 0.15, "stop": 0.5 * math.pi, "points": 24}
    )
    bic_range: list = dataclasses.field(default_factory=lambda: [-30.0, None])

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        lat = LatticeConfig(**data.pop("lattice", {}))
        reg = RegionConfig(**data.pop("region", {}))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(lattice=lat, region=reg, **data)
        if isinstance(cfg.state_filter, list):
            cfg.state_filter = tuple(cfg.state_filter)
        return cfg

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if isinstance(out["state_filter"], tuple):
            out["state_filter"] = list(out["state_filter"])
        return out

    def channel(self) -> BlochChannel:
        if self.momentum is not None:
            return BlochChannel.from_momentum(self.momentum, self.lattice.half_cell)
        cells = max(self.region.cell_count, max(self.channels) + 1)
        return BlochChannel.from_index(self.channels[0], cells, self.lattice.half_cell)


PRESETS: dict[str, dict] = {
    # numbered after the data plots they reproduce
    "fig1": {"command": "potential"},
    "fig2": {"command": "bands"},
    "fig3": {"command": "eigens"},
    "fig4": {"command": "eigens", "config": {"L_sweep": {"start": 2.5, "stop": 4.0, "step": 0.5}}},
    "fig5": {
        "command": "eigens",
        "config": {
            "region": {"half_width": 5.0, "transverse_cutoff": 66},
            "L_sweep": {"start": 4.0, "stop": 6.0, "step": 0.5},
        },
    },
    "fig6": {
        "command": "bic-scan",
        "config": {"momenta": {"values": [math.pi / 3, 2 * math.pi / 5]}},
    },
    "fig7": {
        "command": "bic-scan",
        "config": {"momenta": {"values": [math.pi / 3, 2 * math.pi / 5]}},
    },
    "fig8": {
        "command": "poles",
        "config": {"beta_values": [0.01]},
    },
    "fig9": {"command": "poles"},
    "fig10": {
        "command": "eigens",
        "config": {"energy_window": [0.5 * math.pi**2, 2 * math.pi**2]},
    },
    "fig11": {
        "command": "smatrix",
        "config": {
            "energy_grid": {"start": 0.5 * math.pi**2 + 0.05, "stop": 2 * math.pi**2 - 0.05, "points": 400},
            "state_filter": "localized",
        },
    },
    "fig12": {
        "command": "poles",
        "config": {
            "beta_values": [0.0, 0.04],
            "pole_region": {
                "re_min": 0.5 * math.pi**2 + 0.1,
                "re_max": 2 * math.pi**2 - 0.1,
                "im_min": -0.5,
                "im_max": -1e-7,
            },
            "state_filter": "localized",
            "amplitude": ["B", "B", -1, -1],
            "mode_cutoff": 2,
            "energy_window": [0.5 * math.pi**2, 2 * math.pi**2],
            "track_energies": [9.9707, 10.1369, 16.6538, 16.7215],
        },
    },
}


def _resolve_preset(name: str) -> dict:
    key = name.strip().lower()
    if key.startswith("paper-"):
        key = key[len("paper-") :]
    if key not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return PRESETS[key]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; keep 1 for usage
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(USAGE_EXIT)


def _manifest(out_dir: Path, command: str, cfg: RunConfig, outputs, timings, extra=None):
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": __import__("scipy").__version__,
        "timings_seconds": timings,
        "outputs": sorted(outputs),
    }
    if extra:
        manifest["results"] = extra
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def _parallel_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_potential(cfg: RunConfig, out: Path, threads: int):
    g = cfg.grid
    a, L = cfg.lattice.half_cell, cfg.region.half_width
    xs = np.linspace(-g["cells"] * a, g["cells"] * a, g["nx"])
    zs = np.linspace(-L, L, g["nz"])
    rows = []
    for x in xs:
        vals = potential_value(cfg.lattice, np.full_like(zs, x), zs)
        for z, v in zip(zs, vals):
            rows.append((x, z, v))
    write_csv(out / "potential.csv", ["x", "z", "V"], rows)
    return ["potential.csv"], {"min_V": float(min(r[2] for r in rows))}


def cmd_bands(cfg: RunConfig, out: Path, threads: int):
    m = cfg.momenta
    if "values" in m:
        momenta = m["values"]
    else:
        momenta = np.linspace(m["start"], m["stop"], m["points"])
    nus = range(-cfg.mode_cutoff, cfg.mode_cutoff + 1)
    rows = band_structure(momenta, nus, cfg.lattice.half_cell)
    write_csv(out / "bands.csv", ["K", "nu", "E"], rows)
    return ["bands.csv"], {}


def cmd_eigens(cfg: RunConfig, out: Path, threads: int):
    channel = cfg.channel()
    sweep_cfg = cfg.L_sweep
    L_grid = np.arange(sweep_cfg["start"], sweep_cfg["stop"] + 1e-12, sweep_cfg["step"])
    tags, sweep = classify_states(
        cfg.lattice, cfg.region, channel, L_grid, tuple(cfg.energy_window)
    )
    rows = [(channel.index if channel.index is not None else -1, t.index, t.energy, int(t.localized), t.parity) for t in tags]
    write_csv(out / "states.csv", ["channel", "state", "energy", "localized", "parity"], rows)
    sweep_rows = []
    for L in sorted(sweep):
        for e in sweep[L]:
            sweep_rows.append((L, e))
    write_csv(out / "l_sweep.csv", ["L", "energy"], sweep_rows)

    basis = solve_channel(cfg.lattice, cfg.region, channel)
    outputs = ["states.csv", "l_sweep.csv"]
    a, L = cfg.lattice.half_cell, cfg.region.half_width
    xs = np.linspace(-a, a, cfg.grid["nx"])
    zs = np.linspace(-L, L, cfg.grid["nz"])
    for t in tags:
        if not t.localized:
            continue
        psi = wavefunction_grid(basis, t.index, xs, zs)
        rows = []
        for i, x in enumerate(xs):
            for j, z in enumerate(zs):
                val = psi[i, j]
                rows.append((x, z, abs(val), val.real, val.imag))
        name = f"state_{t.index:04d}.csv"
        write_csv(out / name, ["x", "z", "abs_psi", "re_psi", "im_psi"], rows)
        outputs.append(name)
    loc = [(t.energy, t.parity) for t in tags if t.localized]
    return outputs, {"localized": loc}


def cmd_smatrix(cfg: RunConfig, out: Path, threads: int):
    channel = cfg.channel()
    basis = solve_channel(cfg.lattice, cfg.region, channel)
    state_filter = cfg.state_filter
    if state_filter == "localized":
        sweep_cfg = cfg.L_sweep
        L_grid = np.arange(sweep_cfg["start"], sweep_cfg["stop"] + 1e-12, sweep_cfg["step"])
        tags, _ = classify_states(cfg.lattice, cfg.region, channel, L_grid, tuple(cfg.energy_window))
        mask = np.zeros(basis.eigenvalues.size, dtype=bool)
        for t in tags:
            if t.localized:
                mask[t.index] = True
        basis = basis.with_localized(mask)
    eg = cfg.energy_grid
    energies = np.linspace(eg["start"], eg["stop"], eg["points"])
    # nudge grid points off reaction-region eigenvalues
    lam = basis.eigenvalues
    energies = np.array(
        [e + 1e-6 if np.any(np.abs(lam - e) < 1e-9) else e for e in energies]
    )

    def one(E):
        blocks = s_matrix(basis, float(E), cfg.mode_cutoff, state_filter=state_filter)
        table = reflection_coefficients(blocks, side="bottom")
        return E, table

    results = _parallel_map(one, energies, threads)
    rows = []
    for E, table in results:
        for kind in ("R", "T"):
            for (out_label, in_label), amp in sorted(table[kind].items()):
                rows.append((E, kind, out_label, in_label, abs(amp), amp.real, amp.imag))
    write_csv(out / "amplitudes.csv", ["E", "kind", "out", "in", "abs", "re", "im"], rows)
    return ["amplitudes.csv"], {}


def cmd_bic_scan(cfg: RunConfig, out: Path, threads: int):
    m = cfg.momenta
    if "values" in m:
        momenta = [float(v) for v in m["values"]]
    else:
        momenta = list(np.linspace(m["start"], m["stop"], m["points"]))
    det_rows, root_rows = [], []
    roots_summary = {}
    for K in momenta:
        channel = BlochChannel.from_momentum(K, cfg.lattice.half_cell)
        basis = solve_channel(cfg.lattice, cfg.region, channel)
        top = 0.5 * K * K - 1e-6
        lo = cfg.bic_range[0]
        hi = cfg.bic_range[1] if cfg.bic_range[1] is not None else top
        energies = np.linspace(lo, min(hi, top), 800)
        for E in energies:
            try:
                det_rows.append((K, E, det_hbd(basis, float(E), cfg.state_filter)))
            except Exception:
                continue
        roots = scan_bics(basis, (lo, min(hi, top)), 2000, cfg.state_filter)
        roots_summary[f"{K:.6f}"] = [r for r, _ in roots]
        for r, res in roots:
            root_rows.append((K, r, res))
    write_csv(out / "det_scan.csv", ["K", "E", "det"], det_rows)
    write_csv(out / "bic_roots.csv", ["K", "E_root", "residual"], root_rows)
    line = bic_line(cfg.lattice, cfg.region, momenta, state_filter=cfg.state_filter)
    write_csv(out / "bic_line.csv", ["K", "E_BIC"], line)
    return ["det_scan.csv", "bic_roots.csv", "bic_line.csv"], {"roots": roots_summary}


def cmd_poles(cfg: RunConfig, out: Path, threads: int):
    channel = cfg.channel()
    pr = cfg.pole_region
    rect = (pr["re_min"], pr["re_max"], pr["im_min"], pr["im_max"])
    amplitude = tuple(cfg.amplitude)
    pole_rows = []
    results = {}
    for beta in cfg.beta_values:
        lat = dataclasses.replace(cfg.lattice, asymmetry=float(beta))
        basis = solve_channel(lat, cfg.region, channel)
        if cfg.state_filter == "localized":
            sweep_cfg = cfg.L_sweep
            L_grid = np.arange(sweep_cfg["start"], sweep_cfg["stop"] + 1e-12, sweep_cfg["step"])
            tags, _ = classify_states(lat, cfg.region, channel, L_grid, tuple(cfg.energy_window))
            mask = np.zeros(basis.eigenvalues.size, dtype=bool)
            for t in tags:
                if t.localized:
                    mask[t.index] = True
            basis = basis.with_localized(mask)
        poles = find_poles(
            basis, rect, amplitude=amplitude, mode_cutoff=cfg.mode_cutoff,
            state_filter=cfg.state_filter,
        )
        results[f"{beta:.6f}"] = [[p.energy.real, p.energy.imag] for p in poles]
        for p in poles:
            pole_rows.append((beta, p.energy.real, p.energy.imag, abs(p.residue)))
    write_csv(out / "poles.csv", ["beta", "re_E", "im_E", "abs_residue"], pole_rows)
    outputs = ["poles.csv"]
    extra = {"poles": results}

    if len(cfg.beta_values) >= 4 and min(cfg.beta_values) > 0:
        fits = lifetime_scaling(
            cfg.lattice, cfg.region, channel, cfg.beta_values, cfg.track_energies,
            mode_cutoff=1 if cfg.mode_cutoff < 1 else cfg.mode_cutoff,
            state_filter=cfg.state_filter,
        )
        fit_rows, width_rows = [], []
        for e0, fit in zip(cfg.track_energies, fits):
            fit_rows.append((e0, fit.prefactor, fit.exponent, fit.residual))
            for beta, w in zip(fit.beta_values, fit.widths):
                width_rows.append((e0, beta, w, w and 1.0 / w, w and 1.0 / (2 * w)))
        write_csv(out / "lifetime_fits.csv", ["state", "prefactor", "exponent", "residual"], fit_rows)
        write_csv(
            out / "widths.csv",
            ["state", "beta", "minus_im_E", "hbar_over_im", "hbar_over_2im"],
            width_rows,
        )
        outputs += ["lifetime_fits.csv", "widths.csv"]
        extra["fits"] = [
            {"state": e0, "prefactor": f.prefactor, "exponent": f.exponent, "lost": list(f.lost)}
            for e0, f in zip(cfg.track_energies, fits)
        ]
    return outputs, extra


def cmd_validate(cfg: RunConfig, out: Path, threads: int):
    rows = validate_all(cfg.lattice, cfg.region)
    table = [(name, measured, tol, "pass" if ok else "FAIL") for name, measured, tol, ok in rows]
    write_csv(out / "validation.csv", ["check", "measured", "tolerance", "status"], table)
    width = max(len(r[0]) for r in table)
    for name, measured, tol, status in table:
        print(f"{name:<{width}}  {measured:.3e}  (tol {tol:.0e})  {status}")
    if not all(ok for *_, ok in rows):
        raise ArithmeticError("validation checks failed")
    return ["validation.csv"], {"all_passed": True}


COMMANDS = {
    "potential": cmd_potential,
    "bands": cmd_bands,
    "eigens": cmd_eigens,
    "smatrix": cmd_smatrix,
    "bic-scan": cmd_bic_scan,
    "poles": cmd_poles,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = _Parser(prog="blochbic", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--preset", help="bundled figure preset (fig1..fig12)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        data = {}
        if args.preset:
            preset = _resolve_preset(args.preset)
            if preset["command"] != args.command:
                raise ValueError(
                    f"preset {args.preset!r} belongs to subcommand {preset['command']!r}"
                )
            data = dict(preset.get("config", {}))
        if args.config:
            file_data = json.loads(args.config.read_text())
            for key, val in file_data.items():
                if isinstance(val, dict) and isinstance(data.get(key), dict):
                    data[key] = {**data[key], **val}
                else:
                    data[key] = val
        cfg = RunConfig.from_dict(data)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT

    try:
        args.out.mkdir(parents=True, exist_ok=True)
        probe = args.out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"output directory not writable: {exc}", file=sys.stderr)
        return USAGE_EXIT

    t0 = time.perf_counter()
    try:
        outputs, extra = COMMANDS[args.command](cfg, args.out, args.threads)
    except (
        ArithmeticError,
        DomainError,
        EigensolverError,
        SingularMatrixError,
        TrackingError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    timings = {"total": time.perf_counter() - t0}
    _manifest(args.out, args.command, cfg, outputs, timings, extra)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
