"""Command-line interface and pipeline orchestration.

Pipeline: eigenstates -> initial state -> pump -> delay scan -> probe
windows -> harmonic inversion, with every CSV stamped by the config hash.
Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import grid as gridmod
from . import probe as probemod
from . import spectral as spectralmod
from . import states as statesmod
from .config import ConfigError, RunConfig, load_config
from .dynamics import PropagatorConfig, save_state
from .grid import ConvergenceError, GridError, GridHamiltonian
from .probe import DelayGridError, WindowError
from .pulses import ChirpNotImplementedError, PulseConfigError
from .spectral import InversionError
from .states import ScatteringError
from .units import HARTREE_TO_CM1, Quantity, UnitError, convert, from_au

NUMERICAL_ERRORS = (ConvergenceError, InversionError, WindowError,
                    ScatteringError, DelayGridError, GridError,
                    ChirpNotImplementedError, ValueError, RuntimeError)


def write_csv(path, header, rows, config_hash):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_transient_csv(path):
    delays, totals = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("delay_ps"):
                continue
            parts = line.strip().split(",")
            if len(parts) >= 2:
                delays.append(float(parts[0]))
                totals.append(float(parts[1]))
    return np.asarray(delays), np.asarray(totals)


def _initial_state(cfg: RunConfig, hams, threads):
    init = cfg.data["initial"]
    if init["kind"] == "pure":
        hams_g = {m: hams[m][0] for m in hams}
        energies, state = statesmod.initial_pure_state(
            hams_g, init["energy_uk"], weights=cfg.manifold_weights())
        return state, {"collision_energies_hartree": energies}
    channels = {m: cfg.channels()[m] for m in cfg.manifolds()}
    ens = statesmod.build_ensemble(
        channels, cfg.grid(),
        temperature_uk=init["temperature_uk"],
        e_cutoff_uk=init["e_cutoff_kt"] * init["temperature_uk"],
        j_max=init["j_max"], even_j_only=init["even_j_only"],
        channel_weights=cfg.manifold_weights(), threads=threads)
    return ens, {"ensemble_members": len(ens.members)}


def _windows(cfg: RunConfig):
    chans = cfg.channels()
    probe_pulse = cfg.probe_pulse()
    dipole = cfg.dipole()
    grid = cfg.grid()
    return {m: probemod.build_window(probe_pulse, chans[m],
                                     chans[f"{m}_excited"], dipole, grid)
            for m in cfg.manifolds()}


def _bound_table(cfg: RunConfig, hams):
    """Bound energies of every ground-channel Hamiltonian (for line tags)."""
    energies = []
    for m in sorted(hams):
        w_b, _ = gridmod._bound_set(hams[m][0])
        energies.extend(float(x) for x in w_b)
    return sorted(energies)


def run_pipeline(cfg: RunConfig, threads: int = 1, output_dir=None):
    """Execute the full pump-probe workflow; returns the artifact index."""
    out_dir = output_dir or cfg.data["run"]["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    chash = cfg.config_hash
    prop = PropagatorConfig(dt_pulse_ps=cfg.data["propagation"]["dt_pulse_ps"])

    hams = cfg.hamiltonians()
    windows = _windows(cfg)
    dipole = cfg.dipole()
    initial, meta = _initial_state(cfg, hams, threads)
    delays = cfg.delays_ps()

    factors = list(cfg.data.get("scan", {}).get("field_factors", []) or [1.0])
    pump0 = cfg.pump_pulse()

    def one_point(factor):
        from dataclasses import replace
        pump_pulse = replace(pump0, peak_field_au=pump0.peak_field * factor,
                             energy_nj=None, spot_um=None)
        return probemod.transient_signal(
            initial, pump_pulse, windows, hams, dipole, delays,
            config=prop, threads=1 if len(factors) > 1 else threads,
            provenance={"config_hash": chash, "field_factor": factor})

    if len(factors) > 1 and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            signals = list(pool.map(one_point, factors))
    else:
        signals = [one_point(f) for f in factors]

    bound = _bound_table(cfg, hams)
    artifacts = {"output_dir": out_dir, "config_hash": chash,
                 "signals": signals, "meta": meta, "files": []}

    band = tuple(cfg.data["spectral"]["band_cm1"])
    max_lines = cfg.data["spectral"]["max_lines"]
    summary_lines = [f"config_hash: {chash}"]
    summary_lines += [f"{k}: {v}" for k, v in sorted(meta.items())]

    for idx, sig in enumerate(signals):
        tag = "" if len(factors) == 1 else f"_{idx:02d}"
        norm = sig.total / sig.baseline_total
        rows = []
        for i, d in enumerate(sig.delays_ps):
            row = [repr(float(d)), repr(float(norm[i]))]
            for m in ("triplet", "singlet"):
                if m in sig.per_manifold:
                    val = (sig.per_manifold[m][i]
                           * _weight(cfg, m) / sig.baseline_total)
                else:
                    val = 0.0
                row.append(repr(float(val)))
            rows.append(row)
        tr_path = os.path.join(out_dir, f"transient{tag}.csv")
        write_csv(tr_path, ["delay_ps", "S_total", "S_triplet", "S_singlet"],
                  rows, chash)
        artifacts["files"].append(tr_path)

        lines, diag = spectralmod.harmonic_inversion(
            (sig.delays_ps, norm), band_cm1=band, max_lines=max_lines)
        tagged = spectralmod.match_lines_to_levels(lines, bound)
        ln_path = os.path.join(out_dir, f"lines{tag}.csv")
        write_csv(ln_path,
                  ["freq_cm1", "amplitude", "decay_cm1", "confidence"],
                  [[repr(li.frequency_cm1), repr(li.amplitude),
                    repr(li.decay_cm1), repr(li.confidence)]
                   for li in lines], chash)
        artifacts["files"].append(ln_path)

        bleach = float(norm[0])
        i_rec = int(np.argmax(norm))
        summary_lines.append("")
        summary_lines.append(
            f"run{tag or '_00'}: field_factor={factors[idx]}")
        summary_lines.append(f"  bleach S(0+)/baseline = {bleach:.4f}")
        summary_lines.append(
            f"  recovery max at {sig.delays_ps[i_rec]:.1f} ps "
            f"(S/baseline = {norm[i_rec]:.4f})")
        summary_lines.append(
            f"  inversion residual = {diag['residual']:.3e}")
        summary_lines.append("  lines (freq_cm1, amp, conf, match):")
        for li, tag_name, cand, mism in tagged:
            match = (f"{tag_name} @ {cand:.4f} (d={mism:.4f})"
                     if tag_name else "unmatched")
            summary_lines.append(
                f"    {li.frequency_cm1:9.5f}  {li.amplitude:.3e}  "
                f"{li.confidence:.3f}  {match}")

    if cfg.data["map"]["enabled"]:
        artifacts["files"].append(_amplitude_map(cfg, initial, hams, dipole,
                                                 out_dir, chash))

    every = cfg.data["run"]["checkpoint_every_ps"]
    if every > 0 and not isinstance(initial, statesmod.ThermalEnsemble):
        _write_checkpoints(cfg, initial, hams, dipole, delays, every,
                           out_dir, prop)

    summary_path = os.path.join(out_dir, "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write("\n".join(summary_lines) + "\n")
    artifacts["files"].append(summary_path)
    return artifacts


def _weight(cfg, manifold):
    return cfg.manifold_weights().get(manifold, 0.0)


def _amplitude_map(cfg, initial, hams, dipole, out_dir, chash):
    from .states import ThermalEnsemble
    mcfg = cfg.data["map"]
    manifold = mcfg["manifold"]
    if isinstance(initial, ThermalEnsemble):
        state = initial.members[0].state
    else:
        state = initial
    chans = cfg.channels()
    entries = probemod.amplitude_map(
        state, manifold, chans[manifold], chans[f"{manifold}_excited"],
        dipole, cfg.probe_pulse(), mcfg["detunings_cm1"])
    path = os.path.join(out_dir, "amplitude_map.csv")
    rows = [[repr(e.r_star), repr(e.density_estimate), repr(e.detuning_cm1)]
            for e in entries if e.ok]
    write_csv(path, ["r_bohr", "density_estimate", "omega_p_cm1"], rows, chash)
    return path


def _write_checkpoints(cfg, state, hams, dipole, delays, every_ps, out_dir,
                       prop):
    from .dynamics import propagate_free, pump as pump_op
    pump_pulse = cfg.pump_pulse()
    post = pump_op(state, pump_pulse, hams, dipole, prop)
    hams_g = {m: hams[m][0] for m in hams}
    post = propagate_free(post, hams_g,
                          pump_pulse.t_center_ps - pump_pulse.window()[1],
                          prop)
    t = 0.0
    k = 0
    while t <= delays[-1] + 1e-9:
        save_state(os.path.join(out_dir, f"state_{int(round(t)):06d}ps.ckpt"),
                   post)
        t += every_ps
        k += 1
        if t <= delays[-1] + 1e-9:
            post = propagate_free(post, hams_g, every_ps, prop)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_convert_units(args):
    q = Quantity(args.value, args.source)
    print(repr(convert(q, args.target).value))
    return 0


def _cmd_eigen(args):
    cfg = load_config(args.config)
    grid = cfg.grid()
    chans = cfg.channels()
    if args.channel not in chans:
        raise ConfigError(f"unknown channel {args.channel!r}")
    from .potentials import evaluate
    h = GridHamiltonian(grid, evaluate(chans[args.channel], grid, args.j),
                        j=args.j)
    if args.count:
        pairs = gridmod.eigensolve(h, args.count)
    else:
        w_b, states_b = gridmod._bound_set(h)
        pairs = [(float(w_b[i]), states_b[i] / np.sqrt(grid.dr))
                 for i in range(len(w_b))]
    out = args.output or cfg.data["run"]["output_dir"]
    gridmod.save_eigenpairs(out, grid, pairs)
    print(f"{len(pairs)} eigenpairs -> {out}")
    return 0


def _cmd_resonances(args):
    cfg = load_config(args.config)
    chans = cfg.channels()
    j_list = [int(x) for x in args.j_list.split(",")]
    table = statesmod.find_resonances(chans[args.channel], j_list,
                                      (args.e_min, args.e_max),
                                      points=args.points)
    out = args.output or os.path.join(cfg.data["run"]["output_dir"],
                                      "resonances.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_csv(out, ["channel", "J", "E_res_uK", "width_uK"],
              [[r.channel, r.j, repr(r.e_res_uk), repr(r.width_uk)]
               for r in table], cfg.config_hash)
    print(f"{len(table)} resonances -> {out}")
    return 0


def _cmd_ensemble(args):
    cfg = load_config(args.config)
    init = cfg.data["initial"]
    channels = {m: cfg.channels()[m] for m in cfg.manifolds()}
    ens = statesmod.build_ensemble(
        channels, cfg.grid(), temperature_uk=init["temperature_uk"],
        e_cutoff_uk=init["e_cutoff_kt"] * init["temperature_uk"],
        j_max=init["j_max"], even_j_only=init["even_j_only"],
        channel_weights=cfg.manifold_weights(), threads=args.threads)
    out = args.output or os.path.join(cfg.data["run"]["output_dir"],
                                      "ensemble.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_csv(out, ["manifold", "J", "E_uK", "weight"],
              [[m.manifold, m.j, repr(from_au(m.energy, "uK")),
                repr(m.weight)] for m in ens.members], cfg.config_hash)
    print(f"{len(ens.members)} members -> {out}")
    return 0


def _cmd_pump_probe(args):
    overrides = {}
    if args.checkpoint_every:
        overrides = {"run": {"checkpoint_every_ps": args.checkpoint_every}}
    cfg = load_config(args.config, overrides=overrides)
    artifacts = run_pipeline(cfg, threads=args.threads,
                             output_dir=args.output)
    for path in artifacts["files"]:
        print(path)
    return 0


def _cmd_spectrum(args):
    cfg = load_config(args.config)
    delays, totals = read_transient_csv(args.input)
    lines, diag = spectralmod.harmonic_inversion(
        (delays, totals), band_cm1=tuple(cfg.data["spectral"]["band_cm1"]),
        max_lines=cfg.data["spectral"]["max_lines"])
    out = args.output or os.path.join(cfg.data["run"]["output_dir"],
                                      "lines.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_csv(out, ["freq_cm1", "amplitude", "decay_cm1", "confidence"],
              [[repr(li.frequency_cm1), repr(li.amplitude),
                repr(li.decay_cm1), repr(li.confidence)] for li in lines],
              cfg.config_hash)
    print(f"{len(lines)} lines -> {out} (residual {diag['residual']:.2e})")
    return 0


def _cmd_map(args):
    cfg = load_config(args.config, overrides={"map": {"enabled": True}})
    threads = args.threads
    hams = cfg.hamiltonians()
    dipole = cfg.dipole()
    initial, _ = _initial_state(cfg, hams, threads)
    out_dir = args.output or cfg.data["run"]["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    path = _amplitude_map(cfg, initial, hams, dipole, out_dir,
                          cfg.config_hash)
    print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pairprobe",
        description="Pump-probe simulator for ultracold pair-correlation "
                    "dynamics")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="TOML run config")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--output", default=None)

    p = sub.add_parser("convert-units", help="convert a quantity")
    p.add_argument("value", type=float)
    p.add_argument("source")
    p.add_argument("target")
    p.set_defaults(func=_cmd_convert_units)

    p = sub.add_parser("eigen", help="dump eigenpairs of a ground channel")
    add_common(p)
    p.add_argument("--channel", default="triplet")
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--count", type=int, default=0,
                   help="0 = all bound levels")
    p.set_defaults(func=_cmd_eigen)

    p = sub.add_parser("resonances", help="scan for shape resonances")
    add_common(p)
    p.add_argument("--channel", default="triplet")
    p.add_argument("--j-list", default="0,2,4,6,8")
    p.add_argument("--e-min", type=float, default=40.0, help="uK")
    p.add_argument("--e-max", type=float, default=800.0, help="uK")
    p.add_argument("--points", type=int, default=160)
    p.set_defaults(func=_cmd_resonances)

    p = sub.add_parser("ensemble", help="emit thermal ensemble members")
    add_common(p)
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("pump-probe", help="full transient-absorption run")
    add_common(p)
    p.add_argument("--checkpoint-every", type=float, default=0.0,
                   metavar="PS")
    p.set_defaults(func=_cmd_pump_probe)

    p = sub.add_parser("spectrum", help="harmonic inversion of a transient CSV")
    add_common(p)
    p.add_argument("--input", required=True)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("map", help="amplitude map via frequency-scanned probe")
    add_common(p)
    p.set_defaults(func=_cmd_map)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PulseConfigError, UnitError, FileNotFoundError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as err:
        print(f"numerical failure ({type(err).__name__}): {err}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
