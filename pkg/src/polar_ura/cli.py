"""Command-line entry point.

Every run reads an optional JSON config; command-line flags override it.
CSV outputs start with one ``#`` provenance line (tool version, config
digest, master seed) followed by a header row.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

from . import __version__
from .codebook import (
    CodebookConfig,
    DesignError,
    SnrRequirementTable,
    db,
    design_codebook,
    desk_snr_table,
    energy_per_bit,
    normal_approx_table,
    reference_snr_table,
    validate_config,
)
from .harness import (
    calibrate_required_snr,
    interference_comparison,
    pupe,
    required_ebn0,
    run_trials,
    summarize,
    sweep_ebn0,
)
from .mac import Trace
from .sic import ReceiverConfig, run_sic
from .spreading import gaussian_approx_distance, gaussian_masses, interference_pmf

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_RUNTIME = 0, 2, 3, 4


class ConfigError(Exception):
    pass


DEFAULTS = {
    "k_a": 25,
    "block_length": 28000,
    "payload_bits": 85,
    "crc_bits": 12,
    "preamble_bits": 15,
    "preamble_length": 2000,
    "preamble_power": None,
    "target_bler": 0.05,
    "seed": 0,
    "workers": 1,
    "out": ".",
    "slow": False,
    "design": {
        "snr_table": "desk",
        "lengths_per_level": [[7168, 7680, 8192]],
        "seed_users": "auto",
        "margin": 0.9,
        "power_ratio": 2.0,
    },
    "receiver": {"list_size": 32, "noise_model": "realized", "cleanup_passes": 0},
    "simulation": {"trials": 100, "mode": "fixed", "p_miss": 0.0, "power_scale": 1.0,
                   "power_scales": [1.0, 1.12, 1.26, 1.41, 1.58]},
    "calibration": {"lengths": [768, 1024, 2048], "list_size": 32, "trials": 2000,
                    "bracket_db": None},
    "interference": {"k": 50, "n_c": 4096, "n": 28000, "compare": False,
                     "counts": [0, 10, 25, 50], "sinr_db": [-13.9], "trials": 2000,
                     "list_size": 32},
}


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path, args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if path:
        try:
            cfg = _merge(cfg, json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    if args.out is not None:
        cfg["out"] = args.out
    if args.slow:
        cfg["slow"] = True
    if args.list_size is not None:
        for sec in ("receiver", "calibration", "interference"):
            cfg[sec]["list_size"] = args.list_size
    elif cfg["slow"]:
        for sec in ("receiver", "calibration", "interference"):
            cfg[sec]["list_size"] = 8192
    if args.trials is not None:
        for sec in ("simulation", "calibration", "interference"):
            cfg[sec]["trials"] = args.trials
    if args.mode is not None:
        cfg["simulation"]["mode"] = args.mode
    if args.p_miss is not None:
        cfg["simulation"]["p_miss"] = args.p_miss
    if args.k_a is not None:
        cfg["k_a"] = args.k_a
    return cfg


def config_digest(cfg: dict) -> str:
    """Digest of the effective config; execution-only keys are left out."""
    body = {k: v for k, v in cfg.items() if k not in ("workers", "out")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def write_csv(path: Path, cfg: dict, header, rows):
    buf = io.StringIO()
    buf.write(f"# polar_ura {__version__} config_sha256={config_digest(cfg)} seed={cfg['seed']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _f(x, nd=6):
    return f"{x:.{nd}f}"


def resolve_snr_table(spec, cfg) -> SnrRequirementTable:
    if isinstance(spec, dict):
        return SnrRequirementTable({int(k): v for k, v in spec.items()})
    if spec == "desk":
        return desk_snr_table()
    if spec == "reference":
        return reference_snr_table()
    if spec == "normal":
        lengths = sorted({n for lv in cfg["design"]["lengths_per_level"] for n in lv})
        return normal_approx_table(lengths, cfg["payload_bits"], cfg["target_bler"])
    try:
        return SnrRequirementTable.from_csv(Path(spec).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read SNR table {spec}: {e}") from e


def build_codebook(cfg: dict) -> CodebookConfig:
    """Codebook from an inline/linked document, else by running the designer."""
    cb = cfg.get("codebook")
    if isinstance(cb, str):
        try:
            return CodebookConfig.from_json(Path(cb).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read codebook {cb}: {e}") from e
    if isinstance(cb, dict):
        return CodebookConfig.from_dict(cb)
    d = cfg["design"]
    table = resolve_snr_table(d["snr_table"], cfg)
    kw = dict(
        block_length=cfg["block_length"], payload_bits=cfg["payload_bits"],
        crc_bits=cfg["crc_bits"], target_bler=cfg["target_bler"],
        power_ratio=d["power_ratio"], margin=d["margin"], preamble_bits=cfg["preamble_bits"],
        preamble_length=cfg["preamble_length"], preamble_power=cfg["preamble_power"],
    )
    k_a = cfg["k_a"]
    if d["seed_users"] != "auto":
        return design_codebook(k_a, table, d["lengths_per_level"], int(d["seed_users"]), **kw)
    best, err = None, None
    for k0 in range(1, k_a + 1):
        try:
            c = design_codebook(k_a, table, d["lengths_per_level"], k0, **kw)
        except DesignError as e:
            err = e
            continue
        if best is None or energy_per_bit(c)[0] < energy_per_bit(best)[0]:
            best = c
    if best is None:
        raise err
    return best


def receiver_from(cfg) -> ReceiverConfig:
    r = cfg["receiver"]
    return ReceiverConfig(int(r["list_size"]), r["noise_model"], int(r["cleanup_passes"]))


# --------------------------------------------------------------------------
# subcommands


def cmd_design(cfg, out: Path, args) -> int:
    try:
        codebook = build_codebook(cfg)
    except DesignError as e:
        print(f"infeasible design: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = validate_config(codebook)
    (out / "codebook.json").write_text(codebook.to_json(), encoding="utf-8")
    write_csv(out / "validation.csv", cfg,
              ["level", "length", "users", "sinr_db", "required_db", "slack", "ok"],
              [[r.level, r.length, r.users, _f(float(db(r.sinr)), 4),
                _f(float(db(r.required)), 4), _f(r.slack, 8), int(r.ok)] for r in report.classes])
    lin, dbv = energy_per_bit(codebook)
    print(f"classes={len(codebook.classes)} users={codebook.total_users} "
          f"P1={codebook.powers[0]:.6f} EbN0={dbv:.3f} dB")
    if not report.valid:
        for r in report.violations:
            print(f"class (level {r.level}, length {r.length}) violates the SINR inequality "
                  f"by {r.slack:.3g}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_calibrate(cfg, out: Path, args) -> int:
    c = cfg["calibration"]
    rows, table = [], {}
    for n in c["lengths"]:
        res = calibrate_required_snr(
            int(n), cfg["payload_bits"], cfg["crc_bits"], int(c["list_size"]), cfg["target_bler"],
            c.get("bracket_db"), int(c["trials"]), cfg["seed"], args.workers)
        table[int(n)] = res.required_snr_db
        for p in res.points:
            lo, hi = p.ci
            rows.append([p.length, _f(p.snr_db, 1), _f(p.bler), _f(lo), _f(hi), p.trials,
                         p.list_size])
        print(f"length {n}: required SNR {res.required_snr_db:.1f} dB", flush=True)
    write_csv(out / "calibration.csv", cfg,
              ["length", "snr_db", "bler", "ci_lo", "ci_hi", "trials", "L"], rows)
    t = SnrRequirementTable(table, cfg["payload_bits"], cfg["crc_bits"], int(c["list_size"]),
                            source=f"calibrated-L{c['list_size']}-T{c['trials']}")
    (out / "snr_table.csv").write_text(t.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_interference(cfg, out: Path, args) -> int:
    c = cfg["interference"]
    k, n_c, n = int(c["k"]), int(c["n_c"]), int(c["n"])
    pmf = interference_pmf(k, n_c, n)
    g = gaussian_masses(pmf)
    write_csv(out / "interference_pmf.csv", cfg, ["m", "pmf", "gaussian_mass"],
              [[int(m), f"{p:.12e}", f"{q:.12e}"] for m, p, q in zip(pmf.support, pmf.probabilities, g)])
    d = gaussian_approx_distance(pmf)
    write_csv(out / "distances.csv", cfg,
              ["k", "n_c", "n", "variance", "total_variation", "kolmogorov_smirnov"],
              [[k, n_c, n, _f(pmf.variance, 9), _f(d["total_variation"], 9),
                _f(d["kolmogorov_smirnov"], 9)]])
    print(f"K={k} variance={pmf.variance:.4f} TV={d['total_variation']:.5f} "
          f"KS={d['kolmogorov_smirnov']:.5f}")
    if c.get("compare") or args.compare:
        pts = interference_comparison(n_c, c["counts"], c["sinr_db"], int(c["trials"]),
                                      int(c["list_size"]), n, cfg["seed"], args.workers)
        write_csv(out / "comparison.csv", cfg, ["interferers", "sinr_db", "bler", "ci_lo", "ci_hi"],
                  [[p.interferers, _f(p.sinr_db, 2), _f(p.bler), _f(p.ci[0]), _f(p.ci[1])]
                   for p in pts])
    return EXIT_OK


def _sim_common(cfg):
    s = cfg["simulation"]
    return build_codebook(cfg), receiver_from(cfg), s


def cmd_simulate(cfg, out: Path, args) -> int:
    if args.replay:
        return _replay(cfg, out, args)
    codebook, receiver, s = _sim_common(cfg)
    keep = args.dump_trace is not None
    res = run_trials(codebook, receiver, int(s["trials"]), cfg["seed"], s["mode"],
                     float(s["p_miss"]), float(s["power_scale"]), args.workers, keep)
    write_csv(out / "trials.csv", cfg, ["trial", "k_a", "errors", "decoded", "pupe"],
              [[r.trial, r.k_a, r.errors, r.decoded, _f(r.pupe)] for r in res])
    write_csv(out / "classes.csv", cfg,
              ["trial", "level", "length", "attempted", "succeeded", "sigma2"],
              [[r.trial, lv, n, a, ok, _f(s2, 8)] for r in res for lv, n, a, ok, s2 in r.class_stats])
    p, lo, hi = summarize(res)
    ebn0 = energy_per_bit(codebook.scaled(float(s["power_scale"])))[1]
    write_csv(out / "summary.csv", cfg, ["trials", "ebn0_db", "pupe", "ci_lo", "ci_hi"],
              [[len(res), _f(ebn0, 4), _f(p), _f(lo), _f(hi)]])
    if keep:
        d = Path(args.dump_trace)
        d.mkdir(parents=True, exist_ok=True)
        for r in res:
            (d / f"trial_{r.trial:05d}.json").write_text(r.trace.to_json(), encoding="utf-8")
    print(f"PUPE={p:.5f} [{lo:.5f}, {hi:.5f}] over {len(res)} trials at Eb/N0={ebn0:.3f} dB")
    return EXIT_OK


def _replay(cfg, out: Path, args) -> int:
    import numpy as np

    from .mac import SideInfo

    rows = []
    for path in sorted(Path(p) for p in args.replay):
        tr = Trace.from_json(path.read_text())
        codebook = CodebookConfig.from_dict(tr.config)
        side = [SideInfo(int(c), int(s)) for c, s in tr.side_info]
        state = run_sic(np.array(tr.y), side, codebook, receiver_from(cfg))
        sent = [np.unpackbits(np.frombuffer(bytes.fromhex(h), dtype=np.uint8))[: codebook.payload_bits]
                for _, _, h in tr.users]
        e = pupe(sent, state.decoded_list)
        rows.append([path.name, len(sent), _f(e)])
        print(f"{path.name}: PUPE={e:.5f}")
    write_csv(out / "replay.csv", cfg, ["trace", "k_a", "pupe"], rows)
    return EXIT_OK


def cmd_sweep(cfg, out: Path, args) -> int:
    codebook, receiver, s = _sim_common(cfg)
    pts = sweep_ebn0(codebook, s["power_scales"], int(s["trials"]), receiver, cfg["seed"],
                     s["mode"], float(s["p_miss"]), args.workers)
    write_csv(out / "sweep.csv", cfg, ["scale", "ebn0_db", "pupe", "ci_lo", "ci_hi"],
              [[_f(p.scale, 4), _f(p.ebn0_db, 4), _f(p.pupe), _f(p.ci_lo), _f(p.ci_hi)] for p in pts])
    best = required_ebn0(pts, cfg["target_bler"])
    if best is None:
        print("no scale reached the target PUPE")
    else:
        print(f"required Eb/N0 = {best.ebn0_db:.3f} dB at scale {best.scale:g} "
              f"(PUPE {best.pupe:.4f})")
    return EXIT_OK


COMMANDS = {
    "design": cmd_design,
    "calibrate": cmd_calibrate,
    "interference-stats": cmd_interference,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polar-ura", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"polar_ura {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--out", help="output directory")
        s.add_argument("--workers", type=int, help="worker processes")
        s.add_argument("--slow", action="store_true", help="full-scale list size (L=8192)")
        s.add_argument("--list-size", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("--mode", choices=["fixed", "multinomial"])
        s.add_argument("--p-miss", type=float)
        s.add_argument("--k-a", type=int)
        if name == "simulate":
            s.add_argument("--dump-trace", metavar="DIR")
            s.add_argument("--replay", nargs="+", metavar="TRACE")
        if name == "interference-stats":
            s.add_argument("--compare", action="store_true",
                           help="also run the true-vs-Gaussian BLER comparison")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.dump_trace = getattr(args, "dump_trace", None)
    args.replay = getattr(args, "replay", None)
    args.compare = getattr(args, "compare", False)
    try:
        cfg = load_config(args.config, args)
        args.workers = int(cfg["workers"])
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, KeyError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DesignError as e:
        print(f"infeasible design: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
