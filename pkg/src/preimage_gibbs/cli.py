"""Command-line experiment runner.

Every subcommand reads a JSON config (``--config``), writes ``results.csv``,
``results.json`` and ``manifest.json`` into ``--out``, and exits with

    0  success
    1  other estimator error
    2  config schema violation
    3  resource cap exceeded (rerun with --force)
    4  numerical certification failure (Newton divergence / branch collision)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (KINDS, build_dictionary, build_point, build_potential, build_system,
                     build_test_functions, complete, load_config)
from .errors import CertificationError, ConfigError, GibbsError, ResourceCapExceeded
from .estimators import (SamplerSpec, gibbs_oracle, l1_convergence_report, periodic_data,
                         pointwise_sequence, pressure_estimate, reference_pressure)
from .measure import expectations, format_word, measure_to_csv
from .shift import MarkovOracle, ShiftSystem, anchored_words, gibbs_ratio, lifted_cylinder_measure
from .torus import fixed_point_arrays, fixed_point_count
from .tree import build_tree

log = logging.getLogger("preimage_gibbs")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_CAP, EXIT_CERT = 0, 1, 2, 3, 4


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(v) for v in r])
    return buf.getvalue()


class Result:
    def __init__(self, header, rows, summary=None, extra_files=None):
        self.header = header
        self.rows = rows
        self.summary = summary or {}
        self.extra_files = extra_files or {}


# ---------------------------------------------------------------------------
# experiments

def _preimages(cfg, system, phi):
    x = build_point(cfg["point"], system)
    rows = []
    for n in cfg["depths"]:
        tree = build_tree(system, phi, x, n, threads=cfg["threads"], force=cfg["force"])
        for i, (p, s) in enumerate(zip(tree.points(n), tree.leaf_sums)):
            rows.append((n, i, str(p), float(s)))
    return Result(["n", "index", "point", "birkhoff_sum"], rows)


def _fixpoints(cfg, system, phi):
    rows = []
    for n in cfg["depths"]:
        if isinstance(system, ShiftSystem):
            count, expected = len(system.periodic_words(n)), system.periodic_count(n)
        else:
            arr, _ = fixed_point_arrays(system, n, force=cfg["force"])
            count, expected = len(arr), fixed_point_count(system, n)
        rows.append((n, count, expected, count == expected))
    return Result(["n", "count", "expected", "match"], rows)


def _pressure(cfg, system, phi):
    ref = reference_pressure(system, phi)
    rows = []
    for n in cfg["depths"]:
        p = pressure_estimate(system, phi, n, force=cfg["force"])
        rows.append((n, p, "" if ref is None else ref, "" if ref is None else abs(p - ref)))
    return Result(["n", "pressure_estimate", "reference", "abs_error"], rows, {"reference": ref})


def _mu_n(cfg, system, phi):
    x = build_point(cfg["point"], system)
    dictionary = build_dictionary(cfg["dictionary"], system)
    oracle = gibbs_oracle(system, phi, cfg["sampler"]["depth"])
    funcs = dictionary.functions
    target = expectations(oracle, funcs)
    w = np.asarray(dictionary.weights)
    rows, table, extra = [], [], {}
    for n in cfg["depths"]:
        tree = build_tree(system, phi, x, n, threads=cfg["threads"], force=cfg["force"],
                          width=max([len(getattr(g, "word", ())) for g in funcs] + [0]))
        mu = tree.to_measure()
        est = expectations(mu, funcs)
        diff = w * np.abs(est - target)
        rows.append((n, len(mu), float(diff.max())))
        table.extend((n, g.id, float(e), float(t), float(d)) for g, e, t, d in zip(funcs, est, target, diff))
        if cfg["emit_measures"]:
            extra[f"mu_n{n}.csv"] = measure_to_csv(mu)
    extra["table.csv"] = _csv(["n", "g_id", "estimate", "oracle", "weighted_abs_diff"], table)
    return Result(["n", "atoms", "distance"], rows, {"dictionary": dictionary.name}, extra)


def _periodic_measure(cfg, system, phi):
    dictionary = build_dictionary(cfg["dictionary"], system)
    oracle = gibbs_oracle(system, phi, max(cfg["depths"]) + 1)
    target = expectations(oracle, dictionary.functions)
    w = np.asarray(dictionary.weights)
    rows, extra = [], {}
    for n in cfg["depths"]:
        mu = periodic_data(system, phi, n, force=cfg["force"]).measure()
        d = float(np.max(w * np.abs(expectations(mu, dictionary.functions) - target)))
        rows.append((n, len(mu), mu.total_mass, d))
        if cfg["emit_measures"]:
            extra[f"periodic_n{n}.csv"] = measure_to_csv(mu)
    return Result(["n", "atoms", "total_mass", "distance"], rows, {"dictionary": dictionary.name}, extra)


def _l1_stat(cfg, system, phi):
    funcs = build_test_functions(cfg["test_functions"], system)
    s = cfg["sampler"]
    reports = l1_convergence_report(system, phi, funcs, cfg["depths"], cfg["samples"], cfg["seed"],
                                    SamplerSpec(s["kind"], s["depth"], s["denominator"]),
                                    threads=cfg["threads"], force=cfg["force"])
    rows = [r for rep in reports for r in rep.rows()]
    return Result(["n", "statistic", "g_id", "samples"], rows,
                  {"reports": [json.loads(r.to_json()) for r in reports]})


def _pointwise(cfg, system, phi):
    z = build_point(cfg["point"], system)
    dictionary = build_dictionary(cfg["dictionary"], system)
    oracle = gibbs_oracle(system, phi, cfg["sampler"]["depth"])
    rep = pointwise_sequence(system, phi, z, dictionary, cfg["depths"], oracle=oracle, tolerance=cfg["tolerance"],
                             threads=cfg["threads"], force=cfg["force"])
    return Result(["n", "statistic", "g_id", "samples"], rep.rows(), json.loads(rep.to_json()))


def _lift_check(cfg, system, phi):
    oracle = MarkovOracle(system, phi)
    rows = []
    worst = 0.0
    for past, future in anchored_words(system, cfg["max_past"], cfg["max_future"]):
        res = lifted_cylinder_measure(oracle, past, future, cfg["extra_depth"])
        worst = max(worst, res.difference)
        for n, v in sorted(res.limit.items()):
            rows.append((format_word(past), format_word(future), len(past), n, v, res.direct, abs(v - res.direct)))
    return Result(["past", "future", "anchor_depth", "n", "limit_value", "direct_value", "difference"], rows,
                  {"max_difference_beyond_anchor": worst})


def _gibbs_ratio(cfg, system, phi):
    oracle = MarkovOracle(system, phi)
    rows = []
    for n in cfg["depths"]:
        vals = [gibbs_ratio(oracle, system.legal_extension(w), n) for w in system.legal_words(n)]
        rows.append((n, len(vals), min(vals), max(vals)))
    return Result(["n", "words", "min_ratio", "max_ratio"], rows, {"pressure": oracle.pressure})


EXPERIMENTS = {
    "preimages": _preimages,
    "fixpoints": _fixpoints,
    "pressure": _pressure,
    "mu-n": _mu_n,
    "periodic-measure": _periodic_measure,
    "l1-stat": _l1_stat,
    "pointwise": _pointwise,
    "lemma1-check": _lift_check,
    "gibbs-ratio": _gibbs_ratio,
}


def run(config: dict, out_dir) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    t0 = time.perf_counter()
    out = Path(out_dir)
    status, error = EXIT_OK, None
    cfg = None
    try:
        cfg = complete(config)
        system = build_system(cfg["system"])
        phi = build_potential(cfg["potential"], system)
        result = EXPERIMENTS[cfg["kind"]](cfg, system, phi)
    except ConfigError as exc:
        status, error = EXIT_CONFIG, exc
    except ResourceCapExceeded as exc:
        status, error = EXIT_CAP, exc
    except CertificationError as exc:
        status, error = EXIT_CERT, exc
    except (GibbsError, ValueError, ArithmeticError, TypeError) as exc:
        status, error = EXIT_ERROR, exc
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    if status == EXIT_OK:
        (out / "results.csv").write_text(_csv(result.header, result.rows))
        (out / "results.json").write_text(json.dumps(
            {"kind": cfg["kind"], "columns": result.header,
             "rows": [[_json_val(v) for v in r] for r in result.rows],
             "summary": result.summary}, indent=1, sort_keys=True, default=_json_val))
        outputs = ["results.csv", "results.json"]
        for name, text in sorted(result.extra_files.items()):
            (out / name).write_text(text)
            outputs.append(name)
    manifest = {
        "config": cfg if cfg is not None else config,
        "status": status,
        "error": None if error is None else f"{type(error).__name__}: {error}",
        "outputs": outputs,
        "versions": {"preimage_gibbs": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "wall_time_s": time.perf_counter() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    if error is not None:
        log.error("%s: %s", type(error).__name__, error)
    return status


def _json_val(v):
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="preimage-gibbs",
                                     description="Weighted preimage measures and Gibbs-state oracles.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + KINDS:
        p = sub.add_parser(name, help="run the experiment named in the config" if name == "run"
                           else f"{name} experiment")
        p.add_argument("--config", required=True, type=Path, help="JSON config or a previous manifest.json")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--force", action="store_true", help="lift the 10^7 leaf/point cap")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if not isinstance(config, dict):
        log.error("config must be a JSON object")
        return EXIT_CONFIG
    config = dict(config)
    if args.command != "run":
        config["kind"] = args.command
    if args.seed is not None:
        config["seed"] = args.seed
    if args.force:
        config["force"] = True
    if args.threads is not None:
        config["threads"] = args.threads
    status = run(config, args.out)
    if status == EXIT_OK:
        log.info("wrote results to %s", args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
