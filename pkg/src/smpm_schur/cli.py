"""``smpm-bench``: iteration-count sweeps and validation runs, written as CSV.

Settings come from, in increasing priority, built-in defaults, an optional
``--config`` file of ``key = value`` lines (keys are the long flag names,
``#`` starts a comment) and command-line flags.
"""

import argparse
import logging
import sys

from . import bench
from .errors import ConfigError

DEFAULTS = {
    "sweep-aspect": {"mx": "10", "method": "schur,bj", "eta": "1,5,10,25,50"},
    "sweep-mx": {"mx": "8,16,32,64", "method": "schur,bj,dbj,2las"},
    "sweep-3d": {"mx": "8,16,32", "method": "dbj,2las", "n": "8", "mz": "6", "lz": "6", "my": "16"},
    "validate": {"n": "6", "mx": "6", "mz": "4", "lz": "4", "method": "dbj"},
    "convergence": {"mx": "4", "mz": "4", "lz": "2", "lx": "2", "method": "dbj"},
}
BASE = {"n": "10", "mz": "10", "lz": "10", "tol": "1e-10", "trials": "10", "seed": "0",
        "ctau": "1", "eta": "1", "jobs": "1"}


def read_config(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.lstrip("-").replace("_", "-")] = val
    return values


def build_parser():
    p = argparse.ArgumentParser(prog="smpm-bench", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        s = sub.add_parser(name)
        s.add_argument("--config")
        s.add_argument("--n", type=int)
        s.add_argument("--mx", help="element count in x; comma list for sweeps")
        s.add_argument("--mz", type=int)
        s.add_argument("--my", type=int, help="transverse points (power of two)")
        s.add_argument("--lx", type=float, help="domain length in x (validate, convergence); sweeps derive it from --eta")
        s.add_argument("--lz", type=float)
        s.add_argument("--ly", type=float)
        s.add_argument("--eta", help="element aspect ratio; comma list for sweep-aspect")
        s.add_argument("--method", help="comma list of schur, bj, dbj, 2las")
        s.add_argument("--tol", type=float)
        s.add_argument("--trials", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--ctau", type=float)
        s.add_argument("--max-iter", dest="max_iter", type=int)
        s.add_argument("--jobs", type=int, help="run trials on this many threads")
        s.add_argument("--out", help="CSV path (default stdout)")
    return p


def resolve(args):
    """Merge defaults, config file and flags into a flat dict of strings/values."""
    settings = dict(BASE)
    settings.update(DEFAULTS[args.command])
    if args.config:
        settings.update(read_config(args.config))
    for key, val in vars(args).items():
        if key in ("command", "config", "verbose") or val is None:
            continue
        settings[key.replace("_", "-")] = val
    return settings


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _methods(text):
    return [m.strip() for m in str(text).split(",") if m.strip()]


def make_config(settings, m_x=None, method=None):
    opt = settings.get
    return bench.ExperimentConfig(
        method=method or _methods(opt("method"))[0],
        n=int(opt("n")),
        m_x=m_x if m_x is not None else _ints(opt("mx"))[0],
        m_z=int(opt("mz")),
        m_y=int(opt("my", 0) or 0),
        l_x=float(opt("lx")) if opt("lx") is not None else None,
        l_z=float(opt("lz")),
        l_y=float(opt("ly")) if opt("ly") is not None else None,
        tol=float(opt("tol")),
        trials=int(opt("trials")),
        seed=int(opt("seed")),
        c_tau=float(opt("ctau")),
        out=opt("out"),
        max_iter=int(opt("max-iter")) if opt("max-iter") is not None else None,
        jobs=int(opt("jobs")),
    )


def _emit(rows, out, columns=bench.CSV_COLUMNS):
    if out:
        bench.write_csv(rows, out, columns)
    else:
        bench.write_csv(rows, sys.stdout, columns)


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    settings = resolve(args)
    cmd = args.command
    methods = _methods(settings["method"])
    m_xs = _ints(settings["mx"])
    if cmd == "validate":
        report = bench.run_oracle_validation(make_config(settings))
        for line in report.lines():
            print(line)
        return 0 if report.passed else 1
    if cmd == "convergence":
        rows = bench.run_convergence_study(make_config(settings), method=methods[0])
        _emit(rows, settings.get("out"), ("n", "L_inf_error"))
        return 0
    cfg = make_config(settings, m_x=m_xs[0], method=methods[0])
    if cmd == "sweep-aspect":
        rows = bench.sweep_aspect(cfg, etas=_floats(settings["eta"]), methods=methods)
    elif cmd == "sweep-mx":
        rows = bench.sweep_mx(cfg, m_xs=m_xs, methods=methods, eta=float(settings["eta"]))
    else:
        rows = bench.sweep_3d(cfg, m_xs=m_xs, methods=methods, eta=float(settings["eta"]))
    _emit(rows, settings.get("out"))
    return 0


def main(argv=None):
    try:
        sys.exit(run(argv))
    except ConfigError as exc:
        print(f"smpm-bench: {exc}", file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    main()
