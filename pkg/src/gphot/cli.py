"""Command-line entry point ``gphot``.

Writes ``<name>_<command>.csv`` (``#`` metadata lines, a header row, one row per grid
point, 17 significant digits) and ``<name>_<command>.manifest.json`` into ``--out``.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 self-test failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import qkd
from .config import ConfigError

log = logging.getLogger("gphot")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELFTEST = 0, 2, 3, 4


# ----------------------------------------------------------------------------
# workers (module level so they pickle)


def _index_rows(names, table, value_name):
    rows = []
    for idx in np.ndindex(table.shape):
        rows.append(dict(zip(names, idx)) | {value_name: float(table[idx])})
    return rows


def _statistics_rows(command, raw):
    from . import photon_statistics as ps

    state = cfgmod.build_state(raw)
    part = cfgmod.build_partition(raw, state.mode_count)
    names = [f"n_{d}" for d in cfgmod.detector_names(raw)]
    req = cfgmod.statistics_request(raw, len(part), command)
    if command in ("pnd", "cdf"):
        if req.point is not None:
            f = ps.pnd if command == "pnd" else ps.cumulative
            return [dict(zip(names, req.point)) | {"p": f(state, part, req.point)}]
        f = ps.pnd_table if command == "pnd" else ps.cumulative_table
        return _index_rows(names, f(state, part, req.orders), "p")
    knames = [f"k_{d}" for d in cfgmod.detector_names(raw)]
    if command == "moments":
        mu_ref = ps.mean(state, part) if req.mu_ref == "mean" else None
        return _index_rows(knames, ps.moments(state, part, req.orders, mu_ref, table=True), "moment")
    f = ps.falling_factorial if req.kind == "falling" else ps.rising_factorial
    return _index_rows(knames, f(state, part, req.orders, table=True), f"{req.kind}_factorial")


def _qkd_rows(command, raw, exact_povm):
    scen = cfgmod.build_scenario(raw, exact_povm)
    if command == "simulate":
        return [qkd.evaluate(scen)]
    opts = raw["qkd"].get("retrodiction", {})
    res = qkd.retrodict_one(scen, **opts)
    row = {"mu": res.mu, "p_coincidence": res.p_coincidence}
    for (f, s), p in sorted(res.probabilities.items()):
        row[f"p_{f}{s}"] = p
    row["complement"] = res.complement
    return [row]


def _work(task):
    command, sub, raw, overrides, exact_povm = task
    if command == "qkd":
        rows = _qkd_rows(sub, raw, exact_povm)
    else:
        rows = _statistics_rows(command, raw)
    return [{k: v for k, v in overrides.items()} | r for r in rows]


# ----------------------------------------------------------------------------
# output


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def render_csv(rows, meta: dict) -> str:
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r.get(c, "")) for c in cols) + "\n")
    return buf.getvalue()


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("GPHOT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"GPHOT_THREADS must be an integer, got {env!r}") from None
    return 1


def run(command, sub, config_path, out_dir, threads=None, exact_povm=None) -> Path:
    t0 = time.perf_counter()
    raw, sha = cfgmod.read(config_path)
    points = cfgmod.sweep_points(raw)
    tasks = []
    for ov in points:
        res = cfgmod.resolve(raw, ov)
        # validate every point before any computation starts
        if command == "qkd":
            cfgmod.build_scenario(res, exact_povm)
        else:
            st = cfgmod.build_state(res)
            part = cfgmod.build_partition(res, st.mode_count)
            cfgmod.statistics_request(res, len(part), command)
        tasks.append((command, sub, res, ov, exact_povm))
    n = _threads(threads)
    if n > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(_work, tasks))
    else:
        chunks = [_work(t) for t in tasks]
    rows = [r for c in chunks for r in c]

    name = str(raw.get("name", Path(config_path).stem))
    name = f"{name}_{command if sub is None else sub}"
    label = command if sub is None else f"{command} {sub}"
    meta = {"gphot": __version__, "command": label, "config_sha256": sha}
    if command == "qkd":
        meta["povm"] = "exact" if cfgmod.build_scenario(raw, exact_povm).exact_povm else "approximate"
    text = render_csv(rows, meta)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    csv_path.write_text(text, encoding="utf-8", newline="\n")
    manifest = {
        "command": label,
        "config": str(config_path),
        "config_sha256": sha,
        "resolved_parameters": {"base": raw, "points": points},
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": {csv_path.name: hashlib.sha256(text.encode()).hexdigest()},
    }
    (out_dir / f"{name}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return csv_path


# ----------------------------------------------------------------------------
# self-test


def selftest(out=None) -> bool:
    from . import analytic, fock
    from . import gaussian as gs
    from . import photon_statistics as ps
    from .detection import BINS, ClickDetector, DetectionModel, DetectorSpec

    checks = []

    alpha = math.sqrt(1.2) * np.exp(1j * math.radians(50))
    r = math.asinh(math.sqrt(4 - 1.2))
    theta = math.radians(30)
    st = gs.displaced_squeezed_thermal(alpha, r, theta)
    got = ps.pnd_table(st, ps.DetectorPartition.single([0]), 6)
    ref = analytic.displaced_squeezed_pnd(6, alpha, r, theta)
    checks.append(("displaced squeezed PND vs Hermite formula", float(np.max(np.abs(got / ref - 1))), 1e-12))

    part = ps.DetectorPartition.single([0], 0.7, 0.2)
    got = ps.pnd_table(gs.thermal(1.0), part, 8)
    ref, _ = fock.oracle_pnd(fock.thermal(1.0, 40, tol=1e-11), [((0,), 0.7, 0.2)], 8)
    checks.append(("thermal with loss and noise vs number-basis oracle", float(np.max(np.abs(got - ref))), 1e-10))

    rng = np.random.default_rng(7)
    st = gs.tensor(gs.displaced_squeezed_thermal(0.3 + 0.2j, 0.4, 0.3, 0.1), gs.thermal(0.2))
    st = gs.apply(gs.beamsplitter(float(rng.uniform(0.2, 0.8)), 0, 1, 2), st)
    spec = DetectorSpec(efficiency=0.5, dark_rate=1e5, afterpulse_prob=0.05, dead_time=1e-6)
    model = DetectionModel(st, [ClickDetector("X", {"E": (0,), "C": (1,)}, spec)])
    total = sum(model.bin_click_probability("X", b) for b in BINS) + model.probability(model.outcome("X", "no"))
    checks.append(("click detector POVM completeness", abs(total - 1), 1e-12))

    out = out or sys.stdout
    ok = True
    for name, err, tol in checks:
        passed = err <= tol
        ok &= passed
        out.write(f"{'PASS' if passed else 'FAIL'}  {name}: error {err:.2e} (tolerance {tol:.0e})\n")
    return ok


# ----------------------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="gphot", description="Photon statistics of Gaussian states.")
    p.add_argument("--version", action="version", version=f"gphot {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--threads", type=int, default=None, help="worker processes for sweeps (env GPHOT_THREADS)")

    for c, h in (
        ("pnd", "joint photon-number distribution"),
        ("cdf", "cumulative distribution"),
        ("moments", "raw or central moments"),
        ("factorial", "falling or rising factorial moments"),
    ):
        common(sub.add_parser(c, help=h))
    q = sub.add_parser("qkd", help="BBM92 time-bin link")
    q.add_argument("mode", choices=("simulate", "retrodict"))
    common(q)
    g = q.add_mutually_exclusive_group()
    g.add_argument("--exact-povm", dest="exact_povm", action="store_true", default=None)
    g.add_argument("--approx-povm", dest="exact_povm", action="store_false")
    sub.add_parser("selftest", help="run the bundled reference checks")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selftest":
        return EXIT_OK if selftest() else EXIT_SELFTEST
    try:
        path = run(
            args.command,
            getattr(args, "mode", None),
            args.config,
            args.out,
            args.threads,
            getattr(args, "exact_povm", None),
        )
    except ConfigError as e:
        print(f"gphot: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as e:
        print(f"gphot: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
