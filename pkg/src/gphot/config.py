"""TOML run configuration: loading, validation and construction of model objects.

A file has ``schema_version = 1``, an optional ``name`` and either a
statistics section set (``[state]``, ``[[detectors]]``, ``[statistics]``)
or a ``[qkd]`` section.  Sweeps are given by ``[grid]`` (one parameter,
explicit ``values`` or ``linspace``/``logspace = [start, stop, n]``) or by
``[[sweep]]`` tables whose keys are dotted parameter paths, e.g.
``"state.copies" = 4``.  See ``configs/`` for complete examples.
"""

from __future__ import annotations

import copy
import hashlib
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import gaussian as gs
from . import qkd
from .detection import DetectorSpec
from .nongaussian import normalize
from .photon_statistics import Detector, DetectorPartition

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
FAMILIES = ("pnd", "cdf", "moments", "factorial")
LIMITS = {"max_order": 64, "max_modes": 4096}


class ConfigError(ValueError):
    pass


def _err(path, msg):
    return ConfigError(f"{path}: {msg}" if path else msg)


def read(path) -> tuple[dict, str]:
    """Parse a config file; return ``(raw dict, sha256 of the bytes)``."""
    try:
        data = open(path, "rb").read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from e
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return raw, hashlib.sha256(data).hexdigest()


# ----------------------------------------------------------------------------
# sweeps


def set_path(raw: dict, dotted: str, value):
    """Return a copy of ``raw`` with ``dotted`` (``a.b.0.c``) set to ``value``."""
    out = copy.deepcopy(raw)
    node = out
    keys = dotted.split(".")
    for i, k in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            try:
                idx = int(k)
                node[idx]
            except (ValueError, IndexError):
                raise _err(dotted, f"index {k!r} invalid") from None
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[k] = value
            else:
                node = node.setdefault(k, {})
        else:
            raise _err(dotted, f"cannot descend into {type(node).__name__}")
    return out


def sweep_points(raw: dict) -> list[dict]:
    """Override dicts, one per grid point, in file order (``[{}]`` without sweep)."""
    if "grid" in raw and "sweep" in raw:
        raise ConfigError("use either [grid] or [[sweep]], not both")
    if "sweep" in raw:
        pts = raw["sweep"]
        if not isinstance(pts, list) or not all(isinstance(p, dict) for p in pts):
            raise ConfigError("sweep: expected an array of tables")
        return [dict(p) for p in pts]
    if "grid" in raw:
        g = raw["grid"]
        par = g.get("parameter")
        if not isinstance(par, str):
            raise ConfigError("grid.parameter: expected a dotted path string")
        given = [k for k in ("values", "linspace", "logspace") if k in g]
        if len(given) != 1:
            raise ConfigError("grid: give exactly one of values, linspace, logspace")
        spec = g[given[0]]
        if given[0] == "values":
            vals = list(spec)
        else:
            if len(spec) != 3 or int(spec[2]) != spec[2] or spec[2] < 1:
                raise ConfigError(f"grid.{given[0]}: expected [start, stop, n]")
            if given[0] == "linspace":
                vals = np.linspace(spec[0], spec[1], int(spec[2])).tolist()
            else:
                if spec[0] <= 0 or spec[1] <= 0:
                    raise ConfigError("grid.logspace: bounds must be > 0")
                vals = np.geomspace(spec[0], spec[1], int(spec[2])).tolist()
        return [{par: v} for v in vals]
    return [{}]


def resolve(raw: dict, overrides: dict) -> dict:
    out = raw
    for k, v in overrides.items():
        out = set_path(out, k, v)
    return out


# ----------------------------------------------------------------------------
# field helpers


def _num(d, key, path, default=None, lo=None, hi=None, integer=False):
    if key not in d:
        if default is None:
            raise _err(f"{path}.{key}", "missing")
        return default
    x = d[key]
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise _err(f"{path}.{key}", f"expected a number, got {x!r}")
    if integer and int(x) != x:
        raise _err(f"{path}.{key}", f"expected an integer, got {x!r}")
    if not math.isfinite(x):
        raise _err(f"{path}.{key}", "must be finite")
    if lo is not None and x < lo:
        raise _err(f"{path}.{key}", f"must be >= {lo}, got {x}")
    if hi is not None and x > hi:
        raise _err(f"{path}.{key}", f"must be <= {hi}, got {x}")
    return int(x) if integer else float(x)


def _complex(d, key, path, default=0.0):
    """Complex value as a number or ``[re, im]`` or ``{abs = , phase_deg = }``."""
    x = d.get(key, default)
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, list) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, dict) and "abs" in x:
        return complex(float(x["abs"]) * np.exp(1j * np.deg2rad(float(x.get("phase_deg", 0.0)))))
    raise _err(f"{path}.{key}", f"expected number, [re, im] or {{abs, phase_deg}}, got {x!r}")


def _unknown(d, allowed, path):
    extra = set(d) - set(allowed)
    if extra:
        raise _err(path, f"unknown keys {sorted(extra)}")


def _angle(d, path, key="theta"):
    if f"{key}_deg" in d:
        return math.radians(_num(d, f"{key}_deg", path))
    return _num(d, key, path, 0.0)


# ----------------------------------------------------------------------------
# statistics runs

COMPONENTS = {
    "vacuum": ("modes",),
    "coherent": ("alpha",),
    "thermal": ("mu",),
    "squeezed": ("r", "theta", "theta_deg", "mu"),
    "displaced_squeezed_thermal": ("alpha", "r", "theta", "theta_deg", "mu_th", "mean_photons"),
    "tmsv": ("r", "theta", "theta_deg", "mu"),
}
OPS = {
    "beamsplitter": ("modes", "T"),
    "phase": ("mode", "phi", "phi_deg"),
    "loss": ("mode", "T"),
    "squeezer": ("mode", "r", "theta", "theta_deg"),
    "two_mode_squeezer": ("modes", "r", "theta", "theta_deg"),
    "displacement": ("mode", "alpha"),
}


def _squeeze_for_mean(alpha, mean):
    """``r`` giving ``<N> = |alpha|^2 + sinh^2 r = mean``."""
    s2 = mean - abs(alpha) ** 2
    if s2 < 0:
        raise ConfigError(f"mean_photons {mean} is below |alpha|^2 = {abs(alpha) ** 2}")
    return math.asinh(math.sqrt(s2))


def _component(c, path, copies):
    kind = c.get("kind")
    if kind not in COMPONENTS:
        raise _err(f"{path}.kind", f"expected one of {sorted(COMPONENTS)}, got {kind!r}")
    _unknown(c, ("kind",) + COMPONENTS[kind], path)
    if kind == "vacuum":
        return gs.vacuum(_num(c, "modes", path, 1, lo=1, integer=True))
    if kind == "coherent":
        return gs.coherent(_complex(c, "alpha", path))
    if kind == "thermal":
        return gs.thermal(_num(c, "mu", path, lo=0))
    theta = _angle(c, path)
    if kind == "squeezed":
        if "mu" in c:
            return gs.squeezed(math.asinh(math.sqrt(_num(c, "mu", path, lo=0))), theta)
        return gs.squeezed(_num(c, "r", path, lo=0), theta)
    if kind == "tmsv":
        # mu is the mean pair number summed over all copies
        if "mu" in c:
            return gs.tmsv(math.asinh(math.sqrt(_num(c, "mu", path, lo=0) / copies)), theta)
        return gs.tmsv(_num(c, "r", path, lo=0), theta)
    alpha = _complex(c, "alpha", path)
    if "mean_photons" in c:
        r = _squeeze_for_mean(alpha, _num(c, "mean_photons", path, lo=0))
    else:
        r = _num(c, "r", path, 0.0, lo=0)
    return gs.displaced_squeezed_thermal(alpha, r, theta, _num(c, "mu_th", path, 0.0, lo=0))


def _mode(d, key, path, n):
    m = _num(d, key, path, integer=True)
    if not 0 <= m < n:
        raise _err(f"{path}.{key}", f"mode {m} not in 0..{n - 1}")
    return m


def _op(st, o, path):
    kind = o.get("kind")
    if kind not in OPS:
        raise _err(f"{path}.kind", f"expected one of {sorted(OPS)}, got {kind!r}")
    _unknown(o, ("kind",) + OPS[kind], path)
    n = st.mode_count
    if kind == "loss":
        return gs.loss_channel(st, _mode(o, "mode", path, n), _num(o, "T", path, lo=0, hi=1))
    if kind in ("beamsplitter", "two_mode_squeezer"):
        ms = o.get("modes")
        if not isinstance(ms, list) or len(ms) != 2:
            raise _err(f"{path}.modes", "expected two mode indices")
        i, j = (_mode({"m": m}, "m", f"{path}.modes", n) for m in ms)
        if i == j:
            raise _err(f"{path}.modes", "modes must differ")
        if kind == "beamsplitter":
            op = gs.beamsplitter(_num(o, "T", path, lo=0, hi=1), i, j, n)
        else:
            op = gs.two_mode_squeezer(_num(o, "r", path, lo=0), _angle(o, path), i, j, n)
    elif kind == "phase":
        op = gs.phase_shift(_angle(o, path, "phi"), _mode(o, "mode", path, n), n)
    elif kind == "squeezer":
        op = gs.squeezer(_num(o, "r", path, lo=0), _angle(o, path), _mode(o, "mode", path, n), n)
    else:
        op = gs.displacement(_complex(o, "alpha", path), _mode(o, "mode", path, n), n)
    return gs.apply(op, st)


def build_state(raw: dict):
    s = raw.get("state")
    if not isinstance(s, dict):
        raise ConfigError("state: missing section")
    _unknown(s, ("components", "ops", "copies", "modify"), "state")
    copies = _num(s, "copies", "state", 1, lo=1, integer=True)
    comps = s.get("components")
    if not isinstance(comps, list) or not comps:
        raise ConfigError("state.components: expected a non-empty array of tables")
    st = gs.tensor(*[_component(c, f"state.components.{i}", copies) for i, c in enumerate(comps)])
    if st.mode_count * copies > LIMITS["max_modes"]:
        raise ConfigError(f"state: {st.mode_count * copies} modes exceed the limit {LIMITS['max_modes']}")
    for i, o in enumerate(s.get("ops", [])):
        st = _op(st, o, f"state.ops.{i}")
    st = st.with_copies(copies)
    mod = s.get("modify")
    if mod is not None:
        _unknown(mod, ("kind", "k"), "state.modify")
        if mod.get("kind") not in ("added", "subtracted"):
            raise ConfigError("state.modify.kind: expected 'added' or 'subtracted'")
        try:
            st = normalize(st, mod["kind"], mod.get("k", 1))
        except ValueError as e:
            raise _err("state.modify", str(e)) from e
    return st


def build_partition(raw: dict, n_modes: int) -> DetectorPartition:
    dets = raw.get("detectors")
    if not isinstance(dets, list) or not dets:
        raise ConfigError("detectors: expected a non-empty array of tables")
    out = []
    for i, d in enumerate(dets):
        path = f"detectors.{i}"
        _unknown(d, ("modes", "efficiency", "noise", "name"), path)
        modes = d.get("modes")
        if isinstance(modes, int):
            modes = [modes]
        if not isinstance(modes, list) or not modes:
            raise _err(f"{path}.modes", "expected a list of mode indices")
        for m in modes:
            if not isinstance(m, int) or not 0 <= m < n_modes:
                raise _err(f"{path}.modes", f"mode {m!r} not in 0..{n_modes - 1}")
        eta = d.get("efficiency", 1.0)
        try:
            out.append(Detector(modes, eta, _num(d, "noise", path, 0.0, lo=0)))
        except ValueError as e:
            raise _err(path, str(e)) from e
    try:
        return DetectorPartition(out)
    except ValueError as e:
        raise _err("detectors", str(e)) from e


def detector_names(raw: dict) -> list[str]:
    return [d.get("name", f"D{i}") for i, d in enumerate(raw["detectors"])]


@dataclass(frozen=True)
class StatisticsRequest:
    orders: tuple
    point: tuple | None
    mu_ref: str
    kind: str


def statistics_request(raw: dict, n_det: int, family: str) -> StatisticsRequest:
    s = raw.get("statistics", {})
    _unknown(s, ("orders", "point", "mu_ref", "kind"), "statistics")
    orders = s.get("orders")
    orders = [orders] * n_det if isinstance(orders, int) else orders
    if not isinstance(orders, list) or len(orders) != n_det or not all(isinstance(o, int) for o in orders):
        raise ConfigError(f"statistics.orders: expected {n_det} integers")
    if any(o < 0 or o > LIMITS["max_order"] for o in orders):
        raise ConfigError(f"statistics.orders: each order must lie in 0..{LIMITS['max_order']}")
    point = s.get("point")
    if point is not None:
        if not isinstance(point, list) or len(point) != n_det or not all(isinstance(p, int) and p >= 0 for p in point):
            raise ConfigError(f"statistics.point: expected {n_det} non-negative integers")
        point = tuple(point)
    mu_ref = s.get("mu_ref", "zero")
    if mu_ref not in ("zero", "mean"):
        raise ConfigError("statistics.mu_ref: expected 'zero' (raw moments) or 'mean' (central moments)")
    kind = s.get("kind", "falling")
    if kind not in ("falling", "rising"):
        raise ConfigError("statistics.kind: expected 'falling' or 'rising'")
    return StatisticsRequest(tuple(orders), point, mu_ref, kind)


# ----------------------------------------------------------------------------
# QKD


def _dataclass_from(cls, d, path, extra=()):
    if not isinstance(d, dict):
        raise _err(path, "expected a table")
    names = [f.name for f in fields(cls)]
    _unknown(d, tuple(names) + tuple(extra), path)
    kw = {}
    for k in names:
        if k in d and k != "detectors":
            kw[k] = _num(d, k, path)
    return kw


def _detector_spec(d, path, rep_rate):
    kw = _dataclass_from(DetectorSpec, d, path)
    kw["rep_rate"] = rep_rate
    try:
        return DetectorSpec(**kw)
    except ValueError as e:
        raise _err(path, str(e)) from e


def build_scenario(raw: dict, exact_povm: bool | None = None) -> qkd.ScenarioConfig:
    q = raw.get("qkd")
    if not isinstance(q, dict):
        raise ConfigError("qkd: missing section")
    _unknown(q, ("mu", "schmidt_K", "rep_rate", "phase_pairing", "exact_povm", "pump", "alice", "bob", "spectral", "retrodiction"), "qkd")
    rep = _num(q, "rep_rate", "qkd", 1e8)
    try:
        pump_kw = _dataclass_from(qkd.PumpConfig, q.get("pump", {}), "qkd.pump")
        pump_kw["mu"] = _num(q, "mu", "qkd")
        pump = qkd.PumpConfig(**pump_kw)
        users = []
        for who in ("alice", "bob"):
            u = q.get(who, {})
            kw = _dataclass_from(qkd.UserConfig, u, f"qkd.{who}")
            dets = u.get("detectors")
            if not isinstance(dets, list) or len(dets) != 2:
                raise _err(f"qkd.{who}.detectors", "expected two detector tables")
            kw["detectors"] = tuple(_detector_spec(d, f"qkd.{who}.detectors.{i}", rep) for i, d in enumerate(dets))
            users.append(qkd.UserConfig(**kw))
        spectral = qkd.SpectralConfig(**_dataclass_from(qkd.SpectralConfig, q.get("spectral", {}), "qkd.spectral"))
        exact = q.get("exact_povm", True) if exact_povm is None else exact_povm
        return qkd.ScenarioConfig(
            pump,
            users[0],
            users[1],
            schmidt_K=_num(q, "schmidt_K", "qkd", 1, lo=1, integer=True),
            rep_rate=rep,
            spectral=spectral,
            phase_pairing=q.get("phase_pairing", "same"),
            exact_povm=bool(exact),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"qkd: {e}") from e
