"""Scenario and model files.

Scenarios are JSON documents.  Every object is checked against a fixed set of
fields; unknown fields are rejected.  Errors carry the field path (for
example ``checks[1].tol``) and, where it can be located, the source line.

Top-level fields
----------------
``name`` (str), ``description`` (str), ``seed`` (int), ``tol`` (float),
``model`` (object, required), ``times`` (list of floats or
``{"start", "stop", "num"}``), ``checks`` (list).

Model objects
-------------
``{"source": "blocks", "d", "bath_dim", "blocks", "bath_state"}``
    Complex matrices as nested lists of ``[re, im]`` pairs (plain reals also
    accepted).
``{"source": "measure", "measure", "h_funcs"}``
    ``measure`` is ``{"kind": "cauchy", "gamma", "center", "radius",
    "n_atoms"}`` or ``{"kind": "atoms", "locations", "weights"}``;
    ``h_funcs`` are named specs (linear, split-positive, tabulated).
``{"source": "gsb", "energies", "form", "signs"}`` or ``{"source": "gsb", "energies", "forms"}``
    Form factors are ``{"kind": ..., parameters}``; flat kinds accept either
    ``value`` or ``gamma`` (the qubit decay rate it produces).

Checks
------
See :data:`CHECK_FIELDS` for the accepted fields of each check type.
"""

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DephaseLabError, ScenarioError
from .model import BlockModel, SpectralMeasure, cauchy_measure, make_h_func
from .spinboson import FormFactor, GSBLevelSpec

EXPECT = ("holds", "violated", "modulus-only")

CHECK_FIELDS = {
    "divisibility": {"name", "tol", "all_pairs", "expect"},
    "semigroup": {"name", "tol", "expect", "rates", "rate_tol"},
    "blp": {"name", "rho1", "rho2", "tol", "expect"},
    "coherence": {"name", "rho", "tol", "expect"},
    "regression": {"name", "m", "grids", "tol", "expect", "budget", "expected_residual"},
    "intervention": {"name", "grid", "interventions", "rho", "expected_gap", "tol"},
    "trajectory": {"name"},
    "phase-defect": {"name", "t0", "t1", "min_abs", "tol"},
    "cutoff-limit": {"name", "omega_cut", "times", "rel_tol"},
    "pv": {"name", "pairs", "kernel_t", "tol", "radius"},
}

CHECK_GROUPS = {
    "divisibility": {"divisibility", "semigroup", "blp", "coherence"},
    "regression": {"regression", "intervention"},
    "spinboson": {"trajectory", "phase-defect", "cutoff-limit"},
    "pvint": {"pv"},
    "simulate": {"trajectory"},
}


@dataclass
class Check:
    type: str
    name: str
    params: dict
    path: str


@dataclass
class Scenario:
    """Parsed scenario.

    ``model`` is a :class:`BlockModel` or :class:`GSBLevelSpec`; ``raw`` keeps
    the parsed document for digesting.
    """

    name: str
    model: Any
    times: np.ndarray
    checks: list
    seed: int = 0
    tol: float = 1e-10
    description: str = ""
    raw: dict = field(default_factory=dict)
    source: str = ""

    @property
    def digest(self):
        return scenario_digest(self.raw)


def scenario_digest(doc):
    """SHA-256 of the canonical JSON serialisation (sorted keys, no whitespace)."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


class _Ctx:
    def __init__(self, text, origin):
        self.text = text
        self.origin = origin

    def line_of(self, path):
        """Best-effort source line of the last object key in ``path``."""
        if not self.text:
            return None
        keys = re.findall(r"\.?([A-Za-z_][\w-]*)", re.sub(r"\[\d+\]", "", path))
        pos = 0
        found = None
        for k in keys:
            i = self.text.find(f'"{k}"', pos)
            if i < 0:
                break
            found, pos = i, i + 1
        return None if found is None else self.text.count("\n", 0, found) + 1

    def error(self, path, msg):
        raise ScenarioError(_format(self.origin, self.line_of(path), path, msg))


def _format(origin, line, path, msg):
    where = origin or "<scenario>"
    if line is not None:
        where += f":{line}"
    return f"{where}: {path}: {msg}" if path else f"{where}: {msg}"


def _fields(ctx, obj, path, required=(), optional=()):
    if not isinstance(obj, dict):
        ctx.error(path, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        ctx.error(f"{path}.{unknown[0]}" if path else unknown[0], f"unknown field(s) {unknown}")
    for k in required:
        if k not in obj:
            ctx.error(path, f"missing required field {k!r}")


def _num(ctx, v, path, positive=False, nonneg=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.error(path, f"expected a number, got {v!r}")
    if integer and not float(v).is_integer():
        ctx.error(path, f"expected an integer, got {v!r}")
    if not math.isfinite(v) and not (v == math.inf and not integer):
        ctx.error(path, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        ctx.error(path, f"must be positive, got {v!r}")
    if nonneg and not v >= 0:
        ctx.error(path, f"must be nonnegative, got {v!r}")
    return int(v) if integer else float(v)


def _complex(ctx, v, path):
    if isinstance(v, list):
        if len(v) != 2:
            ctx.error(path, f"complex numbers are [re, im] pairs, got {v!r}")
        return complex(_num(ctx, v[0], path + "[0]"), _num(ctx, v[1], path + "[1]"))
    return complex(_num(ctx, v, path))


def _cmatrix(ctx, v, path, n=None):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        ctx.error(path, "expected a matrix (list of rows)")
    rows = [[_complex(ctx, z, f"{path}[{i}][{k}]") for k, z in enumerate(r)] for i, r in enumerate(v)]
    if any(len(r) != len(rows) for r in rows):
        ctx.error(path, "matrix must be square")
    if n is not None and len(rows) != n:
        ctx.error(path, f"expected a {n}x{n} matrix, got {len(rows)}x{len(rows)}")
    return np.array(rows, dtype=np.complex128)


def _flist(ctx, v, path, **kw):
    if not isinstance(v, list) or not v:
        ctx.error(path, "expected a nonempty list of numbers")
    return [_num(ctx, x, f"{path}[{i}]", **kw) for i, x in enumerate(v)]


# ---------------------------------------------------------------------------
# model sections
# ---------------------------------------------------------------------------


def _form_factor(ctx, v, path):
    _fields(ctx, v, path, ("kind",), ("value", "gamma", "omega_cut", "center", "width", "amplitude", "omega_bar", "grid", "samples"))
    kind = v["kind"]
    try:
        if kind in ("flat-full-line", "flat-half-line", "flat-cutoff"):
            if ("value" in v) == ("gamma" in v):
                ctx.error(path, "flat form factors need exactly one of 'value' or 'gamma'")
            cut = _num(ctx, v["omega_cut"], path + ".omega_cut", positive=True) if "omega_cut" in v else None
            if kind == "flat-cutoff" and cut is None:
                ctx.error(path, "flat-cutoff needs 'omega_cut'")
            if "gamma" in v:
                return FormFactor.flat_for_rate(_num(ctx, v["gamma"], path + ".gamma", nonneg=True), kind, cut)
            val = _complex(ctx, v["value"], path + ".value")
            if kind == "flat-cutoff":
                return FormFactor.flat_cutoff(val, cut)
            return FormFactor(kind, val)
        if kind in ("lorentzian", "gaussian"):
            for k in ("center", "width", "amplitude"):
                if k not in v:
                    ctx.error(path, f"{kind} needs {k!r}")
            args = [_num(ctx, v[k], f"{path}.{k}") for k in ("center", "width", "amplitude")]
            return getattr(FormFactor, kind)(*args)
        if kind == "tabulated":
            grid = _flist(ctx, v.get("grid"), path + ".grid")
            samples = [_complex(ctx, z, f"{path}.samples[{i}]") for i, z in enumerate(v.get("samples") or [])]
            return FormFactor.tabulated(grid, samples)
        if kind == "point-mass":
            return FormFactor.point_mass(
                _num(ctx, v.get("omega_bar"), path + ".omega_bar"), _complex(ctx, v.get("value"), path + ".value")
            )
    except ScenarioError:
        raise
    except DephaseLabError as exc:
        ctx.error(path, str(exc))
    ctx.error(path + ".kind", f"unknown form-factor kind {kind!r}")


def _measure(ctx, v, path):
    _fields(ctx, v, path, ("kind",), ("gamma", "center", "radius", "n_atoms", "locations", "weights"))
    if v["kind"] == "cauchy":
        gamma = _num(ctx, v.get("gamma", 1.0), path + ".gamma", positive=True)
        return cauchy_measure(
            gamma,
            _num(ctx, v.get("center", 0.0), path + ".center"),
            _num(ctx, v["radius"], path + ".radius", positive=True) if "radius" in v else None,
            _num(ctx, v.get("n_atoms", 100_000), path + ".n_atoms", positive=True, integer=True),
        )
    if v["kind"] == "atoms":
        return SpectralMeasure(_flist(ctx, v.get("locations"), path + ".locations"), _flist(ctx, v.get("weights"), path + ".weights"))
    ctx.error(path + ".kind", f"unknown measure kind {v['kind']!r}; expected 'cauchy' or 'atoms'")


def parse_model(ctx, v, path="model"):
    if not isinstance(v, dict) or "source" not in v:
        ctx.error(path, "model needs a 'source' of 'blocks', 'measure' or 'gsb'")
    src = v["source"]
    try:
        if src == "blocks":
            _fields(ctx, v, path, ("source", "d", "bath_dim", "blocks", "bath_state"))
            d = _num(ctx, v["d"], path + ".d", integer=True)
            n = _num(ctx, v["bath_dim"], path + ".bath_dim", integer=True, positive=True)
            blocks = v["blocks"]
            if not isinstance(blocks, list) or len(blocks) != d:
                ctx.error(path + ".blocks", f"expected {d} blocks")
            mats = [_cmatrix(ctx, b, f"{path}.blocks[{j}]", n) for j, b in enumerate(blocks)]
            return BlockModel(mats, _cmatrix(ctx, v["bath_state"], path + ".bath_state", n))
        if src == "measure":
            _fields(ctx, v, path, ("source", "measure", "h_funcs"))
            mu = _measure(ctx, v["measure"], path + ".measure")
            hf = v["h_funcs"]
            if not isinstance(hf, list) or len(hf) < 2:
                ctx.error(path + ".h_funcs", "need at least two h-function specs")
            funcs = []
            for j, spec in enumerate(hf):
                try:
                    funcs.append(make_h_func(spec))
                except DephaseLabError as exc:
                    ctx.error(f"{path}.h_funcs[{j}]", str(exc))
            return BlockModel.from_measure(mu, funcs)
        if src == "gsb":
            _fields(ctx, v, path, ("source", "energies"), ("form", "forms", "signs"))
            energies = _flist(ctx, v["energies"], path + ".energies")
            if "forms" in v:
                if "form" in v or "signs" in v:
                    ctx.error(path, "give either 'forms' or 'form' with 'signs'")
                forms = v["forms"]
                if not isinstance(forms, list) or len(forms) != len(energies):
                    ctx.error(path + ".forms", "need one form factor per level")
                return GSBLevelSpec(energies, tuple(_form_factor(ctx, f, f"{path}.forms[{j}]") for j, f in enumerate(forms)))
            if "form" not in v:
                ctx.error(path, "gsb model needs 'form' (with optional 'signs') or 'forms'")
            form = _form_factor(ctx, v["form"], path + ".form")
            signs = v.get("signs", [1, -1])
            if not isinstance(signs, list) or len(signs) != len(energies):
                ctx.error(path + ".signs", "need one sign per level")
            return GSBLevelSpec.with_signs(form, [_num(ctx, s, f"{path}.signs[{i}]", integer=True) for i, s in enumerate(signs)], energies)
    except ScenarioError:
        raise
    except DephaseLabError as exc:
        ctx.error(path, str(exc))
    ctx.error(path + ".source", f"unknown model source {src!r}")


def _times(ctx, v, path="times"):
    if isinstance(v, list):
        t = np.array(_flist(ctx, v, path, nonneg=True))
    else:
        _fields(ctx, v, path, ("stop", "num"), ("start",))
        start = _num(ctx, v.get("start", 0.0), path + ".start", nonneg=True)
        t = np.linspace(start, _num(ctx, v["stop"], path + ".stop"), _num(ctx, v["num"], path + ".num", integer=True, positive=True))
    if t[0] != 0 or np.any(np.diff(t) <= 0):
        ctx.error(path, "time grid must start at 0 and be strictly increasing")
    return t


def _check(ctx, v, path, i):
    if not isinstance(v, dict) or "type" not in v:
        ctx.error(path, "each check needs a 'type'")
    typ = v["type"]
    if typ not in CHECK_FIELDS:
        ctx.error(path + ".type", f"unknown check type {typ!r}; expected one of {sorted(CHECK_FIELDS)}")
    _fields(ctx, v, path, ("type",), CHECK_FIELDS[typ])
    if "expect" in v and v["expect"] not in EXPECT:
        ctx.error(path + ".expect", f"expect must be one of {EXPECT}")
    if "tol" in v:
        _num(ctx, v["tol"], path + ".tol", positive=True)
    if typ == "regression":
        if "m" not in v:
            ctx.error(path, "regression needs 'm'")
        _num(ctx, v["m"], path + ".m", integer=True, positive=True)
        g = v.get("grids")
        if not (isinstance(g, list) or (isinstance(g, dict) and set(g) <= {"random", "t_max"} and "random" in g)):
            ctx.error(path + ".grids", "grids must be a list of time lists or {'random': n, 't_max': T}")
    if typ == "intervention":
        for k in ("grid", "interventions"):
            if k not in v:
                ctx.error(path, f"intervention needs {k!r}")
    if typ == "phase-defect":
        for k in ("t0", "t1"):
            if k not in v:
                ctx.error(path, f"phase-defect needs {k!r}")
    if typ == "cutoff-limit" and "omega_cut" not in v:
        ctx.error(path, "cutoff-limit needs 'omega_cut'")
    params = {k: val for k, val in v.items() if k not in ("type", "name")}
    name = v.get("name") or f"{i:02d}-{typ}"
    if not re.fullmatch(r"[\w.-]+", name):
        ctx.error(path + ".name", "check names may only contain letters, digits, '.', '_' and '-'")
    return Check(typ, name, params, path)


def parse_scenario(doc, text="", origin=""):
    """Build a :class:`Scenario` from a parsed JSON document."""
    ctx = _Ctx(text, origin)
    _fields(ctx, doc, "", ("model",), ("name", "description", "seed", "tol", "times", "checks"))
    model = parse_model(ctx, doc["model"])
    times = _times(ctx, doc["times"]) if "times" in doc else np.linspace(0.0, 5.0, 51)
    checks_raw = doc.get("checks", [])
    if not isinstance(checks_raw, list):
        ctx.error("checks", "expected a list")
    checks = [_check(ctx, c, f"checks[{i}]", i) for i, c in enumerate(checks_raw)]
    names = [c.name for c in checks]
    if len(set(names)) != len(names):
        ctx.error("checks", "check names must be unique")
    seed = _num(ctx, doc.get("seed", 0), "seed", integer=True, nonneg=True)
    tol = _num(ctx, doc.get("tol", 1e-10), "tol", positive=True)
    return Scenario(doc.get("name", Path(origin).stem if origin else "scenario"), model, times, checks, seed, tol,
                    doc.get("description", ""), doc, origin)


def bundled_names():
    return sorted(p.name[:-5] for p in resources.files("dephaselab").joinpath("scenarios").iterdir() if p.name.endswith(".json"))


def load_scenario(ref):
    """Load a scenario from a path or a bundled scenario name."""
    p = Path(ref)
    if p.exists():
        text, origin = p.read_text(), str(p)
    else:
        res = resources.files("dephaselab").joinpath("scenarios", f"{ref}.json")
        if not res.is_file():
            raise ScenarioError(f"{ref}: no such file or bundled scenario (bundled: {', '.join(bundled_names())})")
        text, origin = res.read_text(), f"{ref}.json"
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(_format(origin, exc.lineno, "", f"invalid JSON: {exc.msg} (column {exc.colno})")) from None
    return parse_scenario(doc, text, origin)
