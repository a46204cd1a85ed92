"""Command-line scenario runner.

Usage::

    dephaselab run --scenario shallow-pocket --out runs/sp
    dephaselab report runs/sp

Every subcommand except ``report`` reads one scenario and executes the subset
of its checks belonging to that subcommand (``run`` executes all).  Each check
writes one CSV file into the output directory; ``manifest.json`` records the
scenario digest, tool version, seed, wall-clock time and per-check verdicts.
The exit status is 1 if any check fails, 2 on usage or input errors.
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .divisibility import blp_check, coherence_monotonicity, is_cp_divisible, is_semigroup
from .errors import DephaseLabError, ScenarioError
from .model import BlockModel, QuditState, trajectory
from .pvquad import kernel_integral, pv_exp_diff, pv_one_minus_exp, pv_quadrature
from .regression import (
    Intervention,
    PAULI,
    TimeGrid,
    check_hierarchy,
    intervention_lhs,
    intervention_rhs,
    expansion_reconstruction,
    random_grids,
)
from .scenario import CHECK_GROUPS, Scenario, load_scenario, scenario_digest
from .spinboson import GSBLevelSpec, cutoff_limit_dephasing, halfline_phase_defect, trajectory_gsb

MANIFEST = "manifest.json"
DEFAULT_PV_PAIRS = [[3, 1], [1, 3], [0, 2], [-3, -1], [-1, -3], [0, -2]]


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _named_state(spec, d, path):
    if spec is None or spec == "plus":
        return QuditState.pure(np.ones(d))
    if spec == "minus":
        return QuditState.pure([(-1) ** k for k in range(d)])
    if isinstance(spec, str) and spec.startswith("basis-"):
        e = np.zeros(d)
        e[int(spec[6:])] = 1.0
        return QuditState.pure(e)
    if isinstance(spec, list):
        m = np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in spec])
        return QuditState(m)
    raise ScenarioError(f"{path}: unknown state {spec!r}; use plus, minus, basis-<k> or a matrix")


def _expect_bool(params, default="holds"):
    return params.get("expect", default) == "holds"


# ---------------------------------------------------------------------------
# check runners: each returns (passed, header, rows, summary)
# ---------------------------------------------------------------------------


class _Runner:
    def __init__(self, scenario: Scenario, tol=None, budget=None, seed=None):
        self.sc = scenario
        self.tol = scenario.tol if tol is None else tol
        self.budget = budget
        self.seed = scenario.seed if seed is None else seed
        self._traj = None

    @property
    def model(self):
        return self.sc.model

    def traj(self):
        if self._traj is None:
            if isinstance(self.model, GSBLevelSpec):
                self._traj = trajectory_gsb(self.model, self.sc.times)
            else:
                self._traj = trajectory(self.model, self.sc.times)
        return self._traj

    # divisibility family --------------------------------------------------

    def divisibility(self, p):
        rep = is_cp_divisible(self.traj(), p.get("tol", 1e-10), bool(p.get("all_pairs", False)))
        rows = [(s, t, lam, ok) for s, t, lam, ok in rep.pairs]
        summary = rep.to_dict()
        return rep.cp_divisible == _expect_bool(p), ["s", "t", "min_eigenvalue", "psd"], rows, summary

    def semigroup(self, p):
        fit = is_semigroup(self.traj(), p.get("tol", 1e-8))
        passed = fit.semigroup == _expect_bool(p)
        rates_ok = True
        for key, want in (p.get("rates") or {}).items():
            j, l = int(key[-2]), int(key[-1])
            rates_ok &= abs(fit.gamma[j, l] - float(want)) <= float(p.get("rate_tol", 1e-6))
        rows = [(r["j"], r["l"], r["omega"], r["gamma"], fit.residual) for r in fit.rates_table()]
        summary = {"residual": fit.residual, "semigroup": fit.semigroup, "ambiguous": fit.ambiguous, "rates_ok": bool(rates_ok)}
        return passed and rates_ok, ["j", "l", "omega", "gamma", "residual"], rows, summary

    def blp(self, p):
        d = self.traj().d
        r1 = _named_state(p.get("rho1", "plus"), d, "rho1")
        r2 = _named_state(p.get("rho2", "minus"), d, "rho2")
        res = blp_check(self.traj(), r1, r2, p.get("tol"))
        rows = list(zip(res.times, res.values[1:-1], res.derivatives))
        summary = {"monotone": res.ok, "tolerance": res.tolerance, "first_violation": res.first_violation}
        return res.ok == _expect_bool(p), ["t", "trace_distance", "derivative"], rows, summary

    def coherence(self, p):
        rho = _named_state(p.get("rho", "plus"), self.traj().d, "rho")
        res = coherence_monotonicity(self.traj(), rho, p.get("tol", 1e-12))
        rows = list(zip(res.times, res.values))
        summary = {"monotone": res.ok, "first_violation": res.first_violation}
        return res.ok == _expect_bool(p), ["t", "coherence"], rows, summary

    # regression family ----------------------------------------------------

    def regression(self, p):
        m = int(p["m"])
        g = p["grids"]
        if isinstance(g, dict):
            grids = random_grids(self.seed, int(g["random"]), m, float(g.get("t_max", 5.0)))
        else:
            grids = [TimeGrid(x) for x in g]
        tol = p.get("tol", self.tol)
        budget = self.budget if self.budget is not None else p.get("budget", 10**6)
        rep = check_hierarchy(self.model, m, grids, tol, budget=budget, seed=self.seed)
        expect = p.get("expect", "holds")
        if expect == "holds":
            passed = rep.holds
        elif expect == "violated":
            passed = not rep.holds
        else:
            passed = (not rep.holds) and rep.modulus_holds
        summary = rep.summary()
        er = p.get("expected_residual")
        if er:
            row = rep.lookup(er["tuple"], int(er.get("grid", 0)))
            ok = abs(row.residual - float(er["value"])) <= float(er.get("tol", 1e-3))
            summary["expected_residual"] = {"tuple": list(er["tuple"]), "observed": row.residual, "expected": er["value"], "ok": ok}
            passed = passed and ok
        rows = [
            (r.grid_id, " ".join(map(str, r.tuple)), r.lhs.real, r.lhs.imag, r.rhs.real, r.rhs.imag, r.residual, r.modulus_residual)
            for r in rep.rows
        ]
        header = ["grid_id", "tuple", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "modulus_residual"]
        return passed, header, rows, summary

    def intervention(self, p):
        grid = TimeGrid(p["grid"])
        d = self.model.d
        ivs = []
        for k, (a, b) in enumerate(p["interventions"]):
            ivs.append(Intervention(_op(a, d, f"interventions[{k}][0]"), _op(b, d, f"interventions[{k}][1]")))
        rho = _named_state(p.get("rho", "plus"), d, "rho")
        if isinstance(self.model, BlockModel):
            lhs = intervention_lhs(self.model, rho, grid, ivs)
        else:
            lhs = expansion_reconstruction(self.model, rho, grid, ivs)
        rhs = intervention_rhs(self.model, rho, grid, ivs)
        gap = lhs - rhs
        passed = True
        if "expected_gap" in p:
            passed = abs(abs(gap) - float(p["expected_gap"])) <= float(p.get("tol", 1e-3))
        summary = {"lhs": [lhs.real, lhs.imag], "rhs": [rhs.real, rhs.imag], "gap": abs(gap)}
        return passed, ["lhs_re", "lhs_im", "rhs_re", "rhs_im", "gap"], [(lhs.real, lhs.imag, rhs.real, rhs.imag, abs(gap))], summary

    # spin-boson family ----------------------------------------------------

    def trajectory(self, p):
        tr = self.traj()
        d = tr.d
        rows = [
            (t, j, l, tr.phis[i, j, l].real, tr.phis[i, j, l].imag)
            for i, t in enumerate(tr.times)
            for j in range(d)
            for l in range(d)
            if j < l
        ]
        return True, ["t", "j", "l", "re_phi", "im_phi"], rows, {"points": len(tr.times), "source": tr.source}

    def phase_defect(self, p):
        if not isinstance(self.model, GSBLevelSpec):
            raise ScenarioError("phase-defect needs a gsb model")
        v = halfline_phase_defect(self.model, p["t0"], p["t1"], tol=p.get("tol", 1e-10))
        passed = abs(v) > float(p.get("min_abs", 1e-3))
        return passed, ["t0", "t1", "phase_defect"], [(p["t0"], p["t1"], v)], {"phase_defect": v}

    def cutoff_limit(self, p):
        if not isinstance(self.model, GSBLevelSpec):
            raise ScenarioError("cutoff-limit needs a gsb model")
        c = np.real(self.model.constants)
        e = self.model.energies
        W = float(p["omega_cut"])
        times = p.get("times", [1.0, 2.0, 3.0, 4.0, 5.0])
        rel = float(p.get("rel_tol", 0.02))
        rows = []
        ok = True
        for t in times:
            for j in range(len(c)):
                for l in range(j + 1, len(c)):
                    fin = abs(cutoff_limit_dephasing(c, W, j, l, t, e))
                    lim = abs(cutoff_limit_dephasing(c, np.inf, j, l, t, e))
                    dev = abs(fin - lim) / lim
                    ok &= dev <= rel
                    rows.append((t, j, l, fin, lim, dev))
        return bool(ok), ["t", "j", "l", "finite_modulus", "limit_modulus", "rel_dev"], rows, {"max_rel_dev": max(r[-1] for r in rows)}

    # pv --------------------------------------------------------------------

    def pv(self, p):
        tol = float(p.get("tol", 1e-6))
        rows = []
        ok = True
        for a, b in p.get("pairs", DEFAULT_PV_PAIRS):
            exact = pv_one_minus_exp(b).value if a == 0 else pv_exp_diff(a, b).value
            q = pv_quadrature(a, b, p.get("radius"), tol / 10)
            err = abs(q.value - exact)
            ok &= err < tol
            rows.append((a, b, exact, q.value, err, q.error))
        for length in p.get("kernel_t", []):
            k = kernel_integral(length, 0.0, length, 0.0)
            q = pv_quadrature(0.0, length, None, tol / 10).value - pv_quadrature(-length, 0.0, None, tol / 10).value
            err = abs(k - q)
            ok &= err < tol
            rows.append(("kernel", length, k, q, err, 0.0))
        return bool(ok), ["a", "b", "analytic", "quadrature", "abs_error", "error_estimate"], rows, {"max_abs_error": max((r[4] for r in rows), default=0.0)}


def _op(spec, d, path):
    if isinstance(spec, str):
        if spec == "I":
            return np.eye(d)
        if d == 2 and spec in PAULI:
            return PAULI[spec]
        raise ScenarioError(f"{path}: unknown operator {spec!r}")
    return np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in spec])


_DISPATCH = {
    "divisibility": "divisibility",
    "semigroup": "semigroup",
    "blp": "blp",
    "coherence": "coherence",
    "regression": "regression",
    "intervention": "intervention",
    "trajectory": "trajectory",
    "phase-defect": "phase_defect",
    "cutoff-limit": "cutoff_limit",
    "pv": "pv",
}


def run_scenario(scenario: Scenario, out, command="run", seed=None, tol=None, budget=None):
    """Execute the checks of ``scenario`` selected by ``command`` and write results to ``out``.

    Returns the manifest dictionary.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    runner = _Runner(scenario, tol=tol, budget=budget, seed=seed)
    selected = CHECK_GROUPS.get(command)
    t_start = time.perf_counter()
    results = []
    for chk in scenario.checks:
        if selected is not None and chk.type not in selected:
            continue
        passed, header, rows, summary = getattr(runner, _DISPATCH[chk.type])(chk.params)
        fname = f"{chk.name}.csv"
        write_atomic(out / fname, _csv_text(header, rows))
        results.append({"name": chk.name, "type": chk.type, "passed": bool(passed), "file": fname, "summary": _jsonable(summary)})
    if command == "simulate" and not any(r["type"] == "trajectory" for r in results):
        passed, header, rows, summary = runner.trajectory({})
        write_atomic(out / "trajectory.csv", _csv_text(header, rows))
        results.append({"name": "trajectory", "type": "trajectory", "passed": True, "file": "trajectory.csv", "summary": summary})
    manifest = {
        "tool": "dephaselab",
        "version": __version__,
        "command": command,
        "scenario": scenario.name,
        "scenario_digest": scenario_digest(scenario.raw),
        "seed": runner.seed,
        "tol": runner.tol,
        "checks": results,
        "passed": all(r["passed"] for r in results),
        "wall_clock_seconds": time.perf_counter() - t_start,
    }
    write_atomic(out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _dfs_groups(rows, d, atol=1e-9):
    """Groups of levels whose mutual dephasing functions have modulus 1 on the whole grid."""
    parent = list(range(d))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    unit = {}
    for r in rows:
        key = (int(r["j"]), int(r["l"]))
        mod = abs(complex(float(r["re_phi"]), float(r["im_phi"])))
        unit[key] = unit.get(key, True) and abs(mod - 1.0) < atol
    for (j, l), ok in unit.items():
        if ok:
            parent[find(j)] = find(l)
    groups = {}
    for j in range(d):
        groups.setdefault(find(j), []).append(j)
    return sorted(groups.values())


def _table(header, rows):
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h)) for i, h in enumerate(header)]
    line = "  ".join(str(h).ljust(w) for h, w in zip(header, widths))
    out = [line, "  ".join("-" * w for w in widths)]
    out += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(out)


def render_report(run_dir):
    """Human-readable summary of a run directory; also writes plot-ready series files."""
    run_dir = Path(run_dir)
    mpath = run_dir / MANIFEST
    if not mpath.is_file():
        raise ScenarioError(f"{run_dir}: no {MANIFEST} found")
    try:
        manifest = json.loads(mpath.read_text())
        checks = manifest["checks"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ScenarioError(f"{mpath}: corrupt manifest ({exc})") from None
    lines = [
        f"scenario: {manifest.get('scenario')}  digest: {str(manifest.get('scenario_digest'))[:16]}",
        f"version: {manifest.get('version')}  seed: {manifest.get('seed')}  command: {manifest.get('command')}",
        f"overall: {'PASS' if manifest.get('passed') else 'FAIL'}",
    ]
    if not checks:
        return "\n".join(lines) + "\n"
    lines += ["", _table(["check", "type", "verdict"], [(c["name"], c["type"], "pass" if c["passed"] else "FAIL") for c in checks])]
    rates, residual_rows, verdicts = [], [], []
    for c in checks:
        rows = _read_csv(run_dir / c["file"])
        if c["type"] == "semigroup":
            rates += [(c["name"], r["j"], r["l"], f"{float(r['omega']):.6g}", f"{float(r['gamma']):.6g}", f"{float(r['residual']):.3g}") for r in rows]
        elif c["type"] == "regression":
            s = c["summary"]
            for m, v in s.get("max_residual_by_m", {}).items():
                residual_rows.append((c["name"], m, f"{v:.6g}"))
            residual_rows.append((c["name"], "all", f"{s['max_residual']:.6g}"))
        elif c["type"] == "divisibility":
            s = c["summary"]
            fv = s.get("first_violation")
            verdicts.append((c["name"], s["cp_divisible"], s["p_divisible"], "-" if fv is None else f"({fv['s']:.4g}, {fv['t']:.4g})"))
        elif c["type"] == "trajectory":
            d = 1 + max((int(r["l"]) for r in rows), default=0)
            groups = _dfs_groups(rows, d)
            lines += ["", "modulus-1 groups (decoherence-free blocks):", _table(["group", "levels"], [(i, " ".join(map(str, g))) for i, g in enumerate(groups)])]
            _write_abs_series(run_dir / f"series_{c['name']}_abs_phi.csv", rows)
    if rates:
        lines += ["", "dephasing rates:", _table(["check", "j", "l", "omega", "gamma", "fit_residual"], rates)]
    if residual_rows:
        lines += ["", "regression residual maxima:", _table(["check", "m", "max_residual"], residual_rows)]
        write_atomic(run_dir / "series_residual_vs_m.csv", _csv_text(["check", "m", "max_residual"], residual_rows))
    if verdicts:
        lines += ["", "divisibility:", _table(["check", "cp_divisible", "p_divisible", "first_violation"], verdicts)]
    return "\n".join(lines) + "\n"


def _write_abs_series(path, rows):
    pairs = sorted({(int(r["j"]), int(r["l"])) for r in rows})
    series = {}
    for r in rows:
        series.setdefault(r["t"], {})[(int(r["j"]), int(r["l"]))] = abs(complex(float(r["re_phi"]), float(r["im_phi"])))
    out = [[t] + [series[t][p] for p in pairs] for t in series]
    write_atomic(path, _csv_text(["t"] + [f"abs_phi_{j}{l}" for j, l in pairs], out))


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="dephaselab", description="Dephasing dynamics and quantum-regression checks.")
    ap.add_argument("--version", action="version", version=f"dephaselab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "run every check of a scenario"),
        ("simulate", "export the dephasing trajectory"),
        ("divisibility", "divisibility, semigroup, BLP and coherence checks"),
        ("regression", "regression hierarchy and intervention checks"),
        ("spinboson", "spin-boson trajectory, phase-defect and cutoff checks"),
        ("pvint", "principal-value integral checks"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", required=(name != "pvint"), help="scenario file or bundled scenario name")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--tol", type=float, help="override the scenario default tolerance")
        p.add_argument("--budget", type=int, help="tuple-evaluation budget for regression checks")
    p = sub.add_parser("report", help="summarise a run directory")
    p.add_argument("run_dir")
    return ap


_PV_ONLY = {"name": "pv-suite", "model": {"source": "gsb", "energies": [0, 0], "form": {"kind": "flat-full-line", "value": 0}},
            "checks": [{"type": "pv", "name": "pv", "kernel_t": [0.7, 1.0]}]}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            sys.stdout.write(render_report(args.run_dir))
            return 0
        if args.scenario is None:
            from .scenario import parse_scenario

            scenario = parse_scenario(_PV_ONLY, origin="<builtin pv suite>")
        else:
            scenario = load_scenario(args.scenario)
        manifest = run_scenario(scenario, args.out, args.command, args.seed, args.tol, args.budget)
    except (DephaseLabError, OSError) as exc:
        print(f"dephaselab: error: {exc}", file=sys.stderr)
        return 2
    for c in manifest["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    print(f"{'PASS' if manifest['passed'] else 'FAIL'}  {manifest['scenario']} -> {args.out}")
    return 0 if manifest["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
