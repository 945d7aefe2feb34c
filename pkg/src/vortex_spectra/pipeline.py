"""Scenario orchestration and the ``vortex-spectra`` command line.

A scenario is a JSON object; see README.md for the schema.  Every
subcommand is deterministic unless ``--verify`` is given, which adds Monte
Carlo cross-checks driven by ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from . import dynamics, functionals, spectra
from .constants import PRESETS, PhysicalConstants, constants_from_dict, load_constants, preset
from .errors import FlexPointError, NumericalError, SubQuantumRadiusError, ValidationError, VortexSpectraError
from .functionals import FilamentState, MomentumProfile, ProfileBundle, WeightSpec
from .geometry import ClosedCurve, curve_from_dict, load_curve

log = logging.getLogger(__name__)

MIN_GRID = 64
GAMMA_MIN_FACTOR = 1e-3
PROFILE_COLUMNS = ("s", "R", "ell", "beta_abs", "gamma_plus", "gamma_signed", "energy_density", "w_perp", "flags")

_SCENARIO_KEYS = {"constants", "curve", "weight", "momentum", "grid", "out", "thresholds",
                  "arg_beta", "seed", "spectra", "ring", "sweep"}


# Scenario --------------------------------------------------------------------

@dataclass
class Scenario:
    constants: PhysicalConstants
    curve: ClosedCurve | None = None
    weight: WeightSpec = field(default_factory=WeightSpec)
    momentum: MomentumProfile = field(default_factory=MomentumProfile)
    grid: int = 1024
    out: Path = Path("out")
    kappa_tol: float | None = None
    gamma_min: float | None = None
    arg_beta: float = 0.0
    seed: int = 0
    spectra: dict = field(default_factory=dict)
    ring: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    def state(self) -> FilamentState:
        if self.curve is None:
            raise ValidationError("this command needs a 'curve' in the scenario")
        return FilamentState(self.curve, self.constants, self.weight, self.momentum,
                             arg_beta=self.arg_beta, kappa_tol=self.kappa_tol)


def _number(value, name, positive=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(f"{name} must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return float(value)


def _check_keys(data, allowed, where):
    if not isinstance(data, dict):
        raise ValidationError(f"{where} must be a JSON object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {', '.join(unknown)}")


def _resolve_constants(ref, base: Path) -> PhysicalConstants:
    if isinstance(ref, dict):
        return constants_from_dict(ref)
    if isinstance(ref, str):
        if ref in PRESETS:
            return preset(ref)
        path = (base / ref)
        if not path.is_file():
            raise ValidationError(f"constants {ref!r} is neither a preset nor an existing file")
        return load_constants(path)
    raise ValidationError("constants must be a preset name, a file path or an object")


def _resolve_curve(ref, base: Path) -> ClosedCurve:
    if isinstance(ref, dict):
        return curve_from_dict(ref)
    if isinstance(ref, str):
        path = base / ref
        if not path.is_file():
            raise ValidationError(f"curve file {str(path)!r} does not exist")
        return load_curve(path)
    raise ValidationError("curve must be a file path or an object")


def scenario_from_dict(data: dict, base=".") -> Scenario:
    """Validate a parsed scenario; relative paths resolve against ``base``."""
    base = Path(base)
    _check_keys(data, _SCENARIO_KEYS, "scenario")
    if "constants" not in data:
        raise ValidationError("scenario needs 'constants'")
    sc = Scenario(constants=_resolve_constants(data["constants"], base))
    if data.get("curve") is not None:
        sc.curve = _resolve_curve(data["curve"], base)

    w = data.get("weight", {"kind": "uniform"})
    _check_keys(w, {"kind", "center", "width", "s", "values"}, "weight")
    try:
        sc.weight = WeightSpec(kind=w.get("kind", "uniform"), center=float(w.get("center", 0.0)),
                               width=float(w.get("width", 1.0)), s=tuple(map(float, w.get("s", ()))),
                               values=tuple(map(float, w.get("values", ()))))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad weight spec: {exc}") from None

    m = data.get("momentum", {})
    _check_keys(m, {"k0", "cos", "sin"}, "momentum")
    sc.momentum = MomentumProfile(k0=_number(m.get("k0", 1.0), "momentum.k0"),
                                  cos=tuple(_number(v, "momentum.cos") for v in m.get("cos", ())),
                                  sin=tuple(_number(v, "momentum.sin") for v in m.get("sin", ())))

    grid = data.get("grid", 1024)
    if isinstance(grid, bool) or not isinstance(grid, int) or grid < MIN_GRID:
        raise ValidationError(f"grid must be an integer >= {MIN_GRID}, got {grid!r}")
    sc.grid = grid
    sc.out = base / data.get("out", "out")

    th = data.get("thresholds", {})
    _check_keys(th, {"kappa_tol", "gamma_min"}, "thresholds")
    sc.kappa_tol = _number(th.get("kappa_tol"), "thresholds.kappa_tol", allow_none=True)
    sc.gamma_min = _number(th.get("gamma_min"), "thresholds.gamma_min", allow_none=True)
    if sc.kappa_tol is not None and sc.kappa_tol < 0:
        raise ValidationError("thresholds.kappa_tol must be non-negative")
    if sc.gamma_min is not None and sc.gamma_min <= 0:
        raise ValidationError("thresholds.gamma_min must be positive")

    sc.arg_beta = _number(data.get("arg_beta", 0.0), "arg_beta")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    sc.seed = seed

    sc.spectra = data.get("spectra", {})
    _check_keys(sc.spectra, {"k", "n"}, "spectra")
    sc.ring = data.get("ring", {})
    _check_keys(sc.ring, {"R", "q", "b_hat", "phi0", "Gamma", "t_sharp"}, "ring")
    sc.sweep = data.get("sweep", {})
    _check_keys(sc.sweep, {"R1_over_Rf", "R2_over_Rf", "points", "k"}, "sweep")
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"scenario file {str(path)!r} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario is not valid JSON: {exc}") from None
    return scenario_from_dict(data, base=path.parent)


# Output helpers ----------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_atomic(path, text: str):
    """Write ``text`` to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def profile_csv(bundle: ProfileBundle) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(PROFILE_COLUMNS)
    for i in range(len(bundle.s)):
        row = [bundle.s[i], bundle.R[i], bundle.ell[i], bundle.beta_abs[i], bundle.gamma_plus[i],
               bundle.gamma_signed[i], bundle.energy_density[i], bundle.w_perp[i]]
        wr.writerow([_fmt(v) for v in row] + [bundle.flags[i]])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# Disconnection -----------------------------------------------------------------

@dataclass
class Cut:
    s_begin: float
    s_end: float
    reason: str  # flex | gamma-below-threshold
    detail: str = ""

    def length(self, total):
        return (self.s_end - self.s_begin) % total if self.s_end != self.s_begin else 0.0


@dataclass
class Fragment:
    s_begin: float
    s_end: float
    length: float
    mean_gamma: float
    closed: bool = False


@dataclass
class FragmentSet:
    total_length: float
    gamma_min: float
    fragments: list
    cuts: list
    reason: str = ""

    @property
    def cut_length(self) -> float:
        return sum(c.length(self.total_length) for c in self.cuts)

    def to_dict(self) -> dict:
        return {
            "total_length": self.total_length,
            "gamma_min": self.gamma_min,
            "reason": self.reason,
            "fragments": [vars(f) for f in self.fragments],
            "cuts": [vars(c) for c in self.cuts],
        }


def _refine(func, a, b, fa, fb):
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        return 0.5 * (a + b)
    return optimize.brentq(func, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def _threshold_cuts(state, bundle, gamma_min):
    """Arcs where ``Gamma+ < gamma_min`` with endpoints refined by root finding."""
    s, gp = bundle.s, bundle.gamma_plus
    n, S = len(s), state.length
    # Gamma+ -> 0 at a flex, so flex samples extend below-threshold runs
    flex = np.array(["flex" in f for f in bundle.flags])
    below = (np.isfinite(gp) & (gp < gamma_min)) | flex
    if below.all():
        return None
    cuts = []

    def g(x):
        try:
            return functionals.gamma_plus_at(state, x % S) - gamma_min
        except (FlexPointError, SubQuantumRadiusError):
            return math.nan

    start = int(np.flatnonzero(~below)[0])
    i = 0
    while i < n:
        j = (start + i) % n
        if not below[j]:
            i += 1
            continue
        k = i
        while k < n and below[(start + k) % n]:
            k += 1
        first, last = (start + i) % n, (start + k - 1) % n
        a0 = s[first - 1] if first > 0 else s[n - 1] - S
        b1 = s[last + 1] if last + 1 < n else S
        fa0, fb1 = g(a0), g(b1)
        fa1, fb0 = g(s[first]), g(s[last])
        lo = s[first] if not (np.isfinite(fa0) and np.isfinite(fa1)) else _refine(g, a0, s[first], fa0, fa1)
        hi = s[last] if not (np.isfinite(fb0) and np.isfinite(fb1)) else _refine(g, s[last], b1, fb0, fb1)
        cuts.append(Cut(float(lo % S), float(hi % S), "gamma-below-threshold"))
        i = k
    return cuts


def _sign_cuts(state, bundle):
    """Zero-width cuts where ``k(ell(s))`` changes sign, so ``Gamma`` passes through 0."""
    s, k = bundle.s, bundle.k
    n, S = len(s), state.length
    sign = np.sign(k)

    def kf(x):
        return float(state.local(np.array([x % S]))["k"][0])

    cuts = []
    for i in range(n):
        j = (i + 1) % n
        b = s[j] if j else S
        if sign[i] == 0:
            cuts.append(Cut(float(s[i]), float(s[i]), "gamma-below-threshold", "k-zero"))
        elif sign[j] != 0 and sign[i] != sign[j]:
            x = _refine(kf, s[i], b, k[i], k[j]) % S
            cuts.append(Cut(float(x), float(x), "gamma-below-threshold", "k-zero"))
    return cuts


def _merge_cuts(cuts, S):
    """Union of arcs on the circle; returns sorted disjoint cuts (may wrap)."""
    if not cuts:
        return []
    arcs = []
    for c in cuts:
        a, b = c.s_begin, c.s_end
        if b < a:
            b += S
        arcs.append([a, b, c])
    arcs.sort(key=lambda t: (t[0], t[1]))
    merged = []
    for a, b, c in arcs:
        if merged and a <= merged[-1][1]:
            m = merged[-1]
            if b > m[1]:
                m[1] = b
            if c.reason not in m[2]:
                m[2].append(c.reason)
            if c.detail and c.detail not in m[3]:
                m[3].append(c.detail)
        else:
            merged.append([a, b, [c.reason], [c.detail] if c.detail else []])
    # last arc may reach past S into the first one
    while len(merged) > 1 and merged[-1][1] - S >= merged[0][0]:
        last = merged.pop()
        first = merged[0]
        first[0] = last[0] - S
        first[1] = max(first[1], last[1] - S)
        first[2] = sorted(set(first[2]) | set(last[2]))
        first[3] = sorted(set(first[3]) | set(last[3]))
    if len(merged) == 1 and merged[0][1] - merged[0][0] >= S:
        merged[0][0], merged[0][1] = 0.0, S
    return merged


def disconnect(state: FilamentState, bundle: ProfileBundle, gamma_min: float | None = None) -> FragmentSet:
    """Split the filament where circulation is (effectively) absent.

    Cuts cover flex intervals, arcs with ``Gamma+ < gamma_min`` and the
    zeros of ``k`` where the signed circulation changes sign.  The default
    ``gamma_min`` is ``1e-3 * max Gamma+``, a heuristic.
    """
    S = state.length
    gp = bundle.gamma_plus
    if gamma_min is None:
        finite = gp[np.isfinite(gp)]
        gamma_min = GAMMA_MIN_FACTOR * float(finite.max()) if finite.size else math.inf
    if not gamma_min > 0:
        raise ValidationError("gamma_min must be positive")

    raw = [Cut(float(a), float(b), "flex") for a, b in state.flex_intervals]
    th = _threshold_cuts(state, bundle, gamma_min)
    if th is None:
        return FragmentSet(S, gamma_min, [], [Cut(0.0, S, "gamma-below-threshold")],
                           reason="entire loop below gamma_min")
    raw += th + _sign_cuts(state, bundle)
    merged = _merge_cuts(raw, S)
    if len(merged) == 1 and merged[0][1] - merged[0][0] >= S:
        return FragmentSet(S, gamma_min, [], [Cut(0.0, S, "+".join(merged[0][2]))],
                           reason="no arc above gamma_min outside flex intervals")
    cuts = [Cut(float(a % S), float(b % S), "+".join(r), "+".join(d))
            for a, b, r, d in merged]
    if not merged:
        gs = bundle.gamma_signed
        mean = float(np.nanmean(gs)) if np.isfinite(gs).any() else math.nan
        return FragmentSet(S, gamma_min, [Fragment(0.0, S, S, mean, closed=True)], [])

    fragments = []
    s, gs = bundle.s, bundle.gamma_signed
    for i, (a, b, _, _) in enumerate(merged):
        nxt = merged[(i + 1) % len(merged)][0] + (S if i + 1 == len(merged) else 0.0)
        lo, hi = b, nxt
        if hi - lo <= 0:
            continue
        # grid points of the open arc (lo, hi), unwrapped
        shifted = (s - lo) % S
        inside = (shifted > 0) & (shifted < hi - lo)
        vals = gs[inside]
        mean = float(np.nanmean(vals)) if np.isfinite(vals).any() else math.nan
        fragments.append(Fragment(float(lo % S), float(hi % S), float(hi - lo), mean))
    fragments.sort(key=lambda f: f.s_begin)
    return FragmentSet(S, gamma_min, fragments, cuts)


# Commands -----------------------------------------------------------------------

def run_profile(sc: Scenario, out=None, verify=False, seed=None):
    """Write ``profile.csv`` and ``summary.json``; returns ``(bundle, summary)``."""
    out = Path(out) if out is not None else sc.out
    state = sc.state()
    bundle = functionals.compute_profiles(state, sc.grid)
    S = state.length
    w = bundle.weights
    ok = np.isfinite(bundle.gamma_plus)
    frags = disconnect(state, bundle, sc.gamma_min)
    summary = {
        "length": S,
        "grid": sc.grid,
        "energy_total": functionals.filament_total(bundle, bundle.energy_density, S) if ok.all() else None,
        "gamma_plus_total": functionals.filament_total(bundle, bundle.gamma_plus, S) if ok.all() else None,
        "normalization": float(np.sum(w) * S / len(w)),
        "fragment_count": len(frags.fragments),
        "gamma_min": frags.gamma_min,
        "gamma_min_note": ("heuristic default 1e-3 * max Gamma+" if sc.gamma_min is None
                           else "user supplied"),
        "flagged_rows": int(sum(1 for f in bundle.flags if f)),
        "sub_quantum_rows": int(sum(1 for f in bundle.flags if "sub-quantum" in f)),
        "flex_intervals": [list(iv) for iv in state.flex_intervals],
        "evolute_length": state.evolute.total,
        "w_perp_direction": "orthogonal to the tangent; otherwise unconstrained",
    }
    if verify:
        summary["verify"] = verify_profile(sc, bundle, seed if seed is not None else sc.seed)
    write_atomic(out / "profile.csv", profile_csv(bundle))
    write_atomic(out / "summary.json", _json(summary))
    return bundle, summary


def verify_profile(sc: Scenario, bundle: ProfileBundle, seed: int, points: int = 4, n_samples: int = 10**6):
    """Monte Carlo cross-check of a few profile rows (z-scores)."""
    rng = np.random.default_rng(seed)
    good = np.flatnonzero(np.isfinite(bundle.gamma_plus))
    rows = []
    for i in np.linspace(0, len(good) - 1, min(points, len(good))).astype(int):
        j = int(good[i])
        b2 = float(bundle.beta_abs[j]) ** 2
        mg, sg, me, se = functionals.monte_carlo_point(b2, float(bundle.k[j]), sc.constants, n_samples, rng)
        rows.append({"s": float(bundle.s[j]),
                     "z_gamma": (bundle.gamma_plus[j] - mg) / sg,
                     "z_energy": (bundle.energy_density[j] - me) / se})
    passed = all(abs(r["z_gamma"]) < 4 and abs(r["z_energy"]) < 4 for r in rows)
    return {"seed": seed, "samples": n_samples, "rows": rows, "passed": passed}


def run_disconnect(sc: Scenario, out=None):
    out = Path(out) if out is not None else sc.out
    state = sc.state()
    bundle = functionals.compute_profiles(state, sc.grid)
    frags = disconnect(state, bundle, sc.gamma_min)
    write_atomic(out / "fragments.json", _json(frags.to_dict()))
    return frags


def sweep_asymptotics(c: PhysicalConstants, R1: float, R2: float, points: int = 40, k: float = 1.0, out=None):
    """Fit the log-log circulation slope over circles and optionally write ``asymptotics.csv``."""
    fit = functionals.asymptotic_exponent(c, R1, R2, points, k)
    if out is not None:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("R", "gamma_plus"))
        for R, g in zip(fit.radii, fit.gamma_plus):
            wr.writerow((_fmt(R), _fmt(g)))
        write_atomic(Path(out) / "asymptotics.csv", buf.getvalue())
        write_atomic(Path(out) / "asymptotics.json", _json(_fit_dict(fit)))
    return fit


def _fit_dict(fit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept, "const": fit.const,
            "slope_stderr": fit.slope_stderr, "ci95": list(fit.ci95),
            "range_ok": fit.range_ok, "widened_ci": fit.widened}


def run_spectra(sc: Scenario, out=None):
    ks = sc.spectra.get("k", [1.0])
    ns = sc.spectra.get("n", list(range(5)))
    rows = spectra.spectrum_rows(ks, ns, sc.constants)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(("k", "n", "R_n", "gamma_plus", "energy"))
    for k, n, R, g, e in rows:
        wr.writerow((_fmt(k), int(n), _fmt(R), _fmt(g), _fmt(e)))
    text = buf.getvalue()
    write_atomic(Path(out if out is not None else sc.out) / "spectra.csv", text)
    return text


def run_ring(sc: Scenario):
    c = sc.constants
    r = sc.ring
    rc = dynamics.RingConfiguration(
        R=_number(r.get("R", 10.0 * c.Rf), "ring.R", positive=True),
        q=tuple(r.get("q", (0.0, 0.0, 0.0))),
        b_hat=tuple(r.get("b_hat", (0.0, 0.0, 1.0))),
        phi=_number(r.get("phi0", 0.0), "ring.phi0"),
        Gamma=_number(r.get("Gamma", 1.0), "ring.Gamma"),
    ).check(c)
    t_sharp = _number(r.get("t_sharp", 0.0), "ring.t_sharp")
    p = dynamics.momentum_from_ring(rc, c)
    flowed = dynamics.conditional_time_flow(rc, c, t_sharp, p)
    chi0, varpi0 = rc.oscillator(c)
    chi1, varpi1 = flowed.oscillator(c)
    return {
        "initial": {"R": rc.R, "q": list(rc.q), "phi": rc.phi, "chi": chi0, "varpi": varpi0},
        "flowed": {"R": flowed.R, "q": list(flowed.q), "phi": flowed.phi, "chi": chi1, "varpi": varpi1},
        "t_sharp": t_sharp,
        "momentum": p.tolist(),
        "hamiltonian": dynamics.hamiltonian(p, chi0, varpi0, c),
        "constraint_residual": dynamics.constraint_residual(rc, c),
        "exact_solution_residual": dynamics.exact_solution_residual(c.alpha, c.omega, rc.phi),
    }


# CLI ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vortex-spectra", description="Quantum vortex filament spectra and profiles.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("spectra", "tabulate R_n, Gamma+ and E_n"),
                        ("ring", "flow a ring configuration and print residuals"),
                        ("profile", "write profile.csv and summary.json"),
                        ("disconnect", "split the filament into fragments"),
                        ("sweep", "fit the asymptotic circulation exponent")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scenario", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--verify", action="store_true", help="add Monte Carlo cross-checks")
        p.add_argument("--seed", type=int, default=None)
    return ap


def _dispatch(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ValidationError("--seed must be an unsigned 64-bit integer")
    cmd = args.command
    if cmd == "spectra":
        sys.stdout.write(run_spectra(sc, args.out))
        return 0
    if cmd == "ring":
        sys.stdout.write(_json(run_ring(sc)))
        return 0
    if cmd == "profile":
        _, summary = run_profile(sc, args.out, verify=args.verify, seed=args.seed)
        sys.stdout.write(_json(summary))
        if summary["sub_quantum_rows"] or (args.verify and not summary["verify"]["passed"]):
            return 3
        return 0
    if cmd == "disconnect":
        sys.stdout.write(_json(run_disconnect(sc, args.out).to_dict()))
        return 0
    if cmd == "sweep":
        c = sc.constants
        sw = sc.sweep
        fit = sweep_asymptotics(c, _number(sw.get("R1_over_Rf", 1e2), "sweep.R1_over_Rf", True) * c.Rf,
                                _number(sw.get("R2_over_Rf", 1e4), "sweep.R2_over_Rf", True) * c.Rf,
                                int(sw.get("points", 40)), _number(sw.get("k", 1.0), "sweep.k"),
                                out=args.out if args.out is not None else sc.out)
        sys.stdout.write(_json(_fit_dict(fit)))
        return 0
    raise ValidationError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, VortexSpectraError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
