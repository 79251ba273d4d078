"""Command-line entry point: ``oscillametric <command> [options]``.

Exit codes: 0 success, 1 numerical failure (or a failed acceptance check),
2 invalid input, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .manifold import NumericalError, ValidationError

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_VALIDATION = 2
EXIT_USAGE = 64

COMMANDS = ("curvature", "geodesic", "spectral", "kg", "sample", "prob", "sterngerlach", "chsh", "measure",
            "verify-all")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# serialisation


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return str(obj)


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON with sorted keys and every float written with 17 significant digits."""
    obj = _plain(obj) if _level == 0 else obj
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    return json.dumps(obj)


def write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v for v in row])


# --------------------------------------------------------------------------
# argument helpers


def _floats(text: str, n: Optional[int] = None) -> List[float]:
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ValidationError(f"expected {n} numbers, got {len(vals)}")
    return vals


def _json_arg(text: str):
    """Inline JSON, or ``@path`` / a path to a JSON file."""
    src = text
    if text.startswith("@"):
        src = open(text[1:]).read()
    elif not text.lstrip().startswith(("{", "[")):
        try:
            src = open(text).read()
        except OSError as exc:
            raise ValidationError(f"cannot read {text!r}") from exc
    try:
        return json.loads(src)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from exc


# --------------------------------------------------------------------------
# commands


def cmd_curvature(a):
    from . import curvature, potentials

    spec = potentials.spec_from_dict(_json_arg(a.potential))
    g = potentials.build_metric(spec)
    points = [np.array(_floats(chunk, g.dim)) for chunk in a.point.split(";") if chunk.strip()]
    if not points:
        raise ValidationError("--point needs at least one point")
    reports, rows = [], []
    for p in points:
        rep = curvature.ricci(g, p, h=a.h)
        div = curvature.einstein_divergence(g, p, h=a.h)
        entry = {"point": p, **rep.to_dict(), "div_einstein": div}
        if a.christoffel:
            entry["christoffel"] = curvature.christoffel_best(g, p, a.h)
        reports.append(entry)
        rows.append([*p, rep.scalar, float(np.linalg.norm(rep.ricci)), float(np.linalg.norm(div))])
    if a.csv:
        header = [f"x{i}" for i in range(g.dim)] + ["scalar", "ricci_norm", "div_einstein_norm"]
        write_csv(a.csv, header, rows)
    return {"potential": potentials.spec_to_dict(spec), "reports": reports, "csv": a.csv}


def cmd_geodesic(a):
    from . import geodesics, potentials

    spec = potentials.spec_from_dict(_json_arg(a.potential))
    g = potentials.build_metric(spec)
    x0 = _floats(a.x0)
    v0 = _floats(a.v0)
    if len(x0) == 3 and len(v0) == 3 and isinstance(spec, potentials.Newtonian):
        init = geodesics.newtonian_initial_state(x0, v0, a.K)
    elif len(x0) == 4 and len(v0) == 3 and isinstance(spec, (potentials.Electromagnetic, potentials.EMSpin)):
        init = geodesics.em_initial_state(x0, v0, a.K)
    elif len(x0) == g.dim and len(v0) == g.dim:
        init = geodesics.GeodesicState(np.array(x0), np.array(v0))
    else:
        raise ValidationError("x0/v0 must be spatial (3 and 3, or 4 and 3 for electromagnetic) or full-chart")
    tr = geodesics.integrate_geodesic(g, init, a.ds, a.steps, a.stride)
    if a.csv:
        write_csv(a.csv, *tr.to_rows())
    return {"steps": a.steps, "ds": a.ds, "K": tr.K, "K_drift": tr.K_drift, "norm": tr.norm0,
            "norm_drift": tr.norm_drift, "final_x": tr.x[-1], "final_xdot": tr.xdot[-1], "csv": a.csv}


def cmd_spectral(a):
    from . import spectral

    b = spectral.eigenbasis(a.p, a.rho)
    out = {"p": a.p, "rho": a.rho, "dim": b.dim, "gamma": b.gamma, "basis": [str(e.expr) for e in b.elements]}
    if a.verify:
        gram = b.gram()
        off = max((abs(complex(gram[i, j])) for i in range(b.dim) for j in range(b.dim) if i != j), default=0.0)
        samples = spectral.sphere_points(64, seed=a.seed)
        resid = max((spectral.laplace_eigencheck(e, a.rho, samples) for e in b.elements), default=0.0)
        checks = {
            "dim": b.dim == (a.p + 1) ** 2,
            "harmonic": all(e.is_harmonic() for e in b.elements),
            "orthogonal": off == 0.0,
            "eigen_residual": resid <= 1e-10,
        }
        out["verify"] = {"checks": checks, "max_offdiag_gram": off, "eigen_residual": resid}
        if not all(checks.values()):
            raise NumericalError(f"spectral invariants failed: {dumps(checks)}")
    return out


def cmd_kg(a):
    from . import waves
    from .potentials import Neutral

    if a.compare:
        fast = waves.packet_gap(a.v, M=a.M, sigma=a.sigma)
        slow = waves.packet_gap(a.v / 2, M=a.M, sigma=a.sigma)
        return {"v": a.v, "gap": fast.gap, "gap_half_v": slow.gap, "shrink": fast.gap / slow.gap}
    if a.evolve:
        x = (np.arange(a.n) - a.n // 2) * a.dx
        k = a.M * a.v / math.sqrt(1 - a.v * a.v)
        psi0 = np.exp(-(x**2) / (4 * a.sigma**2) + 1j * k * x)
        psi1 = waves.leapfrog_branch_start(psi0, a.M, a.dx, a.dt)
        ev = waves.kg_evolve_1plus1(psi0, None, x, a.M, a.dt, a.steps, psi1=psi1, stride=a.stride)
        if a.csv:
            write_csv(a.csv, ["t", "x", "re_psi", "im_psi"], ev.to_rows())
        return {"M": a.M, "v": a.v, "k": k, "dx": a.dx, "dt": a.dt, "steps": a.steps,
                "norm_drift": ev.norm_drift, "csv": a.csv}
    mode = waves.OscillatingMode.moving(a.M, tuple(_floats(a.velocity, 3)), Q=a.Q)
    rng = np.random.default_rng(a.seed)
    pts = rng.uniform(-2, 2, (a.points, 4))
    return {"Mprime": mode.Mprime, "M": mode.M, "lambda": mode.lam, "Q": mode.Q,
            "kg_residual": waves.kg_residual(mode, Neutral(), mode.M, points=pts),
            "eps_time_ratio": waves.plane_wave_time_ratio(float(np.linalg.norm(_floats(a.velocity, 3))))}


def cmd_sample(a):
    from . import stochastic

    lo = _floats(a.lo, 3)
    hi = _floats(a.hi, 3)
    region = stochastic.RegionSpec.whole(lo, hi)
    kappa = a.kappa
    a_c = lambda t, x: np.cos(kappa * x[:, 0])
    s = stochastic.sample_singularities(a_c, region, a.n, a.seed, envelope=1.0)
    edges = np.linspace(lo[0], hi[0], a.bins + 1)
    chi = stochastic.chi2_against(s.positions[:, 0], edges, stochastic.fringe_bin_probabilities(kappa, edges))
    if a.csv:
        write_csv(a.csv, ["x1", "x2", "x3"], s.to_rows())
    return {"n": a.n, "kappa": kappa, "proposals": s.proposals, "chi2": chi.statistic, "p_value": chi.pvalue,
            "mean": s.positions.mean(axis=0), "csv": a.csv}


def cmd_prob(a):
    from . import stochastic

    out = {}
    if a.N is not None:
        if a.p is None or a.k is None:
            raise ValidationError("--N needs --p and --k")
        out.update({"N": a.N, "p": a.p, "k": a.k, "binomial": stochastic.count_law(a.N, a.p, a.k),
                    "poisson_limit": stochastic.poisson_limit(a.N * a.p, 1.0, a.k),
                    "max_gap": stochastic.binomial_poisson_gap(a.N, a.N * a.p)})
    if a.omega:
        lo, hi = (_floats(part, 3) for part in a.omega.split(":"))
        Lo, Hi = (_floats(part, 3) for part in a.Omega.split(":"))
        region = stochastic.RegionSpec(tuple(lo), tuple(hi), tuple(Lo), tuple(Hi), grid=a.grid)
        kappa = a.kappa
        out.update({"omega": [lo, hi], "Omega": [Lo, Hi], "kappa": kappa,
                    "region_probability": stochastic.region_probability(lambda t, x: np.cos(kappa * x[:, 0]), region)})
    if not out:
        raise UsageError("prob needs --N/--p/--k or --omega")
    return out


def _parse_state(text: str):
    from . import experiments

    vals = _floats(text)
    if len(vals) == 1:
        return experiments.spin_state(vals[0])
    if len(vals) == 4:
        return np.array([vals[0] + 1j * vals[1], vals[2] + 1j * vals[3]])
    raise ValidationError("--state is an angle or four numbers re1,im1,re2,im2")


def cmd_sterngerlach(a):
    from . import experiments

    z = _parse_state(a.state)
    r = experiments.stern_gerlach(z, a.theta)
    return {"theta": a.theta, "state": [complex(c) for c in z], "p1": r.p1, "p2": r.p2}


def cmd_chsh(a):
    from . import experiments

    angles = _floats(a.angles, 4)
    res = experiments.chsh(*angles, theta1G=a.theta1G, theta1D=a.theta1D, rule=a.rule)
    out = {"angles": angles, "rule": a.rule, "E": res.E, "S": res.S}
    if a.lhv:
        out["lhv"] = experiments.lhv_baseline(a.lhv, a.seed, angles, a.strategy).to_dict()
    return out


def cmd_measure(a):
    from . import experiments as E

    doc = _json_arg(a.spec)
    allowed = {"modes", "spectrum", "L", "T", "t", "u", "t0", "x", "sep"}
    bad = set(doc) - allowed
    if bad:
        raise ValidationError(f"unknown keys in measurement spec: {sorted(bad)}")
    mode_keys = {"C", "Cprime", "lam", "Mprime", "Q"}
    modes = []
    for m in doc.get("modes", []):
        if set(m) - mode_keys:
            raise ValidationError(f"unknown mode keys: {sorted(set(m) - mode_keys)}")
        modes.append(E.PlaneMode(float(m.get("C", 1.0)), float(m.get("Cprime", 0.0)),
                                 tuple(float(c) for c in m.get("lam", (0, 0, 0))),
                                 float(m.get("Mprime", 1.0)), float(m.get("Q", 0.0))))
    if not modes:
        raise ValidationError("spec needs at least one mode")
    sep = float(doc.get("sep", 100.0))
    if a.grandeur == "impulse":
        inst = E.Instrument(tuple(tuple(float(c) for c in q) for q in doc["spectrum"]), L=float(doc.get("L", 1.0)))
        res = E.measure_impulse(modes, inst, t=float(doc.get("t", 0.0)), u=float(doc.get("u", 0.0)), sep=sep)
    else:
        inst = E.Instrument(tuple(float(e) for e in doc["spectrum"]), T=float(doc.get("T", 1.0)), kind="energy")
        res = E.measure_energy(modes, inst, t0=float(doc.get("t0", 0.0)), x=tuple(doc.get("x", (0, 0, 0))),
                               u=float(doc.get("u", 0.0)), sep=sep)
    return {"grandeur": a.grandeur, **res.to_dict()}


def cmd_verify_all(a):
    from . import acceptance

    if a.profile is None or a.profile.strip() == "":
        raise UsageError("verify-all needs a nonempty --profile")
    profile = a.profile
    if profile not in acceptance.PROFILES:
        try:
            profile = _json_arg(profile)
        except ValidationError as exc:
            raise UsageError(str(exc)) from exc
        if not profile:
            raise UsageError("empty tolerance profile")
    if a.tol_overrides:
        base = dict(acceptance.resolve_profile(profile))
        base.update(a.tol_overrides)
        profile = base
    timings = {}
    crits = acceptance.verify_all(profile, a.seed, timings)
    for c in crits:
        print(f"{c.line()}  ({timings.get(c.number, 0.0):.1f}s)", file=sys.stderr)
    report = acceptance.report_json(crits, profile, a.seed)
    failed = [c for c in crits if not c.passed]
    return {"_raw": report, "_failed": [f"criterion {c.number}: {c.title}" for c in failed]}


HANDLERS = {
    "curvature": cmd_curvature, "geodesic": cmd_geodesic, "spectral": cmd_spectral, "kg": cmd_kg,
    "sample": cmd_sample, "prob": cmd_prob, "sterngerlach": cmd_sterngerlach, "chsh": cmd_chsh,
    "measure": cmd_measure, "verify-all": cmd_verify_all,
}


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="oscillametric", description="Potential metrics, S3 spin algebra and measurement predictions.")
    top.add_argument("--config", help="JSON run configuration {command, params, seed, tol_overrides, out_path}")
    sub = top.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", dest="out_path", help="write the JSON result here as well as to stdout")
        return p

    p = add("curvature", "Ricci, scalar and Einstein curvature of a potential metric at a point")
    p.add_argument("--potential", required=True, help="potential document (inline JSON or file)")
    p.add_argument("--point", required=True, help="comma-separated chart coordinates; ';' separates points")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--christoffel", action="store_true")
    p.add_argument("--csv", help="summary per point: coordinates, scalar, |Ricci|, |div G|")

    p = add("geodesic", "integrate a geodesic with RK4")
    p.add_argument("--potential", "--metric", dest="potential", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--v0", required=True)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--ds", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--csv", help="trace output path")

    p = add("spectral", "orthogonal basis of the degree-p Laplacian eigenspace on S3")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--verify", action="store_true")

    p = add("kg", "plane-wave Klein-Gordon residual or the packet comparison with Schroedinger")
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--velocity", default="0.1,0,0")
    p.add_argument("--Q", type=float, default=0.0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--compare", action="store_true", help="1+1D packet gap at v and v/2")
    p.add_argument("--evolve", action="store_true", help="leapfrog a Gaussian packet and write the grid")
    p.add_argument("--v", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=200.0)
    p.add_argument("--dx", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--csv")

    p = add("sample", "sample singularity positions for the fringe density cos^2(kappa x1)")
    p.add_argument("--kappa", type=float, default=3.0)
    p.add_argument("--lo", default="0,0,0")
    p.add_argument("--hi", default="2,1,1")
    p.add_argument("--n", type=int, default=100000)
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--csv")

    p = add("prob", "binomial count law, Poisson limit, and presence probability of a box for the fringe density")
    p.add_argument("--N", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--omega", help="lo1,lo2,lo3:hi1,hi2,hi3")
    p.add_argument("--Omega", default="0,0,0:2,1,1")
    p.add_argument("--kappa", type=float, default=3.0)
    p.add_argument("--grid", type=int, default=24)

    p = add("sterngerlach", "outcome probabilities for a spin state and field angle")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--state", required=True, help="state angle, or re1,im1,re2,im2")

    p = add("chsh", "correlations and S for an entangled pair")
    p.add_argument("--angles", required=True, help="thetaG,thetaG',thetaD,thetaD'")
    p.add_argument("--theta1G", type=float, default=0.0)
    p.add_argument("--theta1D", type=float, default=0.0)
    p.add_argument("--rule", default="example1", choices=["example1", "example1_right", "example2"])
    p.add_argument("--lhv", type=int, default=0, help="Monte-Carlo trials of the local baseline")
    p.add_argument("--strategy", default="sign_cos", choices=["sign_cos", "constant"])

    p = add("measure", "instrument weights and probabilities for a sum of plane modes")
    p.add_argument("--grandeur", required=True, choices=["impulse", "energy"])
    p.add_argument("--spec", required=True, help="JSON {modes, spectrum, L|T, ...}")

    p = add("verify-all", "run the acceptance checks and write the report")
    p.add_argument("--profile", default="default", help="profile name or JSON of threshold overrides")
    p.set_defaults(seed=None)
    return top


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None
    tol_overrides: dict = field(default_factory=dict)
    out_path: Optional[str] = None

    KEYS = ("command", "params", "seed", "tol_overrides", "out_path")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        unknown = set(doc) - set(cls.KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if doc.get("command") not in COMMANDS:
            raise ValidationError(f"config command must be one of {list(COMMANDS)}")
        if not isinstance(doc.get("params", {}), dict) or not isinstance(doc.get("tol_overrides", {}), dict):
            raise ValidationError("params and tol_overrides must be objects")
        return cls(doc["command"], dict(doc.get("params", {})), doc.get("seed"), dict(doc.get("tol_overrides", {})),
                   doc.get("out_path"))

    def argv(self) -> List[str]:
        out = [self.command]
        for k, v in self.params.items():
            flag = "--" + k
            if v is True:
                out.append(flag)
            elif v is False or v is None:
                continue
            elif isinstance(v, (dict, list)):
                out += [flag, json.dumps(v)]
            else:
                out += [flag, str(v)]
        if self.seed is not None:
            out += ["--seed", str(int(self.seed))]
        if self.out_path:
            out += ["--out", self.out_path]
        return out


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        tol_overrides = {}
        if args.config:
            if args.command:
                raise UsageError("give either --config or a command, not both")
            cfg = RunConfig.from_dict(_json_arg(args.config))
            args = parser.parse_args(cfg.argv())
            tol_overrides = cfg.tol_overrides
            if tol_overrides and args.command != "verify-all":
                raise ValidationError("tol_overrides apply to verify-all only")
        if not args.command:
            raise UsageError("a command is required")
        args.tol_overrides = tol_overrides
        if args.command == "verify-all" and args.seed is None:
            from .acceptance import DEFAULT_SEED

            args.seed = DEFAULT_SEED
        result = HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (KeyError, ValueError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if "_raw" in result:
        text = result["_raw"]
        failed = result["_failed"]
    else:
        result = {"command": args.command, "seed": args.seed, **result}
        text = dumps(result) + "\n"
        failed = []
    sys.stdout.write(text)
    if args.out_path:
        with open(args.out_path, "w") as fh:
            fh.write(text)
    if failed:
        print("failed: " + "; ".join(failed), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())
