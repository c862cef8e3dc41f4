"""``ap`` command-line front end.

Every subcommand accepts its options on the command line or from a JSON job
file (``--job``); command-line values win.  Reports are deterministic JSON
(or CSV for tabular output) carrying the merged job, grids, node counts and
seeds.  Exit status: 0 success, 2 invalid job, 3 numerical refusal.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import metadata

import numpy as np

from . import approx, meanvalue, operators, periods, solvers
from .exprlang import EvaluationFault, ExprError, function_from_source
from .field import BoxGrid, DimensionError, FieldFunction, ParamFieldFunction

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class JobError(ValueError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# --- JSON ------------------------------------------------------------------

def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(obj.real)), "im": to_jsonable(float(obj.imag))}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if isinstance(obj, BoxGrid):
        return obj.to_dict()
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc) -> str:
    return json.dumps(to_jsonable(doc), sort_keys=True, indent=2) + "\n"


# --- argument helpers ------------------------------------------------------

def const_value(text) -> float:
    """Evaluate a constant expression such as ``2^3*pi``."""
    if isinstance(text, (int, float)):
        return float(text)
    f = function_from_source(str(text), 1)
    return float(np.real(f.at([0.0])[0]))


def float_list(text) -> list[float]:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [const_value(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [const_value(v) for v in str(text).split(",") if v.strip()]


def point_list(text) -> list[list[float]]:
    """Points separated by ``;`` with coordinates separated by ``,``."""
    if isinstance(text, list):
        return [float_list(p) for p in text]
    return [float_list(p) for p in str(text).split(";") if p.strip()]


def grid_arg(value, name: str) -> BoxGrid:
    if value is None:
        raise JobError(f"missing required grid --{name}")
    if isinstance(value, dict):
        return BoxGrid(value["lower"], value["upper"], value["counts"])
    return BoxGrid.parse(str(value), const_value)


def function_arg(source, n: int, p: int = 0, name: str = "f") -> FieldFunction:
    if source is None:
        raise JobError(f"missing required expression --{name}")
    return function_from_source(str(source), n, p)


def infer_dim(job: dict, *grid_keys: str) -> int:
    if job.get("dim") is not None:
        return int(job["dim"])
    for key in grid_keys:
        if job.get(key) is not None:
            return grid_arg(job[key], key).n
    raise JobError("cannot infer the dimension; pass --dim")


def mask_arg(text) -> periods.Mask:
    text = str(text or "full")
    if text == "full":
        return periods.full_space()
    if text == "orthant":
        return periods.orthant()
    if text.startswith("sector:"):
        _, c1, c2 = text.split(":")
        return periods.diagonal_sector(float(c1), float(c2))
    raise JobError(f"unknown mask {text!r}; use full, orthant or sector:c1:c2")


def kernel_arg(job: dict, n: int) -> operators.Kernel:
    if job.get("kernel_expr") is not None:
        if job.get("kernel_l1") is None:
            raise JobError("--kernel-expr needs a declared --kernel-l1")
        fn = function_from_source(str(job["kernel_expr"]), n)
        support = job.get("support") or "full"
        return operators.Kernel(n, lambda y: fn(y)[..., 0], float(job["kernel_l1"]), support=support,
                                label=str(job["kernel_expr"]))
    spec = job.get("kernel")
    if spec is None:
        raise JobError("pass --kernel NAME:params or --kernel-expr")
    name, *params = str(spec).split(":")
    vals = [float(v) for v in params]
    builders = {"gauss": operators.gaussian_kernel, "poisson": operators.poisson_kernel,
                "exp_orthant": operators.exp_orthant_kernel, "laplace": operators.laplace_kernel}
    if name not in builders:
        raise JobError(f"unknown kernel {name!r}; choose from {sorted(builders)}")
    return builders[name](n, *vals)


def sample_report(f: FieldFunction, grid) -> dict:
    """Values on a grid, or on an explicit ``(m, n)`` point array."""
    if isinstance(grid, BoxGrid):
        pts = grid.nodes()
        return {"grid": grid, "points": pts, "values": f(pts)}
    return {"points": grid, "values": f(grid)}


def solution_points(job: dict, grid: BoxGrid):
    """Where to report a solver's solution: ``--points``/``--at`` if given, else its grid."""
    if job.get("points") is None and job.get("at") is None:
        return grid
    pts, n = eval_points(job)
    if n != grid.n:
        raise JobError(f"evaluation points have dimension {n}, grid has {grid.n}")
    return pts


def eval_points(job: dict):
    """``--points`` (explicit list) or ``--at`` (grid), whichever is given."""
    if job.get("points") is not None:
        pts = np.asarray(point_list(job["points"]), dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise JobError("--points needs at least one point a,b;c,d")
        return pts, pts.shape[1]
    at = grid_arg(job.get("at"), "at")
    return at, at.n


# --- commands --------------------------------------------------------------

def cmd_mean(job):
    n = infer_dim(job)
    f = function_arg(job.get("f"), n)
    T = float_list(job.get("T")) or list(meanvalue.DEFAULT_T_SEQ)
    center = float_list(job.get("center")) or None
    nodes = int(job["nodes"]) if job.get("nodes") else None
    return meanvalue.mean_value(f, center, T, nodes)


def cmd_coeff(job):
    n = infer_dim(job)
    f = function_arg(job.get("f"), n)
    T = float_list(job.get("T")) or list(meanvalue.DEFAULT_T_SEQ)
    center = float_list(job.get("center")) or None
    nodes = int(job["nodes"]) if job.get("nodes") else None
    lam = float_list(job.get("freq"))
    if len(lam) != n:
        raise JobError(f"--freq must have {n} components")
    return meanvalue.bohr_coefficient(f, lam, center, T, nodes)


def cmd_spectrum(job):
    n = infer_dim(job)
    f = function_arg(job.get("f"), n)
    cands = point_list(job.get("candidates") or "")
    if not cands:
        raise JobError("--candidates is required")
    if job.get("threshold") is None:
        raise JobError("--threshold is required")
    T = float_list(job.get("T")) or [meanvalue.DEFAULT_T_SEQ[-1]]
    nodes = int(job["nodes"]) if job.get("nodes") else None
    return meanvalue.spectrum_scan(f, cands, float(job["threshold"]), T[-1], nodes,
                                   float_list(job.get("center")) or None)


def cmd_periods(job):
    domain = grid_arg(job.get("domain"), "domain")
    tau = grid_arg(job.get("tau"), "tau")
    f = function_arg(job.get("f"), domain.n)
    if job.get("eps") is None:
        raise JobError("--eps is required")
    return periods.eps_period_search(f, float(job["eps"]), domain, tau, float_list(job.get("l")))


def cmd_recur(job):
    domain = grid_arg(job.get("domain"), "domain")
    f = function_arg(job.get("f"), domain.n)
    taus = point_list(job.get("taus") or "")
    if not taus:
        raise JobError("--taus is required")
    return periods.recurrence_check(f, taus, domain)


def cmd_decay(job):
    domain = grid_arg(job.get("domain"), "domain")
    q = function_arg(job.get("q"), domain.n, name="q")
    return periods.decay_check(q, mask_arg(job.get("mask")), float_list(job.get("radii")), domain,
                               float(job.get("tol") or 0.0))


def cmd_split(job):
    domain = grid_arg(job.get("domain"), "domain")
    tau = grid_arg(job.get("tau"), "tau")
    n = domain.n
    f, g, q = (function_arg(job.get(k), n, name=k) for k in ("f", "g", "q"))
    if job.get("eps") is None or job.get("l") is None:
        raise JobError("--eps and --l are required")
    pe = job.get("period_eps")
    return periods.asymptotic_split_check(
        f, g, q, domain, mask_arg(job.get("mask")), float_list(job.get("radii")), float(job["eps"]),
        tau, float_list(job["l"])[0], None if pe is None else float(pe), float(job.get("tol") or 0.0))


def cmd_convolve(job):
    at, n = eval_points(job)
    f = function_arg(job.get("f"), n)
    h = kernel_arg(job, n)
    box = grid_arg(job.get("box"), "box")
    min_mass = float(job.get("min_mass") or 0.0)
    if job.get("causal"):
        out = operators.convolve_causal(h, f, box, min_mass)
    else:
        out = operators.convolve_full(h, f, box, min_mass)
    return {"meta": out.meta, **sample_report(out, at)}


def cmd_semigroup(job):
    at, n = eval_points(job)
    f = function_arg(job.get("f"), n)
    if job.get("t0") is None:
        raise JobError("--t0 is required")
    t0 = float(job["t0"])
    kind = job.get("kind") or "gauss"
    radius = float(job["radius"]) if job.get("radius") is not None else None
    nodes = int(job["nodes"]) if job.get("nodes") else None
    if kind == "gauss":
        out = operators.gaussian_semigroup(f, t0, radius, nodes)
    elif kind == "poisson":
        out = operators.poisson_semigroup(f, t0, radius, nodes)
    else:
        raise JobError("--kind must be gauss or poisson")
    return {"meta": out.meta, **sample_report(out, at)}


def cmd_heat(job):
    at, n = eval_points(job)
    if n != 2:
        raise JobError("evaluation points must lie in (x, t)")
    u0 = function_arg(job.get("u0"), 1, name="u0")
    out = operators.heat_solution(u0, int(job.get("nodes") or 2001))
    return {"meta": out.meta, **sample_report(out, at)}


def cmd_hammerstein(job):
    grid = grid_arg(job.get("grid"), "grid")
    n = grid.n
    g = function_arg(job.get("g"), n, name="g")
    F = function_arg(job.get("F"), n, 1, name="F")
    k = kernel_arg(job, n)
    if job.get("L") is None:
        raise JobError("--L (Lipschitz bound of F) is required")
    sol, trace = solvers.hammerstein_solve(
        g, k, F, float(job["L"]), grid, float(job.get("tol") or 1e-8), int(job.get("max_iter") or 200),
        kernel_radius=float(job.get("kernel_radius") or 40.0))
    return {"trace": trace, **sample_report(sol, solution_points(job, grid))}


def cmd_delay(job):
    grid = grid_arg(job.get("grid"), "grid")
    freqs = float_list(job.get("freqs")) or [0.0]
    d = len(freqs)
    alpha = function_arg(job.get("alpha"), 1, name="alpha")
    delta = function_arg(job.get("delta") or "0", 1, name="delta")
    f = function_arg(job.get("f"), 1, d, name="f")
    if d != 1:
        # the expression nonlinearity acts on each retained frequency amplitude
        base = f
        f = ParamFieldFunction(1, d, d, lambda t, x: np.stack(
            [base(t, x[:, j:j + 1])[:, 0] for j in range(d)], axis=-1), label=base.label)
    if job.get("omega_tilde") is None or job.get("L") is None or job.get("r") is None:
        raise JobError("--omega-tilde, --L and --r are required")
    spec = solvers.EvolutionFamilySpec(alpha, delta, float(job["omega_tilde"]), tuple(freqs),
                                       float(job.get("delta0") or 0.0))
    sol, trace = solvers.delay_evolution_solve(spec, f, float(job["L"]), float(job["r"]), grid,
                                               float(job.get("tol") or 1e-8),
                                               int(job.get("max_iter") or 200))
    return {"trace": trace, **sample_report(sol, solution_points(job, grid))}


def cmd_vp(job):
    dim = int(job.get("dim") or 1)
    f = function_arg(job.get("f"), dim)
    test = grid_arg(job.get("test_grid") or ("-3.14159:3.14159:101" if dim == 1 else
                                             "-3.14159:3.14159:21,-3.14159:3.14159:21"), "test-grid")
    ks = [int(k) for k in float_list(job.get("k") or "1,2,4,8,16,32")]
    ms = [int(m) for m in float_list(job.get("m"))] or [None] * len(ks)
    nodes = int(job["nodes"]) if job.get("nodes") else None
    return [approx.vp_report(f, k, test, m, nodes) for k, m in zip(ks, ms)]


def cmd_sampling(job):
    return approx.sampling_experiment(int(job.get("n") or 1), int(job.get("l") or 2),
                                      int(job.get("N") or 8), int(job.get("trials") or 500),
                                      int(job.get("dense") or 64), int(job.get("seed") or 0))


COMMANDS = {
    "mean": (cmd_mean, "mean value over expanding cubes"),
    "coeff": (cmd_coeff, "Bohr-Fourier coefficient at one frequency"),
    "spectrum": (cmd_spectrum, "test candidate frequencies against a threshold"),
    "periods": (cmd_periods, "epsilon-period search and relative density"),
    "recur": (cmd_recur, "sup-differences along a recurrence sequence"),
    "decay": (cmd_decay, "decay of a function on an unbounded set"),
    "split": (cmd_split, "check an asymptotically almost periodic split f = g + q"),
    "convolve": (cmd_convolve, "full or causal convolution with a kernel"),
    "semigroup": (cmd_semigroup, "Gaussian or Poisson semigroup action"),
    "heat": (cmd_heat, "quarter-plane heat solution from initial data"),
    "hammerstein": (cmd_hammerstein, "solve a Hammerstein convolution equation"),
    "delay": (cmd_delay, "solve the delayed evolution equation"),
    "vp": (cmd_vp, "Vallee-Poussin approximation errors"),
    "sampling": (cmd_sampling, "sampling-bound experiment for trig polynomials"),
}

# option name -> help; all default to None so job files can fill them
OPTIONS = {
    "f": "expression in t1..tn (and x1..xp where parameters apply)",
    "g": "expression", "q": "expression", "F": "expression in t1..tn and x1",
    "u0": "initial datum in t1", "alpha": "expression in t1", "delta": "expression in t1",
    "dim": "domain dimension", "domain": "grid lo:hi:count[,...]", "tau": "tau grid",
    "grid": "working grid", "at": "evaluation grid", "points": "evaluation points a,b;c,d", "box": "truncation box grid",
    "test_grid": "grid for sup errors", "eps": "epsilon", "period_eps": "epsilon for the period search",
    "l": "covering length(s)", "T": "comma-separated half-sides", "center": "cube center",
    "nodes": "quadrature nodes per axis", "freq": "frequency vector", "candidates": "points a,b;c,d",
    "threshold": "acceptance threshold", "taus": "shifts a,b;c,d (constant expressions allowed)",
    "mask": "full | orthant | sector:c1:c2", "radii": "increasing radii", "tol": "tolerance",
    "kernel": "gauss:t0 | poisson:t0 | exp_orthant:rate | laplace:scale:rate",
    "kernel_expr": "kernel expression", "kernel_l1": "declared L1 norm", "support": "full|orthant|box",
    "kernel_radius": "kernel truncation radius", "min_mass": "required captured kernel mass",
    "kind": "gauss | poisson", "t0": "semigroup time", "radius": "tail radius",
    "L": "Lipschitz bound", "max_iter": "iteration cap", "omega_tilde": "bound with alpha <= -omega_tilde",
    "delta0": "lower bound of delta", "freqs": "retained heat frequencies", "r": "delay",
    "k": "orders", "m": "second-axis orders", "n": "dimension", "N": "grid nodes per axis",
    "trials": "trial count", "dense": "dense factor", "seed": "random seed",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ap", description="Almost periodic function toolkit.")
    parser.add_argument("--version", action="version", version=f"ap {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--job", help="JSON job file; command-line options override it")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        for opt, h in OPTIONS.items():
            p.add_argument("--" + opt.replace("_", "-"), dest=opt, default=None, help=h)
        if name == "convolve":
            p.add_argument("--causal", action="store_true", default=None)
    return parser


def merge_job(args: argparse.Namespace) -> dict:
    job: dict = {}
    if args.job:
        with open(args.job) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise JobError("job file must hold a JSON object")
        cmd = loaded.pop("command", args.command)
        if cmd != args.command:
            raise JobError(f"job file is for {cmd!r}, not {args.command!r}")
        job.update(loaded)
    for key, value in vars(args).items():
        if key in ("job", "command") or value is None:
            continue
        job[key] = value
    return job


def csv_rows(command: str, report) -> list[list]:
    if command == "vp":
        rows = [["k", "m", "sup_error", "kernel_mass", "nodes"]]
        rows += [[r.k, r.m if r.m is not None else "", repr(r.sup_error), repr(r.kernel_mass), r.nodes]
                 for r in report]
        return rows
    if command == "sampling":
        rows = [["trial", "ratio", "cap"]]
        rows += [[i, repr(v), repr(report.cap)] for i, v in enumerate(report.ratios)]
        return rows
    if command == "periods":
        rows = [["tau", "sup_diff"]]
        rows += [[" ".join(map(repr, t)), repr(float(v))]
                 for t, v in zip(report.accepted.tolist(), report.accepted_values)]
        return rows
    raise JobError(f"CSV output is not available for {command}; use JSON")


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        job = merge_job(args)
        fmt = job.get("format") or "json"
        report = COMMANDS[args.command][0](job)
        if fmt == "csv":
            buf = io.StringIO()
            csv.writer(buf, lineterminator="\n").writerows(csv_rows(args.command, report))
            text = buf.getvalue()
        else:
            echo = {k: v for k, v in job.items() if k not in ("out", "format")}
            text = dumps({"tool": "ap", "version": tool_version(), "command": args.command,
                          "job": echo, "report": report})
    except (solvers.ContractionError, solvers.ConvergenceError, operators.MassFractionError,
            EvaluationFault) as exc:
        print(f"ap {args.command}: numerical refusal: {exc}", file=stderr)
        return EXIT_NUMERICAL
    except (ExprError, JobError, DimensionError, ValueError, KeyError, OSError) as exc:
        print(f"ap {args.command}: invalid job: {exc}", file=stderr)
        return EXIT_INVALID
    if job.get("out"):
        with open(job["out"], "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
