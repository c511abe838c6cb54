"""Command-line harness for the toolkit.

Subcommands: ``gen`` (random instances plus planted-signal sidecars),
``solve`` (one instance, one method, JSON report), ``analyze``
(recovery-condition report), ``phase`` (success-rate grids as CSV),
``portfolio`` (CSV-directory ingestion and the sparse selection model)
and ``export-lp`` (big-M model in LP file format).

Determinism contract: the same command line (including ``--seed``)
produces byte-identical output, except for the ``time_ms`` fields.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis, core, heuristics, models, surrogate
from .bnb import BnbConfig
from .core import ProblemInstance

METHODS = (
    "bnb", "covering", "bigm", "bp-lp", "ista", "fista", "homotopy",
    "spg", "admm", "omp", "cosamp", "iht", "sl0", "altproj", "oracle",
)

CSV_HEADER = ("instance_id,method,m,n,k,noise,status,objective,cardinality,"
              "lower_bound,gap,nodes,iterations,time_ms,recovered")

# support tolerance for the recovered flag: iterative solvers park
# genuinely-zero coordinates at roundoff level, not at exact zero
RECOVERED_TOL = 1e-6


# --------------------------------------------------------------------------
# instance generation


def _parity_matrix(rng, m, n):
    """Random 0/1 matrix with fixed row weight and full row rank."""
    weight = min(8, n)
    for _ in range(100):
        A = np.zeros((m, n))
        for i in range(m):
            A[i, rng.choice(n, size=weight, replace=False)] = 1.0
        if core.rank_by_elimination(A) == m:
            return A
    raise RuntimeError("no full-row-rank draw in 100 resamples")


def generate_instance(kind, m, n, k, noise_sigma, seed, problem="cardmin",
                      delta=0.0, lam=None, residual_norm="l2"):
    """Sample ``(instance, planted signal)`` from a seeded generator.

    ``kind`` is ``"gaussian"`` (i.i.d. standard normal) or ``"parity"``
    (0/1 rows of weight ``min(8, n)``, full row rank by resampling).
    The signal has a uniformly random size-``k`` support with standard
    normal entries and ``b = A @ xhat`` plus optional Gaussian noise.
    """
    if k > n:
        raise ValueError("planted sparsity k must not exceed n")
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        A = rng.standard_normal((m, n))
    elif kind == "parity":
        A = _parity_matrix(rng, m, n)
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    support = np.sort(rng.choice(n, size=k, replace=False))
    xhat = np.zeros(n)
    xhat[support] = rng.standard_normal(k)
    b = A @ xhat
    if noise_sigma > 0:
        b = b + noise_sigma * rng.standard_normal(m)
    if problem == "cardmin":
        inst = ProblemInstance(A, b, core.CARDMIN, delta=delta,
                               residual_norm=residual_norm)
    elif problem == "cardcons":
        inst = ProblemInstance(A, b, core.CARDCONS, k=k)
    elif problem == "cardreg":
        if lam is None:
            raise ValueError("cardreg generation needs --lambda")
        inst = ProblemInstance(A, b, core.CARDREG, lam=lam)
    else:
        raise ValueError(f"unknown problem {problem!r}")
    return inst, xhat


# --------------------------------------------------------------------------
# method dispatch


def _bnb_config(args) -> BnbConfig | None:
    overrides = {}
    if getattr(args, "max_nodes", None) is not None:
        overrides["max_nodes"] = args.max_nodes
    if getattr(args, "time_limit_s", None) is not None:
        overrides["time_limit"] = args.time_limit_s
    if getattr(args, "gap_tol", None) is not None:
        overrides["gap_tol"] = args.gap_tol
    return BnbConfig(**overrides) if overrides else None


def _finite(v):
    return None if v is None or not math.isfinite(v) else float(v)


def _result(status, objective, x, lower_bound=None, gap=None, nodes=None,
            iterations=None, time_ms=0.0):
    if x is None:
        supp, card, xs = [], 0, None
    else:
        supp, card = core.support_of(np.asarray(x, dtype=float))
        xs = [float(v) for v in x]
    return {
        "status": status,
        "objective": _finite(objective),
        "x": xs,
        "support": supp,
        "cardinality": card,
        "lower_bound": _finite(lower_bound),
        "gap": _finite(gap),
        "nodes": nodes,
        "iterations": iterations,
        "time_ms": round(float(time_ms), 3),
    }


def run_method(inst: ProblemInstance, method: str, *, bigm=None, lam=None,
               k=None, config: BnbConfig | None = None) -> dict:
    """Run one solver on one instance; normalized report dict.

    ``lam``/``k`` override (or supply) the surrogate weight and the
    sparsity target for methods that need one and the instance does not
    carry it; ``bigm`` is the big-M constant for ``method="bigm"``.
    """
    A, b = inst.A.array, inst.b
    lam = lam if lam is not None else inst.lam
    k = k if k is not None else inst.k
    t0 = time.perf_counter()

    def done(**kw):
        return _result(time_ms=(time.perf_counter() - t0) * 1e3, **kw)

    if method in ("bnb", "covering", "bigm"):
        if method == "bnb":
            marker = models.SupportBnb()
        elif method == "covering":
            marker = models.Covering()
        else:
            if bigm is None:
                raise ValueError("method bigm needs --bigm")
            marker = models.BigM(bigm)
        rep = models.solve_exact(inst, marker, config)
        sol = rep.solution
        return done(status=rep.status,
                    objective=None if sol is None else sol.objective,
                    x=None if sol is None else sol.x,
                    lower_bound=rep.lower_bound, gap=rep.gap,
                    nodes=rep.nodes_processed)
    if method == "oracle":
        sol = analysis.oracle_solve(inst)
        return done(status=sol.status, objective=sol.objective, x=sol.x,
                    lower_bound=sol.objective, gap=0.0)
    if method == "bp-lp":
        sol = surrogate.bp_lp(A, b)
        return done(status=sol.status, objective=sol.objective, x=sol.x)
    if method in ("ista", "fista"):
        if lam is None:
            raise ValueError(f"method {method} needs --lambda")
        sol = surrogate.l1ls_proxgrad(
            A, b, lam, surrogate.SolverOptions(accelerate=method == "fista"))
        return done(status=sol.status, objective=sol.objective, x=sol.x)
    if method == "homotopy":
        path = surrogate.homotopy_path(A, b, lambda_min=lam or 0.0)
        if lam:
            x = surrogate.homotopy_solution_at(path, lam)
            r = A @ x - b
            obj = core.norm(x, "l1") + float(r @ r) / (2.0 * lam)
        else:
            x = path[-1].x
            obj = core.norm(x, "l1")
        return done(status=core.OPTIMAL, objective=obj, x=x,
                    iterations=len(path))
    if method == "spg":
        if lam is None:
            raise ValueError("method spg needs --lambda (mapped to its l1 budget)")
        tau = surrogate.param_equivalence(A, b, lam)[0]
        sol = surrogate.lasso_spg(A, b, tau)
        return done(status=sol.status, objective=sol.objective, x=sol.x)
    if method == "admm":
        sol = surrogate.bp_admm(A, b)
        return done(status=sol.status, objective=sol.objective, x=sol.x)
    if method == "omp":
        delta = None
        if inst.kind == core.CARDMIN:
            scale = max(1.0, core.norm(b, inst.residual_norm))
            delta = inst.delta if inst.delta > 0 else 1e-9 * scale
        if k is None and delta is None:
            raise ValueError("method omp needs --k or a residual target")
        sol, trace = heuristics.omp(A, b, k=k, delta=delta,
                                    residual_norm=inst.residual_norm)
        return done(status=sol.status, objective=sol.objective, x=sol.x,
                    iterations=max(0, len(trace.residuals) - 1))
    if method == "cosamp":
        if k is None:
            raise ValueError("method cosamp needs --k")
        sol, trace = heuristics.cosamp(A, b, k)
        return done(status=sol.status, objective=sol.objective, x=sol.x,
                    iterations=max(0, len(trace.residuals) - 1))
    if method == "iht":
        if inst.kind == core.CARDCONS or (inst.kind == core.CARDMIN and k is not None):
            mode = heuristics.Cons(k)
        elif inst.kind == core.CARDREG:
            mode = heuristics.Reg(inst.lam)
        else:
            raise ValueError("method iht needs a cardinality bound or cardreg instance")
        sol, trace = heuristics.iht(A, b, mode)
        return done(status=sol.status, objective=sol.objective, x=sol.x,
                    iterations=max(0, len(trace.residuals) - 1))
    if method == "sl0":
        sol = heuristics.sl0(A, b)
        return done(status=sol.status, objective=sol.objective, x=sol.x)
    if method == "altproj":
        if k is None:
            raise ValueError("method altproj needs --k")
        sol = heuristics.altproj(A, b, k)
        return done(status=sol.status, objective=sol.objective, x=sol.x)
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# experiment grids


@dataclass
class ExperimentGrid:
    """One phase-transition experiment: a (m, k) grid at fixed n."""

    n: int
    m_values: list
    k_values: list
    trials: int
    method: str
    seed: int
    noise_sigma: float = 0.0
    kind: str = "gaussian"
    problem: str = "cardmin"
    delta: float = 0.0
    lam: float | None = None

    def __post_init__(self):
        if self.n <= 0 or self.trials < 1:
            raise ValueError("grid sizes and trials must be positive")
        if any(v <= 0 for v in self.m_values) or any(v <= 0 for v in self.k_values):
            raise ValueError("all grid values must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


def _csv_num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return f"{v:.12g}"


def _recovered(x, planted) -> bool:
    if x is None:
        return False
    supp = core.support_of(np.asarray(x, dtype=float), RECOVERED_TOL)[0]
    return supp == core.support_of(planted, RECOVERED_TOL)[0]


def run_experiment(grid: ExperimentGrid, config: BnbConfig | None = None) -> str:
    """All grid cells x trials as CSV, with per-cell success-rate
    summary lines (prefixed ``#``) appended.

    Per-trial seeds are ``grid.seed + trial``; per-run failures become
    ``status=error`` rows and never abort the grid.
    """
    lines = [CSV_HEADER]
    summary = []
    for m in grid.m_values:
        for k in grid.k_values:
            hits = 0
            for t in range(grid.trials):
                seed_t = grid.seed + t
                iid = f"{grid.kind}-m{m}-n{grid.n}-k{k}-s{seed_t}"
                try:
                    inst, planted = generate_instance(
                        grid.kind, m, grid.n, k, grid.noise_sigma, seed_t,
                        problem=grid.problem, delta=grid.delta, lam=grid.lam)
                    res = run_method(inst, grid.method, lam=grid.lam, k=k,
                                     config=config)
                    rec = _recovered(res["x"], planted)
                except Exception:
                    res = _result("error", None, None)
                    rec = False
                hits += rec
                lines.append(",".join([
                    iid, grid.method, str(m), str(grid.n), str(k),
                    _csv_num(grid.noise_sigma), res["status"],
                    _csv_num(res["objective"]), _csv_num(res["cardinality"]),
                    _csv_num(res["lower_bound"]), _csv_num(res["gap"]),
                    _csv_num(res["nodes"]), _csv_num(res["iterations"]),
                    _csv_num(res["time_ms"]), "true" if rec else "false",
                ]))
            summary.append(f"# success_rate,m={m},k={k},{hits / grid.trials:.6g}")
    return "\n".join(lines + summary) + "\n"


# --------------------------------------------------------------------------
# subcommand handlers


def _emit(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _load_instance(path: str) -> ProblemInstance:
    with open(path) as fh:
        return ProblemInstance.from_json(fh.read())


def _cmd_gen(args) -> int:
    inst, xhat = generate_instance(
        args.kind, args.m, args.n, args.k, args.noise, args.seed,
        problem=args.problem, delta=args.delta, lam=args.lam,
        residual_norm=args.residual_norm)
    _emit(inst.to_json() + "\n", args.out)
    sidecar = json.dumps({
        "seed": args.seed,
        "support": core.support_of(xhat)[0],
        "x": [float(v) for v in xhat],
    }, indent=1)
    if args.signal_out:
        _emit(sidecar + "\n", args.signal_out)
    elif args.out not in (None, "-"):
        base = args.out[:-5] if args.out.endswith(".json") else args.out
        _emit(sidecar + "\n", base + ".signal.json")
    return 0


def _cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    res = run_method(inst, args.method, bigm=args.bigm, lam=args.lam,
                     k=args.k, config=_bnb_config(args))
    _emit(json.dumps(res, indent=1) + "\n", args.out)
    return 0


def _cmd_analyze(args) -> int:
    inst = _load_instance(args.instance)
    k = args.k if args.k is not None else (inst.k or 1)
    rep = analysis.recovery_report(inst.A.array, k)
    doc = {
        "m": inst.m,
        "n": inst.n,
        "k": k,
        "mu": rep.mu,
        "spark": None if isinstance(rep.spark, analysis.NoCircuit) else rep.spark,
        "nsc": rep.nsc,
        "ric": rep.ric,
        "conditions": rep.conditions,
    }
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return 0


def _cmd_phase(args) -> int:
    grid = ExperimentGrid(
        n=args.n, m_values=args.m_values, k_values=args.k_values,
        trials=args.trials, method=args.method, seed=args.seed,
        noise_sigma=args.noise, kind=args.kind, problem=args.problem,
        delta=args.delta, lam=args.lam)
    _emit(run_experiment(grid, config=_bnb_config(args)), args.out)
    return 0


def _cmd_portfolio(args) -> int:
    folder = args.data_dir.rstrip("/")
    Q = np.loadtxt(f"{folder}/covariance.csv", delimiter=",", ndmin=2)
    mu = np.loadtxt(f"{folder}/returns.csv", delimiter=",", ndmin=1)
    n = mu.size
    asym = float(np.max(np.abs(Q - Q.T), initial=0.0))
    if asym > 1e-8:
        print(f"warning: covariance asymmetry {asym:.3g}; symmetrizing",
              file=sys.stderr)
    Q = 0.5 * (Q + Q.T)
    try:
        x0 = np.loadtxt(f"{folder}/positions.csv", delimiter=",", ndmin=1)
    except OSError:
        x0 = None
    u_plus = np.full(n, args.u)
    u_minus = np.full(n, args.u_minus)
    exposure = args.exposure or (0.0, float(np.sum(u_plus)),
                                 0.0, float(np.sum(u_minus)))
    inst = models.PortfolioInstance(
        Q=Q, mu=mu, lam=args.lam, k=args.k,
        theta_plus=np.full(n, args.theta),
        theta_minus=np.full(n, args.theta_minus),
        u_plus=u_plus, u_minus=u_minus,
        exposure=tuple(exposure), x0=x0, H=args.H)
    t0 = time.perf_counter()
    rep = models.solve_portfolio(inst, _bnb_config(args))
    ms = (time.perf_counter() - t0) * 1e3
    sol = rep.solution
    positions = []
    if sol is not None:
        positions = [{"asset": int(i), "value": float(v)}
                     for i, v in enumerate(sol.x) if abs(v) > 1e-9]
    doc = {
        "status": rep.status,
        "objective": None if sol is None else _finite(sol.objective),
        "lower_bound": _finite(rep.lower_bound),
        "gap": _finite(rep.gap),
        "nodes": rep.nodes_processed,
        "time_ms": round(ms, 3),
        "n": n,
        "k": args.k,
        "H": args.H,
        "positions": positions,
    }
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return 0


def _cmd_export_lp(args) -> int:
    inst = _load_instance(args.instance)
    model = models.build_bigm_cardmin(inst, args.bigm)
    _emit(models.export_lp_file(model) + "\n", args.out)
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardopt",
        description="cardinality optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="sample a random instance")
    gen.add_argument("--kind", choices=("gaussian", "parity"), default="gaussian")
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k", type=int, required=True,
                     help="planted sparsity (and the cardcons budget)")
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--problem", choices=("cardmin", "cardcons", "cardreg"),
                     default="cardmin")
    gen.add_argument("--delta", type=float, default=0.0)
    gen.add_argument("--lambda", dest="lam", type=float, default=None)
    gen.add_argument("--residual-norm", choices=("l1", "l2", "linf"),
                     default="l2")
    gen.add_argument("--out", default="-")
    gen.add_argument("--signal-out", default=None)
    gen.set_defaults(func=_cmd_gen)

    solve = sub.add_parser("solve", help="run one method on one instance")
    solve.add_argument("--instance", required=True)
    solve.add_argument("--method", choices=METHODS, required=True)
    solve.add_argument("--bigm", type=float, default=None)
    solve.add_argument("--lambda", dest="lam", type=float, default=None)
    solve.add_argument("--k", type=int, default=None)
    solve.add_argument("--max-nodes", type=int, default=None)
    solve.add_argument("--time-limit-s", type=float, default=None)
    solve.add_argument("--gap-tol", type=float, default=None)
    solve.add_argument("--out", default="-")
    solve.set_defaults(func=_cmd_solve)

    analyze = sub.add_parser("analyze", help="recovery-condition report")
    analyze.add_argument("--instance", required=True)
    analyze.add_argument("--k", type=int, default=None)
    analyze.add_argument("--out", default="-")
    analyze.set_defaults(func=_cmd_analyze)

    phase = sub.add_parser("phase", help="success-rate grid as CSV")
    phase.add_argument("--n", type=int, required=True)
    phase.add_argument("--m-values", type=_int_list, required=True)
    phase.add_argument("--k-values", type=_int_list, required=True)
    phase.add_argument("--trials", type=int, default=50)
    phase.add_argument("--method", choices=METHODS, required=True)
    phase.add_argument("--seed", type=int, default=0)
    phase.add_argument("--noise", type=float, default=0.0)
    phase.add_argument("--kind", choices=("gaussian", "parity"), default="gaussian")
    phase.add_argument("--problem", choices=("cardmin", "cardcons", "cardreg"),
                       default="cardmin")
    phase.add_argument("--delta", type=float, default=0.0)
    phase.add_argument("--lambda", dest="lam", type=float, default=None)
    phase.add_argument("--max-nodes", type=int, default=None)
    phase.add_argument("--time-limit-s", type=float, default=None)
    phase.add_argument("--gap-tol", type=float, default=None)
    phase.add_argument("--out", default="-")
    phase.set_defaults(func=_cmd_phase)

    port = sub.add_parser("portfolio", help="sparse long/short selection")
    port.add_argument("--data-dir", required=True,
                      help="covariance.csv, returns.csv, optional positions.csv")
    port.add_argument("--k", type=int, required=True)
    port.add_argument("--H", type=int, default=None)
    port.add_argument("--lambda", dest="lam", type=float, default=1.0)
    port.add_argument("--theta", type=float, default=0.01,
                      help="minimum long position")
    port.add_argument("--theta-minus", type=float, default=0.0)
    port.add_argument("--u", type=float, default=1.0, help="long position cap")
    port.add_argument("--u-minus", type=float, default=0.0)
    port.add_argument("--exposure", type=float, nargs=4, default=None,
                      metavar=("LP", "UP", "LM", "UM"),
                      help="gross exposure intervals; default is vacuous")
    port.add_argument("--max-nodes", type=int, default=None)
    port.add_argument("--time-limit-s", type=float, default=None)
    port.add_argument("--gap-tol", type=float, default=None)
    port.add_argument("--out", default="-")
    port.set_defaults(func=_cmd_portfolio)

    export = sub.add_parser("export-lp", help="write the big-M model as .lp")
    export.add_argument("--instance", required=True)
    export.add_argument("--bigm", type=float, required=True)
    export.add_argument("--out", default="-")
    export.set_defaults(func=_cmd_export_lp)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
