"""Generic branch-and-bound engine.

The engine owns the search loop (queue, incumbent, pruning, lazy-cut
rounds, limits, certificates); problem structure lives in an *adapter*
object supplied by the caller. An adapter must provide:

``root()``
    the root search state (opaque to the engine).
``lower_bound(state) -> float``
    a valid lower bound on the best completion of ``state``
    (``math.inf`` when the state is infeasible).
``branch(state) -> list``
    child states partitioning the completions of ``state``; an empty
    list marks a leaf.
``incumbent_check(state) -> Solution | None``
    a globally feasible solution discovered at this state, if any.

Optional:

``separate(state) -> object | None``
    generate one violated lazy cut for the current relaxation of
    ``state`` (the adapter keeps its own cut pool); the engine calls it
    in rounds, re-bounding after each cut, until it returns ``None`` or
    20 rounds have elapsed.
``objective_is_integral : bool``
    when true the engine tightens node bounds to ``ceil(bound)`` before
    pruning and reporting (valid only for integer-valued objectives).
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

from . import core
from .core import Solution

MAX_CUT_ROUNDS = 20
PRUNE_TOL = 1e-9
BOUND_DRIFT_TOL = 1e-7
CEIL_TOL = 1e-7

BEST_BOUND = "best_bound"
DEPTH_FIRST = "depth_first"


@dataclass
class BnbConfig:
    max_nodes: int = 1_000_000
    time_limit: float | None = None
    gap_tol: float = 0.0
    node_order: str = BEST_BOUND

    def __post_init__(self):
        if self.max_nodes < 0:
            raise ValueError("max_nodes must be nonnegative")
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be nonnegative")
        if self.gap_tol < 0:
            raise ValueError("gap_tol must be nonnegative")
        if self.node_order not in (BEST_BOUND, DEPTH_FIRST):
            raise ValueError(f"unknown node order {self.node_order!r}")


@dataclass
class SolveReport:
    solution: Solution | None
    lower_bound: float
    gap: float
    nodes_processed: int
    cuts_added: int
    status: str


def relative_gap(ub: float, lb: float) -> float:
    """``(ub - lb) / max(|ub|, 1e-10)``, the certificate gap convention."""
    if math.isinf(ub) or math.isinf(lb):
        return math.inf
    return (ub - lb) / max(abs(ub), 1e-10)


def run(adapter, config: BnbConfig | None = None) -> SolveReport:
    """Run branch and bound with the given adapter.

    Determinism: ties in the best-bound queue break on insertion order,
    children are enqueued in the order ``branch`` returns them.
    """
    config = config or BnbConfig()
    t0 = time.monotonic()
    limit = math.inf if config.time_limit is None else config.time_limit
    integral = bool(getattr(adapter, "objective_is_integral", False))
    separate = getattr(adapter, "separate", None)

    def tighten(raw: float) -> float:
        if integral and math.isfinite(raw):
            return float(math.ceil(raw - CEIL_TOL))
        return raw

    incumbent: Solution | None = None
    ub = math.inf
    nodes = 0
    cuts = 0
    seq = 0

    # open nodes: (bound-key, insertion seq, parent bound, state)
    # bound-key is the node's parent bound until the node is evaluated;
    # children inherit the parent's evaluated bound as their key.
    best_first = config.node_order == BEST_BOUND
    open_nodes: list = []

    def push(entry):
        if best_first:
            heapq.heappush(open_nodes, entry)
        else:
            open_nodes.append(entry)

    def pop():
        if best_first:
            return heapq.heappop(open_nodes)
        return open_nodes.pop()

    push((-math.inf, seq, -math.inf, adapter.root()))

    def open_lb() -> float:
        if not open_nodes:
            return ub
        return min(entry[0] for entry in open_nodes)

    status = None
    while open_nodes:
        if nodes >= config.max_nodes:
            status = core.NODE_LIMIT
            break
        if time.monotonic() - t0 > limit:
            status = core.TIME_LIMIT
            break
        key, _, parent_bound, state = pop()
        if incumbent is not None and key >= ub - PRUNE_TOL:
            continue  # pruned while queued
        nodes += 1

        bound = tighten(adapter.lower_bound(state))
        if separate is not None and math.isfinite(bound):
            for _ in range(MAX_CUT_ROUNDS):
                cut = separate(state)
                if cut is None:
                    break
                cuts += 1
                bound = tighten(adapter.lower_bound(state))
                if not math.isfinite(bound):
                    break
        if bound < parent_bound - BOUND_DRIFT_TOL:
            raise RuntimeError(
                f"adapter bound fell below its parent: {bound} < {parent_bound}"
            )

        cand = adapter.incumbent_check(state)
        if cand is not None and cand.objective < ub - PRUNE_TOL:
            incumbent = cand
            ub = float(cand.objective)

        if bound >= ub - PRUNE_TOL:
            continue  # pruned by bound
        if incumbent is not None and config.gap_tol > 0:
            if relative_gap(ub, min(bound, open_lb())) <= config.gap_tol:
                seq += 1
                push((bound, seq, bound, state))  # keep the certificate valid
                status = core.GAP_LIMIT
                break
        children = adapter.branch(state)
        if not best_first:
            children = list(reversed(children))  # dive into the first child
        for child in children:
            seq += 1
            push((bound, seq, bound, child))

    if status is None:
        status = core.OPTIMAL if incumbent is not None else core.INFEASIBLE

    if status == core.OPTIMAL:
        lb = ub
    elif status == core.INFEASIBLE:
        lb = math.inf
    else:
        lb = min(open_lb(), ub)
    gap = relative_gap(ub, lb) if incumbent is not None else math.inf
    if incumbent is not None and status == core.OPTIMAL:
        incumbent.status = core.OPTIMAL
    return SolveReport(
        solution=incumbent,
        lower_bound=lb,
        gap=gap,
        nodes_processed=nodes,
        cuts_added=cuts,
        status=status,
    )
