"""The monotone bootstrap process: closures, infectability, path search.

Two engines compute the same closure: a synchronous stepper (the defining
iteration, kept as the oracle) and a generation-layered work queue that only
re-examines neighbours of newly infected sites.  Both honour finite-volume
semantics: infection lives on the region plus the zero sites of a fixed
boundary condition, and everything beyond stays healthy.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .families import UpdateFamily
from .geometry import BoundaryCondition, Configuration, Region, Site, derive_rng


@dataclass(frozen=True)
class ClosureResult:
    closed: FrozenSet[Site]
    rounds: int
    touched_cap: bool


def synchronous_step(
    family: UpdateFamily,
    region: Region,
    tau: Optional[BoundaryCondition],
    infected: FrozenSet[Site],
) -> FrozenSet[Site]:
    """One parallel update: infect every region site with a fully infected
    translated rule; the boundary condition never changes."""
    if tau is not None and tau.region != region:
        raise ValueError("boundary condition does not match region")
    if not infected <= region.sites:
        raise ValueError("infection set must be contained in the region")
    zeros = tau.zeros if tau is not None else frozenset()
    active = infected | zeros
    new = set(infected)
    for x in region.sites:
        if x in infected:
            continue
        a, b = x
        for rule in family.rules:
            if all((a + dx, b + dy) in active for dx, dy in rule):
                new.add(x)
                break
    return frozenset(new)


def closure_region(
    family: UpdateFamily,
    region: Region,
    tau: Optional[BoundaryCondition],
    seed: Iterable[Site],
) -> ClosureResult:
    """Finite-volume closure [Y]^tau via a work queue, processed in
    generations so the round count matches the synchronous iteration."""
    if tau is not None and tau.region != region:
        raise ValueError("boundary condition does not match region")
    seed = frozenset(seed)
    if not seed <= region.sites:
        raise ValueError("seed must be contained in the region")
    zeros = tau.zeros if tau is not None else frozenset()
    region_sites = region.sites
    offsets = family.offsets()
    rules = family.rules

    infected = set(seed)
    active = infected | set(zeros)
    frontier = set(active)
    rounds = 0
    while frontier:
        candidates = set()
        for (sx, sy) in frontier:
            for (dx, dy) in offsets:
                c = (sx - dx, sy - dy)
                if c in region_sites and c not in infected:
                    candidates.add(c)
        newly = set()
        for x in candidates:
            a, b = x
            for rule in rules:
                if all((a + dx, b + dy) in active for dx, dy in rule):
                    newly.add(x)
                    break
        if not newly:
            break
        rounds += 1
        infected |= newly
        active |= newly
        frontier = newly
    return ClosureResult(frozenset(infected), rounds, False)


def closure_free(
    family: UpdateFamily, seed: Iterable[Site], cap: int
) -> ClosureResult:
    """Closure on Z^2 of a finite seed, computed inside the box of sup-norm
    radius ``cap``; ``touched_cap`` flags that growth reached the cap and the
    result is only a lower bound on the true closure."""
    seed = frozenset(seed)
    if seed:
        radius = max(max(abs(x), abs(y)) for x, y in seed)
        if cap < radius:
            raise ValueError(f"cap {cap} smaller than seed radius {radius}")
    offsets = family.offsets()
    rules = family.rules

    infected = set(seed)
    frontier = set(seed)
    rounds = 0
    while frontier:
        candidates = set()
        for (sx, sy) in frontier:
            for (dx, dy) in offsets:
                c = (sx - dx, sy - dy)
                if (
                    abs(c[0]) <= cap
                    and abs(c[1]) <= cap
                    and c not in infected
                ):
                    candidates.add(c)
        newly = set()
        for x in candidates:
            a, b = x
            for rule in rules:
                if all((a + dx, b + dy) in infected for dx, dy in rule):
                    newly.add(x)
                    break
        if not newly:
            break
        rounds += 1
        infected |= newly
        frontier = newly

    touched = False
    for (sx, sy) in infected:
        for (dx, dy) in offsets:
            if abs(sx - dx) > cap or abs(sy - dy) > cap:
                touched = True
                break
        if touched:
            break
    return ClosureResult(frozenset(infected), rounds, touched)


def is_infectable(
    family: UpdateFamily,
    target: Iterable[Site],
    config: Configuration,
    tau: BoundaryCondition,
) -> bool:
    """Whether every target site ends up infected under the finite-volume
    closure of the configuration's empty set.  Boundary sites of the target
    count as infected iff the boundary condition assigns them 0."""
    target = frozenset(target)
    region = config.region
    allowed = region.sites | set(tau.assignment)
    if not target <= allowed:
        raise ValueError("target not contained in region plus boundary")
    inside = target & region.sites
    border = target - region.sites
    if any(s not in tau.zeros for s in border):
        return False
    if not inside:
        return True
    result = closure_region(family, region, tau, config.empty)
    return inside <= result.closed


_DUARTE_STEPS: Tuple[Site, ...] = ((1, 0), (0, 1), (0, -1))


def duarte_path_exists(
    closed: Iterable[Site], from_x: int, to_x: int
) -> Optional[List[Site]]:
    """Shortest path inside ``closed`` from column x=from_x to column x=to_x
    using steps {+e1, +e2, -e2}; deterministic neighbour order."""
    if from_x > to_x:
        raise ValueError("from column must not exceed to column")
    closed = frozenset(closed)
    starts = sorted(s for s in closed if s[0] == from_x)
    if not starts:
        return None
    parent = {s: None for s in starts}
    queue = deque(starts)
    while queue:
        s = queue.popleft()
        if s[0] == to_x:
            path = []
            cur = s
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            path.reverse()
            return path
        a, b = s
        for dx, dy in _DUARTE_STEPS:
            n = (a + dx, b + dy)
            if n in closed and n not in parent:
                parent[n] = s
                queue.append(n)
    return None


# ---------------------------------------------------------------------------
# Vectorized grid engine for large Bernoulli boxes.


def _shift(a: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """out[i, j] = a[i + dx, j + dy], False beyond the edges."""
    n, m = a.shape
    out = np.zeros_like(a)
    xs0, xs1 = max(0, -dx), min(n, n - dx)
    ys0, ys1 = max(0, -dy), min(m, m - dy)
    if xs0 < xs1 and ys0 < ys1:
        out[xs0:xs1, ys0:ys1] = a[xs0 + dx : xs1 + dx, ys0 + dy : ys1 + dy]
    return out


def grid_step(family: UpdateFamily, infected: np.ndarray) -> np.ndarray:
    """Synchronous bootstrap step on a boolean grid, healthy exterior."""
    acc = None
    for rule in family.rules:
        r = None
        for dx, dy in rule:
            sh = _shift(infected, dx, dy)
            r = sh if r is None else (r & sh)
        acc = r if acc is None else (acc | r)
    return infected | acc


def bootstrap_time_on_grid(
    family: UpdateFamily,
    empty: np.ndarray,
    origin: Tuple[int, int],
    max_steps: Optional[int] = None,
) -> Optional[int]:
    """Number of synchronous steps until the origin cell is infected, or
    None if the process reaches its fixed point first."""
    infected = empty
    if infected[origin]:
        return 0
    steps = 0
    count = int(infected.sum())
    while max_steps is None or steps < max_steps:
        infected = grid_step(family, infected)
        steps += 1
        if infected[origin]:
            return steps
        new_count = int(infected.sum())
        if new_count == count:
            return None
        count = new_count
    return None


def _quantile(sorted_vals: Sequence[float], frac: float) -> float:
    idx = min(len(sorted_vals) - 1, int(math.floor(frac * (len(sorted_vals) - 1) + 0.5)))
    return sorted_vals[idx]


def median_bootstrap_time(
    family: UpdateFamily,
    q: float,
    box: int,
    trials: int,
    seed: int,
    stream: int = 0,
) -> dict:
    """Median first-infection time of the origin over Bernoulli(q) trials on
    the box of half-width ``box``; trials that reach a fixed point without
    infecting the origin are censored and sort last."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0,1], got {q}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if box < 1:
        raise ValueError("box must be >= 1")
    n = 2 * box + 1
    origin = (box, box)
    times: List[float] = []
    for trial in range(trials):
        rng = derive_rng(seed, stream, trial)
        empty = rng.random((n, n)) < q
        t = bootstrap_time_on_grid(family, empty, origin)
        times.append(math.inf if t is None else float(t))
    times_sorted = sorted(times)
    censored = sum(1 for t in times if math.isinf(t))
    return {
        "median": _quantile(times_sorted, 0.5),
        "q1": _quantile(times_sorted, 0.25),
        "q3": _quantile(times_sorted, 0.75),
        "censored": censored,
        "trials": trials,
        "times": times,
    }
