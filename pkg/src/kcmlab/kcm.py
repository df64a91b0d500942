"""Continuous-time constrained Glauber dynamics and hitting-time sampling.

Every site carries a rate-1 clock.  At a ring the site resamples to
occupied with probability p = 1 - q, empty with probability q, but only
when its constraint holds; constrained rings are no-ops.  This rejection
scheme realizes the generator exactly because each site's total ring rate
is 1 regardless of the constraint.  Rings are produced by a single
aggregate exponential clock plus a uniform site choice, which has the same
law as per-site clocks by superposition of Poisson processes.

The inner event loop is compiled with numba when available; a pure-Python
twin with identical semantics serves as fallback and as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .families import UpdateFamily
from .geometry import (
    ALL_HEALTHY,
    BoundaryCondition,
    BoundaryExterior,
    Configuration,
    Region,
    Site,
    boundaries,
    derive_rng,
    outer_boundary,
)

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


@dataclass(frozen=True)
class SimParams:
    family: UpdateFamily
    q: float
    region: Region
    boundary: object = ALL_HEALTHY
    t_max: float = 1e4
    seed: int = 0
    trial: int = 0
    origin: Site = (0, 0)

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0,1), got {self.q}")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.origin not in self.region.sites:
            raise ValueError("origin must lie in the region")


@dataclass(frozen=True)
class HittingResult:
    tau0: float
    censored: bool
    events: int
    legal_updates: int


class Dynamics:
    """Compiled per-site constraint tables for one (family, region, exterior).

    For each site every rule is reduced against the exterior policy: a rule
    touching a healthy exterior site can never fire and is dropped; empty
    exterior sites are simply omitted from the rule's neighbour list.  A rule
    whose neighbour list empties out makes the site unconditionally legal.
    """

    def __init__(self, family: UpdateFamily, region: Region, exterior=ALL_HEALTHY):
        self.family = family
        self.region = region
        self.exterior = exterior
        self.sites: List[Site] = sorted(region.sites)
        self.index = {s: i for i, s in enumerate(self.sites)}
        n = len(self.sites)

        site_ptr = [0]
        rule_ptr = [0]
        neighbors: List[int] = []
        for s in self.sites:
            a, b = s
            for rule in family.rules:
                nbrs = []
                dead = False
                for dx, dy in rule:
                    t = (a + dx, b + dy)
                    if t in self.index:
                        nbrs.append(self.index[t])
                    elif exterior.value_at(t) != 0:
                        dead = True
                        break
                if dead:
                    continue
                neighbors.extend(nbrs)
                rule_ptr.append(len(neighbors))
            site_ptr.append(len(rule_ptr) - 1)
        self.site_ptr = np.asarray(site_ptr, dtype=np.int64)
        self.rule_ptr = np.asarray(rule_ptr, dtype=np.int64)
        self.neighbors = np.asarray(neighbors, dtype=np.int64)
        self.n = n

    def constraint(self, state: np.ndarray, i: int) -> bool:
        for r in range(self.site_ptr[i], self.site_ptr[i + 1]):
            lo, hi = self.rule_ptr[r], self.rule_ptr[r + 1]
            if not state[lo:hi].any():
                return True
        return False

    def sample_state(self, q: float, rng: np.random.Generator) -> np.ndarray:
        """Stationary product start: occupied with probability 1 - q."""
        return (rng.random(self.n) >= q).astype(np.int8)

    def state_to_config(self, state: np.ndarray) -> Configuration:
        empty = frozenset(s for i, s in enumerate(self.sites) if state[i] == 0)
        return Configuration(self.region, empty, self.exterior)


MODE_TAU0 = 0
MODE_PERSISTENCE = 1
MODE_RUN = 2

_STATUS_EXHAUSTED = 0
_STATUS_HIT = 1
_STATUS_TMAX = 2


@njit(cache=True)
def _event_loop(
    state,
    site_ptr,
    rule_ptr,
    neighbors,
    origin,
    q,
    t,
    t_max,
    mode,
    dts,
    picks,
    coins,
):
    """Process one batch of pre-drawn randoms; returns
    (status, t, events, legal, consumed)."""
    events = 0
    legal = 0
    nb = dts.shape[0]
    for k in range(nb):
        t_next = t + dts[k]
        if t_next > t_max:
            return _STATUS_TMAX, t_max, events, legal, k
        t = t_next
        i = picks[k]
        c = False
        for r in range(site_ptr[i], site_ptr[i + 1]):
            ok = True
            for j in range(rule_ptr[r], rule_ptr[r + 1]):
                if state[neighbors[j]] != 0:
                    ok = False
                    break
            if ok:
                c = True
                break
        events += 1
        if not c:
            continue
        legal += 1
        state[i] = 0 if coins[k] < q else 1
        if mode == MODE_PERSISTENCE and i == origin:
            return _STATUS_HIT, t, events, legal, k + 1
        if mode == MODE_TAU0 and i == origin and state[i] == 0:
            return _STATUS_HIT, t, events, legal, k + 1
    return _STATUS_EXHAUSTED, t, events, legal, nb


_BATCH = 1 << 14


def _run(
    dyn: Dynamics,
    state: np.ndarray,
    q: float,
    t_max: float,
    mode: int,
    rng: np.random.Generator,
    origin_idx: int = 0,
    t0: float = 0.0,
) -> Tuple[int, float, int, int]:
    """Drive the event loop until a stop condition; randoms are drawn in
    batches from the caller's stream so trajectories are reproducible."""
    n = dyn.n
    t = t0
    events = 0
    legal = 0
    # expected events to t_max is n * (t_max - t0); start small and grow
    batch = max(64, min(_BATCH, 2 * n))
    while True:
        dts = rng.exponential(1.0 / n, size=batch)
        picks = rng.integers(0, n, size=batch)
        coins = rng.random(batch)
        status, t, ev, lg, _ = _event_loop(
            state,
            dyn.site_ptr,
            dyn.rule_ptr,
            dyn.neighbors,
            origin_idx,
            q,
            t,
            t_max,
            mode,
            dts,
            picks,
            coins,
        )
        events += ev
        legal += lg
        if status != _STATUS_EXHAUSTED:
            return status, t, events, legal
        batch = min(_BATCH, batch * 4)


def make_dynamics(params: SimParams) -> Dynamics:
    return Dynamics(params.family, params.region, params.boundary)


def simulate_tau0(params: SimParams, dyn: Optional[Dynamics] = None) -> HittingResult:
    """Time of first emptiness at the origin from a stationary start."""
    if dyn is None:
        dyn = make_dynamics(params)
    rng = derive_rng(params.seed, params.trial)
    state = dyn.sample_state(params.q, rng)
    origin_idx = dyn.index[params.origin]
    if state[origin_idx] == 0:
        return HittingResult(0.0, False, 0, 0)
    status, t, events, legal = _run(
        dyn, state, params.q, params.t_max, MODE_TAU0, rng, origin_idx
    )
    if status == _STATUS_HIT:
        return HittingResult(t, False, events, legal)
    return HittingResult(params.t_max, True, events, legal)


def simulate_persistence(
    params: SimParams, dyn: Optional[Dynamics] = None
) -> HittingResult:
    """Time of the first legal update at the origin from a stationary start."""
    if dyn is None:
        dyn = make_dynamics(params)
    rng = derive_rng(params.seed, params.trial)
    state = dyn.sample_state(params.q, rng)
    status, t, events, legal = _run(
        dyn, state, params.q, params.t_max, MODE_PERSISTENCE, rng, dyn.index[params.origin]
    )
    if status == _STATUS_HIT:
        return HittingResult(t, False, events, legal)
    return HittingResult(params.t_max, True, events, legal)


def sample_state_at(
    params: SimParams,
    t_obs: float,
    dyn: Optional[Dynamics] = None,
    initial_state: Optional[np.ndarray] = None,
) -> np.ndarray:
    """State vector at a fixed time, no stopping rule."""
    if dyn is None:
        dyn = make_dynamics(params)
    rng = derive_rng(params.seed, params.trial)
    if initial_state is None:
        state = dyn.sample_state(params.q, rng)
    else:
        state = initial_state.astype(np.int8).copy()
    _run(dyn, state, params.q, t_obs, MODE_RUN, rng)
    return state


def observe_trajectory(
    params: SimParams,
    time_grid: List[float],
    observer,
    dyn: Optional[Dynamics] = None,
) -> None:
    """Call ``observer(t, state)`` at each grid time of one trajectory.

    The grid must be increasing; the observer sees the live state array and
    must not mutate it.
    """
    if dyn is None:
        dyn = make_dynamics(params)
    rng = derive_rng(params.seed, params.trial)
    state = dyn.sample_state(params.q, rng)
    t = 0.0
    for t_obs in time_grid:
        if t_obs < t:
            raise ValueError("time grid must be nondecreasing")
        _, t, _, _ = _run(dyn, state, params.q, t_obs, MODE_RUN, rng, 0, t0=t)
        observer(t_obs, state)


@dataclass
class BatchSummary:
    mean: float
    median: float
    censor_fraction: float
    standard_error: float


def batch_tau0(
    params: SimParams,
    trials: int,
    persistence: bool = False,
) -> Tuple[List[HittingResult], BatchSummary]:
    """Independent trials with per-trial streams derived from (seed, trial);
    output order is trial order."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dyn = make_dynamics(params)
    run = simulate_persistence if persistence else simulate_tau0
    results = []
    for trial in range(trials):
        p = SimParams(
            family=params.family,
            q=params.q,
            region=params.region,
            boundary=params.boundary,
            t_max=params.t_max,
            seed=params.seed,
            trial=trial,
            origin=params.origin,
        )
        results.append(run(p, dyn))
    return results, summarize(results)


def summarize(results: List[HittingResult]) -> BatchSummary:
    vals = [r.tau0 for r in results if not r.censored]
    n_cens = sum(1 for r in results if r.censored)
    times = sorted(
        (math.inf if r.censored else r.tau0) for r in results
    )
    median = times[(len(times) - 1) // 2] if len(times) % 2 else (
        math.inf
        if math.isinf(times[len(times) // 2])
        else 0.5 * (times[len(times) // 2 - 1] + times[len(times) // 2])
    )
    if vals:
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    else:
        mean = math.nan
        se = math.nan
    return BatchSummary(
        mean=mean,
        median=float(median),
        censor_fraction=n_cens / len(results),
        standard_error=se,
    )


def east_chain_region(length: int) -> Region:
    """Horizontal chain with the tracked origin (0,0) at the right end and
    the frozen wall just beyond the left end."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return Region.rectangle(-length + 1, 0, 0, 0)


def frozen_boundary_for(family: UpdateFamily, region: Region) -> BoundaryExterior:
    """Default ergodicity-restoring frozen-empty boundaries.

    East chains get an empty left wall, the two-dimensional East model empty
    left and bottom walls, everything else (Duarte included) an empty frame
    on every boundary site.  Without at least one frozen empty the
    all-occupied state is an absorbing trap on a finite box.
    """
    par, perp = boundaries(region)
    if family.name == "east1d":
        assignment = {s: 0 for s in par}
        assignment.update({s: 1 for s in perp - par})
    elif family.name == "east2d":
        below = {s for s in perp if (s[0], s[1] + 1) in region.sites}
        assignment = {s: 0 for s in par | below}
        assignment.update({s: 1 for s in (perp - below) - par})
    else:
        assignment = {s: 0 for s in outer_boundary(region)}
    return BoundaryExterior(BoundaryCondition(region, assignment))
