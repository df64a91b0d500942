"""Droplet analysis for the Duarte model on a triangular stack of columns.

The working region V is a union of N columns of strictly decreasing height
whose last column is centred on the origin.  A deterministic pass over the
columns converts a configuration into an arrow profile: column k earns an
up arrow when its capped column contains an infectable vertical interval
of length at least ell, in which case the algorithm heals a whole range of
columns (the droplet) and moves on.  Coarse-graining the arrows over
blocks yields the 0/1 profiles whose East-like paths are validated here.
"""

from __future__ import annotations

import decimal
import math
import warnings
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .bootstrap import closure_region, duarte_path_exists
from .families import builtin_family
from .geometry import (
    BoundaryCondition,
    BoundaryExterior,
    Configuration,
    Region,
    Site,
    derive_rng,
    outer_boundary,
)
from .kcm import SimParams, make_dynamics, observe_trajectory

UP = "U"
DOWN = "D"


@dataclass(frozen=True)
class DuarteScales:
    q: float
    eps: float
    ell: int
    N: int
    n1: int
    n2: int

    def __post_init__(self):
        for name in ("ell", "N", "n1", "n2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")

    @property
    def m(self) -> int:
        """Coarse block size."""
        return 4 * self.n1 * self.n2

    @property
    def M(self) -> int:
        """Number of coarse blocks (last one possibly padded)."""
        return max(1, math.ceil(self.N / self.m))

    @classmethod
    def from_formulas(cls, q: float, eps: float) -> "DuarteScales":
        """The asymptotic scale choices; impractical except for tiny 1/q."""
        if not 0.0 < q < 1.0 or not 0.0 < eps < 1.0:
            raise ValueError("q and eps must lie in (0,1)")
        def floor_exactish(x: float) -> int:
            # guard against values like 999999.9999999999 produced by float
            # rounding of an integer-valued formula
            r = round(x)
            if abs(x - r) < 1e-9 * max(1.0, abs(x)):
                return int(r)
            return math.floor(x)

        lg = math.log(1.0 / q)
        ell = floor_exactish(lg / (eps * q))
        exponent = eps * lg * lg / q
        if exponent < 700.0:
            big_n = floor_exactish(math.exp(exponent))
        else:  # beyond float range: evaluate with arbitrary precision
            with decimal.localcontext() as ctx:
                ctx.prec = 50
                big_n = int(decimal.Decimal(exponent).exp().to_integral_value(
                    rounding=decimal.ROUND_FLOOR
                ))
        n1 = floor_exactish(eps * lg * lg / (2.0 * q))
        n2 = floor_exactish(q ** -6)
        if big_n > 2 ** 64:
            warnings.warn("N exceeds 2^64; these scales are not materializable")
        if min(ell, big_n, n1, n2) < 1:
            raise ValueError("degenerate scales; use explicit toy values")
        return cls(q=q, eps=eps, ell=ell, N=big_n, n1=n1, n2=n2)

    @classmethod
    def toy(cls, ell: int, N: int, n1: int = 1, n2: int = 1,
            q: float = 0.5, eps: float = 0.1) -> "DuarteScales":
        return cls(q=q, eps=eps, ell=ell, N=N, n1=n1, n2=n2)


class ColumnGeometry:
    """Columns C_i = {(i, j) : |j| < N^2 - (i-1)N} - N e1, i = 1..N.

    Heights strictly decrease in i; the origin is the midpoint of the last
    column.  C̄_i adds the two vertical cap sites of column i.
    """

    def __init__(self, N: int):
        if N < 1:
            raise ValueError("N must be >= 1")
        self.N = N
        self.columns: Dict[int, FrozenSet[Site]] = {}
        self.caps: Dict[int, FrozenSet[Site]] = {}
        for i in range(1, N + 1):
            h = N * N - (i - 1) * N
            x = i - N
            self.columns[i] = frozenset((x, j) for j in range(-h + 1, h))
            self.caps[i] = frozenset({(x, h), (x, -h)})
        self.region = Region.column_union(self.columns.values())
        self._prefix: Dict[int, Region] = {}

    def prefix_window(self, k: int) -> Region:
        """V_{1,k}, cached; closures never look rightward, so column k's
        content under the full-V closure equals its content under V_{1,k}."""
        if k not in self._prefix:
            self._prefix[k] = self.window(1, k)
        return self._prefix[k]

    def height(self, i: int) -> int:
        return N_height(self.N, i)

    def column_x(self, i: int) -> int:
        return i - self.N

    def capped_column(self, i: int) -> FrozenSet[Site]:
        return self.columns[i] | self.caps[i]

    def window(self, i: int, j: int) -> Region:
        """V_{i,j}, the union of columns i..j."""
        if not 1 <= i <= j <= self.N:
            raise ValueError("need 1 <= i <= j <= N")
        return Region.column_union(self.columns[k] for k in range(i, j + 1))

    def initial_tau(self) -> BoundaryCondition:
        """tau_par == 1 (healthy left wall), tau_perp == 0 (empty caps)."""
        return BoundaryCondition.split(self.region, par_value=1, perp_value=0)


def N_height(N: int, i: int) -> int:
    return N * N - (i - 1) * N


@dataclass(frozen=True)
class DropletRecord:
    k: int
    xi: int
    range: int
    columns: FrozenSet[Site]


@dataclass(frozen=True)
class ArrowProfile:
    phi: Tuple[str, ...]
    droplets: Dict[int, DropletRecord]
    history: Optional[List[Tuple[FrozenSet[Site], Tuple[Tuple[Site, int], ...]]]] = None

    @property
    def n_up(self) -> int:
        return sum(1 for a in self.phi if a == UP)

    def phi_string(self) -> str:
        return "".join(self.phi)


_DUARTE = builtin_family("duarte")


def _column_has_long_interval(
    geometry: ColumnGeometry,
    k: int,
    empties: FrozenSet[Site],
    tau: Dict[Site, int],
    ell: int,
) -> bool:
    """Whether the closure of the current state contains a vertical run of
    length >= ell inside the capped column k (caps count when their tau is 0).

    Duarte rules never look east, so the closure is taken on the prefix
    window V_{1,k}; columns beyond k cannot influence column k.
    """
    window = geometry.prefix_window(k)
    assignment = {s: tau.get(s, 1) for s in outer_boundary(window)}
    bc = BoundaryCondition(window, assignment)
    closed = closure_region(_DUARTE, window, bc, empties & window.sites).closed
    x = geometry.column_x(k)
    h = geometry.height(k)
    ys = {j for j in range(-h + 1, h) if (x, j) in closed}
    ys.update(j for j in (-h, h) if tau.get((x, j), 1) == 0)
    best = 0
    run = 0
    for j in range(-h, h + 1):
        if j in ys:
            run += 1
            best = max(best, run)
        else:
            run = 0
    return best >= ell


def _strip_prefix(
    geometry: ColumnGeometry,
    empties: FrozenSet[Site],
    tau: Dict[Site, int],
    xi: int,
) -> Tuple[FrozenSet[Site], Dict[Site, int]]:
    """Remove every empty (in omega and tau) from capped columns i < xi."""
    if xi <= 1:
        return empties, tau
    drop = set()
    healed_caps = {}
    for i in range(1, xi):
        drop |= geometry.columns[i]
        for c in geometry.caps[i]:
            healed_caps[c] = 1
    new_tau = dict(tau)
    new_tau.update(healed_caps)
    return empties - drop, new_tau


def run_droplet_algorithm(
    omega: Configuration,
    geometry: ColumnGeometry,
    ell: int,
    self_check: bool = True,
    record_history: bool = False,
) -> ArrowProfile:
    """One deterministic left-to-right pass producing the arrow profile.

    State is the pair (empty set on V, tau on the boundary); an up arrow at
    column k heals capped columns xi_k..k in both parts.  xi_k is the
    largest prefix cut that preserves the long-interval property; the cut
    test is monotone, so binary search applies (cross-checked against the
    linear scan when self_check is set).
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if omega.region != geometry.region:
        raise ValueError("configuration region does not match the geometry")
    empties = omega.empty
    tau = {s: v for s, v in geometry.initial_tau().assignment.items()}

    phi: List[str] = []
    droplets: Dict[int, DropletRecord] = {}
    history = [] if record_history else None
    if record_history:
        history.append((empties, tuple(sorted(tau.items()))))

    for k in range(1, geometry.N + 1):
        def holds(xi: int) -> bool:
            e, t = _strip_prefix(geometry, empties, tau, xi)
            return _column_has_long_interval(geometry, k, e, t, ell)

        if not holds(1):
            phi.append(DOWN)
            if record_history:
                history.append((empties, tuple(sorted(tau.items()))))
            continue

        lo, hi = 1, k  # holds(lo) is true; find the largest true
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if holds(mid):
                lo = mid
            else:
                hi = mid - 1
        xi_k = lo
        if self_check:
            linear = max(x for x in range(1, k + 1) if holds(x))
            if linear != xi_k:
                xi_k = linear  # monotonicity violated; trust the scan
                warnings.warn("xi search monotonicity violation; used linear scan")

        healed = set()
        for i in range(xi_k, k + 1):
            healed |= geometry.columns[i]
            for c in geometry.caps[i]:
                tau[c] = 1
        empties = empties - healed
        columns = frozenset().union(*(geometry.capped_column(i) for i in range(xi_k, k + 1)))
        droplets[k] = DropletRecord(k=k, xi=xi_k, range=k - xi_k, columns=columns)
        phi.append(UP)
        if record_history:
            history.append((empties, tuple(sorted(tau.items()))))

    return ArrowProfile(phi=tuple(phi), droplets=droplets, history=history)


def event_B1(profile: ArrowProfile, n: int) -> bool:
    """At least n up arrows."""
    return profile.n_up >= n


def event_B2(
    omega: Configuration,
    profile: ArrowProfile,
    geometry: ColumnGeometry,
    n: int,
) -> Optional[Tuple[int, int, List[Site]]]:
    """First (i, j, path) witness of a crossing over down-arrow columns.

    Scans i < j with j - i >= n - 1 and all arrows down on [i, j]; for each
    window the closure of omega's empties inside V_{i,j} is taken with a
    healthy left wall and empty caps, and searched for a rightward path.
    """
    for i in range(1, geometry.N + 1):
        if profile.phi[i - 1] == UP:
            continue
        for j in range(i + 1, geometry.N + 1):
            if profile.phi[j - 1] == UP:
                break
            if j - i < n - 1:
                continue
            window = geometry.window(i, j)
            bc = BoundaryCondition.split(window, par_value=1, perp_value=0)
            seed = omega.empty & window.sites
            closed = closure_region(_DUARTE, window, bc, seed).closed
            path = duarte_path_exists(
                closed, geometry.column_x(i), geometry.column_x(j)
            )
            if path is not None:
                return (i, j, path)
    return None


@dataclass(frozen=True)
class CoarseProfile:
    eta: Tuple[int, ...]
    padded: bool


def eta_project(profile: ArrowProfile, scales: DuarteScales) -> CoarseProfile:
    """Block-wise OR of arrows over consecutive blocks of size m."""
    m = scales.m
    phi = profile.phi
    padded = len(phi) % m != 0
    eta = []
    for start in range(0, len(phi), m):
        block = phi[start : start + m]
        eta.append(1 if UP in block else 0)
    return CoarseProfile(eta=tuple(eta), padded=padded)


def validate_coarse_path(
    sequence: Sequence[Sequence[int]], n1: int
) -> Dict[str, object]:
    """Check the three path properties of a coarse-profile sequence.

    (1) starts all-zero and ends with the last coordinate set; (2) at most
    n1 ones throughout; (3) each step flips exactly one coordinate, and a
    flip at i > 1 requires the left neighbour to be 1 beforehand.
    """
    seq = [tuple(int(v) for v in s) for s in sequence]
    violations: List[str] = []
    if not seq:
        return {"passed": False, "violations": ["empty sequence"]}
    M = len(seq[0])
    if any(len(s) != M for s in seq):
        violations.append("profiles have inconsistent length")
    if any(seq[0]):
        violations.append("property 1: initial profile not all-zero")
    if seq[-1][-1] != 1:
        violations.append("property 1: final profile does not set the last block")
    for t, s in enumerate(seq):
        if sum(s) > n1:
            violations.append(f"property 2: step {t} carries {sum(s)} > {n1} ones")
    for t in range(1, len(seq)):
        prev, cur = seq[t - 1], seq[t]
        flips = [i for i in range(M) if prev[i] != cur[i]]
        if len(flips) != 1:
            violations.append(f"property 3: step {t} flips {len(flips)} coordinates")
            continue
        i = flips[0]
        if i > 0 and prev[i - 1] != 1:
            violations.append(
                f"property 3: step {t} flips coordinate {i + 1} without a set left neighbour"
            )
    return {"passed": not violations, "violations": violations}


def check_droplet_disjointness(profile: ArrowProfile) -> bool:
    recs = list(profile.droplets.values())
    for a in range(len(recs)):
        for b in range(a + 1, len(recs)):
            if recs[a].columns & recs[b].columns:
                return False
    return True


def check_restriction_identity(profile: ArrowProfile, geometry: ColumnGeometry) -> bool:
    """Off the union of droplets, every recorded state equals the initial one."""
    if profile.history is None:
        raise ValueError("profile was run without history recording")
    e0, t0 = profile.history[0]
    t0 = dict(t0)
    for step, (e, t) in enumerate(profile.history[1:], start=1):
        healed = frozenset().union(
            *(r.columns for r in profile.droplets.values() if r.k <= step)
        ) if profile.droplets else frozenset()
        if (e0 - healed) != (e - healed):
            return False
        t = dict(t)
        for s, v in t0.items():
            if s not in healed and t[s] != v:
                return False
    return True


@dataclass
class TrajectoryReport:
    first_b1: Optional[float]
    first_b2: Optional[float]
    max_n_up: int
    max_range: int
    samples: int
    sample_interval: float


def monitor_trajectory(
    scales: DuarteScales,
    t_max: float,
    sample_interval: float,
    seed: int,
    trial: int = 0,
    geometry: Optional[ColumnGeometry] = None,
) -> TrajectoryReport:
    """Run the constrained dynamics on V (healthy left wall, empty caps) and
    evaluate the arrow machinery on a uniform time grid.  Entry times are
    resolved only up to the grid spacing."""
    if sample_interval <= 0:
        raise ValueError("sample interval must be positive")
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    if t_max == 0:
        return TrajectoryReport(
            first_b1=None,
            first_b2=None,
            max_n_up=0,
            max_range=0,
            samples=0,
            sample_interval=sample_interval,
        )
    geometry = geometry or ColumnGeometry(scales.N)
    region = geometry.region
    exterior = BoundaryExterior(geometry.initial_tau())
    params = SimParams(
        family=_DUARTE,
        q=scales.q,
        region=region,
        boundary=exterior,
        t_max=t_max,
        seed=seed,
        trial=trial,
    )
    dyn = make_dynamics(params)
    grid = list(np.arange(0.0, t_max + 1e-12, sample_interval))
    report = TrajectoryReport(
        first_b1=None,
        first_b2=None,
        max_n_up=0,
        max_range=0,
        samples=len(grid),
        sample_interval=sample_interval,
    )

    def observer(t: float, state: np.ndarray) -> None:
        empty = frozenset(s for i, s in enumerate(dyn.sites) if state[i] == 0)
        omega = Configuration(region, empty, exterior)
        profile = run_droplet_algorithm(omega, geometry, scales.ell, self_check=False)
        report.max_n_up = max(report.max_n_up, profile.n_up)
        ranges = [r.range for r in profile.droplets.values()]
        if ranges:
            report.max_range = max(report.max_range, max(ranges))
        if report.first_b1 is None and event_B1(profile, scales.n1):
            report.first_b1 = t
        if report.first_b2 is None and event_B2(omega, profile, geometry, scales.n2):
            report.first_b2 = t

    observe_trajectory(params, grid, observer, dyn=dyn)
    return report


def sample_omega(
    geometry: ColumnGeometry, q: float, seed: int, trial: int = 0
) -> Configuration:
    """Bernoulli(q)-empty configuration on V."""
    rng = derive_rng(seed, trial)
    sites = sorted(geometry.region.sites)
    draws = rng.random(len(sites))
    empty = frozenset(s for s, u in zip(sites, draws) if u < q)
    return Configuration(geometry.region, empty)


def estimate_uparrow_density(
    scales: DuarteScales,
    trials: int,
    seed: int,
    geometry: Optional[ColumnGeometry] = None,
) -> Dict[str, float]:
    """Monte Carlo estimate of mu(some arrow points up) with a Wilson CI."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    geometry = geometry or ColumnGeometry(scales.N)
    hits = 0
    for trial in range(trials):
        omega = sample_omega(geometry, scales.q, seed, trial)
        profile = run_droplet_algorithm(omega, geometry, scales.ell, self_check=False)
        if profile.n_up > 0:
            hits += 1
    p_hat = hits / trials
    z = 1.959963984540054  # 95% normal quantile
    denom = 1 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials)) / denom
    return {
        "p_hat": p_hat,
        "ci_low": max(0.0, center - half),
        "ci_high": min(1.0, center + half),
        "trials": trials,
        "hits": hits,
    }
