"""Exact finite-state computations for small constrained chains.

States are bitmasks over the region's sorted sites, a set bit meaning the
site is empty.  The generator is assembled as a sparse matrix; the gap is
obtained from the symmetrized operator on the ergodic component of the
all-occupied state, mean hitting times from a linear solve, and energy
barriers from breadth-first search over zero-capped state spaces.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .families import UpdateFamily
from .geometry import ALL_HEALTHY, Region, Site

GENERATOR_CAP = 1 << 14
BFS_CAP = 1 << 20


class StateSpaceError(ValueError):
    pass


class ReducibleChainError(ValueError):
    def __init__(self, message: str, components: int):
        super().__init__(message)
        self.components = components


class UnreachableStatesError(ValueError):
    def __init__(self, message: str, states: List[int]):
        super().__init__(message)
        self.states = states


@dataclass(frozen=True)
class StateSpace:
    """Full enumeration of {0,1}^region; the state integer doubles as its
    index.  Bit i corresponds to sorted site i; set bit = empty."""

    region: Region
    sites: Tuple[Site, ...]
    origin: Site

    @classmethod
    def build(cls, region: Region, origin: Site = (0, 0), cap: int = GENERATOR_CAP):
        n = len(region.sites)
        if 2 ** n > cap:
            raise StateSpaceError(
                f"state space 2^{n} exceeds cap {cap}"
            )
        sites = tuple(sorted(region.sites))
        if origin not in region.sites:
            raise ValueError("origin must lie in the region")
        return cls(region=region, sites=sites, origin=origin)

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def origin_bit(self) -> int:
        return 1 << self.sites.index(self.origin)


def _compile_rules(
    family: UpdateFamily, space: StateSpace, exterior
) -> List[List[int]]:
    """Per-site list of required-empty bitmasks, one per viable rule.

    Rules touching a healthy exterior site are dropped; exterior empties
    are omitted from the mask.  A zero mask means the rule always fires.
    """
    index = {s: i for i, s in enumerate(space.sites)}
    out: List[List[int]] = []
    for s in space.sites:
        a, b = s
        masks = []
        for rule in family.rules:
            mask = 0
            dead = False
            for dx, dy in rule:
                t = (a + dx, b + dy)
                if t in index:
                    mask |= 1 << index[t]
                elif exterior.value_at(t) != 0:
                    dead = True
                    break
            if not dead:
                masks.append(mask)
        out.append(masks)
    return out


def _constraint_bit(masks: List[int], state: int) -> bool:
    for m in masks:
        if state & m == m:
            return True
    return False


@dataclass
class GeneratorOperator:
    space: StateSpace
    L: sp.csr_matrix
    mu: np.ndarray
    q: float
    site_masks: List[List[int]]

    def stationary_weight(self, state: int) -> float:
        return float(self.mu[state])


def build_generator(
    family: UpdateFamily,
    region: Region,
    q: float,
    exterior=ALL_HEALTHY,
    origin: Site = (0, 0),
    cap: int = GENERATOR_CAP,
) -> GeneratorOperator:
    """Sparse rate operator: state -> state^x at rate c_x * (q to empty,
    1 - q to occupied); diagonal balances each row exactly."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0,1), got {q}")
    space = StateSpace.build(region, origin, cap)
    site_masks = _compile_rules(family, space, exterior)
    n, size = space.n, space.size
    p = 1.0 - q

    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    for state in range(size):
        total = 0.0
        for i in range(n):
            if not _constraint_bit(site_masks[i], state):
                continue
            bit = 1 << i
            rate = p if state & bit else q
            rows.append(state)
            cols.append(state ^ bit)
            vals.append(rate)
            total += rate
        if total:
            rows.append(state)
            cols.append(state)
            vals.append(-total)
    L = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))

    counts = np.array([bin(s).count("1") for s in range(size)])
    mu = (p ** (n - counts)) * (q ** counts)
    return GeneratorOperator(space=space, L=L, mu=mu, q=q, site_masks=site_masks)


def ergodic_component(gen: GeneratorOperator) -> np.ndarray:
    """States in the strong component of the all-occupied state."""
    adj = gen.L.copy()
    adj.setdiag(0)
    adj.eliminate_zeros()
    n_comp, labels = csgraph.connected_components(adj, directed=True, connection="strong")
    return np.flatnonzero(labels == labels[0])


def spectral_gap(gen: GeneratorOperator, tol: float = 1e-8) -> Dict[str, float]:
    """Smallest nonzero eigenvalue of -L on the ergodic component of the
    all-occupied state, with a residual cross-check."""
    comp = ergodic_component(gen)
    if len(comp) < 2:
        raise ReducibleChainError(
            "all-occupied state is isolated; no dynamics to relax", gen.L.shape[0]
        )
    Lc = gen.L[np.ix_(comp, comp)].toarray()
    mu_c = gen.mu[comp]
    mu_c = mu_c / mu_c.sum()
    d = np.sqrt(mu_c)
    # detailed balance makes S symmetric: S = D^{1/2} (-L) D^{-1/2}
    S = (d[:, None] * (-Lc)) / d[None, :]
    S = 0.5 * (S + S.T)
    if len(comp) <= 4096:
        evals, evecs = np.linalg.eigh(S)
        lam = float(evals[1])
        u = evecs[:, 1]
    else:
        evals, evecs = spla.eigsh(sp.csr_matrix(S), k=2, sigma=0.0, which="LM")
        order = np.argsort(evals)
        lam = float(evals[order[1]])
        u = evecs[:, order[1]]
    v = u / d
    residual = float(np.max(np.abs(Lc @ v + lam * v)) / max(1.0, np.max(np.abs(v))))
    if residual > max(tol, 1e-8):
        raise ArithmeticError(f"eigen residual {residual} exceeds tolerance")
    return {
        "gap": lam,
        "t_rel": 1.0 / lam,
        "residual": residual,
        "component_size": int(len(comp)),
        "state_count": int(gen.L.shape[0]),
    }


def hitting_states(gen: GeneratorOperator) -> np.ndarray:
    """Indices of the target set A = {origin empty}."""
    ob = gen.space.origin_bit
    return np.array([s for s in range(gen.space.size) if s & ob], dtype=np.int64)


def mean_hitting(gen: GeneratorOperator) -> Dict[str, object]:
    """Solve (-L restricted to A^c) u = 1; E_mu(tau0) = sum mu(w) u(w)."""
    size = gen.space.size
    a_idx = hitting_states(gen)
    a_set = set(int(s) for s in a_idx)
    ac_idx = np.array([s for s in range(size) if s not in a_set], dtype=np.int64)

    adj = gen.L.copy()
    adj.setdiag(0)
    adj.eliminate_zeros()
    # reverse reachability from A over the transition graph
    reach = csgraph.breadth_first_order(
        adj.T, i_start=int(a_idx[0]), directed=True, return_predecessors=False
    )
    reach_set = set(int(s) for s in reach)
    for s in a_idx[1:]:
        if int(s) not in reach_set:
            more = csgraph.breadth_first_order(
                adj.T, i_start=int(s), directed=True, return_predecessors=False
            )
            reach_set.update(int(x) for x in more)
    stuck = [int(s) for s in ac_idx if int(s) not in reach_set]
    if stuck:
        raise UnreachableStatesError(
            f"{len(stuck)} states cannot reach the target", stuck
        )

    M = (-gen.L[np.ix_(ac_idx, ac_idx)]).tocsc()
    ones = np.ones(len(ac_idx))
    u = spla.spsolve(M, ones)
    residual = float(np.max(np.abs(M @ u - ones)))
    if residual > 1e-10:
        raise ArithmeticError(f"hitting solve residual {residual} > 1e-10")
    e_mu = float(np.dot(gen.mu[ac_idx], u))
    per_state = np.zeros(size)
    per_state[ac_idx] = u
    return {"e_mu_tau0": e_mu, "per_state": per_state, "residual": residual}


def dirichlet_form(gen: GeneratorOperator, f: np.ndarray) -> Dict[str, float]:
    """D(f) = sum_x mu(c_x Var_x f) plus the variance and Poincare ratio."""
    size = gen.space.size
    if f.shape != (size,):
        raise ValueError("f must be defined on every state")
    mu = gen.mu
    q = gen.q
    d_val = 0.0
    for i in range(gen.space.n):
        bit = 1 << i
        for state in range(size):
            if state & bit:
                continue  # count each pair once, from the occupied side
            if not _constraint_bit(gen.site_masks[i], state):
                continue
            diff = f[state ^ bit] - f[state]
            d_val += mu[state] * q * diff * diff
    mean = float(np.dot(mu, f))
    var = float(np.dot(mu, f * f) - mean * mean)
    out = {"dirichlet": d_val, "variance": var, "mean": mean}
    if d_val > 0:
        out["poincare_ratio"] = var / d_val
    return out


def proxy_bound_value(m_phi: float, d_phi: float, T: float) -> float:
    """T |m| (|m| e^{-T D} - sqrt(T D))."""
    a = abs(m_phi)
    return T * a * (a * math.exp(-T * d_phi) - math.sqrt(T * d_phi))


def check_proxy_bound(
    gen: GeneratorOperator,
    phi: np.ndarray,
    t_grid: Optional[Sequence[float]] = None,
    tol: float = 1e-9,
) -> Dict[str, object]:
    """Verify the hitting-time lower bound through a test function.

    phi must vanish on {origin empty}; it is normalized to mu(phi^2) = 1.
    Checks E_mu(tau0) >= bound(T) on the grid and at the distinguished
    T* = mu(phi)^2 / (16 D(phi)).
    """
    ob = gen.space.origin_bit
    size = gen.space.size
    if any(phi[s] != 0 for s in range(size) if s & ob):
        raise ValueError("phi must vanish on states with the origin empty")
    norm2 = float(np.dot(gen.mu, phi * phi))
    if norm2 <= 0:
        raise ValueError("phi is zero almost surely")
    phi = phi / math.sqrt(norm2)
    df = dirichlet_form(gen, phi)
    m_phi, d_phi = df["mean"], df["dirichlet"]
    if d_phi <= 0:
        raise ValueError("phi has zero Dirichlet form; target unreachable")
    e_mu = mean_hitting(gen)["e_mu_tau0"]

    t_star = m_phi ** 2 / (16.0 * d_phi)
    if t_grid is None:
        t_grid = [t_star * (i + 1) / 10.0 for i in range(20)]
    checks = []
    ok = True
    for T in t_grid:
        b = proxy_bound_value(m_phi, d_phi, T)
        holds = e_mu >= b - tol
        ok = ok and holds
        checks.append({"T": T, "bound": b, "holds": holds})
    b_star = proxy_bound_value(m_phi, d_phi, t_star)
    star_holds = e_mu >= b_star - tol
    return {
        "e_mu_tau0": e_mu,
        "mu_phi": m_phi,
        "dirichlet": d_phi,
        "t_star": t_star,
        "bound_at_t_star": b_star,
        "figure": m_phi ** 4 / d_phi,
        "holds_at_t_star": star_holds,
        "holds_on_grid": ok,
        "grid": checks,
    }


def east_barrier(ell: int, zero_cap: Optional[int] = None, budget: int = BFS_CAP) -> int:
    """Minimal number of simultaneous empties needed to empty site ell of an
    East chain with a frozen empty at site 0, found by capped BFS."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    target_bit = 1 << (ell - 1)  # bits cover sites 1..ell
    caps = range(1, ell + 1) if zero_cap is None else [zero_cap]
    for cap in caps:
        seen = {0}
        queue = deque([0])
        while queue:
            state = queue.popleft()
            if state & target_bit:
                return cap
            for i in range(ell):
                bit = 1 << i
                # legal iff left neighbour empty; site 1's is the frozen wall
                if i > 0 and not state & (bit >> 1):
                    continue
                nxt = state ^ bit
                if nxt in seen or bin(nxt).count("1") > cap:
                    continue
                seen.add(nxt)
                queue.append(nxt)
                if len(seen) > budget:
                    raise MemoryError("east_barrier budget exhausted")
    raise ValueError(f"site {ell} unreachable within cap {zero_cap}")


def lambda_region(n: int, kappa: int) -> Region:
    """Square of side kappa*n*2^n + 1 centered at the origin."""
    side = kappa * n * (1 << n) + 1
    half = (side - 1) // 2
    return Region.box(half)


def an_reachability(
    family: UpdateFamily, n: int, kappa: int = 1, budget: int = BFS_CAP
) -> Dict[str, object]:
    """BFS over legal flips from all-occupied with empty exterior, capped at
    n - 1 simultaneous empties; reports whether the origin ever empties."""
    if n < 1:
        raise ValueError("n must be >= 1")
    region = lambda_region(n, kappa)
    sites = sorted(region.sites)
    index = {s: i for i, s in enumerate(sites)}
    origin_bit = 1 << index[(0, 0)]
    max_zeros = n - 1

    # all exterior sites are empty, so rules only constrain in-region sites
    site_masks: List[List[int]] = []
    for s in sites:
        a, b = s
        masks = []
        for rule in family.rules:
            mask = 0
            for dx, dy in rule:
                t = (a + dx, b + dy)
                if t in index:
                    mask |= 1 << index[t]
            masks.append(mask)
        site_masks.append(masks)

    seen = {0}
    queue = deque([0])
    origin_infectable = False
    while queue:
        state = queue.popleft()
        zeros = bin(state).count("1")
        for i in range(len(sites)):
            if not _constraint_bit(site_masks[i], state):
                continue
            bit = 1 << i
            nxt = state ^ bit
            if not state & bit and zeros + 1 > max_zeros:
                continue
            if nxt & origin_bit:
                origin_infectable = True
            if nxt in seen:
                continue
            seen.add(nxt)
            queue.append(nxt)
            if len(seen) > budget:
                raise MemoryError("an_reachability budget exhausted")
    return {
        "origin_infectable": origin_infectable,
        "reachable_states": len(seen),
        "region_size": len(sites),
        "max_zeros": max_zeros,
    }
