"""Update families: finite collections of finite rule sets in Z^2 \\ {0}.

A site's constraint is satisfied when some translated rule is entirely
empty.  Families are stored canonically: each rule's sites sorted, rules
deduplicated and ordered lexicographically.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Tuple

from .geometry import Configuration, Site


class FamilyError(ValueError):
    """Raised for malformed update families; carries a location string."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{message}" + (f" (at {location})" if location else ""))
        self.location = location


Rule = Tuple[Site, ...]


@dataclass(frozen=True)
class UpdateFamily:
    name: str
    rules: Tuple[Rule, ...]

    @classmethod
    def create(cls, name: str, rules: Iterable[Iterable[Site]]) -> "UpdateFamily":
        canon = []
        seen = set()
        for i, rule in enumerate(rules):
            sites = tuple(sorted((int(x), int(y)) for x, y in rule))
            if not sites:
                raise FamilyError("empty rule", f"rule {i}")
            if (0, 0) in sites:
                raise FamilyError("origin in rule", f"rule {i}")
            if sites in seen:
                warnings.warn(f"duplicate rule {list(sites)} dropped", stacklevel=2)
                continue
            seen.add(sites)
            canon.append(sites)
        if not canon:
            raise FamilyError("family has no rules")
        return cls(name=name, rules=tuple(sorted(canon)))

    def offsets(self) -> Tuple[Site, ...]:
        """All distinct rule offsets, over all rules."""
        return tuple(sorted({s for rule in self.rules for s in rule}))

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "rules": [[list(s) for s in r] for r in self.rules]})


def parse_family(text: str) -> UpdateFamily:
    """Parse the JSON family format ``{"name": str, "rules": [[[dx,dy],...],...]}``."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FamilyError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}")
    if not isinstance(data, dict):
        raise FamilyError("family must be a JSON object")
    name = data.get("name")
    if not isinstance(name, str):
        raise FamilyError("missing or non-string 'name'")
    rules = data.get("rules")
    if not isinstance(rules, list):
        raise FamilyError("missing or non-list 'rules'")
    parsed = []
    for i, rule in enumerate(rules):
        if not isinstance(rule, list):
            raise FamilyError("rule must be a list of [dx,dy] pairs", f"rule {i}")
        sites = []
        for j, site in enumerate(rule):
            if (
                not isinstance(site, list)
                or len(site) != 2
                or not all(isinstance(c, int) for c in site)
            ):
                raise FamilyError("site must be a pair of integers", f"rule {i}, site {j}")
            sites.append((site[0], site[1]))
        parsed.append(sites)
    return UpdateFamily.create(name, parsed)


_E1 = (1, 0)
_E2 = (0, 1)


def builtin_family(name: str) -> UpdateFamily:
    """Built-in named families: east1d, east2d, duarte."""
    if name == "east1d":
        return UpdateFamily.create("east1d", [[(-1, 0)]])
    if name == "east2d":
        return UpdateFamily.create("east2d", [[(-1, 0)], [(0, -1)]])
    if name == "duarte":
        nsw = [(0, 1), (0, -1), (-1, 0)]
        return UpdateFamily.create("duarte", [list(pair) for pair in combinations(nsw, 2)])
    raise FamilyError(f"unknown built-in family {name!r}")


def load_family(spec: str) -> UpdateFamily:
    """Resolve a family from a built-in name, a JSON string, or a file path."""
    try:
        return builtin_family(spec)
    except FamilyError:
        pass
    if spec.lstrip().startswith("{"):
        return parse_family(spec)
    with open(spec) as fh:
        return parse_family(fh.read())


def constraint_satisfied(config: Configuration, family: UpdateFamily, x: Site) -> bool:
    """The constraint indicator c_x: some rule, translated to x, is all empty.

    Sites outside the region take values from the configuration's exterior
    policy.
    """
    if x not in config.region.sites:
        raise ValueError(f"site {x} outside region")
    a, b = x
    for rule in family.rules:
        if all(config.value_at((a + dx, b + dy)) == 0 for dx, dy in rule):
            return True
    return False
