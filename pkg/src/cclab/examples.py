"""Built-in example families.

Four generators, one per structural phenomenon:

* ``smooth-transversal``: a finite instance whose classes meet an
  explicit transversal with harmonically decaying weights; the smooth
  base case every dichotomy result trivializes on.
* ``counterexample-smooth``: the column tower.  Each level adds one
  column of weight 1/(j+1); class masses follow the harmonic series,
  so the declared divergence schedule certifies escape of mass while
  every level stays smooth.  Carries the transversal partition that
  feeds the strictly increasing injection.
* ``counterexample-coboundary``: the doubling tower on binary strings.
  The weight of a string is 2^tier where the tier is one past the
  position of its first zero bit (the all-ones string, whose tier the
  truncation has not yet determined, sits one tier above everything
  and is the declared boundary point).  Tier masses are equal, so tier
  shares are 1/(m+2) at level m and the watched tier family exhibits
  the additivity defect that converts into a compression.
* ``odometer``: binary strings under prefix refinement with product
  weights; bias p = 1/2 gives the constant cocycle, other p give the
  Bernoulli cocycle.  The unique invariant limit measure lives here.

All point ids are chosen so lexicographic order equals the intended
enumeration order, keeping every downstream greedy pass deterministic.
"""

from __future__ import annotations

import math
import os
from fractions import Fraction

from cclab.core import EXACT, FLOAT, Instance, ModelError, build_instance
from cclab.tower import DefectFamily, Tower, build_tower

KINDS = (
    "smooth-transversal",
    "counterexample-smooth",
    "counterexample-coboundary",
    "odometer",
)

DEFAULT_LEVELS = 5
DEFAULT_CLASSES = 3


def resolve_mode(mode: str | None) -> str:
    """Explicit argument wins, then the CCLAB_MODE variable, then exact."""
    if mode is None:
        mode = os.environ.get("CCLAB_MODE", EXACT)
    if mode not in (EXACT, FLOAT):
        raise ModelError(f"unknown arithmetic mode {mode!r}")
    return mode


def generate(kind: str, levels: int | None = None, p=None,
             classes: int | None = None, mode: str | None = None):
    """Build one of the example families; returns an Instance or a Tower."""
    mode = resolve_mode(mode)
    if kind == "smooth-transversal":
        return smooth_transversal(classes or DEFAULT_CLASSES, mode)
    if kind == "counterexample-smooth":
        return column_tower(levels or DEFAULT_LEVELS, classes or 1, mode)
    if kind == "counterexample-coboundary":
        return doubling_tower(levels or DEFAULT_LEVELS, mode)
    if kind == "odometer":
        bias = Fraction(1, 2) if p is None else Fraction(p)
        return odometer_tower(levels or DEFAULT_LEVELS, bias, mode)
    raise ModelError(f"unknown example kind {kind!r}")


def _scale(value: Fraction, mode: str):
    return value if mode == EXACT else float(value)


def smooth_transversal(n_classes: int, mode: str = EXACT) -> Instance:
    """Classes of staggered size with weights 1/(n+1) along the transversal."""
    if n_classes < 1:
        raise ModelError("need at least one class")
    classes: dict[str, list[str]] = {}
    weights: dict[str, object] = {}
    for k in range(n_classes):
        cid = f"c{k}"
        size = k + 2
        members = []
        for n in range(size):
            pid = f"c{k}:t{n}"
            members.append(pid)
            weights[pid] = _scale(Fraction(1, n + 1), mode)
        classes[cid] = members
    return build_instance(classes, weights, mode=mode)


def column_tower(n_levels: int, n_classes: int = 1, mode: str = EXACT) -> Tower:
    """The harmonic column tower; level n holds columns 0..n per class."""
    if n_levels < 1:
        raise ModelError("need at least one level")
    if n_classes < 1:
        raise ModelError("need at least one class")
    cids = [f"c{k}" for k in range(n_classes)]

    def pid(cid: str, j: int) -> str:
        return f"{cid}:{j:03d}"

    levels = []
    refinements = []
    boundary = []
    algebras = []
    transversal_sets = []
    for n in range(n_levels):
        cols = list(range(n + 1))
        classes = {cid: [pid(cid, j) for j in cols] for cid in cids}
        weights = {pid(cid, j): _scale(Fraction(1, j + 1), mode)
                   for cid in cids for j in cols}
        levels.append(build_instance(classes, weights, mode=mode))
        boundary.append({pid(cid, n) for cid in cids})
        table = {"all": {pid(cid, j) for cid in cids for j in cols}}
        if n > 0:
            # column 0 only stops absorbing once column 1 exists
            table["origin"] = {pid(cid, 0) for cid in cids}
        algebras.append(table)
        transversal_sets.append({
            f"t:{j:03d}": {pid(cid, j) for cid in cids} for j in cols})
        if n > 0:
            # column n at the shallower level absorbs the new column
            refinements.append({
                pid(cid, j): pid(cid, min(j, n - 1))
                for cid in cids for j in cols})

    harmonic = Fraction(0)
    schedule = []
    for n in range(n_levels + 1):
        harmonic += Fraction(1, n + 1)
        schedule.append(harmonic)
    return build_tower(
        levels, refinements,
        algebras=algebras,
        divergence={cid: schedule for cid in cids},
        boundary=boundary,
        transversals=tuple(f"t:{j:03d}" for j in range(n_levels)),
        transversal_sets=transversal_sets,
    )


def _tier(bits: str) -> int:
    """One past the first zero position; all-ones strings sit above everyone."""
    zero = bits.find("0")
    return len(bits) + 1 if zero < 0 else zero + 1


def doubling_tower(n_levels: int, mode: str = EXACT) -> Tower:
    """Binary strings with weight 2^tier under prefix refinement."""
    if n_levels < 1:
        raise ModelError("need at least one level")
    levels = []
    refinements = []
    boundary = []
    algebras = []
    families_members = []
    for i in range(n_levels):
        m = i + 1
        strings = ["".join(bits) for bits in _binary(m)]
        weights = {s: _scale(Fraction(2) ** _tier(s), mode) for s in strings}
        gens = {}
        for j in range(m):
            gens[f"flip:{j}"] = {s: s[:j] + ("1" if s[j] == "0" else "0") + s[j + 1:]
                                 for s in strings}
        levels.append(build_instance({"c0": strings}, weights,
                                     generators=gens, mode=mode))
        boundary.append({"1" * m})
        table = {"all": set(strings)}
        for k in range(1, m + 1):
            table[f"tier:{k:02d}"] = {s for s in strings if _tier(s) == k}
            table[f"tail:{k:02d}"] = {s for s in strings if _tier(s) >= k}
        table[f"tail:{m + 1:02d}"] = {"1" * m}
        algebras.append(table)
        families_members.append(f"tier:{m:02d}")
        if i > 0:
            refinements.append({s: s[:-1] for s in strings})
    family = DefectFamily(name="tiers", members=tuple(families_members),
                          union="all")
    return build_tower(levels, refinements, algebras=algebras,
                       boundary=boundary, defect_families=(family,))


def odometer_tower(n_levels: int, p: Fraction, mode: str = EXACT) -> Tower:
    """Binary strings with Bernoulli(p) product weights under prefix maps."""
    if n_levels < 1:
        raise ModelError("need at least one level")
    if not 0 < p < 1:
        raise ModelError("bias must lie strictly between 0 and 1")
    odds = p / (1 - p)
    levels = []
    refinements = []
    algebras = []
    for i in range(n_levels):
        m = i + 1
        strings = ["".join(bits) for bits in _binary(m)]
        weights = {s: _scale(odds ** s.count("1"), mode) for s in strings}
        gens = {"odo": {s: _add_one(s) for s in strings}}
        levels.append(build_instance({"c0": strings}, weights,
                                     generators=gens, mode=mode))
        table = {"all": set(strings)}
        for depth in range(1, min(m, 3) + 1):
            for prefix_bits in _binary(depth):
                prefix = "".join(prefix_bits)
                table[f"cyl:{prefix}"] = {s for s in strings
                                          if s.startswith(prefix)}
        algebras.append(table)
        if i > 0:
            refinements.append({s: s[:-1] for s in strings})
    return build_tower(levels, refinements, algebras=algebras)


def _binary(m: int):
    for value in range(2 ** m):
        yield format(value, f"0{m}b")


def _add_one(bits: str) -> str:
    """Binary odometer step: add one with carry, wrapping at all ones."""
    value = int(bits, 2) if bits else 0
    return format((value + 1) % (2 ** len(bits)), f"0{len(bits)}b")
