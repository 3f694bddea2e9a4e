"""Greedy maximal families and three mass-balancing constructions.

Everything here follows one template: enumerate candidate finite sets
inside classes in a fixed order (class id, then size, then
lexicographic ids), keep the ones that satisfy a ratio predicate and
are disjoint from everything kept so far, and convert the resulting
maximal family into a subrelation whose blocks satisfy the target
inequality.  Classes the family fails to reach in a balanced way are
returned separately with a lacunary-partition witness, the finite
version of discarding a smooth invariant set.

The three predicates:

* density: a set S straddles the target set A with relative size
  r < |A cap S| / |S minus A| < 1, measured in rho-mass;
* flatten: the block average of f sits within eps * (delta - 1/2) of
  the class midrange, so any two kept blocks differ by less than
  delta * eps; small delta is reached by composing the one-shot case
  over quotient instances with delta' = 3/4 per round;
* balance: some T inside S makes the g-mass of S minus T exceed the
  f-mass of T by a factor strictly between 1 and r.  The split into
  every second point of S is tried first, then all subsets by size;
  the successful T is recorded with the block.

The postcondition inequalities are recomputed exactly before any
result is returned; a failure raises instead of degrading.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction

from cclab.core import (
    EXACT,
    FiniteSubrelation,
    Instance,
    ModelError,
    quotient_by,
    restrict_to_classes,
    rho_size,
    weight_mass as _mass,
)
from cclab.lacunarity import lacunary_partition

DENSITY = "density"
FLATTEN = "flatten"
BALANCE = "balance"
CUSTOM = "custom"
FAMILY_KINDS = (DENSITY, FLATTEN, BALANCE, CUSTOM)

DEFAULT_CAP = 8


@dataclass(eq=False)
class FamilySpec:
    """Parameters of a maximal-family search; see module docstring."""

    kind: str
    r: object = None
    delta: object = None
    eps: object = None
    f: Mapping | None = None
    g: Mapping | None = None
    target: frozenset | None = None
    predicate: object = None
    cap: int = DEFAULT_CAP


@dataclass(eq=False)
class FamilyResult:
    """A greedy maximal family of disjoint within-class sets.

    ``payloads`` maps the first point of a set to whatever extra datum
    the predicate certified (the T-subset for balance).  When a class
    keeps more free points than the size cap, candidates above the cap
    were never examined and the maximality claim is only conclusive up
    to the cap; those classes are listed in ``unchecked``.
    """

    sets: tuple[tuple[str, ...], ...]
    payloads: dict[str, tuple]
    conclusive: bool
    unchecked: tuple[str, ...]

    def __iter__(self):
        return iter(self.sets)

    def __len__(self) -> int:
        return len(self.sets)

    def union(self) -> set[str]:
        return {p for s in self.sets for p in s}


def _scalar(value, mode: str):
    return Fraction(value) if mode == EXACT else float(value)


def _function_table(instance: Instance, mapping, label: str) -> dict:
    table = {}
    for p in instance.points:
        if p not in mapping:
            raise ModelError(f"{label} misses point {p!r}")
        value = _scalar(mapping[p], instance.mode)
        if value < 0:
            raise ModelError(f"{label} must be nonnegative")
        table[p] = value
    return table


def _block_integral(instance: Instance, table: Mapping, members):
    """Average of a function over a block in the block's own measure."""
    num = sum(table[p] * instance.weight(p) for p in members)
    return num / _mass(instance, members)


def _midranges(instance: Instance, table: Mapping) -> dict:
    half = Fraction(1, 2) if instance.mode == EXACT else 0.5
    out = {}
    for cid in instance.sorted_classes():
        values = [table[p] for p in instance.classes[cid]]
        out[cid] = (min(values) + max(values)) * half
    return out


def _oscillation(instance: Instance, table: Mapping):
    worst = Fraction(0) if instance.mode == EXACT else 0.0
    for cid in instance.sorted_classes():
        values = [table[p] for p in instance.classes[cid]]
        worst = max(worst, max(values) - min(values))
    return worst


def _density_predicate(instance: Instance, spec: FamilySpec):
    if spec.target is None:
        raise ModelError("density family needs a target set")
    targets = set(spec.target)
    unknown = sorted(p for p in targets if p not in instance.class_of)
    if unknown:
        raise ModelError(f"target mentions unknown points {unknown[:3]}")
    r = _scalar(spec.r, instance.mode)
    if not 0 < r < 1:
        raise ModelError("density ratio bound must lie strictly between "
                         "0 and 1")

    def predicate(members):
        inside = [p for p in members if p in targets]
        outside = [p for p in members if p not in targets]
        if not inside or not outside:
            return False
        value = rho_size(instance, inside, outside)
        return r < value < 1

    return predicate


def _flatten_predicate(instance: Instance, spec: FamilySpec):
    if spec.f is None:
        raise ModelError("flatten family needs a function")
    table = _function_table(instance, spec.f, "flatten function")
    delta = _scalar(spec.delta, instance.mode)
    eps = _scalar(spec.eps, instance.mode)
    if not 0 < delta < 1:
        raise ModelError("flatten needs 0 < delta < 1")
    if not eps > 0:
        raise ModelError("flatten needs a positive eps")
    half = Fraction(1, 2) if instance.mode == EXACT else 0.5
    margin = eps * (delta - half)
    averages = _midranges(instance, table)

    def predicate(members):
        value = _block_integral(instance, table, members)
        gap = value - averages[instance.class_of[members[0]]]
        return -margin < gap < margin

    return predicate


def _balance_splits(members):
    """The every-second-point split first, then all subsets by size."""
    alternating = members[1::2]
    if alternating:
        yield alternating
    for size in range(1, len(members)):
        for combo in itertools.combinations(members, size):
            if combo != alternating:
                yield combo


def _balance_predicate(instance: Instance, spec: FamilySpec):
    if spec.f is None or spec.g is None:
        raise ModelError("balance family needs two functions")
    ftable = _function_table(instance, spec.f, "balance function f")
    gtable = _function_table(instance, spec.g, "balance function g")
    r = _scalar(spec.r, instance.mode)
    if not r > 1:
        raise ModelError("balance bound must exceed 1")
    zero = {p for p in instance.points
            if ftable[p] == 0 or gtable[p] == 0}

    def predicate(members):
        if any(p in zero for p in members):
            return False, None
        weights = {p: instance.weight(p) for p in members}
        for t in _balance_splits(members):
            chosen = set(t)
            f_side = sum(ftable[p] * weights[p] for p in t)
            g_side = sum(gtable[p] * weights[p] for p in members
                         if p not in chosen)
            if f_side < g_side < r * f_side:
                return True, tuple(t)
        return False, None

    return predicate


def _build_predicate(instance: Instance, spec: FamilySpec):
    if spec.kind == DENSITY:
        return _density_predicate(instance, spec)
    if spec.kind == FLATTEN:
        return _flatten_predicate(instance, spec)
    if spec.kind == BALANCE:
        return _balance_predicate(instance, spec)
    if spec.kind == CUSTOM:
        if not callable(spec.predicate):
            raise ModelError("custom family spec needs a predicate")
        return lambda members: spec.predicate(instance, members)
    raise ModelError(f"unknown family kind {spec.kind!r}")


def maximal_family(instance: Instance, spec: FamilySpec) -> FamilyResult:
    """Greedy maximal family of disjoint predicate-true sets.

    Candidates stream by class id, then size, then lexicographic ids;
    a candidate is kept iff it avoids everything kept so far and the
    predicate holds.  Any qualifying candidate of size within the cap
    would have been visited, so the output is maximal among those; a
    class left with more free points than the cap is reported as
    unchecked rather than silently trusted.
    """
    predicate = _build_predicate(instance, spec)
    if spec.cap < 1:
        raise ModelError("candidate cap must be at least 1")
    chosen: list[tuple[str, ...]] = []
    payloads: dict[str, tuple] = {}
    used: set[str] = set()
    unchecked: list[str] = []
    for cid in instance.sorted_classes():
        members = instance.classes[cid]
        for size in range(1, min(spec.cap, len(members)) + 1):
            pool = [p for p in members if p not in used]
            if len(pool) < size:
                break
            for combo in itertools.combinations(pool, size):
                if used.intersection(combo):
                    continue
                outcome = predicate(combo)
                ok, payload = (outcome if isinstance(outcome, tuple)
                               else (bool(outcome), None))
                if ok:
                    chosen.append(combo)
                    used.update(combo)
                    if payload is not None:
                        payloads[combo[0]] = payload
        free = sum(1 for p in members if p not in used)
        if free > spec.cap:
            unchecked.append(cid)
    return FamilyResult(sets=tuple(chosen), payloads=payloads,
                        conclusive=not unchecked,
                        unchecked=tuple(unchecked))


@dataclass(eq=False)
class SmoothPart:
    """A class-saturated remainder with its lacunary-partition witness."""

    points: tuple[str, ...]
    pieces: tuple[tuple[str, ...], ...]


def _smooth_part(instance: Instance, points) -> SmoothPart:
    pts = tuple(sorted(points))
    if not pts:
        return SmoothPart(points=(), pieces=())
    cids = sorted({instance.class_of[p] for p in pts})
    sub = restrict_to_classes(instance, cids)
    return SmoothPart(points=pts, pieces=tuple(lacunary_partition(sub)))


@dataclass(eq=False)
class DensityApproximation:
    b: tuple[str, ...]
    c: tuple[str, ...]
    subrelation: FiniteSubrelation
    family: FamilyResult
    leftover: SmoothPart


def density_approximation(instance: Instance, target, r) -> DensityApproximation:
    """Carve the target's density into straddling blocks.

    On the kept part b every class either has all its target points or
    all its non-target points inside c, and every block through c
    straddles the target with relative rho-size strictly between r
    and 1.  Classes where both the uncovered target remainder and the
    uncovered complement remainder survive are returned as the smooth
    leftover.
    """
    targets = set(target)
    spec = FamilySpec(kind=DENSITY, r=r, target=frozenset(targets))
    family = maximal_family(instance, spec)
    union = family.union()
    uncovered_in = {p for p in targets if p not in union}
    uncovered_out = {p for p in instance.points
                     if p not in targets and p not in union}
    bad = ({instance.class_of[p] for p in uncovered_in}
           & {instance.class_of[p] for p in uncovered_out})
    b = tuple(p for p in instance.points if instance.class_of[p] not in bad)
    cset = {p for p in union if instance.class_of[p] not in bad}
    blocks = [s for s in family.sets if instance.class_of[s[0]] not in bad]
    sub = FiniteSubrelation.from_blocks(instance, blocks)

    bound = _scalar(r, instance.mode)
    for block in blocks:
        inside = [p for p in block if p in targets]
        outside = [p for p in block if p not in targets]
        value = rho_size(instance, inside, outside)
        if not bound < value < 1:
            raise ModelError(f"density postcondition failed at block "
                             f"{block[0]!r}")
    for cid in instance.sorted_classes():
        if cid in bad:
            continue
        members = instance.classes[cid]
        kept_in = {p for p in members if p in targets}
        kept_out = {p for p in members if p not in targets}
        if not (kept_in <= cset or kept_out <= cset):
            raise ModelError(f"density postcondition failed at class {cid!r}")

    leftover = _smooth_part(
        instance, [p for p in instance.points if instance.class_of[p] in bad])
    return DensityApproximation(b=b, c=tuple(sorted(cset)), subrelation=sub,
                                family=family, leftover=leftover)


@dataclass(eq=False)
class FlattenResult:
    b: tuple[str, ...]
    subrelation: FiniteSubrelation
    leftover: SmoothPart
    rounds: int


def flatten(instance: Instance, f, delta, eps) -> FlattenResult:
    """Merge points into blocks whose f-averages agree within delta * eps.

    A single greedy pass suffices for delta > 2/3; otherwise the pass
    runs with delta' = 3/4 over successive quotient instances, each
    round replacing blocks by single points carrying the exact block
    average, until the accumulated bound (3/4)^rounds drops below
    delta.  Classes dropped in any round (both a below-average and an
    above-average point missed) come back as the smooth leftover.
    """
    mode = instance.mode
    table = _function_table(instance, f, "flatten function")
    delta = _scalar(delta, mode)
    eps = _scalar(eps, mode)
    if not 0 < delta < 1:
        raise ModelError("flatten needs 0 < delta < 1")
    if not eps > _oscillation(instance, table):
        raise ModelError("flatten needs eps above the within-class "
                         "oscillation of f")

    prime = _scalar(Fraction(3, 4), mode)
    two_thirds = _scalar(Fraction(2, 3), mode)
    if delta > two_thirds:
        schedule = [delta]
    else:
        schedule = [prime]
        acc = prime
        while acc > delta:
            acc = acc * prime
            schedule.append(prime)

    current = instance
    fcur = table
    origin = {p: (p,) for p in instance.points}
    dropped: set[str] = set()
    step_eps = eps
    for step_delta in schedule:
        family = maximal_family(current, FamilySpec(
            kind=FLATTEN, delta=step_delta, eps=step_eps, f=fcur))
        union = family.union()
        averages = _midranges(current, fcur)
        missed = [p for p in current.points if p not in union]
        below = {current.class_of[p] for p in missed
                 if fcur[p] < averages[current.class_of[p]]}
        above = {current.class_of[p] for p in missed
                 if fcur[p] > averages[current.class_of[p]]}
        dropped |= below & above
        good = [cid for cid in current.sorted_classes()
                if cid not in dropped]
        if not good:
            current = None
            break
        blocks = [s for s in family.sets
                  if current.class_of[s[0]] not in dropped]
        restricted = restrict_to_classes(current, good)
        sub = FiniteSubrelation.from_blocks(restricted, blocks)
        quotient, _ = quotient_by(restricted, sub)
        fcur = {blk[0]: _block_integral(restricted, fcur, blk)
                for blk in sub.blocks}
        origin = {blk[0]: tuple(sorted(q for m in blk for q in origin[m]))
                  for blk in sub.blocks}
        current = quotient
        step_eps = step_eps * step_delta
        if _oscillation(current, fcur) >= step_eps:
            raise ModelError("flatten postcondition failed between rounds")

    final_blocks = ([origin[p] for p in current.points]
                    if current is not None else [])
    sub = FiniteSubrelation.from_blocks(instance, final_blocks)
    b = tuple(p for p in instance.points
              if instance.class_of[p] not in dropped)

    by_class: dict[str, list] = {}
    for block in final_blocks:
        value = _block_integral(instance, table, block)
        by_class.setdefault(instance.class_of[block[0]], []).append(value)
    for cid, values in sorted(by_class.items()):
        if len(values) > 1 and max(values) - min(values) >= delta * eps:
            raise ModelError(f"flatten postcondition failed at class {cid!r}")

    leftover = _smooth_part(
        instance, [p for p in instance.points if instance.class_of[p] in dropped])
    return FlattenResult(b=b, subrelation=sub, leftover=leftover,
                         rounds=len(schedule))


@dataclass(eq=False)
class BalanceResult:
    b: tuple[str, ...]
    c: tuple[str, ...]
    subrelation: FiniteSubrelation
    family: FamilyResult
    leftover: SmoothPart


def balance(instance: Instance, f, g, r) -> BalanceResult:
    """Split blocks so the g-mass outside c dominates the f-mass inside.

    Points where f or g vanishes are trivial: each becomes a singleton
    block, lands in c exactly when its f-value is 0, and both sides of
    the inequality vanish there.  The strictly positive points are
    grouped by the (S, T) search; classes whose positive points cannot
    all be grouped are returned as the smooth leftover.
    """
    ftable = _function_table(instance, f, "balance function f")
    gtable = _function_table(instance, g, "balance function g")
    spec = FamilySpec(kind=BALANCE, r=r, f=ftable, g=gtable)
    family = maximal_family(instance, spec)
    union = family.union()
    zero = {p for p in instance.points
            if ftable[p] == 0 or gtable[p] == 0}
    missed = [p for p in instance.points
              if p not in zero and p not in union]
    dropped = {instance.class_of[p] for p in missed}

    b = tuple(p for p in instance.points
              if instance.class_of[p] not in dropped)
    bset = set(b)
    cset = {p for p in bset if p in zero and ftable[p] == 0}
    blocks = []
    for s in family.sets:
        if instance.class_of[s[0]] in dropped:
            continue
        blocks.append(s)
        cset.update(family.payloads[s[0]])
    sub = FiniteSubrelation.from_blocks(instance, blocks)

    bound = _scalar(r, instance.mode)
    for block in sub.blocks:
        if block[0] not in bset:
            continue
        f_side = sum(ftable[p] * instance.weight(p)
                     for p in block if p in cset)
        g_side = sum(gtable[p] * instance.weight(p)
                     for p in block if p not in cset)
        if not f_side <= g_side <= bound * f_side:
            raise ModelError(f"balance postcondition failed at block "
                             f"{block[0]!r}")

    leftover = _smooth_part(
        instance, [p for p in instance.points
                   if instance.class_of[p] in dropped])
    return BalanceResult(b=b, c=tuple(sorted(cset)), subrelation=sub,
                         family=family, leftover=leftover)
