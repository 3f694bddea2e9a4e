"""Towers: finite approximation sequences for infinite weighted relations.

A tower is a list of instances (levels) connected by refinement maps,
each level carrying a finite subrelation, a named algebra of point
sets, and optional declarations: divergence schedules for class masses,
watched defect families, a transversal partition, and Z-like classes.

The refinement map sends each deeper point to the shallower point it
refines.  Fiber weights must sum to a per-class constant multiple of
the parent weight, so level-n cocycle data is the exact coarsening of
level-(n+1) data.  Truncation makes one exception unavoidable: the
points where a finite level absorbs everything not yet enumerated (the
all-ones string of the coboundary family, the last column of the grid
family) cannot satisfy the fiber-sum identity.  Generators declare
those points in per-level boundary sets and the identity is enforced
everywhere else.  Measure certificates get no such exemption; their
consistency checks are unconditional.

Named algebra sets must persist once introduced: the pullback of a
level-n set along the refinement must equal the set of the same name
at level n+1.  All limit and defect computations read their data from
these stabilized names.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from cclab.core import (
    EXACT,
    FiniteSubrelation,
    Instance,
    ModelError,
    scalar_eq,
    weight_mass as _mass,
)


@dataclass(frozen=True)
class DefectFamily:
    """A watched family of algebra names suspected of an additivity defect.

    ``members`` lists set names in construction order (the k-th member
    plays U_k); a member may be absent from shallow levels.  ``union``
    names the set the members are supposed to exhaust in the limit.
    """

    name: str
    members: tuple[str, ...]
    union: str


@dataclass(eq=False)
class Tower:
    """Immutable after construction; build through ``build_tower``."""

    levels: tuple[Instance, ...]
    refinements: tuple[Mapping[str, str], ...]
    subrelations: tuple[FiniteSubrelation, ...]
    algebras: tuple[Mapping[str, frozenset[str]], ...]
    divergence: Mapping[str, tuple[Fraction, ...]] = field(default_factory=dict)
    boundary: tuple[frozenset[str], ...] = ()
    defect_families: tuple[DefectFamily, ...] = ()
    transversals: tuple[str, ...] = ()
    transversal_sets: tuple[Mapping[str, frozenset[str]], ...] = ()
    z_like: frozenset[str] = frozenset()

    @property
    def mode(self) -> str:
        return self.levels[0].mode

    def level_count(self) -> int:
        return len(self.levels)

    def preimages(self, n: int) -> dict[str, list[str]]:
        """Fibers of the refinement map from level n+1 onto level n."""
        fibers: dict[str, list[str]] = {p: [] for p in self.levels[n].points}
        for child, parent in self.refinements[n].items():
            fibers[parent].append(child)
        for parent in fibers:
            fibers[parent].sort()
        return fibers

    def set_at(self, n: int, name: str) -> frozenset[str]:
        try:
            return self.algebras[n][name]
        except KeyError:
            raise ModelError(f"level {n} has no set named {name!r}") from None

    def has_set(self, n: int, name: str) -> bool:
        return name in self.algebras[n]

    def transversal_at(self, n: int, name: str) -> frozenset[str]:
        try:
            return self.transversal_sets[n][name]
        except (KeyError, IndexError):
            raise ModelError(
                f"level {n} has no transversal piece {name!r}") from None


def build_tower(levels: Iterable[Instance],
                refinements: Iterable[Mapping[str, str]],
                subrelations: Iterable[FiniteSubrelation] | None = None,
                algebras: Iterable[Mapping[str, Iterable[str]]] | None = None,
                divergence: Mapping[str, Iterable[Fraction]] | None = None,
                boundary: Iterable[Iterable[str]] | None = None,
                defect_families: Iterable[DefectFamily] = (),
                transversals: Iterable[str] = (),
                transversal_sets: Iterable[Mapping[str, Iterable[str]]] | None = None,
                z_like: Iterable[str] = ()) -> Tower:
    levels = tuple(levels)
    if not levels:
        raise ModelError("tower needs at least one level")
    refinements = tuple(dict(r) for r in refinements)
    if len(refinements) != len(levels) - 1:
        raise ModelError("tower needs exactly one refinement per adjacent pair")

    if subrelations is None:
        subrelations = [FiniteSubrelation.whole_classes(inst) for inst in levels]
    subrelations = tuple(subrelations)
    if len(subrelations) != len(levels):
        raise ModelError("tower needs one subrelation per level")

    if algebras is None:
        algebras = [{} for _ in levels]
    algebras = tuple(
        {name: frozenset(members) for name, members in table.items()}
        for table in algebras)
    if len(algebras) != len(levels):
        raise ModelError("tower needs one algebra per level")

    boundary = tuple(frozenset(b) for b in boundary) if boundary is not None \
        else tuple(frozenset() for _ in levels)
    if len(boundary) != len(levels):
        raise ModelError("tower needs one boundary set per level")

    divergence = {cid: tuple(Fraction(v) for v in sched)
                  for cid, sched in (divergence or {}).items()}

    if transversal_sets is None:
        transversal_sets = tuple({} for _ in levels)
    else:
        transversal_sets = tuple(
            {name: frozenset(members) for name, members in table.items()}
            for table in transversal_sets)
    if len(transversal_sets) != len(levels):
        raise ModelError("tower needs one transversal table per level")

    tower = Tower(levels=levels, refinements=refinements,
                  subrelations=subrelations, algebras=algebras,
                  divergence=divergence, boundary=boundary,
                  defect_families=tuple(defect_families),
                  transversals=tuple(transversals),
                  transversal_sets=transversal_sets,
                  z_like=frozenset(z_like))
    validate_tower(tower)
    return tower


def validate_tower(tower: Tower) -> None:
    levels = tower.levels
    mode = levels[0].mode
    class_ids = set(levels[0].classes)
    for n, inst in enumerate(levels):
        if inst.mode != mode:
            raise ModelError("tower levels mix arithmetic modes")
        if set(inst.classes) != class_ids:
            raise ModelError(f"level {n} changes the class id set")
        if not tower.boundary[n] <= set(inst.points):
            raise ModelError(f"level {n} boundary mentions unknown points")
        for name, members in tower.algebras[n].items():
            if not members <= set(inst.points):
                raise ModelError(
                    f"set {name!r} at level {n} mentions unknown points")

    for n in range(len(levels) - 1):
        _check_refinement(tower, n)
        _check_fiber_sums(tower, n)
        _check_block_coherence(tower, n)
        _check_algebra_pullback(tower, n)

    for cid, schedule in tower.divergence.items():
        if cid not in class_ids:
            raise ModelError(f"divergence declared for unknown class {cid!r}")
        if len(schedule) < len(levels):
            raise ModelError("divergence schedule shorter than the tower")
        for a, b in zip(schedule, schedule[1:]):
            if b <= a:
                raise ModelError("divergence schedule must strictly increase")
        for n, inst in enumerate(levels):
            mass = inst.class_mass(cid)
            bound = schedule[n] if mode == EXACT else float(schedule[n]) * (1 - 1e-9)
            if mass < bound:
                raise ModelError(
                    f"class {cid!r} mass at level {n} falls below its schedule")

    for fam in tower.defect_families:
        for n in range(len(levels)):
            if not tower.has_set(n, fam.union):
                raise ModelError(
                    f"defect family {fam.name!r}: union set {fam.union!r} "
                    f"missing at level {n}")
        if not any(tower.has_set(n, m) for m in fam.members
                   for n in range(len(levels))):
            raise ModelError(f"defect family {fam.name!r} has no realized member")

    if tower.transversals:
        _check_transversals(tower)

    for cid in tower.z_like:
        if cid not in class_ids:
            raise ModelError(f"z-like declaration for unknown class {cid!r}")


def _check_transversals(tower: Tower) -> None:
    """Transversal pieces partition each level in declared order.

    Pieces are kept outside the persistent algebra because truncation
    lets the last piece of a level absorb not-yet-enumerated material:
    the pullback of piece j must contain piece j of the deeper level
    and may additionally spill only into pieces of larger index.
    """
    order = {name: i for i, name in enumerate(tower.transversals)}
    for n, inst in enumerate(tower.levels):
        table = tower.transversal_sets[n]
        unknown = [name for name in table if name not in order]
        if unknown:
            raise ModelError(f"undeclared transversal piece {unknown[0]!r}")
        covered: set[str] = set()
        for name in sorted(table, key=order.get):
            piece = table[name]
            if covered & piece:
                raise ModelError(f"transversal pieces overlap at level {n}")
            covered |= piece
        if covered != set(inst.points):
            raise ModelError(f"transversal pieces do not partition level {n}")
    for n in range(len(tower.levels) - 1):
        pi = tower.refinements[n]
        deep_table = tower.transversal_sets[n + 1]
        member_of_deep = {}
        for name, piece in deep_table.items():
            for p in piece:
                member_of_deep[p] = name
        for name, piece in tower.transversal_sets[n].items():
            pulled = {p for p in tower.levels[n + 1].points if pi[p] in piece}
            deep_piece = deep_table.get(name, frozenset())
            if not deep_piece <= pulled:
                raise ModelError(
                    f"transversal piece {name!r} shrinks at level {n + 1}")
            for p in pulled - deep_piece:
                if order[member_of_deep[p]] <= order[name]:
                    raise ModelError(
                        f"transversal piece {name!r} leaks downward at "
                        f"level {n + 1}")


def _check_refinement(tower: Tower, n: int) -> None:
    shallow, deep = tower.levels[n], tower.levels[n + 1]
    pi = tower.refinements[n]
    if set(pi) != set(deep.points):
        raise ModelError(f"refinement {n} is not total on level {n + 1}")
    image = set(pi.values())
    if image != set(shallow.points):
        raise ModelError(f"refinement {n} is not onto level {n}")
    for child, parent in pi.items():
        if deep.class_of[child] != shallow.class_of[parent]:
            raise ModelError(f"refinement {n} moves {child!r} across classes")


def _check_fiber_sums(tower: Tower, n: int) -> None:
    """Fiber weights must sum to a per-class constant times the parent weight."""
    shallow, deep = tower.levels[n], tower.levels[n + 1]
    fibers = tower.preimages(n)
    exempt = tower.boundary[n]
    for cid in shallow.sorted_classes():
        constant = None
        for parent in shallow.classes[cid]:
            if parent in exempt:
                continue
            fiber_mass = _mass(deep, fibers[parent])
            ratio = fiber_mass / shallow.weight(parent)
            if constant is None:
                constant = ratio
            elif not scalar_eq(ratio, constant, shallow.mode):
                raise ModelError(
                    f"refinement {n} is not cocycle-compatible on class "
                    f"{cid!r} at {parent!r}")


def _check_block_coherence(tower: Tower, n: int) -> None:
    """Each deeper block must project into a single shallower block."""
    pi = tower.refinements[n]
    shallow_sub = tower.subrelations[n]
    for block in tower.subrelations[n + 1].blocks:
        reps = {shallow_sub.rep(pi[p]) for p in block}
        if len(reps) > 1:
            raise ModelError(
                f"block {block} at level {n + 1} projects across "
                f"level-{n} blocks")


def _check_algebra_pullback(tower: Tower, n: int) -> None:
    pi = tower.refinements[n]
    deep_points = tower.levels[n + 1].points
    for name, members in tower.algebras[n].items():
        if name not in tower.algebras[n + 1]:
            raise ModelError(
                f"set {name!r} vanishes between levels {n} and {n + 1}")
        pulled = frozenset(p for p in deep_points if pi[p] in members)
        if pulled != tower.algebras[n + 1][name]:
            raise ModelError(
                f"set {name!r} at level {n + 1} is not the pullback of "
                f"its level-{n} version")


def nu_table(tower: Tower, n: int, name: str) -> dict[str, object]:
    """Per-block normalized sizes of a named set at one level.

    Maps each block representative of the level's subrelation to
    |A cap P| anchored at the set P, i.e. the share of the block's mass
    lying in A.  This is the finite realization of the family of
    conditional measures the tower approximates.
    """
    inst = tower.levels[n]
    members = tower.set_at(n, name)
    table: dict[str, object] = {}
    for block in tower.subrelations[n].blocks:
        inside = [p for p in block if p in members]
        table[block[0]] = _mass(inst, inside) / _mass(inst, block)
    return table


def class_share(tower: Tower, n: int, name: str, cid: str):
    """Share of a class's mass lying in a named set at one level."""
    inst = tower.levels[n]
    members = tower.set_at(n, name)
    inside = [p for p in inst.classes[cid] if p in members]
    return _mass(inst, inside) / _mass(inst, inst.classes[cid])


def compose_refinements(tower: Tower, deep: int, shallow: int) -> dict[str, str]:
    """Composite refinement map from level ``deep`` down to level ``shallow``."""
    if not 0 <= shallow <= deep < tower.level_count():
        raise ModelError("bad level pair")
    mapping = {p: p for p in tower.levels[deep].points}
    for n in range(deep - 1, shallow - 1, -1):
        pi = tower.refinements[n]
        mapping = {p: pi[q] for p, q in mapping.items()}
    return mapping
