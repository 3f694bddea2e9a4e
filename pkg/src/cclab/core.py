"""Core model: finite weighted equivalence relations and their cocycles.

An instance is an equivalence relation on a finite set of named points
together with a positive cocycle rho on the relation.  Cocycles are kept
in potential form throughout: rho(x, y) = w(x) / w(y) for a per-point
weight w normalized so that the basepoint of each class (its minimum
point id) has weight exactly 1.  Two consequences worth spelling out:

* every cocycle identity rho(x, y) * rho(y, z) = rho(x, z) holds by
  construction, so it never needs runtime checking;
* equality questions (coboundary checks, invariance of measures) reduce
  to per-class constancy of a single quotient, which is O(points).

Arithmetic is exact by default: weights are `fractions.Fraction` and all
derived quantities (sizes, masses, measures) stay rational.  The opt-in
float mode stores log-weights instead, so ratios are exp-differences and
astronomically unbalanced potentials remain representable; comparisons
in that mode use a relative tolerance of 1e-9.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)

REL_TOL = 1e-9
ABS_TOL = 1e-12


class ModelError(ValueError):
    """Base class for structural errors in instances and derived objects."""


class CycleInconsistencyError(ModelError):
    pass


class DisconnectedPresentationError(ModelError):
    pass


class NotLacunaryError(ModelError):
    pass


class NotCertifiedAperiodicError(ModelError):
    pass


class NoCertifiedDefectError(ModelError):
    pass


class FormatError(ModelError):
    """Raised for malformed files and certificates."""


def scalar_eq(a, b, mode: str) -> bool:
    """Equality test that respects the instance's arithmetic mode."""
    if mode == EXACT:
        return a == b
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=ABS_TOL)


def scalar_sum(values, mode: str):
    total = Fraction(0) if mode == EXACT else 0.0
    for v in values:
        total += v
    return total


@dataclass(frozen=True)
class Interval:
    """An interval of positive reals, open at either end unless flagged closed.

    The neighborhoods that drive lacunarity graphs are open; the compact
    coloring routine works with closed [k1, k2].  Endpoints are rational.
    """

    lower: Fraction
    upper: Fraction
    lower_closed: bool = False
    upper_closed: bool = False

    def __post_init__(self):
        if self.lower <= 0 or self.upper <= 0:
            raise ModelError("interval endpoints must be positive")
        if self.lower > self.upper:
            raise ModelError("empty interval")

    @classmethod
    def default_unit(cls) -> "Interval":
        return cls(Fraction(1, 2), Fraction(2))

    @classmethod
    def closed(cls, lower, upper) -> "Interval":
        return cls(Fraction(lower), Fraction(upper), True, True)

    def contains(self, value) -> bool:
        lo = value >= self.lower if self.lower_closed else value > self.lower
        hi = value <= self.upper if self.upper_closed else value < self.upper
        return lo and hi

    def scale(self, factor: Fraction) -> "Interval":
        return Interval(self.lower * factor, self.upper * factor,
                        self.lower_closed, self.upper_closed)


@dataclass(frozen=True, eq=False)
class Cocycle:
    """Potential form of a positive cocycle.

    In exact mode ``values[x]`` is the weight w(x) as a Fraction, with
    w(basepoint) = 1 per class.  In float mode ``values[x]`` is log w(x)
    with log-weight 0.0 at the basepoint.
    """

    mode: str
    values: Mapping[str, object]
    basepoints: Mapping[str, str]

    def weight(self, x: str):
        if self.mode == EXACT:
            return self.values[x]
        return math.exp(self.values[x])

    def ratio(self, x: str, y: str):
        if self.mode == EXACT:
            return self.values[x] / self.values[y]
        return math.exp(self.values[x] - self.values[y])


@dataclass(eq=False)
class Instance:
    """A finite equivalence relation with a positive cocycle in potential form.

    Treated as immutable after construction; all mutating conveniences
    return fresh instances.  Points and class members are kept sorted so
    every iteration over an instance is deterministic.
    """

    points: tuple[str, ...]
    class_of: Mapping[str, str]
    classes: Mapping[str, tuple[str, ...]]
    cocycle: Cocycle
    generators: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.cocycle.mode

    def basepoint(self, cid: str) -> str:
        return self.cocycle.basepoints[cid]

    def same_class(self, x: str, y: str) -> bool:
        return self.class_of[x] == self.class_of[y]

    def ratio(self, x: str, y: str):
        if self.class_of[x] != self.class_of[y]:
            raise ModelError(f"points {x!r} and {y!r} are not equivalent")
        return self.cocycle.ratio(x, y)

    def weight(self, x: str):
        """Weight of x relative to its class basepoint."""
        return self.cocycle.weight(x)

    def size_at(self, ys: Iterable[str], z: str):
        """rho-size of a set anchored at the point z: sum of rho(y, z)."""
        cz = self.class_of[z]
        total = Fraction(0) if self.mode == EXACT else 0.0
        for y in ys:
            if self.class_of[y] != cz:
                raise ModelError("rho-size anchor and set must share a class")
            total += self.cocycle.ratio(y, z)
        return total

    def class_mass(self, cid: str):
        return self.size_at(self.classes[cid], self.basepoint(cid))

    def generator_map(self, name: str) -> Mapping[str, str]:
        return self.generators[name]

    def generator_ratio(self, name: str) -> dict[str, object]:
        """Pointwise cocycle of a generator: x -> rho(gamma x, x)."""
        gamma = self.generators[name]
        return {x: self.ratio(gamma[x], x) for x in self.points}

    def sorted_classes(self) -> list[str]:
        return sorted(self.classes)


def _as_weight(value, mode: str):
    """Coerce a raw user-supplied weight; rejects non-positive potentials."""
    if mode == EXACT:
        w = value if isinstance(value, Fraction) else Fraction(value)
        if w <= 0:
            raise ModelError("non-positive potential")
        return w
    w = float(value)
    if not w > 0 or math.isinf(w):
        raise ModelError("non-positive potential")
    return w


def build_instance(classes: Mapping[str, Iterable[str]],
                   weights: Mapping[str, object],
                   generators: Mapping[str, Mapping[str, str]] | None = None,
                   mode: str = EXACT) -> Instance:
    """Validate and normalize raw data into an Instance.

    ``weights`` are arbitrary positive scalars; they are rescaled per
    class so the minimum point id carries weight 1 (log-weight 0 in
    float mode).  Generators must be class-preserving bijections of the
    whole point set.
    """
    if mode not in MODES:
        raise ModelError(f"unknown mode {mode!r}")
    class_of: dict[str, str] = {}
    norm_classes: dict[str, tuple[str, ...]] = {}
    for cid in sorted(classes):
        members = sorted(classes[cid])
        if not members:
            raise ModelError(f"class {cid!r} is empty")
        for p in members:
            if p in class_of:
                raise ModelError(f"point {p!r} appears in two classes")
            class_of[p] = cid
        norm_classes[cid] = tuple(members)
    points = tuple(sorted(class_of))
    if not points:
        raise ModelError("instance has no points")
    missing = [p for p in points if p not in weights]
    if missing:
        raise ModelError(f"missing weights for {missing[:3]}")

    raw = {p: _as_weight(weights[p], mode) for p in points}
    values: dict[str, object] = {}
    basepoints: dict[str, str] = {}
    for cid, members in norm_classes.items():
        base = members[0]
        basepoints[cid] = base
        for p in members:
            if mode == EXACT:
                values[p] = raw[p] / raw[base]
            else:
                values[p] = math.log(raw[p]) - math.log(raw[base])

    gens: dict[str, Mapping[str, str]] = {}
    for name in sorted(generators or {}):
        gamma = dict(generators[name])
        if sorted(gamma) != list(points) or sorted(gamma.values()) != list(points):
            raise ModelError(f"generator {name!r} is not a permutation of the points")
        for x, y in gamma.items():
            if class_of[x] != class_of[y]:
                raise ModelError(f"generator {name!r} does not preserve classes")
        gens[name] = gamma

    cocycle = Cocycle(mode=mode, values=values, basepoints=basepoints)
    return Instance(points=points, class_of=class_of, classes=norm_classes,
                    cocycle=cocycle, generators=gens)


def cocycle_from_edges(classes: Mapping[str, Iterable[str]],
                       edges: Iterable[tuple[str, str, object]],
                       mode: str = EXACT) -> Instance:
    """Build an instance from ratio constraints rho(x, y) = value.

    Weights are propagated breadth-first inside each declared class and
    then every supplied edge is checked against the propagated values,
    so an inconsistent cycle is always detected.  Classes whose edge
    graph does not connect them raise a disconnected-presentation error.
    """
    class_of: dict[str, str] = {}
    for cid, members in classes.items():
        for p in members:
            class_of[p] = cid

    adjacency: dict[str, list[tuple[str, object]]] = {p: [] for p in class_of}
    checked: list[tuple[str, str, object]] = []
    for x, y, value in edges:
        if x not in class_of or y not in class_of:
            raise ModelError(f"edge ({x!r}, {y!r}) mentions an unknown point")
        if class_of[x] != class_of[y]:
            raise ModelError(f"edge ({x!r}, {y!r}) crosses classes")
        v = _as_weight(value, mode)
        # rho(x, y) = v means w(x) = v * w(y): knowing y determines x.
        inv = 1 / v if mode == EXACT else 1.0 / v
        adjacency[y].append((x, v))
        adjacency[x].append((y, inv))
        checked.append((x, y, v))

    weights: dict[str, object] = {}
    for cid in sorted(classes):
        members = sorted(classes[cid])
        root = members[0]
        # rho(x, y) = v means w(x) = v * w(y); propagate from w(root) = 1.
        local: dict[str, object] = {root: Fraction(1) if mode == EXACT else 1.0}
        queue = [root]
        while queue:
            y = queue.pop(0)
            for x, v in adjacency[y]:
                if x not in local:
                    local[x] = v * local[y]
                    queue.append(x)
        absent = [p for p in members if p not in local]
        if absent:
            raise DisconnectedPresentationError(
                f"disconnected presentation: class {cid!r} misses {absent[:3]}")
        weights.update(local)

    inst = build_instance(classes, weights, mode=mode)
    for x, y, v in checked:
        if not scalar_eq(inst.ratio(x, y), v, mode):
            raise CycleInconsistencyError(
                f"cycle inconsistency at edge ({x!r}, {y!r})")
    return inst


def rho_eval(instance: Instance, x: str, y: str):
    """The cocycle value rho(x, y) = w(x) / w(y); errors on non-equivalent points."""
    return instance.ratio(x, y)


def rho_size(instance: Instance, ys: Iterable[str], anchor):
    """rho-size of a finite set, anchored at a point or at a nonempty set.

    Point anchor z: |Y|_z = sum over y of rho(y, z); the empty set has
    size 0.  Set anchor Z: |Y|_Z = |Y|_z / |Z|_z for any z in Z, which
    is anchor-independent because switching z rescales numerator and
    denominator by the same rho(z, z').
    """
    ys = list(ys)
    if isinstance(anchor, str):
        return instance.size_at(ys, anchor)
    zs = sorted(anchor)
    if not zs:
        raise ModelError("set anchor must be nonempty")
    z = zs[0]
    return instance.size_at(ys, z) / instance.size_at(zs, z)


@dataclass(eq=False)
class FiniteSubrelation:
    """A finite subrelation given by its partition into blocks.

    Blocks refine the classes: each block lies inside one class.  Points
    not mentioned when building are filled in as singleton blocks, so a
    subrelation always partitions the full point set.  Blocks are sorted
    by their minimum point id and each block keeps its members sorted,
    making the block representative (first member) canonical.
    """

    blocks: tuple[tuple[str, ...], ...]
    _index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self._index:
            for i, block in enumerate(self.blocks):
                for p in block:
                    self._index[p] = i

    @classmethod
    def from_blocks(cls, instance: Instance,
                    blocks: Iterable[Iterable[str]]) -> "FiniteSubrelation":
        seen: set[str] = set()
        norm: list[tuple[str, ...]] = []
        for raw in blocks:
            members = tuple(sorted(raw))
            if not members:
                continue
            cids = {instance.class_of.get(p) for p in members}
            if None in cids:
                unknown = [p for p in members if p not in instance.class_of]
                raise ModelError(f"block mentions unknown points {unknown[:3]}")
            if len(cids) > 1:
                raise ModelError(f"block {members} crosses classes")
            overlap = seen.intersection(members)
            if overlap:
                raise ModelError(f"blocks overlap at {sorted(overlap)[:3]}")
            seen.update(members)
            norm.append(members)
        for p in instance.points:
            if p not in seen:
                norm.append((p,))
        norm.sort(key=lambda b: b[0])
        return cls(blocks=tuple(norm))

    @classmethod
    def equality(cls, instance: Instance) -> "FiniteSubrelation":
        return cls.from_blocks(instance, [])

    @classmethod
    def whole_classes(cls, instance: Instance) -> "FiniteSubrelation":
        return cls.from_blocks(instance, instance.classes.values())

    def block_of(self, x: str) -> tuple[str, ...]:
        return self.blocks[self._index[x]]

    def rep(self, x: str) -> str:
        return self.blocks[self._index[x]][0]

    def same_block(self, x: str, y: str) -> bool:
        return self._index[x] == self._index[y]

    def reps(self) -> list[str]:
        return [b[0] for b in self.blocks]


def quotient_by(instance: Instance, subrel: FiniteSubrelation):
    """Quotient an instance by a finite subrelation.

    Quotient points are block representatives (minimum ids); the induced
    cocycle is determined by block masses: (rho/F)([x], [y]) equals the
    rho-size of [x] anchored at the set [y].  Generators do not descend
    and are dropped.  Returns the quotient instance and the projection
    map point -> representative.
    """
    classes: dict[str, list[str]] = {}
    weights: dict[str, object] = {}
    projection: dict[str, str] = {}
    for block in subrel.blocks:
        rep = block[0]
        cid = instance.class_of[rep]
        classes.setdefault(cid, []).append(rep)
        if instance.mode == EXACT:
            weights[rep] = sum((instance.weight(p) for p in block), Fraction(0))
        else:
            logs = [instance.cocycle.values[p] for p in block]
            m = max(logs)
            weights[rep] = math.exp(m) * sum(math.exp(v - m) for v in logs)
        for p in block:
            projection[p] = rep
    quotient = build_instance(classes, weights, mode=instance.mode)
    return quotient, projection


def coboundary_check(instance: Instance, witness: Mapping[str, object]):
    """Decide whether rho(x, y) = f(x) / f(y) for the supplied positive f.

    Equivalent to w(x) / f(x) being constant on every class, so the test
    anchors each class at its basepoint and compares pointwise.  Returns
    (ok, violations) where violations lists offending (point, basepoint)
    pairs.
    """
    mode = instance.mode
    for p in instance.points:
        if p not in witness:
            raise ModelError(f"witness misses point {p!r}")
        _as_weight(witness[p], mode)
    violations: list[tuple[str, str]] = []
    for cid in instance.sorted_classes():
        base = instance.basepoint(cid)
        for p in instance.classes[cid]:
            expected = (Fraction(witness[p]) / Fraction(witness[base])
                        if mode == EXACT
                        else float(witness[p]) / float(witness[base]))
            if not scalar_eq(instance.ratio(p, base), expected, mode):
                violations.append((p, base))
    return (not violations), violations


def is_constant_cocycle(instance: Instance) -> bool:
    ones = {p: 1 for p in instance.points}
    ok, _ = coboundary_check(instance, ones)
    return ok


def weight_mass(instance: Instance, points: Iterable[str]):
    """Sum of basepoint-relative weights; meaningful within one class.

    In float mode the sum runs through a max-shifted exponential so
    log-weights with huge spread do not overflow.
    """
    pts = list(points)
    if instance.mode == EXACT:
        return sum((instance.weight(p) for p in pts), Fraction(0))
    logs = [instance.cocycle.values[p] for p in pts]
    if not logs:
        return 0.0
    m = max(logs)
    return math.exp(m) * sum(math.exp(v - m) for v in logs)


def restrict_to_classes(instance: Instance, class_ids: Iterable[str]) -> Instance:
    """Sub-instance on a union of whole classes (class-invariant restriction)."""
    keep = sorted(set(class_ids))
    unknown = [c for c in keep if c not in instance.classes]
    if unknown:
        raise ModelError(f"unknown classes {unknown[:3]}")
    if not keep:
        raise ModelError("restriction would be empty")
    classes = {cid: instance.classes[cid] for cid in keep}
    if instance.mode == EXACT:
        weights = {p: instance.weight(p) for cid in keep for p in classes[cid]}
    else:
        weights = {p: math.exp(instance.cocycle.values[p])
                   for cid in keep for p in classes[cid]}
    # Generators preserve classes, so restricting to whole classes keeps
    # them permutations of the surviving point set.
    gens = {name: {x: y for x, y in gamma.items()
                   if instance.class_of[x] in classes}
            for name, gamma in instance.generators.items()}
    return build_instance(classes, weights, generators=gens, mode=instance.mode)
