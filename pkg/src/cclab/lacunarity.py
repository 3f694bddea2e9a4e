"""Lacunarity graphs and the smoothness witnesses they generate.

A lacunarity graph joins two equivalent points exactly when their
cocycle ratio lands in a chosen interval; an independent set is one
whose internal ratios all escape the interval (a rho-lacunary set).
At desk scale smoothness is witnessed, not classified: the greedy
coloring partitions any finite instance into finitely many
independent pieces, and the other operations massage such witnesses
into the forms the structure theory consumes.

Two constructions deserve a note.  The compact-interval coloring
transfers a coloring for an open symmetric neighborhood U = (1/r, r)
to an arbitrary closed ratio window K by covering K with a geometric
ladder of closed translates of (1/s, s), s chosen with s*s < r so
that two points sharing a translate relative to a common anchor are
U-adjacent.  The ladder bounds the within-piece degree of the window
graph by twice the translate count, which caps the greedy color count;
the bounds are asserted rather than colored into the output, so an
empty window graph still collapses to a single color.

The order split turns independence into structure.  Within one piece
and one class the weights order the points strictly (a ratio of
exactly 1 inside a piece defeats the order and raises
NotLacunaryError), and a tower may declare classes whose per-piece
orders become two-sided infinite in the limit.  No finite computation
can certify that, so the declaration is validated on the two deepest
levels instead: strict orders, growth, and order consistency along
the refinement.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from cclab.core import (
    EXACT,
    FiniteSubrelation,
    Instance,
    Interval,
    ModelError,
    NotLacunaryError,
    quotient_by,
    scalar_eq,
    weight_mass as _mass,
)
from cclab.tower import Tower

FROM_COLORING = "from-coloring"
TO_COLORING = "to-coloring"


@dataclass(eq=False)
class LacunarityGraph:
    """Digraph of equivalent point pairs whose ratio lies in the interval.

    Edges are ordered pairs (x, y) with rho(x, y) in the interval;
    whenever the interval is symmetric the edge set is too.  Adjacency
    ignores orientation, which is what coloring and independence need.
    """

    instance: Instance
    interval: Interval
    edges: tuple[tuple[str, str], ...]
    _adjacency: dict[str, set[str]] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self._adjacency:
            adj: dict[str, set[str]] = {p: set() for p in self.instance.points}
            for x, y in self.edges:
                adj[x].add(y)
                adj[y].add(x)
            self._adjacency.update(adj)

    def neighbors(self, x: str) -> list[str]:
        return sorted(self._adjacency[x])

    def adjacent(self, x: str, y: str) -> bool:
        return y in self._adjacency[x]

    def undirected_pairs(self) -> list[tuple[str, str]]:
        return sorted({(x, y) if x < y else (y, x) for x, y in self.edges})

    def is_independent(self, points) -> bool:
        pts = set(points)
        return not any(self._adjacency[p] & pts for p in pts)


def lacunarity_graph(instance: Instance,
                     interval: Interval | None = None) -> LacunarityGraph:
    """All ordered within-class pairs of distinct points with ratio in U."""
    if interval is None:
        interval = Interval.default_unit()
    edges: list[tuple[str, str]] = []
    for cid in instance.sorted_classes():
        members = instance.classes[cid]
        for x in members:
            for y in members:
                if x != y and interval.contains(instance.ratio(x, y)):
                    edges.append((x, y))
    edges.sort()
    return LacunarityGraph(instance=instance, interval=interval,
                           edges=tuple(edges))


@dataclass(eq=False)
class Coloring:
    """Point colors; every color class must be independent in its graph."""

    colors: dict[str, int]

    def classes(self) -> list[tuple[str, ...]]:
        buckets: dict[int, list[str]] = {}
        for p in sorted(self.colors):
            buckets.setdefault(self.colors[p], []).append(p)
        return [tuple(buckets[c]) for c in sorted(buckets)]

    def count(self) -> int:
        return len(set(self.colors.values()))


def verify_coloring(graph: LacunarityGraph, coloring: Coloring):
    """Exhaustive validity check: no edge joins same-colored points."""
    violations: list[tuple[str, str]] = []
    for p in graph.instance.points:
        if p not in coloring.colors:
            violations.append((p, p))
    for x, y in graph.undirected_pairs():
        if coloring.colors.get(x) == coloring.colors.get(y):
            violations.append((x, y))
    return (not violations), violations


def greedy_coloring(graph: LacunarityGraph) -> Coloring:
    """Least absent color among already-colored neighbors, in id order."""
    colors: dict[str, int] = {}
    for p in graph.instance.points:
        used = {colors[q] for q in graph._adjacency[p] if q in colors}
        c = 0
        while c in used:
            c += 1
        colors[p] = c
    return Coloring(colors=colors)


def complete_independent(graph: LacunarityGraph, data, direction: str):
    """Trade a coloring for a complete independent set, or back.

    from-coloring: peel the color classes in order, keeping from each
    only the points whose class no earlier color class has touched.
    The result meets every class (the first color touching a class
    contributes) and is independent (within a color class by validity,
    across color classes because later points live in untouched
    classes).

    to-coloring: the input must already be complete and independent;
    the within-class enumeration then decomposes the relation between
    the set and the space into finitely many partial maps, and the map
    index is the color.
    """
    instance = graph.instance
    if direction == FROM_COLORING:
        ok, _ = verify_coloring(graph, data)
        if not ok:
            raise ModelError("input coloring is not valid for the graph")
        chosen: list[str] = []
        covered: set[str] = set()
        for color_class in data.classes():
            chosen.extend(p for p in color_class
                          if instance.class_of[p] not in covered)
            covered.update(instance.class_of[p] for p in color_class)
        result = tuple(sorted(chosen))
        if not graph.is_independent(result):
            raise ModelError("coloring did not yield an independent set")
        return result
    if direction == TO_COLORING:
        members = set(data)
        unknown = sorted(p for p in members if p not in instance.class_of)
        if unknown:
            raise ModelError(f"input set mentions unknown points {unknown[:3]}")
        missed = [cid for cid in instance.sorted_classes()
                  if not members.intersection(instance.classes[cid])]
        if missed:
            raise ModelError("input set is not E-complete")
        if not graph.is_independent(members):
            raise ModelError("input set is not independent")
        colors = {}
        for cid in instance.sorted_classes():
            for i, p in enumerate(instance.classes[cid]):
                colors[p] = i
        return Coloring(colors=colors)
    raise ModelError(f"unknown direction {direction!r}")


def compact_interval_coloring(instance: Instance, u: Interval,
                              k: Interval) -> Coloring:
    """Color the graph of a closed ratio window through an open one.

    The window K = [k1, k2] is covered by closed translates
    [k1 * s^(2i-2), k1 * s^(2i)] of (1/s, s), with s halved toward 1
    from (1+r)/2 until s*s < r.  Relative to any anchor, same-translate
    points are U-adjacent, so inside one U-piece a point has at most
    one window neighbor per translate and orientation.  The coloring
    itself is the plain greedy pass over the window graph; the ladder
    shows up as asserted degree and color-count bounds.
    """
    if not (k.lower_closed and k.upper_closed):
        raise ModelError("ratio window must be a closed interval")
    if (u.lower_closed or u.upper_closed or u.upper <= 1
            or u.lower * u.upper != 1):
        raise ModelError(
            "neighborhood must be an open symmetric interval (1/r, r)")
    r = u.upper
    s = (1 + r) / 2
    while s * s >= r:
        s = (1 + s) / 2

    step = s * s
    translates = [Interval.closed(k.lower, k.lower * step)]
    while k.lower * step ** len(translates) < k.upper:
        low = k.lower * step ** len(translates)
        translates.append(Interval.closed(low, low * step))
    n_translates = len(translates)
    if translates[-1].upper < k.upper:
        raise ModelError("translate ladder fails to reach the window")

    window = lacunarity_graph(instance, k)
    for x, y in window.edges:
        ratio = instance.ratio(x, y)
        if not any(t.contains(ratio) for t in translates):
            raise ModelError("translate ladder fails to cover a realized "
                             "ratio")

    # Section pairs relative to a common anchor must be U-cliques; this
    # is forced by s*s < r and checked because everything else rests on it.
    for z in instance.points:
        others = [y for y in instance.classes[instance.class_of[z]] if y != z]
        for t in translates:
            for section in ([y for y in others
                             if t.contains(instance.ratio(y, z))],
                            [y for y in others
                             if t.contains(instance.ratio(z, y))]):
                for a, b in itertools.combinations(section, 2):
                    if not u.contains(instance.ratio(a, b)):
                        raise ModelError("translate sections are not cliques")

    pieces = greedy_coloring(lacunarity_graph(instance, u))
    for p in instance.points:
        same_piece = [q for q in window._adjacency[p]
                      if pieces.colors[q] == pieces.colors[p]]
        if len(same_piece) > 2 * n_translates:
            raise ModelError("piece degree exceeds the ladder bound")

    coloring = greedy_coloring(window)
    if coloring.count() > pieces.count() * (2 * n_translates + 1):
        raise ModelError("color count exceeds the ladder bound")
    return coloring


def lacunary_partition(instance: Instance,
                       interval: Interval | None = None) -> list[tuple[str, ...]]:
    """Color classes of the greedy coloring: finitely many lacunary sets."""
    return greedy_coloring(lacunarity_graph(instance, interval)).classes()


def lacunary_order_split(target, interval: Interval | None = None):
    """Split points into a declared two-sided-order part and the rest.

    Returns (b, successor, leftover).  Within each lacunary piece and
    class, points are strictly ordered by weight; b collects the
    deepest-level points of classes a tower declares to carry a
    two-sided infinite order, successor maps each such point to the
    next one in its piece, and leftover is everything else, smooth by
    finiteness of its pieces.  Purely finite instances never certify a
    two-sided order, so for them b is always empty.
    """
    if interval is None:
        interval = Interval.default_unit()
    if not isinstance(target, Tower):
        pieces = lacunary_partition(target, interval)
        _check_ties(target, pieces)
        return (), {}, tuple(target.points)

    tower = target
    deep = tower.levels[-1]
    deep_pieces = lacunary_partition(deep, interval)
    _check_ties(deep, deep_pieces)
    if not tower.z_like:
        return (), {}, tuple(deep.points)
    if tower.level_count() < 2:
        raise ModelError("z-like declarations need at least two levels")

    shallow = tower.levels[-2]
    shallow_pieces = lacunary_partition(shallow, interval)
    _check_ties(shallow, shallow_pieces)
    shallow_piece_of = {p: i for i, piece in enumerate(shallow_pieces)
                        for p in piece}
    project = tower.refinements[-1]

    for cid in sorted(tower.z_like):
        if len(deep.classes[cid]) <= len(shallow.classes[cid]):
            raise ModelError(f"class {cid!r} is declared z-like but does "
                             f"not grow between the deepest levels")
        for piece in deep_pieces:
            members = _ordered(deep, [p for p in piece
                                      if deep.class_of[p] == cid])
            for x, y in itertools.combinations(members, 2):
                px, py = project[x], project[y]
                if (px != py
                        and shallow_piece_of[px] == shallow_piece_of[py]
                        and shallow.cocycle.values[px]
                        > shallow.cocycle.values[py]):
                    raise ModelError(f"class {cid!r} is declared z-like but "
                                     f"its order flips along the refinement")

    b: list[str] = []
    successor: dict[str, str] = {}
    for piece in deep_pieces:
        for cid in sorted(tower.z_like):
            members = _ordered(deep, [p for p in piece
                                      if deep.class_of[p] == cid])
            b.extend(members)
            for x, y in zip(members, members[1:]):
                successor[x] = y
    leftover = tuple(p for p in deep.points if p not in set(b))
    return tuple(sorted(b)), successor, leftover


def _ordered(instance: Instance, points) -> list[str]:
    """Weight-ascending order; log-weights sort identically in float mode."""
    return sorted(points, key=lambda p: instance.cocycle.values[p])


def _check_ties(instance: Instance, pieces) -> None:
    for piece in pieces:
        by_class: dict[str, list[str]] = {}
        for p in piece:
            by_class.setdefault(instance.class_of[p], []).append(p)
        for members in by_class.values():
            ordered = _ordered(instance, members)
            for x, y in zip(ordered, ordered[1:]):
                one = Fraction(1) if instance.mode == EXACT else 1.0
                if scalar_eq(instance.ratio(x, y), one, instance.mode):
                    raise NotLacunaryError("not lacunary enough")


def quotient_independence_transfer(instance: Instance,
                                   subrel: FiniteSubrelation,
                                   r=None) -> bool:
    """Independence transfers between an instance and its quotient.

    With r at least every anchored class mass, a (1/r^2, r^2)-independent
    set saturates and descends to a (1/r, r)-independent subset of the
    quotient, and a (1/r^2, r^2)-independent set of quotient points pulls
    back to a set with no (1/r, r)-edges outside the subrelation.  Both
    directions are checked on the greedy partitions, which supply the
    independent sets.
    """
    if r is None:
        r = Fraction(1)
        for cid in instance.sorted_classes():
            members = instance.classes[cid]
            mass = _mass(instance, members)
            low = min(instance.weight(p) for p in members)
            r = max(r, Fraction(mass / low) if instance.mode == EXACT
                    else Fraction.from_float(mass / low))
    r = Fraction(r)
    wide = Interval(1 / (r * r), r * r)
    narrow = Interval(1 / r, r)

    quotient, project = quotient_by(instance, subrel)
    narrow_quotient = lacunarity_graph(quotient, narrow)
    for piece in lacunary_partition(instance, wide):
        image = {project[p] for p in piece}
        if not narrow_quotient.is_independent(image):
            return False

    narrow_graph = lacunarity_graph(instance, narrow)
    for piece in lacunary_partition(quotient, wide):
        reps = set(piece)
        pulled = sorted(p for p in instance.points if project[p] in reps)
        for x, y in itertools.combinations(pulled, 2):
            if (instance.same_class(x, y) and not subrel.same_block(x, y)
                    and narrow_graph.adjacent(x, y)):
                return False
    return True
