"""Independent brute-force checkers backing the property tests.

Everything here recomputes its answer from raw point weights with
plain loops: no solver, verifier, or greedy-search code path from the
rest of the package is called.  That makes these functions slow and
exponential, which is the point; they are only run on instances small
enough to enumerate.

The map searches exploit one factorization.  A class-preserving
self-map chooses, independently for each class, a self-map of that
class, and its fibers live inside single classes.  A global map has
all fiber rho-sizes bounded iff each per-class factor does, so
enumerating the per-class survivors is an exhaustive search over all
class-preserving maps without materializing the product.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from cclab.core import EXACT, Instance, ModelError


def all_class_self_maps(instance: Instance, cid: str):
    """Every self-map of one class, as point -> point dicts."""
    members = instance.classes[cid]
    for images in itertools.product(members, repeat=len(members)):
        yield dict(zip(members, images))


def fiber_sizes(instance: Instance, cid: str, mapping) -> dict:
    """rho-size of every preimage, empty fibers included, from weights."""
    members = instance.classes[cid]
    pre: dict[str, list[str]] = {y: [] for y in members}
    for x in members:
        pre[mapping[x]].append(x)
    zero = Fraction(0) if instance.mode == EXACT else 0.0
    out = {}
    for y in members:
        total = zero
        for x in pre[y]:
            total += instance.weight(x) / instance.weight(y)
        out[y] = total
    return out


def fiber_sizes_bounded(instance: Instance, cid: str, mapping) -> bool:
    return all(size <= 1 for size in fiber_sizes(instance, cid, mapping).values())


def bounded_fiber_maps_by_class(instance: Instance) -> dict[str, list[dict]]:
    """Per class, every self-map whose fibers all have rho-size <= 1.

    By the factorization in the module docstring this determines all
    class-preserving maps of the instance with bounded fibers: they
    are exactly the products of one survivor per class.
    """
    out: dict[str, list[dict]] = {}
    for cid in instance.sorted_classes():
        out[cid] = [m for m in all_class_self_maps(instance, cid)
                    if fiber_sizes_bounded(instance, cid, m)]
    return out


def count_class_preserving_maps(instance: Instance) -> int:
    total = 1
    for cid in instance.sorted_classes():
        k = len(instance.classes[cid])
        total *= k ** k
    return total


def no_strict_bounded_class_map(instance: Instance, cid: str,
                                exhaustive_limit: int = 6) -> tuple[bool, str]:
    """Confirm no self-map of the class is bounded and strict somewhere.

    Small classes are settled by enumeration.  For larger ones the
    regrouping identity sum_y |fiber(y)| w(y) = class mass (each point
    lands in exactly one fiber) is recomputed exactly on a spread of
    sample maps; sizes all <= 1 with one strictly below would force
    mass < mass, so the identity is the whole obstruction.
    """
    members = instance.classes[cid]
    if len(members) <= exhaustive_limit:
        for mapping in all_class_self_maps(instance, cid):
            sizes = fiber_sizes(instance, cid, mapping)
            if all(s <= 1 for s in sizes.values()) and \
                    any(s < 1 for s in sizes.values()):
                return False, "exhaustive"
        return True, "exhaustive"
    mass = sum(instance.weight(p) for p in members)
    heaviest = max(members, key=lambda p: (instance.weight(p), p))
    samples = [
        {p: p for p in members},
        {p: heaviest for p in members},
        {p: members[(i + 1) % len(members)] for i, p in enumerate(members)},
    ]
    for mapping in samples:
        sizes = fiber_sizes(instance, cid, mapping)
        regrouped = sum(sizes[y] * instance.weight(y) for y in members)
        if regrouped != mass:
            raise ModelError(f"mass regrouping identity failed on {cid!r}")
    return True, "mass-identity"


def shift_to_heavier_mapping(instance: Instance) -> dict[str, str]:
    """Map each point to the next heavier one in its class.

    The heaviest point maps to itself, so its fiber piles two points
    on one and overflows the unit bound whenever the class has more
    than one point.  This is the natural candidate a verifier must
    reject on any instance carrying an invariant measure.
    """
    mapping: dict[str, str] = {}
    for cid in instance.sorted_classes():
        order = sorted(instance.classes[cid],
                       key=lambda p: (instance.weight(p), p))
        for i, p in enumerate(order):
            mapping[p] = order[min(i + 1, len(order) - 1)]
    return mapping


def levelwise_class_measure_candidate(tower, cid: str | None = None):
    """Per-level normalized weights of one class, from raw weights.

    Each level is normalized independently, so the candidate is a
    legitimate probability measure levelwise; on a tower without an
    invariant measure the refinement pushforwards cannot all match,
    which is exactly what its verifier must detect.
    """
    levels = []
    for inst in tower.levels:
        chosen = cid if cid is not None else min(inst.classes)
        members = inst.classes[chosen]
        mass = sum(inst.weight(p) for p in members)
        levels.append({p: inst.weight(p) / mass for p in members})
    return tuple(levels)


def exhaustive_augmentation(instance: Instance, used, predicate):
    """First within-class candidate disjoint from ``used`` that the
    predicate accepts, at any size; None when none exists.

    Runs through every subset of every class's free points, so it is
    exponential in class size by design.
    """
    used = set(used)
    for cid in instance.sorted_classes():
        free = [p for p in instance.classes[cid] if p not in used]
        for size in range(1, len(free) + 1):
            for combo in itertools.combinations(free, size):
                outcome = predicate(combo)
                ok = outcome[0] if isinstance(outcome, tuple) else bool(outcome)
                if ok:
                    return combo
    return None


def product_cylinder_share(level: int, p, bit: int = 1,
                           position: int = 0) -> Fraction:
    """Weight share of strings with a fixed bit, by full enumeration.

    All length-``level`` bit strings are listed and weighted by the
    i.i.d. product rule (p for a one, 1-p for a zero); the return
    value is the exact share carried by strings whose coordinate at
    ``position`` equals ``bit``.
    """
    p = Fraction(p)
    if not 0 < p < 1:
        raise ModelError("bit probability must lie strictly between 0 and 1")
    total = Fraction(0)
    hit = Fraction(0)
    for bits in itertools.product((0, 1), repeat=level):
        w = Fraction(1)
        for b in bits:
            w *= p if b else 1 - p
        total += w
        if bits[position] == bit:
            hit += w
    return hit / total


def transport_sides(instance: Instance, point_masses, phi, targets):
    """Both sides of the fiber transport identity, from raw weights.

    Left: the measure of the preimage of the target set.  Right: the
    fiber rho-sizes over the target, weighted by the point masses.
    """
    target_set = set(targets)
    zero = Fraction(0) if instance.mode == EXACT else 0.0
    lhs = zero
    for x, y in phi.items():
        if y in target_set:
            lhs += point_masses.get(x, 0)
    rhs = zero
    for t in sorted(target_set):
        size = zero
        for x, y in phi.items():
            if y == t:
                size += instance.weight(x) / instance.weight(t)
        rhs += size * point_masses.get(t, 0)
    return lhs, rhs
