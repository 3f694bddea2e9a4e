"""Compressions of weighted relations and their certificates.

A compression certificate asserts that a map pushes the instance
strictly inside itself: every fiber has normalized size at most 1 and
every class contains a fiber of size strictly below 1.  Three modes:

* ``plain``: fibers are measured pointwise, the map must be total;
* ``over-F``: fibers are measured against the blocks of a finite
  subrelation F;
* ``quotient-by-F``: the map lives on block representatives and fibers
  are measured in the quotient cocycle.

Exact mass conservation makes a total strict compression impossible on
a finite instance (summing fiber masses over any class returns the
class mass, which contradicts strictness).  That impossibility is the
finite shadow of the measure/compression dichotomy, and it dictates
the certificate format: over-F and quotient certificates may leave an
explicit frontier unmapped, and the frontier must come with evidence
that is recomputed during verification rather than trusted:

* ``layer-growth``: the frontier blocks strictly outweigh the blocks
  feeding into them, so iterating the map pushes mass up an infinite
  ladder.  Verifiable on a bare instance.
* ``divergence`` / ``defect`` / ``rotation``: tower-backed evidence;
  the declared schedules, watched families, or generator data of the
  tower are re-read and the per-level margins recomputed.

The ``strict_set`` stored on a certificate is never trusted: verifiers
recompute it and flag disagreement.
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
    NotCertifiedAperiodicError,
    is_constant_cocycle,
    weight_mass as _mass,
)
from cclab.tower import Tower, class_share

PLAIN = "plain"
OVER_F = "over-F"
QUOTIENT = "quotient-by-F"
COMPRESSION_MODES = (PLAIN, OVER_F, QUOTIENT)


@dataclass(eq=False)
class CompressionCertificate:
    """A single-instance compression assertion; see the module docstring."""

    mode: str
    mapping: dict[str, str]
    subrelation: FiniteSubrelation | None = None
    scope: tuple[str, ...] = ()
    bound: int | None = None
    strict_set: tuple[str, ...] = ()
    frontier: tuple[str, ...] = ()
    evidence: dict | None = None
    boundaries: dict[str, tuple[int, ...]] | None = None
    mapped_members: tuple[str, ...] = ()


@dataclass(eq=False)
class TowerCompressionCertificate:
    """Per-level compression certificates plus tower-backed evidence.

    Levels below ``start_level`` carry no certificate: a truncation too
    shallow to show the phenomenon is not evidence against it.
    """

    start_level: int
    levels: tuple[CompressionCertificate | None, ...]
    evidence: dict
    scope: tuple[str, ...] = ()


@dataclass
class CompressionReport:
    valid: bool
    violations: list[str] = field(default_factory=list)
    strict_set: tuple[str, ...] = ()
    fibers: dict[str, object] = field(default_factory=dict)
    level_reports: list["CompressionReport"] | None = None

    def add(self, message: str) -> None:
        self.violations.append(message)
        self.valid = False


def _lt_one(value, mode: str) -> bool:
    if mode == EXACT:
        return value < 1
    return value < 1 - 1e-9


def _le_one(value, mode: str) -> bool:
    if mode == EXACT:
        return value <= 1
    return value <= 1 + 1e-9


def verify_compression(target, cert) -> CompressionReport:
    """Check a compression certificate against an instance or a tower.

    Nothing stored in the certificate is trusted: fibers, strictness,
    totality, the frontier, and the frontier evidence are all
    recomputed from the target.
    """
    if isinstance(target, Tower):
        if not isinstance(cert, TowerCompressionCertificate):
            report = CompressionReport(valid=False)
            report.add("tower target needs a tower certificate")
            return report
        return _verify_tower(target, cert)
    if isinstance(cert, TowerCompressionCertificate):
        report = CompressionReport(valid=False)
        report.add("tower certificate needs a tower target")
        return report
    return _verify_instance(target, cert, tower=None, level=None)


def _verify_instance(inst: Instance, cert: CompressionCertificate,
                     tower: Tower | None, level: int | None) -> CompressionReport:
    report = CompressionReport(valid=True)
    if cert.mode not in COMPRESSION_MODES:
        report.add(f"unknown compression mode {cert.mode!r}")
        return report
    scope = tuple(cert.scope) or tuple(sorted(inst.classes))
    bad_scope = [c for c in scope if c not in inst.classes]
    if bad_scope:
        report.add(f"scope mentions unknown classes {bad_scope[:3]}")
        return report

    if cert.mode in (OVER_F, QUOTIENT):
        if cert.subrelation is None:
            report.add(f"mode {cert.mode} needs a subrelation")
            return report
        sub = cert.subrelation
        known = {p for block in sub.blocks for p in block}
        if known != set(inst.points):
            report.add("certificate subrelation does not partition the points")
            return report
    else:
        sub = None

    mapping = cert.mapping
    points = set(inst.points)
    for x, y in mapping.items():
        if x not in points or y not in points:
            report.add(f"map touches unknown point {x!r} -> {y!r}")
            return report
        if inst.class_of[x] != inst.class_of[y]:
            report.add(f"map moves {x!r} across classes")
    if not report.valid:
        return report

    if cert.mode == QUOTIENT:
        reps = set(sub.reps())
        stray = [x for x in mapping if x not in reps] + \
                [y for y in mapping.values() if y not in reps]
        if stray:
            report.add(f"quotient map must use block representatives, "
                       f"got {sorted(set(stray))[:3]}")
            return report

    out_of_scope = sorted({inst.class_of[x] for x in mapping
                           if inst.class_of[x] not in scope})
    if out_of_scope:
        report.add(f"map touches classes outside scope {out_of_scope[:3]}")

    fibers, strict = _compute_fibers(inst, cert, sub, scope, report)
    report.fibers = fibers
    report.strict_set = tuple(strict)

    for cid in scope:
        if not any(inst.class_of[s] == cid for s in strict):
            report.add(f"class {cid!r} has no strictly small fiber")

    if cert.bound is not None:
        counts = _fiber_counts(inst, cert, sub, scope)
        worst = max(counts.values(), default=0)
        if worst > cert.bound:
            report.add(f"fiber cardinality {worst} exceeds bound {cert.bound}")

    if cert.strict_set and tuple(cert.strict_set) != tuple(strict):
        report.add("stored strict set disagrees with the recomputed one")

    unmapped = _unmapped(inst, cert, sub, scope)
    if cert.mode == PLAIN:
        if unmapped:
            report.add(f"plain compression must be total, {len(unmapped)} "
                       f"points unmapped")
    else:
        declared = set(cert.frontier)
        if declared != set(unmapped):
            report.add("declared frontier disagrees with the unmapped set")
        if unmapped:
            _check_evidence(inst, cert, sub, scope, unmapped, tower, level,
                            report)
    return report


def _compute_fibers(inst, cert, sub, scope, report):
    """Fiber sizes keyed by target point (plain) or block rep (others)."""
    mode = inst.mode
    fibers: dict[str, object] = {}
    strict: list[str] = []
    if cert.mode == PLAIN:
        pre: dict[str, list[str]] = {}
        for x, y in cert.mapping.items():
            pre.setdefault(y, []).append(x)
        for t in inst.points:
            if inst.class_of[t] not in scope:
                continue
            value = inst.size_at(sorted(pre.get(t, [])), t)
            fibers[t] = value
            if not _le_one(value, mode):
                report.add(f"fiber at {t!r} has size {value} > 1")
            elif _lt_one(value, mode):
                strict.append(t)
        return fibers, strict

    if cert.mode == OVER_F:
        pre_blocks: dict[str, list[str]] = {}
        for x, y in cert.mapping.items():
            pre_blocks.setdefault(sub.rep(y), []).append(x)
        for block in sub.blocks:
            rep = block[0]
            if inst.class_of[rep] not in scope:
                continue
            value = _mass(inst, pre_blocks.get(rep, [])) / _mass(inst, block)
            fibers[rep] = value
            if not _le_one(value, mode):
                report.add(f"fiber at block {rep!r} has size {value} > 1")
            elif _lt_one(value, mode):
                strict.append(rep)
        return fibers, strict

    # quotient mode: fibers live on block representatives
    pre_reps: dict[str, list[str]] = {}
    for q, t in cert.mapping.items():
        pre_reps.setdefault(t, []).append(q)
    for block in sub.blocks:
        rep = block[0]
        if inst.class_of[rep] not in scope:
            continue
        total = Fraction(0) if inst.mode == EXACT else 0.0
        for q in pre_reps.get(rep, []):
            total += _mass(inst, sub.block_of(q)) / _mass(inst, block)
        fibers[rep] = total
        if not _le_one(total, mode):
            report.add(f"fiber at block {rep!r} has size {total} > 1")
        elif _lt_one(total, mode):
            strict.append(rep)
    return fibers, strict


def _fiber_counts(inst, cert, sub, scope) -> dict[str, int]:
    counts: dict[str, int] = {}
    if cert.mode in (PLAIN, OVER_F):
        for x, y in cert.mapping.items():
            counts[y] = counts.get(y, 0) + 1
    else:
        for q, t in cert.mapping.items():
            counts[t] = counts.get(t, 0) + 1
    return counts


def _unmapped(inst, cert, sub, scope) -> list[str]:
    if cert.mode == QUOTIENT:
        domain = [b[0] for b in sub.blocks if inst.class_of[b[0]] in scope]
    else:
        domain = [p for p in inst.points if inst.class_of[p] in scope]
    return sorted(p for p in domain if p not in cert.mapping)


def _check_evidence(inst, cert, sub, scope, unmapped, tower, level, report):
    evidence = cert.evidence
    if not evidence:
        report.add("unmapped frontier without evidence")
        return
    kind = evidence.get("kind")
    if kind == "layer-growth":
        _check_layer_growth(inst, cert, sub, scope, unmapped, report)
    elif kind in ("defect", "rotation", "divergence"):
        if tower is None:
            report.add(f"evidence kind {kind!r} needs a tower context")
        # margin recomputation happens once per tower, in _verify_tower
    else:
        report.add(f"unknown evidence kind {kind!r}")


def _check_layer_growth(inst, cert, sub, scope, unmapped, report):
    """Frontier blocks must strictly outweigh the blocks feeding them."""
    evidence = cert.evidence
    listed_frontier: Mapping[str, list[str]] = evidence.get("frontier", {})
    listed_feeders: Mapping[str, list[str]] = evidence.get("feeders", {})
    by_class: dict[str, list[str]] = {}
    for p in unmapped:
        by_class.setdefault(inst.class_of[p], []).append(p)
    for cid, pts in sorted(by_class.items()):
        front_reps = listed_frontier.get(cid)
        feed_reps = listed_feeders.get(cid)
        if not front_reps or not feed_reps:
            report.add(f"class {cid!r}: frontier lacks listed layers")
            continue
        if cert.mode == QUOTIENT:
            front_points = [p for r in front_reps for p in sub.block_of(r)]
            actual = {p for r in pts for p in sub.block_of(r)}
        else:
            front_points = [p for r in front_reps for p in sub.block_of(r)]
            actual = set(pts)
        if set(front_points) != actual:
            report.add(f"class {cid!r}: listed frontier disagrees with the "
                       f"unmapped set")
            continue
        # the feeders must actually map into the frontier
        feed_points = [p for r in feed_reps for p in sub.block_of(r)]
        targets = set()
        for x, y in cert.mapping.items():
            if (cert.mode == QUOTIENT and x in feed_reps) or \
               (cert.mode != QUOTIENT and x in set(feed_points)):
                targets.add(sub.rep(y))
        if not targets <= {sub.rep(r) for r in front_reps}:
            report.add(f"class {cid!r}: feeders do not map into the frontier")
            continue
        if not targets:
            report.add(f"class {cid!r}: frontier receives nothing")
            continue
        front_mass = _mass(inst, front_points)
        feed_mass = _mass(inst, feed_points)
        grows = front_mass > feed_mass if inst.mode == EXACT else \
            front_mass > feed_mass * (1 + 1e-9)
        if not grows:
            report.add(f"class {cid!r}: frontier mass {front_mass} does not "
                       f"exceed feeder mass {feed_mass}")


def _verify_tower(tower: Tower, cert: TowerCompressionCertificate) -> CompressionReport:
    report = CompressionReport(valid=True)
    n_levels = tower.level_count()
    if len(cert.levels) != n_levels:
        report.add("certificate level count differs from the tower")
        return report
    if not 0 <= cert.start_level < n_levels:
        report.add("bad start level")
        return report
    scope = tuple(cert.scope) or tuple(sorted(tower.levels[0].classes))
    report.level_reports = []
    for n in range(n_levels):
        level_cert = cert.levels[n]
        if n < cert.start_level:
            if level_cert is not None:
                report.add(f"level {n} precedes the start level but carries "
                           f"a certificate")
            continue
        if level_cert is None:
            report.add(f"level {n} is missing its certificate")
            continue
        sub_report = _verify_instance(tower.levels[n], level_cert, tower, n)
        report.level_reports.append(sub_report)
        for v in sub_report.violations:
            report.add(f"level {n}: {v}")

    kind = cert.evidence.get("kind")
    if kind == "divergence":
        _check_divergence_evidence(tower, cert, scope, report)
    elif kind == "defect":
        _check_defect_evidence(tower, cert, scope, report)
    elif kind == "rotation":
        _check_rotation_evidence(tower, cert, scope, report)
    else:
        report.add(f"unknown tower evidence kind {kind!r}")
    return report


def _check_divergence_evidence(tower, cert, scope, report):
    """Frontier escape is justified by declared, validated divergence."""
    missing = [cid for cid in scope if cid not in tower.divergence]
    if missing:
        report.add(f"divergence evidence but no schedule for {missing[:3]}")
    for n in range(cert.start_level, tower.level_count()):
        level_cert = cert.levels[n]
        if level_cert is None or level_cert.evidence is None:
            continue
        if level_cert.evidence.get("kind") != "layer-growth":
            report.add(f"level {n}: divergence evidence expects layer-growth "
                       f"at each level")


def _check_defect_evidence(tower, cert, scope, report):
    """Recompute per-level margins of the watched family."""
    name = cert.evidence.get("family")
    fam = next((f for f in tower.defect_families if f.name == name), None)
    if fam is None:
        report.add(f"tower declares no defect family named {name!r}")
        return
    for n in range(cert.start_level, tower.level_count()):
        level_cert = cert.levels[n]
        if level_cert is None:
            continue
        mapped = [m for m in level_cert.mapped_members
                  if tower.has_set(n, m)]
        for cid in scope:
            margin = class_share(tower, n, fam.union, cid)
            for member in mapped:
                margin -= class_share(tower, n, member, cid)
            positive = margin > 0 if tower.mode == EXACT else margin > 1e-12
            if not positive:
                report.add(f"level {n}: defect margin for class {cid!r} "
                           f"is {margin}, not positive")


def _check_rotation_evidence(tower, cert, scope, report):
    """The cited generator and set must exist and leave a positive frontier."""
    gname = cert.evidence.get("generator")
    sname = cert.evidence.get("set")
    for n in range(cert.start_level, tower.level_count()):
        level_cert = cert.levels[n]
        if level_cert is None:
            continue
        inst = tower.levels[n]
        if gname not in inst.generators:
            report.add(f"level {n}: no generator named {gname!r}")
            continue
        if not tower.has_set(n, sname):
            report.add(f"level {n}: no set named {sname!r}")
            continue
        for cid in scope:
            pts = [p for p in level_cert.frontier if inst.class_of[p] == cid]
            share = _mass(inst, pts) / _mass(inst, inst.classes[cid])
            positive = share > 0 if tower.mode == EXACT else share > 1e-12
            if not positive:
                report.add(f"level {n}: rotation frontier for class {cid!r} "
                           f"carries no mass")


def _layer_boundaries(masses: list) -> list[int]:
    """Boundary indices of the strictly increasing layer decomposition.

    n_0 = 0 and n_1 = 1; after that each boundary is the least index
    making the new layer strictly outweigh the previous one.  Returns
    the boundaries found; the caller decides what to do with leftover
    indices that cannot form another growing layer.
    """
    boundaries = [0, 1]
    if len(masses) < 2:
        return boundaries
    prev_mass = masses[0]
    start = 1
    m = 1
    while m < len(masses):
        m += 1
        layer = sum(masses[start:m])
        if layer > prev_mass:
            boundaries.append(m)
            prev_mass = layer
            start = m
    return boundaries


def strictly_increasing_injection_instance(
        inst: Instance,
        pieces: list[tuple[str, frozenset[str]]],
        scope: Iterable[str] | None = None) -> CompressionCertificate:
    """Build the layer injection from an ordered transversal partition.

    Layers bundle consecutive transversal pieces so each layer strictly
    outweighs its predecessor; the quotient map sends every layer to
    the next, leaving the final layer as the frontier whose growth is
    the certificate's evidence.  Classes that cannot produce a second
    boundary are not certified aperiodic.
    """
    scope = tuple(scope) if scope is not None else tuple(sorted(inst.classes))
    blocks: list[list[str]] = []
    mapping: dict[str, str] = {}
    frontier: list[str] = []
    ev_frontier: dict[str, list[str]] = {}
    ev_feeders: dict[str, list[str]] = {}
    all_boundaries: dict[str, tuple[int, ...]] = {}
    for cid in scope:
        local = [(name, sorted(set(members) & set(inst.classes[cid])))
                 for name, members in pieces]
        local = [(name, pts) for name, pts in local if pts]
        if len(local) < 2:
            raise NotCertifiedAperiodicError("not certified aperiodic")
        masses = [_mass(inst, pts) for _, pts in local]
        boundaries = _layer_boundaries(masses)
        if len(boundaries) < 3:
            raise NotCertifiedAperiodicError("not certified aperiodic")
        # leftover pieces merge into the final layer; mass only grows
        spans = list(zip(boundaries[:-1], boundaries[1:]))
        spans[-1] = (spans[-1][0], len(local))
        layer_blocks = []
        for lo, hi in spans:
            layer = sorted(p for _, pts in local[lo:hi] for p in pts)
            layer_blocks.append(layer)
            blocks.append(layer)
        for i in range(len(layer_blocks) - 1):
            mapping[layer_blocks[i][0]] = layer_blocks[i + 1][0]
        frontier.append(layer_blocks[-1][0])
        ev_frontier[cid] = [layer_blocks[-1][0]]
        ev_feeders[cid] = [layer_blocks[-2][0]]
        all_boundaries[cid] = tuple(boundaries)
    sub = FiniteSubrelation.from_blocks(inst, blocks)
    strict = tuple(r for r in sub.reps() if inst.class_of[r] in scope)
    return CompressionCertificate(
        mode=QUOTIENT,
        mapping=mapping,
        subrelation=sub,
        scope=scope,
        bound=1,
        strict_set=strict,
        frontier=tuple(sorted(frontier)),
        evidence={"kind": "layer-growth", "frontier": ev_frontier,
                  "feeders": ev_feeders},
        boundaries=all_boundaries,
    )


def strictly_increasing_injection(tower: Tower) -> TowerCompressionCertificate:
    """Layer injection across a tower with a declared transversal partition."""
    if not tower.transversals:
        raise ModelError("tower declares no transversal partition")
    missing = [cid for cid in sorted(tower.levels[0].classes)
               if cid not in tower.divergence]
    if missing:
        raise ModelError(
            f"frontier needs a declared divergence schedule for {missing[:3]}")
    level_certs: list[CompressionCertificate | None] = []
    start = None
    for n, inst in enumerate(tower.levels):
        pieces = [(name, tower.transversal_sets[n][name])
                  for name in tower.transversals
                  if name in tower.transversal_sets[n]]
        try:
            cert = strictly_increasing_injection_instance(inst, pieces)
        except NotCertifiedAperiodicError:
            if start is not None:
                raise
            level_certs.append(None)
            continue
        if start is None:
            start = n
        level_certs.append(cert)
    if start is None:
        raise NotCertifiedAperiodicError("not certified aperiodic")
    return TowerCompressionCertificate(
        start_level=start,
        levels=tuple(level_certs),
        evidence={"kind": "divergence",
                  "classes": sorted(tower.divergence)},
        scope=tuple(sorted(tower.levels[0].classes)),
    )


def lift_compression(inst: Instance, cert: CompressionCertificate) -> CompressionCertificate:
    """Lift a certificate one mode down the hierarchy.

    quotient-by-F becomes over-F by expanding each block-to-block arrow
    into a pointwise pairing (sorted sources onto sorted targets,
    wrapping when the target block is smaller).  over-F becomes plain
    only when the cocycle is constant; the pointwise map is reused and
    fibers are re-measured pointwise.
    """
    if cert.mode == QUOTIENT:
        sub = cert.subrelation
        mapping: dict[str, str] = {}
        for q, t in cert.mapping.items():
            sources = list(sub.block_of(q))
            targets = list(sub.block_of(t))
            for i, s in enumerate(sources):
                mapping[s] = targets[i % len(targets)]
        frontier = tuple(sorted(
            p for r in cert.frontier for p in sub.block_of(r)))
        counts: dict[str, int] = {}
        for s, t in mapping.items():
            counts[t] = counts.get(t, 0) + 1
        bound = max(counts.values(), default=0)
        lifted = CompressionCertificate(
            mode=OVER_F, mapping=mapping, subrelation=sub, scope=cert.scope,
            bound=bound, frontier=frontier, evidence=cert.evidence,
            boundaries=cert.boundaries, mapped_members=cert.mapped_members)
        lifted.strict_set = _recompute_strict(inst, lifted)
        return lifted
    if cert.mode == OVER_F:
        if not is_constant_cocycle(inst):
            raise ModelError(
                "lifting over-F to plain requires a constant cocycle")
        lifted = CompressionCertificate(
            mode=PLAIN, mapping=dict(cert.mapping), subrelation=None,
            scope=cert.scope, bound=cert.bound, frontier=cert.frontier,
            evidence=cert.evidence)
        lifted.strict_set = _recompute_strict(inst, lifted)
        return lifted
    raise ModelError("plain certificates have nowhere to lift")


def _recompute_strict(inst: Instance, cert: CompressionCertificate) -> tuple[str, ...]:
    probe = CompressionReport(valid=True)
    scope = tuple(cert.scope) or tuple(sorted(inst.classes))
    _, strict = _compute_fibers(inst, cert, cert.subrelation, scope, probe)
    return tuple(strict)
