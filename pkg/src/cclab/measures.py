"""Invariant measures, density witnesses, tower limits, and the dichotomy.

A measure assigns nonnegative mass to points.  Invariance under the
cocycle is the pointwise identity mu({y}) = rho(y, x) mu({x}) inside
each class, which in potential form reduces to mu being proportional
to the weights on every class.  That makes verification O(points): the
basepoint is the only reference needed.

The dichotomy solver routes a target to one of two certificate kinds:

* measure: some class (or a requested mixture of classes) carries
  weight-proportional measures that are exactly consistent under every
  refinement of a tower;
* compression: a declared additivity defect, a rotation defect, or a
  divergence-plus-transversal declaration converts into a verified
  family of strict compressions with an explicit frontier.

Route order matters for mutual exclusion: measures are searched first,
so a compression verdict is only reached on targets whose class
measures provably fail refinement consistency.  On a single finite
instance the class measures always exist, which is the finite half of
the dichotomy; the compression half can only ever be certified against
a tower's declared infinite behavior.
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
    NoCertifiedDefectError,
    NotCertifiedAperiodicError,
    scalar_eq,
    weight_mass,
)
from cclab.compression import (
    OVER_F,
    CompressionCertificate,
    TowerCompressionCertificate,
    strictly_increasing_injection,
    verify_compression,
)
from cclab.tower import DefectFamily, Tower, class_share, nu_table


@dataclass(eq=False)
class WeightedMeasure:
    """A nonnegative point measure; absent points carry zero mass."""

    weights: dict[str, object]

    def of(self, points: Iterable[str]):
        total = Fraction(0)
        for p in points:
            total += self.weights.get(p, 0)
        return total

    def mass(self):
        total = Fraction(0)
        for v in self.weights.values():
            total += v
        return total

    def normalized(self) -> "WeightedMeasure":
        m = self.mass()
        if m <= 0:
            raise ModelError("cannot normalize a null measure")
        return WeightedMeasure({p: v / m for p, v in self.weights.items()})


def class_measure(instance: Instance, class_id: str | None = None) -> WeightedMeasure:
    """The weight-proportional probability measure on a single class."""
    cid = class_id if class_id is not None else min(instance.classes)
    if cid not in instance.classes:
        raise ModelError(f"unknown class {cid!r}")
    total = instance.class_mass(cid)
    return WeightedMeasure({p: instance.weight(p) / total
                            for p in instance.classes[cid]})


def invariant_mixture(instance: Instance,
                      class_weights: Mapping[str, object] | None = None) -> WeightedMeasure:
    """Convex mixture of class measures; defaults to the minimum class id."""
    if class_weights is None:
        class_weights = {min(instance.classes): Fraction(1)}
    lam = {cid: Fraction(v) if instance.mode == EXACT else float(v)
           for cid, v in class_weights.items()}
    if any(v < 0 for v in lam.values()):
        raise ModelError("class weights must be nonnegative")
    total = sum(lam.values())
    if total == 0:
        raise ModelError("class weights must not all vanish")
    weights: dict[str, object] = {}
    for cid, v in sorted(lam.items()):
        if cid not in instance.classes:
            raise ModelError(f"unknown class {cid!r}")
        if v == 0:
            continue
        part = class_measure(instance, cid)
        for p, w in part.weights.items():
            weights[p] = weights.get(p, 0) + v * w / total
    return WeightedMeasure(weights)


@dataclass
class InvarianceReport:
    valid: bool
    violations: list[tuple[str, str]] = field(default_factory=list)
    checked: int = 0


def verify_invariance(instance: Instance, measure: WeightedMeasure,
                      pairs: Iterable[tuple[str, str]] | None = None) -> InvarianceReport:
    """Check mu({y}) = rho(y, x) mu({x}), fully or on a restricted pair set.

    The full check anchors every class at its basepoint; a restricted
    check takes explicit equivalent pairs (x, y) and tests only those.
    """
    mode = instance.mode
    mu = measure.weights
    for p in mu:
        if p not in instance.class_of:
            raise ModelError(f"measure charges unknown point {p!r}")
        if mu[p] < 0:
            raise ModelError(f"negative mass at {p!r}")
    report = InvarianceReport(valid=True)
    if pairs is None:
        for cid in instance.sorted_classes():
            base = instance.basepoint(cid)
            mb = mu.get(base, 0)
            for p in instance.classes[cid]:
                report.checked += 1
                if not scalar_eq(mu.get(p, 0), mb * instance.weight(p), mode):
                    report.valid = False
                    report.violations.append((p, base))
        return report
    for x, y in pairs:
        if instance.class_of.get(x) != instance.class_of.get(y) or \
                instance.class_of.get(x) is None:
            raise ModelError(f"pair ({x!r}, {y!r}) is not in the relation")
        report.checked += 1
        lhs = mu.get(y, 0) * instance.weight(x)
        rhs = mu.get(x, 0) * instance.weight(y)
        if not scalar_eq(lhs, rhs, mode):
            report.valid = False
            report.violations.append((x, y))
    return report


@dataclass
class FiberIdentityReport:
    lhs: object
    rhs: object
    equal: bool


def fiber_identity(instance: Instance, measure: WeightedMeasure,
                   phi: Mapping[str, str],
                   targets: Iterable[str]) -> FiberIdentityReport:
    """Compare mu(phi^{-1}(B)) with the fiber-size weighted sum over B.

    For an invariant measure the two sides agree for every map whose
    graph stays inside the relation; this is the transport identity
    that makes fiber sizes act as Radon-Nikodym weights.
    """
    targets = sorted(set(targets))
    for x, y in phi.items():
        if instance.class_of.get(x) != instance.class_of.get(y) or \
                instance.class_of.get(x) is None:
            raise ModelError(f"map arrow ({x!r}, {y!r}) leaves the relation")
    target_set = set(targets)
    lhs = Fraction(0)
    for x, y in phi.items():
        if y in target_set:
            lhs += measure.weights.get(x, 0)
    pre: dict[str, list[str]] = {}
    for x, y in phi.items():
        pre.setdefault(y, []).append(x)
    rhs = Fraction(0)
    for t in targets:
        fiber = instance.size_at(sorted(pre.get(t, [])), t)
        rhs += fiber * measure.weights.get(t, 0)
    return FiberIdentityReport(lhs=lhs, rhs=rhs,
                               equal=scalar_eq(lhs, rhs, instance.mode))


def push_cohomologous(instance: Instance, measure: WeightedMeasure,
                      witness: Mapping[str, object],
                      target: Instance) -> WeightedMeasure:
    """Transport an invariant measure along a cohomology witness.

    The witness f must satisfy f(x) / f(y) = sigma(x, y) / rho(x, y) on
    every within-class pair; the transported measure is d(nu) = f d(mu),
    which is sigma-invariant whenever mu was rho-invariant.  Raises when
    f fails the identity.
    """
    if target.points != instance.points or target.classes != instance.classes:
        raise ModelError("target instance must share points and classes")
    mode = instance.mode
    for p in instance.points:
        if p not in witness:
            raise ModelError(f"witness misses point {p!r}")
        f = Fraction(witness[p]) if mode == EXACT else float(witness[p])
        if f <= 0:
            raise ModelError("non-positive potential")
    for cid in instance.sorted_classes():
        base = instance.basepoint(cid)
        fb = Fraction(witness[base]) if mode == EXACT else float(witness[base])
        for p in instance.classes[cid]:
            fp = Fraction(witness[p]) if mode == EXACT else float(witness[p])
            expected = instance.weight(p) * fp / fb
            if not scalar_eq(target.weight(p), expected, mode):
                raise ModelError(
                    f"witness is not cohomologous to the target at {p!r}")
    out: dict[str, object] = {}
    for p, v in measure.weights.items():
        f = Fraction(witness[p]) if mode == EXACT else float(witness[p])
        out[p] = f * v
    return WeightedMeasure(out)


@dataclass
class DensityWitness:
    """A finite subrelation whose every block meets B with share >= eps."""

    subrelation: FiniteSubrelation
    eps: object
    class_table: dict[str, object]
    covered: tuple[str, ...]


def _block_density(inst: Instance, block, dense: set[str]):
    inside = [p for p in block if p in dense]
    return weight_mass(inst, inside) / weight_mass(inst, block)


def density_witness(instance: Instance, dense: Iterable[str],
                    eps=None) -> DensityWitness | None:
    """Greedy blocks making B relatively dense; None when impossible.

    Each class seeds one block per B point, then the remaining points
    (ascending id) join whichever block currently has the highest
    density, which keeps the minimum block density as large as the
    greedy order allows.  Classes missing B entirely make a full
    witness impossible; the per-class table still reports the covered
    classes, which is the sigma-positive decomposition.
    """
    dense = set(dense)
    unknown = [p for p in dense if p not in instance.class_of]
    if unknown:
        raise ModelError(f"dense set mentions unknown points {unknown[:3]}")
    blocks: list[list[str]] = []
    table: dict[str, object] = {}
    covered: list[str] = []
    for cid in instance.sorted_classes():
        members = instance.classes[cid]
        seeds = [p for p in members if p in dense]
        if not seeds:
            table[cid] = None
            blocks.append(list(members))
            continue
        covered.append(cid)
        local = [[s] for s in seeds]
        for p in members:
            if p in dense:
                continue
            densities = [_block_density(instance, b, dense) for b in local]
            best = max(range(len(local)), key=lambda i: (densities[i], -i))
            local[best].append(p)
        greedy_eps = min(_block_density(instance, b, dense) for b in local)
        whole_eps = _block_density(instance, list(members), dense)
        if whole_eps > greedy_eps:
            local = [list(members)]
            table[cid] = whole_eps
        else:
            table[cid] = greedy_eps
        blocks.extend(local)
    sub = FiniteSubrelation.from_blocks(instance, blocks)
    achieved = min((v for v in table.values() if v is not None), default=None)
    if any(v is None for v in table.values()):
        return None
    if eps is not None and achieved < eps:
        return None
    return DensityWitness(subrelation=sub, eps=achieved,
                          class_table=table, covered=tuple(covered))


def density_witness_parts(instance: Instance,
                          dense: Iterable[str]) -> list[tuple[str, object]]:
    """Per-class densities of the greedy witness, for covered classes only."""
    dense = set(dense)
    parts: list[tuple[str, object]] = []
    for cid in instance.sorted_classes():
        seeds = [p for p in instance.classes[cid] if p in dense]
        if not seeds:
            continue
        sub = density_witness(
            _single_class(instance, cid), seeds)
        parts.append((cid, sub.eps))
    return parts


def _single_class(instance: Instance, cid: str) -> Instance:
    from cclab.core import restrict_to_classes
    return restrict_to_classes(instance, [cid])


def extend_from_dense(instance: Instance, mu: Mapping[str, object],
                      witness: DensityWitness | FiniteSubrelation) -> WeightedMeasure:
    """Spread an invariant measure on a dense set over the whole instance.

    The dense set B is the domain of mu, which must be invariant on the
    within-class pairs of B.  Every witness block must meet B; each
    point then receives the weight share of its block's B mass.  The
    restriction to B stays exact, the total mass is at most mu(B) / eps
    for the recomputed block density eps, and the output is invariant;
    all three are asserted rather than assumed.
    """
    subrel = witness.subrelation if isinstance(witness, DensityWitness) \
        else witness
    dense = set(mu)
    mode = instance.mode
    unknown = [p for p in dense if p not in instance.class_of]
    if unknown:
        raise ModelError(f"measure charges unknown points {sorted(unknown)[:3]}")
    for b in dense:
        if mu[b] < 0:
            raise ModelError(f"negative mass at {b!r}")
    pairs = []
    for cid in instance.sorted_classes():
        local = [p for p in instance.classes[cid] if p in dense]
        pairs.extend((local[0], q) for q in local[1:])
    probe = WeightedMeasure({p: mu[p] for p in dense})
    if not verify_invariance(instance, probe, pairs=pairs).valid:
        raise ModelError("measure on the dense set is not invariant")
    values: dict[str, object] = {}
    eps = None
    for block in subrel.blocks:
        inside = [p for p in block if p in dense]
        if not inside:
            raise ModelError(f"block {block[0]!r} misses the dense set")
        b_mass = weight_mass(instance, inside)
        block_mu = sum((Fraction(mu[b]) if mode == EXACT else float(mu[b])
                        for b in inside), Fraction(0) if mode == EXACT else 0.0)
        density = b_mass / weight_mass(instance, block)
        eps = density if eps is None or density < eps else eps
        for p in block:
            values[p] = instance.weight(p) * block_mu / b_mass
    out = WeightedMeasure(values)
    if not all(scalar_eq(values[b], mu[b] if mode != EXACT
                         else Fraction(mu[b]), mode) for b in dense):
        raise ModelError("extension does not restrict to the given measure")
    mu_total = sum((Fraction(v) if mode == EXACT else float(v)
                    for v in mu.values()), Fraction(0) if mode == EXACT else 0.0)
    bound = mu_total / eps
    total = out.mass()
    ok_bound = total <= bound if mode == EXACT else total <= bound * (1 + 1e-9)
    if not ok_bound:
        raise ModelError("extension exceeded its mass bound")
    if not verify_invariance(instance, out).valid:
        raise ModelError("extension lost invariance")
    return out


@dataclass
class TowerLimitReport:
    eps_schedule: tuple
    condition1: list[bool]
    flat_failures: list[list[tuple[str, str]]]
    condition2: list[dict]
    shares: dict[str, dict[str, list[tuple[int, object]]]]
    limits: dict[str, dict[str, dict]]
    defects: dict[str, dict]

    def declared(self, name: str, cid: str) -> bool:
        return self.limits.get(name, {}).get(cid, {}).get("declared", False)

    def limit_value(self, name: str, cid: str):
        return self.limits.get(name, {}).get(cid, {}).get("value")


def default_eps_schedule(n_levels: int) -> tuple[Fraction, ...]:
    return tuple(Fraction(1, 2 ** n) for n in range(n_levels))


def tower_limit(tower: Tower, eps_schedule=None,
                pair_cap: int = 200) -> TowerLimitReport:
    """Per-level conditional values of every named set, with verdicts.

    Condition (1) is per-level flatness: within each class, the block
    values of a named set may spread at most eps_n.  Condition (2) is
    the carving property: whenever A is blockwise below B at the next
    level, some named subset C of B leaves B minus C within eps_n of A.
    A limit is declared for a set when, from every level onward, the
    tail oscillation of its class shares fits inside the schedule mass
    that remains (the given entries plus one extra final entry standing
    for everything beyond the horizon); otherwise it stays inconclusive.
    Watched defect families are summarized with recomputed margins.
    """
    n_levels = tower.level_count()
    if not any(tower.algebras):
        raise ModelError("tower declares no algebra to take limits on")
    if eps_schedule is None:
        eps_schedule = default_eps_schedule(n_levels)
    eps_schedule = tuple(Fraction(e) for e in eps_schedule)
    if len(eps_schedule) < n_levels:
        raise ModelError("eps schedule shorter than the tower")
    if any(e <= 0 for e in eps_schedule):
        raise ModelError("eps schedule entries must be positive")
    mode = tower.mode

    names = sorted({name for table in tower.algebras for name in table})
    class_ids = sorted(tower.levels[0].classes)

    shares: dict[str, dict[str, list[tuple[int, object]]]] = {
        name: {cid: [] for cid in class_ids} for name in names}
    for name in names:
        for n in range(n_levels):
            if not tower.has_set(n, name):
                continue
            for cid in class_ids:
                shares[name][cid].append((n, class_share(tower, n, name, cid)))

    condition1: list[bool] = []
    flat_failures: list[list[tuple[str, str]]] = []
    for n in range(n_levels):
        failures: list[tuple[str, str]] = []
        inst = tower.levels[n]
        for name in names:
            if not tower.has_set(n, name):
                continue
            table = nu_table(tower, n, name)
            for cid in class_ids:
                values = [v for rep, v in table.items()
                          if inst.class_of[rep] == cid]
                if len(values) < 2:
                    continue
                spread = max(values) - min(values)
                ok = spread <= eps_schedule[n] if mode == EXACT \
                    else spread <= float(eps_schedule[n]) + 1e-9
                if not ok:
                    failures.append((name, cid))
        condition1.append(not failures)
        flat_failures.append(failures)

    condition2: list[dict] = []
    for n in range(n_levels - 1):
        condition2.append(
            _carving_condition(tower, n, eps_schedule[n], pair_cap))

    remaining: list[Fraction] = []
    tail = eps_schedule[n_levels - 1]
    acc = tail
    for n in range(n_levels - 1, -1, -1):
        acc += eps_schedule[n]
        remaining.append(acc)
    remaining.reverse()
    # remaining[n] = sum of schedule entries from n on, plus one tail entry

    limits: dict[str, dict[str, dict]] = {}
    for name in names:
        limits[name] = {}
        for cid in class_ids:
            seq = shares[name][cid]
            if not seq:
                continue
            declared = True
            for i in range(len(seq)):
                tail_vals = [v for _, v in seq[i:]]
                osc = max(tail_vals) - min(tail_vals)
                budget = remaining[seq[i][0]]
                ok = osc <= budget if mode == EXACT \
                    else osc <= float(budget) + 1e-9
                if not ok:
                    declared = False
                    break
            limits[name][cid] = {
                "declared": declared,
                "value": seq[-1][1] if declared else None,
                "levels": seq,
            }

    defects = {fam.name: _defect_summary(tower, fam)
               for fam in tower.defect_families}
    return TowerLimitReport(
        eps_schedule=eps_schedule, condition1=condition1,
        flat_failures=flat_failures, condition2=condition2,
        shares=shares, limits=limits, defects=defects)


def _carving_condition(tower: Tower, n: int, eps, pair_cap: int) -> dict:
    """Condition (2) at level n, realized on level n+1 data."""
    deep = n + 1
    inst = tower.levels[deep]
    names = sorted(tower.algebras[deep])
    sets = {name: tower.set_at(deep, name) for name in names}
    blocks = tower.subrelations[deep].blocks
    reps = [block[0] for block in blocks]
    block_mass = {block[0]: weight_mass(inst, block) for block in blocks}
    in_block = {name: {block[0]: weight_mass(
        inst, [p for p in block if p in sets[name]]) for block in blocks}
        for name in names}
    mode = tower.mode
    checked = 0
    failed: list[tuple[str, str]] = []
    capped = False
    for a in names:
        for b in names:
            if a == b:
                continue
            if checked >= pair_cap:
                capped = True
                break
            ta, tb = in_block[a], in_block[b]
            if not all(_le(ta[r], tb[r], mode) for r in reps):
                continue
            checked += 1
            if not _find_carving(reps, block_mass, in_block, sets, names,
                                 a, b, eps, mode):
                failed.append((a, b))
        if capped:
            break
    return {"checked": checked, "failed": failed, "capped": capped}


def _le(x, y, mode: str) -> bool:
    return x <= y if mode == EXACT else x <= y + 1e-9


def _find_carving(reps, block_mass, in_block, sets, names, a, b, eps,
                  mode) -> bool:
    base = sets[b]
    for cname in names:
        if not sets[cname] <= base:
            continue
        ok = True
        for rep in reps:
            va = in_block[a][rep]
            vb = in_block[b][rep] - in_block[cname][rep]
            diff = (vb - va) / block_mass[rep]
            lo = diff >= 0 if mode == EXACT else diff >= -1e-9
            hi = diff <= eps if mode == EXACT else diff <= float(eps) + 1e-9
            if not (lo and hi):
                ok = False
                break
        if ok:
            return True
    return False


def _present_members(tower: Tower, fam: DefectFamily, n: int) -> list[str]:
    return [m for m in fam.members if tower.has_set(n, m)]


def _defect_summary(tower: Tower, fam: DefectFamily) -> dict:
    """Recomputed margins and trends for a watched family."""
    n_levels = tower.level_count()
    class_ids = sorted(tower.levels[0].classes)
    mode = tower.mode
    margins: dict[str, list[tuple[int, object]]] = {cid: [] for cid in class_ids}
    member_values: dict[str, dict[str, list[tuple[int, object]]]] = {
        m: {cid: [] for cid in class_ids} for m in fam.members}
    counts: list[int] = []
    for n in range(n_levels):
        present = _present_members(tower, fam, n)
        counts.append(len(present))
        for cid in class_ids:
            for m in present:
                member_values[m][cid].append(
                    (n, class_share(tower, n, m, cid)))
            if len(present) >= 2:
                margin = class_share(tower, n, fam.union, cid)
                for m in present[:-1]:
                    margin -= class_share(tower, n, m, cid)
                margins[cid].append((n, margin))
    all_margins = [v for rows in margins.values() for _, v in rows]
    min_margin = min(all_margins, default=None)
    trend_ok = True
    for m in fam.members:
        for cid in class_ids:
            seq = [v for _, v in member_values[m][cid]]
            for x, y in zip(seq, seq[1:]):
                ok = y <= x if mode == EXACT else y <= x + 1e-9
                if not ok:
                    trend_ok = False
    growing = bool(counts) and counts[-1] > counts[0]
    positive = min_margin is not None and \
        (min_margin > 0 if mode == EXACT else min_margin > 1e-12)
    return {
        "margins": margins,
        "min_margin": min_margin,
        "trend_ok": trend_ok,
        "growing": growing,
        "reported": positive and trend_ok and growing,
        "member_values": member_values,
    }


def defect_to_compression(tower: Tower, family: str | None = None,
                          delta=None) -> TowerCompressionCertificate:
    """Convert a watched additivity defect into compression certificates.

    Greedy construction per level and class: the k-th member set is
    matched against ascending-id points drawn from the later members,
    stopping the first time the running target cannot be met within
    the overshoot budget delta * 2^{-(k+1)}.  Matched members map
    block-wise onto their selections; everything after the stopping
    index is the frontier whose recomputed margins are the evidence.
    """
    fams = list(tower.defect_families)
    if family is not None:
        fams = [f for f in fams if f.name == family]
    if not fams:
        raise NoCertifiedDefectError("no certified defect: no declared family")
    fam = fams[0]
    summary = _defect_summary(tower, fam)
    if not summary["reported"]:
        raise NoCertifiedDefectError("no certified defect")
    delta = Fraction(delta) if delta is not None else summary["min_margin"]
    if tower.mode == EXACT:
        delta = Fraction(delta)
    if delta <= 0:
        raise NoCertifiedDefectError("no certified defect")

    n_levels = tower.level_count()
    scope = _defect_scope(tower, fam)
    level_certs: list[CompressionCertificate | None] = []
    start = None
    for n in range(n_levels):
        cert = _defect_level_cert(tower, fam, n, delta, scope)
        if cert is None:
            if start is not None:
                raise NoCertifiedDefectError(
                    "no certified defect: construction dies at a deep level")
            level_certs.append(None)
            continue
        if start is None:
            start = n
        level_certs.append(cert)
    if start is None:
        raise NoCertifiedDefectError("no certified defect")
    return TowerCompressionCertificate(
        start_level=start,
        levels=tuple(level_certs),
        evidence={"kind": "defect", "family": fam.name, "margin": delta},
        scope=scope,
    )


def _defect_scope(tower: Tower, fam: DefectFamily) -> tuple[str, ...]:
    deepest = tower.level_count() - 1
    union = tower.set_at(deepest, fam.union)
    inst = tower.levels[deepest]
    return tuple(sorted({inst.class_of[p] for p in union}))


def _defect_level_cert(tower: Tower, fam: DefectFamily, n: int, delta,
                       scope: tuple[str, ...]) -> CompressionCertificate | None:
    inst = tower.levels[n]
    present = _present_members(tower, fam, n)
    if len(present) < 2:
        return None
    member_sets = {m: tower.set_at(n, m) for m in present}
    all_member_points = set().union(*member_sets.values())

    per_class_k: dict[str, int] = {}
    selections: dict[tuple[str, int], list[str]] = {}
    for cid in scope:
        members_local = [sorted(member_sets[m] & set(inst.classes[cid]))
                         for m in present]
        if sum(1 for pts in members_local if pts) < 2:
            return None
        cmass = weight_mass(inst, inst.classes[cid])
        used: set[str] = set()
        k_reached = 0
        for k in range(len(present) - 1):
            if not members_local[k]:
                selections[(cid, k)] = []
                k_reached = k + 1
                continue
            target = weight_mass(inst, members_local[k])
            budget = delta * Fraction(1, 2 ** (k + 2)) * cmass \
                if inst.mode == EXACT else float(delta) * 2.0 ** -(k + 2) * cmass
            pool = sorted(p for pts in members_local[k + 1:] for p in pts
                          if p not in used)
            acc: list[str] = []
            acc_mass = Fraction(0) if inst.mode == EXACT else 0.0
            for p in pool:
                if acc_mass >= target:
                    break
                acc.append(p)
                acc_mass += inst.weight(p)
            if acc_mass < target or acc_mass - target > budget:
                break
            selections[(cid, k)] = acc
            used.update(acc)
            k_reached = k + 1
        if k_reached == 0:
            return None
        per_class_k[cid] = k_reached

    k_uniform = min(per_class_k.values())
    blocks: list[list[str]] = []
    mapping: dict[str, str] = {}
    frontier: list[str] = []
    for cid in scope:
        members_local = [sorted(member_sets[m] & set(inst.classes[cid]))
                         for m in present]
        for k in range(k_uniform):
            sources = members_local[k]
            acc = selections[(cid, k)]
            if not acc:
                continue
            blocks.append(acc)
            for i, s in enumerate(sources):
                mapping[s] = acc[i % len(acc)]
        mapped_points = {p for k in range(k_uniform) for p in members_local[k]}
        for p in inst.classes[cid]:
            if p in all_member_points:
                if p not in mapped_points:
                    frontier.append(p)
            else:
                mapping[p] = p
    sub = FiniteSubrelation.from_blocks(inst, blocks)
    counts: dict[str, int] = {}
    for t in mapping.values():
        counts[t] = counts.get(t, 0) + 1
    cert = CompressionCertificate(
        mode=OVER_F,
        mapping=mapping,
        subrelation=sub,
        scope=scope,
        bound=max(counts.values(), default=0),
        frontier=tuple(sorted(frontier)),
        evidence={"kind": "defect", "family": fam.name},
        mapped_members=tuple(present[:k_uniform]),
    )
    from cclab.compression import _recompute_strict
    cert.strict_set = _recompute_strict(inst, cert)
    return cert


def rotation_to_compression(tower: Tower, generator: str,
                            set_name: str) -> TowerCompressionCertificate:
    """Convert a rotation defect into compression certificates.

    At each level, every subrelation block P whose incoming rotated
    mass gamma(U) cap P is at most the mass of gamma[U cap P] maps its
    sources onto that image; blocks where the comparison fails leave
    their sources as the frontier.  A level certifies once some block
    of every scoped class compresses strictly.
    """
    n_levels = tower.level_count()
    level_certs: list[CompressionCertificate | None] = []
    start = None
    scope: tuple[str, ...] | None = None
    for n in range(n_levels):
        cert = _rotation_level_cert(tower, n, generator, set_name)
        if cert is None:
            if start is not None:
                raise NoCertifiedDefectError(
                    "no certified defect: rotation dies at a deep level")
            level_certs.append(None)
            continue
        if start is None:
            start = n
            scope = cert.scope
        elif cert.scope != scope:
            raise NoCertifiedDefectError(
                "no certified defect: rotation scope shifts across levels")
        level_certs.append(cert)
    if start is None:
        raise NoCertifiedDefectError("no certified defect")
    return TowerCompressionCertificate(
        start_level=start,
        levels=tuple(level_certs),
        evidence={"kind": "rotation", "generator": generator,
                  "set": set_name},
        scope=scope,
    )


def _rotation_level_cert(tower: Tower, n: int, generator: str,
                         set_name: str) -> CompressionCertificate | None:
    inst = tower.levels[n]
    if generator not in inst.generators:
        return None
    if not tower.has_set(n, set_name):
        return None
    gamma = inst.generators[generator]
    u_set = tower.set_at(n, set_name)
    if not u_set:
        return None
    gamma_u = {gamma[p] for p in u_set}
    mode = inst.mode

    strict_classes: set[str] = set()
    blocks: list[list[str]] = []
    mapping: dict[str, str] = {}
    frontier: list[str] = []
    touched_classes = sorted({inst.class_of[p] for p in u_set})
    for block in tower.subrelations[n].blocks:
        cid = inst.class_of[block[0]]
        if cid not in touched_classes:
            continue
        sources = sorted(p for p in block if p in gamma_u)
        if not sources:
            continue
        image = sorted({gamma[p] for p in block if p in u_set})
        m_s = weight_mass(inst, sources)
        m_t = weight_mass(inst, image)
        fits = m_s <= m_t if mode == EXACT else m_s <= m_t * (1 + 1e-9)
        if fits and image:
            blocks.append(image)
            for i, s in enumerate(sources):
                mapping[s] = image[i % len(image)]
            strictly = m_s < m_t if mode == EXACT else m_s < m_t * (1 - 1e-9)
            if strictly:
                strict_classes.add(cid)
        else:
            frontier.extend(sources)
    if set(touched_classes) != strict_classes:
        return None
    for cid in touched_classes:
        for p in inst.classes[cid]:
            if p not in gamma_u:
                mapping[p] = p
    sub = FiniteSubrelation.from_blocks(inst, blocks)
    counts: dict[str, int] = {}
    for t in mapping.values():
        counts[t] = counts.get(t, 0) + 1
    cert = CompressionCertificate(
        mode=OVER_F,
        mapping=mapping,
        subrelation=sub,
        scope=tuple(touched_classes),
        bound=max(counts.values(), default=0),
        frontier=tuple(sorted(frontier)),
        evidence={"kind": "rotation", "generator": generator, "set": set_name},
    )
    from cclab.compression import _recompute_strict
    cert.strict_set = _recompute_strict(inst, cert)
    return cert


@dataclass(eq=False)
class MeasureCertificate:
    weights: dict[str, object]
    class_weights: dict[str, object] = field(default_factory=dict)


@dataclass(eq=False)
class TowerMeasureCertificate:
    levels: tuple[dict[str, object], ...]
    limits: dict[str, object] = field(default_factory=dict)
    class_weights: dict[str, object] = field(default_factory=dict)


@dataclass
class MeasureReport:
    valid: bool
    violations: list[str] = field(default_factory=list)

    def add(self, message: str) -> None:
        self.violations.append(message)
        self.valid = False


def verify_measure(target, cert) -> MeasureReport:
    """Check a measure certificate: probability, invariance, consistency."""
    report = MeasureReport(valid=True)
    if isinstance(target, Tower):
        if not isinstance(cert, TowerMeasureCertificate):
            report.add("tower target needs a tower measure certificate")
            return report
        if len(cert.levels) != target.level_count():
            report.add("certificate level count differs from the tower")
            return report
        for n, weights in enumerate(cert.levels):
            _check_level_measure(target.levels[n], weights, f"level {n}",
                                 report)
        for n in range(target.level_count() - 1):
            shallow = cert.levels[n]
            deep = cert.levels[n + 1]
            fibers = target.preimages(n)
            for parent in sorted(target.levels[n].points):
                pushed = sum((deep.get(c, Fraction(0))
                              for c in fibers[parent]), Fraction(0))
                if not scalar_eq(pushed, shallow.get(parent, Fraction(0)),
                                 target.mode):
                    report.add(f"level {n}: pushforward differs at "
                               f"{parent!r}")
        deepest = target.level_count() - 1
        measure = WeightedMeasure(dict(cert.levels[deepest]))
        for name, declared in sorted(cert.limits.items()):
            if not target.has_set(deepest, name):
                report.add(f"limit declared for unknown set {name!r}")
                continue
            actual = measure.of(target.set_at(deepest, name))
            if not scalar_eq(actual, declared, target.mode):
                report.add(f"declared limit for {name!r} is {declared}, "
                           f"measured {actual}")
        return report
    if not isinstance(cert, MeasureCertificate):
        report.add("instance target needs an instance measure certificate")
        return report
    _check_level_measure(target, cert.weights, "instance", report)
    return report


def _check_level_measure(inst: Instance, weights: Mapping[str, object],
                         label: str, report: MeasureReport) -> None:
    measure = WeightedMeasure(dict(weights))
    for p in weights:
        if p not in inst.class_of:
            report.add(f"{label}: measure charges unknown point {p!r}")
            return
        if weights[p] < 0:
            report.add(f"{label}: negative mass at {p!r}")
    total = measure.mass()
    if not scalar_eq(total, Fraction(1) if inst.mode == EXACT else 1.0,
                     inst.mode):
        report.add(f"{label}: total mass is {total}, not 1")
    inv = verify_invariance(inst, measure)
    if not inv.valid:
        report.add(f"{label}: invariance fails at "
                   f"{inv.violations[:3]}")


def consistent_class_measures(tower: Tower, cid: str):
    """Class measures at every level, if refinement-consistent; else None."""
    levels = []
    for inst in tower.levels:
        levels.append(class_measure(inst, cid).weights)
    for n in range(tower.level_count() - 1):
        fibers = tower.preimages(n)
        deep = levels[n + 1]
        for parent, mass in levels[n].items():
            pushed = sum((deep.get(c, Fraction(0)) for c in fibers[parent]),
                         Fraction(0))
            if not scalar_eq(pushed, mass, tower.mode):
                return None, (n, parent)
    return levels, None


@dataclass
class SolveResult:
    status: str  # "measure" | "compression" | "inconclusive"
    certificate: object | None
    reasons: list[str] = field(default_factory=list)


def dichotomy_solve(target, class_weights: Mapping[str, object] | None = None) -> SolveResult:
    """Decide measure versus compression for an instance or a tower.

    Finite instances always carry invariant measures (class measures),
    so they resolve to the measure side immediately.  Towers are
    searched in a fixed route order: exactly consistent class measures
    first, then declared additivity defects, then rotation defects
    over declared generators and sets, then the divergence-backed
    layer injection.  Anything left over is explicitly inconclusive.
    """
    if isinstance(target, Instance):
        measure = invariant_mixture(target, class_weights)
        cert = MeasureCertificate(
            weights=dict(measure.weights),
            class_weights=dict(class_weights or
                               {min(target.classes): Fraction(1)}))
        report = verify_measure(target, cert)
        if not report.valid:
            return SolveResult("inconclusive", None, report.violations)
        return SolveResult("measure", cert,
                           ["class measures are invariant on every "
                            "finite instance"])

    tower: Tower = target
    reasons: list[str] = []

    if class_weights is not None:
        candidates = [sorted(class_weights)]
    else:
        candidates = [[cid] for cid in sorted(tower.levels[0].classes)]
    for support in candidates:
        mixtures = []
        failure = None
        for cid in support:
            levels, failure = consistent_class_measures(tower, cid)
            if levels is None:
                break
            mixtures.append((cid, levels))
        if failure is not None:
            n, parent = failure
            reasons.append(f"class measures break refinement consistency "
                           f"at level {n}, point {parent!r}")
            continue
        lam = {cid: Fraction(class_weights[cid]) for cid in support} \
            if class_weights is not None else {support[0]: Fraction(1)}
        total = sum(lam.values())
        combined = []
        for n in range(tower.level_count()):
            row: dict[str, object] = {}
            for cid, levels in mixtures:
                for p, v in levels[n].items():
                    row[p] = row.get(p, 0) + v * lam[cid] / total
            combined.append(row)
        deepest = tower.level_count() - 1
        deep_measure = WeightedMeasure(combined[deepest])
        limits = {name: deep_measure.of(tower.set_at(deepest, name))
                  for name in sorted(tower.algebras[deepest])}
        cert = TowerMeasureCertificate(
            levels=tuple(combined), limits=limits,
            class_weights={cid: lam[cid] / total for cid in lam})
        report = verify_measure(tower, cert)
        if report.valid:
            return SolveResult(
                "measure", cert,
                [f"class measures on {support} are refinement-consistent"])
        reasons.extend(report.violations)

    for fam in tower.defect_families:
        try:
            cert = defect_to_compression(tower, fam.name)
        except NoCertifiedDefectError as exc:
            reasons.append(f"family {fam.name!r}: {exc}")
            continue
        report = verify_compression(tower, cert)
        if report.valid:
            return SolveResult(
                "compression", cert,
                [f"additivity defect in family {fam.name!r} certifies"])
        reasons.extend(report.violations)

    gen_names = sorted({name for inst in tower.levels
                        for name in inst.generators})
    set_names = sorted({name for table in tower.algebras for name in table})
    for gname in gen_names:
        for sname in set_names:
            try:
                cert = rotation_to_compression(tower, gname, sname)
            except NoCertifiedDefectError:
                continue
            report = verify_compression(tower, cert)
            if report.valid:
                return SolveResult(
                    "compression", cert,
                    [f"rotation defect of {gname!r} on {sname!r} certifies"])
    if gen_names:
        reasons.append("no rotation defect certifies")

    if tower.transversals and tower.divergence:
        try:
            cert = strictly_increasing_injection(tower)
        except (NotCertifiedAperiodicError, ModelError) as exc:
            reasons.append(str(exc))
        else:
            report = verify_compression(tower, cert)
            if report.valid:
                return SolveResult(
                    "compression", cert,
                    ["declared divergence feeds the layer injection"])
            reasons.extend(report.violations)
    else:
        reasons.append("no transversal partition with declared divergence")

    return SolveResult("inconclusive", None, reasons)
