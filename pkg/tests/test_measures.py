"""Measures, witnesses, limits, and the dichotomy routes.

Frozen values, all derived by hand from the chain with weights
1, 1/2, 1/3, 1/6 (class mass 2) and the generated tower families:

* class measure on the chain: 1/2, 1/4, 1/6, 1/12;
* transport along f = (1, 2, 3, 6): new weights 1, 1/4, 1/9, 1/36 and
  transported masses 1/2, 1/8, 1/18, 1/72;
* equal-weight class {a, b, c, d} with dense part {a, b} splits into
  blocks {a, c}, {b, d} at density 1/2;
* doubling tower margins 3/(m+2), minimum 1/4 over ten levels, and
  the greedy defect conversion matches tier k against tier k+1 with
  zero overshoot, frontier = deepest tier, pointwise bound 2;
* rotation of the second bit against the strings starting with 1
  first certifies at the three-bit level: the pair {100, 101} (mass 8)
  lands on {110, 111} (mass 24) while the top pairs join the frontier.
"""

from fractions import Fraction as F

import pytest

from cclab.core import (
    FLOAT,
    FiniteSubrelation,
    ModelError,
    NoCertifiedDefectError,
    build_instance,
)
from cclab.examples import column_tower, doubling_tower, odometer_tower, \
    smooth_transversal
from cclab.measures import (
    MeasureCertificate,
    TowerMeasureCertificate,
    WeightedMeasure,
    class_measure,
    consistent_class_measures,
    defect_to_compression,
    density_witness,
    density_witness_parts,
    dichotomy_solve,
    extend_from_dense,
    fiber_identity,
    invariant_mixture,
    push_cohomologous,
    rotation_to_compression,
    tower_limit,
    verify_invariance,
    verify_measure,
)
from cclab.compression import verify_compression
from cclab.tower import build_tower


@pytest.fixture
def chain():
    return build_instance(
        {"c0": ["a", "b", "c", "d"]},
        {"a": 1, "b": F(1, 2), "c": F(1, 3), "d": F(1, 6)})


@pytest.fixture
def flat():
    return build_instance(
        {"c0": ["a", "b", "c", "d"]},
        {"a": 1, "b": 1, "c": 1, "d": 1})


def pair_subrelations(tower):
    """Blocks pairing strings that differ only in the last bit."""
    subs = []
    for inst in tower.levels:
        prefixes = sorted({p[:-1] for p in inst.points})
        subs.append(FiniteSubrelation.from_blocks(
            inst, [[v + "0", v + "1"] for v in prefixes]))
    return subs


def rotation_tower(n_levels):
    base = doubling_tower(n_levels)
    return build_tower(
        base.levels, base.refinements,
        subrelations=pair_subrelations(base),
        algebras=base.algebras, boundary=base.boundary)


def stuck_tower():
    """Two levels, no declarations: every dichotomy route must fail."""
    top = build_instance({"c0": ["a", "b"]}, {"a": 1, "b": 1})
    bottom = build_instance({"c0": ["a0", "a1", "b0"]},
                            {"a0": 1, "a1": 1, "b0": 1})
    return build_tower(
        [top, bottom], [{"a0": "a", "a1": "a", "b0": "b"}],
        boundary=[{"b"}, set()])


def test_class_measure_normalizes_potentials():
    inst = build_instance({"c0": ["a", "b", "c"]},
                          {"a": 1, "b": F(1, 2), "c": F(1, 3)})
    mu = class_measure(inst)
    assert mu.weights == {"a": F(6, 11), "b": F(3, 11), "c": F(2, 11)}


def test_class_measure_frozen(chain):
    mu = class_measure(chain)
    assert mu.weights == {"a": F(1, 2), "b": F(1, 4),
                          "c": F(1, 6), "d": F(1, 12)}
    assert mu.mass() == 1
    assert verify_invariance(chain, mu).valid


def test_invariance_detects_perturbation(chain):
    mu = class_measure(chain)
    mu.weights["c"] = F(1, 5)
    report = verify_invariance(chain, mu)
    assert not report.valid
    assert ("c", "a") in report.violations


def test_invariance_on_restricted_pairs(chain):
    mu = WeightedMeasure({"b": F(1, 2), "c": F(1, 3)})
    ok = verify_invariance(chain, mu, pairs=[("b", "c")])
    assert ok.valid and ok.checked == 1
    bad = verify_invariance(chain, mu, pairs=[("a", "b")])
    assert not bad.valid
    with pytest.raises(ModelError):
        verify_invariance(chain, mu, pairs=[("a", "zz")])


def test_mixture_weights_classes():
    inst = build_instance({"c0": ["a", "b"], "c1": ["x"]},
                          {"a": 1, "b": 1, "x": 1})
    mu = invariant_mixture(inst, {"c0": 1, "c1": 1})
    assert mu.weights == {"a": F(1, 4), "b": F(1, 4), "x": F(1, 2)}
    default = invariant_mixture(inst)
    assert default.weights == {"a": F(1, 2), "b": F(1, 2)}


def test_fiber_identity_holds_for_invariant(chain):
    mu = class_measure(chain)
    phi = {"b": "a", "c": "a", "d": "c"}
    report = fiber_identity(chain, mu, phi, ["a"])
    assert report.lhs == F(5, 12)
    assert report.rhs == F(5, 12)
    assert report.equal


def test_fiber_identity_fails_for_point_mass(chain):
    mu = WeightedMeasure({"a": 1})
    report = fiber_identity(chain, mu, {"b": "a", "c": "a"}, ["a"])
    assert report.lhs == 0 and report.rhs == F(5, 6)
    assert not report.equal


def test_fiber_identity_for_random_maps(chain):
    import random
    rng = random.Random(20260814)
    mu = class_measure(chain)
    members = list(chain.classes["c0"])
    for _ in range(100):
        phi = {p: rng.choice(members)
               for p in rng.sample(members, rng.randint(1, 4))}
        targets = rng.sample(members, rng.randint(1, 4))
        assert fiber_identity(chain, mu, phi, targets).equal


def test_invariance_composes_across_generator_graphs():
    # checking two permutation graphs separately covers their composite
    strings = ["00", "01", "10", "11"]
    swap = {"00": "01", "01": "00", "10": "11", "11": "10"}
    cycle = {"00": "10", "10": "11", "11": "01", "01": "00"}
    inst = build_instance({"c0": strings}, {s: 1 for s in strings},
                          generators={"swap": swap, "cycle": cycle})
    mu = class_measure(inst)
    graph_r = [(x, y) for x, y in swap.items()]
    graph_s = [(x, y) for x, y in cycle.items()]
    composed = [(x, cycle[swap[x]]) for x in strings]
    assert verify_invariance(inst, mu, pairs=graph_r).valid
    assert verify_invariance(inst, mu, pairs=graph_s).valid
    assert verify_invariance(inst, mu, pairs=composed).valid


def test_push_cohomologous_flattens_the_chain(chain, flat):
    # f = 1/w turns the chain cocycle constant; nu = f mu is uniform
    f = {"a": 1, "b": 2, "c": 3, "d": 6}
    nu = push_cohomologous(chain, class_measure(chain), f, flat)
    assert nu.weights == {p: F(1, 2) for p in "abcd"}
    assert verify_invariance(flat, nu).valid


def test_push_cohomologous_builds_class_measure(chain, flat):
    # the reverse direction: f = w converts uniform mass on the
    # constant cocycle into potential-proportional mass on the chain
    f = {"a": 1, "b": F(1, 2), "c": F(1, 3), "d": F(1, 6)}
    uniform = WeightedMeasure({p: F(1, 4) for p in "abcd"})
    nu = push_cohomologous(flat, uniform, f, chain)
    assert nu.weights == {"a": F(1, 4), "b": F(1, 8),
                          "c": F(1, 12), "d": F(1, 24)}
    assert verify_invariance(chain, nu).valid


def test_push_rejects_wrong_witness(chain, flat):
    ones = {p: 1 for p in chain.points}
    with pytest.raises(ModelError, match="not cohomologous"):
        push_cohomologous(chain, class_measure(chain), ones, flat)


def test_density_witness_frozen_blocks(flat):
    witness = density_witness(flat, ["a", "b"])
    assert witness.eps == F(1, 2)
    assert [list(b) for b in witness.subrelation.blocks] == \
        [["a", "c"], ["b", "d"]]
    assert witness.covered == ("c0",)


def test_density_witness_respects_requested_eps(flat):
    assert density_witness(flat, ["a", "b"], eps=F(3, 4)) is None
    assert density_witness(flat, ["a", "b"], eps=F(1, 2)) is not None


def test_density_witness_missing_class_gives_parts():
    inst = build_instance({"c0": ["a", "b"], "c1": ["x", "y"]},
                          {"a": 1, "b": 1, "x": 1, "y": 1})
    assert density_witness(inst, ["a"]) is None
    parts = density_witness_parts(inst, ["a"])
    assert parts == [("c0", F(1, 2))]


def test_extension_recovers_class_measure(chain):
    sub = FiniteSubrelation.from_blocks(chain, [["a", "b"], ["c", "d"]])
    out = extend_from_dense(chain, {"a": F(1, 2), "c": F(1, 6)}, sub)
    assert out.weights == class_measure(chain).weights
    assert out.mass() == 1


def test_extension_hits_its_mass_bound(flat):
    # whole-class block, half the mass dense: extension doubles it
    sub = FiniteSubrelation.from_blocks(flat, [["a", "b", "c", "d"]])
    out = extend_from_dense(flat, {"a": F(1, 2), "b": F(1, 2)}, sub)
    assert out.weights == {p: F(1, 2) for p in "abcd"}
    assert out.mass() == 2


def test_extension_rejects_skewed_dense_measure(flat):
    sub = FiniteSubrelation.from_blocks(flat, [["a", "b", "c", "d"]])
    with pytest.raises(ModelError, match="not invariant"):
        extend_from_dense(flat, {"a": F(1, 2), "b": F(1, 3)}, sub)


def test_extension_needs_every_block_met(flat):
    sub = FiniteSubrelation.from_blocks(flat, [["a", "b"], ["c", "d"]])
    with pytest.raises(ModelError, match="misses the dense set"):
        extend_from_dense(flat, {"a": 1}, sub)


def test_extension_accepts_a_density_witness(flat):
    witness = density_witness(flat, ["a", "b"])
    out = extend_from_dense(flat, {"a": F(1, 2), "b": F(1, 2)}, witness)
    assert out.mass() == 2


def test_limit_declared_for_odometer_cylinders():
    report = tower_limit(odometer_tower(5, F(1, 3)))
    assert report.declared("cyl:1", "c0")
    assert report.limit_value("cyl:1", "c0") == F(1, 3)
    assert report.declared("cyl:11", "c0")
    assert report.limit_value("cyl:11", "c0") == F(1, 9)
    assert all(report.condition1)


def test_limit_inconclusive_for_grid_origin():
    report = tower_limit(column_tower(10))
    assert not report.declared("origin", "c0")
    assert report.declared("all", "c0")
    assert report.limit_value("all", "c0") == 1


def test_limit_schedule_controls_declaration():
    tower = doubling_tower(10)
    strict = tower_limit(tower)
    assert not strict.declared("tier:01", "c0")
    relaxed = tower_limit(tower, eps_schedule=[F(1, n + 1) for n in range(10)])
    assert relaxed.declared("tier:01", "c0")
    assert relaxed.limit_value("tier:01", "c0") == F(1, 12)
    with pytest.raises(ModelError, match="schedule shorter"):
        tower_limit(tower, eps_schedule=[F(1, 2)])


def test_limit_reports_defect_family():
    report = tower_limit(doubling_tower(10))
    summary = report.defects["tiers"]
    assert summary["min_margin"] == F(1, 4)
    assert summary["trend_ok"] and summary["growing"] and summary["reported"]
    # margins at level m are 3/(m+2)
    assert dict(summary["margins"]["c0"])[1] == F(3, 4)
    assert dict(summary["margins"]["c0"])[9] == F(1, 4)


def test_defect_conversion_frozen_level(chain):
    tower = doubling_tower(6)
    cert = defect_to_compression(tower)
    assert cert.start_level == 1
    assert cert.levels[0] is None
    level = cert.levels[2]
    assert level.mapping == {
        "000": "100", "001": "101", "010": "100", "011": "101",
        "100": "110", "101": "110", "111": "111"}
    assert level.frontier == ("110",)
    assert level.bound == 2
    assert level.mapped_members == ("tier:01", "tier:02")
    report = verify_compression(tower, cert)
    assert report.valid, report.violations


def test_defect_conversion_needs_a_family():
    with pytest.raises(NoCertifiedDefectError, match="no declared family"):
        defect_to_compression(odometer_tower(3, F(1, 2)))
    with pytest.raises(NoCertifiedDefectError, match="no declared family"):
        defect_to_compression(doubling_tower(4), family="ghost")


def test_rotation_conversion_frozen_level():
    tower = rotation_tower(4)
    cert = rotation_to_compression(tower, "flip:1", "tail:02")
    assert cert.start_level == 2
    assert cert.levels[0] is None and cert.levels[1] is None
    level = cert.levels[2]
    assert level.mapping["100"] == "110"
    assert level.mapping["101"] == "111"
    assert level.mapping["000"] == "000"
    assert level.frontier == ("110", "111")
    assert level.bound == 1
    report = verify_compression(tower, cert)
    assert report.valid, report.violations


def test_rotation_of_first_bit_certifies_earlier():
    tower = rotation_tower(4)
    cert = rotation_to_compression(tower, "flip:0", "all")
    assert cert.start_level == 1
    assert verify_compression(tower, cert).valid


def test_rotation_needs_real_defect():
    with pytest.raises(NoCertifiedDefectError):
        rotation_to_compression(rotation_tower(4), "flip:0", "missing")


def test_class_measures_consistency_split():
    levels, failure = consistent_class_measures(
        odometer_tower(4, F(1, 3)), "c0")
    assert failure is None and len(levels) == 4
    levels, failure = consistent_class_measures(doubling_tower(4), "c0")
    assert levels is None
    assert failure == (0, "0")


def test_verify_measure_instance(chain):
    cert = MeasureCertificate(weights=dict(class_measure(chain).weights))
    assert verify_measure(chain, cert).valid
    cert.weights["a"] = F(1, 3)
    report = verify_measure(chain, cert)
    assert not report.valid
    assert any("total mass" in v for v in report.violations)


def test_verify_measure_tower_tampering():
    tower = odometer_tower(4, F(1, 3))
    result = dichotomy_solve(tower)
    cert = result.certificate
    assert verify_measure(tower, cert).valid
    bad = TowerMeasureCertificate(
        levels=cert.levels,
        limits={**cert.limits, "cyl:1": F(1, 2)},
        class_weights=cert.class_weights)
    report = verify_measure(tower, bad)
    assert any("declared limit" in v for v in report.violations)
    doubled = doubling_tower(3)
    rows = tuple(class_measure(inst).weights for inst in doubled.levels)
    cert = TowerMeasureCertificate(levels=rows)
    report = verify_measure(doubled, cert)
    assert any("pushforward differs" in v for v in report.violations)


def test_solve_instance_routes_to_measure():
    inst = smooth_transversal(3)
    result = dichotomy_solve(inst)
    assert result.status == "measure"
    assert verify_measure(inst, result.certificate).valid


def test_solve_odometer_routes_to_measure():
    tower = odometer_tower(5, F(1, 3))
    result = dichotomy_solve(tower)
    assert result.status == "measure"
    assert result.certificate.limits["cyl:1"] == F(1, 3)
    assert result.certificate.limits["cyl:11"] == F(1, 9)


def test_solve_doubling_routes_to_defect():
    result = dichotomy_solve(doubling_tower(6))
    assert result.status == "compression"
    assert result.certificate.evidence["kind"] == "defect"
    assert result.certificate.start_level == 1
    assert any("refinement consistency" in r for r in result.reasons) is False


def test_solve_column_routes_to_injection():
    result = dichotomy_solve(column_tower(5))
    assert result.status == "compression"
    assert result.certificate.evidence["kind"] == "divergence"
    assert result.certificate.start_level == 3


def test_solve_rotation_tower_routes_to_rotation():
    result = dichotomy_solve(rotation_tower(4))
    assert result.status == "compression"
    assert result.certificate.evidence["kind"] == "rotation"


def test_solve_reports_inconclusive():
    result = dichotomy_solve(stuck_tower())
    assert result.status == "inconclusive"
    assert result.certificate is None
    assert any("refinement consistency" in r for r in result.reasons)


def test_defect_conversion_in_float_mode():
    tower = doubling_tower(4, mode=FLOAT)
    cert = defect_to_compression(tower)
    assert cert.start_level == 1
    assert verify_compression(tower, cert).valid
