"""Core model tests: construction, sizes, quotients, coboundary checks.

Expected values for the worked four-point class (weights 1, 1/2, 1/3,
1/6) were recomputed by direct summation before being frozen here.
"""

from fractions import Fraction

import pytest

from cclab import (
    EXACT,
    FLOAT,
    CycleInconsistencyError,
    DisconnectedPresentationError,
    FiniteSubrelation,
    Interval,
    ModelError,
    build_instance,
    coboundary_check,
    cocycle_from_edges,
    is_constant_cocycle,
    quotient_by,
    restrict_to_classes,
    rho_eval,
    rho_size,
)

F = Fraction


@pytest.fixture
def chain4():
    """Single class a > b > c > d with weights 1, 1/2, 1/3, 1/6."""
    return build_instance(
        {"c0": ["a", "b", "c", "d"]},
        {"a": 1, "b": F(1, 2), "c": F(1, 3), "d": F(1, 6)},
    )


def test_normalization_uses_min_id_basepoint():
    inst = build_instance({"c0": ["b", "a"]}, {"a": 10, "b": 30})
    assert inst.basepoint("c0") == "a"
    assert inst.weight("a") == 1
    assert inst.weight("b") == 3


def test_rho_eval_and_cocycle_identity(chain4):
    assert rho_eval(chain4, "a", "b") == 2
    assert rho_eval(chain4, "b", "c") == F(3, 2)
    assert rho_eval(chain4, "c", "d") == 2
    assert rho_eval(chain4, "a", "d") == 6
    # multiplicativity along a path
    assert (rho_eval(chain4, "a", "b") * rho_eval(chain4, "b", "d")
            == rho_eval(chain4, "a", "d"))


def test_rho_eval_rejects_non_equivalent_points():
    inst = build_instance({"c0": ["a"], "c1": ["b"]}, {"a": 1, "b": 1})
    with pytest.raises(ModelError):
        rho_eval(inst, "a", "b")


def test_rho_size_point_anchor(chain4):
    assert rho_size(chain4, ["b", "c"], "a") == F(5, 6)
    assert rho_size(chain4, ["a", "b", "c"], "b") == F(11, 3)
    assert rho_size(chain4, [], "a") == 0


def test_rho_size_set_anchor(chain4):
    assert rho_size(chain4, ["a"], {"b", "c"}) == F(6, 5)
    # consistency: set-anchored size is point size divided by anchor size
    assert rho_size(chain4, ["b", "c"], {"a"}) == F(5, 6)


def test_rho_size_anchor_covariance(chain4):
    # |Y|_z' = |Y|_z * rho(z, z')
    y = ["b", "d"]
    at_a = rho_size(chain4, y, "a")
    at_c = rho_size(chain4, y, "c")
    assert at_a == at_c * rho_eval(chain4, "c", "a")


def test_rho_size_rejects_mixed_classes():
    inst = build_instance({"c0": ["a"], "c1": ["b"]}, {"a": 1, "b": 1})
    with pytest.raises(ModelError):
        rho_size(inst, ["a", "b"], "a")
    with pytest.raises(ModelError):
        rho_size(inst, ["a"], set())


def test_cocycle_from_edges_two_step_chain():
    inst = cocycle_from_edges(
        {"c0": ["a", "b", "c"]},
        [("a", "b", 2), ("b", "c", 3)],
    )
    # canonical potential after min-id normalization
    assert inst.weight("a") == 1
    assert inst.weight("b") == F(1, 2)
    assert inst.weight("c") == F(1, 6)
    assert rho_eval(inst, "a", "c") == 6


def test_cocycle_from_edges_single_edge_rescales():
    inst = cocycle_from_edges({"c0": ["a", "b"]}, [("b", "a", 2)])
    assert inst.weight("a") == 1
    assert inst.weight("b") == 2


def test_cocycle_from_edges_detects_cycle_inconsistency():
    with pytest.raises(CycleInconsistencyError, match="cycle inconsistency"):
        cocycle_from_edges(
            {"c0": ["a", "b", "c"]},
            [("a", "b", 2), ("b", "c", 3), ("a", "c", 5)],
        )


def test_cocycle_from_edges_detects_disconnection():
    with pytest.raises(DisconnectedPresentationError,
                       match="disconnected presentation"):
        cocycle_from_edges({"c0": ["a", "b", "c"]}, [("a", "b", 2)])


def test_cocycle_from_edges_consistent_cycle_passes():
    inst = cocycle_from_edges(
        {"c0": ["a", "b", "c"]},
        [("a", "b", 2), ("b", "c", 3), ("a", "c", 6)],
    )
    assert rho_eval(inst, "a", "c") == 6


def test_non_positive_weight_rejected():
    with pytest.raises(ModelError, match="non-positive potential"):
        build_instance({"c0": ["a", "b"]}, {"a": 1, "b": 0})
    with pytest.raises(ModelError, match="non-positive potential"):
        build_instance({"c0": ["a", "b"]}, {"a": 1, "b": -2})


def test_quotient_by_pair_blocks(chain4):
    sub = FiniteSubrelation.from_blocks(chain4, [["a", "b"], ["c", "d"]])
    q, proj = quotient_by(chain4, sub)
    assert q.points == ("a", "c")
    # block masses 3/2 and 1/2 give quotient ratio 3
    assert rho_eval(q, "a", "c") == 3
    assert proj == {"a": "a", "b": "a", "c": "c", "d": "c"}
    # quotient is renormalized: representative carries weight 1
    assert q.weight("a") == 1
    assert q.weight("c") == F(1, 3)


def test_quotient_matches_set_sizes(chain4):
    # (rho/F)([x], [y]) = |[x]|_{[y]} for every pair of blocks
    sub = FiniteSubrelation.from_blocks(chain4, [["a", "b"], ["c", "d"]])
    q, _ = quotient_by(chain4, sub)
    assert rho_eval(q, "a", "c") == rho_size(chain4, ["a", "b"], {"c", "d"})
    assert rho_eval(q, "c", "a") == rho_size(chain4, ["c", "d"], {"a", "b"})


def test_quotient_drops_generators(chain4):
    inst = build_instance(
        {"c0": ["a", "b"]}, {"a": 1, "b": 1},
        generators={"swap": {"a": "b", "b": "a"}},
    )
    sub = FiniteSubrelation.whole_classes(inst)
    q, _ = quotient_by(inst, sub)
    assert q.generators == {}


def test_subrelation_fills_singletons(chain4):
    sub = FiniteSubrelation.from_blocks(chain4, [["a", "b"]])
    assert sub.blocks == (("a", "b"), ("c",), ("d",))
    assert sub.rep("b") == "a"
    assert sub.rep("d") == "d"
    assert sub.same_block("a", "b") and not sub.same_block("a", "c")


def test_subrelation_rejects_cross_class_blocks():
    inst = build_instance({"c0": ["a"], "c1": ["b"]}, {"a": 1, "b": 1})
    with pytest.raises(ModelError, match="crosses classes"):
        FiniteSubrelation.from_blocks(inst, [["a", "b"]])


def test_subrelation_rejects_overlap(chain4):
    with pytest.raises(ModelError, match="overlap"):
        FiniteSubrelation.from_blocks(chain4, [["a", "b"], ["b", "c"]])


def test_coboundary_check_accepts_and_rejects(chain4):
    ok, violations = coboundary_check(
        chain4, {"a": 6, "b": 3, "c": 2, "d": 1})
    assert ok and violations == []
    ok, violations = coboundary_check(
        chain4, {"a": 6, "b": 3, "c": 2, "d": 2})
    assert not ok
    assert ("d", "a") in violations


def test_constant_cocycle_detection():
    flat = build_instance({"c0": ["a", "b", "c"]}, {"a": 5, "b": 5, "c": 5})
    assert is_constant_cocycle(flat)
    tilted = build_instance({"c0": ["a", "b"]}, {"a": 1, "b": 2})
    assert not is_constant_cocycle(tilted)


def test_float_mode_stores_log_weights():
    inst = build_instance({"c0": ["a", "b"]}, {"a": 1.0, "b": 8.0}, mode=FLOAT)
    assert inst.mode == FLOAT
    assert inst.cocycle.values["a"] == 0.0
    assert abs(rho_eval(inst, "b", "a") - 8.0) < 1e-9


def test_float_mode_survives_extreme_ranges():
    import math
    # weights spanning e^500 would overflow plain floats; log form is fine
    inst = build_instance(
        {"c0": ["a", "b", "c"]},
        {"a": 1.0, "b": math.exp(200.0), "c": 1.0},
        mode=FLOAT,
    )
    # ratio of the two extreme points round-trips through logs
    assert abs(rho_eval(inst, "a", "c") - 1.0) < 1e-9
    big = rho_eval(inst, "b", "a")
    assert big > 1e80


def test_float_quotient_uses_stable_summation():
    import math
    inst = build_instance(
        {"c0": ["a", "b", "c", "d"]},
        {"a": 1.0, "b": 1.0, "c": math.exp(100.0), "d": math.exp(100.0)},
        mode=FLOAT,
    )
    sub = FiniteSubrelation.from_blocks(inst, [["a", "b"], ["c", "d"]])
    q, _ = quotient_by(inst, sub)
    assert abs(rho_eval(q, "c", "a") - math.exp(100.0)) < 1e90


def test_interval_defaults_and_membership():
    u = Interval.default_unit()
    assert u.contains(1) and u.contains(F(3, 4))
    assert not u.contains(F(1, 2)) and not u.contains(2)
    closed = Interval.closed(F(1, 2), 2)
    assert closed.contains(F(1, 2)) and closed.contains(2)
    with pytest.raises(ModelError):
        Interval(F(2), F(1))
    with pytest.raises(ModelError):
        Interval(F(0), F(1))


def test_restrict_to_classes_keeps_weights_and_generators():
    inst = build_instance(
        {"c0": ["a", "b"], "c1": ["x", "y"]},
        {"a": 1, "b": 2, "x": 1, "y": 5},
        generators={"g": {"a": "b", "b": "a", "x": "y", "y": "x"}},
    )
    small = restrict_to_classes(inst, ["c1"])
    assert small.points == ("x", "y")
    assert rho_eval(small, "y", "x") == 5
    assert small.generators["g"] == {"x": "y", "y": "x"}


def test_build_rejects_duplicate_and_empty():
    with pytest.raises(ModelError):
        build_instance({"c0": ["a"], "c1": ["a"]}, {"a": 1})
    with pytest.raises(ModelError):
        build_instance({"c0": []}, {})
    with pytest.raises(ModelError):
        build_instance({"c0": ["a"]}, {})


def test_generator_validation():
    with pytest.raises(ModelError, match="permutation"):
        build_instance({"c0": ["a", "b"]}, {"a": 1, "b": 1},
                       generators={"g": {"a": "b"}})
    with pytest.raises(ModelError, match="preserve classes"):
        build_instance({"c0": ["a"], "c1": ["b"]}, {"a": 1, "b": 1},
                       generators={"g": {"a": "b", "b": "a"}})


def test_generator_ratio_accessor():
    inst = build_instance(
        {"c0": ["a", "b"]}, {"a": 1, "b": 3},
        generators={"swap": {"a": "b", "b": "a"}},
    )
    assert inst.generator_ratio("swap") == {"a": 3, "b": F(1, 3)}
