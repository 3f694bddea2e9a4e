"""Compression certificates: construction, verification, lifting.

Frozen layer boundaries: harmonic masses 1, 1/2, 1/3, 1/4 give
(0, 1, 4); ten constant masses give (0, 1, 3, 6, 10); harmonic masses
of length two exhaust before a second boundary appears.
"""

from fractions import Fraction

import pytest

from cclab import (
    FiniteSubrelation,
    ModelError,
    NotCertifiedAperiodicError,
    build_instance,
)
from cclab.compression import (
    OVER_F,
    PLAIN,
    QUOTIENT,
    CompressionCertificate,
    _layer_boundaries,
    lift_compression,
    strictly_increasing_injection,
    strictly_increasing_injection_instance,
    verify_compression,
)
from cclab.examples import column_tower

F = Fraction


@pytest.fixture
def harmonic4():
    return build_instance(
        {"c0": ["x0", "x1", "x2", "x3"]},
        {"x0": 1, "x1": F(1, 2), "x2": F(1, 3), "x3": F(1, 4)},
    )


def pieces_of(inst):
    return [(p, frozenset({p})) for p in inst.points]


def test_layer_boundaries_frozen_values():
    assert _layer_boundaries([F(1), F(1, 2), F(1, 3), F(1, 4)]) == [0, 1, 4]
    assert _layer_boundaries([F(1)] * 10) == [0, 1, 3, 6, 10]
    assert _layer_boundaries([F(1), F(1, 2)]) == [0, 1]


def test_injection_on_harmonic_instance(harmonic4):
    cert = strictly_increasing_injection_instance(harmonic4, pieces_of(harmonic4))
    assert cert.mode == QUOTIENT
    assert cert.boundaries == {"c0": (0, 1, 4)}
    assert cert.mapping == {"x0": "x1"}
    assert cert.frontier == ("x1",)
    report = verify_compression(harmonic4, cert)
    assert report.valid, report.violations
    assert report.fibers["x1"] == F(12, 13)
    assert report.strict_set == ("x0", "x1")


def test_injection_needs_two_layers():
    inst = build_instance({"c0": ["x0", "x1"]}, {"x0": 1, "x1": F(1, 2)})
    with pytest.raises(NotCertifiedAperiodicError, match="not certified aperiodic"):
        strictly_increasing_injection_instance(inst, pieces_of(inst))


def test_injection_merges_leftover_pieces():
    inst = build_instance(
        {"c0": [f"x{j}" for j in range(5)]},
        {f"x{j}": F(1, j + 1) for j in range(5)},
    )
    cert = strictly_increasing_injection_instance(inst, pieces_of(inst))
    assert cert.boundaries == {"c0": (0, 1, 4)}
    # the fifth piece cannot start a new layer, so it joins the frontier
    assert set(cert.subrelation.block_of("x1")) == {"x1", "x2", "x3", "x4"}
    assert verify_compression(inst, cert).valid


def test_total_strict_map_cannot_verify(harmonic4):
    sub = FiniteSubrelation.from_blocks(harmonic4, [["x0"], ["x1", "x2", "x3"]])
    cert = CompressionCertificate(
        mode=QUOTIENT, mapping={"x0": "x1", "x1": "x0"}, subrelation=sub)
    report = verify_compression(harmonic4, cert)
    assert not report.valid
    assert any("> 1" in v for v in report.violations)


def test_identity_map_is_not_strict(harmonic4):
    cert = CompressionCertificate(
        mode=PLAIN, mapping={p: p for p in harmonic4.points})
    report = verify_compression(harmonic4, cert)
    assert not report.valid
    assert any("no strictly small fiber" in v for v in report.violations)


def test_plain_mode_requires_totality(harmonic4):
    cert = CompressionCertificate(mode=PLAIN, mapping={"x1": "x0"})
    report = verify_compression(harmonic4, cert)
    assert not report.valid
    assert any("must be total" in v for v in report.violations)


def test_empty_map_rejected(harmonic4):
    sub = FiniteSubrelation.from_blocks(harmonic4, [["x0"], ["x1", "x2", "x3"]])
    cert = CompressionCertificate(
        mode=QUOTIENT, mapping={}, subrelation=sub,
        frontier=("x0", "x1"),
        evidence={"kind": "layer-growth",
                  "frontier": {"c0": ["x0", "x1"]},
                  "feeders": {"c0": ["x0"]}})
    report = verify_compression(harmonic4, cert)
    assert not report.valid
    assert any("receives nothing" in v for v in report.violations)


def test_tampered_strict_set_flagged(harmonic4):
    cert = strictly_increasing_injection_instance(harmonic4, pieces_of(harmonic4))
    cert.strict_set = ("x0",)
    report = verify_compression(harmonic4, cert)
    assert not report.valid
    assert any("strict set disagrees" in v for v in report.violations)


def test_tampered_frontier_flagged(harmonic4):
    cert = strictly_increasing_injection_instance(harmonic4, pieces_of(harmonic4))
    cert.frontier = ()
    report = verify_compression(harmonic4, cert)
    assert not report.valid
    assert any("frontier disagrees" in v for v in report.violations)


def test_frontier_without_evidence_rejected(harmonic4):
    cert = strictly_increasing_injection_instance(harmonic4, pieces_of(harmonic4))
    cert.evidence = None
    report = verify_compression(harmonic4, cert)
    assert not report.valid
    assert any("without evidence" in v for v in report.violations)


def test_stalling_frontier_rejected():
    # equal masses: the would-be frontier does not outweigh its feeder
    inst = build_instance(
        {"c0": ["x0", "x1"]}, {"x0": 1, "x1": 1})
    sub = FiniteSubrelation.from_blocks(inst, [["x0"], ["x1"]])
    cert = CompressionCertificate(
        mode=QUOTIENT, mapping={"x0": "x1"}, subrelation=sub,
        frontier=("x1",),
        evidence={"kind": "layer-growth", "frontier": {"c0": ["x1"]},
                  "feeders": {"c0": ["x0"]}})
    report = verify_compression(inst, cert)
    assert not report.valid
    assert any("does not exceed" in v for v in report.violations)


def test_tower_injection_on_column_tower():
    tower = column_tower(5)
    cert = strictly_increasing_injection(tower)
    assert cert.start_level == 3
    assert cert.levels[0] is None and cert.levels[2] is None
    assert cert.levels[3].boundaries == {"c0": (0, 1, 4)}
    assert cert.levels[4].boundaries == {"c0": (0, 1, 4)}
    report = verify_compression(tower, cert)
    assert report.valid, report.violations


def test_tower_injection_multi_class():
    tower = column_tower(5, n_classes=2)
    cert = strictly_increasing_injection(tower)
    report = verify_compression(tower, cert)
    assert report.valid, report.violations
    assert cert.levels[4].boundaries["c1"] == (0, 1, 4)


def test_tower_cert_level_mismatch():
    tower = column_tower(4)
    cert = strictly_increasing_injection(tower)
    deeper = column_tower(5)
    report = verify_compression(deeper, cert)
    assert not report.valid


def test_lift_quotient_to_over_f(harmonic4):
    cert = strictly_increasing_injection_instance(harmonic4, pieces_of(harmonic4))
    lifted = lift_compression(harmonic4, cert)
    assert lifted.mode == OVER_F
    # single source wraps onto the first point of the target block
    assert lifted.mapping == {"x0": "x1"}
    assert lifted.frontier == ("x1", "x2", "x3")
    report = verify_compression(harmonic4, lifted)
    assert report.valid, report.violations


def test_lift_spreads_sources_over_target_block():
    inst = build_instance(
        {"c0": [f"x{j}" for j in range(6)]},
        {"x0": 1, "x1": 1, "x2": F(3, 4), "x3": F(3, 4),
         "x4": F(3, 4), "x5": F(3, 4)},
    )
    sub = FiniteSubrelation.from_blocks(
        inst, [["x0", "x1"], ["x2", "x3", "x4", "x5"]])
    cert = CompressionCertificate(
        mode=QUOTIENT, mapping={"x0": "x2"}, subrelation=sub,
        frontier=("x2",),
        evidence={"kind": "layer-growth", "frontier": {"c0": ["x2"]},
                  "feeders": {"c0": ["x0"]}})
    assert verify_compression(inst, cert).valid
    lifted = lift_compression(inst, cert)
    assert lifted.mapping == {"x0": "x2", "x1": "x3"}
    assert verify_compression(inst, lifted).valid


def test_lift_over_f_to_plain_requires_constant():
    tilted = build_instance({"c0": ["a", "b"]}, {"a": 1, "b": 2})
    sub = FiniteSubrelation.equality(tilted)
    cert = CompressionCertificate(mode=OVER_F, mapping={"a": "a", "b": "b"},
                                  subrelation=sub)
    with pytest.raises(ModelError, match="constant cocycle"):
        lift_compression(tilted, cert)


def test_lift_over_identity_f_is_same_map():
    flat = build_instance({"c0": ["a", "b"]}, {"a": 1, "b": 1})
    sub = FiniteSubrelation.equality(flat)
    cert = CompressionCertificate(mode=OVER_F, mapping={"a": "b", "b": "b"},
                                  subrelation=sub)
    lifted = lift_compression(flat, cert)
    assert lifted.mode == PLAIN
    assert lifted.mapping == {"a": "b", "b": "b"}


def test_injection_respects_scope():
    inst = build_instance(
        {"c0": ["x0", "x1", "x2", "x3"], "c1": ["y0"]},
        {"x0": 1, "x1": F(1, 2), "x2": F(1, 3), "x3": F(1, 4), "y0": 1},
    )
    pieces = [(p, frozenset({p})) for p in ["x0", "x1", "x2", "x3"]] + \
             [("py", frozenset({"y0"}))]
    cert = strictly_increasing_injection_instance(inst, pieces, scope=["c0"])
    report = verify_compression(inst, cert)
    assert report.valid, report.violations
