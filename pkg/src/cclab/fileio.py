"""Versioned on-disk formats for instances, towers, and certificates.

Everything is JSON written through one canonical serializer: keys
sorted, two-space indent, trailing newline, ASCII only.  Writing the
same object twice produces byte-identical files.

Instance files carry ``version``, ``mode``, ``points``, ``classes``,
``potentials`` (num/den objects in exact mode, decimals in float
mode), optional ``generators``, and an optional ``tower`` section with
per-level instances, refinement maps, subrelation block arrays, named
algebras, divergence schedules, and the other tower declarations.  A
tower file mirrors its deepest level in the top-level instance fields;
the mirror is cross-checked on read.

Certificate files carry a ``kind`` tag: "measure", "tower-measure",
"compression", or "tower-compression".  A compression certificate's
``mode`` is the compression mode (plain / over-F / quotient-by-F) and
its blocks travel under ``F``; number encoding is self-describing, so
exact and float certificates share the schema.  Colorings serialize as
plain point-to-integer maps.

Structural problems raise FormatError; semantic validation stays with
the model builders, whose ModelError propagates unchanged.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction

from cclab.core import (
    EXACT,
    FLOAT,
    FiniteSubrelation,
    FormatError,
    Instance,
    ModelError,
    build_instance,
)
from cclab.compression import (
    CompressionCertificate,
    TowerCompressionCertificate,
)
from cclab.lacunarity import Coloring
from cclab.measures import MeasureCertificate, TowerMeasureCertificate
from cclab.tower import DefectFamily, Tower, build_tower

FORMAT_VERSION = 1


def canonical_dumps(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=True,
                      allow_nan=False) + "\n"


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _require(data, label: str, keys) -> None:
    if not isinstance(data, dict):
        raise FormatError(f"{label} must be an object")
    missing = [k for k in keys if k not in data]
    if missing:
        raise FormatError(f"{label} misses fields {missing}")


def _check_version(data, label: str) -> None:
    if data.get("version") != FORMAT_VERSION:
        raise FormatError(f"{label} has unsupported version "
                          f"{data.get('version')!r}")


def _encode_number(value, mode: str):
    if mode == EXACT:
        f = Fraction(value)
        return {"num": f.numerator, "den": f.denominator}
    return float(value)


def _decode_number(data, where: str):
    """Decode a number by shape: num/den object or plain decimal."""
    if isinstance(data, dict):
        if set(data) != {"num", "den"}:
            raise FormatError(f"{where}: malformed rational {data!r}")
        num, den = data["num"], data["den"]
        if not isinstance(num, int) or not isinstance(den, int) or den <= 0:
            raise FormatError(f"{where}: malformed rational {data!r}")
        return Fraction(num, den)
    if isinstance(data, bool) or not isinstance(data, (int, float)):
        raise FormatError(f"{where}: expected a number, got {data!r}")
    return float(data)


def _encode_tree(value, mode: str):
    """Recursive encoding for evidence payloads of mixed shape."""
    if isinstance(value, Fraction):
        return _encode_number(value, mode)
    if isinstance(value, dict):
        return {str(k): _encode_tree(v, mode) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode_tree(v, mode) for v in value]
    if isinstance(value, (set, frozenset)):
        return [_encode_tree(v, mode) for v in sorted(value)]
    return value


def _decode_tree(value):
    if isinstance(value, dict):
        if set(value) == {"num", "den"} and isinstance(value["num"], int) \
                and isinstance(value["den"], int):
            return Fraction(value["num"], value["den"])
        return {k: _decode_tree(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode_tree(v) for v in value]
    return value


# ----------------------------------------------------------- instances


def _instance_fields(instance: Instance) -> dict:
    mode = instance.mode
    data = {
        "points": list(instance.points),
        "classes": {cid: list(instance.classes[cid])
                    for cid in instance.sorted_classes()},
        "potentials": {p: _encode_number(instance.weight(p), mode)
                       for p in instance.points},
    }
    if instance.generators:
        data["generators"] = {name: dict(gamma) for name, gamma
                              in sorted(instance.generators.items())}
    return data


def _fields_to_instance(data, mode: str, label: str) -> Instance:
    _require(data, label, ("points", "classes", "potentials"))
    points = data["points"]
    if not isinstance(points, list) or \
            not all(isinstance(p, str) for p in points):
        raise FormatError(f"{label}: points must be an array of ids")
    classes = data["classes"]
    if not isinstance(classes, dict):
        raise FormatError(f"{label}: classes must be a mapping")
    declared = {p for members in classes.values() for p in members}
    if declared != set(points):
        raise FormatError(f"{label}: classes do not partition the "
                          f"declared points")
    potentials = data["potentials"]
    if not isinstance(potentials, dict):
        raise FormatError(f"{label}: potentials must be a mapping")
    weights = {}
    for p in points:
        if p not in potentials:
            raise FormatError(f"{label}: potential missing for {p!r}")
        value = _decode_number(potentials[p], f"{label} potential {p!r}")
        if mode == EXACT and not isinstance(value, Fraction):
            raise FormatError(f"{label}: exact mode needs num/den "
                              f"potentials, got {potentials[p]!r}")
        weights[p] = value
    generators = data.get("generators")
    if generators is not None and not isinstance(generators, dict):
        raise FormatError(f"{label}: generators must be a mapping")
    return build_instance(classes, weights, generators=generators, mode=mode)


def instance_to_data(instance: Instance) -> dict:
    data = {"version": FORMAT_VERSION, "mode": instance.mode}
    data.update(_instance_fields(instance))
    return data


def data_to_instance(data) -> Instance:
    _require(data, "instance file", ("version", "mode", "points",
                                     "classes", "potentials"))
    _check_version(data, "instance file")
    mode = data["mode"]
    if mode not in (EXACT, FLOAT):
        raise FormatError(f"unknown mode {mode!r}")
    return _fields_to_instance(data, mode, "instance file")


# -------------------------------------------------------------- towers


def tower_to_data(tower: Tower) -> dict:
    mode = tower.mode
    deepest = tower.levels[-1]
    section = {
        "levels": [_instance_fields(inst) for inst in tower.levels],
        "refinement": [dict(sorted(r.items())) for r in tower.refinements],
        "subrelations": [[list(b) for b in sub.blocks]
                         for sub in tower.subrelations],
        "algebras": [{name: sorted(members)
                      for name, members in sorted(table.items())}
                     for table in tower.algebras],
        "divergence": {cid: [_encode_number(v, mode) for v in schedule]
                       for cid, schedule in sorted(tower.divergence.items())},
        "boundary": [sorted(b) for b in tower.boundary],
        "defect_families": [{"name": fam.name,
                             "members": list(fam.members),
                             "union": fam.union}
                            for fam in tower.defect_families],
        "transversals": list(tower.transversals),
        "transversal_sets": [{name: sorted(members)
                              for name, members in sorted(table.items())}
                             for table in tower.transversal_sets],
        "z_like": sorted(tower.z_like),
    }
    data = {"version": FORMAT_VERSION, "mode": mode, "tower": section}
    data.update(_instance_fields(deepest))
    return data


def data_to_tower(data) -> Tower:
    _require(data, "tower file", ("version", "mode", "tower"))
    _check_version(data, "tower file")
    mode = data["mode"]
    if mode not in (EXACT, FLOAT):
        raise FormatError(f"unknown mode {mode!r}")
    section = data["tower"]
    _require(section, "tower section", ("levels", "refinement"))
    if not isinstance(section["levels"], list) or not section["levels"]:
        raise FormatError("tower section needs a nonempty level array")
    levels = [_fields_to_instance(obj, mode, f"tower level {n}")
              for n, obj in enumerate(section["levels"])]
    refinements = section["refinement"]
    if not isinstance(refinements, list):
        raise FormatError("tower refinement must be an array of maps")

    subrelations = None
    if "subrelations" in section:
        subrelations = [
            FiniteSubrelation.from_blocks(levels[n], blocks)
            for n, blocks in enumerate(section["subrelations"])]
    divergence = {}
    for cid, schedule in section.get("divergence", {}).items():
        decoded = [_decode_number(v, f"divergence for {cid!r}")
                   for v in schedule]
        if mode == EXACT and not all(isinstance(v, Fraction)
                                     for v in decoded):
            raise FormatError(f"divergence for {cid!r}: exact mode needs "
                              f"num/den entries")
        divergence[cid] = decoded
    families = []
    for obj in section.get("defect_families", []):
        _require(obj, "defect family", ("name", "members", "union"))
        families.append(DefectFamily(name=obj["name"],
                                     members=tuple(obj["members"]),
                                     union=obj["union"]))
    tower = build_tower(
        levels, refinements,
        subrelations=subrelations,
        algebras=section.get("algebras"),
        divergence=divergence,
        boundary=section.get("boundary"),
        defect_families=families,
        transversals=section.get("transversals", ()),
        transversal_sets=section.get("transversal_sets"),
        z_like=section.get("z_like", ()),
    )
    mirror = _fields_to_instance(data, mode, "tower file")
    deepest = tower.levels[-1]
    if mirror.points != deepest.points or \
            mirror.classes != deepest.classes:
        raise FormatError("tower file mirror differs from the deepest level")
    return tower


# ---------------------------------------------------------- round trip


def read_any(path):
    """Read an instance or tower file, dispatching on its fields."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path} is not canonical JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path} must hold an object")
    if "kind" in data:
        raise FormatError(f"{path} holds a certificate, not an instance")
    if "tower" in data:
        return data_to_tower(data)
    return data_to_instance(data)


def write_target(path, target) -> str:
    """Write an instance or tower file; returns the canonical text."""
    if isinstance(target, Tower):
        text = canonical_dumps(tower_to_data(target))
    elif isinstance(target, Instance):
        text = canonical_dumps(instance_to_data(target))
    else:
        raise ModelError(f"cannot serialize {type(target).__name__}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
    return text


# ---------------------------------------------------------- certificates


def _compression_fields(cert: CompressionCertificate, mode: str) -> dict:
    return {
        "mode": cert.mode,
        "map": dict(sorted(cert.mapping.items())),
        "F": ([list(b) for b in cert.subrelation.blocks]
              if cert.subrelation is not None else None),
        "bound": cert.bound,
        "strict_set": list(cert.strict_set),
        "scope": list(cert.scope),
        "frontier": list(cert.frontier),
        "evidence": _encode_tree(cert.evidence, mode),
        "boundaries": ({cid: list(v) for cid, v
                        in sorted(cert.boundaries.items())}
                       if cert.boundaries is not None else None),
        "mapped_members": list(cert.mapped_members),
    }


def _fields_to_compression(data, label: str) -> CompressionCertificate:
    _require(data, label, ("mode", "map", "bound", "strict_set"))
    blocks = data.get("F")
    sub = None
    if blocks is not None:
        sub = FiniteSubrelation(blocks=tuple(
            tuple(member for member in block) for block in blocks))
    boundaries = data.get("boundaries")
    return CompressionCertificate(
        mode=data["mode"],
        mapping=dict(data["map"]),
        subrelation=sub,
        scope=tuple(data.get("scope", ())),
        bound=data["bound"],
        strict_set=tuple(data["strict_set"]),
        frontier=tuple(data.get("frontier", ())),
        evidence=_decode_tree(data.get("evidence")),
        boundaries=({cid: tuple(v) for cid, v in boundaries.items()}
                    if boundaries is not None else None),
        mapped_members=tuple(data.get("mapped_members", ())),
    )


def certificate_to_data(cert, mode: str = EXACT) -> dict:
    """Encode any certificate kind; ``mode`` steers number encoding."""
    if isinstance(cert, MeasureCertificate):
        return {
            "version": FORMAT_VERSION,
            "kind": "measure",
            "weights": {p: _encode_number(v, mode)
                        for p, v in sorted(cert.weights.items())},
            "class_weights": {c: _encode_number(v, mode)
                              for c, v in sorted(cert.class_weights.items())},
        }
    if isinstance(cert, TowerMeasureCertificate):
        return {
            "version": FORMAT_VERSION,
            "kind": "tower-measure",
            "levels": [{p: _encode_number(v, mode)
                        for p, v in sorted(level.items())}
                       for level in cert.levels],
            "limits": {name: _encode_number(v, mode)
                       for name, v in sorted(cert.limits.items())},
            "class_weights": {c: _encode_number(v, mode)
                              for c, v in sorted(cert.class_weights.items())},
        }
    if isinstance(cert, CompressionCertificate):
        data = {"version": FORMAT_VERSION, "kind": "compression"}
        data.update(_compression_fields(cert, mode))
        return data
    if isinstance(cert, TowerCompressionCertificate):
        return {
            "version": FORMAT_VERSION,
            "kind": "tower-compression",
            "start_level": cert.start_level,
            "levels": [(_compression_fields(c, mode) if c is not None
                        else None) for c in cert.levels],
            "evidence": _encode_tree(cert.evidence, mode),
            "scope": list(cert.scope),
        }
    raise ModelError(f"cannot serialize {type(cert).__name__}")


def data_to_certificate(data):
    _require(data, "certificate file", ("version", "kind"))
    _check_version(data, "certificate file")
    kind = data["kind"]
    if kind == "measure":
        _require(data, "measure certificate", ("weights",))
        return MeasureCertificate(
            weights={p: _decode_number(v, f"mass at {p!r}")
                     for p, v in data["weights"].items()},
            class_weights={c: _decode_number(v, f"class weight {c!r}")
                           for c, v in data.get("class_weights", {}).items()})
    if kind == "tower-measure":
        _require(data, "tower measure certificate", ("levels",))
        return TowerMeasureCertificate(
            levels=tuple({p: _decode_number(v, f"mass at {p!r}")
                          for p, v in level.items()}
                         for level in data["levels"]),
            limits={name: _decode_number(v, f"limit of {name!r}")
                    for name, v in data.get("limits", {}).items()},
            class_weights={c: _decode_number(v, f"class weight {c!r}")
                           for c, v in data.get("class_weights", {}).items()})
    if kind == "compression":
        return _fields_to_compression(data, "compression certificate")
    if kind == "tower-compression":
        _require(data, "tower compression certificate",
                 ("start_level", "levels"))
        return TowerCompressionCertificate(
            start_level=data["start_level"],
            levels=tuple(
                (_fields_to_compression(obj, f"level {n} certificate")
                 if obj is not None else None)
                for n, obj in enumerate(data["levels"])),
            evidence=_decode_tree(data.get("evidence", {})),
            scope=tuple(data.get("scope", ())))
    raise FormatError(f"unknown certificate kind {kind!r}")


def read_certificate(path):
    try:
        with open(path, "r", encoding="ascii") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path} is not canonical JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path} must hold an object")
    return data_to_certificate(data)


def write_certificate(path, cert, mode: str = EXACT) -> str:
    text = canonical_dumps(certificate_to_data(cert, mode))
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
    return text


# -------------------------------------------------------------- colorings


def coloring_to_data(coloring: Coloring) -> dict:
    colors = dict(sorted(coloring.colors.items()))
    if not all(isinstance(c, int) for c in colors.values()):
        raise ModelError("colors must be integers")
    return {"version": FORMAT_VERSION, "kind": "coloring", "colors": colors}


def data_to_coloring(data) -> Coloring:
    _require(data, "coloring file", ("version", "kind", "colors"))
    _check_version(data, "coloring file")
    if data["kind"] != "coloring":
        raise FormatError(f"not a coloring file: kind {data['kind']!r}")
    colors = data["colors"]
    if not isinstance(colors, dict) or \
            not all(isinstance(c, int) and not isinstance(c, bool)
                    for c in colors.values()):
        raise FormatError("coloring colors must map points to integers")
    return Coloring(colors=dict(colors))
