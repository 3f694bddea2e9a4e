"""Run reports and the level-measure summary renderer.

A RunReport is the machine-readable trace of one CLI invocation:
command, input digest, certificate kind, verification outcome, timing,
and any inconclusive reasons.  Timing goes to stdout only; files
written to disk never contain it, keeping reruns byte-identical.

The summary path turns an instance or tower into a small table of
exact values: named-set measures per level and their declared limits
when a measure certificate exists, class masses and divergence
schedules when the instance compresses instead.  The table renders
three ways: aligned plain text, delimited CSV with exact rational
strings, and a PNG figure plotting the same series against level.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

from cclab.core import EXACT, Instance
from cclab.measures import dichotomy_solve
from cclab.tower import Tower

REPORT_SCHEMA = 1


@dataclass
class RunReport:
    command: str
    input_digest: str
    certificate_kind: str | None
    verification: str
    timing_s: float
    reasons: tuple[str, ...] = ()
    schema: int = REPORT_SCHEMA

    def to_json(self, with_timing: bool = True) -> str:
        data = {
            "schema": self.schema,
            "command": self.command,
            "input_digest": self.input_digest,
            "certificate_kind": self.certificate_kind,
            "verification": self.verification,
            "reasons": list(self.reasons),
        }
        if with_timing:
            data["timing_s"] = round(self.timing_s, 6)
        return json.dumps(data, sort_keys=True)


@dataclass
class SummaryTable:
    """Rows of (level, series, label, value) with exact value strings."""

    name: str
    status: str
    mode: str
    rows: list[tuple[int, str, str, object]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _value_str(value) -> str:
    if isinstance(value, Fraction):
        return str(value)
    return repr(float(value))


def summarize(target, name: str, result=None) -> SummaryTable:
    """Build the level-measure table for one instance or tower."""
    if result is None:
        result = dichotomy_solve(target)
    mode = target.mode
    table = SummaryTable(name=name, status=result.status, mode=mode)
    table.notes.extend(result.reasons)

    if isinstance(target, Instance):
        for cid in target.sorted_classes():
            table.rows.append((0, "class-mass", cid, target.class_mass(cid)))
        if result.status == "measure":
            for p, mass in sorted(result.certificate.weights.items()):
                table.rows.append((0, "point-measure", p, mass))
        return table

    tower: Tower = target
    for n, inst in enumerate(tower.levels):
        for cid in inst.sorted_classes():
            table.rows.append((n, "class-mass", cid, inst.class_mass(cid)))
    for cid, schedule in sorted(tower.divergence.items()):
        for n in range(tower.level_count()):
            table.rows.append((n, "divergence", cid, schedule[n]))
    if result.status == "measure":
        cert = result.certificate
        for n in range(tower.level_count()):
            weights = cert.levels[n]
            for set_name in sorted(tower.algebras[n]):
                members = tower.set_at(n, set_name)
                mass = sum((weights.get(p, Fraction(0)) for p in members),
                           Fraction(0) if mode == EXACT else 0.0)
                table.rows.append((n, "set-measure", set_name, mass))
        for set_name, value in sorted(cert.limits.items()):
            table.rows.append((tower.level_count() - 1, "declared-limit",
                               set_name, value))
    if result.status == "compression":
        cert = result.certificate
        table.notes.append(f"compression evidence: "
                           f"{cert.evidence.get('kind', 'unknown')}")
        table.notes.append(f"certified from level {cert.start_level}")
    return table


def render_text(table: SummaryTable) -> str:
    lines = [f"input: {table.name}",
             f"status: {table.status}",
             f"mode: {table.mode}"]
    for note in table.notes:
        lines.append(f"note: {note}")
    if table.rows:
        width = max(len(series) + len(label) + 1
                    for _, series, label, _ in table.rows)
        lines.append("level  series/label" + " " * max(1, width - 12)
                     + "value")
        for level, series, label, value in table.rows:
            key = f"{series}/{label}"
            lines.append(f"{level:<5}  {key:<{width + 2}}"
                         f"{_value_str(value)}")
    return "\n".join(lines) + "\n"


def render_csv(table: SummaryTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["input", "level", "series", "label", "value"])
    for level, series, label, value in table.rows:
        writer.writerow([table.name, level, series, label,
                         _value_str(value)])
    return out.getvalue()


def render_figure(table: SummaryTable, path) -> None:
    """Plot every series with multiple levels; bars when nothing moves.

    The figure is written with fixed size, resolution, and metadata so
    rerunning the same report yields byte-identical bytes.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for level, series, label, value in table.rows:
        groups.setdefault((series, label), []).append((level, float(value)))

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    lines = {key: pts for key, pts in groups.items() if len(pts) > 1}
    if lines:
        for (series, label), pts in sorted(lines.items()):
            pts = sorted(pts)
            ax.plot([x for x, _ in pts], [y for _, y in pts],
                    marker="o", label=f"{series}/{label}")
        ax.set_xlabel("level")
        ax.set_ylabel("mass")
        if len(lines) <= 12:
            ax.legend(loc="best", fontsize=8)
    else:
        keys = sorted(groups)
        values = [groups[k][0][1] for k in keys]
        ax.bar(range(len(keys)), values)
        ax.set_xticks(range(len(keys)))
        ax.set_xticklabels([f"{s}/{l}" for s, l in keys], rotation=60,
                           fontsize=7, ha="right")
        ax.set_ylabel("mass")
    ax.set_title(f"{table.name}: {table.status}")
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": "cclab"})
    plt.close(fig)
