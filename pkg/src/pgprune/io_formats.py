"""Plain-text pose-graph files and report export.

The graph format follows the common SE(2) text convention:

    VERTEX_SE2 id x y theta
    EDGE_SE2 i j dx dy dtheta i11 i12 i13 i22 i23 i33
    FIX id

Edge kind is inferred as odometry when j = i + 1; a ``# KIND:LOOP`` or
``# KIND:ODOM`` comment line immediately before an edge overrides the
inference, and ``# PROV:CORRUPTED`` marks synthetic corruption so Monte
Carlo runs can be checkpointed. Third-party readers skip the comments.
Floats are printed with 17 significant digits, so a serialize/parse round
trip is exact at printed precision.
"""

from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field, fields

from .geometry import Pose2
from .graph import Edge, EdgeKind, GraphError, PoseGraph, Provenance, validate_information


class GraphFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize_graph(g: PoseGraph) -> str:
    """Render a graph; vertices ascending by id, then edges by (from, to)."""
    out = io.StringIO()
    for vid in sorted(g.vertices):
        p = g.vertices[vid].pose
        out.write(f"VERTEX_SE2 {vid} {_fmt(p.x)} {_fmt(p.y)} {_fmt(p.theta)}\n")
    if g.gauge_id is not None:
        out.write(f"FIX {g.gauge_id}\n")
    for e in sorted(g.edges.values(), key=lambda e: (e.from_id, e.to_id, e.eid)):
        if e.kind is EdgeKind.LOOP_CLOSURE:
            out.write("# KIND:LOOP\n")
        elif e.to_id != e.from_id + 1:
            out.write("# KIND:ODOM\n")
        if e.provenance is Provenance.CORRUPTED:
            out.write("# PROV:CORRUPTED\n")
        m = e.measurement
        i = e.info
        entries = (i[0, 0], i[0, 1], i[0, 2], i[1, 1], i[1, 2], i[2, 2])
        out.write(
            f"EDGE_SE2 {e.from_id} {e.to_id} {_fmt(m.x)} {_fmt(m.y)} {_fmt(m.theta)} "
            + " ".join(_fmt(v) for v in entries)
            + "\n"
        )
    return out.getvalue()


def parse_graph(text: str) -> PoseGraph:
    """Parse the text format; malformed input raises with a line number.

    Unknown record types are skipped with a single summary warning.
    """
    g = PoseGraph()
    pending_edges: list[tuple[int, Edge]] = []  # validate endpoints after all vertices
    pending_kind: EdgeKind | None = None
    pending_prov: Provenance | None = None
    unknown = 0
    gauge: tuple[int, int] | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tag = line[1:].strip().upper()
            if tag == "KIND:LOOP":
                pending_kind = EdgeKind.LOOP_CLOSURE
            elif tag == "KIND:ODOM":
                pending_kind = EdgeKind.ODOMETRY
            elif tag == "PROV:CORRUPTED":
                pending_prov = Provenance.CORRUPTED
            elif tag == "PROV:GENUINE":
                pending_prov = Provenance.GENUINE
            continue
        tokens = line.split()
        kind = tokens[0]
        try:
            if kind == "VERTEX_SE2":
                if len(tokens) != 5:
                    raise GraphFormatError("VERTEX_SE2 needs 4 fields", lineno)
                vid = int(tokens[1])
                x, y, th = (float(t) for t in tokens[2:5])
                g.add_vertex(vid, Pose2(x, y, th))
            elif kind == "EDGE_SE2":
                if len(tokens) != 12:
                    raise GraphFormatError("EDGE_SE2 needs 11 fields", lineno)
                i, j = int(tokens[1]), int(tokens[2])
                dx, dy, dth = (float(t) for t in tokens[3:6])
                u = [float(t) for t in tokens[6:12]]
                info = [
                    [u[0], u[1], u[2]],
                    [u[1], u[3], u[4]],
                    [u[2], u[4], u[5]],
                ]
                try:
                    info = validate_information(info)
                except GraphError as exc:
                    raise GraphFormatError(str(exc), lineno) from None
                ekind = pending_kind
                if ekind is None:
                    ekind = EdgeKind.ODOMETRY if j == i + 1 else EdgeKind.LOOP_CLOSURE
                edge = Edge(
                    from_id=i,
                    to_id=j,
                    measurement=Pose2(dx, dy, dth),
                    info=info,
                    kind=ekind,
                    provenance=pending_prov or Provenance.GENUINE,
                )
                pending_edges.append((lineno, edge))
                pending_kind = None
                pending_prov = None
            elif kind == "FIX":
                gauge = (lineno, int(tokens[1]))
            else:
                unknown += 1
        except ValueError as exc:
            if isinstance(exc, GraphFormatError):
                raise
            raise GraphFormatError(f"malformed numeric field ({exc})", lineno) from None

    for lineno, edge in pending_edges:
        try:
            g.add_edge(edge)
        except GraphError as exc:
            raise GraphFormatError(str(exc), lineno) from None
    if gauge is not None:
        lineno, gid = gauge
        if gid not in g.vertices:
            raise GraphFormatError(f"FIX references unknown vertex {gid}", lineno)
        g.gauge_id = gid
    if unknown:
        warnings.warn(f"skipped {unknown} unknown record(s) while parsing graph")
    return g


def load_graph(path) -> PoseGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


def save_graph(g: PoseGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_graph(g))


def serialize_ground_truth(gt: dict[int, Pose2]) -> str:
    """Ground-truth sidecar: vertex records only."""
    return "".join(
        f"VERTEX_SE2 {vid} {_fmt(p.x)} {_fmt(p.y)} {_fmt(p.theta)}\n"
        for vid, p in sorted(gt.items())
    )


def parse_ground_truth(text: str) -> dict[int, Pose2]:
    g = parse_graph(text)
    return {vid: v.pose for vid, v in g.vertices.items()}


# -- run reports -----------------------------------------------------------------


@dataclass
class RunRecord:
    """One evaluated run: configuration, errors, sizes, and timings."""

    config: str
    seed: int
    fraction: float
    method: str
    te_trans_mean: float | None = None
    te_trans_sd: float | None = None
    te_rot_mean: float | None = None
    te_rot_sd: float | None = None
    me_trans_mean: float | None = None
    me_trans_sd: float | None = None
    me_rot_mean: float | None = None
    me_rot_sd: float | None = None
    rme_trans_mean: float | None = None
    rme_trans_sd: float | None = None
    rme_rot_mean: float | None = None
    rme_rot_sd: float | None = None
    n_vertices: int = 0
    n_edges: int = 0
    corrupted_before: int = 0
    corrupted_after: int = 0
    prune_seconds: float = 0.0
    optimize_seconds: float = 0.0


@dataclass
class RunReport:
    records: list[RunRecord] = field(default_factory=list)


_RUN_FIELDS = [f.name for f in fields(RunRecord)]


def export_report(report: RunReport, format: str = "csv") -> str:
    """Render a report as csv (with header) or json-lines, stable field order."""
    if format == "csv":
        lines = [",".join(_RUN_FIELDS)]
        for rec in report.records:
            row = []
            for name in _RUN_FIELDS:
                val = getattr(rec, name)
                if val is None:
                    row.append("")
                elif isinstance(val, float):
                    row.append(_fmt(val))
                else:
                    row.append(str(val))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"
    if format == "json-lines":
        out = []
        for rec in report.records:
            obj = {name: getattr(rec, name) for name in _RUN_FIELDS}
            out.append(json.dumps(obj, sort_keys=False))
        return "\n".join(out) + ("\n" if out else "")
    raise ValueError(f"unknown report format {format!r}")


def parse_report_csv(text: str) -> RunReport:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return RunReport()
    header = lines[0].split(",")
    if header != _RUN_FIELDS:
        raise GraphFormatError("unexpected report header", 1)
    types = {f.name: f.type for f in fields(RunRecord)}
    report = RunReport()
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(_RUN_FIELDS):
            raise GraphFormatError("wrong cell count", lineno)
        kwargs = {}
        for name, cell in zip(_RUN_FIELDS, cells):
            t = types[name]
            if cell == "":
                kwargs[name] = None
            elif "int" in str(t):
                kwargs[name] = int(cell)
            elif "float" in str(t):
                kwargs[name] = float(cell)
            else:
                kwargs[name] = cell
        report.records.append(RunRecord(**kwargs))
    return report
