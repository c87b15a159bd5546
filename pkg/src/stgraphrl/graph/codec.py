"""Line-oriented text codec for mobility graphs.

Layout::

    STGRAPH 1 <user_id> <C_s> <C_t>
    N <index> <location_key> <category>
    E <src> <dst> <bin_dep> <bin_arr> <frequency> <distance_m> <duration_min>
    END <node_count> <edge_count>

The END trailer is optional. When present its counts must match the records
read; without it, a payload whose last line lacks its newline is rejected as
truncated. User ids are percent-encoded. Reals carry 17 significant digits so
a round trip is bit-exact. Normalized weights are not stored; they are recomputed.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from pathlib import Path
from urllib.parse import quote, unquote

from stgraphrl.domain.models import GraphEdge, GraphNode, MobilityGraph
from stgraphrl.graph.build import normalized_weight_triples

logger = logging.getLogger(__name__)

GRAPH_MAGIC = "STGRAPH"
GRAPH_VERSION = "1"
GRAPH_SUFFIX = ".stg"


class GraphFormatError(ValueError):
    pass


def format_real(value: float) -> str:
    return format(value, ".17g")


def serialize_graph(graph: MobilityGraph) -> bytes:
    lines = [
        f"{GRAPH_MAGIC} {GRAPH_VERSION} {quote(graph.user_id, safe='')} "
        f"{graph.num_categories} {graph.num_bins}"
    ]
    lines.extend(f"N {node.node_index} {node.location_key} {node.category}" for node in graph.nodes)
    lines.extend(
        f"E {edge.src} {edge.dst} {edge.departure_bin} {edge.arrival_bin} {edge.frequency} "
        f"{format_real(edge.distance_m)} {format_real(edge.duration_min)}"
        for edge in graph.edges
    )
    lines.append(f"END {len(graph.nodes)} {len(graph.edges)}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _field_int(parts: Sequence[str], position: int, name: str, line: int) -> int:
    try:
        return int(parts[position])
    except (IndexError, ValueError) as error:
        raise GraphFormatError(f"line {line}: bad or missing field {name!r}") from error


def _field_real(parts: Sequence[str], position: int, name: str, line: int) -> float:
    try:
        value = float(parts[position])
    except (IndexError, ValueError) as error:
        raise GraphFormatError(f"line {line}: bad or missing field {name!r}") from error
    if not math.isfinite(value):
        raise GraphFormatError(f"line {line}: field {name!r} is not finite")
    return value


def deserialize_graph(payload: bytes) -> MobilityGraph:
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as error:
        raise GraphFormatError("graph file is not valid UTF-8") from error
    rows = [line.split() for line in text.splitlines()]
    if rows and not text.endswith("\n") and rows[-1][:1] != ["END"]:
        raise GraphFormatError("graph file is truncated: last line is incomplete")
    if not rows or not rows[0]:
        raise GraphFormatError("line 1: missing header")

    header = rows[0]
    if len(header) != 5 or header[0] != GRAPH_MAGIC:
        raise GraphFormatError("line 1: bad field 'header'")
    if header[1] != GRAPH_VERSION:
        raise GraphFormatError(f"line 1: unsupported field 'version' {header[1]!r}")
    user_id = unquote(header[2])
    num_categories = _field_int(header, 3, "num_categories", 1)
    num_bins = _field_int(header, 4, "num_bins", 1)

    nodes: list[GraphNode] = []
    edges: list[GraphEdge] = []
    trailer: tuple[int, int] | None = None
    for line, parts in enumerate(rows[1:], start=2):
        if not parts:
            continue
        if trailer is not None:
            raise GraphFormatError(f"line {line}: content after 'END'")
        kind = parts[0]
        if kind == "N":
            if edges:
                raise GraphFormatError(f"line {line}: node record after edge records")
            if len(parts) != 4:
                raise GraphFormatError(f"line {line}: node record needs 4 fields")
            index = _field_int(parts, 1, "index", line)
            if index != len(nodes):
                raise GraphFormatError(f"line {line}: field 'index' out of sequence")
            category = _field_int(parts, 3, "category", line)
            if not 0 <= category < num_categories:
                raise GraphFormatError(f"line {line}: field 'category' outside [0, {num_categories})")
            nodes.append(GraphNode(node_index=index, location_key=parts[2], category=category))
        elif kind == "E":
            if len(parts) != 8:
                raise GraphFormatError(f"line {line}: edge record needs 8 fields")
            src = _field_int(parts, 1, "src", line)
            dst = _field_int(parts, 2, "dst", line)
            departure = _field_int(parts, 3, "bin_dep", line)
            arrival = _field_int(parts, 4, "bin_arr", line)
            if not 0 <= departure <= arrival < num_bins:
                raise GraphFormatError(f"line {line}: fields 'bin_dep'/'bin_arr' out of order or range")
            try:
                edges.append(
                    GraphEdge(
                        src=src,
                        dst=dst,
                        departure_bin=departure,
                        arrival_bin=arrival,
                        frequency=_field_int(parts, 5, "frequency", line),
                        distance_m=_field_real(parts, 6, "distance_m", line),
                        duration_min=_field_real(parts, 7, "duration_min", line),
                    )
                )
            except ValueError as error:
                if isinstance(error, GraphFormatError):
                    raise
                raise GraphFormatError(f"line {line}: {error}") from error
        elif kind == "END":
            trailer = (_field_int(parts, 1, "node_count", line), _field_int(parts, 2, "edge_count", line))
        else:
            raise GraphFormatError(f"line {line}: unknown record type {kind!r}")

    if trailer is not None and trailer != (len(nodes), len(edges)):
        raise GraphFormatError("field 'END' counts disagree with the records read")
    try:
        return MobilityGraph(
            user_id=user_id,
            num_categories=num_categories,
            num_bins=num_bins,
            nodes=tuple(nodes),
            edges=tuple(edges),
            normalized_weights=normalized_weight_triples(edges) if edges else (),
        )
    except ValueError as error:
        raise GraphFormatError(str(error)) from error


def graph_file_name(user_id: str) -> str:
    return quote(user_id, safe="").replace(".", "%2E") + GRAPH_SUFFIX


def write_graph_dir(graphs: Sequence[MobilityGraph], directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for graph in graphs:
        path = directory / graph_file_name(graph.user_id)
        path.write_bytes(serialize_graph(graph))
        written.append(path)
    logger.info("Wrote graph files", extra={"graphs": len(written), "directory": str(directory)})
    return written


def read_graph_dir(directory: Path) -> list[MobilityGraph]:
    if not directory.is_dir():
        raise GraphFormatError(f"graph directory not found: {directory}")
    graphs = []
    for path in sorted(directory.glob(f"*{GRAPH_SUFFIX}")):
        try:
            graphs.append(deserialize_graph(path.read_bytes()))
        except GraphFormatError as error:
            raise GraphFormatError(f"{path.name}: {error}") from error
    return graphs
