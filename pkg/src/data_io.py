"""File formats: point-cloud and matrix CSV, edge lists and barcodes.

Matrices are written with 17 significant digits so they read back bit-exact.
"""

import csv
import math
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .errors import MalformedInput
from .graph_construction import from_edge_list
from .schemas import Barcode, NeighbourhoodGraph, PointCloud

FLOAT_FORMAT = "%.17g"
INTRINSIC_PREFIX = "intrinsic_"


def _parse_float(text: str, line: int, column: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedInput(f"not a number: {text!r}", line, column) from None
    if not math.isfinite(value):
        raise MalformedInput(f"non-finite value: {text!r}", line, column)
    return value


def _read_numeric_csv(path: Path) -> Tuple[List[str], np.ndarray]:
    """Header row plus a dense float matrix, with line/column diagnostics."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise MalformedInput(f"cannot open {path}: {e}") from e

    with handle:
        reader = csv.reader(handle)
        header: Optional[List[str]] = None
        rows: List[List[float]] = []
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if header is None:
                header = [cell.strip() for cell in row]
                continue
            if len(row) != len(header):
                raise MalformedInput(
                    f"expected {len(header)} fields, found {len(row)}", line, min(len(row), len(header)) + 1
                )
            rows.append([_parse_float(cell.strip(), line, col + 1) for col, cell in enumerate(row)])

    if header is None or not rows:
        raise MalformedInput(f"{path} has no data rows")
    return header, np.array(rows, dtype=np.float64)


def read_pointcloud_csv(path: Path) -> PointCloud:
    """Read points; columns prefixed ``intrinsic_`` become intrinsic coordinates."""
    header, values = _read_numeric_csv(Path(path))
    intrinsic = [i for i, name in enumerate(header) if name.startswith(INTRINSIC_PREFIX)]
    ambient = [i for i in range(len(header)) if i not in intrinsic]
    if not ambient:
        raise MalformedInput(f"{path} has no coordinate columns", 1)
    coords = values[:, intrinsic] if intrinsic else None
    cloud = PointCloud(values[:, ambient], coords)
    logger.info(f"Read {cloud.n_points} points in R^{cloud.dim} from {path}")
    return cloud


def write_pointcloud_csv(path: Path, cloud: PointCloud) -> None:
    header = [f"x{i}" for i in range(cloud.dim)]
    data = cloud.points
    if cloud.intrinsic_coords is not None:
        header += [f"{INTRINSIC_PREFIX}{i}" for i in range(cloud.intrinsic_coords.shape[1])]
        data = np.hstack([data, cloud.intrinsic_coords])
    _savetxt(Path(path), data, header)


def _savetxt(path: Path, data: np.ndarray, header: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(header), comments="", newline="\n", encoding="utf-8")


def write_matrix_csv(path: Path, matrix: np.ndarray, header: Optional[Sequence[str]] = None) -> None:
    """Write a 2-D array as CSV with a header row (``c0, c1, ...`` by default)."""
    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    names = list(header) if header is not None else [f"c{i}" for i in range(array.shape[1])]
    _savetxt(Path(path), array, names)


def read_matrix_csv(path: Path) -> np.ndarray:
    _, values = _read_numeric_csv(Path(path))
    return values


def read_edgelist(path: Path, n_nodes: Optional[int] = None) -> NeighbourhoodGraph:
    """Read ``i j [weight]`` records (0-based, whitespace separated).

    Lines starting with ``#`` are comments; a ``# n_nodes=N`` comment sets the
    node count, otherwise it is the largest index plus one.
    """
    path = Path(path)
    edges: List[Tuple[Any, ...]] = []
    declared: Optional[int] = None
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise MalformedInput(f"cannot open {path}: {e}") from e

    for number, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            comment = text.lstrip("#").strip()
            if comment.startswith("n_nodes="):
                try:
                    declared = int(comment.split("=", 1)[1])
                except ValueError:
                    raise MalformedInput(f"bad node count: {comment!r}", number) from None
            continue
        fields = text.split()
        if len(fields) not in (2, 3):
            raise MalformedInput(f"expected 'i j [weight]', found {len(fields)} fields", number)
        record: List[Any] = []
        for col, field in enumerate(fields[:2], start=1):
            try:
                record.append(int(field))
            except ValueError:
                raise MalformedInput(f"node index is not an integer: {field!r}", number, col) from None
        if len(fields) == 3:
            record.append(_parse_float(fields[2], number, 3))
        edges.append(tuple(record))

    count = n_nodes or declared
    if count is None:
        if not edges:
            raise MalformedInput(f"{path} has no edges and no '# n_nodes=' header")
        count = max(max(e[0], e[1]) for e in edges) + 1
    graph = from_edge_list(count, edges)
    logger.info(f"Read graph with {graph.n_nodes} nodes and {graph.n_edges} edges from {path}")
    return graph


def write_edgelist(path: Path, graph: NeighbourhoodGraph) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# n_nodes={graph.n_nodes}\n")
        for idx, (i, j) in enumerate(graph.edges):
            if graph.weighted:
                f.write(f"{i} {j} {graph.weights[idx]:.17g}\n")
            else:
                f.write(f"{i} {j}\n")


def write_barcode(path: Path, barcode: Barcode) -> None:
    """CSV rows ``dim,birth,death`` with ``inf`` for essential classes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["dim", "birth", "death"])
        for interval in barcode.intervals:
            death = "inf" if interval.is_infinite else f"{interval.death:.17g}"
            writer.writerow([interval.dim, f"{interval.birth:.17g}", death])


def read_barcode(path: Path, max_dim: Optional[int] = None) -> Barcode:
    path = Path(path)
    intervals = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        next(reader, None)
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise MalformedInput("expected dim,birth,death", reader.line_num)
            try:
                dim = int(row[0])
            except ValueError:
                raise MalformedInput(f"bad dimension {row[0]!r}", reader.line_num, 1) from None
            birth = _parse_float(row[1], reader.line_num, 2)
            death = math.inf if row[2].strip() == "inf" else _parse_float(row[2], reader.line_num, 3)
            intervals.append((dim, birth, death))
    top = max([i[0] for i in intervals], default=0)
    return Barcode(tuple(intervals), max_dim=top if max_dim is None else max(top, max_dim))

