"""PLY serialization of scan clouds and triangle meshes.

Scan clouds store 32-bit coordinates plus optional per-point channels
(flow, part label, scanner id, pulse time, surface anchor: triangle id
and barycentric coordinates, sample index).  Meshes store double
precision vertices and triangle faces.  Both binary-little-endian and
ASCII encodings are supported; binary is the default.

Byte-level schema (scan cloud): ``x,y,z`` float32; ``flow_x,flow_y,
flow_z`` float32; ``label`` uint16; ``lidar_id`` uint8; ``time``
float32; ``tri_id`` int32; ``bary_u,bary_v`` float64; ``index`` int32.
Unknown properties are preserved on read (in ``extras``) and dropped on
write with a warning.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class PlyParseError(ValueError):
    """Malformed PLY input; message carries the offending line number."""


_TYPE_TO_DTYPE = {
    "char": "<i1",
    "int8": "<i1",
    "uchar": "<u1",
    "uint8": "<u1",
    "short": "<i2",
    "int16": "<i2",
    "ushort": "<u2",
    "uint16": "<u2",
    "int": "<i4",
    "int32": "<i4",
    "uint": "<u4",
    "uint32": "<u4",
    "float": "<f4",
    "float32": "<f4",
    "double": "<f8",
    "float64": "<f8",
}

# Scan-cloud schema: property name -> PLY type, in canonical write order.
_CLOUD_SCHEMA = (
    ("x", "float"),
    ("y", "float"),
    ("z", "float"),
    ("flow_x", "float"),
    ("flow_y", "float"),
    ("flow_z", "float"),
    ("label", "ushort"),
    ("lidar_id", "uchar"),
    ("time", "float"),
    ("tri_id", "int"),
    ("bary_u", "double"),
    ("bary_v", "double"),
    ("index", "int"),
)
_CLOUD_TYPES = dict(_CLOUD_SCHEMA)


@dataclass
class CloudRecord:
    """Decoded contents of one scan-cloud PLY file.

    Arrays are per point; absent channels are None.  ``extras`` holds
    any property outside the documented schema.
    """

    points: np.ndarray
    flow: np.ndarray | None = None
    labels: np.ndarray | None = None
    lidar_ids: np.ndarray | None = None
    times: np.ndarray | None = None
    triangle_ids: np.ndarray | None = None
    barycentric: np.ndarray | None = None
    indices: np.ndarray | None = None
    comments: tuple[str, ...] = ()
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class _Element:
    name: str
    count: int
    properties: list[tuple[str, str]]
    is_face_list: bool = False


def _parse_header(
    data: bytes, path: Path
) -> tuple[str, list[_Element], int, tuple[str, ...]]:
    """Header -> (encoding, elements, body offset, comments).

    Raises with line numbers.
    """
    offset = 0
    line_no = 0
    encoding = None
    elements: list[_Element] = []
    comments: list[str] = []

    def next_line() -> str:
        nonlocal offset, line_no
        end = data.find(b"\n", offset)
        if end < 0:
            raise PlyParseError(
                f"{path}: line {line_no + 1}: header ends before end_header"
            )
        raw = data[offset:end]
        offset = end + 1
        line_no += 1
        try:
            return raw.decode("ascii").strip()
        except UnicodeDecodeError as exc:
            raise PlyParseError(
                f"{path}: line {line_no}: non-ASCII bytes in header"
            ) from exc

    if next_line() != "ply":
        raise PlyParseError(f"{path}: line 1: missing 'ply' magic")
    while True:
        line = next_line()
        if line == "end_header":
            break
        if line.startswith("comment"):
            comments.append(line[len("comment") :].strip())
            continue
        if not line or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if len(parts) != 3 or parts[2] != "1.0":
                raise PlyParseError(
                    f"{path}: line {line_no}: unsupported format line {line!r}"
                )
            if parts[1] not in ("ascii", "binary_little_endian"):
                raise PlyParseError(
                    f"{path}: line {line_no}: unsupported encoding {parts[1]!r}"
                )
            encoding = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3:
                raise PlyParseError(
                    f"{path}: line {line_no}: malformed element line {line!r}"
                )
            try:
                count = int(parts[2])
            except ValueError as exc:
                raise PlyParseError(
                    f"{path}: line {line_no}: element count {parts[2]!r} "
                    "is not an integer"
                ) from exc
            if count < 0:
                raise PlyParseError(
                    f"{path}: line {line_no}: negative element count {count}"
                )
            elements.append(_Element(parts[1], count, []))
        elif parts[0] == "property":
            if not elements:
                raise PlyParseError(
                    f"{path}: line {line_no}: property before any element"
                )
            if parts[1] == "list":
                if len(parts) != 5:
                    raise PlyParseError(
                        f"{path}: line {line_no}: malformed list property "
                        f"{line!r}"
                    )
                count_type, item_type, name = parts[2], parts[3], parts[4]
                if count_type not in _TYPE_TO_DTYPE or item_type not in _TYPE_TO_DTYPE:
                    raise PlyParseError(
                        f"{path}: line {line_no}: unknown list types in {line!r}"
                    )
                elements[-1].properties.append((name, f"list:{count_type}:{item_type}"))
                elements[-1].is_face_list = True
            else:
                if len(parts) != 3:
                    raise PlyParseError(
                        f"{path}: line {line_no}: malformed property {line!r}"
                    )
                if parts[1] not in _TYPE_TO_DTYPE:
                    raise PlyParseError(
                        f"{path}: line {line_no}: unknown type {parts[1]!r}"
                    )
                elements[-1].properties.append((parts[2], parts[1]))
        else:
            raise PlyParseError(
                f"{path}: line {line_no}: unrecognized header line {line!r}"
            )
    if encoding is None:
        raise PlyParseError(f"{path}: header has no format line")
    return encoding, elements, offset, tuple(comments)


def _read_scalar_element(
    data: bytes,
    offset: int,
    element: _Element,
    encoding: str,
    path: Path,
) -> tuple[dict[str, np.ndarray], int]:
    """Decode one all-scalar element; returns columns and the new offset."""
    dtype = np.dtype(
        [(name, _TYPE_TO_DTYPE[t]) for name, t in element.properties]
    )
    if encoding == "binary_little_endian":
        needed = element.count * dtype.itemsize
        if len(data) - offset < needed:
            raise PlyParseError(
                f"{path}: element {element.name!r} declares {element.count} "
                f"rows ({needed} bytes) but only "
                f"{len(data) - offset} bytes remain"
            )
        table = np.frombuffer(data, dtype=dtype, count=element.count, offset=offset)
        offset += needed
    else:
        rows = []
        text_offset = offset
        for row in range(element.count):
            end = data.find(b"\n", text_offset)
            if end < 0:
                raise PlyParseError(
                    f"{path}: element {element.name!r} declares "
                    f"{element.count} rows but the file ends after {row}"
                )
            tokens = data[text_offset:end].split()
            if len(tokens) != len(element.properties):
                raise PlyParseError(
                    f"{path}: element {element.name!r} row {row}: expected "
                    f"{len(element.properties)} values, found {len(tokens)}"
                )
            rows.append(tokens)
            text_offset = end + 1
        table = np.zeros(element.count, dtype=dtype)
        if rows:
            grid = np.asarray(rows)
            for col, (name, _) in enumerate(element.properties):
                table[name] = grid[:, col].astype(dtype[name])
        offset = text_offset
    return {name: np.array(table[name]) for name, _ in element.properties}, offset


def _read_face_element(
    data: bytes,
    offset: int,
    element: _Element,
    encoding: str,
    path: Path,
) -> tuple[np.ndarray, int]:
    """Decode a triangle-list element into an (T, 3) index array."""
    prop = element.properties[0][1]
    _, count_type, item_type = prop.split(":")
    count_dtype = np.dtype(_TYPE_TO_DTYPE[count_type])
    item_dtype = np.dtype(_TYPE_TO_DTYPE[item_type])
    if encoding == "binary_little_endian":
        row_dtype = np.dtype([("n", count_dtype), ("v", item_dtype, (3,))])
        needed = element.count * row_dtype.itemsize
        if len(data) - offset < needed:
            raise PlyParseError(
                f"{path}: element {element.name!r} declares {element.count} "
                f"rows ({needed} bytes) but only "
                f"{len(data) - offset} bytes remain"
            )
        table = np.frombuffer(data, dtype=row_dtype, count=element.count, offset=offset)
        if element.count and not (table["n"] == 3).all():
            raise PlyParseError(
                f"{path}: only triangle faces are supported"
            )
        return np.array(table["v"], dtype=np.int64), offset + needed
    rows = []
    text_offset = offset
    for row in range(element.count):
        end = data.find(b"\n", text_offset)
        if end < 0:
            raise PlyParseError(
                f"{path}: element {element.name!r} declares {element.count} "
                f"rows but the file ends after {row}"
            )
        tokens = data[text_offset:end].split()
        if len(tokens) != 4 or tokens[0] != b"3":
            raise PlyParseError(
                f"{path}: element {element.name!r} row {row}: expected a "
                "3-vertex face"
            )
        rows.append([int(t) for t in tokens[1:]])
        text_offset = end + 1
    faces = np.asarray(rows, dtype=np.int64).reshape(element.count, 3)
    return faces, text_offset


def read_cloud(path: str | Path) -> CloudRecord:
    """Read a scan-cloud PLY file.

    Properties outside the documented schema land in ``extras`` with
    their native dtypes.
    """
    path = Path(path)
    data = path.read_bytes()
    encoding, elements, offset, comments = _parse_header(data, path)
    vertex = next((e for e in elements if e.name == "vertex"), None)
    if vertex is None:
        raise PlyParseError(f"{path}: no vertex element")
    if vertex.is_face_list:
        raise PlyParseError(f"{path}: vertex element may not hold lists")
    columns: dict[str, np.ndarray] = {}
    for element in elements:
        if element.name == "vertex":
            columns, offset = _read_scalar_element(
                data, offset, element, encoding, path
            )
        elif element.is_face_list:
            _, offset = _read_face_element(data, offset, element, encoding, path)
        else:
            _, offset = _read_scalar_element(data, offset, element, encoding, path)

    for coord in ("x", "y", "z"):
        if coord not in columns:
            raise PlyParseError(f"{path}: vertex element lacks {coord!r}")
    n = vertex.count
    points = np.column_stack([columns.pop("x"), columns.pop("y"), columns.pop("z")])
    record = CloudRecord(points=points.astype(np.float32), comments=comments)

    if all(f"flow_{a}" in columns for a in "xyz"):
        record.flow = np.column_stack(
            [columns.pop(f"flow_{a}") for a in "xyz"]
        ).astype(np.float32)
    if "label" in columns:
        record.labels = columns.pop("label")
    if "lidar_id" in columns:
        record.lidar_ids = columns.pop("lidar_id")
    if "time" in columns:
        record.times = columns.pop("time")
    if "tri_id" in columns:
        record.triangle_ids = columns.pop("tri_id").astype(np.int64)
    if "bary_u" in columns and "bary_v" in columns:
        record.barycentric = np.column_stack(
            [columns.pop("bary_u"), columns.pop("bary_v")]
        )
    if "index" in columns:
        record.indices = columns.pop("index").astype(np.int64)
    record.extras = columns
    if record.extras:
        log.info(
            "%s: preserved %d non-schema properties: %s",
            path,
            len(record.extras),
            sorted(record.extras),
        )
    assert len(record.points) == n
    return record


def _format_ascii(value, ply_type: str) -> str:
    if ply_type in ("float", "float32"):
        return f"{float(value):.9g}"
    if ply_type in ("double", "float64"):
        return f"{float(value):.17g}"
    return str(int(value))


def write_cloud(
    path: str | Path,
    points: np.ndarray,
    *,
    flow: np.ndarray | None = None,
    labels: np.ndarray | None = None,
    lidar_ids: np.ndarray | None = None,
    times: np.ndarray | None = None,
    triangle_ids: np.ndarray | None = None,
    barycentric: np.ndarray | None = None,
    indices: np.ndarray | None = None,
    comments: tuple[str, ...] = (),
    extras: dict[str, np.ndarray] | None = None,
    ascii_format: bool = False,
) -> None:
    """Write a scan-cloud PLY file (binary little-endian by default).

    Only schema properties are written; ``extras`` are dropped with a
    warning.
    """
    path = Path(path)
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"points must have shape (n, 3), got {points.shape}")
    n = len(points)
    if extras:
        log.warning(
            "%s: dropping non-schema properties on write: %s",
            path,
            sorted(extras),
        )

    columns: list[tuple[str, str, np.ndarray]] = [
        ("x", "float", points[:, 0].astype("<f4")),
        ("y", "float", points[:, 1].astype("<f4")),
        ("z", "float", points[:, 2].astype("<f4")),
    ]

    def add(name: str, values: np.ndarray) -> None:
        ply_type = _CLOUD_TYPES[name]
        columns.append(
            (name, ply_type, np.asarray(values).astype(_TYPE_TO_DTYPE[ply_type]))
        )

    def check_len(name: str, values: np.ndarray) -> None:
        if len(values) != n:
            raise ValueError(
                f"{name} has {len(values)} entries for {n} points"
            )

    if flow is not None:
        flow = np.asarray(flow)
        check_len("flow", flow)
        for axis, a in enumerate("xyz"):
            add(f"flow_{a}", flow[:, axis])
    if labels is not None:
        labels = np.asarray(labels)
        check_len("labels", labels)
        if labels.min(initial=0) < 0 or labels.max(initial=0) > 65535:
            raise ValueError("labels do not fit in 16 bits")
        add("label", labels)
    if lidar_ids is not None:
        check_len("lidar_ids", np.asarray(lidar_ids))
        add("lidar_id", lidar_ids)
    if times is not None:
        check_len("times", np.asarray(times))
        add("time", times)
    if triangle_ids is not None:
        check_len("triangle_ids", np.asarray(triangle_ids))
        add("tri_id", triangle_ids)
    if barycentric is not None:
        barycentric = np.asarray(barycentric)
        check_len("barycentric", barycentric)
        add("bary_u", barycentric[:, 0])
        add("bary_v", barycentric[:, 1])
    if indices is not None:
        check_len("indices", np.asarray(indices))
        add("index", indices)

    encoding = "ascii" if ascii_format else "binary_little_endian"
    header = ["ply", f"format {encoding} 1.0"]
    header.extend(f"comment {c}" for c in comments)
    header.append(f"element vertex {n}")
    header.extend(f"property {t} {name}" for name, t, _ in columns)
    header.append("end_header")

    with open(path, "wb") as sink:
        sink.write(("\n".join(header) + "\n").encode("ascii"))
        if ascii_format:
            lines = []
            for row in range(n):
                lines.append(
                    " ".join(
                        _format_ascii(values[row], t) for _, t, values in columns
                    )
                )
            if lines:
                sink.write(("\n".join(lines) + "\n").encode("ascii"))
        else:
            table = np.zeros(
                n,
                dtype=[
                    (name, _TYPE_TO_DTYPE[_CLOUD_TYPES.get(name, t)])
                    for name, t, _ in columns
                ],
            )
            for name, _, values in columns:
                table[name] = values
            sink.write(table.tobytes())


def write_mesh(
    path: str | Path,
    vertices: np.ndarray,
    faces: np.ndarray,
    ascii_format: bool = False,
) -> None:
    """Write a triangle mesh PLY with double-precision vertices."""
    path = Path(path)
    vertices = np.asarray(vertices, dtype="<f8")
    faces = np.asarray(faces)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ValueError(
            f"vertices must have shape (V, 3), got {vertices.shape}"
        )
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise ValueError(f"faces must have shape (T, 3), got {faces.shape}")
    encoding = "ascii" if ascii_format else "binary_little_endian"
    header = [
        "ply",
        f"format {encoding} 1.0",
        f"element vertex {len(vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    with open(path, "wb") as sink:
        sink.write(("\n".join(header) + "\n").encode("ascii"))
        if ascii_format:
            lines = [
                " ".join(f"{value:.17g}" for value in row) for row in vertices
            ]
            lines.extend("3 " + " ".join(str(v) for v in row) for row in faces)
            if lines:
                sink.write(("\n".join(lines) + "\n").encode("ascii"))
        else:
            sink.write(vertices.astype("<f8").tobytes())
            table = np.zeros(
                len(faces), dtype=[("n", "<u1"), ("v", "<i4", (3,))]
            )
            table["n"] = 3
            table["v"] = faces
            sink.write(table.tobytes())


def read_mesh(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a triangle mesh PLY; returns (vertices, faces)."""
    path = Path(path)
    data = path.read_bytes()
    encoding, elements, offset, _ = _parse_header(data, path)
    vertices = None
    faces = None
    for element in elements:
        if element.is_face_list:
            parsed, offset = _read_face_element(
                data, offset, element, encoding, path
            )
            if element.name == "face":
                faces = parsed
        else:
            columns, offset = _read_scalar_element(
                data, offset, element, encoding, path
            )
            if element.name == "vertex":
                for coord in ("x", "y", "z"):
                    if coord not in columns:
                        raise PlyParseError(
                            f"{path}: vertex element lacks {coord!r}"
                        )
                vertices = np.column_stack(
                    [columns["x"], columns["y"], columns["z"]]
                ).astype(float)
    if vertices is None:
        raise PlyParseError(f"{path}: no vertex element")
    if faces is None:
        raise PlyParseError(f"{path}: no face element")
    if len(faces) and faces.max() >= len(vertices):
        raise PlyParseError(f"{path}: face indices exceed the vertex count")
    return vertices, faces
