"""Patch-mesh interchange files.

The normative form is a plain-text container (section headers with counts,
one row per line, full float precision):

    patchmesh 1
    vertices <n>
    <u> <v> <d>
    ...
    colors <n>
    <r> <g> <b>
    ...
    triangles <m>
    <i> <j> <k>
    ...
    landmarks <l>
    <landmark index> <vertex index>
    ...

Files ending in ``.npz`` use the equivalent numpy archive (arrays
``vertices``, ``colors``, ``triangles``, ``landmark_keys``,
``landmark_values``) as an optional binary form.
"""

from pathlib import Path

import numpy as np

from .errors import MalformedLandmarksError, MeshFormatError
from .matching import PatchMesh

_MAGIC = "patchmesh"
_VERSION = 1


def write_patch_mesh(mesh: PatchMesh, path) -> None:
    path = Path(path)
    if path.suffix == ".npz":
        keys = np.array(sorted(mesh.landmark_map), dtype=np.int64)
        np.savez(
            path,
            vertices=mesh.vertices,
            colors=mesh.colors,
            triangles=mesh.triangles,
            landmark_keys=keys,
            landmark_values=np.array([mesh.landmark_map[int(k)] for k in keys], dtype=np.int64),
        )
        return
    out = [f"{_MAGIC} {_VERSION}", f"vertices {len(mesh.vertices)}"]
    out += [f"{u!r} {v!r} {d!r}" for u, v, d in mesh.vertices.tolist()]
    out.append(f"colors {len(mesh.colors)}")
    out += [f"{r!r} {g!r} {b!r}" for r, g, b in mesh.colors.tolist()]
    out.append(f"triangles {len(mesh.triangles)}")
    out += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    landmarks = sorted(mesh.landmark_map.items())
    out.append(f"landmarks {len(landmarks)}")
    out += [f"{k} {v}" for k, v in landmarks]
    path.write_text("\n".join(out) + "\n")


def read_patch_mesh(path) -> PatchMesh:
    path = Path(path)
    if not path.exists():
        raise MeshFormatError(f"mesh file not found: {path}")
    if path.suffix == ".npz":
        return _read_npz(path)
    return _read_text(path)


def _read_npz(path) -> PatchMesh:
    try:
        data = np.load(path)
        landmark_map = {
            int(k): int(v) for k, v in zip(data["landmark_keys"], data["landmark_values"])
        }
        return PatchMesh(
            vertices=data["vertices"],
            triangles=data["triangles"],
            colors=data["colors"],
            landmark_map=landmark_map,
        )
    except (KeyError, ValueError, OSError) as exc:
        raise MeshFormatError(f"bad mesh archive {path}: {exc}") from exc


def _read_text(path) -> PatchMesh:
    lines = path.read_text().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise MeshFormatError(f"unexpected end of mesh file {path}")
        pos += 1
        return lines[pos - 1].split()

    header = next_line()
    if header[:1] != [_MAGIC] or len(header) != 2 or int(header[1]) != _VERSION:
        raise MeshFormatError(f"not a patchmesh v{_VERSION} file: {path}")

    def section(name, width, parse):
        tag = next_line()
        if len(tag) != 2 or tag[0] != name:
            raise MeshFormatError(f"expected '{name} <count>' in {path}, got {tag}")
        count = int(tag[1])
        rows = []
        for _ in range(count):
            fields = next_line()
            if len(fields) != width:
                raise MeshFormatError(f"bad {name} row in {path}: {fields}")
            rows.append([parse(f) for f in fields])
        return rows

    try:
        vertices = np.array(section("vertices", 3, float), dtype=float).reshape(-1, 3)
        colors = np.array(section("colors", 3, float), dtype=float).reshape(-1, 3)
        triangles = np.array(section("triangles", 3, int), dtype=np.int64).reshape(-1, 3)
        landmark_rows = section("landmarks", 2, int)
    except (ValueError, MeshFormatError) as exc:
        raise MeshFormatError(f"bad mesh file {path}: {exc}") from exc
    try:
        return PatchMesh(
            vertices=vertices,
            triangles=triangles,
            colors=colors,
            landmark_map=dict(landmark_rows),
        )
    except (ValueError, MalformedLandmarksError) as exc:
        raise MeshFormatError(f"mesh file {path} violates mesh invariants: {exc}") from exc
