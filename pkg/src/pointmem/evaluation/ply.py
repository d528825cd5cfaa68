"""ASCII PLY point-cloud export."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ContractError


def write_ply(path, points: np.ndarray, normals: np.ndarray | None = None, colors: np.ndarray | None = None) -> None:
    """Write points (and optional per-point normals / uint8 colors) as ASCII PLY."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cols = [pts]
    props = ["property float x", "property float y", "property float z"]
    if normals is not None:
        nrm = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if len(nrm) != len(pts):
            raise ContractError("normals must match points")
        cols.append(nrm)
        props += ["property float nx", "property float ny", "property float nz"]
    if colors is not None:
        c = np.asarray(colors).reshape(-1, 3)
        if len(c) != len(pts):
            raise ContractError("colors must match points")
        if c.dtype.kind == "f":
            c = np.clip(np.round(c * 255), 0, 255)
        cols.append(c.astype(np.float64))
        props += ["property uchar red", "property uchar green", "property uchar blue"]
    header = ["ply", "format ascii 1.0", f"element vertex {len(pts)}", *props, "end_header"]
    data = np.concatenate(cols, axis=1) if len(pts) else np.zeros((0, 3))
    n_float = 3 * (1 + (normals is not None))
    fmt = ["%.9g"] * n_float + ["%d"] * (3 if colors is not None else 0)
    path = Path(path)
    with path.open("w") as fh:
        fh.write("\n".join(header) + "\n")
        if len(pts):
            np.savetxt(fh, data, fmt=fmt)


def read_ply(path) -> dict[str, np.ndarray]:
    """Read back an ASCII PLY written by :func:`write_ply` into named columns."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "ply":
        raise ContractError("not a PLY file")
    names, n, start = [], 0, 0
    for i, line in enumerate(lines):
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts and parts[0] == "property":
            names.append(parts[-1])
        elif line == "end_header":
            start = i + 1
            break
    data = np.loadtxt(lines[start : start + n], ndmin=2) if n else np.zeros((0, len(names)))
    return {name: data[:, k] for k, name in enumerate(names)}
