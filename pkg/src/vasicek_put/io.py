"""Surface files: CSV of (t, r, b) rows plus a JSON sidecar."""

from __future__ import annotations

import io as _io
import json
from pathlib import Path

import numpy as np

from .surface import BoundarySurface, Grid


def fmt(v: float) -> str:
    return f"{v:.12g}"


def surface_csv(surface: BoundarySurface) -> str:
    g = surface.grid
    buf = _io.StringIO()
    buf.write("t,r,b\n")
    for i, t in enumerate(g.t_nodes):
        for j, r in enumerate(g.r_nodes):
            buf.write(f"{fmt(t)},{fmt(r)},{fmt(surface.values[i, j])}\n")
    return buf.getvalue()


def write_surface(path, surface: BoundarySurface, meta: dict | None = None) -> tuple[Path, Path]:
    """Write ``path`` (CSV) and ``path`` with suffix .json (grid, metadata)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(surface_csv(surface))
    side = path.with_suffix(".json")
    doc = {"grid": surface.grid.to_dict(), "converged": bool(surface.converged)}
    doc.update(meta or {})
    side.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path, side


def read_surface(path) -> tuple[BoundarySurface, dict]:
    """Inverse of write_surface.  Values are reread at CSV precision."""
    path = Path(path)
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text())
    grid = Grid.from_dict(meta["grid"])
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.t_nodes.size * grid.r_nodes.size:
        raise ValueError("surface CSV does not match its grid")
    values = data[:, 2].reshape(grid.shape)
    return BoundarySurface(grid, values, converged=bool(meta.get("converged", False))), meta
