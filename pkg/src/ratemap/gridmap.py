"""Traversability grids, field-of-view selections and path-proximity weights.

Cells are addressed either as ``(row, col)`` pairs or as global row-major
indices ``row * cols + col``.  Selection matrices are never materialised:
a selection is the ordered array of global indices it picks out.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import ndimage


class MapFormatError(ValueError):
    """Raised when a map file cannot be parsed or holds out-of-range values."""


class Cell(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class GridMap:
    """Row-major grid of traversability values in ``[0, 1]``.

    0 is a free cell, 1 an untraversable one.
    """

    rows: int
    cols: int
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float).reshape(-1)
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError(f"map shape must be positive, got {self.rows}x{self.cols}")
        if values.size != self.rows * self.cols:
            raise ValueError(
                f"expected {self.rows * self.cols} values for a {self.rows}x{self.cols} map, "
                f"got {values.size}"
            )
        _check_range(values.reshape(self.rows, self.cols))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, grid) -> "GridMap":
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 2:
            raise ValueError("grid must be two-dimensional")
        return cls(grid.shape[0], grid.shape[1], grid.reshape(-1))

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.rows, self.cols)

    def index(self, cell: Sequence[int]) -> int:
        r, c = cell
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"cell {tuple(cell)} outside {self.rows}x{self.cols} map")
        return int(r) * self.cols + int(c)

    def cell(self, index: int) -> Cell:
        return Cell(*divmod(int(index), self.cols))

    def contains(self, cell: Sequence[int]) -> bool:
        return 0 <= cell[0] < self.rows and 0 <= cell[1] < self.cols

    def __getitem__(self, cell: Sequence[int]) -> float:
        return float(self.values[self.index(cell)])


def _check_range(grid: np.ndarray) -> None:
    bad = ~((grid >= 0.0) & (grid <= 1.0))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MapFormatError(
            f"value {grid[r, c]!r} at cell ({r}, {c}) is outside [0, 1]"
        )


# ---------------------------------------------------------------------------
# file i/o


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MapFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    """Read a P2 or P5 PGM file and return gray levels scaled by ``1/maxval``."""
    data = Path(path).read_bytes()
    try:
        (magic, w, h, maxval), pos = _pgm_tokens(data, 4)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise MapFormatError(f"{path}: bad PGM header") from exc
    if magic not in (b"P2", b"P5"):
        raise MapFormatError(f"{path}: unsupported PGM magic {magic!r}")
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise MapFormatError(f"{path}: bad PGM dimensions or maxval")
    count = width * height
    if magic == b"P5":
        raster = data[pos + 1 :]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(raster) < count * dtype.itemsize:
            raise MapFormatError(f"{path}: PGM raster truncated")
        pixels = np.frombuffer(raster, dtype=dtype, count=count).astype(float)
    else:
        body = data[pos:].split()
        if len(body) < count:
            raise MapFormatError(f"{path}: PGM raster truncated")
        try:
            pixels = np.array([int(t) for t in body[:count]], dtype=float)
        except ValueError as exc:
            raise MapFormatError(f"{path}: non-integer PGM sample") from exc
    grid = pixels.reshape(height, width) / maxval
    return grid


def write_pgm(path, grid, maxval: int = 255) -> None:
    """Write ``grid`` (values clipped to [0, 1]) as a binary P5 PGM."""
    grid = np.clip(np.asarray(grid, dtype=float), 0.0, 1.0)
    height, width = grid.shape
    pixels = np.rint(grid * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + pixels.astype(dtype).tobytes())


def read_csv_grid(path) -> np.ndarray:
    try:
        grid = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise MapFormatError(f"{path}: {exc}") from exc
    return grid


def load_map(path, format: str | None = None) -> GridMap:
    """Load a traversability map from a PGM (P2/P5) or CSV file.

    ``format`` defaults to the file suffix.
    """
    fmt = (format or Path(path).suffix.lstrip(".")).lower()
    if fmt == "pgm":
        grid = read_pgm(path)
    elif fmt == "csv":
        grid = read_csv_grid(path)
    else:
        raise MapFormatError(f"unknown map format {fmt!r}")
    _check_range(grid)
    return GridMap.from_array(grid)


def save_map(path, grid_map: GridMap) -> None:
    fmt = Path(path).suffix.lstrip(".").lower()
    if fmt == "pgm":
        write_pgm(path, grid_map.as_array())
    else:
        np.savetxt(path, grid_map.as_array(), delimiter=",", fmt="%.17g")


# ---------------------------------------------------------------------------
# selections


def fov_indices(center: Sequence[int], fov_rows: int, fov_cols: int, grid_map: GridMap) -> np.ndarray:
    """Global indices of the ``fov_rows x fov_cols`` window centred on ``center``.

    The window is clipped at the map border, so cells near an edge see fewer
    cells.  Indices come back in row-major order of the covered rectangle.
    """
    if fov_rows <= 0 or fov_cols <= 0 or fov_rows % 2 == 0 or fov_cols % 2 == 0:
        raise ValueError("FOV sides must be odd positive integers")
    r, c = center
    if not grid_map.contains(center):
        raise IndexError(f"FOV center {tuple(center)} outside the map")
    hr, hc = fov_rows // 2, fov_cols // 2
    r0, r1 = max(0, r - hr), min(grid_map.rows, r + hr + 1)
    c0, c1 = max(0, c - hc), min(grid_map.cols, c + hc + 1)
    rr, cc = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
    return (rr * grid_map.cols + cc).reshape(-1)


def complement_indices(sel, d: int) -> np.ndarray:
    """Sorted indices in ``range(d)`` not present in ``sel``."""
    mask = np.ones(d, dtype=bool)
    mask[np.asarray(sel, dtype=np.intp)] = False
    return np.flatnonzero(mask)


def path_weights(path: Iterable[Sequence[int]], sigma: float, grid_map: GridMap,
                 floor: float = 1e-6) -> np.ndarray:
    """Gaussian proximity of every cell to the nearest cell of ``path``.

    ``w = max(floor, exp(-dist**2 / (2 sigma**2)))`` with Euclidean distance in
    cell units.
    """
    cells = np.asarray(list(path), dtype=np.intp).reshape(-1, 2)
    if cells.shape[0] == 0:
        raise ValueError("path must contain at least one cell")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    off_path = np.ones(grid_map.shape, dtype=bool)
    off_path[cells[:, 0], cells[:, 1]] = False
    # exact Euclidean distance to the nearest path cell
    dist = ndimage.distance_transform_edt(off_path)
    w = np.exp(-(dist**2) / (2.0 * sigma**2))
    return np.maximum(w, floor).reshape(-1)


# ---------------------------------------------------------------------------
# preprocessing

_NEIGHBORS_8 = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def elevation_to_traversability(elev) -> GridMap:
    """Turn raw elevations into a steepness proxy in [0, 1].

    Each cell scores the summed absolute elevation difference to its in-bounds
    8-neighbours; scores are then min-max normalised.  A flat grid maps to all
    zeros.
    """
    y = np.asarray(elev, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    if y.size == 0:
        raise ValueError("elevation grid is empty")
    rows, cols = y.shape
    z = np.zeros_like(y)
    for dr, dc in _NEIGHBORS_8:
        dst_r = slice(max(0, -dr), rows - max(0, dr))
        dst_c = slice(max(0, -dc), cols - max(0, dc))
        src_r = slice(max(0, dr), rows - max(0, -dr))
        src_c = slice(max(0, dc), cols - max(0, -dc))
        z[dst_r, dst_c] += np.abs(y[dst_r, dst_c] - y[src_r, src_c])
    lo, hi = z.min(), z.max()
    if hi == lo:
        x = np.zeros_like(z)
    else:
        x = (z - lo) / (hi - lo)
    return GridMap.from_array(x)


def block_average_prior(grid_map: GridMap, block: int) -> np.ndarray:
    """Per-cell prior mean equal to the mean of its ``block x block`` tile."""
    if block <= 0 or grid_map.rows % block or grid_map.cols % block:
        raise ValueError(f"block size {block} must divide the {grid_map.rows}x{grid_map.cols} map")
    g = grid_map.as_array()
    tiles = g.reshape(grid_map.rows // block, block, grid_map.cols // block, block)
    means = tiles.mean(axis=(1, 3))
    return np.repeat(np.repeat(means, block, axis=0), block, axis=1).reshape(-1)


def boustrophedon(rows: int, cols: int, spacing: int, margin: int = 0) -> list[Cell]:
    """Lawn-mower sweep over the map visiting one cell per step.

    Passes run along rows, ``spacing`` rows apart, starting at ``margin``.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    lanes = list(range(margin, rows - margin, spacing))
    path: list[Cell] = []
    c_lo, c_hi = margin, cols - 1 - margin
    for k, r in enumerate(lanes):
        cols_iter = range(c_lo, c_hi + 1) if k % 2 == 0 else range(c_hi, c_lo - 1, -1)
        if path:
            # vertical transfer to the next lane
            pr, pc = path[-1]
            for rr in range(pr + 1, r):
                path.append(Cell(rr, pc))
        path.extend(Cell(r, c) for c in cols_iter)
    return path


def waypoint_path(waypoints: Sequence[Sequence[int]]) -> list[Cell]:
    """Expand waypoints into a 4-connected one-cell-per-step path.

    Each leg moves along rows first, then along columns.
    """
    if not waypoints:
        return []
    path = [Cell(*waypoints[0])]
    for r, c in waypoints[1:]:
        pr, pc = path[-1]
        step = 1 if r > pr else -1
        for rr in range(pr + step, r + step, step) if r != pr else ():
            path.append(Cell(rr, pc))
        step = 1 if c > pc else -1
        for cc in range(pc + step, c + step, step) if c != pc else ():
            path.append(Cell(r, cc))
    return path
