"""CSV tables and OBJ meshes."""
import csv
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)


def fmt(x: float) -> str:
    """17 significant digits, round-trip exact."""
    return f"{float(x):.17g}"

def write_csv(destination: Union[str, Path], header: Sequence[str], rows: np.ndarray) -> Path:
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", newline="") as f:
        w = csv.writer(f, quoting=csv.QUOTE_MINIMAL)
        w.writerow(list(header))
        for row in np.atleast_2d(rows):
            w.writerow([fmt(x) for x in row])
    logger.debug(f"wrote {destination}")
    return destination

def write_table(destination: Union[str, Path], header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    """Rows of mixed cells; floats are written with `fmt`, everything else as text."""
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", newline="") as f:
        w = csv.writer(f, quoting=csv.QUOTE_MINIMAL)
        w.writerow(list(header))
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    logger.debug(f"wrote {destination}")
    return destination

PATCH_HEADER = ["u", "v", "g11", "g12", "g22", "h11", "h12", "h22", "Kext", "Kint", "lambda", "defect"]

def write_patch_csv(
    destination: Union[str, Path],
    u: np.ndarray,
    v: np.ndarray,
    fields: Dict[str, Optional[np.ndarray]],
) -> Path:
    """One row per grid node; missing fields are written as nan."""
    U, V = np.meshgrid(u, v, indexing="ij")
    shape = U.shape
    columns = [U.ravel(), V.ravel()]
    for name in PATCH_HEADER[2:]:
        value = fields.get(name)
        columns.append(np.full(U.size, np.nan) if value is None else np.broadcast_to(value, shape).ravel())
    return write_csv(destination, PATCH_HEADER, np.column_stack(columns))

def write_obj(destination: Union[str, Path], vertices: np.ndarray, name: str = "patch") -> Path:
    """
    ASCII OBJ of a (nu, nv, 3) vertex grid: `v` records, then each grid quad
    split into two `f` triangles (1-based indices).
    """
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    nu, nv = vertices.shape[:2]
    index = lambda i, j: i * nv + j + 1
    with destination.open("w") as f:
        for x in vertices.reshape(-1, 3):
            f.write("v " + " ".join(fmt(c) for c in x) + "\n")
        for i in range(nu - 1):
            for j in range(nv - 1):
                a, b, c, d = index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)
                f.write(f"f {a} {b} {c}\n")
                f.write(f"f {a} {c} {d}\n")
    logger.debug(f"wrote {name} to {destination} ({nu * nv} vertices)")
    return destination
