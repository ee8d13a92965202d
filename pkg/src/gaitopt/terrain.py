"""Terrain as an ordered set of bounded walkable planes, gaps and obstacles.

Planes are written n.r + d = 0 with unit normal, n_z > 0.  Boxes are movable
obstacles compiled into bounded top planes; gap volumes are xy regions no
foot may be assigned to; spheres are keep-out obstacles for swing feet.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import yaml


class NoPlaneFoundError(ValueError):
    """No walkable plane under the queried point (gap or off the terrain)."""


@dataclass(frozen=True)
class ContactPlane:
    """Plane n.r + d = 0 with an optional axis-aligned xy bound rectangle."""

    normal: np.ndarray
    offset: float
    bounds: tuple | None = None  # (xmin, xmax, ymin, ymax)
    source: str = ""  # id of the box/plane this came from, "" for anonymous

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm <= 0:
            raise ValueError("plane normal must be nonzero")
        n = n / norm
        if n[2] <= 0:
            raise ValueError("walkable planes need n_z > 0")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))
        if self.bounds is not None:
            xmin, xmax, ymin, ymax = (float(v) for v in self.bounds)
            if xmin >= xmax or ymin >= ymax:
                raise ValueError("degenerate plane bounds")
            object.__setattr__(self, "bounds", (xmin, xmax, ymin, ymax))

    def evaluate(self, point: np.ndarray) -> float:
        """Signed plane residual n.r + d."""
        return float(self.normal @ np.asarray(point, dtype=float) + self.offset)

    def height_at(self, x: float, y: float) -> float:
        n = self.normal
        return -(self.offset + n[0] * x + n[1] * y) / n[2]

    def contains_xy(self, x: float, y: float) -> bool:
        if self.bounds is None:
            return True
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def edge_distance(self, x: float, y: float) -> float:
        """Distance to the nearest bound edge; +inf for unbounded planes."""
        if self.bounds is None:
            return np.inf
        xmin, xmax, ymin, ymax = self.bounds
        return min(x - xmin, xmax - x, y - ymin, ymax - y)

    def anchored_at(self, point: np.ndarray) -> "ContactPlane":
        """Same normal and bounds, offset re-fit so the point lies on the plane."""
        return replace(self, offset=-float(self.normal @ np.asarray(point, dtype=float)))


@dataclass(frozen=True)
class GapVolume:
    """xy region that must not receive a foothold."""

    bounds: tuple  # (xmin, xmax, ymin, ymax)

    def __post_init__(self):
        xmin, xmax, ymin, ymax = (float(v) for v in self.bounds)
        if xmin >= xmax or ymin >= ymax:
            raise ValueError("degenerate gap bounds")
        object.__setattr__(self, "bounds", (xmin, xmax, ymin, ymax))

    def contains_xy(self, x: float, y: float) -> bool:
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    @property
    def width_x(self) -> float:
        return self.bounds[1] - self.bounds[0]

    @property
    def width_y(self) -> float:
        return self.bounds[3] - self.bounds[2]


@dataclass(frozen=True)
class SphereObstacle:
    """Keep-out sphere for swing feet: || r - center || >= radius."""

    center: np.ndarray
    radius: float
    obstacle_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class BoxObstacle:
    """Axis-aligned box standing on z=0, movable at runtime."""

    obstacle_id: str
    center: np.ndarray  # (x, y)
    size: np.ndarray  # (lx, ly)
    height: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "size", np.asarray(self.size, dtype=float))
        if self.height <= 0 or np.any(self.size <= 0):
            raise ValueError("box must have positive size and height")

    def top_plane(self) -> ContactPlane:
        cx, cy = self.center
        lx, ly = self.size
        return ContactPlane(
            normal=np.array([0.0, 0.0, 1.0]),
            offset=-self.height,
            bounds=(cx - lx / 2, cx + lx / 2, cy - ly / 2, cy + ly / 2),
            source=self.obstacle_id,
        )


@dataclass
class Terrain:
    """Ordered planes plus gaps, movable boxes and sphere obstacles."""

    planes: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    boxes: list = field(default_factory=list)
    spheres: list = field(default_factory=list)

    def all_planes(self) -> list:
        """Static planes followed by box-top planes."""
        return list(self.planes) + [b.top_plane() for b in self.boxes]

    def planes_at(self, x: float, y: float) -> list:
        return [p for p in self.all_planes() if p.contains_xy(x, y)]

    def gap_at(self, x: float, y: float) -> GapVolume | None:
        for g in self.gaps:
            if g.contains_xy(x, y):
                return g
        return None

    def surface_plane_at(self, x: float, y: float) -> ContactPlane:
        """Highest walkable plane under (x, y); boxes shadow the ground."""
        candidates = self.planes_at(x, y)
        if not candidates:
            raise NoPlaneFoundError(f"no plane under ({x:.3f}, {y:.3f})")
        return max(candidates, key=lambda p: p.height_at(x, y))

    def relocate(self, obstacle_id: str, new_center) -> None:
        """Move a box or sphere; raises KeyError for unknown ids."""
        new_center = np.asarray(new_center, dtype=float)
        for i, b in enumerate(self.boxes):
            if b.obstacle_id == obstacle_id:
                self.boxes[i] = replace(b, center=new_center[:2])
                return
        for i, s in enumerate(self.spheres):
            if s.obstacle_id == obstacle_id:
                center = s.center.copy()
                center[: len(new_center)] = new_center
                self.spheres[i] = replace(s, center=center)
                return
        raise KeyError(f"unknown obstacle id {obstacle_id!r}")

    def find_obstacle(self, obstacle_id: str):
        for b in self.boxes:
            if b.obstacle_id == obstacle_id:
                return b
        for s in self.spheres:
            if s.obstacle_id == obstacle_id:
                return s
        raise KeyError(f"unknown obstacle id {obstacle_id!r}")

    # -- serialization ------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "Terrain":
        planes = [
            ContactPlane(
                normal=np.asarray(p.get("normal", [0.0, 0.0, 1.0]), dtype=float),
                offset=float(p.get("offset", 0.0)),
                bounds=tuple(p["bounds"]) if p.get("bounds") is not None else None,
                source=p.get("id", ""),
            )
            for p in raw.get("planes", [])
        ]
        gaps = [GapVolume(bounds=tuple(g["bounds"])) for g in raw.get("gaps", [])]
        boxes = [
            BoxObstacle(
                obstacle_id=b["id"],
                center=np.asarray(b["center"], dtype=float),
                size=np.asarray(b["size"], dtype=float),
                height=float(b["height"]),
            )
            for b in raw.get("boxes", [])
        ]
        spheres = [
            SphereObstacle(
                center=np.asarray(s["center"], dtype=float),
                radius=float(s["radius"]),
                obstacle_id=s.get("id", ""),
            )
            for s in raw.get("spheres", [])
        ]
        return cls(planes=planes, gaps=gaps, boxes=boxes, spheres=spheres)

    def to_dict(self) -> dict:
        return {
            "planes": [
                {
                    "normal": p.normal.tolist(),
                    "offset": p.offset,
                    "bounds": list(p.bounds) if p.bounds else None,
                    **({"id": p.source} if p.source else {}),
                }
                for p in self.planes
            ],
            "gaps": [{"bounds": list(g.bounds)} for g in self.gaps],
            "boxes": [
                {
                    "id": b.obstacle_id,
                    "center": b.center.tolist(),
                    "size": b.size.tolist(),
                    "height": b.height,
                }
                for b in self.boxes
            ],
            "spheres": [
                {
                    "id": s.obstacle_id,
                    "center": s.center.tolist(),
                    "radius": s.radius,
                }
                for s in self.spheres
            ],
        }

    @classmethod
    def from_file(cls, path) -> "Terrain":
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f))

    def copy(self) -> "Terrain":
        return Terrain.from_dict(self.to_dict())
