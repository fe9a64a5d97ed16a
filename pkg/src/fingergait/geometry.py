"""Planar object shapes and vectorized surface queries.

Conventions used throughout the package:
  - all lengths in meters, angles in radians
  - polygons are simple (non-self-intersecting), vertices counter-clockwise,
    stored in the body frame with the centroid at the origin
  - signed distance is negative inside the object, zero on the boundary
  - surface normals are unit vectors pointing out of the object
  - at a polygon vertex the outward normal is the direction from the vertex
    to the query point when the point lies outside; otherwise the bisector
    of the two adjacent edge normals (this covers reflex corners of concave
    shapes, where the bisector is the only consistent choice)

Shapes are immutable after construction; derived edge tables are cached.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

DISC = "disc"
POLYGON = "polygon"

_EPS_VERTEX = 1e-9      # parameter slack classifying a closest point as a vertex
_EPS_DEGENERATE = 1e-12


@dataclass
class ObjectShape:
    """A rigid planar object, either a disc or a simple polygon."""

    kind: str
    radius: float = 0.0
    vertices: Optional[np.ndarray] = None
    name: str = ""
    category: str = ""

    # cached derived tables (polygon only)
    _edge_vec: np.ndarray = field(init=False, repr=False, default=None)
    _edge_inv_len2: np.ndarray = field(init=False, repr=False, default=None)
    _edge_normal: np.ndarray = field(init=False, repr=False, default=None)
    _vertex_normal: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.kind == DISC:
            if self.radius <= 0.0:
                raise ValueError("disc radius must be positive")
        elif self.kind == POLYGON:
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
                raise ValueError("polygon needs an (n>=3, 2) vertex array")
            if _signed_area(v) <= 0.0:
                raise ValueError("polygon vertices must be counter-clockwise")
            self.vertices = v
            nxt = np.roll(v, -1, axis=0)
            e = nxt - v
            len2 = (e * e).sum(axis=1)
            if np.any(len2 < _EPS_DEGENERATE**2):
                raise ValueError("degenerate polygon edge")
            self._edge_vec = e
            self._edge_inv_len2 = 1.0 / len2
            # outward normal of a CCW edge is the right-hand perpendicular
            n = np.stack([e[:, 1], -e[:, 0]], axis=1)
            n /= np.linalg.norm(n, axis=1, keepdims=True)
            self._edge_normal = n
            # vertex normal: bisector of the adjacent edge normals
            prev_n = np.roll(n, 1, axis=0)
            b = prev_n + n
            bn = np.linalg.norm(b, axis=1, keepdims=True)
            # opposite adjacent normals (needle corner) fall back to the
            # outgoing edge normal
            b = np.where(bn > _EPS_DEGENERATE, b / np.maximum(bn, _EPS_DEGENERATE), n)
            self._vertex_normal = b
        else:
            raise ValueError(f"unknown shape kind {self.kind!r}")

    def bounding_radius(self) -> float:
        """Radius of the smallest origin-centered disc containing the shape."""
        if self.kind == DISC:
            return self.radius
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def inertia(self, mass: float) -> float:
        """Planar moment of inertia about the centroid for uniform density."""
        if self.kind == DISC:
            return 0.5 * mass * self.radius**2
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
        num = (cross * ((v * v).sum(1) + (v * w).sum(1) + (w * w).sum(1))).sum()
        den = 3.0 * cross.sum()
        return float(mass * num / (2.0 * den))


def _signed_area(v: np.ndarray) -> float:
    w = np.roll(v, -1, axis=0)
    return 0.5 * float((v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]).sum())


def _polygon_centroid(v: np.ndarray) -> np.ndarray:
    w = np.roll(v, -1, axis=0)
    cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
    a = 0.5 * cross.sum()
    cx = ((v[:, 0] + w[:, 0]) * cross).sum() / (6.0 * a)
    cy = ((v[:, 1] + w[:, 1]) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def polygon_shape(vertices, name: str = "", category: str = "") -> ObjectShape:
    """Build a polygon shape, re-centering the vertices on the centroid."""
    v = np.asarray(vertices, dtype=float)
    if _signed_area(v) < 0.0:
        v = v[::-1].copy()
    v = v - _polygon_centroid(v)
    return ObjectShape(kind=POLYGON, vertices=v, name=name, category=category)


def disc_shape(radius: float, name: str = "disc") -> ObjectShape:
    return ObjectShape(kind=DISC, radius=radius, name=name, category="easy")


def square_shape(side: float = 0.09) -> ObjectShape:
    h = 0.5 * side
    v = [(-h, -h), (h, -h), (h, h), (-h, h)]
    s = polygon_shape(v, name="square", category="easy")
    return s


def rectangle_shape(width: float = 0.115, height: float = 0.046) -> ObjectShape:
    hw, hh = 0.5 * width, 0.5 * height
    v = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
    return polygon_shape(v, name="rectangle", category="moderate")


def lshape(outer: float = 0.09, cut: float = 0.045,
           angle: float = np.deg2rad(92.0)) -> ObjectShape:
    """L-shaped block: an outer square with one quadrant removed.

    The default ``angle`` turns the block so that, at zero pose, each
    finger of the default hand faces an edge it can reach with a roughly
    surface-normal approach; the canonical grasp is noticeably harder to
    form in most other orientations.
    """
    h = 0.5 * outer
    v = np.array([(-h, -h), (h, -h), (h, h - cut), (h - cut, h - cut),
                  (h - cut, h), (-h, h)])
    c, s = np.cos(angle), np.sin(angle)
    return polygon_shape(v @ np.array([[c, -s], [s, c]]).T,
                         name="lshape", category="hard")


STANDARD_SHAPES = {
    "disc": lambda: disc_shape(0.05),
    "square": square_shape,
    "rectangle": rectangle_shape,
    "lshape": lshape,
}


# ---------------------------------------------------------------------------
# surface queries
# ---------------------------------------------------------------------------

def surface_query_local(shape: ObjectShape, pts: np.ndarray
                        ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed distance, closest boundary point, and outward normal.

    Args:
        shape: the object, in its body frame.
        pts: query points, shape (..., 2), body frame.

    Returns:
        (signed_distance (...,), closest_point (..., 2), normal (..., 2)).
    """
    p = np.asarray(pts, dtype=float)
    if shape.kind == DISC:
        r = np.linalg.norm(p, axis=-1)
        safe = r > _EPS_DEGENERATE
        dirn = np.where(safe[..., None], p / np.maximum(r, _EPS_DEGENERATE)[..., None],
                        np.array([1.0, 0.0]))
        sd = r - shape.radius
        cp = dirn * shape.radius
        return sd, cp, dirn

    v = shape.vertices
    n_edges = v.shape[0]
    rel = p[..., None, :] - v                                    # (..., E, 2)
    t = (rel * shape._edge_vec).sum(-1) * shape._edge_inv_len2
    t = np.clip(t, 0.0, 1.0)                                     # (..., E)
    cp = v + t[..., None] * shape._edge_vec                      # (..., E, 2)
    diff = p[..., None, :] - cp
    d2 = (diff * diff).sum(-1)                                   # (..., E)
    k = np.argmin(d2, axis=-1)
    k_exp = k[..., None]
    cp_best = np.take_along_axis(cp, k_exp[..., None], axis=-2)[..., 0, :]
    t_best = np.take_along_axis(t, k_exp, axis=-1)[..., 0]
    d_best = np.sqrt(np.take_along_axis(d2, k_exp, axis=-1)[..., 0])

    inside = _point_in_polygon(v, p)
    sd = np.where(inside, -d_best, d_best)

    n_edge = shape._edge_normal[k]
    at_start = t_best <= _EPS_VERTEX
    at_end = t_best >= 1.0 - _EPS_VERTEX
    vid = np.where(at_end, (k + 1) % n_edges, k)
    is_vertex = at_start | at_end
    dv = p - v[vid]
    dvn = np.linalg.norm(dv, axis=-1)
    radial = (~inside) & (dvn > _EPS_DEGENERATE)
    n_vertex = np.where(radial[..., None],
                        dv / np.maximum(dvn, _EPS_DEGENERATE)[..., None],
                        shape._vertex_normal[vid])
    normal = np.where(is_vertex[..., None], n_vertex, n_edge)
    return sd, cp_best, normal


def _point_in_polygon(v: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Even-odd containment test, vectorized over query points (..., 2)."""
    x, y = p[..., 0, None], p[..., 1, None]
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(v[:, 0], -1), np.roll(v[:, 1], -1)
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hit = straddle & (x < xi)
    return hit.sum(axis=-1) % 2 == 1


def rotate(theta, pts: np.ndarray) -> np.ndarray:
    """Rotate points (..., 2) by angles theta (broadcast against pts[..., 0])."""
    c, s = np.cos(theta), np.sin(theta)
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def boundary_sample(shape: ObjectShape, u) -> Tuple[np.ndarray, np.ndarray]:
    """Map parameters ``u`` in [0, 1) to boundary points, uniform by arclength.

    Returns ``(points, normals)`` in the object's local frame, with shapes
    ``u.shape + (2,)``.  Scalar ``u`` gives plain ``(2,)`` arrays.
    """
    u = np.asarray(u, dtype=float)
    frac = np.mod(u, 1.0)
    if shape.kind == DISC:
        ang = 2.0 * np.pi * frac
        n = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return shape.radius * n, n
    lengths = np.sqrt(1.0 / shape._edge_inv_len2)
    cum = np.cumsum(lengths)
    s = frac * cum[-1]
    idx = np.minimum(np.searchsorted(cum, s, side="right"), len(lengths) - 1)
    prev = cum[idx] - lengths[idx]
    t = (s - prev) / lengths[idx]
    pts = shape.vertices[idx] + t[..., None] * shape._edge_vec[idx]
    return pts, shape._edge_normal[idx].copy()


def surface_query(shape: ObjectShape, pose: np.ndarray, pts: np.ndarray
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World-frame surface query against an object at ``pose`` = (x, y, theta).

    ``pose`` may be a single (3,) pose or a batch broadcastable against the
    leading dimensions of ``pts``.
    """
    pose = np.asarray(pose, dtype=float)
    pts = np.asarray(pts, dtype=float)
    xy = pose[..., :2]
    th = pose[..., 2]
    if pose.ndim + 1 == pts.ndim:        # batch of poses, per-pose point sets
        xy = xy[..., None, :]
        th = th[..., None]
    local = rotate(-th, pts - xy)
    sd, cp_l, n_l = surface_query_local(shape, local)
    cp = rotate(th, cp_l) + xy
    nrm = rotate(th, n_l)
    return sd, cp, nrm
