"""Synthetic skeletons and masks, flux perturbation, and round-trip sweeps.

Randomness comes from numpy's counter-based Philox4x64-10 generator keyed
directly with the 64-bit seed (``np.random.Philox(key=seed)``). Gaussian
deviates are produced with Box-Muller from its uniform doubles rather than
numpy's ziggurat, so the streams are easy to reproduce elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .binflux import AofParams, skeletonize_binary
from .evaluation import DEFAULT_RHO, match_with_tolerance
from .fluxgen import compute_context_flux
from .raster import as_flux
from .recover import RecoveryParams, recover_skeleton

SHAPE_KINDS = ("line", "polyline", "ellipse-skeleton", "rectangle-mask", "disk-mask", "blob-mask")
MASK_KINDS = ("rectangle-mask", "disk-mask", "blob-mask")
NOISE_SUPPORTS = ("all", "flux")
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def philox(seed: int) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


def box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` standard normal deviates from pairs of uniforms."""
    pairs = (n + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1]
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(2.0 * np.pi * u2)
    z[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return z[:n]


# -- rasterization -----------------------------------------------------------


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """8-connected pixel path from ``(x0, y0)`` to ``(x1, y1)`` inclusive."""
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        points.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return points
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _thin_chain(chain: list[tuple[int, int]], closed: bool) -> list[tuple[int, int]]:
    """Drop chain pixels whose neighbours along the chain already touch."""
    def touching(a, b):
        return max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= 1

    changed = True
    while changed and len(chain) > 3:
        changed = False
        out = []
        n = len(chain)
        i = 0
        while i < n:
            prev = out[-1] if out else (chain[-1] if closed else None)
            nxt = chain[(i + 1) % n] if (closed or i + 1 < n) else None
            if prev is not None and nxt is not None and touching(prev, nxt) and prev != nxt:
                changed = True
                i += 1
                continue
            out.append(chain[i])
            i += 1
        chain = out
    return chain


def _draw(points, width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=bool)
    for x, y in points:
        if 0 <= x < width and 0 <= y < height:
            out[y, x] = True
    return out


def polyline_pixels(vertices) -> list[tuple[int, int]]:
    vertices = [(int(round(x)), int(round(y))) for x, y in vertices]
    if len(vertices) < 2:
        raise ValueError("a polyline needs at least two vertices")
    path = [vertices[0]]
    for a, b in zip(vertices, vertices[1:]):
        if a == b:
            raise ValueError(f"degenerate segment at {a}")
        path.extend(bresenham(*a, *b)[1:])
    return _thin_chain(path, closed=False)


def ellipse_pixels(cx, cy, a, b, rotation_deg=0.0) -> list[tuple[int, int]]:
    """Closed, 1-pixel-wide, 8-connected ellipse outline."""
    if a < 1 or b < 1:
        raise ValueError("ellipse semi-axes must be >= 1 pixel")
    n = max(16, int(8 * (a + b)))
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    c, s = math.cos(math.radians(rotation_deg)), math.sin(math.radians(rotation_deg))
    ex, ey = a * np.cos(t), b * np.sin(t)
    xs = np.rint(cx + c * ex - s * ey).astype(int)
    ys = np.rint(cy + s * ex + c * ey).astype(int)
    ring = [(int(x), int(y)) for x, y in zip(xs, ys)]
    chain: list[tuple[int, int]] = []
    for p, q in zip(ring, ring[1:] + ring[:1]):
        if p != q:
            chain.extend(bresenham(*p, *q)[:-1])
    deduped = [p for i, p in enumerate(chain) if p != chain[i - 1]]
    return _thin_chain(deduped, closed=True)


def value_noise(rng: np.random.Generator, width: int, height: int, cell: int) -> np.ndarray:
    """Smoothstep-interpolated lattice noise in [0, 1]."""
    gw, gh = width // cell + 2, height // cell + 2
    lattice = rng.random((gh, gw))
    fy = np.arange(height) / cell
    fx = np.arange(width) / cell
    iy, ix = fy.astype(int), fx.astype(int)
    ty, tx = fy - iy, fx - ix
    ty = (ty * ty * (3 - 2 * ty))[:, None]
    tx = (tx * tx * (3 - 2 * tx))[None, :]
    v00 = lattice[iy[:, None], ix[None, :]]
    v01 = lattice[iy[:, None], ix[None, :] + 1]
    v10 = lattice[iy[:, None] + 1, ix[None, :]]
    v11 = lattice[iy[:, None] + 1, ix[None, :] + 1]
    top = v00 + (v01 - v00) * tx
    bottom = v10 + (v11 - v10) * tx
    return top + (bottom - top) * ty


def largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n == 0:
        return mask.copy()
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


# -- shapes -----------------------------------------------------------------


@dataclass(frozen=True)
class ShapeSpec:
    """Parameters for one synthetic shape.

    ``points`` holds line/polyline vertices; ``center``/``axes``/``rotation``
    describe ellipses and disks (``axes[0]`` is the disk radius); ``size``
    is the rectangle ``(w, h)``; ``cell`` is the blob noise scale.
    """

    kind: str
    width: int
    height: int
    points: tuple[tuple[float, float], ...] = ()
    center: tuple[float, float] | None = None
    axes: tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0
    size: tuple[int, int] = (0, 0)
    cell: int = 24
    seed: int = 0
    aof: AofParams = field(default_factory=AofParams)

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}; choose from {', '.join(SHAPE_KINDS)}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"invalid dims {self.width}x{self.height}")

    @property
    def centre(self) -> tuple[float, float]:
        if self.center is not None:
            return self.center
        return ((self.width - 1) / 2, (self.height - 1) / 2)


def _within(spec: ShapeSpec, pts) -> None:
    for x, y in pts:
        if not (0 <= x < spec.width and 0 <= y < spec.height):
            raise ValueError(f"point ({x}, {y}) outside {spec.width}x{spec.height} grid")


def _blob_mask(spec: ShapeSpec) -> np.ndarray:
    rng = philox(spec.seed)
    margin = 4
    for _ in range(32):
        field_ = value_noise(rng, spec.width, spec.height, max(2, spec.cell))
        mask = field_ > 0.5
        mask[:margin] = mask[-margin:] = False
        mask[:, :margin] = mask[:, -margin:] = False
        mask = largest_component(mask)
        if mask.sum() >= 0.05 * spec.width * spec.height:
            return mask
    raise ValueError("could not grow a blob of useful size; try a larger grid or smaller cell")


def make_shape(spec: ShapeSpec) -> tuple[np.ndarray | None, np.ndarray]:
    """Build ``(mask, skeleton)`` for ``spec``; ``mask`` is None for curve kinds.

    Curve skeletons are 1-pixel-wide 8-connected paths; mask skeletons come
    from :func:`ctxflux.binflux.skeletonize_binary`.
    """
    w, h = spec.width, spec.height
    mask = None
    if spec.kind in ("line", "polyline"):
        pts = spec.points
        if spec.kind == "line" and len(pts) != 2:
            raise ValueError("a line needs exactly two endpoints")
        _within(spec, pts)
        skeleton = _draw(polyline_pixels(pts), w, h)
    elif spec.kind == "ellipse-skeleton":
        cx, cy = spec.centre
        a, b = spec.axes
        skeleton = _draw(ellipse_pixels(cx, cy, a, b, spec.rotation), w, h)
    else:
        yy, xx = np.mgrid[:h, :w]
        cx, cy = spec.centre
        if spec.kind == "rectangle-mask":
            rw, rh = spec.size
            if rw < 1 or rh < 1 or rw > w or rh > h:
                raise ValueError(f"rectangle {rw}x{rh} does not fit the {w}x{h} grid")
            x0, y0 = int(round(cx - rw / 2)), int(round(cy - rh / 2))
            x0, y0 = min(max(x0, 0), w - rw), min(max(y0, 0), h - rh)
            mask = np.zeros((h, w), dtype=bool)
            mask[y0 : y0 + rh, x0 : x0 + rw] = True
        elif spec.kind == "disk-mask":
            radius = spec.axes[0]
            if radius <= 0:
                raise ValueError("disk radius must be positive")
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius
        else:
            mask = _blob_mask(spec)
        if not mask.any():
            raise ValueError("degenerate mask")
        skeleton = skeletonize_binary(mask, spec.aof)
    if not skeleton.any():
        raise ValueError(f"degenerate {spec.kind}: empty skeleton")
    return mask, skeleton


def _segment_gap(p, q, a, b) -> float:
    """Smallest distance between segments pq and ab (0 if they cross)."""
    def side(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    if side(p, q, a) * side(p, q, b) < 0 and side(a, b, p) * side(a, b, q) < 0:
        return 0.0

    def point_seg(c, u, v):
        vx, vy = v[0] - u[0], v[1] - u[1]
        t = ((c[0] - u[0]) * vx + (c[1] - u[1]) * vy) / (vx * vx + vy * vy)
        t = min(1.0, max(0.0, t))
        return math.hypot(c[0] - u[0] - t * vx, c[1] - u[1] - t * vy)

    return min(point_seg(p, a, b), point_seg(q, a, b), point_seg(a, p, q), point_seg(b, p, q))


def _clean_polyline(pts, min_gap: float) -> bool:
    # no hairpins (turns sharper than 135 degrees) and no near-contact between non-adjacent segments
    for a, b, c in zip(pts, pts[1:], pts[2:]):
        u = (a[0] - b[0], a[1] - b[1])
        v = (c[0] - b[0], c[1] - b[1])
        cos = (u[0] * v[0] + u[1] * v[1]) / (math.hypot(*u) * math.hypot(*v))
        if cos > math.cos(math.radians(45)):
            return False
    segs = list(zip(pts, pts[1:]))
    return all(_segment_gap(*segs[i], *segs[j]) >= min_gap
               for i in range(len(segs)) for j in range(i + 2, len(segs)))


def random_shape_spec(kind: str, width: int, height: int, seed: int) -> ShapeSpec:
    """Draw a random, well-inside-the-grid shape of the given kind."""
    rng = philox(seed)
    side = min(width, height)
    margin = max(8, side // 8) if side >= 48 else max(2, side // 6)
    if kind in ("line", "polyline") and (side - 2 * margin - 1) * math.sqrt(2) < side / 3:
        raise ValueError(f"grid {width}x{height} is too small for a random {kind}")

    def point():
        return (float(rng.integers(margin, width - margin)), float(rng.integers(margin, height - margin)))

    if kind == "line":
        while True:
            a, b = point(), point()
            if math.dist(a, b) >= min(width, height) / 3:
                return ShapeSpec(kind, width, height, points=(a, b), seed=seed)
    if kind == "polyline":
        n = int(rng.integers(3, 6))
        attempts = 0
        while True:
            pts = [point() for _ in range(n)]
            if (all(math.dist(p, q) >= min(width, height) / 5 for p, q in zip(pts, pts[1:]))
                    and _clean_polyline(pts, min(width, height) / 10)):
                return ShapeSpec(kind, width, height, points=tuple(pts), seed=seed)
            attempts += 1
            if attempts % 500 == 0 and n > 2:
                n -= 1  # small grids cannot fit many clean turns
    if kind == "ellipse-skeleton":
        a = float(rng.uniform(0.2, 0.35) * min(width, height))
        b = float(rng.uniform(0.4, 1.0) * a)
        return ShapeSpec(kind, width, height, axes=(a, b), rotation=float(rng.uniform(0, 180)), seed=seed)
    if kind == "rectangle-mask":
        rw = int(rng.integers(width // 4, width // 2))
        rh = int(rng.integers(height // 8, height // 3))
        return ShapeSpec(kind, width, height, size=(rw, rh), seed=seed)
    if kind == "disk-mask":
        return ShapeSpec(kind, width, height, axes=(float(rng.uniform(0.15, 0.35) * min(width, height)), 0.0), seed=seed)
    if kind == "blob-mask":
        return ShapeSpec(kind, width, height, cell=max(8, min(width, height) // 4), seed=seed)
    raise ValueError(f"unknown shape kind {kind!r}; choose from {', '.join(SHAPE_KINDS)}")


# -- perturbation -----------------------------------------------------------


@dataclass(frozen=True)
class PerturbSpec:
    sigma: float = 0.0
    patches: int = 0
    patch_size: int = 5
    angle_jitter: float = 0.0  # degrees
    seed: int = 0
    support: str = "all"  # "all" pixels, or "flux": only originally nonzero vectors get noise

    def __post_init__(self):
        if self.support not in NOISE_SUPPORTS:
            raise ValueError(f"support must be one of {NOISE_SUPPORTS}, got {self.support!r}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not self.angle_jitter >= 0:
            raise ValueError(f"angle_jitter must be >= 0, got {self.angle_jitter}")
        if self.patches < 0 or self.patch_size < 1:
            raise ValueError("patch count must be >= 0 and patch size >= 1")


def perturb_flux(flux, spec: PerturbSpec) -> np.ndarray:
    """Simulate an imperfect prediction of ``flux``.

    Applied in order: rotate every nonzero vector by a normal angle with std
    ``angle_jitter`` degrees, add ``N(0, sigma^2)`` to each component (of every
    pixel, or only of originally nonzero vectors when ``support="flux"``),
    then zero ``patches`` random square patches lying fully inside the grid
    (clipped if the patch is larger than the grid).
    """
    out = as_flux(flux).copy()
    height, width = out.shape[:2]
    rng = philox(spec.seed)
    nonzero = (out[..., 0] != 0) | (out[..., 1] != 0)
    if spec.angle_jitter > 0:
        ys, xs = np.nonzero(nonzero)
        theta = np.radians(spec.angle_jitter * box_muller(rng, len(ys)))
        c, s = np.cos(theta), np.sin(theta)
        fx, fy = out[ys, xs, 0], out[ys, xs, 1]
        out[ys, xs, 0] = c * fx - s * fy
        out[ys, xs, 1] = s * fx + c * fy
    if spec.sigma > 0:
        noise = spec.sigma * box_muller(rng, out.size).reshape(out.shape)
        if spec.support == "flux":
            noise[~nonzero] = 0.0
        out += noise
    pw, ph = min(spec.patch_size, width), min(spec.patch_size, height)
    for _ in range(spec.patches):
        x0 = int(rng.integers(0, width - pw + 1))
        y0 = int(rng.integers(0, height - ph + 1))
        out[y0 : y0 + ph, x0 : x0 + pw] = 0.0
    return out


# -- round trips ------------------------------------------------------------


def round_trip_f(skeleton, r: int = 7, params: RecoveryParams | None = None,
                 rho: float = DEFAULT_RHO, perturb: PerturbSpec | None = None) -> float:
    """F-measure of the skeleton recovered from its own (optionally perturbed) flux."""
    flux = compute_context_flux(skeleton, r)
    if perturb is not None:
        flux = perturb_flux(flux, perturb)
    recovered = recover_skeleton(flux, params or RecoveryParams())
    return match_with_tolerance(recovered, skeleton, rho).f


def sweep_context_radius(skeleton, radii, params: RecoveryParams | None = None,
                         rho: float = DEFAULT_RHO) -> list[tuple[int, float]]:
    """Round-trip F-measure for each context radius in ``radii``."""
    radii = list(radii)
    if not radii:
        raise ValueError("radii must be non-empty")
    return [(int(r), round_trip_f(skeleton, r, params, rho)) for r in radii]


def sweep_to_csv(rows) -> str:
    return "r,f_measure\n" + "".join(f"{r},{f!r}\n" for r, f in rows)


def sweep_to_dict(rows) -> dict:
    return {"sweep": [{"r": r, "f_measure": f} for r, f in rows]}
