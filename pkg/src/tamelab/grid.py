"""Rectangular-lattice domains with interior/boundary structure.

A :class:`GridDomain` is a tensor grid in 1-3 dimensions. Nodes carry an
``active`` flag (inside the domain), and active nodes adjacent to the
complement form the boundary set. Boundary nodes are tagged either
``neumann`` (reflecting) or ``dirichlet`` (absorbing).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedDomain, EmptyDomain

BC_NONE = 0
BC_NEUMANN = 1
BC_DIRICHLET = 2

_SIDE_NAMES = {0: ("x-", "x+"), 1: ("y-", "y+"), 2: ("z-", "z+")}


@dataclass
class GridDomain:
    shape: tuple
    spacing: tuple
    origin: tuple
    periodic: tuple
    active_mask: np.ndarray          # bool, lattice shape
    geometry_tag: str = "custom"

    # derived, filled by _finalize
    active_ids: np.ndarray = field(default=None, repr=False)    # flat lattice ids of active nodes
    lattice_to_active: np.ndarray = field(default=None, repr=False)
    boundary_set: np.ndarray = field(default=None, repr=False)  # active-node indices
    exposed_faces: np.ndarray = field(default=None, repr=False)  # per active node, per-axis 1/h sum
    face_count: np.ndarray = field(default=None, repr=False)
    bc: np.ndarray = field(default=None, repr=False)            # per active node, BC_* tag

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_active(self) -> int:
        return self.active_ids.size

    @property
    def node_mass(self) -> float:
        return float(np.prod(self.spacing))

    def coords(self) -> np.ndarray:
        """Physical coordinates of active nodes, shape (n_active, dim)."""
        unraveled = np.unravel_index(self.active_ids, self.shape)
        cols = [self.origin[ax] + unraveled[ax] * self.spacing[ax] for ax in range(self.dim)]
        return np.stack(cols, axis=1)

    def neighbor_table(self):
        """Pairs (i, j) of adjacent active nodes (active indexing) plus, per
        active node, the per-axis inverse-spacing sum of exposed faces."""
        return self._pairs

    def validate(self) -> None:
        if self.n_active == 0:
            raise EmptyDomain("active mask selects no nodes")
        i, j = self._pairs
        n = self.n_active
        adj = sp.csr_matrix((np.ones(i.size), (i, j)), shape=(n, n))
        ncomp, _ = connected_components(adj + adj.T, directed=False)
        if ncomp != 1:
            raise DisconnectedDomain(f"active set splits into {ncomp} components")
        if self.boundary_set.size:
            tags = self.bc[self.boundary_set]
            assert np.all((tags == BC_NEUMANN) | (tags == BC_DIRICHLET))
        lone = np.asarray((adj + adj.T).sum(axis=1)).ravel() == 0
        if lone.any() and n > 1:
            raise DisconnectedDomain("active node without active neighbor")


def _finalize(dom: GridDomain, bc_spec) -> GridDomain:
    shape, dim = dom.shape, dom.dim
    mask = dom.active_mask
    flat = mask.ravel()
    dom.active_ids = np.flatnonzero(flat)
    dom.lattice_to_active = np.full(flat.size, -1, dtype=np.int64)
    dom.lattice_to_active[dom.active_ids] = np.arange(dom.active_ids.size)

    lattice = np.arange(flat.size).reshape(shape)
    pair_i, pair_j = [], []
    face_inv_h = np.zeros(flat.size)
    face_count = np.zeros(flat.size)
    side_mask = {}
    for ax in range(dim):
        h = dom.spacing[ax]
        for sgn in (-1, +1):
            # neighbor existence in direction sgn along ax
            nb = np.roll(mask, -sgn, axis=ax)
            if not dom.periodic[ax]:
                edge = [slice(None)] * dim
                edge[ax] = -1 if sgn > 0 else 0
                nb = nb.copy()
                nb[tuple(edge)] = False
            exposed = mask & ~nb
            face_inv_h += exposed.ravel() / h
            face_count += exposed.ravel()
            name = _SIDE_NAMES[ax][0 if sgn < 0 else 1]
            side_mask[name] = exposed
            if sgn > 0:  # record each undirected edge once
                src = mask & nb
                a = lattice[src]
                b = np.roll(lattice, -1, axis=ax)[src]
                pair_i.append(a.ravel())
                pair_j.append(b.ravel())

    if pair_i:
        i = dom.lattice_to_active[np.concatenate(pair_i)]
        j = dom.lattice_to_active[np.concatenate(pair_j)]
    else:
        i = j = np.zeros(0, dtype=np.int64)
    dom._pairs = (i, j)
    dom._edge_axis = None  # axis uniform spacing handled via weights in generator

    exposed_active = face_count[dom.active_ids] > 0
    dom.boundary_set = np.flatnonzero(exposed_active)
    dom.exposed_faces = face_inv_h[dom.active_ids]
    dom.face_count = face_count[dom.active_ids]

    bc = np.full(dom.n_active, BC_NONE, dtype=np.int8)
    if isinstance(bc_spec, str):
        tag = BC_NEUMANN if bc_spec.lower() == "neumann" else BC_DIRICHLET
        bc[dom.boundary_set] = tag
    elif isinstance(bc_spec, dict):
        bc[dom.boundary_set] = BC_NEUMANN
        for name, value in bc_spec.items():
            if name not in side_mask:
                raise ValueError(f"unknown side {name!r}")
            if value.lower() == "dirichlet":
                ids = dom.lattice_to_active[side_mask[name].ravel() & flat]
                bc[ids[ids >= 0]] = BC_DIRICHLET
    elif bc_spec is not None:
        arr = np.asarray(bc_spec, dtype=np.int8)
        if arr.shape != (dom.n_active,):
            raise ValueError("per-node bc array has wrong length")
        bc = arr
    dom.bc = bc
    dom.validate()
    return dom


def _edge_axes(dom: GridDomain):
    """Recompute the lattice axis of every stored edge (needed for weights
    when spacings differ per axis)."""
    shape, dim, mask = dom.shape, dom.dim, dom.active_mask
    lattice = np.arange(mask.size).reshape(shape)
    axes = []
    for ax in range(dim):
        nb = np.roll(mask, -1, axis=ax)
        if not dom.periodic[ax]:
            edge = [slice(None)] * dim
            edge[ax] = -1
            nb = nb.copy()
            nb[tuple(edge)] = False
        src = mask & nb
        axes.append(np.full(int(src.sum()), ax, dtype=np.int8))
    return np.concatenate(axes) if axes else np.zeros(0, dtype=np.int8)


# ---------------------------------------------------------------------------
# geometry factories

def _mask_domain(mask, spacing, origin, periodic, bc, tag) -> GridDomain:
    mask = np.asarray(mask, dtype=bool)
    dim = mask.ndim
    spacing = tuple(float(s) for s in (spacing if np.iterable(spacing) else [spacing] * dim))
    origin = tuple(float(o) for o in (origin if np.iterable(origin) else [origin] * dim))
    periodic = tuple(bool(p) for p in (periodic if np.iterable(periodic) else [periodic] * dim))
    dom = GridDomain(shape=mask.shape, spacing=spacing, origin=origin,
                     periodic=periodic, active_mask=mask, geometry_tag=tag)
    return _finalize(dom, bc)


def build_grid(geometry: str = "box", resolution=None, bc="neumann", **params) -> GridDomain:
    """Construct one of the named lattice geometries.

    geometry: box | interval | torus | halfplane-strip | disk | cusp |
              bumped-halfplane | custom (params: mask, spacing, origin,
              periodic).
    resolution: nodes per axis (int or per-axis tuple), >= 3.
    """
    geometry = geometry.lower()
    if geometry == "custom":
        return _mask_domain(params["mask"], params.get("spacing", 1.0),
                            params.get("origin", 0.0), params.get("periodic", False),
                            bc, params.get("tag", "custom"))

    if resolution is None:
        raise ValueError("resolution is required")
    res = tuple(int(r) for r in (resolution if np.iterable(resolution) else [resolution]))
    if any(r < 3 for r in res):
        raise ValueError("resolution must be >= 3 per axis")

    if geometry in ("box", "interval"):
        extent = params.get("extent", 1.0)
        ext = tuple(float(e) for e in (extent if np.iterable(extent) else [extent] * len(res)))
        if geometry == "interval" and len(res) != 1:
            raise ValueError("interval is one-dimensional")
        spacing = tuple(e / (r - 1) for e, r in zip(ext, res))
        mask = np.ones(res, dtype=bool)
        return _mask_domain(mask, spacing, params.get("origin", 0.0), False, bc, geometry)

    if geometry == "torus":
        extent = params.get("extent", 1.0)
        ext = tuple(float(e) for e in (extent if np.iterable(extent) else [extent] * len(res)))
        spacing = tuple(e / r for e, r in zip(ext, res))
        mask = np.ones(res, dtype=bool)
        return _mask_domain(mask, spacing, 0.0, True, bc, "torus")

    if geometry == "halfplane-strip":
        # periodic in x, boundary rows at bottom (y=0) and top
        nx, ny = res if len(res) == 2 else (res[0], res[0])
        width = float(params.get("width", 1.0))
        height = float(params.get("height", 0.75))
        hx = width / nx
        hy = height / (ny - 1)
        mask = np.ones((nx, ny), dtype=bool)
        return _mask_domain(mask, (hx, hy), (0.0, 0.0), (True, False), bc, "halfplane-strip")

    if geometry == "disk":
        n = res[0]
        radius = float(params.get("radius", 0.48))
        h = 1.0 / n
        c = 0.5 * (n - 1) * h
        x = np.arange(n) * h
        X, Y = np.meshgrid(x, x, indexing="ij")
        mask = (X - c) ** 2 + (Y - c) ** 2 < radius ** 2
        return _mask_domain(mask, h, 0.0, False, bc, "disk")

    if geometry == "cusp":
        return cusp_domain(res[0], alpha=float(params.get("alpha", 0.5)), bc=bc,
                           half_width=float(params.get("half_width", 1.2)),
                           z_min=float(params.get("z_min", -0.4)),
                           z_max=float(params.get("z_max", 1.2)))

    if geometry == "bumped-halfplane":
        return bumped_halfplane(res[0], r=float(params.get("r", 0.25)),
                                depth=float(params.get("depth", 0.1)),
                                width=float(params.get("width", 1.0)),
                                height=float(params.get("height", 0.7)), bc=bc)

    raise ValueError(f"unknown geometry {geometry!r}")


def cusp_profile(r, alpha):
    """Revolution profile: identity minus a sublinear correction on [0, 1],
    frozen at its r=1 value far out."""
    r = np.asarray(r, dtype=float)
    rr = np.minimum(r, 2.0)
    return rr - rr ** (2.0 - alpha)


def cusp_curvature(r, alpha):
    """Smallest principal curvature of the revolved profile at radius r."""
    r = np.maximum(np.asarray(r, dtype=float), 1e-12)
    phi1 = 1.0 - (2.0 - alpha) * r ** (1.0 - alpha)
    phi2 = -(2.0 - alpha) * (1.0 - alpha) * r ** (-alpha)
    lam = np.sqrt(1.0 + phi1 ** 2)
    return np.where(r <= 2.0, phi2 / lam ** 3, 0.0)


def cusp_domain(resolution: int, alpha: float = 0.5, bc="neumann",
                half_width: float = 1.2, z_min: float = -0.4, z_max: float = 1.2) -> GridDomain:
    """3D solid of revolution above z = r - r^(2-alpha)."""
    h = 2.0 * half_width / resolution
    x = -half_width + h * (np.arange(resolution) + 0.5)
    nz = int(round((z_max - z_min) / h))
    z = z_min + h * (np.arange(nz) + 0.5)
    X, Y, Z = np.meshgrid(x, x, z, indexing="ij")
    R = np.sqrt(X ** 2 + Y ** 2)
    mask = Z > cusp_profile(R, alpha)
    dom = _mask_domain(mask, h, (x[0], x[0], z[0]), False, bc, "cusp")
    dom.params = {"alpha": alpha}
    return dom


def bump_profile(t, r, depth):
    """Single smooth dip of depth 2*depth supported on |t| <= r."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) <= r
    return np.where(inside, depth * (-1.0 - np.cos(np.pi * t / r)), 0.0)


def bump_curvature(t, r, depth):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) <= r
    f1 = np.where(inside, depth * np.pi / r * np.sin(np.pi * t / r), 0.0)
    f2 = np.where(inside, depth * (np.pi / r) ** 2 * np.cos(np.pi * t / r), 0.0)
    return f2 / (1.0 + f1 ** 2) ** 1.5


def bumped_halfplane(resolution: int, r: float = 0.25, depth: float = 0.1,
                     width: float = 1.0, height: float = 0.7, bc="neumann") -> GridDomain:
    """Half-plane strip (periodic in x) with one dip per period in the floor."""
    hx = width / resolution
    ny = int(round((height + 2.2 * depth) / hx)) + 1
    x = hx * np.arange(resolution)
    y = -2.2 * depth + hx * np.arange(ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    floor = bump_profile(X - 0.5 * width, r, depth)
    mask = Y > floor
    dom = _mask_domain(mask, hx, (0.0, y[0]), (True, False), bc, "bumped-halfplane")
    dom.params = {"r": r, "depth": depth, "width": width}
    return dom


def domain_from_config(cfg: dict) -> GridDomain:
    """Build a domain from a parsed config table (keys: geometry, resolution,
    bc, plus geometry parameters)."""
    cfg = dict(cfg)
    geometry = cfg.pop("geometry", "box")
    resolution = cfg.pop("resolution", None)
    bc = cfg.pop("bc", "neumann")
    return build_grid(geometry, resolution=resolution, bc=bc, **cfg)


def write_pgm(dom: GridDomain, path, z_index: int | None = None) -> None:
    """Export the active mask as a binary portable grey-map (debug aid).

    Interior nodes are white, Neumann boundary mid-grey, Dirichlet boundary
    dark grey, inactive black. 3D masks are sliced at z_index (middle slice
    by default).
    """
    levels = np.zeros(dom.n_active, dtype=np.uint8)
    levels[:] = 255
    levels[dom.boundary_set] = np.where(
        dom.bc[dom.boundary_set] == BC_DIRICHLET, 90, 180).astype(np.uint8)
    img = np.zeros(int(np.prod(dom.shape)), dtype=np.uint8)
    img[dom.active_ids] = levels
    img = img.reshape(dom.shape)
    if dom.dim == 3:
        img = img[:, :, dom.shape[2] // 2 if z_index is None else z_index]
    if dom.dim == 1:
        img = img[None, :]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
