"""Hierarchical hypercube meshes of a space-time box.

A :class:`SpaceTimeMesh` stores only its leaves. Each leaf is a dyadic box
described by a refinement level and an integer index per axis; the last axis
is time. Element ids are level-offset Morton codes, so they are stable under
refinement of other elements and sort deterministically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .basis import BasisSpec, tabulate

__all__ = [
    "SpaceTimeDomain",
    "Element",
    "Face",
    "HangingNode",
    "SpaceTimeMesh",
    "NodeNumbering",
    "InvalidMarkError",
    "MeshNotBalancedError",
    "MeshCapacityError",
    "uniform_mesh",
    "refine",
    "balance_2to1",
    "enumerate_faces",
    "number_nodes",
    "find_hanging_nodes",
    "GAMMA_S",
    "GAMMA_0",
    "GAMMA_T",
    "INTERIOR",
]

INTERIOR = "interior"
GAMMA_S = "gamma_s"
GAMMA_0 = "gamma_0"
GAMMA_T = "gamma_T"

# node indices end up in scipy sparse index arrays
_MAX_NODES = 2**31 - 1
_MAX_LEVEL_BITS = 62


class InvalidMarkError(ValueError):
    pass


class MeshNotBalancedError(ValueError):
    pass


class MeshCapacityError(OverflowError):
    pass


@dataclass(frozen=True)
class SpaceTimeDomain:
    """Axis-aligned box ``U x (t0, T]``; the last axis is time.

    ``extent`` defaults to the unit interval on every spatial axis and
    ``(0, final_time)`` on the time axis. When ``extent`` is given its last
    interval overrides ``final_time``.
    """

    dim_space: int = 1
    extent: tuple | None = None
    final_time: float = 1.0

    def __post_init__(self):
        if self.dim_space not in (1, 2):
            raise ValueError(f"dim_space must be 1 or 2, got {self.dim_space}")
        if self.extent is None:
            ext = tuple((0.0, 1.0) for _ in range(self.dim_space)) + ((0.0, float(self.final_time)),)
        else:
            ext = tuple((float(lo), float(hi)) for lo, hi in self.extent)
        if len(ext) != self.dim_space + 1:
            raise ValueError(f"extent needs {self.dim_space + 1} intervals, got {len(ext)}")
        for lo, hi in ext:
            if not lo < hi:
                raise ValueError(f"degenerate interval ({lo}, {hi})")
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "final_time", ext[-1][1])

    @property
    def ndim(self) -> int:
        return self.dim_space + 1

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.extent])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.extent])

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def initial_time(self) -> float:
        return self.extent[-1][0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        slack = tol * self.lengths
        return np.all((points >= self.lower - slack) & (points <= self.upper + slack), axis=-1)


@dataclass(frozen=True)
class Element:
    id: int
    level: int
    index: tuple
    anchor: tuple
    size: tuple

    @property
    def h(self) -> float:
        return max(self.size)

    @property
    def diameter(self) -> float:
        return float(np.sqrt(np.sum(np.square(self.size))))

    @property
    def inradius_diameter(self) -> float:
        return min(self.size)

    @property
    def shape_regularity(self) -> float:
        """Ratio of diameter to inscribed-ball diameter; sqrt(ndim) for cubes."""
        return self.diameter / self.inradius_diameter

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    def contains(self, point, tol: float = 1e-12) -> bool:
        p = np.asarray(point, dtype=float)
        lo = np.asarray(self.anchor)
        hi = lo + np.asarray(self.size)
        return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))


@dataclass(frozen=True)
class Face:
    """A leaf face.

    For a conforming interior face ``neighbors`` holds the single element on
    the other side. For a hanging face ``owner`` is the coarse element and
    ``neighbors`` lists the ``2**dim_space`` fine elements. Boundary faces
    have no neighbors. ``orientation`` is the sign of the owner's outward
    normal along ``axis``.
    """

    owner: int
    neighbors: tuple
    axis: int
    orientation: int
    boundary_tag: str = INTERIOR

    @property
    def conformity(self) -> str:
        return "hanging" if len(self.neighbors) > 1 else "conforming"

    @property
    def neighbor(self) -> int | None:
        return self.neighbors[0] if len(self.neighbors) == 1 else None

    @property
    def is_boundary(self) -> bool:
        return self.boundary_tag != INTERIOR


@dataclass(frozen=True)
class HangingNode:
    node: int
    masters: tuple  # ((node id, weight), ...)

    @property
    def weight_sum(self) -> float:
        return float(sum(w for _, w in self.masters))


def _morton_ids(levels: np.ndarray, coords: np.ndarray) -> np.ndarray:
    n, ndim = coords.shape
    ids = np.zeros(n, dtype=np.int64)
    if n == 0:
        return ids
    maxl = int(levels.max())
    for b in range(maxl):
        for a in range(ndim):
            bit = (coords[:, a] >> b) & 1
            ids |= bit << (b * ndim + a)
    # offset by the number of boxes on all coarser levels
    offset = ((np.int64(1) << (levels * ndim)) - 1) // ((1 << ndim) - 1)
    return ids + offset


class SpaceTimeMesh:
    """Leaf set of a forest of dyadic boxes over a :class:`SpaceTimeDomain`.

    Instances are immutable; :func:`refine` and :func:`balance_2to1` return
    new meshes.
    """

    def __init__(self, domain: SpaceTimeDomain, levels, coords):
        levels = np.asarray(levels, dtype=np.int64).reshape(-1)
        coords = np.asarray(coords, dtype=np.int64).reshape(len(levels), domain.ndim)
        if len(levels) and int(levels.max()) * domain.ndim > _MAX_LEVEL_BITS:
            raise MeshCapacityError("refinement level exceeds the element id range")
        ids = _morton_ids(levels, coords)
        order = np.argsort(ids, kind="stable")
        self.domain = domain
        self.levels = levels[order]
        self.coords = coords[order]
        self.ids = ids[order]
        for arr in (self.levels, self.coords, self.ids):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.ids)

    def __repr__(self):
        return (f"SpaceTimeMesh(dim_space={self.domain.dim_space}, elements={len(self)}, "
                f"levels={self.min_level}..{self.max_level})")

    @property
    def ndim(self) -> int:
        return self.domain.ndim

    @property
    def dim_space(self) -> int:
        return self.domain.dim_space

    @property
    def n_elements(self) -> int:
        return len(self.ids)

    @property
    def max_level(self) -> int:
        return int(self.levels.max())

    @property
    def min_level(self) -> int:
        return int(self.levels.min())

    @cached_property
    def sizes(self) -> np.ndarray:
        """Per-axis element edge lengths, shape (n, ndim)."""
        return self.domain.lengths[None, :] / (2.0 ** self.levels)[:, None]

    @cached_property
    def anchors(self) -> np.ndarray:
        """Lower corners, shape (n, ndim)."""
        return self.domain.lower[None, :] + self.coords * self.sizes

    @cached_property
    def h(self) -> np.ndarray:
        """Element size h_K (largest edge length)."""
        return self.sizes.max(axis=1)

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.prod(self.sizes, axis=1)

    def element(self, pos: int) -> Element:
        return Element(
            id=int(self.ids[pos]),
            level=int(self.levels[pos]),
            index=tuple(int(c) for c in self.coords[pos]),
            anchor=tuple(float(x) for x in self.anchors[pos]),
            size=tuple(float(s) for s in self.sizes[pos]),
        )

    def elements(self) -> list[Element]:
        return [self.element(i) for i in range(len(self))]

    def positions_of(self, ids) -> np.ndarray:
        """Map element ids to row positions; unknown ids raise InvalidMarkError."""
        ids = np.asarray(ids if isinstance(ids, np.ndarray) else list(ids), dtype=np.int64)
        pos = np.clip(np.searchsorted(self.ids, ids), 0, len(self.ids) - 1)
        bad = self.ids[pos] != ids
        if np.any(bad):
            raise InvalidMarkError(f"ids are not leaves of this mesh: {ids[bad][:10].tolist()}")
        return pos

    @cached_property
    def _level_tables(self) -> dict:
        tables = {}
        for lev in np.unique(self.levels):
            sel = np.flatnonzero(self.levels == lev)
            keys = self._linear_key(self.coords[sel], int(lev))
            order = np.argsort(keys)
            tables[int(lev)] = (keys[order], sel[order])
        return tables

    def _linear_key(self, c: np.ndarray, level: int) -> np.ndarray:
        key = np.zeros(c.shape[:-1], dtype=np.int64)
        for a in range(self.ndim - 1, -1, -1):
            key = (key << level) | c[..., a]
        return key

    def _lookup(self, level: int, c: np.ndarray) -> np.ndarray:
        """Positions of leaves at ``level`` with integer index ``c``; -1 if absent."""
        out = np.full(c.shape[:-1], -1, dtype=np.int64)
        table = self._level_tables.get(level)
        if table is None:
            return out
        keys, pos = table
        inside = np.all((c >= 0) & (c < (1 << level)), axis=-1)
        k = self._linear_key(np.where(inside[..., None], c, 0), level)
        j = np.clip(np.searchsorted(keys, k), 0, len(keys) - 1)
        hit = inside & (keys[j] == k)
        out[hit] = pos[j[hit]]
        return out

    def locate_scaled(self, p: np.ndarray, width_at_level) -> np.ndarray:
        """Locate integer points. ``width_at_level(l)`` gives the element width
        at level ``l`` in the units of ``p``. Returns positions or -1."""
        p = np.asarray(p, dtype=np.int64)
        out = np.full(p.shape[:-1], -1, dtype=np.int64)
        for lev in sorted(self._level_tables):
            todo = out < 0
            if not np.any(todo):
                break
            c = np.floor_divide(p[todo], width_at_level(lev))
            found = self._lookup(lev, c)
            sub = out[todo]
            sub[found >= 0] = found[found >= 0]
            out[todo] = sub
        return out

    def locate(self, points) -> np.ndarray:
        """Leaf positions containing float points (closed box semantics).

        Points on shared faces resolve to the upper neighbor except on the
        domain's upper boundary. Points outside the domain raise ValueError.
        """
        points = np.asarray(points, dtype=float)
        if not np.all(self.domain.contains(points)):
            raise ValueError("point outside the space-time domain")
        m = self.max_level
        rel = (points - self.domain.lower) / self.domain.lengths
        scaled = np.floor(rel * (1 << m)).astype(np.int64)
        scaled = np.clip(scaled, 0, (1 << m) - 1)
        pos = self.locate_scaled(scaled, lambda lev: 1 << (m - lev))
        assert np.all(pos >= 0)
        return pos

    @cached_property
    def face_adjacency(self) -> dict:
        """Leaf face pairs and boundary faces as flat arrays.

        Interior entries (``lo``, ``hi``, ``axis``, ``small``) describe one
        (sub-)face each: ``lo`` lies below the face along ``axis``, ``hi``
        above, and ``small`` is the finer of the two, whose face is the
        integration region. Boundary entries (``b_elem``, ``b_axis``,
        ``b_side``) have side 0 for the lower and 1 for the upper wall.
        """
        n, ndim = len(self), self.ndim
        m = self.max_level + 1
        shift = (m - 1 - self.levels)[:, None]
        lo, hi, ax, small = [], [], [], []
        b_elem, b_axis, b_side = [], [], []
        for a in range(ndim):
            for s in (-1, 1):
                step = np.zeros(ndim, dtype=np.int64)
                step[a] = 2 * s
                centre = (2 * self.coords + 1 + step) << shift
                outside = (centre[:, a] < 0) | (centre[:, a] >= (1 << m))
                eb = np.flatnonzero(outside)
                b_elem.append(eb)
                b_axis.append(np.full(len(eb), a))
                b_side.append(np.full(len(eb), 0 if s < 0 else 1))
                ei = np.flatnonzero(~outside)
                nb = self.locate_scaled(centre[ei], lambda lev: 1 << (m - lev))
                nl = self.levels[nb]
                el = self.levels[ei]
                keep = (nl < el) | ((nl == el) & (s > 0))
                e, nbr = ei[keep], nb[keep]
                if s > 0:
                    lo.append(e)
                    hi.append(nbr)
                else:
                    lo.append(nbr)
                    hi.append(e)
                small.append(e)
                ax.append(np.full(len(e), a))
        cat = lambda xs: np.concatenate(xs).astype(np.int64)  # noqa: E731
        out = dict(lo=cat(lo), hi=cat(hi), axis=cat(ax), small=cat(small),
                   b_elem=cat(b_elem), b_axis=cat(b_axis), b_side=cat(b_side))
        for v in out.values():
            v.setflags(write=False)
        return out

    def max_level_jump(self) -> int:
        adj = self.face_adjacency
        if len(adj["lo"]) == 0:
            return 0
        return int(np.abs(self.levels[adj["lo"]] - self.levels[adj["hi"]]).max())

    def is_balanced(self) -> bool:
        return self.max_level_jump() <= 1

    def boundary_tag(self, axis: int, side: int) -> str:
        if axis == self.ndim - 1:
            return GAMMA_0 if side == 0 else GAMMA_T
        return GAMMA_S


def uniform_mesh(domain: SpaceTimeDomain, level: int) -> SpaceTimeMesh:
    """Uniform tiling with ``2**(level * ndim)`` congruent elements."""
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    ndim = domain.ndim
    if level * ndim > _MAX_LEVEL_BITS or (2**level + 1) ** ndim > _MAX_NODES:
        raise MeshCapacityError(f"level {level} overflows the node index range in {ndim} dimensions")
    n1 = 1 << level
    grids = np.meshgrid(*([np.arange(n1, dtype=np.int64)] * ndim), indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=-1)
    return SpaceTimeMesh(domain, np.full(len(coords), level), coords)


def _children(levels: np.ndarray, coords: np.ndarray, ndim: int):
    offsets = np.array(list(itertools.product((0, 1), repeat=ndim)), dtype=np.int64)[:, ::-1]
    child_coords = (2 * coords[:, None, :] + offsets[None, :, :]).reshape(-1, ndim)
    child_levels = np.repeat(levels + 1, len(offsets))
    return child_levels, child_coords


def refine(mesh: SpaceTimeMesh, marked: Iterable[int]) -> SpaceTimeMesh:
    """Replace each marked leaf by its ``2**ndim`` children."""
    marked = np.unique(np.asarray(list(marked), dtype=np.int64))
    if len(marked) == 0:
        return mesh
    pos = mesh.positions_of(marked)
    keep = np.ones(len(mesh), dtype=bool)
    keep[pos] = False
    cl, cc = _children(mesh.levels[pos], mesh.coords[pos], mesh.ndim)
    if int(cl.max()) * mesh.ndim > _MAX_LEVEL_BITS:
        raise MeshCapacityError("refinement level exceeds the element id range")
    levels = np.concatenate([mesh.levels[keep], cl])
    coords = np.concatenate([mesh.coords[keep], cc])
    return SpaceTimeMesh(mesh.domain, levels, coords)


def balance_2to1(mesh: SpaceTimeMesh) -> SpaceTimeMesh:
    """Refine until face-adjacent leaves differ by at most one level.

    Each pass refines every leaf that is more than one level coarser than
    some face neighbor; passes repeat until nothing is marked, which yields
    the smallest balanced refinement containing the input.
    """
    while True:
        adj = mesh.face_adjacency
        lo, hi = adj["lo"], adj["hi"]
        lv = mesh.levels
        coarse = np.concatenate([lo[lv[hi] - lv[lo] > 1], hi[lv[lo] - lv[hi] > 1]])
        if len(coarse) == 0:
            return mesh
        mesh = refine(mesh, mesh.ids[np.unique(coarse)])


def enumerate_faces(mesh: SpaceTimeMesh) -> list[Face]:
    """All leaf faces, each listed once, with boundary tags.

    Raises MeshNotBalancedError on meshes with level jumps above one.
    """
    if not mesh.is_balanced():
        raise MeshNotBalancedError("enumerate_faces requires a 2:1 balanced mesh")
    adj = mesh.face_adjacency
    ids, lv = mesh.ids, mesh.levels
    faces: list[Face] = []
    hanging: dict[tuple, list] = {}
    for lo, hi, a in zip(adj["lo"], adj["hi"], adj["axis"]):
        if lv[lo] == lv[hi]:
            faces.append(Face(int(ids[lo]), (int(ids[hi]),), int(a), 1))
        elif lv[lo] < lv[hi]:
            hanging.setdefault((int(lo), int(a), 1), []).append(int(ids[hi]))
        else:
            hanging.setdefault((int(hi), int(a), -1), []).append(int(ids[lo]))
    for (c, a, o), fine in sorted(hanging.items()):
        faces.append(Face(int(ids[c]), tuple(sorted(fine)), a, o))
    for e, a, s in zip(adj["b_elem"], adj["b_axis"], adj["b_side"]):
        faces.append(Face(int(ids[e]), (), int(a), 1 if s else -1, mesh.boundary_tag(int(a), int(s))))
    return faces


@dataclass(frozen=True)
class NodeNumbering:
    """Global Lagrange node numbering of a mesh for a given degree.

    ``node_index`` holds integer node coordinates in units of
    ``extent / scale`` per axis. Nodes are sorted with time slowest.
    """

    degree: int
    scale: int
    element_nodes: np.ndarray  # (n_elements, nb)
    node_index: np.ndarray  # (n_nodes, ndim)
    node_coords: np.ndarray  # (n_nodes, ndim)

    @property
    def n_nodes(self) -> int:
        return len(self.node_index)


def number_nodes(mesh: SpaceTimeMesh, degree: int) -> NodeNumbering:
    spec = BasisSpec(degree, mesh.ndim)
    lmax = mesh.max_level
    scale = degree << lmax
    if (scale + 1) ** mesh.ndim >= 2**63:
        raise MeshCapacityError("node coordinates overflow the index type")
    step = (1 << (lmax - mesh.levels))[:, None, None]
    local = spec.node_multi_indices()[None, :, :]
    pts = (mesh.coords[:, None, :] * degree + local) * step  # (n, nb, ndim)
    key = np.zeros(pts.shape[:-1], dtype=np.int64)
    for a in range(mesh.ndim - 1, -1, -1):
        key = key * (scale + 1) + pts[..., a]
    uniq, inverse = np.unique(key.ravel(), return_inverse=True)
    if len(uniq) > _MAX_NODES:
        raise MeshCapacityError("node count overflows the index type")
    element_nodes = inverse.reshape(key.shape).astype(np.int64)
    node_index = np.empty((len(uniq), mesh.ndim), dtype=np.int64)
    node_index[element_nodes.ravel()] = pts.reshape(-1, mesh.ndim)
    coords = mesh.domain.lower + node_index / scale * mesh.domain.lengths
    for arr in (element_nodes, node_index, coords):
        arr.setflags(write=False)
    return NodeNumbering(degree, scale, element_nodes, node_index, coords)


def hanging_constraints(mesh: SpaceTimeMesh, numbering: NodeNumbering):
    """Direct (unresolved) hanging-node constraints as flat arrays.

    A node is constrained when it lies in the closure of a leaf that does
    not carry it as one of its own nodes; the coarsest such leaf supplies
    the masters, weighted by its shape functions at the node.

    Returns ``(nodes, masters, weights)`` with ``masters``/``weights`` of
    shape (m, nb); zero weights mark unused entries.
    """
    k = numbering.degree
    nb = (k + 1) ** mesh.ndim
    if mesh.min_level == mesh.max_level:
        return np.zeros(0, np.int64), np.zeros((0, nb), np.int64), np.zeros((0, nb))
    lmax = mesh.max_level
    scale = numbering.scale
    P = numbering.node_index
    nn, ndim = P.shape
    orthants = np.array(list(itertools.product((-1, 1), repeat=ndim)), dtype=np.int64)
    best_level = np.full(nn, np.iinfo(np.int64).max)
    best_elem = np.full(nn, -1)
    for s in orthants:
        q = 2 * P + s
        inside = np.all((q >= 0) & (q < 2 * scale), axis=1)
        idx = np.flatnonzero(inside)
        e = mesh.locate_scaled(q[idx], lambda lev: 2 * k << (lmax - lev))
        lev = mesh.levels[e]
        spacing = (1 << (lmax - lev))[:, None]
        offset = P[idx] - mesh.coords[e] * k * spacing
        owns = np.all(offset % spacing == 0, axis=1)
        better = ~owns & (lev < best_level[idx])
        best_level[idx[better]] = lev[better]
        best_elem[idx[better]] = e[better]
    nodes = np.flatnonzero(best_elem >= 0)
    e = best_elem[nodes]
    spacing = (1 << (lmax - mesh.levels[e]))[:, None]
    xi = (P[nodes] - mesh.coords[e] * k * spacing) / (k * spacing)
    weights = tabulate(BasisSpec(k, ndim), xi, derivatives=0)[0]
    weights[np.abs(weights) < 1e-13] = 0.0
    masters = numbering.element_nodes[e]
    return nodes, masters, weights


def find_hanging_nodes(mesh: SpaceTimeMesh, degree: int, numbering: NodeNumbering | None = None) -> list[HangingNode]:
    """Hanging nodes of ``mesh`` for Lagrange degree ``degree``.

    Node ids refer to ``number_nodes(mesh, degree)``.
    """
    if not mesh.is_balanced():
        raise MeshNotBalancedError("find_hanging_nodes requires a 2:1 balanced mesh")
    if numbering is None:
        numbering = number_nodes(mesh, degree)
    nodes, masters, weights = hanging_constraints(mesh, numbering)
    out = []
    for n, ms, ws in zip(nodes, masters, weights):
        nz = ws != 0.0
        out.append(HangingNode(int(n), tuple((int(m), float(w)) for m, w in zip(ms[nz], ws[nz]))))
    return out
