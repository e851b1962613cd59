"""Triangle mesh container, validation, and file I/O (OFF / ASCII PLY / OBJ).

Vertex order is preserved exactly as stored in the file, so vertex
indices (and therefore landmark indices) are stable across load/save
round trips. All indices are 0-based internally.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import (
    DegenerateTriangleError,
    NotDiskTypeError,
    ParseError,
    TopologyError,
)
from .validation import check_points, check_triangles, check_vertex_field

logger = logging.getLogger(__name__)

# Scale-invariant zero-area threshold: triangles below
# DEGENERACY_FACTOR * (bounding-box diagonal)^2 are rejected.
DEGENERACY_FACTOR = 1e-14

FIELD_KINDS = (
    "gaussian_curvature",
    "mean_curvature",
    "voronoi_area",
    "weight",
    "potential",
    "uncertainty",
)


@dataclass(frozen=True)
class VertexField:
    """A scalar value per mesh vertex.

    Parameters
    ----------
    values : ndarray
        One float per vertex.
    kind : str
        One of ``FIELD_KINDS`` ("gaussian_curvature", "mean_curvature",
        "voronoi_area", "weight", "potential", "uncertainty").
    """

    values: np.ndarray
    kind: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind == "voronoi_area" and values.size and values.min() <= 0:
            raise ValueError("voronoi_area values must be strictly positive")
        if self.kind == "weight" and values.size and values.min() < 0:
            raise ValueError("weight values must be nonnegative")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)


def as_field_values(values, n_vertices, name="field"):
    """Accept a VertexField or array-like and return validated values."""
    if isinstance(values, VertexField):
        values = values.values
    return check_vertex_field(values, n_vertices, name=name)


class TriMesh:
    """An oriented 2-manifold triangle mesh, with or without boundary.

    Parameters
    ----------
    vertices : array_like
        (n, 3) float coordinates. Row order is preserved, indices are stable.
    triangles : array_like
        (m, 3) integer vertex indices, consistently oriented
        (counter-clockwise seen from outside).
    validate : bool, default=True
        Run manifoldness/orientation/connectivity checks and reject
        degenerate triangles. Disable only for meshes known valid.

    Attributes
    ----------
    vertices : ndarray, read-only (n, 3)
    triangles : ndarray, read-only (m, 3)
    edges : ndarray (e, 2)
        Undirected edges, each row sorted, lexicographically ordered.
    adjacency : csr_matrix
        Symmetric vertex adjacency (0/1 pattern).
    boundary_edges : ndarray
        Directed boundary edges (u, v) in face orientation.

    Raises
    ------
    TopologyError
        Non-manifold edges, inconsistent orientation, isolated vertices,
        or a disconnected vertex graph.
    DegenerateTriangleError
        A triangle with area below the scale-relative threshold.
    """

    def __init__(self, vertices, triangles, validate=True):
        self.vertices = check_points(vertices, "vertices")
        self.triangles = check_triangles(triangles, len(self.vertices), "triangles")
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        self._build_adjacency()
        if validate:
            self._validate()

    # ------------------------------------------------------------------
    # construction helpers

    def _build_adjacency(self):
        tris = self.triangles
        directed = np.concatenate(
            [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=0
        )
        self._directed_edges = directed
        und = np.sort(directed, axis=1)
        self.edges, self._edge_counts = np.unique(und, axis=0, return_counts=True)
        n = len(self.vertices)
        data = np.ones(len(self.edges), dtype=np.int8)
        adj = sparse.coo_matrix(
            (data, (self.edges[:, 0], self.edges[:, 1])), shape=(n, n)
        )
        self.adjacency = (adj + adj.T).tocsr()
        # boundary = directed edges whose reverse is absent
        key = directed[:, 0] * n + directed[:, 1]
        rkey = directed[:, 1] * n + directed[:, 0]
        self.boundary_edges = directed[~np.isin(key, rkey)]

    def _validate(self):
        n = len(self.vertices)
        if (self.triangles[:, 0] == self.triangles[:, 1]).any() or (
            self.triangles[:, 1] == self.triangles[:, 2]
        ).any() or (self.triangles[:, 0] == self.triangles[:, 2]).any():
            raise DegenerateTriangleError("triangle with repeated vertex index")
        areas = self.triangle_areas()
        floor = DEGENERACY_FACTOR * self.bbox_diagonal() ** 2
        if (areas <= floor).any():
            bad = int(np.argmax(areas <= floor))
            raise DegenerateTriangleError(
                f"triangle {bad} has area {areas[bad]:.3e} below threshold {floor:.3e}"
            )
        if self._edge_counts.max() > 2:
            raise TopologyError("non-manifold edge shared by more than two triangles")
        # consistent orientation: every directed edge appears at most once
        key = self._directed_edges[:, 0].astype(np.int64) * n + self._directed_edges[:, 1]
        if len(np.unique(key)) != len(key):
            raise TopologyError("inconsistently oriented triangles (repeated directed edge)")
        used = np.zeros(n, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise TopologyError(f"{int((~used).sum())} isolated vertices")
        n_comp, _ = csgraph.connected_components(self.adjacency, directed=False)
        if n_comp != 1:
            raise TopologyError(f"mesh has {n_comp} connected components")

    # ------------------------------------------------------------------
    # basic quantities

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def bbox_diagonal(self):
        """Length of the axis-aligned bounding box diagonal."""
        extent = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(extent))

    def corner_vectors(self):
        """Per-triangle corner points (p0, p1, p2), each (m, 3)."""
        v = self.vertices
        t = self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def face_normals(self, normalized=True):
        """Per-triangle normal vectors (cross product of edge vectors)."""
        p0, p1, p2 = self.corner_vectors()
        n = np.cross(p1 - p0, p2 - p0)
        if normalized:
            n = n / np.linalg.norm(n, axis=1, keepdims=True)
        return n

    def triangle_areas(self):
        """Per-triangle areas."""
        p0, p1, p2 = self.corner_vectors()
        return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)

    def total_area(self):
        """Total surface area."""
        return float(self.triangle_areas().sum())

    def vertex_normals(self):
        """Area-weighted average of incident face normals, unit length."""
        fn = self.face_normals(normalized=False)  # length = 2 * area
        vn = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(vn, self.triangles[:, k], fn)
        norms = np.linalg.norm(vn, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return vn / norms

    def euler_characteristic(self):
        """V - E + F."""
        return self.n_vertices - len(self.edges) + self.n_triangles

    def is_closed(self):
        """True if the mesh has no boundary edges."""
        return len(self.boundary_edges) == 0

    def boundary_loops(self):
        """Boundary loops as lists of vertex indices in orientation order.

        Returns
        -------
        list of ndarray
            One array of vertex indices per boundary loop, traversed
            along the boundary edge direction.
        """
        nxt = {int(u): int(v) for u, v in self.boundary_edges}
        loops = []
        seen = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            cur = nxt[start]
            while cur != start:
                if cur in seen or cur not in nxt:
                    raise TopologyError("boundary edges do not close into loops")
                loop.append(cur)
                seen.add(cur)
                cur = nxt[cur]
            loops.append(np.asarray(loop, dtype=np.int64))
        return loops

    def is_disk(self):
        """True for a connected genus-0 surface with exactly one boundary loop."""
        if self.is_closed():
            return False
        try:
            loops = self.boundary_loops()
        except TopologyError:
            return False
        return len(loops) == 1 and self.euler_characteristic() == 1

    def require_disk(self):
        """Raise NotDiskTypeError unless the mesh is disk-type."""
        if self.is_closed():
            raise NotDiskTypeError("mesh is closed (no boundary); expected disk-type")
        if not self.is_disk():
            raise NotDiskTypeError(
                "mesh is not disk-type (needs genus 0 and exactly one boundary loop)"
            )

    def scaled(self, factor):
        """Return a copy with all vertex coordinates multiplied by factor."""
        return TriMesh(self.vertices * float(factor), self.triangles, validate=False)

    def normalized_to_unit_area(self):
        """Return a copy uniformly scaled to total surface area 1."""
        return self.scaled(1.0 / np.sqrt(self.total_area()))

    def subdivided_midpoint(self):
        """One round of 1-to-4 midpoint subdivision (no smoothing).

        New vertices are appended after the originals, so indices of
        original vertices are preserved.
        """
        v = self.vertices
        t = self.triangles
        edge_index = {tuple(e): i for i, e in enumerate(map(tuple, self.edges))}
        mids = 0.5 * (v[self.edges[:, 0]] + v[self.edges[:, 1]])
        offset = len(v)

        def mid(a, b):
            return offset + edge_index[(a, b) if a < b else (b, a)]

        new_tris = []
        for a, b, c in t:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        return TriMesh(
            np.vstack([v, mids]), np.asarray(new_tris, dtype=np.int64), validate=False
        )

    def __repr__(self):
        return f"TriMesh({self.n_vertices} vertices, {self.n_triangles} triangles)"


# ----------------------------------------------------------------------
# file I/O


def _tokenize(text):
    """Whitespace tokens with '#'-to-end-of-line comments removed."""
    tokens = []
    for line in text.splitlines():
        hash_pos = line.find("#")
        if hash_pos >= 0:
            line = line[:hash_pos]
        tokens.extend(line.split())
    return tokens


class _TokenReader:
    def __init__(self, tokens, path):
        self.tokens = tokens
        self.pos = 0
        self.path = path

    def next(self, what="token"):
        if self.pos >= len(self.tokens):
            raise ParseError(f"{self.path}: unexpected end of file, expected {what}")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def next_int(self, what="integer"):
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"{self.path}: expected {what}, got {tok!r}") from None

    def next_float(self, what="number"):
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"{self.path}: expected {what}, got {tok!r}") from None


def _read_faces(reader, n_faces, n_vertices, counted=True):
    faces = np.empty((n_faces, 3), dtype=np.int64)
    for i in range(n_faces):
        if counted:
            k = reader.next_int("face vertex count")
            if k != 3:
                raise ParseError(
                    f"{reader.path}: face {i} has {k} vertices; only triangles supported"
                )
        for j in range(3):
            idx = reader.next_int("vertex index")
            if idx < 0 or idx >= n_vertices:
                raise ParseError(
                    f"{reader.path}: face {i} references vertex {idx} of {n_vertices}"
                )
            faces[i, j] = idx
    return faces


def _load_off(text, path):
    reader = _TokenReader(_tokenize(text), path)
    magic = reader.next("OFF header")
    if magic.upper() != "OFF":
        raise ParseError(f"{path}: missing OFF header (got {magic!r})")
    nv = reader.next_int("vertex count")
    nf = reader.next_int("face count")
    reader.next_int("edge count")
    verts = np.empty((nv, 3))
    for i in range(nv):
        verts[i] = [reader.next_float("coordinate") for _ in range(3)]
    faces = _read_faces(reader, nf, nv)
    return verts, faces


def _load_ply(text, path):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}: missing 'ply' magic line")
    n_vert = n_face = None
    vertex_props = []
    in_element = None
    body_start = None
    for i, raw in enumerate(lines[1:], start=1):
        parts = raw.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] != "ascii":
                raise ParseError(f"{path}: only ascii PLY is supported")
        elif parts[0] == "element":
            if len(parts) != 3:
                raise ParseError(f"{path}: malformed element line {raw!r}")
            in_element = parts[1]
            if parts[1] == "vertex":
                n_vert = int(parts[2])
            elif parts[1] == "face":
                n_face = int(parts[2])
        elif parts[0] == "property":
            if in_element == "vertex" and parts[1] != "list":
                vertex_props.append(parts[-1])
        elif parts[0] == "end_header":
            body_start = i + 1
            break
    if body_start is None or n_vert is None or n_face is None:
        raise ParseError(f"{path}: incomplete PLY header")
    try:
        ix, iy, iz = (vertex_props.index(c) for c in ("x", "y", "z"))
    except ValueError:
        raise ParseError(f"{path}: vertex element lacks x/y/z properties") from None
    body = [ln.split() for ln in lines[body_start:] if ln.split()]
    if len(body) < n_vert + n_face:
        raise ParseError(f"{path}: expected {n_vert + n_face} body lines, got {len(body)}")
    verts = np.empty((n_vert, 3))
    for i in range(n_vert):
        row = body[i]
        if len(row) < len(vertex_props):
            raise ParseError(f"{path}: vertex line {i} too short")
        try:
            verts[i] = float(row[ix]), float(row[iy]), float(row[iz])
        except ValueError:
            raise ParseError(f"{path}: bad vertex coordinates on line {i}") from None
    faces = np.empty((n_face, 3), dtype=np.int64)
    for i in range(n_face):
        row = body[n_vert + i]
        try:
            k = int(row[0])
            idx = [int(x) for x in row[1 : 1 + k]]
        except (ValueError, IndexError):
            raise ParseError(f"{path}: bad face line {i}") from None
        if k != 3:
            raise ParseError(f"{path}: face {i} has {k} vertices; only triangles supported")
        if min(idx) < 0 or max(idx) >= n_vert:
            raise ParseError(f"{path}: face {i} references vertex {max(idx)} of {n_vert}")
        faces[i] = idx
    return verts, faces


def _load_obj(text, path):
    verts = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split("#")[0].split()
        if not parts:
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise ParseError(f"{path}:{lineno}: vertex line needs 3 coordinates")
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad vertex coordinates") from None
        elif parts[0] == "f":
            if len(parts) != 4:
                raise ParseError(
                    f"{path}:{lineno}: face has {len(parts) - 1} vertices; "
                    "only triangles supported"
                )
            idx = []
            for spec in parts[1:]:
                tok = spec.split("/")[0]
                try:
                    i = int(tok)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad face index {spec!r}") from None
                idx.append(i - 1 if i > 0 else len(verts) + i)
            faces.append(idx)
        # other record types (vn, vt, usemtl, ...) are ignored
    if not verts or not faces:
        raise ParseError(f"{path}: no v/f records found")
    faces = np.asarray(faces, dtype=np.int64)
    if faces.min() < 0 or faces.max() >= len(verts):
        raise ParseError(f"{path}: face references vertex {int(faces.max())} of {len(verts)}")
    return np.asarray(verts), faces


_LOADERS = {"off": _load_off, "ply": _load_ply, "obj": _load_obj}


def load_mesh(path, fmt=None, validate=True):
    """Load a triangle mesh from an OFF, ASCII PLY, or OBJ file.

    Parameters
    ----------
    path : str or Path
        File to read.
    fmt : {"off", "ply", "obj"}, optional
        File format; inferred from the extension (or file magic) if omitted.
    validate : bool, default=True
        Run full topology validation after parsing.

    Returns
    -------
    TriMesh

    Raises
    ------
    ParseError
        Malformed file or unsupported dialect.
    TopologyError
        Validation failures (non-manifold, isolated vertices, ...).
    """
    path = str(path)
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        text = fh.read()
    if fmt is None:
        ext = path.rsplit(".", 1)[-1].lower() if "." in path else ""
        if ext in _LOADERS:
            fmt = ext
        else:
            head = text.lstrip()[:16].lower()
            if head.startswith("off"):
                fmt = "off"
            elif head.startswith("ply"):
                fmt = "ply"
            else:
                fmt = "obj"
    fmt = fmt.lower()
    if fmt not in _LOADERS:
        raise ParseError(f"{path}: unsupported format {fmt!r}")
    verts, faces = _LOADERS[fmt](text, path)
    try:
        return TriMesh(verts, faces, validate=validate)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_off(path, mesh):
    """Write a mesh as an ASCII OFF file (vertex order preserved)."""
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.edges)}\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")


def snap_points_to_vertices(mesh, points):
    """Snap arbitrary 3D points to their nearest mesh vertices.

    Returns
    -------
    indices : ndarray of int
        Nearest vertex per point.
    distances : ndarray of float
        Snap distance per point (recorded so callers can report it).
    """
    from scipy.spatial import cKDTree

    points = check_points(points, "points")
    tree = cKDTree(mesh.vertices)
    distances, indices = tree.query(points)
    return indices.astype(np.int64), distances
