"""Synthetic test surfaces.

Deterministic generators for the shapes used throughout the test suite
and the documentation examples: platonic solids, subdivided spheres,
bumpy spheres, planar patches, open cylinders, and tooth-like disk
surfaces with tunable cusps.
"""

import numpy as np

from .mesh import TriMesh

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def tetrahedron(edge=1.0):
    """Regular tetrahedron with the given edge length."""
    v = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
    )
    v *= edge / np.sqrt(8.0)
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriMesh(v, f)


def icosahedron(radius=1.0):
    """Regular icosahedron inscribed in a sphere of the given radius."""
    p = GOLDEN
    v = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=float,
    )
    v *= radius / np.linalg.norm(v[0])
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return TriMesh(v, f)


def icosphere(subdivisions=2, radius=1.0):
    """Icosahedron subdivided ``subdivisions`` times, vertices on the sphere.

    Vertex counts: 12, 42, 162, 642, 2562 for 0..4 subdivisions.
    """
    mesh = icosahedron(radius=1.0)
    for _ in range(subdivisions):
        mesh = mesh.subdivided_midpoint()
        v = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
        mesh = TriMesh(v, mesh.triangles, validate=False)
    return TriMesh(mesh.vertices * radius, mesh.triangles)


def bumpy_sphere(subdivisions=3, n_bumps=12, height=0.25, width=0.35, seed=None):
    """Sphere with radial Gaussian bumps.

    Bump centers sit at the 12 icosahedron vertex directions by default
    (``n_bumps <= 12``); with a seed, directions are drawn uniformly at
    random instead.

    Returns
    -------
    mesh : TriMesh
    bump_vertices : ndarray of int
        Index of the vertex nearest each bump center.
    """
    base = icosphere(subdivisions)
    if seed is None:
        dirs = icosahedron().vertices
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        centers = dirs[:n_bumps]
    else:
        rng = np.random.default_rng(seed)
        centers = rng.normal(size=(n_bumps, 3))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    unit = base.vertices
    angles = np.arccos(np.clip(unit @ centers.T, -1.0, 1.0))  # (n, n_bumps)
    r = 1.0 + height * np.exp(-(angles**2) / (2.0 * width**2)).sum(axis=1)
    mesh = TriMesh(unit * r[:, None], base.triangles)
    bump_vertices = np.argmin(angles, axis=0).astype(np.int64)
    return mesh, bump_vertices


def strip(n=10, width=1.0):
    """Flat strip of n quads split into triangles along +x."""
    top = np.column_stack([np.arange(n + 1.0), np.full(n + 1, width), np.zeros(n + 1)])
    bot = np.column_stack([np.arange(n + 1.0), np.zeros(n + 1), np.zeros(n + 1)])
    v = np.vstack([bot, top])
    f = []
    for i in range(n):
        a, b = i, i + 1
        c, d = n + 1 + i, n + 2 + i
        f += [[a, b, d], [a, d, c]]
    return TriMesh(v, np.asarray(f))


def grid_patch(nx=10, ny=10, lx=1.0, ly=1.0):
    """Planar rectangle triangulated on a regular grid (alternating diagonals)."""
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    v = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    f = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + nx + 1
            d = c + 1
            if (i + j) % 2 == 0:
                f += [[a, b, d], [a, d, c]]
            else:
                f += [[a, b, c], [b, d, c]]
    return TriMesh(v, np.asarray(f))


def open_cylinder(radius=1.0, height=2.0, n_around=24, n_along=8):
    """Open cylinder (two boundary loops), axis along z."""
    thetas = np.linspace(0.0, 2.0 * np.pi, n_around, endpoint=False)
    zs = np.linspace(0.0, height, n_along + 1)
    v = []
    for z in zs:
        for th in thetas:
            v.append([radius * np.cos(th), radius * np.sin(th), z])
    f = []
    for j in range(n_along):
        for i in range(n_around):
            a = j * n_around + i
            b = j * n_around + (i + 1) % n_around
            c = a + n_around
            d = b + n_around
            f += [[a, b, d], [a, d, c]]
    return TriMesh(np.asarray(v), np.asarray(f))


def disk_mesh(n_rings=10, radius=1.0):
    """Unit-ish disk triangulated by concentric rings around a center vertex."""
    verts = [[0.0, 0.0, 0.0]]
    ring_start = [0]
    for r in range(1, n_rings + 1):
        k = 6 * r
        ring_start.append(len(verts))
        rr = radius * r / n_rings
        for s in range(k):
            th = 2.0 * np.pi * s / k
            verts.append([rr * np.cos(th), rr * np.sin(th), 0.0])
    faces = []
    # innermost fan
    for s in range(6):
        faces.append([0, 1 + s, 1 + (s + 1) % 6])
    # ring-to-ring strips: ring r has 6r vertices; connect to ring r+1 (6r+6)
    for r in range(1, n_rings):
        inner, outer = ring_start[r], ring_start[r + 1]
        ni, no = 6 * r, 6 * (r + 1)
        # walk both rings by angle, stitching the shorter gaps
        i = j = 0
        while i < ni or j < no:
            ang_i = 2.0 * np.pi * (i + 1) / ni
            ang_j = 2.0 * np.pi * (j + 1) / no
            vi = inner + i % ni
            vo = outer + j % no
            if j < no and (i == ni or ang_j <= ang_i):
                faces.append([vi, vo, outer + (j + 1) % no])
                j += 1
            else:
                faces.append([vi, vo, inner + (i + 1) % ni])
                i += 1
    return TriMesh(np.asarray(verts), np.asarray(faces))


def hemisphere(n_rings=12, radius=1.0):
    """Spherical cap (disk-type) lifted from a planar disk mesh."""
    disk = disk_mesh(n_rings=n_rings, radius=radius * 0.98)
    x, y = disk.vertices[:, 0], disk.vertices[:, 1]
    rr = np.minimum((x**2 + y**2) / radius**2, 1.0 - 1e-12)
    z = radius * np.sqrt(1.0 - rr)
    v = np.column_stack([x, y, z])
    return TriMesh(v, disk.triangles)


def molar_like(
    n_rings=14,
    n_cusps=4,
    cusp_height=0.45,
    cusp_width=0.28,
    cusp_radius=0.55,
    dome=0.35,
    stretch=1.0,
    noise=0.0,
    seed=0,
):
    """Tooth-crown-like disk surface: a dome with Gaussian cusps.

    A planar disk is lifted by a paraboloid dome plus ``n_cusps``
    Gaussian bumps placed evenly on a circle, optionally stretched
    along x and perturbed by smooth random noise. The result is a
    connected disk-type surface suitable for the full registration
    pipeline.

    Returns
    -------
    mesh : TriMesh
    cusp_vertices : ndarray of int
        Index of the vertex nearest each cusp center.
    """
    rng = np.random.default_rng(seed)
    disk = disk_mesh(n_rings=n_rings, radius=1.0)
    x, y = disk.vertices[:, 0], disk.vertices[:, 1]
    r2 = x**2 + y**2
    z = dome * (1.0 - r2)
    phases = 2.0 * np.pi * (np.arange(n_cusps) + 0.25) / n_cusps
    centers = cusp_radius * np.column_stack([np.cos(phases), np.sin(phases)])
    # distinct cusp heights/widths break the rotational symmetry, like
    # the uneven cusps of a real tooth crown
    height_mod = np.resize([1.0, 0.78, 1.15, 0.68, 0.9], n_cusps)
    width_mod = np.resize([1.0, 1.12, 0.9, 1.06, 0.95], n_cusps)
    for c, (cx, cy) in enumerate(centers):
        d2 = (x - cx) ** 2 + (y - cy) ** 2
        z = z + cusp_height * height_mod[c] * np.exp(
            -d2 / (2.0 * (cusp_width * width_mod[c]) ** 2)
        )
    if noise > 0:
        # smooth low-frequency displacement
        freq = rng.uniform(0.5, 1.5, size=(3, 2))
        phase = rng.uniform(0, 2 * np.pi, size=3)
        for k in range(3):
            z = z + noise * np.sin(freq[k, 0] * np.pi * x + freq[k, 1] * np.pi * y + phase[k])
    v = np.column_stack([stretch * x, y, z])
    mesh = TriMesh(v, disk.triangles)
    d2c = (x[:, None] - centers[:, 0]) ** 2 + (y[:, None] - centers[:, 1]) ** 2
    cusp_vertices = np.argmin(d2c, axis=0).astype(np.int64)
    return mesh, cusp_vertices


def rigid_motion(mesh, angles=(0.3, -0.2, 0.5), translation=(0.7, -1.1, 0.4)):
    """Apply a fixed rigid motion (XYZ Euler rotation + translation)."""
    ax, ay, az = angles
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    rot = rz @ ry @ rx
    v = mesh.vertices @ rot.T + np.asarray(translation)
    return TriMesh(v, mesh.triangles, validate=False)
