"""Quadric edge-collapse decimation for triangle meshes."""

import heapq

import numpy as np

# reject collapses whose optimal point lands absurdly far from the edge,
# which happens when the pooled quadric is near-singular along a crease
MAX_JUMP_FACTOR = 10.0


def _vertex_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted plane quadrics accumulated onto vertices, (V, 4, 4)."""
    v = vertices[faces]
    cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    norm = np.linalg.norm(cross, axis=1)
    ok = norm > 1e-300
    n = np.zeros_like(cross)
    n[ok] = cross[ok] / norm[ok, None]
    d = -np.einsum("fi,fi->f", n, v[:, 0])
    plane = np.concatenate([n, d[:, None]], axis=1)
    k = 0.5 * norm[:, None, None] * plane[:, :, None] * plane[:, None, :]
    quadrics = np.zeros((len(vertices), 4, 4))
    for c in range(3):
        np.add.at(quadrics, faces[:, c], k)
    return quadrics


def _edge_target(q: np.ndarray, pa: np.ndarray, pb: np.ndarray):
    """Optimal collapse point and its quadric cost for a pooled quadric."""
    mid = 0.5 * (pa + pb)
    a = q[:3, :3]
    b = q[:3, 3]
    try:
        x = np.linalg.solve(a, -b)
    except np.linalg.LinAlgError:
        x = mid
    edge = np.linalg.norm(pb - pa)
    if not np.all(np.isfinite(x)) or \
            np.linalg.norm(x - mid) > MAX_JUMP_FACTOR * max(edge, 1e-12):
        x = mid
    h = np.append(x, 1.0)
    return x, float(h @ q @ h)


def _face_normal(p0, p1, p2):
    return np.cross(p1 - p0, p2 - p0)


def decimate(vertices: np.ndarray, faces: np.ndarray,
             target_faces: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapse edges by increasing quadric error until the face budget.

    Collapses that would flip a surviving face normal or pinch the
    surface (link condition) are rejected.  Returns compacted vertex
    and face arrays; the input arrays are left untouched.  A mesh
    already at or below ``target_faces`` is returned as a copy.
    """
    positions = np.array(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if len(faces) <= target_faces:
        return positions, faces.copy()

    quadrics = _vertex_quadrics(positions, faces)
    face_verts = [list(f) for f in faces]
    face_alive = np.ones(len(faces), dtype=bool)
    vertex_faces = [set() for _ in range(len(positions))]
    for fi, f in enumerate(face_verts):
        for c in f:
            vertex_faces[c].add(fi)
    version = np.zeros(len(positions), dtype=np.int64)
    n_alive = len(faces)

    def neighbors(vi):
        out = set()
        for fi in vertex_faces[vi]:
            out.update(face_verts[fi])
        out.discard(vi)
        return out

    def push_edge(heap, a, b):
        if a > b:
            a, b = b, a
        x, cost = _edge_target(quadrics[a] + quadrics[b],
                               positions[a], positions[b])
        heapq.heappush(heap, (cost, a, b, version[a], version[b], x))

    heap = []
    seen = set()
    for f in face_verts:
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen.add(key)
                push_edge(heap, *key)
    del seen

    while n_alive > target_faces and heap:
        cost, a, b, va, vb, x = heapq.heappop(heap)
        if version[a] != va or version[b] != vb:
            continue  # stale entry, a fresher one is in the heap
        if not vertex_faces[a] or not vertex_faces[b]:
            continue
        dying = vertex_faces[a] & vertex_faces[b]
        if not dying:
            continue  # endpoints no longer share a face
        # link condition: common neighbors must be exactly the vertices
        # opposite the dying faces, otherwise collapsing pinches the mesh
        opposite = set()
        for fi in dying:
            opposite.update(face_verts[fi])
        opposite -= {a, b}
        if neighbors(a) & neighbors(b) != opposite:
            continue
        flipped = False
        for fi in (vertex_faces[a] | vertex_faces[b]) - dying:
            f = face_verts[fi]
            p = [positions[c] for c in f]
            before = _face_normal(*p)
            q = [x if c in (a, b) else positions[c] for c in f]
            after = _face_normal(*q)
            if np.dot(before, after) <= 0:
                flipped = True
                break
        if flipped:
            continue

        positions[a] = x
        quadrics[a] = quadrics[a] + quadrics[b]
        for fi in dying:
            face_alive[fi] = False
            n_alive -= 1
            for c in face_verts[fi]:
                vertex_faces[c].discard(fi)
        for fi in list(vertex_faces[b]):
            face_verts[fi] = [a if c == b else c for c in face_verts[fi]]
            vertex_faces[a].add(fi)
        vertex_faces[b] = set()
        version[a] += 1
        version[b] += 1
        for nb in neighbors(a):
            push_edge(heap, a, nb)

    kept = np.array([face_verts[fi] for fi in np.flatnonzero(face_alive)],
                    dtype=np.int64)
    used = np.unique(kept)
    remap = np.full(len(positions), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return positions[used], remap[kept]
