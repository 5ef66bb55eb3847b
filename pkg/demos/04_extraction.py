#!/usr/bin/env python
# Indicator-field surface extraction on a shape we know the answer for:
# oriented samples of the unit sphere in, triangle mesh out.
import numpy as np

from splatbind.extract import (
    build_indicator_grid,
    decimate,
    grid_to_mesh,
    signed_volume,
    OrientedPointSet,
)

rng = np.random.default_rng(3)
n = 20000
d = rng.standard_normal((n, 3))
d /= np.linalg.norm(d, axis=1, keepdims=True)
pts = OrientedPointSet(points=d, normals=d.copy(),
                       confidences=np.ones(n))

grid = build_indicator_grid(pts, resolution=64)
print("grid: %d^3 cells, indicator range [%.3f, %.3f], iso %.3f"
      % (grid.field.shape[0], grid.field.min(), grid.field.max(), grid.iso))

verts, faces = grid_to_mesh(grid)
r = np.linalg.norm(verts, axis=1)
print("mesh: %d vertices, %d faces" % (len(verts), len(faces)))
print("radial error: mean %.4f  max %.4f" % (np.abs(r - 1).mean(),
                                             np.abs(r - 1).max()))

vol = signed_volume(verts, faces)
print("enclosed volume %.4f vs sphere %.4f" % (vol, 4 / 3 * np.pi))

# decimation keeps the shape while dropping most of the triangles
dv, df = decimate(verts, faces, target_faces=500)
rd = np.linalg.norm(dv, axis=1)
print("decimated to %d faces, radial error mean %.4f"
      % (len(df), np.abs(rd - 1).mean()))
print("volume after decimation %.4f" % signed_volume(dv, df))
