"""Render a handful of Gaussians and look at what the compositor does."""
import numpy as np

from splatbind.core import CameraPose, GaussianCloud3D, logit
from splatbind.rasterizer import render
from splatbind.cli import save_png

rng = np.random.default_rng(0)
n = 40
cloud = GaussianCloud3D(
    positions=rng.uniform(-0.8, 0.8, (n, 3)),
    colors=rng.uniform(0.1, 0.9, (n, 3)),
    opacities=logit(rng.uniform(0.3, 0.8, n)),
    log_scales=np.log(rng.uniform(0.08, 0.25, (n, 3))),
    rotations=rng.standard_normal((n, 4)),
)

cam = CameraPose.orbit(azimuth_deg=30, elevation_deg=70, radius=4.0,
                       width=256, height=256)
out = render(cloud, cam)
print("color range", out.color.min().round(3), out.color.max().round(3))
print("alpha mean %.3f  covered pixels %.1f%%"
      % (out.alpha.mean(), 100.0 * (out.alpha > 0.01).mean()))

# compositing is order-dependent front to back; the same scene from the
# opposite side sorts the other way and still gives a consistent image
back = render(cloud, CameraPose.orbit(azimuth_deg=210, elevation_deg=110,
                                      radius=4.0, width=256, height=256))
print("front vs back mean intensity: %.3f / %.3f"
      % (out.color.mean(), back.color.mean()))

save_png("demo01_front.png", out.color)
save_png("demo01_back.png", back.color)
print("wrote demo01_front.png, demo01_back.png")
