"""Random small Signorini problems for oracle comparisons."""

import numpy as np

from signolab import assembly
from signolab.fields import ConstantField
from signolab.geometry import BoundarySpec, Polygon, Segment
from signolab.mesh import triangulate


def random_small_problem(seed: int, max_signorini: int = 12):
    """A perturbed quadrilateral with Signorini bottom, random gap, control and load."""
    rng = np.random.default_rng(seed)
    while True:
        jitter = rng.uniform(-0.15, 0.15, size=(4, 2))
        verts = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], float) + jitter
        poly = Polygon(tuple(map(tuple, verts)))
        try:
            poly.check()
        except ValueError:
            continue
        gap = tuple(rng.uniform(-0.2, 0.2, size=3))
        u = tuple(rng.uniform(-3, 3, size=2))
        left = "N" if rng.random() < 0.5 else "D"
        spec = BoundarySpec(
            poly,
            (Segment((0,), "S", gap), Segment((1,), "D"), Segment((2,), "U", u), Segment((3,), left)),
            load=ConstantField(params={"value": float(rng.uniform(-6, 6))}),
        )
        mesh = triangulate(spec, float(rng.choice([0.2, 0.25, 0.34])))
        A = assembly.stiffness(mesh)
        b = assembly.load_vector(mesh, spec)
        part = assembly.partition(mesh, spec)
        if 0 < len(part.signorini) <= max_signorini:
            return mesh, spec, A, b, part, assembly.obstacle(mesh, spec, part)
