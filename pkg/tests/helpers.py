import numpy as np

from period_dynamics.period import PlaneError, TwoPlane


def random_plane(lattice, seed, spread=0.6):
    """Random positive plane near <e1, e2>; redraws non-positive samples."""
    rng = np.random.default_rng(seed)
    eye = np.eye(lattice.rank)
    while True:
        a = eye[0] + spread * rng.normal(size=lattice.rank)
        b = eye[1] + spread * rng.normal(size=lattice.rank)
        try:
            return TwoPlane.from_vectors(lattice, a, b)
        except PlaneError:
            continue
