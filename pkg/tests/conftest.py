"""Seeded corpora shared by the acceptance tests.

Fixed seeds keep every run identical, so failures are reproducible and
the exact equalities asserted downstream stay meaningful.  The main
corpus spreads instance sizes from a handful of points up to 512; the
small corpus keeps every instance within 24 points so the exhaustive
subset searches in the oracle checks stay affordable.
"""

import random
from fractions import Fraction

import pytest

from cclab import build_instance
from cclab.examples import column_tower, doubling_tower, odometer_tower

SEED = 1729


def random_instance(rng, n_classes, lo, hi):
    """One exact-mode instance with the given class count and size range.

    At least one class gets a second point, so a plain compression
    candidate always has somewhere to overflow.
    """
    classes = {}
    weights = {}
    pid = 0
    for k in range(n_classes):
        size = rng.randint(lo, hi)
        members = [f"p{pid + i:04d}" for i in range(size)]
        pid += size
        classes[f"k{k:02d}"] = members
        for m in members:
            weights[m] = Fraction(rng.randint(1, 9), rng.randint(1, 9))
    if all(len(v) == 1 for v in classes.values()):
        extra = f"p{pid:04d}"
        classes["k00"].append(extra)
        weights[extra] = Fraction(rng.randint(1, 9), rng.randint(1, 9))
    return build_instance(classes, weights)


@pytest.fixture(scope="session")
def corpus():
    """100 instances: 90 small, 8 medium, one near 300 points, one at 512."""
    rng = random.Random(SEED)
    out = [random_instance(rng, rng.randint(1, 5), 2, 8) for _ in range(90)]
    out.extend(random_instance(rng, rng.randint(4, 8), 8, 24)
               for _ in range(8))
    out.append(random_instance(rng, 6, 40, 60))
    out.append(random_instance(rng, 8, 64, 64))
    assert all(len(inst.points) <= 512 for inst in out)
    return out


@pytest.fixture(scope="session")
def tower_families():
    """The three generated families, ten levels each."""
    return {
        "column": column_tower(10, 3),
        "doubling": doubling_tower(10),
        "odometer": odometer_tower(10, Fraction(1, 3)),
    }


@pytest.fixture(scope="session")
def small_corpus():
    """100 instances of at most 24 points with classes of at most 6."""
    rng = random.Random(SEED + 1)
    return [random_instance(rng, rng.randint(1, 4), 1, 6)
            for _ in range(100)]
