"""Fixture builders shared by the test modules."""

import numpy as np

from faceaudit.embset import SampleMeta, from_arrays


def make_set(vectors, identities, groups=None, name="fixture"):
    """Build a checked EmbeddingSet with sample ids s0, s1, ..."""
    groups = groups or [None] * len(identities)
    manifest = [SampleMeta(f"s{i}", str(ident), g) for i, (ident, g) in enumerate(zip(identities, groups))]
    return from_arrays(np.asarray(vectors, dtype=np.float32), manifest, name=name)


def random_unit(rng, n, dim):
    v = rng.standard_normal((n, dim))
    return (v / np.linalg.norm(v, axis=1, keepdims=True)).astype(np.float32)


def clustered_set(rng, n_ids, per_id, dim=64, spread=0.6, name="clustered"):
    """Identities as noisy copies of random centres; gives realistic score gaps."""
    centres = rng.standard_normal((n_ids, dim))
    rows, labels = [], []
    for c in range(n_ids):
        for _ in range(per_id):
            rows.append(centres[c] / np.sqrt(dim) + spread * rng.standard_normal(dim) / np.sqrt(dim))
            labels.append(f"id{c}")
    return make_set(np.asarray(rows), labels, name=name)
