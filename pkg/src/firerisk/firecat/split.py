"""Seeded train/test partition."""

import numpy as np


def split_indices(n, fraction=0.7, seed=0):
    """Shuffled (train, test) index arrays with ``round(fraction * n)`` train rows."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fraction * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_train_test(data, fraction=0.7, seed=0):
    """Deterministic shuffled split of a DataFrame (or array) into train and test.

    Both parts keep the original row order and index.
    """
    tr, te = split_indices(len(data), fraction, seed)
    if hasattr(data, "iloc"):
        return data.iloc[tr], data.iloc[te]
    data = np.asarray(data)
    return data[tr], data[te]
