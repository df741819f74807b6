"""Dataset ingestion, stratified splitting, and worker sharding.

The real experiment corpus is the spambase email CSV (57 numeric feature
columns plus a final 0/1 label, no header). ``synthetic_spambase_like``
generates a stand-in with the same shape and class balance for environments
where the file is not available; ``quadratic_cloud`` produces the sample
clouds used by the quadratic-family theory checks.
"""

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError

log = logging.getLogger(__name__)

SPAMBASE_FEATURES = 57
SPAMBASE_ROWS = 4601
SPAMBASE_SPAM_ROWS = 1813


@dataclass
class Dataset:
    features: np.ndarray  # (N, d)
    labels: np.ndarray    # (N,) values in {0, 1}
    source: str
    normalization: dict | None = None  # set once features are standardized

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


def load_spambase(path) -> Dataset:
    """Parse a spambase-format CSV: 57 numeric features + binary label per row.

    Raw features are returned as-is; standardization happens at split time so
    its parameters can come from the training rows only.
    """
    rows = []
    labels = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != SPAMBASE_FEATURES + 1:
                raise DataFormatError(
                    f"line {lineno}: expected {SPAMBASE_FEATURES + 1} columns, got {len(row)}"
                )
            try:
                values = [float(tok) for tok in row]
            except ValueError as exc:
                raise DataFormatError(f"line {lineno}: non-numeric token ({exc})") from exc
            if not all(np.isfinite(v) for v in values):
                raise DataFormatError(f"line {lineno}: non-finite value")
            label = values[-1]
            if label not in (0.0, 1.0):
                raise DataFormatError(f"line {lineno}: label must be 0 or 1, got {label}")
            rows.append(values[:-1])
            labels.append(int(label))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(
        features=np.asarray(rows, dtype=float),
        labels=np.asarray(labels, dtype=int),
        source=str(path),
    )


def stratified_split(labels, train_frac, seed):
    """Per-class shuffled split; train takes round(train_frac * class size) rows."""
    labels = np.asarray(labels)
    rng = np.random.default_rng([seed, 0xD1])
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        take = int(np.floor(train_frac * members.size + 0.5))
        train_idx.append(members[:take])
        test_idx.append(members[take:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def standardize(train_features, test_features):
    """Center/scale each feature by training-split statistics.

    Zero-variance features map to 0 in both splits. Returns the transformed
    matrices and the parameters used.
    """
    mean = train_features.mean(axis=0)
    std = train_features.std(axis=0)
    safe = np.where(std > 0.0, std, 1.0)
    train_z = (train_features - mean) / safe
    test_z = (test_features - mean) / safe
    dead = std == 0.0
    if dead.any():
        train_z[:, dead] = 0.0
        test_z[:, dead] = 0.0
    return train_z, test_z, {"mean": mean.tolist(), "std": std.tolist()}


def even_shards(n, m):
    """Split [0, n) into m contiguous equal ranges, dropping the tail remainder."""
    if m < 1:
        raise ConfigError(f"need m >= 1, got {m}")
    if m > n:
        raise ConfigError(f"m={m} workers exceed {n} samples")
    per = n // m
    shards = [np.arange(i * per, (i + 1) * per) for i in range(m)]
    return shards, n - per * m


@dataclass
class ShardedData:
    train_features: np.ndarray
    train_labels: np.ndarray
    shards: list          # per-worker index arrays into the train matrices
    test_features: np.ndarray
    test_labels: np.ndarray
    normalization: dict | None
    dropped: int          # tail rows removed for divisibility


def split_and_shard(ds: Dataset, train_frac=2.0 / 3.0, m=20, seed=0,
                    apply_standardization=True) -> ShardedData:
    """Stratified train/test split, optional standardization, even sharding.

    Training rows are shuffled by seed then dealt into m contiguous shards of
    equal size; the divisibility tail is dropped.
    """
    train_idx, test_idx = stratified_split(ds.labels, train_frac, seed)
    if m > train_idx.size:
        raise ConfigError(f"m={m} workers exceed training size {train_idx.size}")
    train_X = ds.features[train_idx]
    test_X = ds.features[test_idx]
    norm = None
    if apply_standardization:
        train_X, test_X, norm = standardize(train_X, test_X)
    rng = np.random.default_rng([seed, 0xD2])
    order = rng.permutation(train_idx.size)
    shards, dropped = even_shards(train_idx.size, m)
    if dropped:
        log.warning("dropping %d training rows so %d workers get equal shards", dropped, m)
    kept = order[: train_idx.size - dropped]  # shard ranges cover exactly the kept rows
    return ShardedData(
        train_features=train_X[kept],
        train_labels=ds.labels[train_idx][kept],
        shards=shards,
        test_features=test_X,
        test_labels=ds.labels[test_idx],
        normalization=norm,
        dropped=dropped,
    )


def synthetic_spambase_like(seed=0, n=SPAMBASE_ROWS, dim=SPAMBASE_FEATURES,
                            positives=SPAMBASE_SPAM_ROWS, markers=6, diffuse=30,
                            flip=0.05) -> Dataset:
    """Stand-in corpus with the spambase shape and a word-frequency-like mix.

    Three feature groups mimic email term statistics: sparse "marker"
    columns that are strong evidence when present but near-zero otherwise
    (an adversary can plant them within a small norm budget), diffuse
    Gaussian columns that are individually weak but collectively predictive,
    and pure-noise columns. A small fraction of labels is flipped so the
    achievable error floor is positive. Per-feature scales vary by orders of
    magnitude, so standardization matters, as with the real file.
    """
    rng = np.random.default_rng([seed, 0xD3])
    classes = np.zeros(n, dtype=int)
    classes[:positives] = 1
    classes = classes[rng.permutation(n)]

    features = np.zeros((n, dim))
    pos = classes == 1
    hit_rates = np.concatenate([[0.80], np.linspace(0.55, 0.30, markers - 1)])
    leak_rates = np.concatenate([[0.01], np.full(markers - 1, 0.03)])
    for j in range(markers):
        present = np.where(pos, rng.random(n) < hit_rates[j], rng.random(n) < leak_rates[j])
        features[:, j] = present * (1.2 + 0.5 * rng.exponential(1.0, size=n))
    offsets = rng.uniform(0.25, 0.45, size=diffuse) * rng.choice([-1.0, 1.0], size=diffuse)
    signs = np.where(pos, 0.5, -0.5)
    features[:, markers:markers + diffuse] = (
        rng.standard_normal((n, diffuse)) + np.outer(signs, offsets)
    )
    features[:, markers + diffuse:] = rng.standard_normal((n, dim - markers - diffuse))
    features *= np.exp(rng.normal(0.0, 0.8, size=dim))

    labels = classes.copy()
    flips = rng.permutation(n)[: int(round(flip * n))]
    labels[flips] = 1 - labels[flips]
    return Dataset(features=features, labels=labels, source=f"synthetic(seed={seed})")


def quadratic_cloud(n, dim, spread=1.0, center=None, seed=0):
    """Sample cloud for the quadratic family; labels are all-zero placeholders."""
    rng = np.random.default_rng([seed, 0xD4])
    if center is None:
        center = np.zeros(dim)
    X = np.asarray(center, dtype=float) + spread * rng.standard_normal((n, dim))
    return X, np.zeros(n)
