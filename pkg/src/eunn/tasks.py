"""Benchmark data: the copying-memory task and pixel-by-pixel permuted MNIST."""

import gzip
import logging
import os
from dataclasses import dataclass

import numpy as np

from .cell import SequenceBatch
from .errors import ConfigError, IngestionError
from .losses import cross_entropy_sequence

log = logging.getLogger(__name__)

DATA_DIR_ENV = "EUNN_DATA_DIR"


@dataclass(frozen=True)
class CopyTaskConfig:
    n_symbols: int = 8
    m_len: int = 10
    t_delay: int = 100
    batch: int = 128

    def __post_init__(self):
        if self.n_symbols < 1 or self.m_len < 1 or self.t_delay < 1 or self.batch < 1:
            raise ConfigError(f"invalid copy task config: {self}")

    @property
    def length(self):
        return self.t_delay + 2 * self.m_len

    @property
    def blank(self):
        return self.n_symbols

    @property
    def recall(self):
        return self.n_symbols + 1

    @property
    def n_in(self):
        return self.n_symbols + 2

    @property
    def n_out(self):
        # outputs are data symbols or blank; the recall marker is input-only
        return self.n_symbols + 1


def copy_symbols(cfg, data):
    """Input and target symbol ids (T, B) for data symbols ``data`` (B, M)."""
    bsz = data.shape[0]
    m, t = cfg.m_len, cfg.t_delay
    inp = np.full((cfg.length, bsz), cfg.blank, dtype=np.int64)
    inp[:m] = data.T
    inp[m + t - 1] = cfg.recall
    tgt = np.full((cfg.length, bsz), cfg.blank, dtype=np.int64)
    tgt[m + t:] = data.T
    return inp, tgt


def copy_batch(cfg, rng):
    """M data symbols, T-1 blanks, the recall marker, M blanks; recall the data at the end.

    Inputs are one-hot over n+2 symbols; every step contributes to the loss.
    """
    data = rng.integers(0, cfg.n_symbols, size=(cfg.batch, cfg.m_len))
    inp, tgt = copy_symbols(cfg, data)
    onehot = np.eye(cfg.n_in)[inp]
    return SequenceBatch(onehot, tgt, np.ones(tgt.shape))


def memoryless_baseline(cfg):
    """Cross entropy (nats) of emitting blanks, then uniform guesses over the data symbols."""
    return cfg.m_len * np.log(cfg.n_symbols) / (cfg.t_delay + 2 * cfg.m_len)


class CopyTask:
    loss = "ce"

    def __init__(self, cfg, val_rng, val_batches=1):
        self.cfg = cfg
        self.val = [copy_batch(cfg, val_rng) for _ in range(val_batches)]

    @property
    def n_in(self):
        return self.cfg.n_in

    @property
    def n_out(self):
        return self.cfg.n_out

    def sample(self, rng):
        return copy_batch(self.cfg, rng)

    def evaluate(self, cell):
        """Validation cross entropy on a fixed held-out set."""
        return float(np.mean([cross_entropy_sequence(cell.predict(b.inputs), b.targets, b.mask)
                              for b in self.val]))


# --- IDX files -------------------------------------------------------------

_IDX_TYPES = {
    0x08: np.dtype(np.uint8),
    0x09: np.dtype(np.int8),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def _open(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise IngestionError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def read_idx(path):
    """Parse an IDX file (optionally gzipped) into an ndarray."""
    try:
        raw = _open(path)
    except FileNotFoundError as exc:
        raise IngestionError(f"{path}: file not found") from exc
    if len(raw) < 4:
        raise IngestionError(f"{path} at offset 0: truncated header")
    if raw[0] != 0 or raw[1] != 0:
        raise IngestionError(f"{path} at offset 0: bad magic {raw[:4].hex()}")
    code, ndim = raw[2], raw[3]
    if code not in _IDX_TYPES:
        raise IngestionError(f"{path} at offset 2: unknown element type 0x{code:02x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IngestionError(f"{path} at offset 4: truncated dimension list")
    dims = tuple(int(d) for d in np.frombuffer(raw, dtype=">u4", count=ndim, offset=4))
    dtype = _IDX_TYPES[code]
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(raw) - header != expected:
        raise IngestionError(
            f"{path} at offset {header}: expected {expected} data bytes for dims {dims}, "
            f"found {len(raw) - header}")
    return np.frombuffer(raw, dtype=dtype, offset=header).reshape(dims)


def write_idx(path, array):
    """Write ``array`` as IDX; gzip-compressed when ``path`` ends in .gz."""
    array = np.asarray(array)
    codes = {v.newbyteorder(">") if v.itemsize > 1 else v: k for k, v in _IDX_TYPES.items()}
    dtype = array.dtype.newbyteorder(">") if array.dtype.itemsize > 1 else array.dtype
    if dtype not in codes:
        raise ValueError(f"unsupported IDX dtype {array.dtype}")
    header = bytes([0, 0, codes[dtype], array.ndim]) + np.asarray(array.shape, dtype=">u4").tobytes()
    payload = header + array.astype(dtype).tobytes()
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(payload)


# --- permuted MNIST --------------------------------------------------------

@dataclass(frozen=True)
class MnistConfig:
    data_dir: str = None
    perm_seed: int = 0
    train_subset: int = 10000
    val_holdout: int = 5000
    val_size: int = 2000
    downsample: int = 1
    batch: int = 128

    def resolved_dir(self):
        return self.data_dir or os.environ.get(DATA_DIR_ENV, os.path.join("data", "mnist"))


def _find(data_dir, stem):
    for name in (stem, stem + ".gz"):
        path = os.path.join(data_dir, name)
        if os.path.exists(path):
            return path
    raise IngestionError(f"{os.path.join(data_dir, stem)}[.gz]: file not found")


def pixel_permutation(n_pixels, seed):
    return np.random.Generator(np.random.PCG64(seed)).permutation(n_pixels)


def _to_sequences(images, downsample, perm):
    images = np.asarray(images, dtype=np.float64) / 255.0
    if downsample > 1:
        n, h, w = images.shape
        if h % downsample or w % downsample:
            raise ConfigError(f"downsample factor {downsample} does not divide {h}x{w}")
        images = images.reshape(n, h // downsample, downsample, w // downsample, downsample).mean(axis=(2, 4))
    flat = images.reshape(len(images), -1)
    return flat[:, perm]


class MnistSource:
    """Images as (N, P) permuted pixel sequences plus integer labels."""

    def __init__(self, pixels, labels):
        self.pixels = pixels
        self.labels = np.asarray(labels, dtype=np.int64)

    def __len__(self):
        return len(self.labels)

    def batch(self, idx):
        x = self.pixels[idx].T[:, :, None]
        steps = x.shape[0]
        targets = np.zeros((steps, len(idx)), dtype=np.int64)
        targets[-1] = self.labels[idx]
        mask = np.zeros((steps, len(idx)))
        mask[-1] = 1.0
        return SequenceBatch(x, targets, mask)

    def sample(self, rng, size):
        return self.batch(rng.choice(len(self), size=size, replace=False))

    def accuracy(self, cell, chunk=256):
        hits = 0
        for start in range(0, len(self), chunk):
            idx = np.arange(start, min(start + chunk, len(self)))
            logits = cell.predict(self.batch(idx).inputs)[-1]
            hits += int(np.sum(np.argmax(logits, axis=-1) == self.labels[idx]))
        return hits / max(len(self), 1)


def mnist_load(cfg):
    """Return ``(train, val, test)`` sources; ``test`` is None without t10k files.

    The last ``val_holdout`` training images are reserved for validation,
    of which the first ``val_size`` are used; ``train`` is the first
    ``train_subset`` of the remaining images. One pixel permutation, drawn
    from ``perm_seed``, is shared by all three.
    """
    data_dir = cfg.resolved_dir()
    images = read_idx(_find(data_dir, "train-images-idx3-ubyte"))
    labels = read_idx(_find(data_dir, "train-labels-idx1-ubyte"))
    if images.ndim != 3 or labels.ndim != 1 or len(images) != len(labels):
        raise IngestionError(f"{data_dir}: image/label files disagree ({images.shape} vs {labels.shape})")
    if not 0 < cfg.val_holdout < len(images):
        raise ConfigError(f"val_holdout {cfg.val_holdout} must leave training images (have {len(images)})")
    if not 0 < cfg.val_size <= cfg.val_holdout or cfg.train_subset < 1 or cfg.downsample < 1:
        raise ConfigError(f"invalid MNIST config: {cfg}")
    n_pixels = (images.shape[1] // cfg.downsample) * (images.shape[2] // cfg.downsample)
    perm = pixel_permutation(n_pixels, cfg.perm_seed)
    seqs = _to_sequences(images, cfg.downsample, perm)
    n_train = len(images) - cfg.val_holdout
    if cfg.train_subset > n_train:
        log.warning("train_subset %d exceeds the %d available images; using all", cfg.train_subset, n_train)
    keep = min(cfg.train_subset, n_train)
    train = MnistSource(seqs[:keep], labels[:keep])
    val = MnistSource(seqs[n_train:n_train + cfg.val_size], labels[n_train:n_train + cfg.val_size])
    test = None
    try:
        t_img = read_idx(_find(data_dir, "t10k-images-idx3-ubyte"))
        t_lab = read_idx(_find(data_dir, "t10k-labels-idx1-ubyte"))
        test = MnistSource(_to_sequences(t_img, cfg.downsample, perm), t_lab)
    except IngestionError:
        pass
    return train, val, test


class MnistTask:
    loss = "ce"
    n_out = 10

    def __init__(self, cfg):
        self.cfg = cfg
        self.train, self.val, self.test = mnist_load(cfg)

    @property
    def n_in(self):
        return 1

    def sample(self, rng):
        return self.train.sample(rng, min(self.cfg.batch, len(self.train)))

    def evaluate(self, cell):
        """Validation accuracy."""
        return self.val.accuracy(cell)
