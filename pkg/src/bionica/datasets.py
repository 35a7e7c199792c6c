"""Source generation, mixing, image ingestion, and matrix serialization.

Sources are d x T matrices with one sample per column. The synthetic
generator produces sparse nonnegative signals: each entry is zero with
probability ``zero_prob`` and otherwise uniform on the open interval
(0, upper). With the default upper bound sqrt(48/5) the population
variance of each source is exactly 1.
"""

import os
from dataclasses import dataclass

import numpy as np

DEFAULT_UPPER = float(np.sqrt(48.0 / 5.0))


@dataclass
class SourceConfig:
    """Parameters of the sparse-uniform source generator."""

    d: int
    T: int
    zero_prob: float = 0.5
    upper: float = DEFAULT_UPPER
    seed: int = 0

    def validate(self):
        if self.d < 1:
            raise ValueError("d must be >= 1, got %r" % (self.d,))
        if self.T < 1:
            raise ValueError("T must be >= 1, got %r" % (self.T,))
        if not (0.0 <= self.zero_prob < 1.0):
            raise ValueError("zero_prob must lie in [0, 1), got %r" % (self.zero_prob,))
        if not (self.upper > 0.0):
            raise ValueError("upper must be positive, got %r" % (self.upper,))


def sample_sparse_uniform(cfg: SourceConfig) -> np.ndarray:
    """Draw a d x T sparse-uniform source matrix.

    Each entry is 0 with probability ``cfg.zero_prob``, else uniform on
    the open interval (0, cfg.upper). Exact zeros from the uniform draw
    (a probability-zero event under float rounding, but possible) are
    redrawn so that a zero always means "switched off", never "drawn at
    the boundary". Deterministic given ``cfg.seed``.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    vals = rng.uniform(0.0, cfg.upper, size=(cfg.d, cfg.T))
    # redraw boundary hits so the support is the open interval
    bad = vals == 0.0
    while np.any(bad):
        vals[bad] = rng.uniform(0.0, cfg.upper, size=int(bad.sum()))
        bad = vals == 0.0
    mask = rng.random(size=(cfg.d, cfg.T)) >= cfg.zero_prob
    return vals * mask


def random_mixing_matrix(k: int, d: int, seed) -> np.ndarray:
    """Random k x d mixing matrix with i.i.d. standard normal entries.

    Requires k >= d. Resamples in the (measure-zero) event that the
    draw is numerically column-rank deficient.
    """
    if k < d or d < 1:
        raise ValueError("need k >= d >= 1, got k=%r d=%r" % (k, d))
    rng = np.random.default_rng(seed)
    while True:
        A = rng.standard_normal((k, d))
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] > 1e-10 * s[0]:
            return A


def mix(A: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Form the k x T mixture X = A S."""
    A = np.asarray(A, dtype=float)
    S = np.asarray(S, dtype=float)
    if A.ndim != 2 or S.ndim != 2 or A.shape[1] != S.shape[0]:
        raise ValueError(
            "mixing shape mismatch: A is %r, S is %r" % (A.shape, S.shape)
        )
    return A @ S


def image_to_source(img: np.ndarray) -> np.ndarray:
    """Flatten an image into a well-grounded, unit-variance source row.

    Pixels are flattened row-major, shifted so the minimum is exactly 0,
    then divided by the standard deviation (1/N convention) of the
    shifted values. The result is a nonnegative vector with variance 1
    whose smallest value is 0.
    """
    v = np.asarray(img, dtype=float).ravel()
    v = v - v.min()
    sd = np.sqrt(np.mean(v * v) - np.mean(v) ** 2)
    if sd == 0.0:
        raise ValueError("constant image has no variance to normalize")
    return v / sd


def shuffled_epoch_stream(T: int, epochs: int, seed) -> np.ndarray:
    """Concatenate ``epochs`` independent uniform permutations of 0..T-1."""
    if T < 1 or epochs < 1:
        raise ValueError("need T >= 1 and epochs >= 1, got T=%r epochs=%r" % (T, epochs))
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.permutation(T) for _ in range(epochs)])


# ---------------------------------------------------------------------------
# serialization

def write_matrix_csv(matrix, path):
    """Write a 2-D matrix as CSV, one row per line, 17 significant digits.

    17 digits round-trips float64 exactly, so write followed by read is
    the identity on finite matrices.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.all(np.isfinite(m)):
        raise ValueError("refusing to serialize non-finite entries")
    np.savetxt(path, m, fmt="%.17g", delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by write_matrix_csv. Rejects ragged rows."""
    rows = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(c) for c in line.split(",")])
            except ValueError:
                raise ValueError("%s:%d: non-numeric cell" % (path, ln))
    if not rows:
        raise ValueError("%s: empty matrix file" % (path,))
    width = len(rows[0])
    for ln, r in enumerate(rows, 1):
        if len(r) != width:
            raise ValueError("%s: ragged row at line %d" % (path, ln))
    return np.array(rows, dtype=float)


# ---------------------------------------------------------------------------
# PGM (portable graymap), ASCII P2 and binary P5

def load_pgm(path) -> np.ndarray:
    """Read a P2/P5 PGM file into an H x W integer array.

    Handles '#' comments in the header and maxval up to 65535 (two-byte
    big-endian samples in the binary variant, per the format). Values
    are returned as stored, without normalization.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def next_token():
        nonlocal pos
        while pos < len(data):
            ch = data[pos:pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("%s: truncated PGM header" % (path,))
        return data[start:pos]

    magic = next_token()
    if magic not in (b"P2", b"P5"):
        raise ValueError("%s: unsupported magic %r (want P2 or P5)" % (path, magic))
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError:
        raise ValueError("%s: malformed PGM header" % (path,))
    if width < 1 or height < 1 or not (0 < maxval <= 65535):
        raise ValueError("%s: bad PGM dimensions or maxval" % (path,))

    n = width * height
    if magic == b"P2":
        try:
            vals = np.array(data[pos:].split(), dtype=int)
        except ValueError:
            raise ValueError("%s: non-numeric pixel data" % (path,))
        if vals.size != n:
            raise ValueError(
                "%s: expected %d pixels, found %d" % (path, n, vals.size)
            )
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = ">u2" if maxval > 255 else np.uint8
        itemsize = 2 if maxval > 255 else 1
        raw = data[pos:pos + n * itemsize]
        if len(raw) != n * itemsize:
            raise ValueError("%s: truncated pixel payload" % (path,))
        vals = np.frombuffer(raw, dtype=dtype).astype(int)
    if vals.size and (vals.min() < 0 or vals.max() > maxval):
        raise ValueError("%s: pixel value outside [0, maxval]" % (path,))
    return vals.reshape(height, width)


def write_pgm(img: np.ndarray, path, maxval: int = 255, binary: bool = True):
    """Write an integer image as PGM (P5 if binary, else P2)."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM image must be 2-D, got shape %r" % (img.shape,))
    if not (0 < maxval <= 65535):
        raise ValueError("maxval must be in 1..65535")
    arr = np.rint(img).astype(int)
    if arr.min() < 0 or arr.max() > maxval:
        raise ValueError("pixel values out of range for maxval=%d" % maxval)
    h, w = arr.shape
    header = ("P5" if binary else "P2") + "\n%d %d\n%d\n" % (w, h, maxval)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            dtype = ">u2" if maxval > 255 else np.uint8
            fh.write(arr.astype(dtype).tobytes())
        else:
            fh.write("\n".join(" ".join(str(v) for v in row) for row in arr).encode("ascii"))
            fh.write(b"\n")


def rescale_to_gray(row: np.ndarray, maxval: int = 255) -> np.ndarray:
    """Min-max rescale a real vector/matrix to integers in 0..maxval."""
    row = np.asarray(row, dtype=float)
    lo, hi = row.min(), row.max()
    if hi == lo:
        return np.zeros(row.shape, dtype=int)
    return np.rint((row - lo) / (hi - lo) * maxval).astype(int)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
