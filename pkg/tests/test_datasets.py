"""Source generator, mixing, image ingestion, and file format tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bionica.datasets import (
    DEFAULT_UPPER,
    SourceConfig,
    image_to_source,
    load_pgm,
    mix,
    random_mixing_matrix,
    read_matrix_csv,
    rescale_to_gray,
    sample_sparse_uniform,
    shuffled_epoch_stream,
    write_matrix_csv,
    write_pgm,
)


def test_source_population_stats():
    # with the default upper bound each row has population variance 1
    S = sample_sparse_uniform(SourceConfig(d=2, T=1_000_000, seed=11))
    var = S.var(axis=1)
    assert np.all(np.abs(var - 1.0) < 0.01)
    mean = S.mean(axis=1)
    expected_mean = DEFAULT_UPPER * 0.25
    assert np.all(np.abs(mean - expected_mean) < 0.01)


def test_source_zero_fraction():
    S = sample_sparse_uniform(SourceConfig(d=1, T=1_000_000, seed=3))
    frac = float((S == 0.0).mean())
    assert abs(frac - 0.5) < 0.005


def test_source_support():
    cfg = SourceConfig(d=3, T=5000, zero_prob=0.3, seed=5)
    S = sample_sparse_uniform(cfg)
    assert S.min() >= 0.0
    assert S.max() < cfg.upper
    nz = S[S > 0]
    assert nz.size > 0 and nz.min() > 0.0


def test_source_determinism():
    cfg = SourceConfig(d=2, T=500, seed=42)
    assert np.array_equal(sample_sparse_uniform(cfg), sample_sparse_uniform(cfg))
    other = sample_sparse_uniform(SourceConfig(d=2, T=500, seed=43))
    assert not np.array_equal(sample_sparse_uniform(cfg), other)


@pytest.mark.parametrize("bad", [
    dict(d=0, T=10),
    dict(d=2, T=0),
    dict(d=2, T=10, zero_prob=1.0),
    dict(d=2, T=10, zero_prob=-0.1),
    dict(d=2, T=10, upper=0.0),
])
def test_source_config_rejects(bad):
    with pytest.raises(ValueError):
        sample_sparse_uniform(SourceConfig(**bad))


def test_mixing_matrix_shape_and_rank():
    A = random_mixing_matrix(6, 3, 0)
    assert A.shape == (6, 3)
    s = np.linalg.svd(A, compute_uv=False)
    assert s[-1] > 1e-10 * s[0]
    with pytest.raises(ValueError):
        random_mixing_matrix(2, 3, 0)


def test_mix_is_linear():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 3))
    S1 = rng.standard_normal((3, 50))
    S2 = rng.standard_normal((3, 50))
    lhs = mix(A, 2.0 * S1 + 3.0 * S2)
    rhs = 2.0 * mix(A, S1) + 3.0 * mix(A, S2)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
    with pytest.raises(ValueError):
        mix(A, rng.standard_normal((4, 50)))


def test_image_to_source_hand_case():
    img = np.array([[0.0, 2.0], [4.0, 6.0]])
    v = image_to_source(img)
    # shifted values 0,2,4,6 have mean 3 and population variance 5
    sd = np.sqrt(5.0)
    assert np.allclose(v, np.array([0.0, 2.0, 4.0, 6.0]) / sd)
    assert v.min() == 0.0
    assert abs(v.var() - 1.0) < 1e-12


def test_image_to_source_rejects_constant():
    with pytest.raises(ValueError):
        image_to_source(np.full((4, 4), 7.0))


def test_shuffled_epoch_stream_blocks_are_permutations():
    T, epochs = 37, 4
    order = shuffled_epoch_stream(T, epochs, 9)
    assert order.shape == (T * epochs,)
    for e in range(epochs):
        block = np.sort(order[e * T:(e + 1) * T])
        assert np.array_equal(block, np.arange(T))
    assert np.array_equal(order, shuffled_epoch_stream(T, epochs, 9))


def test_matrix_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    m = rng.standard_normal((3, 5)) * np.array([1e-200, 1.0, 1e200])[:, None]
    path = tmp_path / "m.csv"
    write_matrix_csv(m, path)
    back = read_matrix_csv(path)
    assert np.array_equal(m, back)


@given(seed=st.integers(0, 2**32 - 1), r=st.integers(1, 6),
       c=st.integers(1, 6))
@settings(max_examples=25)
def test_matrix_csv_roundtrip_property(seed, r, c, tmp_path_factory):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((r, c)) * 10.0 ** rng.integers(-12, 12, size=(r, c))
    path = tmp_path_factory.mktemp("csv") / "m.csv"
    write_matrix_csv(m, path)
    assert np.array_equal(m, read_matrix_csv(path))


def test_matrix_csv_rejects_nonfinite(tmp_path):
    with pytest.raises(ValueError):
        write_matrix_csv(np.array([[1.0, np.inf]]), tmp_path / "bad.csv")


def test_read_matrix_csv_errors(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3\n")
    with pytest.raises(ValueError, match="ragged"):
        read_matrix_csv(ragged)
    nonnum = tmp_path / "text.csv"
    nonnum.write_text("1,zebra\n")
    with pytest.raises(ValueError, match="non-numeric"):
        read_matrix_csv(nonnum)
    empty = tmp_path / "empty.csv"
    empty.write_text("\n")
    with pytest.raises(ValueError, match="empty"):
        read_matrix_csv(empty)


def test_pgm_roundtrip_binary(tmp_path):
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(9, 13))
    path = tmp_path / "img.pgm"
    write_pgm(img, path)
    assert np.array_equal(load_pgm(path), img)


def test_pgm_roundtrip_ascii(tmp_path):
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(4, 7))
    path = tmp_path / "img.pgm"
    write_pgm(img, path, binary=False)
    assert np.array_equal(load_pgm(path), img)


def test_pgm_sixteen_bit(tmp_path):
    rng = np.random.default_rng(4)
    img = rng.integers(0, 65536, size=(5, 5))
    path = tmp_path / "deep.pgm"
    write_pgm(img, path, maxval=65535)
    assert np.array_equal(load_pgm(path), img)


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P2\n# a comment\n2 2\n# another\n255\n0 10\n20 255\n")
    assert np.array_equal(load_pgm(path), [[0, 10], [20, 255]])


def test_pgm_error_cases(tmp_path):
    bad_magic = tmp_path / "a.pgm"
    bad_magic.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(ValueError, match="magic"):
        load_pgm(bad_magic)
    truncated = tmp_path / "b.pgm"
    truncated.write_bytes(b"P5\n4 4\n255\n" + bytes(7))
    with pytest.raises(ValueError, match="truncated"):
        load_pgm(truncated)
    with pytest.raises(ValueError):
        write_pgm(np.array([[300]]), tmp_path / "c.pgm", maxval=255)


def test_rescale_to_gray():
    out = rescale_to_gray(np.array([0.0, 0.5, 1.0]))
    assert np.array_equal(out, [0, 128, 255])
    assert np.array_equal(rescale_to_gray(np.full(4, 2.2)), np.zeros(4, dtype=int))
