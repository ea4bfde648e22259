import numpy as np
import pytest

from transbem.cache import CACHE_ENV, CacheKey, MatrixCache, default_cache_dir


def key(k=1.5, kind="L"):
    return CacheKey(kind, complex(k), (4.0,), "abc123", (5, 4, 0.3))


@pytest.fixture
def mat():
    rng = np.random.default_rng(0)
    return rng.standard_normal((7, 5)) + 1j * rng.standard_normal((7, 5))


def test_round_trip_exact(tmp_path, mat):
    c = MatrixCache(tmp_path)
    c.put(key(), mat)
    got = c.get(key())
    assert got.tobytes() == mat.tobytes() and c.hits == 1 and c.misses == 0


def test_miss_on_other_key(tmp_path, mat):
    c = MatrixCache(tmp_path)
    c.put(key(), mat)
    assert c.get(key(1.5 + 1e-15)) is None
    assert c.get(key(kind="schur")) is None
    assert c.misses == 2


def test_distinct_filenames():
    assert key(1.5).filename() != key(np.nextafter(1.5, 2.0)).filename()
    assert key(1.5).filename() == key(1.5).filename()


def test_corrupt_and_truncated_files_are_misses(tmp_path, mat):
    c = MatrixCache(tmp_path)
    p = c.put(key(), mat)
    raw = p.read_bytes()
    p.write_bytes(raw[:-16])
    assert c.get(key()) is None
    p.write_bytes(b"garbage" + raw)
    assert c.get(key()) is None
    c.put(key(), mat)
    assert c.get(key()) is not None


def test_stale_header_is_miss(tmp_path, mat):
    c = MatrixCache(tmp_path)
    p = c.put(key(), mat)
    other = MatrixCache(tmp_path)
    # same file name, different header content
    stale = CacheKey("L", 1.5, (2.0,), "abc123", (5, 4, 0.3))
    p2 = other.put(stale, mat)
    p2.rename(p)
    assert c.get(key()) is None


def test_entries_and_clear(tmp_path, mat):
    c = MatrixCache(tmp_path)
    c.put(key(1.0), mat)
    c.put(key(2.0), mat)
    entries = c.entries()
    assert len(entries) == 2 and {e["k"][0] for e in entries} == {1.0, 2.0}
    assert all(e["shape"] == [7, 5] for e in entries)
    assert c.clear() == 2 and c.entries() == []
    assert MatrixCache(tmp_path / "missing").entries() == []


def test_no_temporary_files_left(tmp_path, mat):
    c = MatrixCache(tmp_path)
    c.put(key(), mat)
    assert [p.suffix for p in tmp_path.iterdir()] == [".bin"]


def test_env_override(monkeypatch, tmp_path):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "x"))
    assert default_cache_dir() == tmp_path / "x"
    assert MatrixCache().directory == tmp_path / "x"
