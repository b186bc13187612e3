import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qirat import formats
from qirat.errors import (
    BadMagicError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from qirat.embedders import HashEmbedder
from qirat.store import (
    EmbeddingMatrix,
    IdMap,
    PassageRecord,
    ingest_corpus,
    load_index,
    normalize_rows,
    partition,
    read_passages,
    save_index,
)


class TestIngest:
    def test_three_passages_stub_embedder(self, small_index):
        _, matrix, idmap, _ = small_index
        assert matrix.count == 3 and matrix.dim == 8
        assert idmap.ids == ["p1", "p2", "p3"]
        norms = np.linalg.norm(matrix.values, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-4)
        assert matrix.normalized

    def test_roundtrip_bit_identical(self, small_index):
        path, matrix, idmap, _ = small_index
        loaded, loaded_ids = load_index(path)
        assert np.array_equal(loaded.values, matrix.values)
        assert loaded_ids.ids == idmap.ids
        assert loaded.normalized

    def test_file_size_matches_format(self, tmp_path):
        rng = np.random.default_rng(0)
        count, dim = 200, 16
        values = normalize_rows(rng.standard_normal((count, dim)).astype(np.float32))
        save_index(EmbeddingMatrix(values, normalized=True), IdMap([str(i) for i in range(count)]), tmp_path / "x.emb")
        assert (tmp_path / "x.emb").stat().st_size == 64 + count * dim * 4

    def test_duplicate_id_rejected_by_name(self, tmp_path):
        dupes = [PassageRecord("same", "a"), PassageRecord("same", "b")]
        with pytest.raises(ValueError, match="same"):
            ingest_corpus(dupes, HashEmbedder(4), tmp_path / "d.emb")

    def test_empty_corpus_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            ingest_corpus([], HashEmbedder(4), tmp_path / "e.emb")

    def test_dimension_mismatch_rejected(self, tmp_path, passages):
        class WobblyEmbedder:
            dim = 4
            calls = 0

            def embed(self, text):
                self.calls += 1
                return np.ones(4 if self.calls == 1 else 5, dtype=np.float32)

        with pytest.raises(ValueError, match="dimension mismatch"):
            ingest_corpus(passages, WobblyEmbedder(), tmp_path / "w.emb")


class TestLoadErrors:
    def test_bad_magic(self, tmp_path, small_index):
        path = small_index[0]
        data = bytearray(path.read_bytes())
        data[0:4] = b"XXXX"
        bad = tmp_path / "bad.emb"
        bad.write_bytes(data)
        (tmp_path / "bad.ids").write_text("p1\np2\np3\n")
        with pytest.raises(BadMagicError):
            load_index(bad)

    def test_unsupported_version(self, tmp_path, small_index):
        path = small_index[0]
        data = bytearray(path.read_bytes())
        data[4] = 9
        bad = tmp_path / "v.emb"
        bad.write_bytes(data)
        (tmp_path / "v.ids").write_text("p1\np2\np3\n")
        with pytest.raises(UnsupportedVersionError):
            load_index(bad)

    def test_truncated_payload(self, tmp_path, small_index):
        path = small_index[0]
        data = path.read_bytes()
        # header says 3 rows; drop the last row's bytes
        bad = tmp_path / "t.emb"
        bad.write_bytes(data[: 64 + 2 * 8 * 4])
        (tmp_path / "t.ids").write_text("p1\np2\np3\n")
        with pytest.raises(TruncatedFileError):
            load_index(bad)

    def test_idmap_length_mismatch(self, tmp_path, small_index):
        path = small_index[0]
        bad = tmp_path / "m.emb"
        bad.write_bytes(path.read_bytes())
        (tmp_path / "m.ids").write_text("p1\np2\n")
        with pytest.raises(TruncatedFileError):
            load_index(bad)


class TestPartition:
    def test_ten_by_three(self):
        assert partition(10, 3) == [(0, 4), (4, 7), (7, 10)]

    def test_identity(self):
        assert partition(6, 1) == [(0, 6)]

    def test_singletons(self):
        assert partition(7, 7) == [(i, i + 1) for i in range(7)]

    def test_zero_workers_rejected(self):
        with pytest.raises(ValueError):
            partition(10, 0)

    def test_more_workers_than_rows_gives_trailing_empties(self):
        ranges = partition(2, 4)
        assert ranges == [(0, 1), (1, 2), (2, 2), (2, 2)]

    @given(count=st.integers(0, 500), workers=st.integers(1, 40))
    @settings(max_examples=200)
    def test_coverage_property(self, count, workers):
        ranges = partition(count, workers)
        assert len(ranges) == workers
        rows = [r for start, end in ranges for r in range(start, end)]
        assert rows == list(range(count))
        sizes = [end - start for start, end in ranges]
        assert max(sizes) - min(sizes) <= 1
        assert sizes == sorted(sizes, reverse=True)


class TestNormalize:
    def test_three_four_five(self):
        out = normalize_rows(np.array([[3.0, 4.0]], dtype=np.float32))
        assert np.allclose(out, [[0.6, 0.8]], atol=1e-7)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        m = rng.standard_normal((20, 6)).astype(np.float32)
        once = normalize_rows(m)
        twice = normalize_rows(once)
        assert np.allclose(once, twice, atol=1e-7)

    def test_random_matrix_unit_norms(self):
        rng = np.random.default_rng(2)
        out = normalize_rows(rng.standard_normal((100, 16)).astype(np.float32))
        norms = np.linalg.norm(out.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-6)

    def test_zero_row_rejected_by_index(self):
        m = np.ones((3, 4), dtype=np.float32)
        m[1] = 0.0
        with pytest.raises(ValueError, match="row 1"):
            normalize_rows(m)


class TestTypes:
    def test_passage_invariants(self):
        with pytest.raises(ValueError):
            PassageRecord("", "text")
        with pytest.raises(ValueError):
            PassageRecord("id", "")

    def test_idmap_rejects_duplicates(self):
        with pytest.raises(ValueError, match="dup"):
            IdMap(["a", "dup", "dup"])

    def test_matrix_rejects_nan(self):
        m = np.ones((2, 2), dtype=np.float32)
        m[0, 0] = np.nan
        with pytest.raises(ValueError):
            EmbeddingMatrix(m)

    def test_matrix_normalized_flag_checked(self):
        with pytest.raises(ValueError, match="norm"):
            EmbeddingMatrix(np.full((2, 2), 3.0, dtype=np.float32), normalized=True)


def test_read_passages_jsonl(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "a", "text": "hello", "lang": "en"}\n{"id": "b", "text": "world"}\n')
    records = read_passages(p)
    assert [r.id for r in records] == ["a", "b"]
    assert records[0].lang == "en" and records[1].lang is None
