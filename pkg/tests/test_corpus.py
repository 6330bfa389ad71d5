import json

import pytest

from ideaforge.corpus import (Corpus, Document, dedupe, ingest_jsonl,
                              ingest_scopus_csv, is_empty_abstract,
                              normalize_title, serialize_jsonl, slice_by_year)
from ideaforge.errors import DataError


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def doc(i, title="t", abstract="a", year=2015, extra=None):
    return Document(id=f"d{i}", title=title, abstract=abstract, year=year,
                    extra=extra)


class TestIngestJsonl:
    def test_three_wellformed_lines(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [
            {"id": "a", "title": "A", "abstract": "x", "year": 2015},
            {"id": "b", "title": "B", "abstract": "y", "year": 2016},
            {"id": "c", "title": "C", "abstract": "z", "year": 2017},
        ])
        corpus, report = ingest_jsonl(path)
        assert len(corpus) == 3
        assert report.accepted == 3
        assert report.rejected == []

    def test_nonnumeric_year_rejected_with_reason(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"id": "a", "title": "A", "abstract": "x", "year": "20l9"}])
        corpus, report = ingest_jsonl(path)
        assert len(corpus) == 0
        assert report.rejected == [{"line": 1, "reason": "year not an integer"}]

    def test_missing_year_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"id": "a", "title": "A", "abstract": "x"}])
        corpus, report = ingest_jsonl(path)
        assert len(corpus) == 0
        assert report.rejected[0]["reason"] == "year missing"

    def test_missing_id_autogenerated(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"title": "A", "abstract": "x", "year": 2015}])
        corpus, _ = ingest_jsonl(path)
        assert corpus.documents[0].id == "doc-1"

    def test_year_as_string_accepted(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"id": "a", "title": "A", "abstract": "x", "year": "2015"}])
        corpus, _ = ingest_jsonl(path)
        assert corpus.documents[0].year == 2015

    def test_large_corpus_size(self, tmp_path):
        # corpus-scale identity: every valid line becomes one document
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [
            {"id": f"d{i}", "title": f"T{i}", "abstract": "x",
             "year": 2010 + (i % 10)}
            for i in range(5425)
        ])
        corpus, report = ingest_jsonl(path)
        assert len(corpus) == 5425
        assert report.accepted == 5425

    def test_unreadable_file_fatal(self, tmp_path):
        with pytest.raises(DataError):
            ingest_jsonl(tmp_path / "missing.jsonl")

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [
            {"id": "a", "title": "A", "abstract": "x", "year": 2015},
            {"id": "a", "title": "B", "abstract": "y", "year": 2016},
        ])
        corpus, report = ingest_jsonl(path)
        assert len(corpus) == 1
        assert "duplicate id" in report.rejected[0]["reason"]

    def test_roundtrip_byte_identical(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [
            {"id": "a", "title": "A", "abstract": "x", "year": 2015,
             "extra": {"doi": "10.1/x"}},
            {"id": "b", "title": "B", "abstract": "", "year": 2016},
        ])
        corpus, _ = ingest_jsonl(path)
        out1 = tmp_path / "r1.jsonl"
        out2 = tmp_path / "r2.jsonl"
        serialize_jsonl(corpus, out1)
        corpus2, _ = ingest_jsonl(out1)
        serialize_jsonl(corpus2, out2)
        assert out1.read_bytes() == out2.read_bytes()


class TestIngestScopusCsv:
    def test_two_rows(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "Title,Abstract,Year,EID\n"
            "Alpha,Some abstract,2015,eid-1\n"
            "Beta,Other abstract,2016,eid-2\n", encoding="utf-8")
        corpus, report = ingest_scopus_csv(path)
        assert len(corpus) == 2
        assert corpus.documents[0].id == "eid-1"
        assert report.accepted == 2

    def test_no_abstract_placeholder_kept_and_flagged(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "Title,Abstract,Year,EID\n"
            "Alpha,[No abstract available],2015,eid-1\n", encoding="utf-8")
        corpus, report = ingest_scopus_csv(path)
        assert len(corpus) == 1
        assert report.empty_abstract_ids == ["eid-1"]

    def test_quoted_field_with_comma(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            'Title,Abstract,Year,EID\n'
            '"a, b",abs,2015,eid-1\n', encoding="utf-8")
        corpus, _ = ingest_scopus_csv(path)
        assert corpus.documents[0].title == "a, b"

    def test_quoted_field_with_newline(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            'Title,Abstract,Year,EID\n'
            '"line one\nline two",abs,2015,eid-1\n', encoding="utf-8")
        corpus, _ = ingest_scopus_csv(path)
        assert corpus.documents[0].title == "line one\nline two"

    def test_missing_mapped_column_fatal(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("Title,Year,EID\nAlpha,2015,eid-1\n", encoding="utf-8")
        with pytest.raises(DataError, match="Abstract"):
            ingest_scopus_csv(path)

    def test_custom_column_map(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("T,A,Y\nAlpha,abs,2015\n", encoding="utf-8")
        corpus, _ = ingest_scopus_csv(
            path, column_map={"T": "title", "A": "abstract", "Y": "year"})
        assert corpus.documents[0].title == "Alpha"
        assert corpus.documents[0].id == "doc-2"


class TestDedupe:
    def test_survivor_has_more_fields(self):
        a = doc(1, title="Self-Driving Cars", abstract="")
        b = doc(2, title="self driving cars.", abstract="full text here")
        merged, report = dedupe(Corpus([a, b]))
        assert [d.id for d in merged.documents] == ["d2"]
        assert report.merges == [
            {"survivor_id": "d2", "removed_id": "d1",
             "title_key": "self driving cars"}]

    def test_distinct_titles_identity(self):
        docs = [doc(1, title="One"), doc(2, title="Two")]
        merged, report = dedupe(Corpus(docs))
        assert merged.documents == docs
        assert report.merges == []

    def test_three_way_tie_keeps_earliest(self):
        docs = [doc(1, title="Same Title"), doc(2, title="Same  Title!"),
                doc(3, title="same title")]
        merged, report = dedupe(Corpus(docs))
        assert [d.id for d in merged.documents] == ["d1"]
        assert len(report.merges) == 2
        assert all(m["survivor_id"] == "d1" for m in report.merges)

    def test_idempotent(self):
        docs = [doc(1, title="Same Title", abstract=""),
                doc(2, title="same title", abstract="x"),
                doc(3, title="Other")]
        once, _ = dedupe(Corpus(docs))
        twice, report2 = dedupe(once)
        assert twice.documents == once.documents
        assert report2.merges == []

    def test_empty_titles_never_merged(self):
        docs = [doc(1, title=""), doc(2, title="")]
        merged, report = dedupe(Corpus(docs))
        assert len(merged) == 2
        assert report.merges == []


class TestSliceByYear:
    def test_basic_slicing(self):
        docs = [doc(1, year=2010), doc(2, year=2010), doc(3, year=2012)]
        idx = slice_by_year(Corpus(docs), 2010, 2012)
        assert idx.sizes() == [2, 0, 1]
        assert idx.years == [2010, 2011, 2012]

    def test_ten_year_range(self):
        docs = [doc(i, year=2010 + i % 10) for i in range(40)]
        idx = slice_by_year(Corpus(docs), 2010, 2019)
        assert len(idx) == 10

    def test_out_of_range_excluded_and_counted(self):
        docs = [doc(1, year=2009), doc(2, year=2015)]
        idx = slice_by_year(Corpus(docs), 2010, 2019)
        assert idx.excluded == 1

    def test_partition_property(self):
        docs = [doc(i, year=2005 + (i * 7) % 20) for i in range(60)]
        corpus = Corpus(docs)
        idx = slice_by_year(corpus, 2010, 2019)
        assert sum(idx.sizes()) + idx.excluded == len(corpus)

    def test_inverted_range_fatal(self):
        with pytest.raises(DataError):
            slice_by_year(Corpus([doc(1)]), 2019, 2010)


def test_normalize_title():
    assert normalize_title("Self-Driving Cars!") == "self driving cars"
    assert normalize_title("  A   B  ") == "a b"


def test_empty_abstract_sentinels():
    assert is_empty_abstract("")
    assert is_empty_abstract("  [No Abstract Available] ")
    assert not is_empty_abstract("real text")
