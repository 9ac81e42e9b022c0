import random

import pytest

from evirank import lexical
from evirank.corpus import Claim, Corpus, Document
from evirank.errors import DataError
from evirank.ranking import RankedEntry, RankedList, rank_candidates, read_run, write_run

from oracles import bm25_brute_force, rank_brute_force


def make_corpus(texts: dict[int, str]) -> Corpus:
    docs = {
        doc_id: Document(doc_id=doc_id, title="", abstract=(text,))
        for doc_id, text in texts.items()
    }
    return Corpus(documents=docs)


class TestTokenize:
    def test_splits_on_non_alphanumeric(self):
        assert lexical.tokenize("COVID-19 patients.") == ["covid", "19", "patients"]

    def test_empty(self):
        assert lexical.tokenize("") == []

    def test_case_folding_keeps_duplicates(self):
        assert lexical.tokenize("Ibuprofen ibuprofen") == ["ibuprofen", "ibuprofen"]

    def test_stopwords_removed_when_configured(self):
        assert lexical.tokenize("the cat sat", frozenset({"the"})) == ["cat", "sat"]


class TestBuildIndex:
    def test_toy_postings(self):
        index = lexical.build_index(make_corpus({1: "a b", 2: "b c"}))
        assert index.postings == {"a": ((1, 1),), "b": ((1, 1), (2, 1)), "c": ((2, 1),)}
        assert index.doc_lengths == {1: 2, 2: 2}
        assert index.avg_doc_len == 2.0
        index.validate()

    def test_empty_corpus(self):
        index = lexical.build_index(Corpus(documents={}))
        assert index.doc_count == 0 and index.postings == {}

    def test_deterministic_rebuild(self):
        corpus = make_corpus({1: "x y z", 2: "y z w", 3: "w"})
        a, b = lexical.build_index(corpus), lexical.build_index(corpus)
        assert a == b
        assert lexical.index_to_bytes(a) == lexical.index_to_bytes(b)

    def test_validate_catches_bad_lengths(self):
        index = lexical.InvertedIndex(postings={"a": ((1, 2),)}, doc_lengths={1: 1})
        with pytest.raises(DataError, match="sum of term frequencies"):
            index.validate()


# Golden values for the length-normalization example.  Corpus: doc 1 = "q a",
# doc 2 = "q b c", four filler docs without q so idf(q) = ln(4.5/2.5) > 0.
# Scores computed by direct evaluation of the BM25 formula (k1=0.9, b=0.4)
# before the index implementation existed; frozen here.
GOLDEN_CORPUS = {1: "q a", 2: "q b c", 3: "x y", 4: "x z", 5: "y z", 6: "w v"}
GOLDEN_SHORT_DOC_SCORE = 0.5964803049746237
GOLDEN_LONG_DOC_SCORE = 0.5478615329465034


class TestBM25Search:
    def test_shorter_document_ranks_first_golden_scores(self):
        index = lexical.build_index(make_corpus(GOLDEN_CORPUS))
        ranked = lexical.bm25_search(index, Claim(claim_id=1, text="q"), k=10)
        assert ranked.doc_ids() == [1, 2]
        assert ranked.entries[0].score == pytest.approx(GOLDEN_SHORT_DOC_SCORE, abs=1e-12)
        assert ranked.entries[1].score == pytest.approx(GOLDEN_LONG_DOC_SCORE, abs=1e-12)

    def test_no_overlap_gives_empty_list(self):
        index = lexical.build_index(make_corpus({1: "a b", 2: "c d"}))
        ranked = lexical.bm25_search(index, Claim(claim_id=1, text="zz qq"), k=5)
        assert ranked.entries == ()

    def test_k_zero_rejected(self):
        index = lexical.build_index(make_corpus({1: "a"}))
        with pytest.raises(ValueError):
            lexical.bm25_search(index, Claim(claim_id=1, text="a"), k=0)

    def test_prefix_property(self):
        index = lexical.build_index(make_corpus(GOLDEN_CORPUS))
        claim = Claim(claim_id=9, text="q x y z w")
        small = lexical.bm25_search(index, claim, k=2)
        large = lexical.bm25_search(index, claim, k=6)
        assert large.doc_ids()[: len(small.entries)] == small.doc_ids()

    def test_pad_fills_with_zero_scores(self):
        index = lexical.build_index(make_corpus({1: "a b", 2: "c d", 3: "e f"}))
        claim = Claim(claim_id=1, text="a")
        unpadded = lexical.bm25_search(index, claim, k=3)
        assert unpadded.doc_ids() == [1]
        padded = lexical.bm25_search(index, claim, k=3, pad=True)
        assert padded.doc_ids() == [1, 2, 3]
        assert [e.score for e in padded.entries[1:]] == [0.0, 0.0]

    def test_pad_never_exceeds_corpus_size(self):
        index = lexical.build_index(make_corpus({1: "a", 2: "b"}))
        padded = lexical.bm25_search(index, Claim(claim_id=1, text="a"), k=10, pad=True)
        assert len(padded.entries) == 2

    def test_adding_disjoint_doc_preserves_relative_order(self):
        base = {1: "q a", 2: "q b c", 3: "x y", 4: "x z", 5: "y z", 6: "w v"}
        claim = Claim(claim_id=1, text="q")
        before = lexical.bm25_search(lexical.build_index(make_corpus(base)), claim, k=10)
        grown = dict(base)
        grown[7] = "unrelated words entirely"
        after = lexical.bm25_search(lexical.build_index(make_corpus(grown)), claim, k=10)
        assert before.doc_ids() == after.doc_ids()

    def test_matches_brute_force_oracle_on_random_corpora(self):
        rng = random.Random(1234)
        vocab = [f"w{i}" for i in range(30)]
        for trial in range(25):
            n_docs = rng.randint(2, 200)
            texts = {
                doc_id: " ".join(rng.choices(vocab, k=rng.randint(1, 40)))
                for doc_id in rng.sample(range(1, 10_000), n_docs)
            }
            corpus = make_corpus(texts)
            index = lexical.build_index(corpus)
            query = " ".join(rng.choices(vocab, k=rng.randint(1, 8)))
            k = rng.randint(1, 50)
            ranked = lexical.bm25_search(index, Claim(claim_id=1, text=query), k=k)
            expected = rank_brute_force(
                bm25_brute_force({d: lexical.tokenize(t) for d, t in texts.items()},
                                 lexical.tokenize(query)),
                k,
            )
            assert ranked.doc_ids() == [d for d, _ in expected]
            for entry, (_, score) in zip(ranked.entries, expected):
                assert entry.score == pytest.approx(score, abs=1e-9)


class TestIndexPersistence:
    def test_round_trip_and_byte_stability(self, tmp_path):
        corpus = make_corpus({1: "alpha beta", 2: "beta gamma", 3: "delta"})
        index = lexical.build_index(corpus)
        path = tmp_path / "index.jsonl"
        first = lexical.save_index(index, path)
        loaded = lexical.load_index(path)
        assert loaded == index
        assert lexical.save_index(loaded, path) == first

    def test_search_identical_after_reload(self, tmp_path):
        index = lexical.build_index(make_corpus(GOLDEN_CORPUS))
        path = tmp_path / "index.jsonl"
        lexical.save_index(index, path)
        loaded = lexical.load_index(path)
        claim = Claim(claim_id=1, text="q x w")
        assert lexical.bm25_search(index, claim, k=5) == lexical.bm25_search(loaded, claim, k=5)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "index.jsonl"
        path.write_text('{"format":"other"}\n{"lengths":{}}\n', encoding="utf-8")
        with pytest.raises(DataError, match="not an index file"):
            lexical.load_index(path)

    def test_unsupported_version_rejected(self, tmp_path):
        path = tmp_path / "index.jsonl"
        path.write_text(
            '{"format":"evirank.index","version":99,"doc_count":0}\n{"lengths":{}}\n',
            encoding="utf-8",
        )
        with pytest.raises(DataError, match="version"):
            lexical.load_index(path)


class TestRankedListAndRunFiles:
    def test_rank_candidates_tie_breaks_by_doc_id(self):
        ranked = rank_candidates(1, [(5, 1.0), (2, 1.0), (9, 2.0)], k=None)
        assert ranked.doc_ids() == [9, 2, 5]
        assert [e.rank for e in ranked.entries] == [1, 2, 3]

    def test_validate_rejects_rank_gap(self):
        bad = RankedList(1, (RankedEntry(1, 1.0, 1), RankedEntry(2, 0.5, 3)))
        with pytest.raises(DataError, match="not contiguous"):
            bad.validate()

    def test_validate_rejects_duplicate_doc(self):
        bad = RankedList(1, (RankedEntry(1, 1.0, 1), RankedEntry(1, 0.5, 2)))
        with pytest.raises(DataError, match="duplicate doc_id"):
            bad.validate()

    def test_validate_rejects_increasing_scores(self):
        bad = RankedList(1, (RankedEntry(1, 0.5, 1), RankedEntry(2, 0.9, 2)))
        with pytest.raises(DataError, match="score increases"):
            bad.validate()

    def test_run_file_round_trip(self, tmp_path):
        lists = [
            rank_candidates(10, [(3, 2.5), (4, 1.25)], k=None),
            rank_candidates(11, [(9, 0.75)], k=None),
        ]
        path = tmp_path / "test.run"
        write_run(lists, path, tag="tagged")
        loaded = read_run(path)
        assert set(loaded) == {10, 11}
        assert loaded[10].doc_ids() == [3, 4]
        assert loaded[10].entries[0].score == pytest.approx(2.5)
        assert "10 Q0 3 1 2.500000 tagged" in path.read_text().splitlines()[0]

    def test_malformed_run_line(self, tmp_path):
        path = tmp_path / "bad.run"
        path.write_text("1 Q0 2 1\n", encoding="utf-8")
        with pytest.raises(DataError, match="malformed run line"):
            read_run(path)
