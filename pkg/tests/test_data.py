import numpy as np
import pytest

from structattn import data
from structattn import tensor as T
from structattn.config import RunConfig
from structattn.model import build_model


class TestVocab:
    def test_min_count_filters(self):
        v = data.build_vocab([["a", "a", "b"]], min_count=2)
        assert "a" in v.token_to_id and "b" not in v.token_to_id
        assert len(v) == 3  # pad, unk, a

    def test_min_count_one_keeps_all(self):
        v = data.build_vocab([["a", "a", "b"]], min_count=1)
        assert {"a", "b"} <= set(v.token_to_id)

    def test_deterministic_across_builds(self):
        corpus = [["x", "y", "z", "y"], ["z", "z", "q"]]
        a = data.build_vocab(corpus).id_to_token
        b = data.build_vocab(corpus).id_to_token
        assert a == b

    def test_frequency_then_lexicographic_order(self):
        v = data.build_vocab([["b", "b", "c", "a", "a", "d"]])
        assert v.id_to_token[2:] == ["a", "b", "c", "d"]

    def test_reserved_ids(self):
        v = data.build_vocab([["w"]])
        assert v.token_to_id[data.PAD_TOKEN] == 0
        assert v.token_to_id[data.UNK_TOKEN] == 1
        assert v.id("unseen-token") == 1

    def test_empty_corpus_rejected(self):
        with pytest.raises(data.DataError):
            data.build_vocab([])


class TestLoadDataset:
    def test_parse_line(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("3\tgood food\n", encoding="utf-8")
        vocab = data.build_vocab([["good", "food"]])
        [ex] = data.load_dataset(path, vocab)
        assert ex.label == 3 and len(ex.tokens) == 2

    def test_unknown_word_maps_to_unk(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("0\tgood mystery\n", encoding="utf-8")
        vocab = data.build_vocab([["good"]])
        [ex] = data.load_dataset(path, vocab)
        assert ex.tokens[1] == 1

    def test_round_trip_token_count(self, tmp_path):
        lines = ["0\ta b c", "1\td e", "0\tf"]
        path = tmp_path / "d.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        vocab = data.build_vocab(data.corpus_tokens(path))
        examples = data.load_dataset(path, vocab)
        assert sum(len(ex.tokens) for ex in examples) == 6

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("0\tok here\nnot-a-label\tx\n", encoding="utf-8")
        vocab = data.build_vocab([["ok"]])
        with pytest.raises(data.DataError, match=":2:"):
            data.load_dataset(path, vocab)

    def test_pairs(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("2\ta b\tc d e\n", encoding="utf-8")
        vocab = data.build_vocab([["a", "b", "c", "d", "e"]])
        [ex] = data.load_dataset(path, vocab, pairs=True)
        assert ex.label == 2 and len(ex.hypothesis) == 2 and len(ex.premise) == 3

    def test_empty_sentence_rejected(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("0\t\n", encoding="utf-8")
        vocab = data.build_vocab([["x"]])
        with pytest.raises(data.DataError, match="empty"):
            data.load_dataset(path, vocab)

    def test_lowercase_flag(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("0\tGood\n", encoding="utf-8")
        vocab = data.build_vocab([["good"]])
        [kept] = data.load_dataset(path, vocab, lowercase=True)
        [dropped] = data.load_dataset(path, vocab, lowercase=False)
        assert kept.tokens[0] == vocab.token_to_id["good"]
        assert dropped.tokens[0] == 1


class TestLoadPretrained:
    def test_full_coverage(self, tmp_path, rng):
        vocab = data.build_vocab([["x", "y"]])
        path = tmp_path / "vec.txt"
        path.write_text("x 1 2 3\ny 4 5 6\n", encoding="utf-8")
        table, coverage = data.load_pretrained(path, vocab, 3, rng)
        assert coverage == 1.0
        assert np.array_equal(table.table.data[vocab.token_to_id["x"]], [1, 2, 3])

    def test_empty_file_random_everything(self, tmp_path, rng):
        vocab = data.build_vocab([["x", "y"]])
        path = tmp_path / "vec.txt"
        path.write_text("", encoding="utf-8")
        table, coverage = data.load_pretrained(path, vocab, 3, rng)
        assert coverage == 0.0
        assert table.table.shape == (4, 3)

    def test_dimension_mismatch_reports_line(self, tmp_path, rng):
        vocab = data.build_vocab([["x"]])
        path = tmp_path / "vec.txt"
        path.write_text("x 1 2 3\nx 1 2\n", encoding="utf-8")
        with pytest.raises(data.DataError, match=":2:"):
            data.load_pretrained(path, vocab, 3, rng)

    def test_vocab_untouched(self, tmp_path, rng):
        vocab = data.build_vocab([["x", "y"]])
        before = list(vocab.id_to_token)
        path = tmp_path / "vec.txt"
        path.write_text("x 9 9\nzz 1 1\n", encoding="utf-8")
        data.load_pretrained(path, vocab, 2, rng)
        assert vocab.id_to_token == before


class TestBatch:
    def examples(self, lengths, labels=None):
        labels = labels or [0] * len(lengths)
        return [data.Example(np.arange(2, 2 + n), lab) for n, lab in zip(lengths, labels)]

    def test_equal_lengths_no_padding(self, rng):
        [b] = data.batch(self.examples([3, 3]), size=2, rng=rng)
        assert b.mask.all() and b.tokens.shape == (2, 3)

    def test_batch_of_one_mask_all_true(self):
        [b] = data.batch(self.examples([4]), size=1)
        assert b.mask.all()

    def test_pads_to_batch_max(self):
        [b] = data.batch(self.examples([2, 4]), size=2)
        assert b.tokens.shape == (2, 4)
        assert b.mask.sum() == 6
        assert (b.tokens[b.mask == False] == 0).all()  # noqa: E712

    def test_shuffle_is_seeded(self):
        exs = self.examples([2] * 10)
        a = data.batch(exs, 3, np.random.default_rng(5))
        b = data.batch(exs, 3, np.random.default_rng(5))
        for x, y in zip(a, b):
            assert np.array_equal(x.tokens, y.tokens)

    def test_pair_batches(self):
        exs = [data.PairExample(np.array([2, 3]), np.array([4]), 1)]
        [b] = data.batch(exs, 1)
        assert b.hyp_tokens.shape == (1, 2) and b.prem_tokens.shape == (1, 1)

    def test_bad_size(self):
        with pytest.raises(ValueError):
            data.batch(self.examples([2]), 0)


def test_padding_inertness_through_model(rng):
    """Model outputs match between a lone sentence and its padded batch row."""
    cfg = RunConfig(d=6, u=5, d_a=4, r=3, head="dense", b=7, classes=2, dropout=0.0).validate()
    net = build_model(cfg, vocab_size=10, rng=rng)
    examples = [data.Example(np.array([2, 3, 4]), 0), data.Example(np.array([5, 6, 7, 8, 2, 3]), 1)]
    [padded] = data.batch(examples, size=2)
    with T.no_grad():
        for i, ex in enumerate(examples):
            alone, _ = net.forward(ex.tokens)
            batched, _ = net.forward(padded.tokens[i], padded.mask[i])
            assert np.abs(alone.data - batched.data).max() < 1e-6
