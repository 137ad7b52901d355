import numpy as np
import pytest

from hizfo.datasets import ByteVocab, CharCorpus, two_moons, two_moons_batches
from hizfo.tensors import ConfigurationError
from hizfo.verify import suite_restore_exactness, verify_all


class TestTwoMoons:
    def test_deterministic(self):
        x1, y1 = two_moons(200, seed=4)
        x2, y2 = two_moons(200, seed=4)
        assert np.array_equal(x1, x2) and np.array_equal(y1, y2)

    def test_labels_balanced(self):
        _, y = two_moons(400, seed=0)
        assert y.sum() == 200

    def test_batches_shapes(self):
        batches = two_moons_batches(3, 32, seed=1)
        assert len(batches) == 3
        assert batches[0].inputs.shape == (32, 2)
        assert batches[0].targets.shape == (32,)


class TestCharCorpus:
    def test_vocab_capped_with_oov(self):
        data = bytes(range(256)) * 4
        vocab = ByteVocab(data)
        assert vocab.size == 64  # 63 most frequent bytes + OOV id 0
        assert vocab.encode(b"\xff")[0] in range(64)

    def test_rare_bytes_map_to_oov(self):
        data = b"aaaabbbbcccc" + b"\x01"
        vocab = ByteVocab(data, max_size=4)
        ids = vocab.encode(b"abc\x01")
        assert ids[3] == 0 and all(i > 0 for i in ids[:3])

    def test_windows_are_shifted_pairs(self):
        corpus = CharCorpus(b"hello world, hello charlm " * 40, context=8)
        batch = corpus.batches(1, 4, seed=0)[0]
        assert batch.inputs.shape == (4, 8) and batch.targets.shape == (4, 8)
        assert np.array_equal(batch.inputs[0, 1:], batch.targets[0, :-1])

    def test_too_short_corpus_rejected(self):
        with pytest.raises(ConfigurationError):
            CharCorpus(b"abc", context=8)


class TestVerifySuites:
    def test_all_suites_pass_fast(self):
        results = verify_all(fast=True)
        assert len(results) == 6
        for r in results:
            assert r.passed, f"{r.name}: {r.detail}"

    def test_corrupted_restore_is_caught(self):
        r = suite_restore_exactness(fast=True, corrupt_restore=True)
        assert not r.passed
