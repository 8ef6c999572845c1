from __future__ import annotations

import random

import pytest

from corpusdrift.snapshot.tokenizers import (DEFAULT_TOKENIZER, PieceTokenizer,
                                             WhitespaceTokenizer, get_tokenizer,
                                             register_tokenizer)

ALPHABET = "abc XYZ 012 _--#\n\t.α⊕日 "


class TestPieceTokenizer:
    def test_lossless_partition(self):
        rng = random.Random(1)
        tok = PieceTokenizer()
        for _ in range(300):
            text = "".join(rng.choices(ALPHABET, k=rng.randint(0, 200)))
            assert "".join(tok.pieces(text)) == text

    def test_long_runs_are_capped(self):
        tok = PieceTokenizer(max_piece_chars=4)
        assert tok.pieces("abcdefghij") == ["abcd", "efgh", "ij"]
        assert tok.count("abcdefghij") == 3

    def test_category_runs(self):
        assert PieceTokenizer().pieces("a_b-c d") == ["a", "_", "b", "-", "c", " ", "d"]

    def test_deterministic(self):
        tok = PieceTokenizer()
        text = "def f(x):\n    return x  # todo α"
        assert tok.pieces(text) == tok.pieces(text)

    def test_empty(self):
        assert PieceTokenizer().pieces("") == []
        assert PieceTokenizer().count("") == 0


class TestRegistry:
    def test_default_registered(self):
        assert get_tokenizer(DEFAULT_TOKENIZER.name) is DEFAULT_TOKENIZER
        assert get_tokenizer("whitespace").count("a b") == 3  # 'a', ' ', 'b'

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            get_tokenizer("nope")

    def test_register_custom(self):
        class Single:
            name = "single"

            def pieces(self, text):
                return [text] if text else []

            def count(self, text):
                return len(self.pieces(text))

        register_tokenizer(Single())
        assert get_tokenizer("single").count("whatever") == 1


class TestWhitespaceTokenizer:
    def test_lossless(self):
        tok = WhitespaceTokenizer()
        text = "  leading and\ttrailing  "
        assert "".join(tok.pieces(text)) == text
