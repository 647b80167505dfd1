import re
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contextfed.textprep import (
    PrepConfig,
    autocorrect,
    clean_text,
    default_config,
    expand_abbreviations,
    load_table,
    reduce_letter_runs,
    replace_emoji,
)

CFG = default_config()


class TestCleanText:
    def test_structural_removals(self):
        assert clean_text("Email me at a@b.com #fun 123!", CFG) == ["email", "me", "at"]

    def test_letter_runs_and_emoji(self):
        assert clean_text("goooood 😂", CFG) == [
            "good", "face", "with", "tears", "of", "joy",
        ]

    def test_empty(self):
        assert clean_text("", CFG) == []

    def test_links_and_mentions(self):
        assert clean_text("see https://x.co/a and www.b.com @bob", CFG) == ["see", "and"]

    def test_digit_tokens_dropped_whole(self):
        assert clean_text("abc123 2day", CFG) == []

    def test_apostrophes_stripped(self):
        assert clean_text("don't", CFG) == ["dont"]

    def test_unknown_emoji_dropped(self):
        # U+1F9EA test tube is not in the bundled table
        assert clean_text("ok \U0001f9ea", CFG) == ["ok"]

    def test_abbreviation_expansion_in_pipeline(self):
        assert clean_text("IDK lol", CFG) == [
            "i", "do", "not", "know", "laughing", "out", "loud",
        ]

    def test_mixed_case_run_collapses(self):
        assert clean_text("gOoOoOd", CFG) == ["good"]


class TestExpandAbbreviations:
    def test_lookup(self):
        table = {"idk": ("i", "do", "not", "know")}
        assert expand_abbreviations(["idk"], table) == ["i", "do", "not", "know"]

    def test_identity_for_non_keys(self):
        assert expand_abbreviations(["hello"], {"idk": ("x",)}) == ["hello"]

    def test_empty(self):
        assert expand_abbreviations([], {"idk": ("x",)}) == []

    def test_single_pass_no_reexpansion(self):
        table = {"a": ("b",), "b": ("c",)}
        assert expand_abbreviations(["a"], table) == ["b"]


def _damerau_levenshtein(a: str, b: str) -> int:
    """Reference DL distance (adjacent transpositions), independent oracle."""
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                d[i][j] = min(d[i][j], d[i - 2][j - 2] + 1)
    return d[len(a)][len(b)]


class TestAutocorrect:
    def test_picks_lexicographically_smallest_candidate(self):
        # Oracle: both dictionary words sit at DL distance 1 from "helo".
        dictionary = {"hello", "help"}
        assert {w for w in dictionary if _damerau_levenshtein("helo", w) == 1} == dictionary
        assert autocorrect(["helo"], frozenset(dictionary)) == ["hello"]

    def test_in_dictionary_unchanged(self):
        assert autocorrect(["hello"], frozenset({"hello", "help"})) == ["hello"]

    def test_no_candidate_within_distance_one(self):
        dictionary = frozenset({"hello", "help"})
        assert all(_damerau_levenshtein("xqzv", w) > 1 for w in dictionary)
        assert autocorrect(["xqzv"], dictionary) == ["xqzv"]

    def test_transposition_counts_as_one_edit(self):
        assert autocorrect(["hlelo"], frozenset({"hello"})) == ["hello"]

    @given(st.text(alphabet=string.ascii_lowercase, min_size=1, max_size=6))
    @settings(max_examples=60, deadline=None)
    def test_corrections_agree_with_distance_oracle(self, token):
        dictionary = frozenset({"cat", "cart", "card", "art", "dog", "dot"})
        out = autocorrect([token], dictionary)[0]
        candidates = sorted(
            w for w in dictionary if _damerau_levenshtein(token, w) == 1
        )
        if token in dictionary:
            assert out == token
        elif candidates:
            assert out == candidates[0]
        else:
            assert out == token


class TestReduceLetterRuns:
    def test_long_run(self):
        assert reduce_letter_runs("goooood") == "good"

    def test_double_preserved(self):
        assert reduce_letter_runs("good") == "good"

    def test_custom_max(self):
        assert reduce_letter_runs("aaaaa", max_run=3) == "aaa"


class TestReplaceEmoji:
    def test_variation_selector_ignored(self):
        table = {"❤": ("red", "heart")}
        assert replace_emoji("x❤️y", table).split() == ["x", "red", "heart", "y"]

    def test_longest_sequence_wins(self):
        table = {"ab": ("pair",), "a": ("single",)}
        assert replace_emoji("ab", table).split() == ["pair"]


class TestBundledTables:
    def test_abbreviation_keys_are_lowercase_single_tokens(self):
        for key in CFG.abbreviation_table:
            assert key == key.lower() and " " not in key

    def test_emoji_values_lowercase_alphabetic(self):
        for words in CFG.emoji_table.values():
            for word in words:
                assert re.fullmatch(r"[a-z]+", word), word

    def test_no_expansion_value_is_a_key(self):
        # guards idempotence of repeated cleaning with the default config
        keys = set(CFG.abbreviation_table)
        for words in CFG.abbreviation_table.values():
            assert not (set(words) & keys)

    def test_starter_set_sizes(self):
        assert len(CFG.abbreviation_table) >= 100
        assert len(CFG.emoji_table) >= 100


class TestLoadTable:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "table.tsv"
        path.write_text("idk\ti do not know\nbrb\tbe right back\n", encoding="utf-8")
        table = load_table(path)
        assert table == {"idk": ("i", "do", "not", "know"), "brb": ("be", "right", "back")}

    def test_missing_tab_raises(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("justakey\n", encoding="utf-8")
        with pytest.raises(ValueError, match="expected key<TAB>"):
            load_table(path)


class TestPipelineInvariants:
    @given(st.text(max_size=80))
    @settings(max_examples=150, deadline=None)
    def test_output_is_lowercase_alpha(self, raw):
        for token in clean_text(raw, CFG):
            assert re.fullmatch(r"[a-z]+", token), token

    @given(st.text(max_size=80))
    @settings(max_examples=150, deadline=None)
    def test_idempotent_with_autocorrect_off(self, raw):
        once = clean_text(raw, CFG)
        again = clean_text(" ".join(once), CFG)
        assert once == again

    def test_deterministic(self):
        raw = "OMG soooo goooood 😂 @you #tag a@b.c http://x 42"
        assert clean_text(raw, CFG) == clean_text(raw, CFG)

    def test_autocorrect_on_requires_no_digit_or_symbol_leaks(self):
        cfg = PrepConfig(
            abbreviation_table=CFG.abbreviation_table,
            emoji_table=CFG.emoji_table,
            autocorrect_enabled=True,
            dictionary=frozenset({"hello", "world"}),
        )
        assert clean_text("helo wrold", cfg) == ["hello", "world"]
