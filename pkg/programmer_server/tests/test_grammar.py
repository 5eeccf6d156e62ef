"""Grammar reader and action-F1 tests."""

import pytest

from programmer_server.errors import DataError
from programmer_server.grammar import action_f1, parse_actions


class TestParseActions:
    def test_noaction(self):
        assert parse_actions("NoAction") is None

    def test_plain_actions(self):
        assert parse_actions("DELETE cat ; INSERT dog") == [
            ("DELETE", "cat"),
            ("INSERT", "dog"),
        ]

    def test_positions_allowed_and_dropped(self):
        assert parse_actions("DELETE cat @1 ; INSERT dog @1") == [
            ("DELETE", "cat"),
            ("INSERT", "dog"),
        ]

    def test_bad_verb(self):
        with pytest.raises(DataError):
            parse_actions("REMOVE cat")

    def test_empty(self):
        with pytest.raises(DataError):
            parse_actions("   ")

    def test_at_token_rejected(self):
        with pytest.raises(DataError):
            parse_actions("INSERT @x")


class TestActionF1:
    def test_perfect(self):
        assert action_f1("DELETE a ; INSERT b", "DELETE a ; INSERT b") == 1.0

    def test_both_noaction(self):
        assert action_f1("NoAction", "NoAction") == 1.0

    def test_one_noaction(self):
        assert action_f1("NoAction", "INSERT x") == 0.0
        assert action_f1("INSERT x", "NoAction") == 0.0

    def test_partial(self):
        f1 = action_f1("DELETE a ; INSERT b ; INSERT zz", "DELETE a ; INSERT b ; INSERT c")
        assert f1 == pytest.approx(2 / 3)

    def test_unparseable_prediction_scores_zero(self):
        assert action_f1("complete garbage", "INSERT x") == 0.0

    def test_positions_ignored_in_matching(self):
        assert action_f1("INSERT b @7", "INSERT b @2") == 1.0
