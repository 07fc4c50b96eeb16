import pytest

from shared.grid_parser import GRID_HELP, GridParser, parse_grid


class TestGridParser:

    @pytest.mark.parametrize("text, expected", [
        ("5", [5]),
        ("1,3", [1, 3]),
        ("3-7", [3, 4, 5, 6, 7]),
        ("1, 3, 5-6", [1, 3, 5, 6]),
        ("7;3;3", [3, 7]),
    ])
    def test_valid_grids(self, text, expected):
        assert parse_grid(text) == expected

    @pytest.mark.parametrize("text", ["", "  ", "a", "7-3", "1-2-3", "1,,x"])
    def test_invalid_grids(self, text):
        with pytest.raises(ValueError):
            parse_grid(text)

    def test_ranges_kept_and_reset(self):
        parser = GridParser()
        assert parser.parse("1, 3-5")
        assert parser.ranges == [(1, 1), (3, 5)]
        assert not parser.parse("3-x")
        assert parser.ranges == [] and parser.values == []

    def test_error_message_names_the_format(self):
        with pytest.raises(ValueError, match="ranges") as info:
            parse_grid("x")
        assert GRID_HELP in str(info.value)
        assert "'x'" in str(info.value)
