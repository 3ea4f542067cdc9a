import pytest

from hsiclust import ParameterError
from hsiclust.config import load_config, parse_config_text, parse_value


class TestParseValue:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("42", 42),
            ("-3", -3),
            ("2.5", 2.5),
            ("true", True),
            ("false", False),
            ('"hello world"', "hello world"),
            ("'x'", "x"),
            ("bare_word.npy", "bare_word.npy"),
            ("[1, 2, 3]", [1, 2, 3]),
            ("[220, 306, 408]", [220, 306, 408]),
            ("[]", []),
        ],
    )
    def test_scalars_and_lists(self, text, expected):
        assert parse_value(text) == expected

    def test_unterminated_list(self):
        with pytest.raises(ParameterError):
            parse_value("[1, 2")


class TestParseConfigText:
    def test_comments_and_blanks_skipped(self):
        values = parse_config_text(
            """
            # an experiment
            data = scene.npy  # inline comment
            seed = 7
            """
        )
        assert values == {"data": "scene.npy", "seed": 7}

    def test_hash_inside_quotes_kept(self):
        values = parse_config_text('out = "runs/#1"')
        assert values == {"out": "runs/#1"}

    def test_duplicate_key_rejected(self):
        with pytest.raises(ParameterError, match="duplicate"):
            parse_config_text("seed = 1\nseed = 2")

    def test_missing_equals_rejected(self):
        with pytest.raises(ParameterError, match="key = value"):
            parse_config_text("just words")


class TestLoadConfig:
    def test_overrides_win(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("data = scene.npy\nseed = 1\nout = a\n")
        cfg = load_config(path, {"seed": 9, "out": None})
        assert cfg.seed == 9
        assert cfg.out == "a"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("data = scene.npy\nbogus = 1\n")
        with pytest.raises(ParameterError, match="bogus"):
            load_config(path)

    def test_missing_data_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("seed = 1\n")
        with pytest.raises(ParameterError, match="data"):
            load_config(path)

    def test_grid_lists_parse(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("data = s.npy\natoms = [220, 306, 408]\nsparsity = [10, 5, 2]\n")
        cfg = load_config(path)
        assert cfg.value_list("atoms") == [220, 306, 408]
        assert cfg.value_list("sparsity") == [10, 5, 2]
        with pytest.raises(ParameterError, match="grid"):
            cfg.scalar("atoms")

    def test_bad_enum_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("data = s.npy\nmethod = fuzzy\n")
        with pytest.raises(ParameterError, match="method"):
            load_config(path)
