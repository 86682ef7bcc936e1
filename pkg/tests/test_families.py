import json

import numpy as np
import pytest

import config
import families
from boolfn import spectral_stats
from errors import CapacityError, SpecError
from models import FunctionKind


class TestFamilies:

    def test_dictator_follows_first_coordinate(self):
        f = families.make("dictator:3")
        masks = np.arange(8)
        np.testing.assert_array_equal(f.values, np.where(masks & 1, 1.0, -1.0))
        np.testing.assert_allclose(spectral_stats(f).influences, [1.0, 0.0, 0.0])

    def test_parity_total_influence(self):
        assert spectral_stats(families.make("parity:4")).total_influence == pytest.approx(4.0)

    def test_majority_needs_odd_n(self):
        with pytest.raises(SpecError):
            families.make("majority:4")

    def test_threshold_two_of_three_is_majority(self, maj3):
        np.testing.assert_array_equal(families.make("threshold:3:2").values, maj3.values)

    def test_tribes_mass(self):
        f = families.make("tribes:2:2")
        assert f.n == 4
        assert np.mean(f.values == 1.0) == pytest.approx(7.0 / 16.0)

    def test_subcube(self):
        f = families.make("subcube:5:2")
        assert np.mean(f.values == 1.0) == pytest.approx(0.25)

    def test_random_is_seeded(self):
        a = families.make("random:6:11")
        b = families.make("random:6:11")
        c = families.make("random:6:12")
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_random_bias(self):
        assert np.all(families.make("random:4:1:1.0").values == 1.0)
        with pytest.raises(SpecError):
            families.make("random:4:1:1.5")

    def test_labels_and_kind(self, maj3):
        assert maj3.label == "majority:3"
        assert maj3.kind == FunctionKind.BOOLEAN

    @pytest.mark.parametrize("spec", ["", "bogus:3", "majority", "majority:x", "tribes:2", "threshold:3:4",
                                      "subcube:3:0", "tribes:0:2", "file:"])
    def test_malformed_specs(self, spec):
        with pytest.raises(SpecError):
            families.make(spec)

    def test_too_large(self):
        with pytest.raises(CapacityError):
            families.make("parity:30")


class TestCorpus:

    def test_default(self):
        assert families.parse_corpus("default") == list(config.DEFAULT_CORPUS)
        assert families.parse_corpus(None) == list(config.DEFAULT_CORPUS)

    def test_comma_list(self):
        assert families.parse_corpus(" majority:3, parity:2 ,") == ["majority:3", "parity:2"]

    def test_empty(self):
        with pytest.raises(SpecError):
            families.parse_corpus(" , ")

    def test_default_corpus_parses(self):
        for spec in config.DEFAULT_CORPUS:
            assert families.make(spec).kind == FunctionKind.BOOLEAN


class TestFunctionFiles:

    def test_save_then_load(self, tmp_path, maj3):
        path = tmp_path / "maj3.json"
        families.save_function(maj3, path)
        loaded = families.make(f"file:{path}")
        np.testing.assert_array_equal(loaded.values, maj3.values)
        assert loaded.label == f"file:{path}"

    def test_missing_file(self, tmp_path):
        with pytest.raises(SpecError):
            families.load_function(tmp_path / "nope.json")

    def test_wrong_length(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 2, "values": [1, -1, 1]}))
        with pytest.raises(SpecError):
            families.load_function(path)

    def test_not_an_object(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, -1]")
        with pytest.raises(SpecError):
            families.load_function(path)
