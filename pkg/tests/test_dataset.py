import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordgrade.dataset import (
    AugmentSpec,
    GradedSample,
    SplitSpec,
    augment,
    featurize,
    load_dataset,
    split,
    write_dataset,
)
from ordgrade.errors import DataValidationError, InvalidInputError, InvalidParameterError


def make_samples(n, rubric="be concise", reference="the answer is four"):
    return [
        GradedSample(f"s{i}", f"question {i}", f"answer {i}", rubric, reference, 1 + i % 5)
        for i in range(n)
    ]


def write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


class TestLoad:
    def test_three_lines_in_order(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_dataset(make_samples(3), path)
        loaded = load_dataset(path)
        assert [s.id for s in loaded] == ["s0", "s1", "s2"]
        assert loaded == make_samples(3)

    def test_score_out_of_range_names_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        recs = [s.to_dict() for s in make_samples(3)]
        recs[1]["score"] = 6
        write_lines(path, recs)
        with pytest.raises(DataValidationError, match="line 2") as err:
            load_dataset(path)
        assert err.value.line == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("")
        assert load_dataset(path) == []

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"id": "a"}\n{not json\n')
        with pytest.raises(DataValidationError, match="line"):
            load_dataset(path)

    @pytest.mark.parametrize("bad", [{"response": ""}, {"instruction": None}, {"score": 2.5}, {"score": True}])
    def test_field_validation(self, tmp_path, bad):
        rec = make_samples(1)[0].to_dict()
        rec.update(bad)
        path = tmp_path / "d.jsonl"
        write_lines(path, [rec])
        with pytest.raises(DataValidationError):
            load_dataset(path)

    def test_missing_optionals_are_absent(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(path, [{"id": "x", "instruction": "q", "response": "r", "score": 3}])
        (s,) = load_dataset(path)
        assert s.rubric is None and s.reference_answer is None


class TestSplit:
    def test_95_5(self):
        train, val = split(make_samples(100), SplitSpec(0.95, seed=3))
        assert (len(train), len(val)) == (95, 5)

    def test_deterministic(self):
        s = make_samples(50)
        assert split(s, SplitSpec(0.8, 7)) == split(s, SplitSpec(0.8, 7))

    def test_seeds_differ_and_partition(self):
        s = make_samples(1000)
        a = split(s, SplitSpec(0.95, 1))
        b = split(s, SplitSpec(0.95, 2))
        assert [x.id for x in a[1]] != [x.id for x in b[1]]
        for train, val in (a, b):
            ids_t = {x.id for x in train}
            ids_v = {x.id for x in val}
            assert not ids_t & ids_v
            assert sorted(ids_t | ids_v) == sorted(x.id for x in s)

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(2, 300), frac=st.floats(0.01, 0.99), seed=st.integers(0, 2**31))
    def test_partition_property(self, n, frac, seed):
        s = make_samples(n)
        train, val = split(s, SplitSpec(frac, seed))
        assert len(train) == int(np.floor(frac * n + 0.5))
        assert sorted(x.id for x in train + val) == sorted(x.id for x in s)

    def test_rejects_tiny_input(self):
        with pytest.raises(InvalidInputError):
            split(make_samples(1))

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1])
    def test_rejects_bad_fraction(self, frac):
        with pytest.raises(InvalidParameterError):
            SplitSpec(frac)


class TestAugment:
    def test_zero_probs_identity(self):
        s = make_samples(200)
        assert augment(s, AugmentSpec(0.0, 0.0, seed=1)) == s

    def test_certain_drop(self):
        out = augment(make_samples(200), AugmentSpec(1.0, 1.0, seed=1))
        assert all(x.rubric is None and x.reference_answer is None for x in out)

    def test_rates(self):
        out = augment(make_samples(10_000), AugmentSpec(0.5, 0.5, seed=11))
        no_rubric = np.array([x.rubric is None for x in out])
        no_ref = np.array([x.reference_answer is None for x in out])
        assert abs(no_rubric.mean() - 0.5) <= 0.02
        assert abs(no_ref.mean() - 0.5) <= 0.02
        assert abs((no_rubric & no_ref).mean() - 0.25) <= 0.02

    def test_only_optional_fields_change(self):
        s = make_samples(500)
        out = augment(s, AugmentSpec(0.3, 0.7, seed=5))
        for a, b in zip(s, out):
            assert (a.id, a.instruction, a.response, a.score) == (b.id, b.instruction, b.response, b.score)

    def test_deterministic(self):
        s = make_samples(300)
        assert augment(s, AugmentSpec(seed=9)) == augment(s, AugmentSpec(seed=9))

    def test_rejects_bad_prob(self):
        with pytest.raises(InvalidParameterError):
            AugmentSpec(1.5, 0.0)


class TestFeaturize:
    def test_deterministic(self):
        s = make_samples(1)[0]
        np.testing.assert_array_equal(featurize(s), featurize(s))

    def test_rubric_sensitivity(self):
        s = make_samples(1)[0]
        dropped = GradedSample(s.id, s.instruction, s.response, None, s.reference_answer, s.score)
        assert not np.array_equal(featurize(s), featurize(dropped))

    @settings(max_examples=100, deadline=None)
    @given(
        st.text(min_size=1, max_size=80),
        st.text(min_size=1, max_size=80),
        st.one_of(st.none(), st.text(max_size=40)),
        st.integers(8, 512),
    )
    def test_unit_norm(self, instruction, response, rubric, dim):
        v = featurize(GradedSample("x", instruction, response, rubric, None, 3), dim)
        assert v.shape == (dim,)
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-9

    def test_rejects_small_dim(self):
        with pytest.raises(InvalidParameterError):
            featurize(make_samples(1)[0], 4)
