import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from survkit.errors import NoComparablePairsError, ValidationError
from survkit.metrics import ModelComparisonReport, c_index, compare_models

from conftest import make_dataset


def brute_force(times, status, scores):
    conc = disc = tied = 0
    n = len(times)
    for j in range(n):
        for i in range(n):
            if times[j] < times[i] and status[j] == 1:
                if scores[j] > scores[i]:
                    conc += 1
                elif scores[j] < scores[i]:
                    disc += 1
                else:
                    tied += 1
    return conc, disc, tied


def test_perfect():
    r = c_index([1, 2, 3], [1, 1, 1], [3, 2, 1])
    assert (r.c_index, r.comparable) == (1.0, 3)


def test_hand_example():
    r = c_index([2, 4, 5, 7], [1, 0, 1, 1], [1.5, 0.9, 1.2, 1.4])
    assert (r.comparable, r.concordant, r.c_index) == (4, 3, 0.75)


def test_all_tied_scores():
    r = c_index([1, 3, 3, 8], [1, 0, 1, 0], [0.2] * 4)
    assert r.c_index == 0.5
    assert c_index([1, 3, 3, 8], [1, 0, 1, 0], [0.2] * 4, tie_credit=0.0).c_index == 0.0


def test_tied_times_not_comparable():
    with pytest.raises(NoComparablePairsError, match="no comparable pairs"):
        c_index([4, 4], [1, 1], [1.0, 0.0])


def test_all_censored():
    with pytest.raises(NoComparablePairsError):
        c_index([1, 2, 3], [0, 0, 0], [1, 2, 3])


def test_input_checks():
    with pytest.raises(ValidationError):
        c_index([1], [1], [0.0])
    with pytest.raises(ValidationError):
        c_index([1, 2], [1, 1], [0.0])


def test_oracle_200_instances():
    rng = np.random.default_rng(0)
    done = 0
    while done < 200:
        n = int(rng.integers(2, 13))
        t = rng.integers(1, 8, n)
        d = rng.integers(0, 2, n)
        s = rng.integers(0, 4, n).astype(float)
        c, di, ti = brute_force(t, d, s)
        if c + di + ti == 0:
            continue
        r = c_index(t, d, s)
        assert (r.concordant, r.discordant, r.tied_risk) == (c, di, ti)
        assert r.comparable == c + di + ti
        assert r.c_index == (c + 0.5 * ti) / (c + di + ti)
        done += 1


instance = st.integers(2, 12).flatmap(lambda n: st.tuples(
    st.lists(st.integers(1, 10), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(-40, 40).map(lambda v: v / 8), min_size=n, max_size=n),
))


@given(instance)
@settings(max_examples=300, deadline=None)
def test_properties(inst):
    t, d, s = (np.array(v) for v in inst)
    if sum(brute_force(t, d, s)) == 0:
        return
    r = c_index(t, d, s)
    assert 0 <= r.c_index <= 1
    mono = c_index(t, d, np.exp(s) * 3 + 1)
    assert (mono.concordant, mono.discordant, mono.tied_risk) == (r.concordant, r.discordant, r.tied_risk)
    if r.tied_risk == 0:
        assert c_index(t, d, -s).c_index == pytest.approx(1 - r.c_index, abs=1e-15)


def test_compare_models_ordering_and_round_trip():
    test = make_dataset([1, 2, 3, 4], [1, 1, 1, 1], [[4.0], [3.0], [2.0], [1.0]])
    report = compare_models([("inverted", lambda X: -X[:, 0]), ("perfect", lambda X: X[:, 0])], test,
                            {"seed": 1, "fraction": 0.7, "n_train": 9, "n_test": 4})
    assert [n for n, _ in report.entries] == ["perfect", "inverted"]
    assert [r.c_index for _, r in report.entries] == [1.0, 0.0]
    d = report.to_dict()
    assert d["schema_version"] == 1 and d["results"][0]["model"] == "perfect"
    again = ModelComparisonReport.from_json(report.to_json())
    assert again.entries == report.entries and again.split == report.split
    assert again.to_json() == report.to_json()


def test_compare_models_stable_on_ties():
    test = make_dataset([1, 2, 3], [1, 1, 1], [[3.0], [2.0], [1.0]])
    report = compare_models([(n, lambda X: X[:, 0]) for n in ("b", "a", "c")], test)
    assert [n for n, _ in report.entries] == ["b", "a", "c"]


def test_compare_models_annotates_errors():
    test = make_dataset([1, 2], [0, 0], [[0.0], [1.0]])
    with pytest.raises(NoComparablePairsError, match="mymodel"):
        compare_models([("mymodel", lambda X: X[:, 0])], test)
    with pytest.raises(ValidationError):
        compare_models([], test)
