import csv
import math

import numpy as np
import pytest

from fusebench.attribution import (
    CoalitionGame,
    aggregate_modalities,
    build_game,
    build_modality_game,
    modality_game_shapley,
    shapley_exact,
    shapley_report,
    write_waterfall_csv,
)
from fusebench.errors import (
    IncompleteMatrixError,
    TooManyPlayersError,
    UnknownSourceError,
    ValidationError,
)
from fusebench.harness import ExperimentRecord, ResultsStore
from fusebench.learner import GbdtHyperparams
from fusebench.record_store import SourceCatalog, SourceSpec

from oracles import permutation_shapley


# -- game construction and validation ----------------------------------------


def _game(values, players=None, empty=0.5):
    n = (len(values) - 1).bit_length()
    if players is None:
        players = tuple(f"p{i}" for i in range(n))
    return CoalitionGame(players=players, values=tuple(values), empty_value=empty)


def test_game_rejects_too_many_players():
    n = 21
    with pytest.raises(TooManyPlayersError):
        CoalitionGame(
            players=tuple(f"p{i}" for i in range(n)),
            values=(0.5,) * (1 << n),
        )


def test_game_rejects_wrong_value_count():
    with pytest.raises(ValidationError, match="4"):
        _game([0.5, 0.6, 0.7])


def test_game_rejects_non_finite_value():
    with pytest.raises(ValidationError, match="finite"):
        _game([0.5, 0.6, math.nan, 0.7])


def test_game_rejects_empty_value_mismatch():
    with pytest.raises(ValidationError, match="empty"):
        _game([0.6, 0.6, 0.7, 0.8])


def test_game_rejects_duplicate_players():
    with pytest.raises(ValidationError, match="duplicate"):
        _game([0.5, 0.6, 0.7, 0.8], players=("a", "a"))


def test_game_rejects_zero_players():
    with pytest.raises(ValidationError):
        CoalitionGame(players=(), values=(0.5,))


def test_game_value_lookup_by_members():
    g = _game([0.5, 0.6, 0.55, 0.7], players=("a", "b"))
    assert g.value_of([]) == 0.5
    assert g.value_of(["a"]) == 0.6
    assert g.value_of(["b"]) == 0.55
    assert g.value_of(["b", "a"]) == 0.7
    assert g.full_value() == 0.7


# -- shapley_exact axioms -----------------------------------------------------


def test_symmetric_two_player_split():
    g = _game([0.5, 0.7, 0.7, 0.9])
    phi = shapley_exact(g)
    assert phi["p0"] == phi["p1"]
    assert phi["p0"] == pytest.approx(0.2)


def test_dummy_player_gets_exact_zero():
    # p1 never changes the value: v(S + p1) == v(S) for every S
    g = _game([0.5, 0.8, 0.5, 0.8])
    phi = shapley_exact(g)
    assert phi["p1"] == 0.0
    assert phi["p0"] == pytest.approx(0.3)


def test_three_player_example_matches_oracle():
    values = [0.5, 0.6, 0.55, 0.7, 0.5, 0.65, 0.6, 0.8]
    g = _game(values)
    phi = shapley_exact(g)
    lookup = {
        frozenset(i for i in range(3) if mask >> i & 1): values[mask]
        for mask in range(8)
    }
    oracle = permutation_shapley(3, lambda s: lookup[s])
    for i in range(3):
        assert phi[f"p{i}"] == pytest.approx(oracle[i], abs=1e-9)
    assert phi["p0"] == pytest.approx(0.15, abs=1e-9)
    assert phi["p1"] == pytest.approx(0.10, abs=1e-9)
    assert phi["p2"] == pytest.approx(0.05, abs=1e-9)


def test_efficiency_on_random_games():
    rng = np.random.default_rng(11)
    for trial in range(50):
        n = int(rng.integers(1, 9))
        values = [0.5] + [float(v) for v in rng.uniform(0.0, 1.0, (1 << n) - 1)]
        g = _game(values)
        phi = shapley_exact(g)
        residual = math.fsum(phi.values()) - (g.full_value() - g.empty_value)
        assert abs(residual) < 1e-9


def test_linearity_on_random_game_pairs():
    rng = np.random.default_rng(12)
    for trial in range(20):
        n = int(rng.integers(1, 7))
        v1 = [0.5] + [float(v) for v in rng.uniform(0.0, 1.0, (1 << n) - 1)]
        v2 = [0.5] + [float(v) for v in rng.uniform(0.0, 1.0, (1 << n) - 1)]
        a, b = float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))
        combo = [a * x + b * y for x, y in zip(v1, v2)]
        g1, g2 = _game(v1), _game(v2)
        gc = _game(combo, empty=combo[0])
        p1, p2, pc = shapley_exact(g1), shapley_exact(g2), shapley_exact(gc)
        for p in g1.players:
            assert pc[p] == pytest.approx(a * p1[p] + b * p2[p], abs=1e-9)


def test_symmetry_on_size_only_games():
    # value depends only on coalition size, so every player is
    # interchangeable and must receive the identical float
    rng = np.random.default_rng(13)
    for n in (2, 3, 5, 7):
        by_size = [0.5] + [float(v) for v in rng.uniform(0.4, 0.9, n)]
        values = [by_size[bin(mask).count("1")] for mask in range(1 << n)]
        phi = shapley_exact(_game(values))
        assert len(set(phi.values())) == 1


def test_matches_permutation_oracle_on_random_games():
    rng = np.random.default_rng(14)
    sizes = [1, 2, 3, 4, 5, 6] * 16 + [7, 7, 7, 8]
    assert len(sizes) == 100
    for n in sizes:
        values = [0.5] + [float(v) for v in rng.uniform(0.0, 1.0, (1 << n) - 1)]
        g = _game(values)
        phi = shapley_exact(g)
        lookup = {
            frozenset(i for i in range(n) if mask >> i & 1): values[mask]
            for mask in range(1 << n)
        }
        oracle = permutation_shapley(n, lambda s: lookup[s])
        for i in range(n):
            assert phi[f"p{i}"] == pytest.approx(oracle[i], abs=1e-9)


# -- game from a results store ------------------------------------------------


def _catalog():
    return SourceCatalog(
        [
            SourceSpec("a", "text", 1),
            SourceSpec("b", "text", 1),
            SourceSpec("c", "image", 1),
        ]
    )


def _rec(subset, repeat, auroc):
    return ExperimentRecord(
        task_id="t",
        subset_id=subset,
        repeat=repeat,
        seed=repeat,
        hyperparams=GbdtHyperparams(),
        test_auroc=auroc,
        n_train=80,
        n_test=20,
    )


SUBSET_MEANS = {
    "a": 0.60,
    "b": 0.62,
    "c": 0.55,
    "a+b": 0.70,
    "a+c": 0.68,
    "b+c": 0.66,
    "a+b+c": 0.75,
}


def _filled_store(tmp_path, means=SUBSET_MEANS, jitter=0.02):
    store = ResultsStore(tmp_path / "matrix.jsonl")
    for subset, mean in means.items():
        store.add_result(_rec(subset, 0, mean - jitter))
        store.add_result(_rec(subset, 1, mean + jitter))
    return store


def test_build_game_values_are_subset_means(tmp_path):
    store = _filled_store(tmp_path)
    game = build_game(store, "t", _catalog())
    assert game.players == ("a", "b", "c")
    assert len(game.values) == 8
    assert game.value_of([]) == 0.5
    for subset, mean in SUBSET_MEANS.items():
        members = subset.split("+")
        assert game.value_of(members) == pytest.approx(mean, abs=1e-12)


def test_build_game_missing_subset_named(tmp_path):
    means = {k: v for k, v in SUBSET_MEANS.items() if k != "a+c"}
    store = _filled_store(tmp_path, means)
    with pytest.raises(IncompleteMatrixError, match=r"a\+c"):
        build_game(store, "t", _catalog())


def test_build_game_single_player(tmp_path):
    store = _filled_store(tmp_path)
    game = build_game(store, "t", _catalog(), excluded=("b", "c"))
    assert game.players == ("a",)
    assert game.values == (0.5, pytest.approx(0.60, abs=1e-12))


def test_build_game_excluded_honored(tmp_path):
    store = _filled_store(tmp_path)
    game = build_game(store, "t", _catalog(), excluded=("c",))
    assert game.players == ("a", "b")
    assert game.value_of(["a", "b"]) == pytest.approx(0.70, abs=1e-12)


def test_build_game_unknown_excluded_id(tmp_path):
    store = _filled_store(tmp_path)
    with pytest.raises(UnknownSourceError):
        build_game(store, "t", _catalog(), excluded=("nope",))


def test_build_game_all_excluded(tmp_path):
    store = _filled_store(tmp_path)
    with pytest.raises(ValidationError):
        build_game(store, "t", _catalog(), excluded=("a", "b", "c"))


def test_build_game_single_repeat_filter(tmp_path):
    store = _filled_store(tmp_path, jitter=0.02)
    game = build_game(store, "t", _catalog(), repeat=1)
    assert game.value_of(["a"]) == pytest.approx(0.62, abs=1e-12)


# -- report and per-repeat variant ---------------------------------------------


def test_shapley_report_efficiency_and_modality_sum(tmp_path):
    store = _filled_store(tmp_path)
    report = shapley_report(store, "t", _catalog())
    assert abs(report.efficiency_residual) < 1e-9
    assert report.full_value == pytest.approx(0.75, abs=1e-12)
    assert math.fsum(report.per_modality.values()) == pytest.approx(
        math.fsum(report.per_player.values()), abs=1e-12
    )
    assert set(report.per_modality) == {"text", "image"}


def test_per_repeat_agrees_when_repeats_are_uniform(tmp_path):
    store = _filled_store(tmp_path)
    base = shapley_report(store, "t", _catalog())
    split = shapley_report(store, "t", _catalog(), per_repeat=True)
    for p in base.per_player:
        assert split.per_player[p] == pytest.approx(base.per_player[p], abs=1e-12)
    assert abs(split.efficiency_residual) < 1e-9


def test_per_repeat_requires_complete_per_repeat_matrix(tmp_path):
    store = _filled_store(tmp_path)
    store.add_result(_rec("a", 2, 0.61))  # repeat 2 exists only for one subset
    assert shapley_report(store, "t", _catalog()).task_id == "t"
    with pytest.raises(IncompleteMatrixError, match="repeat 2"):
        shapley_report(store, "t", _catalog(), per_repeat=True)


# -- modality aggregation -------------------------------------------------------


def test_aggregate_modalities_adds_member_values():
    phi = {"a": 0.15, "b": 0.10, "c": 0.05}
    agg = aggregate_modalities(phi, _catalog())
    assert agg["text"] == pytest.approx(0.25)
    assert agg["image"] == pytest.approx(0.05)


def test_aggregate_modalities_keeps_negative_values():
    phi = {"a": 0.15, "b": -0.05, "c": 0.05}
    agg = aggregate_modalities(phi, _catalog())
    assert agg["text"] == pytest.approx(0.10)


def test_aggregate_single_modality_equals_total():
    cat = SourceCatalog([SourceSpec("a", "text", 1), SourceSpec("b", "text", 1)])
    phi = {"a": 0.2, "b": -0.1}
    agg = aggregate_modalities(phi, cat)
    assert list(agg) == ["text"]
    assert agg["text"] == pytest.approx(math.fsum(phi.values()))


# -- modality-level game --------------------------------------------------------


def test_modality_game_exact_cover_values(tmp_path):
    store = _filled_store(tmp_path)
    game = build_modality_game(store, "t", _catalog())
    assert game.players == ("text", "image")
    v_text = (0.60 + 0.62 + 0.70) / 3
    v_image = 0.55
    v_both = (0.68 + 0.66 + 0.75) / 3
    assert game.value_of(["text"]) == pytest.approx(v_text, abs=1e-12)
    assert game.value_of(["image"]) == pytest.approx(v_image, abs=1e-12)
    assert game.value_of(["text", "image"]) == pytest.approx(v_both, abs=1e-12)


def test_modality_game_within_cover_differs_on_mixed(tmp_path):
    store = _filled_store(tmp_path)
    exact = build_modality_game(store, "t", _catalog(), cover="exact")
    within = build_modality_game(store, "t", _catalog(), cover="within")
    # singleton coalitions coincide; the mixed coalition widens to all subsets
    assert within.value_of(["text"]) == exact.value_of(["text"])
    assert within.value_of(["image"]) == exact.value_of(["image"])
    all_subsets = sum(SUBSET_MEANS.values()) / len(SUBSET_MEANS)
    assert within.value_of(["text", "image"]) == pytest.approx(
        all_subsets, abs=1e-12
    )
    assert within.full_value() != exact.full_value()


def test_modality_game_shapley_efficiency(tmp_path):
    store = _filled_store(tmp_path)
    phi = modality_game_shapley(store, "t", _catalog())
    game = build_modality_game(store, "t", _catalog())
    total = math.fsum(phi.values())
    assert abs(total - (game.full_value() - 0.5)) < 1e-9
    # hand check the two-player closed form
    v_text = game.value_of(["text"])
    v_image = game.value_of(["image"])
    v_both = game.full_value()
    assert phi["text"] == pytest.approx(
        0.5 * (v_text - 0.5) + 0.5 * (v_both - v_image), abs=1e-9
    )


def test_modality_game_rejects_unknown_cover(tmp_path):
    store = _filled_store(tmp_path)
    with pytest.raises(ValidationError, match="cover"):
        build_modality_game(store, "t", _catalog(), cover="nope")


# -- waterfall export -----------------------------------------------------------


def test_waterfall_csv_order_and_cumulative(tmp_path):
    phi = {"b": 0.10, "a": 0.15, "c": 0.05}
    path = tmp_path / "waterfall.csv"
    write_waterfall_csv(phi, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["entity"] for r in rows] == ["a", "b", "c"]
    running = 0.5
    for row in rows:
        running += float(row["phi"])
        assert float(row["cumulative"]) == pytest.approx(running, abs=1e-15)
    assert float(rows[-1]["cumulative"]) == pytest.approx(
        0.5 + math.fsum(phi.values()), abs=1e-12
    )


def test_waterfall_ties_break_by_name(tmp_path):
    path = tmp_path / "w.csv"
    write_waterfall_csv({"y": 0.1, "x": 0.1}, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["entity"] for r in rows] == ["x", "y"]
