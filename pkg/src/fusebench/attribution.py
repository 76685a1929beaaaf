"""Exact Shapley attribution of subset performance to sources.

The completed experiment matrix defines a coalition game: a coalition is
a source subset, its value the subset's mean test AUROC, and the empty
coalition is pinned at 0.5 (a no-information classifier). Exact Shapley
values over that game say how much of the full-model lift each source is
responsible for. Two modality-level views are provided: summing member
sources' values (additive aggregation) and a small game built directly
over modalities whose coalition values average the matching subsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    IncompleteMatrixError,
    TooManyPlayersError,
    ValidationError,
)
from .harness import ResultsStore, subset_id_for
from .record_store import MODALITIES, SourceCatalog

MAX_PLAYERS = 20
DEFAULT_EMPTY_VALUE = 0.5


@dataclass(frozen=True)
class CoalitionGame:
    """A value for every subset of an ordered player list.

    ``values[mask]`` is the coalition whose members are the players at
    the set bit positions of ``mask``; index 0 is the empty coalition.
    """

    players: tuple[str, ...]
    values: tuple[float, ...]
    empty_value: float = DEFAULT_EMPTY_VALUE

    def __post_init__(self):
        n = len(self.players)
        if n == 0:
            raise ValidationError("game needs at least one player")
        if len(set(self.players)) != n:
            raise ValidationError("duplicate player ids")
        if n > MAX_PLAYERS:
            raise TooManyPlayersError(
                f"{n} players exceeds the exact-enumeration bound {MAX_PLAYERS}"
            )
        if len(self.values) != 1 << n:
            raise ValidationError(
                f"expected {1 << n} coalition values, got {len(self.values)}"
            )
        if not all(math.isfinite(v) for v in self.values):
            raise ValidationError("coalition values must be finite")
        if self.values[0] != self.empty_value:
            raise ValidationError(
                f"empty coalition value {self.values[0]} != "
                f"declared empty_value {self.empty_value}"
            )

    @property
    def n_players(self) -> int:
        return len(self.players)

    def full_value(self) -> float:
        return self.values[(1 << self.n_players) - 1]

    def value_of(self, members: Iterable[str]) -> float:
        mask = 0
        index = {p: i for i, p in enumerate(self.players)}
        for m in members:
            mask |= 1 << index[m]
        return self.values[mask]


def shapley_exact(game: CoalitionGame) -> dict[str, float]:
    """Per-player Shapley value by full subset enumeration.

    phi_i = sum over S not containing i of |S|!(n-|S|-1)!/n! times the
    marginal value of adding i to S. Per-size marginal sums are collected
    in floating point and combined with exact rational weights, so the
    only roundings are the input differences and one final conversion.
    """
    n = game.n_players
    if n > MAX_PLAYERS:
        raise TooManyPlayersError(
            f"{n} players exceeds the exact-enumeration bound {MAX_PLAYERS}"
        )
    values = np.asarray(game.values, dtype=np.float64)
    masks = np.arange(1 << n, dtype=np.uint32)
    sizes = np.bitwise_count(masks)
    n_fact = math.factorial(n)
    weights = [
        Fraction(math.factorial(k) * math.factorial(n - k - 1), n_fact)
        for k in range(n)
    ]
    phi: dict[str, float] = {}
    for i, player in enumerate(game.players):
        bit = np.uint32(1 << i)
        without = masks[(masks & bit) == 0]
        diffs = values[without | bit] - values[without]
        by_size = np.bincount(sizes[without], weights=diffs, minlength=n)
        total = Fraction(0)
        for k in range(n):
            total += weights[k] * Fraction(float(by_size[k]))
        phi[player] = float(total)
    return phi


def build_game(
    store: ResultsStore,
    task_id: str,
    catalog: SourceCatalog,
    excluded: Iterable[str] = (),
    empty_value: float = DEFAULT_EMPTY_VALUE,
    repeat: int | None = None,
) -> CoalitionGame:
    """Coalition game from a task's completed subset matrix.

    Players are the non-excluded sources in catalog order; a coalition's
    value is its subset's mean test AUROC over repeats (or the single
    AUROC of one ``repeat`` when given). Every non-empty subset must be
    present in the store.
    """
    excluded = set(excluded)
    for sid in excluded:
        catalog.spec(sid)
    players = tuple(s.id for s in catalog if s.id not in excluded)
    if not players:
        raise ValidationError("every source is excluded")
    means: dict[str, list[float]] = {}
    for rec in store.results(task_id):
        if repeat is None or rec.repeat == repeat:
            means.setdefault(rec.subset_id, []).append(rec.test_auroc)
    subset_mean = {
        sid: math.fsum(vals) / len(vals) for sid, vals in means.items()
    }
    values = [empty_value]
    missing: list[str] = []
    for mask in range(1, 1 << len(players)):
        ids = [players[i] for i in range(len(players)) if mask >> i & 1]
        sid = subset_id_for(ids)
        if sid in subset_mean:
            values.append(subset_mean[sid])
        else:
            values.append(math.nan)
            missing.append(sid)
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        where = f"task {task_id!r}"
        if repeat is not None:
            where += f" repeat {repeat}"
        raise IncompleteMatrixError(
            f"store lacks {len(missing)} subset(s) for {where}: {shown}{more}"
        )
    return CoalitionGame(
        players=players, values=tuple(values), empty_value=empty_value
    )


def aggregate_modalities(
    phi: Mapping[str, float], catalog: SourceCatalog
) -> dict[str, float]:
    """Sum per-source values into their modalities; sign is preserved."""
    by_modality: dict[str, list[float]] = {}
    for player, value in phi.items():
        by_modality.setdefault(catalog.modality(player), []).append(value)
    return {
        m: math.fsum(by_modality[m])
        for m in MODALITIES
        if m in by_modality
    }


@dataclass(frozen=True)
class ShapleyReport:
    task_id: str
    per_player: dict[str, float]
    per_modality: dict[str, float]
    empty_value: float
    full_value: float

    @property
    def efficiency_residual(self) -> float:
        return math.fsum(self.per_player.values()) - (
            self.full_value - self.empty_value
        )


def shapley_report(
    store: ResultsStore,
    task_id: str,
    catalog: SourceCatalog,
    excluded: Iterable[str] = (),
    per_repeat: bool = False,
) -> ShapleyReport:
    """Source- and modality-level attribution for one task.

    Default: coalition values are subset means over repeats, attributed
    once. With ``per_repeat`` each repeat is attributed as its own game
    and the resulting values are averaged; the two agree when every
    subset carries the same repeats, and differ when they do not.
    """
    if per_repeat:
        repeats = sorted({r.repeat for r in store.results(task_id)})
        games = [
            build_game(store, task_id, catalog, excluded, repeat=r)
            for r in repeats
        ] or [build_game(store, task_id, catalog, excluded)]
        phis = [shapley_exact(g) for g in games]
        phi = {
            p: math.fsum(ph[p] for ph in phis) / len(phis)
            for p in games[0].players
        }
        full = math.fsum(g.full_value() for g in games) / len(games)
        empty = games[0].empty_value
    else:
        game = build_game(store, task_id, catalog, excluded)
        phi = shapley_exact(game)
        full = game.full_value()
        empty = game.empty_value
    return ShapleyReport(
        task_id=task_id,
        per_player=phi,
        per_modality=aggregate_modalities(phi, catalog),
        empty_value=empty,
        full_value=full,
    )


def build_modality_game(
    store: ResultsStore,
    task_id: str,
    catalog: SourceCatalog,
    excluded: Iterable[str] = (),
    empty_value: float = DEFAULT_EMPTY_VALUE,
    cover: str = "exact",
) -> CoalitionGame:
    """Game whose players are modalities rather than sources.

    A modality coalition M is valued by averaging subset mean AUROCs:
    with ``cover="exact"`` over subsets whose sources span exactly the
    modalities in M, with ``cover="within"`` over subsets whose sources
    stay inside M (touching any non-empty part of it).
    """
    if cover not in ("exact", "within"):
        raise ValidationError(f"cover must be 'exact' or 'within', got {cover!r}")
    source_game = build_game(store, task_id, catalog, excluded, empty_value)
    modality_of = {p: catalog.modality(p) for p in source_game.players}
    players = tuple(
        m for m in MODALITIES if any(modality_of[p] == m for p in source_game.players)
    )
    index = {m: i for i, m in enumerate(players)}
    n_src = len(source_game.players)
    # modality bitmask of every source subset
    subset_cover = np.zeros(1 << n_src, dtype=np.int64)
    for i, p in enumerate(source_game.players):
        bit = 1 << index[modality_of[p]]
        step = 1 << i
        for mask in range(step, 1 << n_src):
            if mask >> i & 1:
                subset_cover[mask] |= bit
    src_values = np.asarray(source_game.values)
    values = [empty_value]
    for mmask in range(1, 1 << len(players)):
        if cover == "exact":
            pick = subset_cover == mmask
        else:
            pick = (subset_cover != 0) & ((subset_cover & ~mmask) == 0)
        chosen = src_values[pick]
        if chosen.size == 0:
            raise IncompleteMatrixError(
                f"no subsets cover modality mask {mmask} for task {task_id!r}"
            )
        values.append(math.fsum(chosen.tolist()) / chosen.size)
    return CoalitionGame(
        players=players, values=tuple(values), empty_value=empty_value
    )


def modality_game_shapley(
    store: ResultsStore,
    task_id: str,
    catalog: SourceCatalog,
    excluded: Iterable[str] = (),
    cover: str = "exact",
) -> dict[str, float]:
    return shapley_exact(
        build_modality_game(store, task_id, catalog, excluded, cover=cover)
    )


def write_waterfall_csv(
    phi: Mapping[str, float],
    path: str | Path,
    empty_value: float = DEFAULT_EMPTY_VALUE,
) -> None:
    """Waterfall rows (entity, phi, cumulative), largest contribution first.

    The cumulative column starts from the empty-coalition value, so the
    last row lands on the full-coalition value.
    """
    ordered = sorted(phi.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w") as fh:
        fh.write("entity,phi,cumulative\n")
        running = empty_value
        for name, value in ordered:
            running += value
            fh.write(f"{name},{value!r},{running!r}\n")
