from __future__ import annotations

import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochmatch.errors import ModelError
from stochmatch.estimators import (
    EstimatorConfig,
    estimate_opt,
    estimate_opt_given_edge,
    estimate_opt_given_empty,
    exact_opt,
    exact_opt_given_edge,
    exact_opt_given_empty,
    sample_values,
    zero_matching_probability,
)
from stochmatch.generators import make_sn_family, random_model
from stochmatch.model import StochasticModel, VertexSpec

from .conftest import point_model

F = Fraction


class TestExact:
    @pytest.mark.parametrize("n", range(1, 7))
    def test_sn_closed_form(self, n):
        assert exact_opt(make_sn_family(n, rational=True), rational=True) == F(3 * n - 1, 4)

    def test_single_certain_edge(self):
        assert exact_opt(point_model([(1, 1), (1, 1)], [(0, 1)]), rational=True) == 1

    def test_empty_model(self):
        empty = StochasticModel((), ())
        assert exact_opt(empty) == 0
        assert exact_opt_given_empty(empty) == 0

    def test_given_edge(self, s2):
        assert exact_opt_given_edge(point_model([(1, 1), (1, 1)], [(0, 1)]), (0, 1)) == 1
        assert exact_opt_given_edge(s2, (0, 1), rational=True) == 1

    def test_given_edge_requires_start_edge(self, s2):
        with pytest.raises(ModelError, match="arrives at 2"):
            exact_opt_given_edge(s2, (0, 2))
        with pytest.raises(ModelError):
            exact_opt_given_edge(s2, (2, 3))

    def test_given_empty(self, s2):
        assert exact_opt_given_empty(s2, rational=True) == 1
        assert exact_opt_given_empty(point_model([(1, 1), (1, 1)], [(0, 1)])) == 0

    def test_given_empty_without_start_arrivals(self):
        m = random_model(6, 3, 9, rational=True)
        late = StochasticModel(tuple(VertexSpec(v.id, v.arrival + 1, v.deadline + 1, v.death_dist)
                                     for v in m.vertices), m.edges)
        assert exact_opt_given_empty(late, rational=True) == exact_opt(late, rational=True)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 10**6), st.data())
    def test_removing_an_edge_never_helps(self, n, horizon, seed, data):
        m = random_model(n, horizon, seed, rational=True)
        if not m.edges:
            return
        e = data.draw(st.sampled_from(m.edges))
        smaller = StochasticModel(m.vertices, tuple(x for x in m.edges if x != e))
        assert exact_opt(smaller, rational=True) <= exact_opt(m, rational=True)


class TestConfig:
    def test_defaults(self):
        cfg = EstimatorConfig(epsilon=0.5)
        assert cfg.sample_count(4) == math.ceil(4**4 / 0.25)
        assert EstimatorConfig(delta=0.25).run_count() == math.ceil(18 * math.log(4))
        assert EstimatorConfig(sample_override=7).sample_count(100) == 7

    @pytest.mark.parametrize("kwargs", [{"epsilon": 0}, {"delta": 1}, {"delta": 0},
                                        {"sample_override": 0}, {"runs_override": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EstimatorConfig(**kwargs)

    def test_derive_is_deterministic(self):
        cfg = EstimatorConfig(seed=3)
        assert cfg.derive(1, 2) == cfg.derive(1, 2)
        assert cfg.derive(1, 2).seed != cfg.derive(2, 1).seed


class TestMonteCarlo:
    def test_no_edges_is_degenerate(self):
        m = StochasticModel((VertexSpec(0, 1, 1, (1,)), VertexSpec(1, 2, 2, (1,))), ())
        est = estimate_opt(m, EstimatorConfig(sample_override=10))
        assert est.value == 0 and est.degenerate_zero

    def test_unlikely_matching_is_degenerate(self):
        m = StochasticModel((VertexSpec(0, 1, 2, (0.9, 0.1)), VertexSpec(1, 2, 2, (1,))), ((0, 1),))
        assert zero_matching_probability(m) == pytest.approx(0.9)
        est = estimate_opt(m, EstimatorConfig(sample_override=100))
        assert est.degenerate_zero and est.value == 0

    def test_zero_probability_uses_best_matching(self):
        # disjoint edges with presence 1/2 and 1/5
        m = StochasticModel((VertexSpec(0, 1, 2, (0.5, 0.5)), VertexSpec(1, 2, 2, (1,)),
                             VertexSpec(2, 1, 2, (0.8, 0.2)), VertexSpec(3, 2, 2, (1,))),
                            ((0, 1), (2, 3)))
        assert zero_matching_probability(m) == pytest.approx(0.5 * 0.8)
        assert not estimate_opt(m, EstimatorConfig(sample_override=10)).degenerate_zero

    def test_point_model_is_exact_every_run(self):
        m = point_model([(1, 2), (2, 3), (1, 1), (1, 3), (3, 3)], [(0, 1), (0, 2), (1, 3), (3, 4)])
        est = estimate_opt(m, EstimatorConfig(sample_override=50, runs_override=5))
        assert est.value == 2
        assert est.run_values == (2.0,) * 5
        assert est.max_run_std == 0

    def test_sn4_concentrates(self, s4):
        est = estimate_opt(s4, EstimatorConfig(sample_override=20_000, seed=1))
        assert abs(est.value - 11 / 4) < 0.05
        assert est.value <= 4
        assert est.max_run_std <= 5
        assert est.samples_used == 20_000 * est.runs

    def test_given_edge(self, s2):
        est = estimate_opt_given_edge(s2, (0, 1), EstimatorConfig(sample_override=100))
        assert est.value == 1
        with pytest.raises(ModelError):
            estimate_opt_given_edge(s2, (0, 2), EstimatorConfig())

    def test_given_empty_sn2(self, s2):
        est = estimate_opt_given_empty(s2, EstimatorConfig(sample_override=4000, seed=5))
        assert abs(est.value - 1) < 0.1

    def test_given_empty_without_start_arrivals_is_plain_estimate(self):
        m = StochasticModel((VertexSpec(0, 2, 3, (0.5, 0.5)), VertexSpec(1, 2, 3, (0.3, 0.7)),
                             VertexSpec(2, 3, 3, (1,))), ((0, 1), (1, 2)))
        cfg = EstimatorConfig(sample_override=500, seed=8)
        assert estimate_opt_given_empty(m, cfg, start=1) == estimate_opt(m, cfg)

    def test_reproducible(self, s4):
        cfg = EstimatorConfig(sample_override=3000, seed=42)
        assert estimate_opt(s4, cfg) == estimate_opt(s4, cfg)
        assert estimate_opt(s4, cfg).value != estimate_opt(s4, EstimatorConfig(sample_override=3000, seed=43)).value

    def test_budget_warning(self, s2, caplog):
        with caplog.at_level(logging.WARNING):
            estimate_opt(s2, EstimatorConfig(sample_override=50, budget=100))
        assert "budget" in caplog.text


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 10**6))
def test_single_sample_values_are_unbiased(n, horizon, seed):
    from stochmatch.sampling import enumerate_instantiations

    m = random_model(n, horizon, seed, rational=True)
    items = list(enumerate_instantiations(m, rational=True))
    deaths = np.array([[inst[v] for v in m.ids] for inst, _ in items], dtype=np.int64).reshape(len(items), m.n)
    values = sample_values(m, deaths)
    assert sum(p * int(x) for (_, p), x in zip(items, values)) == exact_opt(m, rational=True)
    dropped = sample_values(m, deaths, drop_start=1)
    assert sum(p * int(x) for (_, p), x in zip(items, dropped)) == exact_opt_given_empty(m, rational=True)
