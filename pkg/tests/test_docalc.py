from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from abscheck.config import settings
from abscheck.errors import ClusterMapError, InconclusiveAllZeroMass, SizeLimitExceeded, ZeroEvidence
from abscheck.models.graph import Admg, ClusterMap, Dag
from abscheck.models.query import RuleQuery
from abscheck.services import engine
from abscheck.services.docalc_service import (
    check_clustered_factorization,
    clustered_model,
    extend_over_latents,
    high_admg_from_cluster_map,
    rule_applicable,
    rule_sides,
    verify_rule_on_low,
)
from abscheck.services.graph_service import canonical_dag, non_ancestors_in, surgery_remove_incoming
from tests.generators import latent_model, model_on, rng_for, valid_observed_map


def rq(rule, y, x=(), z=(), w=()):
    return RuleQuery(rule=rule, x=frozenset(x), y=frozenset(y), z=frozenset(z), w=frozenset(w))


@pytest.fixture(scope="module")
def front_door():
    """U -> X, U -> Y, X -> M -> Y with U latent."""
    g = Dag(
        nodes=("U", "X", "M", "Y"),
        edges=frozenset({("U", "X"), ("U", "Y"), ("X", "M"), ("M", "Y")}),
        latent=frozenset({"U"}),
    )
    return model_on(rng_for(7), g, {"U": 2, "X": 2, "M": 3, "Y": 2})


class TestRuleApplicable:
    def test_rule_2_on_single_edge(self):
        h = Admg(nodes=("X", "Y"), directed=frozenset({("X", "Y")}))
        verdict = rule_applicable(h, rq(2, y={"Y"}, z={"X"}))
        assert verdict.applicable
        assert verdict.statement == "{Y} _||_ {X} | {} in H[in:{}, out:{X}]"

    def test_rule_1_on_single_edge(self):
        h = Admg(nodes=("X", "Y"), directed=frozenset({("X", "Y")}))
        assert not rule_applicable(h, rq(1, y={"Y"}, z={"X"})).applicable

    def test_rule_3_on_disconnected_nodes(self):
        h = Admg(nodes=("X", "Y"))
        assert rule_applicable(h, rq(3, y={"Y"}, z={"X"})).applicable

    def test_confounded_edge(self):
        h = Admg(nodes=("A", "B"), directed=frozenset({("A", "B")}), bidirected=frozenset({("A", "B")}))
        assert not rule_applicable(h, rq(2, y={"B"}, z={"A"})).applicable
        assert not rule_applicable(h, rq(3, y={"B"}, z={"A"})).applicable
        assert rule_applicable(h, rq(3, y={"A"}, z={"B"})).applicable

    def test_rule_3_keeps_arrows_into_ancestors_of_w(self):
        # Z -> W <- Y: removing arrows into Z would not cut the collider path
        h = Admg(nodes=("Z", "W", "Y"), directed=frozenset({("Z", "W"), ("Y", "W")}))
        verdict = rule_applicable(h, rq(3, y={"Y"}, z={"Z"}, w={"W"}))
        assert "in:{}" in verdict.statement
        assert not verdict.applicable

    def test_sides(self):
        assert rule_sides(rq(1, y={"Y"}, x={"X"}, z={"Z"})) == ("p(Y | do(X), Z)", "p(Y | do(X))")
        assert rule_sides(rq(2, y={"B"}, z={"A"})) == ("p(B | do(A))", "p(B | A)")
        assert rule_sides(rq(3, y={"A"}, z={"B"})) == ("p(A | do(B))", "p(A)")


class TestClusterAdmg:
    def test_example1(self, example1):
        h = high_admg_from_cluster_map(example1.graph, ClusterMap.identity(("A", "B")))
        assert h.nodes == ("A", "B")
        assert h.directed == {("A", "B")} and h.bidirected == {("A", "B")}
        assert str(h) == "Admg[A, B | A->B, A<->B]"

    def test_map_must_cover_observed_nodes(self, example1):
        with pytest.raises(ClusterMapError):
            extend_over_latents(example1.graph, ClusterMap.identity(example1.nodes))

    def test_high_name_collides_with_latent(self, example1):
        cm = ClusterMap.from_clusters(("A", "B"), {"U": ["A"], "B": ["B"]})
        with pytest.raises(ClusterMapError):
            extend_over_latents(example1.graph, cm)

    def test_clustered_domains_are_joint_values(self, example1):
        cm = ClusterMap.from_clusters(("A", "B"), {"AB": ["A", "B"]})
        m = clustered_model(example1, cm)
        assert set(m.graph.nodes) == {"U", "AB"}
        assert m.domains["AB"].values == ("0,0", "0,1", "1,0", "1,1")


class TestClusteredFactorization:
    def test_chain(self, chain):
        low = chain[0]
        cm = ClusterMap.from_clusters(low.nodes, {"AB": ["A", "B"], "C": ["C"]})
        rep = check_clustered_factorization(low, cm)
        assert rep.passed
        assert [s.name for s in rep.squares] == ["observational", "do(AB)", "do(C)"]

    @pytest.mark.parametrize("clusters", [{"A": ["A"], "B": ["B"]}, {"AB": ["A", "B"]}])
    def test_example1(self, example1, clusters):
        assert check_clustered_factorization(example1, ClusterMap.from_clusters(("A", "B"), clusters)).passed

    def test_size_limit(self, chain, monkeypatch):
        monkeypatch.setattr(settings, "MAX_CLUSTER_VALUES", 2)
        low = chain[0]
        cm = ClusterMap.from_clusters(low.nodes, {"AB": ["A", "B"], "C": ["C"]})
        with pytest.raises(SizeLimitExceeded) as exc:
            clustered_model(low, cm)
        assert exc.value.size == 4 and exc.value.limit == 2

    @hsettings(deadline=None, max_examples=20)
    @given(st.integers(0, 2**32 - 1))
    def test_random_latent_models(self, seed):
        rng = rng_for(seed)
        low = latent_model(rng, 4, 1, max_domain=2)
        cm = valid_observed_map(rng, low, max_cluster=2)
        assert check_clustered_factorization(low, cm).passed


class TestVerifyRule:
    def test_unconfounded_rule_2(self, ab):
        rep = verify_rule_on_low(ab, ClusterMap.identity(ab.nodes), rq(2, y={"B"}, z={"A"}))
        assert rep.applicable and rep.passed
        assert len(rep.rows) == 2 and rep.skipped == 0

    def test_rule_3_on_cause(self, ab):
        rep = verify_rule_on_low(ab, ClusterMap.identity(ab.nodes), rq(3, y={"A"}, z={"B"}))
        assert rep.applicable and rep.passed

    def test_confounded_rule_2_fails_numerically(self, example1):
        rep = verify_rule_on_low(example1, ClusterMap.identity(("A", "B")), rq(2, y={"B"}, z={"A"}))
        assert not rep.applicable
        assert rep.max_residual > 1e-3
        assert rep.high_graph == "Admg[A, B | A->B, A<->B]"

    def test_front_door_first_step(self, front_door):
        rep = verify_rule_on_low(front_door, ClusterMap.identity(("X", "M", "Y")), rq(2, y={"M"}, z={"X"}))
        assert rep.applicable
        assert rep.max_residual <= 1e-9

    def test_front_door_second_step(self, front_door):
        # p(Y | do(M), X) = p(Y | M, X)
        rep = verify_rule_on_low(front_door, ClusterMap.identity(("X", "M", "Y")), rq(2, y={"Y"}, z={"M"}, w={"X"}))
        assert rep.applicable
        assert rep.max_residual <= 1e-9

    def test_zero_mass_rows_are_skipped(self, ab):
        a = ab.mechanisms["A"].model_copy(update={"table": np.array([[1.0, 0.0]])})
        low = ab.model_copy(update={"mechanisms": {**ab.mechanisms, "A": a}})
        rep = verify_rule_on_low(low, ClusterMap.identity(ab.nodes), rq(2, y={"B"}, z={"A"}))
        assert rep.skipped == 1
        assert [r.residual is None for r in rep.rows] == [False, True]

    def test_all_rows_zero_mass(self, ab, monkeypatch):
        def no_mass(d, evidence, **_):
            raise ZeroEvidence(evidence, 0.0)

        monkeypatch.setattr(engine, "condition", no_mass)
        with pytest.raises(InconclusiveAllZeroMass) as exc:
            verify_rule_on_low(ab, ClusterMap.identity(ab.nodes), rq(2, y={"B"}, z={"A"}))
        assert exc.value.skipped == 2


def _labelled_sets(nodes, labels):
    return [frozenset(n for n, lab in zip(nodes, labels) if lab == k) for k in (1, 2, 3, 4)]


class TestSurgeryInvariants:
    @hsettings(deadline=None, max_examples=20)
    @given(st.integers(0, 2**32 - 1))
    def test_canonical_dag_gives_the_same_verdicts(self, seed):
        rng = rng_for(seed)
        low = latent_model(rng, 4, 2, max_domain=2)
        h = high_admg_from_cluster_map(low.graph, valid_observed_map(rng, low, max_cluster=2))
        h_dag = canonical_dag(h)
        for labels in rng.integers(0, 5, size=(40, len(h.nodes))):
            x, y, z, w = _labelled_sets(h.nodes, labels)
            if not y:
                continue
            for rule in (1, 2, 3):
                query = RuleQuery(rule=rule, x=x, y=y, z=z, w=w)
                assert rule_applicable(h, query).applicable == rule_applicable(h_dag, query).applicable

    @hsettings(deadline=None, max_examples=20)
    @given(st.integers(0, 2**32 - 1))
    def test_high_z_of_w_lies_inside_low_z_of_w(self, seed):
        rng = rng_for(seed)
        low = latent_model(rng, 5, 2, max_domain=2)
        cm = valid_observed_map(rng, low, max_cluster=2)
        h = high_admg_from_cluster_map(low.graph, cm)
        for labels in product(range(4), repeat=len(h.nodes)):
            x, z, w, _ = _labelled_sets(h.nodes, labels)
            z_high = non_ancestors_in(surgery_remove_incoming(h, x), z, w)
            x_low, z_low, w_low = (set(cm.cluster_of_set(s)) for s in (x, z, w))
            z_low_w = non_ancestors_in(surgery_remove_incoming(low.graph, x_low), z_low, w_low)
            assert set(cm.cluster_of_set(z_high)) <= z_low_w
