import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abscheck.errors import EpsilonError, IncompatibleAbstractions, TauError, ZeroClusterMass
from abscheck.fixtures import chain_direct
from abscheck.models.abstraction import EpsilonFamily, TauFamily
from abscheck.models.graph import ClusterMap, Dag
from abscheck.models.kernel import CausalModel, DeterministicMap, Domain, Kernel
from abscheck.services import engine
from abscheck.services.abstraction_service import (
    check_effect_focused,
    check_factorization_of_tau,
    check_interventional_consistency,
    check_naturality,
    check_right_inverse,
    check_sufficient_statistic,
    compose_abstractions,
    derive_high_model,
    epsilon_from_tau,
    left_inverse,
    require_factorizing,
    tau_kernel,
)
from tests.generators import perturb, random_model, refine, rng_for

BIN = Domain.of(0, 1)
THREE = Domain.range(3)
LOHI = Domain.of("lo", "hi")
MERGE_01 = {("0",): ("lo",), ("1",): ("lo",), ("2",): ("hi",)}


def single(dom, row, name="B"):
    g = Dag(nodes=(name,))
    k = Kernel(outputs=(name,), output_domains=(dom,), table=np.array([row], dtype=float))
    return CausalModel(graph=g, domains={name: dom}, mechanisms={name: k})


def merge_tau(mapping=MERGE_01):
    return TauFamily(components={"B": DeterministicMap.from_mapping(("B",), (THREE,), ("B",), (LOHI,), mapping)})


def eps_b(rows):
    return EpsilonFamily(
        components={
            "B": Kernel(inputs=("B",), input_domains=(LOHI,), outputs=("B",), output_domains=(THREE,),
                        table=np.asarray(rows, dtype=float))
        }
    )


@pytest.fixture
def ab_identity(ab):
    cm = ClusterMap.identity(ab.nodes)
    return cm, TauFamily.identity(ab, cm)


@pytest.fixture
def ab_flat(ab):
    """High model with B independent of A; the marginal of B no longer matches."""
    b = ab.mechanisms["B"].model_copy(update={"table": np.full((2, 2), 0.5)})
    return ab.model_copy(update={"mechanisms": {**ab.mechanisms, "B": b}})


def collapse_a(ab):
    """tau sending both values of A to one high value, B kept."""
    return TauFamily(
        components={
            "A": DeterministicMap(inputs=("A",), input_domains=(BIN,), outputs=("A",),
                                  output_domains=(Domain.of("all"),), index=(0, 0)),
            "B": DeterministicMap.identity(("B",), (BIN,)),
        }
    )


class TestNaturality:
    def test_identity_passes(self, ab, ab_identity):
        cm, tau = ab_identity
        rep = check_naturality(ab, ab, cm, tau)
        assert rep.passed and rep.max_residual == pytest.approx(0.0, abs=1e-15)
        assert [s.name for s in rep.squares] == ["A", "B"]

    def test_value_merge(self):
        low = single(THREE, [0.2, 0.3, 0.5])
        high = single(LOHI, [0.5, 0.5])
        cm = ClusterMap.identity(("B",))
        assert check_naturality(low, high, cm, merge_tau()).passed

    def test_value_merge_wrong_high(self):
        low = single(THREE, [0.2, 0.3, 0.5])
        high = single(LOHI, [0.6, 0.4])
        rep = check_naturality(low, high, ClusterMap.identity(("B",)), merge_tau())
        assert not rep.passed
        assert rep.max_residual == pytest.approx(0.1)
        w = rep.witnesses[0]
        assert w.outcome == {"B": "lo"}
        assert (w.left, w.right) == (pytest.approx(0.5), pytest.approx(0.6))

    def test_witness_points_at_conflicting_parent_value(self, ab):
        cm = ClusterMap.identity(ab.nodes)
        tau = collapse_a(ab)
        high = derive_high_model(ab, cm, tau)
        rep = check_naturality(ab, high, cm, tau)
        assert not rep.passed
        assert rep.residual_of("A") == pytest.approx(0.0, abs=1e-15)
        assert rep.residual_of("B") == pytest.approx(0.7)
        w = rep.witnesses[0]
        assert w.given == {"A": "1"} and w.conflicting_given == {"A": "0"}

    def test_witness_limit(self, ab):
        cm = ClusterMap.identity(ab.nodes)
        tau = collapse_a(ab)
        high = derive_high_model(ab, cm, tau)
        assert len(check_naturality(ab, high, cm, tau, witness_limit=1).witnesses) == 1
        assert len(check_naturality(ab, high, cm, tau, witness_limit=0).witnesses) == 2

    def test_tau_reading_the_wrong_cluster(self, ab):
        cm = ClusterMap.identity(ab.nodes)
        tau = TauFamily(
            components={
                "A": DeterministicMap.identity(("B",), (BIN,), outputs=("A",)),
                "B": DeterministicMap.identity(("B",), (BIN,)),
            }
        )
        with pytest.raises(TauError, match="reads"):
            check_naturality(ab, ab, cm, tau)

    def test_tau_must_be_surjective(self):
        with pytest.raises(TauError, match="surjective"):
            TauFamily(components={"B": DeterministicMap(inputs=("B",), input_domains=(BIN,), outputs=("B",),
                                                        output_domains=(BIN,), index=(0, 0))})

    def test_report_serializes_verdict(self, ab, ab_identity):
        cm, tau = ab_identity
        dumped = check_naturality(ab, ab, cm, tau).model_dump()
        assert dumped["passed"] is True and dumped["check"] == "naturality"


class TestConsistency:
    @pytest.mark.parametrize("scope,count", [("nodes", 2), ("subsets", 5)])
    def test_identity_passes(self, ab, ab_identity, scope, count):
        cm, tau = ab_identity
        rep = check_interventional_consistency(ab, ab, cm, tau, scope=scope)
        assert rep.passed and len(rep.squares) == count

    def test_agrees_with_naturality_on_wrong_high(self, ab, ab_identity, ab_flat):
        cm, tau = ab_identity
        assert not check_naturality(ab, ab_flat, cm, tau).passed
        rep = check_interventional_consistency(ab, ab_flat, cm, tau)
        assert not rep.passed
        assert rep.residual_of("p(B)") == pytest.approx(0.09)

    def test_unknown_scope(self, ab, ab_identity):
        cm, tau = ab_identity
        with pytest.raises(ValueError):
            check_interventional_consistency(ab, ab, cm, tau, scope="pairs")

    @settings(deadline=None, max_examples=25)
    @given(st.integers(0, 2**32 - 1))
    def test_refinements_pass_both(self, seed):
        rng = rng_for(seed)
        coarse = random_model(rng, 4, max_domain=2)
        fine, cm, tau = refine(rng, coarse, max_extra=1)
        assert check_naturality(fine, coarse, cm, tau).passed
        assert check_interventional_consistency(fine, coarse, cm, tau).passed

    @settings(deadline=None, max_examples=25)
    @given(st.integers(0, 2**32 - 1))
    def test_perturbed_high_fails_both(self, seed):
        rng = rng_for(seed)
        coarse = random_model(rng, 3, max_domain=2)
        fine, cm, tau = refine(rng, coarse, max_extra=1)
        wrong = perturb(rng, coarse, node=coarse.nodes[0])
        if engine.joint(wrong).max_abs_diff(engine.joint(coarse)) <= 1e-6:
            return
        nat = check_naturality(fine, wrong, cm, tau).passed
        assert nat == check_interventional_consistency(fine, wrong, cm, tau).passed
        assert not nat


class TestEpsilon:
    def test_from_tau_is_conditional(self):
        low = single(THREE, [0.1, 0.3, 0.6])
        eps = epsilon_from_tau(low, ClusterMap.identity(("B",)), merge_tau())
        assert np.allclose(eps["B"].table, [[0.25, 0.75, 0.0], [0.0, 0.0, 1.0]])

    def test_zero_cluster_mass(self):
        low = single(THREE, [0.5, 0.5, 0.0])
        with pytest.raises(ZeroClusterMass) as exc:
            epsilon_from_tau(low, ClusterMap.identity(("B",)), merge_tau())
        assert (exc.value.node, exc.value.value) == ("B", "hi")

    def test_right_inverse(self):
        low = single(THREE, [0.1, 0.3, 0.6])
        tau = merge_tau()
        assert check_right_inverse(tau, epsilon_from_tau(low, ClusterMap.identity(("B",)), tau))

    def test_right_inverse_fails_on_leaking_row(self):
        assert not check_right_inverse(merge_tau(), eps_b([[0.25, 0.5, 0.25], [0.0, 0.0, 1.0]]))

    def test_left_inverse(self):
        tau = left_inverse(eps_b([[0.25, 0.75, 0.0], [0.0, 0.0, 1.0]]))
        assert tau["B"].index == (0, 0, 1)

    def test_left_inverse_of_unreached_value(self):
        tau = left_inverse(eps_b([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
        assert tau["B"].index == (0, 1, 0)

    def test_left_inverse_needs_disjoint_supports(self):
        with pytest.raises(EpsilonError):
            left_inverse(eps_b([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]]))

    def test_component_must_read_its_node(self):
        with pytest.raises(EpsilonError):
            EpsilonFamily(components={"A": Kernel.identity(("B",), ("B",), (BIN,))})


class TestEffectFocused:
    def test_chain_effect_passes_effect_side(self, chain_effect):
        low, high, cm, eps = chain_effect
        assert check_effect_focused(low, high, cm, eps).passed

    def test_chain_effect_fails_cause_side(self, chain_effect):
        low, high, cm, eps = chain_effect
        rep = check_naturality(low, high, cm, left_inverse(eps))
        assert not rep.passed
        assert rep.residual_of("C") >= 1e-3

    def test_wrong_within_cluster_law(self, chain_effect):
        low, high, cm, eps = chain_effect
        rows = eps["B"].table.copy()
        rows[0] = [0.5, 0.5, 0.0, 0.0]
        bad = EpsilonFamily(components={**eps.components, "B": eps["B"].model_copy(update={"table": rows})})
        rep = check_effect_focused(low, high, cm, bad)
        assert not rep.passed and rep.failures

    def test_voting(self, voting):
        low, high, cm, tau, eps = voting
        assert check_effect_focused(low, high, cm, eps).passed
        assert check_sufficient_statistic(low, cm, tau).passed

    def test_sufficient_statistic_fails_when_effect_is_collapsed(self, ab):
        tau = TauFamily(
            components={
                "A": DeterministicMap.identity(("A",), (BIN,)),
                "B": DeterministicMap(inputs=("B",), input_domains=(BIN,), outputs=("B",),
                                      output_domains=(Domain.of("all"),), index=(0, 0)),
            }
        )
        rep = check_sufficient_statistic(ab, ClusterMap.identity(ab.nodes), tau)
        assert not rep.passed
        assert [s.name for s in rep.failing()] == ["B"]

    @settings(deadline=None, max_examples=25)
    @given(st.integers(0, 2**32 - 1))
    def test_refinements_pass(self, seed):
        rng = rng_for(seed)
        coarse = random_model(rng, 4, max_domain=2)
        fine, cm, tau = refine(rng, coarse, max_extra=1)
        eps = epsilon_from_tau(fine, cm, tau)
        assert check_right_inverse(tau, eps)
        assert check_effect_focused(fine, coarse, cm, eps).passed
        assert check_sufficient_statistic(fine, cm, tau).passed


class TestComposition:
    def test_levels_pass(self, chain):
        low, mid, high, (cm12, tau12), (cm23, tau23) = chain
        assert check_naturality(low, mid, cm12, tau12).passed
        assert check_naturality(mid, high, cm23, tau23).passed

    def test_composite_matches_direct(self, chain):
        low, mid, high, (cm12, tau12), (cm23, tau23) = chain
        cm13, tau13 = compose_abstractions(cm12, tau12, cm23, tau23)
        assert cm13.cluster("ABC") == ("A", "B", "C")
        _, direct = chain_direct(low)
        assert tau13["ABC"].index == direct["ABC"].index
        assert check_naturality(low, high, cm13, tau13).passed

    def test_mismatched_middle(self, chain):
        _, _, _, (cm12, tau12), _ = chain
        with pytest.raises(IncompatibleAbstractions):
            compose_abstractions(cm12, tau12, cm12, tau12)


class TestFactorization:
    def test_product_factorizes(self, ab_identity):
        _, tau = ab_identity
        joint = engine.as_map(tau_kernel(tau, ["A", "B"]))
        assert check_factorization_of_tau(tau, joint)
        require_factorizing(tau, joint)

    def test_swapped_entries(self, ab_identity):
        _, tau = ab_identity
        swapped = DeterministicMap(inputs=("A", "B"), input_domains=(BIN, BIN), outputs=("A", "B"),
                                   output_domains=(BIN, BIN), index=(0, 1, 3, 2))
        assert not check_factorization_of_tau(tau, swapped)
        with pytest.raises(TauError, match="does not factorize"):
            require_factorizing(tau, swapped)

    def test_different_nodes(self, ab_identity):
        _, tau = ab_identity
        with pytest.raises(TauError):
            check_factorization_of_tau(tau, DeterministicMap.identity(("A",), (BIN,)))
