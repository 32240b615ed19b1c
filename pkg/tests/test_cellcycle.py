import json

import numpy as np
import pytest

from mocu import InvalidArgumentError, LoadError
from mocu import bnp
from mocu import cellcycle as cc
from mocu.bnp import Edge, GeneNetwork, Intervention, Sign, StateSet
from mocu.core import UniformGrid2
from oracles import brute_force_network_mocu


@pytest.fixture(scope="module")
def network():
    return cc.load_network()


def write_doc(tmp_path, doc):
    path = tmp_path / "net.json"
    path.write_text(json.dumps(doc))
    return path


# loading


def test_default_network_shape(network):
    assert network.genes == cc.CELL_CYCLE_GENES
    assert len(network.edges) == 35
    assert not network.has_unknown


def test_missing_edge_is_reported(tmp_path, network):
    doc = network.to_dict()
    doc["edges"] = doc["edges"][:34]
    with pytest.raises(LoadError) as info:
        cc.load_network(cc.CellCycleSpec(write_doc(tmp_path, doc)))
    assert any("35 edges, found 34" in d for d in info.value.diagnostics)


def test_duplicate_edge_is_reported(tmp_path, network):
    doc = network.to_dict()
    doc["edges"][1] = dict(doc["edges"][2])
    with pytest.raises(LoadError, match="duplicate"):
        cc.load_network(cc.CellCycleSpec(write_doc(tmp_path, doc)))


def test_unknown_signs_rejected_in_default_file(tmp_path, network):
    doc = network.to_dict()
    doc["edges"][0]["sign"] = "unknown"
    with pytest.raises(LoadError) as info:
        cc.load_network(cc.CellCycleSpec(write_doc(tmp_path, doc)))
    assert any("unknown sign" in d for d in info.value.diagnostics)


def test_gene_order_checked(tmp_path, network):
    doc = network.to_dict()
    doc["genes"][0], doc["genes"][1] = doc["genes"][1], doc["genes"][0]
    with pytest.raises(LoadError) as info:
        cc.load_network(cc.CellCycleSpec(write_doc(tmp_path, doc)))
    assert any("gene order" in d for d in info.value.diagnostics)


# state sets and costs


def test_state_sets_are_disjoint():
    u, p = cc.undesirable_states(), cc.phenotype_states()
    assert not np.any(u.mask & p.mask)
    assert len(u) == 128 and len(p) == 448


def test_cost_pairs_bounded_for_every_intervention(network):
    cache = cc.CostCache()
    for iv in cc.single_edge_interventions(network, allow_null=True):
        u, p = cc.intervention_cost_pair(network, iv, cache)
        assert 0 <= u and 0 <= p and u + p <= 1 + 1e-12


def test_identical_tables_share_one_solve(network):
    # Blocking edge i removes its sign, so both sign choices give one network.
    cache = cc.CostCache()
    a = network.with_signs({4: Sign.ACTIVATING})
    b = network.with_signs({4: Sign.SUPPRESSING})
    first = cc.intervention_cost_pair(a, Intervention.block(4), cache)
    second = cc.intervention_cost_pair(b, Intervention.block(4), cache)
    assert first == second
    assert cache.solves == 1 and cache.hits == 1


def test_disabled_cache_always_solves(network):
    cache = cc.CostCache(enabled=False)
    cc.intervention_cost_pair(network, Intervention.block(0), cache)
    cc.intervention_cost_pair(network, Intervention.block(0), cache)
    assert cache.solves == 2 and len(cache) == 0


# uncertainty classes


def test_class_enumerates_all_sign_assignments(network):
    cls = cc.NetworkUncertaintyClass(network, (3, 10, 20))
    models = cls.models()
    assert len(models) == 8
    signs = {tuple(int(m.edges[i].sign) for i in cls.unknown) for m in models}
    assert len(signs) == 8
    assert np.allclose(cls.uncertainty_class().weights, 1 / 8)
    with pytest.raises(InvalidArgumentError):
        cc.NetworkUncertaintyClass(network, (1, 1))
    with pytest.raises(InvalidArgumentError):
        cc.NetworkUncertaintyClass(network, (35,))


def test_no_unknown_edges_gives_zero(network):
    report = cc.mocu_for_class(cc.NetworkUncertaintyClass(network, ()))
    assert report.eta_multi == 0.0
    assert report.diagnostics["interventions"] == 35


def sink_toy():
    # A -> B -| C -> A loop plus a sink S regulated by A (edge 3) and B.
    genes = ("A", "B", "C", "S")
    edges = (Edge(0, 1, 1), Edge(1, 2, -1), Edge(2, 0, 1), Edge(0, 3, 1), Edge(1, 3, -1))
    g = GeneNetwork(genes, edges)
    sets = (
        StateSet.from_predicate(4, lambda b: b[0] == 0 and b[1] == 0, "U"),
        StateSet.from_predicate(4, lambda b: b[2] == 1 and not (b[0] == 0 and b[1] == 0), "P"),
    )
    return g, sets


def test_sign_that_never_reaches_the_cost_gives_zero():
    # Exhaustive comparison: the two signs of edge 3 differ only in the sink's
    # column of the truth table, which neither U nor P reads.
    g, sets = sink_toy()
    cls = cc.NetworkUncertaintyClass(g, (3,))
    plus, minus = cls.models()
    for iv in cc.single_edge_interventions(g):
        diff = bnp.truth_table(bnp.apply_intervention(plus, iv)) ^ bnp.truth_table(bnp.apply_intervention(minus, iv))
        assert np.all(diff & ~0b1000 == 0)
    cache = cc.CostCache(sets=sets)
    report = cc.mocu_for_class(cls, cache=cache)
    assert abs(report.eta_multi) <= 1e-14


def test_cap_enforced(network):
    with pytest.raises(InvalidArgumentError, match="cap"):
        cc.mocu_for_class(cc.NetworkUncertaintyClass(network, tuple(range(4))), cap=3)


def test_k2_matches_brute_force(network):
    unknown = (5, 17)
    report = cc.mocu_for_class(cc.NetworkUncertaintyClass(network, unknown))
    oracle, etas = brute_force_network_mocu(network, unknown, u_bits=(0, 1, 2), p_bit=6)
    assert report.eta_multi == pytest.approx(oracle, abs=1e-10)
    raw = report.diagnostics["eta_at_lambda_raw"]
    assert np.abs(np.array(raw) - np.array(etas)).max() < 1e-10


def test_robust_intervention_dominates_at_every_node(network):
    cls = cc.NetworkUncertaintyClass(network, (0, 9, 30))
    cache = cc.CostCache()
    report = cc.mocu_for_class(cls, UniformGrid2(21), cache=cache)
    models = cls.models()
    ivs = cc.single_edge_interventions(network)
    costs = np.array([[cache.costs(bnp.apply_intervention(m, iv)) for iv in ivs] for m in models])
    for (lam, iv) in report.robust_operators:
        expected = (costs @ np.array(lam)).mean(axis=0)
        assert expected[ivs.index(iv)] <= expected.min() + 1e-15


def test_cache_transparency(network):
    cls = cc.NetworkUncertaintyClass(network, (2, 11, 25))
    on = cc.mocu_for_class(cls, cache=cc.CostCache())
    off = cc.mocu_for_class(cls, cache=cc.CostCache(enabled=False))
    assert abs(on.eta_multi - off.eta_multi) <= 1e-14
    assert on.diagnostics["cache"]["solves"] < off.diagnostics["cache"]["solves"]


def test_null_intervention_flag(network):
    assert len(cc.single_edge_interventions(network, allow_null=True)) == 36
    report = cc.mocu_for_class(cc.NetworkUncertaintyClass(network, (7,)), allow_null=True)
    assert report.diagnostics["interventions"] == 36


def test_solver_choice_does_not_change_value(network):
    cls = cc.NetworkUncertaintyClass(network, (12, 19))
    reduced = cc.mocu_for_class(cls, cache=cc.CostCache(cc.SolverConfig(method="reduced")))
    dense = cc.mocu_for_class(cls, cache=cc.CostCache(cc.SolverConfig(method="dense")))
    assert reduced.eta_multi == pytest.approx(dense.eta_multi, abs=1e-12)


def test_parallel_prefill_matches_serial(network):
    cls = cc.NetworkUncertaintyClass(network, (1, 6))
    serial = cc.mocu_for_class(cls, cache=cc.CostCache())
    parallel = cc.mocu_for_class(cls, cache=cc.CostCache(), workers=2)
    assert serial.eta_multi == parallel.eta_multi


# experiment


def test_seed_derivation_and_subsets():
    assert cc.derive_seed(1, 2, 3) == cc.derive_seed(1, 2, 3)
    assert len({cc.derive_seed(1, 2, r) for r in range(100)}) == 100
    edges = cc.sample_unknown_edges(35, 5, cc.derive_seed(1, 5, 0))
    assert len(set(edges)) == 5 and list(edges) == sorted(edges)


def test_summary_statistics():
    s = cc.summarize(3, [0.0, 1.0, 2.0, 10.0])
    assert (s.min, s.median, s.mean) == (0.0, 1.5, 3.25)
    assert s.std == pytest.approx(np.std([0, 1, 2, 10]))
    assert s.min <= s.median <= s.mean_plus_std


def test_single_run_at_k0(network):
    stats = cc.run_experiment(cc.ExperimentConfig(k_values=(0,), runs=1), network)
    s = stats.summary[0]
    assert (s.min, s.median, s.mean, s.std, s.mean_plus_std) == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_experiment_config_validation():
    with pytest.raises(InvalidArgumentError):
        cc.ExperimentConfig(runs=0)
    with pytest.raises(InvalidArgumentError):
        cc.ExperimentConfig(method="lu")
    with pytest.raises(InvalidArgumentError):
        cc.run_experiment(cc.ExperimentConfig(k_values=(36,), runs=1))


@pytest.fixture(scope="module")
def small_stats(network):
    return cc.run_experiment(cc.ExperimentConfig(k_values=(1, 2), runs=4, seed=99), network)


def test_experiment_is_deterministic(network, small_stats):
    again = cc.run_experiment(cc.ExperimentConfig(k_values=(1, 2), runs=4, seed=99), network)
    assert again.records == small_stats.records
    assert again.summary == small_stats.summary


def test_experiment_statistics_ordering(small_stats):
    assert [r.k for r in small_stats.records] == [1] * 4 + [2] * 4
    for s in small_stats.summary:
        assert s.std >= 0 and s.min <= s.median <= s.mean_plus_std
        assert s.runs == 4
    assert np.array_equal(small_stats.values(2), [r.eta_multi for r in small_stats.records[4:]])


def test_checkpoint_resume_after_interruption(tmp_path, network, small_stats):
    path = tmp_path / "ck.jsonl"
    config = cc.ExperimentConfig(k_values=(1, 2), runs=4, seed=99)
    seen = []

    def stop_after_three(rec):
        seen.append(rec)
        if len(seen) == 3:
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        cc.run_experiment(config, network, checkpoint=path, progress=stop_after_three)
    assert len(path.read_text().splitlines()) == 1 + 3

    cache = cc.CostCache()
    resumed = cc.run_experiment(config, network, cache=cache, checkpoint=path)
    assert resumed.records == small_stats.records
    assert len(path.read_text().splitlines()) == 1 + 8

    # Everything is on disk now, so nothing more is solved.
    cache = cc.CostCache()
    cc.run_experiment(config, network, cache=cache, checkpoint=path)
    assert cache.solves == 0


def test_checkpoint_tolerates_torn_last_line(tmp_path, network, small_stats):
    path = tmp_path / "ck.jsonl"
    config = cc.ExperimentConfig(k_values=(1, 2), runs=4, seed=99)
    cc.run_experiment(config, network, checkpoint=path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n" + lines[-1][:10])
    assert cc.run_experiment(config, network, checkpoint=path).records == small_stats.records
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + 8 and all(json.loads(line) for line in lines)


def test_checkpoint_from_other_config_refused(tmp_path, network):
    path = tmp_path / "ck.jsonl"
    cc.run_experiment(cc.ExperimentConfig(k_values=(1,), runs=1, seed=1), network, checkpoint=path)
    with pytest.raises(InvalidArgumentError, match="different configuration"):
        cc.run_experiment(cc.ExperimentConfig(k_values=(1,), runs=1, seed=2), network, checkpoint=path)
