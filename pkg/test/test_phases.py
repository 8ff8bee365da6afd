from dataclasses import replace

import numpy as np
import pytest

from cilfair.analysis import per_class_accuracy, rowwise_divergence
from cilfair.analysis.divergence import DivergenceMetric, js_divergence
from cilfair.data import (ExemplarMemory, IncrementalSchedule, LabeledDataset, random_exemplar_sample,
                          split_incremental, synth_generate)
from cilfair.nn import Mlp, cross_entropy, expand_output_layer, forward, softmax
from cilfair.phases import (DivergenceRecord, ErrorSet, cil_composite_loss, ciliate_step, compute_error_set,
                            differential_analysis, resolve_lambda, select_samples, selective_train,
                            train_balanced, train_base, traditional_cil_step)
from cilfair.phases.refine_phase import cutoff_index, random_select
from cilfair.phases.repair_phase import teacher_probabilities
from cilfair.utils import Stream, derive_seed
from cilfair.utils.errors import ContractViolation, ParameterError


def relabeled_steps(ds, steps=3, per_step=2):
    return split_incremental(ds, IncrementalSchedule(steps, per_step, order_seed=0), relabel=True)


@pytest.fixture
def two_steps(blobs, small_cfg):
    base_data, new_data, _ = relabeled_steps(blobs)
    m_base = train_base(base_data, small_cfg, seed=5)
    memory = random_exemplar_sample(base_data, 10, seed=1)
    return m_base, base_data, new_data, memory


# ---------- selection ----------

def scored_dataset(scores):
    n = len(scores)
    ds = LabeledDataset(np.arange(n) * 3 + 1, np.zeros((n, 1)), np.zeros(n, dtype=int), (0,), 1)
    records = [DivergenceRecord(int(i), float(s)) for i, s in zip(ds.ids, scores)]
    return ds, records


@pytest.mark.parametrize("eta", [0.0, 0.01, 0.1, 0.5, 1.0])
def test_selection_contract(rng, eta):
    for _ in range(100):
        n = int(rng.integers(1, 60))
        scores = np.round(rng.random(n), 1)  # rounding forces ties
        ds, records = scored_dataset(scores)
        split = select_samples(records, ds, eta)
        assert len(split.high) == int(np.floor(eta * n + 1e-9)) == split.cutoff_index
        assert len(split.high) + len(split.low) == n
        by_id = {r.sample_id: r.divergence for r in records}
        high = [(by_id[i], i) for i in split.high.ids]
        low = [(by_id[i], i) for i in split.low.ids]
        for score, sid in high:
            for other_score, other_id in low:
                assert score > other_score or (score == other_score and sid < other_id)


def test_selection_is_order_invariant(rng):
    ds, records = scored_dataset(rng.random(40))
    shuffled = [records[i] for i in rng.permutation(40)]
    assert select_samples(records, ds, 0.3).high.equals(select_samples(shuffled, ds, 0.3).high)


def test_selection_picks_largest_divergences():
    ds, records = scored_dataset(np.linspace(0.0, 1.0, 50))
    split = select_samples(records, ds, 0.1)
    assert sorted(split.high.ids.tolist()) == sorted(ds.ids[-5:].tolist())


def test_selection_degenerate_cutoffs():
    ds, records = scored_dataset(np.linspace(0.0, 1.0, 7))
    assert len(select_samples(records, ds, 0.0).high) == 0
    assert select_samples(records, ds, 0.0).low.equals(ds)
    assert select_samples(records, ds, 1.0).high.equals(ds)


def test_selection_rejects_mismatched_records():
    ds, records = scored_dataset([0.1, 0.2, 0.3])
    with pytest.raises(ContractViolation):
        select_samples(records[:2], ds, 0.5)


def test_cutoff_uses_decimal_eta():
    assert cutoff_index(0.7, 10) == 7
    assert cutoff_index(0.29, 100) == 29


def test_random_select_keeps_cutoff_size(blobs):
    split = random_select(blobs, 0.25, seed=4)
    assert len(split.high) == 60
    assert len(split.high) + len(split.low) == len(blobs)


# ---------- differential analysis ----------

def test_differential_analysis_identical_models(two_steps):
    m_base, base_data, _, _ = two_steps
    records = differential_analysis(m_base, m_base, base_data)
    assert [r.sample_id for r in records] == base_data.ids.tolist()
    assert all(r.divergence == pytest.approx(0.0, abs=1e-12) for r in records)


def test_differential_analysis_matches_independent_recomputation(two_steps, small_cfg):
    m_base, base_data, new_data, memory = two_steps
    m_new = traditional_cil_step(m_base, new_data, memory, small_cfg, seed=2)
    x_t = new_data.concat(memory.dataset)
    records = differential_analysis(m_base, m_new, x_t, "jensen_shannon", 2.0)
    for record, x in zip(records, x_t.features):
        p = softmax(forward(m_base, x[None, :])[0][0], 2.0)
        z = forward(m_new, x[None, :])[0][0][:m_base.num_classes] / 2.0
        q = np.exp(z - z.max()) / np.exp(z - z.max()).sum()
        assert record.divergence == pytest.approx(js_divergence(p, q), abs=1e-12)


def test_differential_analysis_empty_dataset(net):
    with pytest.raises(ParameterError):
        differential_analysis(net, net, LabeledDataset.empty(5, (0,)))


# ---------- base training ----------

def test_train_base_zero_epochs_returns_initialization(blobs, small_cfg):
    cfg = replace(small_cfg, epochs_base=0)
    net = train_base(blobs, cfg, seed=4)
    assert net.same_weights(Mlp.initialize((5, 12, 8, 6), derive_seed(4, Stream.INIT)))


def test_train_base_separates_two_blobs(small_cfg):
    rng = np.random.default_rng(0)
    features = np.vstack([rng.normal(-3.0, 0.3, size=(40, 2)), rng.normal(3.0, 0.3, size=(40, 2))])
    ds = LabeledDataset(np.arange(80), features, np.repeat([0, 1], 40), (0, 1), 2)
    net = train_base(ds, replace(small_cfg, epochs_base=50, learning_rate=0.1), seed=1)
    assert np.mean(net.predict(ds.features) == ds.labels) == 1.0


def test_train_base_is_deterministic(blobs, small_cfg):
    assert train_base(blobs, small_cfg, seed=8).same_weights(train_base(blobs, small_cfg, seed=8))


def test_train_base_rejects_empty_dataset(small_cfg):
    with pytest.raises(ParameterError):
        train_base(LabeledDataset.empty(3, (0,)), small_cfg)


# ---------- traditional CIL ----------

def test_resolve_lambda():
    assert resolve_lambda("auto", 4, 6) == pytest.approx(4 / 6)
    assert resolve_lambda(0.3, 4, 6) == 0.3
    with pytest.raises(ParameterError):
        resolve_lambda(1.5, 4, 6)


def test_composite_loss_decomposes(rng):
    net = Mlp.initialize((5, 7, 6), 3)
    x_n, y_n = rng.normal(size=(6, 5)), rng.integers(3, 6, size=6)
    x_s, y_s = rng.normal(size=(4, 5)), rng.integers(0, 3, size=4)
    for lam in (0.0, 0.25, 0.6, 1.0):
        result = cil_composite_loss(net, x_n, y_n, x_s, y_s, lam)
        l_n = cross_entropy(forward(net, x_n)[0], y_n)[0]
        l_s = cross_entropy(forward(net, x_s)[0], y_s)[0]
        assert result.loss == pytest.approx((1 - lam) * l_n + lam * l_s, abs=1e-12)


def test_composite_loss_lambda_one_ignores_new_batch(rng):
    net = Mlp.initialize((5, 7, 6), 3)
    x_s, y_s = rng.normal(size=(4, 5)), rng.integers(0, 3, size=4)
    a = cil_composite_loss(net, rng.normal(size=(6, 5)), rng.integers(3, 6, size=6), x_s, y_s, 1.0)
    b = cil_composite_loss(net, rng.normal(size=(6, 5)), rng.integers(3, 6, size=6), x_s, y_s, 1.0)
    for ga, gb in zip(a.gradients.weights, b.gradients.weights):
        assert np.allclose(ga, gb, atol=1e-15)


def test_composite_loss_lambda_zero_is_new_data_cross_entropy(rng):
    net = Mlp.initialize((5, 7, 6), 3)
    x_n, y_n = rng.normal(size=(6, 5)), rng.integers(3, 6, size=6)
    result = cil_composite_loss(net, x_n, y_n, rng.normal(size=(4, 5)), rng.integers(0, 3, size=4), 0.0)
    assert result.loss == pytest.approx(cross_entropy(forward(net, x_n)[0], y_n)[0], abs=1e-12)


def test_traditional_step_expands_and_is_deterministic(two_steps, small_cfg):
    m_base, _, new_data, memory = two_steps
    first = traditional_cil_step(m_base, new_data, memory, small_cfg, seed=2)
    second = traditional_cil_step(m_base, new_data, memory, small_cfg, seed=2)
    assert first.num_classes == 4
    assert first.same_weights(second)


def test_traditional_step_rejects_overlapping_classes(two_steps, small_cfg):
    m_base, base_data, _, memory = two_steps
    with pytest.raises(ParameterError):
        traditional_cil_step(m_base, base_data, memory, small_cfg)


def test_traditional_step_with_distillation_term(two_steps, small_cfg):
    m_base, _, new_data, memory = two_steps
    plain = traditional_cil_step(m_base, new_data, memory, small_cfg, seed=2)
    distilled = traditional_cil_step(m_base, new_data, memory, replace(small_cfg, distill_weight=1.0), seed=2)
    assert not plain.same_weights(distilled)


# ---------- error set and selective training ----------

def test_error_set_matches_per_sample_predictions(two_steps):
    m_base, base_data, _, _ = two_steps
    errors = compute_error_set(m_base, base_data)
    for sample in base_data:
        predicted = int(np.argmax(m_base.logits(sample.features[None, :])[0]))
        assert (sample.id in errors) == (predicted != sample.label)
    perfect = all(v == 1.0 for v in per_class_accuracy(m_base, base_data).accuracies.values())
    assert (len(errors) == 0) == perfect


def test_error_set_of_constant_predictor():
    ds = synth_generate(classes=4, per_class=5, feature_dim=2, cluster_spread=1.0, seed=0)
    biases = np.array([0.0, 0.0, 1.0, 0.0])
    net = Mlp((2, 4), [np.zeros((4, 2))], [biases])
    assert len(compute_error_set(net, ds)) == 15


def test_selective_train_zero_epochs_returns_start(two_steps, small_cfg):
    m_base, _, new_data, memory = two_steps
    cfg = replace(small_cfg, epochs_dropout_phase=0, epochs_ordinary_phase=0)
    x_t = new_data.concat(memory.dataset)
    start = expand_output_layer(m_base, 4, 1)
    out = selective_train(start, x_t.subset(range(5)), x_t.subset(range(5, len(x_t))), start,
                          ErrorSet(frozenset()), cfg, seed=1, old_classes=2)
    assert out.same_weights(start)


def test_selective_train_rejects_overlap(two_steps, small_cfg):
    m_base, _, new_data, _ = two_steps
    start = expand_output_layer(m_base, 4, 1)
    with pytest.raises(ParameterError):
        selective_train(start, new_data, new_data, start, ErrorSet(frozenset()), small_cfg, old_classes=2)


def test_empty_hard_set_equals_ordinary_phase(two_steps, small_cfg):
    m_base, _, new_data, memory = two_steps
    x_t = new_data.concat(memory.dataset)
    start = expand_output_layer(m_base, 4, 1)
    teacher = traditional_cil_step(m_base, new_data, memory, small_cfg, seed=2)
    errors = compute_error_set(teacher, x_t)
    out = selective_train(start, x_t.subset([]), x_t, teacher, errors, small_cfg, seed=6, old_classes=2)
    expected = train_balanced(start, x_t, teacher_probabilities(teacher, x_t, small_cfg.temperature),
                              errors.mask_for(x_t), small_cfg, 0.5, small_cfg.epochs_ordinary_phase,
                              derive_seed(6, Stream.SHUFFLE_ORDINARY))
    assert out.same_weights(expected)


def test_dropout_rate_zero_equals_ordinary_training(two_steps, small_cfg):
    m_base, _, new_data, memory = two_steps
    cfg = replace(small_cfg, dropout_rate=0.0)
    x_t = new_data.concat(memory.dataset)
    start = expand_output_layer(m_base, 4, 1)
    errors = ErrorSet.everything(x_t)
    probs = teacher_probabilities(start, x_t, cfg.temperature)
    out = selective_train(start, x_t, x_t.subset([]), start, errors, cfg, seed=6, old_classes=2)
    expected = train_balanced(start, x_t, probs, errors.mask_for(x_t), cfg, 0.5, cfg.epochs_dropout_phase,
                              derive_seed(6, Stream.SHUFFLE_DROPOUT))
    assert out.same_weights(expected)


# ---------- full repair step ----------

def test_ciliate_step_diagnostics_and_width(two_steps, small_cfg):
    m_base, base_data, new_data, _ = two_steps
    result = ciliate_step(m_base, new_data, base_data, small_cfg, capacity=10, seed=3)
    assert result.model.num_classes == result.incremental_model.num_classes == 4
    split = result.split
    assert len(split.high) + len(split.low) == len(new_data) + len(result.memory)
    diagnostics = result.diagnostics()
    assert diagnostics["exemplars"] == 10
    assert diagnostics["split"]["high"] == len(split.high)


def test_ciliate_step_replay_is_bit_identical(two_steps, small_cfg):
    m_base, base_data, new_data, _ = two_steps
    first = ciliate_step(m_base, new_data, base_data, small_cfg, capacity=10, seed=3)
    second = ciliate_step(m_base, new_data, base_data, small_cfg, capacity=10, seed=3)
    assert first.model.same_weights(second.model)
    assert first.diagnostics() == second.diagnostics()
    assert first.records == second.records


def test_ciliate_eta_zero_is_ordinary_training_over_all_data(two_steps, small_cfg):
    m_base, base_data, new_data, _ = two_steps
    cfg = replace(small_cfg, eta=0.0)
    result = ciliate_step(m_base, new_data, base_data, cfg, capacity=10, seed=3)
    assert len(result.split.high) == 0
    x_t = new_data.concat(result.memory.dataset)
    start = expand_output_layer(m_base, 4, derive_seed(3, Stream.EXPAND))
    teacher = result.incremental_model
    expected = train_balanced(start, x_t, teacher_probabilities(teacher, x_t, cfg.temperature),
                              result.error_set.mask_for(x_t), cfg, 0.5, cfg.epochs_ordinary_phase,
                              derive_seed(3, Stream.SHUFFLE_ORDINARY))
    assert result.model.same_weights(expected)
    longer = ciliate_step(m_base, new_data, base_data, replace(cfg, epochs_dropout_phase=9), capacity=10, seed=3)
    assert longer.model.same_weights(result.model)


def test_ciliate_eta_one_routes_everything_through_dropout(two_steps, small_cfg):
    m_base, base_data, new_data, _ = two_steps
    result = ciliate_step(m_base, new_data, base_data, replace(small_cfg, eta=1.0), capacity=10, seed=3)
    assert len(result.split.low) == 0
    assert len(result.split.high) == len(new_data) + len(result.memory)


@pytest.mark.parametrize("variant", ["ciliate-no-selection", "ciliate-no-verification",
                                     "ciliate-no-distillation", "ciliate-pure-dropout",
                                     "ciliate-pure-ordinary"])
def test_ciliate_variants_run(two_steps, small_cfg, variant):
    m_base, base_data, new_data, _ = two_steps
    result = ciliate_step(m_base, new_data, base_data, small_cfg, capacity=10, seed=3, variant=variant)
    assert result.model.num_classes == 4
    if variant == "ciliate-no-distillation":
        assert len(result.error_set) == len(new_data) + len(result.memory)
    if variant == "ciliate-no-verification":
        assert result.coverage.attempts_used == 1


def test_ciliate_unknown_variant(two_steps, small_cfg):
    m_base, base_data, new_data, _ = two_steps
    with pytest.raises(ParameterError):
        ciliate_step(m_base, new_data, base_data, small_cfg, capacity=10, variant="ciliate-x")


def test_rowwise_scores_are_nonnegative(two_steps, small_cfg):
    m_base, _, new_data, memory = two_steps
    m_new = traditional_cil_step(m_base, new_data, memory, small_cfg, seed=2)
    p = softmax(m_base.logits(new_data.features), 2.0)
    q = softmax(m_new.logits(new_data.features)[:, :2], 2.0)
    for metric in DivergenceMetric:
        assert np.all(rowwise_divergence(p, q, metric) >= 0)


def test_memory_type_is_respected(two_steps, small_cfg):
    m_base, base_data, new_data, _ = two_steps
    memory = ExemplarMemory(10, base_data.subset(range(10)))
    assert traditional_cil_step(m_base, new_data, memory, small_cfg, seed=1).num_classes == 4
