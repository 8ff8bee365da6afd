import numpy as np
import pytest

from cilfair.nn import (DropoutSpec, Mlp, backward, cross_entropy, distillation_loss, expand_output_layer,
                        forward, learning_rate_at, iterate_minibatches, load_checkpoint, save_checkpoint,
                        sgd_step, softmax)
from cilfair.nn.losses import balanced_distillation_loss
from cilfair.phases.cil_phase import cil_composite_loss
from cilfair.utils.errors import ContractViolation, ParameterError, ParseError, RejectedInputError

EPS = 1e-6


def numeric_gradients(net, loss_of):
    """Central differences of ``loss_of(net)`` with respect to every parameter."""
    grads_w, grads_b = [], []
    for params, out in ((net.weights, grads_w), (net.biases, grads_b)):
        for p in params:
            g = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + EPS
                up = loss_of(net)
                p[idx] = old - EPS
                down = loss_of(net)
                p[idx] = old
                g[idx] = (up - down) / (2 * EPS)
            out.append(g)
    return grads_w, grads_b


def assert_gradients_match(analytic, numeric):
    for a, n in zip(analytic.weights + analytic.biases, numeric[0] + numeric[1]):
        # relative error, with an absolute floor for dead units whose gradient is roundoff
        assert np.all(np.abs(a - n) <= 1e-5 * (np.abs(a) + np.abs(n)) + 1e-8)


def random_case(seed, num_classes=4, batch=6):
    rng = np.random.default_rng(seed)
    net = Mlp.initialize((5, 7, 6, num_classes), seed)
    for b in net.biases:
        b += rng.normal(scale=0.1, size=b.shape)
    x = rng.normal(size=(batch, 5))
    y = rng.integers(0, num_classes, size=batch)
    return rng, net, x, y


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("with_dropout", [False, True])
def test_cross_entropy_gradient(seed, with_dropout):
    _, net, x, y = random_case(seed)
    dropout = DropoutSpec(0.3, seed + 100) if with_dropout else None

    def loss_of(n):
        return cross_entropy(forward(n, x, dropout)[0], y, 1.5)[0]

    logits, cache = forward(net, x, dropout)
    _, grad = cross_entropy(logits, y, 1.5)
    assert_gradients_match(backward(net, cache, grad), numeric_gradients(net, loss_of))


@pytest.mark.parametrize("seed", range(20))
def test_distillation_gradient_with_wider_student(seed):
    rng, net, x, _ = random_case(seed, num_classes=6)
    teacher = softmax(rng.normal(size=(x.shape[0], 4)), 2.0)
    dropout = DropoutSpec(0.25, seed)

    def loss_of(n):
        return distillation_loss(forward(n, x, dropout)[0], teacher, 2.0)[0]

    logits, cache = forward(net, x, dropout)
    _, grad = distillation_loss(logits, teacher, 2.0)
    assert np.all(grad[:, 4:] == 0.0)
    assert_gradients_match(backward(net, cache, grad), numeric_gradients(net, loss_of))


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("assignment", ["prose", "printed"])
def test_balanced_distillation_gradient(seed, assignment):
    rng, net, x, y = random_case(seed, batch=8)
    teacher = softmax(rng.normal(size=(8, 4)), 2.0)
    in_error = rng.random(8) < 0.4
    in_error[0], in_error[1] = True, False
    dropout = DropoutSpec(0.5, seed + 7)

    def loss_of(n):
        logits = forward(n, x, dropout)[0]
        return balanced_distillation_loss(logits, y, teacher, in_error, 0.6, 2.0, 1.0, assignment)[0]

    logits, cache = forward(net, x, dropout)
    _, grad = balanced_distillation_loss(logits, y, teacher, in_error, 0.6, 2.0, 1.0, assignment)
    assert_gradients_match(backward(net, cache, grad), numeric_gradients(net, loss_of))


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("distill_weight", [0.0, 0.7])
def test_replay_composite_gradient(seed, distill_weight):
    rng, net, x_new, y_new = random_case(seed)
    x_mem = rng.normal(size=(4, 5))
    y_mem = rng.integers(0, 4, size=4)
    # the old model knows only the first 3 classes
    teacher_new = softmax(rng.normal(size=(6, 3)), 2.0)
    teacher_mem = softmax(rng.normal(size=(4, 3)), 2.0)

    def composite(n):
        return cil_composite_loss(n, x_new, y_new, x_mem, y_mem, 0.35, 1.5, teacher_new, teacher_mem,
                                  distill_weight, 2.0)

    analytic = composite(net).gradients
    assert_gradients_match(analytic, numeric_gradients(net, lambda n: composite(n).loss))


def test_forward_shapes_and_cache(net, rng):
    x = rng.normal(size=(3, 5))
    logits, cache = forward(net, x)
    assert logits.shape == (3, 4)
    assert [h.shape for h in cache.hidden_activations] == [(3, 7), (3, 6)]
    assert all(np.all(h >= 0) for h in cache.hidden_activations)


def test_forward_rejects_wrong_dimension(net):
    with pytest.raises(RejectedInputError):
        forward(net, np.zeros((2, 4)))


def test_backward_rejects_foreign_cache(net, rng):
    other = Mlp.initialize((5, 7, 6, 5), 1)
    _, cache = forward(other, rng.normal(size=(2, 5)))
    with pytest.raises(ContractViolation):
        backward(net, cache, np.zeros((2, 4)))


def test_dropout_rate_zero_is_identity(net, rng):
    x = rng.normal(size=(4, 5))
    assert np.array_equal(forward(net, x)[0], forward(net, x, DropoutSpec(0.0, 9))[0])


def test_dropout_rate_must_stay_below_one():
    with pytest.raises(ParameterError):
        DropoutSpec(1.0, 0)


def test_predict_ties_go_to_lowest_index():
    net = Mlp((2, 3), [np.zeros((3, 2))], [np.zeros(3)])
    assert net.predict(np.ones((2, 2))).tolist() == [0, 0]


def test_initialize_is_deterministic():
    assert Mlp.initialize((4, 3, 2), 5).same_weights(Mlp.initialize((4, 3, 2), 5))
    assert not Mlp.initialize((4, 3, 2), 5).same_weights(Mlp.initialize((4, 3, 2), 6))


def test_expand_output_layer_keeps_old_rows(net):
    wider = expand_output_layer(net, 7, rng_seed=3)
    assert wider.layer_sizes == (5, 7, 6, 7)
    assert np.array_equal(wider.weights[-1][:4], net.weights[-1])
    assert np.array_equal(wider.biases[-1][:4], net.biases[-1])
    assert np.all(wider.biases[-1][4:] == 0)
    bound = np.sqrt(6.0 / (6 + 7))
    assert np.all(np.abs(wider.weights[-1][4:]) <= bound)
    for a, b in zip(wider.weights[:-1], net.weights[:-1]):
        assert np.array_equal(a, b)


def test_expand_output_layer_cannot_shrink(net):
    with pytest.raises(ParameterError):
        expand_output_layer(net, 4, rng_seed=0)


def test_sgd_step_zero_rate_is_identity(net, rng):
    x = rng.normal(size=(3, 5))
    logits, cache = forward(net, x)
    grads = backward(net, cache, cross_entropy(logits, [0, 1, 2])[1])
    assert sgd_step(net, grads, 0.0).same_weights(net)
    with pytest.raises(ParameterError):
        sgd_step(net, grads, -0.1)


def test_cross_entropy_uniform_logits():
    loss, _ = cross_entropy(np.zeros((2, 4)), [1, 3])
    assert loss == pytest.approx(np.log(4.0), abs=1e-12)


def test_cross_entropy_empty_batch():
    loss, grad = cross_entropy(np.zeros((0, 3)), np.zeros(0, dtype=int))
    assert loss == 0.0
    assert grad.shape == (0, 3)


def test_distillation_of_matching_teacher_is_zero(rng):
    logits = rng.normal(size=(5, 3))
    loss, grad = distillation_loss(logits, softmax(logits, 2.0), 2.0)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(grad, 0.0, atol=1e-12)


def test_balanced_loss_all_errors_is_plain_cross_entropy(rng):
    logits = rng.normal(size=(6, 4))
    labels = rng.integers(0, 4, size=6)
    loss, grad = balanced_distillation_loss(logits, labels, None, np.ones(6, dtype=bool), 0.7, 2.0)
    expected, expected_grad = cross_entropy(logits, labels)
    assert loss == pytest.approx(expected, abs=1e-12)
    assert np.allclose(grad, expected_grad, atol=1e-15)


def test_balanced_loss_perfect_retention_is_zero(rng):
    logits = rng.normal(size=(6, 4))
    loss, _ = balanced_distillation_loss(logits, np.zeros(6, dtype=int), softmax(logits, 2.0),
                                         np.zeros(6, dtype=bool), 0.5, 2.0)
    assert loss == pytest.approx(0.0, abs=1e-12)


def test_balanced_loss_splits_into_group_means(rng):
    logits = rng.normal(size=(5, 3))
    labels = np.array([0, 1, 2, 0, 1])
    teacher = softmax(rng.normal(size=(5, 3)), 2.0)
    in_error = np.array([True, False, True, False, False])
    loss, _ = balanced_distillation_loss(logits, labels, teacher, in_error, 0.4, 2.0)
    ce, _ = cross_entropy(logits[in_error], labels[in_error])
    kd, _ = distillation_loss(logits[~in_error], teacher[~in_error], 2.0)
    assert loss == pytest.approx(ce + 0.4 * kd, abs=1e-12)


def test_balanced_loss_needs_teacher_for_distilled_rows(rng):
    teacher = np.full((3, 2), np.nan)
    with pytest.raises(ContractViolation):
        balanced_distillation_loss(rng.normal(size=(3, 2)), [0, 1, 0], teacher, np.array([True, False, True]),
                                   0.5, 2.0)


def test_learning_rate_schedule():
    rates = [learning_rate_at(e, 10, 0.1, (0.4, 0.6, 0.8), 0.1) for e in range(10)]
    assert rates[:4] == [0.1] * 4
    assert rates[4] == pytest.approx(0.01)
    assert rates[6] == pytest.approx(0.001)
    assert rates[9] == pytest.approx(0.0001)


@pytest.mark.parametrize("epochs", [1, 2, 3])
def test_short_phases_start_at_the_initial_rate(epochs):
    for milestones in ((0.4, 0.6, 0.8), (0.5, 0.75)):
        rates = [learning_rate_at(e, epochs, 0.01, milestones, 0.1) for e in range(epochs)]
        assert rates[0] == 0.01
        assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_minibatches_cover_every_index_once():
    batches = list(iterate_minibatches(10, 4, np.random.default_rng(0)))
    assert [len(b) for b in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


def test_checkpoint_restores_weights(tmp_path, net):
    path = str(tmp_path / "model.bin")
    save_checkpoint(net, path)
    assert load_checkpoint(path).same_weights(net)
    with open(path, "rb") as f:
        header = f.readline()
    assert b'"layer_sizes": [5, 7, 6, 4]' in header


def test_checkpoint_rejects_truncated_payload(tmp_path, net):
    path = tmp_path / "model.bin"
    save_checkpoint(net, str(path))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ParseError):
        load_checkpoint(str(path))
