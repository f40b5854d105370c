"""Test the diffusion, matching and combined objectives."""
import numpy as np
import pytest

from pairedit.attention.attention import AttentionRecord, AttentionWeights, TokenGrid, matching_attention
from pairedit.diffusion.losses import combined_loss, diffusion_loss, matching_loss
from pairedit.interfaces.sample_pair import NO_SOURCE, Correspondence
from pairedit.numerics import functional as F
from pairedit.numerics.gradcheck import grad_check
from pairedit.numerics.tensor import Param, ShapeError, Tensor


def _two_token_case() -> tuple[AttentionRecord, Correspondence]:
    record = AttentionRecord("site", Tensor(np.array([[0.7311, 0.2689], [0.5, 0.5]])), 1, 2)
    correspondence = Correspondence(np.array([0, NO_SOURCE]), np.array([True, False]), 1, 2)
    return record, correspondence


def _random_case(rng: np.random.Generator, height: int, width: int) -> tuple[AttentionRecord, Correspondence]:
    n = height * width
    scores = rng.standard_normal((n, n))
    attention = np.exp(scores) / np.exp(scores).sum(axis=1, keepdims=True)
    visible = rng.random(n) < 0.6
    index = np.where(visible, rng.integers(n, size=n), NO_SOURCE)
    return AttentionRecord("site", Tensor(attention), height, width), Correspondence(index, visible, height, width)


def test_diffusion_loss_value(rng):
    """Mean squared error over both frames."""
    eps_hat = Tensor(rng.standard_normal((2, 3, 4, 4)))
    eps = rng.standard_normal((2, 3, 4, 4))
    assert diffusion_loss(eps_hat, eps).item() == pytest.approx(np.mean((eps_hat.data - eps) ** 2))


def test_diffusion_loss_without_source(rng):
    """Without source reconstruction the source error does not count."""
    eps = rng.standard_normal((2, 3, 4, 4))
    prediction = eps + 1.0
    changed = prediction.copy()
    changed[0] += rng.standard_normal((3, 4, 4))
    first = diffusion_loss(Tensor(prediction), eps, reconstruct_source=False).item()
    second = diffusion_loss(Tensor(changed), eps, reconstruct_source=False).item()
    assert first == pytest.approx(second)
    assert first == pytest.approx(0.5)


def test_diffusion_loss_shapes():
    """Predictions are frame pairs of the noise shape."""
    with pytest.raises(ShapeError, match="diffusion_loss"):
        diffusion_loss(Tensor(np.zeros((2, 4))), np.zeros((2, 5)))
    with pytest.raises(ShapeError, match="diffusion_loss"):
        diffusion_loss(Tensor(np.zeros((3, 4))), np.zeros((3, 4)))


def test_matching_loss_example():
    """One visible row with weights (0.7311, 0.2689) against the target (1, 0)."""
    record, correspondence = _two_token_case()
    loss = matching_loss([record], {2: correspondence})
    assert loss.item() == pytest.approx((0.7311 - 1) ** 2 + 0.2689**2)
    assert loss.item() == pytest.approx(0.1446, abs=1e-4)


def test_matching_loss_zero_cases():
    """Perfect maps, invisible rows and missing records give exactly zero."""
    record, correspondence = _two_token_case()
    perfect = AttentionRecord("site", Tensor(np.array([[1.0, 0.0], [0.3, 0.7]])), 1, 2)
    assert matching_loss([perfect], {2: correspondence}).item() == 0.0

    hidden = Correspondence(np.array([NO_SOURCE, NO_SOURCE]), np.array([False, False]), 1, 2)
    assert matching_loss([record], {2: hidden}).item() == 0.0
    assert matching_loss([], {2: correspondence}).item() == 0.0


def test_matching_loss_brute_force():
    """The loss agrees with the dense formula averaged over records."""
    rng = np.random.default_rng(seed=4)
    for _ in range(50):
        cases = [_random_case(rng, 2, 3), _random_case(rng, 1, 3)]
        expected = []
        for record, corr in cases:
            a, c, m = record.a_match.data, corr.matrix, corr.visible.astype(float)
            expected.append(np.sum(m[:, None] * (a - c) ** 2) / max(1.0, m.sum()))
        loss = matching_loss([record for record, _ in cases], [corr for _, corr in cases])
        assert abs(loss.item() - np.mean(expected)) < 1e-6


def test_matching_loss_missing_resolution():
    """Records need a correspondence at their token grid."""
    record, correspondence = _two_token_case()
    other = Correspondence(np.full(4, NO_SOURCE), np.zeros(4, dtype=bool), 2, 2)
    with pytest.raises(ValueError, match="1x2"):
        matching_loss([record], {4: other})


def test_combined_loss():
    """Components combine linearly."""
    report = combined_loss(0.5, 0.25, lambda_match=1.0)
    assert report.l_total == pytest.approx(0.75)
    assert report.objective.item() == pytest.approx(0.75)
    assert combined_loss(0.5, 0.25, lambda_match=0.0).l_total == pytest.approx(0.5)


@pytest.mark.parametrize("values", [(np.nan, 0.1), (0.1, np.inf)])
def test_combined_loss_not_finite(values):
    """Non-finite components abort."""
    with pytest.raises(FloatingPointError):
        combined_loss(*values)


def test_matching_gradient_scales_with_lambda(rng):
    """The gradient reaching the attention scores is linear in ``lambda_match``."""
    scores = Param(rng.standard_normal((2, 2)), name="scores")
    _, correspondence = _two_token_case()
    gradients = []
    for lambda_match in (1.0, 2.5):
        scores.zero_grad()
        record = AttentionRecord("site", F.softmax(scores, axis=-1), 1, 2)
        report = combined_loss(0.3, matching_loss([record], {2: correspondence}), lambda_match)
        report.objective.backward()
        gradients.append(scores.gradient.copy())
    assert np.abs(gradients[0]).sum() > 0
    np.testing.assert_allclose(gradients[1], 2.5 * gradients[0], rtol=1e-10)


# >> Finite-difference checks through the public objectives


@pytest.mark.parametrize("reconstruct_source", [True, False])
@pytest.mark.parametrize("seed", range(20))
def test_diffusion_loss_gradient(reconstruct_source, seed):
    """The diffusion objective passes the finite-difference check in both reconstruction modes."""
    rng = np.random.default_rng(seed)
    x = Param(rng.standard_normal((2, 3, 2, 2)), name="x")
    eps = rng.standard_normal((2, 3, 2, 2))
    report = grad_check(lambda: diffusion_loss(F.mul(x, x), eps, reconstruct_source), [x])
    assert report.passed, report.summary()
    if not reconstruct_source:
        assert not x.gradient[0].any()


@pytest.mark.parametrize("seed", range(20))
def test_matching_loss_gradient(seed):
    """The matching objective passes the finite-difference check through matching attention."""
    rng = np.random.default_rng(seed)
    w = AttentionWeights(4, 2, rng).astype(np.float64)
    source = Param(rng.standard_normal((4, 4)), name="source")
    target = Param(rng.standard_normal((4, 4)), name="target")
    visible = rng.random(4) < 0.75
    visible[0] = True
    correspondence = Correspondence(np.where(visible, rng.integers(4, size=4), NO_SOURCE), visible, 2, 2)

    def loss():
        _, record = matching_attention(TokenGrid(2, 2, target), TokenGrid(2, 2, source), w)
        return matching_loss([record], {2: correspondence})

    report = grad_check(loss, {"source": source, "target": target, **w.state()})
    assert report.passed, report.summary()
