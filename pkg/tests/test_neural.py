import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import rtsn.neural as nn

from helpers import fd_gradient, rel_err

FD_TOL = 1e-6


def check_grads(build, arrays, tol=FD_TOL, eps=1e-5):
    """Compare backward() gradients of build(*tensors) against central FD."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    params = [nn.parameter(a.copy(), f"p{i}") for i, a in enumerate(arrays)]
    loss = build(*params)
    analytic = nn.grads_for(loss, params)
    for i in range(len(arrays)):
        def scalar(v, i=i):
            args = [nn.Tensor(a) for a in arrays]
            args[i] = nn.Tensor(v)
            return float(build(*args).data)

        numeric = fd_gradient(scalar, arrays[i], eps)
        err = rel_err(analytic[i], numeric)
        assert err < tol, f"arg {i}: rel err {err}"


def _proj(t, seed):
    """Random fixed projection to a scalar so gradients are non-uniform."""
    rng = np.random.default_rng(seed)
    return nn.tsum(nn.mul(t, rng.standard_normal(t.shape)))


# ---------------------------------------------------------------------------
# tensor basics
# ---------------------------------------------------------------------------


def test_tensor_rejects_nonfinite():
    with pytest.raises(FloatingPointError, match="non-finite"):
        nn.Tensor(np.array([1.0, np.inf]))
    with pytest.raises(FloatingPointError, match="myname"):
        nn.Tensor(np.array([np.nan]), name="myname")


def test_tensor_dtypes():
    assert nn.Tensor(np.arange(3)).dtype == np.float64
    assert nn.Tensor(np.zeros(3, dtype=np.float32)).dtype == np.float32
    assert nn.Tensor(np.zeros(3, dtype=np.float64)).dtype == np.float64


def test_backward_requires_scalar():
    p = nn.parameter(np.ones((2, 2)), "p")
    with pytest.raises(ValueError, match="scalar"):
        nn.backward(nn.square(p))


# ---------------------------------------------------------------------------
# primitive gradients
# ---------------------------------------------------------------------------


def test_add_sub_mul_gradients_with_broadcast():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((1, 4))
    check_grads(lambda x, y: _proj(nn.add(x, y), 0), [a, b])
    check_grads(lambda x, y: _proj(nn.sub(x, y), 1), [a, b])
    check_grads(lambda x, y: _proj(nn.mul(x, y), 2), [a, b])
    check_grads(lambda x: _proj(nn.mul(x, 2.5), 3), [a])


def test_matmul_gradient():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 5))
    b = rng.standard_normal((5, 4))
    check_grads(lambda x, y: _proj(nn.matmul(x, y), 4), [a, b])


def test_square_gradient():
    rng = np.random.default_rng(3)
    check_grads(lambda x: _proj(nn.square(x), 5), [rng.standard_normal((4, 3))])


@pytest.mark.parametrize("axis,keepdims", [
    (None, False), (0, False), (1, False), (-1, False),
    ((-2, -1), False), (1, True), ((0, 2), False),
])
def test_sum_gradient_axes(axis, keepdims):
    rng = np.random.default_rng(6)
    a = rng.standard_normal((2, 3, 4))
    check_grads(lambda x: _proj(nn.tsum(x, axis=axis, keepdims=keepdims), 7), [a])


def test_mean_gradient():
    rng = np.random.default_rng(7)
    check_grads(lambda x: nn.tmean(nn.square(x)), [rng.standard_normal((3, 5))])


def test_reshape_gradient():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((2, 6))
    check_grads(lambda x: _proj(nn.reshape(x, (3, 4)), 8), [a])
    check_grads(lambda x: _proj(nn.reshape(x, (12,)), 9), [a])


def test_slice_gradient():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((4, 6))
    check_grads(lambda x: _proj(x[1:3, ::2], 10), [a])
    check_grads(lambda x: _proj(x[:, 2:], 11), [a])


def test_concat_gradient():
    rng = np.random.default_rng(10)
    a = rng.standard_normal((2, 3))
    b = rng.standard_normal((2, 5))
    check_grads(lambda x, y: _proj(nn.concat([x, y], axis=1), 12), [a, b])
    c = rng.standard_normal((4, 3))
    check_grads(lambda x, y: _proj(nn.concat([x, y], axis=0), 13), [a, c])


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def test_selu_values():
    # frozen from scale*x (x>0) and scale*alpha*(exp(x)-1) (x<=0)
    x = nn.Tensor(np.array([-1.0, 0.0, 2.0]))
    got = nn.selu(x).data
    assert_allclose(got[0], -1.1113307378125625, rtol=0, atol=1e-15)
    assert got[1] == 0.0
    assert_allclose(got[2], 2.101401974710961, rtol=0, atol=1e-15)


def test_selu_gradient():
    rng = np.random.default_rng(11)
    # keep away from the kink at 0 where FD is one-sided
    a = rng.standard_normal((3, 4))
    a[np.abs(a) < 0.05] = 0.5
    check_grads(lambda x: _proj(nn.selu(x), 14), [a])


def test_linear_value_and_gradient():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((4, 5))
    w = rng.standard_normal((3, 5))
    b = rng.standard_normal(3)
    got = nn.linear(nn.Tensor(x), nn.Tensor(w), nn.Tensor(b)).data
    assert_allclose(got, x @ w.T + b, rtol=1e-12, atol=1e-12)
    check_grads(lambda *t: _proj(nn.linear(*t), 15), [x, w, b])
    check_grads(lambda xx, ww: _proj(nn.linear(xx, ww), 16), [x, w])


def test_lstm_cell_scalar_oracle():
    # all weights and biases 0.5, x=1, zero state; values frozen from the
    # gate equations computed by hand: z=1 for every gate, i=f=o=sigmoid(1),
    # g=tanh(1), c'=i*g, h'=o*tanh(c'), then one more step with h'=0.3696...
    one = np.full((4, 1), 0.5)
    x = nn.Tensor(np.array([[1.0]]))
    h = nn.Tensor(np.zeros((1, 1)))
    c = nn.Tensor(np.zeros((1, 1)))
    w_in, w_rec, bias = nn.Tensor(one), nn.Tensor(one), nn.Tensor(np.full(4, 0.5))
    out = nn.lstm_cell(x, h, c, w_in, w_rec, bias)
    assert out.shape == (1, 2)
    assert_allclose(out.data[0, 0], 0.36960635293570576, rtol=0, atol=1e-15)
    assert_allclose(out.data[0, 1], 0.5567699411459397, rtol=0, atol=1e-15)
    out2 = nn.lstm_cell(x, out[:, :1], out[:, 1:], w_in, w_rec, bias)
    assert_allclose(out2.data[0, 0], 0.6020227660613723, rtol=0, atol=1e-14)
    assert_allclose(out2.data[0, 1], 1.0612064236791456, rtol=0, atol=1e-14)


def test_lstm_cell_gradients():
    rng = np.random.default_rng(13)
    b, d, hdim = 3, 4, 5
    arrays = [
        rng.standard_normal((b, d)),
        rng.standard_normal((b, hdim)),
        rng.standard_normal((b, hdim)),
        rng.standard_normal((4 * hdim, d)) * 0.5,
        rng.standard_normal((4 * hdim, hdim)) * 0.5,
        rng.standard_normal(4 * hdim) * 0.5,
    ]
    check_grads(lambda *t: _proj(nn.lstm_cell(*t), 17), arrays)


def test_lstm_cell_chained_gradient():
    # two steps with state threading, so the c-path backward is exercised
    rng = np.random.default_rng(14)
    b, d, hdim = 2, 3, 4

    def two_steps(x1, x2, w_in, w_rec, bias):
        h = nn.Tensor(np.zeros((b, hdim)))
        c = nn.Tensor(np.zeros((b, hdim)))
        hc = nn.lstm_cell(x1, h, c, w_in, w_rec, bias)
        hc = nn.lstm_cell(x2, hc[:, :hdim], hc[:, hdim:], w_in, w_rec, bias)
        return _proj(hc, 18)

    arrays = [
        rng.standard_normal((b, d)),
        rng.standard_normal((b, d)),
        rng.standard_normal((4 * hdim, d)) * 0.5,
        rng.standard_normal((4 * hdim, hdim)) * 0.5,
        rng.standard_normal(4 * hdim) * 0.5,
    ]
    check_grads(two_steps, arrays)


def conv_loop_oracle(x, kernels, bias):
    """Direct nested-loop cross-correlation with zero padding."""
    bn, c_in, n = x.shape
    c_out, _, k = kernels.shape
    half = (k - 1) // 2
    out = np.zeros((bn, c_out, n))
    for bi in range(bn):
        for o in range(c_out):
            for pos in range(n):
                acc = 0.0
                for ci in range(c_in):
                    for j in range(k):
                        src = pos + j - half
                        if 0 <= src < n:
                            acc += x[bi, ci, src] * kernels[o, ci, j]
                out[bi, o, pos] = acc + bias[o]
    return out


def test_conv1d_matches_loop_oracle():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((2, 3, 7))
    kernels = rng.standard_normal((4, 3, 5))
    bias = rng.standard_normal(4)
    got = nn.conv1d_freq(nn.Tensor(x), nn.Tensor(kernels), nn.Tensor(bias)).data
    assert_allclose(got, conv_loop_oracle(x, kernels, bias), rtol=1e-12, atol=1e-12)


def test_conv1d_gradients():
    rng = np.random.default_rng(16)
    arrays = [
        rng.standard_normal((2, 3, 6)),
        rng.standard_normal((4, 3, 3)),
        rng.standard_normal(4),
    ]
    check_grads(lambda *t: _proj(nn.conv1d_freq(*t), 19), arrays)


def test_conv1d_validation():
    x = nn.Tensor(np.zeros((1, 2, 5)))
    with pytest.raises(ValueError, match="odd"):
        nn.conv1d_freq(x, nn.Tensor(np.zeros((1, 2, 4))), nn.Tensor(np.zeros(1)))
    with pytest.raises(ValueError, match="channels"):
        nn.conv1d_freq(x, nn.Tensor(np.zeros((1, 3, 3))), nn.Tensor(np.zeros(1)))


def test_gather_steps_matches_loop():
    rng = np.random.default_rng(17)
    b, t, r, n, m = 2, 5, 3, 4, 3
    x = rng.standard_normal((b, t, r, n))
    idx = rng.integers(0, t, size=(b, t, m))
    got = nn.gather_steps(nn.Tensor(x), idx).data
    assert got.shape == (b, t, m * r, n)
    for bi in range(b):
        for ti in range(t):
            for mi in range(m):
                for ri in range(r):
                    assert_allclose(
                        got[bi, ti, mi * r + ri],
                        x[bi, idx[bi, ti, mi], ri],
                        rtol=0, atol=0,
                    )


def test_gather_steps_gradient_with_repeats():
    rng = np.random.default_rng(18)
    b, t, r, n, m = 2, 4, 2, 3, 3
    x = rng.standard_normal((b, t, r, n))
    idx = rng.integers(0, t, size=(b, t, m))
    idx[0, 0, :] = 1  # repeated index exercises gradient accumulation
    check_grads(lambda xx: _proj(nn.gather_steps(xx, idx), 20), [x])


def test_gather_steps_index_validation():
    x = nn.Tensor(np.zeros((1, 3, 2, 2)))
    with pytest.raises(ValueError, match="out of range"):
        nn.gather_steps(x, np.array([[[3], [0], [0]]]))
    with pytest.raises(ValueError, match="incompatible"):
        nn.gather_steps(x, np.zeros((2, 3, 1), dtype=int))


# ---------------------------------------------------------------------------
# graph behavior
# ---------------------------------------------------------------------------


def test_grads_for_detached_param_raises():
    p = nn.parameter(np.ones(3), "attached")
    q = nn.parameter(np.ones(3), "detached")
    loss = nn.tsum(nn.square(p))
    with pytest.raises(ValueError, match="detached is not part of the loss graph"):
        nn.grads_for(loss, [p, q])


def test_in_graph_but_zero_influence_gets_zero_grad():
    p = nn.parameter(np.ones(3), "p")
    q = nn.parameter(np.ones(3), "q")
    loss = nn.tsum(nn.add(nn.mul(q, 0.0), nn.square(p)))
    gp, gq = nn.grads_for(loss, [p, q])
    assert_allclose(gp, 2.0, rtol=0, atol=0)
    assert_allclose(gq, 0.0, rtol=0, atol=0)


def test_backward_deterministic():
    def run():
        rng = np.random.default_rng(19)
        p = nn.parameter(rng.standard_normal((8, 8)), "p")
        x = nn.Tensor(rng.standard_normal((8, 8)))
        loss = nn.tsum(nn.square(nn.matmul(nn.selu(nn.mul(p, x)), p)))
        (g,) = nn.grads_for(loss, [p])
        return g

    assert np.array_equal(run(), run())


def test_reused_node_accumulates_once_per_path():
    # y = p*p contributes through two paths when summed with itself
    p = nn.parameter(np.array([3.0]), "p")
    y = nn.square(p)
    loss = nn.tsum(nn.add(y, y))
    (g,) = nn.grads_for(loss, [p])
    assert_allclose(g, 12.0, rtol=0, atol=0)  # d/dp of 2*p^2


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


def test_adam_matches_scripted_oracle():
    rng = np.random.default_rng(20)
    p0 = rng.standard_normal(6)
    grads = [rng.standard_normal(6) for _ in range(5)]

    p = nn.parameter(p0.copy(), "w")
    state = nn.AdamState(learning_rate=0.01)
    for g in grads:
        nn.adam_update(state, [p], [g])

    # independent reimplementation of the update rule
    ref = p0.copy()
    m = np.zeros(6)
    v = np.zeros(6)
    for t, g in enumerate(grads, start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        m_hat = m / (1.0 - 0.9**t)
        v_hat = v / (1.0 - 0.999**t)
        ref -= 0.01 * m_hat / (np.sqrt(v_hat) + 1e-8)

    assert_allclose(p.data, ref, rtol=1e-12, atol=1e-14)


def test_adam_first_step_is_signed_learning_rate():
    p = nn.parameter(np.array([1.0, 1.0]), "w")
    state = nn.AdamState(learning_rate=0.05)
    nn.adam_update(state, [p], [np.array([10.0, -0.3])])
    step = p.data - 1.0
    assert_allclose(step, [-0.05, 0.05], rtol=1e-6, atol=0)


def test_adam_moment_buffers_follow_names():
    rng = np.random.default_rng(21)
    a0, b0 = rng.standard_normal(3), rng.standard_normal(3)
    ga, gb = rng.standard_normal(3), rng.standard_normal(3)

    def run(swap_second_call):
        a = nn.parameter(a0.copy(), "a")
        b = nn.parameter(b0.copy(), "b")
        st = nn.AdamState(learning_rate=0.1)
        nn.adam_update(st, [a, b], [ga, gb])
        if swap_second_call:
            nn.adam_update(st, [b, a], [gb, ga])
        else:
            nn.adam_update(st, [a, b], [ga, gb])
        return a.data, b.data

    for x, y in zip(run(False), run(True)):
        assert np.array_equal(x, y)


def test_adam_error_cases():
    p = nn.parameter(np.ones(2), "w")
    state = nn.AdamState()
    with pytest.raises(FloatingPointError, match="parameter w"):
        nn.adam_update(state, [p], [np.array([np.nan, 0.0])])
    with pytest.raises(ValueError, match="shape"):
        nn.adam_update(state, [p], [np.ones(3)])
    with pytest.raises(ValueError, match="named"):
        nn.adam_update(state, [nn.Tensor(np.ones(2), requires_grad=True)], [np.ones(2)])
    with pytest.raises(ValueError, match="params but"):
        nn.adam_update(state, [p], [])
