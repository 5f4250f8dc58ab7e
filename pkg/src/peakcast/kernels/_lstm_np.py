"""Pure-numpy recurrence kernels (fallback backend).

Both backends share one contract. Gate weights are packed column-wise in
the order forget | input | output | candidate, so for a layer with input
width I and H units:

    w : (I, 4H)   input projections
    u : (H, 4H)   recurrent projections
    b : (4H,)     biases

Sequences are laid out time-major: x_seq is (T, B, I) for T timesteps and
batch B. Initial hidden and cell states are zero.
"""

import numpy as np

BACKEND_NAME = "python"


def _sigmoid(z):
    # Stable piecewise logistic; the compiled backend uses the same split
    # so the two agree to rounding error.
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_layer_forward(x_seq, w, u, b):
    """Run one layer over a full sequence.

    Returns (h_seq, c_seq, tanhc_seq, gates) where gates is (T, B, 4H)
    holding post-activation f, i, o and the tanh candidate.
    """
    T, B, I = x_seq.shape
    H = u.shape[0]

    # Input-side projections for all timesteps in one BLAS call.
    xw = x_seq.reshape(T * B, I) @ w
    xw += b
    xw = xw.reshape(T, B, 4 * H)

    gates = np.empty((T, B, 4 * H))
    h_seq = np.empty((T, B, H))
    c_seq = np.empty((T, B, H))
    tanhc_seq = np.empty((T, B, H))

    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        z = xw[t] + h_prev @ u
        f = _sigmoid(z[:, :H])
        i = _sigmoid(z[:, H:2 * H])
        o = _sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc

        gates[t, :, :H] = f
        gates[t, :, H:2 * H] = i
        gates[t, :, 2 * H:3 * H] = o
        gates[t, :, 3 * H:] = g
        c_seq[t] = c
        tanhc_seq[t] = tc
        h_seq[t] = h
        h_prev, c_prev = h, c

    return h_seq, c_seq, tanhc_seq, gates


def lstm_layer_backward(x_seq, w, u, gates, c_seq, tanhc_seq, h_seq, dh_seq):
    """Backpropagate through one layer's full sequence.

    dh_seq is the loss gradient w.r.t. each timestep's hidden output
    (contributions from above; the recurrent carry is handled here).
    Returns (dx_seq, dw, du, db).
    """
    T, B, I = x_seq.shape
    H = u.shape[0]

    dz = np.empty((T, B, 4 * H))
    dh_carry = np.zeros((B, H))
    dc_carry = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        f = gates[t, :, :H]
        i = gates[t, :, H:2 * H]
        o = gates[t, :, 2 * H:3 * H]
        g = gates[t, :, 3 * H:]
        tc = tanhc_seq[t]
        c_prev = c_seq[t - 1] if t > 0 else 0.0

        dh = dh_seq[t] + dh_carry
        dc = dc_carry + dh * o * (1.0 - tc * tc)
        do = dh * tc
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dc_carry = dc * f

        dz[t, :, :H] = df * f * (1.0 - f)
        dz[t, :, H:2 * H] = di * i * (1.0 - i)
        dz[t, :, 2 * H:3 * H] = do * o * (1.0 - o)
        dz[t, :, 3 * H:] = dg * (1.0 - g * g)
        dh_carry = dz[t] @ u.T

    dz_flat = dz.reshape(T * B, 4 * H)
    dw = x_seq.reshape(T * B, I).T @ dz_flat
    h_prev_seq = np.concatenate([np.zeros((1, B, H)), h_seq[:-1]], axis=0)
    du = h_prev_seq.reshape(T * B, H).T @ dz_flat
    db = dz_flat.sum(axis=0)
    dx_seq = (dz_flat @ w.T).reshape(T, B, I)
    return dx_seq, dw, du, db
