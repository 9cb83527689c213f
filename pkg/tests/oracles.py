"""Straight-line numpy transcriptions of the cell and head equations.

These read parameters out of the fused tensors by hand and never call the
library's forward code, so they serve as independent references.
"""
import itertools

import numpy as np


def sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def val(p, name):
    return p.params[name].value


def leaf(x, p, act=sig):
    d = p.d
    W, b = val(p, "leaf.W"), val(p, "leaf.b")
    i = sig(x @ W[:, :d] + b[:d])
    o = sig(x @ W[:, d:2 * d] + b[d:2 * d])
    u = act(x @ W[:, 2 * d:] + b[2 * d:])
    c = i * u
    return o * np.tanh(c), c


def lary_sum(hs, cs, p):
    d, L = p.d, len(hs)
    U, b = val(p, "comp.U"), val(p, "comp.b")

    def gate(k):
        return sum(hs[j] @ U[j][:, k * d:(k + 1) * d] for j in range(L)) + b[k * d:(k + 1) * d]

    i, o, u = sig(gate(0)), sig(gate(1)), sig(gate(2))
    c = i * u
    for k in range(L):
        c = c + sig(gate(3 + k)) * cs[k]
    return o * np.tanh(c), c


def child_sum(hs, cs, p):
    d = p.d
    U, b = val(p, "comp.U"), val(p, "comp.b")
    Uf, bf = val(p, "comp.Uf"), val(p, "comp.bf")
    hsum = sum(hs)
    i = sig(hsum @ U[:, :d] + b[:d])
    o = sig(hsum @ U[:, d:2 * d] + b[d:2 * d])
    u = sig(hsum @ U[:, 2 * d:] + b[2 * d:])
    c = i * u
    for h, ck in zip(hs, cs):
        c = c + sig(h @ Uf + bf) * ck
    return o * np.tanh(c), c


def treenet(hs_, cs_, hc, cc, p):
    d = p.d
    U, b = val(p, "comp.U"), val(p, "comp.b")

    def gate(k):
        return hs_ @ U[0][:, k * d:(k + 1) * d] + hc @ U[1][:, k * d:(k + 1) * d] + b[k * d:(k + 1) * d]

    o, fs, fc = sig(gate(0)), sig(gate(1)), sig(gate(2))
    c = fs * cs_ + fc * cc
    return o * np.tanh(c), c


def binary_cp(hl, cl, hr, cr, p):
    r = p.r
    U, Q, q = val(p, "comp.U"), val(p, "comp.Q"), val(p, "comp.q")
    hlb, hrb = np.append(hl, 1.0), np.append(hr, 1.0)
    g = []
    for t in range(5):
        el = hlb @ U[0][:, t * r:(t + 1) * r]
        er = hrb @ U[1][:, t * r:(t + 1) * r]
        g.append(sig((el * er) @ Q[t] + q[t]))
    i, o, u, fl, fr = g
    c = i * u + fl * cl + fr * cr
    return o * np.tanh(c), c


def invariant_cp(hs, cs, p):
    r = p.r
    U, Q, q = val(p, "comp.U"), val(p, "comp.Q"), val(p, "comp.q")
    Uf, bf = val(p, "comp.Uf"), val(p, "comp.bf")
    g = []
    for t in range(3):
        e = np.ones(r)
        for h in hs:
            e = e * (np.append(h, 1.0) @ U[:, t * r:(t + 1) * r])
        g.append(sig(e @ Q[t] + q[t]))
    i, o, u = g
    c = i * u
    for h, ck in zip(hs, cs):
        c = c + sig(h @ Uf + bf) * ck
    return o * np.tanh(c), c


def classify(h, hp):
    P = {k: v.value for k, v in hp.params.items()}
    if hp.hidden:
        s = np.maximum(h @ P["head.W1"] + P["head.b1"], 0.0)
        z = s @ P["head.W2"] + P["head.b2"]
    else:
        z = h @ P["head.W2"] + P["head.b2"]
    e = np.exp(z - z.max())
    return e / e.sum()


def pair_head(ha, hb, hp):
    P = {k: v.value for k, v in hp.params.items()}
    s = sig(np.abs(ha - hb) @ P["head.Wp"] + (ha * hb) @ P["head.Wx"] + P["head.b"])
    z = s @ P["head.Wo"] + P["head.bo"]
    e = np.exp(z - z.max())
    p = e / e.sum()
    return p, float(p @ np.arange(1, len(p) + 1))


def cp_tensor_loops(us, Q, q):
    """Full tensor of a CP map by explicit loops over every index."""
    dims = [u.shape[0] for u in us]
    r, K = Q.shape
    T = np.zeros(dims + [K])
    for idx in itertools.product(*(range(n) for n in dims)):
        for k in range(K):
            s = 0.0
            for i in range(r):
                term = Q[i, k]
                for j, u in zip(idx, us):
                    term *= u[j, i]
                s += term
            T[idx + (k,)] = s
    T[tuple(n - 1 for n in dims)] += q
    return T


def apply_loops(T, inputs):
    bars = [np.append(a, 1.0) for a in inputs]
    K = T.shape[-1]
    out = np.zeros(K)
    for idx in itertools.product(*(range(n) for n in T.shape[:-1])):
        w = 1.0
        for j, b in zip(idx, bars):
            w *= b[j]
        out += w * T[idx]
    return out


def tie_binary_to_invariant(inv, bcp):
    """Configure a binary CP cell so it computes the order-free CP cell at
    two children: the i/o/u factor blocks are copied onto both modes, and the
    two forget gates realize the affine map h_k -> Uf h_k + bf through the
    rank space (needs r == d)."""
    d, r = inv.d, inv.r
    assert bcp.d == d and bcp.r == r == d
    U, Q, q = (bcp.params[k].value for k in ("comp.U", "comp.Q", "comp.q"))
    Ui, Qi, qi = (inv.params[k].value for k in ("comp.U", "comp.Q", "comp.q"))
    U[0][:, :3 * r] = Ui
    U[1][:, :3 * r] = Ui
    Q[:3], q[:3] = Qi, qi
    affine = np.vstack([inv.params["comp.Uf"].value, inv.params["comp.bf"].value])
    ones = np.zeros((d + 1, r))
    ones[-1] = 1.0
    U[0][:, 3 * r:4 * r], U[1][:, 3 * r:4 * r] = affine, ones
    U[0][:, 4 * r:], U[1][:, 4 * r:] = ones, affine
    Q[3:] = np.eye(d)
    q[3:] = 0.0
    return bcp
