"""Shared finite-difference oracles for gradient tests."""

import numpy as np

import dualcast.tensor as T


def fd_grad(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def analytic_grad(op, x):
    """Gradient of sum(op(x)) via the package's own backward."""
    t = T.Tensor(x, requires_grad=True)
    loss = T.sum_(op(t))
    T.backward(loss)
    return t.grad


def check_op_grad(op, x, rtol=1e-5, h=1e-5):
    """Compare analytic vs finite-difference gradients of sum(op(x))."""
    an = analytic_grad(op, np.array(x, dtype=np.float64))
    fd = fd_grad(lambda v: float(T.sum_(op(T.Tensor(v))).data), np.array(x, dtype=np.float64), h=h)
    denom = np.maximum(np.maximum(np.abs(an), np.abs(fd)), 1e-4)
    rel = np.abs(an - fd) / denom
    assert rel.max() < rtol, f"max rel err {rel.max():.3e}"


def directional_fd(loss_fn, param, rng, h=1e-5):
    """(directional finite difference, analytic directional derivative)
    for a random unit direction over one parameter tensor."""
    v = rng.standard_normal(param.data.shape)
    v /= np.linalg.norm(v.ravel())
    orig = param.data.copy()
    param.data = orig + h * v
    fp = loss_fn()
    param.data = orig - h * v
    fm = loss_fn()
    param.data = orig
    fd = (fp - fm) / (2 * h)
    param.grad = None
    an_loss = loss_fn(graph=True)
    T.backward(an_loss)
    an = float((param.grad * v).sum())
    param.grad = None
    return fd, an


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)
