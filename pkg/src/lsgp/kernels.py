"""Kernels over augmented inputs [x; z]: ARD-RBF, the state-dependent linear
kernel (bias/scale/center given by small feed-forward nets over z), and
their elementwise product, plus the shared jittered-Cholesky utility.

Positive quantities (lengthscales, signal variance, the v net output, the
variational Cholesky diagonal elsewhere) are stored unconstrained and mapped
through softplus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .backend import jnp
from .errors import ConfigurationError, NumericalError

DEFAULT_JITTER = 1e-6
MAX_JITTER = 1e-2
DEFAULT_HIDDEN = 16

VARIANTS = ("ard_rbf", "state_linear", "product")


def softplus(x):
    return jnp.logaddexp(x, 0.0)


def inv_softplus(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 30.0, y, np.log(np.expm1(np.minimum(y, 30.0))))


@dataclass(frozen=True)
class AugmentedInput:
    """A survey response vector joined with its subject's latent embedding."""

    features: tuple[float, ...]
    latent: tuple[float, ...]

    @property
    def packed(self):
        return np.concatenate([self.features, self.latent])


@dataclass(frozen=True)
class KernelConfig:
    """Static kernel structure; parameter values live in a separate pytree.

    variant "ard_rbf" acts on the concatenated [x; z] input; "state_linear"
    is the z-conditioned linear kernel on x; "product" multiplies an
    x-factor (``x_kernel``) with an ARD-RBF over z.
    """

    variant: str
    d_x: int
    d_z: int
    hidden: int = DEFAULT_HIDDEN
    x_kernel: str = "state_linear"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "product" and self.x_kernel not in ("ard_rbf", "state_linear"):
            raise ConfigurationError(f"unknown product x_kernel {self.x_kernel!r}")
        if self.d_x < 1 or self.d_z < 0:
            raise ConfigurationError(f"bad dimensions d_x={self.d_x}, d_z={self.d_z}")

    @property
    def input_dim(self):
        return self.d_x + self.d_z


# ---------------------------------------------------------------------------
# Parameter initialization.


def _init_ard(dim):
    return {
        "ls_raw": np.full(dim, inv_softplus(1.0)),
        "var_raw": np.asarray(inv_softplus(1.0)),
    }


def _init_mlp(rng, d_in, d_out, hidden, out_bias=0.0):
    return {
        "w1": rng.normal(size=(hidden, d_in)) / np.sqrt(d_in),
        "b1": np.zeros(hidden),
        "w2": 0.1 * rng.normal(size=(d_out, hidden)) / np.sqrt(hidden),
        "b2": np.full(d_out, out_bias),
    }


def init_kernel_params(config, rng):
    """Fresh parameters at unit natural scale; the state-dependent linear
    nets start near (b, v, c) = (0, 1, 0), i.e. close to a plain linear
    kernel."""
    if config.variant == "ard_rbf":
        return _init_ard(config.input_dim)
    if config.variant == "state_linear":
        return _init_state_linear(config, rng)
    x = (
        _init_ard(config.d_x)
        if config.x_kernel == "ard_rbf"
        else _init_state_linear(config, rng)
    )
    return {"x": x, "z": _init_ard(config.d_z)}


def _init_state_linear(config, rng):
    if config.d_z < 1:
        raise ConfigurationError("state_linear kernel requires d_z >= 1")
    return {
        "b": _init_mlp(rng, config.d_z, 1, config.hidden),
        "v": _init_mlp(rng, config.d_z, 1, config.hidden, out_bias=float(inv_softplus(1.0))),
        "c": _init_mlp(rng, config.d_z, config.d_x, config.hidden),
    }


# ---------------------------------------------------------------------------
# Evaluation.


def mlp_apply(params, Z):
    h = jnp.tanh(Z @ params["w1"].T + params["b1"])
    return h @ params["w2"].T + params["b2"]


def _ard_rbf(params, A, B):
    ls = softplus(jnp.asarray(params["ls_raw"]))
    var = softplus(jnp.asarray(params["var_raw"]))
    a = A / ls
    b = B / ls
    d2 = (
        jnp.sum(a * a, axis=1)[:, None]
        - 2.0 * (a @ b.T)
        + jnp.sum(b * b, axis=1)[None, :]
    )
    return var * jnp.exp(-0.5 * jnp.maximum(d2, 0.0))


def _ard_rbf_diag(params, A):
    var = softplus(jnp.asarray(params["var_raw"]))
    return jnp.full(A.shape[0], var)


def _state_linear_parts(params, X, Z):
    b = mlp_apply(params["b"], Z)[:, 0]
    v = softplus(mlp_apply(params["v"], Z)[:, 0])
    centered = X - mlp_apply(params["c"], Z)
    return b, v, centered


def _state_linear(params, XA, ZA, XB, ZB):
    bA, vA, cA = _state_linear_parts(params, XA, ZA)
    bB, vB, cB = _state_linear_parts(params, XB, ZB)
    return bA[:, None] * bB[None, :] + (vA[:, None] * vB[None, :]) * (cA @ cB.T)


def _state_linear_diag(params, X, Z):
    b, v, centered = _state_linear_parts(params, X, Z)
    return b * b + v * v * jnp.sum(centered * centered, axis=1)


def _split(config, A):
    A = jnp.asarray(A)
    if A.ndim != 2 or A.shape[1] != config.input_dim:
        raise ConfigurationError(
            f"inputs must be (n, {config.input_dim}), got {tuple(A.shape)}"
        )
    return A[:, : config.d_x], A[:, config.d_x:]


def _as_array(A):
    if isinstance(A, (list, tuple)) and A and isinstance(A[0], AugmentedInput):
        return np.stack([a.packed for a in A])
    return np.asarray(A, dtype=float)


def kernel_matrix(config, params, A, B=None):
    """Gram matrix K[i, j] = k(A[i], B[j]) over packed [x; z] rows (or lists
    of AugmentedInput). The product variant multiplies its factor matrices
    elementwise."""
    A = _as_array(A)
    B = A if B is None else _as_array(B)
    XA, ZA = _split(config, A)
    XB, ZB = _split(config, B)
    if config.variant == "ard_rbf":
        return _ard_rbf(params, jnp.concatenate([XA, ZA], axis=1), jnp.concatenate([XB, ZB], axis=1))
    if config.variant == "state_linear":
        return _state_linear(params, XA, ZA, XB, ZB)
    kx = (
        _ard_rbf(params["x"], XA, XB)
        if config.x_kernel == "ard_rbf"
        else _state_linear(params["x"], XA, ZA, XB, ZB)
    )
    kz = _ard_rbf(params["z"], ZA, ZB)
    return kx * kz


def kernel_diag(config, params, A):
    """diag(kernel_matrix(config, params, A, A)) without the full matrix."""
    A = _as_array(A)
    X, Z = _split(config, A)
    if config.variant == "ard_rbf":
        return _ard_rbf_diag(params, A)
    if config.variant == "state_linear":
        return _state_linear_diag(params, X, Z)
    kx = (
        _ard_rbf_diag(params["x"], X)
        if config.x_kernel == "ard_rbf"
        else _state_linear_diag(params["x"], X, Z)
    )
    return kx * _ard_rbf_diag(params["z"], Z)


def latent_kernel_matrix(config, params, ZA, ZB=None):
    """The z-factor Gram matrix of a product kernel (subject-similarity
    covariance). Raises unless the kernel decomposes."""
    if config.variant != "product":
        raise ConfigurationError("latent factor only defined for product kernels")
    ZA = np.asarray(ZA, dtype=float)
    ZB = ZA if ZB is None else np.asarray(ZB, dtype=float)
    return _ard_rbf(params["z"], jnp.asarray(ZA), jnp.asarray(ZB))


def state_dependent_linear(params, x, z, x2, z2):
    """Single-pair evaluation b(z)b(z') + v(z)v(z')(x-c(z))^T(x'-c(z'))."""
    K = _state_linear(
        params,
        jnp.asarray(x, dtype=float)[None, :],
        jnp.asarray(z, dtype=float)[None, :],
        jnp.asarray(x2, dtype=float)[None, :],
        jnp.asarray(z2, dtype=float)[None, :],
    )
    return float(K[0, 0])


# ---------------------------------------------------------------------------
# Jittered Cholesky.


def jittered_cholesky(K, jitter=DEFAULT_JITTER, max_jitter=MAX_JITTER):
    """Lower-triangular L with L @ L.T = K + jitter * I. On failure the
    jitter escalates tenfold up to ``max_jitter``; returns (L, jitter_used).
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ConfigurationError(f"expected a square matrix, got {K.shape}")
    eye = np.eye(K.shape[0])
    attempt = float(jitter)
    while True:
        try:
            L = np.linalg.cholesky(K + attempt * eye)
            return L, attempt
        except np.linalg.LinAlgError:
            nxt = attempt * 10.0 if attempt > 0.0 else 1e-10
            if nxt > max_jitter:
                raise NumericalError(
                    f"Cholesky failed at jitter cap {max_jitter:g} "
                    f"(last attempt {attempt:g})"
                ) from None
            attempt = nxt


# ---------------------------------------------------------------------------
# Serialization: natural-space values plus structure.


def _ard_to_json(params):
    return {
        "lengthscales": np.asarray(softplus(jnp.asarray(params["ls_raw"]))).tolist(),
        "variance": float(softplus(jnp.asarray(params["var_raw"]))),
    }


def _ard_from_json(d):
    return {
        "ls_raw": inv_softplus(np.asarray(d["lengthscales"], dtype=float)),
        "var_raw": np.asarray(inv_softplus(d["variance"])),
    }


def _mlp_to_json(params):
    return {k: np.asarray(v).tolist() for k, v in params.items()}


def _mlp_from_json(d):
    return {k: np.asarray(v, dtype=float) for k, v in d.items()}


def kernel_params_to_dict(config, params):
    if config.variant == "ard_rbf":
        body = _ard_to_json(params)
    elif config.variant == "state_linear":
        body = {name: _mlp_to_json(params[name]) for name in ("b", "v", "c")}
    else:
        x = (
            _ard_to_json(params["x"])
            if config.x_kernel == "ard_rbf"
            else {name: _mlp_to_json(params["x"][name]) for name in ("b", "v", "c")}
        )
        body = {"x": x, "z": _ard_to_json(params["z"])}
    return {
        "variant": config.variant,
        "d_x": config.d_x,
        "d_z": config.d_z,
        "hidden": config.hidden,
        "x_kernel": config.x_kernel,
        "params": body,
    }


def kernel_params_from_dict(d):
    config = KernelConfig(
        variant=d["variant"],
        d_x=int(d["d_x"]),
        d_z=int(d["d_z"]),
        hidden=int(d["hidden"]),
        x_kernel=d.get("x_kernel", "state_linear"),
    )
    body = d["params"]
    if config.variant == "ard_rbf":
        params = _ard_from_json(body)
    elif config.variant == "state_linear":
        params = {name: _mlp_from_json(body[name]) for name in ("b", "v", "c")}
    else:
        x = (
            _ard_from_json(body["x"])
            if config.x_kernel == "ard_rbf"
            else {name: _mlp_from_json(body["x"][name]) for name in ("b", "v", "c")}
        )
        params = {"x": x, "z": _ard_from_json(body["z"])}
    return config, params


def kernel_params_to_json(config, params):
    return json.dumps(kernel_params_to_dict(config, params), indent=2)


def kernel_params_from_json(text):
    return kernel_params_from_dict(json.loads(text))
