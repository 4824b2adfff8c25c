"""JAX runtime configuration.

Import jax/jnp from here rather than directly: thread count and precision
must be fixed before the XLA runtime initializes. LSGP_NUM_THREADS controls
CPU parallelism (default 1 for bit-reproducible runs).
"""

import os


def _configure_threads():
    n = os.environ.get("LSGP_NUM_THREADS", "1")
    try:
        n = max(1, int(n))
    except ValueError:
        n = 1
    flags = os.environ.get("XLA_FLAGS", "")
    if "intra_op_parallelism_threads" not in flags:
        eigen = "true" if n > 1 else "false"
        flags = (
            f"{flags} --xla_cpu_multi_thread_eigen={eigen}"
            f" intra_op_parallelism_threads={n}"
        ).strip()
        os.environ["XLA_FLAGS"] = flags


_configure_threads()

import jax  # noqa: E402

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp  # noqa: E402

__all__ = ["jax", "jnp"]
