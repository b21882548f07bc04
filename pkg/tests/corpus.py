"""Random expression corpus shared by the AD tests and the acceptance suite.

Expressions are safe by construction: every ln, sqrt, division and
non-integer power receives an argument of the form ``c + e^2`` with
``c >= 0.5``, so no sample can leave the domain.
"""

import numpy as np

from nablavar.expr import eval_with_sens, parse

SLOTS = ("x", "v", "z", "s")
LEAVES = ("x", "v", "z", "s", "t", "k")


def _positive(rng, depth):
    c = round(float(rng.uniform(0.5, 2.0)), 3)
    return f"({c} + ({random_source(rng, depth)})^2)"


def random_source(rng, depth=3):
    """A random expression over x, v, z, s, t and the parameter k."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.25:
            return str(round(float(rng.uniform(0.1, 3.0)), 3))
        return str(rng.choice(LEAVES))
    sub = depth - 1
    kind = int(rng.integers(0, 11))
    if kind <= 2:
        op = ("+", "-", "*")[kind]
        return f"({random_source(rng, sub)}) {op} ({random_source(rng, sub)})"
    if kind == 3:
        return f"-({random_source(rng, sub)})"
    if kind == 4:
        return f"{rng.choice(('sin', 'cos'))}({random_source(rng, sub)})"
    if kind == 5:
        return f"exp(sin({random_source(rng, sub)}))"
    if kind == 6:
        return f"ln{_positive(rng, sub)}"
    if kind == 7:
        return f"sqrt{_positive(rng, sub)}"
    if kind == 8:
        return f"({random_source(rng, sub)}) / {_positive(rng, sub)}"
    if kind == 9:
        r = round(float(rng.uniform(-1.5, 2.5)), 2)
        return f"{_positive(rng, sub)}^{r}" if r >= 0 else f"{_positive(rng, sub)}^({r})"
    n = int(rng.integers(0, 4))
    return f"({random_source(rng, sub)})^{n}"


def random_point(rng):
    at = {name: float(rng.uniform(-1.5, 1.5)) for name in SLOTS}
    at["t"] = float(rng.uniform(-1.5, 1.5))
    return at, {"k": float(rng.uniform(-2.0, 2.0))}


def fd_gradient(e, at, params, rel_step=1e-6):
    """Central differences over (x, v, z, s)."""
    out = np.empty(4)
    for j, name in enumerate(SLOTS):
        h = rel_step * max(1.0, abs(at[name]))
        up = dict(at, **{name: at[name] + h})
        dn = dict(at, **{name: at[name] - h})
        out[j] = (eval_with_sens(e, up, params).value - eval_with_sens(e, dn, params).value) / (2 * h)
    return out


def ad_relative_error(e, at, params):
    """max_j |ad_j - fd_j| / max(1, |ad_j|)."""
    ad = eval_with_sens(e, at, params).partials
    fd = fd_gradient(e, at, params)
    return float(np.max(np.abs(ad - fd) / np.maximum(1.0, np.abs(ad))))


def corpus(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        src = random_source(rng)
        at, params = random_point(rng)
        yield parse(src), at, params
