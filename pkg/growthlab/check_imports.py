"""Probe for the optional ``pandas`` dependency of the ``[full]`` variant."""

import functools

try:
    import pandas

    _IS_FULL_MODULE = True
    _PROBLEM_MSG = None
except (ModuleNotFoundError, ImportError) as exc:
    pandas = None
    _IS_FULL_MODULE = False
    _PROBLEM_MSG = (
        f"Import of '{exc.name}' failed; DataFrame exports of trajectories, "
        "moment tables and reports need it, please install growthlab[full]"
    )


def assert_full_module_variant(inner_func):
    """Make ``inner_func`` raise when ``pandas`` is missing."""

    @functools.wraps(inner_func)
    def safe_func(*a, **kw):
        if not _IS_FULL_MODULE:
            raise Exception(f"{inner_func.__qualname__}: {_PROBLEM_MSG}")
        return inner_func(*a, **kw)

    return safe_func
