from functools import lru_cache

import pytest
from hypothesis import settings

from sbpdg.operators import build_operators
from sbpdg.solver import SchemeConfig, build_discretization, build_mesh

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@lru_cache(maxsize=None)
def cached_ops(variant, p, c=0.0):
    return build_operators(variant, p, c)


@lru_cache(maxsize=None)
def cached_disc(problem, p, variant="QuadratureI", c="c_DG", form="strong_fr", lam=1.0,
                M=3, p_map=1):
    kw = dict(p=p, variant=variant, c=c, form=form, M=M, p_map=p_map)
    if problem == "advection":
        kw["lam"] = lam
    cfg = SchemeConfig.defaults(problem, **kw)
    return build_discretization(cfg, ops=cached_ops(variant, p, cfg.c_value), mesh=build_mesh(cfg))


# summary lines collected by the acceptance suite
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
