from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from hybker.networks import Network
from hybker.newick import parse_network, parse_tree
from hybker.trees import Instance

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ---------------------------------------------------------------------------
# Small hand-built instances used across the test modules


FIG1_NETWORK = "((a,(b)#H1),((#H1,(c)#H2),(#H2,d)));"
FIG1_TREE = "((a,b),c,d);"

FIG3_TREES = (
    "((d,(c,(b,a))),(e,(f,(g,h))));",
    "((a,b,c,d),((f,g,h),e));",
    "((d,(c,(b,(a,e)))),(f,g,h));",
    "((f,(g,h)),(d,(c,(b,a,e))));",
)

FIG4_TREES = ("(((a,b,c,d,e),f),g);", "(g,(a,(b,c,(d,(e,f)))));")


def build(edges: list[tuple[str, str]], leaves: str) -> Network:
    names = sorted({v for e in edges for v in e})
    ids = {v: i for i, v in enumerate(names)}
    return Network.from_edges([(ids[u], ids[v]) for u, v in edges], {ids[x]: x for x in leaves})


def fig2_network() -> Network:
    """A 4-reticulation network with vertex sides r3, r4 and leaves d, e, f
    on the edge side t3 -> r1."""
    edges = [
        ("t1", "t2"), ("t1", "t3"), ("t2", "r1"), ("t2", "r3"), ("t3", "sd"),
        ("sd", "d"), ("sd", "se"), ("se", "e"), ("se", "sf"), ("sf", "f"), ("sf", "r1"),
        ("r1", "t5"), ("t5", "r2"), ("t5", "r3"), ("t3", "t4"), ("t4", "r2"), ("t4", "r4"),
        ("r2", "r4"), ("r3", "g"), ("r4", "h"),
    ]
    # d, e, f subdivide the edge t3 -> r1
    return build(edges, "defgh")


def fig4_network() -> Network:
    edges = [
        ("root", "y"), ("root", "x1"), ("y", "g"), ("y", "R2"), ("x1", "u1"), ("x1", "Rf"),
        ("u1", "a"), ("u1", "u2"), ("u2", "b"), ("u2", "u2p"), ("u2p", "c"), ("u2p", "R2"),
        ("R2", "u3"), ("u3", "d"), ("u3", "u4"), ("u4", "e"), ("u4", "Rf"), ("Rf", "f"),
    ]
    return build(edges, "abcdefg")


@pytest.fixture
def fig1():
    return parse_network(FIG1_NETWORK), parse_tree(FIG1_TREE)


@pytest.fixture
def fig2():
    return fig2_network()


@pytest.fixture
def fig3():
    return Instance(tuple(parse_tree(s) for s in FIG3_TREES), 1)


@pytest.fixture
def fig4():
    return Instance(tuple(parse_tree(s) for s in FIG4_TREES), 2), fig4_network()
