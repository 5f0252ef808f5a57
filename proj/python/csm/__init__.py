"""Python access to the collective student model core."""

import json

from . import _core
from ._core import edge_shade, mann_whitney_u, run_cli, welch_t_test

__all__ = [
    "api_get",
    "build_automaton",
    "edge_shade",
    "layout",
    "mann_whitney_u",
    "render_dot",
    "render_svg",
    "run_cli",
    "welch_t_test",
]


def build_automaton(corpus, config, grouped=True):
    return json.loads(_core.build_automaton(str(corpus), str(config), grouped))


def layout(automaton, min_node_freq=0.0, min_edge_freq=0.0):
    return json.loads(_core.layout(json.dumps(automaton), min_node_freq, min_edge_freq))


def render_svg(layout_doc):
    return _core.render_svg(json.dumps(layout_doc))


def render_dot(layout_doc):
    return _core.render_dot(json.dumps(layout_doc))


def api_get(store, path, **query):
    """GET against the read-only API of a store, without a socket."""
    status, body = _core.api_get(str(store), path, {k: str(v) for k, v in query.items()})
    return status, json.loads(body) if body.startswith(("{", "[")) else body
