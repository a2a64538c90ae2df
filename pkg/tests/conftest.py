import json
import random
from pathlib import Path

import pytest

from codeatlas import model
from codeatlas.ingest import scan
from codeatlas.model import MapEdge, MapGraph, MapNode, Relation


def pytest_addoption(parser):
    parser.addoption(
        "--run-live",
        action="store_true",
        default=False,
        help="run the live-provider smoke test (needs credentials)",
    )


def make_tree(root: Path, files: dict[str, str]) -> Path:
    for rel, content in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    return root


@pytest.fixture
def tiny_tree(tmp_path):
    return make_tree(
        tmp_path / "tiny",
        {
            "a.py": "print('a')\n",
            "b.py": "x = 1\ny = 2\n",
            "README.md": "docs\n",
        },
    )


@pytest.fixture
def tiny_snapshot(tiny_tree):
    return scan(tiny_tree, {"py"})


def fixture_project(tmp_path, count: int, prefix: str = "mod") -> Path:
    """A synthetic Python project with ``count`` files of varying size."""
    files = {
        f"src/{prefix}{i:03d}.py": "\n".join(f"line_{j} = {j}" for j in range(i % 7 + 1))
        + "\n"
        for i in range(count)
    }
    return make_tree(tmp_path / f"proj{count}", files)


def overview_payload(paths=()):
    guide = [
        {"stepNumber": 1, "text": "Start with the core module.", "moduleName": "Core"}
    ]
    return {
        "summary": "Synthetic project used by scripted runs.",
        "entryPoint": paths[0] if paths else "main.py",
        "howToRun": "python main.py",
        "modules": [
            {"name": "Core", "description": "Everything.", "components": ["Core"]}
        ],
        "architectureGuide": guide,
    }


def graph_dot_covering(paths, extra_paths=()):
    """A minimal business-component DOT graph whose keyFiles name ``paths``
    plus any ``extra_paths`` (hallucinations)."""
    listed = ";".join(list(paths) + list(extra_paths))
    return (
        "digraph G {\n"
        f'  Core [label="Core: (the whole project)", keyFiles="{listed}"];\n'
        '  Docs [label="Docs: (supporting material)"];\n'
        '  Core -> Docs [label="documents the core"];\n'
        "}\n"
    )


def scripted_completion(paths, extra_paths=(), with_overview=True):
    """A canned completion: JSON overview block plus DOT block, the shape a
    well-behaved model reply takes."""
    parts = []
    if with_overview:
        parts.append("```json\n" + json.dumps(overview_payload(list(paths))) + "\n```")
    parts.append("```dot\n" + graph_dot_covering(paths, extra_paths) + "```")
    return "Here is the analysis.\n\n" + "\n\n".join(parts) + "\n"


def coverage_script(snapshot, tp_sequence, with_overview=True):
    """One scripted response per entry: response i covers the first
    tp_sequence[i] snapshot files."""
    ordered = sorted(snapshot.paths)
    return [
        scripted_completion(ordered[:tp], with_overview=with_overview)
        for tp in tp_sequence
    ]


# ---------------------------------------------------------------------------
# randomized graph generator (shared by round-trip tests)

_WORDS = (
    "auth", "store", "index", "router", "parser", "cache", "worker",
    "ledger", "mailer", "report", "engine", "loader",
)


def _ident(rng: random.Random) -> str:
    return f"{rng.choice(_WORDS)}_{rng.randrange(1000)}"


def _text(rng: random.Random) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 4)))


def random_graph(rng: random.Random, kind: str, max_nodes: int = 12) -> MapGraph:
    node_count = rng.randint(1, max_nodes)
    ids = []
    while len(ids) < node_count:
        candidate = _ident(rng)
        if candidate not in ids:
            ids.append(candidate)
    nodes = []
    for node_id in ids:
        if kind == model.LOCAL:
            nodes.append(
                MapNode(
                    node_id=node_id,
                    label=_text(rng),
                    name=_ident(rng),
                    member_kind=rng.choice(model.MEMBER_KINDS),
                )
            )
        else:
            nodes.append(
                MapNode(
                    node_id=node_id,
                    label=_text(rng),
                    name=_ident(rng),
                    description=_text(rng),
                    key_functions=tuple(_ident(rng) for _ in range(rng.randint(0, 3))),
                    key_variables=tuple(_ident(rng) for _ in range(rng.randint(0, 2))),
                    key_files=tuple(
                        f"src/{_ident(rng)}.py" for _ in range(rng.randint(0, 3))
                    ),
                )
            )
    legal = sorted(model.legal_relations(kind))
    edges = {}
    for _ in range(rng.randint(0, node_count * 2)):
        src, dst = rng.choice(ids), rng.choice(ids)
        if src == dst:
            continue
        relation_kind = rng.choice(legal)
        annotation = _text(rng) if rng.random() < 0.7 else ""
        text = ""
        if relation_kind in model.TEXT_RELATIONS:
            text = annotation if rng.random() < 0.5 else _text(rng)
        edge = MapEdge(src, dst, Relation(relation_kind, text), annotation)
        edges[edge.sort_key()] = edge
    group_count = rng.randint(0, 3)
    groups = []
    used_names = set()
    for _ in range(group_count):
        name = f"Module_{_ident(rng)}"
        if name in used_names:
            continue
        used_names.add(name)
        members = tuple(rng.sample(ids, rng.randint(1, len(ids))))
        groups.append((name, members))
    return MapGraph(
        kind=kind, nodes=tuple(nodes), edges=tuple(edges.values()),
        module_groups=tuple(groups),
    )
