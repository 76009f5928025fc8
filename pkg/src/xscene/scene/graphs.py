"""Scene graphs: entities as nodes, spatial relations as directed edges."""

from __future__ import annotations

from dataclasses import dataclass, field

RELATION_VOCABULARY = (
    "front_of",
    "behind",
    "left_of",
    "right_of",
    "on",
    "near",
    "adjacent_to",
)


@dataclass(frozen=True)
class GraphNode:
    id: str
    category: str
    attributes: str = ""


@dataclass(frozen=True)
class GraphEdge:
    src: str
    relation: str
    dst: str


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def node(self, node_id: str) -> GraphNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


@dataclass
class ValidationFinding:
    kind: str
    message: str


@dataclass
class ValidationReport:
    findings: list[ValidationFinding] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.findings


def validate_scene_graph(
    graph: SceneGraph, relation_vocabulary: tuple[str, ...] = RELATION_VOCABULARY
) -> ValidationReport:
    """Report-only check for dangling edges, unknown relations, duplicate ids."""
    report = ValidationReport()
    seen: set[str] = set()
    for node in graph.nodes:
        if node.id in seen:
            report.findings.append(
                ValidationFinding("duplicate_node", f"duplicate node id {node.id!r}")
            )
        seen.add(node.id)
    for edge in graph.edges:
        for endpoint in (edge.src, edge.dst):
            if endpoint not in seen:
                report.findings.append(
                    ValidationFinding(
                        "dangling_edge",
                        f"edge {edge.src!r} -{edge.relation}-> {edge.dst!r} "
                        f"references missing node {endpoint!r}",
                    )
                )
        if edge.relation not in relation_vocabulary:
            report.findings.append(
                ValidationFinding(
                    "unknown_relation", f"relation {edge.relation!r} not in vocabulary"
                )
            )
    return report
