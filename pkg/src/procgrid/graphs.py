"""Small directed-graph helpers shared by the analysis tools and the engine."""

from __future__ import annotations


def strongly_connected_components(
    nodes: list[str], edges: dict[str, list[str]]
) -> list[list[str]]:
    """Tarjan's algorithm, iterative so deep graphs cannot blow the stack.

    Components are returned sorted by their smallest member, members sorted,
    so output is stable for identical inputs.
    """
    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = 0
    components: list[list[str]] = []

    for root in nodes:
        if root in index:
            continue
        work: list[tuple[str, int]] = [(root, 0)]
        while work:
            v, ei = work[-1]
            if ei == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            advanced = False
            succs = edges.get(v, [])
            while ei < len(succs):
                w = succs[ei]
                ei += 1
                if w not in index:
                    work[-1] = (v, ei)
                    work.append((w, 0))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                components.append(sorted(comp))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])

    components.sort(key=lambda c: c[0])
    return components


def condense(
    components: list[list[str]], edges: dict[str, list[str]]
) -> list[tuple[int, int]]:
    """Edges of the condensation DAG as (component_index, component_index)."""
    member: dict[str, int] = {}
    for ci, comp in enumerate(components):
        for node in comp:
            member[node] = ci
    dag: set[tuple[int, int]] = set()
    for src, dsts in edges.items():
        if src not in member:
            continue
        for dst in dsts:
            if dst not in member:
                continue
            a, b = member[src], member[dst]
            if a != b:
                dag.add((a, b))
    return sorted(dag)
