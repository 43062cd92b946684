"""Design-language syntax tree and the flattened form the rest of the tools use."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..isa import Program

BUILTIN_SIGNEDNESS = ("unsigned", "signed", "raw")
AE_CLASSES = ("STAN", "CTRL", "MEM")
MODES = ("sync", "async")

MAX_WIDTH = 32
MAX_PERIOD = 4096


@dataclass(frozen=True)
class SourceLoc:
    line: int
    col: int


@dataclass(frozen=True)
class ValueType:
    """Nominal type: two types are compatible iff name, width, and signedness all match."""

    name: str
    width: int
    signedness: str

    def render(self) -> str:
        if self.name in BUILTIN_SIGNEDNESS:
            return f"{self.name}({self.width})"
        return self.name


# wildcard used only by the library file-transfer elements; compatible with anything
ANY_TYPE = ValueType("any", 0, "raw")


def types_compatible(a: ValueType, b: ValueType) -> bool:
    # compare by name so the wildcard survives serialization round trips
    if a.name == ANY_TYPE.name or b.name == ANY_TYPE.name:
        return True
    return a == b


@dataclass(frozen=True)
class PortDecl:
    name: str
    direction: str  # "in" | "out"
    value_type: ValueType
    loc: SourceLoc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class EndpointRef:
    """`inst.port` inside a composite body, or a bare own-port name (inst None)."""

    inst: str | None
    port: str

    def render(self) -> str:
        return self.port if self.inst is None else f"{self.inst}.{self.port}"


@dataclass(frozen=True)
class SignalDecl:
    id: str
    value_type: ValueType
    mode: str
    period: int
    source: EndpointRef
    dests: tuple[EndpointRef, ...]
    loc: SourceLoc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class InstDecl:
    name: str
    decl: str
    loc: SourceLoc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ProcessDecl:
    """Leaf (has a program) or composite (has children); library file elements are
    native leaves with neither."""

    name: str
    ae_class: str
    ports: tuple[PortDecl, ...] = ()
    insts: tuple[InstDecl, ...] = ()
    signals: tuple[SignalDecl, ...] = ()
    program: Program | None = None
    native: str | None = None  # "file_source" | "file_sink" for library elements
    loc: SourceLoc | None = field(default=None, compare=False)

    def is_leaf(self) -> bool:
        return not self.insts

    def port(self, name: str) -> PortDecl | None:
        for p in self.ports:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class Design:
    name: str
    types: tuple[ValueType, ...]  # user typedefs in source order
    declarations: tuple[ProcessDecl, ...]
    top: str

    def decls_by_name(self) -> dict[str, ProcessDecl]:
        return {d.name: d for d in self.declarations}


@dataclass(frozen=True)
class TypedDesign:
    """Proof token that `design` passed the type checker."""

    design: Design


# --- flattened (elaborated) form -------------------------------------------


@dataclass(frozen=True)
class Endpoint:
    path: str
    port: str

    def render(self) -> str:
        return f"{self.path}.{self.port}"


@dataclass(frozen=True)
class FlatInstance:
    path: str
    decl: str
    ae_class: str
    ports: tuple[PortDecl, ...]
    program: Program | None
    native: str | None = None


@dataclass(frozen=True)
class FlatSignal:
    """End-to-end connection after hierarchy resolution.

    `dests` take part in synchronous readiness; `taps` are lossy probe
    endpoints that never hold a transfer back.
    """

    id: str
    value_type: ValueType
    mode: str
    period: int
    source: Endpoint
    dests: tuple[Endpoint, ...]
    taps: tuple[Endpoint, ...] = ()


@dataclass(frozen=True)
class HierNode:
    """One node of the instantiation tree, composites included."""

    path: str
    decl: str
    kind: str  # "leaf" | "composite"


@dataclass(frozen=True)
class FlatDesign:
    name: str
    instances: tuple[FlatInstance, ...]  # leaves only, sorted by path
    signals: tuple[FlatSignal, ...]  # sorted by id
    hierarchy: tuple[HierNode, ...]  # full tree, sorted by path

    def instance(self, path: str) -> FlatInstance | None:
        for inst in self.instances:
            if inst.path == path:
                return inst
        return None

    def signal(self, sid: str) -> FlatSignal | None:
        for s in self.signals:
            if s.id == sid:
                return s
        return None
