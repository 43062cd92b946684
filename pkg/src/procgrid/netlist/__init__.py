"""Design language front end: parse, typecheck, elaborate, print."""

from .ast import (
    ANY_TYPE,
    Design,
    Endpoint,
    EndpointRef,
    FlatDesign,
    FlatInstance,
    FlatSignal,
    HierNode,
    InstDecl,
    PortDecl,
    ProcessDecl,
    SignalDecl,
    SourceLoc,
    TypedDesign,
    ValueType,
    types_compatible,
)
from .check import typecheck
from .elab import ROOT_PATH, elaborate
from .library import FILE_SINK, FILE_SOURCE, LIBRARY_DECLS
from .parser import parse_design
from .printer import export_flat_json, print_design

__all__ = [
    "ANY_TYPE",
    "Design",
    "Endpoint",
    "EndpointRef",
    "FlatDesign",
    "FlatInstance",
    "FlatSignal",
    "HierNode",
    "InstDecl",
    "PortDecl",
    "ProcessDecl",
    "SignalDecl",
    "SourceLoc",
    "TypedDesign",
    "ValueType",
    "types_compatible",
    "typecheck",
    "ROOT_PATH",
    "elaborate",
    "FILE_SINK",
    "FILE_SOURCE",
    "LIBRARY_DECLS",
    "parse_design",
    "export_flat_json",
    "print_design",
]
